//! Path-parallel versus sequential Monte Carlo, and FFT versus dense sine
//! transforms.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use spde_lab::coefficients::{CoefficientSet, ScalarFn};
use spde_lab::integrator::{simulate_path, SimConfig};
use spde_lab::noise::SeedSpec;
use spde_lab::par;
use spde_lab::{Field, SpectralGrid, SpectrumKind};

fn batch(c: &mut Criterion) {
    let grid = SpectralGrid::new(64, SpectrumKind::Laplacian).unwrap();
    let cs = CoefficientSet::new(
        ScalarFn::Sine { amplitude: 0.5 },
        ScalarFn::bounded_holder(0.5, 0.5, 0.8, 1.0),
    );
    let cfg = SimConfig::new(Field::mode(&grid, 1, 1.0).unwrap(), cs, 1e-3, 0.05);
    let one = |i: usize| {
        simulate_path(&cfg, &SeedSpec::new(1, i as u64, "bench"))
            .unwrap()
            .final_state
            .h_norm()
    };

    let mut g = c.benchmark_group("paths");
    g.sample_size(10);
    for paths in [16usize, 64] {
        g.bench_with_input(BenchmarkId::new("sequential", paths), &paths, |b, &n| {
            b.iter(|| black_box(par::map_seq(n, one)))
        });
        g.bench_with_input(BenchmarkId::new("parallel", paths), &paths, |b, &n| {
            b.iter(|| black_box(par::map(n, one)))
        });
    }
    g.finish();
}

/// `u_j = Σ_k a_k √2 sin(kπ j/(n+1))` with a precomputed matrix.
fn dense_inverse(matrix: &[f64], coeffs: &[f64], out: &mut [f64]) {
    let n = coeffs.len();
    for (j, o) in out.iter_mut().enumerate() {
        *o = matrix[j * n..(j + 1) * n].iter().zip(coeffs).map(|(m, a)| m * a).sum();
    }
}

fn transforms(c: &mut Criterion) {
    let mut g = c.benchmark_group("dst_inverse");
    for n in [63usize, 255, 1023] {
        let grid = SpectralGrid::new(n, SpectrumKind::Laplacian).unwrap();
        let coeffs: Vec<f64> = (1..=n).map(|k| 1.0 / k as f64).collect();
        let mut out = vec![0.0; n];
        let mut ws = grid.workspace();
        g.bench_with_input(BenchmarkId::new("fft", n), &n, |b, _| {
            b.iter(|| {
                grid.dst_inverse_into(black_box(&coeffs), &mut out, &mut ws);
                black_box(out[0])
            })
        });
        let h = std::f64::consts::PI / (n + 1) as f64;
        let matrix: Vec<f64> = (1..=n)
            .flat_map(|j| (1..=n).map(move |k| std::f64::consts::SQRT_2 * (h * (j * k) as f64).sin()))
            .collect();
        g.bench_with_input(BenchmarkId::new("dense", n), &n, |b, _| {
            b.iter(|| {
                dense_inverse(&matrix, black_box(&coeffs), &mut out);
                black_box(out[0])
            })
        });
    }
    g.finish();
}

criterion_group!(benches, batch, transforms);
criterion_main!(benches);
