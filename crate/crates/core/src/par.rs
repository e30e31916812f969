//! Data-parallel map over Monte Carlo paths.
//!
//! `map` uses rayon when the `parallel` feature is on and is identical to
//! [`map_seq`] otherwise. Both return results in index order, so any
//! reduction performed afterwards is independent of scheduling.

/// Sequential reference implementation, always available.
pub fn map_seq<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

#[cfg(feature = "parallel")]
pub fn map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    map_seq(n, f)
}

/// Worker-count scope for a whole experiment.
#[derive(Debug, Clone, Copy)]
pub struct Executor {
    workers: usize,
}

impl Executor {
    /// `workers == 0` means "available parallelism".
    pub fn new(workers: usize) -> Self {
        let workers = if workers == 0 {
            std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
        } else {
            workers
        };
        Executor { workers }
    }

    pub fn sequential() -> Self {
        Executor { workers: 1 }
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    /// Runs `f` with [`map`] bound to a pool of `workers` threads.
    #[cfg(feature = "parallel")]
    pub fn install<R, F>(&self, f: F) -> R
    where
        R: Send,
        F: FnOnce() -> R + Send,
    {
        match rayon::ThreadPoolBuilder::new().num_threads(self.workers).build() {
            Ok(pool) => pool.install(f),
            Err(err) => {
                log::warn!(
                    "could not build a {}-thread pool ({err}); using the global pool",
                    self.workers
                );
                f()
            }
        }
    }

    #[cfg(not(feature = "parallel"))]
    pub fn install<R, F>(&self, f: F) -> R
    where
        R: Send,
        F: FnOnce() -> R + Send,
    {
        f()
    }
}

impl Default for Executor {
    fn default() -> Self {
        Executor::new(0)
    }
}
