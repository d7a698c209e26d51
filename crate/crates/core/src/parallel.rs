//! Data-parallel helpers for per-term scans.
//!
//! With the `parallel` feature the scans run on the rayon pool; without it (or
//! with [`Exec::Sequential`]) they run on the calling thread. Results are
//! always collected in index order, so both modes give identical output.

/// Runtime choice of execution mode for per-term scans.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Exec {
    Sequential,
    #[default]
    Parallel,
}

impl Exec {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }
}

/// Number of worker threads a parallel scan would use.
pub fn current_num_threads() -> usize {
    #[cfg(feature = "parallel")]
    {
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "parallel"))]
    {
        1
    }
}

/// `(0..n).map(f).collect()`, possibly in parallel, always in index order.
pub fn map_indexed<T, F>(exec: Exec, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() && n > 64 {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..n).map(f).collect()
}

/// Sum of `f(i)` over `0..n` with a fixed left-to-right order.
pub fn sum_indexed<F>(exec: Exec, n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    map_indexed(exec, n, f).into_iter().sum()
}
