//! Replica scheduling.
//!
//! Replica `i` always receives the same random stream regardless of which
//! worker runs it, and results are collected in replica order, so the
//! sequential and parallel executors produce identical output.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// How independent replicas are scheduled.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Executor {
    #[cfg_attr(not(feature = "parallel"), default)]
    Sequential,
    #[cfg(feature = "parallel")]
    #[default]
    Parallel,
}

impl Executor {
    /// Evaluates `f(0), …, f(n - 1)` and returns the results in index order.
    pub fn map<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            Executor::Sequential => (0..n).map(f).collect(),
            #[cfg(feature = "parallel")]
            Executor::Parallel => (0..n).into_par_iter().map(f).collect(),
        }
    }

    /// Like [`Executor::map`] but for fallible replicas; the first error in
    /// index order wins.
    pub fn try_map<T, E, F>(self, n: usize, f: F) -> Result<Vec<T>, E>
    where
        T: Send,
        E: Send,
        F: Fn(usize) -> Result<T, E> + Sync + Send,
    {
        self.map(n, f).into_iter().collect()
    }
}
