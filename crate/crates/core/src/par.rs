//! Data-parallel helpers for independent evolutions.
//!
//! Results are always returned in input order, so aggregation does not depend
//! on scheduling. Without the `parallel` feature everything runs sequentially.

#[cfg(feature = "parallel")]
use std::sync::OnceLock;

/// Environment variable capping the worker count.
pub const THREADS_ENV: &str = "PHONON_LATTICE_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExecPolicy {
    Sequential,
    #[default]
    Parallel,
}

impl ExecPolicy {
    /// Parallel when the feature is compiled in and the thread cap allows more than one worker.
    pub fn from_env() -> Self {
        match thread_cap() {
            Some(1) => ExecPolicy::Sequential,
            _ if cfg!(feature = "parallel") => ExecPolicy::Parallel,
            _ => ExecPolicy::Sequential,
        }
    }
}

/// Thread cap from [`THREADS_ENV`], if set to a positive integer.
pub fn thread_cap() -> Option<usize> {
    std::env::var(THREADS_ENV).ok()?.trim().parse().ok().filter(|&n: &usize| n > 0)
}

#[cfg(feature = "parallel")]
fn pool() -> &'static rayon::ThreadPool {
    static POOL: OnceLock<rayon::ThreadPool> = OnceLock::new();
    POOL.get_or_init(|| {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(n) = thread_cap() {
            b = b.num_threads(n);
        }
        b.build().expect("rayon pool")
    })
}

/// Maps `f` over `items`, preserving order.
pub fn map<T, R, F>(policy: ExecPolicy, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    match policy {
        #[cfg(feature = "parallel")]
        ExecPolicy::Parallel => {
            use rayon::prelude::*;
            pool().install(|| items.par_iter().map(&f).collect())
        }
        _ => items.iter().map(f).collect(),
    }
}

/// Maps a fallible `f` over `items`, returning the first error in input order.
pub fn try_map<T, R, E, F>(policy: ExecPolicy, items: &[T], f: F) -> Result<Vec<R>, E>
where
    T: Sync,
    R: Send,
    E: Send,
    F: Fn(&T) -> Result<R, E> + Sync + Send,
{
    map(policy, items, f).into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn policies_agree_and_keep_order() {
        let xs: Vec<u64> = (0..1000).collect();
        let a = map(ExecPolicy::Sequential, &xs, |x| x * x);
        let b = map(ExecPolicy::Parallel, &xs, |x| x * x);
        assert_eq!(a, b);
        assert_eq!(a[999], 998001);
    }

    #[test]
    fn try_map_reports_first_error() {
        let xs: Vec<i32> = (0..10).collect();
        let r: Result<Vec<i32>, i32> = try_map(ExecPolicy::Parallel, &xs, |&x| if x >= 3 { Err(x) } else { Ok(x) });
        assert_eq!(r, Err(3));
    }
}
