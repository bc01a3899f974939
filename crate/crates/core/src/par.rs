//! Data-parallel helpers with a sequential fallback.
//!
//! All helpers preserve input order, so results are identical whichever
//! [`ExecMode`] is used. Without the `parallel` feature, `Parallel` silently
//! runs sequentially.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ExecMode {
    Sequential,
    #[default]
    Parallel,
}

impl ExecMode {
    /// Whether this mode actually fans out across threads in this build.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == ExecMode::Parallel
    }
}

/// `(0..n).map(f)` collected in index order.
pub fn map_range<T, F>(mode: ExecMode, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if mode.is_parallel() {
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = mode;
    (0..n).map(f).collect()
}

/// `items.iter().map(f)` collected in order.
pub fn map_slice<I, T, F>(mode: ExecMode, items: &[I], f: F) -> Vec<T>
where
    I: Sync,
    T: Send,
    F: Fn(&I) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if mode.is_parallel() {
        return items.par_iter().map(f).collect();
    }
    let _ = mode;
    items.iter().map(f).collect()
}

/// Fallible variant of [`map_slice`]; the first error in input order wins.
pub fn try_map_slice<I, T, E, F>(mode: ExecMode, items: &[I], f: F) -> Result<Vec<T>, E>
where
    I: Sync,
    T: Send,
    E: Send,
    F: Fn(&I) -> Result<T, E> + Sync + Send,
{
    map_slice(mode, items, f).into_iter().collect()
}

/// Run `f` inside a pool of `jobs` threads (no-op wrapper without rayon).
pub fn with_jobs<R: Send>(jobs: usize, f: impl FnOnce() -> R + Send) -> R {
    #[cfg(feature = "parallel")]
    if jobs > 0 {
        if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
            return pool.install(f);
        }
    }
    let _ = jobs;
    f()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree() {
        let seq = map_range(ExecMode::Sequential, 100, |i| (i as f64).sqrt());
        let par = map_range(ExecMode::Parallel, 100, |i| (i as f64).sqrt());
        assert_eq!(seq, par);
    }

    #[test]
    fn first_error_in_order() {
        let items: Vec<i32> = (0..50).collect();
        let r: Result<Vec<i32>, i32> =
            try_map_slice(ExecMode::Parallel, &items, |&v| if v % 7 == 6 { Err(v) } else { Ok(v) });
        assert_eq!(r, Err(6));
    }
}
