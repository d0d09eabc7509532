//! Data-parallel map helpers with a sequential fallback.
//!
//! When the `parallel` feature is enabled the maps run on the rayon pool;
//! otherwise they run sequentially. Both paths produce results in input
//! order, so downstream reductions see the same operand order regardless
//! of worker count and outputs are bitwise identical either way.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Map `f` over `items`, preserving input order in the output.
pub fn map_slice<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Map `f` over `0..n`, preserving index order in the output.
pub fn map_range<U, F>(n: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Run `f` on a pool with `workers` threads (0 = rayon default). Without
/// the `parallel` feature the closure just runs on the calling thread.
pub fn with_workers<R: Send>(workers: usize, f: impl FnOnce() -> R + Send) -> R {
    #[cfg(feature = "parallel")]
    {
        if workers == 0 {
            f()
        } else {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .build()
                .expect("failed to build worker pool");
            pool.install(f)
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = workers;
        f()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_preserves_order() {
        let xs: Vec<u64> = (0..1000).collect();
        let ys = map_slice(&xs, |x| x * 2);
        assert_eq!(ys, (0..1000).map(|x| x * 2).collect::<Vec<_>>());
        let zs = map_range(100, |i| i as u64);
        assert_eq!(zs, (0..100).collect::<Vec<_>>());
    }

    #[test]
    fn worker_count_does_not_change_result() {
        let xs: Vec<f32> = (0..512).map(|i| (i as f32).sin()).collect();
        let a = with_workers(1, || map_slice(&xs, |x| x.exp()));
        let b = with_workers(4, || map_slice(&xs, |x| x.exp()));
        assert_eq!(a, b);
    }
}
