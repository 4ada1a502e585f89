//! Worker-pool dispatch for the batch loops. With the `parallel` feature a
//! rayon pool maps work items concurrently; without it the same code path
//! degenerates to a plain loop. Results are always collected in item order,
//! so callers see identical output either way.

/// An execution context with a fixed worker count. `workers == 0` means "use
/// all available parallelism"; `workers == 1` always runs sequentially.
pub enum Pool {
    Sequential,
    #[cfg(feature = "parallel")]
    Rayon(rayon::ThreadPool),
}

impl Pool {
    pub fn new(workers: usize) -> Pool {
        #[cfg(feature = "parallel")]
        {
            if workers == 1 {
                return Pool::Sequential;
            }
            let mut builder = rayon::ThreadPoolBuilder::new();
            if workers > 0 {
                builder = builder.num_threads(workers);
            }
            match builder.build() {
                Ok(pool) => Pool::Rayon(pool),
                Err(_) => Pool::Sequential,
            }
        }
        #[cfg(not(feature = "parallel"))]
        {
            let _ = workers;
            Pool::Sequential
        }
    }

    pub fn workers(&self) -> usize {
        match self {
            Pool::Sequential => 1,
            #[cfg(feature = "parallel")]
            Pool::Rayon(p) => p.current_num_threads(),
        }
    }

    /// Apply `f` to every index in `0..n`, returning results in index order.
    pub fn map_indexed<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            Pool::Sequential => (0..n).map(f).collect(),
            #[cfg(feature = "parallel")]
            Pool::Rayon(pool) => {
                use rayon::prelude::*;
                pool.install(|| (0..n).into_par_iter().map(f).collect())
            }
        }
    }

    /// Apply `f` to every item of a slice, returning results in item order.
    pub fn map_slice<I, T, F>(&self, items: &[I], f: F) -> Vec<T>
    where
        I: Sync,
        T: Send,
        F: Fn(&I) -> T + Sync + Send,
    {
        match self {
            Pool::Sequential => items.iter().map(f).collect(),
            #[cfg(feature = "parallel")]
            Pool::Rayon(pool) => {
                use rayon::prelude::*;
                pool.install(|| items.par_iter().map(f).collect())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved() {
        for workers in [1, 2, 4] {
            let pool = Pool::new(workers);
            let out = pool.map_indexed(100, |i| i * i);
            assert_eq!(out, (0..100).map(|i| i * i).collect::<Vec<_>>());
        }
    }

    #[test]
    fn worker_one_is_sequential() {
        assert!(matches!(Pool::new(1), Pool::Sequential));
    }
}
