//! Execution backend for the data-parallel loops (model enumeration and replicates).
//!
//! With the `parallel` feature the work is spread over a rayon pool; without it every
//! backend runs on the calling thread. Results are always written by index, so the
//! output never depends on the worker count.

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "MULTIBAYES_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Backend {
    Sequential,
    /// Worker count from [`THREADS_ENV`], else the available parallelism.
    #[default]
    Parallel,
    ParallelWith(usize),
}

impl Backend {
    pub fn threads(self) -> usize {
        match self {
            Backend::Sequential => 1,
            Backend::ParallelWith(n) => n.max(1),
            Backend::Parallel => env_threads().unwrap_or_else(|| {
                std::thread::available_parallelism()
                    .map(|n| n.get())
                    .unwrap_or(1)
            }),
        }
    }
}

fn env_threads() -> Option<usize> {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
}

#[cfg(feature = "parallel")]
fn with_pool<R: Send>(threads: usize, f: impl FnOnce() -> R + Send) -> R {
    match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

/// Evaluate `f(i)` for `i in 0..len`, collected in index order.
pub fn map_indexed<T, F>(backend: Backend, len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if backend != Backend::Sequential {
        use rayon::prelude::*;
        let threads = backend.threads();
        if threads > 1 {
            return with_pool(threads, || (0..len).into_par_iter().map(&f).collect());
        }
    }
    let _ = backend;
    (0..len).map(f).collect()
}

/// Run `f(chunk_index, chunk)` over consecutive `chunk_len`-sized chunks of `out`.
pub fn for_each_chunk<T, F>(backend: Backend, out: &mut [T], chunk_len: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    let chunk_len = chunk_len.max(1);
    #[cfg(feature = "parallel")]
    if backend != Backend::Sequential {
        use rayon::prelude::*;
        let threads = backend.threads();
        if threads > 1 {
            with_pool(threads, || {
                out.par_chunks_mut(chunk_len)
                    .enumerate()
                    .for_each(|(i, c)| f(i, c))
            });
            return;
        }
    }
    let _ = backend;
    out.chunks_mut(chunk_len)
        .enumerate()
        .for_each(|(i, c)| f(i, c));
}
