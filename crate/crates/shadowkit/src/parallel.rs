//! Fan-out over independent cells, capped by `SHADOWKIT_THREADS`.

use rayon::prelude::*;

pub const THREADS_VAR: &str = "SHADOWKIT_THREADS";

/// Worker count: the env cap when set and positive, otherwise rayon's default.
pub fn thread_count() -> usize {
    std::env::var(THREADS_VAR)
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .filter(|n| *n > 0)
        .unwrap_or_else(rayon::current_num_threads)
}

/// Maps `f` over `items` in parallel; results come back in input order.
pub fn map_cells<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    let n = thread_count();
    match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
        Ok(pool) => pool.install(|| items.par_iter().map(&f).collect()),
        Err(_) => items.iter().map(f).collect(),
    }
}
