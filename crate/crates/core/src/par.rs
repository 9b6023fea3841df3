//! Ordered parallel map over replications.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::Stream;

/// Evaluate `f(i, stream.split(i))` for `i = 0..reps` and return results in
/// index order. With `threads = Some(k)` the work runs on a dedicated pool
/// of `k` workers, otherwise on the current pool. Output never depends on
/// the number of workers.
pub fn map_reps<T, F>(stream: &Stream, reps: u64, threads: Option<usize>, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64, &Stream) -> T + Sync + Send,
{
    let run = || -> Vec<T> {
        (0..reps)
            .into_par_iter()
            .map(|i| f(i, &stream.split(i)))
            .collect()
    };
    match threads {
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k.max(1))
                .build()
                .map_err(|e| Error::Parameter(format!("thread pool: {e}")))?;
            Ok(pool.install(run))
        }
        None => Ok(run()),
    }
}
