//! Order-preserving parallel map over trajectory indices.
//!
//! Results are always collected in index order and reduced sequentially by
//! the caller, so the worker count never changes a single output bit.

use rayon::prelude::*;

use crate::error::{invalid, Result};

pub fn map_indexed<T, F>(n: usize, workers: Option<usize>, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    let run = || (0..n).into_par_iter().map(&f).collect::<Result<Vec<T>>>();
    match workers {
        None => run(),
        Some(0) => Err(invalid("worker count must be at least 1")),
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| invalid(format!("cannot start {k} workers: {e}")))?
            .install(run),
    }
}
