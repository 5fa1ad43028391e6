//! Data-parallel batch helpers.
//!
//! Batch featurization, batch prediction, and record cleaning are
//! embarrassingly parallel, so the hot paths run on rayon when the
//! `parallel` feature (on by default) is enabled. The `*_seq` entry points
//! are always compiled; they are the fallback for `--no-default-features`
//! builds and the sequential side of the criterion comparison benches.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Map `f` over `items` sequentially.
pub fn map_seq<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    items.iter().map(f).collect()
}

/// Map `f` over `items`, in parallel when the `parallel` feature is enabled.
///
/// `f` must be pure: results are collected in input order, so the output is
/// identical to [`map_seq`] either way.
pub fn map_batch<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Send + Sync) -> Vec<R> {
    #[cfg(feature = "parallel")]
    {
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        map_seq(items, f)
    }
}
