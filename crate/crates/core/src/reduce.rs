//! Reductions with a fixed chunk partition, so results do not depend on the
//! number of worker threads.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

const CHUNK: usize = 2048;

/// Folds each fixed-size chunk into an accumulator, then merges the chunk
/// results left to right.
pub(crate) fn chunked_fold<T, A, F, M>(items: &[T], zero: A, fold: F, merge: M) -> A
where
    T: Sync,
    A: Copy + Send + Sync,
    F: Fn(&mut A, &T) + Sync + Send,
    M: Fn(A, A) -> A,
{
    let per_chunk = |chunk: &[T]| {
        let mut acc = zero;
        for item in chunk {
            fold(&mut acc, item);
        }
        acc
    };
    #[cfg(feature = "parallel")]
    let partials: Vec<A> = items.par_chunks(CHUNK).map(per_chunk).collect();
    #[cfg(not(feature = "parallel"))]
    let partials: Vec<A> = items.chunks(CHUNK).map(per_chunk).collect();
    partials.into_iter().fold(zero, merge)
}

pub(crate) fn chunked_sum<T, F>(items: &[T], f: F) -> f64
where
    T: Sync,
    F: Fn(&T) -> f64 + Sync + Send,
{
    chunked_fold(items, 0.0, |acc, item| *acc += f(item), |a, b| a + b)
}

/// Order-preserving map over indices.
pub(crate) fn map_indices<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
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
