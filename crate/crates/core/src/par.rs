//! Data-parallel cell kernels with a sequential fallback.
//!
//! Every reduction is evaluated over fixed-size chunks whose partial sums are
//! combined left to right, so the parallel and sequential paths return
//! bitwise-identical results regardless of the number of worker threads.
//! The `parallel` feature selects the rayon path for the dispatching
//! functions; the explicit `*_seq` / `*_par` variants stay available for
//! benchmarking and equivalence tests.

/// Number of cells per reduction chunk.
pub const CHUNK: usize = 512;

/// Arrays shorter than this stay on the calling thread; the dispatch cost
/// outweighs the work below it.
pub const PAR_MIN_LEN: usize = 16 * 1024;

#[cfg(feature = "parallel")]
fn go_parallel(len: usize) -> bool {
    len >= PAR_MIN_LEN && rayon::current_num_threads() > 1
}

#[cfg(feature = "parallel")]
use rayon::prelude::*;

fn chunk_sum(xs: &[f64]) -> f64 {
    xs.iter().sum()
}

fn chunk_dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn sum_seq(xs: &[f64]) -> f64 {
    xs.chunks(CHUNK).map(chunk_sum).fold(0.0, |acc, s| acc + s)
}

pub fn dot_seq(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.chunks(CHUNK)
        .zip(b.chunks(CHUNK))
        .map(|(x, y)| chunk_dot(x, y))
        .fold(0.0, |acc, s| acc + s)
}

#[cfg(feature = "parallel")]
pub fn sum_par(xs: &[f64]) -> f64 {
    let partials: Vec<f64> = xs.par_chunks(CHUNK).map(chunk_sum).collect();
    partials.into_iter().fold(0.0, |acc, s| acc + s)
}

#[cfg(feature = "parallel")]
pub fn dot_par(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let partials: Vec<f64> = a
        .par_chunks(CHUNK)
        .zip(b.par_chunks(CHUNK))
        .map(|(x, y)| chunk_dot(x, y))
        .collect();
    partials.into_iter().fold(0.0, |acc, s| acc + s)
}

pub fn sum(xs: &[f64]) -> f64 {
    #[cfg(feature = "parallel")]
    if go_parallel(xs.len()) {
        return sum_par(xs);
    }
    sum_seq(xs)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    #[cfg(feature = "parallel")]
    if go_parallel(a.len()) {
        return dot_par(a, b);
    }
    dot_seq(a, b)
}

/// Applies `f(index, &mut out[index])` to every element.
pub fn for_each_indexed<F>(out: &mut [f64], f: F)
where
    F: Fn(usize, &mut f64) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if go_parallel(out.len()) {
        return for_each_indexed_par(out, f);
    }
    for_each_indexed_seq(out, f)
}

pub fn for_each_indexed_seq<F>(out: &mut [f64], f: F)
where
    F: Fn(usize, &mut f64),
{
    out.iter_mut().enumerate().for_each(|(i, o)| f(i, o));
}

#[cfg(feature = "parallel")]
pub fn for_each_indexed_par<F>(out: &mut [f64], f: F)
where
    F: Fn(usize, &mut f64) + Sync + Send,
{
    out.par_iter_mut()
        .with_min_len(CHUNK)
        .enumerate()
        .for_each(|(i, o)| f(i, o));
}

/// Maps independent jobs, in parallel when the feature is enabled. Output
/// order matches input order.
pub fn map_jobs<T, R, F>(jobs: Vec<T>, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        jobs.into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        jobs.into_iter().map(f).collect()
    }
}
