//! Row-parallel helpers. Results never depend on the thread count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Concatenates per-row outputs in row order.
pub(crate) fn collect_rows<T, F>(height: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> Vec<T> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    let rows: Vec<Vec<T>> = (0..height).into_par_iter().map(f).collect();
    #[cfg(not(feature = "parallel"))]
    let rows: Vec<Vec<T>> = (0..height).map(f).collect();
    rows.into_iter().flatten().collect()
}

/// Maximum of a per-row statistic; `max` is order-independent.
pub(crate) fn max_over_rows<F>(height: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    #[cfg(feature = "parallel")]
    return (0..height).into_par_iter().map(f).reduce(|| 0.0, f64::max);
    #[cfg(not(feature = "parallel"))]
    (0..height).map(f).fold(0.0, f64::max)
}

pub(crate) fn map_indexed<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(usize, &T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    return items.par_iter().enumerate().map(|(i, t)| f(i, t)).collect();
    #[cfg(not(feature = "parallel"))]
    items.iter().enumerate().map(|(i, t)| f(i, t)).collect()
}
