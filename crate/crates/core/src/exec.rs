//! Execution mode for the data-parallel scans.
//!
//! Every reduction here is deterministic: maxima break ties towards the
//! smallest index, and ordered collections keep input order. Parallel and
//! sequential runs therefore return identical values *and* witnesses.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// How the pairwise and per-point scans are executed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Exec {
    Sequential,
    /// Uses rayon when the `parallel` feature is enabled, otherwise falls back
    /// to [`Exec::Sequential`].
    Parallel,
}

impl Default for Exec {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Exec::Parallel
        } else {
            Exec::Sequential
        }
    }
}

impl Exec {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }
}

fn pick<W>(a: (usize, f64, W), b: (usize, f64, W)) -> (usize, f64, W) {
    if b.1 > a.1 || (b.1 == a.1 && b.0 < a.0) {
        b
    } else {
        a
    }
}

/// Maximum of `row(i)` over `0..n`, ties resolved to the smallest `i`.
///
/// `row` returns `None` for rows that contribute nothing. The returned tuple
/// is `(i, value, witness)`.
pub fn argmax_rows<W, F>(exec: Exec, n: usize, row: F) -> Option<(usize, f64, W)>
where
    W: Send,
    F: Fn(usize) -> Option<(f64, W)> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return (0..n).into_par_iter().filter_map(|i| row(i).map(|(v, w)| (i, v, w))).reduce_with(pick);
    }
    let _ = exec;
    (0..n).filter_map(|i| row(i).map(|(v, w)| (i, v, w))).reduce(pick)
}

/// `(0..n).map(f).collect()` in input order.
pub fn map_indices<T, F>(exec: Exec, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..n).map(f).collect()
}

/// Keeps the items satisfying `pred`, preserving order.
pub fn filter_items<T, F>(exec: Exec, items: &[T], pred: F) -> Vec<T>
where
    T: Copy + Send + Sync,
    F: Fn(T) -> bool + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return items.par_iter().copied().filter(|&x| pred(x)).collect();
    }
    let _ = exec;
    items.iter().copied().filter(|&x| pred(x)).collect()
}
