//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (default) the [`ExecPolicy::Parallel`] policy
//! fans work out over the rayon pool; without it every policy runs on the
//! calling thread. Results are always collected in input order, so output is
//! independent of the worker count.

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ExecPolicy {
    Sequential,
    #[default]
    Parallel,
}

impl ExecPolicy {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == ExecPolicy::Parallel
    }
}

/// Number of workers the parallel policy will use.
pub fn current_num_threads() -> usize {
    #[cfg(feature = "parallel")]
    {
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "parallel"))]
    {
        1
    }
}

/// Ordered map over a slice.
pub fn map<T, R, F>(policy: ExecPolicy, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Send + Sync,
{
    #[cfg(feature = "parallel")]
    if policy.is_parallel() {
        use rayon::prelude::*;
        return items.par_iter().map(f).collect();
    }
    let _ = policy;
    items.iter().map(f).collect()
}

/// Ordered map over an index range.
pub fn map_range<R, F>(policy: ExecPolicy, n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Send + Sync,
{
    #[cfg(feature = "parallel")]
    if policy.is_parallel() {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = policy;
    (0..n).map(f).collect()
}

/// Ordered fallible map; returns the first error in input order.
pub fn try_map<T, R, E, F>(policy: ExecPolicy, items: &[T], f: F) -> Result<Vec<R>, E>
where
    T: Sync,
    R: Send,
    E: Send,
    F: Fn(&T) -> Result<R, E> + Send + Sync,
{
    map(policy, items, f).into_iter().collect()
}

/// Sum of `f(i)` for `i < n`, reduced in a fixed order.
pub fn sum_range<F>(policy: ExecPolicy, n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Send + Sync,
{
    // pairwise over an ordered vector keeps the rounding independent of the
    // split chosen by the scheduler
    pairwise_sum(&map_range(policy, n, f))
}

pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 16 {
        return v.iter().sum();
    }
    let mid = v.len() / 2;
    pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn policies_agree_bitwise() {
        let items: Vec<f64> = (0..1000).map(|i| (i as f64 * 0.37).sin()).collect();
        let a = map(ExecPolicy::Sequential, &items, |v| v.exp());
        let b = map(ExecPolicy::Parallel, &items, |v| v.exp());
        assert_eq!(a, b);
        let s = sum_range(ExecPolicy::Sequential, 1000, |i| items[i] * 1e-3);
        let p = sum_range(ExecPolicy::Parallel, 1000, |i| items[i] * 1e-3);
        assert_eq!(s.to_bits(), p.to_bits());
    }

    #[test]
    fn try_map_reports_first_error() {
        let r: Result<Vec<usize>, usize> =
            try_map(ExecPolicy::Parallel, &[1usize, 2, 3, 4], |&v| if v >= 3 { Err(v) } else { Ok(v) });
        assert_eq!(r, Err(3));
    }
}
