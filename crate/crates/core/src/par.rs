//! Reductions whose summation order is fixed by the data length alone, so
//! results are bit-identical for every thread count.

use rayon::prelude::*;

const BLOCK: usize = 4096;
const LEAF: usize = 32;

fn pairwise<F: Fn(usize) -> f64>(lo: usize, hi: usize, f: &F) -> f64 {
    if hi - lo <= LEAF {
        let mut s = 0.0;
        for i in lo..hi {
            s += f(i);
        }
        s
    } else {
        let mid = lo + (hi - lo) / 2;
        pairwise(lo, mid, f) + pairwise(mid, hi, f)
    }
}

/// Pairwise-tree sum of `f(0) + ... + f(n-1)`.
pub(crate) fn sum_by<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    if n <= BLOCK {
        return pairwise(0, n, &f);
    }
    let blocks = n.div_ceil(BLOCK);
    let partial: Vec<f64> =
        (0..blocks).into_par_iter().map(|b| pairwise(b * BLOCK, ((b + 1) * BLOCK).min(n), &f)).collect();
    pairwise(0, partial.len(), &|i| partial[i])
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    sum_by(a.len(), |i| a[i] * b[i])
}

pub(crate) fn max_by<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    (0..n).into_par_iter().map(|i| f(i)).reduce(|| f64::NEG_INFINITY, f64::max)
}

/// `y += a * x`
pub(crate) fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    y.par_iter_mut().zip(x.par_iter()).for_each(|(yi, xi)| *yi += a * xi);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_is_independent_of_pool_size() {
        let xs: Vec<f64> = (0..100_003).map(|i| ((i as f64) * 0.37).sin() / 3.0).collect();
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| sum_by(xs.len(), |i| xs[i]));
        let b = four.install(|| sum_by(xs.len(), |i| xs[i]));
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn small_sums() {
        assert_eq!(sum_by(0, |_| 1.0), 0.0);
        assert_eq!(sum_by(5, |i| i as f64), 10.0);
        assert_eq!(max_by(4, |i| [1.0, -3.0, 7.5, 2.0][i]), 7.5);
    }
}
