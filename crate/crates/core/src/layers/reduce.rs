//! Fixed-order f64 reductions with eight partial sums, so they vectorize
//! while staying bit-reproducible.

use crate::tensor::Scalar;

const LANES: usize = 8;

#[inline]
fn fold<T: Scalar>(a: &[T], f: impl Fn(T) -> f64) -> f64 {
    let mut lanes = [0.0f64; LANES];
    let n = a.len() / LANES * LANES;
    for c in a[..n].chunks_exact(LANES) {
        for l in 0..LANES {
            lanes[l] += f(c[l]);
        }
    }
    let tail: f64 = a[n..].iter().map(|&v| f(v)).sum();
    lanes.iter().sum::<f64>() + tail
}

pub(crate) fn sum<T: Scalar>(a: &[T]) -> f64 {
    fold(a, |v| v.as_f64())
}

/// `sum (v - m)^2`.
pub(crate) fn sum_sq_dev<T: Scalar>(a: &[T], m: f64) -> f64 {
    fold(a, |v| {
        let d = v.as_f64() - m;
        d * d
    })
}

pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut lanes = [0.0f64; LANES];
    let n = a.len() / LANES * LANES;
    for (ca, cb) in a[..n].chunks_exact(LANES).zip(b[..n].chunks_exact(LANES)) {
        for l in 0..LANES {
            lanes[l] += ca[l].as_f64() * cb[l].as_f64();
        }
    }
    let mut tail = 0.0;
    for k in n..a.len() {
        tail += a[k].as_f64() * b[k].as_f64();
    }
    lanes.iter().sum::<f64>() + tail
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_naive() {
        let a: Vec<f64> = (0..37).map(|i| (i as f64).sin()).collect();
        let b: Vec<f64> = (0..37).map(|i| (i as f64 * 0.3).cos()).collect();
        let s: f64 = a.iter().sum();
        assert!((sum(&a) - s).abs() < 1e-12);
        let d: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        assert!((dot(&a, &b) - d).abs() < 1e-12);
        let m = s / 37.0;
        let v: f64 = a.iter().map(|x| (x - m).powi(2)).sum();
        assert!((sum_sq_dev(&a, m) - v).abs() < 1e-12);
    }
}
