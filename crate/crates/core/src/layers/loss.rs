use crate::error::{Error, Result};
use crate::tensor::Scalar;

/// Numerically stable softmax over `logits`, in `f64`.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|&l| (l - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Cross-entropy of a softmax head. Returns `(loss, d loss / d logits)`.
pub fn softmax_cross_entropy<T: Scalar>(logits: &[T], label: usize) -> Result<(f64, Vec<T>)> {
    if logits.len() < 2 {
        return Err(Error::precondition("softmax_cross_entropy: need at least two logits"));
    }
    if label >= logits.len() {
        return Err(Error::precondition(format!(
            "softmax_cross_entropy: label {label} out of range for {} classes",
            logits.len()
        )));
    }
    let l: Vec<f64> = logits.iter().map(|v| v.as_f64()).collect();
    if l.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("softmax_cross_entropy: non-finite logit".into()));
    }
    let (arg, m) = l
        .iter()
        .cloned()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |a, (i, v)| if v > a.1 { (i, v) } else { a });
    // log-sum-exp = m + ln(1 + sum of the non-max terms); ln_1p keeps tiny losses exact
    let rest: f64 = l
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != arg)
        .map(|(_, &v)| (v - m).exp())
        .sum();
    let loss = (m - l[label]) + rest.ln_1p();
    let p = softmax(&l);
    let grad = p
        .iter()
        .enumerate()
        .map(|(i, &pi)| T::from_f64(if i == label { pi - 1.0 } else { pi }))
        .collect();
    Ok((loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_logits() {
        let (loss, g) = softmax_cross_entropy(&[0.0f64, 0.0], 0).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(g, vec![-0.5, 0.5]);
    }

    #[test]
    fn confident_correct_logits() {
        let (loss, _) = softmax_cross_entropy(&[10.0f64, -10.0], 0).unwrap();
        // ln(1 + e^-20)
        assert!((loss - 2.061153620314381e-09).abs() < 1e-20);
    }

    #[test]
    fn label_out_of_range() {
        assert!(matches!(
            softmax_cross_entropy(&[0.0f32, 1.0], 2),
            Err(Error::Precondition(_))
        ));
    }
}
