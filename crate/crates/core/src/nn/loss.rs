use super::Scalar;

pub const PROB_CLAMP: f64 = 1e-7;

/// Binary cross-entropy `-(y ln p + (1 - y) ln(1 - p))` and its derivative in `p`.
///
/// `p` is clamped to `[1e-7, 1 - 1e-7]` first.
pub fn bce_loss<T: Scalar>(p: T, label: bool) -> (T, T) {
    let eps = T::from_f64_lossy(PROB_CLAMP);
    let p = p.max(eps).min(T::one() - eps);
    if label {
        (-p.ln(), -T::one() / p)
    } else {
        (-(T::one() - p).ln(), T::one() / (T::one() - p))
    }
}

/// Mean loss over a batch and the per-sample gradient of that mean.
pub fn bce_batch<T: Scalar>(probs: &[T], labels: &[bool]) -> (T, Vec<T>) {
    assert_eq!(probs.len(), labels.len());
    let n = T::from_usize(probs.len()).unwrap();
    let mut total = T::zero();
    let grads = probs
        .iter()
        .zip(labels)
        .map(|(&p, &y)| {
            let (l, g) = bce_loss(p, y);
            total += l;
            g / n
        })
        .collect();
    (total / n, grads)
}
