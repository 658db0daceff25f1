//! Small shared numeric helpers.

/// Dot product of two equal-length slices.
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn l2_norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Scales `v` to unit l2 norm. Returns false when the norm is zero, in
/// which case `v` is left untouched.
pub(crate) fn l2_normalize(v: &mut [f64]) -> bool {
    let norm = l2_norm(v);
    if norm == 0.0 {
        return false;
    }
    for x in v.iter_mut() {
        *x /= norm;
    }
    true
}

/// Signed power transform: x -> sign(x) * |x|^alpha, elementwise.
pub(crate) fn signed_power(v: &mut [f64], alpha: f64) {
    for x in v.iter_mut() {
        *x = x.signum() * x.abs().powf(alpha);
    }
}

/// log(sum(exp(values))) computed against the running maximum.
pub(crate) fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

/// Indices of the `t` largest values, ties broken by ascending index.
///
/// Returns min(t, len) indices in selection order.
pub(crate) fn top_t_indices(values: &[f64], t: usize) -> Vec<usize> {
    let keep = t.min(values.len());
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_unstable_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    order.truncate(keep);
    order
}

pub(crate) fn all_finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}
