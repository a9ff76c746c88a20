//! Deterministic pairwise reduction.

const LEAF: usize = 64;

/// Pairwise (tree) sum. The reduction order depends only on the length.
pub(crate) fn tree_sum(values: &[f64]) -> f64 {
    if values.len() <= LEAF {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    tree_sum(&values[..mid]) + tree_sum(&values[mid..])
}

/// Pairwise sum of `a[i] * b[i]`.
pub(crate) fn tree_dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    if a.len() <= LEAF {
        return a.iter().zip(b).map(|(x, y)| x * y).sum();
    }
    let mid = a.len() / 2;
    tree_dot(&a[..mid], &b[..mid]) + tree_dot(&a[mid..], &b[mid..])
}
