//! Symmetric decreasing rearrangement of kernel tables.

use super::KernelTable;
use crate::error::{Error, Result};
use crate::grid::MAX_DIM;
use crate::rearrange::symmetric_order;

/// Values sorted descending, placed along the distance-then-lexicographic
/// order of the offsets. Preserves the multiset exactly.
pub(crate) fn rearrange_array(offsets: &[[i64; MAX_DIM]], dim: usize, values: &[f64]) -> Vec<f64> {
    let doubled: Vec<[i64; MAX_DIM]> = offsets
        .iter()
        .map(|o| [2 * o[0], 2 * o[1], 2 * o[2]])
        .collect();
    let order = symmetric_order(&doubled, dim);
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut out = vec![0.0; values.len()];
    for (slot, v) in order.into_iter().zip(sorted) {
        out[slot] = v;
    }
    out
}

/// Discrete symmetric decreasing rearrangement `K*`.
///
/// Sorted values fill offsets by increasing distance, mirror pairs
/// consecutively. A pair that receives two different values (only when
/// the origin was not the maximum) gets their mean, which keeps `K*` even
/// and `Σ K*` exact; otherwise the multiset is preserved exactly.
pub fn rearrange_kernel(table: &KernelTable) -> Result<KernelTable> {
    if !table.is_integrable() {
        return Err(Error::NotIntegrable(
            "rearrangement needs a finite kernel at the origin; truncate first".into(),
        ));
    }
    let dim = table.grid().dim();
    let offsets: Vec<[i64; MAX_DIM]> = (0..table.values().len()).map(|i| table.offset(i)).collect();
    let mut out = rearrange_array(&offsets, dim, table.values());
    for idx in 0..out.len() {
        let m = table.mirror_index(idx);
        if m > idx && out[m] != out[idx] {
            let mean = 0.5 * (out[idx] + out[m]);
            out[idx] = mean;
            out[m] = mean;
        }
    }
    Ok(table.with_values(out, format!("({})*", table.label())))
}
