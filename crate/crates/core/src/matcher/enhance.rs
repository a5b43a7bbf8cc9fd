use super::DifferenceMatrix;
use crate::Scalar;

pub const STD_FLOOR: f64 = 1e-6;

/// Local contrast enhancement: standardize each entry against the
/// `window`-long stretch of its column centred on it.
///
/// The window keeps its full length min(window, rows) near the column ends by
/// shifting inward. Population standard deviation, floored at 1e-6.
pub fn enhance_local<T: Scalar>(matrix: &DifferenceMatrix<T>, window: usize) -> DifferenceMatrix<T> {
    assert!(window >= 1, "enhancement window must be >= 1");
    let n = matrix.rows();
    let len = window.min(n);
    let floor = T::lit(STD_FLOOR);
    let mut out = matrix.clone();
    for t in 0..matrix.cols() {
        let col = matrix.column(t);
        for i in 0..n {
            let start = i.saturating_sub(len / 2).min(n - len);
            let w = &col[start..start + len];
            let count = T::of_usize(len);
            let mean = w.iter().copied().sum::<T>() / count;
            let var = w.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / count;
            let std = var.sqrt().max(floor);
            out.set(i, t, (col[i] - mean) / std);
        }
    }
    out
}
