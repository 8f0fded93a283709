//! Small numeric helpers shared across modules.

/// Pairwise (cascade) summation with a fixed association order.
///
/// The recursion splits at the midpoint, so the result depends only on the
/// order of `values`, which callers fix deterministically.
pub(crate) fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        2 => values[0] + values[1],
        n => {
            let mid = n / 2;
            pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
        }
    }
}

/// Rounds to six decimal places, the serialisation precision used by the
/// matrix tables and the metrics report.
pub(crate) fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}
