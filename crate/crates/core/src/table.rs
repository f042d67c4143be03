//! Plain-text numeric output.

/// `v` with 17 significant digits, enough to round-trip any `f64`.
pub fn format_g17(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    format!("{v:.16e}")
}
