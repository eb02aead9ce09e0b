//! Number formatting shared by every CSV writer.

/// Significant digits written for every floating-point field.
pub const SIGNIFICANT_DIGITS: usize = 9;

/// Formats `v` like C's `%.9g`: nine significant digits, trailing zeros
/// removed, scientific notation outside `1e-4 <= |v| < 1e9`.
pub fn fmt_g9(v: f64) -> String {
    fmt_g(v, SIGNIFICANT_DIGITS)
}

/// `%.{precision}g` for a positive `precision`.
pub fn fmt_g(v: f64, precision: usize) -> String {
    assert!(precision > 0, "precision must be positive");
    if v.is_nan() {
        return "nan".to_string();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    if v == 0.0 {
        return if v.is_sign_negative() { "-0" } else { "0" }.to_string();
    }
    // The exponent after rounding to `precision` digits decides the style.
    let sci = format!("{:.*e}", precision - 1, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= precision as i32 {
        let mantissa = strip_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (precision as i32 - 1 - exp) as usize;
        strip_zeros(&format!("{v:.decimals$}")).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}
