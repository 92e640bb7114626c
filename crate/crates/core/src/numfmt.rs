//! Significant-digit float formatting for the CSV report writers.

/// Formats `value` with exactly `digits` significant digits, using fixed
/// notation when the decimal exponent lies in `[-4, digits - 1]` and
/// scientific notation otherwise. Trailing zeros are kept so column widths
/// stay stable across rows.
///
/// ```
/// use geosep_core::fmt_sig;
/// assert_eq!(fmt_sig(0.3, 9), "0.300000000");
/// assert_eq!(fmt_sig(-2.0, 9), "-2.00000000");
/// assert_eq!(fmt_sig(1.5e-7, 9), "1.50000000e-7");
/// ```
pub fn fmt_sig(value: f64, digits: usize) -> String {
    assert!(digits >= 1, "need at least one significant digit");
    if value == 0.0 {
        return if digits == 1 {
            "0".to_string()
        } else {
            format!("0.{}", "0".repeat(digits - 1))
        };
    }
    if !value.is_finite() {
        return value.to_string();
    }
    let sci = format!("{:.*e}", digits - 1, value);
    let (mantissa, exp) = sci.split_once('e').expect("float in scientific notation");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= digits as i32 {
        return sci;
    }
    let neg = mantissa.starts_with('-');
    let digit_run: String = mantissa.chars().filter(|c| c.is_ascii_digit()).collect();
    debug_assert_eq!(digit_run.len(), digits);
    let mut out = String::new();
    if neg {
        out.push('-');
    }
    if exp >= 0 {
        let int_len = exp as usize + 1;
        out.push_str(&digit_run[..int_len]);
        if int_len < digits {
            out.push('.');
            out.push_str(&digit_run[int_len..]);
        }
    } else {
        out.push_str("0.");
        out.push_str(&"0".repeat(-(exp + 1) as usize));
        out.push_str(&digit_run);
    }
    out
}
