//! Significant-digit formatting, in the spirit of C's `%g`.

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Formats `x` with `digits` significant digits. Exponents below -4 or at or
/// above `digits` switch to scientific notation; trailing zeros are dropped.
pub fn sig(x: f64, digits: usize) -> String {
    assert!(digits >= 1, "at least one significant digit");
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    // Rounding can carry into the next decade, so take the exponent from the
    // already-rounded scientific form.
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format has an exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= digits as i32 {
        format!("{}e{}", trim_fraction(mantissa), exp)
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_fraction(&format!("{:.*}", decimals, x)).to_string()
    }
}
