//! Deterministic CSV formatting.

/// Formats a float with 12 significant digits.
///
/// Fixed notation is used for magnitudes in `[1e-4, 1e12)`, scientific notation
/// otherwise; trailing zeros are trimmed. Non-finite values print as `inf`, `-inf`, `nan`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format has an exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        trim(&format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim(mantissa))
    }
}

fn trim(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

/// Formats an optional float; `None` becomes an empty field.
pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

/// Quotes a field when it contains a comma, quote or newline.
pub fn escape(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(fmt_f64(0.0), "0");
        assert_eq!(fmt_f64(2.5), "2.5");
        assert_eq!(fmt_f64(1.0 / 3.0), "0.333333333333");
        assert_eq!(fmt_f64(56200.441124000004), "56200.441124");
        assert_eq!(fmt_f64(-0.00012345678901234), "-0.000123456789012");
        assert_eq!(fmt_f64(2.5252525252525e-22), "2.52525252525e-22");
        assert_eq!(fmt_f64(1e12), "1e12");
        assert_eq!(fmt_f64(123456789012.4), "123456789012");
        assert_eq!(fmt_f64(f64::INFINITY), "inf");
    }

    #[test]
    fn round_trips_to_twelve_digits() {
        for &x in &[std::f64::consts::PI, 1e-30, 7.77e15, -0.5, 0.1 + 0.2] {
            let back: f64 = fmt_f64(x).parse().unwrap();
            assert!((back - x).abs() <= 1e-11 * x.abs());
        }
    }

    #[test]
    fn escaping() {
        assert_eq!(escape("plain"), "plain");
        assert_eq!(escape("a,b"), "\"a,b\"");
        assert_eq!(escape("say \"hi\""), "\"say \"\"hi\"\"\"");
    }
}
