/// Renders `v` like C's `%g` with 6 significant digits: fixed notation for
/// decimal exponents in `[-4, 6)`, otherwise `d.ddddde±XX`, trailing zeros
/// removed. Non-finite values render as `NA`; negative zero as `0`.
pub fn format_number(v: f64) -> String {
    if !v.is_finite() {
        return "NA".to_string();
    }
    if v == 0.0 {
        return "0".to_string();
    }
    let sci = format!("{v:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..6).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{m}e{sign}{:02}", exp.abs());
    }
    let decimals = (5 - exp) as usize;
    trim_zeros(&format!("{v:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}
