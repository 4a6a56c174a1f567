//! Six-significant-digit number formatting, matching C's `%.6g`.

/// Marker for an undefined value in CSV output.
pub const ABSENT: &str = "NA";

/// Formats like `printf("%.6g", x)`, except that negative zero prints as `0`.
pub fn format_g6(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    // The exponent after rounding to six digits decides between notations.
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent in {:e} output");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..6).contains(&exp) {
        let decimals = (5 - exp) as usize;
        trim_fraction(&format!("{x:.decimals$}")).to_string()
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_fraction(mantissa), exp.abs())
    }
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn format_opt(x: Option<f64>) -> String {
    x.map_or_else(|| ABSENT.to_string(), format_g6)
}

/// Parses a CSV cell written by [`format_opt`].
pub fn parse_opt(cell: &str) -> Result<Option<f64>, String> {
    let cell = cell.trim();
    if cell == ABSENT {
        return Ok(None);
    }
    cell.parse::<f64>()
        .map(Some)
        .map_err(|_| format!("not a number: `{cell}`"))
}

/// `x` rounded to six significant digits, i.e. what survives a CSV round trip.
pub fn round_g6(x: f64) -> f64 {
    format_g6(x).parse().unwrap_or(x)
}
