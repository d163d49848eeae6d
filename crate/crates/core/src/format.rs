//! Decimal rendering of reals for CSV output.

use crate::linalg::Real;

/// Literal written for undefined quantities.
pub const SENTINEL: &str = "-1";

/// Number style used when writing tables.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NumberStyle {
    /// Six significant digits in scientific notation, e.g. `2.5e-06`.
    Display,
    /// All `digits` significant digits.
    Full { digits: usize },
}

impl NumberStyle {
    pub fn render(self, x: &Real) -> String {
        match self {
            NumberStyle::Display => sci(x, 6),
            NumberStyle::Full { digits } => sci(x, digits.max(1)),
        }
    }

    pub fn render_opt(self, x: Option<&Real>) -> String {
        x.map_or_else(|| SENTINEL.to_string(), |v| self.render(v))
    }
}

/// Scientific notation with `digits` significant digits, trailing zeros
/// removed and a signed exponent of at least two digits.
pub fn sci(x: &Real, digits: usize) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x.is_sign_negative() {
            "-inf".into()
        } else {
            "inf".into()
        };
    }
    if x.is_zero() {
        return "0".into();
    }
    let (negative, mantissa, exp) = x.to_sign_string_exp(10, Some(digits));
    let exp = exp.expect("finite nonzero value has an exponent") - 1;
    let (lead, rest) = mantissa.split_at(1);
    let rest = rest.trim_end_matches('0');
    let mut out = String::with_capacity(digits + 8);
    if negative {
        out.push('-');
    }
    out.push_str(lead);
    if !rest.is_empty() {
        out.push('.');
        out.push_str(rest);
    }
    out.push('e');
    out.push(if exp < 0 { '-' } else { '+' });
    out.push_str(&format!("{:02}", exp.unsigned_abs()));
    out
}
