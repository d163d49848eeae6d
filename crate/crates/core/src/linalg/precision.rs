use rug::float::Round;
use rug::{Assign, Float};

use super::{LinalgError, Real};

/// Mantissa bits carried beyond the requested decimal digits.
pub const GUARD_BITS: u32 = 32;

const LOG2_10: f64 = std::f64::consts::LOG2_10;

/// Working precision shared read-only by every computation of a run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PrecisionContext {
    decimal_digits: u32,
    singular_pivot_guard: u32,
}

impl PrecisionContext {
    pub const MIN_DIGITS: u32 = 50;
    pub const DEFAULT_PIVOT_GUARD: u32 = 20;

    pub fn new(decimal_digits: u32, singular_pivot_guard: u32) -> Result<Self, LinalgError> {
        if decimal_digits < Self::MIN_DIGITS {
            return Err(LinalgError::InvalidPrecision(format!(
                "decimal_digits must be at least {}, got {decimal_digits}",
                Self::MIN_DIGITS
            )));
        }
        if singular_pivot_guard == 0 || singular_pivot_guard >= decimal_digits {
            return Err(LinalgError::InvalidPrecision(format!(
                "singular_pivot_guard must lie in 1..{decimal_digits}, got {singular_pivot_guard}"
            )));
        }
        Ok(Self {
            decimal_digits,
            singular_pivot_guard,
        })
    }

    /// Context with the default pivot guard of 20 digits.
    pub fn with_digits(decimal_digits: u32) -> Result<Self, LinalgError> {
        Self::new(decimal_digits, Self::DEFAULT_PIVOT_GUARD)
    }

    pub fn decimal_digits(&self) -> u32 {
        self.decimal_digits
    }

    pub fn singular_pivot_guard(&self) -> u32 {
        self.singular_pivot_guard
    }

    /// Binary mantissa width used for every `Real` created under this context.
    pub fn bits(&self) -> u32 {
        (self.decimal_digits as f64 * LOG2_10).ceil() as u32 + GUARD_BITS
    }

    pub fn real<T>(&self, value: T) -> Real
    where
        Float: Assign<T>,
    {
        Float::with_val(self.bits(), value)
    }

    pub fn zero(&self) -> Real {
        Float::new(self.bits())
    }

    pub fn one(&self) -> Real {
        self.real(1)
    }

    /// Correctly rounded `10^exponent`.
    pub fn pow10(&self, exponent: i64) -> Real {
        let parsed = Float::parse(format!("1e{exponent}")).expect("decimal power literal");
        Float::with_val_round(self.bits(), parsed, Round::Nearest).0
    }

    /// Parses a decimal literal such as `"1e-5"` or `"0.618"`.
    pub fn parse(&self, text: &str) -> Result<Real, LinalgError> {
        let parsed = Float::parse(text.trim()).map_err(|e| LinalgError::InvalidLiteral(format!("{text:?}: {e}")))?;
        Ok(Float::with_val(self.bits(), parsed))
    }

    /// `u_r = 10^(-decimal_digits)`.
    pub fn unit_roundoff(&self) -> Real {
        self.pow10(-(self.decimal_digits as i64))
    }

    /// `10^(-decimal_digits + slack)`, the usual "agrees to working precision" floor.
    pub fn floor(&self, slack: u32) -> Real {
        self.pow10(slack as i64 - self.decimal_digits as i64)
    }

    /// Relative threshold below which an LU pivot is declared zero.
    pub fn pivot_threshold(&self) -> Real {
        self.pow10(self.singular_pivot_guard as i64 - self.decimal_digits as i64)
    }
}
