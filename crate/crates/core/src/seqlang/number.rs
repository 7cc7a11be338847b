use std::cmp::Ordering;
use std::fmt;

/// Exact decimal `mant · 10^exp`, normalised so `mant` has no trailing zeros.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Decimal {
    mant: i128,
    exp: i32,
}

/// Largest decimal exponent accepted; keeps f64 conversion finite.
const MAX_EXP: i32 = 300;

impl Decimal {
    pub fn new(mant: i128, exp: i32) -> Self {
        let (mut mant, mut exp) = (mant, exp);
        if mant == 0 {
            return Self { mant: 0, exp: 0 };
        }
        while mant % 10 == 0 {
            mant /= 10;
            exp += 1;
        }
        Self { mant, exp }
    }

    pub fn integer(v: i64) -> Self {
        Self::new(v as i128, 0)
    }

    pub fn mantissa(&self) -> i128 {
        self.mant
    }

    pub fn exponent(&self) -> i32 {
        self.exp
    }

    /// Parses digits with an optional fraction and exponent (`-12.5e3`).
    pub fn parse(s: &str) -> Option<Self> {
        let (neg, body) = match s.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, s),
        };
        let (num, exp_part) = match body.find(['e', 'E']) {
            Some(i) => (&body[..i], Some(&body[i + 1..])),
            None => (body, None),
        };
        let (int, frac) = match num.split_once('.') {
            Some((a, b)) => (a, b),
            None => (num, ""),
        };
        if int.is_empty() || !int.bytes().all(|b| b.is_ascii_digit()) || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        let digits = format!("{int}{frac}");
        let digits = digits.trim_start_matches('0');
        if digits.len() > 36 {
            return None;
        }
        let mut mant: i128 = if digits.is_empty() { 0 } else { digits.parse().ok()? };
        if neg {
            mant = -mant;
        }
        let mut exp = -(frac.len() as i32);
        if let Some(e) = exp_part {
            let e: i32 = e.parse().ok()?;
            if e.abs() > MAX_EXP {
                return None;
            }
            exp += e;
        }
        let d = Self::new(mant, exp);
        (d.exp.abs() <= MAX_EXP).then_some(d)
    }

    /// Multiplies by 10^k.
    pub fn shift(&self, k: i32) -> Self {
        if self.mant == 0 {
            return *self;
        }
        Self { mant: self.mant, exp: self.exp + k }
    }

    /// Correctly rounded conversion.
    pub fn to_f64(&self) -> f64 {
        format!("{}e{}", self.mant, self.exp).parse().expect("decimal renders as a float literal")
    }

    pub fn is_negative(&self) -> bool {
        self.mant < 0
    }

    pub fn is_integer(&self) -> bool {
        self.exp >= 0
    }

    pub fn as_u64(&self) -> Option<u64> {
        if self.mant < 0 || self.exp < 0 || self.exp > 30 {
            return None;
        }
        let v = self.mant.checked_mul(10i128.checked_pow(self.exp as u32)?)?;
        u64::try_from(v).ok()
    }
}

impl fmt::Display for Decimal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.mant < 0 { "-" } else { "" };
        let digits = self.mant.unsigned_abs().to_string();
        if self.exp >= 0 {
            if self.exp > 20 {
                return write!(f, "{sign}{digits}e{}", self.exp);
            }
            write!(f, "{sign}{digits}{}", "0".repeat(self.exp as usize))
        } else {
            let frac = (-self.exp) as usize;
            if frac > 20 + digits.len() {
                return write!(f, "{sign}{digits}e{}", self.exp);
            }
            if digits.len() > frac {
                let (a, b) = digits.split_at(digits.len() - frac);
                write!(f, "{sign}{a}.{b}")
            } else {
                write!(f, "{sign}0.{}{digits}", "0".repeat(frac - digits.len()))
            }
        }
    }
}

impl PartialOrd for Decimal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.to_f64().partial_cmp(&other.to_f64())
    }
}

/// A literal: an exact decimal, or an integer fraction (from `k pi/m`
/// forms whose value is not a finite decimal).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Number {
    Decimal(Decimal),
    Fraction { num: i64, den: u64 },
}

impl Number {
    /// `num / den`, stored as a decimal whenever that is exact.
    pub fn ratio(num: i64, den: u64) -> Option<Self> {
        if den == 0 {
            return None;
        }
        let g = gcd(num.unsigned_abs(), den);
        let (num, den) = (num / g as i64, den / g);
        let mut rest = den;
        let (mut twos, mut fives) = (0u32, 0u32);
        while rest % 2 == 0 {
            rest /= 2;
            twos += 1;
        }
        while rest % 5 == 0 {
            rest /= 5;
            fives += 1;
        }
        if rest == 1 {
            // num/den = num · 2^(k−twos) · 5^(k−fives) / 10^k
            let k = twos.max(fives);
            let scale = 2i128.checked_pow(k - twos)?.checked_mul(5i128.checked_pow(k - fives)?)?;
            Some(Number::Decimal(Decimal::new((num as i128).checked_mul(scale)?, -(k as i32))))
        } else {
            Some(Number::Fraction { num, den })
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Number::Decimal(d) => d.to_f64(),
            Number::Fraction { num, den } => *num as f64 / *den as f64,
        }
    }

    pub fn is_negative(&self) -> bool {
        match self {
            Number::Decimal(d) => d.is_negative(),
            Number::Fraction { num, .. } => *num < 0,
        }
    }

    pub fn as_decimal(&self) -> Option<Decimal> {
        match self {
            Number::Decimal(d) => Some(*d),
            Number::Fraction { .. } => None,
        }
    }
}

impl From<Decimal> for Number {
    fn from(d: Decimal) -> Self {
        Number::Decimal(d)
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a.max(1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_print() {
        for (s, p) in [("100", "100"), ("0.515", "0.515"), ("-20", "-20"), ("2.50", "2.5"), ("1e3", "1000"), ("0", "0"), ("-0.001", "-0.001")] {
            assert_eq!(Decimal::parse(s).unwrap().to_string(), p);
        }
        for bad in ["", "-", ".5", "1.2.3", "abc", "1e"] {
            assert!(Decimal::parse(bad).is_none(), "{bad}");
        }
    }

    #[test]
    fn shifted_decimals_are_bit_identical() {
        let a = Decimal::parse("100").unwrap();
        let b = Decimal::parse("0.1").unwrap().shift(3);
        assert_eq!(a, b);
        assert_eq!(a.to_f64().to_bits(), b.to_f64().to_bits());
        // naive float arithmetic would differ here
        assert_ne!(0.1f64 * 3.0, 0.3);
        assert_eq!(Decimal::parse("0.3").unwrap().to_f64(), Decimal::parse("300").unwrap().shift(-3).to_f64());
    }

    #[test]
    fn ratios() {
        assert_eq!(Number::ratio(1, 2), Some(Number::Decimal(Decimal::parse("0.5").unwrap())));
        assert_eq!(Number::ratio(3, 8).unwrap().to_f64(), 0.375);
        assert_eq!(Number::ratio(2, 6), Some(Number::Fraction { num: 1, den: 3 }));
        assert_eq!(Number::ratio(1, 0), None);
    }
}
