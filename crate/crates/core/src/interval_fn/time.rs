use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Parses `"p/q"` or an integer string into an exact rational.
pub fn parse_rational(s: &str) -> Result<BigRational> {
    let s = s.trim();
    let parse_int = |t: &str| {
        BigInt::from_str(t.trim()).map_err(|_| Error::Parse(format!("invalid rational {s:?}")))
    };
    match s.split_once('/') {
        Some((p, q)) => {
            let q = parse_int(q)?;
            if q.is_zero() {
                return Err(Error::Parse(format!("zero denominator in {s:?}")));
            }
            Ok(BigRational::new(parse_int(p)?, q))
        }
        None => Ok(BigRational::from_integer(parse_int(s)?)),
    }
}

/// Renders a rational as `"p/q"`, or `"p"` when the denominator is one.
pub fn format_rational(r: &BigRational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn ratio(p: i64, q: i64) -> BigRational {
    BigRational::new(BigInt::from(p), BigInt::from(q))
}

pub fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Smallest multiple of `1/denominator` that is `>= x`.
pub fn ceil_to_grid(x: f64, denominator: i64) -> BigRational {
    let scaled = (x * denominator as f64).ceil();
    let mut r = BigRational::new(BigInt::from(scaled as i64), BigInt::from(denominator));
    // Guard against the f64 product rounding below the true value.
    while to_f64(&r) < x {
        r += BigRational::new(BigInt::one(), BigInt::from(denominator));
    }
    r
}

pub(crate) mod rational_string {
    use super::*;

    pub fn serialize<S: Serializer>(r: &BigRational, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&format_rational(r))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<BigRational, D::Error> {
        let raw = String::deserialize(d)?;
        parse_rational(&raw).map_err(serde::de::Error::custom)
    }
}

/// A non-negative exact time instant.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TimePoint(BigRational);

impl TimePoint {
    pub fn new(value: BigRational) -> Result<Self> {
        if value.is_negative() {
            return Err(Error::Domain(format!("negative time {}", format_rational(&value))));
        }
        Ok(TimePoint(value))
    }

    pub fn zero() -> Self {
        TimePoint(BigRational::zero())
    }

    pub fn one() -> Self {
        TimePoint(BigRational::one())
    }

    pub fn integer(n: i64) -> Self {
        assert!(n >= 0, "negative time");
        TimePoint(BigRational::from_integer(BigInt::from(n)))
    }

    /// `p/q`; panics on negative or zero-denominator input.
    pub fn frac(p: i64, q: i64) -> Self {
        let r = ratio(p, q);
        assert!(!r.is_negative(), "negative time");
        TimePoint(r)
    }

    pub fn value(&self) -> &BigRational {
        &self.0
    }

    pub fn into_inner(self) -> BigRational {
        self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn to_f64(&self) -> f64 {
        to_f64(&self.0)
    }

    /// `self - other`, or `None` when that would be negative.
    pub fn checked_sub(&self, other: &TimePoint) -> Option<TimePoint> {
        if other > self {
            None
        } else {
            Some(TimePoint(&self.0 - &other.0))
        }
    }

    pub fn scale(&self, factor: &BigRational) -> TimePoint {
        TimePoint::new(&self.0 * factor).expect("scaling by a negative factor")
    }
}

impl fmt::Display for TimePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_rational(&self.0))
    }
}

impl fmt::Debug for TimePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t({})", format_rational(&self.0))
    }
}

impl FromStr for TimePoint {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        TimePoint::new(parse_rational(s)?)
    }
}

impl Add for &TimePoint {
    type Output = TimePoint;
    fn add(self, rhs: &TimePoint) -> TimePoint {
        TimePoint(&self.0 + &rhs.0)
    }
}

impl Add for TimePoint {
    type Output = TimePoint;
    fn add(self, rhs: TimePoint) -> TimePoint {
        TimePoint(self.0 + rhs.0)
    }
}

impl Sub for &TimePoint {
    type Output = TimePoint;
    fn sub(self, rhs: &TimePoint) -> TimePoint {
        self.checked_sub(rhs).expect("time subtraction went negative")
    }
}

impl Mul<&BigRational> for &TimePoint {
    type Output = TimePoint;
    fn mul(self, rhs: &BigRational) -> TimePoint {
        self.scale(rhs)
    }
}

impl Serialize for TimePoint {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        rational_string::serialize(&self.0, s)
    }
}

impl<'de> Deserialize<'de> for TimePoint {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = rational_string::deserialize(d)?;
        TimePoint::new(r).map_err(serde::de::Error::custom)
    }
}

/// Exact Lebesgue measure of a finite union of rational intervals.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Measure(pub BigRational);

impl Measure {
    pub fn zero() -> Self {
        Measure(BigRational::zero())
    }

    pub fn value(&self) -> &BigRational {
        &self.0
    }

    pub fn to_f64(&self) -> f64 {
        to_f64(&self.0)
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_rational(&self.0))
    }
}

impl From<TimePoint> for Measure {
    fn from(t: TimePoint) -> Self {
        Measure(t.0)
    }
}

impl PartialEq<TimePoint> for Measure {
    fn eq(&self, other: &TimePoint) -> bool {
        self.0 == other.0
    }
}

impl PartialOrd<BigRational> for Measure {
    fn partial_cmp(&self, other: &BigRational) -> Option<Ordering> {
        Some(self.0.cmp(other))
    }
}

impl PartialEq<BigRational> for Measure {
    fn eq(&self, other: &BigRational) -> bool {
        self.0 == *other
    }
}

/// An element of a finite action alphabet; symbol `i` renders as the
/// `i`-th lowercase letter.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Action(pub u8);

impl Action {
    pub const A: Action = Action(0);
    pub const B: Action = Action(1);

    pub fn index(self) -> usize {
        self.0 as usize
    }

    /// The other symbol of the binary alphabet `{a, b}`.
    pub fn flip(self) -> Action {
        match self {
            Action::A => Action::B,
            Action::B => Action::A,
            other => other,
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", (b'a' + self.0) as char)
    }
}

impl fmt::Debug for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for Action {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.as_bytes() {
            [c @ b'a'..=b'z'] => Ok(Action(c - b'a')),
            _ => Err(Error::Parse(format!("invalid action symbol {s:?}"))),
        }
    }
}

impl Serialize for Action {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Action {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        raw.parse().map_err(serde::de::Error::custom)
    }
}

/// A declared finite alphabet `{a, b, ...}` of `size` symbols.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Alphabet {
    size: u8,
}

impl Alphabet {
    pub fn new(size: u8) -> Result<Self> {
        if size == 0 || size > 26 {
            return Err(Error::Usage(format!("alphabet size {size} outside 1..=26")));
        }
        Ok(Alphabet { size })
    }

    pub fn binary() -> Self {
        Alphabet { size: 2 }
    }

    pub fn size(&self) -> usize {
        self.size as usize
    }

    pub fn contains(&self, a: Action) -> bool {
        a.0 < self.size
    }

    pub fn symbols(&self) -> impl Iterator<Item = Action> {
        (0..self.size).map(Action)
    }
}

impl Default for Alphabet {
    fn default() -> Self {
        Alphabet::binary()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_format_round_trip() {
        for s in ["0", "1", "3/4", "7/1000"] {
            assert_eq!(format_rational(&parse_rational(s).unwrap()), s);
        }
        assert_eq!(format_rational(&parse_rational("2/4").unwrap()), "1/2");
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("x").is_err());
        assert!("-1/2".parse::<TimePoint>().is_err());
    }

    #[test]
    fn ceil_to_grid_is_upper() {
        let r = ceil_to_grid(std::f64::consts::LN_2, 1024);
        assert!(to_f64(&r) >= std::f64::consts::LN_2);
        assert!(to_f64(&r) - std::f64::consts::LN_2 < 1.0 / 1024.0);
    }

    #[test]
    fn action_symbols() {
        assert_eq!("a".parse::<Action>().unwrap(), Action::A);
        assert_eq!(Action::B.to_string(), "b");
        assert_eq!(Action::A.flip(), Action::B);
        assert!("ab".parse::<Action>().is_err());
        assert!(Alphabet::new(0).is_err());
        assert_eq!(Alphabet::binary().symbols().count(), 2);
    }
}
