use std::fmt;

use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use super::time::{Action, Measure, TimePoint};
use crate::error::{Error, Result};

/// A finitely-piecewise-constant function on `[0, end)`, optionally
/// continued by a constant `tail` on `[end, ∞)`.
///
/// Pieces are half-open. Values are kept in canonical form: adjacent pieces
/// never carry the same symbol, so structural equality coincides with
/// almost-everywhere equality.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "StepFunctionRepr", into = "StepFunctionRepr")]
pub struct StepFunction {
    end: TimePoint,
    breaks: Vec<TimePoint>,
    vals: Vec<Action>,
    tail: Option<Action>,
}

/// One constant piece `[start, end)` of a step function.
#[derive(Clone, Copy, Debug)]
pub struct Piece<'a> {
    pub start: &'a TimePoint,
    pub end: &'a TimePoint,
    pub value: Action,
}

impl Piece<'_> {
    pub fn len(&self) -> BigRational {
        self.end.value() - self.start.value()
    }
}

/// Direction of the affine change of time between `[0, 1)` and `[s, t)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TimeChange {
    /// `[0, 1)` is stretched onto a window of length `t - s` (re-based at 0).
    Forward,
    /// A window of length `t - s` (re-based at 0) is squeezed onto `[0, 1)`.
    Inverse,
}

impl StepFunction {
    pub fn new(
        end: TimePoint,
        breaks: Vec<TimePoint>,
        vals: Vec<Action>,
        tail: Option<Action>,
    ) -> Result<Self> {
        if end.is_zero() {
            return Err(Error::Usage("step function with empty domain".into()));
        }
        if breaks.is_empty() || breaks.len() != vals.len() {
            return Err(Error::Usage(format!(
                "{} breakpoints for {} values",
                breaks.len(),
                vals.len()
            )));
        }
        if !breaks[0].is_zero() {
            return Err(Error::Usage(format!("first breakpoint is {}, not 0", breaks[0])));
        }
        if breaks.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Usage("breakpoints not strictly increasing".into()));
        }
        if breaks.last().is_some_and(|b| *b >= end) {
            return Err(Error::Usage("breakpoint at or beyond domain end".into()));
        }
        Ok(StepFunction { end, breaks, vals, tail }.normalized())
    }

    pub fn constant(end: TimePoint, value: Action) -> Result<Self> {
        Self::new(end, vec![TimePoint::zero()], vec![value], None)
    }

    /// Builds a function from consecutive `(length, value)` pieces.
    pub fn from_lengths(pieces: &[(TimePoint, Action)]) -> Result<Self> {
        if pieces.is_empty() {
            return Err(Error::Usage("no pieces".into()));
        }
        let mut breaks = Vec::with_capacity(pieces.len());
        let mut vals = Vec::with_capacity(pieces.len());
        let mut at = TimePoint::zero();
        for (len, v) in pieces {
            if len.is_zero() {
                return Err(Error::Usage("zero-length piece".into()));
            }
            breaks.push(at.clone());
            vals.push(*v);
            at = &at + len;
        }
        Self::new(at, breaks, vals, None)
    }

    /// Merges equal adjacent pieces. Idempotent.
    pub fn normalized(mut self) -> Self {
        let mut breaks = Vec::with_capacity(self.breaks.len());
        let mut vals: Vec<Action> = Vec::with_capacity(self.vals.len());
        for (b, v) in self.breaks.drain(..).zip(self.vals.drain(..)) {
            if vals.last() != Some(&v) {
                breaks.push(b);
                vals.push(v);
            }
        }
        self.breaks = breaks;
        self.vals = vals;
        self
    }

    pub fn end(&self) -> &TimePoint {
        &self.end
    }

    pub fn tail(&self) -> Option<Action> {
        self.tail
    }

    pub fn breaks(&self) -> &[TimePoint] {
        &self.breaks
    }

    pub fn values(&self) -> &[Action] {
        &self.vals
    }

    pub fn piece_count(&self) -> usize {
        self.vals.len()
    }

    pub fn with_tail(mut self, tail: Option<Action>) -> Self {
        self.tail = tail;
        self
    }

    pub fn pieces(&self) -> impl Iterator<Item = Piece<'_>> + '_ {
        (0..self.vals.len()).map(move |i| Piece {
            start: &self.breaks[i],
            end: self.breaks.get(i + 1).unwrap_or(&self.end),
            value: self.vals[i],
        })
    }

    /// Breakpoints strictly inside the domain (every one is a value change).
    pub fn interior_breaks(&self) -> &[TimePoint] {
        &self.breaks[1..]
    }

    pub fn first_value(&self) -> Action {
        self.vals[0]
    }

    pub fn last_value(&self) -> Action {
        *self.vals.last().expect("non-empty")
    }

    pub fn eval(&self, t: &TimePoint) -> Result<Action> {
        if *t >= self.end {
            return self
                .tail
                .ok_or_else(|| Error::Domain(format!("t = {t} outside [0, {})", self.end)));
        }
        let idx = self.breaks.partition_point(|b| b <= t) - 1;
        Ok(self.vals[idx])
    }

    /// Materializes the tail up to `new_end`; a no-op when `new_end <= end`.
    pub fn extend_to(&self, new_end: &TimePoint) -> Result<StepFunction> {
        if *new_end <= self.end {
            return Ok(self.clone());
        }
        let tail = self.tail.ok_or_else(|| {
            Error::Domain(format!("cannot extend past {} without a tail value", self.end))
        })?;
        let mut breaks = self.breaks.clone();
        let mut vals = self.vals.clone();
        breaks.push(self.end.clone());
        vals.push(tail);
        Ok(StepFunction { end: new_end.clone(), breaks, vals, tail: self.tail }.normalized())
    }

    /// Restriction to `[s, t)`, re-based to `[0, t - s)`. `t` may exceed the
    /// domain end when a tail value is present.
    pub fn restrict(&self, s: &TimePoint, t: &TimePoint) -> Result<StepFunction> {
        if s >= t {
            return Err(Error::Usage(format!("empty restriction window [{s}, {t})")));
        }
        if *t > self.end && self.tail.is_none() {
            return Err(Error::Domain(format!("window end {t} beyond domain end {}", self.end)));
        }
        let mut breaks = vec![TimePoint::zero()];
        let mut vals = vec![self.eval(s)?];
        let first_after = self.breaks.partition_point(|b| b <= s);
        for (b, v) in self.breaks[first_after..].iter().zip(&self.vals[first_after..]) {
            if b >= t {
                break;
            }
            breaks.push(b - s);
            vals.push(*v);
        }
        if self.end > *s && self.end < *t {
            breaks.push(&self.end - s);
            vals.push(self.tail.expect("checked above"));
        }
        Ok(StepFunction { end: t - s, breaks, vals, tail: None }.normalized())
    }

    /// Affine change of time between `[0, 1)` and a window of length `t - s`.
    pub fn time_change(&self, s: &TimePoint, t: &TimePoint, direction: TimeChange) -> Result<StepFunction> {
        if s >= t {
            return Err(Error::Usage(format!("degenerate time-change window [{s}, {t})")));
        }
        let len = t - s;
        let (expected_end, factor) = match direction {
            TimeChange::Forward => (TimePoint::one(), len.value().clone()),
            TimeChange::Inverse => (len.clone(), BigRational::one() / len.value()),
        };
        if self.end != expected_end {
            return Err(Error::Usage(format!(
                "time change expects domain [0, {expected_end}), got [0, {})",
                self.end
            )));
        }
        Ok(StepFunction {
            end: self.end.scale(&factor),
            breaks: self.breaks.iter().map(|b| b.scale(&factor)).collect(),
            vals: self.vals.clone(),
            tail: self.tail,
        })
    }

    /// Exact measure of `{t in [0, end) : f(t) = value}`.
    pub fn measure_of(&self, value: Action) -> Measure {
        let mut total = BigRational::zero();
        for p in self.pieces().filter(|p| p.value == value) {
            total += p.len();
        }
        Measure(total)
    }

    /// `preferred` if it occupies strictly more than `threshold`, else `fallback`.
    pub fn majority_value(&self, threshold: &BigRational, preferred: Action, fallback: Action) -> Action {
        if self.measure_of(preferred).value() > threshold {
            preferred
        } else {
            fallback
        }
    }

    /// Left limit `f(t-)` for `0 < t`; continues through the tail.
    pub fn value_before(&self, t: &TimePoint) -> Result<Action> {
        if t.is_zero() {
            return Err(Error::Domain("no value before time 0".into()));
        }
        if *t > self.end {
            return self.eval(t);
        }
        let idx = self.breaks.partition_point(|b| b < t) - 1;
        Ok(self.vals[idx])
    }

    /// Appends `seg` (re-based at 0) after the current domain end, in place.
    pub fn append(&mut self, seg: &StepFunction) {
        let offset = self.end.clone();
        for p in seg.pieces() {
            if self.vals.last() != Some(&p.value) {
                self.breaks.push(&offset + p.start);
                self.vals.push(p.value);
            }
        }
        self.end = &offset + seg.end();
    }

    /// Whether `self` and `other` agree a.e. on `[s, e)`; both are continued
    /// by their tails where needed.
    pub fn agrees_on(&self, other: &StepFunction, s: &TimePoint, e: &TimePoint) -> Result<bool> {
        if s >= e {
            return Ok(true);
        }
        let mut at = s.clone();
        while at < *e {
            let (va, na) = self.value_and_next_break(&at)?;
            let (vb, nb) = other.value_and_next_break(&at)?;
            if va != vb {
                return Ok(false);
            }
            let next = match (na, nb) {
                (Some(x), Some(y)) => x.min(y).clone(),
                (Some(x), None) | (None, Some(x)) => x.clone(),
                (None, None) => break,
            };
            at = next;
        }
        Ok(true)
    }

    /// Value at `t` and the next point after `t` where the value may change.
    fn value_and_next_break(&self, t: &TimePoint) -> Result<(Action, Option<&TimePoint>)> {
        if *t >= self.end {
            let tail = self
                .tail
                .ok_or_else(|| Error::Domain(format!("t = {t} outside [0, {})", self.end)))?;
            return Ok((tail, None));
        }
        let idx = self.breaks.partition_point(|b| b <= t) - 1;
        let next = self.breaks.get(idx + 1).unwrap_or(&self.end);
        Ok((self.vals[idx], Some(next)))
    }
}

/// Concatenates segments in order; the result is normalized.
pub fn splice(segments: &[StepFunction]) -> Result<StepFunction> {
    if segments.is_empty() {
        return Err(Error::Usage("splice of an empty segment list".into()));
    }
    let mut breaks = Vec::new();
    let mut vals = Vec::new();
    let mut offset = TimePoint::zero();
    for seg in segments {
        for p in seg.pieces() {
            breaks.push(&offset + p.start);
            vals.push(p.value);
        }
        offset = &offset + seg.end();
    }
    let tail = segments.last().and_then(|s| s.tail);
    Ok(StepFunction { end: offset, breaks, vals, tail }.normalized())
}

/// One cell of the merged partition of two step functions.
#[derive(Clone, Debug)]
pub struct JointPiece {
    pub start: TimePoint,
    pub end: TimePoint,
    pub left: Action,
    pub right: Action,
}

/// Merge sweep over the union of breakpoints of `f` and `g` on `[0, until)`.
/// Either function is continued by its tail past its own domain end.
pub fn joint_pieces(f: &StepFunction, g: &StepFunction, until: &TimePoint) -> Result<Vec<JointPiece>> {
    let f = f.extend_to(until)?;
    let g = g.extend_to(until)?;
    let fp: Vec<Piece<'_>> = f.pieces().collect();
    let gp: Vec<Piece<'_>> = g.pieces().collect();
    let mut out = Vec::with_capacity(fp.len() + gp.len());
    let (mut i, mut j) = (0, 0);
    let mut at = TimePoint::zero();
    while at < *until {
        while fp[i].end <= &at {
            i += 1;
        }
        while gp[j].end <= &at {
            j += 1;
        }
        let next = fp[i].end.min(gp[j].end).min(until).clone();
        out.push(JointPiece { start: at, end: next.clone(), left: fp[i].value, right: gp[j].value });
        at = next;
    }
    Ok(out)
}

fn common_end(f: &StepFunction, g: &StepFunction) -> Result<TimePoint> {
    if f.end() != g.end() {
        return Err(Error::Usage(format!(
            "domains differ: [0, {}) vs [0, {})",
            f.end(),
            g.end()
        )));
    }
    Ok(f.end().clone())
}

/// Exact Lebesgue measure of `{t : f(t) = g(t)}` over the common domain.
pub fn agreement_measure(f: &StepFunction, g: &StepFunction) -> Result<Measure> {
    let end = common_end(f, g)?;
    let mut total = BigRational::zero();
    for p in joint_pieces(f, g, &end)? {
        if p.left == p.right {
            total += p.end.value() - p.start.value();
        }
    }
    Ok(Measure(total))
}

/// Exact Lebesgue measure of `{t : f(t) != g(t)}` over the common domain.
pub fn disagreement_measure(f: &StepFunction, g: &StepFunction) -> Result<Measure> {
    let end = common_end(f, g)?;
    let mut total = BigRational::zero();
    for p in joint_pieces(f, g, &end)? {
        if p.left != p.right {
            total += p.end.value() - p.start.value();
        }
    }
    Ok(Measure(total))
}

impl fmt::Debug for StepFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, p) in self.pieces().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{}@{}", p.value, p.start)?;
        }
        write!(f, " | end {}", self.end)?;
        if let Some(t) = self.tail {
            write!(f, ", tail {t}")?;
        }
        write!(f, "]")
    }
}

#[derive(Serialize, Deserialize)]
struct StepFunctionRepr {
    end: TimePoint,
    breaks: Vec<TimePoint>,
    vals: Vec<Action>,
    #[serde(default)]
    tail: Option<Action>,
}

impl TryFrom<StepFunctionRepr> for StepFunction {
    type Error = Error;
    fn try_from(r: StepFunctionRepr) -> Result<Self> {
        StepFunction::new(r.end, r.breaks, r.vals, r.tail)
    }
}

impl From<StepFunction> for StepFunctionRepr {
    fn from(f: StepFunction) -> Self {
        StepFunctionRepr { end: f.end, breaks: f.breaks, vals: f.vals, tail: f.tail }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    const A: Action = Action::A;
    const B: Action = Action::B;

    fn t(p: i64, q: i64) -> TimePoint {
        TimePoint::frac(p, q)
    }

    fn half_a_half_b() -> StepFunction {
        StepFunction::new(t(1, 1), vec![t(0, 1), t(1, 2)], vec![A, B], None).unwrap()
    }

    #[test]
    fn eval_examples() {
        let c = StepFunction::constant(t(1, 1), A).unwrap();
        assert_eq!(c.eval(&t(1, 2)).unwrap(), A);
        let f = half_a_half_b();
        assert_eq!(f.eval(&t(1, 2)).unwrap(), B);
        assert_eq!(f.eval(&t(0, 1)).unwrap(), A);
        assert!(matches!(f.eval(&t(3, 2)), Err(Error::Domain(_))));
        assert_eq!(f.clone().with_tail(Some(A)).eval(&t(3, 2)).unwrap(), A);
    }

    #[test]
    fn construction_rejects_malformed_input() {
        assert!(StepFunction::new(t(1, 1), vec![t(1, 4)], vec![A], None).is_err());
        assert!(StepFunction::new(t(1, 1), vec![t(0, 1), t(0, 1)], vec![A, B], None).is_err());
        assert!(StepFunction::new(t(1, 1), vec![t(0, 1), t(1, 1)], vec![A, B], None).is_err());
        assert!(StepFunction::new(t(0, 1), vec![t(0, 1)], vec![A], None).is_err());
        assert!(StepFunction::new(t(1, 1), vec![t(0, 1)], vec![A, B], None).is_err());
    }

    #[test]
    fn normalization_merges_equal_neighbours() {
        let f = StepFunction::new(t(1, 1), vec![t(0, 1), t(1, 3), t(2, 3)], vec![A, A, B], None).unwrap();
        assert_eq!(f.piece_count(), 2);
        assert_eq!(f.breaks(), &[t(0, 1), t(2, 3)]);
    }

    #[test]
    fn agreement_examples() {
        let f = half_a_half_b();
        assert_eq!(agreement_measure(&f, &f).unwrap(), t(1, 1));
        let ca = StepFunction::constant(t(1, 1), A).unwrap();
        let cb = StepFunction::constant(t(1, 1), B).unwrap();
        assert_eq!(agreement_measure(&ca, &cb).unwrap(), t(0, 1));
        let g = StepFunction::new(t(1, 1), vec![t(0, 1), t(1, 4)], vec![A, B], None).unwrap();
        assert_eq!(agreement_measure(&f, &g).unwrap(), t(3, 4));
        assert_eq!(disagreement_measure(&f, &g).unwrap(), t(1, 4));
        let short = StepFunction::constant(t(1, 2), A).unwrap();
        assert!(matches!(agreement_measure(&f, &short), Err(Error::Usage(_))));
    }

    #[test]
    fn restrict_examples() {
        let c = StepFunction::constant(t(1, 1), A).unwrap();
        assert_eq!(c.restrict(&t(0, 1), &t(1, 2)).unwrap(), StepFunction::constant(t(1, 2), A).unwrap());
        let f = half_a_half_b();
        let r = f.restrict(&t(1, 4), &t(3, 4)).unwrap();
        assert_eq!(r, StepFunction::new(t(1, 2), vec![t(0, 1), t(1, 4)], vec![A, B], None).unwrap());
        assert!(matches!(f.restrict(&t(1, 2), &t(1, 2)), Err(Error::Usage(_))));
        assert!(matches!(f.restrict(&t(1, 2), &t(2, 1)), Err(Error::Domain(_))));
    }

    #[test]
    fn restrict_through_tail() {
        let f = half_a_half_b().with_tail(Some(A));
        let r = f.restrict(&t(3, 4), &t(2, 1)).unwrap();
        assert_eq!(r, StepFunction::new(t(5, 4), vec![t(0, 1), t(1, 4)], vec![B, A], None).unwrap());
    }

    #[test]
    fn splice_examples() {
        let a = StepFunction::constant(t(1, 2), A).unwrap();
        let b = StepFunction::constant(t(1, 2), B).unwrap();
        let aa = splice(&[a.clone(), a.clone()]).unwrap();
        assert_eq!(aa, StepFunction::constant(t(1, 1), A).unwrap());
        assert_eq!(aa.piece_count(), 1);
        assert_eq!(splice(&[a, b]).unwrap(), half_a_half_b());
        assert!(matches!(splice(&[]), Err(Error::Usage(_))));
    }

    #[test]
    fn time_change_examples() {
        let f = half_a_half_b();
        let fw = f.time_change(&t(0, 1), &t(2, 1), TimeChange::Forward).unwrap();
        assert_eq!(fw, StepFunction::new(t(2, 1), vec![t(0, 1), t(1, 1)], vec![A, B], None).unwrap());
        let back = fw.time_change(&t(0, 1), &t(2, 1), TimeChange::Inverse).unwrap();
        assert_eq!(back, f);
        let c = StepFunction::constant(t(1, 1), A).unwrap();
        let small = c.time_change(&t(1, 4), &t(3, 8), TimeChange::Forward).unwrap();
        assert_eq!(small, StepFunction::constant(t(1, 8), A).unwrap());
        assert!(matches!(c.time_change(&t(1, 2), &t(1, 2), TimeChange::Forward), Err(Error::Usage(_))));
    }

    #[test]
    fn majority_examples() {
        let len = t(1, 16);
        let half = len.value() / BigRational::from_integer(2.into());
        let ca = StepFunction::constant(len.clone(), A).unwrap();
        assert_eq!(ca.majority_value(&half, A, B), A);
        let tie = StepFunction::new(len.clone(), vec![t(0, 1), t(1, 32)], vec![A, B], None).unwrap();
        assert_eq!(tie.majority_value(&half, A, B), B);
        let cb = StepFunction::constant(len, B).unwrap();
        assert_eq!(cb.majority_value(&half, A, B), B);
    }

    #[test]
    fn append_agree_and_left_limits() {
        let mut f = StepFunction::constant(t(1, 2), A).unwrap();
        f.append(&StepFunction::constant(t(1, 4), A).unwrap());
        assert_eq!(f, StepFunction::constant(t(3, 4), A).unwrap());
        f.append(&StepFunction::constant(t(1, 4), B).unwrap());
        assert_eq!(f, StepFunction::new(t(1, 1), vec![t(0, 1), t(3, 4)], vec![A, B], None).unwrap());
        assert_eq!(f.value_before(&t(3, 4)).unwrap(), A);
        assert_eq!(f.eval(&t(3, 4)).unwrap(), B);
        assert!(f.value_before(&t(0, 1)).is_err());

        let g = half_a_half_b();
        assert!(f.agrees_on(&g, &t(0, 1), &t(1, 2)).unwrap());
        assert!(!f.agrees_on(&g, &t(0, 1), &t(3, 4)).unwrap());
        assert!(f.agrees_on(&g, &t(3, 4), &t(1, 1)).unwrap());
        let ft = f.clone().with_tail(Some(B));
        let gt = g.clone().with_tail(Some(B));
        assert!(ft.agrees_on(&gt, &t(3, 4), &t(9, 1)).unwrap());
        assert!(f.agrees_on(&g, &t(3, 4), &t(2, 1)).is_err());
    }

    #[test]
    fn json_encoding() {
        let f = half_a_half_b();
        let s = serde_json::to_string(&f).unwrap();
        assert_eq!(s, r#"{"end":"1","breaks":["0","1/2"],"vals":["a","b"],"tail":null}"#);
        let back: StepFunction = serde_json::from_str(&s).unwrap();
        assert_eq!(back, f);
        let bad = r#"{"end":"1","breaks":["1/2"],"vals":["a"],"tail":null}"#;
        assert!(serde_json::from_str::<StepFunction>(bad).is_err());
    }
}
