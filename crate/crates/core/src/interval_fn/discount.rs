//! Discounted integrals `∫ r e^{-rt} 1{pred(u(t), v(t))} dt` evaluated in
//! closed form piece by piece.

use super::step::{joint_pieces, StepFunction};
use super::time::{Action, TimePoint};
use crate::error::{Error, Result};

pub(crate) fn check_rate(r: f64) -> Result<()> {
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::Usage(format!("discount rate must be positive, got {r}")));
    }
    Ok(())
}

/// `∫_s^e r e^{-rt} dt = e^{-rs} - e^{-re}`, written to keep relative
/// accuracy on short pieces.
pub fn discounted_mass(r: f64, start: f64, end: f64) -> f64 {
    if end <= start {
        return 0.0;
    }
    if end.is_infinite() {
        return (-r * start).exp();
    }
    -(-r * start).exp() * (-r * (end - start)).exp_m1()
}

/// `∫_T^∞ r e^{-rt} dt = e^{-rT}`.
pub fn tail_mass(r: f64, from: f64) -> f64 {
    (-r * from).exp()
}

/// Discounted measure of the set where `pred(u(t), v(t))` holds.
///
/// Both functions must either carry tail values (the integral then runs to
/// infinity) or share the same finite domain.
pub fn discounted_integral<P>(u: &StepFunction, v: &StepFunction, r: f64, pred: P) -> Result<f64>
where
    P: Fn(Action, Action) -> bool,
{
    check_rate(r)?;
    let (until, tail) = match (u.tail(), v.tail()) {
        (Some(tu), Some(tv)) => (u.end().max(v.end()).clone(), Some((tu, tv))),
        (None, None) if u.end() == v.end() => (u.end().clone(), None),
        (None, None) => {
            return Err(Error::Usage(format!(
                "finite controls with different horizons {} and {}",
                u.end(),
                v.end()
            )))
        }
        _ => return Err(Error::Usage("only one of the two controls has a tail value".into())),
    };
    let mut total = 0.0;
    for p in joint_pieces(u, v, &until)? {
        if pred(p.left, p.right) {
            total += discounted_mass(r, p.start.to_f64(), p.end.to_f64());
        }
    }
    if let Some((tu, tv)) = tail {
        if pred(tu, tv) {
            total += tail_mass(r, until.to_f64());
        }
    }
    Ok(total)
}

/// Discounted measure of `{t : f(t) satisfies pred}` for a single function.
pub fn discounted_measure_where<P>(f: &StepFunction, r: f64, pred: P) -> Result<f64>
where
    P: Fn(Action) -> bool,
{
    discounted_integral(f, f, r, |a, _| pred(a))
}

/// Discounted mass of a finite union of disjoint windows.
pub fn discounted_windows<'a, I>(r: f64, windows: I) -> f64
where
    I: IntoIterator<Item = (&'a TimePoint, &'a TimePoint)>,
{
    windows
        .into_iter()
        .map(|(s, e)| discounted_mass(r, s.to_f64(), e.to_f64()))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    const A: Action = Action::A;
    const B: Action = Action::B;

    #[test]
    fn always_never_and_half() {
        let r = 0.7;
        let u = StepFunction::constant(TimePoint::one(), A).unwrap().with_tail(Some(A));
        let v = StepFunction::constant(TimePoint::one(), B).unwrap().with_tail(Some(B));
        assert!((discounted_integral(&u, &v, r, |_, _| true).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(discounted_integral(&u, &v, r, |_, _| false).unwrap(), 0.0);

        // Predicate true exactly on [0, ln 2 / r), approximated by a fine rational.
        let cut = crate::interval_fn::time::ceil_to_grid(std::f64::consts::LN_2 / r, 1 << 40);
        let cut = TimePoint::new(cut).unwrap();
        let w = StepFunction::new(
            TimePoint::integer(2),
            vec![TimePoint::zero(), cut],
            vec![A, B],
            Some(B),
        )
        .unwrap();
        let got = discounted_integral(&u, &w, r, |x, y| x == y).unwrap();
        assert!((got - 0.5).abs() < 1e-11, "{got}");
    }

    #[test]
    fn rejects_bad_rate_and_mixed_horizons() {
        let u = StepFunction::constant(TimePoint::one(), A).unwrap();
        assert!(matches!(discounted_integral(&u, &u, 0.0, |_, _| true), Err(Error::Usage(_))));
        assert!(matches!(discounted_integral(&u, &u, -1.0, |_, _| true), Err(Error::Usage(_))));
        let tailed = u.clone().with_tail(Some(A));
        assert!(matches!(discounted_integral(&u, &tailed, 1.0, |_, _| true), Err(Error::Usage(_))));
        let longer = StepFunction::constant(TimePoint::integer(2), A).unwrap();
        assert!(matches!(discounted_integral(&u, &longer, 1.0, |_, _| true), Err(Error::Usage(_))));
    }

    #[test]
    fn finite_domain_integral() {
        let u = StepFunction::constant(TimePoint::integer(3), A).unwrap();
        let r = 1.5;
        let got = discounted_integral(&u, &u, r, |_, _| true).unwrap();
        assert!((got - (1.0 - (-r * 3.0f64).exp())).abs() < 1e-15);
    }
}
