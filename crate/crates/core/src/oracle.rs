//! Brute-force reference computations used by the `verify` command. They
//! share no code with the exact sweeps they check: values come from point
//! evaluation only.

use crate::interval_fn::{Action, StepFunction, TimePoint};

/// Midpoint count of `f(x) = g(x)` over `points` equally spaced samples,
/// scaled to the domain length.
pub fn sampled_agreement(f: &StepFunction, g: &StepFunction, points: usize) -> f64 {
    let len = f.end().to_f64();
    let fv = sample(f, points);
    let gv = sample(g, points);
    let hits = fv.iter().zip(&gv).filter(|(a, b)| a == b).count();
    len * hits as f64 / points as f64
}

/// Values at the midpoints `(i + 1/2) len / points`, read in one pass.
fn sample(f: &StepFunction, points: usize) -> Vec<Action> {
    let len = f.end().to_f64();
    let starts: Vec<f64> = f.breaks().iter().map(TimePoint::to_f64).collect();
    let mut out = Vec::with_capacity(points);
    let mut piece = 0;
    for i in 0..points {
        let x = (i as f64 + 0.5) * len / points as f64;
        while piece + 1 < starts.len() && starts[piece + 1] <= x {
            piece += 1;
        }
        out.push(f.values()[piece]);
    }
    out
}

const GAUSS_NODES: [(f64, f64); 5] = [
    (0.0, 0.568_888_888_888_888_9),
    (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (-0.906_179_845_938_664, 0.236_926_885_056_189_08),
    (0.906_179_845_938_664, 0.236_926_885_056_189_08),
];

fn gauss(r: f64, a: f64, b: f64) -> f64 {
    let half = (b - a) / 2.0;
    let mid = (a + b) / 2.0;
    GAUSS_NODES.iter().map(|(x, w)| w * r * (-r * (mid + half * x)).exp()).sum::<f64>() * half
}

/// `∫ r e^{-rt} 1{pred(u(t), v(t))} dt` by Gauss-Legendre quadrature on the
/// intervals between breakpoints, each cut into pieces of length `<= 1/(4r)`.
/// Controls with tails are integrated until `e^{-rt}` drops below `1e-17`.
pub fn quadrature_discounted<P>(u: &StepFunction, v: &StepFunction, r: f64, pred: P) -> f64
where
    P: Fn(Action, Action) -> bool,
{
    let infinite = u.tail().is_some() && v.tail().is_some();
    let finite_end = u.end().to_f64().max(v.end().to_f64());
    let stop = if infinite { finite_end.max(17.0 * std::f64::consts::LN_10 / r) } else { finite_end };
    let mut cuts: Vec<TimePoint> = u.breaks().iter().chain(v.breaks()).cloned().collect();
    cuts.push(u.end().clone());
    cuts.push(v.end().clone());
    cuts.sort();
    cuts.dedup();
    let mut edges: Vec<f64> = cuts.iter().map(TimePoint::to_f64).filter(|x| *x < stop).collect();
    edges.push(stop);
    let at = |f: &StepFunction, lo: &TimePoint| f.eval(lo).expect("continued by the tail");
    let step = 0.25 / r;
    let mut total = 0.0;
    for (i, w) in edges.windows(2).enumerate() {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        if !pred(at(u, &cuts[i]), at(v, &cuts[i])) {
            continue;
        }
        let pieces = ((b - a) / step).ceil().max(1.0) as usize;
        let h = (b - a) / pieces as f64;
        for j in 0..pieces {
            total += gauss(r, a + j as f64 * h, a + (j + 1) as f64 * h);
        }
    }
    total
}
