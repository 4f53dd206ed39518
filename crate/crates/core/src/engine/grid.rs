use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interval_fn::TimePoint;

/// An unbounded time grid `0 = t_0 < t_1 < ...`: an explicit prefix followed
/// by an arithmetic continuation with a fixed positive step.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GridRepr", into = "GridRepr")]
pub struct Grid {
    prefix: Vec<TimePoint>,
    tail_step: TimePoint,
}

#[derive(Serialize, Deserialize)]
struct GridRepr {
    points: Vec<TimePoint>,
    tail_step: TimePoint,
}

impl TryFrom<GridRepr> for Grid {
    type Error = Error;
    fn try_from(r: GridRepr) -> Result<Self> {
        Grid::new(r.points, r.tail_step)
    }
}

impl From<Grid> for GridRepr {
    fn from(g: Grid) -> Self {
        GridRepr { points: g.prefix, tail_step: g.tail_step }
    }
}

/// One grid cell `[start, end)` with its index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cell {
    pub index: usize,
    pub start: TimePoint,
    pub end: TimePoint,
}

impl Cell {
    pub fn len(&self) -> TimePoint {
        &self.end - &self.start
    }
}

impl Grid {
    pub fn new(prefix: Vec<TimePoint>, tail_step: TimePoint) -> Result<Self> {
        if prefix.first().map_or(true, |t| !t.is_zero()) {
            return Err(Error::Usage("grid must start at 0".into()));
        }
        if prefix.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Usage("grid points not strictly increasing".into()));
        }
        if tail_step.is_zero() {
            return Err(Error::Usage("grid tail step must be positive".into()));
        }
        Ok(Grid { prefix, tail_step })
    }

    /// The grid `{0, step, 2 step, ...}`.
    pub fn uniform(step: TimePoint) -> Result<Self> {
        Self::new(vec![TimePoint::zero()], step)
    }

    pub fn prefix(&self) -> &[TimePoint] {
        &self.prefix
    }

    pub fn tail_step(&self) -> &TimePoint {
        &self.tail_step
    }

    fn last_prefix(&self) -> &TimePoint {
        self.prefix.last().expect("non-empty")
    }

    pub fn point(&self, n: usize) -> TimePoint {
        if n < self.prefix.len() {
            return self.prefix[n].clone();
        }
        let k = (n + 1 - self.prefix.len()) as i64;
        self.last_prefix() + &self.tail_step.scale(&BigRational::from_integer(BigInt::from(k)))
    }

    pub fn cell(&self, n: usize) -> Cell {
        Cell { index: n, start: self.point(n), end: self.point(n + 1) }
    }

    /// Index `n` with `t_n <= t < t_{n+1}`.
    pub fn cell_index(&self, t: &TimePoint) -> usize {
        let last = self.last_prefix();
        if t < last {
            return self.prefix.partition_point(|p| p <= t) - 1;
        }
        let k = ((t - last).value() / self.tail_step.value()).floor().to_integer();
        self.prefix.len() - 1 + k.to_usize().expect("grid index overflow")
    }

    pub fn cell_containing(&self, t: &TimePoint) -> Cell {
        self.cell(self.cell_index(t))
    }

    /// All grid points strictly below `horizon`.
    pub fn points_below(&self, horizon: &TimePoint) -> Vec<TimePoint> {
        let mut out: Vec<TimePoint> = self.prefix.iter().filter(|p| *p < horizon).cloned().collect();
        if self.last_prefix() < horizon {
            let mut n = self.prefix.len();
            loop {
                let p = self.point(n);
                if p >= *horizon {
                    break;
                }
                out.push(p);
                n += 1;
            }
        }
        out
    }

    /// Grid points in `[from, until)`.
    pub fn points_between(&self, from: &TimePoint, until: &TimePoint) -> Vec<TimePoint> {
        let mut out = Vec::new();
        if from >= until {
            return out;
        }
        let mut n = self.cell_index(from);
        if self.point(n) < *from {
            n += 1;
        }
        loop {
            let p = self.point(n);
            if p >= *until {
                return out;
            }
            out.push(p);
            n += 1;
        }
    }

    /// Whether some grid point lies in the open interval `(s, e)`.
    pub fn meets_interior(&self, s: &TimePoint, e: &TimePoint) -> bool {
        if s >= e {
            return false;
        }
        let n = self.cell_index(s);
        self.point(n + 1) < *e
    }

    /// Smallest gap between consecutive points (the tail step counts).
    pub fn min_gap(&self) -> TimePoint {
        self.prefix
            .windows(2)
            .map(|w| &w[1] - &w[0])
            .chain([self.tail_step.clone()])
            .min()
            .expect("non-empty")
    }

    /// Largest gap between consecutive points.
    pub fn max_gap(&self) -> TimePoint {
        self.prefix
            .windows(2)
            .map(|w| &w[1] - &w[0])
            .chain([self.tail_step.clone()])
            .max()
            .expect("non-empty")
    }
}

/// Sorted union of the points of both grids strictly below `horizon`.
pub fn merge_grids(a: &Grid, b: &Grid, horizon: &TimePoint) -> Vec<TimePoint> {
    merge_grids_between(a, b, &TimePoint::zero(), horizon)
}

/// Sorted union of the points of both grids in `[from, until)`.
pub fn merge_grids_between(a: &Grid, b: &Grid, from: &TimePoint, until: &TimePoint) -> Vec<TimePoint> {
    let mut pts = a.points_between(from, until);
    pts.extend(b.points_between(from, until));
    pts.sort();
    pts.dedup();
    pts
}
