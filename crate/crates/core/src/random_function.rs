//! Finite-support random functions `f : Ω × [0,1) → {a, b}` and the dyadic
//! refinement levels at which their sections become mostly constant.

use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interval_fn::time::{format_rational, rational_string};
use crate::interval_fn::{Action, StepFunction, TimePoint};

/// Largest number of level-n cells for which the dyadic family is enumerated
/// exhaustively; above it a seeded subsample is drawn.
pub const EXHAUSTIVE_CELL_LIMIT: u32 = 12;
/// Number of sections drawn when the dyadic family is subsampled.
pub const DYADIC_SUBSAMPLE: usize = 1024;
/// Largest denominator used for breakpoints of [`generate_piecewise`].
pub const LATTICE_DENOMINATOR: i64 = 1000;

/// One outcome ω with its probability and section `f_ω` on `[0, 1)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    #[serde(with = "rational_string")]
    pub p: BigRational,
    pub section: StepFunction,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelRepr", into = "ModelRepr")]
pub struct RandomFunctionModel {
    label: String,
    atoms: Vec<Atom>,
}

#[derive(Serialize, Deserialize)]
struct ModelRepr {
    #[serde(default)]
    label: String,
    atoms: Vec<Atom>,
}

impl TryFrom<ModelRepr> for RandomFunctionModel {
    type Error = Error;
    fn try_from(r: ModelRepr) -> Result<Self> {
        RandomFunctionModel::new(r.label, r.atoms)
    }
}

impl From<RandomFunctionModel> for ModelRepr {
    fn from(m: RandomFunctionModel) -> Self {
        ModelRepr { label: m.label, atoms: m.atoms }
    }
}

impl RandomFunctionModel {
    pub fn new(label: impl Into<String>, atoms: Vec<Atom>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::Usage("model without atoms".into()));
        }
        let mut total = BigRational::zero();
        for (i, atom) in atoms.iter().enumerate() {
            if atom.p <= BigRational::zero() {
                return Err(Error::Usage(format!("atom {i} has non-positive probability")));
            }
            if *atom.section.end() != TimePoint::one() {
                return Err(Error::Usage(format!(
                    "atom {i} section has domain [0, {}), expected [0, 1)",
                    atom.section.end()
                )));
            }
            total += &atom.p;
        }
        if !total.is_one() {
            return Err(Error::Usage(format!("probabilities sum to {}", format_rational(&total))));
        }
        Ok(RandomFunctionModel { label: label.into(), atoms })
    }

    /// Equal-probability model over the given sections.
    pub fn uniform(label: impl Into<String>, sections: Vec<StepFunction>) -> Result<Self> {
        let n = sections.len();
        if n == 0 {
            return Err(Error::Usage("model without atoms".into()));
        }
        let p = BigRational::new(BigInt::one(), BigInt::from(n));
        let atoms = sections.into_iter().map(|section| Atom { p: p.clone(), section }).collect();
        Self::new(label, atoms)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Exact probability of the atoms satisfying `pred`.
    pub fn probability_where<F: Fn(&Atom) -> bool>(&self, pred: F) -> BigRational {
        self.atoms.iter().filter(|a| pred(a)).fold(BigRational::zero(), |acc, a| acc + &a.p)
    }
}

fn two_pow(n: u32) -> BigInt {
    BigInt::one() << n as usize
}

/// Share of the level-`n` dyadic cells `[k/2^n, (k+1)/2^n)` on which the
/// section is constant, i.e. whose open interior holds no breakpoint.
pub fn good_fraction(section: &StepFunction, n: u32) -> Result<BigRational> {
    if *section.end() != TimePoint::one() {
        return Err(Error::Usage(format!("section domain is [0, {}), expected [0, 1)", section.end())));
    }
    let cells = two_pow(n);
    let mut bad: Vec<BigInt> = Vec::new();
    for b in section.interior_breaks() {
        let scaled = b.value() * BigRational::from_integer(cells.clone());
        if !scaled.is_integer() {
            let k = scaled.floor().to_integer();
            if bad.last() != Some(&k) {
                bad.push(k);
            }
        }
    }
    Ok(BigRational::new(&cells - BigInt::from(bad.len()), cells))
}

fn check_eps_half(eps: &BigRational) -> Result<()> {
    let half = BigRational::new(BigInt::one(), BigInt::from(2));
    if *eps <= BigRational::zero() || *eps >= half {
        return Err(Error::Usage(format!("eps = {} outside (0, 1/2)", format_rational(eps))));
    }
    Ok(())
}

/// Smallest level `n` with `good_fraction(section, n) > 1 - 2 eps`.
pub fn n_omega(section: &StepFunction, eps: &BigRational) -> Result<u32> {
    check_eps_half(eps)?;
    let target = BigRational::one() - eps * BigInt::from(2);
    let mut n = 0;
    loop {
        if good_fraction(section, n)? > target {
            return Ok(n);
        }
        n += 1;
    }
}

/// Smallest level `n` such that `P(n_ω <= n) > 1 - eps`.
pub fn n_star(model: &RandomFunctionModel, eps: &BigRational) -> Result<u32> {
    check_eps_half(eps)?;
    let levels: Vec<(BigRational, u32)> = model
        .atoms()
        .iter()
        .map(|a| Ok((a.p.clone(), n_omega(&a.section, eps)?)))
        .collect::<Result<_>>()?;
    n_star_from_levels(&levels, eps)
}

/// Smallest `n` with `sum { p : level <= n } > 1 - eps` for precomputed
/// `(probability, level)` pairs. Accepts any `eps` in `(0, 1)`.
pub fn n_star_from_levels(levels: &[(BigRational, u32)], eps: &BigRational) -> Result<u32> {
    if *eps <= BigRational::zero() || *eps >= BigRational::one() {
        return Err(Error::Usage(format!("eps = {} outside (0, 1)", format_rational(eps))));
    }
    let target = BigRational::one() - eps;
    let candidates: BTreeSet<u32> = levels.iter().map(|(_, l)| *l).chain([0]).collect();
    for n in candidates {
        let mass = levels
            .iter()
            .filter(|(_, lvl)| *lvl <= n)
            .fold(BigRational::zero(), |acc, (p, _)| acc + p);
        if mass > target {
            return Ok(n);
        }
    }
    Err(Error::Usage("probabilities sum below 1 - eps".into()))
}

/// Section taking value `cells[k]` on `[k/2^n, (k+1)/2^n)`.
pub fn dyadic_section(cells: &[Action]) -> Result<StepFunction> {
    let m = cells.len();
    if m == 0 || !m.is_power_of_two() {
        return Err(Error::Usage(format!("{m} cells is not a power of two")));
    }
    let breaks = (0..m).map(|k| TimePoint::frac(k as i64, m as i64)).collect();
    StepFunction::new(TimePoint::one(), breaks, cells.to_vec(), None)
}

/// Uniform model over all `{a,b}`-valued sections constant on level-`n`
/// dyadic cells, or over [`DYADIC_SUBSAMPLE`] distinct seeded draws once
/// `2^n` exceeds [`EXHAUSTIVE_CELL_LIMIT`].
pub fn generate_dyadic_uniform(n: u32, seed: u64) -> Result<RandomFunctionModel> {
    if n > 16 {
        return Err(Error::Usage(format!("dyadic level {n} too large")));
    }
    let cells = 1usize << n;
    let decode = |bits: &dyn Fn(usize) -> bool| -> Vec<Action> {
        (0..cells).map(|k| if bits(k) { Action::B } else { Action::A }).collect()
    };
    let sections: Vec<StepFunction> = if cells as u32 <= EXHAUSTIVE_CELL_LIMIT {
        (0u64..1u64 << cells)
            .map(|pattern| dyadic_section(&decode(&|k| pattern >> k & 1 == 1)))
            .collect::<Result<_>>()?
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut seen = BTreeSet::new();
        let mut out = Vec::with_capacity(DYADIC_SUBSAMPLE);
        while out.len() < DYADIC_SUBSAMPLE {
            let pattern: Vec<bool> = (0..cells).map(|_| rng.gen()).collect();
            if seen.insert(pattern.clone()) {
                out.push(dyadic_section(&decode(&|k| pattern[k]))?);
            }
        }
        out
    };
    RandomFunctionModel::uniform(format!("dyadic-uniform n={n}"), sections)
}

/// Draws a rational in `(0, 1)` with denominator at most [`LATTICE_DENOMINATOR`].
fn lattice_point<R: Rng>(rng: &mut R) -> BigRational {
    let q = rng.gen_range(2..=LATTICE_DENOMINATOR);
    let p = rng.gen_range(1..q);
    let g = p.gcd(&q);
    BigRational::new(BigInt::from(p / g), BigInt::from(q / g))
}

/// Random section with between 1 and `max_pieces` pieces and lattice breakpoints.
pub fn random_section<R: Rng>(rng: &mut R, max_pieces: usize) -> StepFunction {
    let pieces = rng.gen_range(1..=max_pieces.max(1));
    let mut cuts = BTreeSet::new();
    while cuts.len() + 1 < pieces {
        cuts.insert(lattice_point(rng));
    }
    let mut breaks = vec![TimePoint::zero()];
    breaks.extend(cuts.into_iter().map(|c| TimePoint::new(c).expect("positive")));
    let mut value = if rng.gen() { Action::A } else { Action::B };
    let mut vals = Vec::with_capacity(breaks.len());
    for _ in 0..breaks.len() {
        vals.push(value);
        value = value.flip();
    }
    StepFunction::new(TimePoint::one(), breaks, vals, None).expect("valid by construction")
}

/// Seeded model of `atom_count` equiprobable sections with up to
/// `max_pieces` pieces each and non-dyadic rational breakpoints.
pub fn generate_piecewise(max_pieces: usize, atom_count: usize, seed: u64) -> Result<RandomFunctionModel> {
    if max_pieces == 0 || atom_count == 0 {
        return Err(Error::Usage("max_pieces and atom_count must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sections = (0..atom_count).map(|_| random_section(&mut rng, max_pieces)).collect();
    RandomFunctionModel::uniform(
        format!("piecewise max_pieces={max_pieces} atoms={atom_count} seed={seed}"),
        sections,
    )
}

/// The two constant sections `a` and `b`, each with probability 1/2.
pub fn constant_sections() -> RandomFunctionModel {
    let one = TimePoint::one();
    RandomFunctionModel::uniform(
        "constant-sections",
        vec![
            StepFunction::constant(one.clone(), Action::A).expect("valid"),
            StepFunction::constant(one, Action::B).expect("valid"),
        ],
    )
    .expect("valid")
}

/// A single deterministic constant section.
pub fn single_constant(value: Action) -> RandomFunctionModel {
    RandomFunctionModel::uniform(
        format!("constant-{value}"),
        vec![StepFunction::constant(TimePoint::one(), value).expect("valid")],
    )
    .expect("valid")
}
