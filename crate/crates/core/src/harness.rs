//! Experiment orchestration shared by the command-line tool and the browser
//! demo: configuration checks, the four commands, and report emission.

use std::fs;
use std::path::{Path, PathBuf};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::distributions::WeightedIndex;
use rand::prelude::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize, Serializer};

use crate::best_response::{build_response, verify_built, PlanDump, ResponseReport};
use crate::engine::catalog::{build_mixed, reference_catalog, MixedStrategySpec, Peeking};
use crate::engine::check::{check_nonanticipativity, random_control};
use crate::engine::play::{construct_play, construct_play_seeded, expected_payoff, truncation_horizon, verify_fixed_point};
use crate::engine::strategy::{DelayStrategy, MixedStrategy, Player};
use crate::error::{Error, Result};
use crate::guesser::{enforce_information_flow, play_protocol, run_guessing_game, AlphaEpsilon, FlowVerdict, GuessReport, GuessSchedule, PeekingGuess};
use crate::interval_fn::time::{format_rational, parse_rational, rational_string, to_f64};
use crate::interval_fn::{agreement_measure, discounted_integral, StepFunction, TimePoint};
use crate::oracle::{quadrature_discounted, sampled_agreement};
use crate::random_function::{generate_dyadic_uniform, generate_piecewise, n_star, random_section, RandomFunctionModel};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
/// Coverage of the Monte Carlo confidence radius.
pub const MC_CONFIDENCE: f64 = 0.95;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Guess,
    Ctmp,
    Sweep,
    Verify,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Mode {
    Exact,
    Mc { samples: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
    Both,
}

fn rational_list<S: Serializer>(list: &[BigRational], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(list.iter().map(format_rational))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub command: Command,
    pub model: Option<String>,
    pub strategy: Option<String>,
    #[serde(serialize_with = "rational_list")]
    pub eps: Vec<BigRational>,
    pub r: Option<f64>,
    pub seed: u64,
    pub mode: Mode,
}

impl ExperimentConfig {
    pub fn new(command: Command) -> Self {
        ExperimentConfig { command, model: None, strategy: None, eps: Vec::new(), r: None, seed: 0, mode: Mode::Exact }
    }
}

/// Accepts `p/q`, integers and plain decimals such as `0.05`, exactly.
pub fn parse_eps(s: &str) -> Result<BigRational> {
    let s = s.trim();
    match s.split_once('.') {
        Some((int, frac)) if !s.contains('/') => {
            if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
                return Err(Error::Parse(format!("invalid decimal {s:?}")));
            }
            let digits = format!("{}{frac}", if int.is_empty() { "0" } else { int });
            let numer: BigInt = digits.parse().map_err(|_| Error::Parse(format!("invalid decimal {s:?}")))?;
            Ok(BigRational::new(numer, BigInt::from(10).pow(frac.len() as u32)))
        }
        _ => parse_rational(s),
    }
}

/// Comma-separated list of [`parse_eps`] values.
pub fn parse_eps_list(s: &str) -> Result<Vec<BigRational>> {
    s.split(',').filter(|p| !p.trim().is_empty()).map(parse_eps).collect()
}

/// Removes duplicates (keeping first occurrences) and checks every value lies
/// strictly between 0 and `upper`.
pub fn prepare_eps(raw: &[BigRational], upper: &BigRational) -> Result<(Vec<BigRational>, Vec<String>)> {
    if raw.is_empty() {
        return Err(Error::Usage("empty eps list".into()));
    }
    let mut out: Vec<BigRational> = Vec::new();
    let mut warnings = Vec::new();
    for e in raw {
        if *e <= BigRational::zero() || e >= upper {
            return Err(Error::Usage(format!(
                "eps = {} outside (0, {})",
                format_rational(e),
                format_rational(upper)
            )));
        }
        if out.contains(e) {
            warnings.push(format!("duplicate eps {} ignored", format_rational(e)));
        } else {
            out.push(e.clone());
        }
    }
    Ok((out, warnings))
}

fn half() -> BigRational {
    BigRational::new(BigInt::one(), BigInt::from(2))
}

fn require_r(config: &ExperimentConfig) -> Result<f64> {
    match config.r {
        Some(r) if r.is_finite() && r > 0.0 => Ok(r),
        Some(r) => Err(Error::Usage(format!("discount rate must be positive, got {r}"))),
        None => Err(Error::Usage("missing discount rate --r".into())),
    }
}

fn parse_json<T: serde::de::DeserializeOwned>(text: &str, what: &str) -> Result<T> {
    serde_json::from_str(text)
        .map_err(|e| Error::Parse(format!("{what}: line {} column {}: {e}", e.line(), e.column())))
}

/// Model file: `{"label": ..., "atoms": [{"p": "1/4", "section": ...}]}`.
pub fn parse_model(text: &str) -> Result<RandomFunctionModel> {
    parse_json(text, "model")
}

/// Mixed-strategy file: `{"player": ..., "label": ..., "atoms": [...]}`.
pub fn parse_strategy(text: &str) -> Result<MixedStrategySpec> {
    parse_json(text, "strategy")
}

/// Common envelope of every report. Timing lives in [`Meta`] so reports stay
/// byte-identical across runs.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report<C> {
    pub version: &'static str,
    pub config: ExperimentConfig,
    pub warnings: Vec<String>,
    pub cases: Vec<C>,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Meta {
    pub version: &'static str,
    pub command: Command,
    pub wall_clock_seconds: f64,
}

/// Sample-mean estimate with a Hoeffding radius at [`MC_CONFIDENCE`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct McEstimate {
    pub samples: usize,
    #[serde(with = "rational_string")]
    pub estimate: BigRational,
    pub radius: f64,
    pub confidence: f64,
}

/// `sqrt(ln(2/δ) / 2n)` for values in `[0, 1]`.
pub fn hoeffding_radius(samples: usize, confidence: f64) -> f64 {
    ((2.0 / (1.0 - confidence)).ln() / (2.0 * samples as f64)).sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct McGuessCase {
    #[serde(with = "rational_string")]
    pub eps: BigRational,
    pub n_star: u32,
    pub prob_good: McEstimate,
    pub expected_payoff: McEstimate,
    /// Whether `1 - 3 eps` lies below the upper confidence limit.
    pub payoff_1_minus_3eps_plausible: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum GuessCase {
    Exact(GuessReport),
    MonteCarlo(McGuessCase),
}

impl GuessCase {
    pub fn passed(&self) -> bool {
        match self {
            GuessCase::Exact(r) => r.bounds.prop1 && r.bounds.payoff_1_minus_3eps,
            GuessCase::MonteCarlo(c) => c.payoff_1_minus_3eps_plausible,
        }
    }

    pub fn eps(&self) -> &BigRational {
        match self {
            GuessCase::Exact(r) => &r.eps,
            GuessCase::MonteCarlo(c) => &c.eps,
        }
    }

    /// Exact payoff or its estimate.
    pub fn payoff(&self) -> &BigRational {
        match self {
            GuessCase::Exact(r) => &r.expected_payoff,
            GuessCase::MonteCarlo(c) => &c.expected_payoff.estimate,
        }
    }
}

fn mean(values: &[BigRational]) -> BigRational {
    let total = values.iter().fold(BigRational::zero(), |acc, v| acc + v);
    total / BigInt::from(values.len())
}

fn monte_carlo_guess(model: &RandomFunctionModel, eps: &BigRational, samples: usize, seed: u64) -> Result<McGuessCase> {
    if samples == 0 {
        return Err(Error::Usage("Monte Carlo mode needs --samples > 0".into()));
    }
    let schedule = GuessSchedule::build(n_star(model, eps)?, eps)?;
    let weights: Vec<f64> = model.atoms().iter().map(|a| to_f64(&a.p)).collect();
    let dist = WeightedIndex::new(&weights).map_err(|e| Error::Usage(format!("atom weights: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let alpha = AlphaEpsilon::new();
    let good_level = BigRational::one() - eps * BigInt::from(2);
    let mut payoffs = Vec::with_capacity(samples);
    let mut good = Vec::with_capacity(samples);
    for _ in 0..samples {
        let atom = &model.atoms()[dist.sample(&mut rng)];
        let game = play_protocol(&alpha, &schedule, &atom.section)?;
        good.push(if game.agreement >= good_level { BigRational::one() } else { BigRational::zero() });
        payoffs.push(game.agreement);
    }
    let radius = hoeffding_radius(samples, MC_CONFIDENCE);
    let estimate = |values: &[BigRational]| McEstimate { samples, estimate: mean(values), radius, confidence: MC_CONFIDENCE };
    let expected_payoff = estimate(&payoffs);
    let plausible = to_f64(&expected_payoff.estimate) + radius >= 1.0 - 3.0 * to_f64(eps);
    Ok(McGuessCase {
        eps: eps.clone(),
        n_star: schedule.n_star(),
        prob_good: estimate(&good),
        expected_payoff,
        payoff_1_minus_3eps_plausible: plausible,
    })
}

fn guess_cases(config: &ExperimentConfig, model: &RandomFunctionModel, eps: &[BigRational]) -> Result<Vec<GuessCase>> {
    eps.iter()
        .enumerate()
        .map(|(i, e)| match config.mode {
            Mode::Exact => Ok(GuessCase::Exact(run_guessing_game(model, e)?)),
            Mode::Mc { samples } => Ok(GuessCase::MonteCarlo(monte_carlo_guess(
                model,
                e,
                samples,
                config.seed.wrapping_add(i as u64),
            )?)),
        })
        .collect()
}

/// α_ε against `model` for every eps.
pub fn cmd_guess(config: &ExperimentConfig, model: &RandomFunctionModel) -> Result<Report<GuessCase>> {
    let (eps, warnings) = prepare_eps(&config.eps, &half())?;
    let cases = guess_cases(config, model, &eps)?;
    let pass = cases.iter().all(GuessCase::passed);
    Ok(Report { version: VERSION, config: config.clone(), warnings, cases, pass })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    #[serde(with = "rational_string")]
    pub eps: BigRational,
    #[serde(with = "rational_string")]
    pub expected_payoff: BigRational,
    #[serde(with = "rational_string")]
    pub one_minus_3eps: BigRational,
    /// Present in Monte Carlo mode.
    pub radius: Option<f64>,
    pub bound: bool,
    /// Payoff strictly above the row with the next larger eps.
    pub increasing: bool,
}

/// Payoff of α_ε as eps decreases; rows are ordered by decreasing eps.
pub fn cmd_sweep(config: &ExperimentConfig, model: &RandomFunctionModel) -> Result<Report<SweepRow>> {
    let (mut eps, warnings) = prepare_eps(&config.eps, &half())?;
    if eps.len() < 3 {
        return Err(Error::Usage(format!("a sweep needs at least 3 distinct eps values, got {}", eps.len())));
    }
    eps.sort_by(|a, b| b.cmp(a));
    let cases = guess_cases(config, model, &eps)?;
    let mut rows: Vec<SweepRow> = Vec::with_capacity(cases.len());
    for case in &cases {
        let one_minus_3eps = BigRational::one() - case.eps() * BigInt::from(3);
        let (bound, radius) = match case {
            GuessCase::Exact(r) => (r.expected_payoff >= one_minus_3eps, None),
            GuessCase::MonteCarlo(c) => (c.payoff_1_minus_3eps_plausible, Some(c.expected_payoff.radius)),
        };
        let increasing = rows.last().map_or(true, |prev| *case.payoff() > prev.expected_payoff);
        rows.push(SweepRow {
            eps: case.eps().clone(),
            expected_payoff: case.payoff().clone(),
            one_minus_3eps,
            radius,
            bound,
            increasing,
        });
    }
    let pass = rows.iter().all(|r| r.bound);
    Ok(Report { version: VERSION, config: config.clone(), warnings, cases: rows, pass })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CtmpCase {
    pub result: ResponseReport,
    pub plan: PlanDump,
}

/// Builds the guaranteeing response to `spec` for every eps and verifies it
/// by exact enumeration.
pub fn cmd_ctmp(config: &ExperimentConfig, spec: &MixedStrategySpec) -> Result<Report<CtmpCase>> {
    let r = require_r(config)?;
    if config.mode != Mode::Exact {
        return Err(Error::Usage("ctmp evaluates by exact enumeration only".into()));
    }
    let (eps, warnings) = prepare_eps(&config.eps, &BigRational::one())?;
    let opponent = build_mixed(spec)?;
    let cases = eps
        .iter()
        .map(|e| {
            let built = build_response(&opponent, e, r)?;
            Ok(CtmpCase { result: verify_built(&opponent, &built)?, plan: built.plan().dump() })
        })
        .collect::<Result<Vec<_>>>()?;
    let pass = cases.iter().all(|c| c.result.pass);
    Ok(Report { version: VERSION, config: config.clone(), warnings, cases, pass })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteResult {
    pub name: String,
    pub passed: bool,
    pub checked: usize,
    pub detail: String,
}

fn suite(name: &str, passed: bool, checked: usize, detail: impl Into<String>) -> SuiteResult {
    SuiteResult { name: name.into(), passed, checked, detail: detail.into() }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct VerifyOptions {
    /// Swap in responders that read unrevealed play; the affected suites
    /// must then fail.
    pub inject_cheater: bool,
    pub samples: usize,
}

fn agreement_suite(seed: u64, pairs: usize) -> Result<SuiteResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..pairs {
        let f = random_section(&mut rng, 24);
        let g = random_section(&mut rng, 24);
        let exact = agreement_measure(&f, &g)?.to_f64();
        worst = worst.max((exact - sampled_agreement(&f, &g, 100_000)).abs());
    }
    Ok(suite("agreement-oracle", worst <= 2e-3, pairs, format!("max deviation {worst:.3e} against 1e5 midpoints")))
}

fn discount_suite(seed: u64, cases: usize) -> Result<SuiteResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let h = TimePoint::integer(rng.gen_range(1..=8));
        let u = random_control(&mut rng, &h, 16);
        let v = random_control(&mut rng, &h, 16);
        let r = rng.gen_range(0.2..3.0);
        let exact = discounted_integral(u.path(), v.path(), r, |a, b| a == b)?;
        let reference = quadrature_discounted(u.path(), v.path(), r, |a, b| a == b);
        worst = worst.max((exact - reference).abs());
    }
    Ok(suite("discount-oracle", worst <= 1e-9, cases, format!("max deviation {worst:.3e} against quadrature")))
}

fn catalog_strategies() -> Result<Vec<(Player, String, DelayStrategy)>> {
    let mut out = Vec::new();
    for player in [Player::Aqua, Player::Bard] {
        for spec in reference_catalog(player) {
            for (i, (_, s)) in build_mixed(&spec)?.atoms().iter().enumerate() {
                out.push((player, format!("{player}/{}#{i}", spec.label), s.clone()));
            }
        }
    }
    Ok(out)
}

fn nonanticipation_suite(options: &VerifyOptions, seed: u64) -> Result<SuiteResult> {
    let mut strategies: Vec<(String, DelayStrategy)> =
        catalog_strategies()?.into_iter().map(|(_, name, s)| (name, s)).collect();
    let target = build_mixed(&reference_catalog(Player::Aqua)[1])?;
    let response = build_response(&target, &BigRational::new(BigInt::one(), BigInt::from(5)), 1.0)?;
    strategies.push(("bard/best-response".into(), response.into_strategy()));
    if options.inject_cheater {
        let grid = strategies[0].1.grid().clone();
        strategies.push(("peeking".into(), DelayStrategy::new("peeking", grid, std::sync::Arc::new(Peeking))));
    }
    let mut checked = 0;
    for (i, (name, s)) in strategies.iter().enumerate() {
        let verdict = check_nonanticipativity(s, options.samples, seed.wrapping_add(i as u64))?;
        if !verdict.passed() {
            return Ok(suite("non-anticipativity", false, checked, format!("{name} reads play it has not observed")));
        }
        checked += options.samples;
    }
    Ok(suite("non-anticipativity", true, checked, format!("{} strategies", strategies.len())))
}

fn flow_suite(options: &VerifyOptions, seed: u64) -> Result<SuiteResult> {
    let eps = BigRational::new(BigInt::one(), BigInt::from(5));
    let models = [generate_dyadic_uniform(3, seed)?, generate_piecewise(8, 32, seed)?];
    let mut comparisons = 0;
    for model in &models {
        let verdict = if options.inject_cheater {
            enforce_information_flow(|h: &StepFunction| PeekingGuess { hidden: h.clone() }, model, &eps, 32, seed)?
        } else {
            enforce_information_flow(|_: &StepFunction| AlphaEpsilon::new(), model, &eps, 32, seed)?
        };
        match verdict {
            FlowVerdict::Pass { comparisons: c } => comparisons += c,
            FlowVerdict::Fail(v) => {
                return Ok(suite(
                    "information-flow",
                    false,
                    comparisons,
                    format!("{}: round {} depends on unrevealed data", model.label(), v.round),
                ))
            }
        }
    }
    Ok(suite("information-flow", true, comparisons, "α_ε commits only on revealed windows"))
}

fn play_suites(seed: u64) -> Result<Vec<SuiteResult>> {
    let aqua: Vec<MixedStrategy> = reference_catalog(Player::Aqua).iter().map(build_mixed).collect::<Result<_>>()?;
    let bard: Vec<MixedStrategy> = reference_catalog(Player::Bard).iter().map(build_mixed).collect::<Result<_>>()?;
    let mut worst_gap: f64 = 0.0;
    let mut gap_ok = true;
    let mut pairs = 0;
    for r in [0.5, 1.0] {
        let h = truncation_horizon(r, 0.0)?;
        for a in &aqua {
            for b in &bard {
                let report = expected_payoff(a, b, r, &h)?;
                let gap = report.constant_sum_gap();
                gap_ok &= gap <= report.tail_bound + 1e-12;
                worst_gap = worst_gap.max(gap);
                pairs += 1;
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let horizon = TimePoint::integer(6);
    let (mut seeds_ok, mut fixed_ok, mut seed_checks) = (true, true, 0);
    for (a, b) in aqua.iter().zip(bard.iter().rev()) {
        for (_, sa) in a.atoms() {
            for (_, sb) in b.atoms() {
                let reference = construct_play(sa, sb, &horizon)?;
                fixed_ok &= verify_fixed_point(sa, sb, &reference)?.is_none();
                for _ in 0..20 {
                    let seed_a = random_control(&mut rng, &horizon, 12);
                    let seed_b = random_control(&mut rng, &horizon, 12);
                    seeds_ok &= construct_play_seeded(sa, sb, &horizon, &seed_a, &seed_b)? == reference;
                    seed_checks += 1;
                }
            }
        }
    }
    Ok(vec![
        suite("constant-sum", gap_ok, pairs, format!("max gap {worst_gap:.3e}")),
        suite("seed-independence", seeds_ok, seed_checks, "plays compared across random seed pairs"),
        suite("fixed-point", fixed_ok, seed_checks / 20, "re-invoked responders reproduce each play"),
    ])
}

/// Runs every invariant suite; the report passes iff all suites pass.
pub fn cmd_verify(config: &ExperimentConfig, options: &VerifyOptions) -> Result<Report<SuiteResult>> {
    let samples = if options.samples == 0 { 200 } else { options.samples };
    let options = VerifyOptions { samples, ..*options };
    let seed = config.seed;
    let mut cases = vec![
        agreement_suite(seed, 300)?,
        discount_suite(seed.wrapping_add(1), 300)?,
        nonanticipation_suite(&options, seed.wrapping_add(2))?,
        flow_suite(&options, seed.wrapping_add(3))?,
    ];
    cases.extend(play_suites(seed.wrapping_add(4))?);
    let pass = cases.iter().all(|c| c.passed);
    Ok(Report { version: VERSION, config: config.clone(), warnings: Vec::new(), cases, pass })
}

fn csv_string<I, R>(header: &[&str], rows: I) -> Result<String>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Usage(format!("csv: {e}"));
    w.write_record(header).map_err(io)?;
    for row in rows {
        w.write_record(row).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Usage(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

pub fn guess_csv(report: &Report<GuessCase>) -> Result<String> {
    csv_string(
        &["eps", "prob_good", "expected_payoff"],
        report.cases.iter().map(|c| {
            let prob_good = match c {
                GuessCase::Exact(r) => &r.prob_good,
                GuessCase::MonteCarlo(m) => &m.prob_good.estimate,
            };
            vec![format_rational(c.eps()), format_rational(prob_good), format_rational(c.payoff())]
        }),
    )
}

pub fn sweep_csv(report: &Report<SweepRow>) -> Result<String> {
    csv_string(
        &["eps", "expected_payoff", "one_minus_3eps"],
        report.cases.iter().map(|r| {
            vec![format_rational(&r.eps), format_rational(&r.expected_payoff), format_rational(&r.one_minus_3eps)]
        }),
    )
}

pub fn ctmp_csv(report: &Report<CtmpCase>) -> Result<String> {
    csv_string(
        &["eps", "r", "gamma", "tail_loss", "bad_mass", "bad_loss", "guessing_loss", "pass"],
        report.cases.iter().map(|c| {
            let x = &c.result;
            vec![
                format_rational(&x.eps_target),
                x.r.to_string(),
                x.gamma.to_string(),
                x.loss.tail_loss.to_string(),
                x.loss.bad_mass.to_string(),
                x.loss.bad_loss.to_string(),
                x.loss.guessing_loss.to_string(),
                x.pass.to_string(),
            ]
        }),
    )
}

pub fn verify_csv(report: &Report<SuiteResult>) -> Result<String> {
    csv_string(
        &["suite", "passed", "checked"],
        report.cases.iter().map(|s| vec![s.name.clone(), s.passed.to_string(), s.checked.to_string()]),
    )
}

/// Writes `<stem>.json`, `<stem>.csv` and `<stem>.meta.json` under `dir` as
/// selected by `format`; returns the written paths.
pub fn write_outputs<T: Serialize>(
    dir: &Path,
    stem: &str,
    report: &T,
    csv: &str,
    meta: &Meta,
    format: Format,
) -> Result<Vec<PathBuf>> {
    let io = |p: &Path, e: std::io::Error| Error::Usage(format!("cannot write {}: {e}", p.display()));
    fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    let mut written = Vec::new();
    let mut put = |name: String, body: String| -> Result<()> {
        let path = dir.join(name);
        fs::write(&path, body).map_err(|e| io(&path, e))?;
        written.push(path);
        Ok(())
    };
    let json = |v: &dyn erased::Json| v.pretty();
    if matches!(format, Format::Json | Format::Both) {
        put(format!("{stem}.json"), json(&erased::Wrap(report)))?;
    }
    if matches!(format, Format::Csv | Format::Both) {
        put(format!("{stem}.csv"), csv.to_string())?;
    }
    put(format!("{stem}.meta.json"), json(&erased::Wrap(meta)))?;
    Ok(written)
}

mod erased {
    use serde::Serialize;

    pub trait Json {
        fn pretty(&self) -> String;
    }

    pub struct Wrap<'a, T: ?Sized>(pub &'a T);

    impl<T: Serialize + ?Sized> Json for Wrap<'_, T> {
        fn pretty(&self) -> String {
            let mut s = serde_json::to_string_pretty(self.0).expect("reports serialize");
            s.push('\n');
            s
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interval_fn::time::ratio;
    use crate::random_function::{constant_sections, single_constant};
    use crate::interval_fn::Action;

    fn config(command: Command, eps: &str) -> ExperimentConfig {
        ExperimentConfig { eps: parse_eps_list(eps).unwrap(), ..ExperimentConfig::new(command) }
    }

    #[test]
    fn eps_parsing_and_dedup() {
        assert_eq!(parse_eps("0.05").unwrap(), ratio(1, 20));
        assert_eq!(parse_eps("1/5").unwrap(), ratio(1, 5));
        assert_eq!(parse_eps(".5").unwrap(), ratio(1, 2));
        assert!(matches!(parse_eps("0.x"), Err(Error::Parse(_))));
        let (eps, warnings) = prepare_eps(&parse_eps_list("0.2,1/5,0.1").unwrap(), &half()).unwrap();
        assert_eq!(eps, vec![ratio(1, 5), ratio(1, 10)]);
        assert_eq!(warnings.len(), 1);
        assert!(matches!(prepare_eps(&[], &half()), Err(Error::Usage(_))));
        assert!(prepare_eps(&[ratio(1, 2)], &half()).is_err());
    }

    #[test]
    fn guess_command_examples() {
        let model = generate_dyadic_uniform(3, 0).unwrap();
        let report = cmd_guess(&config(Command::Guess, "0.2"), &model).unwrap();
        assert!(report.pass);
        let csv = guess_csv(&report).unwrap();
        let GuessCase::Exact(r) = &report.cases[0] else { panic!("exact mode") };
        assert_eq!(
            csv.lines().nth(1).unwrap(),
            format!("1/5,{},{}", format_rational(&r.prob_good), format_rational(&r.expected_payoff))
        );
        let report = cmd_guess(&config(Command::Guess, "0.2,0.1,0.05"), &constant_sections()).unwrap();
        for c in &report.cases {
            assert!(*c.payoff() >= BigRational::one() - c.eps());
        }
        assert!(matches!(cmd_guess(&config(Command::Guess, ""), &model), Err(Error::Usage(_))));
    }

    #[test]
    fn monte_carlo_guess_reports_radius() {
        let model = generate_dyadic_uniform(3, 0).unwrap();
        let mut c = config(Command::Guess, "0.2");
        c.mode = Mode::Mc { samples: 400 };
        c.seed = 9;
        let report = cmd_guess(&c, &model).unwrap();
        let GuessCase::MonteCarlo(m) = &report.cases[0] else { panic!("mc mode") };
        assert!((m.expected_payoff.radius - hoeffding_radius(400, 0.95)).abs() < 1e-15);
        let exact = run_guessing_game(&model, &ratio(1, 5)).unwrap();
        assert!((to_f64(&m.expected_payoff.estimate) - to_f64(&exact.expected_payoff)).abs() <= m.expected_payoff.radius);
        assert_eq!(report, cmd_guess(&c, &model).unwrap());
    }

    #[test]
    fn sweep_command_examples() {
        let model = generate_dyadic_uniform(3, 0).unwrap();
        let report = cmd_sweep(&config(Command::Sweep, "0.05,0.2,0.1,0.02,0.1"), &model).unwrap();
        assert!(report.pass);
        assert_eq!(report.warnings.len(), 1);
        assert_eq!(report.cases.iter().map(|r| r.eps.clone()).collect::<Vec<_>>(), vec![ratio(1, 5), ratio(1, 10), ratio(1, 20), ratio(1, 50)]);
        let constant = single_constant(Action::A);
        let report = cmd_sweep(&config(Command::Sweep, "0.2,0.1,0.05"), &constant).unwrap();
        assert!(report.cases.iter().all(|r| r.expected_payoff >= BigRational::one() - &r.eps));
        assert!(cmd_sweep(&config(Command::Sweep, "0.2,0.1"), &constant).is_err());
    }

    #[test]
    fn ctmp_command_examples() {
        let spec = reference_catalog(Player::Aqua)[0].clone();
        let mut c = config(Command::Ctmp, "0.2");
        c.r = Some(1.0);
        let report = cmd_ctmp(&c, &spec).unwrap();
        assert!(report.pass);
        assert!(ctmp_csv(&report).unwrap().lines().nth(1).unwrap().ends_with(",true"));
        c.r = Some(0.0);
        assert!(matches!(cmd_ctmp(&c, &spec), Err(Error::Usage(_))));
        let mut bad = spec;
        bad.atoms[0].responder.name = "oracle-peeker".into();
        c.r = Some(1.0);
        assert!(matches!(cmd_ctmp(&c, &bad), Err(Error::Config(_))));
    }

    #[test]
    fn parse_errors_carry_positions() {
        match parse_model("{\"atoms\": [\n  {\"p\": 1}\n]}") {
            Err(Error::Parse(m)) => assert!(m.contains("line 2"), "{m}"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_strategy("{"), Err(Error::Parse(_))));
    }

    #[test]
    fn verify_passes_and_catches_cheaters() {
        let c = ExperimentConfig { seed: 5, ..ExperimentConfig::new(Command::Verify) };
        let honest = cmd_verify(&c, &VerifyOptions { inject_cheater: false, samples: 50 }).unwrap();
        assert!(honest.pass, "{:#?}", honest.cases);
        let cheat = cmd_verify(&c, &VerifyOptions { inject_cheater: true, samples: 50 }).unwrap();
        assert!(!cheat.pass);
        let failed: Vec<&str> = cheat.cases.iter().filter(|s| !s.passed).map(|s| s.name.as_str()).collect();
        assert_eq!(failed, vec!["non-anticipativity", "information-flow"]);
    }
}
