//! Browser bindings: one guessing game, an eps sweep, and a best-response
//! play against a catalog strategy. Every call returns a JSON string.

use serde::Serialize;
use serde_json::json;
use wasm_bindgen::prelude::*;

use ctgame::best_response::{build_response, verify_built};
use ctgame::engine::catalog::{build_mixed, reference_catalog};
use ctgame::engine::play::construct_play;
use ctgame::engine::strategy::Player;
use ctgame::guesser::{play_protocol, run_guessing_game, AlphaEpsilon, GuessSchedule};
use ctgame::harness::{cmd_sweep, parse_eps, parse_eps_list, Command, ExperimentConfig};
use ctgame::interval_fn::time::format_rational;
use ctgame::interval_fn::{StepFunction, TimePoint};
use ctgame::random_function::{generate_dyadic_uniform, n_star};

/// Time span shown for continuous-time plays.
const PLAY_WINDOW: i64 = 6;

#[derive(Serialize)]
struct Piece {
    start: f64,
    end: f64,
    value: String,
}

fn pieces(f: &StepFunction) -> Vec<Piece> {
    let ends = f.breaks().iter().skip(1).chain(std::iter::once(f.end()));
    f.breaks()
        .iter()
        .zip(ends)
        .zip(f.values())
        .map(|((s, e), v)| Piece { start: s.to_f64(), end: e.to_f64(), value: v.to_string() })
        .collect()
}

fn text<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

/// α_ε against atom `atom` of the dyadic-uniform model at level `n`.
pub fn guess_game_json(n: u32, eps: &str, seed: u64, atom: usize) -> Result<String, String> {
    let model = generate_dyadic_uniform(n, seed).map_err(text)?;
    let eps = parse_eps(eps).map_err(text)?;
    let report = run_guessing_game(&model, &eps).map_err(text)?;
    let schedule = GuessSchedule::build(n_star(&model, &eps).map_err(text)?, &eps).map_err(text)?;
    let section = &model.atoms()[atom % model.len()].section;
    let game = play_protocol(&AlphaEpsilon::new(), &schedule, section).map_err(text)?;
    Ok(json!({
        "atoms": model.len(),
        "n_star": report.n_star,
        "schedule": schedule.points().iter().map(TimePoint::to_f64).collect::<Vec<_>>(),
        "section": pieces(section),
        "guess": pieces(&game.guess),
        "agreement": format_rational(&game.agreement),
        "prob_good": format_rational(&report.prob_good),
        "expected_payoff": format_rational(&report.expected_payoff),
        "prop1": report.bounds.prop1,
    })
    .to_string())
}

/// Sweep rows for a comma-separated eps list on the level-`n` dyadic model.
pub fn sweep_json(n: u32, eps: &str) -> Result<String, String> {
    let model = generate_dyadic_uniform(n, 0).map_err(text)?;
    let config = ExperimentConfig { eps: parse_eps_list(eps).map_err(text)?, ..ExperimentConfig::new(Command::Sweep) };
    let report = cmd_sweep(&config, &model).map_err(text)?;
    serde_json::to_string(&report).map_err(text)
}

/// Play of atom `atom` of catalog strategy `name` (Aqua) against Bard's
/// constructed response, with the verified payoff.
pub fn best_response_json(name: &str, eps: &str, r: f64, atom: usize) -> Result<String, String> {
    let spec = reference_catalog(Player::Aqua)
        .into_iter()
        .find(|s| s.label == name)
        .ok_or_else(|| format!("no catalog strategy named {name:?}"))?;
    let opponent = build_mixed(&spec).map_err(text)?;
    let eps = parse_eps(eps).map_err(text)?;
    let built = build_response(&opponent, &eps, r).map_err(text)?;
    let report = verify_built(&opponent, &built).map_err(text)?;
    let (_, aqua) = &opponent.atoms()[atom % opponent.atoms().len()];
    let play = construct_play(aqua, built.strategy(), &TimePoint::integer(PLAY_WINDOW)).map_err(text)?;
    Ok(json!({
        "window": PLAY_WINDOW,
        "aqua": pieces(&play.aqua),
        "bard": pieces(&play.bard),
        "T": report.t,
        "n_hat": report.n_hat,
        "gamma": report.gamma,
        "loss": report.loss,
        "pass": report.pass,
    })
    .to_string())
}

#[wasm_bindgen]
pub fn guess_game(n: u32, eps: &str, seed: u64, atom: usize) -> Result<String, JsValue> {
    guess_game_json(n, eps, seed, atom).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn sweep(n: u32, eps: &str) -> Result<String, JsValue> {
    sweep_json(n, eps).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn best_response(name: &str, eps: &str, r: f64, atom: usize) -> Result<String, JsValue> {
    best_response_json(name, eps, r, atom).map_err(|e| JsValue::from_str(&e))
}
