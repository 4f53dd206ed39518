//! Registered responders and the JSON format for mixed strategies built
//! from them. The registry is the extension point for new strategies.

use std::sync::Arc;

use num_rational::BigRational;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::grid::{Cell, Grid};
use super::strategy::{DelayStrategy, MixedStrategy, OpponentView, Player, Responder};
use crate::error::{Error, Result};
use crate::interval_fn::time::{format_rational, parse_rational, rational_string};
use crate::interval_fn::{Action, StepFunction, TimePoint};

/// Plays one symbol forever.
#[derive(Debug, Clone)]
pub struct ConstantPlay(pub Action);

impl Responder for ConstantPlay {
    fn respond(&self, cell: &Cell, _opponent: &OpponentView<'_>) -> Result<StepFunction> {
        StepFunction::constant(cell.len(), self.0)
    }
}

/// Repeats the opponent's last observed value `u(t_n-)` over the whole cell;
/// plays `initial` on the first cell.
#[derive(Debug, Clone)]
pub struct CopyLast {
    pub initial: Action,
}

impl Responder for CopyLast {
    fn respond(&self, cell: &Cell, opponent: &OpponentView<'_>) -> Result<StepFunction> {
        let value = if cell.start.is_zero() { self.initial } else { opponent.value_before(&cell.start)? };
        StepFunction::constant(cell.len(), value)
    }
}

/// Alternates between `first` and the other symbol from cell to cell,
/// ignoring the opponent.
#[derive(Debug, Clone)]
pub struct GridSwitcher {
    pub first: Action,
}

impl Responder for GridSwitcher {
    fn respond(&self, cell: &Cell, _opponent: &OpponentView<'_>) -> Result<StepFunction> {
        let value = if cell.index % 2 == 0 { self.first } else { self.first.flip() };
        StepFunction::constant(cell.len(), value)
    }
}

/// Holds the opponent's value at `t_n - delay` over cell `n`, and `initial`
/// while `t_n < delay`.
#[derive(Debug, Clone)]
pub struct DelayedCopier {
    pub delay: TimePoint,
    pub initial: Action,
}

impl Responder for DelayedCopier {
    fn respond(&self, cell: &Cell, opponent: &OpponentView<'_>) -> Result<StepFunction> {
        let value = match cell.start.checked_sub(&self.delay) {
            Some(at) => opponent.value_at(&at)?,
            None => self.initial,
        };
        StepFunction::constant(cell.len(), value)
    }
}

/// `first` on the first half of every cell and the other symbol on the
/// second half.
#[derive(Debug, Clone)]
pub struct AlternatingSegment {
    pub first: Action,
}

impl Responder for AlternatingSegment {
    fn respond(&self, cell: &Cell, _opponent: &OpponentView<'_>) -> Result<StepFunction> {
        let half = cell.len().scale(&BigRational::new(1.into(), 2.into()));
        StepFunction::from_lengths(&[(half.clone(), self.first), (half, self.first.flip())])
    }
}

/// Test fixture: copies the opponent's play on the current cell, which is
/// not yet observable.
#[derive(Debug, Clone)]
pub struct Peeking;

impl Responder for Peeking {
    fn respond(&self, cell: &Cell, opponent: &OpponentView<'_>) -> Result<StepFunction> {
        opponent.restrict(&cell.start, &cell.end)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResponderSpec {
    pub name: String,
    #[serde(default)]
    pub params: Value,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtomSpec {
    #[serde(with = "rational_string")]
    pub p: BigRational,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<Grid>,
    pub responder: ResponderSpec,
}

/// JSON description of a mixed strategy over catalog responders.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixedStrategySpec {
    pub player: Player,
    #[serde(default)]
    pub label: String,
    pub atoms: Vec<AtomSpec>,
}

/// Names accepted by [`build_strategy`].
pub const CATALOG: &[&str] = &[
    "constant",
    "copy-last",
    "grid-switcher",
    "delayed-copier",
    "alternating-segment",
    "alpha-eps-best-response",
];

fn action_param(params: &Value, key: &str, default: Action) -> Result<Action> {
    match params.get(key) {
        None | Some(Value::Null) => Ok(default),
        Some(Value::String(s)) => s.parse().map_err(|e: Error| Error::Config(e.to_string())),
        Some(other) => Err(Error::Config(format!("parameter {key:?} must be a symbol, got {other}"))),
    }
}

fn rational_param(params: &Value, key: &str) -> Result<BigRational> {
    match params.get(key) {
        Some(Value::String(s)) => parse_rational(s).map_err(|e| Error::Config(e.to_string())),
        Some(Value::Number(n)) if n.is_i64() => Ok(BigRational::from_integer(n.as_i64().expect("i64").into())),
        _ => Err(Error::Config(format!("missing rational parameter {key:?}"))),
    }
}

fn float_param(params: &Value, key: &str) -> Result<f64> {
    params
        .get(key)
        .and_then(Value::as_f64)
        .ok_or_else(|| Error::Config(format!("missing numeric parameter {key:?}")))
}

/// Builds a pure strategy from a catalog entry. All entries except the
/// best response need an explicit grid.
pub fn build_strategy(spec: &ResponderSpec, grid: Option<&Grid>, player: Player) -> Result<DelayStrategy> {
    let p = &spec.params;
    let name = spec.name.as_str();
    if name == "alpha-eps-best-response" {
        let opponent: MixedStrategySpec = serde_json::from_value(
            p.get("opponent").cloned().ok_or_else(|| Error::Config("missing parameter \"opponent\"".into()))?,
        )
        .map_err(|e| Error::Config(format!("opponent strategy: {e}")))?;
        if opponent.player != player.opponent() {
            return Err(Error::Config(format!("{player}'s best response needs a {} strategy", player.opponent())));
        }
        let opponent = build_mixed(&opponent)?;
        let eps = rational_param(p, "eps")?;
        let r = float_param(p, "r")?;
        return Ok(crate::best_response::build_response(&opponent, &eps, r)?.into_strategy());
    }
    let grid = grid.cloned().ok_or_else(|| Error::Config(format!("responder {name:?} needs a grid")))?;
    let responder: Arc<dyn Responder> = match name {
        "constant" => Arc::new(ConstantPlay(action_param(p, "action", Action::A)?)),
        "copy-last" => Arc::new(CopyLast { initial: action_param(p, "initial", Action::A)? }),
        "grid-switcher" => Arc::new(GridSwitcher { first: action_param(p, "first", Action::A)? }),
        "delayed-copier" => {
            let delay = TimePoint::new(rational_param(p, "delay")?)?;
            if delay.is_zero() {
                return Err(Error::Config("delayed-copier delay must be positive".into()));
            }
            Arc::new(DelayedCopier { delay, initial: action_param(p, "initial", Action::A)? })
        }
        "alternating-segment" => Arc::new(AlternatingSegment { first: action_param(p, "first", Action::A)? }),
        other => {
            return Err(Error::Config(format!(
                "unregistered responder {other:?}; known: {}",
                CATALOG.join(", ")
            )))
        }
    };
    Ok(DelayStrategy::new(name, grid, responder))
}

pub fn build_mixed(spec: &MixedStrategySpec) -> Result<MixedStrategy> {
    let atoms = spec
        .atoms
        .iter()
        .map(|a| Ok((a.p.clone(), build_strategy(&a.responder, a.grid.as_ref(), spec.player)?)))
        .collect::<Result<Vec<_>>>()?;
    MixedStrategy::new(spec.player, spec.label.clone(), atoms)
}

fn grid(prefix: &[&str], step: &str) -> Grid {
    let pts = prefix.iter().map(|s| s.parse().expect("literal")).collect();
    Grid::new(pts, step.parse().expect("literal")).expect("literal grid")
}

fn atom(p: &str, g: Grid, name: &str, params: Value) -> AtomSpec {
    AtomSpec {
        p: parse_rational(p).expect("literal"),
        grid: Some(g),
        responder: ResponderSpec { name: name.into(), params },
    }
}

/// The five reference mixed strategies used to exercise best responses:
/// pure constant, two-atom constant mixture, four-atom grid switcher with
/// distinct rational grids, delayed copier, and alternating segments.
pub fn reference_catalog(player: Player) -> Vec<MixedStrategySpec> {
    let spec = |label: &str, atoms: Vec<AtomSpec>| MixedStrategySpec { player, label: label.into(), atoms };
    vec![
        spec("pure-constant", vec![atom("1", grid(&["0"], "1"), "constant", json!({"action": "a"}))]),
        spec(
            "constant-mixture",
            vec![
                atom("1/2", grid(&["0"], "1"), "constant", json!({"action": "a"})),
                atom("1/2", grid(&["0"], "1"), "constant", json!({"action": "b"})),
            ],
        ),
        spec(
            "grid-switcher",
            vec![
                atom("1/4", grid(&["0"], "1/3"), "grid-switcher", json!({"first": "a"})),
                atom("1/4", grid(&["0", "1/5"], "2/5"), "grid-switcher", json!({"first": "b"})),
                atom("1/4", grid(&["0", "2/7", "5/7"], "3/7"), "grid-switcher", json!({"first": "a"})),
                atom("1/4", grid(&["0"], "5/8"), "grid-switcher", json!({"first": "b"})),
            ],
        ),
        spec(
            "delayed-copier",
            vec![
                atom("1/2", grid(&["0"], "1/2"), "delayed-copier", json!({"delay": "1/2", "initial": "a"})),
                atom("1/2", grid(&["0"], "1/2"), "delayed-copier", json!({"delay": "1/2", "initial": "b"})),
            ],
        ),
        spec(
            "alternating-segment",
            vec![
                atom("2/3", grid(&["0"], "1/2"), "alternating-segment", json!({"first": "a"})),
                atom("1/3", grid(&["0", "1/4"], "3/4"), "alternating-segment", json!({"first": "b"})),
            ],
        ),
    ]
}

/// Catalog entry for the constructed best response against `opponent`.
pub fn best_response_spec(player: Player, opponent: &MixedStrategySpec, eps: &BigRational, r: f64) -> MixedStrategySpec {
    MixedStrategySpec {
        player,
        label: format!("best response to {}", opponent.label),
        atoms: vec![AtomSpec {
            p: BigRational::from_integer(1.into()),
            grid: None,
            responder: ResponderSpec {
                name: "alpha-eps-best-response".into(),
                params: json!({"opponent": opponent, "eps": format_rational(eps), "r": r}),
            },
        }],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::play::construct_play;
    use crate::engine::strategy::Control;

    fn t(p: i64, q: i64) -> TimePoint {
        TimePoint::frac(p, q)
    }

    fn strat(name: &str, g: Grid, params: Value) -> DelayStrategy {
        build_strategy(&ResponderSpec { name: name.into(), params }, Some(&g), Player::Aqua).unwrap()
    }

    #[test]
    fn unknown_names_are_configuration_errors() {
        let spec = ResponderSpec { name: "nope".into(), params: Value::Null };
        let g = Grid::uniform(t(1, 1)).unwrap();
        assert!(matches!(build_strategy(&spec, Some(&g), Player::Aqua), Err(Error::Config(_))));
        let spec = ResponderSpec { name: "constant".into(), params: Value::Null };
        assert!(matches!(build_strategy(&spec, None, Player::Aqua), Err(Error::Config(_))));
        let spec = ResponderSpec { name: "constant".into(), params: json!({"action": 3}) };
        assert!(matches!(build_strategy(&spec, Some(&g), Player::Aqua), Err(Error::Config(_))));
    }

    #[test]
    fn constant_pair_play() {
        let g = Grid::uniform(t(1, 1)).unwrap();
        let a = strat("constant", g.clone(), json!({"action": "a"}));
        let play = construct_play(&a, &a, &t(5, 1)).unwrap();
        assert_eq!(play.aqua, StepFunction::constant(t(5, 1), Action::A).unwrap());
        assert_eq!(play.bard, StepFunction::constant(t(5, 1), Action::A).unwrap());
    }

    #[test]
    fn copy_last_against_constant() {
        let g = Grid::uniform(t(1, 1)).unwrap();
        let aqua = strat("constant", g.clone(), json!({"action": "a"}));
        let bard = strat("copy-last", g, json!({"initial": "b"}));
        let play = construct_play(&aqua, &bard, &t(4, 1)).unwrap();
        // Round 0 carries the arbitrary initial value, then the copy of a.
        let expected = StepFunction::from_lengths(&[(t(1, 1), Action::B), (t(3, 1), Action::A)]).unwrap();
        assert_eq!(play.bard, expected);
    }

    #[test]
    fn delayed_copier_holds_lagged_value() {
        let bard = strat("grid-switcher", Grid::uniform(t(1, 3)).unwrap(), json!({"first": "a"}));
        let aqua = strat("delayed-copier", Grid::uniform(t(1, 2)).unwrap(), json!({"delay": "1/2", "initial": "b"}));
        let play = construct_play(&aqua, &bard, &t(3, 1)).unwrap();
        for n in 0..6 {
            let start = t(n, 2);
            let expect = if n == 0 { Action::B } else { play.bard.eval(&t(n - 1, 2)).unwrap() };
            assert_eq!(play.aqua.restrict(&start, &t(n + 1, 2)).unwrap(), StepFunction::constant(t(1, 2), expect).unwrap());
        }
        let bad = ResponderSpec { name: "delayed-copier".into(), params: json!({"delay": "0"}) };
        assert!(build_strategy(&bad, Some(&Grid::uniform(t(1, 2)).unwrap()), Player::Aqua).is_err());
    }

    #[test]
    fn alternating_and_switcher_shapes() {
        let alt = strat("alternating-segment", Grid::uniform(t(1, 2)).unwrap(), json!({"first": "a"}));
        let u = alt.play(&Control::constant(Action::A), &t(1, 1)).unwrap();
        assert_eq!(u.breaks(), &[t(0, 1), t(1, 4), t(1, 2), t(3, 4)]);
        let sw = strat("grid-switcher", Grid::uniform(t(1, 3)).unwrap(), json!({"first": "b"}));
        let u = sw.play(&Control::constant(Action::A), &t(1, 1)).unwrap();
        assert_eq!(u.values(), &[Action::B, Action::A, Action::B]);
    }

    #[test]
    fn reference_catalog_builds_and_round_trips() {
        for player in [Player::Aqua, Player::Bard] {
            let specs = reference_catalog(player);
            assert_eq!(specs.len(), 5);
            for spec in specs {
                let text = serde_json::to_string(&spec).unwrap();
                let back: MixedStrategySpec = serde_json::from_str(&text).unwrap();
                assert_eq!(back, spec);
                let mixed = build_mixed(&spec).unwrap();
                assert_eq!(mixed.player, player);
            }
        }
        let grids: Vec<Grid> = reference_catalog(Player::Aqua)[2].atoms.iter().map(|a| a.grid.clone().unwrap()).collect();
        for i in 0..grids.len() {
            for j in i + 1..grids.len() {
                assert_ne!(grids[i], grids[j]);
            }
        }
    }
}
