use ctgame_wasm_demo::{best_response_json, guess_game_json, sweep_json};
use serde_json::Value;

fn parse(s: String) -> Value {
    serde_json::from_str(&s).unwrap()
}

#[test]
fn guess_game_covers_unit_interval() {
    let v = parse(guess_game_json(3, "0.2", 0, 5).unwrap());
    assert_eq!(v["atoms"], 256);
    assert_eq!(v["prop1"], true);
    let guess = v["guess"].as_array().unwrap();
    assert_eq!(guess[0]["start"], 0.0);
    assert_eq!(guess.last().unwrap()["end"], 1.0);
}

#[test]
fn sweep_rejects_short_lists() {
    assert!(sweep_json(2, "0.2,0.1").is_err());
    let v = parse(sweep_json(2, "0.2,0.1,0.05").unwrap());
    assert_eq!(v["cases"].as_array().unwrap().len(), 3);
}

#[test]
fn best_response_play_passes() {
    let v = parse(best_response_json("grid-switcher", "0.2", 1.0, 2).unwrap());
    assert_eq!(v["pass"], true);
    assert!(v["gamma"].as_f64().unwrap() > 0.8);
    assert!(best_response_json("nope", "0.2", 1.0, 0).is_err());
}
