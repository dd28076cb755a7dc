use pfsense_web::{alpha_curve_json, case_names, completion_json, spectrum_json};
use serde_json::Value;

fn parse(s: Result<String, String>) -> Value {
    serde_json::from_str(&s.unwrap()).unwrap()
}

fn floats(v: &Value) -> Vec<f64> {
    v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()
}

#[test]
fn every_bundled_case_has_a_curve() {
    for name in case_names() {
        let v = parse(alpha_curve_json(&name, 40));
        let lo = floats(&v["alpha_min"]);
        assert_eq!(lo.len(), 40);
        assert!(lo.windows(2).all(|w| w[0] <= w[1]), "{name}");
        assert_eq!(v["report"]["case"], name.as_str());
    }
    assert!(alpha_curve_json("case3000", 10).is_err());
}

#[test]
fn spectrum_has_three_groups() {
    let v = parse(spectrum_json("case14", "pq"));
    assert_eq!(floats(&v["full"]["normalized"])[0], 1.0);
    assert_eq!(v["groups"].as_array().unwrap().len(), 2);
    assert!(spectrum_json("case14", "sideways").is_err());
}

#[test]
fn completion_beats_zero_fill() {
    let v = parse(completion_json("case14", 0.75, 1e-4, 0.0, 1));
    assert!(v["rel_error"].as_f64().unwrap() < v["baseline_error"].as_f64().unwrap());
    let trace = floats(&v["objective_trace"]);
    assert!(trace.windows(2).all(|w| w[1] <= w[0]));
    assert!(completion_json("case14", 1.5, 0.1, 0.0, 1).is_err());
}
