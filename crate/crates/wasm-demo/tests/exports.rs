use kp_wasm_demo::{diagram_view, diagrams, stability, sweep, ToyParams};
use serde_json::Value;

#[test]
fn diagrams_json_matches_the_native_view() {
    let s = diagrams(60, 120, 1.5, 1.0, 1.0, 7).unwrap();
    let v: Value = serde_json::from_str(&s).unwrap();
    let native = diagram_view(&ToyParams {
        n_nodes: 60,
        n_edges: 120,
        gap: 1.5,
        sd_pos: 1.0,
        sd_neg: 1.0,
        seed: 7,
    })
    .unwrap();
    assert_eq!(v["kp"].as_f64().unwrap(), native.kp);
    assert_eq!(v["positive"].as_array().unwrap().len(), native.positive.len());
    assert_eq!(native.positive.len(), 2 * 60);
}

#[test]
fn sweep_and_stability_return_rows() {
    let rows: Vec<Value> = serde_json::from_str(&sweep(40, 80, 1.0, 1.0, 3.0, 7, 1).unwrap()).unwrap();
    assert_eq!(rows.len(), 7);
    assert_eq!(rows[0]["gap"], 0.0);
    assert_eq!(rows[6]["gap"], 3.0);

    let r: Value = serde_json::from_str(&stability(2.0, 1.0, 1.0, 500, 0.0, 5, 2).unwrap()).unwrap();
    assert_eq!(r["trials"].as_array().unwrap().len(), 5);
    assert_eq!(r["violations"], 0);
}
