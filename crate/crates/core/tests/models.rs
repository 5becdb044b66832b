mod common;

use common::{names, random_tree_ensemble, uniform_rows};
use serde_json::Value;
use stratshap::{load_model, Dataset, Model};

/// Walks the serialized JSON directly, without the crate's tree types.
fn walk_json(doc: &Value, x: &[f64]) -> f64 {
    let mut total = doc["base_score"].as_f64().unwrap();
    for tree in doc["trees"].as_array().unwrap() {
        let nodes = tree["nodes"].as_array().unwrap();
        let mut node = &nodes[0];
        while node.get("leaf").is_none() {
            let f = node["feature"].as_u64().unwrap() as usize;
            let t = node["threshold"].as_f64().unwrap();
            let next = if x[f] <= t { &node["left"] } else { &node["right"] };
            node = &nodes[next.as_u64().unwrap() as usize];
        }
        total += node["leaf"].as_f64().unwrap();
    }
    total
}

#[test]
fn batch_prediction_matches_a_naive_json_walk() {
    let model = random_tree_ensemble(6, 25, 4, 1);
    let doc: Value = serde_json::from_str(&model.to_json_string()).unwrap();
    let data = Dataset::new(names(6), uniform_rows(100, 6, 2)).unwrap();
    let batch = model.predict_batch(&data).unwrap();
    for (i, row) in data.rows().enumerate() {
        let naive = walk_json(&doc, row);
        assert!((batch[i] - naive).abs() < 1e-12);
        assert_eq!(model.predict(row).unwrap().to_bits(), batch[i].to_bits());
    }
}

#[test]
fn save_and_load_preserve_predictions_bit_for_bit() {
    let dir = tempfile::tempdir().unwrap();
    let data = Dataset::new(names(4), uniform_rows(200, 4, 3)).unwrap();
    let models = [
        random_tree_ensemble(4, 10, 3, 4),
        Model::Linear { intercept: 0.1, coefficients: vec![1.0 / 3.0, -2.0, 1e-17, 7.5] },
    ];
    for (k, model) in models.iter().enumerate() {
        let path = dir.path().join(format!("m{k}.json"));
        model.save(&path).unwrap();
        let back = load_model(&path).unwrap();
        assert_eq!(&back, model);
        let a = model.predict_batch(&data).unwrap();
        let b = back.predict_batch(&data).unwrap();
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
}

#[test]
fn trees_are_piecewise_constant_between_thresholds() {
    let model = random_tree_ensemble(3, 15, 3, 5);
    let Model::TreeEnsemble(ens) = &model else { unreachable!() };
    let doc: Value = serde_json::to_value(ens).unwrap();
    // Collect the thresholds used on feature 0.
    let mut cuts: Vec<f64> = doc["trees"]
        .as_array()
        .unwrap()
        .iter()
        .flat_map(|t| t["nodes"].as_array().unwrap().clone())
        .filter(|n| n.get("feature").and_then(Value::as_u64) == Some(0))
        .map(|n| n["threshold"].as_f64().unwrap())
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.push(10.0);
    let mut lo = -10.0;
    for hi in cuts {
        // Points strictly inside (lo, hi] fall on the same side of every cut.
        let inside: Vec<f64> = (1..=5).map(|k| lo + (hi - lo) * k as f64 / 5.0).collect();
        let values: Vec<f64> = inside.iter().map(|v| model.predict(&[*v, 0.2, -0.4]).unwrap()).collect();
        assert!(values.iter().all(|y| y.to_bits() == values[0].to_bits()), "({lo}, {hi}]");
        lo = hi;
    }
}

#[test]
fn malformed_documents_are_rejected_with_a_path() {
    let bad = r#"{"kind":"tree_ensemble","base_score":0,"trees":[{"nodes":[{"feature":0,"threshold":"x","left":1,"right":2}]}]}"#;
    let err = Model::from_json_str(bad).unwrap_err().to_string();
    assert!(err.contains("trees[0].nodes[0]"), "{err}");
}
