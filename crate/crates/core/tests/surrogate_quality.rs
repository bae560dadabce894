//! Surrogate accuracy on held-out nominal data and warm-start behaviour.
//! These tests train real models and take a few seconds each.

use tanklab_core::env::EnvConfig;
use tanklab_core::nn::{train_regressor, TrainConfig};
use tanklab_core::sim::TANK_COUNT;
use tanklab_core::surrogate::{fit_surrogate, generate_dataset, SurrogateModel};

#[test]
fn surrogate_meets_r2_gate_on_nominal_dataset() {
    let config = EnvConfig::nominal();
    let dataset = generate_dataset(&config, 50, 0).unwrap();
    assert!(dataset.len() >= 2950, "only {} rows from 50 episodes", dataset.len());
    let model = fit_surrogate(&dataset, None, 0).unwrap();
    assert!(model.meta.holdout_r2 >= 0.99, "holdout R² = {}", model.meta.holdout_r2);
}

#[test]
fn one_step_predictions_track_the_simulator_on_heldout_rows() {
    let config = EnvConfig::nominal();
    let dataset = generate_dataset(&config, 50, 1).unwrap();
    let spec = SurrogateModel::spec();
    let train_config = TrainConfig { learning_rate: 1e-3, seed: 1, ..TrainConfig::default() };
    let (params, history) = train_regressor(dataset.data(), &spec, &train_config, None).unwrap();

    let mut squared = [0.0f64; TANK_COUNT];
    let mut per_row_max: Vec<f64> = Vec::new();
    for &row in &history.val_indices {
        let prediction = params.output(dataset.data().input(row));
        let mut row_max = 0.0f64;
        for i in 0..TANK_COUNT {
            let err = (prediction[i].clamp(0.0, 1.0) - dataset.data().target(row)[i]).abs();
            squared[i] += err * err;
            row_max = row_max.max(err);
        }
        per_row_max.push(row_max);
    }
    let n = history.val_indices.len() as f64;
    for (tank, sq) in squared.iter().enumerate() {
        let rmse = (sq / n).sqrt();
        assert!(rmse <= 0.02, "tank {} RMSE {rmse}", tank + 1);
    }

    // A typical held-out transition is predicted to well under 0.05 m.
    per_row_max.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = per_row_max[per_row_max.len() / 2];
    assert!(median <= 0.05, "median per-row max error {median}");
}

#[test]
fn warm_start_converges_in_fewer_epochs_than_cold_start() {
    let config = EnvConfig::nominal();
    let base_data = generate_dataset(&config, 20, 7).unwrap();
    let base = fit_surrogate(&base_data, None, 7).unwrap();

    let mut cold_epochs = Vec::new();
    let mut warm_epochs = Vec::new();
    for seed in 0..5u64 {
        let dataset = generate_dataset(&config, 10, 100 + seed).unwrap();
        cold_epochs.push(fit_surrogate(&dataset, None, seed).unwrap().meta.epochs_trained);
        warm_epochs.push(fit_surrogate(&dataset, Some(&base), seed).unwrap().meta.epochs_trained);
    }
    cold_epochs.sort_unstable();
    warm_epochs.sort_unstable();
    assert!(
        warm_epochs[2] < cold_epochs[2],
        "median warm {} vs cold {}",
        warm_epochs[2],
        cold_epochs[2]
    );
}
