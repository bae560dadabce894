//! Mini-batch regression training with early stopping, k-fold
//! cross-validation, and hyperparameter grid search.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{
    adam_step, init_params, r2_score, Activation, AdamState, Dataset, MlpGrads, MlpParams, MlpSpec,
    NnError,
};

/// Knobs of one training run. Defaults: lr 1e-3, batch 200, 10% validation
/// holdout, patience 10 epochs, at most 500 epochs.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub batch_size: usize,
    pub validation_fraction: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            max_epochs: 500,
            patience: 10,
            batch_size: 200,
            validation_fraction: 0.1,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), NnError> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(NnError::InvalidConfig(format!("learning rate {}", self.learning_rate)));
        }
        if self.batch_size == 0 {
            return Err(NnError::InvalidConfig("batch size must be >= 1".into()));
        }
        if !(0.0 < self.validation_fraction && self.validation_fraction < 1.0) {
            return Err(NnError::InvalidConfig(format!(
                "validation fraction {} outside (0, 1)",
                self.validation_fraction
            )));
        }
        Ok(())
    }
}

/// Losses of one training epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

/// Outcome of a training run: per-epoch losses, the epoch whose parameters
/// were returned, and the validation rows that were held out.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainHistory {
    pub epochs: Vec<EpochStats>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub val_indices: Vec<usize>,
}

/// Trains an MSE regressor with mini-batch Adam and early stopping on a
/// held-out validation fraction. Returns the parameters with the best
/// validation loss seen. Starts from `init` when given, otherwise from a
/// fresh seeded initialization.
pub fn train_regressor(
    dataset: &Dataset,
    spec: &MlpSpec,
    config: &TrainConfig,
    init: Option<&MlpParams>,
) -> Result<(MlpParams, TrainHistory), NnError> {
    spec.validate()?;
    config.validate()?;
    if dataset.len() < 2 {
        return Err(NnError::DatasetTooSmall { rows: dataset.len(), min: 2 });
    }
    if dataset.input_dim() != spec.input_dim() || dataset.target_dim() != spec.output_dim() {
        return Err(NnError::InvalidDataset(format!(
            "dataset is {}x{} but spec wants {}x{}",
            dataset.input_dim(),
            dataset.target_dim(),
            spec.input_dim(),
            spec.output_dim()
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n = dataset.len();
    let mut indices: Vec<usize> = (0..n).collect();
    indices.shuffle(&mut rng);
    let val_count = ((n as f64 * config.validation_fraction).round() as usize).clamp(1, n - 1);
    let (val_indices, train_indices) = indices.split_at(val_count);
    let val_indices = val_indices.to_vec();
    let mut train_indices = train_indices.to_vec();

    let mut params = match init {
        Some(p) => p.clone(),
        None => init_params(spec, rng.random::<u64>())?,
    };
    let mut adam = AdamState::new(&params);
    let mut grads = MlpGrads::zeros_like(&params);

    let mut best_params = params.clone();
    let mut best_val_loss = mse_over(&params, dataset, &val_indices);
    let mut best_epoch = 0;
    let mut epochs_without_improvement = 0;
    let mut history = Vec::new();

    for epoch in 1..=config.max_epochs {
        train_indices.shuffle(&mut rng);
        let mut train_loss_sum = 0.0;
        let mut train_samples = 0usize;
        for batch in train_indices.chunks(config.batch_size) {
            grads.zero();
            let mut batch_loss = 0.0;
            for &row in batch {
                let cache = params.forward(dataset.input(row));
                let target = dataset.target(row);
                let scale = 2.0 / (batch.len() * target.len()) as f64;
                let d_out: Vec<f64> = cache
                    .output()
                    .iter()
                    .zip(target)
                    .map(|(o, t)| scale * (o - t))
                    .collect();
                batch_loss += cache
                    .output()
                    .iter()
                    .zip(target)
                    .map(|(o, t)| (o - t) * (o - t))
                    .sum::<f64>()
                    / target.len() as f64;
                params.backward(&cache, &d_out, &mut grads);
            }
            adam_step(&mut params, &grads, &mut adam, config.learning_rate);
            train_loss_sum += batch_loss;
            train_samples += batch.len();
        }

        let train_loss = train_loss_sum / train_samples.max(1) as f64;
        let val_loss = mse_over(&params, dataset, &val_indices);
        history.push(EpochStats { epoch, train_loss, val_loss });

        if val_loss < best_val_loss {
            best_val_loss = val_loss;
            best_params = params.clone();
            best_epoch = epoch;
            epochs_without_improvement = 0;
        } else {
            epochs_without_improvement += 1;
            if epochs_without_improvement >= config.patience {
                break;
            }
        }
    }

    Ok((
        best_params,
        TrainHistory { epochs: history, best_epoch, best_val_loss, val_indices },
    ))
}

/// Mean squared error (averaged over rows and outputs) on the given rows.
fn mse_over(params: &MlpParams, dataset: &Dataset, rows: &[usize]) -> f64 {
    let mut sum = 0.0;
    for &row in rows {
        let out = params.output(dataset.input(row));
        let target = dataset.target(row);
        sum += out.iter().zip(target).map(|(o, t)| (o - t) * (o - t)).sum::<f64>() / target.len() as f64;
    }
    sum / rows.len().max(1) as f64
}

/// Per-fold and averaged cross-validation scores.
#[derive(Debug, Clone, PartialEq)]
pub struct KfoldReport {
    /// Mean R² (across outputs) of each fold's held-out rows.
    pub fold_mean_r2: Vec<f64>,
    /// Mean of the fold means.
    pub mean_r2: f64,
}

/// k-fold cross-validation: deterministic shuffled fold assignment, one
/// training run per fold, mean held-out R² across folds.
pub fn kfold_cv(
    dataset: &Dataset,
    k: usize,
    spec: &MlpSpec,
    config: &TrainConfig,
) -> Result<KfoldReport, NnError> {
    if k < 2 {
        return Err(NnError::InvalidConfig(format!("k must be >= 2, got {k}")));
    }
    if dataset.len() < k {
        return Err(NnError::DatasetTooSmall { rows: dataset.len(), min: k });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut indices: Vec<usize> = (0..dataset.len()).collect();
    indices.shuffle(&mut rng);

    let mut fold_mean_r2 = Vec::with_capacity(k);
    for fold in 0..k {
        // Fold f takes rows f, f+k, f+2k, ... of the shuffled order.
        let holdout: Vec<usize> = indices.iter().skip(fold).step_by(k).copied().collect();
        let train_rows: Vec<usize> = indices
            .iter()
            .enumerate()
            .filter(|(i, _)| i % k != fold)
            .map(|(_, r)| *r)
            .collect();

        let fold_config = TrainConfig { seed: rng.random::<u64>(), ..config.clone() };
        let train_set = dataset.subset(&train_rows);
        let (params, _) = train_regressor(&train_set, spec, &fold_config, None)?;

        let predictions: Vec<Vec<f64>> = holdout.iter().map(|&r| params.output(dataset.input(r))).collect();
        let targets: Vec<Vec<f64>> = holdout.iter().map(|&r| dataset.target(r).to_vec()).collect();
        // A single-row holdout (leave-one-out) has no target variance; the
        // zero-variance convention scores it 0 rather than erroring.
        let fold_r2 = if holdout.len() >= 2 { r2_score(&predictions, &targets)?.mean } else { 0.0 };
        fold_mean_r2.push(fold_r2);
    }

    let mean_r2 = fold_mean_r2.iter().sum::<f64>() / k as f64;
    Ok(KfoldReport { fold_mean_r2, mean_r2 })
}

/// One cell of a hyperparameter grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridCell {
    pub hidden_layers: Vec<usize>,
    pub activation: Activation,
    pub learning_rate: f64,
}

/// A grid cell's cross-validated score, ranked.
#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    /// Position of the cell in the input grid.
    pub grid_index: usize,
    pub cell: GridCell,
    pub report: KfoldReport,
}

/// Evaluates every grid cell by k-fold cross-validation on shared folds
/// (same seed per cell) and ranks cells by mean R², grid order breaking
/// ties.
pub fn grid_search(
    dataset: &Dataset,
    grid: &[GridCell],
    k: usize,
    config: &TrainConfig,
) -> Result<Vec<GridResult>, NnError> {
    if grid.is_empty() {
        return Err(NnError::InvalidConfig("empty grid".into()));
    }
    let mut results = Vec::with_capacity(grid.len());
    for (grid_index, cell) in grid.iter().enumerate() {
        let spec = MlpSpec::regressor(
            dataset.input_dim(),
            &cell.hidden_layers,
            dataset.target_dim(),
            cell.activation,
        );
        let cell_config = TrainConfig { learning_rate: cell.learning_rate, ..config.clone() };
        let report = kfold_cv(dataset, k, &spec, &cell_config)?;
        results.push(GridResult { grid_index, cell: cell.clone(), report });
    }
    // Stable sort keeps grid order among exact ties.
    results.sort_by(|a, b| b.report.mean_r2.partial_cmp(&a.report.mean_r2).unwrap());
    Ok(results)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// y = 2x + 1 with a deterministic input sweep.
    fn linear_dataset(n: usize) -> Dataset {
        let inputs: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64 / n as f64]).collect();
        let targets: Vec<Vec<f64>> = inputs.iter().map(|x| vec![2.0 * x[0] + 1.0]).collect();
        Dataset::new(inputs, targets).unwrap()
    }

    #[test]
    fn learns_exactly_representable_linear_target() {
        let dataset = linear_dataset(1000);
        let spec = MlpSpec::regressor(1, &[], 1, Activation::Relu);
        let config = TrainConfig { learning_rate: 1e-2, max_epochs: 400, ..TrainConfig::default() };
        let (params, history) = train_regressor(&dataset, &spec, &config, None).unwrap();

        let predictions: Vec<Vec<f64>> =
            history.val_indices.iter().map(|&r| params.output(dataset.input(r))).collect();
        let targets: Vec<Vec<f64>> =
            history.val_indices.iter().map(|&r| dataset.target(r).to_vec()).collect();
        let score = r2_score(&predictions, &targets).unwrap();
        assert!(score.mean > 0.999, "validation R² = {}", score.mean);
    }

    #[test]
    fn zero_epochs_returns_initial_params() {
        let dataset = linear_dataset(50);
        let spec = MlpSpec::regressor(1, &[4], 1, Activation::Tanh);
        let config = TrainConfig { max_epochs: 0, seed: 3, ..TrainConfig::default() };
        let init = init_params(&spec, 123).unwrap();
        let (params, history) = train_regressor(&dataset, &spec, &config, Some(&init)).unwrap();
        assert_eq!(params, init);
        assert!(history.epochs.is_empty());
        assert_eq!(history.best_epoch, 0);
    }

    #[test]
    fn same_seed_gives_identical_history() {
        let dataset = linear_dataset(120);
        let spec = MlpSpec::regressor(1, &[8], 1, Activation::Tanh);
        let config = TrainConfig { max_epochs: 20, seed: 9, ..TrainConfig::default() };
        let (params_a, hist_a) = train_regressor(&dataset, &spec, &config, None).unwrap();
        let (params_b, hist_b) = train_regressor(&dataset, &spec, &config, None).unwrap();
        assert_eq!(params_a, params_b);
        assert_eq!(hist_a, hist_b);
    }

    #[test]
    fn best_so_far_validation_loss_is_non_increasing() {
        let dataset = linear_dataset(200);
        let spec = MlpSpec::regressor(1, &[6], 1, Activation::Tanh);
        let config = TrainConfig { max_epochs: 60, seed: 17, ..TrainConfig::default() };
        let (_, history) = train_regressor(&dataset, &spec, &config, None).unwrap();
        let mut best = f64::INFINITY;
        for stats in &history.epochs {
            let new_best = best.min(stats.val_loss);
            assert!(new_best <= best);
            best = new_best;
        }
        assert!(history.best_val_loss <= best + 1e-15);
    }

    #[test]
    fn single_row_dataset_is_rejected() {
        let dataset = Dataset::new(vec![vec![1.0]], vec![vec![2.0]]).unwrap();
        let spec = MlpSpec::regressor(1, &[], 1, Activation::Relu);
        assert!(matches!(
            train_regressor(&dataset, &spec, &TrainConfig::default(), None),
            Err(NnError::DatasetTooSmall { rows: 1, min: 2 })
        ));
    }

    #[test]
    fn kfold_scores_learnable_target() {
        let dataset = linear_dataset(300);
        let spec = MlpSpec::regressor(1, &[], 1, Activation::Relu);
        let config = TrainConfig {
            learning_rate: 3e-2,
            max_epochs: 800,
            seed: 5,
            batch_size: 50,
            ..TrainConfig::default()
        };
        let report = kfold_cv(&dataset, 3, &spec, &config).unwrap();
        assert_eq!(report.fold_mean_r2.len(), 3);
        assert!(report.mean_r2 > 0.999, "mean R² = {}", report.mean_r2);
    }

    #[test]
    fn kfold_leave_one_out_boundary_runs() {
        let dataset = linear_dataset(6);
        let spec = MlpSpec::regressor(1, &[], 1, Activation::Relu);
        let config = TrainConfig { max_epochs: 2, batch_size: 4, ..TrainConfig::default() };
        // k = N: every holdout is a single zero-variance row, scored 0.
        let loo = kfold_cv(&dataset, 6, &spec, &config).unwrap();
        assert_eq!(loo.fold_mean_r2, vec![0.0; 6]);
        // k = N/2 leaves two-row holdouts with real scores.
        let report = kfold_cv(&dataset, 3, &spec, &config).unwrap();
        assert_eq!(report.fold_mean_r2.len(), 3);
    }

    #[test]
    fn grid_ties_keep_grid_order() {
        // Two identical cells produce identical scores; the stable sort
        // must keep their grid order.
        let dataset = linear_dataset(40);
        let cell = GridCell { hidden_layers: vec![2], activation: Activation::Tanh, learning_rate: 1e-2 };
        let grid = vec![cell.clone(), cell];
        let config = TrainConfig { max_epochs: 5, ..TrainConfig::default() };
        let results = grid_search(&dataset, &grid, 2, &config).unwrap();
        assert_eq!(results[0].report.mean_r2, results[1].report.mean_r2);
        assert_eq!(results[0].grid_index, 0);
        assert_eq!(results[1].grid_index, 1);
    }

    #[test]
    fn kfold_is_deterministic_per_seed() {
        let dataset = linear_dataset(90);
        let spec = MlpSpec::regressor(1, &[4], 1, Activation::Tanh);
        let config = TrainConfig { max_epochs: 10, seed: 21, ..TrainConfig::default() };
        let a = kfold_cv(&dataset, 3, &spec, &config).unwrap();
        let b = kfold_cv(&dataset, 3, &spec, &config).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn grid_of_one_wins() {
        let dataset = linear_dataset(60);
        let grid = vec![GridCell { hidden_layers: vec![], activation: Activation::Relu, learning_rate: 1e-2 }];
        let config = TrainConfig { max_epochs: 30, ..TrainConfig::default() };
        let results = grid_search(&dataset, &grid, 3, &config).unwrap();
        assert_eq!(results.len(), 1);
        assert_eq!(results[0].grid_index, 0);
    }

    #[test]
    fn grid_ranks_capacity_over_bottleneck() {
        // Six independent outputs cannot pass through a 1-unit bottleneck.
        let mut inputs = Vec::new();
        let mut targets = Vec::new();
        let mut rng_state = 1u64;
        for _ in 0..240 {
            // Small xorshift keeps the fixture self-contained.
            let mut next = || {
                rng_state ^= rng_state << 13;
                rng_state ^= rng_state >> 7;
                rng_state ^= rng_state << 17;
                (rng_state % 1000) as f64 / 1000.0
            };
            let x: Vec<f64> = (0..6).map(|_| next()).collect();
            let y: Vec<f64> = x.iter().map(|v| 2.0 * v - 0.5).collect();
            inputs.push(x);
            targets.push(y);
        }
        let dataset = Dataset::new(inputs, targets).unwrap();
        let grid = vec![
            GridCell { hidden_layers: vec![1], activation: Activation::Tanh, learning_rate: 1e-2 },
            GridCell { hidden_layers: vec![16], activation: Activation::Tanh, learning_rate: 1e-2 },
        ];
        let config = TrainConfig { max_epochs: 120, seed: 2, batch_size: 64, ..TrainConfig::default() };
        let results = grid_search(&dataset, &grid, 3, &config).unwrap();
        assert_eq!(results.len(), 2);
        assert_eq!(results[0].grid_index, 1, "wide net should outrank the bottleneck");
        assert!(results[0].report.mean_r2 > results[1].report.mean_r2);
    }
}
