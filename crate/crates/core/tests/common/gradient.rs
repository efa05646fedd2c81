use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reachcast::features::FeatureSetId;
use reachcast::neural::{init_model, BatchTargets, Mode, ModelConfig};
use reachcast::task::Task;

pub fn tiny(task: Task, dropout: f64) -> ModelConfig {
    ModelConfig {
        task,
        feature_set: FeatureSetId::Vh,
        input_dim: 3,
        hidden: 4,
        fc: 4,
        outputs: task.outputs(),
        seq_len: 5,
        dropout,
    }
}

/// Largest per-parameter relative error between the analytic gradient and
/// fourth-order central finite differences of the full objective.
pub fn max_relative_error(task: Task, seed: u64, dropout: f64, alpha: f64) -> f64 {
    let config = tiny(task, dropout);
    let mut model = init_model(config, seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xfeed);
    // Move biases away from zero so every path carries gradient.
    for v in model.params.values.iter_mut() {
        *v += rng.random_range(-0.3..0.3);
    }
    let batch = 3;
    let xs: Vec<f64> = (0..config.seq_len * batch * config.input_dim)
        .map(|_| rng.random_range(-1.5..1.5))
        .collect();
    let reg: Vec<f64> = (0..batch * config.outputs).map(|_| rng.random_range(-2.0..2.0)).collect();
    let labels: Vec<usize> = (0..batch).map(|b| b % config.outputs).collect();
    let targets = if task.is_classification() {
        BatchTargets::Classes(&labels)
    } else {
        BatchTargets::Regression(&reg)
    };
    let mode = if dropout > 0.0 { Mode::Train { mask_seed: seed } } else { Mode::Infer };

    let cache = model.forward_batch(xs.clone(), batch, mode).unwrap();
    let (_, grads) = model.backward(&cache, targets, alpha).unwrap();

    // Fourth-order central difference: (-f(+2h) + 8f(+h) - 8f(-h) + f(-2h)) / 12h
    let h = 1e-4;
    let mut worst: f64 = 0.0;
    for i in 0..model.params.values.len() {
        let orig = model.params.values[i];
        let mut at = |delta: f64| {
            model.params.values[i] = orig + delta;
            model.objective(xs.clone(), batch, mode, targets, alpha).unwrap()
        };
        let numeric = (-at(2.0 * h) + 8.0 * at(h) - 8.0 * at(-h) + at(-2.0 * h)) / (12.0 * h);
        model.params.values[i] = orig;
        let analytic = grads.values[i];
        let scale = analytic.abs().max(numeric.abs()).max(1e-7);
        worst = worst.max((analytic - numeric).abs() / scale);
    }
    worst
}

