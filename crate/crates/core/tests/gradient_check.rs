mod common;

use common::gradient::max_relative_error;
use reachcast::task::Task;

#[test]
fn regression_head_gradients_match_finite_differences() {
    for seed in 0..5 {
        let err = max_relative_error(Task::Distance, seed, 0.0, 1e-4);
        assert!(err < 1e-4, "seed {seed}: {err:e}");
    }
}

#[test]
fn merged_regression_head_with_dropout() {
    for seed in 0..5 {
        let err = max_relative_error(Task::DistanceTime, seed, 0.5, 1e-4);
        assert!(err < 1e-4, "seed {seed}: {err:e}");
    }
}

#[test]
fn three_class_head_gradients_match_finite_differences() {
    for seed in 0..5 {
        let err = max_relative_error(Task::Size, seed, 0.0, 1e-4);
        assert!(err < 1e-4, "seed {seed}: {err:e}");
        let err = max_relative_error(Task::Shape, seed, 0.25, 0.0);
        assert!(err < 1e-4, "seed {seed} with dropout: {err:e}");
    }
}
