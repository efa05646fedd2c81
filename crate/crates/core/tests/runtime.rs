use std::collections::HashMap;

use reachcast::capture::DEFAULT_MAX_DURATION_S;
use reachcast::dataset::{balance_windows, build_streams, Dataset};
use reachcast::evaluation::{simulate_runtime, train_model, Recipe};
use reachcast::features::FeatureSetId;
use reachcast::preprocessing::PreprocessConfig;
use reachcast::runtime::Predictor;
use reachcast::synthgen::{generate_corpus, Corpus, GenConfig};
use reachcast::task::Task;

const L: usize = 10;

fn corpus() -> Corpus {
    generate_corpus(&GenConfig { users: 2, reps: 1, seed: 21, ..GenConfig::default() }).unwrap()
}

/// Every stride-1 window of every trial.
fn all_windows(corpus: &Corpus) -> Dataset {
    let (streams, _) = build_streams(&corpus.recordings(), &PreprocessConfig::default(), DEFAULT_MAX_DURATION_S).unwrap();
    let ds = balance_windows(streams, L, usize::MAX / 2, 1).unwrap();
    assert_eq!(ds.stride, 1);
    ds
}

fn quick() -> Recipe {
    Recipe { epochs: 1, hidden: Some(8), ..Recipe::default() }
}

#[test]
fn streaming_predictions_equal_offline_window_predictions() {
    let corpus = corpus();
    let ds = all_windows(&corpus);
    for (task, set) in [(Task::DistanceTime, FeatureSetId::VhFp), (Task::Size, FeatureSetId::VhFpPp)] {
        let indices = ds.task_indices(task);
        let model = train_model(&ds, &indices[..200], task, set, &quick(), 3).unwrap();
        let recordings: Vec<_> = corpus.trials.iter().map(|t| t.recording.clone()).collect();
        let sim = simulate_runtime(&model, &recordings, &PreprocessConfig::default()).unwrap();

        let by_key: HashMap<(&str, u64), &Vec<f64>> = sim
            .samples
            .iter()
            .map(|s| ((recordings[s.trial].trial_id.as_str(), s.frame_index), &s.predicted))
            .collect();
        assert_eq!(sim.samples.len(), indices.len());
        let mut worst: f64 = 0.0;
        for &i in &indices {
            let w = ds.windows[i];
            let key = (ds.trials[w.trial].provenance.trial_id.as_str(), w.end_frame);
            let streamed = by_key[&key];
            let offline = model.predict_raw(&ds.window_features(i, set)).unwrap();
            for (a, b) in streamed.iter().zip(&offline) {
                worst = worst.max((a - b).abs());
            }
        }
        assert!(worst < 1e-9, "{task}: {worst:e}");
    }
}

#[test]
fn first_prediction_arrives_after_window_and_filter_warmup() {
    let corpus = corpus();
    let ds = all_windows(&corpus);
    let task = Task::Distance;
    let model = train_model(&ds, &ds.task_indices(task)[..100], task, FeatureSetId::Vh, &quick(), 1).unwrap();
    let recordings: Vec<_> = corpus.trials.iter().map(|t| t.recording.clone()).collect();
    let sim = simulate_runtime(&model, &recordings, &PreprocessConfig::default()).unwrap();
    assert_eq!(sim.first_prediction_offsets.len(), recordings.len());
    assert!(sim.first_prediction_offsets.iter().all(|&o| o == (L + 25) as u64));

    let predictor = Predictor::new(model, &PreprocessConfig::default()).unwrap();
    assert_eq!(predictor.warmup_frames(), L + 26);
}

#[test]
fn reset_restarts_the_stream() {
    let corpus = corpus();
    let ds = all_windows(&corpus);
    let model = train_model(&ds, &ds.task_indices(Task::Time)[..100], Task::Time, FeatureSetId::Vh, &quick(), 2).unwrap();
    let mut predictor = Predictor::new(model, &PreprocessConfig::default()).unwrap();
    let frames = &corpus.trials[0].recording.frames;
    let run = |p: &mut Predictor| -> Vec<_> { frames.iter().filter_map(|f| p.push(f).unwrap()).collect() };
    let first = run(&mut predictor);
    predictor.reset();
    let second = run(&mut predictor);
    assert_eq!(first, second);
    assert_eq!(predictor.frames_seen(), frames.len() as u64);
    assert_eq!(predictor.latency.frames, 2 * frames.len() as u64);
}

#[test]
fn classifier_outputs_are_probabilities() {
    let corpus = corpus();
    let ds = all_windows(&corpus);
    let model = train_model(&ds, &ds.task_indices(Task::Shape)[..100], Task::Shape, FeatureSetId::VhFp, &quick(), 4).unwrap();
    let mut predictor = Predictor::new(model, &PreprocessConfig::default()).unwrap();
    let mut seen = 0;
    for frame in &corpus.trials[1].recording.frames {
        if let Some(p) = predictor.push(frame).unwrap() {
            assert!((p.values.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let (class, prob) = p.top_class();
            assert!(p.values.iter().all(|&v| v <= prob));
            assert!(class < p.values.len());
            seen += 1;
        }
    }
    assert!(seen > 0);
}
