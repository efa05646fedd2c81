//! `reachcast` command-line tool: synthesize corpora, train and evaluate
//! models, adapt them to new users and run frame-by-frame prediction over
//! standard input.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgMatches, Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use reachcast::capture::{
    parse_recording, parse_row, segment_r2g, write_recording, ExclusionReason, ExclusionReport,
    Recording, DEFAULT_MAX_DURATION_S,
};
use reachcast::dataset::{balance_windows, build_streams, label_at, Dataset};
use reachcast::evaluation::{
    curves_jsonl, report_csv, run_protocol, run_transfer, simulate_runtime, BinAxis, Protocol,
    Recipe, DISTANCE_BIN_MM, REPORT_HEADER, TIME_BIN_MS,
};
use reachcast::features::{feature_names, fill_all_features, FeatureSetId, MAX_FEATURES};
use reachcast::neural::{load_model, save_model, Model};
use reachcast::preprocessing::{
    design_lowpass_fir, PreprocessConfig, Preprocessor, SpikeThresholds, DEFAULT_CUTOFF_HZ,
    DEFAULT_FILTER_ORDER, DEFAULT_RATE_HZ, DEFAULT_SPIKE_FALL, DEFAULT_SPIKE_RISE,
};
use reachcast::runtime::Predictor;
use reachcast::synthgen::{generate_corpus, GenConfig, ObjectSet};
use reachcast::task::Task;

const MANIFEST_FILE: &str = "manifest.csv";
const CONFIG_FILE: &str = "config.txt";
const MODEL_FILE: &str = "model.gpm";

#[derive(Debug, Parser)]
#[command(name = "reachcast", version, about = "Real-time reach-to-grasp prediction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic reach-to-grasp corpus.
    Synth(SynthArgs),
    /// Train a model on a corpus directory.
    Train(TrainArgs),
    /// Run evaluation protocols and runtime simulations.
    Eval(EvalArgs),
    /// Adapt a leave-one-user-out model to the held-out user.
    Transfer(TransferArgs),
    /// Predict frame by frame from recording rows on standard input.
    Predict(PredictArgs),
    /// Export per-frame features of one recording.
    Features(FeaturesArgs),
    /// Print low-pass filter taps and magnitude response.
    Filter(FilterArgs),
}

#[derive(Debug, Args)]
struct FilterOpts {
    #[arg(long, default_value_t = DEFAULT_FILTER_ORDER)]
    order: usize,
    #[arg(long, default_value_t = DEFAULT_CUTOFF_HZ)]
    cutoff: f64,
    #[arg(long, default_value_t = DEFAULT_RATE_HZ)]
    rate: f64,
    #[arg(long, default_value_t = DEFAULT_SPIKE_RISE)]
    spike_rise: f64,
    #[arg(long, default_value_t = DEFAULT_SPIKE_FALL, allow_hyphen_values = true)]
    spike_fall: f64,
}

impl FilterOpts {
    fn config(&self) -> PreprocessConfig {
        PreprocessConfig {
            order: self.order,
            cutoff_hz: self.cutoff,
            rate_hz: self.rate,
            thresholds: SpikeThresholds {
                rise: self.spike_rise,
                fall: self.spike_fall,
            },
        }
    }
}

#[derive(Debug, Args)]
struct DataOpts {
    /// Directory of recording CSV files.
    #[arg(long)]
    data: PathBuf,
    /// Recordings with a longer reach-to-grasp phase are excluded.
    #[arg(long, default_value_t = DEFAULT_MAX_DURATION_S)]
    max_duration: f64,
    #[command(flatten)]
    filter: FilterOpts,
}

#[derive(Debug, Args)]
struct ModelOpts {
    #[arg(long, default_value = "distance", value_parser = parse_task)]
    task: Task,
    #[arg(long, default_value = "vh+fp", value_parser = parse_features)]
    features: FeatureSetId,
    /// Window length in frames.
    #[arg(long, default_value_t = 25)]
    window: usize,
    /// Number of windows to balance the dataset to.
    #[arg(long, default_value_t = 35_000)]
    target_windows: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Debug, Args)]
struct RecipeOpts {
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    transfer_epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    clip: Option<f64>,
    #[arg(long)]
    dropout: Option<f64>,
    #[arg(long)]
    fc: Option<usize>,
    #[arg(long)]
    hidden: Option<usize>,
}

impl RecipeOpts {
    fn recipe(&self) -> Recipe {
        let d = Recipe::default();
        Recipe {
            epochs: self.epochs.unwrap_or(d.epochs),
            transfer_epochs: self.transfer_epochs.unwrap_or(d.transfer_epochs),
            learning_rate: self.lr.unwrap_or(d.learning_rate),
            batch: self.batch.unwrap_or(d.batch),
            alpha: self.alpha.unwrap_or(d.alpha),
            clip: self.clip.unwrap_or(d.clip),
            dropout: self.dropout.unwrap_or(d.dropout),
            fc: self.fc.unwrap_or(d.fc),
            hidden: self.hidden.or(d.hidden),
        }
    }
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 16)]
    users: usize,
    #[arg(long, default_value_t = 3)]
    reps: usize,
    /// Object set: real, synthetic or both.
    #[arg(long, default_value = "synthetic", value_parser = parse_object_set)]
    set: ObjectSet,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 960)]
    rate: u32,
    /// Gaussian position noise in mm.
    #[arg(long, default_value_t = reachcast::synthgen::DEFAULT_NOISE_MM)]
    noise: f64,
    /// Per-frame dropout probability.
    #[arg(long, default_value_t = 0.0)]
    dropout: f64,
    /// Start-to-object distance in mm.
    #[arg(long, default_value_t = reachcast::synthgen::DEFAULT_DISTANCE_MM)]
    distance: f64,
    /// Half-width of the per-trial jitter of the hand rest position in mm.
    #[arg(long, default_value_t = reachcast::synthgen::DEFAULT_START_JITTER_MM)]
    start_jitter: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataOpts,
    #[command(flatten)]
    model: ModelOpts,
    #[command(flatten)]
    recipe: RecipeOpts,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[command(flatten)]
    data: DataOpts,
    #[command(flatten)]
    model: ModelOpts,
    #[command(flatten)]
    recipe: RecipeOpts,
    /// Comma-separated protocols: kfold4, l1uo, l1so, l1oo.
    #[arg(long, value_delimiter = ',', value_parser = parse_protocol)]
    protocol: Option<Vec<Protocol>>,
    /// Trained model to replay over the corpus; writes `curves.jsonl`.
    #[arg(long)]
    runtime_model: Option<PathBuf>,
    #[arg(long, default_value_t = TIME_BIN_MS)]
    time_bin: f64,
    #[arg(long, default_value_t = DISTANCE_BIN_MM)]
    distance_bin: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct TransferArgs {
    #[command(flatten)]
    data: DataOpts,
    #[command(flatten)]
    model: ModelOpts,
    #[command(flatten)]
    recipe: RecipeOpts,
    /// Held-out user id, e.g. `u03`.
    #[arg(long)]
    user: String,
    /// Comma-separated adaptation set sizes.
    #[arg(long, value_delimiter = ',', default_value = "50,150,250")]
    sizes: Vec<usize>,
    /// Model trained without the user; trained on the fly when omitted.
    #[arg(long)]
    base_model: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    filter: FilterOpts,
}

#[derive(Debug, Args)]
struct FeaturesArgs {
    /// Recording CSV file.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "vh+fp+pp", value_parser = parse_features)]
    features: FeatureSetId,
    #[command(flatten)]
    filter: FilterOpts,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct FilterArgs {
    #[arg(long, default_value_t = DEFAULT_FILTER_ORDER)]
    order: usize,
    #[arg(long, default_value_t = DEFAULT_CUTOFF_HZ)]
    cutoff: f64,
    #[arg(long, default_value_t = DEFAULT_RATE_HZ)]
    rate: f64,
}

fn parse_task(s: &str) -> Result<Task, String> {
    s.parse().map_err(|e: reachcast::Error| e.to_string())
}

fn parse_features(s: &str) -> Result<FeatureSetId, String> {
    s.parse().map_err(|e: reachcast::Error| e.to_string())
}

fn parse_protocol(s: &str) -> Result<Protocol, String> {
    s.parse().map_err(|e: reachcast::Error| e.to_string())
}

fn parse_object_set(s: &str) -> Result<ObjectSet, String> {
    s.parse().map_err(|e: reachcast::Error| e.to_string())
}

/// Failure of a command: usage errors exit with 1, data errors with 2.
#[derive(Debug)]
enum CliError {
    Usage(String),
    Data(String),
}

impl From<reachcast::Error> for CliError {
    fn from(err: reachcast::Error) -> Self {
        CliError::Data(err.to_string())
    }
}

impl From<io::Error> for CliError {
    fn from(err: io::Error) -> Self {
        CliError::Data(err.to_string())
    }
}

type CliResult<T = ()> = Result<T, CliError>;

fn main() -> ExitCode {
    let code = dispatch(std::env::args_os(), &mut io::stdin().lock(), &mut io::stdout().lock(), &mut io::stderr());
    ExitCode::from(code)
}

/// Parses `argv`, runs the subcommand and returns the process exit code.
fn dispatch(
    argv: impl IntoIterator<Item = OsString>,
    stdin: &mut dyn BufRead,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> u8 {
    let matches = match Cli::command().try_get_matches_from(argv) {
        Ok(m) => m,
        Err(err) => {
            let text = err.render().to_string();
            return if matches!(
                err.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            ) {
                let _ = write!(stdout, "{text}");
                0
            } else {
                let _ = write!(stderr, "{text}");
                1
            };
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(cli) => cli,
        Err(err) => {
            let _ = write!(stderr, "{}", err.render());
            return 1;
        }
    };
    let config = config_text(&matches);
    let result = match cli.command {
        Command::Synth(a) => synth(&a, &config, stdout),
        Command::Train(a) => train(&a, &config, stdout, stderr),
        Command::Eval(a) => eval(&a, &config, stdout, stderr),
        Command::Transfer(a) => transfer(&a, &config, stdout, stderr),
        Command::Predict(a) => predict(&a, stdin, stdout, stderr),
        Command::Features(a) => features(&a, &config, stdout),
        Command::Filter(a) => filter(&a, stdout),
    };
    match result {
        Ok(()) => 0,
        Err(CliError::Usage(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            1
        }
        Err(CliError::Data(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            2
        }
    }
}

/// `key = value` lines for every option of the chosen subcommand,
/// defaults included.
fn config_text(matches: &ArgMatches) -> String {
    let mut out = String::new();
    if let Some((name, sub)) = matches.subcommand() {
        let _ = writeln!(out, "command = {name}");
        let mut ids: Vec<&str> = sub.ids().map(|id| id.as_str()).collect();
        ids.sort_unstable();
        for id in ids {
            if let Ok(Some(values)) = sub.try_get_raw(id) {
                let joined: Vec<String> = values.map(|v| v.to_string_lossy().into_owned()).collect();
                let _ = writeln!(out, "{id} = {}", joined.join(","));
            }
        }
    }
    out
}

fn prepare_out(dir: &Path, config: &str) -> CliResult {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(CONFIG_FILE), config)?;
    Ok(())
}

fn synth(a: &SynthArgs, config: &str, stdout: &mut dyn Write) -> CliResult {
    let gen = GenConfig {
        users: a.users,
        reps: a.reps,
        rate_hz: a.rate,
        noise_mm: a.noise,
        dropout: a.dropout,
        seed: a.seed,
        objects: a.set,
        distance_mm: a.distance,
        start_jitter_mm: a.start_jitter,
        ..GenConfig::default()
    };
    gen.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let corpus = generate_corpus(&gen)?;
    prepare_out(&a.out, config)?;
    for (trial, entry) in corpus.trials.iter().zip(&corpus.manifest) {
        fs::write(a.out.join(&entry.file), write_recording(&trial.recording)?)?;
    }
    fs::write(a.out.join(MANIFEST_FILE), corpus.manifest_csv())?;
    writeln!(
        stdout,
        "wrote {} recordings for {} users to {} (manifest crc32 {:08x})",
        corpus.trials.len(),
        corpus.users.len(),
        a.out.display(),
        corpus.manifest_checksum()
    )?;
    Ok(())
}

/// Reads every recording CSV in `dir` except the manifest, sorted by name.
/// Unparseable files are reported and skipped.
fn load_recordings(dir: &Path, stderr: &mut dyn Write) -> CliResult<Vec<(Recording, String)>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv") && p.file_name().is_some_and(|n| n != MANIFEST_FILE))
        .collect();
    paths.sort();
    let mut out = Vec::with_capacity(paths.len());
    for path in paths {
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        match fs::read_to_string(&path).map_err(reachcast::Error::from).and_then(|t| parse_recording(&t)) {
            Ok(rec) => out.push((rec, name)),
            Err(err) => writeln!(stderr, "warning: skipping {name}: {err}")?,
        }
    }
    if out.is_empty() {
        return Err(CliError::Data(format!("no readable recordings in {}", dir.display())));
    }
    Ok(out)
}

fn exclusion_summary(reports: &[ExclusionReport]) -> String {
    let mut parts = Vec::new();
    for reason in [
        ExclusionReason::TouchOrderError,
        ExclusionReason::ExcessiveDuration,
        ExclusionReason::MissingTouch,
    ] {
        let n = reports.iter().filter(|r| r.reason == reason).count();
        if n > 0 {
            parts.push(format!("{} {n}", reason.name()));
        }
    }
    if parts.is_empty() {
        "none".into()
    } else {
        parts.join(", ")
    }
}

fn load_dataset(data: &DataOpts, model: &ModelOpts, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CliResult<Dataset> {
    let recordings = load_recordings(&data.data, stderr)?;
    let (streams, reports) = build_streams(&recordings, &data.filter.config(), data.max_duration)?;
    writeln!(
        stdout,
        "loaded {} recordings, {} accepted; excluded: {}",
        recordings.len(),
        streams.len(),
        exclusion_summary(&reports)
    )?;
    if streams.is_empty() {
        return Err(CliError::Data("every recording was excluded".into()));
    }
    let ds = balance_windows(streams, model.window, model.target_windows, model.seed)?;
    if ds.shortfall > 0 {
        writeln!(stderr, "warning: {} windows short of the target {}", ds.shortfall, model.target_windows)?;
    }
    writeln!(stdout, "{} windows of {} frames at stride {}", ds.len(), ds.seq_len, ds.stride)?;
    Ok(ds)
}

fn read_model(path: &Path) -> CliResult<Model> {
    let bytes = fs::read(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    Ok(load_model(&bytes)?)
}

/// Writes the model file and returns its stored CRC-32 checksum.
fn write_model(path: &Path, model: &Model) -> CliResult<u32> {
    let bytes = save_model(model);
    fs::write(path, &bytes)?;
    let trailer: [u8; 4] = bytes[bytes.len() - 4..].try_into().expect("model file ends with a checksum");
    Ok(u32::from_le_bytes(trailer))
}

fn train(a: &TrainArgs, config: &str, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CliResult {
    prepare_out(&a.out, config)?;
    let ds = load_dataset(&a.data, &a.model, stdout, stderr)?;
    let task = a.model.task;
    let indices = ds.task_indices(task);
    if indices.is_empty() {
        return Err(CliError::Data(format!("no windows carry {task} labels")));
    }
    let recipe = a.recipe.recipe();
    let model = reachcast::evaluation::train_model(&ds, &indices, task, a.model.features, &recipe, a.model.seed)?;
    let mut history = String::from("epoch,loss\n");
    for (e, loss) in model.meta.loss_history.iter().enumerate() {
        let _ = writeln!(history, "{},{loss:.8}", e + 1);
    }
    fs::write(a.out.join("training.csv"), history)?;
    let crc = write_model(&a.out.join(MODEL_FILE), &model)?;
    writeln!(
        stdout,
        "trained {task} on {} windows, final loss {:.6}; wrote {} (crc32 {crc:08x})",
        indices.len(),
        model.meta.loss_history.last().copied().unwrap_or(f64::NAN),
        a.out.join(MODEL_FILE).display()
    )?;
    Ok(())
}

fn eval(a: &EvalArgs, config: &str, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CliResult {
    let protocols = match (&a.protocol, &a.runtime_model) {
        (Some(p), _) => p.clone(),
        (None, Some(_)) => Vec::new(),
        (None, None) => vec![Protocol::KFold(4)],
    };
    if !(a.time_bin > 0.0 && a.distance_bin > 0.0) {
        return Err(CliError::Usage("bin widths must be positive".into()));
    }
    prepare_out(&a.out, config)?;
    if !protocols.is_empty() {
        let ds = load_dataset(&a.data, &a.model, stdout, stderr)?;
        let recipe = a.recipe.recipe();
        let mut reports = Vec::new();
        for protocol in protocols {
            let r = run_protocol(&ds, a.model.task, a.model.features, protocol, &recipe, a.model.seed)?;
            for (m, (mean, std)) in r.metrics.iter().zip(r.mean.iter().zip(&r.std)) {
                writeln!(
                    stdout,
                    "{} {} {}: {m} {mean:.3} ± {std:.3} over {} splits ({:.1} s)",
                    r.protocol,
                    r.task,
                    r.feature_set,
                    r.folds.len(),
                    r.wall_clock_s
                )?;
            }
            reports.push(r);
        }
        fs::write(a.out.join("report.csv"), report_csv(&reports))?;
    }
    if let Some(path) = &a.runtime_model {
        let model = read_model(path)?;
        let recordings: Vec<Recording> = load_recordings(&a.data.data, stderr)?.into_iter().map(|(r, _)| r).collect();
        let sim = simulate_runtime(&model, &recordings, &a.data.filter.config())?;
        let task = model.config.task;
        let outputs: Vec<String> = if task.is_classification() {
            vec!["accuracy_pct".into()]
        } else {
            task.target_names().iter().map(|n| format!("{n}_abs_error")).collect()
        };
        let mut curves = Vec::new();
        for (o, name) in outputs.iter().enumerate() {
            curves.push((format!("{name}_by_time_ms"), sim.curve(BinAxis::TimeToGrasp, o, a.time_bin)));
            curves.push((format!("{name}_by_distance_mm"), sim.curve(BinAxis::Distance, o, a.distance_bin)));
        }
        fs::write(a.out.join("curves.jsonl"), curves_jsonl(&curves))?;
        writeln!(
            stdout,
            "simulated {} trials, {} per-frame predictions; wrote curves.jsonl",
            sim.first_prediction_offsets.len(),
            sim.samples.len()
        )?;
    }
    Ok(())
}

fn transfer(a: &TransferArgs, config: &str, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CliResult {
    prepare_out(&a.out, config)?;
    let ds = load_dataset(&a.data, &a.model, stdout, stderr)?;
    let base = a.base_model.as_deref().map(read_model).transpose()?;
    if let Some(m) = &base {
        if m.config.task != a.model.task || m.config.feature_set != a.model.features || m.config.seq_len != a.model.window {
            return Err(CliError::Data("base model does not match --task, --features and --window".into()));
        }
    }
    let recipe = a.recipe.recipe();
    let report = run_transfer(&ds, a.model.task, a.model.features, &a.user, &a.sizes, &recipe, a.model.seed, base.as_ref())?;
    let mut csv = String::from(REPORT_HEADER);
    csv.push_str(&report.csv_rows(a.model.features, a.model.window));
    fs::write(a.out.join("report.csv"), csv)?;
    for row in &report.rows {
        let pairs: Vec<String> = report
            .metrics
            .iter()
            .zip(row.pre.iter().zip(&row.post))
            .map(|(m, (pre, post))| format!("{m} {pre:.3} -> {post:.3}"))
            .collect();
        writeln!(stdout, "{} size {}: {} ({} windows evaluated)", report.user, row.size, pairs.join(", "), row.evaluated)?;
        if let Some(model) = &row.adapted {
            let file = format!("model_{}_{}.gpm", report.user, row.size);
            let crc = write_model(&a.out.join(&file), model)?;
            writeln!(stdout, "wrote {file} (crc32 {crc:08x})")?;
        }
    }
    Ok(())
}

fn predict(a: &PredictArgs, stdin: &mut dyn BufRead, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CliResult {
    let model = read_model(&a.model)?;
    let task = model.config.task;
    let classes = task.class_names();
    let mut predictor = Predictor::new(model, &a.filter.config())?;
    let mut line = String::new();
    let mut line_no = 0;
    let mut frames = 0u64;
    let mut emitted = 0u64;
    loop {
        line.clear();
        if stdin.read_line(&mut line)? == 0 {
            break;
        }
        line_no += 1;
        let row = line.trim();
        if row.is_empty() || row.starts_with('#') || row.starts_with("frame") {
            continue;
        }
        let frame = match parse_row(row, line_no) {
            Ok(f) => f,
            Err(err) => {
                writeln!(stderr, "warning: skipping malformed row: {err}")?;
                continue;
            }
        };
        frames += 1;
        let Some(pred) = predictor.push(&frame)? else { continue };
        emitted += 1;
        let mut out = pred.frame_index.to_string();
        if task.is_classification() {
            let (best, p) = pred.top_class();
            let _ = write!(out, ",{},{:.2}", classes[best], 100.0 * p);
            for v in &pred.values {
                let _ = write!(out, ",{v:.6}");
            }
        } else {
            for v in &pred.values {
                let _ = write!(out, ",{v:.3}");
            }
        }
        writeln!(stdout, "{out}")?;
    }
    stdout.flush()?;
    if emitted == 0 {
        writeln!(
            stderr,
            "no predictions: {frames} frames received, the pipeline needs {} before the first prediction",
            predictor.warmup_frames() + 1
        )?;
    }
    let lat = predictor.latency;
    writeln!(
        stderr,
        "latency over {} frames: mean {:.1} us, max {:.1} us; {emitted} predictions",
        lat.frames,
        lat.mean().as_secs_f64() * 1e6,
        lat.max.as_secs_f64() * 1e6
    )?;
    Ok(())
}

fn features(a: &FeaturesArgs, config: &str, stdout: &mut dyn Write) -> CliResult {
    let text = fs::read_to_string(&a.input).map_err(|e| CliError::Data(format!("{}: {e}", a.input.display())))?;
    let rec = parse_recording(&text)?;
    let segment = segment_r2g(&rec).map_err(|e| CliError::Data(format!("cannot segment recording: {e:?}")))?;
    let mut pre = Preprocessor::new(&a.filter.config())?;
    let dim = a.features.dim();
    let names = feature_names();
    let mut csv = format!("frame,time_to_grasp_ms,distance_mm,{}\n", names[..dim].join(","));
    let mut rows = 0;
    for frame in rec.segment_frames(&segment) {
        let Some(p) = pre.push(frame) else { continue };
        let Some(label) = label_at(&rec, p.frame.frame_index, segment.grasp_frame) else {
            continue;
        };
        let mut all = [0.0; MAX_FEATURES];
        fill_all_features(&p.frame, p.velocity.value, &mut all);
        let _ = write!(csv, "{},{:.3},{:.4}", p.frame.frame_index, label.time_to_grasp_ms, label.distance_mm);
        for v in &all[..dim] {
            let _ = write!(csv, ",{v:.6}");
        }
        csv.push('\n');
        rows += 1;
    }
    prepare_out(&a.out, config)?;
    fs::write(a.out.join("features.csv"), csv)?;
    writeln!(stdout, "wrote {rows} feature rows of {} ({dim} values) to features.csv", a.features)?;
    Ok(())
}

/// Frequencies of the response table.
const RESPONSE_HZ: [f64; 9] = [0.0, 5.0, 10.0, 25.0, 50.0, 100.0, 200.0, 300.0, 480.0];

fn filter(a: &FilterArgs, stdout: &mut dyn Write) -> CliResult {
    let fir = design_lowpass_fir(a.order, a.cutoff, a.rate).map_err(|e| CliError::Usage(e.to_string()))?;
    for (i, tap) in fir.taps.iter().enumerate() {
        writeln!(stdout, "tap {i} {tap:.12}")?;
    }
    writeln!(stdout, "group delay {} samples", fir.group_delay_samples())?;
    writeln!(stdout, "frequency_hz response_db")?;
    for hz in RESPONSE_HZ.iter().copied().filter(|&hz| hz <= a.rate / 2.0) {
        writeln!(stdout, "{hz} {:.2}", fir.response_db(hz))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(args: &[&str]) -> (u8, String, String) {
        let argv = std::iter::once("reachcast").chain(args.iter().copied()).map(OsString::from);
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = dispatch(argv, &mut io::empty(), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn no_arguments_prints_usage_and_fails() {
        let (code, _, err) = run(&[]);
        assert_eq!(code, 1);
        assert!(err.contains("Usage"), "{err}");
    }

    #[test]
    fn unknown_subcommand_and_key_are_usage_errors() {
        assert_eq!(run(&["frobnicate"]).0, 1);
        assert_eq!(run(&["filter", "--colour", "red"]).0, 1);
    }

    #[test]
    fn filter_prints_taps_and_response() {
        let (code, out, _) = run(&["filter", "--order", "25", "--cutoff", "25", "--rate", "960"]);
        assert_eq!(code, 0);
        assert_eq!(out.lines().filter(|l| l.starts_with("tap ")).count(), 26);
        assert!(out.contains("response_db"));
    }

    #[test]
    fn bad_filter_parameters_are_usage_errors() {
        assert_eq!(run(&["filter", "--cutoff", "600", "--rate", "960"]).0, 1);
    }

    #[test]
    fn config_echo_lists_defaults() {
        let m = Cli::command()
            .try_get_matches_from(["reachcast", "filter", "--order", "11"])
            .unwrap();
        let text = config_text(&m);
        assert!(text.contains("command = filter"));
        assert!(text.contains("order = 11"));
        assert!(text.contains("rate = 960"));
    }
}
