//! The multi-realization experiment protocol: seeded training runs with an
//! early-termination gate, outcome-band classification, deterministic sweeps
//! over a worker pool, histograms and summaries, and the CSV surfaces.
//!
//! Each realization trains a fresh network for up to `epochs` epochs,
//! evaluating test accuracy after every `eval_every` epochs and once more
//! after `gate_epoch`. A run whose gate accuracy falls below `a1` is stopped
//! immediately as NON_CONVERGED; a run whose loss turns non-finite is stopped
//! the same way with a NaN final accuracy. Completed runs are classified by
//! final accuracy `r`: `r < a1` NON_CONVERGED, `a1 <= r < a2` MID_BAND,
//! `r >= a2` ACCEPTED.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::activations::{ActivationKind, NonlinearBasis};
use crate::data::{epoch_batches, load_mnist, make_synthetic, Dataset};
use crate::error::{Error, Result};
use crate::network::{Network, NetworkSpec};
use crate::optim::{NadamHyper, NadamState};

/// Activation selector as it appears in configs and CSV files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivationName {
    Relu,
    Swish,
    Neaf,
}

impl fmt::Display for ActivationName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ActivationName::Relu => "relu",
            ActivationName::Swish => "swish",
            ActivationName::Neaf => "neaf",
        })
    }
}

impl FromStr for ActivationName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(ActivationName::Relu),
            "swish" => Ok(ActivationName::Swish),
            "neaf" => Ok(ActivationName::Neaf),
            other => Err(Error::Config(format!(
                "unknown activation {other:?} (expected relu|swish|neaf)"
            ))),
        }
    }
}

/// Nonlinear-basis selector: `xabsx` = x|x|, `absx3` = |x|^3, `x3` = x^3.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisName {
    Xabsx,
    Absx3,
    X3,
}

impl BasisName {
    pub fn to_basis(self) -> NonlinearBasis {
        match self {
            BasisName::Xabsx => NonlinearBasis::XAbsX,
            BasisName::Absx3 => NonlinearBasis::AbsXCubed,
            BasisName::X3 => NonlinearBasis::XCubed,
        }
    }
}

impl fmt::Display for BasisName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BasisName::Xabsx => "xabsx",
            BasisName::Absx3 => "absx3",
            BasisName::X3 => "x3",
        })
    }
}

impl FromStr for BasisName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "xabsx" => Ok(BasisName::Xabsx),
            "absx3" => Ok(BasisName::Absx3),
            "x3" => Ok(BasisName::X3),
            other => Err(Error::Config(format!(
                "unknown basis {other:?} (expected xabsx|absx3|x3)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetChoice {
    Mnist,
    Synthetic,
}

impl fmt::Display for DatasetChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DatasetChoice::Mnist => "mnist",
            DatasetChoice::Synthetic => "synthetic",
        })
    }
}

impl FromStr for DatasetChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mnist" => Ok(DatasetChoice::Mnist),
            "synthetic" => Ok(DatasetChoice::Synthetic),
            other => Err(Error::Config(format!(
                "unknown dataset {other:?} (expected mnist|synthetic)"
            ))),
        }
    }
}

/// Full description of one experiment. Unspecified fields take the defaults
/// of the reference protocol: 784/[512, 50]/10 architecture, NEAF with
/// `gamma = 5` on the even cubic basis, Nadam at 1e-3, batch 128, 150 epochs,
/// test accuracy evaluated every 2 epochs, the epoch-15 gate at 0.5, and the
/// acceptance band starting at 0.982.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub input_size: usize,
    pub hidden: Vec<usize>,
    pub classes: usize,
    pub activation: ActivationName,
    pub basis: BasisName,
    pub gamma: f64,
    pub with_bias: bool,
    pub swish_beta: f64,
    pub trainable_beta: bool,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub eval_every: usize,
    pub gate_epoch: usize,
    pub a1: f64,
    pub a2: f64,
    pub realizations: usize,
    pub base_seed: u64,
    pub workers: usize,
    pub hist_lo: f64,
    pub hist_hi: f64,
    pub hist_bins: usize,
    pub dataset: DatasetChoice,
    pub data_dir: Option<PathBuf>,
    pub synth_train: usize,
    pub synth_test: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            input_size: 784,
            hidden: vec![512, 50],
            classes: 10,
            activation: ActivationName::Neaf,
            basis: BasisName::Absx3,
            gamma: 5.0,
            with_bias: false,
            swish_beta: 1.0,
            trainable_beta: false,
            learning_rate: 0.001,
            epochs: 150,
            batch_size: 128,
            eval_every: 2,
            gate_epoch: 15,
            a1: 0.5,
            a2: 0.982,
            realizations: 1,
            base_seed: 1,
            workers: 1,
            hist_lo: 0.982,
            hist_hi: 0.986,
            hist_bins: 20,
            dataset: DatasetChoice::Mnist,
            data_dir: None,
            synth_train: 2048,
            synth_test: 512,
        }
    }
}

impl RunConfig {
    /// Validates field ranges. `gate_epoch` may exceed `epochs`, in which
    /// case the gate is simply never reached.
    pub fn validate(&self) -> Result<()> {
        fn positive(name: &str, v: usize) -> Result<()> {
            if v == 0 {
                Err(Error::Config(format!("{name} must be >= 1")))
            } else {
                Ok(())
            }
        }
        positive("input_size", self.input_size)?;
        positive("classes", self.classes)?;
        for &h in &self.hidden {
            positive("hidden layer size", h)?;
        }
        positive("epochs", self.epochs)?;
        positive("batch_size", self.batch_size)?;
        positive("eval_every", self.eval_every)?;
        positive("gate_epoch", self.gate_epoch)?;
        positive("realizations", self.realizations)?;
        positive("workers", self.workers)?;
        positive("hist_bins", self.hist_bins)?;
        positive("synth_train", self.synth_train)?;
        positive("synth_test", self.synth_test)?;
        if !(0.0 < self.a1 && self.a1 < self.a2 && self.a2 < 1.0) {
            return Err(Error::Config(format!(
                "need 0 < a1 < a2 < 1, got a1 = {}, a2 = {}",
                self.a1, self.a2
            )));
        }
        if !(self.hist_lo < self.hist_hi) {
            return Err(Error::Config(format!(
                "need hist_lo < hist_hi, got {} and {}",
                self.hist_lo, self.hist_hi
            )));
        }
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return Err(Error::Config(format!(
                "learning_rate must be finite and >= 0, got {}",
                self.learning_rate
            )));
        }
        self.activation_kind().validate()
    }

    pub fn activation_kind(&self) -> ActivationKind {
        match self.activation {
            ActivationName::Relu => ActivationKind::Relu,
            ActivationName::Swish => ActivationKind::Swish {
                beta: self.swish_beta,
                trainable: self.trainable_beta,
            },
            ActivationName::Neaf => ActivationKind::Neaf {
                gamma: self.gamma,
                basis: self.basis.to_basis(),
                with_bias: self.with_bias,
            },
        }
    }

    pub fn network_spec(&self) -> NetworkSpec {
        NetworkSpec {
            input_size: self.input_size,
            hidden: self.hidden.clone(),
            classes: self.classes,
            activation: self.activation_kind(),
        }
    }

    pub fn nadam_hyper(&self) -> NadamHyper {
        NadamHyper {
            learning_rate: self.learning_rate,
            ..NadamHyper::default()
        }
    }
}

/// Resolves the MNIST directory: explicit config value, then the
/// `NEAF_DATA_DIR` environment variable, then `./data`.
pub fn resolve_data_dir(configured: Option<&Path>) -> PathBuf {
    if let Some(dir) = configured {
        return dir.to_path_buf();
    }
    if let Some(env) = std::env::var_os("NEAF_DATA_DIR") {
        return PathBuf::from(env);
    }
    PathBuf::from("data")
}

/// The train/test pair shared read-only by all realizations of a sweep.
#[derive(Debug, Clone)]
pub struct DataBundle {
    pub train: Dataset,
    pub test: Dataset,
}

/// Loads the configured dataset. Synthetic data is seeded from `base_seed`
/// (via reserved stream indices), so a sweep is fully pinned by its config.
pub fn load_data(cfg: &RunConfig) -> Result<DataBundle> {
    match cfg.dataset {
        DatasetChoice::Mnist => {
            let dir = resolve_data_dir(cfg.data_dir.as_deref());
            let (train, test) = load_mnist(&dir)?;
            Ok(DataBundle { train, test })
        }
        DatasetChoice::Synthetic => {
            let mut train_rng =
                ChaCha8Rng::seed_from_u64(derive_seed(cfg.base_seed, u64::MAX));
            let mut test_rng =
                ChaCha8Rng::seed_from_u64(derive_seed(cfg.base_seed, u64::MAX - 1));
            Ok(DataBundle {
                train: make_synthetic(cfg.synth_train, cfg.classes, &mut train_rng),
                test: make_synthetic(cfg.synth_test, cfg.classes, &mut test_rng),
            })
        }
    }
}

/// Outcome band of one realization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    NonConverged,
    MidBand,
    Accepted,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::NonConverged => "NON_CONVERGED",
            Outcome::MidBand => "MID_BAND",
            Outcome::Accepted => "ACCEPTED",
        })
    }
}

impl FromStr for Outcome {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "NON_CONVERGED" => Ok(Outcome::NonConverged),
            "MID_BAND" => Ok(Outcome::MidBand),
            "ACCEPTED" => Ok(Outcome::Accepted),
            other => Err(Error::Format(format!("unknown outcome {other:?}"))),
        }
    }
}

/// Classifies a final accuracy against the two gates. A NaN accuracy (numeric
/// failure) is NON_CONVERGED.
pub fn classify_outcome(r: f64, a1: f64, a2: f64) -> Outcome {
    if r.is_nan() || r < a1 {
        Outcome::NonConverged
    } else if r < a2 {
        Outcome::MidBand
    } else {
        Outcome::Accepted
    }
}

/// One training run's bookkeeping. `final_accuracy` is NaN when the run was
/// stopped by a numeric failure.
#[derive(Debug, Clone, PartialEq)]
pub struct RealizationRecord {
    pub index: usize,
    pub seed: u64,
    pub outcome: Outcome,
    pub final_accuracy: f64,
    pub epochs_run: usize,
    pub wall_ms: u64,
    pub trace: Vec<(usize, f64)>,
}

impl fmt::Display for RealizationRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "realization {} seed {} outcome {} final_accuracy {} epochs_run {} wall_ms {}",
            self.index,
            self.seed,
            self.outcome,
            format_accuracy(self.final_accuracy),
            self.epochs_run,
            self.wall_ms
        )
    }
}

/// SplitMix64 seed derivation: realization `i` of a sweep uses
/// `derive_seed(base_seed, i)`, the `(i+1)`-th output of a SplitMix64 stream
/// started at `base_seed`. Seeds therefore depend only on `(base_seed, i)`,
/// never on worker count or sweep size.
pub fn derive_seed(base_seed: u64, index: u64) -> u64 {
    let state = base_seed.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let mut z = state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Trains one seeded realization to completion, the gate, or numeric failure.
pub fn run_realization(
    cfg: &RunConfig,
    index: usize,
    seed: u64,
    data: &DataBundle,
) -> Result<RealizationRecord> {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = Network::init(&cfg.network_spec(), &mut rng)?;
    let mut opt = NadamState::with_hyper(&net, cfg.nadam_hyper());

    let mut trace: Vec<(usize, f64)> = Vec::new();
    let mut final_accuracy = f64::NAN;
    let mut epochs_run = 0;

    'training: for epoch in 1..=cfg.epochs {
        for batch in epoch_batches(&data.train, cfg.batch_size, &mut rng) {
            let (images, labels) = data.train.batch(&batch);
            let step = net
                .loss_and_grads(&images, &labels)
                .and_then(|(_, grads)| opt.step(&mut net, &grads));
            match step {
                Ok(()) => {}
                Err(Error::Numeric(_)) => {
                    // numeric failure is an outcome, not an error
                    epochs_run = epoch;
                    final_accuracy = f64::NAN;
                    break 'training;
                }
                Err(other) => return Err(other),
            }
        }
        epochs_run = epoch;

        let cadence = epoch % cfg.eval_every == 0;
        let gate = epoch == cfg.gate_epoch;
        let last = epoch == cfg.epochs;
        if cadence || gate || last {
            let accuracy = net.evaluate(data.test.images(), data.test.labels())?;
            trace.push((epoch, accuracy));
            final_accuracy = accuracy;
            if gate && accuracy < cfg.a1 {
                break 'training;
            }
        }
    }

    Ok(RealizationRecord {
        index,
        seed,
        outcome: classify_outcome(final_accuracy, cfg.a1, cfg.a2),
        final_accuracy,
        epochs_run,
        wall_ms: started.elapsed().as_millis() as u64,
        trace,
    })
}

/// Records in realization order plus their summary.
#[derive(Debug, Clone)]
pub struct SweepResult {
    pub records: Vec<RealizationRecord>,
    pub summary: Summary,
}

/// Runs `cfg.realizations` seeded realizations on a pool of `cfg.workers`
/// threads. Records are returned in index order and their contents do not
/// depend on the worker count.
pub fn run_sweep(cfg: &RunConfig, data: &DataBundle) -> Result<SweepResult> {
    let n = cfg.realizations;
    let mut slots: Vec<Option<Result<RealizationRecord>>> = (0..n).map(|_| None).collect();

    if cfg.workers <= 1 {
        for (i, slot) in slots.iter_mut().enumerate() {
            *slot = Some(run_realization(cfg, i, derive_seed(cfg.base_seed, i as u64), data));
        }
    } else {
        let next = AtomicUsize::new(0);
        let shared = Mutex::new(&mut slots);
        std::thread::scope(|scope| {
            for _ in 0..cfg.workers.min(n) {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    if i >= n {
                        break;
                    }
                    let rec = run_realization(cfg, i, derive_seed(cfg.base_seed, i as u64), data);
                    shared.lock().unwrap()[i] = Some(rec);
                });
            }
        });
    }

    let records = slots
        .into_iter()
        .map(|slot| slot.expect("every index was scheduled"))
        .collect::<Result<Vec<_>>>()?;
    let summary = summarize(&records);
    Ok(SweepResult { records, summary })
}

/// Histogram of accepted-band final accuracies over `[lo, hi)` with
/// equal-width bins; values below `lo` and at or above `hi` are tallied
/// separately.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<usize>,
    pub underflow: usize,
    pub overflow: usize,
}

/// Bins the ACCEPTED records only. Bin `k` covers
/// `[lo + k*w, lo + (k+1)*w)` with `w = (hi - lo) / bins`.
pub fn build_histogram(records: &[RealizationRecord], lo: f64, hi: f64, bins: usize) -> Histogram {
    assert!(lo < hi && bins >= 1, "need lo < hi and bins >= 1");
    let width = (hi - lo) / bins as f64;
    let mut hist = Histogram {
        lo,
        hi,
        counts: vec![0; bins],
        underflow: 0,
        overflow: 0,
    };
    for rec in records {
        if rec.outcome != Outcome::Accepted {
            continue;
        }
        let r = rec.final_accuracy;
        if r < lo {
            hist.underflow += 1;
        } else if r >= hi {
            hist.overflow += 1;
        } else {
            let k = (((r - lo) / width) as usize).min(bins - 1);
            hist.counts[k] += 1;
        }
    }
    hist
}

/// Outcome counts plus statistics of the accepted accuracies. The standard
/// deviation is the sample (n-1) form, defined as 0 for a single value;
/// statistics of an empty accepted set are absent rather than zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub non_converged: usize,
    pub mid_band: usize,
    pub accepted: usize,
    pub accepted_mean: Option<f64>,
    pub accepted_std: Option<f64>,
    pub accepted_min: Option<f64>,
    pub accepted_max: Option<f64>,
    pub mean_epochs_run: Option<f64>,
}

pub fn summarize(records: &[RealizationRecord]) -> Summary {
    let mut summary = Summary {
        non_converged: 0,
        mid_band: 0,
        accepted: 0,
        accepted_mean: None,
        accepted_std: None,
        accepted_min: None,
        accepted_max: None,
        mean_epochs_run: None,
    };
    let mut accepted_values = Vec::new();
    for rec in records {
        match rec.outcome {
            Outcome::NonConverged => summary.non_converged += 1,
            Outcome::MidBand => summary.mid_band += 1,
            Outcome::Accepted => {
                summary.accepted += 1;
                accepted_values.push(rec.final_accuracy);
            }
        }
    }
    if !records.is_empty() {
        let total: usize = records.iter().map(|r| r.epochs_run).sum();
        summary.mean_epochs_run = Some(total as f64 / records.len() as f64);
    }
    if !accepted_values.is_empty() {
        let n = accepted_values.len() as f64;
        let mean = accepted_values.iter().sum::<f64>() / n;
        let std = if accepted_values.len() > 1 {
            let ss: f64 = accepted_values.iter().map(|v| (v - mean) * (v - mean)).sum();
            (ss / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        summary.accepted_mean = Some(mean);
        summary.accepted_std = Some(std);
        summary.accepted_min = accepted_values.iter().cloned().reduce(f64::min);
        summary.accepted_max = accepted_values.iter().cloned().reduce(f64::max);
    }
    summary
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "outcomes: NON_CONVERGED {} / MID_BAND {} / ACCEPTED {}",
            self.non_converged, self.mid_band, self.accepted
        )?;
        match (self.accepted_mean, self.accepted_std, self.accepted_min, self.accepted_max) {
            (Some(mean), Some(std), Some(min), Some(max)) => writeln!(
                f,
                "accepted accuracy: mean {:.6} std {:.6} min {:.6} max {:.6}",
                mean, std, min, max
            )?,
            _ => writeln!(f, "accepted accuracy: none")?,
        }
        match self.mean_epochs_run {
            Some(mean) => write!(f, "mean epochs run: {mean:.2}"),
            None => write!(f, "mean epochs run: n/a"),
        }
    }
}

// --- CSV surfaces -----------------------------------------------------------
//
// All files are UTF-8 with LF line endings; accuracies carry 6 decimal digits.

pub const RUNS_CSV_HEADER: &str =
    "index,seed,activation,basis,gamma,outcome,final_accuracy,epochs_run,wall_ms";
pub const TRACE_CSV_HEADER: &str = "index,epoch,test_accuracy";
pub const HIST_CSV_HEADER: &str = "bin_lo,bin_hi,count";

fn format_accuracy(r: f64) -> String {
    if r.is_nan() {
        "nan".to_string()
    } else {
        format!("{r:.6}")
    }
}

pub fn write_runs_csv(path: &Path, cfg: &RunConfig, records: &[RealizationRecord]) -> Result<()> {
    let (basis, gamma) = match cfg.activation {
        ActivationName::Neaf => (cfg.basis.to_string(), cfg.gamma.to_string()),
        _ => (String::new(), String::new()),
    };
    let mut out = String::from(RUNS_CSV_HEADER);
    out.push('\n');
    for rec in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            rec.index,
            rec.seed,
            cfg.activation,
            basis,
            gamma,
            rec.outcome,
            format_accuracy(rec.final_accuracy),
            rec.epochs_run,
            rec.wall_ms
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Parses a `runs.csv` back into records (traces are not stored there and
/// come back empty).
pub fn read_runs_csv(path: &Path) -> Result<Vec<RealizationRecord>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Data(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = text.lines();
    match lines.next() {
        Some(header) if header == RUNS_CSV_HEADER => {}
        other => {
            return Err(Error::Format(format!(
                "bad runs.csv header: {other:?}"
            )))
        }
    }
    let mut records = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 9 {
            return Err(Error::Format(format!(
                "runs.csv line {}: expected 9 fields, got {}",
                lineno + 2,
                fields.len()
            )));
        }
        let parse_err = |what: &str| Error::Format(format!("runs.csv line {}: bad {what}", lineno + 2));
        let final_accuracy = if fields[6] == "nan" {
            f64::NAN
        } else {
            fields[6].parse().map_err(|_| parse_err("final_accuracy"))?
        };
        records.push(RealizationRecord {
            index: fields[0].parse().map_err(|_| parse_err("index"))?,
            seed: fields[1].parse().map_err(|_| parse_err("seed"))?,
            outcome: fields[5].parse()?,
            final_accuracy,
            epochs_run: fields[7].parse().map_err(|_| parse_err("epochs_run"))?,
            wall_ms: fields[8].parse().map_err(|_| parse_err("wall_ms"))?,
            trace: Vec::new(),
        });
    }
    Ok(records)
}

pub fn write_trace_csv(path: &Path, records: &[RealizationRecord]) -> Result<()> {
    let mut out = String::from(TRACE_CSV_HEADER);
    out.push('\n');
    for rec in records {
        for &(epoch, accuracy) in &rec.trace {
            out.push_str(&format!("{},{},{:.6}\n", rec.index, epoch, accuracy));
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn write_hist_csv(path: &Path, hist: &Histogram) -> Result<()> {
    let width = (hist.hi - hist.lo) / hist.counts.len() as f64;
    let mut out = String::from(HIST_CSV_HEADER);
    out.push('\n');
    for (k, &count) in hist.counts.iter().enumerate() {
        let bin_lo = hist.lo + k as f64 * width;
        let bin_hi = hist.lo + (k + 1) as f64 * width;
        out.push_str(&format!("{bin_lo:.6},{bin_hi:.6},{count}\n"));
    }
    out.push_str(&format!("underflow,,{}\n", hist.underflow));
    out.push_str(&format!("overflow,,{}\n", hist.overflow));
    std::fs::write(path, out)?;
    Ok(())
}

/// Writes `runs.csv` and `trace.csv` for a finished sweep, then derives
/// `hist.csv` by reading `runs.csv` back. The histogram therefore always
/// reflects the serialized 6-decimal accuracies, which makes a later
/// `report` over the same file byte-identical by construction.
pub fn emit_sweep_outputs(
    out_dir: &Path,
    cfg: &RunConfig,
    records: &[RealizationRecord],
) -> Result<Histogram> {
    std::fs::create_dir_all(out_dir)?;
    write_runs_csv(&out_dir.join("runs.csv"), cfg, records)?;
    write_trace_csv(&out_dir.join("trace.csv"), records)?;
    let parsed = read_runs_csv(&out_dir.join("runs.csv"))?;
    let hist = build_histogram(&parsed, cfg.hist_lo, cfg.hist_hi, cfg.hist_bins);
    write_hist_csv(&out_dir.join("hist.csv"), &hist)?;
    Ok(hist)
}
