//! End-to-end runs: dataset, training, evaluation and the files they leave
//! behind in an output directory.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::baseline::{fit_dictionary_with, DictionaryFit};
use crate::codec::{decode, StateVector};
use crate::dataset::{generate_dataset, read_json, save_images, write_json, DatasetKind, ImageDataset, ImageFormat};
use crate::error::{Error, Result};
use crate::mesh::{mesh_matrix, GivensMesh, Projector};
use crate::metrics::{accuracy_report, csv_err, format_comparison, write_comparison_csv, ComparisonRow, PostProcess};
use crate::trainer::{
    default_target, evaluate, train_with, write_loss_csv, Evaluation, LossNorm, LossRecord, TrainConfig, TrainOutcome,
};

pub const CHECKPOINT_FILE: &str = "model.json";
pub const LOSS_FILE: &str = "loss.csv";
pub const RECONSTRUCTIONS_FILE: &str = "reconstructions.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const CONFIG_ECHO_FILE: &str = "config.json";
pub const BASELINE_LOSS_FILE: &str = "baseline_loss.csv";
pub const BASELINE_SUMMARY_FILE: &str = "baseline_summary.json";
pub const DICTIONARY_FILE: &str = "dictionary.csv";
const CHECKPOINT_VERSION: u32 = 1;

/// Trained meshes plus everything needed to rebuild the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub n: usize,
    pub d: usize,
    pub retained: Vec<usize>,
    pub lc: usize,
    pub lr_layers: usize,
    pub compression: GivensMesh,
    pub reconstruction: GivensMesh,
    pub seed: u64,
    pub config: TrainConfig,
}

impl Checkpoint {
    pub fn from_outcome(outcome: &TrainOutcome, config: &TrainConfig) -> Self {
        Self {
            version: CHECKPOINT_VERSION,
            n: outcome.projector.dim(),
            d: outcome.projector.rank(),
            retained: outcome.projector.retained().to_vec(),
            lc: outcome.u_c.layer_count(),
            lr_layers: outcome.u_r.layer_count(),
            compression: outcome.u_c.clone(),
            reconstruction: outcome.u_r.clone(),
            seed: config.seed,
            config: config.clone(),
        }
    }

    pub fn projector(&self) -> Result<Projector> {
        Projector::new(self.n, self.retained.clone())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let ck: Checkpoint = read_json(path)?;
        if ck.version != CHECKPOINT_VERSION {
            return Err(Error::malformed(path, format!("unsupported checkpoint version {}", ck.version)));
        }
        if ck.compression.dim() != ck.n || ck.reconstruction.dim() != ck.n || ck.retained.len() != ck.d {
            return Err(Error::malformed(path, "mesh dimensions disagree with the header"));
        }
        ck.projector().map_err(|e| Error::malformed(path, e.to_string()))?;
        Ok(ck)
    }
}

/// Flat key-value experiment description. Training keys are those of
/// [`TrainConfig`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    /// Existing dataset; when absent one is generated from the keys below.
    pub data: Option<PathBuf>,
    pub m: usize,
    pub side: usize,
    pub data_seed: u64,
    pub kind: DatasetKind,
    pub out: Option<PathBuf>,
    #[serde(flatten)]
    pub train: TrainConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            data: None,
            m: 25,
            side: 4,
            data_seed: 42,
            kind: DatasetKind::Binary,
            out: None,
            train: TrainConfig::default(),
        }
    }
}

impl ExperimentConfig {
    /// Parses a JSON object, rejecting keys this config does not know.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::InvalidConfig(format!("config is not JSON: {e}")))?;
        Self::from_value(value)
    }

    pub fn from_value(value: serde_json::Value) -> Result<Self> {
        let obj = value
            .as_object()
            .ok_or_else(|| Error::InvalidConfig("config must be a JSON object".into()))?;
        let known = serde_json::to_value(Self::default()).expect("config serializes");
        let known = known.as_object().expect("object");
        if let Some(key) = obj.keys().find(|k| !known.contains_key(*k)) {
            return Err(Error::InvalidConfig(format!("unknown config key {key:?}")));
        }
        serde_json::from_value(value).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn dataset(&self) -> Result<ImageDataset> {
        match &self.data {
            Some(path) => ImageDataset::load(path),
            None => generate_dataset(self.m, self.side, self.data_seed, self.kind),
        }
    }
}

/// Headline numbers of a QN run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub method: String,
    pub samples: usize,
    pub n: usize,
    pub d: usize,
    pub compression_params: usize,
    pub reconstruction_params: usize,
    pub iterations: usize,
    pub final_accuracy: f64,
    pub best_accuracy: f64,
    pub final_l_c: f64,
    pub final_l_r: f64,
    pub min_l_c: f64,
    pub min_l_r: f64,
    pub loss_norm: LossNorm,
    pub wall_time_s: f64,
    pub matrix_size: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineSummary {
    pub method: String,
    pub samples: usize,
    pub n: usize,
    pub sparsity: usize,
    pub iterations: usize,
    pub final_accuracy: f64,
    pub best_accuracy: f64,
    pub final_loss: f64,
    pub loss_norm: LossNorm,
    pub reseeded_atoms: usize,
    pub wall_time_s: f64,
    pub matrix_size: String,
}

#[derive(Debug)]
pub struct RunResult {
    pub outcome: TrainOutcome,
    pub evaluation: Evaluation,
    pub summary: RunSummary,
}

fn matrix_size(n: usize) -> String {
    format!("{n}*{n}")
}

/// Trains on `dataset` and writes the loss curve, checkpoint, reconstructions,
/// summary and config echo to `out`.
pub fn run_training(
    dataset: &ImageDataset,
    config: &TrainConfig,
    out: &Path,
    progress: impl FnMut(&LossRecord),
) -> Result<RunResult> {
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let start = Instant::now();
    let outcome = train_with(&dataset.samples, config, None, progress)?;
    let wall = start.elapsed().as_secs_f64();

    let set = dataset.encoded()?;
    let target = default_target(config, &outcome.projector, set.len());
    let evaluation = evaluate(&dataset.samples, &set, &outcome.u_c, &outcome.projector, &outcome.u_r, &target, config)?;
    let last = outcome.last();
    let summary = RunSummary {
        method: "QN-based".into(),
        samples: dataset.len(),
        n: dataset.dim(),
        d: config.d,
        compression_params: outcome.u_c.param_count(),
        reconstruction_params: outcome.u_r.param_count(),
        iterations: last.iteration,
        final_accuracy: last.accuracy,
        best_accuracy: outcome.best_accuracy(),
        final_l_c: last.l_c,
        final_l_r: last.l_r,
        min_l_c: outcome.min_l_c(),
        min_l_r: outcome.min_l_r(),
        loss_norm: config.loss_norm,
        wall_time_s: if config.record_time { wall } else { 0.0 },
        matrix_size: matrix_size(dataset.dim()),
    };

    write_loss_csv(&outcome.records, &out.join(LOSS_FILE))?;
    Checkpoint::from_outcome(&outcome, config).save(&out.join(CHECKPOINT_FILE))?;
    save_images(&evaluation.reconstructions, dataset.side, &out.join(RECONSTRUCTIONS_FILE), ImageFormat::Csv)?;
    write_json(&out.join(SUMMARY_FILE), &summary)?;
    Ok(RunResult {
        outcome,
        evaluation,
        summary,
    })
}

/// Runs a whole experiment described by `config`, writing into `out` (or
/// `config.out`). A generated dataset is saved under `out/data`.
pub fn run_experiment(config: &ExperimentConfig, out: Option<&Path>, progress: impl FnMut(&LossRecord)) -> Result<RunResult> {
    let out = out
        .map(Path::to_path_buf)
        .or_else(|| config.out.clone())
        .ok_or_else(|| Error::InvalidConfig("no output directory given".into()))?;
    let dataset = config.dataset()?;
    fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    if config.data.is_none() {
        dataset.save(&out.join("data"))?;
    }
    write_json(&out.join(CONFIG_ECHO_FILE), config)?;
    run_training(&dataset, &config.train, &out, progress)
}

/// Scores a checkpoint on a dataset.
pub fn evaluate_checkpoint(ck: &Checkpoint, dataset: &ImageDataset, tol: Option<f64>) -> Result<Evaluation> {
    if dataset.dim() != ck.n {
        return Err(Error::DimensionMismatch {
            expected: ck.n,
            actual: dataset.dim(),
        });
    }
    let mut config = ck.config.clone();
    if let Some(t) = tol {
        config.tol = t;
    }
    let p = ck.projector()?;
    let set = dataset.encoded()?;
    let target = default_target(&config, &p, set.len());
    evaluate(&dataset.samples, &set, &ck.compression, &p, &ck.reconstruction, &target, &config)
}

#[derive(Debug, Clone)]
pub struct BaselineOptions {
    pub sparsity: usize,
    pub iters: usize,
    pub loss_norm: LossNorm,
    pub postprocess: PostProcess,
    pub tol: f64,
    pub record_time: bool,
}

impl Default for BaselineOptions {
    fn default() -> Self {
        Self {
            sparsity: 4,
            iters: 150,
            loss_norm: LossNorm::Mean,
            postprocess: PostProcess::Clamp,
            tol: crate::metrics::DEFAULT_TOLERANCE,
            record_time: true,
        }
    }
}

#[derive(Debug)]
pub struct BaselineResult {
    pub fit: DictionaryFit,
    pub records: Vec<LossRecord>,
    pub reconstructions: Vec<Vec<f64>>,
    pub summary: BaselineSummary,
}

/// K-SVD on the amplitude-encoded samples, scored exactly like the QN
/// pipeline. Losses use the same normalization as the QN run, and the loss
/// curve repeats the single coding loss in both loss columns.
pub fn run_baseline(dataset: &ImageDataset, opts: &BaselineOptions, out: Option<&Path>) -> Result<BaselineResult> {
    let set = dataset.encoded()?;
    let ys: Vec<Vec<f64>> = set.states.iter().map(|s| s.amplitudes.clone()).collect();
    let truth = dataset.pixels();
    let scale = opts.loss_norm.scale(set.len(), set.dim());
    let decode_all = |dict: &crate::baseline::Dictionary, codes: &[Vec<f64>]| -> Vec<Vec<f64>> {
        codes
            .iter()
            .zip(&set.norms)
            .map(|(c, ctx)| opts.postprocess.apply(&decode(&StateVector::new(dict.reconstruct(c)), *ctx)))
            .collect()
    };

    let start = Instant::now();
    let mut records = Vec::with_capacity(opts.iters + 1);
    let mut failure = None;
    let fit = fit_dictionary_with(&ys, opts.sparsity, opts.iters, |iteration, dict, codes, loss| {
        let acc = match accuracy_report(&truth, &decode_all(dict, codes), opts.tol) {
            Ok(r) => r.mean,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        };
        records.push(LossRecord {
            iteration,
            l_c: loss * scale,
            l_r: loss * scale,
            accuracy: acc,
            elapsed_s: if opts.record_time { start.elapsed().as_secs_f64() } else { 0.0 },
        });
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    let wall = start.elapsed().as_secs_f64();
    let reconstructions = decode_all(&fit.dictionary, &fit.codes);
    let last = records.last().expect("fit records iteration 0");
    let summary = BaselineSummary {
        method: "CSC-based".into(),
        samples: dataset.len(),
        n: dataset.dim(),
        sparsity: opts.sparsity,
        iterations: opts.iters,
        final_accuracy: last.accuracy,
        best_accuracy: records.iter().map(|r| r.accuracy).fold(0.0, f64::max),
        final_loss: fit.final_loss() * scale,
        loss_norm: opts.loss_norm,
        reseeded_atoms: fit.reseeded,
        wall_time_s: if opts.record_time { wall } else { 0.0 },
        matrix_size: matrix_size(dataset.dim()),
    };
    if let Some(out) = out {
        fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
        write_loss_csv(&records, &out.join(BASELINE_LOSS_FILE))?;
        write_matrix_csv(&fit.dictionary.atoms, &out.join(DICTIONARY_FILE))?;
        write_json(&out.join(BASELINE_SUMMARY_FILE), &summary)?;
    }
    Ok(BaselineResult {
        fit,
        records,
        reconstructions,
        summary,
    })
}

/// Comparison rows from run directories holding `summary.json` and/or
/// `baseline_summary.json`.
pub fn collect_comparison(runs: &[PathBuf]) -> Result<Vec<ComparisonRow>> {
    let mut rows = Vec::new();
    for dir in runs {
        let qn = dir.join(SUMMARY_FILE);
        if qn.exists() {
            let s: RunSummary = read_json(&qn)?;
            rows.push(ComparisonRow {
                method: s.method,
                accuracy_percent: s.final_accuracy,
                wall_time_s: s.wall_time_s,
                matrix_size: s.matrix_size,
                final_loss: s.final_l_r,
            });
        }
        let base = dir.join(BASELINE_SUMMARY_FILE);
        if base.exists() {
            let s: BaselineSummary = read_json(&base)?;
            rows.push(ComparisonRow {
                method: s.method,
                accuracy_percent: s.final_accuracy,
                wall_time_s: s.wall_time_s,
                matrix_size: s.matrix_size,
                final_loss: s.final_loss,
            });
        }
    }
    if rows.is_empty() {
        return Err(Error::InvalidConfig(format!(
            "no {SUMMARY_FILE} or {BASELINE_SUMMARY_FILE} found in the given run directories"
        )));
    }
    Ok(rows)
}

/// Writes the comparison CSV and its aligned-text twin (same path, `.txt`).
pub fn write_comparison(rows: &[ComparisonRow], csv_path: &Path) -> Result<String> {
    if let Some(parent) = csv_path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    write_comparison_csv(rows, csv_path)?;
    let text = format_comparison(rows);
    let txt = csv_path.with_extension("txt");
    fs::write(&txt, &text).map_err(|e| Error::io(&txt, e))?;
    Ok(text)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixChoice {
    Compression,
    Reconstruction,
    /// `U_R P1 U_C`
    Pipeline,
}

pub fn checkpoint_matrix(ck: &Checkpoint, which: MatrixChoice) -> Result<DMatrix<f64>> {
    Ok(match which {
        MatrixChoice::Compression => mesh_matrix(&ck.compression),
        MatrixChoice::Reconstruction => mesh_matrix(&ck.reconstruction),
        MatrixChoice::Pipeline => {
            let mut p1 = DMatrix::zeros(ck.n, ck.n);
            for &j in ck.projector()?.retained() {
                p1[(j, j)] = 1.0;
            }
            mesh_matrix(&ck.reconstruction) * p1 * mesh_matrix(&ck.compression)
        }
    })
}

pub fn write_matrix_csv(m: &DMatrix<f64>, path: &Path) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    for row in m.row_iter() {
        w.write_record(row.iter().map(f64::to_string)).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_matrix_csv(path: &Path) -> Result<DMatrix<f64>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let row = rec
            .iter()
            .map(|v| v.trim().parse::<f64>().map_err(|e| Error::malformed(path, e.to_string())))
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(Error::malformed(path, "matrix is not square"));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

/// Largest `|decode(encode(x)) - x|` over the dataset.
pub fn roundtrip_error(dataset: &ImageDataset) -> Result<f64> {
    let set = dataset.encoded()?;
    let mut worst: f64 = 0.0;
    for ((s, ctx), x) in set.states.iter().zip(&set.norms).zip(&dataset.samples) {
        for (a, b) in decode(s, *ctx).iter().zip(&x.pixels) {
            worst = worst.max((a - b).abs());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trainer::GradMode;

    fn quick_config() -> ExperimentConfig {
        ExperimentConfig {
            m: 6,
            side: 2,
            train: TrainConfig {
                lc: 2,
                lr_layers: 2,
                d: 2,
                iters: 5,
                eta: 0.5,
                grad_mode: GradMode::Analytic,
                record_time: false,
                ..TrainConfig::default()
            },
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn config_parsing() {
        let c = ExperimentConfig::from_json(r#"{"m": 10, "eta": 0.2, "lr_layers": 3, "kind": "grayscale"}"#).unwrap();
        assert_eq!(c.m, 10);
        assert_eq!(c.train.eta, 0.2);
        assert_eq!(c.train.lr_layers, 3);
        assert_eq!(c.kind, DatasetKind::Grayscale);
        assert_eq!(c.train.lc, 12);
        assert!(matches!(
            ExperimentConfig::from_json(r#"{"learning_rate": 0.1}"#),
            Err(Error::InvalidConfig(_))
        ));
        assert!(ExperimentConfig::from_json("[1]").is_err());
        assert!(ExperimentConfig::from_json(r#"{"eta": "fast"}"#).is_err());
    }

    #[test]
    fn experiment_writes_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let res = run_experiment(&quick_config(), Some(dir.path()), |_| {}).unwrap();
        for f in [LOSS_FILE, CHECKPOINT_FILE, RECONSTRUCTIONS_FILE, SUMMARY_FILE, CONFIG_ECHO_FILE, "data/manifest.json"] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
        assert_eq!(res.summary.compression_params, 6);
        let echoed = ExperimentConfig::load(&dir.path().join(CONFIG_ECHO_FILE)).unwrap();
        assert_eq!(echoed, quick_config());

        let ck = Checkpoint::load(&dir.path().join(CHECKPOINT_FILE)).unwrap();
        assert_eq!(ck.compression, res.outcome.u_c);
        let ds = ImageDataset::load(&dir.path().join("data")).unwrap();
        let eval = evaluate_checkpoint(&ck, &ds, None).unwrap();
        assert_eq!(eval.accuracy.mean, res.summary.final_accuracy);
        assert_eq!(eval.l_r, res.summary.final_l_r);
    }

    #[test]
    fn missing_dataset_names_the_path() {
        let dir = tempfile::tempdir().unwrap();
        let config = ExperimentConfig {
            data: Some(dir.path().join("nope")),
            ..quick_config()
        };
        let err = run_experiment(&config, Some(dir.path()), |_| {}).unwrap_err();
        assert!(err.to_string().contains("nope"), "{err}");
        assert_ne!(err.exit_code(), 0);
    }

    #[test]
    fn baseline_and_comparison() {
        let dir = tempfile::tempdir().unwrap();
        run_experiment(&quick_config(), Some(dir.path()), |_| {}).unwrap();
        let ds = ImageDataset::load(&dir.path().join("data")).unwrap();
        let opts = BaselineOptions {
            sparsity: 2,
            iters: 3,
            ..BaselineOptions::default()
        };
        let b = run_baseline(&ds, &opts, Some(dir.path())).unwrap();
        assert_eq!(b.records.len(), 4);
        assert!(dir.path().join(DICTIONARY_FILE).exists());
        let rows = collect_comparison(&[dir.path().to_path_buf()]).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].method, "QN-based");
        assert_eq!(rows[1].matrix_size, "4*4");
        let text = write_comparison(&rows, &dir.path().join("table1.csv")).unwrap();
        assert!(text.contains("CSC-based"));
        assert!(dir.path().join("table1.txt").exists());
        assert!(collect_comparison(&[dir.path().join("data")]).is_err());
    }

    #[test]
    fn matrix_export_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let res = run_experiment(&quick_config(), Some(dir.path()), |_| {}).unwrap();
        let ck = Checkpoint::from_outcome(&res.outcome, &quick_config().train);
        let m = checkpoint_matrix(&ck, MatrixChoice::Compression).unwrap();
        let path = dir.path().join("u.csv");
        write_matrix_csv(&m, &path).unwrap();
        assert_eq!(read_matrix_csv(&path).unwrap(), m);
        let pipe = checkpoint_matrix(&ck, MatrixChoice::Pipeline).unwrap();
        assert_eq!(pipe.rank(1e-10), 2);
    }

    #[test]
    fn roundtrip_error_is_tiny() {
        let ds = generate_dataset(10, 4, 1, DatasetKind::Grayscale).unwrap();
        assert!(roundtrip_error(&ds).unwrap() <= 1e-12);
    }
}
