//! Gradient-descent training of the compression and reconstruction meshes.
//!
//! Each iteration sweeps the compression mesh gate by gate, then the
//! reconstruction mesh against the freshly compressed states. With the
//! default `literal` update rule every angle moves as soon as its partial is
//! known.

mod gradient;
mod loss;

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use gradient::{analytic_partial, contract, fd_partial, gd_step, loss_gradient, sweep, GradMode, GradientVector};
pub use loss::{
    compress_all, compression_loss, reconstruction_loss, CompressionTarget, LossNorm, Objective, TargetMode,
};

use crate::codec::{decode, EncodedSet, ImageSample};
use crate::error::{Error, Result};
use crate::mesh::{apply_mesh, init_mesh, GateOrder, GivensMesh, InitScheme, Projector};
use crate::metrics::{accuracy_report, csv_err, AccuracyReport, PostProcess, DEFAULT_TOLERANCE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Schedule {
    /// Compression sweep then reconstruction sweep, every iteration.
    #[default]
    Alternating,
    /// All compression iterations first, then all reconstruction iterations.
    Sequential,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UpdateRule {
    /// Update each angle immediately after its partial.
    #[default]
    Literal,
    /// Take every partial at fixed angles, then update all at once.
    Batch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitKind {
    #[default]
    Random,
    Uniform,
}

/// Training hyper-parameters. Field names double as config-file keys and
/// command-line flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Compression mesh layers.
    pub lc: usize,
    /// Reconstruction mesh layers.
    pub lr_layers: usize,
    /// Retained dimension.
    pub d: usize,
    pub eta: f64,
    pub iters: usize,
    pub delta: f64,
    pub seed: u64,
    pub grad_mode: GradMode,
    pub loss_norm: LossNorm,
    pub schedule: Schedule,
    pub target_mode: TargetMode,
    pub update: UpdateRule,
    pub init: InitKind,
    /// Angle used by `init = uniform`.
    pub init_theta: f64,
    pub postprocess: PostProcess,
    /// Pixel tolerance for accuracy.
    pub tol: f64,
    /// Stop once both losses fall to this value. Off by default.
    pub stop_below: Option<f64>,
    /// When false, `elapsed_s` is written as 0 so loss files are reproducible.
    pub record_time: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lc: 12,
            lr_layers: 14,
            d: 4,
            eta: 0.01,
            iters: 150,
            delta: 1e-8,
            seed: 7,
            grad_mode: GradMode::FiniteDifference,
            loss_norm: LossNorm::Mean,
            schedule: Schedule::Alternating,
            target_mode: TargetMode::Leakage,
            update: UpdateRule::Literal,
            init: InitKind::Random,
            init_theta: std::f64::consts::FRAC_PI_4,
            postprocess: PostProcess::Clamp,
            tol: DEFAULT_TOLERANCE,
            stop_below: None,
            record_time: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return bad(format!("eta must be positive, got {}", self.eta));
        }
        if self.delta.is_nan() || self.delta <= 0.0 {
            return bad(format!("delta must be positive, got {}", self.delta));
        }
        if self.d == 0 || self.d > n {
            return bad(format!("d must satisfy 0 < d <= {n}, got {}", self.d));
        }
        if self.lc == 0 || self.lr_layers == 0 {
            return bad("both meshes need at least one layer".into());
        }
        if self.tol.is_nan() || self.tol < 0.0 {
            return bad(format!("tol must be nonnegative, got {}", self.tol));
        }
        Ok(())
    }

    fn init_scheme(&self) -> InitScheme {
        match self.init {
            InitKind::Random => InitScheme::Random,
            InitKind::Uniform => InitScheme::Uniform(self.init_theta),
        }
    }

    /// Fresh meshes: compression applies gates in ascending order,
    /// reconstruction in descending order.
    pub fn initial_meshes(&self, n: usize) -> Result<(GivensMesh, GivensMesh)> {
        let u_c = init_mesh(self.lc, n, self.init_scheme(), GateOrder::Ascending, self.seed)?;
        let u_r = init_mesh(
            self.lr_layers,
            n,
            self.init_scheme(),
            GateOrder::Descending,
            self.seed.wrapping_add(1),
        )?;
        Ok((u_c, u_r))
    }
}

/// Losses and accuracy after one training iteration (iteration 0 is the
/// untrained state).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub iteration: usize,
    pub l_c: f64,
    pub l_r: f64,
    pub accuracy: f64,
    pub elapsed_s: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub u_c: GivensMesh,
    pub u_r: GivensMesh,
    pub projector: Projector,
    pub records: Vec<LossRecord>,
}

impl TrainOutcome {
    pub fn last(&self) -> &LossRecord {
        self.records.last().expect("training always records iteration 0")
    }

    pub fn min_l_c(&self) -> f64 {
        self.records.iter().map(|r| r.l_c).fold(f64::INFINITY, f64::min)
    }

    pub fn min_l_r(&self) -> f64 {
        self.records.iter().map(|r| r.l_r).fold(f64::INFINITY, f64::min)
    }

    pub fn best_accuracy(&self) -> f64 {
        self.records.iter().map(|r| r.accuracy).fold(0.0, f64::max)
    }

    pub fn at(&self, iteration: usize) -> Option<&LossRecord> {
        self.records.iter().find(|r| r.iteration == iteration)
    }
}

/// Full pipeline on a dataset: decoded reconstructions and their scores.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub reconstructions: Vec<Vec<f64>>,
    pub accuracy: AccuracyReport,
    pub l_c: f64,
    pub l_r: f64,
}

pub fn evaluate(
    samples: &[ImageSample],
    set: &EncodedSet,
    u_c: &GivensMesh,
    p: &Projector,
    u_r: &GivensMesh,
    target: &CompressionTarget,
    config: &TrainConfig,
) -> Result<Evaluation> {
    let compressed = compress_all(set, u_c, p)?;
    let l_c = Objective::compression(set, p, target, config.loss_norm)?.loss(u_c);
    let l_r = Objective::reconstruction(set, &compressed, config.loss_norm)?.loss(u_r);
    let reconstructions = compressed
        .iter()
        .zip(&set.norms)
        .map(|(c, ctx)| Ok(config.postprocess.apply(&decode(&apply_mesh(c, u_r)?, *ctx))))
        .collect::<Result<Vec<_>>>()?;
    let truth: Vec<Vec<f64>> = samples.iter().map(|s| s.pixels.clone()).collect();
    let accuracy = accuracy_report(&truth, &reconstructions, config.tol)?;
    Ok(Evaluation {
        reconstructions,
        accuracy,
        l_c,
        l_r,
    })
}

pub fn default_target(config: &TrainConfig, p: &Projector, samples: usize) -> CompressionTarget {
    match config.target_mode {
        TargetMode::Leakage => CompressionTarget::Leakage,
        TargetMode::Explicit => CompressionTarget::uniform(p, samples),
    }
}

pub fn train(samples: &[ImageSample], config: &TrainConfig) -> Result<TrainOutcome> {
    train_with(samples, config, None, |_| {})
}

/// Trains from freshly initialized meshes. `target` overrides the one implied
/// by `config.target_mode`; `progress` sees every record as it is produced.
pub fn train_with(
    samples: &[ImageSample],
    config: &TrainConfig,
    target: Option<CompressionTarget>,
    progress: impl FnMut(&LossRecord),
) -> Result<TrainOutcome> {
    if samples.is_empty() {
        return Err(Error::InvalidConfig("dataset is empty".into()));
    }
    let n = samples[0].len();
    config.validate(n)?;
    let (u_c, u_r) = config.initial_meshes(n)?;
    train_from(samples, config, u_c, u_r, target, progress)
}

pub fn train_from(
    samples: &[ImageSample],
    config: &TrainConfig,
    mut u_c: GivensMesh,
    mut u_r: GivensMesh,
    target: Option<CompressionTarget>,
    mut progress: impl FnMut(&LossRecord),
) -> Result<TrainOutcome> {
    let set = EncodedSet::encode_all(samples)?;
    let n = set.dim();
    config.validate(n)?;
    let p = Projector::tail(n, config.d)?;
    let target = target.unwrap_or_else(|| default_target(config, &p, set.len()));
    let c_obj = Objective::compression(&set, &p, &target, config.loss_norm)?;
    let immediate = config.update == UpdateRule::Literal;

    let start = Instant::now();
    let elapsed = || if config.record_time { start.elapsed().as_secs_f64() } else { 0.0 };
    let mut records = Vec::with_capacity(config.iters + 1);
    let mut record = |iteration: usize, u_c: &GivensMesh, u_r: &GivensMesh, records: &mut Vec<LossRecord>| {
        let eval = evaluate(samples, &set, u_c, &p, u_r, &target, config)?;
        if !eval.l_c.is_finite() || !eval.l_r.is_finite() {
            return Err(Error::NonFiniteLoss { iteration });
        }
        let rec = LossRecord {
            iteration,
            l_c: eval.l_c,
            l_r: eval.l_r,
            accuracy: eval.accuracy.mean,
            elapsed_s: elapsed(),
        };
        progress(&rec);
        records.push(rec);
        Ok(())
    };
    record(0, &u_c, &u_r, &mut records)?;

    let steps: Vec<(bool, bool)> = match config.schedule {
        Schedule::Alternating => vec![(true, true); config.iters],
        Schedule::Sequential => {
            let mut s = vec![(true, false); config.iters];
            s.extend(vec![(false, true); config.iters]);
            s
        }
    };
    for (t, (train_c, train_r)) in steps.into_iter().enumerate() {
        if train_c {
            sweep(&c_obj, &mut u_c, config.grad_mode, config.delta, config.eta, immediate);
        }
        if train_r {
            let compressed = compress_all(&set, &u_c, &p)?;
            let r_obj = Objective::reconstruction(&set, &compressed, config.loss_norm)?;
            sweep(&r_obj, &mut u_r, config.grad_mode, config.delta, config.eta, immediate);
        }
        record(t + 1, &u_c, &u_r, &mut records)?;
        if let Some(eps) = config.stop_below {
            let last = records.last().expect("just pushed");
            if last.l_c <= eps && last.l_r <= eps {
                break;
            }
        }
    }

    Ok(TrainOutcome {
        u_c,
        u_r,
        projector: p,
        records,
    })
}

pub const LOSS_CSV_HEADER: [&str; 5] = ["iteration", "L_C", "L_R", "accuracy_percent", "elapsed_s"];

pub fn write_loss_csv(records: &[LossRecord], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(LOSS_CSV_HEADER).map_err(|e| csv_err(path, e))?;
    for r in records {
        w.write_record([
            r.iteration.to_string(),
            r.l_c.to_string(),
            r.l_r.to_string(),
            r.accuracy.to_string(),
            r.elapsed_s.to_string(),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_loss_csv(path: &Path) -> Result<Vec<LossRecord>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let headers = r.headers().map_err(|e| csv_err(path, e))?.clone();
    if headers.iter().ne(LOSS_CSV_HEADER) {
        return Err(Error::malformed(path, format!("unexpected header {headers:?}")));
    }
    let mut out = Vec::new();
    for row in r.records() {
        let row = row.map_err(|e| csv_err(path, e))?;
        let num = |i: usize| -> Result<f64> {
            row.get(i)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::malformed(path, format!("bad value in column {}", LOSS_CSV_HEADER[i])))
        };
        let iteration = row
            .get(0)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::malformed(path, "bad iteration"))?;
        out.push(LossRecord {
            iteration,
            l_c: num(1)?,
            l_r: num(2)?,
            accuracy: num(3)?,
            elapsed_s: num(4)?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_samples() -> Vec<ImageSample> {
        [
            [1.0, 0.0, 0.0, 1.0],
            [0.0, 1.0, 1.0, 0.0],
            [1.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 1.0],
            [1.0, 1.0, 1.0, 0.0],
        ]
        .iter()
        .enumerate()
        .map(|(i, p)| ImageSample::new(i, p.to_vec()))
        .collect()
    }

    fn small_config() -> TrainConfig {
        TrainConfig {
            lc: 2,
            lr_layers: 2,
            d: 2,
            eta: 0.5,
            iters: 20,
            grad_mode: GradMode::Analytic,
            record_time: false,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn defaults_match_reference_configuration() {
        let c = TrainConfig::default();
        assert_eq!((c.lc, c.lr_layers, c.d, c.iters), (12, 14, 4, 150));
        assert_eq!(c.eta, 0.01);
        assert_eq!(c.delta, 1e-8);
    }

    #[test]
    fn zero_iterations_returns_initial_meshes() {
        let config = TrainConfig { iters: 0, ..small_config() };
        let out = train(&tiny_samples(), &config).unwrap();
        let (u_c, u_r) = config.initial_meshes(4).unwrap();
        assert_eq!(out.u_c, u_c);
        assert_eq!(out.u_r, u_r);
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.records[0].iteration, 0);
    }

    #[test]
    fn training_is_deterministic() {
        let a = train(&tiny_samples(), &small_config()).unwrap();
        let b = train(&tiny_samples(), &small_config()).unwrap();
        assert_eq!(a.records, b.records);
        assert_eq!(a.u_c, b.u_c);
        assert_eq!(a.u_r, b.u_r);
    }

    #[test]
    fn training_keeps_topology_and_reduces_loss() {
        let config = small_config();
        let out = train(&tiny_samples(), &config).unwrap();
        assert_eq!(out.u_c.param_count(), 2 * 3);
        assert_eq!(out.u_r.param_count(), 2 * 3);
        assert!(out.records.iter().all(|r| r.l_c >= 0.0 && r.l_r >= 0.0));
        assert!(out.last().l_c < out.records[0].l_c);
        assert!(out.last().l_r < out.records[0].l_r);
    }

    #[test]
    fn sequential_schedule_runs_both_phases() {
        let config = TrainConfig {
            schedule: Schedule::Sequential,
            iters: 5,
            ..small_config()
        };
        let out = train(&tiny_samples(), &config).unwrap();
        assert_eq!(out.records.len(), 11);
        let (u_c0, u_r0) = config.initial_meshes(4).unwrap();
        assert_ne!(out.u_c, u_c0);
        assert_ne!(out.u_r, u_r0);
    }

    #[test]
    fn batch_and_explicit_modes_run() {
        let config = TrainConfig {
            update: UpdateRule::Batch,
            target_mode: TargetMode::Explicit,
            grad_mode: GradMode::FiniteDifference,
            ..small_config()
        };
        let out = train(&tiny_samples(), &config).unwrap();
        assert!(out.last().l_c <= out.records[0].l_c);
    }

    #[test]
    fn non_finite_angle_is_reported() {
        let config = small_config();
        let (mut u_c, u_r) = config.initial_meshes(4).unwrap();
        u_c.thetas_mut()[1] = f64::INFINITY;
        assert!(matches!(
            train_from(&tiny_samples(), &config, u_c, u_r, None, |_| {}),
            Err(Error::NonFiniteLoss { iteration: 0 })
        ));
    }

    #[test]
    fn stop_below_ends_early() {
        let config = TrainConfig {
            stop_below: Some(f64::INFINITY),
            ..small_config()
        };
        assert_eq!(train(&tiny_samples(), &config).unwrap().records.len(), 2);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let s = tiny_samples();
        for config in [
            TrainConfig { eta: 0.0, ..small_config() },
            TrainConfig { d: 5, ..small_config() },
            TrainConfig { d: 0, ..small_config() },
            TrainConfig { delta: -1.0, ..small_config() },
            TrainConfig { lc: 0, ..small_config() },
        ] {
            assert!(matches!(train(&s, &config), Err(Error::InvalidConfig(_))), "{config:?}");
        }
        assert!(train(&[], &small_config()).is_err());
    }

    #[test]
    fn config_json_uses_field_names() {
        let json = serde_json::to_value(TrainConfig::default()).unwrap();
        assert_eq!(json["lr_layers"], 14);
        assert_eq!(json["grad_mode"], "finite-difference");
        assert_eq!(json["loss_norm"], "mean");
        let parsed: TrainConfig = serde_json::from_str(r#"{"eta": 0.1, "update": "batch"}"#).unwrap();
        assert_eq!(parsed.eta, 0.1);
        assert_eq!(parsed.update, UpdateRule::Batch);
        assert_eq!(parsed.lc, 12);
        assert!(serde_json::from_str::<TrainConfig>(r#"{"learning_rate": 0.1}"#).is_err());
    }

    #[test]
    fn loss_csv_roundtrip() {
        let out = train(&tiny_samples(), &TrainConfig { iters: 3, ..small_config() }).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("loss.csv");
        write_loss_csv(&out.records, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("iteration,L_C,L_R,accuracy_percent,elapsed_s\n"));
        assert_eq!(read_loss_csv(&path).unwrap(), out.records);
    }
}
