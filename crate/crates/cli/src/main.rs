use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{Map, Value};

use qnet_core::experiment::{
    checkpoint_matrix, collect_comparison, evaluate_checkpoint, roundtrip_error, run_baseline, run_experiment,
    write_comparison, write_matrix_csv, BaselineOptions, Checkpoint, ExperimentConfig, MatrixChoice,
};
use qnet_core::{generate_dataset, save_images, DatasetKind, Error, ImageDataset, ImageFormat, LossNorm, PostProcess};

#[derive(Parser)]
#[command(name = "qnet", version, about = "Image compression with trainable beam-splitter meshes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded surrogate image set.
    GenData(GenDataArgs),
    /// Train compression and reconstruction meshes.
    Train(Box<TrainArgs>),
    /// Score a checkpoint on a dataset.
    Eval(EvalArgs),
    /// Fit the K-SVD sparse-coding baseline.
    Baseline(BaselineArgs),
    /// Collect run summaries into a comparison table.
    Compare(CompareArgs),
    /// Write a trained mesh as a dense matrix.
    ExportUnitary(ExportArgs),
    /// Encode-decode self-test on a dataset.
    Roundtrip(RoundtripArgs),
}

#[derive(Args)]
struct GenDataArgs {
    #[arg(long, default_value_t = 25)]
    m: usize,
    #[arg(long, default_value_t = 4)]
    side: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value = "binary")]
    kind: DatasetKind,
    #[arg(long)]
    out: PathBuf,
    /// Also write the images as pbm or pgm next to images.csv.
    #[arg(long)]
    format: Option<ImageFormat>,
}

#[derive(Args)]
struct TrainArgs {
    /// Flat JSON config; flags below override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    side: Option<usize>,
    #[arg(long)]
    data_seed: Option<u64>,
    #[arg(long)]
    kind: Option<String>,
    #[arg(long)]
    lc: Option<usize>,
    #[arg(long)]
    lr_layers: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    grad_mode: Option<String>,
    #[arg(long)]
    loss_norm: Option<String>,
    #[arg(long)]
    schedule: Option<String>,
    #[arg(long)]
    target_mode: Option<String>,
    #[arg(long)]
    update: Option<String>,
    #[arg(long)]
    init: Option<String>,
    #[arg(long)]
    init_theta: Option<f64>,
    #[arg(long)]
    postprocess: Option<String>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    stop_below: Option<f64>,
    #[arg(long)]
    record_time: Option<bool>,
    /// Print a progress line every this many iterations (0 = quiet).
    #[arg(long, default_value_t = 10)]
    log_every: usize,
}

impl TrainArgs {
    fn overrides(&self) -> Vec<(&'static str, Option<Value>)> {
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| Value::from(p.to_string_lossy().into_owned()));
        vec![
            ("data", path(&self.data)),
            ("out", path(&self.out)),
            ("m", self.m.map(Value::from)),
            ("side", self.side.map(Value::from)),
            ("data_seed", self.data_seed.map(Value::from)),
            ("kind", self.kind.clone().map(Value::from)),
            ("lc", self.lc.map(Value::from)),
            ("lr_layers", self.lr_layers.map(Value::from)),
            ("d", self.d.map(Value::from)),
            ("eta", self.eta.map(Value::from)),
            ("iters", self.iters.map(Value::from)),
            ("delta", self.delta.map(Value::from)),
            ("seed", self.seed.map(Value::from)),
            ("grad_mode", self.grad_mode.clone().map(Value::from)),
            ("loss_norm", self.loss_norm.clone().map(Value::from)),
            ("schedule", self.schedule.clone().map(Value::from)),
            ("target_mode", self.target_mode.clone().map(Value::from)),
            ("update", self.update.clone().map(Value::from)),
            ("init", self.init.clone().map(Value::from)),
            ("init_theta", self.init_theta.map(Value::from)),
            ("postprocess", self.postprocess.clone().map(Value::from)),
            ("tol", self.tol.map(Value::from)),
            ("stop_below", self.stop_below.map(Value::from)),
            ("record_time", self.record_time.map(Value::from)),
        ]
    }

    fn resolve(&self) -> anyhow::Result<ExperimentConfig> {
        let mut obj = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
                    path: path.clone(),
                    source: e,
                })?;
                match serde_json::from_str::<Value>(&text) {
                    Ok(Value::Object(map)) => map,
                    Ok(_) => return Err(Error::InvalidConfig(format!("{} is not a JSON object", path.display())).into()),
                    Err(e) => return Err(Error::InvalidConfig(format!("{}: {e}", path.display())).into()),
                }
            }
            None => Map::new(),
        };
        for (key, value) in self.overrides() {
            if let Some(v) = value {
                obj.insert(key.to_string(), v);
            }
        }
        Ok(ExperimentConfig::from_value(Value::Object(obj))?)
    }
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Defaults to the tolerance stored in the checkpoint.
    #[arg(long)]
    tol: Option<f64>,
    /// Write reconstructions here (format from the extension).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BaselineArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 4)]
    sparsity: usize,
    #[arg(long, default_value_t = 150)]
    iters: usize,
    #[arg(long, default_value = "mean")]
    loss_norm: Norm,
    #[arg(long, default_value = "clamp")]
    postprocess: Post,
    #[arg(long, default_value_t = 0.01)]
    tol: f64,
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    record_time: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Norm {
    Mean,
    Sum,
}

#[derive(Clone, Copy, ValueEnum)]
enum Post {
    Clamp,
    Binarize,
    None,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long, num_args = 1.., required = true)]
    runs: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Which {
    Compression,
    Reconstruction,
    Pipeline,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long, default_value = "compression")]
    which: Which,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RoundtripArgs {
    /// Dataset to check; a generated one is used when absent.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, default_value_t = 25)]
    m: usize,
    #[arg(long, default_value_t = 4)]
    side: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value = "binary")]
    kind: DatasetKind,
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
}

fn gen_data(args: &GenDataArgs) -> anyhow::Result<()> {
    let ds = generate_dataset(args.m, args.side, args.seed, args.kind)?;
    ds.save(&args.out)?;
    if let Some(format) = args.format.filter(|f| *f != ImageFormat::Csv) {
        let ext = match format {
            ImageFormat::Pbm => "pbm",
            _ => "pgm",
        };
        save_images(&ds.pixels(), ds.side, &args.out.join(format!("images.{ext}")), format)?;
    }
    println!("wrote {} images of {}x{} to {}", ds.len(), ds.side, ds.side, args.out.display());
    Ok(())
}

fn train(args: &TrainArgs) -> anyhow::Result<()> {
    let config = args.resolve()?;
    let out = config
        .out
        .clone()
        .context("no output directory: pass --out or set \"out\" in the config")?;
    let every = args.log_every;
    let result = run_experiment(&config, Some(&out), |r| {
        if every > 0 && r.iteration % every == 0 {
            eprintln!(
                "iter {:>5}  L_C {:.6}  L_R {:.6}  acc {:.2}%",
                r.iteration, r.l_c, r.l_r, r.accuracy
            );
        }
    })?;
    let s = &result.summary;
    println!("accuracy {:.2}% (best {:.2}%)", s.final_accuracy, s.best_accuracy);
    println!("min L_C {:.6}  min L_R {:.6}", s.min_l_c, s.min_l_r);
    println!("parameters {} + {}", s.compression_params, s.reconstruction_params);
    println!("artifacts in {}", out.display());
    Ok(())
}

fn eval(args: &EvalArgs) -> anyhow::Result<()> {
    let ck = Checkpoint::load(&args.checkpoint)?;
    let ds = ImageDataset::load(&args.data)?;
    let ev = evaluate_checkpoint(&ck, &ds, args.tol)?;
    println!("accuracy {:.2}% at tol {}", ev.accuracy.mean, ev.accuracy.tolerance);
    println!("L_C {:.6}  L_R {:.6}", ev.l_c, ev.l_r);
    if let Some(out) = &args.out {
        save_images(&ev.reconstructions, ds.side, out, ImageFormat::from_path(out)?)?;
    }
    Ok(())
}

fn baseline(args: &BaselineArgs) -> anyhow::Result<()> {
    let ds = ImageDataset::load(&args.data)?;
    let opts = BaselineOptions {
        sparsity: args.sparsity,
        iters: args.iters,
        loss_norm: match args.loss_norm {
            Norm::Mean => LossNorm::Mean,
            Norm::Sum => LossNorm::Sum,
        },
        postprocess: match args.postprocess {
            Post::Clamp => PostProcess::Clamp,
            Post::Binarize => PostProcess::Binarize,
            Post::None => PostProcess::None,
        },
        tol: args.tol,
        record_time: args.record_time,
    };
    let res = run_baseline(&ds, &opts, Some(&args.out))?;
    let s = &res.summary;
    println!("accuracy {:.2}%  final loss {:.6}", s.final_accuracy, s.final_loss);
    println!("artifacts in {}", args.out.display());
    Ok(())
}

fn compare(args: &CompareArgs) -> anyhow::Result<()> {
    let rows = collect_comparison(&args.runs)?;
    print!("{}", write_comparison(&rows, &args.out)?);
    Ok(())
}

fn export(args: &ExportArgs) -> anyhow::Result<()> {
    let ck = Checkpoint::load(&args.checkpoint)?;
    let which = match args.which {
        Which::Compression => MatrixChoice::Compression,
        Which::Reconstruction => MatrixChoice::Reconstruction,
        Which::Pipeline => MatrixChoice::Pipeline,
    };
    let m = checkpoint_matrix(&ck, which)?;
    write_matrix_csv(&m, &args.out)?;
    println!("wrote {}x{} matrix to {}", m.nrows(), m.ncols(), args.out.display());
    Ok(())
}

fn roundtrip(args: &RoundtripArgs) -> anyhow::Result<()> {
    let ds = match &args.data {
        Some(p) => ImageDataset::load(p)?,
        None => generate_dataset(args.m, args.side, args.seed, args.kind)?,
    };
    let err = roundtrip_error(&ds)?;
    println!("max |decode(encode(x)) - x| = {err:e} over {} images", ds.len());
    if err > args.tol {
        bail!("roundtrip error {err:e} exceeds {:e}", args.tol);
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(e) => e.exit_code() as u8,
        None => 1,
    }
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    match &cli.command {
        Command::GenData(a) => gen_data(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Baseline(a) => baseline(a),
        Command::Compare(a) => compare(a),
        Command::ExportUnitary(a) => export(a),
        Command::Roundtrip(a) => roundtrip(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
