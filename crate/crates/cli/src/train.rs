use crate::error::CliError;
use crate::DataRoot;
use clap::Args;
use nwa_core::datagen::load_dataset;
use nwa_core::pipeline::{train_with, write_loss_csv, LossRow, Model, NwaConfig, Variant};
use serde::Deserialize;
use std::path::{Path, PathBuf};

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Dataset directory [default: <data-root>/easy].
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[command(flatten)]
    pub root: DataRoot,
    /// TOML file with any of the settings below; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// nwa, bba, na, admna or nsna [default: nwa].
    #[arg(long)]
    pub variant: Option<Variant>,
    /// [default: 30]
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Adam learning rate [default: 0.001].
    #[arg(long)]
    pub lr: Option<f64>,
    /// Weight of the path term [default: 1].
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Weight of the expansion term [default: 0.1].
    #[arg(long)]
    pub beta: Option<f64>,
    /// Black-box interpolation strength [default: 20].
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Neural A* temperature [default: square root of the grid width].
    #[arg(long)]
    pub tau: Option<f64>,
    /// Lower end of the training eps range [default: 0].
    #[arg(long)]
    pub eps_min: Option<f64>,
    /// Upper end of the training eps range [default: 9].
    #[arg(long)]
    pub eps_max: Option<f64>,
    /// Samples per optimiser step [default: 64].
    #[arg(long)]
    pub batch: Option<usize>,
    /// Smallest predicted cost [default: 1].
    #[arg(long)]
    pub w_min: Option<f64>,
    /// Largest predicted cost [default: 10].
    #[arg(long)]
    pub w_max: Option<f64>,
    /// Seeds initialisation, shuffling and eps draws [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Checkpoint path [default: <variant>-seed<seed>.ckpt].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Loss log path [default: checkpoint path with .loss.csv].
    #[arg(long)]
    pub loss_csv: Option<PathBuf>,
}

/// Settings accepted in the `--config` file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainFile {
    pub variant: Option<Variant>,
    pub epochs: Option<usize>,
    pub lr: Option<f64>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub lambda: Option<f64>,
    pub tau: Option<f64>,
    pub eps_min: Option<f64>,
    pub eps_max: Option<f64>,
    pub batch: Option<usize>,
    pub w_min: Option<f64>,
    pub w_max: Option<f64>,
    pub seed: Option<u64>,
}

pub struct TrainPlan {
    pub cfg: NwaConfig,
    pub epochs: usize,
    pub seed: u64,
}

/// Flags over file over built-in defaults.
pub fn resolve(args: &TrainArgs, file: &TrainFile) -> Result<TrainPlan, CliError> {
    let pick = |flag: Option<f64>, file: Option<f64>, default: f64| flag.or(file).unwrap_or(default);
    let variant = args.variant.or(file.variant).unwrap_or(Variant::Nwa);
    let d = NwaConfig::for_variant(variant);
    let cfg = NwaConfig {
        w_min: pick(args.w_min, file.w_min, d.w_min),
        w_max: pick(args.w_max, file.w_max, d.w_max),
        lambda: pick(args.lambda, file.lambda, d.lambda),
        tau: args.tau.or(file.tau),
        alpha: pick(args.alpha, file.alpha, d.alpha),
        beta: pick(args.beta, file.beta, d.beta),
        lr: pick(args.lr, file.lr, d.lr),
        eps_train_range: (pick(args.eps_min, file.eps_min, d.eps_train_range.0), pick(args.eps_max, file.eps_max, d.eps_train_range.1)),
        batch_size: args.batch.or(file.batch).unwrap_or(d.batch_size),
        ..d
    };
    cfg.validate()?;
    let epochs = args.epochs.or(file.epochs).unwrap_or(30);
    if epochs == 0 {
        return Err(CliError::Usage("--epochs must be at least 1".into()));
    }
    Ok(TrainPlan { cfg, epochs, seed: args.seed.or(file.seed).unwrap_or(0) })
}

pub fn read_file(path: &Path) -> Result<TrainFile, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

/// Fails early when the parent directory of an output file is missing.
pub fn check_parent(path: &Path) -> Result<(), CliError> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() && !p.is_dir() => {
            Err(CliError::Usage(format!("directory {} does not exist", p.display())))
        }
        _ => Ok(()),
    }
}

pub fn run(args: TrainArgs) -> Result<(), CliError> {
    let file = match &args.config {
        Some(p) => read_file(p)?,
        None => TrainFile::default(),
    };
    let plan = resolve(&args, &file)?;
    let out = args.out.clone().unwrap_or_else(|| PathBuf::from(format!("{}-seed{}.ckpt", plan.cfg.variant, plan.seed)));
    let loss_path = args.loss_csv.clone().unwrap_or_else(|| out.with_extension("loss.csv"));
    check_parent(&out)?;
    check_parent(&loss_path)?;
    let dir = args.data.clone().unwrap_or_else(|| args.root.data_root.join("easy"));
    let data = load_dataset(&dir)?;
    let tile = data.manifest.tile;
    let mut model = Model::new(&plan.cfg, data.train.shape, tile, plan.seed)?;
    eprintln!(
        "training {} on {} ({} samples, {} parameters) for {} epochs",
        plan.cfg.variant,
        dir.display(),
        data.train.len(),
        model.num_params(),
        plan.epochs
    );
    let mut progress = EpochProgress::default();
    let log = train_with(&mut model, &data.train, plan.epochs, plan.seed, |row| progress.push(row))?;
    progress.flush();
    model.save(&out)?;
    let mut csv = Vec::new();
    write_loss_csv(&log, &mut csv).map_err(|e| CliError::Data(e.to_string()))?;
    std::fs::write(&loss_path, csv).map_err(|e| CliError::io(&loss_path, e))?;
    println!("wrote {} and {}", out.display(), loss_path.display());
    Ok(())
}

/// Prints one line per finished epoch with its mean losses.
#[derive(Default)]
struct EpochProgress {
    epoch: Option<usize>,
    sums: [f64; 3],
    steps: usize,
}

impl EpochProgress {
    fn push(&mut self, row: &LossRow) {
        if self.epoch != Some(row.epoch) {
            self.flush();
            self.epoch = Some(row.epoch);
        }
        self.sums[0] += row.loss_total;
        self.sums[1] += row.loss_path;
        self.sums[2] += row.loss_exp;
        self.steps += 1;
    }

    fn flush(&mut self) {
        if let Some(e) = self.epoch {
            let n = self.steps as f64;
            eprintln!("epoch {:>3}  loss {:.5}  path {:.5}  exp {:.5}", e + 1, self.sums[0] / n, self.sums[1] / n, self.sums[2] / n);
        }
        *self = EpochProgress::default();
    }
}
