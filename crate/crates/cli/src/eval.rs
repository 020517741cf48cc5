use crate::error::CliError;
use crate::train::check_parent;
use crate::DataRoot;
use clap::Args;
use nwa_core::datagen::load_dataset;
use nwa_core::evalkit::{epsilon_sweep, write_instances_csv, write_sweep_csv, MetricRow, DEFAULT_EPS};
use nwa_core::pipeline::{Model, Variant};
use std::path::{Path, PathBuf};

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Dataset directory [default: <data-root>/easy].
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[command(flatten)]
    pub root: DataRoot,
    /// Split to evaluate on.
    #[arg(long, default_value = "test")]
    pub split: String,
    /// Checkpoints; restarts of the same variant are pooled, different
    /// variants get their own rows.
    #[arg(long, required = true, num_args = 1.., value_delimiter = ',')]
    pub ckpt: Vec<PathBuf>,
    /// Comma-separated eps values, non-decreasing.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_EPS.to_vec())]
    pub eps: Vec<f64>,
    /// Expected restarts per variant; checked against the checkpoints given.
    #[arg(long)]
    pub restarts: Option<usize>,
    /// Seeds the resampled sources of the generalized metrics.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Sweep CSV path.
    #[arg(long, default_value = "sweep.csv")]
    pub out: PathBuf,
    /// Also write per-instance records, one file per checkpoint, named
    /// `<stem>.<variant>.<k>.csv`.
    #[arg(long)]
    pub instances: Option<PathBuf>,
}

/// Checkpoints grouped by variant in order of first appearance.
fn group(models: Vec<(PathBuf, Model)>) -> Vec<(Variant, Vec<Model>)> {
    let mut groups: Vec<(Variant, Vec<Model>)> = Vec::new();
    for (_, m) in models {
        match groups.iter_mut().find(|(v, _)| *v == m.variant()) {
            Some((_, g)) => g.push(m),
            None => groups.push((m.variant(), vec![m])),
        }
    }
    groups
}

fn instance_path(base: &Path, variant: Variant, k: usize) -> PathBuf {
    let stem = base.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "instances".into());
    base.with_file_name(format!("{stem}.{variant}.{k}.csv"))
}

pub fn run(args: EvalArgs) -> Result<(), CliError> {
    check_parent(&args.out)?;
    if let Some(p) = &args.instances {
        check_parent(p)?;
    }
    let dir = args.data.clone().unwrap_or_else(|| args.root.data_root.join("easy"));
    let data = load_dataset(&dir)?;
    let test = data.split(&args.split).ok_or_else(|| CliError::Usage(format!("unknown split {:?}", args.split)))?;
    let models = args
        .ckpt
        .iter()
        .map(|p| Ok((p.clone(), Model::load(p)?)))
        .collect::<Result<Vec<_>, CliError>>()?;
    let groups = group(models);
    if let Some(r) = args.restarts {
        if let Some((v, g)) = groups.iter().find(|(_, g)| g.len() != r) {
            return Err(CliError::Usage(format!("--restarts {r} but {} checkpoint(s) of {v}", g.len())));
        }
    }
    // everything is computed before any file is written
    let mut rows: Vec<MetricRow> = Vec::new();
    let mut dumps = Vec::new();
    for (variant, restarts) in &groups {
        let sweep = epsilon_sweep(restarts, test, &data.manifest, &args.eps, args.seed)?;
        rows.extend(sweep.rows);
        if let Some(base) = &args.instances {
            for (k, recs) in sweep.instances.iter().enumerate() {
                let mut buf = Vec::new();
                write_instances_csv(recs, &mut buf).map_err(|e| CliError::Data(e.to_string()))?;
                dumps.push((instance_path(base, *variant, k), buf));
            }
        }
    }
    let mut csv = Vec::new();
    write_sweep_csv(&rows, &mut csv).map_err(|e| CliError::Data(e.to_string()))?;
    std::fs::write(&args.out, csv).map_err(|e| CliError::io(&args.out, e))?;
    for (path, buf) in dumps {
        std::fs::write(&path, buf).map_err(|e| CliError::io(&path, e))?;
    }
    println!("{:<6} {:>5}  {:>15}  {:>15}  {:>13}  {:>13}", "model", "eps", "cost ratio", "gen cost ratio", "expanded", "gen expanded");
    for r in &rows {
        println!(
            "{:<6} {:>5}  {:>7.4} ± {:<5.3}  {:>7.4} ± {:<5.3}  {:>6.1} ± {:<4.1}  {:>6.1} ± {:<4.1}",
            r.variant.name(),
            r.eps,
            r.cost_ratio.mean,
            r.cost_ratio.std,
            r.gen_cost_ratio.mean,
            r.gen_cost_ratio.std,
            r.expanded.mean,
            r.expanded.std,
            r.gen_expanded.mean,
            r.gen_expanded.std
        );
    }
    println!("wrote {} ({} instances, {} eps values)", args.out.display(), test.len(), args.eps.len());
    Ok(())
}
