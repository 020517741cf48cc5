use crate::error::CliError;
use crate::DataRoot;
use clap::Args;
use nwa_core::datagen::{generate_dataset, save_dataset, DatagenConfig, SplitCounts, SPLITS};
use std::path::PathBuf;

#[derive(Args, Debug)]
pub struct GenArgs {
    /// Output directory [default: <data-root>/easy, or <data-root>/hard with --hard].
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub root: DataRoot,
    /// The 20x20 set with walls, look-alike terrains and a 12-step minimum
    /// source distance.
    #[arg(long)]
    pub hard: bool,
    /// Grid side in cells [default: 12, or 20 with --hard].
    #[arg(long)]
    pub grid: Option<usize>,
    /// Pixels per cell side.
    #[arg(long, default_value_t = 8)]
    pub tile: usize,
    /// Number of walkable terrain types, taken cheapest first [default: 5, or 10 with --hard].
    #[arg(long)]
    pub terrains: Option<usize>,
    #[arg(long, default_value_t = 500)]
    pub train: usize,
    #[arg(long, default_value_t = 50)]
    pub val: usize,
    #[arg(long, default_value_t = 50)]
    pub test: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write into an existing non-empty directory.
    #[arg(long)]
    pub force: bool,
}

impl GenArgs {
    pub fn config(&self) -> DatagenConfig {
        let base = if self.hard { DatagenConfig::hard(self.seed) } else { DatagenConfig::easy(self.seed) };
        DatagenConfig {
            grid: self.grid.unwrap_or(base.grid),
            tile: self.tile,
            terrains: self.terrains.unwrap_or(base.terrains),
            maps: SplitCounts { train: self.train, val: self.val, test: self.test },
            ..base
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| self.root.data_root.join(if self.hard { "hard" } else { "easy" }))
    }
}

pub fn run(args: GenArgs) -> Result<(), CliError> {
    let cfg = args.config();
    cfg.validate()?;
    let dir = args.out_dir();
    if !args.force {
        if let Ok(mut entries) = std::fs::read_dir(&dir) {
            if entries.next().is_some() {
                return Err(CliError::Usage(format!("{} is not empty; pass --force to overwrite", dir.display())));
            }
        }
    }
    let data = generate_dataset(&cfg)?;
    save_dataset(&dir, &data)?;
    let m = &data.manifest;
    println!("wrote {}", dir.display());
    println!("grid {} tile {} image {}px", m.grid, m.tile, m.image_size);
    println!("terrain costs {:?} walls {:?}", m.terrain_costs, m.wall_cost);
    for name in SPLITS {
        let d = data.split(name).expect("every split is generated");
        println!("{name:>5}: {} maps, {} samples", d.maps.len(), d.len());
    }
    Ok(())
}
