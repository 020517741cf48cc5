use crate::error::CliError;
use crate::{parse_cell, DataRoot};
use clap::Args;
use nwa_core::datagen::{load_dataset, Image};
use nwa_core::evalkit::cost_ratio;
use nwa_core::grid::{path_cost, Cell, GridCosts};
use nwa_core::pipeline::{infer, EpsilonParam, Model};
use nwa_core::search::dijkstra_oracle;
use serde::Serialize;
use std::path::PathBuf;

#[derive(Args, Debug)]
pub struct PlanArgs {
    /// Checkpoint to plan with.
    #[arg(long)]
    pub ckpt: PathBuf,
    /// Map index within the dataset split, or a path to a PNG image.
    #[arg(long)]
    pub map: String,
    /// Dataset directory for map indices [default: <data-root>/easy].
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[command(flatten)]
    pub root: DataRoot,
    #[arg(long, default_value = "test")]
    pub split: String,
    /// Start cell as row,col.
    #[arg(long, value_parser = parse_cell)]
    pub source: Cell,
    /// Goal cell as row,col.
    #[arg(long, value_parser = parse_cell)]
    pub target: Cell,
    /// Tradeoff between path cost and search effort; 0 is optimal under the
    /// predicted costs.
    #[arg(long, default_value_t = 0.0)]
    pub eps: f64,
}

#[derive(Serialize)]
struct PlanRecord {
    variant: String,
    eps: f64,
    source: [usize; 2],
    target: [usize; 2],
    path: Vec<[usize; 2]>,
    cost: f64,
    oracle_cost: f64,
    expanded: usize,
    bound_slack: f64,
    gt_cost_ratio: Option<f64>,
}

fn load_png(path: &PathBuf) -> Result<Image, CliError> {
    let img = image::open(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?.to_rgb32f();
    Ok(Image { height: img.height() as usize, width: img.width() as usize, data: img.into_raw() })
}

pub fn run(args: PlanArgs) -> Result<(), CliError> {
    let eps = EpsilonParam::new(args.eps)?;
    let model = Model::load(&args.ckpt)?;
    for (name, c) in [("source", args.source), ("target", args.target)] {
        if !model.grid.contains(c) {
            return Err(CliError::Usage(format!("{name} {c} is outside the {} grid", model.grid)));
        }
    }
    let (image, gt): (Image, Option<GridCosts>) = match args.map.parse::<usize>() {
        Ok(index) => {
            let dir = args.data.clone().unwrap_or_else(|| args.root.data_root.join("easy"));
            let data = load_dataset(&dir)?;
            let split = data.split(&args.split).ok_or_else(|| CliError::Usage(format!("unknown split {:?}", args.split)))?;
            let m = split
                .maps
                .get(index)
                .ok_or_else(|| CliError::Usage(format!("map {index} out of range; the {} split has {} maps", args.split, split.maps.len())))?;
            (m.image.clone(), Some(m.costs.clone()))
        }
        Err(_) => (load_png(&PathBuf::from(&args.map))?, None),
    };
    let out = infer(&model, &image.to_tensor(), args.source, args.target, eps)?;
    let r = &out.result;
    let cost = path_cost(&out.costs, &r.path_mask).map_err(|e| CliError::Data(e.to_string()))?;
    let oracle = dijkstra_oracle(&out.costs, args.source, args.target).map_err(|e| CliError::Data(e.to_string()))?;
    let slack = (1.0 + eps.value()) * oracle.total_cost - cost;
    let gt_ratio = match &gt {
        Some(g) => {
            let best = dijkstra_oracle(g, args.source, args.target).map_err(|e| CliError::Data(e.to_string()))?;
            Some(cost_ratio(g, &r.path_mask, &best.path_mask)?)
        }
        None => None,
    };

    println!("variant {}  eps {}", model.variant(), eps.value());
    println!("path ({} cells): {}", r.path.len(), r.path.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" "));
    println!("cost under predicted W: {cost:.6}");
    println!("optimal cost under W:   {:.6}", oracle.total_cost);
    println!("bound slack:            {slack:.6}");
    println!("expanded nodes:         {}", r.expanded_count());
    if let Some(ratio) = gt_ratio {
        println!("ground-truth cost ratio: {ratio:.6}");
    }
    println!();
    for row in 0..model.grid.height {
        let line: String = (0..model.grid.width)
            .map(|col| {
                let c = Cell::new(row, col);
                if c == args.source {
                    'S'
                } else if c == args.target {
                    'T'
                } else if r.path_mask.contains(c) {
                    '*'
                } else if r.expansions.contains(c) {
                    'o'
                } else {
                    '.'
                }
            })
            .collect();
        println!("{line}");
    }
    println!();
    let record = PlanRecord {
        variant: model.variant().name().into(),
        eps: eps.value(),
        source: [args.source.row, args.source.col],
        target: [args.target.row, args.target.col],
        path: r.path.iter().map(|c| [c.row, c.col]).collect(),
        cost,
        oracle_cost: oracle.total_cost,
        expanded: r.expanded_count(),
        bound_slack: slack,
        gt_cost_ratio: gt_ratio,
    };
    println!("{}", serde_json::to_string(&record).expect("plain record serializes"));
    Ok(())
}
