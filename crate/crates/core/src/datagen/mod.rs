//! Synthetic tile maps with oracle shortest paths.

mod dataset;
mod mapgen;
pub mod sampling;
mod tileset;

pub use dataset::{
    generate_dataset, load_dataset, resample_source, save_dataset, DatagenConfig, Dataset, DatasetManifest,
    DatasetSplits, FileEntry, MapRecord, MapSample, PairRecord, SamplingRule, SplitCounts, SplitEntry,
    SCHEMA_VERSION, SPLITS,
};
pub use mapgen::{generate_map, generate_map_with, render, terrain_layout, Image, WALL_FRACTION};
pub use sampling::{sample_pair_min_steps, sample_source_opposite_quadrant, sample_target_margin};
pub use tileset::{Pattern, Terrain, Tileset, TilesetKind, WALL_COST};

use crate::grid::{Cell, GridCosts, GridError, PathMask, Shape};
use crate::search::{dijkstra_oracle, SearchError};
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatagenError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error("margin {margin} is impossible on a {shape} grid")]
    ImpossibleMargin { margin: usize, shape: Shape },
    #[error("map unusable after {attempts} sampling attempts")]
    UnusableMap { attempts: usize },
    #[error("invalid dataset config: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {msg}", path.display())]
    Format { path: PathBuf, msg: String },
    #[error("{}: schema version {found}, expected {expected}", path.display())]
    Version { path: PathBuf, found: u64, expected: u32 },
}

pub fn label_gt_path(costs: &GridCosts, source: Cell, target: Cell) -> Result<PathMask, DatagenError> {
    Ok(dijkstra_oracle(costs, source, target)?.path_mask)
}
