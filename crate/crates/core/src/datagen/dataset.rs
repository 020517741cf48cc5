use super::mapgen::{generate_map_with, Image};
use super::sampling::{
    sample_pair_min_steps, sample_source_min_steps, sample_source_opposite_quadrant, sample_target_margin,
    wall_mask,
};
use super::tileset::{Tileset, TilesetKind, WALL_COST};
use super::DatagenError;
use crate::grid::{Cell, GridCosts, PathMask, Shape};
use crate::search::dijkstra_oracle;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};

pub const SCHEMA_VERSION: u32 = 1;
pub const SPLITS: [&str; 3] = ["train", "val", "test"];

/// Regenerations allowed before a split gives up on a map index.
const MAP_ATTEMPTS: u64 = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum SamplingRule {
    /// Target near an edge, sources in the opposite quadrant.
    MarginOppositeQuadrant { margin: usize },
    /// Endpoints off walls, at least `min_steps` apart.
    MinSteps { min_steps: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

impl SplitCounts {
    pub fn get(&self, split: &str) -> usize {
        match split {
            "train" => self.train,
            "val" => self.val,
            _ => self.test,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatagenConfig {
    pub kind: TilesetKind,
    pub grid: usize,
    pub tile: usize,
    pub terrains: usize,
    /// Maps per split.
    pub maps: SplitCounts,
    pub seed: u64,
    pub rule: SamplingRule,
    pub targets_per_map: usize,
    pub sources_per_target: usize,
}

impl DatagenConfig {
    pub fn easy(seed: u64) -> Self {
        DatagenConfig {
            kind: TilesetKind::Easy,
            grid: 12,
            tile: 8,
            terrains: 5,
            maps: SplitCounts { train: 500, val: 50, test: 50 },
            seed,
            rule: SamplingRule::MarginOppositeQuadrant { margin: 3 },
            targets_per_map: 2,
            sources_per_target: 2,
        }
    }

    pub fn hard(seed: u64) -> Self {
        DatagenConfig {
            kind: TilesetKind::Hard,
            grid: 20,
            terrains: 10,
            rule: SamplingRule::MinSteps { min_steps: 12 },
            ..Self::easy(seed)
        }
    }

    pub fn pairs_per_map(&self) -> usize {
        self.targets_per_map * self.sources_per_target
    }

    pub fn shape(&self) -> Shape {
        Shape::square(self.grid)
    }

    pub fn wall_cost(&self) -> Option<f64> {
        match self.kind {
            TilesetKind::Hard => Some(WALL_COST as f64),
            TilesetKind::Easy => None,
        }
    }

    pub fn tileset(&self) -> Result<Tileset, DatagenError> {
        let full = Tileset::new(self.kind, self.tile);
        let n = full.terrains.len();
        if self.terrains < 2 || self.terrains > n {
            return Err(DatagenError::Config(format!("{:?} tileset has 2..={n} terrains, got {}", self.kind, self.terrains)));
        }
        let mut ts = full;
        // keep the wall, drop walkable terrains from the end
        while ts.terrains.len() > self.terrains {
            let drop = ts.terrains.iter().rposition(|t| !t.wall).expect("walkable terrains remain");
            ts.terrains.remove(drop);
        }
        Ok(ts)
    }

    pub fn validate(&self) -> Result<(), DatagenError> {
        if self.grid < 2 || self.tile == 0 {
            return Err(DatagenError::Config("grid must be at least 2 and tile at least 1".into()));
        }
        if self.grid > u16::MAX as usize {
            return Err(DatagenError::Config("grid does not fit 16-bit coordinates".into()));
        }
        if self.pairs_per_map() == 0 {
            return Err(DatagenError::Config("need at least one pair per map".into()));
        }
        if let SamplingRule::MarginOppositeQuadrant { margin } = self.rule {
            if margin == 0 || 2 * margin >= self.grid {
                return Err(DatagenError::ImpossibleMargin { margin, shape: self.shape() });
            }
        }
        self.tileset().map(|_| ())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MapRecord {
    pub image: Image,
    pub costs: GridCosts,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PairRecord {
    pub map: usize,
    pub source: Cell,
    pub target: Cell,
    pub path: PathMask,
}

/// One training instance, borrowing the shared map.
#[derive(Clone, Copy, Debug)]
pub struct MapSample<'a> {
    pub image: &'a Image,
    pub gt_costs: &'a GridCosts,
    pub source: Cell,
    pub target: Cell,
    pub gt_path: &'a PathMask,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub shape: Shape,
    pub maps: Vec<MapRecord>,
    /// Grouped by map: pairs `[k * P, (k + 1) * P)` belong to map `k`.
    pub pairs: Vec<PairRecord>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn sample(&self, i: usize) -> MapSample<'_> {
        let p = &self.pairs[i];
        let m = &self.maps[p.map];
        MapSample { image: &m.image, gt_costs: &m.costs, source: p.source, target: p.target, gt_path: &p.path }
    }

    pub fn samples(&self) -> impl Iterator<Item = MapSample<'_>> {
        (0..self.len()).map(|i| self.sample(i))
    }

    /// First `n` maps with their pairs.
    pub fn truncate_maps(&self, n: usize) -> Dataset {
        let n = n.min(self.maps.len());
        Dataset {
            shape: self.shape,
            maps: self.maps[..n].to_vec(),
            pairs: self.pairs.iter().filter(|p| p.map < n).cloned().collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub name: String,
    pub dtype: String,
    pub shape: Vec<usize>,
    pub bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitEntry {
    pub name: String,
    pub maps: usize,
    pub samples: usize,
    pub files: Vec<FileEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub schema_version: u32,
    pub config: DatagenConfig,
    pub grid: Shape,
    pub tile: usize,
    pub image_size: usize,
    pub cost_range: (f64, f64),
    pub terrain_costs: Vec<f64>,
    pub wall_cost: Option<f64>,
    pub pairs_per_map: usize,
    pub splits: Vec<SplitEntry>,
}

impl DatasetManifest {
    pub fn split(&self, name: &str) -> Option<&SplitEntry> {
        self.splits.iter().find(|s| s.name == name)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetSplits {
    pub manifest: DatasetManifest,
    pub train: Dataset,
    pub val: Dataset,
    pub test: Dataset,
}

impl DatasetSplits {
    pub fn split(&self, name: &str) -> Option<&Dataset> {
        match name {
            "train" => Some(&self.train),
            "val" => Some(&self.val),
            "test" => Some(&self.test),
            _ => None,
        }
    }
}

fn map_rng(seed: u64, split: usize, index: usize, attempt: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((split as u64) << 56) | ((index as u64) << 8) | attempt);
    rng
}

fn sample_pairs(
    cfg: &DatagenConfig,
    costs: &GridCosts,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<(Cell, Cell)>, DatagenError> {
    let shape = costs.shape();
    let mut pairs = Vec::with_capacity(cfg.pairs_per_map());
    for _ in 0..cfg.targets_per_map {
        match cfg.rule {
            SamplingRule::MarginOppositeQuadrant { margin } => {
                let target = sample_target_margin(shape, margin, rng)?;
                for _ in 0..cfg.sources_per_target {
                    pairs.push((sample_source_opposite_quadrant(target, shape, rng), target));
                }
            }
            SamplingRule::MinSteps { min_steps } => {
                let walls = wall_mask(costs, cfg.wall_cost());
                let (source, target) = sample_pair_min_steps(costs, &walls, min_steps, rng)?;
                pairs.push((source, target));
                for _ in 1..cfg.sources_per_target {
                    let s = sample_source_min_steps(shape, &walls, target, min_steps, rng)
                        .ok_or(DatagenError::UnusableMap { attempts: 1 })?;
                    pairs.push((s, target));
                }
            }
        }
    }
    Ok(pairs)
}

fn generate_one(
    cfg: &DatagenConfig,
    tileset: &Tileset,
    split: usize,
    index: usize,
) -> Result<(MapRecord, Vec<(Cell, Cell, PathMask)>), DatagenError> {
    for attempt in 0..MAP_ATTEMPTS {
        let mut rng = map_rng(cfg.seed, split, index, attempt);
        let (image, costs) = generate_map_with(&mut rng, cfg.shape(), tileset);
        let pairs = match sample_pairs(cfg, &costs, &mut rng) {
            Ok(p) => p,
            Err(DatagenError::UnusableMap { .. }) => continue,
            Err(e) => return Err(e),
        };
        let labelled = pairs
            .into_iter()
            .map(|(s, t)| Ok((s, t, dijkstra_oracle(&costs, s, t)?.path_mask)))
            .collect::<Result<Vec<_>, DatagenError>>()?;
        return Ok((MapRecord { image, costs }, labelled));
    }
    Err(DatagenError::UnusableMap { attempts: MAP_ATTEMPTS as usize })
}

fn generate_split(cfg: &DatagenConfig, tileset: &Tileset, split: usize) -> Result<Dataset, DatagenError> {
    let n = cfg.maps.get(SPLITS[split]);
    let generated = (0..n)
        .into_par_iter()
        .map(|i| generate_one(cfg, tileset, split, i))
        .collect::<Result<Vec<_>, _>>()?;
    let mut maps = Vec::with_capacity(n);
    let mut pairs = Vec::with_capacity(n * cfg.pairs_per_map());
    for (k, (map, ps)) in generated.into_iter().enumerate() {
        maps.push(map);
        pairs.extend(ps.into_iter().map(|(source, target, path)| PairRecord { map: k, source, target, path }));
    }
    Ok(Dataset { shape: cfg.shape(), maps, pairs })
}

fn file_entries(cfg: &DatagenConfig, maps: usize, samples: usize) -> Vec<FileEntry> {
    let (g, img) = (cfg.grid, cfg.grid * cfg.tile);
    let entry = |name: &str, dtype: &str, shape: Vec<usize>, width: usize| FileEntry {
        name: name.into(),
        dtype: dtype.into(),
        bytes: (shape.iter().product::<usize>() * width) as u64,
        shape,
    };
    vec![
        entry("images.f32", "f32", vec![maps, img, img, 3], 4),
        entry("costs.f32", "f32", vec![maps, g, g], 4),
        entry("sources.u16", "u16", vec![samples, 2], 2),
        entry("targets.u16", "u16", vec![samples, 2], 2),
        entry("paths.u8", "u8", vec![samples, g, g], 1),
    ]
}

fn build_manifest(cfg: &DatagenConfig, tileset: &Tileset, counts: [(usize, usize); 3]) -> DatasetManifest {
    let (lo, hi) = tileset.cost_range();
    DatasetManifest {
        schema_version: SCHEMA_VERSION,
        config: cfg.clone(),
        grid: cfg.shape(),
        tile: cfg.tile,
        image_size: cfg.grid * cfg.tile,
        cost_range: (lo as f64, hi as f64),
        terrain_costs: tileset.terrains.iter().map(|t| t.cost as f64).collect(),
        wall_cost: cfg.wall_cost(),
        pairs_per_map: cfg.pairs_per_map(),
        splits: SPLITS
            .iter()
            .zip(counts)
            .map(|(name, (maps, samples))| SplitEntry {
                name: (*name).into(),
                maps,
                samples,
                files: file_entries(cfg, maps, samples),
            })
            .collect(),
    }
}

/// Pure function of the config.
pub fn generate_dataset(cfg: &DatagenConfig) -> Result<DatasetSplits, DatagenError> {
    cfg.validate()?;
    let tileset = cfg.tileset()?;
    let train = generate_split(cfg, &tileset, 0)?;
    let val = generate_split(cfg, &tileset, 1)?;
    let test = generate_split(cfg, &tileset, 2)?;
    let counts = [&train, &val, &test].map(|d| (d.maps.len(), d.len()));
    Ok(DatasetSplits { manifest: build_manifest(cfg, &tileset, counts), train, val, test })
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatagenError + '_ {
    move |source| DatagenError::Io { path: path.to_path_buf(), source }
}

fn cell_bytes(cells: impl Iterator<Item = Cell>) -> Vec<u8> {
    cells.flat_map(|c| [(c.row as u16).to_le_bytes(), (c.col as u16).to_le_bytes()]).flatten().collect()
}

fn split_bytes(data: &Dataset) -> [Vec<u8>; 5] {
    let images = data.maps.iter().flat_map(|m| m.image.data.iter().flat_map(|v| v.to_le_bytes())).collect();
    let costs = data.maps.iter().flat_map(|m| m.costs.values().iter().flat_map(|&v| (v as f32).to_le_bytes())).collect();
    let sources = cell_bytes(data.pairs.iter().map(|p| p.source));
    let targets = cell_bytes(data.pairs.iter().map(|p| p.target));
    let paths = data.pairs.iter().flat_map(|p| p.path.bits().iter().map(|&b| b as u8)).collect();
    [images, costs, sources, targets, paths]
}

/// Writes `manifest.json` and one directory per split. Existing files with
/// the same names are replaced.
pub fn save_dataset(dir: &Path, data: &DatasetSplits) -> Result<(), DatagenError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    for entry in &data.manifest.splits {
        let split = data.split(&entry.name).expect("manifest names known splits");
        let sub = dir.join(&entry.name);
        fs::create_dir_all(&sub).map_err(io_err(&sub))?;
        for (file, bytes) in entry.files.iter().zip(split_bytes(split)) {
            let path = sub.join(&file.name);
            if bytes.len() as u64 != file.bytes {
                return Err(DatagenError::Format { path, msg: "manifest does not describe the data".into() });
            }
            fs::write(&path, bytes).map_err(io_err(&path))?;
        }
    }
    let path = dir.join("manifest.json");
    let json = serde_json::to_string_pretty(&data.manifest).expect("manifest serialises");
    fs::write(&path, json).map_err(io_err(&path))
}

fn read_checked(path: PathBuf, entry: &FileEntry) -> Result<Vec<u8>, DatagenError> {
    let bytes = fs::read(&path).map_err(io_err(&path))?;
    if bytes.len() as u64 != entry.bytes {
        return Err(DatagenError::Format {
            path,
            msg: format!("expected {} bytes, found {}", entry.bytes, bytes.len()),
        });
    }
    Ok(bytes)
}

fn f32s(bytes: &[u8]) -> impl Iterator<Item = f32> + '_ {
    bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
}

fn cells(bytes: &[u8]) -> Vec<Cell> {
    bytes
        .chunks_exact(4)
        .map(|c| Cell {
            row: u16::from_le_bytes([c[0], c[1]]) as usize,
            col: u16::from_le_bytes([c[2], c[3]]) as usize,
        })
        .collect()
}

fn load_split(dir: &Path, manifest: &DatasetManifest, entry: &SplitEntry) -> Result<Dataset, DatagenError> {
    let sub = dir.join(&entry.name);
    let expected = file_entries(&manifest.config, entry.maps, entry.samples);
    if entry.files != expected || entry.samples != entry.maps * manifest.pairs_per_map {
        return Err(DatagenError::Format {
            path: dir.join("manifest.json"),
            msg: format!("inventory of split {} is inconsistent with its counts", entry.name),
        });
    }
    let mut raw = Vec::with_capacity(5);
    for f in &entry.files {
        raw.push(read_checked(sub.join(&f.name), f)?);
    }
    let shape = manifest.grid;
    let img = manifest.image_size;
    let bad = |name: &str, msg: String| DatagenError::Format { path: sub.join(name), msg };

    let mut maps = Vec::with_capacity(entry.maps);
    let image_len = img * img * 3;
    for (k, (im, co)) in raw[0].chunks_exact(image_len * 4).zip(raw[1].chunks_exact(shape.len() * 4)).enumerate() {
        let image = Image { height: img, width: img, data: f32s(im).collect() };
        let costs = GridCosts::from_values(shape, f32s(co).map(f64::from).collect())
            .map_err(|e| bad("costs.f32", format!("map {k}: {e}")))?;
        maps.push(MapRecord { image, costs });
    }
    let (sources, targets) = (cells(&raw[2]), cells(&raw[3]));
    let mut pairs = Vec::with_capacity(entry.samples);
    for (i, bits) in raw[4].chunks_exact(shape.len()).enumerate() {
        let (source, target) = (sources[i], targets[i]);
        for (c, name) in [(source, "sources.u16"), (target, "targets.u16")] {
            if !shape.contains(c) {
                return Err(bad(name, format!("sample {i}: cell {c} outside {shape}")));
            }
        }
        if bits.iter().any(|&b| b > 1) {
            return Err(bad("paths.u8", format!("sample {i}: mask values must be 0 or 1")));
        }
        let path = PathMask::from_bits(shape, bits.iter().map(|&b| b == 1).collect())
            .map_err(|e| bad("paths.u8", e.to_string()))?;
        if !path.contains(source) || !path.contains(target) {
            return Err(bad("paths.u8", format!("sample {i}: path misses an endpoint")));
        }
        pairs.push(PairRecord { map: i / manifest.pairs_per_map, source, target, path });
    }
    let data = Dataset { shape, maps, pairs };
    // re-derive every tenth label with the oracle
    for i in (0..data.len()).step_by(10) {
        let s = data.sample(i);
        let oracle = dijkstra_oracle(s.gt_costs, s.source, s.target)?;
        if &oracle.path_mask != s.gt_path {
            return Err(bad("paths.u8", format!("sample {i}: stored path is not the optimal path")));
        }
    }
    Ok(data)
}

pub fn load_dataset(dir: &Path) -> Result<DatasetSplits, DatagenError> {
    let path = dir.join("manifest.json");
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    let probe: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| DatagenError::Format { path: path.clone(), msg: e.to_string() })?;
    let version = probe.get("schema_version").and_then(|v| v.as_u64()).unwrap_or(0);
    if version != SCHEMA_VERSION as u64 {
        return Err(DatagenError::Version { path, found: version, expected: SCHEMA_VERSION });
    }
    let manifest: DatasetManifest =
        serde_json::from_value(probe).map_err(|e| DatagenError::Format { path: path.clone(), msg: e.to_string() })?;
    if manifest.grid != manifest.config.shape() || manifest.image_size != manifest.config.grid * manifest.config.tile {
        return Err(DatagenError::Format { path, msg: "grid geometry disagrees with the config".into() });
    }
    let mut loaded = Vec::with_capacity(3);
    for name in SPLITS {
        let entry = manifest
            .split(name)
            .ok_or_else(|| DatagenError::Format { path: path.clone(), msg: format!("missing split {name}") })?;
        loaded.push(load_split(dir, &manifest, entry)?);
    }
    let test = loaded.pop().expect("three splits");
    let val = loaded.pop().expect("three splits");
    let train = loaded.pop().expect("three splits");
    Ok(DatasetSplits { manifest, train, val, test })
}

/// Resamples a source for `target` under the dataset's rule, for the
/// generalized metrics.
pub fn resample_source<R: Rng>(
    manifest: &DatasetManifest,
    costs: &GridCosts,
    target: Cell,
    rng: &mut R,
) -> Option<Cell> {
    match manifest.config.rule {
        SamplingRule::MarginOppositeQuadrant { .. } => Some(sample_source_opposite_quadrant(target, costs.shape(), rng)),
        SamplingRule::MinSteps { min_steps } => {
            let walls = wall_mask(costs, manifest.wall_cost);
            sample_source_min_steps(costs.shape(), &walls, target, min_steps, rng)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::sampling::{bfs_steps, in_margin, quadrant};

    fn small(kind: TilesetKind) -> DatagenConfig {
        let base = match kind {
            TilesetKind::Easy => DatagenConfig::easy(9),
            TilesetKind::Hard => DatagenConfig::hard(9),
        };
        DatagenConfig { maps: SplitCounts { train: 6, val: 2, test: 3 }, ..base }
    }

    #[test]
    fn easy_rules_hold_for_every_pair() {
        let d = generate_dataset(&small(TilesetKind::Easy)).unwrap();
        assert_eq!(d.train.len(), 24);
        let shape = Shape::square(12);
        for s in d.train.samples().chain(d.test.samples()) {
            assert!(in_margin(s.target, shape, 3));
            let (a, b) = (quadrant(s.source, shape), quadrant(s.target, shape));
            assert!(a.0 != b.0 && a.1 != b.1);
            assert_eq!(s.gt_path, &dijkstra_oracle(s.gt_costs, s.source, s.target).unwrap().path_mask);
        }
    }

    #[test]
    fn hard_rules_hold_for_every_pair() {
        let d = generate_dataset(&small(TilesetKind::Hard)).unwrap();
        for s in d.train.samples() {
            assert!(s.gt_costs.get(s.source) < 25.0 && s.gt_costs.get(s.target) < 25.0);
            let walls = wall_mask(s.gt_costs, Some(25.0));
            let steps = bfs_steps(s.gt_costs.shape(), &walls, s.target);
            assert!(steps[s.gt_costs.shape().index(s.source)].unwrap() >= 12);
        }
        // sources share a target in pairs
        assert_eq!(d.train.pairs[0].target, d.train.pairs[1].target);
    }

    #[test]
    fn generation_is_pure() {
        let cfg = small(TilesetKind::Easy);
        assert_eq!(generate_dataset(&cfg).unwrap(), generate_dataset(&cfg).unwrap());
        let other = DatagenConfig { seed: 10, ..cfg.clone() };
        assert_ne!(generate_dataset(&cfg).unwrap().train, generate_dataset(&other).unwrap().train);
    }

    #[test]
    fn terrain_subsets() {
        let cfg = DatagenConfig { terrains: 4, ..small(TilesetKind::Hard) };
        let ts = cfg.tileset().unwrap();
        assert_eq!(ts.terrains.len(), 4);
        assert!(ts.terrains.last().unwrap().wall);
        assert!(DatagenConfig { terrains: 1, ..cfg.clone() }.tileset().is_err());
        assert!(DatagenConfig { terrains: 11, ..cfg }.tileset().is_err());
    }

    #[test]
    fn manifest_counts_and_geometry() {
        let d = generate_dataset(&small(TilesetKind::Easy)).unwrap();
        let m = &d.manifest;
        assert_eq!(m.image_size, 96);
        assert_eq!(m.cost_range, (1.0, 10.0));
        let train = m.split("train").unwrap();
        assert_eq!((train.maps, train.samples), (6, 24));
        assert_eq!(train.files[0].shape, vec![6, 96, 96, 3]);
        assert_eq!(train.files[4].bytes, 24 * 144);
    }
}
