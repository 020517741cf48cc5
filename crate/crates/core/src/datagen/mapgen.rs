use super::tileset::Tileset;
use crate::grid::{GridCosts, Shape};
use crate::nn::Tensor;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// RGB image, row-major, channels last, values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    pub height: usize,
    pub width: usize,
    pub data: Vec<f32>,
}

impl Image {
    pub fn pixel(&self, y: usize, x: usize) -> [f32; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    /// Channels-first `[3, H, W]` tensor for the encoders.
    pub fn to_tensor(&self) -> Tensor {
        let n = self.height * self.width;
        let mut v = vec![0.0; 3 * n];
        for (p, px) in self.data.chunks_exact(3).enumerate() {
            for c in 0..3 {
                v[c * n + p] = px[c] as f64;
            }
        }
        Tensor::new(vec![3, self.height, self.width], v).expect("consistent image shape")
    }
}

/// Bilinearly interpolated value noise with lattice spacing `step` cells.
pub(crate) fn value_noise(shape: Shape, step: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let lh = (shape.height as f64 / step).ceil() as usize + 2;
    let lw = (shape.width as f64 / step).ceil() as usize + 2;
    let lattice: Vec<f64> = (0..lh * lw).map(|_| rng.gen::<f64>()).collect();
    let (oy, ox): (f64, f64) = (rng.gen(), rng.gen());
    let mut out = Vec::with_capacity(shape.len());
    for r in 0..shape.height {
        for c in 0..shape.width {
            let y = r as f64 / step + oy;
            let x = c as f64 / step + ox;
            let (y0, x0) = (y.floor() as usize, x.floor() as usize);
            let (fy, fx) = (y - y0 as f64, x - x0 as f64);
            let at = |i: usize, j: usize| lattice[i * lw + j];
            let top = at(y0, x0) * (1.0 - fx) + at(y0, x0 + 1) * fx;
            let bot = at(y0 + 1, x0) * (1.0 - fx) + at(y0 + 1, x0 + 1) * fx;
            out.push(top * (1.0 - fy) + bot * fy);
        }
    }
    out
}

/// Splits cells into `k` equal-sized classes by rank of `values`.
fn rank_classes(values: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let mut class = vec![0; values.len()];
    for (rank, &i) in order.iter().enumerate() {
        class[i] = rank * k / values.len();
    }
    class
}

/// Fraction of cells turned into walls when the tileset has a wall terrain.
pub const WALL_FRACTION: f64 = 0.12;

/// Terrain index per cell.
pub fn terrain_layout(shape: Shape, tileset: &Tileset, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut walkable: Vec<usize> = tileset.walkable().map(|(i, _)| i).collect();
    walkable.shuffle(rng);
    let step = (shape.height.min(shape.width) as f64 / 3.0).max(2.0);
    let coarse = value_noise(shape, step, rng);
    let fine = value_noise(shape, step / 2.0, rng);
    let mixed: Vec<f64> = coarse.iter().zip(&fine).map(|(a, b)| a + 0.35 * b).collect();
    let mut layout: Vec<usize> = rank_classes(&mixed, walkable.len()).into_iter().map(|c| walkable[c]).collect();
    if let Some(wall) = tileset.wall_index() {
        let field = value_noise(shape, (step / 1.5).max(2.0), rng);
        let n_walls = (WALL_FRACTION * shape.len() as f64).round() as usize;
        let mut order: Vec<usize> = (0..shape.len()).collect();
        order.sort_by(|&a, &b| field[b].total_cmp(&field[a]).then(a.cmp(&b)));
        for &i in &order[..n_walls] {
            layout[i] = wall;
        }
    }
    layout
}

/// Renders a terrain layout, adding a brightness offset per tile and
/// per-pixel noise.
pub fn render(shape: Shape, layout: &[usize], tileset: &Tileset, rng: &mut ChaCha8Rng) -> Image {
    let k = tileset.tile;
    let (height, width) = (shape.height * k, shape.width * k);
    let mut data = vec![0f32; height * width * 3];
    for r in 0..shape.height {
        for c in 0..shape.width {
            let tex = &tileset.terrains[layout[r * shape.width + c]].texture;
            let shift: f32 = rng.gen_range(-0.03..0.03);
            for y in 0..k {
                for x in 0..k {
                    let dst = ((r * k + y) * width + c * k + x) * 3;
                    let src = (y * k + x) * 3;
                    for ch in 0..3 {
                        let noise: f32 = rng.gen_range(-0.03..0.03);
                        data[dst + ch] = (tex[src + ch] + shift + noise).clamp(0.0, 1.0);
                    }
                }
            }
        }
    }
    Image { height, width, data }
}

pub fn generate_map(seed: u64, shape: Shape, tileset: &Tileset) -> (Image, GridCosts) {
    generate_map_with(&mut ChaCha8Rng::seed_from_u64(seed), shape, tileset)
}

pub fn generate_map_with(rng: &mut ChaCha8Rng, shape: Shape, tileset: &Tileset) -> (Image, GridCosts) {
    let layout = terrain_layout(shape, tileset, rng);
    let image = render(shape, &layout, tileset, rng);
    let costs = layout.iter().map(|&t| tileset.terrains[t].cost as f64).collect();
    let costs = GridCosts::from_values(shape, costs).expect("tileset costs are positive");
    (image, costs)
}
