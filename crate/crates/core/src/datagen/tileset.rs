//! Procedural terrain textures with a traversal cost each.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Pattern {
    Speckle,
    Flat,
    Dots,
    Waves,
    Checker,
    Stripes,
    Bricks,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Terrain {
    pub name: &'static str,
    pub cost: f32,
    pub wall: bool,
    /// `tile * tile * 3`, row-major, channels last, in `[0, 1]`.
    pub texture: Vec<f32>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tileset {
    pub tile: usize,
    pub terrains: Vec<Terrain>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TilesetKind {
    /// Five terrains, one texture per cost.
    Easy,
    /// Ten terrains with look-alike pairs of different cost, plus walls.
    Hard,
}

struct Spec {
    name: &'static str,
    cost: f32,
    color: [f32; 3],
    pattern: Pattern,
    /// Spatial frequency multiplier of the pattern.
    freq: f32,
}

const EASY: [Spec; 5] = [
    Spec { name: "grass", cost: 1.0, color: [0.36, 0.66, 0.26], pattern: Pattern::Speckle, freq: 1.0 },
    Spec { name: "earth", cost: 2.5, color: [0.56, 0.41, 0.23], pattern: Pattern::Flat, freq: 1.0 },
    Spec { name: "forest", cost: 4.0, color: [0.12, 0.36, 0.14], pattern: Pattern::Dots, freq: 1.0 },
    Spec { name: "water", cost: 7.0, color: [0.20, 0.34, 0.76], pattern: Pattern::Waves, freq: 1.0 },
    Spec { name: "stone", cost: 10.0, color: [0.58, 0.58, 0.60], pattern: Pattern::Checker, freq: 1.0 },
];

/// Pairs (sand/dune, meadow/marsh, snow/ice) share colour and pattern family.
const HARD: [Spec; 10] = [
    Spec { name: "path", cost: 1.0, color: [0.80, 0.72, 0.52], pattern: Pattern::Flat, freq: 1.0 },
    Spec { name: "sand", cost: 1.5, color: [0.90, 0.83, 0.55], pattern: Pattern::Speckle, freq: 1.0 },
    Spec { name: "meadow", cost: 2.0, color: [0.40, 0.70, 0.30], pattern: Pattern::Stripes, freq: 1.0 },
    Spec { name: "snow", cost: 3.0, color: [0.92, 0.94, 0.98], pattern: Pattern::Speckle, freq: 2.0 },
    Spec { name: "scrub", cost: 4.5, color: [0.50, 0.55, 0.30], pattern: Pattern::Dots, freq: 1.0 },
    Spec { name: "dune", cost: 6.0, color: [0.88, 0.80, 0.52], pattern: Pattern::Speckle, freq: 2.0 },
    Spec { name: "marsh", cost: 8.0, color: [0.38, 0.66, 0.32], pattern: Pattern::Stripes, freq: 2.0 },
    Spec { name: "ice", cost: 11.0, color: [0.86, 0.92, 0.98], pattern: Pattern::Waves, freq: 1.0 },
    Spec { name: "deep water", cost: 15.0, color: [0.10, 0.22, 0.60], pattern: Pattern::Waves, freq: 2.0 },
    Spec { name: "wall", cost: 25.0, color: [0.22, 0.17, 0.14], pattern: Pattern::Bricks, freq: 1.0 },
];

pub const WALL_COST: f32 = 25.0;

fn pattern_value(p: Pattern, freq: f32, x: usize, y: usize, k: usize, rng: &mut ChaCha8Rng) -> f32 {
    let (xf, yf, kf) = (x as f32, y as f32, k as f32);
    let tau = std::f32::consts::TAU;
    match p {
        Pattern::Flat => 0.0,
        Pattern::Speckle => {
            if rng.gen_bool((0.12 * freq as f64).min(0.9)) {
                0.18
            } else {
                0.0
            }
        }
        Pattern::Dots => {
            let c = kf / 2.0 - 0.5;
            let r = ((xf - c).powi(2) + (yf - c).powi(2)).sqrt();
            if r < kf / 4.0 { -0.12 } else { 0.06 }
        }
        Pattern::Waves => 0.12 * (tau * freq * (xf + 0.5 * yf) / kf).sin(),
        Pattern::Checker => {
            let s = (k / 2).max(1);
            if (x / s + y / s) % 2 == 0 { 0.08 } else { -0.08 }
        }
        Pattern::Stripes => {
            let period = ((kf / (2.0 * freq)).round() as usize).max(1);
            if (y / period) % 2 == 0 { 0.1 } else { -0.05 }
        }
        Pattern::Bricks => {
            let h = (k / 2).max(1);
            let offset = if (y / h) % 2 == 0 { 0 } else { k / 2 };
            if y % h == 0 || (x + offset) % k == 0 { 0.25 } else { 0.0 }
        }
    }
}

impl Tileset {
    pub fn new(kind: TilesetKind, tile: usize) -> Self {
        let specs: &[Spec] = match kind {
            TilesetKind::Easy => &EASY,
            TilesetKind::Hard => &HARD,
        };
        // textures are a fixed function of (kind, tile)
        let mut rng = ChaCha8Rng::seed_from_u64(0x7115e7 ^ (tile as u64) << 8 ^ kind as u64);
        let terrains = specs
            .iter()
            .map(|s| {
                let mut texture = Vec::with_capacity(tile * tile * 3);
                for y in 0..tile {
                    for x in 0..tile {
                        let p = pattern_value(s.pattern, s.freq, x, y, tile, &mut rng);
                        for c in 0..3 {
                            let noise: f32 = rng.gen_range(-0.02..0.02);
                            texture.push((s.color[c] + p + noise).clamp(0.0, 1.0));
                        }
                    }
                }
                Terrain { name: s.name, cost: s.cost, wall: s.cost == WALL_COST, texture }
            })
            .collect();
        Tileset { tile, terrains }
    }

    pub fn walkable(&self) -> impl Iterator<Item = (usize, &Terrain)> {
        self.terrains.iter().enumerate().filter(|(_, t)| !t.wall)
    }

    pub fn wall_index(&self) -> Option<usize> {
        self.terrains.iter().position(|t| t.wall)
    }

    pub fn cost_range(&self) -> (f32, f32) {
        let lo = self.terrains.iter().map(|t| t.cost).fold(f32::INFINITY, f32::min);
        let hi = self.terrains.iter().map(|t| t.cost).fold(f32::NEG_INFINITY, f32::max);
        (lo, hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tilesets_are_well_formed() {
        for (kind, n) in [(TilesetKind::Easy, 5), (TilesetKind::Hard, 10)] {
            let ts = Tileset::new(kind, 8);
            assert_eq!(ts.terrains.len(), n);
            for t in &ts.terrains {
                assert_eq!(t.texture.len(), 8 * 8 * 3);
                assert!(t.texture.iter().all(|v| (0.0..=1.0).contains(v)));
                assert!(t.cost > 0.0);
            }
            assert_eq!(Tileset::new(kind, 8), ts);
        }
        assert_eq!(Tileset::new(TilesetKind::Easy, 8).wall_index(), None);
        assert_eq!(Tileset::new(TilesetKind::Hard, 16).wall_index(), Some(9));
        assert_eq!(Tileset::new(TilesetKind::Hard, 8).cost_range(), (1.0, 25.0));
    }

    #[test]
    fn hard_set_has_look_alikes() {
        let ts = Tileset::new(TilesetKind::Hard, 8);
        let mean = |t: &Terrain| t.texture.iter().sum::<f32>() / t.texture.len() as f32;
        let (sand, dune) = (&ts.terrains[1], &ts.terrains[5]);
        assert!((mean(sand) - mean(dune)).abs() < 0.05);
        assert!(dune.cost > 3.0 * sand.cost);
    }
}
