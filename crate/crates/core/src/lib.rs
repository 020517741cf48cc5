//! Neural weighted A*: a trainable grid planner that learns traversal costs and
//! a heuristic modulation field from tile-map images, with a single runtime
//! parameter `eps` trading path cost (bounded by `1 + eps` times optimal) for
//! fewer node expansions.

pub mod grid;
pub mod search;
pub mod diff;
pub mod nn;
pub mod datagen;
pub mod pipeline;
pub mod evalkit;
