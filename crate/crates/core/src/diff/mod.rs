//! The two differentiable A* solvers and the gradient barrier between them.

pub mod blackbox;
pub mod neural;

pub use blackbox::{blackbox_backward, blackbox_forward, BlackBoxContext};
pub use neural::{
    neural_astar_backward, neural_astar_backward_costs, neural_astar_forward, stop_gradient, SoftSearchTrace,
    SoftStep, StopGradient,
};
