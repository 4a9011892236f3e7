use std::sync::Arc;

use super::{draw_shared_innovation, ChainConfig, ChainState, InitialField};
use crate::error::{invalid, Result};
use crate::geometry::SphericalGrid;
use crate::rng::{Purpose, RngStream};

/// Runs `steps` transitions, drawing the innovation of step `t` from the
/// stream derived for `(Step, t)`. `visit` sees every state including the start.
pub fn run_trajectory<F>(start: ChainState, steps: u64, root: &RngStream, mut visit: F) -> Result<ChainState>
where
    F: FnMut(&ChainState),
{
    let mut state = start;
    visit(&state);
    for t in 0..steps {
        let mut rng = root.derive(Purpose::Step, t);
        state = state.step(&mut rng)?;
        visit(&state);
    }
    Ok(state)
}

/// Largest absolute difference between two states over the grid nodes.
pub fn sup_distance(x: &ChainState, y: &ChainState, grid: &SphericalGrid) -> f64 {
    grid.nodes()
        .iter()
        .map(|p| (x.eval(p) - y.eval(p)).abs())
        .fold(0.0, f64::max)
}

/// Two chains driven by the same innovations. Returns `d_0, …, d_T`, the grid
/// sup-distance after each step.
pub fn coupled_trajectory(
    h1: InitialField,
    h2: InitialField,
    config: &Arc<ChainConfig>,
    horizon: u64,
    grid: &SphericalGrid,
    root: &RngStream,
) -> Result<Vec<f64>> {
    if horizon == 0 {
        return Err(invalid("coupling horizon must be at least 1"));
    }
    let mut x = ChainState::new(Arc::clone(config), h1);
    let mut y = ChainState::new(Arc::clone(config), h2);
    let mut out = Vec::with_capacity(horizon as usize + 1);
    out.push(sup_distance(&x, &y, grid));
    for t in 0..horizon {
        let mut rng = root.derive(Purpose::Step, t);
        let innovation = draw_shared_innovation(&[&x, &y], 1.0, &mut rng)?;
        x = x.step_with(&innovation);
        y = y.step_with(&innovation);
        out.push(sup_distance(&x, &y, grid));
    }
    Ok(out)
}
