//! The function-valued chain `X(t, x) = max{a X(t−1, R x), (1 − a) Z(t, x)}`.

mod config;
mod coupling;
mod initial;
mod state;
mod stationary;

pub use config::{ChainConfig, ChainConfigBuilder, Persistence};
pub use coupling::{coupled_trajectory, run_trajectory, sup_distance};
pub use initial::InitialField;
pub use state::{draw_shared_innovation, ChainState, Innovation};
pub use stationary::{stationary_draw, StationaryParams};
