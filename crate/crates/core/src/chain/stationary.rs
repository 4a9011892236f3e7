use std::sync::Arc;

use super::{ChainConfig, ChainState};
use crate::error::{invalid, Result};
use crate::rng::RngStream;
use crate::spectral::{check_custom_field, draw_events, InnovationSpec, SpectralEvent, SphereField, Stop};

/// Truncation of the stationary max-series `⋁_j a^j (1 − a) Z_j(R_{θj} x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationaryParams {
    epsilon: f64,
    delta: f64,
    depth: usize,
}

impl StationaryParams {
    /// Chooses the depth `J` so that the discarded tail exceeds `epsilon`
    /// somewhere with probability at most `delta`.
    pub fn new(epsilon: f64, delta: f64, a: f64, sigma_z: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(invalid(format!("epsilon must be positive, got {epsilon}")));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(invalid(format!("delta must lie in (0, 1), got {delta}")));
        }
        if !(a > 0.0 && a < 1.0) {
            return Err(invalid(format!("a must lie in (0, 1), got {a}")));
        }
        if !(sigma_z > 0.0 && sigma_z.is_finite()) {
            return Err(invalid(format!("sigma_z must be positive, got {sigma_z}")));
        }
        let j = ((epsilon * delta / sigma_z).ln() / a.ln()).ceil() - 1.0;
        Ok(StationaryParams {
            epsilon,
            delta,
            depth: j.max(0.0) as usize,
        })
    }

    pub fn for_config(epsilon: f64, delta: f64, config: &ChainConfig) -> Result<Self> {
        Self::new(epsilon, delta, config.a(), config.sigma_z())
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// The depth `J`; terms `j = 0..=J` are kept.
    pub fn depth(&self) -> usize {
        self.depth
    }
}

/// Draws a state from the truncated stationary law. Innovations beyond the
/// first stop as soon as their events are dominated by what is already drawn.
pub fn stationary_draw(config: &Arc<ChainConfig>, sp: &StationaryParams, rng: &mut RngStream) -> Result<ChainState> {
    let a = config.a();
    let mut events: Vec<SpectralEvent> = Vec::new();
    let mut fields: Vec<(f64, f64, Arc<dyn SphereField>)> = Vec::new();
    let mut envelope = 0.0f64;
    let mut weight = 1.0 - a;
    for j in 0..=sp.depth() {
        let rot = config.rotation_for(j as f64);
        match config.innovation() {
            InnovationSpec::VmfMaxStable => {
                let raw = draw_events(
                    config.kernel(),
                    config.intensity_rate(),
                    Stop::Sphere { floor: envelope / weight },
                    config.event_cap(),
                    rng,
                )?;
                if let Some(top) = raw.first() {
                    envelope = envelope.max(weight * top.weight * config.kernel().inf());
                }
                events.extend(raw.into_iter().map(|e| SpectralEvent {
                    weight: weight * e.weight,
                    center: rot.apply_transpose(&e.center).renormalized(),
                }));
            }
            InnovationSpec::Custom(generator) => {
                let field = generator.generate(rng)?;
                check_custom_field(field.as_ref())?;
                envelope = envelope.max(weight * field.inf_bound());
                fields.push((weight, config.theta() * j as f64, field));
            }
        }
        weight *= a;
    }
    events.sort_by(|x, y| y.weight.total_cmp(&x.weight));
    Ok(ChainState::from_parts(Arc::clone(config), events, fields, sp.depth()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::UnitVec3;

    #[test]
    fn depth_for_reference_parameters() {
        let sp = StationaryParams::new(1e-3, 1e-3, 0.5, 1.0).unwrap();
        assert_eq!(sp.depth(), 19);
        // Tail bound sigma a^{J+1} / eps must stay below delta.
        assert!(0.5f64.powi(20) / 1e-3 <= 1e-3);
        assert!(StationaryParams::new(0.0, 1e-3, 0.5, 1.0).is_err());
        assert!(StationaryParams::new(1e-3, 0.0, 0.5, 1.0).is_err());
        assert_eq!(StationaryParams::new(10.0, 0.5, 0.5, 1.0).unwrap().depth(), 0);
    }

    #[test]
    fn depth_grows_with_persistence() {
        let shallow = StationaryParams::new(1e-3, 1e-3, 0.5, 1.0).unwrap().depth();
        let deep = StationaryParams::new(1e-3, 1e-3, 0.99, 1.0).unwrap().depth();
        assert!(deep > 50 * shallow / 10);
    }

    #[test]
    fn draw_has_no_initial_term() {
        let cfg = Arc::new(ChainConfig::builder().a(0.5).theta(0.4).kappa(1.0).build().unwrap());
        let sp = StationaryParams::for_config(1e-3, 1e-3, &cfg).unwrap();
        let st = stationary_draw(&cfg, &sp, &mut RngStream::new(3)).unwrap();
        assert!(st.initial().is_none());
        assert!(!st.events().is_empty());
        assert_eq!(st.depth(), Some(sp.depth()));
        // sigma_z = 4π f_max(1) ≈ 2.313 pushes J past the κ = 0 value of 19.
        assert_eq!(sp.depth(), 21);
        assert!(st.events().windows(2).all(|w| w[0].weight >= w[1].weight));
        assert!(st.eval(&UnitVec3::E_X) > 0.0);
    }
}
