use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::geometry::{Rotation, UnitVec3, VmfKernel, DEFAULT_KAPPA_MAX};
use crate::spectral::{InnovationSpec, IntensityMode, DEFAULT_EVENT_CAP};

/// How the persistence `a` was specified.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Persistence {
    Direct { a: f64 },
    /// Continuous time with exponential decay rate `nu`, sampled every `step`.
    Continuous { nu: f64, step: f64 },
    /// Discrete time with geometric weights `(1 − φ) φ^t`.
    Discrete { phi: f64 },
}

impl Persistence {
    pub fn a(&self) -> f64 {
        match *self {
            Persistence::Direct { a } => a,
            Persistence::Continuous { nu, step } => (-nu * step).exp(),
            Persistence::Discrete { phi } => phi,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Persistence::Continuous { nu, step } => {
                if !(nu > 0.0 && nu.is_finite()) {
                    return Err(invalid(format!("nu must be positive, got {nu}")));
                }
                if !(step > 0.0 && step.is_finite()) {
                    return Err(invalid(format!("step must be positive, got {step}")));
                }
            }
            Persistence::Discrete { phi } if !(phi > 0.0 && phi < 1.0) => {
                return Err(invalid(format!("phi must lie in (0, 1), got {phi}")));
            }
            _ => {}
        }
        let a = self.a();
        if !(a > 0.0 && a < 1.0) {
            return Err(invalid(format!("persistence a must lie in (0, 1), got {a}")));
        }
        Ok(())
    }
}

/// Parameters of the chain `X(t, x) = max{a X(t−1, R x), (1 − a) Z(t, x)}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainConfig {
    persistence: Persistence,
    a: f64,
    theta: f64,
    axis: UnitVec3,
    kernel: VmfKernel,
    kappa_max: f64,
    innovation: InnovationSpec,
    intensity: IntensityMode,
    event_cap: usize,
    step_rotation: Rotation,
}

impl ChainConfig {
    pub fn builder() -> ChainConfigBuilder {
        ChainConfigBuilder::default()
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn persistence(&self) -> Persistence {
        self.persistence
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn axis(&self) -> UnitVec3 {
        self.axis
    }

    pub fn kappa(&self) -> f64 {
        self.kernel.kappa()
    }

    pub fn kappa_max(&self) -> f64 {
        self.kappa_max
    }

    pub fn kernel(&self) -> &VmfKernel {
        &self.kernel
    }

    pub fn innovation(&self) -> &InnovationSpec {
        &self.innovation
    }

    pub fn intensity(&self) -> IntensityMode {
        self.intensity
    }

    pub fn intensity_rate(&self) -> f64 {
        self.intensity.rate()
    }

    pub fn event_cap(&self) -> usize {
        self.event_cap
    }

    /// `R_{θ,u}`, the one-step rotation.
    pub fn step_rotation(&self) -> &Rotation {
        &self.step_rotation
    }

    /// Rotation for `s` steps, rebuilt from the angle `θ s`.
    pub fn rotation_for(&self, steps: f64) -> Rotation {
        Rotation::new(self.theta * steps, self.axis).expect("finite angle")
    }

    /// Scale of `sup Z`: `P(sup Z > z) <= sigma_z / z`, with equality in the
    /// limit for the max-stable innovation (`sup Z = sigma_z / E`).
    pub fn sigma_z(&self) -> f64 {
        match &self.innovation {
            InnovationSpec::VmfMaxStable => self.intensity.rate() * self.kernel.sup(),
            InnovationSpec::Custom(g) => g.tail_scale(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ChainConfigBuilder {
    persistence: Option<Persistence>,
    theta: f64,
    axis: UnitVec3,
    kappa: f64,
    kappa_max: f64,
    innovation: InnovationSpec,
    intensity: IntensityMode,
    event_cap: usize,
}

impl Default for ChainConfigBuilder {
    fn default() -> Self {
        ChainConfigBuilder {
            persistence: None,
            theta: 0.0,
            axis: UnitVec3::E_Z,
            kappa: 0.0,
            kappa_max: DEFAULT_KAPPA_MAX,
            innovation: InnovationSpec::VmfMaxStable,
            intensity: IntensityMode::Exact,
            event_cap: DEFAULT_EVENT_CAP,
        }
    }
}

impl ChainConfigBuilder {
    pub fn a(mut self, a: f64) -> Self {
        self.persistence = Some(Persistence::Direct { a });
        self
    }

    pub fn persistence(mut self, p: Persistence) -> Self {
        self.persistence = Some(p);
        self
    }

    pub fn theta(mut self, theta: f64) -> Self {
        self.theta = theta;
        self
    }

    pub fn axis(mut self, axis: UnitVec3) -> Self {
        self.axis = axis;
        self
    }

    pub fn kappa(mut self, kappa: f64) -> Self {
        self.kappa = kappa;
        self
    }

    pub fn kappa_max(mut self, kappa_max: f64) -> Self {
        self.kappa_max = kappa_max;
        self
    }

    pub fn innovation(mut self, spec: InnovationSpec) -> Self {
        self.innovation = spec;
        self
    }

    pub fn intensity(mut self, mode: IntensityMode) -> Self {
        self.intensity = mode;
        self
    }

    pub fn event_cap(mut self, cap: usize) -> Self {
        self.event_cap = cap;
        self
    }

    pub fn build(self) -> Result<ChainConfig> {
        let persistence = self
            .persistence
            .ok_or_else(|| invalid("persistence (a, nu/step or phi) is required"))?;
        persistence.validate()?;
        if self.event_cap == 0 {
            return Err(invalid("event cap must be positive"));
        }
        let kernel = VmfKernel::new(self.kappa, self.kappa_max)?;
        let step_rotation = Rotation::new(self.theta, self.axis)?;
        Ok(ChainConfig {
            persistence,
            a: persistence.a(),
            theta: self.theta,
            axis: self.axis,
            kernel,
            kappa_max: self.kappa_max,
            innovation: self.innovation,
            intensity: self.intensity,
            event_cap: self.event_cap,
            step_rotation,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn provenance_maps_to_a() {
        let c = ChainConfig::builder()
            .persistence(Persistence::Continuous { nu: 0.7, step: 1.0 })
            .build()
            .unwrap();
        assert!((c.a() - (-0.7f64).exp()).abs() < 1e-12);
        assert!((c.a() - 0.49659).abs() < 1e-5);
        let d = ChainConfig::builder()
            .persistence(Persistence::Discrete { phi: 0.3 })
            .build()
            .unwrap();
        assert_eq!(d.a(), 0.3);
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(ChainConfig::builder().a(1.5).build().is_err());
        assert!(ChainConfig::builder().a(0.0).build().is_err());
        assert!(ChainConfig::builder().build().is_err());
        assert!(ChainConfig::builder().a(0.5).kappa(11.0).build().is_err());
        assert!(ChainConfig::builder().a(0.5).kappa(11.0).kappa_max(12.0).build().is_ok());
        assert!(ChainConfig::builder()
            .persistence(Persistence::Continuous { nu: -1.0, step: 1.0 })
            .build()
            .is_err());
        assert!(ChainConfig::builder().a(0.5).theta(f64::NAN).build().is_err());
    }

    #[test]
    fn sigma_z_follows_intensity() {
        let exact = ChainConfig::builder().a(0.5).build().unwrap();
        assert!((exact.sigma_z() - 1.0).abs() < 1e-15);
        let paper = ChainConfig::builder().a(0.5).intensity(IntensityMode::Paper).build().unwrap();
        assert!((paper.sigma_z() - exact.kernel().sup()).abs() < 1e-15);
    }
}
