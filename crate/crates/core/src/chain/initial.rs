use crate::error::{invalid, Result};
use crate::geometry::{UnitVec3, VmfKernel, VmfParams};
use crate::spectral::{InnovationField, SphereField};

/// Initial condition `h` of a chain; every kind has a closed-form supremum.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialField {
    Constant(f64),
    EventSet(InnovationField),
    /// Pointwise maximum `max_k w_k f(x; μ_k, κ_k)` of weighted vMF densities.
    VmfMixture(Vec<(f64, VmfParams)>),
}

impl InitialField {
    pub fn constant(c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(invalid(format!("constant initial field must be positive, got {c}")));
        }
        Ok(InitialField::Constant(c))
    }

    pub fn vmf_mixture(components: Vec<(f64, VmfParams)>) -> Result<Self> {
        if components.is_empty() {
            return Err(invalid("a vMF mixture needs at least one component"));
        }
        if components.iter().any(|(w, _)| !(*w > 0.0 && w.is_finite())) {
            return Err(invalid("mixture weights must be positive and finite"));
        }
        Ok(InitialField::VmfMixture(components))
    }

    pub fn eval(&self, x: &UnitVec3) -> f64 {
        match self {
            InitialField::Constant(c) => *c,
            InitialField::EventSet(f) => f.eval(x),
            InitialField::VmfMixture(parts) => parts
                .iter()
                .map(|(w, p)| w * crate::geometry::vmf_density(x, p))
                .fold(0.0, f64::max),
        }
    }

    pub fn sup(&self) -> f64 {
        match self {
            InitialField::Constant(c) => *c,
            InitialField::EventSet(f) => f.field_sup(),
            InitialField::VmfMixture(parts) => parts
                .iter()
                .map(|(w, p)| w * crate::geometry::vmf_sup(p))
                .fold(0.0, f64::max),
        }
    }

    /// Certified lower bound of the infimum.
    pub fn inf_bound(&self) -> f64 {
        match self {
            InitialField::Constant(c) => *c,
            InitialField::EventSet(f) => f.field_inf_bound(),
            InitialField::VmfMixture(parts) => parts
                .iter()
                .map(|(w, p)| w * VmfKernel::new(p.kappa, f64::INFINITY).map_or(0.0, |k| k.inf()))
                .fold(0.0, f64::max),
        }
    }
}

impl SphereField for InitialField {
    fn eval(&self, x: &UnitVec3) -> f64 {
        InitialField::eval(self, x)
    }

    fn sup_bound(&self) -> f64 {
        self.sup()
    }

    fn inf_bound(&self) -> f64 {
        InitialField::inf_bound(self)
    }
}
