//! Exact simulation of the max-stable innovation field
//! `Z(x) = max_i U_i f(x; μ_i, κ)` from its Poisson spectral representation.
//!
//! Arrivals `S_1 < S_2 < …` of a unit-rate Poisson process are built from
//! partial sums of standard exponentials and mapped to `U_i = r / S_i`, where
//! `r` is the intensity rate (4π for the exact normalization, 1 for the
//! literal one). Marks `μ_i` are uniform on S². Because `U_i` decreases, the
//! maximum is final as soon as the next arrival cannot beat a certified lower
//! envelope of what has already been accumulated.
//!
//! Each arrival consumes the stream in a fixed order (one exponential, then
//! the mark), so the first draw of any simulation is `S_1` and matched seeds
//! share event prefixes across stopping rules.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{uniform_sphere_sample, SphericalGrid, UnitVec3, VmfKernel, DEFAULT_KAPPA_MAX, FOUR_PI};
use crate::rng::RngStream;

pub const DEFAULT_EVENT_CAP: usize = 1_000_000;

/// Relative margin applied to every domination test. Terms are discarded only
/// when they lose by more than rounding can account for, so discarding never
/// changes a computed maximum.
pub(crate) const DOMINATION_MARGIN: f64 = 1.0 + 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum IntensityMode {
    /// `U_i = 4π / S_i`: standard Fréchet margins.
    #[default]
    Exact,
    /// `U_i = 1 / S_i`: the unnormalized surface measure taken literally.
    Paper,
}

impl IntensityMode {
    pub fn rate(self) -> f64 {
        match self {
            IntensityMode::Exact => FOUR_PI,
            IntensityMode::Paper => 1.0,
        }
    }

    /// Scale of the Fréchet margins, `rate · ∫ f dλ / 4π`.
    pub fn margin_scale(self) -> f64 {
        self.rate() / FOUR_PI
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StoppingMode {
    GridExact,
    SphereExact,
}

/// Where a simulated field is guaranteed exact.
#[derive(Debug, Clone, PartialEq)]
pub enum EvalSet {
    Grid(Arc<SphericalGrid>),
    Sphere,
}

impl EvalSet {
    pub fn mode(&self) -> StoppingMode {
        match self {
            EvalSet::Grid(_) => StoppingMode::GridExact,
            EvalSet::Sphere => StoppingMode::SphereExact,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralEvent {
    pub weight: f64,
    pub center: UnitVec3,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnovationOptions {
    pub intensity: IntensityMode,
    pub event_cap: usize,
    pub kappa_max: f64,
}

impl Default for InnovationOptions {
    fn default() -> Self {
        InnovationOptions {
            intensity: IntensityMode::Exact,
            event_cap: DEFAULT_EVENT_CAP,
            kappa_max: DEFAULT_KAPPA_MAX,
        }
    }
}

/// A stopped realization of Z: finitely many weighted vMF atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct InnovationField {
    events: Vec<SpectralEvent>,
    kernel: VmfKernel,
    eval_set: EvalSet,
    intensity_rate: f64,
}

/// When to stop drawing arrivals.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Stop<'a> {
    /// Exact on the grid nodes.
    Grid(&'a SphericalGrid),
    /// Exact everywhere on S², given that the field will be combined by a
    /// maximum with something bounded below by `floor`.
    Sphere { floor: f64 },
    /// Exactly this many arrivals, no stopping rule.
    Count(usize),
}

#[inline]
fn next_arrival<R: Rng + ?Sized>(arrival: &mut f64, rate: f64, rng: &mut R) -> f64 {
    let e: f64 = rng.sample(Exp1);
    *arrival += e;
    rate / *arrival
}

/// Draws the stopped event list, sorted by decreasing weight.
pub(crate) fn draw_events<R: Rng + ?Sized>(
    kernel: &VmfKernel,
    rate: f64,
    stop: Stop<'_>,
    cap: usize,
    rng: &mut R,
) -> Result<Vec<SpectralEvent>> {
    let fmax = kernel.sup();
    let fmin = kernel.inf();
    let mut events = Vec::new();
    let mut arrival = 0.0;
    match stop {
        Stop::Count(n) => {
            events.reserve(n);
            for _ in 0..n {
                let weight = next_arrival(&mut arrival, rate, rng);
                let center = uniform_sphere_sample(rng);
                events.push(SpectralEvent { weight, center });
            }
        }
        Stop::Sphere { floor } => loop {
            let weight = next_arrival(&mut arrival, rate, rng);
            let own_floor = events.first().map_or(0.0, |e: &SpectralEvent| e.weight * fmin);
            if weight * fmax * DOMINATION_MARGIN < floor.max(own_floor) {
                break;
            }
            if events.len() == cap {
                return Err(Error::ResourceLimit { kappa: kernel.kappa(), cap });
            }
            let center = uniform_sphere_sample(rng);
            events.push(SpectralEvent { weight, center });
        },
        Stop::Grid(grid) => {
            let mut envelope = vec![0.0; grid.len()];
            let mut lowest = 0.0;
            loop {
                let weight = next_arrival(&mut arrival, rate, rng);
                if weight * fmax * DOMINATION_MARGIN < lowest {
                    break;
                }
                if events.len() == cap {
                    return Err(Error::ResourceLimit { kappa: kernel.kappa(), cap });
                }
                let center = uniform_sphere_sample(rng);
                lowest = f64::INFINITY;
                for (env, x) in envelope.iter_mut().zip(grid.nodes()) {
                    let v = weight * kernel.density(x, &center);
                    if v > *env {
                        *env = v;
                    }
                    lowest = lowest.min(*env);
                }
                events.push(SpectralEvent { weight, center });
            }
        }
    }
    Ok(events)
}

/// Simulates Z exactly on `eval_set`.
pub fn simulate_innovation(
    kappa: f64,
    eval_set: &EvalSet,
    opts: &InnovationOptions,
    rng: &mut RngStream,
) -> Result<InnovationField> {
    let kernel = VmfKernel::new(kappa, opts.kappa_max)?;
    let rate = opts.intensity.rate();
    let stop = match eval_set {
        EvalSet::Grid(g) => Stop::Grid(g),
        EvalSet::Sphere => Stop::Sphere { floor: 0.0 },
    };
    let events = draw_events(&kernel, rate, stop, opts.event_cap, rng)?;
    Ok(InnovationField {
        events,
        kernel,
        eval_set: eval_set.clone(),
        intensity_rate: rate,
    })
}

/// The first `count` spectral events with no stopping rule; the brute-force
/// reference for the stopped simulations at matched seeds.
pub fn simulate_events_uncapped(
    kappa: f64,
    count: usize,
    opts: &InnovationOptions,
    rng: &mut RngStream,
) -> Result<Vec<SpectralEvent>> {
    let kernel = VmfKernel::new(kappa, opts.kappa_max)?;
    draw_events(&kernel, opts.intensity.rate(), Stop::Count(count), usize::MAX, rng)
}

/// `U_1` alone; identical to the top weight of any simulation at the same
/// stream position.
pub fn draw_top_weight<R: Rng + ?Sized>(intensity: IntensityMode, rng: &mut R) -> f64 {
    let mut arrival = 0.0;
    next_arrival(&mut arrival, intensity.rate(), rng)
}

impl InnovationField {
    /// Wraps a hand-built event list, e.g. a stub for testing.
    pub fn from_events(events: Vec<SpectralEvent>, kappa: f64, eval_set: EvalSet, intensity_rate: f64) -> Result<Self> {
        if events.is_empty() {
            return Err(invalid("an innovation field needs at least one event"));
        }
        if events.iter().any(|e| !(e.weight > 0.0 && e.weight.is_finite())) {
            return Err(invalid("event weights must be positive and finite"));
        }
        if events.windows(2).any(|w| w[1].weight > w[0].weight) {
            return Err(invalid("events must be sorted by decreasing weight"));
        }
        if !(intensity_rate > 0.0) {
            return Err(invalid("intensity rate must be positive"));
        }
        Ok(InnovationField {
            events,
            kernel: VmfKernel::new(kappa, f64::INFINITY)?,
            eval_set,
            intensity_rate,
        })
    }

    pub fn events(&self) -> &[SpectralEvent] {
        &self.events
    }

    pub fn kappa(&self) -> f64 {
        self.kernel.kappa()
    }

    pub fn kernel(&self) -> &VmfKernel {
        &self.kernel
    }

    pub fn mode(&self) -> StoppingMode {
        self.eval_set.mode()
    }

    pub fn eval_set(&self) -> &EvalSet {
        &self.eval_set
    }

    pub fn intensity_rate(&self) -> f64 {
        self.intensity_rate
    }

    /// `max_i weight_i · f(x; center_i, κ)` over the stored events.
    pub fn eval(&self, x: &UnitVec3) -> f64 {
        eval_events(&self.kernel, &self.events, x, 0.0)
    }

    /// The value together with whether it is guaranteed to equal the
    /// unstopped field. Off-grid points of a grid-exact field are lower
    /// bounds only.
    pub fn eval_checked(&self, x: &UnitVec3) -> (f64, bool) {
        let exact = match &self.eval_set {
            EvalSet::Sphere => true,
            EvalSet::Grid(g) => g.nodes().contains(x),
        };
        (self.eval(x), exact)
    }

    /// `sup_x Z(x)`, attained at the top event's center.
    pub fn field_sup(&self) -> f64 {
        self.events[0].weight * self.kernel.sup()
    }

    /// Certified lower bound of `inf_x Z(x)`.
    pub fn field_inf_bound(&self) -> f64 {
        self.events[0].weight * self.kernel.inf()
    }
}

/// Max over a weight-sorted event list, starting from `start`. Stops early
/// once the remaining events are strictly dominated.
#[inline]
pub(crate) fn eval_events(kernel: &VmfKernel, events: &[SpectralEvent], x: &UnitVec3, start: f64) -> f64 {
    let fmax = kernel.sup();
    let mut best = start;
    for e in events {
        if e.weight * fmax * DOMINATION_MARGIN < best {
            break;
        }
        let v = e.weight * kernel.density(x, &e.center);
        if v > best {
            best = v;
        }
    }
    best
}

/// A continuous, positive random field evaluable anywhere on S².
pub trait SphereField: Send + Sync + fmt::Debug {
    fn eval(&self, x: &UnitVec3) -> f64;

    /// Upper bound of `sup_x` of the field.
    fn sup_bound(&self) -> f64;

    /// Lower bound of `inf_x` of the field; zero when none is known.
    fn inf_bound(&self) -> f64 {
        0.0
    }
}

impl SphereField for InnovationField {
    fn eval(&self, x: &UnitVec3) -> f64 {
        InnovationField::eval(self, x)
    }

    fn sup_bound(&self) -> f64 {
        self.field_sup()
    }

    fn inf_bound(&self) -> f64 {
        self.field_inf_bound()
    }
}

/// Generator of bounded, a.s. positive, sample-continuous innovations used
/// in place of the max-stable field.
pub trait InnovationGenerator: Send + Sync + fmt::Debug {
    /// One realization. Its `sup_bound` must be finite and computable per
    /// realization.
    fn generate(&self, rng: &mut RngStream) -> Result<Arc<dyn SphereField>>;

    /// A constant `c` with `P(sup Z > z) <= c / z` for all z > 0; sizes the
    /// truncation of the stationary series.
    fn tail_scale(&self) -> f64;
}

#[derive(Debug, Clone)]
pub enum InnovationSpec {
    VmfMaxStable,
    Custom(Arc<dyn InnovationGenerator>),
}

impl PartialEq for InnovationSpec {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (InnovationSpec::VmfMaxStable, InnovationSpec::VmfMaxStable) => true,
            (InnovationSpec::Custom(a), InnovationSpec::Custom(b)) => Arc::ptr_eq(a, b),
            _ => false,
        }
    }
}

pub(crate) fn check_custom_field(field: &dyn SphereField) -> Result<()> {
    let sup = field.sup_bound();
    if !(sup > 0.0 && sup.is_finite()) {
        return Err(invalid(format!("custom innovation declared sup bound {sup}")));
    }
    if !(field.inf_bound() >= 0.0) {
        return Err(invalid("custom innovation declared a negative inf bound"));
    }
    Ok(())
}
