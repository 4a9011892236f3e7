//! Exactly evaluable chain states.
//!
//! A state after `t` steps is kept in unrolled form
//!
//! ```text
//! X(t, x) = max( a^t h(R_{θt} x),  max_k w_k f(x; c_k, κ),  max_m v_m g_m(R_{θ s_m} x) )
//! ```
//!
//! Rotations of the vMF atoms are folded into their centers using
//! `f(R x; μ) = f(x; Rᵀ μ)`, so a step costs one counter-rotation per stored
//! atom. The initial term and custom innovation terms keep their accumulated
//! angle and rebuild the rotation matrix from it.

use std::sync::Arc;

use super::{ChainConfig, InitialField};
use crate::error::{invalid, Result};
use crate::geometry::{Rotation, UnitVec3};
use crate::rng::RngStream;
use crate::spectral::{
    check_custom_field, draw_events, eval_events, InnovationSpec, SpectralEvent, SphereField, Stop, DOMINATION_MARGIN,
};

/// The innovation consumed by one transition, before scaling by `1 − a^s`.
#[derive(Debug, Clone)]
pub enum Innovation {
    /// Raw spectral events (`U_i`, `μ_i`), sorted by decreasing weight.
    Events(Vec<SpectralEvent>),
    Field(Arc<dyn SphereField>),
}

#[derive(Debug, Clone)]
struct FieldTerm {
    weight: f64,
    angle: f64,
    rotation: Rotation,
    field: Arc<dyn SphereField>,
}

#[derive(Debug, Clone)]
pub struct ChainState {
    t: u64,
    elapsed: f64,
    config: Arc<ChainConfig>,
    scale: f64,
    angle: f64,
    rotation: Rotation,
    initial: Option<InitialField>,
    events: Vec<SpectralEvent>,
    fields: Vec<FieldTerm>,
    pruning: bool,
    depth: Option<usize>,
}

impl ChainState {
    /// The state `X(0, ·) = h`.
    pub fn new(config: Arc<ChainConfig>, initial: InitialField) -> Self {
        ChainState {
            t: 0,
            elapsed: 0.0,
            config,
            scale: 1.0,
            angle: 0.0,
            rotation: Rotation::identity(),
            initial: Some(initial),
            events: Vec::new(),
            fields: Vec::new(),
            pruning: true,
            depth: None,
        }
    }

    /// A state with no initial term, filled by the stationary sampler.
    pub(crate) fn from_parts(
        config: Arc<ChainConfig>,
        events: Vec<SpectralEvent>,
        fields: Vec<(f64, f64, Arc<dyn SphereField>)>,
        depth: usize,
    ) -> Self {
        let axis = config.axis();
        let fields = fields
            .into_iter()
            .map(|(weight, angle, field)| FieldTerm {
                weight,
                angle,
                rotation: Rotation::new(angle, axis).expect("finite angle"),
                field,
            })
            .collect();
        let mut state = ChainState {
            t: 0,
            elapsed: 0.0,
            config,
            scale: 0.0,
            angle: 0.0,
            rotation: Rotation::identity(),
            initial: None,
            events,
            fields,
            pruning: true,
            depth: Some(depth),
        };
        state.prune_in_place();
        state
    }

    /// Enables or disables pruning in subsequent steps; disabling keeps every
    /// dominated term, which is only useful as a reference.
    pub fn with_pruning(mut self, on: bool) -> Self {
        self.pruning = on;
        self
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    /// Total time elapsed, `Σ s` over the steps taken.
    pub fn elapsed(&self) -> f64 {
        self.elapsed
    }

    pub fn config(&self) -> &Arc<ChainConfig> {
        &self.config
    }

    /// `a^elapsed`, the factor on the initial field.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Accumulated rotation angle of the initial term.
    pub fn accumulated_angle(&self) -> f64 {
        self.angle
    }

    pub fn initial(&self) -> Option<&InitialField> {
        self.initial.as_ref()
    }

    pub fn events(&self) -> &[SpectralEvent] {
        &self.events
    }

    pub fn custom_terms(&self) -> usize {
        self.fields.len()
    }

    /// Truncation depth, for states produced by the stationary sampler.
    pub fn depth(&self) -> Option<usize> {
        self.depth
    }

    pub fn eval(&self, x: &UnitVec3) -> f64 {
        let kernel = self.config.kernel();
        let mut best = match &self.initial {
            Some(h) => self.scale * h.eval(&self.rotation.apply(x)),
            None => 0.0,
        };
        best = eval_events(kernel, &self.events, x, best);
        for term in &self.fields {
            let v = term.weight * term.field.eval(&term.rotation.apply(x));
            if v > best {
                best = v;
            }
        }
        best
    }

    /// `sup_x X(t, x)`; exact unless custom innovation terms are present, in
    /// which case their declared bounds enter.
    pub fn sup(&self) -> f64 {
        let mut s = self.initial.as_ref().map_or(0.0, |h| self.scale * h.sup());
        if let Some(top) = self.events.first() {
            s = s.max(top.weight * self.config.kernel().sup());
        }
        self.fields.iter().fold(s, |s, f| s.max(f.weight * f.field.sup_bound()))
    }

    /// Certified lower bound of `inf_x X(t, x)`: the largest lower bound among
    /// the individual terms.
    pub fn lower_envelope(&self) -> f64 {
        let mut env = self.initial.as_ref().map_or(0.0, |h| self.scale * h.inf_bound());
        if let Some(top) = self.events.first() {
            env = env.max(top.weight * self.config.kernel().inf());
        }
        self.fields.iter().fold(env, |e, f| e.max(f.weight * f.field.inf_bound()))
    }

    fn decay(&self, s: f64) -> f64 {
        if s == 1.0 {
            self.config.a()
        } else {
            self.config.a().powf(s)
        }
    }

    fn check_step(&self, s: f64) -> Result<()> {
        if !(s > 0.0 && s.is_finite()) {
            return Err(invalid(format!("step length must be positive, got {s}")));
        }
        if matches!(self.config.persistence(), super::Persistence::Discrete { .. }) && s.fract() != 0.0 {
            return Err(invalid("fractional steps need a continuous-time chain"));
        }
        Ok(())
    }

    /// Innovation for a step of length `s`, stopped once further events are
    /// dominated by this state's aged lower envelope.
    pub fn draw_innovation(&self, s: f64, rng: &mut RngStream) -> Result<Innovation> {
        self.check_step(s)?;
        draw_shared_innovation(&[self], s, rng)
    }

    /// One transition with a fresh innovation.
    pub fn step(&self, rng: &mut RngStream) -> Result<ChainState> {
        self.step_s(1.0, rng)
    }

    /// A transition over time `s`: `max{a^s X(R_{θs} x), (1 − a^s) Z(x)}`.
    pub fn step_s(&self, s: f64, rng: &mut RngStream) -> Result<ChainState> {
        let innovation = self.draw_innovation(s, rng)?;
        self.step_s_with(s, &innovation)
    }

    /// One transition with a given innovation.
    pub fn step_with(&self, innovation: &Innovation) -> ChainState {
        self.advance(1.0, innovation)
    }

    pub fn step_s_with(&self, s: f64, innovation: &Innovation) -> Result<ChainState> {
        self.check_step(s)?;
        Ok(self.advance(s, innovation))
    }

    fn advance(&self, s: f64, innovation: &Innovation) -> ChainState {
        let a_s = self.decay(s);
        let rot = if s == 1.0 {
            *self.config.step_rotation()
        } else {
            self.config.rotation_for(s)
        };
        let axis = self.config.axis();
        let turn = self.config.theta() * s;

        let angle = self.angle + turn;
        let aged: Vec<SpectralEvent> = self
            .events
            .iter()
            .map(|e| SpectralEvent {
                weight: e.weight * a_s,
                center: rot.apply_transpose(&e.center).renormalized(),
            })
            .collect();
        let mut fields: Vec<FieldTerm> = self
            .fields
            .iter()
            .map(|f| {
                let angle = f.angle + turn;
                FieldTerm {
                    weight: f.weight * a_s,
                    angle,
                    rotation: Rotation::new(angle, axis).expect("finite angle"),
                    field: Arc::clone(&f.field),
                }
            })
            .collect();

        let fresh_weight = 1.0 - a_s;
        let events = match innovation {
            Innovation::Events(raw) => merge_sorted(
                aged,
                raw.iter().map(|e| SpectralEvent {
                    weight: e.weight * fresh_weight,
                    center: e.center,
                }),
            ),
            Innovation::Field(field) => {
                fields.push(FieldTerm {
                    weight: fresh_weight,
                    angle: 0.0,
                    rotation: Rotation::identity(),
                    field: Arc::clone(field),
                });
                aged
            }
        };

        let elapsed = self.elapsed + s;
        // Recomputed from the elapsed time so that equal elapsed times give
        // bit-equal scales however the time was split into steps.
        let scale = if self.scale == 0.0 { 0.0 } else { self.config.a().powf(elapsed) };
        let mut next = ChainState {
            t: self.t + 1,
            elapsed,
            config: Arc::clone(&self.config),
            scale,
            angle,
            rotation: Rotation::new(angle, axis).expect("finite angle"),
            initial: self.initial.clone(),
            events,
            fields,
            pruning: self.pruning,
            depth: self.depth,
        };
        if next.pruning {
            next.prune_in_place();
        }
        next
    }

    /// Removes every term that is dominated everywhere on S² by the lower
    /// envelope. Evaluation is unchanged at every point.
    pub fn prune(&self) -> ChainState {
        let mut next = self.clone();
        next.prune_in_place();
        next
    }

    fn prune_in_place(&mut self) {
        let env = self.lower_envelope();
        if env <= 0.0 {
            return;
        }
        let fmax = self.config.kernel().sup();
        let keep = self.events.partition_point(|e| e.weight * fmax * DOMINATION_MARGIN >= env);
        self.events.truncate(keep);
        self.fields
            .retain(|f| f.weight * f.field.sup_bound() * DOMINATION_MARGIN >= env);
        if let Some(h) = &self.initial {
            if self.scale * h.sup() * DOMINATION_MARGIN < env {
                self.initial = None;
            }
        }
    }
}

/// Merges the aged events with the new ones; on equal weights older events
/// come first.
fn merge_sorted(old: Vec<SpectralEvent>, new: impl Iterator<Item = SpectralEvent>) -> Vec<SpectralEvent> {
    let new: Vec<SpectralEvent> = new.collect();
    let mut out = Vec::with_capacity(old.len() + new.len());
    let (mut i, mut j) = (0, 0);
    while i < old.len() && j < new.len() {
        if old[i].weight >= new[j].weight {
            out.push(old[i]);
            i += 1;
        } else {
            out.push(new[j]);
            j += 1;
        }
    }
    out.extend_from_slice(&old[i..]);
    out.extend_from_slice(&new[j..]);
    out
}

/// One innovation shared by several chains (synchronous coupling). Stopping
/// uses the smallest aged lower envelope, so the draw is exact for each.
pub fn draw_shared_innovation(states: &[&ChainState], s: f64, rng: &mut RngStream) -> Result<Innovation> {
    let first = states
        .first()
        .ok_or_else(|| invalid("at least one state is needed to draw an innovation"))?;
    let config = first.config();
    let a_s = first.decay(s);
    let floor = states
        .iter()
        .map(|st| a_s * st.lower_envelope())
        .fold(f64::INFINITY, f64::min);
    match config.innovation() {
        InnovationSpec::VmfMaxStable => {
            let events = draw_events(
                config.kernel(),
                config.intensity_rate(),
                Stop::Sphere {
                    floor: floor / (1.0 - a_s),
                },
                config.event_cap(),
                rng,
            )?;
            Ok(Innovation::Events(events))
        }
        InnovationSpec::Custom(generator) => {
            let field = generator.generate(rng)?;
            check_custom_field(field.as_ref())?;
            Ok(Innovation::Field(field))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::Persistence;
    use crate::geometry::{fibonacci_grid, uniform_sphere_sample, vmf_density, VmfParams};

    fn config(a: f64, theta: f64, kappa: f64) -> Arc<ChainConfig> {
        Arc::new(
            ChainConfig::builder()
                .a(a)
                .theta(theta)
                .axis(UnitVec3::new(1.0, 1.0, 0.5).unwrap())
                .kappa(kappa)
                .build()
                .unwrap(),
        )
    }

    fn stub(weight: f64, center: UnitVec3) -> Innovation {
        Innovation::Events(vec![SpectralEvent { weight, center }])
    }

    #[test]
    fn fresh_state_is_initial_field() {
        let st = ChainState::new(config(0.5, 0.3, 1.0), InitialField::constant(2.5).unwrap());
        assert_eq!(st.eval(&UnitVec3::E_Y), 2.5);
        assert_eq!(st.t(), 0);
    }

    #[test]
    fn one_step_with_stub() {
        let cfg = config(0.4, 0.3, 2.0);
        let mu = UnitVec3::new(0.2, -0.4, 0.8).unwrap();
        let st = ChainState::new(Arc::clone(&cfg), InitialField::constant(0.1).unwrap())
            .with_pruning(false)
            .step_with(&stub(3.0, mu));
        let p = VmfParams::new(mu, 2.0).unwrap();
        let mut rng = RngStream::new(1);
        for _ in 0..10 {
            let x = uniform_sphere_sample(&mut rng);
            let want = (0.4f64 * 0.1).max(0.6 * 3.0 * vmf_density(&x, &p));
            assert!(((st.eval(&x) - want) / want).abs() < 1e-14);
        }
    }

    #[test]
    fn two_steps_without_rotation() {
        let cfg = config(0.5, 0.0, 1.0);
        let (m1, m2) = (UnitVec3::E_X, UnitVec3::new(0.0, 0.6, 0.8).unwrap());
        let st = ChainState::new(Arc::clone(&cfg), InitialField::constant(1.0).unwrap())
            .step_with(&stub(2.0, m1))
            .step_with(&stub(5.0, m2));
        let (p1, p2) = (VmfParams::new(m1, 1.0).unwrap(), VmfParams::new(m2, 1.0).unwrap());
        let mut rng = RngStream::new(2);
        for _ in 0..10 {
            let x = uniform_sphere_sample(&mut rng);
            let want = 0.25f64
                .max(0.5 * 0.5 * 2.0 * vmf_density(&x, &p1))
                .max(0.5 * 5.0 * vmf_density(&x, &p2));
            assert!(((st.eval(&x) - want) / want).abs() < 1e-14);
        }
    }

    #[test]
    fn folded_rotation_matches_forward_rotation() {
        // Oracle: keep the original marks and rotate the argument forward.
        let cfg = config(0.7, 0.9, 2.0);
        let h = InitialField::vmf_mixture(vec![(4.0, VmfParams::new(UnitVec3::E_Z, 1.0).unwrap())]).unwrap();
        let mut st = ChainState::new(Arc::clone(&cfg), h.clone()).with_pruning(false);
        let mut rng = RngStream::new(33);
        let mut history = Vec::new();
        for _ in 0..5 {
            let events: Vec<SpectralEvent> = (0..4)
                .map(|k| SpectralEvent {
                    weight: 10.0 / (k + 1) as f64,
                    center: uniform_sphere_sample(&mut rng),
                })
                .collect();
            st = st.step_with(&Innovation::Events(events.clone()));
            history.push(events);
        }
        let r = cfg.step_rotation();
        for _ in 0..20 {
            let x = uniform_sphere_sample(&mut rng);
            let mut forward = vec![x];
            for j in 1..=5 {
                forward.push(r.apply(&forward[j - 1]));
            }
            let a: f64 = 0.7;
            let mut want = a.powi(5) * h.eval(&forward[5]);
            for (birth, events) in history.iter().enumerate() {
                let age = 4 - birth;
                for e in events {
                    let p = VmfParams::new(e.center, 2.0).unwrap();
                    want = want.max(a.powi(age as i32) * (1.0 - a) * e.weight * vmf_density(&forward[age], &p));
                }
            }
            let got = st.eval(&x);
            assert!(((got - want) / want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn pruning_uniform_kernel_keeps_top_only() {
        let cfg = config(0.5, 0.2, 0.0);
        let st = ChainState::new(cfg, InitialField::constant(1e-9).unwrap())
            .with_pruning(false)
            .step_with(&Innovation::Events(vec![
                SpectralEvent { weight: 3.0, center: UnitVec3::E_X },
                SpectralEvent { weight: 2.0, center: UnitVec3::E_Y },
                SpectralEvent { weight: 1.0, center: UnitVec3::E_Z },
            ]));
        let pruned = st.prune();
        assert_eq!(pruned.events().len(), 1);
        assert!(pruned.initial().is_none());
        assert_eq!(pruned.eval(&UnitVec3::E_Z), st.eval(&UnitVec3::E_Z));
    }

    #[test]
    fn pruning_drops_tiny_event() {
        let cfg = config(0.5, 0.0, 2.0);
        let mut st = ChainState::new(cfg, InitialField::constant(1e-12).unwrap()).with_pruning(false);
        st.events = vec![
            SpectralEvent { weight: 1.0, center: UnitVec3::E_Z },
            SpectralEvent { weight: 1e-9, center: UnitVec3::E_X },
        ];
        let pruned = st.prune();
        assert_eq!(pruned.events().len(), 1);
        assert_eq!(pruned.events()[0].weight, 1.0);
    }

    #[test]
    fn pruned_and_unpruned_twins_agree() {
        let cfg = config(0.5, 0.4, 2.0);
        let grid = fibonacci_grid(500).unwrap();
        let h = InitialField::constant(0.01).unwrap();
        let mut pruned = ChainState::new(Arc::clone(&cfg), h.clone());
        let mut full = ChainState::new(cfg, h).with_pruning(false);
        let root = RngStream::new(99);
        for t in 0..30 {
            let mut r1 = root.derive(crate::rng::Purpose::Step, t);
            let mut r2 = root.derive(crate::rng::Purpose::Step, t);
            pruned = pruned.step(&mut r1).unwrap();
            full = full.step(&mut r2).unwrap();
            for x in grid.nodes() {
                assert_eq!(pruned.eval(x), full.eval(x));
            }
        }
        assert!(pruned.events().len() <= full.events().len());
    }

    #[test]
    fn step_s_one_equals_step() {
        let cfg = Arc::new(
            ChainConfig::builder()
                .persistence(Persistence::Continuous { nu: 0.7, step: 1.0 })
                .theta(0.3)
                .kappa(1.0)
                .build()
                .unwrap(),
        );
        let st = ChainState::new(cfg, InitialField::constant(0.5).unwrap());
        let a = st.step(&mut RngStream::new(5)).unwrap();
        let b = st.step_s(1.0, &mut RngStream::new(5)).unwrap();
        assert_eq!(a.events(), b.events());
        assert_eq!(a.scale(), b.scale());
        assert!(st.step_s(0.0, &mut RngStream::new(5)).is_err());
        assert!(st.step_s(-1.0, &mut RngStream::new(5)).is_err());
    }

    #[test]
    fn tiny_step_changes_little() {
        let cfg = config(0.5, 0.3, 1.0);
        let mut st = ChainState::new(Arc::clone(&cfg), InitialField::constant(1.0).unwrap());
        st = st.step_with(&stub(4.0, UnitVec3::E_X));
        let next = st.step_s_with(1e-6, &stub(1.0, UnitVec3::E_Y)).unwrap();
        let mut rng = RngStream::new(3);
        for _ in 0..20 {
            let x = uniform_sphere_sample(&mut rng);
            let (before, after) = (st.eval(&x), next.eval(&x));
            assert!(((after - before) / before).abs() < 1e-4);
        }
    }

    #[test]
    fn discrete_chain_rejects_fractional_step() {
        let cfg = Arc::new(
            ChainConfig::builder()
                .persistence(Persistence::Discrete { phi: 0.5 })
                .build()
                .unwrap(),
        );
        let st = ChainState::new(cfg, InitialField::constant(1.0).unwrap());
        assert!(st.step_s(0.5, &mut RngStream::new(1)).is_err());
        assert!(st.step_s(2.0, &mut RngStream::new(1)).is_ok());
    }

    #[test]
    fn time_homogeneous() {
        let cfg = config(0.6, 0.3, 1.0);
        let base = ChainState::new(cfg, InitialField::constant(0.3).unwrap());
        let mut later = base.clone();
        later.t = 1234;
        let a = base.step(&mut RngStream::new(8)).unwrap();
        let b = later.step(&mut RngStream::new(8)).unwrap();
        let mut rng = RngStream::new(4);
        for _ in 0..20 {
            let x = uniform_sphere_sample(&mut rng);
            assert_eq!(a.eval(&x), b.eval(&x));
        }
    }

    #[test]
    fn always_positive_with_some_term() {
        let cfg = config(0.5, 1.0, 2.0);
        let mut st = ChainState::new(cfg, InitialField::constant(50.0).unwrap());
        let root = RngStream::new(6);
        for t in 0..40 {
            st = st.step(&mut root.derive(crate::rng::Purpose::Step, t)).unwrap();
            assert!(st.initial().is_some() || !st.events().is_empty());
            assert!(st.eval(&UnitVec3::E_X) > 0.0);
        }
    }
}
