//! Numerical certificates for geometric ergodicity of the chain: the
//! Lyapunov drift inequality, one-step coupling behind the minorization
//! bound, and an empirical rate of loss of memory.

use std::sync::Arc;

use serde::Serialize;

use crate::chain::{draw_shared_innovation, stationary_draw, ChainConfig, ChainState, InitialField, StationaryParams};
use crate::error::{invalid, Result};
use crate::geometry::{SphericalGrid, UnitVec3, VmfKernel};
use crate::rng::{replicate, Purpose, RngStream};
use crate::special::{gamma, lower_incomplete_gamma};
use crate::spectral::{check_custom_field, draw_top_weight, InnovationField, InnovationSpec};
use crate::stats::{ls_slope, mean_stderr};
use crate::validation::{ks_frechet_scaled, KS_CRITICAL_1PCT};

/// Anything with a closed-form supremum over S².
pub trait SupNorm {
    fn sup_norm(&self) -> f64;
}

impl SupNorm for InitialField {
    fn sup_norm(&self) -> f64 {
        self.sup()
    }
}

impl SupNorm for ChainState {
    fn sup_norm(&self) -> f64 {
        self.sup()
    }
}

impl SupNorm for InnovationField {
    fn sup_norm(&self) -> f64 {
        self.field_sup()
    }
}

fn check_gamma(g: f64) -> Result<()> {
    if !(g > 0.0 && g < 1.0) {
        return Err(invalid(format!("gamma must lie in (0, 1), got {g}")));
    }
    Ok(())
}

/// `L(h) = ‖h‖_∞^γ`.
pub fn lyapunov<H: SupNorm + ?Sized>(h: &H, gamma: f64) -> Result<f64> {
    check_gamma(gamma)?;
    Ok(h.sup_norm().powf(gamma))
}

/// Constants of the drift inequality `(PL)(h) ≤ β L(h) + K`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DriftParams {
    pub gamma: f64,
    pub beta: f64,
    pub big_k: f64,
}

impl DriftParams {
    pub fn new(gamma: f64, a: f64, sigma_z: f64) -> Result<Self> {
        check_gamma(gamma)?;
        Ok(DriftParams {
            gamma,
            beta: a.powf(gamma),
            big_k: ((1.0 - a) * sigma_z).powf(gamma) * crate::special::gamma(1.0 - gamma),
        })
    }

    pub fn for_config(gamma: f64, config: &ChainConfig) -> Result<Self> {
        Self::new(gamma, config.a(), config.sigma_z())
    }
}

/// `E[max(a^γ L, ((1 − a) ‖Z‖_∞)^γ)]` with `‖Z‖_∞ = σ_Z / E`, `E ~ Exp(1)`.
pub fn pl_closed_form(l_h: f64, gamma_exp: f64, a: f64, sigma_z: f64) -> Result<f64> {
    if gamma_exp >= 1.0 {
        return Err(invalid(format!("gamma = {gamma_exp} makes the moment diverge")));
    }
    check_gamma(gamma_exp)?;
    if !(l_h >= 0.0 && l_h.is_finite()) {
        return Err(invalid(format!("L(h) must be finite and nonnegative, got {l_h}")));
    }
    if !(a > 0.0 && a < 1.0) || !(sigma_z > 0.0) {
        return Err(invalid("need a in (0, 1) and sigma_z > 0"));
    }
    let c = a.powf(gamma_exp) * l_h;
    let m = (1.0 - a) * sigma_z;
    if c == 0.0 {
        return Ok(m.powf(gamma_exp) * gamma(1.0 - gamma_exp));
    }
    let x = m * c.powf(-1.0 / gamma_exp);
    Ok(c * (-x).exp() + m.powf(gamma_exp) * lower_incomplete_gamma(1.0 - gamma_exp, x)?)
}

/// `‖Z‖_∞` of one fresh innovation. The max-stable field needs only its top
/// event.
fn innovation_sup(config: &ChainConfig, rng: &mut RngStream) -> Result<f64> {
    match config.innovation() {
        InnovationSpec::VmfMaxStable => Ok(draw_top_weight(config.intensity(), rng) * config.kernel().sup()),
        InnovationSpec::Custom(g) => {
            let f = g.generate(rng)?;
            check_custom_field(f.as_ref())?;
            Ok(f.sup_bound())
        }
    }
}

/// Monte Carlo `(PL)(h)` for a field with `L(h) = l_h`; returns the
/// estimate and its standard error.
pub fn pl_monte_carlo_at(l_h: f64, config: &ChainConfig, gamma: f64, n: usize, rng: &RngStream) -> Result<(f64, f64)> {
    check_gamma(gamma)?;
    if n < 100 {
        return Err(invalid(format!("at least 100 replicates are needed, got {n}")));
    }
    let a = config.a();
    let c = a.powf(gamma) * l_h;
    let values: Vec<f64> = replicate(rng, Purpose::Replicate, n, |_, r| {
        innovation_sup(config, r).map(|s| c.max(((1.0 - a) * s).powf(gamma)))
    })
    .into_iter()
    .collect::<Result<_>>()?;
    Ok(mean_stderr(&values))
}

pub fn pl_monte_carlo<H: SupNorm + ?Sized>(
    h: &H,
    config: &ChainConfig,
    gamma: f64,
    n: usize,
    rng: &RngStream,
) -> Result<(f64, f64)> {
    pl_monte_carlo_at(lyapunov(h, gamma)?, config, gamma, n, rng)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DriftReport {
    pub l_h: f64,
    pub pl_closed: f64,
    pub pl_mc: f64,
    pub mc_stderr: f64,
    pub rhs: f64,
    pub params: DriftParams,
    pub pass: bool,
    pub n: usize,
    pub seed: u64,
}

impl DriftReport {
    /// `pl_mc ≤ β L(h) + K + 3 se`.
    pub fn bound_holds(&self) -> bool {
        self.pl_mc <= self.rhs + 3.0 * self.mc_stderr
    }

    /// `|pl_mc − pl_closed| ≤ 3 se`.
    pub fn closed_form_agrees(&self) -> bool {
        (self.pl_mc - self.pl_closed).abs() <= 3.0 * self.mc_stderr
    }
}

pub fn drift_check_at(l_h: f64, config: &ChainConfig, gamma: f64, n: usize, rng: &RngStream) -> Result<DriftReport> {
    let params = DriftParams::for_config(gamma, config)?;
    let pl_closed = pl_closed_form(l_h, gamma, config.a(), config.sigma_z())?;
    let (pl_mc, mc_stderr) = pl_monte_carlo_at(l_h, config, gamma, n, rng)?;
    let mut report = DriftReport {
        l_h,
        pl_closed,
        pl_mc,
        mc_stderr,
        rhs: params.beta * l_h + params.big_k,
        params,
        pass: false,
        n,
        seed: rng.master_seed(),
    };
    report.pass = report.bound_holds() && report.closed_form_agrees();
    Ok(report)
}

pub fn drift_check<H: SupNorm + ?Sized>(
    h: &H,
    config: &ChainConfig,
    gamma: f64,
    n: usize,
    rng: &RngStream,
) -> Result<DriftReport> {
    drift_check_at(lyapunov(h, gamma)?, config, gamma, n, rng)
}

/// Lower bound on the probability that one innovation dominates, everywhere,
/// both aged histories of sup at most `r`:
/// `1 − exp(−rate f_min (1 − a) / (a R))`.
pub fn minorization_alpha(r: f64, a: f64, kappa: f64, intensity_rate: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(invalid(format!("R must be positive, got {r}")));
    }
    if !(a > 0.0 && a < 1.0) {
        return Err(invalid(format!("a must lie in (0, 1), got {a}")));
    }
    if !(intensity_rate > 0.0) {
        return Err(invalid("intensity rate must be positive"));
    }
    let fmin = VmfKernel::new(kappa, f64::INFINITY)?.inf();
    Ok(-(-(intensity_rate * fmin * (1.0 - a) / (a * r))).exp_m1())
}

/// Level `inf Z` must reach for one step to forget the starting field.
fn coupling_threshold(h1: &InitialField, h2: &InitialField, a: f64) -> f64 {
    a / (1.0 - a) * h1.sup().max(h2.sup())
}

/// Fraction of innovations with `inf Z ≥ a/(1 − a) max(‖h₁‖, ‖h₂‖)`, and
/// its standard error.
pub fn empirical_coupling_prob(
    h1: &InitialField,
    h2: &InitialField,
    config: &ChainConfig,
    n: usize,
    rng: &RngStream,
) -> Result<(f64, f64)> {
    if n == 0 {
        return Err(invalid("at least one replicate is needed"));
    }
    let threshold = coupling_threshold(h1, h2, config.a());
    let flags: Vec<bool> = replicate(rng, Purpose::Replicate, n, |_, r| -> Result<bool> {
        let inf = match config.innovation() {
            InnovationSpec::VmfMaxStable => draw_top_weight(config.intensity(), r) * config.kernel().inf(),
            InnovationSpec::Custom(g) => g.generate(r)?.inf_bound(),
        };
        Ok(inf >= threshold)
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let p = flags.iter().filter(|f| **f).count() as f64 / n as f64;
    Ok((p, (p * (1.0 - p) / n as f64).sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MinorizationReport {
    pub r: f64,
    pub alpha_analytic: f64,
    pub alpha_empirical: f64,
    pub n: usize,
    pub stderr: f64,
    pub flagged: usize,
    /// Every flagged draw stepped both chains to states equal on the grid.
    pub exact_coupling: bool,
    pub pass: bool,
    pub seed: u64,
}

/// Certifies the small-set bound on `{L(h₁) + L(h₂) ≤ R}` through the
/// one-step coupling event, and verifies on every flagged draw that the two
/// stepped states coincide on `grid`.
pub fn minorization_check(
    h1: &InitialField,
    h2: &InitialField,
    config: &Arc<ChainConfig>,
    r: f64,
    gamma: f64,
    n: usize,
    grid: &SphericalGrid,
    rng: &RngStream,
) -> Result<MinorizationReport> {
    let l_sum = lyapunov(h1, gamma)? + lyapunov(h2, gamma)?;
    if l_sum > r {
        return Err(invalid(format!("L(h1) + L(h2) = {l_sum} exceeds R = {r}")));
    }
    if h1.sup().max(h2.sup()) > r {
        return Err(invalid(format!("initial fields must have sup at most R = {r}")));
    }
    let alpha_analytic = minorization_alpha(r, config.a(), config.kappa(), config.intensity_rate())?;
    let (alpha_empirical, stderr) = empirical_coupling_prob(h1, h2, config, n, rng)?;

    let threshold = coupling_threshold(h1, h2, config.a());
    let x0 = ChainState::new(Arc::clone(config), h1.clone());
    let y0 = ChainState::new(Arc::clone(config), h2.clone());
    // Same replicate streams as the estimate, so the top weight is shared.
    let outcomes: Vec<Option<bool>> = replicate(rng, Purpose::Replicate, n, |_, stream| -> Result<Option<bool>> {
        let mut probe = stream.clone();
        let inf = match config.innovation() {
            InnovationSpec::VmfMaxStable => draw_top_weight(config.intensity(), &mut probe) * config.kernel().inf(),
            InnovationSpec::Custom(g) => g.generate(&mut probe)?.inf_bound(),
        };
        if inf < threshold {
            return Ok(None);
        }
        let innovation = draw_shared_innovation(&[&x0, &y0], 1.0, stream)?;
        let (x1, y1) = (x0.step_with(&innovation), y0.step_with(&innovation));
        Ok(Some(grid.nodes().iter().all(|p| x1.eval(p) == y1.eval(p))))
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let flagged = outcomes.iter().filter(|o| o.is_some()).count();
    let exact_coupling = outcomes.iter().all(|o| o.unwrap_or(true));
    Ok(MinorizationReport {
        r,
        alpha_analytic,
        alpha_empirical,
        n,
        stderr,
        flagged,
        exact_coupling,
        pass: alpha_empirical >= alpha_analytic - 3.0 * stderr && exact_coupling,
        seed: rng.master_seed(),
    })
}

/// Starting point of the trajectories in a convergence experiment.
#[derive(Debug, Clone)]
pub enum StartSpec {
    Fixed(InitialField),
    /// An independent truncated stationary draw per trajectory.
    Stationary(StationaryParams),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub probe: UnitVec3,
    pub horizon: u64,
    pub reps: usize,
    /// Kolmogorov distance to the stationary marginal for `t = 0..=horizon`.
    pub distances: Vec<f64>,
    pub noise_floor: f64,
    /// Number of leading distances above the noise floor used in the fit.
    pub fit_points: usize,
    /// Least-squares slope of `log distance` over the leading run above the
    /// noise floor; `−∞` when fewer than two points are available.
    pub fitted_log_slope: f64,
    /// Slope over the last three points of that run.
    pub tail_log_slope: f64,
    pub threshold: f64,
    /// `d(t) ≤ d(0) (a + 0.1)^t + noise floor` for every `t`.
    pub geometric_envelope: bool,
    pub pass: bool,
    pub seed: u64,
}

/// Kolmogorov distance of `X(t, probe)` to its stationary Fréchet law over
/// `reps` independent trajectories, for every `t ≤ horizon`.
pub fn convergence_rate(
    config: &Arc<ChainConfig>,
    start: &StartSpec,
    probe: &UnitVec3,
    horizon: u64,
    reps: usize,
    rng: &RngStream,
) -> Result<ConvergenceReport> {
    if horizon < 1 {
        return Err(invalid("horizon must be at least 1"));
    }
    if reps < 100 {
        return Err(invalid(format!("at least 100 trajectories are needed, got {reps}")));
    }
    let paths: Vec<Vec<f64>> = replicate(rng, Purpose::Trajectory, reps, |_, r| -> Result<Vec<f64>> {
        let mut state = match start {
            StartSpec::Fixed(h) => ChainState::new(Arc::clone(config), h.clone()),
            StartSpec::Stationary(sp) => stationary_draw(config, sp, &mut r.derive(Purpose::Initial, 0))?,
        };
        let mut values = Vec::with_capacity(horizon as usize + 1);
        values.push(state.eval(probe));
        for t in 0..horizon {
            state = state.step(&mut r.derive(Purpose::Step, t))?;
            values.push(state.eval(probe));
        }
        Ok(values)
    })
    .into_iter()
    .collect::<Result<_>>()?;

    let scale = match config.innovation() {
        InnovationSpec::VmfMaxStable => config.intensity().margin_scale(),
        InnovationSpec::Custom(_) => 1.0,
    };
    let distances = (0..=horizon as usize)
        .map(|t| {
            let col: Vec<f64> = paths.iter().map(|p| p[t]).collect();
            ks_frechet_scaled(&col, scale).map(|k| k.statistic)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(assemble_convergence(*probe, horizon, reps, distances, config.a(), rng.master_seed()))
}

fn assemble_convergence(probe: UnitVec3, horizon: u64, reps: usize, distances: Vec<f64>, a: f64, seed: u64) -> ConvergenceReport {
    let noise_floor = KS_CRITICAL_1PCT / (reps as f64).sqrt();
    let fit_points = distances.iter().take_while(|d| **d > noise_floor).count();
    let ts: Vec<f64> = (0..fit_points).map(|t| t as f64).collect();
    let logs: Vec<f64> = distances[..fit_points].iter().map(|d| d.ln()).collect();
    let (fitted_log_slope, tail_log_slope) = if fit_points >= 2 {
        let tail = fit_points.saturating_sub(3);
        (ls_slope(&ts, &logs), ls_slope(&ts[tail..], &logs[tail..]))
    } else {
        (f64::NEG_INFINITY, f64::NEG_INFINITY)
    };
    let threshold = a.ln() + 0.1;
    let d0 = distances[0];
    let geometric_envelope = distances
        .iter()
        .enumerate()
        .all(|(t, d)| *d <= d0 * (a + 0.1).powi(t as i32) + noise_floor);
    ConvergenceReport {
        probe,
        horizon,
        reps,
        distances,
        noise_floor,
        fit_points,
        fitted_log_slope,
        tail_log_slope,
        threshold,
        geometric_envelope,
        pass: fitted_log_slope <= threshold,
        seed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::fibonacci_grid;
    use crate::spectral::{InnovationGenerator, SphereField};

    #[derive(Debug)]
    struct Flat(f64);

    impl SphereField for Flat {
        fn eval(&self, _: &UnitVec3) -> f64 {
            self.0
        }
        fn sup_bound(&self) -> f64 {
            self.0
        }
        fn inf_bound(&self) -> f64 {
            self.0
        }
    }

    #[derive(Debug)]
    struct FlatGenerator;

    impl InnovationGenerator for FlatGenerator {
        fn generate(&self, _: &mut RngStream) -> Result<Arc<dyn SphereField>> {
            Ok(Arc::new(Flat(1.0)))
        }
        fn tail_scale(&self) -> f64 {
            1.0
        }
    }

    fn cfg(a: f64, kappa: f64) -> ChainConfig {
        ChainConfig::builder().a(a).kappa(kappa).build().unwrap()
    }

    #[test]
    fn lyapunov_values() {
        assert_eq!(lyapunov(&InitialField::constant(1.0).unwrap(), 0.3).unwrap(), 1.0);
        assert_eq!(lyapunov(&InitialField::constant(4.0).unwrap(), 0.5).unwrap(), 2.0);
        let f = InnovationField::from_events(
            vec![crate::spectral::SpectralEvent { weight: 2.0, center: UnitVec3::E_Z }],
            2.0,
            crate::spectral::EvalSet::Sphere,
            crate::geometry::FOUR_PI,
        )
        .unwrap();
        assert!((lyapunov(&f, 0.5).unwrap() - 0.80529).abs() < 5e-5);
        assert!(lyapunov(&f, 1.0).is_err());
    }

    #[test]
    fn closed_form_at_zero() {
        let v = pl_closed_form(0.0, 0.5, 0.5, 1.0).unwrap();
        assert!((v - 0.5f64.sqrt() * std::f64::consts::PI.sqrt()).abs() < 1e-13);
        assert!((v - 1.25331).abs() < 1e-5);
        let k = DriftParams::new(0.5, 0.5, 1.0).unwrap().big_k;
        assert!((v - k).abs() < 1e-14);
        assert!(pl_closed_form(1.0, 1.0, 0.5, 1.0).is_err());
    }

    #[test]
    fn closed_form_large_l_asymptote() {
        let v = pl_closed_form(1e6, 0.5, 0.5, 1.0).unwrap();
        assert!((v / (0.5f64.sqrt() * 1e6) - 1.0).abs() < 1e-3);
    }

    #[test]
    fn closed_form_matches_quadrature() {
        // E[max(c, (m/E)^γ)] integrated at 40 digits.
        let got = pl_closed_form(1.3, 0.4, 0.6, 2.0).unwrap();
        let want = 1.493_182_737_727_563_259_4;
        assert!(((got - want) / want).abs() < 1e-13, "{got} vs {want}");
    }

    #[test]
    fn beta_is_a_to_gamma() {
        assert_eq!(DriftParams::new(0.5, 0.25, 1.0).unwrap().beta, 0.5);
        assert!(DriftParams::new(1.0, 0.25, 1.0).is_err());
    }

    #[test]
    fn stub_innovation_is_degenerate() {
        let c = ChainConfig::builder()
            .a(0.5)
            .innovation(InnovationSpec::Custom(Arc::new(FlatGenerator)))
            .build()
            .unwrap();
        let (m, s) = pl_monte_carlo_at(1.0, &c, 0.5, 200, &RngStream::new(1)).unwrap();
        assert!((m - 0.5f64.sqrt()).abs() < 1e-13);
        assert_eq!(s, 0.0);
    }

    #[test]
    fn monte_carlo_matches_closed_form() {
        let c = cfg(0.5, 0.0);
        let (m, s) = pl_monte_carlo_at(1.0, &c, 0.5, 100_000, &RngStream::new(11)).unwrap();
        let want = pl_closed_form(1.0, 0.5, 0.5, c.sigma_z()).unwrap();
        assert!((m - want).abs() <= 3.0 * s, "{m} ± {s} vs {want}");
    }

    #[test]
    fn monte_carlo_monotone_in_l() {
        let c = cfg(0.5, 1.0);
        let rng = RngStream::new(3);
        let lo = pl_monte_carlo_at(1.0, &c, 0.5, 1000, &rng).unwrap().0;
        let hi = pl_monte_carlo_at(2.0, &c, 0.5, 1000, &rng).unwrap().0;
        assert!(hi >= lo);
        assert!(pl_monte_carlo_at(1.0, &c, 0.5, 99, &rng).is_err());
    }

    #[test]
    fn drift_is_tight_at_zero_and_holds_at_high_persistence() {
        let c = cfg(0.9, 1.0);
        let zero = drift_check_at(0.0, &c, 0.5, 1000, &RngStream::new(4)).unwrap();
        assert_eq!(zero.pl_closed, zero.params.big_k);
        let rep = drift_check(&InitialField::constant(1.0).unwrap(), &c, 0.5, 100_000, &RngStream::new(5)).unwrap();
        assert!(rep.pass, "{rep:?}");
    }

    #[test]
    fn alpha_limits_and_monotonicity() {
        assert!(minorization_alpha(1e12, 0.5, 1.0, 1.0).unwrap() < 1e-10);
        let v = minorization_alpha(1.0, 0.5, 0.0, crate::geometry::FOUR_PI).unwrap();
        assert!((v - (1.0 - (-1.0f64).exp())).abs() < 1e-12);
        assert!(minorization_alpha(0.0, 0.5, 1.0, 1.0).is_err());
        let grid = [0.1, 0.3, 0.5, 0.7, 0.9];
        let rs = [0.5, 1.0, 2.0, 5.0, 10.0];
        for (i, &a) in grid.iter().enumerate() {
            for (j, &r) in rs.iter().enumerate() {
                let v = minorization_alpha(r, a, 1.0, 1.0).unwrap();
                assert!(v > 0.0 && v < 1.0);
                if i > 0 {
                    assert!(v < minorization_alpha(r, grid[i - 1], 1.0, 1.0).unwrap());
                }
                if j > 0 {
                    assert!(v < minorization_alpha(rs[j - 1], a, 1.0, 1.0).unwrap());
                }
            }
        }
    }

    #[test]
    fn coupling_certain_when_memory_vanishes() {
        let c = cfg(1e-6, 1.0);
        let h = InitialField::constant(1.0).unwrap();
        let (p, s) = empirical_coupling_prob(&h, &h, &c, 2000, &RngStream::new(6)).unwrap();
        assert!(p >= 1.0 - 3.0 * s - 1e-3);
    }

    #[test]
    fn minorization_couples_exactly() {
        let c = Arc::new(cfg(0.5, 1.0));
        let grid = fibonacci_grid(300).unwrap();
        let (h1, h2) = (InitialField::constant(0.64).unwrap(), InitialField::constant(0.04).unwrap());
        let rep = minorization_check(&h1, &h2, &c, 1.0, 0.5, 2000, &grid, &RngStream::new(7)).unwrap();
        assert!(rep.flagged > 0);
        assert!(rep.exact_coupling && rep.pass, "{rep:?}");
        let big = InitialField::constant(4.0).unwrap();
        assert!(minorization_check(&big, &h2, &c, 1.0, 0.5, 10, &grid, &RngStream::new(7)).is_err());
    }

    #[test]
    fn stationary_start_is_converged() {
        let c = Arc::new(cfg(0.5, 1.0));
        let sp = StationaryParams::for_config(1e-3, 1e-3, &c).unwrap();
        let rep = convergence_rate(&c, &StartSpec::Stationary(sp), &UnitVec3::E_Z, 5, 2000, &RngStream::new(8)).unwrap();
        assert!(rep.distances.iter().all(|d| *d < rep.noise_floor), "{:?}", rep.distances);
        assert_eq!(rep.fitted_log_slope, f64::NEG_INFINITY);
        assert!(rep.pass);
    }

    #[test]
    fn fit_uses_leading_run() {
        let d = vec![0.8, 0.4, 0.2, 0.1, 0.05, 0.01, 0.3];
        let rep = assemble_convergence(UnitVec3::E_Z, 6, 10_000, d, 0.5, 0);
        assert_eq!(rep.fit_points, 5);
        assert!((rep.fitted_log_slope - 0.5f64.ln()).abs() < 1e-12);
        assert!(rep.pass);
    }
}
