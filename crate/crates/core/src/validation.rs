//! Statistical and quadrature checks of the max-stable structure: Fréchet
//! margins, max-stability, and rotational stability of the mark integral.

use std::sync::Arc;

use serde::Serialize;

use crate::chain::{stationary_draw, ChainConfig, StationaryParams};
use crate::error::{invalid, Result};
use crate::geometry::{fibonacci_grid, uniform_sphere_sample, Rotation, SphericalGrid, UnitVec3, VmfKernel, FOUR_PI};
use crate::rng::{replicate, Purpose, RngStream};
use crate::spectral::{simulate_innovation, EvalSet, InnovationOptions, InnovationSpec};
use crate::stats::mean_stderr;

/// 1% asymptotic Kolmogorov critical value.
pub const KS_CRITICAL_1PCT: f64 = 1.63;

/// Threshold on the bivariate empirical-CDF discrepancy of the
/// max-stability check.
pub const BIVARIATE_THRESHOLD: f64 = 0.03;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsResult {
    pub statistic: f64,
    pub n: usize,
    /// Size of the second sample for two-sample tests.
    pub m: Option<usize>,
    pub threshold: f64,
    pub pass: bool,
}

impl KsResult {
    fn new(statistic: f64, n: usize, m: Option<usize>) -> Self {
        let threshold = match m {
            None => KS_CRITICAL_1PCT / (n as f64).sqrt(),
            Some(m) => KS_CRITICAL_1PCT * ((n + m) as f64 / (n as f64 * m as f64)).sqrt(),
        };
        KsResult {
            statistic,
            n,
            m,
            threshold,
            pass: statistic < threshold,
        }
    }
}

fn sorted_positive(samples: &[f64]) -> Result<Vec<f64>> {
    if samples.len() < 100 {
        return Err(invalid(format!("KS test needs at least 100 samples, got {}", samples.len())));
    }
    if let Some(bad) = samples.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(invalid(format!("Fréchet samples must be positive and finite, got {bad}")));
    }
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    Ok(s)
}

/// One-sample KS statistic of `samples` against the Fréchet CDF
/// `exp(−scale / z)`.
pub fn ks_frechet_scaled(samples: &[f64], scale: f64) -> Result<KsResult> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(invalid(format!("Fréchet scale must be positive, got {scale}")));
    }
    let s = sorted_positive(samples)?;
    let n = s.len() as f64;
    let d = s.iter().enumerate().fold(0.0f64, |d, (i, &z)| {
        let f = (-scale / z).exp();
        d.max((i + 1) as f64 / n - f).max(f - i as f64 / n)
    });
    Ok(KsResult::new(d, s.len(), None))
}

/// One-sample KS test against the standard Fréchet CDF `exp(−1/z)`.
pub fn ks_frechet(samples: &[f64]) -> Result<KsResult> {
    ks_frechet_scaled(samples, 1.0)
}

/// Two-sample KS statistic; ties are resolved by stepping past equal values
/// in both samples together.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    if a.is_empty() || b.is_empty() {
        return Err(invalid("two-sample KS needs non-empty samples"));
    }
    if a.iter().chain(b).any(|v| v.is_nan()) {
        return Err(invalid("two-sample KS samples contain NaN"));
    }
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n, m) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < x.len() && j < y.len() {
        let v = x[i].min(y[j]);
        while i < x.len() && x[i] <= v {
            i += 1;
        }
        while j < y.len() && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    Ok(KsResult::new(d, x.len(), Some(y.len())))
}

/// Standard Fréchet quantile scaled by `scale`.
fn frechet_quantile(p: f64, scale: f64) -> f64 {
    -scale / p.ln()
}

/// Sup over a `10 × 10` grid of thresholds of the difference of the two
/// bivariate empirical CDFs. Thresholds are the Fréchet quantiles of levels
/// `k / 11`.
pub fn bivariate_discrepancy(a: &[(f64, f64)], b: &[(f64, f64)], scale: f64) -> f64 {
    let q: Vec<f64> = (1..=10).map(|k| frechet_quantile(k as f64 / 11.0, scale)).collect();
    let cdf = |s: &[(f64, f64)], u: f64, v: f64| s.iter().filter(|p| p.0 <= u && p.1 <= v).count() as f64 / s.len() as f64;
    let mut d = 0.0f64;
    for &u in &q {
        for &v in &q {
            d = d.max((cdf(a, u, v) - cdf(b, u, v)).abs());
        }
    }
    d
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaxStabilityReport {
    pub n_copies: usize,
    pub reps: usize,
    /// Two-sample KS per probe, rescaled maximum against a fresh sample.
    pub two_sample: [KsResult; 2],
    /// One-sample Fréchet KS of the rescaled maximum per probe.
    pub frechet: [KsResult; 2],
    pub bivariate: f64,
    pub bivariate_threshold: f64,
    pub pass: bool,
}

fn margin_scale(config: &ChainConfig) -> f64 {
    match config.innovation() {
        InnovationSpec::VmfMaxStable => config.intensity().margin_scale(),
        InnovationSpec::Custom(_) => 1.0,
    }
}

/// Compares `(1/n) ⋁_{k≤n} Z_k` with `Z` at two probe points.
pub fn max_stability_check(
    config: &ChainConfig,
    n_copies: usize,
    probes: [UnitVec3; 2],
    reps: usize,
    rng: &RngStream,
) -> Result<MaxStabilityReport> {
    if n_copies == 0 {
        return Err(invalid("max-stability needs at least one copy"));
    }
    let eval_set = EvalSet::Grid(Arc::new(SphericalGrid::from_points(probes.to_vec())?));
    let opts = InnovationOptions {
        intensity: config.intensity(),
        event_cap: config.event_cap(),
        kappa_max: config.kappa_max(),
    };
    let kappa = config.kappa();
    let draw = |r: &mut RngStream| -> Result<(f64, f64)> {
        let z = simulate_innovation(kappa, &eval_set, &opts, r)?;
        Ok((z.eval(&probes[0]), z.eval(&probes[1])))
    };
    let reference: Vec<(f64, f64)> = replicate(&rng.derive(Purpose::Reference, 0), Purpose::Replicate, reps, |_, r| draw(r))
        .into_iter()
        .collect::<Result<_>>()?;
    let maxima: Vec<(f64, f64)> = replicate(&rng.derive(Purpose::Copy, 0), Purpose::Replicate, reps, |_, r| {
        let mut best = (0.0f64, 0.0f64);
        for k in 0..n_copies {
            let (u, v) = draw(&mut r.derive(Purpose::Copy, k as u64))?;
            best = (best.0.max(u), best.1.max(v));
        }
        Ok((best.0 / n_copies as f64, best.1 / n_copies as f64))
    })
    .into_iter()
    .collect::<Result<_>>()?;

    let scale = margin_scale(config);
    let col = |s: &[(f64, f64)], k: usize| s.iter().map(|p| if k == 0 { p.0 } else { p.1 }).collect::<Vec<f64>>();
    let two_sample = [
        ks_two_sample(&col(&maxima, 0), &col(&reference, 0))?,
        ks_two_sample(&col(&maxima, 1), &col(&reference, 1))?,
    ];
    let frechet = [
        ks_frechet_scaled(&col(&maxima, 0), scale)?,
        ks_frechet_scaled(&col(&maxima, 1), scale)?,
    ];
    let bivariate = bivariate_discrepancy(&maxima, &reference, scale);
    let pass = two_sample.iter().chain(&frechet).all(|k| k.pass) && bivariate < BIVARIATE_THRESHOLD;
    Ok(MaxStabilityReport {
        n_copies,
        reps,
        two_sample,
        frechet,
        bivariate,
        bivariate_threshold: BIVARIATE_THRESHOLD,
        pass,
    })
}

/// Both sides of `∫ ⋁_m f(R x_m; μ) dμ = ∫ ⋁_m f(x_m; μ) dμ`, by quadrature
/// and by Monte Carlo over uniform marks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RotationStability {
    pub lhs: f64,
    pub rhs: f64,
    pub rel_err: f64,
    pub lhs_mc: f64,
    pub lhs_mc_stderr: f64,
    pub rhs_mc: f64,
    pub rhs_mc_stderr: f64,
}

impl RotationStability {
    /// Quadrature and Monte Carlo agree within three standard errors on
    /// both sides.
    pub fn mc_consistent(&self) -> bool {
        (self.lhs - self.lhs_mc).abs() <= 3.0 * self.lhs_mc_stderr && (self.rhs - self.rhs_mc).abs() <= 3.0 * self.rhs_mc_stderr
    }
}

pub fn rotation_stability_check(
    points: &[UnitVec3],
    theta: f64,
    axis: UnitVec3,
    kappa: f64,
    grid_n: usize,
    mc_n: usize,
    rng: &RngStream,
) -> Result<RotationStability> {
    if points.is_empty() || points.len() > 10 {
        return Err(invalid(format!("between 1 and 10 points are needed, got {}", points.len())));
    }
    if mc_n < 2 {
        return Err(invalid("Monte Carlo cross-check needs at least two marks"));
    }
    let kernel = VmfKernel::new(kappa, f64::INFINITY)?;
    let rot = Rotation::new(theta, axis)?;
    let rotated: Vec<UnitVec3> = points.iter().map(|p| rot.apply(p)).collect();
    let envelope = |pts: &[UnitVec3], mu: &UnitVec3| pts.iter().map(|x| kernel.density(x, mu)).fold(0.0, f64::max);

    let grid = fibonacci_grid(grid_n)?;
    let lhs = grid.integrate(|mu| envelope(&rotated, mu));
    let rhs = grid.integrate(|mu| envelope(points, mu));

    let marks: Vec<UnitVec3> = {
        let mut r = rng.derive(Purpose::Marks, 0);
        (0..mc_n).map(|_| uniform_sphere_sample(&mut r)).collect()
    };
    let (lm, ls) = mean_stderr(&marks.iter().map(|mu| envelope(&rotated, mu)).collect::<Vec<_>>());
    let (rm, rs) = mean_stderr(&marks.iter().map(|mu| envelope(points, mu)).collect::<Vec<_>>());
    Ok(RotationStability {
        lhs,
        rhs,
        rel_err: ((lhs - rhs) / rhs).abs(),
        lhs_mc: FOUR_PI * lm,
        lhs_mc_stderr: FOUR_PI * ls,
        rhs_mc: FOUR_PI * rm,
        rhs_mc_stderr: FOUR_PI * rs,
    })
}

/// Values at `probe` of independent truncated stationary draws, one per
/// replicate. With `steps > 0` each draw is first advanced that many steps.
pub fn stationary_probe_samples(
    config: &Arc<ChainConfig>,
    sp: &StationaryParams,
    probe: &UnitVec3,
    reps: usize,
    steps: u64,
    rng: &RngStream,
) -> Result<Vec<f64>> {
    replicate(rng, Purpose::Replicate, reps, |_, r| {
        let mut state = stationary_draw(config, sp, &mut r.derive(Purpose::Initial, 0))?;
        for t in 0..steps {
            state = state.step(&mut r.derive(Purpose::Step, t))?;
        }
        Ok(state.eval(probe))
    })
    .into_iter()
    .collect()
}

/// KS test of the stationary marginal at `probe` against its Fréchet law.
pub fn chain_margin_check(
    config: &Arc<ChainConfig>,
    sp: &StationaryParams,
    probe: &UnitVec3,
    reps: usize,
    rng: &RngStream,
) -> Result<KsResult> {
    let samples = stationary_probe_samples(config, sp, probe, reps, 0, rng)?;
    ks_frechet_scaled(&samples, margin_scale(config))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::IntensityMode;
    use rand_distr::{Distribution, Exp1};

    #[test]
    fn plug_in_quantiles() {
        let n = 1000;
        let s: Vec<f64> = (1..=n).map(|i| -1.0 / ((i as f64 - 0.5) / n as f64).ln()).collect();
        let k = ks_frechet(&s).unwrap();
        assert!(k.statistic <= 0.5 / n as f64 + 1e-12);
        assert!(k.pass);
    }

    #[test]
    fn exponential_samples_fail() {
        let mut r = RngStream::new(1);
        let s: Vec<f64> = (0..10_000).map(|_| Exp1.sample(&mut r)).collect();
        let k = ks_frechet(&s).unwrap();
        // sup_z |1 − e^{−z} − e^{−1/z}| = 0.26424
        assert!(k.statistic > 0.25 && !k.pass);
    }

    #[test]
    fn ks_input_validation() {
        assert!(ks_frechet(&[1.0; 50]).is_err());
        let mut s = vec![1.0; 200];
        s[3] = -1.0;
        assert!(ks_frechet(&s).is_err());
    }

    #[test]
    fn two_sample_identical_is_zero() {
        let a: Vec<f64> = (0..500).map(|i| i as f64).collect();
        let k = ks_two_sample(&a, &a).unwrap();
        assert_eq!(k.statistic, 0.0);
        assert!((k.threshold - 1.63 * (2.0f64 / 500.0).sqrt()).abs() < 1e-15);
        let b: Vec<f64> = (0..500).map(|i| i as f64 + 1000.0).collect();
        assert_eq!(ks_two_sample(&a, &b).unwrap().statistic, 1.0);
    }

    #[test]
    fn two_sample_threshold_for_equal_sizes() {
        let a = vec![1.0; 10_000];
        let k = ks_two_sample(&a, &a).unwrap();
        assert!((k.threshold - 0.02305).abs() < 1e-5);
    }

    #[test]
    fn single_copy_is_identical_law() {
        let cfg = ChainConfig::builder().a(0.5).kappa(1.0).build().unwrap();
        let rep = max_stability_check(&cfg, 1, [UnitVec3::E_Z, UnitVec3::E_X], 1000, &RngStream::new(4)).unwrap();
        assert!(rep.two_sample.iter().all(|k| k.pass));
    }

    #[test]
    fn rotation_single_point_normalizes() {
        let r = rotation_stability_check(&[UnitVec3::E_X], 0.7, UnitVec3::E_Z, 3.0, 10_000, 1000, &RngStream::new(1)).unwrap();
        assert!((r.lhs - 1.0).abs() < 1e-3 && (r.rhs - 1.0).abs() < 1e-3);
    }

    #[test]
    fn rotation_antipodal_pair() {
        let pts = [UnitVec3::E_X, -UnitVec3::E_X];
        let r = rotation_stability_check(&pts, std::f64::consts::FRAC_PI_3, UnitVec3::E_Z, 2.0, 10_000, 1000, &RngStream::new(2)).unwrap();
        assert!(r.rel_err < 1e-3);
    }

    #[test]
    fn rotation_zero_angle_is_identical() {
        let pts = [UnitVec3::E_X, UnitVec3::new(0.3, 0.4, 0.5).unwrap()];
        let r = rotation_stability_check(&pts, 0.0, UnitVec3::E_Y, 2.0, 2000, 100, &RngStream::new(3)).unwrap();
        assert!(r.rel_err <= 1e-15);
        assert!(rotation_stability_check(&[], 0.0, UnitVec3::E_Y, 2.0, 100, 100, &RngStream::new(3)).is_err());
    }

    #[test]
    fn misscaled_margins_fail() {
        let cfg = Arc::new(ChainConfig::builder().a(0.5).kappa(1.0).build().unwrap());
        let sp = StationaryParams::for_config(1e-3, 1e-3, &cfg).unwrap();
        let s = stationary_probe_samples(&cfg, &sp, &UnitVec3::E_Z, 2000, 0, &RngStream::new(9)).unwrap();
        let doubled: Vec<f64> = s.iter().map(|v| 2.0 * v).collect();
        let k = ks_frechet(&doubled).unwrap();
        assert!(k.statistic > 0.15 && !k.pass);
    }

    #[test]
    fn paper_mode_margins_are_rescaled() {
        let cfg = Arc::new(
            ChainConfig::builder()
                .a(0.5)
                .kappa(1.0)
                .intensity(IntensityMode::Paper)
                .build()
                .unwrap(),
        );
        let sp = StationaryParams::for_config(1e-3, 1e-3, &cfg).unwrap();
        assert!(chain_margin_check(&cfg, &sp, &UnitVec3::E_Y, 2000, &RngStream::new(5)).unwrap().pass);
    }
}
