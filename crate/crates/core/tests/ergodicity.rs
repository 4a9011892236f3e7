use std::sync::Arc;

use maxchain::chain::{ChainConfig, ChainState, InitialField, Innovation};
use maxchain::ergodicity::{convergence_rate, drift_check, empirical_coupling_prob, minorization_alpha, StartSpec};
use maxchain::geometry::{Rotation, UnitVec3};
use maxchain::rng::{replicate, Purpose, RngStream};
use maxchain::spectral::SpectralEvent;
use maxchain::validation::ks_frechet;

#[test]
fn coupling_fraction_exceeds_analytic_alpha() {
    let cfg = ChainConfig::builder().a(0.5).kappa(1.0).build().unwrap();
    let (h1, h2) = (InitialField::constant(0.64).unwrap(), InitialField::constant(0.04).unwrap());
    let (p, se) = empirical_coupling_prob(&h1, &h2, &cfg, 10_000, &RngStream::new(1)).unwrap();
    let alpha = minorization_alpha(1.0, 0.5, 1.0, cfg.intensity_rate()).unwrap();
    assert!(p >= alpha - 3.0 * se, "{p} ± {se} vs {alpha}");
}

#[test]
fn drift_holds_for_event_set_start() {
    let cfg = Arc::new(ChainConfig::builder().a(0.5).theta(0.2).kappa(2.0).build().unwrap());
    let st = ChainState::new(Arc::clone(&cfg), InitialField::constant(3.0).unwrap())
        .step(&mut RngStream::new(2))
        .unwrap();
    let rep = drift_check(&st, &cfg, 0.3, 20_000, &RngStream::new(3)).unwrap();
    assert!(rep.bound_holds(), "{rep:?}");
}

#[test]
fn convergence_distances_shrink_from_large_start() {
    let cfg = Arc::new(ChainConfig::builder().a(0.5).theta(0.3).kappa(1.0).build().unwrap());
    let rep = convergence_rate(
        &cfg,
        &StartSpec::Fixed(InitialField::constant(100.0).unwrap()),
        &UnitVec3::E_Z,
        12,
        2000,
        &RngStream::new(4),
    )
    .unwrap();
    assert!(rep.distances[0] > 0.9);
    assert!(rep.distances[12] < rep.noise_floor * 2.0);
    assert!(rep.distances.iter().all(|d| *d >= 0.0));
}

/// Rotating the probe about the chain axis, together with every mark, maps
/// each trajectory onto a rotated copy of itself.
#[test]
fn distances_invariant_under_probe_rotation() {
    let axis = UnitVec3::new(0.3, -0.2, 0.9).unwrap();
    let cfg = Arc::new(ChainConfig::builder().a(0.5).theta(0.7).axis(axis).kappa(1.5).build().unwrap());
    let turn = Rotation::new(1.9, axis).unwrap();
    let probe = UnitVec3::new(0.6, 0.1, -0.4).unwrap();
    let turned = turn.apply(&probe);
    let horizon = 8;
    let pairs: Vec<Vec<(f64, f64)>> = replicate(&RngStream::new(5), Purpose::Trajectory, 2000, |_, r| {
        let h = InitialField::constant(20.0).unwrap();
        let mut x = ChainState::new(Arc::clone(&cfg), h.clone());
        let mut y = ChainState::new(Arc::clone(&cfg), h);
        let mut out = vec![(x.eval(&probe), y.eval(&turned))];
        for t in 0..horizon {
            let inn = x.draw_innovation(1.0, &mut r.derive(Purpose::Step, t)).unwrap();
            let Innovation::Events(ev) = &inn else { unreachable!() };
            let rotated: Vec<SpectralEvent> = ev
                .iter()
                .map(|e| SpectralEvent { weight: e.weight, center: turn.apply(&e.center).renormalized() })
                .collect();
            x = x.step_with(&inn);
            y = y.step_with(&Innovation::Events(rotated));
            out.push((x.eval(&probe), y.eval(&turned)));
        }
        out
    });
    for t in 0..=horizon as usize {
        let a: Vec<f64> = pairs.iter().map(|p| p[t].0).collect();
        let b: Vec<f64> = pairs.iter().map(|p| p[t].1).collect();
        for (u, v) in a.iter().zip(&b) {
            assert!(((u - v) / u).abs() < 1e-12);
        }
        let (da, db) = (ks_frechet(&a).unwrap().statistic, ks_frechet(&b).unwrap().statistic);
        assert!((da - db).abs() <= 1.0 / 2000.0, "t={t}: {da} vs {db}");
    }
}
