use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use maxchain::chain::{coupled_trajectory, run_trajectory, stationary_draw, ChainConfig, ChainState, InitialField, StationaryParams};
use maxchain::ergodicity::{convergence_rate, drift_check, minorization_check, StartSpec};
use maxchain::geometry::{fibonacci_grid, uniform_sphere_sample, SphericalGrid, UnitVec3};
use maxchain::io::{write_events_csv, write_field_header, write_field_rows, write_state_snapshot};
use maxchain::report::Report;
use maxchain::rng::{replicate, Purpose, RngStream};
use maxchain::spectral::{simulate_innovation, EvalSet, InnovationOptions, StoppingMode};
use maxchain::validation::{chain_margin_check, ks_frechet_scaled, max_stability_check, rotation_stability_check};

use crate::config::RunConfig;
use crate::{CliError, Command};

struct Ctx<'a> {
    cfg: &'a RunConfig,
    chain: Arc<ChainConfig>,
    grid: Arc<SphericalGrid>,
    root: RngStream,
    out: &'a Path,
}

impl Ctx<'_> {
    /// Independent stream per check, so running checks alone or together
    /// gives the same numbers.
    fn stream(&self, check: u64) -> RngStream {
        self.root.derive(Purpose::Reference, check)
    }

    fn options(&self) -> InnovationOptions {
        InnovationOptions {
            intensity: self.cfg.model.intensity,
            event_cap: self.chain.event_cap(),
            kappa_max: self.cfg.model.kappa_max,
        }
    }

    fn report(&self, check: &str, pass: bool) -> Report {
        Report::new(check, pass, self.cfg.sim.seed)
            .param("a", self.chain.a())
            .param("theta", self.chain.theta())
            .param("kappa", self.chain.kappa())
            .param("intensity_mode", self.cfg.model.intensity)
    }

    fn create(&self, name: &str) -> Result<BufWriter<File>, CliError> {
        Ok(BufWriter::new(File::create(self.out.join(name))?))
    }
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn run(cmd: Command, cfg: &RunConfig, out: &Path) -> Result<Vec<Report>, CliError> {
    std::fs::create_dir_all(out)?;
    let ctx = Ctx {
        cfg,
        chain: Arc::new(cfg.chain()?),
        grid: Arc::new(fibonacci_grid(cfg.sim.grid_n)?),
        root: RngStream::new(cfg.sim.seed),
        out,
    };
    match cmd {
        Command::SimulateInnovation => simulate_innovation_cmd(&ctx).map(|_| Vec::new()),
        Command::SimulateChain => simulate_chain(&ctx).map(|_| Vec::new()),
        Command::Stationary => stationary(&ctx).map(|_| Vec::new()),
        Command::VerifyDrift => verify_drift(&ctx),
        Command::VerifyMinorization => verify_minorization(&ctx),
        Command::VerifyMargins => verify_margins(&ctx),
        Command::VerifyStability => verify_stability(&ctx),
        Command::Couple => couple(&ctx),
        Command::Convergence => convergence(&ctx),
        Command::ReportAll => {
            let mut all = Vec::new();
            for f in [verify_drift, verify_minorization, verify_margins, verify_stability, couple, convergence] {
                all.extend(f(&ctx)?);
            }
            Ok(all)
        }
    }
}

fn simulate_innovation_cmd(ctx: &Ctx) -> Result<(), CliError> {
    let set = match ctx.cfg.sim.eval_mode {
        StoppingMode::GridExact => EvalSet::Grid(Arc::clone(&ctx.grid)),
        StoppingMode::SphereExact => EvalSet::Sphere,
    };
    let z = simulate_innovation(ctx.chain.kappa(), &set, &ctx.options(), &mut ctx.stream(0))?;
    let mut w = ctx.create("innovation.csv")?;
    write_events_csv(&mut w, z.events())?;
    w.flush()?;
    let mut f = ctx.create("innovation_field.csv")?;
    write_field_header(&mut f)?;
    for (i, p) in ctx.grid.nodes().iter().enumerate() {
        let [x, y, zc] = p.to_array();
        writeln!(f, "0,{i},{},{},{},{}", num(x), num(y), num(zc), num(z.eval(p)))?;
    }
    f.flush()?;
    Ok(())
}

fn simulate_chain(ctx: &Ctx) -> Result<(), CliError> {
    let start = ChainState::new(Arc::clone(&ctx.chain), InitialField::constant(ctx.cfg.verify.initial)?);
    let mut f = ctx.create("chain_field.csv")?;
    write_field_header(&mut f)?;
    let mut io_err = None;
    let last = run_trajectory(start, ctx.cfg.sim.steps, &ctx.stream(1), |s| {
        if io_err.is_none() {
            io_err = write_field_rows(&mut f, s.t(), &ctx.grid, s).err();
        }
    })?;
    if let Some(e) = io_err {
        return Err(e.into());
    }
    f.flush()?;
    write_state_snapshot(ctx.out, "chain_state", &last)?;
    Ok(())
}

fn stationary(ctx: &Ctx) -> Result<(), CliError> {
    let v = &ctx.cfg.verify;
    let sp = StationaryParams::for_config(v.epsilon, v.delta, &ctx.chain)?;
    let state = stationary_draw(&ctx.chain, &sp, &mut ctx.stream(2))?;
    write_state_snapshot(ctx.out, "stationary_state", &state)?;
    let mut f = ctx.create("stationary_field.csv")?;
    write_field_header(&mut f)?;
    write_field_rows(&mut f, 0, &ctx.grid, &state)?;
    f.flush()?;
    Ok(())
}

fn verify_drift(ctx: &Ctx) -> Result<Vec<Report>, CliError> {
    let v = &ctx.cfg.verify;
    let h = InitialField::constant(v.initial)?;
    let d = drift_check(&h, &ctx.chain, v.gamma, v.replications, &ctx.stream(3))?;
    Ok(vec![ctx
        .report("drift", d.pass)
        .param("gamma", v.gamma)
        .param("L_h", d.l_h)
        .param("beta", d.params.beta)
        .param("bigK", d.params.big_k)
        .param("rhs", d.rhs)
        .values(d.pl_mc, d.mc_stderr, d.pl_closed, d.n)])
}

fn verify_minorization(ctx: &Ctx) -> Result<Vec<Report>, CliError> {
    let v = &ctx.cfg.verify;
    // Largest pair (c, c/4) of constants inside both the L-ball and the
    // sup-ball of radius R.
    let g = v.gamma;
    let c1 = (v.r / (1.0 + 0.25f64.powf(g))).powf(1.0 / g).min(v.r);
    let c2 = c1 / 4.0;
    let m = minorization_check(
        &InitialField::constant(c1)?,
        &InitialField::constant(c2)?,
        &ctx.chain,
        v.r,
        g,
        v.replications,
        &ctx.grid,
        &ctx.stream(4),
    )?;
    Ok(vec![ctx
        .report("minorization", m.pass)
        .param("R", v.r)
        .param("h1", c1)
        .param("h2", c2)
        .param("flagged", m.flagged)
        .param("exact_coupling", m.exact_coupling)
        .values(m.alpha_empirical, m.stderr, m.alpha_analytic, m.n)])
}

fn verify_margins(ctx: &Ctx) -> Result<Vec<Report>, CliError> {
    let v = &ctx.cfg.verify;
    let kappa = ctx.chain.kappa();
    let opts = ctx.options();
    let scale = ctx.cfg.model.intensity.margin_scale();
    let probe = v.probe;
    let set = EvalSet::Grid(Arc::new(SphericalGrid::from_points(vec![probe])?));
    let at_probe: Vec<f64> = replicate(&ctx.stream(5), Purpose::Replicate, v.replications, |_, r| {
        simulate_innovation(kappa, &set, &opts, r).map(|z| z.eval(&probe))
    })
    .into_iter()
    .collect::<Result<_, _>>()?;
    let margin = ks_frechet_scaled(&at_probe, scale)?;

    let sups: Vec<f64> = replicate(&ctx.stream(6), Purpose::Replicate, v.replications, |_, r| {
        simulate_innovation(kappa, &EvalSet::Sphere, &opts, r).map(|z| z.field_sup())
    })
    .into_iter()
    .collect::<Result<_, _>>()?;
    let sup_scale = ctx.chain.sigma_z();
    let sup_law = ks_frechet_scaled(&sups, sup_scale)?;

    let sp = StationaryParams::for_config(v.epsilon, v.delta, &ctx.chain)?;
    let chain = chain_margin_check(&ctx.chain, &sp, &probe, v.replications, &ctx.stream(7))?;

    Ok(vec![
        ctx.report("innovation_margin", margin.pass)
            .param("probe", probe)
            .param("scale", scale)
            .values(margin.statistic, f64::NAN, margin.threshold, margin.n),
        ctx.report("sup_law", sup_law.pass)
            .param("scale", sup_scale)
            .values(sup_law.statistic, f64::NAN, sup_law.threshold, sup_law.n),
        ctx.report("chain_margin", chain.pass)
            .param("probe", probe)
            .param("J", sp.depth())
            .values(chain.statistic, f64::NAN, chain.threshold, chain.n),
    ])
}

fn verify_stability(ctx: &Ctx) -> Result<Vec<Report>, CliError> {
    let v = &ctx.cfg.verify;
    let mut r = ctx.stream(8);
    let points: Vec<UnitVec3> = (0..5).map(|_| uniform_sphere_sample(&mut r)).collect();
    let rs = rotation_stability_check(
        &points,
        ctx.chain.theta(),
        ctx.chain.axis(),
        ctx.chain.kappa(),
        ctx.cfg.sim.grid_n,
        v.replications,
        &ctx.stream(9),
    )?;
    let rot_pass = rs.rel_err < 1e-2 && rs.mc_consistent();

    let second = ctx.chain.step_rotation().apply(&v.probe);
    let ms = max_stability_check(&ctx.chain, ctx.cfg.sim.n_copies, [v.probe, second], v.replications, &ctx.stream(10))?;
    Ok(vec![
        ctx.report("rotation_stability", rot_pass)
            .param("grid_n", ctx.cfg.sim.grid_n)
            .param("points", &points)
            .param("lhs_mc", rs.lhs_mc)
            .param("lhs_mc_stderr", rs.lhs_mc_stderr)
            .param("rhs_mc", rs.rhs_mc)
            .param("rhs_mc_stderr", rs.rhs_mc_stderr)
            .param("rel_err", rs.rel_err)
            .values(rs.lhs, f64::NAN, rs.rhs, v.replications),
        ctx.report("max_stability", ms.pass)
            .param("n_copies", ms.n_copies)
            .param("ks_two_sample", [ms.two_sample[0].statistic, ms.two_sample[1].statistic])
            .param("ks_frechet", [ms.frechet[0].statistic, ms.frechet[1].statistic])
            .param("bivariate_threshold", ms.bivariate_threshold)
            .values(ms.bivariate, f64::NAN, ms.bivariate_threshold, ms.reps),
    ])
}

fn couple(ctx: &Ctx) -> Result<Vec<Report>, CliError> {
    let v = &ctx.cfg.verify;
    let d = coupled_trajectory(
        InitialField::constant(v.h1)?,
        InitialField::constant(v.h2)?,
        &ctx.chain,
        v.horizon,
        &ctx.grid,
        &ctx.stream(11),
    )?;
    let a = ctx.chain.a();
    let gap = (v.h1 - v.h2).abs();
    let pass = d.iter().enumerate().all(|(t, dt)| *dt <= a.powi(t as i32) * gap + 1e-12);
    let mut f = ctx.create("coupling.csv")?;
    writeln!(f, "t,distance")?;
    for (t, dt) in d.iter().enumerate() {
        writeln!(f, "{t},{}", num(*dt))?;
    }
    f.flush()?;
    let last = *d.last().expect("horizon >= 1");
    let coalesced = d.iter().position(|x| *x == 0.0);
    Ok(vec![ctx
        .report("coupling_contraction", pass)
        .param("h1", v.h1)
        .param("h2", v.h2)
        .param("horizon", v.horizon)
        .param("coalesced_at", coalesced)
        .values(last, f64::NAN, a.powi(v.horizon as i32) * gap, d.len())])
}

fn convergence(ctx: &Ctx) -> Result<Vec<Report>, CliError> {
    let v = &ctx.cfg.verify;
    let rep = convergence_rate(
        &ctx.chain,
        &StartSpec::Fixed(InitialField::constant(v.h0)?),
        &v.probe,
        v.horizon,
        v.replications,
        &ctx.stream(12),
    )?;
    let mut f = ctx.create("convergence.csv")?;
    writeln!(f, "t,distance")?;
    for (t, d) in rep.distances.iter().enumerate() {
        writeln!(f, "{t},{}", num(*d))?;
    }
    f.flush()?;
    Ok(vec![ctx
        .report("convergence", rep.pass)
        .param("h0", v.h0)
        .param("probe", v.probe)
        .param("horizon", v.horizon)
        .param("noise_floor", rep.noise_floor)
        .param("fit_points", rep.fit_points)
        .param("tail_log_slope", rep.tail_log_slope)
        .param("geometric_envelope", rep.geometric_envelope)
        .values(rep.fitted_log_slope, f64::NAN, rep.threshold, rep.reps)])
}
