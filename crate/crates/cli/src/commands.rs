use std::collections::BTreeSet;

use dyadic_core::adaptive::{self, AdaptationConfig, DeltaParts, SmallGainInputs};
use dyadic_core::linalg;
use dyadic_core::linsys::estimate_lipschitz_bounds;
use dyadic_core::nehari::{self, NehariApproximant, NehariOptions};
use dyadic_core::riccati;
use dyadic_core::signal::{uniform_grid, SignalTimeline};
use dyadic_core::sim::{self, Controller, ObserverInit, SimulationConfig, Trajectory};
use dyadic_core::synthesis::{self, ControlLaw, GapMode};
use dyadic_core::Error as CoreError;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::config::{LawName, Setup};
use crate::error::CliError;
use crate::report::{self, fmt_f64, Outputs, Report};

/// Result of a subcommand whose artifacts were all written.
pub enum Verdict {
    Pass,
    Fail(String),
}

pub const SYNTHESIS_FILE: &str = "synthesis.toml";

fn approximant_section(rep: &mut Report, name: &str, x: &NehariApproximant) {
    let d = x.d_h.clone().unwrap_or_else(|| DMatrix::zeros(x.outputs(), x.inputs()));
    rep.section(name)
        .int("order", x.order())
        .int("inputs", x.inputs())
        .int("outputs", x.outputs())
        .matrix("h_a", &x.h_a)
        .matrix("h_b", &x.h_b)
        .matrix("h_c", &x.h_c)
        .flag("has_feedthrough", x.d_h.is_some())
        .matrix("d_h", &d)
        .float("achieved_error", x.achieved_error)
        .float("optimal_error", x.optimal_error)
        .floats("hsv", &x.hsv);
}

pub fn synthesize(setup: &Setup, out: &mut Outputs) -> Result<Verdict, CliError> {
    let sol = &setup.solution;
    let sys = &sol.system;
    let g = sol.closed_loop();
    let w = riccati::observability_gramian(&sol.a_m, sys.c())?;
    let decay = riccati::decay_certificate(&sol.a_m)?;
    let lyap = riccati::lyapunov_certificate(&sol.a_m)?;
    let conv = riccati::convolution_operator_norm(&sol.a_m)?;
    let opts = setup.nehari_options();
    let unconstrained = nehari::solve_nehari(&g, &sol.r, opts)?;
    let constrained = match nehari::solve_constrained_nehari(&g, &sol.r, opts) {
        Ok(x) => Ok(x),
        Err(e) if !setup.scenario.compensator.constrained => Err(e.to_string()),
        Err(e) => return Err(e.into()),
    };
    let bound = nehari::suboptimality_constant(&g, &sol.r)?;

    let mut rep = out.report();
    rep.section("plant")
        .int("n", sys.n())
        .int("m", sys.m())
        .int("p", sys.p())
        .flag("stabilizable", sys.is_stabilizable())
        .flag("detectable", sys.is_detectable());
    rep.section("riccati")
        .matrix("pi", &sol.pi)
        .matrix("k", &sol.k)
        .matrix("a_m", &sol.a_m)
        .float("residual_norm", sol.residual_norm)
        .float("spectral_abscissa", linalg::spectral_abscissa(&sol.a_m));
    rep.section("gramian").matrix("w_o", &w.w).float("residual_norm", w.residual_norm);
    rep.section("decay").float("m", decay.m).float("beta", decay.beta);
    rep.section("lyapunov").matrix("p", &lyap.p).float("lambda_p", lyap.lambda_p);
    rep.section("convolution").float("norm", conv);
    approximant_section(&mut rep, "nehari.unconstrained", &unconstrained);
    match &constrained {
        Ok(x) => {
            approximant_section(&mut rep, "nehari.constrained", x);
            rep.float("dc_corner", nehari::dc_correction_corner(&g));
            let dc = nehari::closed_loop_dc_gain(&g)? * &sol.r_inv * x.dc_gain()?;
            let err = (dc - DMatrix::identity(sys.p(), sys.p())).amax();
            rep.float("dc_constraint_error", err);
        }
        Err(reason) => {
            rep.section("nehari.constrained").flag("available", false).text("reason", reason);
        }
    }
    rep.section("suboptimality")
        .float("s", bound.s)
        .float("gm_hinf", bound.gm_hinf)
        .float("r_inv_sqrt_norm", bound.r_inv_sqrt_norm)
        .float("hankel_norm", bound.hankel_norm);
    out.write(SYNTHESIS_FILE, &rep.finish())?;

    println!("synthesis ({} states, {} inputs, {} outputs)", sys.n(), sys.m(), sys.p());
    println!("  CARE residual      {}", fmt_f64(sol.residual_norm));
    println!("  spectral abscissa  {}", fmt_f64(linalg::spectral_abscissa(&sol.a_m)));
    println!("  decay M, beta      {}, {}", fmt_f64(decay.m), fmt_f64(decay.beta));
    println!("  Hankel norm        {}", fmt_f64(bound.hankel_norm));
    println!("  Nehari error       {}", fmt_f64(unconstrained.achieved_error));
    if let Ok(x) = &constrained {
        println!("  constrained error  {}", fmt_f64(x.achieved_error));
    }
    println!("  S                  {}", fmt_f64(bound.s));
    if sys.n() == 1 {
        println!("  Pi                 {}", fmt_f64(sol.pi[(0, 0)]));
    }
    Ok(Verdict::Pass)
}

fn sim_config(setup: &Setup, law: LawName, init: ObserverInit) -> Result<SimulationConfig, CliError> {
    let s = &setup.scenario.simulation;
    let controller = Controller::Law(setup.law(law)?);
    let mut cfg = SimulationConfig::new(
        setup.plant.clone(),
        setup.solution.clone(),
        controller,
        setup.reference.clone(),
        setup.v0.clone(),
        s.dt,
    )?;
    cfg.horizon = setup.horizon()?;
    cfg.reference = SignalTimeline::constant(vec![0.0, cfg.horizon], setup.reference.clone())?;
    cfg.observer_init = init;
    cfg.seed = s.seed;
    if let Some(a) = &setup.scenario.adaptation {
        cfg.adaptation = Some(AdaptationConfig::from_solution(a.gamma, a.epsilon, &setup.solution)?);
    }
    Ok(cfg)
}

fn cost_section(rep: &mut Report, name: &str, setup: &Setup, traj: &Trajectory) -> Result<f64, CliError> {
    let cost = sim::evaluate_cost(traj, &setup.solution.r)?;
    let err = traj.final_tracking_error().unwrap_or_else(|| DVector::zeros(0));
    let err_inf = err.amax();
    rep.section(name)
        .float("j", cost.j)
        .float("tracking", cost.tracking)
        .float("control", cost.control)
        .float("j_norm", cost.j_norm)
        .float("horizon", *traj.times.last().unwrap_or(&0.0))
        .vector("final_tracking_error", &err)
        .float("final_tracking_error_inf", err_inf)
        .float("sup_observer_error", traj.sup_observer_error(0.0, f64::INFINITY))
        .float("sup_alpha_hat", traj.sup_alpha_hat());
    Ok(err_inf)
}

pub fn simulate(setup: &Setup, out: &mut Outputs) -> Result<Verdict, CliError> {
    let s = &setup.scenario.simulation;
    let cfg = sim_config(setup, s.law, s.observer_init.into())?;
    let traj = sim::integrate_closed_loop(&cfg)?;
    out.write_csv("trajectory.csv", &traj.to_csv())?;
    let mut rep = out.report();
    rep.section("run")
        .text("law", s.law.label())
        .float("dt", cfg.dt)
        .int("steps", traj.len().saturating_sub(1))
        .flag("adaptive", cfg.adaptation.is_some());
    let err_inf = cost_section(&mut rep, "cost", setup, &traj)?;
    let verdict = match s.tracking_threshold {
        Some(th) => {
            rep.section("threshold").float("tracking_threshold", th).flag("met", err_inf <= th);
            if err_inf <= th {
                Verdict::Pass
            } else {
                Verdict::Fail(format!("final tracking error {} exceeds threshold {}", fmt_f64(err_inf), fmt_f64(th)))
            }
        }
        None => Verdict::Pass,
    };
    out.write("cost.toml", &rep.finish())?;
    println!("simulate {} over [0, {}] with dt {}", s.law.label(), fmt_f64(cfg.horizon), fmt_f64(cfg.dt));
    println!("  final |y - r|_inf  {}", fmt_f64(err_inf));
    println!("  sup |alpha_hat|    {}", fmt_f64(traj.sup_alpha_hat()));
    Ok(verdict)
}

struct GapRow {
    name: &'static str,
    reference: f64,
    observed: f64,
    sup_gap: f64,
    pass: bool,
}

fn trajectory_of<'a>(runs: &'a [(LawName, Trajectory)], law: LawName) -> &'a Trajectory {
    &runs.iter().find(|(l, _)| *l == law).expect("law was simulated").1
}

fn gap_rows(setup: &Setup, runs: &[(LawName, Trajectory)], laws: &BTreeSet<LawName>) -> Result<Vec<GapRow>, CliError> {
    let sol = &setup.solution;
    let beta = riccati::decay_certificate(&sol.a_m)?.beta;
    let w = riccati::observability_gramian(&sol.a_m, sol.system.c())?;
    let mut rows = Vec::new();
    if !laws.contains(&LawName::PureForm) {
        return Ok(rows);
    }
    let mut decay_row = |name: &'static str, traj: &Trajectory, pure: &ControlLaw, other: &ControlLaw| -> Result<(), CliError> {
        let g = sim::trajectory_law_gap(traj, pure, other, GapMode::FullLaw)?;
        let rate = g.fitted_decay_rate.unwrap_or(f64::NAN);
        rows.push(GapRow { name, reference: 0.9 * beta, observed: rate, sup_gap: g.sup_gap, pass: rate >= 0.9 * beta || g.sup_gap <= 1e-12 });
        Ok(())
    };
    // The decay comparisons only apply to a disturbance-free plant.
    let disturbed = setup.scenario.plant.alpha.as_ref().is_some_and(|a| a.iter().any(|&x| x != 0.0));
    if laws.contains(&LawName::Lqr) && !disturbed {
        let reg = synthesis::pure_form_regulator(sol, &w)?;
        decay_row("LQR vs PureForm regulator (decay rate vs 0.9 beta)", trajectory_of(runs, LawName::Lqr), &reg, &synthesis::lqr_law(sol))?;
    }
    if laws.contains(&LawName::Lqt) && !disturbed {
        let trk = synthesis::pure_form_tracker(sol, &w, &setup.reference)?;
        let lqt = synthesis::lqt_law(sol, &setup.reference)?;
        decay_row("LQT vs PureForm tracker (decay rate vs 0.9 beta)", trajectory_of(runs, LawName::Lqt), &trk, &lqt)?;
    }
    if laws.contains(&LawName::Sdre) {
        let traj = trajectory_of(runs, LawName::Sdre);
        let horizon = *traj.times.last().unwrap_or(&0.0);
        let sigma = traj.signal(&traj.sigma)?;
        let q = synthesis::solve_q_backward(sol, &sigma, horizon)?;
        let pure = synthesis::pure_form_from_adjoint(sol, q)?;
        let sdre = setup.law(LawName::Sdre)?;
        let g = sim::trajectory_law_gap(traj, &pure, &sdre, GapMode::TrackingComponent)?;
        let mid = traj.times.partition_point(|&t| t < 0.5 * horizon).min(traj.len() - 1);
        let f = setup.plant.eval_nonlinearity(&traj.v[mid])?;
        let asymptote = synthesis::sdre_gap_asymptote(sol, &f)?;
        let observed = g.gap_at(traj.times[mid]);
        let rel = (observed - &asymptote).norm() / asymptote.norm().max(f64::MIN_POSITIVE);
        rows.push(GapRow {
            name: "SDRE vs PureForm (tracking-term asymptote norm)",
            reference: asymptote.norm(),
            observed: observed.norm(),
            sup_gap: g.sup_gap,
            pass: rel <= 1e-3 || asymptote.norm() == 0.0 && observed.norm() <= 1e-9,
        });
    }
    Ok(rows)
}

pub fn benchmark(setup: &Setup, seed: u64, out: &mut Outputs) -> Result<Verdict, CliError> {
    let bench = setup
        .scenario
        .benchmark
        .as_ref()
        .ok_or_else(|| CliError::Config("a [benchmark] section is required".into()))?;
    let laws: BTreeSet<LawName> = bench.laws.iter().copied().collect();
    if laws.is_empty() {
        return Err(CliError::Config("`benchmark.laws` is empty; choose from LQR, LQT, PureForm, SDRE, Compensator".into()));
    }
    let init: ObserverInit = bench.observer_init.into();
    let runs: Vec<(LawName, Trajectory)> = laws
        .par_iter()
        .map(|&law| -> Result<_, CliError> {
            let cfg = sim_config(setup, law, init.clone())?;
            Ok((law, sim::integrate_closed_loop(&cfg)?))
        })
        .collect::<Result<_, _>>()?;

    let mut rep = out.report();
    rep.section("benchmark").texts("laws", &laws.iter().map(|l| l.label().to_string()).collect::<Vec<_>>());
    println!("{:<14} {:>24} {:>24}", "law", "J", "final |y - r|_inf");
    for (law, traj) in &runs {
        let err = cost_section(&mut rep, &format!("law.{}", law.label()), setup, traj)?;
        let j = sim::evaluate_cost(traj, &setup.solution.r)?.j;
        println!("{:<14} {:>24} {:>24}", law.label(), fmt_f64(j), fmt_f64(err));
        out.write_csv(&format!("law-{}.csv", law.label()), &traj.to_csv())?;
    }

    let gaps = gap_rows(setup, &runs, &laws)?;
    let mut failures = Vec::new();
    if !gaps.is_empty() {
        println!("\n{:<52} {:>24} {:>24} {:>6}", "law gap", "reference", "observed", "pass");
    }
    for row in &gaps {
        rep.row("gap")
            .text("comparison", row.name)
            .float("reference", row.reference)
            .float("observed", row.observed)
            .float("sup_gap", row.sup_gap)
            .flag("pass", row.pass);
        println!("{:<52} {:>24} {:>24} {:>6}", row.name, fmt_f64(row.reference), fmt_f64(row.observed), row.pass);
        if !row.pass {
            failures.push(row.name.to_string());
        }
    }

    // exogenous draws against the optimal (feedthrough) approximant
    let sol = &setup.solution;
    let x = nehari::solve_nehari(&sol.closed_loop(), &sol.r, NehariOptions::default())?;
    let horizon = setup.horizon()?;
    let steps = (horizon / setup.scenario.simulation.dt).round().max(1.0) as usize;
    let grid = uniform_grid(horizon, steps);
    let p = sol.system.p();
    let draws: Vec<_> = (0..bench.draws as u64)
        .into_par_iter()
        .map(|i| -> Result<_, CliError> {
            let sigma = sim::band_limited_signal(grid.clone(), p, bench.omega_max, seed.wrapping_add(i))?;
            Ok(sim::cost_gap(sol, &x, &sigma, &setup.v0)?)
        })
        .collect::<Result<_, _>>()?;
    let held = draws.iter().filter(|d| d.within_bound()).count();
    let mut csv = String::from("draw,j1,j2,gap,bound,within_bound\n");
    for (i, d) in draws.iter().enumerate() {
        csv.push_str(&format!("{i},{},{},{},{},{}\n", fmt_f64(d.j1), fmt_f64(d.j2), fmt_f64(d.gap), fmt_f64(d.bound), d.within_bound()));
    }
    out.write_csv("cost_gap.csv", &csv)?;
    let worst = draws.iter().map(|d| d.gap / d.bound.max(f64::MIN_POSITIVE)).fold(0.0, f64::max);
    rep.section("cost_gap")
        .int("draws", draws.len())
        .int("within_bound", held)
        .float("s", draws.first().map_or(f64::NAN, |d| d.s))
        .float("worst_gap_over_bound", worst);
    println!("\ncost gap |J2 - J1| <= S ||sigma||: {held}/{} draws within bound (worst ratio {})", draws.len(), fmt_f64(worst));
    if held < draws.len() {
        failures.push(format!("{} of {} cost-gap draws exceed the bound", draws.len() - held, draws.len()));
    }
    out.write("benchmark.toml", &rep.finish())?;
    Ok(if failures.is_empty() { Verdict::Pass } else { Verdict::Fail(failures.join("; ")) })
}

pub fn nehari_report(setup: &Setup, out: &mut Outputs) -> Result<Verdict, CliError> {
    let sol = &setup.solution;
    let g = sol.closed_loop();
    let opts = setup.nehari_options();
    let unconstrained = nehari::solve_nehari(&g, &sol.r, opts)?;
    let constrained = nehari::solve_constrained_nehari(&g, &sol.r, opts).ok();
    let balanced = nehari::balance(&g)?;
    let bound = nehari::suboptimality_constant(&g, &sol.r)?;

    let mut rep = out.report();
    rep.section("hankel").floats("hsv", &balanced.hsv);
    approximant_section(&mut rep, "nehari.unconstrained", &unconstrained);
    if let Some(x) = &constrained {
        approximant_section(&mut rep, "nehari.constrained", x);
    }
    rep.section("suboptimality").float("s", bound.s).float("gm_hinf", bound.gm_hinf).float("hankel_norm", bound.hankel_norm);
    out.write("nehari.toml", &rep.finish())?;

    let grid = nehari::frequency_grid(&[&sol.a_m, &unconstrained.h_a], 200);
    let e1 = nehari::error_profile(&g, &unconstrained, &grid);
    let e2 = constrained.as_ref().map(|x| nehari::error_profile(&g, x, &grid));
    let mut csv = String::from("omega,error_unconstrained,error_constrained,hankel_norm\n");
    for (k, w) in grid.iter().enumerate() {
        let c = e2.as_ref().map_or(f64::NAN, |e| e[k]);
        csv.push_str(&format!("{},{},{},{}\n", fmt_f64(*w), fmt_f64(e1[k]), fmt_f64(c), fmt_f64(bound.hankel_norm)));
    }
    out.write_csv("nehari_error.csv", &csv)?;
    println!("Hankel singular values: {}", balanced.hsv.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(", "));
    println!("unconstrained error {} (order {})", fmt_f64(unconstrained.achieved_error), unconstrained.order());
    if let Some(x) = &constrained {
        println!("constrained error   {} (order {})", fmt_f64(x.achieved_error), x.order());
    }
    Ok(Verdict::Pass)
}

fn lookup<'a>(doc: &'a toml::Table, path: &str) -> Result<&'a toml::Value, CliError> {
    let mut parts = path.split('.');
    let first = parts.next().unwrap_or_default();
    let mut v = doc.get(first);
    for p in parts {
        v = v.and_then(|x| x.get(p));
    }
    v.ok_or_else(|| CliError::Dependency(format!("{SYNTHESIS_FILE} lacks `{path}`; rerun `synthesize`")))
}

fn read_f64(doc: &toml::Table, path: &str) -> Result<f64, CliError> {
    let v = lookup(doc, path)?;
    v.as_float()
        .or_else(|| v.as_integer().map(|i| i as f64))
        .ok_or_else(|| CliError::Dependency(format!("`{path}` in {SYNTHESIS_FILE} is not a number")))
}

fn read_matrix(doc: &toml::Table, path: &str) -> Result<DMatrix<f64>, CliError> {
    let bad = || CliError::Dependency(format!("`{path}` in {SYNTHESIS_FILE} is malformed"));
    let shape = lookup(doc, &format!("{path}_shape"))?.as_array().ok_or_else(bad)?;
    let dim = |i: usize| shape.get(i).and_then(toml::Value::as_integer).map(|x| x as usize).ok_or_else(bad);
    let (r, c) = (dim(0)?, dim(1)?);
    let rows = lookup(doc, path)?.as_array().ok_or_else(bad)?;
    let mut m = DMatrix::zeros(r, c);
    for (i, row) in rows.iter().enumerate().take(r) {
        let row = row.as_array().ok_or_else(bad)?;
        for (j, x) in row.iter().enumerate().take(c) {
            m[(i, j)] = x.as_float().ok_or_else(bad)?;
        }
    }
    Ok(m)
}

fn read_approximant(doc: &toml::Table, section: &str) -> Result<NehariApproximant, CliError> {
    let has_d = lookup(doc, &format!("{section}.has_feedthrough"))?.as_bool().unwrap_or(false);
    Ok(NehariApproximant {
        h_a: read_matrix(doc, &format!("{section}.h_a"))?,
        h_b: read_matrix(doc, &format!("{section}.h_b"))?,
        h_c: read_matrix(doc, &format!("{section}.h_c"))?,
        d_h: if has_d { Some(read_matrix(doc, &format!("{section}.d_h"))?) } else { None },
        achieved_error: read_f64(doc, &format!("{section}.achieved_error"))?,
        optimal_error: read_f64(doc, &format!("{section}.optimal_error"))?,
        hsv: Vec::new(),
    })
}

/// Small-gain verdict from the synthesis artifacts of the same config.
pub fn check(setup: &Setup, out: &mut Outputs) -> Result<Verdict, CliError> {
    let path = out.dir.join(SYNTHESIS_FILE);
    let text = std::fs::read_to_string(&path).map_err(|_| {
        CliError::Dependency(format!("{} not found; run `synthesize` with the same config and --out first", path.display()))
    })?;
    if report::recorded_hash(&text) != Some(out.hash.as_str()) {
        return Err(CliError::Dependency(format!(
            "{} was produced from a different config; rerun `synthesize`",
            path.display()
        )));
    }
    let doc: toml::Table = text
        .parse()
        .map_err(|e| CliError::Dependency(format!("{} is unreadable ({e}); rerun `synthesize`", path.display())))?;

    let sg = &setup.scenario.small_gain;
    let rho_w = sg.rho_w.ok_or_else(|| CliError::Config("`small_gain.rho_w` is required for `check`".into()))?;
    let section = if setup.scenario.compensator.constrained { "nehari.constrained" } else { "nehari.unconstrained" };
    let h = read_approximant(&doc, section)?;
    let sol = &setup.solution;
    let epsilon = setup.scenario.adaptation.as_ref().map_or(0.1, |a| a.epsilon);
    let parts = DeltaParts {
        g_h: adaptive::compensator_linf_gain(&h)?,
        conv_norm: read_f64(&doc, "convolution.norm")?,
        r_inv_norm: linalg::norm2(&sol.r_inv),
        c_norm: linalg::norm2(sol.system.c()),
        nu_alpha: setup.plant.nu_alpha,
        epsilon,
    };
    let bounds = estimate_lipschitz_bounds(&setup.plant, rho_w, sg.lipschitz_samples)?;
    let deltas = parts.compose(&bounds);
    let inputs = SmallGainInputs {
        m: read_f64(&doc, "decay.m")?,
        rho0: setup.plant.rho0,
        conv_norm: parts.conv_norm,
        nu1: bounds.nu1,
        nu2: bounds.nu2,
        b_norm: linalg::norm2(sol.system.b()),
        delta_0w: deltas.delta_0w,
        delta_0r: deltas.delta_0r,
        delta_0u: deltas.delta_0u,
        r_inf: sg.r_inf.unwrap_or_else(|| setup.reference.amax()),
        rho_w,
        epsilon_s: sg.epsilon_s,
    };
    let verdict = adaptive::small_gain_check(inputs).map_err(|e| match e {
        CoreError::Precondition(msg) => CliError::Config(msg),
        e => e.into(),
    })?;

    let mut rep = out.report();
    rep.section("constants")
        .float("m", inputs.m)
        .float("rho0", inputs.rho0)
        .float("conv_norm", inputs.conv_norm)
        .float("nu1", inputs.nu1)
        .float("nu2", inputs.nu2)
        .float("b_norm", inputs.b_norm)
        .float("g_h", deltas.g_h)
        .float("delta_0w", inputs.delta_0w)
        .float("delta_0r", inputs.delta_0r)
        .float("delta_0u", inputs.delta_0u)
        .float("r_inf", inputs.r_inf)
        .float("rho_w", inputs.rho_w)
        .float("epsilon_s", inputs.epsilon_s);
    rep.section("verdict")
        .float("denominator", verdict.denominator)
        .flag("denominator_positive", verdict.denominator > 0.0)
        .float("lhs", verdict.lhs)
        .float("margin", verdict.margin)
        .flag("satisfied", verdict.satisfied);
    let body = rep.finish();
    out.write("small_gain.toml", &body)?;
    print!("{}", body.lines().skip(1).map(|l| format!("{l}\n")).collect::<String>());
    Ok(Verdict::Pass)
}
