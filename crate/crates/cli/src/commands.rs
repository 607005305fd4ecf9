//! Subcommand implementations. Each returns an [`Output`]; only `main`
//! touches stdout and the output directory.

use dyadic_bellman::bollobas::{check_main_inequality_b, check_reduced_ode, check_scalar_inequalities, check_shape};
use dyadic_bellman::davis::{
    check_infinitesimal, check_main_inequality, check_obstacle_majorization, check_ode_residual, default_lattice, FD_TOL,
};
use dyadic_bellman::dyadic::{
    bellman_induction_margin, empirical_inequality_suite, haar_decompose, inf_oracle_bollobas, random_test_functions,
    reconstruct, sup_oracle_davis, RandomTreeParams,
};
use dyadic_bellman::envelope::{solve_greatest_subsolution, solve_heat_envelope, Direction, SolveReport};
use dyadic_bellman::mc::{hitting_time_moments, jensen_gap_check, simulate_t_a, supermartingale_check, McConfig};
use dyadic_bellman::reduced::geometric_steps;
use dyadic_bellman::report::MarginTracker;
use dyadic_bellman::specfn::{davis_constant, find_c_alpha, SeriesParams};
use dyadic_bellman::{
    Axis, BollobasBellman, BollobasLattice, DavisBellman, ObstacleSpec, OracleGrid, SolverConfig, VerificationReport,
};
use serde::Serialize;

use crate::config::{Format, SuiteConfig};
use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Problem {
    Davis,
    Bollobas,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Suite {
    Davis,
    Bollobas,
    Dyadic,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum DirectionArg {
    Sup,
    Inf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Experiment {
    /// Sharpness stopping time `T_a`.
    #[value(name = "t-a")]
    TA,
    /// Exit of `W` from `(−a, a)`.
    Hitting,
    /// `U(W(t), √t)` at checkpoints.
    Supermartingale,
    /// Stopped-process chain at one point.
    Jensen,
}

/// What a command produced.
#[derive(Debug, Default)]
pub struct Output {
    pub stdout: String,
    /// `(file name, contents)` written under `--out`.
    pub files: Vec<(String, String)>,
    pub warnings: Vec<String>,
    pub passed: bool,
}

impl Output {
    fn ok(stdout: String) -> Self {
        Self { stdout, passed: true, ..Self::default() }
    }
}

fn format_or(cfg: &SuiteConfig, fallback: Format) -> Format {
    cfg.format.unwrap_or(fallback)
}

/// JSON array or CSV with a header row.
pub fn render<R: Serialize>(rows: &[R], format: Format) -> Result<String> {
    match format {
        Format::Json => Ok(serde_json::to_string_pretty(rows)? + "\n"),
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            for r in rows {
                w.serialize(r)?;
            }
            let bytes = w.into_inner().map_err(|e| CliError::Usage(e.to_string()))?;
            Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
        }
    }
}

#[derive(Serialize)]
struct ConstantRow {
    alpha: f64,
    c_alpha: f64,
    kappa_alpha: f64,
    residual: f64,
    out_of_verified_range: bool,
}

pub fn constant(cfg: &SuiteConfig) -> Result<Output> {
    let mut rows = Vec::new();
    let mut warnings = Vec::new();
    for &alpha in &cfg.alphas {
        let c = find_c_alpha(&SeriesParams::new(alpha)?, cfg.tol.root)?;
        if c.out_of_verified_range {
            warnings.push(format!("alpha={alpha} is below 2: the constant is computed but the inequality is not sharp there"));
        }
        rows.push(ConstantRow {
            alpha,
            c_alpha: c.c_alpha,
            kappa_alpha: c.kappa_alpha,
            residual: c.residual,
            out_of_verified_range: c.out_of_verified_range,
        });
    }
    let mut out = Output::ok(render(&rows, format_or(cfg, Format::Json))?);
    out.warnings = warnings;
    Ok(out)
}

#[derive(Serialize)]
struct EvalRow {
    function: &'static str,
    alpha: Option<f64>,
    p: f64,
    q: f64,
    value: f64,
}

pub fn eval(cfg: &SuiteConfig, function: Problem, p: f64, q: f64) -> Result<Output> {
    let row = match function {
        Problem::Davis => {
            if q < 0.0 {
                return Err(CliError::Usage("davis U needs q >= 0".into()));
            }
            EvalRow { function: "davis", alpha: Some(cfg.alpha), p, q, value: DavisBellman::new(cfg.alpha)?.value(p, q) }
        }
        Problem::Bollobas => EvalRow { function: "bollobas", alpha: None, p, q, value: BollobasBellman::new().value(p, q) },
    };
    Ok(Output::ok(render(&[row], format_or(cfg, Format::Json))?))
}

#[derive(Serialize)]
struct EnvelopeSummary {
    problem: &'static str,
    obstacle: String,
    direction: Direction,
    probe: (f64, f64),
    value_at_probe: f64,
    closed_form_at_probe: f64,
    a_set_size: usize,
    report: SolveReport,
}

pub fn envelope(
    cfg: &SuiteConfig,
    problem: Problem,
    direction: Option<DirectionArg>,
    inflate: f64,
    probe: (f64, f64),
) -> Result<Output> {
    let expected = match problem {
        Problem::Davis => DirectionArg::Sup,
        Problem::Bollobas => DirectionArg::Inf,
    };
    if direction.is_some_and(|d| d != expected) {
        return Err(CliError::Usage(format!("{problem:?} is a {expected:?}-type problem")));
    }
    if !(inflate.is_finite() && inflate > 0.0) {
        return Err(CliError::Usage("--inflate must be positive".into()));
    }
    let (obstacle, spec, closed): (ObstacleSpec, _, Box<dyn Fn(f64, f64) -> f64>) = match problem {
        Problem::Davis => {
            let b = DavisBellman::new(cfg.alpha)?;
            let spec = cfg.grid.davis;
            (ObstacleSpec::davis(cfg.alpha, inflate * b.c_alpha()), spec, Box::new(move |p, q| b.value(p, q)))
        }
        Problem::Bollobas => {
            if inflate != 1.0 {
                return Err(CliError::Usage("--inflate applies to the davis obstacle only".into()));
            }
            let b = BollobasBellman::new();
            (ObstacleSpec::bollobas_range(), cfg.grid.bollobas, Box::new(move |x, l| b.value(x, l)))
        }
    };
    let (p, q) = (spec.p.axis()?, spec.q.axis()?);
    let mut solver = SolverConfig::recommended(&obstacle, &p);
    solver.stop_tol = cfg.tol.solver;
    solver.a_set = vec![0.0];
    solver.a_set.extend(geometric_steps(p.spacing(), 0.5 * (p.max - p.min), cfg.a_set));
    let (grid, report) = match problem {
        Problem::Davis => solve_heat_envelope(&obstacle, p, q, &solver, Some(probe))?,
        Problem::Bollobas => solve_greatest_subsolution(&obstacle, p, q, &solver, Some(probe))?,
    };
    let passed = report.converged && !report.diverged;
    let summary = EnvelopeSummary {
        problem: match problem {
            Problem::Davis => "davis",
            Problem::Bollobas => "bollobas",
        },
        obstacle: obstacle.label(),
        direction: obstacle.direction,
        probe,
        value_at_probe: grid.interpolate_clamped(probe.0, probe.1),
        closed_form_at_probe: closed(probe.0, probe.1),
        a_set_size: solver.a_set.len(),
        report,
    };
    let json = serde_json::to_string_pretty(&summary)? + "\n";
    Ok(Output {
        stdout: json.clone(),
        files: vec![("envelope.grid".into(), grid.dump(obstacle.direction, &obstacle.label())), ("report.json".into(), json)],
        warnings: Vec::new(),
        passed,
    })
}

fn tag(mut r: VerificationReport, alpha: f64) -> VerificationReport {
    r.name = format!("{}[alpha={alpha}]", r.name);
    r
}

fn davis_suite(cfg: &SuiteConfig, out: &mut Vec<VerificationReport>) -> Result<()> {
    let lattice = default_lattice();
    let p_inner = Axis::new(-3.0, 3.0, 61)?;
    let q_inner = Axis::new(0.25, 3.0, 56)?;
    for &alpha in &cfg.alphas {
        let constant = find_c_alpha(&SeriesParams::new(alpha)?, cfg.tol.root)?;
        out.push(tag(
            VerificationReport::from_margin("davis.constant_residual", -constant.residual, vec![constant.c_alpha], cfg.tol.root),
            alpha,
        ));
        let b = DavisBellman::new(alpha)?;
        out.push(tag(check_main_inequality(|p, q| b.value(p, q), &lattice, cfg.tol.check), alpha));
        let m = check_obstacle_majorization(&b, &lattice.p, &lattice.q, cfg.tol.check);
        out.push(tag(m.majorization, alpha));
        out.push(tag(m.exterior_equality, alpha));
        let inf = check_infinitesimal(&b, &p_inner, &q_inner, FD_TOL)?;
        out.push(tag(inf.inequality, alpha));
        out.push(tag(inf.interior_equality, alpha));
        let ode = check_ode_residual(&b, &Axis::new(-b.c_alpha(), b.c_alpha(), 101)?, FD_TOL);
        out.push(tag(ode.residual, alpha));
        out.push(tag(ode.boundary_slope, alpha));
    }
    Ok(())
}

fn bollobas_suite(cfg: &SuiteConfig, out: &mut Vec<VerificationReport>) -> Result<()> {
    let b = BollobasBellman::new();
    let r = check_main_inequality_b(|x, l| b.value(x, l), &BollobasLattice::default(), cfg.tol.check)?;
    out.extend(r.reports().into_iter().cloned());
    out.extend(check_scalar_inequalities(10_000)?);
    out.extend(check_shape(&b, &Axis::new(-2.0, 2.0, 161)?, &Axis::new(0.0, 2.0, 81)?, cfg.tol.check));
    out.push(check_reduced_ode(&b, &Axis::new(-1.0, 1.0, 101)?, 1e-8));
    Ok(())
}

fn dyadic_suite(cfg: &SuiteConfig, out: &mut Vec<VerificationReport>) -> Result<()> {
    let params = RandomTreeParams::default();
    let (n, depth) = (cfg.dyadic.samples, cfg.dyadic.test_depth);
    for &alpha in &cfg.alphas {
        let c = davis_constant(alpha)?;
        let r = empirical_inequality_suite(&c, n, depth, cfg.seed, params, 0.0)?;
        out.push(tag(r.davis, alpha));
        if alpha == cfg.alphas[0] {
            // the weak-type check does not depend on α
            out.push(r.weak_type);
        }
    }
    let fs = random_test_functions::<f64>(cfg.seed, n, depth, params)?;
    for &alpha in &cfg.alphas {
        let b = DavisBellman::new(alpha)?;
        let u = |p: f64, q: f64| b.value(p, q);
        let mut t = MarginTracker::new("dyadic.bellman_induction");
        for (i, f) in fs.iter().enumerate() {
            for q in [0.0, 0.5, 1.0] {
                t.observe(bellman_induction_margin(&u, f, q), &[i as f64, q]);
            }
        }
        out.push(tag(t.finish(cfg.tol.check), alpha));
    }
    let mut rt = MarginTracker::new("dyadic.haar_round_trip");
    for (i, f) in fs.iter().enumerate() {
        let g = reconstruct(&haar_decompose(f))?;
        let err = f.leaves().iter().zip(g.leaves()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        rt.observe(-err, &[i as f64]);
    }
    out.push(rt.finish(1e-12));
    Ok(())
}

#[derive(Serialize)]
struct ReportRow<'a> {
    name: &'a str,
    passed: bool,
    worst_violation: f64,
    location: String,
    tolerance: f64,
    samples: usize,
    wall_time_ms: f64,
}

fn render_reports(reports: &[VerificationReport], format: Format) -> Result<String> {
    match format {
        Format::Json => render(reports, format),
        Format::Csv => {
            let rows: Vec<ReportRow> = reports
                .iter()
                .map(|r| ReportRow {
                    name: &r.name,
                    passed: r.passed,
                    worst_violation: r.worst_violation,
                    location: r.location.iter().map(f64::to_string).collect::<Vec<_>>().join(";"),
                    tolerance: r.tolerance,
                    samples: r.samples,
                    wall_time_ms: r.wall_time_ms,
                })
                .collect();
            render(&rows, format)
        }
    }
}

pub fn verify(cfg: &SuiteConfig, suite: Suite) -> Result<Output> {
    let mut reports = Vec::new();
    if matches!(suite, Suite::Davis | Suite::All) {
        davis_suite(cfg, &mut reports)?;
    }
    if matches!(suite, Suite::Bollobas | Suite::All) {
        bollobas_suite(cfg, &mut reports)?;
    }
    if matches!(suite, Suite::Dyadic | Suite::All) {
        dyadic_suite(cfg, &mut reports)?;
    }
    let passed = reports.iter().all(|r| r.passed);
    let json = render_reports(&reports, Format::Json)?;
    let stdout = match format_or(cfg, Format::Json) {
        Format::Json => json.clone(),
        Format::Csv => render_reports(&reports, Format::Csv)?,
    };
    let warnings = reports.iter().filter(|r| !r.passed).map(|r| format!("FAILED {}: worst {:e}", r.name, r.worst_violation)).collect();
    Ok(Output { stdout, files: vec![("reports.json".into(), json)], warnings, passed })
}

#[derive(Serialize)]
struct OracleRow {
    problem: &'static str,
    p: f64,
    q: f64,
    depth: usize,
    value: f64,
    /// `lower` for the sup-type Davis oracle, `upper` for the inf-type one.
    bound: &'static str,
    closed_form: f64,
}

pub fn oracle(cfg: &SuiteConfig, problem: Problem, p: f64, q: f64) -> Result<Output> {
    let row = match problem {
        Problem::Davis => {
            let c = davis_constant(cfg.alpha)?;
            OracleRow {
                problem: "davis",
                p,
                q,
                depth: cfg.depth,
                value: sup_oracle_davis(&c, p, q, cfg.depth, &OracleGrid::davis_default())?,
                bound: "lower",
                closed_form: DavisBellman::new(cfg.alpha)?.value(p, q),
            }
        }
        Problem::Bollobas => OracleRow {
            problem: "bollobas",
            p,
            q,
            depth: cfg.depth,
            value: inf_oracle_bollobas(p, q, cfg.depth, &OracleGrid::bollobas_default())?,
            bound: "upper",
            closed_form: BollobasBellman::new().value(p, q),
        },
    };
    Ok(Output::ok(render(&[row], format_or(cfg, Format::Json))?))
}

/// Extra inputs of the `mc` subcommand.
#[derive(Debug, Clone, Default)]
pub struct McArgs {
    pub a: Vec<f64>,
    pub checkpoints: Vec<f64>,
    pub point: Option<(f64, f64)>,
}

#[derive(Serialize)]
struct TaRow {
    a: f64,
    alpha: f64,
    n_paths: usize,
    censored: usize,
    moment_w: f64,
    moment_w_se: f64,
    moment_t: f64,
    moment_t_se: f64,
    ratio: f64,
    ratio_se: f64,
    ratio_over_c_alpha_power: f64,
    ratio_boundary: f64,
    ratio_boundary_se: f64,
    ratio_uncensored: f64,
    ratio_uncensored_se: f64,
}

#[derive(Serialize)]
struct HittingRow {
    a: f64,
    p_plus: f64,
    p_plus_se: f64,
    p_minus: f64,
    p_minus_se: f64,
    e_tau_given_plus: f64,
    e_tau_given_plus_se: f64,
    e_tau_given_minus: f64,
    e_tau_given_minus_se: f64,
    e_tau_given_plus_extrapolated: f64,
    e_tau_given_plus_extrapolated_se: f64,
    e_tau_given_minus_extrapolated: f64,
    e_tau_given_minus_extrapolated_se: f64,
    censored: usize,
}

#[derive(Serialize)]
struct CheckpointRow {
    t: f64,
    mean: f64,
    mean_se: f64,
    increment: f64,
    increment_se: f64,
}

#[derive(Serialize)]
struct JensenRow {
    p: f64,
    q: f64,
    a: f64,
    start: f64,
    stopped: f64,
    stopped_se: f64,
    averaged: f64,
    passed: bool,
}

pub fn mc(cfg: &SuiteConfig, experiment: Experiment, args: &McArgs) -> Result<Output> {
    let base = McConfig {
        n_paths: cfg.mc.paths,
        dt: cfg.mc.dt,
        t_max: cfg.mc.t_max,
        seed: cfg.seed,
        a_values: Vec::new(),
        bootstrap_resamples: cfg.mc.bootstrap,
    };
    let format = format_or(cfg, Format::Csv);
    let alpha = cfg.alpha;
    let (stdout, passed) = match experiment {
        Experiment::TA => {
            let c = davis_constant(alpha)?.c_alpha;
            let a_values = if args.a.is_empty() { vec![0.5 * c, 0.7 * c, 0.9 * c] } else { args.a.clone() };
            let stats = simulate_t_a(&McConfig { a_values, ..base }, alpha)?;
            let rows: Vec<TaRow> = stats
                .iter()
                .map(|s| TaRow {
                    a: s.a,
                    alpha: s.alpha,
                    n_paths: s.n_paths,
                    censored: s.censored,
                    moment_w: s.moment_w.value,
                    moment_w_se: s.moment_w.se,
                    moment_t: s.moment_t.value,
                    moment_t_se: s.moment_t.se,
                    ratio: s.ratio.value,
                    ratio_se: s.ratio.se,
                    ratio_over_c_alpha_power: s.ratio.value / c.powf(alpha),
                    ratio_boundary: s.ratio_boundary.value,
                    ratio_boundary_se: s.ratio_boundary.se,
                    ratio_uncensored: s.ratio_uncensored.value,
                    ratio_uncensored_se: s.ratio_uncensored.se,
                })
                .collect();
            (render(&rows, format)?, true)
        }
        Experiment::Hitting => {
            let a_values = if args.a.is_empty() { vec![1.0] } else { args.a.clone() };
            let mut rows = Vec::new();
            for a in a_values {
                let h = hitting_time_moments(a, &base)?;
                rows.push(HittingRow {
                    a,
                    p_plus: h.p_plus.value,
                    p_plus_se: h.p_plus.se,
                    p_minus: h.p_minus.value,
                    p_minus_se: h.p_minus.se,
                    e_tau_given_plus: h.e_tau_given_plus.value,
                    e_tau_given_plus_se: h.e_tau_given_plus.se,
                    e_tau_given_minus: h.e_tau_given_minus.value,
                    e_tau_given_minus_se: h.e_tau_given_minus.se,
                    e_tau_given_plus_extrapolated: h.e_tau_given_plus_extrapolated.value,
                    e_tau_given_plus_extrapolated_se: h.e_tau_given_plus_extrapolated.se,
                    e_tau_given_minus_extrapolated: h.e_tau_given_minus_extrapolated.value,
                    e_tau_given_minus_extrapolated_se: h.e_tau_given_minus_extrapolated.se,
                    censored: h.censored,
                });
            }
            (render(&rows, format)?, true)
        }
        Experiment::Supermartingale => {
            let checkpoints = if args.checkpoints.is_empty() { vec![0.0, 0.25, 0.5, 1.0, 2.0] } else { args.checkpoints.clone() };
            let b = DavisBellman::new(alpha)?;
            let r = supermartingale_check(|p, q| b.value(p, q), &base, &checkpoints)?;
            let rows: Vec<CheckpointRow> = r
                .checkpoints
                .iter()
                .zip(&r.means)
                .enumerate()
                .map(|(i, (&t, m))| {
                    let inc = if i == 0 { None } else { r.increments.get(i - 1) };
                    CheckpointRow {
                        t,
                        mean: m.value,
                        mean_se: m.se,
                        increment: inc.map_or(0.0, |e| e.value),
                        increment_se: inc.map_or(0.0, |e| e.se),
                    }
                })
                .collect();
            (render(&rows, format)?, r.report.passed)
        }
        Experiment::Jensen => {
            let (p, q) = args.point.unwrap_or((0.0, 1.0));
            let a = args.a.first().copied().unwrap_or(0.5);
            let b = DavisBellman::new(alpha)?;
            let r = jensen_gap_check(|p, q| b.value(p, q), p, q, a, &base)?;
            let row = JensenRow {
                p,
                q,
                a,
                start: r.start,
                stopped: r.stopped.value,
                stopped_se: r.stopped.se,
                averaged: r.averaged,
                passed: r.report.passed,
            };
            (render(&[row], format)?, r.report.passed)
        }
    };
    let ext = match format {
        Format::Json => "json",
        Format::Csv => "csv",
    };
    Ok(Output { files: vec![(format!("mc.{ext}"), stdout.clone())], stdout, warnings: Vec::new(), passed })
}
