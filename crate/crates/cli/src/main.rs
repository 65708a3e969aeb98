//! Command-line harness for the distant-retrograde-orbit toolkit: reproduces
//! the reference tables and figure data as CSV, and exposes the propagation
//! and correction workflows.

mod config;
mod model;

use clap::{Args, Parser, Subcommand};
use config::FileConfig;
use hill_dro::dynamics::{self, CartesianState, IntegratorConfig};
use hill_dro::periodic::{differential_correct, CorrectorConfig};
use hill_dro::reduce::{to_reduced, EllipseFrame};
use hill_dro::secular::{contour_grid, periods6, SecularState};
use hill_dro::ModelParams;
use model::{run_on_grid, time_grid, CliError, ModelKind, ModelRun};
use rayon::prelude::*;
use std::io::Write;
use std::path::PathBuf;

const EXIT_CONFIG: i32 = 2;
const EXIT_NUMERICAL: i32 = 3;

#[derive(Parser)]
#[command(
    name = "hill-dro",
    about = "Distant retrograde orbits of the planar Hill problem",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct CommonOpts {
    /// Gravitational parameter of the smaller primary.
    #[arg(long)]
    mu: Option<f64>,
    /// Rotation rate of the synodic frame.
    #[arg(long)]
    omega: Option<f64>,
    /// Integrator accuracy (relative and absolute).
    #[arg(long)]
    tol: Option<f64>,
    /// Flat key=value config file; command-line flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct IcOpts {
    /// Initial conditions "x,y,X,Y" in rotating-frame coordinates/momenta.
    #[arg(long, value_name = "X,Y,PX,PY", allow_hyphen_values = true)]
    ic: Option<String>,
    /// Shortcut for the three reference test cases.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3), conflicts_with = "ic")]
    case: Option<u8>,
}

#[derive(Args, Debug, Clone)]
struct RunOpts {
    /// Propagation model: truth | linear | low6 | lindstedt9 | secular:closed6
    /// | secular:series8 | secular:quadrature.
    #[arg(long, default_value = "truth")]
    mode: String,
    /// Short-period correction order (0, 6, 8, 9) for the averaged models.
    #[arg(long, default_value_t = 0)]
    corrections: usize,
    /// Convert initial elements to mean elements through the inverse
    /// corrections before propagating the averaged flow.
    #[arg(long)]
    prime_convert: bool,
    /// Quadrature nodes for the augmented averaging.
    #[arg(long)]
    nodes: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Computed orbit and libration periods of the three test cases next to
    /// the reference values.
    Table1 {
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Propagate an initial state with the chosen model and write a CSV
    /// (t, x, y, X, Y, energy, x_C, y_C, r).
    Propagate {
        #[command(flatten)]
        common: CommonOpts,
        #[command(flatten)]
        ic: IcOpts,
        #[command(flatten)]
        run: RunOpts,
        /// Propagation span (from the state's epoch).
        #[arg(long, value_name = "T")]
        t_end: f64,
        /// Number of output samples.
        #[arg(long, default_value_t = 1000)]
        samples: usize,
    },
    /// Run two models on the same grid and write their difference CSV
    /// (t, dx, dy, dX, dY, pos_err, mom_err).
    Compare {
        #[command(flatten)]
        common: CommonOpts,
        #[command(flatten)]
        ic: IcOpts,
        /// First model (the reference is usually `truth`).
        #[arg(long, value_name = "MODE")]
        mode_a: String,
        /// Second model.
        #[arg(long, value_name = "MODE")]
        mode_b: String,
        /// Correction order for model A (0, 6, 8, 9).
        #[arg(long, default_value_t = 0)]
        corrections_a: usize,
        /// Correction order for model B.
        #[arg(long, default_value_t = 0)]
        corrections_b: usize,
        /// Convert initial elements to mean elements for the averaged models.
        #[arg(long)]
        prime_convert: bool,
        #[arg(long, value_name = "T")]
        t_end: f64,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        /// Quadrature nodes for the augmented averaging.
        #[arg(long)]
        nodes: Option<usize>,
    },
    /// Energies of the order-8 averaged Hamiltonian on a (q, Q) grid
    /// (CSV q, Q, K).
    Contour {
        #[command(flatten)]
        common: CommonOpts,
        /// Action Phi of the grid.
        #[arg(long)]
        phi: f64,
        /// q range "lo:hi".
        #[arg(long, default_value = "-20:20", allow_hyphen_values = true)]
        q_range: String,
        /// Q range "lo:hi".
        #[arg(long, default_value = "-1:1", allow_hyphen_values = true)]
        momentum_range: String,
        /// Grid resolution "nq:nQ".
        #[arg(long, default_value = "201:101")]
        resolution: String,
    },
    /// Differentially correct a seed to a true periodic orbit and report it.
    Correct {
        #[command(flatten)]
        common: CommonOpts,
        #[command(flatten)]
        ic: IcOpts,
        /// Seed period; defaults per test case (6.27888, 6.27815, 232.5).
        #[arg(long)]
        period: Option<f64>,
        /// Convergence target on the periodicity error.
        #[arg(long, default_value_t = 1e-12)]
        target_eps: f64,
        #[arg(long, default_value_t = 25)]
        max_iterations: usize,
    },
    /// Track the reference-ellipse center of a model (CSV t, x_C, y_C, q, Q).
    CenterTrack {
        #[command(flatten)]
        common: CommonOpts,
        #[command(flatten)]
        ic: IcOpts,
        #[command(flatten)]
        run: RunOpts,
        #[arg(long, value_name = "T")]
        t_end: f64,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
    },
}

struct Resolved {
    params: ModelParams,
    tol: f64,
    out: Option<PathBuf>,
    file: FileConfig,
}

fn resolve_common(common: &CommonOpts) -> Result<Resolved, CliError> {
    let file = match &common.config {
        Some(path) => FileConfig::load(path).map_err(CliError::Config)?,
        None => FileConfig::default(),
    };
    let mu = common.mu.or(file.parse::<f64>("mu").map_err(CliError::Config)?).unwrap_or(1.0);
    let omega =
        common.omega.or(file.parse::<f64>("omega").map_err(CliError::Config)?).unwrap_or(1.0);
    let tol = common.tol.or(file.parse::<f64>("tol").map_err(CliError::Config)?).unwrap_or(1e-12);
    if tol.is_nan() || tol <= 0.0 {
        return Err(CliError::Config(format!("tolerance must be positive, got {tol}")));
    }
    let out = common.out.clone().or_else(|| file.get("out").map(PathBuf::from));
    let params = ModelParams::new(mu, omega)?;
    Ok(Resolved { params, tol, out, file })
}

fn resolve_run(run: &RunOpts, file: &FileConfig, tol: f64) -> Result<ModelRun, CliError> {
    let mode_str = if run.mode == "truth" {
        file.get("mode").unwrap_or(&run.mode).to_string()
    } else {
        run.mode.clone()
    };
    let kind: ModelKind = mode_str.parse().map_err(CliError::Config)?;
    let corrections = if run.corrections != 0 {
        run.corrections
    } else {
        file.parse::<usize>("corrections").map_err(CliError::Config)?.unwrap_or(0)
    };
    if !matches!(corrections, 0 | 6 | 8 | 9) {
        return Err(CliError::Config(format!(
            "corrections must be one of 0, 6, 8, 9; got {corrections}"
        )));
    }
    if corrections > 0 && !kind.is_analytic() {
        return Err(CliError::Config(format!(
            "corrections apply to the averaged models only, not {mode_str:?}"
        )));
    }
    let nodes =
        run.nodes.or(file.parse::<usize>("nodes").map_err(CliError::Config)?).unwrap_or(256);
    let prime_convert = run.prime_convert
        || file.parse::<bool>("prime_convert").map_err(CliError::Config)?.unwrap_or(false);
    Ok(ModelRun { kind, corrections, prime_convert, nodes, tol })
}

fn table1_cases() -> [(&'static str, CartesianState, f64, f64, f64); 3] {
    [
        (
            "1: periodic",
            CartesianState::new(0.0, 0.1, 20.0, -10.0, -0.1),
            6.27888,
            362.215,
            50.005,
        ),
        (
            "2: small amplitude libration",
            CartesianState::new(0.0, 0.1, 20.0, -10.5, -0.1),
            6.27815,
            335.394,
            45.13,
        ),
        (
            "3: large amplitude libration",
            CartesianState::new(0.0, 0.0, 10.0, -0.5, -0.1),
            6.27611,
            335.477,
            45.145,
        ),
    ]
}

fn parse_ic(opts: &IcOpts) -> Result<CartesianState, CliError> {
    if let Some(case) = opts.case {
        return Ok(table1_cases()[case as usize - 1].1);
    }
    let Some(raw) = &opts.ic else {
        return Err(CliError::Config("provide --ic x,y,X,Y or --case 1|2|3".into()));
    };
    let parts: Vec<&str> = raw.split(',').collect();
    if parts.len() != 4 {
        return Err(CliError::Config(format!(
            "--ic expects four comma-separated numbers, got {raw:?}"
        )));
    }
    let mut vals = [0.0; 4];
    for (slot, part) in vals.iter_mut().zip(&parts) {
        *slot = part
            .trim()
            .parse::<f64>()
            .map_err(|_| CliError::Config(format!("invalid number {part:?} in --ic")))?;
    }
    Ok(CartesianState::new(0.0, vals[0], vals[1], vals[2], vals[3]))
}

fn parse_range(raw: &str, what: &str) -> Result<(f64, f64), CliError> {
    let Some((lo, hi)) = raw.split_once(':') else {
        return Err(CliError::Config(format!("{what} expects lo:hi, got {raw:?}")));
    };
    match (lo.trim().parse::<f64>(), hi.trim().parse::<f64>()) {
        (Ok(lo), Ok(hi)) if lo < hi => Ok((lo, hi)),
        _ => Err(CliError::Config(format!("{what} expects numeric lo < hi, got {raw:?}"))),
    }
}

fn write_output(out: &Option<PathBuf>, content: &str) -> Result<(), CliError> {
    match out {
        None => {
            print!("{content}");
            Ok(())
        }
        Some(path) => {
            let mut f = std::fs::File::create(path)
                .map_err(|e| CliError::Config(format!("cannot create {}: {e}", path.display())))?;
            f.write_all(content.as_bytes())
                .map_err(|e| CliError::Numerical(format!("write failed: {e}")))?;
            Ok(())
        }
    }
}

fn cmd_table1(common: &CommonOpts) -> Result<(), CliError> {
    let r = resolve_common(common)?;
    let mut report = String::new();
    report.push_str(&format!(
        "{:<32} {:>12} {:>10} {:>10} {:>12} {:>10} {:>10} {:>14} {:>9} {:>10}\n",
        "case", "T", "T_ref", "rel_diff", "T*", "T*_ref", "rel_diff", "Phi", "Phi_ref", "rel_diff"
    ));
    for (name, ic, t_ref, ts_ref, phi_ref) in table1_cases() {
        let mean = SecularState::from_reduced(&to_reduced(&ic, &r.params))?;
        let (t, ts) = periods6(&mean, &r.params)?;
        report.push_str(&format!(
            "{:<32} {:>12.6} {:>10} {:>10.2e} {:>12.6} {:>10} {:>10.2e} {:>14.9} {:>9} {:>10.2e}\n",
            name,
            t,
            t_ref,
            ((t - t_ref) / t_ref).abs(),
            ts,
            ts_ref,
            ((ts - ts_ref) / ts_ref).abs(),
            mean.action,
            phi_ref,
            ((mean.action - phi_ref) / phi_ref).abs(),
        ));
    }
    write_output(&r.out, &report)
}

fn trajectory_csv(states: &[CartesianState], params: &ModelParams) -> Result<String, CliError> {
    let mut csv = String::from("t,x,y,X,Y,energy,x_C,y_C,r\n");
    for s in states {
        let energy = dynamics::hamiltonian(s, params)?;
        let frame = EllipseFrame::from_reduced(&to_reduced(s, params), params);
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            s.t,
            s.x,
            s.y,
            s.px,
            s.py,
            energy,
            frame.x_c,
            frame.y_c,
            s.r()
        ));
    }
    Ok(csv)
}

fn cmd_propagate(
    common: &CommonOpts,
    ic: &IcOpts,
    run: &RunOpts,
    t_end: f64,
    samples: usize,
) -> Result<(), CliError> {
    let r = resolve_common(common)?;
    let model = resolve_run(run, &r.file, r.tol)?;
    let state0 = parse_ic(ic)?;
    let ts = time_grid(state0.t, t_end, samples);
    let states = run_on_grid(&state0, &ts, &model, &r.params)?;
    write_output(&r.out, &trajectory_csv(&states, &r.params)?)
}

#[allow(clippy::too_many_arguments)]
fn cmd_compare(
    common: &CommonOpts,
    ic: &IcOpts,
    mode_a: &str,
    mode_b: &str,
    corrections_a: usize,
    corrections_b: usize,
    prime_convert: bool,
    t_end: f64,
    samples: usize,
    nodes: Option<usize>,
) -> Result<(), CliError> {
    let r = resolve_common(common)?;
    let state0 = parse_ic(ic)?;
    let ts = time_grid(state0.t, t_end, samples);
    let nodes = nodes.unwrap_or(256);
    let make = |mode: &str, corrections: usize| -> Result<ModelRun, CliError> {
        let kind: ModelKind = mode.parse().map_err(CliError::Config)?;
        if corrections > 0 && !kind.is_analytic() {
            return Err(CliError::Config(format!(
                "corrections apply to the averaged models only, not {mode:?}"
            )));
        }
        if !matches!(corrections, 0 | 6 | 8 | 9) {
            return Err(CliError::Config(format!(
                "corrections must be one of 0, 6, 8, 9; got {corrections}"
            )));
        }
        Ok(ModelRun { kind, corrections, prime_convert, nodes, tol: r.tol })
    };
    let run_a = make(mode_a, corrections_a)?;
    let run_b = make(mode_b, corrections_b)?;
    let a = run_on_grid(&state0, &ts, &run_a, &r.params)?;
    let b = run_on_grid(&state0, &ts, &run_b, &r.params)?;
    let mut csv = String::from("t,dx,dy,dX,dY,pos_err,mom_err\n");
    for ((t, sa), sb) in ts.iter().zip(&a).zip(&b) {
        let (dx, dy) = (sb.x - sa.x, sb.y - sa.y);
        let (dpx, dpy) = (sb.px - sa.px, sb.py - sa.py);
        csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            t,
            dx,
            dy,
            dpx,
            dpy,
            dx.hypot(dy),
            dpx.hypot(dpy)
        ));
    }
    write_output(&r.out, &csv)
}

fn cmd_contour(
    common: &CommonOpts,
    phi: f64,
    q_range: &str,
    momentum_range: &str,
    resolution: &str,
) -> Result<(), CliError> {
    let r = resolve_common(common)?;
    let q_range = parse_range(q_range, "--q-range")?;
    let momentum_range = parse_range(momentum_range, "--momentum-range")?;
    let (nq_raw, nm_raw) = resolution.split_once(':').ok_or_else(|| {
        CliError::Config(format!("--resolution expects nq:nQ, got {resolution:?}"))
    })?;
    let parse_n = |raw: &str| -> Result<usize, CliError> {
        raw.trim()
            .parse()
            .map_err(|_| CliError::Config(format!("invalid resolution {resolution:?}")))
    };
    let (nq, nm) = (parse_n(nq_raw)?, parse_n(nm_raw)?);
    if nq < 2 || nm < 2 {
        return Err(CliError::Config("resolution must be at least 2 per axis".into()));
    }
    let grid = contour_grid(phi, q_range, momentum_range, (nq, nm), &r.params)?;
    // Rows are independent; format them in parallel, merge by row index.
    let rows: Vec<String> = grid
        .q
        .par_iter()
        .enumerate()
        .map(|(i, q)| {
            let mut chunk = String::new();
            for (j, m) in grid.momentum.iter().enumerate() {
                chunk.push_str(&format!(
                    "{},{},{}\n",
                    q,
                    m,
                    grid.energy[i * grid.momentum.len() + j]
                ));
            }
            chunk
        })
        .collect();
    let mut csv = String::from("q,Q,K\n");
    for row in rows {
        csv.push_str(&row);
    }
    write_output(&r.out, &csv)
}

fn cmd_correct(
    common: &CommonOpts,
    ic: &IcOpts,
    period: Option<f64>,
    target_eps: f64,
    max_iterations: usize,
) -> Result<(), CliError> {
    let r = resolve_common(common)?;
    let seed = parse_ic(ic)?;
    let period = match (period, ic.case) {
        (Some(p), _) => p,
        (None, Some(1)) => 6.27888,
        (None, Some(2)) => 6.27815,
        (None, Some(3)) => 232.5,
        (None, _) => return Err(CliError::Config("provide --period for a custom seed".into())),
    };
    let cfg = IntegratorConfig::with_tol(r.tol.min(1e-13));
    let corrector = CorrectorConfig { target_eps, max_iterations };
    let orbit = differential_correct(&seed, period, &corrector, &cfg, &r.params)?;
    let mut report = String::new();
    report.push_str("differential correction report\n");
    report.push_str(&format!(
        "seed:       x={} y={} X={} Y={} (T0={period})\n",
        seed.x, seed.y, seed.px, seed.py
    ));
    report.push_str(&format!(
        "corrected:  x={:.16} y={:.16} X={:.16} Y={:.16}\n",
        orbit.initial.x, orbit.initial.y, orbit.initial.px, orbit.initial.py
    ));
    report.push_str(&format!("period:     {:.13}\n", orbit.period));
    report.push_str(&format!("epsilon:    {:e}\n", orbit.epsilon));
    report.push_str(&format!("iterations: {}\n", orbit.iterations));
    report.push_str(&format!(
        "stability:  trace(M)-2 = {:+.7} ({})\n",
        orbit.stability_index,
        if orbit.is_unstable() { "unstable" } else { "stable" }
    ));
    report
        .push_str(&format!("energy:     {}\n", dynamics::hamiltonian(&orbit.initial, &r.params)?));
    write_output(&r.out, &report)
}

fn cmd_center_track(
    common: &CommonOpts,
    ic: &IcOpts,
    run: &RunOpts,
    t_end: f64,
    samples: usize,
) -> Result<(), CliError> {
    let r = resolve_common(common)?;
    let model = resolve_run(run, &r.file, r.tol)?;
    let state0 = parse_ic(ic)?;
    let ts = time_grid(state0.t, t_end, samples);
    let states = run_on_grid(&state0, &ts, &model, &r.params)?;
    let mut csv = String::from("t,x_C,y_C,q,Q\n");
    for s in &states {
        let red = to_reduced(s, &r.params);
        let frame = EllipseFrame::from_reduced(&red, &r.params);
        csv.push_str(&format!("{},{},{},{},{}\n", s.t, frame.x_c, frame.y_c, red.q, red.momentum));
    }
    write_output(&r.out, &csv)
}

fn run() -> Result<(), CliError> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Table1 { common } => cmd_table1(common),
        Command::Propagate { common, ic, run, t_end, samples } => {
            cmd_propagate(common, ic, run, *t_end, *samples)
        }
        Command::Compare {
            common,
            ic,
            mode_a,
            mode_b,
            corrections_a,
            corrections_b,
            prime_convert,
            t_end,
            samples,
            nodes,
        } => cmd_compare(
            common,
            ic,
            mode_a,
            mode_b,
            *corrections_a,
            *corrections_b,
            *prime_convert,
            *t_end,
            *samples,
            *nodes,
        ),
        Command::Contour { common, phi, q_range, momentum_range, resolution } => {
            cmd_contour(common, *phi, q_range, momentum_range, resolution)
        }
        Command::Correct { common, ic, period, target_eps, max_iterations } => {
            cmd_correct(common, ic, *period, *target_eps, *max_iterations)
        }
        Command::CenterTrack { common, ic, run, t_end, samples } => {
            cmd_center_track(common, ic, run, *t_end, *samples)
        }
    }
}

fn main() {
    match run() {
        Ok(()) => {}
        Err(CliError::Config(msg)) => {
            eprintln!("configuration error: {msg}");
            std::process::exit(EXIT_CONFIG);
        }
        Err(CliError::Numerical(msg)) => {
            eprintln!("numerical failure: {msg}");
            std::process::exit(EXIT_NUMERICAL);
        }
    }
}
