//! Propagation-model pipelines shared by the subcommands.

use hill_dro::corrections::{direct_correct, osculating_to_mean_cartesian};
use hill_dro::dynamics::{self, CartesianState, IntegratorConfig};
use hill_dro::ode::OdeOptions;
use hill_dro::reduce::{from_reduced, linear_solution, to_reduced};
use hill_dro::secular::{
    secular_propagate, solution6, AveragingMode, LindstedtSolution, SecularConfig, SecularState,
};
use hill_dro::ModelParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Truth,
    Linear,
    Low6,
    Lindstedt9,
    Secular(AveragingMode),
}

impl std::str::FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "truth" => ModelKind::Truth,
            "linear" => ModelKind::Linear,
            "low6" => ModelKind::Low6,
            "lindstedt9" => ModelKind::Lindstedt9,
            "secular:closed6" => ModelKind::Secular(AveragingMode::Closed6),
            "secular:series8" => ModelKind::Secular(AveragingMode::Series8),
            "secular:quadrature" => ModelKind::Secular(AveragingMode::QuadratureAugmented),
            other => {
                return Err(format!(
                    "unknown mode {other:?}; expected truth | linear | low6 | lindstedt9 | \
                     secular:closed6 | secular:series8 | secular:quadrature"
                ))
            }
        })
    }
}

impl ModelKind {
    pub fn is_analytic(&self) -> bool {
        !matches!(self, ModelKind::Truth | ModelKind::Linear)
    }
}

#[derive(Debug, Clone)]
pub struct ModelRun {
    pub kind: ModelKind,
    /// Short-period correction order applied to the averaged solutions.
    pub corrections: usize,
    /// Convert the initial osculating elements to mean elements through the
    /// inverse transformation before propagating the averaged flow.
    pub prime_convert: bool,
    pub nodes: usize,
    pub tol: f64,
}

pub enum CliError {
    Config(String),
    Numerical(String),
}

impl From<hill_dro::Error> for CliError {
    fn from(e: hill_dro::Error) -> Self {
        use hill_dro::Error as E;
        match e {
            E::InvalidParams { .. }
            | E::QuadratureNodes { .. }
            | E::SolutionCorrectionOrder { .. }
            | E::CorrectionOrder { .. }
            | E::SeriesOrder { .. } => CliError::Config(e.to_string()),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

fn mean_elements(
    ic: &CartesianState,
    run: &ModelRun,
    params: &ModelParams,
) -> Result<SecularState, CliError> {
    let order = if run.prime_convert {
        if run.corrections > 0 {
            run.corrections
        } else {
            9
        }
    } else {
        0
    };
    let reduced = osculating_to_mean_cartesian(ic, order, params)?;
    Ok(SecularState::from_reduced(&reduced)?)
}

fn mean_to_cartesian(
    mean: &SecularState,
    t: f64,
    corrections: usize,
    params: &ModelParams,
) -> Result<CartesianState, CliError> {
    let osc = if corrections > 0 {
        direct_correct(&mean.to_reduced(), corrections, params)?
    } else {
        mean.to_reduced()
    };
    Ok(from_reduced(&osc, t, params))
}

/// Evaluate the model on an ascending grid of times starting at the epoch of
/// `ic` (analytic models are anchored there).
pub fn run_on_grid(
    ic: &CartesianState,
    ts: &[f64],
    run: &ModelRun,
    params: &ModelParams,
) -> Result<Vec<CartesianState>, CliError> {
    match run.kind {
        ModelKind::Truth => {
            let cfg = IntegratorConfig { dense: true, ..IntegratorConfig::with_tol(run.tol) };
            let t_end = *ts.last().expect("non-empty grid");
            let sol = dynamics::flow(ic, t_end, &cfg, params)?;
            ts.iter()
                .map(|&t| {
                    let y = if sol.ts.len() == 1 { sol.ys[0] } else { sol.sample(t)? };
                    Ok(CartesianState::from_array(t, &y))
                })
                .collect()
        }
        ModelKind::Linear => {
            let reduced = to_reduced(ic, params);
            Ok(ts.iter().map(|&t| linear_solution(&reduced, t - ic.t, params)).collect())
        }
        ModelKind::Low6 => {
            let mean0 = mean_elements(ic, run, params)?;
            ts.iter()
                .map(|&t| {
                    let mean = solution6(&mean0, t - ic.t, params)?;
                    mean_to_cartesian(&mean, t, run.corrections, params)
                })
                .collect()
        }
        ModelKind::Lindstedt9 => {
            let mean0 = mean_elements(ic, run, params)?;
            let lin = LindstedtSolution::new(&mean0, params)?;
            let rel: Vec<f64> = ts.iter().map(|&t| t - ic.t).collect();
            let means = lin.sample(&rel)?;
            means
                .iter()
                .zip(ts.iter())
                .map(|(mean, &t)| mean_to_cartesian(mean, t, run.corrections, params))
                .collect()
        }
        ModelKind::Secular(mode) => {
            let mean0 = mean_elements(ic, run, params)?;
            let cfg = SecularConfig { mode, correction_order: run.corrections, nodes: run.nodes };
            cfg.validate()?;
            let opts = OdeOptions { rtol: run.tol, atol: run.tol, dense: true, ..Default::default() };
            let t_end = *ts.last().expect("non-empty grid");
            let traj = secular_propagate(&mean0, t_end - ic.t, &cfg, &opts, params)?;
            ts.iter()
                .map(|&t| {
                    let mean = traj.sample(t - ic.t)?;
                    mean_to_cartesian(&mean, t, run.corrections, params)
                })
                .collect()
        }
    }
}

/// Uniform grid of `n >= 2` points over [t0, t0 + span].
pub fn time_grid(t0: f64, span: f64, n: usize) -> Vec<f64> {
    let n = n.max(2);
    (0..n).map(|i| t0 + span * i as f64 / (n - 1) as f64).collect()
}
