use std::path::Path;
use std::process::ExitCode;

use serde::{Deserialize, Serialize};
use spectramoment::error::Error;
use spectramoment::estimator::{
    density_eval, prior_condition_probe, solve_estimation, Prior, PriorSpec, SolveOptions, SolveReport,
};
use spectramoment::filterbank::FilterBank;
use spectramoment::io::{self, matrix, JsonMatrix};
use spectramoment::linalg::CMat;
use spectramoment::moment_space::{FeasibilityReport, MomentSpace};
use spectramoment::numerics::{GridSpec, DEFAULT_RANK_TOL};
use spectramoment::simulate::{
    prepare_target, simulate_scenario, Scenario, ScenarioSpec, SimulationDiagnostics, TargetReport,
};
use spectramoment::spectral_factor::{factorization_residual, solve_dare};

use crate::output::{emit_json, spectrum_csv, to_json, write_text, SpectrumJson};
use crate::{Common, EstimateArgs, Format};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Unreadable, malformed or invalid input.
    #[error("{0}")]
    Input(String),
    /// The computation itself failed.
    #[error("{0}")]
    Domain(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            Self::Input(_) => ExitCode::from(2),
            Self::Domain(_) => ExitCode::from(1),
        }
    }
}

fn input(e: Error) -> CliError {
    CliError::Input(e.to_string())
}

fn domain(e: Error) -> CliError {
    CliError::Domain(e.to_string())
}

fn status(ok: bool) -> ExitCode {
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn load_fb(path: &Path) -> Result<FilterBank, CliError> {
    io::read_filter_bank(path).map_err(input)
}

fn setup(fb: &Path, common: &Common) -> Result<MomentSpace, CliError> {
    let fb = load_fb(fb)?;
    let grid = GridSpec::new(common.grid_n).map_err(input)?;
    MomentSpace::build(&fb, grid, DEFAULT_RANK_TOL).map_err(domain)
}

fn load_prior(path: &Path, ms: &MomentSpace) -> Result<Prior, CliError> {
    let spec: PriorSpec = io::read_json(path).map_err(input)?;
    let prior = Prior::from_spec(&spec, *ms.grid()).map_err(input)?;
    prior.check(ms).map_err(input)?;
    Ok(prior)
}

fn load_square(path: &Path, n: usize, what: &str) -> Result<CMat, CliError> {
    let m = io::read_matrix(path).map_err(input)?;
    if m.shape() != (n, n) {
        return Err(CliError::Input(format!("{what} is {:?}, expected ({n}, {n})", m.shape())));
    }
    Ok(m)
}

#[derive(Serialize, Deserialize)]
pub struct CheckOutput {
    pub n: usize,
    pub m: usize,
    #[serde(flatten)]
    pub report: FeasibilityReport,
}

pub fn check(fb: &Path, sigma: &Path, common: &Common) -> Result<ExitCode, CliError> {
    let ms = setup(fb, common)?;
    let (n, m) = (ms.filter_bank().n(), ms.filter_bank().m());
    let sigma = load_square(sigma, n, "Σ")?;
    let report = ms.feasibility_check(&sigma);
    let feasible = report.feasible;
    emit_json(common.out.as_deref(), &CheckOutput { n, m, report })?;
    Ok(status(feasible))
}

#[derive(Serialize, Deserialize)]
pub struct FactorizeOutput {
    #[serde(rename = "P", with = "matrix")]
    pub p: CMat,
    #[serde(rename = "L", with = "matrix")]
    pub l: CMat,
    #[serde(rename = "C", with = "matrix")]
    pub c: CMat,
    pub riccati_residual: f64,
    pub closed_loop_radius: f64,
    /// Largest grid deviation of `G*ΛG − (CG)*(CG)`.
    pub factorization_residual: f64,
}

pub fn factorize(fb: &Path, lambda: &Path, common: &Common) -> Result<ExitCode, CliError> {
    let ms = setup(fb, common)?;
    let lambda = load_square(lambda, ms.filter_bank().n(), "Λ")?;
    let membership = ms.membership_l_plus_fine(&lambda).map_err(domain)?;
    if !membership.member {
        return Err(domain(Error::NotInLPlus { margin: membership.margin }));
    }
    let sol = solve_dare(ms.filter_bank(), &lambda).map_err(domain)?;
    let out = FactorizeOutput {
        factorization_residual: factorization_residual(&ms, &lambda, &sol.c),
        p: sol.p,
        l: sol.l,
        c: sol.c,
        riccati_residual: sol.residual,
        closed_loop_radius: sol.closed_loop_radius,
    };
    emit_json(common.out.as_deref(), &out)?;
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize, Deserialize)]
pub struct SolveFailure {
    pub error: String,
    pub residual_history: Option<Vec<f64>>,
}

pub fn estimate(args: &EstimateArgs) -> Result<ExitCode, CliError> {
    let common = &args.common;
    if args.multistart > 1 && args.seed.is_none() {
        return Err(CliError::Input("--multistart above 1 needs an explicit --seed".into()));
    }
    let ms = setup(&args.fb, common)?;
    let prior = load_prior(&args.prior, &ms)?;
    let sigma = load_square(&args.sigma, ms.filter_bank().n(), "Σ")?;
    let defaults = SolveOptions::default();
    let opts = SolveOptions {
        tol_residual: args.tol.unwrap_or(defaults.tol_residual),
        max_iters: args.max_iters.unwrap_or(defaults.max_iters),
        multistart: args.multistart,
        seed: args.seed.unwrap_or(defaults.seed),
        ..defaults
    };
    opts.validate().map_err(input)?;

    let report: SolveReport = match solve_estimation(&ms, &prior, &sigma, &opts) {
        Ok(r) => r,
        Err(e @ (Error::InvalidOption(_) | Error::DimensionMismatch(_))) => return Err(input(e)),
        Err(e) => {
            let failure =
                SolveFailure { error: e.to_string(), residual_history: e.residual_history().map(<[f64]>::to_vec) };
            if common.format == Format::Json {
                emit_json(common.out.as_deref(), &failure)?;
            }
            eprintln!("error: {e}");
            return Ok(ExitCode::from(1));
        }
    };

    let lambda = ms.project_im_gamma(&report.lambda);
    let density = density_eval(&ms, &prior, &lambda).map_err(domain)?;
    let csv = spectrum_csv(&density);
    if let Some(path) = &args.spectrum {
        write_text(Some(path), &csv)?;
    }
    match common.format {
        Format::Json => emit_json(common.out.as_deref(), &report)?,
        Format::Csv => write_text(common.out.as_deref(), &csv)?,
    }
    Ok(status(report.converged))
}

#[derive(Serialize, Deserialize)]
pub struct SimulateOutput {
    #[serde(with = "matrix")]
    pub sigma_hat: CMat,
    /// Projection of `sigma_hat` onto the attainable covariances.
    #[serde(with = "matrix")]
    pub sigma: CMat,
    pub target: TargetReport,
    pub diagnostics: SimulationDiagnostics,
}

pub fn simulate(
    path: &Path,
    seed: Option<u64>,
    sigma_out: Option<&Path>,
    common: &Common,
) -> Result<ExitCode, CliError> {
    let spec: ScenarioSpec = io::read_json(path).map_err(input)?;
    let mut scenario = Scenario::from_spec(spec).map_err(input)?;
    if let Some(s) = seed {
        scenario.seed = s;
    }
    let grid = GridSpec::new(common.grid_n).map_err(input)?;
    let ms = MomentSpace::build(&scenario.fb, grid, DEFAULT_RANK_TOL).map_err(domain)?;
    let (sigma_hat, diagnostics) = simulate_scenario(&scenario).map_err(|e| match e {
        Error::InvalidInput(_) | Error::DimensionMismatch(_) => input(e),
        other => domain(other),
    })?;
    let (sigma, target) = prepare_target(&ms, &sigma_hat);
    if let Some(p) = sigma_out {
        write_text(Some(p), &to_json(&JsonMatrix(sigma.clone())))?;
    }
    let infeasible = target.infeasible;
    emit_json(common.out.as_deref(), &SimulateOutput { sigma_hat, sigma, target, diagnostics })?;
    Ok(status(!infeasible))
}

#[derive(Deserialize)]
struct WitnessFile {
    #[serde(rename = "C", with = "matrix")]
    c: CMat,
    #[serde(rename = "V", with = "matrix")]
    v: CMat,
}

#[derive(Serialize, Deserialize)]
pub struct ProbeOutput {
    pub holds: bool,
    pub tolerance: f64,
    #[serde(flatten)]
    pub report: spectramoment::estimator::ProbeReport,
}

pub fn probe(
    fb: &Path,
    prior: &Path,
    trials: usize,
    seed: u64,
    witness: Option<&Path>,
    tol: f64,
    common: &Common,
) -> Result<ExitCode, CliError> {
    let ms = setup(fb, common)?;
    let prior = load_prior(prior, &ms)?;
    let extra = match witness {
        Some(p) => {
            let w: WitnessFile = io::read_json(p).map_err(input)?;
            vec![(w.c, w.v)]
        }
        None => Vec::new(),
    };
    let report = prior_condition_probe(&ms, &prior, trials, seed, &extra).map_err(|e| match e {
        Error::DimensionMismatch(_) | Error::NotInCPlus(_) | Error::InvalidOption(_) => input(e),
        other => domain(other),
    })?;
    let holds = report.holds(tol);
    emit_json(common.out.as_deref(), &ProbeOutput { holds, tolerance: tol, report })?;
    Ok(status(holds))
}

pub fn spectrum(fb: &Path, prior: &Path, lambda: &Path, common: &Common) -> Result<ExitCode, CliError> {
    let ms = setup(fb, common)?;
    let prior = load_prior(prior, &ms)?;
    let lambda = load_square(lambda, ms.filter_bank().n(), "Λ")?;
    let point = ms.project_im_gamma(&lambda);
    let density = density_eval(&ms, &prior, &point).map_err(domain)?;
    match common.format {
        Format::Json => emit_json(common.out.as_deref(), &SpectrumJson::from(&density))?,
        Format::Csv => write_text(common.out.as_deref(), &spectrum_csv(&density))?,
    }
    Ok(ExitCode::SUCCESS)
}
