use nalgebra::DVector;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::maps::Workspace;
use super::prior::{Prior, PriorKind};
use crate::error::{Error, Result};
use crate::io::{matrix, matrix_opt};
use crate::linalg::{self, cholesky_lower, fro, hermitize, CMat, RMat};
use crate::moment_space::{FactorPoint, MomentSpace};
use crate::numerics::mean;
use crate::spectral_factor::{h_inverse, h_map};

/// Multistart dispersion above which a matrix-prior solve is flagged.
pub const NON_UNIQUENESS_THRESHOLD: f64 = 1e-4;
/// `Σ` is refused when `λ_min(Σ) < SIGMA_CONDITION_FLOOR · ‖Σ‖_F`.
pub const SIGMA_CONDITION_FLOOR: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveOptions {
    pub tol_residual: f64,
    pub max_iters: usize,
    pub backtrack_factor: f64,
    pub min_step: f64,
    pub feasibility_guard: f64,
    pub multistart: usize,
    pub seed: u64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol_residual: 1e-9,
            max_iters: 100,
            backtrack_factor: 0.5,
            min_step: 1e-14,
            feasibility_guard: 1e-10,
            multistart: 1,
            seed: 0,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidOption(what.to_string()));
        if !(self.tol_residual > 0.0) {
            return bad("tol_residual must be positive");
        }
        if self.max_iters == 0 {
            return bad("max_iters must be positive");
        }
        if !(self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0) {
            return bad("backtrack_factor must lie in (0, 1)");
        }
        if !(self.min_step > 0.0) || !(self.feasibility_guard > 0.0) {
            return bad("min_step and feasibility_guard must be positive");
        }
        if self.multistart == 0 {
            return bad("multistart must be at least 1");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub kind: PriorKind,
    pub grid_n: usize,
    #[serde(with = "matrix")]
    pub lambda: CMat,
    pub lambda_coords: Vec<f64>,
    /// `Ĉ`, present for matrix priors.
    #[serde(with = "matrix_opt")]
    pub factor: Option<CMat>,
    pub factor_coords: Option<Vec<f64>>,
    /// `‖moment(solution) − Π_{im Γ}(Σ)‖_F` on the working grid.
    pub residual: f64,
    pub residual_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Residual recomputed on the grid with twice the points, when the prior
    /// can be resampled there.
    pub verified_residual: Option<f64>,
    /// Smallest `σ_min(J)/σ_max(J)` seen along the Newton path.
    pub min_jacobian_conditioning: f64,
    /// Converged solutions of every start, in the solver's coordinates
    /// (`x` for scalar priors, `y` for matrix priors), sorted.
    pub multistart_solutions: Vec<Vec<f64>>,
    pub multistart_failures: usize,
    pub max_pairwise_distance: f64,
    pub possible_non_uniqueness: bool,
}

struct Run {
    coords: DVector<f64>,
    history: Vec<f64>,
    conditioning: f64,
}

/// Newton iteration on `F(u) = value(u) − target` with simple-decrease
/// backtracking; `eval` fails outside the admissible set.
fn newton<S>(
    start: DVector<f64>,
    target: &DVector<f64>,
    tol: f64,
    opts: &SolveOptions,
    eval: impl Fn(&DVector<f64>) -> Result<S>,
    value: impl Fn(&S) -> &DVector<f64>,
    jacobian: impl Fn(&S) -> RMat,
) -> Result<Run> {
    let mut u = start;
    let mut state = eval(&u)?;
    let mut f = value(&state) - target;
    let mut history = vec![f.norm()];
    let mut conditioning = f64::INFINITY;
    for _ in 0..opts.max_iters {
        if f.norm() <= tol {
            return Ok(Run { coords: u, history, conditioning });
        }
        let jac = jacobian(&state);
        let sv = jac.clone().svd(false, false).singular_values;
        let smax = sv.max();
        conditioning = conditioning.min(if smax > 0.0 { sv.min() / smax } else { 0.0 });
        let step = jac.lu().solve(&(-&f)).ok_or(Error::Singular("moment-map Jacobian"))?;
        let mut t = 1.0;
        loop {
            let candidate = &u + &step * t;
            if let Ok(next) = eval(&candidate) {
                let fnext = value(&next) - target;
                if fnext.norm() < f.norm() {
                    (u, state, f) = (candidate, next, fnext);
                    break;
                }
            }
            t *= opts.backtrack_factor;
            if t < opts.min_step {
                return Err(Error::LineSearchCollapse { history });
            }
        }
        history.push(f.norm());
    }
    if f.norm() <= tol {
        Ok(Run { coords: u, history, conditioning })
    } else {
        Err(Error::MaxItersExceeded { history })
    }
}

fn pairwise_max(points: &[Vec<f64>]) -> f64 {
    let mut best: f64 = 0.0;
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            let d = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
            best = best.max(d);
        }
    }
    best
}

/// Solves `∫ G Φ G* = Σ` within the density family selected by the prior.
///
/// Scalar priors are solved for `Λ` in `im Γ` coordinates, matrix priors for
/// `C` in `𝔠` coordinates with `Λ̂ = h⁻¹(Ĉ)`.
pub fn solve_estimation(ms: &MomentSpace, prior: &Prior, sigma: &CMat, opts: &SolveOptions) -> Result<SolveReport> {
    opts.validate()?;
    let n = ms.filter_bank().n();
    if sigma.shape() != (n, n) {
        return Err(Error::DimensionMismatch(format!("Σ is {:?}, expected ({n}, {n})", sigma.shape())));
    }
    let sigma = hermitize(sigma);
    let report = ms.feasibility_check(&sigma);
    if !report.feasible {
        return Err(Error::InfeasibleSigma(format!(
            "smallest eigenvalue {:.3e}, relative distance to im Γ {:.3e}",
            report.min_eigenvalue, report.relative_distance
        )));
    }
    if report.min_eigenvalue < SIGMA_CONDITION_FLOOR * fro(&sigma) {
        return Err(Error::InfeasibleSigma(format!(
            "smallest eigenvalue {:.3e} is below {SIGMA_CONDITION_FLOOR:e}·‖Σ‖",
            report.min_eigenvalue
        )));
    }
    let target = ms.project_im_gamma(&sigma);
    let sigma_coords = target.coords().clone();
    let tol = opts.tol_residual * (1.0 + fro(&sigma));
    let ws = Workspace::new(ms, prior)?;
    // trace(X) = ⟨Π(I), X⟩ for X in im Γ.
    let trace_coords = ms.lambda_coords(&linalg::identity(n));
    let sigma_trace = trace_coords.dot(&sigma_coords);

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut seeds = vec![linalg::identity(n)];
    for _ in 1..opts.multistart {
        seeds.push(linalg::random_hpd(&mut rng, n, 0.1));
    }

    let runs: Vec<Result<Run>> = match prior.kind() {
        PriorKind::Scalar => seeds
            .iter()
            .map(|s| {
                let x0 = ms.project_im_gamma(s).coords().clone();
                let t = trace_coords.dot(&ws.scalar_eval(&x0)?.value) / sigma_trace;
                let guard = |x: &DVector<f64>| {
                    let state = ws.scalar_eval(x)?;
                    let floor = opts.feasibility_guard * x.norm();
                    if state.margin < floor {
                        return Err(Error::NotInLPlus { margin: state.margin });
                    }
                    Ok(state)
                };
                newton(x0 * t, &sigma_coords, tol, opts, guard, |s| &s.value, |s| ws.scalar_jacobian(s))
            })
            .collect(),
        PriorKind::Matrix => seeds
            .iter()
            .map(|s| {
                let y0 = h_map(ms, &ms.project_im_gamma(s))?.coords().clone();
                let t = (trace_coords.dot(&ws.factor_eval(&y0, 0.0)?.value) / sigma_trace).sqrt();
                let guard = |y: &DVector<f64>| ws.factor_eval(y, opts.feasibility_guard);
                newton(y0 * t, &sigma_coords, tol, opts, guard, |s| &s.value, |s| ws.factor_jacobian(s))
            })
            .collect(),
    };

    let mut runs = runs.into_iter();
    let primary = runs.next().expect("at least one start")?;
    let mut solutions = vec![primary.coords.iter().copied().collect::<Vec<f64>>()];
    let mut failures = 0;
    for run in runs {
        match run {
            Ok(r) => solutions.push(r.coords.iter().copied().collect()),
            Err(_) => failures += 1,
        }
    }
    solutions.sort_by(|a, b| {
        a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal)
    });
    let max_pairwise_distance = pairwise_max(&solutions);

    let (lambda, factor) = match prior.kind() {
        PriorKind::Scalar => (ms.lambda_from_coords(&primary.coords), None),
        PriorKind::Matrix => {
            let cp = ms.c_from_coords(&primary.coords);
            (h_inverse(ms, &cp)?, Some(cp))
        }
    };
    let verified_residual = verify_on_fine_grid(ms, prior, lambda.matrix(), factor.as_ref(), target.matrix());
    let residual = *primary.history.last().expect("history is nonempty");
    Ok(SolveReport {
        kind: prior.kind(),
        grid_n: ms.grid().len(),
        lambda: lambda.matrix().clone(),
        lambda_coords: lambda.coords().iter().copied().collect(),
        factor_coords: factor.as_ref().map(|f| f.coords().iter().copied().collect()),
        factor: factor.map(|f| f.matrix().clone()),
        residual,
        iterations: primary.history.len() - 1,
        residual_history: primary.history,
        converged: residual <= tol,
        verified_residual,
        min_jacobian_conditioning: primary.conditioning,
        possible_non_uniqueness: max_pairwise_distance > NON_UNIQUENESS_THRESHOLD,
        multistart_solutions: solutions,
        multistart_failures: failures,
        max_pairwise_distance,
    })
}

fn verify_on_fine_grid(
    ms: &MomentSpace,
    prior: &Prior,
    lambda: &CMat,
    factor: Option<&FactorPoint>,
    target: &CMat,
) -> Option<f64> {
    let fine_grid = ms.grid().doubled()?;
    let fine_prior = prior.resample(fine_grid)?;
    let g = ms.filter_bank().samples(&fine_grid).ok()?;
    let m = ms.filter_bank().m();
    let terms: Option<Vec<CMat>> = g
        .iter()
        .enumerate()
        .map(|(k, gk)| {
            let phi = match factor {
                None => {
                    let s = hermitize(&(gk.adjoint() * lambda * gk));
                    s.try_inverse()? * Complex64::new(fine_prior.scalar_value(k), 0.0)
                }
                Some(cp) => {
                    let wi = (cp.matrix() * gk).try_inverse()?;
                    &wi * fine_prior.value(k, m) * wi.adjoint()
                }
            };
            Some(gk * phi * gk.adjoint())
        })
        .collect();
    let moment = mean(&terms?).ok()?;
    Some(fro(&(hermitize(&moment) - target)))
}

/// `C = L_R L_Σ⁻¹` with `R = ∫ Ψ` and `L` the lower Cholesky factor, the
/// closed-form solution on the static bank.
pub fn static_closed_form(ms: &MomentSpace, prior: &Prior, sigma: &CMat) -> Result<FactorPoint> {
    let fb = ms.filter_bank();
    if !fb.is_static() {
        return Err(Error::Unsupported("closed form requires the static bank A = 0, B = I".into()));
    }
    prior.check(ms)?;
    let m = fb.m();
    if sigma.shape() != (m, m) {
        return Err(Error::DimensionMismatch(format!("Σ is {:?}, expected ({m}, {m})", sigma.shape())));
    }
    let sigma = hermitize(sigma);
    if !(linalg::min_hermitian_eigenvalue(&sigma) > 0.0) {
        return Err(Error::InfeasibleSigma("Σ is not positive definite".into()));
    }
    let l_r = cholesky_lower(&prior.mean(m))?;
    let l_sigma = cholesky_lower(&sigma)?;
    let c = linalg::lu_solve_right(&l_sigma, &l_r, "L_Σ")?;
    ms.factor_point(&c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::maps::tau_eval;
    use crate::filterbank::FilterBank;
    use crate::linalg::{diag_real, from_real_rows, identity};
    use crate::numerics::GridSpec;

    fn static_space() -> MomentSpace {
        MomentSpace::build(&FilterBank::static_bank(2).unwrap(), GridSpec::new(64).unwrap(), 1e-9).unwrap()
    }

    #[test]
    fn shift_bank_white_target() {
        let fb =
            FilterBank::new(from_real_rows(&[&[0.0, 0.0], &[1.0, 0.0]]), from_real_rows(&[&[1.0], &[0.0]])).unwrap();
        let ms = MomentSpace::build(&fb, GridSpec::new(256).unwrap(), 1e-9).unwrap();
        let prior = Prior::constant_scalar(*ms.grid(), 1.0).unwrap();
        let opts = SolveOptions { multistart: 4, seed: 3, ..Default::default() };
        let rep = solve_estimation(&ms, &prior, &identity(2), &opts).unwrap();
        assert!(rep.converged);
        let expected = ms.project_im_gamma(&diag_real(&[0.5, 0.5]));
        let err = DVector::from_vec(rep.lambda_coords.clone()) - expected.coords();
        assert!(err.norm() < 1e-8);
        assert!(rep.max_pairwise_distance < 1e-6);
        assert_eq!(rep.multistart_solutions.len(), 4);
        assert!(rep.verified_residual.unwrap() < 1e-8);
    }

    #[test]
    fn scalar_bank_inverse() {
        let fb = FilterBank::new(from_real_rows(&[&[0.0]]), from_real_rows(&[&[1.0]])).unwrap();
        let ms = MomentSpace::build(&fb, GridSpec::new(64).unwrap(), 1e-9).unwrap();
        let prior = Prior::constant_scalar(*ms.grid(), 1.0).unwrap();
        let rep = solve_estimation(&ms, &prior, &diag_real(&[2.0]), &SolveOptions::default()).unwrap();
        assert!((rep.lambda[(0, 0)].re - 0.5).abs() < 1e-10);
    }

    #[test]
    fn static_matrix_prior_matches_closed_form() {
        let ms = static_space();
        let prior = Prior::constant_matrix(*ms.grid(), diag_real(&[1.0, 2.0])).unwrap();
        let rep = solve_estimation(&ms, &prior, &identity(2), &SolveOptions::default()).unwrap();
        let c_hat = rep.factor.unwrap();
        assert!(fro(&(&c_hat - diag_real(&[1.0, 2f64.sqrt()]))) < 1e-8, "{c_hat}");
        assert!(fro(&(&rep.lambda - diag_real(&[1.0, 2.0]))) < 1e-8);
        let closed = static_closed_form(&ms, &prior, &identity(2)).unwrap();
        assert!(fro(&(closed.matrix() - &c_hat)) < 1e-8);
    }

    #[test]
    fn closed_form_examples() {
        let ms = static_space();
        let psi = Prior::constant_matrix(*ms.grid(), diag_real(&[1.0, 2.0])).unwrap();
        let c = static_closed_form(&ms, &psi, &identity(2)).unwrap();
        assert!(fro(&(c.matrix() - diag_real(&[1.0, 2f64.sqrt()]))) < 1e-15);
        assert!(fro(&(tau_eval(&ms, &psi, &c).unwrap() - identity(2))) < 1e-10);

        let unit = Prior::constant_matrix(*ms.grid(), identity(2)).unwrap();
        let c = static_closed_form(&ms, &unit, &identity(2)).unwrap();
        assert!(fro(&(c.matrix() - identity(2))) < 1e-15);
        let sigma = diag_real(&[4.0, 1.0]);
        let c = static_closed_form(&ms, &unit, &sigma).unwrap();
        assert!(fro(&(c.matrix() - diag_real(&[0.5, 1.0]))) < 1e-15);
        assert!(fro(&(tau_eval(&ms, &unit, &c).unwrap() - sigma)) < 1e-10);

        let fb = FilterBank::new(from_real_rows(&[&[0.5]]), from_real_rows(&[&[1.0]])).unwrap();
        let other = MomentSpace::build(&fb, GridSpec::new(64).unwrap(), 1e-9).unwrap();
        let p = Prior::constant_matrix(*other.grid(), identity(1)).unwrap();
        assert!(matches!(static_closed_form(&other, &p, &identity(1)), Err(Error::Unsupported(_))));
    }

    #[test]
    fn refuses_bad_targets_and_options() {
        let ms = static_space();
        let prior = Prior::constant_scalar(*ms.grid(), 1.0).unwrap();
        let opts = SolveOptions::default();
        assert!(matches!(solve_estimation(&ms, &prior, &-identity(2), &opts), Err(Error::InfeasibleSigma(_))));
        assert!(matches!(
            solve_estimation(&ms, &prior, &diag_real(&[1.0, 1e-12]), &opts),
            Err(Error::InfeasibleSigma(_))
        ));
        let bad = SolveOptions { backtrack_factor: 1.0, ..Default::default() };
        assert!(matches!(solve_estimation(&ms, &prior, &identity(2), &bad), Err(Error::InvalidOption(_))));
    }

    #[test]
    fn iteration_cap_carries_history() {
        let ms = static_space();
        let prior = Prior::constant_scalar(*ms.grid(), 1.0).unwrap();
        let opts = SolveOptions { max_iters: 1, tol_residual: 1e-300, ..Default::default() };
        let err = solve_estimation(&ms, &prior, &diag_real(&[1.0, 5.0]), &opts).unwrap_err();
        assert!(matches!(err, Error::MaxItersExceeded { .. } | Error::LineSearchCollapse { .. }));
        assert!(!err.residual_history().unwrap().is_empty());
    }
}
