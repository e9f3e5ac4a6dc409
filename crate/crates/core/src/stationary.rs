//! Newton-based solvers for stationary states: the limit model
//! `beta u'''' - (tau + a ||u'||^2) u'' + lambda/(1+u)^2 = 0` with clamped
//! boundary conditions, its constrained variant with prescribed
//! `int dx/(1+u) = rho`, the eps-coupled problem with the electrostatic force
//! from the transformed potential solve, and pull-in threshold localization.

use crate::beam::{
    apply_beam_operator, assemble_beam_matrix, mechanical_energy, DeflectionProfile, ModelParams,
};
use crate::error::{Error, Result};
use crate::grid::{integrate_1d, GridFunction1D, IntervalGrid, RectGrid};
use crate::linalg::{BandLu, BandMatrix};
use crate::poisson::{compute_coefficients, compute_g_eps, solve_phi};
use std::sync::Arc;

const MACHINE_EPS: f64 = f64::EPSILON;

#[derive(Debug, Clone, Copy)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            tol: 1e-10,
            max_iters: 60,
        }
    }
}

/// A converged stationary state.
#[derive(Debug, Clone)]
pub struct StationarySolution {
    pub u: DeflectionProfile,
    pub lambda: f64,
    pub eps: f64,
    pub rho: Option<f64>,
    pub newton_iters: usize,
    pub residual_norm: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct BranchSample {
    pub lambda: f64,
    pub min_u: f64,
    pub mech_energy: f64,
}

/// Result of the pull-in search: solutions exist at
/// `lambda_star - bracket_width`, continuation fails at
/// `lambda_star + bracket_width`.
#[derive(Debug, Clone)]
pub struct PullInReport {
    pub eps: f64,
    pub lambda_star: f64,
    pub bracket_width: f64,
    pub branch: Vec<BranchSample>,
}

/// Absolute rounding floor of the discrete beam residual. Fourth differences
/// of an O(|u|) vector cannot be evaluated below ~ |u| eps / h^4 in f64, so
/// residual tolerances are capped from below by this estimate.
fn residual_floor(params: &ModelParams, lambda: f64, u: &DeflectionProfile) -> f64 {
    let h = u.grid().h();
    let umax = u.u().linf();
    let tension = params.tau + params.a * u.grad_norm_sq();
    let gmax = lambda / ((1.0 + u.min_u()) * (1.0 + u.min_u()));
    32.0 * MACHINE_EPS * (params.beta * umax / h.powi(4) + tension * umax / (h * h) + gmax)
}

/// Discrete L2 norm (interior nodes, weight h) of the limit-model residual.
fn limit_residual(u: &DeflectionProfile, params: &ModelParams, lambda: f64) -> (Vec<f64>, f64) {
    let beam = apply_beam_operator(u, params);
    let n = u.grid().n_cells();
    let h = u.grid().h();
    let mut res = Vec::with_capacity(n - 1);
    let mut sq = 0.0;
    for i in 1..n {
        let ui = u.u().values()[i];
        let f = beam.values()[i] + lambda / ((1.0 + ui) * (1.0 + ui));
        res.push(f);
        sq += f * f;
    }
    (res, (h * sq).sqrt())
}

/// Solve `J x = b` where `J = Band + p c^T` and the rank-one part comes from
/// the self-stretching derivative. `dot_c` applies the functional `c^T x`.
fn solve_with_rank_one(
    lu: &BandLu,
    p: Option<&[f64]>,
    dot_c: impl Fn(&[f64]) -> f64,
    b: &[f64],
) -> Vec<f64> {
    let x0 = lu.solve(b);
    match p {
        None => x0,
        Some(p) => {
            let ainv_p = lu.solve(p);
            let denom = 1.0 + dot_c(&ainv_p);
            let factor = dot_c(&x0) / denom;
            x0.iter()
                .zip(&ainv_p)
                .map(|(x, ap)| x - factor * ap)
                .collect()
        }
    }
}

struct LimitJacobian {
    lu: BandLu,
    /// rank-one column `-2a <u', .'> u''` (present when a > 0)
    p: Option<Vec<f64>>,
    du: GridFunction1D,
}

impl LimitJacobian {
    /// Jacobian of the limit-model residual at `u`:
    /// `beta D4 - (tau + a||u'||^2) D2 + diag(-2 lambda/(1+u)^3)` plus the
    /// rank-one `-2a <u', w'> u''` handled by Sherman-Morrison.
    fn assemble(u: &DeflectionProfile, params: &ModelParams, lambda: f64) -> Result<Self> {
        let grid = u.grid();
        let tension = params.tau + params.a * u.grad_norm_sq();
        let frozen = ModelParams {
            tau: tension,
            a: 0.0,
            ..*params
        };
        let beam = assemble_beam_matrix(&frozen, grid);
        let mut band: BandMatrix = beam.band().clone();
        for (row, i) in (1..grid.n_cells()).enumerate() {
            let ui = u.u().values()[i];
            band.add(row, row, -2.0 * lambda / (1.0 + ui).powi(3));
        }
        let lu = band.factor()?;
        let p = if params.a > 0.0 {
            Some(
                (1..grid.n_cells())
                    .map(|i| -2.0 * params.a * u.d2u().values()[i])
                    .collect(),
            )
        } else {
            None
        };
        Ok(LimitJacobian {
            lu,
            p,
            du: u.du().clone(),
        })
    }

    fn solve(&self, grid: &Arc<IntervalGrid>, b: &[f64]) -> Vec<f64> {
        let dot_c = |x: &[f64]| {
            // <u', x'> with x extended by its zero boundary values
            let full = DeflectionProfile::from_interior(grid.clone(), x);
            match full {
                Ok(xf) => {
                    let prod: Vec<f64> = self
                        .du
                        .values()
                        .iter()
                        .zip(xf.du().values())
                        .map(|(a, b)| a * b)
                        .collect();
                    integrate_1d(&GridFunction1D::new(grid.clone(), prod).expect("finite"))
                }
                Err(_) => 0.0,
            }
        };
        solve_with_rank_one(&self.lu, self.p.as_deref(), dot_c, b)
    }
}

fn damped_newton_limit(
    lambda: f64,
    params: &ModelParams,
    grid: &Arc<IntervalGrid>,
    init: Option<&DeflectionProfile>,
    opts: &NewtonOptions,
) -> Result<StationarySolution> {
    if lambda < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "lambda must be >= 0, got {lambda}"
        )));
    }
    let mut u = match init {
        Some(p) => {
            if p.min_u() <= -1.0 {
                return Err(Error::Precondition("initial profile touches down".into()));
            }
            p.clone()
        }
        None => DeflectionProfile::zero(grid.clone()),
    };
    let (_, mut res) = limit_residual(&u, params, lambda);
    let mut iters = 0;
    loop {
        let tol_eff = opts.tol.max(residual_floor(params, lambda, &u));
        if res <= tol_eff {
            return Ok(StationarySolution {
                u,
                lambda,
                eps: 0.0,
                rho: None,
                newton_iters: iters,
                residual_norm: res,
            });
        }
        if iters >= opts.max_iters {
            return Err(Error::NoConvergence {
                what: format!("limit-model Newton at lambda = {lambda}"),
                iters,
                residual: res,
                last: u.u().values().to_vec(),
            });
        }
        let (f, _) = limit_residual(&u, params, lambda);
        let jac = LimitJacobian::assemble(&u, params, lambda)?;
        let neg_f: Vec<f64> = f.iter().map(|x| -x).collect();
        let step = jac.solve(grid, &neg_f);

        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let trial: Vec<f64> = u
                .interior()
                .iter()
                .zip(&step)
                .map(|(ui, s)| ui + t * s)
                .collect();
            if trial.iter().all(|&x| x > -1.0) {
                if let Ok(u_try) = DeflectionProfile::from_interior(grid.clone(), &trial) {
                    let (_, r_try) = limit_residual(&u_try, params, lambda);
                    if r_try < res || r_try <= tol_eff {
                        accepted = Some((u_try, r_try));
                        break;
                    }
                }
            }
            t *= 0.5;
        }
        match accepted {
            Some((u_new, r_new)) => {
                u = u_new;
                res = r_new;
                iters += 1;
            }
            None => {
                return Err(Error::NoConvergence {
                    what: format!("limit-model Newton at lambda = {lambda} (damping stalled)"),
                    iters,
                    residual: res,
                    last: u.u().values().to_vec(),
                });
            }
        }
    }
}

/// Newton solve of the stationary limit model at the given voltage
/// parameter. The explicit `lambda` argument is authoritative;
/// `params.lambda` is not read.
pub fn solve_limit_stationary(
    lambda: f64,
    params: &ModelParams,
    grid: &Arc<IntervalGrid>,
    init: Option<&DeflectionProfile>,
) -> Result<StationarySolution> {
    damped_newton_limit(lambda, params, grid, init, &NewtonOptions::default())
}

/// Same solve with explicit Newton options (pull-in uses a looser tolerance).
pub fn solve_limit_stationary_with(
    lambda: f64,
    params: &ModelParams,
    grid: &Arc<IntervalGrid>,
    init: Option<&DeflectionProfile>,
    opts: &NewtonOptions,
) -> Result<StationarySolution> {
    damped_newton_limit(lambda, params, grid, init, opts)
}

/// Augmented Newton on `(u, lambda)` for the constrained stationary problem:
/// beam residual plus the scalar constraint `int dx/(1+u) = rho`. The
/// bordered system is solved with two banded solves per iteration.
pub fn solve_limit_constrained(
    rho: f64,
    params: &ModelParams,
    grid: &Arc<IntervalGrid>,
) -> Result<StationarySolution> {
    if rho <= 2.0 {
        return Err(Error::InvalidParameter(format!(
            "rho must exceed 2 (rho = 2 is the flat state u = 0 with lambda = 0), got {rho}"
        )));
    }
    let n = grid.n_cells();
    let h = grid.h();
    let shape = GridFunction1D::from_fn(grid.clone(), |x| (1.0 - x * x).powi(2));

    // initial theta from the one-parameter family -theta (1-x^2)^2
    let con_of = |theta: f64| -> f64 {
        let vals: Vec<f64> = shape
            .values()
            .iter()
            .map(|&s| 1.0 / (1.0 - theta * s))
            .collect();
        integrate_1d(&GridFunction1D::new(grid.clone(), vals).expect("finite"))
    };
    let (mut lo, mut hi) = (0.0, 0.999);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if con_of(mid) < rho {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let theta = 0.5 * (lo + hi);
    let mut u = DeflectionProfile::clamped_from_fn(grid.clone(), |x| {
        -theta * (1.0 - x * x).powi(2)
    })?;
    let mut lambda = 24.0 * params.beta * theta;

    let constraint = |u: &DeflectionProfile| -> f64 {
        let vals: Vec<f64> = u.u().values().iter().map(|&x| 1.0 / (1.0 + x)).collect();
        integrate_1d(&GridFunction1D::new(grid.clone(), vals).expect("finite")) - rho
    };

    let merit = |u: &DeflectionProfile, lambda: f64| -> (f64, f64) {
        let (_, r) = limit_residual(u, params, lambda);
        (r, constraint(u).abs())
    };

    let (mut res, mut cres) = merit(&u, lambda);
    let opts = NewtonOptions::default();
    for iters in 0..opts.max_iters {
        let tol_eff = opts.tol.max(residual_floor(params, lambda, &u));
        if res <= tol_eff && cres <= 1e-8 {
            return Ok(StationarySolution {
                u,
                lambda,
                eps: 0.0,
                rho: Some(rho),
                newton_iters: iters,
                residual_norm: res,
            });
        }
        let (f, _) = limit_residual(&u, params, lambda);
        let jac = LimitJacobian::assemble(&u, params, lambda)?;
        let neg_f: Vec<f64> = f.iter().map(|x| -x).collect();
        let dfdl: Vec<f64> = (1..n)
            .map(|i| {
                let ui = u.u().values()[i];
                -1.0 / ((1.0 + ui) * (1.0 + ui))
            })
            .collect();
        let x1 = jac.solve(grid, &neg_f); // J x1 = -F
        let x2 = jac.solve(grid, &dfdl); // J x2 = -dF/dlambda
        // constraint gradient on interior nodes: d/du_i int dx/(1+u) = -h/(1+u_i)^2
        let grad_c: Vec<f64> = (1..n)
            .map(|i| {
                let ui = u.u().values()[i];
                -h / ((1.0 + ui) * (1.0 + ui))
            })
            .collect();
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let c0 = constraint(&u);
        let denom = dot(&grad_c, &x2);
        if denom.abs() < 1e-300 {
            return Err(Error::NoConvergence {
                what: format!("constrained Newton at rho = {rho} (singular border)"),
                iters,
                residual: res,
                last: u.u().values().to_vec(),
            });
        }
        let dl = -(c0 + dot(&grad_c, &x1)) / denom;
        let du: Vec<f64> = x1.iter().zip(&x2).map(|(a, b)| a + dl * b).collect();

        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let trial: Vec<f64> = u
                .interior()
                .iter()
                .zip(&du)
                .map(|(ui, s)| ui + t * s)
                .collect();
            let lam_try = lambda + t * dl;
            if trial.iter().all(|&x| x > -1.0) && lam_try >= 0.0 {
                if let Ok(u_try) = DeflectionProfile::from_interior(grid.clone(), &trial) {
                    let (r_try, c_try) = merit(&u_try, lam_try);
                    if r_try + c_try < res + cres || (r_try <= tol_eff && c_try <= 1e-8) {
                        accepted = Some((u_try, lam_try, r_try, c_try));
                        break;
                    }
                }
            }
            t *= 0.5;
        }
        match accepted {
            Some((u_new, l_new, r_new, c_new)) => {
                u = u_new;
                lambda = l_new;
                res = r_new;
                cres = c_new;
            }
            None => {
                return Err(Error::NoConvergence {
                    what: format!("constrained Newton at rho = {rho} (damping stalled)"),
                    iters,
                    residual: res + cres,
                    last: u.u().values().to_vec(),
                });
            }
        }
    }
    Err(Error::NoConvergence {
        what: format!("constrained Newton at rho = {rho}"),
        iters: opts.max_iters,
        residual: res + cres,
        last: u.u().values().to_vec(),
    })
}

/// Picard iteration for the eps-coupled stationary problem: the electrostatic
/// force `g_eps` is refreshed from a transformed potential solve at the
/// current iterate, then the beam problem is solved with the force lagged.
pub fn solve_coupled_stationary(
    lambda: f64,
    eps: f64,
    params: &ModelParams,
    rect: &Arc<RectGrid>,
    init: Option<&DeflectionProfile>,
) -> Result<StationarySolution> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "coupled solve needs eps in (0,1), got {eps}"
        )));
    }
    if lambda < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "lambda must be >= 0, got {lambda}"
        )));
    }
    let grid = rect.grid_x().clone();
    let mut u = match init {
        Some(p) => p.clone(),
        None => DeflectionProfile::zero(grid.clone()),
    };
    let n = grid.n_cells();
    let max_outer = 200;
    let mut iters = 0;
    loop {
        let coef = compute_coefficients(&u, eps, rect)?;
        let mut sol = solve_phi(&coef)?;
        let g = compute_g_eps(&mut sol);
        // beam solve with frozen g: linear when a = 0, damped Newton otherwise
        let u_new = solve_frozen_source(lambda, &g, params, &grid)?;
        let step: f64 = u_new
            .u()
            .values()
            .iter()
            .zip(u.u().values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        u = u_new;
        iters += 1;
        if step <= 1e-9 {
            // converged in iterates; check the beam residual with a fresh force
            let coef = compute_coefficients(&u, eps, rect)?;
            let mut sol = solve_phi(&coef)?;
            let g = compute_g_eps(&mut sol);
            let res = frozen_residual(&u, &g, params, lambda);
            let floor = residual_floor(params, lambda, &u);
            if res <= 1e-8_f64.max(floor) {
                return Ok(StationarySolution {
                    u,
                    lambda,
                    eps,
                    rho: None,
                    newton_iters: iters,
                    residual_norm: res,
                });
            }
            return Err(Error::NoConvergence {
                what: format!("coupled stationary (lambda = {lambda}, eps = {eps}): iterates \
                               settled but residual stayed high"),
                iters,
                residual: res,
                last: u.u().values().to_vec(),
            });
        }
        if iters >= max_outer {
            let _ = n;
            return Err(Error::NoConvergence {
                what: format!("coupled stationary (lambda = {lambda}, eps = {eps})"),
                iters,
                residual: step,
                last: u.u().values().to_vec(),
            });
        }
    }
}

fn frozen_residual(
    u: &DeflectionProfile,
    g: &GridFunction1D,
    params: &ModelParams,
    lambda: f64,
) -> f64 {
    let beam = apply_beam_operator(u, params);
    let n = u.grid().n_cells();
    let h = u.grid().h();
    let mut sq = 0.0;
    for i in 1..n {
        let f = beam.values()[i] + lambda * g.values()[i];
        sq += f * f;
    }
    (h * sq).sqrt()
}

/// Solve `beta u'''' - (tau + a||u'||^2) u'' = -lambda g` with g fixed.
fn solve_frozen_source(
    lambda: f64,
    g: &GridFunction1D,
    params: &ModelParams,
    grid: &Arc<IntervalGrid>,
) -> Result<DeflectionProfile> {
    let n = grid.n_cells();
    let rhs: Vec<f64> = (1..n).map(|i| -lambda * g.values()[i]).collect();
    if params.a == 0.0 {
        let beam = assemble_beam_matrix(params, grid);
        let lu = beam.factor()?;
        let sol = lu.solve(&rhs);
        return DeflectionProfile::from_interior(grid.clone(), &sol);
    }
    // damped Newton on the a-nonlinearity only
    let mut u = DeflectionProfile::zero(grid.clone());
    let h = grid.h();
    let resid = |u: &DeflectionProfile| -> (Vec<f64>, f64) {
        let beam = apply_beam_operator(u, params);
        let mut vals = Vec::with_capacity(n - 1);
        let mut sq = 0.0;
        for i in 1..n {
            let f = beam.values()[i] + lambda * g.values()[i];
            vals.push(f);
            sq += f * f;
        }
        (vals, (h * sq).sqrt())
    };
    let (_, mut res) = resid(&u);
    for _ in 0..60 {
        let floor = residual_floor(params, lambda, &u);
        if res <= 1e-10_f64.max(floor) {
            return Ok(u);
        }
        let jac = LimitJacobian::assemble(&u, params, 0.0)?;
        let (f, _) = resid(&u);
        let neg_f: Vec<f64> = f.iter().map(|x| -x).collect();
        let step = jac.solve(grid, &neg_f);
        let mut t = 1.0;
        let mut ok = false;
        for _ in 0..40 {
            let trial: Vec<f64> = u
                .interior()
                .iter()
                .zip(&step)
                .map(|(ui, s)| ui + t * s)
                .collect();
            if trial.iter().all(|&x| x > -1.0) {
                if let Ok(u_try) = DeflectionProfile::from_interior(grid.clone(), &trial) {
                    let (_, r_try) = resid(&u_try);
                    if r_try < res {
                        u = u_try;
                        res = r_try;
                        ok = true;
                        break;
                    }
                }
            }
            t *= 0.5;
        }
        if !ok {
            break;
        }
    }
    let floor = residual_floor(params, lambda, &u);
    if res <= 1e-8_f64.max(floor) {
        Ok(u)
    } else {
        Err(Error::NoConvergence {
            what: "frozen-source beam solve".into(),
            iters: 60,
            residual: res,
            last: u.u().values().to_vec(),
        })
    }
}

/// Locate the pull-in threshold by increasing-lambda continuation with
/// warm-started Newton and step halving on failure, then bisection down to
/// the requested bracket width. Continuation failure is the detection
/// signal, not an error.
pub fn find_pullin_threshold(
    eps: f64,
    params: &ModelParams,
    grid: &Arc<IntervalGrid>,
    tol: f64,
    rect: Option<&Arc<RectGrid>>,
) -> Result<PullInReport> {
    if tol <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "bracket tolerance must be > 0, got {tol}"
        )));
    }
    if eps > 0.0 && rect.is_none() {
        return Err(Error::Precondition(
            "pull-in search with eps > 0 needs a rectangle grid".into(),
        ));
    }
    let opts = NewtonOptions {
        tol: 1e-9,
        ..Default::default()
    };
    let try_solve = |lambda: f64, init: &DeflectionProfile| -> Option<StationarySolution> {
        if eps == 0.0 {
            solve_limit_stationary_with(lambda, params, grid, Some(init), &opts).ok()
        } else {
            solve_coupled_stationary(lambda, eps, params, rect.unwrap(), Some(init)).ok()
        }
    };

    // scale guess: lambda at which the linear response would reach the plate
    let beam = assemble_beam_matrix(params, grid);
    let lu = beam.factor()?;
    let ones = vec![1.0; grid.n_cells() - 1];
    let w = lu.solve(&ones);
    let wmax = w.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let lambda_guess = 1.0 / wmax;

    let mut branch = Vec::new();
    let mut lambda_ok = 0.0;
    let mut u_ok = DeflectionProfile::zero(grid.clone());
    branch.push(BranchSample {
        lambda: 0.0,
        min_u: 0.0,
        mech_energy: 0.0,
    });
    let mut step = 0.05 * lambda_guess;
    let lambda_bad;
    loop {
        let lambda_try = lambda_ok + step;
        match try_solve(lambda_try, &u_ok) {
            Some(sol) => {
                lambda_ok = lambda_try;
                u_ok = sol.u.clone();
                branch.push(BranchSample {
                    lambda: lambda_try,
                    min_u: sol.u.min_u(),
                    mech_energy: mechanical_energy(&sol.u, params),
                });
            }
            None => {
                if step < 0.5 * tol {
                    lambda_bad = lambda_try;
                    break;
                }
                step *= 0.5;
            }
        }
    }
    let mut lo = lambda_ok;
    let mut hi = lambda_bad;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        match try_solve(mid, &u_ok) {
            Some(sol) => {
                lo = mid;
                u_ok = sol.u.clone();
                branch.push(BranchSample {
                    lambda: mid,
                    min_u: sol.u.min_u(),
                    mech_energy: mechanical_energy(&sol.u, params),
                });
            }
            None => hi = mid,
        }
    }
    branch.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
    Ok(PullInReport {
        eps,
        lambda_star: 0.5 * (lo + hi),
        bracket_width: 0.5 * (hi - lo),
        branch,
    })
}

/// Outcome of the sampled minimality check.
#[derive(Debug, Clone)]
pub struct MinimizerCheck {
    pub passed: bool,
    /// Smallest value of `E_m(trial) - E_m(u)` over the sampled trials.
    pub margin: f64,
    pub trials_run: usize,
    pub trials_skipped: usize,
}

fn splitmix(state: &mut u64) -> f64 {
    *state = state.wrapping_add(0x9E3779B97F4A7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z = z ^ (z >> 31);
    (z >> 11) as f64 / (1u64 << 53) as f64
}

/// Check that no sampled trial in the discrete constrained class (even,
/// clamped, `-1 < v <= 0`, `int dx/(1+v) = rho` via scalar rescaling) has
/// lower mechanical energy than the given constrained solution.
pub fn verify_minimizer(
    sol: &StationarySolution,
    params: &ModelParams,
    trial_count: usize,
) -> Result<MinimizerCheck> {
    let rho = sol.rho.ok_or_else(|| {
        Error::Precondition("verify_minimizer needs a constrained solution with rho set".into())
    })?;
    let grid = sol.u.grid().clone();
    let e_u = mechanical_energy(&sol.u, params);

    let constraint_of = |shape: &[f64], theta: f64| -> f64 {
        let vals: Vec<f64> = shape.iter().map(|&s| 1.0 / (1.0 + theta * s)).collect();
        integrate_1d(&GridFunction1D::new(grid.clone(), vals).expect("finite"))
    };
    // scalar projection onto the constraint: shapes are <= 0, so the
    // constraint value grows monotonically with theta
    let project = |shape: &[f64]| -> Option<DeflectionProfile> {
        let smin = shape.iter().cloned().fold(0.0_f64, f64::min);
        if smin >= 0.0 {
            return None;
        }
        let theta_max = 0.999 / (-smin);
        if constraint_of(shape, theta_max) < rho {
            return None; // family cannot reach the prescribed constraint
        }
        let (mut lo, mut hi) = (0.0, theta_max);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if constraint_of(shape, mid) < rho {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let theta = 0.5 * (lo + hi);
        let vals: Vec<f64> = shape.iter().map(|&s| theta * s).collect();
        DeflectionProfile::new(GridFunction1D::new(grid.clone(), vals).ok()?).ok()
    };

    let mut margin = f64::INFINITY;
    let mut run = 0usize;
    let mut skipped = 0usize;

    // the solution itself (reflexivity), the quartic family, a steeper bump
    let mut shapes: Vec<Vec<f64>> = vec![
        sol.u.u().values().to_vec(),
        grid.nodes()
            .iter()
            .map(|&x| -(1.0 - x * x).powi(2))
            .collect(),
        grid.nodes()
            .iter()
            .map(|&x| -(1.0 - x * x).powi(3))
            .collect(),
    ];
    // even perturbations of u, clipped nonpositive, re-projected
    let mut rng_state = 0x5EED_u64;
    while shapes.len() < trial_count.max(3) {
        let c0 = 0.6 * splitmix(&mut rng_state) - 0.3;
        let c1 = 0.6 * splitmix(&mut rng_state) - 0.3;
        let delta = 0.02 + 0.08 * splitmix(&mut rng_state);
        let vals: Vec<f64> = grid
            .nodes()
            .iter()
            .zip(sol.u.u().values())
            .map(|(&x, &u)| {
                let bump = (1.0 - x * x).powi(2) * (c0 + c1 * x * x);
                (u + delta * bump).min(0.0)
            })
            .collect();
        shapes.push(vals);
    }

    for shape in &shapes {
        match project(shape) {
            Some(trial) => {
                let gap = mechanical_energy(&trial, params) - e_u;
                margin = margin.min(gap);
                run += 1;
            }
            None => skipped += 1,
        }
    }
    Ok(MinimizerCheck {
        passed: margin >= -1e-8,
        margin,
        trials_run: run,
        trials_skipped: skipped,
    })
}
