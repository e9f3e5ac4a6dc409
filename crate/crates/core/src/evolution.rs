//! Time integration of the damped beam dynamics, parabolic (gamma = 0) and
//! hyperbolic (gamma > 0), for both the coupled problem (source
//! `lambda g_eps(u)` from a transformed potential solve per step) and the
//! small-aspect-ratio limit (source `lambda/(1+u)^2`), with quench detection.
//!
//! The splitting is first-order IMEX: the linear beam operator and the
//! damping are implicit (one banded solve per step with a factorization
//! computed once), the electrostatic source and the self-stretching term are
//! explicit.

use crate::beam::{
    assemble_beam_matrix, mechanical_energy, DeflectionProfile, ModelParams,
};
use crate::error::{Error, Result};
use crate::grid::{integrate_1d, sobolev_norm, GridFunction1D, IntervalGrid, RectGrid};
use crate::linalg::BandLu;
use crate::poisson::{compute_coefficients, compute_g_eps, electrostatic_energy, solve_phi};
use std::sync::Arc;

/// State of the first-order system `(u, du/dt)`; the velocity component is
/// absent in the damping-dominated limit gamma = 0.
#[derive(Debug, Clone)]
pub struct EvolutionState {
    pub t: f64,
    pub u: DeflectionProfile,
    pub ut: Option<GridFunction1D>,
}

/// Time history of one trajectory.
#[derive(Debug, Clone)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub min_u: Vec<f64>,
    /// (mechanical energy, electrostatic energy proxy) per recorded time
    pub energies: Vec<(f64, f64)>,
    /// (t_q, kappa_stop) when the run quenched
    pub quench: Option<(f64, f64)>,
    pub snapshots: Vec<EvolutionState>,
}

impl TrajectoryRecord {
    pub fn quenched(&self) -> bool {
        self.quench.is_some()
    }

    pub fn final_state(&self) -> &EvolutionState {
        self.snapshots.last().expect("at least the initial state")
    }
}

struct Stepper {
    lu: BandLu,
    dt: f64,
    gamma: f64,
    grid: Arc<IntervalGrid>,
}

impl Stepper {
    fn new(params: &ModelParams, grid: &Arc<IntervalGrid>, dt: f64) -> Result<Self> {
        if dt <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "time step must be > 0, got {dt}"
            )));
        }
        if dt > 0.1 {
            return Err(Error::InvalidParameter(format!(
                "time step {dt} exceeds the hard cap 0.1"
            )));
        }
        let beam = assemble_beam_matrix(params, grid);
        let mut band = beam.band().clone();
        let shift = if params.gamma == 0.0 {
            // (I + dt B) u' = rhs, assembled as (1/dt + B) after scaling below
            1.0 / dt
        } else {
            params.gamma * params.gamma / (dt * dt) + 1.0 / dt
        };
        for row in 0..beam.n_interior() {
            band.add(row, row, shift);
        }
        Ok(Stepper {
            lu: band.factor()?,
            dt,
            gamma: params.gamma,
            grid: grid.clone(),
        })
    }

    /// One step; `source` is the force density multiplied by lambda inside.
    /// Returns the raw interior values of the new state.
    fn step_raw(
        &self,
        u: &DeflectionProfile,
        w: Option<&[f64]>,
        params: &ModelParams,
        source: &GridFunction1D,
    ) -> (Vec<f64>, Option<Vec<f64>>) {
        let n = self.grid.n_cells();
        let dt = self.dt;
        let stretch = if params.a > 0.0 {
            params.a * u.grad_norm_sq()
        } else {
            0.0
        };
        let mut rhs = Vec::with_capacity(n - 1);
        for i in 1..n {
            let ui = u.u().values()[i];
            let explicit = stretch * u.d2u().values()[i] - params.lambda * source.values()[i];
            let r = if self.gamma == 0.0 {
                ui / dt + explicit
            } else {
                let g2 = self.gamma * self.gamma;
                g2 * ui / (dt * dt) + g2 * w.expect("velocity present")[i - 1] / dt + ui / dt
                    + explicit
            };
            rhs.push(r);
        }
        let u_new = self.lu.solve(&rhs);
        let w_new = if self.gamma == 0.0 {
            None
        } else {
            Some(
                u_new
                    .iter()
                    .zip(u.interior())
                    .map(|(a, b)| (a - b) / dt)
                    .collect(),
            )
        };
        (u_new, w_new)
    }
}

fn state_from_raw(
    grid: &Arc<IntervalGrid>,
    t: f64,
    u_int: &[f64],
    w_int: Option<&[f64]>,
) -> Result<EvolutionState> {
    let u = DeflectionProfile::from_interior(grid.clone(), u_int)?;
    let ut = match w_int {
        Some(w) => {
            let n = grid.n_nodes();
            let mut vals = vec![0.0; n];
            vals[1..n - 1].copy_from_slice(w);
            Some(GridFunction1D::new(grid.clone(), vals)?)
        }
        None => None,
    };
    Ok(EvolutionState { t, u, ut })
}

/// One semi-implicit step of the damping-dominated dynamics
/// `u_t + beta u'''' - (tau + a||u'||^2) u'' = -lambda source`.
pub fn advance_parabolic(
    state: &EvolutionState,
    dt: f64,
    params: &ModelParams,
    source: &GridFunction1D,
) -> Result<EvolutionState> {
    if params.gamma != 0.0 {
        return Err(Error::Precondition(
            "advance_parabolic requires gamma = 0".into(),
        ));
    }
    let grid = state.u.grid().clone();
    let stepper = Stepper::new(params, &grid, dt)?;
    let (u_new, _) = stepper.step_raw(&state.u, None, params, source);
    state_from_raw(&grid, state.t + dt, &u_new, None)
}

/// One IMEX step of the hyperbolic dynamics in first-order form: the linear
/// beam block and the damping are implicit, the source and the stretching
/// term explicit.
pub fn advance_hyperbolic(
    state: &EvolutionState,
    dt: f64,
    params: &ModelParams,
    source: &GridFunction1D,
) -> Result<EvolutionState> {
    if params.gamma <= 0.0 {
        return Err(Error::Precondition(
            "advance_hyperbolic requires gamma > 0".into(),
        ));
    }
    let w = state
        .ut
        .as_ref()
        .ok_or_else(|| Error::Precondition("hyperbolic step needs a velocity".into()))?;
    let grid = state.u.grid().clone();
    let n = grid.n_nodes();
    let w_int: Vec<f64> = w.values()[1..n - 1].to_vec();
    let stepper = Stepper::new(params, &grid, dt)?;
    let (u_new, w_new) = stepper.step_raw(&state.u, Some(&w_int), params, source);
    state_from_raw(&grid, state.t + dt, &u_new, w_new.as_deref())
}

fn limit_source(u: &DeflectionProfile) -> GridFunction1D {
    let vals: Vec<f64> = u
        .u()
        .values()
        .iter()
        .map(|&x| 1.0 / ((1.0 + x) * (1.0 + x)))
        .collect();
    GridFunction1D::new(u.grid().clone(), vals).expect("finite")
}

fn energy_proxy_limit(u: &DeflectionProfile) -> f64 {
    let vals: Vec<f64> = u.u().values().iter().map(|&x| 1.0 / (1.0 + x)).collect();
    integrate_1d(&GridFunction1D::new(u.grid().clone(), vals).expect("finite"))
}

/// Integrate to time `T` or quench, whichever comes first. For
/// `params.eps > 0` the force is `g_eps(u^n)` from a fresh transformed
/// potential solve each step (needing `rect`); at `eps = 0` it is
/// `1/(1+u^n)^2`. Quench is declared when `min u <= -1 + kappa_stop`.
#[allow(clippy::too_many_arguments)]
pub fn run_evolution(
    params: &ModelParams,
    u0: &DeflectionProfile,
    u1: Option<&GridFunction1D>,
    final_time: f64,
    dt: f64,
    kappa_stop: f64,
    rect: Option<&Arc<RectGrid>>,
    snapshot_count: usize,
) -> Result<TrajectoryRecord> {
    if !(kappa_stop > 0.0 && kappa_stop < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "kappa_stop must lie in (0,1), got {kappa_stop}"
        )));
    }
    if !u0.has_clamped_values() {
        return Err(Error::Precondition(
            "initial profile must satisfy the clamped boundary values".into(),
        ));
    }
    if u0.min_u() <= -1.0 + kappa_stop {
        return Err(Error::Precondition(format!(
            "initial profile already below the quench threshold (min u = {})",
            u0.min_u()
        )));
    }
    if params.gamma > 0.0 && u1.is_none() {
        return Err(Error::Precondition(
            "gamma > 0 needs an initial velocity u1".into(),
        ));
    }
    if params.eps > 0.0 && rect.is_none() {
        return Err(Error::Precondition(
            "eps > 0 needs a rectangle grid for the potential solves".into(),
        ));
    }
    let grid = u0.grid().clone();
    let stepper = Stepper::new(params, &grid, dt)?;
    let n_steps = (final_time / dt - 1e-12).ceil().max(1.0) as usize;
    let snapshot_count = snapshot_count.max(2);
    let snap_at = |step: usize| -> bool {
        (0..snapshot_count).any(|i| step == (i * n_steps).div_ceil(snapshot_count - 1).min(n_steps))
    };

    let mut u = u0.clone();
    let mut w_int: Option<Vec<f64>> = match u1 {
        Some(w) => {
            let n = grid.n_nodes();
            if w.values()[0] != 0.0 || w.values()[n - 1] != 0.0 {
                return Err(Error::Precondition(
                    "initial velocity must vanish at the clamped ends".into(),
                ));
            }
            Some(w.values()[1..n - 1].to_vec())
        }
        None => None,
    };
    if params.gamma == 0.0 {
        w_int = None;
    }

    let mut record = TrajectoryRecord {
        times: vec![0.0],
        min_u: vec![u0.min_u()],
        energies: Vec::new(),
        quench: None,
        snapshots: Vec::new(),
    };

    // source + energy proxy at the current state
    let eval_source = |u: &DeflectionProfile| -> Result<(GridFunction1D, f64)> {
        if params.eps > 0.0 {
            let coef = compute_coefficients(u, params.eps, rect.unwrap())?;
            let mut sol = solve_phi(&coef)?;
            let g = compute_g_eps(&mut sol);
            let ee = electrostatic_energy(&sol);
            Ok((g, ee))
        } else {
            Ok((limit_source(u), energy_proxy_limit(u)))
        }
    };

    let (_, ee0) = eval_source(&u)?;
    record.energies.push((mechanical_energy(&u, params), ee0));
    record.snapshots.push(EvolutionState {
        t: 0.0,
        u: u.clone(),
        ut: u1.cloned().filter(|_| params.gamma > 0.0),
    });

    for step in 1..=n_steps {
        let t = step as f64 * dt;
        let (source, _) = eval_source(&u)?;
        let (u_new_int, w_new) = stepper.step_raw(&u, w_int.as_deref(), params, &source);
        let min_new = u_new_int.iter().cloned().fold(0.0_f64, f64::min);
        record.times.push(t);
        record.min_u.push(min_new);
        if min_new <= -1.0 + kappa_stop {
            record.quench = Some((t, kappa_stop));
            if min_new > -1.0 {
                let state = state_from_raw(&grid, t, &u_new_int, w_new.as_deref())?;
                record.energies.push((
                    mechanical_energy(&state.u, params),
                    energy_proxy_limit(&state.u),
                ));
                record.snapshots.push(state);
            }
            return Ok(record);
        }
        let state = state_from_raw(&grid, t, &u_new_int, w_new.as_deref())?;
        u = state.u.clone();
        w_int = w_new;
        let (_, ee) = eval_source(&u)?;
        record.energies.push((mechanical_energy(&u, params), ee));
        if snap_at(step) || step == n_steps {
            record.snapshots.push(state);
        }
    }
    Ok(record)
}

/// Convergence record of one eps against the shared eps = 0 reference.
#[derive(Debug, Clone, Copy)]
pub struct EvolutionComparison {
    pub eps: f64,
    /// sup over saved times of || u_eps - u_0 ||_{H^{2+2 alpha'}}
    pub sup_u_err: f64,
    /// sup over saved times of || du/dt difference ||_{H^{2 alpha'}} (gamma > 0)
    pub sup_ut_err: Option<f64>,
    /// || psi_eps - b_{u_0} ||_{L2(Omega(u_eps))} at final time
    pub cvpsi_psi: f64,
    /// || dz psi_eps - 1/(1+u_0) ||_{L2(Omega(u_eps))} at final time
    pub cvpsi_dz: f64,
}

/// Run the eps = 0 reference once, then each eps of the list on identical
/// grid, step size and data, and measure the sup-in-time Sobolev distances
/// plus the final-time potential convergence pair.
#[allow(clippy::too_many_arguments)]
pub fn compare_evolutions(
    params: &ModelParams,
    eps_list: &[f64],
    u0: &DeflectionProfile,
    u1: Option<&GridFunction1D>,
    final_time: f64,
    dt: f64,
    rect: &Arc<RectGrid>,
    alpha_prime: f64,
    snapshot_count: usize,
) -> Result<Vec<EvolutionComparison>> {
    let kappa_stop = 0.01;
    let base = ModelParams {
        eps: 0.0,
        ..*params
    };
    let reference = run_evolution(
        &base,
        u0,
        u1,
        final_time,
        dt,
        kappa_stop,
        Some(rect),
        snapshot_count,
    )?;
    if reference.quenched() {
        return Err(Error::QuenchBeforeFinalTime(
            "the eps = 0 reference quenched; lower lambda or the final time".into(),
        ));
    }
    let mut out = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let run_params = ModelParams { eps, ..*params };
        let traj = run_evolution(
            &run_params,
            u0,
            u1,
            final_time,
            dt,
            kappa_stop,
            Some(rect),
            snapshot_count,
        )?;
        if traj.quenched() {
            return Err(Error::QuenchBeforeFinalTime(format!(
                "run at eps = {eps} quenched before T = {final_time}; lower lambda or T"
            )));
        }
        if traj.snapshots.len() != reference.snapshots.len() {
            return Err(Error::SolverFailure(
                "snapshot schedules diverged between runs".into(),
            ));
        }
        let s_u = 2.0 + 2.0 * alpha_prime;
        let s_w = 2.0 * alpha_prime;
        let mut sup_u: f64 = 0.0;
        let mut sup_w: Option<f64> = if params.gamma > 0.0 { Some(0.0) } else { None };
        for (se, s0) in traj.snapshots.iter().zip(&reference.snapshots) {
            let du = se.u.u().sub(s0.u.u());
            sup_u = sup_u.max(sobolev_norm(&du, s_u)?);
            if let (Some(acc), Some(we), Some(w0)) = (sup_w.as_mut(), &se.ut, &s0.ut) {
                let dw = we.sub(w0);
                *acc = acc.max(sobolev_norm(&dw, s_w)?);
            }
        }
        // potential convergence pair at the final time
        let u_eps_final = &traj.final_state().u;
        let u0_final = &reference.final_state().u;
        let coef = compute_coefficients(u_eps_final, eps, rect)?;
        let mut sol = solve_phi(&coef)?;
        let (cv1, cv2) = sol.limit_distance_pair(u0_final);
        out.push(EvolutionComparison {
            eps,
            sup_u_err: sup_u,
            sup_ut_err: sup_w,
            cvpsi_psi: cv1,
            cvpsi_dz: cv2,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::IntervalGrid;
    use crate::stationary::solve_limit_stationary;

    fn grid(n: usize) -> Arc<IntervalGrid> {
        IntervalGrid::new(n).unwrap()
    }

    fn bump(grid: &Arc<IntervalGrid>, c: f64) -> DeflectionProfile {
        DeflectionProfile::clamped_from_fn(grid.clone(), |x| c * (1.0 - x * x).powi(2)).unwrap()
    }

    fn params(gamma: f64, lambda: f64) -> ModelParams {
        ModelParams {
            beta: 1.0,
            tau: 0.0,
            a: 0.0,
            gamma,
            lambda,
            eps: 0.0,
        }
    }

    #[test]
    fn flat_state_is_equilibrium_without_voltage() {
        let g = grid(32);
        let z = DeflectionProfile::zero(g.clone());
        let p = params(0.0, 0.0);
        let src = GridFunction1D::zeros(g.clone());
        let s1 = advance_parabolic(
            &EvolutionState {
                t: 0.0,
                u: z.clone(),
                ut: None,
            },
            0.01,
            &p,
            &src,
        )
        .unwrap();
        assert_eq!(s1.u.u().linf(), 0.0);

        let ph = params(1.0, 0.0);
        let s2 = advance_hyperbolic(
            &EvolutionState {
                t: 0.0,
                u: z.clone(),
                ut: Some(GridFunction1D::zeros(g)),
            },
            0.01,
            &ph,
            &src,
        )
        .unwrap();
        assert_eq!(s2.u.u().linf(), 0.0);
        assert_eq!(s2.ut.unwrap().linf(), 0.0);
    }

    #[test]
    fn parabolic_decay_is_monotone() {
        let g = grid(64);
        let p = params(0.0, 0.0);
        let mut state = EvolutionState {
            t: 0.0,
            u: bump(&g, -0.1),
            ut: None,
        };
        let src = GridFunction1D::zeros(g);
        let mut prev = state.u.u().linf();
        for _ in 0..20 {
            state = advance_parabolic(&state, 0.005, &p, &src).unwrap();
            let cur = state.u.u().linf();
            assert!(cur < prev, "decay broke: {cur} >= {prev}");
            prev = cur;
        }
    }

    #[test]
    fn parabolic_step_halving_first_order() {
        // one dt-step vs two dt/2-steps differ at O(dt^2); the exponent
        // estimated from successive halvings gives method order >= 0.9
        let g = grid(64);
        let p = params(0.0, 0.5);
        let u0 = bump(&g, -0.1);
        let one_vs_two = |dt: f64| -> f64 {
            let s0 = EvolutionState {
                t: 0.0,
                u: u0.clone(),
                ut: None,
            };
            let big = advance_parabolic(&s0, dt, &p, &limit_source(&u0)).unwrap();
            let half = advance_parabolic(&s0, dt / 2.0, &p, &limit_source(&u0)).unwrap();
            let half2 =
                advance_parabolic(&half, dt / 2.0, &p, &limit_source(&half.u)).unwrap();
            big.u.u().sub(half2.u.u()).linf()
        };
        let d1 = one_vs_two(0.02);
        let d2 = one_vs_two(0.01);
        // stiff modes reduce the ideal ratio 4; anything clearly above first
        // order in the local difference is accepted
        let order = (d1 / d2).log2();
        assert!(order >= 0.9, "estimated order {order}");
    }

    #[test]
    fn hyperbolic_energy_nonincreasing() {
        let g = grid(64);
        let p = params(1.0, 0.0);
        let mut state = EvolutionState {
            t: 0.0,
            u: bump(&g, -0.1),
            ut: Some(GridFunction1D::zeros(g.clone())),
        };
        let src = GridFunction1D::zeros(g.clone());
        let h = g.h();
        let energy = |s: &EvolutionState| -> f64 {
            let w = s.ut.as_ref().unwrap();
            let kinetic: f64 =
                0.5 * h * w.values().iter().map(|v| v * v).sum::<f64>();
            kinetic + mechanical_energy(&s.u, &p)
        };
        let mut prev = energy(&state);
        for _ in 0..100 {
            state = advance_hyperbolic(&state, 0.01, &p, &src).unwrap();
            let e = energy(&state);
            assert!(e <= prev * (1.0 + 1e-12), "energy rose: {e} > {prev}");
            prev = e;
        }
    }

    #[test]
    fn small_gamma_matches_parabolic() {
        let g = grid(64);
        let t_final = 0.5;
        let dt = 1e-3;
        let pp = params(0.0, 0.1);
        let traj_p = run_evolution(
            &pp,
            &DeflectionProfile::zero(g.clone()),
            None,
            t_final,
            dt,
            0.01,
            None,
            3,
        )
        .unwrap();
        let ph = params(0.01, 0.1);
        let traj_h = run_evolution(
            &ph,
            &DeflectionProfile::zero(g.clone()),
            Some(&GridFunction1D::zeros(g.clone())),
            t_final,
            dt,
            0.01,
            None,
            3,
        )
        .unwrap();
        let up = &traj_p.final_state().u;
        let uh = &traj_h.final_state().u;
        let rel = uh.u().sub(up.u()).linf() / up.u().linf();
        assert!(rel <= 0.05, "relative mismatch {rel}");
    }

    #[test]
    fn zero_voltage_runs_to_final_time_and_decays() {
        let g = grid(64);
        let p = params(0.0, 0.0);
        let traj = run_evolution(&p, &bump(&g, -0.2), None, 1.0, 0.01, 0.01, None, 5).unwrap();
        assert!(!traj.quenched());
        assert!(traj.final_state().u.u().linf() < 0.02);
        for w in traj.times.windows(2) {
            assert!(w[1] > w[0]);
        }
    }

    #[test]
    fn quench_detected_and_monotone_in_lambda() {
        let g = grid(128);
        let quench_time = |lambda: f64| -> f64 {
            let p = params(0.0, lambda);
            let traj = run_evolution(
                &p,
                &DeflectionProfile::zero(g.clone()),
                None,
                2.0,
                1e-4,
                0.01,
                None,
                3,
            )
            .unwrap();
            let (tq, ks) = traj.quench.expect("must quench");
            assert_eq!(ks, 0.01);
            assert!(*traj.min_u.last().unwrap() <= -1.0 + ks);
            tq
        };
        let t100 = quench_time(100.0);
        let t50 = quench_time(50.0);
        assert!(t100 < t50, "t_q(100) = {t100}, t_q(50) = {t50}");
    }

    #[test]
    fn equilibrium_preserved_under_evolution() {
        let g = grid(128);
        let lambda = 1.0;
        let p = params(0.0, lambda);
        let stat = solve_limit_stationary(lambda, &p, &g, None).unwrap();
        let traj = run_evolution(&p, &stat.u, None, 1.0, 0.01, 0.01, None, 3).unwrap();
        let drift = traj.final_state().u.u().sub(stat.u.u()).linf();
        assert!(drift <= 1e-6, "drift {drift}");
    }

    #[test]
    fn preconditions_checked() {
        let g = grid(32);
        let p = params(1.0, 0.1);
        // gamma > 0 without u1
        assert!(run_evolution(&p, &bump(&g, -0.1), None, 0.1, 0.01, 0.01, None, 3).is_err());
        // unclamped initial data
        let c = DeflectionProfile::new(GridFunction1D::from_fn(g.clone(), |_| -0.5)).unwrap();
        let p0 = params(0.0, 0.1);
        assert!(run_evolution(&p0, &c, None, 0.1, 0.01, 0.01, None, 3).is_err());
        // eps > 0 without rectangle grid
        let pe = ModelParams {
            eps: 0.1,
            ..params(0.0, 0.1)
        };
        assert!(run_evolution(&pe, &bump(&g, -0.1), None, 0.1, 0.01, 0.01, None, 3).is_err());
    }

    #[test]
    fn comparison_self_and_sourceless_are_zero() {
        let g = grid(32);
        let rect = RectGrid::new(g.clone(), 16).unwrap();
        let u0 = bump(&g, -0.1);
        // eps list {0}: exact self-comparison
        let p = params(0.0, 0.2);
        let recs =
            compare_evolutions(&p, &[0.0], &u0, None, 0.2, 0.01, &rect, 0.125, 5).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].sup_u_err, 0.0);
        assert!(recs[0].cvpsi_psi < 1e-14 && recs[0].cvpsi_dz < 1e-14);
        // lambda = 0: the source multiplies lambda, so any eps matches
        let p0 = params(0.0, 0.0);
        let recs =
            compare_evolutions(&p0, &[0.1], &u0, None, 0.2, 0.01, &rect, 0.125, 5).unwrap();
        assert!(recs[0].sup_u_err <= 1e-13, "err {}", recs[0].sup_u_err);
    }

    #[test]
    fn comparison_errors_shrink_with_eps() {
        let g = grid(48);
        let rect = RectGrid::new(g.clone(), 24).unwrap();
        let u0 = bump(&g, -0.1);
        let p = ModelParams {
            beta: 1.0,
            tau: 0.5,
            a: 0.1,
            gamma: 1.0,
            lambda: 0.2,
            eps: 0.0,
        };
        let w0 = GridFunction1D::zeros(g.clone());
        let recs = compare_evolutions(&p, &[0.1, 0.05], &u0, Some(&w0), 0.3, 0.01, &rect, 0.125, 4)
            .unwrap();
        assert!(recs[0].sup_u_err > recs[1].sup_u_err);
        let w_errs: Vec<f64> = recs.iter().map(|r| r.sup_ut_err.unwrap()).collect();
        assert!(w_errs[0] > w_errs[1]);
        assert!(recs[0].cvpsi_psi > recs[1].cvpsi_psi);
        assert!(recs[0].cvpsi_dz > recs[1].cvpsi_dz);
    }

    #[test]
    fn quench_before_final_time_is_reported() {
        let g = grid(48);
        let rect = RectGrid::new(g.clone(), 16).unwrap();
        let p = params(0.0, 60.0);
        let res = compare_evolutions(
            &p,
            &[0.1],
            &DeflectionProfile::zero(g.clone()),
            None,
            1.0,
            0.005,
            &rect,
            0.125,
            3,
        );
        assert!(matches!(res, Err(Error::QuenchBeforeFinalTime(_))));
    }
}
