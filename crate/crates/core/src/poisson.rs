//! The electrostatic potential problem on the moving domain, solved after
//! mapping onto the fixed rectangle Omega = (-1,1) x (0,1).
//!
//! With `eta = (1+z)/(1+v(x))` and `Phi(x,eta) = psi(x,z) - eta`, the
//! rescaled Poisson equation `eps^2 psi_xx + psi_zz = 0` becomes the Dirichlet
//! problem `L_v Phi = f_v` with `Phi = 0` on the boundary of the rectangle,
//! where
//!
//! ```text
//! L_v w = eps^2 w_xx - 2 eps^2 eta V w_xeta
//!         + (1 + eps^2 eta^2 (v')^2)/(1+v)^2 w_etaeta
//!         + eps^2 eta [2 V^2 - v''/(1+v)] w_eta،     V = v'/(1+v),
//! f_v   = eps^2 eta [v''/(1+v) - 2 V^2].
//! ```
//!
//! At `eps = 0` the problem degenerates to `Phi = 0`, i.e. `psi` equals the
//! limit potential `b_v = (1+z)/(1+v)`; everything this module computes is a
//! deviation from that limit.

use crate::beam::DeflectionProfile;
use crate::error::{Error, Result};
use crate::grid::{integrate_1d, GridFunction1D, GridFunction2D, RectGrid};
use crate::linalg::BandMatrix;
use std::sync::Arc;

/// Per-node coefficient fields of the transformed operator, plus the source.
///
/// `f_v = -b_eta` holds exactly by construction.
#[derive(Debug, Clone)]
pub struct EllipticCoefficients {
    grid: Arc<RectGrid>,
    v: DeflectionProfile,
    eps: f64,
    a_xx: f64,
    a_xeta: GridFunction2D,
    a_etaeta: GridFunction2D,
    b_eta: GridFunction2D,
    f_v: GridFunction2D,
}

impl EllipticCoefficients {
    pub fn grid(&self) -> &Arc<RectGrid> {
        &self.grid
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn v(&self) -> &DeflectionProfile {
        &self.v
    }

    pub fn a_xx(&self) -> f64 {
        self.a_xx
    }

    pub fn a_xeta(&self) -> &GridFunction2D {
        &self.a_xeta
    }

    pub fn a_etaeta(&self) -> &GridFunction2D {
        &self.a_etaeta
    }

    pub fn b_eta(&self) -> &GridFunction2D {
        &self.b_eta
    }

    pub fn f_v(&self) -> &GridFunction2D {
        &self.f_v
    }
}

/// Evaluate the coefficient fields from the cached derivatives of `v`.
pub fn compute_coefficients(
    v: &DeflectionProfile,
    eps: f64,
    grid: &Arc<RectGrid>,
) -> Result<EllipticCoefficients> {
    if eps < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "eps must be >= 0, got {eps}"
        )));
    }
    if grid.grid_x().n_cells() != v.grid().n_cells() {
        return Err(Error::InvalidParameter(
            "rectangle x-grid does not match the profile grid".into(),
        ));
    }
    let nx = grid.n_nodes_x();
    let ne = grid.n_nodes_eta();
    let e2 = eps * eps;
    let mut a_xeta = GridFunction2D::zeros(grid.clone());
    let mut a_etaeta = GridFunction2D::zeros(grid.clone());
    let mut b_eta = GridFunction2D::zeros(grid.clone());
    let mut f_v = GridFunction2D::zeros(grid.clone());
    for i in 0..nx {
        let u = v.u().values()[i];
        let du = v.du().values()[i];
        let vv = v.v_field().values()[i];
        let d2u = v.d2u().values()[i];
        let om = 1.0 + u;
        for j in 0..ne {
            let eta = grid.eta_nodes()[j];
            a_xeta.set(i, j, -2.0 * e2 * eta * vv);
            a_etaeta.set(i, j, (1.0 + e2 * eta * eta * du * du) / (om * om));
            let b = e2 * eta * (2.0 * vv * vv - d2u / om);
            b_eta.set(i, j, b);
            f_v.set(i, j, -b);
        }
    }
    Ok(EllipticCoefficients {
        grid: grid.clone(),
        v: v.clone(),
        eps,
        a_xx: e2,
        a_xeta,
        a_etaeta,
        b_eta,
        f_v,
    })
}

/// The solved transformed potential, with lazily computed derived fields.
#[derive(Debug, Clone)]
pub struct PotentialSolution {
    phi: GridFunction2D,
    eps: f64,
    v: DeflectionProfile,
    residual: f64,
    gamma: Option<GridFunction1D>,
    g_eps: Option<GridFunction1D>,
    dz_psi: Option<GridFunction2D>,
    dxdz_psi: Option<GridFunction2D>,
    dzz_psi: Option<GridFunction2D>,
}

/// The Proposition-style deviation norms of one solve, all taken in
/// transformed coordinates with the Jacobian weight (1+v).
#[derive(Debug, Clone, Copy)]
pub struct DeviationNorms {
    /// || psi - b_v ||_{L2(Omega(v))}
    pub psi_l2: f64,
    /// || dz psi - 1/(1+v) ||_{L2}
    pub dz_l2: f64,
    /// || dx dz psi + v'/(1+v)^2 ||_{L2}
    pub dxdz_l2: f64,
    /// || dz^2 psi ||_{L2}
    pub dzz_l2: f64,
}

/// Assemble and directly solve the nine-point discretization of
/// `L_v Phi = f_v`, `Phi = 0` on the rectangle boundary. The mixed term uses
/// the centered cross difference; unknowns are ordered eta-fastest so the
/// bandwidth equals the eta node count.
pub fn solve_phi(coef: &EllipticCoefficients) -> Result<PotentialSolution> {
    solve_phi_with_source(coef, coef.f_v())
}

/// Same discretization with an injected source, used for manufactured
/// solutions.
pub fn solve_phi_with_source(
    coef: &EllipticCoefficients,
    source: &GridFunction2D,
) -> Result<PotentialSolution> {
    let grid = coef.grid.clone();
    let nx = grid.n_nodes_x() - 1; // cells in x
    let ne = grid.n_nodes_eta() - 1; // cells in eta
    let h = grid.grid_x().h();
    let k = grid.k();
    let n_unknown = (nx - 1) * (ne - 1);
    let idx = |i: usize, j: usize| (i - 1) * (ne - 1) + (j - 1);

    // all-zero source: Phi = 0 reproducibly, no factorization
    if source.values().iter().all(|&f| f == 0.0) {
        return Ok(PotentialSolution {
            phi: GridFunction2D::zeros(grid),
            eps: coef.eps,
            v: coef.v.clone(),
            residual: 0.0,
            gamma: None,
            g_eps: None,
            dz_psi: None,
            dxdz_psi: None,
            dzz_psi: None,
        });
    }

    let band = ne; // largest index offset: (ne-1) + 1
    let mut mat = BandMatrix::zeros(n_unknown, band, band);
    let mut rhs = vec![0.0; n_unknown];
    let (h2, k2) = (h * h, k * k);
    for i in 1..nx {
        for j in 1..ne {
            let m = idx(i, j);
            rhs[m] = source.at(i, j);
            let axx = coef.a_xx;
            let axe = coef.a_xeta.at(i, j);
            let aee = coef.a_etaeta.at(i, j);
            let be = coef.b_eta.at(i, j);
            mat.add(m, m, -2.0 * axx / h2 - 2.0 * aee / k2);
            let mut put = |ii: usize, jj: usize, w: f64| {
                if ii >= 1 && ii <= nx - 1 && jj >= 1 && jj <= ne - 1 {
                    mat.add(m, idx(ii, jj), w);
                }
            };
            put(i + 1, j, axx / h2);
            put(i - 1, j, axx / h2);
            put(i, j + 1, aee / k2 + be / (2.0 * k));
            put(i, j - 1, aee / k2 - be / (2.0 * k));
            let cross = axe / (4.0 * h * k);
            put(i + 1, j + 1, cross);
            put(i - 1, j - 1, cross);
            put(i + 1, j - 1, -cross);
            put(i - 1, j + 1, -cross);
        }
    }

    let lu = mat.factor().map_err(|e| {
        Error::SolverFailure(format!(
            "transformed potential system ({n_unknown} unknowns, bandwidth {band}): {e}"
        ))
    })?;
    let sol = lu.solve(&rhs);
    drop(lu);

    let mut phi = GridFunction2D::zeros(grid.clone());
    for i in 1..nx {
        for j in 1..ne {
            phi.set(i, j, sol[idx(i, j)]);
        }
    }

    // relative residual of the stencil applied to the computed solution
    let mut res_sq = 0.0;
    let mut scale_sq = 0.0;
    for i in 1..nx {
        for j in 1..ne {
            let axx = coef.a_xx;
            let axe = coef.a_xeta.at(i, j);
            let aee = coef.a_etaeta.at(i, j);
            let be = coef.b_eta.at(i, j);
            let lap_x = (phi.at(i + 1, j) - 2.0 * phi.at(i, j) + phi.at(i - 1, j)) / h2;
            let lap_e = (phi.at(i, j + 1) - 2.0 * phi.at(i, j) + phi.at(i, j - 1)) / k2;
            let d_e = (phi.at(i, j + 1) - phi.at(i, j - 1)) / (2.0 * k);
            let cross = (phi.at(i + 1, j + 1) - phi.at(i + 1, j - 1) - phi.at(i - 1, j + 1)
                + phi.at(i - 1, j - 1))
                / (4.0 * h * k);
            let val = axx * lap_x + axe * cross + aee * lap_e + be * d_e;
            let f = source.at(i, j);
            res_sq += (val - f) * (val - f);
            scale_sq += f * f + val * val;
        }
    }
    let residual = (res_sq / (scale_sq + 1e-300)).sqrt();
    if residual > 1e-10 {
        return Err(Error::SolverFailure(format!(
            "direct solve residual {residual:.3e} exceeds 1e-10; system likely ill-conditioned \
             (unknowns {n_unknown}, bandwidth {band})"
        )));
    }

    Ok(PotentialSolution {
        phi,
        eps: coef.eps,
        v: coef.v.clone(),
        residual,
        gamma: None,
        g_eps: None,
        dz_psi: None,
        dxdz_psi: None,
        dzz_psi: None,
    })
}

// ---- difference helpers on 2D fields -------------------------------------

fn d_eta_of(f: &GridFunction2D) -> GridFunction2D {
    let grid = f.grid().clone();
    let nx = grid.n_nodes_x();
    let ne = grid.n_nodes_eta();
    let k = grid.k();
    let mut out = GridFunction2D::zeros(grid);
    for i in 0..nx {
        for j in 1..ne - 1 {
            out.set(i, j, (f.at(i, j + 1) - f.at(i, j - 1)) / (2.0 * k));
        }
        out.set(
            i,
            0,
            (-3.0 * f.at(i, 0) + 4.0 * f.at(i, 1) - f.at(i, 2)) / (2.0 * k),
        );
        out.set(
            i,
            ne - 1,
            (3.0 * f.at(i, ne - 1) - 4.0 * f.at(i, ne - 2) + f.at(i, ne - 3)) / (2.0 * k),
        );
    }
    out
}

fn d_eta2_of(f: &GridFunction2D) -> GridFunction2D {
    let grid = f.grid().clone();
    let nx = grid.n_nodes_x();
    let ne = grid.n_nodes_eta();
    let k2 = grid.k() * grid.k();
    let mut out = GridFunction2D::zeros(grid);
    for i in 0..nx {
        for j in 1..ne - 1 {
            out.set(i, j, (f.at(i, j + 1) - 2.0 * f.at(i, j) + f.at(i, j - 1)) / k2);
        }
        out.set(
            i,
            0,
            (2.0 * f.at(i, 0) - 5.0 * f.at(i, 1) + 4.0 * f.at(i, 2) - f.at(i, 3)) / k2,
        );
        out.set(
            i,
            ne - 1,
            (2.0 * f.at(i, ne - 1) - 5.0 * f.at(i, ne - 2) + 4.0 * f.at(i, ne - 3)
                - f.at(i, ne - 4))
                / k2,
        );
    }
    out
}

fn d_x_of(f: &GridFunction2D) -> GridFunction2D {
    let grid = f.grid().clone();
    let nx = grid.n_nodes_x();
    let ne = grid.n_nodes_eta();
    let h = grid.grid_x().h();
    let mut out = GridFunction2D::zeros(grid);
    for j in 0..ne {
        for i in 1..nx - 1 {
            out.set(i, j, (f.at(i + 1, j) - f.at(i - 1, j)) / (2.0 * h));
        }
        out.set(
            0,
            j,
            (-3.0 * f.at(0, j) + 4.0 * f.at(1, j) - f.at(2, j)) / (2.0 * h),
        );
        out.set(
            nx - 1,
            j,
            (3.0 * f.at(nx - 1, j) - 4.0 * f.at(nx - 2, j) + f.at(nx - 3, j)) / (2.0 * h),
        );
    }
    out
}

/// sqrt of the trapezoid integral of `field^2 * (1+v)` over the rectangle.
fn weighted_l2(field: &GridFunction2D, v: &DeflectionProfile) -> f64 {
    let grid = field.grid();
    let h = grid.grid_x().h();
    let k = grid.k();
    let nx = grid.n_nodes_x();
    let ne = grid.n_nodes_eta();
    let mut total = 0.0;
    for i in 0..nx {
        let wx = if i == 0 || i == nx - 1 { 0.5 * h } else { h };
        let weight = 1.0 + v.u().values()[i];
        let mut col = 0.0;
        for j in 0..ne {
            let we = if j == 0 || j == ne - 1 { 0.5 * k } else { k };
            let f = field.at(i, j);
            col += we * f * f;
        }
        total += wx * weight * col;
    }
    total.sqrt()
}

impl PotentialSolution {
    pub fn phi(&self) -> &GridFunction2D {
        &self.phi
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn v(&self) -> &DeflectionProfile {
        &self.v
    }

    pub fn grid(&self) -> &Arc<RectGrid> {
        self.phi.grid()
    }

    /// Relative residual of the direct solve.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn gamma(&self) -> Option<&GridFunction1D> {
        self.gamma.as_ref()
    }

    pub fn g_eps(&self) -> Option<&GridFunction1D> {
        self.g_eps.as_ref()
    }

    pub fn dz_psi(&self) -> Option<&GridFunction2D> {
        self.dz_psi.as_ref()
    }

    pub fn dxdz_psi(&self) -> Option<&GridFunction2D> {
        self.dxdz_psi.as_ref()
    }

    pub fn dzz_psi(&self) -> Option<&GridFunction2D> {
        self.dzz_psi.as_ref()
    }

    /// Worst violation of the comparison bounds `-eta <= Phi <= 1 - eta`
    /// over all nodes (0 when the bounds hold).
    pub fn comparison_violation(&self) -> f64 {
        let grid = self.phi.grid();
        let mut worst = 0.0_f64;
        for i in 0..grid.n_nodes_x() {
            for (j, &eta) in grid.eta_nodes().iter().enumerate() {
                let p = self.phi.at(i, j);
                worst = worst.max(-eta - p).max(p - (1.0 - eta));
            }
        }
        worst
    }
}

/// Fill the psi-derivative fields (in (x,eta) coordinates):
///
/// ```text
/// dz psi      = (1 + Phi_eta) / (1+v)
/// dx dz psi   = (Phi_xeta - eta V Phi_etaeta - V Phi_eta)/(1+v) - v'/(1+v)^2
/// dz^2 psi    = Phi_etaeta / (1+v)^2
/// ```
pub fn reconstruct_psi_fields(sol: &mut PotentialSolution) {
    if sol.dz_psi.is_some() {
        return;
    }
    let grid = sol.phi.grid().clone();
    let nx = grid.n_nodes_x();
    let ne = grid.n_nodes_eta();
    let dpe = d_eta_of(&sol.phi);
    let dpee = d_eta2_of(&sol.phi);
    let dpxe = d_x_of(&dpe);
    let mut dz = GridFunction2D::zeros(grid.clone());
    let mut dxdz = GridFunction2D::zeros(grid.clone());
    let mut dzz = GridFunction2D::zeros(grid.clone());
    for i in 0..nx {
        let om = 1.0 + sol.v.u().values()[i];
        let vv = sol.v.v_field().values()[i];
        let du = sol.v.du().values()[i];
        for j in 0..ne {
            let eta = grid.eta_nodes()[j];
            dz.set(i, j, (1.0 + dpe.at(i, j)) / om);
            let combo = dpxe.at(i, j) - eta * vv * dpee.at(i, j) - vv * dpe.at(i, j);
            dxdz.set(i, j, combo / om - du / (om * om));
            dzz.set(i, j, dpee.at(i, j) / (om * om));
        }
    }
    sol.dz_psi = Some(dz);
    sol.dxdz_psi = Some(dxdz);
    sol.dzz_psi = Some(dzz);
}

/// Trace `Gamma(x) = Phi_eta(x, 1)` by the one-sided second-order stencil.
/// Vanishes at x = +-1 because Phi vanishes on the lateral edges.
pub fn trace_gamma(sol: &mut PotentialSolution) -> GridFunction1D {
    if let Some(g) = &sol.gamma {
        return g.clone();
    }
    let grid = sol.phi.grid().clone();
    let nx = grid.n_nodes_x();
    let ne = grid.n_nodes_eta();
    let k = grid.k();
    let mut vals = vec![0.0; nx];
    for (i, val) in vals.iter_mut().enumerate() {
        *val = (3.0 * sol.phi.at(i, ne - 1) - 4.0 * sol.phi.at(i, ne - 2)
            + sol.phi.at(i, ne - 3))
            / (2.0 * k);
    }
    let g = GridFunction1D::new(grid.grid_x().clone(), vals).expect("finite trace");
    sol.gamma = Some(g.clone());
    g
}

/// Electrostatic force density on the plate:
/// `g_eps(v)(x) = (1/(1+v)^2 + eps^2 V^2) (1 + Gamma)^2 >= 0`.
pub fn compute_g_eps(sol: &mut PotentialSolution) -> GridFunction1D {
    if let Some(g) = &sol.g_eps {
        return g.clone();
    }
    let gamma = trace_gamma(sol);
    let e2 = sol.eps * sol.eps;
    let vals: Vec<f64> = gamma
        .values()
        .iter()
        .enumerate()
        .map(|(i, &gm)| {
            let om = 1.0 + sol.v.u().values()[i];
            let vv = sol.v.v_field().values()[i];
            (1.0 / (om * om) + e2 * vv * vv) * (1.0 + gm) * (1.0 + gm)
        })
        .collect();
    let g = GridFunction1D::new(sol.v.grid().clone(), vals).expect("finite force");
    sol.g_eps = Some(g.clone());
    g
}

/// Electrostatic energy over the gap, evaluated in transformed coordinates
/// with Jacobian weight (1+v):
///
/// `E = int (1+v) [ eps^2 (Phi_x - eta V Phi_eta - eta V)^2 ] dx deta
///    + int (1+v) (dz psi)^2 dz`-part.
///
/// The z-part uses midpoints in eta, for which the discrete Jensen bound
/// `sum_j k (1 + dPhi_j)^2 >= (sum_j k (1 + dPhi_j))^2 = 1` is exact; the
/// lower energy bound `int dx/(1+v)` then holds to rounding on every input.
pub fn electrostatic_energy(sol: &PotentialSolution) -> f64 {
    let grid = sol.phi.grid();
    let h = grid.grid_x().h();
    let k = grid.k();
    let nx = grid.n_nodes_x();
    let ne = grid.n_nodes_eta();
    let e2 = sol.eps * sol.eps;
    let dpx = d_x_of(&sol.phi);
    let dpe = d_eta_of(&sol.phi);
    let mut total = 0.0;
    for i in 0..nx {
        let wx = if i == 0 || i == nx - 1 { 0.5 * h } else { h };
        let om = 1.0 + sol.v.u().values()[i];
        let vv = sol.v.v_field().values()[i];
        // x-part: nodal trapezoid in eta
        let mut xcol = 0.0;
        if e2 > 0.0 {
            for j in 0..ne {
                let we = if j == 0 || j == ne - 1 { 0.5 * k } else { k };
                let eta = grid.eta_nodes()[j];
                let dxpsi = dpx.at(i, j) - eta * vv * dpe.at(i, j) - eta * vv;
                xcol += we * dxpsi * dxpsi;
            }
        }
        // z-part: midpoint differences in eta
        let mut zcol = 0.0;
        for j in 0..ne - 1 {
            let dmid = (sol.phi.at(i, j + 1) - sol.phi.at(i, j)) / k;
            let t = 1.0 + dmid;
            zcol += k * t * t;
        }
        total += wx * (om * e2 * xcol + zcol / om);
    }
    total
}

/// Relative defect of the identity tying the second-derivative energy of psi
/// to a boundary functional of the trace:
///
/// `int_{Omega(v)} [eps^2 |dx dz psi|^2 + |dz^2 psi|^2] = (eps^2/2) int gamma_m^2 v'' dx`
///
/// with `gamma_m = (1+Gamma)/(1+v)`. Requires clamped derivatives
/// `v'(+-1) = 0`; the identity fails without them.
pub fn energy_identity_residual(sol: &mut PotentialSolution) -> Result<f64> {
    let du = sol.v.du();
    let n = du.values().len();
    let edge = du.values()[0].abs().max(du.values()[n - 1].abs());
    let tol = 4.0 * sol.v.grid().h() * (1.0 + du.linf());
    if edge > tol {
        return Err(Error::Precondition(format!(
            "energy identity needs v'(+-1) = 0; edge slope {edge:.3e} exceeds tolerance {tol:.3e}"
        )));
    }
    reconstruct_psi_fields(sol);
    let gamma = trace_gamma(sol);
    let dzz = sol.dzz_psi.as_ref().expect("reconstructed");
    let dxdz = sol.dxdz_psi.as_ref().expect("reconstructed");
    let e2 = sol.eps * sol.eps;

    let grid = sol.phi.grid();
    let h = grid.grid_x().h();
    let k = grid.k();
    let nx = grid.n_nodes_x();
    let ne = grid.n_nodes_eta();
    let mut lhs = 0.0;
    for i in 0..nx {
        let wx = if i == 0 || i == nx - 1 { 0.5 * h } else { h };
        let om = 1.0 + sol.v.u().values()[i];
        let mut col = 0.0;
        for j in 0..ne {
            let we = if j == 0 || j == ne - 1 { 0.5 * k } else { k };
            let a = dxdz.at(i, j);
            let b = dzz.at(i, j);
            col += we * (e2 * a * a + b * b);
        }
        lhs += wx * om * col;
    }

    let gm2_d2u: Vec<f64> = gamma
        .values()
        .iter()
        .enumerate()
        .map(|(i, &gm)| {
            let om = 1.0 + sol.v.u().values()[i];
            let gmv = (1.0 + gm) / om;
            gmv * gmv * sol.v.d2u().values()[i]
        })
        .collect();
    let rhs = 0.5
        * e2
        * integrate_1d(&GridFunction1D::new(sol.v.grid().clone(), gm2_d2u).expect("finite"));

    Ok((lhs - rhs).abs() / (lhs.abs() + rhs.abs() + 1e-300))
}

impl PotentialSolution {
    /// The four weighted L2 deviation norms from the limit potential; the
    /// mixed-derivative one is evaluated from the bracketed combination
    /// `(Phi_xeta - eta V Phi_etaeta - V Phi_eta)/(1+v)` directly.
    pub fn deviation_norms(&mut self) -> DeviationNorms {
        reconstruct_psi_fields(self);
        let grid = self.phi.grid().clone();
        let nx = grid.n_nodes_x();
        let ne = grid.n_nodes_eta();
        let dpe = d_eta_of(&self.phi);
        let dpee = d_eta2_of(&self.phi);
        let dpxe = d_x_of(&dpe);
        let mut dz_dev = GridFunction2D::zeros(grid.clone());
        let mut dxdz_dev = GridFunction2D::zeros(grid.clone());
        for i in 0..nx {
            let om = 1.0 + self.v.u().values()[i];
            let vv = self.v.v_field().values()[i];
            for j in 0..ne {
                let eta = grid.eta_nodes()[j];
                dz_dev.set(i, j, dpe.at(i, j) / om);
                let combo = dpxe.at(i, j) - eta * vv * dpee.at(i, j) - vv * dpe.at(i, j);
                dxdz_dev.set(i, j, combo / om);
            }
        }
        DeviationNorms {
            psi_l2: weighted_l2(&self.phi, &self.v),
            dz_l2: weighted_l2(&dz_dev, &self.v),
            dxdz_l2: weighted_l2(&dxdz_dev, &self.v),
            dzz_l2: weighted_l2(self.dzz_psi.as_ref().expect("reconstructed"), &self.v),
        }
    }

    /// The pair of L2(Omega(v)) distances of (psi, dz psi) from the limit
    /// potential of a possibly different profile `u0`, integrated over this
    /// solution's own domain:
    ///
    /// `|| psi - b_{u0} ||` and `|| dz psi - 1/(1+u0) ||`.
    pub fn limit_distance_pair(&mut self, u0: &DeflectionProfile) -> (f64, f64) {
        reconstruct_psi_fields(self);
        let grid = self.phi.grid().clone();
        let nx = grid.n_nodes_x();
        let ne = grid.n_nodes_eta();
        let dz = self.dz_psi.as_ref().expect("reconstructed");
        let mut t1 = GridFunction2D::zeros(grid.clone());
        let mut t2 = GridFunction2D::zeros(grid.clone());
        for i in 0..nx {
            let ue = self.v.u().values()[i];
            let u0i = u0.u().values()[i];
            for j in 0..ne {
                let eta = grid.eta_nodes()[j];
                // psi - b_{u0} = Phi + eta (u0 - ue)/(1+u0) at the same physical point
                t1.set(i, j, self.phi.at(i, j) + eta * (u0i - ue) / (1.0 + u0i));
                t2.set(i, j, dz.at(i, j) - 1.0 / (1.0 + u0i));
            }
        }
        (weighted_l2(&t1, &self.v), weighted_l2(&t2, &self.v))
    }
}

/// L2 error of the solver against the manufactured solution
/// `Phi*(x,eta) = (1-x^2) eta (1-eta)` for the standard test profile
/// `v = -0.3 (1-x^2)^2` at `eps = 0.5`, with the source built from the
/// analytic coefficient fields. Measures the plain (unweighted) L2 distance
/// on the rectangle; used for order-of-accuracy checks and as the
/// discretization floor for sweep fits.
pub fn manufactured_solution_error(grid: &Arc<RectGrid>) -> Result<f64> {
    let eps = 0.5;
    let e2 = eps * eps;
    let gx = grid.grid_x().clone();
    let v = DeflectionProfile::clamped_from_fn(gx, |x| -0.3 * (1.0 - x * x).powi(2))?;
    let coef = compute_coefficients(&v, eps, grid)?;

    let mut source = GridFunction2D::zeros(grid.clone());
    for (i, &x) in grid.grid_x().nodes().iter().enumerate() {
        // analytic derivatives of the test profile
        let u = -0.3 * (1.0 - x * x).powi(2);
        let du = 1.2 * x * (1.0 - x * x);
        let d2u = 1.2 - 3.6 * x * x;
        let om = 1.0 + u;
        let vv = du / om;
        for (j, &eta) in grid.eta_nodes().iter().enumerate() {
            let pxx = -2.0 * eta * (1.0 - eta);
            let pee = -2.0 * (1.0 - x * x);
            let pxe = -2.0 * x * (1.0 - 2.0 * eta);
            let pe = (1.0 - x * x) * (1.0 - 2.0 * eta);
            let axe = -2.0 * e2 * eta * vv;
            let aee = (1.0 + e2 * eta * eta * du * du) / (om * om);
            let be = e2 * eta * (2.0 * vv * vv - d2u / om);
            source.set(i, j, e2 * pxx + axe * pxe + aee * pee + be * pe);
        }
    }

    let sol = solve_phi_with_source(&coef, &source)?;
    let h = grid.grid_x().h();
    let k = grid.k();
    let nx = grid.n_nodes_x();
    let ne = grid.n_nodes_eta();
    let mut err_sq = 0.0;
    for (i, &x) in grid.grid_x().nodes().iter().enumerate() {
        let wx = if i == 0 || i == nx - 1 { 0.5 * h } else { h };
        for (j, &eta) in grid.eta_nodes().iter().enumerate() {
            let we = if j == 0 || j == ne - 1 { 0.5 * k } else { k };
            let exact = (1.0 - x * x) * eta * (1.0 - eta);
            let d = sol.phi.at(i, j) - exact;
            err_sq += wx * we * d * d;
        }
    }
    Ok(err_sq.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::IntervalGrid;

    fn rect(nx: usize, ne: usize) -> Arc<RectGrid> {
        RectGrid::new(IntervalGrid::new(nx).unwrap(), ne).unwrap()
    }

    fn quartic(grid: &Arc<RectGrid>, c: f64) -> DeflectionProfile {
        DeflectionProfile::clamped_from_fn(grid.grid_x().clone(), |x| {
            c * (1.0 - x * x).powi(2)
        })
        .unwrap()
    }

    #[test]
    fn coefficients_flat_profile() {
        let g = rect(32, 16);
        let v = DeflectionProfile::zero(g.grid_x().clone());
        let coef = compute_coefficients(&v, 0.3, &g).unwrap();
        assert_eq!(coef.a_xx(), 0.09);
        for i in 0..g.n_nodes_x() {
            for j in 0..g.n_nodes_eta() {
                assert_eq!(coef.f_v().at(i, j), 0.0);
                assert_eq!(coef.a_xeta().at(i, j), 0.0);
                assert!((coef.a_etaeta().at(i, j) - 1.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn coefficients_quartic_center_value() {
        // at x = 0: v = -0.3, v'' = 1.2, V = 0, so f_v = eps^2 eta 1.2/0.7
        let g = rect(256, 16);
        let v = quartic(&g, -0.3);
        let eps = 0.3;
        let coef = compute_coefficients(&v, eps, &g).unwrap();
        let i0 = 128; // x = 0
        let j = 8;
        let eta = g.eta_nodes()[j];
        let expected = eps * eps * eta * 1.2 / 0.7;
        assert!((coef.f_v().at(i0, j) - expected).abs() < 1e-3 * expected.abs());
        // structural identity
        for i in 0..g.n_nodes_x() {
            for j in 0..g.n_nodes_eta() {
                assert_eq!(coef.f_v().at(i, j), -coef.b_eta().at(i, j));
            }
        }
    }

    #[test]
    fn coefficients_eps_zero_degenerate() {
        let g = rect(64, 16);
        let v = quartic(&g, -0.4);
        let coef = compute_coefficients(&v, 0.0, &g).unwrap();
        for i in 0..g.n_nodes_x() {
            for j in 0..g.n_nodes_eta() {
                assert_eq!(coef.f_v().at(i, j), 0.0);
                assert_eq!(coef.a_xeta().at(i, j), 0.0);
                assert_eq!(coef.b_eta().at(i, j), 0.0);
                let om = 1.0 + v.u().values()[i];
                assert!((coef.a_etaeta().at(i, j) - 1.0 / (om * om)).abs() < 1e-15);
            }
        }
        assert_eq!(coef.a_xx(), 0.0);
    }

    #[test]
    fn flat_profile_gives_zero_potential() {
        let g = rect(32, 16);
        let v = DeflectionProfile::zero(g.grid_x().clone());
        let coef = compute_coefficients(&v, 0.4, &g).unwrap();
        let mut sol = solve_phi(&coef).unwrap();
        assert!(sol.phi().values().iter().all(|&p| p == 0.0));
        let g_eps = compute_g_eps(&mut sol);
        for &gv in g_eps.values() {
            assert!((gv - 1.0).abs() < 1e-14);
        }
        assert!((electrostatic_energy(&sol) - 2.0).abs() < 1e-6);
    }

    #[test]
    fn constant_profile_accepted_and_zero() {
        // v = -1/2 violates the clamped values but the PDE itself is happy:
        // V = 0 makes the source vanish.
        let g = rect(32, 16);
        let v = DeflectionProfile::new(crate::grid::GridFunction1D::from_fn(
            g.grid_x().clone(),
            |_| -0.5,
        ))
        .unwrap();
        let coef = compute_coefficients(&v, 0.25, &g).unwrap();
        let mut sol = solve_phi(&coef).unwrap();
        assert!(sol.phi().values().iter().all(|&p| p == 0.0));
        let g_eps = compute_g_eps(&mut sol);
        for &gv in g_eps.values() {
            assert!((gv - 4.0).abs() < 1e-13);
        }
    }

    #[test]
    fn eps_zero_reproduces_limit_bitwise() {
        let g = rect(64, 32);
        let v = quartic(&g, -0.35);
        let coef = compute_coefficients(&v, 0.0, &g).unwrap();
        let mut sol = solve_phi(&coef).unwrap();
        assert!(sol.phi().values().iter().all(|&p| p == 0.0));
        let g0 = compute_g_eps(&mut sol);
        for (i, &gv) in g0.values().iter().enumerate() {
            let om = 1.0 + v.u().values()[i];
            assert_eq!(gv, (1.0 / (om * om)) * 1.0); // Gamma = 0 exactly
        }
        // Jacobian consistency: energy equals int dx/(1+v) exactly
        let e = electrostatic_energy(&sol);
        let inv: Vec<f64> = v.u().values().iter().map(|&u| 1.0 / (1.0 + u)).collect();
        let direct = integrate_1d(
            &crate::grid::GridFunction1D::new(v.grid().clone(), inv).unwrap(),
        );
        assert!((e - direct).abs() <= 1e-10 * direct.abs());
        // reconstructed dz psi equals the limit 1/(1+v) exactly
        reconstruct_psi_fields(&mut sol);
        let dz = sol.dz_psi().unwrap();
        for i in 0..g.n_nodes_x() {
            let om = 1.0 + v.u().values()[i];
            for j in 0..g.n_nodes_eta() {
                assert!((dz.at(i, j) - 1.0 / om).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn flat_profile_reconstruction() {
        let g = rect(32, 16);
        let v = DeflectionProfile::zero(g.grid_x().clone());
        let coef = compute_coefficients(&v, 0.5, &g).unwrap();
        let mut sol = solve_phi(&coef).unwrap();
        reconstruct_psi_fields(&mut sol);
        for i in 0..g.n_nodes_x() {
            for j in 0..g.n_nodes_eta() {
                assert!((sol.dz_psi().unwrap().at(i, j) - 1.0).abs() < 1e-14);
                assert!(sol.dxdz_psi().unwrap().at(i, j).abs() < 1e-14);
                assert!(sol.dzz_psi().unwrap().at(i, j).abs() < 1e-14);
            }
        }
        let gamma = trace_gamma(&mut sol);
        assert!(gamma.linf() == 0.0);
    }

    #[test]
    fn comparison_bounds_on_bump() {
        let g = rect(128, 48);
        let v = quartic(&g, -0.5);
        for eps in [0.5, 0.1] {
            let coef = compute_coefficients(&v, eps, &g).unwrap();
            let sol = solve_phi(&coef).unwrap();
            assert!(
                sol.comparison_violation() <= 1e-8,
                "violation {} at eps {eps}",
                sol.comparison_violation()
            );
            assert!(sol.residual() <= 1e-10);
        }
    }

    #[test]
    fn trace_vanishes_at_lateral_edges() {
        let g = rect(64, 32);
        let v = quartic(&g, -0.3);
        let coef = compute_coefficients(&v, 0.2, &g).unwrap();
        let mut sol = solve_phi(&coef).unwrap();
        let gamma = trace_gamma(&mut sol);
        let n = gamma.values().len();
        assert_eq!(gamma.values()[0], 0.0);
        assert_eq!(gamma.values()[n - 1], 0.0);
    }

    #[test]
    fn energy_bracket_on_bump() {
        let g = rect(128, 64);
        let v = quartic(&g, -0.3);
        let lower: f64 = {
            let inv: Vec<f64> = v.u().values().iter().map(|&u| 1.0 / (1.0 + u)).collect();
            integrate_1d(&crate::grid::GridFunction1D::new(v.grid().clone(), inv).unwrap())
        };
        let upper: f64 = {
            let vals: Vec<f64> = v
                .u()
                .values()
                .iter()
                .zip(v.du().values())
                .map(|(&u, &du)| (1.0 + 0.01 * du * du) / (1.0 + u))
                .collect();
            integrate_1d(&crate::grid::GridFunction1D::new(v.grid().clone(), vals).unwrap())
        };
        let coef = compute_coefficients(&v, 0.1, &g).unwrap();
        let sol = solve_phi(&coef).unwrap();
        let e = electrostatic_energy(&sol);
        assert!(e >= lower - 1e-6, "E = {e}, lower = {lower}");
        assert!(e <= upper + 1e-6, "E = {e}, upper = {upper}");
    }

    #[test]
    fn energy_identity_residual_small_and_shrinking() {
        let mut residuals = Vec::new();
        for (nx, ne) in [(64usize, 32usize), (128, 64)] {
            let g = rect(nx, ne);
            let v = quartic(&g, -0.3);
            let coef = compute_coefficients(&v, 0.1, &g).unwrap();
            let mut sol = solve_phi(&coef).unwrap();
            residuals.push(energy_identity_residual(&mut sol).unwrap());
        }
        assert!(residuals[0] <= 0.05, "residual {residuals:?}");
        assert!(residuals[1] < residuals[0]);
    }

    #[test]
    fn energy_identity_requires_clamped_slope() {
        let g = rect(64, 16);
        // parabola has v'(+-1) != 0
        let v = DeflectionProfile::clamped_from_fn(g.grid_x().clone(), |x| {
            -0.3 * (1.0 - x * x)
        })
        .unwrap();
        let coef = compute_coefficients(&v, 0.1, &g).unwrap();
        let mut sol = solve_phi(&coef).unwrap();
        assert!(matches!(
            energy_identity_residual(&mut sol),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn manufactured_solution_second_order() {
        let e_coarse = manufactured_solution_error(&rect(64, 32)).unwrap();
        let e_fine = manufactured_solution_error(&rect(128, 64)).unwrap();
        let ratio = e_coarse / e_fine;
        assert!(ratio >= 3.5, "ratio {ratio} ({e_coarse} / {e_fine})");
    }

    #[test]
    fn dzz_norm_dual_quadrature() {
        // Integrate |dz^2 psi|^2 once in transformed coordinates with the
        // Jacobian weight and once on a per-column physical z-grid by linear
        // interpolation; the two quadratures agree to a couple of percent.
        let g = rect(128, 64);
        let v = quartic(&g, -0.3);
        let coef = compute_coefficients(&v, 0.1, &g).unwrap();
        let mut sol = solve_phi(&coef).unwrap();
        let norms = sol.deviation_norms();
        let dzz = sol.dzz_psi().unwrap();

        let h = g.grid_x().h();
        let nx = g.n_nodes_x();
        let ne = g.n_nodes_eta();
        let m_z = 200usize;
        let mut total = 0.0;
        for i in 0..nx {
            let wx = if i == 0 || i == nx - 1 { 0.5 * h } else { h };
            let depth = 1.0 + v.u().values()[i];
            let dz_step = depth / m_z as f64;
            let mut col = 0.0;
            for m in 0..=m_z {
                let wz = if m == 0 || m == m_z {
                    0.5 * dz_step
                } else {
                    dz_step
                };
                let eta = m as f64 / m_z as f64;
                let pos = eta * (ne - 1) as f64;
                let j0 = (pos.floor() as usize).min(ne - 2);
                let frac = pos - j0 as f64;
                let val = (1.0 - frac) * dzz.at(i, j0) + frac * dzz.at(i, j0 + 1);
                col += wz * val * val;
            }
            total += wx * col;
        }
        let physical = total.sqrt();
        let rel = (physical - norms.dzz_l2).abs() / norms.dzz_l2;
        assert!(rel <= 0.02, "dual quadrature mismatch {rel}");
    }

    #[test]
    fn psi_error_halves_with_eps() {
        let g = rect(128, 64);
        let v = quartic(&g, -0.3);
        let mut norms = Vec::new();
        for eps in [0.1, 0.05] {
            let coef = compute_coefficients(&v, eps, &g).unwrap();
            let mut sol = solve_phi(&coef).unwrap();
            norms.push(sol.deviation_norms().psi_l2);
        }
        // || Phi || should drop by at least ~2x when eps halves
        let ratio = norms[0] / norms[1];
        assert!(ratio >= 1.8, "ratio {ratio}");
    }

    #[test]
    fn grid_mismatch_rejected() {
        let g = rect(64, 16);
        let other = IntervalGrid::new(32).unwrap();
        let v = DeflectionProfile::zero(other);
        assert!(compute_coefficients(&v, 0.1, &g).is_err());
    }
}
