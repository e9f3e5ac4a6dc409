//! Uniform grids on the interval I = (-1,1) and the rectangle (-1,1)x(0,1),
//! finite-difference derivatives, trapezoid quadrature and discrete Sobolev
//! norms (integer and fractional orders).

use crate::error::{Error, Result};
use std::sync::Arc;

/// Uniform node grid on [-1,1] with `n_cells` cells, `n_cells + 1` nodes.
///
/// Nodes are built as `-1 + i*h`; for power-of-two cell counts the nodes are
/// exact dyadic rationals, which several polynomial identities in the tests
/// rely on.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalGrid {
    n_cells: usize,
    nodes: Vec<f64>,
    h: f64,
}

impl IntervalGrid {
    /// Minimum cell count that supports the clamped fourth-order stencil.
    pub const MIN_CELLS: usize = 8;

    pub fn new(n_cells: usize) -> Result<Arc<Self>> {
        if n_cells < Self::MIN_CELLS {
            return Err(Error::GridTooCoarse(format!(
                "interval grid needs at least {} cells, got {}",
                Self::MIN_CELLS,
                n_cells
            )));
        }
        let h = 2.0 / n_cells as f64;
        let mut nodes: Vec<f64> = (0..=n_cells).map(|i| -1.0 + i as f64 * h).collect();
        nodes[n_cells] = 1.0;
        Ok(Arc::new(IntervalGrid { n_cells, nodes, h }))
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    /// Number of nodes (`n_cells + 1`).
    pub fn n_nodes(&self) -> usize {
        self.n_cells + 1
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> f64 {
        self.nodes[i]
    }
}

/// Tensor grid on the rectangle (-1,1) x (0,1).
#[derive(Debug, Clone, PartialEq)]
pub struct RectGrid {
    grid_x: Arc<IntervalGrid>,
    n_eta: usize,
    eta_nodes: Vec<f64>,
    k: f64,
}

impl RectGrid {
    pub fn new(grid_x: Arc<IntervalGrid>, n_eta: usize) -> Result<Arc<Self>> {
        if n_eta < 4 {
            return Err(Error::GridTooCoarse(format!(
                "rectangle grid needs at least 4 eta cells, got {n_eta}"
            )));
        }
        let k = 1.0 / n_eta as f64;
        let mut eta_nodes: Vec<f64> = (0..=n_eta).map(|j| j as f64 * k).collect();
        eta_nodes[n_eta] = 1.0;
        Ok(Arc::new(RectGrid {
            grid_x,
            n_eta,
            eta_nodes,
            k,
        }))
    }

    pub fn grid_x(&self) -> &Arc<IntervalGrid> {
        &self.grid_x
    }

    pub fn n_eta(&self) -> usize {
        self.n_eta
    }

    pub fn eta_nodes(&self) -> &[f64] {
        &self.eta_nodes
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn n_nodes_x(&self) -> usize {
        self.grid_x.n_nodes()
    }

    pub fn n_nodes_eta(&self) -> usize {
        self.n_eta + 1
    }
}

/// Nodal values of a scalar function on an [`IntervalGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction1D {
    grid: Arc<IntervalGrid>,
    values: Vec<f64>,
}

impl GridFunction1D {
    pub fn new(grid: Arc<IntervalGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_nodes() {
            return Err(Error::InvalidParameter(format!(
                "grid function length {} does not match node count {}",
                values.len(),
                grid.n_nodes()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "grid function contains non-finite values".into(),
            ));
        }
        Ok(GridFunction1D { grid, values })
    }

    pub fn from_fn(grid: Arc<IntervalGrid>, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.nodes().iter().map(|&x| f(x)).collect();
        GridFunction1D { grid, values }
    }

    pub fn zeros(grid: Arc<IntervalGrid>) -> Self {
        let values = vec![0.0; grid.n_nodes()];
        GridFunction1D { grid, values }
    }

    pub fn grid(&self) -> &Arc<IntervalGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn linf(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Pointwise difference on the same grid.
    pub fn sub(&self, other: &GridFunction1D) -> GridFunction1D {
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect();
        GridFunction1D {
            grid: self.grid.clone(),
            values,
        }
    }
}

/// Nodal values on a [`RectGrid`], stored x-major: index `i * (n_eta+1) + j`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction2D {
    grid: Arc<RectGrid>,
    values: Vec<f64>,
}

impl GridFunction2D {
    pub fn new(grid: Arc<RectGrid>, values: Vec<f64>) -> Result<Self> {
        let expect = grid.n_nodes_x() * grid.n_nodes_eta();
        if values.len() != expect {
            return Err(Error::InvalidParameter(format!(
                "2d grid function length {} does not match node count {}",
                values.len(),
                expect
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "2d grid function contains non-finite values".into(),
            ));
        }
        Ok(GridFunction2D { grid, values })
    }

    pub fn zeros(grid: Arc<RectGrid>) -> Self {
        let values = vec![0.0; grid.n_nodes_x() * grid.n_nodes_eta()];
        GridFunction2D { grid, values }
    }

    pub fn from_fn(grid: Arc<RectGrid>, f: impl Fn(f64, f64) -> f64) -> Self {
        let ne = grid.n_nodes_eta();
        let mut values = Vec::with_capacity(grid.n_nodes_x() * ne);
        for &x in grid.grid_x().nodes() {
            for &eta in grid.eta_nodes() {
                values.push(f(x, eta));
            }
        }
        let _ = ne;
        GridFunction2D { grid, values }
    }

    pub fn grid(&self) -> &Arc<RectGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.grid.n_nodes_eta() + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let ne = self.grid.n_nodes_eta();
        self.values[i * ne + j] = v;
    }
}

/// Second-order finite-difference derivative of the given order (1 or 2):
/// centered stencils in the interior, one-sided second-order stencils at the
/// endpoints. Exact on polynomials of degree <= 2.
pub fn derivative_1d(f: &GridFunction1D, order: u32) -> Result<GridFunction1D> {
    let n = f.grid().n_nodes();
    let need = order as usize + 2;
    if n < need.max(4) {
        return Err(Error::GridTooCoarse(format!(
            "derivative of order {order} needs at least {} nodes, got {n}",
            need.max(4)
        )));
    }
    let h = f.grid().h();
    let v = f.values();
    let mut out = vec![0.0; n];
    match order {
        1 => {
            for i in 1..n - 1 {
                out[i] = (v[i + 1] - v[i - 1]) / (2.0 * h);
            }
            out[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h);
            out[n - 1] = (3.0 * v[n - 1] - 4.0 * v[n - 2] + v[n - 3]) / (2.0 * h);
        }
        2 => {
            let h2 = h * h;
            for i in 1..n - 1 {
                out[i] = (v[i + 1] - 2.0 * v[i] + v[i - 1]) / h2;
            }
            out[0] = (2.0 * v[0] - 5.0 * v[1] + 4.0 * v[2] - v[3]) / h2;
            out[n - 1] = (2.0 * v[n - 1] - 5.0 * v[n - 2] + 4.0 * v[n - 3] - v[n - 4]) / h2;
        }
        _ => {
            return Err(Error::InvalidParameter(format!(
                "derivative order must be 1 or 2, got {order}"
            )))
        }
    }
    GridFunction1D::new(f.grid().clone(), out)
}

/// Composite trapezoid rule over [-1,1]. Exact for affine integrands.
pub fn integrate_1d(f: &GridFunction1D) -> f64 {
    trapezoid(f.values(), f.grid().h())
}

pub(crate) fn trapezoid(v: &[f64], h: f64) -> f64 {
    let n = v.len();
    let inner: f64 = v[1..n - 1].iter().sum();
    h * (0.5 * v[0] + inner + 0.5 * v[n - 1])
}

/// Tensor-product trapezoid rule over the rectangle.
pub fn integrate_rect(f: &GridFunction2D) -> f64 {
    let g = f.grid();
    let h = g.grid_x().h();
    let k = g.k();
    let nx = g.n_nodes_x();
    let ne = g.n_nodes_eta();
    let mut total = 0.0;
    for i in 0..nx {
        let wx = if i == 0 || i == nx - 1 { 0.5 * h } else { h };
        let row = &f.values()[i * ne..(i + 1) * ne];
        total += wx * trapezoid(row, k);
    }
    total
}

/// Gagliardo double-sum seminorm squared with exponent `sigma` in (0,1):
/// `|g|^2 = sum_i sum_{j != i} h^2 |g_i - g_j|^2 / |x_i - x_j|^{1+2 sigma}`.
fn gagliardo_sq(g: &[f64], nodes: &[f64], h: f64, sigma: f64) -> f64 {
    let n = g.len();
    let mut total = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let d = nodes[j] - nodes[i];
            let dg = g[i] - g[j];
            total += dg * dg / d.powf(1.0 + 2.0 * sigma);
        }
    }
    2.0 * h * h * total
}

/// Discrete H^s norm for s in [0,3].
///
/// Integer part: `sqrt(sum_{j<=m} ||d^j f||_{L2}^2)` with derivatives from
/// [`derivative_1d`] (third order obtained by composing a first on a second
/// difference). A fractional remainder sigma adds the Gagliardo seminorm of
/// the m-th derivative; the O(n^2) double sum is acceptable at the grid sizes
/// used here.
pub fn sobolev_norm(f: &GridFunction1D, s: f64) -> Result<f64> {
    if !(0.0..=3.0 + 1e-12).contains(&s) {
        return Err(Error::UnsupportedNormOrder(s));
    }
    let m = s.floor() as usize;
    let (m, sigma) = if (s - s.floor()) < 1e-12 {
        (m, 0.0)
    } else {
        (m, s - m as f64)
    };
    let h = f.grid().h();
    let mut total = 0.0;
    let mut current = f.clone();
    let sq = |g: &GridFunction1D| {
        let v2: Vec<f64> = g.values().iter().map(|v| v * v).collect();
        trapezoid(&v2, h)
    };
    total += sq(&current);
    for j in 1..=m {
        current = if j == 2 {
            // direct second difference of f is more accurate than D1(D1 f)
            derivative_1d(f, 2)?
        } else {
            derivative_1d(&current, 1)?
        };
        total += sq(&current);
    }
    if sigma > 0.0 {
        total += gagliardo_sq(current.values(), f.grid().nodes(), h, sigma);
    }
    Ok(total.sqrt())
}
