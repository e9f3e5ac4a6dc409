//! Banded LU factorization with partial pivoting.
//!
//! Storage follows the LAPACK general-band convention: an n-column array with
//! `2*kl + ku + 1` rows, entry (i, j) stored at row `kl + ku + i - j` of
//! column j. The extra `kl` leading rows hold fill-in created by row
//! interchanges.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let ldab = 2 * kl + ku + 1;
        BandMatrix {
            n,
            kl,
            ku,
            ldab,
            data: vec![0.0; ldab * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.n && j < self.n);
        debug_assert!(i + self.ku + self.kl >= j && j + self.kl >= i, "out of band");
        j * self.ldab + (self.kl + self.ku + i - j)
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let s = self.slot(i, j);
        self.data[s] = v;
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let s = self.slot(i, j);
        self.data[s] += v;
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i + self.ku >= j && j + self.kl >= i {
            self.data[self.slot(i, j)]
        } else {
            0.0
        }
    }

    /// y = A x over the declared band (valid before factorization).
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        let mut y = vec![0.0; self.n];
        for j in 0..self.n {
            let xj = x[j];
            if xj == 0.0 {
                continue;
            }
            let i0 = j.saturating_sub(self.ku);
            let i1 = (j + self.kl).min(self.n - 1);
            for i in i0..=i1 {
                y[i] += self.data[self.slot(i, j)] * xj;
            }
        }
        y
    }

    /// Maximum relative asymmetry |A - A^T| / max|A| over the band.
    pub fn asymmetry(&self) -> f64 {
        let scale = self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst = 0.0_f64;
        for j in 0..self.n {
            let i1 = (j + self.kl).min(self.n - 1);
            for i in j..=i1 {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst / scale
    }

    /// LU factorization with partial pivoting (LAPACK `dgbtf2` scheme).
    pub fn factor(mut self) -> Result<BandLu> {
        let (n, kl, ku, ldab) = (self.n, self.kl, self.ku, self.ldab);
        let kv = kl + ku;
        let mut ipiv = vec![0usize; n];
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            // pivot search in column j, rows j..=j+km
            let mut jp = 0usize;
            let mut pmax = 0.0_f64;
            for ii in 0..=km {
                let v = self.data[j * ldab + kv + ii].abs();
                if v > pmax {
                    pmax = v;
                    jp = ii;
                }
            }
            ipiv[j] = j + jp;
            let piv = self.data[j * ldab + kv + jp];
            if piv == 0.0 || !piv.is_finite() {
                return Err(Error::SolverFailure(format!(
                    "banded LU hit a zero/non-finite pivot at column {j} of {n}"
                )));
            }
            let jmax = (j + kv).min(n - 1);
            if jp != 0 {
                // swap rows j and j+jp across columns j..=jmax
                for jj in j..=jmax {
                    let a = jj * ldab + kv + j - jj;
                    let b = a + jp;
                    self.data.swap(a, b);
                }
            }
            if km > 0 {
                let d = self.data[j * ldab + kv];
                for ii in 1..=km {
                    self.data[j * ldab + kv + ii] /= d;
                }
                for jj in j + 1..=jmax {
                    let ujj = self.data[jj * ldab + kv + j - jj];
                    if ujj != 0.0 {
                        for ii in 1..=km {
                            self.data[jj * ldab + kv + j - jj + ii] -=
                                self.data[j * ldab + kv + ii] * ujj;
                        }
                    }
                }
            }
        }
        Ok(BandLu {
            n,
            kl,
            ku,
            ldab,
            data: self.data,
            ipiv,
        })
    }
}

#[derive(Debug, Clone)]
pub struct BandLu {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    data: Vec<f64>,
    ipiv: Vec<usize>,
}

impl BandLu {
    pub fn solve_in_place(&self, b: &mut [f64]) {
        assert_eq!(b.len(), self.n);
        let (n, kl, ldab) = (self.n, self.kl, self.ldab);
        let kv = kl + self.ku;
        // forward: P and L (unit lower, kl multipliers per column)
        for j in 0..n {
            let p = self.ipiv[j];
            if p != j {
                b.swap(j, p);
            }
            let km = kl.min(n - 1 - j);
            let bj = b[j];
            if bj != 0.0 {
                for ii in 1..=km {
                    b[j + ii] -= self.data[j * ldab + kv + ii] * bj;
                }
            }
        }
        // back substitution with U (bandwidth kv)
        for j in (0..n).rev() {
            let bj = b[j] / self.data[j * ldab + kv];
            b[j] = bj;
            if bj != 0.0 {
                let i0 = j.saturating_sub(kv);
                for i in i0..j {
                    b[i] -= self.data[j * ldab + kv + i - j] * bj;
                }
            }
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // dense Gaussian elimination with partial pivoting, test oracle only
    fn dense_solve(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
        let n = b.len();
        let mut m: Vec<Vec<f64>> = a.to_vec();
        let mut x = b.to_vec();
        for c in 0..n {
            let p = (c..n).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs())).unwrap();
            m.swap(c, p);
            x.swap(c, p);
            for r in c + 1..n {
                let f = m[r][c] / m[c][c];
                for cc in c..n {
                    m[r][cc] -= f * m[c][cc];
                }
                x[r] -= f * x[c];
            }
        }
        for c in (0..n).rev() {
            x[c] /= m[c][c];
            for r in 0..c {
                x[r] -= m[r][c] * x[c];
                m[r][c] = 0.0;
            }
        }
        x
    }

    fn splitmix(state: &mut u64) -> f64 {
        *state = state.wrapping_add(0x9E3779B97F4A7C15);
        let mut z = *state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        z = z ^ (z >> 31);
        (z >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    }

    #[test]
    fn tridiagonal_known_solution() {
        // -x'' = 1 on 5 unknowns, h = 1: A = tridiag(-1, 2, -1)
        let n = 5;
        let mut a = BandMatrix::zeros(n, 1, 1);
        for i in 0..n {
            a.set(i, i, 2.0);
            if i > 0 {
                a.set(i, i - 1, -1.0);
            }
            if i + 1 < n {
                a.set(i, i + 1, -1.0);
            }
        }
        let lu = a.factor().unwrap();
        let x = lu.solve(&vec![1.0; n]);
        // exact: x_i = i(n+1-i)/2 at 1-based i
        for (i, &xi) in x.iter().enumerate() {
            let ii = (i + 1) as f64;
            let exact = ii * (n as f64 + 1.0 - ii) / 2.0;
            assert!((xi - exact).abs() < 1e-12, "x[{i}] = {xi}, exact {exact}");
        }
    }

    #[test]
    fn random_banded_matches_dense() {
        let mut st = 42u64;
        for &(n, kl, ku) in &[(12usize, 2usize, 3usize), (30, 4, 1), (25, 5, 5), (9, 1, 1)] {
            let mut band = BandMatrix::zeros(n, kl, ku);
            let mut dense = vec![vec![0.0; n]; n];
            for i in 0..n {
                for j in 0..n {
                    if i + ku >= j && j + kl >= i {
                        let v = splitmix(&mut st) + if i == j { 3.0 } else { 0.0 };
                        band.set(i, j, v);
                        dense[i][j] = v;
                    }
                }
            }
            let b: Vec<f64> = (0..n).map(|_| splitmix(&mut st)).collect();
            let x_band = band.factor().unwrap().solve(&b);
            let x_dense = dense_solve(&dense, &b);
            for i in 0..n {
                assert!(
                    (x_band[i] - x_dense[i]).abs() < 1e-10,
                    "n={n} kl={kl} ku={ku} i={i}: {} vs {}",
                    x_band[i],
                    x_dense[i]
                );
            }
        }
    }

    #[test]
    fn pivoting_handles_zero_diagonal() {
        // [[0, 1], [1, 0]] requires an interchange
        let mut a = BandMatrix::zeros(2, 1, 1);
        a.set(0, 1, 1.0);
        a.set(1, 0, 1.0);
        let lu = a.factor().unwrap();
        let x = lu.solve(&[2.0, 3.0]);
        assert!((x[0] - 3.0).abs() < 1e-15);
        assert!((x[1] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn singular_matrix_reported() {
        let mut a = BandMatrix::zeros(3, 1, 1);
        a.set(0, 0, 1.0);
        a.set(1, 1, 0.0);
        a.set(2, 2, 1.0);
        assert!(matches!(a.factor(), Err(Error::SolverFailure(_))));
    }

    #[test]
    fn matvec_against_dense() {
        let mut st = 7u64;
        let (n, kl, ku) = (15usize, 3usize, 2usize);
        let mut band = BandMatrix::zeros(n, kl, ku);
        let mut dense = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                if i + ku >= j && j + kl >= i {
                    let v = splitmix(&mut st);
                    band.set(i, j, v);
                    dense[i][j] = v;
                }
            }
        }
        let x: Vec<f64> = (0..n).map(|_| splitmix(&mut st)).collect();
        let y = band.matvec(&x);
        for i in 0..n {
            let exact: f64 = (0..n).map(|j| dense[i][j] * x[j]).sum();
            assert!((y[i] - exact).abs() < 1e-13);
        }
    }
}
