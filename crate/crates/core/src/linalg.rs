//! Small dense linear algebra: Cholesky solves for SPD matrices, rank-revealing
//! QR for constraint matrices, and LU solves of KKT saddle-point systems.
//!
//! Every system handled here is tiny (a kernel stencil has at most a few dozen
//! sites and a handful of moment constraints), so plain row-major storage and
//! direct factorizations are used throughout.

use std::fmt;
use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Numerical thresholds shared by the solvers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToleranceSet {
    /// Cholesky pivots below `spd_pivot * max diagonal` reject the matrix.
    pub spd_pivot: f64,
    /// Relative pivot threshold for rank detection and LU singularity.
    pub rank_pivot: f64,
    /// Equality and bound feasibility.
    pub feasibility: f64,
    /// Complementary slackness and multiplier sign checks.
    pub complementarity: f64,
    /// Weights at or below this value do not count as support.
    pub support: f64,
    /// Largest equality violation for which phase 1 still reports feasible.
    pub phase1: f64,
    /// Proximal term of the phase-1 auxiliary problem.
    pub phase1_regularization: f64,
    /// Penalty used by the soft-constraint fallback.
    pub soft_penalty: f64,
    /// Active-set iteration cap is `max_iter_factor * n`.
    pub max_iter_factor: usize,
}

impl Default for ToleranceSet {
    fn default() -> Self {
        Self {
            spd_pivot: 1e-14,
            rank_pivot: 1e-12,
            feasibility: 1e-10,
            complementarity: 1e-10,
            support: 1e-14,
            phase1: 1e-9,
            phase1_regularization: 1e-12,
            soft_penalty: 1e8,
            max_iter_factor: 50,
        }
    }
}

/// Row-major dense matrix.
#[derive(Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::LengthMismatch {
                expected: rows * cols,
                found: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("matrix entries must be finite".into()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![1.0; n])
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    /// Builds a matrix from a slice of equally long rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            if row.len() != cols {
                return Err(Error::LengthMismatch {
                    expected: cols,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::new(rows.len(), cols, data)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols))
            .map(|i| self[(i, i)])
            .collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    /// `self * x`
    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.cols, x.len())?;
        Ok((0..self.rows).map(|i| dot(self.row(i), x)).collect())
    }

    /// `selfᵀ * y`
    pub fn tr_mul_vec(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_len(self.rows, y.len())?;
        let mut out = vec![0.0; self.cols];
        for (i, &yi) in y.iter().enumerate() {
            axpy(yi, self.row(i), &mut out);
        }
        Ok(out)
    }

    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        check_len(self.cols, other.rows)?;
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        Ok(out)
    }

    /// Columns `idx` of `self`, in the given order.
    pub fn select_columns(&self, idx: &[usize]) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.rows, idx.len());
        for i in 0..self.rows {
            for (jj, &j) in idx.iter().enumerate() {
                out[(i, jj)] = self[(i, j)];
            }
        }
        out
    }

    /// Principal submatrix on `idx`.
    pub fn select_principal(&self, idx: &[usize]) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(idx.len(), idx.len());
        for (ii, &i) in idx.iter().enumerate() {
            for (jj, &j) in idx.iter().enumerate() {
                out[(ii, jj)] = self[(i, j)];
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Symmetric to `rel_tol` relative to the largest entry.
    pub fn is_symmetric(&self, rel_tol: f64) -> bool {
        if !self.is_square() {
            return false;
        }
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        (0..self.rows)
            .all(|i| (0..i).all(|j| (self[(i, j)] - self[(j, i)]).abs() <= rel_tol * scale))
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "DenseMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::LengthMismatch { expected, found })
    }
}

#[inline]
pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// y += a * x
#[inline]
pub fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

pub fn norm_inf(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Lower-triangular Cholesky factor `L` with `L Lᵀ = matrix`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: DenseMatrix,
}

impl Cholesky {
    pub fn factor(matrix: &DenseMatrix, tol: &ToleranceSet) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::InvalidInput("Cholesky needs a square matrix".into()));
        }
        let n = matrix.rows();
        let max_diag = matrix
            .diagonal()
            .iter()
            .fold(0.0_f64, |m, d| m.max(d.abs()));
        let threshold = tol.spd_pivot * max_diag;
        let mut l = DenseMatrix::zeros(n, n);
        for j in 0..n {
            let mut d = matrix[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if !(d > threshold) || d <= 0.0 {
                return Err(Error::NotSpd { pivot: d, index: j });
            }
            let d = d.sqrt();
            l[(j, j)] = d;
            for i in j + 1..n {
                let mut s = matrix[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / d;
            }
        }
        Ok(Self { l })
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = self.l.rows();
        check_len(n, rhs.len())?;
        let l = &self.l;
        let mut y = rhs.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= l[(i, k)] * y[k];
            }
            y[i] = s / l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s -= l[(k, i)] * y[k];
            }
            y[i] = s / l[(i, i)];
        }
        Ok(y)
    }
}

/// Solves `matrix · x = rhs` for a symmetric positive-definite `matrix`.
pub fn solve_spd(matrix: &DenseMatrix, rhs: &[f64]) -> Result<Vec<f64>> {
    solve_spd_with(matrix, rhs, &ToleranceSet::default())
}

pub fn solve_spd_with(matrix: &DenseMatrix, rhs: &[f64], tol: &ToleranceSet) -> Result<Vec<f64>> {
    check_len(matrix.rows(), rhs.len())?;
    let chol = Cholesky::factor(matrix, tol)?;
    let mut x = chol.solve(rhs)?;
    // one step of iterative refinement
    let r: Vec<f64> = matrix
        .mul_vec(&x)?
        .iter()
        .zip(rhs)
        .map(|(ax, b)| b - ax)
        .collect();
    let dx = chol.solve(&r)?;
    axpy(1.0, &dx, &mut x);
    Ok(x)
}

/// LU factorization with partial (row) pivoting.
#[derive(Debug, Clone)]
pub struct Lu {
    lu: DenseMatrix,
    perm: Vec<usize>,
}

impl Lu {
    /// Fails with `Error::Singular` when a pivot is below
    /// `rank_pivot * max |entry|`.
    pub fn factor(matrix: &DenseMatrix, tol: &ToleranceSet) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::InvalidInput("LU needs a square matrix".into()));
        }
        let n = matrix.rows();
        let threshold = tol.rank_pivot * matrix.max_abs();
        let mut lu = matrix.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (p, pmax) = (k..n)
                .map(|i| (i, lu[(i, k)].abs()))
                .fold(
                    (k, -1.0),
                    |best, cur| if cur.1 > best.1 { cur } else { best },
                );
            if !(pmax > threshold) || pmax == 0.0 {
                return Err(Error::Singular { index: k });
            }
            if p != k {
                for j in 0..n {
                    lu.data.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let pivot = lu[(k, k)];
            for i in k + 1..n {
                let f = lu[(i, k)] / pivot;
                lu[(i, k)] = f;
                if f != 0.0 {
                    for j in k + 1..n {
                        let v = lu[(k, j)];
                        lu[(i, j)] -= f * v;
                    }
                }
            }
        }
        Ok(Self { lu, perm })
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = self.lu.rows();
        check_len(n, rhs.len())?;
        let lu = &self.lu;
        let mut y: Vec<f64> = self.perm.iter().map(|&p| rhs[p]).collect();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= lu[(i, k)] * y[k];
            }
            y[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s -= lu[(i, k)] * y[k];
            }
            y[i] = s / lu[(i, i)];
        }
        Ok(y)
    }
}

/// Householder QR of an `r × c` matrix with column pivoting.
///
/// Only what rank detection and null-space extraction need is kept: the
/// reflectors, the diagonal of `R`, and the column permutation.
#[derive(Debug, Clone)]
pub struct PivotedQr {
    rows: usize,
    /// Householder vectors, one per eliminated column, each of length `rows`.
    reflectors: Vec<Vec<f64>>,
    r_diag: Vec<f64>,
    perm: Vec<usize>,
    rank: usize,
}

impl PivotedQr {
    pub fn factor(matrix: &DenseMatrix, tol: &ToleranceSet) -> Self {
        let (rows, cols) = (matrix.rows(), matrix.cols());
        let threshold = tol.rank_pivot * matrix.max_abs();
        let mut cols_data: Vec<Vec<f64>> = (0..cols).map(|j| matrix.column(j)).collect();
        let mut perm: Vec<usize> = (0..cols).collect();
        let mut reflectors = Vec::new();
        let mut r_diag = Vec::new();
        let mut rank = 0;
        for k in 0..rows.min(cols) {
            // pivot on the largest remaining column norm
            let (p, pnorm) = (k..cols)
                .map(|j| {
                    (
                        j,
                        cols_data[j][k..].iter().map(|v| v * v).sum::<f64>().sqrt(),
                    )
                })
                .fold(
                    (k, -1.0),
                    |best, cur| if cur.1 > best.1 { cur } else { best },
                );
            if !(pnorm > threshold) || pnorm == 0.0 {
                break;
            }
            cols_data.swap(k, p);
            perm.swap(k, p);
            let x = &cols_data[k];
            let alpha = if x[k] >= 0.0 { -pnorm } else { pnorm };
            let mut v = vec![0.0; rows];
            v[k] = x[k] - alpha;
            v[k + 1..].copy_from_slice(&x[k + 1..]);
            let vnorm2: f64 = v.iter().map(|t| t * t).sum();
            for col in cols_data.iter_mut().skip(k) {
                apply_reflector(&v, vnorm2, col);
            }
            r_diag.push(alpha);
            reflectors.push((v, vnorm2));
            rank += 1;
        }
        Self {
            rows,
            reflectors: reflectors
                .into_iter()
                .map(|(v, n2)| {
                    // store normalized so that H = I - 2 v vᵀ
                    let s = n2.sqrt();
                    v.into_iter().map(|t| t / s).collect()
                })
                .collect(),
            r_diag,
            perm,
            rank,
        }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn r_diagonal(&self) -> &[f64] {
        &self.r_diag
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    /// Orthonormal basis for the orthogonal complement of the column space,
    /// as `rows - rank` vectors of length `rows`.
    pub fn complement_basis(&self) -> Vec<Vec<f64>> {
        (self.rank..self.rows)
            .map(|j| {
                let mut e = vec![0.0; self.rows];
                e[j] = 1.0;
                for v in self.reflectors.iter().rev() {
                    apply_reflector(v, 1.0, &mut e);
                }
                e
            })
            .collect()
    }
}

/// x ← (I − 2 v vᵀ / ‖v‖²) x
fn apply_reflector(v: &[f64], vnorm2: f64, x: &mut [f64]) {
    if vnorm2 == 0.0 {
        return;
    }
    let s = 2.0 * dot(v, x) / vnorm2;
    axpy(-s, v, x);
}

/// Numerical rank of `matrix` using the scale-relative pivot threshold.
pub fn rank(matrix: &DenseMatrix, tol: &ToleranceSet) -> usize {
    PivotedQr::factor(matrix, tol).rank()
}

/// Equality-constrained quadratic stationarity system
///
/// ```text
///     H x − Cᵀ λ + g₀ = 0
///     C x           = b
/// ```
#[derive(Debug, Clone)]
pub struct KktSystem {
    pub hessian: DenseMatrix,
    pub constraints: DenseMatrix,
    pub objective_gradient: Vec<f64>,
    pub rhs: Vec<f64>,
}

impl KktSystem {
    pub fn new(
        hessian: DenseMatrix,
        constraints: DenseMatrix,
        objective_gradient: Vec<f64>,
        rhs: Vec<f64>,
    ) -> Result<Self> {
        let n = hessian.rows();
        if !hessian.is_square() {
            return Err(Error::InvalidInput("hessian must be square".into()));
        }
        check_len(n, constraints.cols())?;
        check_len(n, objective_gradient.len())?;
        check_len(constraints.rows(), rhs.len())?;
        if constraints.rows() > n {
            return Err(Error::RankDeficientConstraints {
                rank: n,
                expected: constraints.rows(),
            });
        }
        if !hessian.is_symmetric(1e-12) {
            return Err(Error::InvalidInput("hessian must be symmetric".into()));
        }
        Ok(Self {
            hessian,
            constraints,
            objective_gradient,
            rhs,
        })
    }

    pub fn n(&self) -> usize {
        self.hessian.rows()
    }

    pub fn m(&self) -> usize {
        self.constraints.rows()
    }

    /// `(‖H x − Cᵀλ + g₀‖∞, ‖C x − b‖∞)`
    pub fn residuals(&self, x: &[f64], lambda: &[f64]) -> Result<(f64, f64)> {
        let mut stat = self.hessian.mul_vec(x)?;
        axpy(-1.0, &self.constraints.tr_mul_vec(lambda)?, &mut stat);
        axpy(1.0, &self.objective_gradient, &mut stat);
        let mut feas = self.constraints.mul_vec(x)?;
        axpy(-1.0, &self.rhs, &mut feas);
        Ok((norm_inf(&stat), norm_inf(&feas)))
    }
}

/// Solves the KKT system for `(x, λ)`.
pub fn solve_kkt(system: &KktSystem) -> Result<(Vec<f64>, Vec<f64>)> {
    solve_kkt_with(system, &ToleranceSet::default())
}

pub fn solve_kkt_with(system: &KktSystem, tol: &ToleranceSet) -> Result<(Vec<f64>, Vec<f64>)> {
    let (n, m) = (system.n(), system.m());
    let neg_g: Vec<f64> = system.objective_gradient.iter().map(|g| -g).collect();
    // Symmetric diagonal scaling of the x block so that H has unit diagonal.
    // Kernel Hessians are W⁻¹ and span many orders of magnitude.
    let scale: Vec<f64> = system
        .hessian
        .diagonal()
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d.sqrt() } else { 1.0 })
        .collect();

    if m == 0 {
        let mut scaled = system.hessian.clone();
        for i in 0..n {
            for j in 0..n {
                scaled[(i, j)] *= scale[i] * scale[j];
            }
        }
        let rhs: Vec<f64> = neg_g.iter().zip(&scale).map(|(g, s)| g * s).collect();
        let y = solve_spd_with(&scaled, &rhs, tol)?;
        return Ok((
            y.iter().zip(&scale).map(|(y, s)| y * s).collect(),
            Vec::new(),
        ));
    }

    // Rank of C via pivoted QR of Cᵀ (column pivoting of Cᵀ is row pivoting of C).
    let qr = PivotedQr::factor(&system.constraints.transpose(), tol);
    if qr.rank() < m {
        return Err(Error::RankDeficientConstraints {
            rank: qr.rank(),
            expected: m,
        });
    }

    // Reduced Hessian Zᵀ H Z on the null space of C must be SPD.
    let z = qr.complement_basis();
    if !z.is_empty() {
        let hz: Vec<Vec<f64>> = z
            .iter()
            .map(|zj| system.hessian.mul_vec(zj))
            .collect::<Result<_>>()?;
        let k = z.len();
        let mut reduced = DenseMatrix::zeros(k, k);
        for a in 0..k {
            for b in 0..=a {
                let v = dot(&z[a], &hz[b]);
                reduced[(a, b)] = v;
                reduced[(b, a)] = v;
            }
        }
        if let Err(Error::NotSpd { .. }) = Cholesky::factor(&reduced, tol) {
            return Err(Error::NotSpdOnNullSpace);
        }
    }

    // Scaled saddle matrix [[S H S, −S Cᵀ], [C S, 0]] in unknowns (y, λ), x = S y.
    let dim = n + m;
    let mut k = DenseMatrix::zeros(dim, dim);
    for i in 0..n {
        for j in 0..n {
            k[(i, j)] = scale[i] * system.hessian[(i, j)] * scale[j];
        }
        for r in 0..m {
            let c = system.constraints[(r, i)] * scale[i];
            k[(i, n + r)] = -c;
            k[(n + r, i)] = c;
        }
    }
    let mut rhs = Vec::with_capacity(dim);
    rhs.extend(neg_g.iter().zip(&scale).map(|(g, s)| g * s));
    rhs.extend_from_slice(&system.rhs);

    let lu = Lu::factor(&k, tol).map_err(|_| Error::NotSpdOnNullSpace)?;
    let mut sol = lu.solve(&rhs)?;
    // iterative refinement on the scaled system
    for _ in 0..2 {
        let ks = k.mul_vec(&sol)?;
        let r: Vec<f64> = rhs.iter().zip(&ks).map(|(b, v)| b - v).collect();
        let d = lu.solve(&r)?;
        axpy(1.0, &d, &mut sol);
    }
    let x = sol[..n].iter().zip(&scale).map(|(y, s)| y * s).collect();
    let lambda = sol[n..].to_vec();
    Ok((x, lambda))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn mat(rows: &[&[f64]]) -> DenseMatrix {
        DenseMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn spd_identity() {
        let x = solve_spd(&DenseMatrix::identity(3), &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(x, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn spd_diagonal() {
        let x = solve_spd(&mat(&[&[4.0, 0.0], &[0.0, 9.0]]), &[8.0, 27.0]).unwrap();
        assert_abs_diff_eq!(x[0], 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(x[1], 3.0, epsilon = 1e-15);
    }

    #[test]
    fn spd_two_by_two() {
        let x = solve_spd(&mat(&[&[2.0, 1.0], &[1.0, 2.0]]), &[3.0, 3.0]).unwrap();
        assert_abs_diff_eq!(x[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(x[1], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn spd_rejects_singular_and_indefinite() {
        let singular = mat(&[&[1.0, 1.0], &[1.0, 1.0]]);
        assert!(matches!(
            solve_spd(&singular, &[1.0, 1.0]),
            Err(Error::NotSpd { .. })
        ));
        let indefinite = mat(&[&[1.0, 2.0], &[2.0, 1.0]]);
        assert!(matches!(
            solve_spd(&indefinite, &[1.0, 1.0]),
            Err(Error::NotSpd { .. })
        ));
        assert!(matches!(
            solve_spd(&DenseMatrix::zeros(2, 2), &[0.0, 0.0]),
            Err(Error::NotSpd { .. })
        ));
    }

    #[test]
    fn spd_random_residuals() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let n = rng.gen_range(1..=20);
            let m = DenseMatrix::new(n, n, (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .unwrap();
            let mut a = m.transpose().matmul(&m).unwrap();
            for i in 0..n {
                a[(i, i)] += n as f64;
            }
            let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let x = solve_spd(&a, &b).unwrap();
            let ax = a.mul_vec(&x).unwrap();
            let res = norm_inf(&ax.iter().zip(&b).map(|(p, q)| p - q).collect::<Vec<_>>());
            assert!(res <= 1e-10 * (1.0 + norm_inf(&b)), "residual {res}");
        }
    }

    #[test]
    fn kkt_symmetric_split() {
        let sys = KktSystem::new(
            DenseMatrix::identity(2),
            mat(&[&[1.0, 1.0]]),
            vec![0.0, 0.0],
            vec![1.0],
        )
        .unwrap();
        let (x, l) = solve_kkt(&sys).unwrap();
        assert_abs_diff_eq!(x[0], 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(x[1], 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(l[0], 0.5, epsilon = 1e-14);
    }

    #[test]
    fn kkt_already_feasible() {
        let sys = KktSystem::new(
            DenseMatrix::identity(2),
            mat(&[&[1.0, 0.0]]),
            vec![0.0, 0.0],
            vec![0.0],
        )
        .unwrap();
        let (x, l) = solve_kkt(&sys).unwrap();
        assert_abs_diff_eq!(x[0], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(x[1], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(l[0], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn kkt_weighted_split() {
        let sys = KktSystem::new(
            DenseMatrix::from_diagonal(&[1.0, 4.0]),
            mat(&[&[1.0, 1.0]]),
            vec![0.0, 0.0],
            vec![5.0],
        )
        .unwrap();
        let (x, l) = solve_kkt(&sys).unwrap();
        assert_abs_diff_eq!(x[0], 4.0, epsilon = 1e-13);
        assert_abs_diff_eq!(x[1], 1.0, epsilon = 1e-13);
        assert_abs_diff_eq!(l[0], 4.0, epsilon = 1e-13);
    }

    #[test]
    fn kkt_detects_rank_deficiency() {
        let sys = KktSystem::new(
            DenseMatrix::identity(3),
            mat(&[&[1.0, 1.0, 0.0], &[2.0, 2.0, 0.0]]),
            vec![0.0; 3],
            vec![1.0, 2.0],
        )
        .unwrap();
        assert!(matches!(
            solve_kkt(&sys),
            Err(Error::RankDeficientConstraints {
                rank: 1,
                expected: 2
            })
        ));
    }

    #[test]
    fn kkt_detects_indefinite_reduced_hessian() {
        // x₁ is fixed by the constraint; x₂ direction has negative curvature
        let sys = KktSystem::new(
            DenseMatrix::from_diagonal(&[1.0, -1.0]),
            mat(&[&[1.0, 0.0]]),
            vec![0.0; 2],
            vec![1.0],
        )
        .unwrap();
        assert!(matches!(solve_kkt(&sys), Err(Error::NotSpdOnNullSpace)));
    }

    #[test]
    fn kkt_indefinite_hessian_positive_on_null_space() {
        // H is indefinite but positive on {x : x₁ = 0}
        let sys = KktSystem::new(
            DenseMatrix::from_diagonal(&[-1.0, 2.0]),
            mat(&[&[1.0, 0.0]]),
            vec![0.0, -2.0],
            vec![3.0],
        )
        .unwrap();
        let (x, l) = solve_kkt(&sys).unwrap();
        assert_abs_diff_eq!(x[0], 3.0, epsilon = 1e-13);
        assert_abs_diff_eq!(x[1], 1.0, epsilon = 1e-13);
        let (s, f) = sys.residuals(&x, &l).unwrap();
        assert!(s <= 1e-12 && f <= 1e-12);
    }

    #[test]
    fn kkt_random_residuals() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let n = rng.gen_range(2..=12);
            let m = rng.gen_range(1..=n.min(4));
            let r = DenseMatrix::new(n, n, (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .unwrap();
            let mut h = r.transpose().matmul(&r).unwrap();
            for i in 0..n {
                h[(i, i)] += 0.5;
            }
            let c = DenseMatrix::new(m, n, (0..m * n).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .unwrap();
            let g: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let b: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let sys = KktSystem::new(h, c, g, b).unwrap();
            let (x, l) = solve_kkt(&sys).unwrap();
            let (s, f) = sys.residuals(&x, &l).unwrap();
            assert!(
                s <= 1e-10 && f <= 1e-10,
                "stationarity {s}, feasibility {f}"
            );
        }
    }

    #[test]
    fn kkt_without_constraints_is_spd_solve() {
        let h = mat(&[&[3.0, 1.0, 0.0], &[1.0, 2.0, 0.5], &[0.0, 0.5, 1.0]]);
        let g = vec![1.0, -2.0, 0.5];
        let sys = KktSystem::new(h.clone(), DenseMatrix::zeros(0, 3), g.clone(), vec![]).unwrap();
        let (x, l) = solve_kkt(&sys).unwrap();
        assert!(l.is_empty());
        let neg: Vec<f64> = g.iter().map(|v| -v).collect();
        let direct = solve_spd(&h, &neg).unwrap();
        for (a, b) in x.iter().zip(&direct) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-14);
        }
    }

    #[test]
    fn qr_complement_is_orthogonal_null_space() {
        let c = mat(&[&[1.0, 1.0, 1.0, 1.0], &[0.0, 1.0, 2.0, 3.0]]);
        let qr = PivotedQr::factor(&c.transpose(), &ToleranceSet::default());
        assert_eq!(qr.rank(), 2);
        let z = qr.complement_basis();
        assert_eq!(z.len(), 2);
        for zi in &z {
            assert!(norm_inf(&c.mul_vec(zi).unwrap()) < 1e-14);
            assert_abs_diff_eq!(dot(zi, zi), 1.0, epsilon = 1e-14);
        }
        assert_abs_diff_eq!(dot(&z[0], &z[1]), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn dimension_errors() {
        assert!(matches!(
            DenseMatrix::new(2, 2, vec![1.0; 3]),
            Err(Error::LengthMismatch {
                expected: 4,
                found: 3
            })
        ));
        assert!(DenseMatrix::new(1, 1, vec![f64::NAN]).is_err());
        assert!(DenseMatrix::identity(2).mul_vec(&[1.0]).is_err());
    }
}
