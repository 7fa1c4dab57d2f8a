//! Weight functions, shifted polynomial bases and the moving-least-squares
//! kernel system `(A, W, p)`.
//!
//! With `A_ij = p_i(x_j)`, `W = diag(W(x_j, x̄))` and `p = p(x̄)`, the
//! generating function is `Ψ = W Aᵀ G⁻¹ p` where `G = A W Aᵀ` is the Gram
//! matrix. The same Ψ is the minimizer of `½ Ψᵀ W⁻¹ Ψ` subject to `A Ψ = p`,
//! see [`crate::qpsolve`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{check_len, dot, norm_inf, solve_spd_with, DenseMatrix, ToleranceSet};

/// One-dimensional six-point spline kernel (quintic B-spline), `r` in units of
/// the mesh width. Zero for `|r| >= 3`.
pub fn eval_psi6(r: f64) -> f64 {
    let a = r.abs();
    let k = a + 3.0;
    if a < 1.0 {
        (((((-5.0 * k + 90.0) * k - 630.0) * k + 2130.0) * k - 3465.0) * k + 2193.0) / 60.0
    } else if a < 2.0 {
        (((((5.0 * k - 120.0) * k + 1140.0) * k - 5340.0) * k + 12270.0) * k - 10974.0) / 120.0
    } else if a < 3.0 {
        (((((-k + 30.0) * k - 360.0) * k + 2160.0) * k - 6480.0) * k + 7776.0) / 120.0
    } else {
        0.0
    }
}

/// Peskin's four-point kernel, `r` in units of the mesh width.
pub fn eval_peskin4(r: f64) -> f64 {
    let a = r.abs();
    if a < 1.0 {
        (3.0 - 2.0 * a + (1.0 + 4.0 * a - 4.0 * a * a).sqrt()) / 8.0
    } else if a < 2.0 {
        (5.0 - 2.0 * a - (-7.0 + 12.0 * a - 4.0 * a * a).max(0.0).sqrt()) / 8.0
    } else {
        0.0
    }
}

/// A radially symmetric 1D profile sampled uniformly on `[0, radius]` and
/// linearly interpolated in between.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedProfile {
    radius: f64,
    values: Vec<f64>,
}

impl TabulatedProfile {
    pub fn new(radius: f64, values: Vec<f64>) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidInput(
                "profile radius must be positive".into(),
            ));
        }
        if values.len() < 2 {
            return Err(Error::InvalidInput(
                "profile needs at least two samples".into(),
            ));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidInput(
                "profile samples must be finite and non-negative".into(),
            ));
        }
        Ok(Self { radius, values })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn eval(&self, r: f64) -> f64 {
        let a = r.abs();
        if a >= self.radius {
            return 0.0;
        }
        let t = a / self.radius * (self.values.len() - 1) as f64;
        let i = (t.floor() as usize).min(self.values.len() - 2);
        let f = t - i as f64;
        self.values[i] * (1.0 - f) + self.values[i + 1] * f
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum WeightKind {
    SixPointSpline,
    FourPointPeskin,
    Custom1D(TabulatedProfile),
}

/// Tensor-product weight function `W(x_i, x̄) = Π_k φ((x_i,k − x̄_k) / h)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightFunction {
    kind: WeightKind,
    mesh_width: f64,
}

impl WeightFunction {
    pub fn new(kind: WeightKind, mesh_width: f64) -> Result<Self> {
        if !(mesh_width > 0.0) || !mesh_width.is_finite() {
            return Err(Error::InvalidInput("mesh width must be positive".into()));
        }
        Ok(Self { kind, mesh_width })
    }

    pub fn six_point(mesh_width: f64) -> Result<Self> {
        Self::new(WeightKind::SixPointSpline, mesh_width)
    }

    pub fn kind(&self) -> &WeightKind {
        &self.kind
    }

    pub fn mesh_width(&self) -> f64 {
        self.mesh_width
    }

    /// Support half-width per axis, in cells.
    pub fn support_radius(&self) -> f64 {
        match &self.kind {
            WeightKind::SixPointSpline => 3.0,
            WeightKind::FourPointPeskin => 2.0,
            WeightKind::Custom1D(p) => p.radius(),
        }
    }

    /// 1D profile at a dimensionless offset.
    pub fn eval_1d(&self, r: f64) -> f64 {
        match &self.kind {
            WeightKind::SixPointSpline => eval_psi6(r),
            WeightKind::FourPointPeskin => eval_peskin4(r),
            WeightKind::Custom1D(p) => p.eval(r),
        }
    }
}

/// Product over axes of the 1D profile at `(site − eval) / h`.
pub fn tensor_weight(site: &[f64], eval: &EvalPoint, wf: &WeightFunction) -> f64 {
    debug_assert_eq!(site.len(), eval.dim());
    site.iter()
        .zip(eval.coords())
        .map(|(s, e)| wf.eval_1d((s - e) / wf.mesh_width))
        .product()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EvalPoint {
    coords: Vec<f64>,
}

impl EvalPoint {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() || coords.len() > 3 {
            return Err(Error::InvalidInput(format!(
                "evaluation point must have 1 to 3 coordinates, got {}",
                coords.len()
            )));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput(
                "evaluation point must be finite".into(),
            ));
        }
        Ok(Self { coords })
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }
}

/// Distinct data sites `x_1 … x_N` in `d` dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct DataSites {
    points: Vec<Vec<f64>>,
    dim: usize,
}

impl DataSites {
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self> {
        let dim = points.first().map_or(0, Vec::len);
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidInput(
                "sites must have 1 to 3 coordinates".into(),
            ));
        }
        for p in &points {
            check_len(dim, p.len())?;
            if p.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidInput(
                    "site coordinates must be finite".into(),
                ));
            }
        }
        let mut sorted: Vec<&Vec<f64>> = points.iter().collect();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite coordinates"));
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidInput(
                "data sites must be pairwise distinct".into(),
            ));
        }
        Ok(Self { points, dim })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.points.iter().map(Vec::as_slice)
    }
}

impl TryFrom<Vec<Vec<f64>>> for DataSites {
    type Error = Error;

    fn try_from(points: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(points)
    }
}

impl From<DataSites> for Vec<Vec<f64>> {
    fn from(sites: DataSites) -> Self {
        sites.points
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BasisDegree {
    ConstantOnly,
    Linear,
}

/// `{1}` or `{1, x − x̄, y − ȳ, z − z̄}` truncated to the spatial dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolynomialBasis {
    dimension: usize,
    degree: BasisDegree,
}

pub fn build_basis(dimension: usize, degree: BasisDegree) -> Result<PolynomialBasis> {
    if !(1..=3).contains(&dimension) {
        return Err(Error::InvalidInput(format!(
            "basis dimension must be 1, 2 or 3, got {dimension}"
        )));
    }
    Ok(PolynomialBasis { dimension, degree })
}

impl PolynomialBasis {
    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn degree(&self) -> BasisDegree {
        self.degree
    }

    /// Number of basis functions `m`.
    pub fn size(&self) -> usize {
        match self.degree {
            BasisDegree::ConstantOnly => 1,
            BasisDegree::Linear => self.dimension + 1,
        }
    }

    /// Basis values at `point`, with coordinates shifted by `eval`.
    pub fn evaluate(&self, point: &[f64], eval: &EvalPoint) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.size());
        out.push(1.0);
        if self.degree == BasisDegree::Linear {
            out.extend(point.iter().zip(eval.coords()).map(|(x, e)| x - e));
        }
        out
    }

    /// `p(x̄) = (1, 0, …, 0)`
    pub fn at_eval(&self) -> Vec<f64> {
        let mut p = vec![0.0; self.size()];
        p[0] = 1.0;
        p
    }

    /// Polynomial matrix `A_ij = p_i(x_j)`.
    pub fn matrix(&self, sites: &DataSites, eval: &EvalPoint) -> DenseMatrix {
        let m = self.size();
        let mut a = DenseMatrix::zeros(m, sites.len());
        for (j, x) in sites.iter().enumerate() {
            for (i, v) in self.evaluate(x, eval).into_iter().enumerate() {
                a[(i, j)] = v;
            }
        }
        a
    }
}

/// Assembled moving-least-squares system at one evaluation point.
#[derive(Debug, Clone)]
pub struct KernelSystem {
    a: DenseMatrix,
    weights: Vec<f64>,
    p: Vec<f64>,
    eval: EvalPoint,
    sites: DataSites,
    basis: PolynomialBasis,
}

impl KernelSystem {
    /// Builds a system from explicit site weights.
    pub fn from_weights(
        sites: DataSites,
        eval: EvalPoint,
        basis: PolynomialBasis,
        weights: Vec<f64>,
    ) -> Result<Self> {
        check_len(sites.dim(), eval.dim())?;
        check_len(basis.dimension(), eval.dim())?;
        check_len(sites.len(), weights.len())?;
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidInput(
                "weights must be finite and non-negative".into(),
            ));
        }
        Ok(Self {
            a: basis.matrix(&sites, &eval),
            p: basis.at_eval(),
            weights,
            eval,
            sites,
            basis,
        })
    }

    pub fn a(&self) -> &DenseMatrix {
        &self.a
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    pub fn eval(&self) -> &EvalPoint {
        &self.eval
    }

    pub fn sites(&self) -> &DataSites {
        &self.sites
    }

    pub fn basis(&self) -> &PolynomialBasis {
        &self.basis
    }

    /// Indices of sites whose weight exceeds `threshold`.
    pub fn support(&self, threshold: f64) -> Vec<usize> {
        self.weights
            .iter()
            .enumerate()
            .filter(|(_, w)| **w > threshold)
            .map(|(i, _)| i)
            .collect()
    }

    /// Same system with replaced weights.
    pub fn with_weights(&self, weights: Vec<f64>) -> Result<Self> {
        Self::from_weights(self.sites.clone(), self.eval.clone(), self.basis, weights)
    }
}

pub fn assemble_system(
    sites: &DataSites,
    eval: &EvalPoint,
    wf: &WeightFunction,
    basis: &PolynomialBasis,
) -> Result<KernelSystem> {
    assemble_system_with(sites, eval, wf, basis, &ToleranceSet::default())
}

pub fn assemble_system_with(
    sites: &DataSites,
    eval: &EvalPoint,
    wf: &WeightFunction,
    basis: &PolynomialBasis,
    tol: &ToleranceSet,
) -> Result<KernelSystem> {
    check_len(sites.dim(), eval.dim())?;
    let weights: Vec<f64> = sites.iter().map(|x| tensor_weight(x, eval, wf)).collect();
    let system = KernelSystem::from_weights(sites.clone(), eval.clone(), *basis, weights)?;
    let found = system.support(tol.support).len();
    if found < basis.size() {
        return Err(Error::InsufficientSupport {
            found,
            required: basis.size(),
        });
    }
    Ok(system)
}

/// `G = A diag(W) Aᵀ`
pub fn gram(system: &KernelSystem) -> DenseMatrix {
    let a = &system.a;
    let m = a.rows();
    let mut g = DenseMatrix::zeros(m, m);
    for i in 0..m {
        for k in 0..=i {
            let v: f64 = (0..a.cols())
                .map(|j| a[(i, j)] * system.weights[j] * a[(k, j)])
                .sum();
            g[(i, k)] = v;
            g[(k, i)] = v;
        }
    }
    g
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum KernelSource {
    ClosedForm,
    ProblemA,
    ProblemB,
    ProblemC,
    ProblemD,
}

/// Whether the moment equalities were imposed exactly or only through a
/// penalty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SolveMode {
    Exact,
    SoftConstraint,
}

impl std::fmt::Display for SolveMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SolveMode::Exact => "Exact",
            SolveMode::SoftConstraint => "SoftConstraint",
        })
    }
}

/// Kernel weights Ψ on a stencil together with how they were obtained.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelWeights {
    psi: Vec<f64>,
    sites: DataSites,
    eval: EvalPoint,
    basis: PolynomialBasis,
    source: KernelSource,
    mode: SolveMode,
    equality_residual: f64,
}

impl KernelWeights {
    /// Records `‖A Ψ − p‖∞` for the given basis at construction.
    pub fn new(
        psi: Vec<f64>,
        sites: DataSites,
        eval: EvalPoint,
        basis: PolynomialBasis,
        source: KernelSource,
        mode: SolveMode,
    ) -> Result<Self> {
        check_len(sites.len(), psi.len())?;
        check_len(sites.dim(), eval.dim())?;
        if psi.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("kernel weights must be finite".into()));
        }
        let equality_residual = norm_inf(&moment_residuals(&psi, &sites, &eval, &basis)?);
        Ok(Self {
            psi,
            sites,
            eval,
            basis,
            source,
            mode,
            equality_residual,
        })
    }

    pub fn from_system(
        system: &KernelSystem,
        psi: Vec<f64>,
        source: KernelSource,
        mode: SolveMode,
    ) -> Result<Self> {
        Self::new(
            psi,
            system.sites.clone(),
            system.eval.clone(),
            system.basis,
            source,
            mode,
        )
    }

    pub fn psi(&self) -> &[f64] {
        &self.psi
    }

    pub fn sites(&self) -> &DataSites {
        &self.sites
    }

    pub fn eval(&self) -> &EvalPoint {
        &self.eval
    }

    pub fn basis(&self) -> &PolynomialBasis {
        &self.basis
    }

    pub fn source(&self) -> KernelSource {
        self.source
    }

    pub fn mode(&self) -> SolveMode {
        self.mode
    }

    pub fn equality_residual(&self) -> f64 {
        self.equality_residual
    }

    pub fn min(&self) -> f64 {
        self.psi.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.psi.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Signed moment residuals `Σ_i p_j(x_i) ψ_i − p_j(x̄)` for every basis member.
pub fn moment_residuals(
    psi: &[f64],
    sites: &DataSites,
    eval: &EvalPoint,
    basis: &PolynomialBasis,
) -> Result<Vec<f64>> {
    check_len(sites.len(), psi.len())?;
    check_len(basis.dimension(), eval.dim())?;
    let mut r = basis.matrix(sites, eval).mul_vec(psi)?;
    for (ri, pi) in r.iter_mut().zip(basis.at_eval()) {
        *ri -= pi;
    }
    Ok(r)
}

/// `Ψ = W Aᵀ G⁻¹ p`
pub fn generating_function_closed_form(system: &KernelSystem) -> Result<KernelWeights> {
    generating_function_closed_form_with(system, &ToleranceSet::default())
}

pub fn generating_function_closed_form_with(
    system: &KernelSystem,
    tol: &ToleranceSet,
) -> Result<KernelWeights> {
    let lambda = solve_spd_with(&gram(system), &system.p, tol)?;
    let at_lambda = system.a.tr_mul_vec(&lambda)?;
    let psi = at_lambda
        .iter()
        .zip(&system.weights)
        .map(|(v, w)| v * w)
        .collect();
    KernelWeights::from_system(system, psi, KernelSource::ClosedForm, SolveMode::Exact)
}

/// Weighted least-squares coefficients `c = G⁻¹ A W g` of the local
/// polynomial fit. The quasi-interpolant at `x̄` is `pᵀ c = c₀`.
pub fn solve_problem_a(system: &KernelSystem, data: &[f64]) -> Result<Vec<f64>> {
    solve_problem_a_with(system, data, &ToleranceSet::default())
}

pub fn solve_problem_a_with(
    system: &KernelSystem,
    data: &[f64],
    tol: &ToleranceSet,
) -> Result<Vec<f64>> {
    check_len(system.sites.len(), data.len())?;
    let wg: Vec<f64> = data
        .iter()
        .zip(&system.weights)
        .map(|(g, w)| g * w)
        .collect();
    let gp = system.a.mul_vec(&wg)?;
    solve_spd_with(&gram(system), &gp, tol)
}

/// `Σ_i g(x_i) ψ_i`
pub fn quasi_interpolate(weights: &KernelWeights, data: &[f64]) -> Result<f64> {
    check_len(weights.psi.len(), data.len())?;
    Ok(dot(&weights.psi, data))
}
