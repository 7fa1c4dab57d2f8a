//! Quadratic programs of the form
//!
//! ```text
//!     minimize    ½ xᵀ H x + cᵀ x
//!     subject to  A x = b
//!                 l ≤ x ≤ u          (optional)
//! ```
//!
//! Multiplier convention: `H x + c − Aᵀλ − ν = 0`, with `ν_i ≥ 0` on an active
//! lower bound, `ν_i ≤ 0` on an active upper bound, and `ν_i = 0` otherwise.

use crate::error::{Error, Result};
use crate::kernel::{KernelSource, KernelSystem, KernelWeights, SolveMode};
use crate::linalg::{
    axpy, check_len, dot, norm_inf, rank, solve_kkt_with, DenseMatrix, KktSystem, ToleranceSet,
};

#[derive(Debug, Clone)]
pub struct QpProblem {
    hessian: DenseMatrix,
    linear: Vec<f64>,
    eq_matrix: DenseMatrix,
    eq_rhs: Vec<f64>,
    lower: Option<Vec<f64>>,
    upper: Option<Vec<f64>>,
}

impl QpProblem {
    pub fn new(hessian: DenseMatrix, eq_matrix: DenseMatrix, eq_rhs: Vec<f64>) -> Result<Self> {
        let n = hessian.rows();
        if !hessian.is_square() {
            return Err(Error::InvalidInput("hessian must be square".into()));
        }
        if !hessian.is_symmetric(1e-12) {
            return Err(Error::InvalidInput("hessian must be symmetric".into()));
        }
        check_len(n, eq_matrix.cols())?;
        check_len(eq_matrix.rows(), eq_rhs.len())?;
        Ok(Self {
            hessian,
            linear: vec![0.0; n],
            eq_matrix,
            eq_rhs,
            lower: None,
            upper: None,
        })
    }

    pub fn with_linear(mut self, linear: Vec<f64>) -> Result<Self> {
        check_len(self.n(), linear.len())?;
        self.linear = linear;
        Ok(self)
    }

    pub fn with_bounds(mut self, lower: Option<Vec<f64>>, upper: Option<Vec<f64>>) -> Result<Self> {
        let n = self.n();
        for b in lower.iter().chain(upper.iter()) {
            check_len(n, b.len())?;
            if b.iter().any(|v| v.is_nan()) {
                return Err(Error::InvalidInput("bounds must not be NaN".into()));
            }
        }
        if let (Some(l), Some(u)) = (&lower, &upper) {
            if l.iter().zip(u).any(|(a, b)| a > b) {
                return Err(Error::InvalidInput(
                    "lower bound exceeds upper bound".into(),
                ));
            }
        }
        self.lower = lower;
        self.upper = upper;
        Ok(self)
    }

    /// Same bounds `[alpha, beta]` on every variable.
    pub fn with_uniform_bounds(self, alpha: f64, beta: f64) -> Result<Self> {
        let n = self.n();
        self.with_bounds(Some(vec![alpha; n]), Some(vec![beta; n]))
    }

    pub fn n(&self) -> usize {
        self.hessian.rows()
    }

    pub fn m(&self) -> usize {
        self.eq_matrix.rows()
    }

    pub fn hessian(&self) -> &DenseMatrix {
        &self.hessian
    }

    pub fn linear(&self) -> &[f64] {
        &self.linear
    }

    pub fn eq_matrix(&self) -> &DenseMatrix {
        &self.eq_matrix
    }

    pub fn eq_rhs(&self) -> &[f64] {
        &self.eq_rhs
    }

    pub fn has_bounds(&self) -> bool {
        self.lower.is_some() || self.upper.is_some()
    }

    pub fn lower_bounds(&self) -> Vec<f64> {
        self.lower
            .clone()
            .unwrap_or_else(|| vec![f64::NEG_INFINITY; self.n()])
    }

    pub fn upper_bounds(&self) -> Vec<f64> {
        self.upper
            .clone()
            .unwrap_or_else(|| vec![f64::INFINITY; self.n()])
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        let hx = self
            .hessian
            .mul_vec(x)
            .expect("dimension checked at construction");
        0.5 * dot(x, &hx) + dot(&self.linear, x)
    }

    /// `A x − b`
    pub fn eq_violation(&self, x: &[f64]) -> Vec<f64> {
        let mut r = self
            .eq_matrix
            .mul_vec(x)
            .expect("dimension checked at construction");
        axpy(-1.0, &self.eq_rhs, &mut r);
        r
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub x: Vec<f64>,
    pub multipliers: Vec<f64>,
    pub bound_multipliers: Vec<f64>,
    /// Indices held at a bound in the final working set, ascending.
    pub active_set: Vec<usize>,
    pub eq_residual: f64,
    pub iterations: usize,
    pub mode: SolveMode,
}

/// Outcome of the phase-1 feasibility search.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityReport {
    pub feasible: bool,
    /// `Σ |(A x − b)_i|` at the witness.
    pub violation: f64,
    /// Point within the bounds minimizing the equality violation.
    pub witness: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktReport {
    pub stationarity: f64,
    pub primal_equality: f64,
    pub primal_bounds: f64,
    pub dual: f64,
    pub complementarity: f64,
}

impl KktReport {
    pub fn max(&self) -> f64 {
        [
            self.stationarity,
            self.primal_equality,
            self.primal_bounds,
            self.dual,
            self.complementarity,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

pub fn solve_eq_qp(problem: &QpProblem) -> Result<QpSolution> {
    solve_eq_qp_with(problem, &ToleranceSet::default())
}

pub fn solve_eq_qp_with(problem: &QpProblem, tol: &ToleranceSet) -> Result<QpSolution> {
    let system = KktSystem::new(
        problem.hessian.clone(),
        problem.eq_matrix.clone(),
        problem.linear.clone(),
        problem.eq_rhs.clone(),
    )?;
    let (x, lambda) = solve_kkt_with(&system, tol)?;
    let eq_residual = norm_inf(&problem.eq_violation(&x));
    Ok(QpSolution {
        bound_multipliers: vec![0.0; x.len()],
        x,
        multipliers: lambda,
        active_set: Vec::new(),
        eq_residual,
        iterations: 1,
        mode: SolveMode::Exact,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Bound {
    Lower,
    Upper,
}

/// Subproblem data shared by the primal active-set iterations.
struct ActiveSetProblem<'a> {
    hessian: &'a DenseMatrix,
    linear: &'a [f64],
    eq_matrix: &'a DenseMatrix,
    eq_rhs: &'a [f64],
    lower: &'a [f64],
    upper: &'a [f64],
}

struct ActiveSetOutcome {
    x: Vec<f64>,
    lambda: Vec<f64>,
    nu: Vec<f64>,
    working: Vec<Option<Bound>>,
    iterations: usize,
}

impl ActiveSetProblem<'_> {
    fn n(&self) -> usize {
        self.hessian.rows()
    }

    fn bound_value(&self, i: usize, side: Bound) -> f64 {
        match side {
            Bound::Lower => self.lower[i],
            Bound::Upper => self.upper[i],
        }
    }

    /// Minimizer over the free variables with the working set held at its
    /// bounds. Returns the full-length point and the equality multipliers.
    fn solve_subproblem(
        &self,
        working: &[Option<Bound>],
        tol: &ToleranceSet,
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = self.n();
        let free: Vec<usize> = (0..n).filter(|&i| working[i].is_none()).collect();
        let mut x = vec![0.0; n];
        for i in 0..n {
            if let Some(side) = working[i] {
                x[i] = self.bound_value(i, side);
            }
        }
        let m = self.eq_matrix.rows();
        // b − A_W x_W
        let mut rhs = self.eq_rhs.to_vec();
        let ax = self.eq_matrix.mul_vec(&x)?;
        axpy(-1.0, &ax, &mut rhs);
        if free.is_empty() {
            if m > 0 && norm_inf(&rhs) > tol.feasibility * (1.0 + norm_inf(self.eq_rhs)) {
                return Err(Error::RankDeficientConstraints {
                    rank: 0,
                    expected: m,
                });
            }
            return Ok((x, vec![0.0; m]));
        }
        // c_F + H_FW x_W
        let hx = self.hessian.mul_vec(&x)?;
        let grad: Vec<f64> = free.iter().map(|&i| self.linear[i] + hx[i]).collect();
        let system = KktSystem::new(
            self.hessian.select_principal(&free),
            self.eq_matrix.select_columns(&free),
            grad,
            rhs,
        )?;
        let (xf, lambda) = solve_kkt_with(&system, tol)?;
        for (k, &i) in free.iter().enumerate() {
            x[i] = xf[k];
        }
        Ok((x, lambda))
    }

    /// `ν = H x + c − Aᵀλ`
    fn bound_multipliers(&self, x: &[f64], lambda: &[f64]) -> Result<Vec<f64>> {
        let mut nu = self.hessian.mul_vec(x)?;
        axpy(1.0, self.linear, &mut nu);
        axpy(-1.0, &self.eq_matrix.tr_mul_vec(lambda)?, &mut nu);
        Ok(nu)
    }

    /// Primal active-set iterations from a point within the bounds.
    ///
    /// Each iteration solves the equality subproblem for the current working
    /// set and steps toward its solution, stopping at the first blocking bound
    /// (lowest index on ties). At a subproblem minimizer the bound with the
    /// most wrongly signed multiplier is released (lowest index on ties).
    /// The start may violate the equalities slightly; full steps restore them.
    fn run(
        &self,
        mut x: Vec<f64>,
        mut working: Vec<Option<Bound>>,
        tol: &ToleranceSet,
    ) -> Result<ActiveSetOutcome> {
        let n = self.n();
        let max_iter = tol.max_iter_factor * n.max(1);
        let mut iterations = 0;
        loop {
            if iterations >= max_iter {
                return Err(Error::MaxIterations { iterations });
            }
            iterations += 1;
            let (target, lambda) = self.solve_subproblem(&working, tol)?;

            // ratio test along target − x
            let mut step = 1.0;
            let mut blocking: Option<(usize, Bound)> = None;
            for i in 0..n {
                if working[i].is_some() {
                    continue;
                }
                let p = target[i] - x[i];
                let candidate = if p < 0.0 && self.lower[i].is_finite() {
                    Some(((self.lower[i] - x[i]) / p, Bound::Lower))
                } else if p > 0.0 && self.upper[i].is_finite() {
                    Some(((self.upper[i] - x[i]) / p, Bound::Upper))
                } else {
                    None
                };
                if let Some((alpha, side)) = candidate {
                    let alpha = alpha.max(0.0);
                    if alpha < step {
                        step = alpha;
                        blocking = Some((i, side));
                    }
                }
            }

            if let Some((j, side)) = blocking {
                for i in 0..n {
                    if working[i].is_none() {
                        x[i] += step * (target[i] - x[i]);
                    }
                }
                x[j] = self.bound_value(j, side);
                working[j] = Some(side);
                continue;
            }

            x = target;
            let nu = self.bound_multipliers(&x, &lambda)?;
            let scale = 1.0
                + norm_inf(&self.hessian.mul_vec(&x)?)
                + norm_inf(self.linear)
                + norm_inf(&self.eq_matrix.tr_mul_vec(&lambda)?);
            let threshold = tol.complementarity * scale;
            let mut release: Option<(usize, f64)> = None;
            for i in 0..n {
                let wrong = match working[i] {
                    Some(Bound::Lower) => -nu[i],
                    Some(Bound::Upper) => nu[i],
                    None => continue,
                };
                if wrong > threshold && release.is_none_or(|(_, w)| wrong > w) {
                    release = Some((i, wrong));
                }
            }
            match release {
                Some((j, _)) => working[j] = None,
                None => {
                    let nu = nu
                        .iter()
                        .zip(&working)
                        .map(|(v, w)| if w.is_some() { *v } else { 0.0 })
                        .collect();
                    return Ok(ActiveSetOutcome {
                        x,
                        lambda,
                        nu,
                        working,
                        iterations,
                    });
                }
            }
        }
    }
}

fn clamp_into(x: &[f64], lower: &[f64], upper: &[f64]) -> Vec<f64> {
    x.iter()
        .zip(lower.iter().zip(upper))
        .map(|(&v, (&l, &u))| v.max(l).min(u))
        .collect()
}

fn within_bounds(x: &[f64], lower: &[f64], upper: &[f64], tol: f64) -> bool {
    x.iter()
        .zip(lower.iter().zip(upper))
        .all(|(&v, (&l, &u))| v >= l - tol && v <= u + tol)
}

fn active_indices(working: &[Option<Bound>]) -> Vec<usize> {
    working
        .iter()
        .enumerate()
        .filter(|(_, w)| w.is_some())
        .map(|(i, _)| i)
        .collect()
}

/// Searches for a point within the bounds that satisfies the equalities by
/// minimizing `½‖u‖² + ½δ‖x‖²` subject to `A x + u = b` and the bounds on
/// `x`, with `u` free. `δ` is the small proximal weight from the tolerance set.
pub fn phase1_feasible(problem: &QpProblem) -> Result<FeasibilityReport> {
    phase1_feasible_with(problem, &ToleranceSet::default())
}

pub fn phase1_feasible_with(problem: &QpProblem, tol: &ToleranceSet) -> Result<FeasibilityReport> {
    let (n, m) = (problem.n(), problem.m());
    let lower = problem.lower_bounds();
    let upper = problem.upper_bounds();

    let mut diag = vec![tol.phase1_regularization; n];
    diag.extend(std::iter::repeat_n(1.0, m));
    let hessian = DenseMatrix::from_diagonal(&diag);
    let mut eq = DenseMatrix::zeros(m, n + m);
    for r in 0..m {
        for j in 0..n {
            eq[(r, j)] = problem.eq_matrix[(r, j)];
        }
        eq[(r, n + r)] = 1.0;
    }
    let mut aux_lower = lower.clone();
    aux_lower.extend(std::iter::repeat_n(f64::NEG_INFINITY, m));
    let mut aux_upper = upper.clone();
    aux_upper.extend(std::iter::repeat_n(f64::INFINITY, m));
    let linear = vec![0.0; n + m];

    let x0 = clamp_into(&vec![0.0; n], &lower, &upper);
    let mut z0 = x0.clone();
    z0.extend(problem.eq_violation(&x0).iter().map(|v| -v));

    let aux = ActiveSetProblem {
        hessian: &hessian,
        linear: &linear,
        eq_matrix: &eq,
        eq_rhs: &problem.eq_rhs,
        lower: &aux_lower,
        upper: &aux_upper,
    };
    let outcome = aux.run(z0, vec![None; n + m], tol)?;
    let witness = clamp_into(&outcome.x[..n], &lower, &upper);
    let violation: f64 = problem.eq_violation(&witness).iter().map(|v| v.abs()).sum();
    Ok(FeasibilityReport {
        feasible: violation <= tol.phase1,
        violation,
        witness,
    })
}

/// Box- and equality-constrained QP by the primal active-set method.
pub fn solve_box_qp(problem: &QpProblem) -> Result<QpSolution> {
    solve_box_qp_with(problem, &ToleranceSet::default())
}

pub fn solve_box_qp_with(problem: &QpProblem, tol: &ToleranceSet) -> Result<QpSolution> {
    box_qp(problem, tol, None)
}

fn box_qp(
    problem: &QpProblem,
    tol: &ToleranceSet,
    phase1: Option<&FeasibilityReport>,
) -> Result<QpSolution> {
    let n = problem.n();
    let m = problem.m();
    let lower = problem.lower_bounds();
    let upper = problem.upper_bounds();
    let inner = ActiveSetProblem {
        hessian: &problem.hessian,
        linear: &problem.linear,
        eq_matrix: &problem.eq_matrix,
        eq_rhs: &problem.eq_rhs,
        lower: &lower,
        upper: &upper,
    };

    // Initial working set: bounds violated by the equality-constrained
    // minimizer, kept only while the free columns of A retain full row rank.
    let mut start: Option<(Vec<f64>, Vec<Option<Bound>>)> = None;
    if let Ok(eq) = solve_eq_qp_with(problem, tol) {
        let mut working = vec![None; n];
        for i in 0..n {
            let side = if eq.x[i] < lower[i] {
                Bound::Lower
            } else if eq.x[i] > upper[i] {
                Bound::Upper
            } else {
                continue;
            };
            working[i] = Some(side);
            let free: Vec<usize> = (0..n).filter(|&k| working[k].is_none()).collect();
            if m > 0 && (free.len() < m || rank(&problem.eq_matrix.select_columns(&free), tol) < m)
            {
                working[i] = None;
            }
        }
        if let Ok((x, _)) = inner.solve_subproblem(&working, tol) {
            if within_bounds(&x, &lower, &upper, 0.0) {
                start = Some((x, working));
            }
        }
    }

    let (x0, working0) = match start {
        Some(s) => s,
        None => {
            let computed;
            let report = match phase1 {
                Some(r) => r,
                None => {
                    computed = phase1_feasible_with(problem, tol)?;
                    &computed
                }
            };
            if !report.feasible {
                return Err(Error::Infeasible {
                    violation: report.violation,
                });
            }
            (report.witness.clone(), vec![None; n])
        }
    };

    let out = inner.run(x0, working0, tol)?;
    let eq_residual = norm_inf(&problem.eq_violation(&out.x));
    Ok(QpSolution {
        active_set: active_indices(&out.working),
        x: out.x,
        multipliers: out.lambda,
        bound_multipliers: out.nu,
        eq_residual,
        iterations: out.iterations,
        mode: SolveMode::Exact,
    })
}

/// Penalized problem `½xᵀHx + cᵀx + (ρ/2)‖Ax − b‖²` under the bounds only.
///
/// The reported `eq_residual` is the true `‖Ax − b‖∞` of the result, and the
/// equality multipliers are `λ = −ρ (Ax − b)`.
pub fn solve_soft_qp(problem: &QpProblem, penalty: f64) -> Result<QpSolution> {
    solve_soft_qp_with(problem, penalty, &ToleranceSet::default())
}

pub fn solve_soft_qp_with(
    problem: &QpProblem,
    penalty: f64,
    tol: &ToleranceSet,
) -> Result<QpSolution> {
    if !(penalty > 0.0) || !penalty.is_finite() {
        return Err(Error::InvalidInput("penalty must be positive".into()));
    }
    let n = problem.n();
    let a = &problem.eq_matrix;
    let ata = a.transpose().matmul(a)?;
    let mut hessian = problem.hessian.clone();
    for i in 0..n {
        for j in 0..n {
            hessian[(i, j)] += penalty * ata[(i, j)];
        }
    }
    let mut linear = problem.linear.clone();
    axpy(-penalty, &a.tr_mul_vec(&problem.eq_rhs)?, &mut linear);
    let lower = problem.lower_bounds();
    let upper = problem.upper_bounds();
    let no_eq = DenseMatrix::zeros(0, n);
    let inner = ActiveSetProblem {
        hessian: &hessian,
        linear: &linear,
        eq_matrix: &no_eq,
        eq_rhs: &[],
        lower: &lower,
        upper: &upper,
    };
    let x0 = clamp_into(&vec![0.0; n], &lower, &upper);
    let out = inner.run(x0, vec![None; n], tol)?;
    let violation = problem.eq_violation(&out.x);
    let multipliers = violation.iter().map(|v| -penalty * v).collect();
    Ok(QpSolution {
        active_set: active_indices(&out.working),
        eq_residual: norm_inf(&violation),
        x: out.x,
        multipliers,
        bound_multipliers: out.nu,
        iterations: out.iterations,
        mode: SolveMode::SoftConstraint,
    })
}

/// Phase 1, then the exact active-set solve when feasible, otherwise the
/// penalty fallback marked [`SolveMode::SoftConstraint`].
pub fn solve_bounded_with(
    problem: &QpProblem,
    tol: &ToleranceSet,
) -> Result<(QpSolution, FeasibilityReport)> {
    let report = phase1_feasible_with(problem, tol)?;
    let solution = if report.feasible {
        box_qp(problem, tol, Some(&report))?
    } else {
        solve_soft_qp_with(problem, tol.soft_penalty, tol)?
    };
    Ok((solution, report))
}

/// Residuals of the optimality conditions at `solution`.
pub fn check_kkt(problem: &QpProblem, solution: &QpSolution) -> Result<KktReport> {
    let n = problem.n();
    check_len(n, solution.x.len())?;
    check_len(problem.m(), solution.multipliers.len())?;
    check_len(n, solution.bound_multipliers.len())?;
    let x = &solution.x;
    let nu = &solution.bound_multipliers;

    let mut stat = problem.hessian.mul_vec(x)?;
    axpy(1.0, &problem.linear, &mut stat);
    axpy(
        -1.0,
        &problem.eq_matrix.tr_mul_vec(&solution.multipliers)?,
        &mut stat,
    );
    axpy(-1.0, nu, &mut stat);

    let lower = problem.lower_bounds();
    let upper = problem.upper_bounds();
    let mut primal_bounds: f64 = 0.0;
    let mut dual: f64 = 0.0;
    let mut complementarity: f64 = 0.0;
    for i in 0..n {
        primal_bounds = primal_bounds.max(lower[i] - x[i]).max(x[i] - upper[i]);
        let (lo_mult, up_mult) = (nu[i].max(0.0), (-nu[i]).max(0.0));
        if lower[i].is_finite() {
            complementarity = complementarity.max(lo_mult * (x[i] - lower[i]).abs());
        } else {
            dual = dual.max(lo_mult);
        }
        if upper[i].is_finite() {
            complementarity = complementarity.max(up_mult * (upper[i] - x[i]).abs());
        } else {
            dual = dual.max(up_mult);
        }
    }
    Ok(KktReport {
        stationarity: norm_inf(&stat),
        primal_equality: norm_inf(&problem.eq_violation(x)),
        primal_bounds,
        dual,
        complementarity,
    })
}

/// The kernel problem `min ½ Ψᵀ W⁻¹ Ψ  s.t.  A Ψ = p` restricted to the sites
/// with weight above the support threshold. Returns the problem over the
/// surviving sites and their indices; all other Ψ entries are zero.
pub fn kernel_qp(system: &KernelSystem, tol: &ToleranceSet) -> Result<(QpProblem, Vec<usize>)> {
    let support = system.support(tol.support);
    let m = system.basis().size();
    if support.len() < m {
        return Err(Error::InsufficientSupport {
            found: support.len(),
            required: m,
        });
    }
    let inv_w: Vec<f64> = support.iter().map(|&i| 1.0 / system.weights()[i]).collect();
    let problem = QpProblem::new(
        DenseMatrix::from_diagonal(&inv_w),
        system.a().select_columns(&support),
        system.p().to_vec(),
    )?;
    Ok((problem, support))
}

pub(crate) fn scatter(n: usize, support: &[usize], values: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for (&i, &v) in support.iter().zip(values) {
        out[i] = v;
    }
    out
}

/// Backus–Gilbert kernel: the equality QP on the kernel system.
pub fn solve_problem_b(system: &KernelSystem) -> Result<KernelWeights> {
    solve_problem_b_with(system, &ToleranceSet::default())
}

pub fn solve_problem_b_with(system: &KernelSystem, tol: &ToleranceSet) -> Result<KernelWeights> {
    let (problem, support) = kernel_qp(system, tol)?;
    let sol = solve_eq_qp_with(&problem, tol)?;
    let psi = scatter(system.sites().len(), &support, &sol.x);
    KernelWeights::from_system(system, psi, KernelSource::ProblemB, SolveMode::Exact)
}

/// Per-axis weights of the four-point kernel at fractional shifts `s ∈ [0, 1)`.
///
/// Along each axis the evaluation point sits a fraction `s` of a cell past
/// node `j`, and the weights belong to nodes `j−1, j, j+1, j+2`, i.e. to the
/// dimensionless offsets `(−1−s, −s, 1−s, 2−s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Peskin4Weights {
    shift: Vec<f64>,
    axis_weights: Vec<[f64; 4]>,
}

/// Residuals of the four postulates, per axis, plus the tensor sum of squares.
#[derive(Debug, Clone, PartialEq)]
pub struct PostulateResiduals {
    pub even_sum: Vec<f64>,
    pub odd_sum: Vec<f64>,
    pub first_moment: Vec<f64>,
    pub sum_of_squares: Vec<f64>,
    pub tensor_sum_of_squares: f64,
}

impl PostulateResiduals {
    pub fn max(&self) -> f64 {
        self.even_sum
            .iter()
            .chain(&self.odd_sum)
            .chain(&self.first_moment)
            .chain(&self.sum_of_squares)
            .map(|v| v.abs())
            .fold(self.tensor_sum_of_squares.abs(), f64::max)
    }
}

impl Peskin4Weights {
    /// Wraps externally supplied per-axis weights, e.g. read back from a file.
    pub fn from_parts(shift: Vec<f64>, axis_weights: Vec<[f64; 4]>) -> Result<Self> {
        check_len(shift.len(), axis_weights.len())?;
        if shift.is_empty() || shift.len() > 3 {
            return Err(Error::InvalidInput("shift needs 1 to 3 components".into()));
        }
        Ok(Self {
            shift,
            axis_weights,
        })
    }

    pub fn dimension(&self) -> usize {
        self.shift.len()
    }

    pub fn shift(&self) -> &[f64] {
        &self.shift
    }

    pub fn axis_weights(&self) -> &[[f64; 4]] {
        &self.axis_weights
    }

    pub fn offsets(s: f64) -> [f64; 4] {
        [-1.0 - s, -s, 1.0 - s, 2.0 - s]
    }

    /// Tensor-product weights over the `4^d` nodes, first axis fastest.
    pub fn tensor_weights(&self) -> Vec<f64> {
        let mut out = vec![1.0];
        for w in &self.axis_weights {
            out = w
                .iter()
                .flat_map(|wk| out.iter().map(move |o| o * wk))
                .collect::<Vec<_>>();
        }
        out
    }

    pub fn postulate_residuals(&self) -> PostulateResiduals {
        let mut r = PostulateResiduals {
            even_sum: Vec::new(),
            odd_sum: Vec::new(),
            first_moment: Vec::new(),
            sum_of_squares: Vec::new(),
            tensor_sum_of_squares: 0.0,
        };
        for (w, &s) in self.axis_weights.iter().zip(&self.shift) {
            let off = Self::offsets(s);
            r.even_sum.push(w[0] + w[2] - 0.5);
            r.odd_sum.push(w[1] + w[3] - 0.5);
            r.first_moment.push(dot(&off, w));
            r.sum_of_squares.push(dot(w, w) - 0.375);
        }
        let tensor: f64 = self.tensor_weights().iter().map(|v| v * v).sum();
        r.tensor_sum_of_squares = tensor - 0.375_f64.powi(self.dimension() as i32);
        r
    }
}

/// Solves the four postulates along each axis.
///
/// Writing the weights at offsets `(−1−s, −s, 1−s, 2−s)` as `(a, b, ½−a, ½−b)`
/// satisfies the even/odd sums. The first moment gives `a + b = k` with
/// `k = (3 − 2s)/4`, and the sum of squares then reduces to
/// `4a² − 4ka + 2k² − k + ⅛ = 0`. The smaller root is taken: it keeps every
/// weight non-negative, peaks at the two nodes nearest the evaluation point,
/// and joins continuously with the `s = 0` solution as `s → 1`.
pub fn solve_peskin4(shift: &[f64]) -> Result<Peskin4Weights> {
    if !(1..=3).contains(&shift.len()) {
        return Err(Error::InvalidInput("shift needs 1 to 3 components".into()));
    }
    let axis_weights = shift
        .iter()
        .map(|&s| {
            if !(0.0..1.0).contains(&s) {
                return Err(Error::InvalidInput(format!("shift {s} outside [0, 1)")));
            }
            let k = (3.0 - 2.0 * s) / 4.0;
            let disc = (-k * k + k - 0.125).max(0.0);
            let a = 0.5 * (k - disc.sqrt());
            let b = k - a;
            Ok([a, b, 0.5 - a, 0.5 - b])
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Peskin4Weights {
        shift: shift.to_vec(),
        axis_weights,
    })
}
