//! One-sided and bounded kernels.
//!
//! Sites are split by the sign of a signed-distance function. Weights on the
//! excluded side are zeroed, which removes those sites from the quadratic
//! program entirely, and the remaining weights are optionally confined to
//! `[alpha, beta]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{
    assemble_system_with, DataSites, EvalPoint, KernelSource, KernelSystem, KernelWeights,
    PolynomialBasis, SolveMode, WeightFunction,
};
use crate::linalg::{rank, ToleranceSet};
use crate::qpsolve::{kernel_qp, scatter, solve_bounded_with, solve_eq_qp_with, FeasibilityReport};

/// Positive in Ω⁺, negative in Ω⁻.
pub trait SignedDistance: Send + Sync {
    fn distance(&self, x: &[f64]) -> f64;
}

impl<F> SignedDistance for F
where
    F: Fn(&[f64]) -> f64 + Send + Sync,
{
    fn distance(&self, x: &[f64]) -> f64 {
        self(x)
    }
}

/// Circle (sphere in 3D) with the exterior as Ω⁺.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Circle {
    center: Vec<f64>,
    radius: f64,
}

impl Circle {
    pub fn new(center: Vec<f64>, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidInput("circle radius must be positive".into()));
        }
        if center.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput("circle center must be finite".into()));
        }
        Ok(Self { center, radius })
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Point on the circle at `degrees` from the x axis (2D).
    pub fn point_at_degrees(&self, degrees: f64) -> Vec<f64> {
        let t = degrees.to_radians();
        vec![
            self.center[0] + self.radius * t.cos(),
            self.center[1] + self.radius * t.sin(),
        ]
    }
}

impl SignedDistance for Circle {
    fn distance(&self, x: &[f64]) -> f64 {
        let r2: f64 = x
            .iter()
            .zip(&self.center)
            .map(|(a, c)| (a - c) * (a - c))
            .sum();
        r2.sqrt() - self.radius
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Plus,
    Minus,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SideMask {
    labels: Vec<Side>,
}

impl SideMask {
    pub fn new(labels: Vec<Side>) -> Self {
        Self { labels }
    }

    pub fn uniform(len: usize, side: Side) -> Self {
        Self::new(vec![side; len])
    }

    pub fn labels(&self) -> &[Side] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn count(&self, side: Side) -> usize {
        self.labels.iter().filter(|s| **s == side).count()
    }
}

/// `Plus` iff the signed distance is strictly positive; sites on the
/// interface count as `Minus`.
pub fn classify_side(sd: &dyn SignedDistance, sites: &DataSites) -> SideMask {
    SideMask::new(
        sites
            .iter()
            .map(|x| {
                if sd.distance(x) > 0.0 {
                    Side::Plus
                } else {
                    Side::Minus
                }
            })
            .collect(),
    )
}

pub fn restrict_weights(system: &KernelSystem, mask: &SideMask) -> Result<KernelSystem> {
    restrict_weights_with(system, mask, &ToleranceSet::default())
}

/// Zeroes the weights of `Minus` sites and checks that the surviving sites
/// still determine the moment conditions.
pub fn restrict_weights_with(
    system: &KernelSystem,
    mask: &SideMask,
    tol: &ToleranceSet,
) -> Result<KernelSystem> {
    if mask.len() != system.weights().len() {
        return Err(Error::LengthMismatch {
            expected: system.weights().len(),
            found: mask.len(),
        });
    }
    let weights = system
        .weights()
        .iter()
        .zip(mask.labels())
        .map(|(&w, side)| if *side == Side::Plus { w } else { 0.0 })
        .collect();
    let restricted = system.with_weights(weights)?;
    let support = restricted.support(tol.support);
    let m = system.basis().size();
    if support.len() < m {
        return Err(Error::InsufficientSupport {
            found: support.len(),
            required: m,
        });
    }
    let r = rank(&restricted.a().select_columns(&support), tol);
    if r < m {
        return Err(Error::RankDeficientConstraints {
            rank: r,
            expected: m,
        });
    }
    Ok(restricted)
}

/// Uniform bounds `alpha ≤ Ψ_i ≤ beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBounds")]
pub struct KernelBounds {
    alpha: f64,
    beta: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBounds {
    alpha: f64,
    beta: f64,
}

impl TryFrom<RawBounds> for KernelBounds {
    type Error = Error;

    fn try_from(raw: RawBounds) -> Result<Self> {
        Self::new(raw.alpha, raw.beta)
    }
}

impl KernelBounds {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if alpha.is_nan() || beta.is_nan() || alpha > beta {
            return Err(Error::InvalidInput(format!(
                "kernel bounds need alpha <= beta, got [{alpha}, {beta}]"
            )));
        }
        Ok(Self { alpha, beta })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

/// Kernel weights together with solver diagnostics.
#[derive(Debug, Clone)]
pub struct BoundedKernel {
    pub weights: KernelWeights,
    /// Phase-1 outcome, present when bounds were imposed.
    pub phase1: Option<FeasibilityReport>,
    /// `½ Ψᵀ W⁻¹ Ψ` over the supported sites.
    pub objective: f64,
    pub iterations: usize,
}

/// `min ½ Ψᵀ W⁻¹ Ψ  s.t.  A Ψ = p` and optionally `alpha ≤ Ψ ≤ beta`, on the
/// sites with nonzero weight. Without bounds this is the equality QP; with
/// bounds a phase-1 search decides between the exact active-set solve and the
/// soft-constraint fallback.
pub fn solve_problem_d(
    system: &KernelSystem,
    bounds: Option<KernelBounds>,
    tol: &ToleranceSet,
) -> Result<BoundedKernel> {
    let (problem, support) = kernel_qp(system, tol)?;
    let (solution, phase1) = match bounds {
        None => (solve_eq_qp_with(&problem, tol)?, None),
        Some(b) => {
            let problem = problem.clone().with_uniform_bounds(b.alpha, b.beta)?;
            let (s, report) = solve_bounded_with(&problem, tol)?;
            (s, Some(report))
        }
    };
    let objective = problem.objective(&solution.x);
    let psi = scatter(system.sites().len(), &support, &solution.x);
    let weights = KernelWeights::from_system(system, psi, KernelSource::ProblemD, solution.mode)?;
    Ok(BoundedKernel {
        weights,
        phase1,
        objective,
        iterations: solution.iterations,
    })
}

/// Kernel whose support is restricted to Ω⁺ of `sd`, optionally bounded.
pub fn generate_one_sided_kernel(
    sites: &DataSites,
    eval: &EvalPoint,
    wf: &WeightFunction,
    basis: &PolynomialBasis,
    sd: &dyn SignedDistance,
    bounds: Option<KernelBounds>,
) -> Result<KernelWeights> {
    generate_one_sided_kernel_with(sites, eval, wf, basis, sd, bounds, &ToleranceSet::default())
        .map(|k| k.weights)
}

pub fn generate_one_sided_kernel_with(
    sites: &DataSites,
    eval: &EvalPoint,
    wf: &WeightFunction,
    basis: &PolynomialBasis,
    sd: &dyn SignedDistance,
    bounds: Option<KernelBounds>,
    tol: &ToleranceSet,
) -> Result<BoundedKernel> {
    let system = assemble_system_with(sites, eval, wf, basis, tol)?;
    let mask = classify_side(sd, sites);
    let restricted = restrict_weights_with(&system, &mask, tol)?;
    solve_problem_d(&restricted, bounds, tol)
}

impl BoundedKernel {
    pub fn is_exact(&self) -> bool {
        self.weights.mode() == SolveMode::Exact
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{build_basis, BasisDegree};
    use approx::assert_abs_diff_eq;

    const H: f64 = 0.075;

    fn circle() -> Circle {
        Circle::new(vec![0.0, 0.0], 0.5).unwrap()
    }

    /// Cell centers of the `[-1, 1]²`-anchored grid within three cells of `x`.
    fn stencil(x: &[f64]) -> DataSites {
        let centers: Vec<f64> = (0..27).map(|i| -1.0 + (i as f64 + 0.5) * H).collect();
        let mut pts = Vec::new();
        for &cy in &centers {
            for &cx in &centers {
                if ((cx - x[0]) / H).abs() < 3.0 && ((cy - x[1]) / H).abs() < 3.0 {
                    pts.push(vec![cx, cy]);
                }
            }
        }
        DataSites::new(pts).unwrap()
    }

    #[test]
    fn classify_examples() {
        let sites = DataSites::new(vec![vec![0.6, 0.0], vec![0.3, 0.0], vec![0.5, 0.0]]).unwrap();
        let mask = classify_side(&circle(), &sites);
        assert_eq!(mask.labels(), &[Side::Plus, Side::Minus, Side::Minus]);
        assert_eq!(mask.count(Side::Plus), 1);

        let half_plane = |x: &[f64]| x[1];
        let mask = classify_side(&half_plane, &sites);
        assert_eq!(mask.count(Side::Minus), 3);
    }

    #[test]
    fn circle_distance_is_exact() {
        let c = circle();
        assert_abs_diff_eq!(c.distance(&[0.0, 0.8]), 0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(c.distance(&[0.0, 0.0]), -0.5, epsilon = 1e-15);
    }

    #[test]
    fn restriction_masks() {
        let x = circle().point_at_degrees(40.0);
        let sites = stencil(&x);
        let eval = EvalPoint::new(x).unwrap();
        let wf = WeightFunction::six_point(H).unwrap();
        let basis = build_basis(2, BasisDegree::Linear).unwrap();
        let sys = crate::kernel::assemble_system(&sites, &eval, &wf, &basis).unwrap();

        let all_plus = restrict_weights(&sys, &SideMask::uniform(sites.len(), Side::Plus)).unwrap();
        assert_eq!(all_plus.weights(), sys.weights());

        assert!(matches!(
            restrict_weights(&sys, &SideMask::uniform(sites.len(), Side::Minus)),
            Err(Error::InsufficientSupport { found: 0, .. })
        ));

        let mask = classify_side(&circle(), &sites);
        let r = restrict_weights(&sys, &mask).unwrap();
        for ((w, site), side) in r.weights().iter().zip(sites.iter()).zip(mask.labels()) {
            if circle().distance(site) > 0.0 {
                assert!(*w > 0.0);
                assert_eq!(*side, Side::Plus);
            } else {
                assert_eq!(*w, 0.0);
            }
        }
    }

    #[test]
    fn collinear_survivors_are_rank_deficient() {
        let sites = DataSites::new(vec![
            vec![-0.1, 0.0],
            vec![0.0, 0.0],
            vec![0.1, 0.0],
            vec![0.0, 0.1],
        ])
        .unwrap();
        let eval = EvalPoint::new(vec![0.0, 0.02]).unwrap();
        let wf = WeightFunction::six_point(0.1).unwrap();
        let basis = build_basis(2, BasisDegree::Linear).unwrap();
        let sys = crate::kernel::assemble_system(&sites, &eval, &wf, &basis).unwrap();
        let mask = SideMask::new(vec![Side::Plus, Side::Plus, Side::Plus, Side::Minus]);
        assert!(matches!(
            restrict_weights(&sys, &mask),
            Err(Error::RankDeficientConstraints {
                rank: 2,
                expected: 3
            })
        ));
    }

    #[test]
    fn bounds_validation() {
        assert!(KernelBounds::new(0.5, -0.07).is_err());
        let b = KernelBounds::new(-0.07, 0.5).unwrap();
        assert_eq!((b.alpha(), b.beta()), (-0.07, 0.5));
    }

    #[test]
    fn two_sided_support_keeps_weight_function() {
        let x = circle().point_at_degrees(140.0);
        let sites = stencil(&x);
        let eval = EvalPoint::new(x).unwrap();
        let wf = WeightFunction::six_point(H).unwrap();
        let basis = build_basis(2, BasisDegree::Linear).unwrap();
        let everywhere = |_: &[f64]| 1.0;
        let k = generate_one_sided_kernel(&sites, &eval, &wf, &basis, &everywhere, None).unwrap();
        let sys = crate::kernel::assemble_system(&sites, &eval, &wf, &basis).unwrap();
        for (a, b) in k.psi().iter().zip(sys.weights()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn one_sided_kernels_vanish_inside() {
        let wf = WeightFunction::six_point(H).unwrap();
        let basis = build_basis(2, BasisDegree::Linear).unwrap();
        for deg in [40.0, 140.0, 230.0, 310.0] {
            let x = circle().point_at_degrees(deg);
            let sites = stencil(&x);
            let eval = EvalPoint::new(x).unwrap();
            for bounds in [None, Some(KernelBounds::new(-0.07, 0.5).unwrap())] {
                let k = generate_one_sided_kernel(&sites, &eval, &wf, &basis, &circle(), bounds)
                    .unwrap();
                let inside: f64 = sites
                    .iter()
                    .zip(k.psi())
                    .filter(|(s, _)| circle().distance(s) <= 0.0)
                    .map(|(_, v)| v.abs())
                    .sum();
                assert_eq!(inside, 0.0);
                assert!(k.equality_residual() <= 1e-10);
                if let Some(b) = bounds {
                    assert!(k.min() >= b.alpha() - 1e-10 && k.max() <= b.beta() + 1e-10);
                }
            }
        }
    }

    #[test]
    fn tighter_bounds_never_lower_the_objective() {
        let wf = WeightFunction::six_point(H).unwrap();
        let basis = build_basis(2, BasisDegree::Linear).unwrap();
        let tol = ToleranceSet::default();
        for deg in [40.0, 140.0, 230.0, 310.0] {
            let x = circle().point_at_degrees(deg);
            let sites = stencil(&x);
            let eval = EvalPoint::new(x).unwrap();
            let run = |b: Option<KernelBounds>| {
                generate_one_sided_kernel_with(&sites, &eval, &wf, &basis, &circle(), b, &tol)
                    .unwrap()
                    .objective
            };
            let free = run(None);
            let wide = run(Some(KernelBounds::new(-0.2, 1.0).unwrap()));
            let tight = run(Some(KernelBounds::new(-0.07, 0.5).unwrap()));
            assert!(free <= wide * (1.0 + 1e-12), "{deg}: {free} > {wide}");
            assert!(wide <= tight * (1.0 + 1e-12), "{deg}: {wide} > {tight}");
        }
    }
}
