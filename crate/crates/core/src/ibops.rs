//! Cell-centered Cartesian grids, marker stencils and the interpolation /
//! spreading operator pair.
//!
//! Both operators use the same per-marker kernel Ψ_k, so `spread` is the exact
//! transpose of `interpolate`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::kernel::{
    assemble_system_with, build_basis, generating_function_closed_form_with, BasisDegree,
    DataSites, EvalPoint, KernelSource, KernelWeights, SolveMode, WeightFunction, WeightKind,
};
use crate::linalg::{check_len, dot, ToleranceSet};
use crate::onesided::{
    classify_side, restrict_weights_with, solve_problem_d, KernelBounds, SignedDistance,
};
use crate::qpsolve::{solve_peskin4, solve_problem_b_with, FeasibilityReport};

/// Offsets this close to the support radius (relative) count as outside it.
const SUPPORT_EDGE_SNAP: f64 = 1e-12;

/// Uniform cell-centered grid; cell `i` along an axis has its center at
/// `origin + (i + ½) h`. Linear cell indices run fastest along the first axis.
#[derive(Debug, Clone, PartialEq)]
pub struct CartesianGrid {
    origin: Vec<f64>,
    h: f64,
    counts: Vec<usize>,
}

/// Grid over `extents` (one `(lo, hi)` pair per axis) with cell width `h`.
///
/// Each axis gets `round((hi − lo) / h)` cells starting at `lo`; when the
/// length is not a multiple of `h` the actual upper edge differs from `hi`
/// by less than `h` and is reported by [`CartesianGrid::upper_edge`].
pub fn make_grid(extents: &[(f64, f64)], h: f64) -> Result<CartesianGrid> {
    if extents.is_empty() || extents.len() > 3 {
        return Err(Error::DegenerateDomain(format!(
            "need 1 to 3 axes, got {}",
            extents.len()
        )));
    }
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::DegenerateDomain(format!(
            "cell width must be positive, got {h}"
        )));
    }
    let mut counts = Vec::with_capacity(extents.len());
    for &(lo, hi) in extents {
        if !lo.is_finite() || !hi.is_finite() || !(hi > lo) {
            return Err(Error::DegenerateDomain(format!("axis extent [{lo}, {hi}]")));
        }
        let n = ((hi - lo) / h).round();
        if n < 1.0 {
            return Err(Error::DegenerateDomain(format!(
                "axis extent [{lo}, {hi}] is shorter than half a cell"
            )));
        }
        counts.push(n as usize);
    }
    Ok(CartesianGrid {
        origin: extents.iter().map(|e| e.0).collect(),
        h,
        counts,
    })
}

impl CartesianGrid {
    pub fn dim(&self) -> usize {
        self.counts.len()
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn num_cells(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn lower_edge(&self, axis: usize) -> f64 {
        self.origin[axis]
    }

    pub fn upper_edge(&self, axis: usize) -> f64 {
        self.origin[axis] + self.counts[axis] as f64 * self.h
    }

    pub fn center_coord(&self, axis: usize, index: usize) -> f64 {
        self.origin[axis] + (index as f64 + 0.5) * self.h
    }

    pub fn linear_index(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.dim());
        idx.iter()
            .zip(&self.counts)
            .rev()
            .fold(0, |acc, (&i, &n)| acc * n + i)
    }

    pub fn multi_index(&self, mut linear: usize) -> Vec<usize> {
        self.counts
            .iter()
            .map(|&n| {
                let i = linear % n;
                linear /= n;
                i
            })
            .collect()
    }

    pub fn center(&self, linear: usize) -> Vec<f64> {
        self.multi_index(linear)
            .iter()
            .enumerate()
            .map(|(axis, &i)| self.center_coord(axis, i))
            .collect()
    }

    /// Fractional cell-index position of `x` along `axis` (cell centers sit
    /// at integers).
    fn index_position(&self, axis: usize, x: f64) -> f64 {
        (x - self.origin[axis]) / self.h - 0.5
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    grid: CartesianGrid,
    values: Vec<f64>,
}

impl GridField {
    pub fn new(grid: CartesianGrid, values: Vec<f64>) -> Result<Self> {
        check_len(grid.num_cells(), values.len())?;
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: &CartesianGrid) -> Self {
        Self {
            values: vec![0.0; grid.num_cells()],
            grid: grid.clone(),
        }
    }

    pub fn grid(&self) -> &CartesianGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Sum over cells of `self · other`.
    pub fn inner(&self, other: &GridField) -> Result<f64> {
        check_len(self.values.len(), other.values.len())?;
        Ok(dot(&self.values, &other.values))
    }
}

/// Samples `f` at every cell center.
pub fn sample_field(grid: &CartesianGrid, f: impl Fn(&[f64]) -> f64) -> GridField {
    let values = (0..grid.num_cells()).map(|c| f(&grid.center(c))).collect();
    GridField {
        grid: grid.clone(),
        values,
    }
}

/// Lagrangian marker positions.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkerSet {
    positions: Vec<Vec<f64>>,
}

impl MarkerSet {
    pub fn new(positions: Vec<Vec<f64>>) -> Result<Self> {
        let d = positions.first().map_or(0, Vec::len);
        for p in &positions {
            check_len(d, p.len())?;
            if p.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidInput(
                    "marker positions must be finite".into(),
                ));
            }
        }
        Ok(Self { positions })
    }

    pub fn positions(&self) -> &[Vec<f64>] {
        &self.positions
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

/// Grid cells supporting one evaluation point.
#[derive(Debug, Clone, PartialEq)]
pub struct Stencil {
    pub cells: Vec<usize>,
    pub sites: DataSites,
}

fn tensor_stencil(grid: &CartesianGrid, per_axis: &[Vec<usize>]) -> Result<Stencil> {
    let mut multi: Vec<Vec<usize>> = vec![Vec::new()];
    for axis_cells in per_axis {
        multi = axis_cells
            .iter()
            .flat_map(|&i| {
                multi.iter().map(move |prefix| {
                    let mut v = prefix.clone();
                    v.push(i);
                    v
                })
            })
            .collect();
    }
    let cells: Vec<usize> = multi.iter().map(|idx| grid.linear_index(idx)).collect();
    let sites = DataSites::new(cells.iter().map(|&c| grid.center(c)).collect())?;
    Ok(Stencil { cells, sites })
}

fn outside(eval: &EvalPoint) -> Error {
    Error::StencilOutsideDomain {
        point: eval.coords().to_vec(),
    }
}

/// Cell centers whose per-axis offset from `eval` is strictly below
/// `radius_in_cells · h`.
pub fn support_stencil(
    grid: &CartesianGrid,
    eval: &EvalPoint,
    radius_in_cells: f64,
) -> Result<Stencil> {
    check_len(grid.dim(), eval.dim())?;
    if !(radius_in_cells > 0.0) {
        return Err(Error::InvalidInput(
            "stencil radius must be positive".into(),
        ));
    }
    let reach = radius_in_cells * grid.h;
    let mut per_axis = Vec::with_capacity(grid.dim());
    for (axis, &x) in eval.coords().iter().enumerate() {
        if x - reach < grid.lower_edge(axis) || x + reach > grid.upper_edge(axis) {
            return Err(outside(eval));
        }
        let t = grid.index_position(axis, x);
        let first = (t - radius_in_cells).ceil().max(0.0) as usize;
        let last = ((t + radius_in_cells).floor() as usize).min(grid.counts[axis] - 1);
        let cells: Vec<usize> = (first..=last)
            .filter(|&i| {
                let off = (i as f64 - t).abs();
                radius_in_cells - off > SUPPORT_EDGE_SNAP * radius_in_cells
            })
            .collect();
        per_axis.push(cells);
    }
    tensor_stencil(grid, &per_axis)
}

/// The four nodes `j−1 … j+2` around `eval` along each axis, and the
/// fractional shifts of `eval` past node `j`.
pub fn peskin4_stencil(grid: &CartesianGrid, eval: &EvalPoint) -> Result<(Stencil, Vec<f64>)> {
    check_len(grid.dim(), eval.dim())?;
    let mut per_axis = Vec::with_capacity(grid.dim());
    let mut shifts = Vec::with_capacity(grid.dim());
    for (axis, &x) in eval.coords().iter().enumerate() {
        let t = grid.index_position(axis, x);
        let j = t.floor();
        if j < 1.0 || j + 2.0 > (grid.counts[axis] - 1) as f64 {
            return Err(outside(eval));
        }
        let s = (t - j).clamp(0.0, 1.0 - f64::EPSILON);
        let j = j as usize;
        per_axis.push((j - 1..=j + 2).collect());
        shifts.push(s);
    }
    Ok((tensor_stencil(grid, &per_axis)?, shifts))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Formulation {
    /// Closed-form moving least squares, `Ψ = W Aᵀ G⁻¹ p`.
    Standard,
    /// Equality-constrained QP on `½ Ψᵀ W⁻¹ Ψ`.
    BackusGilbert,
    /// Four-point kernel from its postulates.
    Peskin4,
    /// Equality QP with optional side restriction and bounds.
    OneSided,
}

/// Everything needed to build Ψ at a marker: weight function, basis, and for
/// [`Formulation::OneSided`] the interface and bounds.
#[derive(Clone)]
pub struct KernelStrategy {
    pub formulation: Formulation,
    pub weight: WeightKind,
    pub basis: BasisDegree,
    pub interface: Option<Arc<dyn SignedDistance>>,
    pub bounds: Option<KernelBounds>,
    pub tolerances: ToleranceSet,
}

impl fmt::Debug for KernelStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KernelStrategy")
            .field("formulation", &self.formulation)
            .field("weight", &self.weight)
            .field("basis", &self.basis)
            .field(
                "interface",
                &self.interface.as_ref().map(|_| "<signed distance>"),
            )
            .field("bounds", &self.bounds)
            .finish()
    }
}

impl KernelStrategy {
    fn with_formulation(formulation: Formulation) -> Self {
        Self {
            formulation,
            weight: WeightKind::SixPointSpline,
            basis: BasisDegree::Linear,
            interface: None,
            bounds: None,
            tolerances: ToleranceSet::default(),
        }
    }

    pub fn standard() -> Self {
        Self::with_formulation(Formulation::Standard)
    }

    pub fn backus_gilbert() -> Self {
        Self::with_formulation(Formulation::BackusGilbert)
    }

    pub fn peskin4() -> Self {
        Self {
            weight: WeightKind::FourPointPeskin,
            ..Self::with_formulation(Formulation::Peskin4)
        }
    }

    /// Support restricted to the positive side of `interface` when given,
    /// weights confined to `bounds` when given.
    pub fn one_sided(
        interface: Option<Arc<dyn SignedDistance>>,
        bounds: Option<KernelBounds>,
    ) -> Self {
        Self {
            interface,
            bounds,
            ..Self::with_formulation(Formulation::OneSided)
        }
    }

    pub fn with_tolerances(mut self, tolerances: ToleranceSet) -> Self {
        self.tolerances = tolerances;
        self
    }

    /// Stencil and kernel for one evaluation point.
    pub fn kernel_at(&self, grid: &CartesianGrid, eval: &EvalPoint) -> Result<MarkerKernel> {
        let tol = &self.tolerances;
        let basis = build_basis(eval.dim(), self.basis)?;
        if self.formulation == Formulation::Peskin4 {
            let (stencil, shift) = peskin4_stencil(grid, eval)?;
            let psi = solve_peskin4(&shift)?.tensor_weights();
            let weights = KernelWeights::new(
                psi,
                stencil.sites.clone(),
                eval.clone(),
                basis,
                KernelSource::ProblemC,
                SolveMode::Exact,
            )?;
            return Ok(MarkerKernel {
                stencil,
                weights,
                phase1: None,
            });
        }
        let wf = WeightFunction::new(self.weight.clone(), grid.h())?;
        let stencil = support_stencil(grid, eval, wf.support_radius())?;
        let system = assemble_system_with(&stencil.sites, eval, &wf, &basis, tol)?;
        let (weights, phase1) = match self.formulation {
            Formulation::Standard => (generating_function_closed_form_with(&system, tol)?, None),
            Formulation::BackusGilbert => (solve_problem_b_with(&system, tol)?, None),
            Formulation::OneSided => {
                let system = match &self.interface {
                    Some(sd) => {
                        let mask = classify_side(sd.as_ref(), &stencil.sites);
                        restrict_weights_with(&system, &mask, tol)?
                    }
                    None => system,
                };
                let k = solve_problem_d(&system, self.bounds, tol)?;
                (k.weights, k.phase1)
            }
            Formulation::Peskin4 => unreachable!("handled above"),
        };
        Ok(MarkerKernel {
            stencil,
            weights,
            phase1,
        })
    }
}

#[derive(Debug, Clone)]
pub struct MarkerKernel {
    pub stencil: Stencil,
    pub weights: KernelWeights,
    pub phase1: Option<FeasibilityReport>,
}

/// Per-marker kernels on a fixed grid; applies interpolation and spreading
/// with identical weights.
#[derive(Debug, Clone)]
pub struct InterpolationOperator {
    grid: CartesianGrid,
    kernels: Vec<MarkerKernel>,
}

impl InterpolationOperator {
    pub fn build(
        grid: &CartesianGrid,
        markers: &MarkerSet,
        strategy: &KernelStrategy,
    ) -> Result<Self> {
        let kernels = markers
            .positions()
            .iter()
            .map(|p| strategy.kernel_at(grid, &EvalPoint::new(p.clone())?))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            grid: grid.clone(),
            kernels,
        })
    }

    pub fn kernels(&self) -> &[MarkerKernel] {
        &self.kernels
    }

    pub fn grid(&self) -> &CartesianGrid {
        &self.grid
    }

    /// `u_k = Σ_i Ψ_k,i u(x_i)`
    pub fn interpolate(&self, field: &GridField) -> Result<Vec<f64>> {
        check_len(self.grid.num_cells(), field.values().len())?;
        Ok(self
            .kernels
            .iter()
            .map(|k| {
                k.stencil
                    .cells
                    .iter()
                    .zip(k.weights.psi())
                    .map(|(&c, w)| w * field.values()[c])
                    .sum()
            })
            .collect())
    }

    /// `f(x_i) += Σ_k F_k Ψ_k,i`, accumulated in marker order.
    pub fn spread(&self, values: &[f64]) -> Result<GridField> {
        check_len(self.kernels.len(), values.len())?;
        let mut field = GridField::zeros(&self.grid);
        for (k, &f) in self.kernels.iter().zip(values) {
            for (&c, w) in k.stencil.cells.iter().zip(k.weights.psi()) {
                field.values[c] += f * w;
            }
        }
        Ok(field)
    }
}

pub fn interpolate(
    field: &GridField,
    markers: &MarkerSet,
    strategy: &KernelStrategy,
) -> Result<Vec<f64>> {
    InterpolationOperator::build(field.grid(), markers, strategy)?.interpolate(field)
}

pub fn spread(
    values: &[f64],
    markers: &MarkerSet,
    grid: &CartesianGrid,
    strategy: &KernelStrategy,
) -> Result<GridField> {
    InterpolationOperator::build(grid, markers, strategy)?.spread(values)
}
