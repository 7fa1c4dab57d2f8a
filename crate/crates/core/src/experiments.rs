//! Circular-interface interpolation study: a linear field sampled on a
//! Cartesian grid is interpolated to four markers on a circle with kernels
//! of increasing restriction.
//!
//! | case | support          | bounds        |
//! |------|------------------|---------------|
//! | 1    | two-sided        | none          |
//! | 2    | Ω⁺ (outside)     | none          |
//! | 3    | Ω⁺               | (−0.07, 0.5)  |
//! | 4    | Ω⁺               | (0, 0.75)     |

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ibops::{
    make_grid, sample_field, CartesianGrid, InterpolationOperator, KernelStrategy, MarkerKernel,
    MarkerSet,
};
use crate::kernel::{
    moment_residuals, BasisDegree, KernelWeights, PolynomialBasis, SolveMode, WeightKind,
};
use crate::linalg::{check_len, ToleranceSet};
use crate::onesided::{Circle, KernelBounds, SignedDistance};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircleCaseConfig {
    /// `(lo, hi)` per axis.
    pub extents: Vec<(f64, f64)>,
    pub h: f64,
    pub center: Vec<f64>,
    pub radius: f64,
    pub marker_angles_deg: Vec<f64>,
    pub case: u8,
    #[serde(default)]
    pub bounds: Option<KernelBounds>,
    /// `(a, b)` in `g = a x + b y`.
    pub field: (f64, f64),
}

impl CircleCaseConfig {
    /// The standard setup for `case` (1 to 4).
    pub fn preset(case: u8) -> Result<Self> {
        let bounds = match case {
            1 | 2 => None,
            3 => Some(KernelBounds::new(-0.07, 0.5)?),
            4 => Some(KernelBounds::new(0.0, 0.75)?),
            _ => {
                return Err(Error::InvalidInput(format!(
                    "case must be 1 to 4, got {case}"
                )))
            }
        };
        Ok(Self {
            extents: vec![(-1.0, 1.0), (-1.0, 1.0)],
            h: 0.075,
            center: vec![0.0, 0.0],
            radius: 0.5,
            marker_angles_deg: vec![40.0, 140.0, 230.0, 310.0],
            case,
            bounds,
            field: (10.0, 5.0),
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=4).contains(&self.case) {
            return Err(Error::InvalidInput(format!(
                "case must be 1 to 4, got {}",
                self.case
            )));
        }
        if self.case >= 3 && self.bounds.is_none() {
            return Err(Error::InvalidInput(format!(
                "case {} requires bounds",
                self.case
            )));
        }
        if self.extents.len() != 2 {
            return Err(Error::InvalidInput(
                "the circle study is two-dimensional".into(),
            ));
        }
        check_len(2, self.center.len())?;
        if self.marker_angles_deg.is_empty()
            || self.marker_angles_deg.iter().any(|a| !a.is_finite())
        {
            return Err(Error::InvalidInput(
                "marker angles must be finite and non-empty".into(),
            ));
        }
        if !self.field.0.is_finite() || !self.field.1.is_finite() {
            return Err(Error::InvalidInput(
                "field coefficients must be finite".into(),
            ));
        }
        Circle::new(self.center.clone(), self.radius)?;
        Ok(())
    }

    pub fn circle(&self) -> Result<Circle> {
        Circle::new(self.center.clone(), self.radius)
    }

    pub fn grid(&self) -> Result<CartesianGrid> {
        make_grid(&self.extents, self.h)
    }

    pub fn markers(&self) -> Result<MarkerSet> {
        let c = self.circle()?;
        MarkerSet::new(
            self.marker_angles_deg
                .iter()
                .map(|&d| c.point_at_degrees(d))
                .collect(),
        )
    }

    /// ψ6 weights, linear basis, Problem D; Case 1 keeps both sides, the
    /// others restrict to the outside of the circle.
    pub fn strategy(&self) -> Result<KernelStrategy> {
        self.validate()?;
        let interface: Option<Arc<dyn SignedDistance>> = match self.case {
            1 => None,
            _ => Some(Arc::new(self.circle()?)),
        };
        let bounds = if self.case >= 3 { self.bounds } else { None };
        Ok(KernelStrategy {
            weight: WeightKind::SixPointSpline,
            basis: BasisDegree::Linear,
            ..KernelStrategy::one_sided(interface, bounds)
        })
    }

    fn g(&self, x: &[f64]) -> f64 {
        self.field.0 * x[0] + self.field.1 * x[1]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRow {
    pub marker_deg: f64,
    /// `|𝒫g − g| / |g|` at the exact marker position (absolute error when
    /// `g` vanishes there).
    pub rel_error: f64,
    pub psi_min: f64,
    pub psi_max: f64,
    pub eq_residual: f64,
    pub mode: SolveMode,
    /// Phase-1 verdict when bounds were imposed.
    pub phase1_feasible: Option<bool>,
    pub phase1_violation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ErrorTable {
    pub rows: Vec<ErrorRow>,
}

impl ErrorTable {
    pub fn max_rel_error(&self) -> f64 {
        self.rows.iter().map(|r| r.rel_error).fold(0.0, f64::max)
    }

    /// Smallest and largest weight over all markers.
    pub fn psi_range(&self) -> (f64, f64) {
        self.rows
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
                (lo.min(r.psi_min), hi.max(r.psi_max))
            })
    }
}

#[derive(Debug, Clone)]
pub struct CircleRun {
    pub config: CircleCaseConfig,
    pub table: ErrorTable,
    pub kernels: Vec<MarkerKernel>,
}

pub fn run_circle_case(config: &CircleCaseConfig) -> Result<CircleRun> {
    run_circle_case_with(config, &ToleranceSet::default())
}

pub fn run_circle_case_with(config: &CircleCaseConfig, tol: &ToleranceSet) -> Result<CircleRun> {
    let strategy = config.strategy()?.with_tolerances(*tol);
    let grid = config.grid()?;
    let markers = config.markers()?;
    let field = sample_field(&grid, |x| config.g(x));
    let op = InterpolationOperator::build(&grid, &markers, &strategy)?;
    let values = op.interpolate(&field)?;

    let rows = op
        .kernels()
        .iter()
        .zip(&values)
        .zip(markers.positions())
        .zip(&config.marker_angles_deg)
        .map(|(((k, &pg), x), &deg)| {
            let exact = config.g(x);
            let err = (pg - exact).abs();
            ErrorRow {
                marker_deg: deg,
                rel_error: if exact == 0.0 { err } else { err / exact.abs() },
                psi_min: k.weights.min(),
                psi_max: k.weights.max(),
                eq_residual: k.weights.equality_residual(),
                mode: k.weights.mode(),
                phase1_feasible: k.phase1.as_ref().map(|r| r.feasible),
                phase1_violation: k.phase1.as_ref().map(|r| r.violation),
            }
        })
        .collect();
    Ok(CircleRun {
        config: config.clone(),
        table: ErrorTable { rows },
        kernels: op.kernels().to_vec(),
    })
}

/// `|Σ_i p_j(x_i) ψ_i − p_j(x̄)|` for every member of `basis`.
pub fn validate_moments(weights: &KernelWeights, basis: &PolynomialBasis) -> Result<Vec<f64>> {
    Ok(
        moment_residuals(weights.psi(), weights.sites(), weights.eval(), basis)?
            .into_iter()
            .map(f64::abs)
            .collect(),
    )
}

/// `(‖a.psi − b‖₂, ‖a.psi − b‖∞)`
pub fn compare_kernels(a: &KernelWeights, b: &[f64]) -> Result<(f64, f64)> {
    check_len(a.psi().len(), b.len())?;
    let (sq, inf) = a
        .psi()
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold((0.0, 0.0_f64), |(s, m), d| (s + d * d, m.max(d)));
    Ok((sq.sqrt(), inf))
}
