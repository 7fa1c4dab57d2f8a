//! CSV tables and JSON weight dumps. CSV reals use 17 significant digits and
//! LF line endings; JSON reals use the shortest representation that reads
//! back to the same `f64`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::{CircleRun, ErrorTable};
use crate::kernel::{
    build_basis, BasisDegree, DataSites, EvalPoint, KernelSource, KernelWeights, SolveMode,
};
use crate::qpsolve::Peskin4Weights;

fn real(out: &mut String, v: f64) {
    let _ = write!(out, "{v:.16e}");
}

pub const ERROR_TABLE_HEADER: &str = "marker_deg,rel_error,psi_min,psi_max,eq_residual,mode";
pub const WEIGHTS_HEADER: &str = "x,y,psi,marker_deg";

pub fn error_table_csv(table: &ErrorTable) -> String {
    let mut out = String::from(ERROR_TABLE_HEADER);
    out.push('\n');
    for r in &table.rows {
        for v in [
            r.marker_deg,
            r.rel_error,
            r.psi_min,
            r.psi_max,
            r.eq_residual,
        ] {
            real(&mut out, v);
            out.push(',');
        }
        let _ = writeln!(out, "{}", r.mode);
    }
    out
}

/// One row per stencil site and marker.
pub fn weights_csv(run: &CircleRun) -> String {
    let mut out = String::from(WEIGHTS_HEADER);
    out.push('\n');
    for (k, &deg) in run.kernels.iter().zip(&run.config.marker_angles_deg) {
        for (site, &w) in k.weights.sites().iter().zip(k.weights.psi()) {
            for v in [site[0], site[1], w] {
                real(&mut out, v);
                out.push(',');
            }
            real(&mut out, deg);
            out.push('\n');
        }
    }
    out
}

/// Serialized kernel: enough to rebuild [`KernelWeights`] and re-check its
/// moment conditions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightDump {
    pub sites: Vec<Vec<f64>>,
    pub psi: Vec<f64>,
    pub eq_residual: f64,
    pub source: KernelSource,
    pub eval: Vec<f64>,
    pub basis_degree: BasisDegree,
    pub mode: SolveMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shift: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axis_weights: Option<Vec<[f64; 4]>>,
}

impl WeightDump {
    pub fn from_kernel(weights: &KernelWeights) -> Self {
        Self {
            sites: weights.sites().points().to_vec(),
            psi: weights.psi().to_vec(),
            eq_residual: weights.equality_residual(),
            source: weights.source(),
            eval: weights.eval().coords().to_vec(),
            basis_degree: weights.basis().degree(),
            mode: weights.mode(),
            shift: None,
            axis_weights: None,
        }
    }

    pub fn with_peskin(mut self, p: &Peskin4Weights) -> Self {
        self.shift = Some(p.shift().to_vec());
        self.axis_weights = Some(p.axis_weights().to_vec());
        self
    }

    pub fn to_kernel(&self) -> Result<KernelWeights> {
        let eval = EvalPoint::new(self.eval.clone())?;
        let basis = build_basis(eval.dim(), self.basis_degree)?;
        KernelWeights::new(
            self.psi.clone(),
            DataSites::new(self.sites.clone())?,
            eval,
            basis,
            self.source,
            self.mode,
        )
    }

    pub fn peskin(&self) -> Result<Option<Peskin4Weights>> {
        match (&self.shift, &self.axis_weights) {
            (Some(s), Some(w)) => Peskin4Weights::from_parts(s.clone(), w.clone()).map(Some),
            (None, None) => Ok(None),
            _ => Err(Error::InvalidInput(
                "shift and axis_weights must appear together".into(),
            )),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("weight dump serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("weights file: {e}")))
    }
}
