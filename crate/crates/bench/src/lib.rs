//! Fixtures shared by the benchmarks.

use ibkernel::experiments::CircleCaseConfig;
use ibkernel::ibops::support_stencil;
use ibkernel::kernel::{assemble_system, build_basis};
use ibkernel::{BasisDegree, EvalPoint, KernelSystem, WeightFunction};

/// Two-sided ψ6 system at the first marker of the circle study.
pub fn marker_system() -> KernelSystem {
    let config = CircleCaseConfig::preset(1).unwrap();
    let grid = config.grid().unwrap();
    let eval = EvalPoint::new(config.markers().unwrap().positions()[0].clone()).unwrap();
    let wf = WeightFunction::six_point(config.h).unwrap();
    let stencil = support_stencil(&grid, &eval, wf.support_radius()).unwrap();
    let basis = build_basis(2, BasisDegree::Linear).unwrap();
    assemble_system(&stencil.sites, &eval, &wf, &basis).unwrap()
}
