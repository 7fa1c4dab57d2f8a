use criterion::{black_box, criterion_group, criterion_main, Criterion};
use ibkernel::experiments::{run_circle_case, CircleCaseConfig};
use ibkernel::kernel::generating_function_closed_form;
use ibkernel::onesided::{classify_side, restrict_weights, solve_problem_d};
use ibkernel::qpsolve::{solve_peskin4, solve_problem_b};
use ibkernel::{KernelBounds, ToleranceSet};
use ibkernel_bench::marker_system;

fn closed_form(c: &mut Criterion) {
    let system = marker_system();
    c.bench_function("closed_form_36", |b| {
        b.iter(|| generating_function_closed_form(black_box(&system)).unwrap())
    });
    c.bench_function("backus_gilbert_36", |b| {
        b.iter(|| solve_problem_b(black_box(&system)).unwrap())
    });
    c.bench_function("peskin4_2d", |b| {
        b.iter(|| solve_peskin4(black_box(&[0.3, 0.7])).unwrap())
    });
}

fn bounded(c: &mut Criterion) {
    let system = marker_system();
    let config = CircleCaseConfig::preset(3).unwrap();
    let mask = classify_side(&config.circle().unwrap(), system.sites());
    let restricted = restrict_weights(&system, &mask).unwrap();
    let tol = ToleranceSet::default();
    for (name, bounds) in [
        ("case3_box_qp", (-0.07, 0.5)),
        ("case4_box_qp", (0.0, 0.75)),
    ] {
        let bounds = KernelBounds::new(bounds.0, bounds.1).unwrap();
        c.bench_function(name, |b| {
            b.iter(|| solve_problem_d(black_box(&restricted), Some(bounds), &tol).unwrap())
        });
    }
}

fn circle(c: &mut Criterion) {
    let mut group = c.benchmark_group("circle_case");
    for case in 1..=4 {
        let config = CircleCaseConfig::preset(case).unwrap();
        group.bench_function(case.to_string(), |b| {
            b.iter(|| run_circle_case(black_box(&config)).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, closed_form, bounded, circle);
criterion_main!(benches);
