use criterion::{criterion_group, criterion_main, Criterion};
use halfsign_core::cusp::{build_cusp_triple, ContourSpec};
use halfsign_core::expsums::{k_and, salie_direct, ExpSumContext};
use halfsign_core::qforms::build_desk_form;
use halfsign_core::signs::{count_sign_changes, find_n0, kernel_j, IndexSet, ProgressionSums};
use halfsign_core::voronoi::{voronoi_progression, VoronoiParams};
use std::hint::black_box;

fn expsums(c: &mut Criterion) {
    c.bench_function("salie_direct c=1001", |b| b.iter(|| salie_direct(black_box(7), 0, 1001).unwrap()));
    let ctx = ExpSumContext::new(315, 4).unwrap();
    c.bench_function("k_and d=315", |b| b.iter(|| k_and(black_box(11), black_box(38), &ctx).unwrap()));
}

fn analytic(c: &mut Criterion) {
    let form = build_desk_form(20_000).unwrap();
    let triple = build_cusp_triple(&form, &ContourSpec::default(), 1e-6).unwrap();
    let p = VoronoiParams::new(8000.0, 1024, 3, 1, triple.ell).unwrap();
    c.bench_function("voronoi main term M=1024 d=3", |b| {
        b.iter(|| voronoi_progression(black_box(&p), &triple).unwrap())
    });
    let n0 = find_n0(1, 0, &triple.h, triple.ell).unwrap();
    let sums = ProgressionSums::new(0, 1, &triple.f).unwrap();
    let t = n0.params.t_m(20);
    c.bench_function("kernel_j t_20", |b| b.iter(|| kernel_j(black_box(t), 1.0, &n0.params, &sums).unwrap()));
    let set = IndexSet::squarefree(20_000);
    c.bench_function("count_sign_changes squarefree x=20000", |b| {
        b.iter(|| count_sign_changes(black_box(form.lambdas()), &set, 20_000).unwrap())
    });
}

criterion_group!(benches, expsums, analytic);
criterion_main!(benches);
