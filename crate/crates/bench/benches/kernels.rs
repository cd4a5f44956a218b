//! Microbenchmarks for the hot kernels: jet products, Christoffel symbols,
//! curvature, the bundle metric, conformality verdicts and one point of the
//! Levi-Civita verification.

use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use cglab_bench::{bundle_point, flat_projection, heisenberg_chart, sphere_chart};
use cglab_core::bundle::{self, CGParams};
use cglab_core::certify;
use cglab_core::jet::{seed_bundle_coords, seed_coords};
use cglab_core::lift::LiftedMap;

fn bench_jets(c: &mut Criterion) {
    c.bench_function("jet_mul_3var_order3", |b| {
        let s = seed_coords(&[0.3, -0.7, 1.1], 3);
        let f = (&s[0] * &s[1]).sin() + &s[2].exp();
        let g = (&s[0] + &s[2]).ln() * &s[1];
        b.iter(|| black_box(&f) * black_box(&g));
    });
    c.bench_function("jet_mul_6var_order3", |b| {
        let (x, xi) = seed_bundle_coords(&[0.3, -0.7, 1.1], &[0.2, 0.4, -0.6], 3);
        let f = (&x[0] * &xi[1]).sin() + &x[2].exp();
        let g = (&x[0] + &xi[2] + 3.0).ln() * &xi[0];
        b.iter(|| black_box(&f) * black_box(&g));
    });
}

fn bench_geometry(c: &mut Criterion) {
    let sphere = sphere_chart();
    let p = sphere.point(vec![1.1, 0.4]).unwrap();
    c.bench_function("christoffel_sphere", |b| {
        b.iter(|| sphere.christoffel_at(black_box(&p)).unwrap());
    });
    c.bench_function("riemann_sphere", |b| {
        b.iter(|| sphere.riemann_at(black_box(&p)).unwrap());
    });
    let heis = heisenberg_chart();
    let ph = heis.point(vec![0.5, -0.3, 0.8]).unwrap();
    c.bench_function("christoffel_heisenberg", |b| {
        b.iter(|| heis.christoffel_at(black_box(&ph)).unwrap());
    });
}

fn bench_bundle(c: &mut Criterion) {
    let heis = heisenberg_chart();
    let at = bundle_point(&heis, vec![0.5, -0.3, 0.8], vec![0.4, 0.9, -0.2]);
    let params = CGParams::cheeger_gromoll();
    let a = cglab_core::bundle::SecondTangent::new(
        at.clone(),
        nalgebra_vec(&[0.3, -0.8, 0.5]),
        nalgebra_vec(&[1.1, 0.2, -0.4]),
    );
    c.bench_function("cg_inner_heisenberg", |b| {
        b.iter(|| bundle::cg_inner(black_box(&params), black_box(&a), black_box(&a)).unwrap());
    });
    c.bench_function("levi_civita_one_point_flat", |b| {
        let flat = cglab_core::geometry::Chart::flat(3, 2.0, 1.0);
        b.iter(|| bundle::verify_levi_civita(black_box(&params), &flat, 1, 5).unwrap());
    });
}

fn bench_certify(c: &mut Criterion) {
    let phi = flat_projection(2.0);
    let lifted = LiftedMap::new(phi.clone());
    let pm = CGParams::new(0.0, 1.0, 1.0).unwrap();
    let pn = CGParams::new(0.0, 0.5, 1.0).unwrap();
    let at = bundle_point(phi.domain(), vec![0.3, -0.2, 0.6], vec![0.9, -0.4, 0.7]);
    c.bench_function("hc_verdict_lifted_flat_projection", |b| {
        b.iter(|| certify::hc_verdict_lifted(&lifted, &pm, &pn, black_box(&at), 1e-7).unwrap());
    });
}

fn nalgebra_vec(v: &[f64]) -> nalgebra::DVector<f64> {
    nalgebra::DVector::from_vec(v.to_vec())
}

criterion_group!(benches, bench_jets, bench_geometry, bench_bundle, bench_certify);
criterion_main!(benches);
