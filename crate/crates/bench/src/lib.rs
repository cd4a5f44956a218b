//! Shared fixtures for the kernel benchmarks.

use cglab_core::bundle::BundlePoint;
use cglab_core::catalog::{self, Params};
use cglab_core::geometry::Chart;
use cglab_core::maps::MapJet;

pub fn sphere_chart() -> Chart {
    catalog::build_chart("sphere", &Params::new()).expect("sphere chart")
}

pub fn heisenberg_chart() -> Chart {
    catalog::build_chart("heisenberg", &Params::new()).expect("heisenberg chart")
}

pub fn flat_projection(lambda: f64) -> MapJet {
    let mut params = Params::new();
    params.insert("m".into(), 3.0);
    params.insert("n".into(), 2.0);
    params.insert("lambda".into(), lambda);
    let (dp, cp) = catalog::default_chart_params("flat_projection", &params).unwrap();
    let dom = catalog::build_chart("flat", &dp).unwrap();
    let cod = catalog::build_chart("flat", &cp).unwrap();
    catalog::build_map("flat_projection", &dom, &cod, &params).unwrap()
}

pub fn bundle_point(chart: &Chart, x: Vec<f64>, xi: Vec<f64>) -> BundlePoint {
    let p = chart.point(x).expect("point in domain");
    let v = chart.tangent(&p, xi).expect("tangent");
    BundlePoint::new(p, v).expect("bundle point")
}
