//! Built-in charts and maps with declared ground truth.
//!
//! Every map entry carries the geometric flags it is supposed to have
//! (totally geodesic, Riemannian submersion, constant dilatation, integrable
//! horizontal distribution, totally geodesic fibers). The scenario layer
//! re-measures each declared flag — a catalog self-test — so a wrong entry
//! cannot survive unnoticed.

use std::collections::BTreeMap;

use crate::error::{GeomError, Result};
use crate::geometry::Chart;
use crate::jet::Jet;
use crate::maps::MapJet;

/// Parameters supplied to a catalog constructor.
pub type Params = BTreeMap<String, f64>;

fn get(params: &Params, key: &str, default: f64) -> f64 {
    params.get(key).copied().unwrap_or(default)
}

fn get_dim(params: &Params, key: &str, default: usize) -> Result<usize> {
    let v = get(params, key, default as f64);
    if v.fract() != 0.0 || v < 1.0 || v > 16.0 {
        return Err(GeomError::Usage(format!("parameter `{key}` must be a small positive integer, got {v}")));
    }
    Ok(v as usize)
}

/// Declared geometry of a catalog map.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GroundTruth {
    pub totally_geodesic: bool,
    pub riemannian_submersion: bool,
    /// `Some(lambda)` when the dilatation is constant; `None` when it varies.
    pub constant_dilatation: Option<f64>,
    /// `None` when there is no horizontal pair to bracket (or all critical).
    pub t_zero: Option<bool>,
    /// `None` when there are no fibers (`dim M = dim N`) or the map is critical.
    pub fibers_totally_geodesic: Option<bool>,
    /// every point is critical (the constant map)
    pub all_critical: bool,
}

/// A described entry of the chart or map catalog.
#[derive(Clone, Debug)]
pub struct EntryInfo {
    pub id: &'static str,
    pub summary: &'static str,
    /// `(name, default, meaning)`
    pub params: &'static [(&'static str, f64, &'static str)],
}

/// Charts available to scenarios.
pub fn chart_entries() -> Vec<EntryInfo> {
    vec![
        EntryInfo {
            id: "flat",
            summary: "Euclidean box with metric factor*I",
            params: &[
                ("dim", 2.0, "dimension"),
                ("extent", 2.0, "half-width of the coordinate box"),
                ("factor", 1.0, "constant conformal factor of the metric"),
            ],
        },
        EntryInfo {
            id: "sphere",
            summary: "unit sphere in polar coordinates, poles excluded by margin 0.1",
            params: &[],
        },
        EntryInfo {
            id: "sphere_product",
            summary: "S^2 x R product metric on one sphere chart",
            params: &[],
        },
        EntryInfo {
            id: "heisenberg",
            summary: "R^3 with the left-invariant metric of the frame {dx, dy + x dz, dz}",
            params: &[],
        },
        EntryInfo {
            id: "warped_product",
            summary: "R^2 x R with metric dx^2 + dy^2 + e^{2x} dz^2",
            params: &[],
        },
        EntryInfo {
            id: "polar_plane",
            summary: "punctured plane in polar coordinates, dr^2 + r^2 dtheta^2",
            params: &[],
        },
    ]
}

pub fn build_chart(id: &str, params: &Params) -> Result<Chart> {
    match id {
        "flat" => {
            let dim = get_dim(params, "dim", 2)?;
            let extent = get(params, "extent", 2.0);
            let factor = get(params, "factor", 1.0);
            if extent <= 0.0 || factor <= 0.0 {
                return Err(GeomError::Usage("flat chart needs positive extent and factor".into()));
            }
            Ok(Chart::flat(dim, extent, factor))
        }
        "sphere" => Ok(sphere_chart()),
        "sphere_product" => Ok(Chart::new(
            "sphere_product",
            vec![(0.1, std::f64::consts::PI - 0.1), (-3.0, 3.0), (-2.0, 2.0)],
            |x| {
                let zero = Jet::constant_in(x[0].space(), 0.0);
                let one = Jet::constant_in(x[0].space(), 1.0);
                let s = x[0].sin();
                vec![
                    vec![one.clone(), zero.clone(), zero.clone()],
                    vec![zero.clone(), &s * &s, zero.clone()],
                    vec![zero.clone(), zero, one],
                ]
            },
        )),
        "heisenberg" => Ok(Chart::new("heisenberg", vec![(-2.0, 2.0); 3], |x| {
            let zero = Jet::constant_in(x[0].space(), 0.0);
            let one = Jet::constant_in(x[0].space(), 1.0);
            vec![
                vec![one.clone(), zero.clone(), zero.clone()],
                vec![zero.clone(), &(&x[0] * &x[0]) + 1.0, -&x[0]],
                vec![zero, -&x[0], one],
            ]
        })),
        "warped_product" => Ok(Chart::new(
            "warped_product",
            vec![(-1.5, 1.5), (-2.0, 2.0), (-2.0, 2.0)],
            |x| {
                let zero = Jet::constant_in(x[0].space(), 0.0);
                let one = Jet::constant_in(x[0].space(), 1.0);
                let w = (&x[0] * 2.0).exp();
                vec![
                    vec![one.clone(), zero.clone(), zero.clone()],
                    vec![zero.clone(), one, zero.clone()],
                    vec![zero.clone(), zero, w],
                ]
            },
        )),
        "polar_plane" => Ok(Chart::new("polar_plane", vec![(0.5, 3.0), (0.25, 6.0)], |x| {
            let zero = Jet::constant_in(x[0].space(), 0.0);
            let one = Jet::constant_in(x[0].space(), 1.0);
            vec![vec![one, zero.clone()], vec![zero, &x[0] * &x[0]]]
        })),
        other => Err(GeomError::Usage(format!("unknown chart id `{other}`"))),
    }
}

fn sphere_chart() -> Chart {
    Chart::new("sphere", vec![(0.1, std::f64::consts::PI - 0.1), (-3.0, 3.0)], |x| {
        let zero = Jet::constant_in(x[0].space(), 0.0);
        let one = Jet::constant_in(x[0].space(), 1.0);
        let s = x[0].sin();
        vec![vec![one, zero.clone()], vec![zero, &s * &s]]
    })
}

/// Maps available to scenarios, each with the chart ids it expects.
pub fn map_entries() -> Vec<EntryInfo> {
    vec![
        EntryInfo {
            id: "flat_projection",
            summary: "scaled linear projection R^m -> R^n; totally geodesic, constant dilatation",
            params: &[
                ("m", 3.0, "domain dimension"),
                ("n", 2.0, "codomain dimension"),
                ("lambda", 1.0, "dilatation (the map scales by sqrt(lambda))"),
            ],
        },
        EntryInfo {
            id: "sphere_product_projection",
            summary: "S^2 x R -> S^2 product projection; totally geodesic Riemannian submersion",
            params: &[],
        },
        EntryInfo {
            id: "heisenberg_submersion",
            summary: "Heisenberg R^3 -> flat R^2; Riemannian submersion with non-integrable horizontal distribution",
            params: &[],
        },
        EntryInfo {
            id: "warped_projection",
            summary: "(R^2 x R, dx^2+dy^2+e^{2x}dz^2) -> R^2; Riemannian submersion with non-geodesic fibers",
            params: &[],
        },
        EntryInfo {
            id: "conformal_plane",
            summary: "(x,y) -> (e^x cos y, e^x sin y); conformal with nonconstant dilatation e^{2x}",
            params: &[],
        },
        EntryInfo {
            id: "radial_projection",
            summary: "polar plane -> line, (r,theta) -> r; circle fibers of curvature 1/r",
            params: &[],
        },
        EntryInfo {
            id: "identity_map",
            summary: "identity of a flat chart",
            params: &[("dim", 2.0, "dimension")],
        },
        EntryInfo {
            id: "constant_map",
            summary: "constant map; critical everywhere",
            params: &[("m", 3.0, "domain dimension"), ("n", 2.0, "codomain dimension")],
        },
    ]
}

/// Chart ids a map entry expects for its domain and codomain.
pub fn expected_charts(map_id: &str) -> Result<(&'static str, &'static str)> {
    Ok(match map_id {
        "flat_projection" | "constant_map" | "identity_map" => ("flat", "flat"),
        "sphere_product_projection" => ("sphere_product", "sphere"),
        "heisenberg_submersion" => ("heisenberg", "flat"),
        "warped_projection" => ("warped_product", "flat"),
        "conformal_plane" => ("flat", "flat"),
        "radial_projection" => ("polar_plane", "flat"),
        other => return Err(GeomError::Usage(format!("unknown map id `{other}`"))),
    })
}

/// Default chart parameters that pair with a map entry.
pub fn default_chart_params(map_id: &str, params: &Params) -> Result<(Params, Params)> {
    let mut dom = Params::new();
    let mut cod = Params::new();
    match map_id {
        "flat_projection" | "constant_map" => {
            dom.insert("dim".into(), get(params, "m", 3.0));
            cod.insert("dim".into(), get(params, "n", 2.0));
            cod.insert("extent".into(), 10.0);
        }
        "identity_map" => {
            dom.insert("dim".into(), get(params, "dim", 2.0));
            cod.insert("dim".into(), get(params, "dim", 2.0));
            cod.insert("extent".into(), 10.0);
        }
        "conformal_plane" => {
            dom.insert("dim".into(), 2.0);
            dom.insert("extent".into(), 1.0);
            cod.insert("dim".into(), 2.0);
            cod.insert("extent".into(), 10.0);
        }
        "heisenberg_submersion" | "warped_projection" => {
            cod.insert("dim".into(), 2.0);
            cod.insert("extent".into(), 10.0);
        }
        "radial_projection" => {
            cod.insert("dim".into(), 1.0);
            cod.insert("extent".into(), 10.0);
        }
        "sphere_product_projection" => {}
        other => return Err(GeomError::Usage(format!("unknown map id `{other}`"))),
    }
    Ok((dom, cod))
}

/// Construct a catalog map over the given charts.
pub fn build_map(id: &str, domain: &Chart, codomain: &Chart, params: &Params) -> Result<MapJet> {
    let check_dims = |need_m: usize, need_n: usize| -> Result<()> {
        if domain.dim() != need_m {
            return Err(GeomError::DimensionMismatch { expected: need_m, got: domain.dim() });
        }
        if codomain.dim() != need_n {
            return Err(GeomError::DimensionMismatch { expected: need_n, got: codomain.dim() });
        }
        Ok(())
    };
    match id {
        "flat_projection" => {
            let m = get_dim(params, "m", 3)?;
            let n = get_dim(params, "n", 2)?;
            let lambda = get(params, "lambda", 1.0);
            if n > m {
                return Err(GeomError::Usage(format!("projection needs n <= m, got {n} > {m}")));
            }
            if lambda <= 0.0 {
                return Err(GeomError::Usage("lambda must be positive".into()));
            }
            check_dims(m, n)?;
            let c = lambda.sqrt();
            Ok(MapJet::new("flat_projection", domain.clone(), codomain.clone(), move |s| {
                (0..n).map(|i| &s[i] * c).collect()
            }))
        }
        "sphere_product_projection" => {
            check_dims(3, 2)?;
            Ok(MapJet::new("sphere_product_projection", domain.clone(), codomain.clone(), |s| {
                vec![s[0].clone(), s[1].clone()]
            }))
        }
        "heisenberg_submersion" => {
            check_dims(3, 2)?;
            Ok(MapJet::new("heisenberg_submersion", domain.clone(), codomain.clone(), |s| {
                vec![s[0].clone(), s[1].clone()]
            }))
        }
        "warped_projection" => {
            check_dims(3, 2)?;
            Ok(MapJet::new("warped_projection", domain.clone(), codomain.clone(), |s| {
                vec![s[0].clone(), s[1].clone()]
            }))
        }
        "conformal_plane" => {
            check_dims(2, 2)?;
            Ok(MapJet::new("conformal_plane", domain.clone(), codomain.clone(), |s| {
                let ex = s[0].exp();
                vec![&ex * &s[1].cos(), &ex * &s[1].sin()]
            }))
        }
        "radial_projection" => {
            check_dims(2, 1)?;
            Ok(MapJet::new("radial_projection", domain.clone(), codomain.clone(), |s| {
                vec![s[0].clone()]
            }))
        }
        "identity_map" => {
            let dim = get_dim(params, "dim", 2)?;
            check_dims(dim, dim)?;
            Ok(MapJet::new("identity_map", domain.clone(), codomain.clone(), |s| s.to_vec()))
        }
        "constant_map" => {
            let m = get_dim(params, "m", 3)?;
            let n = get_dim(params, "n", 2)?;
            check_dims(m, n)?;
            Ok(MapJet::new("constant_map", domain.clone(), codomain.clone(), move |s| {
                (0..n).map(|_| Jet::constant_in(s[0].space(), 0.0)).collect()
            }))
        }
        other => Err(GeomError::Usage(format!("unknown map id `{other}`"))),
    }
}

/// Declared flags for a map entry with the given parameters.
pub fn ground_truth(id: &str, params: &Params) -> Result<GroundTruth> {
    Ok(match id {
        "flat_projection" => {
            let lambda = get(params, "lambda", 1.0);
            let m = get_dim(params, "m", 3)?;
            let n = get_dim(params, "n", 2)?;
            GroundTruth {
                totally_geodesic: true,
                riemannian_submersion: (lambda - 1.0).abs() < 1e-15,
                constant_dilatation: Some(lambda),
                t_zero: Some(true),
                fibers_totally_geodesic: if m > n { Some(true) } else { None },
                all_critical: false,
            }
        }
        "sphere_product_projection" => GroundTruth {
            totally_geodesic: true,
            riemannian_submersion: true,
            constant_dilatation: Some(1.0),
            t_zero: Some(true),
            fibers_totally_geodesic: Some(true),
            all_critical: false,
        },
        "heisenberg_submersion" => GroundTruth {
            totally_geodesic: false,
            riemannian_submersion: true,
            constant_dilatation: Some(1.0),
            t_zero: Some(false),
            fibers_totally_geodesic: Some(true),
            all_critical: false,
        },
        "warped_projection" => GroundTruth {
            totally_geodesic: false,
            riemannian_submersion: true,
            constant_dilatation: Some(1.0),
            t_zero: Some(true),
            fibers_totally_geodesic: Some(false),
            all_critical: false,
        },
        "conformal_plane" => GroundTruth {
            totally_geodesic: false,
            riemannian_submersion: false,
            constant_dilatation: None,
            t_zero: Some(true),
            fibers_totally_geodesic: None,
            all_critical: false,
        },
        "radial_projection" => GroundTruth {
            totally_geodesic: false,
            riemannian_submersion: true,
            constant_dilatation: Some(1.0),
            t_zero: Some(true),
            fibers_totally_geodesic: Some(false),
            all_critical: false,
        },
        "identity_map" => GroundTruth {
            totally_geodesic: true,
            riemannian_submersion: true,
            constant_dilatation: Some(1.0),
            t_zero: Some(true),
            fibers_totally_geodesic: None,
            all_critical: false,
        },
        "constant_map" => GroundTruth {
            totally_geodesic: true,
            riemannian_submersion: false,
            constant_dilatation: None,
            t_zero: None,
            fibers_totally_geodesic: None,
            all_critical: true,
        },
        other => return Err(GeomError::Usage(format!("unknown map id `{other}`"))),
    })
}
