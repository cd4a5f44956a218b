//! Central finite-difference oracles, independent of jet arithmetic.
//!
//! Used by the verification suites to cross-check jet-computed Christoffel
//! symbols, curvature and second fundamental forms. Derivatives here come
//! only from plain function values: step `1e-4`, one Richardson
//! extrapolation, so the truncation error is `O(h^4)`.

use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::geometry::{Chart, Point};
use crate::jet::seed_coords;
use crate::maps::MapJet;

pub const FD_STEP: f64 = 1e-4;

/// Central difference with one Richardson extrapolation step.
pub fn partial(f: &dyn Fn(&[f64]) -> f64, x: &[f64], i: usize, h: f64) -> f64 {
    let d = |h: f64| {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[i] += h;
        xm[i] -= h;
        (f(&xp) - f(&xm)) / (2.0 * h)
    };
    let d1 = d(h);
    let d2 = d(h / 2.0);
    (4.0 * d2 - d1) / 3.0
}

/// Second partial derivative by central differences (Richardson once).
pub fn second_partial(f: &dyn Fn(&[f64]) -> f64, x: &[f64], i: usize, j: usize, h: f64) -> f64 {
    if i == j {
        let d = |h: f64| {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[i] += h;
            xm[i] -= h;
            (f(&xp) - 2.0 * f(x) + f(&xm)) / (h * h)
        };
        let d1 = d(h);
        let d2 = d(h / 2.0);
        (4.0 * d2 - d1) / 3.0
    } else {
        let d = |h: f64| {
            let eval = |si: f64, sj: f64| {
                let mut xx = x.to_vec();
                xx[i] += si * h;
                xx[j] += sj * h;
                f(&xx)
            };
            (eval(1.0, 1.0) - eval(1.0, -1.0) - eval(-1.0, 1.0) + eval(-1.0, -1.0)) / (4.0 * h * h)
        };
        let d1 = d(h);
        let d2 = d(h / 2.0);
        (4.0 * d2 - d1) / 3.0
    }
}

fn metric_component(chart: &Chart, x: &[f64], i: usize, j: usize) -> f64 {
    let seeds = seed_coords(x, 0);
    chart.metric_jets(&seeds)[i][j].value()
}

fn metric_matrix(chart: &Chart, x: &[f64]) -> DMatrix<f64> {
    let m = chart.dim();
    DMatrix::from_fn(m, m, |i, j| metric_component(chart, x, i, j))
}

/// Christoffel symbols from finite differences of the metric only.
pub fn christoffel(chart: &Chart, x: &Point) -> Vec<f64> {
    let m = chart.dim();
    let coords = x.coords_vec();
    let g = metric_matrix(chart, &coords);
    let ginv = g.try_inverse().expect("metric invertible");
    // dg[l][i][j]
    let mut dg = vec![0.0; m * m * m];
    for l in 0..m {
        for i in 0..m {
            for j in 0..m {
                let f = |y: &[f64]| metric_component(chart, y, i, j);
                dg[(l * m + i) * m + j] = partial(&f, &coords, l, FD_STEP);
            }
        }
    }
    let mut gamma = vec![0.0; m * m * m];
    for k in 0..m {
        for i in 0..m {
            for j in 0..m {
                let mut s = 0.0;
                for l in 0..m {
                    s += ginv[(k, l)]
                        * (dg[(i * m + j) * m + l] + dg[(j * m + i) * m + l] - dg[(l * m + i) * m + j]);
                }
                gamma[(k * m + i) * m + j] = 0.5 * s;
            }
        }
    }
    gamma
}

/// Curvature tensor `R^l_{kij}` from finite differences of the metric:
/// the Christoffel derivative is assembled from first and second metric
/// differences directly, never from differencing jet output.
pub fn riemann(chart: &Chart, x: &Point) -> Vec<f64> {
    let m = chart.dim();
    let coords = x.coords_vec();
    let g = metric_matrix(chart, &coords);
    let ginv = g.clone().try_inverse().expect("metric invertible");
    let h = FD_STEP;

    let mut dg = vec![0.0; m * m * m]; // d_l g_{ij}
    let mut ddg = vec![0.0; m * m * m * m]; // d_m d_l g_{ij}
    for i in 0..m {
        for j in 0..m {
            let f = |y: &[f64]| metric_component(chart, y, i, j);
            for l in 0..m {
                dg[(l * m + i) * m + j] = partial(&f, &coords, l, h);
                for mm in 0..m {
                    ddg[((mm * m + l) * m + i) * m + j] = second_partial(&f, &coords, mm, l, h);
                }
            }
        }
    }
    // d_m g^{kl} = -g^{ka} (d_m g_{ab}) g^{bl}
    let mut dginv = vec![0.0; m * m * m];
    for mm in 0..m {
        for k in 0..m {
            for l in 0..m {
                let mut s = 0.0;
                for a in 0..m {
                    for b in 0..m {
                        s -= ginv[(k, a)] * dg[(mm * m + a) * m + b] * ginv[(b, l)];
                    }
                }
                dginv[(mm * m + k) * m + l] = s;
            }
        }
    }
    let gamma_terms = |k: usize, i: usize, j: usize| -> f64 {
        let mut s = 0.0;
        for l in 0..m {
            s += ginv[(k, l)]
                * (dg[(i * m + j) * m + l] + dg[(j * m + i) * m + l] - dg[(l * m + i) * m + j]);
        }
        0.5 * s
    };
    // d_mm Gamma^k_{ij}
    let dgamma = |mm: usize, k: usize, i: usize, j: usize| -> f64 {
        let mut s = 0.0;
        for l in 0..m {
            s += dginv[(mm * m + k) * m + l]
                * (dg[(i * m + j) * m + l] + dg[(j * m + i) * m + l] - dg[(l * m + i) * m + j]);
            s += ginv[(k, l)]
                * (ddg[((mm * m + i) * m + j) * m + l] + ddg[((mm * m + j) * m + i) * m + l]
                    - ddg[((mm * m + l) * m + i) * m + j]);
        }
        0.5 * s
    };
    let mut r = vec![0.0; m * m * m * m];
    for l in 0..m {
        for k in 0..m {
            for i in 0..m {
                for j in 0..m {
                    let mut v = dgamma(i, l, j, k) - dgamma(j, l, i, k);
                    for mm in 0..m {
                        v += gamma_terms(l, i, mm) * gamma_terms(mm, j, k)
                            - gamma_terms(l, j, mm) * gamma_terms(mm, i, k);
                    }
                    r[((l * m + k) * m + i) * m + j] = v;
                }
            }
        }
    }
    r
}

/// Jacobian of a map by central differences of plain evaluations.
pub fn jacobian(map: &MapJet, x: &Point) -> DMatrix<f64> {
    let coords = x.coords_vec();
    let n = map.codomain().dim();
    let m = map.domain().dim();
    DMatrix::from_fn(n, m, |gamma, i| {
        let f = |y: &[f64]| map.eval_components(y)[gamma];
        partial(&f, &coords, i, FD_STEP)
    })
}

/// Hessian (one matrix per output component) by central differences.
pub fn hessian(map: &MapJet, x: &Point) -> Vec<DMatrix<f64>> {
    let coords = x.coords_vec();
    let n = map.codomain().dim();
    let m = map.domain().dim();
    (0..n)
        .map(|gamma| {
            DMatrix::from_fn(m, m, |i, j| {
                let f = |y: &[f64]| map.eval_components(y)[gamma];
                second_partial(&f, &coords, i, j, FD_STEP)
            })
        })
        .collect()
}

/// Second fundamental form `B(X, Y)` built entirely from finite differences
/// (map Hessian plus FD Christoffel symbols on both charts).
pub fn second_fundamental_form(
    map: &MapJet,
    x: &Point,
    xv: &DVector<f64>,
    yv: &DVector<f64>,
) -> Result<DVector<f64>> {
    let mchart = map.domain();
    let nchart = map.codomain();
    let m = mchart.dim();
    let n = nchart.dim();
    let jac = jacobian(map, x);
    let hess = hessian(map, x);
    let gamma_m = christoffel(mchart, x);
    let fx = map.eval(x)?;
    let gamma_n = christoffel(nchart, &fx);
    let jx = &jac * xv;
    let jy = &jac * yv;
    let mut out = DVector::zeros(n);
    for gamma in 0..n {
        let mut v = (xv.transpose() * &hess[gamma] * yv)[(0, 0)];
        for a in 0..n {
            for b in 0..n {
                v += gamma_n[(gamma * n + a) * n + b] * jx[a] * jy[b];
            }
        }
        for i in 0..m {
            for j in 0..m {
                let mut push = 0.0;
                for k in 0..m {
                    push += gamma_m[(k * m + i) * m + j] * jac[(gamma, k)];
                }
                v -= push * xv[i] * yv[j];
            }
        }
        out[gamma] = v;
    }
    Ok(out)
}
