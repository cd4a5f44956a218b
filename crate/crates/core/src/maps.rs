//! Smooth maps `phi: M -> N` with second-order jets, and the derived objects:
//! pushforward, second fundamental form `B = nabla phi_*`, tension field,
//! vertical/horizontal splitting of the domain, dilatation, integrability
//! tensor `T`, conformal tensor `S`, operator `P` and fiber mean curvature.
//!
//! Conventions, fixed once here:
//! - the kernel of `dphi` is found by singular-value thresholding at
//!   `tol * sigma_max`; rank ambiguity (a singular value within a factor 10 of
//!   the threshold) is reported on [`MapPointData`], never silently resolved;
//! - frames are produced by metric Gram-Schmidt processed in ascending
//!   coordinate order, so all reports are deterministic;
//! - horizontal/vertical field extensions are pointwise metric projections of
//!   constant-coefficient extensions, which is jet-friendly and enough for
//!   tensorial quantities (`T`, `kappa`, the basic-field identity);
//! - `T` is defined on horizontal arguments only and rejects others.

use nalgebra::{DMatrix, DVector};
use std::sync::Arc;

use crate::error::{GeomError, Result};
use crate::geometry::{
    complete_frame, covariant_derivative, invert_jet_matrix, orthonormalize, Chart, Point, Tangent,
    VectorField,
};
use crate::jet::{seed_coords, Jet};

type MapFn = dyn Fn(&[Jet]) -> Vec<Jet> + Send + Sync;

/// A smooth map between charts, jet-evaluable to order 2 and beyond.
#[derive(Clone)]
pub struct MapJet {
    name: String,
    domain: Chart,
    codomain: Chart,
    f: Arc<MapFn>,
}

impl std::fmt::Debug for MapJet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MapJet")
            .field("name", &self.name)
            .field("domain", &self.domain.name())
            .field("codomain", &self.codomain.name())
            .finish()
    }
}

impl MapJet {
    pub fn new<F>(name: impl Into<String>, domain: Chart, codomain: Chart, f: F) -> MapJet
    where
        F: Fn(&[Jet]) -> Vec<Jet> + Send + Sync + 'static,
    {
        MapJet { name: name.into(), domain, codomain, f: Arc::new(f) }
    }

    pub fn identity(chart: Chart) -> MapJet {
        MapJet::new("identity", chart.clone(), chart, |x| x.to_vec())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn domain(&self) -> &Chart {
        &self.domain
    }

    pub fn codomain(&self) -> &Chart {
        &self.codomain
    }

    pub fn eval_jets(&self, seeds: &[Jet]) -> Vec<Jet> {
        let out = (self.f)(seeds);
        debug_assert_eq!(out.len(), self.codomain.dim());
        out
    }

    /// Raw component values, without the codomain-domain check.
    pub fn eval_components(&self, coords: &[f64]) -> Vec<f64> {
        let seeds = seed_coords(coords, 0);
        self.eval_jets(&seeds).iter().map(Jet::value).collect()
    }

    /// `phi(x)` as a validated point of the codomain chart.
    pub fn eval(&self, x: &Point) -> Result<Point> {
        self.codomain.point(self.eval_components(x.coords().as_slice()))
    }

    /// Jacobian `dphi_x` (`n x m`).
    pub fn jacobian(&self, x: &Point) -> DMatrix<f64> {
        let seeds = seed_coords(x.coords().as_slice(), 1);
        let jets = self.eval_jets(&seeds);
        let (n, m) = (self.codomain.dim(), self.domain.dim());
        DMatrix::from_fn(n, m, |gamma, i| jets[gamma].d1(i))
    }

    /// Hessian `d^2 phi_x`, one symmetric `m x m` matrix per output component.
    pub fn hessian(&self, x: &Point) -> Vec<DMatrix<f64>> {
        let seeds = seed_coords(x.coords().as_slice(), 2);
        let jets = self.eval_jets(&seeds);
        let m = self.domain.dim();
        (0..self.codomain.dim())
            .map(|gamma| DMatrix::from_fn(m, m, |i, j| jets[gamma].d2(i, j)))
            .collect()
    }
}

/// `phi_* X = dphi_x X`, a tangent at `phi(x)`.
pub fn pushforward(phi: &MapJet, x: &Tangent) -> Result<Tangent> {
    let fx = phi.eval(x.base())?;
    let j = phi.jacobian(x.base());
    Ok(Tangent::new(fx, j * x.components()))
}

/// Second fundamental form
/// `B(X, Y) = nabla^phi_X phi_* Y - phi_*(nabla^M_X Y)`, a tangent at `phi(x)`.
///
/// In coordinates: Hessian term plus codomain-Christoffel term minus the
/// pushed domain-Christoffel term.
pub fn second_fundamental_form(phi: &MapJet, x: &Tangent, y: &Tangent) -> Result<Tangent> {
    let base = x.base();
    if !base.same_point(y.base(), 1e-12) {
        return Err(GeomError::BasePointMismatch { a: base.coords_vec(), b: y.base().coords_vec() });
    }
    let fx = phi.eval(base)?;
    let jac = phi.jacobian(base);
    let hess = phi.hessian(base);
    let gamma_m = phi.domain().christoffel_at(base)?;
    let gamma_n = phi.codomain().christoffel_at(&fx)?;
    let jx = &jac * x.components();
    let jy = &jac * y.components();
    let n = phi.codomain().dim();
    let mut comps = gamma_n.contract(&jx, &jy);
    for gamma in 0..n {
        comps[gamma] += (x.components().transpose() * &hess[gamma] * y.components())[(0, 0)];
    }
    comps -= &jac * gamma_m.contract(x.components(), y.components());
    Ok(Tangent::new(fx, comps))
}

/// Tension field `tau(phi)(x) = sum_i B(e_i, e_i)` over a g-orthonormal frame.
pub fn tension(phi: &MapJet, x: &Point) -> Result<Tangent> {
    let frame = complete_frame(&[], x)?;
    let fx = phi.eval(x)?;
    let mut out = Tangent::zero(fx);
    for e in &frame {
        out = out.add(&second_fundamental_form(phi, e, e)?)?;
    }
    Ok(out)
}

/// Vertical/horizontal data of `phi` at one point.
#[derive(Clone, Debug)]
pub struct MapPointData {
    x: Point,
    rank: usize,
    critical: bool,
    rank_ambiguous: bool,
    singular_values: Vec<f64>,
    vertical_basis: Vec<Tangent>,
    horizontal_basis: Vec<Tangent>,
}

impl MapPointData {
    pub fn point(&self) -> &Point {
        &self.x
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn is_critical(&self) -> bool {
        self.critical
    }

    /// A singular value fell within a factor 10 of the rank threshold.
    pub fn rank_ambiguous(&self) -> bool {
        self.rank_ambiguous
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    /// g-orthonormal basis of `ker dphi_x`.
    pub fn vertical_basis(&self) -> &[Tangent] {
        &self.vertical_basis
    }

    /// g-orthonormal basis of the g-orthocomplement of the kernel.
    pub fn horizontal_basis(&self) -> &[Tangent] {
        &self.horizontal_basis
    }
}

/// Default relative tolerance for kernel rank decisions.
pub const RANK_TOL: f64 = 1e-8;

/// Kernel of `dphi_x` by singular-value thresholding at `tol * sigma_max`,
/// horizontal space as the metric orthocomplement. A point where all singular
/// values are below `tol` is flagged critical.
pub fn map_point_data(phi: &MapJet, x: &Point, tol: f64) -> Result<MapPointData> {
    let m = phi.domain().dim();
    let jac = phi.jacobian(x);
    let svd = jac.clone().svd(false, true);
    let mut svals: Vec<f64> = svd.singular_values.iter().cloned().collect();
    svals.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let sigma_max = svals.first().cloned().unwrap_or(0.0);
    if sigma_max < tol {
        return Ok(MapPointData {
            x: x.clone(),
            rank: 0,
            critical: true,
            rank_ambiguous: false,
            singular_values: svals,
            vertical_basis: Vec::new(),
            horizontal_basis: Vec::new(),
        });
    }
    let threshold = tol * sigma_max;
    let rank = svals.iter().filter(|&&s| s > threshold).count();
    let rank_ambiguous =
        svals.iter().any(|&s| s > threshold / 10.0 && s < threshold * 10.0 && s > 0.0);
    // rows of V^T beyond the rank span ker dphi in coordinates
    let vt = svd.v_t.as_ref().expect("requested V^T");
    let mut kernel_raw: Vec<Tangent> = Vec::new();
    for r in rank..m.min(vt.nrows()) {
        let row: Vec<f64> = vt.row(r).iter().cloned().collect();
        kernel_raw.push(Tangent::new(x.clone(), DVector::from_vec(row)));
    }
    // When n < m the SVD only returns min(n,m) right-singular rows; complete
    // the kernel by a Euclidean nullspace sweep in that case.
    if kernel_raw.len() < m - rank {
        kernel_raw = euclidean_nullspace(&jac, threshold)
            .into_iter()
            .map(|v| Tangent::new(x.clone(), v))
            .collect();
    }
    let vertical_basis =
        if kernel_raw.is_empty() { Vec::new() } else { orthonormalize(&kernel_raw)? };
    let full = complete_frame(&vertical_basis, x)?;
    let horizontal_basis = full[vertical_basis.len()..].to_vec();
    Ok(MapPointData {
        x: x.clone(),
        rank,
        critical: false,
        rank_ambiguous,
        singular_values: svals,
        vertical_basis,
        horizontal_basis,
    })
}

fn euclidean_nullspace(jac: &DMatrix<f64>, threshold: f64) -> Vec<DVector<f64>> {
    let m = jac.ncols();
    // J^T J, whose nullspace equals ker J
    let aug = jac.transpose() * jac;
    let eig = aug.symmetric_eigen();
    let mut out = Vec::new();
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda.abs().sqrt() <= threshold {
            out.push(eig.eigenvectors.column(k).into_owned());
        }
    }
    let _ = m;
    out
}

/// Pointwise conformality verdict of `dphi` on the horizontal space.
#[derive(Clone, Debug, PartialEq)]
pub enum ConformalityVerdict {
    /// `dphi_x = 0`.
    Critical,
    /// The horizontal Gram matrix is `lambda I` within tolerance.
    Conformal { lambda: f64 },
    /// Surjective but not conformal; `deviation` is the eigenvalue spread of
    /// the Gram matrix, `lambda` its trace mean.
    Nonconformal { deviation: f64, lambda: f64 },
    /// `dphi_x` does not reach all of `T_{phi(x)} N`.
    NotSubmersive { rank: usize },
}

impl ConformalityVerdict {
    pub fn is_conformal(&self) -> bool {
        matches!(self, ConformalityVerdict::Conformal { .. })
    }

    pub fn lambda(&self) -> Option<f64> {
        match self {
            ConformalityVerdict::Conformal { lambda } => Some(*lambda),
            _ => None,
        }
    }

    /// The deviation reported for nonconformal points, zero for conformal.
    pub fn deviation(&self) -> f64 {
        match self {
            ConformalityVerdict::Nonconformal { deviation, .. } => *deviation,
            _ => 0.0,
        }
    }
}

/// Conformality of `dphi_x` on the horizontal basis: forms the Gram matrix
/// `G_ij = <phi_* h_i, phi_* h_j>_N` and compares it against `lambda I` with
/// `lambda = tr G / n`. The reported deviation is the eigenvalue spread.
pub fn dilatation(phi: &MapJet, data: &MapPointData, tol: f64) -> Result<ConformalityVerdict> {
    if data.critical {
        return Ok(ConformalityVerdict::Critical);
    }
    let n = phi.codomain().dim();
    if data.rank < n {
        return Ok(ConformalityVerdict::NotSubmersive { rank: data.rank });
    }
    let fx = phi.eval(&data.x)?;
    let gn = phi.codomain().metric_at(&fx)?;
    let jac = phi.jacobian(&data.x);
    let k = data.horizontal_basis.len();
    let gram = DMatrix::from_fn(k, k, |i, j| {
        let u = &jac * data.horizontal_basis[i].components();
        let v = &jac * data.horizontal_basis[j].components();
        (u.transpose() * &gn * v)[(0, 0)]
    });
    let eig = gram.symmetric_eigen();
    let max = eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    let lambda = eig.eigenvalues.iter().sum::<f64>() / k as f64;
    let deviation = max - min;
    if deviation <= tol && lambda > 0.0 {
        Ok(ConformalityVerdict::Conformal { lambda })
    } else {
        Ok(ConformalityVerdict::Nonconformal { deviation, lambda })
    }
}

/// The dilatation as a jet-evaluable scalar:
/// `lambda(x) = (1/n) g^{ij}(x) d_i phi^a d_j phi^b g^N_{ab}(phi(x))`.
///
/// This is the full metric trace of `phi^* g_N`; kernel directions contribute
/// nothing, so on the horizontal space it reproduces the Gram-trace mean.
pub fn lambda_jet(phi: &MapJet, seeds: &[Jet]) -> Result<Jet> {
    let m = phi.domain().dim();
    let n = phi.codomain().dim();
    let g = phi.domain().metric_jets(seeds);
    let ginv = invert_jet_matrix(&g).ok_or_else(|| GeomError::SingularMetric {
        chart: phi.domain().name().to_string(),
        coords: seeds.iter().map(Jet::value).collect(),
    })?;
    let fj = phi.eval_jets(seeds);
    let gn = phi.codomain().metric_jets(&fj);
    // jacobian jets d_i phi^a (order one less than seeds)
    let jac: Vec<Vec<Jet>> = (0..n).map(|a| (0..m).map(|i| fj[a].partial(i)).collect()).collect();
    let space = seeds[0].space();
    let mut tr = Jet::constant_in(space, 0.0);
    for i in 0..m {
        for j in 0..m {
            for a in 0..n {
                for b in 0..n {
                    tr = &tr + &(&(&(&ginv[i][j] * &jac[a][i]) * &jac[b][j]) * &gn[a][b]);
                }
            }
        }
    }
    Ok(&tr * (1.0 / n as f64))
}

/// Step used for the conformality probes around `x` before differentiating
/// the dilatation field.
const LAMBDA_PROBE_STEP: f64 = 1e-3;

/// Gradient of the dilatation field, index-raised by `g`.
///
/// Refuses to differentiate when conformality fails at `x` or at any of the
/// `2m` probe points `x ± delta e_i`.
pub fn grad_dilatation(phi: &MapJet, x: &Point, tol: f64) -> Result<Tangent> {
    let chart = phi.domain().clone();
    let m = chart.dim();
    let mut probes = vec![x.clone()];
    for i in 0..m {
        let (lo, hi) = chart.domain()[i];
        let delta = LAMBDA_PROBE_STEP * (hi - lo);
        for sgn in [-1.0, 1.0] {
            let mut c = x.coords_vec();
            c[i] += sgn * delta;
            if let Ok(p) = chart.point(c) {
                probes.push(p);
            }
        }
    }
    for p in &probes {
        let data = map_point_data(phi, p, RANK_TOL)?;
        let verdict = dilatation(phi, &data, tol)?;
        if !verdict.is_conformal() {
            return Err(GeomError::DilatationUnavailable {
                coords: p.coords_vec(),
                reason: format!("map is not conformal near the requested point ({verdict:?})"),
            });
        }
    }
    // order 2: lambda_jet consumes one order for the Jacobian jets
    let seeds = chart.seeds(x, 2);
    let lam = lambda_jet(phi, &seeds)?;
    let ginv = chart.inverse_metric_at(x)?;
    let dlam = DVector::from_iterator(m, (0..m).map(|i| lam.d1(i)));
    Ok(Tangent::new(x.clone(), ginv * dlam))
}

/// The conformal-change tensor
/// `S(X,Y) = (1/(2 lambda)) ((X lambda) Y + (Y lambda) X - <X,Y> grad lambda)`.
pub fn s_tensor(phi: &MapJet, x: &Tangent, y: &Tangent, tol: f64) -> Result<Tangent> {
    let base = x.base();
    let chart = phi.domain();
    let data = map_point_data(phi, base, RANK_TOL)?;
    let verdict = dilatation(phi, &data, tol)?;
    let lambda = match verdict {
        ConformalityVerdict::Conformal { lambda } if lambda > 0.0 => lambda,
        other => {
            return Err(GeomError::DilatationUnavailable {
                coords: base.coords_vec(),
                reason: format!("S tensor needs a positive dilatation, got {other:?}"),
            })
        }
    };
    let grad = grad_dilatation(phi, base, tol)?;
    let xl = chart.inner(x, &grad)?;
    let yl = chart.inner(y, &grad)?;
    let xy = chart.inner(x, y)?;
    let mut out = y.scale(xl).add(&x.scale(yl))?;
    out = out.sub(&grad.scale(xy))?;
    Ok(out.scale(1.0 / (2.0 * lambda)))
}

/// Horizontal metric projector as jets:
/// `Pi_H(y) = g^{-1} J^T (J g^{-1} J^T)^{-1} J`, the g-orthogonal projector
/// onto the horizontal space of a submersion, evaluable through jets.
pub fn horizontal_projector_jets(phi: &MapJet, seeds: &[Jet]) -> Result<Vec<Vec<Jet>>> {
    let m = phi.domain().dim();
    let n = phi.codomain().dim();
    let g = phi.domain().metric_jets(seeds);
    let ginv = invert_jet_matrix(&g).ok_or_else(|| GeomError::SingularMetric {
        chart: phi.domain().name().to_string(),
        coords: seeds.iter().map(Jet::value).collect(),
    })?;
    let fj = phi.eval_jets(seeds);
    let jac: Vec<Vec<Jet>> = (0..n).map(|a| (0..m).map(|i| fj[a].partial(i)).collect()).collect();
    let space = seeds[0].space();
    let zero = Jet::constant_in(space, 0.0);
    // A = J g^{-1} J^T (n x n)
    let mut a = vec![vec![zero.clone(); n]; n];
    for r in 0..n {
        for c in 0..n {
            let mut s = zero.clone();
            for i in 0..m {
                for j in 0..m {
                    s = &s + &(&(&jac[r][i] * &ginv[i][j]) * &jac[c][j]);
                }
            }
            a[r][c] = s;
        }
    }
    let ainv = invert_jet_matrix(&a).ok_or_else(|| GeomError::RankError {
        reason: "projector needs a submersion point".into(),
    })?;
    // Pi = g^{-1} J^T A^{-1} J
    let mut pi = vec![vec![zero.clone(); m]; m];
    for r in 0..m {
        for c in 0..m {
            let mut s = zero.clone();
            for i in 0..m {
                for aa in 0..n {
                    for bb in 0..n {
                        s = &s + &(&(&(&ginv[r][i] * &jac[aa][i]) * &ainv[aa][bb]) * &jac[bb][c]);
                    }
                }
            }
            pi[r][c] = s;
        }
    }
    Ok(pi)
}

fn check_horizontal(chart: &Chart, data: &MapPointData, v: &Tangent, tol: f64) -> Result<()> {
    for eta in &data.vertical_basis {
        let c = chart.inner(v, eta)?;
        if c.abs() > tol {
            return Err(GeomError::NotHorizontal {
                coords: v.base().coords_vec(),
                magnitude: c.abs(),
            });
        }
    }
    Ok(())
}

/// Apply a jet matrix to a constant coordinate vector.
fn jet_matrix_apply(pi: &[Vec<Jet>], v: &DVector<f64>) -> Vec<Jet> {
    let m = pi.len();
    (0..m)
        .map(|r| {
            let mut s = pi[r][0].constant_like(0.0);
            for c in 0..m {
                s = &s + &(&pi[r][c] * v[c]);
            }
            s
        })
        .collect()
}

/// Integrability tensor `T(X, Y) = (1/2) [X~, Y~]^top` where `X~, Y~` are the
/// horizontally projected constant extensions of `X, Y`. Requires horizontal
/// arguments; antisymmetric; vanishes exactly when the horizontal
/// distribution is integrable.
pub fn integrability_tensor(phi: &MapJet, x: &Tangent, y: &Tangent, tol: f64) -> Result<Tangent> {
    let base = x.base();
    let chart = phi.domain().clone();
    let data = map_point_data(phi, base, RANK_TOL)?;
    check_horizontal(&chart, &data, x, tol)?;
    check_horizontal(&chart, &data, y, tol)?;
    let m = chart.dim();
    let seeds = chart.seeds(base, 2);
    let pi = horizontal_projector_jets(phi, &seeds)?;
    let xt = jet_matrix_apply(&pi, x.components());
    let yt = jet_matrix_apply(&pi, y.components());
    let mut bracket = DVector::zeros(m);
    for k in 0..m {
        for j in 0..m {
            bracket[k] += xt[j].value() * yt[k].d1(j) - yt[j].value() * xt[k].d1(j);
        }
    }
    // vertical part in g: project onto the vertical basis
    let g = chart.metric_at(base)?;
    let mut vert = DVector::zeros(m);
    for eta in &data.vertical_basis {
        let c = (bracket.transpose() * &g * eta.components())[(0, 0)];
        vert += eta.components() * c;
    }
    Ok(Tangent::new(base.clone(), vert * 0.5))
}

/// `P(X, xi) = sum_i <xi, T(X, e_i)>_M phi_* e_i` over the orthonormal
/// horizontal basis, a tangent at `phi(x)`.
pub fn p_operator(
    phi: &MapJet,
    data: &MapPointData,
    x: &Tangent,
    xi: &Tangent,
    tol: f64,
) -> Result<Tangent> {
    let chart = phi.domain();
    let fx = phi.eval(&data.x)?;
    let mut out = Tangent::zero(fx);
    for e in data.horizontal_basis.iter() {
        let t = integrability_tensor(phi, x, e, tol)?;
        let coeff = chart.inner(xi, &t)?;
        if coeff != 0.0 {
            out = out.add(&pushforward(phi, e)?.scale(coeff))?;
        }
    }
    Ok(out)
}

/// Mean curvature of the fiber through `x`:
/// `kappa = (1/(m-n)) sum_i (nabla_{e_i} e~_i)^perp` over an orthonormal
/// vertical frame extended by pointwise vertical projection.
pub fn mean_curvature_fibers(phi: &MapJet, data: &MapPointData) -> Result<Tangent> {
    let chart = phi.domain().clone();
    let m = chart.dim();
    let n = phi.codomain().dim();
    if data.critical {
        return Err(GeomError::CriticalPoint {
            map: phi.name().to_string(),
            coords: data.x.coords_vec(),
        });
    }
    if m <= n || data.vertical_basis.is_empty() {
        return Err(GeomError::Usage(format!(
            "fiber mean curvature needs dim M > dim N, got {m} <= {n}"
        )));
    }
    let seeds = chart.seeds(&data.x, 2);
    let pi_h = horizontal_projector_jets(phi, &seeds)?;
    let fibers = data.vertical_basis.len();
    let mut sum = Tangent::zero(data.x.clone());
    for e in &data.vertical_basis {
        // vertical projector applied to the constant extension of e
        let pe = jet_matrix_apply(&pi_h, e.components());
        let ext = {
            let e_comps = e.components().clone();
            let chart_clone = chart.clone();
            let phi_clone = phi.clone();
            VectorField::from_fn(chart.clone(), move |s| {
                let pi = horizontal_projector_jets(&phi_clone, s).expect("projector");
                let he = jet_matrix_apply(&pi, &e_comps);
                (0..chart_clone.dim()).map(|k| &s[0].constant_like(e_comps[k]) - &he[k]).collect()
            })
        };
        let _ = pe;
        let d = covariant_derivative(e, &ext)?;
        // horizontal part
        let g = chart.metric_at(&data.x)?;
        let mut horiz = DVector::zeros(m);
        for h in &data.horizontal_basis {
            let c = (d.components().transpose() * &g * h.components())[(0, 0)];
            horiz += h.components() * c;
        }
        sum = sum.add(&Tangent::new(data.x.clone(), horiz))?;
    }
    Ok(sum.scale(1.0 / fibers as f64))
}

/// The unique horizontal `Z^` with `phi_* Z^ = Z` (solve on the horizontal
/// basis). Fails when `Z` is outside the image of `dphi_x`.
pub fn basic_lift(phi: &MapJet, data: &MapPointData, z: &Tangent) -> Result<Tangent> {
    if data.critical {
        return Err(GeomError::CriticalPoint {
            map: phi.name().to_string(),
            coords: data.x.coords_vec(),
        });
    }
    let jac = phi.jacobian(&data.x);
    let n = phi.codomain().dim();
    let k = data.horizontal_basis.len();
    let mut a = DMatrix::zeros(n, k);
    for (j, h) in data.horizontal_basis.iter().enumerate() {
        let col = &jac * h.components();
        a.set_column(j, &col);
    }
    let svd = a.clone().svd(true, true);
    let coeffs = svd
        .solve(z.components(), 1e-12)
        .map_err(|e| GeomError::RankError { reason: e.to_string() })?;
    // verify the solve really hits Z
    let residual = (&a * &coeffs - z.components()).amax();
    if residual > 1e-8 * (1.0 + z.components().amax()) {
        return Err(GeomError::RankError {
            reason: format!("target vector is outside the image of dphi (residual {residual:.3e})"),
        });
    }
    let m = phi.domain().dim();
    let mut comps = DVector::zeros(m);
    for (j, h) in data.horizontal_basis.iter().enumerate() {
        comps += h.components() * coeffs[j];
    }
    Ok(Tangent::new(data.x.clone(), comps))
}

/// Basic-field extension as jets: `Z^(y) = g^{-1} J^T (J g^{-1} J^T)^{-1} (Z o phi)(y)`
/// for a constant codomain vector `Z`; horizontal everywhere with
/// `phi_* Z^ = Z` identically.
pub fn basic_lift_field(phi: &MapJet, z: DVector<f64>) -> VectorField {
    let phi = phi.clone();
    let chart = phi.domain().clone();
    VectorField::from_fn(chart, move |seeds| {
        let m = phi.domain().dim();
        let n = phi.codomain().dim();
        let g = phi.domain().metric_jets(seeds);
        let ginv = invert_jet_matrix(&g).expect("metric invertible");
        let fj = phi.eval_jets(seeds);
        let jac: Vec<Vec<Jet>> =
            (0..n).map(|a| (0..m).map(|i| fj[a].partial(i)).collect()).collect();
        let space = seeds[0].space();
        let zero = Jet::constant_in(space, 0.0);
        let mut a = vec![vec![zero.clone(); n]; n];
        for r in 0..n {
            for c in 0..n {
                let mut s = zero.clone();
                for i in 0..m {
                    for j in 0..m {
                        s = &s + &(&(&jac[r][i] * &ginv[i][j]) * &jac[c][j]);
                    }
                }
                a[r][c] = s;
            }
        }
        let ainv = invert_jet_matrix(&a).expect("submersion point");
        // w = A^{-1} Z ; out = g^{-1} J^T w
        let w: Vec<Jet> = (0..n)
            .map(|r| {
                let mut s = zero.clone();
                for c in 0..n {
                    s = &s + &(&ainv[r][c] * z[c]);
                }
                s
            })
            .collect();
        (0..m)
            .map(|k| {
                let mut s = zero.clone();
                for i in 0..m {
                    for aa in 0..n {
                        s = &s + &(&(&ginv[k][i] * &jac[aa][i]) * &w[aa]);
                    }
                }
                s
            })
            .collect()
    })
}

/// Tension via the horizontally conformal shortcut:
/// `tau(phi) = -((n-2)/2) phi_*(grad ln lambda) - (m-n) phi_*(kappa_phi)`.
///
/// Requires conformality at (and near) `x`; cross-checks [`tension`].
pub fn hc_tension(phi: &MapJet, data: &MapPointData, tol: f64) -> Result<Tangent> {
    let m = phi.domain().dim();
    let n = phi.codomain().dim();
    let verdict = dilatation(phi, data, tol)?;
    let lambda = match verdict {
        ConformalityVerdict::Conformal { lambda } => lambda,
        other => {
            return Err(GeomError::DilatationUnavailable {
                coords: data.x.coords_vec(),
                reason: format!("hc tension needs a conformal point, got {other:?}"),
            })
        }
    };
    let fx = phi.eval(&data.x)?;
    let mut out = Tangent::zero(fx);
    if n != 2 {
        let grad = grad_dilatation(phi, &data.x, tol)?;
        // grad ln lambda = grad lambda / lambda
        let push = pushforward(phi, &grad.scale(1.0 / lambda))?;
        out = out.add(&push.scale(-(n as f64 - 2.0) / 2.0))?;
    }
    if m > n {
        let kappa = mean_curvature_fibers(phi, data)?;
        let push = pushforward(phi, &kappa)?;
        out = out.add(&push.scale(-((m - n) as f64)))?;
    }
    Ok(out)
}
