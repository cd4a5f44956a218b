//! The lifted map `Phi = phi_*: TM -> TN` in induced coordinates and the
//! splitting of the second tangent bundle it induces.
//!
//! `Phi(x, xi) = (phi(x), dphi_x xi)` and its differential acts on
//! `(a, b)` as `(dphi a, d2phi(a, xi) + dphi b)`. The module verifies, as
//! residuals, the lift identities this object satisfies:
//!
//! - pushforwards of vertical and horizontal lifts
//!   (`Phi_*(X^v) = (phi_* X)^v`, `Phi_*(X^h) = (phi_* X)^h + B(X, xi)^v`),
//! - the vertical/horizontal spanning sets of `T(TM)` over a submersion,
//! - the conformal decomposition `Phi_*(X^h) = (phi_* X)^h + (phi_* S)^v + P^v`,
//! - its corollaries relating `B`, `S`, `P` and `T`,
//! - the two norm identities tying the dilatations of `phi` and `Phi`.
//!
//! The measured horizontal-space dimension is reported on [`SplitBasis`]
//! rather than taken from any closed-form claim.

use nalgebra::DMatrix;

use crate::bundle::{
    cg_inner, cg_norm, horizontal_lift, vertical_lift, BundlePoint, CGParams, SecondTangent,
};
use crate::error::{GeomError, Result};
use crate::geometry::{covariant_derivative, Tangent, VectorField};
use crate::jet::Jet;
use crate::maps::{
    self, dilatation, horizontal_projector_jets, map_point_data, p_operator, pushforward, s_tensor,
    second_fundamental_form, ConformalityVerdict, MapJet, MapPointData,
};

/// The differential of a smooth map, acting between tangent bundles.
#[derive(Clone, Debug)]
pub struct LiftedMap {
    phi: MapJet,
}

impl LiftedMap {
    pub fn new(phi: MapJet) -> LiftedMap {
        LiftedMap { phi }
    }

    pub fn map(&self) -> &MapJet {
        &self.phi
    }

    /// `Phi(x, xi) = (phi(x), dphi_x xi)`.
    pub fn eval(&self, at: &BundlePoint) -> Result<BundlePoint> {
        let fx = self.phi.eval(at.base())?;
        let j = self.phi.jacobian(at.base());
        let xi_n = Tangent::new(fx.clone(), &j * at.fiber().components());
        BundlePoint::new(fx, xi_n)
    }

    /// `Phi_* A` in induced coordinates:
    /// `(dphi a, d2phi(a, xi) + dphi b)` at `(phi(x), dphi xi)`.
    pub fn pushforward(&self, a: &SecondTangent) -> Result<SecondTangent> {
        let at = a.at();
        let image = self.eval(at)?;
        let j = self.phi.jacobian(at.base());
        let hess = self.phi.hessian(at.base());
        let n = self.phi.codomain().dim();
        let base = &j * a.base();
        let mut fiber = &j * a.fiber();
        for gamma in 0..n {
            fiber[gamma] += (a.base().transpose() * &hess[gamma] * at.fiber().components())[(0, 0)];
        }
        Ok(SecondTangent::new(image, base, fiber))
    }

    /// `dPhi` at a bundle point as a `2n x 2m` matrix in induced coordinates.
    pub fn differential(&self, at: &BundlePoint) -> DMatrix<f64> {
        let m = self.phi.domain().dim();
        let n = self.phi.codomain().dim();
        let j = self.phi.jacobian(at.base());
        let hess = self.phi.hessian(at.base());
        let mut d = DMatrix::zeros(2 * n, 2 * m);
        for gamma in 0..n {
            for i in 0..m {
                d[(gamma, i)] = j[(gamma, i)];
                d[(n + gamma, m + i)] = j[(gamma, i)];
                // d/dx^i of (J(x) xi)^gamma
                let mut h = 0.0;
                for jj in 0..m {
                    h += hess[gamma][(i, jj)] * at.fiber().component(jj);
                }
                d[(n + gamma, i)] = h;
            }
        }
        d
    }

    /// Singular values of `dPhi` at a bundle point, descending.
    pub fn singular_values(&self, at: &BundlePoint) -> Vec<f64> {
        let d = self.differential(at);
        let mut s: Vec<f64> = d.svd(false, false).singular_values.iter().cloned().collect();
        s.sort_by(|a, b| b.partial_cmp(a).unwrap());
        s
    }

    /// Dimension of `ker dPhi` by singular-value thresholding.
    pub fn kernel_dim(&self, at: &BundlePoint, rel_tol: f64) -> usize {
        let s = self.singular_values(at);
        let smax = s.first().cloned().unwrap_or(0.0);
        let total = 2 * self.phi.domain().dim();
        if smax <= rel_tol {
            return total;
        }
        s.iter().filter(|&&v| v <= rel_tol * smax).count() + (total - s.len())
    }
}

/// Residuals of the two lift-pushforward identities at one `(x, xi, X)`:
/// vertical `|Phi_*(X^v) - (phi_* X)^v|` and
/// horizontal `|Phi_*(X^h) - (phi_* X)^h - (B(X, xi))^v|`, in the Sasaki norm
/// on `TN` (the identities are metric-independent).
pub fn l1_residuals(lifted: &LiftedMap, x: &Tangent, at: &BundlePoint) -> Result<(f64, f64)> {
    let sasaki = CGParams::sasaki();
    let image = lifted.eval(at)?;
    let push_x = pushforward(lifted.map(), x)?;

    let lhs_v = lifted.pushforward(&vertical_lift(x, at)?)?;
    let rhs_v = vertical_lift(&push_x, &image)?;
    let res_v = cg_norm(&sasaki, &lhs_v.sub(&rhs_v))?;

    let lhs_h = lifted.pushforward(&horizontal_lift(x, at)?)?;
    let xi = Tangent::new(at.base().clone(), at.fiber().components().clone());
    let b = second_fundamental_form(lifted.map(), x, &xi)?;
    let rhs_h = horizontal_lift(&push_x, &image)?.add(&vertical_lift(&b, &image)?);
    let res_h = cg_norm(&sasaki, &lhs_h.sub(&rhs_h))?;
    Ok((res_v, res_h))
}

/// The vertical extension of a tangent: pointwise metric projection of its
/// constant-coefficient extension onto `ker dphi`.
fn vertical_extension(phi: &MapJet, v: &Tangent) -> VectorField {
    let comps = v.components().clone();
    let phi = phi.clone();
    let chart = phi.domain().clone();
    let dim = chart.dim();
    VectorField::from_fn(chart, move |seeds| {
        let pi_h = horizontal_projector_jets(&phi, seeds).expect("projector at submersion point");
        (0..dim)
            .map(|k| {
                let mut s = Jet::constant_in(seeds[0].space(), comps[k]);
                for c in 0..dim {
                    s = &s - &(&pi_h[k][c] * comps[c]);
                }
                s
            })
            .collect()
    })
}

/// The horizontal extension by pointwise metric projection.
fn horizontal_extension(phi: &MapJet, v: &Tangent) -> VectorField {
    let comps = v.components().clone();
    let phi = phi.clone();
    let chart = phi.domain().clone();
    let dim = chart.dim();
    VectorField::from_fn(chart, move |seeds| {
        let pi_h = horizontal_projector_jets(&phi, seeds).expect("projector at submersion point");
        (0..dim)
            .map(|k| {
                let mut s = Jet::constant_in(seeds[0].space(), 0.0);
                for c in 0..dim {
                    s = &s + &(&pi_h[k][c] * comps[c]);
                }
                s
            })
            .collect()
    })
}

/// The two generating families of the vertical/horizontal splitting of
/// `T_xi(TM)` over a submersion, with their measured invariants.
#[derive(Clone, Debug)]
pub struct SplitBasis {
    at: BundlePoint,
    v_span: Vec<SecondTangent>,
    h_span: Vec<SecondTangent>,
    annihilation_residual: f64,
    orthogonality_residual: f64,
    span_rank: usize,
    kernel_dim_measured: usize,
    h_dim_measured: usize,
}

impl SplitBasis {
    pub fn at(&self) -> &BundlePoint {
        &self.at
    }

    /// Vertical family `{eta_i^h + (nabla_xi eta_i)^v, eta_i^v}`, `2(m-n)` vectors.
    pub fn v_span(&self) -> &[SecondTangent] {
        &self.v_span
    }

    /// Horizontal family
    /// `{X_j^v - q omega_q <X_j,xi> xi^v + omega_alpha^p (nabla_xi X_j)^h, X_j^h}`,
    /// `2n` vectors.
    pub fn h_span(&self) -> &[SecondTangent] {
        &self.h_span
    }

    /// max over the vertical family of `|Phi_* v|` (Sasaki norm on `TN`).
    pub fn annihilation_residual(&self) -> f64 {
        self.annihilation_residual
    }

    /// max normalized `|h_{p,q,alpha}(v, h)|` over cross pairs.
    pub fn orthogonality_residual(&self) -> f64 {
        self.orthogonality_residual
    }

    /// Rank of the combined family inside the `2m`-dimensional tangent space.
    pub fn span_rank(&self) -> usize {
        self.span_rank
    }

    /// `dim ker dPhi` measured by SVD; `2(m-n)` for a submersion.
    pub fn kernel_dim_measured(&self) -> usize {
        self.kernel_dim_measured
    }

    /// Measured rank of the horizontal family alone (comes out `2n`;
    /// reported rather than trusted from any closed-form claim).
    pub fn h_dim_measured(&self) -> usize {
        self.h_dim_measured
    }
}

fn rank_of(vectors: &[&SecondTangent], rel_tol: f64) -> usize {
    if vectors.is_empty() {
        return 0;
    }
    let m = vectors[0].at().dim();
    let mat = DMatrix::from_fn(2 * m, vectors.len(), |r, c| {
        if r < m {
            vectors[c].base()[r]
        } else {
            vectors[c].fiber()[r - m]
        }
    });
    let mut s: Vec<f64> = mat.svd(false, false).singular_values.iter().cloned().collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let smax = s.first().cloned().unwrap_or(0.0);
    if smax == 0.0 {
        return 0;
    }
    s.iter().filter(|&&v| v > rel_tol * smax).count()
}

/// Construct the two spanning families at a bundle point of a submersion,
/// with frame fields extended by pointwise metric projection.
pub fn split_basis(
    lifted: &LiftedMap,
    params_m: &CGParams,
    at: &BundlePoint,
    rank_tol: f64,
) -> Result<SplitBasis> {
    let phi = lifted.map();
    let n = phi.codomain().dim();
    let data = map_point_data(phi, at.base(), rank_tol)?;
    if data.is_critical() || data.rank() < n {
        return Err(GeomError::NotSubmersion {
            map: phi.name().to_string(),
            coords: at.base().coords_vec(),
            rank: data.rank(),
            need: n,
        });
    }
    let chart = phi.domain();
    let xi = Tangent::new(at.base().clone(), at.fiber().components().clone());
    let omega_a_p = crate::bundle::omega_alpha(params_m, at)?.powf(params_m.p());
    let q_omega_q = params_m.q() * crate::bundle::omega_q(params_m, at)?;

    let mut v_span = Vec::with_capacity(2 * data.vertical_basis().len());
    for eta in data.vertical_basis() {
        let ext = vertical_extension(phi, eta);
        let nabla = covariant_derivative(&xi, &ext)?;
        v_span.push(horizontal_lift(eta, at)?.add(&vertical_lift(&nabla, at)?));
        v_span.push(vertical_lift(eta, at)?);
    }

    let mut h_span = Vec::with_capacity(2 * data.horizontal_basis().len());
    for x in data.horizontal_basis() {
        let ext = horizontal_extension(phi, x);
        let nabla = covariant_derivative(&xi, &ext)?;
        let x_xi = chart.inner(x, &xi)?;
        let mut v = vertical_lift(&x.sub(&xi.scale(q_omega_q * x_xi))?, at)?;
        v = v.add(&horizontal_lift(&nabla.scale(omega_a_p), at)?);
        h_span.push(v);
        h_span.push(horizontal_lift(x, at)?);
    }

    let sasaki = CGParams::sasaki();
    let mut annihilation = 0.0_f64;
    for v in &v_span {
        annihilation = annihilation.max(cg_norm(&sasaki, &lifted.pushforward(v)?)?);
    }
    let mut ortho = 0.0_f64;
    for v in &v_span {
        let nv = cg_norm(params_m, v)?;
        for h in &h_span {
            let nh = cg_norm(params_m, h)?;
            let inner = cg_inner(params_m, v, h)?;
            ortho = ortho.max(inner.abs() / (nv * nh).max(1e-300));
        }
    }
    let all: Vec<&SecondTangent> = v_span.iter().chain(h_span.iter()).collect();
    let span_rank = rank_of(&all, 1e-10);
    let h_refs: Vec<&SecondTangent> = h_span.iter().collect();
    let h_dim_measured = rank_of(&h_refs, 1e-10);
    let kernel_dim_measured = lifted.kernel_dim(at, rank_tol);

    Ok(SplitBasis {
        at: at.clone(),
        v_span,
        h_span,
        annihilation_residual: annihilation,
        orthogonality_residual: ortho,
        span_rank,
        kernel_dim_measured,
        h_dim_measured,
    })
}

/// Gram-Schmidt a family of second tangents under `h_{p,q,alpha}`.
pub fn h_orthonormalize(params: &CGParams, vecs: &[SecondTangent]) -> Result<Vec<SecondTangent>> {
    let mut out: Vec<SecondTangent> = Vec::with_capacity(vecs.len());
    for (index, v) in vecs.iter().enumerate() {
        let mut w = v.clone();
        for u in &out {
            let proj = cg_inner(params, u, &w)?;
            w = w.sub(&u.scale(proj));
        }
        let n2 = cg_inner(params, &w, &w)?;
        let scale = cg_inner(params, v, v)?.max(1.0);
        if n2 <= 1e-20 * scale {
            return Err(GeomError::DegenerateFrame { index, residual: n2.max(0.0).sqrt() });
        }
        out.push(w.scale(1.0 / n2.sqrt()));
    }
    Ok(out)
}

/// Conformality measurement of `Phi_*` on the horizontal space at one bundle
/// point: the h-Gram matrix of the images of an h-orthonormalized horizontal
/// basis, summarized by its trace mean and eigenvalue spread.
#[derive(Clone, Debug)]
pub struct LiftedGram {
    pub capital_lambda: f64,
    pub deviation: f64,
    /// h-orthonormal basis of the horizontal space that was measured.
    pub h_basis: Vec<SecondTangent>,
}

pub fn lifted_conformality(
    lifted: &LiftedMap,
    params_m: &CGParams,
    params_n: &CGParams,
    at: &BundlePoint,
    rank_tol: f64,
) -> Result<LiftedGram> {
    let split = split_basis(lifted, params_m, at, rank_tol)?;
    let basis = h_orthonormalize(params_m, split.h_span())?;
    let images: Vec<SecondTangent> =
        basis.iter().map(|u| lifted.pushforward(u)).collect::<Result<_>>()?;
    let k = basis.len();
    let mut gram = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in i..k {
            let v = cg_inner(params_n, &images[i], &images[j])?;
            gram[(i, j)] = v;
            gram[(j, i)] = v;
        }
    }
    let eig = gram.symmetric_eigen();
    let max = eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    let capital_lambda = eig.eigenvalues.iter().sum::<f64>() / k as f64;
    Ok(LiftedGram { capital_lambda, deviation: max - min, h_basis: basis })
}

fn require_conformal_phi(phi: &MapJet, data: &MapPointData, tol: f64) -> Result<f64> {
    match dilatation(phi, data, tol)? {
        ConformalityVerdict::Conformal { lambda } => Ok(lambda),
        other => Err(GeomError::DilatationUnavailable {
            coords: data.point().coords_vec(),
            reason: format!("identity requires a horizontally conformal point, got {other:?}"),
        }),
    }
}

/// Residual of the conformal decomposition of `Phi_*(X^h)`:
/// `|Phi_*(X^h) - (phi_* X)^h - (phi_* S(X, xi))^v - P(X, xi)^v|` in the
/// Sasaki norm on `TN`. Requires `phi` horizontally conformal at the base
/// point and `X` horizontal.
pub fn lmain_residual(lifted: &LiftedMap, x: &Tangent, at: &BundlePoint, tol: f64) -> Result<f64> {
    let phi = lifted.map();
    let data = map_point_data(phi, at.base(), maps::RANK_TOL)?;
    require_conformal_phi(phi, &data, tol)?;
    let xi = Tangent::new(at.base().clone(), at.fiber().components().clone());
    let image = lifted.eval(at)?;
    let lhs = lifted.pushforward(&horizontal_lift(x, at)?)?;
    let s = s_tensor(phi, x, &xi, tol)?;
    let p = p_operator(phi, &data, x, &xi, tol)?;
    let push_x = pushforward(phi, x)?;
    let push_s = pushforward(phi, &s)?;
    let rhs = horizontal_lift(&push_x, &image)?.add(&vertical_lift(&push_s.add(&p)?, &image)?);
    cg_norm(&CGParams::sasaki(), &lhs.sub(&rhs))
}

/// Residuals of the four corollary identities relating `B`, `S`, `P`, `T`.
#[derive(Clone, Copy, Debug)]
pub struct ClmainResiduals {
    /// `B(X, xi) = phi_*(S(X, xi)) + P(X, xi)`
    pub cme1: f64,
    /// `<B(X, xi), phi_* Y> = lambda (<S(X, xi), Y> + <xi, T(X, Y)>)`
    pub cme2: f64,
    /// `<phi_* S, P> = 0`, vertical `xi` only
    pub cme3: Option<f64>,
    /// `|B^v_0|^2 = |(phi_* S)^v_0|^2 + |P^v_0|^2` at the zero vector of `TN`,
    /// vertical `xi` only
    pub cme4: Option<f64>,
}

pub fn clmain_residuals(
    lifted: &LiftedMap,
    x: &Tangent,
    y: &Tangent,
    at: &BundlePoint,
    tol: f64,
) -> Result<ClmainResiduals> {
    let phi = lifted.map();
    let chart = phi.domain();
    let nchart = phi.codomain();
    let data = map_point_data(phi, at.base(), maps::RANK_TOL)?;
    let lambda = require_conformal_phi(phi, &data, tol)?;
    let xi = Tangent::new(at.base().clone(), at.fiber().components().clone());

    let b = second_fundamental_form(phi, x, &xi)?;
    let s = s_tensor(phi, x, &xi, tol)?;
    let p = p_operator(phi, &data, x, &xi, tol)?;
    let t = maps::integrability_tensor(phi, x, y, tol)?;
    let push_s = pushforward(phi, &s)?;
    let push_y = pushforward(phi, y)?;

    let cme1 = nchart.norm(&b.sub(&push_s)?.sub(&p)?)?;
    let lhs2 = nchart.inner(&b, &push_y)?;
    let rhs2 = lambda * (chart.inner(&s, y)? + chart.inner(&xi, &t)?);
    let cme2 = (lhs2 - rhs2).abs();

    let xi_norm = chart.norm(&xi)?;
    let is_vertical = data
        .horizontal_basis()
        .iter()
        .map(|h| chart.inner(&xi, h).map(f64::abs))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0_f64, f64::max)
        <= tol * (1.0 + xi_norm);
    let (cme3, cme4) = if is_vertical {
        let c3 = nchart.inner(&push_s, &p)?.abs();
        // vertical lifts at the zero vector of TN; all parameter choices agree
        // with Sasaki there
        let zero_n = BundlePoint::zero(phi.eval(at.base())?);
        let sasaki = CGParams::sasaki();
        let sq_norm = |v: &Tangent| -> Result<f64> {
            let lift = vertical_lift(v, &zero_n)?;
            cg_inner(&sasaki, &lift, &lift)
        };
        let c4 = (sq_norm(&b)? - sq_norm(&push_s)? - sq_norm(&p)?).abs();
        (Some(c3), Some(c4))
    } else {
        (None, None)
    };
    Ok(ClmainResiduals { cme1, cme2, cme3, cme4 })
}

/// Residuals of the two dilatation norm identities.
#[derive(Clone, Copy, Debug)]
pub struct L5Residuals {
    /// `Lambda(xi) |X|^2 = lambda |X|^2 + |B(X,xi)^v|^2_{TN}`
    pub e13: f64,
    /// `Lambda |X|^2 + Lambda |S_perp|^2 = lambda |X|^2 + |P^v|^2_{TN}`
    pub e14: f64,
    pub lambda: f64,
    pub capital_lambda: f64,
}

/// Both identities require `phi` conformal at `x` and `Phi` conformal at
/// `(x, xi)`, verified empirically first; `X` must be horizontal.
pub fn l5_residuals(
    lifted: &LiftedMap,
    params_m: &CGParams,
    params_n: &CGParams,
    x: &Tangent,
    at: &BundlePoint,
    tol: f64,
) -> Result<L5Residuals> {
    let phi = lifted.map();
    let chart = phi.domain();
    let data = map_point_data(phi, at.base(), maps::RANK_TOL)?;
    let lambda = require_conformal_phi(phi, &data, tol)?;
    let gram = lifted_conformality(lifted, params_m, params_n, at, maps::RANK_TOL)?;
    if gram.deviation > tol * (1.0 + gram.capital_lambda.abs()) {
        return Err(GeomError::DilatationUnavailable {
            coords: at.base().coords_vec(),
            reason: format!(
                "lifted map is not horizontally conformal at this bundle point (deviation {:.3e})",
                gram.deviation
            ),
        });
    }
    let capital_lambda = gram.capital_lambda;
    let xi = Tangent::new(at.base().clone(), at.fiber().components().clone());
    let image = lifted.eval(at)?;
    let x_norm2 = chart.inner(x, x)?;

    let b = second_fundamental_form(phi, x, &xi)?;
    let bv = vertical_lift(&b, &image)?;
    let bv_norm2 = cg_inner(params_n, &bv, &bv)?;
    let e13 = (capital_lambda * x_norm2 - lambda * x_norm2 - bv_norm2).abs();

    let s = s_tensor(phi, x, &xi, tol)?;
    let s_vert = vertical_lift(&s, at)?;
    // h-orthogonal projection of S^v onto the horizontal space of Phi
    let mut s_perp = SecondTangent::zero(at.clone());
    for u in &gram.h_basis {
        let c = cg_inner(params_m, &s_vert, u)?;
        s_perp = s_perp.add(&u.scale(c));
    }
    let s_perp_norm2 = cg_inner(params_m, &s_perp, &s_perp)?;
    let p = p_operator(phi, &data, x, &xi, tol)?;
    let pv = vertical_lift(&p, &image)?;
    let pv_norm2 = cg_inner(params_n, &pv, &pv)?;
    let e14 = (capital_lambda * x_norm2 + capital_lambda * s_perp_norm2
        - lambda * x_norm2
        - pv_norm2)
        .abs();
    Ok(L5Residuals { e13, e14, lambda, capital_lambda })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Chart;
    use nalgebra::DVector;
    use approx::assert_relative_eq;

    fn flat(dim: usize) -> Chart {
        Chart::flat(dim, 10.0, 1.0)
    }

    fn scaled_projection(lambda: f64) -> MapJet {
        let c = lambda.sqrt();
        MapJet::new("flat_projection", Chart::flat(3, 2.0, 1.0), flat(2), move |s| {
            vec![&s[0] * c, &s[1] * c]
        })
    }

    fn bundle_point(chart: &Chart, x: Vec<f64>, xi: Vec<f64>) -> BundlePoint {
        let p = chart.point(x).unwrap();
        let v = chart.tangent(&p, xi).unwrap();
        BundlePoint::new(p, v).unwrap()
    }

    #[test]
    fn lifted_eval_commutes_with_projection() {
        let phi = scaled_projection(2.0);
        let lifted = LiftedMap::new(phi.clone());
        let at = bundle_point(phi.domain(), vec![0.3, -0.5, 0.8], vec![1.0, 0.4, -0.2]);
        let image = lifted.eval(&at).unwrap();
        let fx = phi.eval(at.base()).unwrap();
        assert!(image.base().same_point(&fx, 1e-14));
    }

    #[test]
    fn l1_flat_linear_exact() {
        let phi = scaled_projection(2.0);
        let lifted = LiftedMap::new(phi.clone());
        let at = bundle_point(phi.domain(), vec![0.3, -0.5, 0.8], vec![1.0, 0.4, -0.2]);
        let x = phi.domain().tangent(at.base(), vec![0.7, 0.1, 0.9]).unwrap();
        let (rv, rh) = l1_residuals(&lifted, &x, &at).unwrap();
        assert!(rv < 1e-13 && rh < 1e-13, "residuals {rv} {rh}");
    }

    #[test]
    fn l1_curved_codomain() {
        let sphere =
            Chart::new("sphere", vec![(0.1, std::f64::consts::PI - 0.1), (-3.0, 3.0)], |x| {
                let zero = Jet::constant_in(x[0].space(), 0.0);
                let one = Jet::constant_in(x[0].space(), 1.0);
                let s = x[0].sin();
                vec![vec![one, zero.clone()], vec![zero, &s * &s]]
            });
        let dom = Chart::flat(2, 1.0, 1.0);
        let phi = MapJet::new("to_sphere", dom.clone(), sphere, |s| {
            vec![&(&s[0] * 0.3) + 1.2, &s[1] * &s[1]]
        });
        let lifted = LiftedMap::new(phi.clone());
        let at = bundle_point(&dom, vec![0.4, -0.6], vec![0.9, 0.3]);
        let x = dom.tangent(at.base(), vec![-0.5, 1.1]).unwrap();
        let (rv, rh) = l1_residuals(&lifted, &x, &at).unwrap();
        assert!(rv < 1e-9 && rh < 1e-9, "residuals {rv} {rh}");
    }

    #[test]
    fn functoriality_chain_rule() {
        let c2 = flat(2);
        let psi = MapJet::new("psi", Chart::flat(2, 2.0, 1.0), c2.clone(), |s| {
            vec![&s[0] + &(&(&s[1] * &s[1]) * 0.3), &s[1] - &(&(&s[0] * &s[0]) * 0.2)]
        });
        let phi =
            MapJet::new("phi", c2.clone(), flat(2), |s| vec![&s[0] * &s[1], &s[0] + &s[1]]);
        let composite = {
            let psi = psi.clone();
            let phi = phi.clone();
            MapJet::new("phi_after_psi", psi.domain().clone(), phi.codomain().clone(), move |s| {
                phi.eval_jets(&psi.eval_jets(s))
            })
        };
        let lifted_psi = LiftedMap::new(psi.clone());
        let lifted_phi = LiftedMap::new(phi.clone());
        let lifted_comp = LiftedMap::new(composite);
        let at = bundle_point(psi.domain(), vec![0.4, -0.3], vec![0.8, 0.5]);
        let a = SecondTangent::new(
            at.clone(),
            DVector::from_vec(vec![0.6, -0.9]),
            DVector::from_vec(vec![0.2, 1.1]),
        );
        let one_shot = lifted_comp.pushforward(&a).unwrap();
        let two_step = lifted_phi.pushforward(&lifted_psi.pushforward(&a).unwrap()).unwrap();
        assert!((one_shot.base() - two_step.base()).amax() < 1e-9);
        assert!((one_shot.fiber() - two_step.fiber()).amax() < 1e-9);
    }

    #[test]
    fn kernel_dimension_and_full_rank() {
        let phi = scaled_projection(1.0);
        let lifted = LiftedMap::new(phi.clone());
        let at = bundle_point(phi.domain(), vec![0.4, 0.2, -0.7], vec![0.3, -0.8, 1.2]);
        assert_eq!(lifted.kernel_dim(&at, 1e-8), 2);
        let svals = lifted.singular_values(&at);
        assert_eq!(svals.iter().filter(|&&s| s > 1e-8).count(), 4);
    }

    #[test]
    fn constant_map_kernel_is_everything() {
        let chart = Chart::flat(2, 2.0, 1.0);
        let phi = MapJet::new("constant", chart.clone(), flat(2), |s| {
            vec![Jet::constant_in(s[0].space(), 0.0), Jet::constant_in(s[0].space(), 0.0)]
        });
        let lifted = LiftedMap::new(phi);
        let at = bundle_point(&chart, vec![0.1, 0.2], vec![0.5, -0.5]);
        assert_eq!(lifted.kernel_dim(&at, 1e-8), 4);
    }

    #[test]
    fn split_basis_flat_projection() {
        let phi = scaled_projection(2.0);
        let lifted = LiftedMap::new(phi.clone());
        let params = CGParams::new(1.0, 1.0, 1.0).unwrap();
        let at = bundle_point(phi.domain(), vec![0.3, -0.2, 0.6], vec![0.9, -0.4, 0.7]);
        let split = split_basis(&lifted, &params, &at, 1e-8).unwrap();
        assert_eq!(split.v_span().len(), 2);
        assert_eq!(split.h_span().len(), 4);
        assert!(split.annihilation_residual() < 1e-10, "ann {}", split.annihilation_residual());
        assert!(split.orthogonality_residual() < 1e-10, "orth {}", split.orthogonality_residual());
        assert_eq!(split.span_rank(), 6);
        assert_eq!(split.kernel_dim_measured(), 2);
        assert_eq!(split.h_dim_measured(), 4);
    }

    #[test]
    fn split_basis_rejects_critical() {
        let chart = Chart::flat(2, 2.0, 1.0);
        let phi = MapJet::new("constant", chart.clone(), flat(2), |s| {
            vec![Jet::constant_in(s[0].space(), 0.0), Jet::constant_in(s[0].space(), 0.0)]
        });
        let lifted = LiftedMap::new(phi);
        let at = bundle_point(&chart, vec![0.1, 0.2], vec![0.5, -0.5]);
        assert!(matches!(
            split_basis(&lifted, &CGParams::sasaki(), &at, 1e-8),
            Err(GeomError::NotSubmersion { .. })
        ));
    }

    #[test]
    fn lifted_conformality_sasaki_projection() {
        let phi = scaled_projection(2.0);
        let lifted = LiftedMap::new(phi.clone());
        let sas = CGParams::sasaki();
        let at = bundle_point(phi.domain(), vec![0.5, 0.1, -0.3], vec![0.7, 0.2, 1.1]);
        let gram = lifted_conformality(&lifted, &sas, &sas, &at, 1e-8).unwrap();
        assert_relative_eq!(gram.capital_lambda, 2.0, epsilon = 1e-10);
        assert!(gram.deviation < 1e-10, "deviation {}", gram.deviation);
    }

    #[test]
    fn lifted_conformality_mixed_fiber_defect() {
        // q = lambda*s > 0 with a mixed fiber vector: the horizontal Gram of
        // Phi_* is not proportional to the identity. Hand value at
        // xi = e1 + e3: the coupled direction has ratio 8/3 against
        // lambda = 2, so the eigenvalue spread is 2/3.
        let lambda = 2.0;
        let phi = scaled_projection(lambda);
        let lifted = LiftedMap::new(phi.clone());
        let pm = CGParams::new(0.0, 1.0, 1.0).unwrap();
        let pn = CGParams::new(0.0, 0.5, 1.0).unwrap();
        let at = bundle_point(phi.domain(), vec![0.0, 0.0, 0.0], vec![1.0, 0.0, 1.0]);
        let gram = lifted_conformality(&lifted, &pm, &pn, &at, 1e-8).unwrap();
        assert_relative_eq!(gram.deviation, 2.0 / 3.0, epsilon = 1e-9);
        // purely horizontal, purely vertical or zero fibers are conformal
        for xi in [vec![1.0, -0.4, 0.0], vec![0.0, 0.0, 1.3], vec![0.0, 0.0, 0.0]] {
            let at = bundle_point(phi.domain(), vec![0.0, 0.0, 0.0], xi);
            let gram = lifted_conformality(&lifted, &pm, &pn, &at, 1e-8).unwrap();
            assert!(gram.deviation < 1e-10, "deviation {}", gram.deviation);
            assert_relative_eq!(gram.capital_lambda, lambda, epsilon = 1e-10);
        }
    }

    #[test]
    fn lmain_riemannian_submersion_reduces_to_l1() {
        let phi = scaled_projection(1.0);
        let lifted = LiftedMap::new(phi.clone());
        let at = bundle_point(phi.domain(), vec![0.2, 0.8, -0.1], vec![0.4, -0.6, 0.9]);
        let x = phi.domain().tangent(at.base(), vec![0.9, 0.2, 0.0]).unwrap();
        let res = lmain_residual(&lifted, &x, &at, 1e-8).unwrap();
        assert!(res < 1e-9, "residual {res}");
    }

    #[test]
    fn l5_on_sasaki_totally_geodesic() {
        let phi = scaled_projection(2.0);
        let lifted = LiftedMap::new(phi.clone());
        let sas = CGParams::sasaki();
        let at = bundle_point(phi.domain(), vec![0.5, 0.1, -0.3], vec![0.7, 0.2, 1.1]);
        let x = phi.domain().tangent(at.base(), vec![1.0, -0.5, 0.0]).unwrap();
        let r = l5_residuals(&lifted, &sas, &sas, &x, &at, 1e-8).unwrap();
        assert!(r.e13 < 1e-9 && r.e14 < 1e-9, "e13 {} e14 {}", r.e13, r.e14);
        assert_relative_eq!(r.capital_lambda, r.lambda, epsilon = 1e-10);
    }

    #[test]
    fn l5_rejects_nonconformal_bundle_point() {
        let phi = scaled_projection(2.0);
        let lifted = LiftedMap::new(phi.clone());
        let pm = CGParams::new(0.0, 1.0, 1.0).unwrap();
        let pn = CGParams::new(0.0, 0.5, 1.0).unwrap();
        let at = bundle_point(phi.domain(), vec![0.0, 0.0, 0.0], vec![1.0, 0.0, 1.0]);
        let x = phi.domain().tangent(at.base(), vec![1.0, 0.0, 0.0]).unwrap();
        assert!(matches!(
            l5_residuals(&lifted, &pm, &pn, &x, &at, 1e-7),
            Err(GeomError::DilatationUnavailable { .. })
        ));
    }
}
