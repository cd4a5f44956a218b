//! The tangent bundle `TM` in induced coordinates `(x, xi)` and the
//! Cheeger-Gromoll type metric family `h_{p,q,alpha}`.
//!
//! For `A, B` tangent to `TM` at `(x, xi)`,
//!
//! ```text
//! h(A, B) = g(pi_* A, pi_* B)
//!         + omega_alpha(xi)^p ( g(KA, KB) + q g(KA, xi) g(KB, xi) ),
//! omega_alpha(xi) = (1 + alpha g(xi, xi))^{-1},
//! ```
//!
//! where `pi_*` drops the fiber component and the connection map is
//! `K(a, b) = b + Gamma(a, xi)`. Horizontal vectors are the kernel of `K`,
//! vertical vectors the kernel of `pi_*`. The parameters satisfy `q >= 0`,
//! `alpha > 0`; `p = 0, q = 0` (any `alpha`) is the Sasaki metric and
//! `(1, 1, 1)` the classical Cheeger-Gromoll metric.
//!
//! [`cg_connection`] implements the four stated formulas for the Levi-Civita
//! connection of `h_{p,q,alpha}` (with the weight read as `omega_alpha`), and
//! [`verify_levi_civita`] checks torsion-freeness and metric compatibility
//! numerically against honest jet differentiation along `TM` — the formulas
//! are treated as a claim to verify, not an axiom.

use nalgebra::DVector;
use serde::Serialize;

use crate::error::{GeomError, Result};
use crate::geometry::{Chart, Christoffel, ChristoffelJets, Point, RiemannTensor, Tangent, VectorField};
use crate::jet::{seed_bundle_coords, Jet};
use crate::sample;

/// Parameters `(p, q, alpha)` of a Cheeger-Gromoll type metric.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CGParams {
    p: f64,
    q: f64,
    alpha: f64,
}

impl CGParams {
    /// Requires `q >= 0` and `alpha > 0`.
    pub fn new(p: f64, q: f64, alpha: f64) -> Result<CGParams> {
        if !(q >= 0.0) {
            return Err(GeomError::InvalidParams { reason: format!("q must be non-negative, got {q}") });
        }
        if !(alpha > 0.0) {
            return Err(GeomError::InvalidParams { reason: format!("alpha must be positive, got {alpha}") });
        }
        if !p.is_finite() || !q.is_finite() || !alpha.is_finite() {
            return Err(GeomError::InvalidParams { reason: "parameters must be finite".into() });
        }
        Ok(CGParams { p, q, alpha })
    }

    /// The Sasaki metric `h_{0,0,1}`.
    pub fn sasaki() -> CGParams {
        CGParams { p: 0.0, q: 0.0, alpha: 1.0 }
    }

    /// The classical Cheeger-Gromoll metric `h_{1,1,1}`.
    pub fn cheeger_gromoll() -> CGParams {
        CGParams { p: 1.0, q: 1.0, alpha: 1.0 }
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `p * alpha == 0`, one of the two closed-form conditions on the domain side.
    pub fn p_alpha_zero(&self) -> bool {
        self.p * self.alpha == 0.0
    }

    pub fn is_sasaki(&self) -> bool {
        self.q == 0.0 && self.p_alpha_zero()
    }
}

/// A point `(x, xi)` of the tangent bundle.
#[derive(Clone, Debug)]
pub struct BundlePoint {
    x: Point,
    xi: Tangent,
}

impl BundlePoint {
    pub fn new(x: Point, xi: Tangent) -> Result<BundlePoint> {
        if !xi.base().same_point(&x, 1e-12) {
            return Err(GeomError::BasePointMismatch { a: x.coords_vec(), b: xi.base().coords_vec() });
        }
        Ok(BundlePoint { x, xi })
    }

    /// The zero vector over `x`.
    pub fn zero(x: Point) -> BundlePoint {
        let xi = Tangent::zero(x.clone());
        BundlePoint { x, xi }
    }

    pub fn base(&self) -> &Point {
        &self.x
    }

    pub fn fiber(&self) -> &Tangent {
        &self.xi
    }

    pub fn chart(&self) -> &Chart {
        self.x.chart()
    }

    pub fn dim(&self) -> usize {
        self.x.chart().dim()
    }
}

/// A tangent vector of `TM` at a bundle point, stored in induced coordinates
/// as a base component `a` (along `x`) and a fiber component `b` (along `xi`).
#[derive(Clone, Debug)]
pub struct SecondTangent {
    at: BundlePoint,
    base: DVector<f64>,
    fiber: DVector<f64>,
}

impl SecondTangent {
    pub fn new(at: BundlePoint, base: DVector<f64>, fiber: DVector<f64>) -> SecondTangent {
        assert_eq!(base.len(), at.dim());
        assert_eq!(fiber.len(), at.dim());
        SecondTangent { at, base, fiber }
    }

    pub fn zero(at: BundlePoint) -> SecondTangent {
        let m = at.dim();
        SecondTangent { at, base: DVector::zeros(m), fiber: DVector::zeros(m) }
    }

    pub fn at(&self) -> &BundlePoint {
        &self.at
    }

    pub fn base(&self) -> &DVector<f64> {
        &self.base
    }

    pub fn fiber(&self) -> &DVector<f64> {
        &self.fiber
    }

    pub fn add(&self, other: &SecondTangent) -> SecondTangent {
        SecondTangent {
            at: self.at.clone(),
            base: &self.base + &other.base,
            fiber: &self.fiber + &other.fiber,
        }
    }

    pub fn sub(&self, other: &SecondTangent) -> SecondTangent {
        SecondTangent {
            at: self.at.clone(),
            base: &self.base - &other.base,
            fiber: &self.fiber - &other.fiber,
        }
    }

    pub fn scale(&self, s: f64) -> SecondTangent {
        SecondTangent { at: self.at.clone(), base: &self.base * s, fiber: &self.fiber * s }
    }

    /// Euclidean coordinate norm, used only for degeneracy checks.
    pub fn coord_norm(&self) -> f64 {
        (self.base.norm_squared() + self.fiber.norm_squared()).sqrt()
    }
}

/// `pi_* A`: the base component as a tangent vector at `x`.
pub fn pi_push(a: &SecondTangent) -> Tangent {
    Tangent::new(a.at.x.clone(), a.base.clone())
}

/// The connection map `K(A)^k = b^k + Gamma^k_{ij} a^i xi^j`.
pub fn connection_map(a: &SecondTangent) -> Result<Tangent> {
    let chart = a.at.chart();
    let gamma = chart.christoffel_at(&a.at.x)?;
    let comps = &a.fiber + gamma.contract(&a.base, a.at.xi.components());
    Ok(Tangent::new(a.at.x.clone(), comps))
}

/// The unique vertical vector with `K(X^v) = X`.
pub fn vertical_lift(x: &Tangent, at: &BundlePoint) -> Result<SecondTangent> {
    check_based_at(x, at)?;
    let m = at.dim();
    Ok(SecondTangent { at: at.clone(), base: DVector::zeros(m), fiber: x.components().clone() })
}

/// The unique horizontal vector with `pi_*(X^h) = X`.
pub fn horizontal_lift(x: &Tangent, at: &BundlePoint) -> Result<SecondTangent> {
    check_based_at(x, at)?;
    let gamma = at.chart().christoffel_at(&at.x)?;
    let fiber = -gamma.contract(x.components(), at.xi.components());
    Ok(SecondTangent { at: at.clone(), base: x.components().clone(), fiber })
}

fn check_based_at(x: &Tangent, at: &BundlePoint) -> Result<()> {
    if !x.base().same_point(&at.x, 1e-12) {
        return Err(GeomError::BasePointMismatch { a: x.base().coords_vec(), b: at.x.coords_vec() });
    }
    Ok(())
}

/// Split `A` into its horizontal and vertical parts,
/// `A = (pi_* A)^h + (K A)^v`.
pub fn decompose(a: &SecondTangent) -> Result<(SecondTangent, SecondTangent)> {
    let horizontal = horizontal_lift(&pi_push(a), &a.at)?;
    let vertical = vertical_lift(&connection_map(a)?, &a.at)?;
    Ok((horizontal, vertical))
}

/// `omega_alpha(xi) = (1 + alpha |xi|^2_g)^{-1}`, in `(0, 1]`.
pub fn omega_alpha(params: &CGParams, at: &BundlePoint) -> Result<f64> {
    let n2 = at.chart().inner(&at.xi, &at.xi)?;
    Ok(1.0 / (1.0 + params.alpha * n2))
}

/// `omega_q(xi) = (1 + q |xi|^2_g)^{-1}`, in `(0, 1]`.
pub fn omega_q(params: &CGParams, at: &BundlePoint) -> Result<f64> {
    let n2 = at.chart().inner(&at.xi, &at.xi)?;
    Ok(1.0 / (1.0 + params.q * n2))
}

/// `h_{p,q,alpha}(A, B)` at the common bundle point of `A` and `B`.
pub fn cg_inner(params: &CGParams, a: &SecondTangent, b: &SecondTangent) -> Result<f64> {
    if !a.at.x.same_point(&b.at.x, 1e-12)
        || (a.at.xi.components() - b.at.xi.components()).amax() > 1e-12
    {
        return Err(GeomError::BasePointMismatch { a: a.at.x.coords_vec(), b: b.at.x.coords_vec() });
    }
    let chart = a.at.chart();
    let g = chart.metric_at(&a.at.x)?;
    let gamma = chart.christoffel_at(&a.at.x)?;
    Ok(cg_inner_with(params, &g, &gamma, a.at.xi.components(), &a.base, &a.fiber, &b.base, &b.fiber))
}

pub fn cg_norm(params: &CGParams, a: &SecondTangent) -> Result<f64> {
    Ok(cg_inner(params, a, a)?.max(0.0).sqrt())
}

/// Metric evaluation from precomputed ingredients; the workhorse behind
/// [`cg_inner`] and the verification loops.
pub(crate) fn cg_inner_with(
    params: &CGParams,
    g: &nalgebra::DMatrix<f64>,
    gamma: &Christoffel,
    xi: &DVector<f64>,
    a_base: &DVector<f64>,
    a_fiber: &DVector<f64>,
    b_base: &DVector<f64>,
    b_fiber: &DVector<f64>,
) -> f64 {
    let ka = a_fiber + gamma.contract(a_base, xi);
    let kb = b_fiber + gamma.contract(b_base, xi);
    let pair = |u: &DVector<f64>, v: &DVector<f64>| (u.transpose() * g * v)[(0, 0)];
    let xi_n2 = pair(xi, xi);
    let omega = 1.0 / (1.0 + params.alpha * xi_n2);
    pair(a_base, b_base)
        + omega.powf(params.p) * (pair(&ka, &kb) + params.q * pair(&ka, xi) * pair(&kb, xi))
}

/// Which lifts the two arguments of the connection are.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConnLiftCase {
    HorizHoriz,
    HorizVert,
    VertHoriz,
    VertVert,
}

/// The stated Levi-Civita connection of `h_{p,q,alpha}` evaluated at a bundle
/// point, for lifted fields: `nabla_{X^*} Y^*` with the lift kinds given by
/// `case`. `x` is the (tensorial) direction at the base point; `y` must be a
/// vector field for the `HorizHoriz` and `HorizVert` cases, where its
/// covariant derivative enters.
///
/// The weight written `omega(xi)` in the source formulas is evaluated as
/// `omega_alpha(xi)`; [`verify_levi_civita`] exists to confirm that reading.
pub fn cg_connection(
    params: &CGParams,
    case: ConnLiftCase,
    x: &Tangent,
    y: &VectorField,
    at: &BundlePoint,
) -> Result<SecondTangent> {
    check_based_at(x, at)?;
    let chart = at.chart();
    if !chart.same_chart(y.chart()) {
        return Err(GeomError::ChartMismatch {
            expected: chart.name().to_string(),
            got: y.chart().name().to_string(),
        });
    }
    let y_val = y.eval(&at.x)?;
    let xi = &at.xi;
    match case {
        ConnLiftCase::HorizHoriz => {
            // (nabla_X Y)^h - 1/2 (R(X, Y) xi)^v
            let dxy = crate::geometry::covariant_derivative(x, y)?;
            let r = chart.riemann(&at.x, x, &y_val, xi)?;
            Ok(horizontal_lift(&dxy, at)?.add(&vertical_lift(&r.scale(-0.5), at)?))
        }
        ConnLiftCase::HorizVert => {
            // (nabla_X Y)^v + 1/2 omega^p (R(xi, Y) X)^h
            let dxy = crate::geometry::covariant_derivative(x, y)?;
            let w = omega_alpha(params, at)?.powf(params.p);
            let r = chart.riemann(&at.x, xi, &y_val, x)?;
            Ok(vertical_lift(&dxy, at)?.add(&horizontal_lift(&r.scale(0.5 * w), at)?))
        }
        ConnLiftCase::VertHoriz => {
            // 1/2 omega^p (R(xi, X) Y)^h
            let w = omega_alpha(params, at)?.powf(params.p);
            let r = chart.riemann(&at.x, xi, x, &y_val)?;
            horizontal_lift(&r.scale(0.5 * w), at)
        }
        ConnLiftCase::VertVert => {
            // -alpha p omega (<X,xi> Y + <Y,xi> X)^v
            // + (alpha p omega + q) omega_q <X,Y> xi^v
            // + alpha p q omega omega_q <X,xi> <Y,xi> xi^v
            let ap = params.alpha * params.p;
            let w = omega_alpha(params, at)?;
            let wq = omega_q(params, at)?;
            let x_xi = chart.inner(x, xi)?;
            let y_xi = chart.inner(&y_val, xi)?;
            let x_y = chart.inner(x, &y_val)?;
            let mut v = y_val.scale(-ap * w * x_xi).add(&x.scale(-ap * w * y_xi))?;
            let xi_coeff = (ap * w + params.q) * wq * x_y + ap * params.q * w * wq * x_xi * y_xi;
            v = v.add(&xi.scale(xi_coeff))?;
            vertical_lift(&v, at)
        }
    }
}

/// Residual report of the Levi-Civita property check.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct LeviCivitaReport {
    /// max over samples and lifted coordinate-field pairs of
    /// `|nabla_A B - nabla_B A - [A, B]|_h`
    pub max_torsion: f64,
    /// max over samples and triples of
    /// `|A h(B,C) - h(nabla_A B, C) - h(B, nabla_A C)|`
    pub max_compatibility: f64,
    pub samples: usize,
}

/// Check numerically, at `n_points` seeded random bundle points, that the
/// stated connection really is Levi-Civita for `h_{p,q,alpha}`: torsion
/// residuals against honest Lie brackets of the lifted coordinate fields, and
/// compatibility residuals against jet differentiation of `h` along `TM`.
pub fn verify_levi_civita(
    params: &CGParams,
    chart: &Chart,
    n_points: usize,
    seed: u64,
) -> Result<LeviCivitaReport> {
    let points = sample::sample_bundle_points(chart, n_points, seed, &sample::DEFAULT_XI_NORMS)?;
    let mut max_torsion: f64 = 0.0;
    let mut max_compat: f64 = 0.0;
    for at in &points {
        let ctx = LiftedFieldCtx::new(params, chart, at)?;
        let m = chart.dim();
        let nfields = 2 * m;
        let conns: Vec<Vec<SecondTangent>> = (0..nfields)
            .map(|i| (0..nfields).map(|j| ctx.connection(i, j)).collect::<Result<_>>())
            .collect::<Result<_>>()?;
        let h_jets: Vec<Vec<Jet>> =
            (0..nfields).map(|i| (0..nfields).map(|j| ctx.h_jet(i, j)).collect()).collect();
        for a in 0..nfields {
            for b in 0..nfields {
                let torsion = conns[a][b].sub(&conns[b][a]).sub(&ctx.bracket(a, b));
                max_torsion = max_torsion.max(ctx.h_norm(&torsion));
                for c in 0..nfields {
                    let lhs = ctx.directional(a, &h_jets[b][c]);
                    let rhs = ctx.h_value(&conns[a][b], c) + ctx.h_value_right(b, &conns[a][c]);
                    max_compat = max_compat.max((lhs - rhs).abs());
                }
            }
        }
    }
    Ok(LeviCivitaReport { max_torsion, max_compatibility: max_compat, samples: points.len() })
}

/// Everything needed to treat the lifted coordinate fields
/// `X^h_i = (e_i, -Gamma(e_i, xi))`, `X^v_i = (0, e_i)` as jet-evaluable
/// fields on `TM` at one bundle point.
struct LiftedFieldCtx<'a> {
    params: &'a CGParams,
    chart: &'a Chart,
    at: &'a BundlePoint,
    m: usize,
    xi_jets: Vec<Jet>,
    g_jets: Vec<Vec<Jet>>,
    gamma_jets: ChristoffelJets,
    g: nalgebra::DMatrix<f64>,
    gamma: Christoffel,
    riem: RiemannTensor,
}

impl<'a> LiftedFieldCtx<'a> {
    fn new(params: &'a CGParams, chart: &'a Chart, at: &'a BundlePoint) -> Result<Self> {
        let m = chart.dim();
        let (x_jets, xi_jets) =
            seed_bundle_coords(at.x.coords().as_slice(), at.xi.components().as_slice(), 3);
        let g_jets = chart.metric_jets(&x_jets);
        let gamma_jets = chart.christoffel_jets(&x_jets)?;
        let g = chart.metric_at(&at.x)?;
        let gamma = gamma_jets.values();
        let riem = chart.riemann_at(&at.x)?;
        Ok(LiftedFieldCtx { params, chart, at, m, xi_jets, g_jets, gamma_jets, g, gamma, riem })
    }

    /// Component jets (base, fiber) of lifted coordinate field `idx`
    /// (`0..m` horizontal lifts, `m..2m` vertical lifts).
    fn field(&self, idx: usize) -> (Vec<Jet>, Vec<Jet>) {
        let space = self.xi_jets[0].space();
        let zero = Jet::constant_in(space, 0.0);
        let mut base = vec![zero.clone(); self.m];
        let mut fiber = vec![zero.clone(); self.m];
        if idx < self.m {
            base[idx] = Jet::constant_in(space, 1.0);
            for k in 0..self.m {
                let mut s = Jet::constant_in(space, 0.0);
                for j in 0..self.m {
                    s = &s + &(self.gamma_jets.get(k, idx, j) * &self.xi_jets[j]);
                }
                fiber[k] = -&s;
            }
        } else {
            fiber[idx - self.m] = Jet::constant_in(space, 1.0);
        }
        (base, fiber)
    }

    /// Field value at the sample point, as a flat `2m` coordinate vector.
    fn field_value(&self, idx: usize) -> DVector<f64> {
        let (base, fiber) = self.field(idx);
        DVector::from_iterator(2 * self.m, base.iter().chain(&fiber).map(Jet::value))
    }

    /// `nabla_{A} B` for lifted coordinate fields via the stated formulas.
    fn connection(&self, a: usize, b: usize) -> Result<SecondTangent> {
        let (case, xv, yf) = self.case_of(a, b);
        cg_connection(self.params, case, &xv, &yf, self.at)
    }

    fn case_of(&self, a: usize, b: usize) -> (ConnLiftCase, Tangent, VectorField) {
        let m = self.m;
        let dir = |i: usize| {
            let mut v = DVector::zeros(m);
            v[i % m] = 1.0;
            Tangent::new(self.at.x.clone(), v)
        };
        let field = |i: usize| VectorField::coordinate(self.chart.clone(), i % m);
        let case = match (a < m, b < m) {
            (true, true) => ConnLiftCase::HorizHoriz,
            (true, false) => ConnLiftCase::HorizVert,
            (false, true) => ConnLiftCase::VertHoriz,
            (false, false) => ConnLiftCase::VertVert,
        };
        (case, dir(a), field(b))
    }

    /// Honest Lie bracket of lifted coordinate fields from jet components:
    /// `[A,B]^K = A^J d_J B^K - B^J d_J A^K` over all `2m` coordinates.
    fn bracket(&self, a: usize, b: usize) -> SecondTangent {
        let (a_base, a_fiber) = self.field(a);
        let (b_base, b_fiber) = self.field(b);
        let m = self.m;
        let mut base = DVector::zeros(m);
        let mut fiber = DVector::zeros(m);
        for k in 0..m {
            let mut sb = 0.0;
            let mut sf = 0.0;
            for jj in 0..2 * m {
                let av = if jj < m { a_base[jj].value() } else { a_fiber[jj - m].value() };
                let bv = if jj < m { b_base[jj].value() } else { b_fiber[jj - m].value() };
                sb += av * b_base[k].d1(jj) - bv * a_base[k].d1(jj);
                sf += av * b_fiber[k].d1(jj) - bv * a_fiber[k].d1(jj);
            }
            base[k] = sb;
            fiber[k] = sf;
        }
        SecondTangent::new(self.at.clone(), base, fiber)
    }

    /// `h(B, C)` as a jet-evaluable function on `TM`.
    fn h_jet(&self, b: usize, c: usize) -> Jet {
        let (b_base, b_fiber) = self.field(b);
        let (c_base, c_fiber) = self.field(c);
        self.h_jet_of(&b_base, &b_fiber, &c_base, &c_fiber)
    }

    fn h_jet_of(&self, b_base: &[Jet], b_fiber: &[Jet], c_base: &[Jet], c_fiber: &[Jet]) -> Jet {
        let m = self.m;
        let space = self.xi_jets[0].space();
        let zero = Jet::constant_in(space, 0.0);
        // K components as jets
        let kvec = |base: &[Jet], fiber: &[Jet]| -> Vec<Jet> {
            (0..m)
                .map(|k| {
                    let mut s = fiber[k].clone();
                    for i in 0..m {
                        for j in 0..m {
                            s = &s + &(&(self.gamma_jets.get(k, i, j) * &base[i]) * &self.xi_jets[j]);
                        }
                    }
                    s
                })
                .collect()
        };
        let kb = kvec(b_base, b_fiber);
        let kc = kvec(c_base, c_fiber);
        let pair = |u: &[Jet], v: &[Jet]| -> Jet {
            let mut s = zero.clone();
            for i in 0..m {
                for j in 0..m {
                    s = &s + &(&(&self.g_jets[i][j] * &u[i]) * &v[j]);
                }
            }
            s
        };
        let xi: Vec<Jet> = self.xi_jets.clone();
        let xi_n2 = pair(&xi, &xi);
        let omega = (&(&xi_n2 * self.params.alpha) + 1.0).recip();
        let vertical = &pair(&kb, &kc) + &(&(&pair(&kb, &xi) * &pair(&kc, &xi)) * self.params.q);
        &pair(b_base, c_base) + &(&omega.powf(self.params.p) * &vertical)
    }

    /// Directional derivative of a scalar jet along lifted field `a`.
    fn directional(&self, a: usize, scalar: &Jet) -> f64 {
        let av = self.field_value(a);
        (0..2 * self.m).map(|jj| av[jj] * scalar.d1(jj)).sum()
    }

    fn h_pair(&self, v: &SecondTangent, w: &SecondTangent) -> f64 {
        cg_inner_with(
            self.params,
            &self.g,
            &self.gamma,
            self.at.xi.components(),
            &v.base,
            &v.fiber,
            &w.base,
            &w.fiber,
        )
    }

    /// `h(V, C)` with `C` a lifted coordinate field evaluated at the point.
    fn h_value(&self, v: &SecondTangent, c: usize) -> f64 {
        let cv = self.field_value(c);
        let w = SecondTangent::new(
            self.at.clone(),
            cv.rows(0, self.m).into_owned(),
            cv.rows(self.m, self.m).into_owned(),
        );
        self.h_pair(v, &w)
    }

    fn h_value_right(&self, b: usize, v: &SecondTangent) -> f64 {
        self.h_value(v, b)
    }

    fn h_norm(&self, v: &SecondTangent) -> f64 {
        self.h_pair(v, v).max(0.0).sqrt()
    }

    #[allow(dead_code)]
    fn riem_ref(&self) -> &RiemannTensor {
        &self.riem
    }

    #[allow(dead_code)]
    fn g_ref(&self) -> &nalgebra::DMatrix<f64> {
        &self.g
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;

    fn flat3() -> Chart {
        Chart::flat(3, 2.0, 1.0)
    }

    fn sphere() -> Chart {
        Chart::new("sphere", vec![(0.1, std::f64::consts::PI - 0.1), (-3.0, 3.0)], |x| {
            let zero = Jet::constant_in(x[0].space(), 0.0);
            let one = Jet::constant_in(x[0].space(), 1.0);
            let s = x[0].sin();
            vec![vec![one, zero.clone()], vec![zero, &s * &s]]
        })
    }

    fn bp(chart: &Chart, x: Vec<f64>, xi: Vec<f64>) -> BundlePoint {
        let p = chart.point(x).unwrap();
        let v = chart.tangent(&p, xi).unwrap();
        BundlePoint::new(p, v).unwrap()
    }

    #[test]
    fn params_validation() {
        assert!(CGParams::new(1.0, -0.5, 1.0).is_err());
        assert!(CGParams::new(1.0, 0.0, 0.0).is_err());
        assert!(CGParams::new(-2.0, 3.0, 0.5).is_ok());
    }

    #[test]
    fn lift_round_trips() {
        let chart = sphere();
        let at = bp(&chart, vec![1.0, 0.3], vec![0.4, -0.2]);
        let x = chart.tangent(at.base(), vec![0.7, 1.1]).unwrap();
        let xv = vertical_lift(&x, &at).unwrap();
        let xh = horizontal_lift(&x, &at).unwrap();
        // pi_*(X^h) = X, K(X^h) = 0
        assert!((pi_push(&xh).components() - x.components()).amax() < 1e-14);
        assert!(connection_map(&xh).unwrap().components().amax() < 1e-12);
        // pi_*(X^v) = 0, K(X^v) = X
        assert!(pi_push(&xv).components().amax() < 1e-15);
        assert!((connection_map(&xv).unwrap().components() - x.components()).amax() < 1e-12);
    }

    #[test]
    fn flat_lifts_are_layers() {
        let chart = flat3();
        let at = bp(&chart, vec![0.1, 0.2, 0.3], vec![1.0, 0.0, -1.0]);
        let x = chart.tangent(at.base(), vec![0.5, -0.5, 2.0]).unwrap();
        let xh = horizontal_lift(&x, &at).unwrap();
        assert!(xh.fiber().amax() < 1e-15);
        let a = SecondTangent::new(at.clone(), DVector::from_vec(vec![1.0, 2.0, 3.0]), DVector::from_vec(vec![4.0, 5.0, 6.0]));
        assert_eq!(pi_push(&a).components()[1], 2.0);
        assert_eq!(connection_map(&a).unwrap().components()[2], 6.0);
    }

    #[test]
    fn decompose_reassembles() {
        let chart = sphere();
        let at = bp(&chart, vec![0.9, -0.4], vec![0.3, 0.8]);
        let a = SecondTangent::new(at.clone(), DVector::from_vec(vec![0.2, -1.0]), DVector::from_vec(vec![0.7, 0.4]));
        let (h, v) = decompose(&a).unwrap();
        let back = h.add(&v);
        assert!((back.base() - a.base()).amax() < 1e-12);
        assert!((back.fiber() - a.fiber()).amax() < 1e-12);
        // horizontal part has zero K, vertical part has zero projection
        assert!(connection_map(&h).unwrap().components().amax() < 1e-12);
        assert!(pi_push(&v).components().amax() < 1e-15);
    }

    #[test]
    fn parallel_field_velocity_is_horizontal() {
        // Transport xi along a curve on the sphere by integrating
        // xi' = -Gamma(gamma', xi); the induced-coordinate velocity
        // (gamma', xi') must then have K = 0.
        let chart = sphere();
        let theta0 = 1.0;
        let curve = |t: f64| vec![theta0 + 0.2 * t, 0.5 * t];
        let dcurve = |_t: f64| DVector::from_vec(vec![0.2, 0.5]);
        let mut xi = DVector::from_vec(vec![0.3, -0.1]);
        let mut t = 0.0;
        let h = 1e-3;
        let deriv = |t: f64, xi: &DVector<f64>| -> DVector<f64> {
            let p = chart.point(curve(t)).unwrap();
            let gamma = chart.christoffel_at(&p).unwrap();
            -gamma.contract(&dcurve(t), xi)
        };
        for _ in 0..500 {
            let k1 = deriv(t, &xi);
            let k2 = deriv(t + h / 2.0, &(&xi + &k1 * (h / 2.0)));
            let k3 = deriv(t + h / 2.0, &(&xi + &k2 * (h / 2.0)));
            let k4 = deriv(t + h, &(&xi + &k3 * h));
            xi += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
            t += h;
        }
        let p = chart.point(curve(t)).unwrap();
        let xi_t = chart.tangent(&p, xi.as_slice().to_vec()).unwrap();
        let at = BundlePoint::new(p.clone(), xi_t).unwrap();
        let velocity = SecondTangent::new(at.clone(), dcurve(t), deriv(t, &xi));
        let k = connection_map(&velocity).unwrap();
        assert!(k.components().amax() < 1e-9, "K of parallel velocity = {:?}", k.components());
    }

    #[test]
    fn omega_values() {
        let chart = flat3();
        let at0 = bp(&chart, vec![0.0, 0.0, 0.0], vec![0.0, 0.0, 0.0]);
        let p = CGParams::new(1.0, 2.0, 1.0).unwrap();
        assert_relative_eq!(omega_alpha(&p, &at0).unwrap(), 1.0);
        assert_relative_eq!(omega_q(&p, &at0).unwrap(), 1.0);
        let at1 = bp(&chart, vec![0.0, 0.0, 0.0], vec![1.0, 0.0, 0.0]);
        assert_relative_eq!(omega_alpha(&p, &at1).unwrap(), 0.5);
        let at3 = bp(&chart, vec![0.0, 0.0, 0.0], vec![1.0, 1.0, 1.0]);
        assert_relative_eq!(omega_q(&p, &at3).unwrap(), 1.0 / 7.0);
    }

    #[test]
    fn cg_inner_sasaki_at_zero_section() {
        // at xi = 0 every h_{p,q,alpha} equals the Sasaki metric
        let chart = sphere();
        let at = bp(&chart, vec![1.2, 0.5], vec![0.0, 0.0]);
        let a = SecondTangent::new(at.clone(), DVector::from_vec(vec![1.0, 0.5]), DVector::from_vec(vec![-0.3, 0.9]));
        let b = SecondTangent::new(at.clone(), DVector::from_vec(vec![0.4, -0.2]), DVector::from_vec(vec![0.8, 0.1]));
        let sasaki = cg_inner(&CGParams::sasaki(), &a, &b).unwrap();
        for (p, q, alpha) in [(1.0, 1.0, 1.0), (2.0, 3.0, 0.5), (0.0, 2.0, 2.0)] {
            let params = CGParams::new(p, q, alpha).unwrap();
            assert_relative_eq!(cg_inner(&params, &a, &b).unwrap(), sasaki, epsilon = 1e-13);
        }
    }

    #[test]
    fn cg_inner_p_zero_q_zero_is_sasaki_everywhere() {
        let chart = sphere();
        let at = bp(&chart, vec![1.2, 0.5], vec![0.7, -0.4]);
        let a = SecondTangent::new(at.clone(), DVector::from_vec(vec![1.0, 0.5]), DVector::from_vec(vec![-0.3, 0.9]));
        let b = SecondTangent::new(at.clone(), DVector::from_vec(vec![0.4, -0.2]), DVector::from_vec(vec![0.8, 0.1]));
        let sasaki = cg_inner(&CGParams::sasaki(), &a, &b).unwrap();
        let p0 = CGParams::new(0.0, 0.0, 5.0).unwrap();
        assert_relative_eq!(cg_inner(&p0, &a, &b).unwrap(), sasaki, epsilon = 1e-13);
    }

    #[test]
    fn cg_inner_hand_value() {
        // flat R^2, params (1,1,1), xi=(1,0), A=B=(1,0)^v:
        // omega = 1/2, h = omega * (1 + 1*1*1) = 1
        let chart = Chart::flat(2, 2.0, 1.0);
        let at = bp(&chart, vec![0.0, 0.0], vec![1.0, 0.0]);
        let x = chart.tangent(at.base(), vec![1.0, 0.0]).unwrap();
        let a = vertical_lift(&x, &at).unwrap();
        let params = CGParams::cheeger_gromoll();
        assert_relative_eq!(cg_inner(&params, &a, &a).unwrap(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn horizontal_vertical_orthogonal_and_base_isometric() {
        let chart = sphere();
        let at = bp(&chart, vec![0.8, 1.0], vec![0.5, 0.6]);
        let x = chart.tangent(at.base(), vec![0.3, -0.9]).unwrap();
        let y = chart.tangent(at.base(), vec![1.1, 0.2]).unwrap();
        let params = CGParams::new(2.0, 3.0, 0.5).unwrap();
        let xh = horizontal_lift(&x, &at).unwrap();
        let yh = horizontal_lift(&y, &at).unwrap();
        let yv = vertical_lift(&y, &at).unwrap();
        // h on horizontal lifts is g
        assert_relative_eq!(
            cg_inner(&params, &xh, &yh).unwrap(),
            chart.inner(&x, &y).unwrap(),
            epsilon = 1e-12
        );
        // horizontal and vertical lifts are h-orthogonal
        assert!(cg_inner(&params, &xh, &yv).unwrap().abs() < 1e-12);
    }

    #[test]
    fn connection_flat_cases() {
        let chart = flat3();
        let at = bp(&chart, vec![0.2, -0.1, 0.4], vec![0.9, 0.0, -0.5]);
        let x = chart.tangent(at.base(), vec![1.0, 2.0, 0.0]).unwrap();
        let yf = VectorField::constant(chart.clone(), vec![0.0, 1.0, 1.0]);
        // flat base: hh reduces to (nabla_X Y)^h = 0 for constant Y
        let hh = cg_connection(&CGParams::cheeger_gromoll(), ConnLiftCase::HorizHoriz, &x, &yf, &at).unwrap();
        assert!(hh.base().amax() < 1e-14 && hh.fiber().amax() < 1e-14);
        // Sasaki(p=q=0): vv vanishes because every term carries alpha*p or q
        let sas = CGParams::sasaki();
        let vv = cg_connection(&sas, ConnLiftCase::VertVert, &x, &yf, &at).unwrap();
        assert!(vv.base().amax() < 1e-14 && vv.fiber().amax() < 1e-14);
        // any params at xi = 0: vv vanishes since all terms carry <., xi> or xi^v
        let at0 = bp(&chart, vec![0.2, -0.1, 0.4], vec![0.0, 0.0, 0.0]);
        let params = CGParams::cheeger_gromoll();
        let vv0 = cg_connection(&params, ConnLiftCase::VertVert, &x, &yf, &at0).unwrap();
        assert!(vv0.base().amax() < 1e-14 && vv0.fiber().amax() < 1e-14);
    }

    #[test]
    fn vv_is_purely_vertical() {
        let chart = sphere();
        let at = bp(&chart, vec![1.1, 0.2], vec![0.6, -0.3]);
        let x = chart.tangent(at.base(), vec![0.5, 0.7]).unwrap();
        let yf = VectorField::constant(chart.clone(), vec![-0.2, 0.9]);
        let params = CGParams::new(1.5, 2.0, 0.7).unwrap();
        let vv = cg_connection(&params, ConnLiftCase::VertVert, &x, &yf, &at).unwrap();
        assert!(pi_push(&vv).components().amax() < 1e-14);
    }

    #[test]
    fn cg_inner_symmetric_positive_definite_over_parameter_grid() {
        // all catalog charts, 200 seeded bundle points each, parameters from
        // {0,1,2} x {0,1,3} x {0.5,1,2}
        let charts: Vec<Chart> = crate::catalog::chart_entries()
            .iter()
            .map(|e| crate::catalog::build_chart(e.id, &crate::catalog::Params::new()).unwrap())
            .collect();
        let grid: Vec<CGParams> = [0.0, 1.0, 2.0]
            .iter()
            .flat_map(|&p| {
                [0.0, 1.0, 3.0].iter().flat_map(move |&q| {
                    [0.5, 1.0, 2.0].iter().map(move |&a| CGParams::new(p, q, a).unwrap())
                })
            })
            .collect();
        for chart in &charts {
            let points =
                crate::sample::sample_bundle_points(chart, 200, 1234, &[0.0, 0.5, 1.0, 2.0])
                    .unwrap();
            let mut rng = crate::sample::rng_from_seed(4321);
            let m = chart.dim();
            for at in &points {
                let g = chart.metric_at(&at.x).unwrap();
                let gamma = chart.christoffel_at(&at.x).unwrap();
                let rand_vec = |rng: &mut rand_chacha::ChaCha8Rng| {
                    DVector::from_fn(m, |_, _| rng.random_range(-1.0..1.0))
                };
                let (ab, af) = (rand_vec(&mut rng), rand_vec(&mut rng));
                let (bb, bf) = (rand_vec(&mut rng), rand_vec(&mut rng));
                for params in &grid {
                    let hab =
                        cg_inner_with(params, &g, &gamma, at.xi.components(), &ab, &af, &bb, &bf);
                    let hba =
                        cg_inner_with(params, &g, &gamma, at.xi.components(), &bb, &bf, &ab, &af);
                    assert!((hab - hba).abs() <= 1e-12 * (1.0 + hab.abs()));
                    let haa =
                        cg_inner_with(params, &g, &gamma, at.xi.components(), &ab, &af, &ab, &af);
                    assert!(haa > 0.0, "h(A,A) = {haa} for params {params:?}");
                }
            }
        }
    }

    #[test]
    fn levi_civita_flat_sasaki() {
        let report = verify_levi_civita(&CGParams::sasaki(), &flat3(), 5, 42).unwrap();
        assert!(report.max_torsion < 1e-10, "torsion {}", report.max_torsion);
        assert!(report.max_compatibility < 1e-10, "compat {}", report.max_compatibility);
    }

    #[test]
    fn levi_civita_flat_cheeger_gromoll() {
        let report = verify_levi_civita(&CGParams::cheeger_gromoll(), &flat3(), 5, 43).unwrap();
        assert!(report.max_torsion < 1e-6, "torsion {}", report.max_torsion);
        assert!(report.max_compatibility < 1e-6, "compat {}", report.max_compatibility);
    }

    #[test]
    fn levi_civita_sphere() {
        let params = CGParams::new(2.0, 3.0, 0.5).unwrap();
        let report = verify_levi_civita(&params, &sphere(), 5, 44).unwrap();
        assert!(report.max_torsion < 1e-5, "torsion {}", report.max_torsion);
        assert!(report.max_compatibility < 1e-5, "compat {}", report.max_compatibility);
    }
}
