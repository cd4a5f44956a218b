//! Single-chart Riemannian manifolds with jet-evaluable metrics.
//!
//! A [`Chart`] is one coordinate patch: a box domain, a dimension and a metric
//! component function that accepts [`Jet`] coordinates. Everything downstream
//! (Christoffel symbols, curvature, covariant derivatives) is produced by jet
//! arithmetic on the metric; central finite differences exist separately in
//! [`crate::fd`] as an independent cross-check.
//!
//! Charts are immutable and cheaply cloneable; identity is by allocation, so
//! two charts with equal data are still distinct patches.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{GeomError, Result};
use crate::jet::{seed_coords, Jet};

type MetricFn = dyn Fn(&[Jet]) -> Vec<Vec<Jet>> + Send + Sync;
type FieldFn = dyn Fn(&[Jet]) -> Vec<Jet> + Send + Sync;

struct ChartInner {
    name: String,
    dim: usize,
    domain: Vec<(f64, f64)>,
    metric: Box<MetricFn>,
}

/// A single coordinate patch with a Riemannian metric.
#[derive(Clone)]
pub struct Chart(Arc<ChartInner>);

impl std::fmt::Debug for Chart {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Chart")
            .field("name", &self.0.name)
            .field("dim", &self.0.dim)
            .field("domain", &self.0.domain)
            .finish()
    }
}

impl Chart {
    /// Create a chart over the open box `domain`; `metric` returns the
    /// `dim x dim` matrix of metric components at jet coordinates.
    pub fn new<F>(name: impl Into<String>, domain: Vec<(f64, f64)>, metric: F) -> Chart
    where
        F: Fn(&[Jet]) -> Vec<Vec<Jet>> + Send + Sync + 'static,
    {
        let dim = domain.len();
        assert!(dim > 0, "chart dimension must be positive");
        for (lo, hi) in &domain {
            assert!(lo < hi, "empty domain interval [{lo}, {hi}]");
        }
        Chart(Arc::new(ChartInner { name: name.into(), dim, domain, metric: Box::new(metric) }))
    }

    /// Euclidean chart of the given dimension with metric `factor * I`.
    pub fn flat(dim: usize, extent: f64, factor: f64) -> Chart {
        let name = if (factor - 1.0).abs() < 1e-15 {
            format!("flat_{dim}")
        } else {
            format!("flat_{dim}_scaled")
        };
        Chart::new(name, vec![(-extent, extent); dim], move |x| {
            let mut rows = vec![vec![Jet::constant_in(x[0].space(), 0.0); x.len()]; x.len()];
            for (i, row) in rows.iter_mut().enumerate() {
                row[i] = Jet::constant_in(x[0].space(), factor);
            }
            rows
        })
    }

    pub fn name(&self) -> &str {
        &self.0.name
    }

    pub fn dim(&self) -> usize {
        self.0.dim
    }

    pub fn domain(&self) -> &[(f64, f64)] {
        &self.0.domain
    }

    /// Same patch (pointer identity, not structural equality).
    pub fn same_chart(&self, other: &Chart) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }

    pub fn contains(&self, coords: &[f64]) -> bool {
        coords.len() == self.0.dim
            && coords
                .iter()
                .zip(&self.0.domain)
                .all(|(c, (lo, hi))| c.is_finite() && *lo < *c && *c < *hi)
    }

    /// Validated point of this chart.
    pub fn point(&self, coords: Vec<f64>) -> Result<Point> {
        if !self.contains(&coords) {
            return Err(GeomError::OutsideDomain { chart: self.0.name.clone(), coords });
        }
        Ok(Point { chart: self.clone(), coords: DVector::from_vec(coords) })
    }

    /// Tangent vector at a validated point.
    pub fn tangent(&self, at: &Point, components: Vec<f64>) -> Result<Tangent> {
        self.check_owns(at)?;
        if components.len() != self.0.dim {
            return Err(GeomError::DimensionMismatch { expected: self.0.dim, got: components.len() });
        }
        Ok(Tangent { base: at.clone(), components: DVector::from_vec(components) })
    }

    fn check_owns(&self, p: &Point) -> Result<()> {
        if !self.same_chart(&p.chart) {
            return Err(GeomError::ChartMismatch {
                expected: self.0.name.clone(),
                got: p.chart.0.name.clone(),
            });
        }
        Ok(())
    }

    /// Raw metric components on jet coordinates.
    pub fn metric_jets(&self, seeds: &[Jet]) -> Vec<Vec<Jet>> {
        let g = (self.0.metric)(seeds);
        debug_assert_eq!(g.len(), self.0.dim);
        g
    }

    /// Metric matrix at a point, validated symmetric and positive definite.
    pub fn metric_at(&self, x: &Point) -> Result<DMatrix<f64>> {
        self.check_owns(x)?;
        let seeds = seed_coords(x.coords.as_slice(), 0);
        let jets = self.metric_jets(&seeds);
        let m = self.0.dim;
        let g = DMatrix::from_fn(m, m, |i, j| jets[i][j].value());
        let scale = g.amax().max(1.0);
        let defect = (&g - g.transpose()).amax();
        if defect > 1e-12 * scale {
            return Err(GeomError::AsymmetricMetric {
                chart: self.0.name.clone(),
                coords: x.coords_vec(),
                defect,
            });
        }
        let min_eig = g
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        if min_eig <= 1e-10 {
            return Err(GeomError::NotPositiveDefinite {
                chart: self.0.name.clone(),
                coords: x.coords_vec(),
                min_eig,
            });
        }
        Ok(g)
    }

    pub fn inverse_metric_at(&self, x: &Point) -> Result<DMatrix<f64>> {
        let g = self.metric_at(x)?;
        g.clone().try_inverse().ok_or_else(|| GeomError::SingularMetric {
            chart: self.0.name.clone(),
            coords: x.coords_vec(),
        })
    }

    /// Inner product of two tangents based at the same point of this chart.
    pub fn inner(&self, x: &Tangent, y: &Tangent) -> Result<f64> {
        x.check_same_base(y)?;
        let g = self.metric_at(&x.base)?;
        Ok((x.components.transpose() * g * &y.components)[(0, 0)])
    }

    pub fn norm(&self, x: &Tangent) -> Result<f64> {
        Ok(self.inner(x, x)?.max(0.0).sqrt())
    }

    /// Christoffel symbols `Gamma^k_{ij}` at a point.
    pub fn christoffel_at(&self, x: &Point) -> Result<Christoffel> {
        self.check_owns(x)?;
        let seeds = seed_coords(x.coords.as_slice(), 1);
        let jets = self.christoffel_jets(&seeds)?;
        let m = self.0.dim;
        let vals = jets.vals.iter().map(Jet::value).collect();
        let _ = x;
        Ok(Christoffel { dim: m, vals })
    }

    /// Christoffel symbols as jets. Seeds must follow the convention
    /// "chart coordinate `i` is seeded as jet variable `i`" so that partial
    /// extraction matches coordinate derivatives; the seed space may have
    /// extra variables (used for differentiation along the tangent bundle).
    pub fn christoffel_jets(&self, seeds: &[Jet]) -> Result<ChristoffelJets> {
        let m = self.0.dim;
        assert_eq!(seeds.len(), m, "need one seed jet per coordinate");
        debug_assert!(
            (0..m).all(|i| (seeds[i].d1(i) - 1.0).abs() < 1e-14),
            "christoffel_jets requires coordinate i seeded as jet variable i"
        );
        let g = self.metric_jets(seeds);
        let ginv = invert_jet_matrix(&g).ok_or_else(|| GeomError::SingularMetric {
            chart: self.0.name.clone(),
            coords: seeds.iter().map(Jet::value).collect(),
        })?;
        // dg[l][i][j] = d_l g_{ij}
        let dg: Vec<Vec<Vec<Jet>>> = (0..m)
            .map(|l| (0..m).map(|i| (0..m).map(|j| g[i][j].partial(l)).collect()).collect())
            .collect();
        let order = dg[0][0][0].order();
        let mut vals = Vec::with_capacity(m * m * m);
        for k in 0..m {
            for i in 0..m {
                for j in 0..m {
                    let mut sum = Jet::constant_in(seeds[0].space(), 0.0);
                    for l in 0..m {
                        let term = &dg[i][j][l] + &dg[j][i][l] - &dg[l][i][j];
                        sum = &sum + &(&ginv[k][l] * &term);
                    }
                    vals.push(&sum * 0.5);
                }
            }
        }
        Ok(ChristoffelJets { dim: m, order, vals })
    }

    /// Curvature tensor at a point, sign fixed so the unit sphere satisfies
    /// `<R(X,Y)Y, X> = |X|^2 |Y|^2 - <X,Y>^2`.
    pub fn riemann_at(&self, x: &Point) -> Result<RiemannTensor> {
        self.check_owns(x)?;
        let seeds = seed_coords(x.coords.as_slice(), 2);
        let gamma = self.christoffel_jets(&seeds)?;
        let m = self.0.dim;
        // R^l_{kij} = d_i Gamma^l_{jk} - d_j Gamma^l_{ik}
        //           + Gamma^l_{im} Gamma^m_{jk} - Gamma^l_{jm} Gamma^m_{ik}
        let mut vals = vec![0.0; m * m * m * m];
        for l in 0..m {
            for k in 0..m {
                for i in 0..m {
                    for j in 0..m {
                        let mut r = gamma.get(l, j, k).d1(i) - gamma.get(l, i, k).d1(j);
                        for mm in 0..m {
                            r += gamma.get(l, i, mm).value() * gamma.get(mm, j, k).value()
                                - gamma.get(l, j, mm).value() * gamma.get(mm, i, k).value();
                        }
                        vals[((l * m + k) * m + i) * m + j] = r;
                    }
                }
            }
        }
        Ok(RiemannTensor { dim: m, vals })
    }

    /// `R(X, Y) Z` at the common base point of the three tangents.
    pub fn riemann(&self, x: &Point, xv: &Tangent, yv: &Tangent, zv: &Tangent) -> Result<Tangent> {
        xv.check_same_base(yv)?;
        yv.check_same_base(zv)?;
        let tensor = self.riemann_at(x)?;
        Ok(Tangent { base: x.clone(), components: tensor.apply(&xv.components, &yv.components, &zv.components) })
    }

    /// Seed jets for this chart's coordinates at `x`.
    pub fn seeds(&self, x: &Point, order: usize) -> Vec<Jet> {
        seed_coords(x.coords.as_slice(), order)
    }
}

/// A point of one chart.
#[derive(Clone, Debug)]
pub struct Point {
    chart: Chart,
    coords: DVector<f64>,
}

impl Point {
    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn coords(&self) -> &DVector<f64> {
        &self.coords
    }

    pub fn coords_vec(&self) -> Vec<f64> {
        self.coords.as_slice().to_vec()
    }

    pub fn coord(&self, i: usize) -> f64 {
        self.coords[i]
    }

    pub fn same_point(&self, other: &Point, tol: f64) -> bool {
        self.chart.same_chart(&other.chart) && (&self.coords - &other.coords).amax() <= tol
    }
}

/// A tangent vector with its base point.
#[derive(Clone, Debug)]
pub struct Tangent {
    base: Point,
    components: DVector<f64>,
}

impl Tangent {
    pub fn new(base: Point, components: DVector<f64>) -> Tangent {
        assert_eq!(base.chart.dim(), components.len());
        Tangent { base, components }
    }

    pub fn zero(base: Point) -> Tangent {
        let dim = base.chart.dim();
        Tangent { base, components: DVector::zeros(dim) }
    }

    pub fn base(&self) -> &Point {
        &self.base
    }

    pub fn components(&self) -> &DVector<f64> {
        &self.components
    }

    pub fn component(&self, i: usize) -> f64 {
        self.components[i]
    }

    pub fn scale(&self, s: f64) -> Tangent {
        Tangent { base: self.base.clone(), components: &self.components * s }
    }

    pub fn add(&self, other: &Tangent) -> Result<Tangent> {
        self.check_same_base(other)?;
        Ok(Tangent { base: self.base.clone(), components: &self.components + &other.components })
    }

    pub fn sub(&self, other: &Tangent) -> Result<Tangent> {
        self.check_same_base(other)?;
        Ok(Tangent { base: self.base.clone(), components: &self.components - &other.components })
    }

    fn check_same_base(&self, other: &Tangent) -> Result<()> {
        if !self.base.same_point(&other.base, 1e-12) {
            return Err(GeomError::BasePointMismatch {
                a: self.base.coords_vec(),
                b: other.base.coords_vec(),
            });
        }
        Ok(())
    }
}

/// A smooth vector field on a chart, jet-evaluable componentwise.
#[derive(Clone)]
pub struct VectorField {
    chart: Chart,
    f: Arc<FieldFn>,
}

impl VectorField {
    pub fn from_fn<F>(chart: Chart, f: F) -> VectorField
    where
        F: Fn(&[Jet]) -> Vec<Jet> + Send + Sync + 'static,
    {
        VectorField { chart, f: Arc::new(f) }
    }

    /// Field with constant coordinate components.
    pub fn constant(chart: Chart, components: Vec<f64>) -> VectorField {
        assert_eq!(chart.dim(), components.len());
        VectorField::from_fn(chart, move |x| {
            components.iter().map(|&c| Jet::constant_in(x[0].space(), c)).collect()
        })
    }

    /// The coordinate field `d/dx^i`.
    pub fn coordinate(chart: Chart, i: usize) -> VectorField {
        let dim = chart.dim();
        assert!(i < dim);
        VectorField::from_fn(chart, move |x| {
            (0..dim)
                .map(|k| Jet::constant_in(x[0].space(), if k == i { 1.0 } else { 0.0 }))
                .collect()
        })
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn eval_jets(&self, seeds: &[Jet]) -> Vec<Jet> {
        (self.f)(seeds)
    }

    /// Plain evaluation; the value part of the jets. Seeds order 1 so that
    /// fields which internally consume a derivative order still evaluate.
    pub fn eval(&self, x: &Point) -> Result<Tangent> {
        self.chart.check_owns(x)?;
        let seeds = seed_coords(x.coords.as_slice(), 1);
        let comps = self.eval_jets(&seeds);
        Ok(Tangent {
            base: x.clone(),
            components: DVector::from_iterator(self.chart.dim(), comps.iter().map(Jet::value)),
        })
    }
}

/// Christoffel symbol values `Gamma^k_{ij}` at one point.
#[derive(Clone, Debug)]
pub struct Christoffel {
    dim: usize,
    vals: Vec<f64>,
}

impl Christoffel {
    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        self.vals[(k * self.dim + i) * self.dim + j]
    }

    /// `Gamma(a, b)^k = Gamma^k_{ij} a^i b^j`.
    pub fn contract(&self, a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
        let m = self.dim;
        DVector::from_fn(m, |k, _| {
            let mut s = 0.0;
            for i in 0..m {
                for j in 0..m {
                    s += self.get(k, i, j) * a[i] * b[j];
                }
            }
            s
        })
    }
}

/// Christoffel symbols as jets (values plus derivatives).
pub struct ChristoffelJets {
    dim: usize,
    order: usize,
    vals: Vec<Jet>,
}

impl ChristoffelJets {
    pub fn get(&self, k: usize, i: usize, j: usize) -> &Jet {
        &self.vals[(k * self.dim + i) * self.dim + j]
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn values(&self) -> Christoffel {
        Christoffel { dim: self.dim, vals: self.vals.iter().map(Jet::value).collect() }
    }
}

/// Curvature tensor components `R^l_{kij}` at one point.
pub struct RiemannTensor {
    dim: usize,
    vals: Vec<f64>,
}

impl RiemannTensor {
    pub fn get(&self, l: usize, k: usize, i: usize, j: usize) -> f64 {
        self.vals[((l * self.dim + k) * self.dim + i) * self.dim + j]
    }

    /// `R(X,Y)Z` componentwise.
    pub fn apply(&self, x: &DVector<f64>, y: &DVector<f64>, z: &DVector<f64>) -> DVector<f64> {
        let m = self.dim;
        DVector::from_fn(m, |l, _| {
            let mut s = 0.0;
            for k in 0..m {
                for i in 0..m {
                    for j in 0..m {
                        s += self.get(l, k, i, j) * x[i] * y[j] * z[k];
                    }
                }
            }
            s
        })
    }
}

/// Invert a square matrix of jets by Gauss-Jordan elimination, pivoting on the
/// value part. Returns `None` when a pivot value vanishes.
pub fn invert_jet_matrix(m: &[Vec<Jet>]) -> Option<Vec<Vec<Jet>>> {
    let n = m.len();
    let space = m[0][0].space().clone();
    let mut a: Vec<Vec<Jet>> = m.to_vec();
    let mut inv: Vec<Vec<Jet>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| Jet::constant_in(&space, if i == j { 1.0 } else { 0.0 }))
                .collect()
        })
        .collect();
    for col in 0..n {
        let pivot_row = (col..n).max_by(|&r1, &r2| {
            a[r1][col].value().abs().partial_cmp(&a[r2][col].value().abs()).unwrap()
        })?;
        if a[pivot_row][col].value().abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot_row);
        inv.swap(col, pivot_row);
        let pivot_inv = a[col][col].recip();
        for j in 0..n {
            a[col][j] = &a[col][j] * &pivot_inv;
            inv[col][j] = &inv[col][j] * &pivot_inv;
        }
        for row in 0..n {
            if row == col {
                continue;
            }
            let factor = a[row][col].clone();
            for j in 0..n {
                a[row][j] = &a[row][j] - &(&factor * &a[col][j]);
                inv[row][j] = &inv[row][j] - &(&factor * &inv[col][j]);
            }
        }
    }
    Some(inv)
}

/// Lie bracket `[X, Y]` of two fields at a point.
pub fn lie_bracket(x: &VectorField, y: &VectorField, at: &Point) -> Result<Tangent> {
    if !x.chart.same_chart(&y.chart) {
        return Err(GeomError::ChartMismatch {
            expected: x.chart.name().to_string(),
            got: y.chart.name().to_string(),
        });
    }
    x.chart.check_owns(at)?;
    let m = x.chart.dim();
    // order 2 leaves headroom for fields that internally consume one
    // derivative order (metric projectors, basic lifts)
    let seeds = seed_coords(at.coords.as_slice(), 2);
    let xc = x.eval_jets(&seeds);
    let yc = y.eval_jets(&seeds);
    let comps = DVector::from_fn(m, |k, _| {
        let mut s = 0.0;
        for j in 0..m {
            s += xc[j].value() * yc[k].d1(j) - yc[j].value() * xc[k].d1(j);
        }
        s
    });
    Ok(Tangent { base: at.clone(), components: comps })
}

/// Levi-Civita covariant derivative `(nabla_X Y)` at the base point of `X`.
pub fn covariant_derivative(x: &Tangent, y: &VectorField) -> Result<Tangent> {
    let chart = &x.base.chart;
    if !chart.same_chart(&y.chart) {
        return Err(GeomError::ChartMismatch {
            expected: chart.name().to_string(),
            got: y.chart.name().to_string(),
        });
    }
    let m = chart.dim();
    let seeds = seed_coords(x.base.coords.as_slice(), 2);
    let yc = y.eval_jets(&seeds);
    let gamma = chart.christoffel_at(&x.base)?;
    let yv = DVector::from_iterator(m, yc.iter().map(Jet::value));
    let mut comps = gamma.contract(&x.components, &yv);
    for k in 0..m {
        for i in 0..m {
            comps[k] += x.components[i] * yc[k].d1(i);
        }
    }
    Ok(Tangent { base: x.base.clone(), components: comps })
}

/// Gram-Schmidt in the chart metric, processed in input order.
///
/// Fails with a degeneracy error when the input is not linearly independent
/// (residual norm below `1e-10` of the running scale).
pub fn orthonormalize(frame: &[Tangent]) -> Result<Vec<Tangent>> {
    assert!(!frame.is_empty(), "cannot orthonormalize an empty frame");
    let base = frame[0].base.clone();
    let chart = base.chart.clone();
    let g = chart.metric_at(&base)?;
    let mut out: Vec<Tangent> = Vec::with_capacity(frame.len());
    for (index, v) in frame.iter().enumerate() {
        frame[0].check_same_base(v)?;
        let mut w = v.components.clone();
        for u in &out {
            let proj = (u.components.transpose() * &g * &w)[(0, 0)];
            w -= &u.components * proj;
        }
        let norm2 = (w.transpose() * &g * &w)[(0, 0)];
        let scale = (v.components.transpose() * &g * &v.components)[(0, 0)].max(1.0);
        if norm2 <= 1e-20 * scale {
            return Err(GeomError::DegenerateFrame { index, residual: norm2.max(0.0).sqrt() });
        }
        out.push(Tangent { base: base.clone(), components: w / norm2.sqrt() });
    }
    Ok(out)
}

/// Complete the (possibly empty) `start` frame to a full g-orthonormal basis,
/// appending coordinate directions in ascending index order and skipping the
/// ones that are linearly dependent on what is already there.
pub fn complete_frame(start: &[Tangent], at: &Point) -> Result<Vec<Tangent>> {
    let chart = at.chart().clone();
    let m = chart.dim();
    let g = chart.metric_at(at)?;
    let mut out: Vec<Tangent> = Vec::with_capacity(m);
    let push = |v: DVector<f64>, out: &mut Vec<Tangent>, must: bool| -> Result<bool> {
        let mut w = v.clone();
        for u in out.iter() {
            let proj = (u.components.transpose() * &g * &w)[(0, 0)];
            w -= &u.components * proj;
        }
        let norm2 = (w.transpose() * &g * &w)[(0, 0)];
        let scale = (v.transpose() * &g * &v)[(0, 0)].max(1.0);
        if norm2 <= 1e-20 * scale {
            if must {
                return Err(GeomError::DegenerateFrame { index: out.len(), residual: norm2.max(0.0).sqrt() });
            }
            return Ok(false);
        }
        out.push(Tangent { base: at.clone(), components: w / norm2.sqrt() });
        Ok(true)
    };
    for v in start {
        push(v.components.clone(), &mut out, true)?;
    }
    for i in 0..m {
        if out.len() == m {
            break;
        }
        let mut e = DVector::zeros(m);
        e[i] = 1.0;
        push(e, &mut out, false)?;
    }
    if out.len() != m {
        return Err(GeomError::DegenerateFrame { index: out.len(), residual: 0.0 });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    pub(crate) fn sphere_chart() -> Chart {
        Chart::new("sphere", vec![(0.1, std::f64::consts::PI - 0.1), (-3.0, 3.0)], |x| {
            let zero = Jet::constant_in(x[0].space(), 0.0);
            let one = Jet::constant_in(x[0].space(), 1.0);
            let s = x[0].sin();
            vec![vec![one, zero.clone()], vec![zero, &s * &s]]
        })
    }

    fn conformal_chart() -> Chart {
        // e^{2x} (dx^2 + dy^2)
        Chart::new("conformal", vec![(-1.0, 1.0), (-1.0, 1.0)], |x| {
            let zero = Jet::constant_in(x[0].space(), 0.0);
            let f = (&x[0] * 2.0).exp();
            vec![vec![f.clone(), zero.clone()], vec![zero, f]]
        })
    }

    #[test]
    fn flat_metric_is_identity() {
        let chart = Chart::flat(2, 2.0, 1.0);
        let p = chart.point(vec![0.3, -0.7]).unwrap();
        let g = chart.metric_at(&p).unwrap();
        assert_relative_eq!(g[(0, 0)], 1.0);
        assert_relative_eq!(g[(1, 1)], 1.0);
        assert_relative_eq!(g[(0, 1)], 0.0);
    }

    #[test]
    fn sphere_metric_at_equator() {
        let chart = sphere_chart();
        let p = chart.point(vec![std::f64::consts::FRAC_PI_2, 0.0]).unwrap();
        let g = chart.metric_at(&p).unwrap();
        assert_relative_eq!(g[(0, 0)], 1.0, epsilon = 1e-14);
        assert_relative_eq!(g[(1, 1)], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn scaled_flat_metric() {
        let chart = Chart::flat(2, 2.0, 2.0);
        let p = chart.point(vec![0.0, 0.0]).unwrap();
        let g = chart.metric_at(&p).unwrap();
        assert_relative_eq!(g[(0, 0)], 2.0);
        assert_relative_eq!(g[(1, 1)], 2.0);
    }

    #[test]
    fn point_outside_domain_rejected() {
        let chart = Chart::flat(2, 1.0, 1.0);
        assert!(matches!(chart.point(vec![1.5, 0.0]), Err(GeomError::OutsideDomain { .. })));
    }

    #[test]
    fn flat_christoffel_vanishes() {
        let chart = Chart::flat(3, 2.0, 1.0);
        let p = chart.point(vec![0.1, 0.2, -0.4]).unwrap();
        let gamma = chart.christoffel_at(&p).unwrap();
        for k in 0..3 {
            for i in 0..3 {
                for j in 0..3 {
                    assert_eq!(gamma.get(k, i, j), 0.0);
                }
            }
        }
    }

    #[test]
    fn sphere_christoffel_closed_form() {
        // g = d theta^2 + sin^2 theta d phi^2:
        // Gamma^theta_{phi phi} = -sin cos, Gamma^phi_{theta phi} = cot
        let chart = sphere_chart();
        let theta = std::f64::consts::FRAC_PI_4;
        let p = chart.point(vec![theta, 0.0]).unwrap();
        let gamma = chart.christoffel_at(&p).unwrap();
        assert_relative_eq!(gamma.get(0, 1, 1), -0.5, epsilon = 1e-12);
        assert_relative_eq!(gamma.get(1, 0, 1), 1.0, epsilon = 1e-12);
        assert_relative_eq!(gamma.get(1, 1, 0), 1.0, epsilon = 1e-12);
        assert_relative_eq!(gamma.get(0, 0, 0), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn conformal_christoffel_closed_form() {
        // e^{2x}(dx^2+dy^2): Gamma^x_xx = 1, Gamma^x_yy = -1, Gamma^y_xy = 1
        let chart = conformal_chart();
        let p = chart.point(vec![0.3, -0.2]).unwrap();
        let gamma = chart.christoffel_at(&p).unwrap();
        assert_relative_eq!(gamma.get(0, 0, 0), 1.0, epsilon = 1e-12);
        assert_relative_eq!(gamma.get(0, 1, 1), -1.0, epsilon = 1e-12);
        assert_relative_eq!(gamma.get(1, 0, 1), 1.0, epsilon = 1e-12);
        assert_relative_eq!(gamma.get(1, 1, 1), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn christoffel_symmetric_in_lower_indices() {
        let chart = sphere_chart();
        let p = chart.point(vec![1.1, 0.4]).unwrap();
        let gamma = chart.christoffel_at(&p).unwrap();
        for k in 0..2 {
            for i in 0..2 {
                for j in 0..2 {
                    assert_relative_eq!(gamma.get(k, i, j), gamma.get(k, j, i), epsilon = 1e-13);
                }
            }
        }
    }

    #[test]
    fn flat_riemann_vanishes() {
        let chart = Chart::flat(2, 2.0, 1.0);
        let p = chart.point(vec![0.4, 0.9]).unwrap();
        let x = chart.tangent(&p, vec![1.0, 0.3]).unwrap();
        let y = chart.tangent(&p, vec![-0.2, 1.0]).unwrap();
        let z = chart.tangent(&p, vec![0.5, 0.5]).unwrap();
        let r = chart.riemann(&p, &x, &y, &z).unwrap();
        assert!(r.components().amax() < 1e-14);
    }

    #[test]
    fn unit_sphere_sectional_curvature_is_one() {
        let chart = sphere_chart();
        let p = chart.point(vec![std::f64::consts::FRAC_PI_4, 0.3]).unwrap();
        // orthonormal pair
        let x = chart.tangent(&p, vec![1.0, 0.0]).unwrap();
        let sin_t = p.coord(0).sin();
        let y = chart.tangent(&p, vec![0.0, 1.0 / sin_t]).unwrap();
        let r = chart.riemann(&p, &x, &y, &y).unwrap();
        let sec = chart.inner(&r, &x).unwrap();
        assert_relative_eq!(sec, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn riemann_antisymmetric_in_first_arguments() {
        let chart = sphere_chart();
        let p = chart.point(vec![0.9, -0.5]).unwrap();
        let x = chart.tangent(&p, vec![0.8, 0.1]).unwrap();
        let y = chart.tangent(&p, vec![-0.4, 1.2]).unwrap();
        let z = chart.tangent(&p, vec![0.3, 0.7]).unwrap();
        let rxy = chart.riemann(&p, &x, &y, &z).unwrap();
        let ryx = chart.riemann(&p, &y, &x, &z).unwrap();
        assert!((rxy.components() + ryx.components()).amax() < 1e-12);
    }

    #[test]
    fn first_bianchi_identity() {
        let chart = sphere_chart();
        let p = chart.point(vec![1.2, 0.8]).unwrap();
        let x = chart.tangent(&p, vec![0.6, -0.2]).unwrap();
        let y = chart.tangent(&p, vec![0.1, 0.9]).unwrap();
        let z = chart.tangent(&p, vec![-0.7, 0.4]).unwrap();
        let a = chart.riemann(&p, &x, &y, &z).unwrap();
        let b = chart.riemann(&p, &y, &z, &x).unwrap();
        let c = chart.riemann(&p, &z, &x, &y).unwrap();
        let total = a.add(&b).unwrap().add(&c).unwrap();
        assert!(total.components().amax() < 1e-9);
    }

    #[test]
    fn coordinate_fields_commute() {
        let chart = sphere_chart();
        let p = chart.point(vec![1.0, 0.2]).unwrap();
        let x = VectorField::coordinate(chart.clone(), 0);
        let y = VectorField::coordinate(chart.clone(), 1);
        let b = lie_bracket(&x, &y, &p).unwrap();
        assert!(b.components().amax() < 1e-15);
    }

    #[test]
    fn bracket_of_scaled_field() {
        // [d/dx, x d/dy] = d/dy
        let chart = Chart::flat(2, 2.0, 1.0);
        let p = chart.point(vec![0.7, -0.3]).unwrap();
        let x = VectorField::coordinate(chart.clone(), 0);
        let y = VectorField::from_fn(chart.clone(), |s| {
            vec![Jet::constant_in(s[0].space(), 0.0), s[0].clone()]
        });
        let b = lie_bracket(&x, &y, &p).unwrap();
        assert_relative_eq!(b.component(0), 0.0);
        assert_relative_eq!(b.component(1), 1.0);
    }

    #[test]
    fn heisenberg_frame_bracket() {
        // [d/dx, d/dy + x d/dz] = d/dz
        let chart = Chart::flat(3, 2.0, 1.0);
        let p = chart.point(vec![0.5, 0.1, -0.2]).unwrap();
        let x = VectorField::coordinate(chart.clone(), 0);
        let y = VectorField::from_fn(chart.clone(), |s| {
            vec![
                Jet::constant_in(s[0].space(), 0.0),
                Jet::constant_in(s[0].space(), 1.0),
                s[0].clone(),
            ]
        });
        let b = lie_bracket(&x, &y, &p).unwrap();
        assert_relative_eq!(b.component(2), 1.0);
        assert_relative_eq!(b.component(0), 0.0);
        assert_relative_eq!(b.component(1), 0.0);
    }

    #[test]
    fn bracket_chart_mismatch_rejected() {
        let c1 = Chart::flat(2, 2.0, 1.0);
        let c2 = Chart::flat(2, 2.0, 1.0);
        let p = c1.point(vec![0.0, 0.0]).unwrap();
        let x = VectorField::coordinate(c1.clone(), 0);
        let y = VectorField::coordinate(c2, 1);
        assert!(matches!(lie_bracket(&x, &y, &p), Err(GeomError::ChartMismatch { .. })));
    }

    #[test]
    fn covariant_derivative_flat_is_directional() {
        let chart = Chart::flat(2, 2.0, 1.0);
        let p = chart.point(vec![0.2, 0.4]).unwrap();
        let x = chart.tangent(&p, vec![1.0, 2.0]).unwrap();
        // Y = (x^2, xy)
        let y = VectorField::from_fn(chart.clone(), |s| {
            vec![&s[0] * &s[0], &s[0] * &s[1]]
        });
        let d = covariant_derivative(&x, &y).unwrap();
        // X(Y^0) = 2x * X^0 ; X(Y^1) = y X^0 + x X^1
        assert_relative_eq!(d.component(0), 2.0 * 0.2 * 1.0, epsilon = 1e-13);
        assert_relative_eq!(d.component(1), 0.4 * 1.0 + 0.2 * 2.0, epsilon = 1e-13);
    }

    #[test]
    fn equator_is_geodesic() {
        let chart = sphere_chart();
        let p = chart.point(vec![std::f64::consts::FRAC_PI_2, 0.3]).unwrap();
        let dphi = chart.tangent(&p, vec![0.0, 1.0]).unwrap();
        let field = VectorField::coordinate(chart.clone(), 1);
        let d = covariant_derivative(&dphi, &field).unwrap();
        assert!(d.components().amax() < 1e-13);
    }

    #[test]
    fn sphere_covariant_derivative_at_pi_4() {
        let chart = sphere_chart();
        let p = chart.point(vec![std::f64::consts::FRAC_PI_4, 0.0]).unwrap();
        let dphi = chart.tangent(&p, vec![0.0, 1.0]).unwrap();
        let field = VectorField::coordinate(chart.clone(), 1);
        let d = covariant_derivative(&dphi, &field).unwrap();
        assert_relative_eq!(d.component(0), -0.5, epsilon = 1e-12);
        assert_relative_eq!(d.component(1), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn torsion_free_on_coordinate_fields() {
        let chart = sphere_chart();
        let p = chart.point(vec![0.8, 1.1]).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let xi = chart.tangent(&p, {
                    let mut v = vec![0.0; 2];
                    v[i] = 1.0;
                    v
                }).unwrap();
                let xj_field = VectorField::coordinate(chart.clone(), j);
                let xj = chart.tangent(&p, {
                    let mut v = vec![0.0; 2];
                    v[j] = 1.0;
                    v
                }).unwrap();
                let xi_field = VectorField::coordinate(chart.clone(), i);
                let dij = covariant_derivative(&xi, &xj_field).unwrap();
                let dji = covariant_derivative(&xj, &xi_field).unwrap();
                assert!(dij.sub(&dji).unwrap().components().amax() < 1e-10);
            }
        }
    }

    #[test]
    fn metric_compatibility() {
        // X <Y,Z> = <nabla_X Y, Z> + <Y, nabla_X Z> for jet-evaluable fields
        let chart = sphere_chart();
        let p = chart.point(vec![1.05, -0.4]).unwrap();
        let xv = chart.tangent(&p, vec![0.7, -0.3]).unwrap();
        let y = VectorField::from_fn(chart.clone(), |s| vec![s[1].sin(), s[0].clone()]);
        let z = VectorField::from_fn(chart.clone(), |s| vec![&s[0] * &s[1], s[0].cos()]);
        // lhs by jet differentiation of the scalar <Y,Z>
        let seeds = chart.seeds(&p, 1);
        let g = chart.metric_jets(&seeds);
        let yj = y.eval_jets(&seeds);
        let zj = z.eval_jets(&seeds);
        let mut inner = Jet::constant_in(seeds[0].space(), 0.0);
        for i in 0..2 {
            for j in 0..2 {
                inner = &inner + &(&g[i][j] * &(&yj[i] * &zj[j]));
            }
        }
        let lhs: f64 = (0..2).map(|i| xv.component(i) * inner.d1(i)).sum();
        let dy = covariant_derivative(&xv, &y).unwrap();
        let dz = covariant_derivative(&xv, &z).unwrap();
        let yv = y.eval(&p).unwrap();
        let zv = z.eval(&p).unwrap();
        let rhs = chart.inner(&dy, &zv).unwrap() + chart.inner(&yv, &dz).unwrap();
        assert_relative_eq!(lhs, rhs, epsilon = 1e-8);
    }

    #[test]
    fn orthonormalize_identity_frame_unchanged() {
        let chart = Chart::flat(2, 2.0, 1.0);
        let p = chart.point(vec![0.0, 0.0]).unwrap();
        let frame = vec![
            chart.tangent(&p, vec![1.0, 0.0]).unwrap(),
            chart.tangent(&p, vec![0.0, 1.0]).unwrap(),
        ];
        let out = orthonormalize(&frame).unwrap();
        assert_relative_eq!(out[0].component(0), 1.0);
        assert_relative_eq!(out[1].component(1), 1.0);
    }

    #[test]
    fn orthonormalize_gram_schmidt() {
        let chart = Chart::flat(2, 2.0, 1.0);
        let p = chart.point(vec![0.0, 0.0]).unwrap();
        let frame = vec![
            chart.tangent(&p, vec![1.0, 0.0]).unwrap(),
            chart.tangent(&p, vec![1.0, 1.0]).unwrap(),
        ];
        let out = orthonormalize(&frame).unwrap();
        assert_relative_eq!(out[1].component(0), 0.0, epsilon = 1e-14);
        assert_relative_eq!(out[1].component(1), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn orthonormalize_scaled_metric() {
        let chart = Chart::flat(1, 2.0, 2.0);
        let p = chart.point(vec![0.0]).unwrap();
        let frame = vec![chart.tangent(&p, vec![1.0]).unwrap()];
        let out = orthonormalize(&frame).unwrap();
        assert_relative_eq!(out[0].component(0), 1.0 / 2.0_f64.sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn orthonormalize_rejects_dependent_frame() {
        let chart = Chart::flat(2, 2.0, 1.0);
        let p = chart.point(vec![0.0, 0.0]).unwrap();
        let frame = vec![
            chart.tangent(&p, vec![1.0, 1.0]).unwrap(),
            chart.tangent(&p, vec![2.0, 2.0]).unwrap(),
        ];
        assert!(matches!(orthonormalize(&frame), Err(GeomError::DegenerateFrame { .. })));
    }
}
