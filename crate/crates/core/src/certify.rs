//! Decision layer: pointwise conformality verdicts for the lifted map,
//! closed-form theorem conditions measured from the primitives, agreement
//! records between prediction and measurement, and harmonic-morphism
//! certification.
//!
//! Everything here only measures; no quantity is extrapolated from a formula
//! when it can be computed from the geometry. Where prediction and
//! measurement disagree, the disagreement is recorded, not papered over.

use serde::Serialize;

use crate::bundle::{
    self, cg_norm, connection_map, horizontal_lift, pi_push, vertical_lift, BundlePoint,
    CGParams, ConnLiftCase, SecondTangent,
};
use crate::error::Result;
use crate::geometry::{covariant_derivative, Point, Tangent};
use crate::lift::{lifted_conformality, LiftedMap};
use crate::maps::{
    self, dilatation, map_point_data, tension,
    ConformalityVerdict, MapJet,
};

/// Pointwise verdict for the lifted map on its horizontal space.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum LiftedVerdict {
    /// The base point is critical for `phi`; flagged and excluded from
    /// conformality aggregation, never counted as a failure.
    Critical,
    Conformal { lambda: f64 },
    Nonconformal { deviation: f64, lambda: f64 },
}

impl LiftedVerdict {
    pub fn is_conformal(&self) -> bool {
        matches!(self, LiftedVerdict::Conformal { .. })
    }

    pub fn lambda(&self) -> Option<f64> {
        match self {
            LiftedVerdict::Conformal { lambda } => Some(*lambda),
            _ => None,
        }
    }

    pub fn deviation(&self) -> f64 {
        match self {
            LiftedVerdict::Nonconformal { deviation, .. } => *deviation,
            _ => 0.0,
        }
    }
}

/// Gram-matrix conformality verdict for `Phi_*` at one bundle point.
pub fn hc_verdict_lifted(
    lifted: &LiftedMap,
    params_m: &CGParams,
    params_n: &CGParams,
    at: &BundlePoint,
    tol: f64,
) -> Result<LiftedVerdict> {
    let data = map_point_data(lifted.map(), at.base(), maps::RANK_TOL)?;
    if data.is_critical() {
        return Ok(LiftedVerdict::Critical);
    }
    let gram = lifted_conformality(lifted, params_m, params_n, at, maps::RANK_TOL)?;
    if gram.deviation <= tol * (1.0 + gram.capital_lambda.abs()) && gram.capital_lambda > 0.0 {
        Ok(LiftedVerdict::Conformal { lambda: gram.capital_lambda })
    } else {
        Ok(LiftedVerdict::Nonconformal { deviation: gram.deviation, lambda: gram.capital_lambda })
    }
}

/// The closed-form hypotheses (and conclusions) of the horizontal-conformality
/// theorem, each measured from the primitives with its residual retained.
#[derive(Clone, Debug, Serialize)]
pub struct TheoremConditions {
    pub totally_geodesic: bool,
    pub max_b_norm: f64,
    pub hc_constant_lambda: bool,
    pub lambda: Option<f64>,
    pub lambda_spread: f64,
    pub p_alpha_zero: bool,
    pub r_beta_zero: bool,
    pub q_equals_lambda_s: bool,
    pub q_lambda_s_defect: f64,
    pub sasaki_both: bool,
    /// conclusion observable: max integrability-tensor norm over horizontal pairs
    pub max_t_norm: f64,
    /// conclusion observable: max fiber second-fundamental-form norm
    pub max_fiber_b_norm: f64,
    pub critical_points: usize,
}

impl TheoremConditions {
    /// All hypotheses of the forward direction hold.
    pub fn predicted_conformal(&self) -> bool {
        self.totally_geodesic
            && self.hc_constant_lambda
            && self.p_alpha_zero
            && self.r_beta_zero
            && self.q_equals_lambda_s
    }
}

/// Measure every theorem condition at the given base points.
pub fn evaluate_theorem_conditions(
    phi: &MapJet,
    params_m: &CGParams,
    params_n: &CGParams,
    base_points: &[Point],
    tol: f64,
) -> Result<TheoremConditions> {
    let chart = phi.domain().clone();
    let nchart = phi.codomain().clone();
    let m = chart.dim();
    let mut max_b: f64 = 0.0;
    let mut lambdas: Vec<f64> = Vec::new();
    let mut all_conformal = true;
    let mut max_t: f64 = 0.0;
    let mut max_fiber_b: f64 = 0.0;
    let mut critical = 0usize;
    for x in base_points {
        let data = map_point_data(phi, x, maps::RANK_TOL)?;
        if data.is_critical() {
            critical += 1;
            continue;
        }
        // B over all coordinate pairs
        for i in 0..m {
            for j in i..m {
                let ei = coordinate_tangent(x, i);
                let ej = coordinate_tangent(x, j);
                let b = maps::second_fundamental_form(phi, &ei, &ej)?;
                max_b = max_b.max(nchart.norm(&b)?);
            }
        }
        match dilatation(phi, &data, tol)? {
            ConformalityVerdict::Conformal { lambda } => lambdas.push(lambda),
            _ => all_conformal = false,
        }
        // integrability over horizontal pairs
        let hb = data.horizontal_basis();
        for i in 0..hb.len() {
            for j in (i + 1)..hb.len() {
                let t = maps::integrability_tensor(phi, &hb[i], &hb[j], tol)?;
                max_t = max_t.max(chart.norm(&t)?);
            }
        }
        // fiber second fundamental form over vertical pairs:
        // horizontal part of nabla_{v_i} v~_j
        let vb = data.vertical_basis();
        if !vb.is_empty() {
            let g = chart.metric_at(x)?;
            for vi in vb {
                for vj in vb {
                    let ext = vertical_extension_field(phi, vj);
                    let d = covariant_derivative(vi, &ext)?;
                    let mut horiz = nalgebra::DVector::zeros(m);
                    for h in data.horizontal_basis() {
                        let c = (d.components().transpose() * &g * h.components())[(0, 0)];
                        horiz += h.components() * c;
                    }
                    let t = Tangent::new(x.clone(), horiz);
                    max_fiber_b = max_fiber_b.max(chart.norm(&t)?);
                }
            }
        }
    }
    let lambda_mean = if lambdas.is_empty() {
        None
    } else {
        Some(lambdas.iter().sum::<f64>() / lambdas.len() as f64)
    };
    let lambda_spread = match (lambdas.iter().cloned().reduce(f64::max), lambdas.iter().cloned().reduce(f64::min)) {
        (Some(hi), Some(lo)) => hi - lo,
        _ => 0.0,
    };
    let hc_constant_lambda = all_conformal
        && lambda_mean.is_some_and(|l| lambda_spread <= tol * (1.0 + l.abs()));
    let q_defect = match lambda_mean {
        Some(l) => (params_m.q() - l * params_n.q()).abs(),
        None => f64::INFINITY,
    };
    Ok(TheoremConditions {
        totally_geodesic: max_b <= tol,
        max_b_norm: max_b,
        hc_constant_lambda,
        lambda: lambda_mean,
        lambda_spread,
        p_alpha_zero: params_m.p_alpha_zero(),
        r_beta_zero: params_n.p_alpha_zero(),
        q_equals_lambda_s: hc_constant_lambda && q_defect <= tol * (1.0 + params_m.q()),
        q_lambda_s_defect: q_defect,
        sasaki_both: params_m.is_sasaki() && params_n.is_sasaki(),
        max_t_norm: max_t,
        max_fiber_b_norm: max_fiber_b,
        critical_points: critical,
    })
}

fn coordinate_tangent(x: &Point, i: usize) -> Tangent {
    let m = x.chart().dim();
    let mut v = nalgebra::DVector::zeros(m);
    v[i] = 1.0;
    Tangent::new(x.clone(), v)
}

fn vertical_extension_field(phi: &MapJet, v: &Tangent) -> crate::geometry::VectorField {
    let comps = v.components().clone();
    let phi = phi.clone();
    let chart = phi.domain().clone();
    let dim = chart.dim();
    crate::geometry::VectorField::from_fn(chart, move |seeds| {
        let pi_h = maps::horizontal_projector_jets(&phi, seeds).expect("projector");
        (0..dim)
            .map(|k| {
                let mut s = crate::jet::Jet::constant_in(seeds[0].space(), comps[k]);
                for c in 0..dim {
                    s = &s - &(&pi_h[k][c] * comps[c]);
                }
                s
            })
            .collect()
    })
}

/// One measured sample in an agreement record.
#[derive(Clone, Debug, Serialize)]
pub struct VerdictSample {
    pub x: Vec<f64>,
    pub xi: Vec<f64>,
    pub xi_norm: f64,
    pub verdict: LiftedVerdict,
}

/// The horizontal-conformality theorem as a test: predicted from the measured
/// closed-form conditions, measured from Gram verdicts at bundle samples.
#[derive(Clone, Debug, Serialize)]
pub struct MaintAgreement {
    pub conditions: TheoremConditions,
    pub predicted_conformal: bool,
    pub measured_conformal: bool,
    pub capital_lambda: Option<f64>,
    pub capital_lambda_spread: f64,
    pub max_deviation: f64,
    pub critical_samples: usize,
    pub samples: Vec<VerdictSample>,
    /// prediction and measurement agree; a mismatch is a recorded failure
    pub agree: bool,
}

pub fn maint_agreement(
    lifted: &LiftedMap,
    params_m: &CGParams,
    params_n: &CGParams,
    bundle_samples: &[BundlePoint],
    tol_identity: f64,
    tol_deviation: f64,
) -> Result<MaintAgreement> {
    let phi = lifted.map();
    let base_points: Vec<Point> = bundle_samples.iter().map(|b| b.base().clone()).collect();
    let conditions =
        evaluate_theorem_conditions(phi, params_m, params_n, &base_points, tol_identity)?;
    let predicted = conditions.predicted_conformal();

    let mut samples = Vec::with_capacity(bundle_samples.len());
    let mut lambdas: Vec<f64> = Vec::new();
    let mut max_dev: f64 = 0.0;
    let mut critical = 0usize;
    let mut all_conformal = true;
    for at in bundle_samples {
        let verdict = hc_verdict_lifted(lifted, params_m, params_n, at, tol_deviation)?;
        match &verdict {
            LiftedVerdict::Critical => critical += 1,
            LiftedVerdict::Conformal { lambda } => lambdas.push(*lambda),
            LiftedVerdict::Nonconformal { deviation, .. } => {
                all_conformal = false;
                max_dev = max_dev.max(*deviation);
            }
        }
        samples.push(VerdictSample {
            x: at.base().coords_vec(),
            xi: at.fiber().components().as_slice().to_vec(),
            xi_norm: at.chart().norm(at.fiber())?,
            verdict,
        });
    }
    let lambda_mean = if lambdas.is_empty() {
        None
    } else {
        Some(lambdas.iter().sum::<f64>() / lambdas.len() as f64)
    };
    let spread = match (lambdas.iter().cloned().reduce(f64::max), lambdas.iter().cloned().reduce(f64::min)) {
        (Some(hi), Some(lo)) => hi - lo,
        _ => 0.0,
    };
    let measured = all_conformal
        && !lambdas.is_empty()
        && lambda_mean.is_some_and(|l| spread <= tol_identity * (1.0 + l.abs()));
    Ok(MaintAgreement {
        conditions,
        predicted_conformal: predicted,
        measured_conformal: measured,
        capital_lambda: lambda_mean,
        capital_lambda_spread: spread,
        max_deviation: max_dev,
        critical_samples: critical,
        samples,
        agree: predicted == measured,
    })
}

/// Per-sample fiber mean-curvature data of the lifted map.
#[derive(Clone, Debug, Serialize)]
pub struct KappaSample {
    pub xi_norm: f64,
    pub phi_xi_norm: f64,
    /// whether `xi` is horizontal for `phi` (within tolerance)
    pub xi_horizontal: bool,
    /// g_N norm of the fiber component of `Phi_*(kappa_Phi)`
    pub kappa_vertical_norm: f64,
    /// g_N norm of the base component of `Phi_*(kappa_Phi)`
    pub kappa_horizontal_norm: f64,
    /// closed-form value `1/2 q omega_q(xi) |phi_* xi|` it should match when
    /// `xi` is horizontal and the fibers are totally geodesic
    pub half_q_omega_formula: f64,
    /// max `|Phi_*(frame vector)|` over the candidate frame of `ker Phi_*`
    pub frame_residual: f64,
    /// `|tau(Phi)|` from the conformal tension shortcut at this sample
    pub tension_norm: f64,
}

/// Harmonic-morphism certificate for the lifted map `Phi`.
#[derive(Clone, Debug, Serialize)]
pub struct LiftedCertificate {
    pub hc_all: bool,
    pub max_deviation: f64,
    pub capital_lambda: Option<f64>,
    pub capital_lambda_spread: f64,
    pub max_tension: f64,
    pub critical_samples: usize,
    pub certified: bool,
    pub kappa_samples: Vec<KappaSample>,
}

/// Harmonic-morphism certificate for the base map `phi`.
#[derive(Clone, Debug, Serialize)]
pub struct MapCertificate {
    pub hc_all: bool,
    pub max_deviation: f64,
    pub lambda: Option<f64>,
    pub lambda_spread: f64,
    pub max_tension: f64,
    pub critical_samples: usize,
    pub certified: bool,
}

/// Certify `phi` directly: horizontally conformal at every noncritical sample
/// and tension (trace of `B` over an orthonormal frame) below tolerance.
pub fn certify_map(phi: &MapJet, base_points: &[Point], tol: f64) -> Result<MapCertificate> {
    let nchart = phi.codomain().clone();
    let mut lambdas = Vec::new();
    let mut all_conformal = true;
    let mut max_dev: f64 = 0.0;
    let mut max_tension: f64 = 0.0;
    let mut critical = 0usize;
    for x in base_points {
        let data = map_point_data(phi, x, maps::RANK_TOL)?;
        if data.is_critical() {
            critical += 1;
            continue;
        }
        match dilatation(phi, &data, tol)? {
            ConformalityVerdict::Conformal { lambda } => lambdas.push(lambda),
            v => {
                all_conformal = false;
                max_dev = max_dev.max(v.deviation());
            }
        }
        max_tension = max_tension.max(nchart.norm(&tension(phi, x)?)?);
    }
    let lambda_mean = if lambdas.is_empty() {
        None
    } else {
        Some(lambdas.iter().sum::<f64>() / lambdas.len() as f64)
    };
    let spread = match (lambdas.iter().cloned().reduce(f64::max), lambdas.iter().cloned().reduce(f64::min)) {
        (Some(hi), Some(lo)) => hi - lo,
        _ => 0.0,
    };
    let hc_all = all_conformal && !lambdas.is_empty();
    Ok(MapCertificate {
        hc_all,
        max_deviation: max_dev,
        lambda: lambda_mean,
        lambda_spread: spread,
        max_tension,
        critical_samples: critical,
        certified: hc_all && max_tension <= tol,
    })
}

/// Certify `Phi` as a harmonic morphism: horizontally conformal at every
/// sample, and the conformal tension
/// `tau(Phi) = -((2n-2)/2) Phi_*(grad ln Lambda) - (2m-2n) Phi_*(kappa_Phi)`
/// below tolerance, with `kappa_Phi` computed from the stated `nabla^{TM}`
/// over an h-orthonormal frame of `ker Phi_*` (horizontal and vertical lifts
/// of a vertical frame; the frame's own membership in `ker Phi_*` is
/// measured and reported). The gradient term is dropped only when the
/// measured `Lambda` is constant over the samples, which is recorded in
/// `capital_lambda_spread`.
pub fn certify_lifted(
    lifted: &LiftedMap,
    params_m: &CGParams,
    params_n: &CGParams,
    bundle_samples: &[BundlePoint],
    tol: f64,
) -> Result<LiftedCertificate> {
    let phi = lifted.map();
    let chart = phi.domain().clone();
    let nchart = phi.codomain().clone();
    let m = chart.dim();
    let n = nchart.dim();
    let mut lambdas = Vec::new();
    let mut all_conformal = true;
    let mut max_dev: f64 = 0.0;
    let mut max_tension: f64 = 0.0;
    let mut critical = 0usize;
    let mut kappa_samples = Vec::with_capacity(bundle_samples.len());
    for at in bundle_samples {
        let verdict = hc_verdict_lifted(lifted, params_m, params_n, at, tol)?;
        match &verdict {
            LiftedVerdict::Critical => {
                critical += 1;
                continue;
            }
            LiftedVerdict::Conformal { lambda } => lambdas.push(*lambda),
            LiftedVerdict::Nonconformal { deviation, .. } => {
                all_conformal = false;
                max_dev = max_dev.max(*deviation);
            }
        }
        let kappa = kappa_sample(lifted, params_m, params_n, at, tol)?;
        max_tension = max_tension.max(kappa.tension_norm);
        kappa_samples.push(kappa);
    }
    let lambda_mean = if lambdas.is_empty() {
        None
    } else {
        Some(lambdas.iter().sum::<f64>() / lambdas.len() as f64)
    };
    let spread = match (lambdas.iter().cloned().reduce(f64::max), lambdas.iter().cloned().reduce(f64::min)) {
        (Some(hi), Some(lo)) => hi - lo,
        _ => 0.0,
    };
    let hc_all = all_conformal && !lambdas.is_empty();
    let _ = (m, n, chart);
    Ok(LiftedCertificate {
        hc_all,
        max_deviation: max_dev,
        capital_lambda: lambda_mean,
        capital_lambda_spread: spread,
        max_tension,
        critical_samples: critical,
        certified: hc_all && max_tension <= tol,
        kappa_samples,
    })
}

/// `kappa_Phi` data at one bundle point over the frame
/// `{(e_i)^h, (e_i)^v}` of `ker Phi_*` built from a g-orthonormal vertical
/// frame `e_i` of `phi`, h-orthonormalized.
fn kappa_sample(
    lifted: &LiftedMap,
    params_m: &CGParams,
    params_n: &CGParams,
    at: &BundlePoint,
    tol: f64,
) -> Result<KappaSample> {
    let phi = lifted.map();
    let chart = phi.domain().clone();
    let nchart = phi.codomain().clone();
    let m = chart.dim();
    let n = nchart.dim();
    let data = map_point_data(phi, at.base(), maps::RANK_TOL)?;
    let xi = Tangent::new(at.base().clone(), at.fiber().components().clone());
    let xi_norm = chart.norm(&xi)?;
    let xi_horizontal = data
        .vertical_basis()
        .iter()
        .map(|v| chart.inner(&xi, v).map(f64::abs))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0_f64, f64::max)
        <= tol * (1.0 + xi_norm);
    let image = lifted.eval(at)?;
    let phi_xi = Tangent::new(image.base().clone(), image.fiber().components().clone());
    let phi_xi_norm = nchart.norm(&phi_xi)?;
    let wq = 1.0 / (1.0 + params_m.q() * xi_norm * xi_norm);
    let half_q_omega_formula = 0.5 * params_m.q() * wq * phi_xi_norm;

    let fibers = data.vertical_basis().len();
    if fibers == 0 {
        // no fibers: tension reduces to the gradient term, which is zero for
        // the constant measured dilatation; report zeros
        return Ok(KappaSample {
            xi_norm,
            phi_xi_norm,
            xi_horizontal,
            kappa_vertical_norm: 0.0,
            kappa_horizontal_norm: 0.0,
            half_q_omega_formula,
            frame_residual: 0.0,
            tension_norm: 0.0,
        });
    }

    // candidate frame of ker Phi_*: horizontal and vertical lifts of the
    // vertical frame; validated by pushing forward
    let sasaki = CGParams::sasaki();
    let mut frame_residual: f64 = 0.0;
    let mut f_lifts = Vec::with_capacity(fibers);
    for e in data.vertical_basis() {
        let eh = horizontal_lift(e, at)?;
        let ev = vertical_lift(e, at)?;
        frame_residual = frame_residual.max(cg_norm(&sasaki, &lifted.pushforward(&eh)?)?);
        frame_residual = frame_residual.max(cg_norm(&sasaki, &lifted.pushforward(&ev)?)?);
        f_lifts.push(ev);
    }
    // h-orthonormalize: horizontal lifts of a g-orthonormal frame are already
    // h-orthonormal and h-orthogonal to vertical lifts; Gram-Schmidt the
    // vertical block
    let f_basis = crate::lift::h_orthonormalize(params_m, &f_lifts)?;

    let mut kappa_sum = SecondTangent::zero(at.clone());
    for e in data.vertical_basis() {
        // nabla^{TM}_{E} E = (nabla^M_e e~)^h; the curvature term vanishes on
        // equal arguments
        let ext = vertical_extension_field(phi, e);
        let conn = bundle::cg_connection(params_m, ConnLiftCase::HorizHoriz, e, &ext, at)?;
        kappa_sum = kappa_sum.add(&conn);
    }
    for f in &f_basis {
        // vertical lifts: the vv case is pointwise in both arguments
        let fv = connection_map(f)?;
        let field = crate::geometry::VectorField::constant(
            chart.clone(),
            fv.components().as_slice().to_vec(),
        );
        let conn = bundle::cg_connection(params_m, ConnLiftCase::VertVert, &fv, &field, at)?;
        kappa_sum = kappa_sum.add(&conn);
    }
    let kappa = kappa_sum.scale(1.0 / (2 * fibers) as f64);
    let kappa_push = lifted.pushforward(&kappa)?;
    let g_n = nchart.metric_at(image.base())?;
    let vert_comp = connection_map(&kappa_push)?;
    let horiz_comp = pi_push(&kappa_push);
    let kappa_vertical_norm =
        (vert_comp.components().transpose() * &g_n * vert_comp.components())[(0, 0)].max(0.0).sqrt();
    let kappa_horizontal_norm =
        (horiz_comp.components().transpose() * &g_n * horiz_comp.components())[(0, 0)].max(0.0).sqrt();
    // conformal tension: gradient term dropped (Lambda constancy is recorded
    // by the caller), fiber term -(2m-2n) Phi_*(kappa)
    let tension_vec = kappa_push.scale(-((2 * m - 2 * n) as f64));
    let tension_norm = cg_norm(params_n, &tension_vec)?;
    Ok(KappaSample {
        xi_norm,
        phi_xi_norm,
        xi_horizontal,
        kappa_vertical_norm,
        kappa_horizontal_norm,
        half_q_omega_formula,
        frame_residual,
        tension_norm,
    })
}

/// One row of a fiber-scaling sweep.
#[derive(Clone, Debug, Serialize)]
pub struct TSweepRow {
    pub t: f64,
    pub deviation: f64,
    pub capital_lambda: f64,
}

/// Evaluate the conformality deviation of `Phi` along `t -> (x, t xi)`;
/// raw values only, no asymptotic claims.
pub fn t_sweep(
    lifted: &LiftedMap,
    params_m: &CGParams,
    params_n: &CGParams,
    x: &Point,
    xi_unit: &Tangent,
    ts: &[f64],
) -> Result<Vec<TSweepRow>> {
    let mut rows = Vec::with_capacity(ts.len());
    for &t in ts {
        let at = BundlePoint::new(x.clone(), xi_unit.scale(t))?;
        let gram = lifted_conformality(lifted, params_m, params_n, &at, maps::RANK_TOL)?;
        rows.push(TSweepRow { t, deviation: gram.deviation, capital_lambda: gram.capital_lambda });
    }
    Ok(rows)
}

/// Constancy of the measured dilatation of `phi` across points where both
/// `phi` and `Phi` measure conformal (max - min of the sampled field).
pub fn lambda_constancy(
    lifted: &LiftedMap,
    params_m: &CGParams,
    params_n: &CGParams,
    bundle_samples: &[BundlePoint],
    tol_deviation: f64,
) -> Result<Option<f64>> {
    let phi = lifted.map();
    let mut lambdas = Vec::new();
    for at in bundle_samples {
        let data = map_point_data(phi, at.base(), maps::RANK_TOL)?;
        if data.is_critical() {
            continue;
        }
        let v_phi = dilatation(phi, &data, tol_deviation)?;
        let v_lift = hc_verdict_lifted(lifted, params_m, params_n, at, tol_deviation)?;
        if let (ConformalityVerdict::Conformal { lambda }, LiftedVerdict::Conformal { .. }) =
            (v_phi, v_lift)
        {
            lambdas.push(lambda);
        }
    }
    if lambdas.is_empty() {
        return Ok(None);
    }
    let hi = lambdas.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = lambdas.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(Some(hi - lo))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Chart;
    use crate::sample;
    use approx::assert_relative_eq;

    fn scaled_projection(lambda: f64) -> MapJet {
        let c = lambda.sqrt();
        MapJet::new(
            "flat_projection",
            Chart::flat(3, 2.0, 1.0),
            Chart::flat(2, 10.0, 1.0),
            move |s| vec![&s[0] * c, &s[1] * c],
        )
    }

    #[test]
    fn verdict_sasaki_totally_geodesic_submersion() {
        let phi = scaled_projection(1.0);
        let lifted = LiftedMap::new(phi.clone());
        let sas = CGParams::sasaki();
        let samples = sample::sample_bundle_points(phi.domain(), 12, 7, &[0.0, 0.5, 1.0, 2.0]).unwrap();
        for at in &samples {
            let v = hc_verdict_lifted(&lifted, &sas, &sas, at, 1e-7).unwrap();
            assert_eq!(v.lambda(), Some(v.lambda().unwrap()));
            assert!(v.is_conformal());
            assert_relative_eq!(v.lambda().unwrap(), 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn verdict_q_lambda_s_fails_at_mixed_fibers() {
        // q = lambda s > 0: conformal at special fibers, not at mixed ones
        let phi = scaled_projection(2.0);
        let lifted = LiftedMap::new(phi.clone());
        let pm = CGParams::new(0.0, 1.0, 1.0).unwrap();
        let pn = CGParams::new(0.0, 0.5, 1.0).unwrap();
        let x = phi.domain().point(vec![0.1, -0.4, 0.8]).unwrap();
        let mixed = BundlePoint::new(
            x.clone(),
            phi.domain().tangent(&x, vec![1.0, 0.0, 1.0]).unwrap(),
        )
        .unwrap();
        let v = hc_verdict_lifted(&lifted, &pm, &pn, &mixed, 1e-7).unwrap();
        assert!(!v.is_conformal());
        assert!(v.deviation() > 1e-3);
        let horiz = BundlePoint::new(
            x.clone(),
            phi.domain().tangent(&x, vec![0.3, -0.9, 0.0]).unwrap(),
        )
        .unwrap();
        let v2 = hc_verdict_lifted(&lifted, &pm, &pn, &horiz, 1e-7).unwrap();
        assert!(v2.is_conformal());
        assert_relative_eq!(v2.lambda().unwrap(), 2.0, epsilon = 1e-9);
    }

    #[test]
    fn conditions_flat_scaled_projection() {
        let phi = scaled_projection(2.0);
        let pm = CGParams::new(0.0, 1.0, 1.0).unwrap();
        let pn = CGParams::new(0.0, 0.5, 1.0).unwrap();
        let mut rng = sample::rng_from_seed(11);
        let pts = sample::sample_points(phi.domain(), 8, &mut rng);
        let cond = evaluate_theorem_conditions(&phi, &pm, &pn, &pts, 1e-7).unwrap();
        assert!(cond.totally_geodesic);
        assert!(cond.hc_constant_lambda);
        assert_relative_eq!(cond.lambda.unwrap(), 2.0, epsilon = 1e-10);
        assert!(cond.p_alpha_zero && cond.r_beta_zero && cond.q_equals_lambda_s);
        assert!(cond.predicted_conformal());
        assert!(cond.max_t_norm < 1e-12);
        assert!(cond.max_fiber_b_norm < 1e-12);
    }

    #[test]
    fn conditions_detect_nonconstant_lambda() {
        // (x,y) -> (e^x cos y, e^x sin y): conformal but lambda varies
        let dom = Chart::flat(2, 1.0, 1.0);
        let phi = MapJet::new("conformal_plane", dom.clone(), Chart::flat(2, 10.0, 1.0), |s| {
            let ex = s[0].exp();
            vec![&ex * &s[1].cos(), &ex * &s[1].sin()]
        });
        let pm = CGParams::sasaki();
        let pn = CGParams::sasaki();
        let mut rng = sample::rng_from_seed(5);
        let pts = sample::sample_points(&dom, 6, &mut rng);
        let cond = evaluate_theorem_conditions(&phi, &pm, &pn, &pts, 1e-7).unwrap();
        assert!(!cond.hc_constant_lambda, "lambda spread {}", cond.lambda_spread);
        assert!(!cond.totally_geodesic);
        assert!(!cond.predicted_conformal());
    }

    #[test]
    fn agreement_on_sasaki_case() {
        let phi = scaled_projection(2.0);
        let lifted = LiftedMap::new(phi.clone());
        let sas = CGParams::sasaki();
        let samples = sample::sample_bundle_points(phi.domain(), 16, 3, &[0.0, 0.5, 1.0, 2.0]).unwrap();
        let rec = maint_agreement(&lifted, &sas, &sas, &samples, 1e-7, 1e-7).unwrap();
        assert!(rec.predicted_conformal && rec.measured_conformal && rec.agree);
        assert_relative_eq!(rec.capital_lambda.unwrap(), 2.0, epsilon = 1e-9);
    }

    #[test]
    fn certificate_sasaki_projection() {
        let phi = scaled_projection(2.0);
        let lifted = LiftedMap::new(phi.clone());
        let sas = CGParams::sasaki();
        let samples = sample::sample_bundle_points(phi.domain(), 12, 9, &[0.0, 0.5, 1.0, 2.0]).unwrap();
        let cert = certify_lifted(&lifted, &sas, &sas, &samples, 1e-7).unwrap();
        assert!(cert.hc_all && cert.certified, "cert {cert:?}");
        assert!(cert.max_tension < 1e-10);
    }

    #[test]
    fn kappa_matches_closed_form_for_q_positive() {
        // q = lambda s > 0 on the flat projection: at horizontal fibers the
        // fiber component of Phi_*(kappa_Phi) equals 1/2 q omega_q |phi_* xi|
        let phi = scaled_projection(2.0);
        let lifted = LiftedMap::new(phi.clone());
        let pm = CGParams::new(0.0, 1.0, 1.0).unwrap();
        let pn = CGParams::new(0.0, 0.5, 1.0).unwrap();
        let x = phi.domain().point(vec![0.2, 0.5, -0.3]).unwrap();
        let xi = phi.domain().tangent(&x, vec![0.8, -0.6, 0.0]).unwrap();
        let at = BundlePoint::new(x, xi).unwrap();
        let k = kappa_sample(&lifted, &pm, &pn, &at, 1e-7).unwrap();
        assert!(k.xi_horizontal);
        assert!(k.frame_residual < 1e-12);
        assert!(k.kappa_vertical_norm > 1e-3);
        assert_relative_eq!(k.kappa_vertical_norm, k.half_q_omega_formula, epsilon = 1e-9);
        assert!(k.kappa_horizontal_norm < 1e-12);
        // Sasaki: kappa vanishes entirely
        let sas = CGParams::sasaki();
        let k0 = kappa_sample(&lifted, &sas, &sas, &at, 1e-7).unwrap();
        assert!(k0.kappa_vertical_norm < 1e-13 && k0.tension_norm < 1e-13);
    }

    #[test]
    fn t_sweep_shapes() {
        let phi = scaled_projection(2.0);
        let lifted = LiftedMap::new(phi.clone());
        let sas = CGParams::sasaki();
        let x = phi.domain().point(vec![0.1, 0.1, 0.1]).unwrap();
        let xi = phi.domain().tangent(&x, vec![0.6, 0.0, 0.8]).unwrap();
        let ts = [0.0, 0.5, 1.0, 2.0, 4.0];
        let rows = t_sweep(&lifted, &sas, &sas, &x, &xi, &ts).unwrap();
        for r in &rows {
            assert!(r.deviation < 1e-9, "sasaki sweep deviation {}", r.deviation);
        }
        // p=1: deviation grows with t
        let pm = CGParams::new(1.0, 0.0, 1.0).unwrap();
        let rows = t_sweep(&lifted, &pm, &sas, &x, &xi, &ts).unwrap();
        assert!(rows[0].deviation < 1e-9);
        assert!(rows[2].deviation > 1e-3);
        assert!(rows[4].deviation > rows[2].deviation);
    }
}
