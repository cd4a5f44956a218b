//! Scenario files, suite execution and report emission.
//!
//! A scenario is a JSON document naming a catalog domain/codomain/map triple,
//! the metric parameters `(p, q, alpha)` / `(r, s, beta)`, the sample budget,
//! the RNG seed, the tolerances and the suites to run. Reports are JSON with
//! deterministic field order; identical scenario + seed produce identical
//! reports apart from the wall-clock `runtime_ms` field.
//!
//! Exit semantics (used by the command-line front end):
//! `0` all requested suites passed, `1` some assertion failed,
//! `2` the scenario itself was invalid.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::bundle::{self, CGParams};
use crate::catalog::{self, Params};
use crate::certify::{self, LiftedVerdict};
use crate::error::GeomError;
use crate::geometry::{Chart, Point};
use crate::lift::{self, LiftedMap};
use crate::maps::{self, dilatation, map_point_data, ConformalityVerdict, MapJet};
use crate::sample;

/// Reference to a catalog entry plus its parameters.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CatalogRef {
    pub id: String,
    #[serde(default)]
    pub params: Params,
}

/// The six metric parameters: `(p, q, alpha)` on the domain bundle,
/// `(r, s, beta)` on the codomain bundle.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct MetricParams {
    pub p: f64,
    pub q: f64,
    pub alpha: f64,
    pub r: f64,
    pub s: f64,
    pub beta: f64,
}

impl MetricParams {
    pub fn domain(&self) -> Result<CGParams, GeomError> {
        CGParams::new(self.p, self.q, self.alpha)
    }

    pub fn codomain(&self) -> Result<CGParams, GeomError> {
        CGParams::new(self.r, self.s, self.beta)
    }
}

/// Tolerances: identity residuals, relative rank thresholds, and the floor a
/// deviation must exceed to count as detected.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Tolerances {
    #[serde(default = "default_identity_tol")]
    pub identity: f64,
    #[serde(default = "default_rank_tol")]
    pub rank: f64,
    #[serde(default = "default_deviation_tol")]
    pub deviation: f64,
}

fn default_identity_tol() -> f64 {
    1e-7
}

fn default_rank_tol() -> f64 {
    1e-8
}

fn default_deviation_tol() -> f64 {
    1e-3
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            identity: default_identity_tol(),
            rank: default_rank_tol(),
            deviation: default_deviation_tol(),
        }
    }
}

/// The suites a scenario can request.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuiteId {
    /// chart metric symmetry/positivity and bundle metric symmetry/positivity
    MetricChecks,
    /// torsion and compatibility residuals of the stated connection
    ConnectionVerification,
    /// lift-pushforward identities, splitting invariants, decomposition
    /// residuals and the dilatation norm identities where applicable
    LiftIdentities,
    /// closed-form conditions vs measured conformality of the lifted map
    MaintAgreement,
    /// harmonic-morphism certification of map and lifted map
    HmtCertification,
    /// declared catalog flags vs measurement
    CatalogSelfTest,
}

/// A scenario file.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub domain: CatalogRef,
    pub codomain: CatalogRef,
    pub map: CatalogRef,
    pub metric: MetricParams,
    pub samples: usize,
    pub seed: u64,
    #[serde(default)]
    pub tol: Tolerances,
    pub suites: Vec<SuiteId>,
}

/// Scenario problems that prevent execution (exit code 2).
#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("scenario parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid scenario field `{field}`: {reason}")]
    Invalid { field: String, reason: String },
    #[error("geometry construction failed: {0}")]
    Geometry(#[from] GeomError),
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Scenario, ConfigError> {
        let scenario: Scenario = serde_json::from_str(text)?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.samples == 0 {
            return Err(ConfigError::Invalid {
                field: "samples".into(),
                reason: "need at least one sample".into(),
            });
        }
        self.metric.domain().map_err(|e| ConfigError::Invalid {
            field: "metric.(p,q,alpha)".into(),
            reason: e.to_string(),
        })?;
        self.metric.codomain().map_err(|e| ConfigError::Invalid {
            field: "metric.(r,s,beta)".into(),
            reason: e.to_string(),
        })?;
        if self.suites.is_empty() {
            return Err(ConfigError::Invalid {
                field: "suites".into(),
                reason: "need at least one suite".into(),
            });
        }
        let (dom_id, cod_id) = catalog::expected_charts(&self.map.id)?;
        if self.domain.id != dom_id {
            return Err(ConfigError::Invalid {
                field: "domain.id".into(),
                reason: format!("map `{}` expects domain chart `{dom_id}`", self.map.id),
            });
        }
        if self.codomain.id != cod_id {
            return Err(ConfigError::Invalid {
                field: "codomain.id".into(),
                reason: format!("map `{}` expects codomain chart `{cod_id}`", self.map.id),
            });
        }
        Ok(())
    }

    /// Materialize the charts and map named by this scenario.
    pub fn build(&self) -> Result<(Chart, Chart, MapJet), ConfigError> {
        let domain = catalog::build_chart(&self.domain.id, &self.domain.params)?;
        let codomain = catalog::build_chart(&self.codomain.id, &self.codomain.params)?;
        let map = catalog::build_map(&self.map.id, &domain, &codomain, &self.map.params)?;
        Ok((domain, codomain, map))
    }

    /// A scenario with default chart parameters filled in for the map entry.
    pub fn for_map(
        name: impl Into<String>,
        map_id: &str,
        map_params: Params,
        metric: MetricParams,
        samples: usize,
        seed: u64,
        suites: Vec<SuiteId>,
    ) -> Result<Scenario, ConfigError> {
        let (dom_id, cod_id) = catalog::expected_charts(map_id)?;
        let (dom_p, cod_p) = catalog::default_chart_params(map_id, &map_params)?;
        let s = Scenario {
            name: name.into(),
            domain: CatalogRef { id: dom_id.into(), params: dom_p },
            codomain: CatalogRef { id: cod_id.into(), params: cod_p },
            map: CatalogRef { id: map_id.into(), params: map_params },
            metric,
            samples,
            seed,
            tol: Tolerances::default(),
            suites,
        };
        s.validate()?;
        Ok(s)
    }
}

/// Per-sample record in a report.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SampleRecord {
    pub x: Vec<f64>,
    pub xi: Vec<f64>,
    pub verdict: String,
    pub lambda_or_deviation: f64,
}

/// The report a run emits.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Report {
    pub scenario: String,
    pub per_sample: Vec<SampleRecord>,
    pub aggregate: String,
    pub predicted: String,
    pub agreement: bool,
    pub residual_summaries: BTreeMap<String, f64>,
    pub suite_failures: Vec<String>,
    pub runtime_ms: u64,
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Whether every requested suite passed.
    pub fn passed(&self) -> bool {
        self.suite_failures.is_empty()
    }
}

fn fmt_verdict(v: &LiftedVerdict) -> (String, f64) {
    match v {
        LiftedVerdict::Critical => ("critical".into(), 0.0),
        LiftedVerdict::Conformal { lambda } => (format!("conformal (Lambda={lambda:.6})"), *lambda),
        LiftedVerdict::Nonconformal { deviation, .. } => {
            (format!("nonconformal (deviation={deviation:.3e})"), *deviation)
        }
    }
}

/// Execute the requested suites. Configuration problems return `Err`;
/// assertion failures are recorded in the report.
pub fn run(scenario: &Scenario) -> Result<Report, ConfigError> {
    let start = Instant::now();
    let (domain, _codomain, map) = scenario.build()?;
    let pm = scenario.metric.domain()?;
    let pn = scenario.metric.codomain()?;
    let lifted = LiftedMap::new(map.clone());
    let tol = scenario.tol;
    let bundle_samples = sample::sample_bundle_points(
        &domain,
        scenario.samples,
        scenario.seed,
        &sample::DEFAULT_XI_NORMS,
    )?;
    let base_points: Vec<Point> = bundle_samples.iter().map(|b| b.base().clone()).collect();

    let mut residuals: BTreeMap<String, f64> = BTreeMap::new();
    let mut failures: Vec<String> = Vec::new();
    let mut per_sample: Vec<SampleRecord> = Vec::new();
    let mut aggregate = String::from("n/a");
    let mut predicted = String::from("n/a");
    let mut agreement = true;

    for suite in &scenario.suites {
        match suite {
            SuiteId::MetricChecks => {
                metric_checks(&domain, &map, &pm, &bundle_samples, &mut residuals, &mut failures);
            }
            SuiteId::ConnectionVerification => {
                let n = scenario.samples.min(25);
                match bundle::verify_levi_civita(&pm, &domain, n, scenario.seed) {
                    Ok(rep) => {
                        residuals.insert("levi_civita_torsion_max".into(), rep.max_torsion);
                        residuals.insert("levi_civita_compat_max".into(), rep.max_compatibility);
                        if rep.max_torsion > tol.identity || rep.max_compatibility > tol.identity {
                            failures.push(format!(
                                "connection_verification: residuals (torsion {:.3e}, compatibility {:.3e}) above {:.1e}",
                                rep.max_torsion, rep.max_compatibility, tol.identity
                            ));
                        }
                    }
                    Err(e) => failures.push(format!("connection_verification: {e}")),
                }
            }
            SuiteId::LiftIdentities => {
                lift_identities(&lifted, &pm, &pn, &bundle_samples, &tol, &mut residuals, &mut failures);
            }
            SuiteId::MaintAgreement => {
                match certify::maint_agreement(
                    &lifted,
                    &pm,
                    &pn,
                    &bundle_samples,
                    tol.identity,
                    tol.identity,
                ) {
                    Ok(rec) => {
                        per_sample = rec
                            .samples
                            .iter()
                            .map(|s| {
                                let (verdict, value) = fmt_verdict(&s.verdict);
                                SampleRecord {
                                    x: s.x.clone(),
                                    xi: s.xi.clone(),
                                    verdict,
                                    lambda_or_deviation: value,
                                }
                            })
                            .collect();
                        aggregate = if rec.measured_conformal {
                            format!("conformal (Lambda={:.6})", rec.capital_lambda.unwrap_or(f64::NAN))
                        } else {
                            format!("nonconformal (max deviation={:.3e})", rec.max_deviation)
                        };
                        predicted = if rec.predicted_conformal {
                            "conformal (predicted)".into()
                        } else {
                            "nonconformal (predicted)".into()
                        };
                        agreement = rec.agree;
                        residuals.insert("maint_max_deviation".into(), rec.max_deviation);
                        residuals.insert("maint_lambda_spread".into(), rec.capital_lambda_spread);
                        residuals
                            .insert("maint_b_norm_max".into(), rec.conditions.max_b_norm);
                        residuals.insert("maint_t_norm_max".into(), rec.conditions.max_t_norm);
                        if let Some(l) = rec.capital_lambda {
                            residuals.insert("maint_capital_lambda".into(), l);
                        }
                        // a nonconformal measurement must be a real deviation,
                        // not tolerance noise
                        if !rec.measured_conformal && rec.max_deviation < tol.deviation {
                            failures.push(format!(
                                "maint_agreement: measured nonconformal but the largest deviation {:.3e} is below the detection floor {:.1e}",
                                rec.max_deviation, tol.deviation
                            ));
                        }
                        if !rec.agree {
                            failures.push(format!(
                                "maint_agreement: prediction ({}) and measurement ({}) disagree",
                                predicted, aggregate
                            ));
                        }
                    }
                    Err(e) => failures.push(format!("maint_agreement: {e}")),
                }
            }
            SuiteId::HmtCertification => {
                hmt_certification(&lifted, &pm, &pn, &base_points, &bundle_samples, &tol, &mut residuals, &mut failures);
            }
            SuiteId::CatalogSelfTest => {
                catalog_self_test(&map, &scenario.map, &base_points, &tol, &mut residuals, &mut failures);
            }
        }
    }

    Ok(Report {
        scenario: scenario.name.clone(),
        per_sample,
        aggregate,
        predicted,
        agreement,
        residual_summaries: residuals,
        suite_failures: failures,
        runtime_ms: start.elapsed().as_millis() as u64,
    })
}

fn metric_checks(
    domain: &Chart,
    map: &MapJet,
    pm: &CGParams,
    bundle_samples: &[bundle::BundlePoint],
    residuals: &mut BTreeMap<String, f64>,
    failures: &mut Vec<String>,
) {
    let mut min_eig = f64::INFINITY;
    let mut min_h = f64::INFINITY;
    for at in bundle_samples {
        match domain.metric_at(at.base()) {
            Ok(g) => {
                let eigs = g.symmetric_eigen().eigenvalues;
                min_eig = min_eig.min(eigs.iter().cloned().fold(f64::INFINITY, f64::min));
            }
            Err(e) => {
                failures.push(format!("metric_checks: {e}"));
                return;
            }
        }
        if map.eval(at.base()).is_err() {
            failures.push(format!(
                "metric_checks: image of {:?} lies outside the codomain chart",
                at.base().coords_vec()
            ));
            return;
        }
        // bundle metric positivity on a deterministic probe set
        let m = domain.dim();
        for k in 0..2 * m {
            let mut base = nalgebra::DVector::zeros(m);
            let mut fiber = nalgebra::DVector::zeros(m);
            if k < m {
                base[k] = 1.0;
                fiber[(k + 1) % m] = 0.5;
            } else {
                fiber[k - m] = 1.0;
                base[(k + 1) % m] = -0.5;
            }
            let a = bundle::SecondTangent::new(at.clone(), base, fiber);
            match bundle::cg_inner(pm, &a, &a) {
                Ok(v) => min_h = min_h.min(v),
                Err(e) => {
                    failures.push(format!("metric_checks: {e}"));
                    return;
                }
            }
        }
    }
    residuals.insert("metric_min_eigenvalue".into(), min_eig);
    residuals.insert("bundle_metric_min_norm2".into(), min_h);
    if min_eig <= 0.0 {
        failures.push(format!("metric_checks: metric not positive definite (min eig {min_eig:.3e})"));
    }
    if min_h <= 0.0 {
        failures.push(format!("metric_checks: bundle metric not positive definite ({min_h:.3e})"));
    }
}

#[allow(clippy::too_many_arguments)]
fn lift_identities(
    lifted: &LiftedMap,
    pm: &CGParams,
    pn: &CGParams,
    bundle_samples: &[bundle::BundlePoint],
    tol: &Tolerances,
    residuals: &mut BTreeMap<String, f64>,
    failures: &mut Vec<String>,
) {
    let phi = lifted.map();
    let chart = phi.domain().clone();
    let m = chart.dim();
    let n = phi.codomain().dim();
    let mut l1_max: f64 = 0.0;
    let mut ann_max: f64 = 0.0;
    let mut orth_max: f64 = 0.0;
    let mut kernel_dim_bad = 0usize;
    let mut lmain_max: f64 = 0.0;
    let mut cme_max: f64 = 0.0;
    let mut e13_max: f64 = 0.0;
    let mut e14_max: f64 = 0.0;
    let mut l5_applicable = 0usize;
    let mut l5_skipped = 0usize;
    let mut decomposition_max: f64 = 0.0;
    for at in bundle_samples {
        // l1 on the coordinate directions
        for i in 0..m {
            let mut v = nalgebra::DVector::zeros(m);
            v[i] = 1.0;
            let x = crate::geometry::Tangent::new(at.base().clone(), v);
            match lift::l1_residuals(lifted, &x, at) {
                Ok((rv, rh)) => l1_max = l1_max.max(rv).max(rh),
                Err(e) => {
                    failures.push(format!("lift_identities/l1: {e}"));
                    return;
                }
            }
        }
        // round-trip decomposition of a deterministic mixed vector
        let a = bundle::SecondTangent::new(
            at.clone(),
            nalgebra::DVector::from_fn(m, |i, _| 0.3 + 0.2 * i as f64),
            nalgebra::DVector::from_fn(m, |i, _| -0.4 + 0.3 * i as f64),
        );
        match bundle::decompose(&a) {
            Ok((h, v)) => {
                let back = h.add(&v).sub(&a);
                decomposition_max = decomposition_max.max(back.coord_norm());
            }
            Err(e) => {
                failures.push(format!("lift_identities/decompose: {e}"));
                return;
            }
        }
        // splitting invariants need a submersion point
        let data = match map_point_data(phi, at.base(), tol.rank) {
            Ok(d) => d,
            Err(e) => {
                failures.push(format!("lift_identities: {e}"));
                return;
            }
        };
        if data.is_critical() || data.rank() < n {
            continue;
        }
        match lift::split_basis(lifted, pm, at, tol.rank) {
            Ok(split) => {
                ann_max = ann_max.max(split.annihilation_residual());
                orth_max = orth_max.max(split.orthogonality_residual());
                if split.kernel_dim_measured() != 2 * (m - n) || split.span_rank() != 2 * m {
                    kernel_dim_bad += 1;
                }
            }
            Err(e) => {
                failures.push(format!("lift_identities/split: {e}"));
                return;
            }
        }
        // conformal decomposition identities where phi is conformal
        let phi_conformal = matches!(
            dilatation(phi, &data, tol.identity),
            Ok(ConformalityVerdict::Conformal { .. })
        );
        if phi_conformal {
            if let Some(x) = data.horizontal_basis().first() {
                match lift::lmain_residual(lifted, x, at, tol.identity) {
                    Ok(r) => lmain_max = lmain_max.max(r),
                    Err(e) => failures.push(format!("lift_identities/lmain: {e}")),
                }
                if let Some(y) = data.horizontal_basis().last() {
                    match lift::clmain_residuals(lifted, x, y, at, tol.identity) {
                        Ok(r) => {
                            cme_max = cme_max.max(r.cme1).max(r.cme2);
                            if let Some(c3) = r.cme3 {
                                cme_max = cme_max.max(c3);
                            }
                            if let Some(c4) = r.cme4 {
                                cme_max = cme_max.max(c4);
                            }
                        }
                        Err(e) => failures.push(format!("lift_identities/clmain: {e}")),
                    }
                }
                match lift::l5_residuals(lifted, pm, pn, x, at, tol.identity) {
                    Ok(r) => {
                        l5_applicable += 1;
                        e13_max = e13_max.max(r.e13);
                        e14_max = e14_max.max(r.e14);
                    }
                    Err(GeomError::DilatationUnavailable { .. }) => l5_skipped += 1,
                    Err(e) => failures.push(format!("lift_identities/l5: {e}")),
                }
            }
        }
    }
    residuals.insert("l1_residual_max".into(), l1_max);
    residuals.insert("split_annihilation_max".into(), ann_max);
    residuals.insert("split_orthogonality_max".into(), orth_max);
    residuals.insert("decomposition_roundtrip_max".into(), decomposition_max);
    residuals.insert("lmain_residual_max".into(), lmain_max);
    residuals.insert("clmain_residual_max".into(), cme_max);
    residuals.insert("l5_e13_max".into(), e13_max);
    residuals.insert("l5_e14_max".into(), e14_max);
    residuals.insert("l5_applicable_samples".into(), l5_applicable as f64);
    residuals.insert("l5_skipped_nonconformal".into(), l5_skipped as f64);
    for (name, value) in [
        ("l1", l1_max),
        ("split annihilation", ann_max),
        ("split orthogonality", orth_max),
        ("decomposition", decomposition_max),
        ("lmain", lmain_max),
        ("clmain", cme_max),
        ("l5 e13", e13_max),
        ("l5 e14", e14_max),
    ] {
        if value > tol.identity {
            failures.push(format!(
                "lift_identities: {name} residual {value:.3e} above {:.1e}",
                tol.identity
            ));
        }
    }
    if kernel_dim_bad > 0 {
        failures.push(format!(
            "lift_identities: kernel dimension mismatch at {kernel_dim_bad} samples"
        ));
    }
}

#[allow(clippy::too_many_arguments)]
fn hmt_certification(
    lifted: &LiftedMap,
    pm: &CGParams,
    pn: &CGParams,
    base_points: &[Point],
    bundle_samples: &[bundle::BundlePoint],
    tol: &Tolerances,
    residuals: &mut BTreeMap<String, f64>,
    failures: &mut Vec<String>,
) {
    let phi = lifted.map();
    let map_cert = match certify::certify_map(phi, base_points, tol.identity) {
        Ok(c) => c,
        Err(e) => {
            failures.push(format!("hmt_certification: {e}"));
            return;
        }
    };
    let lift_cert = match certify::certify_lifted(lifted, pm, pn, bundle_samples, tol.identity) {
        Ok(c) => c,
        Err(e) => {
            failures.push(format!("hmt_certification: {e}"));
            return;
        }
    };
    residuals.insert("phi_max_tension".into(), map_cert.max_tension);
    residuals.insert("phi_certified".into(), if map_cert.certified { 1.0 } else { 0.0 });
    residuals.insert("lifted_max_tension".into(), lift_cert.max_tension);
    residuals.insert("lifted_certified".into(), if lift_cert.certified { 1.0 } else { 0.0 });
    residuals.insert("lifted_max_deviation".into(), lift_cert.max_deviation);
    let kappa_max = lift_cert
        .kappa_samples
        .iter()
        .map(|k| k.kappa_vertical_norm)
        .fold(0.0_f64, f64::max);
    residuals.insert("kappa_vertical_max".into(), kappa_max);
    // the closed-form prediction: certified exactly when the map is a
    // totally geodesic harmonic morphism with constant dilatation and both
    // metrics are Sasaki
    let conditions = match certify::evaluate_theorem_conditions(phi, pm, pn, base_points, tol.identity) {
        Ok(c) => c,
        Err(e) => {
            failures.push(format!("hmt_certification: {e}"));
            return;
        }
    };
    let predicted = conditions.totally_geodesic
        && conditions.hc_constant_lambda
        && map_cert.max_tension <= tol.identity
        && conditions.sasaki_both;
    if predicted != lift_cert.certified {
        failures.push(format!(
            "hmt_certification: predicted {} but measured {} (max tension {:.3e}, deviation {:.3e})",
            predicted, lift_cert.certified, lift_cert.max_tension, lift_cert.max_deviation
        ));
    }
}

fn catalog_self_test(
    map: &MapJet,
    map_ref: &CatalogRef,
    base_points: &[Point],
    tol: &Tolerances,
    residuals: &mut BTreeMap<String, f64>,
    failures: &mut Vec<String>,
) {
    let truth = match catalog::ground_truth(&map_ref.id, &map_ref.params) {
        Ok(t) => t,
        Err(e) => {
            failures.push(format!("catalog_self_test: {e}"));
            return;
        }
    };
    let chart = map.domain().clone();
    let nchart = map.codomain().clone();
    let m = chart.dim();
    let mut max_b: f64 = 0.0;
    let mut max_t: f64 = 0.0;
    let mut max_kappa: f64 = 0.0;
    let mut lambdas: Vec<f64> = Vec::new();
    let mut all_conformal = true;
    let mut rs_defect: f64 = 0.0;
    let mut criticals = 0usize;
    for x in base_points {
        let data = match map_point_data(map, x, tol.rank) {
            Ok(d) => d,
            Err(e) => {
                failures.push(format!("catalog_self_test: {e}"));
                return;
            }
        };
        if data.is_critical() {
            criticals += 1;
            continue;
        }
        for i in 0..m {
            for j in i..m {
                let mut vi = nalgebra::DVector::zeros(m);
                vi[i] = 1.0;
                let mut vj = nalgebra::DVector::zeros(m);
                vj[j] = 1.0;
                let ei = crate::geometry::Tangent::new(x.clone(), vi);
                let ej = crate::geometry::Tangent::new(x.clone(), vj);
                match maps::second_fundamental_form(map, &ei, &ej) {
                    Ok(b) => max_b = max_b.max(nchart.norm(&b).unwrap_or(f64::NAN)),
                    Err(e) => {
                        failures.push(format!("catalog_self_test: {e}"));
                        return;
                    }
                }
            }
        }
        match dilatation(map, &data, tol.identity) {
            Ok(ConformalityVerdict::Conformal { lambda }) => lambdas.push(lambda),
            Ok(_) => all_conformal = false,
            Err(e) => {
                failures.push(format!("catalog_self_test: {e}"));
                return;
            }
        }
        // Riemannian submersion: the horizontal Gram of dphi is the identity
        let jac = map.jacobian(x);
        let fx = match map.eval(x) {
            Ok(p) => p,
            Err(e) => {
                failures.push(format!("catalog_self_test: {e}"));
                return;
            }
        };
        let gn = match nchart.metric_at(&fx) {
            Ok(g) => g,
            Err(e) => {
                failures.push(format!("catalog_self_test: {e}"));
                return;
            }
        };
        for h in data.horizontal_basis() {
            let u = &jac * h.components();
            rs_defect = rs_defect.max(((u.transpose() * &gn * &u)[(0, 0)] - 1.0).abs());
        }
        let hb = data.horizontal_basis();
        for i in 0..hb.len() {
            for j in (i + 1)..hb.len() {
                if let Ok(t) = maps::integrability_tensor(map, &hb[i], &hb[j], tol.identity) {
                    max_t = max_t.max(chart.norm(&t).unwrap_or(f64::NAN));
                }
            }
        }
        if !data.vertical_basis().is_empty() {
            match maps::mean_curvature_fibers(map, &data) {
                Ok(k) => max_kappa = max_kappa.max(chart.norm(&k).unwrap_or(f64::NAN)),
                Err(e) => {
                    failures.push(format!("catalog_self_test: {e}"));
                    return;
                }
            }
        }
    }
    residuals.insert("selftest_max_b".into(), max_b);
    residuals.insert("selftest_max_t".into(), max_t);
    residuals.insert("selftest_max_kappa".into(), max_kappa);
    residuals.insert("selftest_rs_defect".into(), rs_defect);

    if truth.all_critical {
        if criticals != base_points.len() {
            failures.push("catalog_self_test: entry declared all-critical but noncritical points were found".into());
        }
        return;
    }
    let measured_tg = max_b <= tol.identity;
    if measured_tg != truth.totally_geodesic {
        failures.push(format!(
            "catalog_self_test: totally_geodesic declared {} but measured max |B| = {max_b:.3e}",
            truth.totally_geodesic
        ));
    }
    let measured_rs = rs_defect <= tol.identity;
    if measured_rs != truth.riemannian_submersion {
        failures.push(format!(
            "catalog_self_test: riemannian_submersion declared {} but measured defect {rs_defect:.3e}",
            truth.riemannian_submersion
        ));
    }
    match truth.constant_dilatation {
        Some(expected) => {
            let hi = lambdas.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lo = lambdas.iter().cloned().fold(f64::INFINITY, f64::min);
            if !all_conformal || lambdas.is_empty() {
                failures.push("catalog_self_test: constant dilatation declared but map measured nonconformal".into());
            } else if hi - lo > tol.identity * (1.0 + expected)
                || (hi + lo) / 2.0 - expected > tol.identity * (1.0 + expected)
            {
                failures.push(format!(
                    "catalog_self_test: dilatation declared {expected} but measured [{lo}, {hi}]"
                ));
            }
        }
        None => {
            let hi = lambdas.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lo = lambdas.iter().cloned().fold(f64::INFINITY, f64::min);
            let constant = all_conformal
                && !lambdas.is_empty()
                && hi - lo <= tol.identity * (1.0 + hi.abs());
            if constant {
                failures.push(
                    "catalog_self_test: dilatation declared nonconstant but measured constant".into(),
                );
            }
        }
    }
    if let Some(t_zero) = truth.t_zero {
        let measured = max_t <= tol.identity;
        if measured != t_zero {
            failures.push(format!(
                "catalog_self_test: t_zero declared {t_zero} but measured max |T| = {max_t:.3e}"
            ));
        }
    }
    if let Some(fibers) = truth.fibers_totally_geodesic {
        let measured = max_kappa <= tol.identity;
        if measured != fibers {
            failures.push(format!(
                "catalog_self_test: fibers_totally_geodesic declared {fibers} but measured max |kappa| = {max_kappa:.3e}"
            ));
        }
    }
}

/// One row of a parameter or fiber-scaling sweep.
#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub axis: String,
    pub value: f64,
    pub max_deviation: f64,
    pub lambda_estimate: f64,
}

/// Sweep axes: the six metric parameters or the fiber scale `t`.
pub const SWEEP_AXES: [&str; 7] = ["t", "p", "q", "alpha", "r", "s", "beta"];

/// Run a sweep along one axis, measuring the worst conformality deviation of
/// the lifted map and the trace-mean dilatation estimate at each grid value.
pub fn sweep(scenario: &Scenario, axis: &str, grid: &[f64]) -> Result<Vec<SweepRow>, ConfigError> {
    if !SWEEP_AXES.contains(&axis) {
        return Err(ConfigError::Invalid {
            field: "axis".into(),
            reason: format!("unknown axis `{axis}`; valid axes: {SWEEP_AXES:?}"),
        });
    }
    if grid.is_empty() {
        return Err(ConfigError::Invalid { field: "grid".into(), reason: "empty grid".into() });
    }
    let (domain, _codomain, map) = scenario.build()?;
    let lifted = LiftedMap::new(map);
    let mut rows = Vec::with_capacity(grid.len());
    if axis == "t" {
        let pm = scenario.metric.domain()?;
        let pn = scenario.metric.codomain()?;
        let mut rng = sample::rng_from_seed(scenario.seed);
        let x = sample::sample_point(&domain, &mut rng);
        let xi = sample::sample_tangent(&domain, &x, 1.0, &mut rng)?;
        let sweep_rows = certify::t_sweep(&lifted, &pm, &pn, &x, &xi, grid)?;
        for r in sweep_rows {
            rows.push(SweepRow {
                axis: "t".into(),
                value: r.t,
                max_deviation: r.deviation,
                lambda_estimate: r.capital_lambda,
            });
        }
        return Ok(rows);
    }
    for &value in grid {
        let mut metric = scenario.metric;
        match axis {
            "p" => metric.p = value,
            "q" => metric.q = value,
            "alpha" => metric.alpha = value,
            "r" => metric.r = value,
            "s" => metric.s = value,
            "beta" => metric.beta = value,
            _ => unreachable!(),
        }
        let pm = metric.domain().map_err(|e| ConfigError::Invalid {
            field: format!("sweep axis {axis}"),
            reason: e.to_string(),
        })?;
        let pn = metric.codomain().map_err(|e| ConfigError::Invalid {
            field: format!("sweep axis {axis}"),
            reason: e.to_string(),
        })?;
        let samples = sample::sample_bundle_points(
            &domain,
            scenario.samples,
            scenario.seed,
            &sample::DEFAULT_XI_NORMS,
        )?;
        let mut max_dev: f64 = 0.0;
        let mut lambdas = Vec::new();
        for at in &samples {
            match certify::hc_verdict_lifted(&lifted, &pm, &pn, at, scenario.tol.identity)? {
                LiftedVerdict::Critical => {}
                LiftedVerdict::Conformal { lambda } => lambdas.push(lambda),
                LiftedVerdict::Nonconformal { deviation, lambda } => {
                    max_dev = max_dev.max(deviation);
                    lambdas.push(lambda);
                }
            }
        }
        let lambda_estimate = if lambdas.is_empty() {
            f64::NAN
        } else {
            lambdas.iter().sum::<f64>() / lambdas.len() as f64
        };
        rows.push(SweepRow { axis: axis.into(), value, max_deviation: max_dev, lambda_estimate });
    }
    Ok(rows)
}

/// Fixed-format CSV for sweep rows: stable headers, `{:.12e}` values.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("axis,value,max_deviation,lambda_estimate\n");
    for r in rows {
        out.push_str(&format!(
            "{},{:.12e},{:.12e},{:.12e}\n",
            r.axis, r.value, r.max_deviation, r.lambda_estimate
        ));
    }
    out
}
