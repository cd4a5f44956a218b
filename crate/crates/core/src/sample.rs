//! Deterministic seeded sampling of chart points and bundle points.
//!
//! Base points are uniform in the chart box shrunk by a 10% margin per axis;
//! fiber vectors are Gaussian directions rescaled to a fixed cycle of metric
//! norms. Identical seeds produce identical samples.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::bundle::BundlePoint;
use crate::error::Result;
use crate::geometry::{Chart, Point, Tangent};

/// Norm cycle used for fiber vectors when none is specified: `|xi|_g` runs
/// through 0, 0.5, 1, 2. Zero isolates Sasaki behavior, the larger norms
/// expose the `omega_alpha^p` and `q` terms.
pub const DEFAULT_XI_NORMS: [f64; 4] = [0.0, 0.5, 1.0, 2.0];

/// Fraction of each domain axis kept away from the boundary.
pub const DOMAIN_MARGIN: f64 = 0.10;

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform point in the margin-shrunk domain box.
pub fn sample_point(chart: &Chart, rng: &mut ChaCha8Rng) -> Point {
    let coords: Vec<f64> = chart
        .domain()
        .iter()
        .map(|&(lo, hi)| {
            let margin = DOMAIN_MARGIN * (hi - lo) / 2.0;
            rng.random_range(lo + margin..hi - margin)
        })
        .collect();
    chart.point(coords).expect("sampled point is inside the domain by construction")
}

pub fn sample_points(chart: &Chart, n: usize, rng: &mut ChaCha8Rng) -> Vec<Point> {
    (0..n).map(|_| sample_point(chart, rng)).collect()
}

/// Gaussian tangent direction at `at` rescaled so `|xi|_g = norm`
/// (the zero vector when `norm == 0`).
pub fn sample_tangent(chart: &Chart, at: &Point, norm: f64, rng: &mut ChaCha8Rng) -> Result<Tangent> {
    let m = chart.dim();
    loop {
        let comps: Vec<f64> = (0..m).map(|_| StandardNormal.sample(rng)).collect();
        let t = chart.tangent(at, comps)?;
        let len = chart.norm(&t)?;
        if norm == 0.0 {
            return Ok(Tangent::zero(at.clone()));
        }
        if len > 1e-8 {
            return Ok(t.scale(norm / len));
        }
        // resample the (measure-zero) degenerate draw
    }
}

/// `n` bundle points with the fiber norm cycling through `norms`.
pub fn sample_bundle_points(
    chart: &Chart,
    n: usize,
    seed: u64,
    norms: &[f64],
) -> Result<Vec<BundlePoint>> {
    let mut rng = rng_from_seed(seed);
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let x = sample_point(chart, &mut rng);
        let norm = norms[k % norms.len()];
        let xi = sample_tangent(chart, &x, norm, &mut rng)?;
        out.push(BundlePoint::new(x, xi)?);
    }
    Ok(out)
}
