//! Forward-mode jet arithmetic: truncated multivariate Taylor expansions up to
//! total order three.
//!
//! A [`Jet`] carries the value of a scalar function together with all of its
//! partial derivatives up to order 3 in a fixed number of seed directions.
//! Coefficients are stored Taylor-normalized (`c_a = d^a f / a!`), so the
//! product of two jets is a plain truncated convolution and the Leibniz rule
//! holds exactly in floating point, up to rounding.
//!
//! Jets of different truncation orders can mix; the result is trusted only up
//! to the smaller order, and reading a derivative beyond the trusted order
//! panics rather than returning garbage.

use once_cell::sync::Lazy;
use std::collections::HashMap;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::{Arc, Mutex};

/// Highest total derivative order carried by a jet.
pub const MAX_ORDER: usize = 3;

/// Monomial bookkeeping for jets in a fixed number of variables.
///
/// Holds the multi-index list (sorted by total degree, then lexicographically),
/// the sparse multiplication table and the index-shift tables used to extract
/// partial derivatives. Spaces are cached globally per variable count, so two
/// jets in the same number of variables always share the same `Arc`.
pub struct JetSpace {
    nvars: usize,
    monomials: Vec<Vec<u8>>,
    degree: Vec<u8>,
    /// All `(i, j, k)` with `monomial[i] + monomial[j] = monomial[k]`, `deg <= MAX_ORDER`.
    products: Vec<(u32, u32, u32)>,
    /// `shift_up[v][i]` = index of `monomial[i] + e_v`, if still within order.
    shift_up: Vec<Vec<Option<u32>>>,
    index: HashMap<Vec<u8>, usize>,
}

static SPACES: Lazy<Mutex<HashMap<usize, Arc<JetSpace>>>> = Lazy::new(|| Mutex::new(HashMap::new()));

impl JetSpace {
    /// The shared space for `nvars` seed directions.
    pub fn get(nvars: usize) -> Arc<JetSpace> {
        let mut cache = SPACES.lock().unwrap();
        cache.entry(nvars).or_insert_with(|| Arc::new(JetSpace::build(nvars))).clone()
    }

    fn build(nvars: usize) -> JetSpace {
        let mut monomials: Vec<Vec<u8>> = vec![vec![0u8; nvars]];
        // Enumerate degree-by-degree so indices are sorted by total degree.
        for deg in 1..=MAX_ORDER {
            let mut level: Vec<Vec<u8>> = Vec::new();
            let mut current = vec![0u8; nvars];
            enumerate_degree(&mut current, 0, deg as u8, &mut level);
            monomials.extend(level);
        }
        let degree: Vec<u8> = monomials.iter().map(|m| m.iter().sum()).collect();
        let index: HashMap<Vec<u8>, usize> =
            monomials.iter().enumerate().map(|(i, m)| (m.clone(), i)).collect();

        let mut products = Vec::new();
        for (i, mi) in monomials.iter().enumerate() {
            for (j, mj) in monomials.iter().enumerate() {
                if degree[i] + degree[j] > MAX_ORDER as u8 {
                    continue;
                }
                let sum: Vec<u8> = mi.iter().zip(mj).map(|(a, b)| a + b).collect();
                let k = index[&sum];
                products.push((i as u32, j as u32, k as u32));
            }
        }

        let mut shift_up = vec![vec![None; monomials.len()]; nvars];
        for v in 0..nvars {
            for (i, m) in monomials.iter().enumerate() {
                if degree[i] < MAX_ORDER as u8 {
                    let mut up = m.clone();
                    up[v] += 1;
                    shift_up[v][i] = Some(index[&up] as u32);
                }
            }
        }

        JetSpace { nvars, monomials, degree, products, shift_up, index }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    /// Number of stored coefficients.
    pub fn len(&self) -> usize {
        self.monomials.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn idx(&self, multi: &[u8]) -> usize {
        *self.index.get(multi).unwrap_or_else(|| panic!("multi-index {multi:?} out of range"))
    }
}

fn enumerate_degree(current: &mut Vec<u8>, var: usize, remaining: u8, out: &mut Vec<Vec<u8>>) {
    if current.is_empty() {
        return; // zero variables: only the constant monomial exists
    }
    if var == current.len() - 1 {
        current[var] = remaining;
        out.push(current.clone());
        current[var] = 0;
        return;
    }
    for d in (0..=remaining).rev() {
        current[var] = d;
        enumerate_degree(current, var + 1, remaining - d, out);
    }
    current[var] = 0;
}

/// Scalar value plus truncated Taylor coefficients in `n` seed directions.
#[derive(Clone)]
pub struct Jet {
    space: Arc<JetSpace>,
    order: usize,
    coeffs: Vec<f64>,
}

impl std::fmt::Debug for Jet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Jet")
            .field("value", &self.value())
            .field("order", &self.order)
            .field("nvars", &self.space.nvars)
            .finish()
    }
}

impl Jet {
    /// A jet with no dependence on any seed direction.
    pub fn constant_in(space: &Arc<JetSpace>, value: f64) -> Jet {
        let mut coeffs = vec![0.0; space.len()];
        coeffs[0] = value;
        Jet { space: space.clone(), order: MAX_ORDER, coeffs }
    }

    /// The coordinate function of seed direction `var`, valued `value` at the
    /// expansion point.
    pub fn variable(space: &Arc<JetSpace>, var: usize, value: f64) -> Jet {
        assert!(var < space.nvars, "seed direction {var} out of range for {} variables", space.nvars);
        let mut coeffs = vec![0.0; space.len()];
        coeffs[0] = value;
        let mut e = vec![0u8; space.nvars];
        e[var] = 1;
        coeffs[space.idx(&e)] = 1.0;
        Jet { space: space.clone(), order: MAX_ORDER, coeffs }
    }

    /// A constant jet in the same space as `self`.
    pub fn constant_like(&self, value: f64) -> Jet {
        Jet::constant_in(&self.space, value)
    }

    pub fn space(&self) -> &Arc<JetSpace> {
        &self.space
    }

    /// Trusted truncation order of this jet.
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    fn check_order(&self, needed: usize) {
        assert!(
            needed <= self.order,
            "requested an order-{needed} coefficient from an order-{} jet",
            self.order
        );
    }

    /// First partial derivative along seed `i`.
    pub fn d1(&self, i: usize) -> f64 {
        self.check_order(1);
        let mut m = vec![0u8; self.space.nvars];
        m[i] = 1;
        self.coeffs[self.space.idx(&m)]
    }

    /// Second partial derivative `d^2 f / (dx_i dx_j)`.
    pub fn d2(&self, i: usize, j: usize) -> f64 {
        self.check_order(2);
        let mut m = vec![0u8; self.space.nvars];
        m[i] += 1;
        m[j] += 1;
        let factorial = if i == j { 2.0 } else { 1.0 };
        self.coeffs[self.space.idx(&m)] * factorial
    }

    /// Third partial derivative `d^3 f / (dx_i dx_j dx_k)`.
    pub fn d3(&self, i: usize, j: usize, k: usize) -> f64 {
        self.check_order(3);
        let mut m = vec![0u8; self.space.nvars];
        m[i] += 1;
        m[j] += 1;
        m[k] += 1;
        let mut factorial = 1.0;
        for &e in m.iter() {
            factorial *= match e {
                2 => 2.0,
                3 => 6.0,
                _ => 1.0,
            };
        }
        self.coeffs[self.space.idx(&m)] * factorial
    }

    /// Gradient with respect to all seed directions.
    pub fn gradient(&self) -> Vec<f64> {
        (0..self.space.nvars).map(|i| self.d1(i)).collect()
    }

    /// The jet of `df/dx_i`, trusted to one order less.
    pub fn partial(&self, i: usize) -> Jet {
        self.check_order(1);
        let space = &self.space;
        let mut coeffs = vec![0.0; space.len()];
        for (idx, m) in space.monomials.iter().enumerate() {
            if space.degree[idx] as usize >= self.order {
                continue;
            }
            if let Some(up) = space.shift_up[i][idx] {
                coeffs[idx] = self.coeffs[up as usize] * f64::from(m[i] + 1);
            }
        }
        Jet { space: space.clone(), order: self.order - 1, coeffs }
    }

    fn assert_same_space(&self, other: &Jet) {
        assert_eq!(
            self.space.nvars, other.space.nvars,
            "jet arithmetic across different seed spaces"
        );
    }

    /// Composition with a univariate function given its derivatives at
    /// `self.value()`: `derivs[k] = f^(k)(value)`.
    fn compose1(&self, derivs: [f64; MAX_ORDER + 1]) -> Jet {
        let mut w = self.clone();
        w.coeffs[0] = 0.0;
        let mut result = self.constant_like(derivs[0]);
        result.order = self.order;
        let mut w_pow = w.clone();
        let mut factorial = 1.0;
        for k in 1..=self.order {
            factorial *= k as f64;
            result = &result + &(&w_pow * (derivs[k] / factorial));
            if k < self.order {
                w_pow = &w_pow * &w;
            }
        }
        result
    }

    pub fn exp(&self) -> Jet {
        let e = self.value().exp();
        self.compose1([e, e, e, e])
    }

    pub fn ln(&self) -> Jet {
        let v = self.value();
        self.compose1([v.ln(), 1.0 / v, -1.0 / (v * v), 2.0 / (v * v * v)])
    }

    pub fn sqrt(&self) -> Jet {
        let v = self.value();
        let s = v.sqrt();
        self.compose1([s, 0.5 / s, -0.25 / (s * v), 0.375 / (s * v * v)])
    }

    pub fn sin(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        self.compose1([s, c, -s, -c])
    }

    pub fn cos(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        self.compose1([c, -s, -c, s])
    }

    /// `self^p` for real `p`; requires a positive value part.
    pub fn powf(&self, p: f64) -> Jet {
        let v = self.value();
        self.compose1([
            v.powf(p),
            p * v.powf(p - 1.0),
            p * (p - 1.0) * v.powf(p - 2.0),
            p * (p - 1.0) * (p - 2.0) * v.powf(p - 3.0),
        ])
    }

    pub fn powi(&self, n: i32) -> Jet {
        match n {
            0 => self.constant_like(1.0),
            1 => self.clone(),
            2 => self * self,
            _ => {
                let v = self.value();
                let p = f64::from(n);
                self.compose1([
                    v.powi(n),
                    p * v.powi(n - 1),
                    p * (p - 1.0) * v.powi(n - 2),
                    p * (p - 1.0) * (p - 2.0) * v.powi(n - 3),
                ])
            }
        }
    }

    pub fn recip(&self) -> Jet {
        let v = self.value();
        let v2 = v * v;
        self.compose1([1.0 / v, -1.0 / v2, 2.0 / (v2 * v), -6.0 / (v2 * v2)])
    }
}

impl Add for &Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        self.assert_same_space(rhs);
        let order = self.order.min(rhs.order);
        let coeffs = self
            .coeffs
            .iter()
            .zip(&rhs.coeffs)
            .enumerate()
            .map(|(k, (a, b))| if self.space.degree[k] as usize <= order { a + b } else { 0.0 })
            .collect();
        Jet { space: self.space.clone(), order, coeffs }
    }
}

impl Sub for &Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        self.assert_same_space(rhs);
        let order = self.order.min(rhs.order);
        let coeffs = self
            .coeffs
            .iter()
            .zip(&rhs.coeffs)
            .enumerate()
            .map(|(k, (a, b))| if self.space.degree[k] as usize <= order { a - b } else { 0.0 })
            .collect();
        Jet { space: self.space.clone(), order, coeffs }
    }
}

impl Mul for &Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        self.assert_same_space(rhs);
        let order = self.order.min(rhs.order);
        let space = &self.space;
        let mut coeffs = vec![0.0; space.len()];
        for &(i, j, k) in &space.products {
            if space.degree[k as usize] as usize <= order {
                coeffs[k as usize] += self.coeffs[i as usize] * rhs.coeffs[j as usize];
            }
        }
        Jet { space: space.clone(), order, coeffs }
    }
}

impl Div for &Jet {
    type Output = Jet;
    fn div(self, rhs: &Jet) -> Jet {
        self * &rhs.recip()
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        let mut out = self.clone();
        for c in &mut out.coeffs {
            *c = -*c;
        }
        out
    }
}

macro_rules! forward_binop_owned {
    ($trait:ident, $method:ident) => {
        impl $trait<Jet> for Jet {
            type Output = Jet;
            fn $method(self, rhs: Jet) -> Jet {
                $trait::$method(&self, &rhs)
            }
        }
        impl $trait<&Jet> for Jet {
            type Output = Jet;
            fn $method(self, rhs: &Jet) -> Jet {
                $trait::$method(&self, rhs)
            }
        }
        impl $trait<Jet> for &Jet {
            type Output = Jet;
            fn $method(self, rhs: Jet) -> Jet {
                $trait::$method(self, &rhs)
            }
        }
    };
}

forward_binop_owned!(Add, add);
forward_binop_owned!(Sub, sub);
forward_binop_owned!(Mul, mul);
forward_binop_owned!(Div, div);

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        -&self
    }
}

impl Mul<f64> for &Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        let mut out = self.clone();
        for c in &mut out.coeffs {
            *c *= rhs;
        }
        out
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        &self * rhs
    }
}

impl Mul<&Jet> for f64 {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        rhs * self
    }
}

impl Mul<Jet> for f64 {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        &rhs * self
    }
}

impl Div<f64> for &Jet {
    type Output = Jet;
    fn div(self, rhs: f64) -> Jet {
        self * (1.0 / rhs)
    }
}

impl Div<f64> for Jet {
    type Output = Jet;
    fn div(self, rhs: f64) -> Jet {
        &self * (1.0 / rhs)
    }
}

impl Add<f64> for &Jet {
    type Output = Jet;
    fn add(self, rhs: f64) -> Jet {
        let mut out = self.clone();
        out.coeffs[0] += rhs;
        out
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(self, rhs: f64) -> Jet {
        &self + rhs
    }
}

impl Add<Jet> for f64 {
    type Output = Jet;
    fn add(self, rhs: Jet) -> Jet {
        &rhs + self
    }
}

impl Sub<f64> for &Jet {
    type Output = Jet;
    fn sub(self, rhs: f64) -> Jet {
        self + (-rhs)
    }
}

impl Sub<f64> for Jet {
    type Output = Jet;
    fn sub(self, rhs: f64) -> Jet {
        &self + (-rhs)
    }
}

impl Sub<Jet> for f64 {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        &(-&rhs) + self
    }
}

/// Seed the coordinates `x` as jet variables 0..n with the given order.
pub fn seed_coords(x: &[f64], order: usize) -> Vec<Jet> {
    assert!(order <= MAX_ORDER);
    let space = JetSpace::get(x.len());
    x.iter()
        .enumerate()
        .map(|(i, &v)| {
            let mut j = Jet::variable(&space, i, v);
            j.order = order;
            for (idx, c) in j.coeffs.iter_mut().enumerate() {
                if space.degree[idx] as usize > order {
                    *c = 0.0;
                }
            }
            j
        })
        .collect()
}

/// Seed `x` as variables `0..m` and `xi` as variables `m..2m` of one shared
/// `2m`-variable space, for differentiating along the tangent bundle.
pub fn seed_bundle_coords(x: &[f64], xi: &[f64], order: usize) -> (Vec<Jet>, Vec<Jet>) {
    assert_eq!(x.len(), xi.len());
    assert!(order <= MAX_ORDER);
    let m = x.len();
    let space = JetSpace::get(2 * m);
    let mk = |var: usize, v: f64| {
        let mut j = Jet::variable(&space, var, v);
        j.order = order;
        j
    };
    let xj = x.iter().enumerate().map(|(i, &v)| mk(i, v)).collect();
    let xij = xi.iter().enumerate().map(|(i, &v)| mk(m + i, v)).collect();
    (xj, xij)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn constant_and_variable_basics() {
        let space = JetSpace::get(2);
        let c = Jet::constant_in(&space, 3.5);
        assert_eq!(c.value(), 3.5);
        assert_eq!(c.d1(0), 0.0);
        let x = Jet::variable(&space, 0, 2.0);
        assert_eq!(x.value(), 2.0);
        assert_eq!(x.d1(0), 1.0);
        assert_eq!(x.d1(1), 0.0);
    }

    #[test]
    fn exp_series_coefficients() {
        // exp around 0: all derivatives 1
        let x = seed_coords(&[0.0], 3);
        let e = x[0].exp();
        assert_relative_eq!(e.value(), 1.0);
        assert_relative_eq!(e.d1(0), 1.0);
        assert_relative_eq!(e.d2(0, 0), 1.0);
        assert_relative_eq!(e.d3(0, 0, 0), 1.0);
    }

    #[test]
    fn product_leibniz_exact() {
        // f = sin(x) * exp(y)
        let s = seed_coords(&[0.7, -0.3], 3);
        let f = s[0].sin() * s[1].exp();
        let (x, y) = (0.7_f64, -0.3_f64);
        assert_relative_eq!(f.value(), x.sin() * y.exp(), max_relative = 1e-14);
        assert_relative_eq!(f.d1(0), x.cos() * y.exp(), max_relative = 1e-14);
        assert_relative_eq!(f.d1(1), x.sin() * y.exp(), max_relative = 1e-14);
        assert_relative_eq!(f.d2(0, 1), x.cos() * y.exp(), max_relative = 1e-14);
        assert_relative_eq!(f.d2(0, 0), -x.sin() * y.exp(), max_relative = 1e-14);
        assert_relative_eq!(f.d3(0, 0, 1), -x.sin() * y.exp(), max_relative = 1e-14);
        assert_relative_eq!(f.d3(0, 1, 1), x.cos() * y.exp(), max_relative = 1e-14);
    }

    #[test]
    fn quotient_and_powf() {
        let s = seed_coords(&[1.3], 3);
        let f = (&s[0] * &s[0] + 1.0).powf(0.5);
        // f = sqrt(1+x^2), f' = x/sqrt(1+x^2)
        let x = 1.3_f64;
        let r = (1.0 + x * x).sqrt();
        assert_relative_eq!(f.value(), r, max_relative = 1e-14);
        assert_relative_eq!(f.d1(0), x / r, max_relative = 1e-14);
        let g = &s[0] / &(&s[0] + 2.0);
        // g = x/(x+2), g' = 2/(x+2)^2
        assert_relative_eq!(g.d1(0), 2.0 / ((x + 2.0) * (x + 2.0)), max_relative = 1e-14);
    }

    #[test]
    fn partial_shifts_coefficients() {
        let s = seed_coords(&[0.4, 1.1], 3);
        let f = &s[0] * &(&s[1] * &s[1]); // x y^2
        let fx = f.partial(0); // y^2, order 2
        assert_eq!(fx.order(), 2);
        assert_relative_eq!(fx.value(), 1.1 * 1.1, max_relative = 1e-14);
        assert_relative_eq!(fx.d1(1), 2.2, max_relative = 1e-14);
        assert_relative_eq!(fx.d2(1, 1), 2.0, max_relative = 1e-14);
    }

    #[test]
    #[should_panic(expected = "order-3")]
    fn reading_beyond_order_panics() {
        let s = seed_coords(&[0.4], 2);
        let _ = s[0].d3(0, 0, 0);
    }

    #[test]
    fn zero_variable_space() {
        let space = JetSpace::get(0);
        let c = Jet::constant_in(&space, 2.0);
        assert_eq!((&c * &c).value(), 4.0);
    }

    fn fd2_central(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
        (f(x + h) - f(x - h)) / (2.0 * h)
    }

    proptest! {
        // Jet derivatives of a composite function agree with central finite
        // differences of the same function to O(h^2).
        #[test]
        fn jet_matches_finite_differences(a in -0.8_f64..0.8, b in -0.8_f64..0.8) {
            let func = |x: f64, y: f64| (x * y).sin() + (1.0 + x * x + y * y).ln() * (0.3 * y).exp();
            let jet_func = |s: &[Jet]| {
                (&s[0] * &s[1]).sin() + (&s[0] * &s[0] + &s[1] * &s[1] + 1.0).ln() * (&s[1] * 0.3).exp()
            };
            let s = seed_coords(&[a, b], 2);
            let f = jet_func(&s);
            let h = 1e-5;
            let fd_x = fd2_central(|x| func(x, b), a, h);
            let fd_y = fd2_central(|y| func(a, y), b, h);
            prop_assert!((f.d1(0) - fd_x).abs() < 1e-8 * (1.0 + fd_x.abs()));
            prop_assert!((f.d1(1) - fd_y).abs() < 1e-8 * (1.0 + fd_y.abs()));
            // mixed second derivative via nested differencing
            let fd_xy = fd2_central(|x| fd2_central(|y| func(x, y), b, 1e-4), a, 1e-4);
            prop_assert!((f.d2(0, 1) - fd_xy).abs() < 1e-5 * (1.0 + fd_xy.abs()));
        }

        // (f*g)' computed by jets equals f'g + fg' computed from separate jets.
        #[test]
        fn leibniz_rule_holds(a in -1.0_f64..1.0, b in -1.0_f64..1.0) {
            let s = seed_coords(&[a, b], 3);
            let f = (&s[0] + &(&s[1] * &s[1])).sin();
            let g = (&s[0] * &s[1] + 2.0).ln();
            let prod = &f * &g;
            for i in 0..2 {
                let expected = f.d1(i) * g.value() + f.value() * g.d1(i);
                prop_assert!((prod.d1(i) - expected).abs() <= 1e-12 * (1.0 + expected.abs()));
            }
        }
    }
}
