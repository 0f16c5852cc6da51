//! Truncated multivariate Taylor arithmetic.
//!
//! A [`Taylor`] value is a polynomial in `nvars` variables whose coefficients
//! up to total degree `deg` are exact Taylor coefficients of some smooth
//! function at a base point. Arithmetic and the elementary functions used by
//! the catalog charts propagate the expansion, so evaluating a chart on
//! `Taylor` variables yields its derivative jet without truncation error.
//!
//! Differentiating an expansion lowers its valid degree by one. Binary
//! operations truncate to the smaller of the two degrees. Coefficients are
//! stored in graded order, so the layout of degree `d` is a prefix of the
//! layout of degree `d + 1` in the same number of variables.

use smallvec::SmallVec;
use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};
use std::sync::{Mutex, OnceLock};

type Exps = SmallVec<[u8; 4]>;
type Coeffs = SmallVec<[f64; 21]>;

/// Monomial ordering and precomputed product/derivative tables.
pub struct Layout {
    nvars: usize,
    deg: usize,
    exps: Vec<Exps>,
    index: HashMap<Exps, usize>,
    mul: Vec<(u16, u16, u16)>,
    // deriv[v][k] = (source index, factor) producing coefficient k of d/dx_v
    deriv: Vec<Vec<(usize, f64)>>,
    lower: Option<&'static Layout>,
}

impl fmt::Debug for Layout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Layout(nvars={}, deg={})", self.nvars, self.deg)
    }
}

fn monomials(nvars: usize, total: usize) -> Vec<Exps> {
    fn rec(nvars: usize, left: usize, cur: &mut Exps, out: &mut Vec<Exps>) {
        if cur.len() + 1 == nvars {
            cur.push(left as u8);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for e in (0..=left).rev() {
            cur.push(e as u8);
            rec(nvars, left - e, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(nvars, total, &mut Exps::new(), &mut out);
    out
}

impl Layout {
    fn build(nvars: usize, deg: usize, lower: Option<&'static Layout>) -> Layout {
        let mut exps = Vec::new();
        for d in 0..=deg {
            exps.extend(monomials(nvars, d));
        }
        let index: HashMap<Exps, usize> = exps
            .iter()
            .enumerate()
            .map(|(i, e)| (e.clone(), i))
            .collect();
        let mut mul = Vec::new();
        for (i, a) in exps.iter().enumerate() {
            for (j, b) in exps.iter().enumerate() {
                let s: Exps = a.iter().zip(b).map(|(x, y)| x + y).collect();
                if let Some(&k) = index.get(&s) {
                    mul.push((i as u16, j as u16, k as u16));
                }
            }
        }
        let mut deriv = Vec::with_capacity(nvars);
        if let Some(low) = lower {
            for v in 0..nvars {
                let map = low
                    .exps
                    .iter()
                    .map(|e| {
                        let mut up = e.clone();
                        up[v] += 1;
                        (index[&up], up[v] as f64)
                    })
                    .collect();
                deriv.push(map);
            }
        }
        Layout {
            nvars,
            deg,
            exps,
            index,
            mul,
            deriv,
            lower,
        }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn deg(&self) -> usize {
        self.deg
    }

    pub fn len(&self) -> usize {
        self.exps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exps.is_empty()
    }

    /// Index of a multi-index, if it is within this layout's degree.
    pub fn index_of(&self, exps: &[u8]) -> Option<usize> {
        self.index.get(&Exps::from_slice(exps)).copied()
    }

    /// Multi-indices in storage order.
    pub fn monomials(&self) -> &[SmallVec<[u8; 4]>] {
        &self.exps
    }
}

/// Shared layout for `nvars` variables truncated at degree `deg`.
pub fn layout(nvars: usize, deg: usize) -> &'static Layout {
    static CACHE: OnceLock<Mutex<HashMap<(usize, usize), &'static Layout>>> = OnceLock::new();
    assert!(nvars >= 1, "at least one variable");
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(l) = cache.lock().unwrap().get(&(nvars, deg)) {
        return l;
    }
    let lower = if deg == 0 {
        None
    } else {
        Some(layout(nvars, deg - 1))
    };
    let mut guard = cache.lock().unwrap();
    if let Some(l) = guard.get(&(nvars, deg)) {
        return l;
    }
    let built: &'static Layout = Box::leak(Box::new(Layout::build(nvars, deg, lower)));
    guard.insert((nvars, deg), built);
    built
}

/// Truncated Taylor expansion of a scalar function.
#[derive(Clone)]
pub struct Taylor {
    layout: &'static Layout,
    c: Coeffs,
}

impl fmt::Debug for Taylor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Taylor(deg={}, {:?})", self.layout.deg, &self.c[..])
    }
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

impl Taylor {
    pub fn constant(layout: &'static Layout, value: f64) -> Taylor {
        let mut c: Coeffs = SmallVec::from_elem(0.0, layout.len());
        c[0] = value;
        Taylor { layout, c }
    }

    /// The coordinate function `x_var` expanded at `value`.
    pub fn variable(layout: &'static Layout, var: usize, value: f64) -> Taylor {
        let mut t = Taylor::constant(layout, value);
        if layout.deg >= 1 {
            let mut e: Exps = SmallVec::from_elem(0, layout.nvars);
            e[var] = 1;
            t.c[layout.index[&e]] = 1.0;
        }
        t
    }

    /// Independent variables expanded at `point`.
    pub fn variables(point: &[f64], deg: usize) -> Vec<Taylor> {
        let l = layout(point.len(), deg);
        point
            .iter()
            .enumerate()
            .map(|(i, &v)| Taylor::variable(l, i, v))
            .collect()
    }

    /// Builds an expansion from raw coefficients in layout order.
    pub fn from_coeffs(layout: &'static Layout, coeffs: &[f64]) -> Taylor {
        assert_eq!(coeffs.len(), layout.len());
        Taylor {
            layout,
            c: SmallVec::from_slice(coeffs),
        }
    }

    pub fn layout(&self) -> &'static Layout {
        self.layout
    }

    pub fn deg(&self) -> usize {
        self.layout.deg
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.c
    }

    /// Taylor coefficient of the given multi-index (zero if beyond the degree).
    pub fn coeff(&self, exps: &[u8]) -> f64 {
        self.layout.index_of(exps).map_or(0.0, |i| self.c[i])
    }

    /// Partial derivative `∂^α f` at the base point.
    pub fn partial(&self, exps: &[u8]) -> f64 {
        let scale: f64 = exps.iter().map(|&e| factorial(e as usize)).product();
        self.coeff(exps) * scale
    }

    /// First partial derivative at the base point.
    pub fn d1(&self, var: usize) -> f64 {
        let mut e: Exps = SmallVec::from_elem(0, self.layout.nvars);
        e[var] = 1;
        self.coeff(&e)
    }

    /// Second partial derivative at the base point.
    pub fn d2(&self, a: usize, b: usize) -> f64 {
        let mut e: Exps = SmallVec::from_elem(0, self.layout.nvars);
        e[a] += 1;
        e[b] += 1;
        self.partial(&e)
    }

    /// Expansion of `∂f/∂x_var`, one degree lower.
    pub fn d(&self, var: usize) -> Taylor {
        let low = self
            .layout
            .lower
            .expect("cannot differentiate a degree-0 expansion");
        let c = self.layout.deriv[var]
            .iter()
            .map(|&(src, fac)| self.c[src] * fac)
            .collect();
        Taylor { layout: low, c }
    }

    /// Truncates to degree `deg` (no-op if already lower).
    pub fn truncate(&self, deg: usize) -> Taylor {
        if deg >= self.layout.deg {
            return self.clone();
        }
        let l = layout(self.layout.nvars, deg);
        Taylor {
            layout: l,
            c: SmallVec::from_slice(&self.c[..l.len()]),
        }
    }

    /// A constant with the same layout as `self`.
    pub fn konst(&self, v: f64) -> Taylor {
        Taylor::constant(self.layout, v)
    }

    fn small<'a>(a: &'a Taylor, b: &'a Taylor) -> &'static Layout {
        debug_assert_eq!(a.layout.nvars, b.layout.nvars);
        if a.layout.deg <= b.layout.deg {
            a.layout
        } else {
            b.layout
        }
    }

    // f(a0 + δ) = Σ f^(k)(a0)/k! δ^k, where δ is nilpotent of order deg+1.
    fn compose(&self, derivs: impl Fn(usize) -> f64) -> Taylor {
        let mut delta = self.clone();
        delta.c[0] = 0.0;
        let mut out = self.konst(derivs(0));
        let mut pow = delta.clone();
        for k in 1..=self.layout.deg {
            let w = derivs(k) / factorial(k);
            for (o, p) in out.c.iter_mut().zip(&pow.c) {
                *o += w * p;
            }
            if k < self.layout.deg {
                pow = &pow * &delta;
            }
        }
        out
    }

    pub fn sin(&self) -> Taylor {
        let (s, c) = self.c[0].sin_cos();
        self.compose(|k| match k % 4 {
            0 => s,
            1 => c,
            2 => -s,
            _ => -c,
        })
    }

    pub fn cos(&self) -> Taylor {
        let (s, c) = self.c[0].sin_cos();
        self.compose(|k| match k % 4 {
            0 => c,
            1 => -s,
            2 => -c,
            _ => s,
        })
    }

    pub fn sqrt(&self) -> Taylor {
        let a = self.c[0];
        self.compose(|k| {
            let mut coef = 1.0;
            for j in 0..k {
                coef *= 0.5 - j as f64;
            }
            coef * a.powf(0.5 - k as f64)
        })
    }

    pub fn recip(&self) -> Taylor {
        let a = self.c[0];
        self.compose(|k| {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            sign * factorial(k) / a.powi(k as i32 + 1)
        })
    }
}

impl<'a> Add<&'a Taylor> for &'a Taylor {
    type Output = Taylor;
    fn add(self, rhs: &Taylor) -> Taylor {
        let l = Taylor::small(self, rhs);
        let c = self.c[..l.len()]
            .iter()
            .zip(&rhs.c[..l.len()])
            .map(|(a, b)| a + b)
            .collect();
        Taylor { layout: l, c }
    }
}

impl<'a> Sub<&'a Taylor> for &'a Taylor {
    type Output = Taylor;
    fn sub(self, rhs: &Taylor) -> Taylor {
        let l = Taylor::small(self, rhs);
        let c = self.c[..l.len()]
            .iter()
            .zip(&rhs.c[..l.len()])
            .map(|(a, b)| a - b)
            .collect();
        Taylor { layout: l, c }
    }
}

impl<'a> Mul<&'a Taylor> for &'a Taylor {
    type Output = Taylor;
    fn mul(self, rhs: &Taylor) -> Taylor {
        let l = Taylor::small(self, rhs);
        let mut c: Coeffs = SmallVec::from_elem(0.0, l.len());
        for &(i, j, k) in &l.mul {
            c[k as usize] += self.c[i as usize] * rhs.c[j as usize];
        }
        Taylor { layout: l, c }
    }
}

impl<'a> Div<&'a Taylor> for &'a Taylor {
    type Output = Taylor;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, rhs: &Taylor) -> Taylor {
        self * &rhs.recip()
    }
}

impl Neg for &Taylor {
    type Output = Taylor;
    fn neg(self) -> Taylor {
        Taylor {
            layout: self.layout,
            c: self.c.iter().map(|a| -a).collect(),
        }
    }
}

impl Add<f64> for &Taylor {
    type Output = Taylor;
    fn add(self, rhs: f64) -> Taylor {
        let mut t = self.clone();
        t.c[0] += rhs;
        t
    }
}

impl Sub<f64> for &Taylor {
    type Output = Taylor;
    fn sub(self, rhs: f64) -> Taylor {
        self + (-rhs)
    }
}

impl Mul<f64> for &Taylor {
    type Output = Taylor;
    fn mul(self, rhs: f64) -> Taylor {
        Taylor {
            layout: self.layout,
            c: self.c.iter().map(|a| a * rhs).collect(),
        }
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr<Taylor> for Taylor {
            type Output = Taylor;
            fn $m(self, rhs: Taylor) -> Taylor {
                (&self).$m(&rhs)
            }
        }
        impl<'a> $tr<&'a Taylor> for Taylor {
            type Output = Taylor;
            fn $m(self, rhs: &Taylor) -> Taylor {
                (&self).$m(rhs)
            }
        }
        impl<'a> $tr<Taylor> for &'a Taylor {
            type Output = Taylor;
            fn $m(self, rhs: Taylor) -> Taylor {
                self.$m(&rhs)
            }
        }
        impl $tr<f64> for Taylor {
            type Output = Taylor;
            fn $m(self, rhs: f64) -> Taylor {
                (&self).$m(rhs)
            }
        }
    };
}

forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl Div<Taylor> for Taylor {
    type Output = Taylor;
    fn div(self, rhs: Taylor) -> Taylor {
        &self / &rhs
    }
}

impl Neg for Taylor {
    type Output = Taylor;
    fn neg(self) -> Taylor {
        -&self
    }
}

impl AddAssign<&Taylor> for Taylor {
    fn add_assign(&mut self, rhs: &Taylor) {
        if rhs.layout.deg < self.layout.deg {
            *self = &*self + rhs;
        } else {
            for (a, b) in self.c.iter_mut().zip(&rhs.c) {
                *a += b;
            }
        }
    }
}

impl SubAssign<&Taylor> for Taylor {
    fn sub_assign(&mut self, rhs: &Taylor) {
        if rhs.layout.deg < self.layout.deg {
            *self = &*self - rhs;
        } else {
            for (a, b) in self.c.iter_mut().zip(&rhs.c) {
                *a -= b;
            }
        }
    }
}

/// Numeric type a chart can be evaluated in: plain `f64` or [`Taylor`].
pub trait Scalar:
    Clone
    + Send
    + Sync
    + fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
{
    /// A constant compatible with `self` (same expansion layout).
    fn konst(&self, v: f64) -> Self;
    fn value(&self) -> f64;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    fn sqrt(&self) -> Self;
    fn recip(&self) -> Self;
}

impl Scalar for f64 {
    fn konst(&self, v: f64) -> f64 {
        v
    }
    fn value(&self) -> f64 {
        *self
    }
    fn sin(&self) -> f64 {
        f64::sin(*self)
    }
    fn cos(&self) -> f64 {
        f64::cos(*self)
    }
    fn sqrt(&self) -> f64 {
        f64::sqrt(*self)
    }
    fn recip(&self) -> f64 {
        1.0 / *self
    }
}

impl Scalar for Taylor {
    fn konst(&self, v: f64) -> Taylor {
        Taylor::konst(self, v)
    }
    fn value(&self) -> f64 {
        self.c[0]
    }
    fn sin(&self) -> Taylor {
        Taylor::sin(self)
    }
    fn cos(&self) -> Taylor {
        Taylor::cos(self)
    }
    fn sqrt(&self) -> Taylor {
        Taylor::sqrt(self)
    }
    fn recip(&self) -> Taylor {
        Taylor::recip(self)
    }
}

/// Euclidean inner product of two expanded vectors.
pub fn tdot(a: &[Taylor], b: &[Taylor]) -> Taylor {
    let mut acc = &a[0] * &b[0];
    for (x, y) in a.iter().zip(b).skip(1) {
        acc += &(x * y);
    }
    acc
}

/// `a + s * b` componentwise.
pub fn taxpy(a: &[Taylor], s: &Taylor, b: &[Taylor]) -> Vec<Taylor> {
    a.iter().zip(b).map(|(x, y)| x + &(s * y)).collect()
}

pub fn tscale(s: &Taylor, v: &[Taylor]) -> Vec<Taylor> {
    v.iter().map(|x| s * x).collect()
}

pub fn tsub(a: &[Taylor], b: &[Taylor]) -> Vec<Taylor> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn tadd(a: &[Taylor], b: &[Taylor]) -> Vec<Taylor> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn tvalues(v: &[Taylor]) -> Vec<f64> {
    v.iter().map(Taylor::value).collect()
}

/// Componentwise partial derivative of an expanded vector.
pub fn td(v: &[Taylor], var: usize) -> Vec<Taylor> {
    v.iter().map(|x| x.d(var)).collect()
}

/// Inverse of a symmetric positive definite expanded matrix (Gauss–Jordan).
pub fn tinverse(a: &[Vec<Taylor>]) -> Vec<Vec<Taylor>> {
    let n = a.len();
    let zero = a[0][0].konst(0.0);
    let mut m: Vec<Vec<Taylor>> = a.to_vec();
    let mut inv: Vec<Vec<Taylor>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| zero.konst(if i == j { 1.0 } else { 0.0 }))
                .collect()
        })
        .collect();
    for col in 0..n {
        let piv = m[col][col].recip();
        for j in 0..n {
            m[col][j] = &m[col][j] * &piv;
            inv[col][j] = &inv[col][j] * &piv;
        }
        for row in 0..n {
            if row == col {
                continue;
            }
            let f = m[row][col].clone();
            for j in 0..n {
                let a1 = &f * &m[col][j];
                let b1 = &f * &inv[col][j];
                m[row][j] -= &a1;
                inv[row][j] -= &b1;
            }
        }
    }
    inv
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_is_graded_prefix() {
        let l3 = layout(2, 3);
        let l4 = layout(2, 4);
        assert_eq!(l3.len(), 10);
        assert_eq!(l4.len(), 15);
        assert_eq!(&l4.monomials()[..10], l3.monomials());
    }

    #[test]
    fn sin_cos_derivatives_match_closed_form() {
        let v = Taylor::variables(&[0.7, -0.3], 4);
        let f = (&v[0] * &v[1]).sin();
        // d/du sin(uv) = v cos(uv); d²/du dv = cos(uv) - uv sin(uv)
        let (u, w) = (0.7_f64, -0.3_f64);
        assert!((f.d1(0) - w * (u * w).cos()).abs() < 1e-14);
        assert!((f.d2(0, 1) - ((u * w).cos() - u * w * (u * w).sin())).abs() < 1e-14);
        // ∂⁴/∂u⁴ sin(uv) = v⁴ sin(uv)
        assert!((f.partial(&[4, 0]) - w.powi(4) * (u * w).sin()).abs() < 1e-13);
    }

    #[test]
    fn sqrt_and_recip_are_inverse_operations() {
        let v = Taylor::variables(&[1.3, 0.4], 4);
        let f = &(&v[0] * &v[0]) + &(&v[1] * 2.0) + 1.0;
        let s = f.sqrt();
        let back = &s * &s;
        for (a, b) in back.coeffs().iter().zip(f.coeffs()) {
            assert!((a - b).abs() < 1e-12);
        }
        let one = &f * &f.recip();
        assert!((one.value() - 1.0).abs() < 1e-14);
        assert!(one.coeffs()[1..].iter().all(|c| c.abs() < 1e-13));
    }

    #[test]
    fn derivative_lowers_degree() {
        let v = Taylor::variables(&[0.2, 0.1], 3);
        let f = &(&v[0] * &v[0]) * &v[1];
        let fu = f.d(0);
        assert_eq!(fu.deg(), 2);
        assert!((fu.value() - 2.0 * 0.2 * 0.1).abs() < 1e-15);
        assert!((fu.d1(1) - 0.4).abs() < 1e-15);
    }

    #[test]
    fn mixed_degree_products_truncate() {
        let v4 = Taylor::variables(&[0.5, 0.5], 4);
        let v2 = Taylor::variables(&[0.5, 0.5], 2);
        let p = &v4[0] * &v2[1];
        assert_eq!(p.deg(), 2);
    }

    #[test]
    fn inverse_of_expanded_matrix() {
        let v = Taylor::variables(&[0.3, 0.6], 3);
        let a = vec![
            vec![&v[0] + 2.0, v[1].clone()],
            vec![v[1].clone(), &(&v[0] * &v[0]) + 1.0],
        ];
        let inv = tinverse(&a);
        for i in 0..2 {
            for j in 0..2 {
                let mut s = &a[i][0] * &inv[0][j];
                s += &(&a[i][1] * &inv[1][j]);
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((s.value() - want).abs() < 1e-14);
                assert!(s.coeffs()[1..].iter().all(|c| c.abs() < 1e-13));
            }
        }
    }
}
