//! Smooth test fields: polynomial maps of the ambient position, trigonometric
//! functions of the chart parameters, and the seeded generator for random
//! fields used by the integral identities.
//!
//! Fields are kept in analytic form so they can be evaluated on Taylor
//! expansions and differentiated exactly. Sampled values on a grid are
//! produced by the operators.

use crate::taylor::Scalar;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// Polynomial map `ℝ^in → ℝ^out` of degree at most two.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolyMap {
    pub constant: Vec<f64>,
    /// `linear[j][a]`: coefficient of `x_a` in output `j`.
    pub linear: Vec<Vec<f64>>,
    /// `quadratic[j][a][b]` for `a <= b`: coefficient of `x_a x_b`.
    pub quadratic: Vec<Vec<Vec<f64>>>,
}

impl PolyMap {
    pub fn zeros(in_dim: usize, out_dim: usize) -> PolyMap {
        PolyMap {
            constant: vec![0.0; out_dim],
            linear: vec![vec![0.0; in_dim]; out_dim],
            quadratic: vec![vec![vec![0.0; in_dim]; in_dim]; out_dim],
        }
    }

    /// Constant map with the given value.
    pub fn constant(in_dim: usize, value: Vec<f64>) -> PolyMap {
        let mut p = PolyMap::zeros(in_dim, value.len());
        p.constant = value;
        p
    }

    /// Scalar coordinate function `x ↦ x_a`.
    pub fn coordinate(in_dim: usize, a: usize) -> PolyMap {
        let mut p = PolyMap::zeros(in_dim, 1);
        p.linear[0][a] = 1.0;
        p
    }

    pub fn in_dim(&self) -> usize {
        self.linear.first().map_or(0, Vec::len)
    }

    pub fn out_dim(&self) -> usize {
        self.constant.len()
    }

    pub fn eval<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        let zero = x[0].konst(0.0);
        (0..self.out_dim())
            .map(|j| {
                let mut acc = zero.konst(self.constant[j]);
                for (a, xa) in x.iter().enumerate() {
                    let c = self.linear[j][a];
                    if c != 0.0 {
                        acc = acc + xa.clone() * c;
                    }
                    for (b, xb) in x.iter().enumerate().skip(a) {
                        let q = self.quadratic[j][a][b];
                        if q != 0.0 {
                            acc = acc + xa.clone() * xb.clone() * q;
                        }
                    }
                }
                acc
            })
            .collect()
    }

    /// Random coefficients uniform in `[-scale, scale]`.
    pub fn random(rng: &mut ChaCha8Rng, in_dim: usize, out_dim: usize, scale: f64) -> PolyMap {
        let mut p = PolyMap::zeros(in_dim, out_dim);
        for j in 0..out_dim {
            p.constant[j] = rng.gen_range(-scale..=scale);
            for a in 0..in_dim {
                p.linear[j][a] = rng.gen_range(-scale..=scale);
                for b in a..in_dim {
                    p.quadratic[j][a][b] = rng.gen_range(-scale..=scale);
                }
            }
        }
        p
    }
}

/// `Σ amp · sin(⟨freq, p⟩ + phase)` in the chart parameters.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamTrig {
    pub terms: Vec<TrigTerm>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrigTerm {
    pub amp: f64,
    pub freq: Vec<f64>,
    pub phase: f64,
}

impl ParamTrig {
    /// `sin(p_axis)`.
    pub fn sin_axis(m: usize, axis: usize) -> ParamTrig {
        let mut freq = vec![0.0; m];
        freq[axis] = 1.0;
        ParamTrig {
            terms: vec![TrigTerm {
                amp: 1.0,
                freq,
                phase: 0.0,
            }],
        }
    }

    pub fn eval<S: Scalar>(&self, p: &[S]) -> S {
        let mut acc = p[0].konst(0.0);
        for t in &self.terms {
            let mut arg = p[0].konst(t.phase);
            for (pi, &f) in p.iter().zip(&t.freq) {
                if f != 0.0 {
                    arg = arg + pi.clone() * f;
                }
            }
            acc = acc + arg.sin() * t.amp;
        }
        acc
    }
}

/// A smooth scalar function on the surface.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum ScalarFieldSpec {
    Constant(f64),
    /// Polynomial in the ambient coordinates (smooth on every closed surface).
    Ambient(PolyMap),
    /// Trigonometric in the chart parameters (smooth on the torus charts only).
    Param(ParamTrig),
}

impl ScalarFieldSpec {
    pub fn eval<S: Scalar>(&self, x: &[S], p: &[S]) -> S {
        match self {
            ScalarFieldSpec::Constant(c) => p[0].konst(*c),
            ScalarFieldSpec::Ambient(poly) => poly.eval(x).swap_remove(0),
            ScalarFieldSpec::Param(t) => t.eval(p),
        }
    }
}

/// A normal vector field along the surface, in ambient coordinates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum NormalFieldSpec {
    /// `c · h`.
    MeanCurvature(f64),
    /// `c · N`, the normal part of `∂t`.
    VerticalNormal(f64),
    /// Normal projection of a polynomial ambient vector field.
    Projected(PolyMap),
}

/// Seeded generator of low-order smooth random fields.
pub struct FieldGenerator {
    rng: ChaCha8Rng,
    dim: usize,
}

impl FieldGenerator {
    pub fn new(seed: u64, ambient_dim: usize) -> FieldGenerator {
        FieldGenerator {
            rng: ChaCha8Rng::seed_from_u64(seed),
            dim: ambient_dim,
        }
    }

    pub fn scalar(&mut self) -> ScalarFieldSpec {
        ScalarFieldSpec::Ambient(PolyMap::random(&mut self.rng, self.dim, 1, 1.0))
    }

    pub fn normal(&mut self) -> NormalFieldSpec {
        NormalFieldSpec::Projected(self.ambient())
    }

    /// Raw ambient vector field (used for variations).
    pub fn ambient(&mut self) -> PolyMap {
        PolyMap::random(&mut self.rng, self.dim, self.dim, 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::taylor::Taylor;

    #[test]
    fn polymap_matches_direct_evaluation() {
        let mut g = FieldGenerator::new(7, 3);
        let p = g.ambient();
        let x = [0.3, -0.2, 0.9];
        let v = p.eval(&x);
        for j in 0..3 {
            let mut want = p.constant[j];
            for a in 0..3 {
                want += p.linear[j][a] * x[a];
                for b in a..3 {
                    want += p.quadratic[j][a][b] * x[a] * x[b];
                }
            }
            assert!((v[j] - want).abs() < 1e-15);
        }
    }

    #[test]
    fn generator_is_reproducible() {
        let a = FieldGenerator::new(42, 5).ambient();
        let b = FieldGenerator::new(42, 5).ambient();
        assert_eq!(a, b);
        let c = FieldGenerator::new(43, 5).ambient();
        assert_ne!(a, c);
    }

    #[test]
    fn param_trig_derivative() {
        let f = ParamTrig::sin_axis(2, 1);
        let p = Taylor::variables(&[0.1, 0.4], 2);
        let v = f.eval(&p);
        assert!((v.value() - 0.4_f64.sin()).abs() < 1e-15);
        assert!((v.d1(1) - 0.4_f64.cos()).abs() < 1e-15);
        assert!(v.d1(0).abs() < 1e-15);
    }
}
