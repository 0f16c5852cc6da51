//! Parameter domains, tensor-product quadrature grids, and integration
//! against the induced area element.
//!
//! Periodic axes use the equispaced trapezoidal rule (spectrally accurate for
//! analytic periodic integrands). Non-periodic axes use Gauss–Legendre nodes,
//! which never touch the interval endpoints, so coordinate poles of polar
//! sphere charts are never sampled.

use crate::error::{invalid, GeomError, Result};
use serde::Serialize;
use std::f64::consts::PI;

/// Smallest per-axis resolution accepted by [`build_grid`].
pub const MIN_RESOLUTION: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub periodic: bool,
}

impl Axis {
    pub fn periodic(lo: f64, hi: f64) -> Axis {
        Axis {
            lo,
            hi,
            periodic: true,
        }
    }

    pub fn closed(lo: f64, hi: f64) -> Axis {
        Axis {
            lo,
            hi,
            periodic: false,
        }
    }

    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Product of intervals; periodic axes are half-open `[lo, hi)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParameterDomain {
    axes: Vec<Axis>,
}

impl ParameterDomain {
    pub fn new(axes: Vec<Axis>) -> Result<ParameterDomain> {
        if axes.is_empty() {
            return Err(invalid("parameter domain needs at least one axis"));
        }
        for (i, a) in axes.iter().enumerate() {
            if !(a.lo.is_finite() && a.hi.is_finite() && a.hi > a.lo) {
                return Err(invalid(format!("axis {i} has non-positive length")));
            }
        }
        Ok(ParameterDomain { axes })
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn coordinate_volume(&self) -> f64 {
        self.axes.iter().map(Axis::length).product()
    }

    /// Largest axis length, used to scale finite-difference steps.
    pub fn extent(&self) -> f64 {
        self.axes.iter().map(Axis::length).fold(0.0, f64::max)
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.axes.len()
            && self
                .axes
                .iter()
                .zip(p)
                .all(|(a, &x)| a.periodic || (x >= a.lo && x <= a.hi))
    }
}

/// One-dimensional rule along a single axis.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisRule {
    pub axis: Axis,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`, ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p0 = 1.0;
                p1 = z;
            }
            dp = nf * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

impl AxisRule {
    pub fn new(axis: Axis, n: usize) -> AxisRule {
        let len = axis.length();
        if axis.periodic {
            let h = len / n as f64;
            AxisRule {
                axis,
                nodes: (0..n).map(|i| axis.lo + h * i as f64).collect(),
                weights: vec![h; n],
            }
        } else {
            let (x, w) = gauss_legendre(n);
            let half = 0.5 * len;
            AxisRule {
                axis,
                nodes: x.iter().map(|t| axis.lo + half * (t + 1.0)).collect(),
                weights: w.iter().map(|wi| wi * half).collect(),
            }
        }
    }
}

/// Tensor-product grid. Nodes are stored row-major (last axis fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureGrid {
    domain: ParameterDomain,
    rules: Vec<AxisRule>,
    nodes: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl QuadratureGrid {
    pub fn domain(&self) -> &ParameterDomain {
        &self.domain
    }

    pub fn rules(&self) -> &[AxisRule] {
        &self.rules
    }

    pub fn resolution(&self) -> Vec<usize> {
        self.rules.iter().map(|r| r.nodes.len()).collect()
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn nodes(&self) -> &[Vec<f64>] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Flat node index from per-axis indices.
    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter()
            .zip(&self.rules)
            .fold(0, |acc, (&i, r)| acc * r.nodes.len() + i)
    }

    /// Per-axis indices of a flat node index.
    pub fn axis_indices(&self, mut flat: usize) -> Vec<usize> {
        let mut out = vec![0; self.rules.len()];
        for (k, r) in self.rules.iter().enumerate().rev() {
            out[k] = flat % r.nodes.len();
            flat /= r.nodes.len();
        }
        out
    }
}

/// Builds the tensor-product grid for `domain` at `resolution` nodes per axis.
pub fn build_grid(domain: &ParameterDomain, resolution: &[usize]) -> Result<QuadratureGrid> {
    if resolution.len() != domain.dim() {
        return Err(invalid(format!(
            "resolution has {} entries for a {}-dimensional domain",
            resolution.len(),
            domain.dim()
        )));
    }
    if let Some(&r) = resolution.iter().find(|&&r| r < MIN_RESOLUTION) {
        return Err(invalid(format!(
            "resolution {r} below minimum {MIN_RESOLUTION}"
        )));
    }
    let rules: Vec<AxisRule> = domain
        .axes()
        .iter()
        .zip(resolution)
        .map(|(a, &n)| AxisRule::new(*a, n))
        .collect();
    let total: usize = resolution.iter().product();
    let mut nodes = Vec::with_capacity(total);
    let mut weights = Vec::with_capacity(total);
    let mut idx = vec![0usize; rules.len()];
    for _ in 0..total {
        nodes.push(idx.iter().zip(&rules).map(|(&i, r)| r.nodes[i]).collect());
        weights.push(idx.iter().zip(&rules).map(|(&i, r)| r.weights[i]).product());
        for k in (0..rules.len()).rev() {
            idx[k] += 1;
            if idx[k] < rules[k].nodes.len() {
                break;
            }
            idx[k] = 0;
        }
    }
    Ok(QuadratureGrid {
        domain: domain.clone(),
        rules,
        nodes,
        weights,
    })
}

/// Compensated sum in the order given.
pub fn ordered_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// `Σ weight · sample · density` over the grid in node order.
pub fn integrate(grid: &QuadratureGrid, samples: &[f64], density: &[f64]) -> Result<f64> {
    if samples.len() != grid.len() || density.len() != grid.len() {
        return Err(invalid(format!(
            "sample arrays of length {}/{} for a grid of {} nodes",
            samples.len(),
            density.len(),
            grid.len()
        )));
    }
    if let Some(i) = density.iter().position(|&d| !(d > 0.0)) {
        return Err(GeomError::DegenerateImmersion {
            point: grid.nodes()[i].clone(),
            reason: format!("area density {} is not positive", density[i]),
        });
    }
    Ok(ordered_sum(
        grid.weights()
            .iter()
            .zip(samples)
            .zip(density)
            .map(|((w, f), d)| w * f * d),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn torus_domain() -> ParameterDomain {
        ParameterDomain::new(vec![
            Axis::periodic(0.0, 2.0 * PI),
            Axis::periodic(0.0, 2.0 * PI),
        ])
        .unwrap()
    }

    #[test]
    fn periodic_grid_has_uniform_weights() {
        let g = build_grid(&torus_domain(), &[8, 8]).unwrap();
        assert_eq!(g.len(), 64);
        let w = (2.0 * PI / 8.0).powi(2);
        assert!(g.weights().iter().all(|&x| (x - w).abs() < 1e-15));
        let total = ordered_sum(g.weights().iter().copied());
        assert!((total - 4.0 * PI * PI).abs() <= 1e-12 * 4.0 * PI * PI);
    }

    #[test]
    fn gauss_legendre_axis_avoids_endpoints() {
        let d = ParameterDomain::new(vec![Axis::closed(0.0, PI), Axis::periodic(0.0, 2.0 * PI)])
            .unwrap();
        let g = build_grid(&d, &[16, 32]).unwrap();
        let polar = &g.rules()[0].nodes;
        assert!(polar.iter().all(|&t| t > 0.0 && t < PI));
        let total = ordered_sum(g.weights().iter().copied());
        assert!((total - 2.0 * PI * PI).abs() < 1e-12 * total);
    }

    #[test]
    fn gauss_legendre_is_exact_for_high_degree_polynomials() {
        let (x, w) = gauss_legendre(10);
        // ∫_{-1}^{1} t^18 dt = 2/19
        let s: f64 = x.iter().zip(&w).map(|(t, wi)| wi * t.powi(18)).sum();
        assert!((s - 2.0 / 19.0).abs() < 1e-14);
    }

    #[test]
    fn low_resolution_is_rejected() {
        assert!(matches!(
            build_grid(&torus_domain(), &[3, 8]),
            Err(GeomError::InvalidArgument(_))
        ));
    }

    #[test]
    fn sine_integrates_to_zero_and_flat_area_is_exact() {
        let g = build_grid(&torus_domain(), &[16, 16]).unwrap();
        let f: Vec<f64> = g.nodes().iter().map(|p| p[0].sin()).collect();
        let dens = vec![0.5; g.len()];
        assert!(integrate(&g, &f, &dens).unwrap().abs() < 1e-12);
        let one = vec![1.0; g.len()];
        let area = integrate(&g, &one, &dens).unwrap();
        assert!((area - 2.0 * PI * PI).abs() < 1e-12);
    }

    #[test]
    fn trapezoid_is_exact_on_trig_modes_below_resolution() {
        let n = 12;
        let d = ParameterDomain::new(vec![Axis::periodic(0.0, 2.0 * PI)]).unwrap();
        let g = build_grid(&d, &[n]).unwrap();
        let ones = vec![1.0; n];
        for k in 1..n {
            let c: Vec<f64> = g.nodes().iter().map(|p| (k as f64 * p[0]).cos()).collect();
            let s: Vec<f64> = g.nodes().iter().map(|p| (k as f64 * p[0]).sin()).collect();
            assert!(integrate(&g, &c, &ones).unwrap().abs() < 1e-12, "cos {k}");
            assert!(integrate(&g, &s, &ones).unwrap().abs() < 1e-12, "sin {k}");
        }
    }

    #[test]
    fn integrate_rejects_bad_inputs() {
        let g = build_grid(&torus_domain(), &[4, 4]).unwrap();
        assert!(matches!(
            integrate(&g, &[1.0; 3], &[1.0; 16]),
            Err(GeomError::InvalidArgument(_))
        ));
        let mut dens = vec![1.0; 16];
        dens[5] = 0.0;
        assert!(matches!(
            integrate(&g, &[1.0; 16], &dens),
            Err(GeomError::DegenerateImmersion { .. })
        ));
    }

    #[test]
    fn refinement_converges_for_analytic_integrand() {
        // ∫_0^π e^{sin t} dt over a Gauss–Legendre axis
        let d = ParameterDomain::new(vec![Axis::closed(0.0, PI)]).unwrap();
        let reference = {
            let g = build_grid(&d, &[64]).unwrap();
            let f: Vec<f64> = g.nodes().iter().map(|p| p[0].sin().exp()).collect();
            integrate(&g, &f, &vec![1.0; 64]).unwrap()
        };
        let mut prev = f64::INFINITY;
        for n in [4, 8, 16] {
            let g = build_grid(&d, &[n]).unwrap();
            let f: Vec<f64> = g.nodes().iter().map(|p| p[0].sin().exp()).collect();
            let err = (integrate(&g, &f, &vec![1.0; n]).unwrap() - reference).abs();
            assert!(
                err <= (prev / 10.0).max(1e-10),
                "n={n}: err {err:e} prev {prev:e}"
            );
            prev = err;
        }
    }
}
