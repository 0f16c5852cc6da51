//! Immersions `x: Σ^m → S^n × ℝ ⊂ ℝ^{n+2}`, their derivative jets, and the
//! catalog of test surfaces.
//!
//! Catalog charts are written once, generically over [`Scalar`], so the same
//! code gives plain evaluation and exact (closed-form) jets through Taylor
//! arithmetic. Immersions without a generic chart fall back to central
//! finite differences with one level of Richardson extrapolation.

use crate::error::{invalid, GeomError, Result};
use crate::fields::PolyMap;
use crate::quadrature::{Axis, ParameterDomain};
use crate::taylor::{layout, Scalar, Taylor};
use serde::Serialize;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

/// Tolerance on `| |sphere part| - 1 |` accepted by [`Immersion::evaluate`].
pub const CONSTRAINT_DEFECT_TOL: f64 = 1e-9;

/// Expected agreement between finite-difference and closed-form jets per order.
pub fn fd_agreement_tol(order: usize) -> f64 {
    match order {
        0..=2 => 1e-8,
        3 => 1e-5,
        _ => 1e-3,
    }
}

/// Point of `S^n × ℝ` in ambient coordinates; the last entry is the `ℝ` factor.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AmbientPoint(pub Vec<f64>);

impl AmbientPoint {
    pub fn sphere_part(&self) -> &[f64] {
        &self.0[..self.0.len() - 1]
    }

    pub fn height(&self) -> f64 {
        self.0[self.0.len() - 1]
    }

    pub fn constraint_defect(&self) -> f64 {
        (self.sphere_part().iter().map(|x| x * x).sum::<f64>().sqrt() - 1.0).abs()
    }
}

/// Partial derivatives of the immersion up to `order`, indexed by the
/// graded monomial layout of [`crate::taylor::layout`].
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    pub base: AmbientPoint,
    pub order: usize,
    pub nvars: usize,
    derivs: Vec<Vec<f64>>,
}

impl Jet {
    /// `∂^α x` for the multi-index `exps`.
    pub fn get(&self, exps: &[u8]) -> Option<&[f64]> {
        layout(self.nvars, self.order)
            .index_of(exps)
            .map(|i| self.derivs[i].as_slice())
    }

    /// First derivative along parameter `axis`.
    pub fn first(&self, axis: usize) -> &[f64] {
        let mut e = vec![0u8; self.nvars];
        e[axis] = 1;
        self.get(&e).expect("jet order >= 1")
    }

    /// Taylor expansion of each ambient component.
    pub fn to_taylor(&self) -> Vec<Taylor> {
        let l = layout(self.nvars, self.order);
        let dim = self.base.0.len();
        (0..dim)
            .map(|c| {
                let coeffs: Vec<f64> = l
                    .monomials()
                    .iter()
                    .zip(&self.derivs)
                    .map(|(e, d)| {
                        let fac: f64 = e
                            .iter()
                            .map(|&k| (1..=k as u32).map(f64::from).product::<f64>())
                            .product();
                        d[c] / fac
                    })
                    .collect();
                Taylor::from_coeffs(l, &coeffs)
            })
            .collect()
    }

    fn from_taylor(x: &[Taylor]) -> Jet {
        let l = x[0].layout();
        let derivs = l
            .monomials()
            .iter()
            .map(|e| x.iter().map(|c| c.partial(e)).collect())
            .collect();
        Jet {
            base: AmbientPoint(x.iter().map(Taylor::value).collect()),
            order: l.deg(),
            nvars: l.nvars(),
            derivs,
        }
    }
}

/// Properties a catalog surface is known to have.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct Claims {
    pub minimal: bool,
    pub totally_geodesic: bool,
    pub umbilical: bool,
    /// `T ≡ 0`: the surface lies in a slice `S^n × {t0}`.
    pub in_slice: bool,
    /// Stationary for the total mean curvature functional.
    pub h_surface: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metadata {
    pub name: String,
    pub params: Vec<(String, f64)>,
    /// Euler characteristic (closed surfaces only).
    pub chi: Option<i32>,
    pub compact: bool,
    pub claims: Claims,
}

pub type ChartFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

#[derive(Clone)]
enum Chart {
    SliceSphere {
        t0: f64,
    },
    CliffordTorus {
        t0: f64,
    },
    Veronese {
        t0: f64,
    },
    SmallSphere {
        rho: f64,
        t0: f64,
    },
    GraphTorus {
        eps: f64,
    },
    CylinderPatch {
        r: f64,
    },
    Deformed {
        base: Arc<Immersion>,
        field: Arc<PolyMap>,
        s: f64,
    },
    Custom(ChartFn),
}

/// An immersed submanifold of `S^n × ℝ` given by a parametrization.
#[derive(Clone)]
pub struct Immersion {
    n: usize,
    m: usize,
    domain: ParameterDomain,
    chart: Chart,
    meta: Metadata,
}

impl fmt::Debug for Immersion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Immersion")
            .field("n", &self.n)
            .field("m", &self.m)
            .field("meta", &self.meta)
            .finish()
    }
}

fn sphere_domain() -> ParameterDomain {
    ParameterDomain::new(vec![Axis::closed(0.0, PI), Axis::periodic(0.0, 2.0 * PI)])
        .expect("valid domain")
}

fn torus_domain() -> ParameterDomain {
    ParameterDomain::new(vec![
        Axis::periodic(0.0, 2.0 * PI),
        Axis::periodic(0.0, 2.0 * PI),
    ])
    .expect("valid domain")
}

fn pad<S: Scalar>(mut sphere: Vec<S>, n: usize, t: S) -> Vec<S> {
    let zero = t.konst(0.0);
    while sphere.len() < n + 1 {
        sphere.push(zero.clone());
    }
    sphere.push(t);
    sphere
}

impl Chart {
    fn eval<S: Scalar>(&self, n: usize, p: &[S]) -> Option<Vec<S>> {
        let k = |v: f64| p[0].konst(v);
        Some(match self {
            Chart::SliceSphere { t0 } => {
                let (st, ct) = (p[0].sin(), p[0].cos());
                let (sp, cp) = (p[1].sin(), p[1].cos());
                pad(vec![st.clone() * cp, st * sp, ct], n, k(*t0))
            }
            Chart::CliffordTorus { t0 } => {
                let r = 1.0 / 2f64.sqrt();
                pad(
                    vec![
                        p[0].cos() * r,
                        p[0].sin() * r,
                        p[1].cos() * r,
                        p[1].sin() * r,
                    ],
                    n,
                    k(*t0),
                )
            }
            Chart::Veronese { t0 } => {
                let s3 = 3f64.sqrt();
                let (st, ct) = (p[0].sin(), p[0].cos());
                let (sp, cp) = (p[1].sin(), p[1].cos());
                let u = st.clone() * cp * s3;
                let v = st * sp * s3;
                let w = ct * s3;
                let uu = u.clone() * u.clone();
                let vv = v.clone() * v.clone();
                let ww = w.clone() * w.clone();
                pad(
                    vec![
                        u.clone() * v.clone() * (1.0 / s3),
                        u * w.clone() * (1.0 / s3),
                        v * w * (1.0 / s3),
                        (uu.clone() - vv.clone()) * (1.0 / (2.0 * s3)),
                        (uu + vv - ww * 2.0) * (1.0 / 6.0),
                    ],
                    n,
                    k(*t0),
                )
            }
            Chart::SmallSphere { rho, t0 } => {
                let (sr, cr) = rho.sin_cos();
                let (st, ct) = (p[0].sin(), p[0].cos());
                let (sp, cp) = (p[1].sin(), p[1].cos());
                pad(
                    vec![st.clone() * cp * sr, st * sp * sr, ct * sr, k(cr)],
                    n,
                    k(*t0),
                )
            }
            Chart::GraphTorus { eps } => {
                let r = 1.0 / 2f64.sqrt();
                pad(
                    vec![
                        p[0].cos() * r,
                        p[0].sin() * r,
                        p[1].cos() * r,
                        p[1].sin() * r,
                    ],
                    n,
                    p[0].sin() * *eps,
                )
            }
            Chart::CylinderPatch { r } => {
                let (sr, cr) = r.sin_cos();
                pad(
                    vec![p[0].cos() * sr, p[0].sin() * sr, k(cr)],
                    n,
                    p[1].clone(),
                )
            }
            Chart::Deformed { base, field, s } => {
                let x = base.chart.eval(base.n, p)?;
                deform(&x, field, *s)
            }
            Chart::Custom(_) => return None,
        })
    }
}

/// `x_s = (normalize(p + s v_s), t + s v_t)` where `v` is the ambient field
/// `w(x)` with its component along the sphere normal removed.
fn deform<S: Scalar>(x: &[S], field: &PolyMap, s: f64) -> Vec<S> {
    let dim = x.len();
    let w = field.eval(x);
    let mut radial = x[0].konst(0.0);
    for i in 0..dim - 1 {
        radial = radial + w[i].clone() * x[i].clone();
    }
    let mut out: Vec<S> = (0..dim - 1)
        .map(|i| x[i].clone() + (w[i].clone() - radial.clone() * x[i].clone()) * s)
        .collect();
    let mut norm2 = x[0].konst(0.0);
    for c in &out {
        norm2 = norm2 + c.clone() * c.clone();
    }
    let inv = norm2.sqrt().recip();
    for c in out.iter_mut() {
        *c = c.clone() * inv.clone();
    }
    out.push(x[dim - 1].clone() + w[dim - 1].clone() * s);
    out
}

/// Parameters accepted by [`catalog`]; unset values take catalog defaults.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct SurfaceParams {
    pub n: Option<usize>,
    pub t0: Option<f64>,
    pub rho: Option<f64>,
    pub eps: Option<f64>,
}

/// Names understood by [`catalog`].
pub const CATALOG_NAMES: [&str; 6] = [
    "slice_sphere",
    "clifford_torus",
    "veronese",
    "small_sphere",
    "graph_torus",
    "cylinder_patch",
];

/// Builds a catalog surface by name.
pub fn catalog(name: &str, params: &SurfaceParams) -> Result<Immersion> {
    let t0 = params.t0.unwrap_or(0.0);
    if !t0.is_finite() {
        return Err(invalid("t0 must be finite"));
    }
    let fixed_n = |want: usize| -> Result<usize> {
        match params.n {
            Some(n) if n < want => Err(invalid(format!("{name} needs n >= {want}, got {n}"))),
            Some(n) => Ok(n),
            None => Ok(want),
        }
    };
    let closed = |chi: i32, claims: Claims| Metadata {
        name: name.to_string(),
        params: Vec::new(),
        chi: Some(chi),
        compact: true,
        claims,
    };
    let minimal_slice = Claims {
        minimal: true,
        totally_geodesic: false,
        umbilical: false,
        in_slice: true,
        h_surface: true,
    };
    let (n, domain, chart, mut meta) = match name {
        "slice_sphere" => {
            let n = fixed_n(2)?;
            let claims = Claims {
                totally_geodesic: true,
                umbilical: true,
                ..minimal_slice
            };
            (
                n,
                sphere_domain(),
                Chart::SliceSphere { t0 },
                closed(2, claims),
            )
        }
        "clifford_torus" => {
            let n = fixed_n(3)?;
            (
                n,
                torus_domain(),
                Chart::CliffordTorus { t0 },
                closed(0, minimal_slice),
            )
        }
        "veronese" => {
            let n = fixed_n(4)?;
            (
                n,
                sphere_domain(),
                Chart::Veronese { t0 },
                closed(2, minimal_slice),
            )
        }
        "small_sphere" => {
            let n = fixed_n(3)?;
            let rho = params.rho.unwrap_or(PI / 4.0);
            if !(rho > 0.0 && rho < PI) {
                return Err(invalid(format!("small_sphere radius {rho} outside (0, π)")));
            }
            let equator = (rho - PI / 2.0).abs() < 1e-15;
            let claims = Claims {
                minimal: equator,
                totally_geodesic: equator,
                umbilical: true,
                in_slice: true,
                h_surface: equator,
            };
            let mut meta = closed(2, claims);
            meta.params.push(("rho".into(), rho));
            (n, sphere_domain(), Chart::SmallSphere { rho, t0 }, meta)
        }
        "graph_torus" => {
            let n = fixed_n(3)?;
            let eps = params.eps.unwrap_or(0.3);
            if !(eps >= 0.0 && eps.is_finite()) {
                return Err(invalid(format!("graph_torus eps {eps} must be >= 0")));
            }
            let claims = if eps == 0.0 {
                minimal_slice
            } else {
                Claims::default()
            };
            let mut meta = closed(0, claims);
            meta.params.push(("eps".into(), eps));
            (n, torus_domain(), Chart::GraphTorus { eps }, meta)
        }
        "cylinder_patch" => {
            let n = fixed_n(2)?;
            let r = params.rho.unwrap_or(PI / 4.0);
            if !(r > 0.0 && r < PI) {
                return Err(invalid(format!("cylinder_patch radius {r} outside (0, π)")));
            }
            let great = (r - PI / 2.0).abs() < 1e-15;
            let claims = Claims {
                minimal: great,
                totally_geodesic: great,
                ..Claims::default()
            };
            let domain =
                ParameterDomain::new(vec![Axis::periodic(0.0, 2.0 * PI), Axis::closed(-1.0, 1.0)])?;
            let meta = Metadata {
                name: name.to_string(),
                params: vec![("r".into(), r)],
                chi: None,
                compact: false,
                claims,
            };
            (n, domain, Chart::CylinderPatch { r }, meta)
        }
        other => return Err(invalid(format!("unknown surface '{other}'"))),
    };
    meta.params.insert(0, ("n".into(), n as f64));
    if name != "cylinder_patch" && name != "graph_torus" {
        meta.params.push(("t0".into(), t0));
    }
    Ok(Immersion {
        n,
        m: 2,
        domain,
        chart,
        meta,
    })
}

impl Immersion {
    /// Immersion from a plain chart function; derivatives come from finite
    /// differences.
    pub fn custom(
        name: &str,
        n: usize,
        domain: ParameterDomain,
        chart: ChartFn,
        chi: Option<i32>,
        compact: bool,
    ) -> Result<Immersion> {
        let m = domain.dim();
        if m > n {
            return Err(invalid(format!(
                "intrinsic dimension {m} must be < n + 1 = {}",
                n + 1
            )));
        }
        Ok(Immersion {
            n,
            m,
            domain,
            chart: Chart::Custom(chart),
            meta: Metadata {
                name: name.to_string(),
                params: Vec::new(),
                chi,
                compact,
                claims: Claims::default(),
            },
        })
    }

    /// The variation `s ↦ x_s` along the ambient field `w`, evaluated at `s`.
    pub fn deformed(self: &Arc<Self>, field: Arc<PolyMap>, s: f64) -> Result<Immersion> {
        let dim = self.ambient_dim();
        if field.in_dim() != dim || field.out_dim() != dim {
            return Err(invalid("variation field must map R^{n+2} to itself"));
        }
        let chart = match &self.chart {
            Chart::Custom(f) => {
                let f = f.clone();
                let field = field.clone();
                let wrapped: ChartFn = Arc::new(move |p: &[f64]| deform(&f(p), &field, s));
                Chart::Custom(wrapped)
            }
            _ => Chart::Deformed {
                base: self.clone(),
                field,
                s,
            },
        };
        let mut meta = self.meta.clone();
        meta.name = format!("{}+variation", self.meta.name);
        meta.claims = Claims::default();
        Ok(Immersion {
            n: self.n,
            m: self.m,
            domain: self.domain.clone(),
            chart,
            meta,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn ambient_dim(&self) -> usize {
        self.n + 2
    }

    pub fn domain(&self) -> &ParameterDomain {
        &self.domain
    }

    pub fn metadata(&self) -> &Metadata {
        &self.meta
    }

    pub fn name(&self) -> &str {
        &self.meta.name
    }

    pub fn is_compact(&self) -> bool {
        self.meta.compact
    }

    pub fn has_closed_form(&self) -> bool {
        match &self.chart {
            Chart::Custom(_) => false,
            Chart::Deformed { base, .. } => base.has_closed_form(),
            _ => true,
        }
    }

    /// Generic evaluation (closed-form charts only).
    pub fn eval_generic<S: Scalar>(&self, p: &[S]) -> Option<Vec<S>> {
        self.chart.eval(self.n, p)
    }

    fn eval_raw(&self, p: &[f64]) -> Vec<f64> {
        match &self.chart {
            Chart::Custom(f) => f(p),
            chart => chart.eval(self.n, p).expect("closed-form chart"),
        }
    }

    /// Evaluates the immersion, checking the `S^n × ℝ` constraint.
    pub fn evaluate(&self, p: &[f64]) -> Result<AmbientPoint> {
        if p.len() != self.m {
            return Err(invalid(format!(
                "expected {} parameters, got {}",
                self.m,
                p.len()
            )));
        }
        let x = AmbientPoint(self.eval_raw(p));
        if x.0.len() != self.ambient_dim() {
            return Err(invalid("chart returned a point of the wrong dimension"));
        }
        let defect = x.constraint_defect();
        if !(defect <= CONSTRAINT_DEFECT_TOL) {
            return Err(GeomError::ImmersionDefect {
                point: p.to_vec(),
                violation: defect,
            });
        }
        Ok(x)
    }

    /// Exact Taylor expansion of the chart at `p` (closed-form charts only).
    pub fn closed_form_taylor(&self, p: &[f64], order: usize) -> Option<Vec<Taylor>> {
        self.eval_generic(&Taylor::variables(p, order))
    }

    /// Taylor expansion at `p`: closed form when available, otherwise from a
    /// finite-difference jet at the default steps.
    pub fn taylor(&self, p: &[f64], order: usize) -> Result<Vec<Taylor>> {
        match self.closed_form_taylor(p, order) {
            Some(x) => Ok(x),
            None => Ok(self.fd_jet(p, order, self.default_fd_step())?.to_taylor()),
        }
    }

    /// Derivative jet of the requested order. Closed-form jets are returned
    /// when the chart supports them; otherwise `fd_step` (or the default)
    /// drives the finite-difference jet.
    pub fn jet(&self, p: &[f64], order: usize, fd_step: Option<f64>) -> Result<Jet> {
        check_order(order)?;
        self.evaluate(p)?;
        match self.closed_form_taylor(p, order) {
            Some(x) => Ok(Jet::from_taylor(&x)),
            None => self.fd_jet(p, order, fd_step.unwrap_or_else(|| self.default_fd_step())),
        }
    }

    /// Base step for finite-difference jets: `1e-3 ·` domain extent.
    pub fn default_fd_step(&self) -> f64 {
        1e-3 * self.domain.extent()
    }

    /// Central-difference jet with one Richardson level, regardless of
    /// whether a closed form exists.
    pub fn fd_jet(&self, p: &[f64], order: usize, step: f64) -> Result<Jet> {
        check_order(order)?;
        if !(step > 0.0 && step.is_finite()) {
            return Err(invalid(format!(
                "finite-difference step {step} must be positive"
            )));
        }
        let base = self.evaluate(p)?;
        let l = layout(self.m, order);
        let steps = vec![step; self.m];
        let mut derivs = Vec::with_capacity(l.len());
        for e in l.monomials() {
            if e.iter().all(|&k| k == 0) {
                derivs.push(base.0.clone());
                continue;
            }
            derivs.push(self.richardson(p, e, &steps));
        }
        if order >= 2 {
            self.check_step_stability(p, &steps)?;
        }
        Ok(Jet {
            base,
            order,
            nvars: self.m,
            derivs,
        })
    }

    fn richardson(&self, p: &[f64], e: &[u8], steps: &[f64]) -> Vec<f64> {
        let coarse = self.stencil(p, e, steps);
        let half: Vec<f64> = steps.iter().map(|h| 0.5 * h).collect();
        let fine = self.stencil(p, e, &half);
        fine.iter()
            .zip(&coarse)
            .map(|(f, c)| (4.0 * f - c) / 3.0)
            .collect()
    }

    // Tensor product of 1-D central stencils (all O(h²)).
    fn stencil(&self, p: &[f64], e: &[u8], steps: &[f64]) -> Vec<f64> {
        let one_d = |k: u8| -> &'static [(i32, f64)] {
            match k {
                0 => &[(0, 1.0)],
                1 => &[(-1, -0.5), (1, 0.5)],
                2 => &[(-1, 1.0), (0, -2.0), (1, 1.0)],
                3 => &[(-2, -0.5), (-1, 1.0), (1, -1.0), (2, 0.5)],
                _ => &[(-2, 1.0), (-1, -4.0), (0, 6.0), (1, -4.0), (2, 1.0)],
            }
        };
        let mut acc = vec![0.0; self.ambient_dim()];
        let stencils: Vec<&[(i32, f64)]> = e.iter().map(|&k| one_d(k)).collect();
        let mut idx = vec![0usize; self.m];
        loop {
            let mut q = p.to_vec();
            let mut w = 1.0;
            for a in 0..self.m {
                let (off, c) = stencils[a][idx[a]];
                q[a] += off as f64 * steps[a];
                w *= c / steps[a].powi(e[a] as i32);
            }
            let x = self.eval_raw(&q);
            for (o, xi) in acc.iter_mut().zip(&x) {
                *o += w * xi;
            }
            let mut a = self.m;
            loop {
                if a == 0 {
                    return acc;
                }
                a -= 1;
                idx[a] += 1;
                if idx[a] < stencils[a].len() {
                    break;
                }
                idx[a] = 0;
            }
        }
    }

    // Second derivatives along each axis at two step sizes; roundoff-dominated
    // jets disagree.
    fn check_step_stability(&self, p: &[f64], steps: &[f64]) -> Result<()> {
        let limit = 100.0 * fd_agreement_tol(2);
        for a in 0..self.m {
            let mut e = vec![0u8; self.m];
            e[a] = 2;
            let mut shrunk = steps.to_vec();
            shrunk[a] *= 0.75;
            let x = self.richardson(p, &e, steps);
            let y = self.richardson(p, &e, &shrunk);
            let diff = x
                .iter()
                .zip(&y)
                .map(|(u, v)| (u - v).abs())
                .fold(0.0, f64::max);
            if diff > limit {
                return Err(GeomError::FdInstability(format!(
                    "second derivatives along axis {a} disagree by {diff:e} (limit {limit:e}) at step {:e}",
                    steps[a]
                )));
            }
        }
        Ok(())
    }
}

fn check_order(order: usize) -> Result<()> {
    if !(1..=4).contains(&order) {
        return Err(invalid(format!("jet order {order} outside 1..=4")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn all_catalog() -> Vec<Immersion> {
        CATALOG_NAMES
            .iter()
            .map(|n| catalog(n, &SurfaceParams::default()).unwrap())
            .collect()
    }

    fn random_point(imm: &Immersion, rng: &mut ChaCha8Rng) -> Vec<f64> {
        imm.domain()
            .axes()
            .iter()
            .map(|a| {
                let margin = if a.periodic { 0.0 } else { 0.05 * a.length() };
                rng.gen_range(a.lo + margin..a.hi - margin)
            })
            .collect()
    }

    #[test]
    fn clifford_torus_origin() {
        let imm = catalog("clifford_torus", &SurfaceParams::default()).unwrap();
        let x = imm.evaluate(&[0.0, 0.0]).unwrap();
        let r = 1.0 / 2f64.sqrt();
        let want = [r, 0.0, r, 0.0, 0.0];
        for (a, b) in x.0.iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
        let jet = imm.jet(&[0.0, 0.0], 1, None).unwrap();
        let xu = jet.first(0);
        let want_u = [0.0, r, 0.0, 0.0, 0.0];
        for (a, b) in xu.iter().zip(want_u) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn slice_sphere_height_and_small_sphere_pole() {
        let imm = catalog(
            "slice_sphere",
            &SurfaceParams {
                n: Some(2),
                t0: Some(3.0),
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(imm.evaluate(&[1.1, 2.3]).unwrap().height(), 3.0);

        let ss = catalog("small_sphere", &SurfaceParams::default()).unwrap();
        let x = ss.evaluate(&[0.0, 0.0]).unwrap();
        let s = (PI / 4.0).sin();
        let c = (PI / 4.0).cos();
        let want = [0.0, 0.0, s, c, 0.0];
        for (a, b) in x.0.iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn veronese_normalization_brute_force() {
        let imm = catalog("veronese", &SurfaceParams::default()).unwrap();
        // (u,v,w) = (√3,0,0) ↔ θ = π/2, φ = 0
        let x = imm.evaluate(&[PI / 2.0, 0.0]).unwrap();
        let want = [0.0, 0.0, 0.0, 3f64.sqrt() / 2.0, 0.5, 0.0];
        for (a, b) in x.0.iter().zip(want) {
            assert!((a - b).abs() < 1e-15, "{:?}", x.0);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let p = [rng.gen_range(0.0..PI), rng.gen_range(0.0..2.0 * PI)];
            assert!(imm.evaluate(&p).unwrap().constraint_defect() < 1e-12);
        }
    }

    #[test]
    fn catalog_constraint_at_random_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for imm in all_catalog() {
            for _ in 0..10_000 {
                let p = random_point(&imm, &mut rng);
                let x = imm.evaluate(&p).unwrap();
                assert!(x.constraint_defect() < 1e-12, "{}", imm.name());
            }
        }
    }

    #[test]
    fn catalog_metadata() {
        let ct = catalog("clifford_torus", &SurfaceParams::default()).unwrap();
        assert_eq!(ct.metadata().chi, Some(0));
        assert!(ct.metadata().claims.minimal && ct.metadata().claims.in_slice);
        let cyl = catalog("cylinder_patch", &SurfaceParams::default()).unwrap();
        assert!(!cyl.is_compact());
        assert!(catalog("klein_bottle", &SurfaceParams::default()).is_err());
        assert!(catalog(
            "small_sphere",
            &SurfaceParams {
                rho: Some(4.0),
                ..Default::default()
            }
        )
        .is_err());
        assert!(catalog(
            "graph_torus",
            &SurfaceParams {
                eps: Some(-0.1),
                ..Default::default()
            }
        )
        .is_err());
    }

    #[test]
    fn jet_order_bounds() {
        let imm = catalog("clifford_torus", &SurfaceParams::default()).unwrap();
        assert!(imm.jet(&[0.1, 0.2], 0, None).is_err());
        assert!(imm.jet(&[0.1, 0.2], 5, None).is_err());
    }

    #[test]
    fn first_derivatives_tangent_to_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for imm in all_catalog() {
            for _ in 0..20 {
                let p = random_point(&imm, &mut rng);
                let jet = imm.jet(&p, 2, None).unwrap();
                let n = imm.ambient_dim() - 1;
                for a in 0..2 {
                    let d = jet.first(a);
                    let dot: f64 = (0..n).map(|i| d[i] * jet.base.0[i]).sum();
                    assert!(dot.abs() < 1e-10);
                }
                let uv = jet.get(&[1, 1]).unwrap();
                assert!(uv.iter().all(|x| x.is_finite()));
            }
        }
    }

    #[test]
    fn constant_direction_has_zero_jets() {
        // The cylinder patch is linear in v: every pure ∂_v^k with k >= 2 vanishes.
        let imm = catalog("cylinder_patch", &SurfaceParams::default()).unwrap();
        let jet = imm.jet(&[0.3, 0.2], 4, None).unwrap();
        for k in 2..=4u8 {
            assert!(jet.get(&[0, k]).unwrap().iter().all(|x| x.abs() < 1e-15));
        }
    }

    #[test]
    fn fd_jets_agree_with_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for imm in all_catalog() {
            for _ in 0..100 {
                let p = random_point(&imm, &mut rng);
                let exact = imm.jet(&p, 4, None).unwrap();
                let fd = imm.fd_jet(&p, 4, imm.default_fd_step()).unwrap();
                for e in layout(2, 4).monomials() {
                    let ord: usize = e.iter().map(|&k| k as usize).sum();
                    let tol = fd_agreement_tol(ord);
                    let a = exact.get(e).unwrap();
                    let b = fd.get(e).unwrap();
                    let diff = a
                        .iter()
                        .zip(b)
                        .map(|(x, y)| (x - y).abs())
                        .fold(0.0, f64::max);
                    assert!(diff < tol, "{} {:?} at {:?}: {diff:e}", imm.name(), e, p);
                }
            }
        }
    }

    #[test]
    fn tiny_step_triggers_instability() {
        let imm = catalog("graph_torus", &SurfaceParams::default()).unwrap();
        let err = imm.fd_jet(&[0.4, 1.2], 2, 1e-9).unwrap_err();
        assert!(matches!(err, GeomError::FdInstability(_)), "{err:?}");
    }

    #[test]
    fn custom_chart_uses_finite_differences() {
        let domain = ParameterDomain::new(vec![
            Axis::periodic(0.0, 2.0 * PI),
            Axis::periodic(0.0, 2.0 * PI),
        ])
        .unwrap();
        let f: ChartFn = Arc::new(|p: &[f64]| {
            let r = 1.0 / 2f64.sqrt();
            vec![
                r * p[0].cos(),
                r * p[0].sin(),
                r * p[1].cos(),
                r * p[1].sin(),
                0.3 * p[0].sin(),
            ]
        });
        let custom = Immersion::custom("custom_graph", 3, domain, f, Some(0), true).unwrap();
        assert!(!custom.has_closed_form());
        let exact = catalog("graph_torus", &SurfaceParams::default()).unwrap();
        let p = [0.7, 2.1];
        let a = custom.jet(&p, 2, None).unwrap();
        let b = exact.jet(&p, 2, None).unwrap();
        let d = a.get(&[1, 1]).unwrap().iter().zip(b.get(&[1, 1]).unwrap());
        assert!(d.map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) < 1e-8);
    }

    #[test]
    fn deformation_velocity_and_constraint() {
        let imm = Arc::new(catalog("graph_torus", &SurfaceParams::default()).unwrap());
        let mut gen = crate::fields::FieldGenerator::new(9, imm.ambient_dim());
        let w = Arc::new(gen.ambient());
        let p = [0.9, 4.0];
        let x = imm.evaluate(&p).unwrap();
        let wx = w.eval(&x.0);
        let radial: f64 = (0..4).map(|i| wx[i] * x.0[i]).sum();
        let mut v = wx.clone();
        for i in 0..4 {
            v[i] -= radial * x.0[i];
        }
        let d = 1e-4;
        let plus = imm.deformed(w.clone(), d).unwrap().evaluate(&p).unwrap();
        let minus = imm.deformed(w.clone(), -d).unwrap().evaluate(&p).unwrap();
        assert!(plus.constraint_defect() < 1e-14);
        for i in 0..5 {
            let vel = (plus.0[i] - minus.0[i]) / (2.0 * d);
            assert!((vel - v[i]).abs() < 1e-7, "component {i}");
        }
    }
}
