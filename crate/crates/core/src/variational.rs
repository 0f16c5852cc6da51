//! The total mean curvature functional and its first variation, the
//! Simons-type formula, the Huisken-type inequality, and the trace inequality
//! for families of symmetric matrices.

use crate::error::{invalid, GeomError, Result};
use crate::fields::{FieldGenerator, PolyMap};
use crate::geometry::{JetOptions, LocalExpansion, PointGeometry, Vector};
use crate::immersion::Immersion;
use crate::operators::{node_map, NormalField};
use crate::quadrature::{integrate, QuadratureGrid};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::sync::Arc;

/// Admissible range of the finite-difference step in [`first_variation_check`].
pub const VARIATION_STEP_RANGE: (f64, f64) = (1e-4, 1e-2);

fn require_compact(imm: &Immersion, what: &str) -> Result<()> {
    if imm.is_compact() {
        Ok(())
    } else {
        Err(GeomError::CompactnessRequired(format!(
            "{what} on {}",
            imm.name()
        )))
    }
}

// H^m and the area density from an order-2 expansion.
fn mean_curvature_power(le: &LocalExpansion) -> (f64, f64) {
    let m = le.m();
    let h = le.mean_curvature();
    let h2: f64 = h.iter().map(|c| c.value() * c.value()).sum();
    let g = DMatrix::from_fn(m, m, |a, b| le.metric()[a][b].value());
    (h2.powf(0.5 * m as f64), g.determinant().sqrt())
}

/// `𝓗(Σ) = ∫ H^m dΣ`.
pub fn total_mean_curvature(
    imm: &Immersion,
    grid: &QuadratureGrid,
    opts: JetOptions,
) -> Result<f64> {
    require_compact(imm, "the total mean curvature")?;
    if grid.domain() != imm.domain() {
        return Err(invalid("grid was built for a different parameter domain"));
    }
    let rows: Vec<(f64, f64)> = grid
        .nodes()
        .par_iter()
        .map(|p| Ok(mean_curvature_power(&LocalExpansion::new(imm, p, 2, opts)?)))
        .collect::<Result<_>>()?;
    let f: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let d: Vec<f64> = rows.iter().map(|r| r.1).collect();
    integrate(grid, &f, &d)
}

/// Euler–Lagrange field of `𝓗` at a point:
/// `Δ⊥h + (m − |T|² − mH²)h − m⟨N,h⟩N + Σ_β tr(A_h A_β) e_β`, multiplied by
/// `H^{m−2}` when `m > 2`.
pub fn el_field(pg: &PointGeometry) -> Result<Vector> {
    let second = pg.require_second()?;
    let m = pg.m as f64;
    let h2 = pg.h_norm2();
    let mut e =
        &second.lap_h + &pg.h * (m - pg.t_norm2() - m * h2) - &pg.n_vec * (m * pg.n_dot_h());
    for (beta, eb) in pg.frames.normal.iter().enumerate() {
        e += eb * (&pg.a_h * &pg.a[beta]).trace();
    }
    if pg.m > 2 {
        e *= h2.powf(0.5 * (m - 2.0));
    }
    Ok(e)
}

/// Euler–Lagrange field on a grid.
#[derive(Debug, Clone)]
pub struct ElResidual {
    pub field: NormalField,
    pub max_norm: f64,
    /// Largest `|σ|²` on the grid (sets the certification scale).
    pub max_sigma2: f64,
}

impl ElResidual {
    /// The stationarity certificate `max|E| ≤ 1e-6 (1 + max|σ|²)`.
    pub fn certifies(&self) -> bool {
        self.max_norm <= certification_threshold(self.max_sigma2)
    }
}

/// Threshold below which `max|E|` certifies a stationary point of `𝓗`.
pub fn certification_threshold(max_sigma2: f64) -> f64 {
    1e-6 * (1.0 + max_sigma2)
}

pub fn el_residual(imm: &Immersion, grid: &QuadratureGrid, opts: JetOptions) -> Result<ElResidual> {
    let rows = node_map(imm, grid, 4, opts, |_, pg| {
        Ok((el_field(pg)?, pg.sigma_norm2()))
    })?;
    let max_norm = rows.iter().map(|r| r.0.norm()).fold(0.0, f64::max);
    let max_sigma2 = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    let values = rows.into_iter().map(|r| r.0).collect();
    Ok(ElResidual {
        field: NormalField {
            resolution: grid.resolution(),
            values,
        },
        max_norm,
        max_sigma2,
    })
}

/// An ambient vector field `w` whose flow deforms the immersion by
/// `x_s = (normalize(p + s v_s), t + s v_t)` with `v = w − ⟨w_s, p⟩(p, 0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct VariationField {
    pub field: Arc<PolyMap>,
}

impl VariationField {
    pub fn new(field: PolyMap) -> VariationField {
        VariationField {
            field: Arc::new(field),
        }
    }

    /// Seeded random field of degree at most two.
    pub fn random(seed: u64, ambient_dim: usize) -> VariationField {
        VariationField::new(FieldGenerator::new(seed, ambient_dim).ambient())
    }

    /// The velocity `v` of the deformation at `x`.
    pub fn velocity(&self, x: &[f64]) -> Vec<f64> {
        let w = self.field.eval(x);
        let k = x.len() - 1;
        let radial: f64 = (0..k).map(|i| w[i] * x[i]).sum();
        let mut v = w;
        for i in 0..k {
            v[i] -= radial * x[i];
        }
        v
    }

    pub fn deform(&self, imm: &Arc<Immersion>, s: f64) -> Result<Immersion> {
        imm.deformed(self.field.clone(), s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FirstVariation {
    pub fd: f64,
    pub analytic: f64,
    /// `|fd − analytic| / (1 + |fd| + |analytic|)`.
    pub residual: f64,
}

/// Compares the 4-point central difference of `s ↦ 𝓗(x_s)` with
/// `∫⟨E, v⊥⟩ dΣ` (surfaces only).
pub fn first_variation_check(
    imm: &Arc<Immersion>,
    grid: &QuadratureGrid,
    v: &VariationField,
    delta: f64,
    opts: JetOptions,
) -> Result<FirstVariation> {
    let (lo, hi) = VARIATION_STEP_RANGE;
    if !(delta >= lo && delta <= hi) {
        return Err(invalid(format!(
            "variation step {delta} outside [{lo}, {hi}]"
        )));
    }
    if imm.m() != 2 {
        return Err(invalid(
            "the first-variation check is implemented for surfaces",
        ));
    }
    require_compact(imm, "the first variation")?;
    let rows = node_map(imm, grid, 4, opts, |_, pg| {
        let vel = Vector::from_vec(v.velocity(pg.x.as_slice()));
        let v_perp = normal_part(pg, &vel);
        Ok((pg.density, el_field(pg)?.dot(&v_perp)))
    })?;
    let d: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let f: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let analytic = integrate(grid, &f, &d)?;
    let values: Vec<f64> = [2.0, 1.0, -1.0, -2.0]
        .iter()
        .map(|k| total_mean_curvature(&v.deform(imm, k * delta)?, grid, opts))
        .collect::<Result<_>>()?;
    let fd = (-values[0] + 8.0 * values[1] - 8.0 * values[2] + values[3]) / (12.0 * delta);
    Ok(FirstVariation {
        fd,
        analytic,
        residual: (fd - analytic).abs() / (1.0 + fd.abs() + analytic.abs()),
    })
}

fn normal_part(pg: &PointGeometry, v: &Vector) -> Vector {
    let mut out = Vector::zeros(v.len());
    for e in &pg.frames.normal {
        out += e * e.dot(v);
    }
    out
}

/// The seeded variations used by the first-variation sweep.
pub fn seeded_variations(seed: u64, count: usize, ambient_dim: usize) -> Vec<VariationField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| VariationField::random(rng.gen(), ambient_dim))
        .collect()
}

/// Both sides of the Simons-type formula at one point, term by term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimonsTerms {
    /// `½Δ|σ|²`.
    pub lhs: f64,
    /// `|∇⊥σ|²`.
    pub grad_sigma: f64,
    /// `m Σ_α tr(A_α ∘ Hess H^α)`, evaluated as `m⟨σ, ∇²h⟩`.
    pub hessian: f64,
    /// `m|φ_N|²`.
    pub phi_n: f64,
    /// `−2m Σ_α |φ_α(T)|²`.
    pub phi_t: f64,
    /// `(m − |T|²)|φ|²`.
    pub phi: f64,
    /// `−m⟨φ_h(T), T⟩`.
    pub phi_h_t: f64,
    /// `Σ_{α,β} tr(A_β) tr(A_α² A_β)`.
    pub cubic: f64,
    /// `−Σ_{α,β} (N(A_αA_β − A_βA_α) + [tr(A_αA_β)]²)`.
    pub quartic: f64,
}

impl SimonsTerms {
    pub fn rhs(&self) -> f64 {
        self.grad_sigma
            + self.hessian
            + self.phi_n
            + self.phi_t
            + self.phi
            + self.phi_h_t
            + self.cubic
            + self.quartic
    }

    pub fn residual(&self) -> f64 {
        self.lhs - self.rhs()
    }
}

/// `|∇⊥σ|²`.
pub fn grad_sigma_norm2(pg: &PointGeometry) -> Result<f64> {
    let f = pg.first_derivatives()?;
    Ok(f.nabla_sigma
        .iter()
        .flatten()
        .flatten()
        .map(|v| v.norm_squared())
        .sum())
}

/// `⟨σ, ∇²h⟩ = Σ_ij ⟨σ(e_i,e_j), (∇²h)(e_i,e_j)⟩`.
pub fn sigma_dot_hess_h(pg: &PointGeometry) -> Result<f64> {
    let s = pg.require_second()?;
    let mut acc = 0.0;
    for i in 0..pg.m {
        for j in 0..pg.m {
            acc += pg.sigma[i][j].dot(&s.hess_h[i][j]);
        }
    }
    Ok(acc)
}

fn commutator_norm2(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a * b - b * a).norm_squared()
}

pub fn simons_terms(pg: &PointGeometry) -> Result<SimonsTerms> {
    let second = pg.require_second()?;
    let m = pg.m as f64;
    let t = DMatrix::from_column_slice(pg.m, 1, &pg.t_coef);
    let mut phi_t = 0.0;
    for phi in &pg.phi {
        phi_t += (phi * &t).norm_squared();
    }
    let mut cubic = 0.0;
    let mut quartic = 0.0;
    for aa in &pg.a {
        let a2 = aa * aa;
        for ab in &pg.a {
            cubic += ab.trace() * (&a2 * ab).trace();
            let tr = (aa * ab).trace();
            quartic -= commutator_norm2(aa, ab) + tr * tr;
        }
    }
    Ok(SimonsTerms {
        lhs: 0.5 * second.lap_sigma2,
        grad_sigma: grad_sigma_norm2(pg)?,
        hessian: m * sigma_dot_hess_h(pg)?,
        phi_n: m * pg.phi_n_norm2(),
        phi_t: -2.0 * m * phi_t,
        phi: (m - pg.t_norm2()) * pg.phi_norm2(),
        phi_h_t: -m * (t.transpose() * &pg.phi_h * &t)[(0, 0)],
        cubic,
        quartic,
    })
}

/// Per-node values and the largest magnitude.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeValues {
    pub values: Vec<f64>,
    pub extreme: f64,
}

/// Pointwise residual `½Δ|σ|² − RHS` of the Simons-type formula.
pub fn simons_residual(
    imm: &Immersion,
    grid: &QuadratureGrid,
    opts: JetOptions,
) -> Result<NodeValues> {
    let values = node_map(imm, grid, 4, opts, |_, pg| Ok(simons_terms(pg)?.residual()))?;
    let extreme = values.iter().map(|v| v.abs()).fold(0.0, f64::max);
    Ok(NodeValues { values, extreme })
}

/// `|∇⊥σ|² − (m/(m+2))(3m|∇⊥h|² + 4(m−1)⟨∇⊥_T h, N⟩)`.
pub fn huisken_slack(pg: &PointGeometry) -> Result<f64> {
    let f = pg.first_derivatives()?;
    let m = pg.m as f64;
    let grad_h: f64 = f.nabla_h.iter().map(|v| v.norm_squared()).sum();
    let mut dth = Vector::zeros(pg.x.len());
    for (k, d) in f.nabla_h.iter().enumerate() {
        dth += d * pg.t_coef[k];
    }
    let bound = m / (m + 2.0) * (3.0 * m * grad_h + 4.0 * (m - 1.0) * dth.dot(&pg.n_vec));
    Ok(grad_sigma_norm2(pg)? - bound)
}

/// Pointwise slack of the Huisken-type inequality; `extreme` is the minimum.
pub fn huisken_check(
    imm: &Immersion,
    grid: &QuadratureGrid,
    opts: JetOptions,
) -> Result<NodeValues> {
    let values = node_map(imm, grid, 3, opts, |_, pg| huisken_slack(pg))?;
    let extreme = values.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(NodeValues { values, extreme })
}

/// Both sides of `Σ_{α,β}(N([B_α,B_β]) + [tr(B_αB_β)]²) ≤ (3/2)(Σ_α N(B_α))²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MatrixLemma {
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs − lhs`.
    pub slack: f64,
}

pub fn matrix_lemma_check(family: &[DMatrix<f64>]) -> Result<MatrixLemma> {
    if family.len() < 2 {
        return Err(invalid(format!(
            "need at least two matrices, got {}",
            family.len()
        )));
    }
    let m = family[0].nrows();
    for b in family {
        if b.nrows() != m || b.ncols() != m {
            return Err(invalid("matrices must all be square of the same size"));
        }
        if b != &b.transpose() {
            return Err(invalid("matrices must be symmetric"));
        }
    }
    let mut lhs = 0.0;
    for a in family {
        for b in family {
            let tr = (a * b).trace();
            lhs += commutator_norm2(a, b) + tr * tr;
        }
    }
    let total: f64 = family.iter().map(|b| b.norm_squared()).sum();
    let rhs = 1.5 * total * total;
    Ok(MatrixLemma {
        lhs,
        rhs,
        slack: rhs - lhs,
    })
}

/// Symmetric `m×m` matrices with entries uniform in `[−1, 1]`.
pub fn random_family(rng: &mut ChaCha8Rng, p: usize, m: usize) -> Vec<DMatrix<f64>> {
    (0..p)
        .map(|_| {
            let mut b = DMatrix::zeros(m, m);
            for i in 0..m {
                for j in i..m {
                    let v = rng.gen_range(-1.0..=1.0);
                    b[(i, j)] = v;
                    b[(j, i)] = v;
                }
            }
            b
        })
        .collect()
}

/// The equality case `diag(1,−1)`, `[[0,1],[1,0]]`.
pub fn extremal_pair() -> Vec<DMatrix<f64>> {
    vec![
        DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]),
        DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub trials: usize,
    pub seed: u64,
    pub min_slack: f64,
    /// Index of the trial attaining `min_slack`.
    pub worst_trial: usize,
}

/// Sweep over seeded random families. `p` and `m` give the family size and
/// matrix dimension; `None` draws them per trial from `2..=6` and `1..=5`.
pub fn matrix_lemma_sweep(
    trials: usize,
    p: Option<usize>,
    m: Option<usize>,
    seed: u64,
) -> Result<SweepReport> {
    if trials == 0 {
        return Err(invalid("at least one trial is required"));
    }
    if p.is_some_and(|p| p < 2) {
        return Err(invalid("the matrix inequality needs p >= 2"));
    }
    if m == Some(0) {
        return Err(invalid("matrix dimension must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut min_slack = f64::INFINITY;
    let mut worst_trial = 0;
    for k in 0..trials {
        let pp = p.unwrap_or_else(|| rng.gen_range(2..=6));
        let mm = m.unwrap_or_else(|| rng.gen_range(1..=5));
        let r = matrix_lemma_check(&random_family(&mut rng, pp, mm))?;
        if r.slack < min_slack {
            min_slack = r.slack;
            worst_trial = k;
        }
    }
    Ok(SweepReport {
        trials,
        seed,
        min_slack,
        worst_trial,
    })
}

/// Largest residual of the surface identities
/// `A_αA_β − A_βA_α = φ_αφ_β − φ_βφ_α`, `tr(φ_α²φ_β) = 0`,
/// `Σ tr(A_β)tr(A_α²A_β) = 2H²|φ|² + 4H⁴ + 4Σ H^αH^β tr(φ_αφ_β)` and
/// `Σ [tr(A_αA_β)]² = Σ [tr(φ_αφ_β)]² + 4H⁴ + 4Σ H^αH^β tr(φ_αφ_β)`.
pub fn surface_trace_identities_check(pg: &PointGeometry) -> Result<f64> {
    if pg.m != 2 {
        return Err(invalid("these identities hold for surfaces (m = 2)"));
    }
    let (a, phi, hc) = (&pg.a, &pg.phi, &pg.h_coef);
    let h2 = pg.h_norm2();
    let phi2 = pg.phi_norm2();
    let mut worst = 0.0f64;
    let mut cubic = 0.0;
    let mut quartic = 0.0;
    let mut phi_quartic = 0.0;
    let mut mixed = 0.0;
    for al in 0..a.len() {
        for be in 0..a.len() {
            let lhs = &a[al] * &a[be] - &a[be] * &a[al];
            let rhs = &phi[al] * &phi[be] - &phi[be] * &phi[al];
            worst = worst.max((lhs - rhs).abs().max());
            worst = worst.max((&phi[al] * &phi[al] * &phi[be]).trace().abs());
            cubic += a[be].trace() * (&a[al] * &a[al] * &a[be]).trace();
            let t = (&a[al] * &a[be]).trace();
            quartic += t * t;
            let tp = (&phi[al] * &phi[be]).trace();
            phi_quartic += tp * tp;
            mixed += hc[al] * hc[be] * tp;
        }
    }
    worst = worst.max((cubic - (2.0 * h2 * phi2 + 4.0 * h2 * h2 + 4.0 * mixed)).abs());
    worst = worst.max((quartic - (phi_quartic + 4.0 * h2 * h2 + 4.0 * mixed)).abs());
    Ok(worst)
}
