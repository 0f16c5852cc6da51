//! Differential operators on scalar and normal fields: `∇⊥`, the rough
//! Laplacian `Δ⊥`, Hessian and Laplace–Beltrami, the tensor `P`, the
//! operators `□` and `□*`, and the integral identities relating them.
//!
//! Fields are given analytically ([`ScalarFieldSpec`], [`NormalFieldSpec`]) and
//! differentiated exactly inside each node's [`LocalExpansion`]; results are
//! sampled on the quadrature grid. Normal fields are always stored in ambient
//! coordinates, so the arbitrary choice of normal frame never enters a
//! derivative.

use crate::error::{invalid, GeomError, Result};
use crate::fields::{NormalFieldSpec, ScalarFieldSpec};
use crate::geometry::{vec_of, JetOptions, LocalExpansion, PointGeometry, Vector};
use crate::immersion::Immersion;
use crate::quadrature::{integrate, QuadratureGrid};
use crate::taylor::{tscale, Taylor};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

/// Per-node ambient normal vectors on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalField {
    pub resolution: Vec<usize>,
    pub values: Vec<Vector>,
}

/// Per-node real values on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub resolution: Vec<usize>,
    pub values: Vec<f64>,
}

/// Runs `f` at every grid node (in parallel) and returns the results in node
/// order.
pub fn node_map<T, F>(
    imm: &Immersion,
    grid: &QuadratureGrid,
    order: usize,
    opts: JetOptions,
    f: F,
) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&LocalExpansion, &PointGeometry) -> Result<T> + Sync,
{
    if grid.domain() != imm.domain() {
        return Err(invalid("grid was built for a different parameter domain"));
    }
    grid.nodes()
        .par_iter()
        .map(|p| {
            let le = LocalExpansion::new(imm, p, order, opts)?;
            let pg = PointGeometry::from_expansion(&le)?;
            f(&le, &pg)
        })
        .collect()
}

/// Area densities `√det g` at the grid nodes.
pub fn densities(imm: &Immersion, grid: &QuadratureGrid, opts: JetOptions) -> Result<Vec<f64>> {
    node_map(imm, grid, 2, opts, |_, pg| Ok(pg.density))
}

/// Expansion of a normal field around the node of `le`.
pub fn normal_field_expansion(le: &LocalExpansion, spec: &NormalFieldSpec) -> Result<Vec<Taylor>> {
    match spec {
        NormalFieldSpec::MeanCurvature(c) => {
            let h = le.mean_curvature();
            Ok(tscale(&h[0].konst(*c), &h))
        }
        NormalFieldSpec::VerticalNormal(c) => {
            let n = le.n_field();
            Ok(tscale(&n[0].konst(*c), &n))
        }
        NormalFieldSpec::Projected(poly) => {
            if poly.in_dim() != le.x().len() || poly.out_dim() != le.x().len() {
                return Err(invalid("projected field must map R^{n+2} to itself"));
            }
            Ok(le.project_normal(&poly.eval(le.x())))
        }
    }
}

/// Expansion of a scalar field around the node of `le`.
pub fn scalar_field_expansion(le: &LocalExpansion, spec: &ScalarFieldSpec) -> Result<Taylor> {
    match spec {
        ScalarFieldSpec::Ambient(poly) if poly.in_dim() != le.x().len() || poly.out_dim() != 1 => {
            Err(invalid("ambient scalar field must map R^{n+2} to R"))
        }
        ScalarFieldSpec::Param(t) if t.terms.iter().any(|term| term.freq.len() != le.m()) => {
            Err(invalid("parameter field frequency length must equal m"))
        }
        _ => {
            let vars = Taylor::variables(le.point(), le.order());
            Ok(spec.eval(le.x(), &vars))
        }
    }
}

/// Derivatives of a normal field at one node, in the tangent frame.
#[derive(Debug, Clone)]
pub struct NormalJet {
    pub value: Vector,
    /// `[k] = ∇⊥_{e_k} ξ`.
    pub first: Vec<Vector>,
    /// `[i][j] = (∇²ξ)(e_i, e_j)`.
    pub hessian: Vec<Vec<Vector>>,
    /// `Δ⊥ξ`.
    pub laplacian: Vector,
}

impl NormalJet {
    pub fn new(le: &LocalExpansion, pg: &PointGeometry, xi: &[Taylor]) -> NormalJet {
        let m = le.m();
        let first: Vec<Vector> = (0..m)
            .map(|c| vec_of(&le.normal_derivative(xi, c)))
            .collect();
        let hess = le.normal_hessian(xi);
        let hess: Vec<Vec<Vector>> = hess
            .iter()
            .map(|row| row.iter().map(|v| vec_of(v)).collect())
            .collect();
        let hessian = pg.to_frame2(&hess);
        let mut laplacian = Vector::zeros(pg.x.len());
        for (i, row) in hessian.iter().enumerate() {
            laplacian += &row[i];
        }
        NormalJet {
            value: vec_of(xi),
            first: pg.to_frame1(&first),
            hessian,
            laplacian,
        }
    }

    /// `∇⊥_X ξ` for tangent-frame coefficients `x`.
    pub fn along(&self, x: &[f64]) -> Vector {
        let mut v = Vector::zeros(self.value.len());
        for (k, d) in self.first.iter().enumerate() {
            v += d * x[k];
        }
        v
    }
}

/// Derivatives of a scalar field at one node, in the tangent frame.
#[derive(Debug, Clone)]
pub struct ScalarJet {
    pub value: f64,
    /// Ambient gradient vector.
    pub gradient: Vector,
    pub hessian: DMatrix<f64>,
    pub laplacian: f64,
}

impl ScalarJet {
    pub fn new(le: &LocalExpansion, pg: &PointGeometry, f: &Taylor) -> ScalarJet {
        let m = le.m();
        let hc = le.scalar_hessian(f);
        let coord = DMatrix::from_fn(m, m, |a, b| hc[a][b].value());
        let hessian = pg.to_frame_matrix(&coord);
        let laplacian = hessian.trace();
        ScalarJet {
            value: f.value(),
            gradient: vec_of(&le.gradient(f)),
            hessian,
            laplacian,
        }
    }
}

/// `P(e_i, e_j) = m δ_ij h − σ(e_i, e_j)` and `P_α = m H^α I − A_α`.
pub fn p_tensor(pg: &PointGeometry) -> (Vec<Vec<Vector>>, Vec<DMatrix<f64>>) {
    let m = pg.m;
    let p = (0..m)
        .map(|i| {
            (0..m)
                .map(|j| {
                    let d = if i == j { m as f64 } else { 0.0 };
                    &pg.h * d - &pg.sigma[i][j]
                })
                .collect()
        })
        .collect();
    let pa =
        pg.a.iter()
            .zip(&pg.h_coef)
            .map(|(a, hc)| DMatrix::identity(m, m) * (m as f64 * hc) - a)
            .collect();
    (p, pa)
}

/// `□*(ξ) = ⟨P, ∇²ξ⟩` evaluated directly as a Hilbert–Schmidt pairing.
pub fn box_star_direct(pg: &PointGeometry, xi: &NormalJet) -> f64 {
    let (p, _) = p_tensor(pg);
    let mut acc = 0.0;
    for i in 0..pg.m {
        for j in 0..pg.m {
            acc += p[i][j].dot(&xi.hessian[i][j]);
        }
    }
    acc
}

/// `□*(ξ) = m⟨h, Δ⊥ξ⟩ − Σ_α tr(A_α ∘ Hess ξ^α)`, where `Hess ξ^α` is the
/// `e_α`-component of `∇²ξ`.
pub fn box_star_at(pg: &PointGeometry, xi: &NormalJet) -> f64 {
    let m = pg.m;
    let mut acc = m as f64 * pg.h.dot(&xi.laplacian);
    for (alpha, e) in pg.frames.normal.iter().enumerate() {
        for i in 0..m {
            for j in 0..m {
                acc -= pg.a[alpha][(i, j)] * xi.hessian[i][j].dot(e);
            }
        }
    }
    acc
}

/// `□(f) = Σ_α tr(P_α ∘ Hess f) e_α`.
pub fn box_at(pg: &PointGeometry, f: &ScalarJet) -> Vector {
    let (_, pa) = p_tensor(pg);
    let mut v = Vector::zeros(pg.x.len());
    for (alpha, e) in pg.frames.normal.iter().enumerate() {
        v += e * (&pa[alpha] * &f.hessian).trace();
    }
    v
}

/// `∇⊥_X ξ` at a single point, `X` given by tangent-frame coefficients.
pub fn normal_derivative(
    imm: &Immersion,
    p: &[f64],
    xi: &NormalFieldSpec,
    x: &[f64],
    opts: JetOptions,
) -> Result<Vector> {
    let le = LocalExpansion::new(imm, p, 4, opts)?;
    let pg = PointGeometry::from_expansion(&le)?;
    if x.len() != pg.m {
        return Err(invalid("tangent vector must have m frame coefficients"));
    }
    let jet = NormalJet::new(&le, &pg, &normal_field_expansion(&le, xi)?);
    Ok(jet.along(x))
}

fn normal_field_map<F>(
    imm: &Immersion,
    grid: &QuadratureGrid,
    opts: JetOptions,
    xi: &NormalFieldSpec,
    f: F,
) -> Result<NormalField>
where
    F: Fn(&PointGeometry, &NormalJet) -> Vector + Sync,
{
    let values = node_map(imm, grid, 4, opts, |le, pg| {
        let jet = NormalJet::new(le, pg, &normal_field_expansion(le, xi)?);
        Ok(f(pg, &jet))
    })?;
    Ok(NormalField {
        resolution: grid.resolution(),
        values,
    })
}

/// The normal field itself sampled on the grid.
pub fn sample_normal_field(
    imm: &Immersion,
    grid: &QuadratureGrid,
    xi: &NormalFieldSpec,
    opts: JetOptions,
) -> Result<NormalField> {
    let values = node_map(imm, grid, 2, opts, |le, _| {
        Ok(vec_of(&normal_field_expansion(le, xi)?))
    })?;
    Ok(NormalField {
        resolution: grid.resolution(),
        values,
    })
}

/// The scalar field sampled on the grid.
pub fn sample_scalar_field(
    imm: &Immersion,
    grid: &QuadratureGrid,
    f: &ScalarFieldSpec,
    opts: JetOptions,
) -> Result<ScalarField> {
    let values = node_map(imm, grid, 2, opts, |le, _| {
        Ok(scalar_field_expansion(le, f)?.value())
    })?;
    Ok(ScalarField {
        resolution: grid.resolution(),
        values,
    })
}

/// `Δ⊥ξ` at every node.
pub fn rough_laplacian(
    imm: &Immersion,
    grid: &QuadratureGrid,
    xi: &NormalFieldSpec,
    opts: JetOptions,
) -> Result<NormalField> {
    normal_field_map(imm, grid, opts, xi, |_, jet| jet.laplacian.clone())
}

/// Tangent-frame Hessian and Laplacian of `f` at every node.
pub fn hessian_and_laplacian(
    imm: &Immersion,
    grid: &QuadratureGrid,
    f: &ScalarFieldSpec,
    opts: JetOptions,
) -> Result<(Vec<DMatrix<f64>>, ScalarField)> {
    let out = node_map(imm, grid, 4, opts, |le, pg| {
        let jet = ScalarJet::new(le, pg, &scalar_field_expansion(le, f)?);
        Ok((jet.hessian, jet.laplacian))
    })?;
    let (hess, lap): (Vec<_>, Vec<_>) = out.into_iter().unzip();
    Ok((
        hess,
        ScalarField {
            resolution: grid.resolution(),
            values: lap,
        },
    ))
}

/// `□*(ξ)` at every node.
pub fn box_star(
    imm: &Immersion,
    grid: &QuadratureGrid,
    xi: &NormalFieldSpec,
    opts: JetOptions,
) -> Result<ScalarField> {
    let values = node_map(imm, grid, 4, opts, |le, pg| {
        let jet = NormalJet::new(le, pg, &normal_field_expansion(le, xi)?);
        Ok(box_star_at(pg, &jet))
    })?;
    Ok(ScalarField {
        resolution: grid.resolution(),
        values,
    })
}

/// `□(f)` at every node.
pub fn box_field(
    imm: &Immersion,
    grid: &QuadratureGrid,
    f: &ScalarFieldSpec,
    opts: JetOptions,
) -> Result<NormalField> {
    let values = node_map(imm, grid, 4, opts, |le, pg| {
        let jet = ScalarJet::new(le, pg, &scalar_field_expansion(le, f)?);
        Ok(box_at(pg, &jet))
    })?;
    Ok(NormalField {
        resolution: grid.resolution(),
        values,
    })
}

/// Both sides of an integral identity and their normalized gap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdentityResidual {
    pub lhs: f64,
    pub rhs: f64,
    /// `|lhs − rhs| / (1 + |lhs| + |rhs|)`.
    pub residual: f64,
}

impl IdentityResidual {
    pub fn new(lhs: f64, rhs: f64) -> IdentityResidual {
        IdentityResidual {
            lhs,
            rhs,
            residual: (lhs - rhs).abs() / (1.0 + lhs.abs() + rhs.abs()),
        }
    }
}

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

/// Integrands of `∫f □*(ξ) = ∫⟨□f, ξ⟩ + (m−1)∫(f⟨∇⊥_Tξ, N⟩ − ⟨N, ξ⟩⟨∇f, T⟩)`.
fn lemma1_integrands(pg: &PointGeometry, f: &ScalarJet, xi: &NormalJet) -> (f64, f64) {
    let m = pg.m as f64;
    let lhs = f.value * box_star_at(pg, xi);
    let rhs = box_at(pg, f).dot(&xi.value)
        + (m - 1.0)
            * (f.value * xi.along(&pg.t_coef).dot(&pg.n_vec)
                - pg.n_vec.dot(&xi.value) * f.gradient.dot(&pg.t));
    (lhs, rhs)
}

/// Integral identity residuals for several `(f, ξ)` pairs in one pass.
pub fn lemma1_batch(
    imm: &Immersion,
    grid: &QuadratureGrid,
    pairs: &[(ScalarFieldSpec, NormalFieldSpec)],
    opts: JetOptions,
) -> Result<Vec<IdentityResidual>> {
    require_compact(imm, "the integration-by-parts identity")?;
    let rows = node_map(imm, grid, 4, opts, |le, pg| {
        let mut out = Vec::with_capacity(pairs.len());
        for (f, xi) in pairs {
            let fj = ScalarJet::new(le, pg, &scalar_field_expansion(le, f)?);
            let xj = NormalJet::new(le, pg, &normal_field_expansion(le, xi)?);
            out.push(lemma1_integrands(pg, &fj, &xj));
        }
        Ok((pg.density, out))
    })?;
    let density: Vec<f64> = rows.iter().map(|r| r.0).collect();
    (0..pairs.len())
        .map(|k| {
            let l: Vec<f64> = rows.iter().map(|r| r.1[k].0).collect();
            let r: Vec<f64> = rows.iter().map(|r| r.1[k].1).collect();
            Ok(IdentityResidual::new(
                integrate(grid, &l, &density)?,
                integrate(grid, &r, &density)?,
            ))
        })
        .collect()
}

/// Residual of `∫f □*(ξ) = ∫⟨□f, ξ⟩ + (m−1)∫(f⟨∇⊥_Tξ, N⟩ − ⟨N, ξ⟩⟨∇f, T⟩)`.
pub fn lemma1_residual(
    imm: &Immersion,
    grid: &QuadratureGrid,
    f: &ScalarFieldSpec,
    xi: &NormalFieldSpec,
    opts: JetOptions,
) -> Result<IdentityResidual> {
    Ok(lemma1_batch(imm, grid, &[(f.clone(), xi.clone())], opts)?[0])
}

/// Residuals of `∫□*(ξ) = (m−1)∫⟨∇⊥_Tξ, N⟩` for several fields in one pass.
pub fn cor1_batch(
    imm: &Immersion,
    grid: &QuadratureGrid,
    fields: &[NormalFieldSpec],
    opts: JetOptions,
) -> Result<Vec<IdentityResidual>> {
    require_compact(imm, "the integration-by-parts identity")?;
    let rows = node_map(imm, grid, 4, opts, |le, pg| {
        let m = pg.m as f64;
        let mut out = Vec::with_capacity(fields.len());
        for xi in fields {
            let xj = NormalJet::new(le, pg, &normal_field_expansion(le, xi)?);
            out.push((
                box_star_at(pg, &xj),
                (m - 1.0) * xj.along(&pg.t_coef).dot(&pg.n_vec),
            ));
        }
        Ok((pg.density, out))
    })?;
    let density: Vec<f64> = rows.iter().map(|r| r.0).collect();
    (0..fields.len())
        .map(|k| {
            let l: Vec<f64> = rows.iter().map(|r| r.1[k].0).collect();
            let r: Vec<f64> = rows.iter().map(|r| r.1[k].1).collect();
            Ok(IdentityResidual::new(
                integrate(grid, &l, &density)?,
                integrate(grid, &r, &density)?,
            ))
        })
        .collect()
}

/// Residual of `∫□*(ξ) = (m−1)∫⟨∇⊥_Tξ, N⟩`.
pub fn cor1_residual(
    imm: &Immersion,
    grid: &QuadratureGrid,
    xi: &NormalFieldSpec,
    opts: JetOptions,
) -> Result<IdentityResidual> {
    Ok(cor1_batch(imm, grid, std::slice::from_ref(xi), opts)?[0])
}

/// `(∫⟨Δ⊥ξ, η⟩, ∫⟨ξ, Δ⊥η⟩)` as an identity residual.
pub fn laplacian_symmetry(
    imm: &Immersion,
    grid: &QuadratureGrid,
    xi: &NormalFieldSpec,
    eta: &NormalFieldSpec,
    opts: JetOptions,
) -> Result<IdentityResidual> {
    require_compact(imm, "self-adjointness of the rough Laplacian")?;
    let rows = node_map(imm, grid, 4, opts, |le, pg| {
        let a = NormalJet::new(le, pg, &normal_field_expansion(le, xi)?);
        let b = NormalJet::new(le, pg, &normal_field_expansion(le, eta)?);
        Ok((
            pg.density,
            a.laplacian.dot(&b.value),
            a.value.dot(&b.laplacian),
        ))
    })?;
    let d: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let l: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let r: Vec<f64> = rows.iter().map(|r| r.2).collect();
    Ok(IdentityResidual::new(
        integrate(grid, &l, &d)?,
        integrate(grid, &r, &d)?,
    ))
}

/// Fourier differentiation matrix for `n` equispaced nodes on a period `len`.
pub fn fourier_diff_matrix(n: usize, len: f64) -> DMatrix<f64> {
    let h = 2.0 * std::f64::consts::PI / n as f64;
    let scale = 2.0 * std::f64::consts::PI / len;
    DMatrix::from_fn(n, n, |j, k| {
        if j == k {
            return 0.0;
        }
        let d = j as f64 - k as f64;
        let sign = if (j + k) % 2 == 0 { 1.0 } else { -1.0 };
        let x = 0.5 * d * h;
        let v = if n.is_multiple_of(2) {
            0.5 * sign / x.tan()
        } else {
            0.5 * sign / x.sin()
        };
        v * scale
    })
}

fn differentiate_axis(grid: &QuadratureGrid, values: &[f64], axis: usize) -> Result<Vec<f64>> {
    let rule = &grid.rules()[axis];
    if !rule.axis.periodic {
        return Err(GeomError::BoundaryStencil { axis });
    }
    let res = grid.resolution();
    let n = res[axis];
    let d = fourier_diff_matrix(n, rule.axis.length());
    let mut out = vec![0.0; values.len()];
    let stride: usize = res[axis + 1..].iter().product();
    for flat in 0..values.len() {
        let idx = grid.axis_indices(flat);
        let base = flat - idx[axis] * stride;
        let j = idx[axis];
        let mut acc = 0.0;
        for k in 0..n {
            acc += d[(j, k)] * values[base + k * stride];
        }
        out[flat] = acc;
    }
    Ok(out)
}

/// Laplace–Beltrami of sampled values, `Δf = (1/√g) ∂_a(√g g^{ab} ∂_b f)`,
/// by spectral differentiation along periodic grid axes. Any non-periodic
/// axis is rejected.
pub fn spectral_laplacian(
    imm: &Immersion,
    grid: &QuadratureGrid,
    f: &ScalarField,
    opts: JetOptions,
) -> Result<ScalarField> {
    if let Some(axis) = grid.rules().iter().position(|r| !r.axis.periodic) {
        return Err(GeomError::BoundaryStencil { axis });
    }
    if f.values.len() != grid.len() {
        return Err(invalid("field does not match the grid"));
    }
    let m = imm.m();
    let metric = node_map(imm, grid, 2, opts, |_, pg| {
        Ok((pg.density, pg.inverse_metric.clone()))
    })?;
    let df: Vec<Vec<f64>> = (0..m)
        .map(|b| differentiate_axis(grid, &f.values, b))
        .collect::<Result<_>>()?;
    let mut lap = vec![0.0; grid.len()];
    for a in 0..m {
        let flux: Vec<f64> = (0..grid.len())
            .map(|k| {
                let (dens, ginv) = &metric[k];
                dens * (0..m).map(|b| ginv[(a, b)] * df[b][k]).sum::<f64>()
            })
            .collect();
        let d = differentiate_axis(grid, &flux, a)?;
        for k in 0..grid.len() {
            lap[k] += d[k];
        }
    }
    for k in 0..grid.len() {
        lap[k] /= metric[k].0;
    }
    Ok(ScalarField {
        resolution: grid.resolution(),
        values: lap,
    })
}
