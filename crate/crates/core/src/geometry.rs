//! Pointwise extrinsic geometry of an immersion in `S^n × ℝ`.
//!
//! Everything is computed through the flat embedding `S^n × ℝ ⊂ ℝ^{n+2}`.
//! A [`LocalExpansion`] holds Taylor expansions of the chart and the induced
//! quantities around one parameter point, so covariant derivatives of `σ`,
//! `h`, `T` and `N` are obtained by differentiating expansions. A
//! [`PointGeometry`] evaluates those expansions in an orthonormal frame.

use crate::error::{invalid, GeomError, Result};
use crate::immersion::Immersion;
use crate::taylor::{taxpy, td, tdot, tinverse, tscale, tsub, tvalues, Taylor};
use nalgebra::{DMatrix, DVector};

/// Points with `det g` at or below this value are reported as degenerate.
pub const DEGENERACY_THRESHOLD: f64 = 1e-12;

/// How derivative jets are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct JetOptions {
    /// Use finite differences even when a closed-form chart is available.
    pub force_fd: bool,
    /// Base finite-difference step (defaults to `1e-3 ·` domain extent).
    pub fd_step: Option<f64>,
}

impl JetOptions {
    pub fn finite_differences(step: Option<f64>) -> JetOptions {
        JetOptions {
            force_fd: true,
            fd_step: step,
        }
    }
}

/// Taylor expansion of an immersion and its induced quantities at a point.
pub struct LocalExpansion {
    m: usize,
    dim: usize,
    point: Vec<f64>,
    x: Vec<Taylor>,
    dx: Vec<Vec<Taylor>>,
    g: Vec<Vec<Taylor>>,
    ginv: Vec<Vec<Taylor>>,
    // gamma[k][i][j] = Γ^k_ij
    gamma: Vec<Vec<Vec<Taylor>>>,
    nrm: Vec<Taylor>,
}

impl LocalExpansion {
    pub fn new(imm: &Immersion, p: &[f64], order: usize, opts: JetOptions) -> Result<Self> {
        if !(2..=4).contains(&order) {
            return Err(invalid(format!("expansion order {order} outside 2..=4")));
        }
        imm.evaluate(p)?;
        let x = match (opts.force_fd, imm.closed_form_taylor(p, order)) {
            (false, Some(x)) => x,
            _ => {
                let step = opts.fd_step.unwrap_or_else(|| imm.default_fd_step());
                imm.fd_jet(p, order, step)?.to_taylor()
            }
        };
        Self::from_taylor(p, x)
    }

    /// Builds the expansion from Taylor expansions of the chart components.
    pub fn from_taylor(p: &[f64], x: Vec<Taylor>) -> Result<Self> {
        let m = p.len();
        let dim = x.len();
        let dx: Vec<Vec<Taylor>> = (0..m).map(|a| td(&x, a)).collect();
        let g: Vec<Vec<Taylor>> = (0..m)
            .map(|a| (0..m).map(|b| tdot(&dx[a], &dx[b])).collect())
            .collect();
        let gval = DMatrix::from_fn(m, m, |a, b| g[a][b].value());
        let det = gval.determinant();
        if !(det > DEGENERACY_THRESHOLD) {
            return Err(GeomError::DegenerateImmersion {
                point: p.to_vec(),
                reason: format!("det g = {det:e}"),
            });
        }
        let ginv = tinverse(&g);
        // ∂_l g_ij
        let dg: Vec<Vec<Vec<Taylor>>> = (0..m)
            .map(|l| {
                (0..m)
                    .map(|i| (0..m).map(|j| g[i][j].d(l)).collect())
                    .collect()
            })
            .collect();
        let gamma = (0..m)
            .map(|k| {
                (0..m)
                    .map(|i| {
                        (0..m)
                            .map(|j| {
                                let mut acc: Option<Taylor> = None;
                                for l in 0..m {
                                    let bracket = &(&dg[i][j][l] + &dg[j][i][l]) - &dg[l][i][j];
                                    let term = &ginv[k][l] * &bracket;
                                    acc = Some(match acc {
                                        None => term,
                                        Some(a) => a + term,
                                    });
                                }
                                acc.expect("m >= 1") * 0.5
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let mut nrm = x.clone();
        let last = dim - 1;
        nrm[last] = x[last].konst(0.0);
        Ok(LocalExpansion {
            m,
            dim,
            point: p.to_vec(),
            x,
            dx,
            g,
            ginv,
            gamma,
            nrm,
        })
    }

    pub fn order(&self) -> usize {
        self.x[0].deg()
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn point(&self) -> &[f64] {
        &self.point
    }

    pub fn x(&self) -> &[Taylor] {
        &self.x
    }

    pub fn dx(&self, a: usize) -> &[Taylor] {
        &self.dx[a]
    }

    pub fn metric(&self) -> &[Vec<Taylor>] {
        &self.g
    }

    pub fn inverse_metric(&self) -> &[Vec<Taylor>] {
        &self.ginv
    }

    pub fn christoffel(&self, k: usize, i: usize, j: usize) -> &Taylor {
        &self.gamma[k][i][j]
    }

    /// Coordinate components `g^{ab}⟨x_b, v⟩` of the tangential part of `v`.
    pub fn tangent_components(&self, v: &[Taylor]) -> Vec<Taylor> {
        let dots: Vec<Taylor> = (0..self.m).map(|b| tdot(&self.dx[b], v)).collect();
        (0..self.m)
            .map(|a| {
                let mut acc = &self.ginv[a][0] * &dots[0];
                for b in 1..self.m {
                    acc += &(&self.ginv[a][b] * &dots[b]);
                }
                acc
            })
            .collect()
    }

    /// Tangential part of an ambient vector.
    pub fn project_tangent(&self, v: &[Taylor]) -> Vec<Taylor> {
        let c = self.tangent_components(v);
        let mut out = tscale(&c[0], &self.dx[0]);
        for a in 1..self.m {
            out = taxpy(&out, &c[a], &self.dx[a]);
        }
        out
    }

    /// Part of an ambient vector normal to `Σ` inside `T(S^n × ℝ)`.
    pub fn project_normal(&self, v: &[Taylor]) -> Vec<Taylor> {
        let vn = tdot(v, &self.nrm);
        let w = taxpy(v, &(-vn), &self.nrm);
        tsub(&w, &self.project_tangent(&w))
    }

    /// `σ(∂_a, ∂_b)` as an ambient vector.
    pub fn sigma(&self, a: usize, b: usize) -> Vec<Taylor> {
        self.project_normal(&td(&self.dx[a], b))
    }

    fn sigma_all(&self) -> Vec<Vec<Vec<Taylor>>> {
        (0..self.m)
            .map(|a| (0..self.m).map(|b| self.sigma(a, b)).collect())
            .collect()
    }

    fn trace_g(&self, s: &[Vec<Vec<Taylor>>]) -> Vec<Taylor> {
        let mut acc: Option<Vec<Taylor>> = None;
        for a in 0..self.m {
            for b in 0..self.m {
                let term = tscale(&self.ginv[a][b], &s[a][b]);
                acc = Some(match acc {
                    None => term,
                    Some(v) => v.iter().zip(&term).map(|(x, y)| x + y).collect(),
                });
            }
        }
        acc.expect("m >= 1")
    }

    /// Mean curvature vector `h = (1/m) tr σ`.
    pub fn mean_curvature(&self) -> Vec<Taylor> {
        let tr = self.trace_g(&self.sigma_all());
        let inv = tr[0].konst(1.0 / self.m as f64);
        tscale(&inv, &tr)
    }

    fn vertical(&self) -> Vec<Taylor> {
        let mut e: Vec<Taylor> = self.x.iter().map(|c| c.konst(0.0)).collect();
        e[self.dim - 1] = self.x[0].konst(1.0);
        e
    }

    /// `T`, the tangential part of `∂t`.
    pub fn t_field(&self) -> Vec<Taylor> {
        self.project_tangent(&self.vertical())
    }

    /// `N`, the normal part of `∂t`.
    pub fn n_field(&self) -> Vec<Taylor> {
        self.project_normal(&self.vertical())
    }

    /// `∇⊥_{∂_a} ξ` for a normal field given by its expansion.
    pub fn normal_derivative(&self, xi: &[Taylor], a: usize) -> Vec<Taylor> {
        self.project_normal(&td(xi, a))
    }

    /// `∇_{∂_a} V` for a tangent field given by its ambient expansion.
    pub fn tangent_derivative(&self, v: &[Taylor], a: usize) -> Vec<Taylor> {
        self.project_tangent(&td(v, a))
    }

    /// `(∇²ξ)(∂_a, ∂_b) = ∇⊥_a ∇⊥_b ξ − ∇⊥_{∇_a ∂_b} ξ` for all `a, b`.
    pub fn normal_hessian(&self, xi: &[Taylor]) -> Vec<Vec<Vec<Taylor>>> {
        let first: Vec<Vec<Taylor>> = (0..self.m).map(|c| self.normal_derivative(xi, c)).collect();
        (0..self.m)
            .map(|a| {
                (0..self.m)
                    .map(|b| {
                        let mut out = self.normal_derivative(&first[b], a);
                        for c in 0..self.m {
                            out = taxpy(&out, &(-&self.gamma[c][a][b]), &first[c]);
                        }
                        out
                    })
                    .collect()
            })
            .collect()
    }

    /// Rough Laplacian `Δ⊥ξ = g^{ab} (∇²ξ)(∂_a, ∂_b)`.
    pub fn rough_laplacian(&self, xi: &[Taylor]) -> Vec<Taylor> {
        self.trace_g(&self.normal_hessian(xi))
    }

    /// Coordinate Hessian `∂_ab f − Γ^c_ab ∂_c f` of a scalar expansion.
    pub fn scalar_hessian(&self, f: &Taylor) -> Vec<Vec<Taylor>> {
        let df: Vec<Taylor> = (0..self.m).map(|c| f.d(c)).collect();
        (0..self.m)
            .map(|a| {
                (0..self.m)
                    .map(|b| {
                        let mut out = df[b].d(a);
                        for c in 0..self.m {
                            out -= &(&self.gamma[c][a][b] * &df[c]);
                        }
                        out
                    })
                    .collect()
            })
            .collect()
    }

    /// Laplace–Beltrami operator of a scalar expansion.
    pub fn laplacian(&self, f: &Taylor) -> Taylor {
        let hess = self.scalar_hessian(f);
        let mut acc = &self.ginv[0][0] * &hess[0][0];
        for a in 0..self.m {
            for b in 0..self.m {
                if a + b > 0 {
                    acc += &(&self.ginv[a][b] * &hess[a][b]);
                }
            }
        }
        acc
    }

    /// Ambient gradient `g^{ab} ∂_b f x_a` of a scalar expansion.
    pub fn gradient(&self, f: &Taylor) -> Vec<Taylor> {
        let mut out: Option<Vec<Taylor>> = None;
        for a in 0..self.m {
            let mut coef = &self.ginv[a][0] * &f.d(0);
            for b in 1..self.m {
                coef += &(&self.ginv[a][b] * &f.d(b));
            }
            let term = tscale(&coef, &self.dx[a]);
            out = Some(match out {
                None => term,
                Some(v) => v.iter().zip(&term).map(|(x, y)| x + y).collect(),
            });
        }
        out.expect("m >= 1")
    }

    /// `⟨∇⊥σ⟩` in coordinates: `[c][a][b] = (∇⊥_{∂_c} σ)(∂_a, ∂_b)`.
    fn sigma_derivative(&self, sigma: &[Vec<Vec<Taylor>>]) -> Vec<Vec<Vec<Vec<Taylor>>>> {
        let m = self.m;
        (0..m)
            .map(|c| {
                (0..m)
                    .map(|a| {
                        (0..m)
                            .map(|b| {
                                let mut out = self.normal_derivative(&sigma[a][b], c);
                                for d in 0..m {
                                    out = taxpy(&out, &(-&self.gamma[d][c][a]), &sigma[d][b]);
                                    out = taxpy(&out, &(-&self.gamma[d][c][b]), &sigma[a][d]);
                                }
                                out
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect()
    }

    /// Coordinate components `⟨R(∂_a,∂_b)∂_c, ∂_d⟩` of the intrinsic curvature
    /// in the common convention `R(X,Y) = [∇_X, ∇_Y] − ∇_{[X,Y]}`.
    fn riemann_std(&self) -> Vec<f64> {
        let m = self.m;
        let gam = |k: usize, i: usize, j: usize| self.gamma[k][i][j].value();
        let dgam = |k: usize, i: usize, j: usize, a: usize| self.gamma[k][i][j].d1(a);
        let mut up = vec![0.0; m * m * m * m]; // [l][a][b][c] = R^l_abc
        for l in 0..m {
            for a in 0..m {
                for b in 0..m {
                    for c in 0..m {
                        let mut v = dgam(l, b, c, a) - dgam(l, a, c, b);
                        for p in 0..m {
                            v += gam(l, a, p) * gam(p, b, c) - gam(l, b, p) * gam(p, a, c);
                        }
                        up[((l * m + a) * m + b) * m + c] = v;
                    }
                }
            }
        }
        let mut low = vec![0.0; m * m * m * m]; // [a][b][c][d]
        for a in 0..m {
            for b in 0..m {
                for c in 0..m {
                    for d in 0..m {
                        let mut v = 0.0;
                        for l in 0..m {
                            v += self.g[d][l].value() * up[((l * m + a) * m + b) * m + c];
                        }
                        low[((a * m + b) * m + c) * m + d] = v;
                    }
                }
            }
        }
        low
    }
}

/// Ambient vector type used for pointwise output.
pub type Vector = DVector<f64>;

pub(crate) fn vec_of(v: &[Taylor]) -> Vector {
    DVector::from_vec(tvalues(v))
}

/// Covariant derivatives available from order-3 expansions.
#[derive(Debug, Clone)]
pub struct FirstDerivatives {
    /// `[k][i][j] = (∇⊥_{e_k} σ)(e_i, e_j)`.
    pub nabla_sigma: Vec<Vec<Vec<Vector>>>,
    /// `[k] = ∇⊥_{e_k} h`.
    pub nabla_h: Vec<Vector>,
    /// `[k] = ∇_{e_k} T`.
    pub nabla_t: Vec<Vector>,
    /// `[k] = ∇⊥_{e_k} N`.
    pub nabla_n: Vec<Vector>,
    /// `[i][j][k][l] = ⟨R(e_i, e_j) e_k, e_l⟩` with `R = ∇_{[X,Y]} − [∇_X, ∇_Y]`.
    pub riemann: Vec<f64>,
}

/// Second covariant derivatives available from order-4 expansions.
#[derive(Debug, Clone)]
pub struct SecondDerivatives {
    /// `[i][j] = (∇²h)(e_i, e_j)`.
    pub hess_h: Vec<Vec<Vector>>,
    /// `Δ⊥h`.
    pub lap_h: Vector,
    /// `Δ|σ|²`.
    pub lap_sigma2: f64,
    /// `Δ(H²)`.
    pub lap_h2: f64,
}

/// Orthonormal frames at a point.
#[derive(Debug, Clone)]
pub struct Frames {
    pub tangent: Vec<Vector>,
    pub normal: Vec<Vector>,
    /// `e_i = Σ_a change[(i, a)] ∂_a x`.
    pub change: DMatrix<f64>,
}

/// All pointwise tensors at one parameter point.
#[derive(Debug, Clone)]
pub struct PointGeometry {
    pub point: Vec<f64>,
    pub m: usize,
    pub x: Vector,
    pub metric: DMatrix<f64>,
    pub inverse_metric: DMatrix<f64>,
    /// `√det g`.
    pub density: f64,
    /// `[k][i][j] = Γ^k_ij`.
    pub christoffel: Vec<Vec<Vec<f64>>>,
    pub frames: Frames,
    /// `σ(e_i, e_j)` as ambient vectors.
    pub sigma: Vec<Vec<Vector>>,
    pub h: Vector,
    pub t: Vector,
    pub n_vec: Vector,
    /// `⟨T, e_i⟩`.
    pub t_coef: Vec<f64>,
    // Gauge-dependent coefficients, rebuilt by `with_normal_rotation`.
    /// Weingarten matrices `A_α` in the tangent frame.
    pub a: Vec<DMatrix<f64>>,
    pub h_coef: Vec<f64>,
    pub n_coef: Vec<f64>,
    pub phi: Vec<DMatrix<f64>>,
    pub a_h: DMatrix<f64>,
    pub phi_h: DMatrix<f64>,
    pub a_n: DMatrix<f64>,
    pub phi_n: DMatrix<f64>,
    pub first: Option<FirstDerivatives>,
    pub second: Option<SecondDerivatives>,
}

fn traceless(a: &DMatrix<f64>) -> DMatrix<f64> {
    let m = a.nrows();
    a - DMatrix::identity(m, m) * (a.trace() / m as f64)
}

fn frame_normals(tangent: &[Vector], nrm: &Vector, count: usize) -> Vec<Vector> {
    let dim = nrm.len();
    let mut basis: Vec<Vector> = tangent.to_vec();
    basis.push(nrm.normalize());
    let mut out = Vec::with_capacity(count);
    let residual = |v: &Vector, basis: &[Vector]| {
        let mut r = v.clone();
        for _ in 0..2 {
            for b in basis {
                r -= b * b.dot(&r);
            }
        }
        r
    };
    let mut used = vec![false; dim];
    while out.len() < count {
        // Standard basis vector with the largest remaining component (lowest
        // index on ties).
        let mut best: Option<(usize, Vector, f64)> = None;
        for k in 0..dim {
            if used[k] {
                continue;
            }
            let r = residual(
                &Vector::from_fn(dim, |i, _| if i == k { 1.0 } else { 0.0 }),
                &basis,
            );
            let nr = r.norm();
            if best.as_ref().is_none_or(|(_, _, b)| nr > *b + 1e-12) {
                best = Some((k, r, nr));
            }
        }
        let (k, r, nr) = best.expect("normal space dimension matches ambient");
        used[k] = true;
        let e = r / nr;
        basis.push(e.clone());
        out.push(e);
    }
    out
}

impl PointGeometry {
    /// Evaluates the expansion in orthonormal frames. Derivative data is
    /// filled in when the expansion order allows it (3 for first covariant
    /// derivatives, 4 for second).
    pub fn from_expansion(le: &LocalExpansion) -> Result<PointGeometry> {
        let m = le.m;
        let dim = le.dim;
        let order = le.order();
        let metric = DMatrix::from_fn(m, m, |a, b| le.g[a][b].value());
        let inverse_metric = DMatrix::from_fn(m, m, |a, b| le.ginv[a][b].value());
        let density = metric.determinant().sqrt();
        let christoffel = (0..m)
            .map(|k| {
                (0..m)
                    .map(|i| (0..m).map(|j| le.gamma[k][i][j].value()).collect())
                    .collect()
            })
            .collect();
        let chol = metric
            .clone()
            .cholesky()
            .ok_or_else(|| GeomError::DegenerateImmersion {
                point: le.point.clone(),
                reason: "metric not positive definite".into(),
            })?;
        let change = chol
            .l()
            .try_inverse()
            .ok_or_else(|| GeomError::DegenerateImmersion {
                point: le.point.clone(),
                reason: "metric factor not invertible".into(),
            })?;
        let dxv: Vec<Vector> = (0..m).map(|a| vec_of(&le.dx[a])).collect();
        let tangent: Vec<Vector> = (0..m)
            .map(|i| {
                let mut v = Vector::zeros(dim);
                for a in 0..m {
                    v += &dxv[a] * change[(i, a)];
                }
                v
            })
            .collect();
        let nrm = vec_of(&le.nrm);
        if dim < m + 2 {
            return Err(invalid("ambient dimension too small for the submanifold"));
        }
        let normal = frame_normals(&tangent, &nrm, dim - 1 - m);

        // Coordinate tensor → frame tensor.
        let to_frame2 = |s: &dyn Fn(usize, usize) -> Vector| -> Vec<Vec<Vector>> {
            let coord: Vec<Vec<Vector>> =
                (0..m).map(|a| (0..m).map(|b| s(a, b)).collect()).collect();
            (0..m)
                .map(|i| {
                    (0..m)
                        .map(|j| {
                            let mut v = Vector::zeros(dim);
                            for a in 0..m {
                                for b in 0..m {
                                    let c = change[(i, a)] * change[(j, b)];
                                    if c != 0.0 {
                                        v += &coord[a][b] * c;
                                    }
                                }
                            }
                            v
                        })
                        .collect()
                })
                .collect()
        };
        let to_frame1 = |coord: &[Vector]| -> Vec<Vector> {
            (0..m)
                .map(|i| {
                    let mut v = Vector::zeros(dim);
                    for a in 0..m {
                        v += &coord[a] * change[(i, a)];
                    }
                    v
                })
                .collect()
        };

        let sigma_t = le.sigma_all();
        let sigma = to_frame2(&|a, b| vec_of(&sigma_t[a][b]));
        let h_t = le.mean_curvature();
        let t_t = le.t_field();
        let n_t = le.n_field();
        let h = vec_of(&h_t);
        let t = vec_of(&t_t);
        let n_vec = vec_of(&n_t);
        let t_coef = tangent.iter().map(|e| e.dot(&t)).collect();

        let first = if order >= 3 {
            let ds = le.sigma_derivative(&sigma_t);
            // [k][i][j] frame: contract c with k, a with i, b with j.
            let mut nabla_sigma = Vec::with_capacity(m);
            for k in 0..m {
                let mut coord: Vec<Vec<Vector>> = vec![vec![Vector::zeros(dim); m]; m];
                for c in 0..m {
                    if change[(k, c)] == 0.0 {
                        continue;
                    }
                    for a in 0..m {
                        for b in 0..m {
                            coord[a][b] += vec_of(&ds[c][a][b]) * change[(k, c)];
                        }
                    }
                }
                nabla_sigma.push(to_frame2(&|a, b| coord[a][b].clone()));
            }
            let nabla_h = to_frame1(
                &(0..m)
                    .map(|c| vec_of(&le.normal_derivative(&h_t, c)))
                    .collect::<Vec<_>>(),
            );
            let nabla_t = to_frame1(
                &(0..m)
                    .map(|c| vec_of(&le.tangent_derivative(&t_t, c)))
                    .collect::<Vec<_>>(),
            );
            let nabla_n = to_frame1(
                &(0..m)
                    .map(|c| vec_of(&le.normal_derivative(&n_t, c)))
                    .collect::<Vec<_>>(),
            );
            let r = le.riemann_std();
            let mut riemann = vec![0.0; m * m * m * m];
            for i in 0..m {
                for j in 0..m {
                    for k in 0..m {
                        for l in 0..m {
                            let mut v = 0.0;
                            for a in 0..m {
                                for b in 0..m {
                                    for c in 0..m {
                                        for d in 0..m {
                                            v += change[(i, a)]
                                                * change[(j, b)]
                                                * change[(k, c)]
                                                * change[(l, d)]
                                                * r[((a * m + b) * m + c) * m + d];
                                        }
                                    }
                                }
                            }
                            riemann[((i * m + j) * m + k) * m + l] = -v;
                        }
                    }
                }
            }
            Some(FirstDerivatives {
                nabla_sigma,
                nabla_h,
                nabla_t,
                nabla_n,
                riemann,
            })
        } else {
            None
        };

        let second = if order >= 4 {
            let hess = le.normal_hessian(&h_t);
            let hess_h = to_frame2(&|a, b| vec_of(&hess[a][b]));
            let lap_h = vec_of(&le.rough_laplacian(&h_t));
            let mut s2: Option<Taylor> = None;
            for a in 0..m {
                for b in 0..m {
                    for c in 0..m {
                        for d in 0..m {
                            let w = &le.ginv[a][c] * &le.ginv[b][d];
                            let term = &w * &tdot(&sigma_t[a][b], &sigma_t[c][d]);
                            s2 = Some(match s2 {
                                None => term,
                                Some(acc) => acc + term,
                            });
                        }
                    }
                }
            }
            let s2 = s2.expect("m >= 1");
            let lap_sigma2 = le.laplacian(&s2).value();
            let lap_h2 = le.laplacian(&tdot(&h_t, &h_t)).value();
            Some(SecondDerivatives {
                hess_h,
                lap_h,
                lap_sigma2,
                lap_h2,
            })
        } else {
            None
        };

        let mut pg = PointGeometry {
            point: le.point.clone(),
            m,
            x: vec_of(&le.x),
            metric,
            inverse_metric,
            density,
            christoffel,
            frames: Frames {
                tangent,
                normal,
                change,
            },
            sigma,
            h,
            t,
            n_vec,
            t_coef,
            a: Vec::new(),
            h_coef: Vec::new(),
            n_coef: Vec::new(),
            phi: Vec::new(),
            a_h: DMatrix::zeros(m, m),
            phi_h: DMatrix::zeros(m, m),
            a_n: DMatrix::zeros(m, m),
            phi_n: DMatrix::zeros(m, m),
            first,
            second,
        };
        pg.rebuild_coefficients();
        Ok(pg)
    }

    fn rebuild_coefficients(&mut self) {
        let m = self.m;
        let normal = &self.frames.normal;
        self.a = normal
            .iter()
            .map(|e| DMatrix::from_fn(m, m, |i, j| self.sigma[i][j].dot(e)))
            .collect();
        self.h_coef = normal.iter().map(|e| self.h.dot(e)).collect();
        self.n_coef = normal.iter().map(|e| self.n_vec.dot(e)).collect();
        self.phi = self.a.iter().map(traceless).collect();
        let mut a_h = DMatrix::zeros(m, m);
        let mut a_n = DMatrix::zeros(m, m);
        for (k, a) in self.a.iter().enumerate() {
            a_h += a * self.h_coef[k];
            a_n += a * self.n_coef[k];
        }
        self.phi_h = traceless(&a_h);
        self.phi_n = traceless(&a_n);
        self.a_h = a_h;
        self.a_n = a_n;
    }

    /// The same geometry with normal frame `e'_α = Σ_β q[(α,β)] e_β`.
    pub fn with_normal_rotation(&self, q: &DMatrix<f64>) -> Result<PointGeometry> {
        let k = self.frames.normal.len();
        if q.nrows() != k || q.ncols() != k {
            return Err(invalid(format!("rotation must be {k}×{k}")));
        }
        let defect = (q * q.transpose() - DMatrix::identity(k, k)).abs().max();
        if defect > 1e-10 {
            return Err(invalid(format!(
                "rotation is not orthogonal (defect {defect:e})"
            )));
        }
        let mut out = self.clone();
        out.frames.normal = (0..k)
            .map(|a| {
                let mut v = Vector::zeros(self.x.len());
                for b in 0..k {
                    v += &self.frames.normal[b] * q[(a, b)];
                }
                v
            })
            .collect();
        out.rebuild_coefficients();
        Ok(out)
    }

    pub fn codim(&self) -> usize {
        self.frames.normal.len()
    }

    /// `|σ|²` from the Weingarten matrices.
    pub fn sigma_norm2(&self) -> f64 {
        self.a.iter().map(|a| a.norm_squared()).sum()
    }

    /// `H²` from the frame components of `h`.
    pub fn h_norm2(&self) -> f64 {
        self.h_coef.iter().map(|x| x * x).sum()
    }

    pub fn h_norm(&self) -> f64 {
        self.h_norm2().sqrt()
    }

    pub fn phi_norm2(&self) -> f64 {
        self.phi.iter().map(|a| a.norm_squared()).sum()
    }

    /// Frobenius norm of `φ_h`.
    pub fn phi_h_norm(&self) -> f64 {
        self.phi_h.norm()
    }

    pub fn phi_n_norm2(&self) -> f64 {
        self.phi_n.norm_squared()
    }

    pub fn t_norm2(&self) -> f64 {
        self.t_coef.iter().map(|x| x * x).sum()
    }

    pub fn n_norm2(&self) -> f64 {
        self.n_coef.iter().map(|x| x * x).sum()
    }

    /// `⟨N, h⟩`.
    pub fn n_dot_h(&self) -> f64 {
        self.n_coef
            .iter()
            .zip(&self.h_coef)
            .map(|(a, b)| a * b)
            .sum()
    }

    /// Gaussian curvature from `2H² = 2K + |φ|² − 2(1 − |T|²)` (surfaces only).
    pub fn gaussian_curvature(&self) -> Option<f64> {
        (self.m == 2).then(|| self.h_norm2() - 0.5 * self.phi_norm2() + 1.0 - self.t_norm2())
    }

    /// Intrinsic sectional curvature from the metric (surfaces, order ≥ 3).
    pub fn intrinsic_curvature(&self) -> Option<f64> {
        let f = self.first.as_ref()?;
        // R(e_0, e_1, e_0, e_1) at flat index ((0·2 + 1)·2 + 0)·2 + 1.
        (self.m == 2).then(|| f.riemann[5])
    }

    /// `σ(X, Y)` for tangent-frame coefficient vectors.
    pub fn sigma_apply(&self, x: &[f64], y: &[f64]) -> Vector {
        let mut v = Vector::zeros(self.x.len());
        for i in 0..self.m {
            for j in 0..self.m {
                let c = x[i] * y[j];
                if c != 0.0 {
                    v += &self.sigma[i][j] * c;
                }
            }
        }
        v
    }

    /// Frame components `[i] = V(e_i)` of a coordinate covector-valued tensor.
    pub fn to_frame1(&self, coord: &[Vector]) -> Vec<Vector> {
        let c = &self.frames.change;
        (0..self.m)
            .map(|i| {
                let mut v = Vector::zeros(coord[0].len());
                for (a, w) in coord.iter().enumerate() {
                    v += w * c[(i, a)];
                }
                v
            })
            .collect()
    }

    /// Frame components `[i][j] = S(e_i, e_j)` of a coordinate bilinear form.
    pub fn to_frame2(&self, coord: &[Vec<Vector>]) -> Vec<Vec<Vector>> {
        let c = &self.frames.change;
        let dim = coord[0][0].len();
        (0..self.m)
            .map(|i| {
                (0..self.m)
                    .map(|j| {
                        let mut v = Vector::zeros(dim);
                        for a in 0..self.m {
                            for b in 0..self.m {
                                let w = c[(i, a)] * c[(j, b)];
                                if w != 0.0 {
                                    v += &coord[a][b] * w;
                                }
                            }
                        }
                        v
                    })
                    .collect()
            })
            .collect()
    }

    /// Frame matrix `C S Cᵀ` of a scalar coordinate bilinear form.
    pub fn to_frame_matrix(&self, coord: &DMatrix<f64>) -> DMatrix<f64> {
        let c = &self.frames.change;
        c * coord * c.transpose()
    }

    /// Ambient tangent vector with frame coefficients `c`.
    pub fn tangent_vector(&self, c: &[f64]) -> Vector {
        let mut v = Vector::zeros(self.x.len());
        for (i, e) in self.frames.tangent.iter().enumerate() {
            v += e * c[i];
        }
        v
    }

    fn require_first(&self) -> Result<&FirstDerivatives> {
        self.first
            .as_ref()
            .ok_or_else(|| invalid("covariant derivatives need an order-3 expansion"))
    }

    pub(crate) fn require_second(&self) -> Result<&SecondDerivatives> {
        self.second
            .as_ref()
            .ok_or_else(|| invalid("second covariant derivatives need an order-4 expansion"))
    }

    pub fn first_derivatives(&self) -> Result<&FirstDerivatives> {
        self.require_first()
    }
}

/// Builds the point geometry of `imm` at `p` from an expansion of `order`.
pub fn pointwise_geometry(
    imm: &Immersion,
    p: &[f64],
    order: usize,
    opts: JetOptions,
) -> Result<PointGeometry> {
    PointGeometry::from_expansion(&LocalExpansion::new(imm, p, order, opts)?)
}

fn check_tangent(base: &[f64], v: &[f64], what: &str) -> Result<()> {
    let k = base.len() - 1;
    let dot: f64 = (0..k).map(|i| base[i] * v[i]).sum();
    let scale = 1.0 + v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if dot.abs() > 1e-10 * scale {
        return Err(invalid(format!(
            "{what} is not tangent to S^n × ℝ (radial part {dot:e})"
        )));
    }
    Ok(())
}

/// Levi-Civita connection of `S^n × ℝ`: `∇̄_X Y = D_X Y + ⟨X_s, Y_s⟩ (p, 0)`,
/// where `dy` is the Euclidean derivative of `Y` along `X` and `_s` denotes the
/// sphere part.
pub fn ambient_connection(base: &[f64], x: &[f64], y: &[f64], dy: &[f64]) -> Result<Vec<f64>> {
    let dim = base.len();
    if x.len() != dim || y.len() != dim || dy.len() != dim {
        return Err(invalid("dimension mismatch"));
    }
    check_tangent(base, x, "X")?;
    let k = dim - 1;
    let c: f64 = (0..k).map(|i| x[i] * y[i]).sum();
    let mut out = dy.to_vec();
    for i in 0..k {
        out[i] += c * base[i];
    }
    Ok(out)
}

/// Curvature of `S^n × ℝ` with `R̄(X,Y)Z = ∇̄_{[X,Y]}Z − [∇̄_X, ∇̄_Y]Z`:
/// `⟨X,Z⟩Y − ⟨Y,Z⟩X + ⟨Z,∂t⟩(⟨Y,∂t⟩X − ⟨X,∂t⟩Y) + (⟨Y,Z⟩⟨X,∂t⟩ − ⟨X,Z⟩⟨Y,∂t⟩)∂t`.
pub fn ambient_curvature(base: &[f64], x: &[f64], y: &[f64], z: &[f64]) -> Result<Vec<f64>> {
    let dim = base.len();
    if x.len() != dim || y.len() != dim || z.len() != dim {
        return Err(invalid("dimension mismatch"));
    }
    check_tangent(base, x, "X")?;
    check_tangent(base, y, "Y")?;
    check_tangent(base, z, "Z")?;
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>();
    let t = dim - 1;
    let (xz, yz) = (dot(x, z), dot(y, z));
    let (xt, yt, zt) = (x[t], y[t], z[t]);
    let mut out: Vec<f64> = (0..dim)
        .map(|i| xz * y[i] - yz * x[i] + zt * (yt * x[i] - xt * y[i]))
        .collect();
    out[t] += yz * xt - xz * yt;
    Ok(out)
}

/// `|⟨R(X,Y)Z,W⟩ − ⟨R̄(X,Y)Z,W⟩ − ⟨σ(X,Z),σ(Y,W)⟩ + ⟨σ(Y,Z),σ(X,W)⟩|` for
/// tangent-frame indices.
pub fn gauss_residual(pg: &PointGeometry, x: usize, y: usize, z: usize, w: usize) -> Result<f64> {
    let f = pg.require_first()?;
    let m = pg.m;
    if [x, y, z, w].iter().any(|&i| i >= m) {
        return Err(invalid("frame index out of range"));
    }
    let e = |i: usize| pg.frames.tangent[i].as_slice().to_vec();
    let rbar = ambient_curvature(pg.x.as_slice(), &e(x), &e(y), &e(z))?;
    let rbar_w: f64 = rbar.iter().zip(e(w).iter()).map(|(a, b)| a * b).sum();
    let s = |i: usize, j: usize| &pg.sigma[i][j];
    let rhs = rbar_w + s(x, z).dot(s(y, w)) - s(y, z).dot(s(x, w));
    let lhs = f.riemann[((x * m + y) * m + z) * m + w];
    Ok((lhs - rhs).abs())
}

/// Largest Gauss residual over all tangent-frame index quadruples.
pub fn gauss_residual_max(pg: &PointGeometry) -> Result<f64> {
    let m = pg.m;
    let mut worst = 0.0f64;
    for x in 0..m {
        for y in 0..m {
            for z in 0..m {
                for w in 0..m {
                    worst = worst.max(gauss_residual(pg, x, y, z, w)?);
                }
            }
        }
    }
    Ok(worst)
}

/// Largest `|(∇⊥_Yσ)(X,Z) − (∇⊥_Xσ)(Y,Z) − (⟨Y,Z⟩⟨X,T⟩ − ⟨X,Z⟩⟨Y,T⟩)N|`
/// over tangent-frame triples.
pub fn codazzi_residual(pg: &PointGeometry) -> Result<f64> {
    let f = pg.require_first()?;
    let m = pg.m;
    let t = &pg.t_coef;
    let mut worst = 0.0f64;
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                let dij = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
                let coef = dij(j, k) * t[i] - dij(i, k) * t[j];
                let r = &f.nabla_sigma[j][i][k] - &f.nabla_sigma[i][j][k] - &pg.n_vec * coef;
                worst = worst.max(r.norm());
            }
        }
    }
    Ok(worst)
}

/// Largest `|∇_X T − A_N X| + |∇⊥_X N + σ(T, X)|` over tangent-frame vectors.
pub fn dt_compatibility_residual(pg: &PointGeometry) -> Result<f64> {
    let f = pg.require_first()?;
    let m = pg.m;
    let mut worst = 0.0f64;
    for i in 0..m {
        let mut a_n_x = Vector::zeros(pg.x.len());
        for j in 0..m {
            a_n_x += &pg.frames.tangent[j] * pg.sigma[i][j].dot(&pg.n_vec);
        }
        let mut ei = vec![0.0; m];
        ei[i] = 1.0;
        let s_tx = pg.sigma_apply(&pg.t_coef, &ei);
        let r = (&f.nabla_t[i] - a_n_x).norm() + (&f.nabla_n[i] + s_tx).norm();
        worst = worst.max(r);
    }
    Ok(worst)
}

/// Largest deviation of the frames from orthonormality (including the
/// constraint normal) and of `|T|² + |N|²` from 1.
pub fn frame_defect(pg: &PointGeometry) -> f64 {
    let dim = pg.x.len();
    let mut nrm = pg.x.clone();
    nrm[dim - 1] = 0.0;
    let all: Vec<&Vector> = pg.frames.tangent.iter().chain(&pg.frames.normal).collect();
    let mut worst = 0.0f64;
    for (i, a) in all.iter().enumerate() {
        worst = worst.max(a.dot(&nrm).abs());
        for (j, b) in all.iter().enumerate() {
            let want = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((a.dot(b) - want).abs());
        }
    }
    worst.max((pg.t_norm2() + pg.n_norm2() - 1.0).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::immersion::{catalog, SurfaceParams, CATALOG_NAMES};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn surface(name: &str) -> Immersion {
        catalog(name, &SurfaceParams::default()).unwrap()
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

    fn geom(imm: &Immersion, p: &[f64]) -> PointGeometry {
        pointwise_geometry(imm, p, 4, JetOptions::default()).unwrap()
    }

    #[test]
    fn ambient_connection_of_vertical_field_vanishes() {
        let base = [0.6, 0.8, 0.0, 2.0];
        let x = [-0.8, 0.6, 0.5, 1.0];
        let out = ambient_connection(&base, &x, &[0.0, 0.0, 0.0, 1.0], &[0.0; 4]).unwrap();
        assert!(out.iter().all(|v| v.abs() < 1e-12));
        assert!(ambient_connection(&base, &[1.0, 0.0, 0.0, 0.0], &x, &x).is_err());
    }

    #[test]
    fn great_circle_is_a_geodesic() {
        // γ(s) = (cos s, sin s, 0, t): velocity X = (−sin s, cos s, 0, 0),
        // Euclidean acceleration −(cos s, sin s, 0, 0).
        let s = 0.7f64;
        let base = [s.cos(), s.sin(), 0.0, 1.5];
        let x = [-s.sin(), s.cos(), 0.0, 0.0];
        let dy = [-s.cos(), -s.sin(), 0.0, 0.0];
        let acc = ambient_connection(&base, &x, &x, &dy).unwrap();
        assert!(acc.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn ambient_curvature_examples() {
        let base = [1.0, 0.0, 0.0, 0.0];
        let x = [0.0, 1.0, 0.0, 0.0];
        let y = [0.0, 0.0, 1.0, 0.0];
        let dt = [0.0, 0.0, 0.0, 1.0];
        let r = ambient_curvature(&base, &x, &y, &x).unwrap();
        assert_eq!(r, y.to_vec());
        let r = ambient_curvature(&base, &x, &x, &x).unwrap();
        assert!(r.iter().all(|v| *v == 0.0));
        let r = ambient_curvature(&base, &x, &y, &dt).unwrap();
        assert!(r.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn catalog_examples() {
        let g = geom(&surface("slice_sphere"), &[1.0, 2.0]);
        assert!(g.sigma_norm2() < 1e-20 && g.t_norm2() < 1e-20);
        assert!((g.n_norm2() - 1.0).abs() < 1e-12);
        assert!((g.gaussian_curvature().unwrap() - 1.0).abs() < 1e-12);

        let g = geom(&surface("clifford_torus"), &[0.3, 2.0]);
        assert!(g.h_norm() < 1e-12);
        assert!((g.sigma_norm2() - 2.0).abs() < 1e-12);
        assert!((g.phi_norm2() - 2.0).abs() < 1e-12);
        assert!(g.gaussian_curvature().unwrap().abs() < 1e-12);

        let rho = PI / 4.0;
        let g = geom(&surface("small_sphere"), &[1.2, 0.4]);
        assert!(g.phi_norm2() < 1e-20);
        assert!((g.h_norm() - 1.0 / rho.tan()).abs() < 1e-12);
        // A_ν for the unit normal ν = h/H is cot(ρ)·I.
        let a_nu = &g.a_h / g.h_norm();
        let want = DMatrix::identity(2, 2) / rho.tan();
        assert!((a_nu - want).abs().max() < 1e-12);

        let g = geom(&surface("veronese"), &[1.0, 0.5]);
        assert!(g.h_norm() < 1e-12);
        assert!((g.sigma_norm2() - 4.0 / 3.0).abs() < 1e-12);
        assert!((g.gaussian_curvature().unwrap() - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn pointwise_invariants_on_catalog() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for name in CATALOG_NAMES {
            let imm = surface(name);
            for _ in 0..25 {
                let p = random_point(&imm, &mut rng);
                let g = geom(&imm, &p);
                assert!(frame_defect(&g) < 1e-10, "{name}");
                let m = g.m as f64;
                for (k, e) in g.frames.normal.iter().enumerate() {
                    for i in 0..2 {
                        for j in 0..2 {
                            assert!((g.sigma[i][j].dot(e) - g.a[k][(i, j)]).abs() < 1e-9);
                        }
                    }
                    assert!(g.phi[k].trace().abs() < 1e-10);
                }
                assert!((g.phi_norm2() - (g.sigma_norm2() - m * g.h_norm2())).abs() < 1e-9);
                assert!((m * g.h_norm2() - g.a_h.trace()).abs() < 1e-9);
                assert!(gauss_residual_max(&g).unwrap() < 1e-8, "{name}");
                assert!(codazzi_residual(&g).unwrap() < 1e-7, "{name}");
                assert!(dt_compatibility_residual(&g).unwrap() < 1e-7, "{name}");
                let k79 = g.gaussian_curvature().unwrap();
                assert!(
                    (k79 - g.intrinsic_curvature().unwrap()).abs() < 1e-8,
                    "{name}"
                );
            }
        }
    }

    #[test]
    fn gauss_residual_repeated_indices() {
        let g = geom(&surface("graph_torus"), &[0.4, 1.0]);
        assert_eq!(gauss_residual(&g, 1, 1, 0, 1).unwrap(), 0.0);
    }

    #[test]
    fn normal_rotation_preserves_scalars() {
        let g = geom(&surface("graph_torus"), &[0.4, 1.0]);
        let (c, s) = (0.3f64.cos(), 0.3f64.sin());
        let q = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]);
        let r = g.with_normal_rotation(&q).unwrap();
        for (a, b) in [
            (g.sigma_norm2(), r.sigma_norm2()),
            (g.h_norm2(), r.h_norm2()),
            (g.phi_norm2(), r.phi_norm2()),
            (g.phi_h_norm(), r.phi_h_norm()),
            (g.n_dot_h(), r.n_dot_h()),
            (
                g.gaussian_curvature().unwrap(),
                r.gaussian_curvature().unwrap(),
            ),
        ] {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((g.a[0][(0, 1)] - r.a[0][(0, 1)]).abs() > 1e-6 || g.a[0][(0, 1)].abs() < 1e-6);
        assert!(g
            .with_normal_rotation(&DMatrix::from_element(2, 2, 1.0))
            .is_err());
    }

    #[test]
    fn finite_difference_geometry_agrees() {
        let imm = surface("graph_torus");
        let p = [0.4, 1.0];
        let a = geom(&imm, &p);
        let b = pointwise_geometry(&imm, &p, 2, JetOptions::finite_differences(None)).unwrap();
        assert!((a.sigma_norm2() - b.sigma_norm2()).abs() < 1e-7);
        assert!((a.gaussian_curvature().unwrap() - b.gaussian_curvature().unwrap()).abs() < 1e-7);
    }

    #[test]
    fn degenerate_metric_rejected() {
        // Sphere chart at the pole.
        let imm = surface("slice_sphere");
        let err = pointwise_geometry(&imm, &[0.0, 0.3], 2, JetOptions::default()).unwrap_err();
        assert!(matches!(err, GeomError::DegenerateImmersion { .. }));
    }
}
