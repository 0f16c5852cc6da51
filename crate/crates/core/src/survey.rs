//! One pass over a quadrature grid that records every pointwise quantity the
//! integral checks need, so that a full run evaluates each node once.

use crate::error::{invalid, Result};
use crate::geometry::{
    codazzi_residual, dt_compatibility_residual, frame_defect, gauss_residual_max, JetOptions,
    PointGeometry,
};
use crate::immersion::{Immersion, Metadata};
use crate::operators::node_map;
use crate::quadrature::{integrate, QuadratureGrid};
use crate::variational::{
    el_field, grad_sigma_norm2, huisken_slack, sigma_dot_hess_h, simons_terms,
};

/// Pointwise data at one node. Fields that need higher-order expansions are
/// `None` when the survey order is too low.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NodeRecord {
    pub density: f64,
    /// `||x_s|² − 1|`.
    pub constraint: f64,
    /// Frame orthonormality and `|T|² + |N|² = 1` defect.
    pub frame: f64,
    pub gauss: Option<f64>,
    pub codazzi: Option<f64>,
    pub dt: Option<f64>,
    /// Gaussian curvature from the Gauss equation.
    pub k_extrinsic: Option<f64>,
    /// Gaussian curvature from the metric alone.
    pub k_intrinsic: Option<f64>,
    pub sigma2: f64,
    pub phi2: f64,
    pub t2: f64,
    /// `|N|²`.
    pub n2: f64,
    /// Frobenius norm of `φ_h`.
    pub phi_h: f64,
    pub h2: f64,
    pub n_dot_h: f64,
    pub phi_n: f64,
    pub huisken: Option<f64>,
    /// `|∇⊥σ|²`.
    pub grad_sigma2: Option<f64>,
    /// `⟨σ, ∇²h⟩`.
    pub sigma_hess_h: Option<f64>,
    /// `|E|`.
    pub el: Option<f64>,
    pub simons: Option<f64>,
}

impl NodeRecord {
    pub fn from_geometry(pg: &PointGeometry) -> Result<NodeRecord> {
        let k = pg.x.len() - 1;
        let r2: f64 = pg.x.iter().take(k).map(|v| v * v).sum();
        let has_first = pg.first.is_some();
        let has_second = pg.second.is_some();
        let opt = |cond: bool, f: &dyn Fn() -> Result<f64>| -> Result<Option<f64>> {
            if cond {
                f().map(Some)
            } else {
                Ok(None)
            }
        };
        Ok(NodeRecord {
            density: pg.density,
            constraint: (r2 - 1.0).abs(),
            frame: frame_defect(pg),
            gauss: opt(has_first, &|| gauss_residual_max(pg))?,
            codazzi: opt(has_first, &|| codazzi_residual(pg))?,
            dt: opt(has_first, &|| dt_compatibility_residual(pg))?,
            k_extrinsic: pg.gaussian_curvature(),
            k_intrinsic: pg.intrinsic_curvature(),
            sigma2: pg.sigma_norm2(),
            phi2: pg.phi_norm2(),
            t2: pg.t_norm2(),
            n2: pg.n_norm2(),
            phi_h: pg.phi_h_norm(),
            h2: pg.h_norm2(),
            n_dot_h: pg.n_dot_h(),
            phi_n: pg.phi_n_norm2().sqrt(),
            huisken: opt(has_first, &|| huisken_slack(pg))?,
            grad_sigma2: opt(has_first, &|| grad_sigma_norm2(pg))?,
            sigma_hess_h: opt(has_second, &|| sigma_dot_hess_h(pg))?,
            el: opt(has_second, &|| Ok(el_field(pg)?.norm()))?,
            simons: opt(has_second, &|| Ok(simons_terms(pg)?.residual()))?,
        })
    }
}

/// Node records of one surface on one grid.
#[derive(Debug, Clone)]
pub struct Survey {
    pub meta: Metadata,
    pub grid: QuadratureGrid,
    pub order: usize,
    pub records: Vec<NodeRecord>,
}

impl Survey {
    /// `order` 2 gives the algebraic quantities, 3 adds first covariant
    /// derivatives, 4 adds the Laplacian terms.
    pub fn compute(
        imm: &Immersion,
        grid: &QuadratureGrid,
        order: usize,
        opts: JetOptions,
    ) -> Result<Survey> {
        if !(2..=4).contains(&order) {
            return Err(invalid(format!("survey order {order} outside 2..=4")));
        }
        let records = node_map(imm, grid, order, opts, |_, pg| {
            NodeRecord::from_geometry(pg)
        })?;
        Ok(Survey {
            meta: imm.metadata().clone(),
            grid: grid.clone(),
            order,
            records,
        })
    }

    pub fn integrate(&self, f: impl Fn(&NodeRecord) -> f64) -> Result<f64> {
        let samples: Vec<f64> = self.records.iter().map(&f).collect();
        let dens: Vec<f64> = self.records.iter().map(|r| r.density).collect();
        integrate(&self.grid, &samples, &dens)
    }

    /// `(min, max)` of `f` over the nodes.
    pub fn range(&self, f: impl Fn(&NodeRecord) -> f64) -> (f64, f64) {
        self.records
            .iter()
            .map(f)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(v), hi.max(v))
            })
    }

    /// Largest value of an optional quantity; `None` if it was not computed.
    pub fn max_of(&self, f: impl Fn(&NodeRecord) -> Option<f64>) -> Option<f64> {
        self.records
            .iter()
            .map(f)
            .try_fold(f64::NEG_INFINITY, |acc, v| v.map(|v| acc.max(v)))
    }

    pub fn min_of(&self, f: impl Fn(&NodeRecord) -> Option<f64>) -> Option<f64> {
        self.records
            .iter()
            .map(f)
            .try_fold(f64::INFINITY, |acc, v| v.map(|v| acc.min(v)))
    }

    pub fn resolution(&self) -> Vec<usize> {
        self.grid.resolution()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::immersion::{catalog, SurfaceParams};
    use crate::quadrature::build_grid;
    use std::f64::consts::PI;

    #[test]
    fn area_and_orders() {
        let imm = catalog("slice_sphere", &SurfaceParams::default()).unwrap();
        let grid = build_grid(imm.domain(), &[16, 32]).unwrap();
        let s = Survey::compute(&imm, &grid, 2, JetOptions::default()).unwrap();
        assert!((s.integrate(|_| 1.0).unwrap() - 4.0 * PI).abs() < 1e-12);
        assert!(s.max_of(|r| r.el).is_none());
        assert!(s.max_of(|r| r.k_extrinsic).is_some());
        assert!(Survey::compute(&imm, &grid, 5, JetOptions::default()).is_err());
        let s = Survey::compute(&imm, &grid, 4, JetOptions::default()).unwrap();
        assert!(s.max_of(|r| r.el).unwrap() < 1e-10);
        assert!(s.range(|r| r.constraint).1 < 1e-14);
    }
}
