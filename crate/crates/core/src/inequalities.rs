//! Integral inequalities for closed surfaces and their equality cases.
//!
//! Each check has two entry points: one that takes an immersion and grid and
//! builds its own [`Survey`], and a `_from` variant that reuses a survey
//! computed once for a whole run.

use crate::error::{invalid, GeomError, Result};
use crate::geometry::JetOptions;
use crate::immersion::Immersion;
use crate::quadrature::QuadratureGrid;
use crate::survey::{NodeRecord, Survey};
use crate::variational::certification_threshold;
use serde::Serialize;
use std::f64::consts::PI;

/// Relative tolerance of the equality flags.
pub const EQUALITY_TOL: f64 = 1e-5;

/// Largest `|T|` accepted as "contained in a slice".
pub const SLICE_TOL: f64 = 1e-8;

/// `min`/`max` of a pointwise quantity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Extremum {
    pub quantity: String,
    pub min: f64,
    pub max: f64,
}

impl Extremum {
    fn of(survey: &Survey, quantity: &str, f: impl Fn(&NodeRecord) -> f64) -> Extremum {
        let (min, max) = survey.range(f);
        Extremum {
            quantity: quantity.to_string(),
            min,
            max,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InequalityReport {
    pub check: String,
    pub surface: String,
    pub params: Vec<(String, f64)>,
    pub resolution: Vec<usize>,
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs − lhs`.
    pub slack: f64,
    pub extrema: Vec<Extremum>,
    /// `|slack| ≤ tol (1 + |rhs|)`.
    pub equality: bool,
    pub tol: f64,
    /// Whether the surface was certified stationary for `𝓗` (`None` when the
    /// check does not depend on it).
    pub certified: Option<bool>,
    pub notes: Vec<String>,
}

impl InequalityReport {
    fn new(
        check: &str,
        survey: &Survey,
        lhs: f64,
        rhs: f64,
        extrema: Vec<Extremum>,
    ) -> InequalityReport {
        let slack = rhs - lhs;
        InequalityReport {
            check: check.to_string(),
            surface: survey.meta.name.clone(),
            params: survey.meta.params.clone(),
            resolution: survey.resolution(),
            lhs,
            rhs,
            slack,
            extrema,
            equality: slack.abs() <= EQUALITY_TOL * (1.0 + rhs.abs()),
            tol: EQUALITY_TOL,
            certified: None,
            notes: Vec::new(),
        }
    }

    /// `lhs ≤ rhs` up to the equality tolerance.
    pub fn holds(&self) -> bool {
        self.slack >= -self.tol * (1.0 + self.rhs.abs())
    }
}

fn closed_chi(survey: &Survey, what: &str) -> Result<i32> {
    if !survey.meta.compact {
        return Err(GeomError::CompactnessRequired(format!(
            "{what} on {}",
            survey.meta.name
        )));
    }
    survey
        .meta
        .chi
        .ok_or_else(|| invalid(format!("{} has no Euler characteristic", survey.meta.name)))
}

fn require_surface(survey: &Survey) -> Result<()> {
    if survey.grid.domain().dim() != 2 {
        return Err(invalid("the integral inequalities are stated for surfaces"));
    }
    Ok(())
}

/// Whether the survey certifies `max|E| ≤ 1e-6 (1 + max|σ|²)`; `None` below
/// order 4.
pub fn certification(survey: &Survey) -> Option<bool> {
    let el = survey.max_of(|r| r.el)?;
    let s2 = survey.range(|r| r.sigma2).1;
    Some(el <= certification_threshold(s2))
}

/// `|φ|²(1 − 5|T|² − (3/2)|φ|²) − 2(|φ_h| + 1)|T|² + 2`.
pub fn main_integrand(r: &NodeRecord) -> f64 {
    r.phi2 * (1.0 - 5.0 * r.t2 - 1.5 * r.phi2) - 2.0 * (r.phi_h + 1.0) * r.t2 + 2.0
}

/// `|φ|²(1 − (2 − 1/(n−2))|φ|²) + 2`.
pub fn guo_yin_integrand(phi2: f64, n_eff: usize) -> f64 {
    let c = 2.0 - 1.0 / (n_eff as f64 - 2.0);
    phi2 * (1.0 - c * phi2) + 2.0
}

/// The main integrand for surfaces in a slice: `|φ|²(1 − (3/2)|φ|²) + 2`.
pub fn reduced_integrand(phi2: f64) -> f64 {
    phi2 * (1.0 - 1.5 * phi2) + 2.0
}

fn shape_extrema(survey: &Survey) -> Vec<Extremum> {
    vec![
        Extremum::of(survey, "|phi|^2", |r| r.phi2),
        Extremum::of(survey, "|T|", |r| r.t2.sqrt()),
        Extremum::of(survey, "|phi_h|", |r| r.phi_h),
    ]
}

pub fn main_inequality(
    imm: &Immersion,
    grid: &QuadratureGrid,
    opts: JetOptions,
) -> Result<InequalityReport> {
    main_inequality_from(&Survey::compute(imm, grid, 4, opts)?)
}

pub fn main_inequality_from(survey: &Survey) -> Result<InequalityReport> {
    require_surface(survey)?;
    let chi = closed_chi(survey, "the main inequality")?;
    let lhs = survey.integrate(main_integrand)?;
    let mut ext = vec![Extremum::of(survey, "integrand", main_integrand)];
    ext.extend(shape_extrema(survey));
    let mut rep = InequalityReport::new("main_inequality", survey, lhs, 4.0 * PI * chi as f64, ext);
    rep.certified = certification(survey);
    if rep.certified != Some(true) {
        rep.notes
            .push("not certified as an H-surface; the inequality is informational".into());
    }
    Ok(rep)
}

pub fn guo_yin_inequality(
    imm: &Immersion,
    grid: &QuadratureGrid,
    n_eff: usize,
    opts: JetOptions,
) -> Result<InequalityReport> {
    guo_yin_inequality_from(&Survey::compute(imm, grid, 2, opts)?, n_eff)
}

pub fn guo_yin_inequality_from(survey: &Survey, n_eff: usize) -> Result<InequalityReport> {
    if n_eff < 3 {
        return Err(invalid(format!("effective dimension {n_eff} must be >= 3")));
    }
    require_surface(survey)?;
    let chi = closed_chi(survey, "the slice inequality")?;
    let t_max = survey.range(|r| r.t2.sqrt()).1;
    if t_max > SLICE_TOL {
        return Err(GeomError::HypothesisViolation(format!(
            "{} is not contained in a slice (max |T| = {t_max:e})",
            survey.meta.name
        )));
    }
    let f = |r: &NodeRecord| guo_yin_integrand(r.phi2, n_eff);
    let lhs = survey.integrate(f)?;
    let ext = vec![
        Extremum::of(survey, "integrand", f),
        Extremum::of(survey, "|phi|^2", |r| r.phi2),
    ];
    let mut rep = InequalityReport::new(
        "guo_yin_inequality",
        survey,
        lhs,
        4.0 * PI * chi as f64,
        ext,
    );
    rep.params.push(("n_eff".into(), n_eff as f64));
    rep.certified = certification(survey);
    Ok(rep)
}

/// `|∇⊥σ|² + 2⟨σ, ∇²h⟩`.
pub fn prop3_lhs_integrand(r: &NodeRecord) -> Option<f64> {
    Some(r.grad_sigma2? + 2.0 * r.sigma_hess_h?)
}

/// `2⟨N,h⟩² − (2 − |T|² + |φ|²)H²`.
pub fn prop3_rhs_integrand(r: &NodeRecord) -> f64 {
    2.0 * r.n_dot_h * r.n_dot_h - (2.0 - r.t2 + r.phi2) * r.h2
}

/// Reported with `lhs`/`rhs` swapped relative to the statement, so that
/// `slack ≥ 0` means `∫(|∇⊥σ|² + 2⟨σ,∇²h⟩) ≥ ∫(2⟨N,h⟩² − (2−|T|²+|φ|²)H²)`.
pub fn prop3_inequality(
    imm: &Immersion,
    grid: &QuadratureGrid,
    opts: JetOptions,
) -> Result<InequalityReport> {
    prop3_inequality_from(&Survey::compute(imm, grid, 4, opts)?)
}

pub fn prop3_inequality_from(survey: &Survey) -> Result<InequalityReport> {
    require_surface(survey)?;
    closed_chi(survey, "the gradient inequality")?;
    if certification(survey) != Some(true) {
        return Err(GeomError::HypothesisViolation(format!(
            "{} is not certified as an H-surface",
            survey.meta.name
        )));
    }
    let big = survey.integrate(|r| prop3_lhs_integrand(r).unwrap_or(f64::NAN))?;
    let small = survey.integrate(prop3_rhs_integrand)?;
    let ext = vec![
        Extremum::of(survey, "gradient integrand", |r| {
            prop3_lhs_integrand(r).unwrap_or(f64::NAN)
        }),
        Extremum::of(survey, "curvature integrand", prop3_rhs_integrand),
    ];
    let mut rep = InequalityReport::new("prop3_inequality", survey, small, big, ext);
    rep.certified = Some(true);
    rep.notes
        .push("lhs = curvature side, rhs = gradient side".into());
    Ok(rep)
}

/// `∫K dΣ` against `2πχ`, with `K` from the metric when available.
pub fn gauss_bonnet(
    imm: &Immersion,
    grid: &QuadratureGrid,
    opts: JetOptions,
) -> Result<InequalityReport> {
    gauss_bonnet_from(&Survey::compute(imm, grid, 3, opts)?)
}

pub fn gauss_bonnet_from(survey: &Survey) -> Result<InequalityReport> {
    require_surface(survey)?;
    let chi = closed_chi(survey, "Gauss-Bonnet")?;
    let k = |r: &NodeRecord| r.k_intrinsic.or(r.k_extrinsic).unwrap_or(f64::NAN);
    let lhs = survey.integrate(k)?;
    let ext = vec![Extremum::of(survey, "K", k)];
    Ok(InequalityReport::new(
        "gauss_bonnet",
        survey,
        lhs,
        2.0 * PI * chi as f64,
        ext,
    ))
}

/// Pointwise quantities that vanish, or are pinned, in the equality case of
/// the main inequality.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EqualityAudit {
    pub surface: String,
    pub params: Vec<(String, f64)>,
    pub resolution: Vec<usize>,
    pub extrema: Vec<Extremum>,
    /// `∫|σ|²((3/2)|σ|² − 2) dΣ`.
    pub sigma_quartic_integral: f64,
}

pub fn equality_case_audit(
    imm: &Immersion,
    grid: &QuadratureGrid,
    opts: JetOptions,
) -> Result<EqualityAudit> {
    equality_case_audit_from(&Survey::compute(imm, grid, 2, opts)?)
}

pub fn equality_case_audit_from(survey: &Survey) -> Result<EqualityAudit> {
    closed_chi(survey, "the equality-case audit")?;
    Ok(EqualityAudit {
        surface: survey.meta.name.clone(),
        params: survey.meta.params.clone(),
        resolution: survey.resolution(),
        extrema: vec![
            Extremum::of(survey, "|phi_N|", |r| r.phi_n),
            Extremum::of(survey, "<N,h>", |r| r.n_dot_h),
            Extremum::of(survey, "|T|", |r| r.t2.sqrt()),
            Extremum::of(survey, "|phi|", |r| r.phi2.sqrt()),
            Extremum::of(survey, "H", |r| r.h2.sqrt()),
        ],
        sigma_quartic_integral: survey.integrate(|r| r.sigma2 * (1.5 * r.sigma2 - 2.0))?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::immersion::{catalog, SurfaceParams};
    use crate::quadrature::build_grid;

    fn survey(name: &str, params: SurfaceParams, res: [usize; 2], order: usize) -> Survey {
        let imm = catalog(name, &params).unwrap();
        let grid = build_grid(imm.domain(), &res).unwrap();
        Survey::compute(&imm, &grid, order, JetOptions::default()).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / (1.0 + b.abs())
    }

    #[test]
    fn main_inequality_equality_cases() {
        let s = survey("slice_sphere", SurfaceParams::default(), [16, 32], 4);
        let r = main_inequality_from(&s).unwrap();
        assert!(rel(r.lhs, 8.0 * PI) < 1e-10 && r.equality && r.certified == Some(true));
        let s = survey("veronese", SurfaceParams::default(), [24, 48], 4);
        let r = main_inequality_from(&s).unwrap();
        assert!(
            rel(r.lhs, 8.0 * PI) < 1e-8 && r.equality && r.certified == Some(true),
            "{r:?}"
        );
    }

    #[test]
    fn main_inequality_on_clifford_torus_is_strict() {
        let s = survey("clifford_torus", SurfaceParams::default(), [16, 16], 4);
        let r = main_inequality_from(&s).unwrap();
        assert!(rel(r.lhs, -4.0 * PI * PI) < 1e-12);
        assert_eq!(r.rhs, 0.0);
        assert!(r.holds() && !r.equality);
        assert!((r.extrema[0].min + 2.0).abs() < 1e-12 && (r.extrema[0].max + 2.0).abs() < 1e-12);
    }

    #[test]
    fn non_stationary_surface_is_not_certified() {
        let s = survey("small_sphere", SurfaceParams::default(), [8, 16], 4);
        let r = main_inequality_from(&s).unwrap();
        assert_eq!(r.certified, Some(false));
        assert!(!r.notes.is_empty());
        assert!(matches!(
            prop3_inequality_from(&s),
            Err(GeomError::HypothesisViolation(_))
        ));
    }

    #[test]
    fn guo_yin_forms() {
        let s = survey("clifford_torus", SurfaceParams::default(), [16, 16], 2);
        let r = guo_yin_inequality_from(&s, 3).unwrap();
        assert!(r.lhs.abs() < 1e-12 && r.equality);
        assert!(r.extrema[0].max.abs() < 1e-12);
        assert!(matches!(
            guo_yin_inequality_from(&s, 2),
            Err(GeomError::InvalidArgument(_))
        ));
        for phi2 in [0.0, 0.3, 4.0 / 3.0, 2.0, 7.5] {
            assert_eq!(guo_yin_integrand(phi2, 4), reduced_integrand(phi2));
        }
        let s = survey("graph_torus", SurfaceParams::default(), [8, 8], 2);
        assert!(matches!(
            guo_yin_inequality_from(&s, 3),
            Err(GeomError::HypothesisViolation(_))
        ));
    }

    #[test]
    fn prop3_on_minimal_surfaces() {
        for (name, res) in [
            ("clifford_torus", [12, 12]),
            ("veronese", [12, 24]),
            ("slice_sphere", [8, 16]),
        ] {
            let s = survey(name, SurfaceParams::default(), res, 4);
            let r = prop3_inequality_from(&s).unwrap();
            assert!(
                r.lhs.abs() < 1e-6 && r.rhs.abs() < 1e-6 && r.holds(),
                "{name}: {r:?}"
            );
        }
    }

    #[test]
    fn gauss_bonnet_on_catalog() {
        for (name, res) in [
            ("slice_sphere", [24, 48]),
            ("clifford_torus", [16, 16]),
            ("veronese", [32, 64]),
            ("small_sphere", [24, 48]),
            ("graph_torus", [48, 48]),
        ] {
            let s = survey(name, SurfaceParams::default(), res, 3);
            let r = gauss_bonnet_from(&s).unwrap();
            assert!(r.slack.abs() <= 1e-5 * (1.0 + r.rhs.abs()), "{name}: {r:?}");
        }
    }

    #[test]
    fn audit_values() {
        let s = survey("veronese", SurfaceParams::default(), [24, 48], 2);
        let a = equality_case_audit_from(&s).unwrap();
        assert!(a.sigma_quartic_integral.abs() < 1e-5);
        for e in &a.extrema {
            if e.quantity == "|phi|" {
                assert!((e.max - (4.0f64 / 3.0).sqrt()).abs() < 1e-10);
            } else {
                assert!(e.min.abs() < 1e-10 && e.max.abs() < 1e-10, "{e:?}");
            }
        }
        let s = survey("clifford_torus", SurfaceParams::default(), [16, 16], 2);
        let a = equality_case_audit_from(&s).unwrap();
        assert!(rel(a.sigma_quartic_integral, 4.0 * PI * PI) < 1e-12);
    }

    #[test]
    fn non_compact_surfaces_are_rejected() {
        let s = survey("cylinder_patch", SurfaceParams::default(), [8, 8], 2);
        assert!(matches!(
            main_inequality_from(&s),
            Err(GeomError::CompactnessRequired(_))
        ));
        assert!(matches!(
            gauss_bonnet_from(&s),
            Err(GeomError::CompactnessRequired(_))
        ));
        assert!(matches!(
            equality_case_audit_from(&s),
            Err(GeomError::CompactnessRequired(_))
        ));
    }
}
