//! Problem description: geometry, materials, perturbation family, truncation
//! and tolerance settings, plus validation and JSON (de)serialization.

use crate::error::{Error, Result};
use crate::geom::{Inclusion, Point, Rect};
use serde::{Deserialize, Serialize};

/// Fraction of an inclusion radius by which it may graze the clear zone
/// before validation rejects the geometry. Wider waveguides such as the
/// paper-scale `h = 4pi/9` make the near inclusions touch `R_h` by well
/// under a percent of their radius; those setups remain computable.
pub const CLEAR_ZONE_SLACK: f64 = 0.02;

/// One-parameter perturbation family scanned by the BIC search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Perturbation {
    /// Refractive index `n(delta) = n_base + delta` on the listed regions,
    /// `n = 1` elsewhere.
    IndexSweep { region_ids: Vec<u32>, n_base: f64 },
    /// Horizontal scaling of the cavity, `x1 -> (1 + delta * C_R) * x1`,
    /// keeping the wall that carries the opening fixed.
    BoundaryScaling {
        #[serde(rename = "C_R")]
        c_r: f64,
    },
}

/// Truncation sizes for the mode-matching reduction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Truncation {
    /// Number of cavity modes kept in the full matrix.
    #[serde(rename = "M_cav")]
    pub m_cav: usize,
    /// Highest waveguide transverse mode index kept (inclusive).
    #[serde(rename = "J_wg")]
    pub j_wg: usize,
    /// Crossing-pair index: the tracked branches `M-2` and `M-1` intersect.
    #[serde(rename = "M")]
    pub m: usize,
}

impl Default for Truncation {
    fn default() -> Self {
        Truncation {
            m_cav: 60,
            j_wg: 40,
            m: 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub fixed_point_tol: f64,
    pub root_tol: f64,
    pub eig_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            fixed_point_tol: 1e-12,
            root_tol: 1e-8,
            eig_tol: 1e-8,
        }
    }
}

fn default_tolerances() -> Tolerances {
    Tolerances::default()
}

fn default_truncation() -> Truncation {
    Truncation::default()
}

/// Full problem description as read from a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    /// One corner of the rectangular cavity hull.
    pub cavity_corner_lo: Point,
    /// The opposite corner.
    pub cavity_corner_hi: Point,
    #[serde(default)]
    pub inclusions: Vec<Inclusion>,
    /// Waveguide width `h`; the opening spans `x2 in (-h/2, h/2)` on the
    /// `x1 = 0` wall.
    pub waveguide_width: f64,
    /// Clear zone adjacent to the opening where `n = 1`. Derived if absent.
    #[serde(default)]
    pub clear_zone: Option<Rect>,
    pub perturbation: Perturbation,
    /// Scan range of the perturbation parameter.
    pub delta_range: [f64; 2],
    /// Admissible `mu` interval. Derived from a reference eigensolve at the
    /// crossing if absent.
    #[serde(default)]
    pub mu_band: Option<[f64; 2]>,
    #[serde(default = "default_truncation")]
    pub truncation: Truncation,
    #[serde(default = "default_tolerances")]
    pub tolerances: Tolerances,
}

/// Spec with derived quantities filled and all geometric invariants checked.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidatedSpec {
    pub spec: ProblemSpec,
    /// Normalized cavity rectangle (`x_hi = 0` wall carries the opening).
    pub cavity: Rect,
    /// Clear zone actually used.
    pub omega_b: Rect,
    /// The region `R_h = (-h/pi, 0) x (-h/2, h/2)`.
    pub r_h: Rect,
    /// Non-fatal findings recorded during validation.
    pub warnings: Vec<String>,
}

impl ProblemSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }

    /// Refractive index on a region at scan parameter `delta`.
    /// Region 0 is the background.
    pub fn n_of_region(&self, region_id: u32, delta: f64) -> f64 {
        match &self.perturbation {
            Perturbation::IndexSweep { region_ids, n_base } => {
                if region_id != 0 && region_ids.contains(&region_id) {
                    n_base + delta
                } else {
                    1.0
                }
            }
            Perturbation::BoundaryScaling { .. } => 1.0,
        }
    }

    /// Geometric scaling factor `1 + delta * C_R` (1 for index sweeps).
    pub fn stretch(&self, delta: f64) -> f64 {
        match &self.perturbation {
            Perturbation::BoundaryScaling { c_r } => 1.0 + delta * c_r,
            Perturbation::IndexSweep { .. } => 1.0,
        }
    }

    /// Coupling prefactor of the junction sum: `1/(1 + delta * C_R)` under
    /// boundary scaling, 1 for index sweeps.
    pub fn coupling_scale(&self, delta: f64) -> f64 {
        1.0 / self.stretch(delta)
    }
}

/// Checks all geometric and material invariants and fills derived fields.
pub fn validate_spec(spec: &ProblemSpec) -> Result<ValidatedSpec> {
    let mut warnings = Vec::new();
    let cavity = Rect::from_corners(spec.cavity_corner_lo, spec.cavity_corner_hi);
    let h = spec.waveguide_width;
    let scale = cavity.width().max(cavity.height());

    if !(h > 0.0) || cavity.width() <= 0.0 || cavity.height() <= 0.0 {
        return Err(Error::DegenerateGeometry(format!(
            "need positive cavity sides and waveguide width, got {} x {} with h = {}",
            cavity.width(),
            cavity.height(),
            h
        )));
    }
    let tol = 1e-9 * scale;
    if cavity.x_hi.abs() > tol {
        return Err(Error::DegenerateGeometry(format!(
            "the wall carrying the opening must lie on x1 = 0, got x_hi = {}",
            cavity.x_hi
        )));
    }
    // Opening strictly inside the x1 = 0 wall, centered at the origin.
    if !(cavity.y_lo < -h / 2.0 - tol && cavity.y_hi > h / 2.0 + tol) {
        return Err(Error::DegenerateGeometry(format!(
            "opening (-{h2}, {h2}) must lie strictly inside the wall ({}, {})",
            cavity.y_lo,
            cavity.y_hi,
            h2 = h / 2.0
        )));
    }

    // Material bounds over the whole sweep.
    match &spec.perturbation {
        Perturbation::IndexSweep { n_base, .. } => {
            let n_min = (n_base + spec.delta_range[0]).min(n_base + spec.delta_range[1]);
            if n_min <= 0.0 {
                return Err(Error::BadIndexBounds(format!(
                    "n(delta) = {n_base} + delta reaches {n_min} <= 0 on the sweep"
                )));
            }
        }
        Perturbation::BoundaryScaling { c_r } => {
            let s_min = (1.0 + spec.delta_range[0] * c_r).min(1.0 + spec.delta_range[1] * c_r);
            if s_min <= 0.1 {
                return Err(Error::DegenerateGeometry(format!(
                    "scaling factor 1 + delta * C_R reaches {s_min} on the sweep"
                )));
            }
        }
    }

    for inc in &spec.inclusions {
        if inc.region_id == 0 {
            return Err(Error::Config("inclusion region_id 0 is reserved for the background".into()));
        }
        if !(inc.radius > 0.0) {
            return Err(Error::DegenerateGeometry(format!(
                "inclusion at ({}, {}) has radius {}",
                inc.center[0], inc.center[1], inc.radius
            )));
        }
    }

    // Single propagating mode over the admissible band; checked before the
    // finer clear-zone geometry since a multimode band invalidates the
    // whole construction.
    if let Some([mu_l, mu_r]) = spec.mu_band {
        if mu_l >= mu_r {
            return Err(Error::Config(format!("empty mu band [{mu_l}, {mu_r}]")));
        }
        let cutoff = (std::f64::consts::PI / h).powi(2);
        if mu_r >= cutoff {
            return Err(Error::MultiModeBand { mu_r, cutoff });
        }
    }

    // R_h = (-h/pi, 0) x (-h/2, h/2) from the junction estimate hypothesis.
    let r_h = Rect {
        x_lo: -h / std::f64::consts::PI,
        x_hi: 0.0,
        y_lo: -h / 2.0,
        y_hi: h / 2.0,
    };
    if !cavity.contains_rect(&r_h, tol) {
        return Err(Error::DegenerateGeometry(
            "R_h = (-h/pi, 0) x (-h/2, h/2) does not fit inside the cavity".into(),
        ));
    }

    // Inclusions must stay clear of R_h; tiny grazing is tolerated but noted.
    for inc in &spec.inclusions {
        let pen = r_h.disk_penetration(inc.center, inc.radius);
        if pen > CLEAR_ZONE_SLACK * inc.radius {
            return Err(Error::ClearZoneViolation(format!(
                "inclusion at ({}, {}) penetrates R_h by {:.3e}",
                inc.center[0], inc.center[1], pen
            )));
        } else if pen > 0.0 {
            warnings.push(format!(
                "inclusion at ({}, {}) grazes R_h by {:.3e} ({:.2}% of its radius)",
                inc.center[0],
                inc.center[1],
                pen,
                100.0 * pen / inc.radius
            ));
        }
    }

    // Clear zone: user-supplied, or the widest rectangle
    // (-w, 0) x (-h/2 - m, h/2 + m), margin m = h/4, avoiding the inclusions.
    let omega_b = match spec.clear_zone {
        Some(rect) => {
            if rect.x_hi.abs() > tol
                || rect.y_lo > -h / 2.0 + tol
                || rect.y_hi < h / 2.0 - tol
            {
                return Err(Error::ClearZoneViolation(
                    "supplied clear zone must touch the x1 = 0 wall and cover the opening".into(),
                ));
            }
            for inc in &spec.inclusions {
                let pen = rect.disk_penetration(inc.center, inc.radius);
                if pen > CLEAR_ZONE_SLACK * inc.radius {
                    return Err(Error::ClearZoneViolation(format!(
                        "inclusion at ({}, {}) penetrates the supplied clear zone by {:.3e}",
                        inc.center[0], inc.center[1], pen
                    )));
                }
            }
            rect
        }
        None => {
            let m = h / 4.0;
            let y_lo = (-h / 2.0 - m).max(cavity.y_lo);
            let y_hi = (h / 2.0 + m).min(cavity.y_hi);
            let mut w = cavity.width();
            for inc in &spec.inclusions {
                let dy = if inc.center[1] < y_lo {
                    y_lo - inc.center[1]
                } else if inc.center[1] > y_hi {
                    inc.center[1] - y_hi
                } else {
                    0.0
                };
                if dy < inc.radius {
                    // Disk reaches into the slab; the rectangle may extend
                    // left only up to the disk's near edge.
                    let reach = (inc.radius * inc.radius - dy * dy).sqrt();
                    let w_max = -inc.center[0] - reach;
                    w = w.min(w_max.max(0.0));
                }
            }
            if w < r_h.width() {
                warnings.push(format!(
                    "clear zone narrowed to width {w:.4} by inclusions; R_h (width {:.4}) \
                     extends past it",
                    r_h.width()
                ));
                w = r_h.width().min(cavity.width());
            }
            Rect {
                x_lo: -w,
                x_hi: 0.0,
                y_lo,
                y_hi,
            }
        }
    };

    let t = &spec.truncation;
    if t.m < 3 || t.m_cav <= t.m || t.j_wg < 1 {
        return Err(Error::Config(format!(
            "truncation must satisfy M >= 3, M_cav > M, J_wg >= 1, got M = {}, M_cav = {}, J_wg = {}",
            t.m, t.m_cav, t.j_wg
        )));
    }

    Ok(ValidatedSpec {
        spec: spec.clone(),
        cavity,
        omega_b,
        r_h,
        warnings,
    })
}

impl ValidatedSpec {
    /// Re-validates the embedded spec with derived fields pinned, so that a
    /// second validation pass returns an equal value.
    pub fn revalidate(&self) -> Result<ValidatedSpec> {
        let mut spec = self.spec.clone();
        spec.clear_zone = Some(self.omega_b);
        let v = validate_spec(&spec)?;
        Ok(ValidatedSpec {
            spec: self.spec.clone(),
            warnings: self.warnings.clone(),
            ..v
        })
    }

    pub fn h(&self) -> f64 {
        self.spec.waveguide_width
    }

    /// First waveguide cutoff `pi^2 / h^2`.
    pub fn cutoff(&self) -> f64 {
        (std::f64::consts::PI / self.h()).powi(2)
    }

    /// Fills the mu band from eigenvalues at the crossing, following
    /// `mu_l = lambda_{M-3} + 2 eps`, `mu_r = lambda_M - 2 eps` with
    /// `eps = 0.2 * min(lambda_{M-2} - lambda_{M-3}, lambda_M - lambda_{M-1})`.
    pub fn derive_mu_band(&mut self, lambdas_at_crossing: &[f64]) -> Result<[f64; 2]> {
        if let Some(band) = self.spec.mu_band {
            return Ok(band);
        }
        let m = self.spec.truncation.m;
        if lambdas_at_crossing.len() <= m {
            return Err(Error::Config(format!(
                "need at least {} eigenvalues to derive the mu band",
                m + 1
            )));
        }
        let l_m3 = lambdas_at_crossing[m - 3];
        let l_m2 = lambdas_at_crossing[m - 2];
        let l_m1 = lambdas_at_crossing[m - 1];
        let l_m0 = lambdas_at_crossing[m];
        let eps = 0.2 * (l_m2 - l_m3).min(l_m0 - l_m1);
        if eps <= 0.0 {
            return Err(Error::BandViolation {
                delta: f64::NAN,
                index: m,
                lambda: l_m0,
                mu: l_m1,
            });
        }
        let band = [l_m3 + 2.0 * eps, l_m0 - 2.0 * eps];
        let cutoff = self.cutoff();
        if band[1] >= cutoff {
            return Err(Error::MultiModeBand {
                mu_r: band[1],
                cutoff,
            });
        }
        self.spec.mu_band = Some(band);
        Ok(band)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets::example1 as example1_spec;
    use std::f64::consts::PI;

    #[test]
    fn example1_is_valid() {
        let v = validate_spec(&example1_spec()).unwrap();
        assert!(v.warnings.is_empty(), "warnings: {:?}", v.warnings);
        assert!((v.cavity.width() - PI).abs() < 1e-12);
        assert!((v.cavity.height() - 2.0 * PI).abs() < 1e-12);
        // Derived clear zone spans the whole cavity width at h = 2pi/9.
        assert!((v.omega_b.width() - PI).abs() < 1e-12);
    }

    #[test]
    fn example2_wide_guide_is_valid_with_grazing_warning() {
        let mut spec = example1_spec();
        spec.waveguide_width = 4.0 * PI / 9.0;
        spec.delta_range = [1.30, 1.45];
        let v = validate_spec(&spec).unwrap();
        assert!(
            !v.warnings.is_empty(),
            "wide guide should record grazing/clear-zone warnings"
        );
        assert!(v.omega_b.width() >= v.r_h.width() - 1e-12);
    }

    #[test]
    fn multimode_band_rejected() {
        let mut spec = example1_spec();
        spec.waveguide_width = 4.0;
        spec.mu_band = Some([0.1, 2.0]);
        // pi^2 / 16 = 0.61685 < 2
        match validate_spec(&spec) {
            Err(Error::MultiModeBand { mu_r, cutoff }) => {
                assert_eq!(mu_r, 2.0);
                assert!((cutoff - PI * PI / 16.0).abs() < 1e-12);
            }
            other => panic!("expected MultiModeBand, got {other:?}"),
        }
    }

    #[test]
    fn inclusion_in_clear_zone_rejected() {
        let mut spec = example1_spec();
        spec.inclusions.push(Inclusion {
            center: [-0.1, 0.0],
            radius: 0.48,
            region_id: 1,
        });
        match validate_spec(&spec) {
            Err(Error::ClearZoneViolation(_)) => {}
            other => panic!("expected ClearZoneViolation, got {other:?}"),
        }
    }

    #[test]
    fn validation_is_idempotent() {
        let v = validate_spec(&example1_spec()).unwrap();
        let v2 = v.revalidate().unwrap();
        assert_eq!(v, v2);
    }

    #[test]
    fn json_round_trip() {
        let spec = example1_spec();
        let text = spec.to_json();
        let back = ProblemSpec::from_json(&text).unwrap();
        assert_eq!(spec, back);
    }

    #[test]
    fn bad_index_bounds_rejected() {
        let mut spec = example1_spec();
        spec.delta_range = [-0.5, 0.5];
        match validate_spec(&spec) {
            Err(Error::BadIndexBounds(_)) => {}
            other => panic!("expected BadIndexBounds, got {other:?}"),
        }
    }

    #[test]
    fn opening_must_fit_in_wall() {
        let mut spec = example1_spec();
        spec.waveguide_width = 5.0 * PI;
        assert!(matches!(
            validate_spec(&spec),
            Err(Error::DegenerateGeometry(_))
        ));
    }

    #[test]
    fn mu_band_derivation_follows_band_settings() {
        let mut v = validate_spec(&example1_spec()).unwrap();
        // Synthetic spectrum with a double eigenvalue at index 5, 6 (M = 7).
        let lam = [0.0, 0.3, 0.9, 1.0, 1.4, 1.7, 1.7, 2.1];
        let band = v.derive_mu_band(&lam).unwrap();
        let eps = 0.2 * (1.7f64 - 1.4).min(2.1 - 1.7);
        assert!((band[0] - (1.4 + 2.0 * eps)).abs() < 1e-14);
        assert!((band[1] - (2.1 - 2.0 * eps)).abs() < 1e-14);
    }
}
