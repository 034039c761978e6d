//! Run configuration: JSON schema, geometry presets, tolerance profiles.

use serde::{Deserialize, Serialize};

use crate::fourier::FourierSeries;
use crate::geometry::AdmField;
use crate::{Result, WicklabError};

/// One Fourier series: a constant plus cosine/sine modes.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeriesSpec {
    pub constant: f64,
    #[serde(default)]
    pub modes: Vec<ModeSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeSpec {
    pub wave: Vec<i32>,
    #[serde(default)]
    pub cos: f64,
    #[serde(default)]
    pub sin: f64,
}

impl SeriesSpec {
    fn build(&self, nvars: usize, periods: &[f64]) -> Result<FourierSeries> {
        let mut s = FourierSeries::constant(nvars, periods, self.constant);
        for m in &self.modes {
            if m.wave.len() != nvars {
                return Err(WicklabError::Config(format!(
                    "mode wave vector {:?} must have {nvars} components",
                    m.wave
                )));
            }
            s = s.with_mode(m.wave.clone(), m.cos, m.sin);
        }
        Ok(s)
    }
}

/// Inline foliation data: lapse, shift, spatial metric upper triangle,
/// potential, all as Fourier series on the (d+1)-torus.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdmSpec {
    pub dim_space: usize,
    pub periods: Vec<f64>,
    pub lapse: SeriesSpec,
    #[serde(default)]
    pub shift: Vec<SeriesSpec>,
    pub spatial_metric: Vec<SeriesSpec>,
    pub potential: SeriesSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GeometrySpec {
    Preset { preset: String },
    Inline { inline: AdmSpec },
}

impl GeometrySpec {
    pub fn build(&self) -> Result<AdmField> {
        let adm = match self {
            GeometrySpec::Preset { preset } => match preset.as_str() {
                "flat" => AdmField::flat(1, &[1.0, 1.0], 0.0),
                "curved-1p1" => curved_1p1_preset(),
                other => {
                    return Err(WicklabError::Config(format!(
                        "unknown geometry preset '{other}' (expected 'flat' or 'curved-1p1')"
                    )))
                }
            },
            GeometrySpec::Inline { inline } => {
                let n = inline.dim_space + 1;
                if inline.periods.len() != n {
                    return Err(WicklabError::Config(format!(
                        "{} periods given for a {n}-dimensional torus",
                        inline.periods.len()
                    )));
                }
                let tri = inline.dim_space * (inline.dim_space + 1) / 2;
                if inline.spatial_metric.len() != tri {
                    return Err(WicklabError::Config(format!(
                        "spatial metric needs {tri} upper-triangle entries, got {}",
                        inline.spatial_metric.len()
                    )));
                }
                if !inline.shift.is_empty() && inline.shift.len() != inline.dim_space {
                    return Err(WicklabError::Config(format!(
                        "shift needs 0 or {} components, got {}",
                        inline.dim_space,
                        inline.shift.len()
                    )));
                }
                let mut adm = AdmField::flat(inline.dim_space, &inline.periods, 0.0);
                adm.lapse = inline.lapse.build(n, &inline.periods)?;
                for (a, s) in inline.shift.iter().enumerate() {
                    adm.shift[a] = s.build(n, &inline.periods)?;
                }
                for (a, s) in inline.spatial_metric.iter().enumerate() {
                    adm.spatial_metric[a] = s.build(n, &inline.periods)?;
                }
                adm.potential = inline.potential.build(n, &inline.periods)?;
                adm
            }
        };
        adm.validate(1e-3)?;
        Ok(adm)
    }
}

/// The curved 1+1 reference example: oscillating lapse and spatial metric,
/// nonconstant potential, no shift (so the separable fast path applies).
pub fn curved_1p1_preset() -> AdmField {
    let periods = [1.0, 1.0];
    let mut adm = AdmField::flat(1, &periods, 0.0);
    adm.lapse = FourierSeries::constant(2, &periods, 1.0).with_mode(vec![0, 1], 0.2, 0.0);
    adm.spatial_metric[0] =
        FourierSeries::constant(2, &periods, 1.0).with_mode(vec![0, 1], 0.3, 0.05);
    adm.potential = FourierSeries::constant(2, &periods, 0.1).with_mode(vec![0, 1], 0.05, 0.0);
    adm
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TolProfile {
    Default,
    Strict,
}

/// Pass/fail thresholds for the suite verdicts. Exact-arithmetic laws carry
/// roundoff-level thresholds; statistical fits carry percent-level ones.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    pub wedge_angle: f64,
    pub flat_spectrum_rel: f64,
    pub resolvent_slack: f64,
    pub sector_constant_factor: f64,
    pub contract_dev: f64,
    pub contour_agreement: f64,
    pub coeff_closed_form: f64,
    pub coeff_a1: f64,
    pub hermiticity: f64,
    pub chapman_kolmogorov: f64,
    pub heat_residual_factor: f64,
    pub fit_dev0: f64,
    pub fit_dev1: f64,
    pub remainder_min_exponent: f64,
    pub smoothing_max_exponent: f64,
    pub gap_ratio: f64,
    pub flat_gap: f64,
}

impl Tolerances {
    pub fn from_profile(profile: TolProfile) -> Self {
        let exact = match profile {
            TolProfile::Default => 1.0,
            TolProfile::Strict => 0.1,
        };
        Tolerances {
            wedge_angle: 1e-9 * exact,
            flat_spectrum_rel: 1e-10,
            resolvent_slack: 1e-8 * exact,
            sector_constant_factor: 1.1,
            contract_dev: 1e-10 * exact,
            contour_agreement: 1e-8 * exact,
            coeff_closed_form: 1e-10 * exact,
            coeff_a1: 1e-8 * exact,
            hermiticity: 1e-10 * exact,
            chapman_kolmogorov: 1e-9 * exact,
            heat_residual_factor: 1.5,
            fit_dev0: 0.03,
            fit_dev1: 0.10,
            remainder_min_exponent: 1.4,
            smoothing_max_exponent: 1.5,
            gap_ratio: 1.0 / 3.0,
            flat_gap: 1e-10,
        }
    }
}

fn d_grid() -> Vec<usize> {
    vec![24, 24]
}
fn d_theta() -> Vec<f64> {
    vec![std::f64::consts::FRAC_PI_6, std::f64::consts::FRAC_PI_4, std::f64::consts::FRAC_PI_2]
}
fn d_fit_theta() -> Vec<f64> {
    vec![std::f64::consts::FRAC_PI_2, std::f64::consts::FRAC_PI_3]
}
fn d_limit_theta() -> Vec<f64> {
    vec![0.4, 0.2, 0.1, 0.05]
}
fn d_s_list() -> Vec<f64> {
    vec![0.25, 0.5]
}
fn d_geometry() -> GeometrySpec {
    GeometrySpec::Preset {
        preset: "curved-1p1".into(),
    }
}
fn d_order() -> usize {
    2
}
fn d_fit_size() -> usize {
    48
}
fn d_probe_point() -> Vec<f64> {
    vec![0.0, 0.125]
}
fn d_zeta_samples() -> usize {
    9
}
fn d_seed() -> u64 {
    7
}
fn d_out_dir() -> String {
    "out".into()
}
fn d_tol_profile() -> TolProfile {
    TolProfile::Default
}
fn d_quad_points() -> usize {
    48
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "d_geometry")]
    pub geometry: GeometrySpec,
    /// lattice sizes per axis for the operator suites
    #[serde(default = "d_grid")]
    pub grid: Vec<usize>,
    /// family angles for spectrum/coefficients/kernel suites
    #[serde(default = "d_theta")]
    pub theta: Vec<f64>,
    /// angles for the short-time diagonal fit; angles too close to 0 or pi
    /// leave no clean window between the two-grid noise floor and the
    /// periodization images, whose suppression scales with sin(theta)
    #[serde(default = "d_fit_theta")]
    pub fit_theta: Vec<f64>,
    /// angle net for the small-angle limit suite
    #[serde(default = "d_limit_theta")]
    pub limit_theta: Vec<f64>,
    /// evolution times for the limit suite
    #[serde(default = "d_s_list")]
    pub s_list: Vec<f64>,
    /// short-time grid: sample count; window defaults to the fit window of
    /// the fine Richardson grid unless overridden
    #[serde(default = "d_zeta_samples")]
    pub zeta_samples: usize,
    #[serde(default)]
    pub zeta_lo: Option<f64>,
    #[serde(default)]
    pub zeta_hi: Option<f64>,
    /// truncation order of the short-time expansion
    #[serde(default = "d_order")]
    pub order: usize,
    /// coarse per-axis size of the two-grid Richardson pair
    #[serde(default = "d_fit_size")]
    pub fit_size: usize,
    /// diagonal probe point (must be a node of the coarse fit grid)
    #[serde(default = "d_probe_point")]
    pub probe_point: Vec<f64>,
    #[serde(default = "d_seed")]
    pub seed: u64,
    #[serde(default = "d_out_dir")]
    pub out_dir: String,
    #[serde(default = "d_tol_profile")]
    pub tol_profile: TolProfile,
    #[serde(default = "d_quad_points")]
    pub quad_points: usize,
    /// explicit thresholds; absent means derive from the profile
    #[serde(default)]
    pub tolerances: Option<Tolerances>,
}

impl Default for RunConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("empty config is valid")
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)
            .map_err(|e| WicklabError::Config(format!("config schema: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.len() < 2 || self.grid.iter().any(|&n| n < 4) {
            return Err(WicklabError::Config(format!(
                "grid must list at least two axes with >= 4 nodes each, got {:?}",
                self.grid
            )));
        }
        if self.theta.is_empty()
            || self
                .theta
                .iter()
                .any(|&t| !(0.0..=std::f64::consts::PI).contains(&t) || !t.is_finite())
        {
            return Err(WicklabError::Config(format!(
                "theta list must be nonempty within [0, pi], got {:?}",
                self.theta
            )));
        }
        if self.fit_theta.is_empty()
            || self
                .fit_theta
                .iter()
                .any(|&t| t <= 0.0 || t >= std::f64::consts::PI)
        {
            return Err(WicklabError::Config(format!(
                "fit_theta list must be nonempty within (0, pi), got {:?}",
                self.fit_theta
            )));
        }
        if self.limit_theta.iter().any(|&t| t <= 0.0 || t >= std::f64::consts::FRAC_PI_2) {
            return Err(WicklabError::Config(
                "limit_theta entries must lie in (0, pi/2)".into(),
            ));
        }
        if self.s_list.iter().any(|&s| s <= 0.0 || !s.is_finite()) {
            return Err(WicklabError::Config("s_list entries must be positive".into()));
        }
        if self.zeta_samples < 4 {
            return Err(WicklabError::Config("zeta_samples must be at least 4".into()));
        }
        if let (Some(lo), Some(hi)) = (self.zeta_lo, self.zeta_hi) {
            if !(lo > 0.0 && hi > lo) {
                return Err(WicklabError::Config(format!(
                    "zeta window must satisfy 0 < lo < hi, got [{lo}, {hi}]"
                )));
            }
        }
        if self.fit_size < 8 {
            return Err(WicklabError::Config("fit_size must be at least 8".into()));
        }
        if self.quad_points < 16 {
            return Err(WicklabError::Config("quad_points must be at least 16".into()));
        }
        if let Some(t) = &self.tolerances {
            let all = [
                t.wedge_angle,
                t.flat_spectrum_rel,
                t.resolvent_slack,
                t.sector_constant_factor,
                t.contract_dev,
                t.contour_agreement,
                t.coeff_closed_form,
                t.coeff_a1,
                t.hermiticity,
                t.chapman_kolmogorov,
                t.heat_residual_factor,
                t.fit_dev0,
                t.fit_dev1,
                t.remainder_min_exponent,
                t.smoothing_max_exponent,
                t.gap_ratio,
                t.flat_gap,
            ];
            if all.iter().any(|&v| v <= 0.0 || !v.is_finite()) {
                return Err(WicklabError::Config("all tolerances must be positive".into()));
            }
        }
        self.geometry.build().map(|_| ())
    }

    pub fn tolerances(&self) -> Tolerances {
        self.tolerances
            .clone()
            .unwrap_or_else(|| Tolerances::from_profile(self.tol_profile))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.grid, vec![24, 24]);
        let adm = cfg.geometry.build().unwrap();
        assert_eq!(adm.dim_space, 1);
    }

    #[test]
    fn inline_geometry_roundtrip() {
        let text = r#"{
            "geometry": {"inline": {
                "dim_space": 1,
                "periods": [1.0, 1.0],
                "lapse": {"constant": 1.0, "modes": [{"wave": [0, 1], "cos": 0.2}]},
                "spatial_metric": [{"constant": 1.0}],
                "potential": {"constant": 0.1}
            }},
            "grid": [8, 8]
        }"#;
        let cfg = RunConfig::from_json(text).unwrap();
        let adm = cfg.geometry.build().unwrap();
        assert!((adm.lapse_at(&[0.0, 0.25]) - 1.0).abs() < 1e-12);
        assert!((adm.lapse_at(&[0.0, 0.0]) - 1.2).abs() < 1e-12);
    }

    #[test]
    fn schema_violations_are_rejected() {
        // unknown key
        assert!(RunConfig::from_json(r#"{"gridd": [8, 8]}"#).is_err());
        // degenerate grid
        assert!(RunConfig::from_json(r#"{"grid": [2, 8]}"#).is_err());
        // malformed JSON
        assert!(RunConfig::from_json(r#"{"grid": [8, 8"#).is_err());
        // unknown preset
        assert!(RunConfig::from_json(r#"{"geometry": {"preset": "saddle"}}"#).is_err());
        // bad zeta window
        assert!(RunConfig::from_json(r#"{"zeta_lo": 0.1, "zeta_hi": 0.01}"#).is_err());
    }

    #[test]
    fn strict_profile_tightens_exact_thresholds() {
        let d = Tolerances::from_profile(TolProfile::Default);
        let s = Tolerances::from_profile(TolProfile::Strict);
        assert!(s.contract_dev < d.contract_dev);
        assert!(s.hermiticity < d.hermiticity);
        assert_eq!(s.fit_dev0, d.fit_dev0);
    }
}
