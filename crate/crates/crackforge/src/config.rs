//! Flat `key = value` run configuration.
//!
//! A config file is a sequence of lines; blank lines and lines starting with
//! `#` are ignored. Every other line must be `key = value` with a known key.
//! Unset keys keep their defaults, later duplicates win, and rendering a
//! parsed config re-parses to an equal value (round-trip identity).

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::morphometry::SeverityNorm;
use crate::orientation::{OrientationParams, SignConvention};
use crate::propagation::PropagationParams;
use crate::skeleton::ThinningAlgorithm;
use crate::synthesis::MorphologyWeights;

/// Resolved settings for one run; every field has a CLI-independent default.
///
/// Optional fields (`seed`, `target_s`, `target_t`) distinguish "not
/// configured" from an explicit value so the CLI can apply its own
/// precedence rules (flag, then config, then environment, then default).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Side length of the square orientation window (odd, >= 3).
    pub lee_window: u32,
    /// Minimum pairwise distance between retained endpoints.
    pub lee_d_min: f64,
    /// Sign convention for the estimated axis.
    pub lee_sign_convention: SignConvention,
    /// Thinning algorithm used wherever a skeleton is (re)computed.
    pub thinning: ThinningAlgorithm,
    /// Half-width of the per-step heading jitter, in degrees.
    pub delta_deg: f64,
    /// Step length of the directional walk, in pixels.
    pub step_length: f64,
    /// Inclusive lower bound of the per-walk step budget.
    pub s_min: u32,
    /// Inclusive upper bound of the per-walk step budget.
    pub s_max: u32,
    /// Saturation ceiling that stops further growth.
    pub target_m: f64,
    /// Root seed; `None` when the config does not pin one.
    pub seed: Option<u64>,
    /// Saturation normalizer of the severity score.
    pub severity_s_max: f64,
    /// Mean half-thickness normalizer of the severity score.
    pub severity_t_max: f64,
    /// Severity weight on normalized saturation.
    pub severity_w_sat: f64,
    /// Severity weight on normalized mean half-thickness.
    pub severity_w_thick: f64,
    /// Morphology-score weight on the thickness term.
    pub weight_thickness: f64,
    /// Morphology-score weight on the saturation term.
    pub weight_saturation: f64,
    /// Morphology-score weight on the continuity term.
    pub weight_continuity: f64,
    /// Relative tolerance for stage translation convergence.
    pub tol_rel: f64,
    /// Maximum outer iterations of stage translation.
    pub max_iters: u32,
    /// Whether stage translation seeds branches off interior pixels.
    pub branching: bool,
    /// Binarization threshold: luma strictly above it is foreground.
    pub threshold: u8,
    /// Explicit target saturation, overriding any stats lookup.
    pub target_s: Option<f64>,
    /// Explicit target mean half-thickness, overriding any stats lookup.
    pub target_t: Option<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let prop = PropagationParams::default();
        let lee = OrientationParams::default();
        let sev = SeverityNorm::default();
        let w = MorphologyWeights::default();
        RunConfig {
            lee_window: lee.window,
            lee_d_min: prop.d_min,
            lee_sign_convention: lee.convention,
            thinning: ThinningAlgorithm::default(),
            delta_deg: prop.delta.to_degrees(),
            step_length: prop.step_length,
            s_min: prop.s_min,
            s_max: prop.s_max,
            target_m: prop.target_density,
            seed: None,
            severity_s_max: sev.s_max,
            severity_t_max: sev.t_max,
            severity_w_sat: sev.w_sat,
            severity_w_thick: sev.w_thick,
            weight_thickness: w.thickness,
            weight_saturation: w.saturation,
            weight_continuity: w.continuity,
            tol_rel: 0.10,
            max_iters: 24,
            branching: false,
            threshold: crate::mask::DEFAULT_THRESHOLD,
            target_s: None,
            target_t: None,
        }
    }
}

impl RunConfig {
    /// Parses a config from flat `key = value` text.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let Some((key, value)) = trimmed.split_once('=') else {
                return Err(Error::Config {
                    line,
                    msg: format!("expected `key = value`, got `{trimmed}`"),
                });
            };
            cfg.apply(key.trim(), value.trim(), line)?;
        }
        Ok(cfg)
    }

    /// Reads and parses a config file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Renders the config as flat `key = value` text.
    ///
    /// Optional keys are emitted only when set, so `parse(render(c)) == c`
    /// for every valid config.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        kv("lee.window", self.lee_window.to_string());
        kv("lee.d_min", self.lee_d_min.to_string());
        kv("lee.sign_convention", self.lee_sign_convention.to_string());
        kv("skeleton.thinning", self.thinning.to_string());
        kv("prop.delta_deg", self.delta_deg.to_string());
        kv("prop.step_length", self.step_length.to_string());
        kv("prop.s_min", self.s_min.to_string());
        kv("prop.s_max", self.s_max.to_string());
        kv("prop.target_m", self.target_m.to_string());
        if let Some(seed) = self.seed {
            kv("prop.seed", seed.to_string());
        }
        kv("severity.s_max", self.severity_s_max.to_string());
        kv("severity.t_max", self.severity_t_max.to_string());
        kv("severity.w_sat", self.severity_w_sat.to_string());
        kv("severity.w_thick", self.severity_w_thick.to_string());
        kv("weights.thickness", self.weight_thickness.to_string());
        kv("weights.saturation", self.weight_saturation.to_string());
        kv("weights.continuity", self.weight_continuity.to_string());
        kv("translate.tol_rel", self.tol_rel.to_string());
        kv("translate.max_iters", self.max_iters.to_string());
        kv("translate.branching", self.branching.to_string());
        kv("io.threshold", self.threshold.to_string());
        if let Some(s) = self.target_s {
            kv("target.s", s.to_string());
        }
        if let Some(t) = self.target_t {
            kv("target.t", t.to_string());
        }
        out
    }

    fn apply(&mut self, key: &str, value: &str, line: usize) -> Result<()> {
        fn bad(line: usize, key: &str, value: &str, want: &str) -> Error {
            Error::Config {
                line,
                msg: format!("key `{key}`: cannot parse `{value}` as {want}"),
            }
        }
        match key {
            "lee.window" => {
                self.lee_window = value
                    .parse()
                    .map_err(|_| bad(line, key, value, "an unsigned integer"))?;
            }
            "lee.d_min" => {
                self.lee_d_min = parse_f64(value).ok_or_else(|| bad(line, key, value, "a number"))?;
            }
            "lee.sign_convention" => {
                self.lee_sign_convention = value
                    .parse()
                    .map_err(|_| bad(line, key, value, "`inward` or `outward`"))?;
            }
            "skeleton.thinning" => {
                self.thinning = value
                    .parse()
                    .map_err(|_| bad(line, key, value, "`zhang-suen` or `guo-hall`"))?;
            }
            "prop.delta_deg" => {
                self.delta_deg = parse_f64(value).ok_or_else(|| bad(line, key, value, "a number"))?;
            }
            "prop.step_length" => {
                self.step_length =
                    parse_f64(value).ok_or_else(|| bad(line, key, value, "a number"))?;
            }
            "prop.s_min" => {
                self.s_min = value
                    .parse()
                    .map_err(|_| bad(line, key, value, "an unsigned integer"))?;
            }
            "prop.s_max" => {
                self.s_max = value
                    .parse()
                    .map_err(|_| bad(line, key, value, "an unsigned integer"))?;
            }
            "prop.target_m" => {
                self.target_m = parse_f64(value).ok_or_else(|| bad(line, key, value, "a number"))?;
            }
            "prop.seed" => {
                let seed = value
                    .parse()
                    .map_err(|_| bad(line, key, value, "an unsigned 64-bit integer"))?;
                self.seed = Some(seed);
            }
            "severity.s_max" => {
                self.severity_s_max =
                    parse_f64(value).ok_or_else(|| bad(line, key, value, "a number"))?;
            }
            "severity.t_max" => {
                self.severity_t_max =
                    parse_f64(value).ok_or_else(|| bad(line, key, value, "a number"))?;
            }
            "severity.w_sat" => {
                self.severity_w_sat =
                    parse_f64(value).ok_or_else(|| bad(line, key, value, "a number"))?;
            }
            "severity.w_thick" => {
                self.severity_w_thick =
                    parse_f64(value).ok_or_else(|| bad(line, key, value, "a number"))?;
            }
            "weights.thickness" => {
                self.weight_thickness =
                    parse_f64(value).ok_or_else(|| bad(line, key, value, "a number"))?;
            }
            "weights.saturation" => {
                self.weight_saturation =
                    parse_f64(value).ok_or_else(|| bad(line, key, value, "a number"))?;
            }
            "weights.continuity" => {
                self.weight_continuity =
                    parse_f64(value).ok_or_else(|| bad(line, key, value, "a number"))?;
            }
            "translate.tol_rel" => {
                self.tol_rel = parse_f64(value).ok_or_else(|| bad(line, key, value, "a number"))?;
            }
            "translate.max_iters" => {
                self.max_iters = value
                    .parse()
                    .map_err(|_| bad(line, key, value, "an unsigned integer"))?;
            }
            "translate.branching" => {
                self.branching = value
                    .parse()
                    .map_err(|_| bad(line, key, value, "`true` or `false`"))?;
            }
            "io.threshold" => {
                self.threshold = value
                    .parse()
                    .map_err(|_| bad(line, key, value, "an integer in 0..=255"))?;
            }
            "target.s" => {
                let s = parse_f64(value).ok_or_else(|| bad(line, key, value, "a number"))?;
                self.target_s = Some(s);
            }
            "target.t" => {
                let t = parse_f64(value).ok_or_else(|| bad(line, key, value, "a number"))?;
                self.target_t = Some(t);
            }
            other => {
                return Err(Error::Config {
                    line,
                    msg: format!("unknown key `{other}`"),
                });
            }
        }
        Ok(())
    }

    /// Orientation parameters implied by this config.
    pub fn orientation_params(&self) -> OrientationParams {
        OrientationParams {
            window: self.lee_window,
            convention: self.lee_sign_convention,
        }
    }

    /// Walk parameters implied by this config, rooted at `seed`.
    pub fn propagation_params(&self, seed: u64) -> PropagationParams {
        PropagationParams {
            d_min: self.lee_d_min,
            delta: self.delta_deg.to_radians(),
            step_length: self.step_length,
            s_min: self.s_min,
            s_max: self.s_max,
            target_density: self.target_m,
            seed,
        }
    }

    /// Severity normalization implied by this config.
    pub fn severity_norm(&self) -> SeverityNorm {
        SeverityNorm {
            s_max: self.severity_s_max,
            t_max: self.severity_t_max,
            w_sat: self.severity_w_sat,
            w_thick: self.severity_w_thick,
        }
    }

    /// Morphology-score weights implied by this config.
    pub fn morphology_weights(&self) -> MorphologyWeights {
        MorphologyWeights {
            thickness: self.weight_thickness,
            saturation: self.weight_saturation,
            continuity: self.weight_continuity,
        }
    }
}

/// Parses a finite f64, rejecting NaN and infinities.
fn parse_f64(value: &str) -> Option<f64> {
    let v: f64 = value.parse().ok()?;
    v.is_finite().then_some(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn defaults_match_component_defaults() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.lee_window, 15);
        assert_eq!(cfg.lee_d_min, 4.0);
        assert_eq!(cfg.lee_sign_convention, SignConvention::Outward);
        assert_eq!(cfg.thinning, ThinningAlgorithm::ZhangSuen);
        assert!((cfg.delta_deg - 90.0).abs() < 1e-12);
        assert_eq!(cfg.step_length, 2.0);
        assert_eq!((cfg.s_min, cfg.s_max), (3, 50));
        assert_eq!(cfg.target_m, 1.0);
        assert_eq!(cfg.seed, None);
        assert_eq!(cfg.severity_s_max, 0.25);
        assert_eq!(cfg.severity_t_max, 12.0);
        assert_eq!((cfg.severity_w_sat, cfg.severity_w_thick), (0.5, 0.5));
        assert_eq!(cfg.weight_thickness, 2.0);
        assert_eq!(cfg.weight_saturation, 2.0);
        assert_eq!(cfg.weight_continuity, 4.0);
        assert_eq!(cfg.tol_rel, 0.10);
        assert_eq!(cfg.max_iters, 24);
        assert!(!cfg.branching);
        assert_eq!(cfg.threshold, 127);
        assert!((cfg.propagation_params(0).delta - FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn round_trip_identity_default() {
        let cfg = RunConfig::default();
        let reparsed = RunConfig::parse(&cfg.render()).unwrap();
        assert_eq!(cfg, reparsed);
    }

    #[test]
    fn round_trip_identity_customized() {
        let cfg = RunConfig {
            lee_window: 9,
            lee_d_min: 2.5,
            lee_sign_convention: SignConvention::Inward,
            thinning: ThinningAlgorithm::GuoHall,
            delta_deg: 37.25,
            step_length: 1.5,
            s_min: 5,
            s_max: 12,
            target_m: 0.125,
            seed: Some(u64::MAX),
            severity_s_max: 0.3,
            severity_t_max: 9.5,
            severity_w_sat: 0.25,
            severity_w_thick: 0.75,
            weight_thickness: 1.0,
            weight_saturation: 3.0,
            weight_continuity: 0.5,
            tol_rel: 0.05,
            max_iters: 7,
            branching: true,
            threshold: 200,
            target_s: Some(0.0281),
            target_t: Some(1.701),
        };
        let reparsed = RunConfig::parse(&cfg.render()).unwrap();
        assert_eq!(cfg, reparsed);
    }

    #[test]
    fn comments_blanks_and_duplicates() {
        let text = "\n# heading comment\nprop.s_min = 4\n\n  prop.s_min = 9\n";
        let cfg = RunConfig::parse(text).unwrap();
        assert_eq!(cfg.s_min, 9);
    }

    #[test]
    fn unknown_key_reports_line() {
        let err = RunConfig::parse("prop.s_min = 4\nbogus.key = 1\n").unwrap_err();
        match err {
            Error::Config { line, msg } => {
                assert_eq!(line, 2);
                assert!(msg.contains("bogus.key"), "{msg}");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn bad_value_reports_line_and_key() {
        let err = RunConfig::parse("lee.window = eleven\n").unwrap_err();
        match err {
            Error::Config { line, msg } => {
                assert_eq!(line, 1);
                assert!(msg.contains("lee.window"), "{msg}");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn missing_equals_is_rejected() {
        let err = RunConfig::parse("just some words\n").unwrap_err();
        assert!(matches!(err, Error::Config { line: 1, .. }));
    }

    #[test]
    fn non_finite_floats_are_rejected() {
        assert!(RunConfig::parse("prop.target_m = NaN\n").is_err());
        assert!(RunConfig::parse("prop.target_m = inf\n").is_err());
    }

    #[test]
    fn params_builders_carry_values() {
        let cfg = RunConfig::parse("prop.delta_deg = 45\nlee.d_min = 3\n").unwrap();
        let prop = cfg.propagation_params(7);
        assert!((prop.delta - 45f64.to_radians()).abs() < 1e-12);
        assert_eq!(prop.d_min, 3.0);
        assert_eq!(prop.seed, 7);
        prop.validate().unwrap();
        cfg.orientation_params().validate().unwrap();
        cfg.severity_norm().validate().unwrap();
    }
}
