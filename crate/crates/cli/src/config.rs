//! TOML experiment configuration for `rectify run`, with every parameter
//! bound checked at parse time.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use rectify_core::cones::default_alpha_grid;
use rectify_core::curve::DEFAULT_EPSILON;
use rectify_core::jones::DEFAULT_SLOPE_THRESHOLD;
use rectify_core::nets::lambda2_floor;
use rectify_core::MeasureSpec;

use crate::error::{CliError, CliResult};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    pub measure: MeasureConfig,
    #[serde(default)]
    pub family: FamilyParams,
    #[serde(default)]
    pub curve: CurveParams,
    pub jones: Option<JonesParams>,
    pub trees: Option<TreesParams>,
    pub cones: Option<ConesParams>,
    #[serde(default)]
    pub output: OutputParams,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureConfig {
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(flatten)]
    pub spec: MeasureSpec,
}

fn default_n() -> usize {
    1000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FamilyParams {
    /// Coarsest level; chosen from the diameter when absent.
    pub k0: Option<i32>,
    pub k_max: i32,
    pub lambda2: f64,
    #[serde(rename = "J")]
    pub j_param: u32,
}

impl Default for FamilyParams {
    fn default() -> Self {
        FamilyParams { k0: None, k_max: 10, lambda2: 1.1, j_param: 10 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CurveParams {
    pub delta: f64,
    pub k_max: usize,
    /// Fitted to the hierarchy when absent.
    pub c_star: Option<f64>,
    pub epsilon: f64,
}

impl Default for CurveParams {
    fn default() -> Self {
        CurveParams { delta: 0.5, k_max: 10, c_star: None, epsilon: DEFAULT_EPSILON }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct JonesParams {
    /// Truncation radius; untruncated when absent.
    pub r: Option<f64>,
    pub slope_threshold: f64,
    pub samples: usize,
}

impl Default for JonesParams {
    fn default() -> Self {
        JonesParams { r: None, slope_threshold: DEFAULT_SLOPE_THRESHOLD, samples: 200 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TreesParams {
    /// Level of the top ball; the family's k0 when absent.
    pub top_k: Option<i32>,
    pub top_j: usize,
    /// Core constant; the default for (λ₂, J) when absent.
    pub c: Option<f64>,
    pub n_threshold: f64,
    pub epsilon: f64,
    pub leaves_curve: bool,
}

impl Default for TreesParams {
    fn default() -> Self {
        TreesParams { top_k: None, top_j: 0, c: None, n_threshold: 10.0, epsilon: 0.1, leaves_curve: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConesParams {
    pub m: usize,
    /// Lines of the first coordinate plane used as the plane grid when m = 1.
    pub directions: usize,
    pub alphas: Vec<f64>,
    /// Largest radius; half the measure's diameter when absent.
    pub r_max: Option<f64>,
    pub r_factor: f64,
    pub r_count: usize,
    pub threshold: f64,
    /// Number of seeded atom samples; every atom when absent.
    pub samples: Option<usize>,
}

impl Default for ConesParams {
    fn default() -> Self {
        ConesParams {
            m: 1,
            directions: 8,
            alphas: default_alpha_grid(),
            r_max: None,
            r_factor: 0.5,
            r_count: 8,
            threshold: 0.01,
            samples: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputParams {
    /// Overrides the global `--out-dir`.
    pub dir: Option<PathBuf>,
    pub svg: bool,
}

impl Default for OutputParams {
    fn default() -> Self {
        OutputParams { dir: None, svg: true }
    }
}

fn bad(msg: String) -> CliError {
    CliError::Input(format!("invalid config: {msg}"))
}

impl FamilyParams {
    pub fn validate(&self) -> CliResult<()> {
        if self.j_param == 0 {
            return Err(bad("family.J must be >= 1".into()));
        }
        if !(self.lambda2 > lambda2_floor(self.j_param)) {
            return Err(bad(format!(
                "family.lambda2 = {} must exceed (1 - 2^-J)^-2 = {}",
                self.lambda2,
                lambda2_floor(self.j_param)
            )));
        }
        if let Some(k0) = self.k0 {
            if self.k_max < k0 {
                return Err(bad(format!("family.k_max = {} < k0 = {k0}", self.k_max)));
            }
        }
        Ok(())
    }
}

impl CurveParams {
    pub fn validate(&self) -> CliResult<()> {
        if !(self.delta > 0.0 && self.delta <= 0.5) {
            return Err(bad(format!("curve.delta must lie in (0, 1/2], got {}", self.delta)));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0 / 32.0) {
            return Err(bad(format!("curve.epsilon must lie in (0, 1/32), got {}", self.epsilon)));
        }
        if let Some(c) = self.c_star {
            if !(c > 1.0 && c.is_finite()) {
                return Err(bad(format!("curve.c_star must exceed 1, got {c}")));
            }
        }
        if self.k_max > 40 {
            return Err(bad(format!("curve.k_max = {} is beyond double precision", self.k_max)));
        }
        Ok(())
    }
}

impl JonesParams {
    pub fn validate(&self) -> CliResult<()> {
        if let Some(r) = self.r {
            if !(r >= 0.0) {
                return Err(bad(format!("jones.r must be >= 0, got {r}")));
            }
        }
        if !self.slope_threshold.is_finite() {
            return Err(bad("jones.slope_threshold must be finite".into()));
        }
        if self.samples == 0 {
            return Err(bad("jones.samples must be >= 1".into()));
        }
        Ok(())
    }
}

impl TreesParams {
    pub fn validate(&self, family: &FamilyParams) -> CliResult<()> {
        if family.j_param < 10 {
            return Err(bad(format!("trees need family.J >= 10, got {}", family.j_param)));
        }
        if let Some(c) = self.c {
            if !(c > 0.0 && c <= 1.0 / (4.0 * family.lambda2)) {
                return Err(bad(format!("trees.c must lie in (0, 1/(4 lambda2)], got {c}")));
            }
        }
        if !(self.epsilon > 0.0) || !(self.n_threshold >= 0.0) {
            return Err(bad("trees need epsilon > 0 and n_threshold >= 0".into()));
        }
        Ok(())
    }
}

impl ConesParams {
    pub fn validate(&self) -> CliResult<()> {
        if self.m == 0 {
            return Err(bad("cones.m must be >= 1".into()));
        }
        if self.m == 1 && self.directions == 0 {
            return Err(bad("cones.directions must be >= 1".into()));
        }
        if self.alphas.is_empty() || self.alphas.iter().any(|&a| !(a > 0.0 && a < 1.0)) {
            return Err(bad("cones.alphas must be a nonempty list in (0, 1)".into()));
        }
        if let Some(r) = self.r_max {
            if !(r > 0.0 && r.is_finite()) {
                return Err(bad(format!("cones.r_max must be positive, got {r}")));
            }
        }
        if !(self.r_factor > 0.0 && self.r_factor < 1.0) || self.r_count == 0 {
            return Err(bad("cones need r_factor in (0, 1) and r_count >= 1".into()));
        }
        if !(self.threshold > 0.0 && self.threshold <= 1.0) {
            return Err(bad(format!("cones.threshold must lie in (0, 1], got {}", self.threshold)));
        }
        Ok(())
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| bad(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Input(m) => CliError::Input(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.measure.n == 0 && !matches!(self.measure.spec, MeasureSpec::Cantor4 { .. }) {
            return Err(bad("measure.n must be >= 1".into()));
        }
        self.family.validate()?;
        self.curve.validate()?;
        if let Some(j) = &self.jones {
            j.validate()?;
        }
        if let Some(t) = &self.trees {
            t.validate(&self.family)?;
        }
        if let Some(c) = &self.cones {
            c.validate()?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config() {
        let cfg = ExperimentConfig::parse("[measure]\nkind = \"segment\"\n").unwrap();
        assert_eq!(cfg.measure.n, 1000);
        assert_eq!(cfg.curve, CurveParams::default());
        assert!(cfg.jones.is_none());
    }

    #[test]
    fn full_config() {
        let text = r#"
            seed = 3
            [measure]
            kind = "lipschitz_graph"
            n = 500
            lipschitz = 0.8
            [family]
            k_max = 12
            [curve]
            epsilon = 0.02
            [jones]
            samples = 10
            [trees]
            epsilon = 0.05
            [cones]
            alphas = [0.5, 0.9]
        "#;
        let cfg = ExperimentConfig::parse(text).unwrap();
        assert!(matches!(cfg.measure.spec, MeasureSpec::LipschitzGraph { lipschitz, .. } if lipschitz == 0.8));
        assert_eq!(cfg.cones.unwrap().alphas, vec![0.5, 0.9]);
    }

    #[test]
    fn bounds_enforced_at_parse_time() {
        for text in [
            "[measure]\nkind = \"segment\"\n[curve]\nepsilon = 0.05\n",
            "[measure]\nkind = \"segment\"\n[curve]\ndelta = 0.7\n",
            "[measure]\nkind = \"segment\"\n[family]\nk_max = 5\nlambda2 = 1.0\n",
            "[measure]\nkind = \"segment\"\n[cones]\nalphas = [1.5]\n",
            "[measure]\nkind = \"segment\"\n[family]\nk_max = 5\nJ = 4\n[trees]\n",
            "[measure]\nkind = \"segment\"\n[curve]\nbogus = 1\n",
            "[measure]\nkind = \"spiral\"\n",
        ] {
            let e = ExperimentConfig::parse(text).unwrap_err();
            assert_eq!(e.exit_code(), 2, "{text}");
        }
    }
}
