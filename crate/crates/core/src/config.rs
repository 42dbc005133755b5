//! Run configuration, read from TOML. Every field has a default, so an empty
//! file (or no file) gives the reference setup: 92×112 images, the 40-kernel
//! bank at 33×33, 16×16 blocks with 12 px overlap in 16 px strips, a 7-state
//! HMM and Mahalanobis nearest-mean classification.
//!
//! ```toml
//! seed = 0
//!
//! [image]
//! width = 92
//! height = 112
//!
//! [gabor]
//! sigma = 6.283185307179586
//! k_max = 1.5707963267948966
//! f = 1.4142135623730951
//! n_scales = 5
//! n_orients = 8
//! dc = "discrete"            # or "analytic"
//! kernel_size = 33
//! magnitude = "l1"           # or "modulus"
//! convolution = "fft"        # or "direct"
//!
//! [sampling]
//! block_k = 16
//! overlap_p = 12
//! strip_h = 16
//! scan = "serpentine"        # or "zigzag"
//!
//! [features]
//! fallback = "block_side"    # or "block_area"
//!
//! [hmm]
//! n_states = 7
//! max_iters = 50
//! tol = 1e-4
//! var_floor = 1e-6           # relative to the training data variance
//! mode = "global"            # or "per_class"
//!
//! [classify]
//! measure = "mahalanobis"    # l1 | l2 | mahalanobis | cosine
//! covariance = "pooled_diagonal"   # or "full_ridge"
//! var_floor = 1e-6
//! ridge = 1e-3
//!
//! [eval]
//! threshold = { rule = "percentile", value = 100.0 }   # or { rule = "fixed", value = 12.5 }
//! negative_rule = "any_class"   # or "own_class"
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::classify::{CovarianceMode, FitOptions, Measure, DEFAULT_VARIANCE_FLOOR};
use crate::error::{Error, Result};
use crate::evaluate::{NegativeRule, ThresholdRule};
use crate::features::FallbackScale;
use crate::gabor::{ConvolutionMethod, DcCorrection, FuseOptions, GaborParams, MagnitudeMode};
use crate::phmm::BaumWelchOptions;
use crate::sampling::{plan_sampling, SamplingPlan, ScanMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImageConfig {
    pub width: usize,
    pub height: usize,
}

impl Default for ImageConfig {
    fn default() -> Self {
        ImageConfig { width: 92, height: 112 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaborConfig {
    pub sigma: f64,
    pub k_max: f64,
    pub f: f64,
    pub n_scales: usize,
    pub n_orients: usize,
    pub dc: DcCorrection,
    pub kernel_size: usize,
    pub magnitude: MagnitudeMode,
    pub convolution: ConvolutionMethod,
}

impl Default for GaborConfig {
    fn default() -> Self {
        let p = GaborParams::default();
        GaborConfig {
            sigma: p.sigma,
            k_max: p.k_max,
            f: p.f,
            n_scales: p.n_scales,
            n_orients: p.n_orients,
            dc: p.dc,
            kernel_size: 33,
            magnitude: MagnitudeMode::L1,
            convolution: ConvolutionMethod::Fft,
        }
    }
}

impl GaborConfig {
    pub fn params(&self) -> GaborParams {
        GaborParams {
            sigma: self.sigma,
            k_max: self.k_max,
            f: self.f,
            n_scales: self.n_scales,
            n_orients: self.n_orients,
            dc: self.dc,
        }
    }

    pub fn fuse_options(&self) -> FuseOptions {
        FuseOptions {
            magnitude: self.magnitude,
            method: self.convolution,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingConfig {
    pub block_k: usize,
    pub overlap_p: usize,
    pub strip_h: usize,
    pub scan: ScanMode,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            block_k: 16,
            overlap_p: 12,
            strip_h: 16,
            scan: ScanMode::Serpentine,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    pub fallback: FallbackScale,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum HmmMode {
    /// One model shared by all classes; images are compared by Viterbi path.
    #[default]
    Global,
    /// One model per class; images go to the most likely model.
    PerClass,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HmmConfig {
    pub n_states: usize,
    pub max_iters: usize,
    pub tol: f64,
    pub var_floor: f64,
    pub mode: HmmMode,
}

impl Default for HmmConfig {
    fn default() -> Self {
        HmmConfig {
            n_states: 7,
            max_iters: 50,
            tol: 1e-4,
            var_floor: 1e-6,
            mode: HmmMode::Global,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifyConfig {
    pub measure: Measure,
    pub covariance: CovarianceMode,
    pub var_floor: f64,
    pub ridge: f64,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        ClassifyConfig {
            measure: Measure::Mahalanobis,
            covariance: CovarianceMode::PooledDiagonal,
            var_floor: DEFAULT_VARIANCE_FLOOR,
            ridge: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub threshold: ThresholdRule,
    pub negative_rule: NegativeRule,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub image: ImageConfig,
    pub gabor: GaborConfig,
    pub sampling: SamplingConfig,
    pub features: FeatureConfig,
    pub hmm: HmmConfig,
    pub classify: ClassifyConfig,
    pub eval: EvalConfig,
}

/// The parts of the configuration that determine observation sequences.
#[derive(Serialize)]
struct FeatureSection<'a> {
    image: &'a ImageConfig,
    gabor: &'a GaborConfig,
    sampling: &'a SamplingConfig,
    features: &'a FeatureConfig,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Toml { source, .. } => Error::Toml {
                path: path.to_path_buf(),
                source,
            },
            other => other,
        })
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|source| Error::Toml {
            path: "<config>".into(),
            source,
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    pub fn validate(&self) -> Result<()> {
        self.gabor.params().validate()?;
        let k = self.gabor.kernel_size;
        if k < 3 || k.is_multiple_of(2) {
            return Err(Error::invalid(format!("kernel_size must be odd and >= 3, got {k}")));
        }
        if self.image.width < k || self.image.height < k {
            return Err(Error::invalid(format!(
                "image {}x{} is smaller than the {k}x{k} kernel",
                self.image.width, self.image.height
            )));
        }
        self.plan()?;
        if self.hmm.n_states == 0 {
            return Err(Error::invalid("hmm.n_states must be >= 1"));
        }
        if !(self.hmm.var_floor > 0.0) || !(self.hmm.tol >= 0.0) {
            return Err(Error::invalid("hmm.var_floor must be > 0 and hmm.tol >= 0"));
        }
        if !(self.classify.var_floor > 0.0) || !(self.classify.ridge >= 0.0) {
            return Err(Error::invalid("classify.var_floor must be > 0 and classify.ridge >= 0"));
        }
        if let ThresholdRule::Percentile(p) = self.eval.threshold {
            if !(p > 0.0 && p <= 100.0) {
                return Err(Error::invalid(format!("threshold percentile must be in (0, 100], got {p}")));
            }
        }
        Ok(())
    }

    pub fn plan(&self) -> Result<SamplingPlan> {
        plan_sampling(
            self.image.width,
            self.image.height,
            self.sampling.block_k,
            self.sampling.overlap_p,
            self.sampling.strip_h,
        )
    }

    pub fn baum_welch(&self) -> BaumWelchOptions {
        BaumWelchOptions {
            max_iters: self.hmm.max_iters,
            tol: self.hmm.tol,
            seed: self.seed,
        }
    }

    pub fn fit_options(&self) -> FitOptions {
        FitOptions {
            measure: self.classify.measure,
            covariance: self.classify.covariance,
            var_floor: self.classify.var_floor,
            ridge: self.classify.ridge,
        }
    }

    /// Stable hash of every setting that affects feature extraction. Artifacts
    /// built from sequences carry it so they cannot be mixed across setups.
    pub fn feature_fingerprint(&self) -> String {
        let section = FeatureSection {
            image: &self.image,
            gabor: &self.gabor,
            sampling: &self.sampling,
            features: &self.features,
        };
        let bytes = serde_json::to_vec(&section).expect("config serializes to JSON");
        hex::encode(&Sha256::digest(&bytes)[..16])
    }
}
