//! Flat run configuration covering every tunable of the pipeline.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cloud::FilterParams;
use crate::detector::{BehaviorWeights, DepositMode, SwarmParams};
use crate::eval::EvalParams;
use crate::validator::ValidatorParams;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub outlier_k: usize,
    pub outlier_stddev_mult: f64,
    pub normal_radius: f64,
    pub don_radius_small: f64,
    pub don_radius_large: f64,
    pub normal_up_max_angle: f64,
    pub don_magnitude_max: f64,
    pub ransac_iterations: usize,
    pub ransac_inlier_gamma: f64,
    pub obstacle_margin_upsilon: f64,

    pub agents_per_map: usize,
    pub iterations: usize,
    pub max_steps: usize,
    pub h_max_default: usize,
    pub deposit_base: f64,
    pub deposit_mode: DepositMode,
    pub deposit_radius: usize,
    pub epsilon: f64,
    pub weight_pheromone: f64,
    pub weight_saliency: f64,
    pub weight_appearance: f64,
    pub weight_inertia: f64,
    pub weight_centering: f64,
    pub evaporation_rho: f64,
    pub field_gain_beta: f64,
    pub inhibition_kappa: f64,
    pub attenuation_gamma: f64,
    pub blob_threshold: f64,
    pub appearance_bins: usize,
    pub spawn_jitter: usize,
    pub rng_seed: u64,

    pub window_size: usize,
    pub detector_width: usize,
    pub detector_height: usize,
    pub mask_inflate_radius: usize,
    /// Pixel stride used when back-projecting depth into the cloud.
    pub depth_stride: usize,

    /// Field activity threshold of the validator; `null` uses `blob_threshold`.
    pub validator_nu: Option<f64>,
    pub suspect_frac: f64,
    pub invalid_frac: f64,

    pub eval_peak_fraction: f64,
    pub eval_containment: f64,
    pub eval_max_angle_deg: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let f = FilterParams::default();
        let s = SwarmParams::default();
        let v = ValidatorParams::default();
        let e = EvalParams::default();
        Self {
            outlier_k: f.outlier_k,
            outlier_stddev_mult: f.outlier_stddev_mult,
            normal_radius: f.normal_radius,
            don_radius_small: f.don_radius_small,
            don_radius_large: f.don_radius_large,
            normal_up_max_angle: f.normal_up_max_angle,
            don_magnitude_max: f.don_magnitude_max,
            ransac_iterations: f.ransac_iterations,
            ransac_inlier_gamma: f.ransac_inlier_gamma,
            obstacle_margin_upsilon: f.obstacle_margin_upsilon,
            agents_per_map: s.agents_per_map,
            iterations: s.iterations,
            max_steps: s.max_steps,
            h_max_default: s.h_max_default,
            deposit_base: s.deposit_base,
            deposit_mode: s.deposit_mode,
            deposit_radius: s.deposit_radius,
            epsilon: s.epsilon,
            weight_pheromone: s.weights.pheromone,
            weight_saliency: s.weights.saliency,
            weight_appearance: s.weights.appearance,
            weight_inertia: s.weights.inertia,
            weight_centering: s.weights.centering,
            evaporation_rho: s.evaporation_rho,
            field_gain_beta: s.field_gain_beta,
            inhibition_kappa: s.inhibition_kappa,
            attenuation_gamma: s.attenuation_gamma,
            blob_threshold: s.blob_threshold,
            appearance_bins: s.appearance_bins,
            spawn_jitter: s.spawn_jitter,
            rng_seed: s.rng_seed,
            window_size: 2,
            detector_width: 80,
            detector_height: 60,
            mask_inflate_radius: 1,
            depth_stride: 8,
            validator_nu: None,
            suspect_frac: v.suspect_frac,
            invalid_frac: v.invalid_frac,
            eval_peak_fraction: e.peak_fraction,
            eval_containment: e.containment,
            eval_max_angle_deg: e.max_angle_deg,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn filter_params(&self) -> FilterParams {
        FilterParams {
            outlier_k: self.outlier_k,
            outlier_stddev_mult: self.outlier_stddev_mult,
            normal_radius: self.normal_radius,
            don_radius_small: self.don_radius_small,
            don_radius_large: self.don_radius_large,
            normal_up_max_angle: self.normal_up_max_angle,
            don_magnitude_max: self.don_magnitude_max,
            ransac_iterations: self.ransac_iterations,
            ransac_inlier_gamma: self.ransac_inlier_gamma,
            obstacle_margin_upsilon: self.obstacle_margin_upsilon,
        }
    }

    pub fn swarm_params(&self) -> SwarmParams {
        SwarmParams {
            agents_per_map: self.agents_per_map,
            iterations: self.iterations,
            max_steps: self.max_steps,
            h_max_default: self.h_max_default,
            deposit_base: self.deposit_base,
            deposit_mode: self.deposit_mode,
            deposit_radius: self.deposit_radius,
            epsilon: self.epsilon,
            weights: BehaviorWeights {
                pheromone: self.weight_pheromone,
                saliency: self.weight_saliency,
                appearance: self.weight_appearance,
                inertia: self.weight_inertia,
                centering: self.weight_centering,
            },
            evaporation_rho: self.evaporation_rho,
            field_gain_beta: self.field_gain_beta,
            inhibition_kappa: self.inhibition_kappa,
            attenuation_gamma: self.attenuation_gamma,
            blob_threshold: self.blob_threshold,
            appearance_bins: self.appearance_bins,
            spawn_jitter: self.spawn_jitter,
            rng_seed: self.rng_seed,
        }
    }

    pub fn validator_params(&self) -> ValidatorParams {
        ValidatorParams {
            nu: self.validator_nu.unwrap_or(self.blob_threshold),
            suspect_frac: self.suspect_frac,
            invalid_frac: self.invalid_frac,
        }
    }

    pub fn eval_params(&self) -> EvalParams {
        EvalParams {
            peak_fraction: self.eval_peak_fraction,
            containment: self.eval_containment,
            max_angle_deg: self.eval_max_angle_deg,
        }
    }

    pub fn detector_size(&self) -> (usize, usize) {
        (self.detector_width, self.detector_height)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = ConfigError::Invalid;
        self.filter_params().validate().map_err(invalid)?;
        self.swarm_params().validate().map_err(invalid)?;
        self.validator_params().validate().map_err(invalid)?;
        self.eval_params().validate().map_err(invalid)?;
        if self.detector_width < 3 || self.detector_height < 3 {
            return Err(invalid("detector resolution must be at least 3x3".into()));
        }
        if self.depth_stride == 0 {
            return Err(invalid("depth_stride must be positive".into()));
        }
        if self.h_max_default + 1 >= self.detector_height {
            return Err(invalid("h_max_default must lie above the bottom row".into()));
        }
        Ok(())
    }
}
