//! Swarm-based trail detector with the obstacle-aware extensions.
//!
//! Per frame: conspicuity maps feed two agent populations that lay
//! pheromone; the combined pheromone drives a motion-compensated neural
//! field whose largest super-threshold blob is the trail hypothesis.

mod appearance;
mod blob;
mod conspicuity;
mod field;
mod homography;
mod horizon;
mod swarm;

pub use appearance::AppearanceModel;
pub use blob::{components, extract_path, Component, Detection};
pub use conspicuity::{conspicuity, ConspicuityMaps};
pub use field::{update_field, NeuralField};
pub use homography::{pose_homography, scale_homography, Homography};
pub use horizon::horizon_row;
pub use swarm::{
    combine_pheromone, obstacle_crossings, pheromone_deposit, run_swarm, AgentRecord, PheromonePair, Population,
    SwarmOutcome,
};

use serde::{Deserialize, Serialize};

/// How the obstacle-crossing ratio modulates the base deposit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DepositMode {
    /// `f = f* + sqrt(1 - o/m)`
    #[default]
    Additive,
    /// `f = f* * sqrt(1 - o/m)`
    Multiplicative,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BehaviorWeights {
    pub pheromone: f64,
    pub saliency: f64,
    pub appearance: f64,
    pub inertia: f64,
    pub centering: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwarmParams {
    pub agents_per_map: usize,
    /// Times the populations are redeployed per frame; deposits of one
    /// deployment are visible to the next.
    pub iterations: usize,
    pub max_steps: usize,
    pub h_max_default: usize,
    pub deposit_base: f64,
    pub deposit_mode: DepositMode,
    /// Half-width of the square footprint stamped at each trajectory step.
    pub deposit_radius: usize,
    pub epsilon: f64,
    pub weights: BehaviorWeights,
    pub evaporation_rho: f64,
    pub field_gain_beta: f64,
    pub inhibition_kappa: f64,
    pub attenuation_gamma: f64,
    pub blob_threshold: f64,
    pub appearance_bins: usize,
    /// Maximum random column offset applied at spawn; zero disables jitter.
    pub spawn_jitter: usize,
    pub rng_seed: u64,
}

impl Default for SwarmParams {
    fn default() -> Self {
        Self {
            agents_per_map: 40,
            iterations: 4,
            max_steps: 32,
            h_max_default: 17,
            deposit_base: 0.05,
            deposit_mode: DepositMode::Additive,
            deposit_radius: 1,
            epsilon: 0.25,
            weights: BehaviorWeights { pheromone: 1.0, saliency: 2.0, appearance: 1.0, inertia: 0.3, centering: 0.5 },
            evaporation_rho: 0.25,
            field_gain_beta: 0.45,
            inhibition_kappa: 0.5,
            attenuation_gamma: 0.5,
            blob_threshold: 0.35,
            appearance_bins: 8,
            spawn_jitter: 0,
            rng_seed: 1,
        }
    }
}

impl SwarmParams {
    pub fn validate(&self) -> Result<(), String> {
        let w = &self.weights;
        let ws = [w.pheromone, w.saliency, w.appearance, w.inertia, w.centering];
        if ws.iter().any(|v| !(*v >= 0.0)) || !ws.iter().any(|v| *v > 0.0) {
            return Err("behaviour weights must be non-negative with at least one positive".into());
        }
        if !(self.epsilon >= 0.0) {
            return Err("epsilon must be non-negative".into());
        }
        if !(0.0..=1.0).contains(&self.attenuation_gamma) {
            return Err("attenuation_gamma must lie in [0, 1]".into());
        }
        if !(0.0..=1.0).contains(&self.evaporation_rho) {
            return Err("evaporation_rho must lie in [0, 1]".into());
        }
        if !(self.field_gain_beta >= 0.0 && self.inhibition_kappa >= 0.0) {
            return Err("field_gain_beta and inhibition_kappa must be non-negative".into());
        }
        if !(0.0..=1.0).contains(&self.blob_threshold) {
            return Err("blob_threshold must lie in [0, 1]".into());
        }
        if self.appearance_bins == 0 || self.appearance_bins > 256 {
            return Err("appearance_bins must lie in [1, 256]".into());
        }
        if self.agents_per_map == 0 || self.iterations == 0 {
            return Err("agents_per_map and iterations must be positive".into());
        }
        if !(self.deposit_base >= 0.0) {
            return Err("deposit_base must be non-negative".into());
        }
        Ok(())
    }
}
