//! Slot-level coexistence simulator.
//!
//! Two engines share the same LBT machines and channel model:
//! [`run`] simulates full scenarios (traffic, bursts, grants, HARQ) and
//! [`markov::run_saturated`] reproduces the slotted Markov abstraction of
//! the analytic model (one-slot transmissions, no defer, saturated queues).

pub mod channel;
mod engine;
pub mod markov;
pub mod metrics;
pub mod rng;
pub mod traffic;

pub use channel::{channel_verdict, ChannelState};
pub use metrics::{compute_upt, ClassStats, Direction, FileRecord, NodeClass, RunMetrics, Technology};
pub use traffic::ftp3_arrivals;

use crate::analytic::{SensingModel, UplinkMode};
use crate::detection::EnergyDetector;
use crate::lbt::LbtTiming;
use crate::protocol::{default_mcs_table, LinkAdaptationMode, SubframeMode};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    Config(String),
}

/// Scenario description. Every field has a default so partial config
/// files are valid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub n_wifi_ap: u32,
    pub n_sta_per_ap: u32,
    pub n_enb: u32,
    pub n_ue_per_enb: u32,
    pub uplink_mode: UplinkMode,
    pub mcot_ms: f64,
    pub grant_processing_delay_ms: f64,
    /// File arrivals per second per user (UE or STA).
    pub lambda_files_per_s: f64,
    pub file_size_bytes: u64,
    /// DL and UL shares of the arrivals, in percent.
    pub dl_ul_split: [f64; 2],
    pub phy_rate_mbps: f64,
    pub sensing: SensingModel,
    pub detection: EnergyDetector,
    pub snr_per_tx: f64,
    pub false_alarm: bool,
    pub seed: u64,
    pub sim_duration_s: f64,
    pub lbt_timing: LbtTiming,
    pub w0: u32,
    pub m: u32,
    pub wifi_txop_ms: f64,
    pub subframe_mode: SubframeMode,
    pub allowed_starts: Vec<u8>,
    /// Probability that the eNB misses a grant-less PUSCH burst.
    pub pusch_miss_prob: f64,
    pub link_adaptation: LinkAdaptationMode,
    pub mcs_table: Vec<f64>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            n_wifi_ap: 5,
            n_sta_per_ap: 1,
            n_enb: 5,
            n_ue_per_enb: 1,
            uplink_mode: UplinkMode::Gul,
            mcot_ms: 5.0,
            grant_processing_delay_ms: 4.0,
            lambda_files_per_s: 0.5,
            file_size_bytes: 500_000,
            dl_ul_split: [50.0, 50.0],
            phy_rate_mbps: 50.0,
            sensing: SensingModel::Ideal,
            detection: EnergyDetector::default(),
            snr_per_tx: 10.0,
            false_alarm: false,
            seed: 1,
            sim_duration_s: 30.0,
            lbt_timing: LbtTiming::default(),
            w0: 16,
            m: 4,
            wifi_txop_ms: 1.0,
            subframe_mode: SubframeMode::Sync,
            allowed_starts: vec![1, 8],
            pusch_miss_prob: 0.0,
            link_adaptation: LinkAdaptationMode::UeSelected,
            mcs_table: default_mcs_table(),
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let err = |s: String| Err(SimError::Config(s));
        let positive = [
            ("mcot_ms", self.mcot_ms),
            ("grant_processing_delay_ms", self.grant_processing_delay_ms),
            ("phy_rate_mbps", self.phy_rate_mbps),
            ("snr_per_tx", self.snr_per_tx),
            ("wifi_txop_ms", self.wifi_txop_ms),
            ("lbt_timing.slot_us", self.lbt_timing.slot_us),
            ("lbt_timing.single_interval_us", self.lbt_timing.single_interval_us),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return err(format!("{name} = {v} must be positive"));
            }
        }
        for (name, v) in [
            ("lambda_files_per_s", self.lambda_files_per_s),
            ("sim_duration_s", self.sim_duration_s),
            ("lbt_timing.defer_us", self.lbt_timing.defer_us),
            ("lbt_timing.wifi_difs_us", self.lbt_timing.wifi_difs_us),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return err(format!("{name} = {v} must be non-negative"));
            }
        }
        if self.file_size_bytes == 0 {
            return err("file_size_bytes must be positive".into());
        }
        let [dl, ul] = self.dl_ul_split;
        if dl < 0.0 || ul < 0.0 || (dl + ul - 100.0).abs() > 1e-9 {
            return err(format!("dl_ul_split {dl}:{ul} must be non-negative and sum to 100"));
        }
        if self.w0 < 1 || self.m > 16 {
            return err("w0 must be >= 1 and m <= 16".into());
        }
        if !(0.0..=1.0).contains(&self.pusch_miss_prob) {
            return err("pusch_miss_prob must be in [0,1]".into());
        }
        if self.allowed_starts.iter().any(|&s| s != 1 && s != 8) {
            return err("allowed_starts must be a subset of {1, 8}".into());
        }
        if self.mcs_table.is_empty() || self.mcs_table.windows(2).any(|w| !(w[1] > w[0])) {
            return err("mcs_table must be non-empty and strictly increasing".into());
        }
        if self.detection.mu < 1 {
            return err("detection.mu must be >= 1".into());
        }
        if self.mcot_ms < 1.0 {
            return err("mcot_ms must allow at least one subframe".into());
        }
        Ok(())
    }
}

/// Simulate one scenario. Deterministic for a fixed config (seed included).
pub fn run(config: &ScenarioConfig) -> Result<RunMetrics, SimError> {
    config.validate()?;
    Ok(engine::Engine::new(config)?.run())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid() {
        ScenarioConfig::default().validate().unwrap();
    }

    #[test]
    fn rejects_bad_split() {
        let c = ScenarioConfig { dl_ul_split: [60.0, 50.0], ..Default::default() };
        assert!(matches!(c.validate(), Err(SimError::Config(_))));
    }

    #[test]
    fn rejects_nonpositive_mcot() {
        let c = ScenarioConfig { mcot_ms: 0.0, ..Default::default() };
        assert!(run(&c).is_err());
    }
}
