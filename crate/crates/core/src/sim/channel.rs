//! Shared channel and the per-node busy verdict.

use crate::analytic::{AnalyticError, ChannelModel, SensingModel};
use rand::Rng;

/// Transmitters on the air in the current slot. All links have the same
/// path loss, so each transmitter contributes one unit of `snr_per_tx`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ChannelState {
    pub slot: u64,
    pub transmitters: Vec<usize>,
}

impl ChannelState {
    /// Transmitters other than `node`.
    pub fn others(&self, node: usize) -> u32 {
        self.transmitters.iter().filter(|&&t| t != node).count() as u32
    }
}

/// Verdict model with precomputed detection probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct Sensing {
    model: SensingModel,
    /// `table[n]`: busy probability with `n` transmitters on the air.
    table: Vec<f64>,
}

impl Sensing {
    pub fn new(channel: &ChannelModel, max_tx: u32) -> Result<Self, AnalyticError> {
        Ok(Self { model: channel.sensing, table: channel.detection_table(max_tx)? })
    }

    pub fn is_ideal(&self) -> bool {
        self.model == SensingModel::Ideal
    }

    pub fn busy<R: Rng>(&self, n: u32, rng: &mut R) -> bool {
        match self.model {
            SensingModel::Ideal => n > 0,
            SensingModel::EnergyDetection => {
                let p = self.table[(n as usize).min(self.table.len() - 1)];
                if p <= 0.0 {
                    false
                } else if p >= 1.0 {
                    true
                } else {
                    rng.gen::<f64>() < p
                }
            }
        }
    }
}

/// Busy verdict of `sensing_node` for the current slot.
pub fn channel_verdict<R: Rng>(ch: &ChannelState, sensing_node: usize, model: &Sensing, rng: &mut R) -> bool {
    model.busy(ch.others(sensing_node), rng)
}
