//! Slotted network matching the Markov abstraction of the analytic model.
//!
//! Each transmission occupies one slot, there is no defer period, and a
//! node that finishes a packet spends idle slots until an arrival (per-slot
//! probability `q`). The arrival slot is the initial sensing slot. Slots in
//! which two or more nodes transmit fail for all of them.

use super::channel::{ChannelState, Sensing};
use super::rng;
use crate::analytic::{AnalyticError, ChannelModel};
use crate::lbt::{Cat4Config, Cat4LbtState, Cat4Phase, SlotAction, TxOutcome};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

#[derive(Debug, Clone, PartialEq)]
pub struct SaturatedConfig {
    pub n_wifi: u32,
    pub n_cat4: u32,
    pub w0: u32,
    pub m: u32,
    pub q: f64,
    pub slots: u64,
    pub seed: u64,
    pub channel: ChannelModel,
}

impl Default for SaturatedConfig {
    fn default() -> Self {
        Self {
            n_wifi: 0,
            n_cat4: 2,
            w0: 16,
            m: 4,
            q: 1.0,
            slots: 1_000_000,
            seed: 1,
            channel: ChannelModel::ideal(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct ClassRates {
    pub nodes: u32,
    pub attempts: u64,
    pub failures: u64,
    /// Attempts per node per slot.
    pub attempt_rate: f64,
    /// Failed fraction of attempts.
    pub failure_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SaturatedResult {
    pub slots: u64,
    pub wifi: ClassRates,
    pub cat4: ClassRates,
    /// Fraction of sensing verdicts that were busy.
    pub busy_rate: f64,
}

struct Node {
    cat4: bool,
    lbt: Cat4LbtState,
    rng: ChaCha8Rng,
}

fn draw(rng: &mut ChaCha8Rng, cw: u32) -> u32 {
    rng.gen_range(0..cw)
}

pub fn run_saturated(cfg: &SaturatedConfig) -> Result<SaturatedResult, AnalyticError> {
    let n = (cfg.n_wifi + cfg.n_cat4) as usize;
    if n == 0 {
        return Err(AnalyticError::InvalidParams("no nodes".into()));
    }
    if !(0.0..=1.0).contains(&cfg.q) || cfg.w0 < 1 {
        return Err(AnalyticError::InvalidParams("q must be in [0,1] and w0 >= 1".into()));
    }
    let sensing = Sensing::new(&cfg.channel, n as u32)?;
    let mut nodes: Vec<Node> = (0..n)
        .map(|i| {
            let cat4 = i >= cfg.n_wifi as usize;
            let c = if cat4 { Cat4Config::cat4(cfg.w0, cfg.m, 0) } else { Cat4Config::dcf(cfg.w0, cfg.m, 0) };
            Node { cat4, lbt: Cat4LbtState::idle(c).expect("valid window"), rng: rng::mac_stream(cfg.seed, i) }
        })
        .collect();
    let mut stats = [ClassRates::default(), ClassRates::default()];
    let mut sensed = 0u64;
    let mut busy_seen = 0u64;
    let mut ch = ChannelState::default();
    for slot in 0..cfg.slots {
        ch.slot = slot;
        ch.transmitters.clear();
        for (i, nd) in nodes.iter().enumerate() {
            if nd.lbt.phase() == Cat4Phase::Ready {
                ch.transmitters.push(i);
            }
        }
        let collided = ch.transmitters.len() > 1;
        for (i, nd) in nodes.iter_mut().enumerate() {
            let class = nd.cat4 as usize;
            match nd.lbt.phase() {
                Cat4Phase::Ready => {
                    stats[class].attempts += 1;
                    if collided {
                        stats[class].failures += 1;
                    }
                    let cw = next_cw(&nd.lbt, !collided);
                    let d = draw(&mut nd.rng, cw);
                    let out = nd.lbt.on_tx_result(!collided, d).expect("ready machine");
                    if !collided && out == TxOutcome::Continue {
                        nd.lbt.release();
                    }
                }
                Cat4Phase::Idle => {
                    if cfg.q >= 1.0 || nd.rng.gen::<f64>() < cfg.q {
                        let busy = sensing.busy(ch.others(i), &mut nd.rng);
                        sensed += 1;
                        busy_seen += busy as u64;
                        let d = draw(&mut nd.rng, cfg.w0);
                        nd.lbt.on_arrival(busy, d).expect("idle machine");
                    }
                }
                Cat4Phase::Defer | Cat4Phase::Backoff => {
                    let busy = sensing.busy(ch.others(i), &mut nd.rng);
                    sensed += 1;
                    busy_seen += busy as u64;
                    let a = nd.lbt.on_slot(busy).expect("contending machine");
                    debug_assert!(a == SlotAction::Wait || nd.lbt.phase() == Cat4Phase::Ready);
                }
            }
        }
    }
    let finish = |mut c: ClassRates, nodes: u32| {
        c.nodes = nodes;
        if nodes > 0 && cfg.slots > 0 {
            c.attempt_rate = c.attempts as f64 / (cfg.slots as f64 * nodes as f64);
        }
        if c.attempts > 0 {
            c.failure_rate = c.failures as f64 / c.attempts as f64;
        }
        c
    };
    Ok(SaturatedResult {
        slots: cfg.slots,
        wifi: finish(stats[0], cfg.n_wifi),
        cat4: finish(stats[1], cfg.n_cat4),
        busy_rate: if sensed > 0 { busy_seen as f64 / sensed as f64 } else { 0.0 },
    })
}

/// Window the machine will use after this result.
pub fn next_cw(lbt: &Cat4LbtState, success: bool) -> u32 {
    let c = lbt.config();
    if success || lbt.is_immediate() {
        return c.w0;
    }
    if lbt.stage() == c.m && c.reset_after_max_stage {
        return c.w0;
    }
    c.w0 << (lbt.stage() + 1).min(c.m)
}

/// One machine driven by i.i.d. busy (`p_b`) and failure (`p_f`) draws, in
/// the same slot semantics as [`run_saturated`]. Returns attempts per slot.
pub fn iid_attempt_rate(config: Cat4Config, q: f64, p_b: f64, p_f: f64, slots: u64, seed: u64) -> f64 {
    let mut lbt = Cat4LbtState::idle(config).expect("valid window");
    let mut rng = rng::stream(seed, 0);
    let mut attempts = 0u64;
    for _ in 0..slots {
        match lbt.phase() {
            Cat4Phase::Ready => {
                attempts += 1;
                let ok = rng.gen::<f64>() >= p_f;
                let cw = next_cw(&lbt, ok);
                let d = draw(&mut rng, cw);
                if lbt.on_tx_result(ok, d).expect("ready") == TxOutcome::Continue && ok {
                    lbt.release();
                }
            }
            Cat4Phase::Idle => {
                if q >= 1.0 || rng.gen::<f64>() < q {
                    let busy = rng.gen::<f64>() < p_b;
                    let d = draw(&mut rng, config.w0);
                    lbt.on_arrival(busy, d).expect("idle");
                }
            }
            _ => {
                let busy = rng.gen::<f64>() < p_b;
                lbt.on_slot(busy).expect("contending");
            }
        }
    }
    attempts as f64 / slots as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{p_tx_cat4, p_tx_wifi};

    #[test]
    fn iid_machine_matches_chain() {
        for &(pb, pf) in &[(0.2, 0.2), (0.4, 0.3)] {
            let sim = iid_attempt_rate(Cat4Config::cat4(16, 4, 0), 1.0, pb, pf, 1_000_000, 11);
            let ana = p_tx_cat4(1.0, 16, 4, pb, pf).unwrap();
            assert!((sim / ana - 1.0).abs() < 0.02, "cat4 {pb} {pf}: {sim} vs {ana}");
            let sim = iid_attempt_rate(Cat4Config::dcf(16, 4, 0), 1.0, pb, pf, 1_000_000, 12);
            let ana = p_tx_wifi(1.0, 16, 4, pb, pf).unwrap();
            assert!((sim / ana - 1.0).abs() < 0.02, "wifi {pb} {pf}: {sim} vs {ana}");
        }
    }

    #[test]
    fn lone_node_rates() {
        // Alone and never failing: cat4 alternates idle slot and immediate tx.
        let r = run_saturated(&SaturatedConfig { n_cat4: 1, slots: 10_000, ..Default::default() }).unwrap();
        assert!((r.cat4.attempt_rate - 0.5).abs() < 1e-3);
        assert_eq!(r.cat4.failures, 0);
    }

    #[test]
    fn deterministic() {
        let c = SaturatedConfig { n_wifi: 2, n_cat4: 2, slots: 50_000, ..Default::default() };
        assert_eq!(run_saturated(&c).unwrap(), run_saturated(&c).unwrap());
    }
}
