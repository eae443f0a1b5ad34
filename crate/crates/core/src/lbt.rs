//! Slot-stepped listen-before-talk state machines.
//!
//! The machines own no randomness: every backoff draw is passed in by the
//! caller, so a trace of (verdict, result, draw) inputs replays exactly.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LbtError {
    #[error("backoff draw {draw} outside [0, {cw})")]
    DrawOutOfRange { draw: u32, cw: u32 },
    #[error("{op} not allowed in phase {phase:?}")]
    WrongPhase { op: &'static str, phase: Cat4Phase },
    #[error("single-slot LBT {op} not allowed in phase {phase:?}")]
    WrongSinglePhase { op: &'static str, phase: SinglePhase },
    #[error("invalid configuration: {0}")]
    Config(String),
}

/// Durations in microseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LbtTiming {
    pub slot_us: f64,
    pub defer_us: f64,
    pub single_interval_us: f64,
    pub wifi_difs_us: f64,
}

impl Default for LbtTiming {
    fn default() -> Self {
        Self {
            slot_us: 9.0,
            defer_us: 16.0 + 9.0,
            single_interval_us: 25.0,
            wifi_difs_us: 34.0,
        }
    }
}

impl LbtTiming {
    fn slots(&self, us: f64) -> u32 {
        (us / self.slot_us - 1e-9).ceil().max(0.0) as u32
    }
    pub fn defer_slots(&self) -> u32 {
        self.slots(self.defer_us)
    }
    pub fn single_interval_slots(&self) -> u32 {
        self.slots(self.single_interval_us).max(1)
    }
    pub fn difs_slots(&self) -> u32 {
        self.slots(self.wifi_difs_us)
    }
}

/// Static behaviour of a backoff machine.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Cat4Config {
    pub w0: u32,
    pub m: u32,
    pub defer_slots: u32,
    /// Data arriving at an idle node may go out after one idle sensing slot.
    pub initial_cca: bool,
    /// A failure at stage `m` drops the episode and resets the window.
    pub reset_after_max_stage: bool,
}

impl Cat4Config {
    /// LAA/MulteFire Cat.4 behaviour.
    pub fn cat4(w0: u32, m: u32, defer_slots: u32) -> Self {
        Self { w0, m, defer_slots, initial_cca: true, reset_after_max_stage: true }
    }

    /// Plain binary exponential backoff (WiFi DCF).
    pub fn dcf(w0: u32, m: u32, defer_slots: u32) -> Self {
        Self { w0, m, defer_slots, initial_cca: false, reset_after_max_stage: false }
    }

    /// Only the window parameters, as used by the spec-level constructor.
    pub fn basic(w0: u32, m: u32, defer_slots: u32) -> Self {
        Self::dcf(w0, m, defer_slots)
    }

    fn validate(&self) -> Result<(), LbtError> {
        if self.w0 < 1 {
            return Err(LbtError::Config("w0 must be >= 1".into()));
        }
        if self.m > 24 {
            return Err(LbtError::Config("m must be <= 24".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Cat4Phase {
    Idle,
    Defer,
    Backoff,
    Ready,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SlotAction {
    Wait,
    Transmit,
}

/// Outcome of feeding a transmission result back.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TxOutcome {
    /// Backoff redrawn; the machine keeps contending.
    Continue,
    /// Failure at stage `m` with window reset enabled: machine is idle.
    Dropped,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cat4LbtState {
    config: Cat4Config,
    stage: u32,
    cw: u32,
    backoff_counter: u32,
    phase: Cat4Phase,
    defer_slots_remaining: u32,
    immediate: bool,
}

impl Cat4LbtState {
    /// Machine with nothing to send.
    pub fn idle(config: Cat4Config) -> Result<Self, LbtError> {
        config.validate()?;
        Ok(Self {
            config,
            stage: 0,
            cw: config.w0,
            backoff_counter: 0,
            phase: Cat4Phase::Idle,
            defer_slots_remaining: 0,
            immediate: false,
        })
    }

    /// Begin a stage-0 backoff with counter `draw`.
    pub fn start(config: Cat4Config, draw: u32) -> Result<Self, LbtError> {
        let mut s = Self::idle(config)?;
        s.begin(0, draw)?;
        Ok(s)
    }

    pub fn config(&self) -> &Cat4Config {
        &self.config
    }
    pub fn stage(&self) -> u32 {
        self.stage
    }
    pub fn cw(&self) -> u32 {
        self.cw
    }
    pub fn backoff_counter(&self) -> u32 {
        self.backoff_counter
    }
    pub fn phase(&self) -> Cat4Phase {
        self.phase
    }
    pub fn defer_slots_remaining(&self) -> u32 {
        self.defer_slots_remaining
    }
    /// The pending transmission came from the initial CCA.
    pub fn is_immediate(&self) -> bool {
        self.immediate
    }
    /// Contending for the channel (DEFER or BACKOFF).
    pub fn is_contending(&self) -> bool {
        matches!(self.phase, Cat4Phase::Defer | Cat4Phase::Backoff)
    }

    fn begin(&mut self, stage: u32, draw: u32) -> Result<SlotAction, LbtError> {
        let cw = self.config.w0 << stage;
        if draw >= cw {
            return Err(LbtError::DrawOutOfRange { draw, cw });
        }
        self.stage = stage;
        self.cw = cw;
        self.backoff_counter = draw;
        self.immediate = false;
        if self.config.defer_slots > 0 {
            self.phase = Cat4Phase::Defer;
            self.defer_slots_remaining = self.config.defer_slots;
            Ok(SlotAction::Wait)
        } else if draw == 0 {
            self.phase = Cat4Phase::Ready;
            self.defer_slots_remaining = 0;
            Ok(SlotAction::Transmit)
        } else {
            self.phase = Cat4Phase::Backoff;
            self.defer_slots_remaining = 0;
            Ok(SlotAction::Wait)
        }
    }

    /// Data arrives at an idle machine; `busy` is the verdict of the arrival
    /// slot. With initial CCA an idle slot allows transmission right away.
    pub fn on_arrival(&mut self, busy: bool, draw: u32) -> Result<SlotAction, LbtError> {
        if self.phase != Cat4Phase::Idle {
            return Err(LbtError::WrongPhase { op: "on_arrival", phase: self.phase });
        }
        if self.config.initial_cca && !busy {
            let cw = self.config.w0;
            if draw >= cw {
                return Err(LbtError::DrawOutOfRange { draw, cw });
            }
            self.stage = 0;
            self.cw = cw;
            self.backoff_counter = 0;
            self.phase = Cat4Phase::Ready;
            self.immediate = true;
            return Ok(SlotAction::Transmit);
        }
        self.begin(0, draw)
    }

    /// One sensing slot.
    pub fn on_slot(&mut self, busy: bool) -> Result<SlotAction, LbtError> {
        match self.phase {
            Cat4Phase::Defer => {
                if busy {
                    self.defer_slots_remaining = self.config.defer_slots;
                    return Ok(SlotAction::Wait);
                }
                self.defer_slots_remaining -= 1;
                if self.defer_slots_remaining > 0 {
                    return Ok(SlotAction::Wait);
                }
                if self.backoff_counter == 0 {
                    self.phase = Cat4Phase::Ready;
                    Ok(SlotAction::Transmit)
                } else {
                    self.phase = Cat4Phase::Backoff;
                    Ok(SlotAction::Wait)
                }
            }
            Cat4Phase::Backoff => {
                if busy {
                    if self.config.defer_slots > 0 {
                        self.phase = Cat4Phase::Defer;
                        self.defer_slots_remaining = self.config.defer_slots;
                    }
                    return Ok(SlotAction::Wait);
                }
                self.backoff_counter = self.backoff_counter.saturating_sub(1);
                if self.backoff_counter == 0 {
                    self.phase = Cat4Phase::Ready;
                    Ok(SlotAction::Transmit)
                } else {
                    Ok(SlotAction::Wait)
                }
            }
            phase => Err(LbtError::WrongPhase { op: "on_slot", phase }),
        }
    }

    /// Feed back the result of the transmission just made.
    pub fn on_tx_result(&mut self, success: bool, draw: u32) -> Result<TxOutcome, LbtError> {
        if self.phase != Cat4Phase::Ready {
            return Err(LbtError::WrongPhase { op: "on_tx_result", phase: self.phase });
        }
        if success {
            self.begin(0, draw)?;
            return Ok(TxOutcome::Continue);
        }
        if self.immediate {
            self.begin(0, draw)?;
            return Ok(TxOutcome::Continue);
        }
        if self.stage == self.config.m && self.config.reset_after_max_stage {
            let cw = self.config.w0;
            if draw >= cw {
                return Err(LbtError::DrawOutOfRange { draw, cw });
            }
            self.release();
            return Ok(TxOutcome::Dropped);
        }
        let stage = (self.stage + 1).min(self.config.m);
        self.begin(stage, draw)?;
        Ok(TxOutcome::Continue)
    }

    /// Nothing left to send: return to IDLE with the window reset.
    pub fn release(&mut self) {
        self.phase = Cat4Phase::Idle;
        self.stage = 0;
        self.cw = self.config.w0;
        self.backoff_counter = 0;
        self.defer_slots_remaining = 0;
        self.immediate = false;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SinglePhase {
    Idle,
    Sensing,
    Pass,
    Fail,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SingleResult {
    Pass,
    Fail,
}

/// One-shot LBT over a fixed sensing interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SingleSlotLbtState {
    phase: SinglePhase,
    slots_remaining: u32,
}

impl SingleSlotLbtState {
    pub fn new() -> Self {
        Self { phase: SinglePhase::Idle, slots_remaining: 0 }
    }

    pub fn phase(&self) -> SinglePhase {
        self.phase
    }
    pub fn slots_remaining(&self) -> u32 {
        self.slots_remaining
    }

    /// Arm the machine for an interval of `slots` sensing slots.
    pub fn begin(&mut self, slots: u32) -> Result<(), LbtError> {
        if self.phase == SinglePhase::Sensing {
            return Err(LbtError::WrongSinglePhase { op: "begin", phase: self.phase });
        }
        self.phase = SinglePhase::Sensing;
        self.slots_remaining = slots.max(1);
        Ok(())
    }

    /// Verdict for the whole interval.
    pub fn on_interval(&mut self, busy: bool) -> Result<SingleResult, LbtError> {
        if self.phase != SinglePhase::Sensing {
            return Err(LbtError::WrongSinglePhase { op: "on_interval", phase: self.phase });
        }
        self.slots_remaining = 0;
        if busy {
            self.phase = SinglePhase::Fail;
            Ok(SingleResult::Fail)
        } else {
            self.phase = SinglePhase::Pass;
            Ok(SingleResult::Pass)
        }
    }

    /// Verdict for one slot of the interval; the result is known once the
    /// last slot is sensed or any slot is busy.
    pub fn on_slot(&mut self, busy: bool) -> Result<Option<SingleResult>, LbtError> {
        if self.phase != SinglePhase::Sensing {
            return Err(LbtError::WrongSinglePhase { op: "on_slot", phase: self.phase });
        }
        if busy {
            return self.on_interval(true).map(Some);
        }
        self.slots_remaining -= 1;
        if self.slots_remaining == 0 {
            return self.on_interval(false).map(Some);
        }
        Ok(None)
    }
}

impl Default for SingleSlotLbtState {
    fn default() -> Self {
        Self::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> Cat4Config {
        Cat4Config::basic(16, 4, LbtTiming::default().defer_slots())
    }

    #[test]
    fn timing_in_slots() {
        let t = LbtTiming::default();
        assert_eq!(t.defer_slots(), 3);
        assert_eq!(t.single_interval_slots(), 3);
        assert_eq!(t.difs_slots(), 4);
    }

    #[test]
    fn start_examples() {
        let s = Cat4LbtState::start(cfg(), 0).unwrap();
        assert_eq!((s.backoff_counter(), s.phase()), (0, Cat4Phase::Defer));
        assert_eq!((s.stage(), s.cw()), (0, 16));
        assert_eq!(Cat4LbtState::start(cfg(), 15).unwrap().backoff_counter(), 15);
        assert_eq!(
            Cat4LbtState::start(cfg(), 16).unwrap_err(),
            LbtError::DrawOutOfRange { draw: 16, cw: 16 }
        );
    }

    #[test]
    fn zero_counter_transmits_on_idle_backoff_slot() {
        let mut s = Cat4LbtState::start(Cat4Config::basic(16, 4, 0), 1).unwrap();
        assert_eq!(s.phase(), Cat4Phase::Backoff);
        s.backoff_counter = 0;
        assert_eq!(s.on_slot(false).unwrap(), SlotAction::Transmit);
        assert_eq!(s.phase(), Cat4Phase::Ready);
    }

    #[test]
    fn busy_freezes_and_defers() {
        let mut s = Cat4LbtState::start(cfg(), 5).unwrap();
        for _ in 0..3 {
            s.on_slot(false).unwrap();
        }
        assert_eq!(s.phase(), Cat4Phase::Backoff);
        assert_eq!(s.on_slot(true).unwrap(), SlotAction::Wait);
        assert_eq!((s.backoff_counter(), s.phase()), (5, Cat4Phase::Defer));
    }

    #[test]
    fn transmits_on_fifth_idle_slot_after_defer() {
        let mut s = Cat4LbtState::start(cfg(), 5).unwrap();
        for _ in 0..3 {
            assert_eq!(s.on_slot(false).unwrap(), SlotAction::Wait);
        }
        for i in 1..=5 {
            let a = s.on_slot(false).unwrap();
            assert_eq!(a == SlotAction::Transmit, i == 5);
        }
    }

    #[test]
    fn wrong_phase_errors() {
        let mut s = Cat4LbtState::idle(cfg()).unwrap();
        assert!(matches!(s.on_slot(false), Err(LbtError::WrongPhase { .. })));
        assert!(s.on_tx_result(true, 0).is_err());
        let mut s = Cat4LbtState::start(Cat4Config::basic(16, 4, 0), 0).unwrap();
        assert_eq!(s.phase(), Cat4Phase::Ready);
        assert!(s.on_slot(false).is_err());
        assert!(s.on_arrival(false, 0).is_err());
    }

    fn ready_at(stage: u32) -> Cat4LbtState {
        let mut s = Cat4LbtState::start(Cat4Config::basic(16, 4, 0), 0).unwrap();
        for _ in 0..stage {
            s.on_tx_result(false, 0).unwrap();
        }
        assert_eq!(s.phase(), Cat4Phase::Ready);
        s
    }

    #[test]
    fn tx_result_examples() {
        let mut s = ready_at(0);
        s.on_tx_result(false, 31).unwrap();
        assert_eq!((s.stage(), s.cw()), (1, 32));
        let mut s = ready_at(4);
        assert_eq!(s.on_tx_result(false, 0).unwrap(), TxOutcome::Continue);
        assert_eq!((s.stage(), s.cw()), (4, 256));
        let mut s = ready_at(3);
        s.on_tx_result(true, 0).unwrap();
        assert_eq!((s.stage(), s.cw()), (0, 16));
        let mut s = ready_at(2);
        assert_eq!(
            s.on_tx_result(false, 128).unwrap_err(),
            LbtError::DrawOutOfRange { draw: 128, cw: 128 }
        );
    }

    #[test]
    fn cat4_profile_drops_after_last_stage() {
        let mut s = Cat4LbtState::start(Cat4Config::cat4(16, 1, 0), 0).unwrap();
        s.on_tx_result(false, 0).unwrap();
        assert_eq!(s.stage(), 1);
        assert_eq!(s.on_tx_result(false, 0).unwrap(), TxOutcome::Dropped);
        assert_eq!((s.phase(), s.stage(), s.cw()), (Cat4Phase::Idle, 0, 16));
    }

    #[test]
    fn initial_cca() {
        let mut s = Cat4LbtState::idle(Cat4Config::cat4(16, 4, 3)).unwrap();
        assert_eq!(s.on_arrival(false, 7).unwrap(), SlotAction::Transmit);
        assert!(s.is_immediate());
        // Failed immediate attempt starts backoff at stage 0.
        s.on_tx_result(false, 9).unwrap();
        assert_eq!((s.stage(), s.backoff_counter(), s.phase()), (0, 9, Cat4Phase::Defer));
        let mut s = Cat4LbtState::idle(Cat4Config::cat4(16, 4, 3)).unwrap();
        assert_eq!(s.on_arrival(true, 7).unwrap(), SlotAction::Wait);
        assert_eq!(s.backoff_counter(), 7);
        let mut s = Cat4LbtState::idle(Cat4Config::dcf(16, 4, 3)).unwrap();
        assert_eq!(s.on_arrival(false, 7).unwrap(), SlotAction::Wait);
    }

    #[test]
    fn single_slot() {
        let mut s = SingleSlotLbtState::new();
        assert!(s.on_interval(false).is_err());
        s.begin(3).unwrap();
        assert_eq!(s.on_interval(false).unwrap(), SingleResult::Pass);
        let mut s = SingleSlotLbtState::new();
        s.begin(3).unwrap();
        assert_eq!(s.on_interval(true).unwrap(), SingleResult::Fail);
        assert!(s.on_interval(false).is_err());
        let mut s = SingleSlotLbtState::new();
        s.begin(2).unwrap();
        assert_eq!(s.on_slot(false).unwrap(), None);
        assert_eq!(s.on_slot(false).unwrap(), Some(SingleResult::Pass));
    }
}
