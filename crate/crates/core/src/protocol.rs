//! Grant-less uplink control plane: UCI codec, subframe planner, link
//! adaptation and HARQ bookkeeping.
//!
//! UCI wire format (MSB first within each field, fields in this order):
//!
//! | field           | bits | format  |
//! |-----------------|------|---------|
//! | c_rnti          | 16   | both    |
//! | harq_process    | 4    | both    |
//! | ndi             | 1    | both    |
//! | burst_len_sf    | 4    | both    |
//! | carrier_idx     | 3    | both    |
//! | a_csi           | 8    | FULL    |
//! | harq_ack_bitmap | 16   | FULL    |
//!
//! COMPACT is 28 bits, FULL is 52 bits.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const COMPACT_BITS: usize = 28;
pub const FULL_BITS: usize = 52;
pub const SYMBOLS_PER_SF: u32 = 14;
pub const SF_US: f64 = 1000.0;
pub const HARQ_PROCESSES: usize = 16;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProtocolError {
    #[error("UCI field {field} = {value} out of range")]
    FieldRange { field: &'static str, value: u32 },
    #[error("UCI field {0} not allowed in COMPACT format")]
    UnexpectedField(&'static str),
    #[error("UCI length {found} does not match {format:?} ({expected} bits); try the other size")]
    LengthMismatch { format: UciFormat, expected: usize, found: usize },
    #[error("subframe offset {0} us outside [0, 1000)")]
    OffsetOutOfRange(f64),
    #[error("start symbol {0} not in the restricted set {{1, 8}}")]
    BadStartSymbol(u8),
    #[error("empty MCS table")]
    EmptyMcsTable,
    #[error("MCS table not strictly increasing")]
    UnsortedMcsTable,
    #[error("HARQ process {0} out of range")]
    NoSuchProcess(u8),
    #[error("HARQ feedback for idle process {0}")]
    IdleProcess(u8),
    #[error("new data on process {0} while it is pending")]
    ProcessBusy(u8),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum UciFormat {
    #[serde(rename = "COMPACT")]
    Compact,
    #[serde(rename = "FULL")]
    Full,
}

impl UciFormat {
    pub fn bits(self) -> usize {
        match self {
            UciFormat::Compact => COMPACT_BITS,
            UciFormat::Full => FULL_BITS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UciPayload {
    pub c_rnti: u16,
    pub harq_process: u8,
    pub ndi: bool,
    pub burst_len_sf: u8,
    pub carrier_idx: u8,
    pub format: UciFormat,
    pub a_csi: Option<u8>,
    pub harq_ack_bitmap: Option<u16>,
}

impl UciPayload {
    pub fn validate(&self) -> Result<(), ProtocolError> {
        if self.harq_process > 15 {
            return Err(ProtocolError::FieldRange { field: "harq_process", value: self.harq_process as u32 });
        }
        if !(1..=10).contains(&self.burst_len_sf) {
            return Err(ProtocolError::FieldRange { field: "burst_len_sf", value: self.burst_len_sf as u32 });
        }
        if self.carrier_idx > 7 {
            return Err(ProtocolError::FieldRange { field: "carrier_idx", value: self.carrier_idx as u32 });
        }
        if self.format == UciFormat::Compact {
            if self.a_csi.is_some() {
                return Err(ProtocolError::UnexpectedField("a_csi"));
            }
            if self.harq_ack_bitmap.is_some() {
                return Err(ProtocolError::UnexpectedField("harq_ack_bitmap"));
            }
        }
        Ok(())
    }
}

fn push_bits(out: &mut Vec<bool>, value: u32, width: u32) {
    for i in (0..width).rev() {
        out.push((value >> i) & 1 == 1);
    }
}

fn take_bits(bits: &[bool], pos: &mut usize, width: usize) -> u32 {
    let v = bits[*pos..*pos + width].iter().fold(0u32, |acc, &b| (acc << 1) | b as u32);
    *pos += width;
    v
}

pub fn encode_uci(p: &UciPayload) -> Result<Vec<bool>, ProtocolError> {
    p.validate()?;
    let mut out = Vec::with_capacity(p.format.bits());
    push_bits(&mut out, p.c_rnti as u32, 16);
    push_bits(&mut out, p.harq_process as u32, 4);
    push_bits(&mut out, p.ndi as u32, 1);
    push_bits(&mut out, p.burst_len_sf as u32, 4);
    push_bits(&mut out, p.carrier_idx as u32, 3);
    if p.format == UciFormat::Full {
        push_bits(&mut out, p.a_csi.unwrap_or(0) as u32, 8);
        push_bits(&mut out, p.harq_ack_bitmap.unwrap_or(0) as u32, 16);
    }
    Ok(out)
}

/// Decode under one size hypothesis. A length mismatch is its own error so
/// a blind decoder can move on to the other size.
pub fn decode_uci(bits: &[bool], format: UciFormat) -> Result<UciPayload, ProtocolError> {
    if bits.len() != format.bits() {
        return Err(ProtocolError::LengthMismatch { format, expected: format.bits(), found: bits.len() });
    }
    let mut pos = 0;
    let c_rnti = take_bits(bits, &mut pos, 16) as u16;
    let harq_process = take_bits(bits, &mut pos, 4) as u8;
    let ndi = take_bits(bits, &mut pos, 1) == 1;
    let burst_len_sf = take_bits(bits, &mut pos, 4) as u8;
    let carrier_idx = take_bits(bits, &mut pos, 3) as u8;
    let (a_csi, harq_ack_bitmap) = match format {
        UciFormat::Full => (
            Some(take_bits(bits, &mut pos, 8) as u8),
            Some(take_bits(bits, &mut pos, 16) as u16),
        ),
        UciFormat::Compact => (None, None),
    };
    Ok(UciPayload { c_rnti, harq_process, ndi, burst_len_sf, carrier_idx, format, a_csi, harq_ack_bitmap })
}

/// Try both sizes, COMPACT first.
pub fn blind_decode_uci(bits: &[bool]) -> Result<UciPayload, ProtocolError> {
    match decode_uci(bits, UciFormat::Compact) {
        Err(ProtocolError::LengthMismatch { .. }) => decode_uci(bits, UciFormat::Full),
        r => r,
    }
}

/// UCI formats of an `n_sf` burst: FULL in the first subframe, COMPACT after.
pub fn burst_uci_formats(n_sf: usize) -> Vec<UciFormat> {
    (0..n_sf).map(|i| if i == 0 { UciFormat::Full } else { UciFormat::Compact }).collect()
}

/// Total UCI overhead of an `n_sf` burst in bits.
pub fn burst_uci_bits(n_sf: usize) -> usize {
    burst_uci_formats(n_sf).iter().map(|f| f.bits()).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SubframeKind {
    #[serde(rename = "SYNC_PARTIAL")]
    SyncPartial,
    #[serde(rename = "SYNC_FULL")]
    SyncFull,
    #[serde(rename = "ASYNC")]
    Async,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SubframeMode {
    #[serde(rename = "SYNC")]
    Sync,
    #[serde(rename = "ASYNC")]
    Async,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SubframePlan {
    pub kind: SubframeKind,
    pub start_symbol: u8,
    pub reservation_us: f64,
    /// Data starts in the following subframe.
    pub next_subframe: bool,
}

impl SubframePlan {
    /// Symbols of the first data subframe.
    pub fn first_sf_symbols(&self) -> u32 {
        SYMBOLS_PER_SF - self.start_symbol as u32
    }
}

pub fn symbol_boundary_us(symbol: u32) -> f64 {
    symbol as f64 * SF_US / SYMBOLS_PER_SF as f64
}

/// Plan the first data subframe after an LBT that ends `offset_us` into
/// the current PCell subframe.
pub fn plan_subframe(offset_us: f64, allowed_starts: &[u8], mode: SubframeMode) -> Result<SubframePlan, ProtocolError> {
    if !(0.0..SF_US).contains(&offset_us) {
        return Err(ProtocolError::OffsetOutOfRange(offset_us));
    }
    if let Some(&bad) = allowed_starts.iter().find(|&&s| s != 1 && s != 8) {
        return Err(ProtocolError::BadStartSymbol(bad));
    }
    if mode == SubframeMode::Async {
        return Ok(SubframePlan { kind: SubframeKind::Async, start_symbol: 0, reservation_us: 0.0, next_subframe: false });
    }
    if offset_us == 0.0 {
        return Ok(SubframePlan { kind: SubframeKind::SyncFull, start_symbol: 0, reservation_us: 0.0, next_subframe: false });
    }
    let mut starts: Vec<u8> = allowed_starts.to_vec();
    starts.sort_unstable();
    for s in starts {
        let b = symbol_boundary_us(s as u32);
        if b >= offset_us {
            return Ok(SubframePlan {
                kind: SubframeKind::SyncPartial,
                start_symbol: s,
                reservation_us: b - offset_us,
                next_subframe: false,
            });
        }
    }
    Ok(SubframePlan {
        kind: SubframeKind::SyncFull,
        start_symbol: 0,
        reservation_us: SF_US - offset_us,
        next_subframe: true,
    })
}

/// Default MCS thresholds: 8 entries, 2 dB apart from 0 dB.
pub fn default_mcs_table() -> Vec<f64> {
    (0..8).map(|i| 2.0 * i as f64).collect()
}

/// Quantized SNR word carried in `a_csi`: 0.25 dB steps from -10 dB.
pub fn quantize_snr_db(snr_db: f64) -> u8 {
    ((snr_db + 10.0) * 4.0).round().clamp(0.0, 255.0) as u8
}

pub fn dequantize_snr_db(word: u8) -> f64 {
    word as f64 / 4.0 - 10.0
}

/// Highest MCS whose threshold does not exceed the reported SNR.
pub fn link_adaptation_step(csi_word: u8, mcs_table: &[f64]) -> Result<usize, ProtocolError> {
    if mcs_table.is_empty() {
        return Err(ProtocolError::EmptyMcsTable);
    }
    if mcs_table.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(ProtocolError::UnsortedMcsTable);
    }
    let snr = dequantize_snr_db(csi_word);
    Ok(mcs_table.partition_point(|&t| t <= snr).saturating_sub(1))
}

/// Who picks the uplink MCS.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LinkAdaptationMode {
    #[serde(rename = "UE_SELECTED")]
    UeSelected,
    #[serde(rename = "ENB_INDICATED")]
    EnbIndicated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct HarqProcess {
    pub process_id: u8,
    pub ndi: bool,
    pub pending: bool,
    pub tx_count: u32,
    /// A transmission is on its way and no feedback arrived yet.
    pub awaiting_feedback: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HarqProcessTable {
    procs: [HarqProcess; HARQ_PROCESSES],
}

impl Default for HarqProcessTable {
    fn default() -> Self {
        Self::new()
    }
}

impl HarqProcessTable {
    pub fn new() -> Self {
        let mut procs = [HarqProcess::default(); HARQ_PROCESSES];
        for (i, p) in procs.iter_mut().enumerate() {
            p.process_id = i as u8;
        }
        Self { procs }
    }

    pub fn get(&self, pid: u8) -> Result<&HarqProcess, ProtocolError> {
        self.procs.get(pid as usize).ok_or(ProtocolError::NoSuchProcess(pid))
    }

    fn get_mut(&mut self, pid: u8) -> Result<&mut HarqProcess, ProtocolError> {
        self.procs.get_mut(pid as usize).ok_or(ProtocolError::NoSuchProcess(pid))
    }

    pub fn processes(&self) -> &[HarqProcess] {
        &self.procs
    }

    /// Lowest-numbered process free for new data.
    pub fn free_process(&self) -> Option<u8> {
        self.procs.iter().find(|p| !p.pending).map(|p| p.process_id)
    }

    /// Processes NACKed and waiting for a retransmission.
    pub fn nacked(&self) -> impl Iterator<Item = u8> + '_ {
        self.procs.iter().filter(|p| p.pending && !p.awaiting_feedback).map(|p| p.process_id)
    }

    /// Start new data on `pid`; returns the NDI to signal.
    pub fn new_data(&mut self, pid: u8) -> Result<bool, ProtocolError> {
        let p = self.get_mut(pid)?;
        if p.pending {
            return Err(ProtocolError::ProcessBusy(pid));
        }
        p.ndi = !p.ndi;
        p.pending = true;
        p.tx_count = 0;
        p.awaiting_feedback = true;
        Ok(p.ndi)
    }

    /// Retransmit pending data on `pid`; the NDI is unchanged.
    pub fn retransmit(&mut self, pid: u8) -> Result<bool, ProtocolError> {
        let p = self.get_mut(pid)?;
        if !p.pending {
            return Err(ProtocolError::IdleProcess(pid));
        }
        p.awaiting_feedback = true;
        Ok(p.ndi)
    }

    pub fn on_feedback(&mut self, pid: u8, ack: bool) -> Result<(), ProtocolError> {
        let p = self.get_mut(pid)?;
        if !p.pending {
            return Err(ProtocolError::IdleProcess(pid));
        }
        p.awaiting_feedback = false;
        if ack {
            p.pending = false;
        } else {
            p.tx_count += 1;
        }
        Ok(())
    }
}

/// Functional form of the feedback transition.
pub fn harq_on_feedback(table: &HarqProcessTable, pid: u8, ack: bool) -> Result<HarqProcessTable, ProtocolError> {
    let mut t = table.clone();
    t.on_feedback(pid, ack)?;
    Ok(t)
}
