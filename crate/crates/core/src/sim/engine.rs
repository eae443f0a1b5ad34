//! Scenario engine.
//!
//! Time advances on the 9 us slot grid. Within a slot the order is fixed:
//! due events (ordered by slot, node id, sequence), then transmissions of
//! nodes that finished LBT in the previous slot, then sensing by every
//! contending node in node-id order. Stretches where nothing can change
//! (no contender, or every contender frozen under ideal sensing) are
//! skipped to the next event.

use super::channel::Sensing;
use super::markov::next_cw;
use super::metrics::{ClassStats, Direction, FileRecord, NodeClass, RunMetrics};
use super::rng::{mac_stream, traffic_stream};
use super::traffic::ftp3_arrivals;
use super::{ScenarioConfig, SimError};
use crate::analytic::{ChannelModel, Coefficient, UplinkMode};
use crate::lbt::{Cat4Config, Cat4LbtState, Cat4Phase, SinglePhase, SingleSlotLbtState, SlotAction, TxOutcome};
use crate::protocol::{
    encode_uci, link_adaptation_step, plan_subframe, quantize_snr_db, HarqProcessTable, SubframeKind, UciFormat,
    UciPayload, HARQ_PROCESSES, SF_US, SYMBOLS_PER_SF,
};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, VecDeque};

#[derive(Debug, Clone, Copy)]
struct Chunk {
    file: usize,
    bits: u64,
}

#[derive(Debug)]
struct Unit {
    start: u64,
    end: u64,
    /// Reservation signal: occupies the channel, carries nothing.
    data: bool,
    collided: bool,
    payload: Vec<Chunk>,
    harq: Option<u8>,
}

#[derive(Debug)]
enum TxKind {
    Wifi,
    Enb { feedback: Vec<(usize, u8, bool)>, grant_ue: Option<usize> },
    GulBurst,
    SulPusch,
}

#[derive(Debug)]
struct Tx {
    node: usize,
    start: u64,
    end: u64,
    units: Vec<Unit>,
    kind: TxKind,
}

impl Tx {
    fn first_data(&self) -> Option<&Unit> {
        self.units.iter().find(|u| u.data)
    }
}

#[derive(Debug)]
struct Grant {
    sense_from: u64,
    ul_start: u64,
    ul_sfs: u32,
    received: Option<bool>,
    lbt: SingleSlotLbtState,
}

struct Node {
    class: NodeClass,
    /// Serving AP/eNB for STAs and UEs.
    parent: Option<usize>,
    children: Vec<usize>,
    rng: ChaCha8Rng,
    lbt: Option<Cat4LbtState>,
    queue: VecDeque<Chunk>,
    needs_arrival_cca: bool,
    ready: bool,
    tx: Option<usize>,
    blocked_until: u64,
    harq: HarqProcessTable,
    harq_payload: Vec<Vec<Chunk>>,
    grant: Option<Grant>,
    pending_feedback: Vec<(usize, u8, bool)>,
    rr: usize,
}

impl Node {
    fn queued_bits(&self) -> u64 {
        self.queue.iter().map(|c| c.bits).sum()
    }
}

#[derive(Debug, Clone, Copy)]
enum Event {
    Arrival { file: usize },
    TxEnd { tx: usize },
    Wake,
    GrantTx,
}

struct FileState {
    record: FileRecord,
    delivered: u64,
}

pub(super) struct Engine<'a> {
    cfg: &'a ScenarioConfig,
    nodes: Vec<Node>,
    files: Vec<FileState>,
    txs: Vec<Option<Tx>>,
    active: Vec<usize>,
    heap: BinaryHeap<Reverse<(u64, usize, u64)>>,
    events: Vec<Event>,
    sensing: Sensing,
    stats: BTreeMap<NodeClass, ClassStats>,
    horizon: u64,
    slot_us: f64,
    single_slots: u64,
    covered_until: u64,
    airtime_slots: u64,
    bits_generated: u64,
    bits_delivered: u64,
    mcs: usize,
}

fn slot_ceil(us: f64, slot_us: f64) -> u64 {
    (us / slot_us - 1e-9).ceil().max(0.0) as u64
}

impl<'a> Engine<'a> {
    pub(super) fn new(cfg: &'a ScenarioConfig) -> Result<Self, SimError> {
        let timing = cfg.lbt_timing;
        let slot_us = timing.slot_us;
        let mut nodes = Vec::new();
        let push = |class: NodeClass, parent: Option<usize>, nodes: &mut Vec<Node>| {
            let id = nodes.len();
            let lbt = match (class, cfg.uplink_mode) {
                (NodeClass::WifiAp | NodeClass::WifiSta, _) => Some(Cat4Config::dcf(cfg.w0, cfg.m, timing.difs_slots())),
                (NodeClass::Enb, _) | (NodeClass::Ue, UplinkMode::Gul) => {
                    Some(Cat4Config::cat4(cfg.w0, cfg.m, timing.defer_slots()))
                }
                (NodeClass::Ue, UplinkMode::Sul) => None,
            };
            nodes.push(Node {
                class,
                parent,
                children: Vec::new(),
                rng: mac_stream(cfg.seed, id),
                lbt: lbt.map(|c| Cat4LbtState::idle(c).expect("validated window")),
                queue: VecDeque::new(),
                needs_arrival_cca: false,
                ready: false,
                tx: None,
                blocked_until: 0,
                harq: HarqProcessTable::new(),
                harq_payload: vec![Vec::new(); HARQ_PROCESSES],
                grant: None,
                pending_feedback: Vec::new(),
                rr: 0,
            });
            if let Some(p) = parent {
                nodes[p].children.push(id);
            }
            id
        };
        // Ids: APs, STAs, eNBs, UEs. Parents precede children.
        let aps: Vec<usize> = (0..cfg.n_wifi_ap).map(|_| push(NodeClass::WifiAp, None, &mut nodes)).collect();
        for &ap in &aps {
            for _ in 0..cfg.n_sta_per_ap {
                push(NodeClass::WifiSta, Some(ap), &mut nodes);
            }
        }
        let enbs: Vec<usize> = (0..cfg.n_enb).map(|_| push(NodeClass::Enb, None, &mut nodes)).collect();
        for &e in &enbs {
            for _ in 0..cfg.n_ue_per_enb {
                push(NodeClass::Ue, Some(e), &mut nodes);
            }
        }
        let channel = ChannelModel {
            sensing: cfg.sensing,
            detector: cfg.detection,
            snr_per_tx: cfg.snr_per_tx,
            false_alarm: cfg.false_alarm,
            coefficient: Coefficient::Others,
        };
        let sensing = Sensing::new(&channel, nodes.len().max(1) as u32).map_err(|e| SimError::Config(e.to_string()))?;
        let snr_db = 10.0 * cfg.snr_per_tx.log10();
        let mcs = link_adaptation_step(quantize_snr_db(snr_db), &cfg.mcs_table)
            .map_err(|e| SimError::Config(e.to_string()))?;
        let horizon = (cfg.sim_duration_s * 1e6 / slot_us).floor() as u64;
        let mut eng = Engine {
            cfg,
            nodes,
            files: Vec::new(),
            txs: Vec::new(),
            active: Vec::new(),
            heap: BinaryHeap::new(),
            events: Vec::new(),
            sensing,
            stats: NodeClass::ALL.iter().map(|&c| (c, ClassStats::default())).collect(),
            horizon,
            slot_us,
            single_slots: timing.single_interval_slots() as u64,
            covered_until: 0,
            airtime_slots: 0,
            bits_generated: 0,
            bits_delivered: 0,
            mcs,
        };
        eng.generate_traffic();
        Ok(eng)
    }

    fn generate_traffic(&mut self) {
        let cfg = self.cfg;
        let bits = cfg.file_size_bytes * 8;
        for user in 0..self.nodes.len() {
            let class = self.nodes[user].class;
            if !matches!(class, NodeClass::WifiSta | NodeClass::Ue) {
                continue;
            }
            let parent = self.nodes[user].parent.expect("users have a parent");
            let mut rng = traffic_stream(cfg.seed, user);
            for t in ftp3_arrivals(&mut rng, cfg.lambda_files_per_s, cfg.sim_duration_s) {
                let dl = rng.gen::<f64>() * 100.0 < cfg.dl_ul_split[0];
                let (src, dir) = if dl { (parent, Direction::Dl) } else { (user, Direction::Ul) };
                let id = self.files.len();
                self.files.push(FileState {
                    record: FileRecord {
                        id: id as u64,
                        technology: class.technology(),
                        direction: dir,
                        node: src,
                        size_bits: bits,
                        arrival_s: t,
                        completion_s: None,
                    },
                    delivered: 0,
                });
                self.bits_generated += bits;
                let slot = ((t * 1e6) / self.slot_us).floor() as u64;
                self.schedule(slot, src, Event::Arrival { file: id });
            }
        }
    }

    fn schedule(&mut self, slot: u64, node: usize, ev: Event) {
        let seq = self.events.len() as u64;
        self.events.push(ev);
        self.heap.push(Reverse((slot, node, seq)));
    }

    fn next_event_slot(&self) -> u64 {
        self.heap.peek().map_or(u64::MAX, |Reverse((s, _, _))| *s)
    }

    fn draw(&mut self, node: usize, cw: u32) -> u32 {
        self.nodes[node].rng.gen_range(0..cw)
    }

    pub(super) fn run(mut self) -> RunMetrics {
        let mut k = 0u64;
        while k < self.horizon {
            while let Some(&Reverse((s, node, seq))) = self.heap.peek() {
                if s > k {
                    break;
                }
                self.heap.pop();
                self.handle(k, node, self.events[seq as usize]);
            }
            for i in 0..self.nodes.len() {
                if self.nodes[i].ready {
                    self.nodes[i].ready = false;
                    self.start_lbt_tx(i, k);
                }
            }
            for i in 0..self.nodes.len() {
                self.refresh(i);
            }
            let on_air = self.on_air(k);
            for i in 0..self.nodes.len() {
                self.sense(i, k, on_air);
            }
            k = self.next_slot(k);
        }
        self.finish()
    }

    fn on_air(&self, k: u64) -> u32 {
        self.active
            .iter()
            .filter(|&&t| {
                let tx = self.txs[t].as_ref().expect("active tx");
                tx.start <= k && k < tx.end
            })
            .count() as u32
    }

    fn has_work(&self, i: usize) -> bool {
        let n = &self.nodes[i];
        match n.class {
            NodeClass::WifiAp | NodeClass::WifiSta => !n.queue.is_empty(),
            NodeClass::Enb => {
                !n.queue.is_empty()
                    || !n.pending_feedback.is_empty()
                    || (self.cfg.uplink_mode == UplinkMode::Sul && self.grant_candidate(i).is_some())
            }
            NodeClass::Ue => {
                (!n.queue.is_empty() && n.harq.free_process().is_some()) || n.harq.nacked().next().is_some()
            }
        }
    }

    /// Next UE to grant, round-robin over backlogged UEs without a grant.
    fn grant_candidate(&self, enb: usize) -> Option<usize> {
        let ch = &self.nodes[enb].children;
        (0..ch.len())
            .map(|j| ch[(self.nodes[enb].rr + j) % ch.len()])
            .find(|&u| !self.nodes[u].queue.is_empty() && self.nodes[u].grant.is_none() && self.nodes[u].tx.is_none())
    }

    /// Arm the initial CCA when an idle machine gets work.
    fn refresh(&mut self, i: usize) {
        let idle = matches!(self.nodes[i].lbt.as_ref().map(|l| l.phase()), Some(Cat4Phase::Idle));
        if idle && self.nodes[i].tx.is_none() && !self.nodes[i].ready && !self.nodes[i].needs_arrival_cca && self.has_work(i) {
            self.nodes[i].needs_arrival_cca = true;
        }
    }

    fn sense(&mut self, i: usize, k: u64, on_air: u32) {
        if self.nodes[i].tx.is_some() {
            return;
        }
        // Scheduled-uplink sensing window.
        if let Some(g) = &self.nodes[i].grant {
            if g.sense_from <= k && k < g.ul_start && g.lbt.phase() == SinglePhase::Sensing {
                let busy = self.sensing.busy(on_air, &mut self.nodes[i].rng);
                let g = self.nodes[i].grant.as_mut().expect("grant");
                g.lbt.on_slot(busy).expect("sensing phase");
            }
        }
        if self.nodes[i].blocked_until > k || self.nodes[i].lbt.is_none() {
            return;
        }
        if self.nodes[i].needs_arrival_cca {
            self.nodes[i].needs_arrival_cca = false;
            let busy = self.sensing.busy(on_air, &mut self.nodes[i].rng);
            let w0 = self.cfg.w0;
            let d = self.draw(i, w0);
            let lbt = self.nodes[i].lbt.as_mut().expect("lbt");
            if lbt.on_arrival(busy, d).expect("idle machine") == SlotAction::Transmit {
                self.nodes[i].ready = true;
            }
            return;
        }
        let contending = self.nodes[i].lbt.as_ref().is_some_and(|l| l.is_contending());
        if contending {
            let busy = self.sensing.busy(on_air, &mut self.nodes[i].rng);
            let lbt = self.nodes[i].lbt.as_mut().expect("lbt");
            if lbt.on_slot(busy).expect("contending machine") == SlotAction::Transmit {
                self.nodes[i].ready = true;
            }
        }
    }

    fn next_slot(&self, k: u64) -> u64 {
        let next = k + 1;
        let mut frozen = true;
        let mut any_sensing = false;
        for n in &self.nodes {
            if n.ready || n.needs_arrival_cca {
                return next;
            }
            if let Some(g) = &n.grant {
                if g.lbt.phase() == SinglePhase::Sensing && g.sense_from <= next && next < g.ul_start {
                    return next;
                }
            }
            if n.tx.is_some() || n.blocked_until > next {
                continue;
            }
            if let Some(l) = &n.lbt {
                if l.is_contending() {
                    any_sensing = true;
                    let c = l.config();
                    let at_rest = if c.defer_slots > 0 {
                        l.phase() == Cat4Phase::Defer && l.defer_slots_remaining() == c.defer_slots
                    } else {
                        true
                    };
                    frozen &= at_rest;
                }
            }
        }
        let ev = self.next_event_slot().min(self.horizon);
        if !any_sensing {
            return ev.max(next);
        }
        if self.sensing.is_ideal() && frozen && self.on_air(next) > 0 {
            let end = self
                .active
                .iter()
                .map(|&t| self.txs[t].as_ref().expect("active").end)
                .min()
                .unwrap_or(next);
            return ev.min(end).max(next);
        }
        next
    }

    fn handle(&mut self, k: u64, node: usize, ev: Event) {
        match ev {
            Event::Arrival { file } => {
                let bits = self.files[file].record.size_bits;
                self.nodes[node].queue.push_back(Chunk { file, bits });
            }
            Event::TxEnd { tx } => self.end_tx(k, tx),
            Event::Wake => {}
            Event::GrantTx => self.grant_tx(k, node),
        }
    }

    fn take_bits(&mut self, i: usize, cap: u64) -> Vec<Chunk> {
        let mut out = Vec::new();
        let mut left = cap;
        let q = &mut self.nodes[i].queue;
        while left > 0 {
            let Some(front) = q.front_mut() else { break };
            if front.bits <= left {
                left -= front.bits;
                out.push(q.pop_front().expect("front exists"));
            } else {
                front.bits -= left;
                out.push(Chunk { file: front.file, bits: left });
                left = 0;
            }
        }
        out
    }

    fn give_back(&mut self, i: usize, chunks: Vec<Chunk>) {
        for c in chunks.into_iter().rev() {
            match self.nodes[i].queue.front_mut() {
                Some(f) if f.file == c.file => f.bits += c.bits,
                _ => self.nodes[i].queue.push_front(c),
            }
        }
    }

    fn deliver(&mut self, chunks: &[Chunk], at_slot: u64) {
        for c in chunks {
            let f = &mut self.files[c.file];
            f.delivered += c.bits;
            self.bits_delivered += c.bits;
            if f.delivered >= f.record.size_bits && f.record.completion_s.is_none() {
                f.record.completion_s = Some(at_slot as f64 * self.slot_us * 1e-6);
            }
        }
    }

    fn bits_per_us(&self) -> f64 {
        self.cfg.phy_rate_mbps
    }

    fn mcot_sf(&self) -> u32 {
        (self.cfg.mcot_ms + 1e-9).floor() as u32
    }

    /// A node won its LBT: build and launch its transmission at slot `k`.
    fn start_lbt_tx(&mut self, i: usize, k: u64) {
        let t_us = k as f64 * self.slot_us;
        let (units, kind, block_until) = match self.nodes[i].class {
            NodeClass::WifiAp | NodeClass::WifiSta => {
                let len = self.cfg.wifi_txop_ms * 1000.0;
                let cap = (self.bits_per_us() * len).floor() as u64;
                let payload = self.take_bits(i, cap);
                if payload.is_empty() {
                    (Vec::new(), TxKind::Wifi, 0)
                } else {
                    let end = slot_ceil(t_us + len, self.slot_us);
                    let u = Unit { start: k, end, data: true, collided: false, payload, harq: None };
                    (vec![u], TxKind::Wifi, 0)
                }
            }
            NodeClass::Enb => self.build_enb_burst(i, k, t_us),
            NodeClass::Ue => self.build_gul_burst(i, k, t_us),
        };
        if units.is_empty() {
            // Nothing to send after all: give up the opportunity.
            let d = self.draw(i, self.cfg.w0);
            let lbt = self.nodes[i].lbt.as_mut().expect("lbt");
            lbt.on_tx_result(true, d).expect("ready machine");
            lbt.release();
            return;
        }
        self.nodes[i].blocked_until = block_until;
        let class = self.nodes[i].class;
        self.stats.get_mut(&class).expect("class").access_attempts += 1;
        self.launch(i, k, units, kind);
    }

    fn launch(&mut self, i: usize, k: u64, mut units: Vec<Unit>, kind: TxKind) {
        let end = units.iter().map(|u| u.end).max().expect("non-empty");
        for &a in &self.active {
            let other = self.txs[a].as_mut().expect("active");
            if other.end <= k {
                continue;
            }
            for u in other.units.iter_mut() {
                for v in units.iter_mut() {
                    if u.start < v.end && v.start < u.end {
                        u.collided = true;
                        v.collided = true;
                    }
                }
            }
        }
        let clip = end.min(self.horizon);
        let from = k.max(self.covered_until);
        if clip > from {
            self.airtime_slots += clip - from;
        }
        self.covered_until = self.covered_until.max(clip);
        let id = self.txs.len();
        self.txs.push(Some(Tx { node: i, start: k, end, units, kind }));
        self.active.push(id);
        self.nodes[i].tx = Some(id);
        self.schedule(end, i, Event::TxEnd { tx: id });
    }

    /// Subframe units from `data_start_us`, one per subframe.
    fn sf_units(&self, data_start_us: f64, lens_us: &[f64]) -> Vec<(u64, u64, f64)> {
        let mut out = Vec::with_capacity(lens_us.len());
        let mut a = data_start_us;
        for &len in lens_us {
            let b = a + len;
            out.push((slot_ceil(a, self.slot_us), slot_ceil(b, self.slot_us), len));
            a = b;
        }
        out
    }

    fn reservation_unit(&self, k: u64, data_start_us: f64) -> Option<Unit> {
        let s = slot_ceil(data_start_us, self.slot_us);
        (s > k).then(|| Unit { start: k, end: s, data: false, collided: false, payload: Vec::new(), harq: None })
    }

    fn build_enb_burst(&mut self, i: usize, k: u64, t_us: f64) -> (Vec<Unit>, TxKind, u64) {
        let offset = t_us % SF_US;
        let plan = plan_subframe(offset, &[], self.cfg.subframe_mode).expect("offset in range");
        let data_start_us = t_us + plan.reservation_us;
        let mcot = self.mcot_sf();
        let sul = self.cfg.uplink_mode == UplinkMode::Sul;
        let delay_sf = (self.cfg.grant_processing_delay_ms - 1e-9).ceil() as u32;
        let grant_ue = if sul && delay_sf < mcot { self.grant_candidate(i) } else { None };
        let dl_limit = if grant_ue.is_some() { delay_sf } else { mcot };
        let cap = (self.bits_per_us() * SF_US).floor() as u64;
        let need = self.nodes[i].queued_bits().div_ceil(cap) as u32;
        let feedback = std::mem::take(&mut self.nodes[i].pending_feedback);
        let control = grant_ue.is_some() || !feedback.is_empty();
        let n_units = need.min(dl_limit).max(control as u32);
        if n_units == 0 {
            self.nodes[i].pending_feedback = feedback;
            return (Vec::new(), TxKind::Enb { feedback: Vec::new(), grant_ue: None }, 0);
        }
        let mut units: Vec<Unit> = self.reservation_unit(k, data_start_us).into_iter().collect();
        let lens = vec![SF_US; n_units as usize];
        for (s, e, _) in self.sf_units(data_start_us, &lens) {
            let payload = self.take_bits(i, cap);
            units.push(Unit { start: s, end: e, data: true, collided: false, payload, harq: None });
        }
        let mut block = 0;
        if let Some(ue) = grant_ue {
            let ul_start = slot_ceil(data_start_us + delay_sf as f64 * SF_US, self.slot_us);
            let ul_sfs = mcot - delay_sf;
            let sense_from = ul_start.saturating_sub(self.single_slots);
            // Leave the sensing gap in front of the uplink subframe.
            if let Some(last) = units.last_mut() {
                if last.end > sense_from {
                    last.end = sense_from.max(last.start + 1);
                }
            }
            let mut lbt = SingleSlotLbtState::new();
            lbt.begin(self.single_slots as u32).expect("fresh machine");
            self.nodes[ue].grant = Some(Grant { sense_from, ul_start, ul_sfs, received: None, lbt });
            let n_children = self.nodes[i].children.len();
            let pos = self.nodes[i].children.iter().position(|&c| c == ue).expect("child");
            self.nodes[i].rr = (pos + 1) % n_children;
            self.schedule(sense_from, ue, Event::Wake);
            self.schedule(ul_start, ue, Event::GrantTx);
            block = slot_ceil(data_start_us + mcot as f64 * SF_US, self.slot_us);
        }
        (units, TxKind::Enb { feedback, grant_ue }, block)
    }

    fn build_gul_burst(&mut self, i: usize, k: u64, t_us: f64) -> (Vec<Unit>, TxKind, u64) {
        let offset = t_us % SF_US;
        let plan = plan_subframe(offset, &self.cfg.allowed_starts, self.cfg.subframe_mode).expect("validated starts");
        let data_start_us = t_us + plan.reservation_us;
        let first_len = match plan.kind {
            SubframeKind::SyncPartial => SF_US * plan.first_sf_symbols() as f64 / SYMBOLS_PER_SF as f64,
            _ => SF_US,
        };
        let budget = self.cfg.mcot_ms * 1000.0;
        let mut lens = vec![first_len];
        while lens.iter().sum::<f64>() + SF_US <= budget + 1e-9 && lens.len() < 10 {
            lens.push(SF_US);
        }
        let slots = self.sf_units(data_start_us, &lens);
        let rate = self.bits_per_us();
        let mut units: Vec<Unit> = self.reservation_unit(k, data_start_us).into_iter().collect();
        let mut data_units: Vec<Unit> = Vec::new();
        let mut nacked: VecDeque<u8> = self.nodes[i].harq.nacked().collect();
        for (idx, &(s, e, len)) in slots.iter().enumerate() {
            let fmt = if idx == 0 { UciFormat::Full } else { UciFormat::Compact };
            let cap = ((rate * len).floor() as u64).saturating_sub(fmt.bits() as u64);
            let retx = nacked
                .iter()
                .position(|&p| self.nodes[i].harq_payload[p as usize].iter().map(|c| c.bits).sum::<u64>() <= cap);
            let pid = if let Some(pos) = retx {
                let p = nacked.remove(pos).expect("index valid");
                self.nodes[i].harq.retransmit(p).expect("pending process");
                p
            } else if !self.nodes[i].queue.is_empty() {
                let Some(p) = self.nodes[i].harq.free_process() else { break };
                self.nodes[i].harq.new_data(p).expect("free process");
                let payload = self.take_bits(i, cap);
                self.nodes[i].harq_payload[p as usize] = payload;
                p
            } else {
                break;
            };
            let payload = self.nodes[i].harq_payload[pid as usize].clone();
            data_units.push(Unit { start: s, end: e, data: true, collided: false, payload, harq: Some(pid) });
        }
        if data_units.is_empty() {
            return (Vec::new(), TxKind::GulBurst, 0);
        }
        self.check_uci(i, &data_units);
        units.extend(data_units);
        (units, TxKind::GulBurst, 0)
    }

    /// Encode the UCI of every subframe: FULL first, COMPACT after.
    fn check_uci(&self, i: usize, units: &[Unit]) {
        let n = units.len();
        let mut total = 0usize;
        for (idx, u) in units.iter().enumerate() {
            let pid = u.harq.expect("GUL unit has a process");
            let full = idx == 0;
            let p = UciPayload {
                c_rnti: i as u16,
                harq_process: pid,
                ndi: self.nodes[i].harq.get(pid).expect("process").ndi,
                burst_len_sf: (n - idx).min(10) as u8,
                carrier_idx: 0,
                format: if full { UciFormat::Full } else { UciFormat::Compact },
                a_csi: full.then_some(self.mcs as u8),
                harq_ack_bitmap: full.then_some(0),
            };
            total += encode_uci(&p).expect("valid UCI").len();
        }
        debug_assert_eq!(total, crate::protocol::burst_uci_bits(n));
    }

    fn grant_tx(&mut self, k: u64, ue: usize) {
        let Some(g) = self.nodes[ue].grant.take() else { return };
        let st = self.stats.get_mut(&NodeClass::Ue).expect("class");
        st.access_attempts += 1;
        let passed = g.received == Some(true) && g.lbt.phase() == SinglePhase::Pass;
        if !passed {
            st.wasted_grants += g.ul_sfs as u64;
            return;
        }
        let cap = (self.bits_per_us() * SF_US).floor() as u64;
        let t_us = g.ul_start as f64 * self.slot_us;
        let lens = vec![SF_US; g.ul_sfs as usize];
        let mut units = Vec::new();
        for (s, e, _) in self.sf_units(t_us, &lens) {
            let payload = self.take_bits(ue, cap);
            if payload.is_empty() {
                break;
            }
            units.push(Unit { start: s, end: e, data: true, collided: false, payload, harq: None });
        }
        if units.is_empty() {
            return;
        }
        self.launch(ue, k, units, TxKind::SulPusch);
    }

    fn end_tx(&mut self, k: u64, id: usize) {
        let tx = self.txs[id].take().expect("tx ends once");
        self.active.retain(|&a| a != id);
        let i = tx.node;
        self.nodes[i].tx = None;
        let class = self.nodes[i].class;
        let first_clean = tx.first_data().is_some_and(|u| !u.collided);
        let mut success = first_clean;
        match tx.kind {
            TxKind::Wifi | TxKind::SulPusch => {
                let dst_ok = |u: &Unit| u.data && !u.collided;
                for u in &tx.units {
                    if dst_ok(u) {
                        self.deliver(&u.payload, u.end);
                    }
                }
                let lost: Vec<Chunk> = tx.units.iter().filter(|u| u.data && u.collided).flat_map(|u| u.payload.clone()).collect();
                self.give_back(i, lost);
            }
            TxKind::Enb { feedback, grant_ue } => {
                for u in &tx.units {
                    if u.data && !u.collided {
                        self.deliver(&u.payload, u.end);
                    }
                }
                let lost: Vec<Chunk> = tx.units.iter().filter(|u| u.data && u.collided).flat_map(|u| u.payload.clone()).collect();
                self.give_back(i, lost);
                if first_clean {
                    for (ue, pid, ack) in feedback {
                        self.nodes[ue].harq.on_feedback(pid, ack).expect("pending process");
                        if ack {
                            self.nodes[ue].harq_payload[pid as usize].clear();
                        }
                    }
                } else {
                    let mut f = feedback;
                    f.append(&mut self.nodes[i].pending_feedback);
                    self.nodes[i].pending_feedback = f;
                }
                if let Some(ue) = grant_ue {
                    if let Some(g) = self.nodes[ue].grant.as_mut() {
                        g.received = Some(first_clean);
                    }
                }
            }
            TxKind::GulBurst => {
                let enb = self.nodes[i].parent.expect("UE has eNB");
                let missed = self.cfg.pusch_miss_prob > 0.0 && self.nodes[enb].rng.gen::<f64>() < self.cfg.pusch_miss_prob;
                success = first_clean && !missed;
                for u in tx.units.iter().filter(|u| u.data) {
                    let ok = !u.collided && !missed;
                    if ok {
                        self.deliver(&u.payload, u.end);
                    }
                    self.nodes[enb].pending_feedback.push((i, u.harq.expect("GUL unit"), ok));
                }
            }
        }
        let st = self.stats.get_mut(&class).expect("class");
        if success {
            st.access_successes += 1;
        } else if !first_clean {
            st.collisions += 1;
        }
        st.units_sent += tx.units.iter().filter(|u| u.data).count() as u64;
        st.units_collided += tx.units.iter().filter(|u| u.data && u.collided).count() as u64;
        if self.nodes[i].lbt.is_some() {
            let lbt = self.nodes[i].lbt.as_ref().expect("lbt");
            if lbt.phase() == Cat4Phase::Ready {
                let cw = next_cw(lbt, success);
                let d = self.draw(i, cw);
                let lbt = self.nodes[i].lbt.as_mut().expect("lbt");
                let out = lbt.on_tx_result(success, d).expect("ready machine");
                // After a failure the escalated window is kept even while
                // the node waits for feedback.
                if out == TxOutcome::Continue && success && !self.has_work(i) {
                    self.nodes[i].lbt.as_mut().expect("lbt").release();
                }
            }
        }
        if self.nodes[i].blocked_until > k {
            let b = self.nodes[i].blocked_until;
            self.schedule(b, i, Event::Wake);
        }
    }

    fn finish(self) -> RunMetrics {
        let files: Vec<FileRecord> = self.files.into_iter().map(|f| f.record).collect();
        let sim_s = self.horizon as f64 * self.slot_us * 1e-6;
        RunMetrics::from_parts(
            self.stats,
            files,
            sim_s,
            self.airtime_slots as f64 * self.slot_us * 1e-6,
            self.bits_generated,
            self.bits_delivered,
        )
    }
}
