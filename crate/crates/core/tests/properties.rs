use coexsim::analytic::{busy_prob, p_tx_cat4, p_tx_wifi, solve_fixed_point, ChannelModel, ModelParams, UplinkMode};
use coexsim::detection::{tail_busy, tail_idle, DetectionParams, EnergyDetector};
use coexsim::lbt::{Cat4Config, Cat4LbtState, Cat4Phase, TxOutcome};
use coexsim::protocol::{
    blind_decode_uci, decode_uci, dequantize_snr_db, encode_uci, link_adaptation_step, plan_subframe,
    symbol_boundary_us, HarqProcessTable, SubframeMode, UciFormat, UciPayload,
};
use coexsim::sim::{self, NodeClass, ScenarioConfig};
use coexsim_oracles::formulas;
use proptest::prelude::*;

fn uci() -> impl Strategy<Value = UciPayload> {
    (any::<u16>(), 0u8..16, any::<bool>(), 1u8..=10, 0u8..8, any::<bool>(), any::<u8>(), any::<u16>()).prop_map(
        |(c_rnti, harq_process, ndi, burst_len_sf, carrier_idx, full, csi, ack)| UciPayload {
            c_rnti,
            harq_process,
            ndi,
            burst_len_sf,
            carrier_idx,
            format: if full { UciFormat::Full } else { UciFormat::Compact },
            a_csi: full.then_some(csi),
            harq_ack_bitmap: full.then_some(ack),
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn transmit_probabilities_are_probabilities(
        q in 0.0..=1.0f64, w0 in 1u32..=1024, m in 0u32..=10, pb in 0.0..0.999f64, pf in 0.0..0.999f64,
    ) {
        let w = p_tx_wifi(q, w0, m, pb, pf).unwrap();
        let c = p_tx_cat4(q, w0, m, pb, pf).unwrap();
        prop_assert!((0.0..=1.0).contains(&w));
        prop_assert!((0.0..=1.0).contains(&c));
    }

    #[test]
    fn transmit_probabilities_match_renewal_chains(
        q in 0.01..=1.0f64, w0 in 1u32..=256, m in 0u32..=8, pb in 0.0..0.9f64, pf in 0.0..0.9f64,
    ) {
        let w = p_tx_wifi(q, w0, m, pb, pf).unwrap();
        let c = p_tx_cat4(q, w0, m, pb, pf).unwrap();
        prop_assert!((w - formulas::p_tx_wifi_renewal(q, w0 as f64, m, pb, pf)).abs() < 1e-12);
        prop_assert!((c - formulas::p_tx_cat4_renewal(q, w0 as f64, m, pb, pf)).abs() < 1e-12);
    }

    #[test]
    fn busy_probability_in_range(p in 0.0..=1.0f64, n in 1u32..30, tnr in -5.0..15.0f64, fa in any::<bool>()) {
        let mut ch = ModelParams::default().channel();
        ch.detector.tnr_db = tnr;
        ch.false_alarm = fa;
        let b = busy_prob(p, n, &ch).unwrap();
        prop_assert!((0.0..=1.0).contains(&b));
        let ideal = busy_prob(p, n, &ChannelModel::ideal()).unwrap();
        prop_assert!((ideal - (1.0 - (1.0 - p).powi(n as i32 - 1))).abs() < 1e-12);
    }

    #[test]
    fn tails_are_monotone(mu in 1u32..=8, gamma in 0.01..60.0f64, t in 0.0..100.0f64, dt in 0.0..10.0f64) {
        let p = DetectionParams::new(mu, gamma, 1.0).unwrap();
        let (a, b) = (tail_busy(t, &p).unwrap(), tail_busy(t + dt, &p).unwrap());
        prop_assert!((0.0..=1.0).contains(&a) && b <= a + 1e-12);
        let (i, j) = (tail_idle(t, mu).unwrap(), tail_idle(t + dt, mu).unwrap());
        prop_assert!(j <= i + 1e-12);
        prop_assert!(a >= i - 1e-12);
    }

    #[test]
    fn detection_falls_with_threshold(tnr in -10.0..20.0f64, step in 0.1..5.0f64, n in 1u32..6, snr in 0.1..30.0f64) {
        let lo = EnergyDetector { mu: 1, tnr_db: tnr };
        let hi = EnergyDetector { mu: 1, tnr_db: tnr + step };
        prop_assert!(hi.p_detect(n, snr).unwrap() <= lo.p_detect(n, snr).unwrap() + 1e-12);
        prop_assert!(hi.p_false_alarm().unwrap() <= lo.p_false_alarm().unwrap() + 1e-12);
    }

    #[test]
    fn uci_round_trips(p in uci()) {
        let bits = encode_uci(&p).unwrap();
        prop_assert_eq!(bits.len(), p.format.bits());
        prop_assert_eq!(decode_uci(&bits, p.format).unwrap(), p);
        prop_assert_eq!(blind_decode_uci(&bits).unwrap(), p);
    }

    #[test]
    fn planner_lands_on_symbols(offset in 0.0..1000.0f64, mask in 0u8..4) {
        let starts: Vec<u8> = [1u8, 8].into_iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, s)| s).collect();
        let plan = plan_subframe(offset, &starts, SubframeMode::Sync).unwrap();
        prop_assert!(plan.reservation_us >= 0.0 && plan.reservation_us < 1000.0);
        let end = offset + plan.reservation_us;
        prop_assert!((0..=14).any(|s| (symbol_boundary_us(s) - end).abs() < 1e-9));
        if plan.start_symbol != 0 {
            prop_assert!(starts.contains(&plan.start_symbol));
        }
    }

    #[test]
    fn mcs_matches_linear_scan(word in any::<u8>(), n in 1usize..20, base in -10.0..10.0f64, gap in 0.25..4.0f64) {
        let table: Vec<f64> = (0..n).map(|i| base + gap * i as f64).collect();
        let snr = dequantize_snr_db(word);
        let linear = table.iter().rposition(|&t| t <= snr).unwrap_or(0);
        prop_assert_eq!(link_adaptation_step(word, &table).unwrap(), linear);
    }

    #[test]
    fn ndi_toggles_only_on_new_data(acks in proptest::collection::vec(any::<bool>(), 1..60), pid in 0u8..16) {
        let mut t = HarqProcessTable::new();
        let mut prev = t.get(pid).unwrap().ndi;
        let mut fresh = true;
        for ack in acks {
            let ndi = if fresh { t.new_data(pid).unwrap() } else { t.retransmit(pid).unwrap() };
            prop_assert_eq!(ndi, if fresh { !prev } else { prev });
            prev = ndi;
            t.on_feedback(pid, ack).unwrap();
            fresh = ack;
        }
    }

    #[test]
    fn lbt_state_stays_consistent(
        w0 in 1u32..=64, m in 0u32..=6, defer in 0u32..4,
        events in proptest::collection::vec((any::<bool>(), any::<bool>(), any::<u32>()), 1..400),
    ) {
        let cfg = Cat4Config::cat4(w0, m, defer);
        let run = || {
            let mut s = Cat4LbtState::idle(cfg).unwrap();
            let mut trace = Vec::new();
            for &(busy, ok, raw) in &events {
                match s.phase() {
                    Cat4Phase::Idle => { s.on_arrival(busy, raw % w0).unwrap(); }
                    Cat4Phase::Ready => {
                        let cw = coexsim::sim::markov::next_cw(&s, ok);
                        if s.on_tx_result(ok, raw % cw).unwrap() == TxOutcome::Dropped {
                            assert_eq!(s.phase(), Cat4Phase::Idle);
                        }
                    }
                    _ => { s.on_slot(busy).unwrap(); }
                }
                assert!(s.stage() <= m);
                assert_eq!(s.cw(), w0 << s.stage());
                assert!(s.backoff_counter() < s.cw());
                assert!(s.defer_slots_remaining() <= defer);
                trace.push(s.clone());
            }
            trace
        };
        prop_assert_eq!(run(), run());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn fixed_point_is_a_probability(q in 0.01..=1.0f64, nw in 0u32..6, ne in 1u32..6, nu in 0u32..6, gul in any::<bool>()) {
        let p = ModelParams {
            q, n_wifi: nw, n_enb: ne, n_ue: nu,
            uplink_mode: if gul { UplinkMode::Gul } else { UplinkMode::Sul },
            ..Default::default()
        };
        let s = solve_fixed_point(&p).unwrap();
        prop_assert!(s.converged && (0.0..=1.0).contains(&s.p_b));
    }

    #[test]
    fn simulation_conserves(seed in any::<u64>(), gul in any::<bool>(), lambda in 0.1..2.0f64, ap in 0u32..3, enb in 0u32..3) {
        let cfg = ScenarioConfig {
            seed, lambda_files_per_s: lambda, n_wifi_ap: ap, n_enb: enb, sim_duration_s: 2.0,
            uplink_mode: if gul { UplinkMode::Gul } else { UplinkMode::Sul },
            ..Default::default()
        };
        let m = sim::run(&cfg).unwrap();
        prop_assert!(m.bits_delivered <= m.bits_generated);
        prop_assert!(m.airtime_s <= m.simulated_s + 1e-12);
        for c in NodeClass::ALL {
            let s = m.stats(c);
            prop_assert!(s.access_successes + s.collisions <= s.access_attempts);
            prop_assert!(s.units_collided <= s.units_sent);
        }
        for f in &m.files {
            if let Some(done) = f.completion_s {
                prop_assert!(done > f.arrival_s && done <= m.simulated_s);
            }
        }
    }
}
