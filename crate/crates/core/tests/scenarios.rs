use coexsim::analytic::UplinkMode;
use coexsim::detection::{pdf_busy, pdf_idle, tail_busy, tail_idle, DetectionParams};
use coexsim::sim::{self, Direction, NodeClass, ScenarioConfig, Technology};
use coexsim_oracles::{quad, special};

#[test]
fn closed_form_tails_match_quadrature() {
    for mu in [1u32, 3] {
        for gamma in [0.5, 20.0] {
            let p = DetectionParams::new(mu, gamma, 4.0).unwrap();
            for t in [0.3, 4.0, 40.0] {
                let busy = quad::integrate_to_inf(|y| special::noncentral_chi2(y, mu, gamma), t, 8.0, 1e-13);
                let idle = quad::integrate_to_inf(|y| special::chi2_even(y, mu), t, 8.0, 1e-13);
                assert!((tail_busy(t, &p).unwrap() - busy).abs() < 1e-10);
                assert!((tail_idle(t, mu).unwrap() - idle).abs() < 1e-10);
            }
            let y = 2.5;
            assert!((pdf_busy(y, &p).unwrap() - special::noncentral_chi2(y, mu, gamma)).abs() < 1e-13);
            assert!((pdf_idle(y, mu).unwrap() - special::chi2_even(y, mu)).abs() < 1e-15);
        }
    }
}

fn scenario(mode: UplinkMode, seed: u64) -> ScenarioConfig {
    ScenarioConfig { uplink_mode: mode, seed, sim_duration_s: 10.0, ..Default::default() }
}

#[test]
fn grantless_uplink_beats_scheduled() {
    let gul = sim::run(&scenario(UplinkMode::Gul, 4)).unwrap();
    let sul = sim::run(&scenario(UplinkMode::Sul, 4)).unwrap();
    assert!(gul.upt(Technology::Mf, Direction::Ul).unwrap() > sul.upt(Technology::Mf, Direction::Ul).unwrap_or(0.0));
    assert_eq!(gul.stats(NodeClass::Ue).wasted_grants, 0);
    assert!(sul.stats(NodeClass::Ue).wasted_grants > 0);
}

#[test]
fn wifi_only_network() {
    let cfg = ScenarioConfig { n_enb: 0, sim_duration_s: 5.0, ..Default::default() };
    let m = sim::run(&cfg).unwrap();
    assert!(m.files.iter().all(|f| f.technology == Technology::Wifi));
    assert!(m.mean_upt_dl_wifi.is_some());
    assert_eq!(m.stats(NodeClass::Enb).access_attempts, 0);
}

#[test]
fn energy_detection_scenario_runs() {
    let cfg = ScenarioConfig {
        sensing: coexsim::analytic::SensingModel::EnergyDetection,
        false_alarm: true,
        sim_duration_s: 3.0,
        ..Default::default()
    };
    let m = sim::run(&cfg).unwrap();
    assert!(m.bits_delivered > 0);
    assert_eq!(m, sim::run(&cfg).unwrap());
}

#[test]
fn seeds_give_consistent_throughput() {
    // Ten seeds: every per-seed GUL UL mean lies within the 95% band of
    // the pooled sample, i.e. no seed is an outlier.
    let v: Vec<f64> = (1..=10)
        .map(|s| sim::run(&scenario(UplinkMode::Gul, s)).unwrap().mean_upt_ul_mf.unwrap())
        .collect();
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    let sd = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt();
    assert!(v.iter().all(|x| (x - mean).abs() < 3.0 * sd.max(1e-9)), "{v:?}");
}
