//! Closed-form channel-access model and its self-consistent solution.
//!
//! Both transmit probabilities are renewal rates of slotted Markov chains
//! driven by a per-slot busy probability `p_b` and a per-attempt failure
//! probability `p_f`. The chains are coupled through the busy probability
//! seen by a node, which in turn depends on every other node's transmit
//! probability; [`solve_fixed_point`] closes that loop with `p_b = p_f`.
//!
//! The formulas carry a common `(1 - 2 p_f)` factor in numerator and
//! denominator. It is cancelled analytically here and the remaining
//! `(1 - (2 p_f)^k) / (1 - 2 p_f)` factors are evaluated as geometric sums,
//! so `p_f = 1/2` is an ordinary point.

use crate::detection::{DetectionError, EnergyDetector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Slack allowed before an out-of-range probability is reported.
const RANGE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum UplinkMode {
    #[serde(rename = "SUL")]
    Sul,
    #[serde(rename = "GUL")]
    Gul,
}

impl std::fmt::Display for UplinkMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            UplinkMode::Sul => "SUL",
            UplinkMode::Gul => "GUL",
        })
    }
}

/// How a sensing node turns the on-air transmitter set into a verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SensingModel {
    /// Busy iff at least one other node transmits.
    #[serde(rename = "IDEAL")]
    Ideal,
    /// Energy detector against the configured threshold.
    #[serde(rename = "ENERGY_DETECTION")]
    EnergyDetection,
}

/// Binomial coefficient used for the number of other transmitters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Coefficient {
    /// Binom(N-1, n): a node observes the other N-1 nodes.
    Others,
    /// Binom(N, n) with exponent N-1-n, literally as printed.
    Printed,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalyticError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("degenerate denominator in {formula} at q={q}, w0={w0}, m={m}, p_b={p_b}, p_f={p_f}")]
    DegenerateDenominator {
        formula: &'static str,
        q: f64,
        w0: u32,
        m: u32,
        p_b: f64,
        p_f: f64,
    },
    #[error("{formula} = {value} outside [0,1] at q={q}, w0={w0}, m={m}, p_b={p_b}, p_f={p_f}")]
    OutOfRange {
        formula: &'static str,
        value: f64,
        q: f64,
        w0: u32,
        m: u32,
        p_b: f64,
        p_f: f64,
    },
    #[error("fixed point not converged after {} iterations (residual {})", .0.iterations, .0.residual)]
    NotConverged(Box<FixedPointSolution>),
    #[error("solution is not converged")]
    Unconverged,
    #[error(transparent)]
    Detection(#[from] DetectionError),
}

fn check_prob(name: &str, v: f64) -> Result<(), AnalyticError> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(AnalyticError::InvalidParams(format!("{name} = {v} not in [0,1]")))
    }
}

/// All symbols of the access model plus population counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelParams {
    pub q: f64,
    pub m: u32,
    pub w0: u32,
    pub n_wifi: u32,
    pub n_enb: u32,
    pub n_ue: u32,
    pub snr_per_tx: f64,
    pub detection: EnergyDetector,
    pub sensing: SensingModel,
    pub uplink_mode: UplinkMode,
    /// Add the n = 0 false-alarm term to the busy probability.
    pub false_alarm: bool,
    pub coefficient: Coefficient,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            q: 1.0,
            m: 4,
            w0: 16,
            n_wifi: 5,
            n_enb: 5,
            n_ue: 5,
            snr_per_tx: 10.0,
            detection: EnergyDetector::default(),
            sensing: SensingModel::EnergyDetection,
            uplink_mode: UplinkMode::Gul,
            false_alarm: false,
            coefficient: Coefficient::Others,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<(), AnalyticError> {
        check_prob("q", self.q)?;
        if self.w0 < 2 {
            return Err(AnalyticError::InvalidParams(format!("w0 = {} must be >= 2", self.w0)));
        }
        if self.m > 30 {
            return Err(AnalyticError::InvalidParams(format!("m = {} too large", self.m)));
        }
        if !(self.snr_per_tx > 0.0) || !self.snr_per_tx.is_finite() {
            return Err(AnalyticError::InvalidParams(format!(
                "snr_per_tx = {} must be positive",
                self.snr_per_tx
            )));
        }
        if self.detection.mu < 1 {
            return Err(AnalyticError::InvalidParams("detection.mu must be >= 1".into()));
        }
        if !self.detection.tnr_db.is_finite() {
            return Err(AnalyticError::InvalidParams("detection.tnr_db must be finite".into()));
        }
        if self.cat4_count() + self.n_wifi == 0 {
            return Err(AnalyticError::InvalidParams("no contending node".into()));
        }
        Ok(())
    }

    /// Number of Cat.4 contenders under the configured uplink mode.
    pub fn cat4_count(&self) -> u32 {
        match self.uplink_mode {
            UplinkMode::Sul => self.n_enb,
            UplinkMode::Gul => self.n_enb + self.n_ue,
        }
    }

    pub fn with_mode(&self, mode: UplinkMode) -> Self {
        Self {
            uplink_mode: mode,
            ..self.clone()
        }
    }

    pub fn channel(&self) -> ChannelModel {
        ChannelModel {
            sensing: self.sensing,
            detector: self.detection,
            snr_per_tx: self.snr_per_tx,
            false_alarm: self.false_alarm,
            coefficient: self.coefficient,
        }
    }
}

/// Everything the busy probability needs besides the transmit probabilities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelModel {
    pub sensing: SensingModel,
    pub detector: EnergyDetector,
    pub snr_per_tx: f64,
    pub false_alarm: bool,
    pub coefficient: Coefficient,
}

impl ChannelModel {
    /// Perfect detection, no false alarms.
    pub fn ideal() -> Self {
        Self {
            sensing: SensingModel::Ideal,
            detector: EnergyDetector::default(),
            snr_per_tx: 1.0,
            false_alarm: false,
            coefficient: Coefficient::Others,
        }
    }

    /// Busy-verdict probability for `n = 0..=max_n` on-air transmitters.
    pub fn detection_table(&self, max_n: u32) -> Result<Vec<f64>, AnalyticError> {
        let mut t = Vec::with_capacity(max_n as usize + 1);
        t.push(match (self.sensing, self.false_alarm) {
            (SensingModel::EnergyDetection, true) => self.detector.p_false_alarm()?,
            _ => 0.0,
        });
        for n in 1..=max_n {
            t.push(match self.sensing {
                SensingModel::Ideal => 1.0,
                SensingModel::EnergyDetection => self.detector.p_detect(n, self.snr_per_tx)?,
            });
        }
        Ok(t)
    }
}

/// sum_{i<k} x^i
fn geometric(x: f64, k: u32) -> f64 {
    let mut s = 0.0;
    let mut p = 1.0;
    for _ in 0..k {
        s += p;
        p *= x;
    }
    s
}

fn finish(
    formula: &'static str,
    num: f64,
    den: f64,
    args: (f64, u32, u32, f64, f64),
) -> Result<f64, AnalyticError> {
    let (q, w0, m, p_b, p_f) = args;
    if den.abs() < 1e-300 {
        return Err(AnalyticError::DegenerateDenominator { formula, q, w0, m, p_b, p_f });
    }
    let v = num / den;
    if !(-RANGE_SLACK..=1.0 + RANGE_SLACK).contains(&v) {
        return Err(AnalyticError::OutOfRange { formula, value: v, q, w0, m, p_b, p_f });
    }
    Ok(v.clamp(0.0, 1.0))
}

fn check_inputs(q: f64, w0: u32, p_b: f64, p_f: f64) -> Result<(), AnalyticError> {
    check_prob("q", q)?;
    check_prob("p_b", p_b)?;
    check_prob("p_f", p_f)?;
    if w0 < 1 {
        return Err(AnalyticError::InvalidParams("w0 must be >= 1".into()));
    }
    Ok(())
}

/// WiFi DCF transmit probability per slot.
pub fn p_tx_wifi(q: f64, w0: u32, m: u32, p_b: f64, p_f: f64) -> Result<f64, AnalyticError> {
    check_inputs(q, w0, p_b, p_f)?;
    let w = w0 as f64;
    let num = 2.0 * q * (1.0 - p_b);
    let den = 2.0 * (1.0 - p_b) * (1.0 - p_f)
        + q * (w * p_f * geometric(2.0 * p_f, m) + (1.0 + w - 2.0 * p_b));
    finish("p_tx_wifi", num, den, (q, w0, m, p_b, p_f))
}

/// Cat.4 LBT transmit probability per slot: immediate access on an idle
/// arrival slot, exponential backoff over stages `0..=m`, window reset after
/// a failure at stage `m`.
pub fn p_tx_cat4(q: f64, w0: u32, m: u32, p_b: f64, p_f: f64) -> Result<f64, AnalyticError> {
    check_inputs(q, w0, p_b, p_f)?;
    let w = w0 as f64;
    let p = p_b + p_f - p_b * p_f;
    let pf_m1 = p_f.powi(m as i32 + 1);
    let r = 1.0 - pf_m1;
    let num = 2.0 * q * (1.0 - p_b) * (1.0 - p * pf_m1);
    let den = 2.0 * (1.0 - p_b) * (1.0 - p_f)
        + q * (w * p * (1.0 - p_f) * geometric(2.0 * p_f, m + 1)
            + p * r * (1.0 - 2.0 * p_b)
            + 2.0 * (1.0 - p_b).powi(2) * (1.0 - p_f));
    finish("p_tx_cat4", num, den, (q, w0, m, p_b, p_f))
}

/// Pmf of the number of transmitters among `count` nodes, each on air with
/// probability `p`. `printed` applies the literal Binom(count+1, n) weights.
fn class_pmf(count: u32, p: f64, printed: bool) -> Vec<f64> {
    let n_top = count as usize;
    let mut pmf = vec![0.0; n_top + 1];
    let trials = if printed { count + 1 } else { count };
    let mut c = 1.0f64;
    for n in 0..=n_top {
        if n > 0 {
            c = c * (trials as f64 - (n as f64 - 1.0)) / n as f64;
        }
        pmf[n] = c * p.powi(n as i32) * (1.0 - p).powi((count as usize - n) as i32);
    }
    pmf
}

fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        if *x == 0.0 {
            continue;
        }
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Busy probability of a mixed population `classes = [(count, p_tx)]`,
/// averaged over observers by node count. `table[n]` is the busy-verdict
/// probability with `n` transmitters on air.
pub fn busy_prob_mixture(classes: &[(u32, f64)], table: &[f64], coefficient: Coefficient) -> f64 {
    let total: u32 = classes.iter().map(|c| c.0).sum();
    if total == 0 {
        return 0.0;
    }
    let mut acc = 0.0;
    for (obs, &(count, _)) in classes.iter().enumerate() {
        if count == 0 {
            continue;
        }
        let mut dist = vec![1.0];
        for (j, &(cj, pj)) in classes.iter().enumerate() {
            let others = if j == obs { cj - 1 } else { cj };
            let printed = j == obs && coefficient == Coefficient::Printed;
            dist = convolve(&dist, &class_pmf(others, pj, printed));
        }
        let b: f64 = dist.iter().enumerate().map(|(n, w)| w * table[n]).sum();
        acc += count as f64 * b;
    }
    // Binomial weights sum to 1 only up to roundoff.
    (acc / total as f64).clamp(0.0, 1.0)
}

/// Busy probability of a homogeneous population of `n_total` nodes.
pub fn busy_prob(p_tx: f64, n_total: u32, channel: &ChannelModel) -> Result<f64, AnalyticError> {
    check_prob("p_tx", p_tx)?;
    if n_total < 1 {
        return Err(AnalyticError::InvalidParams("n_total must be >= 1".into()));
    }
    let table = channel.detection_table(n_total - 1)?;
    Ok(busy_prob_mixture(&[(n_total, p_tx)], &table, channel.coefficient))
}

/// Damped iteration settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub alpha: f64,
    /// Bound on the residual |B(p_b) - p_b| at the returned point.
    pub tolerance: f64,
    pub max_iterations: u32,
    pub initial_p_b: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            tolerance: 1e-9,
            max_iterations: 10_000,
            initial_p_b: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FixedPointSolution {
    pub p_tx_wifi: f64,
    pub p_tx_cat4: f64,
    pub p_b: f64,
    pub p_f: f64,
    pub residual: f64,
    pub iterations: u32,
    pub converged: bool,
}

pub fn solve_fixed_point(params: &ModelParams) -> Result<FixedPointSolution, AnalyticError> {
    solve_fixed_point_with(params, &SolverOptions::default())
}

pub fn solve_fixed_point_with(
    params: &ModelParams,
    opts: &SolverOptions,
) -> Result<FixedPointSolution, AnalyticError> {
    params.validate()?;
    let n_cat4 = params.cat4_count();
    let total = params.n_wifi + n_cat4;
    let table = params.channel().detection_table(total - 1)?;
    let (q, w0, m) = (params.q, params.w0, params.m);
    let mut p_b = opts.initial_p_b;
    let mut last = None;
    for it in 1..=opts.max_iterations {
        let pw = p_tx_wifi(q, w0, m, p_b, p_b)?;
        let pc = p_tx_cat4(q, w0, m, p_b, p_b)?;
        let b = busy_prob_mixture(&[(params.n_wifi, pw), (n_cat4, pc)], &table, params.coefficient);
        if !(-RANGE_SLACK..=1.0 + RANGE_SLACK).contains(&b) {
            return Err(AnalyticError::OutOfRange {
                formula: "busy_prob",
                value: b,
                q,
                w0,
                m,
                p_b,
                p_f: p_b,
            });
        }
        let residual = (b - p_b).abs();
        let sol = FixedPointSolution {
            p_tx_wifi: pw,
            p_tx_cat4: pc,
            p_b,
            p_f: p_b,
            residual,
            iterations: it,
            converged: residual < opts.tolerance,
        };
        if sol.converged {
            return Ok(sol);
        }
        last = Some(sol);
        p_b = ((1.0 - opts.alpha) * p_b + opts.alpha * b).clamp(0.0, 1.0);
    }
    match last {
        Some(sol) => Err(AnalyticError::NotConverged(Box::new(sol))),
        None => Err(AnalyticError::InvalidParams("max_iterations must be >= 1".into())),
    }
}

/// Scheduled-uplink access probability: the eNB wins Cat.4 LBT and the
/// UE's single-slot LBT then finds the channel idle.
pub fn access_prob_sul(sol: &FixedPointSolution) -> Result<f64, AnalyticError> {
    if !sol.converged {
        return Err(AnalyticError::Unconverged);
    }
    Ok((1.0 - sol.p_b) * sol.p_tx_cat4)
}

/// Grant-less access probability: the UE's own Cat.4 transmit probability
/// with UEs counted as contenders.
pub fn access_prob_gul(params: &ModelParams) -> Result<f64, AnalyticError> {
    if params.uplink_mode != UplinkMode::Gul {
        return Err(AnalyticError::InvalidParams("access_prob_gul needs uplink_mode = GUL".into()));
    }
    Ok(solve_fixed_point(params)?.p_tx_cat4)
}

/// One row of a q sweep. `p_tx_wifi`, `p_tx_cat4` and `p_b` come from the
/// population of the configured uplink mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub q: f64,
    pub p_tx_wifi: f64,
    pub p_tx_cat4: f64,
    pub access_sul: f64,
    pub access_gul: f64,
    pub p_b: f64,
    pub converged: bool,
    pub sul: Option<FixedPointSolution>,
    pub gul: Option<FixedPointSolution>,
}

fn solve_row(params: &ModelParams) -> Option<FixedPointSolution> {
    match solve_fixed_point(params) {
        Ok(s) => Some(s),
        Err(AnalyticError::NotConverged(s)) => Some(*s),
        Err(_) => None,
    }
}

/// Evaluate both uplink modes on every grid point. Rows that fail to
/// converge are kept and flagged.
pub fn sweep(params: &ModelParams, q_grid: &[f64]) -> Result<Vec<SweepRow>, AnalyticError> {
    if q_grid.is_empty() {
        return Err(AnalyticError::InvalidParams("empty q grid".into()));
    }
    for w in q_grid.windows(2) {
        if !(w[1] > w[0]) {
            return Err(AnalyticError::InvalidParams("q grid must be strictly increasing".into()));
        }
    }
    for &q in q_grid {
        check_prob("q", q)?;
    }
    let mut base = params.clone();
    base.q = q_grid[0];
    base.validate()?;
    let rows = q_grid
        .iter()
        .map(|&q| {
            let p = ModelParams { q, ..params.clone() };
            let sul = solve_row(&p.with_mode(UplinkMode::Sul));
            let gul = solve_row(&p.with_mode(UplinkMode::Gul));
            let own = match params.uplink_mode {
                UplinkMode::Sul => sul,
                UplinkMode::Gul => gul,
            };
            let nan = f64::NAN;
            SweepRow {
                q,
                p_tx_wifi: own.map_or(nan, |s| s.p_tx_wifi),
                p_tx_cat4: own.map_or(nan, |s| s.p_tx_cat4),
                access_sul: sul.map_or(nan, |s| (1.0 - s.p_b) * s.p_tx_cat4),
                access_gul: gul.map_or(nan, |s| s.p_tx_cat4),
                p_b: own.map_or(nan, |s| s.p_b),
                converged: sul.is_some_and(|s| s.converged) && gul.is_some_and(|s| s.converged),
                sul,
                gul,
            }
        })
        .collect();
    Ok(rows)
}

/// `q` values `start, start+step, ..., <= stop` (stop included within 1e-9).
pub fn q_grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>, AnalyticError> {
    if !(step > 0.0) || !(stop >= start) {
        return Err(AnalyticError::InvalidParams(format!(
            "bad grid {start}:{stop}:{step}"
        )));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| start + i as f64 * step).map(|q| (q * 1e12).round() / 1e12).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fig2() -> ModelParams {
        ModelParams::default()
    }

    #[test]
    fn wifi_examples() {
        assert_eq!(p_tx_wifi(0.0, 16, 4, 0.3, 0.3).unwrap(), 0.0);
        assert!((p_tx_wifi(1.0, 16, 4, 0.0, 0.0).unwrap() - 2.0 / 19.0).abs() < 1e-15);
        // Removable singularity: the limit value, not 0/0.
        assert!((p_tx_wifi(1.0, 16, 4, 0.0, 0.5).unwrap() - 0.04).abs() < 1e-15);
    }

    #[test]
    fn cat4_examples() {
        assert_eq!(p_tx_cat4(0.0, 16, 4, 0.3, 0.3).unwrap(), 0.0);
        assert!((p_tx_cat4(1.0, 16, 4, 0.0, 0.0).unwrap() - 0.5).abs() < 1e-15);
        let v = p_tx_cat4(0.5, 16, 4, 0.2, 0.2).unwrap();
        assert!(v > 0.0 && v < 1.0);
        let a = p_tx_cat4(1.0, 16, 4, 0.3, 0.5 - 1e-10).unwrap();
        let b = p_tx_cat4(1.0, 16, 4, 0.3, 0.5 + 1e-10).unwrap();
        assert!((a - b).abs() < 1e-8);
    }

    #[test]
    fn formula_domain_errors() {
        assert!(matches!(p_tx_wifi(1.5, 16, 4, 0.0, 0.0), Err(AnalyticError::InvalidParams(_))));
        assert!(matches!(p_tx_cat4(0.5, 16, 4, -0.1, 0.0), Err(AnalyticError::InvalidParams(_))));
        assert!(matches!(
            p_tx_wifi(0.0, 16, 4, 1.0, 0.0),
            Err(AnalyticError::DegenerateDenominator { .. })
        ));
    }

    #[test]
    fn busy_prob_examples() {
        let ideal = ChannelModel::ideal();
        assert_eq!(busy_prob(0.7, 1, &ideal).unwrap(), 0.0);
        assert_eq!(busy_prob(0.0, 5, &ideal).unwrap(), 0.0);
        let mut strong = ModelParams::default().channel();
        strong.detector.tnr_db = -10.0;
        strong.snr_per_tx = 10.0;
        assert!((busy_prob(1.0, 5, &strong).unwrap() - 1.0).abs() < 1e-6);
        let p = 0.2;
        let expect = 1.0 - (1.0_f64 - p).powi(4);
        assert!((busy_prob(p, 5, &ideal).unwrap() - expect).abs() < 1e-15);
    }

    #[test]
    fn printed_coefficient_is_literal() {
        let ch = ChannelModel {
            coefficient: Coefficient::Printed,
            ..ChannelModel::ideal()
        };
        let (n, p) = (5u32, 0.1f64);
        let mut expect = 0.0;
        let binom = |a: u32, b: u32| -> f64 { (0..b).fold(1.0, |c, i| c * (a - i) as f64 / (i + 1) as f64) };
        for k in 1..n {
            expect += binom(n, k) * p.powi(k as i32) * (1.0 - p).powi((n - 1 - k) as i32);
        }
        assert!((busy_prob(p, n, &ch).unwrap() - expect).abs() < 1e-15);
    }

    #[test]
    fn mixture_reduces_to_homogeneous() {
        let table = ChannelModel::ideal().detection_table(9).unwrap();
        let a = busy_prob_mixture(&[(4, 0.1), (6, 0.1)], &table, Coefficient::Others);
        let b = busy_prob_mixture(&[(10, 0.1)], &table, Coefficient::Others);
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn wifi_pair_self_consistent() {
        let p = ModelParams {
            q: 1.0,
            n_wifi: 2,
            n_enb: 0,
            n_ue: 0,
            sensing: SensingModel::Ideal,
            ..ModelParams::default()
        };
        let s = solve_fixed_point(&p).unwrap();
        assert!(s.converged);
        assert!((s.p_b - s.p_tx_wifi).abs() < 1e-9);
        assert_eq!(s.p_b, s.p_f);
    }

    #[test]
    fn fig2_converges_on_grid() {
        for q in q_grid(0.05, 1.0, 0.05).unwrap() {
            let s = solve_fixed_point(&ModelParams { q, ..fig2() }).unwrap();
            assert!(s.converged && s.residual < 1e-9);
        }
    }

    #[test]
    fn access_examples() {
        let mut s = solve_fixed_point(&fig2().with_mode(UplinkMode::Sul)).unwrap();
        let a = access_prob_sul(&s).unwrap();
        assert!(a < s.p_tx_cat4);
        s.p_b = 0.0;
        assert_eq!(access_prob_sul(&s).unwrap(), s.p_tx_cat4);
        s.p_b = 1.0;
        assert_eq!(access_prob_sul(&s).unwrap(), 0.0);
        s.converged = false;
        assert!(matches!(access_prob_sul(&s), Err(AnalyticError::Unconverged)));
        assert!(access_prob_gul(&fig2().with_mode(UplinkMode::Sul)).is_err());
        assert_eq!(access_prob_gul(&ModelParams { q: 0.0, ..fig2() }).unwrap(), 0.0);
    }

    #[test]
    fn gul_without_ues_equals_enb() {
        let p = ModelParams { n_ue: 0, ..fig2() };
        let g = access_prob_gul(&p).unwrap();
        let s = solve_fixed_point(&p.with_mode(UplinkMode::Sul)).unwrap();
        assert_eq!(g, s.p_tx_cat4);
    }

    #[test]
    fn invalid_params() {
        let p = ModelParams { n_wifi: 0, n_enb: 0, n_ue: 0, ..fig2() };
        assert!(solve_fixed_point(&p).is_err());
        let p = ModelParams { w0: 1, ..fig2() };
        assert!(solve_fixed_point(&p).is_err());
    }

    #[test]
    fn non_convergence_carries_last_iterate() {
        let opts = SolverOptions { max_iterations: 2, ..SolverOptions::default() };
        match solve_fixed_point_with(&fig2(), &opts) {
            Err(AnalyticError::NotConverged(s)) => {
                assert_eq!(s.iterations, 2);
                assert!(!s.converged && s.residual > 0.0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn sweep_examples() {
        let rows = sweep(&fig2(), &[0.0]).unwrap();
        assert_eq!(rows[0].access_sul, 0.0);
        assert_eq!(rows[0].access_gul, 0.0);
        let wifi = ModelParams { n_enb: 0, n_ue: 0, n_wifi: 3, ..fig2() };
        let rows = sweep(&wifi, &[1.0]).unwrap();
        let s = solve_fixed_point(&wifi).unwrap();
        assert_eq!(rows[0].p_tx_wifi, s.p_tx_wifi);
        assert_eq!(rows[0].p_b, s.p_b);
        assert!(sweep(&fig2(), &[]).is_err());
        assert!(sweep(&fig2(), &[0.5, 0.5]).is_err());
        let rows = sweep(&fig2(), &q_grid(0.05, 1.0, 0.05).unwrap()).unwrap();
        for w in rows.windows(2) {
            assert!(w[1].p_b >= w[0].p_b - 1e-9);
        }
    }

    #[test]
    fn q_grid_inclusive() {
        let g = q_grid(0.05, 1.0, 0.05).unwrap();
        assert_eq!(g.len(), 20);
        assert_eq!(g[19], 1.0);
        assert_eq!(g[0], 0.05);
        assert!(q_grid(0.0, 1.0, 0.0).is_err());
    }
}
