//! Energy-detection statistics.
//!
//! The detector output is normalized so that, with no transmitter on the
//! air, it is chi-square with `2 mu` degrees of freedom. With `n`
//! transmitters of equal received power it becomes non-central chi-square
//! with non-centrality `2 gamma`, `gamma = n * snr_per_tx`.
//!
//! Densities are evaluated in log space; tails use the closed forms
//! (regularized upper incomplete gamma for integer order, and the Poisson
//! mixture series for the generalized Marcum Q function).

use serde::{Deserialize, Serialize};
use std::sync::OnceLock;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DetectionError {
    #[error("domain error: {name} = {value} ({reason})")]
    Domain {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
}

fn domain(name: &'static str, value: f64, reason: &'static str) -> DetectionError {
    DetectionError::Domain { name, value, reason }
}

/// Parameters of one detection event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionParams {
    pub mu: u32,
    pub gamma: f64,
    pub y_thv: f64,
}

impl DetectionParams {
    pub fn new(mu: u32, gamma: f64, y_thv: f64) -> Result<Self, DetectionError> {
        if mu < 1 {
            return Err(domain("mu", mu as f64, "must be >= 1"));
        }
        if !(gamma >= 0.0) || !gamma.is_finite() {
            return Err(domain("gamma", gamma, "must be finite and >= 0"));
        }
        if !(y_thv >= 0.0) {
            return Err(domain("y_thv", y_thv, "must be >= 0"));
        }
        Ok(Self { mu, gamma, y_thv })
    }
}

/// Detector configuration shared by every node: time-bandwidth product and
/// threshold, expressed as a threshold-to-noise ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergyDetector {
    #[serde(default = "default_mu")]
    pub mu: u32,
    #[serde(default = "default_tnr_db")]
    pub tnr_db: f64,
}

fn default_mu() -> u32 {
    1
}

fn default_tnr_db() -> f64 {
    6.0
}

impl Default for EnergyDetector {
    fn default() -> Self {
        Self {
            mu: default_mu(),
            tnr_db: default_tnr_db(),
        }
    }
}

impl EnergyDetector {
    /// Threshold in the normalized energy domain.
    pub fn y_thv(&self) -> f64 {
        threshold_from_tnr_db(self.tnr_db, self.mu)
    }

    /// Probability that `n` simultaneous transmitters are detected.
    pub fn p_detect(&self, n: u32, snr_per_tx: f64) -> Result<f64, DetectionError> {
        if n == 0 {
            return Err(domain("n", 0.0, "no transmitter: use p_false_alarm"));
        }
        let p = DetectionParams::new(self.mu, n as f64 * snr_per_tx, self.y_thv())?;
        tail_busy(p.y_thv, &p)
    }

    /// Probability that an idle channel is declared busy.
    pub fn p_false_alarm(&self) -> Result<f64, DetectionError> {
        tail_idle(self.y_thv(), self.mu)
    }
}

/// Map a threshold-to-noise ratio in dB onto the normalized energy domain.
pub fn threshold_from_tnr_db(tnr_db: f64, mu: u32) -> f64 {
    2.0 * mu as f64 * 10f64.powf(tnr_db / 10.0)
}

const LN_FACT_TABLE: usize = 512;

fn ln_fact_table() -> &'static [f64; LN_FACT_TABLE] {
    static TABLE: OnceLock<[f64; LN_FACT_TABLE]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = [0.0; LN_FACT_TABLE];
        for k in 1..LN_FACT_TABLE {
            t[k] = t[k - 1] + (k as f64).ln();
        }
        t
    })
}

/// ln(n!)
pub(crate) fn ln_factorial(n: u64) -> f64 {
    if (n as usize) < LN_FACT_TABLE {
        return ln_fact_table()[n as usize];
    }
    // Stirling series; at n >= 512 the truncation error is far below 1 ulp.
    let x = n as f64 + 1.0;
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    (x - 0.5) * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI).ln()
        + inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 / 1680.0)))
}

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// ln I_nu(z) for integer order, z >= 0, from the power series.
pub(crate) fn ln_bessel_i(nu: u32, z: f64) -> f64 {
    if z == 0.0 {
        return if nu == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    let lh = (z / 2.0).ln();
    let mut acc = f64::NEG_INFINITY;
    let peak = z / 2.0;
    let mut k: u64 = 0;
    loop {
        let t = (2 * k + nu as u64) as f64 * lh - ln_factorial(k) - ln_factorial(k + nu as u64);
        acc = log_add(acc, t);
        if k as f64 > peak && t - acc < (1e-15f64).ln() - 2.0 {
            break;
        }
        k += 1;
        if k > 1_000_000 {
            break;
        }
    }
    acc
}

/// Density of the detector output on an idle channel.
pub fn pdf_idle(y: f64, mu: u32) -> Result<f64, DetectionError> {
    if mu < 1 {
        return Err(domain("mu", mu as f64, "must be >= 1"));
    }
    if !(y >= 0.0) {
        return Err(domain("y", y, "must be >= 0"));
    }
    if y == 0.0 {
        return Ok(if mu == 1 { 0.5 } else { 0.0 });
    }
    let m = mu as f64;
    let ln = (m - 1.0) * y.ln() - y / 2.0 - m * std::f64::consts::LN_2 - ln_factorial(mu as u64 - 1);
    Ok(ln.exp())
}

/// Density of the detector output with aggregate SNR `p.gamma > 0`.
pub fn pdf_busy(y: f64, p: &DetectionParams) -> Result<f64, DetectionError> {
    if p.mu < 1 {
        return Err(domain("mu", p.mu as f64, "must be >= 1"));
    }
    if !(y >= 0.0) {
        return Err(domain("y", y, "must be >= 0"));
    }
    if !(p.gamma > 0.0) {
        return Err(domain("gamma", p.gamma, "busy branch needs gamma > 0"));
    }
    let g = p.gamma;
    if y == 0.0 {
        return Ok(if p.mu == 1 { 0.5 * (-g).exp() } else { 0.0 });
    }
    let nu = p.mu - 1;
    let ln = -std::f64::consts::LN_2 + 0.5 * nu as f64 * (y.ln() - (2.0 * g).ln()) - (2.0 * g + y) / 2.0
        + ln_bessel_i(nu, (2.0 * g * y).sqrt());
    Ok(ln.exp())
}

/// Q(a, x) for integer a >= 1: e^-x sum_{j<a} x^j / j!.
fn upper_gamma_q_int(a: u32, x: f64) -> f64 {
    if x == 0.0 {
        return 1.0;
    }
    let lx = x.ln();
    let mut acc = f64::NEG_INFINITY;
    for j in 0..a as u64 {
        acc = log_add(acc, -x + j as f64 * lx - ln_factorial(j));
    }
    acc.exp().min(1.0)
}

/// P(Y > t) on an idle channel.
pub fn tail_idle(t: f64, mu: u32) -> Result<f64, DetectionError> {
    if mu < 1 {
        return Err(domain("mu", mu as f64, "must be >= 1"));
    }
    if !(t >= 0.0) {
        return Err(domain("t", t, "must be >= 0"));
    }
    Ok(upper_gamma_q_int(mu, t / 2.0))
}

/// P(Y > t) with aggregate SNR `p.gamma`: generalized Marcum Q
/// Q_mu(sqrt(2 gamma), sqrt(t)).
pub fn tail_busy(t: f64, p: &DetectionParams) -> Result<f64, DetectionError> {
    if p.mu < 1 {
        return Err(domain("mu", p.mu as f64, "must be >= 1"));
    }
    if !(t >= 0.0) {
        return Err(domain("t", t, "must be >= 0"));
    }
    if !(p.gamma > 0.0) || !p.gamma.is_finite() {
        return Err(domain("gamma", p.gamma, "busy branch needs gamma > 0"));
    }
    if t == 0.0 {
        return Ok(1.0);
    }
    let lam = p.gamma;
    let x = t / 2.0;
    let lx = x.ln();
    let llam = lam.ln();
    // Q(mu + k, x) advanced by its upward recursion.
    let mut q = upper_gamma_q_int(p.mu, x);
    let mut ln_w = -lam;
    let mut sum = 0.0;
    let mut k: u64 = 0;
    loop {
        sum += ln_w.exp() * q;
        let a = p.mu as u64 + k;
        q = (q + (-x + a as f64 * lx - ln_factorial(a)).exp()).min(1.0);
        k += 1;
        ln_w += llam - (k as f64).ln();
        if k as f64 > lam {
            // Remaining Poisson mass is bounded by a geometric series.
            let ratio = lam / (k + 1) as f64;
            let rest = ln_w.exp() / (1.0 - ratio);
            if rest <= 1e-15 * sum || rest == 0.0 {
                break;
            }
        }
        if k > 1_000_000 {
            break;
        }
    }
    Ok(sum.clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dp(mu: u32, gamma: f64) -> DetectionParams {
        DetectionParams::new(mu, gamma, 0.0).unwrap()
    }

    #[test]
    fn pdf_idle_examples() {
        assert_eq!(pdf_idle(0.0, 1).unwrap(), 0.5);
        assert!((pdf_idle(2.0, 1).unwrap() - (-1.0f64).exp() / 2.0).abs() < 1e-15);
        assert!(pdf_idle(-1.0, 1).is_err());
        assert!(pdf_idle(1.0, 0).is_err());
    }

    #[test]
    fn pdf_busy_examples() {
        let v = pdf_busy(0.0, &dp(1, 5.0)).unwrap();
        assert!((v - (-5.0f64).exp() / 2.0).abs() < 1e-15);
        assert!((v - 0.003_369_0).abs() < 1e-7);
        let tiny = pdf_busy(1e-12, &dp(3, 1.0)).unwrap();
        assert!(tiny.is_finite() && tiny >= 0.0 && tiny < 1e-20);
        assert!(pdf_busy(-0.1, &dp(1, 1.0)).is_err());
        assert!(pdf_busy(1.0, &DetectionParams { mu: 1, gamma: 0.0, y_thv: 0.0 }).is_err());
    }

    #[test]
    fn pdf_busy_mu1_closed_form() {
        // mu = 1: 0.5 exp(-(2g+y)/2) I0(sqrt(2gy)); I0 checked at a known value.
        let i0_1 = 1.266_065_877_752_008_4_f64;
        let g = 0.25;
        let y = 2.0; // sqrt(2*0.25*2) = 1
        let expect = 0.5 * (-(2.0 * g + y) / 2.0f64).exp() * i0_1;
        assert!((pdf_busy(y, &dp(1, g)).unwrap() - expect).abs() < 1e-15);
    }

    #[test]
    fn bessel_large_argument_no_overflow() {
        // ln I0(z) ~ z - 0.5 ln(2 pi z) for large z.
        let z = 2000.0;
        let approx = z - 0.5 * (2.0 * std::f64::consts::PI * z).ln() + (1.0 + 1.0 / (8.0 * z)).ln();
        assert!((ln_bessel_i(0, z) - approx).abs() < 1e-6);
    }

    #[test]
    fn tail_idle_examples() {
        assert_eq!(tail_idle(0.0, 4).unwrap(), 1.0);
        assert!((tail_idle(2.0, 1).unwrap() - (-1.0f64).exp()).abs() < 1e-15);
        assert!(tail_idle(1e4, 2).unwrap() < 1e-12);
        assert!(tail_idle(-1.0, 2).is_err());
    }

    #[test]
    fn tail_busy_examples() {
        assert_eq!(tail_busy(0.0, &dp(1, 10.0)).unwrap(), 1.0);
        let v = tail_busy(4.0, &dp(1, 1e-12)).unwrap();
        assert!((v - (-2.0f64).exp()).abs() < 1e-9);
        assert!(tail_busy(-1.0, &dp(1, 1.0)).is_err());
        assert!(tail_busy(1.0, &DetectionParams { mu: 1, gamma: 0.0, y_thv: 0.0 }).is_err());
    }

    #[test]
    fn tail_busy_limits_to_idle() {
        for mu in [1, 2, 4, 8] {
            for t in [0.5, 2.0, 8.0, 20.0] {
                let a = tail_busy(t, &dp(mu, 1e-8)).unwrap();
                let b = tail_idle(t, mu).unwrap();
                assert!((a - b).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn ln_factorial_continuity() {
        let direct: f64 = (1..=600u64).map(|k| (k as f64).ln()).sum();
        assert!((ln_factorial(600) - direct).abs() < 1e-9);
        let d511: f64 = (1..=511u64).map(|k| (k as f64).ln()).sum();
        assert!((ln_factorial(511) - d511).abs() < 1e-9);
    }

    #[test]
    fn detector_default_threshold() {
        let d = EnergyDetector::default();
        assert!((d.y_thv() - 2.0 * 10f64.powf(0.6)).abs() < 1e-12);
        let pd = d.p_detect(1, 10.0).unwrap();
        assert!(pd > 0.95 && pd < 0.97);
        assert!(d.p_detect(0, 10.0).is_err());
    }
}
