//! Direct transcriptions of the transmit-probability formulas and
//! stage-by-stage renewal evaluations of the chains behind them.

/// WiFi transmit probability, undivided printed form.
pub fn p_tx_wifi_printed(q: f64, w0: f64, m: i32, pb: f64, pf: f64) -> f64 {
    let num = 2.0 * q * (1.0 - pb) * (1.0 - 2.0 * pf);
    let den = 2.0 * (1.0 - pb) * (1.0 - pf) * (1.0 - 2.0 * pf)
        + q * (w0 * pf * (1.0 - (2.0 * pf).powi(m)) + (1.0 + w0 - 2.0 * pb) * (1.0 - 2.0 * pf));
    num / den
}

/// Cat.4 transmit probability as printed (kept for the pole demonstration).
pub fn p_tx_cat4_printed(q: f64, w0: f64, m: i32, pb: f64, pf: f64) -> f64 {
    let qq = 2.0 * (1.0 - pb) * (1.0 - pf) * (1.0 - 2.0 * pf);
    let p = pb + pf - pb * pf;
    let r = 1.0 - pf.powi(m + 1);
    let num = 2.0 * q * (1.0 - pb) * (1.0 - pf) * r;
    let den = qq
        + q * (w0 * p * (1.0 - pf) * (1.0 - (2.0 * pf).powi(m + 1))
            + p * r * (1.0 - 2.0 * pb) * (1.0 - 2.0 * pf)
            + 2.0 * r * (1.0 - pb).powi(2) * (1.0 - pf) * (1.0 - 2.0 * pf));
    num / den
}

/// Cat.4 transmit probability, undivided closed form of the immediate-access
/// chain with CW reset after the last stage.
pub fn p_tx_cat4_closed(q: f64, w0: f64, m: i32, pb: f64, pf: f64) -> f64 {
    let qq = 2.0 * (1.0 - pb) * (1.0 - pf) * (1.0 - 2.0 * pf);
    let p = pb + pf - pb * pf;
    let r = 1.0 - pf.powi(m + 1);
    let num = 2.0 * q * (1.0 - pb) * (1.0 - 2.0 * pf) * (1.0 - p * pf.powi(m + 1));
    let den = qq
        + q * (w0 * p * (1.0 - pf) * (1.0 - (2.0 * pf).powi(m + 1))
            + p * r * (1.0 - 2.0 * pb) * (1.0 - 2.0 * pf)
            + 2.0 * (1.0 - pb).powi(2) * (1.0 - pf) * (1.0 - 2.0 * pf));
    num / den
}

/// WiFi chain by renewal: idle 1/q slots, stage i entered with prob pf^i,
/// window capped at stage m, unlimited retries.
pub fn p_tx_wifi_renewal(q: f64, w0: f64, m: u32, pb: f64, pf: f64) -> f64 {
    let tx = 1.0 / (1.0 - pf);
    let mut backoff = 0.0;
    let mut reach = 1.0;
    let mut i = 0u32;
    while reach > 1e-300 && i < 100_000 {
        let w = w0 * 2f64.powi(i.min(m) as i32);
        backoff += reach * (w - 1.0) / (2.0 * (1.0 - pb));
        reach *= pf;
        i += 1;
    }
    tx / (1.0 / q + tx + backoff)
}

/// Cat.4 chain by renewal: idle 1/q slots, immediate access on an idle
/// arrival slot, otherwise stages 0..=m then drop.
pub fn p_tx_cat4_renewal(q: f64, w0: f64, m: u32, pb: f64, pf: f64) -> f64 {
    let p = pb + pf - pb * pf;
    let mut tx = 1.0 - pb;
    let mut slots = 1.0 / q + (1.0 - pb);
    let mut reach = p;
    for i in 0..=m {
        let w = w0 * 2f64.powi(i as i32);
        tx += reach;
        slots += reach * ((w - 1.0) / (2.0 * (1.0 - pb)) + 1.0);
        reach *= pf;
    }
    tx / slots
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wifi_printed_matches_renewal() {
        for &(q, pb, pf) in &[(1.0, 0.0, 0.0), (0.3, 0.2, 0.1), (0.9, 0.4, 0.35), (0.5, 0.1, 0.7)] {
            let a = p_tx_wifi_printed(q, 16.0, 4, pb, pf);
            let b = p_tx_wifi_renewal(q, 16.0, 4, pb, pf);
            assert!((a - b).abs() < 1e-12, "{q} {pb} {pf}: {a} vs {b}");
        }
    }

    #[test]
    fn cat4_closed_matches_renewal() {
        for &(q, pb, pf) in &[(1.0, 0.0, 0.0), (0.3, 0.2, 0.1), (0.9, 0.4, 0.35), (0.5, 0.1, 0.7)] {
            let a = p_tx_cat4_closed(q, 16.0, 4, pb, pf);
            let b = p_tx_cat4_renewal(q, 16.0, 4, pb, pf);
            assert!((a - b).abs() < 1e-12, "{q} {pb} {pf}: {a} vs {b}");
        }
    }

    #[test]
    fn printed_cat4_has_pole_at_half() {
        let below = p_tx_cat4_printed(1.0, 16.0, 4, 0.2, 0.5 - 1e-7);
        let above = p_tx_cat4_printed(1.0, 16.0, 4, 0.2, 0.5 + 1e-7);
        assert!(below > 1.0 && above < 0.0);
    }
}
