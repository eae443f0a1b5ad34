//! FTP Model 3 file arrivals.

use rand::Rng;
use rand_distr::{Distribution, Exp};

/// Poisson arrival times in seconds on `[0, horizon_s)`.
pub fn ftp3_arrivals<R: Rng>(rng: &mut R, lambda: f64, horizon_s: f64) -> Vec<f64> {
    if !(lambda > 0.0) || !(horizon_s > 0.0) {
        return Vec::new();
    }
    let exp = Exp::new(lambda).expect("positive rate");
    let mut t = 0.0;
    let mut out = Vec::new();
    loop {
        t += exp.sample(rng);
        if t >= horizon_s {
            return out;
        }
        out.push(t);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::rng::stream;

    #[test]
    fn zero_rate_is_empty() {
        assert!(ftp3_arrivals(&mut stream(1, 1), 0.0, 100.0).is_empty());
    }

    #[test]
    fn count_within_three_sigma() {
        let a = ftp3_arrivals(&mut stream(3, 1), 10.0, 1000.0);
        assert!((a.len() as f64 - 10_000.0).abs() < 300.0, "{}", a.len());
        assert!(a.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn interarrival_mean() {
        let a = ftp3_arrivals(&mut stream(5, 1), 2.0, 60_000.0);
        assert!(a.len() > 100_000);
        let n = 100_000;
        let mean = a[n - 1] / n as f64;
        assert!((mean - 0.5).abs() < 0.01, "{mean}");
    }
}
