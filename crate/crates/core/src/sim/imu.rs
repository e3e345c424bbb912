use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::leveling::{DriftMonitor, ImuSample};

/// One roll reading: truth plus white noise plus the drift bias carried by
/// the monitor.
pub fn simulate_imu<R: Rng + ?Sized>(
    true_tilt: f64,
    t: f64,
    noise_sigma: f64,
    drift: &DriftMonitor,
    rng: &mut R,
) -> ImuSample {
    let noise = if noise_sigma > 0.0 {
        Normal::new(0.0, noise_sigma).expect("sigma is positive").sample(rng)
    } else {
        0.0
    };
    ImuSample {
        t,
        alpha_raw: true_tilt + noise + drift.bias(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::leveling::drift_update;
    use crate::sim::rng::{stream_rng, Stream};

    fn bias_after(rate: f64, shielded: bool, seconds: f64) -> f64 {
        let mut mon = DriftMonitor::new(rate, shielded);
        mon.reset_threshold = f64::MAX;
        for _ in 0..(seconds / 0.01).round() as usize {
            mon = drift_update(mon, 0.01).unwrap();
        }
        let mut rng = stream_rng(0, Stream::Imu);
        simulate_imu(0.0, seconds, 0.0, &mon, &mut rng).alpha_raw
    }

    #[test]
    fn noiseless_reading_is_truth() {
        let mut rng = stream_rng(1, Stream::Imu);
        let s = simulate_imu(3.25, 0.5, 0.0, &DriftMonitor::new(0.0, false), &mut rng);
        assert_eq!(s.alpha_raw, 3.25);
    }

    #[test]
    fn drift_bias_accumulates() {
        assert!((bias_after(0.02, false, 100.0) - 2.0).abs() < 1e-9);
        assert!((bias_after(0.02, true, 100.0) - 0.8).abs() < 1e-9);
    }

    #[test]
    fn noise_has_requested_spread() {
        let mut rng = stream_rng(2, Stream::Imu);
        let mon = DriftMonitor::new(0.0, true);
        let n = 20_000;
        let xs: Vec<f64> = (0..n)
            .map(|i| simulate_imu(0.0, i as f64, 0.3, &mon, &mut rng).alpha_raw)
            .collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!(mean.abs() < 0.01);
        assert!((var.sqrt() - 0.3).abs() < 0.01);
    }
}
