use alloc::vec::Vec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::pricing::VmTypeSpec;
use crate::workflow::{critical_path_mi, Workflow};

/// Upper median of the catalog compute powers; scales prediction errors.
pub fn reference_compute_power(catalog: &[VmTypeSpec]) -> f64 {
    let mut cps: Vec<f64> = catalog.iter().map(|s| s.compute_power).collect();
    cps.sort_by(f64::total_cmp);
    cps.get(cps.len() / 2).copied().unwrap_or(1.0)
}

/// Arrival error for a workflow whose critical path takes `t` seconds:
/// Normal with mean `mean_pct * t` and deviation `std_pct * t`.
pub fn arrival_shift<R: Rng>(t: f64, mean_pct: f64, std_pct: f64, rng: &mut R) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    mean_pct * t + std_pct * t * z
}

/// Predicted arrivals: each workflow shifted by [`arrival_shift`] and clamped
/// to be non-negative. Relative deadlines are kept.
pub fn make_predicted_arrivals(
    actual: &[Workflow],
    mean_pct: f64,
    std_pct: f64,
    reference_cp: f64,
    seed: u64,
) -> Vec<Workflow> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    actual
        .iter()
        .map(|wf| {
            let t = critical_path_mi(wf) / reference_cp;
            let shift = arrival_shift(t, mean_pct, std_pct, &mut rng);
            wf.shifted_to(libm::fmax(0.0, wf.arrival() + shift))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pricing::default_catalog;
    use crate::workflow::Task;
    use alloc::vec;

    fn one(arrival: f64, mi: f64) -> Workflow {
        Workflow::new(
            "w",
            vec![Task::new("t", "x", mi, 1.0, 0.0)],
            vec![],
            arrival,
            arrival + 500.0,
        )
        .unwrap()
    }

    #[test]
    fn reference_cp_of_default_catalog() {
        assert_eq!(reference_compute_power(&default_catalog()), 22.4);
    }

    #[test]
    fn zero_error_keeps_arrivals() {
        let wfs = vec![one(10.0, 100.0), one(300.0, 50.0)];
        let p = make_predicted_arrivals(&wfs, 0.0, 0.0, 22.4, 3);
        assert_eq!(p, wfs);
    }

    #[test]
    fn mean_shift_without_noise() {
        // t = 2240 / 22.4 = 100 s
        let p = make_predicted_arrivals(&[one(1000.0, 2240.0)], 0.4, 0.0, 22.4, 9);
        assert!((p[0].arrival() - 1040.0).abs() < 1e-9);
        assert!((p[0].relative_deadline() - 500.0).abs() < 1e-9);
    }

    #[test]
    fn clamped_at_zero() {
        let p = make_predicted_arrivals(&[one(5.0, 2240.0)], -1.0, 0.0, 22.4, 1);
        assert_eq!(p[0].arrival(), 0.0);
    }

    #[test]
    fn shift_variance_matches() {
        let n = 10_000;
        let (t, std) = (100.0, 0.2);
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let xs: Vec<f64> = (0..n)
            .map(|_| arrival_shift(t, 0.0, std, &mut rng))
            .collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
        let sigma2 = (std * t) * (std * t);
        // Sample variance of normals has sd sigma2 * sqrt(2 / (n - 1)).
        let band = 3.0 * sigma2 * libm::sqrt(2.0 / (n - 1) as f64);
        assert!(
            (var - sigma2).abs() < band,
            "var {var} vs {sigma2} ± {band}"
        );
    }
}
