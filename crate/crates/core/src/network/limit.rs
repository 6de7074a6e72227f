//! Monte Carlo estimates over a single random (transmitter, receiver) pair:
//! the limiting per-user rate `E = E[S_ii]` and the separation CDF.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{distance, half_log_rate, NetworkConfig};
use crate::error::{Error, Result};
use crate::rng::{substream, Role};
use crate::stats::{ols_slope, Moments};

/// Samples per work item. Each block owns a substream, so the result does not
/// depend on how blocks are scheduled.
const BLOCK: usize = 8192;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitEstimate {
    pub e_hat: f64,
    pub std_err: f64,
    pub samples: u64,
}

fn blocks(samples: u64) -> impl IndexedParallelIterator<Item = (u64, usize)> {
    let count = samples.div_ceil(BLOCK as u64) as usize;
    (0..count).into_par_iter().map(move |b| {
        let b = b as u64;
        let len = (samples - b * BLOCK as u64).min(BLOCK as u64) as usize;
        (b, len)
    })
}

/// Sample mean and standard error of `1/2 log2(1 + 2 a(|T - R|) |H|^2)`.
pub fn estimate_limit(config: &NetworkConfig, samples: u64) -> Result<LimitEstimate> {
    if samples < 2 {
        return Err(Error::InvalidArgument("need at least two samples to estimate E".into()));
    }
    let per_block: Vec<Result<(Moments, u64)>> = blocks(samples)
        .map(|(b, len)| {
            let mut rng = substream(config.seed, b, Role::LimitSamples);
            let tx = config.tx_placement.sample_many(len, &mut rng)?;
            let rx = config.rx_placement.sample_many(len, &mut rng)?;
            let mut m = Moments::default();
            let mut bad = 0;
            for (t, r) in tx.iter().zip(&rx) {
                let gain = config.attenuation.try_gain(distance(t, r));
                let fade = config.fading.draw(&mut rng);
                match gain.map(|g| half_log_rate(g * fade)) {
                    Some(s) if s.is_finite() => m.push(s),
                    _ => bad += 1,
                }
            }
            Ok((m, bad))
        })
        .collect();
    let mut total = Moments::default();
    let mut bad = 0;
    for block in per_block {
        let (m, b) = block?;
        total.merge(&m);
        bad += b;
    }
    if bad > 0 {
        return Err(Error::NonFinite { count: bad, samples });
    }
    Ok(LimitEstimate {
        e_hat: total.mean,
        std_err: total.std_err(),
        samples,
    })
}

/// Empirical `P(|T - R| <= rho)` at each grid point.
pub fn spatial_separation_probe(config: &NetworkConfig, rho_grid: &[f64], samples: u64) -> Result<Vec<(f64, f64)>> {
    if rho_grid.iter().any(|r| !(*r >= 0.0)) || rho_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(
            "rho grid must be nonnegative and increasing".into(),
        ));
    }
    if samples == 0 {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    let per_block: Vec<Result<Vec<f64>>> = blocks(samples)
        .map(|(b, len)| {
            let mut rng = substream(config.seed, b, Role::SeparationProbe);
            let tx = config.tx_placement.sample_many(len, &mut rng)?;
            let rx = config.rx_placement.sample_many(len, &mut rng)?;
            Ok(tx.iter().zip(&rx).map(|(t, r)| distance(t, r)).collect())
        })
        .collect();
    let mut dists = Vec::with_capacity(samples as usize);
    for block in per_block {
        dists.extend(block?);
    }
    dists.sort_by(f64::total_cmp);
    Ok(rho_grid
        .iter()
        .map(|&rho| {
            let below = dists.partition_point(|&d| d <= rho);
            (rho, below as f64 / samples as f64)
        })
        .collect())
}

/// Log-log slope of the separation CDF over the points with nonzero
/// probability; an estimate of the small-distance exponent.
pub fn separation_exponent(points: &[(f64, f64)]) -> Option<f64> {
    let logs: Vec<(f64, f64)> = points
        .iter()
        .filter(|(r, p)| *r > 0.0 && *p > 0.0)
        .map(|(r, p)| (r.ln(), p.ln()))
        .collect();
    ols_slope(&logs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{AttenuationSpec, PlacementSpec};

    fn point_masses(gap: f64) -> NetworkConfig {
        NetworkConfig {
            n: 1,
            dim: 2,
            tx_placement: PlacementSpec::Point { at: vec![0.0, 0.0] },
            rx_placement: PlacementSpec::Point { at: vec![0.0, gap] },
            attenuation: AttenuationSpec {
                alpha: 2.0,
                c_dec: 1.0,
                rho0: 0.0,
            },
            fading: Default::default(),
            seed: 3,
        }
    }

    /// CDF of the distance between two independent uniform points in the
    /// unit square, valid for `0 <= r <= 1`.
    fn unit_square_distance_cdf(r: f64) -> f64 {
        std::f64::consts::PI * r * r - 8.0 / 3.0 * r.powi(3) + 0.5 * r.powi(4)
    }

    #[test]
    fn deterministic_distance() {
        let est = estimate_limit(&point_masses(0.5), 1000).unwrap();
        assert!((est.e_hat - 0.5 * 9f64.log2()).abs() < 1e-12);
        assert_eq!(est.std_err, 0.0);
    }

    #[test]
    fn same_seed_same_estimate() {
        let cfg = NetworkConfig::standard_dense(1, 99);
        let a = estimate_limit(&cfg, 50_000).unwrap();
        let b = estimate_limit(&cfg, 50_000).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn estimates_consistent_across_sample_sizes() {
        let cfg = NetworkConfig::standard_dense(1, 5);
        let small = estimate_limit(&cfg, 10_000).unwrap();
        let large = estimate_limit(&cfg, 1_000_000).unwrap();
        let combined = (small.std_err.powi(2) + large.std_err.powi(2)).sqrt();
        assert!((small.e_hat - large.e_hat).abs() <= 4.0 * combined);
        // Standard error shrinks like 1/sqrt(samples): ratio ~ 10.
        let ratio = small.std_err / large.std_err;
        assert!((8.0..12.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn singular_samples_are_counted() {
        let cfg = point_masses(0.0);
        match estimate_limit(&cfg, 100) {
            Err(Error::NonFinite { count, samples }) => assert_eq!((count, samples), (100, 100)),
            other => panic!("{other:?}"),
        }
        assert!(estimate_limit(&point_masses(0.5), 1).is_err());
    }

    #[test]
    fn probe_extremes() {
        let cfg = NetworkConfig::standard_dense(1, 8);
        let pts = spatial_separation_probe(&cfg, &[0.0, 1.5], 20_000).unwrap();
        assert_eq!(pts[0].1, 0.0);
        assert_eq!(pts[1].1, 1.0);
        assert!(spatial_separation_probe(&cfg, &[0.2, 0.1], 10).is_err());
    }

    #[test]
    fn probe_matches_disc_area_and_slope_two() {
        let cfg = NetworkConfig::standard_dense(1, 21);
        let grid = [0.01, 0.02, 0.04, 0.08];
        let samples = 2_000_000u64;
        let pts = spatial_separation_probe(&cfg, &grid, samples).unwrap();
        for &(r, p) in &pts {
            let exact = unit_square_distance_cdf(r);
            let band = 3.0 * (exact * (1.0 - exact) / samples as f64).sqrt();
            assert!((p - exact).abs() < band, "r={r}: {p} vs {exact}");
        }
        let slope = separation_exponent(&pts).unwrap();
        assert!((slope - 2.0).abs() < 0.2, "slope {slope}");
    }
}
