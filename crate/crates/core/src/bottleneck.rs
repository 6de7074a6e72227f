//! Epsilon-bottleneck links and the statistics built on them.
//!
//! The ordered link `(i, j)`, `i != j`, is an epsilon-bottleneck when
//!
//! * B1: `s[i][i] <= E + eps/2`
//! * B2: `s[j][i] <= E + eps/2`
//! * B3: `s[j][j] <= s[j][i]`
//!
//! B2 bounds the cross link from `j` into receiver `i`, the one that enters
//! the two-user bound `log2(1 + SNR_i + INR_ji)`; together B1 and B2 give
//! `log2(1 + SNR_i + INR_ji) <= 2 E + eps`. All comparisons are non-strict. `E` is supplied by the caller (normally a
//! [`LimitEstimate`](crate::network::LimitEstimate)) and stored alongside the
//! detected links. Indices are zero-based.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{half_log_rate, instance_gains, ChannelGains, NetworkConfig, RateMatrix};

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    Ok(())
}

fn check_link(n: usize, i: usize, j: usize) -> Result<()> {
    if i == j {
        return Err(Error::InvalidArgument(format!("link ({i}, {j}) is not a crosslink")));
    }
    if i >= n || j >= n {
        return Err(Error::InvalidArgument(format!(
            "link ({i}, {j}) out of range for n = {n}"
        )));
    }
    Ok(())
}

#[inline]
fn bottleneck_unchecked(s: &RateMatrix, threshold: f64, i: usize, j: usize) -> bool {
    s.get(i, i) <= threshold && s.get(j, i) <= threshold && s.get(j, j) <= s.get(j, i)
}

/// Whether the crosslink `(i, j)` is an epsilon-bottleneck.
pub fn is_bottleneck(s: &RateMatrix, e_used: f64, epsilon: f64, i: usize, j: usize) -> Result<bool> {
    check_epsilon(epsilon)?;
    check_link(s.n(), i, j)?;
    Ok(bottleneck_unchecked(s, e_used + epsilon / 2.0, i, j))
}

/// The detected bottleneck links of one instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BottleneckSet {
    pub epsilon: f64,
    pub e_used: f64,
    pub n: usize,
    /// Ordered `(i, j)` pairs in row-major scan order.
    pub links: Vec<(usize, usize)>,
}

impl BottleneckSet {
    pub fn count(&self) -> usize {
        self.links.len()
    }

    /// Number of ordered crosslinks, `n (n - 1)`.
    pub fn crosslinks(&self) -> usize {
        self.n * self.n.saturating_sub(1)
    }

    pub fn beta_hat(&self) -> f64 {
        match self.crosslinks() {
            0 => 0.0,
            c => self.count() as f64 / c as f64,
        }
    }

    /// Per-link CSV: `i,j,s_ii,s_ij,s_jj,s_ji`.
    pub fn write_csv<W: Write>(&self, s: &RateMatrix, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["i", "j", "s_ii", "s_ij", "s_jj", "s_ji"])?;
        for &(i, j) in &self.links {
            w.write_record([
                i.to_string(),
                j.to_string(),
                s.get(i, i).to_string(),
                s.get(i, j).to_string(),
                s.get(j, j).to_string(),
                s.get(j, i).to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Scan all `n (n - 1)` ordered crosslinks.
pub fn detect_bottlenecks(s: &RateMatrix, e_used: f64, epsilon: f64) -> Result<BottleneckSet> {
    check_epsilon(epsilon)?;
    if !e_used.is_finite() {
        return Err(Error::InvalidArgument("e_used must be finite".into()));
    }
    let n = s.n();
    let threshold = e_used + epsilon / 2.0;
    let mut links = Vec::new();
    for i in 0..n {
        // B1 depends on i only.
        if s.get(i, i) > threshold {
            continue;
        }
        for j in 0..n {
            if j != i && bottleneck_unchecked(s, threshold, i, j) {
                links.push((i, j));
            }
        }
    }
    Ok(BottleneckSet {
        epsilon,
        e_used,
        n,
        links,
    })
}

/// `U` and `V` for a rate vector `r` on a bottleneck set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UvStats {
    pub u: f64,
    pub v: f64,
    pub count: usize,
    pub beta_hat: f64,
}

impl UvStats {
    /// The event `U <= V`. An empty set gives `U = V = 0`, which counts.
    pub fn u_le_v(&self) -> bool {
        self.u <= self.v
    }
}

/// `U = sum_{B} (r_i + r_j) / (n(n-1))`, `V = beta_hat (2 E + eps)`.
pub fn uv_statistics(set: &BottleneckSet, rates: &[f64]) -> Result<UvStats> {
    if rates.len() != set.n {
        return Err(Error::InvalidArgument(format!(
            "rate vector has {} entries, expected {}",
            rates.len(),
            set.n
        )));
    }
    if rates.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
        return Err(Error::InvalidArgument("rates must be finite and nonnegative".into()));
    }
    let beta_hat = set.beta_hat();
    let u = match set.crosslinks() {
        0 => 0.0,
        c => set.links.iter().map(|&(i, j)| rates[i] + rates[j]).sum::<f64>() / c as f64,
    };
    Ok(UvStats {
        u,
        v: beta_hat * (2.0 * set.e_used + set.epsilon),
        count: set.count(),
        beta_hat,
    })
}

/// Two-user sum-rate bound from decoding both messages at receiver `i`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairBound {
    /// `log2(1 + SNR_i + INR_ji)`.
    pub bound: f64,
    /// Whether B3 holds, i.e. whether `r_i + r_j <= bound` is implied.
    pub b3_valid: bool,
}

/// Pair bound for the crosslink `(i, j)`. Note `INR_ji` is transmitter `j`
/// heard at receiver `i`.
pub fn pair_sum_bound(gains: &ChannelGains, i: usize, j: usize) -> Result<PairBound> {
    check_link(gains.n(), i, j)?;
    let cross_at_i = gains.inr.get(j, i);
    let bound = (gains.snr[i] + cross_at_i).ln_1p() / std::f64::consts::LN_2;
    let b3_valid = half_log_rate(gains.snr[j]) <= half_log_rate(cross_at_i);
    Ok(PairBound { bound, b3_valid })
}

/// JSON summary of one analysed instance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BottleneckSummary {
    pub epsilon: f64,
    pub e_used: f64,
    pub count: usize,
    pub beta_hat: f64,
    pub u: f64,
    pub v: f64,
}

impl BottleneckSummary {
    pub fn new(set: &BottleneckSet, uv: &UvStats) -> Self {
        BottleneckSummary {
            epsilon: set.epsilon,
            e_used: set.e_used,
            count: uv.count,
            beta_hat: uv.beta_hat,
            u: uv.u,
            v: uv.v,
        }
    }
}

/// Monte Carlo covariance of two bottleneck indicators on disjoint index pairs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CovarianceEstimate {
    pub cov: f64,
    /// Standard error of `cov` if the indicators were independent:
    /// `sqrt(p_a (1 - p_a) p_b (1 - p_b) / m)`.
    pub std_err: f64,
    pub p_first: f64,
    pub p_second: f64,
    pub replicates: u64,
}

/// Covariance of `B_first` and `B_second` over `replicates` instances of
/// `config` (replicate `k` uses instance index `k`).
pub fn empirical_cov_disjoint(
    config: &NetworkConfig,
    e_used: f64,
    epsilon: f64,
    replicates: u64,
    first: (usize, usize),
    second: (usize, usize),
) -> Result<CovarianceEstimate> {
    check_epsilon(epsilon)?;
    let n = config.n;
    if n < 4 {
        return Err(Error::InvalidArgument("need n >= 4 for two disjoint links".into()));
    }
    check_link(n, first.0, first.1)?;
    check_link(n, second.0, second.1)?;
    if [first.0, first.1].iter().any(|k| *k == second.0 || *k == second.1) {
        return Err(Error::InvalidArgument(format!(
            "links {first:?} and {second:?} share a node"
        )));
    }
    if replicates < 2 {
        return Err(Error::InvalidArgument("need at least two replicates".into()));
    }
    let threshold = e_used + epsilon / 2.0;
    let draws: Vec<Result<(bool, bool)>> = (0..replicates)
        .into_par_iter()
        .map(|k| {
            let (_, gains) = instance_gains(config, n, k)?;
            let s = RateMatrix::from_gains(&gains);
            Ok((
                bottleneck_unchecked(&s, threshold, first.0, first.1),
                bottleneck_unchecked(&s, threshold, second.0, second.1),
            ))
        })
        .collect();
    let (mut sa, mut sb, mut sab) = (0u64, 0u64, 0u64);
    for d in draws {
        let (a, b) = d?;
        sa += a as u64;
        sb += b as u64;
        sab += (a && b) as u64;
    }
    let m = replicates as f64;
    let (pa, pb) = (sa as f64 / m, sb as f64 / m);
    // Unbiased sample covariance of two indicators.
    let cov = (sab as f64 - m * pa * pb) / (m - 1.0);
    Ok(CovarianceEstimate {
        cov,
        std_err: (pa * (1.0 - pa) * pb * (1.0 - pb) / m).sqrt(),
        p_first: pa,
        p_second: pb,
        replicates,
    })
}
