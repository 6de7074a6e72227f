//! Per-instance brackets on the sum capacity.
//!
//! The lower end is the ergodic interference alignment sum rate
//! `sum_i s[i][i]`. The upper end combines single-user capacities
//! `log2(1 + SNR_i)` with two-user bounds `log2(1 + SNR_i + INR_ji)`, valid
//! whenever receiver `i` hears transmitter `j` at least as well as receiver
//! `j` does (condition B3). Pair bounds are only summed over a matching, so
//! the total stays a valid bound.

use serde::{Deserialize, Serialize};

use crate::bottleneck::pair_sum_bound;
use crate::error::{Error, Result};
use crate::network::{ChannelGains, RateMatrix};

fn log2_1p(x: f64) -> f64 {
    x.ln_1p() / std::f64::consts::LN_2
}

/// Achievable sum rate of ergodic interference alignment.
pub fn ia_lower_bound(s: &RateMatrix) -> f64 {
    (0..s.n()).map(|i| s.get(i, i)).sum()
}

/// Sum of point-to-point capacities.
pub fn single_user_upper(gains: &ChannelGains) -> f64 {
    gains.snr.iter().map(|&g| log2_1p(g)).sum()
}

/// A pair constraint used by the bracket: receiver `i` decodes both `i` and `j`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchedPair {
    pub i: usize,
    pub j: usize,
    pub bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CapacityBracket {
    pub lower: f64,
    pub upper: f64,
    pub single_user_upper: f64,
    pub per_user_lower: f64,
    pub per_user_upper: f64,
    pub matched_pairs: Vec<MatchedPair>,
}

/// Greedy maximum-saving matching over B3-valid pairs.
///
/// Candidates are sorted by saving `log2(1+SNR_i) + log2(1+SNR_j) - b_ij`
/// descending, ties broken by `(i, j)`; a candidate is taken when its saving
/// is positive and both users are still free.
pub fn matching_upper_bound(gains: &ChannelGains, s: &RateMatrix) -> Result<CapacityBracket> {
    let n = gains.n();
    if n == 0 {
        return Err(Error::InvalidArgument("empty network".into()));
    }
    if s.n() != n {
        return Err(Error::InvalidArgument("rate matrix and gains disagree on n".into()));
    }
    let single: Vec<f64> = gains.snr.iter().map(|&g| log2_1p(g)).collect();

    let mut candidates = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i == j || s.get(j, j) > s.get(j, i) {
                continue;
            }
            let bound = pair_sum_bound(gains, i, j)?.bound;
            let saving = single[i] + single[j] - bound;
            if saving > 0.0 {
                candidates.push((saving, i, j, bound));
            }
        }
    }
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut used = vec![false; n];
    let mut matched_pairs = Vec::new();
    for (_, i, j, bound) in candidates {
        if !used[i] && !used[j] {
            used[i] = true;
            used[j] = true;
            matched_pairs.push(MatchedPair { i, j, bound });
        }
    }
    let upper = matched_pairs.iter().map(|p| p.bound).sum::<f64>()
        + (0..n).filter(|&k| !used[k]).map(|k| single[k]).sum::<f64>();
    let lower = ia_lower_bound(s);
    Ok(CapacityBracket {
        lower,
        upper,
        single_user_upper: single.iter().sum(),
        per_user_lower: lower / n as f64,
        per_user_upper: upper / n as f64,
        matched_pairs,
    })
}
