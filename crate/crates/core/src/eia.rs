//! Symbol-level model of ergodic interference alignment.
//!
//! Every slot draws a fresh matrix of link phases from a grid of `q` levels.
//! A slot whose phase matrix is the *complement* of a waiting slot's matrix
//! (same diagonal, every off-diagonal phase rotated by pi) re-sends that
//! slot's symbols. Adding the two received samples cancels every cross term
//! and doubles the desired one, giving each receiver an interference-free
//! channel at twice the SNR over two slots, i.e. `1/2 log2(1 + 2 SNR_j)` bits
//! per slot.

use std::collections::{HashMap, VecDeque};
use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::io::Write;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{ChannelGains, RateMatrix};
use crate::rng::{substream, Role};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EiaConfig {
    pub users: usize,
    pub phase_levels: usize,
    pub slots: usize,
    pub gains: ChannelGains,
    pub noise_on: bool,
    pub seed: u64,
    /// Keep a per-slot trace in the report.
    #[serde(default)]
    pub trace: bool,
}

impl EiaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.users == 0 {
            return Err(Error::config("users", "need at least one user"));
        }
        if self.phase_levels < 2 || !self.phase_levels.is_multiple_of(2) || self.phase_levels > u16::MAX as usize {
            return Err(Error::config(
                "phase_levels",
                "must be an even number of levels between 2 and 65534",
            ));
        }
        if self.slots == 0 {
            return Err(Error::config("slots", "need at least one slot"));
        }
        if self.gains.n() != self.users {
            return Err(Error::config(
                "gains",
                format!("gains describe {} users, expected {}", self.gains.n(), self.users),
            ));
        }
        Ok(())
    }
}

/// `K x K` phase indices; entry `(i, j)` is the phase `2 pi k / q` from
/// transmitter `i` to receiver `j`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PhaseMatrix {
    levels: usize,
    users: usize,
    idx: Vec<u16>,
}

impl PhaseMatrix {
    pub fn from_indices(levels: usize, users: usize, idx: Vec<u16>) -> Result<Self> {
        if levels < 2 || !levels.is_multiple_of(2) || levels > u16::MAX as usize {
            return Err(Error::InvalidArgument(format!(
                "phase levels must be even, got {levels}"
            )));
        }
        if idx.len() != users * users || idx.iter().any(|&k| k as usize >= levels) {
            return Err(Error::InvalidArgument("phase indices out of shape or range".into()));
        }
        Ok(PhaseMatrix { levels, users, idx })
    }

    pub fn get(&self, tx: usize, rx: usize) -> u16 {
        self.idx[tx * self.users + rx]
    }

    pub fn indices(&self) -> &[u16] {
        &self.idx
    }

    pub fn complement(&self) -> PhaseMatrix {
        let mut idx = self.idx.clone();
        complement_into(self.levels, self.users, &self.idx, &mut idx);
        PhaseMatrix {
            levels: self.levels,
            users: self.users,
            idx,
        }
    }
}

fn complement_into(levels: usize, users: usize, src: &[u16], dst: &mut [u16]) {
    let half = (levels / 2) as u16;
    let q = levels as u16;
    for i in 0..users {
        for j in 0..users {
            let k = src[i * users + j];
            dst[i * users + j] = if i == j { k } else { (k + half) % q };
        }
    }
}

/// Draw an IID uniform phase matrix on a `q`-level grid.
pub fn draw_phase_matrix<R: Rng + ?Sized>(levels: usize, users: usize, rng: &mut R) -> Result<PhaseMatrix> {
    if users == 0 {
        return Err(Error::InvalidArgument("need at least one user".into()));
    }
    let idx = (0..users * users).map(|_| rng.random_range(0..levels as u16)).collect();
    PhaseMatrix::from_indices(levels, users, idx)
}

pub fn complement(m: &PhaseMatrix) -> PhaseMatrix {
    m.complement()
}

fn matrix_hash(idx: &[u16]) -> u64 {
    // FNV-1a
    idx.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &k| {
        let h = (h ^ (k & 0xff) as u64).wrapping_mul(0x0000_0100_0000_01b3);
        (h ^ (k >> 8) as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlotTrace {
    pub slot: usize,
    pub matrix_hash: String,
    pub matched_with: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EiaReport {
    pub users: usize,
    pub slots: usize,
    pub matched_pairs: usize,
    /// Fraction of slots that ended up in a pair.
    pub matched_fraction: f64,
    /// Mean number of slots from a phase matrix to the next arrival of its
    /// complement, over slots whose complement arrived before the end.
    pub mean_delay: Option<f64>,
    pub delay_samples: usize,
    /// Mean slot distance between the two members of a formed pair (FIFO
    /// pairing).
    pub mean_pairing_lag: Option<f64>,
    /// Largest magnitude of the combined cross terms over all pairs and receivers.
    pub residual_interference: f64,
    /// Largest combined cross-term magnitude relative to the combined desired
    /// signal.
    pub residual_relative: f64,
    /// Largest deviation of `|combined| / |x_j|` from `2 sqrt(SNR_j)`, noise excluded.
    pub amplitude_error: f64,
    pub effective_snr: Vec<f64>,
    pub effective_rate_per_user: Vec<f64>,
    /// Set when no pair formed; rates are then meaningless.
    pub no_matches: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<SlotTrace>>,
}

impl EiaReport {
    /// CSV of the per-slot trace, if one was recorded.
    pub fn write_trace_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["slot", "matrix_hash", "matched_with"])?;
        for t in self.trace.iter().flatten() {
            w.write_record([
                t.slot.to_string(),
                t.matrix_hash.clone(),
                t.matched_with.map(|s| s.to_string()).unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re * FRAC_1_SQRT_2, im * FRAC_1_SQRT_2)
}

struct Waiting {
    slot: usize,
    symbols: Vec<Complex64>,
    clean: Vec<Complex64>,
    noise: Vec<Complex64>,
}

/// Simulate `slots` channel uses with complement pairing.
pub fn run_pairing(config: &EiaConfig) -> Result<EiaReport> {
    config.validate()?;
    let k = config.users;
    let q = config.phase_levels;
    let kk = k * k;
    let phasor: Vec<Complex64> = (0..q)
        .map(|l| Complex64::from_polar(1.0, 2.0 * PI * l as f64 / q as f64))
        .collect();
    let amp: Vec<f64> = (0..kk).map(|e| config.gains.link(e / k, e % k).sqrt()).collect();

    let mut phase_rng = substream(config.seed, 0, Role::Phases);
    let mut symbol_rng = substream(config.seed, 0, Role::Symbols);
    let mut noise_rng = substream(config.seed, 0, Role::Noise);

    let mut history: Vec<u16> = Vec::with_capacity(config.slots * kk);
    let mut buffer: HashMap<Box<[u16]>, VecDeque<Waiting>> = HashMap::new();
    let mut comp = vec![0u16; kk];
    let mut trace = config.trace.then(Vec::new);

    let mut pairs = 0usize;
    let mut lag_sum = 0u64;
    let mut residual_abs = 0.0f64;
    let mut residual_rel = 0.0f64;
    let mut amp_err = 0.0f64;
    let mut signal_energy = vec![0.0; k];
    let mut symbol_energy = vec![0.0; k];
    let mut noise_energy = vec![0.0; k];

    for t in 0..config.slots {
        let m = draw_phase_matrix(q, k, &mut phase_rng)?;
        let idx = m.indices();
        complement_into(q, k, idx, &mut comp);
        history.extend_from_slice(idx);

        let partner = buffer.get_mut(&comp[..]).and_then(VecDeque::pop_front);
        let symbols: Vec<Complex64> = match &partner {
            Some(w) => w.symbols.clone(),
            None => (0..k).map(|_| complex_normal(&mut symbol_rng)).collect(),
        };
        let clean: Vec<Complex64> = (0..k)
            .map(|rx| {
                (0..k)
                    .map(|tx| phasor[idx[tx * k + rx] as usize] * amp[tx * k + rx] * symbols[tx])
                    .sum()
            })
            .collect();
        let noise: Vec<Complex64> = (0..k)
            .map(|_| {
                if config.noise_on {
                    complex_normal(&mut noise_rng)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            })
            .collect();

        if let Some(tr) = trace.as_mut() {
            tr.push(SlotTrace {
                slot: t,
                matrix_hash: format!("{:016x}", matrix_hash(idx)),
                matched_with: partner.as_ref().map(|w| w.slot),
            });
            if let Some(w) = &partner {
                tr[w.slot].matched_with = Some(t);
            }
        }

        match partner {
            Some(w) => {
                pairs += 1;
                lag_sum += (t - w.slot) as u64;
                for j in 0..k {
                    let combined = w.clean[j] + clean[j];
                    let desired = phasor[idx[j * k + j] as usize] * (2.0 * amp[j * k + j]) * symbols[j];
                    let residual = (combined - desired).norm();
                    residual_abs = residual_abs.max(residual);
                    if desired.norm() > 0.0 {
                        residual_rel = residual_rel.max(residual / desired.norm());
                    }
                    let x = symbols[j].norm();
                    if x > 0.0 {
                        amp_err = amp_err.max((combined.norm() / x - 2.0 * amp[j * k + j]).abs());
                    }
                    signal_energy[j] += combined.norm_sqr();
                    symbol_energy[j] += symbols[j].norm_sqr();
                    noise_energy[j] += (w.noise[j] + noise[j]).norm_sqr();
                }
            }
            None => {
                let key: Box<[u16]> = idx.into();
                buffer.entry(key).or_default().push_back(Waiting {
                    slot: t,
                    symbols,
                    clean,
                    noise,
                });
            }
        }
    }

    let (delay_sum, delay_samples) = complement_arrival_delays(&history, q, k);

    let (effective_snr, effective_rate_per_user) = if pairs == 0 {
        (vec![0.0; k], vec![0.0; k])
    } else {
        let snr: Vec<f64> = (0..k)
            .map(|j| {
                let gain = if symbol_energy[j] > 0.0 {
                    signal_energy[j] / symbol_energy[j]
                } else {
                    0.0
                };
                // Noise-free runs use the nominal combined noise power of two
                // unit-variance samples.
                let noise = if config.noise_on {
                    noise_energy[j] / pairs as f64
                } else {
                    2.0
                };
                gain / noise
            })
            .collect();
        let rates = snr.iter().map(|&g| 0.5 * g.ln_1p() / std::f64::consts::LN_2).collect();
        (snr, rates)
    };

    Ok(EiaReport {
        users: k,
        slots: config.slots,
        matched_pairs: pairs,
        matched_fraction: 2.0 * pairs as f64 / config.slots as f64,
        mean_delay: (delay_samples > 0).then(|| delay_sum as f64 / delay_samples as f64),
        delay_samples,
        mean_pairing_lag: (pairs > 0).then(|| lag_sum as f64 / pairs as f64),
        residual_interference: residual_abs,
        residual_relative: residual_rel,
        amplitude_error: amp_err,
        effective_snr,
        effective_rate_per_user,
        no_matches: pairs == 0,
        trace,
    })
}

/// For each slot, the distance to the next slot carrying its complement.
/// Returns the sum of those distances and how many slots had one.
fn complement_arrival_delays(history: &[u16], levels: usize, users: usize) -> (u64, usize) {
    let kk = users * users;
    let mut last_seen: HashMap<Box<[u16]>, usize> = HashMap::new();
    let mut comp = vec![0u16; kk];
    let mut sum = 0u64;
    let mut count = 0usize;
    for (t, idx) in history.chunks_exact(kk).enumerate().rev() {
        complement_into(levels, users, idx, &mut comp);
        if let Some(&next) = last_seen.get(&comp[..]) {
            sum += (next - t) as u64;
            count += 1;
        }
        match last_seen.get_mut(idx) {
            Some(v) => *v = t,
            None => {
                last_seen.insert(idx.into(), t);
            }
        }
    }
    (sum, count)
}

/// Measured effective rate minus the target `s[j][j]`, per user.
pub fn measured_rate_gap(report: &EiaReport, s: &RateMatrix) -> Result<Vec<f64>> {
    if report.no_matches || report.matched_pairs == 0 {
        return Err(Error::InvalidArgument("report has no matched pairs".into()));
    }
    if s.n() != report.users {
        return Err(Error::InvalidArgument(
            "rate matrix size differs from user count".into(),
        ));
    }
    Ok(report
        .effective_rate_per_user
        .iter()
        .enumerate()
        .map(|(j, r)| r - s.get(j, j))
        .collect())
}
