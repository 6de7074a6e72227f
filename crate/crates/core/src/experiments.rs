//! Replicated sweeps over the network size.
//!
//! Replicate `r` at size `n` is the network instance with index
//! `(n << 32) | r` under the base seed, so every per-instance number in a
//! report can be regenerated on its own. Replicates run in parallel and are
//! aggregated in replicate order; results do not depend on the thread count.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bottleneck::{detect_bottlenecks, uv_statistics};
use crate::bounds::{ia_lower_bound, matching_upper_bound};
use crate::error::{Error, Result};
use crate::network::{
    direct_gains, distance, estimate_limit, half_log_rate, instance_gains, LimitEstimate, NetworkConfig, RateMatrix,
};
use crate::rng::{substream, Role};
use crate::stats::{ols_slope, Moments};

/// How the rate vector `r` fed to the `U`/`V` statistics is chosen.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RateRule {
    /// `r_i = s[i][i]`, the interference alignment rates of the instance.
    #[default]
    IaRates,
    /// A rate profile fixed independently of the instance's geometry (the
    /// direct rates of an independent shadow draw), rescaled so that
    /// `sum(r) / n = e_hat + epsilon + margin`.
    Inflated { margin: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Network model; its `n` is ignored.
    pub base: NetworkConfig,
    pub n_grid: Vec<usize>,
    pub replicates: usize,
    pub epsilon: f64,
    pub eta: f64,
    pub e_samples: u64,
    #[serde(default)]
    pub rate_rule: RateRule,
}

impl SweepConfig {
    /// The standard dense network with epsilon = 0.1, eta = 0.5 and 10^6
    /// samples for the limit estimate.
    pub fn standard(n_grid: Vec<usize>, replicates: usize, seed: u64) -> Self {
        SweepConfig {
            base: NetworkConfig::standard_dense(1, seed),
            n_grid,
            replicates,
            epsilon: 0.1,
            eta: 0.5,
            e_samples: 1_000_000,
            rate_rule: RateRule::IaRates,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.base.with_n(1).validate().map_err(|e| e.within("base"))?;
        if self.n_grid.is_empty() {
            return Err(Error::config("n_grid", "must not be empty"));
        }
        if self.n_grid[0] < 2 {
            return Err(Error::config("n_grid", "every n must be at least 2"));
        }
        if self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config("n_grid", "must be strictly increasing"));
        }
        if self.n_grid.iter().any(|&n| n as u64 > u32::MAX as u64) {
            return Err(Error::config("n_grid", "n too large"));
        }
        if self.replicates == 0 {
            return Err(Error::config("replicates", "need at least one replicate"));
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::config("epsilon", "must be positive"));
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(Error::config("eta", "must lie in (0, 1)"));
        }
        if self.e_samples < 2 {
            return Err(Error::config("e_samples", "need at least two samples"));
        }
        if let RateRule::Inflated { margin } = self.rate_rule {
            if !margin.is_finite() {
                return Err(Error::config("rate_rule.margin", "must be finite"));
            }
        }
        Ok(())
    }
}

/// Relative rounding slack when counting `lower > upper`; both sides are
/// sums of up to `n` logarithms and tie exactly on symmetric instances.
const BRACKET_SLACK: f64 = 1e-12;

pub fn instance_index(n: usize, replicate: usize) -> u64 {
    ((n as u64) << 32) | replicate as u64
}

/// Everything measured on one network instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub n: usize,
    pub replicate: usize,
    pub lower: f64,
    /// Matching upper bound; `None` when the sweep skipped the bracket.
    pub upper: Option<f64>,
    pub per_user_lower: f64,
    pub per_user_upper: Option<f64>,
    pub max_direct_rate: f64,
    pub tail_exceeded: bool,
    pub bottleneck_count: usize,
    pub beta_hat: f64,
    pub u: f64,
    pub v: f64,
    pub u_le_v: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub n: usize,
    pub replicates: usize,
    pub mean_per_user_lower: f64,
    pub mean_per_user_upper: f64,
    /// Fraction of instances with `|lower / n - e_hat| > epsilon`.
    pub deviation_prob: f64,
    /// Fraction of instances with `max_i S_ii > n^(eta/2)`.
    pub tail_prob: f64,
    pub beta_hat_mean: f64,
    pub beta_hat_std_err: f64,
    /// Sample variance of the bottleneck count across replicates.
    pub count_var: f64,
    /// Fraction of instances with `U <= V` under the sweep's rate rule.
    pub uv_le_prob: f64,
    pub bracket_violations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub e_hat: f64,
    pub e_std_err: f64,
    pub e_samples: u64,
    pub seed: u64,
    pub epsilon: f64,
    pub eta: f64,
    pub replicates: usize,
    pub n_grid: Vec<usize>,
    pub rate_rule: RateRule,
    pub single_replicate: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub metadata: ReportMetadata,
    pub rows: Vec<SummaryRow>,
    pub instances: Vec<InstanceRecord>,
}

impl ExperimentReport {
    /// One row per grid point.
    pub fn write_summary_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// One row per `(n, replicate)`.
    pub fn write_instances_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.instances {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailRow {
    pub n: usize,
    pub replicates: usize,
    pub threshold: f64,
    pub exceed_prob: f64,
    pub n_times_prob: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetaRow {
    pub n: usize,
    pub beta_hat: f64,
    pub std_err: f64,
    /// `beta_hat - 3 std_err`.
    pub lower_band: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceScaling {
    /// `(n, sample variance of the bottleneck count)`.
    pub points: Vec<(usize, f64)>,
    /// Least-squares slope of `ln var` on `ln n`; `None` when fewer than two
    /// grid points have nonzero variance.
    pub slope: Option<f64>,
    pub fit_skipped: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UvRow {
    pub n: usize,
    pub replicates: usize,
    pub prob_u_le_v: f64,
    pub mean_u: f64,
    pub mean_v: f64,
}

/// A validated sweep together with its limit estimate, computed once and
/// shared by every replicate.
#[derive(Clone, Debug)]
pub struct Sweep {
    cfg: SweepConfig,
    limit: LimitEstimate,
}

impl Sweep {
    pub fn new(cfg: SweepConfig) -> Result<Self> {
        cfg.validate()?;
        let limit = estimate_limit(&cfg.base, cfg.e_samples)?;
        Ok(Sweep { cfg, limit })
    }

    /// Reuse an existing limit estimate for the same base model.
    pub fn with_limit(cfg: SweepConfig, limit: LimitEstimate) -> Result<Self> {
        cfg.validate()?;
        Ok(Sweep { cfg, limit })
    }

    pub fn config(&self) -> &SweepConfig {
        &self.cfg
    }

    pub fn limit(&self) -> LimitEstimate {
        self.limit
    }

    fn tail_threshold(&self, n: usize) -> f64 {
        (n as f64).powf(self.cfg.eta / 2.0)
    }

    fn rates_for(&self, rule: RateRule, s: &RateMatrix, n: usize, instance: u64) -> Result<Vec<f64>> {
        match rule {
            RateRule::IaRates => Ok(s.diagonal()),
            RateRule::Inflated { margin } => {
                let target = self.limit.e_hat + self.cfg.epsilon + margin;
                if !(target >= 0.0) {
                    return Err(Error::InvalidArgument(format!(
                        "inflated target rate {target} is negative"
                    )));
                }
                let profile = shadow_profile(&self.cfg.base, n, instance)?;
                let total: f64 = profile.iter().sum();
                Ok(if total > 0.0 {
                    let scale = target * n as f64 / total;
                    profile.iter().map(|p| p * scale).collect()
                } else {
                    vec![target; n]
                })
            }
        }
    }

    /// Measure replicate `replicate` at size `n`. The matching bound is only
    /// computed when `bracket` is set.
    pub fn instance(&self, n: usize, replicate: usize, bracket: bool, rule: RateRule) -> Result<InstanceRecord> {
        let idx = instance_index(n, replicate);
        let (_, gains) = instance_gains(&self.cfg.base, n, idx)?;
        let s = RateMatrix::from_gains(&gains);
        let lower = ia_lower_bound(&s);
        let upper = if bracket {
            Some(matching_upper_bound(&gains, &s)?.upper)
        } else {
            None
        };
        let max_direct_rate = s.diagonal().into_iter().fold(f64::NEG_INFINITY, f64::max);
        let set = detect_bottlenecks(&s, self.limit.e_hat, self.cfg.epsilon)?;
        let rates = self.rates_for(rule, &s, n, idx)?;
        let uv = uv_statistics(&set, &rates)?;
        Ok(InstanceRecord {
            n,
            replicate,
            lower,
            upper,
            per_user_lower: lower / n as f64,
            per_user_upper: upper.map(|u| u / n as f64),
            max_direct_rate,
            tail_exceeded: max_direct_rate > self.tail_threshold(n),
            bottleneck_count: set.count(),
            beta_hat: uv.beta_hat,
            u: uv.u,
            v: uv.v,
            u_le_v: uv.u_le_v(),
        })
    }

    /// All replicates at size `n`, in replicate order.
    pub fn records(&self, n: usize, bracket: bool, rule: RateRule) -> Result<Vec<InstanceRecord>> {
        (0..self.cfg.replicates)
            .into_par_iter()
            .map(|r| self.instance(n, r, bracket, rule))
            .collect()
    }

    fn summarize(&self, n: usize, recs: &[InstanceRecord]) -> SummaryRow {
        let m = recs.len() as f64;
        let frac = |f: &dyn Fn(&InstanceRecord) -> bool| recs.iter().filter(|r| f(r)).count() as f64 / m;
        let betas: Moments = recs.iter().map(|r| r.beta_hat).collect();
        let counts: Moments = recs.iter().map(|r| r.bottleneck_count as f64).collect();
        let uppers: Moments = recs.iter().filter_map(|r| r.per_user_upper).collect();
        let e_hat = self.limit.e_hat;
        let eps = self.cfg.epsilon;
        SummaryRow {
            n,
            replicates: recs.len(),
            mean_per_user_lower: recs.iter().map(|r| r.per_user_lower).sum::<f64>() / m,
            mean_per_user_upper: uppers.mean,
            deviation_prob: frac(&|r| (r.per_user_lower - e_hat).abs() > eps),
            tail_prob: frac(&|r| r.tail_exceeded),
            beta_hat_mean: betas.mean,
            beta_hat_std_err: betas.std_err(),
            count_var: counts.variance(),
            uv_le_prob: frac(&|r| r.u_le_v),
            bracket_violations: recs
                .iter()
                .filter(|r| r.upper.is_some_and(|u| r.lower > u + BRACKET_SLACK * u.abs().max(1.0)))
                .count(),
        }
    }

    /// Full sweep: bracket, deviation, tail, bottleneck and `U`/`V` statistics
    /// for every grid point.
    pub fn convergence(&self) -> Result<ExperimentReport> {
        let mut rows = Vec::with_capacity(self.cfg.n_grid.len());
        let mut instances = Vec::new();
        for &n in &self.cfg.n_grid {
            let recs = self.records(n, true, self.cfg.rate_rule)?;
            rows.push(self.summarize(n, &recs));
            instances.extend(recs);
        }
        Ok(ExperimentReport {
            metadata: ReportMetadata {
                e_hat: self.limit.e_hat,
                e_std_err: self.limit.std_err,
                e_samples: self.limit.samples,
                seed: self.cfg.base.seed,
                epsilon: self.cfg.epsilon,
                eta: self.cfg.eta,
                replicates: self.cfg.replicates,
                n_grid: self.cfg.n_grid.clone(),
                rate_rule: self.cfg.rate_rule,
                single_replicate: self.cfg.replicates == 1,
            },
            rows,
            instances,
        })
    }

    /// `P(max_i S_ii > n^(eta/2))` per grid point, from direct links only.
    pub fn tail(&self) -> Result<Vec<TailRow>> {
        self.cfg
            .n_grid
            .iter()
            .map(|&n| {
                let threshold = self.tail_threshold(n);
                let hits: Vec<Result<bool>> = (0..self.cfg.replicates)
                    .into_par_iter()
                    .map(|r| {
                        let snr = direct_gains(&self.cfg.base, n, instance_index(n, r))?;
                        Ok(snr.iter().any(|&g| half_log_rate(g) > threshold))
                    })
                    .collect();
                let mut count = 0usize;
                for h in hits {
                    count += h? as usize;
                }
                let p = count as f64 / self.cfg.replicates as f64;
                Ok(TailRow {
                    n,
                    replicates: self.cfg.replicates,
                    threshold,
                    exceed_prob: p,
                    n_times_prob: n as f64 * p,
                })
            })
            .collect()
    }

    pub fn beta(&self) -> Result<Vec<BetaRow>> {
        self.cfg
            .n_grid
            .iter()
            .map(|&n| {
                let recs = self.records(n, false, RateRule::IaRates)?;
                let m: Moments = recs.iter().map(|r| r.beta_hat).collect();
                Ok(BetaRow {
                    n,
                    beta_hat: m.mean,
                    std_err: m.std_err(),
                    lower_band: m.mean - 3.0 * m.std_err(),
                })
            })
            .collect()
    }

    pub fn variance_scaling(&self) -> Result<VarianceScaling> {
        if self.cfg.n_grid.len() < 3 {
            return Err(Error::config(
                "n_grid",
                "variance scaling needs at least three grid points",
            ));
        }
        if self.cfg.replicates < 50 {
            return Err(Error::config(
                "replicates",
                "variance scaling needs at least 50 replicates",
            ));
        }
        let mut points = Vec::with_capacity(self.cfg.n_grid.len());
        for &n in &self.cfg.n_grid {
            let recs = self.records(n, false, RateRule::IaRates)?;
            let m: Moments = recs.iter().map(|r| r.bottleneck_count as f64).collect();
            points.push((n, m.variance()));
        }
        let logs: Vec<(f64, f64)> = points
            .iter()
            .filter(|(_, v)| *v > 0.0)
            .map(|&(n, v)| ((n as f64).ln(), v.ln()))
            .collect();
        let slope = ols_slope(&logs);
        Ok(VarianceScaling {
            points,
            slope,
            fit_skipped: slope.is_none(),
        })
    }

    pub fn uv_exceedance(&self, rule: RateRule) -> Result<Vec<UvRow>> {
        self.cfg
            .n_grid
            .iter()
            .map(|&n| {
                let recs = self.records(n, false, rule)?;
                let m = recs.len() as f64;
                Ok(UvRow {
                    n,
                    replicates: recs.len(),
                    prob_u_le_v: recs.iter().filter(|r| r.u_le_v).count() as f64 / m,
                    mean_u: recs.iter().map(|r| r.u).sum::<f64>() / m,
                    mean_v: recs.iter().map(|r| r.v).sum::<f64>() / m,
                })
            })
            .collect()
    }
}

/// Direct rates of an independent draw of `n` pairs, used as a rate profile
/// that does not depend on the analysed instance.
fn shadow_profile(config: &NetworkConfig, n: usize, instance: u64) -> Result<Vec<f64>> {
    let mut rng = substream(config.seed, instance, Role::RateProfile);
    let tx = config.tx_placement.sample_many(n, &mut rng)?;
    let rx = config.rx_placement.sample_many(n, &mut rng)?;
    tx.iter()
        .zip(&rx)
        .map(|(t, r)| {
            let g = config
                .attenuation
                .try_gain(distance(t, r))
                .ok_or(Error::CoincidentNodes { tx: 0, rx: 0 })?;
            let s = half_log_rate(g * config.fading.draw(&mut rng));
            if s.is_finite() {
                Ok(s)
            } else {
                Err(Error::NonFinite {
                    count: 1,
                    samples: n as u64,
                })
            }
        })
        .collect()
}

pub fn convergence_experiment(cfg: SweepConfig) -> Result<ExperimentReport> {
    Sweep::new(cfg)?.convergence()
}

pub fn tail_experiment(cfg: SweepConfig) -> Result<Vec<TailRow>> {
    Sweep::new(cfg)?.tail()
}

pub fn beta_experiment(cfg: SweepConfig) -> Result<Vec<BetaRow>> {
    Sweep::new(cfg)?.beta()
}

pub fn variance_scaling_experiment(cfg: SweepConfig) -> Result<VarianceScaling> {
    Sweep::new(cfg)?.variance_scaling()
}

pub fn uv_exceedance_experiment(cfg: SweepConfig, rule: RateRule) -> Result<Vec<UvRow>> {
    Sweep::new(cfg)?.uv_exceedance(rule)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::PlacementSpec;

    fn point_mass(gap: f64) -> SweepConfig {
        let mut cfg = SweepConfig::standard(vec![4, 8, 16], 3, 11);
        cfg.base.tx_placement = PlacementSpec::Point { at: vec![0.0, 0.0] };
        cfg.base.rx_placement = PlacementSpec::Point { at: vec![0.0, gap] };
        cfg.e_samples = 100;
        cfg
    }

    #[test]
    fn point_mass_sweep_is_exact() {
        let report = convergence_experiment(point_mass(0.5)).unwrap();
        let s = 0.5 * 9f64.log2();
        assert!((report.metadata.e_hat - s).abs() < 1e-12);
        for row in &report.rows {
            assert_eq!(row.deviation_prob, 0.0);
            assert!((row.mean_per_user_lower - s).abs() < 1e-12);
            assert_eq!(row.bracket_violations, 0);
            // Every entry equals E, so every ordered pair passes all three conditions.
            assert_eq!(row.beta_hat_mean, 1.0);
            assert_eq!(row.count_var, 0.0);
        }
        assert!(!report.metadata.single_replicate);
    }

    #[test]
    fn single_replicate_is_flagged() {
        let mut cfg = point_mass(0.5);
        cfg.replicates = 1;
        let report = convergence_experiment(cfg).unwrap();
        assert!(report.metadata.single_replicate);
        assert_eq!(report.rows.len(), 3);
        assert_eq!(report.instances.len(), 3);
    }

    #[test]
    fn deterministic_counts_skip_the_fit() {
        let mut cfg = point_mass(0.5);
        cfg.replicates = 50;
        let v = variance_scaling_experiment(cfg).unwrap();
        assert!(v.points.iter().all(|&(_, var)| var == 0.0));
        assert!(v.fit_skipped);
        assert_eq!(v.slope, None);
    }

    #[test]
    fn variance_scaling_preconditions() {
        let mut cfg = point_mass(0.5);
        cfg.replicates = 49;
        let err = variance_scaling_experiment(cfg).unwrap_err();
        assert!(err.to_string().contains("replicates"), "{err}");
        let mut cfg = point_mass(0.5);
        cfg.replicates = 50;
        cfg.n_grid = vec![4, 8];
        let err = variance_scaling_experiment(cfg).unwrap_err();
        assert!(err.to_string().contains("n_grid"), "{err}");
    }

    #[test]
    fn capped_rates_never_exceed_the_tail_threshold() {
        // rho0 = 0.5 caps every gain at 4, so S_ii <= 1.585 < 8^(1/4).
        let mut cfg = SweepConfig::standard(vec![8, 16, 64], 40, 5);
        cfg.base.attenuation.rho0 = 0.5;
        cfg.e_samples = 1000;
        for row in tail_experiment(cfg).unwrap() {
            assert_eq!(row.exceed_prob, 0.0);
            assert_eq!(row.n_times_prob, 0.0);
        }
    }

    #[test]
    fn tail_threshold_follows_eta() {
        let mut cfg = point_mass(0.5);
        cfg.eta = 0.5;
        let rows = tail_experiment(cfg).unwrap();
        assert!((rows[2].threshold - 2.0).abs() < 1e-12);
        // S = 1.58 exceeds 4^(1/4) = 1.41 but not 8^(1/4) = 1.68.
        assert_eq!(rows[0].exceed_prob, 1.0);
        assert_eq!(rows[1].exceed_prob, 0.0);
    }

    #[test]
    fn uv_with_inflated_point_mass_rates() {
        let cfg = point_mass(0.5);
        let margin = 0.2;
        let sweep = Sweep::new(cfg).unwrap();
        let e = sweep.limit().e_hat;
        for row in sweep.uv_exceedance(RateRule::Inflated { margin }).unwrap() {
            // Every link is a bottleneck and every rate equals the target.
            let r = e + 0.1 + margin;
            assert!((row.mean_u - 2.0 * r).abs() < 1e-12);
            assert!((row.mean_v - (2.0 * e + 0.1)).abs() < 1e-12);
            assert_eq!(row.prob_u_le_v, 0.0);
        }
    }

    #[test]
    fn validation_names_fields() {
        let cases: Vec<(Box<dyn Fn(&mut SweepConfig)>, &str)> = vec![
            (Box::new(|c| c.n_grid = vec![]), "n_grid"),
            (Box::new(|c| c.n_grid = vec![8, 4]), "n_grid"),
            (Box::new(|c| c.n_grid = vec![1, 4]), "n_grid"),
            (Box::new(|c| c.replicates = 0), "replicates"),
            (Box::new(|c| c.epsilon = 0.0), "epsilon"),
            (Box::new(|c| c.eta = 1.0), "eta"),
            (Box::new(|c| c.e_samples = 1), "e_samples"),
            (
                Box::new(|c| c.rate_rule = RateRule::Inflated { margin: f64::NAN }),
                "rate_rule.margin",
            ),
            (Box::new(|c| c.base.attenuation.alpha = -1.0), "base.attenuation.alpha"),
        ];
        for (edit, path) in cases {
            let mut cfg = point_mass(0.5);
            edit(&mut cfg);
            let err = cfg.validate().unwrap_err();
            assert!(err.is_config());
            assert!(err.to_string().contains(path), "{err} should name {path}");
        }
    }

    #[test]
    fn report_round_trips_through_json() {
        let mut cfg = SweepConfig::standard(vec![5, 10], 4, 3);
        cfg.e_samples = 2000;
        let report = convergence_experiment(cfg).unwrap();
        let text = serde_json::to_string(&report).unwrap();
        let back: ExperimentReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back, report);
    }

    #[test]
    fn summary_csv_has_one_row_per_grid_point() {
        let report = convergence_experiment(point_mass(0.5)).unwrap();
        let mut buf = Vec::new();
        report.write_summary_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 3);
        assert!(text.starts_with("n,replicates,"));
    }
}
