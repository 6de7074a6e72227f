//! Random IID networks: node placement, path gains and rate variables.

mod attenuation;
mod limit;
mod placement;

use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

pub use attenuation::{AttenuationSpec, DEFAULT_RHO0};
pub use limit::{estimate_limit, separation_exponent, spatial_separation_probe, LimitEstimate};
pub use placement::{PlacementSpec, MAX_REJECTION_ATTEMPTS};

use crate::error::{Error, Result};
use crate::matrix::SquareMatrix;
use crate::rng::{substream, Role};

/// Multiplicative fading applied on top of the distance law.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fading {
    /// Fixed modulus; only the phase is random.
    #[default]
    UnitModulus,
    /// Each gain scaled by `|H|^2`, `H` standard complex Gaussian.
    Rayleigh,
}

impl Fading {
    /// Power factor for one link.
    pub fn draw<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        match self {
            Fading::UnitModulus => 1.0,
            Fading::Rayleigh => {
                let re: f64 = StandardNormal.sample(rng);
                let im: f64 = StandardNormal.sample(rng);
                0.5 * (re * re + im * im)
            }
        }
    }
}

/// Everything needed to draw one random network of `n` user pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub n: usize,
    pub dim: usize,
    pub tx_placement: PlacementSpec,
    pub rx_placement: PlacementSpec,
    #[serde(default)]
    pub attenuation: AttenuationSpec,
    #[serde(default)]
    pub fading: Fading,
    #[serde(default)]
    pub seed: u64,
}

impl NetworkConfig {
    /// Transmitters and receivers uniform on `[0,1]^2`, inverse-square law
    /// with unit coefficient and the default near-field cutoff.
    pub fn standard_dense(n: usize, seed: u64) -> Self {
        NetworkConfig {
            n,
            dim: 2,
            tx_placement: PlacementSpec::uniform_unit_box(2),
            rx_placement: PlacementSpec::uniform_unit_box(2),
            attenuation: AttenuationSpec::default(),
            fading: Fading::UnitModulus,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::config("n", "need at least one user pair"));
        }
        if self.dim == 0 {
            return Err(Error::config("dim", "dimension must be at least 1"));
        }
        self.tx_placement.validate("tx_placement")?;
        self.rx_placement.validate("rx_placement")?;
        for (name, p) in [
            ("tx_placement", &self.tx_placement),
            ("rx_placement", &self.rx_placement),
        ] {
            if p.dim() != self.dim {
                return Err(Error::config(
                    name,
                    format!("placement has dimension {} but dim = {}", p.dim(), self.dim),
                ));
            }
        }
        self.attenuation.validate("attenuation")
    }

    pub fn with_n(&self, n: usize) -> Self {
        NetworkConfig { n, ..self.clone() }
    }
}

/// Sampled node positions for one network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeLayout {
    pub tx: Vec<Vec<f64>>,
    pub rx: Vec<Vec<f64>>,
}

impl NodeLayout {
    pub fn n(&self) -> usize {
        self.tx.len()
    }

    /// Relabel pairs: new pair `k` is old pair `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> NodeLayout {
        NodeLayout {
            tx: perm.iter().map(|&k| self.tx[k].clone()).collect(),
            rx: perm.iter().map(|&k| self.rx[k].clone()).collect(),
        }
    }

    /// CSV with columns `role,i,x0,..,x{d-1}`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let dim = self.tx.first().map_or(0, Vec::len);
        let mut header = vec!["role".to_string(), "i".to_string()];
        header.extend((0..dim).map(|k| format!("x{k}")));
        w.write_record(&header)?;
        for (role, pts) in [("tx", &self.tx), ("rx", &self.rx)] {
            for (i, p) in pts.iter().enumerate() {
                let mut rec = vec![role.to_string(), i.to_string()];
                rec.extend(p.iter().map(|x| x.to_string()));
                w.write_record(&rec)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Draw the layout for replicate `instance` of `config`.
pub fn sample_layout(config: &NetworkConfig, instance: u64) -> Result<NodeLayout> {
    layout_with_n(config, config.n, instance)
}

/// As [`sample_layout`] with the pair count overridden. Transmitters and
/// receivers use separate substreams, so the first `k` pairs of an instance
/// do not depend on `n`.
pub fn layout_with_n(config: &NetworkConfig, n: usize, instance: u64) -> Result<NodeLayout> {
    let mut tx_rng = substream(config.seed, instance, Role::Transmitters);
    let mut rx_rng = substream(config.seed, instance, Role::Receivers);
    Ok(NodeLayout {
        tx: config.tx_placement.sample_many(n, &mut tx_rng)?,
        rx: config.rx_placement.sample_many(n, &mut rx_rng)?,
    })
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Direct and cross power gains of one network.
///
/// `inr.get(i, j)` is the gain from transmitter `i` at receiver `j`; its
/// diagonal is unused and kept at zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelGains {
    pub snr: Vec<f64>,
    pub inr: SquareMatrix,
}

impl ChannelGains {
    pub fn new(snr: Vec<f64>, inr: SquareMatrix) -> Result<Self> {
        if inr.n() != snr.len() {
            return Err(Error::InvalidArgument(format!(
                "{} direct gains but {}x{} cross gains",
                snr.len(),
                inr.n(),
                inr.n()
            )));
        }
        let bad = snr.iter().chain(inr.as_slice()).any(|g| !(g.is_finite() && *g >= 0.0));
        if bad {
            return Err(Error::InvalidArgument("gains must be finite and nonnegative".into()));
        }
        Ok(ChannelGains { snr, inr })
    }

    pub fn n(&self) -> usize {
        self.snr.len()
    }

    /// Gain from transmitter `tx` at receiver `rx`, direct or cross.
    pub fn link(&self, tx: usize, rx: usize) -> f64 {
        if tx == rx {
            self.snr[tx]
        } else {
            self.inr.get(tx, rx)
        }
    }

    /// CSV with columns `i,j,gain`; `i == j` rows are the direct SNRs.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["i", "j", "gain"])?;
        let n = self.n();
        for i in 0..n {
            for j in 0..n {
                w.write_record([i.to_string(), j.to_string(), self.link(i, j).to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Gains for `layout`. Fading factors are drawn from `rng` in a fixed order:
/// the `n` direct links first, then cross links row by row.
pub fn compute_gains<R: Rng + ?Sized>(
    layout: &NodeLayout,
    attn: &AttenuationSpec,
    fading: Fading,
    rng: &mut R,
) -> Result<ChannelGains> {
    let n = layout.n();
    if layout.rx.len() != n {
        return Err(Error::InvalidArgument("layout has unequal tx/rx counts".into()));
    }
    let link = |i: usize, j: usize| -> Result<f64> {
        attn.try_gain(distance(&layout.tx[i], &layout.rx[j]))
            .ok_or(Error::CoincidentNodes { tx: i, rx: j })
    };
    let mut snr = Vec::with_capacity(n);
    for i in 0..n {
        snr.push(link(i, i)? * fading.draw(rng));
    }
    let mut inr = SquareMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                inr.set(i, j, link(i, j)? * fading.draw(rng));
            }
        }
    }
    ChannelGains::new(snr, inr)
}

/// Only the direct gains, consistent with [`instance_gains`] for the same
/// instance but `O(n)` instead of `O(n^2)`.
pub fn direct_gains(config: &NetworkConfig, n: usize, instance: u64) -> Result<Vec<f64>> {
    let layout = layout_with_n(config, n, instance)?;
    let mut rng = substream(config.seed, instance, Role::Fading);
    (0..n)
        .map(|i| {
            let g = config
                .attenuation
                .try_gain(distance(&layout.tx[i], &layout.rx[i]))
                .ok_or(Error::CoincidentNodes { tx: i, rx: i })?;
            Ok(g * config.fading.draw(&mut rng))
        })
        .collect()
}

/// Layout and gains of replicate `instance` with `n` pairs.
pub fn instance_gains(config: &NetworkConfig, n: usize, instance: u64) -> Result<(NodeLayout, ChannelGains)> {
    let layout = layout_with_n(config, n, instance)?;
    let mut rng = substream(config.seed, instance, Role::Fading);
    let gains = compute_gains(&layout, &config.attenuation, config.fading, &mut rng)?;
    Ok((layout, gains))
}

/// `1/2 log2(1 + 2 g)`, the per-link rate variable in bits.
pub fn half_log_rate(gain: f64) -> f64 {
    0.5 * (2.0 * gain).ln_1p() / std::f64::consts::LN_2
}

/// Rate variables `s[i][j] = 1/2 log2(1 + 2 g_ij)` with the direct gain on
/// the diagonal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateMatrix {
    s: SquareMatrix,
}

impl RateMatrix {
    pub fn from_gains(gains: &ChannelGains) -> Self {
        let n = gains.n();
        let mut s = SquareMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                s.set(i, j, half_log_rate(gains.link(i, j)));
            }
        }
        RateMatrix { s }
    }

    /// Wrap explicit rate values. Entries must be finite and nonnegative.
    pub fn from_matrix(s: SquareMatrix) -> Result<Self> {
        if s.as_slice().iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::InvalidArgument("rates must be finite and nonnegative".into()));
        }
        Ok(RateMatrix { s })
    }

    pub fn n(&self) -> usize {
        self.s.n()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.s.get(i, j)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n()).map(|i| self.s.get(i, i)).collect()
    }

    pub fn matrix(&self) -> &SquareMatrix {
        &self.s
    }
}

pub fn rate_matrix(gains: &ChannelGains) -> RateMatrix {
    RateMatrix::from_gains(gains)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn layout(tx: &[[f64; 2]], rx: &[[f64; 2]]) -> NodeLayout {
        NodeLayout {
            tx: tx.iter().map(|p| p.to_vec()).collect(),
            rx: rx.iter().map(|p| p.to_vec()).collect(),
        }
    }

    fn no_cutoff() -> AttenuationSpec {
        AttenuationSpec {
            alpha: 2.0,
            c_dec: 1.0,
            rho0: 0.0,
        }
    }

    #[test]
    fn config_json_round_trip() {
        let cfg = NetworkConfig::standard_dense(5, 9);
        let text = serde_json::to_string(&cfg).unwrap();
        for key in [
            "\"n\"",
            "\"dim\"",
            "\"tx_placement\"",
            "\"rx_placement\"",
            "\"alpha\"",
            "\"c_dec\"",
            "\"rho0\"",
            "\"fading\"",
            "\"seed\"",
        ] {
            assert!(text.contains(key), "{key} missing from {text}");
        }
        let back: NetworkConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let mut cfg = NetworkConfig::standard_dense(3, 0);
        cfg.rx_placement = PlacementSpec::uniform_unit_box(3);
        match cfg.validate() {
            Err(Error::Config { path, .. }) => assert_eq!(path, "rx_placement"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn layout_is_deterministic() {
        let cfg = NetworkConfig::standard_dense(1, 7);
        assert_eq!(sample_layout(&cfg, 0).unwrap(), sample_layout(&cfg, 0).unwrap());
        assert_ne!(sample_layout(&cfg, 0).unwrap(), sample_layout(&cfg, 1).unwrap());
    }

    #[test]
    fn layout_shape_and_support() {
        let cfg = NetworkConfig::standard_dense(3, 1);
        let l = sample_layout(&cfg, 4).unwrap();
        assert_eq!((l.tx.len(), l.rx.len()), (3, 3));
        assert!(l.tx.iter().all(|p| cfg.tx_placement.contains(p)));
        assert!(l.rx.iter().all(|p| cfg.rx_placement.contains(p)));
    }

    #[test]
    fn layout_prefix_independent_of_n() {
        let cfg = NetworkConfig::standard_dense(0, 3);
        let small = layout_with_n(&cfg, 4, 2).unwrap();
        let big = layout_with_n(&cfg, 10, 2).unwrap();
        assert_eq!(small.tx[..], big.tx[..4]);
        assert_eq!(small.rx[..], big.rx[..4]);
    }

    #[test]
    fn direct_gain_hand_value() {
        let l = layout(&[[0.0, 0.0]], &[[0.0, 0.5]]);
        let mut rng = substream(0, 0, Role::Fading);
        let g = compute_gains(&l, &no_cutoff(), Fading::UnitModulus, &mut rng).unwrap();
        assert_eq!(g.snr, vec![4.0]);
        assert_eq!(g.inr.n(), 1);
        assert_eq!(g.inr.get(0, 0), 0.0);
    }

    #[test]
    fn cross_gain_orientation() {
        // tx1 sits next to rx0, so INR_10 is large and INR_01 small.
        let l = layout(&[[0.0, 0.0], [1.0, 0.0]], &[[1.0, 0.5], [5.0, 0.0]]);
        let mut rng = substream(0, 0, Role::Fading);
        let g = compute_gains(&l, &no_cutoff(), Fading::UnitModulus, &mut rng).unwrap();
        assert_eq!(g.inr.get(1, 0), 4.0);
        assert!((g.inr.get(0, 1) - 1.0 / 25.0).abs() < 1e-15);
    }

    #[test]
    fn coincident_nodes_error() {
        let l = layout(&[[0.2, 0.2]], &[[0.2, 0.2]]);
        let mut rng = substream(0, 0, Role::Fading);
        assert!(matches!(
            compute_gains(&l, &no_cutoff(), Fading::UnitModulus, &mut rng),
            Err(Error::CoincidentNodes { tx: 0, rx: 0 })
        ));
        let clamped = AttenuationSpec {
            rho0: 0.1,
            ..no_cutoff()
        };
        let g = compute_gains(&l, &clamped, Fading::UnitModulus, &mut rng).unwrap();
        assert!((g.snr[0] - 100.0).abs() < 1e-9);
    }

    #[test]
    fn rayleigh_mean_matches_deterministic_gain() {
        // |H|^2 ~ Exp(1): mean 1, standard deviation 1.
        let draws = 1_000_000;
        let mut rng = substream(5, 0, Role::Fading);
        let mean = (0..draws).map(|_| Fading::Rayleigh.draw(&mut rng)).sum::<f64>() / draws as f64;
        let base = 4.0;
        let band = 3.0 * base / (draws as f64).sqrt();
        assert!((base * mean - base).abs() < band, "mean {mean}");
    }

    #[test]
    fn rate_hand_values() {
        let inr = SquareMatrix::zeros(3);
        let g = ChannelGains::new(vec![4.0, 1.5, 0.0], inr).unwrap();
        let s = rate_matrix(&g);
        assert!((s.get(0, 0) - 0.5 * 9f64.log2()).abs() < 1e-12);
        assert!((s.get(1, 1) - 1.0).abs() < 1e-15);
        assert_eq!(s.get(2, 2), 0.0);
    }

    #[test]
    fn gains_csv_has_every_entry() {
        let l = layout(&[[0.0, 0.0], [1.0, 0.0]], &[[0.0, 1.0], [1.0, 1.0]]);
        let mut rng = substream(0, 0, Role::Fading);
        let g = compute_gains(&l, &no_cutoff(), Fading::UnitModulus, &mut rng).unwrap();
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 5);
        assert!(text.starts_with("i,j,gain\n0,0,1\n"));
        let mut buf = Vec::new();
        l.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("role,i,x0,x1\ntx,0,0,0\n"));
    }

    proptest! {
        #[test]
        fn relabeling_permutes_gains(seed in any::<u64>(), rot in 0usize..6) {
            let n = 6;
            let cfg = NetworkConfig::standard_dense(n, seed);
            let (l, g) = instance_gains(&cfg, n, 0).unwrap();
            let perm: Vec<usize> = (0..n).map(|k| (k + rot) % n).rev().collect();
            let mut rng = substream(0, 0, Role::Fading);
            let gp = compute_gains(&l.permuted(&perm), &cfg.attenuation, Fading::UnitModulus, &mut rng).unwrap();
            for a in 0..n {
                prop_assert_eq!(gp.snr[a], g.snr[perm[a]]);
                for b in 0..n {
                    if a != b {
                        prop_assert_eq!(gp.inr.get(a, b), g.inr.get(perm[a], perm[b]));
                    }
                }
            }
        }

        #[test]
        fn rate_nondecreasing_in_gain(a in 0.0f64..1e6, b in 0.0f64..1e6) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(half_log_rate(lo) <= half_log_rate(hi));
        }

        #[test]
        fn diagonal_only_path_agrees(seed in any::<u64>(), rayleigh in any::<bool>()) {
            let mut cfg = NetworkConfig::standard_dense(7, seed);
            if rayleigh {
                cfg.fading = Fading::Rayleigh;
            }
            let (_, g) = instance_gains(&cfg, 7, 3).unwrap();
            prop_assert_eq!(direct_gains(&cfg, 7, 3).unwrap(), g.snr);
        }
    }
}
