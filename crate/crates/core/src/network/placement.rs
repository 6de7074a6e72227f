use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper bound on proposals per accepted point for [`PlacementSpec::CustomDensity`].
pub const MAX_REJECTION_ATTEMPTS: u64 = 1_000_000;

/// A distribution over node positions in `R^d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PlacementSpec {
    /// Uniform on `origin + [0, sides[0]] x ... x [0, sides[d-1]]`.
    UniformBox {
        sides: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        origin: Option<Vec<f64>>,
    },
    /// Isotropic normal with the given mean and per-axis standard deviation.
    Gaussian { mean: Vec<f64>, std: f64 },
    /// Piecewise-constant density tabulated on a regular grid over a box.
    /// `values` is row-major with the last axis varying fastest; it need not
    /// be normalized.
    CustomDensity {
        sides: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        origin: Option<Vec<f64>>,
        shape: Vec<usize>,
        values: Vec<f64>,
    },
    /// Every node at the same location.
    Point { at: Vec<f64> },
}

impl PlacementSpec {
    pub fn uniform_unit_box(dim: usize) -> Self {
        PlacementSpec::UniformBox {
            sides: vec![1.0; dim],
            origin: None,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            PlacementSpec::UniformBox { sides, .. } => sides.len(),
            PlacementSpec::Gaussian { mean, .. } => mean.len(),
            PlacementSpec::CustomDensity { sides, .. } => sides.len(),
            PlacementSpec::Point { at } => at.len(),
        }
    }

    pub fn validate(&self, path: &str) -> Result<()> {
        let dim = self.dim();
        if dim == 0 {
            return Err(Error::config(path, "dimension must be at least 1"));
        }
        let check_box = |sides: &[f64], origin: &Option<Vec<f64>>| -> Result<()> {
            if let Some(k) = sides.iter().position(|s| !(s.is_finite() && *s > 0.0)) {
                return Err(Error::config(
                    format!("{path}.sides[{k}]"),
                    "side lengths must be finite and positive",
                ));
            }
            if let Some(o) = origin {
                if o.len() != sides.len() {
                    return Err(Error::config(
                        format!("{path}.origin"),
                        "origin must have one coordinate per axis",
                    ));
                }
                if o.iter().any(|x| !x.is_finite()) {
                    return Err(Error::config(format!("{path}.origin"), "must be finite"));
                }
            }
            Ok(())
        };
        match self {
            PlacementSpec::UniformBox { sides, origin } => check_box(sides, origin),
            PlacementSpec::Gaussian { mean, std } => {
                if mean.iter().any(|x| !x.is_finite()) {
                    return Err(Error::config(format!("{path}.mean"), "must be finite"));
                }
                if !(std.is_finite() && *std > 0.0) {
                    return Err(Error::config(
                        format!("{path}.std"),
                        "standard deviation must be finite and positive",
                    ));
                }
                Ok(())
            }
            PlacementSpec::CustomDensity {
                sides,
                origin,
                shape,
                values,
            } => {
                check_box(sides, origin)?;
                if shape.len() != sides.len() || shape.contains(&0) {
                    return Err(Error::config(
                        format!("{path}.shape"),
                        "need one positive cell count per axis",
                    ));
                }
                let cells: usize = shape.iter().product();
                if values.len() != cells {
                    return Err(Error::config(
                        format!("{path}.values"),
                        format!("expected {cells} values, found {}", values.len()),
                    ));
                }
                if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                    return Err(Error::config(
                        format!("{path}.values"),
                        "density must be finite and nonnegative",
                    ));
                }
                if values.iter().sum::<f64>() <= 0.0 {
                    return Err(Error::config(
                        format!("{path}.values"),
                        "density must have positive total mass",
                    ));
                }
                Ok(())
            }
            PlacementSpec::Point { at } => {
                if at.iter().any(|x| !x.is_finite()) {
                    return Err(Error::config(format!("{path}.at"), "must be finite"));
                }
                Ok(())
            }
        }
    }

    /// Whether `x` lies in the closed support. Gaussian support is all of `R^d`.
    pub fn contains(&self, x: &[f64]) -> bool {
        if x.len() != self.dim() {
            return false;
        }
        match self {
            PlacementSpec::UniformBox { sides, origin } | PlacementSpec::CustomDensity { sides, origin, .. } => {
                x.iter().enumerate().all(|(k, &v)| {
                    let lo = origin.as_ref().map_or(0.0, |o| o[k]);
                    v >= lo && v <= lo + sides[k]
                })
            }
            PlacementSpec::Gaussian { .. } => x.iter().all(|v| v.is_finite()),
            PlacementSpec::Point { at } => x == at.as_slice(),
        }
    }

    /// Draw `count` IID points. The spec must already be valid.
    pub fn sample_many<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Result<Vec<Vec<f64>>> {
        match self {
            PlacementSpec::UniformBox { sides, origin } => Ok((0..count)
                .map(|_| uniform_in_box(sides, origin.as_deref(), rng))
                .collect()),
            PlacementSpec::Gaussian { mean, std } => {
                let normal =
                    Normal::new(0.0, *std).map_err(|e| Error::InvalidArgument(format!("gaussian placement: {e}")))?;
                Ok((0..count)
                    .map(|_| mean.iter().map(|m| m + normal.sample(rng)).collect())
                    .collect())
            }
            PlacementSpec::CustomDensity {
                sides,
                origin,
                shape,
                values,
            } => {
                let peak = values.iter().copied().fold(0.0, f64::max);
                let mut out = Vec::with_capacity(count);
                for _ in 0..count {
                    out.push(rejection_sample(sides, origin.as_deref(), shape, values, peak, rng)?);
                }
                Ok(out)
            }
            PlacementSpec::Point { at } => Ok(vec![at.clone(); count]),
        }
    }
}

fn uniform_in_box<R: Rng + ?Sized>(sides: &[f64], origin: Option<&[f64]>, rng: &mut R) -> Vec<f64> {
    sides
        .iter()
        .enumerate()
        .map(|(k, s)| origin.map_or(0.0, |o| o[k]) + s * rng.random::<f64>())
        .collect()
}

fn rejection_sample<R: Rng + ?Sized>(
    sides: &[f64],
    origin: Option<&[f64]>,
    shape: &[usize],
    values: &[f64],
    peak: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    for _ in 0..MAX_REJECTION_ATTEMPTS {
        let mut cell = 0usize;
        let mut point = Vec::with_capacity(sides.len());
        for k in 0..sides.len() {
            let u: f64 = rng.random();
            let idx = ((u * shape[k] as f64) as usize).min(shape[k] - 1);
            cell = cell * shape[k] + idx;
            point.push(origin.map_or(0.0, |o| o[k]) + sides[k] * u);
        }
        if rng.random::<f64>() * peak < values[cell] {
            return Ok(point);
        }
    }
    Err(Error::RejectionExhausted {
        attempts: MAX_REJECTION_ATTEMPTS,
    })
}
