//! Wishart (Marchenko–Pastur) reference law for uncorrelated series and
//! detection of eigenvalues above its upper edge.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::corrmatrix::EigenSpectrum;
use crate::error::{Error, Result};

/// Simpson panels used for the cumulative distribution.
const CDF_PANELS: usize = 2048;

/// Eigenvalue law of a correlation matrix of N uncorrelated series of
/// length T, parameterized by Q = T/N.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WishartLaw {
    pub q: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
}

/// λ_min,max = (1 ∓ 1/√Q)².
pub fn mp_bounds(q: f64) -> Result<WishartLaw> {
    if !(q.is_finite() && q >= 1.0) {
        return Err(Error::Domain(format!(
            "aspect ratio Q = T/N must be >= 1, got {q}"
        )));
    }
    let s = 1.0 / q.sqrt();
    Ok(WishartLaw {
        q,
        lambda_min: (1.0 - s).powi(2),
        lambda_max: (1.0 + s).powi(2),
    })
}

/// Density of the law at `lambda`. Zero outside the support.
pub fn mp_density(lambda: f64, q: f64) -> Result<f64> {
    Ok(mp_bounds(q)?.density(lambda))
}

impl WishartLaw {
    pub fn from_shape(n_assets: usize, n_observations: usize) -> Result<Self> {
        if n_assets == 0 {
            return Err(Error::Domain("N must be positive".into()));
        }
        mp_bounds(n_observations as f64 / n_assets as f64)
    }

    pub fn density(&self, lambda: f64) -> f64 {
        if lambda <= self.lambda_min || lambda >= self.lambda_max || lambda <= 0.0 {
            return 0.0;
        }
        let prod = (self.lambda_max - lambda) * (lambda - self.lambda_min);
        self.q / (2.0 * PI) * prod.sqrt() / lambda
    }

    pub fn contains(&self, lambda: f64) -> bool {
        lambda >= self.lambda_min && lambda <= self.lambda_max
    }

    /// Cumulative distribution ∫_{λ_min}^{x} P(λ) dλ.
    ///
    /// Integrated in θ with λ = c − h·cos θ, which removes the square-root
    /// edges and leaves a smooth integrand for Simpson's rule.
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= self.lambda_min {
            return 0.0;
        }
        if x >= self.lambda_max {
            return 1.0;
        }
        let c = 0.5 * (self.lambda_max + self.lambda_min);
        let h = 0.5 * (self.lambda_max - self.lambda_min);
        let theta_x = ((c - x) / h).clamp(-1.0, 1.0).acos();
        let k = self.q / (2.0 * PI);
        let g = |theta: f64| {
            let lambda = c - h * theta.cos();
            if lambda <= 0.0 {
                // Q = 1 at θ = 0: sin²θ / (1 − cos θ) → 2
                return k * h * 2.0;
            }
            k * h * h * theta.sin().powi(2) / lambda
        };
        let step = theta_x / CDF_PANELS as f64;
        let mut sum = g(0.0) + g(theta_x);
        for i in 1..CDF_PANELS {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            sum += w * g(i as f64 * step);
        }
        (sum * step / 3.0).clamp(0.0, 1.0)
    }
}

/// Eigenmodes whose eigenvalue exceeds `margin · λ_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificantSet {
    /// Mode indices in descending eigenvalue order.
    pub indices: Vec<usize>,
    pub eigenvalues: Vec<f64>,
    /// λ_α / λ_max for each listed mode.
    pub ratios: Vec<f64>,
    pub threshold: f64,
    pub margin: f64,
    pub law: WishartLaw,
}

impl SignificantSet {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Flags every mode with λ_α > margin · λ_max, where λ_max comes from
/// Q = T/N of the spectrum. A margin of about 1.05 absorbs finite-size edge
/// fluctuations at small N.
pub fn significant_eigenvalues(spec: &EigenSpectrum, margin: f64) -> Result<SignificantSet> {
    if !(margin.is_finite() && margin >= 1.0) {
        return Err(Error::Argument(format!(
            "detection margin must be >= 1, got {margin}"
        )));
    }
    let law = WishartLaw::from_shape(spec.n_assets(), spec.n_observations())?;
    let threshold = margin * law.lambda_max;
    let (indices, eigenvalues): (Vec<usize>, Vec<f64>) = spec
        .eigenvalues()
        .iter()
        .enumerate()
        .filter(|(_, &l)| l > threshold)
        .map(|(a, &l)| (a, l))
        .unzip();
    let ratios = eigenvalues.iter().map(|l| l / law.lambda_max).collect();
    Ok(SignificantSet {
        indices,
        eigenvalues,
        ratios,
        threshold,
        margin,
        law,
    })
}

/// Fraction of `eigenvalues` outside `[λ_min, λ_max]`.
pub fn fraction_outside(eigenvalues: &[f64], law: &WishartLaw) -> f64 {
    if eigenvalues.is_empty() {
        return 0.0;
    }
    eigenvalues.iter().filter(|&&l| !law.contains(l)).count() as f64 / eigenvalues.len() as f64
}

/// Kolmogorov–Smirnov distance between the empirical distribution of
/// `sample` and `cdf`.
pub fn ks_distance(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            ((i + 1) as f64 / n - f).max(f - i as f64 / n)
        })
        .fold(0.0, f64::max)
}

/// KS distance between the eigenvalues inside [λ_min, λ_max] and the law.
pub fn bulk_ks_distance(eigenvalues: &[f64], law: &WishartLaw) -> f64 {
    let bulk: Vec<f64> = eigenvalues
        .iter()
        .copied()
        .filter(|&l| law.contains(l))
        .collect();
    if bulk.is_empty() {
        return 1.0;
    }
    ks_distance(&bulk, |x| law.cdf(x))
}
