//! Band-limited sequences on the integer grid.
//!
//! A band-limited sequence is stored as a finite combination of shifted
//! ideal low-pass kernels
//!
//! ```text
//! x(t) = sum_m c_m K(t - m),   K(u) = sin(omega u) / (pi u),   K(0) = omega / pi
//! ```
//!
//! so it is band-limited to `[-omega, omega]` by construction and can be
//! evaluated at any integer, in particular at future times `t > 0`.
//!
//! Fitting such a sequence to observations leads to the Gram system
//! `G c = x` with `G[i][j] = K(t_i - t_j)`. The Gram matrix is a (possibly
//! sparse) section of the prolate matrix: symmetric, positive definite in
//! exact arithmetic, and numerically rank deficient for narrow bands or long
//! windows. It is solved through its eigendecomposition with a relative
//! cutoff on the spectrum and an optional Tikhonov shift.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative eigenvalue cutoff used by [`FitOptions::default`].
pub const DEFAULT_CUTOFF: f64 = 1e-12;

/// Band limit `omega` in radians per sample, `0 < omega < pi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct BandSpec {
    omega: f64,
}

impl BandSpec {
    pub fn new(omega: f64) -> Result<Self> {
        if omega.is_finite() && omega > 0.0 && omega < PI {
            Ok(Self { omega })
        } else {
            Err(Error::InvalidBand(omega))
        }
    }

    /// Band limit given as a fraction of pi.
    pub fn from_fraction_of_pi(fraction: f64) -> Result<Self> {
        Self::new(fraction * PI)
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    #[inline]
    pub fn kernel(&self, u: i64) -> f64 {
        sinc_kernel(*self, u)
    }
}

impl TryFrom<f64> for BandSpec {
    type Error = Error;

    fn try_from(omega: f64) -> Result<Self> {
        Self::new(omega)
    }
}

impl From<BandSpec> for f64 {
    fn from(spec: BandSpec) -> f64 {
        spec.omega
    }
}

/// Impulse response of the ideal low-pass filter with pass band
/// `[-omega, omega]`.
#[inline]
pub fn sinc_kernel(spec: BandSpec, u: i64) -> f64 {
    if u == 0 {
        spec.omega / PI
    } else {
        let u = u as f64;
        (spec.omega * u).sin() / (PI * u)
    }
}

/// Observations `x(t)` at strictly increasing nonpositive integer times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledSignal {
    times: Vec<i64>,
    values: Vec<f64>,
}

impl SampledSignal {
    pub fn new(times: Vec<i64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::InvalidSamples(format!(
                "{} times but {} values",
                times.len(),
                values.len()
            )));
        }
        if times.is_empty() {
            return Err(Error::InvalidSamples("no observations".into()));
        }
        if let Some(&t) = times.iter().find(|&&t| t > 0) {
            return Err(Error::InvalidSamples(format!("time {t} is in the future")));
        }
        if let Some(w) = times.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::InvalidSamples(format!(
                "times not strictly increasing at {} -> {}",
                w[0], w[1]
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidSamples(format!(
                "non-finite value at t = {}",
                times[i]
            )));
        }
        Ok(Self { times, values })
    }

    /// Samples on the contiguous window `start, start + 1, ..., start + len - 1`.
    pub fn contiguous(start: i64, values: Vec<f64>) -> Result<Self> {
        let times = (0..values.len() as i64).map(|k| start + k).collect();
        Self::new(times, values)
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (i64, f64)>) -> Result<Self> {
        let (times, values) = pairs.into_iter().unzip();
        Self::new(times, values)
    }

    pub fn times(&self) -> &[i64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.times.iter().copied().zip(self.values.iter().copied())
    }

    pub fn is_contiguous(&self) -> bool {
        self.times.windows(2).all(|w| w[1] == w[0] + 1)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// A band-limited sequence `t -> sum_m c_m K(t - m)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandLimitedExtension {
    pub spec: BandSpec,
    pub anchors: Vec<i64>,
    pub coefficients: Vec<f64>,
    /// Tikhonov shift used in the solve (0 for plain interpolation).
    pub regularization: f64,
    /// Largest absolute mismatch against the data at the anchors.
    pub residual: f64,
    /// Number of spectral components kept by the solve.
    pub rank: usize,
}

impl BandLimitedExtension {
    /// The identically zero sequence in the given band.
    pub fn zero(spec: BandSpec) -> Self {
        Self {
            spec,
            anchors: Vec::new(),
            coefficients: Vec::new(),
            regularization: 0.0,
            residual: 0.0,
            rank: 0,
        }
    }

    pub fn evaluate(&self, t: i64) -> f64 {
        self.anchors
            .iter()
            .zip(&self.coefficients)
            .map(|(&m, &c)| c * self.spec.kernel(t - m))
            .sum()
    }

    pub fn evaluate_range(&self, from: i64, to: i64) -> Vec<f64> {
        (from..=to).map(|t| self.evaluate(t)).collect()
    }
}

/// Free-function form of [`BandLimitedExtension::evaluate`].
pub fn evaluate(ext: &BandLimitedExtension, t: i64) -> f64 {
    ext.evaluate(t)
}

/// Settings for the spectral Gram solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Tikhonov shift added to every kept eigenvalue.
    pub lambda: f64,
    /// Eigenvalues below `cutoff * max_eigenvalue` are discarded.
    pub cutoff: f64,
    /// When set, a fit whose residual exceeds this value is rejected with
    /// [`Error::SingularSystem`].
    pub tolerance: Option<f64>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            lambda: 0.0,
            cutoff: DEFAULT_CUTOFF,
            tolerance: None,
        }
    }
}

impl FitOptions {
    pub fn with_lambda(lambda: f64) -> Self {
        Self {
            lambda,
            ..Self::default()
        }
    }
}

/// Least-squares band-limited fit over the sample times.
///
/// The fitted values on the anchors are the projection of the data onto
/// the eigenvectors of the Gram matrix that survive the cutoff (shrunk by
/// the Tikhonov factor when `lambda > 0`). The residual is measured by
/// evaluating the returned extension, not inferred from the spectrum.
pub fn fit_bandlimited(
    samples: &SampledSignal,
    spec: BandSpec,
    options: &FitOptions,
) -> Result<BandLimitedExtension> {
    if !(options.lambda >= 0.0 && options.lambda.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "lambda must be a finite nonnegative number, got {}",
            options.lambda
        )));
    }
    if !(options.cutoff >= 0.0 && options.cutoff < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "cutoff must lie in [0, 1), got {}",
            options.cutoff
        )));
    }

    let times = samples.times();
    let n = times.len();
    let gram = DMatrix::from_fn(n, n, |i, j| spec.kernel(times[i] - times[j]));
    let rhs = DVector::from_column_slice(samples.values());

    let eigen = SymmetricEigen::new(gram);
    let top = eigen.eigenvalues.iter().fold(0.0_f64, |m, &v| m.max(v));
    let threshold = options.cutoff * top;

    let mut coefficients = DVector::<f64>::zeros(n);
    let mut rank = 0;
    for (k, &sigma) in eigen.eigenvalues.iter().enumerate() {
        if sigma <= threshold {
            continue;
        }
        rank += 1;
        let v = eigen.eigenvectors.column(k);
        let weight = v.dot(&rhs) / (sigma + options.lambda);
        coefficients.axpy(weight, &v, 1.0);
    }

    let mut ext = BandLimitedExtension {
        spec,
        anchors: times.to_vec(),
        coefficients: coefficients.iter().copied().collect(),
        regularization: options.lambda,
        residual: 0.0,
        rank,
    };
    ext.residual = max_mismatch(&ext, samples);

    if let Some(tolerance) = options.tolerance {
        if ext.residual > tolerance {
            return Err(Error::SingularSystem {
                rank,
                size: n,
                residual: ext.residual,
                tolerance,
            });
        }
    }
    Ok(ext)
}

/// Band-limited interpolation of `samples`, optionally pinned at one more
/// time `q` with a chosen value.
///
/// Different values at the extra anchor give different extensions that all
/// reproduce the samples, so on a sparse observation set the extension is
/// not unique. With `lambda == 0` the fit must reproduce every anchor to
/// `1e-8 * (1 + max|x|)`; otherwise [`Error::SingularSystem`] is returned.
pub fn interpolate_bandlimited(
    samples: &SampledSignal,
    spec: BandSpec,
    lambda: f64,
    extra_anchor: Option<(i64, f64)>,
) -> Result<BandLimitedExtension> {
    let augmented;
    let target = match extra_anchor {
        None => samples,
        Some((q, value)) => {
            if q > 0 {
                return Err(Error::InvalidSamples(format!(
                    "extra anchor {q} is in the future"
                )));
            }
            if samples.times().contains(&q) {
                return Err(Error::InvalidSamples(format!(
                    "extra anchor {q} is already a sample time"
                )));
            }
            let mut pairs: Vec<(i64, f64)> = samples.iter().collect();
            pairs.push((q, value));
            pairs.sort_by_key(|&(t, _)| t);
            augmented = SampledSignal::from_pairs(pairs)?;
            &augmented
        }
    };

    let tolerance = (lambda == 0.0).then(|| 1e-8 * (1.0 + target.max_abs()));
    fit_bandlimited(
        target,
        spec,
        &FitOptions {
            lambda,
            tolerance,
            ..FitOptions::default()
        },
    )
}

/// Ideal low-pass filtering of the zero-extended window:
/// `t -> sum_s x(s) K(t - s)`.
pub fn lowpass_project(samples: &SampledSignal, spec: BandSpec) -> Result<BandLimitedExtension> {
    if !samples.is_contiguous() {
        return Err(Error::InvalidSamples(
            "low-pass projection needs a contiguous window".into(),
        ));
    }
    let mut ext = BandLimitedExtension {
        spec,
        anchors: samples.times().to_vec(),
        coefficients: samples.values().to_vec(),
        regularization: 0.0,
        residual: 0.0,
        rank: samples.len(),
    };
    ext.residual = max_mismatch(&ext, samples);
    Ok(ext)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    L2,
    Sup,
}

/// Distance between the samples and an extension over the sample times,
/// with weight `(1 + |t|)^(-weight_m)` under the L2 norm.
pub fn projection_error(
    samples: &SampledSignal,
    ext: &BandLimitedExtension,
    weight_m: f64,
    norm: Norm,
) -> f64 {
    let gaps = samples.iter().map(|(t, x)| (t, x - ext.evaluate(t)));
    match norm {
        Norm::Sup => gaps.fold(0.0, |m, (_, d)| m.max(d.abs())),
        Norm::L2 => gaps
            .map(|(t, d)| {
                let w = (1.0 + t.unsigned_abs() as f64).powf(-weight_m);
                (w * d) * (w * d)
            })
            .sum::<f64>()
            .sqrt(),
    }
}

fn max_mismatch(ext: &BandLimitedExtension, samples: &SampledSignal) -> f64 {
    samples
        .iter()
        .fold(0.0, |m, (t, x)| m.max((ext.evaluate(t) - x).abs()))
}
