//! Prices, discounted returns and the complete-twin construction.
//!
//! The twin keeps the observed sign of every discounted return and replaces
//! its magnitude by the trace of a band-limited sequence:
//!
//! ```text
//! x(t)      = (1 + |t|)^(-M) |xi(t)|
//! a_eps(t)  = (1 + |t|)^M  x_hat(t)          x_hat band-limited fit of x
//! xi_eps(t) = sign(xi(t)) a_eps(t)            sign(0) = +1
//! ```
//!
//! Band-limited sequences are determined by their past, so `|xi_eps|` is
//! predictable and the twin is a binomial model with known step sizes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::banlim::{fit_bandlimited, BandLimitedExtension, BandSpec, FitOptions, SampledSignal};
use crate::error::{Error, Result};

/// Observed prices `S(t)` on the contiguous window `start..=0`, with a bond
/// `B(t) = bond_base * rho^t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceSeries {
    start: i64,
    prices: Vec<f64>,
    rho: f64,
    bond_base: f64,
}

impl PriceSeries {
    /// Prices ending at `t = 0`; the first entry sits at `t = 1 - len`.
    pub fn new(prices: Vec<f64>, rho: f64, bond_base: f64) -> Result<Self> {
        if prices.len() < 2 {
            return Err(Error::InvalidPrices(
                "need at least two prices to form a return".into(),
            ));
        }
        if !(rho.is_finite() && rho >= 1.0) {
            return Err(Error::InvalidPrices(format!("rho must be >= 1, got {rho}")));
        }
        if !(bond_base.is_finite() && bond_base > 0.0) {
            return Err(Error::InvalidPrices(format!(
                "bond base must be positive, got {bond_base}"
            )));
        }
        let start = 1 - prices.len() as i64;
        if let Some(i) = prices.iter().position(|p| !(p.is_finite() && *p > 0.0)) {
            return Err(Error::InvalidPrices(format!(
                "price {} at t = {} is not positive",
                prices[i],
                start + i as i64
            )));
        }
        Ok(Self {
            start,
            prices,
            rho,
            bond_base,
        })
    }

    /// Builds a series from explicit times, which must be the contiguous
    /// ascending range ending at 0.
    pub fn from_times(times: &[i64], prices: Vec<f64>, rho: f64, bond_base: f64) -> Result<Self> {
        if times.len() != prices.len() {
            return Err(Error::InvalidPrices(format!(
                "{} times but {} prices",
                times.len(),
                prices.len()
            )));
        }
        if times.last() != Some(&0) {
            return Err(Error::InvalidPrices("the last time must be 0".into()));
        }
        if let Some(w) = times.windows(2).find(|w| w[1] != w[0] + 1) {
            return Err(Error::InvalidPrices(format!(
                "times must be contiguous and ascending, found {} -> {}",
                w[0], w[1]
            )));
        }
        Self::new(prices, rho, bond_base)
    }

    /// Earliest observed time (tau).
    pub fn start(&self) -> i64 {
        self.start
    }

    pub fn prices(&self) -> &[f64] {
        &self.prices
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn bond_base(&self) -> f64 {
        self.bond_base
    }

    pub fn len(&self) -> usize {
        self.prices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prices.is_empty()
    }

    pub fn times(&self) -> impl Iterator<Item = i64> {
        self.start..=0
    }

    pub fn price(&self, t: i64) -> Option<f64> {
        self.index(t).map(|i| self.prices[i])
    }

    pub fn bond(&self, t: i64) -> f64 {
        bond_value(self.bond_base, self.rho, t)
    }

    pub fn discounted(&self, t: i64) -> Option<f64> {
        self.price(t).map(|p| p / self.bond(t))
    }

    /// The last `returns + 1` prices.
    pub fn tail(&self, returns: usize) -> Result<Self> {
        let keep = (returns + 1).min(self.prices.len());
        Self::new(
            self.prices[self.prices.len() - keep..].to_vec(),
            self.rho,
            self.bond_base,
        )
    }

    fn index(&self, t: i64) -> Option<usize> {
        (self.start..=0)
            .contains(&t)
            .then(|| (t - self.start) as usize)
    }
}

pub(crate) fn bond_value(bond_base: f64, rho: f64, t: i64) -> f64 {
    bond_base * rho.powf(t as f64)
}

/// Discounted returns `xi(t)` for `t = start + 1 ..= 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnSeries {
    start: i64,
    xi: Vec<f64>,
    reference_price: f64,
}

impl ReturnSeries {
    pub fn new(start: i64, xi: Vec<f64>, reference_price: f64) -> Result<Self> {
        if start + xi.len() as i64 != 0 {
            return Err(Error::InvalidPrices(format!(
                "{} returns cannot start after t = {start} and end at 0",
                xi.len()
            )));
        }
        for (k, &value) in xi.iter().enumerate() {
            if !(value > -1.0 && value < 1.0) {
                return Err(Error::ReturnOutOfRange {
                    t: start + 1 + k as i64,
                    value,
                });
            }
        }
        Ok(Self {
            start,
            xi,
            reference_price,
        })
    }

    /// Time of the reference (earliest) price.
    pub fn start(&self) -> i64 {
        self.start
    }

    pub fn xi(&self) -> &[f64] {
        &self.xi
    }

    /// Discounted price at the start of the window.
    pub fn reference_price(&self) -> f64 {
        self.reference_price
    }

    pub fn times(&self) -> impl Iterator<Item = i64> {
        self.start + 1..=0
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.times().zip(self.xi.iter().copied())
    }

    /// Discounted prices rebuilt from the returns, `start..=0`.
    pub fn reconstruct(&self) -> Vec<f64> {
        compound(self.reference_price, &self.xi)
    }
}

fn compound(first: f64, returns: &[f64]) -> Vec<f64> {
    let mut path = Vec::with_capacity(returns.len() + 1);
    path.push(first);
    let mut level = first;
    for r in returns {
        level *= 1.0 + r;
        path.push(level);
    }
    path
}

/// Polynomial weight exponent `M >= 0`; `M = 0` for a finite window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightConfig {
    m: f64,
}

impl WeightConfig {
    pub fn new(m: f64) -> Result<Self> {
        if m.is_finite() && m >= 0.0 {
            Ok(Self { m })
        } else {
            Err(Error::InvalidConfig(format!(
                "weight exponent must be finite and >= 0, got {m}"
            )))
        }
    }

    pub fn unweighted() -> Self {
        Self { m: 0.0 }
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    /// `(1 + |t|)^(-M)`
    pub fn weight(&self, t: i64) -> f64 {
        if self.m == 0.0 {
            1.0
        } else {
            (1.0 + t.unsigned_abs() as f64).powf(-self.m)
        }
    }
}

impl Default for WeightConfig {
    fn default() -> Self {
        Self::unweighted()
    }
}

pub fn discount(prices: &PriceSeries) -> Result<ReturnSeries> {
    let discounted: Vec<f64> = prices
        .times()
        .zip(prices.prices())
        .map(|(t, p)| p / prices.bond(t))
        .collect();
    let xi = discounted.windows(2).map(|w| w[1] / w[0] - 1.0).collect();
    ReturnSeries::new(prices.start(), xi, discounted[0])
}

/// Signs `zeta(t)` (with `sign(0) = +1`) and weighted magnitudes
/// `x(t) = (1 + |t|)^(-M) |xi(t)|`.
pub fn decompose(returns: &ReturnSeries, weights: &WeightConfig) -> (Vec<i8>, SampledSignal) {
    let zeta = returns
        .xi()
        .iter()
        .map(|&x| if x >= 0.0 { 1 } else { -1 })
        .collect();
    let x = returns
        .iter()
        .map(|(t, v)| weights.weight(t) * v.abs())
        .collect();
    let signal = SampledSignal::contiguous(returns.start() + 1, x)
        .expect("return times are contiguous, nonpositive and nonempty");
    (zeta, signal)
}

/// `(sum_t (1 + |t|)^(-2M) x(t)^2)^(1/2)`
pub fn weighted_norm(x: &SampledSignal, weights: &WeightConfig) -> f64 {
    x.iter()
        .map(|(t, v)| {
            let w = weights.weight(t) * v;
            w * w
        })
        .sum::<f64>()
        .sqrt()
}

/// Times where the twin magnitude leaves `(0, 1)`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Validity {
    pub all_in_unit_interval: bool,
    pub violations: Vec<(i64, f64)>,
}

impl Validity {
    fn check(start: i64, magnitudes: &[f64]) -> Self {
        let violations: Vec<(i64, f64)> = magnitudes
            .iter()
            .enumerate()
            .filter(|(_, &a)| !(a > 0.0 && a < 1.0))
            .map(|(k, &a)| (start + k as i64, a))
            .collect();
        Self {
            all_in_unit_interval: violations.is_empty(),
            violations,
        }
    }
}

/// Achieved errors for one candidate band limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OmegaTrial {
    pub omega: f64,
    pub combined_error: f64,
    pub sup_price_error: f64,
    pub sup_return_error: f64,
    pub fit_residual: f64,
    pub rank: usize,
    pub valid: bool,
}

/// A complete model within reach of the observed prices.
///
/// Per-time vectors are indexed from `start + 1` (returns and magnitudes) or
/// `start` (prices).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompleteTwin {
    pub start: i64,
    pub zeta: Vec<i8>,
    pub a_eps: Vec<f64>,
    pub xi_eps: Vec<f64>,
    pub s_eps: Vec<f64>,
    pub rho: f64,
    pub bond_base: f64,
    pub weight_m: f64,
    pub extension: BandLimitedExtension,
    pub omega: f64,
    pub epsilon: f64,
    pub within_epsilon: bool,
    /// `sup_t |S_eps(t) - S(t)|`
    pub sup_price_error: f64,
    /// `sup_t |xi_eps(t) - xi(t)|`
    pub sup_return_error: f64,
    /// `sup_t (|S_eps(t) - S(t)| + |xi_eps(t) - xi(t)|)`
    pub combined_error: f64,
    /// `sum_t (1 + |t|)^(-2M) (xi_eps(t) - xi(t))^2`
    pub weighted_l2_error: f64,
    /// `sup_t |S_eps(t) / S_eps(start) - S(t) / S(start)|`
    pub ratio_error: f64,
    pub validity: Validity,
    /// Every band limit tried, in grid order.
    pub search: Vec<OmegaTrial>,
}

impl CompleteTwin {
    pub fn return_times(&self) -> impl Iterator<Item = i64> {
        self.start + 1..=0
    }

    pub fn price_series(&self) -> Result<PriceSeries> {
        PriceSeries::new(self.s_eps.clone(), self.rho, self.bond_base)
    }

    pub fn discounted_price(&self, t: i64) -> Option<f64> {
        (self.start..=0).contains(&t).then(|| {
            self.s_eps[(t - self.start) as usize] / bond_value(self.bond_base, self.rho, t)
        })
    }

    /// `(1 + |t|)^M x_hat(t)` at any integer time, including the future.
    pub fn magnitude(&self, t: i64) -> f64 {
        let w = WeightConfig { m: self.weight_m };
        self.extension.evaluate(t) / w.weight(t)
    }

    pub fn magnitude_at(&self, t: i64) -> Option<f64> {
        (self.start + 1..=0)
            .contains(&t)
            .then(|| self.a_eps[(t - self.start - 1) as usize])
    }

    /// Fails with [`Error::NotWithinEpsilon`] if no grid point met epsilon.
    pub fn ensure_within_epsilon(&self) -> Result<&Self> {
        if self.within_epsilon {
            Ok(self)
        } else {
            Err(Error::NotWithinEpsilon {
                epsilon: self.epsilon,
                best_error: self.combined_error,
                best_omega: self.omega,
                sup_price_error: self.sup_price_error,
                sup_return_error: self.sup_return_error,
            })
        }
    }
}

/// Evenly spaced band limits from `omega_min` to `omega_max` inclusive.
pub fn omega_grid(omega_min: f64, omega_max: f64, steps: usize) -> Result<Vec<f64>> {
    BandSpec::new(omega_min)?;
    BandSpec::new(omega_max)?;
    if steps == 0 {
        return Err(Error::InvalidConfig(
            "omega grid needs at least one step".into(),
        ));
    }
    if steps == 1 {
        return Ok(vec![omega_min]);
    }
    if omega_min >= omega_max {
        return Err(Error::InvalidConfig(format!(
            "omega_min {omega_min} must be below omega_max {omega_max}"
        )));
    }
    let h = (omega_max - omega_min) / (steps - 1) as f64;
    Ok((0..steps)
        .map(|k| {
            if k + 1 == steps {
                omega_max
            } else {
                omega_min + h * k as f64
            }
        })
        .collect())
}

struct Prepared<'a> {
    prices: &'a PriceSeries,
    returns: ReturnSeries,
    zeta: Vec<i8>,
    x: SampledSignal,
    weights: WeightConfig,
}

impl<'a> Prepared<'a> {
    fn new(prices: &'a PriceSeries, weights: WeightConfig) -> Result<Self> {
        let returns = discount(prices)?;
        let (zeta, x) = decompose(&returns, &weights);
        Ok(Self {
            prices,
            returns,
            zeta,
            x,
            weights,
        })
    }

    fn assemble(&self, extension: BandLimitedExtension, epsilon: f64) -> CompleteTwin {
        let prices = self.prices;
        let a_eps: Vec<f64> = self
            .returns
            .times()
            .map(|t| extension.evaluate(t) / self.weights.weight(t))
            .collect();
        let xi_eps: Vec<f64> = a_eps
            .iter()
            .zip(&self.zeta)
            .map(|(a, &z)| f64::from(z) * a)
            .collect();
        let s_eps: Vec<f64> = compound(self.returns.reference_price(), &xi_eps)
            .into_iter()
            .zip(prices.times())
            .map(|(d, t)| d * prices.bond(t))
            .collect();

        let observed = prices.prices();
        let anchor_eps = s_eps[0];
        let anchor = observed[0];
        let mut sup_price_error = 0.0_f64;
        let mut sup_return_error = 0.0_f64;
        let mut combined_error = 0.0_f64;
        let mut weighted_l2_error = 0.0;
        let mut ratio_error = 0.0_f64;
        for (k, t) in prices.times().enumerate() {
            let price_gap = (s_eps[k] - observed[k]).abs();
            let return_gap = if k == 0 {
                0.0
            } else {
                (xi_eps[k - 1] - self.returns.xi()[k - 1]).abs()
            };
            let w = self.weights.weight(t);
            sup_price_error = sup_price_error.max(price_gap);
            sup_return_error = sup_return_error.max(return_gap);
            combined_error = combined_error.max(price_gap + return_gap);
            weighted_l2_error += (w * return_gap) * (w * return_gap);
            ratio_error = ratio_error.max((s_eps[k] / anchor_eps - observed[k] / anchor).abs());
        }

        let validity = Validity::check(prices.start() + 1, &a_eps);
        CompleteTwin {
            start: prices.start(),
            zeta: self.zeta.clone(),
            a_eps,
            xi_eps,
            s_eps,
            rho: prices.rho(),
            bond_base: prices.bond_base(),
            weight_m: self.weights.m(),
            omega: extension.spec.omega(),
            extension,
            epsilon,
            within_epsilon: combined_error < epsilon,
            sup_price_error,
            sup_return_error,
            combined_error,
            weighted_l2_error,
            ratio_error,
            validity,
            search: Vec::new(),
        }
    }

    fn scan(&self, omega_grid: &[f64], options: &FitOptions) -> Result<Vec<CompleteTwin>> {
        check_grid(omega_grid)?;
        omega_grid
            .par_iter()
            .map(|&omega| {
                let ext = fit_bandlimited(&self.x, BandSpec::new(omega)?, options)?;
                Ok(self.assemble(ext, f64::INFINITY))
            })
            .collect()
    }
}

fn check_grid(omega_grid: &[f64]) -> Result<()> {
    if omega_grid.is_empty() {
        return Err(Error::InvalidConfig("omega grid is empty".into()));
    }
    if omega_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidConfig(
            "omega grid must be strictly ascending".into(),
        ));
    }
    Ok(())
}

/// Smallest passing band limit, else the best error (ties to smaller omega).
fn select(mut candidates: Vec<CompleteTwin>, epsilon: f64) -> CompleteTwin {
    let search: Vec<OmegaTrial> = candidates
        .iter()
        .map(|c| OmegaTrial {
            omega: c.omega,
            combined_error: c.combined_error,
            sup_price_error: c.sup_price_error,
            sup_return_error: c.sup_return_error,
            fit_residual: c.extension.residual,
            rank: c.extension.rank,
            valid: c.validity.all_in_unit_interval,
        })
        .collect();
    let chosen = candidates
        .iter()
        .position(|c| c.combined_error < epsilon)
        .unwrap_or_else(|| {
            let mut best = 0;
            for (k, c) in candidates.iter().enumerate() {
                if c.combined_error < candidates[best].combined_error {
                    best = k;
                }
            }
            best
        });
    let mut twin = candidates.swap_remove(chosen);
    twin.epsilon = epsilon;
    twin.within_epsilon = twin.combined_error < epsilon;
    twin.search = search;
    twin
}

/// Searches the ascending `omega_grid` for the smallest band limit whose
/// twin satisfies `sup_t (|S_eps - S| + |xi_eps - xi|) < epsilon`.
///
/// If none does, the twin with the smallest error is returned with
/// `within_epsilon == false`; see [`CompleteTwin::ensure_within_epsilon`].
pub fn build_twin(
    prices: &PriceSeries,
    epsilon: f64,
    weights: &WeightConfig,
    omega_grid: &[f64],
    lambda: f64,
) -> Result<CompleteTwin> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    let prepared = Prepared::new(prices, *weights)?;
    let candidates = prepared.scan(omega_grid, &FitOptions::with_lambda(lambda))?;
    Ok(select(candidates, epsilon))
}

/// Twin built from a fixed extension of `x`, without any search.
pub fn assemble_twin(
    prices: &PriceSeries,
    weights: &WeightConfig,
    extension: BandLimitedExtension,
    epsilon: f64,
) -> Result<CompleteTwin> {
    let prepared = Prepared::new(prices, *weights)?;
    let mut twin = prepared.assemble(extension, epsilon);
    twin.within_epsilon = twin.combined_error < epsilon;
    Ok(twin)
}

/// Scans the grid once and returns the achieved errors per band limit.
pub fn scan_omegas(
    prices: &PriceSeries,
    weights: &WeightConfig,
    omega_grid: &[f64],
    lambda: f64,
) -> Result<Vec<OmegaTrial>> {
    let prepared = Prepared::new(prices, *weights)?;
    let candidates = prepared.scan(omega_grid, &FitOptions::with_lambda(lambda))?;
    Ok(select(candidates, f64::INFINITY).search)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub value: f64,
    pub bound: f64,
    pub pass: bool,
}

impl BoundCheck {
    fn below(value: f64, bound: f64) -> Self {
        Self {
            value,
            bound,
            pass: value < bound,
        }
    }
}

/// Closeness certificates for a twin against the observed prices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwinVerification {
    /// `sup_t (|S_eps - S| + |xi_eps - xi|) < epsilon` over the window.
    pub finite_window: BoundCheck,
    /// `sum_t (1 + |t|)^(-2M) (xi_eps - xi)^2 < epsilon`.
    pub weighted_returns: BoundCheck,
    /// `sup_{tau <= t <= 0} |S_eps(t)/S_eps(tau) - S(t)/S(tau)| < epsilon`.
    pub price_ratios: BoundCheck,
}

impl TwinVerification {
    pub fn pass(&self) -> bool {
        self.finite_window.pass && self.weighted_returns.pass && self.price_ratios.pass
    }
}

/// Recomputes the closeness bounds from scratch.
pub fn verify_twin(
    twin: &CompleteTwin,
    prices: &PriceSeries,
    epsilon: f64,
    tau: i64,
    weights: &WeightConfig,
) -> Result<TwinVerification> {
    if twin.start != prices.start() || twin.s_eps.len() != prices.len() {
        return Err(Error::InvalidConfig(
            "twin and prices cover different windows".into(),
        ));
    }
    if !(prices.start()..=0).contains(&tau) {
        return Err(Error::InvalidConfig(format!(
            "tau = {tau} lies outside the window {}..=0",
            prices.start()
        )));
    }
    let returns = discount(prices)?;
    let observed = prices.prices();
    let index = |t: i64| (t - prices.start()) as usize;

    let mut finite = 0.0_f64;
    let mut weighted = 0.0;
    for t in prices.times() {
        let k = index(t);
        let price_gap = (twin.s_eps[k] - observed[k]).abs();
        let return_gap = if k == 0 {
            0.0
        } else {
            (twin.xi_eps[k - 1] - returns.xi()[k - 1]).abs()
        };
        finite = finite.max(price_gap + return_gap);
        let w = weights.weight(t) * return_gap;
        weighted += w * w;
    }

    let (base_eps, base) = (twin.s_eps[index(tau)], observed[index(tau)]);
    let ratio = (tau..=0)
        .map(|t| (twin.s_eps[index(t)] / base_eps - observed[index(t)] / base).abs())
        .fold(0.0, f64::max);

    Ok(TwinVerification {
        finite_window: BoundCheck::below(finite, epsilon),
        weighted_returns: BoundCheck::below(weighted, epsilon),
        price_ratios: BoundCheck::below(ratio, epsilon),
    })
}
