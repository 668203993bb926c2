//! Incomplete-model simulators and the indistinguishability experiments.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::{
    bond_value, build_twin, scan_omegas, CompleteTwin, OmegaTrial, PriceSeries, Validity,
    WeightConfig,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// Symmetric steps `+/- d(t)`, `d(t) ~ U[low, high]`, fair sign.
    RandomSizeBinomial,
    /// Independent up and down sizes `d_up, d_down ~ U[low, high]`; the up
    /// move is taken with the martingale probability
    /// `d_down / (d_up + d_down)`.
    IidUniformMagnitude,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IncompleteModelSpec {
    pub kind: ModelKind,
    pub magnitude_low: f64,
    pub magnitude_high: f64,
    /// Number of returns; prices run from `-horizon` to 0.
    pub horizon: usize,
    pub seed: u64,
    pub rho: f64,
    pub initial_price: f64,
}

impl IncompleteModelSpec {
    /// Random-size binomial with unit bond and no interest.
    pub fn binomial(low: f64, high: f64, horizon: usize, seed: u64, initial_price: f64) -> Self {
        Self {
            kind: ModelKind::RandomSizeBinomial,
            magnitude_low: low,
            magnitude_high: high,
            horizon,
            seed,
            rho: 1.0,
            initial_price,
        }
    }

    /// Seed 42, 64 steps with magnitudes in `[0.005, 0.05]` from 100.
    pub fn golden() -> Self {
        Self::binomial(0.005, 0.05, 64, 42, 100.0)
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = (self.magnitude_low, self.magnitude_high);
        if !(lo > 0.0 && lo <= hi && hi < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "magnitude bounds must satisfy 0 < low <= high < 1, got [{lo}, {hi}]"
            )));
        }
        if self.horizon < 2 {
            return Err(Error::InvalidConfig(format!(
                "horizon must be at least 2, got {}",
                self.horizon
            )));
        }
        if !(self.rho.is_finite() && self.rho >= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "rho must be >= 1, got {}",
                self.rho
            )));
        }
        if !(self.initial_price.is_finite() && self.initial_price > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "initial price must be positive, got {}",
                self.initial_price
            )));
        }
        Ok(())
    }
}

/// Draws one price path; identical specs give identical paths.
pub fn simulate_incomplete(spec: &IncompleteModelSpec) -> Result<PriceSeries> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (lo, hi) = (spec.magnitude_low, spec.magnitude_high);
    let n = spec.horizon as i64;

    let mut discounted = spec.initial_price / bond_value(1.0, spec.rho, -n);
    let mut prices = Vec::with_capacity(spec.horizon + 1);
    prices.push(spec.initial_price);
    for t in 1 - n..=0 {
        let xi = match spec.kind {
            ModelKind::RandomSizeBinomial => {
                let d = rng.gen_range(lo..=hi);
                if rng.gen_bool(0.5) {
                    d
                } else {
                    -d
                }
            }
            ModelKind::IidUniformMagnitude => {
                let up = rng.gen_range(lo..=hi);
                let down = rng.gen_range(lo..=hi);
                if rng.gen_bool(down / (up + down)) {
                    up
                } else {
                    -down
                }
            }
        };
        discounted *= 1.0 + xi;
        prices.push(discounted * bond_value(1.0, spec.rho, t));
    }
    PriceSeries::new(prices, spec.rho, 1.0)
}

/// Grid index `round(price / tick)` with halves rounded up.
fn tick_index(price: f64, tick: f64) -> i64 {
    (price / tick + 0.5).floor() as i64
}

/// `index * tick`, computed as `index / (1 / tick)` when `1 / tick` is an
/// integer so that decimal ticks land on the nearest double.
fn tick_value(index: i64, tick: f64) -> f64 {
    let per_unit = (1.0 / tick).round();
    if per_unit >= 1.0 && (per_unit * tick - 1.0).abs() < 1e-12 {
        index as f64 / per_unit
    } else {
        index as f64 * tick
    }
}

/// Rounds every price to the nearest multiple of `tick`, halves up.
pub fn round_to_tick(prices: &PriceSeries, tick: f64) -> Result<PriceSeries> {
    check_tick(tick)?;
    let rounded: Vec<f64> = prices
        .prices()
        .iter()
        .map(|&p| tick_value(tick_index(p, tick), tick))
        .collect();
    if let Some((k, &value)) = rounded.iter().enumerate().find(|(_, &v)| v <= 0.0) {
        return Err(Error::RoundedToZero {
            t: prices.start() + k as i64,
            value,
            tick,
        });
    }
    PriceSeries::new(rounded, prices.rho(), prices.bond_base())
}

fn check_tick(tick: f64) -> Result<()> {
    if tick.is_finite() && tick > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!(
            "tick must be positive, got {tick}"
        )))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub spec: IncompleteModelSpec,
    pub epsilon: f64,
    pub tick: f64,
    /// Set when `epsilon > tick / 2`, where rounding need not hide the gap.
    pub epsilon_exceeds_half_tick: bool,
    pub within_epsilon: bool,
    pub sup_price_error: f64,
    pub sup_return_error: f64,
    pub combined_error: f64,
    pub omega_used: f64,
    /// `(t, |round(S_eps(t)) - round(S(t))| / tick)`
    pub per_time_rounded_gap: Vec<(i64, u64)>,
    pub max_rounded_gap: u64,
    pub fraction_rounded_equal: f64,
    /// False exactly when a valid complete twin within epsilon was found.
    pub h_a_rejectable: bool,
    pub twin_validity: Validity,
    pub omega_search: Vec<OmegaTrial>,
}

/// Simulates an incomplete path, builds its twin and compares both after
/// rounding to `tick`.
pub fn indistinguishability_experiment(
    spec: &IncompleteModelSpec,
    epsilon: f64,
    tick: f64,
    weights: &WeightConfig,
    omega_grid: &[f64],
    lambda: f64,
) -> Result<ExperimentReport> {
    check_tick(tick)?;
    let prices = simulate_incomplete(spec)?;
    let twin = build_twin(&prices, epsilon, weights, omega_grid, lambda)?;
    Ok(compare_rounded(spec, &prices, &twin, tick))
}

pub(crate) fn compare_rounded(
    spec: &IncompleteModelSpec,
    prices: &PriceSeries,
    twin: &CompleteTwin,
    tick: f64,
) -> ExperimentReport {
    let per_time_rounded_gap: Vec<(i64, u64)> = prices
        .times()
        .zip(prices.prices().iter().zip(&twin.s_eps))
        .map(|(t, (&s, &s_eps))| {
            let gap = tick_index(s_eps, tick) - tick_index(s, tick);
            (t, gap.unsigned_abs())
        })
        .collect();
    let equal = per_time_rounded_gap.iter().filter(|(_, g)| *g == 0).count();
    ExperimentReport {
        spec: *spec,
        epsilon: twin.epsilon,
        tick,
        epsilon_exceeds_half_tick: twin.epsilon > tick / 2.0,
        within_epsilon: twin.within_epsilon,
        sup_price_error: twin.sup_price_error,
        sup_return_error: twin.sup_return_error,
        combined_error: twin.combined_error,
        omega_used: twin.omega,
        max_rounded_gap: per_time_rounded_gap
            .iter()
            .map(|&(_, g)| g)
            .max()
            .unwrap_or(0),
        fraction_rounded_equal: equal as f64 / per_time_rounded_gap.len() as f64,
        per_time_rounded_gap,
        h_a_rejectable: !(twin.within_epsilon && twin.validity.all_in_unit_interval),
        twin_validity: twin.validity.clone(),
        omega_search: twin.search.clone(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HypothesisRow {
    pub epsilon: f64,
    pub feasible: bool,
    /// Smallest passing band limit, or the best one when infeasible.
    pub omega: f64,
    pub combined_error: f64,
    pub valid: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisTable {
    pub rows: Vec<HypothesisRow>,
    /// Feasibility never returns once lost along the descending epsilons.
    pub monotone: bool,
}

/// Feasibility of a complete twin for each epsilon (descending).
pub fn hypothesis_report(
    prices: &PriceSeries,
    epsilons: &[f64],
    weights: &WeightConfig,
    omega_grid: &[f64],
    lambda: f64,
) -> Result<HypothesisTable> {
    if epsilons.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::InvalidConfig("epsilons must be positive".into()));
    }
    if epsilons.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::InvalidConfig(
            "epsilons must be sorted descending".into(),
        ));
    }
    let trials = scan_omegas(prices, weights, omega_grid, lambda)?;
    let best = trials
        .iter()
        .fold(None::<&OmegaTrial>, |b, t| match b {
            Some(b) if b.combined_error <= t.combined_error => Some(b),
            _ => Some(t),
        })
        .expect("grid is nonempty");

    let rows: Vec<HypothesisRow> = epsilons
        .iter()
        .map(|&epsilon| {
            let pick = trials.iter().find(|t| t.combined_error < epsilon);
            let trial = pick.unwrap_or(best);
            HypothesisRow {
                epsilon,
                feasible: pick.is_some(),
                omega: trial.omega,
                combined_error: trial.combined_error,
                valid: trial.valid,
            }
        })
        .collect();
    let monotone = rows.windows(2).all(|w| w[0].feasible || !w[1].feasible);
    Ok(HypothesisTable { rows, monotone })
}

/// The twin's magnitudes at future times `1..=horizon`, as an agent at
/// time 0 would compute them from the past.
pub fn predictability_demo(twin: &CompleteTwin, horizon: usize) -> Vec<(i64, f64)> {
    (1..=horizon as i64)
        .map(|t| (t, twin.magnitude(t)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::discount;
    use std::f64::consts::PI;

    #[test]
    fn zero_width_magnitudes_are_constant() {
        let spec = IncompleteModelSpec::binomial(0.02, 0.02, 30, 7, 50.0);
        let returns = discount(&simulate_incomplete(&spec).unwrap()).unwrap();
        for &xi in returns.xi() {
            assert!((xi.abs() - 0.02).abs() < 1e-12);
        }
    }

    #[test]
    fn simulation_is_deterministic() {
        for kind in [
            ModelKind::RandomSizeBinomial,
            ModelKind::IidUniformMagnitude,
        ] {
            let spec = IncompleteModelSpec {
                kind,
                ..IncompleteModelSpec::golden()
            };
            let a = simulate_incomplete(&spec).unwrap();
            let b = simulate_incomplete(&spec).unwrap();
            assert_eq!(a, b);
            let other = simulate_incomplete(&IncompleteModelSpec { seed: 43, ..spec }).unwrap();
            assert_ne!(a, other);
        }
    }

    #[test]
    fn simulated_window_and_growth() {
        let spec = IncompleteModelSpec {
            rho: 1.01,
            ..IncompleteModelSpec::golden()
        };
        let s = simulate_incomplete(&spec).unwrap();
        assert_eq!(s.start(), -64);
        assert_eq!(s.prices()[0], 100.0);
        for &xi in discount(&s).unwrap().xi() {
            assert!(xi.abs() >= 0.005 - 1e-12 && xi.abs() <= 0.05 + 1e-12);
        }
    }

    #[test]
    fn spec_validation() {
        let g = IncompleteModelSpec::golden();
        for bad in [
            IncompleteModelSpec {
                magnitude_low: 0.0,
                ..g
            },
            IncompleteModelSpec {
                magnitude_low: 0.06,
                ..g
            },
            IncompleteModelSpec {
                magnitude_high: 1.0,
                ..g
            },
            IncompleteModelSpec { horizon: 1, ..g },
            IncompleteModelSpec { rho: 0.9, ..g },
            IncompleteModelSpec {
                initial_price: 0.0,
                ..g
            },
        ] {
            assert!(simulate_incomplete(&bad).is_err());
        }
    }

    #[test]
    fn rounding_examples() {
        let s = PriceSeries::new(vec![100.004, 100.01, 100.005], 1.0, 1.0).unwrap();
        let r = round_to_tick(&s, 0.01).unwrap();
        assert_eq!(r.prices(), &[100.0, 100.01, 100.01]);
        assert_eq!(round_to_tick(&r, 0.01).unwrap(), r);

        let tiny = PriceSeries::new(vec![0.004, 1.0], 1.0, 1.0).unwrap();
        assert!(matches!(
            round_to_tick(&tiny, 0.01),
            Err(Error::RoundedToZero { t: -1, .. })
        ));
        assert!(round_to_tick(&tiny, 0.0).is_err());
    }

    #[test]
    fn identical_twin_has_no_gaps() {
        let spec = IncompleteModelSpec::binomial(0.01, 0.01, 16, 3, 100.0);
        let prices = simulate_incomplete(&spec).unwrap();
        let mut twin =
            build_twin(&prices, 1.0, &WeightConfig::unweighted(), &[0.9 * PI], 0.0).unwrap();
        twin.s_eps = prices.prices().to_vec();
        let report = compare_rounded(&spec, &prices, &twin, 0.01);
        assert!(report.per_time_rounded_gap.iter().all(|&(_, g)| g == 0));
        assert_eq!(report.fraction_rounded_equal, 1.0);
    }

    #[test]
    fn tick_warning_flag() {
        let grid: Vec<f64> = (0..12).map(|k| (0.5 + 0.045 * k as f64) * PI).collect();
        let spec = IncompleteModelSpec::golden();
        let w = WeightConfig::unweighted();
        let report = indistinguishability_experiment(&spec, 0.008, 0.01, &w, &grid, 0.0).unwrap();
        assert!(report.epsilon_exceeds_half_tick);
        let report = indistinguishability_experiment(&spec, 0.004, 0.01, &w, &grid, 0.0).unwrap();
        assert!(!report.epsilon_exceeds_half_tick);
    }

    #[test]
    fn fine_tick_exposes_the_twin() {
        let grid: Vec<f64> = (0..12).map(|k| (0.5 + 0.045 * k as f64) * PI).collect();
        let report = indistinguishability_experiment(
            &IncompleteModelSpec::golden(),
            0.004,
            1e-8,
            &WeightConfig::unweighted(),
            &grid,
            0.0,
        )
        .unwrap();
        assert!(report.within_epsilon);
        assert!(report.fraction_rounded_equal < 1.0);
        let max_ticks = (0.004 / 1e-8) as u64 + 1;
        assert!(report.max_rounded_gap <= max_ticks);
    }

    #[test]
    fn hypothesis_rows_are_monotone() {
        let prices = simulate_incomplete(&IncompleteModelSpec::golden()).unwrap();
        let grid: Vec<f64> = (0..12).map(|k| (0.5 + 0.045 * k as f64) * PI).collect();
        let eps = [1.0, 0.05, 0.01, 0.002, 1e-6, 1e-12];
        let table =
            hypothesis_report(&prices, &eps, &WeightConfig::unweighted(), &grid, 0.0).unwrap();
        assert!(table.monotone);
        assert!(table.rows[0].feasible);
        let omegas: Vec<f64> = table
            .rows
            .iter()
            .filter(|r| r.feasible)
            .map(|r| r.omega)
            .collect();
        assert!(omegas.windows(2).all(|w| w[0] <= w[1]));
        assert!(hypothesis_report(
            &prices,
            &[0.01, 0.05],
            &WeightConfig::unweighted(),
            &grid,
            0.0
        )
        .is_err());
    }

    #[test]
    fn large_epsilon_is_trivially_feasible() {
        let prices = simulate_incomplete(&IncompleteModelSpec::golden()).unwrap();
        let sup_xi = discount(&prices)
            .unwrap()
            .xi()
            .iter()
            .fold(0.0, |m: f64, x| m.max(x.abs()));
        let sup_gap = 100.0 * 4.0; // generous price-level bound
        let table = hypothesis_report(
            &prices,
            &[sup_gap + sup_xi],
            &WeightConfig::unweighted(),
            &[0.1],
            0.0,
        )
        .unwrap();
        assert!(table.rows[0].feasible);
    }

    #[test]
    fn predictability_demo_boundaries() {
        let prices = simulate_incomplete(&IncompleteModelSpec::golden()).unwrap();
        let twin = build_twin(&prices, 1.0, &WeightConfig::unweighted(), &[0.9 * PI], 0.0).unwrap();
        assert!(predictability_demo(&twin, 0).is_empty());
        let demo = predictability_demo(&twin, 3);
        assert_eq!(demo.iter().map(|p| p.0).collect::<Vec<_>>(), vec![1, 2, 3]);

        let mut zero = twin.clone();
        zero.extension
            .coefficients
            .iter_mut()
            .for_each(|c| *c = 0.0);
        assert!(predictability_demo(&zero, 5).iter().all(|&(_, a)| a == 0.0));
    }
}
