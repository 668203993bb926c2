//! Pricing and replication in a binomial model with predictable step sizes.
//!
//! Between `s` and `q` the discounted price moves as
//! `S~(t) = S~(t-1) (1 +/- a(t))`, where every `a(t)` is known at time `s`.
//! The two-point conditional law leaves exactly one martingale measure (up
//! probability 1/2 at every step), so every claim on the sign tree has a
//! unique price and a self-financing hedge that reproduces it on every path.
//!
//! Tree nodes are addressed by `(level, prefix)`: bit `k` of `prefix` is set
//! when step `k` (from `s + k` to `s + k + 1`) went up.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::bond_value;

/// Deepest tree the engine will build.
pub const MAX_DEPTH: usize = 24;

/// Step magnitudes `a(s + 1), ..., a(q)` known at time `s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictableMagnitudes {
    s: i64,
    q: i64,
    a: Vec<f64>,
}

impl PredictableMagnitudes {
    /// `a[k]` is the magnitude of the step ending at `s + k + 1`.
    pub fn new(s: i64, q: i64, a: Vec<f64>) -> Result<Self> {
        if q < s {
            return Err(Error::InvalidConfig(format!("s = {s} is after q = {q}")));
        }
        if a.len() as i64 != q - s {
            return Err(Error::InvalidConfig(format!(
                "{} magnitudes for {} steps",
                a.len(),
                q - s
            )));
        }
        Ok(Self { s, q, a })
    }

    /// Magnitudes starting at `s = 0`.
    pub fn from_steps(a: Vec<f64>) -> Self {
        let q = a.len() as i64;
        Self { s: 0, q, a }
    }

    pub fn s(&self) -> i64 {
        self.s
    }

    pub fn q(&self) -> i64 {
        self.q
    }

    pub fn steps(&self) -> &[f64] {
        &self.a
    }

    pub fn depth(&self) -> usize {
        self.a.len()
    }

    fn validate(&self) -> Result<()> {
        if let Some(k) = self.a.iter().position(|&a| !(a > 0.0 && a < 1.0)) {
            return Err(Error::InvalidMagnitude {
                t: self.s + 1 + k as i64,
                value: self.a[k],
            });
        }
        if self.depth() > MAX_DEPTH {
            return Err(Error::DepthTooLarge {
                depth: self.depth(),
                max: MAX_DEPTH,
            });
        }
        Ok(())
    }

    /// Discounted price at every node of `level`, indexed by prefix.
    fn level_prices(&self, s_price: f64, level: usize) -> Vec<f64> {
        let mut prices = vec![s_price];
        for &a in &self.a[..level] {
            let down = prices.iter().map(|p| p * (1.0 - a));
            let up: Vec<f64> = prices.iter().map(|p| p * (1.0 + a)).collect();
            prices = down.chain(up).collect();
        }
        prices
    }
}

/// The up/down pattern of one path through the tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SignPath {
    pub bits: u32,
    pub len: usize,
}

impl SignPath {
    pub fn is_up(&self, step: usize) -> bool {
        self.bits >> step & 1 == 1
    }

    pub fn signs(&self) -> impl Iterator<Item = i8> + '_ {
        (0..self.len).map(|k| if self.is_up(k) { 1 } else { -1 })
    }

    /// Discounted prices along the path, `s..=q`.
    pub fn prices(&self, mags: &PredictableMagnitudes, s_price: f64) -> Vec<f64> {
        let mut level = s_price;
        let mut path = vec![level];
        for (k, &a) in mags.steps().iter().enumerate().take(self.len) {
            level *= if self.is_up(k) { 1.0 + a } else { 1.0 - a };
            path.push(level);
        }
        path
    }
}

impl fmt::Display for SignPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for k in 0..self.len {
            f.write_str(if self.is_up(k) { "u" } else { "d" })?;
        }
        Ok(())
    }
}

type TerminalFn = dyn Fn(f64) -> f64 + Send + Sync;
type PathFn = dyn Fn(SignPath) -> f64 + Send + Sync;

/// A claim `psi` settled at `q`, in discounted units.
#[derive(Clone)]
pub enum Claim {
    /// Function of the discounted terminal price `S~(q)`.
    Terminal(Arc<TerminalFn>),
    /// Function of the whole sign path.
    Path(Arc<PathFn>),
}

impl Claim {
    pub fn terminal(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Claim::Terminal(Arc::new(f))
    }

    pub fn path(f: impl Fn(SignPath) -> f64 + Send + Sync + 'static) -> Self {
        Claim::Path(Arc::new(f))
    }

    pub fn call(strike: f64) -> Self {
        Self::terminal(move |s| (s - strike).max(0.0))
    }

    pub fn put(strike: f64) -> Self {
        Self::terminal(move |s| (strike - s).max(0.0))
    }

    pub fn forward() -> Self {
        Self::terminal(|s| s)
    }

    pub fn constant(c: f64) -> Self {
        Self::terminal(move |_| c)
    }

    /// Payoff table indexed by the path bits.
    pub fn table(payoffs: Vec<f64>) -> Self {
        Self::path(move |p| payoffs[p.bits as usize])
    }

    pub fn payoff(&self, path: SignPath, terminal_price: f64) -> f64 {
        match self {
            Claim::Terminal(f) => f(terminal_price),
            Claim::Path(f) => f(path),
        }
    }

    fn terminal_values(&self, mags: &PredictableMagnitudes, s_price: f64) -> Vec<f64> {
        let depth = mags.depth();
        mags.level_prices(s_price, depth)
            .into_iter()
            .enumerate()
            .map(|(bits, p)| {
                self.payoff(
                    SignPath {
                        bits: bits as u32,
                        len: depth,
                    },
                    p,
                )
            })
            .collect()
    }
}

impl fmt::Debug for Claim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Claim::Terminal(_) => f.write_str("Claim::Terminal(..)"),
            Claim::Path(_) => f.write_str("Claim::Path(..)"),
        }
    }
}

/// Up-probability of the unique martingale measure at every step.
///
/// For discounted returns `{-d_down, +d_up}` the martingale condition gives
/// `p = d_down / (d_up + d_down)`; with `d_up = d_down = a(t)` this is 1/2.
pub fn martingale_prob(mags: &PredictableMagnitudes) -> Result<Vec<f64>> {
    mags.validate()?;
    Ok(mags.steps().iter().map(|&a| a / (a + a)).collect())
}

/// Fair price `E*[psi]` by backward induction.
pub fn price(claim: &Claim, mags: &PredictableMagnitudes, s_price: f64) -> Result<f64> {
    check_price(s_price)?;
    let probs = martingale_prob(mags)?;
    let mut values = claim.terminal_values(mags, s_price);
    for &p in probs.iter().rev() {
        values = fold_level(&values, p);
    }
    Ok(values[0])
}

fn fold_level(children: &[f64], p: f64) -> Vec<f64> {
    let (down, up) = children.split_at(children.len() / 2);
    down.iter()
        .zip(up)
        .map(|(d, u)| p * u + (1.0 - p) * d)
        .collect()
}

fn check_price(s_price: f64) -> Result<()> {
    if s_price.is_finite() && s_price > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!(
            "discounted price must be positive, got {s_price}"
        )))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanNode {
    /// Wealth `X(t)`.
    pub wealth: f64,
    /// Bond units held over `(t, t + 1]`.
    pub beta: f64,
    /// Stock units held over `(t, t + 1]`.
    pub gamma: f64,
    /// Stock price `S(t)`.
    pub stock: f64,
    /// Bond price `B(t)`.
    pub bond: f64,
}

/// Holdings at every node of the sign tree.
///
/// Terminal nodes hold the payoff entirely in bonds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationPlan {
    pub s: i64,
    /// `levels[k][prefix]` is the node at time `s + k`.
    pub levels: Vec<Vec<PlanNode>>,
    pub initial_wealth: f64,
    pub depth: usize,
}

impl ReplicationPlan {
    pub fn node(&self, level: usize, prefix: u32) -> &PlanNode {
        &self.levels[level][prefix as usize]
    }

    pub fn node_mut(&mut self, level: usize, prefix: u32) -> &mut PlanNode {
        &mut self.levels[level][prefix as usize]
    }

    /// Largest violation of `X = beta B + gamma S` at a node, or of
    /// `X(child) = beta B(t+1) + gamma S(child)` for either child.
    pub fn max_self_financing_gap(&self) -> f64 {
        let mut gap = 0.0_f64;
        for (k, level) in self.levels.iter().enumerate() {
            for (prefix, node) in level.iter().enumerate() {
                let held = node.beta * node.bond + node.gamma * node.stock;
                gap = gap.max((held - node.wealth).abs());
                if k < self.depth {
                    let next = &self.levels[k + 1];
                    for child in [prefix, prefix | 1 << k] {
                        let c = &next[child];
                        let carried = node.beta * c.bond + node.gamma * c.stock;
                        gap = gap.max((carried - c.wealth).abs());
                    }
                }
            }
        }
        gap
    }
}

/// Self-financing hedge delivering `B(q) B(s)^-1 psi` at `q`.
pub fn replicate(
    claim: &Claim,
    mags: &PredictableMagnitudes,
    s_price: f64,
    bond_base: f64,
    rho: f64,
) -> Result<ReplicationPlan> {
    check_price(s_price)?;
    check_bond(bond_base, rho)?;
    let probs = martingale_prob(mags)?;
    let depth = mags.depth();
    let bond = |k: usize| bond_value(bond_base, rho, k as i64);

    // Discounted wealth at each level, discounted by B(t) / B(s).
    let mut discounted = vec![claim.terminal_values(mags, s_price)];
    for &p in probs.iter().rev() {
        let next = fold_level(discounted.last().unwrap(), p);
        discounted.push(next);
    }
    discounted.reverse();

    let mut levels: Vec<Vec<PlanNode>> = (0..=depth)
        .map(|k| {
            let b = bond(k);
            mags.level_prices(s_price, k)
                .into_iter()
                .zip(&discounted[k])
                .map(|(p, x)| PlanNode {
                    wealth: x * b / bond_base,
                    beta: x / bond_base,
                    gamma: 0.0,
                    stock: p * b,
                    bond: b,
                })
                .collect()
        })
        .collect();

    for k in 0..depth {
        let (head, tail) = levels.split_at_mut(k + 1);
        let children = &tail[0];
        let half = children.len() / 2;
        for (prefix, node) in head[k].iter_mut().enumerate() {
            let down = &children[prefix];
            let up = &children[prefix + half];
            let spread = up.stock - down.stock;
            if spread == 0.0 {
                return Err(Error::DegenerateSpread {
                    t: mags.s() + k as i64 + 1,
                });
            }
            node.gamma = (up.wealth - down.wealth) / spread;
            node.beta = (node.wealth - node.gamma * node.stock) / node.bond;
        }
    }

    Ok(ReplicationPlan {
        s: mags.s(),
        initial_wealth: levels[0][0].wealth,
        levels,
        depth,
    })
}

fn check_bond(bond_base: f64, rho: f64) -> Result<()> {
    if !(bond_base.is_finite() && bond_base > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "bond price must be positive, got {bond_base}"
        )));
    }
    if !(rho.is_finite() && rho >= 1.0) {
        return Err(Error::InvalidConfig(format!("rho must be >= 1, got {rho}")));
    }
    Ok(())
}

/// Runs the plan forward on every path and returns the largest terminal
/// miss `|X(q) - B(q) B(s)^-1 psi|`.
///
/// Prices along each path are regenerated from the magnitudes; only the
/// holdings `(beta, gamma)` and the initial wealth come from the plan.
pub fn verify_replication(
    plan: &ReplicationPlan,
    claim: &Claim,
    mags: &PredictableMagnitudes,
    s_price: f64,
    bond_base: f64,
    rho: f64,
) -> f64 {
    let depth = mags.depth();
    let bond = |k: usize| bond_value(bond_base, rho, k as i64);
    let growth = bond(depth) / bond_base;
    let mut worst = 0.0_f64;
    for bits in 0..1u32 << depth {
        let path = SignPath { bits, len: depth };
        let discounted = path.prices(mags, s_price);
        let stock = |k: usize| discounted[k] * bond(k);
        let mut wealth = plan.initial_wealth;
        let mut prefix = 0u32;
        for k in 0..depth {
            let node = plan.node(k, prefix);
            wealth += node.beta * (bond(k + 1) - bond(k)) + node.gamma * (stock(k + 1) - stock(k));
            if path.is_up(k) {
                prefix |= 1 << k;
            }
        }
        let target = growth * claim.payoff(path, discounted[depth]);
        worst = worst.max((wealth - target).abs());
    }
    worst
}

/// Outcome of the two-point completeness check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrrVerdict {
    pub complete: bool,
    pub first_violation: Option<(i64, f64)>,
}

/// Checks that every step is two-point with `d_down = d_up = a(t)` in `(0, 1)`.
pub fn check_crr_completeness(mags: &PredictableMagnitudes) -> CrrVerdict {
    let first_violation = mags
        .steps()
        .iter()
        .enumerate()
        .find(|(_, &a)| !(a > 0.0 && a < 1.0))
        .map(|(k, &a)| (mags.s() + 1 + k as i64, a));
    CrrVerdict {
        complete: first_violation.is_none(),
        first_violation,
    }
}
