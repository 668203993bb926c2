//! Serializable report shapes and their CSV flattenings.

use serde::{Deserialize, Serialize};
use twinmarket::{
    CompleteTwin, ExperimentReport, HypothesisTable, ReplicationPlan, SignPath, Validity,
};

use crate::config::RunConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwinRow {
    pub t: i64,
    pub price: f64,
    /// Empty at the first time, which has no return.
    pub xi: Option<f64>,
    pub zeta: Option<i8>,
    pub a_eps: Option<f64>,
    pub xi_eps: Option<f64>,
    pub s_eps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwinReport {
    pub config: RunConfig,
    pub observations: usize,
    pub returns_dropped: usize,
    /// Weighted norm of the magnitudes beyond the window.
    pub dropped_tail_norm: f64,
    pub within_epsilon: bool,
    pub omega: f64,
    pub omega_over_pi: f64,
    pub sup_price_error: f64,
    pub sup_return_error: f64,
    pub combined_error: f64,
    pub weighted_l2_error: f64,
    pub ratio_error: f64,
    pub validity: Validity,
    pub rows: Vec<TwinRow>,
    pub twin: CompleteTwin,
}

impl TwinReport {
    pub fn new(
        config: RunConfig,
        observed: &[f64],
        xi: &[f64],
        twin: CompleteTwin,
        observations: usize,
        dropped_tail_norm: f64,
    ) -> Self {
        let rows = (0..twin.s_eps.len())
            .map(|k| {
                let r = k.checked_sub(1);
                TwinRow {
                    t: twin.start + k as i64,
                    price: observed[k],
                    xi: r.map(|r| xi[r]),
                    zeta: r.map(|r| twin.zeta[r]),
                    a_eps: r.map(|r| twin.a_eps[r]),
                    xi_eps: r.map(|r| twin.xi_eps[r]),
                    s_eps: twin.s_eps[k],
                }
            })
            .collect();
        Self {
            config,
            observations,
            returns_dropped: observations - twin.s_eps.len(),
            dropped_tail_norm,
            within_epsilon: twin.within_epsilon,
            omega: twin.omega,
            omega_over_pi: twin.omega / std::f64::consts::PI,
            sup_price_error: twin.sup_price_error,
            sup_return_error: twin.sup_return_error,
            combined_error: twin.combined_error,
            weighted_l2_error: twin.weighted_l2_error,
            ratio_error: twin.ratio_error,
            validity: twin.validity.clone(),
            rows,
            twin,
        }
    }

    pub fn to_csv(&self) -> csv::Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in &self.rows {
            w.serialize(row)?;
        }
        finish(w)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClaimSpec {
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub strike: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub table: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub t: i64,
    pub magnitude: f64,
    pub up_probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceReport {
    pub config: RunConfig,
    pub claim: ClaimSpec,
    pub s: i64,
    pub q: i64,
    /// Discounted stock price at `s`.
    pub spot: f64,
    pub bond_at_s: f64,
    pub steps: Vec<Step>,
    /// Martingale expectation of the discounted claim.
    pub price: f64,
    /// Cost of the hedge at `s`, in money of time `s`.
    pub initial_wealth: f64,
}

impl PriceReport {
    pub fn to_csv(&self) -> csv::Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["s", "q", "spot", "price", "initial_wealth"])?;
        w.write_record([
            self.s.to_string(),
            self.q.to_string(),
            self.spot.to_string(),
            self.price.to_string(),
            self.initial_wealth.to_string(),
        ])?;
        finish(w)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRow {
    pub t: i64,
    /// Moves taken since `s`, `u` or `d` per step.
    pub path: String,
    pub wealth: f64,
    pub beta: f64,
    pub gamma: f64,
    pub stock: f64,
    pub bond: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationReport {
    #[serde(flatten)]
    pub pricing: PriceReport,
    /// Largest terminal miss over all paths when the hedge is run forward.
    pub residual: f64,
    pub self_financing_gap: f64,
    pub nodes: Vec<NodeRow>,
}

impl ReplicationReport {
    pub fn nodes_from(plan: &ReplicationPlan) -> Vec<NodeRow> {
        plan.levels
            .iter()
            .enumerate()
            .flat_map(|(k, level)| {
                level.iter().enumerate().map(move |(prefix, node)| NodeRow {
                    t: plan.s + k as i64,
                    path: SignPath {
                        bits: prefix as u32,
                        len: k,
                    }
                    .to_string(),
                    wealth: node.wealth,
                    beta: node.beta,
                    gamma: node.gamma,
                    stock: node.stock,
                    bond: node.bond,
                })
            })
            .collect()
    }

    pub fn to_csv(&self) -> csv::Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for node in &self.nodes {
            w.serialize(node)?;
        }
        finish(w)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOutput {
    pub config: RunConfig,
    #[serde(flatten)]
    pub report: ExperimentReport,
}

impl ExperimentOutput {
    pub fn to_csv(&self) -> csv::Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["t", "rounded_gap_ticks"])?;
        for (t, gap) in &self.report.per_time_rounded_gap {
            w.write_record([t.to_string(), gap.to_string()])?;
        }
        finish(w)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisOutput {
    pub config: RunConfig,
    #[serde(flatten)]
    pub table: HypothesisTable,
}

impl HypothesisOutput {
    pub fn to_csv(&self) -> csv::Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in &self.table.rows {
            w.serialize(row)?;
        }
        finish(w)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationOutput {
    pub config: RunConfig,
    pub spec: twinmarket::IncompleteModelSpec,
    pub prices: Vec<(i64, f64)>,
}

fn finish(w: csv::Writer<Vec<u8>>) -> csv::Result<String> {
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
