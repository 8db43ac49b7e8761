//! Monte Carlo cross-validation of the backward-induction engine.
//!
//! Period transitions use the exact lognormal law (no time discretization),
//! so any disagreement with the grid solver isolates interpolation or
//! quadrature error rather than simulation bias. Paths are generated in
//! fixed-size batches, each on its own counter-derived RNG stream, so results
//! are bit-identical regardless of how the batches are scheduled across
//! threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use thiserror::Error;

use crate::contract::{
    evolve_wealth, surrender_cashflow, terminal_payoff, withdrawal_cashflow, ContractSpec,
    MarketParams, State,
};
use crate::engine::{PolicyAction, PolicyMap};

/// Smallest path count for which statistics are reported.
pub const MIN_PATHS: usize = 1000;

/// Paths (or antithetic pairs) simulated per RNG stream.
const BATCH_SIZE: usize = 2048;

#[derive(Debug, Clone)]
pub struct McConfig {
    /// Total number of simulated paths. With antithetic sampling the count is
    /// rounded down to an even number and paths come in mirrored pairs.
    pub paths: usize,
    pub seed: u64,
    pub antithetic: bool,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            paths: 200_000,
            seed: 20150731,
            antithetic: true,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
    /// Paths actually simulated.
    pub paths: usize,
}

#[derive(Debug, Error)]
pub enum McError {
    #[error("need at least {MIN_PATHS} paths for a reported statistic, got {0}")]
    TooFewPaths(usize),
    #[error("policy map covers {got} jump dates, contract has {expected}")]
    PolicyDateMismatch { expected: usize, got: usize },
    #[error("policy map grid is inconsistent with the contract: {0}")]
    PolicyGridMismatch(&'static str),
}

/// Prices the static strategy by simulation: the contractual amount (capped
/// at the remaining guarantee) is withdrawn at every date, and maturity pays
/// the terminal payoff. Returns the discounted-cashflow mean and its
/// standard error.
pub fn mc_price_static(
    contract: &ContractSpec,
    params: &MarketParams,
    cfg: &McConfig,
) -> Result<McEstimate, McError> {
    let n = contract.num_dates();
    let plan = SimPlan::new(contract, params);
    run_paths(cfg, n, |zs| plan.static_path_value(zs))
}

/// Prices an arbitrary exported policy by simulation. Any implementable
/// policy values at or below the optimum, so the estimate is a statistical
/// lower bound on the corresponding dynamic-programming price.
pub fn mc_price_policy(
    contract: &ContractSpec,
    params: &MarketParams,
    policy: &PolicyMap,
    cfg: &McConfig,
) -> Result<McEstimate, McError> {
    let n = contract.num_dates();
    if policy.num_jump_dates() != n - 1 {
        return Err(McError::PolicyDateMismatch {
            expected: n - 1,
            got: policy.num_jump_dates(),
        });
    }
    if policy.w_nodes.len() < 2 || policy.w_nodes.windows(2).any(|w| w[1] <= w[0]) {
        return Err(McError::PolicyGridMismatch("wealth nodes not increasing"));
    }
    if policy.a_nodes.is_empty()
        || (policy.a_nodes.last().unwrap() - contract.premium).abs() > 1e-6 * contract.premium
    {
        return Err(McError::PolicyGridMismatch(
            "guarantee nodes do not end at the premium",
        ));
    }
    let plan = SimPlan::new(contract, params);
    run_paths(cfg, n, |zs| plan.policy_path_value(zs, policy))
}

/// Precomputed per-date quantities shared by all paths.
struct SimPlan<'a> {
    contract: &'a ContractSpec,
    params: &'a MarketParams,
    fee: f64,
    discounts: Vec<f64>,
    contractual: Vec<f64>,
}

impl<'a> SimPlan<'a> {
    fn new(contract: &'a ContractSpec, params: &'a MarketParams) -> Self {
        let n = contract.num_dates();
        SimPlan {
            contract,
            params,
            fee: contract.fee_rate(),
            discounts: (1..=n).map(|k| params.discount_to(k)).collect(),
            contractual: (1..=n).map(|k| contract.contractual_amount(k)).collect(),
        }
    }

    fn static_path_value(&self, zs: &[f64]) -> f64 {
        let n = self.contract.num_dates();
        let beta = self.contract.penalty_rate;
        let mut wealth = self.contract.premium;
        let mut guarantee = self.contract.premium;
        let mut total = 0.0;
        for k in 1..=n {
            wealth = evolve_wealth(wealth, k, self.params, self.fee, zs[k - 1]);
            if k < n {
                let gamma = self.contractual[k - 1].min(guarantee);
                total += self.discounts[k - 1] * withdrawal_cashflow(gamma, self.contractual[k - 1], beta);
                wealth = (wealth - gamma).max(0.0);
                guarantee -= gamma;
            } else {
                total += self.discounts[n - 1]
                    * terminal_payoff(State::new(wealth, guarantee), self.contractual[n - 1], beta);
            }
        }
        total
    }

    fn policy_path_value(&self, zs: &[f64], policy: &PolicyMap) -> f64 {
        let n = self.contract.num_dates();
        let beta = self.contract.penalty_rate;
        let mode = self.contract.surrender_penalty_mode;
        let mut wealth = self.contract.premium;
        let mut guarantee = self.contract.premium;
        let mut total = 0.0;
        for k in 1..=n {
            wealth = evolve_wealth(wealth, k, self.params, self.fee, zs[k - 1]);
            if k < n {
                match policy.action_at(k, wealth, guarantee) {
                    PolicyAction::Withdraw(amount) => {
                        let gamma = amount.clamp(0.0, guarantee);
                        total += self.discounts[k - 1]
                            * withdrawal_cashflow(gamma, self.contractual[k - 1], beta);
                        wealth = (wealth - gamma).max(0.0);
                        guarantee -= gamma;
                    }
                    PolicyAction::Surrender => {
                        total += self.discounts[k - 1]
                            * surrender_cashflow(
                                State::new(wealth, guarantee),
                                self.contractual[k - 1],
                                beta,
                                mode,
                            );
                        return total;
                    }
                }
            } else {
                total += self.discounts[n - 1]
                    * terminal_payoff(State::new(wealth, guarantee), self.contractual[n - 1], beta);
            }
        }
        total
    }
}

/// Runs the batch loop. `path_value` maps a vector of N standard-normal
/// draws to a discounted path payoff; with antithetic sampling each drawn
/// vector is also used negated and the pair mean is one sample.
fn run_paths<F>(cfg: &McConfig, draws_per_path: usize, path_value: F) -> Result<McEstimate, McError>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if cfg.paths < MIN_PATHS {
        return Err(McError::TooFewPaths(cfg.paths));
    }
    let samples = if cfg.antithetic {
        cfg.paths / 2
    } else {
        cfg.paths
    };
    let num_batches = samples.div_ceil(BATCH_SIZE);

    let partials: Vec<(f64, f64)> = (0..num_batches)
        .into_par_iter()
        .map(|batch| {
            let start = batch * BATCH_SIZE;
            let len = BATCH_SIZE.min(samples - start);
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(batch as u64 + 1);
            let mut zs = vec![0.0_f64; draws_per_path];
            let mut neg = vec![0.0_f64; draws_per_path];
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            for _ in 0..len {
                for z in zs.iter_mut() {
                    *z = StandardNormal.sample(&mut rng);
                }
                let value = if cfg.antithetic {
                    for (n, z) in neg.iter_mut().zip(&zs) {
                        *n = -z;
                    }
                    0.5 * (path_value(&zs) + path_value(&neg))
                } else {
                    path_value(&zs)
                };
                sum += value;
                sum_sq += value * value;
            }
            (sum, sum_sq)
        })
        .collect();

    let (sum, sum_sq) = partials
        .into_iter()
        .fold((0.0, 0.0), |acc, p| (acc.0 + p.0, acc.1 + p.1));
    let count = samples as f64;
    let mean = sum / count;
    let variance = ((sum_sq / count - mean * mean) * count / (count - 1.0)).max(0.0);
    Ok(McEstimate {
        estimate: mean,
        std_error: (variance / count).sqrt(),
        paths: if cfg.antithetic { samples * 2 } else { samples },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contract::SurrenderPenalty;
    use crate::engine::PolicyAction;

    fn quarterly_contract(fee_bp: f64) -> ContractSpec {
        ContractSpec::new(100.0, 10.0, 4, 0.10, SurrenderPenalty::ExcessOnly, fee_bp).unwrap()
    }

    #[test]
    fn zero_volatility_is_exact_with_zero_standard_error() {
        let contract = quarterly_contract(120.0);
        let params = MarketParams::flat(0.05, 0.0, &contract).unwrap();
        let cfg = McConfig {
            paths: 2000,
            ..McConfig::default()
        };
        let got = mc_price_static(&contract, &params, &cfg).unwrap();

        // Deterministic discounted cashflows.
        let fee = contract.fee_rate();
        let n = contract.num_dates();
        let mut wealth = 100.0_f64;
        let mut guarantee = 100.0_f64;
        let mut want = 0.0;
        for k in 1..=n {
            wealth *= ((0.05 - fee) * contract.period_length(k)).exp();
            let g = contract.contractual_amount(k);
            if k < n {
                let gamma = g.min(guarantee);
                want += params.discount_to(k) * gamma;
                wealth = (wealth - gamma).max(0.0);
                guarantee -= gamma;
            } else {
                want += params.discount_to(n)
                    * terminal_payoff(State::new(wealth, guarantee), g, contract.penalty_rate);
            }
        }
        assert!((got.estimate - want).abs() <= 1e-10 * want);
        // All paths coincide; the variance is floating-point noise.
        assert!(got.std_error < 1e-6, "std error {}", got.std_error);
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let contract = quarterly_contract(150.0);
        let params = MarketParams::flat(0.05, 0.2, &contract).unwrap();
        let cfg = McConfig {
            paths: 20_000,
            seed: 7,
            antithetic: true,
        };
        let a = mc_price_static(&contract, &params, &cfg).unwrap();
        let b = mc_price_static(&contract, &params, &cfg).unwrap();
        assert_eq!(a.estimate.to_bits(), b.estimate.to_bits());
        assert_eq!(a.std_error.to_bits(), b.std_error.to_bits());
    }

    #[test]
    fn antithetic_reduces_standard_error_on_baseline() {
        let contract = quarterly_contract(100.0);
        let params = MarketParams::flat(0.05, 0.2, &contract).unwrap();
        let with = mc_price_static(
            &contract,
            &params,
            &McConfig {
                paths: 100_000,
                seed: 11,
                antithetic: true,
            },
        )
        .unwrap();
        let without = mc_price_static(
            &contract,
            &params,
            &McConfig {
                paths: 100_000,
                seed: 11,
                antithetic: false,
            },
        )
        .unwrap();
        assert!(
            with.std_error <= without.std_error,
            "antithetic {} vs plain {}",
            with.std_error,
            without.std_error
        );
    }

    #[test]
    fn too_few_paths_is_an_error() {
        let contract = quarterly_contract(0.0);
        let params = MarketParams::flat(0.05, 0.2, &contract).unwrap();
        let cfg = McConfig {
            paths: 10,
            ..McConfig::default()
        };
        assert!(matches!(
            mc_price_static(&contract, &params, &cfg),
            Err(McError::TooFewPaths(10))
        ));
    }

    /// Policy table that reproduces the static strategy exactly.
    fn static_policy(contract: &ContractSpec, w_nodes: Vec<f64>, a_nodes: Vec<f64>) -> PolicyMap {
        let n = contract.num_dates();
        let actions = (1..n)
            .map(|date| {
                let g = contract.contractual_amount(date);
                a_nodes
                    .iter()
                    .map(|&a| vec![PolicyAction::Withdraw(g.min(a)); w_nodes.len()])
                    .collect()
            })
            .collect();
        PolicyMap {
            w_nodes,
            a_nodes,
            times: (1..n).map(|k| contract.date(k)).collect(),
            actions,
        }
    }

    #[test]
    fn static_policy_map_reproduces_static_pricer_bitwise() {
        let contract = quarterly_contract(130.0);
        let params = MarketParams::flat(0.05, 0.2, &contract).unwrap();
        let w_nodes: Vec<f64> = (0..=100).map(|i| i as f64 * 5.0).collect();
        let a_nodes: Vec<f64> = (0..=40).map(|i| i as f64 * 2.5).collect();
        let policy = static_policy(&contract, w_nodes, a_nodes);
        let cfg = McConfig {
            paths: 20_000,
            seed: 99,
            antithetic: true,
        };
        let direct = mc_price_static(&contract, &params, &cfg).unwrap();
        let via_policy = mc_price_policy(&contract, &params, &policy, &cfg).unwrap();
        assert_eq!(direct.estimate.to_bits(), via_policy.estimate.to_bits());
        assert_eq!(direct.std_error.to_bits(), via_policy.std_error.to_bits());
    }

    #[test]
    fn immediate_surrender_with_full_penalty_pays_contractual() {
        // beta = 1 confiscates the whole excess, so surrendering at date 1
        // pays exactly G_1; with zero volatility the estimate is the single
        // discounted cashflow.
        let contract =
            ContractSpec::new(100.0, 10.0, 4, 1.0, SurrenderPenalty::ExcessOnly, 80.0).unwrap();
        let params = MarketParams::flat(0.05, 0.0, &contract).unwrap();
        let w_nodes: Vec<f64> = (0..=60).map(|i| i as f64 * 10.0).collect();
        let a_nodes: Vec<f64> = (0..=40).map(|i| i as f64 * 2.5).collect();
        let n = contract.num_dates();
        let actions = (1..n)
            .map(|_| {
                a_nodes
                    .iter()
                    .map(|_| vec![PolicyAction::Surrender; w_nodes.len()])
                    .collect()
            })
            .collect();
        let policy = PolicyMap {
            w_nodes,
            a_nodes,
            times: (1..n).map(|k| contract.date(k)).collect(),
            actions,
        };
        let got = mc_price_policy(
            &contract,
            &params,
            &policy,
            &McConfig {
                paths: 1000,
                ..McConfig::default()
            },
        )
        .unwrap();
        let want = params.discount_to(1) * contract.contractual_amount(1);
        assert!((got.estimate - want).abs() <= 1e-12 * want);
        assert_eq!(got.std_error, 0.0);
    }

    #[test]
    fn mismatched_policy_dimensions_are_rejected() {
        let contract = quarterly_contract(0.0);
        let params = MarketParams::flat(0.05, 0.2, &contract).unwrap();
        let policy = PolicyMap {
            w_nodes: vec![0.0, 1.0],
            a_nodes: vec![0.0, 100.0],
            times: vec![0.25],
            actions: vec![vec![vec![PolicyAction::Withdraw(0.0); 2]; 2]],
        };
        assert!(matches!(
            mc_price_policy(&contract, &params, &policy, &McConfig::default()),
            Err(McError::PolicyDateMismatch { .. })
        ));
    }

    #[test]
    fn lognormal_mean_with_no_withdrawals_matches_fee_discounted_premium() {
        // Wealth evolved with no withdrawals has risk-neutral mean
        // premium e^((r - fee) T); discounting leaves premium e^(-fee T).
        let contract = quarterly_contract(250.0);
        let params = MarketParams::flat(0.05, 0.2, &contract).unwrap();
        let n = contract.num_dates();
        let fee = contract.fee_rate();
        let mut rng = ChaCha8Rng::seed_from_u64(4242);
        let paths = 200_000;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..paths {
            let mut w = contract.premium;
            for k in 1..=n {
                let z: f64 = StandardNormal.sample(&mut rng);
                w = evolve_wealth(w, k, &params, fee, z);
            }
            let v = params.discount_to(n) * w;
            sum += v;
            sum_sq += v * v;
        }
        let mean = sum / paths as f64;
        let se = (((sum_sq / paths as f64) - mean * mean) / paths as f64).sqrt();
        let want = contract.premium * (-fee * 10.0).exp();
        assert!(
            (mean - want).abs() <= 3.0 * se,
            "mean {mean}, want {want}, se {se}"
        );
    }
}
