//! Backward-induction solver.
//!
//! The annuity value Q(W, A) is carried backward from maturity as one value
//! vector per guarantee node ("slice"). Two operations alternate:
//!
//! - the *expectation step* maps the surface at t_n^- (just before the
//!   withdrawal at date n) to t_{n-1}^+ by integrating each slice against the
//!   lognormal transition density of the wealth account, discounted over the
//!   period. Slices are interpolated with cubic splines and the Gaussian
//!   integral is evaluated by composite Gauss-Legendre panels whose
//!   boundaries follow the spline knots (see below);
//! - the *jump step* maps t_n^+ to t_n^- by maximising over the admissible
//!   withdrawal actions (a lattice of guarantee-grid steps) and, for
//!   surrender-bearing strategies, the surrender cashflow.
//!
//! Withdrawal decisions happen at dates 1..=N-1; date N is governed by the
//! terminal payoff, and no decision is taken at t_0.
//!
//! Why panels instead of a single global Gaussian rule: post-jump value
//! slices carry derivative kinks at the withdrawal-lattice positions (the
//! terminal payoff and the max over actions are only piecewise smooth), so
//! the integrand is C^2 with large localized third-derivative jumps at the
//! spline knots. A global rule's error then decays slowly and oscillates
//! with the node placement, which shows up as basis-point-level fee noise.
//! Splitting the integration at the knots makes every panel's integrand
//! smooth and restores fast, monotone convergence.

mod grid;
mod policy;

use rayon::prelude::*;
use thiserror::Error;

use crate::contract::{
    surrender_cashflow, terminal_payoff, withdrawal_cashflow, ContractSpec, MarketParams, State,
};
use crate::mathkit::{CubicSpline, SplineError};

pub use grid::{GridConfig, GridSpec, MIN_W_INTERVALS};
pub use policy::{PolicyAction, PolicyIoError, PolicyMap};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("wealth grid: {0}")]
    InvalidWealthGrid(String),
    #[error("guarantee grid: {0}")]
    InvalidGuaranteeGrid(String),
    #[error(
        "contractual amount at date {date} is not a guarantee-grid step from node {a_index}"
    )]
    ContractualOffGrid { date: usize, a_index: usize },
    #[error("market parameters cover {got} periods, contract has {expected}")]
    PeriodMismatch { expected: usize, got: usize },
    #[error(
        "non-finite value during period {period} at guarantee index {a_index}, wealth index {w_index}"
    )]
    NonFinite {
        period: usize,
        a_index: usize,
        w_index: usize,
    },
    #[error("quadrature order must be in 1..={}, got {0}", crate::mathkit::MAX_QUAD_ORDER)]
    InvalidQuadOrder(usize),
    #[error(transparent)]
    Spline(#[from] SplineError),
}

/// Admissible action set the policyholder optimizes over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StrategyKind {
    /// Withdraw exactly the contractual amount at every date (capped at the
    /// remaining guarantee); no surrender.
    Static,
    /// Maximise over all guarantee-lattice withdrawals; no surrender.
    Optimal,
    /// `Optimal` plus the option to surrender at any withdrawal date before
    /// maturity.
    OptimalWithSurrender,
    /// Actions restricted to {nothing, contractual withdrawal, surrender}.
    BangBang,
    /// Contractual withdrawal or surrender (bang-bang without the
    /// no-withdrawal choice).
    StaticWithSurrender,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 5] = [
        StrategyKind::Static,
        StrategyKind::Optimal,
        StrategyKind::OptimalWithSurrender,
        StrategyKind::BangBang,
        StrategyKind::StaticWithSurrender,
    ];

    pub fn allows_surrender(self) -> bool {
        matches!(
            self,
            StrategyKind::OptimalWithSurrender
                | StrategyKind::BangBang
                | StrategyKind::StaticWithSurrender
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::Static => "static",
            StrategyKind::Optimal => "optimal",
            StrategyKind::OptimalWithSurrender => "optimal-with-surrender",
            StrategyKind::BangBang => "bang-bang",
            StrategyKind::StaticWithSurrender => "static-with-surrender",
        }
    }
}

impl std::fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Which instant a value surface represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeLabel {
    /// t_n^-: just before the withdrawal decision at date n.
    BeforeWithdrawal(usize),
    /// t_n^+: just after the withdrawal at date n (n = 0 is the valuation
    /// instant t_0).
    AfterWithdrawal(usize),
}

/// Annuity values over the wealth grid, one vector per guarantee node.
#[derive(Debug, Clone)]
pub struct ValueSurface {
    values: Vec<Vec<f64>>,
    label: TimeLabel,
}

impl ValueSurface {
    pub fn new(values: Vec<Vec<f64>>, label: TimeLabel) -> Self {
        debug_assert!(!values.is_empty());
        debug_assert!(values.windows(2).all(|w| w[0].len() == w[1].len()));
        ValueSurface { values, label }
    }

    pub fn label(&self) -> TimeLabel {
        self.label
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn slice(&self, a_index: usize) -> &[f64] {
        &self.values[a_index]
    }

    /// Number of wealth-index inversions (value decreasing in W beyond a
    /// small tolerance). Spline overshoot can produce harmless small
    /// violations on coarse grids, so this is a diagnostic, not an assert.
    pub fn monotonicity_violations(&self) -> usize {
        self.values
            .iter()
            .map(|slice| {
                slice
                    .windows(2)
                    .filter(|w| w[1] < w[0] - 1e-9 * (1.0 + w[0].abs()))
                    .count()
            })
            .sum()
    }
}

/// Surface at maturity t_N^-: max of remaining wealth and the penalised
/// withdrawal of the remaining guarantee.
pub fn terminal_surface(contract: &ContractSpec, grid: &GridSpec) -> ValueSurface {
    let n = contract.num_dates();
    let g_final = contract.contractual_amount(n);
    let beta = contract.penalty_rate;
    let values = grid
        .a_nodes
        .iter()
        .map(|&a| {
            grid.w_nodes
                .iter()
                .map(|&w| terminal_payoff(State::new(w, a), g_final, beta))
                .collect()
        })
        .collect();
    ValueSurface::new(values, TimeLabel::BeforeWithdrawal(n))
}

/// Integration half-width in standard deviations of the period log-return.
/// The neglected tail mass is below 1e-12 even with the lognormal tilt.
const QUAD_HALF_WIDTH_SD: f64 = 8.0;

/// 5-point Gauss-Legendre rule on [-1, 1], exact through degree 9.
const GL_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683,
    0.0,
    0.538_469_310_105_683,
    0.906_179_845_938_664,
];
const GL_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189,
    0.478_628_670_499_366,
    0.568_888_888_888_889,
    0.478_628_670_499_366,
    0.236_926_885_056_189,
];

/// Evaluation points and Gaussian-density weights for one wealth node: the
/// continuation expectation is `sum_k weights[k] * Q_spline(points[k])`.
struct NodeQuadrature {
    points: Vec<f64>,
    weights: Vec<f64>,
}

/// Builds the composite quadrature for E[f(W e^(drift + s Z))], Z standard
/// normal: panels in the standardised variable u split at every spline-knot
/// crossing (where the interpolated slice is only C^2) and capped at
/// `max_du`, each integrated with the 5-point Gauss-Legendre rule against
/// the normal density.
fn node_quadrature(
    wealth: f64,
    drift: f64,
    s: f64,
    log_knots: &[f64],
    max_du: f64,
) -> NodeQuadrature {
    let center = wealth.ln() + drift;
    let u_of = |y: f64| (y - center) / s;
    let lo = -QUAD_HALF_WIDTH_SD;
    let hi = QUAD_HALF_WIDTH_SD;

    // Knot crossings strictly inside the integration window.
    let start = log_knots.partition_point(|&y| u_of(y) <= lo);
    let mut edges = Vec::with_capacity(64);
    edges.push(lo);
    for &y in &log_knots[start..] {
        let u = u_of(y);
        if u >= hi {
            break;
        }
        edges.push(u);
    }
    edges.push(hi);

    let norm = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
    let mut points = Vec::with_capacity(edges.len() * GL_NODES.len());
    let mut weights = Vec::with_capacity(edges.len() * GL_NODES.len());
    for pair in edges.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let span = b - a;
        if span <= 0.0 {
            continue;
        }
        let pieces = (span / max_du).ceil().max(1.0) as usize;
        let step = span / pieces as f64;
        for piece in 0..pieces {
            let a_p = a + piece as f64 * step;
            let mid = a_p + 0.5 * step;
            let half = 0.5 * step;
            for (x, w) in GL_NODES.iter().zip(&GL_WEIGHTS) {
                let u = mid + half * x;
                points.push((center + s * u).exp());
                weights.push(half * w * norm * (-0.5 * u * u).exp());
            }
        }
    }
    NodeQuadrature { points, weights }
}

/// Maps the surface at t_n^- to t_{n-1}^+ (period index n, 1-based).
///
/// For each guarantee node the slice is interpolated with a natural cubic
/// spline and integrated against the lognormal wealth transition
///
/// ```text
/// Q(W) <- e^(-r dt) E[ Q_spline(W exp(drift + vol sqrt(dt) Z)) ],
/// drift = (r - fee - vol^2/2) dt,
/// ```
///
/// by knot-aligned Gauss-Legendre panels (see the module docs). The grid's
/// `quad_order` sets the panel density: no panel is wider than 4/quad_order
/// standard deviations. The absorbing node W = 0 just discounts.
pub fn expectation_step(
    surface: &ValueSurface,
    period: usize,
    params: &MarketParams,
    contract: &ContractSpec,
    grid: &GridSpec,
) -> Result<ValueSurface, EngineError> {
    assert_eq!(
        surface.label(),
        TimeLabel::BeforeWithdrawal(period),
        "expectation step expects the surface at t_n^-"
    );
    let r = params.rate(period);
    let vol = params.vol(period);
    let dt = params.dt(period);
    let disc = (-r * dt).exp();
    let drift = (r - contract.fee_rate() - 0.5 * vol * vol) * dt;
    let s = vol * dt.sqrt();
    let w_nodes = &grid.w_nodes;
    let m_count = w_nodes.len();

    // Degenerate volatility: the transition is a point mass.
    if s <= 0.0 {
        let shifted: Vec<f64> = w_nodes.iter().map(|&w| w * drift.exp()).collect();
        let new_values: Vec<Vec<f64>> = surface
            .values()
            .par_iter()
            .enumerate()
            .map(|(a_index, slice)| -> Result<Vec<f64>, EngineError> {
                let spline = CubicSpline::natural(w_nodes.clone(), slice.clone())?;
                let mut out = vec![0.0_f64; m_count];
                spline.eval_sorted_into(&shifted, &mut out);
                for v in out.iter_mut() {
                    *v *= disc;
                }
                out[0] = disc * slice[0];
                check_finite(&out, period, a_index)?;
                Ok(out)
            })
            .collect::<Result<_, _>>()?;
        return Ok(ValueSurface::new(
            new_values,
            TimeLabel::AfterWithdrawal(period - 1),
        ));
    }

    let max_du = 4.0 / grid.quad_order.max(1) as f64;
    let log_knots: Vec<f64> = w_nodes[1..].iter().map(|&w| w.ln()).collect();
    // The quadrature layout depends only on the wealth node, not on the
    // guarantee slice, so it is built once per period and shared.
    let quads: Vec<NodeQuadrature> = w_nodes
        .par_iter()
        .skip(1)
        .map(|&w| node_quadrature(w, drift, s, &log_knots, max_du))
        .collect();

    let new_values: Vec<Vec<f64>> = surface
        .values()
        .par_iter()
        .enumerate()
        .map(|(a_index, slice)| -> Result<Vec<f64>, EngineError> {
            let spline = CubicSpline::natural(w_nodes.clone(), slice.clone())?;
            let mut out = vec![0.0_f64; m_count];
            out[0] = disc * slice[0];
            let mut evals: Vec<f64> = Vec::new();
            for (m, quad) in quads.iter().enumerate() {
                evals.resize(quad.points.len(), 0.0);
                spline.eval_sorted_into(&quad.points, &mut evals);
                let mut acc = 0.0;
                for (w, e) in quad.weights.iter().zip(&evals) {
                    acc += w * e;
                }
                out[m + 1] = disc * acc;
            }
            check_finite(&out, period, a_index)?;
            Ok(out)
        })
        .collect::<Result<_, _>>()?;

    Ok(ValueSurface::new(
        new_values,
        TimeLabel::AfterWithdrawal(period - 1),
    ))
}

fn check_finite(values: &[f64], period: usize, a_index: usize) -> Result<(), EngineError> {
    if let Some(w_index) = values.iter().position(|v| !v.is_finite()) {
        return Err(EngineError::NonFinite {
            period,
            a_index,
            w_index,
        });
    }
    Ok(())
}

/// One admissible withdrawal at a given guarantee node: destination node,
/// withdrawn amount, and the cashflow it generates.
struct WithdrawalAction {
    dest: usize,
    gamma: f64,
    cash: f64,
}

fn admissible_withdrawals(
    strategy: StrategyKind,
    grid: &GridSpec,
    a_index: usize,
    date: usize,
    contractual: f64,
    beta: f64,
) -> Result<Vec<WithdrawalAction>, EngineError> {
    let a = grid.a_nodes[a_index];
    let make = |dest: usize| {
        let gamma = a - grid.a_nodes[dest];
        WithdrawalAction {
            dest,
            gamma,
            cash: withdrawal_cashflow(gamma.max(0.0), contractual, beta),
        }
    };
    let static_dest = || -> Result<usize, EngineError> {
        let target = a - contractual.min(a);
        grid.a_index_of(target)
            .ok_or(EngineError::ContractualOffGrid { date, a_index })
    };
    let actions = match strategy {
        StrategyKind::Static | StrategyKind::StaticWithSurrender => vec![make(static_dest()?)],
        StrategyKind::BangBang => {
            let dest = static_dest()?;
            if dest == a_index {
                vec![make(a_index)]
            } else {
                vec![make(a_index), make(dest)]
            }
        }
        StrategyKind::Optimal | StrategyKind::OptimalWithSurrender => {
            // Descending destination index = ascending withdrawal amount, so
            // the smallest amount wins ties in the max below.
            (0..=a_index).rev().map(make).collect()
        }
    };
    Ok(actions)
}

/// Maps the surface at t_n^+ to t_n^- by applying the withdrawal/surrender
/// maximisation at date n (1-based, n <= N-1).
///
/// Each action values as `Q(max(W - gamma, 0), A - gamma) + cashflow(gamma)`,
/// with Q at the shifted wealth obtained by spline evaluation on the
/// destination slice. Surrender, where allowed, replaces the best withdrawal
/// only if strictly greater.
pub fn jump_step(
    surface: &ValueSurface,
    date: usize,
    contract: &ContractSpec,
    grid: &GridSpec,
    strategy: StrategyKind,
) -> Result<ValueSurface, EngineError> {
    Ok(jump_step_impl(surface, date, contract, grid, strategy, false)?.0)
}

/// [`jump_step`] that also records the chosen action at every lattice point.
pub fn jump_step_recording(
    surface: &ValueSurface,
    date: usize,
    contract: &ContractSpec,
    grid: &GridSpec,
    strategy: StrategyKind,
) -> Result<(ValueSurface, Vec<Vec<PolicyAction>>), EngineError> {
    let (out, actions) = jump_step_impl(surface, date, contract, grid, strategy, true)?;
    Ok((out, actions.expect("actions recorded")))
}

fn jump_step_impl(
    surface: &ValueSurface,
    date: usize,
    contract: &ContractSpec,
    grid: &GridSpec,
    strategy: StrategyKind,
    record: bool,
) -> Result<(ValueSurface, Option<Vec<Vec<PolicyAction>>>), EngineError> {
    assert_eq!(
        surface.label(),
        TimeLabel::AfterWithdrawal(date),
        "jump step expects the surface at t_n^+"
    );
    assert!(
        date >= 1 && date < contract.num_dates(),
        "withdrawal decisions happen at dates 1..=N-1"
    );
    let contractual = contract.contractual_amount(date);
    let beta = contract.penalty_rate;
    let mode = contract.surrender_penalty_mode;
    let w_nodes = &grid.w_nodes;
    let m_count = w_nodes.len();

    let splines: Vec<CubicSpline> = surface
        .values()
        .par_iter()
        .map(|slice| CubicSpline::natural(w_nodes.clone(), slice.clone()))
        .collect::<Result<_, _>>()?;

    let results: Vec<(Vec<f64>, Vec<PolicyAction>)> = (0..grid.num_a_nodes())
        .into_par_iter()
        .map(|a_index| -> Result<(Vec<f64>, Vec<PolicyAction>), EngineError> {
            let actions =
                admissible_withdrawals(strategy, grid, a_index, date, contractual, beta)?;
            let mut best = vec![f64::NEG_INFINITY; m_count];
            let mut chosen = if record {
                vec![PolicyAction::Withdraw(0.0); m_count]
            } else {
                Vec::new()
            };
            let mut points = vec![0.0_f64; m_count];
            let mut evals = vec![0.0_f64; m_count];
            for action in &actions {
                for (p, w) in points.iter_mut().zip(w_nodes) {
                    *p = (w - action.gamma).max(0.0);
                }
                splines[action.dest].eval_sorted_into(&points, &mut evals);
                for m in 0..m_count {
                    let value = evals[m] + action.cash;
                    if value > best[m] {
                        best[m] = value;
                        if record {
                            chosen[m] = PolicyAction::Withdraw(action.gamma);
                        }
                    }
                }
            }
            if strategy.allows_surrender() {
                let a = grid.a_nodes[a_index];
                for m in 0..m_count {
                    let cash = surrender_cashflow(State::new(w_nodes[m], a), contractual, beta, mode);
                    if cash > best[m] {
                        best[m] = cash;
                        if record {
                            chosen[m] = PolicyAction::Surrender;
                        }
                    }
                }
            }
            if let Some(w_index) = best.iter().position(|v| !v.is_finite()) {
                return Err(EngineError::NonFinite {
                    period: date,
                    a_index,
                    w_index,
                });
            }
            Ok((best, chosen))
        })
        .collect::<Result<_, _>>()?;

    let mut values = Vec::with_capacity(results.len());
    let mut recorded = record.then(Vec::new);
    for (v, c) in results {
        values.push(v);
        if let Some(rec) = recorded.as_mut() {
            rec.push(c);
        }
    }
    Ok((
        ValueSurface::new(values, TimeLabel::BeforeWithdrawal(date)),
        recorded,
    ))
}

/// Price at t_0 together with run diagnostics.
#[derive(Debug, Clone)]
pub struct PricingResult {
    /// Annuity value at (W, A) = (premium, premium).
    pub price: f64,
    /// price / premium.
    pub ratio: f64,
    /// Annual fee (bp) the price was computed at.
    pub fee_bp: f64,
    pub strategy: StrategyKind,
    pub num_dates: usize,
    pub grid_w_intervals: usize,
    pub grid_a_nodes: usize,
    pub quad_order: usize,
    pub w_max: f64,
    /// Wealth-monotonicity diagnostics accumulated across all steps.
    pub monotonicity_warnings: usize,
}

/// Runs the full backward induction and reads the value at the initial state.
pub fn price(
    contract: &ContractSpec,
    params: &MarketParams,
    grid: &GridSpec,
    strategy: StrategyKind,
) -> Result<PricingResult, EngineError> {
    Ok(solve(contract, params, grid, strategy, false)?.0)
}

/// [`price`] that also returns the surface at t_0 (one slice per guarantee
/// node), for diagnostics and validation.
pub fn price_full(
    contract: &ContractSpec,
    params: &MarketParams,
    grid: &GridSpec,
    strategy: StrategyKind,
) -> Result<(PricingResult, ValueSurface), EngineError> {
    let (result, surface, _) = solve_inner(contract, params, grid, strategy, false)?;
    Ok((result, surface))
}

/// [`price`] that also exports the optimal action at every lattice point of
/// every withdrawal date.
pub fn price_with_policy(
    contract: &ContractSpec,
    params: &MarketParams,
    grid: &GridSpec,
    strategy: StrategyKind,
) -> Result<(PricingResult, PolicyMap), EngineError> {
    let (result, _, policy) = solve_inner(contract, params, grid, strategy, true)?;
    Ok((result, policy.expect("policy recorded")))
}

fn solve(
    contract: &ContractSpec,
    params: &MarketParams,
    grid: &GridSpec,
    strategy: StrategyKind,
    record: bool,
) -> Result<(PricingResult, Option<PolicyMap>), EngineError> {
    let (result, _, policy) = solve_inner(contract, params, grid, strategy, record)?;
    Ok((result, policy))
}

fn solve_inner(
    contract: &ContractSpec,
    params: &MarketParams,
    grid: &GridSpec,
    strategy: StrategyKind,
    record: bool,
) -> Result<(PricingResult, ValueSurface, Option<PolicyMap>), EngineError> {
    grid.validate(contract)?;
    let n_dates = contract.num_dates();
    if params.num_periods() != n_dates {
        return Err(EngineError::PeriodMismatch {
            expected: n_dates,
            got: params.num_periods(),
        });
    }
    let mut surface = terminal_surface(contract, grid);
    let mut warnings = 0usize;
    let mut jump_actions: Vec<Option<Vec<Vec<PolicyAction>>>> = vec![None; n_dates - 1];
    for n in (1..=n_dates).rev() {
        surface = expectation_step(&surface, n, params, contract, grid)?;
        warnings += surface.monotonicity_violations();
        if n > 1 {
            let date = n - 1;
            if record {
                let (next, actions) =
                    jump_step_recording(&surface, date, contract, grid, strategy)?;
                surface = next;
                jump_actions[date - 1] = Some(actions);
            } else {
                surface = jump_step(&surface, date, contract, grid, strategy)?;
            }
            warnings += surface.monotonicity_violations();
        }
    }

    let top = grid.num_a_nodes() - 1;
    let spline = CubicSpline::natural(grid.w_nodes.clone(), surface.slice(top).to_vec())?;
    let value = spline.eval(contract.premium);
    let result = PricingResult {
        price: value,
        ratio: value / contract.premium,
        fee_bp: contract.annual_fee_bp,
        strategy,
        num_dates: n_dates,
        grid_w_intervals: grid.num_w_intervals(),
        grid_a_nodes: grid.num_a_nodes(),
        quad_order: grid.quad_order,
        w_max: grid.w_max(),
        monotonicity_warnings: warnings,
    };

    let policy = if record {
        Some(PolicyMap {
            w_nodes: grid.w_nodes.clone(),
            a_nodes: grid.a_nodes.clone(),
            times: (1..n_dates).map(|n| contract.date(n)).collect(),
            actions: jump_actions.into_iter().map(|a| a.expect("recorded")).collect(),
        })
    } else {
        None
    };

    Ok((result, surface, policy))
}
