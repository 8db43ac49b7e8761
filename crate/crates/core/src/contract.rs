//! Contract terms, market parameters, and the pure cashflow functions applied
//! at withdrawal dates, on surrender, and at maturity.
//!
//! Conventions used throughout the crate:
//! - Withdrawal dates are indexed 1..=N with t_0 = 0 and t_N = T. For an
//!   integer number of periods the dates are equally spaced; when the date
//!   count is rounded up, the final period is a short stub and its
//!   contractual amount is pro-rated by actual period length.
//! - The wealth account W is the invested fund, the guarantee account A the
//!   remaining guaranteed withdrawal balance. Withdrawals reduce both;
//!   market moves affect only W.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ValidationError {
    #[error("{field}: {message} (got {value})")]
    OutOfRange {
        field: &'static str,
        message: &'static str,
        value: f64,
    },
    #[error("{field}: expected {expected} per-period entries, got {got}")]
    WrongLength {
        field: &'static str,
        expected: usize,
        got: usize,
    },
}

fn check(
    ok: bool,
    field: &'static str,
    message: &'static str,
    value: f64,
) -> Result<(), ValidationError> {
    if ok {
        Ok(())
    } else {
        Err(ValidationError::OutOfRange {
            field,
            message,
            value,
        })
    }
}

/// How the surrender cashflow is penalised.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SurrenderPenalty {
    /// Only the portion above the contractual amount is penalised; the
    /// surrender value is the regular withdrawal cashflow applied to
    /// max(W, A).
    ExcessOnly,
    /// The entire termination amount is penalised: (1-beta) max(W, A).
    FullAmount,
}

/// Economic terms of a GMWB contract.
#[derive(Debug, Clone)]
pub struct ContractSpec {
    /// Upfront premium; also the initial guarantee balance.
    pub premium: f64,
    /// Contract maturity T in years.
    pub maturity_years: f64,
    /// Number of withdrawal dates per year.
    pub withdrawals_per_year: u32,
    /// Penalty fraction beta applied to the excess above the contractual
    /// amount (and to surrender per the penalty mode).
    pub penalty_rate: f64,
    pub surrender_penalty_mode: SurrenderPenalty,
    /// Annual fee in basis points, deducted continuously from the fund drift.
    pub annual_fee_bp: f64,
}

impl ContractSpec {
    pub fn new(
        premium: f64,
        maturity_years: f64,
        withdrawals_per_year: u32,
        penalty_rate: f64,
        surrender_penalty_mode: SurrenderPenalty,
        annual_fee_bp: f64,
    ) -> Result<Self, ValidationError> {
        check(
            premium.is_finite() && premium > 0.0,
            "premium",
            "must be positive",
            premium,
        )?;
        check(
            maturity_years.is_finite() && maturity_years > 0.0,
            "maturity_years",
            "must be positive",
            maturity_years,
        )?;
        check(
            withdrawals_per_year >= 1,
            "withdrawals_per_year",
            "must be at least 1",
            withdrawals_per_year as f64,
        )?;
        check(
            (0.0..=1.0).contains(&penalty_rate),
            "penalty_rate",
            "must lie in [0, 1]",
            penalty_rate,
        )?;
        check(
            annual_fee_bp.is_finite() && annual_fee_bp >= 0.0,
            "annual_fee_bp",
            "must be nonnegative",
            annual_fee_bp,
        )?;
        Ok(ContractSpec {
            premium,
            maturity_years,
            withdrawals_per_year,
            penalty_rate,
            surrender_penalty_mode,
            annual_fee_bp,
        })
    }

    /// Same contract with a different annual fee (used by the fee solver).
    pub fn with_fee_bp(&self, annual_fee_bp: f64) -> Self {
        let mut c = self.clone();
        c.annual_fee_bp = annual_fee_bp;
        c
    }

    /// Annual fee as a decimal rate.
    pub fn fee_rate(&self) -> f64 {
        self.annual_fee_bp / 10_000.0
    }

    /// Annual contractual withdrawal rate g = 1/T.
    pub fn annual_rate(&self) -> f64 {
        1.0 / self.maturity_years
    }

    /// Total number of withdrawal dates N = ceil(withdrawals_per_year * T),
    /// with a tolerance so that an integer product is not rounded up by
    /// floating-point noise.
    pub fn num_dates(&self) -> usize {
        let raw = self.withdrawals_per_year as f64 * self.maturity_years;
        let nearest = raw.round();
        let n = if (raw - nearest).abs() < 1e-9 * nearest.max(1.0) {
            nearest
        } else {
            raw.ceil()
        };
        (n as usize).max(1)
    }

    /// Withdrawal date t_n for n in 0..=N. Regular dates fall at n/N_w; when
    /// the date count was rounded up the final date is clamped to T, giving a
    /// short stub period.
    pub fn date(&self, n: usize) -> f64 {
        let total = self.num_dates();
        debug_assert!(n <= total);
        if n == total {
            self.maturity_years
        } else {
            n as f64 / self.withdrawals_per_year as f64
        }
    }

    /// Period length dt_n = t_n - t_{n-1} for n in 1..=N.
    pub fn period_length(&self, n: usize) -> f64 {
        debug_assert!((1..=self.num_dates()).contains(&n));
        self.date(n) - self.date(n - 1)
    }

    /// Contractual (penalty-free) withdrawal amount
    /// G_n = premium * (t_n - t_{n-1}) / T for n in 1..=N.
    pub fn contractual_amount(&self, n: usize) -> f64 {
        self.premium * self.period_length(n) / self.maturity_years
    }
}

/// Piecewise-constant risk-free rate and volatility, one entry per withdrawal
/// period, together with the period lengths they apply to.
#[derive(Debug, Clone)]
pub struct MarketParams {
    rates: Vec<f64>,
    vols: Vec<f64>,
    dts: Vec<f64>,
}

impl MarketParams {
    /// Flat rate and volatility across all periods of the contract.
    pub fn flat(rate: f64, vol: f64, contract: &ContractSpec) -> Result<Self, ValidationError> {
        let n = contract.num_dates();
        Self::from_series(vec![rate; n], vec![vol; n], contract)
    }

    /// Per-period series; lengths must equal the contract's date count.
    pub fn from_series(
        rates: Vec<f64>,
        vols: Vec<f64>,
        contract: &ContractSpec,
    ) -> Result<Self, ValidationError> {
        let n = contract.num_dates();
        if rates.len() != n {
            return Err(ValidationError::WrongLength {
                field: "rates",
                expected: n,
                got: rates.len(),
            });
        }
        if vols.len() != n {
            return Err(ValidationError::WrongLength {
                field: "vols",
                expected: n,
                got: vols.len(),
            });
        }
        for (i, r) in rates.iter().enumerate() {
            check(r.is_finite(), "rates", "must be finite", *r)
                .map_err(|_| ValidationError::OutOfRange {
                    field: "rates",
                    message: "must be finite",
                    value: i as f64,
                })?;
        }
        for v in &vols {
            check(v.is_finite() && *v >= 0.0, "vols", "must be nonnegative", *v)?;
        }
        let dts = (1..=n).map(|k| contract.period_length(k)).collect();
        Ok(MarketParams { rates, vols, dts })
    }

    /// Number of periods (equals the contract's date count).
    pub fn num_periods(&self) -> usize {
        self.rates.len()
    }

    /// Risk-free rate over period n (1-based).
    pub fn rate(&self, n: usize) -> f64 {
        self.rates[n - 1]
    }

    /// Volatility over period n (1-based).
    pub fn vol(&self, n: usize) -> f64 {
        self.vols[n - 1]
    }

    /// Period length dt_n (1-based).
    pub fn dt(&self, n: usize) -> f64 {
        self.dts[n - 1]
    }

    /// Single-period discount factor e^(-r_n dt_n).
    pub fn discount(&self, n: usize) -> f64 {
        (-self.rate(n) * self.dt(n)).exp()
    }

    /// Discount factor from t_0 to t_n.
    pub fn discount_to(&self, n: usize) -> f64 {
        let mut acc = 0.0;
        for k in 1..=n {
            acc += self.rate(k) * self.dt(k);
        }
        (-acc).exp()
    }
}

/// Wealth/guarantee state immediately before a withdrawal decision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct State {
    pub wealth: f64,
    pub guarantee: f64,
}

impl State {
    pub fn new(wealth: f64, guarantee: f64) -> Self {
        debug_assert!(wealth >= 0.0 && guarantee >= 0.0);
        State { wealth, guarantee }
    }
}

/// Cashflow received for withdrawing `gamma` when the contractual amount is
/// `contractual`: the full amount up to the contractual level, with the
/// excess penalised at rate `beta`.
///
/// Equivalent closed form: gamma - beta * max(gamma - contractual, 0).
pub fn withdrawal_cashflow(gamma: f64, contractual: f64, beta: f64) -> f64 {
    assert!(gamma >= 0.0, "withdrawal amount must be nonnegative, got {gamma}");
    debug_assert!(contractual >= 0.0);
    debug_assert!((0.0..=1.0).contains(&beta));
    if gamma <= contractual {
        gamma
    } else {
        contractual + (1.0 - beta) * (gamma - contractual)
    }
}

/// Cashflow received on surrendering in the given state. The termination
/// amount is max(W, A); the penalty treatment depends on the mode.
pub fn surrender_cashflow(
    state: State,
    contractual: f64,
    beta: f64,
    mode: SurrenderPenalty,
) -> f64 {
    let amount = state.wealth.max(state.guarantee);
    match mode {
        SurrenderPenalty::ExcessOnly => withdrawal_cashflow(amount, contractual, beta),
        SurrenderPenalty::FullAmount => (1.0 - beta) * amount,
    }
}

/// Payoff at maturity: the larger of the remaining fund and the remaining
/// guarantee withdrawn as a final (penalised) cashflow.
pub fn terminal_payoff(state: State, contractual: f64, beta: f64) -> f64 {
    state
        .wealth
        .max(withdrawal_cashflow(state.guarantee, contractual, beta))
}

/// Evolves post-withdrawal wealth over period n (1-based) under the
/// risk-neutral lognormal dynamics with fee drag:
/// w * exp((r_n - fee - sigma_n^2/2) dt_n + sigma_n sqrt(dt_n) z).
/// Zero wealth is absorbing.
pub fn evolve_wealth(
    w_after: f64,
    period: usize,
    params: &MarketParams,
    fee_rate: f64,
    z: f64,
) -> f64 {
    assert!(w_after >= 0.0, "wealth must be nonnegative, got {w_after}");
    if w_after == 0.0 {
        return 0.0;
    }
    let r = params.rate(period);
    let v = params.vol(period);
    let dt = params.dt(period);
    w_after * ((r - fee_rate - 0.5 * v * v) * dt + v * dt.sqrt() * z).exp()
}
