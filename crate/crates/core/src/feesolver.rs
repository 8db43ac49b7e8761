//! Fair-fee inversion: find the annual fee at which the t_0 annuity value
//! equals the premium.
//!
//! The value is smooth and strictly decreasing in the fee, so the root is
//! unique when bracketed. Each function evaluation is a full backward
//! induction, so the solver combines bisection safety with inverse-quadratic
//! and secant acceleration (Brent's method) and stops on a fee tolerance in
//! basis points.

use thiserror::Error;

use crate::contract::{ContractSpec, MarketParams};
use crate::engine::{self, EngineError, GridSpec, StrategyKind};

#[derive(Debug, Clone)]
pub struct FeeSolveConfig {
    pub bracket_lo_bp: f64,
    pub bracket_hi_bp: f64,
    /// Stopping tolerance on the fee, in basis points.
    pub tol_bp: f64,
    pub max_iters: u32,
}

impl Default for FeeSolveConfig {
    fn default() -> Self {
        FeeSolveConfig {
            bracket_lo_bp: 0.0,
            bracket_hi_bp: 1500.0,
            tol_bp: 0.05,
            max_iters: 60,
        }
    }
}

impl FeeSolveConfig {
    pub fn validate(&self) -> Result<(), FeeSolveError> {
        if !(self.bracket_lo_bp.is_finite()
            && self.bracket_hi_bp.is_finite()
            && self.bracket_lo_bp >= 0.0
            && self.bracket_lo_bp < self.bracket_hi_bp)
        {
            return Err(FeeSolveError::InvalidConfig(
                "brackets must satisfy 0 <= lo < hi",
            ));
        }
        if !(self.tol_bp.is_finite() && self.tol_bp > 0.0) {
            return Err(FeeSolveError::InvalidConfig("tol_bp must be positive"));
        }
        if self.max_iters == 0 {
            return Err(FeeSolveError::InvalidConfig("max_iters must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum FeeSolveError {
    #[error("fee solver configuration: {0}")]
    InvalidConfig(&'static str),
    #[error(
        "guarantee adds no value: price {price_at_lo:.6} at the lower bracket ({lo_bp} bp) is below the premium {premium:.6}"
    )]
    BracketLow {
        lo_bp: f64,
        price_at_lo: f64,
        premium: f64,
    },
    #[error(
        "upper bracket too small: price {price_at_hi:.6} at {hi_bp} bp still exceeds the premium {premium:.6}"
    )]
    BracketHigh {
        hi_bp: f64,
        price_at_hi: f64,
        premium: f64,
    },
    #[error("no convergence within {0} iterations")]
    MaxIterationsExceeded(u32),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

#[derive(Debug, Clone)]
pub struct FairFeeResult {
    /// Fair annual fee in basis points.
    pub fee_bp: f64,
    /// Price evaluations performed (including the bracket endpoints).
    pub iterations: u32,
    /// (price - premium) / premium at the returned fee.
    pub residual: f64,
    /// Price at the returned fee.
    pub price: f64,
}

/// Solves for the fair fee of a contract under the given strategy. The
/// contract's own `annual_fee_bp` is ignored; the fee is the unknown.
pub fn fair_fee(
    contract: &ContractSpec,
    params: &MarketParams,
    grid: &GridSpec,
    strategy: StrategyKind,
    cfg: &FeeSolveConfig,
) -> Result<FairFeeResult, FeeSolveError> {
    let premium = contract.premium;
    solve_fee_with(
        |fee_bp| {
            let priced = engine::price(&contract.with_fee_bp(fee_bp), params, grid, strategy)?;
            Ok(priced.price)
        },
        premium,
        cfg,
    )
}

/// Root solve on an arbitrary monotone price function; `price_fn(fee_bp)`
/// must be decreasing in the fee.
pub fn solve_fee_with<F>(
    mut price_fn: F,
    premium: f64,
    cfg: &FeeSolveConfig,
) -> Result<FairFeeResult, FeeSolveError>
where
    F: FnMut(f64) -> Result<f64, FeeSolveError>,
{
    cfg.validate()?;
    let tiny = 1e-9 * premium;
    let mut evals = 0u32;

    let price_lo = price_fn(cfg.bracket_lo_bp)?;
    evals += 1;
    if price_lo < premium - tiny {
        return Err(FeeSolveError::BracketLow {
            lo_bp: cfg.bracket_lo_bp,
            price_at_lo: price_lo,
            premium,
        });
    }
    if price_lo <= premium + tiny {
        // The guarantee is exactly worthless at the lower bracket.
        return Ok(FairFeeResult {
            fee_bp: cfg.bracket_lo_bp,
            iterations: evals,
            residual: (price_lo - premium) / premium,
            price: price_lo,
        });
    }
    let price_hi = price_fn(cfg.bracket_hi_bp)?;
    evals += 1;
    if price_hi > premium + tiny {
        return Err(FeeSolveError::BracketHigh {
            hi_bp: cfg.bracket_hi_bp,
            price_at_hi: price_hi,
            premium,
        });
    }

    // Brent's method on f(x) = price(x) - premium over [lo, hi].
    let mut a = cfg.bracket_lo_bp;
    let mut b = cfg.bracket_hi_bp;
    let mut fa = price_lo - premium;
    let mut fb = price_hi - premium;
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = b - a;

    for _ in 0..cfg.max_iters {
        if fb.abs() > fc.abs() {
            // Keep b the best estimate.
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * cfg.tol_bp;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            return Ok(FairFeeResult {
                fee_bp: b,
                iterations: evals,
                residual: fb / premium,
                price: fb + premium,
            });
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            // Inverse quadratic / secant step.
            let s = fb / fa;
            let (mut p, mut q) = if a == c {
                (2.0 * xm * s, 1.0 - s)
            } else {
                let q = fa / fc;
                let r = fb / fc;
                (
                    s * (2.0 * xm * q * (q - r) - (b - a) * (r - 1.0)),
                    (q - 1.0) * (r - 1.0) * (s - 1.0),
                )
            };
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            let min1 = 3.0 * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if 2.0 * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 {
            d
        } else {
            tol1.copysign(xm)
        };
        fb = price_fn(b)? - premium;
        evals += 1;
        if (fb > 0.0) == (fc > 0.0) {
            c = a;
            fc = fa;
            d = b - a;
            e = b - a;
        }
    }

    Err(FeeSolveError::MaxIterationsExceeded(cfg.max_iters))
}
