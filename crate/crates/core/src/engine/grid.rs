//! Discretization of the wealth/guarantee state space.

use crate::contract::{ContractSpec, MarketParams};
use crate::engine::EngineError;

/// Smallest accepted number of wealth-grid intervals.
pub const MIN_W_INTERVALS: usize = 50;

/// Parameters from which a [`GridSpec`] is built.
#[derive(Debug, Clone)]
pub struct GridConfig {
    /// Number of wealth-grid intervals M (M+1 nodes).
    pub num_intervals: usize,
    /// Guarantee-grid refinement L: the node spacing is the regular
    /// contractual amount divided by L, so every contractual withdrawal is an
    /// exact grid step.
    pub refine: usize,
    /// Gauss-Hermite order used for the expectation step.
    pub quad_order: usize,
    /// Upper wealth bound; `None` uses [`GridSpec::default_w_max`].
    pub w_max: Option<f64>,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            num_intervals: 400,
            refine: 2,
            quad_order: 9,
            w_max: None,
        }
    }
}

/// The discretized state space: wealth nodes (uniform, starting at the
/// absorbing state 0), guarantee nodes (a lattice of contractual-amount
/// steps from 0 up to the premium), and the quadrature order.
#[derive(Debug, Clone)]
pub struct GridSpec {
    pub w_nodes: Vec<f64>,
    pub a_nodes: Vec<f64>,
    pub quad_order: usize,
}

impl GridSpec {
    /// Builds the default discretization for a contract.
    ///
    /// The guarantee grid is anchored at the premium and descends in steps of
    /// (regular contractual amount) / refine, so the withdrawal lattice
    /// contains every contractual amount exactly. When the contract has a
    /// stub period the remainder below the last full step becomes a short
    /// bottom interval above the zero node.
    pub fn build(
        contract: &ContractSpec,
        params: &MarketParams,
        cfg: &GridConfig,
    ) -> Result<Self, EngineError> {
        if cfg.refine < 1 {
            return Err(EngineError::InvalidGuaranteeGrid(
                "refinement must be at least 1".into(),
            ));
        }
        let raw_w_max = cfg.w_max.unwrap_or_else(|| Self::default_w_max(contract, params));
        if !raw_w_max.is_finite() || raw_w_max <= contract.premium {
            return Err(EngineError::InvalidWealthGrid(format!(
                "w_max {raw_w_max} must exceed the premium"
            )));
        }

        let premium = contract.premium;
        let spacing = contract.contractual_amount(1) / cfg.refine as f64;
        let m = cfg.num_intervals;

        // Wealth spacing is snapped to an exact divisor of the guarantee
        // lattice spacing, so every admissible withdrawal shifts wealth by a
        // whole number of grid intervals and the value surface's kinks land
        // on spline knots. The bound only ever moves up, by less than 2x.
        let h = if m > 0 && spacing * (m as f64) >= raw_w_max {
            let divisor = (spacing * m as f64 / raw_w_max).floor().max(1.0);
            spacing / divisor
        } else {
            raw_w_max / m.max(1) as f64
        };
        let mut w_nodes: Vec<f64> = (0..=m).map(|i| i as f64 * h).collect();
        w_nodes[0] = 0.0;
        let tol = 1e-9 * premium;
        let mut a_desc = Vec::new();
        let mut i = 0usize;
        loop {
            let v = premium - i as f64 * spacing;
            if v <= tol {
                break;
            }
            a_desc.push(v);
            i += 1;
        }
        a_desc.push(0.0);
        a_desc.reverse();
        let j = a_desc.len();
        a_desc[0] = 0.0;
        a_desc[j - 1] = premium;

        let grid = GridSpec {
            w_nodes,
            a_nodes: a_desc,
            quad_order: cfg.quad_order,
        };
        grid.validate(contract)?;
        Ok(grid)
    }

    /// Default upper wealth bound: the premium grown at the largest period
    /// rate over the full maturity, plus three standard deviations of
    /// terminal log-wealth, floored at several premiums. The annuity value is
    /// asymptotically linear in wealth, so the spline's linear tail covers
    /// the truncated mass accurately; keeping the bound moderate preserves
    /// near-the-money resolution at a fixed node count.
    pub fn default_w_max(contract: &ContractSpec, params: &MarketParams) -> f64 {
        let t = contract.maturity_years;
        let max_r = (1..=params.num_periods())
            .map(|n| params.rate(n))
            .fold(f64::NEG_INFINITY, f64::max);
        let max_vol = (1..=params.num_periods())
            .map(|n| params.vol(n))
            .fold(0.0, f64::max);
        contract.premium * (max_r * t + 3.0 * max_vol * t.sqrt()).exp().max(5.0)
    }

    /// Checks the structural invariants and that every contractual withdrawal
    /// at a jump date is an exact guarantee-grid step.
    pub fn validate(&self, contract: &ContractSpec) -> Result<(), EngineError> {
        if self.w_nodes.len() < MIN_W_INTERVALS + 1 {
            return Err(EngineError::InvalidWealthGrid(format!(
                "need at least {MIN_W_INTERVALS} intervals, got {}",
                self.w_nodes.len().saturating_sub(1)
            )));
        }
        if self.w_nodes[0] != 0.0 {
            return Err(EngineError::InvalidWealthGrid(
                "grid must start at the absorbing state W = 0".into(),
            ));
        }
        if self.w_nodes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(EngineError::InvalidWealthGrid(
                "nodes must be strictly increasing".into(),
            ));
        }
        if self.a_nodes.len() < 2 {
            return Err(EngineError::InvalidGuaranteeGrid(
                "need at least 2 nodes".into(),
            ));
        }
        if self.a_nodes[0] != 0.0 {
            return Err(EngineError::InvalidGuaranteeGrid(
                "grid must start at 0".into(),
            ));
        }
        let tol = 1e-9 * contract.premium;
        if (self.a_nodes[self.a_nodes.len() - 1] - contract.premium).abs() > tol {
            return Err(EngineError::InvalidGuaranteeGrid(
                "grid must end at the premium".into(),
            ));
        }
        if self.a_nodes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(EngineError::InvalidGuaranteeGrid(
                "nodes must be strictly increasing".into(),
            ));
        }
        if !(1..=crate::mathkit::MAX_QUAD_ORDER).contains(&self.quad_order) {
            return Err(EngineError::InvalidQuadOrder(self.quad_order));
        }
        // Every admissible contractual withdrawal must map onto the lattice.
        let n_dates = contract.num_dates();
        for date in 1..n_dates {
            let g = contract.contractual_amount(date);
            for (j, &a) in self.a_nodes.iter().enumerate() {
                let target = a - g.min(a);
                if self.a_index_of(target).is_none() {
                    return Err(EngineError::ContractualOffGrid { date, a_index: j });
                }
            }
        }
        Ok(())
    }

    /// Index of the guarantee node matching `value` within tolerance.
    pub fn a_index_of(&self, value: f64) -> Option<usize> {
        let tol = 1e-7 * self.a_nodes[self.a_nodes.len() - 1].max(1.0);
        let idx = self.a_nodes.partition_point(|&v| v < value - tol);
        if idx < self.a_nodes.len() && (self.a_nodes[idx] - value).abs() <= tol {
            Some(idx)
        } else {
            None
        }
    }

    pub fn num_w_intervals(&self) -> usize {
        self.w_nodes.len() - 1
    }

    pub fn num_a_nodes(&self) -> usize {
        self.a_nodes.len()
    }

    pub fn w_max(&self) -> f64 {
        self.w_nodes[self.w_nodes.len() - 1]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contract::SurrenderPenalty;

    fn contract(maturity: f64, per_year: u32) -> ContractSpec {
        ContractSpec::new(100.0, maturity, per_year, 0.1, SurrenderPenalty::ExcessOnly, 0.0)
            .unwrap()
    }

    #[test]
    fn yearly_grid_has_expected_lattice() {
        let c = contract(10.0, 1);
        let p = MarketParams::flat(0.05, 0.2, &c).unwrap();
        let g = GridSpec::build(&c, &p, &GridConfig::default()).unwrap();
        // Spacing G/2 = 5 over [0, 100]: 21 nodes.
        assert_eq!(g.num_a_nodes(), 21);
        assert_eq!(g.a_nodes[0], 0.0);
        assert_eq!(g.a_nodes[20], 100.0);
        assert!((g.a_nodes[1] - 5.0).abs() < 1e-9);
        assert_eq!(g.w_nodes.len(), 401);
        assert_eq!(g.w_nodes[0], 0.0);
    }

    #[test]
    fn stub_grid_keeps_contractual_amounts_on_lattice() {
        // 2.6 years quarterly: N = 11, stub period 0.1y. The top-anchored
        // lattice leaves a short interval just above zero.
        let c = contract(2.6, 4);
        let p = MarketParams::flat(0.05, 0.2, &c).unwrap();
        let g = GridSpec::build(&c, &p, &GridConfig::default()).unwrap();
        assert_eq!(g.a_nodes[0], 0.0);
        assert_eq!(*g.a_nodes.last().unwrap(), 100.0);
        g.validate(&c).unwrap();
        // The first positive node is the stub remainder, smaller than the
        // regular half-step spacing.
        let spacing = c.contractual_amount(1) / 2.0;
        assert!(g.a_nodes[1] < spacing);
    }

    #[test]
    fn rejects_degenerate_grids() {
        let c = contract(10.0, 1);
        let p = MarketParams::flat(0.05, 0.2, &c).unwrap();
        let cfg = GridConfig {
            num_intervals: 10,
            ..GridConfig::default()
        };
        assert!(matches!(
            GridSpec::build(&c, &p, &cfg),
            Err(EngineError::InvalidWealthGrid(_))
        ));
    }

    #[test]
    fn off_lattice_contractual_amount_is_reported() {
        let c = contract(10.0, 1);
        // Guarantee nodes {0, 33, 100}: the contractual amount 10 is not a
        // step from every node.
        let g = GridSpec {
            w_nodes: (0..=100).map(|i| i as f64 * 4.0).collect(),
            a_nodes: vec![0.0, 33.0, 100.0],
            quad_order: 9,
        };
        assert!(matches!(
            g.validate(&c),
            Err(EngineError::ContractualOffGrid { .. })
        ));
    }

    #[test]
    fn default_w_max_formula() {
        let c = contract(10.0, 1);
        let p = MarketParams::flat(0.05, 0.2, &c).unwrap();
        let want = 100.0 * (0.05_f64 * 10.0 + 3.0 * 0.2 * 10.0_f64.sqrt()).exp();
        assert!((GridSpec::default_w_max(&c, &p) - want).abs() < 1e-9 * want);
        // Zero volatility still leaves room above the deterministic forward.
        let p0 = MarketParams::flat(0.05, 0.0, &c).unwrap();
        assert!(GridSpec::default_w_max(&c, &p0) >= 500.0);
    }

    #[test]
    fn wealth_spacing_divides_guarantee_lattice() {
        let c = contract(10.0, 1);
        let p = MarketParams::flat(0.05, 0.3, &c).unwrap();
        let g = GridSpec::build(&c, &p, &GridConfig::default()).unwrap();
        let h = g.w_nodes[1] - g.w_nodes[0];
        let spacing = 5.0; // G/2
        let ratio = spacing / h;
        assert!((ratio - ratio.round()).abs() < 1e-9, "h {h} does not divide {spacing}");
        assert!(g.w_max() >= GridSpec::default_w_max(&c, &p));
    }
}
