//! Gauss-Hermite quadrature rules.
//!
//! A rule of order `q` approximates integrals against the weight e^(-x^2)
//! over the whole real line,
//!
//! ```text
//! ∫ e^(-x^2) f(x) dx ≈ Σ_k w_k f(x_k),
//! ```
//!
//! and is exact for polynomial `f` of degree up to 2q-1. The nodes are the
//! roots of the Hermite polynomial H_q and are found by Newton iteration on
//! the orthonormal Hermite recurrence, which is numerically equivalent to the
//! Golub-Welsch eigenvalue formulation but needs no linear algebra.

use std::f64::consts::PI;

use thiserror::Error;

/// Largest supported quadrature order.
pub const MAX_QUAD_ORDER: usize = 64;

#[derive(Debug, Error, PartialEq)]
pub enum QuadratureError {
    #[error("quadrature order must be in 1..={MAX_QUAD_ORDER}, got {0}")]
    OrderOutOfRange(usize),
    #[error("root solve failed to converge for order {order}, root index {index}")]
    NoConvergence { order: usize, index: usize },
}

/// Nodes and weights of a Gauss-Hermite rule.
///
/// Nodes are stored in ascending order and are symmetric about zero; the
/// weights are all positive and sum to sqrt(pi).
#[derive(Debug, Clone, PartialEq)]
pub struct GaussHermiteRule {
    order: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussHermiteRule {
    pub fn new(order: usize) -> Result<Self, QuadratureError> {
        gauss_hermite(order)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// ∫ e^(-x^2) f(x) dx.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    /// E[f(Z)] for Z standard normal, via the change of variables
    /// z = sqrt(2) x that maps the Gaussian density onto the e^(-x^2) weight.
    pub fn expectation<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        let norm = 1.0 / PI.sqrt();
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| norm * w * f(std::f64::consts::SQRT_2 * x))
            .sum()
    }
}

/// Value of the orthonormal Hermite function h_q at x, together with h_{q-1}.
///
/// The orthonormal recurrence h_j = x sqrt(2/j) h_{j-1} - sqrt((j-1)/j) h_{j-2}
/// keeps intermediate values O(1), so it is stable for every supported order.
fn hermite_pair(order: usize, x: f64) -> (f64, f64) {
    let mut h = PI.powf(-0.25);
    let mut h_prev = 0.0;
    for j in 1..=order {
        let jf = j as f64;
        let next = x * (2.0 / jf).sqrt() * h - ((jf - 1.0) / jf).sqrt() * h_prev;
        h_prev = h;
        h = next;
    }
    (h, h_prev)
}

/// Builds the Gauss-Hermite rule of the given order.
pub fn gauss_hermite(order: usize) -> Result<GaussHermiteRule, QuadratureError> {
    if order < 1 || order > MAX_QUAD_ORDER {
        return Err(QuadratureError::OrderOutOfRange(order));
    }

    let n = order;
    let nf = n as f64;
    let half = (n + 1) / 2;
    // Positive roots, largest first.
    let mut roots = vec![0.0_f64; half];
    let mut root_weights = vec![0.0_f64; half];

    let mut z = 0.0_f64;
    for i in 0..half {
        // Standard initial guesses for the descending sequence of roots.
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * roots[0],
            3 => 1.91 * z - 0.91 * roots[1],
            _ => 2.0 * z - roots[i - 2],
        };
        if n % 2 == 1 && i == half - 1 {
            // The middle root of an odd-order rule is exactly zero.
            z = 0.0;
        }

        let mut converged = false;
        let mut deriv = 0.0;
        for _ in 0..200 {
            let (h, h_prev) = hermite_pair(n, z);
            deriv = (2.0 * nf).sqrt() * h_prev;
            let step = h / deriv;
            z -= step;
            if step.abs() <= 1e-15 * (1.0 + z.abs()) {
                // One polishing pass after convergence.
                let (h2, h_prev2) = hermite_pair(n, z);
                deriv = (2.0 * nf).sqrt() * h_prev2;
                z -= h2 / deriv;
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(QuadratureError::NoConvergence { order: n, index: i });
        }
        if n % 2 == 1 && i == half - 1 {
            z = 0.0;
            let (_, h_prev) = hermite_pair(n, z);
            deriv = (2.0 * nf).sqrt() * h_prev;
        }
        roots[i] = z;
        root_weights[i] = 2.0 / (deriv * deriv);
    }

    // Mirror the positive roots into an ascending, exactly symmetric rule.
    let mut nodes = vec![0.0_f64; n];
    let mut weights = vec![0.0_f64; n];
    for i in 0..half {
        nodes[i] = -roots[i];
        weights[i] = root_weights[i];
        nodes[n - 1 - i] = roots[i];
        weights[n - 1 - i] = root_weights[i];
    }

    Ok(GaussHermiteRule {
        order: n,
        nodes,
        weights,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn order_one_is_midpoint_rule() {
        let rule = gauss_hermite(1).unwrap();
        assert_eq!(rule.nodes(), &[0.0]);
        assert_abs_diff_eq!(rule.weights()[0], PI.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn order_two_matches_analytic_roots() {
        let rule = gauss_hermite(2).unwrap();
        let r = 0.5_f64.sqrt();
        assert_abs_diff_eq!(rule.nodes()[0], -r, epsilon = 1e-15);
        assert_abs_diff_eq!(rule.nodes()[1], r, epsilon = 1e-15);
        assert_abs_diff_eq!(rule.weights()[0], PI.sqrt() / 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(rule.weights()[1], PI.sqrt() / 2.0, epsilon = 1e-15);
    }

    #[test]
    fn order_three_matches_analytic_rule() {
        // Roots of H_3 are 0 and ±sqrt(3/2); weights 2√π/3 and √π/6.
        let rule = gauss_hermite(3).unwrap();
        let r = (1.5_f64).sqrt();
        assert_abs_diff_eq!(rule.nodes()[0], -r, epsilon = 1e-14);
        assert_abs_diff_eq!(rule.nodes()[1], 0.0, epsilon = 0.0);
        assert_abs_diff_eq!(rule.nodes()[2], r, epsilon = 1e-14);
        assert_abs_diff_eq!(rule.weights()[1], 2.0 * PI.sqrt() / 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(rule.weights()[0], PI.sqrt() / 6.0, epsilon = 1e-14);
    }

    #[test]
    fn second_moment_via_order_nine() {
        let rule = gauss_hermite(9).unwrap();
        let integral = rule.integrate(|x| x * x);
        assert_abs_diff_eq!(integral, PI.sqrt() / 2.0, epsilon = 1e-12);
    }

    /// Gaussian moment ∫ x^k e^(-x^2) dx computed independently:
    /// zero for odd k, sqrt(pi) (k-1)!! / 2^(k/2) for even k.
    fn gaussian_moment(k: usize) -> f64 {
        if k % 2 == 1 {
            return 0.0;
        }
        let mut double_fact = 1.0;
        let mut j = k as i64 - 1;
        while j > 1 {
            double_fact *= j as f64;
            j -= 2;
        }
        PI.sqrt() * double_fact / 2f64.powi(k as i32 / 2)
    }

    #[test]
    fn exactness_sweep_over_orders() {
        for q in [3usize, 5, 9, 17] {
            let rule = gauss_hermite(q).unwrap();
            for k in 0..=(2 * q - 1) {
                let got = rule.integrate(|x| x.powi(k as i32));
                let want = gaussian_moment(k);
                if k % 2 == 1 {
                    // The exact cancellation of the symmetric terms happens
                    // in floating point, so the achievable zero scales with
                    // the magnitude of the summands.
                    let scale: f64 = rule.integrate(|x| x.abs().powi(k as i32));
                    assert!(
                        got.abs() < 1e-12_f64.max(1e-15 * scale),
                        "q={q} k={k}: odd moment {got} not ~0"
                    );
                } else {
                    assert!(
                        (got - want).abs() <= 1e-11 * want.abs(),
                        "q={q} k={k}: got {got}, want {want}"
                    );
                }
            }
        }
    }

    #[test]
    fn weights_positive_and_sum_to_sqrt_pi_up_to_max_order() {
        for q in 1..=MAX_QUAD_ORDER {
            let rule = gauss_hermite(q).unwrap();
            assert!(rule.weights().iter().all(|&w| w > 0.0), "order {q}");
            let sum: f64 = rule.weights().iter().sum();
            assert_abs_diff_eq!(sum, PI.sqrt(), epsilon = 1e-12);
            for (a, b) in rule.nodes().iter().zip(rule.nodes().iter().rev()) {
                assert_abs_diff_eq!(*a, -*b, epsilon = 0.0);
            }
        }
    }

    #[test]
    fn expectation_of_lognormal_mean() {
        // E[e^(cZ)] = e^(c^2/2).
        let rule = gauss_hermite(9).unwrap();
        for c in [0.1, 0.3, 0.6] {
            let got = rule.expectation(|z| (c * z).exp());
            assert_abs_diff_eq!(got, (c * c / 2.0).exp(), epsilon = 1e-10);
        }
    }

    #[test]
    fn rejects_out_of_range_orders() {
        assert_eq!(
            gauss_hermite(0).unwrap_err(),
            QuadratureError::OrderOutOfRange(0)
        );
        assert_eq!(
            gauss_hermite(MAX_QUAD_ORDER + 1).unwrap_err(),
            QuadratureError::OrderOutOfRange(MAX_QUAD_ORDER + 1)
        );
    }
}
