//! Analytic synthesis of the internal-state layer weights.
//!
//! A ring neuron must (a) start rising when its predecessor and trigger are
//! both fully active, (b) stay silent when only one of them is, (c) sustain
//! itself once active, and (d) shut down as soon as its successor activates.
//! Writing those boundary conditions at four activation levels gives a 5x5
//! linear system in (w_prev, w_self, w_next, w_trigger, bias).

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::linalg;

/// Activation levels parameterizing the boundary conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryParams {
    /// Sigmoid saturation level; sigmoid(omega) must be close to 1.
    pub omega: f64,
    /// Pre-activation at which a neuron counts as excited (0 -> output 0.5).
    pub gamma: f64,
    /// Fully active output level.
    pub iota: f64,
    /// Inactive output level.
    pub eps: f64,
    /// Maximum number of neighbor neurons folded into the silence conditions.
    pub n_neigh: usize,
}

impl Default for BoundaryParams {
    fn default() -> Self {
        BoundaryParams {
            omega: 6.0,
            gamma: 0.0,
            iota: 0.95,
            eps: 0.01,
            n_neigh: 10,
        }
    }
}

impl BoundaryParams {
    pub fn validate(&self) -> Result<()> {
        // eps and iota are activation levels; gamma and omega live on the
        // pre-activation axis. The excitation level must sit strictly inside
        // the saturation band and the two activation levels must differ.
        if !(self.eps >= 0.0 && self.eps < self.iota && self.iota <= 1.0) {
            return Err(CoreError::DegenerateParameters(format!(
                "require 0 <= eps < iota <= 1, got eps {} iota {}",
                self.eps, self.iota
            )));
        }
        if !(self.gamma > -self.omega && self.gamma < self.omega) {
            return Err(CoreError::DegenerateParameters(format!(
                "excitation level {} outside (-omega, omega)",
                self.gamma
            )));
        }
        if crate::mat::sigmoid(self.omega) <= 0.99 {
            return Err(CoreError::DegenerateParameters(format!(
                "sigmoid(omega) = {} is not saturated",
                crate::mat::sigmoid(self.omega)
            )));
        }
        Ok(())
    }
}

/// Solved ring-neuron weights: predecessor excitation, self excitation,
/// successor inhibition, trigger gain, and bias.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CParams {
    pub w_prev: f64,
    pub w_self: f64,
    pub w_next: f64,
    pub w_trigger: f64,
    pub bias: f64,
}

/// Assemble the five boundary conditions and solve for the ring weights.
///
/// Row order: propagated excitation, predecessor-only silence, trigger-only
/// silence, self-excitation, successor inhibition; the right-hand side is
/// (gamma, -omega, -omega, omega, -omega).
pub fn solve_c_params(bp: &BoundaryParams) -> Result<CParams> {
    bp.validate()?;
    let (w, g, i, e) = (bp.omega, bp.gamma, bp.iota, bp.eps);
    let ne = bp.n_neigh as f64 * e;
    #[rustfmt::skip]
    let a = [
        i,      e, e, i, 1.0,
        i + ne, e, e, e, 1.0,
        ne,     e, e, i, 1.0,
        e,      i, e, e, 1.0,
        i,      i, i, i, 1.0,
    ];
    let rhs = [g, -w, -w, w, -w];

    let cond = linalg::condition_inf(&a, 5).map_err(|_| {
        CoreError::DegenerateParameters("boundary condition matrix is singular".into())
    })?;
    if !cond.is_finite() || cond > 1e12 {
        return Err(CoreError::DegenerateParameters(format!(
            "boundary condition matrix is near-singular (condition {cond:.3e})"
        )));
    }
    let x = linalg::solve(&a, &rhs, 5)?;
    Ok(CParams {
        w_prev: x[0],
        w_self: x[1],
        w_next: x[2],
        w_trigger: x[3],
        bias: x[4],
    })
}

/// Re-evaluate the five condition rows for a candidate solution. Used by
/// tests to check the back-substitution residual.
pub fn condition_residual(bp: &BoundaryParams, p: &CParams) -> [f64; 5] {
    let (w, g, i, e) = (bp.omega, bp.gamma, bp.iota, bp.eps);
    let ne = bp.n_neigh as f64 * e;
    let x = [p.w_prev, p.w_self, p.w_next, p.w_trigger, p.bias];
    let rows = [
        [i, e, e, i, 1.0],
        [i + ne, e, e, e, 1.0],
        [ne, e, e, i, 1.0],
        [e, i, e, e, 1.0],
        [i, i, i, i, 1.0],
    ];
    let rhs = [g, -w, -w, w, -w];
    let mut res = [0.0; 5];
    for (r, row) in rows.iter().enumerate() {
        let lhs: f64 = row.iter().zip(x.iter()).map(|(a, b)| a * b).sum();
        res[r] = lhs - rhs[r];
    }
    res
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent 5x5 solve via Cramer's rule with Laplace-expansion
    /// determinants. Deliberately shares nothing with linalg::solve.
    fn cramer5(a: &[f64; 25], b: &[f64; 5]) -> [f64; 5] {
        fn det(m: &[f64], n: usize) -> f64 {
            if n == 1 {
                return m[0];
            }
            let mut acc = 0.0;
            for col in 0..n {
                let mut minor = Vec::with_capacity((n - 1) * (n - 1));
                for r in 1..n {
                    for c in 0..n {
                        if c != col {
                            minor.push(m[r * n + c]);
                        }
                    }
                }
                let sign = if col % 2 == 0 { 1.0 } else { -1.0 };
                acc += sign * m[col] * det(&minor, n - 1);
            }
            acc
        }
        let d = det(a, 5);
        let mut out = [0.0; 5];
        for k in 0..5 {
            let mut ak = *a;
            for r in 0..5 {
                ak[r * 5 + k] = b[r];
            }
            out[k] = det(&ak, 5) / d;
        }
        out
    }

    fn oracle(bp: &BoundaryParams) -> [f64; 5] {
        let (w, g, i, e) = (bp.omega, bp.gamma, bp.iota, bp.eps);
        let ne = bp.n_neigh as f64 * e;
        #[rustfmt::skip]
        let a = [
            i,      e, e, i, 1.0,
            i + ne, e, e, e, 1.0,
            ne,     e, e, i, 1.0,
            e,      i, e, e, 1.0,
            i,      i, i, i, 1.0,
        ];
        cramer5(&a, &[g, -w, -w, w, -w])
    }

    #[test]
    fn default_solution_near_published_constants() {
        let p = solve_c_params(&BoundaryParams::default()).unwrap();
        let expect = [7.0, 20.0, -26.0, 7.0, -13.0];
        let got = [p.w_prev, p.w_self, p.w_next, p.w_trigger, p.bias];
        for (g, e) in got.iter().zip(expect.iter()) {
            assert!(
                ((g - e) / e).abs() < 0.15,
                "{g} deviates more than 15% from {e}"
            );
        }
    }

    #[test]
    fn residual_is_tiny() {
        let bp = BoundaryParams::default();
        let p = solve_c_params(&bp).unwrap();
        for r in condition_residual(&bp, &p) {
            assert!(r.abs() < 1e-9, "residual {r}");
        }
    }

    #[test]
    fn iota_equal_eps_is_singular() {
        let bp = BoundaryParams {
            iota: 0.01,
            eps: 0.01,
            ..BoundaryParams::default()
        };
        assert!(matches!(
            solve_c_params(&bp),
            Err(CoreError::DegenerateParameters(_))
        ));
    }

    #[test]
    fn matches_cramer_oracle_for_small_neighborhood() {
        let bp = BoundaryParams {
            n_neigh: 4,
            ..BoundaryParams::default()
        };
        let p = solve_c_params(&bp).unwrap();
        let o = oracle(&bp);
        let got = [p.w_prev, p.w_self, p.w_next, p.w_trigger, p.bias];
        for (g, e) in got.iter().zip(o.iter()) {
            assert!((g - e).abs() < 1e-9, "{g} vs oracle {e}");
        }
        // Smaller neighborhood shifts the predecessor weight away from the
        // n = 10 solution.
        let p10 = solve_c_params(&BoundaryParams::default()).unwrap();
        assert!((p.w_prev - p10.w_prev).abs() > 1e-3);
    }

    #[test]
    fn random_parameters_match_oracle() {
        // A coarse grid over the admissible region stands in for fuzzing:
        // the solver and the Cramer oracle must agree wherever both succeed.
        for &omega in &[5.0, 6.0, 8.0] {
            for &iota in &[0.85, 0.95, 0.99] {
                for &eps in &[0.002, 0.01, 0.04] {
                    for &n in &[2usize, 6, 10] {
                        let bp = BoundaryParams {
                            omega,
                            gamma: 0.0,
                            iota,
                            eps,
                            n_neigh: n,
                        };
                        if let Ok(p) = solve_c_params(&bp) {
                            let o = oracle(&bp);
                            let got = [p.w_prev, p.w_self, p.w_next, p.w_trigger, p.bias];
                            for (g, e) in got.iter().zip(o.iter()) {
                                assert!((g - e).abs() < 1e-6 * (1.0 + e.abs()));
                            }
                        }
                    }
                }
            }
        }
    }
}
