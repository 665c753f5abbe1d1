//! Stabilization functions of the numerical-trace closures, their
//! L2-stability conditions, and the flux penalty `tau_F`.

use serde::{Deserialize, Serialize};

use crate::error::{HdgError, Result};
use crate::problem::Flux;

/// Rule used to evaluate the flux penalty `tau_F(u_hat, u_h)` at a face.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TauFluxRule {
    Zero,
    /// `|F'(u_hat)|`
    #[default]
    AbsFluxDerivAtTrace,
    /// `1/2 sup |F'(s)|` over the interval spanned by `u_h` and `u_hat`.
    HalfSupFluxDeriv,
}

/// Piecewise-constant stabilization table.
///
/// Superscript `+` values act at left element endpoints `x_{i-1}^+`,
/// superscript `-` values at right endpoints `x_i^-`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilizationConfig {
    pub tau_pu_plus: f64,
    pub tau_pq_plus: f64,
    pub tau_ru_plus: f64,
    pub tau_ru_minus: f64,
    pub tau_rq_plus: f64,
    pub tau_rq_minus: f64,
    pub tau_rp_minus: f64,
    pub tau_su_plus: f64,
    pub tau_su_minus: f64,
    pub tau_sq_plus: f64,
    pub tau_sq_minus: f64,
    pub tau_sp_minus: f64,
    #[serde(default)]
    pub tau_f_rule: TauFluxRule,
}

impl StabilizationConfig {
    pub fn zero() -> Self {
        Self {
            tau_pu_plus: 0.0,
            tau_pq_plus: 0.0,
            tau_ru_plus: 0.0,
            tau_ru_minus: 0.0,
            tau_rq_plus: 0.0,
            tau_rq_minus: 0.0,
            tau_rp_minus: 0.0,
            tau_su_plus: 0.0,
            tau_su_minus: 0.0,
            tau_sq_plus: 0.0,
            tau_sq_minus: 0.0,
            tau_sp_minus: 0.0,
            tau_f_rule: TauFluxRule::AbsFluxDerivAtTrace,
        }
    }

    /// `tau_rq = -1`, `tau_su = 1` on both sides, everything else zero.
    /// Used for the periodic experiments and for the error analysis.
    pub fn paper_periodic() -> Self {
        Self {
            tau_rq_plus: -1.0,
            tau_rq_minus: -1.0,
            tau_su_plus: 1.0,
            tau_su_minus: 1.0,
            ..Self::zero()
        }
    }

    /// `tau_su = tau_sq = tau_ru = 1`, `tau_rq = -1` on both sides.
    pub fn paper_dirichlet() -> Self {
        Self {
            tau_su_plus: 1.0,
            tau_su_minus: 1.0,
            tau_sq_plus: 1.0,
            tau_sq_minus: 1.0,
            tau_ru_plus: 1.0,
            tau_ru_minus: 1.0,
            tau_rq_plus: -1.0,
            tau_rq_minus: -1.0,
            ..Self::zero()
        }
    }

    /// The simple sufficient family with every inequality taken with
    /// equality: `tau_su^+ = 0`, `tau_rq^+ = alpha/(2 beta)`,
    /// `tau_su^- = (alpha/beta)^2 / 2`, `tau_rq^- = -alpha/(2 beta)`.
    pub fn boundary_preset(alpha: f64, beta: f64) -> Self {
        let ab = alpha / beta;
        Self {
            tau_su_plus: 0.0,
            tau_rq_plus: 0.5 * ab,
            tau_su_minus: 0.5 * ab * ab,
            tau_rq_minus: -0.5 * ab,
            ..Self::zero()
        }
    }

    pub fn with_tau_f_rule(mut self, rule: TauFluxRule) -> Self {
        self.tau_f_rule = rule;
        self
    }

    /// `theta^a_w = tau_aw^- + tau_aw^+ - tau_ap^- tau_pw^+` for
    /// `a in {s, r}`, `w in {u, q}`.
    pub fn thetas(&self) -> Thetas {
        Thetas {
            s_u: self.tau_su_minus + self.tau_su_plus - self.tau_sp_minus * self.tau_pu_plus,
            s_q: self.tau_sq_minus + self.tau_sq_plus - self.tau_sp_minus * self.tau_pq_plus,
            r_u: self.tau_ru_minus + self.tau_ru_plus - self.tau_rp_minus * self.tau_pu_plus,
            r_q: self.tau_rq_minus + self.tau_rq_plus - self.tau_rp_minus * self.tau_pq_plus,
        }
    }

    /// Coefficients of the derived traces, with the outward normal folded in.
    pub fn derived_traces(&self) -> DerivedTraceTable {
        // n = -1 at x_{i-1}^+, n = +1 at x_i^-.
        DerivedTraceTable {
            p_plus: TraceClosure {
                gap_u: -self.tau_pu_plus,
                gap_q: -self.tau_pq_plus,
                gap_p: 0.0,
            },
            r_plus: TraceClosure {
                gap_u: -self.tau_ru_plus,
                gap_q: -self.tau_rq_plus,
                gap_p: 0.0,
            },
            s_plus: TraceClosure {
                gap_u: -self.tau_su_plus,
                gap_q: -self.tau_sq_plus,
                gap_p: 0.0,
            },
            r_minus: TraceClosure {
                gap_u: self.tau_ru_minus,
                gap_q: self.tau_rq_minus,
                gap_p: self.tau_rp_minus,
            },
            s_minus: TraceClosure {
                gap_u: self.tau_su_minus,
                gap_q: self.tau_sq_minus,
                gap_p: self.tau_sp_minus,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thetas {
    pub s_u: f64,
    pub s_q: f64,
    pub r_u: f64,
    pub r_q: f64,
}

impl Thetas {
    /// `theta^s_q theta^r_u - theta^s_u theta^r_q`
    pub fn determinant(&self) -> f64 {
        self.s_q * self.r_u - self.s_u * self.r_q
    }
}

/// `w_hat = w + gap_u (u_hat - u) + gap_q (q_hat - q) + gap_p (p_hat^- - p)`
/// where `w` is the one-sided interior value; normals are already applied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceClosure {
    pub gap_u: f64,
    pub gap_q: f64,
    pub gap_p: f64,
}

impl TraceClosure {
    pub fn apply(&self, interior: f64, gap_u: f64, gap_q: f64, gap_p: f64) -> f64 {
        interior + self.gap_u * gap_u + self.gap_q * gap_q + self.gap_p * gap_p
    }
}

/// Closures for `p_hat^+`, `r_hat^+`, `s_hat^+` (left endpoints) and
/// `r_hat^-`, `s_hat^-` (right endpoints).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedTraceTable {
    pub p_plus: TraceClosure,
    pub r_plus: TraceClosure,
    pub s_plus: TraceClosure,
    pub r_minus: TraceClosure,
    pub s_minus: TraceClosure,
}

/// Result of checking the L2-stability conditions.
#[derive(Debug, Clone, PartialEq)]
pub enum StabilityVerdict {
    Pass,
    Fail(Vec<String>),
}

impl StabilityVerdict {
    pub fn is_pass(&self) -> bool {
        matches!(self, StabilityVerdict::Pass)
    }
}

/// Checks the five static condition groups for L2 stability. The sixth
/// one, `tau_F >= tilde tau`, depends on the discrete solution and is
/// guaranteed by [`TauFluxRule::HalfSupFluxDeriv`] rather than checked here.
pub fn check_stability(cfg: &StabilizationConfig, alpha: f64, beta: f64) -> Result<StabilityVerdict> {
    if !(beta < 0.0) {
        return Err(HdgError::InvalidProblem(format!(
            "beta must be negative, got {beta}"
        )));
    }
    let ab = alpha / beta;
    let c = cfg;
    let mut violated = Vec::new();

    let plus_u = c.tau_su_plus + ab * c.tau_pu_plus - 0.5 * c.tau_pu_plus * c.tau_pu_plus;
    let plus_q = -c.tau_rq_plus + 0.5 * ab - 0.5 * c.tau_pq_plus * c.tau_pq_plus;

    let or_left = c.tau_su_plus >= -ab * c.tau_pu_plus + 0.5 * c.tau_pu_plus * c.tau_pu_plus;
    let or_right = c.tau_rq_plus <= 0.5 * ab - 0.5 * c.tau_pq_plus * c.tau_pq_plus;
    if !(or_left || or_right) {
        violated.push(
            "tau_su+ >= -(alpha/beta) tau_pu+ + tau_pu+^2/2  or  tau_rq+ <= alpha/(2 beta) - tau_pq+^2/2"
                .to_string(),
        );
    }

    let cross = c.tau_sq_plus - c.tau_ru_plus + ab * c.tau_pq_plus - c.tau_pu_plus * c.tau_pq_plus;
    if !(plus_u * plus_q >= 0.25 * cross * cross) {
        violated.push(
            "(tau_su+ + (alpha/beta) tau_pu+ - tau_pu+^2/2)(-tau_rq+ + alpha/(2 beta) - tau_pq+^2/2) >= (tau_sq+ - tau_ru+ + (alpha/beta) tau_pq+ - tau_pu+ tau_pq+)^2/4"
                .to_string(),
        );
    }

    let sp = c.tau_sp_minus + ab;
    if !(c.tau_su_minus >= 0.5 * sp * sp) {
        violated.push("tau_su- >= (tau_sp- + alpha/beta)^2/2".to_string());
    }

    if !(c.tau_rq_minus <= -0.5 * ab - 0.5 * c.tau_rp_minus * c.tau_rp_minus) {
        violated.push("tau_rq- <= -alpha/(2 beta) - tau_rp-^2/2".to_string());
    }

    let d = c.tau_sq_minus - c.tau_ru_minus;
    if !(-c.tau_su_minus * (c.tau_rq_minus + 0.5 * ab) >= 0.25 * d * d) {
        violated.push(
            "-tau_su- (tau_rq- + alpha/(2 beta)) >= (tau_sq- - tau_ru-)^2/4".to_string(),
        );
    }

    Ok(if violated.is_empty() {
        StabilityVerdict::Pass
    } else {
        StabilityVerdict::Fail(violated)
    })
}

/// Flux penalty at a face with interior value `u_h` and trace `u_hat`.
pub fn tau_f_value(rule: TauFluxRule, flux: &Flux, u_h: f64, u_hat: f64) -> f64 {
    if flux.is_zero() {
        return 0.0;
    }
    match rule {
        TauFluxRule::Zero => 0.0,
        TauFluxRule::AbsFluxDerivAtTrace => flux.derivative(u_hat).abs(),
        TauFluxRule::HalfSupFluxDeriv => {
            let (lo, hi) = (u_h.min(u_hat), u_h.max(u_hat));
            let (mid, rad) = (0.5 * (lo + hi), 0.5 * (hi - lo));
            let mut sup = flux.derivative(lo).abs().max(flux.derivative(hi).abs());
            for j in 0..8 {
                let s = mid + rad * ((2 * j + 1) as f64 * std::f64::consts::PI / 16.0).cos();
                sup = sup.max(flux.derivative(s).abs());
            }
            0.5 * sup
        }
    }
}
