//! Exponential families in canonical form
//! `p(θ) = h(θ) exp{ηᵀR(θ) − A(η)}`.
//!
//! | family    | η                 | R(θ)                 | h(θ)            |
//! |-----------|-------------------|----------------------|-----------------|
//! | Gaussian  | (mρ, −ρ/2)        | (w, w²)              | 1/√(2π)         |
//! | Gamma     | (κ − 1, −λ)       | (log ς, ς)           | 1               |
//! | Bernoulli | log(π/(1 − π))    | ι                    | 1               |
//! | Beta      | (r, s)            | (log π, log(1 − π))  | 1/(π(1 − π))    |
//!
//! The variational engine only ever needs normalizers, their gradients
//! (`E[R(θ)] = ∇A(η)`), entropies and expected log densities, so that is all
//! this module provides.

pub mod special;

pub use special::{digamma, log_gamma, trigamma};

use crate::error::{Error, Result};
use special::{digamma_pos, log_gamma_pos};
/// Bernoulli natural parameters are clamped to `[-BERNOULLI_ETA_CLAMP,
/// BERNOULLI_ETA_CLAMP]` before exponentiation.
pub const BERNOULLI_ETA_CLAMP: f64 = 500.0;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Gaussian,
    Gamma,
    Bernoulli,
    Beta,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Gaussian => "Gaussian",
            Family::Gamma => "Gamma",
            Family::Bernoulli => "Bernoulli",
            Family::Beta => "Beta",
        }
    }
}

/// Family-tagged natural parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NaturalParam {
    Gaussian([f64; 2]),
    Gamma([f64; 2]),
    Bernoulli(f64),
    Beta([f64; 2]),
}

/// Conventional parameterisation of each family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StandardParam {
    /// Mean and precision.
    Gaussian {
        mean: f64,
        precision: f64,
    },
    /// Shape and rate.
    Gamma {
        shape: f64,
        rate: f64,
    },
    Bernoulli {
        p: f64,
    },
    Beta {
        r: f64,
        s: f64,
    },
}

/// Logistic sigmoid with the natural parameter clamped first.
#[inline]
pub fn sigmoid(eta: f64) -> f64 {
    let eta = clamp_bernoulli(eta);
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub fn clamp_bernoulli(eta: f64) -> f64 {
    eta.clamp(-BERNOULLI_ETA_CLAMP, BERNOULLI_ETA_CLAMP)
}

/// `log(1 + exp(η))` without overflow.
#[inline]
pub fn softplus(eta: f64) -> f64 {
    let eta = clamp_bernoulli(eta);
    eta.max(0.0) + (-eta.abs()).exp().ln_1p()
}

fn invalid(family: Family, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        family: family.name(),
        reason: reason.into(),
    }
}

impl NaturalParam {
    pub fn gaussian(mean: f64, precision: f64) -> Self {
        NaturalParam::Gaussian([mean * precision, -0.5 * precision])
    }

    pub fn gamma(shape: f64, rate: f64) -> Self {
        NaturalParam::Gamma([shape - 1.0, -rate])
    }

    pub fn bernoulli(p: f64) -> Self {
        NaturalParam::Bernoulli((p / (1.0 - p)).ln())
    }

    pub fn beta(r: f64, s: f64) -> Self {
        NaturalParam::Beta([r, s])
    }

    pub fn family(&self) -> Family {
        match self {
            NaturalParam::Gaussian(_) => Family::Gaussian,
            NaturalParam::Gamma(_) => Family::Gamma,
            NaturalParam::Bernoulli(_) => Family::Bernoulli,
            NaturalParam::Beta(_) => Family::Beta,
        }
    }

    pub fn eta(&self) -> &[f64] {
        match self {
            NaturalParam::Gaussian(e) | NaturalParam::Gamma(e) | NaturalParam::Beta(e) => e,
            NaturalParam::Bernoulli(e) => std::slice::from_ref(e),
        }
    }

    pub fn eta_mut(&mut self) -> &mut [f64] {
        match self {
            NaturalParam::Gaussian(e) | NaturalParam::Gamma(e) | NaturalParam::Beta(e) => e,
            NaturalParam::Bernoulli(e) => std::slice::from_mut(e),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let family = self.family();
        if self.eta().iter().any(|v| !v.is_finite()) {
            return Err(invalid(family, "non-finite component"));
        }
        match *self {
            NaturalParam::Gaussian([_, e2]) if e2 >= 0.0 => {
                Err(invalid(family, format!("eta_2 must be negative, got {e2}")))
            }
            NaturalParam::Gamma([e1, e2]) if e1 <= -1.0 || e2 >= 0.0 => Err(invalid(
                family,
                format!("need eta_1 > -1 and eta_2 < 0, got ({e1}, {e2})"),
            )),
            NaturalParam::Beta([r, s]) if r <= 0.0 || s <= 0.0 => Err(invalid(
                family,
                format!("need both components positive, got ({r}, {s})"),
            )),
            _ => Ok(()),
        }
    }

    /// Conventional parameters recovered from η.
    pub fn standard(&self) -> Result<StandardParam> {
        self.validate()?;
        Ok(match *self {
            NaturalParam::Gaussian([e1, e2]) => StandardParam::Gaussian {
                mean: -e1 / (2.0 * e2),
                precision: -2.0 * e2,
            },
            NaturalParam::Gamma([e1, e2]) => StandardParam::Gamma {
                shape: e1 + 1.0,
                rate: -e2,
            },
            NaturalParam::Bernoulli(e) => StandardParam::Bernoulli { p: sigmoid(e) },
            NaturalParam::Beta([r, s]) => StandardParam::Beta { r, s },
        })
    }

    /// Log normalizer `A(η)`.
    pub fn log_normalizer(&self) -> Result<f64> {
        self.validate()?;
        Ok(match *self {
            NaturalParam::Gaussian([e1, e2]) => -e1 * e1 / (4.0 * e2) - 0.5 * (-2.0 * e2).ln(),
            NaturalParam::Gamma([e1, e2]) => log_gamma_pos(e1 + 1.0) - (e1 + 1.0) * (-e2).ln(),
            NaturalParam::Bernoulli(e) => softplus(e),
            NaturalParam::Beta([r, s]) => log_gamma_pos(r) + log_gamma_pos(s) - log_gamma_pos(r + s),
        })
    }

    /// `∇A(η) = E[R(θ)]`.
    pub fn grad_log_normalizer(&self) -> Result<Vec<f64>> {
        self.validate()?;
        Ok(match *self {
            NaturalParam::Gaussian([e1, e2]) => {
                let m = -e1 / (2.0 * e2);
                let rho = -2.0 * e2;
                vec![m, m * m + 1.0 / rho]
            }
            NaturalParam::Gamma([e1, e2]) => {
                vec![digamma_pos(e1 + 1.0) - (-e2).ln(), -(e1 + 1.0) / e2]
            }
            NaturalParam::Bernoulli(e) => vec![sigmoid(e)],
            NaturalParam::Beta([r, s]) => {
                let total = digamma_pos(r + s);
                vec![digamma_pos(r) - total, digamma_pos(s) - total]
            }
        })
    }

    /// `E_q[log h(θ)]` under this distribution.
    pub fn expected_log_base(&self) -> Result<f64> {
        self.validate()?;
        Ok(match *self {
            NaturalParam::Gaussian(_) => -HALF_LN_2PI,
            NaturalParam::Gamma(_) | NaturalParam::Bernoulli(_) => 0.0,
            NaturalParam::Beta([r, s]) => {
                let total = digamma_pos(r + s);
                -(digamma_pos(r) - total) - (digamma_pos(s) - total)
            }
        })
    }

    /// Differential entropy (Shannon entropy for the Bernoulli).
    pub fn entropy(&self) -> Result<f64> {
        if let NaturalParam::Bernoulli(e) = *self {
            // ln(1 + e^{-|η|}) + |η| σ(-|η|), free of cancellation in the tails
            let a = clamp_bernoulli(e).abs();
            return Ok((-a).exp().ln_1p() + a * sigmoid(-a));
        }
        let grad = self.grad_log_normalizer()?;
        let dot: f64 = self.eta().iter().zip(&grad).map(|(e, g)| e * g).sum();
        Ok(-self.expected_log_base()? + self.log_normalizer()? - dot)
    }

    /// Cross term `E_q[log p(θ)]` where `p` has natural parameter `prior` and
    /// `q` is `self`; both must be the same family.
    pub fn expected_log_density(&self, prior: &NaturalParam) -> Result<f64> {
        if self.family() != prior.family() {
            return Err(invalid(
                self.family(),
                format!("cannot take expectations of a {} density", prior.family().name()),
            ));
        }
        let grad = self.grad_log_normalizer()?;
        let dot: f64 = prior.eta().iter().zip(&grad).map(|(z, g)| z * g).sum();
        Ok(self.expected_log_base()? + dot - prior.log_normalizer()?)
    }
}

/// Gaussian log density with the given mean and precision.
pub fn ln_normal_pdf(x: f64, mean: f64, precision: f64) -> f64 {
    0.5 * precision.ln() - HALF_LN_2PI - 0.5 * precision * (x - mean).powi(2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn fd_grad(p: &NaturalParam) -> Vec<f64> {
        let mut out = Vec::new();
        for k in 0..p.eta().len() {
            let h = 1e-5 * p.eta()[k].abs().max(1.0);
            let mut plus = *p;
            plus.eta_mut()[k] += h;
            let mut minus = *p;
            minus.eta_mut()[k] -= h;
            out.push((plus.log_normalizer().unwrap() - minus.log_normalizer().unwrap()) / (2.0 * h));
        }
        out
    }

    #[test]
    fn normalizer_examples() {
        assert!((NaturalParam::Bernoulli(0.0).log_normalizer().unwrap() - 2f64.ln()).abs() < 1e-15);
        assert!(NaturalParam::Gaussian([0.0, -0.5]).log_normalizer().unwrap().abs() < 1e-15);
        assert!(NaturalParam::Beta([1.0, 1.0]).log_normalizer().unwrap().abs() < 1e-14);
    }

    #[test]
    fn gradient_examples() {
        assert_eq!(NaturalParam::Bernoulli(0.0).grad_log_normalizer().unwrap(), vec![0.5]);
        let g = NaturalParam::Gamma([1.0, -2.0]).grad_log_normalizer().unwrap();
        assert!((g[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn entropy_examples() {
        let h = NaturalParam::gaussian(0.0, 1.0).entropy().unwrap();
        assert!((h - 0.5 * (2.0 * PI * std::f64::consts::E).ln()).abs() < 1e-14);
        let h = NaturalParam::Bernoulli(0.0).entropy().unwrap();
        assert!((h - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn beta_entropy_matches_quadrature() {
        let (r, s) = (2.0f64, 3.0f64);
        let ln_b = statrs::function::beta::ln_beta(r, s);
        // composite Simpson on (0,1); integrand vanishes at both ends
        let n = 200_000;
        let h = 1.0 / n as f64;
        let f = |x: f64| {
            if x <= 0.0 || x >= 1.0 {
                return 0.0;
            }
            let lp = (r - 1.0) * x.ln() + (s - 1.0) * (1.0 - x).ln() - ln_b;
            -lp.exp() * lp
        };
        let mut acc = f(0.0) + f(1.0);
        for k in 1..n {
            let w = if k % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * f(k as f64 * h);
        }
        let quad = acc * h / 3.0;
        let h_beta = NaturalParam::beta(r, s).entropy().unwrap();
        assert!((h_beta - quad).abs() < 1e-8, "{h_beta} vs {quad}");
    }

    #[test]
    fn bernoulli_extremes_stay_finite() {
        for eta in [-1e4, -600.0, 600.0, 1e4] {
            let p = NaturalParam::Bernoulli(eta);
            assert!(p.log_normalizer().unwrap().is_finite());
            let h = p.entropy().unwrap();
            assert!(h.is_finite() && h.abs() < 1e-100 || h.abs() < 1e-12);
        }
        assert_eq!(sigmoid(1e6), 1.0);
    }

    #[test]
    fn invalid_parameters_name_the_family() {
        let err = NaturalParam::Gamma([-2.0, -1.0]).log_normalizer().unwrap_err();
        assert!(err.to_string().contains("Gamma"));
        assert!(NaturalParam::Gaussian([0.0, 1.0]).entropy().is_err());
        assert!(NaturalParam::Beta([0.0, 1.0]).grad_log_normalizer().is_err());
    }

    #[test]
    fn entropy_orderings() {
        let wide = NaturalParam::gaussian(0.0, 0.5).entropy().unwrap();
        let narrow = NaturalParam::gaussian(0.0, 2.0).entropy().unwrap();
        assert!(wide > narrow);
        let h0 = NaturalParam::Bernoulli(0.0).entropy().unwrap();
        for eta in [-3.0, -0.1, 0.1, 3.0] {
            assert!(NaturalParam::Bernoulli(eta).entropy().unwrap() < h0);
        }
    }

    fn any_param() -> impl Strategy<Value = NaturalParam> {
        prop_oneof![
            (-5.0..5.0f64, 0.1..10.0f64).prop_map(|(m, rho)| NaturalParam::gaussian(m, rho)),
            (0.2..20.0f64, 0.1..10.0f64).prop_map(|(k, l)| NaturalParam::gamma(k, l)),
            (-8.0..8.0f64).prop_map(NaturalParam::Bernoulli),
            (0.2..20.0f64, 0.2..20.0f64).prop_map(|(r, s)| NaturalParam::beta(r, s)),
        ]
    }

    proptest! {
        #[test]
        fn gradient_matches_finite_difference(p in any_param()) {
            let g = p.grad_log_normalizer().unwrap();
            let fd = fd_grad(&p);
            for (a, b) in g.iter().zip(&fd) {
                prop_assert!((a - b).abs() <= 1e-6 * a.abs().max(1.0), "{:?}: {} vs {}", p, a, b);
            }
        }

        #[test]
        fn standard_round_trip(m in -50.0..50.0f64, rho in 1e-3..1e3f64,
                               k in 1e-3..1e3f64, l in 1e-3..1e3f64,
                               pi in 1e-3..0.999f64, r in 1e-3..1e3f64, s in 1e-3..1e3f64) {
            let close = |a: f64, b: f64| (a - b).abs() <= 1e-14 * b.abs().max(1.0);
            match NaturalParam::gaussian(m, rho).standard().unwrap() {
                StandardParam::Gaussian { mean, precision } => {
                    prop_assert!(close(mean, m) && close(precision, rho));
                }
                _ => unreachable!(),
            }
            match NaturalParam::gamma(k, l).standard().unwrap() {
                StandardParam::Gamma { shape, rate } => {
                    prop_assert!(close(shape, k) && close(rate, l));
                }
                _ => unreachable!(),
            }
            match NaturalParam::bernoulli(pi).standard().unwrap() {
                StandardParam::Bernoulli { p } => prop_assert!(close(p, pi)),
                _ => unreachable!(),
            }
            match NaturalParam::beta(r, s).standard().unwrap() {
                StandardParam::Beta { r: r2, s: s2 } => prop_assert!(r2 == r && s2 == s),
                _ => unreachable!(),
            }
        }
    }
}
