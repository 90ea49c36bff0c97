use super::{PriorConfig, RvmState};
use crate::basis::DesignMatrix;
use crate::error::{Error, Result};
use crate::expfam::{sigmoid, NaturalParam};

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

pub(crate) fn check_dims(state: &RvmState, design: &DesignMatrix, y: &[f64]) -> Result<()> {
    if design.nrows() != y.len() {
        return Err(Error::Dimension(format!(
            "design has {} rows but y has {} entries",
            design.nrows(),
            y.len()
        )));
    }
    if design.ncols() != state.len() {
        return Err(Error::Dimension(format!(
            "design has {} columns but the state has {} coefficients",
            design.ncols(),
            state.len()
        )));
    }
    Ok(())
}

/// `E[L2]` for the given moments:
/// `−½‖y − Ψμ‖² − ½ Σ_j G_jj (π̃_j/ρ_j + m_j² π̃_j (1 − π̃_j))` with `μ = m ∘ π̃`.
pub(crate) fn expected_l2_from(design: &DesignMatrix, y: &[f64], m: &[f64], rho: &[f64], pi: &[f64]) -> f64 {
    let mu: Vec<f64> = m.iter().zip(pi).map(|(m, p)| m * p).collect();
    let fitted = design.mul_vec(&mu);
    let residual: f64 = y.iter().zip(&fitted).map(|(y, f)| (y - f).powi(2)).sum();
    let gram = design.gram();
    let mut trace = 0.0;
    for j in 0..m.len() {
        let g = gram[(j, j)];
        if pi[j] > 0.0 {
            trace += g * (pi[j] / rho[j] + m[j] * m[j] * pi[j] * (1.0 - pi[j]));
        }
    }
    -0.5 * (residual + trace)
}

/// Expected sufficient statistics of the likelihood in τ: `(N/2, E[L2])`.
/// Uses the moments stored in `state` as they are.
pub fn expected_l(state: &RvmState, design: &DesignMatrix, y: &[f64]) -> Result<(f64, f64)> {
    check_dims(state, design, y)?;
    let el2 = expected_l2_from(design, y, &state.m, &state.rho, &state.pi_tilde);
    Ok((0.5 * y.len() as f64, el2))
}

/// Evidence lower bound `E_q[log p(y, θ)] + H[q]`.
///
/// Evaluated purely from the natural parameters (the derived moments are
/// recomputed), so it can be differentiated numerically in any coordinate.
pub fn elbo(state: &RvmState, design: &DesignMatrix, y: &[f64], prior: &PriorConfig) -> Result<f64> {
    check_dims(state, design, y)?;
    let n = state.len();
    let mut m = Vec::with_capacity(n);
    let mut rho = Vec::with_capacity(n);
    let mut pi = Vec::with_capacity(n);
    for i in 0..n {
        let q_w = NaturalParam::Gaussian(state.eta_w[i]);
        q_w.validate()?;
        let [e1, e2] = state.eta_w[i];
        rho.push(-2.0 * e2);
        m.push(e1 / (-2.0 * e2));
        pi.push(sigmoid(state.eta_iota[i]));
    }
    let el2 = expected_l2_from(design, y, &m, &rho, &pi);

    let q_tau = NaturalParam::Gamma(state.eta_tau);
    let g_tau = q_tau.grad_log_normalizer()?;
    let n_obs = y.len() as f64;
    let mut f = -n_obs * HALF_LN_2PI + g_tau[0] * 0.5 * n_obs + g_tau[1] * el2;
    f += q_tau.expected_log_density(&NaturalParam::gamma(prior.u, prior.w))? + q_tau.entropy()?;

    let p_sigma = NaturalParam::gamma(prior.a, prior.b);
    let p_pi = NaturalParam::beta(prior.c, prior.d);
    for i in 0..n {
        let q_sigma = NaturalParam::Gamma(state.eta_sigma[i]);
        let g_sigma = q_sigma.grad_log_normalizer()?;
        let e_w2 = m[i] * m[i] + 1.0 / rho[i];
        // E log N(w | 0, 1/ς)
        f += -HALF_LN_2PI + 0.5 * g_sigma[0] - 0.5 * g_sigma[1] * e_w2;
        f += q_sigma.expected_log_density(&p_sigma)? + q_sigma.entropy()?;

        let q_pi = NaturalParam::Beta(state.eta_pi[i]);
        let g_pi = q_pi.grad_log_normalizer()?;
        // E log Bernoulli(ι | π)
        f += pi[i] * g_pi[0] + (1.0 - pi[i]) * g_pi[1];
        f += q_pi.expected_log_density(&p_pi)? + q_pi.entropy()?;

        f += NaturalParam::Gaussian(state.eta_w[i]).entropy()?;
        f += NaturalParam::Bernoulli(state.eta_iota[i]).entropy()?;
    }
    Ok(f)
}

/// One coordinate of a numerical ELBO gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientEntry {
    /// Block name (`tau`, `sigma`, `pi`, `w`, `iota`).
    pub block: &'static str,
    /// Coefficient index; `None` for τ.
    pub index: Option<usize>,
    /// Component of the natural parameter.
    pub component: usize,
    pub value: f64,
}

/// Central finite differences of the ELBO with respect to η_τ and the
/// natural parameters of every active coefficient. The step for a
/// coordinate `η` is `h·|η|` when its domain ends at zero (the curvature
/// there grows like `1/η²`) and `h·(1 + |η|)` otherwise.
pub fn elbo_gradient_fd(
    state: &RvmState,
    design: &DesignMatrix,
    y: &[f64],
    prior: &PriorConfig,
    h: f64,
) -> Result<Vec<GradientEntry>> {
    let mut probe = state.clone();
    let mut out = Vec::new();
    let diff = |probe: &mut RvmState, bounded: bool, get: &dyn Fn(&mut RvmState) -> &mut f64| -> Result<f64> {
        let x0 = *get(probe);
        let step = if bounded { h * x0.abs() } else { h * (1.0 + x0.abs()) };
        *get(probe) = x0 + step;
        let up = elbo(probe, design, y, prior)?;
        *get(probe) = x0 - step;
        let down = elbo(probe, design, y, prior)?;
        *get(probe) = x0;
        Ok((up - down) / (2.0 * step))
    };
    for c in 0..2 {
        let value = diff(&mut probe, c == 1, &|s| &mut s.eta_tau[c])?;
        out.push(GradientEntry {
            block: "tau",
            index: None,
            component: c,
            value,
        });
    }
    for &i in &state.active {
        for c in 0..2 {
            let value = diff(&mut probe, c == 1, &|s| &mut s.eta_sigma[i][c])?;
            out.push(GradientEntry {
                block: "sigma",
                index: Some(i),
                component: c,
                value,
            });
            let value = diff(&mut probe, true, &|s| &mut s.eta_pi[i][c])?;
            out.push(GradientEntry {
                block: "pi",
                index: Some(i),
                component: c,
                value,
            });
            let value = diff(&mut probe, c == 1, &|s| &mut s.eta_w[i][c])?;
            out.push(GradientEntry {
                block: "w",
                index: Some(i),
                component: c,
                value,
            });
        }
        let value = diff(&mut probe, false, &|s| &mut s.eta_iota[i])?;
        out.push(GradientEntry {
            block: "iota",
            index: Some(i),
            component: 0,
            value,
        });
    }
    Ok(out)
}
