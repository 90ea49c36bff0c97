use super::elbo::{check_dims, elbo};
use super::{relative_change, BlockUpdates, FitConfig, PriorConfig, RvmState};
use crate::basis::DesignMatrix;
use crate::error::{Error, Result};
use crate::expfam::special::digamma_pos;
use crate::expfam::{clamp_bernoulli, sigmoid};

/// How a run ended.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSummary {
    pub converged: bool,
    pub sweeps: usize,
    /// Relative parameter change of the last sweep.
    pub last_change: f64,
}

/// Coordinate-ascent engine over a fixed design.
///
/// Keeps `t = ΨᵀΨ(m ∘ π̃)` in sync with the state through rank-one
/// corrections, so each coefficient update costs `O(N_K)`.
pub struct RvmSolver<'a> {
    design: &'a DesignMatrix,
    y: &'a [f64],
    prior: PriorConfig,
    psi_t_y: Vec<f64>,
    t: Vec<f64>,
    state: RvmState,
}

impl<'a> RvmSolver<'a> {
    pub fn new(design: &'a DesignMatrix, y: &'a [f64], prior: PriorConfig) -> Result<Self> {
        let state = RvmState::init(&prior, design.ncols());
        Self::with_state(design, y, prior, state)
    }

    /// Starts from an arbitrary state, e.g. one with some blocks pinned.
    pub fn with_state(design: &'a DesignMatrix, y: &'a [f64], prior: PriorConfig, mut state: RvmState) -> Result<Self> {
        prior.validate()?;
        if y.is_empty() {
            return Err(Error::InvalidArgument("at least one observation is required".into()));
        }
        check_dims(&state, design, y)?;
        state.sync_moments();
        let psi_t_y = design.tr_mul_vec(y);
        let mut solver = Self {
            design,
            y,
            prior,
            psi_t_y,
            t: vec![0.0; state.len()],
            state,
        };
        solver.refresh();
        Ok(solver)
    }

    pub fn state(&self) -> &RvmState {
        &self.state
    }

    pub fn into_state(self) -> RvmState {
        self.state
    }

    pub fn elbo(&self) -> Result<f64> {
        elbo(&self.state, self.design, self.y, &self.prior)
    }

    /// Recomputes `t` exactly (`Ψᵀ(Ψμ)`, `O(N·N_K)`) and returns `E[L2]`.
    pub fn refresh(&mut self) -> f64 {
        let mu = self.state.effective_coefficients();
        let fitted = self.design.mul_vec(&mu);
        self.t = self.design.tr_mul_vec(&fitted);
        let residual: f64 = self.y.iter().zip(&fitted).map(|(y, f)| (y - f).powi(2)).sum();
        let gram = self.design.gram();
        let s = &self.state;
        let mut trace = 0.0;
        for j in 0..s.len() {
            let p = s.pi_tilde[j];
            if p > 0.0 {
                trace += gram[(j, j)] * (p / s.rho[j] + s.m[j] * s.m[j] * p * (1.0 - p));
            }
        }
        -0.5 * (residual + trace)
    }

    /// `υ = u + N/2`, `ω = w − E[L2]`.
    pub fn update_tau(&mut self, el2: f64) {
        let n = self.y.len() as f64;
        self.state.eta_tau = [self.prior.u - 1.0 + 0.5 * n, -(self.prior.w - el2)];
        debug_assert!(self.state.eta_tau[1] < 0.0);
    }

    /// `κ_i = a + ½`, `λ_i = b + ½ E[w_i²]`.
    pub fn update_sigma(&mut self, i: usize) {
        let s = &mut self.state;
        let e_w2 = s.m[i] * s.m[i] + 1.0 / s.rho[i];
        s.eta_sigma[i] = [self.prior.a - 0.5, -(self.prior.b + 0.5 * e_w2)];
        debug_assert!(s.eta_sigma[i][1] < 0.0);
    }

    /// `r_i = c + π̃_i`, `s_i = d + 1 − π̃_i`.
    pub fn update_pi(&mut self, i: usize) {
        let s = &mut self.state;
        s.eta_pi[i] = [self.prior.c + s.pi_tilde[i], self.prior.d + 1.0 - s.pi_tilde[i]];
        debug_assert!(s.eta_pi[i][0] > 0.0 && s.eta_pi[i][1] > 0.0);
    }

    /// Log-odds of inclusion: `ψ(r_i) − ψ(s_i) + E[τ] u_i`.
    pub fn update_iota(&mut self, i: usize) {
        let g_ii = self.design.gram()[(i, i)];
        let s = &mut self.state;
        let m = s.m[i];
        let u = m * (self.psi_t_y[i] - self.t[i]) - 0.5 * g_ii * (1.0 / s.rho[i] + (1.0 - 2.0 * s.pi_tilde[i]) * m * m);
        let [r, q] = s.eta_pi[i];
        let eta = clamp_bernoulli(digamma_pos(r) - digamma_pos(q) + s.expected_tau() * u);
        let p = sigmoid(eta);
        let delta_mu = m * (p - s.pi_tilde[i]);
        s.eta_iota[i] = eta;
        s.pi_tilde[i] = p;
        self.shift_t(i, delta_mu);
    }

    /// Gaussian factor of `w_i`: precision `E[ς_i] + E[τ] π̃_i G_ii`,
    /// mean from the partial residual `ψ_iᵀ(y − Ψ μ_{−i})`.
    pub fn update_w(&mut self, i: usize) {
        let g_ii = self.design.gram()[(i, i)];
        let s = &mut self.state;
        let p = s.pi_tilde[i];
        let e_tau = s.expected_tau();
        let mu_i = s.m[i] * p;
        let v1 = p * (self.psi_t_y[i] - (self.t[i] - g_ii * mu_i));
        let rho = s.expected_sigma(i) + e_tau * p * g_ii;
        s.eta_w[i] = [e_tau * v1, -0.5 * rho];
        let m = e_tau * v1 / rho;
        let delta_mu = p * (m - s.m[i]);
        s.m[i] = m;
        s.rho[i] = rho;
        debug_assert!(rho > 0.0);
        self.shift_t(i, delta_mu);
    }

    fn shift_t(&mut self, i: usize, delta_mu: f64) {
        if delta_mu != 0.0 {
            let col = self.design.gram().column(i);
            for (t, g) in self.t.iter_mut().zip(col.iter()) {
                *t += delta_mu * g;
            }
        }
    }

    /// τ followed by every active `w_i`, leaving ς, π and ι untouched.
    /// Each step is an exact block maximiser, so the ELBO cannot drop.
    pub fn coefficient_pass(&mut self) {
        let el2 = self.refresh();
        self.update_tau(el2);
        for k in 0..self.state.active.len() {
            let i = self.state.active[k];
            self.update_w(i);
        }
    }

    /// One pass in the fixed order: τ, then for each active `i`:
    /// ς_i, π_i, ι_i, w_i.
    pub fn sweep(&mut self, updates: &BlockUpdates) {
        let el2 = self.refresh();
        if updates.tau {
            self.update_tau(el2);
        }
        for k in 0..self.state.active.len() {
            let i = self.state.active[k];
            if updates.sigma {
                self.update_sigma(i);
            }
            if updates.pi {
                self.update_pi(i);
            }
            if updates.iota {
                self.update_iota(i);
            }
            if updates.w {
                self.update_w(i);
            }
        }
    }

    /// Sweeps until the relative parameter change drops below `delta` or the
    /// sweep budget runs out. The ELBO is appended to the trace before the
    /// first sweep (if the trace is empty) and after every sweep.
    pub fn run(&mut self, config: &FitConfig) -> Result<RunSummary> {
        config.validate()?;
        if !self.state.is_finite() {
            return Err(Error::NanDetected { sweep: 0 });
        }
        if self.state.elbo_trace.is_empty() {
            let f = self.elbo()?;
            self.state.elbo_trace.push(f);
        }
        let mut last_change = f64::INFINITY;
        for sweep in 1..=config.max_sweeps {
            let eta_before = self.state.natural_vector();
            let pi_before = self.state.pi_tilde.clone();
            self.sweep(&config.updates);
            if !self.state.is_finite() {
                return Err(Error::NanDetected { sweep });
            }
            let f = self.elbo()?;
            if !f.is_finite() {
                return Err(Error::NanDetected { sweep });
            }
            self.state.elbo_trace.push(f);

            if relative_change(&pi_before, &self.state.pi_tilde) < config.delta_pi {
                let pi = &self.state.pi_tilde;
                let eps = config.eps_pi;
                self.state.active.retain(|&i| pi[i] > eps);
            }
            last_change = relative_change(&eta_before, &self.state.natural_vector());
            if last_change < config.delta {
                return Ok(RunSummary {
                    converged: true,
                    sweeps: sweep,
                    last_change,
                });
            }
        }
        Ok(RunSummary {
            converged: false,
            sweeps: config.max_sweeps,
            last_change,
        })
    }
}
