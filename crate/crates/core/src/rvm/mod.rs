//! Mean-field variational relevance vector machine.
//!
//! The model is `y = Ψ(w ∘ ι) + noise` with
//! `w_i | ς_i ~ N(0, 1/ς_i)`, `ς_i ~ Gamma(a, b)`, `ι_i | π_i ~ Bernoulli(π_i)`,
//! `π_i ~ Beta(c, d)` and noise precision `τ ~ Gamma(u, w)`. The posterior
//! is approximated by a fully factorised `q` in the same families, and each
//! factor's natural parameter is set to the zero of the corresponding ELBO
//! gradient in turn (coordinate ascent). Terms whose inclusion probability
//! has settled at or below `eps_pi` are dropped from the sweep.

mod elbo;
mod solver;

pub use elbo::{elbo, elbo_gradient_fd, expected_l, GradientEntry};
pub use solver::{RunSummary, RvmSolver};

use crate::basis::{evaluate_design, BasisSpec, DesignMatrix};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::expfam::sigmoid;
use crate::expfam::special::digamma_pos;
use crate::surrogate::{FitMetadata, SparsePce};
use serde::{Deserialize, Serialize};

/// Hyperparameters of the prior hierarchy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorConfig {
    /// Gamma shape for the coefficient precisions ς.
    pub a: f64,
    /// Gamma rate for ς.
    pub b: f64,
    /// Beta first parameter for the inclusion probabilities π. Small values
    /// favour sparse solutions.
    pub c: f64,
    /// Beta second parameter for π.
    pub d: f64,
    /// Gamma shape for the noise precision τ.
    pub u: f64,
    /// Gamma rate for τ.
    pub w: f64,
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self {
            a: 1e-6,
            b: 1e-6,
            c: 0.2,
            d: 1.0,
            u: 1e-6,
            w: 1e-6,
        }
    }
}

impl PriorConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("a", self.a),
            ("b", self.b),
            ("c", self.c),
            ("d", self.d),
            ("u", self.u),
            ("w", self.w),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "prior hyperparameter {name} must be positive and finite, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Which variable blocks a sweep updates. Everything is on by default;
/// switching blocks off pins them at their current value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockUpdates {
    pub tau: bool,
    pub sigma: bool,
    pub pi: bool,
    pub iota: bool,
    pub w: bool,
}

impl Default for BlockUpdates {
    fn default() -> Self {
        Self {
            tau: true,
            sigma: true,
            pi: true,
            iota: true,
            w: true,
        }
    }
}

/// Where coordinate ascent starts.
///
/// From the prior-matched state every `m_i` is zero and `ρ_i = a/b`, so the
/// first indicator update only sees the variance penalty `E[τ] G_ii ρ_i⁻¹ / 2`.
/// How large that is depends on the scale of `y`; when it is large, or the
/// Beta prior favours sparsity (`c < d`), terms are switched off before their
/// coefficients have moved and the run settles in a poor local optimum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitStrategy {
    /// [`RvmState::init`] under the requested prior.
    Prior,
    /// [`RvmState::init`] under `Beta(d, d)` (so `π̃ = 1/2`), followed by one
    /// exact update of τ and every `q(w_i)` before the first sweep.
    Neutral,
    /// The neutral start run to convergence under the `Beta(d, d)` prior,
    /// then continued under the requested prior. Terms stay switched on
    /// until the noise level has settled, which protects weak ones.
    Continuation,
    /// Run every start and keep the one with the largest final ELBO.
    #[default]
    Best,
}

impl InitStrategy {
    pub fn name(&self) -> &'static str {
        match self {
            InitStrategy::Prior => "prior",
            InitStrategy::Neutral => "neutral",
            InitStrategy::Continuation => "continuation",
            InitStrategy::Best => "best",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "prior" => Ok(InitStrategy::Prior),
            "neutral" => Ok(InitStrategy::Neutral),
            "continuation" => Ok(InitStrategy::Continuation),
            "best" => Ok(InitStrategy::Best),
            other => Err(Error::InvalidArgument(format!(
                "unknown init strategy {other:?} (expected prior, neutral, continuation or best)"
            ))),
        }
    }
}

/// Convergence and pruning controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    /// Stop once the largest relative change of any natural parameter,
    /// `|Δη| / (1 + |η|)`, drops below this.
    pub delta: f64,
    /// Pruning is allowed once the relative change of every π̃ is below this.
    pub delta_pi: f64,
    /// Terms with π̃ ≤ eps_pi are pruned.
    pub eps_pi: f64,
    /// Cap per run; `InitStrategy::Best` runs twice.
    pub max_sweeps: usize,
    #[serde(default)]
    pub updates: BlockUpdates,
    #[serde(default)]
    pub init: InitStrategy,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            delta: 1e-4,
            delta_pi: 1e-4,
            eps_pi: 0.01,
            max_sweeps: 10_000,
            updates: BlockUpdates::default(),
            init: InitStrategy::default(),
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0) || !(self.delta_pi > 0.0) {
            return Err(Error::InvalidArgument("convergence tolerances must be positive".into()));
        }
        if !(self.eps_pi > 0.0 && self.eps_pi < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "pruning threshold must lie in (0, 1), got {}",
                self.eps_pi
            )));
        }
        if self.max_sweeps == 0 {
            return Err(Error::InvalidArgument("max_sweeps must be at least 1".into()));
        }
        Ok(())
    }
}

/// Natural parameters of every variational factor plus the derived moments.
///
/// `m`, `rho` and `pi_tilde` always mirror `eta_w` and `eta_iota`:
/// `m_i = -η_{w,i,1} / (2 η_{w,i,2})`, `ρ_i = -2 η_{w,i,2}`,
/// `π̃_i = sigmoid(η_{ι,i})`. Call [`RvmState::sync_moments`] after editing
/// natural parameters by hand.
#[derive(Debug, Clone, PartialEq)]
pub struct RvmState {
    /// Gamma `(υ − 1, −ω)` for the noise precision.
    pub eta_tau: [f64; 2],
    /// Gamma `(κ_i − 1, −λ_i)` per coefficient precision.
    pub eta_sigma: Vec<[f64; 2]>,
    /// Beta `(r_i, s_i)` per inclusion probability.
    pub eta_pi: Vec<[f64; 2]>,
    /// Gaussian `(m_i ρ_i, −ρ_i / 2)` per coefficient.
    pub eta_w: Vec<[f64; 2]>,
    /// Bernoulli log-odds per indicator.
    pub eta_iota: Vec<f64>,
    pub m: Vec<f64>,
    pub rho: Vec<f64>,
    pub pi_tilde: Vec<f64>,
    /// Indices still being updated, ascending.
    pub active: Vec<usize>,
    pub elbo_trace: Vec<f64>,
}

impl RvmState {
    /// Starting point: prior natural parameters for τ, ς and π, and the
    /// prior expectations of the conditional natural parameters for w and ι.
    pub fn init(prior: &PriorConfig, n_basis: usize) -> Self {
        let eta_sigma = [prior.a - 1.0, -prior.b];
        let eta_pi = [prior.c, prior.d];
        // E_q(ς)[ζ_w] = (0, -E[ς]/2), E[ς] = a/b
        let eta_w = [0.0, -0.5 * prior.a / prior.b];
        // E_q(π)[ζ_ι] = ψ(c) - ψ(d)
        let eta_iota = digamma_pos(prior.c) - digamma_pos(prior.d);
        let mut state = Self {
            eta_tau: [prior.u - 1.0, -prior.w],
            eta_sigma: vec![eta_sigma; n_basis],
            eta_pi: vec![eta_pi; n_basis],
            eta_w: vec![eta_w; n_basis],
            eta_iota: vec![eta_iota; n_basis],
            m: vec![0.0; n_basis],
            rho: vec![0.0; n_basis],
            pi_tilde: vec![0.0; n_basis],
            active: (0..n_basis).collect(),
            elbo_trace: Vec::new(),
        };
        state.sync_moments();
        state
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }

    /// Recomputes `m`, `rho` and `pi_tilde` from the natural parameters.
    pub fn sync_moments(&mut self) {
        for i in 0..self.len() {
            let [e1, e2] = self.eta_w[i];
            self.rho[i] = -2.0 * e2;
            self.m[i] = e1 / self.rho[i];
            self.pi_tilde[i] = sigmoid(self.eta_iota[i]);
        }
    }

    /// `E[τ] = υ / ω`
    pub fn expected_tau(&self) -> f64 {
        (self.eta_tau[0] + 1.0) / -self.eta_tau[1]
    }

    /// `E[ς_i] = κ_i / λ_i`
    pub fn expected_sigma(&self, i: usize) -> f64 {
        (self.eta_sigma[i][0] + 1.0) / -self.eta_sigma[i][1]
    }

    /// Posterior mean of the relevance vector, `m ∘ π̃`.
    pub fn effective_coefficients(&self) -> Vec<f64> {
        self.m.iter().zip(&self.pi_tilde).map(|(m, p)| m * p).collect()
    }

    /// All natural parameters flattened in sweep order:
    /// τ, then ς_i, π_i, w_i, ι_i for each i.
    pub fn natural_vector(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(2 + 7 * self.len());
        out.extend_from_slice(&self.eta_tau);
        for i in 0..self.len() {
            out.extend_from_slice(&self.eta_sigma[i]);
            out.extend_from_slice(&self.eta_pi[i]);
            out.extend_from_slice(&self.eta_w[i]);
            out.push(self.eta_iota[i]);
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.natural_vector().iter().all(|v| v.is_finite())
    }
}

/// Largest `|a_k − b_k| / (1 + |b_k|)`.
pub fn relative_change(before: &[f64], after: &[f64]) -> f64 {
    before
        .iter()
        .zip(after)
        .map(|(b, a)| (a - b).abs() / (1.0 + a.abs()))
        .fold(0.0, f64::max)
}

/// Outcome of a variational fit.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub pce: SparsePce,
    pub state: RvmState,
    pub converged: bool,
    /// Sweeps over all runs that went into this result.
    pub sweeps: usize,
    /// Start that produced the returned state; never `Best`.
    pub start: InitStrategy,
}

/// Fits a sparse expansion on `spec` to `data`.
pub fn fit(data: &Dataset, spec: &BasisSpec, prior: &PriorConfig, config: &FitConfig) -> Result<FitResult> {
    if data.dim() != spec.dim() {
        return Err(Error::Dimension(format!(
            "dataset has {} inputs but the basis has dimension {}",
            data.dim(),
            spec.dim()
        )));
    }
    let design = evaluate_design(spec, data.xi())?;
    fit_design(&design, data.y(), spec, prior, config)
}

/// Same as [`fit`] with a pre-evaluated design matrix.
pub fn fit_design(
    design: &DesignMatrix,
    y: &[f64],
    spec: &BasisSpec,
    prior: &PriorConfig,
    config: &FitConfig,
) -> Result<FitResult> {
    if design.ncols() != spec.len() {
        return Err(Error::Dimension(format!(
            "design has {} columns but the basis has {} terms",
            design.ncols(),
            spec.len()
        )));
    }
    let (state, summary, start) = run_from(design, y, prior, config)?;
    let pce = SparsePce::new(
        spec.clone(),
        state.m.clone(),
        state.rho.clone(),
        state.pi_tilde.clone(),
        FitMetadata::Rvm {
            prior: *prior,
            config: *config,
            active: state.active.clone(),
            elbo_trace: state.elbo_trace.clone(),
            converged: summary.converged,
            sweeps: summary.sweeps,
            start,
        },
    )?;
    Ok(FitResult {
        pce,
        state,
        converged: summary.converged,
        sweeps: summary.sweeps,
        start,
    })
}

fn run_from(
    design: &DesignMatrix,
    y: &[f64],
    prior: &PriorConfig,
    config: &FitConfig,
) -> Result<(RvmState, RunSummary, InitStrategy)> {
    let neutral = PriorConfig { c: prior.d, ..*prior };
    let from = |start: InitStrategy| -> Result<(RvmState, RunSummary, f64)> {
        let mut solver = RvmSolver::new(design, y, *prior)?;
        let mut earlier = 0;
        if start != InitStrategy::Prior {
            let state = RvmState::init(&neutral, design.ncols());
            let target = if start == InitStrategy::Continuation {
                neutral
            } else {
                *prior
            };
            let mut warm = RvmSolver::with_state(design, y, target, state)?;
            warm.coefficient_pass();
            if start == InitStrategy::Continuation {
                earlier = warm.run(config)?.sweeps;
                let mut state = warm.into_state();
                state.elbo_trace.clear();
                warm = RvmSolver::with_state(design, y, *prior, state)?;
            }
            solver = warm;
        }
        let mut summary = solver.run(config)?;
        summary.sweeps += earlier;
        let f = solver.elbo()?;
        Ok((solver.into_state(), summary, f))
    };
    if config.init != InitStrategy::Best {
        return from(config.init).map(|(s, r, _)| (s, r, config.init));
    }
    let mut starts = vec![InitStrategy::Prior, InitStrategy::Neutral];
    // with c = d the continuation phase would repeat the neutral run
    if prior.c != prior.d {
        starts.push(InitStrategy::Continuation);
    }
    let mut best: Option<(RvmState, RunSummary, f64, InitStrategy)> = None;
    let mut sweeps = 0;
    for start in starts {
        let (state, summary, f) = from(start)?;
        sweeps += summary.sweeps;
        if best.as_ref().map_or(true, |b| f > b.2) {
            best = Some((state, summary, f, start));
        }
    }
    let (state, summary, _, start) = best.expect("at least one start");
    Ok((state, RunSummary { sweeps, ..summary }, start))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_examples() {
        let prior = PriorConfig {
            c: 1.0,
            ..PriorConfig::default()
        };
        let s = RvmState::init(&prior, 4);
        assert!(s.rho.iter().all(|&r| (r - 1.0).abs() < 1e-12));
        assert!(s.m.iter().all(|&m| m == 0.0));
        assert!(s.eta_iota.iter().all(|&e| e == 0.0));
        assert!(s.pi_tilde.iter().all(|&p| p == 0.5));
        assert_eq!(s.active, vec![0, 1, 2, 3]);
        assert_eq!(s.eta_tau, [1e-6 - 1.0, -1e-6]);
        assert_eq!(s.eta_pi[0], [1.0, 1.0]);

        let s = RvmState::init(&PriorConfig::default(), 2);
        let oracle =
            1.0 / (1.0 + (-(statrs::function::gamma::digamma(0.2) - statrs::function::gamma::digamma(1.0))).exp());
        assert!((s.pi_tilde[0] - oracle).abs() < 1e-12);
        assert!((s.pi_tilde[0] - 0.00894).abs() < 5e-5, "{}", s.pi_tilde[0]);
    }

    #[test]
    fn config_validation() {
        assert!(PriorConfig {
            c: 0.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(PriorConfig::default().validate().is_ok());
        assert!(FitConfig {
            eps_pi: 1.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(FitConfig {
            delta: 0.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(FitConfig {
            max_sweeps: 0,
            ..Default::default()
        }
        .validate()
        .is_err());
    }

    #[test]
    fn init_strategy_names_round_trip() {
        for s in [
            InitStrategy::Prior,
            InitStrategy::Neutral,
            InitStrategy::Continuation,
            InitStrategy::Best,
        ] {
            assert_eq!(InitStrategy::parse(s.name()).unwrap(), s);
            assert_eq!(serde_json::to_string(&s).unwrap(), format!("\"{}\"", s.name()));
        }
        assert!(InitStrategy::parse("random").is_err());
        let old: FitConfig = serde_json::from_str(
            r#"{"delta":1e-6,"delta_pi":1e-3,"eps_pi":1e-3,"max_sweeps":10,
                "updates":{"tau":true,"sigma":true,"pi":true,"iota":true,"w":true}}"#,
        )
        .unwrap();
        assert_eq!(old.init, InitStrategy::Best);
    }

    #[test]
    fn best_start_has_the_highest_elbo() {
        let inst = crate::synthetic::OhaganInstance::new(3, 7).unwrap();
        let data = inst.sample_dataset(40, 7).unwrap();
        let spec = BasisSpec::new(3, 3, crate::basis::Truncation::TotalDegree).unwrap();
        let prior = PriorConfig::default();
        let run = |init| {
            let r = fit(
                &data,
                &spec,
                &prior,
                &FitConfig {
                    init,
                    ..FitConfig::default()
                },
            )
            .unwrap();
            (*r.state.elbo_trace.last().unwrap(), r.start, r.sweeps)
        };
        let (best, start, sweeps) = run(InitStrategy::Best);
        let singles: Vec<_> = [InitStrategy::Prior, InitStrategy::Neutral, InitStrategy::Continuation]
            .map(run)
            .to_vec();
        assert!(singles.iter().all(|&(f, _, _)| best >= f));
        assert!(singles.iter().any(|&(f, s, _)| f == best && s == start));
        assert_eq!(sweeps, singles.iter().map(|r| r.2).sum::<usize>());
    }

    #[test]
    fn relative_change_guards_small_values() {
        assert_eq!(relative_change(&[0.0, 1.0], &[0.0, 1.0]), 0.0);
        assert!((relative_change(&[0.0], &[1e-9]) - 1e-9 / (1.0 + 1e-9)).abs() < 1e-20);
    }
}
