//! Fitted sparse expansions and what can be done with them.

pub mod metrics;

pub use metrics::{bootstrap_ci, bootstrap_moment_intervals, l2_distance, r_squared, relative_mse, MomentIntervals};

use crate::basis::BasisSpec;
use crate::cs::CsConfig;
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::rvm::{FitConfig, InitStrategy, PriorConfig};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Coefficient magnitude above which a compressive-sensing coefficient counts
/// as significant for sparsity reporting.
pub const CS_SIGNIFICANCE: f64 = 8e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Rvm,
    Cs,
}

/// Which solver produced an expansion and how it went.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase")]
pub enum FitMetadata {
    Rvm {
        prior: PriorConfig,
        config: FitConfig,
        active: Vec<usize>,
        elbo_trace: Vec<f64>,
        converged: bool,
        sweeps: usize,
        /// Which start produced the returned state.
        #[serde(default = "default_start")]
        start: InitStrategy,
    },
    Cs {
        config: CsConfig,
        iterations: usize,
        residual: f64,
        converged: bool,
    },
}

fn default_start() -> InitStrategy {
    InitStrategy::Prior
}

impl FitMetadata {
    pub fn source(&self) -> Source {
        match self {
            FitMetadata::Rvm { .. } => Source::Rvm,
            FitMetadata::Cs { .. } => Source::Cs,
        }
    }

    pub fn converged(&self) -> bool {
        match self {
            FitMetadata::Rvm { converged, .. } | FitMetadata::Cs { converged, .. } => *converged,
        }
    }
}

/// A fitted expansion `Σ_j (m_j π̃_j) Ψ_j(ξ)`.
///
/// Coefficient uncertainty is kept as the Gaussian precision ρ (infinite for
/// point estimates).
#[derive(Debug, Clone, PartialEq)]
pub struct SparsePce {
    basis: BasisSpec,
    coeff_mean: Vec<f64>,
    precision: Vec<f64>,
    success_prob: Vec<f64>,
    metadata: FitMetadata,
}

/// Summary statistics of the expansion output under standard-normal inputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    pub std: f64,
    pub skewness: f64,
    /// Non-excess (a Gaussian has 3).
    pub kurtosis: f64,
}

impl Moments {
    /// Population estimators from a sample.
    pub fn from_samples(x: &[f64]) -> Self {
        let n = x.len() as f64;
        let mean = x.iter().sum::<f64>() / n;
        let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
        for v in x {
            let d = v - mean;
            let d2 = d * d;
            m2 += d2;
            m3 += d2 * d;
            m4 += d2 * d2;
        }
        m2 /= n;
        m3 /= n;
        m4 /= n;
        Self {
            mean,
            std: m2.sqrt(),
            skewness: m3 / m2.powf(1.5),
            kurtosis: m4 / (m2 * m2),
        }
    }
}

impl SparsePce {
    pub fn new(
        basis: BasisSpec,
        coeff_mean: Vec<f64>,
        precision: Vec<f64>,
        success_prob: Vec<f64>,
        metadata: FitMetadata,
    ) -> Result<Self> {
        let n = basis.len();
        if coeff_mean.len() != n || precision.len() != n || success_prob.len() != n {
            return Err(Error::Dimension(format!(
                "basis has {n} terms but got {} means, {} precisions and {} probabilities",
                coeff_mean.len(),
                precision.len(),
                success_prob.len()
            )));
        }
        if let Some(j) = coeff_mean.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!("coefficient {j} is not finite")));
        }
        if let Some(j) = precision.iter().position(|&r| !(r > 0.0)) {
            return Err(Error::Data(format!("precision of coefficient {j} must be positive")));
        }
        if let Some(j) = success_prob.iter().position(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Data(format!("success probability {j} lies outside [0, 1]")));
        }
        Ok(Self {
            basis,
            coeff_mean,
            precision,
            success_prob,
            metadata,
        })
    }

    pub fn basis(&self) -> &BasisSpec {
        &self.basis
    }

    pub fn len(&self) -> usize {
        self.coeff_mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeff_mean.is_empty()
    }

    pub fn source(&self) -> Source {
        self.metadata.source()
    }

    pub fn metadata(&self) -> &FitMetadata {
        &self.metadata
    }

    pub fn converged(&self) -> bool {
        self.metadata.converged()
    }

    pub fn coeff_mean(&self) -> &[f64] {
        &self.coeff_mean
    }

    pub fn precision(&self) -> &[f64] {
        &self.precision
    }

    /// `1/ρ_j`; zero for point estimates.
    pub fn coeff_var(&self) -> Vec<f64> {
        self.precision.iter().map(|r| 1.0 / r).collect()
    }

    pub fn success_prob(&self) -> &[f64] {
        &self.success_prob
    }

    /// `m ∘ π̃`, the posterior mean of the relevance vector.
    pub fn effective_coefficients(&self) -> Vec<f64> {
        self.coeff_mean
            .iter()
            .zip(&self.success_prob)
            .map(|(m, p)| m * p)
            .collect()
    }

    /// Half-widths `2·√(1/ρ_j)` of two-standard-deviation error bars on the
    /// coefficient means. Inclusion uncertainty is not folded in.
    pub fn error_bars(&self) -> Vec<f64> {
        self.precision.iter().map(|r| 2.0 / r.sqrt()).collect()
    }

    /// Same expansion with every coefficient scaled.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for m in &mut out.coeff_mean {
            *m *= factor;
        }
        out
    }

    /// Point predictions `Ψ(Ξ)(m ∘ π̃)` for each row of `xi`.
    pub fn predict(&self, xi: &DMatrix<f64>) -> Result<Vec<f64>> {
        if xi.ncols() != self.basis.dim() {
            return Err(Error::Dimension(format!(
                "inputs have {} columns but the expansion has dimension {}",
                xi.ncols(),
                self.basis.dim()
            )));
        }
        let coeffs = self.effective_coefficients();
        let evaluator = self.basis.evaluator();
        let k = xi.ncols();
        Ok((0..xi.nrows())
            .into_par_iter()
            .map_init(
                || (Vec::new(), vec![0.0; k]),
                |(table, row), n| {
                    for (j, v) in row.iter_mut().enumerate() {
                        *v = xi[(n, j)];
                    }
                    evaluator.eval_dot(row, &coeffs, table)
                },
            )
            .collect())
    }

    /// Mean and standard deviation in closed form (orthonormality), skewness
    /// and kurtosis from `n_mc` standard-normal input samples.
    pub fn moments(&self, n_mc: usize, seed: u64) -> Result<Moments> {
        if n_mc == 0 {
            return Err(Error::InvalidArgument("n_mc must be at least 1".into()));
        }
        let coeffs = self.effective_coefficients();
        let mut mean = 0.0;
        let mut var = 0.0;
        for (alpha, c) in self.basis.indices().iter().zip(&coeffs) {
            if alpha.is_zero() {
                mean += c;
            } else {
                var += c * c;
            }
        }
        let xi = standard_normal_inputs(n_mc, self.basis.dim(), seed);
        let samples = self.predict(&xi)?;
        let mc = Moments::from_samples(&samples);
        Ok(Moments {
            mean,
            std: var.sqrt(),
            skewness: mc.skewness,
            kurtosis: mc.kurtosis,
        })
    }

    /// Percentage of terms counted as significant: π̃ above `threshold` for
    /// variational fits, `|w| > 8e-4` for compressive-sensing fits.
    pub fn sparsity_index(&self, threshold: f64) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        let count = match self.source() {
            Source::Rvm => self.success_prob.iter().filter(|&&p| p > threshold).count(),
            Source::Cs => self
                .effective_coefficients()
                .iter()
                .filter(|w| w.abs() > CS_SIGNIFICANCE)
                .count(),
        };
        100.0 * count as f64 / self.len() as f64
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut text = self.to_json()?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// `n × dim` standard-normal inputs drawn row-major from `Rng::new(seed)`.
pub fn standard_normal_inputs(n: usize, dim: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = Rng::new(seed);
    let mut xi = DMatrix::zeros(n, dim);
    for r in 0..n {
        for c in 0..dim {
            xi[(r, c)] = rng.standard_normal();
        }
    }
    xi
}

mod wire {
    use super::*;

    #[derive(Serialize, Deserialize)]
    pub struct Term {
        pub m: f64,
        /// `null` encodes an infinite precision.
        pub rho: Option<f64>,
        pub pi_tilde: f64,
    }

    #[derive(Serialize, Deserialize)]
    pub struct Model {
        pub basis: BasisSpec,
        pub terms: Vec<Term>,
        #[serde(flatten)]
        pub metadata: FitMetadata,
    }
}

impl Serialize for SparsePce {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let terms = (0..self.len())
            .map(|j| wire::Term {
                m: self.coeff_mean[j],
                rho: self.precision[j].is_finite().then_some(self.precision[j]),
                pi_tilde: self.success_prob[j],
            })
            .collect();
        wire::Model {
            basis: self.basis.clone(),
            terms,
            metadata: self.metadata.clone(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for SparsePce {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let model = wire::Model::deserialize(deserializer)?;
        let mut mean = Vec::with_capacity(model.terms.len());
        let mut precision = Vec::with_capacity(model.terms.len());
        let mut prob = Vec::with_capacity(model.terms.len());
        for t in model.terms {
            mean.push(t.m);
            precision.push(t.rho.unwrap_or(f64::INFINITY));
            prob.push(t.pi_tilde);
        }
        SparsePce::new(model.basis, mean, precision, prob, model.metadata).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::Truncation;

    fn cs_meta() -> FitMetadata {
        FitMetadata::Cs {
            config: CsConfig::default(),
            iterations: 1,
            residual: 0.0,
            converged: true,
        }
    }

    fn rvm_meta() -> FitMetadata {
        FitMetadata::Rvm {
            prior: PriorConfig::default(),
            config: FitConfig::default(),
            active: vec![0, 2],
            elbo_trace: vec![-10.5, -3.25, 0.1 + 0.2],
            converged: true,
            sweeps: 2,
            start: InitStrategy::Prior,
        }
    }

    fn pce(coeffs: Vec<f64>, probs: Vec<f64>, spec: BasisSpec) -> SparsePce {
        let n = coeffs.len();
        SparsePce::new(spec, coeffs, vec![4.0; n], probs, rvm_meta()).unwrap()
    }

    fn spec(dim: usize, order: u32) -> BasisSpec {
        BasisSpec::new(dim, order, Truncation::TotalDegree).unwrap()
    }

    #[test]
    fn zero_inclusion_predicts_zero() {
        let s = spec(2, 2);
        let p = pce(vec![1.0; 6], vec![0.0; 6], s);
        let xi = standard_normal_inputs(20, 2, 1);
        assert!(p.predict(&xi).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn constant_term_predicts_constant() {
        let s = spec(3, 2);
        let n = s.len();
        let mut c = vec![0.0; n];
        c[0] = 5.0;
        let mut probs = vec![0.0; n];
        probs[0] = 1.0;
        let p = pce(c, probs, s);
        let xi = standard_normal_inputs(10, 3, 2);
        assert!(p.predict(&xi).unwrap().iter().all(|&v| v == 5.0));
    }

    #[test]
    fn binary_inclusion_equals_thresholded_support() {
        let s = spec(2, 3);
        let n = s.len();
        let c: Vec<f64> = (0..n).map(|j| 0.3 * j as f64 - 1.0).collect();
        let probs: Vec<f64> = (0..n).map(|j| (j % 3 == 0) as u8 as f64).collect();
        let p = pce(c.clone(), probs.clone(), s.clone());
        let masked: Vec<f64> = c
            .iter()
            .zip(&probs)
            .map(|(c, p)| if *p == 1.0 { *c } else { 0.0 })
            .collect();
        let q = pce(masked, vec![1.0; n], s);
        let xi = standard_normal_inputs(50, 2, 3);
        assert_eq!(p.predict(&xi).unwrap(), q.predict(&xi).unwrap());
    }

    #[test]
    fn prediction_matches_design_product() {
        let s = spec(3, 3);
        let n = s.len();
        let c: Vec<f64> = (0..n).map(|j| ((j * 7) % 5) as f64 - 2.0).collect();
        let probs: Vec<f64> = (0..n).map(|j| 0.1 + 0.8 * ((j % 4) as f64) / 3.0).collect();
        let p = pce(c, probs, s.clone());
        let xi = standard_normal_inputs(40, 3, 4);
        let design = crate::basis::evaluate_design(&s, &xi).unwrap();
        let expected = design.mul_vec(&p.effective_coefficients());
        for (a, b) in p.predict(&xi).unwrap().iter().zip(&expected) {
            assert!((a - b).abs() < 1e-12 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn predict_dimension_mismatch() {
        let p = pce(vec![1.0; 3], vec![1.0; 3], spec(2, 1));
        assert!(matches!(p.predict(&DMatrix::zeros(2, 3)), Err(Error::Dimension(_))));
    }

    #[test]
    fn constructor_validation() {
        let s = spec(2, 1);
        assert!(SparsePce::new(s.clone(), vec![0.0; 2], vec![1.0; 3], vec![0.5; 3], rvm_meta()).is_err());
        assert!(SparsePce::new(s.clone(), vec![0.0; 3], vec![0.0; 3], vec![0.5; 3], rvm_meta()).is_err());
        assert!(SparsePce::new(s.clone(), vec![0.0; 3], vec![1.0; 3], vec![1.5; 3], rvm_meta()).is_err());
        assert!(SparsePce::new(s, vec![f64::NAN; 3], vec![1.0; 3], vec![0.5; 3], rvm_meta()).is_err());
    }

    #[test]
    fn parseval_moments() {
        let s = spec(2, 2);
        let mut c = vec![0.0; 6];
        c[0] = 2.0;
        c[1] = 3.0;
        let p = pce(c, vec![1.0; 6], s);
        let mo = p.moments(1000, 1).unwrap();
        assert_eq!(mo.mean, 2.0);
        assert_eq!(mo.std, 3.0);
    }

    #[test]
    fn linear_expansion_is_gaussian() {
        let s = spec(3, 1);
        let p = pce(vec![0.5, 1.0, -2.0, 0.7], vec![1.0; 4], s);
        let mo = p.moments(100_000, 9).unwrap();
        // standard errors of skewness and kurtosis for a Gaussian sample
        let n = 1e5f64;
        assert!(mo.skewness.abs() < 4.0 * (6.0 / n).sqrt(), "{}", mo.skewness);
        assert!((mo.kurtosis - 3.0).abs() < 4.0 * (24.0 / n).sqrt(), "{}", mo.kurtosis);
    }

    #[test]
    fn analytic_and_sampled_moments_agree() {
        let s = spec(2, 3);
        let n = s.len();
        let c: Vec<f64> = (0..n).map(|j| 1.0 / (1.0 + j as f64)).collect();
        let p = pce(c, vec![1.0; n], s.clone());
        let mo = p.moments(100_000, 5).unwrap();
        let samples = p.predict(&standard_normal_inputs(100_000, 2, 5)).unwrap();
        let mc = Moments::from_samples(&samples);
        let n_mc = samples.len() as f64;
        let se_mean = mc.std / n_mc.sqrt();
        // standard error of the sample std via the fourth moment
        let se_std = mc.std * ((mc.kurtosis - 1.0) / (4.0 * n_mc)).sqrt();
        assert!((mo.mean - mc.mean).abs() < 4.0 * se_mean);
        assert!((mo.std - mc.std).abs() < 4.0 * se_std);
    }

    #[test]
    fn analytic_variance_is_sum_of_squares() {
        let s = spec(3, 2);
        let n = s.len();
        let c: Vec<f64> = (0..n).map(|j| (j as f64).sin()).collect();
        let probs: Vec<f64> = (0..n).map(|j| j as f64 / n as f64).collect();
        let p = pce(c, probs, s);
        let eff = p.effective_coefficients();
        let var: f64 = eff[1..].iter().map(|v| v * v).sum();
        let mo = p.moments(10, 0).unwrap();
        assert!((mo.std * mo.std - var).abs() < 1e-12);
    }

    #[test]
    fn sparsity_examples() {
        let p = pce(vec![1.0; 3], vec![0.99, 0.001, 0.5], spec(2, 1));
        assert!((p.sparsity_index(0.95) - 100.0 / 3.0).abs() < 1e-12);
        let z = pce(vec![1.0; 3], vec![0.0; 3], spec(2, 1));
        assert_eq!(z.sparsity_index(0.01), 0.0);
        let cs = SparsePce::new(
            spec(2, 1),
            vec![1e-3, 7e-4, -2.0],
            vec![f64::INFINITY; 3],
            vec![1.0; 3],
            cs_meta(),
        )
        .unwrap();
        assert!((cs.sparsity_index(0.01) - 200.0 / 3.0).abs() < 1e-12);
        assert_eq!(cs.coeff_var(), vec![0.0; 3]);
    }

    #[test]
    fn prediction_is_linear_in_coefficients() {
        let s = spec(2, 2);
        let p = pce(vec![1.0, -2.0, 0.5, 0.0, 3.0, 1.5], vec![1.0; 6], s.clone());
        let q = pce(vec![0.2, 0.4, -1.0, 2.0, 0.0, -0.5], vec![1.0; 6], s);
        let mixed: Vec<f64> = p
            .coeff_mean()
            .iter()
            .zip(q.coeff_mean())
            .map(|(a, b)| 2.0 * a - 3.0 * b)
            .collect();
        let r = pce(mixed, vec![1.0; 6], p.basis().clone());
        let xi = standard_normal_inputs(30, 2, 8);
        let (pp, qq, rr) = (
            p.predict(&xi).unwrap(),
            q.predict(&xi).unwrap(),
            r.predict(&xi).unwrap(),
        );
        for k in 0..30 {
            assert!((rr[k] - (2.0 * pp[k] - 3.0 * qq[k])).abs() < 1e-12);
        }
    }

    #[test]
    fn json_round_trip_is_lossless() {
        let s = spec(2, 2);
        let c = vec![0.1 + 0.2, -1.0 / 3.0, 1e-300, 2.5e10, -0.0, std::f64::consts::PI];
        let p = SparsePce::new(
            s.clone(),
            c.clone(),
            vec![1.0 / 7.0; 6],
            vec![0.0, 1.0, 0.3, 0.7, 1e-17, 0.5],
            rvm_meta(),
        )
        .unwrap();
        let back = SparsePce::from_json(&p.to_json().unwrap()).unwrap();
        assert_eq!(p, back);

        let cs = SparsePce::new(s, c, vec![f64::INFINITY; 6], vec![1.0; 6], cs_meta()).unwrap();
        let text = cs.to_json().unwrap();
        assert!(text.contains("\"rho\": null"));
        assert!(text.contains("\"source\": \"cs\""));
        assert_eq!(SparsePce::from_json(&text).unwrap(), cs);
    }

    #[test]
    fn malformed_json_rejected() {
        let s = spec(1, 1);
        let p = pce(vec![1.0, 2.0], vec![1.0, 1.0], s);
        let text = p.to_json().unwrap().replace("\"pi_tilde\": 1.0", "\"pi_tilde\": 2.0");
        assert!(SparsePce::from_json(&text).is_err());
    }
}
