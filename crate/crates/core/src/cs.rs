//! ℓ1-minimisation baseline: basis pursuit (or basis pursuit denoising)
//! solved by Douglas–Rachford splitting.
//!
//! The iteration alternates the projection onto the data-consistent set
//! `C = {w : ‖Ψw − y‖ ≤ ε}` and soft thresholding:
//!
//! ```text
//! x = P_C(z);  v = soft(2x − z, γ);  z ← z + v − x
//! ```
//!
//! `x` is always feasible, so it is what gets returned.

use crate::basis::{evaluate_design, BasisSpec};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::surrogate::{FitMetadata, SparsePce};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Solver controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CsConfig {
    /// Soft-threshold level per iteration.
    pub gamma: f64,
    pub max_iters: usize,
    /// Stop once `‖z_{k+1} − z_k‖ ≤ tol · max(1, ‖z_k‖)`.
    pub tol: f64,
    /// Radius of the residual ball; 0 means `Ψw = y` exactly.
    pub epsilon: f64,
}

impl Default for CsConfig {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            max_iters: 20_000,
            tol: 1e-8,
            epsilon: 0.0,
        }
    }
}

impl CsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "gamma must be positive, got {}",
                self.gamma
            )));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "epsilon must be non-negative, got {}",
                self.epsilon
            )));
        }
        if !(self.tol > 0.0) || self.max_iters == 0 {
            return Err(Error::InvalidArgument(
                "tol must be positive and max_iters at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Componentwise `sign(x) · max(|x| − t, 0)`.
pub fn soft_threshold(x: &[f64], t: f64) -> Vec<f64> {
    x.iter().map(|&v| soft(v, t)).collect()
}

#[inline]
fn soft(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Euclidean projection onto `{w : ‖Ψw − y‖ ≤ ε}` from a thin SVD of Ψ,
/// factorised once and reused across iterations.
pub struct ResidualProjector {
    /// Right singular vectors for the retained singular values (N_K × r).
    v: DMatrix<f64>,
    s: DVector<f64>,
    /// `Uᵀy` over the retained directions.
    uty: DVector<f64>,
    /// Squared norm of the part of y no coefficient vector can reach.
    floor: f64,
    epsilon: f64,
}

impl ResidualProjector {
    pub fn new(psi: &DMatrix<f64>, y: &[f64], epsilon: f64) -> Result<Self> {
        let (n, p) = psi.shape();
        if n != y.len() {
            return Err(Error::Dimension(format!(
                "design has {n} rows but y has {} entries",
                y.len()
            )));
        }
        if n == 0 || p == 0 {
            return Err(Error::Dimension("empty design".into()));
        }
        // Factor the tall orientation so the thin factors come out directly.
        let svd = if n <= p {
            psi.transpose().svd(true, true)
        } else {
            psi.clone().svd(true, true)
        };
        let (u, v_t) = (svd.u.expect("requested"), svd.v_t.expect("requested"));
        let (u, v) = if n <= p {
            (v_t.transpose(), u)
        } else {
            (u, v_t.transpose())
        };
        let s_max = svd.singular_values.max();
        let cutoff = s_max * n.max(p) as f64 * f64::EPSILON;
        let keep: Vec<usize> = (0..svd.singular_values.len())
            .filter(|&k| svd.singular_values[k] > cutoff)
            .collect();
        if epsilon == 0.0 && keep.len() < n {
            return Err(Error::RankDeficient(format!(
                "equality-constrained projection needs full row rank {n}, found rank {}",
                keep.len()
            )));
        }
        let u = u.select_columns(&keep);
        let v = v.select_columns(&keep);
        let s = DVector::from_iterator(keep.len(), keep.iter().map(|&k| svd.singular_values[k]));
        let y = DVector::from_column_slice(y);
        let uty = u.tr_mul(&y);
        let floor = (y.norm_squared() - uty.norm_squared()).max(0.0);
        if epsilon > 0.0 && floor >= epsilon * epsilon {
            return Err(Error::RankDeficient(format!(
                "no coefficient vector reaches residual {epsilon}; the smallest attainable is {}",
                floor.sqrt()
            )));
        }
        Ok(Self {
            v,
            s,
            uty,
            floor,
            epsilon,
        })
    }

    pub fn project(&self, w: &[f64]) -> Vec<f64> {
        let w = DVector::from_column_slice(w);
        // e = S Vᵀ w − Uᵀ y, the residual in the range of U
        let e = self.v.tr_mul(&w).component_mul(&self.s) - &self.uty;
        let correction = if self.epsilon == 0.0 {
            e.component_div(&self.s)
        } else {
            let radius2 = self.epsilon * self.epsilon;
            let residual2 = e.norm_squared() + self.floor;
            if residual2 <= radius2 {
                return w.as_slice().to_vec();
            }
            let mu = self.multiplier(&e, radius2);
            DVector::from_iterator(
                e.len(),
                e.iter()
                    .zip(self.s.iter())
                    .map(|(e, s)| mu * s * e / (1.0 + mu * s * s)),
            )
        };
        (w - &self.v * correction).as_slice().to_vec()
    }

    /// Root of `Σ (e_k / (1 + μ s_k²))² + floor = ε²` in μ > 0. The left side
    /// is convex and decreasing, so Newton from μ = 0 climbs monotonically.
    fn multiplier(&self, e: &DVector<f64>, radius2: f64) -> f64 {
        let mut mu = 0.0;
        for _ in 0..200 {
            let mut phi = self.floor - radius2;
            let mut dphi = 0.0;
            for (e, s) in e.iter().zip(self.s.iter()) {
                let d = 1.0 + mu * s * s;
                phi += e * e / (d * d);
                dphi -= 2.0 * e * e * s * s / (d * d * d);
            }
            if phi <= 0.0 || dphi == 0.0 {
                break;
            }
            let step = phi / -dphi;
            mu += step;
            if step <= 1e-15 * mu {
                break;
            }
        }
        mu
    }
}

/// One-shot projection (factorises Ψ on every call).
pub fn project_residual_set(w: &[f64], psi: &DMatrix<f64>, y: &[f64], epsilon: f64) -> Result<Vec<f64>> {
    if w.len() != psi.ncols() {
        return Err(Error::Dimension(format!(
            "vector has {} entries but the design has {} columns",
            w.len(),
            psi.ncols()
        )));
    }
    Ok(ResidualProjector::new(psi, y, epsilon)?.project(w))
}

/// Raw solver output.
#[derive(Debug, Clone, PartialEq)]
pub struct CsSolution {
    /// Feasible iterate with the smallest ℓ1 norm seen.
    pub coefficients: Vec<f64>,
    pub iterations: usize,
    /// Last fixed-point step `‖z_{k+1} − z_k‖`.
    pub residual: f64,
    pub converged: bool,
}

pub fn douglas_rachford(psi: &DMatrix<f64>, y: &[f64], config: &CsConfig) -> Result<CsSolution> {
    config.validate()?;
    let projector = ResidualProjector::new(psi, y, config.epsilon)?;
    let p = psi.ncols();
    let mut z = projector.project(&vec![0.0; p]);
    let mut best = z.clone();
    let mut best_l1 = f64::INFINITY;
    let mut reflected = vec![0.0; p];
    let mut residual = f64::INFINITY;
    for iter in 1..=config.max_iters {
        let x = projector.project(&z);
        let l1: f64 = x.iter().map(|v| v.abs()).sum();
        if l1 < best_l1 {
            best_l1 = l1;
            best.copy_from_slice(&x);
        }
        for k in 0..p {
            reflected[k] = soft(2.0 * x[k] - z[k], config.gamma);
        }
        let mut step2 = 0.0;
        let mut z2 = 0.0;
        for k in 0..p {
            let d = reflected[k] - x[k];
            z[k] += d;
            step2 += d * d;
            z2 += z[k] * z[k];
        }
        residual = step2.sqrt();
        if residual <= config.tol * z2.sqrt().max(1.0) {
            let x = projector.project(&z);
            let l1: f64 = x.iter().map(|v| v.abs()).sum();
            if l1 <= best_l1 {
                best = x;
            }
            return Ok(CsSolution {
                coefficients: best,
                iterations: iter,
                residual,
                converged: true,
            });
        }
    }
    Ok(CsSolution {
        coefficients: best,
        iterations: config.max_iters,
        residual,
        converged: false,
    })
}

/// Relative magnitude below which a solver coefficient counts as zero when
/// setting the inclusion indicator.
const SUPPORT_RTOL: f64 = 1e-10;

/// Fits an expansion on `spec` by ℓ1 minimisation. Coefficients are point
/// estimates: precision is infinite and the inclusion probability is 1 on
/// the numerically nonzero support.
pub fn fit_cs(data: &Dataset, spec: &BasisSpec, config: &CsConfig) -> Result<SparsePce> {
    if data.dim() != spec.dim() {
        return Err(Error::Dimension(format!(
            "dataset has {} inputs but the basis has dimension {}",
            data.dim(),
            spec.dim()
        )));
    }
    let design = evaluate_design(spec, data.xi())?;
    let sol = douglas_rachford(design.values(), data.y(), config)?;
    let scale = sol.coefficients.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let success = sol
        .coefficients
        .iter()
        .map(|v| if v.abs() > SUPPORT_RTOL * scale { 1.0 } else { 0.0 })
        .collect();
    SparsePce::new(
        spec.clone(),
        sol.coefficients,
        vec![f64::INFINITY; spec.len()],
        success,
        FitMetadata::Cs {
            config: *config,
            iterations: sol.iterations,
            residual: sol.residual,
            converged: sol.converged,
        },
    )
}
