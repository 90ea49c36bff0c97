//! Seeded modified O'Hagan test function
//! `f(ξ) = a1ᵀξ + a2ᵀsin ξ + a3ᵀcos ξ + cos(ξ)ᵀ M sin(ξ)`.
//!
//! Random draws for a given seed are split into substreams so that the
//! instance, the training data, the validation data and Monte Carlo reference
//! samples never share random numbers:
//!
//! | tag | use               |
//! |-----|-------------------|
//! | 0   | instance          |
//! | 1   | training inputs   |
//! | 2   | validation inputs |
//! | 3   | Monte Carlo       |

use crate::basis::{evaluate_design, BasisSpec};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::rng::Rng;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub const TRAINING_STREAM: u64 = 1;
pub const VALIDATION_STREAM: u64 = 2;
pub const REFERENCE_STREAM: u64 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OhaganInstance {
    pub dim: usize,
    pub seed: u64,
    pub a1: Vec<f64>,
    pub a2: Vec<f64>,
    pub a3: Vec<f64>,
    /// Row-major `dim × dim`.
    pub m: Vec<Vec<f64>>,
}

impl OhaganInstance {
    /// Draws `a1`, `a2`, `a3` (entries U(0,1), the last `min(3, dim)` entries
    /// U(1.5, 2)) and then `M` row by row (entries U(0, 2)).
    pub fn new(dim: usize, seed: u64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("dimension must be at least 1".into()));
        }
        let mut rng = Rng::new(seed);
        let strong = dim.saturating_sub(3);
        let draw_a = |rng: &mut Rng| -> Vec<f64> {
            (0..dim)
                .map(|i| {
                    if i < strong {
                        rng.uniform()
                    } else {
                        rng.uniform_range(1.5, 2.0)
                    }
                })
                .collect()
        };
        let a1 = draw_a(&mut rng);
        let a2 = draw_a(&mut rng);
        let a3 = draw_a(&mut rng);
        let m = (0..dim)
            .map(|_| (0..dim).map(|_| rng.uniform_range(0.0, 2.0)).collect())
            .collect();
        Ok(Self {
            dim,
            seed,
            a1,
            a2,
            a3,
            m,
        })
    }

    pub fn eval(&self, xi: &[f64]) -> f64 {
        debug_assert_eq!(xi.len(), self.dim);
        let sin: Vec<f64> = xi.iter().map(|x| x.sin()).collect();
        let cos: Vec<f64> = xi.iter().map(|x| x.cos()).collect();
        let mut f = 0.0;
        for i in 0..self.dim {
            f += self.a1[i] * xi[i] + self.a2[i] * sin[i] + self.a3[i] * cos[i];
            let row: f64 = self.m[i].iter().zip(&sin).map(|(m, s)| m * s).sum();
            f += cos[i] * row;
        }
        f
    }

    /// Evaluates every row of `xi`.
    pub fn eval_rows(&self, xi: &DMatrix<f64>) -> Result<Vec<f64>> {
        if xi.ncols() != self.dim {
            return Err(Error::Dimension(format!(
                "inputs have {} columns but the function has dimension {}",
                xi.ncols(),
                self.dim
            )));
        }
        let mut row = vec![0.0; self.dim];
        Ok((0..xi.nrows())
            .map(|n| {
                for (j, v) in row.iter_mut().enumerate() {
                    *v = xi[(n, j)];
                }
                self.eval(&row)
            })
            .collect())
    }

    /// Training set: `n` standard-normal inputs from substream 1 of `seed`.
    pub fn sample_dataset(&self, n: usize, seed: u64) -> Result<Dataset> {
        self.sample_stream(n, seed, TRAINING_STREAM)
    }

    /// Validation set drawn independently of the training data.
    pub fn validation_set(&self, n: usize, seed: u64) -> Result<Dataset> {
        self.sample_stream(n, seed, VALIDATION_STREAM)
    }

    /// Direct Monte Carlo outputs for reference moments.
    pub fn reference_outputs(&self, n: usize, seed: u64) -> Result<Vec<f64>> {
        Ok(self.sample_stream(n, seed, REFERENCE_STREAM)?.y().to_vec())
    }

    fn sample_stream(&self, n: usize, seed: u64, tag: u64) -> Result<Dataset> {
        if n == 0 {
            return Err(Error::InvalidArgument("sample size must be at least 1".into()));
        }
        let mut rng = Rng::substream(seed, tag);
        let mut xi = DMatrix::zeros(n, self.dim);
        for r in 0..n {
            for c in 0..self.dim {
                xi[(r, c)] = rng.standard_normal();
            }
        }
        let y = self.eval_rows(&xi)?;
        Dataset::new(xi, y)
    }
}

/// A random expansion with a known small support, for recovery tests.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedExpansion {
    /// Coefficients on the full basis; zero off the support.
    pub coefficients: Vec<f64>,
    /// Support, ascending.
    pub support: Vec<usize>,
}

impl PlantedExpansion {
    /// `n_active` distinct terms chosen uniformly, each with magnitude
    /// U(0.5, 2) and a random sign.
    pub fn new(spec: &BasisSpec, n_active: usize, seed: u64) -> Result<Self> {
        if n_active == 0 || n_active > spec.len() {
            return Err(Error::InvalidArgument(format!(
                "cannot plant {n_active} terms in a basis of {}",
                spec.len()
            )));
        }
        let mut rng = Rng::new(seed);
        let mut pool: Vec<usize> = (0..spec.len()).collect();
        // partial Fisher–Yates
        for k in 0..n_active {
            let j = k + rng.below(pool.len() - k);
            pool.swap(k, j);
        }
        let mut support = pool[..n_active].to_vec();
        support.sort_unstable();
        let mut coefficients = vec![0.0; spec.len()];
        for &j in &support {
            let sign = if rng.uniform() < 0.5 { -1.0 } else { 1.0 };
            coefficients[j] = sign * rng.uniform_range(0.5, 2.0);
        }
        Ok(Self { coefficients, support })
    }

    /// `n` standard-normal inputs (training substream of `seed`) with outputs
    /// `Ψ c + N(0, noise_std²)`.
    pub fn sample(&self, spec: &BasisSpec, n: usize, noise_std: f64, seed: u64) -> Result<Dataset> {
        if n == 0 {
            return Err(Error::InvalidArgument("sample size must be at least 1".into()));
        }
        let mut rng = Rng::substream(seed, TRAINING_STREAM);
        let mut xi = DMatrix::zeros(n, spec.dim());
        for r in 0..n {
            for c in 0..spec.dim() {
                xi[(r, c)] = rng.standard_normal();
            }
        }
        let mut y = evaluate_design(spec, &xi)?.mul_vec(&self.coefficients);
        for v in &mut y {
            *v += noise_std * rng.standard_normal();
        }
        Dataset::new(xi, y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coefficient_ranges() {
        let inst = OhaganInstance::new(10, 42).unwrap();
        for a in [&inst.a1, &inst.a2, &inst.a3] {
            assert!(a[..7].iter().all(|v| (0.0..1.0).contains(v)));
            assert!(a[7..].iter().all(|v| (1.5..2.0).contains(v)));
        }
        assert!(inst.m.iter().flatten().all(|v| (0.0..2.0).contains(v)));
        let small = OhaganInstance::new(2, 1).unwrap();
        assert!(small.a1.iter().all(|v| (1.5..2.0).contains(v)));
    }

    #[test]
    fn draw_order_is_a1_a2_a3_then_m() {
        let inst = OhaganInstance::new(4, 5).unwrap();
        let mut rng = Rng::new(5);
        let mut next_a = |i: usize| {
            if i == 0 {
                rng.uniform()
            } else {
                rng.uniform_range(1.5, 2.0)
            }
        };
        let expect: Vec<f64> = (0..12).map(|k| next_a(k % 4)).collect();
        assert_eq!(&expect[..4], &inst.a1[..]);
        assert_eq!(&expect[4..8], &inst.a2[..]);
        assert_eq!(&expect[8..], &inst.a3[..]);
        let mut rng = Rng::new(5);
        for _ in 0..12 {
            rng.uniform();
        }
        assert_eq!(inst.m[0][0], 2.0 * rng.uniform());
        assert_eq!(inst.m[0][1], 2.0 * rng.uniform());
    }

    #[test]
    fn reproducible_and_seed_sensitive() {
        assert_eq!(OhaganInstance::new(10, 3).unwrap(), OhaganInstance::new(10, 3).unwrap());
        assert_ne!(OhaganInstance::new(10, 3).unwrap(), OhaganInstance::new(10, 4).unwrap());
        assert!(OhaganInstance::new(0, 3).is_err());
    }

    #[test]
    fn eval_examples() {
        let zero = OhaganInstance {
            dim: 2,
            seed: 0,
            a1: vec![0.0; 2],
            a2: vec![0.0; 2],
            a3: vec![0.0; 2],
            m: vec![vec![0.0; 2]; 2],
        };
        assert_eq!(zero.eval(&[0.3, -1.2]), 0.0);
        let one = OhaganInstance {
            dim: 1,
            seed: 0,
            a1: vec![1.0],
            a2: vec![1.0],
            a3: vec![1.0],
            m: vec![vec![1.0]],
        };
        assert_eq!(one.eval(&[0.0]), 1.0);
    }

    #[test]
    fn eval_matches_direct_formula() {
        let inst = OhaganInstance::new(5, 11).unwrap();
        let mut rng = Rng::new(100);
        for _ in 0..10 {
            let x: Vec<f64> = (0..5).map(|_| rng.standard_normal()).collect();
            let mut direct = 0.0;
            for i in 0..5 {
                direct += inst.a1[i] * x[i];
                direct += inst.a2[i] * x[i].sin();
                direct += inst.a3[i] * x[i].cos();
                for j in 0..5 {
                    direct += x[i].cos() * inst.m[i][j] * x[j].sin();
                }
            }
            assert!((inst.eval(&x) - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn planted_expansion_has_requested_support() {
        let spec = BasisSpec::new(4, 3, crate::basis::Truncation::TotalDegree).unwrap();
        let p = PlantedExpansion::new(&spec, 6, 9).unwrap();
        assert_eq!(p.support.len(), 6);
        assert!(p.support.windows(2).all(|w| w[0] < w[1]));
        let nonzero: Vec<usize> = (0..spec.len()).filter(|&j| p.coefficients[j] != 0.0).collect();
        assert_eq!(nonzero, p.support);
        assert!(p
            .coefficients
            .iter()
            .all(|c| *c == 0.0 || (0.5..2.0).contains(&c.abs())));
        let data = p.sample(&spec, 30, 0.0, 1).unwrap();
        let design = evaluate_design(&spec, data.xi()).unwrap();
        assert_eq!(design.mul_vec(&p.coefficients), data.y());
        assert!(PlantedExpansion::new(&spec, 0, 1).is_err());
        assert!(PlantedExpansion::new(&spec, spec.len() + 1, 1).is_err());
    }

    #[test]
    fn streams_are_independent() {
        let inst = OhaganInstance::new(3, 7).unwrap();
        let train = inst.sample_dataset(5, 7).unwrap();
        let valid = inst.validation_set(5, 7).unwrap();
        assert_ne!(train.xi(), valid.xi());
        assert_eq!(train, inst.sample_dataset(5, 7).unwrap());
        assert!(inst.sample_dataset(0, 7).is_err());
        assert_eq!(inst.reference_outputs(4, 7).unwrap().len(), 4);
    }
}
