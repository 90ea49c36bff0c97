//! Fixed problems shared by the benchmarks.

use sparsepce::basis::{evaluate_design, BasisSpec, DesignMatrix, Truncation};
use sparsepce::synthetic::OhaganInstance;
use sparsepce::Dataset;

/// A seeded regression problem on a total-degree basis.
pub struct Problem {
    pub spec: BasisSpec,
    pub data: Dataset,
}

impl Problem {
    pub fn ohagan(dim: usize, order: u32, n: usize, seed: u64) -> Self {
        let spec = BasisSpec::new(dim, order, Truncation::TotalDegree).expect("valid basis");
        let data = OhaganInstance::new(dim, seed)
            .and_then(|inst| inst.sample_dataset(n, seed))
            .expect("valid instance");
        Self { spec, data }
    }

    pub fn design(&self) -> DesignMatrix {
        evaluate_design(&self.spec, self.data.xi()).expect("matching dimensions")
    }
}
