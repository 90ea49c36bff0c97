//! Experiment harness on the O'Hagan benchmark: sweep one setting over a
//! grid, fit every cell, and collect accuracy, sparsity and moment summaries.

use crate::basis::{evaluate_design, BasisSpec, Truncation};
use crate::cs::{fit_cs, CsConfig};
use crate::error::{Error, Result};
use crate::rvm::{fit_design, FitConfig, InitStrategy, PriorConfig};
use crate::surrogate::{
    bootstrap_moment_intervals, l2_distance, r_squared, relative_mse, MomentIntervals, Moments, SparsePce,
};
use crate::synthetic::OhaganInstance;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::io::Write;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StudyKind {
    /// Beta prior parameter c.
    VaryC,
    /// Truncation order P.
    VaryP,
    /// Training-set size N.
    VaryN,
}

impl StudyKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "vary-c" => Ok(StudyKind::VaryC),
            "vary-p" => Ok(StudyKind::VaryP),
            "vary-n" => Ok(StudyKind::VaryN),
            other => Err(Error::InvalidArgument(format!(
                "unknown study kind {other:?}; expected vary-c, vary-p or vary-n"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            StudyKind::VaryC => "vary-c",
            StudyKind::VaryP => "vary-p",
            StudyKind::VaryN => "vary-n",
        }
    }
}

/// Base settings; the grid overrides one of `prior.c`, `order` or `n_train`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub kind: StudyKind,
    pub grid: Vec<f64>,
    pub seed: u64,
    pub dim: usize,
    pub order: u32,
    pub rule: String,
    pub q: Option<f64>,
    pub n_train: usize,
    pub n_validation: usize,
    /// Direct Monte Carlo samples of the true function for reference moments.
    pub n_reference: usize,
    /// Samples for the expansion's skewness and kurtosis.
    pub n_moments: usize,
    pub bootstrap: usize,
    pub alpha: f64,
    pub prior: PriorConfig,
    pub fit: FitConfig,
    /// Also fit the compressive-sensing baseline when set.
    pub cs: Option<CsConfig>,
}

impl StudyConfig {
    pub fn new(kind: StudyKind, grid: Vec<f64>) -> Self {
        Self {
            kind,
            grid,
            seed: 42,
            dim: 10,
            order: 4,
            rule: "TD".into(),
            q: None,
            n_train: 600,
            n_validation: 10_000,
            n_reference: 100_000,
            n_moments: 100_000,
            bootstrap: 1000,
            alpha: 0.05,
            prior: PriorConfig::default(),
            fit: FitConfig::default(),
            cs: None,
        }
    }

    pub fn truncation(&self) -> Result<Truncation> {
        Truncation::parse(&self.rule, self.q)
    }

    fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::InvalidArgument("study grid is empty".into()));
        }
        for &v in &self.grid {
            let ok = match self.kind {
                StudyKind::VaryC => v > 0.0 && v.is_finite(),
                StudyKind::VaryP | StudyKind::VaryN => v >= 0.0 && v.fract() == 0.0 && v < 1e9,
            };
            if !ok || (self.kind == StudyKind::VaryN && v < 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "invalid {} grid value {v}",
                    self.kind.name()
                )));
            }
        }
        if self.dim == 0 || self.n_validation < 2 || self.n_reference == 0 || self.n_moments == 0 {
            return Err(Error::InvalidArgument(
                "dimension, validation, reference and moment sample sizes must be positive".into(),
            ));
        }
        self.truncation()?;
        self.prior.validate()?;
        self.fit.validate()?;
        if let Some(cs) = &self.cs {
            cs.validate()?;
        }
        Ok(())
    }
}

/// Settings of one grid cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellParams {
    pub c: f64,
    pub order: u32,
    pub n_train: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub n_terms: usize,
    pub converged: bool,
    pub sweeps: usize,
    pub active: usize,
    /// Start that produced the reported state.
    pub start: InitStrategy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateMetrics {
    pub relative_mse: f64,
    pub r2: f64,
    /// Percentage of terms with π̃ > 0.01 (|w| > 8e-4 for CS).
    pub sparsity_01: f64,
    /// Percentage of terms with π̃ > 0.95 (|w| > 8e-4 for CS).
    pub sparsity_95: f64,
    pub moments: Moments,
    /// Whether mean and std fall inside the reference bootstrap intervals.
    pub moments_in_reference: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsCell {
    pub converged: bool,
    pub iterations: usize,
    pub metrics: SurrogateMetrics,
    /// Squared coefficient distance to the RVM expansion.
    pub l2_sq_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyCell {
    pub value: f64,
    pub params: CellParams,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit_summary: Option<FitSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metrics: Option<SurrogateMetrics>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub elbo_trace: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cs: Option<CsCell>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub study_kind: StudyKind,
    pub seed: u64,
    pub grid: Vec<f64>,
    pub config: StudyConfig,
    pub instance: OhaganInstance,
    pub reference: MomentIntervals,
    pub cells: Vec<StudyCell>,
}

/// Runs every grid cell, `jobs` at a time (all cores when `None`). Cells
/// that fail carry their error message; the study itself only fails on bad
/// configuration.
pub fn run_study(config: &StudyConfig, jobs: Option<usize>) -> Result<StudyReport> {
    config.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        builder = builder.num_threads(j.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start worker pool: {e}")))?;
    pool.install(|| {
        let instance = OhaganInstance::new(config.dim, config.seed)?;
        let reference_samples = instance.reference_outputs(config.n_reference, config.seed)?;
        let reference = bootstrap_moment_intervals(&reference_samples, config.bootstrap, config.alpha, config.seed)?;
        let validation = instance.validation_set(config.n_validation, config.seed)?;
        let cells = config
            .grid
            .par_iter()
            .map(|&value| run_cell(config, &instance, &validation, &reference, value))
            .collect();
        Ok(StudyReport {
            study_kind: config.kind,
            seed: config.seed,
            grid: config.grid.clone(),
            config: config.clone(),
            instance,
            reference,
            cells,
        })
    })
}

fn cell_params(config: &StudyConfig, value: f64) -> CellParams {
    let mut p = CellParams {
        c: config.prior.c,
        order: config.order,
        n_train: config.n_train,
    };
    match config.kind {
        StudyKind::VaryC => p.c = value,
        StudyKind::VaryP => p.order = value as u32,
        StudyKind::VaryN => p.n_train = value as usize,
    }
    p
}

fn run_cell(
    config: &StudyConfig,
    instance: &OhaganInstance,
    validation: &crate::dataset::Dataset,
    reference: &MomentIntervals,
    value: f64,
) -> StudyCell {
    let params = cell_params(config, value);
    let mut cell = StudyCell {
        value,
        params,
        fit_summary: None,
        metrics: None,
        elbo_trace: Vec::new(),
        cs: None,
        error: None,
    };
    if let Err(e) = fill_cell(config, instance, validation, reference, &mut cell) {
        cell.error = Some(e.to_string());
    }
    cell
}

fn fill_cell(
    config: &StudyConfig,
    instance: &OhaganInstance,
    validation: &crate::dataset::Dataset,
    reference: &MomentIntervals,
    cell: &mut StudyCell,
) -> Result<()> {
    let p = cell.params;
    let spec = BasisSpec::new(config.dim, p.order, config.truncation()?)?;
    let data = instance.sample_dataset(p.n_train, config.seed)?;
    let prior = PriorConfig { c: p.c, ..config.prior };
    let design = evaluate_design(&spec, data.xi())?;
    let fit = fit_design(&design, data.y(), &spec, &prior, &config.fit)?;
    cell.fit_summary = Some(FitSummary {
        n_terms: spec.len(),
        converged: fit.converged,
        sweeps: fit.sweeps,
        active: fit.state.active.len(),
        start: fit.start,
    });
    cell.metrics = Some(surrogate_metrics(&fit.pce, config, validation, reference)?);
    cell.elbo_trace = fit.state.elbo_trace.clone();
    if let Some(cs_config) = &config.cs {
        let cs = fit_cs(&data, &spec, cs_config)?;
        let (converged, iterations) = match cs.metadata() {
            crate::surrogate::FitMetadata::Cs {
                converged, iterations, ..
            } => (*converged, *iterations),
            _ => unreachable!("fit_cs tags its output"),
        };
        cell.cs = Some(CsCell {
            converged,
            iterations,
            metrics: surrogate_metrics(&cs, config, validation, reference)?,
            l2_sq_distance: l2_distance(&fit.pce, &cs)?,
        });
    }
    Ok(())
}

fn surrogate_metrics(
    pce: &SparsePce,
    config: &StudyConfig,
    validation: &crate::dataset::Dataset,
    reference: &MomentIntervals,
) -> Result<SurrogateMetrics> {
    let predictions = pce.predict(validation.xi())?;
    let moments = pce.moments(config.n_moments, config.seed)?;
    Ok(SurrogateMetrics {
        relative_mse: relative_mse(&predictions, validation.y())?,
        r2: r_squared(&predictions, validation.y())?,
        sparsity_01: pce.sparsity_index(0.01),
        sparsity_95: pce.sparsity_index(0.95),
        moments,
        moments_in_reference: reference.contains_mean_and_std(&moments),
    })
}

const CSV_HEADER: [&str; 24] = [
    "kind",
    "value",
    "c",
    "order",
    "n_train",
    "n_terms",
    "converged",
    "sweeps",
    "active",
    "rvm_mse",
    "rvm_r2",
    "rvm_sparsity_01",
    "rvm_sparsity_95",
    "rvm_mean",
    "rvm_std",
    "rvm_skewness",
    "rvm_kurtosis",
    "cs_mse",
    "cs_r2",
    "cs_sparsity",
    "cs_mean",
    "cs_std",
    "l2_sq_distance",
    "error",
];

impl StudyReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// One row per cell; empty fields where a value does not apply.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_HEADER)?;
        let num = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
        for cell in &self.cells {
            let m = cell.metrics.as_ref();
            let s = cell.fit_summary.as_ref();
            let cs = cell.cs.as_ref();
            let record = [
                self.study_kind.name().to_string(),
                cell.value.to_string(),
                cell.params.c.to_string(),
                cell.params.order.to_string(),
                cell.params.n_train.to_string(),
                s.map(|s| s.n_terms.to_string()).unwrap_or_default(),
                s.map(|s| s.converged.to_string()).unwrap_or_default(),
                s.map(|s| s.sweeps.to_string()).unwrap_or_default(),
                s.map(|s| s.active.to_string()).unwrap_or_default(),
                num(m.map(|m| m.relative_mse)),
                num(m.map(|m| m.r2)),
                num(m.map(|m| m.sparsity_01)),
                num(m.map(|m| m.sparsity_95)),
                num(m.map(|m| m.moments.mean)),
                num(m.map(|m| m.moments.std)),
                num(m.map(|m| m.moments.skewness)),
                num(m.map(|m| m.moments.kurtosis)),
                num(cs.map(|c| c.metrics.relative_mse)),
                num(cs.map(|c| c.metrics.r2)),
                num(cs.map(|c| c.metrics.sparsity_95)),
                num(cs.map(|c| c.metrics.moments.mean)),
                num(cs.map(|c| c.metrics.moments.std)),
                num(cs.map(|c| c.l2_sq_distance)),
                cell.error.clone().unwrap_or_default(),
            ];
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Aligned plain-text table, one row per cell, with the reference
    /// moments on top.
    pub fn render_table(&self) -> String {
        let r = &self.reference;
        let mut out = String::new();
        let _ = writeln!(
            out,
            "reference MC (n={}): mean {:.4} [{:.4}, {:.4}]  std {:.4} [{:.4}, {:.4}]  skew {:.4}  kurt {:.4}",
            self.config.n_reference,
            r.point.mean,
            r.mean.0,
            r.mean.1,
            r.point.std,
            r.std.0,
            r.std.1,
            r.point.skewness,
            r.point.kurtosis
        );
        let mut header = vec![
            "value", "terms", "sweeps", "active", "mse", "R2", "S>0.01%", "S>0.95%", "mean", "std", "skew", "kurt",
        ];
        if self.config.cs.is_some() {
            header.extend(["cs_mse", "cs_R2", "cs_S%", "l2_sq"]);
        }
        let mut rows: Vec<Vec<String>> = vec![header.iter().map(|s| s.to_string()).collect()];
        for cell in &self.cells {
            let mut row = vec![format!("{}", cell.value)];
            match (&cell.fit_summary, &cell.metrics) {
                (Some(s), Some(m)) => {
                    row.extend([
                        s.n_terms.to_string(),
                        format!("{}{}", s.sweeps, if s.converged { "" } else { "*" }),
                        s.active.to_string(),
                        format!("{:.3e}", m.relative_mse),
                        format!("{:.4}", m.r2),
                        format!("{:.1}", m.sparsity_01),
                        format!("{:.1}", m.sparsity_95),
                        format!("{:.4}", m.moments.mean),
                        format!("{:.4}", m.moments.std),
                        format!("{:.4}", m.moments.skewness),
                        format!("{:.4}", m.moments.kurtosis),
                    ]);
                    if let Some(cs) = &cell.cs {
                        row.extend([
                            format!("{:.3e}", cs.metrics.relative_mse),
                            format!("{:.4}", cs.metrics.r2),
                            format!("{:.1}", cs.metrics.sparsity_95),
                            format!("{:.3e}", cs.l2_sq_distance),
                        ]);
                    }
                }
                _ => row.push(format!("error: {}", cell.error.as_deref().unwrap_or("unknown"))),
            }
            if let (Some(_), Some(e)) = (&cell.metrics, &cell.error) {
                row.push(format!("error: {e}"));
            }
            rows.push(row);
        }
        let ncols = rows.iter().map(Vec::len).max().unwrap_or(0);
        let widths: Vec<usize> = (0..ncols)
            .map(|c| {
                rows.iter()
                    .filter_map(|r| r.get(c))
                    .map(|s| s.chars().count())
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        for row in &rows {
            let line: Vec<String> = row
                .iter()
                .enumerate()
                .map(|(c, s)| format!("{:>width$}", s, width = widths[c]))
                .collect();
            let _ = writeln!(out, "{}", line.join("  ").trim_end());
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(kind: StudyKind, grid: Vec<f64>) -> StudyConfig {
        StudyConfig {
            dim: 3,
            order: 2,
            n_train: 40,
            n_validation: 200,
            n_reference: 2000,
            n_moments: 2000,
            bootstrap: 100,
            ..StudyConfig::new(kind, grid)
        }
    }

    #[test]
    fn vary_p_counts_terms() {
        let cfg = small(StudyKind::VaryP, vec![1.0, 2.0, 3.0]);
        let report = run_study(&cfg, Some(2)).unwrap();
        let counts: Vec<usize> = report
            .cells
            .iter()
            .map(|c| c.fit_summary.as_ref().unwrap().n_terms)
            .collect();
        assert_eq!(counts, vec![4, 10, 20]);
        for cell in &report.cells {
            for w in cell.elbo_trace.windows(2) {
                assert!(w[1] >= w[0] - 1e-8 * w[0].abs());
            }
        }
    }

    #[test]
    fn reproducible_regardless_of_job_count() {
        let mut cfg = small(StudyKind::VaryC, vec![0.2, 1.0]);
        cfg.cs = Some(CsConfig {
            max_iters: 200,
            ..CsConfig::default()
        });
        let a = run_study(&cfg, Some(1)).unwrap();
        let b = run_study(&cfg, Some(3)).unwrap();
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        let mut csv_a = Vec::new();
        a.write_csv(&mut csv_a).unwrap();
        let text = String::from_utf8(csv_a).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(a.render_table().contains("cs_mse"));
    }

    #[test]
    fn failing_cells_do_not_abort() {
        // overdetermined cells cannot be interpolated by the equality-mode
        // baseline; the RVM part still runs
        let mut cfg = small(StudyKind::VaryN, vec![5.0, 40.0]);
        cfg.cs = Some(CsConfig::default());
        let report = run_study(&cfg, None).unwrap();
        assert!(report.cells[0].error.is_none());
        assert!(report.cells[1].error.as_deref().unwrap().contains("rank"));
        assert!(report.cells[1].fit_summary.is_some());
        assert!(report.render_table().contains("error"));
    }

    #[test]
    fn bad_grids_rejected() {
        assert!(run_study(&small(StudyKind::VaryC, vec![]), None).is_err());
        assert!(run_study(&small(StudyKind::VaryC, vec![0.0]), None).is_err());
        assert!(run_study(&small(StudyKind::VaryP, vec![1.5]), None).is_err());
        assert!(run_study(&small(StudyKind::VaryN, vec![0.0]), None).is_err());
        assert!(StudyKind::parse("vary-q").is_err());
        assert_eq!(StudyKind::parse("vary-n").unwrap(), StudyKind::VaryN);
    }
}
