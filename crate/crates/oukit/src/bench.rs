//! Benchmark harness: runs every estimator over a grid of experiment cells
//! with replicated seeds, aggregates per-method means and absolute errors,
//! and serializes the results as CSV.

use std::io::BufRead;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kalman::{kalman_mle, MleConfig, ObsNoise};
use crate::mlp::{predict_params, MlpModel};
use crate::ols::{ols_fit, recover_params};
use crate::process::{OuParams, TimeGrid};
use crate::report::{EstimateReport, Method};
use crate::simulate::{simulate, PathSet};
use crate::util::{atomic_write, derive_seed, Accumulator};

const TAG_BENCH: u16 = 0x4201;

/// One experiment configuration: how many paths to simulate, at what
/// resolution, over what horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridCell {
    pub paths: usize,
    pub n_steps: usize,
    pub horizon: f64,
}

/// The benchmark design: true parameters, the cell cross product, the number
/// of replicated runs per cell, and which estimators to evaluate.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentGrid {
    pub truth_theta: f64,
    pub truth_mu: f64,
    pub truth_sigma: f64,
    pub truth_x0: f64,
    pub paths_choices: Vec<usize>,
    pub n_steps_choices: Vec<usize>,
    pub horizon_choices: Vec<f64>,
    pub replicates: usize,
    pub methods: Vec<Method>,
}

impl Default for ExperimentGrid {
    fn default() -> Self {
        ExperimentGrid {
            truth_theta: 3.0,
            truth_mu: 0.5,
            truth_sigma: 0.5,
            truth_x0: 0.0,
            paths_choices: vec![100, 500],
            n_steps_choices: vec![1000, 5000],
            horizon_choices: vec![1.0, 5.0],
            replicates: 20,
            methods: vec![Method::Ols, Method::Kalman, Method::Nn],
        }
    }
}

impl ExperimentGrid {
    pub fn validate(&self) -> Result<()> {
        if !(self.truth_theta.is_finite() && self.truth_theta > 0.0) {
            return Err(Error::InvalidConfig {
                reason: format!("truth theta must be positive, got {}", self.truth_theta),
            });
        }
        if !(self.truth_sigma.is_finite() && self.truth_sigma >= 0.0) {
            return Err(Error::InvalidConfig {
                reason: format!("truth sigma must be nonnegative, got {}", self.truth_sigma),
            });
        }
        if !self.truth_mu.is_finite() || !self.truth_x0.is_finite() {
            return Err(Error::InvalidConfig {
                reason: "truth mu and x0 must be finite".into(),
            });
        }
        if self.paths_choices.is_empty() || self.paths_choices.iter().any(|&p| p == 0) {
            return Err(Error::InvalidConfig {
                reason: "paths choices must be nonempty positive".into(),
            });
        }
        if self.n_steps_choices.is_empty() || self.n_steps_choices.iter().any(|&n| n == 0) {
            return Err(Error::InvalidConfig {
                reason: "n_steps choices must be nonempty positive".into(),
            });
        }
        if self.horizon_choices.is_empty()
            || self.horizon_choices.iter().any(|&t| !(t.is_finite() && t > 0.0))
        {
            return Err(Error::InvalidConfig {
                reason: "horizon choices must be nonempty positive".into(),
            });
        }
        if self.replicates == 0 {
            return Err(Error::InvalidConfig {
                reason: "replicates must be at least 1".into(),
            });
        }
        for (i, m) in self.methods.iter().enumerate() {
            if self.methods[..i].contains(m) {
                return Err(Error::InvalidConfig {
                    reason: format!("method {m} listed twice"),
                });
            }
        }
        Ok(())
    }

    /// Cross product of the choice lists: paths outermost, then n_steps,
    /// then horizon, matching the reference table's row order.
    pub fn cells(&self) -> Vec<GridCell> {
        let mut cells = Vec::new();
        for &paths in &self.paths_choices {
            for &n_steps in &self.n_steps_choices {
                for &horizon in &self.horizon_choices {
                    cells.push(GridCell {
                        paths,
                        n_steps,
                        horizon,
                    });
                }
            }
        }
        cells
    }

    /// Truth triple in output column order [mu, theta, sigma].
    pub fn truth(&self) -> [f64; 3] {
        [self.truth_mu, self.truth_theta, self.truth_sigma]
    }

    /// Serializes the grid as a key=value definition file.
    pub fn to_definition_string(&self) -> String {
        let join_usize =
            |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let methods = self
            .methods
            .iter()
            .map(Method::as_str)
            .collect::<Vec<_>>()
            .join(",");
        let horizons = self
            .horizon_choices
            .iter()
            .map(|x| x.to_string())
            .collect::<Vec<_>>()
            .join(",");
        format!(
            "theta = {}\nmu = {}\nsigma = {}\nx0 = {}\npaths = {}\nn_steps = {}\nhorizons = {}\nreplicates = {}\nmethods = {}\n",
            self.truth_theta,
            self.truth_mu,
            self.truth_sigma,
            self.truth_x0,
            join_usize(&self.paths_choices),
            join_usize(&self.n_steps_choices),
            horizons,
            self.replicates,
            methods,
        )
    }

    pub fn write_definition(&self, path: &Path) -> Result<()> {
        let text = self.to_definition_string();
        atomic_write(path, |w| {
            w.write_all(text.as_bytes())?;
            Ok(())
        })
    }

    /// Parses a key=value definition; keys not present keep their defaults.
    pub fn from_definition_str(text: &str) -> Result<ExperimentGrid> {
        fn parse_f64(line: usize, v: &str) -> Result<f64> {
            v.trim().parse().map_err(|_| Error::Parse {
                line,
                reason: format!("expected a number, got `{}`", v.trim()),
            })
        }
        fn parse_usize_list(line: usize, v: &str) -> Result<Vec<usize>> {
            v.split(',')
                .map(|x| {
                    x.trim().parse().map_err(|_| Error::Parse {
                        line,
                        reason: format!("expected an integer, got `{}`", x.trim()),
                    })
                })
                .collect()
        }
        let mut grid = ExperimentGrid::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (key, value) = trimmed.split_once('=').ok_or_else(|| Error::Parse {
                line,
                reason: "expected `key = value`".into(),
            })?;
            let value = value.trim();
            match key.trim() {
                "theta" => grid.truth_theta = parse_f64(line, value)?,
                "mu" => grid.truth_mu = parse_f64(line, value)?,
                "sigma" => grid.truth_sigma = parse_f64(line, value)?,
                "x0" => grid.truth_x0 = parse_f64(line, value)?,
                "paths" => grid.paths_choices = parse_usize_list(line, value)?,
                "n_steps" => grid.n_steps_choices = parse_usize_list(line, value)?,
                "horizons" => {
                    grid.horizon_choices = value
                        .split(',')
                        .map(|x| parse_f64(line, x))
                        .collect::<Result<_>>()?
                }
                "replicates" => {
                    grid.replicates = value.parse().map_err(|_| Error::Parse {
                        line,
                        reason: format!("expected an integer, got `{value}`"),
                    })?
                }
                "methods" => {
                    grid.methods = value
                        .split(',')
                        .map(|m| {
                            Method::parse(m.trim()).map_err(|_| Error::Parse {
                                line,
                                reason: format!("unknown method `{}`", m.trim()),
                            })
                        })
                        .collect::<Result<_>>()?
                }
                other => {
                    return Err(Error::Parse {
                        line,
                        reason: format!("unknown key `{other}`"),
                    })
                }
            }
        }
        grid.validate()?;
        Ok(grid)
    }

    pub fn read_definition(path: &Path) -> Result<ExperimentGrid> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_definition_str(&text)
    }
}

/// A single estimate, or the reason it failed.
#[derive(Debug, Clone, PartialEq)]
pub enum RowOutcome {
    Ok {
        mu_hat: f64,
        theta_hat: f64,
        sigma_hat: f64,
    },
    Failed {
        tag: String,
    },
}

/// One (cell, replicate, method) result.
#[derive(Debug, Clone, PartialEq)]
pub struct GridRow {
    pub paths: usize,
    pub n_steps: usize,
    pub horizon: f64,
    pub replicate: usize,
    pub method: Method,
    pub outcome: RowOutcome,
}

/// Per-method aggregates over all successful rows. `mean` and `mae` are in
/// output column order [mu, theta, sigma]; both are None when no row succeeded.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodSummary {
    pub method: Method,
    pub n_ok: usize,
    pub n_failed: usize,
    pub mean: Option<[f64; 3]>,
    pub mae: Option<[f64; 3]>,
}

/// Full benchmark output: every row in deterministic (cell, replicate, method)
/// order plus one summary per method.
#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    pub rows: Vec<GridRow>,
    pub summaries: Vec<MethodSummary>,
}

impl GridResult {
    pub fn summary(&self, method: Method) -> Option<&MethodSummary> {
        self.summaries.iter().find(|s| s.method == method)
    }
}

fn summarize(rows: &[GridRow], truth: [f64; 3], methods: &[Method]) -> Vec<MethodSummary> {
    methods
        .iter()
        .map(|&method| {
            let mut sums = [Accumulator::new(), Accumulator::new(), Accumulator::new()];
            let mut errs = [Accumulator::new(), Accumulator::new(), Accumulator::new()];
            let mut n_ok = 0usize;
            let mut n_failed = 0usize;
            for row in rows.iter().filter(|r| r.method == method) {
                match &row.outcome {
                    RowOutcome::Ok {
                        mu_hat,
                        theta_hat,
                        sigma_hat,
                    } => {
                        let est = [*mu_hat, *theta_hat, *sigma_hat];
                        for k in 0..3 {
                            sums[k].add(est[k]);
                            errs[k].add((est[k] - truth[k]).abs());
                        }
                        n_ok += 1;
                    }
                    RowOutcome::Failed { .. } => n_failed += 1,
                }
            }
            let (mean, mae) = if n_ok > 0 {
                let n = n_ok as f64;
                (
                    Some([sums[0].total() / n, sums[1].total() / n, sums[2].total() / n]),
                    Some([errs[0].total() / n, errs[1].total() / n, errs[2].total() / n]),
                )
            } else {
                (None, None)
            };
            MethodSummary {
                method,
                n_ok,
                n_failed,
                mean,
                mae,
            }
        })
        .collect()
}

fn run_grid_with<F>(grid: &ExperimentGrid, seed: u64, estimate: F) -> Result<GridResult>
where
    F: Fn(&PathSet, Method) -> Result<EstimateReport> + Sync,
{
    grid.validate()?;
    let cells = grid.cells();
    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..grid.replicates).map(move |r| (c, r)))
        .collect();
    let per_job: Vec<Vec<GridRow>> = jobs
        .par_iter()
        .map(|&(cell_idx, replicate)| {
            let cell = cells[cell_idx];
            let run_seed = derive_seed(
                seed,
                TAG_BENCH,
                ((cell_idx as u64) << 32) | replicate as u64,
            );
            let make_rows = |outcomes: Vec<(Method, RowOutcome)>| {
                outcomes
                    .into_iter()
                    .map(|(method, outcome)| GridRow {
                        paths: cell.paths,
                        n_steps: cell.n_steps,
                        horizon: cell.horizon,
                        replicate,
                        method,
                        outcome,
                    })
                    .collect::<Vec<_>>()
            };
            let params = match OuParams::new(
                grid.truth_theta,
                grid.truth_mu,
                grid.truth_sigma,
                grid.truth_x0,
                cell.horizon,
            )
            .and_then(|p| TimeGrid::for_params(&p, cell.n_steps).map(|g| (p, g)))
            {
                Ok(pg) => pg,
                Err(e) => {
                    let tag = e.tag().to_string();
                    return make_rows(
                        grid.methods
                            .iter()
                            .map(|&m| (m, RowOutcome::Failed { tag: tag.clone() }))
                            .collect(),
                    );
                }
            };
            let set = match simulate(&params.0, &params.1, cell.paths, run_seed) {
                Ok(set) => set,
                Err(e) => {
                    let tag = e.tag().to_string();
                    return make_rows(
                        grid.methods
                            .iter()
                            .map(|&m| (m, RowOutcome::Failed { tag: tag.clone() }))
                            .collect(),
                    );
                }
            };
            make_rows(
                grid.methods
                    .iter()
                    .map(|&m| {
                        let outcome = match estimate(&set, m) {
                            Ok(report) => RowOutcome::Ok {
                                mu_hat: report.mu_hat,
                                theta_hat: report.theta_hat,
                                sigma_hat: report.sigma_hat,
                            },
                            Err(e) => RowOutcome::Failed {
                                tag: e.tag().to_string(),
                            },
                        };
                        (m, outcome)
                    })
                    .collect(),
            )
        })
        .collect();
    let rows: Vec<GridRow> = per_job.into_iter().flatten().collect();
    let summaries = summarize(&rows, grid.truth(), &grid.methods);
    Ok(GridResult { rows, summaries })
}

/// Runs every (cell, replicate, method) combination. All methods in one
/// replicate see the same simulated PathSet; replicate seeds are derived
/// independently per (cell, replicate).
pub fn run_grid(
    grid: &ExperimentGrid,
    nn_model: Option<&MlpModel>,
    seed: u64,
) -> Result<GridResult> {
    if grid.methods.contains(&Method::Nn) && nn_model.is_none() {
        return Err(Error::InvalidConfig {
            reason: "method nn requires a trained model".into(),
        });
    }
    run_grid_with(grid, seed, |set, method| match method {
        Method::Ols => {
            let fit = ols_fit(set)?;
            recover_params(&fit, set.grid().dt())
        }
        Method::Kalman => kalman_mle(set, ObsNoise::Fixed(0.0), &MleConfig::default()),
        Method::Nn => predict_params(nn_model.expect("checked above"), set),
    })
}

pub const TABLE_HEADER: &str =
    "paths,n_steps,horizon,replicate,method,mu_hat,theta_hat,sigma_hat,status";

/// Renders the result as CSV: one row per (cell, replicate, method), then one
/// `mean` aggregate row per method. Failed rows carry the error tag in the
/// status column and empty estimate fields.
pub fn table_to_csv_string(result: &GridResult) -> Result<String> {
    if result.rows.is_empty() {
        return Err(Error::EmptyResult {
            what: "grid result",
        });
    }
    let mut out = String::from(TABLE_HEADER);
    out.push('\n');
    for row in &result.rows {
        match &row.outcome {
            RowOutcome::Ok {
                mu_hat,
                theta_hat,
                sigma_hat,
            } => out.push_str(&format!(
                "{},{},{},{},{},{},{},{},ok\n",
                row.paths,
                row.n_steps,
                row.horizon,
                row.replicate,
                row.method,
                mu_hat,
                theta_hat,
                sigma_hat
            )),
            RowOutcome::Failed { tag } => out.push_str(&format!(
                "{},{},{},{},{},,,,{}\n",
                row.paths, row.n_steps, row.horizon, row.replicate, row.method, tag
            )),
        }
    }
    for s in &result.summaries {
        match s.mean {
            Some([mu, theta, sigma]) => out.push_str(&format!(
                ",,,mean,{},{},{},{},aggregate\n",
                s.method, mu, theta, sigma
            )),
            None => out.push_str(&format!(",,,mean,{},,,,aggregate\n", s.method)),
        }
    }
    Ok(out)
}

/// Writes the CSV table atomically.
pub fn write_table(result: &GridResult, path: &Path) -> Result<()> {
    let text = table_to_csv_string(result)?;
    atomic_write(path, |w| {
        w.write_all(text.as_bytes())?;
        Ok(())
    })
}

/// Parses a table written by `write_table`. The CSV does not carry the truth
/// parameters, so they are passed in ([mu, theta, sigma]) to recompute the
/// mean-absolute-error part of the summaries.
pub fn read_table<R: BufRead>(reader: R, truth: [f64; 3]) -> Result<GridResult> {
    let mut rows = Vec::new();
    let mut methods: Vec<Method> = Vec::new();
    let mut lines = reader.lines().enumerate();
    match lines.next() {
        Some((_, Ok(first))) if first == TABLE_HEADER => {}
        Some((_, Ok(other))) => {
            return Err(Error::Parse {
                line: 1,
                reason: format!("unexpected header `{other}`"),
            })
        }
        Some((_, Err(e))) => return Err(Error::IoStream(e)),
        None => {
            return Err(Error::Parse {
                line: 1,
                reason: "empty file".into(),
            })
        }
    }
    for (i, line) in lines {
        let line_no = i + 1;
        let line = line.map_err(Error::IoStream)?;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 9 {
            return Err(Error::Parse {
                line: line_no,
                reason: format!("expected 9 fields, got {}", fields.len()),
            });
        }
        let parse_f64 = |what: &str, v: &str| -> Result<f64> {
            v.parse().map_err(|_| Error::Parse {
                line: line_no,
                reason: format!("bad {what} `{v}`"),
            })
        };
        let method = Method::parse(fields[4]).map_err(|_| Error::Parse {
            line: line_no,
            reason: format!("unknown method `{}`", fields[4]),
        })?;
        if fields[3] == "mean" {
            if fields[8] != "aggregate" {
                return Err(Error::Parse {
                    line: line_no,
                    reason: format!("aggregate row with status `{}`", fields[8]),
                });
            }
            if methods.contains(&method) {
                return Err(Error::Parse {
                    line: line_no,
                    reason: format!("duplicate aggregate row for {method}"),
                });
            }
            if !fields[5].is_empty() {
                // Values are recomputed from the data rows; parse to validate.
                parse_f64("mu_hat", fields[5])?;
                parse_f64("theta_hat", fields[6])?;
                parse_f64("sigma_hat", fields[7])?;
            }
            methods.push(method);
            continue;
        }
        let paths: usize = fields[0].parse().map_err(|_| Error::Parse {
            line: line_no,
            reason: format!("bad paths `{}`", fields[0]),
        })?;
        let n_steps: usize = fields[1].parse().map_err(|_| Error::Parse {
            line: line_no,
            reason: format!("bad n_steps `{}`", fields[1]),
        })?;
        let horizon = parse_f64("horizon", fields[2])?;
        let replicate: usize = fields[3].parse().map_err(|_| Error::Parse {
            line: line_no,
            reason: format!("bad replicate `{}`", fields[3]),
        })?;
        let outcome = if fields[8] == "ok" {
            RowOutcome::Ok {
                mu_hat: parse_f64("mu_hat", fields[5])?,
                theta_hat: parse_f64("theta_hat", fields[6])?,
                sigma_hat: parse_f64("sigma_hat", fields[7])?,
            }
        } else {
            if !(fields[5].is_empty() && fields[6].is_empty() && fields[7].is_empty()) {
                return Err(Error::Parse {
                    line: line_no,
                    reason: "failed row carries estimate values".into(),
                });
            }
            RowOutcome::Failed {
                tag: fields[8].to_string(),
            }
        };
        rows.push(GridRow {
            paths,
            n_steps,
            horizon,
            replicate,
            method,
            outcome,
        });
    }
    if rows.is_empty() {
        return Err(Error::EmptyResult {
            what: "grid result",
        });
    }
    let summaries = summarize(&rows, truth, &methods);
    Ok(GridResult { rows, summaries })
}

/// Reads a table back from a file; see `read_table`.
pub fn read_table_file(path: &Path, truth: [f64; 3]) -> Result<GridResult> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_table(std::io::BufReader::new(file), truth)
}
