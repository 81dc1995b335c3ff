//! Exact-discretization OU path sampling and the PathSet CSV interchange format.
//!
//! Each path p draws its noise from an independent, seeded ChaCha8 stream
//! (stream id = path index), so a PathSet is bitwise reproducible no matter
//! how paths are partitioned across threads.

use std::io::{BufRead, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::process::{OuParams, TimeGrid};
use crate::util::atomic_write;

/// Cap on values per PathSet (paths x grid points), about 1 GiB of f64.
pub const ELEMENT_BUDGET: u64 = 1 << 27;

/// A batch of trajectories sharing one time grid. Storage is path-major:
/// row p holds path p at all n_steps + 1 grid points.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSet {
    grid: TimeGrid,
    n_paths: usize,
    values: Vec<f64>,
    seed: Option<u64>,
}

impl PathSet {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    /// Seed the set was simulated with; None for sets parsed from CSV.
    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// Path p as a slice over all grid points.
    pub fn path(&self, p: usize) -> &[f64] {
        let w = self.grid.n_points();
        &self.values[p * w..(p + 1) * w]
    }

    pub fn value(&self, p: usize, i: usize) -> f64 {
        self.values[p * self.grid.n_points() + i]
    }

    /// Writes the CSV form: header `t,path_0,...`, one row per grid point,
    /// every float at full round-trip precision.
    pub fn to_csv(&self, w: &mut dyn Write) -> Result<()> {
        write!(w, "t")?;
        for p in 0..self.n_paths {
            write!(w, ",path_{p}")?;
        }
        writeln!(w)?;
        for i in 0..self.grid.n_points() {
            write!(w, "{}", self.grid.time(i))?;
            for p in 0..self.n_paths {
                write!(w, ",{}", self.value(p, i))?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.to_csv(&mut buf).expect("writing to Vec cannot fail");
        String::from_utf8(buf).expect("CSV output is ASCII")
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        atomic_write(path, |w| self.to_csv(w))
    }

    /// Parses the CSV form back into a PathSet. The time column must be an
    /// arithmetic progression from 0; dt is inferred from the first step.
    pub fn from_csv(r: &mut dyn BufRead) -> Result<Self> {
        let mut lines = r.lines().enumerate();
        let (_, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            reason: "empty input".into(),
        })?;
        let header = header?;
        let cols: Vec<&str> = header.trim_end().split(',').collect();
        if cols.first() != Some(&"t") || cols.len() < 2 {
            return Err(Error::Parse {
                line: 1,
                reason: "expected header `t,path_0,...` with at least one path column".into(),
            });
        }
        let n_paths = cols.len() - 1;

        let mut times = Vec::new();
        let mut by_point: Vec<f64> = Vec::new();
        for (idx, line) in lines {
            let line = line?;
            let lineno = idx + 1;
            let row = line.trim_end();
            if row.is_empty() {
                continue;
            }
            let fields: Vec<&str> = row.split(',').collect();
            if fields.len() != n_paths + 1 {
                return Err(Error::Parse {
                    line: lineno,
                    reason: format!("expected {} fields, found {}", n_paths + 1, fields.len()),
                });
            }
            for (j, field) in fields.iter().enumerate() {
                let v: f64 = field.parse().map_err(|_| Error::Parse {
                    line: lineno,
                    reason: format!("`{field}` is not a number"),
                })?;
                if !v.is_finite() {
                    return Err(Error::Parse {
                        line: lineno,
                        reason: format!("`{field}` is not finite"),
                    });
                }
                if j == 0 {
                    times.push(v);
                } else {
                    by_point.push(v);
                }
            }
        }
        let n_points = times.len();
        if n_points < 2 {
            return Err(Error::Parse {
                line: n_points + 1,
                reason: "need at least two grid points".into(),
            });
        }
        if times[0] != 0.0 {
            return Err(Error::Parse {
                line: 2,
                reason: format!("time column must start at 0, found {}", times[0]),
            });
        }
        let dt = times[1];
        let grid = TimeGrid::new(n_points - 1, dt).map_err(|e| Error::Parse {
            line: 3,
            reason: format!("bad time step: {e}"),
        })?;
        for (i, &t) in times.iter().enumerate() {
            let expect = grid.time(i);
            let scale = expect.abs().max(1.0);
            if (t - expect).abs() > 1e-9 * scale {
                return Err(Error::Parse {
                    line: i + 2,
                    reason: format!("time {t} deviates from uniform grid value {expect}"),
                });
            }
        }
        // Transpose point-major parse order into path-major storage.
        let mut values = vec![0.0; n_paths * n_points];
        for i in 0..n_points {
            for p in 0..n_paths {
                values[p * n_points + i] = by_point[i * n_paths + p];
            }
        }
        Ok(PathSet {
            grid,
            n_paths,
            values,
            seed: None,
        })
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(&mut std::io::BufReader::new(file))
    }
}

/// Simulates n_paths trajectories with the exact transition
/// X_{n+1} = mu + (X_n - mu) e^{-theta dt} + noise_std eps_n.
pub fn simulate(params: &OuParams, grid: &TimeGrid, n_paths: usize, seed: u64) -> Result<PathSet> {
    simulate_with_budget(params, grid, n_paths, seed, ELEMENT_BUDGET)
}

/// `simulate` with an explicit element budget.
pub fn simulate_with_budget(
    params: &OuParams,
    grid: &TimeGrid,
    n_paths: usize,
    seed: u64,
    budget: u64,
) -> Result<PathSet> {
    if n_paths < 1 {
        return Err(Error::InvalidParam {
            name: "paths",
            reason: "must be >= 1",
            value: n_paths as f64,
        });
    }
    let n_points = grid.n_points();
    let requested = n_paths as u128 * n_points as u128;
    if requested > budget as u128 {
        return Err(Error::CapacityExceeded { requested, budget });
    }

    let coeff = params.step_coefficients(grid.dt());
    let (mu, x0) = (params.mu, params.x0);
    let mut values = vec![0.0; n_paths * n_points];
    values
        .par_chunks_mut(n_points)
        .enumerate()
        .for_each(|(p, row)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(p as u64);
            row[0] = x0;
            for i in 0..grid.n_steps() {
                let eps: f64 = rng.sample(StandardNormal);
                row[i + 1] = mu + (row[i] - mu) * coeff.beta + coeff.noise_std * eps;
            }
        });

    debug_assert!(values.iter().all(|v| v.is_finite()));
    Ok(PathSet {
        grid: *grid,
        n_paths,
        values,
        seed: Some(seed),
    })
}
