//! CSV and JSON writers. Floats are written with 17 significant digits so
//! identical inputs give byte-identical files.

use std::fs;
use std::path::Path;

use serde::Serialize;
use suprema::{EmpiricalCdf, GridDistribution};

use crate::CliError;

/// Negative zero is written as zero.
pub fn num(v: f64) -> String {
    let v = v + 0.0;
    format!("{v:.16e}")
}

pub fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

pub fn write_csv<I>(path: &Path, header: &[&str], rows: I) -> Result<(), CliError>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::Numerical(format!("{}: {e}", path.display())))?;
    let io = |e: csv::Error| CliError::Numerical(format!("{}: {e}", path.display()));
    w.write_record(header).map_err(io)?;
    for row in rows {
        w.write_record(&row).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Numerical(e.to_string()))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// `x,F` at each distinct sample value.
pub fn write_ecdf(path: &Path, samples: Vec<f64>) -> Result<(), CliError> {
    let rows = match EmpiricalCdf::new(samples) {
        Ok(e) => e.steps(),
        Err(_) => Vec::new(),
    };
    write_csv(path, &["x", "F"], rows.into_iter().map(|(x, f)| vec![num(x), num(f)]))
}

/// `x,F` at every grid point.
pub fn write_grid(path: &Path, dist: &GridDistribution) -> Result<(), CliError> {
    write_csv(
        path,
        &["x", "F"],
        dist.cdf().iter().enumerate().map(|(k, &f)| vec![num(dist.x(k)), num(f)]),
    )
}

/// Reads an `x,F` step CDF and samples it at the lattice points of `grid`.
pub fn read_ecdf_on_grid(path: &Path, grid: suprema::pk_engine::GridSpec<f64>) -> Result<GridDistribution, CliError> {
    let bad = |e: String| CliError::Config(format!("{}: {e}", path.display()));
    let mut r = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let mut steps: Vec<(f64, f64)> = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let field = |i: usize| -> Result<f64, CliError> {
            rec.get(i)
                .ok_or_else(|| bad(format!("row has {} fields", rec.len())))?
                .trim()
                .parse::<f64>()
                .map_err(|e| bad(e.to_string()))
        };
        steps.push((field(0)?, field(1)?));
    }
    if steps.windows(2).any(|w| !(w[0].0 < w[1].0 && w[0].1 <= w[1].1)) {
        return Err(bad("x must increase and F must not decrease".into()));
    }
    let mut cdf = Vec::with_capacity(grid.n + 1);
    let mut j = 0;
    let mut f = 0.0;
    for k in 0..=grid.n {
        let x = grid.x(k);
        while j < steps.len() && steps[j].0 <= x {
            f = steps[j].1;
            j += 1;
        }
        cdf.push(f);
    }
    GridDistribution::from_cdf(grid.step, cdf).map_err(|e| bad(e.to_string()))
}
