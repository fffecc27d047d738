//! Plot-ready series extraction from metrics CSV files.

use std::io::Write;
use std::path::Path;

use crate::config::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum XAxis {
    Order,
    NEv,
}

/// Collects `(series, x, eps_l1)` rows from metrics files into one CSV,
/// sorted by series then x. The series name is `<experiment>/<method>`, so
/// sweeps that vary solver or classifier should encode that in the
/// experiment id. Empty input produces a header-only file.
pub fn emit_plot_data<W: Write>(
    inputs: &[impl AsRef<Path>],
    x_axis: XAxis,
    w: &mut W,
) -> Result<(), CliError> {
    let mut rows: Vec<(String, u64, f64)> = Vec::new();
    for path in inputs {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        rows.extend(parse_metrics(&text, x_axis, path)?);
    }
    rows.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)));
    writeln!(w, "series,x,y").map_err(CliError::from)?;
    for (series, x, y) in rows {
        writeln!(w, "{series},{x},{y}").map_err(CliError::from)?;
    }
    Ok(())
}

fn parse_metrics(
    text: &str,
    x_axis: XAxis,
    path: &Path,
) -> Result<Vec<(String, u64, f64)>, CliError> {
    let bad = |line: usize, what: &str| {
        CliError::Runtime(format!("{}:{line}: {what}", path.display()))
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == "experiment,method,order,basis_size,n_ev,eps_l1,eps_mean,eps_std" => {}
        _ => return Err(bad(1, "not a metrics CSV (unexpected header)")),
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 8 {
            return Err(bad(i + 1, "expected 8 columns"));
        }
        let x_col = match x_axis {
            XAxis::Order => cols[2],
            XAxis::NEv => cols[4],
        };
        let x: u64 = x_col.parse().map_err(|_| bad(i + 1, "bad x value"))?;
        let y: f64 = cols[5].parse().map_err(|_| bad(i + 1, "bad eps_l1 value"))?;
        out.push((format!("{}/{}", cols[0], cols[1]), x, y));
    }
    Ok(out)
}
