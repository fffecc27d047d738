//! Adapter that treats an external executable as a forward model. For each
//! evaluation the parameter vector is written to a one-line text file, the
//! executable is invoked with the input and output paths as arguments, and
//! the QI is read back from the one-line output file.

use super::ForwardModel;
use crate::error::{Error, Result};
use std::path::PathBuf;
use std::process::Command;

#[derive(Debug, Clone)]
pub struct BlackBoxModel {
    command: PathBuf,
    dim: usize,
    name: String,
}

impl BlackBoxModel {
    pub fn new(command: impl Into<PathBuf>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("black-box model needs dim >= 1".into()));
        }
        let command = command.into();
        let name = format!(
            "blackbox:{}",
            command.file_name().map(|s| s.to_string_lossy()).unwrap_or_default()
        );
        Ok(Self { command, dim, name })
    }
}

impl ForwardModel for BlackBoxModel {
    fn name(&self) -> &str {
        &self.name
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn evaluate(&self, xi: &[f64]) -> Result<f64> {
        if xi.len() != self.dim {
            return Err(Error::InvalidArgument(format!(
                "expected {} parameters, got {}",
                self.dim,
                xi.len()
            )));
        }
        let dir = tempfile::tempdir()?;
        let input = dir.path().join("params.txt");
        let output = dir.path().join("qi.txt");
        let line = xi.iter().map(|v| format!("{v:.17e}")).collect::<Vec<_>>().join(" ");
        std::fs::write(&input, line + "\n")?;

        let status = Command::new(&self.command).arg(&input).arg(&output).status()?;
        if !status.success() {
            return Err(Error::NumericalFailure(format!(
                "{} exited with {status}",
                self.command.display()
            )));
        }
        let text = std::fs::read_to_string(&output)?;
        text.trim().parse::<f64>().map_err(|e| {
            Error::NumericalFailure(format!(
                "{} wrote an unparsable QI ({e}): {text:?}",
                self.command.display()
            ))
        })
    }
}
