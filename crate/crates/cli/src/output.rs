//! Bit-stable CSV and JSON writers.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use adaptive_absorption::FockDensityMatrix;
use serde::Serialize;

use crate::CliError;

pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(root)?;
        Ok(Self {
            root: root.to_path_buf(),
        })
    }

    pub fn write(&self, name: &str, contents: &str) -> Result<PathBuf, CliError> {
        let path = self.root.join(name);
        std::fs::write(&path, contents)?;
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.into()))?;
        text.push('\n');
        self.write(name, &text)
    }
}

/// CSV built row by row; floats use the shortest round-trip representation.
pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(header: &[String]) -> Self {
        let mut text = header.join(",");
        text.push('\n');
        Self { text }
    }

    pub fn row<I, S>(&mut self, fields: I)
    where
        I: IntoIterator<Item = S>,
        S: std::fmt::Display,
    {
        let mut first = true;
        for f in fields {
            if !first {
                self.text.push(',');
            }
            first = false;
            write!(self.text, "{f}").expect("writing to a String");
        }
        self.text.push('\n');
    }

    pub fn finish(self) -> String {
        self.text
    }
}

/// `p_0[prob],...,p_N[prob]`
pub fn pmf_header(dim: usize) -> Vec<String> {
    (0..dim).map(|n| format!("p_{n}[prob]")).collect()
}

/// Row-major density matrix as interleaved (re, im) pairs.
#[derive(Debug, Serialize)]
pub struct MatrixDump {
    pub dim: usize,
    pub tail_mass_bound: f64,
    pub data: Vec<f64>,
}

impl MatrixDump {
    pub fn new(rho: &FockDensityMatrix) -> Self {
        let dim = rho.dim();
        let mut data = Vec::with_capacity(2 * dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                let z = rho.get(i, j);
                data.push(z.re);
                data.push(z.im);
            }
        }
        Self {
            dim,
            tail_mass_bound: rho.tail_mass_bound(),
            data,
        }
    }
}
