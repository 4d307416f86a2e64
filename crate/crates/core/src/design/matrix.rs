use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c64, ensure_finite_matrix, CMatrix};

/// A labelled measurement matrix with its JSON layout:
/// `{m, n, budget, label, entries}` where `entries` is row-major `[re, im]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementMatrix {
    pub label: String,
    pub budget: f64,
    pub entries: CMatrix,
}

#[derive(Serialize, Deserialize)]
struct Layout {
    m: usize,
    n: usize,
    budget: f64,
    label: String,
    entries: Vec<Vec<[f64; 2]>>,
}

impl MeasurementMatrix {
    pub fn new(label: impl Into<String>, budget: f64, entries: CMatrix) -> Result<Self> {
        ensure_finite_matrix(&entries, "measurement matrix")?;
        Ok(MeasurementMatrix {
            label: label.into(),
            budget,
            entries,
        })
    }

    pub fn m(&self) -> usize {
        self.entries.nrows()
    }

    pub fn n(&self) -> usize {
        self.entries.ncols()
    }

    pub fn to_json(&self) -> Result<String> {
        let layout = Layout {
            m: self.m(),
            n: self.n(),
            budget: self.budget,
            label: self.label.clone(),
            entries: (0..self.m())
                .map(|i| (0..self.n()).map(|j| [self.entries[(i, j)].re, self.entries[(i, j)].im]).collect())
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&layout)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let layout: Layout = serde_json::from_str(text)?;
        if layout.entries.len() != layout.m || layout.entries.iter().any(|r| r.len() != layout.n) {
            return Err(Error::Dimension(format!(
                "entries do not form a {}x{} matrix",
                layout.m, layout.n
            )));
        }
        let entries = CMatrix::from_fn(layout.m, layout.n, |i, j| {
            let [re, im] = layout.entries[i][j];
            c64(re, im)
        });
        Self::new(layout.label, layout.budget, entries)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")
            .map_err(|e| Error::io(format!("writing {}", path.display()), e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        Self::from_json(&text)
    }
}
