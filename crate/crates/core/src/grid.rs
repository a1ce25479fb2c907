//! Dense per-cell fields over a [`GridSpec`] and their CSV form.
//!
//! The CSV layout is one line per row (row 0 = north), comma separated, no
//! header. Values are written with Rust's shortest round-trip formatting.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::geo::{intensity_to_class, CellIndex, GridSpec, JmaClass};
use crate::scalar::Scalar;

/// Instrumental intensity per cell, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityGrid<T = f64> {
    spec: GridSpec,
    values: Vec<T>,
}

impl<T: Scalar> IntensityGrid<T> {
    pub fn zeros(spec: GridSpec) -> Self {
        IntensityGrid {
            spec,
            values: vec![T::zero(); spec.n_cells()],
        }
    }

    pub fn from_values(spec: GridSpec, values: Vec<T>) -> Result<Self> {
        if values.len() != spec.n_cells() {
            return Err(Error::dim(spec.n_cells(), values.len()));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("grid value {v}")));
        }
        Ok(IntensityGrid { spec, values })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn get(&self, cell: CellIndex) -> T {
        self.values[self.spec.linear(cell)]
    }

    pub fn set(&mut self, cell: CellIndex, v: T) {
        let idx = self.spec.linear(cell);
        self.values[idx] = v;
    }

    pub fn max_value(&self) -> T {
        self.values.iter().copied().fold(T::neg_infinity(), T::max)
    }

    /// Cell holding the largest value; first in row-major order on ties.
    pub fn argmax(&self) -> CellIndex {
        let mut best = 0;
        for (i, v) in self.values.iter().enumerate() {
            if *v > self.values[best] {
                best = i;
            }
        }
        self.spec.cell_of_linear(best)
    }

    /// Rounds every cell to its JMA class.
    pub fn to_classes(&self) -> Result<ClassGrid> {
        let classes = self
            .values
            .iter()
            .map(|&v| intensity_to_class(v))
            .collect::<Result<Vec<_>>>()?;
        Ok(ClassGrid {
            spec: self.spec,
            classes,
        })
    }

    pub fn cast<U: Scalar>(&self) -> IntensityGrid<U> {
        IntensityGrid {
            spec: self.spec,
            values: self.values.iter().map(|v| U::lit(v.as_f64())).collect(),
        }
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let mut line = String::new();
        for row in self.values.chunks(self.spec.n_cols) {
            line.clear();
            for (j, v) in row.iter().enumerate() {
                if j > 0 {
                    line.push(',');
                }
                write!(line, "{}", v.as_f64()).expect("write to string");
            }
            line.push('\n');
            w.write_all(line.as_bytes())?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    pub fn load_csv(path: impl AsRef<Path>, spec: GridSpec) -> Result<Self> {
        let path = path.as_ref();
        let values = read_numeric_csv(std::fs::File::open(path)?, path, &spec)?;
        Self::from_values(spec, values.into_iter().map(T::lit).collect())
    }
}

/// Reads an `n_rows x n_cols` block of numbers. Blank lines are ignored.
pub(crate) fn read_numeric_csv<R: Read>(r: R, path: &Path, spec: &GridSpec) -> Result<Vec<f64>> {
    let mut values = Vec::with_capacity(spec.n_cells());
    let mut rows = 0;
    for (i, line) in BufReader::new(r).lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        rows += 1;
        if rows > spec.n_rows {
            return Err(Error::dim(
                format!("{} rows", spec.n_rows),
                format!("more than {} rows", spec.n_rows),
            ));
        }
        let before = values.len();
        for field in line.split(',') {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|e| Error::parse(path, i + 1, format!("`{}`: {e}", field.trim())))?;
            values.push(v);
        }
        if values.len() - before != spec.n_cols {
            return Err(Error::dim(
                format!("{} columns", spec.n_cols),
                format!("{} columns on line {}", values.len() - before, i + 1),
            ));
        }
    }
    if rows != spec.n_rows {
        return Err(Error::dim(format!("{} rows", spec.n_rows), format!("{rows} rows")));
    }
    Ok(values)
}

/// One JMA class per cell, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassGrid {
    spec: GridSpec,
    classes: Vec<JmaClass>,
}

impl ClassGrid {
    pub fn filled(spec: GridSpec, class: JmaClass) -> Self {
        ClassGrid {
            spec,
            classes: vec![class; spec.n_cells()],
        }
    }

    pub fn from_classes(spec: GridSpec, classes: Vec<JmaClass>) -> Result<Self> {
        if classes.len() != spec.n_cells() {
            return Err(Error::dim(spec.n_cells(), classes.len()));
        }
        Ok(ClassGrid { spec, classes })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn classes(&self) -> &[JmaClass] {
        &self.classes
    }

    pub fn get(&self, cell: CellIndex) -> JmaClass {
        self.classes[self.spec.linear(cell)]
    }

    pub fn set(&mut self, cell: CellIndex, class: JmaClass) {
        let idx = self.spec.linear(cell);
        self.classes[idx] = class;
    }

    /// Each class replaced by its representative instrumental intensity.
    pub fn to_intensity<T: Scalar>(&self) -> IntensityGrid<T> {
        IntensityGrid {
            spec: self.spec,
            values: self
                .classes
                .iter()
                .map(|c| T::lit(c.representative_intensity()))
                .collect(),
        }
    }
}
