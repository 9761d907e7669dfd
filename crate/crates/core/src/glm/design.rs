use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Semantic tag of a design column.
///
/// The tag decides ridge treatment (the global intercept is never penalized)
/// and lets downstream code find coefficients by meaning instead of position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ColumnKind {
    /// Shared covariate, index into the dataset's covariate columns.
    Covariate(usize),
    Intercept,
    /// `I(position > c)` for ordering position of the unit.
    Threshold(usize),
    /// Indicator of one (original) unit.
    UnitDummy(usize),
    /// Indicator of one cluster of a partition.
    ClusterDummy(usize),
}

impl ColumnKind {
    fn is_indicator(self) -> bool {
        matches!(
            self,
            ColumnKind::Threshold(_) | ColumnKind::UnitDummy(_) | ColumnKind::ClusterDummy(_)
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    values: DMatrix<f64>,
    columns: Vec<ColumnKind>,
}

impl DesignMatrix {
    pub fn new(values: DMatrix<f64>, columns: Vec<ColumnKind>) -> Result<Self> {
        if values.ncols() != columns.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} columns but {} column labels",
                values.ncols(),
                columns.len()
            )));
        }
        if columns.iter().filter(|&&k| k == ColumnKind::Intercept).count() > 1 {
            return Err(Error::DimensionMismatch(
                "more than one global-intercept column".into(),
            ));
        }
        for (j, kind) in columns.iter().enumerate() {
            if kind.is_indicator() && values.column(j).iter().any(|&v| v != 0.0 && v != 1.0) {
                return Err(Error::Domain(format!(
                    "indicator column {j} ({kind:?}) has values outside {{0,1}}"
                )));
            }
        }
        Ok(Self { values, columns })
    }

    /// Plain numeric design; every column is treated as a covariate.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(Error::DimensionMismatch("ragged design rows".into()));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        Ok(Self {
            values: DMatrix::from_row_slice(nrows, ncols, &flat),
            columns: (0..ncols).map(ColumnKind::Covariate).collect(),
        })
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn columns(&self) -> &[ColumnKind] {
        &self.columns
    }

    pub fn column_of(&self, kind: ColumnKind) -> Option<usize> {
        self.columns.iter().position(|&k| k == kind)
    }
}
