use ndarray::{Array2, Axis};

use crate::error::{Error, Result};

/// Per-dimension statistics used to normalize a dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// One sporadic sequence: ascending times, an `n x d` value matrix and the
/// matching observation mask. Unobserved cells always hold `0.0`.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeries {
    id: u64,
    times: Vec<f64>,
    values: Array2<f64>,
    mask: Array2<bool>,
    norm: Option<NormStats>,
}

impl TimeSeries {
    /// Validates and zero-fills. Rows must have at least one observed
    /// dimension and times must be strictly ascending.
    pub fn new(id: u64, times: Vec<f64>, mut values: Array2<f64>, mask: Array2<bool>) -> Result<Self> {
        if values.dim() != mask.dim() || values.nrows() != times.len() {
            return Err(Error::contract(format!(
                "series {id}: {} times, values {:?}, mask {:?}",
                times.len(),
                values.dim(),
                mask.dim()
            )));
        }
        for (i, t) in times.iter().enumerate() {
            if !t.is_finite() {
                return Err(Error::Ingestion { row: i, msg: format!("series {id}: non-finite time") });
            }
            if i > 0 && *t <= times[i - 1] {
                return Err(Error::Ingestion {
                    row: i,
                    msg: format!("series {id}: times not strictly ascending ({} then {t})", times[i - 1]),
                });
            }
        }
        for (i, row) in mask.axis_iter(Axis(0)).enumerate() {
            if !row.iter().any(|&m| m) {
                return Err(Error::Ingestion { row: i, msg: format!("series {id}: row with no observed dimension") });
            }
        }
        for ((i, j), v) in values.indexed_iter_mut() {
            if !mask[[i, j]] {
                *v = 0.0;
            } else if !v.is_finite() {
                return Err(Error::Ingestion { row: i, msg: format!("series {id}: non-finite value in dimension {j}") });
            }
        }
        Ok(TimeSeries { id, times, values, mask, norm: None })
    }

    /// A fully observed series.
    pub fn dense(id: u64, times: Vec<f64>, values: Array2<f64>) -> Result<Self> {
        let mask = Array2::from_elem(values.dim(), true);
        Self::new(id, times, values, mask)
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn mask(&self) -> &Array2<bool> {
        &self.mask
    }

    pub fn norm_stats(&self) -> Option<&NormStats> {
        self.norm.as_ref()
    }

    pub(crate) fn set_norm(&mut self, stats: Option<NormStats>) {
        self.norm = stats;
    }

    pub(crate) fn values_mut(&mut self) -> &mut Array2<f64> {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    pub fn last_time(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }

    /// Number of observed cells.
    pub fn observed_cells(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Mask as `0.0 / 1.0`.
    pub fn mask_f64(&self) -> Array2<f64> {
        self.mask.mapv(|m| if m { 1.0 } else { 0.0 })
    }

    /// The rows selected by `keep` (ascending indices).
    pub fn select_rows(&self, keep: &[usize]) -> Result<TimeSeries> {
        let times = keep.iter().map(|&i| self.times[i]).collect();
        let values = self.values.select(Axis(0), keep);
        let mask = self.mask.select(Axis(0), keep);
        let mut out = TimeSeries::new(self.id, times, values, mask)?;
        out.norm = self.norm.clone();
        Ok(out)
    }

    pub fn with_id(mut self, id: u64) -> Self {
        self.id = id;
        self
    }
}

/// Splits `series` into consecutive pieces of at most `len` frames, each
/// shifted to start at time zero. Pieces shorter than two frames are dropped.
pub fn segment_by_length(series: &TimeSeries, len: usize, first_id: u64) -> Result<Vec<TimeSeries>> {
    if len < 2 {
        return Err(Error::config("segment length must be at least 2"));
    }
    let mut out = Vec::new();
    let mut start = 0;
    while start + 2 <= series.len() {
        let end = (start + len).min(series.len());
        let rows: Vec<usize> = (start..end).collect();
        let mut piece = series.select_rows(&rows)?;
        let t0 = piece.times[0];
        for t in &mut piece.times {
            *t -= t0;
        }
        out.push(piece.with_id(first_id + out.len() as u64));
        start = end;
    }
    Ok(out)
}
