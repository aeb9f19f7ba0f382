//! Datasets and the scatter matrix `S = XᵀX` with principal-submatrix
//! log-determinant services.

use nalgebra::DMatrix;

use crate::error::{FmplError, Result};
use crate::linalg;

/// `n x p` table of observations (rows) on variables (columns).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    values: DMatrix<f64>,
    standardized: bool,
    column_means: Option<Vec<f64>>,
    column_sds: Option<Vec<f64>>,
}

impl Dataset {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() < 2 {
            return Err(FmplError::Input(format!("need at least 2 rows, found {}", values.nrows())));
        }
        if values.ncols() < 1 {
            return Err(FmplError::Input("need at least 1 column".into()));
        }
        if let Some(idx) = values.iter().position(|v| !v.is_finite()) {
            let (row, col) = (idx % values.nrows(), idx / values.nrows());
            return Err(FmplError::NonNumeric { row, col, value: values[idx].to_string() });
        }
        Ok(Self { values, standardized: false, column_means: None, column_sds: None })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let p = rows.first().map_or(0, Vec::len);
        for (r, row) in rows.iter().enumerate() {
            if row.len() != p {
                return Err(FmplError::Ragged { row: r, expected: p, found: row.len() });
            }
        }
        Self::new(DMatrix::from_fn(rows.len(), p, |i, j| rows[i][j]))
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn p(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn is_standardized(&self) -> bool {
        self.standardized
    }

    pub fn column_means(&self) -> Option<&[f64]> {
        self.column_means.as_deref()
    }

    pub fn column_sds(&self) -> Option<&[f64]> {
        self.column_sds.as_deref()
    }

    /// Sample mean and standard deviation (divisor `n - 1`) of each column.
    pub fn column_moments(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.n() as f64;
        let mut means = Vec::with_capacity(self.p());
        let mut sds = Vec::with_capacity(self.p());
        for col in self.values.column_iter() {
            let mean = col.iter().sum::<f64>() / n;
            let ss: f64 = col.iter().map(|v| (v - mean) * (v - mean)).sum();
            means.push(mean);
            sds.push((ss / (n - 1.0)).sqrt());
        }
        (means, sds)
    }

    /// Centers each column and scales it to unit sample standard deviation.
    pub fn standardize(&self) -> Result<Dataset> {
        let (means, sds) = self.column_moments();
        for (col, &sd) in sds.iter().enumerate() {
            // relative to the column's magnitude, so rounding noise on a
            // constant column is still caught
            let scale = self.values.column(col).amax().max(f64::MIN_POSITIVE);
            if !(sd > 1e-12 * scale) {
                return Err(FmplError::ConstantColumn { col });
            }
        }
        let mut out = self.scaled_with(&means, &sds)?;
        out.standardized = true;
        Ok(out)
    }

    /// Applies `(x - mean) / sd` column-wise with externally supplied moments,
    /// e.g. a test split scaled by its training split's statistics.
    pub fn scaled_with(&self, means: &[f64], sds: &[f64]) -> Result<Dataset> {
        if means.len() != self.p() || sds.len() != self.p() {
            return Err(FmplError::DimensionMismatch { expected: self.p(), found: means.len() });
        }
        if let Some(col) = sds.iter().position(|&s| !(s > 0.0)) {
            return Err(FmplError::ConstantColumn { col });
        }
        let values = DMatrix::from_fn(self.n(), self.p(), |i, j| (self.values[(i, j)] - means[j]) / sds[j]);
        Ok(Dataset { values, standardized: false, column_means: Some(means.to_vec()), column_sds: Some(sds.to_vec()) })
    }

    /// Rows `range` of the dataset, keeping no scaling metadata.
    pub fn rows(&self, range: std::ops::Range<usize>) -> Result<Dataset> {
        Dataset::new(self.values.rows(range.start, range.len()).into_owned())
    }

    /// Comma-separated text with a `v0,v1,...` header row.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let header: Vec<String> = (0..self.p()).map(|j| format!("v{j}")).collect();
        out.push_str(&header.join(","));
        out.push('\n');
        for i in 0..self.n() {
            let row: Vec<String> = (0..self.p()).map(|j| format!("{}", self.values[(i, j)])).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Parses a comma-separated numeric table. A first row containing any
/// non-numeric cell is taken as a header.
pub fn load_dataset(text: &str, standardize: bool) -> Result<Dataset> {
    let mut reader =
        csv::ReaderBuilder::new().has_headers(false).flexible(true).trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut records = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| FmplError::Input(format!("CSV: {e}")))?;
        records.push(rec);
    }
    let skip = match records.first() {
        Some(first) if first.iter().any(|c| c.parse::<f64>().is_err()) => 1,
        _ => 0,
    };
    let expected = records.get(skip).map_or(0, |r| r.len());
    let mut rows = Vec::with_capacity(records.len().saturating_sub(skip));
    for (r, rec) in records.iter().enumerate().skip(skip) {
        if rec.len() != expected {
            return Err(FmplError::Ragged { row: r, expected, found: rec.len() });
        }
        let mut row = Vec::with_capacity(expected);
        for (c, cell) in rec.iter().enumerate() {
            match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => row.push(v),
                _ => return Err(FmplError::NonNumeric { row: r, col: c, value: cell.to_string() }),
            }
        }
        rows.push(row);
    }
    let data = Dataset::from_rows(&rows)?;
    if standardize {
        data.standardize()
    } else {
        Ok(data)
    }
}

/// Unscaled cross-product matrix `S = XᵀX`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatterMatrix {
    s: Vec<f64>,
    p: usize,
    n: usize,
}

impl ScatterMatrix {
    pub fn from_dataset(data: &Dataset) -> Self {
        let x = data.values();
        let (n, p) = (x.nrows(), x.ncols());
        let mut s = vec![0.0; p * p];
        for i in 0..p {
            let ci = x.column(i);
            for j in i..p {
                let cj = x.column(j);
                let v: f64 = ci.iter().zip(cj.iter()).map(|(a, b)| a * b).sum();
                s[i * p + j] = v;
                s[j * p + i] = v;
            }
        }
        Self { s, p, n }
    }

    /// Wraps an explicit symmetric matrix as a scatter matrix built from `n`
    /// observations.
    pub fn from_matrix(m: &DMatrix<f64>, n: usize) -> Result<Self> {
        let p = m.nrows();
        if m.ncols() != p {
            return Err(FmplError::DimensionMismatch { expected: p, found: m.ncols() });
        }
        let scale = m.amax().max(f64::MIN_POSITIVE);
        for i in 0..p {
            for j in 0..i {
                if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 * scale {
                    return Err(FmplError::Input(format!("matrix is not symmetric at ({i}, {j})")));
                }
            }
        }
        let s = (0..p * p).map(|k| m[(k / p, k % p)]).collect();
        Ok(Self { s, p, n })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.s[i * self.p + j]
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.p, self.p, &self.s)
    }

    fn check_subset(&self, subset: &[usize]) -> Result<()> {
        for (k, &i) in subset.iter().enumerate() {
            if i >= self.p {
                return Err(FmplError::InvalidParameter(format!("node {i} out of range")));
            }
            if subset[..k].contains(&i) {
                return Err(FmplError::InvalidParameter(format!("node {i} repeated in subset")));
            }
        }
        Ok(())
    }

    /// Dense row-major copy of the principal submatrix in `subset` order.
    pub fn submatrix(&self, subset: &[usize]) -> Vec<f64> {
        let k = subset.len();
        let mut out = Vec::with_capacity(k * k);
        for &a in subset {
            let row = &self.s[a * self.p..(a + 1) * self.p];
            out.extend(subset.iter().map(|&b| row[b]));
        }
        out
    }

    /// `log|S_subset|`; the empty subset gives 0.
    pub fn logdet_submatrix(&self, subset: &[usize]) -> Result<f64> {
        self.check_subset(subset)?;
        linalg::log_det_spd(self.submatrix(subset), subset.len())
            .ok_or_else(|| FmplError::NotPositiveDefinite { subset: sorted(subset) })
    }

    /// `log|S_{mb ∪ {j}}| - log|S_mb|` from a single factorization with `j`
    /// ordered last: the ratio is the squared last pivot.
    pub fn log_det_ratio(&self, j: usize, mb: &[usize]) -> Result<f64> {
        let mut fa = Vec::with_capacity(mb.len() + 1);
        fa.extend_from_slice(mb);
        fa.push(j);
        self.check_subset(&fa)?;
        let k = fa.len();
        let mut a = self.submatrix(&fa);
        if !linalg::cholesky_in_place(&mut a, k) {
            return Err(FmplError::NotPositiveDefinite { subset: sorted(&fa) });
        }
        Ok(2.0 * a[k * k - 1].ln())
    }

    /// Partial variance `S_jj - S_{j,mb} S_mb⁻¹ S_{mb,j}` by an explicit
    /// linear solve.
    pub fn schur_conditional_variance(&self, j: usize, mb: &[usize]) -> Result<f64> {
        if mb.contains(&j) {
            return Err(FmplError::InvalidParameter(format!("node {j} is in its own blanket")));
        }
        self.check_subset(mb)?;
        if j >= self.p {
            return Err(FmplError::InvalidParameter(format!("node {j} out of range")));
        }
        let k = mb.len();
        let sjj = self.get(j, j);
        let v = if k == 0 {
            sjj
        } else {
            let mut l = self.submatrix(mb);
            if !linalg::cholesky_in_place(&mut l, k) {
                return Err(FmplError::NotPositiveDefinite { subset: sorted(mb) });
            }
            let cross: Vec<f64> = mb.iter().map(|&i| self.get(i, j)).collect();
            let mut x = cross.clone();
            linalg::cholesky_solve(&l, k, &mut x);
            sjj - cross.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>()
        };
        if !(v > 0.0) {
            let mut fa = mb.to_vec();
            fa.push(j);
            return Err(FmplError::NotPositiveDefinite { subset: sorted(&fa) });
        }
        Ok(v)
    }
}

fn sorted(s: &[usize]) -> Vec<usize> {
    let mut v = s.to_vec();
    v.sort_unstable();
    v
}
