//! Sparse data containers, LibSVM ingestion and synthetic instance generation.
//!
//! A [`SparseMatrix`] stores the same entries twice, row-major and
//! column-major, because coordinate methods walk columns while gradient
//! passes walk rows.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use log::warn;
use rand_distr::StandardNormal;

use crate::error::{invalid, Error, Result};
use crate::sampling::Rng;

/// Borrowed view of one row or column.
#[derive(Debug, Clone, Copy)]
pub struct SparseVector<'a> {
    pub indices: &'a [usize],
    pub values: &'a [f64],
}

impl<'a> SparseVector<'a> {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + 'a {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }

    pub fn dot(&self, dense: &[f64]) -> f64 {
        self.iter().map(|(k, v)| v * dense[k]).sum()
    }

    pub fn squared_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    /// Value at `index`, zero when not stored.
    pub fn get(&self, index: usize) -> f64 {
        match self.indices.binary_search(&index) {
            Ok(pos) => self.values[pos],
            Err(_) => 0.0,
        }
    }
}

/// Sparse matrix with both CSR and CSC storage of identical entries.
///
/// Column storage order defines the "slot" numbering used throughout the
/// crate: slot `s` in `col_ptr[j]..col_ptr[j+1]` is entry `(col_idx[s], j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    row_val: Vec<f64>,
    col_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    col_val: Vec<f64>,
}

impl SparseMatrix {
    /// Builds from per-row `(column, value)` lists. Entries are sorted,
    /// explicit zeros dropped, duplicates rejected.
    pub fn from_rows(ncols: usize, rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        let nrows = rows.len();
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut row_idx = Vec::new();
        let mut row_val = Vec::new();
        row_ptr.push(0);
        for (i, mut row) in rows.into_iter().enumerate() {
            row.sort_by_key(|&(j, _)| j);
            for w in row.windows(2) {
                if w[0].0 == w[1].0 {
                    return Err(Error::MalformedData(format!(
                        "duplicate entry ({i}, {})",
                        w[0].0
                    )));
                }
            }
            for (j, v) in row {
                if j >= ncols {
                    return Err(Error::MalformedData(format!(
                        "column {j} out of range for {ncols} columns"
                    )));
                }
                if !v.is_finite() {
                    return Err(Error::MalformedData(format!(
                        "non-finite value at ({i}, {j})"
                    )));
                }
                if v != 0.0 {
                    row_idx.push(j);
                    row_val.push(v);
                }
            }
            row_ptr.push(row_idx.len());
        }
        Ok(Self::from_csr_parts(nrows, ncols, row_ptr, row_idx, row_val))
    }

    /// Dense row-major input; zeros are not stored.
    pub fn from_dense(rows: &[Vec<f64>]) -> Result<Self> {
        let ncols = rows.first().map_or(0, Vec::len);
        let sparse = rows
            .iter()
            .map(|r| {
                if r.len() != ncols {
                    return Err(Error::DimensionMismatch { expected: ncols, actual: r.len() });
                }
                Ok(r.iter().copied().enumerate().filter(|&(_, v)| v != 0.0).collect())
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_rows(ncols, sparse)
    }

    fn from_csr_parts(
        nrows: usize,
        ncols: usize,
        row_ptr: Vec<usize>,
        row_idx: Vec<usize>,
        row_val: Vec<f64>,
    ) -> Self {
        let nnz = row_idx.len();
        let mut counts = vec![0usize; ncols + 1];
        for &j in &row_idx {
            counts[j + 1] += 1;
        }
        for j in 0..ncols {
            counts[j + 1] += counts[j];
        }
        let col_ptr = counts.clone();
        let mut next = counts;
        let mut col_idx = vec![0usize; nnz];
        let mut col_val = vec![0.0; nnz];
        // rows visited in ascending order keep each column sorted
        for i in 0..nrows {
            for k in row_ptr[i]..row_ptr[i + 1] {
                let j = row_idx[k];
                let dst = next[j];
                col_idx[dst] = i;
                col_val[dst] = row_val[k];
                next[j] += 1;
            }
        }
        Self { nrows, ncols, row_ptr, row_idx, row_val, col_ptr, col_idx, col_val }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.row_idx.len()
    }

    pub fn row(&self, i: usize) -> SparseVector<'_> {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        SparseVector { indices: &self.row_idx[r.clone()], values: &self.row_val[r] }
    }

    pub fn col(&self, j: usize) -> SparseVector<'_> {
        let r = self.col_slots(j);
        SparseVector { indices: &self.col_idx[r.clone()], values: &self.col_val[r] }
    }

    /// Slot range of column `j` in column-major storage.
    pub fn col_slots(&self, j: usize) -> std::ops::Range<usize> {
        self.col_ptr[j]..self.col_ptr[j + 1]
    }

    /// Row index stored at column-major slot `s`.
    pub fn slot_row(&self, s: usize) -> usize {
        self.col_idx[s]
    }

    pub fn slot_value(&self, s: usize) -> f64 {
        self.col_val[s]
    }

    /// Column-major slot of entry `(i, j)`, if stored.
    pub fn find_slot(&self, i: usize, j: usize) -> Option<usize> {
        let r = self.col_slots(j);
        self.col_idx[r.clone()].binary_search(&i).ok().map(|k| r.start + k)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).get(j)
    }

    /// Transpose built from the column view; used to check that both views agree.
    pub fn transpose(&self) -> SparseMatrix {
        let rows = (0..self.ncols).map(|j| self.col(j).iter().collect()).collect();
        SparseMatrix::from_rows(self.nrows, rows).expect("transpose of a valid matrix is valid")
    }

    /// `A x` for dense `x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.nrows).map(|i| self.row(i).dot(x)).collect()
    }

    /// `Aᵀ y` for dense `y`.
    pub fn mul_transpose_vec(&self, y: &[f64]) -> Vec<f64> {
        (0..self.ncols).map(|j| self.col(j).dot(y)).collect()
    }
}

/// Old-to-new column index map produced by pruning empty columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnRemap {
    /// `new_index[old]` is `None` for dropped columns.
    pub new_index: Vec<Option<usize>>,
    /// `old_index[new]`.
    pub old_index: Vec<usize>,
}

impl ColumnRemap {
    pub fn identity(d: usize) -> Self {
        Self { new_index: (0..d).map(Some).collect(), old_index: (0..d).collect() }
    }

    pub fn dropped(&self) -> usize {
        self.new_index.len() - self.old_index.len()
    }
}

/// Examples `a_i` (rows) with labels `b_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseDataset {
    matrix: SparseMatrix,
    labels: Vec<f64>,
}

impl SparseDataset {
    pub fn new(matrix: SparseMatrix, labels: Vec<f64>) -> Result<Self> {
        if labels.len() != matrix.nrows() {
            return Err(Error::DimensionMismatch { expected: matrix.nrows(), actual: labels.len() });
        }
        if let Some(i) = labels.iter().position(|b| !b.is_finite()) {
            return Err(Error::MalformedData(format!("non-finite label for example {i}")));
        }
        Ok(Self { matrix, labels })
    }

    pub fn from_dense(rows: &[Vec<f64>], labels: Vec<f64>) -> Result<Self> {
        Self::new(SparseMatrix::from_dense(rows)?, labels)
    }

    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn d(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn row(&self, i: usize) -> SparseVector<'_> {
        self.matrix.row(i)
    }

    pub fn col(&self, j: usize) -> SparseVector<'_> {
        self.matrix.col(j)
    }

    /// Mean number of stored entries per example.
    pub fn mean_row_support(&self) -> f64 {
        if self.n() == 0 {
            0.0
        } else {
            self.matrix.nnz() as f64 / self.n() as f64
        }
    }

    pub fn empty_columns(&self) -> Vec<usize> {
        (0..self.d()).filter(|&j| self.col(j).is_empty()).collect()
    }

    /// Drops columns with no stored entry and renumbers the rest.
    pub fn prune_empty_columns(self) -> (Self, ColumnRemap) {
        let empty = self.empty_columns();
        if empty.is_empty() {
            let d = self.d();
            return (self, ColumnRemap::identity(d));
        }
        warn!("pruning {} empty column(s) out of {}", empty.len(), self.d());
        let mut new_index = vec![None; self.d()];
        let mut old_index = Vec::with_capacity(self.d() - empty.len());
        for j in 0..self.d() {
            if !self.col(j).is_empty() {
                new_index[j] = Some(old_index.len());
                old_index.push(j);
            }
        }
        let rows = (0..self.n())
            .map(|i| {
                self.row(i)
                    .iter()
                    .map(|(j, v)| (new_index[j].expect("stored entry in non-empty column"), v))
                    .collect()
            })
            .collect();
        let matrix = SparseMatrix::from_rows(old_index.len(), rows).expect("remapped rows are valid");
        (Self { matrix, labels: self.labels }, ColumnRemap { new_index, old_index })
    }
}

/// Reads LibSVM text: `label idx:val idx:val ...` with 1-based indices.
///
/// Blank lines and `#` comments are skipped. The feature count is the
/// largest index seen unless `min_features` is larger.
pub fn read_libsvm<R: BufRead>(reader: R, min_features: usize) -> Result<SparseDataset> {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut d = min_features;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        let content = line.split('#').next().unwrap_or("");
        let mut tokens = content.split_whitespace();
        let Some(label_tok) = tokens.next() else { continue };
        let parse_err = |message: String| Error::Parse { line: lineno, message };
        let label: f64 = label_tok
            .parse()
            .map_err(|_| parse_err(format!("invalid label '{label_tok}'")))?;
        if !label.is_finite() {
            return Err(parse_err(format!("non-finite label '{label_tok}'")));
        }
        let mut row = Vec::new();
        let mut last = 0usize;
        for tok in tokens {
            let (idx, val) = tok
                .split_once(':')
                .ok_or_else(|| parse_err(format!("expected index:value, got '{tok}'")))?;
            let idx: usize =
                idx.parse().map_err(|_| parse_err(format!("invalid index '{idx}'")))?;
            if idx == 0 {
                return Err(parse_err("indices are 1-based; found 0".into()));
            }
            if idx <= last {
                return Err(parse_err(format!("index {idx} not strictly increasing")));
            }
            last = idx;
            let val: f64 = val.parse().map_err(|_| parse_err(format!("invalid value '{val}'")))?;
            if !val.is_finite() {
                return Err(parse_err(format!("non-finite value '{val}'")));
            }
            d = d.max(idx);
            row.push((idx - 1, val));
        }
        rows.push(row);
        labels.push(label);
    }
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    SparseDataset::new(SparseMatrix::from_rows(d, rows)?, labels)
}

/// Writes LibSVM text with round-trip float formatting.
pub fn write_libsvm<W: Write>(dataset: &SparseDataset, mut out: W) -> Result<()> {
    let mut line = String::new();
    for i in 0..dataset.n() {
        line.clear();
        write!(line, "{:?}", dataset.labels()[i]).unwrap();
        for (j, v) in dataset.row(i).iter() {
            write!(line, " {}:{:?}", j + 1, v).unwrap();
        }
        line.push('\n');
        out.write_all(line.as_bytes())?;
    }
    Ok(())
}

/// How labels are drawn for generated instances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelModel {
    /// `b = <a, w> + noise`.
    Regression,
    /// `b = sign(<a, w> + noise)`, zero mapped to `+1`.
    Classification,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GeneratorParams {
    pub n: usize,
    pub d: usize,
    pub density: f64,
    pub scale: f64,
    pub labels: LabelModel,
    pub noise: f64,
    pub seed: u64,
}

impl GeneratorParams {
    pub fn new(n: usize, d: usize, density: f64, scale: f64, labels: LabelModel, seed: u64) -> Self {
        Self { n, d, density, scale, labels, noise: 0.1, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.d == 0 {
            return Err(invalid("generator needs n >= 1 and d >= 1"));
        }
        if !(self.density > 0.0 && self.density <= 1.0) {
            return Err(invalid(format!("density {} outside (0, 1]", self.density)));
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(invalid(format!("scale {} must be positive", self.scale)));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(invalid(format!("noise {} must be nonnegative", self.noise)));
        }
        Ok(())
    }
}

/// Generates a random sparse instance, then prunes empty columns.
///
/// Each entry is present independently with probability `density`, with
/// value `scale * N(0, 1)`.
pub fn generate(params: &GeneratorParams) -> Result<(SparseDataset, ColumnRemap)> {
    params.validate()?;
    let mut rng = Rng::from_seed(params.seed);
    let truth: Vec<f64> = (0..params.d).map(|_| rng.sample(StandardNormal)).collect();
    let mut rows = Vec::with_capacity(params.n);
    let mut labels = Vec::with_capacity(params.n);
    for _ in 0..params.n {
        let mut row = Vec::new();
        for j in 0..params.d {
            if rng.next_f64() < params.density {
                let v: f64 = rng.sample(StandardNormal);
                row.push((j, params.scale * v));
            }
        }
        let score: f64 = row.iter().map(|&(j, v)| v * truth[j]).sum();
        let noise: f64 = params.noise * rng.sample::<f64, _>(StandardNormal);
        labels.push(match params.labels {
            LabelModel::Regression => score + noise,
            LabelModel::Classification => {
                if score + noise >= 0.0 {
                    1.0
                } else {
                    -1.0
                }
            }
        });
        rows.push(row);
    }
    let dataset = SparseDataset::new(SparseMatrix::from_rows(params.d, rows)?, labels)?;
    Ok(dataset.prune_empty_columns())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn small() -> SparseMatrix {
        SparseMatrix::from_dense(&[
            vec![1.0, 0.0, 2.0],
            vec![0.0, 0.0, 3.0],
            vec![4.0, 5.0, 0.0],
        ])
        .unwrap()
    }

    #[test]
    fn both_views_agree() {
        let a = small();
        assert_eq!(a.nnz(), 5);
        assert_eq!(a.col(2).indices, &[0, 1]);
        assert_eq!(a.col(2).values, &[2.0, 3.0]);
        assert_eq!(a.transpose().transpose(), a);
        assert_eq!(a.get(2, 1), 5.0);
        assert_eq!(a.find_slot(1, 2), Some(a.col_slots(2).start + 1));
        assert_eq!(a.find_slot(1, 0), None);
    }

    #[test]
    fn explicit_zeros_dropped_and_duplicates_rejected() {
        let a = SparseMatrix::from_rows(3, vec![vec![(2, 1.0), (0, 0.0)]]).unwrap();
        assert_eq!(a.nnz(), 1);
        assert!(SparseMatrix::from_rows(3, vec![vec![(1, 1.0), (1, 2.0)]]).is_err());
        assert!(SparseMatrix::from_rows(2, vec![vec![(2, 1.0)]]).is_err());
    }

    #[test]
    fn pruning_remaps_columns() {
        let ds = SparseDataset::from_dense(
            &[vec![1.0, 0.0, 2.0, 0.0], vec![0.0, 0.0, 3.0, 0.0]],
            vec![1.0, -1.0],
        )
        .unwrap();
        let (pruned, remap) = ds.prune_empty_columns();
        assert_eq!(pruned.d(), 2);
        assert_eq!(remap.old_index, vec![0, 2]);
        assert_eq!(remap.new_index, vec![Some(0), None, Some(1), None]);
        assert_eq!(remap.dropped(), 2);
        assert_eq!(pruned.row(1).indices, &[1]);
        assert!(pruned.empty_columns().is_empty());
    }

    #[test]
    fn libsvm_parses_whitespace_and_comments() {
        let text = "1 1:0.5   3:2\n\n-1\t2:1e-1 # comment\n";
        let ds = read_libsvm(text.as_bytes(), 0).unwrap();
        assert_eq!(ds.n(), 2);
        assert_eq!(ds.d(), 3);
        assert_eq!(ds.labels(), &[1.0, -1.0]);
        assert_eq!(ds.row(0).indices, &[0, 2]);
        assert_eq!(ds.row(1).values, &[0.1]);
    }

    #[test]
    fn libsvm_errors_carry_line_numbers() {
        for (text, line) in [
            ("1 1:1\n1 0:2\n", 2),
            ("1 2:1 1:1\n", 1),
            ("x 1:1\n", 1),
            ("1 1:1\n1 1:1\n1 3-4\n", 3),
            ("1 1:abc\n", 1),
        ] {
            match read_libsvm(text.as_bytes(), 0) {
                Err(Error::Parse { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
                other => panic!("expected parse error for {text:?}, got {other:?}"),
            }
        }
        assert!(matches!(read_libsvm("".as_bytes(), 0), Err(Error::EmptyDataset)));
    }

    #[test]
    fn generator_is_seeded() {
        let p = GeneratorParams::new(30, 8, 0.3, 1.0, LabelModel::Classification, 9);
        let (a, _) = generate(&p).unwrap();
        let (b, _) = generate(&p).unwrap();
        assert_eq!(a, b);
        assert!(a.labels().iter().all(|&b| b == 1.0 || b == -1.0));
        assert!(a.empty_columns().is_empty());
        let mut bad = p.clone();
        bad.density = 0.0;
        assert!(generate(&bad).is_err());
    }

    proptest! {
        #[test]
        fn libsvm_round_trip(
            rows in prop::collection::vec(
                prop::collection::btree_map(0usize..12, -1e3f64..1e3, 0..6), 1..10),
            labels_seed in any::<u64>(),
        ) {
            let rows: Vec<Vec<(usize, f64)>> = rows.into_iter().map(|r| r.into_iter().collect()).collect();
            let labels: Vec<f64> = (0..rows.len()).map(|i| ((labels_seed >> (i % 64)) & 1) as f64 * 2.0 - 1.0).collect();
            let ds = SparseDataset::new(SparseMatrix::from_rows(12, rows).unwrap(), labels).unwrap();
            let mut buf = Vec::new();
            write_libsvm(&ds, &mut buf).unwrap();
            let back = read_libsvm(buf.as_slice(), 12).unwrap();
            prop_assert_eq!(back, ds);
        }

        #[test]
        fn transpose_round_trip(
            rows in prop::collection::vec(
                prop::collection::btree_map(0usize..9, -5.0f64..5.0, 0..9), 0..12),
        ) {
            let rows: Vec<Vec<(usize, f64)>> = rows.into_iter().map(|r| r.into_iter().collect()).collect();
            let a = SparseMatrix::from_rows(9, rows).unwrap();
            let t = a.transpose();
            for i in 0..a.nrows() {
                for j in 0..a.ncols() {
                    prop_assert_eq!(a.get(i, j), t.get(j, i));
                }
                prop_assert!(a.row(i).indices.windows(2).all(|w| w[0] < w[1]));
            }
            for j in 0..a.ncols() {
                prop_assert!(a.col(j).indices.windows(2).all(|w| w[0] < w[1]));
                prop_assert!(a.col(j).values.iter().all(|&v| v != 0.0));
            }
        }
    }
}
