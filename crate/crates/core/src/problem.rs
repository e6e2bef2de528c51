//! Finite-sum objectives over sparse linear models.
//!
//! Every component is `f_i(x) = phi(<a_i, x>; b_i) + R_i(x)` where the
//! regularizers average to `(mu/2)||x||^2`. Two placements are supported:
//!
//! * [`RegMode::SupportDistributed`]: `R_i(x) = (mu/2) sum_{j in supp(a_i)} (n/n_j) x_j^2`,
//!   which keeps `f_i` as sparse as `a_i`.
//! * [`RegMode::Dense`]: `R_i(x) = (mu/2)||x||^2`, so every `f_i` touches every
//!   coordinate.
//!
//! Both give the same `f`. The coordinate constants are
//! `L_ij = gamma a_ij^2 + mu c_j` with `c_j = n/n_j` or `1` respectively.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::data::{SparseDataset, SparseMatrix};
use crate::error::{invalid, Error, Result};
use crate::loss::LossKind;
use crate::sampling::PairSampler;

static NEXT_PROBLEM_ID: AtomicU64 = AtomicU64::new(1);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RegMode {
    #[serde(rename = "support")]
    SupportDistributed,
    #[serde(rename = "dense")]
    Dense,
}

impl std::fmt::Display for RegMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RegMode::SupportDistributed => "support",
            RegMode::Dense => "dense",
        })
    }
}

impl std::str::FromStr for RegMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "support" => Ok(RegMode::SupportDistributed),
            "dense" => Ok(RegMode::Dense),
            other => Err(format!("unknown reg mode '{other}' (expected support or dense)")),
        }
    }
}

/// Whether components are individual examples or the whole average.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    PerExample,
    /// A single component `f_1 = f`.
    Collapsed,
}

/// Coordinate Lipschitz constants `L_ij` and the sampling quantities derived
/// from them.
#[derive(Debug, Clone)]
pub struct LipschitzTable {
    matrix: SparseMatrix,
    omega: Vec<usize>,
    v: Vec<f64>,
    p: Vec<f64>,
    q: Vec<f64>,
    l_hat: f64,
}

impl LipschitzTable {
    /// `matrix` is components x coordinates; only positive entries may be
    /// stored (explicit zeros are dropped by [`SparseMatrix`]).
    pub fn new(matrix: SparseMatrix) -> Result<Self> {
        let n = matrix.nrows();
        let d = matrix.ncols();
        if n == 0 || d == 0 {
            return Err(Error::EmptyDataset);
        }
        let omega: Vec<usize> = (0..n).map(|i| matrix.row(i).len()).collect();
        let mut v = vec![0.0; d];
        let mut q = vec![0.0; matrix.nnz()];
        for (j, vj) in v.iter_mut().enumerate() {
            for s in matrix.col_slots(j) {
                let l = matrix.slot_value(s);
                if !(l > 0.0 && l.is_finite()) {
                    return Err(invalid(format!(
                        "L[{}][{j}] = {l} must be positive and finite",
                        matrix.slot_row(s)
                    )));
                }
                let w = omega[matrix.slot_row(s)] as f64 * l;
                q[s] = w;
                *vj += w;
            }
            if *vj == 0.0 {
                return Err(Error::ZeroWeightColumn(j));
            }
            for s in matrix.col_slots(j) {
                q[s] /= *vj;
            }
        }
        let total: f64 = v.iter().sum();
        let p = v.iter().map(|vj| vj / total).collect();
        Ok(Self { matrix, omega, v, p, q, l_hat: total / n as f64 })
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

    /// Number of coordinates each component depends on.
    pub fn omega(&self) -> &[usize] {
        &self.omega
    }

    /// `v_j = sum_i omega_i L_ij`.
    pub fn v(&self) -> &[f64] {
        &self.v
    }

    /// Coordinate probabilities `p_j = v_j / sum_s v_s`.
    pub fn p(&self) -> &[f64] {
        &self.p
    }

    pub fn max_p(&self) -> f64 {
        self.p.iter().copied().fold(0.0, f64::max)
    }

    /// `q_ij` at column-major slot `s`.
    pub fn q_slot(&self, s: usize) -> f64 {
        self.q[s]
    }

    /// `q_ij`, zero when `L_ij = 0`.
    pub fn q(&self, i: usize, j: usize) -> f64 {
        self.matrix.find_slot(i, j).map_or(0.0, |s| self.q[s])
    }

    pub fn l(&self, i: usize, j: usize) -> f64 {
        self.matrix.get(i, j)
    }

    /// `L_hat = (1/n) sum_j v_j`.
    pub fn l_hat(&self) -> f64 {
        self.l_hat
    }
}

/// Inner products `r_i = <a_i, y>` kept in sync with a point `y`.
///
/// A cache is tied to the problem that created it; handing it to another
/// problem is reported as [`Error::StaleCache`].
#[derive(Debug, Clone)]
pub struct ResidualCache {
    owner: u64,
    point: Vec<f64>,
    residuals: Vec<f64>,
    steps_since_refresh: usize,
    column_touches: u64,
    refreshes: u64,
}

impl ResidualCache {
    pub fn point(&self) -> &[f64] {
        &self.point
    }

    pub fn residuals(&self) -> &[f64] {
        &self.residuals
    }

    pub fn into_point(self) -> Vec<f64> {
        self.point
    }

    /// Entries of `A` visited by coordinate steps so far.
    pub fn column_touches(&self) -> u64 {
        self.column_touches
    }

    /// Number of from-scratch recomputations so far.
    pub fn refreshes(&self) -> u64 {
        self.refreshes
    }
}

/// A finite-sum problem ready for the solvers.
#[derive(Debug)]
pub struct Problem {
    id: u64,
    dataset: Arc<SparseDataset>,
    loss: LossKind,
    mu: f64,
    reg_mode: RegMode,
    layout: Layout,
    reg_scale: Vec<f64>,
    lip: LipschitzTable,
    slot_data: Vec<f64>,
    component_smoothness: Vec<f64>,
    sampler: PairSampler,
}

impl Problem {
    /// Builds the per-example problem and all derived quantities.
    ///
    /// `mu = 0` is accepted (plain empirical risk); condition numbers are then
    /// infinite.
    pub fn new(dataset: SparseDataset, loss: LossKind, mu: f64, reg_mode: RegMode) -> Result<Self> {
        Self::build(Arc::new(dataset), loss, mu, reg_mode, Layout::PerExample)
    }

    fn build(
        dataset: Arc<SparseDataset>,
        loss: LossKind,
        mu: f64,
        reg_mode: RegMode,
        layout: Layout,
    ) -> Result<Self> {
        if !(mu >= 0.0 && mu.is_finite()) {
            return Err(invalid(format!("mu = {mu} must be nonnegative and finite")));
        }
        let n = dataset.n();
        let d = dataset.d();
        if n == 0 || d == 0 {
            return Err(Error::EmptyDataset);
        }
        if let Some(i) = dataset.labels().iter().position(|&b| !loss.valid_label(b)) {
            return Err(invalid(format!(
                "label {} of example {i} is not valid for {loss} loss",
                dataset.labels()[i]
            )));
        }
        if let Some(&j) = dataset.empty_columns().first() {
            return Err(Error::ZeroWeightColumn(j));
        }
        let gamma = loss.curvature_bound();
        let nf = n as f64;
        let reg_scale: Vec<f64> = match (layout, reg_mode) {
            (Layout::PerExample, RegMode::SupportDistributed) => {
                (0..d).map(|j| nf / dataset.col(j).len() as f64).collect()
            }
            _ => vec![1.0; d],
        };

        let (lip_rows, slot_data_rows): (Vec<Vec<(usize, f64)>>, Vec<Vec<f64>>) = match layout {
            Layout::PerExample => (0..n)
                .map(|i| {
                    let row = dataset.row(i);
                    match reg_mode {
                        RegMode::SupportDistributed => row
                            .iter()
                            .map(|(j, a)| ((j, gamma * a * a + mu * reg_scale[j]), a))
                            .unzip(),
                        RegMode::Dense => (0..d)
                            .map(|j| {
                                let a = row.get(j);
                                ((j, gamma * a * a + mu), a)
                            })
                            .filter(|((_, l), _)| *l > 0.0)
                            .unzip(),
                    }
                })
                .unzip(),
            Layout::Collapsed => {
                let row: Vec<(usize, f64)> = (0..d)
                    .map(|j| (j, gamma * dataset.col(j).squared_norm() / nf + mu))
                    .filter(|&(_, l)| l > 0.0)
                    .collect();
                (vec![row], vec![Vec::new()])
            }
        };
        let lip = LipschitzTable::new(SparseMatrix::from_rows(d, lip_rows)?)?;

        // a_ij aligned with the column-major slots of the Lipschitz table
        let mut slot_data = vec![0.0; lip.matrix().nnz()];
        if layout == Layout::PerExample {
            for (i, vals) in slot_data_rows.iter().enumerate() {
                for (&j, &a) in lip.matrix().row(i).indices.iter().zip(vals) {
                    let s = lip.matrix().find_slot(i, j).expect("entry present");
                    slot_data[s] = a;
                }
            }
        }

        let component_smoothness = match layout {
            Layout::PerExample => (0..n)
                .map(|i| {
                    let row = dataset.row(i);
                    let reg = match reg_mode {
                        RegMode::SupportDistributed => {
                            row.indices.iter().map(|&j| reg_scale[j]).fold(0.0, f64::max)
                        }
                        RegMode::Dense => 1.0,
                    };
                    gamma * row.squared_norm() + mu * reg
                })
                .collect(),
            Layout::Collapsed => {
                let frobenius: f64 = (0..n).map(|i| dataset.row(i).squared_norm()).sum();
                vec![gamma * frobenius / nf + mu]
            }
        };

        let sampler = PairSampler::new(&lip)?;
        Ok(Self {
            id: NEXT_PROBLEM_ID.fetch_add(1, Ordering::Relaxed),
            dataset,
            loss,
            mu,
            reg_mode,
            layout,
            reg_scale,
            lip,
            slot_data,
            component_smoothness,
            sampler,
        })
    }

    /// The same objective viewed as a single component `f_1 = f`.
    pub fn collapse(&self) -> Result<Problem> {
        Self::build(self.dataset.clone(), self.loss, self.mu, self.reg_mode, Layout::Collapsed)
    }

    pub fn dataset(&self) -> &SparseDataset {
        &self.dataset
    }

    pub fn loss(&self) -> LossKind {
        self.loss
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn reg_mode(&self) -> RegMode {
        self.reg_mode
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    /// Number of examples (rows of the data).
    pub fn n_rows(&self) -> usize {
        self.dataset.n()
    }

    /// Number of components `f_i` (equals `n_rows` unless collapsed).
    pub fn n_components(&self) -> usize {
        self.lip.n()
    }

    pub fn d(&self) -> usize {
        self.dataset.d()
    }

    pub fn lipschitz(&self) -> &LipschitzTable {
        &self.lip
    }

    pub fn sampler(&self) -> &PairSampler {
        &self.sampler
    }

    pub fn l_hat(&self) -> f64 {
        self.lip.l_hat()
    }

    pub fn kappa_hat(&self) -> f64 {
        self.l_hat() / self.mu
    }

    /// Smoothness bound `L_i` of each component.
    pub fn component_smoothness(&self) -> &[f64] {
        &self.component_smoothness
    }

    pub fn l_avg(&self) -> f64 {
        self.component_smoothness.iter().sum::<f64>() / self.component_smoothness.len() as f64
    }

    pub fn l_max(&self) -> f64 {
        self.component_smoothness.iter().copied().fold(0.0, f64::max)
    }

    pub fn kappa_avg(&self) -> f64 {
        self.l_avg() / self.mu
    }

    pub fn kappa_max(&self) -> f64 {
        self.l_max() / self.mu
    }

    /// Per-example partial derivative evaluations one component partial costs.
    pub fn partial_cost(&self, j: usize) -> u64 {
        match self.layout {
            Layout::PerExample => 1,
            Layout::Collapsed => self.dataset.col(j).len() as u64,
        }
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.d() {
            return Err(Error::DimensionMismatch { expected: self.d(), actual: x.len() });
        }
        Ok(())
    }

    fn check_owner(&self, cache: &ResidualCache) -> Result<()> {
        if cache.owner != self.id {
            return Err(Error::StaleCache);
        }
        Ok(())
    }

    /// `f(x) = (1/n) sum_i phi(<a_i, x>; b_i) + (mu/2)||x||^2`.
    pub fn value(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        let r = self.dataset.matrix().mul_vec(x);
        Ok(self.value_from_residuals(&r, x))
    }

    /// `f` evaluated from precomputed `r = A x`.
    pub fn value_from_residuals(&self, r: &[f64], x: &[f64]) -> f64 {
        let labels = self.dataset.labels();
        let data: f64 = r.iter().zip(labels).map(|(&t, &b)| self.loss.value(t, b)).sum();
        data / self.n_rows() as f64 + 0.5 * self.mu * sq_norm(x)
    }

    /// `grad f(x)`.
    pub fn full_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        let r = self.dataset.matrix().mul_vec(x);
        Ok(self.gradient_from_residuals(&r, x))
    }

    pub fn gradient_from_residuals(&self, r: &[f64], x: &[f64]) -> Vec<f64> {
        let nf = self.n_rows() as f64;
        let labels = self.dataset.labels();
        let dphi: Vec<f64> = r.iter().zip(labels).map(|(&t, &b)| self.loss.derivative(t, b) / nf).collect();
        let mut g = self.dataset.matrix().mul_transpose_vec(&dphi);
        for (gj, xj) in g.iter_mut().zip(x) {
            *gj += self.mu * xj;
        }
        g
    }

    /// `f_i(x)` for the component decomposition in use.
    pub fn component_value(&self, i: usize, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        match self.layout {
            Layout::Collapsed => self.value(x),
            Layout::PerExample => {
                let row = self.dataset.row(i);
                let phi = self.loss.value(row.dot(x), self.dataset.labels()[i]);
                let reg = match self.reg_mode {
                    RegMode::SupportDistributed => {
                        row.indices.iter().map(|&j| self.reg_scale[j] * x[j] * x[j]).sum()
                    }
                    RegMode::Dense => sq_norm(x),
                };
                Ok(phi + 0.5 * self.mu * reg)
            }
        }
    }

    /// Dense `grad f_i(x)`.
    pub fn component_gradient(&self, i: usize, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        match self.layout {
            Layout::Collapsed => self.full_gradient(x),
            Layout::PerExample => {
                let row = self.dataset.row(i);
                let dphi = self.loss.derivative(row.dot(x), self.dataset.labels()[i]);
                let mut g = vec![0.0; self.d()];
                match self.reg_mode {
                    RegMode::SupportDistributed => {
                        for j in row.indices.iter().copied() {
                            g[j] = self.mu * self.reg_scale[j] * x[j];
                        }
                    }
                    RegMode::Dense => {
                        for (gj, xj) in g.iter_mut().zip(x) {
                            *gj = self.mu * xj;
                        }
                    }
                }
                for (j, a) in row.iter() {
                    g[j] += dphi * a;
                }
                Ok(g)
            }
        }
    }

    /// `out += scale * grad f_i(x)`, touching only the support of `a_i` in
    /// support-distributed mode.
    pub fn add_component_gradient(&self, i: usize, x: &[f64], scale: f64, out: &mut [f64]) {
        match self.layout {
            Layout::Collapsed => {
                let r = self.dataset.matrix().mul_vec(x);
                for (o, g) in out.iter_mut().zip(self.gradient_from_residuals(&r, x)) {
                    *o += scale * g;
                }
            }
            Layout::PerExample => {
                let row = self.dataset.row(i);
                let dphi = self.loss.derivative(row.dot(x), self.dataset.labels()[i]);
                match self.reg_mode {
                    RegMode::SupportDistributed => {
                        for (j, a) in row.iter() {
                            out[j] += scale * (dphi * a + self.mu * self.reg_scale[j] * x[j]);
                        }
                    }
                    RegMode::Dense => {
                        for (o, xj) in out.iter_mut().zip(x) {
                            *o += scale * self.mu * xj;
                        }
                        for (j, a) in row.iter() {
                            out[j] += scale * dphi * a;
                        }
                    }
                }
            }
        }
    }

    /// `grad_j f_i(x)` computed from scratch (no cache).
    pub fn component_partial(&self, i: usize, j: usize, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        match self.layout {
            Layout::Collapsed => Ok(self.full_gradient(x)?[j]),
            Layout::PerExample => {
                let row = self.dataset.row(i);
                let dphi = self.loss.derivative(row.dot(x), self.dataset.labels()[i]);
                let in_support = row.indices.binary_search(&j).is_ok();
                let reg = match self.reg_mode {
                    RegMode::SupportDistributed if in_support => self.reg_scale[j],
                    RegMode::SupportDistributed => 0.0,
                    RegMode::Dense => 1.0,
                };
                Ok(dphi * row.get(j) + self.mu * reg * x[j])
            }
        }
    }

    /// Creates a residual cache at `x`.
    pub fn new_cache(&self, x: Vec<f64>) -> Result<ResidualCache> {
        self.check_dim(&x)?;
        let residuals = self.dataset.matrix().mul_vec(&x);
        Ok(ResidualCache {
            owner: self.id,
            point: x,
            residuals,
            steps_since_refresh: 0,
            column_touches: 0,
            refreshes: 0,
        })
    }

    /// Recomputes `r = A y` from scratch.
    pub fn refresh(&self, cache: &mut ResidualCache) -> Result<()> {
        self.check_owner(cache)?;
        cache.residuals = self.dataset.matrix().mul_vec(&cache.point);
        cache.steps_since_refresh = 0;
        cache.refreshes += 1;
        Ok(())
    }

    /// `y_j += delta` and `r_i += a_ij delta` over column `j`.
    ///
    /// Residuals are recomputed from scratch every `n` steps to bound drift.
    pub fn apply_coordinate_step(&self, cache: &mut ResidualCache, j: usize, delta: f64) -> Result<()> {
        self.check_owner(cache)?;
        if delta == 0.0 {
            return Ok(());
        }
        cache.point[j] += delta;
        let col = self.dataset.col(j);
        for (i, a) in col.iter() {
            cache.residuals[i] += a * delta;
        }
        cache.column_touches += col.len() as u64;
        cache.steps_since_refresh += 1;
        if cache.steps_since_refresh >= self.n_rows() {
            self.refresh(cache)?;
        }
        Ok(())
    }

    /// `grad_j f_i(y)` for the cached point `y`. Requires `L_ij > 0`.
    pub fn partial(&self, i: usize, j: usize, cache: &ResidualCache) -> Result<f64> {
        self.check_owner(cache)?;
        let slot = self.lip.matrix().find_slot(i, j).ok_or(Error::NotInSupport { i, j })?;
        Ok(self.partial_at_slot(slot, j, cache))
    }

    /// Fast path of [`Problem::partial`] addressed by Lipschitz-table slot.
    /// O(1) per example; O(n_j) when collapsed.
    #[inline]
    pub fn partial_at_slot(&self, slot: usize, j: usize, cache: &ResidualCache) -> f64 {
        debug_assert_eq!(cache.owner, self.id);
        let labels = self.dataset.labels();
        let yj = cache.point[j];
        match self.layout {
            Layout::PerExample => {
                let i = self.lip.matrix().slot_row(slot);
                let a = self.slot_data[slot];
                let dphi = if a == 0.0 { 0.0 } else { self.loss.derivative(cache.residuals[i], labels[i]) };
                dphi * a + self.mu * self.reg_scale[j] * yj
            }
            Layout::Collapsed => {
                let sum: f64 = self
                    .dataset
                    .col(j)
                    .iter()
                    .map(|(i, a)| self.loss.derivative(cache.residuals[i], labels[i]) * a)
                    .sum();
                sum / self.n_rows() as f64 + self.mu * yj
            }
        }
    }
}

/// Alias for [`Problem::new`].
pub fn build_problem(dataset: SparseDataset, loss: LossKind, mu: f64, reg_mode: RegMode) -> Result<Problem> {
    Problem::new(dataset, loss, mu, reg_mode)
}

pub(crate) fn sq_norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate, GeneratorParams, LabelModel};
    use crate::sampling::{Rng, Stream};
    use rand_distr::StandardNormal;

    fn toy(loss: LossKind, mu: f64, mode: RegMode, seed: u64) -> Problem {
        let labels = match loss {
            LossKind::Squared => LabelModel::Regression,
            LossKind::Logistic => LabelModel::Classification,
        };
        let (ds, _) = generate(&GeneratorParams::new(12, 7, 0.4, 1.0, labels, seed)).unwrap();
        Problem::new(ds, loss, mu, mode).unwrap()
    }

    fn random_point(rng: &mut Rng, d: usize) -> Vec<f64> {
        (0..d).map(|_| rng.sample(StandardNormal)).collect()
    }

    /// Dense re-implementation: builds each f_i from the dense data row.
    fn dense_component_value(p: &Problem, i: usize, x: &[f64]) -> f64 {
        let ds = p.dataset();
        let dense_row: Vec<f64> = (0..p.d()).map(|j| ds.matrix().get(i, j)).collect();
        let t: f64 = dense_row.iter().zip(x).map(|(a, b)| a * b).sum();
        let col_counts: Vec<usize> = (0..p.d()).map(|j| ds.col(j).len()).collect();
        let reg: f64 = (0..p.d())
            .map(|j| match p.reg_mode() {
                RegMode::Dense => x[j] * x[j],
                RegMode::SupportDistributed if dense_row[j] != 0.0 => {
                    p.n_rows() as f64 / col_counts[j] as f64 * x[j] * x[j]
                }
                RegMode::SupportDistributed => 0.0,
            })
            .sum();
        p.loss().value(t, ds.labels()[i]) + 0.5 * p.mu() * reg
    }

    #[test]
    fn table_two_by_two() {
        let t = LipschitzTable::new(SparseMatrix::from_dense(&[vec![1.0, 2.0], vec![0.0, 4.0]]).unwrap()).unwrap();
        assert_eq!(t.omega(), &[2, 1]);
        assert_eq!(t.v(), &[2.0, 8.0]);
        assert_eq!(t.p(), &[0.2, 0.8]);
        assert_eq!(t.q(0, 0), 1.0);
        assert_eq!(t.q(1, 0), 0.0);
        assert_eq!(t.q(0, 1), 0.5);
        assert_eq!(t.q(1, 1), 0.5);
        assert_eq!(t.l_hat(), 5.0);
    }

    #[test]
    fn table_single_component() {
        let t = LipschitzTable::new(SparseMatrix::from_dense(&[vec![3.0, 1.0]]).unwrap()).unwrap();
        // omega_1 counts both nonzero coordinates
        assert_eq!(t.omega(), &[2]);
        assert_eq!(t.v(), &[6.0, 2.0]);
        assert_eq!(t.p(), &[0.75, 0.25]);
        assert_eq!(t.q(0, 0), 1.0);
        assert_eq!(t.q(0, 1), 1.0);
    }

    #[test]
    fn table_rejects_bad_input() {
        let neg = SparseMatrix::from_dense(&[vec![1.0, -1.0]]).unwrap();
        assert!(LipschitzTable::new(neg).is_err());
        let empty_col = SparseMatrix::from_dense(&[vec![1.0, 0.0]]).unwrap();
        assert!(matches!(LipschitzTable::new(empty_col), Err(Error::ZeroWeightColumn(1))));
    }

    #[test]
    fn single_nonzero_problem() {
        let ds = SparseDataset::from_dense(&[vec![1.0]], vec![0.0]).unwrap();
        let p = Problem::new(ds, LossKind::Squared, 0.0, RegMode::Dense).unwrap();
        assert_eq!(p.lipschitz().l(0, 0), 1.0);
        assert_eq!(p.l_hat(), 1.0);
        assert_eq!(p.lipschitz().p(), &[1.0]);
    }

    #[test]
    fn build_errors() {
        let ds = SparseDataset::from_dense(&[vec![1.0, 0.0], vec![2.0, 0.0]], vec![1.0, -1.0]).unwrap();
        assert!(matches!(
            Problem::new(ds.clone(), LossKind::Squared, 1.0, RegMode::SupportDistributed),
            Err(Error::ZeroWeightColumn(1))
        ));
        let ok = SparseDataset::from_dense(&[vec![1.0]], vec![2.0]).unwrap();
        assert!(Problem::new(ok.clone(), LossKind::Squared, -1.0, RegMode::Dense).is_err());
        assert!(Problem::new(ok.clone(), LossKind::Squared, f64::NAN, RegMode::Dense).is_err());
        assert!(Problem::new(ok, LossKind::Logistic, 1.0, RegMode::Dense).is_err());
        let empty = SparseDataset::new(SparseMatrix::from_rows(3, vec![]).unwrap(), vec![]).unwrap();
        assert!(matches!(
            Problem::new(empty, LossKind::Squared, 1.0, RegMode::Dense),
            Err(Error::EmptyDataset)
        ));
    }

    #[test]
    fn value_at_zero() {
        let ds = SparseDataset::from_dense(&[vec![1.0, 0.5], vec![0.0, 2.0]], vec![1.0, -1.0]).unwrap();
        for mu in [0.0, 0.3, 7.0] {
            let p = Problem::new(ds.clone(), LossKind::Squared, mu, RegMode::SupportDistributed).unwrap();
            assert_eq!(p.value(&[0.0, 0.0]).unwrap(), 0.5);
        }
        let p = Problem::new(ds, LossKind::Squared, 1.0, RegMode::Dense).unwrap();
        assert!(matches!(p.value(&[0.0]), Err(Error::DimensionMismatch { .. })));
        assert!(p.full_gradient(&[0.0; 3]).is_err());
    }

    #[test]
    fn identity_quadratic_gradient() {
        let ds = SparseDataset::from_dense(&[vec![1.0, 0.0], vec![0.0, 1.0]], vec![0.0, 0.0]).unwrap();
        let p = Problem::new(ds, LossKind::Squared, 0.0, RegMode::Dense).unwrap();
        // f = (1/2n)||x||^2, so n * grad f = x
        let g = p.full_gradient(&[3.0, -2.0]).unwrap();
        assert_eq!(g, vec![1.5, -1.0]);
        // single example: grad f(x) = x exactly
        let ds = SparseDataset::from_dense(&[vec![1.0]], vec![0.0]).unwrap();
        let p = Problem::new(ds, LossKind::Squared, 0.0, RegMode::Dense).unwrap();
        assert_eq!(p.full_gradient(&[4.5]).unwrap(), vec![4.5]);
        assert_eq!(p.value(&[4.5]).unwrap(), p.component_value(0, &[4.5]).unwrap());
    }

    #[test]
    fn value_matches_dense_oracle_and_modes_agree() {
        let mut rng = Rng::with_stream(3, Stream::Probes);
        for loss in [LossKind::Squared, LossKind::Logistic] {
            let support = toy(loss, 0.3, RegMode::SupportDistributed, 5);
            let dense = toy(loss, 0.3, RegMode::Dense, 5);
            for _ in 0..20 {
                let x = random_point(&mut rng, support.d());
                let f = support.value(&x).unwrap();
                for p in [&support, &dense] {
                    let avg: f64 = (0..p.n_rows()).map(|i| p.component_value(i, &x).unwrap()).sum::<f64>()
                        / p.n_rows() as f64;
                    let oracle: f64 = (0..p.n_rows()).map(|i| dense_component_value(p, i, &x)).sum::<f64>()
                        / p.n_rows() as f64;
                    assert!((avg - f).abs() <= 1e-12 * f.abs().max(1.0));
                    assert!((oracle - f).abs() <= 1e-12 * f.abs().max(1.0));
                    for i in 0..p.n_rows() {
                        let a = p.component_value(i, &x).unwrap();
                        assert!((a - dense_component_value(p, i, &x)).abs() <= 1e-12 * a.abs().max(1.0));
                    }
                }
                let gs = support.full_gradient(&x).unwrap();
                let gd = dense.full_gradient(&x).unwrap();
                // average of component gradients equals the full gradient in both modes
                for p in [&support, &dense] {
                    let mut avg = vec![0.0; p.d()];
                    for i in 0..p.n_rows() {
                        for (a, g) in avg.iter_mut().zip(p.component_gradient(i, &x).unwrap()) {
                            *a += g / p.n_rows() as f64;
                        }
                    }
                    for (a, g) in avg.iter().zip(&gs) {
                        assert!((a - g).abs() <= 1e-12 * g.abs().max(1.0));
                    }
                }
                assert_eq!(gs, gd);
            }
        }
    }

    #[test]
    fn full_gradient_matches_finite_differences() {
        let mut rng = Rng::with_stream(8, Stream::Probes);
        for loss in [LossKind::Squared, LossKind::Logistic] {
            let p = toy(loss, 0.1, RegMode::SupportDistributed, 2);
            let x = random_point(&mut rng, p.d());
            let g = p.full_gradient(&x).unwrap();
            let h = 1e-6;
            for j in 0..p.d() {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[j] += h;
                xm[j] -= h;
                let fd = (p.value(&xp).unwrap() - p.value(&xm).unwrap()) / (2.0 * h);
                assert!((fd - g[j]).abs() <= 1e-5 * g[j].abs().max(1.0), "{loss} j={j}: {fd} vs {}", g[j]);
            }
        }
    }

    #[test]
    fn partial_simple_cases() {
        // a_i = e_j, b = 0, mu = 0, y = t e_j
        let ds = SparseDataset::from_dense(&[vec![0.0, 1.0], vec![1.0, 0.0]], vec![0.0, 0.0]).unwrap();
        let p = Problem::new(ds, LossKind::Squared, 0.0, RegMode::SupportDistributed).unwrap();
        let cache = p.new_cache(vec![0.0, 2.5]).unwrap();
        assert_eq!(p.partial(0, 1, &cache).unwrap(), 2.5);
        assert!(matches!(p.partial(0, 0, &cache), Err(Error::NotInSupport { i: 0, j: 0 })));

        let ds = SparseDataset::from_dense(&[vec![0.8, -2.0]], vec![1.0]).unwrap();
        let p = Problem::new(ds, LossKind::Logistic, 0.5, RegMode::SupportDistributed).unwrap();
        let cache = p.new_cache(vec![0.0, 0.0]).unwrap();
        assert_eq!(p.partial(0, 0, &cache).unwrap(), -0.4);
        assert_eq!(p.partial(0, 1, &cache).unwrap(), 1.0);
    }

    #[test]
    fn partial_matches_dense_gradient() {
        let mut rng = Rng::with_stream(4, Stream::Probes);
        for loss in [LossKind::Squared, LossKind::Logistic] {
            for mode in [RegMode::SupportDistributed, RegMode::Dense] {
                let p = toy(loss, 0.2, mode, 9);
                let x = random_point(&mut rng, p.d());
                let cache = p.new_cache(x.clone()).unwrap();
                for i in 0..p.n_components() {
                    let g = p.component_gradient(i, &x).unwrap();
                    for &j in p.lipschitz().matrix().row(i).indices {
                        let fast = p.partial(i, j, &cache).unwrap();
                        assert!((fast - g[j]).abs() <= 1e-12 * g[j].abs().max(1.0));
                        assert!((fast - p.component_partial(i, j, &x).unwrap()).abs() <= 1e-12 * g[j].abs().max(1.0));
                    }
                }
                let collapsed = p.collapse().unwrap();
                let cache = collapsed.new_cache(x.clone()).unwrap();
                let g = p.full_gradient(&x).unwrap();
                for j in 0..p.d() {
                    let fast = collapsed.partial(0, j, &cache).unwrap();
                    assert!((fast - g[j]).abs() <= 1e-12 * g[j].abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn stale_cache_detected() {
        let a = toy(LossKind::Squared, 0.1, RegMode::SupportDistributed, 1);
        let b = toy(LossKind::Squared, 0.1, RegMode::SupportDistributed, 1);
        let mut cache = a.new_cache(vec![0.0; a.d()]).unwrap();
        let i = a.lipschitz().matrix().slot_row(0);
        assert!(matches!(b.partial(i, 0, &cache), Err(Error::StaleCache)));
        assert!(matches!(b.apply_coordinate_step(&mut cache, 0, 1.0), Err(Error::StaleCache)));
    }

    #[test]
    fn coordinate_steps_track_residuals() {
        let p = toy(LossKind::Logistic, 0.1, RegMode::SupportDistributed, 3);
        let mut cache = p.new_cache(vec![0.0; p.d()]).unwrap();
        let before = cache.clone();
        p.apply_coordinate_step(&mut cache, 2, 0.0).unwrap();
        assert_eq!(cache.residuals(), before.residuals());
        assert_eq!(cache.point(), before.point());

        p.apply_coordinate_step(&mut cache, 2, 0.75).unwrap();
        let fresh = p.dataset().matrix().mul_vec(cache.point());
        for (a, b) in cache.residuals().iter().zip(&fresh) {
            assert!((a - b).abs() <= 1e-12);
        }
        assert_eq!(cache.column_touches(), p.dataset().col(2).len() as u64);
    }

    #[test]
    fn disjoint_steps_commute() {
        let ds = SparseDataset::from_dense(&[vec![1.0, 0.0], vec![0.0, 3.0]], vec![1.0, 2.0]).unwrap();
        let p = Problem::new(ds, LossKind::Squared, 0.1, RegMode::SupportDistributed).unwrap();
        let mut a = p.new_cache(vec![0.1, 0.2]).unwrap();
        let mut b = a.clone();
        p.apply_coordinate_step(&mut a, 0, 0.3).unwrap();
        p.apply_coordinate_step(&mut a, 1, -0.7).unwrap();
        p.apply_coordinate_step(&mut b, 1, -0.7).unwrap();
        p.apply_coordinate_step(&mut b, 0, 0.3).unwrap();
        assert_eq!(a.residuals(), b.residuals());
        assert_eq!(a.point(), b.point());
    }

    #[test]
    fn residual_drift_stays_bounded() {
        let p = toy(LossKind::Squared, 0.1, RegMode::SupportDistributed, 6);
        let mut cache = p.new_cache(vec![0.0; p.d()]).unwrap();
        let mut rng = Rng::from_seed(12);
        for step in 0..5000 {
            let j = rng.below(p.d());
            p.apply_coordinate_step(&mut cache, j, rng.sample::<f64, _>(StandardNormal)).unwrap();
            if step % 97 == 0 {
                let fresh = p.dataset().matrix().mul_vec(cache.point());
                for (a, b) in cache.residuals().iter().zip(&fresh) {
                    assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0));
                }
            }
        }
        assert!(cache.refreshes() >= 5000 / p.n_rows() as u64);
    }

    #[test]
    fn derived_quantities_consistent() {
        for mode in [RegMode::SupportDistributed, RegMode::Dense] {
            let p = toy(LossKind::Logistic, 0.05, mode, 8);
            let t = p.lipschitz();
            for i in 0..t.n() {
                let expected = match mode {
                    RegMode::SupportDistributed => p.dataset().row(i).len(),
                    RegMode::Dense => p.d(),
                };
                assert_eq!(t.omega()[i], expected);
            }
            assert!((t.p().iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for j in 0..t.d() {
                let total: f64 = t.matrix().col_slots(j).map(|s| t.q_slot(s)).sum();
                assert!((total - 1.0).abs() < 1e-12);
            }
            let l_hat: f64 = (0..t.n())
                .map(|i| t.omega()[i] as f64 * t.matrix().row(i).values.iter().sum::<f64>())
                .sum::<f64>()
                / t.n() as f64;
            assert!((l_hat - t.l_hat()).abs() <= 1e-12 * l_hat);
            assert!(p.kappa_hat() >= p.kappa_avg());
        }
    }
}
