//! Classical HMFT reference: exact cluster ground state in the zero-magnetization
//! sector with self-consistent boundary fields.
//!
//! The cluster Hamiltonian with frozen mean fields is
//!
//! ```text
//! H = Σ_intra J_b S_i·S_j + Σ_i h_i S^z_i,   h_i = Σ_{b∋i} w_b J_b m_partner
//! ```
//!
//! so every external neighbour contributes one `J m` field term. Energies are
//! reassembled from the eigenvector with the quadratic boundary form; the raw
//! eigenvalue counts the boundary terms twice.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::lattice::ClusterGeometry;
use crate::objective::{ClusterObservables, ModelParams, OrderParameters};
use crate::rng;
use crate::statevector::{SectorBasis, SectorState};
use crate::sweep::{Direction, PointStatus, SweepRecord};

/// Largest cluster the oracle accepts.
pub const MAX_ORACLE_SITES: usize = 16;

/// Sector dimensions up to this size are diagonalized densely.
pub const DENSE_LIMIT: usize = 400;

/// Real symmetric cluster Hamiltonian in CSR form, diagonal kept apart so
/// the fields can be swapped without rebuilding the off-diagonal part.
#[derive(Debug, Clone)]
pub struct SectorHamiltonian {
    geometry: Arc<ClusterGeometry>,
    basis: Arc<SectorBasis>,
    model: ModelParams,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
    intra_diag: Vec<f64>,
    fields: Vec<f64>,
    diag: Vec<f64>,
}

/// Boundary fields `h_i` for mean fields `m`.
pub fn boundary_fields(geometry: &ClusterGeometry, model: &ModelParams, m: &[f64]) -> Vec<f64> {
    let mut h = vec![0.0; geometry.n_sites()];
    for b in geometry.boundary_bonds() {
        let c = b.weight * model.coupling(b.range);
        h[b.i] += c * m[b.j];
        h[b.j] += c * m[b.i];
    }
    h
}

pub fn build_hamiltonian(geometry: Arc<ClusterGeometry>, model: ModelParams, mean_fields: &[f64]) -> Result<SectorHamiltonian> {
    let n = geometry.n_sites();
    if n > MAX_ORACLE_SITES {
        return Err(Error::TooManyQubits { n, max: MAX_ORACLE_SITES });
    }
    let basis = Arc::new(SectorBasis::half_filled(n)?);
    SectorHamiltonian::new(geometry, basis, model, mean_fields)
}

impl SectorHamiltonian {
    pub fn new(geometry: Arc<ClusterGeometry>, basis: Arc<SectorBasis>, model: ModelParams, mean_fields: &[f64]) -> Result<Self> {
        let n = geometry.n_sites();
        if basis.n_qubits() != n {
            return Err(Error::SectorMismatch { n, k: n / 2, got_n: basis.n_qubits(), got_k: basis.weight() });
        }
        let states = basis.states();
        let mut row_ptr = Vec::with_capacity(states.len() + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        let mut intra_diag = vec![0.0; states.len()];
        row_ptr.push(0);
        for (r, &s) in states.iter().enumerate() {
            let mut row: Vec<(u32, f64)> = Vec::new();
            for b in geometry.intra_bonds() {
                let j = model.coupling(b.range);
                let (bi, bj) = ((s >> b.i) & 1, (s >> b.j) & 1);
                if bi == bj {
                    intra_diag[r] += 0.25 * j;
                } else {
                    intra_diag[r] -= 0.25 * j;
                    if j != 0.0 {
                        let t = basis.index_of(s ^ (1 << b.i) ^ (1 << b.j)).expect("exchange stays in sector");
                        row.push((t as u32, 0.5 * j));
                    }
                }
            }
            // distinct bonds flip distinct bit pairs, so targets never repeat
            row.sort_by_key(|e| e.0);
            for (c, v) in row {
                cols.push(c);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        let mut h = Self { geometry, basis, model, row_ptr, cols, vals, intra_diag, fields: Vec::new(), diag: Vec::new() };
        h.set_mean_fields(mean_fields)?;
        Ok(h)
    }

    /// Replaces the boundary fields by those generated from `m`.
    pub fn set_mean_fields(&mut self, m: &[f64]) -> Result<()> {
        let n = self.geometry.n_sites();
        if m.len() != n || m.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config(format!("need {n} finite mean fields, got {} values", m.len())));
        }
        self.fields = boundary_fields(&self.geometry, &self.model, m);
        self.diag = self
            .basis
            .states()
            .iter()
            .zip(&self.intra_diag)
            .map(|(&s, d)| {
                d + self.fields.iter().enumerate().map(|(j, h)| if (s >> j) & 1 == 0 { 0.5 * h } else { -0.5 * h }).sum::<f64>()
            })
            .collect();
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn basis(&self) -> &Arc<SectorBasis> {
        &self.basis
    }

    pub fn geometry(&self) -> &Arc<ClusterGeometry> {
        &self.geometry
    }

    pub fn model(&self) -> &ModelParams {
        &self.model
    }

    /// Current `h_i`.
    pub fn fields(&self) -> &[f64] {
        &self.fields
    }

    pub fn nnz(&self) -> usize {
        self.cols.len() + self.dim()
    }

    /// `y = H x`
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        for r in 0..self.dim() {
            let mut acc = self.diag[r] * x[r];
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * x[self.cols[k] as usize];
            }
            y[r] = acc;
        }
    }

    /// `⟨x|H_intra|x⟩` for a real vector.
    pub fn intra_expectation(&self, x: &[f64]) -> f64 {
        (0..self.dim())
            .map(|r| {
                let off: f64 = (self.row_ptr[r]..self.row_ptr[r + 1]).map(|k| self.vals[k] * x[self.cols[k] as usize]).sum();
                x[r] * (self.intra_diag[r] * x[r] + off)
            })
            .sum()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim(), self.dim());
        for r in 0..self.dim() {
            m[(r, r)] = self.diag[r];
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                m[(r, self.cols[k] as usize)] += self.vals[k];
            }
        }
        m
    }

    /// `max |H_rc − H_cr|` over stored entries.
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for r in 0..self.dim() {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.cols[k] as usize;
                let back =
                    (self.row_ptr[c]..self.row_ptr[c + 1]).find(|&q| self.cols[q] as usize == r).map_or(0.0, |q| self.vals[q]);
                worst = worst.max((self.vals[k] - back).abs());
            }
        }
        worst
    }

    /// `⟨S^z_j⟩` for every site.
    pub fn magnetizations(&self, x: &[f64]) -> Vec<f64> {
        let mut m = vec![0.0; self.geometry.n_sites()];
        for (&s, v) in self.basis.states().iter().zip(x) {
            let p = v * v;
            for (j, mj) in m.iter_mut().enumerate() {
                *mj += if (s >> j) & 1 == 0 { 0.5 * p } else { -0.5 * p };
            }
        }
        m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenConfig {
    /// Target residual `‖Hv − Ev‖`.
    pub tolerance: f64,
    pub krylov_dim: usize,
    pub max_restarts: usize,
    /// Dense diagonalization up to this dimension.
    pub dense_limit: usize,
}

impl Default for EigenConfig {
    fn default() -> Self {
        Self { tolerance: 1e-10, krylov_dim: 60, max_restarts: 200, dense_limit: DENSE_LIMIT }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Eigenpair {
    pub value: f64,
    pub vector: Vec<f64>,
    pub residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn residual(h: &SectorHamiltonian, value: f64, v: &[f64]) -> f64 {
    let mut hv = vec![0.0; v.len()];
    h.apply(v, &mut hv);
    hv.iter().zip(v).map(|(a, b)| (a - value * b).powi(2)).sum::<f64>().sqrt()
}

pub fn lowest_eigenpair_dense(h: &SectorHamiltonian) -> Eigenpair {
    let eig = SymmetricEigen::new(h.to_dense());
    let k = eig.eigenvalues.imin();
    let value = eig.eigenvalues[k];
    let vector: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
    let residual = residual(h, value, &vector);
    Eigenpair { value, vector, residual }
}

fn tridiagonal_lowest(alpha: &[f64], beta: &[f64]) -> (f64, Vec<f64>) {
    let m = alpha.len();
    let t = DMatrix::from_fn(m, m, |r, c| {
        if r == c {
            alpha[r]
        } else if r + 1 == c {
            beta[r]
        } else if c + 1 == r {
            beta[c]
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(t);
    let idx = eig.eigenvalues.imin();
    (eig.eigenvalues[idx], eig.eigenvectors.column(idx).iter().copied().collect())
}

/// Restarted Lanczos with full reorthogonalization.
pub fn lowest_eigenpair_lanczos(h: &SectorHamiltonian, start: Option<&[f64]>, config: &EigenConfig) -> Result<Eigenpair> {
    let dim = h.dim();
    let mut v0: Vec<f64> = match start {
        Some(s) if s.len() == dim && dot(s, s) > 0.0 => s.to_vec(),
        _ => {
            let mut r = rng::stream(0, "lanczos", dim as u64);
            (0..dim).map(|_| r.gen::<f64>() - 0.5).collect()
        }
    };
    let norm = dot(&v0, &v0).sqrt();
    v0.iter_mut().for_each(|x| *x /= norm);
    let kmax = config.krylov_dim.clamp(2, dim.max(2));
    let mut best = Eigenpair { value: f64::INFINITY, vector: v0.clone(), residual: f64::INFINITY };
    let mut w = vec![0.0; dim];
    for _ in 0..=config.max_restarts {
        let mut basis: Vec<Vec<f64>> = vec![v0.clone()];
        let mut alpha = Vec::with_capacity(kmax);
        let mut beta: Vec<f64> = Vec::with_capacity(kmax);
        let mut ritz = None;
        for k in 0..kmax.min(dim) {
            h.apply(&basis[k], &mut w);
            let a = dot(&basis[k], &w);
            alpha.push(a);
            for _ in 0..2 {
                for q in &basis {
                    let c = dot(q, &w);
                    w.iter_mut().zip(q).for_each(|(wi, qi)| *wi -= c * qi);
                }
            }
            let b = dot(&w, &w).sqrt();
            let last = b < 1e-13 || k + 1 == kmax.min(dim);
            if last || k % 4 == 3 {
                let (value, s) = tridiagonal_lowest(&alpha, &beta);
                // residual of the Ritz pair is |b s_k|
                let estimate = b * s[k].abs();
                ritz = Some((value, s));
                if last || estimate <= 0.1 * config.tolerance {
                    break;
                }
            }
            beta.push(b);
            basis.push(w.iter().map(|x| x / b).collect());
        }
        let (_, s) = ritz.expect("at least one Lanczos step");
        let mut x = vec![0.0; dim];
        for (q, c) in basis.iter().zip(s.iter()) {
            x.iter_mut().zip(q).for_each(|(xi, qi)| *xi += c * qi);
        }
        let nx = dot(&x, &x).sqrt();
        x.iter_mut().for_each(|v| *v /= nx);
        h.apply(&x, &mut w);
        let value = dot(&x, &w);
        let res = w.iter().zip(&x).map(|(a, b)| (a - value * b).powi(2)).sum::<f64>().sqrt();
        if res < best.residual {
            best = Eigenpair { value, vector: x.clone(), residual: res };
        }
        if res <= config.tolerance {
            return Ok(best);
        }
        v0 = x;
    }
    Err(Error::EigenNotConverged { residual: best.residual, iterations: config.max_restarts })
}

/// Ground state of `h`, dense for small sectors and Lanczos otherwise.
pub fn lowest_eigenpair(h: &SectorHamiltonian, start: Option<&[f64]>, config: &EigenConfig) -> Result<Eigenpair> {
    if h.dim() <= config.dense_limit {
        Ok(lowest_eigenpair_dense(h))
    } else {
        lowest_eigenpair_lanczos(h, start, config)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldPattern {
    Neel,
    Caf,
    Zero,
    /// Uniform on `[-1/2, 1/2)` with the mean removed.
    Random(u64),
}

impl FieldPattern {
    pub fn fields(&self, geometry: &ClusterGeometry) -> Vec<f64> {
        match *self {
            Self::Neel => geometry.neel_sign().iter().map(|&s| 0.5 * s as f64).collect(),
            Self::Caf => geometry.sites().iter().map(|s| if s.x % 2 == 0 { 0.5 } else { -0.5 }).collect(),
            Self::Zero => vec![0.0; geometry.n_sites()],
            Self::Random(seed) => {
                let mut r = rng::stream(seed, "scf_seed", 0);
                let mut m: Vec<f64> = (0..geometry.n_sites()).map(|_| r.gen::<f64>() - 0.5).collect();
                let mean = m.iter().sum::<f64>() / m.len() as f64;
                m.iter_mut().for_each(|v| *v -= mean);
                m
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            Self::Neel => "neel".into(),
            Self::Caf => "caf".into(),
            Self::Zero => "zero".into(),
            Self::Random(s) => format!("random({s})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScfConfig {
    pub field_tolerance: f64,
    pub max_outer_iterations: usize,
    /// Weight of the new fields in `m ← (1−γ) m + γ m_new`.
    pub damping: f64,
    pub seeds: Vec<FieldPattern>,
    pub eigen: EigenConfig,
}

impl Default for ScfConfig {
    fn default() -> Self {
        Self {
            field_tolerance: 1e-10,
            max_outer_iterations: 500,
            damping: 0.7,
            seeds: vec![FieldPattern::Neel, FieldPattern::Caf, FieldPattern::Zero, FieldPattern::Random(1)],
            eigen: EigenConfig::default(),
        }
    }
}

impl ScfConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.field_tolerance > 0.0) {
            return Err(Error::Config(format!("field_tolerance must be positive, got {}", self.field_tolerance)));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::Config(format!("damping must lie in (0, 1], got {}", self.damping)));
        }
        if self.max_outer_iterations == 0 || self.seeds.is_empty() {
            return Err(Error::Config("need at least one SCF iteration and one seed".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanFieldSet {
    pub m: Vec<f64>,
}

impl MeanFieldSet {
    pub fn total(&self) -> f64 {
        self.m.iter().sum()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScfSolution {
    /// Label of the initial pattern, or `warm` for a chained start.
    pub seed: String,
    pub energy: f64,
    pub e_intra: f64,
    pub e_mf: f64,
    /// Lowest eigenvalue of the last field Hamiltonian.
    pub eigenvalue: f64,
    pub mean_fields: MeanFieldSet,
    pub order: OrderParameters,
    pub de_dj2: f64,
    pub converged: bool,
    pub iterations: usize,
    /// `max |m_out − m_in|` of the final iteration.
    pub field_residual: f64,
    pub eigen_residual: f64,
    pub note: Option<String>,
    #[serde(skip)]
    pub eigenvector: Vec<f64>,
}

/// Energy per spin of a real sector vector with the quadratic boundary form.
pub fn assemble_energy(h: &SectorHamiltonian, x: &[f64]) -> (f64, f64, Vec<f64>) {
    let n = h.geometry.n_sites() as f64;
    let m = h.magnetizations(x);
    let intra = h.intra_expectation(x);
    let mf: f64 = h.geometry.boundary_bonds().iter().map(|b| b.weight * h.model.coupling(b.range) * m[b.i] * m[b.j]).sum();
    (intra / n, mf / n, m)
}

fn observables_for(h: &SectorHamiltonian) -> Result<ClusterObservables> {
    ClusterObservables::new(h.geometry.clone(), h.basis.clone())
}

/// Runs the damped fixed-point iteration from `initial`.
pub fn solve_scf(
    h: &mut SectorHamiltonian,
    obs: &ClusterObservables,
    initial: &[f64],
    label: &str,
    config: &ScfConfig,
) -> Result<ScfSolution> {
    config.validate()?;
    let mut m_in = initial.to_vec();
    let mut start: Option<Vec<f64>> = None;
    let mut iterations = 0;
    loop {
        iterations += 1;
        h.set_mean_fields(&m_in)?;
        let pair = lowest_eigenpair(h, start.as_deref(), &config.eigen)?;
        let (e_intra, e_mf, m_out) = assemble_energy(h, &pair.vector);
        let field_residual = m_out.iter().zip(&m_in).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
        let converged = field_residual <= config.field_tolerance;
        if converged || iterations >= config.max_outer_iterations {
            let amps: Vec<Complex64> = pair.vector.iter().map(|&v| Complex64::new(v, 0.0)).collect();
            let state = SectorState::from_amplitudes(h.basis.clone(), amps)?;
            let note = (!converged).then(|| {
                format!(
                    "fields did not settle to {:.1e} in {} iterations (residual {:.2e}); try a smaller damping",
                    config.field_tolerance, iterations, field_residual
                )
            });
            return Ok(ScfSolution {
                seed: label.to_string(),
                energy: e_intra + e_mf,
                e_intra,
                e_mf,
                eigenvalue: pair.value,
                order: obs.order_parameters(&state),
                de_dj2: obs.de_dj2(&state),
                mean_fields: MeanFieldSet { m: m_out },
                converged,
                iterations,
                field_residual,
                eigen_residual: pair.residual,
                note,
                eigenvector: pair.vector,
            });
        }
        let g = config.damping;
        m_in.iter_mut().zip(&m_out).for_each(|(a, b)| *a = (1.0 - g) * *a + g * b);
        start = Some(pair.vector);
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HmftResult {
    pub j2: f64,
    pub best: ScfSolution,
    /// Every start, in seed order (a warm start, if any, comes first).
    pub candidates: Vec<ScfSolution>,
}

/// Lowest-energy self-consistent solution over the configured seeds and an
/// optional extra warm start.
pub fn self_consistent_hmft(
    geometry: Arc<ClusterGeometry>,
    model: ModelParams,
    config: &ScfConfig,
    warm: Option<&[f64]>,
) -> Result<HmftResult> {
    config.validate()?;
    let h = build_hamiltonian(geometry.clone(), model, &vec![0.0; geometry.n_sites()])?;
    let obs = observables_for(&h)?;
    let mut starts: Vec<(String, Vec<f64>)> = Vec::new();
    if let Some(w) = warm {
        starts.push(("warm".into(), w.to_vec()));
    }
    starts.extend(config.seeds.iter().map(|s| (s.label(), s.fields(&geometry))));
    let outcomes = crate::par_map(starts, |(label, m0)| {
        let mut h = h.clone();
        solve_scf(&mut h, &obs, &m0, &label, config)
    });
    let candidates = outcomes.into_iter().collect::<Result<Vec<_>>>()?;
    let best = candidates.iter().min_by(|a, b| a.energy.total_cmp(&b.energy)).cloned().expect("at least one seed");
    Ok(HmftResult { j2: model.j2, best, candidates })
}

/// Reference table along a J2 grid. Each point keeps the lowest-energy
/// solution among the seeds and the previous point's fields, per direction.
pub fn hmft_sweep(l: usize, j1: f64, grid: &[f64], config: &ScfConfig, directions: &[Direction]) -> Result<Vec<SweepRecord>> {
    if grid.is_empty() {
        return Err(Error::Config("empty J2 grid".into()));
    }
    let geometry = Arc::new(ClusterGeometry::new(l)?);
    let mut records = Vec::new();
    for &dir in directions {
        let mut order: Vec<f64> = grid.to_vec();
        if dir == Direction::Down {
            order.reverse();
        }
        let mut warm: Option<Vec<f64>> = None;
        let mut chain = Vec::new();
        for &j2 in &order {
            let model = ModelParams::new(j1, j2)?;
            let rec = match self_consistent_hmft(geometry.clone(), model, config, warm.as_deref()) {
                Ok(r) => {
                    warm = Some(r.best.mean_fields.m.clone());
                    oracle_record(&r.best, j2, dir)
                }
                Err(_) => SweepRecord::failed(j2, dir),
            };
            chain.push(rec);
        }
        chain.sort_by(|a, b| a.j2.total_cmp(&b.j2));
        crate::sweep::fill_grid_derivative(&mut chain);
        records.extend(chain);
    }
    Ok(records)
}

fn oracle_record(s: &ScfSolution, j2: f64, direction: Direction) -> SweepRecord {
    SweepRecord {
        j2,
        energy: s.energy,
        de_dj2: s.de_dj2,
        de_dj2_grid: None,
        m_neel: s.order.m_neel,
        m_caf_x: s.order.m_caf_x,
        m_caf_y: s.order.m_caf_y,
        d_x: s.order.d_x,
        d_y: s.order.d_y,
        iterations: s.iterations,
        status: if s.converged { PointStatus::Converged } else { PointStatus::MaxIterations },
        direction,
        seed: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn geo(l: usize) -> Arc<ClusterGeometry> {
        Arc::new(ClusterGeometry::new(l).unwrap())
    }

    #[test]
    fn zero_field_2x2_is_open_cluster_ground_state() {
        let h = build_hamiltonian(geo(2), ModelParams::j2(0.0).unwrap(), &[0.0; 4]).unwrap();
        assert_eq!(h.dim(), 6);
        assert_eq!(h.max_asymmetry(), 0.0);
        // four-site Heisenberg ring
        assert_abs_diff_eq!(lowest_eigenpair_dense(&h).value, -2.0, epsilon = 1e-12);
    }

    #[test]
    fn dense_and_lanczos_agree() {
        let m = FieldPattern::Neel.fields(&geo(2));
        let h = build_hamiltonian(geo(2), ModelParams::j2(0.3).unwrap(), &m).unwrap();
        let d = lowest_eigenpair_dense(&h);
        let l = lowest_eigenpair_lanczos(&h, None, &EigenConfig::default()).unwrap();
        assert_abs_diff_eq!(d.value, l.value, epsilon = 1e-10);
        assert!(l.residual <= 1e-8);
    }

    #[test]
    fn lanczos_on_4x4_sector() {
        let m = FieldPattern::Random(3).fields(&geo(4));
        let h = build_hamiltonian(geo(4), ModelParams::j2(0.5).unwrap(), &m).unwrap();
        assert_eq!(h.dim(), 12870);
        assert_eq!(h.max_asymmetry(), 0.0);
        let p = lowest_eigenpair_lanczos(&h, None, &EigenConfig::default()).unwrap();
        assert!(p.residual <= 1e-8, "residual {}", p.residual);
    }

    #[test]
    fn neel_fields_shift_the_diagonal() {
        let g = geo(2);
        let m = FieldPattern::Neel.fields(&g);
        let h = build_hamiltonian(g.clone(), ModelParams::j2(0.0).unwrap(), &m).unwrap();
        // each site sees two external NN partners of opposite sign
        for (j, hj) in h.fields().iter().enumerate() {
            assert_abs_diff_eq!(*hj, -2.0 * m[j], epsilon = 1e-15);
        }
    }

    #[test]
    fn paramagnet_fixed_point_from_zero_fields() {
        let cfg = ScfConfig { seeds: vec![FieldPattern::Zero], ..Default::default() };
        let r = self_consistent_hmft(geo(2), ModelParams::j2(0.5).unwrap(), &cfg, None).unwrap();
        assert!(r.best.converged);
        assert!(r.best.mean_fields.m.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn rejects_bad_scf_config() {
        let bad = ScfConfig { damping: 0.0, ..Default::default() };
        assert!(self_consistent_hmft(geo(2), ModelParams::j2(0.0).unwrap(), &bad, None).is_err());
        let bad = ScfConfig { field_tolerance: -1.0, ..Default::default() };
        assert!(bad.validate().is_err());
        assert!(build_hamiltonian(geo(2), ModelParams::j2(0.0).unwrap(), &[0.0; 3]).is_err());
    }
}
