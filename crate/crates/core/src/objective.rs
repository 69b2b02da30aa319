//! Mean-field-embedded energy per spin and its derivatives.
//!
//! For a cluster state `ψ`,
//!
//! ```text
//! E = (1/N) [ Σ_intra J_b ⟨S_i·S_j⟩ + Σ_boundary w_b J_b ⟨S^z_i⟩⟨S^z_j⟩ ]
//! ```
//!
//! where the boundary weights `w_b` already carry the 1/2 double-counting
//! factor. Transverse moments vanish identically in the zero-magnetization
//! sector, so only z-components enter the embedding.
//!
//! Differentiating the quadratic boundary term at fixed `ψ` gives a linear
//! field `h_i = Σ_{b∋i} w_b J_b m_partner`, so the exact gradient is one
//! adjoint sweep with the effective operator `H_eff = h_intra + Σ h_i S^z_i`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

use crate::circuit::{CircuitSpec, CompiledCircuit};
use crate::error::{Error, Result};
use crate::lattice::{Bond, BondRange, ClusterGeometry};
use crate::optimizer::{self, GradientMode, Minimum, OptimizerConfig, Problem};
use crate::statevector::{PairTable, SectorBasis, SectorState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub j1: f64,
    pub j2: f64,
}

impl ModelParams {
    pub fn new(j1: f64, j2: f64) -> Result<Self> {
        if !(j1.is_finite() && j1 > 0.0) {
            return Err(Error::Config(format!("j1 must be positive, got {j1}")));
        }
        if !(j2.is_finite() && j2 >= 0.0) {
            return Err(Error::Config(format!("j2 must be non-negative, got {j2}")));
        }
        Ok(Self { j1, j2 })
    }

    /// Units of J1.
    pub fn j2(j2: f64) -> Result<Self> {
        Self::new(1.0, j2)
    }

    pub fn coupling(&self, range: BondRange) -> f64 {
        match range {
            BondRange::Nn => self.j1,
            BondRange::Nnn => self.j2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub e_intra: f64,
    pub e_mf: f64,
    pub e_total: f64,
    /// `⟨S^z_j⟩` per site.
    pub mean_fields: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct OrderParameters {
    /// `|M^z(π,π)|`
    pub m_neel: f64,
    /// `|M^z(π,0)|`
    pub m_caf_x: f64,
    /// `|M^z(0,π)|`
    pub m_caf_y: f64,
    pub d_x: f64,
    pub d_y: f64,
}

impl OrderParameters {
    pub fn m_caf(&self) -> f64 {
        self.m_caf_x.max(self.m_caf_y)
    }

    pub fn max_magnetization(&self) -> f64 {
        self.m_neel.max(self.m_caf())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    X,
    Y,
}

/// `M^z(k) = (1/N) Σ_j e^{-i r_j·k} ⟨S^z_j⟩`
pub fn magnetization_from_fields(geometry: &ClusterGeometry, sz: &[f64], k: (f64, f64)) -> Complex64 {
    let n = geometry.n_sites() as f64;
    geometry.sites().iter().map(|s| Complex64::from_polar(sz[s.id], -(s.x as f64 * k.0 + s.y as f64 * k.1))).sum::<Complex64>()
        / n
}

pub fn magnetization(geometry: &ClusterGeometry, state: &SectorState, k: (f64, f64)) -> Complex64 {
    magnetization_from_fields(geometry, &state.all_sz(), k)
}

/// `D^α = (1/L) Σ_{⟨ij⟩_α} (-1)^{r^α_i} ⟨S_i·S_j⟩` over intra-cluster bonds.
pub fn dimer(geometry: &ClusterGeometry, state: &SectorState, axis: Axis) -> Result<f64> {
    let mut values = Vec::new();
    for b in geometry.intra_bonds() {
        values.push(state.expect_heisenberg(b.i, b.j)?);
    }
    Ok(dimer_from_bonds(geometry, geometry.intra_bonds(), &values, axis))
}

fn bond_axis(geometry: &ClusterGeometry, b: &Bond) -> Option<Axis> {
    if b.range != BondRange::Nn {
        return None;
    }
    let same_row = geometry.coord(b.i).1 == geometry.coord(b.j).1;
    Some(if same_row { Axis::X } else { Axis::Y })
}

fn dimer_from_bonds(geometry: &ClusterGeometry, bonds: &[Bond], values: &[f64], axis: Axis) -> f64 {
    let total: f64 = bonds
        .iter()
        .zip(values)
        .filter(|(b, _)| bond_axis(geometry, b) == Some(axis))
        .map(|(b, v)| {
            let (x, y) = geometry.coord(b.i);
            let r = match axis {
                Axis::X => x,
                Axis::Y => y,
            };
            if r % 2 == 0 {
                *v
            } else {
                -*v
            }
        })
        .sum();
    total / geometry.side() as f64
}

/// Precomputed bond data for evaluating energies and observables of states
/// in one sector.
#[derive(Debug, Clone)]
pub struct ClusterObservables {
    geometry: Arc<ClusterGeometry>,
    basis: Arc<SectorBasis>,
    intra_tables: Vec<PairTable>,
    diag_nn: Vec<f64>,
    diag_nnn: Vec<f64>,
}

impl ClusterObservables {
    pub fn new(geometry: Arc<ClusterGeometry>, basis: Arc<SectorBasis>) -> Result<Self> {
        if basis.n_qubits() != geometry.n_sites() {
            return Err(Error::SectorMismatch {
                n: geometry.n_sites(),
                k: basis.weight(),
                got_n: basis.n_qubits(),
                got_k: basis.weight(),
            });
        }
        let intra_tables = geometry.intra_bonds().iter().map(|b| basis.pair_table(b.i, b.j)).collect::<Result<Vec<_>>>()?;
        let mut diag_nn = vec![0.0; basis.len()];
        let mut diag_nnn = vec![0.0; basis.len()];
        for (idx, &s) in basis.states().iter().enumerate() {
            for b in geometry.intra_bonds() {
                let aligned = ((s >> b.i) & 1) == ((s >> b.j) & 1);
                let zz = if aligned { 0.25 } else { -0.25 };
                match b.range {
                    BondRange::Nn => diag_nn[idx] += zz,
                    BondRange::Nnn => diag_nnn[idx] += zz,
                }
            }
        }
        Ok(Self { geometry, basis, intra_tables, diag_nn, diag_nnn })
    }

    pub fn geometry(&self) -> &Arc<ClusterGeometry> {
        &self.geometry
    }

    pub fn basis(&self) -> &Arc<SectorBasis> {
        &self.basis
    }

    pub(crate) fn intra_diagonal(&self, model: &ModelParams) -> Vec<f64> {
        self.diag_nn.iter().zip(&self.diag_nnn).map(|(a, b)| model.j1 * a + model.j2 * b).collect()
    }

    /// `⟨S_i·S_j⟩` for every intra-cluster bond, in `intra_bonds` order.
    pub fn bond_correlations(&self, state: &SectorState) -> Vec<f64> {
        self.intra_tables.iter().map(|t| state.heisenberg_with(t)).collect()
    }

    fn boundary_sum(&self, model: &ModelParams, m: &[f64], only: Option<BondRange>) -> f64 {
        self.geometry
            .boundary_bonds()
            .iter()
            .filter(|b| only.map_or(true, |r| b.range == r))
            .map(|b| {
                let j = if only.is_some() { 1.0 } else { model.coupling(b.range) };
                b.weight * j * m[b.i] * m[b.j]
            })
            .sum()
    }

    pub fn energy(&self, model: &ModelParams, state: &SectorState) -> EnergyReport {
        let n = self.geometry.n_sites() as f64;
        let diag = self.intra_diagonal(model);
        let amps = state.amplitudes();
        let mut intra: f64 = amps.iter().zip(&diag).map(|(a, d)| a.norm_sqr() * d).sum();
        for (b, t) in self.geometry.intra_bonds().iter().zip(&self.intra_tables) {
            let j = model.coupling(b.range);
            if j == 0.0 {
                continue;
            }
            let flip: f64 = t.pairs.iter().map(|&(a, c)| (amps[a as usize].conj() * amps[c as usize]).re).sum();
            intra += j * flip;
        }
        let m = state.all_sz();
        let mf = self.boundary_sum(model, &m, None);
        let (e_intra, e_mf) = (intra / n, mf / n);
        EnergyReport { e_intra, e_mf, e_total: e_intra + e_mf, mean_fields: m }
    }

    /// Hellmann-Feynman `dE/dJ2`.
    pub fn de_dj2(&self, state: &SectorState) -> f64 {
        let n = self.geometry.n_sites() as f64;
        let intra: f64 = self
            .geometry
            .intra_bonds()
            .iter()
            .zip(&self.intra_tables)
            .filter(|(b, _)| b.range == BondRange::Nnn)
            .map(|(_, t)| state.heisenberg_with(t))
            .sum();
        let m = state.all_sz();
        let model = ModelParams { j1: 0.0, j2: 1.0 };
        (intra + self.boundary_sum(&model, &m, Some(BondRange::Nnn))) / n
    }

    pub fn order_parameters(&self, state: &SectorState) -> OrderParameters {
        let m = state.all_sz();
        let bonds = self.bond_correlations(state);
        let g = &self.geometry;
        OrderParameters {
            m_neel: magnetization_from_fields(g, &m, (PI, PI)).norm(),
            m_caf_x: magnetization_from_fields(g, &m, (PI, 0.0)).norm(),
            m_caf_y: magnetization_from_fields(g, &m, (0.0, PI)).norm(),
            d_x: dimer_from_bonds(g, g.intra_bonds(), &bonds, Axis::X),
            d_y: dimer_from_bonds(g, g.intra_bonds(), &bonds, Axis::Y),
        }
    }

    /// Linear boundary fields `h_i = Σ_{b∋i} w_b J_b m_partner`.
    pub fn boundary_fields(&self, model: &ModelParams, m: &[f64]) -> Vec<f64> {
        let mut h = vec![0.0; m.len()];
        for b in self.geometry.boundary_bonds() {
            let c = b.weight * model.coupling(b.range);
            h[b.i] += c * m[b.j];
            h[b.j] += c * m[b.i];
        }
        h
    }

    /// `out = (h_intra + Σ_i fields_i S^z_i) state`
    pub fn apply_effective(&self, model: &ModelParams, fields: &[f64], state: &SectorState, out: &mut SectorState) {
        let diag = self.intra_diagonal(model);
        let states = self.basis.states();
        let src = state.amplitudes();
        let dst = out.amplitudes_mut();
        for (idx, (&s, d)) in states.iter().zip(&diag).enumerate() {
            let mut e = *d;
            for (j, &h) in fields.iter().enumerate() {
                e += if (s >> j) & 1 == 0 { 0.5 * h } else { -0.5 * h };
            }
            dst[idx] = src[idx] * e;
        }
        for (b, t) in self.geometry.intra_bonds().iter().zip(&self.intra_tables) {
            let half = 0.5 * model.coupling(b.range);
            if half == 0.0 {
                continue;
            }
            for &(a, c) in &t.pairs {
                let (a, c) = (a as usize, c as usize);
                dst[a] += src[c] * half;
                dst[c] += src[a] * half;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FdScheme {
    Forward,
    Central,
}

/// Energy of the circuit state `U(θ)|Néel⟩` for one cluster, model and
/// circuit.
#[derive(Debug, Clone)]
pub struct Objective {
    observables: Arc<ClusterObservables>,
    circuit: Arc<CompiledCircuit>,
    initial: SectorState,
    model: ModelParams,
}

impl Objective {
    pub fn new(geometry: Arc<ClusterGeometry>, model: ModelParams, spec: &CircuitSpec) -> Result<Self> {
        if spec.side() != geometry.side() {
            return Err(Error::Config(format!("circuit side {} does not match cluster side {}", spec.side(), geometry.side())));
        }
        let basis = Arc::new(SectorBasis::half_filled(geometry.n_sites())?);
        let observables = Arc::new(ClusterObservables::new(geometry.clone(), basis.clone())?);
        let circuit = Arc::new(spec.compile(basis.clone())?);
        let initial = SectorState::neel(&geometry, basis)?;
        Ok(Self { observables, circuit, initial, model })
    }

    /// Convenience constructor for `L`, `m`, tied flag and J2 (J1 = 1).
    pub fn build(l: usize, m: usize, tied: bool, j2: f64) -> Result<Self> {
        let geometry = Arc::new(ClusterGeometry::new(l)?);
        let spec = CircuitSpec::new(l, m, tied)?;
        Self::new(geometry, ModelParams::j2(j2)?, &spec)
    }

    /// Same cluster and circuit at another coupling; shares all tables.
    pub fn with_model(&self, model: ModelParams) -> Self {
        Self { model, ..self.clone() }
    }

    pub fn model(&self) -> &ModelParams {
        &self.model
    }

    pub fn geometry(&self) -> &Arc<ClusterGeometry> {
        self.observables.geometry()
    }

    pub fn observables(&self) -> &Arc<ClusterObservables> {
        &self.observables
    }

    pub fn spec(&self) -> &CircuitSpec {
        self.circuit.spec()
    }

    pub fn circuit(&self) -> &Arc<CompiledCircuit> {
        &self.circuit
    }

    pub fn n_params(&self) -> usize {
        self.circuit.spec().n_params()
    }

    pub fn state(&self, params: &[f64]) -> Result<SectorState> {
        let mut psi = self.initial.clone();
        self.circuit.apply(params, &mut psi)?;
        Ok(psi)
    }

    pub fn energy(&self, params: &[f64]) -> Result<EnergyReport> {
        let psi = self.state(params)?;
        Ok(self.observables.energy(&self.model, &psi))
    }

    pub fn order_parameters(&self, params: &[f64]) -> Result<OrderParameters> {
        Ok(self.observables.order_parameters(&self.state(params)?))
    }

    pub fn de_dj2(&self, params: &[f64]) -> Result<f64> {
        Ok(self.observables.de_dj2(&self.state(params)?))
    }

    /// Exact gradient by one forward pass and one reverse sweep.
    pub fn gradient_adjoint(&self, params: &[f64]) -> Result<(EnergyReport, Vec<f64>)> {
        let angles = self.circuit.spec().expand(params)?;
        let mut psi = self.initial.clone();
        self.circuit.apply_slots(&angles, &mut psi);
        let report = self.observables.energy(&self.model, &psi);
        let fields = self.observables.boundary_fields(&self.model, &report.mean_fields);
        let mut lambda = SectorState::zeros(psi.basis().clone());
        self.observables.apply_effective(&self.model, &fields, &psi, &mut lambda);
        let slot_grad = self.circuit.adjoint_slot_gradient(&angles, &mut psi, &mut lambda);
        let n = self.geometry().n_sites() as f64;
        let grad = self.circuit.spec().reduce_gradient(&slot_grad).into_iter().map(|g| g / n).collect();
        Ok((report, grad))
    }

    pub fn gradient_fd(&self, params: &[f64], scheme: FdScheme, delta: f64) -> Result<Vec<f64>> {
        if !(delta > 0.0) {
            return Err(Error::Config(format!("finite-difference step must be positive, got {delta}")));
        }
        self.circuit.spec().check_params(params)?;
        let base = match scheme {
            FdScheme::Forward => Some(self.energy(params)?.e_total),
            FdScheme::Central => None,
        };
        let mut x = params.to_vec();
        let mut grad = Vec::with_capacity(params.len());
        for k in 0..params.len() {
            x[k] = params[k] + delta;
            let plus = self.energy(&x)?.e_total;
            let g = match base {
                Some(f0) => (plus - f0) / delta,
                None => {
                    x[k] = params[k] - delta;
                    (plus - self.energy(&x)?.e_total) / (2.0 * delta)
                }
            };
            x[k] = params[k];
            grad.push(g);
        }
        Ok(grad)
    }

    pub fn gradient(&self, params: &[f64], mode: GradientMode, delta: f64) -> Result<(EnergyReport, Vec<f64>)> {
        match mode {
            GradientMode::Adjoint => self.gradient_adjoint(params),
            GradientMode::FdForward => Ok((self.energy(params)?, self.gradient_fd(params, FdScheme::Forward, delta)?)),
            GradientMode::FdCentral => Ok((self.energy(params)?, self.gradient_fd(params, FdScheme::Central, delta)?)),
        }
    }
}

/// [`Problem`] adapter minimizing the embedded energy over circuit angles.
pub struct EnergyProblem<'a> {
    objective: &'a Objective,
    mode: GradientMode,
    delta: f64,
}

impl<'a> EnergyProblem<'a> {
    pub fn new(objective: &'a Objective, config: &OptimizerConfig) -> Self {
        Self { objective, mode: config.gradient_mode, delta: config.fd_delta }
    }
}

impl Problem for EnergyProblem<'_> {
    fn dim(&self) -> usize {
        self.objective.n_params()
    }

    fn evaluate(&mut self, x: &[f64], grad: &mut [f64]) -> Result<f64> {
        let (report, g) = self.objective.gradient(x, self.mode, self.delta)?;
        grad.copy_from_slice(&g);
        Ok(report.e_total)
    }

    fn observe(&mut self, x: &[f64]) -> Option<OrderParameters> {
        self.objective.order_parameters(x).ok()
    }
}

/// Result of minimizing the embedded energy.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QhmftOptimum {
    pub params: Vec<f64>,
    pub report: EnergyReport,
    pub order: OrderParameters,
    pub de_dj2: f64,
    pub minimum: Minimum,
}

impl Objective {
    pub fn optimize(&self, x0: &[f64], config: &OptimizerConfig) -> Result<QhmftOptimum> {
        let mut problem = EnergyProblem::new(self, config);
        let minimum = optimizer::minimize(&mut problem, x0, config)?;
        self.finish(minimum)
    }

    /// Observables at a minimizer returned by [`optimizer::minimize`].
    pub fn finish(&self, minimum: Minimum) -> Result<QhmftOptimum> {
        let psi = self.state(&minimum.x)?;
        Ok(QhmftOptimum {
            params: minimum.x.clone(),
            report: self.observables.energy(&self.model, &psi),
            order: self.observables.order_parameters(&psi),
            de_dj2: self.observables.de_dj2(&psi),
            minimum,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn neel_product_state_energies() {
        let obj = Objective::build(2, 2, true, 0.0).unwrap();
        let zero = vec![0.0; obj.n_params()];
        let r = obj.energy(&zero).unwrap();
        assert_abs_diff_eq!(r.e_total, -0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(r.e_intra, -0.25, epsilon = 1e-15);
        assert_eq!(r.e_total, r.e_intra + r.e_mf);
        let r1 = obj.with_model(ModelParams::j2(1.0).unwrap()).energy(&zero).unwrap();
        assert_abs_diff_eq!(r1.e_total, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(obj.de_dj2(&zero).unwrap(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn neel_order_parameters() {
        let obj = Objective::build(4, 1, false, 0.0).unwrap();
        let op = obj.order_parameters(&vec![0.0; obj.n_params()]).unwrap();
        assert_abs_diff_eq!(op.m_neel, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(op.m_caf_x, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(op.m_caf_y, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(op.d_x, op.d_y, epsilon = 1e-15);
    }

    #[test]
    fn invalid_model_parameters() {
        assert!(ModelParams::new(0.0, 0.5).is_err());
        assert!(ModelParams::new(1.0, -0.1).is_err());
        assert!(ModelParams::new(1.0, f64::NAN).is_err());
    }

    #[test]
    fn fd_rejects_bad_step_and_length() {
        let obj = Objective::build(2, 1, true, 0.3).unwrap();
        let p = vec![0.1; obj.n_params()];
        assert!(obj.gradient_fd(&p, FdScheme::Central, 0.0).is_err());
        assert!(obj.gradient_fd(&p, FdScheme::Forward, -1e-6).is_err());
        assert!(matches!(obj.energy(&[0.0; 2]), Err(Error::ParameterLength { .. })));
    }

    #[test]
    fn adjoint_matches_central_differences_small() {
        let obj = Objective::build(2, 2, false, 0.4).unwrap();
        let p: Vec<f64> = (0..obj.n_params()).map(|k| 0.3 * (k as f64).sin() + 0.1).collect();
        let (_, g) = obj.gradient_adjoint(&p).unwrap();
        let fd = obj.gradient_fd(&p, FdScheme::Central, 1e-6).unwrap();
        for (a, b) in g.iter().zip(&fd) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-8);
        }
    }
}
