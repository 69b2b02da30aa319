//! Built-in invariant suite: gate identities, sector closure, gradients and
//! oracle duality, with a pass/fail table.
//!
//! The XY kernel is a parameter so a deliberately broken kernel can be fed
//! through the suite to show that it gets caught.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::sync::Arc;

use crate::circuit::CircuitSpec;
use crate::ed_oracle::{self, FieldPattern, ScfConfig};
use crate::error::Result;
use crate::lattice::ClusterGeometry;
use crate::objective::{FdScheme, ModelParams, Objective};
use crate::reference::{self, FullState};
use crate::rng;
use crate::statevector::{SectorBasis, SectorState};

pub type XyKernel = fn(&mut SectorState, usize, usize, f64) -> Result<()>;

pub fn library_xy(state: &mut SectorState, i: usize, j: usize, theta: f64) -> Result<()> {
    state.apply_xy(i, j, theta)
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, value: f64, tol: f64) -> CheckResult {
    CheckResult { name, passed: value <= tol, detail: format!("{value:.3e} (tol {tol:.0e})") }
}

fn failed(name: &'static str, err: impl std::fmt::Display) -> CheckResult {
    CheckResult { name, passed: false, detail: format!("error: {err}") }
}

fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).norm()))
}

/// Deviation of `XY(π/2)|01⟩` from `(|01⟩ − |10⟩)/√2`, site 0 being the low bit.
pub fn singlet_error(xy: XyKernel) -> Result<f64> {
    let basis = Arc::new(SectorBasis::new(2, 1)?);
    let mut s = SectorState::basis_state(basis.clone(), 0b10)?;
    xy(&mut s, 0, 1, PI / 2.0)?;
    let r = FRAC_1_SQRT_2;
    let mut want = SectorState::zeros(basis.clone());
    want.amplitudes_mut()[basis.index_of(0b10).unwrap()] = Complex64::new(r, 0.0);
    want.amplitudes_mut()[basis.index_of(0b01).unwrap()] = Complex64::new(-r, 0.0);
    Ok(max_diff(s.amplitudes(), want.amplitudes()))
}

fn random_state(basis: &Arc<SectorBasis>, seed: u64) -> Result<SectorState> {
    let mut r = rng::stream(seed, "validate_state", 0);
    let mut amps: Vec<Complex64> = (0..basis.len()).map(|_| Complex64::new(r.gen::<f64>() - 0.5, r.gen::<f64>() - 0.5)).collect();
    let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    amps.iter_mut().for_each(|a| *a /= norm);
    SectorState::from_amplitudes(basis.clone(), amps)
}

/// `XY(0)` is the identity and `XY(2π)` negates exactly the odd-parity part.
fn xy_period_error(xy: XyKernel) -> Result<f64> {
    let basis = Arc::new(SectorBasis::half_filled(4)?);
    let psi = random_state(&basis, 1)?;
    let mut zero = psi.clone();
    xy(&mut zero, 0, 2, 0.0)?;
    let mut full = psi.clone();
    xy(&mut full, 0, 2, 2.0 * PI)?;
    let expected: Vec<Complex64> =
        basis.states().iter().zip(psi.amplitudes()).map(|(&s, a)| if ((s >> 0) ^ (s >> 2)) & 1 == 1 { -a } else { *a }).collect();
    Ok(max_diff(zero.amplitudes(), psi.amplitudes()).max(max_diff(full.amplitudes(), &expected)))
}

/// Random gate sequence applied to the sector state and to a dense
/// full-space copy. Returns (max amplitude difference, leakage, |norm − 1|).
pub fn random_gate_run(l: usize, n_gates: usize, seed: u64, xy: XyKernel) -> Result<(f64, f64, f64)> {
    let g = ClusterGeometry::new(l)?;
    let n = g.n_sites();
    let basis = Arc::new(SectorBasis::half_filled(n)?);
    let mut psi = SectorState::neel(&g, basis)?;
    let mut full = FullState::from_amplitudes(n, psi.full_space_reference()?);
    let mut r = rng::stream(seed, "random_gates", l as u64);
    for _ in 0..n_gates {
        let i = r.gen_range(0..n);
        let j = (i + r.gen_range(1..n)) % n;
        let theta = r.gen_range(-PI..PI);
        match r.gen_range(0..3) {
            0 => {
                xy(&mut psi, i, j, theta)?;
                full.apply_two(i, j, &reference::xy_matrix(theta));
            }
            1 => {
                psi.apply_zz(i, j, theta)?;
                full.apply_two(i, j, &reference::zz_matrix(theta));
            }
            _ => {
                psi.apply_z(i, theta)?;
                full.apply_one(i, &reference::z_matrix(theta));
            }
        }
    }
    let diff = max_diff(&psi.full_space_reference()?, &full.amps);
    Ok((diff, full.leakage(n / 2), (psi.norm() - 1.0).abs()))
}

/// Worst relative disagreement between adjoint and central-difference
/// gradients, `|g_a − g_fd| / max(|g_fd|, 1e-3)`, over random angle vectors.
pub fn gradient_agreement(l: usize, m: usize, tied: bool, j2: f64, samples: usize, seed: u64) -> Result<f64> {
    let obj = Objective::build(l, m, tied, j2)?;
    let mut worst: f64 = 0.0;
    for k in 0..samples {
        let p = crate::optimizer::random_angles(&mut rng::stream(seed, "gradient_check", k as u64), obj.n_params(), PI);
        let (_, ga) = obj.gradient_adjoint(&p)?;
        let gf = obj.gradient_fd(&p, FdScheme::Central, 1e-6)?;
        for (a, f) in ga.iter().zip(&gf) {
            worst = worst.max((a - f).abs() / f.abs().max(1e-3));
        }
    }
    Ok(worst)
}

/// Independent 2×2 HMFT energy at fixed mean fields: dense `2^N` Hamiltonian,
/// restricted to the zero-magnetization rows, and the embedded energy
/// evaluated with Pauli-matrix expectation values.
pub fn dense_full_space_energy(l: usize, model: &ModelParams, mean_fields: &[f64]) -> Result<(f64, Vec<f64>)> {
    let g = ClusterGeometry::new(l)?;
    let n = g.n_sites();
    let bonds: Vec<(usize, usize, f64)> = g.intra_bonds().iter().map(|b| (b.i, b.j, model.coupling(b.range))).collect();
    let mut fields = vec![0.0; n];
    for b in g.boundary_bonds() {
        let c = b.weight * model.coupling(b.range);
        fields[b.i] += c * mean_fields[b.j];
        fields[b.j] += c * mean_fields[b.i];
    }
    let h = reference::dense_hamiltonian(n, &bonds, &fields);
    let keep: Vec<usize> = (0..h.len()).filter(|s| s.count_ones() as usize == n / 2).collect();
    let sub = DMatrix::from_fn(keep.len(), keep.len(), |r, c| h[keep[r]][keep[c]]);
    let eig = SymmetricEigen::new(sub);
    let k = eig.eigenvalues.imin();
    let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n];
    for (r, &s) in keep.iter().enumerate() {
        amps[s] = Complex64::new(eig.eigenvectors[(r, k)], 0.0);
    }
    let full = FullState::from_amplitudes(n, amps);
    let m: Vec<f64> = (0..n).map(|j| full.sz(j)).collect();
    let intra: f64 = bonds.iter().map(|&(i, j, c)| c * full.heisenberg(i, j).0).sum();
    let mf: f64 = g.boundary_bonds().iter().map(|b| b.weight * model.coupling(b.range) * m[b.i] * m[b.j]).sum();
    Ok(((intra + mf) / n as f64, m))
}

/// Converged 2×2 SCF energy against the dense full-space path at the SCF
/// fields, and the fixed-point residual.
pub fn oracle_duality(j2: f64) -> Result<(f64, f64)> {
    let model = ModelParams::j2(j2)?;
    let cfg = ScfConfig { seeds: vec![FieldPattern::Neel], ..Default::default() };
    let sol = ed_oracle::self_consistent_hmft(Arc::new(ClusterGeometry::new(2)?), model, &cfg, None)?.best;
    let (dense, m_dense) = dense_full_space_energy(2, &model, &sol.mean_fields.m)?;
    let fixed_point = m_dense.iter().zip(&sol.mean_fields.m).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
    Ok(((dense - sol.energy).abs(), fixed_point.max(sol.field_residual)))
}

/// Runs every check with the library kernels.
pub fn run_suite() -> Vec<CheckResult> {
    run_suite_with(library_xy)
}

pub fn run_suite_with(xy: XyKernel) -> Vec<CheckResult> {
    let mut out = Vec::new();
    out.push(match singlet_error(xy) {
        Ok(e) => check("xy_singlet", e, 1e-12),
        Err(e) => failed("xy_singlet", e),
    });
    out.push(match xy_period_error(xy) {
        Ok(e) => check("xy_identity_and_period", e, 1e-12),
        Err(e) => failed("xy_identity_and_period", e),
    });
    for (name, l) in [("random_gates_2x2", 2), ("random_gates_4x4", 4)] {
        out.push(match random_gate_run(l, 1000, 7, xy) {
            Ok((d, leak, norm)) => check(name, d.max(leak).max(norm), 1e-12),
            Err(e) => failed(name, e),
        });
    }
    out.push(match inverse_round_trip() {
        Ok(e) => check("inverse_round_trip", e, 1e-12),
        Err(e) => failed("inverse_round_trip", e),
    });
    for (name, l, m) in [("gradient_2x2_m2", 2, 2), ("gradient_4x4_m1", 4, 1)] {
        out.push(match gradient_agreement(l, m, false, 0.55, 2, 3) {
            Ok(e) => check(name, e, 1e-5),
            Err(e) => failed(name, e),
        });
    }
    out.push(match oracle_duality(0.2) {
        Ok((e, fp)) => check("oracle_duality_2x2", e.max(fp), 1e-10),
        Err(e) => failed("oracle_duality_2x2", e),
    });
    out.push(match counting() {
        Ok(ok) => CheckResult { name: "parameter_counts", passed: ok, detail: "L=4 m=2: 128/18, L=2 m=2 tied: 12/10".into() },
        Err(e) => failed("parameter_counts", e),
    });
    out
}

fn inverse_round_trip() -> Result<f64> {
    let spec = CircuitSpec::new(4, 1, false)?;
    let basis = Arc::new(SectorBasis::half_filled(16)?);
    let circuit = spec.compile(basis.clone())?;
    let psi = random_state(&basis, 2)?;
    let p = crate::optimizer::random_angles(&mut rng::stream(2, "validate_inverse", 0), spec.n_params(), PI);
    let mut s = psi.clone();
    circuit.apply(&p, &mut s)?;
    circuit.apply_inverse(&p, &mut s)?;
    Ok(max_diff(s.amplitudes(), psi.amplitudes()))
}

fn counting() -> Result<bool> {
    let a = CircuitSpec::new(4, 2, false)?;
    let b = CircuitSpec::new(2, 2, true)?;
    Ok(a.n_params() == 128 && a.depth() == 18 && b.n_params() == 12 && b.depth() == 10)
}

pub fn format_table(results: &[CheckResult]) -> String {
    let width = results.iter().map(|r| r.name.len()).max().unwrap_or(0);
    let mut s = String::new();
    for r in results {
        let mark = if r.passed { "PASS" } else { "FAIL" };
        s.push_str(&format!("{mark}  {:<width$}  {}\n", r.name, r.detail));
    }
    let passed = results.iter().filter(|r| r.passed).count();
    s.push_str(&format!("{passed}/{} checks passed\n", results.len()));
    s
}
