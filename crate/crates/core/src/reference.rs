//! Dense full-space reference simulator for small clusters.
//!
//! Gates are applied as explicit 2×2 / 4×4 matrices on the `2^n` amplitude
//! vector, and observables are evaluated from Pauli matrix actions. Nothing
//! here shares code with the sector kernels; it exists to cross-check them.

use num_complex::Complex64;

use crate::circuit::{CircuitSpec, GateFamily};
use crate::error::{Error, Result};
use crate::statevector::MAX_FULL_SPACE_QUBITS;

type C = Complex64;

fn c(re: f64, im: f64) -> C {
    C::new(re, im)
}

/// 4×4 matrix in the local basis `|b_i b_j⟩` ordered `00, 01, 10, 11`.
pub fn xy_matrix(theta: f64) -> [[C; 4]; 4] {
    let (s, co) = (0.5 * theta).sin_cos();
    let z = c(0.0, 0.0);
    let one = c(1.0, 0.0);
    [[one, z, z, z], [z, c(co, 0.0), c(s, 0.0), z], [z, c(-s, 0.0), c(co, 0.0), z], [z, z, z, one]]
}

pub fn zz_matrix(theta: f64) -> [[C; 4]; 4] {
    let e = C::from_polar(1.0, -theta);
    let o = e.conj();
    let z = c(0.0, 0.0);
    [[e, z, z, z], [z, o, z, z], [z, z, o, z], [z, z, z, e]]
}

pub fn z_matrix(theta: f64) -> [[C; 2]; 2] {
    let u = C::from_polar(1.0, -theta);
    [[u, c(0.0, 0.0)], [c(0.0, 0.0), u.conj()]]
}

#[derive(Debug, Clone)]
pub struct FullState {
    pub n: usize,
    pub amps: Vec<C>,
}

impl FullState {
    pub fn basis(n: usize, bits: u64) -> Result<Self> {
        if n > MAX_FULL_SPACE_QUBITS {
            return Err(Error::TooManyQubits { n, max: MAX_FULL_SPACE_QUBITS });
        }
        let mut amps = vec![c(0.0, 0.0); 1 << n];
        amps[bits as usize] = c(1.0, 0.0);
        Ok(Self { n, amps })
    }

    pub fn from_amplitudes(n: usize, amps: Vec<C>) -> Self {
        assert_eq!(amps.len(), 1 << n);
        Self { n, amps }
    }

    pub fn apply_two(&mut self, i: usize, j: usize, m: &[[C; 4]; 4]) {
        let (mi, mj) = (1usize << i, 1usize << j);
        for base in 0..self.amps.len() {
            if base & mi != 0 || base & mj != 0 {
                continue;
            }
            let idx = [base, base | mj, base | mi, base | mi | mj];
            let v = idx.map(|k| self.amps[k]);
            for (r, &k) in idx.iter().enumerate() {
                self.amps[k] = (0..4).map(|col| m[r][col] * v[col]).sum();
            }
        }
    }

    pub fn apply_one(&mut self, j: usize, m: &[[C; 2]; 2]) {
        let mj = 1usize << j;
        for base in 0..self.amps.len() {
            if base & mj != 0 {
                continue;
            }
            let (a, b) = (self.amps[base], self.amps[base | mj]);
            self.amps[base] = m[0][0] * a + m[0][1] * b;
            self.amps[base | mj] = m[1][0] * a + m[1][1] * b;
        }
    }

    pub fn apply_circuit(&mut self, spec: &CircuitSpec, slot_values: &[f64]) {
        for (slot, &theta) in spec.slots().iter().zip(slot_values) {
            match slot.family {
                GateFamily::Xy => self.apply_two(slot.sites[0], slot.sites[1], &xy_matrix(theta)),
                GateFamily::Zz => self.apply_two(slot.sites[0], slot.sites[1], &zz_matrix(theta)),
                GateFamily::Z => self.apply_one(slot.sites[0], &z_matrix(theta)),
            }
        }
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Total weight on basis states whose Hamming weight differs from `k`.
    pub fn leakage(&self, k: usize) -> f64 {
        self.amps.iter().enumerate().filter(|(s, _)| s.count_ones() as usize != k).map(|(_, a)| a.norm_sqr()).sum()
    }

    fn pauli(&self, op: char, j: usize, v: &[C]) -> Vec<C> {
        let mj = 1usize << j;
        let mut out = vec![c(0.0, 0.0); v.len()];
        for (s, a) in v.iter().enumerate() {
            let up = s & mj == 0;
            match op {
                'x' => out[s ^ mj] += a,
                'y' => out[s ^ mj] += a * if up { c(0.0, 1.0) } else { c(0.0, -1.0) },
                'z' => out[s] += a * if up { 1.0 } else { -1.0 },
                _ => unreachable!(),
            }
        }
        out
    }

    fn expect(&self, v: &[C]) -> C {
        self.amps.iter().zip(v).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn sz(&self, j: usize) -> f64 {
        0.5 * self.expect(&self.pauli('z', j, &self.amps)).re
    }

    /// `⟨S_i·S_j⟩ = ¼ Σ_α ⟨σ^α_i σ^α_j⟩`; also returns the imaginary residue.
    pub fn heisenberg(&self, i: usize, j: usize) -> (f64, f64) {
        let total: C = ['x', 'y', 'z']
            .iter()
            .map(|&op| {
                let v = self.pauli(op, j, &self.amps);
                self.expect(&self.pauli(op, i, &v))
            })
            .sum();
        (0.25 * total.re, 0.25 * total.im)
    }

    /// `⟨S^x_j⟩` and `⟨S^y_j⟩`.
    pub fn transverse(&self, j: usize) -> (f64, f64) {
        (0.5 * self.expect(&self.pauli('x', j, &self.amps)).re, 0.5 * self.expect(&self.pauli('y', j, &self.amps)).re)
    }
}

/// Dense `2^n × 2^n` real matrix of `Σ J_b S_i·S_j + Σ h_j S^z_j`.
pub fn dense_hamiltonian(n: usize, bonds: &[(usize, usize, f64)], fields: &[f64]) -> Vec<Vec<f64>> {
    let dim = 1usize << n;
    let mut h = vec![vec![0.0; dim]; dim];
    let sz = |s: usize, j: usize| if s & (1 << j) == 0 { 0.5 } else { -0.5 };
    for s in 0..dim {
        for &(i, j, coupling) in bonds {
            h[s][s] += coupling * sz(s, i) * sz(s, j);
            let bi = s & (1 << i) != 0;
            let bj = s & (1 << j) != 0;
            if bi != bj {
                let t = s ^ (1 << i) ^ (1 << j);
                h[t][s] += 0.5 * coupling;
            }
        }
        for (j, &f) in fields.iter().enumerate() {
            h[s][s] += f * sz(s, j);
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heisenberg_on_singlet() {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        // (|01⟩ − |10⟩)/√2 with site 0 the low bit
        let mut amps = vec![c(0.0, 0.0); 4];
        amps[0b10] = c(r, 0.0);
        amps[0b01] = c(-r, 0.0);
        let s = FullState::from_amplitudes(2, amps);
        let (e, im) = s.heisenberg(0, 1);
        assert!((e + 0.75).abs() < 1e-15 && im.abs() < 1e-15);
    }

    #[test]
    fn dense_single_bond_spectrum() {
        let h = dense_hamiltonian(2, &[(0, 1, 1.0)], &[0.0, 0.0]);
        let m = nalgebra::DMatrix::from_fn(4, 4, |r, c| h[r][c]);
        let eig = nalgebra::SymmetricEigen::new(m);
        let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!((min + 0.75).abs() < 1e-14);
    }
}
