//! Cluster wave function restricted to a fixed-Hamming-weight sector.
//!
//! Basis states are the `n`-bit strings with exactly `k` ones, enumerated in
//! increasing integer order; bit `j` of the integer is site `j`, and a set bit
//! is a down spin (`|1⟩ = |↓⟩`). All three gate families (REAL-XY, ZZ, Z)
//! conserve the Hamming weight, so the amplitudes never leave the sector.
//! The global phase is left untouched.

use num_complex::Complex64;
use std::io::{Read, Write};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::lattice::ClusterGeometry;

pub const MAX_QUBITS: usize = 36;
pub const MAX_FULL_SPACE_QUBITS: usize = 16;

const DUMP_MAGIC: &[u8; 4] = b"QHSV";
const DUMP_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SectorBasis {
    n: usize,
    k: usize,
    states: Vec<u64>,
    binom: Vec<Vec<u64>>,
}

fn binomial_table(n: usize) -> Vec<Vec<u64>> {
    let mut t = vec![vec![0u64; n + 2]; n + 1];
    for row in 0..=n {
        t[row][0] = 1;
        for col in 1..=row {
            t[row][col] = t[row - 1][col - 1] + t[row - 1][col];
        }
    }
    t
}

impl SectorBasis {
    pub fn new(n: usize, k: usize) -> Result<Self> {
        if n > MAX_QUBITS {
            return Err(Error::TooManyQubits { n, max: MAX_QUBITS });
        }
        if k > n {
            return Err(Error::Config(format!("Hamming weight {k} exceeds {n} qubits")));
        }
        let binom = binomial_table(n);
        let dim = binom[n][k] as usize;
        let mut states = Vec::with_capacity(dim);
        if k == 0 {
            states.push(0);
        } else {
            // Gosper's hack walks the weight-k strings in increasing order.
            let mut s: u64 = (1u64 << k) - 1;
            let limit = 1u64 << n;
            while s < limit {
                states.push(s);
                let c = s & s.wrapping_neg();
                let r = s + c;
                s = (((r ^ s) >> 2) / c) | r;
            }
        }
        debug_assert_eq!(states.len(), dim);
        Ok(Self { n, k, states, binom })
    }

    /// The zero-magnetization sector, `k = n/2`.
    pub fn half_filled(n: usize) -> Result<Self> {
        if n % 2 != 0 {
            return Err(Error::Config(format!("zero magnetization needs an even qubit count, got {n}")));
        }
        Self::new(n, n / 2)
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    pub fn weight(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[u64] {
        &self.states
    }

    /// Colex rank of a weight-`k` string, which equals its position in the
    /// increasing-integer enumeration.
    pub fn index_of(&self, bits: u64) -> Option<usize> {
        if self.n < 64 && bits >> self.n != 0 {
            return None;
        }
        if bits.count_ones() as usize != self.k {
            return None;
        }
        let mut rank = 0u64;
        let mut seen = 0usize;
        let mut rest = bits;
        while rest != 0 {
            let pos = rest.trailing_zeros() as usize;
            seen += 1;
            if seen <= pos {
                rank += self.binom[pos][seen];
            }
            rest &= rest - 1;
        }
        Some(rank as usize)
    }

    fn check_site(&self, j: usize) -> Result<()> {
        if j >= self.n {
            return Err(Error::SiteOutOfRange { index: j, n: self.n });
        }
        Ok(())
    }

    fn check_pair(&self, i: usize, j: usize) -> Result<()> {
        self.check_site(i)?;
        self.check_site(j)?;
        if i == j {
            return Err(Error::SameSite(i));
        }
        Ok(())
    }

    /// Index pairs `(a, b)` where `a` has `(bit_i, bit_j) = (0, 1)` and `b` is
    /// the same string with those two bits exchanged.
    pub fn pair_table(&self, i: usize, j: usize) -> Result<PairTable> {
        self.check_pair(i, j)?;
        let (mi, mj) = (1u64 << i, 1u64 << j);
        let pairs = self
            .states
            .iter()
            .enumerate()
            .filter(|(_, &s)| s & mi == 0 && s & mj != 0)
            .map(|(a, &s)| {
                let b = self.index_of(s ^ mi ^ mj).expect("swap stays in sector");
                (a as u32, b as u32)
            })
            .collect();
        Ok(PairTable { i, j, pairs })
    }
}

/// Precomputed amplitude pairs that an exchange between sites `i` and `j`
/// couples.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairTable {
    pub i: usize,
    pub j: usize,
    pub pairs: Vec<(u32, u32)>,
}

#[inline]
fn z_sign(state: u64, j: usize) -> f64 {
    if (state >> j) & 1 == 0 {
        1.0
    } else {
        -1.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SectorState {
    basis: Arc<SectorBasis>,
    amps: Vec<Complex64>,
}

impl SectorState {
    pub fn zeros(basis: Arc<SectorBasis>) -> Self {
        let amps = vec![Complex64::new(0.0, 0.0); basis.len()];
        Self { basis, amps }
    }

    pub fn basis_state(basis: Arc<SectorBasis>, bits: u64) -> Result<Self> {
        let idx = basis
            .index_of(bits)
            .ok_or_else(|| Error::Config(format!("bit string {bits:#b} is outside the weight-{} sector", basis.weight())))?;
        let mut state = Self::zeros(basis);
        state.amps[idx] = Complex64::new(1.0, 0.0);
        Ok(state)
    }

    pub fn from_amplitudes(basis: Arc<SectorBasis>, amps: Vec<Complex64>) -> Result<Self> {
        if amps.len() != basis.len() {
            return Err(Error::ParameterLength { expected: basis.len(), got: amps.len() });
        }
        Ok(Self { basis, amps })
    }

    /// Checkerboard product state: site `(x, y)` holds bit `(x + y) mod 2`.
    pub fn neel(geometry: &ClusterGeometry, basis: Arc<SectorBasis>) -> Result<Self> {
        let n = geometry.n_sites();
        if basis.n_qubits() != n || basis.weight() != n / 2 {
            return Err(Error::SectorMismatch { n, k: n / 2, got_n: basis.n_qubits(), got_k: basis.weight() });
        }
        Self::basis_state(basis, neel_bits(geometry))
    }

    pub fn basis(&self) -> &Arc<SectorBasis> {
        &self.basis
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amps
    }

    pub fn copy_from(&mut self, other: &SectorState) {
        self.amps.copy_from_slice(&other.amps);
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `⟨self|other⟩`
    pub fn inner(&self, other: &SectorState) -> Complex64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn apply_xy(&mut self, i: usize, j: usize, theta: f64) -> Result<()> {
        let table = self.basis.pair_table(i, j)?;
        self.apply_xy_table(&table, theta);
        Ok(())
    }

    /// REAL-XY rotation on a precomputed pair table:
    /// `|01⟩ → cos(θ/2)|01⟩ − sin(θ/2)|10⟩`, `|10⟩ → cos(θ/2)|10⟩ + sin(θ/2)|01⟩`.
    pub fn apply_xy_table(&mut self, table: &PairTable, theta: f64) {
        let (s, c) = (0.5 * theta).sin_cos();
        for &(a, b) in &table.pairs {
            let (a, b) = (a as usize, b as usize);
            let (va, vb) = (self.amps[a], self.amps[b]);
            self.amps[a] = va * c + vb * s;
            self.amps[b] = vb * c - va * s;
        }
    }

    /// `exp(-iθ Z_i Z_j)`.
    pub fn apply_zz(&mut self, i: usize, j: usize, theta: f64) -> Result<()> {
        self.basis.check_pair(i, j)?;
        self.apply_zz_unchecked(i, j, theta);
        Ok(())
    }

    pub(crate) fn apply_zz_unchecked(&mut self, i: usize, j: usize, theta: f64) {
        let even = Complex64::from_polar(1.0, -theta);
        let odd = even.conj();
        let mask = (1u64 << i) | (1u64 << j);
        for (amp, &s) in self.amps.iter_mut().zip(self.basis.states.iter()) {
            *amp *= if (s & mask).count_ones() == 1 { odd } else { even };
        }
    }

    /// `exp(-iθ Z_j)`.
    pub fn apply_z(&mut self, j: usize, theta: f64) -> Result<()> {
        self.basis.check_site(j)?;
        self.apply_z_unchecked(j, theta);
        Ok(())
    }

    pub(crate) fn apply_z_unchecked(&mut self, j: usize, theta: f64) {
        let up = Complex64::from_polar(1.0, -theta);
        let down = up.conj();
        for (amp, &s) in self.amps.iter_mut().zip(self.basis.states.iter()) {
            *amp *= if (s >> j) & 1 == 0 { up } else { down };
        }
    }

    pub fn expect_sz(&self, j: usize) -> Result<f64> {
        self.basis.check_site(j)?;
        Ok(self.sz_unchecked(j))
    }

    fn sz_unchecked(&self, j: usize) -> f64 {
        0.5 * self.amps.iter().zip(&self.basis.states).map(|(a, &s)| a.norm_sqr() * z_sign(s, j)).sum::<f64>()
    }

    /// `⟨S^z_j⟩` for every site.
    pub fn all_sz(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.basis.n];
        for (a, &s) in self.amps.iter().zip(&self.basis.states) {
            let p = a.norm_sqr();
            for (j, m) in out.iter_mut().enumerate() {
                *m += p * z_sign(s, j);
            }
        }
        out.iter_mut().for_each(|m| *m *= 0.5);
        out
    }

    /// `⟨S_i·S_j⟩`
    pub fn expect_heisenberg(&self, i: usize, j: usize) -> Result<f64> {
        let table = self.basis.pair_table(i, j)?;
        Ok(self.heisenberg_with(&table))
    }

    pub fn heisenberg_with(&self, table: &PairTable) -> f64 {
        let (i, j) = (table.i, table.j);
        let zz: f64 = self.amps.iter().zip(&self.basis.states).map(|(a, &s)| a.norm_sqr() * z_sign(s, i) * z_sign(s, j)).sum();
        let flip: f64 = table.pairs.iter().map(|&(a, b)| (self.amps[a as usize].conj() * self.amps[b as usize]).re).sum();
        0.25 * zz + flip
    }

    /// Embeds the sector vector into all `2^n` computational basis states.
    pub fn full_space_reference(&self) -> Result<Vec<Complex64>> {
        let n = self.basis.n;
        if n > MAX_FULL_SPACE_QUBITS {
            return Err(Error::TooManyQubits { n, max: MAX_FULL_SPACE_QUBITS });
        }
        let mut full = vec![Complex64::new(0.0, 0.0); 1 << n];
        for (a, &s) in self.amps.iter().zip(&self.basis.states) {
            full[s as usize] = *a;
        }
        Ok(full)
    }

    /// Binary dump: magic `QHSV`, then little-endian `u32` version, `u32` n,
    /// `u32` k, `u64` length, followed by `length` interleaved `(re, im)` f64
    /// pairs.
    pub fn write_dump<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(DUMP_MAGIC)?;
        w.write_all(&DUMP_VERSION.to_le_bytes())?;
        w.write_all(&(self.basis.n as u32).to_le_bytes())?;
        w.write_all(&(self.basis.k as u32).to_le_bytes())?;
        w.write_all(&(self.amps.len() as u64).to_le_bytes())?;
        for a in &self.amps {
            w.write_all(&a.re.to_le_bytes())?;
            w.write_all(&a.im.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_dump<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != DUMP_MAGIC {
            return Err(Error::Dump("bad magic".into()));
        }
        let mut u32buf = [0u8; 4];
        let mut read_u32 = |r: &mut R| -> Result<u32> {
            r.read_exact(&mut u32buf)?;
            Ok(u32::from_le_bytes(u32buf))
        };
        let version = read_u32(&mut r)?;
        if version != DUMP_VERSION {
            return Err(Error::Dump(format!("unsupported version {version}")));
        }
        let n = read_u32(&mut r)? as usize;
        let k = read_u32(&mut r)? as usize;
        let mut u64buf = [0u8; 8];
        r.read_exact(&mut u64buf)?;
        let len = u64::from_le_bytes(u64buf) as usize;
        let basis = Arc::new(SectorBasis::new(n, k)?);
        if basis.len() != len {
            return Err(Error::Dump(format!("length {len} does not match C({n},{k}) = {}", basis.len())));
        }
        let mut amps = Vec::with_capacity(len);
        let mut f = [0u8; 8];
        for _ in 0..len {
            r.read_exact(&mut f)?;
            let re = f64::from_le_bytes(f);
            r.read_exact(&mut f)?;
            amps.push(Complex64::new(re, f64::from_le_bytes(f)));
        }
        Ok(Self { basis, amps })
    }
}

/// Bit pattern of the checkerboard Néel state.
pub fn neel_bits(geometry: &ClusterGeometry) -> u64 {
    geometry.sites().iter().filter(|s| (s.x + s.y) % 2 == 1).fold(0u64, |acc, s| acc | (1u64 << s.id))
}

/// Derivative overlaps `2 Re⟨λ|G ψ⟩` for the generator `G` with
/// `dU/dθ = G U` of each gate family.
pub(crate) mod derivative {
    use super::*;

    /// REAL-XY: `G = A/2` with `A|01⟩ = −|10⟩`, `A|10⟩ = |01⟩`.
    pub fn xy(table: &PairTable, lambda: &SectorState, psi: &SectorState) -> f64 {
        table
            .pairs
            .iter()
            .map(|&(a, b)| {
                let (a, b) = (a as usize, b as usize);
                (lambda.amps[a].conj() * psi.amps[b] - lambda.amps[b].conj() * psi.amps[a]).re
            })
            .sum()
    }

    /// `G = −i Z_i Z_j`.
    pub fn zz(i: usize, j: usize, lambda: &SectorState, psi: &SectorState) -> f64 {
        let mask = (1u64 << i) | (1u64 << j);
        2.0 * lambda
            .amps
            .iter()
            .zip(&psi.amps)
            .zip(&psi.basis.states)
            .map(|((l, p), &s)| {
                let z = if (s & mask).count_ones() == 1 { -1.0 } else { 1.0 };
                z * (l.conj() * p).im
            })
            .sum::<f64>()
    }

    /// `G = −i Z_j`.
    pub fn z(j: usize, lambda: &SectorState, psi: &SectorState) -> f64 {
        2.0 * lambda
            .amps
            .iter()
            .zip(&psi.amps)
            .zip(&psi.basis.states)
            .map(|((l, p), &s)| z_sign(s, j) * (l.conj() * p).im)
            .sum::<f64>()
    }
}
