//! XY-ZZ-Z macro-layer circuits on an L×L cluster.
//!
//! One macro-layer applies REAL-XY gates to every nearest-neighbour dimer in
//! four columnar sublayers (x-dimers from even x, y-dimers from even y, then
//! the same patterns shifted by one site), repeats the four sublayers with
//! ZZ rotations, and ends with a Z rotation on every site. For L = 2 the
//! shifted sublayers are empty, so the depth is 5 per macro-layer instead
//! of 9.

use serde::{Deserialize, Serialize};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::statevector::{derivative, PairTable, SectorBasis, SectorState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateFamily {
    Xy,
    Zz,
    Z,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateSlot {
    pub family: GateFamily,
    /// One site for Z, two nearest neighbours otherwise.
    pub sites: Vec<usize>,
    /// Index into the flat slot-value vector.
    pub param_slot: usize,
    /// Depth position, counted over the whole circuit.
    pub layer_index: usize,
}

/// One parallel layer of a macro-layer: a gate family and its disjoint
/// site groups.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layer {
    pub family: GateFamily,
    pub gates: Vec<Vec<usize>>,
}

/// Ordered layer list of a single macro-layer.
pub fn build_macro_layer(l: usize) -> Result<Vec<Layer>> {
    if l == 0 || l % 2 != 0 {
        return Err(Error::InvalidClusterSize(l as i64));
    }
    let id = |x: usize, y: usize| y * l + x;
    // dimers ordered by (y, x) of the lower-left site
    let x_dimers = |x0: usize| -> Vec<Vec<usize>> {
        (0..l)
            .flat_map(|y| (x0..l.saturating_sub(1)).step_by(2).map(move |x| (x, y)))
            .map(|(x, y)| vec![id(x, y), id(x + 1, y)])
            .collect()
    };
    let y_dimers = |y0: usize| -> Vec<Vec<usize>> {
        (y0..l.saturating_sub(1))
            .step_by(2)
            .flat_map(|y| (0..l).map(move |x| (x, y)))
            .map(|(x, y)| vec![id(x, y), id(x, y + 1)])
            .collect()
    };
    let mut layers = Vec::new();
    for family in [GateFamily::Xy, GateFamily::Zz] {
        for gates in [x_dimers(0), y_dimers(0), x_dimers(1), y_dimers(1)] {
            if !gates.is_empty() {
                layers.push(Layer { family, gates });
            }
        }
    }
    layers.push(Layer { family: GateFamily::Z, gates: (0..l * l).map(|j| vec![j]).collect() });
    Ok(layers)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitSpec {
    l: usize,
    m: usize,
    tied: bool,
    slots: Vec<GateSlot>,
    depth: usize,
    /// Slot -> shared parameter class when tied.
    tie_map: Option<Vec<usize>>,
    n_params: usize,
}

impl CircuitSpec {
    /// `m` macro-layers with independent parameters. Tied mode (L = 2 only)
    /// shares one parameter across the XY gates and one across the ZZ gates
    /// of each macro-layer, keeping the Z rotations independent.
    pub fn new(l: usize, m: usize, tied: bool) -> Result<Self> {
        if m == 0 {
            return Err(Error::Config("at least one macro-layer is required".into()));
        }
        if tied && l != 2 {
            return Err(Error::TiedUnsupported(l));
        }
        let macro_layer = build_macro_layer(l)?;
        let per_macro = macro_layer.len();
        let mut slots = Vec::new();
        let mut tie_map = Vec::new();
        let mut classes = 0;
        for rep in 0..m {
            let (mut xy_class, mut zz_class) = (None, None);
            for (li, layer) in macro_layer.iter().enumerate() {
                for sites in &layer.gates {
                    let class = match layer.family {
                        GateFamily::Xy => *xy_class.get_or_insert_with(|| {
                            classes += 1;
                            classes - 1
                        }),
                        GateFamily::Zz => *zz_class.get_or_insert_with(|| {
                            classes += 1;
                            classes - 1
                        }),
                        GateFamily::Z => {
                            classes += 1;
                            classes - 1
                        }
                    };
                    tie_map.push(class);
                    slots.push(GateSlot {
                        family: layer.family,
                        sites: sites.clone(),
                        param_slot: slots.len(),
                        layer_index: rep * per_macro + li,
                    });
                }
            }
        }
        let (tie_map, n_params) = if tied { (Some(tie_map), classes) } else { (None, slots.len()) };
        Ok(Self { l, m, tied, slots, depth: per_macro * m, tie_map, n_params })
    }

    pub fn side(&self) -> usize {
        self.l
    }

    pub fn macro_layers(&self) -> usize {
        self.m
    }

    pub fn is_tied(&self) -> bool {
        self.tied
    }

    pub fn slots(&self) -> &[GateSlot] {
        &self.slots
    }

    pub fn n_slots(&self) -> usize {
        self.slots.len()
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn tie_map(&self) -> Option<&[usize]> {
        self.tie_map.as_deref()
    }

    pub fn check_params(&self, params: &[f64]) -> Result<()> {
        if params.len() != self.n_params {
            return Err(Error::ParameterLength { expected: self.n_params, got: params.len() });
        }
        Ok(())
    }

    /// Per-slot angles for a parameter vector.
    pub fn expand(&self, params: &[f64]) -> Result<Vec<f64>> {
        self.check_params(params)?;
        Ok(match &self.tie_map {
            Some(map) => map.iter().map(|&c| params[c]).collect(),
            None => params.to_vec(),
        })
    }

    /// Sums slot gradients into parameter gradients (chain rule through the
    /// tie map).
    pub fn reduce_gradient(&self, slot_grad: &[f64]) -> Vec<f64> {
        match &self.tie_map {
            Some(map) => {
                let mut g = vec![0.0; self.n_params];
                for (&c, &v) in map.iter().zip(slot_grad) {
                    g[c] += v;
                }
                g
            }
            None => slot_grad.to_vec(),
        }
    }

    /// Slots grouped by `layer_index`.
    pub fn layers(&self) -> Vec<Vec<&GateSlot>> {
        let mut out: Vec<Vec<&GateSlot>> = vec![Vec::new(); self.depth];
        for s in &self.slots {
            out[s.layer_index].push(s);
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn compile(&self, basis: Arc<SectorBasis>) -> Result<CompiledCircuit> {
        if basis.n_qubits() != self.l * self.l {
            return Err(Error::SectorMismatch {
                n: self.l * self.l,
                k: basis.weight(),
                got_n: basis.n_qubits(),
                got_k: basis.weight(),
            });
        }
        let kernels = self
            .slots
            .iter()
            .map(|s| {
                Ok(match s.family {
                    GateFamily::Xy => Kernel::Xy(basis.pair_table(s.sites[0], s.sites[1])?),
                    GateFamily::Zz => Kernel::Zz(s.sites[0], s.sites[1]),
                    GateFamily::Z => Kernel::Z(s.sites[0]),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(CompiledCircuit { spec: self.clone(), basis, kernels })
    }
}

#[derive(Debug, Clone)]
enum Kernel {
    Xy(PairTable),
    Zz(usize, usize),
    Z(usize),
}

impl Kernel {
    fn apply(&self, state: &mut SectorState, theta: f64) {
        match self {
            Kernel::Xy(t) => state.apply_xy_table(t, theta),
            Kernel::Zz(i, j) => state.apply_zz_unchecked(*i, *j, theta),
            Kernel::Z(j) => state.apply_z_unchecked(*j, theta),
        }
    }

    fn derivative_overlap(&self, lambda: &SectorState, psi: &SectorState) -> f64 {
        match self {
            Kernel::Xy(t) => derivative::xy(t, lambda, psi),
            Kernel::Zz(i, j) => derivative::zz(*i, *j, lambda, psi),
            Kernel::Z(j) => derivative::z(*j, lambda, psi),
        }
    }
}

/// A circuit bound to a sector basis with its pair tables precomputed.
#[derive(Debug, Clone)]
pub struct CompiledCircuit {
    spec: CircuitSpec,
    basis: Arc<SectorBasis>,
    kernels: Vec<Kernel>,
}

impl CompiledCircuit {
    pub fn spec(&self) -> &CircuitSpec {
        &self.spec
    }

    pub fn basis(&self) -> &Arc<SectorBasis> {
        &self.basis
    }

    fn check_state(&self, state: &SectorState) -> Result<()> {
        let b = state.basis();
        if b.n_qubits() != self.basis.n_qubits() || b.weight() != self.basis.weight() {
            return Err(Error::SectorMismatch {
                n: self.basis.n_qubits(),
                k: self.basis.weight(),
                got_n: b.n_qubits(),
                got_k: b.weight(),
            });
        }
        Ok(())
    }

    pub fn apply(&self, params: &[f64], state: &mut SectorState) -> Result<()> {
        self.check_state(state)?;
        let angles = self.spec.expand(params)?;
        self.apply_slots(&angles, state);
        Ok(())
    }

    pub(crate) fn apply_slots(&self, angles: &[f64], state: &mut SectorState) {
        for (k, &t) in self.kernels.iter().zip(angles) {
            k.apply(state, t);
        }
    }

    /// Conjugate-transposed gates in reverse order.
    pub fn apply_inverse(&self, params: &[f64], state: &mut SectorState) -> Result<()> {
        self.check_state(state)?;
        let angles = self.spec.expand(params)?;
        for (k, &t) in self.kernels.iter().zip(&angles).rev() {
            k.apply(state, -t);
        }
        Ok(())
    }

    /// Adjoint sweep. On entry `psi` is the circuit output and `lambda` is
    /// `H psi` for the (Hermitian) operator being differentiated; returns
    /// `d⟨psi|H|psi⟩/dθ` per slot. Both buffers are consumed.
    pub(crate) fn adjoint_slot_gradient(&self, angles: &[f64], psi: &mut SectorState, lambda: &mut SectorState) -> Vec<f64> {
        let mut grad = vec![0.0; self.kernels.len()];
        for (k, (kernel, &t)) in self.kernels.iter().zip(angles).enumerate().rev() {
            grad[k] = kernel.derivative_overlap(lambda, psi);
            kernel.apply(psi, -t);
            kernel.apply(lambda, -t);
        }
        grad
    }
}

/// Applies a circuit to a state, compiling it against the state's basis.
pub fn apply_circuit(spec: &CircuitSpec, params: &[f64], state: &mut SectorState) -> Result<()> {
    spec.compile(state.basis().clone())?.apply(params, state)
}

pub fn apply_inverse(spec: &CircuitSpec, params: &[f64], state: &mut SectorState) -> Result<()> {
    spec.compile(state.basis().clone())?.apply_inverse(params, state)
}
