//! L×L cluster geometry for the square-lattice J1-J2 model.
//!
//! Sites are numbered row-major from the bottom-left corner, `id = y*L + x`.
//! Bonds that leave the cluster are folded back onto the cluster site they
//! are equivalent to under the uniform tiling. Their weights already include
//! the 1/2 double-counting factor of the embedded energy, so an energy
//! evaluator only needs a plain weighted sum over `boundary_bonds`.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::error::{Error, Result};

const NN_OFFSETS: [(i64, i64); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];
const NNN_OFFSETS: [(i64, i64); 4] = [(1, 1), (1, -1), (-1, 1), (-1, -1)];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Site {
    pub id: usize,
    pub x: usize,
    pub y: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BondKind {
    Intra,
    Boundary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BondRange {
    Nn,
    Nnn,
}

/// A pair of cluster sites with `i < j`.
///
/// For boundary bonds the weight counts the inter-cluster pairs that fold
/// onto `(i, j)`, times 1/2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bond {
    pub i: usize,
    pub j: usize,
    pub kind: BondKind,
    pub range: BondRange,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterGeometry {
    l: usize,
    sites: Vec<Site>,
    intra_bonds: Vec<Bond>,
    boundary_bonds: Vec<Bond>,
    neel_sign: Vec<i8>,
}

impl ClusterGeometry {
    pub fn new(l: usize) -> Result<Self> {
        if l == 0 || l % 2 != 0 {
            return Err(Error::InvalidClusterSize(l as i64));
        }
        let n = l * l;
        let sites: Vec<Site> = (0..n).map(|id| Site { id, x: id % l, y: id / l }).collect();

        let mut intra = Vec::new();
        // (range, i, j) -> number of directed external pairs
        let mut folded: BTreeMap<(BondRange, usize, usize), usize> = BTreeMap::new();
        for site in &sites {
            for (range, offsets) in [(BondRange::Nn, &NN_OFFSETS), (BondRange::Nnn, &NNN_OFFSETS)] {
                for &(dx, dy) in offsets {
                    let (x, y) = (site.x as i64 + dx, site.y as i64 + dy);
                    let inside = (0..l as i64).contains(&x) && (0..l as i64).contains(&y);
                    if inside {
                        let j = y as usize * l + x as usize;
                        if site.id < j {
                            intra.push(Bond { i: site.id, j, kind: BondKind::Intra, range, weight: 1.0 });
                        }
                    } else {
                        let j = fold(l, x, y);
                        let key = (range, site.id.min(j), site.id.max(j));
                        *folded.entry(key).or_default() += 1;
                    }
                }
            }
        }
        let boundary = folded
            .into_iter()
            .map(|((range, i, j), count)| Bond { i, j, kind: BondKind::Boundary, range, weight: 0.5 * count as f64 })
            .collect();

        let neel_sign = sites.iter().map(|s| if (s.x + s.y) % 2 == 0 { 1 } else { -1 }).collect();

        let mut geometry = Self { l, sites, intra_bonds: intra, boundary_bonds: boundary, neel_sign };
        let key = |b: &Bond| (b.kind, b.range, b.i, b.j);
        geometry.intra_bonds.sort_by_key(key);
        geometry.boundary_bonds.sort_by_key(key);
        Ok(geometry)
    }

    pub fn side(&self) -> usize {
        self.l
    }

    pub fn n_sites(&self) -> usize {
        self.sites.len()
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn site_id(&self, x: usize, y: usize) -> Option<usize> {
        (x < self.l && y < self.l).then_some(y * self.l + x)
    }

    pub fn coord(&self, id: usize) -> (usize, usize) {
        let s = self.sites[id];
        (s.x, s.y)
    }

    pub fn intra_bonds(&self) -> &[Bond] {
        &self.intra_bonds
    }

    pub fn boundary_bonds(&self) -> &[Bond] {
        &self.boundary_bonds
    }

    pub fn bonds(&self) -> impl Iterator<Item = &Bond> {
        self.intra_bonds.iter().chain(&self.boundary_bonds)
    }

    /// `(-1)^(x+y)` per site.
    pub fn neel_sign(&self) -> &[i8] {
        &self.neel_sign
    }

    /// Image inside the cluster of a site at most one superlattice vector
    /// away, i.e. both coordinates in `[-L, 2L)`.
    pub fn fold_external_site(&self, x: i64, y: i64) -> Result<usize> {
        let l = self.l as i64;
        let reach = -l..2 * l;
        if !reach.contains(&x) || !reach.contains(&y) {
            return Err(Error::UnreachableSite { x, y, l: self.l });
        }
        Ok(fold(self.l, x, y))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn fold(l: usize, x: i64, y: i64) -> usize {
    let l = l as i64;
    (y.rem_euclid(l) * l + x.rem_euclid(l)) as usize
}
