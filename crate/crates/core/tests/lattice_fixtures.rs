use std::collections::BTreeMap;

use qhmft::{BondKind, BondRange, ClusterGeometry};

type Terms = BTreeMap<(usize, usize), f64>;

fn terms(g: &ClusterGeometry, kind: BondKind, range: BondRange) -> Terms {
    g.bonds().filter(|b| b.kind == kind && b.range == range).map(|b| ((b.i, b.j), b.weight)).collect()
}

fn listing(pairs: &[(usize, usize, f64)], relabel: impl Fn(usize) -> usize) -> Terms {
    pairs
        .iter()
        .map(|&(a, b, w)| {
            let (i, j) = (relabel(a), relabel(b));
            ((i.min(j), i.max(j)), w)
        })
        .collect()
}

// The 2x2 energy is written on the ring 0-1-2-3; in row-major ids ring site 2
// is (1,1) = id 3 and ring site 3 is (0,1) = id 2.
fn ring(k: usize) -> usize {
    [0, 1, 3, 2][k]
}

#[test]
fn two_by_two_matches_ring_listing() {
    let g = ClusterGeometry::new(2).unwrap();
    let ring_nn = [(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (3, 0, 1.0)];
    let ring_nnn = [(0, 2, 1.0), (1, 3, 1.0)];
    assert_eq!(terms(&g, BondKind::Intra, BondRange::Nn), listing(&ring_nn, ring));
    assert_eq!(terms(&g, BondKind::Intra, BondRange::Nnn), listing(&ring_nnn, ring));
    assert_eq!(terms(&g, BondKind::Boundary, BondRange::Nn), listing(&ring_nn, ring));
    // diagonal pairs carry 3 J2
    let boundary_nnn = [(0, 2, 3.0), (1, 3, 3.0)];
    assert_eq!(terms(&g, BondKind::Boundary, BondRange::Nnn), listing(&boundary_nnn, ring));
}

#[test]
fn four_by_four_boundary_matches_listing() {
    let g = ClusterGeometry::new(4).unwrap();
    let nn = [(0, 12), (1, 13), (2, 14), (3, 15), (3, 0), (7, 4), (11, 8), (15, 12)];
    let nnn = [
        (0, 13),
        (1, 12),
        (1, 14),
        (2, 13),
        (2, 15),
        (3, 14),
        (3, 12),
        (0, 15),
        (3, 4),
        (7, 0),
        (7, 8),
        (11, 4),
        (11, 12),
        (15, 8),
    ];
    let unit = |p: &[(usize, usize)]| p.iter().map(|&(a, b)| (a, b, 1.0)).collect::<Vec<_>>();
    assert_eq!(terms(&g, BondKind::Boundary, BondRange::Nn), listing(&unit(&nn), |k| k));
    assert_eq!(terms(&g, BondKind::Boundary, BondRange::Nnn), listing(&unit(&nnn), |k| k));
}

#[test]
fn four_by_four_intra_bonds() {
    let g = ClusterGeometry::new(4).unwrap();
    let nn = terms(&g, BondKind::Intra, BondRange::Nn);
    let nnn = terms(&g, BondKind::Intra, BondRange::Nnn);
    assert_eq!((nn.len(), nnn.len()), (24, 18));
    for (i, j) in nn.keys() {
        let ((xi, yi), (xj, yj)) = (g.coord(*i), g.coord(*j));
        assert_eq!(xi.abs_diff(xj) + yi.abs_diff(yj), 1);
    }
    for (i, j) in nnn.keys() {
        let ((xi, yi), (xj, yj)) = (g.coord(*i), g.coord(*j));
        assert_eq!((xi.abs_diff(xj), yi.abs_diff(yj)), (1, 1));
    }
}

#[test]
fn boundary_weight_totals() {
    for l in [2usize, 4, 6, 8] {
        let g = ClusterGeometry::new(l).unwrap();
        let n = (l * l) as f64;
        let sum = |range| g.boundary_bonds().iter().filter(|b| b.range == range).map(|b| b.weight).sum::<f64>();
        let intra = |range| g.intra_bonds().iter().filter(|b| b.range == range).count() as f64;
        assert_eq!(intra(BondRange::Nn), (2 * l * (l - 1)) as f64);
        assert_eq!(intra(BondRange::Nnn), (2 * (l - 1) * (l - 1)) as f64);
        // 4N directed pairs per range, two per intra bond, halved weights
        assert_eq!(sum(BondRange::Nn), 2.0 * n - intra(BondRange::Nn));
        assert_eq!(sum(BondRange::Nnn), 2.0 * n - intra(BondRange::Nnn));
    }
}

#[test]
fn folding_examples() {
    let g2 = ClusterGeometry::new(2).unwrap();
    assert_eq!(g2.fold_external_site(2, 0).unwrap(), 0);
    let g4 = ClusterGeometry::new(4).unwrap();
    assert_eq!(g4.fold_external_site(-1, 0).unwrap(), 3);
    assert_eq!(g4.fold_external_site(4, 3).unwrap(), 12);
    assert!(g4.fold_external_site(9, 0).is_err());
    assert!(ClusterGeometry::new(3).is_err());
    assert!(ClusterGeometry::new(0).is_err());
}

#[test]
fn neel_signs_alternate_on_nn_bonds() {
    for l in [2usize, 4] {
        let g = ClusterGeometry::new(l).unwrap();
        let s = g.neel_sign();
        for b in g.bonds().filter(|b| b.range == BondRange::Nn) {
            assert_eq!(s[b.i], -s[b.j]);
        }
        for b in g.bonds().filter(|b| b.range == BondRange::Nnn) {
            assert_eq!(s[b.i], s[b.j]);
        }
    }
}

#[test]
fn json_dump_lists_every_bond() {
    let g = ClusterGeometry::new(4).unwrap();
    let v: serde_json::Value = serde_json::from_str(&g.to_json().unwrap()).unwrap();
    assert_eq!(v["intra_bonds"].as_array().unwrap().len(), 42);
    assert_eq!(v["boundary_bonds"].as_array().unwrap().len(), 22);
}
