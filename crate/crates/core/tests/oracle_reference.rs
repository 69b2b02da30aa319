use std::sync::Arc;

use qhmft::ed_oracle::{
    self, build_hamiltonian, lowest_eigenpair_dense, lowest_eigenpair_lanczos, EigenConfig, FieldPattern, ScfConfig,
};
use qhmft::sweep::{detect_transitions, make_grid, Direction, Thresholds, TransitionKind};
use qhmft::validate::{dense_full_space_energy, oracle_duality};
use qhmft::{ClusterGeometry, ModelParams};
use rand::{Rng, SeedableRng};

fn geometry(l: usize) -> Arc<ClusterGeometry> {
    Arc::new(ClusterGeometry::new(l).unwrap())
}

fn hmft(l: usize, j2: f64, seeds: Vec<FieldPattern>) -> ed_oracle::ScfSolution {
    let cfg = ScfConfig { seeds, ..ScfConfig::default() };
    ed_oracle::self_consistent_hmft(geometry(l), ModelParams::j2(j2).unwrap(), &cfg, None).unwrap().best
}

// Values from a separate scipy implementation (explicit neighbour sums,
// its own sector enumeration and damped fixed-point loop).
#[test]
fn two_by_two_energies_match_independent_solver() {
    let cases = [
        (0.0, FieldPattern::Neel, -0.584053384021),
        (0.3, FieldPattern::Neel, -0.473924768558),
        (0.5, FieldPattern::Zero, -0.4375),
        (0.8, FieldPattern::Caf, -0.464626363293),
        (1.0, FieldPattern::Caf, -0.562657899738),
    ];
    for (j2, seed, want) in cases {
        let s = hmft(2, j2, vec![seed]);
        assert!(s.converged);
        assert!((s.energy - want).abs() < 1e-11, "J2={j2}: {} vs {want}", s.energy);
    }
}

#[test]
fn four_by_four_energies_match_independent_solver() {
    let cases = [
        (0.0, FieldPattern::Neel, -0.624399843346),
        (0.45, FieldPattern::Zero, -0.478339720076),
        (0.8, FieldPattern::Caf, -0.508889284862),
    ];
    for (j2, seed, want) in cases {
        let s = hmft(4, j2, vec![seed]);
        assert!(s.converged);
        assert!((s.energy - want).abs() < 1e-10, "J2={j2}: {} vs {want}", s.energy);
    }
}

#[test]
fn sector_energy_matches_dense_full_space_at_arbitrary_fields() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10 {
        let j2 = rng.gen_range(0.0..1.0);
        let m: Vec<f64> = (0..4).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let model = ModelParams::j2(j2).unwrap();
        let h = build_hamiltonian(geometry(2), model, &m).unwrap();
        let pair = lowest_eigenpair_dense(&h);
        let (e_intra, e_mf, _) = ed_oracle::assemble_energy(&h, &pair.vector);
        let e = e_intra + e_mf;
        let (dense, _) = dense_full_space_energy(2, &model, &m).unwrap();
        assert!((e - dense).abs() < 1e-10, "{e} vs {dense}");
    }
}

#[test]
fn converged_fields_are_fixed_points() {
    for j2 in [0.0, 0.2, 0.35, 0.5, 0.75, 1.0] {
        let (energy_gap, residual) = oracle_duality(j2).unwrap();
        assert!(energy_gap <= 1e-10 && residual <= 1e-10, "J2={j2}: {energy_gap:e} {residual:e}");
    }
}

#[test]
fn lanczos_agrees_with_dense_solver() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    let m: Vec<f64> = (0..4).map(|_| rng.gen_range(-0.5..0.5)).collect();
    let h = build_hamiltonian(geometry(2), ModelParams::j2(0.6).unwrap(), &m).unwrap();
    let dense = lowest_eigenpair_dense(&h);
    let lanczos = lowest_eigenpair_lanczos(&h, None, &EigenConfig::default()).unwrap();
    assert!((dense.value - lanczos.value).abs() < 1e-10);

    let neel = FieldPattern::Neel.fields(&geometry(4));
    let h4 = build_hamiltonian(geometry(4), ModelParams::j2(0.3).unwrap(), &neel).unwrap();
    let l4 = lowest_eigenpair_lanczos(&h4, None, &EigenConfig::default()).unwrap();
    assert!(l4.residual <= 1e-8);
    assert_eq!(h4.dim(), 12870);
}

#[test]
fn two_by_two_reference_phase_diagram() {
    let grid = make_grid(0.0, 1.0, 0.01);
    let records = ed_oracle::hmft_sweep(2, 1.0, &grid, &ScfConfig::default(), &[Direction::Up, Direction::Down]).unwrap();
    let report = detect_transitions(&records, &Thresholds::default()).unwrap();
    let cont: Vec<_> = report.of_kind(TransitionKind::Continuous).collect();
    let first: Vec<_> = report.of_kind(TransitionKind::FirstOrder).collect();
    assert_eq!((cont.len(), first.len()), (1, 1), "{report:?}");
    assert!((cont[0].location - 0.42).abs() <= 0.02, "{:?}", cont[0]);
    assert!((first[0].location - 0.68).abs() <= 0.02, "{:?}", first[0]);
}
