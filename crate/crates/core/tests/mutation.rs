use qhmft::validate::{library_xy, run_suite_with, singlet_error};
use qhmft::{Result, SectorState};

// XY kernel with the rotation sense reversed
fn flipped_xy(state: &mut SectorState, i: usize, j: usize, theta: f64) -> Result<()> {
    state.apply_xy(i, j, -theta)
}

#[test]
fn library_kernel_produces_the_singlet() {
    assert!(singlet_error(library_xy).unwrap() <= 1e-12);
}

#[test]
fn sign_flipped_xy_fails_the_singlet_check() {
    assert!(singlet_error(flipped_xy).unwrap() > 0.5);
    let results = run_suite_with(flipped_xy);
    let singlet = results.iter().find(|r| r.name == "xy_singlet").unwrap();
    assert!(!singlet.passed, "{singlet:?}");
    let gates = results.iter().find(|r| r.name == "random_gates_2x2").unwrap();
    assert!(!gates.passed, "{gates:?}");
}
