//! Acceptance run: one PASS/FAIL line per criterion, tolerances pinned below.
//! Includes a full 4x4 sweep, so expect tens of minutes on one core.

use std::collections::BTreeMap;
use std::time::Instant;

use qhmft::ed_oracle::{self, ScfConfig};
use qhmft::sweep::{
    self, detect_transitions, make_grid, Directions, EnergyScale, SweepConfig, SweepOutcome, SweepRecord, Thresholds,
    TransitionKind, TransitionReport, VarianceConfig,
};
use qhmft::validate::{gradient_agreement, library_xy, oracle_duality, random_gate_run, singlet_error};
use qhmft::{CircuitSpec, Objective};

const ENERGY_MATCH: f64 = 1e-6;
const TRANSITION_2X2: f64 = 0.02;
const TRANSITION_4X4: f64 = 0.03;
const PARAMAGNET_MOMENT: f64 = 1e-3;
const DIMER_SYMMETRY: f64 = 1e-6;
const DIMER_MIN: f64 = 0.01;
const GATE_TOL: f64 = 1e-12;
const GRADIENT_TOL: f64 = 1e-5;
const ORACLE_TOL: f64 = 1e-10;
const BOUND_SLACK: f64 = 1e-9;

struct Outcome {
    id: usize,
    passed: bool,
    detail: String,
}

fn report(id: usize, passed: bool, detail: String, started: Instant) -> Outcome {
    let detail = format!("{detail} [{:.1} s]", started.elapsed().as_secs_f64());
    println!("criterion {id:>2}: {}  {detail}", if passed { "PASS" } else { "FAIL" });
    Outcome { id, passed, detail }
}

fn tied_sweep(step: f64) -> SweepOutcome {
    let config = SweepConfig { l: 2, m: 2, tied: true, step, directions: Directions::Both, ..SweepConfig::default() };
    sweep::run_sweep(&config, None).expect("2x2 sweep")
}

fn oracle_minimum(l: usize, grid: &[f64]) -> BTreeMap<i64, f64> {
    let records = ed_oracle::hmft_sweep(l, 1.0, grid, &ScfConfig::default(), &Directions::Both.list()).expect("oracle sweep");
    let mut out = BTreeMap::new();
    for r in records {
        let e = out.entry(key(r.j2)).or_insert(f64::INFINITY);
        *e = e.min(r.energy);
    }
    out
}

fn key(j2: f64) -> i64 {
    (j2 * 1e6).round() as i64
}

fn min_by_j2(records: &[SweepRecord]) -> BTreeMap<i64, &SweepRecord> {
    sweep::min_energy_curve(records).into_iter().map(|r| (key(r.j2), r)).collect()
}

fn near(report: &TransitionReport, kind: TransitionKind, at: f64, tol: f64) -> Option<f64> {
    report
        .of_kind(kind)
        .map(|t| t.location)
        .filter(|x| (x - at).abs() <= tol)
        .min_by(|a, b| (a - at).abs().total_cmp(&(b - at).abs()))
}

fn describe(report: &TransitionReport) -> String {
    report.transitions.iter().map(|t| format!("{:?}@{:.4}", t.kind, t.location)).collect::<Vec<_>>().join(", ")
}

/// Worst `E_qhmft − E_oracle` over every optimized point (negative is a violation).
fn bound_margin(records: &[SweepRecord], oracle: &BTreeMap<i64, f64>) -> (f64, usize) {
    let mut worst = f64::INFINITY;
    let mut skipped = 0;
    for r in records {
        if !r.energy.is_finite() {
            skipped += 1;
            continue;
        }
        worst = worst.min(r.energy - oracle[&key(r.j2)]);
    }
    (worst, skipped)
}

fn main() {
    let mut results = Vec::new();

    // 1: tied 2x2 equals the 2x2 reference on the 0.05 grid
    let t = Instant::now();
    let coarse = tied_sweep(0.05);
    let grid_coarse = make_grid(0.0, 1.0, 0.05);
    let oracle_coarse = oracle_minimum(2, &grid_coarse);
    let curve = min_by_j2(&coarse.records);
    let worst = grid_coarse.iter().map(|&j| (curve[&key(j)].energy - oracle_coarse[&key(j)]).abs()).fold(0.0, f64::max);
    let secs = t.elapsed().as_secs_f64();
    results.push(report(
        1,
        worst <= ENERGY_MATCH && secs < 300.0 && curve.len() == 21,
        format!("max |dE| = {worst:.2e} over {} points (tol {ENERGY_MATCH:e})", curve.len()),
        t,
    ));

    // 2: 2x2 transitions on the 0.01 grid
    let t = Instant::now();
    let fine = tied_sweep(0.01);
    let rep = detect_transitions(&fine.records, &Thresholds::default()).expect("detection");
    let c1 = near(&rep, TransitionKind::Continuous, 0.42, TRANSITION_2X2);
    let c2 = near(&rep, TransitionKind::FirstOrder, 0.68, TRANSITION_2X2);
    results.push(report(
        2,
        c1.is_some() && c2.is_some(),
        format!("found {}; want continuous 0.42 and first order 0.68 within {TRANSITION_2X2}", describe(&rep)),
        t,
    ));

    // 3: plaquette solid at J2 = 0.5
    let t = Instant::now();
    let (idx, _) = fine
        .records
        .iter()
        .enumerate()
        .filter(|(_, r)| key(r.j2) == key(0.5))
        .min_by(|a, b| a.1.energy.total_cmp(&b.1.energy))
        .expect("J2 = 0.5 on grid");
    let objective = Objective::build(2, 2, true, 0.5).unwrap();
    let energy = objective.energy(&fine.params[idx]).unwrap();
    let order = objective.order_parameters(&fine.params[idx]).unwrap();
    let moment = energy.mean_fields.iter().fold(0.0f64, |a, m| a.max(m.abs()));
    let moment = moment.max(order.m_neel).max(order.m_caf_x).max(order.m_caf_y);
    let asym = (order.d_x - order.d_y).abs();
    results.push(report(
        3,
        moment < PARAMAGNET_MOMENT && asym <= DIMER_SYMMETRY && order.d_x.abs() > DIMER_MIN,
        format!("max moment {moment:.2e}, D^x = {:.8}, D^y = {:.8}, |D^x - D^y| = {asym:.2e}", order.d_x, order.d_y),
        t,
    ));

    // 6: gate identities and random gate runs
    let t = Instant::now();
    let singlet = singlet_error(library_xy).unwrap();
    let mut gates: f64 = 0.0;
    for l in [2, 4] {
        let (diff, leak, norm) = random_gate_run(l, 1000, 2024, library_xy).unwrap();
        gates = gates.max(diff).max(leak).max(norm);
    }
    let gate_result = report(
        6,
        singlet <= GATE_TOL && gates <= GATE_TOL,
        format!("singlet error {singlet:.2e}, random-gate error {gates:.2e}"),
        t,
    );

    // 7: adjoint vs central differences, 20 vectors per configuration
    let t = Instant::now();
    let mut worst: f64 = 0.0;
    for l in [2, 4] {
        for m in [1, 2] {
            worst = worst.max(gradient_agreement(l, m, false, 0.55, 20, 77).unwrap());
        }
    }
    let gradient_result = report(7, worst <= GRADIENT_TOL, format!("worst relative error {worst:.2e}"), t);

    // 8: oracle against the dense full-space path
    let t = Instant::now();
    let mut gap: f64 = 0.0;
    let mut fixed: f64 = 0.0;
    for j2 in [0.0, 0.2, 0.5, 0.8, 1.0] {
        let (g, f) = oracle_duality(j2).unwrap();
        gap = gap.max(g);
        fixed = fixed.max(f);
    }
    let oracle_result =
        report(8, gap <= ORACLE_TOL && fixed <= ORACLE_TOL, format!("energy gap {gap:.2e}, fixed-point residual {fixed:.2e}"), t);

    // 5: gradient variance, paper ansatz sizes
    let t = Instant::now();
    let variance = |l: usize, tied: bool| {
        let cfg = VarianceConfig {
            l,
            m: 2,
            tied,
            n_samples: 100,
            seed: 0,
            scale: EnergyScale::PerCluster,
            ..VarianceConfig::default()
        };
        sweep::variance_study(&cfg).unwrap()
    };
    let (small, large) = (variance(2, true), variance(4, false));
    let mut ok = true;
    let mut parts = Vec::new();
    for (a, b) in small.iter().zip(&large) {
        let ratio = a.variance / b.variance;
        ok &= (0.1..=10.0).contains(&a.variance) && (1e-3..=1e-1).contains(&b.variance) && ratio >= 10.0;
        parts.push(format!("J2={}: {:.3} / {:.4} = {ratio:.1}", a.j2, a.variance, b.variance));
    }
    let variance_result = report(5, ok, parts.join("; "), t);

    // 10: parameter counts and depths
    let t = Instant::now();
    let big = CircuitSpec::new(4, 2, false).unwrap();
    let small_spec = CircuitSpec::new(2, 2, true).unwrap();
    let counts = (big.n_params(), big.depth(), small_spec.n_params(), small_spec.depth());
    let count_result = report(
        10,
        counts == (128, 18, 12, 10),
        format!("L=4 m=2: {}/{}, L=2 m=2 tied: {}/{}", counts.0, counts.1, counts.2, counts.3),
        t,
    );

    // 4: 4x4 sweep on the coarse grid
    let t = Instant::now();
    let config = SweepConfig { l: 4, m: 2, tied: false, step: 0.02, ..SweepConfig::default() };
    let big_sweep = sweep::run_sweep(&config, None).expect("4x4 sweep");
    let big_secs = t.elapsed().as_secs_f64();
    let rep4 = detect_transitions(&big_sweep.records, &Thresholds::default()).expect("detection");
    let f1 = near(&rep4, TransitionKind::FirstOrder, 0.44, TRANSITION_4X4);
    let f2 = near(&rep4, TransitionKind::FirstOrder, 0.64, TRANSITION_4X4);
    results.push(report(
        4,
        f1.is_some() && f2.is_some() && big_secs < 7200.0,
        format!("found {}; want first order 0.44 and 0.64 within {TRANSITION_4X4}", describe(&rep4)),
        t,
    ));
    results.push(variance_result);
    results.push(gate_result);
    results.push(gradient_result);
    results.push(oracle_result);

    // 9: variational bound over both full sweeps
    let t = Instant::now();
    let oracle_fine = oracle_minimum(2, &make_grid(0.0, 1.0, 0.01));
    let oracle_big = oracle_minimum(4, &config.grid().unwrap());
    let (m2, s2) = bound_margin(&fine.records, &oracle_fine);
    let (m4, s4) = bound_margin(&big_sweep.records, &oracle_big);
    results.push(report(
        9,
        m2 >= -BOUND_SLACK && m4 >= -BOUND_SLACK && s2 + s4 == 0,
        format!("min E - E_ref: 2x2 {m2:.2e}, 4x4 {m4:.2e}; failed points {}", s2 + s4),
        t,
    ));
    results.push(count_result);

    results.sort_by_key(|r| r.id);
    println!();
    for r in &results {
        println!("{:>2} {}  {}", r.id, if r.passed { "PASS" } else { "FAIL" }, r.detail);
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    println!("{}/{} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
