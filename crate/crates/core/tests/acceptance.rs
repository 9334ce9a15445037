//! Acceptance suite: every criterion below runs against the embedded
//! benchmark cases at default resolution (h = 1e-3, x_max = 30, tol = 1e-8)
//! and prints one pass/fail line.
//!
//! Run with `cargo test -p divbarrier --test acceptance -- --nocapture` to
//! see the per-criterion lines.

use std::sync::LazyLock;
use std::time::Instant;

use divbarrier::golden::{self, GoldenCase};
use divbarrier::simulator::{estimate_value, SimConfig};
use divbarrier::solver::{solve, SolveResult, SolverConfig};
use divbarrier::valuefn::Grid;
use divbarrier::verifier::{
    check_concavity_2order, check_exit_slope_identity, check_hjb, check_ordering, check_smooth_fit,
    check_time_ordering, check_value_upper_bound, Tolerances,
};

/// All seven benchmark cases solved once at default resolution.
static SOLVED: LazyLock<Vec<(&'static GoldenCase, SolveResult)>> = LazyLock::new(|| {
    golden::CASES
        .iter()
        .map(|case| {
            let result = solve(&case.model(), &SolverConfig::default())
                .unwrap_or_else(|e| panic!("case {} failed to solve: {e}", case.id));
            (case, result)
        })
        .collect()
});

fn solved(id: u8) -> &'static (&'static GoldenCase, SolveResult) {
    SOLVED.iter().find(|(c, _)| c.id == id).unwrap()
}

fn threads() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn report(criterion: &str, pass: bool, detail: &str) {
    println!(
        "criterion {criterion}: {} — {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {criterion} failed: {detail}");
}

fn barrier_errors(case: &GoldenCase, result: &SolveResult) -> Vec<f64> {
    result
        .barriers
        .iter()
        .zip(case.expected_barriers)
        .map(|(b, e)| (b - e).abs())
        .collect()
}

#[test]
fn criterion_01_two_phase_distinct_barriers_and_runtime() {
    // Fresh solve so the elapsed time is not hidden by the shared cache.
    let case = golden::case(1).unwrap();
    let start = Instant::now();
    let result = solve(&case.model(), &SolverConfig::default()).unwrap();
    let elapsed = start.elapsed();
    let errs = barrier_errors(case, &result);
    let pass = errs.iter().all(|&e| e <= case.barrier_tolerance) && elapsed.as_secs_f64() < 30.0;
    report(
        "1 (case 1 barriers ±0.02, runtime < 30 s)",
        pass,
        &format!(
            "b = {:?}, errors {:?}, elapsed {:.2?}",
            result.barriers, errs, elapsed
        ),
    );
}

#[test]
fn criterion_02_equal_exit_rates_give_equal_barriers_and_values() {
    let (case, result) = solved(2);
    let errs = barrier_errors(case, result);
    let gap = result.values[0].sup_norm_diff(&result.values[1]).unwrap();
    let pass = errs.iter().all(|&e| e <= case.barrier_tolerance) && gap <= 1e-4;
    report(
        "2 (case 2 barriers ±0.02, |V₁-V₂| ≤ 1e-4)",
        pass,
        &format!("b = {:?}, sup |V₁-V₂| = {gap:.3e}", result.barriers),
    );
}

#[test]
fn criterion_03_remaining_tables_reproduce() {
    let mut detail = String::new();
    let mut pass = true;
    for id in 3..=7u8 {
        let (case, result) = solved(id);
        let errs = barrier_errors(case, result);
        let worst = errs.iter().cloned().fold(0.0f64, f64::max);
        pass &= worst <= case.barrier_tolerance;
        detail.push_str(&format!("case {id}: worst error {worst:.4}; "));
    }
    // Case 7 additionally has all four value functions identical.
    let (_, seven) = solved(7);
    let mut vgap = 0.0f64;
    for i in 1..4 {
        vgap = vgap.max(seven.values[0].sup_norm_diff(&seven.values[i]).unwrap());
    }
    pass &= vgap <= 1e-4;
    detail.push_str(&format!("case 7 value spread {vgap:.3e}"));
    report("3 (cases 3-7 barriers ±0.02)", pass, &detail);
}

#[test]
fn criterion_04_monotone_iterates() {
    let mut worst = f64::INFINITY;
    for (_, result) in SOLVED.iter() {
        worst = worst.min(result.min_iterate_gap);
    }
    report(
        "4 (V⁽ᵏ⁾ ≥ V⁽ᵏ⁻¹⁾ - 1e-12 pointwise, every case)",
        worst >= -1e-12,
        &format!("most negative pointwise step {worst:.3e}"),
    );
}

#[test]
fn criterion_05_smooth_fit_and_curvature() {
    let tol = Tolerances::default();
    let mut pass = true;
    let mut worst_slope = 0.0f64;
    let mut worst_curv = 0.0f64;
    for (case, result) in SOLVED.iter() {
        let slope = check_smooth_fit(&case.model(), result, &tol);
        let curv = divbarrier::verifier::check_barrier_curvature(&case.model(), result, &tol);
        pass &= !slope.failed() && !curv.failed();
        worst_slope = worst_slope.max(slope.measured.unwrap_or(0.0));
        worst_curv = worst_curv.max(curv.measured.unwrap_or(0.0));
    }
    report(
        "5 (|V'(b)-1| ≤ 5e-3 and second difference at b ≤ 1e-3·h)",
        pass,
        &format!("worst slope gap {worst_slope:.3e}, worst curvature {worst_curv:.3e}"),
    );
}

#[test]
fn criterion_06_hjb_inequalities() {
    let tol = Tolerances::default();
    let mut pass = true;
    let mut worst_in = 0.0f64;
    let mut worst_above = f64::NEG_INFINITY;
    for (case, result) in SOLVED.iter() {
        let (interior, above) = check_hjb(&case.model(), result, &tol);
        pass &= !interior.failed() && !above.failed();
        worst_in = worst_in.max(interior.measured.unwrap_or(0.0));
        worst_above = worst_above.max(above.measured.unwrap_or(f64::NEG_INFINITY));
    }
    report(
        "6 (HJB residual 0 ± 1e-4·scale below b, ≤ 1e-4 above)",
        pass,
        &format!(
            "worst |residual|/scale {worst_in:.3e} below, worst residual {worst_above:.3e} above"
        ),
    );
}

#[test]
fn criterion_07_ordering_suite() {
    let tol = Tolerances::default();
    let mut pass = true;
    let mut lines = Vec::new();
    for (case, result) in SOLVED.iter() {
        let model = case.model();
        let checks = [
            check_ordering(&model, result, &tol),
            check_time_ordering(&model, result, &tol),
            check_exit_slope_identity(&model, result, &tol),
            check_concavity_2order(&model, result, &tol),
        ];
        for check in &checks {
            pass &= !check.failed();
        }
        lines.push(format!(
            "case {}: {}",
            case.id,
            checks
                .iter()
                .map(|c| format!("{}={:?}", c.name, !c.failed()))
                .collect::<Vec<_>>()
                .join(" ")
        ));
    }
    report(
        "7 (ordering, time ordering, claim-slope identity, concavity)",
        pass,
        &lines.join("; "),
    );
}

#[test]
fn criterion_08_monte_carlo_oracle_equivalence() {
    let mut pass = true;
    let mut detail = String::new();
    for id in [1u8, 5] {
        let (case, result) = solved(id);
        let model = case.model();
        let b_max = result
            .barriers
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        for x0 in [0.0, 5.0, b_max] {
            let cfg = SimConfig::new(100_000, 200.0, 0x5eed + id as u64).with_threads(threads());
            let est = estimate_value(&model, &result.barriers, x0, 0, &cfg);
            assert!(est.truncation_bound < 1e-4);
            let reference = result.values[0].eval(x0).unwrap();
            let gap = (est.mean - reference).abs();
            let budget = 3.0 * est.stderr + est.truncation_bound;
            pass &= gap <= budget;
            detail.push_str(&format!(
                "case {id} x₀={x0:.3}: MC {:.4}±{:.4} vs solver {reference:.4} (gap {gap:.4} ≤ {budget:.4}); ",
                est.mean, est.stderr
            ));
        }
    }
    report(
        "8 (MC mean within 3σ + truncation of solver value)",
        pass,
        &detail,
    );
}

#[test]
fn criterion_09_grid_refinement_stability() {
    let case = golden::case(1).unwrap();
    let (_, coarse) = solved(1);
    let h = coarse.grid().spacing();
    let fine_cfg = SolverConfig {
        grid: Grid::from_spacing(30.0, h / 2.0).unwrap(),
        ..SolverConfig::default()
    };
    let fine = solve(&case.model(), &fine_cfg).unwrap();
    let shifts: Vec<f64> = coarse
        .barriers
        .iter()
        .zip(&fine.barriers)
        .map(|(a, b)| (a - b).abs())
        .collect();
    let pass = shifts.iter().all(|&s| s <= 2.0 * h);
    report(
        "9 (halving h moves barriers by ≤ 2h)",
        pass,
        &format!("shifts {shifts:?} vs bound {:.1e}", 2.0 * h),
    );
}

#[test]
fn criterion_10_global_value_bound() {
    let tol = Tolerances::default();
    let mut pass = true;
    let mut worst = f64::NEG_INFINITY;
    for (case, result) in SOLVED.iter() {
        let check = check_value_upper_bound(&case.model(), result, &tol);
        pass &= !check.failed();
        worst = worst.max(check.measured.unwrap());
    }
    report(
        "10 (V_i(x) ≤ x + c/δ on every grid)",
        pass,
        &format!("worst V - x - c/δ = {worst:.3e}"),
    );
}

/// Supporting property (not a numbered criterion): the solver's barriers
/// beat a perturbed barrier vector in simulation, up to sampling noise.
#[test]
fn local_optimality_against_perturbed_barriers() {
    let (case, result) = solved(1);
    let model = case.model();
    let cfg = SimConfig::new(100_000, 200.0, 0xbadb).with_threads(threads());
    let optimal = estimate_value(&model, &result.barriers, 5.0, 0, &cfg);
    let mut pass = true;
    let mut detail = format!("optimal {:.4}±{:.4}", optimal.mean, optimal.stderr);
    for bump in [-0.5, 0.5] {
        let mut perturbed = result.barriers.clone();
        perturbed[1] += bump;
        let est = estimate_value(&model, &perturbed, 5.0, 0, &cfg);
        pass &= optimal.mean >= est.mean - 3.0 * (optimal.stderr + est.stderr);
        detail.push_str(&format!(", b₂{bump:+}: {:.4}±{:.4}", est.mean, est.stderr));
    }
    report(
        "extra (local optimality vs ±0.5 barrier shifts)",
        pass,
        &detail,
    );
}
