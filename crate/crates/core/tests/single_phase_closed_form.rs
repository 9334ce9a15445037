//! Independent oracle for the whole solver path: with a single environment
//! phase the model reduces to the classical compound-Poisson surplus with
//! exponential claims, whose optimal barrier and value function are known in
//! closed form. The value below the barrier is `A(e^{rx} - κ e^{sx})` where
//! `r > 0 > s` solve `c ξ² + (cβ - λ - δ) ξ - δβ = 0`,
//! `κ = (cr - λ - δ)/(cs - λ - δ)` comes from the boundary condition
//! `c f'(0) = (λ + δ) f(0)`, the barrier makes the curvature vanish,
//! `e^{(r-s)b} = κ s²/r²`, and the scale is fixed by `f'(b) = 1`.

use divbarrier::phase_type::PhaseTypeModel;
use divbarrier::solver::{solve, RiskModel, SolverConfig};

struct ClosedForm {
    r: f64,
    s: f64,
    kappa: f64,
    scale: f64,
    barrier: f64,
}

impl ClosedForm {
    fn new(c: f64, lambda: f64, beta: f64, delta: f64) -> Self {
        let a1 = c * beta - lambda - delta;
        let disc = (a1 * a1 + 4.0 * c * delta * beta).sqrt();
        let r = (-a1 + disc) / (2.0 * c);
        let s = (-a1 - disc) / (2.0 * c);
        let kappa = (c * r - lambda - delta) / (c * s - lambda - delta);
        let barrier = (kappa * s * s / (r * r)).ln() / (r - s);
        let scale = 1.0 / (r * (r * barrier).exp() - kappa * s * (s * barrier).exp());
        Self {
            r,
            s,
            kappa,
            scale,
            barrier,
        }
    }

    fn value(&self, x: f64) -> f64 {
        let y = x.min(self.barrier);
        let below = self.scale * ((self.r * y).exp() - self.kappa * (self.s * y).exp());
        below + (x - y)
    }
}

#[test]
fn closed_form_is_self_consistent() {
    // λ = 10, c = 15, β = 1, δ = 0.1 gives r = 0.019271278997364503,
    // s = -0.34593794566403117, b* = 14.598881325079432.
    let cf = ClosedForm::new(15.0, 10.0, 1.0, 0.1);
    assert!((cf.r - 0.019_271_278_997_364_5).abs() < 1e-15);
    assert!((cf.s + 0.345_937_945_664_031_2).abs() < 1e-15);
    assert!((cf.barrier - 14.598_881_325_079_43).abs() < 1e-10);
    // Boundary identity c f'(0) = (λ+δ) f(0).
    let h = 1e-6;
    let fp0 = (cf.value(h) - cf.value(0.0)) / h;
    assert!((15.0 * fp0 - 10.1 * cf.value(0.0)).abs() < 1e-3);
    // Smooth fit at the barrier.
    let fpb = (cf.value(cf.barrier) - cf.value(cf.barrier - h)) / h;
    assert!((fpb - 1.0).abs() < 1e-6);
}

#[test]
fn solver_matches_single_phase_closed_form() {
    let (c, lambda, beta, delta) = (15.0, 10.0, 1.0, 0.1);
    let cf = ClosedForm::new(c, lambda, beta, delta);

    let env = PhaseTypeModel::validate(&[vec![-lambda]], &[1.0]).unwrap();
    let model = RiskModel::new(c, delta, beta, env).unwrap();
    let cfg = SolverConfig::default();
    let result = solve(&model, &cfg).unwrap();

    let h = cfg.grid.spacing();
    assert!(
        (result.barriers[0] - cf.barrier).abs() <= 2.0 * h,
        "barrier {} vs closed form {}",
        result.barriers[0],
        cf.barrier
    );

    // Frozen closed-form values: f(0) = 13.292719825482318,
    // f(2) = 26.638507598818727, f(5) = 36.629801199053293,
    // f(10) = 44.235096243286124.
    for (x, expect) in [
        (0.0, 13.292_719_825_482_318),
        (2.0, 26.638_507_598_818_727),
        (5.0, 36.629_801_199_053_29),
        (10.0, 44.235_096_243_286_12),
    ] {
        let got = result.values[0].eval(x).unwrap();
        assert!(
            (got - expect).abs() < 5e-3,
            "V({x}) = {got} vs closed form {expect}"
        );
    }
}
