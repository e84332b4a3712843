//! The spectral representation, the L1 stepper and the Laplace-domain resolvent
//! describe one solution; these tests check them against each other on a coarse
//! interval where all three are cheap.

use caputo_core::domain::{assemble, build_domain, CoefficientField, CoefficientSpec, DiscreteOperator, DomainSpec};
use caputo_core::input::{build_schedule, ExcitationSchedule, ScheduleSpec, SourceProfile};
use caputo_core::laplace::{weak_solution_residual, ResidualInputs};
use caputo_core::spectral::{eigensolve_shared, forward_dirichlet, forward_dirichlet_fields, Components, SpectralDecomposition, TimeTrace};
use caputo_core::stepper::{step_solve, StepperInputs, SteppingPlan};
use std::sync::Arc;

fn setup(cells: usize) -> (Arc<DiscreteOperator>, SpectralDecomposition) {
    let d = build_domain(&DomainSpec::interval(cells)).unwrap();
    let c = CoefficientField::sample(&d, &CoefficientSpec::default()).unwrap();
    let op = Arc::new(assemble(&d, &c).unwrap());
    let dec = eigensolve_shared(op.clone(), cells - 1).unwrap();
    (op, dec)
}

fn staircase(op: &DiscreteOperator, k: usize) -> ExcitationSchedule {
    build_schedule(&ScheduleSpec::new(0.1, 0.5, k), &op.domain).unwrap()
}

fn rel_l2(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}

fn first_node(t: &TimeTrace) -> Vec<f64> {
    t.values.iter().map(|v| v[0]).collect()
}

#[test]
fn stepper_matches_spectral_trace() {
    let (op, dec) = setup(64);
    let sched = staircase(&op, 3);
    // 512 steps: 1.7e-3, 5.9e-3, 1.6e-2
    for (alpha, bound) in [(0.5, 2.5e-3), (0.8, 8e-3), (1.0, 2e-2)] {
        let err = crosscheck_error(&op, &dec, &sched, alpha, 512);
        assert!(err < bound, "alpha {alpha}: {err:.3e}");
    }
}

fn crosscheck_error(op: &DiscreteOperator, dec: &SpectralDecomposition, sched: &ExcitationSchedule, alpha: f64, steps: usize) -> f64 {
    let plan = SteppingPlan::graded(alpha, 1.0, steps).unwrap();
    let (st, _) = step_solve(op, &plan, &StepperInputs { schedule: Some(sched), ..Default::default() }).unwrap();
    let idx: Vec<usize> = (1..plan.mesh.len()).filter(|&i| plan.mesh[i] <= 0.5).collect();
    let ts: Vec<f64> = idx.iter().map(|&i| plan.mesh[i]).collect();
    let sp = forward_dirichlet(dec, sched, Components::All, alpha, &ts).unwrap();
    let st: Vec<f64> = idx.iter().map(|&i| st.values[i][0]).collect();
    rel_l2(&st, &first_node(&sp))
}

#[test]
fn halving_the_step_gains_the_l1_order() {
    let (op, dec) = setup(64);
    let sched = staircase(&op, 3);
    for alpha in [0.5, 0.8, 1.0] {
        let coarse = crosscheck_error(&op, &dec, &sched, alpha, 256);
        let fine = crosscheck_error(&op, &dec, &sched, alpha, 512);
        let expected = 2f64.powf(1f64.min(2.0 - alpha)) * 0.8;
        assert!(coarse / fine >= expected, "alpha {alpha}: {coarse:.3e} -> {fine:.3e}");
    }
}

#[test]
fn staircase_telescopes() {
    let (op, dec) = setup(64);
    let sched = staircase(&op, 3);
    for alpha in [0.5, 1.0, 1.5] {
        for k in 1..=3 {
            let (_, hi) = sched.window_of(k).unwrap();
            let ts: Vec<f64> = (1..=20).map(|i| hi * i as f64 / 20.0).collect();
            let all = forward_dirichlet(&dec, &sched, Components::All, alpha, &ts).unwrap();
            let part = forward_dirichlet(&dec, &sched, Components::UpTo(k), alpha, &ts).unwrap();
            assert!(rel_l2(&first_node(&part), &first_node(&all)) < 1e-9);
        }
    }
}

#[test]
fn both_solutions_satisfy_the_resolvent_equation() {
    let (op, dec) = setup(64);
    let bump = staircase(&op, 1);
    let inputs = ResidualInputs { schedule: Some(&bump), components: None, sigma: SourceProfile::Zero, f: None, u0: None };
    let p = [1.0, 2.0, 4.0];
    for alpha in [0.5, 1.0] {
        let plan = SteppingPlan::graded(alpha, 40.0, 1024).unwrap();
        let (_, h) = step_solve(&op, &plan, &StepperInputs { schedule: Some(&bump), ..Default::default() }).unwrap();
        let r = weak_solution_residual(&op, alpha, &h, &inputs, &p).unwrap();
        assert!(r.iter().all(|&v| v < 1e-3), "stepper {alpha}: {r:?}");

        let mut times: Vec<f64> = (0..=400).map(|i| 0.4 * i as f64 / 400.0).collect();
        times.extend((1..=300).map(|i| 0.4 * 100f64.powf(i as f64 / 300.0)));
        let (_, h) = forward_dirichlet_fields(&dec, &bump, Components::All, alpha, &times).unwrap();
        let r = weak_solution_residual(&op, alpha, &h, &inputs, &p).unwrap();
        assert!(r.iter().all(|&v| v < 1e-3), "spectral {alpha}: {r:?}");
    }
}
