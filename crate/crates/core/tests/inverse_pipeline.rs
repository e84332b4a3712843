//! End-to-end recoveries on coarse grids: synthesize a measurement with the
//! forward model, then invert it.

use caputo_core::domain::*;
use caputo_core::input::{build_schedule, Profile, ScheduleSpec, SourceProfile};
use caputo_core::inverse::*;
use caputo_core::laplace::{log_grid, transform};
use caputo_core::spectral::{eigensolve_shared, forward_dirichlet, forward_modal, forward_source, Components, SpectralDecomposition};
use std::sync::Arc;

fn interval(cells: usize, gamma_out: Vec<Side>) -> (Arc<DiscreteOperator>, SpectralDecomposition) {
    let spec = DomainSpec { gamma_out, ..DomainSpec::interval(cells) };
    let d = build_domain(&spec).unwrap();
    let c = CoefficientField::sample(&d, &CoefficientSpec::default()).unwrap();
    let op = Arc::new(assemble(&d, &c).unwrap());
    let dec = eigensolve_shared(op.clone(), cells - 1).unwrap();
    (op, dec)
}

#[test]
fn order_and_amplitude_from_late_decay() {
    let (op, dec) = interval(64, vec![Side::Right]);
    let sched = build_schedule(&ScheduleSpec::new(2.0, 4.0, 1), &op.domain).unwrap();
    let prof = *sched.profile(1).unwrap();
    let origin = 0.5 * (prof.lo + prof.hi);
    let mut times: Vec<f64> = (0..=400).map(|i| 8.0 * i as f64 / 400.0).collect();
    times.extend((1..=400).map(|i| 8.0 * 100f64.powf(i as f64 / 400.0)));
    let predicted = predicted_amplitude(&op, &sched).unwrap()[0];
    for alpha in [0.5, 1.0] {
        let tr = forward_dirichlet(&dec, &sched, Components::One(1), alpha, &times).unwrap();
        let est = recover_alpha_adaptive(&tr, 4.0, origin, prof.hi).unwrap();
        if alpha == 1.0 {
            assert_eq!(est.branch, DecayBranch::Exponential);
            assert_eq!(est.alpha_hat, 1.0);
        } else {
            assert!((est.alpha_hat - alpha).abs() < 0.02, "{est:?}");
            assert!((est.amplitude / predicted - 1.0).abs() < 0.1, "{} vs {predicted}", est.amplitude);
        }
    }
}

#[test]
fn hopf_signs_survive_absorption() {
    for q in [0.0, 50.0] {
        let coeff = CoefficientSpec { q: FieldSpec::constant(q), ..Default::default() };
        for spec in [DomainSpec::interval(64), DomainSpec::square(24, None)] {
            let d = build_domain(&spec).unwrap();
            let op = assemble(&d, &CoefficientField::sample(&d, &coeff).unwrap()).unwrap();
            let s = build_schedule(&ScheduleSpec { chi_taper: 0.1, ..ScheduleSpec::new(0.5, 1.0, 1) }, &d).unwrap();
            let r = hopf_check(&op, &s).unwrap();
            assert!(r.max_interior < 0.0 && r.min_flux > 0.0);
        }
    }
}

#[test]
fn three_poles_from_one_trace() {
    let (op, dec) = interval(64, vec![Side::Left, Side::Right]);
    let alpha = 0.8;
    let sched = build_schedule(&ScheduleSpec::new(0.01, 0.02, 1), &op.domain).unwrap();
    let mut times: Vec<f64> = (0..=2000).map(|i| 0.03 * i as f64 / 2000.0).collect();
    times.extend((1..=1500).map(|i| 0.03 * 1e4f64.powf(i as f64 / 1500.0)));
    let tr = forward_dirichlet(&dec, &sched, Components::All, alpha, &times).unwrap();
    let p = log_grid(0.5, 752.0, 40);
    let samples = transform(&tr, &p).unwrap();
    let d1 = sched.weight(1).unwrap();
    let psi: Vec<f64> = p.iter().map(|&q| d1 * sched.profile(1).unwrap().laplace(q)).collect();
    let fit = fit_spectral_data(&samples, alpha, &psi, &PoleFitOptions::default()).unwrap();
    for k in 0..3 {
        assert!((fit.lambdas[k] / dec.eigenvalues[k] - 1.0).abs() < 0.01, "{:?}", fit.lambdas);
    }
    // residues at the right end alternate in sign with k
    assert!(fit.residues[0][1] * fit.residues[1][1] < 0.0 && fit.residues[1][1] * fit.residues[2][1] < 0.0);
}

#[test]
fn source_modes_from_a_late_bump() {
    let (op, dec) = interval(64, vec![Side::Right]);
    let alpha = 0.5;
    let sigma = SourceProfile::Bump { lo: 0.5, hi: 1.0 };
    let mut times: Vec<f64> = (1..=200).map(|i| 0.5 + 0.5 * i as f64 / 200.0).collect();
    times.extend((1..=100).map(|i| 1.0 + 4.0 * i as f64 / 100.0));
    times.insert(0, 0.0);
    let mut f = vec![0.0; dec.count()];
    f[0] = 1.0;
    f[1] = 0.5;
    let field: Vec<f64> = dec.synthesize(&f).iter().zip(&op.mass).map(|(v, r)| v * r).collect();
    let tr = forward_source(&dec, &sigma, &op.scatter(&field, &[0.0, 0.0]), &vec![0.0; op.domain.n_nodes()], alpha, &times).unwrap();
    let r = recover_sources(&tr, &dec, alpha, &sigma, &SplitCondition::KnownInitial { u0_modes: vec![] }, 5).unwrap();
    assert!((r.source_modes[0] - 1.0).abs() < 0.05 && (r.source_modes[1] - 0.5).abs() < 0.025, "{:?}", r.source_modes);
    assert!(r.source_modes[2..].iter().all(|v| v.abs() < 0.01), "{:?}", r.source_modes);
}

#[test]
fn obstacle_scan_finds_the_truth() {
    let base = DomainSpec::square(32, None);
    let coeff = CoefficientSpec::default();
    let sched = ScheduleSpec { chi_taper: 0.1, ..ScheduleSpec::new(0.5, 1.0, 1) };
    let truth = Some(ObstacleSpec::square([0.5, 0.5], 0.25));
    let flux = obstacle_flux_reference(&base, &coeff, &truth, 0.5, &sched, 1.0).unwrap();
    let mut cands = square_candidates(0.375, 0.625, 3, 0.25);
    cands.push(None);
    let scan = obstacle_scan(&base, &coeff, 0.5, &sched, &cands, &flux, 1.0).unwrap();
    assert_eq!(scan.best_entry().obstacle, truth);
    let floor = scan.best_entry().objective.unwrap();
    assert!(floor < 1e-10);
    let empty = scan.entries.last().unwrap().objective.unwrap();
    assert!(empty > 1e3 * floor.max(1e-16));
}

#[test]
fn dtn_maps_separate_density_but_not_copies() {
    let mk = |coeff: CoefficientSpec| {
        let d = build_domain(&DomainSpec::square(16, None)).unwrap();
        assemble(&d, &CoefficientField::sample(&d, &coeff).unwrap()).unwrap()
    };
    let a = mk(CoefficientSpec::default());
    let b = mk(CoefficientSpec { rho: FieldSpec::Bump { base: 1.0, amplitude: 0.5, center: vec![0.5, 0.5], radius: 0.2 }, ..Default::default() });
    let sched = build_schedule(&ScheduleSpec::new(0.5, 1.0, 2), &a.domain).unwrap();
    let probes = schedule_probes(&a, &sched).unwrap();
    let same = dtn_compare(&a, &a, 0.5, &[1.0, 4.0], &probes).unwrap();
    assert!(same.iter().all(|d| d.max_discrepancy == 0.0));
    let diff = dtn_compare(&a, &b, 0.5, &[1.0], &probes).unwrap();
    assert!(diff[0].max_discrepancy > 1e-6);
}

#[test]
fn memory_outlives_the_source_only_below_unit_order() {
    let (_, dec) = interval(64, vec![Side::Right]);
    let sigma = SourceProfile::Bump { lo: 0.05, hi: 0.45 };
    let times: Vec<f64> = (0..=1500).map(|i| 3.0 * i as f64 / 1500.0).collect();
    let opts = RigidityOptions::default();
    let run = |alpha: f64| {
        let a = forward_modal(&dec, &sigma, &[1.0, 0.5], &[], alpha, &times).unwrap();
        let b = forward_modal(&dec, &sigma, &[0.6, 0.5, 0.4], &[], alpha, &times).unwrap();
        window_rigidity_experiment(&a, &b, (2.0, 3.0), alpha, 0.45, &opts).unwrap()
    };
    assert!(run(0.5).distinguished);
    assert!(run(1.0).below_envelope);
}
