use optical_povm::dilation::{self, embed, UnitaryMatrix};
use optical_povm::discrimination::{self, optimize_filtering, optimize_ud, povm_from_solution, Outcome, PSD_TOL};
use optical_povm::linalg::{self, random_state_vector, random_unitary, CMatrix, CVector};
use optical_povm::mesh::{self, decompose, recompose, vbs_angles, BeamSplitterSetting};
use optical_povm::simulator::{self, propagate_ideal, run_ensemble, NoiseModel, OutcomeMap};
use optical_povm::states::{self, filter_family, gram, sd_paper_set, MixedState, PureState, StateEnsemble};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random ensemble of `n` states in dimension `d` with random priors, or
/// `None` if it came out (numerically) dependent.
fn random_ensemble(seed: u64, n: usize, d: usize) -> Option<StateEnsemble> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let states: Vec<PureState> = (0..n).map(|_| PureState::new(random_state_vector(d, &mut rng)).unwrap()).collect();
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let e = StateEnsemble::with_priors(states, raw.iter().map(|x| x / total).collect()).unwrap();
    (gram(&e).min_eigenvalue() > 1e-3).then_some(e)
}

fn feasible(e: &StateEnsemble, p: &[f64]) -> bool {
    let mut m = gram(e).entries().clone();
    for (i, &pi) in p.iter().enumerate() {
        m[(i, i)] -= pi;
    }
    p.iter().all(|&x| x >= -PSD_TOL) && linalg::min_eigenvalue(&m) >= -PSD_TOL
}

fn dims() -> impl Strategy<Value = (usize, usize)> {
    (2usize..=4).prop_flat_map(|d| (1usize..=d, Just(d)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn gram_hermitian_psd_unit_diagonal(seed in any::<u64>(), (n, d) in dims()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let st: Vec<PureState> = (0..n).map(|_| PureState::new(random_state_vector(d, &mut rng)).unwrap()).collect();
        let g = gram(&StateEnsemble::uniform(st).unwrap());
        prop_assert!(linalg::hermiticity_residual(g.entries()) < 1e-14);
        prop_assert!(g.min_eigenvalue() > -1e-12);
        for i in 0..n {
            prop_assert!((g.get(i, i).re - 1.0).abs() < 1e-12);
            prop_assert!(g.get(i, i).im.abs() < 1e-14);
        }
    }

    #[test]
    fn dual_basis_is_biorthogonal(seed in any::<u64>(), (n, d) in dims()) {
        let Some(e) = random_ensemble(seed, n, d) else { return Ok(()) };
        let dual = states::dual_basis(&e).unwrap();
        for (i, t) in dual.iter().enumerate() {
            for (j, s) in e.states().iter().enumerate() {
                let ip = t.dotc(s.amplitudes());
                let want = if i == j { 1.0 } else { 0.0 };
                prop_assert!((ip.re - want).abs() < 1e-10 && ip.im.abs() < 1e-10);
            }
        }
    }

    #[test]
    fn mixed_subset_is_a_valid_state(seed in any::<u64>(), mask in 1u8..7) {
        let Some(e) = random_ensemble(seed, 3, 3) else { return Ok(()) };
        let subset: Vec<usize> = (0..3).filter(|k| mask & (1 << k) != 0).collect();
        let (rho, prior) = states::mixed_from_subset(&e, &subset).unwrap();
        prop_assert!(prior > 0.0 && prior <= 1.0 + 1e-12);
        let again = MixedState::new(rho.density().clone());
        prop_assert!(again.is_ok());
        let tr: f64 = (0..3).map(|k| rho.density()[(k, k)].re).sum();
        prop_assert!((tr - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ud_optimum_is_feasible_and_complete(seed in any::<u64>()) {
        let Some(e) = random_ensemble(seed, 3, 3) else { return Ok(()) };
        let sol = optimize_ud(&e).unwrap();
        prop_assert!(feasible(&e, &sol.success_probs));
        let povm = povm_from_solution(&e, &sol).unwrap();
        prop_assert!(povm.completeness_residual() < 1e-10);
        prop_assert!(povm.min_element_eigenvalue() > -1e-9);
        // unambiguity: E_i never fires on ψ_j, j ≠ i
        for i in 0..3 {
            for j in 0..3 {
                let p = povm.probability(Outcome::State(i), e.state(j).amplitudes());
                if i != j {
                    prop_assert!(p.abs() < 1e-9);
                } else {
                    prop_assert!((p - sol.success_probs[i]).abs() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn filtering_optimum_is_feasible(seed in any::<u64>(), target in 0usize..3) {
        let Some(e) = random_ensemble(seed, 3, 3) else { return Ok(()) };
        let sol = optimize_filtering(&e, target).unwrap();
        let g = sol.conclusive_gram(&e);
        prop_assert!(linalg::min_eigenvalue(&g) > -PSD_TOL);
        prop_assert!(sol.success_probs().iter().all(|&p| (-PSD_TOL..=1.0 + PSD_TOL).contains(&p)));
    }

    #[test]
    fn relabeling_permutes_solution(seed in any::<u64>(), perm in Just([0usize, 1, 2]).prop_shuffle()) {
        let Some(e) = random_ensemble(seed, 3, 3) else { return Ok(()) };
        let a = optimize_ud(&e).unwrap();
        let b = optimize_ud(&e.permuted(&perm).unwrap()).unwrap();
        prop_assert!((a.average_success - b.average_success).abs() < 1e-7);
        for (k, &src) in perm.iter().enumerate() {
            prop_assert!((b.success_probs[k] - a.success_probs[src]).abs() < 1e-5);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn dilation_round_trip(seed in any::<u64>()) {
        let Some(e) = random_ensemble(seed, 3, 3) else { return Ok(()) };
        let sol = optimize_ud(&e).unwrap();
        let out = dilation::build_outputs_ud(&e, &sol).unwrap();
        prop_assert!(dilation::gram_residual(&e, &out) <= 1e-10);
        for (o, &p) in out.outputs.iter().zip(&sol.success_probs) {
            let conclusive: f64 = (0..out.system_dim).map(|k| o[k].norm_sqr()).sum();
            prop_assert!((conclusive - p).abs() < 1e-10);
        }
        let u = dilation::build_unitary(&e, &out).unwrap();
        prop_assert!(u.residual() <= 1e-10);
        let extracted = dilation::extract_povm(&u, &out.outcome_rails(), 3).unwrap();
        let reference = povm_from_solution(&e, &sol).unwrap();
        for (outcome, _) in out.outcome_rails() {
            let a = extracted.element(outcome).unwrap();
            let b = reference.element(outcome).unwrap();
            prop_assert!(linalg::max_abs_diff(a, b) < 1e-8);
        }
    }

    #[test]
    fn filtering_dilation_preserves_gram(seed in any::<u64>(), target in 0usize..3) {
        let Some(e) = random_ensemble(seed, 3, 3) else { return Ok(()) };
        let sol = optimize_filtering(&e, target).unwrap();
        let out = dilation::build_outputs_filtering(&e, target, &sol).unwrap();
        prop_assert!(dilation::gram_residual(&e, &out) <= 1e-10);
        let u = dilation::build_unitary(&e, &out).unwrap();
        prop_assert!(u.residual() <= 1e-10);
    }

    #[test]
    fn mesh_round_trip_random_unitaries(seed in any::<u64>(), n in 3usize..=4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = UnitaryMatrix::new(random_unitary(n, &mut rng)).unwrap();
        let plan = decompose(&u).unwrap();
        let back = recompose(&plan);
        prop_assert!(mesh::unitary_distance(&u, &back) <= 1e-10);
        prop_assert!(back.residual() <= 1e-12);
        // decompose ∘ recompose gives an equivalent plan
        let again = recompose(&decompose(&back).unwrap());
        prop_assert!(mesh::unitary_distance(&back, &again) <= 1e-10);
    }

    #[test]
    fn ideal_pipeline_never_errs(seed in any::<u64>(), target in proptest::option::of(0usize..3)) {
        let Some(e) = random_ensemble(seed, 3, 3) else { return Ok(()) };
        let out = match target {
            None => dilation::build_outputs_ud(&e, &optimize_ud(&e).unwrap()).unwrap(),
            Some(t) => dilation::build_outputs_filtering(&e, t, &optimize_filtering(&e, t).unwrap()).unwrap(),
        };
        let u = dilation::build_unitary(&e, &out).unwrap();
        let plan = decompose(&u).unwrap();
        let map = OutcomeMap::from_dilation(&out, 3, target).unwrap();
        let report = run_ensemble(&plan, &e, &NoiseModel::noiseless()).unwrap();
        let s = simulator::summarize(&report, &map, e.priors()).unwrap();
        prop_assert!(s.error_rate < 1e-12);
        for (row, st) in report.matrix.iter().zip(e.states()) {
            let ideal = propagate_ideal(&plan, st).unwrap();
            for (a, b) in row.iter().zip(ideal) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn noisy_rows_sum_to_one_and_repeat(seed in any::<u64>(), sigma in 0.0f64..0.5, plate in 0.0f64..3.0) {
        let e = sd_paper_set();
        let noise = NoiseModel { phase_jitter_sigma: sigma, waveplate_jitter_sigma: plate, trials: 2000, seed, ..NoiseModel::noiseless() };
        let a = run_ensemble(&mesh::paper_plan_sd(), &e, &noise).unwrap();
        let b = run_ensemble(&mesh::paper_plan_sd(), &e, &noise).unwrap();
        prop_assert_eq!(&a, &b);
        for row in &a.matrix {
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() <= 4.0 * f64::EPSILON);
            prop_assert!(row.iter().all(|&p| p >= 0.0));
        }
    }
}

#[test]
fn filter_family_overlaps() {
    for k in 1..=10 {
        let a = k as f64 / 10.0;
        let e = filter_family(a).unwrap();
        let g = gram(&e);
        assert!((g.get(0, 1).norm() - a / 2f64.sqrt()).abs() < 1e-12);
        assert!((g.get(0, 2).norm() - a / 2f64.sqrt()).abs() < 1e-12);
    }
}

#[test]
fn success_decreases_with_overlap() {
    let mut last = f64::INFINITY;
    for k in 0..=20 {
        let s = k as f64 / 20.0 * 0.99;
        let e = StateEnsemble::uniform(vec![
            PureState::from_reals(&[1.0, 0.0]).unwrap(),
            PureState::from_reals(&[s, (1.0 - s * s).sqrt()]).unwrap(),
        ])
        .unwrap();
        let p = optimize_ud(&e).unwrap().average_success;
        assert!(p <= last + 1e-12, "P rose from {last} to {p} at overlap {s}");
        last = p;
    }
    let mut last = f64::INFINITY;
    for k in 1..=20 {
        let e = filter_family(k as f64 / 20.0).unwrap();
        let p = optimize_filtering(&e, 0).unwrap().average_success;
        assert!(p <= last + 1e-9);
        last = p;
    }
}

#[test]
fn pvm_bound_and_povm_advantage() {
    let e = sd_paper_set();
    let pvm = discrimination::optimal_pvm_ud(&e).unwrap().success;
    assert!(pvm <= 1.0 / 3.0 + 1e-12);
    assert!(optimize_ud(&e).unwrap().average_success >= 2.0 * pvm);
}

#[test]
fn vbs_angle_is_monotone_bijection() {
    let mut last = f64::NEG_INFINITY;
    for k in (0..=1000).rev() {
        let t = k as f64 / 1000.0;
        let angles = vbs_angles(&BeamSplitterSetting::new((0, 1), t, 0.0));
        let theta = angles.hwp_angles[1];
        assert!(theta > last && (0.0..=45.0).contains(&theta));
        assert!((angles.transmission() - t).abs() < 1e-12);
        last = theta;
    }
    assert_eq!(vbs_angles(&BeamSplitterSetting::new((0, 1), 1.0, 0.0)).hwp_angles[1], 0.0);
    assert_eq!(vbs_angles(&BeamSplitterSetting::new((0, 1), 0.0, 0.0)).hwp_angles[1], 45.0);
}

#[test]
fn reference_plans_match_built_unitaries_on_inputs() {
    let cases: Vec<(StateEnsemble, mesh::MeshPlan, Option<usize>)> = vec![
        (sd_paper_set(), mesh::paper_plan_sd(), None),
        (filter_family(0.25).unwrap(), mesh::paper_plan_filtering(0.25).unwrap(), Some(0)),
        (filter_family(0.5).unwrap(), mesh::paper_plan_filtering(0.5).unwrap(), Some(0)),
    ];
    for (e, plan, target) in cases {
        let out = match target {
            None => dilation::build_outputs_ud(&e, &optimize_ud(&e).unwrap()).unwrap(),
            Some(t) => dilation::build_outputs_filtering(&e, t, &optimize_filtering(&e, t).unwrap()).unwrap(),
        };
        let u = dilation::build_unitary(&e, &out).unwrap();
        let reference = recompose(&plan);
        for s in e.states() {
            let x: CVector = embed(s.amplitudes(), 4);
            let diff: CMatrix = CMatrix::from_columns(&[u.apply(&x) - reference.apply(&x)]);
            assert!(linalg::max_abs(&diff) < 1e-9);
        }
    }
}

#[test]
fn error_grows_with_phase_jitter() {
    let e = sd_paper_set();
    let map = OutcomeMap::ud(3, 4);
    let mut last = -1.0;
    for sigma in [0.0, 0.05, 0.1, 0.2, 0.3] {
        let noise = NoiseModel { phase_jitter_sigma: sigma, trials: 100_000, seed: 2024, ..NoiseModel::noiseless() };
        let report = run_ensemble(&mesh::paper_plan_sd(), &e, &noise).unwrap();
        let err = simulator::summarize(&report, &map, e.priors()).unwrap().error_rate;
        assert!(err >= last, "error fell from {last} to {err} at σ = {sigma}");
        last = err;
    }
    assert!(last > 0.005);
}
