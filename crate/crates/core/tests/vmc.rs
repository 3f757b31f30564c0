mod common;

use antn::antn::AntnMode;
use antn::arnn::SymmetryFlags;
use antn::checkpoint::Checkpoint;
use antn::dmrg::{build_mpo, dmrg_ground_state};
use antn::lattice::{build_lattice, heisenberg_terms, HamiltonianTerms};
use antn::model::Model;
use antn::mps::TrainableMps;
use antn::oracle::enumerated_energy;
use antn::vmc::{
    draw_samples, estimate_energy, gradient, local_energies, sample_contribution, train_step, LrSchedule, TrainSettings,
    TrainState, WeightedBatch,
};
use antn::wavefunction::Ansatz;
use common::{random_model, Family, FAMILIES};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn terms(lx: usize, ly: usize, j2: f64) -> HamiltonianTerms {
    heisenberg_terms(&build_lattice(lx, ly).unwrap(), 1.0, j2)
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

#[test]
fn exact_state_has_zero_controlled_contributions() {
    let t = terms(1, 2, 0.0);
    let singlet = dmrg_ground_state(&build_mpo(&t), 2, 2, 0).unwrap().mps;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let models = [
        Model::Mps(TrainableMps::from_mps(&singlet)),
        Model::antn_from_mps(&singlet, AntnMode::Elementwise, 2, 8, SymmetryFlags::default(), &mut rng).unwrap(),
        Model::antn_from_mps(&singlet, AntnMode::Blockwise, 2, 8, SymmetryFlags::default(), &mut rng).unwrap(),
    ];
    for m in &models {
        let samples = draw_samples(m, 256, 3, 0).unwrap();
        let batch = WeightedBatch::from_samples(&samples).unwrap();
        let e_loc = local_energies(m, &t, &batch.configs).unwrap();
        let mean = estimate_energy(&batch, &e_loc).unwrap().mean;
        assert!((mean.re + 3.0).abs() < 1e-12 && mean.im.abs() < 1e-12, "{mean}");
        for ((x, &w), &e) in batch.configs.iter().zip(&batch.weights).zip(&e_loc) {
            let g = sample_contribution(m, x, w, e, mean).unwrap();
            assert!(max_abs(&g) < 1e-10, "{} {x}: {}", m.kind(), max_abs(&g));
            let uncontrolled = sample_contribution(m, x, w, e, 0.0.into()).unwrap();
            assert!(max_abs(&uncontrolled) > 1e-3, "{}: uncontrolled contribution should not vanish", m.kind());
        }
    }
}

#[test]
fn control_variate_does_not_bias_the_exact_gradient() {
    // Only for normalized ansatzes; the MPS norm moves with its parameters.
    let t = terms(2, 3, 0.5);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for family in [Family::Arnn, Family::Elementwise, Family::Blockwise] {
        let m = random_model(family, 6, SymmetryFlags::default(), &mut rng);
        let batch = WeightedBatch::enumerated(&m).unwrap();
        let e_loc = local_energies(&m, &t, &batch.configs).unwrap();
        let with = gradient(&m, &batch, &e_loc, true).unwrap();
        let without = gradient(&m, &batch, &e_loc, false).unwrap();
        let diff: Vec<f64> = with.iter().zip(&without).map(|(a, b)| a - b).collect();
        assert!(max_abs(&diff) <= 1e-9 * max_abs(&without), "{family:?}: {} vs {}", max_abs(&diff), max_abs(&without));
    }
}

#[test]
fn controlled_mps_gradient_is_the_rayleigh_quotient_gradient() {
    let t = terms(2, 3, 0.5);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let m = random_model(Family::Mps, 6, SymmetryFlags::default(), &mut rng);
    let batch = WeightedBatch::enumerated(&m).unwrap();
    let g = gradient(&m, &batch, &local_energies(&m, &t, &batch.configs).unwrap(), true).unwrap();
    let base = m.store().flat_values();
    let mut probe = m.clone();
    let h = 1e-5;
    for k in (0..base.len()).step_by(7) {
        let mut energy_at = |delta: f64| {
            let mut p = base.clone();
            p[k] += delta;
            probe.store_mut().set_flat_values(&p).unwrap();
            enumerated_energy(&probe, &t).unwrap()
        };
        let fd = (energy_at(h) - energy_at(-h)) / (2.0 * h);
        assert!((fd - g[k]).abs() < 1e-6 + 1e-5 * g[k].abs(), "param {k}: {fd} vs {}", g[k]);
    }
}

#[test]
fn sampled_estimates_are_unbiased() {
    let t = terms(2, 3, 0.5);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for family in FAMILIES {
        let m = random_model(family, 6, SymmetryFlags::default(), &mut rng);
        let exact = enumerated_energy(&m, &t).unwrap();
        let exact_batch = WeightedBatch::enumerated(&m).unwrap();
        let exact_grad = gradient(&m, &exact_batch, &local_energies(&m, &t, &exact_batch.configs).unwrap(), true).unwrap();

        let samples = draw_samples(&m, 200_000, 9, 0).unwrap();
        let batch = WeightedBatch::from_samples(&samples).unwrap();
        let e_loc = local_energies(&m, &t, &batch.configs).unwrap();
        let est = estimate_energy(&batch, &e_loc).unwrap();
        assert!((est.mean.re - exact).abs() < 4.0 * est.std_error, "{family:?}: {} ± {} vs {exact}", est.mean.re, est.std_error);
        let g = gradient(&m, &batch, &e_loc, true).unwrap();
        let err: f64 = g.iter().zip(&exact_grad).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let norm: f64 = exact_grad.iter().map(|a| a * a).sum::<f64>().sqrt();
        assert!(err < 0.05 * norm, "{family:?}: gradient error {err} of {norm}");
    }
}

fn settings(batch: usize, steps: u64) -> TrainSettings {
    TrainSettings { batch, steps, seed: 5, schedule: LrSchedule::default(), control: true }
}

#[test]
fn training_is_independent_of_thread_count() {
    let t = terms(2, 3, 0.5);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let start = random_model(Family::Elementwise, 6, SymmetryFlags::default(), &mut rng);
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let mut m = start.clone();
            let mut st = TrainState::new(m.store().len());
            let records: Vec<_> = (0..4).map(|_| train_step(&mut m, &t, &mut st, &settings(700, 4)).unwrap()).collect();
            (m.store().flat_values(), st, records)
        })
    };
    let (p1, s1, r1) = run(1);
    let (p3, s3, r3) = run(3);
    assert_eq!(p1, p3);
    assert_eq!(s1, s3);
    assert_eq!(r1, r3);
}

#[test]
fn checkpoint_continuation_is_step_exact() {
    let t = terms(2, 3, 0.5);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let s = settings(300, 6);
    for family in FAMILIES {
        let mut m = random_model(family, 6, SymmetryFlags::default(), &mut rng);
        let mut st = TrainState::new(m.store().len());
        for _ in 0..3 {
            train_step(&mut m, &t, &mut st, &s).unwrap();
        }
        let mut bytes = Vec::new();
        Checkpoint { config: "[lattice]\nlx = 2\nly = 3\n".into(), model: m.clone(), state: st.clone(), seed: s.seed }
            .write_to(&mut bytes)
            .unwrap();
        let restored = Checkpoint::read_from(&mut bytes.as_slice()).unwrap();
        let (mut m2, mut st2) = (restored.model, restored.state);
        for _ in 0..3 {
            let a = train_step(&mut m, &t, &mut st, &s).unwrap();
            let b = train_step(&mut m2, &t, &mut st2, &s).unwrap();
            assert_eq!(a, b, "{family:?}");
        }
        assert_eq!(m.store().flat_values(), m2.store().flat_values());
        assert_eq!(st, st2);
    }
}

#[test]
fn training_improves_on_its_dmrg_start() {
    let t = terms(2, 3, 0.5);
    let dmrg = dmrg_ground_state(&build_mpo(&t), 2, 6, 0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut m = Model::antn_from_mps(&dmrg.mps, AntnMode::Elementwise, 2, 16, SymmetryFlags::default(), &mut rng).unwrap();
    let mut st = TrainState::new(m.store().len());
    let s = TrainSettings { schedule: LrSchedule { initial: 3e-3, milestones: vec![150] }, ..settings(1024, 300) };
    for _ in 0..s.steps {
        train_step(&mut m, &t, &mut st, &s).unwrap();
    }
    let e = enumerated_energy(&m, &t).unwrap();
    let exact = common::ed_fixture(2, 3, 0.5);
    assert!(e < dmrg.energy, "trained {e} vs DMRG {}", dmrg.energy);
    assert!(e >= exact - 1e-9);
}
