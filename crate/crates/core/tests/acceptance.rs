//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! cargo test -p antn-core --test acceptance            # all criteria
//! cargo test -p antn-core --test acceptance -- 1 4 7   # a subset
//!
//! Exits nonzero if any selected criterion fails. Criteria 8 and 9 train on
//! 4x4 and 6x6 lattices and take hours on one core.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use antn::antn::{AntnMode, AntnModel};
use antn::arnn::{Arnn, HeadEncoding, OutputInit, SymmetryFlags};
use antn::checkpoint::Checkpoint;
use antn::dmrg::{build_mpo, dmrg_ground_state, DmrgResult};
use antn::lattice::{build_lattice, connected_configs, heisenberg_terms, HamiltonianTerms, SpinConfig};
use antn::model::Model;
use antn::mps::{Mps, MpsLayout, TrainableMps};
use antn::oracle::{enumerate_distribution, exact_ground_state_dense, exact_ground_state_sparse, kron_hamiltonian};
use antn::vmc::{
    draw_samples, estimate_energy, gradient, local_energies, sample_contribution, train_step, EnergyEstimate, LrSchedule,
    TrainSettings, TrainState, WeightedBatch,
};
use antn::wavefunction::{Ansatz, ExactSampler, Wavefunction};
use common::{
    all_configs, amplitude_rel_diff, ed_fixture, finite_difference_error, random_canonical_mps, random_model, Family, FAMILIES,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn terms(lx: usize, ly: usize, j2: f64) -> HamiltonianTerms {
    heisenberg_terms(&build_lattice(lx, ly).unwrap(), 1.0, j2)
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Normalization and exact sampling, 20 models per family at n = 6..10.
fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let (mut worst_norm, mut worst_tv, mut floor_at_worst) = (0.0f64, 0.0f64, 0.0f64);
    let mut worst_at = String::new();
    for family in FAMILIES {
        for k in 0..20 {
            let n = 6 + k % 5;
            let m = random_model(family, n, SymmetryFlags::default(), &mut rng);
            let table = enumerate_distribution(&m, n).unwrap();
            worst_norm = worst_norm.max(table.deviation_from(1.0));
            let single: Vec<SpinConfig> = (0..100_000).map(|_| m.sample(&mut rng).unwrap()).collect();
            let batched = m.sample_batch(100_000, &mut rng).unwrap();
            for tv in [table.tv_distance(&single), table.tv_distance(&batched)] {
                if tv > worst_tv {
                    worst_tv = tv;
                    floor_at_worst = expected_tv(&table.probs, 100_000);
                    worst_at = format!("{family:?} n={n}");
                }
            }
        }
    }
    outcome(
        worst_norm <= 1e-10 && worst_tv < 0.02,
        format!(
            "max |Σ|ψ|² − 1| = {worst_norm:.1e}, max TV = {worst_tv:.4} ({worst_at}; an exact sampler expects {floor_at_worst:.4})"
        ),
    )
}

/// Large-sample mean TV distance between `probs` and the histogram of `n` exact draws.
fn expected_tv(probs: &[f64], n: usize) -> f64 {
    let n = n as f64;
    0.5 * probs.iter().map(|&p| (2.0 * p * (1.0 - p) / (std::f64::consts::PI * n)).sqrt()).sum::<f64>()
}

/// χ = 1 ANTN against the Cartesian ARNN, and zero-correction ANTN against its MPS.
fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let n = 8;
    let mut worst_arnn = 0.0f64;
    let mut worst_mps = 0.0f64;
    for _ in 0..5 {
        let arnn = Model::Arnn(Arnn::new(n, 2, 8, HeadEncoding::Cartesian, SymmetryFlags::default(), &mut rng).unwrap());
        let mps = Mps::random(n, 1, &mut rng);
        let mut antn = AntnModel::new(&mps, AntnMode::Elementwise, 2, 8, SymmetryFlags::default(), OutputInit::Zero, &mut rng)
            .unwrap();
        // Same network weights; the ARNN output bias absorbs the scalar tensors M.
        let mut shifted = arnn.clone();
        let (layout, re, im) = MpsLayout::flatten(&mps);
        for block in arnn.store().blocks() {
            let id = antn.store().id(&block.name).unwrap();
            antn.store_mut().values_mut(id).copy_from_slice(&block.values);
        }
        let bias = shifted.store().id("net.out.b").unwrap();
        let b = shifted.store_mut().values_mut(bias);
        for i in 0..n {
            for s in 0..2 {
                let (off, _, _) = layout.block(i, s);
                b[4 * i + 2 * s] += re[off];
                b[4 * i + 2 * s + 1] += im[off];
            }
        }
        for x in all_configs(n) {
            worst_arnn = worst_arnn.max(amplitude_rel_diff(antn.log_amplitude(&x).unwrap(), shifted.log_amplitude(&x).unwrap()));
        }

        let rc = random_canonical_mps(n, 4, &mut rng);
        for mode in [AntnMode::Elementwise, AntnMode::Blockwise] {
            let zero = AntnModel::new(&rc, mode, 2, 8, SymmetryFlags::default(), OutputInit::Zero, &mut rng).unwrap();
            for x in all_configs(n) {
                worst_mps = worst_mps.max(amplitude_rel_diff(zero.log_amplitude(&x).unwrap(), rc.log_evaluate(&x).unwrap()));
            }
        }
    }
    outcome(
        worst_arnn <= 1e-10 && worst_mps <= 1e-10,
        format!("max deviation vs ARNN {worst_arnn:.1e}, vs MPS {worst_mps:.1e}"),
    )
}

/// Central differences with h = 1e-4 at rtol 1e-4, 10 draws per family.
fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let mut worst = 0.0f64;
    let mut worst_at = String::new();
    for family in FAMILIES {
        for draw in 0..10 {
            let n = 4 + draw % 5;
            let m = random_model(family, n, SymmetryFlags::default(), &mut rng);
            let x = m.sample(&mut rng).unwrap();
            let err = finite_difference_error(&m, &x, 1e-4, 1e-4, 300);
            if err > worst {
                worst = err;
                worst_at = format!("{family:?} n={n}");
            }
        }
    }
    outcome(worst <= 1.0, format!("worst |fd − an| / (1e-7 + 1e-4·|an|) = {worst:.3} ({worst_at})"))
}

/// Entry-exact Kronecker check up to 12 sites, dense vs Lanczos, two-site energy.
fn criterion_4() -> Outcome {
    let mut mismatches = 0usize;
    let mut checked = 0usize;
    for (lx, ly) in [(1, 2), (2, 2), (2, 3), (3, 3), (2, 5), (3, 4), (2, 6)] {
        for (j2, marshall) in [(0.0, false), (0.5, false), (0.5, true)] {
            let t = terms(lx, ly, j2).with_marshall_sign(marshall);
            let n = t.n_sites();
            let h = kron_hamiltonian(&t).unwrap();
            let dim = 1usize << n;
            let mut row = vec![0.0; dim];
            for x in all_configs(n) {
                row.iter_mut().for_each(|v| *v = 0.0);
                for (y, el) in connected_configs(&t, &x).unwrap() {
                    row[y.to_index() as usize] += el;
                }
                let xi = x.to_index() as usize;
                mismatches += row.iter().enumerate().filter(|&(yi, &el)| h[(yi, xi)] != el).count();
                checked += dim;
            }
        }
    }
    let mut worst_ed = 0.0f64;
    for (lx, ly, j2) in [(2, 3, 0.5), (3, 3, 0.2), (2, 5, 0.5), (3, 4, 0.5), (2, 6, 0.8)] {
        let t = terms(lx, ly, j2);
        let dense = exact_ground_state_dense(&t).unwrap().energy;
        let sparse = exact_ground_state_sparse(&t, 17).unwrap().energy;
        worst_ed = worst_ed.max((dense - sparse).abs());
    }
    let two = exact_ground_state_dense(&terms(1, 2, 0.0)).unwrap().energy;
    outcome(
        mismatches == 0 && worst_ed <= 1e-9 && two == -3.0,
        format!("{mismatches} mismatches in {checked} entries, max |dense − Lanczos| = {worst_ed:.1e}, 1x2 energy {two}"),
    )
}

fn dmrg_monotone_and_variational(r: &DmrgResult, exact: f64) -> bool {
    let tol = 1e-10 * exact.abs();
    r.sweep_energies.windows(2).all(|w| w[1] <= w[0] + tol) && r.sweep_energies.iter().all(|&e| e >= exact - tol)
}

/// 4x4 DMRG at χ = 64 against the pinned ED energies.
fn criterion_5() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for j2 in [0.2, 0.5, 0.8] {
        let exact = ed_fixture(4, 4, j2);
        let r = dmrg_ground_state(&build_mpo(&terms(4, 4, j2)), 64, 10, 0).unwrap();
        let rel = (r.energy - exact).abs() / exact.abs();
        let shape = dmrg_monotone_and_variational(&r, exact);
        pass &= rel <= 1e-6 && shape;
        parts.push(format!("J2={j2}: rel err {rel:.1e}{}", if shape { "" } else { " (not monotone/variational)" }));
    }
    outcome(pass, parts.join(", "))
}

/// U(1) masks and Z2 invariance for every autoregressive family.
fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(106);
    let n = 8;
    let (mut violations, mut nonzero_outside, mut worst_flip) = (0usize, 0usize, 0.0f64);
    for family in [Family::Arnn, Family::Elementwise, Family::Blockwise] {
        for m_target in [0, 2] {
            let sym = SymmetryFlags { u1: Some(m_target), z2_flip: false };
            let m = random_model(family, n, sym, &mut rng);
            violations += m.sample_batch(10_000, &mut rng).unwrap().iter().filter(|x| x.magnetization() != m_target).count();
            nonzero_outside += all_configs(n)
                .filter(|x| x.magnetization() != m_target && !m.log_amplitude(x).unwrap().is_zero())
                .count();
        }
        for u1 in [None, Some(0)] {
            let m = random_model(family, n, SymmetryFlags { u1, z2_flip: true }, &mut rng);
            for x in all_configs(n) {
                let (a, b) = (m.log_amplitude(&x).unwrap().to_complex(), m.log_amplitude(&x.flipped()).unwrap().to_complex());
                worst_flip = worst_flip.max((a - b).norm());
            }
        }
    }
    outcome(
        violations == 0 && nonzero_outside == 0 && worst_flip <= 1e-12,
        format!(
            "{violations} sector violations in samples, {nonzero_outside} nonzero amplitudes outside the sector, max |ψ(x) − ψ(1−x)| = {worst_flip:.1e}"
        ),
    )
}

/// Per-sample controlled contributions vanish on the exact singlet; control
/// leaves the exact gradient unchanged at n = 6.
fn criterion_7() -> Outcome {
    let t = terms(1, 2, 0.0);
    let singlet = dmrg_ground_state(&build_mpo(&t), 2, 2, 0).unwrap().mps;
    let mut rng = ChaCha8Rng::seed_from_u64(107);
    let mut models = vec![Model::Mps(TrainableMps::from_mps(&singlet))];
    for mode in [AntnMode::Elementwise, AntnMode::Blockwise] {
        models.push(Model::antn_from_mps(&singlet, mode, 2, 8, SymmetryFlags::default(), &mut rng).unwrap());
    }
    let mut worst_sample = 0.0f64;
    for m in &models {
        let batch = WeightedBatch::from_samples(&draw_samples(m, 1000, 1, 0).unwrap()).unwrap();
        let e_loc = local_energies(m, &t, &batch.configs).unwrap();
        let mean = estimate_energy(&batch, &e_loc).unwrap().mean;
        for ((x, &w), &e) in batch.configs.iter().zip(&batch.weights).zip(&e_loc) {
            worst_sample = worst_sample.max(max_abs(&sample_contribution(m, x, w, e, mean).unwrap()));
        }
    }
    let t6 = terms(2, 3, 0.5);
    let mut worst_rel = 0.0f64;
    for family in [Family::Arnn, Family::Elementwise, Family::Blockwise] {
        for _ in 0..3 {
            let m = random_model(family, 6, SymmetryFlags::default(), &mut rng);
            let batch = WeightedBatch::enumerated(&m).unwrap();
            let e_loc = local_energies(&m, &t6, &batch.configs).unwrap();
            let a = gradient(&m, &batch, &e_loc, true).unwrap();
            let b = gradient(&m, &batch, &e_loc, false).unwrap();
            let diff: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
            worst_rel = worst_rel.max(max_abs(&diff) / max_abs(&b));
        }
    }
    outcome(
        worst_sample < 1e-10 && worst_rel <= 1e-9,
        format!("max per-sample contribution {worst_sample:.1e}, max controlled/uncontrolled rel diff {worst_rel:.1e}"),
    )
}

const TRAIN_BATCH: usize = 4096;
const EVAL_SAMPLES: usize = 16_384;

struct TrainedRun {
    dmrg_per_site: f64,
    final_energy: EnergyEstimate,
    n: usize,
}

impl TrainedRun {
    fn per_site(&self) -> f64 {
        self.final_energy.mean.re / self.n as f64
    }
}

/// Elementwise χ = 8 ANTN started from DMRG(8), trained for `steps`, then
/// evaluated on fresh samples.
fn train_from_dmrg(lx: usize, ly: usize, steps: u64, batch: usize) -> TrainedRun {
    let t = terms(lx, ly, 0.5);
    let n = t.n_sites();
    let dmrg = dmrg_ground_state(&build_mpo(&t), 8, 8, 0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(108);
    let mut m = Model::antn_from_mps(&dmrg.mps, AntnMode::Elementwise, 3, 32, SymmetryFlags::default(), &mut rng).unwrap();
    let mut st = TrainState::new(m.store().len());
    let settings = TrainSettings { batch, steps, seed: 8, schedule: LrSchedule::default(), control: true };
    let start = Instant::now();
    for _ in 0..steps {
        let rec = train_step(&mut m, &t, &mut st, &settings).unwrap();
        if rec.step % 100 == 0 || rec.step + 1 == steps {
            eprintln!(
                "  {lx}x{ly} step {:>5}: {:.5} ± {:.5} per site ({:.0?})",
                rec.step,
                rec.energy.mean.re / n as f64,
                rec.energy.std_error / n as f64,
                start.elapsed()
            );
        }
    }
    let xs = draw_samples(&m, EVAL_SAMPLES, settings.seed, u64::MAX).unwrap();
    let eval = WeightedBatch::from_samples(&xs).unwrap();
    let e_loc = local_energies(&m, &t, &eval.configs).unwrap();
    TrainedRun { dmrg_per_site: dmrg.energy / n as f64, final_energy: estimate_energy(&eval, &e_loc).unwrap(), n }
}

fn criterion_8(run: &TrainedRun) -> Outcome {
    let exact = ed_fixture(4, 4, 0.5) / 16.0;
    let e = run.per_site();
    let rel = (e - exact).abs() / exact.abs();
    let se = run.final_energy.std_error / 16.0;
    outcome(
        rel <= 5e-3 && e < run.dmrg_per_site,
        format!("ANTN {e:.5} ± {se:.5}, DMRG(8) {:.5}, ED {exact:.5} per site; rel err {rel:.2e}", run.dmrg_per_site),
    )
}

fn criterion_9(small: &TrainedRun, large: &TrainedRun) -> Outcome {
    let gap_small = small.dmrg_per_site - small.per_site();
    let gap_large = large.dmrg_per_site - large.per_site();
    outcome(
        gap_small >= 1e-3 && gap_large >= 1e-3 && gap_large >= gap_small,
        format!(
            "DMRG(8) − ANTN per site: 4x4 {gap_small:.5} ({:.5} vs {:.5}), 6x6 {gap_large:.5} ({:.5} vs {:.5})",
            small.dmrg_per_site,
            small.per_site(),
            large.dmrg_per_site,
            large.per_site()
        ),
    )
}

/// Bit-reproducible single-threaded runs and step-exact checkpoint continuation.
fn criterion_10() -> Outcome {
    let t = terms(3, 4, 0.5);
    let settings = TrainSettings { batch: 512, steps: 6, seed: 10, schedule: LrSchedule::default(), control: true };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let dir = std::env::temp_dir().join(format!("antn-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let mut reproducible = true;
    let mut resumable = true;
    let mut rng = ChaCha8Rng::seed_from_u64(110);
    for family in FAMILIES {
        let start = random_model(family, 12, SymmetryFlags::default(), &mut rng);
        let run = |m: &mut Model, st: &mut TrainState, steps: usize| {
            pool.install(|| (0..steps).map(|_| train_step(m, &t, st, &settings).unwrap()).collect::<Vec<_>>())
        };
        let full = |m0: &Model| {
            let mut m = m0.clone();
            let mut st = TrainState::new(m.store().len());
            let recs = run(&mut m, &mut st, 6);
            (m.store().flat_values(), recs)
        };
        let (a, b) = (full(&start), full(&start));
        reproducible &= a == b;

        let mut m = start.clone();
        let mut st = TrainState::new(m.store().len());
        let mut recs = run(&mut m, &mut st, 3);
        let path = dir.join(format!("{family:?}.ckpt"));
        Checkpoint { config: String::new(), model: m, state: st, seed: settings.seed }.save(&path).unwrap();
        let Checkpoint { model: mut m2, state: mut st2, .. } = Checkpoint::load(&path).unwrap();
        recs.extend(run(&mut m2, &mut st2, 3));
        resumable &= (m2.store().flat_values(), recs) == a;
    }
    std::fs::remove_dir_all(&dir).ok();
    outcome(reproducible && resumable, format!("bit-reproducible: {reproducible}, checkpoint continuation step-exact: {resumable}"))
}

fn main() -> ExitCode {
    // libtest-style flags such as --nocapture are ignored.
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let wants = |k: u32| selected.is_empty() || selected.contains(&k);
    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();
    let mut record = |k: u32, name: &'static str, f: &mut dyn FnMut() -> Outcome| {
        if wants(k) {
            let t = Instant::now();
            let o = f();
            println!("criterion {k:>2} {}: {name} ({:.0?}): {}", if o.pass { "PASS" } else { "FAIL" }, t.elapsed(), o.detail);
            results.push((k, name, o));
        }
    };
    record(1, "normalization and exact sampling", &mut criterion_1);
    record(2, "expressivity reductions", &mut criterion_2);
    record(3, "log-amplitude gradients", &mut criterion_3);
    record(4, "Hamiltonian and exact diagonalization", &mut criterion_4);
    record(5, "DMRG at chi 64 on 4x4", &mut criterion_5);
    record(6, "symmetries", &mut criterion_6);
    record(7, "variance control", &mut criterion_7);
    // Criterion 9 reuses the 4x4 run from criterion 8.
    let mut small = None;
    let small_run = || train_from_dmrg(4, 4, 2000, TRAIN_BATCH);
    record(8, "4x4 training from DMRG(8)", &mut || criterion_8(small.get_or_insert_with(small_run)));
    record(9, "improvement over DMRG(8) from 4x4 to 6x6", &mut || {
        let large = train_from_dmrg(6, 6, 2000, 1024);
        criterion_9(small.get_or_insert_with(small_run), &large)
    });
    record(10, "determinism and persistence", &mut criterion_10);
    let failed: Vec<u32> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    println!("acceptance: {} passed, {} failed {:?}", results.len() - failed.len(), failed.len(), failed);
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
