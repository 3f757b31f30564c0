//! Helpers shared by the integration tests and the acceptance run.
#![allow(dead_code)]

use std::f64::consts::PI;

use antn::antn::{AntnMode, AntnModel};
use antn::arnn::{Arnn, HeadEncoding, OutputInit, SymmetryFlags};
use antn::lattice::SpinConfig;
use antn::model::Model;
use antn::mps::{Mps, TrainableMps};
use antn::wavefunction::{Ansatz, LogAmplitude, Wavefunction};
use rand::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    Mps,
    Arnn,
    Elementwise,
    Blockwise,
}

pub const FAMILIES: [Family; 4] = [Family::Mps, Family::Arnn, Family::Elementwise, Family::Blockwise];

pub fn random_canonical_mps(n: usize, chi: usize, rng: &mut impl Rng) -> Mps {
    Mps::random(n, chi, rng).right_canonicalize().expect("random MPS is nonzero")
}

/// A random model of `family` on `n` sites. Symmetry flags are ignored for plain MPS.
pub fn random_model(family: Family, n: usize, symmetry: SymmetryFlags, rng: &mut impl Rng) -> Model {
    match family {
        Family::Mps => Model::Mps(TrainableMps::from_mps(&random_canonical_mps(n, 3, rng))),
        Family::Arnn => Model::Arnn(Arnn::new(n, 2, 8, HeadEncoding::Polar, symmetry, rng).unwrap()),
        Family::Elementwise | Family::Blockwise => {
            let mode = if family == Family::Elementwise { AntnMode::Elementwise } else { AntnMode::Blockwise };
            let mps = random_canonical_mps(n, 3, rng);
            Model::Antn(AntnModel::new(&mps, mode, 2, 8, symmetry, OutputInit::Uniform(0.5), rng).unwrap())
        }
    }
}

pub fn all_configs(n: usize) -> impl Iterator<Item = SpinConfig> {
    (0..1u64 << n).map(move |i| SpinConfig::from_index(i, n))
}

/// Smallest angle between two phases.
pub fn phase_diff(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    if d > PI {
        d - 2.0 * PI
    } else {
        d
    }
}

/// Relative difference of two amplitudes, comparing modulus and phase.
pub fn amplitude_rel_diff(a: LogAmplitude, b: LogAmplitude) -> f64 {
    match (a.is_zero(), b.is_zero()) {
        (true, true) => 0.0,
        (true, false) | (false, true) => f64::INFINITY,
        _ => (a.log_mag - b.log_mag).abs().max(phase_diff(a.phase, b.phase).abs()),
    }
}

/// Worst ratio `|fd − an| / (atol + rtol·|an|)` between central-difference
/// and analytic derivatives of `Re log ψ` and `Im log ψ`; at most 1 passes.
/// Checks about `max_params` parameters spread over the store.
pub fn finite_difference_error(model: &Model, x: &SpinConfig, h: f64, rtol: f64, max_params: usize) -> f64 {
    const ATOL: f64 = 1e-7;
    let n_params = model.store().len();
    let mut re_buf = model.store().grad_buffer();
    model.accumulate_log_grad(x, 1.0, 0.0, &mut re_buf).unwrap();
    let mut im_buf = model.store().grad_buffer();
    model.accumulate_log_grad(x, 0.0, 1.0, &mut im_buf).unwrap();
    let (g_re, g_im) = (re_buf.flat(), im_buf.flat());
    let base = model.store().flat_values();
    let stride = n_params.div_ceil(max_params).max(1);
    let mut probe = model.clone();
    let mut worst: f64 = 0.0;
    for k in (0..n_params).step_by(stride) {
        let mut eval = |delta: f64| {
            let mut p = base.clone();
            p[k] += delta;
            probe.store_mut().set_flat_values(&p).unwrap();
            probe.log_amplitude(x).unwrap()
        };
        let (plus, minus) = (eval(h), eval(-h));
        let fd_re = (plus.log_mag - minus.log_mag) / (2.0 * h);
        let fd_im = phase_diff(plus.phase, minus.phase) / (2.0 * h);
        for (fd, an) in [(fd_re, g_re[k]), (fd_im, g_im[k])] {
            worst = worst.max((fd - an).abs() / (ATOL + rtol * an.abs()));
        }
    }
    worst
}

#[derive(Clone, Copy, Debug, serde::Deserialize)]
pub struct EdFixture {
    pub lx: usize,
    pub ly: usize,
    pub j2: f64,
    pub energy: f64,
}

/// Pinned ground-state energies from `tests/fixtures/ed_energies.toml`.
pub fn ed_fixtures() -> Vec<EdFixture> {
    #[derive(serde::Deserialize)]
    struct File {
        system: Vec<EdFixture>,
    }
    let text = include_str!("../fixtures/ed_energies.toml");
    toml::from_str::<File>(text).expect("fixture file parses").system
}

pub fn ed_fixture(lx: usize, ly: usize, j2: f64) -> f64 {
    ed_fixtures().into_iter().find(|f| f.lx == lx && f.ly == ly && f.j2 == j2).expect("pinned fixture").energy
}
