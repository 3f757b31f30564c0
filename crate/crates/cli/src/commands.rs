//! Subcommand bodies. Each returns the artifacts it wrote or fails with a
//! [`CliError`] that maps onto the process exit code.

use std::fs::{self, File, OpenOptions};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use antn::arnn::{Arnn, HeadEncoding};
use antn::checkpoint::{Checkpoint, CheckpointError};
use antn::dmrg::{build_mpo, dmrg_ground_state, DmrgError, DmrgResult};
use antn::model::Model;
use antn::mps::TrainableMps;
use antn::oracle::{exact_ground_state, OracleError};
use antn::vmc::{draw_samples, estimate_energy, local_energies, train_step, EnergyEstimate, TrainState, VmcError, WeightedBatch};
use antn::wavefunction::{Ansatz, AnsatzError};
use log::{info, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use thiserror::Error;

use crate::config::{ConfigError, ModelKind, RunConfig};

/// Largest lattice handed to exact diagonalization.
const ED_MAX_SITES: usize = 20;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl From<VmcError> for CliError {
    fn from(e: VmcError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl From<DmrgError> for CliError {
    fn from(e: DmrgError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl From<AnsatzError> for CliError {
    fn from(e: AnsatzError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl From<OracleError> for CliError {
    fn from(e: OracleError) -> Self {
        match e {
            OracleError::TooLarge { .. } => CliError::Config(ConfigError::Invalid { field: "lattice", message: e.to_string() }),
            e => CliError::Numerical(e.to_string()),
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

fn write_line(out: &mut impl Write, value: &serde_json::Value, path: &Path) -> Result<(), CliError> {
    writeln!(out, "{value}").map_err(|e| io_err(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, CliError> {
    Checkpoint::load(path).map_err(|e| match e {
        CheckpointError::Ansatz(e) => CliError::Numerical(e.to_string()),
        e => io_err(path, e),
    })
}

fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<(), CliError> {
    ckpt.save(path).map_err(|e| io_err(path, e))
}

pub fn cmd_ed(cfg: &RunConfig) -> Result<(), CliError> {
    let n = cfg.n_sites();
    if n > ED_MAX_SITES {
        return Err(ConfigError::Invalid { field: "lattice", message: format!("{n} sites exceeds the ED limit of {ED_MAX_SITES}") }.into());
    }
    let res = exact_ground_state(&cfg.terms())?;
    let record = json!({
        "lx": cfg.lattice.lx,
        "ly": cfg.lattice.ly,
        "j1": cfg.couplings.j1,
        "j2": cfg.couplings.j2,
        "energy": res.energy,
        "energy_per_site": res.energy / n as f64,
        "residual": res.residual,
    });
    println!("{record}");
    Ok(())
}

fn run_dmrg(cfg: &RunConfig, chi: usize) -> Result<DmrgResult, CliError> {
    info!("dmrg {}x{} chi={chi} sweeps={}", cfg.lattice.lx, cfg.lattice.ly, cfg.dmrg.sweeps);
    Ok(dmrg_ground_state(&build_mpo(&cfg.terms()), chi, cfg.dmrg.sweeps, cfg.train.seed)?)
}

pub fn cmd_dmrg(cfg: &RunConfig) -> Result<(), CliError> {
    let dir = &cfg.output.dir;
    create_dir(dir)?;
    let res = run_dmrg(cfg, cfg.dmrg.chi)?;
    let n = cfg.n_sites() as f64;
    let path = dir.join("dmrg.jsonl");
    let mut out = BufWriter::new(File::create(&path).map_err(|e| io_err(&path, e))?);
    for (k, (&e, &w)) in res.sweep_energies.iter().zip(&res.discarded_weights).enumerate() {
        let rec = json!({"sweep": k, "energy": e, "energy_per_site": e / n, "discarded_weight": w});
        println!("{rec}");
        write_line(&mut out, &rec, &path)?;
    }
    out.flush().map_err(|e| io_err(&path, e))?;
    let model = Model::Mps(TrainableMps::from_mps(&res.mps));
    let state = TrainState::new(model.store().len());
    let ckpt = Checkpoint { config: cfg.to_toml(), model, state, seed: cfg.train.seed };
    save_checkpoint(&ckpt, &dir.join("dmrg.ckpt"))?;
    info!("final energy {:.10} ({:.8} per site)", res.energy, res.energy / n);
    Ok(())
}

/// Fresh model of `kind` for `cfg`; tensor-network models start from DMRG at bond dimension `chi`.
pub fn build_model(cfg: &RunConfig, kind: ModelKind, chi: usize) -> Result<Model, CliError> {
    let m = &cfg.model;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.train.seed);
    Ok(match kind {
        ModelKind::Arnn => Model::Arnn(Arnn::new(cfg.n_sites(), m.depth, m.hidden, HeadEncoding::Polar, m.symmetry(), &mut rng)?),
        ModelKind::Mps => Model::Mps(TrainableMps::from_mps(&run_dmrg(cfg, chi)?.mps)),
        ModelKind::Elementwise | ModelKind::Blockwise => {
            let mode = kind.antn_mode().expect("antn kind");
            let mps = run_dmrg(cfg, chi)?.mps;
            Model::antn_from_mps(&mps, mode, m.depth, m.hidden, m.symmetry(), &mut rng)?
        }
    })
}

fn metrics_record(cfg: &RunConfig, step: u64, e: &EnergyEstimate, lr: f64, wall_ms: f64) -> serde_json::Value {
    let n = cfg.n_sites() as f64;
    json!({
        "step": step,
        "energy": e.mean.re,
        "energy_per_site": e.mean.re / n,
        "std_err": e.std_error / n,
        "im_energy": e.mean.im,
        "lr": lr,
        "wall_ms": wall_ms,
    })
}

/// Trains until `cfg.train.steps`, appending metrics to `dir/metrics.jsonl`
/// and checkpointing to `dir/checkpoint.ckpt`.
pub fn train_model(cfg: &RunConfig, model: &mut Model, state: &mut TrainState, dir: &Path) -> Result<(), CliError> {
    create_dir(dir)?;
    let settings = cfg.train_settings();
    settings.validate()?;
    let metrics = dir.join("metrics.jsonl");
    let file = OpenOptions::new().create(true).append(true).open(&metrics).map_err(|e| io_err(&metrics, e))?;
    let mut out = BufWriter::new(file);
    let ckpt_path = dir.join("checkpoint.ckpt");
    let save = |model: &Model, state: &TrainState| {
        let ckpt = Checkpoint { config: cfg.to_toml(), model: model.clone(), state: state.clone(), seed: cfg.train.seed };
        save_checkpoint(&ckpt, &ckpt_path)
    };
    let every = cfg.train.checkpoint_every;
    let terms = cfg.terms();
    while state.step < settings.steps {
        let t0 = Instant::now();
        let rec = train_step(model, &terms, state, &settings)?;
        let wall_ms = t0.elapsed().as_secs_f64() * 1e3;
        write_line(&mut out, &metrics_record(cfg, rec.step, &rec.energy, rec.lr, wall_ms), &metrics)?;
        if rec.step % 50 == 0 {
            info!(
                "step {} energy/site {:.6} ± {:.6} lr {:.2e}",
                rec.step,
                rec.energy.mean.re / cfg.n_sites() as f64,
                rec.energy.std_error / cfg.n_sites() as f64,
                rec.lr
            );
        }
        if every > 0 && state.step % every == 0 {
            out.flush().map_err(|e| io_err(&metrics, e))?;
            save(model, state)?;
        }
    }
    out.flush().map_err(|e| io_err(&metrics, e))?;
    save(model, state)
}

pub fn cmd_train(cfg: &RunConfig) -> Result<(), CliError> {
    let dir = cfg.output.dir.clone();
    create_dir(&dir)?;
    let metrics = dir.join("metrics.jsonl");
    if metrics.exists() {
        fs::remove_file(&metrics).map_err(|e| io_err(&metrics, e))?;
    }
    let mut model = build_model(cfg, cfg.model.kind, cfg.model.chi)?;
    let mut state = TrainState::new(model.store().len());
    info!("{} with {} parameters", model.kind(), model.store().len());
    train_model(cfg, &mut model, &mut state, &dir)
}

/// Continues from a checkpoint. The stored config snapshot is the base;
/// `overrides` apply on top (e.g. more steps).
pub fn cmd_resume(path: &Path, overrides: &[String], out: Option<PathBuf>) -> Result<(), CliError> {
    let ckpt = load_checkpoint(path)?;
    let mut cfg = RunConfig::from_toml(&ckpt.config, overrides)?;
    if cfg.train.seed != ckpt.seed {
        warn!("ignoring seed {}; the checkpoint's sampling stream uses seed {}", cfg.train.seed, ckpt.seed);
        cfg.train.seed = ckpt.seed;
    }
    if let Some(out) = out {
        cfg.output.dir = out;
    }
    let Checkpoint { mut model, mut state, .. } = ckpt;
    info!("resuming {} at step {}", model.kind(), state.step);
    train_model(&cfg, &mut model, &mut state, &cfg.output.dir.clone())
}

/// Energy of a frozen model from `samples` exact samples.
pub fn evaluate_model(cfg: &RunConfig, model: &Model, samples: usize, stream: u64) -> Result<EnergyEstimate, CliError> {
    let xs = draw_samples(model, samples, cfg.train.seed, stream)?;
    let batch = WeightedBatch::from_samples(&xs)?;
    let e_loc = local_energies(model, &cfg.terms(), &batch.configs)?;
    Ok(estimate_energy(&batch, &e_loc)?)
}

pub fn cmd_evaluate(path: &Path, overrides: &[String], samples: Option<usize>) -> Result<(), CliError> {
    let ckpt = load_checkpoint(path)?;
    let cfg = RunConfig::from_toml(&ckpt.config, overrides)?;
    let samples = samples.unwrap_or(cfg.train.batch);
    if samples == 0 {
        return Err(ConfigError::Invalid { field: "samples", message: "must be at least 1".into() }.into());
    }
    // The stream after the last training step, which training never used.
    let e = evaluate_model(&cfg, &ckpt.model, samples, ckpt.state.step)?;
    let n = cfg.n_sites() as f64;
    let record = json!({
        "step": ckpt.state.step,
        "samples": samples,
        "energy": e.mean.re,
        "energy_per_site": e.mean.re / n,
        "std_err": e.std_error / n,
        "im_energy": e.mean.im,
    });
    println!("{record}");
    Ok(())
}

pub fn cmd_sample(path: &Path, overrides: &[String], count: usize, out: Option<PathBuf>) -> Result<(), CliError> {
    let ckpt = load_checkpoint(path)?;
    let cfg = RunConfig::from_toml(&ckpt.config, overrides)?;
    let xs = draw_samples(&ckpt.model, count, cfg.train.seed, ckpt.state.step)?;
    let write_all = |w: &mut dyn Write| -> io::Result<()> {
        for x in &xs {
            writeln!(w, "{x}")?;
        }
        w.flush()
    };
    match out {
        Some(dir) => {
            create_dir(&dir)?;
            let path = dir.join("samples.txt");
            let mut w = BufWriter::new(File::create(&path).map_err(|e| io_err(&path, e))?);
            write_all(&mut w).map_err(|e| io_err(&path, e))
        }
        None => write_all(&mut io::stdout().lock()).map_err(|e| CliError::Io(format!("stdout: {e}"))),
    }
}

fn cell(v: Option<f64>) -> String {
    v.map(|e| format!("{e:.6}")).unwrap_or_default()
}

/// One row per lattice size; every model is trained for `train.steps` and
/// then evaluated on fresh samples. Energies are per site.
pub fn cmd_compare(cfg: &RunConfig) -> Result<(), CliError> {
    let dir = cfg.output.dir.clone();
    create_dir(&dir)?;
    let c = &cfg.compare;
    let header = format!("size,ED,DMRG({}),ARNN,Elementwise({}),Blockwise({})", c.elementwise_chi, c.elementwise_chi, c.blockwise_chi);
    let mut rows = vec![header];
    for &[lx, ly] in &c.sizes {
        let mut sub = cfg.clone();
        sub.lattice.lx = lx;
        sub.lattice.ly = ly;
        sub.validate()?;
        let n = sub.n_sites() as f64;
        let ed = if sub.n_sites() <= ED_MAX_SITES { Some(exact_ground_state(&sub.terms())?.energy / n) } else { None };
        let dmrg = run_dmrg(&sub, c.elementwise_chi)?.energy / n;
        let mut trained = Vec::new();
        for (kind, chi) in [(ModelKind::Arnn, 1), (ModelKind::Elementwise, c.elementwise_chi), (ModelKind::Blockwise, c.blockwise_chi)] {
            let run_dir = dir.join(format!("{lx}x{ly}")).join(format!("{kind:?}").to_lowercase());
            let metrics = run_dir.join("metrics.jsonl");
            if metrics.exists() {
                fs::remove_file(&metrics).map_err(|e| io_err(&metrics, e))?;
            }
            let mut model = build_model(&sub, kind, chi)?;
            let mut state = TrainState::new(model.store().len());
            info!("compare {lx}x{ly}: training {}", model.kind());
            train_model(&sub, &mut model, &mut state, &run_dir)?;
            trained.push(evaluate_model(&sub, &model, sub.train.batch, state.step)?.mean.re / n);
        }
        rows.push(format!("{lx}x{ly},{},{},{},{},{}", cell(ed), cell(Some(dmrg)), cell(Some(trained[0])), cell(Some(trained[1])), cell(Some(trained[2]))));
    }
    let path = dir.join("compare.csv");
    let text = rows.join("\n") + "\n";
    fs::write(&path, &text).map_err(|e| io_err(&path, e))?;
    print!("{text}");
    Ok(())
}
