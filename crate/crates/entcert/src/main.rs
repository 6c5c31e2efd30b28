//! Command-line entry point: simulate measurement shots, certify
//! entanglement dimension from shot files, run parameter sweeps, and print
//! threshold ladders.

use clap::{Args, Parser, Subcommand};
use entcert::envelope::GaussianEnvelope;
use entcert::error::{Error, Result};
use entcert::fock::Statistics;
use entcert::hubbard::{disorder_realization, HubbardParams, Interactions};
use entcert::measure::{read_shots, sample_positions, write_shots, MomentumSampler, ShotRecord};
use entcert::pipeline::{
    certify, disorder_average, exact_bound, exact_fidelity, prepare_state, CertificationResult,
    DisorderMode, NoiseSpec, ReferenceSpec, System,
};
use entcert::reference::schmidt_decompose;
use entcert::stats::BootstrapPlan;
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

/// Full experiment description. Loaded from a JSON file; individual fields
/// can be overridden by command-line flags.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExperimentConfig {
    /// Lattice sites `L` (one dimension).
    sites: usize,
    /// Number of distinguishable species.
    #[serde(default = "default_species")]
    species: usize,
    /// Atoms per species.
    #[serde(default = "default_atoms")]
    atoms_per_species: usize,
    /// Exchange statistics of identical atoms.
    #[serde(default = "default_statistics")]
    statistics: Statistics,
    /// Interaction strengths `U/J`.
    interactions: Interactions,
    /// Dephasing and thermal noise.
    #[serde(default)]
    noise: NoiseSpec,
    /// Site-offset disorder standard deviation (0 = clean lattice).
    #[serde(default)]
    sigma_v: f64,
    /// Disorder realizations for ensemble sweeps (1 = single realization).
    #[serde(default = "default_one")]
    disorder_realizations: usize,
    /// Disorder averaging mode for ensemble sweeps.
    #[serde(default = "default_disorder_mode")]
    disorder_mode: DisorderMode,
    /// Momentum-envelope width `σ_k · d`.
    #[serde(default = "default_sigma_k")]
    sigma_k: f64,
    /// Fringe-term truncation for the momentum sampler; absent = automatic.
    #[serde(default)]
    delta_c: Option<f64>,
    /// Position shots to draw.
    n_pos: usize,
    /// Momentum shots to draw.
    n_s: usize,
    /// Reference state for certification.
    reference: ReferenceSpec,
    /// Bootstrap resampling plan.
    #[serde(default)]
    bootstrap: BootstrapPlan,
    /// Master seed; position, momentum, and disorder draws use derived
    /// streams.
    seed: u64,
}

fn default_species() -> usize {
    2
}
fn default_atoms() -> usize {
    1
}
fn default_statistics() -> Statistics {
    Statistics::HardCoreBoson
}
fn default_one() -> usize {
    1
}
fn default_disorder_mode() -> DisorderMode {
    DisorderMode::Mixture
}
fn default_sigma_k() -> f64 {
    entcert::envelope::DEFAULT_SIGMA_K
}

impl ExperimentConfig {
    fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::config(format!("invalid config: {e}")))
    }

    /// Stable 64-bit FNV-1a hash of the canonical JSON serialization.
    fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        let mut h: u64 = 0xcbf29ce484222325;
        for b in text.as_bytes() {
            h ^= *b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
        format!("{h:016x}")
    }

    fn hubbard_params(&self) -> Result<HubbardParams> {
        let offsets = disorder_realization(self.sites, self.sigma_v, self.seed ^ DISORDER_SALT, 0)?;
        Ok(HubbardParams { interactions: self.interactions.clone(), site_offsets: offsets })
    }

    fn envelope(&self) -> Result<GaussianEnvelope> {
        GaussianEnvelope::new(self.sigma_k)
    }

    fn system(&self) -> Result<System> {
        System::new(self.sites, self.species, self.atoms_per_species, self.statistics)
    }
}

/// Seed streams derived from the master seed.
const POSITION_SALT: u64 = 0x706f73;
const MOMENTUM_SALT: u64 = 0x6d6f6d;
const DISORDER_SALT: u64 = 0x646973;

/// Sidecar metadata written next to simulated shot files.
#[derive(Debug, Serialize, Deserialize)]
struct SimulationMetadata {
    config_hash: String,
    seed: u64,
    sigma_k: f64,
    n_pos: usize,
    n_s: usize,
    /// Exact fidelity to the configured reference (λ-scan resolved on the
    /// exact path).
    exact_fidelity: f64,
    /// Exact-path fidelity lower bound.
    exact_bound: f64,
    /// λ₁ resolved by an exact-path scan, when applicable.
    lambda1: Option<f64>,
    /// Schmidt spectrum of the prepared state (pure states only).
    schmidt_spectrum: Option<Vec<f64>>,
    /// State purity.
    purity: f64,
}

#[derive(Parser)]
#[command(name = "entcert", version, about = "Few-body lattice shot simulation and entanglement-dimension certification", long_about = None)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flag overrides applied on top of the JSON config.
#[derive(Args, Debug, Clone)]
struct Overrides {
    /// Lattice sites L.
    #[arg(long)]
    sites: Option<usize>,
    /// Scalar interaction strength U/J.
    #[arg(long)]
    u_over_j: Option<f64>,
    /// Dephasing parameter r.
    #[arg(long)]
    dephasing: Option<f64>,
    /// Inverse temperature βJ (thermal state instead of ground state).
    #[arg(long)]
    beta_j: Option<f64>,
    /// Disorder standard deviation σ_V.
    #[arg(long)]
    sigma_v: Option<f64>,
    /// Envelope width σ_k·d.
    #[arg(long)]
    sigma_k: Option<f64>,
    /// Position shot count.
    #[arg(long)]
    n_pos: Option<usize>,
    /// Momentum shot count.
    #[arg(long)]
    n_s: Option<usize>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Bootstrap replicas.
    #[arg(long)]
    replicas: Option<usize>,
    /// Reference family: attractive | anticorrelated | nondimer |
    /// lambda=<λ₁> | lambda-scan[=<grid>].
    #[arg(long)]
    reference: Option<String>,
}

impl Overrides {
    fn apply(&self, cfg: &mut ExperimentConfig) -> Result<()> {
        if let Some(l) = self.sites {
            cfg.sites = l;
        }
        if let Some(u) = self.u_over_j {
            cfg.interactions = Interactions::Scalar(u);
        }
        if let Some(r) = self.dephasing {
            cfg.noise.dephasing_r = r;
        }
        if let Some(b) = self.beta_j {
            cfg.noise.beta_j = Some(b);
        }
        if let Some(s) = self.sigma_v {
            cfg.sigma_v = s;
        }
        if let Some(s) = self.sigma_k {
            cfg.sigma_k = s;
        }
        if let Some(n) = self.n_pos {
            cfg.n_pos = n;
        }
        if let Some(n) = self.n_s {
            cfg.n_s = n;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(r) = self.replicas {
            cfg.bootstrap.replicas = r;
        }
        if let Some(spec) = &self.reference {
            cfg.reference = parse_reference(spec)?;
        }
        Ok(())
    }
}

fn parse_reference(text: &str) -> Result<ReferenceSpec> {
    if let Some(rest) = text.strip_prefix("lambda=") {
        let lambda1: f64 =
            rest.parse().map_err(|_| Error::config(format!("invalid lambda1 value '{rest}'")))?;
        return Ok(ReferenceSpec::Lambda { lambda1 });
    }
    if let Some(rest) = text.strip_prefix("lambda-scan=") {
        let grid: usize =
            rest.parse().map_err(|_| Error::config(format!("invalid scan grid '{rest}'")))?;
        return Ok(ReferenceSpec::LambdaScan { grid });
    }
    match text {
        "attractive" => Ok(ReferenceSpec::Attractive),
        "anticorrelated" => Ok(ReferenceSpec::Anticorrelated),
        "nondimer" => Ok(ReferenceSpec::NondimerUniform),
        "lambda-scan" => Ok(ReferenceSpec::LambdaScan { grid: 200 }),
        other => Err(Error::config(format!(
            "unknown reference '{other}' (expected attractive | anticorrelated | nondimer | lambda=<λ₁> | lambda-scan)"
        ))),
    }
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a lattice state and write position/momentum shot files plus
    /// metadata.
    Simulate {
        /// JSON experiment config.
        #[arg(long)]
        config: PathBuf,
        /// Output directory for positions.jsonl, momentum.jsonl, metadata.json.
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Certify an entanglement-dimension lower bound from shot files.
    Certify {
        /// JSON experiment config (reference, envelope, bootstrap plan).
        #[arg(long)]
        config: PathBuf,
        /// Position-basis shot file (JSONL).
        #[arg(long)]
        positions: PathBuf,
        /// Momentum-basis shot file (JSONL).
        #[arg(long)]
        momentum: PathBuf,
        /// Optional simulation metadata for consistency checks.
        #[arg(long)]
        metadata: Option<PathBuf>,
        /// Write the result JSON here as well as to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Sweep one parameter axis, writing a CSV summary and per-point results.
    Sweep {
        /// JSON experiment config (the sweep baseline).
        #[arg(long)]
        config: PathBuf,
        /// Axis: U_over_J | r | sigma_V | L | N_s | beta_J | lambda1.
        #[arg(long)]
        axis: String,
        /// Comma-separated axis values.
        #[arg(long)]
        values: String,
        /// Output directory for sweep.csv and point_<i>.json.
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Print the certification threshold ladder for a reference spec.
    Thresholds {
        /// JSON experiment config.
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
}

fn main() {
    let cli = Cli::parse();
    init_worker_pool();
    if let Err(e) = run(cli) {
        eprintln!("{e}");
        std::process::exit(e.exit_code());
    }
}

/// Honor the ENTCERT_WORKERS environment variable for the parallel pool.
fn init_worker_pool() {
    #[cfg(feature = "parallel")]
    if let Ok(n) = std::env::var("ENTCERT_WORKERS") {
        if let Ok(n) = n.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        } else {
            eprintln!("warning: ignoring non-numeric ENTCERT_WORKERS value '{n}'");
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { config, out_dir, overrides } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            overrides.apply(&mut cfg)?;
            cmd_simulate(&cfg, &out_dir)
        }
        Command::Certify { config, positions, momentum, metadata, out, overrides } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            overrides.apply(&mut cfg)?;
            cmd_certify(&cfg, &positions, &momentum, metadata.as_deref(), out.as_deref())
        }
        Command::Sweep { config, axis, values, out_dir, overrides } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            overrides.apply(&mut cfg)?;
            cmd_sweep(&cfg, &axis, &values, &out_dir)
        }
        Command::Thresholds { config, overrides } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            overrides.apply(&mut cfg)?;
            cmd_thresholds(&cfg)
        }
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    Ok(())
}

fn simulate_shots(cfg: &ExperimentConfig) -> Result<(Vec<ShotRecord>, Vec<ShotRecord>, SimulationMetadata)> {
    let sys = cfg.system()?;
    let params = cfg.hubbard_params()?;
    let rho = prepare_state(&sys.basis, &params, &cfg.noise)?;
    let env = cfg.envelope()?;
    let pos = sample_positions(&rho, &sys.basis, cfg.n_pos, cfg.seed ^ POSITION_SALT)?;
    let sampler = MomentumSampler::new(&rho, &sys.basis, &sys.modes, env, cfg.delta_c)?;
    let mom = sampler.sample(cfg.n_s, cfg.seed ^ MOMENTUM_SALT)?;
    let (ft_exact, lambda1) = exact_bound(&sys.basis, &sys.modes, &rho, &cfg.reference)?;
    let fid_spec = match (lambda1, &cfg.reference) {
        (Some(l1), ReferenceSpec::LambdaScan { .. }) => ReferenceSpec::Lambda { lambda1: l1 },
        _ => cfg.reference,
    };
    let f_exact = exact_fidelity(&sys.basis, &rho, &fid_spec)?;
    let schmidt = if (rho.purity() - 1.0).abs() < 1e-9 && cfg.species == 2 {
        let (_, vectors) = entcert::hubbard::sorted_eigen(&rho.matrix);
        let psi = vectors.column(rho.dim() - 1).clone_owned();
        Some(schmidt_decompose(&psi, &sys.basis)?)
    } else {
        None
    };
    let meta = SimulationMetadata {
        config_hash: cfg.hash(),
        seed: cfg.seed,
        sigma_k: cfg.sigma_k,
        n_pos: cfg.n_pos,
        n_s: cfg.n_s,
        exact_fidelity: f_exact,
        exact_bound: ft_exact,
        lambda1,
        schmidt_spectrum: schmidt,
        purity: rho.purity(),
    };
    Ok((pos, mom, meta))
}

fn cmd_simulate(cfg: &ExperimentConfig, out_dir: &Path) -> Result<()> {
    fs::create_dir_all(out_dir)?;
    let (pos, mom, meta) = simulate_shots(cfg)?;
    write_shots(BufWriter::new(fs::File::create(out_dir.join("positions.jsonl"))?), &pos)?;
    write_shots(BufWriter::new(fs::File::create(out_dir.join("momentum.jsonl"))?), &mom)?;
    write_json(&out_dir.join("metadata.json"), &meta)?;
    println!(
        "wrote {} position shots, {} momentum shots to {} (config {}, exact F = {:.6})",
        pos.len(),
        mom.len(),
        out_dir.display(),
        meta.config_hash,
        meta.exact_fidelity
    );
    Ok(())
}

/// A certification result with run provenance attached.
#[derive(Debug, Serialize)]
struct CertifyOutput {
    config_hash: String,
    seed: u64,
    #[serde(flatten)]
    result: CertificationResult,
}

fn cmd_certify(
    cfg: &ExperimentConfig,
    positions: &Path,
    momentum: &Path,
    metadata: Option<&Path>,
    out: Option<&Path>,
) -> Result<()> {
    let sys = cfg.system()?;
    let pos = read_shots(
        BufReader::new(fs::File::open(positions).map_err(|e| Error::data(format!("{}: {e}", positions.display())))?),
        &sys.basis,
    )?;
    let mom = read_shots(
        BufReader::new(fs::File::open(momentum).map_err(|e| Error::data(format!("{}: {e}", momentum.display())))?),
        &sys.basis,
    )?;
    if let Some(meta_path) = metadata {
        let meta: SimulationMetadata = serde_json::from_str(
            &fs::read_to_string(meta_path).map_err(|e| Error::data(format!("{}: {e}", meta_path.display())))?,
        )
        .map_err(|e| Error::data(format!("invalid metadata: {e}")))?;
        if (meta.sigma_k - cfg.sigma_k).abs() > 1e-12 {
            eprintln!(
                "warning: metadata envelope sigma_k = {} differs from config sigma_k = {}; the projection assumes the data-source envelope",
                meta.sigma_k, cfg.sigma_k
            );
        }
    }
    let env = cfg.envelope()?;
    let result = certify(&sys.basis, &sys.modes, &env, &cfg.reference, &pos, &mom, &cfg.bootstrap)?;
    print_ladder(&result);
    let output = CertifyOutput { config_hash: cfg.hash(), seed: cfg.seed, result };
    println!("{}", serde_json::to_string_pretty(&output)?);
    if let Some(path) = out {
        write_json(path, &output)?;
    }
    Ok(())
}

fn print_ladder(result: &CertificationResult) {
    eprintln!("F-bound = {:.6} ± {:.6} ({})", result.f_tilde, result.se, result.reference);
    eprintln!("  k  B_k       exceeded");
    for (i, b) in result.thresholds.iter().enumerate() {
        let mark = if result.f_tilde > *b { "yes" } else { "no" };
        eprintln!("  {:<2} {:<9.6} {}", i + 1, b, mark);
    }
    eprintln!(
        "certified dimension: {} (point), {} (1 sigma), {} (3 sigma)",
        result.certified_point, result.certified_1sigma, result.certified_3sigma
    );
}

/// One sweep-point summary row.
#[derive(Debug, Serialize)]
struct SweepRow {
    axis: String,
    value: f64,
    f_exact: f64,
    f_tilde_exact: f64,
    f_tilde: f64,
    se: f64,
    certified_point: usize,
    certified_1sigma: usize,
    certified_3sigma: usize,
    lambda1: Option<f64>,
    n_pos: usize,
    n_s: usize,
    seed: u64,
    config_hash: String,
}

fn apply_axis(cfg: &mut ExperimentConfig, axis: &str, value: f64) -> Result<()> {
    match axis {
        "U_over_J" => cfg.interactions = Interactions::Scalar(value),
        "r" => cfg.noise.dephasing_r = value,
        "sigma_V" => cfg.sigma_v = value,
        "L" => {
            if value.fract() != 0.0 || value < 2.0 {
                return Err(Error::config(format!("L axis value must be an integer >= 2, got {value}")));
            }
            cfg.sites = value as usize;
        }
        "N_s" => {
            if value.fract() != 0.0 || value < 1.0 {
                return Err(Error::config(format!("N_s axis value must be a positive integer, got {value}")));
            }
            cfg.n_s = value as usize;
        }
        "beta_J" => cfg.noise.beta_j = Some(value),
        "lambda1" => cfg.reference = ReferenceSpec::Lambda { lambda1: value },
        other => {
            return Err(Error::config(format!(
                "unknown sweep axis '{other}' (expected U_over_J | r | sigma_V | L | N_s | beta_J | lambda1)"
            )))
        }
    }
    Ok(())
}

fn cmd_sweep(base: &ExperimentConfig, axis: &str, values: &str, out_dir: &Path) -> Result<()> {
    let vals: Vec<f64> = values
        .split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|_| Error::config(format!("invalid axis value '{v}'"))))
        .collect::<Result<_>>()?;
    if vals.is_empty() {
        return Err(Error::config("empty sweep value list"));
    }
    if !vals.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::config("sweep axis values must be strictly increasing"));
    }
    fs::create_dir_all(out_dir)?;
    let mut rows = Vec::with_capacity(vals.len());
    for (i, &v) in vals.iter().enumerate() {
        let mut cfg = base.clone();
        apply_axis(&mut cfg, axis, v)?;
        // Each point draws independent shots from a value-independent stream.
        cfg.seed = base.seed.wrapping_add(i as u64);
        let sys = cfg.system()?;
        let row = if axis == "sigma_V" && cfg.disorder_realizations > 1 {
            // Ensemble axis: exact-path disorder averaging.
            let out = disorder_average(
                &sys.basis,
                &sys.modes,
                &cfg.interactions,
                &cfg.reference,
                &cfg.noise,
                v,
                cfg.disorder_realizations,
                cfg.seed ^ DISORDER_SALT,
                cfg.disorder_mode,
            )?;
            write_json(&out_dir.join(format!("point_{i}.json")), &out)?;
            SweepRow {
                axis: axis.to_string(),
                value: v,
                f_exact: out.mean_f,
                f_tilde_exact: out.mean_f_tilde,
                f_tilde: out.mean_f_tilde,
                se: out.spread_f_tilde,
                certified_point: out.certified,
                certified_1sigma: out.certified,
                certified_3sigma: out.certified,
                lambda1: None,
                n_pos: 0,
                n_s: 0,
                seed: cfg.seed,
                config_hash: cfg.hash(),
            }
        } else {
            let (pos, mom, meta) = simulate_shots(&cfg)?;
            let env = cfg.envelope()?;
            let result = certify(&sys.basis, &sys.modes, &env, &cfg.reference, &pos, &mom, &cfg.bootstrap)?;
            let output = CertifyOutput { config_hash: cfg.hash(), seed: cfg.seed, result };
            write_json(&out_dir.join(format!("point_{i}.json")), &output)?;
            SweepRow {
                axis: axis.to_string(),
                value: v,
                f_exact: meta.exact_fidelity,
                f_tilde_exact: meta.exact_bound,
                f_tilde: output.result.f_tilde,
                se: output.result.se,
                certified_point: output.result.certified_point,
                certified_1sigma: output.result.certified_1sigma,
                certified_3sigma: output.result.certified_3sigma,
                lambda1: output.result.lambda1,
                n_pos: output.result.n_pos,
                n_s: output.result.n_mom,
                seed: cfg.seed,
                config_hash: cfg.hash(),
            }
        };
        rows.push(row);
    }
    let csv_path = out_dir.join("sweep.csv");
    let mut csv = BufWriter::new(fs::File::create(&csv_path)?);
    writeln!(
        csv,
        "# axis values are dimensionless (U/J, r, sigma_V/J, sites, shot count, beta*J, lambda1)"
    )?;
    writeln!(
        csv,
        "axis,value,f_exact,f_tilde_exact,f_tilde,se,certified_point,certified_1sigma,certified_3sigma,lambda1,n_pos,n_s,seed,config_hash"
    )?;
    for r in &rows {
        writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.axis,
            r.value,
            r.f_exact,
            r.f_tilde_exact,
            r.f_tilde,
            r.se,
            r.certified_point,
            r.certified_1sigma,
            r.certified_3sigma,
            r.lambda1.map_or(String::new(), |l| l.to_string()),
            r.n_pos,
            r.n_s,
            r.seed,
            r.config_hash
        )?;
    }
    println!("wrote {} sweep points to {}", rows.len(), csv_path.display());
    Ok(())
}

fn cmd_thresholds(cfg: &ExperimentConfig) -> Result<()> {
    let sys = cfg.system()?;
    let spec = match cfg.reference {
        ReferenceSpec::LambdaScan { .. } => {
            return Err(Error::config("thresholds needs a concrete reference; use lambda=<λ₁> instead of a scan"))
        }
        s => s,
    };
    let result = entcert::reference::ReferenceState::make(spec.kind(cfg.species, None)?, &sys.basis)?;
    println!("{}", spec.descriptor());
    println!("k,B_k");
    for (i, b) in result.ladder().values.iter().enumerate() {
        println!("{},{}", i + 1, b);
    }
    Ok(())
}
