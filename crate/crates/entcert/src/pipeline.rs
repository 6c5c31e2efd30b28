//! End-to-end certification: state preparation, shot projection, bound
//! assembly, bootstrap errors and disorder-ensemble averaging.

use crate::bound::{
    bound_repulsive, lambda_weights, optimize_lambda, repulsive_position_sums, repulsive_sg_exact,
    BoundAssembler,
};
use crate::envelope::GaussianEnvelope;
use crate::error::{Error, Result};
use crate::fock::{FockBasis, LatticeSpec, SpeciesConfig, Statistics};
use crate::hubbard::{
    apply_dephasing, build_hamiltonian, disorder_realization, ground_state, thermal_state,
    DensityMatrix, HubbardParams, Interactions,
};
use crate::measure::{position_counts, ShotRecord};
use crate::modes::{negate_class, SpeciesModes};
use crate::project::{JointMode, Projector};
use crate::reference::{ReferenceKind, ReferenceState};
use crate::stats::{bootstrap_se, mean_std, BootstrapPlan};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// A lattice/species configuration with its shift-class index.
pub struct System {
    pub basis: FockBasis,
    pub modes: SpeciesModes,
}

impl System {
    /// Enumerate the Fock basis and shift classes for one configuration.
    pub fn new(sites: usize, species: usize, atoms_per_species: usize, statistics: Statistics) -> Result<Self> {
        let basis = FockBasis::enumerate(
            LatticeSpec::new(sites)?,
            SpeciesConfig::new(species, atoms_per_species, statistics)?,
        )?;
        let modes = SpeciesModes::build(&basis);
        Ok(System { basis, modes })
    }
}

/// Noise applied to the prepared state, in order: thermal preparation (if
/// `beta_j` is set the state is thermal instead of the ground state), then
/// convex dephasing toward the maximally mixed state.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, Default)]
pub struct NoiseSpec {
    /// Dephasing mixing parameter `r ∈ [0, 1]`.
    #[serde(default)]
    pub dephasing_r: f64,
    /// Inverse temperature `βJ`; absent means the pure ground state.
    #[serde(default)]
    pub beta_j: Option<f64>,
}

/// Prepare the lattice state: ground or thermal state of the Hamiltonian,
/// then optional dephasing.
pub fn prepare_state(basis: &FockBasis, params: &HubbardParams, noise: &NoiseSpec) -> Result<DensityMatrix> {
    let h = build_hamiltonian(basis, params)?;
    let rho = match noise.beta_j {
        Some(beta) => thermal_state(&h, beta)?,
        None => {
            let (_, psi) = ground_state(&h)?;
            DensityMatrix::pure(&psi)
        }
    };
    if noise.dephasing_r != 0.0 {
        apply_dephasing(&rho, noise.dephasing_r)
    } else {
        Ok(rho)
    }
}

/// How the reference state and bound are chosen for certification.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ReferenceSpec {
    /// Maximally entangled same-site reference (two species, GHZ for three).
    Attractive,
    /// Maximally entangled anticorrelated reference (repulsive mirror).
    Anticorrelated,
    /// Uniform superposition of all site-disjoint two-atom configurations.
    NondimerUniform,
    /// Two-atom repulsive λ-family at a fixed largest Schmidt coefficient.
    Lambda { lambda1: f64 },
    /// Two-atom repulsive λ-family, scanning λ₁ for the best certified
    /// dimension.
    LambdaScan { grid: usize },
}

impl ReferenceSpec {
    /// Human-readable descriptor for result metadata.
    pub fn descriptor(&self) -> String {
        match self {
            ReferenceSpec::Attractive => "attractive maximally entangled reference".into(),
            ReferenceSpec::Anticorrelated => "anticorrelated maximally entangled reference".into(),
            ReferenceSpec::NondimerUniform => "uniform nondimer reference".into(),
            ReferenceSpec::Lambda { lambda1 } => format!("repulsive lambda family, lambda1 = {lambda1}"),
            ReferenceSpec::LambdaScan { grid } => format!("repulsive lambda family, {grid}-point scan"),
        }
    }

    /// The reference-state constructor tag, resolving the λ-scan to a
    /// concrete λ₁ when one is supplied.
    pub fn kind(&self, species: usize, resolved_lambda: Option<f64>) -> Result<ReferenceKind> {
        Ok(match self {
            ReferenceSpec::Attractive if species == 3 => ReferenceKind::Ghz,
            ReferenceSpec::Attractive => ReferenceKind::AttractiveMES,
            ReferenceSpec::Anticorrelated => ReferenceKind::RepulsiveMES,
            ReferenceSpec::NondimerUniform => ReferenceKind::NondimerUniform,
            ReferenceSpec::Lambda { lambda1 } => ReferenceKind::LambdaFamily(*lambda1),
            ReferenceSpec::LambdaScan { .. } => ReferenceKind::LambdaFamily(
                resolved_lambda.ok_or_else(|| Error::config("lambda scan not yet resolved"))?,
            ),
        })
    }

    /// True for the two λ-family variants (weighted-bound evaluation path).
    fn is_lambda_family(&self) -> bool {
        matches!(self, ReferenceSpec::Lambda { .. } | ReferenceSpec::LambdaScan { .. })
    }
}

/// A certified fidelity lower bound with diagnostics and provenance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CertificationResult {
    /// The fidelity lower bound.
    pub f_tilde: f64,
    /// Reference-population term of the bound.
    pub population: f64,
    /// Real coherence term of the bound.
    pub coherence: f64,
    /// Total Cauchy–Schwarz subtraction.
    pub subtraction: f64,
    /// Bootstrap standard error of `f_tilde`.
    pub se: f64,
    /// Largest dimension whose threshold `f_tilde` strictly exceeds.
    pub certified_point: usize,
    /// Certified dimension after subtracting one standard error.
    pub certified_1sigma: usize,
    /// Certified dimension after subtracting three standard errors.
    pub certified_3sigma: usize,
    /// Threshold ladder `B_1 < … < B_D` used for certification.
    pub thresholds: Vec<f64>,
    /// Reference-state descriptor.
    pub reference: String,
    /// λ₁ used (λ-family references only).
    pub lambda1: Option<f64>,
    /// Unnormalized all-zero-mode sample mean (real, imaginary): the
    /// momentum-side normalization diagnostic.
    pub g_zero_raw: (f64, f64),
    /// Number of position shots consumed.
    pub n_pos: usize,
    /// Number of momentum shots consumed.
    pub n_mom: usize,
    /// Bootstrap replica count.
    pub bootstrap_replicas: usize,
    /// Bootstrap seed.
    pub bootstrap_seed: u64,
}

/// Every folded joint fringe mode of the configuration with its conjugate
/// multiplicity κ: summing `κ · Re g` over the folded set equals the sum of
/// `Re g` over all joint modes.
pub fn folded_joint_modes(modes: &SpeciesModes, species: usize) -> (Vec<JointMode>, Vec<f64>) {
    let n = modes.len();
    let mut out_modes = Vec::new();
    let mut kappas = Vec::new();
    let mut stack = vec![0usize; species];
    let total = n.pow(species as u32);
    for flat in 0..total {
        let mut rem = flat;
        for slot in stack.iter_mut().rev() {
            *slot = rem % n;
            rem /= n;
        }
        let key: Vec<Vec<i32>> = stack.iter().map(|&c| modes.classes[c].clone()).collect();
        let neg: Vec<Vec<i32>> = key.iter().map(|c| negate_class(c)).collect();
        if key < neg {
            continue;
        }
        out_modes.push(stack.clone());
        kappas.push(if key == neg { 1.0 } else { 2.0 });
    }
    (out_modes, kappas)
}

fn certified_dims(reference: &ReferenceState, f: f64, se: f64) -> (usize, usize, usize) {
    let ladder = reference.ladder();
    (
        ladder.certified_dimension(f),
        ladder.certified_dimension(f - se),
        ladder.certified_dimension(f - 3.0 * se),
    )
}

/// Certify a fidelity lower bound from position and momentum shot records.
///
/// Builds the bound for `spec`, projects the momentum shots onto the needed
/// fringe modes, assembles `F̃`, and bootstraps its standard error by
/// resampling position and momentum shots independently.
pub fn certify(
    basis: &FockBasis,
    modes: &SpeciesModes,
    env: &GaussianEnvelope,
    spec: &ReferenceSpec,
    pos_shots: &[ShotRecord],
    mom_shots: &[ShotRecord],
    plan: &BootstrapPlan,
) -> Result<CertificationResult> {
    if pos_shots.is_empty() {
        return Err(Error::data("no position shots supplied"));
    }
    let counts = position_counts(pos_shots, basis)?;
    let n_pos: u64 = counts.iter().sum();
    let probs: Vec<f64> = counts.iter().map(|&c| c as f64 / n_pos as f64).collect();
    let projector = Projector::new(basis, modes, env.clone())?;

    if spec.is_lambda_family() {
        return certify_lambda(basis, modes, &projector, spec, &counts, &probs, mom_shots, plan);
    }

    // Restrict Cauchy–Schwarz enumeration to configurations actually seen:
    // zero-count configurations contribute exactly zero subtraction.
    let support: Vec<bool> = counts.iter().map(|&c| c > 0).collect();
    let assembler = match spec {
        ReferenceSpec::Attractive => BoundAssembler::attractive(basis, modes, Some(&support))?,
        ReferenceSpec::Anticorrelated => BoundAssembler::anticorrelated(basis, modes, Some(&support))?,
        ReferenceSpec::NondimerUniform => BoundAssembler::nondimer_uniform(basis, modes, Some(&support))?,
        _ => unreachable!(),
    };
    let (jmodes, coeffs) = assembler.momentum_form();
    let ccoeffs: Vec<Complex64> = coeffs.iter().map(|&c| Complex64::new(c, 0.0)).collect();
    let proj = projector.project(mom_shots, &jmodes, &ccoeffs)?;
    let re_g: Vec<f64> = proj.g.iter().map(|g| g.re).collect();
    let breakdown = assembler.evaluate(&probs, &re_g)?;
    let f_tilde = breakdown.f_tilde();
    let se = bootstrap_se(
        &counts,
        &proj.per_shot,
        |p, coh| {
            let (pop, sub) = assembler.position_terms(p);
            pop + coh - sub
        },
        plan,
    )?;
    let reference = ReferenceState::make(spec.kind(basis.config.species_count, None)?, basis)?;
    let (d0, d1, d3) = certified_dims(&reference, f_tilde, se);
    Ok(CertificationResult {
        f_tilde,
        population: breakdown.population,
        coherence: breakdown.coherence,
        subtraction: breakdown.subtraction,
        se,
        certified_point: d0,
        certified_1sigma: d1,
        certified_3sigma: d3,
        thresholds: reference.ladder().values,
        reference: spec.descriptor(),
        lambda1: match spec {
            ReferenceSpec::Lambda { lambda1 } => Some(*lambda1),
            _ => None,
        },
        g_zero_raw: (proj.g_zero_raw.re, proj.g_zero_raw.im),
        n_pos: pos_shots.len(),
        n_mom: proj.n_shots,
        bootstrap_replicas: plan.replicas,
        bootstrap_seed: plan.seed,
    })
}

/// λ-family certification: the coherence statistic is the sum of all
/// corrected coherence sums, and the bound combines three weighted partial
/// bounds over the position sums.
#[allow(clippy::too_many_arguments)]
fn certify_lambda(
    basis: &FockBasis,
    modes: &SpeciesModes,
    projector: &Projector,
    spec: &ReferenceSpec,
    counts: &[u64],
    probs: &[f64],
    mom_shots: &[ShotRecord],
    plan: &BootstrapPlan,
) -> Result<CertificationResult> {
    let l = basis.lattice.sites;
    if basis.config.species_count != 2 || basis.config.atoms_per_species != 1 {
        return Err(Error::config("the repulsive lambda-family bound needs one atom of each of two species"));
    }
    let (jmodes, kappas) = folded_joint_modes(modes, 2);
    let ccoeffs: Vec<Complex64> = kappas.iter().map(|&k| Complex64::new(k, 0.0)).collect();
    let proj = projector.project(mom_shots, &jmodes, &ccoeffs)?;
    let s_g: f64 = proj.g.iter().zip(&kappas).map(|(g, &k)| k * g.re).sum();
    let sums = repulsive_position_sums(probs, l)?;
    let lambda1 = match spec {
        ReferenceSpec::Lambda { lambda1 } => *lambda1,
        ReferenceSpec::LambdaScan { grid } => optimize_lambda(l, &sums, s_g, *grid)?.0,
        _ => unreachable!(),
    };
    let f_tilde = bound_repulsive(lambda1, l, &sums, s_g);
    let se = bootstrap_se(
        counts,
        &proj.per_shot,
        |p, coh| match repulsive_position_sums(p, l) {
            Ok(s) => bound_repulsive(lambda1, l, &s, coh),
            Err(_) => f64::NAN,
        },
        plan,
    )?;
    let reference = ReferenceState::make(ReferenceKind::LambdaFamily(lambda1), basis)?;
    let (d0, d1, d3) = certified_dims(&reference, f_tilde, se);
    let (w_nd, w_dn, w_dd) = lambda_weights(lambda1, l);
    Ok(CertificationResult {
        f_tilde,
        population: w_dd * sums.s_ii,
        coherence: w_nd * s_g,
        subtraction: w_nd * sums.csi_nd + w_dd.abs() * sums.s_dd + 2.0 * w_dn.abs() * sums.s_dnd,
        se,
        certified_point: d0,
        certified_1sigma: d1,
        certified_3sigma: d3,
        thresholds: reference.ladder().values,
        reference: spec.descriptor(),
        lambda1: Some(lambda1),
        g_zero_raw: (proj.g_zero_raw.re, proj.g_zero_raw.im),
        n_pos: counts.iter().sum::<u64>() as usize,
        n_mom: proj.n_shots,
        bootstrap_replicas: plan.replicas,
        bootstrap_seed: plan.seed,
    })
}

/// Exact-path bound: populations and coherence sums taken directly from the
/// density matrix (the infinite-statistics limit). Returns `(F̃, λ₁ used)`.
pub fn exact_bound(
    basis: &FockBasis,
    modes: &SpeciesModes,
    rho: &DensityMatrix,
    spec: &ReferenceSpec,
) -> Result<(f64, Option<f64>)> {
    if spec.is_lambda_family() {
        let l = basis.lattice.sites;
        if basis.config.species_count != 2 || basis.config.atoms_per_species != 1 {
            return Err(Error::config("the repulsive lambda-family bound needs one atom of each of two species"));
        }
        let sums = repulsive_position_sums(&rho.populations(), l)?;
        let s_g = repulsive_sg_exact(rho);
        let lambda1 = match spec {
            ReferenceSpec::Lambda { lambda1 } => *lambda1,
            ReferenceSpec::LambdaScan { grid } => optimize_lambda(l, &sums, s_g, *grid)?.0,
            _ => unreachable!(),
        };
        return Ok((bound_repulsive(lambda1, l, &sums, s_g), Some(lambda1)));
    }
    let assembler = match spec {
        ReferenceSpec::Attractive => BoundAssembler::attractive(basis, modes, None)?,
        ReferenceSpec::Anticorrelated => BoundAssembler::anticorrelated(basis, modes, None)?,
        ReferenceSpec::NondimerUniform => BoundAssembler::nondimer_uniform(basis, modes, None)?,
        _ => unreachable!(),
    };
    Ok((assembler.evaluate_exact(rho, basis, modes)?.f_tilde(), None))
}

/// Exact fidelity to the reference state selected by `spec`; for the λ-scan
/// the λ₁ must already be resolved (pass it via `ReferenceSpec::Lambda`).
pub fn exact_fidelity(basis: &FockBasis, rho: &DensityMatrix, spec: &ReferenceSpec) -> Result<f64> {
    let reference = ReferenceState::make(spec.kind(basis.config.species_count, None)?, basis)?;
    reference.exact_fidelity(rho)
}

/// How a disorder ensemble is turned into one result.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum DisorderMode {
    /// Certify the mixed state averaged over all realizations.
    Mixture,
    /// Certify each realization separately and average the results.
    PerRealization,
}

/// Disorder-ensemble averages of the exact fidelity and exact-path bound.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DisorderOutcome {
    /// Mean exact fidelity over the ensemble.
    pub mean_f: f64,
    /// Mean exact-path bound over the ensemble.
    pub mean_f_tilde: f64,
    /// Std of the per-realization exact fidelity (zero spread information
    /// for a single realization).
    pub spread_f: f64,
    /// Std of the per-realization exact-path bound (per-realization mode
    /// only; zero in mixture mode).
    pub spread_f_tilde: f64,
    /// Dimension certified by `mean_f_tilde` against the reference ladder.
    pub certified: usize,
    /// Averaging mode used.
    pub mode: DisorderMode,
    /// Number of realizations.
    pub realizations: usize,
}

/// Exact-path disorder averaging: draw `realizations` site-offset vectors,
/// prepare the ground state of each, and either certify the ensemble mixture
/// or average per-realization results.
#[allow(clippy::too_many_arguments)]
pub fn disorder_average(
    basis: &FockBasis,
    modes: &SpeciesModes,
    interactions: &Interactions,
    spec: &ReferenceSpec,
    noise: &NoiseSpec,
    sigma_v: f64,
    realizations: usize,
    seed: u64,
    mode: DisorderMode,
) -> Result<DisorderOutcome> {
    if realizations == 0 {
        return Err(Error::config("disorder ensemble needs at least one realization"));
    }
    let l = basis.lattice.sites;
    let dim = basis.composite_dim();
    let mut states = Vec::with_capacity(realizations);
    for i in 0..realizations {
        let offsets = disorder_realization(l, sigma_v, seed, i as u64)?;
        let params = HubbardParams { interactions: interactions.clone(), site_offsets: offsets };
        states.push(prepare_state(basis, &params, noise)?);
    }
    let fs: Vec<f64> = states.iter().map(|rho| exact_fidelity(basis, rho, spec)).collect::<Result<_>>()?;
    let (mean_f, spread_f) = mean_std(&fs);
    let (mean_f_tilde, spread_f_tilde, lambda_used) = match mode {
        DisorderMode::Mixture => {
            let mut avg = nalgebra::DMatrix::zeros(dim, dim);
            for rho in &states {
                avg += &rho.matrix;
            }
            avg /= realizations as f64;
            let mixed = DensityMatrix::new(avg)?;
            let (ft, lam) = exact_bound(basis, modes, &mixed, spec)?;
            (ft, 0.0, lam)
        }
        DisorderMode::PerRealization => {
            let mut fts = Vec::with_capacity(realizations);
            let mut lam = None;
            for rho in &states {
                let (ft, l1) = exact_bound(basis, modes, rho, spec)?;
                fts.push(ft);
                lam = l1;
            }
            let (m, s) = mean_std(&fts);
            (m, s, lam)
        }
    };
    let kind = spec.kind(basis.config.species_count, lambda_used)?;
    let reference = ReferenceState::make(kind, basis)?;
    Ok(DisorderOutcome {
        mean_f,
        mean_f_tilde,
        spread_f,
        spread_f_tilde,
        certified: reference.ladder().certified_dimension(mean_f_tilde),
        mode,
        realizations,
    })
}
