//! Hubbard Hamiltonians on the enumerated bases, ground/thermal states and
//! the supported noise channels (dephasing, site-energy disorder).
//!
//! All energies are stored in units of the tunneling strength `J`, so `U`
//! and the site offsets are dimensionless ratios.

use crate::error::{Error, Result};
use crate::fock::FockBasis;
use crate::util::stream_rng;
use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

/// Interaction strengths in units of `J`: one scalar for two species or one
/// value per unordered species pair for three.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Interactions {
    /// Two-species on-site interaction `U/J`.
    Scalar(f64),
    /// Tripartite pairwise interactions `(U₁₂, U₁₃, U₂₃)/J`.
    Pairwise(f64, f64, f64),
}

impl Interactions {
    /// Interaction between species `a` and `b` (0-based).
    fn between(&self, a: usize, b: usize) -> f64 {
        match (self, a.min(b), a.max(b)) {
            (Interactions::Scalar(u), _, _) => *u,
            (Interactions::Pairwise(u, _, _), 0, 1) => *u,
            (Interactions::Pairwise(_, u, _), 0, 2) => *u,
            (Interactions::Pairwise(_, _, u), 1, 2) => *u,
            _ => unreachable!("species pair out of range"),
        }
    }
}

/// Hamiltonian parameters: nearest-neighbor tunneling (fixed to 1 in these
/// units), on-site inter-species interactions, and optional per-site energy
/// offsets (disorder).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HubbardParams {
    /// Interaction strengths `U/J`.
    pub interactions: Interactions,
    /// Per-site energy offsets `ΔV_i/J`; empty means a clean lattice.
    #[serde(default)]
    pub site_offsets: Vec<f64>,
}

impl HubbardParams {
    /// Clean-lattice two-species parameters.
    pub fn scalar(u_over_j: f64) -> Self {
        HubbardParams { interactions: Interactions::Scalar(u_over_j), site_offsets: Vec::new() }
    }

    /// Clean-lattice tripartite parameters.
    pub fn pairwise(u12: f64, u13: f64, u23: f64) -> Self {
        HubbardParams { interactions: Interactions::Pairwise(u12, u13, u23), site_offsets: Vec::new() }
    }
}

/// Density matrix on the composite basis, validated to be symmetric, unit
/// trace and positive semidefinite (up to numerical floor).
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    /// Real symmetric matrix on the composite space. All Hamiltonians here
    /// are real symmetric, so every state this crate produces is real.
    pub matrix: DMatrix<f64>,
}

impl DensityMatrix {
    /// Wrap and validate a matrix as a density matrix.
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        let n = matrix.nrows();
        if matrix.ncols() != n {
            return Err(Error::Numerical("density matrix must be square".into()));
        }
        let sym_err = (&matrix - matrix.transpose()).abs().max();
        if sym_err > 1e-12 {
            return Err(Error::Numerical(format!("density matrix not symmetric (max asym {sym_err:.2e})")));
        }
        let tr: f64 = matrix.diagonal().sum();
        if (tr - 1.0).abs() > 1e-10 {
            return Err(Error::Numerical(format!("density matrix trace {tr} != 1")));
        }
        let min_eig = matrix
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .min();
        if min_eig < -1e-10 {
            return Err(Error::Numerical(format!("density matrix has negative eigenvalue {min_eig:.2e}")));
        }
        Ok(DensityMatrix { matrix })
    }

    /// Projector onto a normalized pure state.
    pub fn pure(psi: &DVector<f64>) -> Self {
        DensityMatrix { matrix: psi * psi.transpose() }
    }

    /// Composite dimension.
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Purity `Tr ρ²`.
    pub fn purity(&self) -> f64 {
        self.matrix.iter().map(|x| x * x).sum()
    }

    /// Diagonal (configuration populations).
    pub fn populations(&self) -> Vec<f64> {
        self.matrix.diagonal().iter().copied().collect()
    }
}

/// Build the real symmetric Hubbard Hamiltonian on the composite basis:
/// nearest-neighbor hopping (open boundaries) per species, on-site
/// inter-species interaction for every shared site, and per-site energy
/// offsets multiplying total site occupancy.
pub fn build_hamiltonian(basis: &FockBasis, params: &HubbardParams) -> Result<DMatrix<f64>> {
    let l = basis.lattice.sites;
    if !params.site_offsets.is_empty() && params.site_offsets.len() != l {
        return Err(Error::config(format!(
            "site_offsets length {} != L = {l}",
            params.site_offsets.len()
        )));
    }
    match (basis.config.species_count, params.interactions) {
        (2, Interactions::Scalar(_)) | (3, Interactions::Pairwise(..)) => {}
        _ => return Err(Error::config("interaction spec does not match species count")),
    }
    let d = basis.local_dim();
    let s = basis.config.species_count;
    let dim = basis.composite_dim();

    // Single-species hopping matrix (in units of J, i.e. amplitude -1).
    let mut hop = DMatrix::<f64>::zeros(d, d);
    for state in 0..d {
        for &site in &basis.states[state].clone() {
            for to in [site.wrapping_sub(1), site + 1] {
                if (1..=l).contains(&to) {
                    let (target, sign) = basis.hop_element(site, to, state);
                    if sign != 0 {
                        hop[(target, state)] += -1.0 * sign as f64;
                    }
                }
            }
        }
    }

    let mut h = DMatrix::<f64>::zeros(dim, dim);
    // Hopping: identity on all other species.
    for idx in 0..dim {
        let parts = basis.split_composite(idx);
        for species in 0..s {
            for target_local in 0..d {
                let amp = hop[(target_local, parts[species])];
                if amp != 0.0 {
                    let mut tp = parts.clone();
                    tp[species] = target_local;
                    h[(basis.combine_composite(&tp), idx)] += amp;
                }
            }
        }
    }
    // Diagonal: interactions on shared sites + disorder offsets.
    for idx in 0..dim {
        let parts = basis.split_composite(idx);
        let mut diag = 0.0;
        for a in 0..s {
            for b in (a + 1)..s {
                let shared = basis.states[parts[a]]
                    .iter()
                    .filter(|site| basis.states[parts[b]].contains(site))
                    .count();
                diag += params.interactions.between(a, b) * shared as f64;
            }
        }
        if !params.site_offsets.is_empty() {
            for part in &parts {
                for &site in &basis.states[*part] {
                    diag += params.site_offsets[site - 1];
                }
            }
        }
        h[(idx, idx)] += diag;
    }
    Ok(h)
}

/// Eigenvalues and eigenvectors of a real symmetric matrix, sorted by
/// ascending eigenvalue with a deterministic phase convention (largest-
/// magnitude component of each vector made positive).
pub fn sorted_eigen(h: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = h.clone().symmetric_eigen();
    let n = h.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let mut values = Vec::with_capacity(n);
    let mut vectors = DMatrix::<f64>::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        values.push(eig.eigenvalues[k]);
        let mut v = eig.eigenvectors.column(k).clone_owned();
        let imax = v.iter().enumerate().max_by(|a, b| a.1.abs().total_cmp(&b.1.abs())).map(|(i, _)| i).unwrap();
        if v[imax] < 0.0 {
            v.neg_mut();
        }
        vectors.set_column(col, &v);
    }
    (values, vectors)
}

/// Ground state of a real symmetric Hamiltonian: normalized eigenvector of
/// the smallest eigenvalue, phase fixed as in [`sorted_eigen`]. Returns
/// `(energy, state)`.
pub fn ground_state(h: &DMatrix<f64>) -> Result<(f64, DVector<f64>)> {
    let asym = (h - h.transpose()).abs().max();
    if asym > 1e-10 {
        return Err(Error::Numerical(format!("Hamiltonian not symmetric (max asym {asym:.2e})")));
    }
    let (values, vectors) = sorted_eigen(h);
    Ok((values[0], vectors.column(0).clone_owned()))
}

/// Thermal state `exp(−βH)/Z` via eigendecomposition, with the ground energy
/// subtracted before exponentiation to avoid overflow.
pub fn thermal_state(h: &DMatrix<f64>, beta: f64) -> Result<DensityMatrix> {
    if beta <= 0.0 {
        return Err(Error::config(format!("inverse temperature must be positive, got {beta}")));
    }
    let (values, vectors) = sorted_eigen(h);
    let e0 = values[0];
    let weights: Vec<f64> = values.iter().map(|e| (-beta * (e - e0)).exp()).collect();
    let z: f64 = weights.iter().sum();
    let n = h.nrows();
    let mut rho = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        let v = vectors.column(k);
        let w = weights[k] / z;
        if w > 1e-300 {
            rho.syger(w, &v, &v, 1.0);
        }
    }
    // syger fills only the lower triangle; symmetrize.
    rho.fill_upper_triangle_with_lower_triangle();
    Ok(DensityMatrix { matrix: rho })
}

/// Dephasing channel `ρ ↦ (1−r)·ρ + r·I/dim`.
pub fn apply_dephasing(rho: &DensityMatrix, r: f64) -> Result<DensityMatrix> {
    if !(0.0..=1.0).contains(&r) {
        return Err(Error::config(format!("mixing parameter r must be in [0,1], got {r}")));
    }
    let dim = rho.dim();
    let mut m = rho.matrix.clone() * (1.0 - r);
    for i in 0..dim {
        m[(i, i)] += r / dim as f64;
    }
    Ok(DensityMatrix { matrix: m })
}

/// Draw one disorder realization: `L` independent site offsets
/// `ΔV_i ~ N(0, σ_V²)` (in units of `J`), reproducible from the seed.
pub fn disorder_realization(l: usize, sigma_v: f64, seed: u64, realization: u64) -> Result<Vec<f64>> {
    if sigma_v < 0.0 {
        return Err(Error::config(format!("disorder std must be nonnegative, got {sigma_v}")));
    }
    if sigma_v == 0.0 {
        return Ok(vec![0.0; l]);
    }
    let mut rng = stream_rng(seed, realization);
    let normal = Normal::new(0.0, sigma_v).expect("valid normal parameters");
    Ok((0..l).map(|_| normal.sample(&mut rng)).collect())
}
