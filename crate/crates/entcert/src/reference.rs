//! Reference entangled states, Schmidt analysis, exact fidelities and the
//! fidelity-threshold ladder used to certify entanglement dimension.
//!
//! A fidelity `F` to a reference with descending Schmidt spectrum
//! `λ₁ ≥ λ₂ ≥ ...` certifies entanglement dimension `k+1` whenever `F`
//! strictly exceeds the threshold `B_k = Σ_{i≤k} λ_i²`.

use crate::error::{Error, Result};
use crate::fock::FockBasis;
use crate::hubbard::DensityMatrix;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Supported reference-state families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ReferenceKind {
    /// Maximally entangled superposition of identical (perfectly correlated)
    /// configurations of the two species.
    AttractiveMES,
    /// Tripartite GHZ-type state: all three atoms on the same site.
    Ghz,
    /// Maximally entangled superposition of perfectly anticorrelated
    /// configurations (half filling: species B occupies the complement of
    /// species A).
    RepulsiveMES,
    /// Equal superposition of all configurations where the two species
    /// share no site.
    NondimerUniform,
    /// Two-atom, site-exchange-symmetric family interpolating between the
    /// uniform product state (λ₁ = 1) and the flat-spectrum limit
    /// (λ₁ = 1/√L), parameterized by its largest Schmidt coefficient.
    LambdaFamily(f64),
}

/// A reference state with its Schmidt spectrum and (for the λ-family) the
/// coherence-class weights entering the weighted fidelity expansion.
#[derive(Debug, Clone)]
pub struct ReferenceState {
    /// Family tag.
    pub kind: ReferenceKind,
    /// Descending Schmidt spectrum with `Σ λ_i² = 1`.
    pub schmidt_spectrum: Vec<f64>,
    /// State vector on the composite basis.
    pub vector: DVector<f64>,
    /// `(w_nd_nd, w_d_nd, w_d_d)` weights for the λ-family; uniform
    /// weight `1/D²` families store `None`.
    pub lambda_weights: Option<(f64, f64, f64)>,
}

/// Fidelity thresholds `B_k = Σ_{i≤k} λ_i²`, `k = 1..D`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThresholdLadder {
    /// `values[k-1] = B_k`; `B_D = 1`.
    pub values: Vec<f64>,
}

impl ThresholdLadder {
    /// Build the ladder from a descending Schmidt spectrum.
    pub fn from_spectrum(spectrum: &[f64]) -> Self {
        let mut acc = 0.0;
        let values = spectrum
            .iter()
            .map(|l| {
                acc += l * l;
                acc
            })
            .collect();
        ThresholdLadder { values }
    }

    /// Exact flat ladder `B_k = k/D` for maximally entangled references.
    pub fn flat(d: usize) -> Self {
        ThresholdLadder { values: (1..=d).map(|k| k as f64 / d as f64).collect() }
    }

    /// Largest `k` with `F > B_{k-1}` (strict, `B₀ = 0`); returns 1 when
    /// nothing beyond trivial "dimension ≥ 1" is certified.
    pub fn certified_dimension(&self, fidelity: f64) -> usize {
        1 + self.values.iter().take(self.values.len() - 1).filter(|&&b| fidelity > b).count()
    }
}

/// Index of the complement tuple (half filling) of per-species state `idx`.
pub fn complement_index(basis: &FockBasis, idx: usize) -> usize {
    let l = basis.lattice.sites;
    let tuple = &basis.states[idx];
    let comp: Vec<usize> = (1..=l).filter(|s| !tuple.contains(s)).collect();
    basis.index_of(&comp).expect("complement tuple exists at half filling")
}

impl ReferenceState {
    /// Construct a reference state of the given kind on the basis.
    pub fn make(kind: ReferenceKind, basis: &FockBasis) -> Result<Self> {
        let d = basis.local_dim();
        let dim = basis.composite_dim();
        let species = basis.config.species_count;
        match kind {
            ReferenceKind::AttractiveMES => {
                if species != 2 {
                    return Err(Error::config("AttractiveMES requires two species"));
                }
                let mut v = DVector::zeros(dim);
                let amp = 1.0 / (d as f64).sqrt();
                for i in 0..d {
                    v[basis.combine_composite(&[i, i])] = amp;
                }
                Ok(ReferenceState { kind, schmidt_spectrum: vec![amp; d], vector: v, lambda_weights: None })
            }
            ReferenceKind::Ghz => {
                if species != 3 {
                    return Err(Error::config("Ghz requires three species"));
                }
                let mut v = DVector::zeros(dim);
                let amp = 1.0 / (d as f64).sqrt();
                for i in 0..d {
                    v[basis.combine_composite(&[i, i, i])] = amp;
                }
                Ok(ReferenceState { kind, schmidt_spectrum: vec![amp; d], vector: v, lambda_weights: None })
            }
            ReferenceKind::RepulsiveMES => {
                if species != 2 || 2 * basis.config.atoms_per_species != basis.lattice.sites {
                    return Err(Error::config("RepulsiveMES requires two species at half filling (N = L/2)"));
                }
                let mut v = DVector::zeros(dim);
                let amp = 1.0 / (d as f64).sqrt();
                for i in 0..d {
                    v[basis.combine_composite(&[i, complement_index(basis, i)])] = amp;
                }
                Ok(ReferenceState { kind, schmidt_spectrum: vec![amp; d], vector: v, lambda_weights: None })
            }
            ReferenceKind::NondimerUniform => {
                if species != 2 {
                    return Err(Error::config("NondimerUniform requires two species"));
                }
                let mut v = DVector::zeros(dim);
                let mut count = 0usize;
                for a in 0..d {
                    for b in 0..d {
                        if basis.states[a].iter().all(|s| !basis.states[b].contains(s)) {
                            v[basis.combine_composite(&[a, b])] = 1.0;
                            count += 1;
                        }
                    }
                }
                if count == 0 {
                    return Err(Error::config("no shared-site-free configurations exist for this filling"));
                }
                let amp = 1.0 / (count as f64).sqrt();
                v *= amp;
                let spectrum = schmidt_decompose(&v, basis)?;
                Ok(ReferenceState { kind, schmidt_spectrum: spectrum, vector: v, lambda_weights: None })
            }
            ReferenceKind::LambdaFamily(lambda1) => {
                if species != 2 || basis.config.atoms_per_species != 1 {
                    return Err(Error::config("LambdaFamily requires two species with one atom each"));
                }
                let l = basis.lattice.sites as f64;
                let lo = 1.0 / l.sqrt();
                if !(lo..=1.0).contains(&lambda1) {
                    return Err(Error::config(format!(
                        "λ₁ = {lambda1} outside [1/√L, 1] = [{lo:.6}, 1]"
                    )));
                }
                let s = (1.0 - lambda1 * lambda1).max(0.0).sqrt();
                let r = (l - 1.0).sqrt();
                // Per-element amplitudes: off-diagonal (non-shared-site) c,
                // diagonal d.
                let c = (lambda1 + s / r) / l;
                let dd = (lambda1 - s * r) / l;
                let mut v = DVector::zeros(dim);
                for a in 0..d {
                    for b in 0..d {
                        v[basis.combine_composite(&[a, b])] = if a == b { dd } else { c };
                    }
                }
                let mut spectrum = vec![lambda1];
                spectrum.extend(std::iter::repeat(s / r).take(d - 1));
                Ok(ReferenceState {
                    kind,
                    schmidt_spectrum: spectrum,
                    vector: v,
                    lambda_weights: Some((c * c, dd * c, dd * dd)),
                })
            }
        }
    }

    /// Fidelity ladder of this reference. Maximally entangled references use
    /// the exact flat `k/D` ladder.
    pub fn ladder(&self) -> ThresholdLadder {
        match self.kind {
            ReferenceKind::AttractiveMES | ReferenceKind::Ghz | ReferenceKind::RepulsiveMES => {
                ThresholdLadder::flat(self.schmidt_spectrum.len())
            }
            _ => ThresholdLadder::from_spectrum(&self.schmidt_spectrum),
        }
    }

    /// Exact fidelity `⟨Ψ_ref| ρ |Ψ_ref⟩`.
    pub fn exact_fidelity(&self, rho: &DensityMatrix) -> Result<f64> {
        if rho.dim() != self.vector.len() {
            return Err(Error::config(format!(
                "dimension mismatch: ρ is {}, reference is {}",
                rho.dim(),
                self.vector.len()
            )));
        }
        Ok((self.vector.transpose() * &rho.matrix * &self.vector)[(0, 0)])
    }
}

/// Schmidt spectrum (descending singular values) of a normalized pure state
/// across the two-species bipartition.
pub fn schmidt_decompose(psi: &DVector<f64>, basis: &FockBasis) -> Result<Vec<f64>> {
    if basis.config.species_count != 2 {
        return Err(Error::config("Schmidt decomposition defined for the two-species bipartition"));
    }
    let norm = psi.norm();
    if (norm - 1.0).abs() > 1e-8 {
        return Err(Error::Numerical(format!("state not normalized (|ψ| = {norm})")));
    }
    let d = basis.local_dim();
    let m = DMatrix::from_fn(d, d, |a, b| psi[basis.combine_composite(&[a, b])]);
    let mut sv: Vec<f64> = m.svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    Ok(sv)
}
