//! Fidelity lower bounds assembled from populations and coherence sums.
//!
//! The certifiable quantity is `F̃ = population + coherence − subtraction`:
//! reference-configuration populations, plus the real parts of the fringe
//! coherence sums that contain the reference coherences, minus Cauchy–Schwarz
//! bounds `√(p_X p_Y)` on every other coherence sharing those fringe modes.
//! One assembler covers all references given by a uniform superposition of
//! composite configurations (same-site dimers and trimers, anticorrelated
//! configurations, disjoint nondimer pairs); the repulsive two-atom family
//! with unequal weights has its own evaluator.

use crate::error::{Error, Result};
use crate::fock::FockBasis;
use crate::hubbard::DensityMatrix;
use crate::modes::{canonical_class, exact_gtilde, negate_class, SpeciesModes};
use crate::project::JointMode;
use crate::util::par_map_indexed;
use std::collections::HashMap;

/// Cauchy–Schwarz upper bound on a coherence magnitude from two populations.
pub fn csi_bound(p_bra: f64, p_ket: f64) -> f64 {
    (p_bra.max(0.0) * p_ket.max(0.0)).sqrt()
}

/// Terms of an evaluated bound.
#[derive(Debug, Clone, Copy)]
pub struct BoundBreakdown {
    /// Reference-configuration population term.
    pub population: f64,
    /// Sum of the real coherence terms (before subtraction).
    pub coherence: f64,
    /// Total Cauchy–Schwarz subtraction.
    pub subtraction: f64,
}

impl BoundBreakdown {
    /// The fidelity lower bound.
    pub fn f_tilde(&self) -> f64 {
        self.population + self.coherence - self.subtraction
    }
}

/// One fringe-mode coherence group of the bound.
struct CoherenceGroup {
    /// Representative joint mode (class index per species), in the folded
    /// (positive) orientation.
    mode: JointMode,
    /// 2 if the mode differs from its negation, 1 if self-conjugate.
    kappa: f64,
    /// Cauchy–Schwarz entries `(X, Y, weight)` over unordered composite
    /// pairs: total unsigned matching multiplicity of this group's fringe
    /// classes between `X` and `Y` (ordered directions combined).
    entries: Vec<(u32, u32, f64)>,
    /// Unordered reference pairs whose coherence lives in this group; their
    /// two Cauchy–Schwarz units are kept, not subtracted.
    keeps: Vec<(u32, u32)>,
}

/// Bound assembler for a uniform-weight reference superposition over a list
/// of composite configurations.
pub struct BoundAssembler {
    /// Composite indices of the reference configurations.
    pub ref_indices: Vec<usize>,
    groups: Vec<CoherenceGroup>,
}

/// Key of a joint fringe mode as concrete shift classes, one per species.
type ClassKey = Vec<Vec<i32>>;

fn fold_key(key: &ClassKey) -> (ClassKey, bool) {
    let neg: ClassKey = key.iter().map(|c| negate_class(c)).collect();
    if *key >= neg {
        (key.clone(), *key == neg)
    } else {
        (neg, false)
    }
}

impl BoundAssembler {
    /// Build the assembler for the given reference configurations.
    ///
    /// `support`, when given, restricts the Cauchy–Schwarz entry enumeration
    /// to composite configurations marked `true` — safe whenever the omitted
    /// configurations have exactly zero empirical population, since their
    /// entries would evaluate to zero.
    pub fn from_references(
        basis: &FockBasis,
        modes: &SpeciesModes,
        refs: &[usize],
        support: Option<&[bool]>,
    ) -> Result<Self> {
        if refs.len() < 2 {
            return Err(Error::config("need at least two reference configurations"));
        }
        let s = basis.config.species_count;
        let dim = basis.composite_dim();
        if let Some(sup) = support {
            if sup.len() != dim {
                return Err(Error::config("support mask length mismatch"));
            }
        }
        // Designated modes: folded joint classes of unordered reference pairs.
        let mut desig: HashMap<ClassKey, Vec<(u32, u32)>> = HashMap::new();
        for (i, &r1) in refs.iter().enumerate() {
            let p1 = basis.split_composite(r1);
            for &r2 in &refs[i + 1..] {
                let p2 = basis.split_composite(r2);
                let key: ClassKey = (0..s)
                    .map(|sp| canonical_class(&basis.states[p1[sp]], &basis.states[p2[sp]]))
                    .collect();
                let (folded, _) = fold_key(&key);
                desig.entry(folded).or_default().push((r1 as u32, r2 as u32));
            }
        }
        // Cauchy–Schwarz entries: for every unordered composite pair, the
        // unsigned multiplicity with which its coherence appears in each
        // designated group (both fringe orientations).
        let rows = par_map_indexed(dim, |x| {
            if let Some(sup) = support {
                if !sup[x] {
                    return HashMap::new();
                }
            }
            let xp = basis.split_composite(x);
            let mut acc: HashMap<ClassKey, HashMap<(u32, u32), f64>> = HashMap::new();
            for y in x..dim {
                if let Some(sup) = support {
                    if !sup[y] {
                        continue;
                    }
                }
                let yp = basis.split_composite(y);
                // Enumerate joint class combinations from per-species tables.
                let tables: Vec<&Vec<(usize, i32, u32)>> =
                    (0..s).map(|sp| &modes.tables[xp[sp]][yp[sp]]).collect();
                let mut stack: Vec<(usize, f64, ClassKey)> = vec![(0, 1.0, Vec::new())];
                while let Some((sp, u, key)) = stack.pop() {
                    if sp == s {
                        let (folded, _) = fold_key(&key);
                        if let Some(inner) = acc.get_mut(&folded) {
                            // Ordered directions (X,Y) and (Y,X) both carry
                            // the group; combine into the unordered pair.
                            let w = if x == y { u } else { 2.0 * u };
                            *inner.entry((x as u32, y as u32)).or_insert(0.0) += w;
                        } else if desig.contains_key(&folded) {
                            let mut inner = HashMap::new();
                            let w = if x == y { u } else { 2.0 * u };
                            inner.insert((x as u32, y as u32), w);
                            acc.insert(folded, inner);
                        }
                        continue;
                    }
                    for &(class, _, unsigned) in tables[sp] {
                        let mut k2 = key.clone();
                        k2.push(modes.classes[class].clone());
                        stack.push((sp + 1, u * unsigned as f64, k2));
                    }
                }
            }
            acc
        });
        let mut merged: HashMap<ClassKey, HashMap<(u32, u32), f64>> = HashMap::new();
        for row in rows {
            for (key, inner) in row {
                let target = merged.entry(key).or_default();
                for (pair, w) in inner {
                    *target.entry(pair).or_insert(0.0) += w;
                }
            }
        }
        let mut groups = Vec::with_capacity(desig.len());
        let mut keys: Vec<ClassKey> = desig.keys().cloned().collect();
        keys.sort();
        for key in keys {
            let kappa = if key.iter().all(|c| *c == negate_class(c)) { 1.0 } else { 2.0 };
            let mode: JointMode = key
                .iter()
                .map(|c| {
                    modes
                        .index
                        .get(c)
                        .copied()
                        .ok_or_else(|| Error::Numerical(format!("fringe class {c:?} missing from mode table")))
                })
                .collect::<Result<_>>()?;
            let mut entries: Vec<(u32, u32, f64)> = merged
                .remove(&key)
                .map(|inner| inner.into_iter().map(|((x, y), w)| (x, y, w)).collect())
                .unwrap_or_default();
            entries.sort_unstable_by_key(|&(x, y, _)| (x, y));
            groups.push(CoherenceGroup { mode, kappa, entries, keeps: desig[&key].clone() });
        }
        Ok(BoundAssembler { ref_indices: refs.to_vec(), groups })
    }

    /// Same-site dimer references (one per site): the attractive two-atom and
    /// N+N bound.
    pub fn attractive(basis: &FockBasis, modes: &SpeciesModes, support: Option<&[bool]>) -> Result<Self> {
        let d = basis.local_dim();
        let refs: Vec<usize> = (0..d).map(|m| basis.combine_composite(&vec![m; basis.config.species_count])).collect();
        Self::from_references(basis, modes, &refs, support)
    }

    /// Anticorrelated references at half filling: each species-one
    /// configuration paired with its site complement.
    pub fn anticorrelated(basis: &FockBasis, modes: &SpeciesModes, support: Option<&[bool]>) -> Result<Self> {
        if basis.config.species_count != 2 || 2 * basis.config.atoms_per_species != basis.lattice.sites {
            return Err(Error::config("anticorrelated reference requires a half-filled two-species system"));
        }
        let refs: Vec<usize> = (0..basis.local_dim())
            .map(|m| {
                let comp = crate::reference::complement_index(basis, m);
                basis.combine_composite(&[m, comp])
            })
            .collect();
        Self::from_references(basis, modes, &refs, support)
    }

    /// Uniform superposition over all site-disjoint configuration pairs.
    pub fn nondimer_uniform(basis: &FockBasis, modes: &SpeciesModes, support: Option<&[bool]>) -> Result<Self> {
        if basis.config.species_count != 2 {
            return Err(Error::config("nondimer reference requires two species"));
        }
        let d = basis.local_dim();
        let mut refs = Vec::new();
        for a in 0..d {
            for b in 0..d {
                if basis.states[a].iter().all(|site| !basis.states[b].contains(site)) {
                    refs.push(basis.combine_composite(&[a, b]));
                }
            }
        }
        Self::from_references(basis, modes, &refs, support)
    }

    /// The fringe modes needed from momentum data and their linear
    /// coefficients: `coherence = Σ_m coeff_m · Re g[mode_m]`.
    pub fn momentum_form(&self) -> (Vec<JointMode>, Vec<f64>) {
        let dr = self.ref_indices.len() as f64;
        let modes = self.groups.iter().map(|g| g.mode.clone()).collect();
        let coeffs = self.groups.iter().map(|g| g.kappa / dr).collect();
        (modes, coeffs)
    }

    /// Population and subtraction terms from composite-configuration
    /// probabilities.
    pub fn position_terms(&self, probs: &[f64]) -> (f64, f64) {
        let dr = self.ref_indices.len() as f64;
        let pop: f64 = self.ref_indices.iter().map(|&r| probs[r].max(0.0)).sum::<f64>() / dr;
        let mut sub = 0.0;
        for g in &self.groups {
            let mut unsubtracted: f64 = g
                .entries
                .iter()
                .map(|&(x, y, w)| w * csi_bound(probs[x as usize], probs[y as usize]))
                .sum();
            for &(x, y) in &g.keeps {
                unsubtracted -= 2.0 * csi_bound(probs[x as usize], probs[y as usize]);
            }
            sub += unsubtracted / dr;
        }
        (pop, sub)
    }

    /// Assemble the bound from probabilities and the real parts of the
    /// corrected coherence sums at `momentum_form()`'s modes, in order.
    pub fn evaluate(&self, probs: &[f64], re_g: &[f64]) -> Result<BoundBreakdown> {
        if re_g.len() != self.groups.len() {
            return Err(Error::config("coherence vector length does not match mode count"));
        }
        let (pop, sub) = self.position_terms(probs);
        let dr = self.ref_indices.len() as f64;
        let coh: f64 = self.groups.iter().zip(re_g).map(|(g, &v)| g.kappa * v / dr).sum();
        Ok(BoundBreakdown { population: pop, coherence: coh, subtraction: sub })
    }

    /// Exact evaluation from a density matrix: populations from the diagonal,
    /// coherence sums from the signed matching expansion.
    pub fn evaluate_exact(
        &self,
        rho: &DensityMatrix,
        basis: &FockBasis,
        modes: &SpeciesModes,
    ) -> Result<BoundBreakdown> {
        if rho.dim() != basis.composite_dim() {
            return Err(Error::config("density matrix does not match basis dimension"));
        }
        let gt = exact_gtilde(&rho.matrix, basis, modes);
        let re_g: Vec<f64> = self.groups.iter().map(|g| gt.get(&g.mode).re).collect();
        self.evaluate(&rho.populations(), &re_g)
    }
}

/// Partial-bound weights of the repulsive two-atom reference family:
/// `(nondimer-nondimer, dimer-nondimer, dimer-dimer)`.
pub fn lambda_weights(lambda1: f64, l: usize) -> (f64, f64, f64) {
    let lf = l as f64;
    let s = (1.0 - lambda1 * lambda1).sqrt();
    let r = (lf - 1.0).sqrt();
    let w_nd = (1.0 + lambda1 * lambda1 * (lf - 2.0)) / (lf * lf * (lf - 1.0)) + 2.0 * lambda1 * s / (lf * lf * r);
    let w_dn = (2.0 * lambda1 * lambda1 - 1.0) / (lf * lf) - (lf - 2.0) * lambda1 * s / (lf * lf * r);
    let w_dd = (lf - 1.0 - lambda1 * lambda1 * (lf - 2.0) - 2.0 * lambda1 * s * r) / (lf * lf);
    (w_nd, w_dn, w_dd)
}

/// Position-derived sums entering the repulsive bound.
#[derive(Debug, Clone, Copy)]
pub struct RepulsivePositionSums {
    /// Σ over all dimer-involving coherence slots of `√(p_{m'n'} p_{mn})`
    /// (ordered, `m=n ∨ m'=n'`).
    pub csi_nd: f64,
    /// Σ_i p_ii (dimer populations).
    pub s_ii: f64,
    /// Σ_{i≠j} √(p_ii p_jj).
    pub s_dd: f64,
    /// Σ_{i, j≠k} √(p_ii p_jk).
    pub s_dnd: f64,
}

/// Compute the repulsive bound's position sums from two-atom probabilities
/// laid out as an `L × L` grid in composite order.
pub fn repulsive_position_sums(probs: &[f64], l: usize) -> Result<RepulsivePositionSums> {
    if probs.len() != l * l {
        return Err(Error::config("two-atom probability grid size mismatch"));
    }
    let p = |m: usize, n: usize| probs[m * l + n].max(0.0);
    let mut csi_nd = 0.0;
    for m in 0..l {
        for n in 0..l {
            for mp in 0..l {
                for np in 0..l {
                    if m == n || mp == np {
                        csi_nd += (p(mp, np) * p(m, n)).sqrt();
                    }
                }
            }
        }
    }
    let s_ii: f64 = (0..l).map(|i| p(i, i)).sum();
    let mut s_dd = 0.0;
    let mut s_dnd = 0.0;
    for i in 0..l {
        for j in 0..l {
            if i != j {
                s_dd += (p(i, i) * p(j, j)).sqrt();
            }
            for k in 0..l {
                if j != k {
                    s_dnd += (p(i, i) * p(j, k)).sqrt();
                }
            }
        }
    }
    Ok(RepulsivePositionSums { csi_nd, s_ii, s_dd, s_dnd })
}

/// The repulsive-family bound at one `λ₁`:
/// `F̃′ = w_nd (S_g − csi_nd) + w_dd Σp_ii − |w_dd| Σ√(p_ii p_jj) − 2|w_dn| Σ√(p_ii p_jk)`
/// where `S_g` is the sum of the real parts of ALL corrected coherence sums.
pub fn bound_repulsive(lambda1: f64, l: usize, sums: &RepulsivePositionSums, s_g: f64) -> f64 {
    let (w_nd, w_dn, w_dd) = lambda_weights(lambda1, l);
    w_nd * (s_g - sums.csi_nd) + w_dd * sums.s_ii - w_dd.abs() * sums.s_dd - 2.0 * w_dn.abs() * sums.s_dnd
}

/// Exact `S_g` of a two-atom state: the sum of all density-matrix elements.
pub fn repulsive_sg_exact(rho: &DensityMatrix) -> f64 {
    rho.matrix.iter().sum()
}

/// Grid scan over `λ₁ ∈ [1/√L, 1]` maximizing the certified dimension, with
/// the certification margin `F̃′ − B_{D−1}` as tie-break.
pub fn optimize_lambda(
    l: usize,
    sums: &RepulsivePositionSums,
    s_g: f64,
    grid_points: usize,
) -> Result<(f64, usize, f64)> {
    if grid_points < 2 {
        return Err(Error::config("lambda grid needs at least two points"));
    }
    let lo = 1.0 / (l as f64).sqrt();
    let mut best: Option<(usize, f64, f64)> = None;
    for i in 0..grid_points {
        let lam = lo + (1.0 - lo) * i as f64 / (grid_points - 1) as f64;
        let f = bound_repulsive(lam, l, sums, s_g);
        let ladder = |k: usize| lam * lam + (k as f64 - 1.0) * (1.0 - lam * lam) / (l as f64 - 1.0);
        let mut cert = 1;
        for k in 1..l {
            if f > ladder(k) {
                cert = k + 1;
            }
        }
        let margin = f - if cert > 1 { ladder(cert - 1) } else { f.min(0.0) };
        if best.map_or(true, |(bc, _, bm)| (cert, margin) > (bc, bm)) {
            best = Some((cert, lam, margin));
        }
    }
    let (cert, lam, margin) = best.unwrap();
    Ok((lam, cert, margin))
}
