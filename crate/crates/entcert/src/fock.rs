//! Occupation-number bases for a few species of hard-core particles on a 1D
//! lattice, with sign-correct hopping matrix elements.
//!
//! Site indices are 1-based everywhere in this crate, matching the external
//! shot format. Within each species a site holds at most one atom (Pauli /
//! hard-core exclusion), so a species state is an ascending tuple of occupied
//! sites and the local dimension is `binomial(L, N)`.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// 1D lattice geometry. The spacing `d` is the unit of length; all momenta
/// are expressed in units of `1/d`, so only the site count is stored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeSpec {
    /// Number of sites `L` (≥ 2).
    pub sites: usize,
}

impl LatticeSpec {
    /// Validated constructor.
    pub fn new(sites: usize) -> Result<Self> {
        if sites < 2 {
            return Err(Error::config(format!("lattice needs at least 2 sites, got {sites}")));
        }
        Ok(LatticeSpec { sites })
    }
}

/// Exchange statistics of the identical atoms within one species.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Statistics {
    /// Antisymmetric under exchange; hops and measurement matchings carry
    /// permutation signs.
    Fermion,
    /// Symmetric under exchange with at most one atom per site; all signs +1.
    HardCoreBoson,
    /// Exactly one atom per species; no exchange signs ever arise.
    Distinguishable,
}

/// How many species there are, how many atoms each holds, and their
/// statistics. All species have the same atom number `N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpeciesConfig {
    /// Number of distinguishable species (2 or 3).
    pub species_count: usize,
    /// Atoms per species.
    pub atoms_per_species: usize,
    /// Exchange statistics within each species.
    pub statistics: Statistics,
}

impl SpeciesConfig {
    /// Validated constructor enforcing the supported configurations:
    /// 2 or 3 species, three species only with one atom each, and
    /// `Distinguishable` only with one atom per species.
    pub fn new(species_count: usize, atoms_per_species: usize, statistics: Statistics) -> Result<Self> {
        if !(2..=3).contains(&species_count) {
            return Err(Error::config(format!("species_count must be 2 or 3, got {species_count}")));
        }
        if atoms_per_species == 0 {
            return Err(Error::config("atoms_per_species must be positive"));
        }
        if species_count == 3 && atoms_per_species != 1 {
            return Err(Error::config("three species supported only with one atom per species"));
        }
        if statistics == Statistics::Distinguishable && atoms_per_species != 1 {
            return Err(Error::config("Distinguishable statistics requires one atom per species"));
        }
        Ok(SpeciesConfig { species_count, atoms_per_species, statistics })
    }
}

/// Enumerated many-body basis: the lexicographic list of per-species
/// occupation tuples plus its index map. Composite states are indexed
/// species-major: state `(i_1, ..., i_S)` has ordinal
/// `((i_1·D + i_2)·D + ...)` with `D` the local dimension.
#[derive(Debug, Clone)]
pub struct FockBasis {
    /// Lattice geometry.
    pub lattice: LatticeSpec,
    /// Species layout.
    pub config: SpeciesConfig,
    /// All per-species occupation tuples (`1`-based ascending site lists),
    /// in lexicographic order. Identical for every species.
    pub states: Vec<Vec<usize>>,
}

/// Number of `k`-combinations of `n` items.
pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: usize = 1;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

impl FockBasis {
    /// Enumerate the basis for the given lattice and species configuration.
    pub fn enumerate(lattice: LatticeSpec, config: SpeciesConfig) -> Result<Self> {
        if config.atoms_per_species > lattice.sites {
            return Err(Error::config(format!(
                "cannot place {} atoms on {} sites",
                config.atoms_per_species, lattice.sites
            )));
        }
        let states: Vec<Vec<usize>> = itertools::Itertools::combinations(
            1..=lattice.sites,
            config.atoms_per_species,
        )
        .collect();
        debug_assert_eq!(states.len(), binomial(lattice.sites, config.atoms_per_species));
        Ok(FockBasis { lattice, config, states })
    }

    /// Local (per-species) dimension `binomial(L, N)`.
    pub fn local_dim(&self) -> usize {
        self.states.len()
    }

    /// Composite dimension `local_dim ^ species_count`.
    pub fn composite_dim(&self) -> usize {
        self.local_dim().pow(self.config.species_count as u32)
    }

    /// Ordinal of a per-species occupation tuple (ascending sites, 1-based).
    pub fn index_of(&self, tuple: &[usize]) -> Option<usize> {
        self.states.binary_search_by(|s| s.as_slice().cmp(tuple)).ok()
    }

    /// Split a composite ordinal into per-species ordinals (species-major).
    pub fn split_composite(&self, mut idx: usize) -> Vec<usize> {
        let d = self.local_dim();
        let s = self.config.species_count;
        let mut parts = vec![0usize; s];
        for slot in (0..s).rev() {
            parts[slot] = idx % d;
            idx /= d;
        }
        parts
    }

    /// Combine per-species ordinals into a composite ordinal (species-major).
    pub fn combine_composite(&self, parts: &[usize]) -> usize {
        let d = self.local_dim();
        parts.iter().fold(0usize, |acc, &p| acc * d + p)
    }

    /// Single-species hop matrix element: move the atom at `from_site` of
    /// per-species state `state` to `to_site`.
    ///
    /// Returns `(target ordinal, sign)`; `sign = 0` when the hop is blocked
    /// (source empty or target occupied). For fermions the sign is the parity
    /// of the number of occupied sites strictly between the two sites; +1
    /// otherwise.
    pub fn hop_element(&self, from_site: usize, to_site: usize, state: usize) -> (usize, i32) {
        let occ = &self.states[state];
        if !occ.contains(&from_site) || occ.contains(&to_site) || from_site == to_site {
            return (state, 0);
        }
        let mut target: Vec<usize> = occ.iter().copied().filter(|&s| s != from_site).collect();
        let pos = target.partition_point(|&s| s < to_site);
        target.insert(pos, to_site);
        let sign = match self.config.statistics {
            Statistics::Fermion => {
                let (lo, hi) = if from_site < to_site { (from_site, to_site) } else { (to_site, from_site) };
                let between = occ.iter().filter(|&&s| s > lo && s < hi).count();
                if between % 2 == 0 {
                    1
                } else {
                    -1
                }
            }
            _ => 1,
        };
        let target_idx = self
            .index_of(&target)
            .expect("hop target is a valid occupation tuple");
        (target_idx, sign)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn basis(l: usize, n: usize, stats: Statistics) -> FockBasis {
        FockBasis::enumerate(
            LatticeSpec::new(l).unwrap(),
            SpeciesConfig::new(2, n, stats).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn local_dimensions() {
        assert_eq!(basis(6, 3, Statistics::HardCoreBoson).local_dim(), 20);
        let b = basis(6, 1, Statistics::Distinguishable);
        assert_eq!(b.local_dim(), 6);
        assert_eq!(b.composite_dim(), 36);
        assert_eq!(basis(8, 4, Statistics::Fermion).local_dim(), 70);
    }

    #[test]
    fn index_map_is_bijection() {
        for l in 2..=10 {
            for n in 1..=l {
                let b = FockBasis::enumerate(
                    LatticeSpec::new(l).unwrap(),
                    SpeciesConfig::new(2, n, Statistics::HardCoreBoson).unwrap(),
                )
                .unwrap();
                assert_eq!(b.local_dim(), binomial(l, n));
                for (k, s) in b.states.iter().enumerate() {
                    assert_eq!(b.index_of(s), Some(k));
                }
            }
        }
    }

    #[test]
    fn fermion_hop_signs() {
        let b = basis(4, 2, Statistics::Fermion);
        let s13 = b.index_of(&[1, 3]).unwrap();
        // 1→2: no particle strictly between 1 and 2.
        let (t, sign) = b.hop_element(1, 2, s13);
        assert_eq!(b.states[t], vec![2, 3]);
        assert_eq!(sign, 1);
        // 1→4: particle at 3 crossed.
        let (t, sign) = b.hop_element(1, 4, s13);
        assert_eq!(b.states[t], vec![3, 4]);
        assert_eq!(sign, -1);
        // blocked hop onto an occupied site.
        let hcb = basis(4, 2, Statistics::HardCoreBoson);
        let (_, sign) = hcb.hop_element(1, 3, hcb.index_of(&[1, 3]).unwrap());
        assert_eq!(sign, 0);
    }

    #[test]
    fn double_hop_returns_with_positive_sign() {
        for stats in [Statistics::Fermion, Statistics::HardCoreBoson] {
            let b = basis(5, 2, stats);
            for state in 0..b.local_dim() {
                for from in 1..=5 {
                    for to in 1..=5 {
                        let (mid, s1) = b.hop_element(from, to, state);
                        if s1 == 0 {
                            continue;
                        }
                        let (back, s2) = b.hop_element(to, from, mid);
                        assert_eq!(back, state);
                        assert_eq!(s1 * s2, 1);
                    }
                }
            }
        }
    }

    #[test]
    fn composite_split_combine_roundtrip() {
        let b = basis(5, 2, Statistics::HardCoreBoson);
        for idx in 0..b.composite_dim() {
            assert_eq!(b.combine_composite(&b.split_composite(idx)), idx);
        }
    }

    #[test]
    fn invalid_configs_rejected() {
        assert!(SpeciesConfig::new(4, 1, Statistics::Fermion).is_err());
        assert!(SpeciesConfig::new(3, 2, Statistics::Fermion).is_err());
        assert!(SpeciesConfig::new(2, 2, Statistics::Distinguishable).is_err());
        assert!(LatticeSpec::new(1).is_err());
        let lat = LatticeSpec::new(3).unwrap();
        let cfg = SpeciesConfig::new(2, 4, Statistics::Fermion);
        assert!(cfg.is_err() || FockBasis::enumerate(lat, cfg.unwrap()).is_err());
    }
}
