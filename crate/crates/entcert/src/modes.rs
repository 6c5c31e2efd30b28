//! Coherence bookkeeping: shift classes of configuration pairs, the
//! admissible mode sets for each configuration kind, and the exact coherence
//! sums an ideal (infinite-statistics) measurement would extract.
//!
//! A coherence `|bra⟩⟨ket|` of one species contributes interference fringes
//! whose frequencies are the per-atom site differences under some matching of
//! bra atoms to ket atoms. The *shift class* of a matching is the sorted
//! tuple of those differences; identical-particle exchange makes all
//! matchings of a pair contribute, with permutation signs for fermions.

use crate::error::{Error, Result};
use crate::fock::{FockBasis, Statistics};
use nalgebra::DMatrix;
use num_complex::Complex64;
use std::collections::HashMap;

/// All permutations of `0..n` with their signs.
pub fn permutations_with_signs(n: usize) -> Vec<(Vec<usize>, i32)> {
    fn parity(perm: &[usize]) -> i32 {
        let mut p = perm.to_vec();
        let mut sign = 1;
        for i in 0..p.len() {
            while p[i] != i {
                let j = p[i];
                p.swap(i, j);
                sign = -sign;
            }
        }
        sign
    }
    let mut out = Vec::new();
    let mut items: Vec<usize> = (0..n).collect();
    fn heap(k: usize, items: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k == 1 {
            out.push(items.clone());
            return;
        }
        for i in 0..k - 1 {
            heap(k - 1, items, out);
            if k % 2 == 0 {
                items.swap(i, k - 1);
            } else {
                items.swap(0, k - 1);
            }
        }
        heap(k - 1, items, out);
    }
    heap(n, &mut items, &mut out);
    out.into_iter().map(|p| { let s = parity(&p); (p, s) }).collect()
}

/// Negate and re-sort a shift class.
pub fn negate_class(class: &[i32]) -> Vec<i32> {
    let mut v: Vec<i32> = class.iter().map(|x| -x).collect();
    v.sort_unstable();
    v
}

/// Shift class of the identity matching (i-th smallest bra atom with i-th
/// smallest ket atom): sorted componentwise difference.
pub fn canonical_class(bra: &[usize], ket: &[usize]) -> Vec<i32> {
    let mut v: Vec<i32> = bra.iter().zip(ket).map(|(&b, &k)| b as i32 - k as i32).collect();
    v.sort_unstable();
    v
}

/// All shift classes of the pair `(bra, ket)` with their signed and unsigned
/// matching counts. Signs are permutation parities for fermions and +1
/// otherwise.
pub fn match_classes(
    bra: &[usize],
    ket: &[usize],
    statistics: Statistics,
    perms: &[(Vec<usize>, i32)],
) -> Vec<(Vec<i32>, i32, u32)> {
    let n = bra.len();
    let mut map: HashMap<Vec<i32>, (i32, u32)> = HashMap::new();
    for (perm, sign) in perms {
        let mut class: Vec<i32> = (0..n).map(|i| bra[i] as i32 - ket[perm[i]] as i32).collect();
        class.sort_unstable();
        let s = if statistics == Statistics::Fermion { *sign } else { 1 };
        let e = map.entry(class).or_insert((0, 0));
        e.0 += s;
        e.1 += 1;
    }
    let mut out: Vec<(Vec<i32>, i32, u32)> = map.into_iter().map(|(k, (s, u))| (k, s, u)).collect();
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}

/// Per-species shift-class index: every class realizable by some
/// configuration pair, in lexicographic order, with the all-zero class
/// located for normalization.
#[derive(Debug, Clone)]
pub struct SpeciesModes {
    /// Sorted delta tuples, lexicographic order.
    pub classes: Vec<Vec<i32>>,
    /// Class → ordinal.
    pub index: HashMap<Vec<i32>, usize>,
    /// Ordinal of the all-zero class.
    pub zero: usize,
    /// Match-class table for every ordered per-species pair:
    /// `tables[bra][ket]` lists `(class ordinal, signed count, unsigned count)`.
    pub tables: Vec<Vec<Vec<(usize, i32, u32)>>>,
}

impl SpeciesModes {
    /// Enumerate classes and matching tables for one species of the basis.
    pub fn build(basis: &FockBasis) -> Self {
        let n = basis.config.atoms_per_species;
        let perms = permutations_with_signs(n);
        let d = basis.local_dim();
        let mut set: HashMap<Vec<i32>, usize> = HashMap::new();
        let mut raw: Vec<Vec<Vec<(Vec<i32>, i32, u32)>>> = Vec::with_capacity(d);
        for bra in 0..d {
            let mut row = Vec::with_capacity(d);
            for ket in 0..d {
                let classes =
                    match_classes(&basis.states[bra], &basis.states[ket], basis.config.statistics, &perms);
                for (c, _, _) in &classes {
                    let next = set.len();
                    set.entry(c.clone()).or_insert(next);
                }
                row.push(classes);
            }
            raw.push(row);
        }
        let mut classes: Vec<Vec<i32>> = set.keys().cloned().collect();
        classes.sort();
        let index: HashMap<Vec<i32>, usize> =
            classes.iter().enumerate().map(|(i, c)| (c.clone(), i)).collect();
        let zero = index[&vec![0; n]];
        let tables = raw
            .into_iter()
            .map(|row| {
                row.into_iter()
                    .map(|cl| cl.into_iter().map(|(c, s, u)| (index[&c], s, u)).collect())
                    .collect()
            })
            .collect();
        SpeciesModes { classes, index, zero, tables }
    }

    /// Number of classes.
    pub fn len(&self) -> usize {
        self.classes.len()
    }

    /// True when no classes exist (never happens for a valid basis).
    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }
}

/// Joint coherence-sum tensor `g̃` indexed by one shift class per species
/// (species-major layout). Entry `g̃_t = Σ ρ_{XY} · ∏_s signed_count_s`,
/// summed over all ordered configuration pairs `(X, Y)`; the all-zero entry
/// equals the trace.
#[derive(Debug, Clone)]
pub struct JointGTilde {
    /// Per-species class counts.
    pub dims: Vec<usize>,
    /// Row-major (species-major) data.
    pub data: Vec<Complex64>,
}

impl JointGTilde {
    /// Zero tensor of the given per-species dimensions.
    pub fn zeros(dims: Vec<usize>) -> Self {
        let len = dims.iter().product();
        JointGTilde { dims, data: vec![Complex64::new(0.0, 0.0); len] }
    }

    /// Flat index of per-species class ordinals.
    pub fn flat(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.dims).fold(0, |acc, (&i, &d)| acc * d + i)
    }

    /// Entry at per-species class ordinals.
    pub fn get(&self, idx: &[usize]) -> Complex64 {
        self.data[self.flat(idx)]
    }
}

/// Exact coherence sums from a density matrix: the ideal-measurement values
/// the sampled estimator converges to.
pub fn exact_gtilde(rho: &DMatrix<f64>, basis: &FockBasis, modes: &SpeciesModes) -> JointGTilde {
    let s = basis.config.species_count;
    let d = basis.local_dim();
    let mut g = JointGTilde::zeros(vec![modes.len(); s]);
    let dim = basis.composite_dim();
    // Strides of the joint tensor (species-major, all dims equal).
    let mut strides = vec![1usize; s];
    for i in (0..s - 1).rev() {
        strides[i] = strides[i + 1] * modes.len();
    }
    for x in 0..dim {
        let xp = basis.split_composite(x);
        for y in 0..dim {
            let r = rho[(x, y)];
            if r == 0.0 {
                continue;
            }
            let yp = basis.split_composite(y);
            // Accumulate the product of per-species signed class weights into
            // every joint class combination.
            let mut stack: Vec<(usize, usize, f64)> = vec![(0, 0, r)];
            while let Some((species, base, weight)) = stack.pop() {
                if species == s {
                    g.data[base] += Complex64::new(weight, 0.0);
                    continue;
                }
                for &(class, signed, _) in &modes.tables[xp[species]][yp[species]] {
                    if signed != 0 {
                        stack.push((species + 1, base + class * strides[species], weight * signed as f64));
                    }
                }
            }
            let _ = d;
        }
    }
    g
}

/// Two-atom admissible mode set: `{(α,β): α ∈ 0..L−1, β ∈ −(L−1)..L−1}`
/// restricted so that no tuple appears together with its negation
/// (`α > 0`, or `α = 0 ∧ β ≥ 0`).
pub fn two_atom_mode_set(l: usize) -> Vec<(i32, i32)> {
    let m = l as i32 - 1;
    let mut out = Vec::new();
    for a in 0..=m {
        for b in -m..=m {
            if a > 0 || b >= 0 {
                out.push((a, b));
            }
        }
    }
    out
}

/// Tripartite admissible mode set: one representative of each `±t` pair of
/// `(α,β,γ)` tuples (first nonzero coordinate positive, all-zero included).
pub fn tripartite_mode_set(l: usize) -> Vec<(i32, i32, i32)> {
    let m = l as i32 - 1;
    let mut out = Vec::new();
    for a in 0..=m {
        for b in -m..=m {
            for c in -m..=m {
                if a > 0 || (a == 0 && b > 0) || (a == 0 && b == 0 && c >= 0) {
                    out.push((a, b, c));
                }
            }
        }
    }
    out
}

/// Validate that a mode list contains no tuple together with its negation
/// and includes the all-zero tuple (used by property tests).
pub fn mode_set_is_valid<T: PartialEq + Copy + std::ops::Neg<Output = T>>(modes: &[Vec<T>]) -> Result<()> {
    for t in modes {
        let neg: Vec<T> = t.iter().map(|&x| -x).collect();
        if neg != *t && modes.contains(&neg) {
            return Err(Error::Numerical("mode set contains a tuple and its negation".into()));
        }
    }
    Ok(())
}
