//! Synthetic measurement shots: position-basis site detection and
//! momentum-basis time-of-flight detection with ancestral sampling.
//!
//! Position shots draw composite site configurations from the diagonal of
//! `ρ`. Momentum shots sample the continuous interference pattern one atom
//! at a time: the state is split into pure components (eigenvectors of `ρ`),
//! a component is drawn with probability proportional to its weight times its
//! fringe-pattern mass, and each atom's 1D conditional density — a cosine
//! series on top of the envelope — is sampled by rejection against the bare
//! envelope.

use crate::envelope::GaussianEnvelope;
use crate::error::{Error, Result};
use crate::fock::FockBasis;
use crate::hubbard::{sorted_eigen, DensityMatrix};
use crate::modes::{permutations_with_signs, SpeciesModes};
use crate::util::{par_map_indexed, stream_rng};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};

/// Measurement basis tag of a shot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisTag {
    /// In-situ site-resolved detection.
    Position,
    /// Time-of-flight momentum detection.
    Momentum,
}

/// One detected atom within a shot: its species (1-based) and either a site
/// index (position basis) or a dimensionless momentum `k·d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomRecord {
    /// Species id, 1-based.
    pub species: usize,
    /// Occupied site (1-based), present for position shots.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub site: Option<usize>,
    /// Momentum `k·d`, present for momentum shots.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kd: Option<f64>,
}

/// One measurement shot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShotRecord {
    /// Shot index (also the RNG stream id).
    pub shot: usize,
    /// Measurement basis.
    pub basis: BasisTag,
    /// Detected atoms, species-major, atoms of one species in sampling order.
    pub atoms: Vec<AtomRecord>,
}

/// Write shots as JSON lines.
pub fn write_shots<W: Write>(mut out: W, shots: &[ShotRecord]) -> Result<()> {
    for s in shots {
        serde_json::to_writer(&mut out, s)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Read shots from JSON lines, validating against the basis layout.
pub fn read_shots<R: BufRead>(input: R, basis: &FockBasis) -> Result<Vec<ShotRecord>> {
    let mut shots = Vec::new();
    for (lineno, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let shot: ShotRecord = serde_json::from_str(&line)
            .map_err(|e| Error::data(format!("line {}: {e}", lineno + 1)))?;
        validate_shot(&shot, basis)?;
        shots.push(shot);
    }
    Ok(shots)
}

/// Check one shot against the basis layout (atom counts, species ids, site
/// ranges, per-species exclusion).
pub fn validate_shot(shot: &ShotRecord, basis: &FockBasis) -> Result<()> {
    let s = basis.config.species_count;
    let n = basis.config.atoms_per_species;
    if shot.atoms.len() != s * n {
        return Err(Error::data(format!(
            "shot {}: expected {} atoms, found {}",
            shot.shot,
            s * n,
            shot.atoms.len()
        )));
    }
    for (i, atom) in shot.atoms.iter().enumerate() {
        let expect_species = i / n + 1;
        if atom.species != expect_species {
            return Err(Error::data(format!(
                "shot {}: atom {i} has species {}, expected {expect_species}",
                shot.shot, atom.species
            )));
        }
        match shot.basis {
            BasisTag::Position => {
                let site = atom.site.ok_or_else(|| Error::data(format!("shot {}: missing site", shot.shot)))?;
                if !(1..=basis.lattice.sites).contains(&site) {
                    return Err(Error::data(format!("shot {}: site {site} out of range", shot.shot)));
                }
            }
            BasisTag::Momentum => {
                let kd = atom.kd.ok_or_else(|| Error::data(format!("shot {}: missing kd", shot.shot)))?;
                if !kd.is_finite() {
                    return Err(Error::data(format!("shot {}: non-finite momentum", shot.shot)));
                }
            }
        }
    }
    if shot.basis == BasisTag::Position {
        for sp in 0..s {
            let mut sites: Vec<usize> = shot.atoms[sp * n..(sp + 1) * n].iter().map(|a| a.site.unwrap()).collect();
            sites.sort_unstable();
            sites.dedup();
            if sites.len() != n {
                return Err(Error::data(format!("shot {}: duplicate site within a species", shot.shot)));
            }
        }
    }
    Ok(())
}

/// Draw `n_pos` position shots from the diagonal of `ρ`.
pub fn sample_positions(rho: &DensityMatrix, basis: &FockBasis, n_pos: usize, seed: u64) -> Result<Vec<ShotRecord>> {
    if rho.dim() != basis.composite_dim() {
        return Err(Error::config("density matrix does not match basis dimension"));
    }
    let pops = rho.populations();
    let total: f64 = pops.iter().sum();
    let mut cdf = Vec::with_capacity(pops.len());
    let mut acc = 0.0;
    for p in &pops {
        acc += p.max(0.0) / total;
        cdf.push(acc);
    }
    Ok(par_map_indexed(n_pos, |i| {
        let mut rng = stream_rng(seed, i as u64);
        let u: f64 = rng.gen();
        let idx = cdf.partition_point(|&c| c < u).min(pops.len() - 1);
        let parts = basis.split_composite(idx);
        let mut atoms = Vec::new();
        for (sp, &local) in parts.iter().enumerate() {
            for &site in &basis.states[local] {
                atoms.push(AtomRecord { species: sp + 1, site: Some(site), kd: None });
            }
        }
        ShotRecord { shot: i, basis: BasisTag::Position, atoms }
    }))
}

/// Empirical composite-configuration frequencies from position shots.
pub fn position_counts(shots: &[ShotRecord], basis: &FockBasis) -> Result<Vec<u64>> {
    let mut counts = vec![0u64; basis.composite_dim()];
    let n = basis.config.atoms_per_species;
    for shot in shots {
        if shot.basis != BasisTag::Position {
            return Err(Error::data("momentum shot in a position shot set"));
        }
        validate_shot(shot, basis)?;
        let mut parts = Vec::with_capacity(basis.config.species_count);
        for sp in 0..basis.config.species_count {
            let mut sites: Vec<usize> =
                shot.atoms[sp * n..(sp + 1) * n].iter().map(|a| a.site.unwrap()).collect();
            sites.sort_unstable();
            let local = basis
                .index_of(&sites)
                .ok_or_else(|| Error::data(format!("shot {}: invalid configuration", shot.shot)))?;
            parts.push(local);
        }
        counts[basis.combine_composite(&parts)] += 1;
    }
    Ok(counts)
}

/// Per-species fringe-mass matrix `W[x][y] = Σ_matchings sign · ∏ f(δ_i)`:
/// the integral of the pair's interference term over all of one species'
/// momenta (up to a constant factor common to all entries).
fn fringe_mass_matrix(basis: &FockBasis, modes: &SpeciesModes, env: &GaussianEnvelope) -> DMatrix<f64> {
    let d = basis.local_dim();
    DMatrix::from_fn(d, d, |x, y| {
        modes.tables[x][y]
            .iter()
            .map(|&(class, signed, _)| {
                signed as f64 * modes.classes[class].iter().map(|&dl| env.fringe_moment(dl as i64)).product::<f64>()
            })
            .sum()
    })
}

/// One pure component of the sampled state.
struct Component {
    /// Flattened coefficient vector on the composite basis.
    psi: DVector<f64>,
    /// Collapsed pair weights for the first species (constant per component).
    c_first: DMatrix<f64>,
}

/// Momentum-shot generator for a fixed state, envelope and cutoff.
pub struct MomentumSampler<'a> {
    basis: &'a FockBasis,
    env: GaussianEnvelope,
    delta_c: f64,
    components: Vec<Component>,
    /// Cumulative component-selection distribution (weight × fringe mass).
    component_cdf: Vec<f64>,
    /// All permutations of `0..N` with signs.
    perms: Vec<(Vec<usize>, i32)>,
    /// Fringe-mass matrix (shared by all species — identical lattices).
    w_mass: DMatrix<f64>,
}

/// Maximum rejection attempts per 1D draw before reporting a stall.
const MAX_REJECTIONS: usize = 100_000;

impl<'a> MomentumSampler<'a> {
    /// Build the sampler: eigendecompose `ρ`, keep components with weight
    /// above `1e-12`, and precompute their collapsed first-species weights.
    pub fn new(
        rho: &DensityMatrix,
        basis: &'a FockBasis,
        modes: &'a SpeciesModes,
        env: GaussianEnvelope,
        delta_c: Option<f64>,
    ) -> Result<Self> {
        if rho.dim() != basis.composite_dim() {
            return Err(Error::config("density matrix does not match basis dimension"));
        }
        let delta_c = delta_c.unwrap_or_else(|| env.default_delta_c());
        let (values, vectors) = sorted_eigen(&rho.matrix);
        let wmax = values.last().copied().unwrap_or(0.0);
        let w_mass = fringe_mass_matrix(basis, modes, &env);
        let s = basis.config.species_count;
        let d = basis.local_dim();
        let w_kron2 = if s == 3 { Some(w_mass.kronecker(&w_mass)) } else { None };
        let mut components = Vec::new();
        let mut masses = Vec::new();
        for (k, &w) in values.iter().enumerate() {
            if w <= 1e-12 * wmax.max(1.0) {
                continue;
            }
            let psi = vectors.column(k).clone_owned();
            // Collapse all species but the first into pair weights:
            //   C[x,y] = Σ ψ[x,..] ψ[y,..] ∏_{other species} W[..]
            let c_first = match s {
                2 => {
                    let m = DMatrix::from_fn(d, d, |a, b| psi[a * d + b]);
                    &m * &w_mass * m.transpose()
                }
                3 => {
                    let m = DMatrix::from_fn(d, d * d, |a, bc| psi[a * d * d + bc]);
                    &m * w_kron2.as_ref().unwrap() * m.transpose()
                }
                _ => unreachable!(),
            };
            // Total fringe mass of the component: the first-species collapse
            // integrated out every other species, so closing it against the
            // first species' own W gives the full integral.
            let z = (0..d)
                .map(|x| (0..d).map(|y| c_first[(x, y)] * w_mass[(x, y)]).sum::<f64>())
                .sum::<f64>();
            masses.push(w * z);
            components.push(Component { psi, c_first });
        }
        if components.is_empty() {
            return Err(Error::Numerical("state has no positive-weight components".into()));
        }
        let total: f64 = masses.iter().sum();
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::Numerical(format!("non-positive fringe mass {total}")));
        }
        let mut cdf = Vec::with_capacity(masses.len());
        let mut acc = 0.0;
        for m in &masses {
            acc += m / total;
            cdf.push(acc);
        }
        Ok(MomentumSampler {
            basis,
            env,
            delta_c,
            components,
            component_cdf: cdf,
            perms: permutations_with_signs(basis.config.atoms_per_species),
            w_mass,
        })
    }

    /// Draw `n_s` momentum shots, one RNG stream per shot.
    pub fn sample(&self, n_s: usize, seed: u64) -> Result<Vec<ShotRecord>> {
        let shots = par_map_indexed(n_s, |i| self.sample_one(i, seed));
        shots.into_iter().collect()
    }

    fn sample_one(&self, shot_idx: usize, seed: u64) -> Result<ShotRecord> {
        let mut rng = stream_rng(seed, shot_idx as u64);
        let u: f64 = rng.gen();
        let comp_idx = self.component_cdf.partition_point(|&c| c < u).min(self.components.len() - 1);
        let comp = &self.components[comp_idx];
        let n = self.basis.config.atoms_per_species;
        let d = self.basis.local_dim();
        let s = self.basis.config.species_count;
        let mut atoms: Vec<AtomRecord> = Vec::with_capacity(s * n);

        // --- species 1 ---
        let pairs_first = dense_pairs(&comp.c_first);
        let k_first = self.sample_species(&pairs_first, &mut rng, shot_idx)?;
        for &kd in &k_first {
            atoms.push(AtomRecord { species: 1, site: None, kd: Some(kd) });
        }
        let a_first = self.amplitudes(&k_first);

        match s {
            2 => {
                // C_B[x,y] = u_x conj(u_y) with u = Ψᵀ a_A.
                let mut u = vec![Complex64::new(0.0, 0.0); d];
                for x in 0..d {
                    for b in 0..d {
                        u[b] += comp.psi[x * d + b] * a_first[x];
                    }
                }
                let pairs = rank_one_pairs(&u);
                let ks = self.sample_species(&pairs, &mut rng, shot_idx)?;
                for &kd in &ks {
                    atoms.push(AtomRecord { species: 2, site: None, kd: Some(kd) });
                }
            }
            3 => {
                // u[b,c] = Σ_x a₁[x] ψ[x,b,c]; C₂ = u W u† contracted over c.
                let mut umat = vec![Complex64::new(0.0, 0.0); d * d];
                for x in 0..d {
                    let ax = a_first[x];
                    if ax.norm_sqr() < 1e-30 {
                        continue;
                    }
                    for bc in 0..d * d {
                        umat[bc] += comp.psi[x * d * d + bc] * ax;
                    }
                }
                let mut c2 = DMatrix::<Complex64>::zeros(d, d);
                for b in 0..d {
                    for bp in 0..d {
                        let mut acc = Complex64::new(0.0, 0.0);
                        for c in 0..d {
                            for cp in 0..d {
                                acc += umat[b * d + c] * umat[bp * d + cp].conj() * self.w_mass[(c, cp)];
                            }
                        }
                        c2[(b, bp)] = acc;
                    }
                }
                let pairs2 = dense_pairs_complex(&c2);
                let k2 = self.sample_species(&pairs2, &mut rng, shot_idx)?;
                atoms.push(AtomRecord { species: 2, site: None, kd: Some(k2[0]) });
                let a2 = self.amplitudes(&k2);
                let mut v = vec![Complex64::new(0.0, 0.0); d];
                for b in 0..d {
                    for c in 0..d {
                        v[c] += umat[b * d + c] * a2[b];
                    }
                }
                let pairs3 = rank_one_pairs(&v);
                let k3 = self.sample_species(&pairs3, &mut rng, shot_idx)?;
                atoms.push(AtomRecord { species: 3, site: None, kd: Some(k3[0]) });
            }
            _ => unreachable!(),
        }
        Ok(ShotRecord { shot: shot_idx, basis: BasisTag::Momentum, atoms })
    }

    /// Evaluated configuration amplitudes after a species is fully sampled:
    /// `a[x] = Σ_p sign(p) ∏_i exp(−i · x_{p(i)} · k_i)`.
    fn amplitudes(&self, ks: &[f64]) -> Vec<Complex64> {
        let d = self.basis.local_dim();
        let mut out = vec![Complex64::new(0.0, 0.0); d];
        for x in 0..d {
            let sites = &self.basis.states[x];
            let mut acc = Complex64::new(0.0, 0.0);
            for (perm, sign) in &self.perms {
                let mut phase = 0.0;
                for (i, &k) in ks.iter().enumerate() {
                    phase -= sites[perm[i]] as f64 * k;
                }
                let s = if self.basis.config.statistics == crate::fock::Statistics::Fermion {
                    *sign as f64
                } else {
                    1.0
                };
                acc += Complex64::from_polar(s, phase);
            }
            out[x] = acc;
        }
        out
    }

    /// Sample all atoms of one species given its collapsed pair weights.
    fn sample_species(
        &self,
        pairs: &[(usize, usize, Complex64)],
        rng: &mut impl Rng,
        shot_idx: usize,
    ) -> Result<Vec<f64>> {
        let n = self.basis.config.atoms_per_species;
        let lm1 = self.basis.lattice.sites as i64 - 1;
        let mut ks: Vec<f64> = Vec::with_capacity(n);
        for atom in 0..n {
            let coeffs = self.step_coefficients(pairs, &ks, atom, lm1);
            ks.push(self.rejection_sample_1d(&coeffs, lm1, rng, shot_idx, atom)?);
        }
        Ok(ks)
    }

    /// Coefficients `ν_δ` of the current atom's 1D conditional density
    /// `p(k) ∝ |w̃(k)|² · Re Σ_δ ν_δ e^{−iδk}`: all other atoms of the
    /// species get either their sampled phase (earlier atoms) or a fringe
    /// moment (later atoms); terms with too small an envelope weight
    /// (`Σ δ² > δ_c` over the marginalized atoms) are dropped.
    fn step_coefficients(
        &self,
        pairs: &[(usize, usize, Complex64)],
        sampled: &[f64],
        atom: usize,
        lm1: i64,
    ) -> Vec<Complex64> {
        let n = self.basis.config.atoms_per_species;
        let fermion = self.basis.config.statistics == crate::fock::Statistics::Fermion;
        let mut coeffs = vec![Complex64::new(0.0, 0.0); (2 * lm1 + 1) as usize];
        for &(x, y, c) in pairs {
            let xs = &self.basis.states[x];
            let ys = &self.basis.states[y];
            for (p, ps) in &self.perms {
                for (q, qs) in &self.perms {
                    let sgn = if fermion { (ps * qs) as f64 } else { 1.0 };
                    let mut term = c * sgn;
                    let mut ok = true;
                    let mut tail_weight = 0.0f64;
                    let mut delta_cur = 0i64;
                    for i in 0..n {
                        let delta = xs[p[i]] as i64 - ys[q[i]] as i64;
                        if i < atom {
                            term *= Complex64::from_polar(1.0, -(delta as f64) * sampled[i]);
                        } else if i == atom {
                            delta_cur = delta;
                        } else {
                            tail_weight += (delta * delta) as f64;
                            if tail_weight > self.delta_c {
                                ok = false;
                                break;
                            }
                            term *= self.env.fringe_moment(delta);
                        }
                    }
                    if ok {
                        coeffs[(delta_cur + lm1) as usize] += term;
                    }
                }
            }
        }
        coeffs
    }

    /// Rejection sampling of one momentum against the bare envelope.
    fn rejection_sample_1d(
        &self,
        coeffs: &[Complex64],
        lm1: i64,
        rng: &mut impl Rng,
        shot_idx: usize,
        atom: usize,
    ) -> Result<f64> {
        let bound: f64 = coeffs.iter().map(|c| c.norm()).sum();
        if !(bound.is_finite() && bound > 0.0) {
            return Err(Error::Numerical(format!(
                "shot {shot_idx}, atom {atom}: degenerate conditional density (bound {bound})"
            )));
        }
        let proposal = Normal::new(0.0, self.env.sigma_k).expect("valid envelope std");
        for attempt in 0..MAX_REJECTIONS {
            let kd: f64 = proposal.sample(rng);
            let mut val = 0.0;
            for (j, c) in coeffs.iter().enumerate() {
                let delta = j as i64 - lm1;
                let phase = -(delta as f64) * kd;
                val += c.re * phase.cos() - c.im * phase.sin();
            }
            let u: f64 = rng.gen();
            if u * bound <= val {
                return Ok(kd);
            }
            // Stall detection: give up if acceptance is pathologically low.
            if attempt == MAX_REJECTIONS - 1 {
                break;
            }
        }
        Err(Error::Numerical(format!(
            "shot {shot_idx}, atom {atom}: rejection sampling stalled (acceptance < {:.0e})",
            1.0 / MAX_REJECTIONS as f64
        )))
    }
}

/// Dense real pair list with negligible entries dropped.
fn dense_pairs(c: &DMatrix<f64>) -> Vec<(usize, usize, Complex64)> {
    let maxabs = c.abs().max().max(1e-300);
    let mut out = Vec::new();
    for x in 0..c.nrows() {
        for y in 0..c.ncols() {
            if c[(x, y)].abs() > 1e-14 * maxabs {
                out.push((x, y, Complex64::new(c[(x, y)], 0.0)));
            }
        }
    }
    out
}

/// Dense complex pair list with negligible entries dropped.
fn dense_pairs_complex(c: &DMatrix<Complex64>) -> Vec<(usize, usize, Complex64)> {
    let maxabs = c.iter().map(|z| z.norm()).fold(1e-300, f64::max);
    let mut out = Vec::new();
    for x in 0..c.nrows() {
        for y in 0..c.ncols() {
            if c[(x, y)].norm() > 1e-14 * maxabs {
                out.push((x, y, c[(x, y)]));
            }
        }
    }
    out
}

/// Rank-one pair list `C[x,y] = u_x ū_y`.
fn rank_one_pairs(u: &[Complex64]) -> Vec<(usize, usize, Complex64)> {
    let maxabs = u.iter().map(|z| z.norm_sqr()).fold(1e-300, f64::max);
    let mut out = Vec::new();
    for (x, ux) in u.iter().enumerate() {
        for (y, uy) in u.iter().enumerate() {
            let c = ux * uy.conj();
            if c.norm() > 1e-14 * maxabs {
                out.push((x, y, c));
            }
        }
    }
    out
}

/// Exact momentum-space density of `ρ` (normalized over all atom momenta),
/// exposed for quadrature tests. `kds` lists `k·d` species-major, atoms of a
/// species in order.
pub fn momentum_density<'a>(
    rho: &DensityMatrix,
    basis: &'a FockBasis,
    modes: &SpeciesModes,
    env: &GaussianEnvelope,
) -> impl Fn(&[f64]) -> f64 + 'a {
    let s = basis.config.species_count;
    let n = basis.config.atoms_per_species;
    let dim = basis.composite_dim();
    let perms = permutations_with_signs(n);
    let w = fringe_mass_matrix(basis, modes, env);
    // Normalization: Σ ρ_XY ∏_s W_s, times the per-species assignment count
    // (N! per species from summing over atom orderings in the integral,
    // already contained in the matching sum convention below).
    let mut z = 0.0;
    for x in 0..dim {
        let xp = basis.split_composite(x);
        for y in 0..dim {
            let yp = basis.split_composite(y);
            let mut t = rho.matrix[(x, y)];
            for sp in 0..s {
                t *= w[(xp[sp], yp[sp])];
            }
            z += t;
        }
    }
    let rho = rho.matrix.clone();
    let basis = basis;
    let env = *env;
    move |kds: &[f64]| {
        assert_eq!(kds.len(), s * n);
        let fermion = basis.config.statistics == crate::fock::Statistics::Fermion;
        // Per-species evaluated amplitudes a_s[x](k⃗_s).
        let d = basis.local_dim();
        let mut amps: Vec<Vec<Complex64>> = Vec::with_capacity(s);
        for sp in 0..s {
            let ks = &kds[sp * n..(sp + 1) * n];
            let mut a = vec![Complex64::new(0.0, 0.0); d];
            for (x, ax) in a.iter_mut().enumerate() {
                for (perm, sign) in &perms {
                    let mut phase = 0.0;
                    for (i, &k) in ks.iter().enumerate() {
                        phase -= basis.states[x][perm[i]] as f64 * k;
                    }
                    let sg = if fermion { *sign as f64 } else { 1.0 };
                    *ax += Complex64::from_polar(sg, phase);
                }
            }
            amps.push(a);
        }
        let mut val = Complex64::new(0.0, 0.0);
        for x in 0..dim {
            let xp = basis.split_composite(x);
            for y in 0..dim {
                let yp = basis.split_composite(y);
                let r = rho[(x, y)];
                if r == 0.0 {
                    continue;
                }
                let mut t = Complex64::new(r, 0.0);
                for sp in 0..s {
                    t *= amps[sp][xp[sp]] * amps[sp][yp[sp]].conj();
                }
                val += t;
            }
        }
        let envelope: f64 = kds.iter().map(|&k| env.density(k)).product();
        (val.re / z) * envelope
    }
}
