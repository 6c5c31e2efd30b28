//! Projection of momentum shots onto fringe modes.
//!
//! Each momentum shot contributes, per species, a vector of trigonometric
//! feature values indexed by the species' shift classes. Their sample means
//! estimate the overlap-smeared coherence sums; applying the inverse of the
//! per-species Gram (overlap) matrix `Q` unsmears them, and the all-zero
//! class entry normalizes away the density's partition constant.

use crate::envelope::GaussianEnvelope;
use crate::error::{Error, Result};
use crate::fock::FockBasis;
use crate::measure::{BasisTag, ShotRecord};
use crate::modes::{permutations_with_signs, SpeciesModes};
use crate::util::{par_map_indexed, stream_rng};
use nalgebra::{Cholesky, DMatrix, DVector};
use num_complex::Complex64;

/// Threshold above which the overlap matrix is considered numerically
/// singular.
pub const MAX_CONDITION: f64 = 1e12;

/// Matrix dimension above which linear solves switch from Cholesky to
/// conjugate gradient.
pub const CHOLESKY_CUTOFF: usize = 2000;

/// Gram matrix of the fringe modes of one species under the squared-envelope
/// measure, with its Cholesky factor and condition number.
pub struct OverlapMatrix {
    /// The symmetric positive-definite Gram matrix over shift classes.
    pub matrix: DMatrix<f64>,
    /// Ratio of the largest to smallest eigenvalue.
    pub condition: f64,
    chol: Cholesky<f64, nalgebra::Dyn>,
}

/// Assemble the overlap matrix for one species:
/// `Q[t,t'] = Σ_{σ,σ'} ∏_i f(t_{σ(i)} − t'_{σ'(i)})`
/// where `f` is the envelope fringe moment and the sums run over orderings
/// of the class entries.
pub fn build_overlap(modes: &SpeciesModes, n_atoms: usize, env: &GaussianEnvelope) -> Result<OverlapMatrix> {
    let nc = modes.classes.len();
    let perms = permutations_with_signs(n_atoms);
    let nfact = perms.len() as f64;
    let mut q = DMatrix::zeros(nc, nc);
    for a in 0..nc {
        for b in a..nc {
            let ta = &modes.classes[a];
            let tb = &modes.classes[b];
            // One ordering sum can be fixed by symmetry of the class product.
            let mut total = 0.0;
            for (perm, _) in &perms {
                let mut prod = 1.0;
                for i in 0..n_atoms {
                    prod *= env.fringe_moment((ta[i] - tb[perm[i]]) as i64);
                }
                total += prod;
            }
            let v = nfact * total;
            q[(a, b)] = v;
            q[(b, a)] = v;
        }
    }
    let eigs = q.clone().symmetric_eigenvalues();
    let max_e = eigs.iter().cloned().fold(f64::MIN, f64::max);
    let min_e = eigs.iter().cloned().fold(f64::MAX, f64::min);
    if !(min_e > 0.0) || max_e / min_e > MAX_CONDITION {
        return Err(Error::Numerical(format!(
            "overlap matrix is numerically singular (condition {:.3e}); \
             adjust the envelope width sigma_k toward 1/d",
            max_e / min_e.max(f64::MIN_POSITIVE)
        )));
    }
    let chol = Cholesky::new(q.clone())
        .ok_or_else(|| Error::Numerical("overlap matrix Cholesky factorization failed".into()))?;
    Ok(OverlapMatrix { matrix: q, condition: max_e / min_e, chol })
}

impl OverlapMatrix {
    /// Solve `Q x = b` for a complex right-hand side.
    pub fn solve_complex(&self, b: &DVector<Complex64>) -> DVector<Complex64> {
        let re = self.chol.solve(&b.map(|z| z.re));
        let im = self.chol.solve(&b.map(|z| z.im));
        DVector::from_fn(b.len(), |i, _| Complex64::new(re[i], im[i]))
    }
}

/// Solve a symmetric positive-definite system, Cholesky for small matrices
/// and conjugate gradient (relative residual ≤ 1e-10, at most `10·dim`
/// iterations) above `cutoff`.
pub fn solve_spd(a: &DMatrix<f64>, b: &DVector<f64>, cutoff: usize) -> Result<DVector<f64>> {
    let dim = a.nrows();
    if dim <= cutoff {
        let chol = Cholesky::new(a.clone())
            .ok_or_else(|| Error::Numerical("Cholesky factorization failed: matrix not positive definite".into()))?;
        return Ok(chol.solve(b));
    }
    let mut x = DVector::zeros(dim);
    let mut r = b.clone();
    let mut p = r.clone();
    let b_norm = b.norm().max(f64::MIN_POSITIVE);
    let mut rs_old = r.dot(&r);
    for _ in 0..10 * dim {
        if rs_old.sqrt() / b_norm <= 1e-10 {
            return Ok(x);
        }
        let ap = a * &p;
        let alpha = rs_old / p.dot(&ap);
        x += alpha * &p;
        r -= alpha * &ap;
        let rs_new = r.dot(&r);
        p = &r + (rs_new / rs_old) * p;
        rs_old = rs_new;
    }
    if rs_old.sqrt() / b_norm <= 1e-10 {
        Ok(x)
    } else {
        Err(Error::Numerical(format!(
            "conjugate gradient did not converge within {} iterations (residual {:.3e})",
            10 * dim,
            rs_old.sqrt() / b_norm
        )))
    }
}

/// A joint fringe mode: one shift-class index per species.
pub type JointMode = Vec<usize>;

/// Result of projecting a momentum shot set.
pub struct Projection {
    /// Coherence sums at the requested joint modes, normalized so that the
    /// all-zero mode equals one.
    pub g: Vec<Complex64>,
    /// Unnormalized sample mean at the all-zero mode.
    pub g_zero_raw: Complex64,
    /// Per-shot value of the caller's linear functional (numerator) and of
    /// the all-zero mode product (denominator), for resampling.
    pub per_shot: Vec<(Complex64, Complex64)>,
    /// Number of shots used.
    pub n_shots: usize,
}

/// Projects momentum shots for one configuration.
pub struct Projector<'a> {
    pub basis: &'a FockBasis,
    pub modes: &'a SpeciesModes,
    pub env: GaussianEnvelope,
    pub overlap: OverlapMatrix,
}

impl<'a> Projector<'a> {
    /// Build the projector, assembling and factorizing the overlap matrix.
    pub fn new(basis: &'a FockBasis, modes: &'a SpeciesModes, env: GaussianEnvelope) -> Result<Self> {
        let overlap = build_overlap(modes, basis.config.atoms_per_species, &env)?;
        Ok(Projector { basis, modes, env, overlap })
    }

    /// Raw per-species feature vector of one shot: for each shift class `t`,
    /// `Σ_σ ∏_i exp(+i · t_{σ(i)} · k_i)` (the conjugated fringe mode).
    pub fn raw_features(&self, shot: &ShotRecord) -> Result<Vec<DVector<Complex64>>> {
        if shot.basis != BasisTag::Momentum {
            return Err(Error::data(format!("shot {} is not a momentum shot", shot.shot)));
        }
        let s = self.basis.config.species_count;
        let n = self.basis.config.atoms_per_species;
        if shot.atoms.len() != s * n {
            return Err(Error::data(format!("shot {} has wrong atom count", shot.shot)));
        }
        let lm1 = self.basis.lattice.sites as i64 - 1;
        let perms = permutations_with_signs(n);
        let mut out = Vec::with_capacity(s);
        for sp in 0..s {
            let ks: Vec<f64> = shot.atoms[sp * n..(sp + 1) * n]
                .iter()
                .map(|a| a.kd.ok_or_else(|| Error::data(format!("shot {}: missing kd", shot.shot))))
                .collect::<Result<_>>()?;
            // Phase table: phase[i][d + L−1] = exp(i · d · k_i).
            let width = (2 * lm1 + 1) as usize;
            let mut table = vec![Complex64::new(0.0, 0.0); n * width];
            for (i, &k) in ks.iter().enumerate() {
                for d in -lm1..=lm1 {
                    table[i * width + (d + lm1) as usize] = Complex64::from_polar(1.0, d as f64 * k);
                }
            }
            let mut feats = DVector::from_element(self.modes.classes.len(), Complex64::new(0.0, 0.0));
            for (ci, class) in self.modes.classes.iter().enumerate() {
                let mut acc = Complex64::new(0.0, 0.0);
                for (perm, _) in &perms {
                    let mut prod = Complex64::new(1.0, 0.0);
                    for i in 0..n {
                        prod *= table[i * width + (class[perm[i]] as i64 + lm1) as usize];
                    }
                    acc += prod;
                }
                feats[ci] = acc;
            }
            out.push(feats);
        }
        Ok(out)
    }

    /// Unsmeared per-species features: `Q⁻¹` applied to the raw features.
    pub fn transformed_features(&self, shot: &ShotRecord) -> Result<Vec<DVector<Complex64>>> {
        Ok(self.raw_features(shot)?.iter().map(|f| self.overlap.solve_complex(f)).collect())
    }

    /// Sample means of the raw (smeared) joint features at the given modes —
    /// the uncorrected projection coefficients.
    pub fn raw_coefficients(&self, shots: &[ShotRecord], joint_modes: &[JointMode]) -> Result<Vec<Complex64>> {
        if shots.is_empty() {
            return Err(Error::data("empty momentum shot set"));
        }
        let sums = par_map_indexed(shots.len(), |i| -> Result<Vec<Complex64>> {
            let feats = self.raw_features(&shots[i])?;
            Ok(joint_modes.iter().map(|m| joint_product(&feats, m)).collect())
        });
        let mut total = vec![Complex64::new(0.0, 0.0); joint_modes.len()];
        for row in sums {
            for (t, v) in total.iter_mut().zip(row?) {
                *t += v;
            }
        }
        Ok(total.into_iter().map(|v| v / shots.len() as f64).collect())
    }

    /// Full projection: per shot, unsmear the features, accumulate the joint
    /// modes' sample means, and record per-shot numerator/denominator values
    /// of the linear functional `Σ_m coeffs[m] · g[joint_modes[m]]` for
    /// bootstrap resampling. `g` is normalized by the all-zero mode.
    pub fn project(
        &self,
        shots: &[ShotRecord],
        joint_modes: &[JointMode],
        coeffs: &[Complex64],
    ) -> Result<Projection> {
        if shots.is_empty() {
            return Err(Error::data("empty momentum shot set"));
        }
        if coeffs.len() != joint_modes.len() {
            return Err(Error::config("coefficient and mode lists differ in length"));
        }
        let s = self.basis.config.species_count;
        let zero_mode: JointMode = vec![self.modes.zero; s];
        struct ShotOut {
            mode_vals: Vec<Complex64>,
            functional: Complex64,
            zero: Complex64,
        }
        let rows = par_map_indexed(shots.len(), |i| -> Result<ShotOut> {
            let feats = self.transformed_features(&shots[i])?;
            let mode_vals: Vec<Complex64> = joint_modes.iter().map(|m| joint_product(&feats, m)).collect();
            let functional = mode_vals.iter().zip(coeffs).map(|(v, c)| v * c).sum();
            Ok(ShotOut { mode_vals, functional, zero: joint_product(&feats, &zero_mode) })
        });
        let n = shots.len();
        let mut sums = vec![Complex64::new(0.0, 0.0); joint_modes.len()];
        let mut zero_sum = Complex64::new(0.0, 0.0);
        let mut per_shot = Vec::with_capacity(n);
        for row in rows {
            let row = row?;
            for (t, v) in sums.iter_mut().zip(&row.mode_vals) {
                *t += v;
            }
            zero_sum += row.zero;
            per_shot.push((row.functional, row.zero));
        }
        let g_zero_raw = zero_sum / n as f64;
        if g_zero_raw.norm() < 1e-12 {
            return Err(Error::Numerical("all-zero fringe mode vanished; cannot normalize coherences".into()));
        }
        let g = sums.into_iter().map(|v| v / n as f64 / g_zero_raw).collect();
        Ok(Projection { g, g_zero_raw, per_shot, n_shots: n })
    }
}

/// Product over species of per-species feature values at a joint mode.
fn joint_product(feats: &[DVector<Complex64>], mode: &JointMode) -> Complex64 {
    feats.iter().zip(mode).map(|(f, &ci)| f[ci]).product()
}

/// Deterministic random SPD matrix for solver cross-checks.
pub fn random_spd(dim: usize, seed: u64) -> DMatrix<f64> {
    use rand::Rng;
    let mut rng = stream_rng(seed, 0);
    let a = DMatrix::from_fn(dim, dim, |_, _| rng.gen::<f64>() - 0.5);
    &a * a.transpose() + DMatrix::identity(dim, dim) * 0.1
}
