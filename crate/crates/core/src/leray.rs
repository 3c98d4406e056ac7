//! Leray projection onto divergence-free fields, the Helmholtz splitting
//! `z = 𝙿z + ∇p`, and the advective commutator `[𝙿, u·∇]z`.
//!
//! On the torus the projector acts mode by mode as `I − k kᵀ/|k|²`. The mean
//! mode (and any mode whose derivative wavevector vanishes, i.e. pure Nyquist
//! modes) is divergence-free and passes through unchanged. Potentials are
//! fixed to zero mean.

use num_complex::Complex64;

use crate::fields::{
    advect, divergence, forward_pair, random_field, sobolev_norm, spectral::inverse, FieldError, Grid,
    RandomFieldSpec, ScalarField, Spectrum, VectorField,
};

#[derive(Debug, thiserror::Error)]
pub enum LerayError {
    #[error("Poisson right-hand side has mean {mean:e}; the periodic problem needs zero mean")]
    Solvability { mean: f64 },
    #[error("advecting velocity is not divergence-free (max |∇·u| = {residual:e})")]
    NotSolenoidal { residual: f64 },
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Tolerance on `max |∇·u|` for operations that require a solenoidal input.
pub const SOLENOIDAL_TOLERANCE: f64 = 1e-8;

/// Tolerance on `|mean(g)|` (scaled by `max(1, max|g|)`) for the Poisson solve.
pub const SOLVABILITY_TOLERANCE: f64 = 1e-10;

/// Solves `Δp = g` with `p̂₀ = 0`.
pub fn poisson_inverse(g: &ScalarField) -> Result<ScalarField, LerayError> {
    let mean = g.mean();
    if mean.abs() > SOLVABILITY_TOLERANCE * g.max_abs().max(1.0) {
        return Err(LerayError::Solvability { mean });
    }
    let s = crate::fields::spectral::forward(g).map_deriv_modes(|k1, k2, c| {
        let kk = k1 * k1 + k2 * k2;
        if kk == 0.0 {
            Complex64::new(0.0, 0.0)
        } else {
            -c / kk
        }
    });
    Ok(inverse(&s))
}

fn project_spectra(a: &mut Spectrum, b: &mut Spectrum) {
    let g = a.grid();
    let n = g.n();
    for j in 0..n {
        let k2 = g.deriv_wavenumber(j);
        for i in 0..n {
            let k1 = g.deriv_wavenumber(i);
            let kk = k1 * k1 + k2 * k2;
            if kk == 0.0 {
                continue;
            }
            let idx = g.index(i, j);
            let (ca, cb) = (a.coeffs()[idx], b.coeffs()[idx]);
            let dot = (k1 * ca + k2 * cb) / kk;
            a.coeffs_mut()[idx] = ca - k1 * dot;
            b.coeffs_mut()[idx] = cb - k2 * dot;
        }
    }
}

/// `𝙿z = z − ∇p` with `Δp = ∇·z`.
pub fn leray_project(z: &VectorField) -> VectorField {
    let (mut a, mut b) = forward_pair(z);
    project_spectra(&mut a, &mut b);
    VectorField::new(inverse(&a), inverse(&b)).expect("components share a grid")
}

/// Splits `z` into its divergence-free part and a zero-mean potential:
/// `z = u + ∇p`, orthogonal in L².
pub fn helmholtz_decompose(z: &VectorField) -> (VectorField, ScalarField) {
    let u = leray_project(z);
    let (a, b) = forward_pair(z);
    let g = z.grid();
    let n = g.n();
    let mut p = Spectrum::zeros(g);
    let i_unit = Complex64::new(0.0, 1.0);
    for j in 0..n {
        let k2 = g.deriv_wavenumber(j);
        for i in 0..n {
            let k1 = g.deriv_wavenumber(i);
            let kk = k1 * k1 + k2 * k2;
            if kk == 0.0 {
                continue;
            }
            let idx = g.index(i, j);
            p.coeffs_mut()[idx] = -i_unit * (k1 * a.coeffs()[idx] + k2 * b.coeffs()[idx]) / kk;
        }
    }
    (u, inverse(&p))
}

/// Largest pointwise divergence of `u`.
pub fn divergence_residual(u: &VectorField) -> f64 {
    divergence(u).max_abs()
}

/// `[𝙿, u·∇]z = 𝙿((u·∇)z) − (u·∇)(𝙿z)`, with dealiased products.
/// Requires `u` divergence-free to [`SOLENOIDAL_TOLERANCE`].
pub fn commutator_advection(u: &VectorField, z: &VectorField) -> Result<VectorField, LerayError> {
    if u.grid() != z.grid() {
        return Err(FieldError::GridMismatch.into());
    }
    let residual = divergence_residual(u);
    if residual > SOLENOIDAL_TOLERANCE {
        return Err(LerayError::NotSolenoidal { residual });
    }
    let lhs = leray_project(&advect(u, z)?);
    let rhs = advect(u, &leray_project(z))?;
    Ok(lhs.sub(&rhs))
}

/// A seeded random divergence-free field, rescaled to `spec.amplitude` in
/// `H^{spec.sobolev_index}`.
pub fn random_solenoidal(grid: Grid, spec: &RandomFieldSpec) -> Result<VectorField, LerayError> {
    let raw = random_field(grid, spec)?;
    if spec.amplitude == 0.0 {
        return Ok(raw);
    }
    let u = leray_project(&raw);
    let norm = sobolev_norm(&u, spec.sobolev_index)?;
    Ok(u.scale(spec.amplitude / norm))
}

/// A seeded random gradient field `∇f` with the same normalization rule.
pub fn random_gradient(grid: Grid, spec: &RandomFieldSpec) -> Result<VectorField, LerayError> {
    let raw = random_field(grid, spec)?;
    if spec.amplitude == 0.0 {
        return Ok(raw);
    }
    let g = raw.sub(&leray_project(&raw));
    let norm = sobolev_norm(&g, spec.sobolev_index)?;
    Ok(g.scale(spec.amplitude / norm))
}
