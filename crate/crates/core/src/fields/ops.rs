//! Spectral differential operators, norms, and the dealiased advection
//! product.

use num_complex::Complex64;

use super::spectral::{forward, inverse, Spectrum};
use super::{Field, FieldError, ScalarField, SymTensorField, VectorField};

const I: Complex64 = Complex64::new(0.0, 1.0);

fn derivative_spectrum(s: Spectrum, axis: usize) -> Spectrum {
    s.map_deriv_modes(|k1, k2, c| {
        let k = if axis == 0 { k1 } else { k2 };
        I * k * c
    })
}

/// `∂f/∂xₐ` for `axis ∈ {0, 1}`.
pub fn partial(f: &ScalarField, axis: usize) -> ScalarField {
    inverse(&derivative_spectrum(forward(f), axis))
}

pub fn gradient(f: &ScalarField) -> VectorField {
    let s = forward(f);
    VectorField::from_pair(
        inverse(&derivative_spectrum(s.clone(), 0)),
        inverse(&derivative_spectrum(s, 1)),
    )
}

pub fn divergence(v: &VectorField) -> ScalarField {
    let a = forward(v.component(0));
    let b = forward(v.component(1));
    let mut out = Spectrum::zeros(v.grid());
    let g = v.grid();
    let n = g.n();
    for j in 0..n {
        let k2 = g.deriv_wavenumber(j);
        for i in 0..n {
            let idx = g.index(i, j);
            out.coeffs_mut()[idx] = I * (g.deriv_wavenumber(i) * a.coeffs()[idx] + k2 * b.coeffs()[idx]);
        }
    }
    inverse(&out)
}

/// Scalar curl `∂₁v₂ − ∂₂v₁`.
pub fn curl2(v: &VectorField) -> ScalarField {
    let a = forward(v.component(0));
    let b = forward(v.component(1));
    let mut out = Spectrum::zeros(v.grid());
    let g = v.grid();
    let n = g.n();
    for j in 0..n {
        let k2 = g.deriv_wavenumber(j);
        for i in 0..n {
            let idx = g.index(i, j);
            out.coeffs_mut()[idx] = I * (g.deriv_wavenumber(i) * b.coeffs()[idx] - k2 * a.coeffs()[idx]);
        }
    }
    inverse(&out)
}

/// `Δf`, consistent with `divergence(gradient(f))`.
pub fn laplacian(f: &ScalarField) -> ScalarField {
    inverse(&forward(f).map_deriv_modes(|k1, k2, c| -(k1 * k1 + k2 * k2) * c))
}

pub fn hessian(f: &ScalarField) -> SymTensorField {
    let s = forward(f);
    SymTensorField {
        xx: inverse(&s.clone().map_deriv_modes(|k1, _, c| -(k1 * k1) * c)),
        xy: inverse(&s.clone().map_deriv_modes(|k1, k2, c| -(k1 * k2) * c)),
        yy: inverse(&s.map_deriv_modes(|_, k2, c| -(k2 * k2) * c)),
    }
}

/// Zeroes every mode with `max(|k₁|, |k₂|) > n/3`.
pub fn dealias(f: &ScalarField) -> ScalarField {
    inverse(&truncate(forward(f)))
}

pub fn dealias_vector(v: &VectorField) -> VectorField {
    v.map_components(dealias)
}

pub(crate) fn truncate(s: Spectrum) -> Spectrum {
    let g = s.grid();
    s.map_modes(|k1, k2, c| {
        if g.in_dealiased_band(k1, k2) {
            c
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

/// `‖f‖_{H^s}` with `‖f‖² = (2π)² Σ_k (1+|k|²)^s |f̂_k|²`, summed over
/// components. `s = 0` is the L² norm over `[0, 2π)²`.
///
/// Only modes below `n/3` are free of aliasing in evolved data, so for
/// large `s` the value is dominated by the least accurate coefficients.
pub fn sobolev_norm<F: Field>(f: &F, s: i32) -> Result<f64, FieldError> {
    if s < 0 {
        return Err(FieldError::NegativeSobolevIndex(s));
    }
    let g = f.grid();
    let n = g.n();
    let weights: Vec<f64> = (0..n)
        .map(|i| {
            let k = g.wavenumber(i) as f64;
            k * k
        })
        .collect();
    let mut total = 0.0;
    for comp in f.scalar_components() {
        let spec = forward(comp);
        for j in 0..n {
            for i in 0..n {
                let w = (1.0 + weights[i] + weights[j]).powi(s);
                total += w * spec.coeffs()[g.index(i, j)].norm_sqr();
            }
        }
    }
    Ok((std::f64::consts::TAU * std::f64::consts::TAU * total).sqrt())
}

/// `‖f‖_{L²}` over `[0, 2π)²`.
pub fn l2_norm<F: Field>(f: &F) -> f64 {
    let h = f.grid().h();
    let sum: f64 = f
        .scalar_components()
        .iter()
        .flat_map(|c| c.values().iter())
        .map(|v| v * v)
        .sum();
    (sum * h * h).sqrt()
}

/// Advective derivative `(u·∇)w` with 2/3-rule dealiasing.
pub fn advect(u: &VectorField, w: &VectorField) -> Result<VectorField, FieldError> {
    advect_with(u, w, true)
}

/// `(u·∇)w`, products formed in physical space from spectral derivatives.
/// With `dealias` set, both factors and the product are truncated to the
/// 2/3 band.
pub fn advect_with(u: &VectorField, w: &VectorField, dealias: bool) -> Result<VectorField, FieldError> {
    if u.grid() != w.grid() {
        return Err(FieldError::GridMismatch);
    }
    let filter = |s: Spectrum| if dealias { truncate(s) } else { s };
    let u1 = inverse(&filter(forward(u.component(0))));
    let u2 = inverse(&filter(forward(u.component(1))));
    let advect_component = |wc: &ScalarField| {
        let s = filter(forward(wc));
        let d1 = inverse(&derivative_spectrum(s.clone(), 0));
        let d2 = inverse(&derivative_spectrum(s, 1));
        let values: Vec<f64> = itertools::izip!(u1.values(), u2.values(), d1.values(), d2.values())
            .map(|(a, b, p, q)| a * p + b * q)
            .collect();
        let product = ScalarField::from_values_unchecked(wc.grid(), values);
        if dealias {
            inverse(&truncate(forward(&product)))
        } else {
            product
        }
    };
    Ok(VectorField::from_pair(
        advect_component(w.component(0)),
        advect_component(w.component(1)),
    ))
}
