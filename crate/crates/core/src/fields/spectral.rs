//! Two-dimensional discrete Fourier transforms on a [`Grid`].
//!
//! The forward transform carries the `1/n²` factor, so `f̂_k` are the
//! coefficients of the trigonometric interpolant and Parseval reads
//! `∫|f|² dx = (2π)² Σ |f̂_k|²`.

use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::{FieldError, Grid, ScalarField, VectorField};

type PlanPair = (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>);

thread_local! {
    // Plans are per thread so concurrent callers never share scratch state.
    static PLANS: RefCell<HashMap<usize, PlanPair>> = RefCell::new(HashMap::new());
}

fn plans(n: usize) -> PlanPair {
    PLANS.with(|cell| {
        let mut map = cell.borrow_mut();
        map.entry(n)
            .or_insert_with(|| {
                let mut planner = FftPlanner::new();
                (planner.plan_fft_forward(n), planner.plan_fft_inverse(n))
            })
            .clone()
    })
}

fn transpose(n: usize, data: &mut [Complex64]) {
    for j in 0..n {
        for i in (j + 1)..n {
            data.swap(j * n + i, i * n + j);
        }
    }
}

fn fft2(n: usize, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
    plan.process(data);
    transpose(n, data);
    plan.process(data);
    transpose(n, data);
}

/// Fourier coefficients of a real lattice field, laid out like the
/// physical data: entry `j·n + i` holds wavevector
/// `(wavenumber(i), wavenumber(j))`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    grid: Grid,
    coeffs: Vec<Complex64>,
}

impl Spectrum {
    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            coeffs: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    /// Coefficient at integer wavevector `(k1, k2)`, zero if unresolved.
    pub fn at(&self, k1: i64, k2: i64) -> Complex64 {
        match (self.grid.spectral_index(k1), self.grid.spectral_index(k2)) {
            (Some(i), Some(j)) => self.coeffs[self.grid.index(i, j)],
            _ => Complex64::new(0.0, 0.0),
        }
    }

    /// Apply `f(k1, k2, coefficient)` to every mode, with integer wavenumbers.
    pub fn map_modes(mut self, f: impl Fn(i64, i64, Complex64) -> Complex64) -> Self {
        let g = self.grid;
        let n = g.n();
        for j in 0..n {
            let k2 = g.wavenumber(j);
            for i in 0..n {
                let idx = g.index(i, j);
                self.coeffs[idx] = f(g.wavenumber(i), k2, self.coeffs[idx]);
            }
        }
        self
    }

    /// Like [`Spectrum::map_modes`] but with derivative wavenumbers
    /// (Nyquist mapped to zero).
    pub fn map_deriv_modes(mut self, f: impl Fn(f64, f64, Complex64) -> Complex64) -> Self {
        let g = self.grid;
        let n = g.n();
        for j in 0..n {
            let k2 = g.deriv_wavenumber(j);
            for i in 0..n {
                let idx = g.index(i, j);
                self.coeffs[idx] = f(g.deriv_wavenumber(i), k2, self.coeffs[idx]);
            }
        }
        self
    }

    /// Largest violation of `f̂_{−k} = conj(f̂_k)` relative to the largest
    /// coefficient magnitude.
    pub fn conjugate_symmetry_defect(&self) -> f64 {
        let g = self.grid;
        let n = g.n();
        let scale = self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst: f64 = 0.0;
        for j in 0..n {
            for i in 0..n {
                let mirror = g.index((n - i) % n, (n - j) % n);
                let d = (self.coeffs[g.index(i, j)] - self.coeffs[mirror].conj()).norm();
                worst = worst.max(d);
            }
        }
        worst / scale
    }
}

/// Forward transform with `1/n²` normalization.
pub fn forward(f: &ScalarField) -> Spectrum {
    let grid = f.grid();
    let n = grid.n();
    let mut data: Vec<Complex64> = f.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let (fwd, _) = plans(n);
    fft2(n, &mut data, &fwd);
    let scale = 1.0 / grid.len() as f64;
    for c in &mut data {
        *c *= scale;
    }
    Spectrum { grid, coeffs: data }
}

/// Forward transforms of both components of a vector field.
pub fn forward_pair(v: &VectorField) -> (Spectrum, Spectrum) {
    (forward(v.component(0)), forward(v.component(1)))
}

/// Inverse transform; the imaginary residue of a conjugate-symmetric
/// spectrum is discarded.
pub fn inverse(s: &Spectrum) -> ScalarField {
    let grid = s.grid;
    let n = grid.n();
    let mut data = s.coeffs.clone();
    let (_, inv) = plans(n);
    fft2(n, &mut data, &inv);
    let values = data.into_iter().map(|c| c.re).collect();
    ScalarField::from_values_unchecked(grid, values)
}

/// Inverse transform that rejects non-finite output.
pub fn try_inverse(s: &Spectrum) -> Result<ScalarField, FieldError> {
    let f = inverse(s);
    if f.values().iter().all(|v| v.is_finite()) {
        Ok(f)
    } else {
        Err(FieldError::NonFinite)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_mode_coefficients() {
        let g = Grid::new(16).unwrap();
        let f = ScalarField::from_fn(g, |x1, x2| (x1 + 2.0 * x2).cos());
        let s = forward(&f);
        assert!((s.at(1, 2).re - 0.5).abs() < 1e-14);
        assert!((s.at(-1, -2).re - 0.5).abs() < 1e-14);
        let total: f64 = s.coeffs().iter().map(|c| c.norm()).sum();
        assert!((total - 1.0).abs() < 1e-13);
        assert!(s.conjugate_symmetry_defect() < 1e-12);
    }

    #[test]
    fn roundtrip_is_identity() {
        let g = Grid::new(32).unwrap();
        let f = ScalarField::from_fn(g, |x1, x2| (x1.sin() * 3.0 + x2).exp().sin());
        let back = inverse(&forward(&f));
        for (a, b) in f.values().iter().zip(back.values()) {
            assert!((a - b).abs() < 1e-13);
        }
    }
}
