//! Quadrature of `∫ x₁ᵖ x₂^q g(x) dx` over `[0, 2π)²` for periodic lattice
//! data `g`.
//!
//! A plain lattice sum is only first-order accurate once a non-periodic
//! polynomial factor is present. Instead each axis uses weights
//! `w_p(x_j) = (1/n) Σ_k I_p(k) e^{−ik x_j}` with `I_p(k) = ∫₀^{2π} xᵖ e^{ikx} dx`,
//! which integrates the trigonometric interpolant of `g` against `xᵖ`
//! exactly.

use std::f64::consts::TAU;

use num_complex::Complex64;

use crate::fields::Grid;

/// `I_p(k)` for `p = 0..=max_power`.
fn monomial_fourier_integrals(k: i64, max_power: usize) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(max_power + 1);
    if k == 0 {
        for p in 0..=max_power {
            out.push(Complex64::new(TAU.powi(p as i32 + 1) / (p as f64 + 1.0), 0.0));
        }
        return out;
    }
    let ik = Complex64::new(0.0, k as f64);
    out.push(Complex64::new(0.0, 0.0));
    for p in 1..=max_power {
        let prev = out[p - 1];
        out.push((TAU.powi(p as i32) - p as f64 * prev) / ik);
    }
    out
}

/// One-dimensional weights `w_p(x_j)`, indexed `[p][j]`.
pub fn axis_weights(grid: Grid, max_power: usize) -> Vec<Vec<f64>> {
    let n = grid.n();
    let h = grid.h();
    let mut w = vec![vec![0.0; n]; max_power + 1];
    for ki in 0..n {
        let k = grid.wavenumber(ki);
        let integrals = monomial_fourier_integrals(k, max_power);
        let nyquist = ki == n / 2;
        for (p, ip) in integrals.iter().enumerate() {
            for (j, wj) in w[p].iter_mut().enumerate() {
                let phase = -(k as f64) * j as f64 * h;
                let term = if nyquist {
                    // interpolant uses cos((n/2)x), so only Re I_p contributes
                    ip.re * phase.cos()
                } else {
                    (ip * Complex64::from_polar(1.0, phase)).re
                };
                *wj += term;
            }
        }
    }
    for row in &mut w {
        for v in row.iter_mut() {
            *v /= n as f64;
        }
    }
    w
}

/// `∫ x₁ᵖ x₂^q g dx` given precomputed axis weights.
pub fn weighted_integral(grid: Grid, weights: &[Vec<f64>], p: usize, q: usize, g: &[f64]) -> f64 {
    let n = grid.n();
    let (wp, wq) = (&weights[p], &weights[q]);
    let mut total = 0.0;
    for j in 0..n {
        let row = &g[j * n..(j + 1) * n];
        let s: f64 = row.iter().zip(wp).map(|(a, b)| a * b).sum();
        total += s * wq[j];
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::ScalarField;
    use std::f64::consts::PI;

    #[test]
    fn exact_on_pure_monomials() {
        let g = Grid::new(16).unwrap();
        let w = axis_weights(g, 4);
        let one = vec![1.0; g.len()];
        for p in 0..=4 {
            for q in 0..=(4 - p) {
                let exact = TAU.powi(p as i32 + 1) / (p as f64 + 1.0) * TAU.powi(q as i32 + 1) / (q as f64 + 1.0);
                let got = weighted_integral(g, &w, p, q, &one);
                assert!((got - exact).abs() <= 1e-12 * exact, "p={p} q={q}");
            }
        }
    }

    #[test]
    fn exact_against_trig_factor() {
        // ∫₀^{2π} x sin x dx = −2π, ∫₀^{2π} x² cos 2x dx = π
        let g = Grid::new(32).unwrap();
        let w = axis_weights(g, 2);
        let f = ScalarField::from_fn(g, |x1, _| x1.sin());
        let got = weighted_integral(g, &w, 1, 0, f.values());
        assert!((got - (-2.0 * PI) * TAU).abs() < 1e-11);
        let f = ScalarField::from_fn(g, |_, x2| (2.0 * x2).cos());
        let got = weighted_integral(g, &w, 0, 2, f.values());
        assert!((got - PI * TAU).abs() < 1e-11);
    }
}
