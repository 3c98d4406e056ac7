use std::f64::consts::TAU;

use super::FieldError;

/// Uniform periodic lattice on `[0, 2π)²`.
///
/// Lattice index `i` along an axis maps to the coordinate `i·h` and to the
/// integer wavenumber `i` for `i ≤ n/2`, `i − n` otherwise, so each axis
/// carries the frequencies `{−n/2+1, …, n/2}`. The single Nyquist frequency
/// `n/2` is kept in the spectrum but has no derivative: every differential
/// operator treats it as a constant along that axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Grid {
    n: usize,
}

impl Grid {
    /// Spatial dimension. Everything in this crate assumes `d = 2`.
    pub const DIM: usize = 2;

    pub fn new(n: usize) -> Result<Self, FieldError> {
        if n < 8 || !n.is_power_of_two() {
            return Err(FieldError::Sizing { n });
        }
        Ok(Self { n })
    }

    /// Points per axis.
    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    /// Lattice spacing `2π/n`.
    #[inline]
    pub fn h(&self) -> f64 {
        TAU / self.n as f64
    }

    /// Total number of lattice points, `n²`.
    #[inline]
    pub fn len(&self) -> usize {
        self.n * self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Flat index of lattice point `(i, j)`; `x₁` varies fastest.
    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.n + i
    }

    /// Coordinate of lattice index `i` along either axis.
    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        i as f64 * self.h()
    }

    /// Physical coordinates `(x₁, x₂)` of the flat index `idx`.
    #[inline]
    pub fn point(&self, idx: usize) -> (f64, f64) {
        (self.coord(idx % self.n), self.coord(idx / self.n))
    }

    /// Integer wavenumber stored at spectral index `i`.
    #[inline]
    pub fn wavenumber(&self, i: usize) -> i64 {
        let n = self.n as i64;
        let i = i as i64;
        if i <= n / 2 {
            i
        } else {
            i - n
        }
    }

    /// Wavenumber used by differentiation: identical to [`Grid::wavenumber`]
    /// except that the Nyquist frequency maps to zero.
    #[inline]
    pub fn deriv_wavenumber(&self, i: usize) -> f64 {
        if i == self.n / 2 {
            0.0
        } else {
            self.wavenumber(i) as f64
        }
    }

    /// Spectral index holding wavenumber `k`, if the grid resolves it.
    pub fn spectral_index(&self, k: i64) -> Option<usize> {
        let n = self.n as i64;
        if k > n / 2 || k <= -n / 2 {
            return None;
        }
        Some(if k >= 0 { k as usize } else { (k + n) as usize })
    }

    /// Whether the wavevector survives the 2/3-rule truncation,
    /// i.e. `max(|k₁|, |k₂|) ≤ n/3`.
    #[inline]
    pub fn in_dealiased_band(&self, k1: i64, k2: i64) -> bool {
        let n = self.n as i64;
        3 * k1.abs() <= n && 3 * k2.abs() <= n
    }

    /// All integer wavenumbers along one axis, ascending.
    pub fn wavenumbers(&self) -> Vec<i64> {
        let mut ks: Vec<i64> = (0..self.n).map(|i| self.wavenumber(i)).collect();
        ks.sort_unstable();
        ks
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn rejects_bad_sizes() {
        for n in [0, 1, 4, 6, 12, 100] {
            assert!(matches!(Grid::new(n), Err(FieldError::Sizing { .. })), "n = {n}");
        }
    }

    #[test]
    fn n8_spacing_and_wavenumbers() {
        let g = Grid::new(8).unwrap();
        assert_eq!(g.h(), PI / 4.0);
        assert_eq!(g.wavenumbers(), vec![-3, -2, -1, 0, 1, 2, 3, 4]);
        assert_eq!(g.deriv_wavenumber(4), 0.0);
        assert_eq!(g.deriv_wavenumber(5), -3.0);
    }

    #[test]
    fn n128_spacing() {
        let g = Grid::new(128).unwrap();
        assert_eq!(g.h(), 2.0 * PI / 128.0);
        assert!((g.h() * g.n() as f64 - 2.0 * PI).abs() < 1e-15);
    }

    #[test]
    fn spectral_index_inverts_wavenumber() {
        let g = Grid::new(16).unwrap();
        for i in 0..16 {
            assert_eq!(g.spectral_index(g.wavenumber(i)), Some(i));
        }
        assert_eq!(g.spectral_index(9), None);
        assert_eq!(g.spectral_index(-8), None);
    }

    #[test]
    fn dealias_band_edges() {
        let g = Grid::new(16).unwrap();
        assert!(g.in_dealiased_band(5, -5));
        assert!(!g.in_dealiased_band(6, 0));
        assert!(!g.in_dealiased_band(0, 7));
    }
}
