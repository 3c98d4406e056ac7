use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ops::sobolev_norm;
use super::spectral::{inverse, Spectrum};
use super::{FieldError, Grid, VectorField};

/// Parameters of a seeded band-limited random vector field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomFieldSpec {
    pub seed: u64,
    /// Target `H^s` norm of the result.
    pub amplitude: f64,
    /// Coefficient magnitudes fall off like `|k|^(−decay_exponent)`.
    pub decay_exponent: f64,
    /// The `s` in the `H^s` normalization.
    #[serde(default = "default_sobolev_index")]
    pub sobolev_index: i32,
    /// Optional cap on `max(|k₁|, |k₂|)` in addition to the 2/3 band.
    #[serde(default)]
    pub kmax: Option<i64>,
}

fn default_sobolev_index() -> i32 {
    3
}

impl RandomFieldSpec {
    pub fn new(seed: u64, amplitude: f64, decay_exponent: f64) -> Self {
        Self {
            seed,
            amplitude,
            decay_exponent,
            sobolev_index: 3,
            kmax: None,
        }
    }
}

fn mode_seed(seed: u64, component: usize, k1: i64, k2: i64) -> u64 {
    // splitmix64 finalizer over the packed mode identity
    let mut x = seed
        ^ (component as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (k1 as u64).wrapping_mul(0xBF58_476D_1CE4_E5B9)
        ^ (k2 as u64).wrapping_mul(0x94D0_49BB_1331_11EB);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seeded random vector field `Σ |k|^(−p) cos(k·x + θ_k)` per component,
/// zero mean, restricted to the dealiased band, rescaled to the requested
/// `H^s` norm.
///
/// Each mode's phase is drawn from its own stream keyed by
/// `(seed, component, k)`, so the same seed on a finer grid reproduces the
/// coarse field's modes and only adds the newly resolved ones.
pub fn random_field(grid: Grid, spec: &RandomFieldSpec) -> Result<VectorField, FieldError> {
    if !(spec.amplitude >= 0.0) || !spec.amplitude.is_finite() {
        return Err(FieldError::InvalidParameter(format!(
            "amplitude must be a finite value >= 0, got {}",
            spec.amplitude
        )));
    }
    if !(spec.decay_exponent >= 3.0) {
        return Err(FieldError::InvalidParameter(format!(
            "decay_exponent must be >= 3, got {}",
            spec.decay_exponent
        )));
    }
    if spec.amplitude == 0.0 {
        return Ok(VectorField::zeros(grid));
    }
    let n = grid.n() as i64;
    let band = spec.kmax.map_or(n / 3, |k| k.min(n / 3));
    let mut comps = Vec::with_capacity(2);
    for c in 0..2 {
        let mut s = Spectrum::zeros(grid);
        for k2 in 0..=band {
            for k1 in -band..=band {
                if k2 == 0 && k1 <= 0 {
                    continue;
                }
                let mut rng = ChaCha8Rng::seed_from_u64(mode_seed(spec.seed, c, k1, k2));
                let theta: f64 = rng.gen::<f64>() * std::f64::consts::TAU;
                let mag = 0.5 * ((k1 * k1 + k2 * k2) as f64).powf(-0.5 * spec.decay_exponent);
                let coeff = Complex64::from_polar(mag, theta);
                let g = &grid;
                let idx = g.index(g.spectral_index(k1).unwrap(), g.spectral_index(k2).unwrap());
                let mirror = g.index(g.spectral_index(-k1).unwrap(), g.spectral_index(-k2).unwrap());
                s.coeffs_mut()[idx] = coeff;
                s.coeffs_mut()[mirror] = coeff.conj();
            }
        }
        comps.push(inverse(&s));
    }
    let c2 = comps.pop().unwrap();
    let c1 = comps.pop().unwrap();
    let v = VectorField::new(c1, c2)?;
    let norm = sobolev_norm(&v, spec.sobolev_index)?;
    Ok(v.scale(spec.amplitude / norm))
}
