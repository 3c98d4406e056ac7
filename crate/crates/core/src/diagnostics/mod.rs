//! Measurements along and after a run: transport cost and its balance law,
//! pushforward moments, decay-rate fits, structure of the limit map, and the
//! commutator ratio.

pub mod quadrature;

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::dynamics::{BackgroundMap, TimeSeries};
use crate::fields::{curl2, hessian, l2_norm, sobolev_norm, FieldError, ScalarField, VectorField};
use crate::leray::{commutator_advection, helmholtz_decompose, LerayError};
use crate::oracle::OracleReport;

/// Number of moments with `1 ≤ a+b ≤ 3`.
pub const MOMENT_COUNT_DEG3: usize = 9;
pub const MAX_MOMENT_DEGREE: usize = 4;

#[derive(Debug, thiserror::Error)]
pub enum DiagnosticsError {
    #[error("need at least {needed} records, got {got}")]
    TooFewRecords { needed: usize, got: usize },
    #[error("records are not uniformly spaced near t = {t}")]
    NonUniformSpacing { t: f64 },
    #[error("no records in window [{lo}, {hi}]")]
    EmptyWindow { lo: f64, hi: f64 },
    #[error("non-positive value {value} at t = {t} in fit window")]
    NonPositive { t: f64, value: f64 },
    #[error("moment degree {0} exceeds the supported maximum of 4")]
    DegreeTooHigh(usize),
    #[error("ratio undefined: input norm {norm:e} is below 1e-12")]
    UndefinedRatio { norm: f64 },
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Leray(#[from] LerayError),
}

/// The periodic part `∇φ + z` of `y − Ax`.
fn periodic_part(z: &VectorField, bg: &BackgroundMap) -> VectorField {
    bg.grad_phi().add(z)
}

/// `½∫|y − x|² dx` over `[0, 2π)²` for `y = Ax + ∇φ + z`.
///
/// With `B = A − I`, the purely affine term `½∫|Bx|²` is integrated
/// analytically, the cross term `∫Bx·w` with the polynomial-weight
/// quadrature, and `½∫|w|²` by the lattice sum (exact for band-limited
/// data). The cross term depends on using `[0, 2π)²` as the fundamental
/// domain.
pub fn transport_cost(z: &VectorField, bg: &BackgroundMap) -> f64 {
    let a = bg.a();
    let b = [[a[0][0] - 1.0, a[0][1]], [a[1][0], a[1][1] - 1.0]];
    let w = periodic_part(z, bg);
    let grid = z.grid();

    // ∫x_d x_e over the square
    let second = |d: usize, e: usize| {
        if d == e {
            TAU.powi(4) / 3.0
        } else {
            4.0 * PI.powi(4)
        }
    };
    let mut affine = 0.0;
    for d in 0..2 {
        for e in 0..2 {
            let btb = b[0][d] * b[0][e] + b[1][d] * b[1][e];
            affine += btb * second(d, e);
        }
    }

    let mut cross = 0.0;
    if b.iter().flatten().any(|v| *v != 0.0) {
        let weights = quadrature::axis_weights(grid, 1);
        for c in 0..2 {
            let wc = w.component(c).values();
            cross += b[c][0] * quadrature::weighted_integral(grid, &weights, 1, 0, wc);
            cross += b[c][1] * quadrature::weighted_integral(grid, &weights, 0, 1, wc);
        }
    }

    let h = grid.h();
    let ww: f64 = w.components().iter().flat_map(|c| c.values()).map(|v| v * v).sum::<f64>() * h * h;
    0.5 * (affine + 2.0 * cross + ww)
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Exponent pairs `(a, b)` with `1 ≤ a+b ≤ max_degree`, by degree and then
/// descending `a`: `(1,0), (0,1), (2,0), (1,1), (0,2), …`.
pub fn moment_exponents(max_degree: usize) -> Vec<(usize, usize)> {
    (1..=max_degree)
        .flat_map(|d| (0..=d).rev().map(move |a| (a, d - a)))
        .collect()
}

/// Moments `∫ y₁ᵃ y₂ᵇ dx` of `y = Ax + ∇φ + z` for `1 ≤ a+b ≤ max_degree`,
/// in [`moment_exponents`] order.
///
/// Expanding `y = Ax + w` binomially reduces every moment to integrals
/// `∫ x₁ᵖ x₂^q w₁^α w₂^β`, which the polynomial-weight quadrature evaluates to
/// spectral accuracy.
pub fn pushforward_moments(z: &VectorField, bg: &BackgroundMap, max_degree: usize) -> Result<Vec<f64>, DiagnosticsError> {
    if max_degree > MAX_MOMENT_DEGREE {
        return Err(DiagnosticsError::DegreeTooHigh(max_degree));
    }
    let grid = z.grid();
    let d = max_degree;
    let w = periodic_part(z, bg);
    let weights = quadrature::axis_weights(grid, d);
    let (w1, w2) = (w.component(0).values(), w.component(1).values());

    // J[p][q][α][β] = ∫ x₁ᵖ x₂^q w₁^α w₂^β, for p+q+α+β ≤ d
    let dim = d + 1;
    let at = |p: usize, q: usize, al: usize, be: usize| ((p * dim + q) * dim + al) * dim + be;
    let mut j = vec![0.0; dim.pow(4)];
    for al in 0..=d {
        for be in 0..=(d - al) {
            let g: Vec<f64> = w1.iter().zip(w2).map(|(x, y)| x.powi(al as i32) * y.powi(be as i32)).collect();
            for p in 0..=(d - al - be) {
                for q in 0..=(d - al - be - p) {
                    j[at(p, q, al, be)] = quadrature::weighted_integral(grid, &weights, p, q, &g);
                }
            }
        }
    }

    let a = bg.a();
    let moment = |ea: usize, eb: usize| {
        let mut total = 0.0;
        for r in 0..=ea {
            for t in 0..=r {
                let c1 = binomial(ea, r) * binomial(r, t) * a[0][0].powi(t as i32) * a[0][1].powi((r - t) as i32);
                if c1 == 0.0 {
                    continue;
                }
                for r2 in 0..=eb {
                    for t2 in 0..=r2 {
                        let c2 =
                            binomial(eb, r2) * binomial(r2, t2) * a[1][0].powi(t2 as i32) * a[1][1].powi((r2 - t2) as i32);
                        if c2 == 0.0 {
                            continue;
                        }
                        total += c1 * c2 * j[at(t + t2, (r - t) + (r2 - t2), ea - r, eb - r2)];
                    }
                }
            }
        }
        total
    };
    Ok(moment_exponents(d).into_iter().map(|(ea, eb)| moment(ea, eb)).collect())
}

/// Largest relative change of any recorded moment from its initial value.
pub fn moment_drift_max(series: &TimeSeries) -> f64 {
    let Some(first) = series.first() else { return 0.0 };
    series
        .records
        .iter()
        .flat_map(|r| {
            r.moments
                .iter()
                .zip(&first.moments)
                .map(|(m, m0)| (m - m0).abs() / m0.abs().max(1e-12))
        })
        .fold(0.0, f64::max)
}

/// `max |d(cost)/dt + ‖u‖²_{L²}| / max(‖u(0)‖²_{L²}, 1e-14)` over interior
/// records, with fourth-order central differences.
///
/// Records must be uniformly spaced; a single trailing record at a shorter
/// interval (a run that stopped between strides) is ignored.
pub fn balance_residual(series: &TimeSeries) -> Result<f64, DiagnosticsError> {
    let recs = &series.records;
    if recs.len() < 5 {
        return Err(DiagnosticsError::TooFewRecords {
            needed: 5,
            got: recs.len(),
        });
    }
    let dt = recs[1].t - recs[0].t;
    let uniform = |i: usize| ((recs[i].t - recs[i - 1].t) - dt).abs() <= 1e-6 * dt;
    let mut len = recs.len();
    if !uniform(len - 1) {
        len -= 1;
    }
    if let Some(i) = (1..len).find(|&i| !uniform(i)) {
        return Err(DiagnosticsError::NonUniformSpacing { t: recs[i].t });
    }
    if len < 5 {
        return Err(DiagnosticsError::TooFewRecords { needed: 5, got: len });
    }
    let norm = (recs[0].u_l2 * recs[0].u_l2).max(1e-14);
    let mut worst: f64 = 0.0;
    for i in 2..len - 2 {
        let c = |o: isize| recs[(i as isize + o) as usize].cost;
        let deriv = (-c(2) + 8.0 * c(1) - 8.0 * c(-1) + c(-2)) / (12.0 * dt);
        worst = worst.max((deriv + recs[i].u_l2 * recs[i].u_l2).abs());
    }
    Ok(worst / norm)
}

/// Which recorded norm to fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    UL2,
    UHs,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    /// Negated least-squares slope of `log(value)` against `t`.
    pub rate: f64,
    pub r2: f64,
    pub samples: usize,
}

/// Values below this are treated as roundoff and left out of fits.
pub const FIT_FLOOR: f64 = 1e-12;

pub fn fit_decay_rate(series: &TimeSeries, field: Observable, window: (f64, f64)) -> Result<DecayFit, DiagnosticsError> {
    let (lo, hi) = window;
    let in_window: Vec<(f64, f64)> = series
        .records
        .iter()
        .filter(|r| r.t >= lo && r.t <= hi)
        .map(|r| {
            (
                r.t,
                match field {
                    Observable::UL2 => r.u_l2,
                    Observable::UHs => r.u_hs,
                },
            )
        })
        .collect();
    if in_window.is_empty() {
        return Err(DiagnosticsError::EmptyWindow { lo, hi });
    }
    if let Some(&(t, value)) = in_window.iter().find(|(_, v)| !(*v > 0.0)) {
        return Err(DiagnosticsError::NonPositive { t, value });
    }
    let pts: Vec<(f64, f64)> = in_window
        .into_iter()
        .filter(|(_, v)| *v > FIT_FLOOR)
        .map(|(t, v)| (t, v.ln()))
        .collect();
    if pts.len() < 10 {
        return Err(DiagnosticsError::TooFewRecords {
            needed: 10,
            got: pts.len(),
        });
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let stt: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let sty: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let slope = sty / stt;
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let sres: f64 = pts.iter().map(|p| (p.1 - my - slope * (p.0 - mt)).powi(2)).sum();
    let r2 = if syy > 0.0 { 1.0 - sres / syy } else { 1.0 };
    Ok(DecayFit {
        rate: -slope,
        r2,
        samples: pts.len(),
    })
}

/// Final half of the run, skipping the transient `t < 1`.
pub fn trailing_window(series: &TimeSeries) -> (f64, f64) {
    let t_last = series.last().map_or(0.0, |r| r.t);
    ((0.5 * t_last).max(1.0), t_last)
}

/// Potential of the limit map and how far `z_final` is from a gradient.
#[derive(Debug, Clone)]
pub struct RecoveredPotential {
    /// Periodic part of `p_∞ − ½xᵀAx`, zero mean.
    pub phi_inf: ScalarField,
    pub curl_resid: f64,
    pub solenoidal_resid: f64,
}

/// Helmholtz-splits `z_final = u_r + ∇q` and returns `φ + q` with the
/// residuals `‖curl z_final‖_{L²}` and `‖u_r‖_{L²}`.
pub fn recover_potential(z_final: &VectorField, bg: &BackgroundMap) -> RecoveredPotential {
    let (u_r, q) = helmholtz_decompose(z_final);
    let phi = bg.phi();
    let phi_inf = phi.add(&q).map(|v| v - phi.mean());
    RecoveredPotential {
        phi_inf,
        curl_resid: l2_norm(&curl2(z_final)),
        solenoidal_resid: l2_norm(&u_r),
    }
}

/// Lattice minimum of `λ_min(A + ∇²φ_∞)`.
pub fn hessian_min_eig(phi_inf: &ScalarField, bg: &BackgroundMap) -> f64 {
    hessian(phi_inf).add_constant(bg.a()).min_eigenvalue()
}

/// `‖[𝙿, u·∇]z‖_{H^s} / (‖u‖_{H^s} ‖z‖_{H^s})`.
pub fn commutator_ratio(u: &VectorField, z: &VectorField, s: i32) -> Result<f64, DiagnosticsError> {
    let nu = sobolev_norm(u, s)?;
    let nz = sobolev_norm(z, s)?;
    for norm in [nu, nz] {
        if norm <= 1e-12 {
            return Err(DiagnosticsError::UndefinedRatio { norm });
        }
    }
    let c = commutator_advection(u, z)?;
    Ok(sobolev_norm(&c, s)? / (nu * nz))
}

/// Machine-readable outcome of one experiment.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsSummary {
    pub theta0: f64,
    pub fitted_rate_l2: Option<f64>,
    pub fitted_rate_hs: Option<f64>,
    pub r2: Option<f64>,
    pub balance_residual: Option<f64>,
    pub moment_drift_max: f64,
    pub curl_resid: f64,
    pub solenoidal_resid: f64,
    pub hessian_min_eig: f64,
    pub commutator_ratio_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleReport>,
}

/// Builds the summary from a finished run; fits and the balance residual are
/// `None` when the series is too short for them.
pub fn summarize(series: &TimeSeries, z_final: &VectorField, bg: &BackgroundMap) -> DiagnosticsSummary {
    let window = trailing_window(series);
    let l2 = fit_decay_rate(series, Observable::UL2, window).ok();
    let hs = fit_decay_rate(series, Observable::UHs, window).ok();
    let rec = recover_potential(z_final, bg);
    DiagnosticsSummary {
        theta0: bg.theta0(),
        fitted_rate_l2: l2.map(|f| f.rate),
        fitted_rate_hs: hs.map(|f| f.rate),
        r2: l2.map(|f| f.r2),
        balance_residual: balance_residual(series).ok(),
        moment_drift_max: moment_drift_max(series),
        curl_resid: rec.curl_resid,
        solenoidal_resid: rec.solenoidal_resid,
        hessian_min_eig: hessian_min_eig(&rec.phi_inf, bg),
        commutator_ratio_max: None,
        oracle: None,
    }
}
