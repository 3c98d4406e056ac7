//! Time integration of the perturbation system around a steady map
//! `y* = Ax + ∇φ`:
//!
//! ```text
//! ∂ₜz + (u·∇)y* + (u·∇)z = 0,   u = 𝙿z,
//! ```
//!
//! and of its linearization `∂ₜu = −𝙿((A + ∇²φ)u)`. Only the periodic
//! perturbation `z` is evolved; the affine part of the map lives in
//! [`BackgroundMap`].

use serde::{Deserialize, Serialize};

use crate::diagnostics::{pushforward_moments, transport_cost, MOMENT_COUNT_DEG3};
use crate::fields::{
    dealias_vector, gradient, hessian, l2_norm, sobolev_norm, FieldError, Grid, ScalarField,
    SymTensorField, VectorField,
};
use crate::leray::{divergence_residual, leray_project, LerayError, SOLENOIDAL_TOLERANCE};

#[derive(Debug, thiserror::Error)]
pub enum DynamicsError {
    #[error("background matrix A is not symmetric")]
    Asymmetric,
    #[error("background is not strictly convex: theta0 = {theta0}")]
    NotConvex { theta0: f64 },
    #[error("invalid simulation config: {key}: {message}")]
    Config { key: &'static str, message: String },
    #[error("linearized operator needs a divergence-free field (max |∇·u| = {residual:e})")]
    NotSolenoidal { residual: f64 },
    #[error("wavevector k = (0, 0) has no solenoidal mode")]
    ZeroWavevector,
    #[error("solution became non-finite at t = {t}")]
    Diverged { t: f64 },
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Leray(#[from] LerayError),
}

/// The steady map `y* = Ax + ∇φ` with its convexity margin
/// `θ₀ = min_x λ_min(A + ∇²φ(x))`.
#[derive(Debug, Clone)]
pub struct BackgroundMap {
    a: [[f64; 2]; 2],
    phi: ScalarField,
    grad_phi: VectorField,
    phi_hessian: SymTensorField,
    theta0: f64,
    has_phi: bool,
}

impl BackgroundMap {
    /// Validates symmetry of `A` and strict convexity; `θ₀` is always
    /// recomputed from the data.
    pub fn new(a: [[f64; 2]; 2], phi: ScalarField) -> Result<Self, DynamicsError> {
        if a[0][1] != a[1][0] || a.iter().flatten().any(|v| !v.is_finite()) {
            return Err(DynamicsError::Asymmetric);
        }
        let phi_hessian = hessian(&phi);
        let theta0 = phi_hessian.add_constant(a).min_eigenvalue();
        if !(theta0 > 0.0) {
            return Err(DynamicsError::NotConvex { theta0 });
        }
        let has_phi = phi.max_abs() > 0.0;
        Ok(Self {
            a,
            grad_phi: gradient(&phi),
            phi,
            phi_hessian,
            theta0,
            has_phi,
        })
    }

    /// `y* = Ax` with no periodic part.
    pub fn affine(grid: Grid, a: [[f64; 2]; 2]) -> Result<Self, DynamicsError> {
        Self::new(a, ScalarField::zeros(grid))
    }

    /// `φ = Σ amp·cos(k·x)` over the given `(k1, k2, amp)` modes.
    pub fn with_cosine_modes(grid: Grid, a: [[f64; 2]; 2], modes: &[(i64, i64, f64)]) -> Result<Self, DynamicsError> {
        let phi = ScalarField::from_fn(grid, |x1, x2| {
            modes
                .iter()
                .map(|&(k1, k2, amp)| amp * (k1 as f64 * x1 + k2 as f64 * x2).cos())
                .sum()
        });
        Self::new(a, phi)
    }

    pub fn grid(&self) -> Grid {
        self.phi.grid()
    }

    pub fn a(&self) -> [[f64; 2]; 2] {
        self.a
    }

    pub fn phi(&self) -> &ScalarField {
        &self.phi
    }

    pub fn grad_phi(&self) -> &VectorField {
        &self.grad_phi
    }

    pub fn theta0(&self) -> f64 {
        self.theta0
    }

    /// `∇y* = A + ∇²φ` at every lattice point.
    pub fn jacobian(&self) -> SymTensorField {
        self.phi_hessian.add_constant(self.a)
    }

    /// `y*(x)` at every lattice point, `x` in fundamental-domain coordinates.
    pub fn map_values(&self) -> VectorField {
        let g = self.grid();
        let a = self.a;
        let affine = VectorField::from_fn(g, |x1, x2| [a[0][0] * x1 + a[0][1] * x2, a[1][0] * x1 + a[1][1] * x2]);
        affine.add(&self.grad_phi)
    }

    /// `(∇y*)·u = Au + (∇²φ)u`, the periodic product dealiased on request.
    fn apply_jacobian(&self, u: &VectorField, dealias: bool) -> VectorField {
        let a = self.a;
        let c1 = u.component(0).zip_map(u.component(1), |p, q| a[0][0] * p + a[0][1] * q);
        let c2 = u.component(0).zip_map(u.component(1), |p, q| a[1][0] * p + a[1][1] * q);
        let linear = VectorField::new(c1, c2).expect("shared grid");
        if !self.has_phi {
            return linear;
        }
        let product = self.phi_hessian.apply(u);
        let product = if dealias { dealias_vector(&product) } else { product };
        linear.add(&product)
    }
}

/// Lattice minimum of `λ_min(A + ∇²φ)`; may be `≤ 0` for arbitrary input.
pub fn convexity_margin(a: [[f64; 2]; 2], phi: &ScalarField) -> f64 {
    hessian(phi).add_constant(a).min_eigenvalue()
}

/// Recomputes `θ₀` from the stored background data.
pub fn theta0_of(bg: &BackgroundMap) -> f64 {
    convexity_margin(bg.a, &bg.phi)
}

/// Which right-hand side drives the evolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RhsMode {
    /// The full perturbation system; the state holds `z`.
    Nonlinear,
    /// The linearized projected system; the state holds `u` itself.
    Linearized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    /// Sobolev index used by the recorded `H^s` norms.
    pub s: i32,
    pub cfl: f64,
    pub dt_max: f64,
    pub t_end: f64,
    pub observer_stride: usize,
    #[serde(default = "default_true")]
    pub dealias: bool,
    #[serde(default)]
    pub seed: u64,
}

fn default_true() -> bool {
    true
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            s: 3,
            cfl: 0.5,
            dt_max: 0.01,
            t_end: 20.0,
            observer_stride: 2,
            dealias: true,
            seed: 1,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        let bad = |key: &'static str, message: String| Err(DynamicsError::Config { key, message });
        if self.s < 3 {
            return bad("s", format!("must be >= 3, got {}", self.s));
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return bad("cfl", format!("must lie in (0, 1], got {}", self.cfl));
        }
        if !(self.dt_max > 0.0) || !self.dt_max.is_finite() {
            return bad("dt_max", format!("must be positive, got {}", self.dt_max));
        }
        if !(self.t_end > 0.0) || !self.t_end.is_finite() {
            return bad("t_end", format!("must be positive, got {}", self.t_end));
        }
        if self.observer_stride == 0 {
            return bad("observer_stride", "must be >= 1".into());
        }
        Ok(())
    }
}

/// Time, perturbation, and its cached projection `u = 𝙿z`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub t: f64,
    z: VectorField,
    u: VectorField,
}

impl SimState {
    pub fn new(t: f64, z: VectorField) -> Self {
        let u = leray_project(&z);
        Self { t, z, u }
    }

    pub fn z(&self) -> &VectorField {
        &self.z
    }

    pub fn u(&self) -> &VectorField {
        &self.u
    }

    pub fn grid(&self) -> Grid {
        self.z.grid()
    }

    pub fn into_z(self) -> VectorField {
        self.z
    }
}

/// `−(u·∇)y* − (u·∇)z` with `(u·∇)y* = (A + ∇²φ)u`.
pub fn rhs_nonlinear(state: &SimState, bg: &BackgroundMap, dealias: bool) -> Result<VectorField, DynamicsError> {
    let u = &state.u;
    let transport = crate::fields::advect_with(u, &state.z, dealias)?;
    let out = bg.apply_jacobian(u, dealias).add(&transport).scale(-1.0);
    if !out.is_finite() {
        return Err(DynamicsError::Diverged { t: state.t });
    }
    Ok(out)
}

/// `−𝙿((A + ∇²φ)u)` for divergence-free `u`.
pub fn rhs_linearized(u: &VectorField, bg: &BackgroundMap) -> Result<VectorField, DynamicsError> {
    rhs_linearized_with(u, bg, true)
}

fn rhs_linearized_with(u: &VectorField, bg: &BackgroundMap, dealias: bool) -> Result<VectorField, DynamicsError> {
    let residual = divergence_residual(u);
    if residual > SOLENOIDAL_TOLERANCE {
        return Err(DynamicsError::NotSolenoidal { residual });
    }
    Ok(leray_project(&bg.apply_jacobian(u, dealias)).scale(-1.0))
}

/// Decay rate `(k⊥·A k⊥)/|k|²` of the solenoidal mode at wavevector `k`
/// under the linearized flow with `φ = 0`.
pub fn linearized_mode_rate(a: [[f64; 2]; 2], k: (i64, i64)) -> Result<f64, DynamicsError> {
    if k == (0, 0) {
        return Err(DynamicsError::ZeroWavevector);
    }
    let (p, q) = (-(k.1 as f64), k.0 as f64);
    let quad = p * (a[0][0] * p + a[0][1] * q) + q * (a[1][0] * p + a[1][1] * q);
    Ok(quad / (p * p + q * q))
}

/// `min(dt_max, cfl·h / max(‖u‖_∞, 1e-12))`.
pub fn cfl_dt(state: &SimState, cfg: &SimConfig) -> f64 {
    let speed = state.u.max_magnitude().max(1e-12);
    cfg.dt_max.min(cfg.cfl * state.grid().h() / speed)
}

fn evaluate(state: &SimState, bg: &BackgroundMap, mode: RhsMode, dealias: bool) -> Result<VectorField, DynamicsError> {
    match mode {
        RhsMode::Nonlinear => rhs_nonlinear(state, bg, dealias),
        RhsMode::Linearized => rhs_linearized_with(&state.z, bg, dealias),
    }
}

/// One classical fourth-order Runge–Kutta step.
pub fn step_rk4(
    state: &SimState,
    dt: f64,
    bg: &BackgroundMap,
    mode: RhsMode,
    dealias: bool,
) -> Result<SimState, DynamicsError> {
    if !(dt > 0.0) {
        return Err(DynamicsError::Config {
            key: "dt",
            message: format!("must be positive, got {dt}"),
        });
    }
    let stage = |z: VectorField, t: f64| match mode {
        RhsMode::Nonlinear => SimState::new(t, z),
        // the linearized state is its own projection
        RhsMode::Linearized => SimState { t, u: z.clone(), z },
    };
    let k1 = evaluate(state, bg, mode, dealias)?;
    let s2 = stage(state.z.axpy(0.5 * dt, &k1), state.t + 0.5 * dt);
    let k2 = evaluate(&s2, bg, mode, dealias)?;
    let s3 = stage(state.z.axpy(0.5 * dt, &k2), state.t + 0.5 * dt);
    let k3 = evaluate(&s3, bg, mode, dealias)?;
    let s4 = stage(state.z.axpy(dt, &k3), state.t + dt);
    let k4 = evaluate(&s4, bg, mode, dealias)?;
    let incr = k1.axpy(2.0, &k2).axpy(2.0, &k3).add(&k4);
    let z = state.z.axpy(dt / 6.0, &incr);
    if !z.is_finite() {
        return Err(DynamicsError::Diverged { t: state.t + dt });
    }
    Ok(stage(z, state.t + dt))
}

/// One diagnostic sample of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub t: f64,
    pub u_l2: f64,
    pub u_hs: f64,
    pub z_hs: f64,
    pub cost: f64,
    /// `m10, m01, m20, m11, m02, m30, m21, m12, m03`.
    pub moments: [f64; MOMENT_COUNT_DEG3],
}

/// Records in strictly increasing time.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub records: Vec<Record>,
}

pub const CSV_HEADER: &str = "t,u_l2,u_hs,z_hs,cost,m10,m01,m20,m11,m02,m30,m21,m12,m03";

impl TimeSeries {
    pub fn push(&mut self, r: Record) {
        debug_assert!(self.records.last().map_or(true, |p| r.t > p.t));
        self.records.push(r);
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn first(&self) -> Option<&Record> {
        self.records.first()
    }

    pub fn last(&self) -> Option<&Record> {
        self.records.last()
    }

    /// CSV text with [`CSV_HEADER`]; floats use shortest round-trip form.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            let mut fields = vec![r.t, r.u_l2, r.u_hs, r.z_hs, r.cost];
            fields.extend_from_slice(&r.moments);
            let line: Vec<String> = fields.iter().map(|v| format!("{v:e}")).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }
}

/// A run that produced non-finite values; holds everything up to the last
/// finite state.
#[derive(Debug, Clone)]
pub struct Blowup {
    pub t: f64,
    pub series: TimeSeries,
    pub last_state: SimState,
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("run diverged at t = {}", .0.t)]
    Diverged(Box<Blowup>),
    #[error(transparent)]
    Setup(#[from] DynamicsError),
}

/// Early-stop threshold on `‖u‖_{L²}`.
pub const STEADY_THRESHOLD: f64 = 1e-12;
/// Steps between CFL refreshes.
pub const CFL_REFRESH: usize = 16;

pub fn observe(state: &SimState, bg: &BackgroundMap, s: i32) -> Result<Record, DynamicsError> {
    let moments = pushforward_moments(&state.z, bg, 3).expect("degree 3 is supported");
    let mut m = [0.0; MOMENT_COUNT_DEG3];
    m.copy_from_slice(&moments);
    Ok(Record {
        t: state.t,
        u_l2: l2_norm(&state.u),
        u_hs: sobolev_norm(&state.u, s)?,
        z_hs: sobolev_norm(&state.z, s)?,
        cost: transport_cost(&state.z, bg),
        moments: m,
    })
}

struct StepPlan {
    t0: f64,
    dt: f64,
    steps: usize,
}

impl StepPlan {
    fn new(t0: f64, t_end: f64, cap: f64) -> Self {
        let remaining = t_end - t0;
        let steps = ((remaining / cap) - 1e-9).ceil().max(1.0) as usize;
        Self {
            t0,
            dt: remaining / steps as f64,
            steps,
        }
    }
}

/// Integrates from `z0` to `cfg.t_end`, or until `‖u‖_{L²}` falls below
/// [`STEADY_THRESHOLD`], recording every `observer_stride` steps and at the
/// final state.
///
/// The step is the CFL bound at start, re-checked every [`CFL_REFRESH`]
/// steps; it only changes when the bound tightens below the current step or
/// loosens by more than half, so record spacing stays uniform in the common
/// case. In linearized mode `z0` is projected first and the state holds `u`.
pub fn run(
    cfg: &SimConfig,
    bg: &BackgroundMap,
    z0: &VectorField,
    mode: RhsMode,
) -> Result<(TimeSeries, SimState), RunError> {
    run_monitored(cfg, bg, z0, mode, |_| {})
}

/// [`run`], calling `monitor` on the initial state and after every step.
pub fn run_monitored(
    cfg: &SimConfig,
    bg: &BackgroundMap,
    z0: &VectorField,
    mode: RhsMode,
    mut monitor: impl FnMut(&SimState),
) -> Result<(TimeSeries, SimState), RunError> {
    cfg.validate()?;
    if z0.grid() != bg.grid() {
        return Err(DynamicsError::Field(FieldError::GridMismatch).into());
    }
    if !z0.is_finite() {
        return Err(DynamicsError::Field(FieldError::NonFinite).into());
    }
    let mut state = match mode {
        RhsMode::Nonlinear => SimState::new(0.0, z0.clone()),
        RhsMode::Linearized => {
            let u = leray_project(z0);
            SimState {
                t: 0.0,
                z: u.clone(),
                u,
            }
        }
    };
    monitor(&state);
    let mut series = TimeSeries::default();
    let mut last = observe(&state, bg, cfg.s)?;
    series.push(last.clone());
    if last.u_l2 < STEADY_THRESHOLD {
        return Ok((series, state));
    }

    let mut plan = StepPlan::new(0.0, cfg.t_end, cfl_dt(&state, cfg));
    let mut k = 0usize;
    let mut step = 0usize;
    loop {
        if step > 0 && step % CFL_REFRESH == 0 {
            let cap = cfl_dt(&state, cfg);
            let grow = plan.dt < cfg.dt_max * (1.0 - 1e-12) && cap > 1.5 * plan.dt;
            if cap < plan.dt * (1.0 - 1e-12) || grow {
                plan = StepPlan::new(state.t, cfg.t_end, cap);
                k = 0;
            }
        }
        let final_step = k + 1 == plan.steps;
        let next_t = if final_step {
            cfg.t_end
        } else {
            plan.t0 + (k + 1) as f64 * plan.dt
        };
        let mut next = match step_rk4(&state, next_t - state.t, bg, mode, cfg.dealias) {
            Ok(s) => s,
            Err(DynamicsError::Diverged { t }) => {
                return Err(RunError::Diverged(Box::new(Blowup {
                    t,
                    series,
                    last_state: state,
                })))
            }
            Err(e) => return Err(e.into()),
        };
        next.t = next_t;
        state = next;
        k += 1;
        step += 1;
        monitor(&state);

        let u_l2 = l2_norm(&state.u);
        let steady = u_l2 < STEADY_THRESHOLD;
        if step % cfg.observer_stride == 0 || final_step || steady {
            last = observe(&state, bg, cfg.s)?;
            series.push(last.clone());
        }
        if final_step || steady {
            break;
        }
    }
    Ok((series, state))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::RandomFieldSpec;

    const DIAG12: [[f64; 2]; 2] = [[1.0, 0.0], [0.0, 2.0]];
    const IDENTITY: [[f64; 2]; 2] = [[1.0, 0.0], [0.0, 1.0]];

    fn grid(n: usize) -> Grid {
        Grid::new(n).unwrap()
    }

    #[test]
    fn theta0_examples() {
        let g = grid(32);
        assert_eq!(theta0_of(&BackgroundMap::affine(g, IDENTITY).unwrap()), 1.0);
        assert_eq!(theta0_of(&BackgroundMap::affine(g, DIAG12).unwrap()), 1.0);
        let bg = BackgroundMap::with_cosine_modes(g, [[2.0, 0.0], [0.0, 2.0]], &[(1, 0, 0.3)]).unwrap();
        assert!((bg.theta0() - 1.7).abs() < 1e-12);
        assert!((theta0_of(&bg) - 1.7).abs() < 1e-12);
    }

    #[test]
    fn background_rejects_bad_input() {
        let g = grid(16);
        assert!(matches!(
            BackgroundMap::affine(g, [[1.0, 0.2], [0.1, 1.0]]),
            Err(DynamicsError::Asymmetric)
        ));
        assert!(matches!(
            BackgroundMap::affine(g, [[1.0, 0.0], [0.0, -0.5]]),
            Err(DynamicsError::NotConvex { .. })
        ));
        let margin = convexity_margin([[1.0, 0.0], [0.0, 1.0]], &ScalarField::from_fn(g, |x1, _| 2.0 * x1.cos()));
        assert!((margin + 1.0).abs() < 1e-12);
    }

    #[test]
    fn rhs_nonlinear_examples() {
        let g = grid(32);
        let bg = BackgroundMap::affine(g, IDENTITY).unwrap();
        let zero = SimState::new(0.0, VectorField::zeros(g));
        assert_eq!(rhs_nonlinear(&zero, &bg, true).unwrap().max_magnitude(), 0.0);

        let f = ScalarField::from_fn(g, |x1, x2| 0.1 * (x1 + x2.sin()).cos());
        let grad = SimState::new(0.0, gradient(&f));
        assert!(rhs_nonlinear(&grad, &bg, true).unwrap().max_magnitude() < 1e-14);

        let mode = SimState::new(0.0, VectorField::from_fn(g, |_, x2| [x2.sin(), 0.0]));
        let r = rhs_nonlinear(&mode, &bg, true).unwrap();
        assert!(r.add(mode.z()).max_magnitude() < 1e-14);
    }

    #[test]
    fn gradients_are_steady_for_curved_backgrounds() {
        let g = grid(32);
        let bg = BackgroundMap::with_cosine_modes(g, DIAG12, &[(1, 1, 0.1), (0, 2, 0.05)]).unwrap();
        for seed in 0..5 {
            let z = crate::leray::random_gradient(g, &RandomFieldSpec::new(seed, 0.1, 3.0)).unwrap();
            let r = rhs_nonlinear(&SimState::new(0.0, z), &bg, true).unwrap();
            assert!(r.max_magnitude() <= 1e-10);
        }
    }

    #[test]
    fn rhs_linearized_examples() {
        let g = grid(32);
        let bg = BackgroundMap::affine(g, IDENTITY).unwrap();
        assert_eq!(rhs_linearized(&VectorField::zeros(g), &bg).unwrap().max_magnitude(), 0.0);
        let u = crate::leray::random_solenoidal(g, &RandomFieldSpec::new(5, 1.0, 3.0)).unwrap();
        assert!(rhs_linearized(&u, &bg).unwrap().add(&u).max_magnitude() < 1e-13);

        let bg = BackgroundMap::affine(g, DIAG12).unwrap();
        let u = VectorField::from_fn(g, |_, x2| [x2.sin(), 0.0]);
        assert!(rhs_linearized(&u, &bg).unwrap().add(&u).max_magnitude() < 1e-14);

        let compressible = VectorField::from_fn(g, |x1, _| [x1.sin(), 0.0]);
        assert!(matches!(
            rhs_linearized(&compressible, &bg),
            Err(DynamicsError::NotSolenoidal { .. })
        ));
    }

    #[test]
    fn mode_rate_examples() {
        assert_eq!(linearized_mode_rate(IDENTITY, (3, -2)).unwrap(), 1.0);
        assert_eq!(linearized_mode_rate(DIAG12, (0, 1)).unwrap(), 1.0);
        assert_eq!(linearized_mode_rate(DIAG12, (1, 0)).unwrap(), 2.0);
        assert_eq!(linearized_mode_rate(DIAG12, (1, 1)).unwrap(), 1.5);
        assert!(matches!(linearized_mode_rate(DIAG12, (0, 0)), Err(DynamicsError::ZeroWavevector)));
    }

    #[test]
    fn cfl_examples() {
        let cfg = SimConfig {
            cfl: 0.5,
            dt_max: 1.0,
            ..SimConfig::default()
        };
        let g = grid(128);
        assert_eq!(cfl_dt(&SimState::new(0.0, VectorField::zeros(g)), &cfg), 1.0);
        let unit = VectorField::from_fn(g, |_, x2| [x2.sin(), 0.0]);
        let dt = cfl_dt(&SimState::new(0.0, unit), &cfg);
        assert!((dt - std::f64::consts::PI / 128.0).abs() < 1e-12);
        let coarse = VectorField::from_fn(grid(64), |_, x2| [x2.sin(), 0.0]);
        let dt64 = cfl_dt(&SimState::new(0.0, coarse), &cfg);
        assert!((dt64 - 2.0 * dt).abs() < 1e-12);
    }

    #[test]
    fn zero_state_is_fixed() {
        let g = grid(16);
        let bg = BackgroundMap::affine(g, IDENTITY).unwrap();
        let s = SimState::new(0.0, VectorField::zeros(g));
        let next = step_rk4(&s, 0.1, &bg, RhsMode::Nonlinear, true).unwrap();
        assert_eq!(next.z().max_magnitude(), 0.0);
        assert!((next.t - 0.1).abs() < 1e-15);
        assert!(step_rk4(&s, 0.0, &bg, RhsMode::Nonlinear, true).is_err());
    }

    #[test]
    fn rk4_single_step_matches_taylor_truncation() {
        let g = grid(16);
        let bg = BackgroundMap::affine(g, IDENTITY).unwrap();
        let u = VectorField::from_fn(g, |_, x2| [x2.sin(), 0.0]);
        for dt in [0.5, 0.1, 0.01] {
            let s = SimState::new(0.0, u.clone());
            let next = step_rk4(&s, dt, &bg, RhsMode::Linearized, true).unwrap();
            let factor = next.z().component(0).at(0, 4) / u.component(0).at(0, 4);
            let taylor = 1.0 - dt + dt * dt / 2.0 - dt.powi(3) / 6.0 + dt.powi(4) / 24.0;
            assert!((factor - taylor).abs() < 1e-14);
            assert!((factor - (-dt).exp()).abs() <= dt.powi(5) / 60.0);
        }
    }

    #[test]
    fn rk4_local_error_is_fifth_order() {
        // Manufactured solution of the linearized system with A = diag(1,2):
        // u(t) = e^{−t}(sin x₂, 0) + e^{−2t}(0, sin x₁).
        let g = grid(16);
        let bg = BackgroundMap::affine(g, DIAG12).unwrap();
        let exact = |t: f64| VectorField::from_fn(g, |x1, x2| [(-t).exp() * x2.sin(), (-2.0 * t).exp() * x1.sin()]);
        let err = |dt: f64| {
            let next = step_rk4(&SimState::new(0.0, exact(0.0)), dt, &bg, RhsMode::Linearized, true).unwrap();
            next.z().sub(&exact(dt)).max_magnitude()
        };
        let (e1, e2) = (err(0.2), err(0.1));
        assert!(e1 / e2 >= 16.0 * 0.9, "ratio {}", e1 / e2);
    }

    #[test]
    fn rk4_global_error_scales_as_dt4() {
        let g = grid(16);
        let a = [[4.0, 0.0], [0.0, 4.0]];
        let bg = BackgroundMap::affine(g, a).unwrap();
        let u0 = VectorField::from_fn(g, |_, x2| [x2.sin(), 0.0]);
        let err = |dt: f64| {
            let steps = (1.0 / dt).round() as usize;
            let mut s = SimState::new(0.0, u0.clone());
            for _ in 0..steps {
                s = step_rk4(&s, dt, &bg, RhsMode::Linearized, true).unwrap();
            }
            s.z().sub(&u0.scale((-4.0f64).exp())).max_magnitude()
        };
        let errs: Vec<f64> = [1e-2, 5e-3, 2.5e-3].iter().map(|&dt| err(dt)).collect();
        for w in errs.windows(2) {
            let r = w[0] / w[1];
            assert!((8.0..=32.0).contains(&r), "ratio {r} errs {errs:?}");
        }
    }

    #[test]
    fn run_from_zero_is_flat() {
        let g = grid(16);
        let bg = BackgroundMap::affine(g, IDENTITY).unwrap();
        let (series, last) = run(&SimConfig::default(), &bg, &VectorField::zeros(g), RhsMode::Nonlinear).unwrap();
        assert_eq!(series.len(), 1);
        assert_eq!(last.z().max_magnitude(), 0.0);
    }

    #[test]
    fn run_from_gradient_stays_put() {
        let g = grid(32);
        let bg = BackgroundMap::affine(g, IDENTITY).unwrap();
        let z0 = crate::leray::random_gradient(g, &RandomFieldSpec::new(11, 0.01, 3.0)).unwrap();
        let (series, last) = run(&SimConfig::default(), &bg, &z0, RhsMode::Nonlinear).unwrap();
        assert!(series.records.iter().all(|r| r.u_l2 <= 1e-11));
        assert!(last.z().sub(&z0).max_magnitude() < 1e-12);
    }

    #[test]
    fn linearized_run_decays_at_mode_rate() {
        let g = grid(32);
        let bg = BackgroundMap::affine(g, DIAG12).unwrap();
        let z0 = VectorField::from_fn(g, |_, x2| [x2.sin(), 0.0]);
        let cfg = SimConfig {
            t_end: 3.0,
            ..SimConfig::default()
        };
        let (series, _) = run(&cfg, &bg, &z0, RhsMode::Linearized).unwrap();
        let fit = crate::diagnostics::fit_decay_rate(&series, crate::diagnostics::Observable::UL2, (1.0, 3.0)).unwrap();
        assert!((fit.rate - 1.0).abs() < 0.01);
        assert!((series.last().unwrap().t - 3.0).abs() < 1e-12);
    }

    #[test]
    fn run_is_deterministic() {
        let g = grid(32);
        let bg = BackgroundMap::with_cosine_modes(g, IDENTITY, &[(1, 0, 0.05)]).unwrap();
        let z0 = crate::fields::random_field(g, &RandomFieldSpec::new(3, 0.05, 3.0)).unwrap();
        let cfg = SimConfig {
            t_end: 0.5,
            ..SimConfig::default()
        };
        let a = run(&cfg, &bg, &z0, RhsMode::Nonlinear).unwrap();
        let b = run(&cfg, &bg, &z0, RhsMode::Nonlinear).unwrap();
        assert_eq!(a.0.to_csv(), b.0.to_csv());
        assert_eq!(a.1, b.1);
    }

    #[test]
    fn invalid_config_is_rejected() {
        let bad = [
            SimConfig { s: 2, ..SimConfig::default() },
            SimConfig { cfl: 0.0, ..SimConfig::default() },
            SimConfig { cfl: 1.5, ..SimConfig::default() },
            SimConfig { dt_max: -1.0, ..SimConfig::default() },
            SimConfig { observer_stride: 0, ..SimConfig::default() },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err());
        }
    }
}
