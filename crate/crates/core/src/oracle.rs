//! Discrete optimal-rearrangement oracle.
//!
//! Lattice points `xᵢ` (uniform weights) are matched to sampled map values
//! `vⱼ = y₀(xⱼ)` by the permutation minimizing `Σ|xᵢ − v_π(i)|²`; the matched
//! values `v_π(i)` form the discrete optimal rearrangement. Distances are
//! Euclidean in ℝ²: the map values are not wrapped onto the torus.

use std::fmt::Write as _;

use itertools::Itertools;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::BackgroundMap;
use crate::fields::VectorField;

#[derive(Debug, thiserror::Error)]
pub enum OracleError {
    #[error("stride {stride} does not divide grid size {n}")]
    Stride { stride: usize, n: usize },
    #[error("{what} has {got} samples, limit is {limit}")]
    TooLarge { what: &'static str, got: usize, limit: usize },
    #[error("point and value lists differ in length ({points} vs {values})")]
    CountMismatch { points: usize, values: usize },
    #[error("sample points {0} and {1} coincide")]
    DuplicatePoint(usize, usize),
    #[error("epsilon must be positive, got {0}")]
    Epsilon(f64),
}

pub const EXACT_LIMIT: usize = 4096;
pub const BRUTE_FORCE_LIMIT: usize = 8;

fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    let (d0, d1) = (a[0] - b[0], a[1] - b[1]);
    d0 * d0 + d1 * d1
}

/// Source points with their map values, equal weights implied.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledMap {
    points: Vec<[f64; 2]>,
    values: Vec<[f64; 2]>,
}

impl SampledMap {
    pub fn new(points: Vec<[f64; 2]>, values: Vec<[f64; 2]>) -> Result<Self, OracleError> {
        if points.len() != values.len() {
            return Err(OracleError::CountMismatch {
                points: points.len(),
                values: values.len(),
            });
        }
        let mut order: Vec<usize> = (0..points.len()).collect();
        order.sort_by(|&a, &b| points[a].partial_cmp(&points[b]).unwrap_or(std::cmp::Ordering::Equal));
        if let Some((&a, &b)) = order.iter().tuple_windows().find(|(&a, &b)| points[a] == points[b]) {
            return Err(OracleError::DuplicatePoint(a.min(b), a.max(b)));
        }
        Ok(Self { points, values })
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    pub fn values(&self) -> &[[f64; 2]] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `i,x1,x2,v1,v2` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("i,x1,x2,v1,v2\n");
        for (i, (p, v)) in self.points.iter().zip(&self.values).enumerate() {
            writeln!(out, "{i},{:e},{:e},{:e},{:e}", p[0], p[1], v[0], v[1]).unwrap();
        }
        out
    }
}

/// `values = Ax + ∇φ(x) + z0(x)` at every `stride`-th lattice point.
pub fn sample_map(z0: &VectorField, bg: &BackgroundMap, stride: usize) -> Result<SampledMap, OracleError> {
    let grid = z0.grid();
    let n = grid.n();
    if stride == 0 || n % stride != 0 {
        return Err(OracleError::Stride { stride, n });
    }
    let y = bg.map_values().add(z0);
    let mut points = Vec::new();
    let mut values = Vec::new();
    for j in (0..n).step_by(stride) {
        for i in (0..n).step_by(stride) {
            points.push([grid.coord(i), grid.coord(j)]);
            values.push(y.at_index(grid.index(i, j)));
        }
    }
    SampledMap::new(points, values)
}

/// Source `i` is matched to value `permutation[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentPlan {
    pub permutation: Vec<usize>,
    pub total_cost: f64,
}

impl AssignmentPlan {
    pub fn from_permutation(m: &SampledMap, permutation: Vec<usize>) -> Self {
        let total_cost = plan_cost(m, &permutation);
        Self {
            permutation,
            total_cost,
        }
    }

    /// `v_π(i)` for every source `i`.
    pub fn matched_values(&self, m: &SampledMap) -> Vec<[f64; 2]> {
        self.permutation.iter().map(|&j| m.values[j]).collect()
    }

    pub fn is_bijection(&self) -> bool {
        let mut seen = vec![false; self.permutation.len()];
        self.permutation
            .iter()
            .all(|&j| j < seen.len() && !std::mem::replace(&mut seen[j], true))
    }

    /// `i,pi_i` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("i,pi_i\n");
        for (i, j) in self.permutation.iter().enumerate() {
            writeln!(out, "{i},{j}").unwrap();
        }
        out
    }
}

/// `Σᵢ |xᵢ − v_π(i)|²`, summed in index order.
pub fn plan_cost(m: &SampledMap, permutation: &[usize]) -> f64 {
    permutation
        .iter()
        .enumerate()
        .map(|(i, &j)| dist2(m.points[i], m.values[j]))
        .sum()
}

/// Minimum-cost assignment by successive shortest augmenting paths with
/// dual potentials, `O(N³)`.
pub fn assignment_exact(m: &SampledMap) -> Result<AssignmentPlan, OracleError> {
    let n = m.len();
    if n > EXACT_LIMIT {
        return Err(OracleError::TooLarge {
            what: "exact assignment",
            got: n,
            limit: EXACT_LIMIT,
        });
    }
    if n == 0 {
        return Ok(AssignmentPlan {
            permutation: Vec::new(),
            total_cost: 0.0,
        });
    }
    let cost = |i: usize, j: usize| dist2(m.points[i], m.values[j]);

    // 1-based columns; column 0 is the virtual root of each search
    let mut row_pot = vec![0.0; n + 1];
    let mut col_pot = vec![0.0; n + 1];
    let mut col_owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut min_slack = vec![0.0; n + 1];
    let mut used = vec![false; n + 1];

    for row in 1..=n {
        col_owner[0] = row;
        let mut j0 = 0usize;
        min_slack.iter_mut().for_each(|v| *v = f64::INFINITY);
        used.iter_mut().for_each(|v| *v = false);
        loop {
            used[j0] = true;
            let i0 = col_owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - row_pot[i0] - col_pot[j];
                if cur < min_slack[j] {
                    min_slack[j] = cur;
                    way[j] = j0;
                }
                if min_slack[j] < delta {
                    delta = min_slack[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    row_pot[col_owner[j]] += delta;
                    col_pot[j] -= delta;
                } else {
                    min_slack[j] -= delta;
                }
            }
            j0 = j1;
            if col_owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            col_owner[j0] = col_owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut permutation = vec![0usize; n];
    for j in 1..=n {
        permutation[col_owner[j] - 1] = j - 1;
    }
    Ok(AssignmentPlan::from_permutation(m, permutation))
}

/// Exhaustive minimum over all permutations; first minimum in
/// lexicographic order wins ties.
pub fn brute_force_assignment(m: &SampledMap) -> Result<AssignmentPlan, OracleError> {
    let n = m.len();
    if n > BRUTE_FORCE_LIMIT {
        return Err(OracleError::TooLarge {
            what: "brute-force assignment",
            got: n,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    let best = (0..n)
        .permutations(n)
        .map(|p| (plan_cost(m, &p), p))
        .fold(None::<(f64, Vec<usize>)>, |best, cand| match best {
            Some(b) if b.0 <= cand.0 => Some(b),
            _ => Some(cand),
        })
        .expect("at least the empty permutation");
    Ok(AssignmentPlan {
        permutation: best.1,
        total_cost: best.0,
    })
}

/// Smallest `(v_π(i) − v_π(j))·(xᵢ − xⱼ)` over `pairs` random index pairs.
/// Optimal plans make this non-negative up to roundoff.
pub fn monotonicity_margin(m: &SampledMap, plan: &AssignmentPlan, pairs: usize, seed: u64) -> f64 {
    let n = m.len();
    if n < 2 {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::INFINITY;
    for _ in 0..pairs {
        let i = rng.gen_range(0..n);
        let j = rng.gen_range(0..n);
        if i == j {
            continue;
        }
        let (vi, vj) = (m.values[plan.permutation[i]], m.values[plan.permutation[j]]);
        let (xi, xj) = (m.points[i], m.points[j]);
        let dot = (vi[0] - vj[0]) * (xi[0] - xj[0]) + (vi[1] - vj[1]) * (xi[1] - xj[1]);
        worst = worst.min(dot);
    }
    worst
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SinkhornResult {
    pub iterations: usize,
    /// `Σᵢ |Σⱼ Pᵢⱼ − 1/N|` after the last update.
    pub marginal_error: f64,
    pub converged: bool,
    /// `N·Σᵢⱼ Pᵢⱼ|xᵢ − vⱼ|²`, comparable to an assignment's total cost.
    pub transport_cost: f64,
    /// Coupling-weighted average of the values for each source point.
    #[serde(skip)]
    pub barycentric_map: Vec<[f64; 2]>,
}

fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Entropic transport between the uniform source and value measures,
/// iterated in the log domain until the source marginal error drops below
/// `tol` or `max_iters` is reached. Non-convergence is reported in the
/// result rather than as an error.
pub fn sinkhorn(m: &SampledMap, epsilon: f64, max_iters: usize, tol: f64) -> Result<SinkhornResult, OracleError> {
    if !(epsilon > 0.0) {
        return Err(OracleError::Epsilon(epsilon));
    }
    let n = m.len();
    if n == 0 {
        return Ok(SinkhornResult {
            iterations: 0,
            marginal_error: 0.0,
            converged: true,
            transport_cost: 0.0,
            barycentric_map: Vec::new(),
        });
    }
    let log_w = -(n as f64).ln();
    let cost = |i: usize, j: usize| dist2(m.points[i], m.values[j]);
    let mut f = vec![0.0; n];
    let mut g = vec![0.0; n];
    let log_plan = |f: &[f64], g: &[f64], i: usize, j: usize| (f[i] + g[j] - cost(i, j)) / epsilon;

    let row_error = |f: &[f64], g: &[f64]| -> f64 {
        (0..n)
            .map(|i| {
                let mass: f64 = (0..n).map(|j| log_plan(f, g, i, j).exp()).sum();
                (mass - 1.0 / n as f64).abs()
            })
            .sum()
    };

    let mut iterations = 0;
    let mut err = f64::INFINITY;
    while iterations < max_iters {
        for (i, fi) in f.iter_mut().enumerate() {
            *fi = epsilon * (log_w - log_sum_exp((0..n).map(|j| (g[j] - cost(i, j)) / epsilon)));
        }
        for (j, gj) in g.iter_mut().enumerate() {
            *gj = epsilon * (log_w - log_sum_exp((0..n).map(|i| (f[i] - cost(i, j)) / epsilon)));
        }
        iterations += 1;
        err = row_error(&f, &g);
        if err < tol {
            break;
        }
    }

    let mut transport_cost = 0.0;
    let mut bary = Vec::with_capacity(n);
    for i in 0..n {
        let mut mass = 0.0;
        let mut acc = [0.0, 0.0];
        for j in 0..n {
            let p = log_plan(&f, &g, i, j).exp();
            mass += p;
            acc[0] += p * m.values[j][0];
            acc[1] += p * m.values[j][1];
            transport_cost += p * cost(i, j);
        }
        bary.push([acc[0] / mass, acc[1] / mass]);
    }
    Ok(SinkhornResult {
        iterations,
        marginal_error: err,
        converged: err < tol,
        transport_cost: transport_cost * n as f64,
        barycentric_map: bary,
    })
}

/// Root-mean-square pointwise distance.
pub fn map_error(flow_values: &[[f64; 2]], plan_values: &[[f64; 2]]) -> Result<f64, OracleError> {
    if flow_values.len() != plan_values.len() {
        return Err(OracleError::CountMismatch {
            points: flow_values.len(),
            values: plan_values.len(),
        });
    }
    if flow_values.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = flow_values.iter().zip(plan_values).map(|(a, b)| dist2(*a, *b)).sum();
    Ok((sum / flow_values.len() as f64).sqrt())
}

/// Flow limit against the exact discrete rearrangement of the initial map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub samples: usize,
    pub exact_cost: f64,
    /// `Σ|xᵢ − y_∞(xᵢ)|²` for the flow limit at the same points.
    pub flow_cost: f64,
    /// RMS distance between `y_∞(xᵢ)` and `v_π(i)`.
    pub map_error: f64,
    /// RMS of `y₀ − y*` at the sample points.
    pub perturbation_rms: f64,
    /// Number of sources the plan moves off their own value.
    pub displaced: usize,
    pub monotonicity_margin: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sinkhorn: Option<SinkhornResult>,
}

/// Samples `y₀ = y* + z0` and `y_∞ = y* + z_final` with the given stride,
/// solves the exact assignment for `y₀`, and compares it with `y_∞`.
pub fn compare_with_flow(
    z0: &VectorField,
    z_final: &VectorField,
    bg: &BackgroundMap,
    stride: usize,
    sinkhorn_epsilon: Option<f64>,
) -> Result<(OracleReport, SampledMap, AssignmentPlan), OracleError> {
    let initial = sample_map(z0, bg, stride)?;
    let limit = sample_map(z_final, bg, stride)?;
    let background = sample_map(&VectorField::zeros(z0.grid()), bg, stride)?;
    let plan = assignment_exact(&initial)?;
    let matched = plan.matched_values(&initial);
    let err = map_error(limit.values(), &matched)?;
    let perturbation_rms = map_error(initial.values(), background.values())?;
    let flow_cost = limit
        .points()
        .iter()
        .zip(limit.values())
        .map(|(x, v)| dist2(*x, *v))
        .sum();
    let displaced = plan.permutation.iter().enumerate().filter(|(i, j)| i != *j).count();
    let sinkhorn = match sinkhorn_epsilon {
        Some(eps) => Some(sinkhorn(&initial, eps, 500, 1e-9)?),
        None => None,
    };
    let report = OracleReport {
        samples: initial.len(),
        exact_cost: plan.total_cost,
        flow_cost,
        map_error: err,
        perturbation_rms,
        displaced,
        monotonicity_margin: monotonicity_margin(&initial, &plan, 10_000, 0),
        sinkhorn,
    };
    Ok((report, initial, plan))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::Grid;
    use std::f64::consts::PI;

    fn random_map(seed: u64, n: usize) -> SampledMap {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pt = || [rng.gen_range(0.0..6.0), rng.gen_range(0.0..6.0)];
        let points = (0..n).map(|_| pt()).collect();
        let values = (0..n).map(|_| pt()).collect();
        SampledMap::new(points, values).unwrap()
    }

    #[test]
    fn sample_map_examples() {
        let g = Grid::new(16).unwrap();
        let bg = BackgroundMap::affine(g, [[1.0, 0.0], [0.0, 1.0]]).unwrap();
        let z = VectorField::zeros(g);
        let one = sample_map(&z, &bg, 16).unwrap();
        assert_eq!(one.points(), &[[0.0, 0.0]]);
        let all = sample_map(&z, &bg, 2).unwrap();
        assert_eq!(all.len(), 64);
        assert_eq!(all.points(), all.values());
        assert!(matches!(sample_map(&z, &bg, 3), Err(OracleError::Stride { .. })));
        let g64 = Grid::new(64).unwrap();
        let bg64 = BackgroundMap::affine(g64, [[1.0, 0.0], [0.0, 1.0]]).unwrap();
        assert_eq!(sample_map(&VectorField::zeros(g64), &bg64, 2).unwrap().len(), 1024);
    }

    #[test]
    fn sampled_map_validation() {
        assert!(matches!(
            SampledMap::new(vec![[0.0, 0.0]], vec![]),
            Err(OracleError::CountMismatch { .. })
        ));
        assert!(matches!(
            SampledMap::new(vec![[0.0, 1.0], [2.0, 0.0], [0.0, 1.0]], vec![[0.0, 0.0]; 3]),
            Err(OracleError::DuplicatePoint(0, 2))
        ));
    }

    #[test]
    fn identity_and_swap() {
        let pts = vec![[0.0, 0.0], [1.0, 0.5], [3.0, 2.0], [0.2, 4.0]];
        let m = SampledMap::new(pts.clone(), pts).unwrap();
        let plan = assignment_exact(&m).unwrap();
        assert_eq!(plan.permutation, vec![0, 1, 2, 3]);
        assert_eq!(plan.total_cost, 0.0);

        let m = SampledMap::new(vec![[0.0, 0.0], [0.0, PI]], vec![[0.0, PI], [0.0, 0.0]]).unwrap();
        let plan = assignment_exact(&m).unwrap();
        assert_eq!(plan.permutation, vec![1, 0]);
        assert_eq!(plan.total_cost, 0.0);
    }

    #[test]
    fn brute_force_examples() {
        let m = SampledMap::new(vec![[1.0, 2.0]], vec![[3.0, 3.0]]).unwrap();
        assert_eq!(brute_force_assignment(&m).unwrap().permutation, vec![0]);
        let pts: Vec<[f64; 2]> = (0..5).map(|i| [i as f64, (i * i) as f64]).collect();
        let m = SampledMap::new(pts.clone(), pts).unwrap();
        let plan = brute_force_assignment(&m).unwrap();
        assert_eq!(plan.permutation, vec![0, 1, 2, 3, 4]);
        assert_eq!(plan.total_cost, 0.0);
        assert!(matches!(
            brute_force_assignment(&random_map(0, 9)),
            Err(OracleError::TooLarge { .. })
        ));
    }

    #[test]
    fn six_point_golden_cost() {
        // Frozen from exhaustive enumeration over all 720 permutations.
        let m = random_map(6, 6);
        let brute = brute_force_assignment(&m).unwrap();
        let exact = assignment_exact(&m).unwrap();
        assert_eq!(exact.total_cost, brute.total_cost);
        assert_eq!(exact.permutation, brute.permutation);
        assert!((brute.total_cost - GOLDEN_SIX).abs() < 1e-12);
    }

    const GOLDEN_SIX: f64 = 35.66830067599594;

    #[test]
    fn seven_points_match_brute_force() {
        for seed in 100..110 {
            let m = random_map(seed, 7);
            let exact = assignment_exact(&m).unwrap();
            let brute = brute_force_assignment(&m).unwrap();
            assert_eq!(exact.total_cost, brute.total_cost, "seed {seed}");
            assert!(exact.is_bijection());
        }
    }

    #[test]
    fn sinkhorn_self_coupling() {
        let pts: Vec<[f64; 2]> = (0..9).map(|i| [(i % 3) as f64, (i / 3) as f64]).collect();
        let m = SampledMap::new(pts.clone(), pts.clone()).unwrap();
        let eps = 0.02;
        let r = sinkhorn(&m, eps, 1000, 1e-10).unwrap();
        assert!(r.converged);
        for (b, p) in r.barycentric_map.iter().zip(&pts) {
            assert!(dist2(*b, *p).sqrt() <= 10.0 * eps);
        }
    }

    #[test]
    fn sinkhorn_large_epsilon_is_uniform() {
        let m = random_map(3, 6);
        let r = sinkhorn(&m, 1e6, 100, 1e-12).unwrap();
        let mean = m.values().iter().fold([0.0, 0.0], |a, v| [a[0] + v[0] / 6.0, a[1] + v[1] / 6.0]);
        for b in &r.barycentric_map {
            assert!(dist2(*b, mean).sqrt() < 1e-4);
        }
    }

    #[test]
    fn sinkhorn_two_point_swap() {
        let m = SampledMap::new(vec![[0.0, 0.0], [0.0, PI]], vec![[0.0, PI], [0.0, 0.0]]).unwrap();
        let r = sinkhorn(&m, 1e-3, 200, 1e-12).unwrap();
        let exact = assignment_exact(&m).unwrap().total_cost;
        assert!(r.transport_cost >= exact);
        assert!(r.transport_cost - exact <= 1e-2);
        assert!(matches!(sinkhorn(&m, 0.0, 10, 1e-9), Err(OracleError::Epsilon(_))));
    }

    #[test]
    fn sinkhorn_cost_bounds_exact_cost() {
        for seed in 0..4 {
            let m = random_map(seed, 12);
            let exact = assignment_exact(&m).unwrap().total_cost;
            for eps in [0.05, 0.5, 5.0] {
                let tol = 1e-9;
                let r = sinkhorn(&m, eps, 5000, tol).unwrap();
                let diam2 = 72.0;
                assert!(r.transport_cost >= exact - tol * diam2, "seed {seed} eps {eps}");
            }
        }
    }

    #[test]
    fn map_error_examples() {
        let a = vec![[0.0, 1.0], [2.0, 3.0]];
        assert_eq!(map_error(&a, &a).unwrap(), 0.0);
        let b: Vec<[f64; 2]> = a.iter().map(|p| [p[0] + 3.0, p[1] + 4.0]).collect();
        assert!((map_error(&a, &b).unwrap() - 5.0).abs() < 1e-14);
        assert!(map_error(&a, &b[..1]).is_err());
    }

    #[test]
    fn csv_layouts() {
        let m = SampledMap::new(vec![[0.0, 0.5]], vec![[1.0, 2.0]]).unwrap();
        assert_eq!(m.to_csv(), "i,x1,x2,v1,v2\n0,0e0,5e-1,1e0,2e0\n");
        let plan = AssignmentPlan::from_permutation(&m, vec![0]);
        assert_eq!(plan.to_csv(), "i,pi_i\n0,0\n");
    }
}
