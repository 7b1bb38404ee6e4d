//! Optimal unambiguous discrimination (UD) and state filtering.
//!
//! A UD strategy for linearly independent states `ψ_i` is described by its
//! per-state success probabilities `p_i`. Such a strategy exists iff the
//! failure Gram matrix `Γ − diag(p)` is positive semidefinite, so the
//! optimum is the small semidefinite program
//!
//! ```text
//! maximize  Σ η_i p_i   subject to   Γ − diag(p) ⪰ 0,  0 ≤ p_i ≤ 1.
//! ```
//!
//! Two states are solved in closed form; larger sets use a log-barrier
//! Newton method. [`grid_oracle_ud`] is an independent brute-force check.

use std::cmp::Ordering;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::linalg::{self, re, CMatrix, CVector, C64};
use crate::states::{self, StateEnsemble, DEFAULT_INDEPENDENCE_TOL};
use crate::{Error, Result};

/// Tolerance on the smallest failure-Gram eigenvalue for a strategy to count
/// as feasible.
pub const PSD_TOL: f64 = 1e-9;

/// Tolerance for POVM completeness and unambiguity checks.
pub const POVM_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolutionStatus {
    Optimal,
    /// Optimal, but some state is never identified (`p_i = 0`).
    Boundary,
    Infeasible,
}

#[derive(Debug, Clone)]
pub struct UdSolution {
    pub success_probs: Vec<f64>,
    pub average_success: f64,
    /// `Γ − diag(p)`.
    pub failure_gram: CMatrix,
    pub status: SolutionStatus,
}

impl UdSolution {
    /// Scores an arbitrary probability vector against `ensemble`.
    pub fn from_probs(ensemble: &StateEnsemble, probs: Vec<f64>) -> Self {
        let g = states::gram(ensemble);
        let failure_gram = failure_gram(g.entries(), &probs);
        let average_success = probs.iter().zip(ensemble.priors()).map(|(p, e)| p * e).sum();
        let feasible = probs.iter().all(|p| (-PSD_TOL..=1.0 + PSD_TOL).contains(p))
            && linalg::min_eigenvalue(&failure_gram) >= -PSD_TOL;
        let status = if !feasible {
            SolutionStatus::Infeasible
        } else if probs.iter().any(|&p| p < 1e-7) {
            SolutionStatus::Boundary
        } else {
            SolutionStatus::Optimal
        };
        Self { success_probs: probs, average_success, failure_gram, status }
    }

    pub fn failure_eigenvalues(&self) -> Vec<f64> {
        linalg::hermitian_eigenvalues(&self.failure_gram)
    }

    pub fn is_feasible(&self) -> bool {
        self.status != SolutionStatus::Infeasible
    }
}

fn failure_gram(gram: &CMatrix, probs: &[f64]) -> CMatrix {
    let mut m = gram.clone();
    for (i, p) in probs.iter().enumerate() {
        m[(i, i)] -= re(*p);
    }
    m
}

#[derive(Debug, Clone)]
pub struct FilteringSolution {
    pub target: usize,
    pub subset: Vec<usize>,
    /// Failure probability of the target, `|f_target|²`.
    pub q1: f64,
    pub success_target: f64,
    /// Success probabilities of the subset states, in `subset` order.
    pub success_subset: Vec<f64>,
    pub average_success: f64,
    /// Scalar ancilla amplitude `f_i` of every state, indexed like the
    /// ensemble.
    pub failure_amplitudes: Vec<C64>,
    pub status: SolutionStatus,
}

impl FilteringSolution {
    /// Gram matrix of the conclusive parts of the subset states,
    /// `C_jk = Γ_jk − f_j* f_k`.
    pub fn conclusive_gram(&self, ensemble: &StateEnsemble) -> CMatrix {
        let g = states::gram(ensemble);
        let n = self.subset.len();
        CMatrix::from_fn(n, n, |a, b| {
            let (j, k) = (self.subset[a], self.subset[b]);
            g.get(j, k) - self.failure_amplitudes[j].conj() * self.failure_amplitudes[k]
        })
    }

    /// Per-state success probabilities in ensemble order.
    pub fn success_probs(&self) -> Vec<f64> {
        let mut p = vec![0.0; self.failure_amplitudes.len()];
        p[self.target] = self.success_target;
        for (&k, &pk) in self.subset.iter().zip(&self.success_subset) {
            p[k] = pk;
        }
        p
    }
}

/// Outcome attached to one POVM element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    /// Conclusive identification of state `i` (0-based).
    State(usize),
    /// Filtering: the target state.
    Target,
    /// Filtering: some member of the subset.
    Subset,
    Inconclusive,
}

impl std::fmt::Display for Outcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Outcome::State(i) => write!(f, "ψ{}", i + 1),
            Outcome::Target => f.write_str("target"),
            Outcome::Subset => f.write_str("subset"),
            Outcome::Inconclusive => f.write_str("?"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PovmSet {
    pub elements: Vec<CMatrix>,
    pub outcome_labels: Vec<Outcome>,
}

impl PovmSet {
    pub fn new(elements: Vec<CMatrix>, outcome_labels: Vec<Outcome>) -> Result<Self> {
        if elements.len() != outcome_labels.len() || elements.is_empty() {
            return Err(Error::Inconsistent("element/label count mismatch".into()));
        }
        let d = elements[0].nrows();
        if elements.iter().any(|e| e.nrows() != d || e.ncols() != d) {
            return Err(Error::Inconsistent("elements differ in dimension".into()));
        }
        Ok(Self { elements, outcome_labels })
    }

    pub fn dim(&self) -> usize {
        self.elements[0].nrows()
    }

    pub fn element(&self, outcome: Outcome) -> Option<&CMatrix> {
        self.outcome_labels.iter().position(|&o| o == outcome).map(|k| &self.elements[k])
    }

    /// `max |Σ_o E_o − I|`.
    pub fn completeness_residual(&self) -> f64 {
        let d = self.dim();
        let sum = self.elements.iter().fold(CMatrix::zeros(d, d), |acc, e| acc + e);
        linalg::max_abs_diff(&sum, &CMatrix::identity(d, d))
    }

    pub fn min_element_eigenvalue(&self) -> f64 {
        self.elements.iter().map(linalg::min_eigenvalue).fold(f64::INFINITY, f64::min)
    }

    /// `⟨ψ|E_o|ψ⟩`.
    pub fn probability(&self, outcome: Outcome, state: &CVector) -> f64 {
        self.element(outcome).map_or(0.0, |e| state.dotc(&(e * state)).re)
    }
}

// ---------------------------------------------------------------------------
// Optimal UD

/// Optimal unambiguous discrimination of a linearly independent ensemble.
pub fn optimize_ud(ensemble: &StateEnsemble) -> Result<UdSolution> {
    check_independent(ensemble)?;
    let probs = match ensemble.len() {
        1 => vec![1.0],
        2 => two_state_optimum(ensemble),
        _ => barrier_optimum(ensemble)?,
    };
    Ok(UdSolution::from_probs(ensemble, probs))
}

fn check_independent(ensemble: &StateEnsemble) -> Result<()> {
    let min_eigenvalue = states::gram(ensemble).min_eigenvalue();
    if ensemble.len() > ensemble.dim() || min_eigenvalue <= DEFAULT_INDEPENDENCE_TOL {
        return Err(Error::LinearlyDependent { min_eigenvalue });
    }
    Ok(())
}

/// Closed form for two states: with failure probabilities `q1 q2 = s²`,
/// maximize `η1 (1 − q1) + η2 (1 − s²/q1)` over `q1 ∈ [s², 1]`.
fn two_state_optimum(ensemble: &StateEnsemble) -> Vec<f64> {
    let s2 = ensemble.state(0).overlap(ensemble.state(1)).norm_sqr();
    if s2 == 0.0 {
        return vec![1.0, 1.0];
    }
    let (e1, e2) = (ensemble.priors()[0], ensemble.priors()[1]);
    let value = |q1: f64| e1 * (1.0 - q1) + e2 * (1.0 - s2 / q1);
    let mut candidates = vec![s2, 1.0];
    if e1 > 0.0 {
        candidates.push((s2.sqrt() * (e2 / e1).sqrt()).clamp(s2, 1.0));
    }
    let q1 = candidates.into_iter().max_by(|a, b| value(*a).total_cmp(&value(*b))).expect("non-empty");
    vec![1.0 - q1, (1.0 - s2 / q1).max(0.0)]
}

/// Barrier problem at weight `mu`:
/// `η·p + μ [log det(Γ − diag p) + Σ log p_i]`.
struct Barrier<'a> {
    gram: &'a CMatrix,
    priors: &'a [f64],
}

struct BarrierEval {
    value: f64,
    gradient: Vec<f64>,
    hessian: nalgebra::DMatrix<f64>,
}

impl Barrier<'_> {
    fn log_det_and_inverse(&self, p: &[f64], with_inverse: bool) -> Option<(f64, Option<CMatrix>)> {
        if p.iter().any(|&x| x <= 0.0 || x >= 1.0) {
            return None;
        }
        let chol = nalgebra::Cholesky::new(failure_gram(self.gram, p))?;
        let l = chol.l_dirty();
        let mut log_det = 0.0;
        for k in 0..p.len() {
            // complex sqrt never fails, so a negative pivot shows up as a
            // mostly imaginary diagonal entry instead of an error
            let (d, im) = (l[(k, k)].re, l[(k, k)].im);
            if d <= 0.0 || !d.is_finite() || im.abs() > 1e-8 * d {
                return None;
            }
            log_det += 2.0 * d.ln();
        }
        let inverse = with_inverse.then(|| chol.inverse());
        Some((log_det, inverse))
    }

    fn value(&self, p: &[f64], mu: f64) -> Option<f64> {
        let (log_det, _) = self.log_det_and_inverse(p, false)?;
        let linear: f64 = p.iter().zip(self.priors).map(|(a, b)| a * b).sum();
        let logs: f64 = p.iter().map(|x| x.ln()).sum();
        Some(linear + mu * (log_det + logs))
    }

    fn eval(&self, p: &[f64], mu: f64) -> Option<BarrierEval> {
        let n = p.len();
        let (log_det, inv) = self.log_det_and_inverse(p, true)?;
        let inv = inv.expect("requested");
        let linear: f64 = p.iter().zip(self.priors).map(|(a, b)| a * b).sum();
        let logs: f64 = p.iter().map(|x| x.ln()).sum();
        let gradient = (0..n).map(|i| self.priors[i] + mu * (-inv[(i, i)].re + 1.0 / p[i])).collect();
        let hessian = nalgebra::DMatrix::from_fn(n, n, |i, j| {
            let mut h = -inv[(i, j)].norm_sqr();
            if i == j {
                h -= 1.0 / (p[i] * p[i]);
            }
            mu * h
        });
        Some(BarrierEval { value: linear + mu * (log_det + logs), gradient, hessian })
    }
}

const MU_START: f64 = 1e-1;
const MU_FINAL: f64 = 1e-14;
const MU_FACTOR: f64 = 0.1;

fn barrier_optimum(ensemble: &StateEnsemble) -> Result<Vec<f64>> {
    let g = states::gram(ensemble);
    let n = ensemble.len();
    let barrier = Barrier { gram: g.entries(), priors: ensemble.priors() };
    let start = (g.min_eigenvalue() / 2.0).min(0.5);
    let mut p = vec![start; n];
    let mut mu = MU_START;
    loop {
        p = center(&barrier, p, mu)?;
        if mu <= MU_FINAL {
            break;
        }
        mu *= MU_FACTOR;
    }
    Ok(p)
}

/// Newton's method with backtracking for a fixed barrier weight.
fn center(barrier: &Barrier<'_>, mut p: Vec<f64>, mu: f64) -> Result<Vec<f64>> {
    let n = p.len();
    for _ in 0..200 {
        let Some(eval) = barrier.eval(&p, mu) else {
            return Err(Error::Infeasible("barrier iterate left the feasible region".into()));
        };
        let neg_h = -eval.hessian;
        let g = nalgebra::DVector::from_vec(eval.gradient);
        let step = match neg_h.clone().cholesky() {
            Some(ch) => ch.solve(&g),
            None => match neg_h.lu().solve(&g) {
                Some(s) => s,
                None => break,
            },
        };
        let decrement = g.dot(&step);
        if !decrement.is_finite() || decrement <= 0.0 {
            break;
        }
        if decrement / 2.0 < 1e-13 * mu.max(1e-300) + 1e-30 {
            break;
        }
        let mut alpha = 1.0;
        let mut moved = false;
        while alpha > 1e-20 {
            let trial: Vec<f64> = (0..n).map(|i| p[i] + alpha * step[i]).collect();
            if let Some(v) = barrier.value(&trial, mu) {
                if v >= eval.value + 0.25 * alpha * decrement {
                    p = trial;
                    moved = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !moved {
            break;
        }
    }
    Ok(p)
}

// ---------------------------------------------------------------------------
// Filtering

/// Optimal unambiguous filtering of `ensemble[target]` from all other
/// states, with a single ancilla dimension (scalar failure amplitudes).
pub fn optimize_filtering(ensemble: &StateEnsemble, target: usize) -> Result<FilteringSolution> {
    let n = ensemble.len();
    if target >= n {
        return Err(Error::InvalidParameter(format!("target {target} out of range for {n} states")));
    }
    if n < 2 {
        return Err(Error::InvalidParameter("filtering needs at least two states".into()));
    }
    let g = states::gram(ensemble);
    let subset: Vec<usize> = (0..n).filter(|&k| k != target).collect();
    let eta_t = ensemble.priors()[target];
    let overlap_sq: Vec<f64> = subset.iter().map(|&k| g.get(target, k).norm_sqr()).collect();
    let max_overlap_sq = overlap_sq.iter().copied().fold(0.0, f64::max);

    let q_lo = if max_overlap_sq == 0.0 { 0.0 } else { feasibility_boundary(&g, target, &subset, max_overlap_sq) };
    let weighted: f64 = subset.iter().zip(&overlap_sq).map(|(&k, s)| ensemble.priors()[k] * s).sum();
    let q_star = if eta_t > 0.0 { (weighted / eta_t).sqrt() } else { 1.0 };
    let q = q_star.clamp(q_lo, 1.0);

    let f_t = q.sqrt();
    let mut failure_amplitudes = vec![C64::new(0.0, 0.0); n];
    failure_amplitudes[target] = re(f_t);
    for &k in &subset {
        if f_t > 0.0 {
            failure_amplitudes[k] = g.get(target, k) / f_t;
        }
    }
    let success_target = 1.0 - q;
    let success_subset: Vec<f64> = subset.iter().map(|&k| (1.0 - failure_amplitudes[k].norm_sqr()).max(0.0)).collect();
    let average_success = eta_t * success_target
        + subset.iter().zip(&success_subset).map(|(&k, p)| ensemble.priors()[k] * p).sum::<f64>();
    let status = if success_target < 1e-9 || success_subset.iter().any(|&p| p < 1e-9) {
        SolutionStatus::Boundary
    } else {
        SolutionStatus::Optimal
    };
    let solution = FilteringSolution {
        target,
        subset,
        q1: q,
        success_target,
        success_subset,
        average_success,
        failure_amplitudes,
        status,
    };
    if linalg::min_eigenvalue(&solution.conclusive_gram(ensemble)) < -PSD_TOL {
        return Err(Error::Infeasible("subset conclusive Gram is not positive semidefinite".into()));
    }
    Ok(solution)
}

/// Smallest `q` for which the subset conclusive Gram `Γ_S − w w†/q` is PSD,
/// found by bisection (the matrix grows monotonically with `q`).
fn feasibility_boundary(g: &states::GramMatrix, target: usize, subset: &[usize], q_floor: f64) -> f64 {
    let conclusive_min = |q: f64| {
        let m = subset.len();
        let c = CMatrix::from_fn(m, m, |a, b| {
            let (j, k) = (subset[a], subset[b]);
            g.get(j, k) - g.get(j, target) * g.get(target, k) / q
        });
        linalg::min_eigenvalue(&c)
    };
    if conclusive_min(q_floor) >= 0.0 {
        return q_floor;
    }
    let (mut lo, mut hi) = (q_floor, 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if conclusive_min(mid) >= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo < 1e-16 {
            break;
        }
    }
    hi
}

// ---------------------------------------------------------------------------
// Projective baselines

#[derive(Debug, Clone)]
pub struct PvmUdResult {
    pub best_index: usize,
    pub success: f64,
    /// `η_i |⟨v_i|ψ_i⟩|²` for every state.
    pub per_state: Vec<f64>,
}

/// Best single-state projective UD: project onto the unique direction
/// orthogonal to all other states and pick the state for which that
/// succeeds most often. Ties go to the lowest index.
pub fn optimal_pvm_ud(ensemble: &StateEnsemble) -> Result<PvmUdResult> {
    let d = ensemble.dim();
    let mut per_state = Vec::with_capacity(ensemble.len());
    for i in 0..ensemble.len() {
        let mut basis = Vec::new();
        for (j, s) in ensemble.states().iter().enumerate() {
            if j != i {
                linalg::gram_schmidt_push(&mut basis, s.amplitudes(), 1e-9);
            }
        }
        let rank = basis.len();
        if d - rank != 1 {
            return Err(Error::DegenerateComplement { index: i, dimension: d - rank });
        }
        let full = linalg::complete_basis(basis, d);
        let v = &full[d - 1];
        per_state.push(ensemble.priors()[i] * v.dotc(ensemble.state(i).amplitudes()).norm_sqr());
    }
    let mut best_index = 0;
    for i in 1..per_state.len() {
        if per_state[i] > per_state[best_index] + 1e-12 {
            best_index = i;
        }
    }
    Ok(PvmUdResult { best_index, success: per_state[best_index], per_state })
}

/// Unambiguous success of an orthonormal basis used as a filtering PVM.
///
/// Basis vector `v` counts as a target outcome if it is orthogonal to every
/// subset state, as a subset outcome if it is orthogonal to the target, and
/// as inconclusive otherwise.
pub fn score_pvm_filtering(ensemble: &StateEnsemble, target: usize, basis: &[CVector]) -> f64 {
    const ZERO: f64 = 1e-8;
    let mut total = 0.0;
    for v in basis {
        let amps: Vec<C64> = ensemble.states().iter().map(|s| v.dotc(s.amplitudes())).collect();
        let target_outcome = amps.iter().enumerate().all(|(k, a)| k == target || a.norm() < ZERO);
        let subset_outcome = amps[target].norm() < ZERO;
        if target_outcome {
            total += ensemble.priors()[target] * amps[target].norm_sqr();
        } else if subset_outcome {
            total += amps
                .iter()
                .enumerate()
                .filter(|(k, _)| *k != target)
                .map(|(k, a)| ensemble.priors()[k] * a.norm_sqr())
                .sum::<f64>();
        }
    }
    total
}

/// Best projective filtering measurement found by a search over
/// orthonormal bases.
///
/// Target vectors must lie in the orthocomplement `T` of the subset span;
/// once they are fixed, the best subset vectors span everything orthogonal
/// to both the target state and the target vectors. The search therefore
/// runs over orthonormal frames in `T` for every frame size, with
/// `search_budget` random restarts and a pattern-search polish each, and
/// every candidate basis is scored by [`score_pvm_filtering`].
pub fn optimal_pvm_filtering(ensemble: &StateEnsemble, target: usize, search_budget: usize) -> Result<f64> {
    let n = ensemble.len();
    if target >= n {
        return Err(Error::InvalidParameter(format!("target {target} out of range for {n} states")));
    }
    let d = ensemble.dim();
    let mut subset_basis = Vec::new();
    for (k, s) in ensemble.states().iter().enumerate() {
        if k != target {
            linalg::gram_schmidt_push(&mut subset_basis, s.amplitudes(), 1e-9);
        }
    }
    let rank = subset_basis.len();
    let t_basis: Vec<CVector> = linalg::complete_basis(subset_basis, d).split_off(rank);
    let dim_t = t_basis.len();

    let frame_basis = |frame: &[CVector]| -> Vec<CVector> {
        // target vectors, then the complement of span{ψ_target, frame}
        let mut span = frame.to_vec();
        linalg::gram_schmidt_push(&mut span, ensemble.state(target).amplitudes(), 1e-12);
        let fixed = span.len();
        let full = linalg::complete_basis(span, d);
        let mut basis: Vec<CVector> = frame.to_vec();
        basis.extend(full[fixed..].iter().cloned());
        if fixed > frame.len() {
            basis.push(full[frame.len()].clone());
        }
        basis
    };

    let mut best = score_pvm_filtering(ensemble, target, &frame_basis(&[]));
    let mut rng = ChaCha8Rng::seed_from_u64(0x005e_ed0f_f11e ^ search_budget as u64);
    for frame_size in 1..=dim_t {
        let restarts = if dim_t == frame_size { 1 } else { search_budget.max(1) };
        for _ in 0..restarts {
            let start = linalg::random_unitary(dim_t, &mut rng);
            let objective = |angles: &[f64]| {
                let u = &start * hermitian_exp(angles, dim_t);
                let frame: Vec<CVector> = (0..frame_size)
                    .map(|c| (0..dim_t).fold(CVector::zeros(d), |acc, r| acc + &t_basis[r] * u[(r, c)]))
                    .collect();
                score_pvm_filtering(ensemble, target, &frame_basis(&frame))
            };
            let value = if dim_t == frame_size {
                objective(&vec![0.0; dim_t * dim_t])
            } else {
                pattern_search(objective, dim_t * dim_t)
            };
            best = best.max(value);
        }
    }
    Ok(best)
}

/// `exp(i H)` for the Hermitian `H` whose real parameters are `angles`
/// (diagonal first, then real and imaginary parts of the upper triangle).
fn hermitian_exp(angles: &[f64], n: usize) -> CMatrix {
    let mut h = CMatrix::zeros(n, n);
    let mut idx = 0;
    for k in 0..n {
        h[(k, k)] = re(angles[idx]);
        idx += 1;
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let z = C64::new(angles[idx], angles[idx + 1]);
            idx += 2;
            h[(i, j)] = z;
            h[(j, i)] = z.conj();
        }
    }
    let (vals, vecs) = linalg::hermitian_eigen(&h);
    let phases = CVector::from_iterator(n, vals.iter().map(|&l| C64::from_polar(1.0, l)));
    &vecs * CMatrix::from_diagonal(&phases) * vecs.adjoint()
}

/// Compass search maximizing `f` from the origin.
fn pattern_search(f: impl Fn(&[f64]) -> f64, dims: usize) -> f64 {
    let mut x = vec![0.0; dims];
    let mut fx = f(&x);
    let mut step = 0.5;
    while step > 1e-7 {
        let mut improved = false;
        for k in 0..dims {
            for sign in [1.0, -1.0] {
                let mut y = x.clone();
                y[k] += sign * step;
                let fy = f(&y);
                if fy > fx + 1e-15 {
                    x = y;
                    fx = fy;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    fx
}

// ---------------------------------------------------------------------------
// POVM elements

/// `E_i = p_i |ψ̃_i⟩⟨ψ̃_i|` built from the dual basis, plus the
/// inconclusive element `E_0 = I − Σ E_i`.
pub fn povm_from_solution(ensemble: &StateEnsemble, solution: &UdSolution) -> Result<PovmSet> {
    let duals = states::dual_basis(ensemble)?;
    let d = ensemble.dim();
    let mut elements = Vec::with_capacity(duals.len() + 1);
    let mut labels = Vec::with_capacity(duals.len() + 1);
    let mut rest = CMatrix::identity(d, d);
    for (i, (dual, &p)) in duals.iter().zip(&solution.success_probs).enumerate() {
        let e = dual * dual.adjoint() * re(p);
        rest -= &e;
        elements.push(e);
        labels.push(Outcome::State(i));
    }
    let rest = linalg::hermitize(&rest);
    let min = linalg::min_eigenvalue(&rest);
    if min < -POVM_TOL {
        return Err(Error::Inconsistent(format!(
            "inconclusive element has eigenvalue {min:.3e}; the success probabilities are infeasible"
        )));
    }
    elements.push(rest);
    labels.push(Outcome::Inconclusive);
    PovmSet::new(elements, labels)
}

#[derive(Debug, Clone)]
pub struct MixedDiscriminationReport {
    /// `Tr(ρ_target E_subset)`.
    pub target_as_subset: f64,
    /// `Tr(ρ_subset E_target)`.
    pub subset_as_target: f64,
    pub target_prior: f64,
    pub subset_prior: f64,
    /// `η_t Tr(ρ_t E_target) + η_S Tr(ρ_S E_subset)`.
    pub average_success: f64,
    /// `|average_success − solution.average_success|` when a solution was
    /// supplied.
    pub solution_deviation: Option<f64>,
}

/// Checks a filtering POVM as a pure-versus-mixed discrimination between
/// `ρ_t = |ψ_t⟩⟨ψ_t|` and the prior-weighted mixture of the other states.
pub fn verify_mixed_discrimination(
    ensemble: &StateEnsemble,
    target: usize,
    povm: &PovmSet,
    solution: Option<&FilteringSolution>,
) -> Result<MixedDiscriminationReport> {
    let zero = CMatrix::zeros(povm.dim(), povm.dim());
    let e_target = povm.element(Outcome::Target).unwrap_or(&zero);
    let e_subset = povm.element(Outcome::Subset).unwrap_or(&zero);
    if povm.completeness_residual() > POVM_TOL {
        return Err(Error::Inconsistent(format!("POVM incomplete (residual {:.3e})", povm.completeness_residual())));
    }
    let (rho_t, eta_t) = states::mixed_from_subset(ensemble, &[target])?;
    let others: Vec<usize> = (0..ensemble.len()).filter(|&k| k != target).collect();
    let (rho_s, eta_s) = states::mixed_from_subset(ensemble, &others)?;
    let target_as_subset = rho_t.expectation(e_subset);
    let subset_as_target = rho_s.expectation(e_target);
    if target_as_subset > POVM_TOL || subset_as_target > POVM_TOL {
        return Err(Error::Inconsistent(format!(
            "measurement is not unambiguous: Tr(ρ_t E_subset) = {target_as_subset:.3e}, Tr(ρ_S E_target) = {subset_as_target:.3e}"
        )));
    }
    let average_success = eta_t * rho_t.expectation(e_target) + eta_s * rho_s.expectation(e_subset);
    let solution_deviation = solution.map(|s| (s.average_success - average_success).abs());
    if let Some(dev) = solution_deviation {
        if dev > 1e-9 {
            return Err(Error::Inconsistent(format!(
                "mixed-state success {average_success} differs from the filtering optimum by {dev:.3e}"
            )));
        }
    }
    Ok(MixedDiscriminationReport {
        target_as_subset,
        subset_as_target,
        target_prior: eta_t,
        subset_prior: eta_s,
        average_success,
        solution_deviation,
    })
}

// ---------------------------------------------------------------------------
// Brute-force oracle

/// Exhaustive grid search over `p ∈ [0, 1]^N` with an eigenvalue PSD test,
/// followed by a zooming local refinement around the best cell.
///
/// For fixed leading coordinates, feasibility is monotone in the last one,
/// so that coordinate is located by bisection over its grid indices; this
/// finds exactly the cell a full scan would. Ties in `P` go to the
/// lexicographically smallest `p`.
pub fn grid_oracle_ud(ensemble: &StateEnsemble, resolution: usize) -> Result<UdSolution> {
    let n = ensemble.len();
    if n == 0 || n > 3 {
        return Err(Error::InvalidParameter(format!("grid oracle supports 1 to 3 states, got {n}")));
    }
    let resolution = resolution.max(2);
    let g = states::gram(ensemble);
    let priors = ensemble.priors();
    let mut lo = vec![0.0; n];
    let mut hi = vec![1.0; n];
    let mut best = grid_pass(g.entries(), priors, &lo, &hi, resolution);
    let mut h = 1.0 / resolution as f64;
    let zoom = resolution.min(40);
    while h > 1e-9 {
        let Some((_, ref center)) = best else { break };
        for k in 0..n {
            lo[k] = (center[k] - 2.0 * h).max(0.0);
            hi[k] = (center[k] + 2.0 * h).min(1.0);
        }
        if let Some(found) = grid_pass(g.entries(), priors, &lo, &hi, zoom) {
            if best.as_ref().is_none_or(|b| better(&found, b)) {
                best = Some(found);
            }
        }
        h *= 4.0 / zoom as f64;
    }
    let probs = best.map(|(_, p)| p).unwrap_or_else(|| vec![0.0; n]);
    Ok(UdSolution::from_probs(ensemble, probs))
}

type Candidate = (f64, Vec<f64>);

fn better(a: &Candidate, b: &Candidate) -> bool {
    match a.0.total_cmp(&b.0) {
        Ordering::Greater => true,
        Ordering::Less => false,
        Ordering::Equal => a.1.partial_cmp(&b.1) == Some(Ordering::Less),
    }
}

fn grid_pass(gram: &CMatrix, priors: &[f64], lo: &[f64], hi: &[f64], resolution: usize) -> Option<Candidate> {
    let n = priors.len();
    let point = |k: usize, idx: usize| lo[k] + (hi[k] - lo[k]) * idx as f64 / resolution as f64;
    let cells = resolution + 1;
    let prefixes = cells.pow((n - 1) as u32);
    let feasible = |p: &[f64]| linalg::min_eigenvalue(&failure_gram(gram, p)) >= -1e-12;
    (0..prefixes)
        .into_par_iter()
        .filter_map(|code| {
            let mut p = vec![0.0; n];
            let mut rem = code;
            for k in (0..n - 1).rev() {
                p[k] = point(k, rem % cells);
                rem /= cells;
            }
            let last = n - 1;
            p[last] = point(last, 0);
            if !feasible(&p) {
                return None;
            }
            if priors[last] > 0.0 {
                let (mut ok, mut bad) = (0usize, cells);
                p[last] = point(last, resolution);
                if feasible(&p) {
                    ok = resolution;
                } else {
                    bad = resolution;
                    while bad - ok > 1 {
                        let mid = (ok + bad) / 2;
                        p[last] = point(last, mid);
                        if feasible(&p) {
                            ok = mid;
                        } else {
                            bad = mid;
                        }
                    }
                }
                let _ = bad;
                p[last] = point(last, ok);
            }
            let value = p.iter().zip(priors).map(|(a, b)| a * b).sum();
            Some((value, p))
        })
        .reduce_with(|a, b| if better(&b, &a) { b } else { a })
}
