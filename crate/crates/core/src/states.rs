//! Pure states over optical rails, prepared ensembles, mixed states and
//! Gram-matrix machinery.
//!
//! A single photon spread over `d` rails is a vector of `d` complex
//! amplitudes; only the one-photon sector is modeled, so a creation
//! operator on rail `j` is just the `j`-th amplitude. Rails are indexed
//! from 0 internally and displayed from 1.

use std::collections::BTreeSet;

use crate::linalg::{self, re, CMatrix, CVector};
use crate::{Error, Result};

/// Normalization tolerance for [`PureState`] and prior sums.
pub const NORM_TOL: f64 = 1e-12;

/// Default threshold on the smallest Gram eigenvalue below which an
/// ensemble counts as linearly dependent.
pub const DEFAULT_INDEPENDENCE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    amplitudes: CVector,
}

impl PureState {
    pub fn new(amplitudes: CVector) -> Result<Self> {
        if amplitudes.len() < 2 {
            return Err(Error::InvalidParameter(format!("a state needs at least 2 rails, got {}", amplitudes.len())));
        }
        let norm_sqr = amplitudes.norm_squared();
        if !norm_sqr.is_finite() || (norm_sqr - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized { index: 0, norm_sqr });
        }
        Ok(Self { amplitudes })
    }

    pub fn from_reals(values: &[f64]) -> Result<Self> {
        Self::new(linalg::vector_from_reals(values))
    }

    /// Rescales `amplitudes` to unit norm.
    pub fn normalized(amplitudes: CVector) -> Result<Self> {
        let norm = amplitudes.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::NotNormalized { index: 0, norm_sqr: norm * norm });
        }
        Self::new(amplitudes / re(norm))
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    /// `⟨self|other⟩`.
    pub fn overlap(&self, other: &PureState) -> crate::C64 {
        self.amplitudes.dotc(&other.amplitudes)
    }

    /// `|ψ⟩⟨ψ|`.
    pub fn projector(&self) -> CMatrix {
        &self.amplitudes * self.amplitudes.adjoint()
    }

    /// Phase-insensitive equality: `|⟨x|y⟩| = 1` within `tol`.
    pub fn same_ray(&self, other: &PureState, tol: f64) -> bool {
        self.dim() == other.dim() && (1.0 - self.overlap(other).norm()).abs() <= tol
    }
}

/// A discrimination problem: states prepared with known a-priori
/// probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct StateEnsemble {
    states: Vec<PureState>,
    priors: Vec<f64>,
    labels: Vec<String>,
}

impl StateEnsemble {
    pub fn new(states: Vec<PureState>, priors: Vec<f64>, labels: Vec<String>) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::InvalidEnsemble("no states given".into()));
        }
        if states.len() != priors.len() || states.len() != labels.len() {
            return Err(Error::InvalidEnsemble(format!(
                "{} states, {} priors, {} labels",
                states.len(),
                priors.len(),
                labels.len()
            )));
        }
        let d = states[0].dim();
        for s in &states[1..] {
            if s.dim() != d {
                return Err(Error::DimensionMismatch { expected: d, found: s.dim() });
            }
        }
        if let Some(bad) = priors.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::InvalidEnsemble(format!("negative or non-finite prior {bad}")));
        }
        let total: f64 = priors.iter().sum();
        if (total - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidEnsemble(format!("priors sum to {total}, not 1")));
        }
        Ok(Self { states, priors, labels })
    }

    /// Equal priors and labels `ψ1, ψ2, …`.
    pub fn uniform(states: Vec<PureState>) -> Result<Self> {
        let n = states.len();
        let priors = vec![1.0 / n.max(1) as f64; n];
        Self::new(states, priors, default_labels(n))
    }

    pub fn with_priors(states: Vec<PureState>, priors: Vec<f64>) -> Result<Self> {
        let n = states.len();
        Self::new(states, priors, default_labels(n))
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Hilbert-space dimension (number of system rails).
    pub fn dim(&self) -> usize {
        self.states[0].dim()
    }

    pub fn states(&self) -> &[PureState] {
        &self.states
    }

    pub fn state(&self, i: usize) -> &PureState {
        &self.states[i]
    }

    pub fn priors(&self) -> &[f64] {
        &self.priors
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Reorders states, priors and labels so that entry `k` of the result
    /// is entry `order[k]` of `self`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.len()];
        if order.len() != self.len() || order.iter().any(|&i| i >= self.len() || std::mem::replace(&mut seen[i], true))
        {
            return Err(Error::InvalidParameter("order is not a permutation".into()));
        }
        Self::new(
            order.iter().map(|&i| self.states[i].clone()).collect(),
            order.iter().map(|&i| self.priors[i]).collect(),
            order.iter().map(|&i| self.labels[i].clone()).collect(),
        )
    }

    /// `Σ η_i |ψ_i⟩⟨ψ_i|`.
    pub fn average_density(&self) -> CMatrix {
        let d = self.dim();
        self.states.iter().zip(&self.priors).fold(CMatrix::zeros(d, d), |acc, (s, &p)| acc + s.projector() * re(p))
    }
}

fn default_labels(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("ψ{i}")).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixedState {
    density: CMatrix,
}

impl MixedState {
    pub fn new(density: CMatrix) -> Result<Self> {
        if !density.is_square() {
            return Err(Error::DimensionMismatch { expected: density.nrows(), found: density.ncols() });
        }
        let herm = linalg::hermiticity_residual(&density);
        if herm > NORM_TOL {
            return Err(Error::InvalidParameter(format!("density not Hermitian ({herm:.3e})")));
        }
        let trace = density.trace();
        if (trace.re - 1.0).abs() > NORM_TOL || trace.im.abs() > NORM_TOL {
            return Err(Error::InvalidParameter(format!("density trace {trace}")));
        }
        let min = linalg::min_eigenvalue(&density);
        if min < -NORM_TOL {
            return Err(Error::InvalidParameter(format!("density has eigenvalue {min:.3e}")));
        }
        Ok(Self { density })
    }

    pub fn density(&self) -> &CMatrix {
        &self.density
    }

    pub fn dim(&self) -> usize {
        self.density.nrows()
    }

    /// `Tr(ρ E)`, real part.
    pub fn expectation(&self, operator: &CMatrix) -> f64 {
        (&self.density * operator).trace().re
    }
}

/// Pairwise overlaps `Γ_ij = ⟨ψ_i|ψ_j⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    entries: CMatrix,
}

impl GramMatrix {
    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.nrows() == 0
    }

    pub fn get(&self, i: usize, j: usize) -> crate::C64 {
        self.entries[(i, j)]
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        linalg::hermitian_eigenvalues(&self.entries)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        linalg::min_eigenvalue(&self.entries)
    }
}

pub fn gram(ensemble: &StateEnsemble) -> GramMatrix {
    let vectors: Vec<CVector> = ensemble.states().iter().map(|s| s.amplitudes().clone()).collect();
    let mut entries = linalg::gram_of(&vectors);
    // exact unit diagonal and Hermitian symmetry
    let n = entries.nrows();
    for i in 0..n {
        entries[(i, i)] = re(1.0);
        for j in (i + 1)..n {
            entries[(j, i)] = entries[(i, j)].conj();
        }
    }
    GramMatrix { entries }
}

pub fn is_linearly_independent(ensemble: &StateEnsemble, tol: f64) -> bool {
    ensemble.len() <= ensemble.dim() && gram(ensemble).min_eigenvalue() > tol
}

/// Reciprocal vectors `ψ̃_i` in the span of the inputs with
/// `⟨ψ̃_i|ψ_j⟩ = δ_ij`.
pub fn dual_basis(ensemble: &StateEnsemble) -> Result<Vec<CVector>> {
    let g = gram(ensemble);
    let min_eigenvalue = g.min_eigenvalue();
    if min_eigenvalue <= DEFAULT_INDEPENDENCE_TOL {
        return Err(Error::LinearlyDependent { min_eigenvalue });
    }
    let inv = g.entries().clone().try_inverse().ok_or(Error::LinearlyDependent { min_eigenvalue })?;
    let n = ensemble.len();
    let d = ensemble.dim();
    Ok((0..n)
        .map(|i| (0..n).fold(CVector::zeros(d), |acc, k| acc + ensemble.state(k).amplitudes() * inv[(k, i)]))
        .collect())
}

/// The mixture `Σ_{k∈S} η_k |ψ_k⟩⟨ψ_k| / Σ_{k∈S} η_k` together with its
/// total prior `Σ_{k∈S} η_k`.
pub fn mixed_from_subset(ensemble: &StateEnsemble, indices: &[usize]) -> Result<(MixedState, f64)> {
    let subset: BTreeSet<usize> = indices.iter().copied().collect();
    if subset.is_empty() {
        return Err(Error::InvalidParameter("empty subset".into()));
    }
    if let Some(&bad) = subset.iter().find(|&&i| i >= ensemble.len()) {
        return Err(Error::InvalidParameter(format!("state index {bad} out of range")));
    }
    let prior: f64 = subset.iter().map(|&k| ensemble.priors()[k]).sum();
    if prior <= 0.0 {
        return Err(Error::InvalidParameter("subset has zero total prior".into()));
    }
    let d = ensemble.dim();
    let mut density = subset
        .iter()
        .fold(CMatrix::zeros(d, d), |acc, &k| acc + ensemble.state(k).projector() * re(ensemble.priors()[k] / prior));
    density = linalg::hermitize(&density);
    Ok((MixedState::new(density)?, prior))
}

/// The three-state discrimination benchmark:
/// `ψ1 = (√(2/3), 0, 1/√3)`, `ψ2,3 = (0, ±1/√3, √(2/3))`, equal priors.
pub fn sd_paper_set() -> StateEnsemble {
    let a = (2.0f64 / 3.0).sqrt();
    let b = 1.0 / 3f64.sqrt();
    let states = vec![
        PureState::from_reals(&[a, 0.0, b]),
        PureState::from_reals(&[0.0, b, a]),
        PureState::from_reals(&[0.0, -b, a]),
    ]
    .into_iter()
    .collect::<Result<Vec<_>>>()
    .expect("benchmark states are normalized");
    StateEnsemble::uniform(states).expect("benchmark ensemble is valid")
}

/// The filtering family `ψ1 = (√(1−a²), 0, a)`, `ψ2,3 = (0, ±1/√2, 1/√2)`
/// with equal priors, for `0 < a ≤ 1`.
pub fn filter_family(a: f64) -> Result<StateEnsemble> {
    if !(a > 0.0 && a <= 1.0) {
        return Err(Error::InvalidParameter(format!("filter family needs 0 < a <= 1, got {a}")));
    }
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let states = vec![
        PureState::from_reals(&[(1.0 - a * a).sqrt(), 0.0, a])?,
        PureState::from_reals(&[0.0, h, h])?,
        PureState::from_reals(&[0.0, -h, h])?,
    ];
    StateEnsemble::uniform(states)
}

/// The standard basis of `C^d` as an ensemble with equal priors.
pub fn orthonormal_basis(d: usize) -> Result<StateEnsemble> {
    let states = (0..d)
        .map(|k| {
            let mut v = CVector::zeros(d);
            v[k] = re(1.0);
            PureState::new(v)
        })
        .collect::<Result<Vec<_>>>()?;
    StateEnsemble::uniform(states)
}
