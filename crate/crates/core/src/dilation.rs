//! Neumark dilation: output states in the system + ancilla rail space and
//! the unitary mapping the embedded inputs onto them.
//!
//! An input state occupies rails `0..d`; the `r` ancilla rails start in
//! vacuum. A photon found on an ancilla rail is the inconclusive outcome.

use crate::discrimination::{FilteringSolution, Outcome, PovmSet, UdSolution, PSD_TOL};
use crate::linalg::{self, re, CMatrix, CVector};
use crate::states::{self, StateEnsemble};
use crate::{Error, Result};

/// Eigenvalues at or below this are dropped when factoring a failure Gram.
pub const RANK_TOL: f64 = 1e-9;

/// Unitarity tolerance `max |U†U − I|`.
pub const UNITARY_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct DilatedStates {
    pub outputs: Vec<CVector>,
    pub system_dim: usize,
    pub ancilla_dim: usize,
    /// Rails (0-based) signalling each conclusive outcome.
    pub conclusive_rails: Vec<(Outcome, Vec<usize>)>,
    pub inconclusive_rails: Vec<usize>,
}

impl DilatedStates {
    pub fn total_dim(&self) -> usize {
        self.system_dim + self.ancilla_dim
    }

    /// Conclusive rail sets followed by the inconclusive one; a partition of
    /// all output rails.
    pub fn outcome_rails(&self) -> Vec<(Outcome, Vec<usize>)> {
        let mut rails = self.conclusive_rails.clone();
        rails.push((Outcome::Inconclusive, self.inconclusive_rails.clone()));
        rails
    }

    pub fn gram(&self) -> CMatrix {
        linalg::gram_of(&self.outputs)
    }

    /// `Σ_{conclusive rails} |out_i|²` for every output.
    pub fn conclusive_weights(&self) -> Vec<f64> {
        self.outputs.iter().map(|o| (0..self.system_dim).map(|k| o[k].norm_sqr()).sum()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryMatrix {
    entries: CMatrix,
}

impl UnitaryMatrix {
    pub fn new(entries: CMatrix) -> Result<Self> {
        if !entries.is_square() {
            return Err(Error::DimensionMismatch { expected: entries.nrows(), found: entries.ncols() });
        }
        let residual = linalg::unitarity_residual(&entries);
        if residual.is_nan() || residual > UNITARY_TOL {
            return Err(Error::NotUnitary { residual });
        }
        Ok(Self { entries })
    }

    pub fn identity(n: usize) -> Self {
        Self { entries: CMatrix::identity(n, n) }
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    pub fn into_entries(self) -> CMatrix {
        self.entries
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn residual(&self) -> f64 {
        linalg::unitarity_residual(&self.entries)
    }

    pub fn apply(&self, v: &CVector) -> CVector {
        &self.entries * v
    }
}

/// Pads a system state with vacuum ancilla rails.
pub fn embed(amplitudes: &CVector, total_dim: usize) -> CVector {
    let mut v = CVector::zeros(total_dim);
    v.rows_mut(0, amplitudes.len()).copy_from(amplitudes);
    v
}

/// `F` (`r × N`) with `F†F = m`, from the eigenvectors of `m` whose
/// eigenvalues exceed [`RANK_TOL`], largest first. Each row is rephased so
/// its first nonzero entry is real and non-negative.
pub fn factor_psd(m: &CMatrix) -> CMatrix {
    let n = m.nrows();
    let (vals, vecs) = linalg::hermitian_eigen(m);
    let kept: Vec<usize> = (0..n).rev().filter(|&k| vals[k] > RANK_TOL).collect();
    let mut f = CMatrix::zeros(kept.len(), n);
    for (row, &k) in kept.iter().enumerate() {
        let scale = vals[k].sqrt();
        for i in 0..n {
            f[(row, i)] = vecs[(i, k)].conj() * scale;
        }
        if let Some(lead) = (0..n).map(|i| f[(row, i)]).find(|z| z.norm() > 1e-12) {
            let phase = lead.conj() / lead.norm();
            for i in 0..n {
                f[(row, i)] *= phase;
            }
        }
    }
    f
}

/// Outputs `√p_i e_i ⊕ f_i` for an unambiguous discrimination strategy, with
/// the failure vectors `f_i` factored from `Γ − diag(p)`.
pub fn build_outputs_ud(ensemble: &StateEnsemble, solution: &UdSolution) -> Result<DilatedStates> {
    let min = linalg::min_eigenvalue(&solution.failure_gram);
    if min < -PSD_TOL {
        return Err(Error::Infeasible(format!("failure Gram has eigenvalue {min:.3e}")));
    }
    let n = ensemble.len();
    let d = ensemble.dim();
    if n > d {
        return Err(Error::LinearlyDependent { min_eigenvalue: 0.0 });
    }
    let f = factor_psd(&solution.failure_gram);
    let r = f.nrows();
    let outputs = (0..n)
        .map(|i| {
            let mut v = CVector::zeros(d + r);
            v[i] = re(solution.success_probs[i].max(0.0).sqrt());
            for m in 0..r {
                v[d + m] = f[(m, i)];
            }
            v
        })
        .collect();
    let conclusive_rails = (0..n).map(|i| (Outcome::State(i), vec![i])).collect();
    // system rails beyond the last state stay dark in an ideal mesh; they
    // join the inconclusive outcome so the rails remain a partition
    let inconclusive_rails = (n..d).chain(d..d + r).collect();
    Ok(DilatedStates { outputs, system_dim: d, ancilla_dim: r, conclusive_rails, inconclusive_rails })
}

/// Outputs for filtering: the target's conclusive amplitude sits on rail 0,
/// subset conclusive parts are factored from their conclusive Gram onto
/// rails `1..d`, and the scalar failure amplitudes share one ancilla rail.
pub fn build_outputs_filtering(
    ensemble: &StateEnsemble,
    target: usize,
    solution: &FilteringSolution,
) -> Result<DilatedStates> {
    if solution.target != target || target >= ensemble.len() {
        return Err(Error::InvalidParameter(format!("solution is for target {}, not {target}", solution.target)));
    }
    let d = ensemble.dim();
    let conclusive = solution.conclusive_gram(ensemble);
    let min = linalg::min_eigenvalue(&conclusive);
    if min < -PSD_TOL {
        return Err(Error::Infeasible(format!("subset conclusive Gram has eigenvalue {min:.3e}")));
    }
    let k = factor_psd(&conclusive);
    if k.nrows() > d - 1 {
        return Err(Error::Infeasible(format!(
            "subset conclusive parts need {} rails, only {} available",
            k.nrows(),
            d - 1
        )));
    }
    let f = &solution.failure_amplitudes;
    let r = usize::from(f.iter().any(|z| z.norm() > 1e-12));
    let mut outputs = vec![CVector::zeros(d + r); ensemble.len()];
    outputs[target][0] = re(solution.success_target.max(0.0).sqrt());
    for (a, &idx) in solution.subset.iter().enumerate() {
        for m in 0..k.nrows() {
            outputs[idx][1 + m] = k[(m, a)];
        }
    }
    if r == 1 {
        for (out, amp) in outputs.iter_mut().zip(f) {
            out[d] = *amp;
        }
    }
    Ok(DilatedStates {
        outputs,
        system_dim: d,
        ancilla_dim: r,
        conclusive_rails: vec![(Outcome::Target, vec![0]), (Outcome::Subset, (1..d).collect())],
        inconclusive_rails: (d..d + r).collect(),
    })
}

/// Unitary `U` with `U (ψ_i ⊕ 0) = out_i`.
///
/// Embedded inputs and outputs are orthonormalized by Gram-Schmidt in index
/// order, both bases are completed over the standard basis vectors in index
/// order, and `U` maps one completed basis onto the other.
pub fn build_unitary(ensemble: &StateEnsemble, dilated: &DilatedStates) -> Result<UnitaryMatrix> {
    let total = dilated.total_dim();
    if dilated.outputs.len() != ensemble.len() {
        return Err(Error::DimensionMismatch { expected: ensemble.len(), found: dilated.outputs.len() });
    }
    if ensemble.dim() != dilated.system_dim {
        return Err(Error::DimensionMismatch { expected: dilated.system_dim, found: ensemble.dim() });
    }
    let inputs: Vec<CVector> = ensemble.states().iter().map(|s| embed(s.amplitudes(), total)).collect();
    let g_in = states::gram(ensemble);
    let g_out = dilated.gram();
    let mut worst = (0, 0, 0.0);
    for i in 0..inputs.len() {
        for j in 0..inputs.len() {
            let dev = (g_in.get(i, j) - g_out[(i, j)]).norm();
            if dev > worst.2 {
                worst = (i, j, dev);
            }
        }
    }
    if worst.2 > 1e-9 {
        return Err(Error::GramMismatch { i: worst.0, j: worst.1, deviation: worst.2 });
    }

    let mut a = Vec::new();
    let mut b = Vec::new();
    for (x, y) in inputs.iter().zip(&dilated.outputs) {
        let pushed_a = linalg::gram_schmidt_push(&mut a, x, 1e-7);
        let pushed_b = linalg::gram_schmidt_push(&mut b, y, 1e-7);
        if pushed_a != pushed_b {
            // dependency patterns differ only if the Grams do
            if pushed_a {
                a.pop();
            } else {
                b.pop();
            }
        }
    }
    let a = linalg::complete_basis(a, total);
    let b = linalg::complete_basis(b, total);
    let u = a.iter().zip(&b).fold(CMatrix::zeros(total, total), |acc, (ak, bk)| acc + bk * ak.adjoint());

    let unitary = UnitaryMatrix::new(u)?;
    for (i, (x, y)) in inputs.iter().zip(&dilated.outputs).enumerate() {
        let dev = (unitary.apply(x) - y).camax();
        if dev > 1e-9 {
            return Err(Error::GramMismatch { i, j: i, deviation: dev });
        }
    }
    Ok(unitary)
}

/// POVM induced on the system by measuring which rail the photon leaves on:
/// `E_o = A_o† A_o` with `A_o` the rows `R_o`, system columns of `U`.
pub fn extract_povm(
    unitary: &UnitaryMatrix,
    outcome_rails: &[(Outcome, Vec<usize>)],
    system_dim: usize,
) -> Result<PovmSet> {
    let total = unitary.dim();
    if system_dim > total {
        return Err(Error::DimensionMismatch { expected: total, found: system_dim });
    }
    let mut seen = vec![false; total];
    for (outcome, rails) in outcome_rails {
        for &rail in rails {
            if rail >= total {
                return Err(Error::InvalidOutcomeRails(format!("rail {} out of range", rail + 1)));
            }
            if std::mem::replace(&mut seen[rail], true) {
                return Err(Error::InvalidOutcomeRails(format!("rail {} assigned twice ({outcome})", rail + 1)));
            }
        }
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(Error::InvalidOutcomeRails(format!("rail {} not assigned", missing + 1)));
    }
    let u = unitary.entries();
    let elements = outcome_rails
        .iter()
        .map(|(_, rails)| {
            let block = CMatrix::from_fn(rails.len(), system_dim, |r, c| u[(rails[r], c)]);
            linalg::hermitize(&(block.adjoint() * block))
        })
        .collect();
    PovmSet::new(elements, outcome_rails.iter().map(|(o, _)| *o).collect())
}

/// `max |Gram(outputs) − Gram(inputs)|`.
pub fn gram_residual(ensemble: &StateEnsemble, dilated: &DilatedStates) -> f64 {
    linalg::max_abs_diff(&dilated.gram(), states::gram(ensemble).entries())
}

/// Rotates the phase of `v` so its first entry with modulus above `tol` is
/// real and positive.
pub fn canonical_phase(v: &CVector, tol: f64) -> CVector {
    match v.iter().find(|z| z.norm() > tol) {
        Some(lead) => v * (lead.conj() / lead.norm()),
        None => v.clone(),
    }
}
