//! Single-photon propagation through a mesh, ideal and noisy.
//!
//! Detection probabilities are squared output amplitudes; for a bright
//! classical beam they equal normalized detector intensities, so no photon
//! counting is done unless [`NoiseModel::shots_per_trial`] asks for it.
//!
//! Noisy runs are Monte Carlo averages over independently perturbed meshes.
//! Every trial draws from its own ChaCha stream keyed by
//! `(seed, prepared state, trial)` and trials are reduced in fixed-size
//! blocks in index order, so reports do not depend on thread scheduling.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Normal};
use rayon::prelude::*;

use crate::dilation::{embed, DilatedStates, UnitaryMatrix};
use crate::discrimination::Outcome;
use crate::linalg::{CVector, C64};
use crate::mesh::{apply_block, middle_plate_deg, rotation_block, MeshPlan};
use crate::states::{PureState, StateEnsemble};
use crate::{Error, Result};

pub const DEFAULT_TRIALS: usize = 100_000;

/// Per-stage Gaussian phase jitter used for the reported noisy runs, radians.
pub const DOCUMENTED_PHASE_JITTER: f64 = 0.2;

/// Gaussian jitter on every middle half-wave plate for the reported noisy
/// runs, degrees.
pub const DOCUMENTED_WAVEPLATE_JITTER_DEG: f64 = 5.5;

const BLOCK: usize = 4096;

/// Anything that maps rail amplitudes to rail amplitudes.
pub trait Interferometer {
    fn dim(&self) -> usize;
    fn transform(&self, input: &CVector) -> CVector;
}

impl Interferometer for MeshPlan {
    fn dim(&self) -> usize {
        self.dim
    }

    fn transform(&self, input: &CVector) -> CVector {
        self.apply(input)
    }
}

impl Interferometer for UnitaryMatrix {
    fn dim(&self) -> usize {
        UnitaryMatrix::dim(self)
    }

    fn transform(&self, input: &CVector) -> CVector {
        self.apply(input)
    }
}

/// Fixed extra phase on one rail just before stage `position` (or after the
/// last stage when `position == stages.len()`).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ArmOffset {
    pub position: usize,
    pub rail: usize,
    pub radians: f64,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct NoiseModel {
    /// Standard deviation of the fresh Gaussian phase added to every
    /// stage's `φ` in each trial, radians.
    pub phase_jitter_sigma: f64,
    /// Fixed error added to a stage's `φ`, keyed by stage index.
    #[serde(default)]
    pub systematic_phase_offsets: BTreeMap<usize, f64>,
    /// Fixed phase errors on individual rails between stages.
    #[serde(default)]
    pub arm_offsets: Vec<ArmOffset>,
    /// Standard deviation of the middle-waveplate angle error, degrees.
    pub waveplate_jitter_sigma: f64,
    pub trials: usize,
    pub seed: u64,
    /// Photons detected per trial; `None` uses exact probabilities.
    #[serde(default)]
    pub shots_per_trial: Option<u64>,
}

impl NoiseModel {
    pub fn noiseless() -> Self {
        Self {
            phase_jitter_sigma: 0.0,
            systematic_phase_offsets: BTreeMap::new(),
            arm_offsets: Vec::new(),
            waveplate_jitter_sigma: 0.0,
            trials: 1,
            seed: 0,
            shots_per_trial: None,
        }
    }

    /// The noise settings behind the simulated experimental rates.
    pub fn documented(seed: u64, trials: usize) -> Self {
        Self {
            phase_jitter_sigma: DOCUMENTED_PHASE_JITTER,
            waveplate_jitter_sigma: DOCUMENTED_WAVEPLATE_JITTER_DEG,
            trials,
            seed,
            ..Self::noiseless()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |x: f64| x.is_nan() || x < 0.0;
        if bad(self.phase_jitter_sigma) || bad(self.waveplate_jitter_sigma) {
            return Err(Error::InvalidParameter("noise sigmas must be non-negative".into()));
        }
        if self.trials == 0 {
            return Err(Error::InvalidParameter("trials must be at least 1".into()));
        }
        if self.shots_per_trial == Some(0) {
            return Err(Error::InvalidParameter("shots_per_trial must be at least 1".into()));
        }
        Ok(())
    }

    /// True when every trial would see the same mesh and no sampling.
    pub fn is_deterministic(&self) -> bool {
        self.phase_jitter_sigma == 0.0 && self.waveplate_jitter_sigma == 0.0 && self.shots_per_trial.is_none()
    }
}

/// Rows are prepared states, columns output rails.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DetectionReport {
    pub row_labels: Vec<String>,
    pub matrix: Vec<Vec<f64>>,
    pub trials: usize,
    /// Each row was divided by its own sum.
    pub normalized: bool,
}

impl DetectionReport {
    pub fn rails(&self) -> usize {
        self.matrix.first().map_or(0, Vec::len)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Rates {
    pub success: f64,
    pub error: f64,
    pub inconclusive: f64,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct OutcomeSummary {
    pub success_rate: f64,
    pub error_rate: f64,
    pub inconclusive_rate: f64,
    pub per_state: Vec<Rates>,
}

/// What each output rail reports, and which outcome is correct for each
/// prepared state.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeMap {
    pub rail_outcomes: Vec<Outcome>,
    pub correct: Vec<Outcome>,
}

impl OutcomeMap {
    /// Reads rail roles off a dilation. `target` selects filtering roles.
    pub fn from_dilation(dilated: &DilatedStates, states: usize, target: Option<usize>) -> Result<Self> {
        let total = dilated.total_dim();
        let mut rail_outcomes = vec![None; total];
        for (outcome, rails) in dilated.outcome_rails() {
            for rail in rails {
                if rail >= total || rail_outcomes[rail].replace(outcome).is_some() {
                    return Err(Error::InvalidOutcomeRails(format!("rail {} mapped twice or out of range", rail + 1)));
                }
            }
        }
        let rail_outcomes = rail_outcomes
            .into_iter()
            .enumerate()
            .map(|(k, o)| o.ok_or_else(|| Error::InvalidOutcomeRails(format!("rail {} unmapped", k + 1))))
            .collect::<Result<Vec<_>>>()?;
        let correct = (0..states)
            .map(|i| match target {
                Some(t) if i == t => Outcome::Target,
                Some(_) => Outcome::Subset,
                None => Outcome::State(i),
            })
            .collect();
        Ok(Self { rail_outcomes, correct })
    }

    /// UD on `states` states with state `i` on rail `i` and every further
    /// rail inconclusive.
    pub fn ud(states: usize, rails: usize) -> Self {
        let rail_outcomes =
            (0..rails).map(|k| if k < states { Outcome::State(k) } else { Outcome::Inconclusive }).collect();
        Self { rail_outcomes, correct: (0..states).map(Outcome::State).collect() }
    }

    /// Filtering with the target on rail 0, the subset on rails
    /// `1..system_dim` and the rest inconclusive.
    pub fn filtering(states: usize, target: usize, system_dim: usize, rails: usize) -> Self {
        let rail_outcomes = (0..rails)
            .map(|k| match k {
                0 => Outcome::Target,
                k if k < system_dim => Outcome::Subset,
                _ => Outcome::Inconclusive,
            })
            .collect();
        let correct = (0..states).map(|i| if i == target { Outcome::Target } else { Outcome::Subset }).collect();
        Self { rail_outcomes, correct }
    }
}

/// `|(U · embed(ψ))_j|²` for every output rail.
pub fn propagate_ideal<I: Interferometer + ?Sized>(mesh: &I, state: &PureState) -> Result<Vec<f64>> {
    if state.dim() > mesh.dim() {
        return Err(Error::DimensionMismatch { expected: mesh.dim(), found: state.dim() });
    }
    let out = mesh.transform(&embed(state.amplitudes(), mesh.dim()));
    Ok(out.iter().map(|z| z.norm_sqr()).collect())
}

/// One perturbed realization of `plan`.
struct NoisyMesh<'a> {
    plan: &'a MeshPlan,
    phases: Vec<f64>,
    mixing: Vec<(f64, f64)>,
}

impl<'a> NoisyMesh<'a> {
    fn sample(plan: &'a MeshPlan, noise: &NoiseModel, rng: &mut ChaCha8Rng) -> Self {
        let phase_noise = Normal::new(0.0, noise.phase_jitter_sigma).expect("validated sigma");
        let plate_noise = Normal::new(0.0, noise.waveplate_jitter_sigma).expect("validated sigma");
        let mut phases = Vec::with_capacity(plan.stages.len());
        let mut mixing = Vec::with_capacity(plan.stages.len());
        for (idx, stage) in plan.stages.iter().enumerate() {
            let mut phi = stage.phi + noise.systematic_phase_offsets.get(&idx).copied().unwrap_or(0.0);
            if noise.phase_jitter_sigma > 0.0 {
                phi += phase_noise.sample(rng);
            }
            let (t, r) = if noise.waveplate_jitter_sigma > 0.0 {
                let theta = (middle_plate_deg(stage.t) + plate_noise.sample(rng)).to_radians();
                ((2.0 * theta).cos(), (2.0 * theta).sin())
            } else {
                (stage.t, stage.r())
            };
            phases.push(phi);
            mixing.push((t, r));
        }
        Self { plan, phases, mixing }
    }

    fn apply(&self, input: &CVector, arm_offsets: &[ArmOffset]) -> CVector {
        let mut v = input.clone();
        let kick = |v: &mut CVector, position: usize| {
            for off in arm_offsets.iter().filter(|o| o.position == position) {
                v[off.rail] *= C64::from_polar(1.0, off.radians);
            }
        };
        for (idx, stage) in self.plan.stages.iter().enumerate() {
            kick(&mut v, idx);
            let (t, r) = self.mixing[idx];
            apply_block(&mut v, stage.rails, &rotation_block(t, r, self.phases[idx]));
        }
        kick(&mut v, self.plan.stages.len());
        for (k, &theta) in self.plan.output_phases.iter().enumerate() {
            v[k] *= C64::from_polar(1.0, theta);
        }
        v
    }
}

fn trial_rng(seed: u64, state: usize, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((state as u64) << 40) | trial as u64);
    rng
}

fn sample_counts(probs: &[f64], shots: u64, rng: &mut impl Rng) -> Vec<f64> {
    let mut remaining = shots;
    let mut mass = 1.0;
    let mut counts = vec![0.0; probs.len()];
    for (k, &p) in probs.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        let n = if k + 1 == probs.len() || mass <= 0.0 {
            remaining
        } else {
            let q = (p / mass).clamp(0.0, 1.0);
            Binomial::new(remaining, q).expect("probability in [0, 1]").sample(rng)
        };
        counts[k] = n as f64;
        remaining -= n;
        mass -= p;
    }
    counts
}

/// Prepares each ensemble state in turn, averages detector probabilities
/// over noisy realizations of `plan`, and normalizes every row.
pub fn run_ensemble(plan: &MeshPlan, ensemble: &StateEnsemble, noise: &NoiseModel) -> Result<DetectionReport> {
    noise.validate()?;
    plan.validate()?;
    if ensemble.dim() > plan.dim {
        return Err(Error::DimensionMismatch { expected: plan.dim, found: ensemble.dim() });
    }
    for off in &noise.arm_offsets {
        if off.rail >= plan.dim || off.position > plan.stages.len() {
            return Err(Error::InvalidParameter(format!(
                "arm offset at position {} on rail {} is outside the mesh",
                off.position,
                off.rail + 1
            )));
        }
    }
    let trials = if noise.is_deterministic() { 1 } else { noise.trials };
    let rails = plan.dim;
    let matrix = ensemble
        .states()
        .iter()
        .enumerate()
        .map(|(si, state)| {
            let input = embed(state.amplitudes(), rails);
            let blocks = trials.div_ceil(BLOCK);
            let partials: Vec<Vec<f64>> = (0..blocks)
                .into_par_iter()
                .map(|b| {
                    let mut acc = vec![0.0; rails];
                    for trial in b * BLOCK..((b + 1) * BLOCK).min(trials) {
                        let mut rng = trial_rng(noise.seed, si, trial);
                        let mesh = NoisyMesh::sample(plan, noise, &mut rng);
                        let out = mesh.apply(&input, &noise.arm_offsets);
                        let probs: Vec<f64> = out.iter().map(|z| z.norm_sqr()).collect();
                        let sample = match noise.shots_per_trial {
                            Some(shots) => {
                                let counts = sample_counts(&probs, shots, &mut rng);
                                counts.into_iter().map(|c| c / shots as f64).collect()
                            }
                            None => probs,
                        };
                        for (a, s) in acc.iter_mut().zip(sample) {
                            *a += s;
                        }
                    }
                    acc
                })
                .collect();
            let mut row = partials.into_iter().fold(vec![0.0; rails], |mut total, part| {
                for (t, p) in total.iter_mut().zip(part) {
                    *t += p;
                }
                total
            });
            let sum: f64 = row.iter().sum();
            if sum > 0.0 {
                row.iter_mut().for_each(|x| *x /= sum);
            }
            row
        })
        .collect();
    Ok(DetectionReport { row_labels: ensemble.labels().to_vec(), matrix, trials, normalized: true })
}

/// Prior-weighted success, error and inconclusive rates.
pub fn summarize(report: &DetectionReport, map: &OutcomeMap, priors: &[f64]) -> Result<OutcomeSummary> {
    if map.rail_outcomes.len() != report.rails() {
        return Err(Error::InvalidOutcomeRails(format!(
            "{} rails in the report, {} mapped",
            report.rails(),
            map.rail_outcomes.len()
        )));
    }
    if report.matrix.len() != priors.len() || map.correct.len() != priors.len() {
        return Err(Error::DimensionMismatch { expected: report.matrix.len(), found: priors.len() });
    }
    let mut per_state = Vec::with_capacity(priors.len());
    for (row, &correct) in report.matrix.iter().zip(&map.correct) {
        let mut rates = Rates { success: 0.0, error: 0.0, inconclusive: 0.0 };
        for (&p, &outcome) in row.iter().zip(&map.rail_outcomes) {
            if outcome == Outcome::Inconclusive {
                rates.inconclusive += p;
            } else if outcome == correct {
                rates.success += p;
            } else {
                rates.error += p;
            }
        }
        per_state.push(rates);
    }
    let weighted = |f: fn(&Rates) -> f64| per_state.iter().zip(priors).map(|(r, &w)| w * f(r)).sum::<f64>();
    Ok(OutcomeSummary {
        success_rate: weighted(|r| r.success),
        error_rate: weighted(|r| r.error),
        inconclusive_rate: weighted(|r| r.inconclusive),
        per_state,
    })
}

/// Error rate for a fixed phase `radians` on each single arm of `plan`, one
/// arm at a time; arms that carry no light for any input are included.
pub fn single_arm_offset_sweep(
    plan: &MeshPlan,
    ensemble: &StateEnsemble,
    map: &OutcomeMap,
    radians: f64,
) -> Result<Vec<(ArmOffset, OutcomeSummary)>> {
    let mut out = Vec::new();
    for position in 0..=plan.stages.len() {
        for rail in 0..plan.dim {
            let offset = ArmOffset { position, rail, radians };
            let noise = NoiseModel { arm_offsets: vec![offset], ..NoiseModel::noiseless() };
            let report = run_ensemble(plan, ensemble, &noise)?;
            out.push((offset, summarize(&report, map, ensemble.priors())?));
        }
    }
    Ok(out)
}
