//! The `optical-povm` command-line tool.
//!
//! Scenarios, plans, unitaries and reports are JSON; complex numbers are
//! `[re, im]` pairs and matrices are row-major. Text reports print
//! percentages with one decimal. States, stages and rails are 1-indexed in
//! everything a user sees.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::dilation::{self, DilatedStates, UnitaryMatrix};
use crate::discrimination::{self, FilteringSolution, Outcome, UdSolution};
use crate::linalg::{CMatrix, CVector, C64};
use crate::mesh::{self, MeshPlan};
use crate::simulator::{self, NoiseModel, OutcomeMap, OutcomeSummary, DEFAULT_TRIALS};
use crate::states::{self, PureState, StateEnsemble};
use crate::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;
pub const EXIT_IO: i32 = 4;

/// Random restarts per frame size in the projective filtering search.
pub const PVM_SEARCH_BUDGET: usize = 8;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {message}")]
    Validation { path: String, message: String },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Core(#[from] Error),
}

impl CliError {
    fn validation(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Validation { path: path.into(), message: message.into() }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Validation { .. } => EXIT_VALIDATION,
            Self::Io { .. } => EXIT_IO,
            Self::Core(Error::Infeasible(_) | Error::LinearlyDependent { .. }) => EXIT_INFEASIBLE,
            Self::Core(_) => EXIT_VALIDATION,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

// ---------------------------------------------------------------------------
// Scenario files

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Ud,
    Filter,
}

/// Noise overrides in a scenario. Absent fields are zero; an absent block
/// means the documented settings.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase_jitter_sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub waveplate_jitter_sigma_deg: Option<f64>,
    /// Fixed phase added to a stage's φ, keyed by 1-indexed stage number.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub stage_phase_offsets: BTreeMap<usize, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shots_per_trial: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub task: Task,
    /// `sd_paper`, `filter_family` (with `a`) or `filter_family(<a>)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub states: Vec<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub priors: Vec<f64>,
    /// 1-indexed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub filter_target: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseConfig>,
}

/// A validated scenario.
#[derive(Debug, Clone)]
pub struct Problem {
    pub task: Task,
    pub ensemble: StateEnsemble,
    /// 0-based filtering target.
    pub target: Option<usize>,
}

impl ScenarioConfig {
    pub fn builtin(name: &str, a: Option<f64>) -> CliResult<Self> {
        let task = match parse_builtin(name, a)? {
            Builtin::SdPaper => Task::Ud,
            Builtin::FilterFamily(_) => Task::Filter,
        };
        Ok(Self {
            task,
            builtin: Some(name.to_string()),
            a,
            states: Vec::new(),
            priors: Vec::new(),
            filter_target: (task == Task::Filter).then_some(1),
            noise: None,
        })
    }

    pub fn from_json(text: &str) -> CliResult<Self> {
        serde_json::from_str(text).map_err(|e| CliError::validation("scenario", e.to_string()))
    }

    /// Canonical form: fixed field order, pretty-printed, trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("scenario serializes");
        s.push('\n');
        s
    }

    pub fn problem(&self) -> CliResult<Problem> {
        let ensemble = match &self.builtin {
            Some(name) => {
                if !self.states.is_empty() {
                    return Err(CliError::validation("states", "builtin and explicit states are mutually exclusive"));
                }
                let base = match parse_builtin(name, self.a)? {
                    Builtin::SdPaper => states::sd_paper_set(),
                    Builtin::FilterFamily(a) => {
                        states::filter_family(a).map_err(|e| CliError::validation("a", e.to_string()))?
                    }
                };
                if self.priors.is_empty() {
                    base
                } else {
                    StateEnsemble::with_priors(base.states().to_vec(), self.priors.clone())
                        .map_err(|e| CliError::validation("priors", e.to_string()))?
                }
            }
            None => {
                if self.a.is_some() {
                    return Err(CliError::validation("a", "only meaningful with builtin filter_family"));
                }
                self.explicit_ensemble()?
            }
        };
        let target = match (self.task, self.filter_target) {
            (Task::Filter, Some(t)) if (1..=ensemble.len()).contains(&t) => Some(t - 1),
            (Task::Filter, Some(t)) => {
                return Err(CliError::validation("filter_target", format!("{t} is not in 1..={}", ensemble.len())))
            }
            (Task::Filter, None) => return Err(CliError::validation("filter_target", "required for task filter")),
            (Task::Ud, Some(_)) => {
                return Err(CliError::validation("filter_target", "only meaningful for task filter"))
            }
            (Task::Ud, None) => None,
        };
        if let Some(noise) = &self.noise {
            for (&stage, &v) in &noise.stage_phase_offsets {
                if stage == 0 || !v.is_finite() {
                    return Err(CliError::validation(
                        format!("noise.stage_phase_offsets.{stage}"),
                        "stages are 1-indexed and offsets finite",
                    ));
                }
            }
        }
        Ok(Problem { task: self.task, ensemble, target })
    }

    fn explicit_ensemble(&self) -> CliResult<StateEnsemble> {
        if self.states.is_empty() {
            return Err(CliError::validation("states", "no states given"));
        }
        let d = self.states[0].len();
        let mut parsed = Vec::with_capacity(self.states.len());
        for (i, amps) in self.states.iter().enumerate() {
            if amps.len() != d {
                return Err(CliError::validation(
                    format!("states[{i}]"),
                    format!("has {} amplitudes, states[0] has {d}", amps.len()),
                ));
            }
            if let Some(k) = amps.iter().position(|z| !z[0].is_finite() || !z[1].is_finite()) {
                return Err(CliError::validation(format!("states[{i}][{k}]"), "not a finite number"));
            }
            let v = CVector::from_iterator(d, amps.iter().map(|z| C64::new(z[0], z[1])));
            let state = PureState::new(v).map_err(|e| CliError::validation(format!("states[{i}]"), e.to_string()))?;
            parsed.push(state);
        }
        let result = if self.priors.is_empty() {
            StateEnsemble::uniform(parsed)
        } else {
            StateEnsemble::with_priors(parsed, self.priors.clone())
        };
        result.map_err(|e| CliError::validation("priors", e.to_string()))
    }

    /// Noise for a simulation run: the scenario's block, else the documented
    /// settings.
    pub fn noise_model(&self, seed: u64, trials: usize) -> NoiseModel {
        match &self.noise {
            None => NoiseModel::documented(seed, trials),
            Some(n) => NoiseModel {
                phase_jitter_sigma: n.phase_jitter_sigma.unwrap_or(0.0),
                waveplate_jitter_sigma: n.waveplate_jitter_sigma_deg.unwrap_or(0.0),
                systematic_phase_offsets: n.stage_phase_offsets.iter().map(|(&k, &v)| (k - 1, v)).collect(),
                shots_per_trial: n.shots_per_trial,
                trials,
                seed,
                ..NoiseModel::noiseless()
            },
        }
    }
}

enum Builtin {
    SdPaper,
    FilterFamily(f64),
}

fn parse_builtin(name: &str, a: Option<f64>) -> CliResult<Builtin> {
    if name == "sd_paper" {
        if a.is_some() {
            return Err(CliError::validation("a", "sd_paper takes no parameter"));
        }
        return Ok(Builtin::SdPaper);
    }
    if name == "filter_family" {
        return a.map(Builtin::FilterFamily).ok_or_else(|| CliError::validation("a", "filter_family needs a value"));
    }
    if let Some(arg) = name.strip_prefix("filter_family(").and_then(|s| s.strip_suffix(')')) {
        let inline: f64 =
            arg.trim().parse().map_err(|_| CliError::validation("builtin", format!("bad parameter in {name}")))?;
        if a.is_some_and(|a| a != inline) {
            return Err(CliError::validation("a", "conflicts with the value inside builtin"));
        }
        return Ok(Builtin::FilterFamily(inline));
    }
    Err(CliError::validation("builtin", format!("unknown builtin {name:?} (expected sd_paper or filter_family)")))
}

// ---------------------------------------------------------------------------
// Pipeline

#[derive(Debug, Clone)]
pub enum Solution {
    Ud(UdSolution),
    Filtering(FilteringSolution),
}

impl Solution {
    pub fn average_success(&self) -> f64 {
        match self {
            Self::Ud(s) => s.average_success,
            Self::Filtering(s) => s.average_success,
        }
    }

    pub fn success_probs(&self) -> Vec<f64> {
        match self {
            Self::Ud(s) => s.success_probs.clone(),
            Self::Filtering(s) => s.success_probs(),
        }
    }
}

pub fn solve(problem: &Problem) -> CliResult<Solution> {
    Ok(match problem.target {
        None => Solution::Ud(discrimination::optimize_ud(&problem.ensemble)?),
        Some(t) => Solution::Filtering(discrimination::optimize_filtering(&problem.ensemble, t)?),
    })
}

pub fn pvm_baseline(problem: &Problem) -> CliResult<f64> {
    Ok(match problem.target {
        None => discrimination::optimal_pvm_ud(&problem.ensemble)?.success,
        Some(t) => discrimination::optimal_pvm_filtering(&problem.ensemble, t, PVM_SEARCH_BUDGET)?,
    })
}

/// Everything from the optimum down to the mesh.
#[derive(Debug, Clone)]
pub struct Pipeline {
    pub problem: Problem,
    pub solution: Solution,
    pub dilated: DilatedStates,
    pub unitary: UnitaryMatrix,
    pub plan: MeshPlan,
    pub outcome_map: OutcomeMap,
}

impl Pipeline {
    pub fn build(problem: Problem) -> CliResult<Self> {
        let solution = solve(&problem)?;
        let dilated = match (&solution, problem.target) {
            (Solution::Ud(s), _) => dilation::build_outputs_ud(&problem.ensemble, s)?,
            (Solution::Filtering(s), Some(t)) => dilation::build_outputs_filtering(&problem.ensemble, t, s)?,
            (Solution::Filtering(_), None) => unreachable!("filtering solutions carry a target"),
        };
        let unitary = dilation::build_unitary(&problem.ensemble, &dilated)?;
        let plan = mesh::decompose(&unitary)?;
        let outcome_map = OutcomeMap::from_dilation(&dilated, problem.ensemble.len(), problem.target)?;
        Ok(Self { problem, solution, dilated, unitary, plan, outcome_map })
    }

    pub fn simulate(&self, noise: &NoiseModel) -> CliResult<(simulator::DetectionReport, OutcomeSummary)> {
        let report = simulator::run_ensemble(&self.plan, &self.problem.ensemble, noise)?;
        let summary = simulator::summarize(&report, &self.outcome_map, self.problem.ensemble.priors())?;
        Ok((report, summary))
    }
}

// ---------------------------------------------------------------------------
// Reports

type Complex = [f64; 2];

fn pair(z: C64) -> Complex {
    [z.re, z.im]
}

fn vector_json(v: &CVector) -> Vec<Complex> {
    v.iter().map(|&z| pair(z)).collect()
}

pub fn matrix_json(m: &CMatrix) -> Vec<Vec<Complex>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| pair(m[(i, j)])).collect()).collect()
}

pub fn matrix_from_json(rows: &[Vec<Complex>]) -> CliResult<CMatrix> {
    let n = rows.len();
    if n == 0 {
        return Err(CliError::validation("unitary", "empty matrix"));
    }
    for (i, row) in rows.iter().enumerate() {
        if row.len() != n {
            return Err(CliError::validation(
                format!("unitary[{i}]"),
                format!("has {} entries, expected {n}", row.len()),
            ));
        }
    }
    Ok(CMatrix::from_fn(n, n, |i, j| C64::new(rows[i][j][0], rows[i][j][1])))
}

#[derive(Debug, Serialize)]
pub struct OptimizeReport {
    pub task: Task,
    pub labels: Vec<String>,
    pub priors: Vec<f64>,
    pub povm_success: f64,
    pub pvm_success: f64,
    pub success_probs: Vec<f64>,
    pub status: discrimination::SolutionStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure_gram_eigenvalues: Option<Vec<f64>>,
    /// 1-indexed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub filter_target: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure_amplitudes: Option<Vec<Complex>>,
}

#[derive(Debug, Serialize)]
pub struct RailRole {
    pub rail: usize,
    pub outcome: String,
}

#[derive(Debug, Serialize)]
pub struct DilateReport {
    pub system_dim: usize,
    pub ancilla_dim: usize,
    pub outputs: Vec<Vec<Complex>>,
    pub rails: Vec<RailRole>,
    pub unitary: Vec<Vec<Complex>>,
    pub gram_residual: f64,
    pub unitarity_residual: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct StageJson {
    /// 1-indexed `[j, k]`; the phase acts on `k`.
    pub rails: [usize; 2],
    pub t: f64,
    pub phi_radians: f64,
    pub waveplates_deg: [f64; 3],
    /// Slide rotation from the operating point for this phase.
    pub tilt_deg: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PlanJson {
    pub dim: usize,
    pub stages: Vec<StageJson>,
    pub output_phases_radians: Vec<f64>,
    pub round_trip_residual: f64,
}

impl PlanJson {
    pub fn new(plan: &MeshPlan, target: &UnitaryMatrix) -> Self {
        let stages = plan
            .stages
            .iter()
            .map(|s| StageJson {
                rails: [s.rails.0 + 1, s.rails.1 + 1],
                t: s.t,
                phi_radians: s.phi,
                waveplates_deg: mesh::vbs_angles(s).hwp_angles,
                tilt_deg: mesh::phase_to_tilt(s.phi),
            })
            .collect();
        Self {
            dim: plan.dim,
            stages,
            output_phases_radians: plan.output_phases.clone(),
            round_trip_residual: mesh::unitary_distance(&mesh::recompose(plan), target),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct SimulateReport {
    pub seed: u64,
    pub noise: NoiseModel,
    pub rail_outcomes: Vec<String>,
    pub report: simulator::DetectionReport,
    pub summary: OutcomeSummary,
}

#[derive(Debug, Clone, Serialize)]
pub struct Table1Column {
    pub experiment: String,
    pub povm_theory: f64,
    pub pvm_theory: f64,
    pub simulated: f64,
    pub simulated_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Table1 {
    pub seed: u64,
    pub trials: usize,
    pub columns: Vec<Table1Column>,
}

/// Rounds to three significant figures.
pub fn sig3(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.2e}").parse().expect("formatted float parses")
}

fn percent(x: f64) -> String {
    format!("{:.1}%", 100.0 * x)
}

fn complex_text(z: C64) -> String {
    if z.im.abs() < 5e-7 {
        format!("{:.6}", z.re)
    } else {
        format!("{:.6}{:+.6}i", z.re, z.im)
    }
}

fn outcome_name(o: Outcome) -> String {
    match o {
        Outcome::State(i) => format!("ψ{}", i + 1),
        other => other.to_string(),
    }
}

fn rail_roles(map: &OutcomeMap) -> Vec<RailRole> {
    map.rail_outcomes.iter().enumerate().map(|(k, &o)| RailRole { rail: k + 1, outcome: outcome_name(o) }).collect()
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

pub fn optimize_report(problem: &Problem) -> CliResult<OptimizeReport> {
    let solution = solve(problem)?;
    let pvm = pvm_baseline(problem)?;
    let e = &problem.ensemble;
    let (status, eig, amps) = match &solution {
        Solution::Ud(s) => (s.status, Some(s.failure_eigenvalues()), None),
        Solution::Filtering(s) => (s.status, None, Some(s.failure_amplitudes.iter().map(|&z| pair(z)).collect())),
    };
    Ok(OptimizeReport {
        task: problem.task,
        labels: e.labels().to_vec(),
        priors: e.priors().to_vec(),
        povm_success: solution.average_success(),
        pvm_success: pvm,
        success_probs: solution.success_probs(),
        status,
        failure_gram_eigenvalues: eig,
        filter_target: problem.target.map(|t| t + 1),
        failure_amplitudes: amps,
    })
}

fn optimize_text(r: &OptimizeReport) -> String {
    let mut s = String::new();
    let task = match r.task {
        Task::Ud => "unambiguous discrimination".to_string(),
        Task::Filter => format!("filtering ψ{} from the rest", r.filter_target.unwrap_or(1)),
    };
    let _ = writeln!(s, "task           {task}");
    let _ = writeln!(s, "POVM success   {} ({:.4})", percent(r.povm_success), r.povm_success);
    let _ = writeln!(s, "PVM success    {} ({:.4})", percent(r.pvm_success), r.pvm_success);
    let _ = writeln!(s, "status         {:?}", r.status);
    let _ = writeln!(s);
    let _ = writeln!(s, "{:<8}{:>10}{:>12}", "state", "prior", "p_i");
    for ((label, prior), p) in r.labels.iter().zip(&r.priors).zip(&r.success_probs) {
        let _ = writeln!(s, "{label:<8}{prior:>10.4}{p:>12.6}");
    }
    if let Some(eig) = &r.failure_gram_eigenvalues {
        let list: Vec<String> = eig.iter().map(|x| format!("{x:.3e}")).collect();
        let _ = writeln!(s, "\nfailure Gram eigenvalues  {}", list.join("  "));
    }
    if let Some(f) = &r.failure_amplitudes {
        let list: Vec<String> = f.iter().map(|z| complex_text(C64::new(z[0], z[1]))).collect();
        let _ = writeln!(s, "\nfailure amplitudes  {}", list.join("  "));
    }
    s
}

pub fn dilate_report(pipeline: &Pipeline) -> DilateReport {
    let d = &pipeline.dilated;
    DilateReport {
        system_dim: d.system_dim,
        ancilla_dim: d.ancilla_dim,
        outputs: d.outputs.iter().map(vector_json).collect(),
        rails: rail_roles(&pipeline.outcome_map),
        unitary: matrix_json(pipeline.unitary.entries()),
        gram_residual: dilation::gram_residual(&pipeline.problem.ensemble, d),
        unitarity_residual: pipeline.unitary.residual(),
    }
}

fn dilate_text(r: &DilateReport, labels: &[String]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "system rails {}, ancilla rails {}", r.system_dim, r.ancilla_dim);
    let roles: Vec<String> = r.rails.iter().map(|x| format!("{}:{}", x.rail, x.outcome)).collect();
    let _ = writeln!(s, "rail outcomes  {}", roles.join("  "));
    let _ = writeln!(s, "\noutput states");
    for (label, out) in labels.iter().zip(&r.outputs) {
        let entries: Vec<String> = out.iter().map(|z| complex_text(C64::new(z[0], z[1]))).collect();
        let _ = writeln!(s, "  {label:<6}({})", entries.join(", "));
    }
    let _ = writeln!(s, "\nunitary");
    for row in &r.unitary {
        let entries: Vec<String> = row.iter().map(|z| format!("{:>22}", complex_text(C64::new(z[0], z[1])))).collect();
        let _ = writeln!(s, "  {}", entries.join(""));
    }
    let _ = writeln!(s, "\nGram residual      {:.3e}", r.gram_residual);
    let _ = writeln!(s, "unitarity residual {:.3e}", r.unitarity_residual);
    s
}

fn plan_text(p: &PlanJson) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{} rails, {} stages", p.dim, p.stages.len());
    if !p.stages.is_empty() {
        let _ = writeln!(
            s,
            "\n{:<7}{:<8}{:>10}{:>12}{:>24}{:>12}",
            "stage", "rails", "t", "φ (rad)", "waveplates (deg)", "tilt (deg)"
        );
    }
    for (k, st) in p.stages.iter().enumerate() {
        let w = st.waveplates_deg;
        let _ = writeln!(
            s,
            "{:<7}{:<8}{:>10.6}{:>12.6}{:>24}{:>12.5}",
            k + 1,
            format!("{}-{}", st.rails[0], st.rails[1]),
            st.t,
            st.phi_radians,
            format!("{:.3}/{:.3}/{:.3}", w[0], w[1], w[2]),
            st.tilt_deg
        );
    }
    let phases: Vec<String> = p.output_phases_radians.iter().map(|x| format!("{x:.6}")).collect();
    let _ = writeln!(s, "\noutput phases (rad)  {}", phases.join("  "));
    let _ = writeln!(s, "round-trip residual  {:.3e}", p.round_trip_residual);
    s
}

fn simulate_text(r: &SimulateReport) -> String {
    let mut s = String::new();
    let n = &r.noise;
    let _ = writeln!(
        s,
        "seed {}, {} trials, phase jitter {} rad, waveplate jitter {}°",
        r.seed, r.report.trials, n.phase_jitter_sigma, n.waveplate_jitter_sigma
    );
    let _ = write!(s, "\n{:<8}", "state");
    for (k, o) in r.rail_outcomes.iter().enumerate() {
        let _ = write!(s, "{:>14}", format!("{} ({o})", k + 1));
    }
    let _ = writeln!(s, "{:>10}{:>10}{:>10}", "success", "error", "?");
    for ((label, row), rates) in r.report.row_labels.iter().zip(&r.report.matrix).zip(&r.summary.per_state) {
        let _ = write!(s, "{label:<8}");
        for p in row {
            let _ = write!(s, "{:>14}", percent(*p));
        }
        let _ = writeln!(
            s,
            "{:>10}{:>10}{:>10}",
            percent(rates.success),
            percent(rates.error),
            percent(rates.inconclusive)
        );
    }
    let m = &r.summary;
    let _ = writeln!(
        s,
        "\nsuccess {}  error {}  inconclusive {}",
        percent(m.success_rate),
        percent(m.error_rate),
        percent(m.inconclusive_rate)
    );
    s
}

/// The three theory/simulation columns: filtering at a = 0.25 and 0.5,
/// then discrimination of the benchmark set.
pub fn table1(seed: u64, trials: usize) -> CliResult<Table1> {
    let scenarios = [
        ("filtering a=0.25", ScenarioConfig::builtin("filter_family", Some(0.25))?),
        ("filtering a=0.5", ScenarioConfig::builtin("filter_family", Some(0.5))?),
        ("discrimination", ScenarioConfig::builtin("sd_paper", None)?),
    ];
    let mut columns = Vec::new();
    for (name, cfg) in scenarios {
        let problem = cfg.problem()?;
        let pvm = pvm_baseline(&problem)?;
        let pipeline = Pipeline::build(problem)?;
        let (_, summary) = pipeline.simulate(&NoiseModel::documented(seed, trials))?;
        columns.push(Table1Column {
            experiment: name.to_string(),
            povm_theory: pipeline.solution.average_success(),
            pvm_theory: pvm,
            simulated: summary.success_rate,
            simulated_error: summary.error_rate,
        });
    }
    Ok(Table1 { seed, trials, columns })
}

fn table1_text(t: &Table1) -> String {
    let mut s = String::new();
    let _ = write!(s, "{:<12}", "");
    for c in &t.columns {
        let _ = write!(s, "{:>20}", c.experiment);
    }
    let _ = writeln!(s);
    type Cell = fn(&Table1Column) -> f64;
    let rows: [(&str, Cell); 4] = [
        ("POVM_th", |c| c.povm_theory),
        ("PVM_th", |c| c.pvm_theory),
        ("simulated", |c| c.simulated),
        ("sim. error", |c| c.simulated_error),
    ];
    for (name, f) in rows {
        let _ = write!(s, "{name:<12}");
        for c in &t.columns {
            let _ = write!(s, "{:>20}", percent(f(c)));
        }
        let _ = writeln!(s);
    }
    let _ = writeln!(s, "\nsimulated with seed {}, {} trials, documented noise", t.seed, t.trials);
    s
}

fn table1_json(t: &Table1) -> Table1 {
    let mut t = t.clone();
    for c in &mut t.columns {
        c.povm_theory = sig3(c.povm_theory);
        c.pvm_theory = sig3(c.pvm_theory);
        c.simulated = sig3(c.simulated);
        c.simulated_error = sig3(c.simulated_error);
    }
    t
}

// ---------------------------------------------------------------------------
// Argument parsing and dispatch

#[derive(Debug, Parser)]
#[command(
    name = "optical-povm",
    version,
    about = "Optimal unambiguous discrimination and filtering with linear optics"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Emit JSON instead of text tables.
    #[arg(long, global = true)]
    pub json: bool,
    /// Write the output to a file instead of standard output.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Scenario JSON file.
    #[arg(long, value_name = "PATH", conflicts_with = "builtin")]
    pub scenario: Option<PathBuf>,
    /// Built-in scenario: sd_paper or filter_family.
    #[arg(long, value_name = "NAME")]
    pub builtin: Option<String>,
    /// Overlap parameter for filter_family.
    #[arg(long, value_name = "VALUE", allow_negative_numbers = true)]
    pub a: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Optimal POVM success, best projective baseline and per-state rates.
    Optimize(InputArgs),
    /// Output states, the dilation unitary and its residuals.
    Dilate(InputArgs),
    /// Beam-splitter mesh for a scenario's unitary or a unitary file.
    Decompose {
        #[command(flatten)]
        input: InputArgs,
        /// JSON file holding a row-major matrix of [re, im] pairs, either
        /// bare or under a "unitary" key.
        #[arg(long, value_name = "PATH", conflicts_with_all = ["scenario", "builtin"])]
        unitary: Option<PathBuf>,
    },
    /// Monte Carlo run of the synthesized mesh.
    Simulate {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_TRIALS)]
        trials: usize,
        /// Ignore scenario and documented noise.
        #[arg(long)]
        noiseless: bool,
    },
    /// Theory and simulated success rates for the three benchmark settings.
    Table1 {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_TRIALS)]
        trials: usize,
    },
    /// Print a scenario in canonical form.
    Scenario(InputArgs),
}

fn read_file(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.display().to_string(), source })
}

fn load_scenario(input: &InputArgs) -> CliResult<ScenarioConfig> {
    match (&input.scenario, &input.builtin) {
        (Some(path), _) => {
            if input.a.is_some() {
                return Err(CliError::validation("--a", "only used with --builtin"));
            }
            ScenarioConfig::from_json(&read_file(path)?)
        }
        (None, Some(name)) => ScenarioConfig::builtin(name, input.a),
        (None, None) => Err(CliError::validation("input", "give --scenario PATH or --builtin NAME")),
    }
}

fn load_unitary(path: &Path) -> CliResult<UnitaryMatrix> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum UnitaryFile {
        Bare(Vec<Vec<Complex>>),
        Wrapped { unitary: Vec<Vec<Complex>> },
    }
    let text = read_file(path)?;
    let rows = match serde_json::from_str(&text).map_err(|e| CliError::validation("unitary", e.to_string()))? {
        UnitaryFile::Bare(rows) | UnitaryFile::Wrapped { unitary: rows } => rows,
    };
    Ok(UnitaryMatrix::new(matrix_from_json(&rows)?)?)
}

/// Runs one command and returns what it prints.
pub fn run(cli: &Cli) -> CliResult<String> {
    let json = cli.json;
    match &cli.command {
        Command::Optimize(input) => {
            let problem = load_scenario(input)?.problem()?;
            let r = optimize_report(&problem)?;
            Ok(if json { to_json(&r) } else { optimize_text(&r) })
        }
        Command::Dilate(input) => {
            let pipeline = Pipeline::build(load_scenario(input)?.problem()?)?;
            let r = dilate_report(&pipeline);
            Ok(if json { to_json(&r) } else { dilate_text(&r, pipeline.problem.ensemble.labels()) })
        }
        Command::Decompose { input, unitary } => {
            let u = match unitary {
                Some(path) => load_unitary(path)?,
                None => Pipeline::build(load_scenario(input)?.problem()?)?.unitary,
            };
            let plan = mesh::decompose(&u)?;
            let p = PlanJson::new(&plan, &u);
            Ok(if json { to_json(&p) } else { plan_text(&p) })
        }
        Command::Simulate { input, seed, trials, noiseless } => {
            let cfg = load_scenario(input)?;
            let pipeline = Pipeline::build(cfg.problem()?)?;
            let noise = if *noiseless {
                NoiseModel { trials: *trials, seed: *seed, ..NoiseModel::noiseless() }
            } else {
                cfg.noise_model(*seed, *trials)
            };
            if let Some(&stage) = noise.systematic_phase_offsets.keys().find(|&&k| k >= pipeline.plan.stages.len()) {
                return Err(CliError::validation(
                    format!("noise.stage_phase_offsets.{}", stage + 1),
                    format!("the mesh has {} stages", pipeline.plan.stages.len()),
                ));
            }
            let (report, summary) = pipeline.simulate(&noise)?;
            let r = SimulateReport {
                seed: *seed,
                rail_outcomes: pipeline.outcome_map.rail_outcomes.iter().map(|&o| outcome_name(o)).collect(),
                noise,
                report,
                summary,
            };
            Ok(if json { to_json(&r) } else { simulate_text(&r) })
        }
        Command::Table1 { seed, trials } => {
            let t = table1(*seed, *trials)?;
            Ok(if json { to_json(&table1_json(&t)) } else { table1_text(&t) })
        }
        Command::Scenario(input) => {
            let cfg = load_scenario(input)?;
            cfg.problem()?;
            Ok(cfg.to_json())
        }
    }
}

/// Parses `args`, runs the command, writes its output and returns the exit
/// code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = run(&cli).and_then(|text| match &cli.out {
        Some(path) => {
            std::fs::write(path, text).map_err(|source| CliError::Io { path: path.display().to_string(), source })
        }
        None => {
            print!("{text}");
            Ok(())
        }
    });
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
