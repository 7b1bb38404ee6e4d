//! Triangular meshes of two-rail variable beam splitters.
//!
//! A stage on the ordered rail pair `(j, k)` applies a phase `e^{iφ}` to
//! rail `k` and then the real rotation
//!
//! ```text
//! ⎡ t  −r ⎤
//! ⎣ r   t ⎦      r = √(1 − t²)
//! ```
//!
//! so the 2×2 block is `[[t, −r e^{iφ}], [r, t e^{iφ}]]`. With `t = 1` and
//! `φ = 0` a stage is the identity. A plan applies its stages in order and
//! finishes with a phase on every output rail.

use std::f64::consts::PI;

use crate::dilation::UnitaryMatrix;
use crate::linalg::{self, re, CMatrix, CVector, C64};
use crate::{Error, Result};

/// Below this modulus an entry already counts as nulled and gets no stage.
const NULL_TOL: f64 = 1e-13;

/// Angle of the glass-slide phase shifter to the beam, in degrees.
pub const TILT_OPERATING_POINT_DEG: f64 = 55.0;

/// Differential slide rotation, in degrees, producing a phase shift of π.
pub const TILT_PER_PI_DEG: f64 = 0.05;

/// Angle of both outer half-wave plates of a VBS, in degrees.
pub const VBS_OUTER_PLATE_DEG: f64 = 45.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamSplitterSetting {
    /// Ordered rail pair `(j, k)`, 0-based; the phase acts on `k`.
    pub rails: (usize, usize),
    /// Amplitude transmission.
    pub t: f64,
    /// Phase on rail `k` before mixing, radians.
    pub phi: f64,
}

impl BeamSplitterSetting {
    pub fn new(rails: (usize, usize), t: f64, phi: f64) -> Self {
        Self { rails, t, phi }
    }

    /// Amplitude reflection `√(1 − t²)`.
    pub fn r(&self) -> f64 {
        (1.0 - self.t * self.t).max(0.0).sqrt()
    }

    /// The 2×2 transfer block.
    pub fn block(&self) -> [[C64; 2]; 2] {
        rotation_block(self.t, self.r(), self.phi)
    }
}

/// `[[t, −r e^{iφ}], [r, t e^{iφ}]]`. Accepts any `(t, r)` on the unit
/// circle, which lets noisy settings push `t` past the `[0, 1]` range.
pub fn rotation_block(t: f64, r: f64, phi: f64) -> [[C64; 2]; 2] {
    let e = C64::from_polar(1.0, phi);
    [[re(t), -e * r], [re(r), e * t]]
}

/// Applies a 2×2 block to rails `(j, k)` of `v` in place.
pub fn apply_block(v: &mut CVector, rails: (usize, usize), b: &[[C64; 2]; 2]) {
    let (j, k) = rails;
    let (x, y) = (v[j], v[k]);
    v[j] = b[0][0] * x + b[0][1] * y;
    v[k] = b[1][0] * x + b[1][1] * y;
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeshPlan {
    pub dim: usize,
    pub stages: Vec<BeamSplitterSetting>,
    /// Phase on each output rail, radians.
    pub output_phases: Vec<f64>,
}

impl MeshPlan {
    pub fn new(dim: usize, stages: Vec<BeamSplitterSetting>, output_phases: Vec<f64>) -> Result<Self> {
        let plan = Self { dim, stages, output_phases };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        if self.output_phases.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: self.output_phases.len() });
        }
        for (idx, s) in self.stages.iter().enumerate() {
            let (j, k) = s.rails;
            if j == k || j >= self.dim || k >= self.dim {
                return Err(Error::InvalidParameter(format!(
                    "stage {} couples rails ({}, {}) in a {}-rail mesh",
                    idx + 1,
                    j + 1,
                    k + 1,
                    self.dim
                )));
            }
            if !(0.0..=1.0).contains(&s.t) || !s.phi.is_finite() {
                return Err(Error::InvalidParameter(format!("stage {} has t = {}, φ = {}", idx + 1, s.t, s.phi)));
            }
        }
        Ok(())
    }

    /// Stages with `t < 1` or a nonzero phase.
    pub fn nontrivial_stages(&self) -> impl Iterator<Item = &BeamSplitterSetting> {
        self.stages.iter().filter(|s| s.t < 1.0 - 1e-12 || s.phi.abs() > 1e-12)
    }

    /// Propagates amplitudes through the plan.
    pub fn apply(&self, input: &CVector) -> CVector {
        let mut v = input.clone();
        for s in &self.stages {
            apply_block(&mut v, s.rails, &s.block());
        }
        for (k, &theta) in self.output_phases.iter().enumerate() {
            v[k] *= C64::from_polar(1.0, theta);
        }
        v
    }
}

/// Factors `U = D · B_m ⋯ B_1` by nulling the sub-diagonal of each row,
/// last row first, against the diagonal entry of that row.
pub fn decompose(unitary: &UnitaryMatrix) -> Result<MeshPlan> {
    let residual = unitary.residual();
    if residual > crate::dilation::UNITARY_TOL {
        return Err(Error::NotUnitary { residual });
    }
    let n = unitary.dim();
    let mut v = unitary.entries().clone();
    let mut stages = Vec::new();
    for row in (1..n).rev() {
        for col in 0..row {
            let off = v[(row, col)];
            if off.norm() < NULL_TOL {
                continue;
            }
            let diag = v[(row, row)];
            let rho = off.norm().hypot(diag.norm());
            let t = diag.norm() / rho;
            let phi = if diag.norm() < NULL_TOL { 0.0 } else { wrap_phase(diag.arg() - off.arg()) };
            let stage = BeamSplitterSetting::new((col, row), t, phi);
            // V ← V · B†
            let b = stage.block();
            for i in 0..n {
                let (x, y) = (v[(i, col)], v[(i, row)]);
                v[(i, col)] = x * b[0][0].conj() + y * b[0][1].conj();
                v[(i, row)] = x * b[1][0].conj() + y * b[1][1].conj();
            }
            stages.push(stage);
        }
    }
    let output_phases = (0..n).map(|k| v[(k, k)].arg()).collect();
    MeshPlan::new(n, stages, output_phases)
}

/// Product of the stage blocks in order, then the output phases.
pub fn recompose(plan: &MeshPlan) -> UnitaryMatrix {
    let n = plan.dim;
    let mut m = CMatrix::identity(n, n);
    for c in 0..n {
        let col = plan.apply(&m.column(c).into_owned());
        m.set_column(c, &col);
    }
    UnitaryMatrix::new(m).expect("products of unitary blocks are unitary")
}

fn wrap_phase(x: f64) -> f64 {
    let y = (x + PI).rem_euclid(2.0 * PI) - PI;
    if y <= -PI {
        y + 2.0 * PI
    } else {
        y
    }
}

/// The three-state discrimination mesh: `t14 = t34 = 1/√2` and a 50/50
/// coupler on rails 2 and 3; every other VBS transmits fully.
pub fn paper_plan_sd() -> MeshPlan {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    MeshPlan::new(
        4,
        vec![
            BeamSplitterSetting::new((0, 3), h, 0.0),
            BeamSplitterSetting::new((2, 3), h, 0.0),
            BeamSplitterSetting::new((2, 1), h, 0.0),
        ],
        vec![0.0; 4],
    )
    .expect("static plan is valid")
}

/// The filtering mesh for parameter `a`: `t14 = 1/√(1+a)`, `t34 = √(1−a)`.
pub fn paper_plan_filtering(a: f64) -> Result<MeshPlan> {
    if !(a > 0.0 && a <= 1.0) {
        return Err(Error::InvalidParameter(format!("filter family needs 0 < a <= 1, got {a}")));
    }
    MeshPlan::new(
        4,
        vec![
            BeamSplitterSetting::new((0, 3), 1.0 / (1.0 + a).sqrt(), 0.0),
            BeamSplitterSetting::new((2, 3), (1.0 - a).sqrt(), 0.0),
        ],
        vec![0.0; 4],
    )
}

/// Half-wave-plate rotations of a variable beam splitter, degrees.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct VbsAngles {
    pub hwp_angles: [f64; 3],
}

impl VbsAngles {
    /// Transmission realized by these angles, `cos(2θ)` of the middle plate.
    pub fn transmission(&self) -> f64 {
        (2.0 * self.hwp_angles[1].to_radians()).cos()
    }
}

/// Waveplate settings realizing a stage's transmission. The middle plate
/// sits at `θ ∈ [0°, 45°]` with `t = cos 2θ`.
pub fn vbs_angles(setting: &BeamSplitterSetting) -> VbsAngles {
    VbsAngles { hwp_angles: [VBS_OUTER_PLATE_DEG, middle_plate_deg(setting.t), VBS_OUTER_PLATE_DEG] }
}

/// `θ = acos(t) / 2`, degrees.
pub fn middle_plate_deg(t: f64) -> f64 {
    t.clamp(0.0, 1.0).acos().to_degrees() / 2.0
}

/// Slide rotation (degrees, relative to the 55° operating point) producing
/// phase `phi`, in the linearized model of 0.05° per π.
pub fn phase_to_tilt(phi: f64) -> f64 {
    TILT_PER_PI_DEG * phi / PI
}

/// `max |A − B|` between two unitaries.
pub fn unitary_distance(a: &UnitaryMatrix, b: &UnitaryMatrix) -> f64 {
    linalg::max_abs_diff(a.entries(), b.entries())
}
