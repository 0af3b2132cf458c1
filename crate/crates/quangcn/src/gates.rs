//! Parameterized gate library.
//!
//! Matrix conventions, fixed here and inherited by every other module:
//!
//! ```text
//! Ry(θ)       = [[cos θ/2, −sin θ/2], [sin θ/2, cos θ/2]]
//! U1(λ)       = diag(1, e^{iλ})
//! CU1(λ)      = diag(1, 1, 1, e^{iλ})
//! U3(θ,φ,λ)   = [[cos θ/2, −e^{iλ} sin θ/2], [e^{iφ} sin θ/2, e^{i(φ+λ)} cos θ/2]]
//! CU3(θ,φ,λ)  = |0⟩⟨0|⊗I + |1⟩⟨1|⊗U3(θ,φ,λ)
//! ```
//!
//! Two-qubit matrices index their basis as `(control_bit << 1) | target_bit`,
//! i.e. the first listed wire (the control) is the high bit of the local
//! 4-dimensional index. `U3(θ,0,0) = Ry(θ)` ties the two families together.

use num_complex::Complex64;
use rand::Rng;
use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GateKind {
    Ry,
    U1,
    Cu1,
    U3,
    Cu3,
    PauliX,
    PauliY,
    PauliZ,
}

pub const ALL_KINDS: [GateKind; 8] = [
    GateKind::Ry,
    GateKind::U1,
    GateKind::Cu1,
    GateKind::U3,
    GateKind::Cu3,
    GateKind::PauliX,
    GateKind::PauliY,
    GateKind::PauliZ,
];

impl GateKind {
    /// Number of angle parameters.
    pub fn arity(self) -> usize {
        match self {
            GateKind::Ry | GateKind::U1 | GateKind::Cu1 => 1,
            GateKind::U3 | GateKind::Cu3 => 3,
            GateKind::PauliX | GateKind::PauliY | GateKind::PauliZ => 0,
        }
    }

    pub fn num_wires(self) -> usize {
        match self {
            GateKind::Cu1 | GateKind::Cu3 => 2,
            _ => 1,
        }
    }

    pub fn is_controlled(self) -> bool {
        self.num_wires() == 2
    }

    pub fn is_parameterized(self) -> bool {
        self.arity() > 0
    }

    /// Diagonal in the computational basis; such gates commute with Pauli-Z
    /// measurement and alone cannot change any ⟨Z⟩.
    pub fn is_diagonal(self) -> bool {
        matches!(self, GateKind::U1 | GateKind::Cu1 | GateKind::PauliZ)
    }

    pub fn label(self) -> &'static str {
        match self {
            GateKind::Ry => "RY",
            GateKind::U1 => "U1",
            GateKind::Cu1 => "CU1",
            GateKind::U3 => "U3",
            GateKind::Cu3 => "CU3",
            GateKind::PauliX => "X",
            GateKind::PauliY => "Y",
            GateKind::PauliZ => "Z",
        }
    }
}

/// One gate application. `wires[0]` is the control for controlled kinds;
/// single-qubit kinds store their wire twice and expose it via `wire_list`.
/// Unused `params` entries stay zero. `param_slots` maps trainable angles to
/// flat model-parameter indices when the gate belongs to a model circuit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GateOp {
    pub kind: GateKind,
    pub wires: [usize; 2],
    pub params: [f64; 3],
    pub trainable: bool,
    pub param_slots: [Option<usize>; 3],
}

impl GateOp {
    fn new(kind: GateKind, wires: [usize; 2], params: [f64; 3]) -> Self {
        GateOp {
            kind,
            wires,
            params,
            trainable: false,
            param_slots: [None; 3],
        }
    }

    pub fn ry(wire: usize, theta: f64) -> Self {
        Self::new(GateKind::Ry, [wire, wire], [theta, 0.0, 0.0])
    }

    pub fn u1(wire: usize, lambda: f64) -> Self {
        Self::new(GateKind::U1, [wire, wire], [lambda, 0.0, 0.0])
    }

    pub fn cu1(control: usize, target: usize, lambda: f64) -> Self {
        Self::new(GateKind::Cu1, [control, target], [lambda, 0.0, 0.0])
    }

    pub fn u3(wire: usize, theta: f64, phi: f64, lambda: f64) -> Self {
        Self::new(GateKind::U3, [wire, wire], [theta, phi, lambda])
    }

    pub fn cu3(control: usize, target: usize, theta: f64, phi: f64, lambda: f64) -> Self {
        Self::new(GateKind::Cu3, [control, target], [theta, phi, lambda])
    }

    pub fn pauli_x(wire: usize) -> Self {
        Self::new(GateKind::PauliX, [wire, wire], [0.0; 3])
    }

    pub fn pauli_y(wire: usize) -> Self {
        Self::new(GateKind::PauliY, [wire, wire], [0.0; 3])
    }

    pub fn pauli_z(wire: usize) -> Self {
        Self::new(GateKind::PauliZ, [wire, wire], [0.0; 3])
    }

    pub fn trainable(mut self) -> Self {
        self.trainable = true;
        self
    }

    pub fn with_slot(mut self, param_index: usize, slot: usize) -> Self {
        self.param_slots[param_index] = Some(slot);
        self
    }

    pub fn wire_list(&self) -> &[usize] {
        &self.wires[..self.kind.num_wires()]
    }

    pub fn validate(&self, num_qubits: usize) -> Result<()> {
        for &w in self.wire_list() {
            if w >= num_qubits {
                return Err(Error::config(format!(
                    "gate {} wire {w} out of range for {num_qubits} qubits",
                    self.kind.label()
                )));
            }
        }
        if self.kind.is_controlled() && self.wires[0] == self.wires[1] {
            return Err(Error::config(format!(
                "gate {} control and target coincide on wire {}",
                self.kind.label(),
                self.wires[0]
            )));
        }
        for p in &self.params[..self.kind.arity()] {
            if !p.is_finite() {
                return Err(Error::numeric(format!(
                    "gate {} has non-finite angle {p}",
                    self.kind.label()
                )));
            }
        }
        Ok(())
    }
}

pub type Mat2 = [[Complex64; 2]; 2];
pub type Mat4 = [[Complex64; 4]; 4];

#[derive(Clone, Copy, Debug)]
pub enum GateMatrix {
    One(Mat2),
    Two(Mat4),
}

pub fn ry_matrix(theta: f64) -> Mat2 {
    let (s, c) = (theta / 2.0).sin_cos();
    [
        [Complex64::new(c, 0.0), Complex64::new(-s, 0.0)],
        [Complex64::new(s, 0.0), Complex64::new(c, 0.0)],
    ]
}

pub fn u1_matrix(lambda: f64) -> Mat2 {
    [
        [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)],
        [Complex64::new(0.0, 0.0), Complex64::cis(lambda)],
    ]
}

pub fn u3_matrix(theta: f64, phi: f64, lambda: f64) -> Mat2 {
    let (s, c) = (theta / 2.0).sin_cos();
    [
        [
            Complex64::new(c, 0.0),
            -Complex64::cis(lambda) * Complex64::new(s, 0.0),
        ],
        [
            Complex64::cis(phi) * Complex64::new(s, 0.0),
            Complex64::cis(phi + lambda) * Complex64::new(c, 0.0),
        ],
    ]
}

pub fn pauli_x_matrix() -> Mat2 {
    let (z, o) = (Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0));
    [[z, o], [o, z]]
}

pub fn pauli_y_matrix() -> Mat2 {
    let z = Complex64::new(0.0, 0.0);
    [
        [z, Complex64::new(0.0, -1.0)],
        [Complex64::new(0.0, 1.0), z],
    ]
}

pub fn pauli_z_matrix() -> Mat2 {
    let z = Complex64::new(0.0, 0.0);
    [
        [Complex64::new(1.0, 0.0), z],
        [z, Complex64::new(-1.0, 0.0)],
    ]
}

/// The 2x2 block a controlled gate applies on its target within the
/// control=1 subspace; `None` for single-qubit kinds.
pub fn controlled_block(gate: &GateOp) -> Option<Mat2> {
    match gate.kind {
        GateKind::Cu1 => Some(u1_matrix(gate.params[0])),
        GateKind::Cu3 => Some(u3_matrix(gate.params[0], gate.params[1], gate.params[2])),
        _ => None,
    }
}

fn controlled_matrix(block: Mat2) -> Mat4 {
    let z = Complex64::new(0.0, 0.0);
    let o = Complex64::new(1.0, 0.0);
    [
        [o, z, z, z],
        [z, o, z, z],
        [z, z, block[0][0], block[0][1]],
        [z, z, block[1][0], block[1][1]],
    ]
}

pub fn matrix_of(gate: &GateOp) -> GateMatrix {
    match gate.kind {
        GateKind::Ry => GateMatrix::One(ry_matrix(gate.params[0])),
        GateKind::U1 => GateMatrix::One(u1_matrix(gate.params[0])),
        GateKind::U3 => GateMatrix::One(u3_matrix(gate.params[0], gate.params[1], gate.params[2])),
        GateKind::PauliX => GateMatrix::One(pauli_x_matrix()),
        GateKind::PauliY => GateMatrix::One(pauli_y_matrix()),
        GateKind::PauliZ => GateMatrix::One(pauli_z_matrix()),
        GateKind::Cu1 => GateMatrix::Two(controlled_matrix(u1_matrix(gate.params[0]))),
        GateKind::Cu3 => GateMatrix::Two(controlled_matrix(u3_matrix(
            gate.params[0],
            gate.params[1],
            gate.params[2],
        ))),
    }
}

/// One term of a parameter-shift rule; the derivative of an expectation with
/// respect to an angle is `Σ_t scale_t · [E(θ + shift_t) − E(θ − shift_t)]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShiftTerm {
    pub shift: f64,
    pub scale: f64,
}

const SINGLE_GAP: &[ShiftTerm] = &[ShiftTerm {
    shift: FRAC_PI_2,
    scale: 0.5,
}];

/// CU3's first angle mixes frequencies 1/2 (control on) and 0 (control off),
/// so expectations carry both ω = 1/2 and ω = 1 and the two-term rule is not
/// exact. The four-term rule below is, for any E(θ) band-limited to those
/// frequencies: coefficients (2 ± √2)/8 at shifts π/2 and 3π/2.
const CU3_THETA: &[ShiftTerm] = &[
    ShiftTerm {
        shift: FRAC_PI_2,
        scale: (2.0 + SQRT_2) / 8.0,
    },
    ShiftTerm {
        shift: 3.0 * FRAC_PI_2,
        scale: -(2.0 - SQRT_2) / 8.0,
    },
];

/// Shift-rule metadata for one angle of a gate kind. `Ok(None)` for the
/// non-parameterized Pauli kinds; asking for an angle index a parameterized
/// kind does not have is a configuration error.
pub fn shift_rule_of(kind: GateKind, param_index: usize) -> Result<Option<&'static [ShiftTerm]>> {
    if kind.arity() == 0 {
        if param_index == 0 {
            return Ok(None);
        }
        return Err(Error::config(format!(
            "gate {} has no parameter {param_index}",
            kind.label()
        )));
    }
    if param_index >= kind.arity() {
        return Err(Error::config(format!(
            "gate {} has no parameter {param_index} (arity {})",
            kind.label(),
            kind.arity()
        )));
    }
    match (kind, param_index) {
        (GateKind::Cu3, 0) => Ok(Some(CU3_THETA)),
        _ => Ok(Some(SINGLE_GAP)),
    }
}

/// Number of circuit evaluations one gradient entry for this angle costs.
pub fn shift_evaluations(kind: GateKind, param_index: usize) -> Result<usize> {
    Ok(shift_rule_of(kind, param_index)?.map_or(0, |terms| 2 * terms.len()))
}

/// Uniformly random circuit over the given kinds: angles uniform in [−π, π],
/// wires uniform (control ≠ target), parameterized gates marked trainable.
/// Controlled kinds require `q ≥ 2`.
pub fn random_circuit<R: Rng>(
    q: usize,
    len: usize,
    kinds: &[GateKind],
    rng: &mut R,
) -> Vec<GateOp> {
    assert!(!kinds.is_empty());
    assert!(
        q >= 2 || kinds.iter().all(|k| !k.is_controlled()),
        "controlled kinds need at least 2 qubits"
    );
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        let kind = kinds[rng.gen_range(0..kinds.len())];
        let mut params = [0.0; 3];
        for p in params.iter_mut().take(kind.arity()) {
            *p = rng.gen_range(-PI..PI);
        }
        let w0 = rng.gen_range(0..q);
        let wires = if kind.is_controlled() {
            let mut w1 = rng.gen_range(0..q);
            while w1 == w0 {
                w1 = rng.gen_range(0..q);
            }
            [w0, w1]
        } else {
            [w0, w0]
        };
        let mut g = GateOp::new(kind, wires, params);
        g.trainable = kind.is_parameterized();
        out.push(g);
    }
    out
}
