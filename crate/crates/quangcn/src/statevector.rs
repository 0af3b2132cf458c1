//! Exact dense statevector simulation.
//!
//! Bit-order convention used everywhere in this crate: bit `i` of a basis
//! index is the state of qubit `i`, so qubit 0 is the least significant bit.
//! A `StateVector` holds all 2^q amplitudes; gates act in place. The
//! `DenseUnitary` oracle rebuilds the same circuits as explicit 2^q x 2^q
//! matrix products for verification.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::gates::{matrix_of, GateKind, GateMatrix, GateOp, Mat2};

pub const MAX_QUBITS: usize = 12;
pub const MAX_ORACLE_QUBITS: usize = 6;

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    num_qubits: usize,
    amps: Vec<Complex64>,
}

#[cfg(debug_assertions)]
fn debug_assert_unitary_2(u: &Mat2) {
    let mut defect: f64 = 0.0;
    for r in 0..2 {
        for c in 0..2 {
            let mut e = Complex64::new(0.0, 0.0);
            for k in 0..2 {
                e += u[k][r].conj() * u[k][c];
            }
            let id = if r == c { 1.0 } else { 0.0 };
            defect = defect.max((e - Complex64::new(id, 0.0)).norm());
        }
    }
    debug_assert!(defect < 1e-9, "non-unitary 2x2 matrix, defect {defect}");
}

#[cfg(not(debug_assertions))]
fn debug_assert_unitary_2(_u: &Mat2) {}

impl StateVector {
    /// |0...0⟩ on `q` qubits, 1 ≤ q ≤ 12.
    pub fn ground_state(q: usize) -> Result<Self> {
        if q == 0 || q > MAX_QUBITS {
            return Err(Error::config(format!(
                "qubit count {q} outside supported range 1..={MAX_QUBITS}"
            )));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << q];
        amps[0] = Complex64::new(1.0, 0.0);
        Ok(StateVector { num_qubits: q, amps })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn reset_ground(&mut self) {
        self.amps.fill(Complex64::new(0.0, 0.0));
        self.amps[0] = Complex64::new(1.0, 0.0);
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    fn check_wire(&self, wire: usize) -> Result<()> {
        if wire >= self.num_qubits {
            return Err(Error::config(format!(
                "wire {wire} out of range for {} qubits",
                self.num_qubits
            )));
        }
        Ok(())
    }

    /// Left-multiplies `u` onto every amplitude pair differing only in bit
    /// `wire`.
    pub fn apply_single(&mut self, u: &Mat2, wire: usize) -> Result<()> {
        self.check_wire(wire)?;
        debug_assert_unitary_2(u);
        let step = 1usize << wire;
        let len = self.amps.len();
        let mut base = 0;
        while base < len {
            for low in base..base + step {
                let high = low + step;
                let a = self.amps[low];
                let b = self.amps[high];
                self.amps[low] = u[0][0] * a + u[0][1] * b;
                self.amps[high] = u[1][0] * a + u[1][1] * b;
            }
            base += 2 * step;
        }
        Ok(())
    }

    /// Applies `u` to the target within the subspace where the control bit
    /// is 1; identity elsewhere.
    pub fn apply_controlled(&mut self, u: &Mat2, control: usize, target: usize) -> Result<()> {
        self.check_wire(control)?;
        self.check_wire(target)?;
        if control == target {
            return Err(Error::config(format!(
                "control and target coincide on wire {control}"
            )));
        }
        debug_assert_unitary_2(u);
        let cbit = 1usize << control;
        let tbit = 1usize << target;
        for low in 0..self.amps.len() {
            if low & cbit != 0 && low & tbit == 0 {
                let high = low | tbit;
                let a = self.amps[low];
                let b = self.amps[high];
                self.amps[low] = u[0][0] * a + u[0][1] * b;
                self.amps[high] = u[1][0] * a + u[1][1] * b;
            }
        }
        Ok(())
    }

    /// Fast path for U1: multiplies amplitudes whose `wire` bit is set.
    pub fn apply_phase(&mut self, phase: Complex64, wire: usize) -> Result<()> {
        self.check_wire(wire)?;
        let bit = 1usize << wire;
        for (idx, amp) in self.amps.iter_mut().enumerate() {
            if idx & bit != 0 {
                *amp *= phase;
            }
        }
        Ok(())
    }

    /// Fast path for CU1: multiplies amplitudes with both bits set.
    pub fn apply_controlled_phase(
        &mut self,
        phase: Complex64,
        control: usize,
        target: usize,
    ) -> Result<()> {
        self.check_wire(control)?;
        self.check_wire(target)?;
        if control == target {
            return Err(Error::config(format!(
                "control and target coincide on wire {control}"
            )));
        }
        let mask = (1usize << control) | (1usize << target);
        for (idx, amp) in self.amps.iter_mut().enumerate() {
            if idx & mask == mask {
                *amp *= phase;
            }
        }
        Ok(())
    }

    fn apply_pauli(&mut self, kind: GateKind, wire: usize) -> Result<()> {
        self.check_wire(wire)?;
        let step = 1usize << wire;
        let len = self.amps.len();
        let mut base = 0;
        while base < len {
            for low in base..base + step {
                let high = low + step;
                match kind {
                    GateKind::PauliX => self.amps.swap(low, high),
                    GateKind::PauliY => {
                        let a = self.amps[low];
                        let b = self.amps[high];
                        self.amps[low] = Complex64::new(b.im, -b.re); // −i·b
                        self.amps[high] = Complex64::new(-a.im, a.re); // i·a
                    }
                    GateKind::PauliZ => self.amps[high] = -self.amps[high],
                    _ => unreachable!("not a Pauli kind"),
                }
            }
            base += 2 * step;
        }
        Ok(())
    }

    pub fn apply_gate(&mut self, gate: &GateOp) -> Result<()> {
        gate.validate(self.num_qubits)?;
        match gate.kind {
            GateKind::U1 => self.apply_phase(Complex64::cis(gate.params[0]), gate.wires[0]),
            GateKind::Cu1 => self.apply_controlled_phase(
                Complex64::cis(gate.params[0]),
                gate.wires[0],
                gate.wires[1],
            ),
            GateKind::PauliX | GateKind::PauliY | GateKind::PauliZ => {
                self.apply_pauli(gate.kind, gate.wires[0])
            }
            GateKind::Ry | GateKind::U3 => {
                let GateMatrix::One(u) = matrix_of(gate) else {
                    unreachable!()
                };
                self.apply_single(&u, gate.wires[0])
            }
            GateKind::Cu3 => {
                let u = crate::gates::controlled_block(gate).expect("CU3 has a block");
                self.apply_controlled(&u, gate.wires[0], gate.wires[1])
            }
        }
    }

    /// ⟨Z⟩ on one wire: Σ_b |amp_b|² · (+1 if bit `wire` of b is 0 else −1).
    pub fn expect_z(&self, wire: usize) -> Result<f64> {
        self.check_wire(wire)?;
        let bit = 1usize << wire;
        let mut e = 0.0;
        for (idx, amp) in self.amps.iter().enumerate() {
            let p = amp.norm_sqr();
            if idx & bit == 0 {
                e += p;
            } else {
                e -= p;
            }
        }
        Ok(e)
    }

    pub fn expect_all_z_into(&self, out: &mut [f64]) {
        assert_eq!(out.len(), self.num_qubits);
        out.fill(0.0);
        for (idx, amp) in self.amps.iter().enumerate() {
            let p = amp.norm_sqr();
            for (wire, o) in out.iter_mut().enumerate() {
                if idx & (1usize << wire) == 0 {
                    *o += p;
                } else {
                    *o -= p;
                }
            }
        }
    }

    pub fn expect_all_z(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.num_qubits];
        self.expect_all_z_into(&mut out);
        out
    }
}

pub fn run_circuit_into(state: &mut StateVector, circuit: &[GateOp]) -> Result<()> {
    for gate in circuit {
        state.apply_gate(gate)?;
    }
    Ok(())
}

/// Ground state pushed through the circuit.
pub fn run_circuit(q: usize, circuit: &[GateOp]) -> Result<StateVector> {
    let mut state = StateVector::ground_state(q)?;
    run_circuit_into(&mut state, circuit)?;
    Ok(state)
}

/// Per-wire ⟨Z⟩ of the circuit run from the ground state.
pub fn circuit_expectations(q: usize, circuit: &[GateOp]) -> Result<Vec<f64>> {
    Ok(run_circuit(q, circuit)?.expect_all_z())
}

/// Explicit 2^q x 2^q matrix, row-major. Only used for verification.
#[derive(Clone, Debug)]
pub struct DenseUnitary {
    dim: usize,
    entries: Vec<Complex64>,
}

impl DenseUnitary {
    pub fn identity(dim: usize) -> Self {
        let mut entries = vec![Complex64::new(0.0, 0.0); dim * dim];
        for i in 0..dim {
            entries[i * dim + i] = Complex64::new(1.0, 0.0);
        }
        DenseUnitary { dim, entries }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.entries[row * self.dim + col]
    }

    /// Embeds a gate into the full register: entry (r, s) is the gate-matrix
    /// element selected by the gate-wire bits of r and s when all off-wire
    /// bits agree, zero otherwise. The first listed wire is the high bit of
    /// the local index, matching the 4x4 convention in the gate library.
    pub fn embed(q: usize, gate: &GateOp) -> Result<Self> {
        gate.validate(q)?;
        let dim = 1usize << q;
        let wires = gate.wire_list();
        let mut off_mask = usize::MAX >> (usize::BITS as usize - q);
        for &w in wires {
            off_mask &= !(1usize << w);
        }
        let local = |basis: usize| -> usize {
            let mut v = 0;
            for &w in wires {
                v = (v << 1) | ((basis >> w) & 1);
            }
            v
        };
        let mut entries = vec![Complex64::new(0.0, 0.0); dim * dim];
        match matrix_of(gate) {
            GateMatrix::One(m) => {
                for r in 0..dim {
                    for s in 0..dim {
                        if r & off_mask == s & off_mask {
                            entries[r * dim + s] = m[local(r)][local(s)];
                        }
                    }
                }
            }
            GateMatrix::Two(m) => {
                for r in 0..dim {
                    for s in 0..dim {
                        if r & off_mask == s & off_mask {
                            entries[r * dim + s] = m[local(r)][local(s)];
                        }
                    }
                }
            }
        }
        Ok(DenseUnitary { dim, entries })
    }

    pub fn matmul(&self, rhs: &DenseUnitary) -> DenseUnitary {
        assert_eq!(self.dim, rhs.dim);
        let d = self.dim;
        let mut entries = vec![Complex64::new(0.0, 0.0); d * d];
        for r in 0..d {
            for k in 0..d {
                let a = self.entries[r * d + k];
                if a.norm_sqr() == 0.0 {
                    continue;
                }
                for c in 0..d {
                    entries[r * d + c] += a * rhs.entries[k * d + c];
                }
            }
        }
        DenseUnitary { dim: d, entries }
    }

    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(v.len(), self.dim);
        let d = self.dim;
        let mut out = vec![Complex64::new(0.0, 0.0); d];
        for r in 0..d {
            let mut acc = Complex64::new(0.0, 0.0);
            for c in 0..d {
                acc += self.entries[r * d + c] * v[c];
            }
            out[r] = acc;
        }
        out
    }

    /// max |(U†U − I)_{rc}|.
    pub fn unitarity_defect(&self) -> f64 {
        let d = self.dim;
        let mut defect: f64 = 0.0;
        for r in 0..d {
            for c in 0..d {
                let mut e = Complex64::new(0.0, 0.0);
                for k in 0..d {
                    e += self.entries[k * d + r].conj() * self.entries[k * d + c];
                }
                let id = if r == c { 1.0 } else { 0.0 };
                defect = defect.max((e - Complex64::new(id, 0.0)).norm());
            }
        }
        defect
    }
}

/// Full product of embedded gate matrices in circuit order. Refuses q > 6;
/// the cost grows as 4^q and the oracle exists only to check the simulator.
pub fn dense_oracle(circuit: &[GateOp], q: usize) -> Result<DenseUnitary> {
    if q == 0 || q > MAX_ORACLE_QUBITS {
        return Err(Error::config(format!(
            "dense oracle supports 1..={MAX_ORACLE_QUBITS} qubits, got {q}"
        )));
    }
    let mut acc = DenseUnitary::identity(1 << q);
    for gate in circuit {
        // Gates act on the state left-to-right, so each new gate
        // left-multiplies the accumulated product.
        acc = DenseUnitary::embed(q, gate)?.matmul(&acc);
    }
    Ok(acc)
}
