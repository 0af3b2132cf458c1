//! Software noise channels.
//!
//! Gate noise is emulated by Monte Carlo trajectories: after every gate, each
//! touched wire independently receives a uniformly chosen Pauli with the
//! per-gate error probability, and expectations are averaged over
//! trajectories. Readout error is applied analytically as a (1 − 2·p) scaling
//! of every ⟨Z⟩, so it adds no Monte Carlo variance of its own. Trajectory t
//! draws from a generator seeded by (seed, t), which makes results
//! independent of evaluation order.

use rand::Rng;

use crate::error::{Error, Result};
use crate::gates::{GateKind, GateOp};
use crate::seeding;
use crate::statevector::StateVector;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseModel {
    /// Depolarizing probability after each single-qubit gate.
    pub gate_error_1q: f64,
    /// Depolarizing probability per touched wire after each two-qubit gate.
    pub gate_error_2q: f64,
    /// Readout bit-flip probability; scales every expectation by (1 − 2p).
    pub readout_flip: f64,
    pub trajectories: usize,
    pub seed: u64,
}

impl NoiseModel {
    /// Default evaluation preset. Stands in for unpublished device rates and
    /// is always recorded in run configs, never assumed.
    pub fn default_preset() -> Self {
        NoiseModel {
            gate_error_1q: 0.005,
            gate_error_2q: 0.02,
            readout_flip: 0.02,
            trajectories: 256,
            seed: 17,
        }
    }

    pub fn noiseless() -> Self {
        NoiseModel {
            gate_error_1q: 0.0,
            gate_error_2q: 0.0,
            readout_flip: 0.0,
            trajectories: 1,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("gate_error_1q", self.gate_error_1q),
            ("gate_error_2q", self.gate_error_2q),
            ("readout_flip", self.readout_flip),
        ] {
            if !(0.0..=1.0).contains(&p) || !p.is_finite() {
                return Err(Error::config(format!("{name} must lie in [0,1], got {p}")));
            }
        }
        if self.trajectories == 0 {
            return Err(Error::config("trajectory count must be at least 1"));
        }
        Ok(())
    }

    pub fn is_gate_noiseless(&self) -> bool {
        self.gate_error_1q == 0.0 && self.gate_error_2q == 0.0
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

fn random_pauli<R: Rng>(rng: &mut R, wire: usize) -> GateOp {
    match rng.gen_range(0..3u8) {
        0 => GateOp::pauli_x(wire),
        1 => GateOp::pauli_y(wire),
        _ => GateOp::pauli_z(wire),
    }
}

/// Per-wire ⟨Z⟩ estimates of the circuit run from the ground state under the
/// noise model, averaged over trajectories in index order.
pub fn noisy_forward(q: usize, circuit: &[GateOp], model: &NoiseModel) -> Result<Vec<f64>> {
    model.validate()?;
    let readout_scale = 1.0 - 2.0 * model.readout_flip;

    // Without gate noise every trajectory is identical; run once and scale.
    if model.is_gate_noiseless() {
        let state = crate::statevector::run_circuit(q, circuit)?;
        return Ok(state
            .expect_all_z()
            .into_iter()
            .map(|e| e * readout_scale)
            .collect());
    }

    let mut acc = vec![0.0; q];
    let mut exps = vec![0.0; q];
    let mut state = StateVector::ground_state(q)?;
    for t in 0..model.trajectories {
        let mut rng = seeding::rng(model.seed, t as u64);
        state.reset_ground();
        for gate in circuit {
            state.apply_gate(gate)?;
            let p = if gate.kind.num_wires() == 2 {
                model.gate_error_2q
            } else {
                model.gate_error_1q
            };
            if p > 0.0 {
                for &w in gate.wire_list() {
                    if rng.gen::<f64>() < p {
                        state.apply_gate(&random_pauli(&mut rng, w))?;
                    }
                }
            }
        }
        state.expect_all_z_into(&mut exps);
        for (a, e) in acc.iter_mut().zip(&exps) {
            *a += e;
        }
    }
    let norm = readout_scale / model.trajectories as f64;
    Ok(acc.into_iter().map(|a| a * norm).collect())
}

/// Training-time random-gate-injection baseline: after each existing gate,
/// with probability `insert_prob`, a non-trainable rotation with a uniform
/// angle in [−angle_spread, +angle_spread] lands on a uniformly chosen
/// touched wire.
#[derive(Clone, Debug, PartialEq)]
pub struct InjectionPolicy {
    pub insert_prob: f64,
    pub angle_spread: f64,
    /// Rotation kinds the inserted gates are drawn from. Only single-qubit
    /// rotations make sense here; the supported set is {RY}.
    pub kinds: Vec<GateKind>,
}

impl Default for InjectionPolicy {
    fn default() -> Self {
        InjectionPolicy {
            insert_prob: 0.1,
            angle_spread: std::f64::consts::PI / 8.0,
            kinds: vec![GateKind::Ry],
        }
    }
}

impl InjectionPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.insert_prob) || !self.insert_prob.is_finite() {
            return Err(Error::config(format!(
                "insert_prob must lie in [0,1], got {}",
                self.insert_prob
            )));
        }
        if self.angle_spread < 0.0 || !self.angle_spread.is_finite() {
            return Err(Error::config(format!(
                "angle_spread must be non-negative, got {}",
                self.angle_spread
            )));
        }
        if self.kinds.is_empty() {
            return Err(Error::config("injection needs at least one gate kind"));
        }
        for k in &self.kinds {
            if *k != GateKind::Ry {
                return Err(Error::config(format!(
                    "injection supports RY rotations only, got {}",
                    k.label()
                )));
            }
        }
        Ok(())
    }
}

/// Original gates preserved in order, with injected rotations appended after
/// the gates the draw selects.
pub fn inject_random_gates<R: Rng>(
    circuit: &[GateOp],
    policy: &InjectionPolicy,
    rng: &mut R,
) -> Result<Vec<GateOp>> {
    policy.validate()?;
    let mut out = Vec::with_capacity(circuit.len());
    for gate in circuit {
        out.push(*gate);
        if policy.insert_prob > 0.0 && rng.gen::<f64>() < policy.insert_prob {
            let wires = gate.wire_list();
            let wire = wires[rng.gen_range(0..wires.len())];
            let kind = policy.kinds[rng.gen_range(0..policy.kinds.len())];
            debug_assert_eq!(kind, GateKind::Ry);
            let angle = if policy.angle_spread == 0.0 {
                0.0
            } else {
                rng.gen_range(-policy.angle_spread..=policy.angle_spread)
            };
            out.push(GateOp::ry(wire, angle));
        }
    }
    Ok(out)
}
