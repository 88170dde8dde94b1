use serde::{Deserialize, Serialize};

use crate::channels::RotationAxis;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum GateKind {
    Rx,
    Ry,
    Rz,
    Cnot,
    Crx,
    Cry,
    Crz,
    H,
    /// Input-encoding rotation `exp(−i·u·(n·σ)/2)` about the gate's axis.
    Encode,
}

impl GateKind {
    pub fn is_parametrized(self) -> bool {
        matches!(self, GateKind::Rx | GateKind::Ry | GateKind::Rz | GateKind::Crx | GateKind::Cry | GateKind::Crz)
    }

    pub fn is_controlled(self) -> bool {
        matches!(self, GateKind::Cnot | GateKind::Crx | GateKind::Cry | GateKind::Crz)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub kind: GateKind,
    pub target: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub control: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub param_slot: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axis: Option<RotationAxis>,
}

impl Gate {
    fn plain(kind: GateKind, target: usize) -> Self {
        Self { kind, target, control: None, param_slot: None, axis: None }
    }

    pub fn rx(target: usize, slot: usize) -> Self {
        Self { param_slot: Some(slot), ..Self::plain(GateKind::Rx, target) }
    }

    pub fn ry(target: usize, slot: usize) -> Self {
        Self { param_slot: Some(slot), ..Self::plain(GateKind::Ry, target) }
    }

    pub fn rz(target: usize, slot: usize) -> Self {
        Self { param_slot: Some(slot), ..Self::plain(GateKind::Rz, target) }
    }

    pub fn h(target: usize) -> Self {
        Self::plain(GateKind::H, target)
    }

    pub fn cnot(control: usize, target: usize) -> Self {
        Self { control: Some(control), ..Self::plain(GateKind::Cnot, target) }
    }

    pub fn crx(control: usize, target: usize, slot: usize) -> Self {
        Self { control: Some(control), param_slot: Some(slot), ..Self::plain(GateKind::Crx, target) }
    }

    pub fn cry(control: usize, target: usize, slot: usize) -> Self {
        Self { control: Some(control), param_slot: Some(slot), ..Self::plain(GateKind::Cry, target) }
    }

    pub fn crz(control: usize, target: usize, slot: usize) -> Self {
        Self { control: Some(control), param_slot: Some(slot), ..Self::plain(GateKind::Crz, target) }
    }

    pub fn encode(target: usize, axis: RotationAxis) -> Self {
        Self { axis: Some(axis), ..Self::plain(GateKind::Encode, target) }
    }

    fn validate(&self, n_qubits: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidGate(msg));
        if self.target >= n_qubits {
            return Err(Error::QubitOutOfRange { index: self.target, n_qubits });
        }
        match (self.kind.is_controlled(), self.control) {
            (true, None) => return bad(format!("{:?} without a control", self.kind)),
            (false, Some(_)) => return bad(format!("{:?} cannot carry a control", self.kind)),
            (true, Some(c)) if c == self.target => return bad(format!("{:?} with control == target == {c}", self.kind)),
            (true, Some(c)) if c >= n_qubits => return Err(Error::QubitOutOfRange { index: c, n_qubits }),
            _ => {}
        }
        if self.kind.is_parametrized() != self.param_slot.is_some() {
            return bad(format!("{:?} must carry exactly one parameter slot iff it is parametrized", self.kind));
        }
        if (self.kind == GateKind::Encode) != self.axis.is_some() {
            return bad(format!("{:?}: only ENCODE gates carry an axis, and they must", self.kind));
        }
        Ok(())
    }
}

/// Ordered gate list on `n_qubits` qubits.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Circuit {
    n_qubits: usize,
    gates: Vec<Gate>,
    n_params: usize,
    n_encode: usize,
}

#[derive(Deserialize)]
struct CircuitRepr {
    n_qubits: usize,
    gates: Vec<Gate>,
}

impl<'de> Deserialize<'de> for Circuit {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = CircuitRepr::deserialize(d)?;
        Circuit::new(r.n_qubits, r.gates).map_err(serde::de::Error::custom)
    }
}

impl Circuit {
    /// Validates the gates and derives the parameter and encode counts.
    /// Parameter slots must cover `0..n_params` with each slot used once.
    pub fn new(n_qubits: usize, gates: Vec<Gate>) -> Result<Self> {
        if n_qubits == 0 || n_qubits > crate::linalg::MAX_QUBITS {
            return Err(Error::Config(format!("circuit needs 1..={} qubits", crate::linalg::MAX_QUBITS)));
        }
        let mut slots = Vec::new();
        for g in &gates {
            g.validate(n_qubits)?;
            slots.extend(g.param_slot);
        }
        slots.sort_unstable();
        if slots.iter().enumerate().any(|(i, &s)| i != s) {
            return Err(Error::InvalidGate(format!("parameter slots {slots:?} are not a permutation of 0..{}", slots.len())));
        }
        let n_encode = gates.iter().filter(|g| g.kind == GateKind::Encode).count();
        Ok(Self { n_qubits, n_params: slots.len(), n_encode, gates })
    }

    pub fn empty(n_qubits: usize) -> Self {
        Self::new(n_qubits, Vec::new()).expect("empty circuit is valid")
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    /// Number of ENCODE gates (`r`).
    pub fn n_encode(&self) -> usize {
        self.n_encode
    }

    pub fn count(&self, kind: GateKind) -> usize {
        self.gates.iter().filter(|g| g.kind == kind).count()
    }

    /// Gates that act on two qubits.
    pub fn n_entanglers(&self) -> usize {
        self.gates.iter().filter(|g| g.kind.is_controlled()).count()
    }

    /// Sequential composition: `other` runs after `self`, its slots shifted past ours.
    pub fn then(&self, other: &Circuit) -> Result<Circuit> {
        if self.n_qubits != other.n_qubits {
            return Err(Error::Dimension("composing circuits of different widths".into()));
        }
        let shift = self.n_params;
        let mut gates = self.gates.clone();
        gates.extend(other.gates.iter().map(|g| Gate { param_slot: g.param_slot.map(|s| s + shift), ..g.clone() }));
        Circuit::new(self.n_qubits, gates)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// `r` ENCODE gates placed round-robin: gate `i` acts on qubit `i mod n_qubits`.
pub fn encoding_layer(n_qubits: usize, r: usize, axes: &[RotationAxis]) -> Result<Circuit> {
    if r < 1 {
        return Err(Error::Config("encoding layer needs at least one gate".into()));
    }
    if axes.len() != r {
        return Err(Error::Config(format!("{} axes for {r} encoding gates", axes.len())));
    }
    let gates = axes.iter().enumerate().map(|(i, a)| Gate::encode(i % n_qubits, *a)).collect();
    Circuit::new(n_qubits, gates)
}
