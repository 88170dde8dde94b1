//! The nineteen hardware-efficient ansatz templates of Sim, Johnson and
//! Aspuru-Guzik (2019), generalized from four qubits to `n ≥ 2`.
//!
//! Qubit 0 is the top wire of the original drawings. CZ does not exist in the
//! gate set and is emitted as `H(t) · CNOT(c, t) · H(t)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::ir::{Circuit, Gate};

pub const ANSATZ_IDS: std::ops::RangeInclusive<u32> = 1..=19;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AnsatzId {
    pub id: u32,
    pub layers: usize,
}

impl AnsatzId {
    /// One layer of template `id`.
    pub fn new(id: u32) -> Result<Self> {
        Self::with_layers(id, 1)
    }

    pub fn with_layers(id: u32, layers: usize) -> Result<Self> {
        if !ANSATZ_IDS.contains(&id) {
            return Err(Error::UnknownAnsatz(id));
        }
        if layers == 0 {
            return Err(Error::Config("ansatz needs at least one layer".into()));
        }
        Ok(Self { id, layers })
    }
}

/// One-line structure of each template (per layer).
pub fn ansatz_description(id: u32) -> Result<&'static str> {
    Ok(match id {
        1 => "RX, RZ on every qubit; no entanglers (product state)",
        2 => "RX, RZ on every qubit; CNOT chain (q+1 -> q) from the bottom wire up",
        3 => "RX, RZ on every qubit; CRZ chain (q+1 -> q) from the bottom wire up",
        4 => "RX, RZ on every qubit; CRX chain (q+1 -> q) from the bottom wire up",
        5 => "RX, RZ on every qubit; all-to-all CRZ (every control, bottom wire first, onto every other wire); RX, RZ on every qubit",
        6 => "RX, RZ on every qubit; all-to-all CRX (every control, bottom wire first, onto every other wire); RX, RZ on every qubit",
        7 => "RX, RZ on every qubit; CRZ on pairs (2k+1 -> 2k); RX, RZ on every qubit; CRZ on pairs (2k+2 -> 2k+1)",
        8 => "RX, RZ on every qubit; CRX on pairs (2k+1 -> 2k); RX, RZ on every qubit; CRX on pairs (2k+2 -> 2k+1)",
        9 => "H on every qubit; CZ chain (q+1, q) from the bottom wire up; RX on every qubit",
        10 => "RY on every qubit; CZ ring (q+1, q) from the bottom wire up, closed by (0, n-1); RY on every qubit",
        11 => "RY, RZ on every qubit; CNOT on pairs (2k+1 -> 2k); RY, RZ on the inner qubits 1..n-2; CNOT on pairs (2k+2 -> 2k+1)",
        12 => "RY, RZ on every qubit; CZ on pairs (2k+1, 2k); RY, RZ on the inner qubits 1..n-2; CZ on pairs (2k+2, 2k+1)",
        13 => "RY on every qubit; CRZ ring (n-1 -> 0, then q -> q+1 from the bottom up); RY on every qubit; CRZ ring (n-1 -> n-2, 0 -> n-1, then q -> q-1 from the top down)",
        14 => "RY on every qubit; CRX ring (n-1 -> 0, then q -> q+1 from the bottom up); RY on every qubit; CRX ring (n-1 -> n-2, 0 -> n-1, then q -> q-1 from the top down)",
        15 => "RY on every qubit; CNOT ring (n-1 -> 0, then q -> q+1 from the bottom up); RY on every qubit; CNOT ring (n-1 -> n-2, 0 -> n-1, then q -> q-1 from the top down)",
        16 => "RX, RZ on every qubit; CRZ on pairs (2k+1 -> 2k); CRZ on pairs (2k+2 -> 2k+1)",
        17 => "RX, RZ on every qubit; CRX on pairs (2k+1 -> 2k); CRX on pairs (2k+2 -> 2k+1)",
        18 => "RX, RZ on every qubit; CRZ ring (n-1 -> 0, then q -> q+1 from the bottom up)",
        19 => "RX, RZ on every qubit; CRX ring (n-1 -> 0, then q -> q+1 from the bottom up)",
        _ => return Err(Error::UnknownAnsatz(id)),
    })
}

#[derive(Clone, Copy)]
enum Rot {
    X,
    Y,
    Z,
}

#[derive(Clone, Copy)]
enum Ent {
    Cnot,
    Cz,
    Crx,
    Crz,
}

struct Builder {
    n: usize,
    gates: Vec<Gate>,
    next_slot: usize,
}

impl Builder {
    fn slot(&mut self) -> usize {
        self.next_slot += 1;
        self.next_slot - 1
    }

    fn rot(&mut self, r: Rot, q: usize) {
        let s = self.slot();
        self.gates.push(match r {
            Rot::X => Gate::rx(q, s),
            Rot::Y => Gate::ry(q, s),
            Rot::Z => Gate::rz(q, s),
        });
    }

    /// Each rotation in `rots` on every qubit in `qubits`, qubit-major.
    fn column(&mut self, rots: &[Rot], qubits: impl IntoIterator<Item = usize>) {
        for q in qubits {
            for &r in rots {
                self.rot(r, q);
            }
        }
    }

    fn all(&mut self, rots: &[Rot]) {
        self.column(rots, 0..self.n);
    }

    fn ent(&mut self, e: Ent, control: usize, target: usize) {
        match e {
            Ent::Cnot => self.gates.push(Gate::cnot(control, target)),
            Ent::Cz => {
                self.gates.push(Gate::h(target));
                self.gates.push(Gate::cnot(control, target));
                self.gates.push(Gate::h(target));
            }
            Ent::Crx => {
                let s = self.slot();
                self.gates.push(Gate::crx(control, target, s));
            }
            Ent::Crz => {
                let s = self.slot();
                self.gates.push(Gate::crz(control, target, s));
            }
        }
    }

    /// `(q+1 → q)` for q = n-2 down to 0.
    fn chain(&mut self, e: Ent) {
        for q in (0..self.n - 1).rev() {
            self.ent(e, q + 1, q);
        }
    }

    /// `(2k+1 → 2k)`.
    fn even_pairs(&mut self, e: Ent) {
        let n = self.n;
        for k in (0..n).step_by(2).filter(|k| k + 1 < n) {
            self.ent(e, k + 1, k);
        }
    }

    /// `(2k+2 → 2k+1)`.
    fn odd_pairs(&mut self, e: Ent) {
        let n = self.n;
        for k in (1..n).step_by(2).filter(|k| k + 1 < n) {
            self.ent(e, k + 1, k);
        }
    }

    /// Every ordered pair, controls from the bottom wire up, targets bottom-up.
    fn all_to_all(&mut self, e: Ent) {
        for c in (0..self.n).rev() {
            for t in (0..self.n).rev().filter(|&t| t != c) {
                self.ent(e, c, t);
            }
        }
    }

    /// `(n-1 → 0)`, then `(q → q+1)` for q = n-2 down to 0.
    fn ring_down(&mut self, e: Ent) {
        let n = self.n;
        self.ent(e, n - 1, 0);
        for q in (0..n - 1).rev() {
            self.ent(e, q, q + 1);
        }
    }

    /// `(n-1 → n-2)`, `(0 → n-1)`, then `(q → q-1)` for q = 1..n-2.
    fn ring_up(&mut self, e: Ent) {
        let n = self.n;
        self.ent(e, n - 1, n - 2);
        self.ent(e, 0, n - 1);
        for q in 1..n - 1 {
            self.ent(e, q, q - 1);
        }
    }

    /// CZ ring: chain bottom-up, closed by the (0, n-1) link.
    fn cz_ring(&mut self) {
        self.chain(Ent::Cz);
        if self.n > 2 {
            self.ent(Ent::Cz, 0, self.n - 1);
        }
    }
}

fn layer(b: &mut Builder, id: u32) {
    use Rot::*;
    let inner = 1..b.n - 1;
    match id {
        1 => b.all(&[X, Z]),
        2 => {
            b.all(&[X, Z]);
            b.chain(Ent::Cnot);
        }
        3 | 4 => {
            b.all(&[X, Z]);
            b.chain(if id == 3 { Ent::Crz } else { Ent::Crx });
        }
        5 | 6 => {
            b.all(&[X, Z]);
            b.all_to_all(if id == 5 { Ent::Crz } else { Ent::Crx });
            b.all(&[X, Z]);
        }
        7 | 8 => {
            let e = if id == 7 { Ent::Crz } else { Ent::Crx };
            b.all(&[X, Z]);
            b.even_pairs(e);
            b.all(&[X, Z]);
            b.odd_pairs(e);
        }
        9 => {
            for q in 0..b.n {
                b.gates.push(Gate::h(q));
            }
            b.chain(Ent::Cz);
            b.all(&[X]);
        }
        10 => {
            b.all(&[Y]);
            b.cz_ring();
            b.all(&[Y]);
        }
        11 | 12 => {
            let e = if id == 11 { Ent::Cnot } else { Ent::Cz };
            b.all(&[Y, Z]);
            b.even_pairs(e);
            b.column(&[Y, Z], inner);
            b.odd_pairs(e);
        }
        13..=15 => {
            let e = match id {
                13 => Ent::Crz,
                14 => Ent::Crx,
                _ => Ent::Cnot,
            };
            b.all(&[Y]);
            b.ring_down(e);
            b.all(&[Y]);
            b.ring_up(e);
        }
        16 | 17 => {
            let e = if id == 16 { Ent::Crz } else { Ent::Crx };
            b.all(&[X, Z]);
            b.even_pairs(e);
            b.odd_pairs(e);
        }
        18 | 19 => {
            b.all(&[X, Z]);
            b.ring_down(if id == 18 { Ent::Crz } else { Ent::Crx });
        }
        _ => unreachable!("id validated by AnsatzId"),
    }
}

/// Builds template `id.id`, repeated `id.layers` times with fresh parameters.
pub fn build_ansatz(id: AnsatzId, n_qubits: usize) -> Result<Circuit> {
    if !ANSATZ_IDS.contains(&id.id) {
        return Err(Error::UnknownAnsatz(id.id));
    }
    if n_qubits < 2 {
        return Err(Error::Config(format!("ansatz templates need at least 2 qubits, got {n_qubits}")));
    }
    let mut b = Builder { n: n_qubits, gates: Vec::new(), next_slot: 0 };
    for _ in 0..id.layers {
        layer(&mut b, id.id);
    }
    Circuit::new(n_qubits, b.gates)
}
