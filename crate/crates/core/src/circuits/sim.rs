use crate::channels::{hadamard, rotation_gate, rx, ry, rz};
use crate::error::{Error, Result};
use crate::linalg::{qubit_mask, CMatrix, C64, ONE, UNITARY_TOL, ZERO};
use crate::tfim::{propagator, CouplingMatrix, Tfim, TfimSpec};

use super::ir::{Circuit, Gate, GateKind};

/// The 2×2 block a gate applies to its target (on the control's `|1⟩` branch
/// for controlled kinds).
pub fn gate_unitary(gate: &Gate, params: &[f64], u: f64) -> CMatrix {
    let theta = || params[gate.param_slot.expect("validated parametrized gate")];
    match gate.kind {
        GateKind::Rx | GateKind::Crx => rx(theta()),
        GateKind::Ry | GateKind::Cry => ry(theta()),
        GateKind::Rz | GateKind::Crz => rz(theta()),
        GateKind::Cnot => CMatrix::from_vec(2, 2, vec![ZERO, ONE, ONE, ZERO]).unwrap(),
        GateKind::H => hadamard(),
        GateKind::Encode => rotation_gate(gate.axis.as_ref().expect("validated encode gate"), u),
    }
}

fn apply_local(state: &mut [C64], n_qubits: usize, target: usize, control: Option<usize>, m: &CMatrix) {
    let t = qubit_mask(target, n_qubits);
    let c = control.map(|c| qubit_mask(c, n_qubits));
    let (m00, m01, m10, m11) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
    for i0 in 0..state.len() {
        if i0 & t != 0 || c.is_some_and(|c| i0 & c == 0) {
            continue;
        }
        let i1 = i0 | t;
        let (a, b) = (state[i0], state[i1]);
        state[i0] = m00 * a + m01 * b;
        state[i1] = m10 * a + m11 * b;
    }
}

/// Applies one gate to a state vector in place.
pub fn apply_gate(state: &mut [C64], n_qubits: usize, gate: &Gate, params: &[f64], u: f64) {
    apply_local(state, n_qubits, gate.target, gate.control, &gate_unitary(gate, params, u));
}

fn check_params(c: &Circuit, params: &[f64]) -> Result<()> {
    if params.len() != c.n_params() {
        return Err(Error::ParamLength { expected: c.n_params(), got: params.len() });
    }
    Ok(())
}

/// Runs the circuit on a state vector in place.
pub fn apply_circuit(state: &mut [C64], c: &Circuit, params: &[f64], u: f64) -> Result<()> {
    check_params(c, params)?;
    if state.len() != 1 << c.n_qubits() {
        return Err(Error::Dimension(format!("state of length {} for {} qubits", state.len(), c.n_qubits())));
    }
    for g in c.gates() {
        apply_gate(state, c.n_qubits(), g, params, u);
    }
    Ok(())
}

pub fn zero_state(n_qubits: usize) -> Vec<C64> {
    let mut v = vec![ZERO; 1 << n_qubits];
    v[0] = ONE;
    v
}

/// Tensor product of single-qubit states, qubit 0 first.
pub fn product_state(qubits: &[[C64; 2]]) -> Vec<C64> {
    qubits.iter().fold(vec![ONE], |acc, q| acc.iter().flat_map(|a| [a * q[0], a * q[1]]).collect())
}

/// Product of independent Haar-random single-qubit states.
pub fn random_product_state<R: rand::Rng + ?Sized>(n_qubits: usize, rng: &mut R) -> Vec<C64> {
    use rand_distr::StandardNormal;
    let qubits: Vec<[C64; 2]> = (0..n_qubits)
        .map(|_| {
            let mut g = || C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
            let (a, b) = (g(), g());
            let norm = (a.norm_sqr() + b.norm_sqr()).sqrt();
            [a / norm, b / norm]
        })
        .collect();
    product_state(&qubits)
}

/// Full unitary `U(u, θ)` of the circuit (gates applied in list order).
pub fn compile(c: &Circuit, params: &[f64], u: f64) -> Result<CMatrix> {
    check_params(c, params)?;
    let dim = 1usize << c.n_qubits();
    // Transposed accumulator: row k holds column k of U, so gates act on contiguous slices.
    let mut cols = CMatrix::identity(dim);
    let locals: Vec<CMatrix> = c.gates().iter().map(|g| gate_unitary(g, params, u)).collect();
    for k in 0..dim {
        let col = &mut cols.data_mut()[k * dim..(k + 1) * dim];
        for (g, m) in c.gates().iter().zip(&locals) {
            apply_local(col, c.n_qubits(), g.target, g.control, m);
        }
    }
    Ok(cols.transpose())
}

/// A fixed reservoir unitary `U_res`, independent of the input.
#[derive(Clone, Debug, PartialEq)]
pub struct ReservoirUnitary {
    n_qubits: usize,
    matrix: CMatrix,
    identity: bool,
}

impl ReservoirUnitary {
    pub fn identity(n_qubits: usize) -> Self {
        Self { n_qubits, matrix: CMatrix::identity(1 << n_qubits), identity: true }
    }

    pub fn from_matrix(n_qubits: usize, matrix: CMatrix) -> Result<Self> {
        if matrix.rows() != 1 << n_qubits || !matrix.is_square() {
            return Err(Error::Dimension(format!("{}x{} reservoir on {n_qubits} qubits", matrix.rows(), matrix.cols())));
        }
        let dev = matrix.unitarity_deviation();
        if !(dev < UNITARY_TOL) {
            return Err(Error::NotUnitary(dev));
        }
        Ok(Self { n_qubits, matrix, identity: false })
    }

    /// Compiles an ansatz at fixed parameters. ENCODE gates inside the ansatz
    /// are rejected since the reservoir must not depend on the input.
    pub fn from_circuit(c: &Circuit, params: &[f64]) -> Result<Self> {
        if c.n_encode() > 0 {
            return Err(Error::Config("reservoir circuit contains ENCODE gates".into()));
        }
        let matrix = compile(c, params, 0.0)?;
        Ok(Self { n_qubits: c.n_qubits(), matrix, identity: false })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn is_identity(&self) -> bool {
        self.identity
    }

    pub fn apply(&self, state: &[C64]) -> Vec<C64> {
        if self.identity {
            state.to_vec()
        } else {
            self.matrix.matvec(state)
        }
    }
}

/// `U_res = e^{−iH·dt}` for a TFIM, behind the same interface as compiled ansätze.
pub fn tfim_as_reservoir(spec: &TfimSpec, j: &CouplingMatrix, dt: f64) -> Result<ReservoirUnitary> {
    let h = crate::tfim::hamiltonian(spec, j)?;
    Ok(ReservoirUnitary { n_qubits: spec.n_qubits, matrix: propagator(&h, dt)?, identity: false })
}

impl Tfim {
    pub fn reservoir(&self, dt: f64) -> Result<ReservoirUnitary> {
        tfim_as_reservoir(&self.spec, &self.couplings, dt)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::RotationAxis;
    use crate::circuits::{build_ansatz, encoding_layer, AnsatzId};
    use crate::linalg::{embed_single, kron, DensityMatrix};
    use crate::rng;
    use proptest::prelude::*;
    use rand::Rng;

    /// Reference gate matrix through Kronecker embedding and projector sums.
    fn embedded(g: &Gate, n: usize, params: &[f64], u: f64) -> CMatrix {
        let local = gate_unitary(g, params, u);
        match g.control {
            None => embed_single(&local, g.target, n).unwrap(),
            Some(c) => {
                let p0 = CMatrix::from_vec(2, 2, vec![ONE, ZERO, ZERO, ZERO]).unwrap();
                let p1 = CMatrix::from_vec(2, 2, vec![ZERO, ZERO, ZERO, ONE]).unwrap();
                let id = CMatrix::identity(2);
                let mut a = CMatrix::identity(1);
                let mut b = CMatrix::identity(1);
                for q in 0..n {
                    a = kron(&a, if q == c { &p0 } else { &id });
                    b = kron(&b, if q == c { &p1 } else if q == g.target { &local } else { &id });
                }
                a.add(&b)
            }
        }
    }

    fn random_params(n: usize, seed: u64) -> Vec<f64> {
        let mut r = rng::seeded(seed);
        (0..n).map(|_| r.random_range(0.0..std::f64::consts::TAU)).collect()
    }

    #[test]
    fn empty_circuit_is_identity() {
        assert_eq!(compile(&Circuit::empty(3), &[], 0.4).unwrap(), CMatrix::identity(8));
    }

    #[test]
    fn single_z_encode() {
        let c = encoding_layer(2, 1, &[RotationAxis::z()]).unwrap();
        let u = 0.77;
        let expected = kron(&rz(u), &CMatrix::identity(2));
        assert!(compile(&c, &[], u).unwrap().max_abs_diff(&expected) < 1e-15);
    }

    #[test]
    fn compile_matches_kron_products_and_state_application() {
        let c = build_ansatz(AnsatzId::new(2).unwrap(), 4).unwrap();
        let params = random_params(c.n_params(), 3);
        let u = compile(&c, &params, 0.0).unwrap();
        let reference = c.gates().iter().fold(CMatrix::identity(16), |acc, g| embedded(g, 4, &params, 0.0).matmul(&acc));
        assert!(u.max_abs_diff(&reference) < 1e-12);

        let mut state = zero_state(4);
        apply_circuit(&mut state, &c, &params, 0.0).unwrap();
        let via_matrix = u.matvec(&zero_state(4));
        for (a, b) in state.iter().zip(&via_matrix) {
            assert!((a - b).norm() < 1e-12);
        }
        assert!(u.unitarity_deviation() < 1e-11);
    }

    #[test]
    fn controlled_rotations_match_reference() {
        let c = build_ansatz(AnsatzId::new(6).unwrap(), 3).unwrap();
        let params = random_params(c.n_params(), 9);
        let u = compile(&c, &params, 0.0).unwrap();
        let reference = c.gates().iter().fold(CMatrix::identity(8), |acc, g| embedded(g, 3, &params, 0.0).matmul(&acc));
        assert!(u.max_abs_diff(&reference) < 1e-12);
    }

    #[test]
    fn compile_rejects_wrong_param_count() {
        let c = build_ansatz(AnsatzId::new(1).unwrap(), 2).unwrap();
        assert!(matches!(compile(&c, &[0.0], 0.0), Err(Error::ParamLength { expected: 4, got: 1 })));
    }

    #[test]
    fn product_ansatz_keeps_product_states() {
        let c = build_ansatz(AnsatzId::new(1).unwrap(), 4).unwrap();
        let params = random_params(c.n_params(), 5);
        let mut state = zero_state(4);
        apply_circuit(&mut state, &c, &params, 0.0).unwrap();
        let rho = DensityMatrix::pure(4, &state).unwrap();
        for q in 0..4 {
            let marginal = crate::linalg::reduced_single(&rho, q).unwrap();
            assert!((marginal.purity() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn tfim_reservoir_delegates_to_propagator() {
        let spec = TfimSpec::new(3, 1.0, 1.0, 42).unwrap();
        let tfim = Tfim::sample(spec).unwrap();
        assert!(tfim.reservoir(0.0).unwrap().matrix().max_abs_diff(&CMatrix::identity(8)) < 1e-14);
        let res = tfim_as_reservoir(&spec, &tfim.couplings, 0.6).unwrap();
        assert_eq!(res.matrix(), &tfim.propagator(0.6).unwrap());
        assert!(res.matrix().unitarity_deviation() < 1e-12);
    }

    #[test]
    fn reservoir_rejects_encodes() {
        let c = encoding_layer(2, 1, &[RotationAxis::x()]).unwrap();
        assert!(ReservoirUnitary::from_circuit(&c, &[]).is_err());
        assert!(ReservoirUnitary::from_matrix(1, CMatrix::identity(2).scale(C64::new(2.0, 0.0))).is_err());
    }

    #[test]
    fn controlled_rotation_half_period_is_control_z() {
        let c = Circuit::new(2, vec![Gate::crx(0, 1, 0)]).unwrap();
        let a = compile(&c, &[0.7], 0.0).unwrap();
        let b = compile(&c, &[0.7 + std::f64::consts::TAU], 0.0).unwrap();
        let z0 = embed_single(&crate::linalg::PauliAxis::Z.matrix(), 0, 2).unwrap();
        assert!(b.max_abs_diff(&z0.matmul(&a)) < 1e-14);
    }

    proptest! {
        #[test]
        fn parameter_periodicity(id in 1u32..=19, seed in any::<u64>(), slot_pick in any::<usize>()) {
            let c = build_ansatz(AnsatzId::new(id).unwrap(), 4).unwrap();
            let params = random_params(c.n_params(), seed);
            let mut shifted = params.clone();
            let slot = slot_pick % c.n_params();
            // Controlled rotations pick up a Z on the control after 2π.
            let controlled = c.gates().iter().any(|g| g.param_slot == Some(slot) && g.kind.is_controlled());
            shifted[slot] += if controlled { 2.0 * std::f64::consts::TAU } else { std::f64::consts::TAU };
            let a = compile(&c, &params, 0.0).unwrap();
            let b = compile(&c, &shifted, 0.0).unwrap();
            let overlap = a.adjoint().matmul(&b).trace().norm() / 16.0;
            prop_assert!((overlap - 1.0).abs() < 1e-10);
        }
    }
}
