//! Explicit bucket-brigade query circuits for the CSWAP architecture at
//! small n, with a brute-force oracle for the QRAM unitary.
//!
//! The hardware map follows the single-rail layout: n staging cavities at
//! the top of the tree, one router per tree node, two output cavities per
//! internal router (the waiting spots feeding the next level), and one
//! data-access cavity next to each bottom router. The bus physically enters
//! through the same top port as the addresses; the simulation gives it a
//! dedicated injection mode (`BusPort`) so the basis is static, and the
//! hardware cavity count excludes that extra mode.
//!
//! Scheduling: a timestep is one CZ-class gate time. Qubits are pipelined
//! down the tree in "pair units" of two timesteps (the C0SWAP and C1SWAP at
//! one level), each qubit starting two units after its predecessor; router
//! setting and other beamsplitter swaps are free. Routing out is the exact
//! mirror of routing in, and the two data-copy layers sit in between.

use num_complex::Complex64 as C64;
use std::collections::HashMap;
use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};
use crate::fock::{apply_local_unitary, build_basis, BasisRef, PureState};
use crate::gates::{
    beamsplitter_unitary, cswap_unitary, cz_unitary, mode_rotation, CswapVariant, DataCopyVariant,
};

/// Hardware element of the query tree.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Element {
    /// Top-of-tree staging cavity for address qubit `k`.
    Staging(u32),
    /// Injection port the bus occupies before/after routing (simulation
    /// mode; physically the bus shares the staging bank).
    BusPort,
    /// Router at `level` (0 = root), position `index` within the level.
    Router { level: u32, index: u32 },
    /// Output cavity of an internal router: `index = 2*router + side`.
    Output { level: u32, index: u32 },
    /// Data-access cavity of bottom router `index`.
    Access(u32),
}

impl Element {
    pub fn label(&self) -> String {
        match self {
            Element::Staging(k) => format!("staging_{k}"),
            Element::BusPort => "bus_port".into(),
            Element::Router { level, index } => format!("router_{level}_{index}"),
            Element::Output { level, index } => format!("output_{level}_{index}"),
            Element::Access(k) => format!("access_{k}"),
        }
    }
}

/// Gate on hardware elements. Swaps and software rotations are free;
/// CSWAP and data-copy CZs occupy timesteps.
#[derive(Clone, Debug)]
pub enum CircuitGate {
    /// 50:50-beamsplitter-based swap between two cavities.
    Swap { a: Element, b: Element, inverse: bool },
    CSwap {
        variant: CswapVariant,
        control: Element,
        above: Element,
        below: Element,
        inverse: bool,
    },
    /// Classically controlled data-copy CZ; `active` when the data bit is 1.
    DataCz { variant: DataCopyVariant, bus: Element, router: Element, active: bool },
    /// Software Z on the bus (part of the C0Z compilation).
    SoftZ { mode: Element },
}

#[derive(Clone, Debug)]
pub struct ScheduledGate {
    pub gate: CircuitGate,
    /// 1-based timestep for CZ-class gates; None for free operations.
    pub timestep: Option<u32>,
}

/// Built query circuit over the hardware map.
pub struct QramCircuit {
    pub n: u32,
    pub data: Vec<u8>,
    pub elements: Vec<Element>,
    pub gates: Vec<ScheduledGate>,
    index: HashMap<Element, usize>,
}

impl QramCircuit {
    pub fn mode_of(&self, e: Element) -> usize {
        self.index[&e]
    }

    /// Hardware cavity count (the bus injection port is not a separate
    /// physical cavity).
    pub fn cavity_count(&self) -> u64 {
        (self.elements.len() - 1) as u64
    }

    /// Number of CZ-class gate slots (CSWAPs and data-copy slots, counting
    /// inactive classically-controlled slots).
    pub fn cz_gate_count(&self) -> u64 {
        self.gates
            .iter()
            .filter(|g| {
                matches!(g.gate, CircuitGate::CSwap { .. } | CircuitGate::DataCz { .. })
            })
            .count() as u64
    }

    /// Largest assigned timestep.
    pub fn timestep_span(&self) -> u32 {
        self.gates.iter().filter_map(|g| g.timestep).max().unwrap_or(0)
    }

    /// Gate list as JSON (gate, operands, timestep).
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "n": self.n,
            "data": self.data,
            "elements": self.elements.iter().map(|e| e.label()).collect::<Vec<_>>(),
            "gates": self.gates.iter().map(|g| {
                let (name, ops): (String, Vec<String>) = match &g.gate {
                    CircuitGate::Swap { a, b, inverse } => (
                        if *inverse { "swap_dag".into() } else { "swap".into() },
                        vec![a.label(), b.label()],
                    ),
                    CircuitGate::CSwap { variant, control, above, below, inverse } => (
                        format!(
                            "c{}swap{}",
                            if *variant == CswapVariant::C0 { 0 } else { 1 },
                            if *inverse { "_dag" } else { "" }
                        ),
                        vec![control.label(), above.label(), below.label()],
                    ),
                    CircuitGate::DataCz { variant, bus, router, active } => (
                        format!(
                            "c{}z{}",
                            if *variant == DataCopyVariant::C0Z { 0 } else { 1 },
                            if *active { "" } else { "_inactive" }
                        ),
                        vec![bus.label(), router.label()],
                    ),
                    CircuitGate::SoftZ { mode } => ("soft_z".into(), vec![mode.label()]),
                };
                serde_json::json!({ "gate": name, "operands": ops, "timestep": g.timestep })
            }).collect::<Vec<_>>(),
        })
    }
}

/// Qubits routed into the tree, in entry order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Qubit {
    Address(u32),
    Bus,
}

/// Build the pipelined query circuit for `n` address bits and a classical
/// data vector of length 2^n.
pub fn build_qram_circuit(n: u32, data: &[u8]) -> Result<QramCircuit> {
    if n < 2 {
        return Err(Error::CircuitSize(n, "need at least two address bits".into()));
    }
    let cap = 1u64 << n;
    if data.len() as u64 != cap {
        return Err(Error::CircuitSize(n, format!("data length {} != 2^n", data.len())));
    }

    let mut elements = Vec::new();
    for k in 0..n {
        elements.push(Element::Staging(k));
    }
    elements.push(Element::BusPort);
    for level in 0..n {
        for index in 0..(1u32 << level) {
            elements.push(Element::Router { level, index });
        }
    }
    for level in 0..(n - 1) {
        for index in 0..(1u32 << (level + 1)) {
            elements.push(Element::Output { level, index });
        }
    }
    for index in 0..(1u32 << (n - 1)) {
        elements.push(Element::Access(index));
    }
    let index: HashMap<Element, usize> =
        elements.iter().enumerate().map(|(i, e)| (*e, i)).collect();

    // staging cavity (or bus port) feeding level 0, otherwise the parent
    // output above position p at the given level
    let above = |q: Qubit, level: u32, p: u32| -> Element {
        if level == 0 {
            match q {
                Qubit::Address(k) => Element::Staging(k),
                Qubit::Bus => Element::BusPort,
            }
        } else {
            Element::Output { level: level - 1, index: p }
        }
    };

    // pipelined start units (1-based): address 1 at unit 1, later qubits
    // two units apart; the bus follows the last address
    let start_unit = |q: Qubit| -> u32 {
        match q {
            Qubit::Address(0) => 0,
            Qubit::Address(1) => 1,
            Qubit::Address(k) => 2 * (k - 1),
            Qubit::Bus => 2 * (n - 1),
        }
    };
    // deepest level the qubit is CSWAP-routed through (exclusive)
    let depth = |q: Qubit| -> u32 {
        match q {
            Qubit::Address(k) => k,
            Qubit::Bus => n - 1,
        }
    };

    let total_units = 3 * n - 4;
    let t_in_end = 2 * total_units; // last in-routing timestep

    let mut in_gates: Vec<ScheduledGate> = Vec::new();
    // address 0 is set directly
    in_gates.push(ScheduledGate {
        gate: CircuitGate::Swap {
            a: Element::Staging(0),
            b: Element::Router { level: 0, index: 0 },
            inverse: false,
        },
        timestep: None,
    });
    let mut qubits: Vec<Qubit> = (1..n).map(Qubit::Address).collect();
    qubits.push(Qubit::Bus);
    // emit in unit order so the gate list is executable sequentially
    for unit in 1..=total_units {
        for &q in &qubits {
            let s = start_unit(q);
            if unit < s || unit >= s + depth(q) {
                continue;
            }
            let level = unit - s;
            for p in 0..(1u32 << level) {
                in_gates.push(ScheduledGate {
                    gate: CircuitGate::CSwap {
                        variant: CswapVariant::C0,
                        control: Element::Router { level, index: p },
                        above: above(q, level, p),
                        below: Element::Output { level, index: 2 * p },
                        inverse: false,
                    },
                    timestep: Some(2 * unit - 1),
                });
            }
            for p in 0..(1u32 << level) {
                in_gates.push(ScheduledGate {
                    gate: CircuitGate::CSwap {
                        variant: CswapVariant::C1,
                        control: Element::Router { level, index: p },
                        above: above(q, level, p),
                        below: Element::Output { level, index: 2 * p + 1 },
                        inverse: false,
                    },
                    timestep: Some(2 * unit),
                });
            }
            // arrival actions are free and happen right after the last pair
            if level == depth(q) - 1 {
                match q {
                    Qubit::Address(k) => {
                        for j in 0..(1u32 << k) {
                            in_gates.push(ScheduledGate {
                                gate: CircuitGate::Swap {
                                    a: Element::Output { level: k - 1, index: j },
                                    b: Element::Router { level: k, index: j },
                                    inverse: false,
                                },
                                timestep: None,
                            });
                        }
                    }
                    Qubit::Bus => {
                        for j in 0..(1u32 << (n - 1)) {
                            in_gates.push(ScheduledGate {
                                gate: CircuitGate::Swap {
                                    a: Element::Output { level: n - 2, index: j },
                                    b: Element::Access(j),
                                    inverse: false,
                                },
                                timestep: None,
                            });
                        }
                    }
                }
            }
        }
    }

    // data-copy layers: C0Z accesses the even location, C1Z the odd one
    let mut data_gates: Vec<ScheduledGate> = Vec::new();
    for j in 0..(1u32 << (n - 1)) {
        data_gates.push(ScheduledGate {
            gate: CircuitGate::DataCz {
                variant: DataCopyVariant::C0Z,
                bus: Element::Access(j),
                router: Element::Router { level: n - 1, index: j },
                active: data[(2 * j) as usize] == 1,
            },
            timestep: Some(t_in_end + 1),
        });
        if data[(2 * j) as usize] == 1 {
            data_gates.push(ScheduledGate {
                gate: CircuitGate::SoftZ { mode: Element::Access(j) },
                timestep: None,
            });
        }
    }
    for j in 0..(1u32 << (n - 1)) {
        data_gates.push(ScheduledGate {
            gate: CircuitGate::DataCz {
                variant: DataCopyVariant::C1Z,
                bus: Element::Access(j),
                router: Element::Router { level: n - 1, index: j },
                active: data[(2 * j + 1) as usize] == 1,
            },
            timestep: Some(t_in_end + 2),
        });
    }

    // routing out is the exact reverse of routing in
    let total_ts = 2 * t_in_end + 2;
    let mut out_gates: Vec<ScheduledGate> = Vec::new();
    for g in in_gates.iter().rev() {
        let gate = match &g.gate {
            CircuitGate::Swap { a, b, inverse } => {
                CircuitGate::Swap { a: *a, b: *b, inverse: !inverse }
            }
            CircuitGate::CSwap { variant, control, above, below, inverse } => CircuitGate::CSwap {
                variant: *variant,
                control: *control,
                above: *above,
                below: *below,
                inverse: !inverse,
            },
            other => other.clone(),
        };
        out_gates.push(ScheduledGate { gate, timestep: g.timestep.map(|t| total_ts + 1 - t) });
    }

    let mut gates = in_gates;
    gates.extend(data_gates);
    gates.extend(out_gates);
    Ok(QramCircuit { n, data: data.to_vec(), elements, gates, index })
}

/// Outcome of an ideal (noiseless) query simulation.
#[derive(Clone, Debug)]
pub struct QueryOutcome {
    /// Overlap-squared with the oracle state.
    pub fidelity: f64,
    /// Probability left anywhere in the tree (routers/outputs/access).
    pub tree_vacuum_residual: f64,
    /// Final state norm (drops below one only on cutoff truncation).
    pub norm: f64,
    pub final_state: PureState,
}

/// Statevector simulator over the hardware map with per-cavity cutoff 2 and
/// a global excitation cutoff of n + 1 (addresses plus the bus).
pub struct CircuitSimulator {
    pub basis: BasisRef,
    circuit_modes: Vec<Element>,
}

impl CircuitSimulator {
    pub fn new(circuit: &QramCircuit) -> Result<Self> {
        let basis = build_basis(circuit.elements.len(), 2, Some(circuit.n + 1), 0)?;
        Ok(Self { basis, circuit_modes: circuit.elements.clone() })
    }

    /// Initial product state: address amplitudes over the staging cavities
    /// (most-significant bit in staging 0) and the bus in (|0> + |1>)/sqrt2.
    pub fn initial_state(&self, circuit: &QramCircuit, address: &[C64]) -> PureState {
        let n = circuit.n;
        assert_eq!(address.len(), 1 << n);
        let sq = std::f64::consts::FRAC_1_SQRT_2;
        let mut st = PureState::zero(self.basis.clone());
        for (i, amp) in address.iter().enumerate() {
            if amp.norm() == 0.0 {
                continue;
            }
            for bus_bit in 0..=1u8 {
                let mut occ = vec![0u8; self.circuit_modes.len()];
                for k in 0..n {
                    occ[circuit.mode_of(Element::Staging(k))] =
                        ((i >> (n - 1 - k)) & 1) as u8;
                }
                occ[circuit.mode_of(Element::BusPort)] = bus_bit;
                let idx = self.basis.index_of_modes(&occ);
                st.amplitudes[idx] += amp * sq;
            }
        }
        st
    }

    fn local_swap(&self, inverse: bool) -> ndarray::Array2<C64> {
        let mini = build_basis(2, 2, None, 0).expect("mini basis");
        let bs = beamsplitter_unitary(&mini, 0, 1, FRAC_PI_2).expect("bs");
        let u = bs.matmul(&bs);
        if inverse {
            u.dagger().matrix.to_dense()
        } else {
            u.matrix.to_dense()
        }
    }

    fn local_cswap(&self, variant: CswapVariant, inverse: bool) -> ndarray::Array2<C64> {
        let mini = build_basis(3, 2, None, 0).expect("mini basis");
        let u = cswap_unitary(&mini, 0, 1, 2, variant).expect("cswap");
        if inverse {
            u.dagger().matrix.to_dense()
        } else {
            u.matrix.to_dense()
        }
    }

    /// Run the gate list on a state.
    pub fn run(&self, circuit: &QramCircuit, state: &PureState) -> PureState {
        let mut amps = state.amplitudes.clone();
        let mini2 = build_basis(2, 2, None, 0).expect("mini basis");
        let cz = cz_unitary(&mini2, 0, 1).expect("cz").matrix.to_dense();
        let mini1 = build_basis(1, 2, None, 0).expect("mini basis");
        let softz = mode_rotation(&mini1, 0, std::f64::consts::PI).expect("z").matrix.to_dense();
        for g in &circuit.gates {
            match &g.gate {
                CircuitGate::Swap { a, b, inverse } => {
                    let u = self.local_swap(*inverse);
                    amps = apply_local_unitary(
                        &self.basis,
                        &[circuit.mode_of(*a), circuit.mode_of(*b)],
                        &u,
                        &amps,
                    );
                }
                CircuitGate::CSwap { variant, control, above, below, inverse } => {
                    let u = self.local_cswap(*variant, *inverse);
                    amps = apply_local_unitary(
                        &self.basis,
                        &[
                            circuit.mode_of(*control),
                            circuit.mode_of(*above),
                            circuit.mode_of(*below),
                        ],
                        &u,
                        &amps,
                    );
                }
                CircuitGate::DataCz { bus, router, active, .. } => {
                    if *active {
                        amps = apply_local_unitary(
                            &self.basis,
                            &[circuit.mode_of(*bus), circuit.mode_of(*router)],
                            &cz,
                            &amps,
                        );
                    }
                }
                CircuitGate::SoftZ { mode } => {
                    amps = apply_local_unitary(
                        &self.basis,
                        &[circuit.mode_of(*mode)],
                        &softz,
                        &amps,
                    );
                }
            }
        }
        PureState { basis: self.basis.clone(), amplitudes: amps }
    }

    /// Simulate the full query and compare against the phase-basis oracle.
    pub fn simulate_ideal_query(
        &self,
        circuit: &QramCircuit,
        address: &[C64],
    ) -> Result<QueryOutcome> {
        let st0 = self.initial_state(circuit, address);
        let out = self.run(circuit, &st0);
        let oracle = self.oracle_state(circuit, address);
        let fid = out.inner(&oracle).norm_sqr();
        let norm = out.norm();
        // tree-vacuum residual: weight on any state with occupation outside
        // the staging cavities and bus port
        let keep: Vec<usize> = (0..circuit.n)
            .map(|k| circuit.mode_of(Element::Staging(k)))
            .chain([circuit.mode_of(Element::BusPort)])
            .collect();
        let mut residual = 0.0;
        for (i, amp) in out.amplitudes.iter().enumerate() {
            if amp.norm_sqr() == 0.0 {
                continue;
            }
            let occ = self.basis.state(i);
            let tree_occupied =
                occ.modes.iter().enumerate().any(|(m, &v)| v > 0 && !keep.contains(&m));
            if tree_occupied {
                residual += amp.norm_sqr();
            }
        }
        if norm < 1.0 - 1e-6 {
            return Err(Error::CircuitSize(
                circuit.n,
                format!("cutoff leakage detected: norm dropped to {norm}"),
            ));
        }
        Ok(QueryOutcome { fidelity: fid, tree_vacuum_residual: residual, norm, final_state: out })
    }

    /// Oracle: `sum_i alpha_i |i> (|0> + (-1)^{D_i} |1>)/sqrt2 |vac_tree>`.
    pub fn oracle_state(&self, circuit: &QramCircuit, address: &[C64]) -> PureState {
        let n = circuit.n;
        let sq = std::f64::consts::FRAC_1_SQRT_2;
        let mut st = PureState::zero(self.basis.clone());
        for (i, amp) in address.iter().enumerate() {
            if amp.norm() == 0.0 {
                continue;
            }
            let sign = if circuit.data[i] == 1 { -1.0 } else { 1.0 };
            for bus_bit in 0..=1u8 {
                let mut occ = vec![0u8; self.circuit_modes.len()];
                for k in 0..n {
                    occ[circuit.mode_of(Element::Staging(k))] =
                        ((i >> (n - 1 - k)) & 1) as u8;
                }
                occ[circuit.mode_of(Element::BusPort)] = bus_bit;
                let idx = self.basis.index_of_modes(&occ);
                let bus_amp = if bus_bit == 1 { sign } else { 1.0 };
                st.amplitudes[idx] += amp * C64::new(sq * bus_amp, 0.0);
            }
        }
        st
    }
}

/// Closed-form single-rail resource counts for the CSWAP architecture.
pub fn cswap_formula_counts(n: u32) -> (u64, u64, u64) {
    let nn = 1u64 << n;
    let n_cav = 5 * nn / 2 + n as u64 - 3;
    let n_gates = 7 * nn - 4 * n as u64 - 8;
    let n_ts = if n >= 2 { 12 * n as u64 - 14 } else { 0 };
    (n_cav, n_gates, n_ts)
}

/// Validate builder counts against the closed forms for n in 2..=n_max.
pub fn count_validation(n_max: u32) -> Result<Vec<(u32, u64, u64, u64)>> {
    let mut rows = Vec::new();
    for n in 2..=n_max {
        let data = vec![1u8; 1 << n];
        let c = build_qram_circuit(n, &data)?;
        let (n_cav, n_gates, n_ts) = cswap_formula_counts(n);
        if c.cavity_count() != n_cav {
            return Err(Error::CircuitSize(
                n,
                format!("cavity count {} != formula {}", c.cavity_count(), n_cav),
            ));
        }
        if c.cz_gate_count() != n_gates {
            return Err(Error::CircuitSize(
                n,
                format!("gate count {} != formula {}", c.cz_gate_count(), n_gates),
            ));
        }
        if u64::from(c.timestep_span()) != n_ts {
            return Err(Error::CircuitSize(
                n,
                format!("timestep span {} != formula {}", c.timestep_span(), n_ts),
            ));
        }
        rows.push((n, n_cav, n_gates, n_ts));
    }
    Ok(rows)
}
