//! Coherence-time parameter sets, jump-operator construction, and the
//! time-dependent Lindblad master-equation integrator.
//!
//! Internal units: times in microseconds, angular frequencies in rad/us.
//! Frequencies quoted as `*_over_2pi_mhz` convert as `2 pi * f` since
//! 1 MHz = 1/us.

use ndarray::Array2;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::fock::{ancilla_operator, mode_operator, AncillaOp, BasisRef, ModeOp};
use crate::linalg::{rk45_adaptive, CsrMatrix, OdeOptions};

/// Coherence times and drive parameters. Times are stored in microseconds;
/// `f64::INFINITY` disables a channel.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ParameterSet {
    /// Cavity relaxation time T1 (us).
    pub t1_cavity: f64,
    /// Cavity dephasing time Tphi (us).
    pub tphi_cavity: f64,
    /// Transmon g-e relaxation time (us); e-f relaxes at twice the rate.
    pub t1_transmon_ge: f64,
    /// Transmon e-e dephasing time (us); f-f dephases at four times the rate.
    pub tphi_transmon_ee: f64,
    /// Thermal population of cavities and transfer resonators.
    pub n_th: f64,
    /// Dispersive coupling strength chi/2pi (MHz).
    pub chi_over_2pi_mhz: f64,
    /// Transfer-resonator nonradiative relaxation time (us).
    pub t1_transfer_nr: f64,
    /// Transfer-resonator dephasing time (us).
    pub tphi_transfer: f64,
    /// Transfer-resonator decay rate into the waveguide, gamma/2pi (MHz).
    pub gamma_over_2pi_mhz: f64,
    /// State-transfer pulse bandwidth xi/2pi (MHz).
    pub xi_over_2pi_mhz: f64,
    /// Pulse scale factor on the sender.
    pub lambda_b: f64,
    /// Pulse scale factor on the receivers.
    pub lambda_c: f64,
}

/// Named parameter presets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Preset {
    PS1,
    PS2,
    PS3,
}

impl std::str::FromStr for Preset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "PS1" => Ok(Preset::PS1),
            "PS2" => Ok(Preset::PS2),
            "PS3" => Ok(Preset::PS3),
            other => Err(Error::UnknownPreset(other.into())),
        }
    }
}

impl std::fmt::Display for Preset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Preset::PS1 => write!(f, "PS1"),
            Preset::PS2 => write!(f, "PS2"),
            Preset::PS3 => write!(f, "PS3"),
        }
    }
}

/// Table values for the named preset (times converted to microseconds).
pub fn preset(name: Preset) -> ParameterSet {
    let (t1c_ms, tphic_ms, t1ge_ms, tphiee_ms) = match name {
        Preset::PS1 => (0.6, 5.0, 0.2, 0.4),
        Preset::PS2 => (25.0, 106.0, 0.5, 0.9),
        Preset::PS3 => (25.0, 106.0, 2.0, 4.0),
    };
    let (t1tr_us, tphitr_us) = match name {
        Preset::PS1 => (100.0, 100.0),
        // PS3 reuses the PS2 transfer-resonator times (transmon coherences
        // are not relevant to state transfer)
        Preset::PS2 | Preset::PS3 => (200.0, 200.0),
    };
    ParameterSet {
        t1_cavity: t1c_ms * 1e3,
        tphi_cavity: tphic_ms * 1e3,
        t1_transmon_ge: t1ge_ms * 1e3,
        tphi_transmon_ee: tphiee_ms * 1e3,
        n_th: 0.01,
        chi_over_2pi_mhz: 2.0,
        t1_transfer_nr: t1tr_us,
        tphi_transfer: tphitr_us,
        gamma_over_2pi_mhz: 20.0,
        xi_over_2pi_mhz: 0.95,
        lambda_b: 1.018,
        lambda_c: 1.017,
    }
}

impl ParameterSet {
    /// Dispersive strength in rad/us.
    pub fn chi(&self) -> f64 {
        2.0 * PI * self.chi_over_2pi_mhz
    }

    /// CZ gate time `4 pi / chi` (us).
    pub fn t_cz(&self) -> f64 {
        4.0 * PI / self.chi()
    }

    /// Waveguide decay rate in rad/us.
    pub fn gamma(&self) -> f64 {
        2.0 * PI * self.gamma_over_2pi_mhz
    }

    /// Pulse bandwidth in rad/us.
    pub fn xi(&self) -> f64 {
        2.0 * PI * self.xi_over_2pi_mhz
    }

    /// Disable every decoherence channel (rates to zero), keeping drives.
    pub fn ideal(mut self) -> Self {
        self.t1_cavity = f64::INFINITY;
        self.tphi_cavity = f64::INFINITY;
        self.t1_transmon_ge = f64::INFINITY;
        self.tphi_transmon_ee = f64::INFINITY;
        self.t1_transfer_nr = f64::INFINITY;
        self.tphi_transfer = f64::INFINITY;
        self.n_th = 0.0;
        self
    }
}

/// Role of each bosonic mode when assembling jump operators.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModeRole {
    DataCavity,
    TransferResonator,
}

/// Jump operators with their rates (1/us).
#[derive(Clone, Debug, Default)]
pub struct CollapseSet {
    pub ops: Vec<(CsrMatrix, f64)>,
}

impl CollapseSet {
    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn push(&mut self, op: CsrMatrix, rate: f64) {
        if rate > 0.0 && rate.is_finite() {
            self.ops.push((op, rate));
        }
    }
}

/// Standard jump operators for the given mode roles: thermal decay pair and
/// number dephasing on each bosonic mode, plus the bosonic-enhancement
/// transmon set (`|g><e|`, `|e><f|` at twice the rate, `|e><e|`, `|f><f|` at
/// four times the rate) when the basis carries an ancilla.
pub fn collapse_operators(
    basis: &BasisRef,
    roles: &[ModeRole],
    params: &ParameterSet,
) -> Result<CollapseSet> {
    if roles.len() != basis.num_modes() {
        return Err(Error::MissingRole(format!(
            "{} roles supplied for {} modes",
            roles.len(),
            basis.num_modes()
        )));
    }
    let mut set = CollapseSet::default();
    for (m, role) in roles.iter().enumerate() {
        let (t1, tphi) = match role {
            ModeRole::DataCavity => (params.t1_cavity, params.tphi_cavity),
            ModeRole::TransferResonator => (params.t1_transfer_nr, params.tphi_transfer),
        };
        let a = mode_operator(basis, m, ModeOp::Annihilate)?;
        let n = mode_operator(basis, m, ModeOp::Number)?;
        if t1.is_finite() && t1 > 0.0 {
            set.push(a.matrix.clone(), (1.0 + params.n_th) / t1);
            if params.n_th > 0.0 {
                set.push(a.dagger().matrix, params.n_th / t1);
            }
        }
        if tphi.is_finite() && tphi > 0.0 {
            set.push(n.matrix, 1.0 / tphi);
        }
    }
    if basis.has_ancilla() {
        let ge = ancilla_operator(basis, AncillaOp::LowerGe)?;
        let ef = ancilla_operator(basis, AncillaOp::LowerEf)?;
        let pe = ancilla_operator(basis, AncillaOp::ProjE)?;
        let pf = ancilla_operator(basis, AncillaOp::ProjF)?;
        let t1 = params.t1_transmon_ge;
        let tphi = params.tphi_transmon_ee;
        if t1.is_finite() && t1 > 0.0 {
            set.push(ge.matrix, 1.0 / t1);
            set.push(ef.matrix, 2.0 / t1);
        }
        if tphi.is_finite() && tphi > 0.0 {
            set.push(pe.matrix, 1.0 / tphi);
            set.push(pf.matrix, 4.0 / tphi);
        }
    }
    Ok(set)
}

/// Hamiltonian specification for the integrator: either a static sparse
/// matrix or a static part plus complex-coefficient terms. Callers supply
/// Hermitian-conjugate term pairs explicitly.
pub enum Hamiltonian<'a> {
    Static(&'a CsrMatrix),
    TimeDependent {
        constant: &'a CsrMatrix,
        terms: &'a [(Box<dyn Fn(f64) -> C64 + Sync>, CsrMatrix)],
    },
}

/// Integration result: states sampled at the requested output times and, per
/// collapse operator, the accumulated jump weight `∫ tr(L†L rho) dt`.
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Array2<C64>>,
    pub jump_integrals: Vec<f64>,
}

/// Integrate the Lindblad master equation
/// `d rho/dt = -i[H, rho] + sum_k gamma_k D[L_k] rho`
/// from `t0` to `t1` with adaptive stepping; `output_times` are sampled
/// exactly (pass `&[]` to keep only the final state, which is always the
/// last entry of `states`).
pub fn lindblad_evolve(
    h: &Hamiltonian,
    collapses: &CollapseSet,
    rho0: &Array2<C64>,
    t0: f64,
    t1: f64,
    output_times: &[f64],
    opts: &OdeOptions,
) -> Result<Trajectory> {
    let dim = rho0.nrows();
    // pre-scale collapse operators and fold the anticommutator part into a
    // single drift matrix: drift = -iH0 - 1/2 sum gamma L†L
    let scaled: Vec<CsrMatrix> = collapses
        .ops
        .iter()
        .map(|(l, rate)| l.scale(C64::new(rate.sqrt(), 0.0)))
        .collect();
    let mut k_sum = CsrMatrix::zeros(dim, dim);
    for l in &scaled {
        k_sum = k_sum.add(&l.dagger().matmul(l));
    }
    let (h0, terms): (&CsrMatrix, &[(Box<dyn Fn(f64) -> C64 + Sync>, CsrMatrix)]) = match h {
        Hamiltonian::Static(m) => (*m, &[]),
        Hamiltonian::TimeDependent { constant, terms } => (*constant, terms),
    };
    let drift0 = h0.scale(C64::new(0.0, -1.0)).add(&k_sum.scale(C64::new(-0.5, 0.0)));
    let scaled_ref = &scaled;
    let terms_ref = terms;
    let drift0_ref = &drift0;

    // The jump-weight integrals ride along as extra scalar ODE components in
    // rows appended below the density matrix.
    let n_jump = scaled.len();
    let extra_rows = if n_jump == 0 { 0 } else { n_jump.div_ceil(dim) };

    let mut y0 = Array2::<C64>::zeros((dim + extra_rows, dim));
    y0.slice_mut(ndarray::s![..dim, ..]).assign(rho0);
    let mut rhs = move |t: f64, y: &Array2<C64>| -> Array2<C64> {
        let rho = y.slice(ndarray::s![..dim, ..]).to_owned();
        let mut drift = drift0_ref.clone();
        if !terms_ref.is_empty() {
            for (f, m) in terms_ref {
                drift = drift.add(&m.scale(f(t) * C64::new(0.0, -1.0)));
            }
        }
        // A rho + rho A† with A = -iH - K/2
        let a_rho = drift.mul_dense(&rho);
        let rho_adag = drift.mul_dense(&rho.t().mapv(|v| v.conj()));
        let mut drho = a_rho;
        // (A rho†)† = rho A†
        let rho_adag_t = rho_adag.t().mapv(|v| v.conj());
        drho += &rho_adag_t;
        let mut out = Array2::<C64>::zeros((dim + extra_rows, dim));
        for (j, l) in scaled_ref.iter().enumerate() {
            let l_rho = l.mul_dense(&rho);
            let recycle = l.dagger().mul_dense_left(&l_rho);
            drho += &recycle;
            // d/dt integral_j = tr(L rho L†) = tr(recycle)
            let tr: C64 = recycle.diag().iter().sum();
            out[(dim + j / dim, j % dim)] = tr;
        }
        out.slice_mut(ndarray::s![..dim, ..]).assign(&drho);
        out
    };

    let mut times = Vec::new();
    let mut states = Vec::new();
    let yf = rk45_adaptive(
        &mut rhs,
        &y0,
        t0,
        t1,
        output_times,
        opts,
        &mut |t, y: &Array2<C64>| {
            times.push(t);
            states.push(y.slice(ndarray::s![..dim, ..]).to_owned());
        },
    )?;
    let mut jump_integrals = vec![0.0; n_jump];
    for (j, v) in jump_integrals.iter_mut().enumerate() {
        *v = yf[(dim + j / dim, j % dim)].re;
    }
    if times.last().map_or(true, |&tl| (tl - t1).abs() > 1e-9 * (t1 - t0).abs().max(1.0)) {
        times.push(t1);
        states.push(yf.slice(ndarray::s![..dim, ..]).to_owned());
    }
    Ok(Trajectory { times, states, jump_integrals })
}

/// Evolve a density matrix through a gate schedule under the given collapse
/// set. Instantaneous segments are applied noiselessly.
pub fn evolve_schedule(
    schedule: &crate::gates::GateSchedule,
    collapses: &CollapseSet,
    rho0: &Array2<C64>,
    opts: &OdeOptions,
) -> Result<Array2<C64>> {
    let mut rho = rho0.clone();
    for seg in &schedule.segments {
        match seg {
            crate::gates::Segment::Evolve { hamiltonian, duration } => {
                let traj = lindblad_evolve(
                    &Hamiltonian::Static(hamiltonian),
                    collapses,
                    &rho,
                    0.0,
                    *duration,
                    &[],
                    opts,
                )?;
                rho = traj.states.into_iter().last().unwrap();
            }
            crate::gates::Segment::Instant { unitary } => {
                let u_rho = unitary.mul_dense(&rho);
                rho = unitary.dagger().mul_dense_left(&u_rho);
            }
        }
    }
    Ok(rho)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{build_basis, PureState};
    use approx::assert_abs_diff_eq;

    #[test]
    fn presets_reproduce_table_values() {
        let p1 = preset(Preset::PS1);
        assert_eq!(p1.t1_cavity, 600.0);
        assert_eq!(p1.tphi_cavity, 5000.0);
        assert_eq!(p1.t1_transmon_ge, 200.0);
        assert_eq!(p1.tphi_transmon_ee, 400.0);
        assert_eq!(p1.t1_transfer_nr, 100.0);
        assert_eq!(p1.tphi_transfer, 100.0);
        let p2 = preset(Preset::PS2);
        assert_eq!(p2.t1_cavity, 25_000.0);
        assert_eq!(p2.tphi_cavity, 106_000.0);
        assert_eq!(p2.t1_transmon_ge, 500.0);
        assert_eq!(p2.tphi_transmon_ee, 900.0);
        assert_eq!(p2.t1_transfer_nr, 200.0);
        assert_eq!(p2.tphi_transfer, 200.0);
        let p3 = preset(Preset::PS3);
        assert_eq!(p3.t1_cavity, 25_000.0);
        assert_eq!(p3.tphi_cavity, 106_000.0);
        assert_eq!(p3.t1_transmon_ge, 2000.0);
        assert_eq!(p3.tphi_transmon_ee, 4000.0);
        for p in [&p1, &p2, &p3] {
            assert_eq!(p.n_th, 0.01);
            assert_abs_diff_eq!(p.t_cz(), 1.0, epsilon = 1e-12);
        }
        assert!("ps9".parse::<Preset>().is_err());
        assert_eq!("ps2".parse::<Preset>().unwrap(), Preset::PS2);
    }

    #[test]
    fn collapse_rates_follow_table_rules() {
        let basis = build_basis(1, 2, None, 3).unwrap();
        let p = preset(Preset::PS1);
        let set = collapse_operators(&basis, &[ModeRole::DataCavity], &p).unwrap();
        // cavity down, cavity up, cavity dephase, ge, ef, ee, ff
        assert_eq!(set.ops.len(), 7);
        assert_abs_diff_eq!(set.ops[0].1, 1.01 / 600.0, epsilon = 1e-15);
        assert_abs_diff_eq!(set.ops[1].1, 0.01 / 600.0, epsilon = 1e-15);
        assert_abs_diff_eq!(set.ops[2].1, 1.0 / 5000.0, epsilon = 1e-15);
        assert_abs_diff_eq!(set.ops[3].1, 1.0 / 200.0, epsilon = 1e-15);
        assert_abs_diff_eq!(set.ops[4].1, 2.0 / 200.0, epsilon = 1e-15);
        assert_abs_diff_eq!(set.ops[5].1, 1.0 / 400.0, epsilon = 1e-15);
        assert_abs_diff_eq!(set.ops[6].1, 4.0 / 400.0, epsilon = 1e-15);
        // PS2 transmon e-f rate doubles the g-e rate
        let p2 = preset(Preset::PS2);
        let set2 = collapse_operators(&basis, &[ModeRole::DataCavity], &p2).unwrap();
        assert_abs_diff_eq!(set2.ops[4].1, 2.0 / 500.0, epsilon = 1e-15);
        // infinite lifetimes yield an empty set
        let ideal = p.ideal();
        let set3 = collapse_operators(&basis, &[ModeRole::DataCavity], &ideal).unwrap();
        assert!(set3.is_empty());
        // wrong role count errors
        assert!(collapse_operators(&basis, &[], &p2).is_err());
    }

    #[test]
    fn single_cavity_decay_matches_analytic() {
        let basis = build_basis(1, 3, None, 0).unwrap();
        let gamma = 0.35; // 1/us
        let a = crate::fock::mode_operator(&basis, 0, ModeOp::Annihilate).unwrap();
        let n_op = crate::fock::mode_operator(&basis, 0, ModeOp::Number).unwrap();
        let mut set = CollapseSet::default();
        set.push(a.matrix.clone(), gamma);
        let rho0 = PureState::basis_state(basis.clone(), &[1], 0).to_density();
        let h0 = CsrMatrix::zeros(basis.dim(), basis.dim());
        let outs: Vec<f64> = (1..=5).map(|k| k as f64 * 0.8).collect();
        let traj = lindblad_evolve(
            &Hamiltonian::Static(&h0),
            &set,
            &rho0.matrix,
            0.0,
            4.0,
            &outs,
            &OdeOptions::default(),
        )
        .unwrap();
        for (t, rho) in traj.times.iter().zip(&traj.states) {
            let nbar = {
                let prod = n_op.matrix.mul_dense(rho);
                prod.diag().iter().sum::<C64>().re
            };
            assert_abs_diff_eq!(nbar, (-gamma * t).exp(), epsilon = 1e-8);
            let tr: C64 = rho.diag().iter().sum();
            assert_abs_diff_eq!(tr.re, 1.0, epsilon = 1e-9);
        }
        // jump integral equals the emitted population
        assert_abs_diff_eq!(traj.jump_integrals[0], 1.0 - (-gamma * 4.0f64).exp(), epsilon = 1e-7);
    }

    #[test]
    fn thermal_steady_state_reaches_nth() {
        let basis = build_basis(1, 3, None, 0).unwrap();
        let p = preset(Preset::PS1);
        let t1 = 2.0; // short T1 so steady state is reached quickly
        let a = crate::fock::mode_operator(&basis, 0, ModeOp::Annihilate).unwrap();
        let n_op = crate::fock::mode_operator(&basis, 0, ModeOp::Number).unwrap();
        let mut set = CollapseSet::default();
        set.push(a.matrix.clone(), (1.0 + p.n_th) / t1);
        set.push(a.dagger().matrix, p.n_th / t1);
        let rho0 = PureState::basis_state(basis.clone(), &[1], 0).to_density();
        let h0 = CsrMatrix::zeros(basis.dim(), basis.dim());
        let traj = lindblad_evolve(
            &Hamiltonian::Static(&h0),
            &set,
            &rho0.matrix,
            0.0,
            60.0,
            &[],
            &OdeOptions::default(),
        )
        .unwrap();
        let rho = traj.states.last().unwrap();
        let nbar = n_op.matrix.mul_dense(rho).diag().iter().sum::<C64>().re;
        // detailed balance: n_bar -> n_th/(1 + (cutoff corrections)) ~ n_th
        assert_abs_diff_eq!(nbar, p.n_th, epsilon = 1e-6 + 3.0 * p.n_th * p.n_th);
    }

    #[test]
    fn empty_collapse_set_matches_unitary_evolution() {
        let basis = build_basis(2, 2, None, 0).unwrap();
        let h = crate::gates::beamsplitter_generator(&basis, 0, 1, 0.3).unwrap();
        let psi0 = PureState::basis_state(basis.clone(), &[1, 0], 0);
        let uni = crate::fock::evolve_unitary(&h, 1.3, &psi0).unwrap();
        let traj = lindblad_evolve(
            &Hamiltonian::Static(&h.matrix),
            &CollapseSet::default(),
            &psi0.to_density().matrix,
            0.0,
            1.3,
            &[],
            &OdeOptions { rtol: 1e-10, atol: 1e-12, ..Default::default() },
        )
        .unwrap();
        let rho = traj.states.last().unwrap();
        // fidelity <psi|rho|psi> = 1 within 1e-9
        let mut fid = C64::new(0.0, 0.0);
        for i in 0..basis.dim() {
            for j in 0..basis.dim() {
                fid += uni.amplitudes[i].conj() * rho[(i, j)] * uni.amplitudes[j];
            }
        }
        assert_abs_diff_eq!(fid.re, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn time_dependent_drive_matches_analytic_rabi_area() {
        // two-level system driven by a Gaussian pulse: population transfer
        // depends only on the pulse area for a resonant drive
        let basis = build_basis(1, 1, None, 0).unwrap();
        let a = crate::fock::mode_operator(&basis, 0, ModeOp::Annihilate).unwrap();
        let sx_up = a.dagger().matrix.clone();
        let sx_dn = a.matrix.clone();
        let sigma = 0.4f64;
        let amp = 0.9f64;
        let terms: Vec<(Box<dyn Fn(f64) -> C64 + Sync>, CsrMatrix)> = vec![
            (Box::new(move |t: f64| C64::new(amp * (-t * t / (2.0 * sigma * sigma)).exp(), 0.0)), sx_up),
            (Box::new(move |t: f64| C64::new(amp * (-t * t / (2.0 * sigma * sigma)).exp(), 0.0)), sx_dn),
        ];
        let zero = CsrMatrix::zeros(2, 2);
        let h = Hamiltonian::TimeDependent { constant: &zero, terms: &terms };
        let rho0 = PureState::basis_state(basis.clone(), &[0], 0).to_density();
        let traj = lindblad_evolve(
            &h,
            &CollapseSet::default(),
            &rho0.matrix,
            -4.0,
            4.0,
            &[],
            &OdeOptions::default(),
        )
        .unwrap();
        let rho = traj.states.last().unwrap();
        let area = amp * sigma * (2.0 * PI).sqrt();
        let p1 = rho[(1, 1)].re;
        assert_abs_diff_eq!(p1, (area).sin().powi(2), epsilon = 1e-6);
    }
}
