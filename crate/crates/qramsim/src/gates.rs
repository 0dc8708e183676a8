//! Analytic unitaries and pulse-level schedules for the CSWAP-architecture
//! gate set: beamsplitters, single-mode rotations, joint parity, ZZ(theta),
//! CZ, C0SWAP/C1SWAP, and the classically controlled data-copy gates.
//!
//! Phase conventions follow the dispersive-coupling compilation where the CZ
//! is two joint-parity blocks with interleaved ancilla rotations; the final
//! diagonal is `exp(-i pi/2 [P/2 + n_a + n_b - 1/2])` on every Fock pair,
//! including above the computational subspace (which is what makes bunched
//! two-photon states leak instead of refocusing).

use num_complex::Complex64 as C64;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use crate::error::{Error, Result};
use crate::fock::{
    ancilla_operator, mode_operator, AncillaOp, BasisRef, LinearOperator, ModeOp, PureState,
    RotationAxis,
};
use crate::linalg::CsrMatrix;
use crate::noise::ParameterSet;

/// Beamsplitter amplitude for the joint-parity block, in units of chi.
/// The conditional beamsplitter closes after one period exactly when
/// sqrt((chi/2)^2 + 4 g^2) * (2 pi / chi) = 2 pi, i.e. g = sqrt(3)/4 chi.
pub const JP_BEAMSPLITTER_AMPLITUDE_OVER_CHI: f64 = 0.43301270189221935; // sqrt(3)/4

/// `BS_bc(alpha) = exp(-i (pi/4) [e^{i alpha} c†b + e^{-i alpha} b†c])`.
pub fn beamsplitter_unitary(
    basis: &BasisRef,
    mode_b: usize,
    mode_c: usize,
    alpha: f64,
) -> Result<LinearOperator> {
    if mode_b == mode_c {
        return Err(Error::DimensionMismatch("beamsplitter modes must be distinct".into()));
    }
    let h = beamsplitter_generator(basis, mode_b, mode_c, alpha)?;
    Ok(crate::fock::expm_generator(&h))
}

/// Hermitian generator of the beamsplitter, `(pi/4)[e^{i alpha} c†b + h.c.]`.
pub fn beamsplitter_generator(
    basis: &BasisRef,
    mode_b: usize,
    mode_c: usize,
    alpha: f64,
) -> Result<LinearOperator> {
    let b = mode_operator(basis, mode_b, ModeOp::Annihilate)?;
    let c = mode_operator(basis, mode_c, ModeOp::Annihilate)?;
    let term = c.dagger().matmul(&b).matrix.scale(C64::from_polar(FRAC_PI_4, alpha));
    let h = term.add(&term.dagger());
    Ok(LinearOperator::new(basis.clone(), h))
}

/// Diagonal rotation `exp(-i theta n)` on one mode.
pub fn mode_rotation(basis: &BasisRef, mode: usize, theta: f64) -> Result<LinearOperator> {
    if mode >= basis.num_modes() {
        return Err(Error::ModeIndex { index: mode, num_modes: basis.num_modes() });
    }
    basis_diagonal(basis, |occ| C64::from_polar(1.0, -theta * occ.modes[mode] as f64))
}

fn basis_diagonal(
    basis: &BasisRef,
    mut f: impl FnMut(&crate::fock::Occupation) -> C64,
) -> Result<LinearOperator> {
    let diag: Vec<C64> = basis.states().iter().map(|occ| f(occ)).collect();
    Ok(LinearOperator::new(basis.clone(), CsrMatrix::diagonal(&diag)))
}

fn joint_parity(na: u8, nb: u8) -> f64 {
    if (na as u32 + nb as u32) % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// CZ diagonal `exp(-i pi/2 [P/2 + n_a + n_b - 1/2])`, valid on all Fock
/// levels (not just the computational subspace).
pub fn cz_unitary(basis: &BasisRef, mode_a: usize, mode_b: usize) -> Result<LinearOperator> {
    basis_diagonal(basis, |occ| {
        let na = occ.modes[mode_a];
        let nb = occ.modes[mode_b];
        let p = joint_parity(na, nb);
        let expo = p / 2.0 + na as f64 + nb as f64 - 0.5;
        C64::from_polar(1.0, -FRAC_PI_2 * expo)
    })
}

/// Two-mode parity gate `ZZ(theta)`: `exp(-i theta/2 P)` on the mode sector.
pub fn zz_unitary(
    basis: &BasisRef,
    mode_a: usize,
    mode_b: usize,
    theta: f64,
) -> Result<LinearOperator> {
    basis_diagonal(basis, |occ| {
        let p = joint_parity(occ.modes[mode_a], occ.modes[mode_b]);
        C64::from_polar(1.0, -theta / 2.0 * p)
    })
}

/// Analytic joint-parity unitary `|g><g| + exp(i pi [n_a + n_b]) |f><f|`,
/// extended by the identity on the |e> level so the result is unitary.
pub fn jp_analytic_unitary(
    basis: &BasisRef,
    mode_a: usize,
    mode_b: usize,
) -> Result<LinearOperator> {
    if !basis.has_ancilla() {
        return Err(Error::MissingAncilla);
    }
    basis_diagonal(basis, |occ| match occ.ancilla {
        2 => C64::from_polar(1.0, PI * (occ.modes[mode_a] as f64 + occ.modes[mode_b] as f64)),
        _ => C64::new(1.0, 0.0),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CswapVariant {
    /// SWAP executes when the control holds 0 photons.
    C0,
    /// SWAP executes when the control holds 1 photon.
    C1,
}

/// `C1SWAP = BS†(pi/2) CZ_ab BS(pi/2)`;
/// `C0SWAP = exp(i pi b†b) BS(pi/2) CZ_ab BS(pi/2)`.
pub fn cswap_unitary(
    basis: &BasisRef,
    control: usize,
    target_b: usize,
    target_c: usize,
    variant: CswapVariant,
) -> Result<LinearOperator> {
    if control == target_b || control == target_c || target_b == target_c {
        return Err(Error::DimensionMismatch("cswap modes must be distinct".into()));
    }
    let bs = beamsplitter_unitary(basis, target_b, target_c, FRAC_PI_2)?;
    let cz = cz_unitary(basis, control, target_b)?;
    let inner = cz.matmul(&bs);
    Ok(match variant {
        CswapVariant::C1 => bs.dagger().matmul(&inner),
        CswapVariant::C0 => {
            // exp(i pi b†b) = mode_rotation(-pi) on mode b
            let ph = mode_rotation(basis, target_b, -PI)?;
            ph.matmul(&bs).matmul(&inner)
        }
    })
}

/// One segment of a pulse schedule: a static Hamiltonian applied for a
/// duration, or an instantaneous (noiseless, software/virtual) unitary.
#[derive(Clone, Debug)]
pub enum Segment {
    Evolve { hamiltonian: CsrMatrix, duration: f64 },
    Instant { unitary: CsrMatrix },
}

/// Ordered pulse-level schedule over a fixed basis.
#[derive(Clone, Debug)]
pub struct GateSchedule {
    pub basis: BasisRef,
    pub segments: Vec<Segment>,
}

impl GateSchedule {
    pub fn total_duration(&self) -> f64 {
        self.segments
            .iter()
            .map(|s| match s {
                Segment::Evolve { duration, .. } => *duration,
                Segment::Instant { .. } => 0.0,
            })
            .sum()
    }

    /// Noiseless evolution of a pure state through the schedule.
    pub fn evolve_pure(&self, state: &PureState) -> Result<PureState> {
        let mut st = state.clone();
        for seg in &self.segments {
            st = match seg {
                Segment::Evolve { hamiltonian, duration } => {
                    let h = LinearOperator::new(self.basis.clone(), hamiltonian.clone());
                    crate::fock::evolve_unitary(&h, *duration, &st)?
                }
                Segment::Instant { unitary } => PureState {
                    basis: st.basis.clone(),
                    amplitudes: unitary.matvec(&st.amplitudes),
                },
            };
        }
        Ok(st)
    }

    /// Full noiseless unitary of the schedule (dense eigendecomposition per
    /// evolve segment; intended for small bases).
    pub fn unitary(&self) -> Result<LinearOperator> {
        let mut u = LinearOperator::identity(self.basis.clone());
        for seg in &self.segments {
            let step = match seg {
                Segment::Evolve { hamiltonian, duration } => {
                    let h = LinearOperator::new(
                        self.basis.clone(),
                        hamiltonian.scale(C64::new(*duration, 0.0)),
                    );
                    if !h.is_hermitian(1e-10 * h.matrix.max_abs().max(1.0)) {
                        return Err(Error::NonHermitian {
                            deviation: h.matrix.sub(&h.matrix.dagger()).max_abs(),
                        });
                    }
                    crate::fock::expm_generator(&h)
                }
                Segment::Instant { unitary } => {
                    LinearOperator::new(self.basis.clone(), unitary.clone())
                }
            };
            u = step.matmul(&u);
        }
        Ok(u)
    }
}

/// Joint-parity pulse block: the dispersive-plus-beamsplitter Hamiltonian
/// `(chi/2) n_a sigma_z + g_bs (a†b + b†a)` run for `2 pi / chi`, followed by
/// the virtual mode-frame rotation that makes the block equal the analytic
/// joint-parity unitary exactly.
pub fn jp_pulse_schedule(
    basis: &BasisRef,
    mode_a: usize,
    mode_b: usize,
    params: &ParameterSet,
) -> Result<GateSchedule> {
    if !basis.has_ancilla() {
        return Err(Error::MissingAncilla);
    }
    let chi = params.chi();
    let g_bs = JP_BEAMSPLITTER_AMPLITUDE_OVER_CHI * chi;
    let na = mode_operator(basis, mode_a, ModeOp::Number)?;
    let sz = ancilla_operator(basis, AncillaOp::SigmaZGf)?;
    let disp = na.matmul(&sz).matrix.scale(C64::new(chi / 2.0, 0.0));
    let a = mode_operator(basis, mode_a, ModeOp::Annihilate)?;
    let b = mode_operator(basis, mode_b, ModeOp::Annihilate)?;
    let hop = a.dagger().matmul(&b).matrix;
    let bs = hop.add(&hop.dagger()).scale(C64::new(g_bs, 0.0));
    let h_jp = disp.add(&bs);
    let frame = mode_rotation(basis, mode_a, FRAC_PI_2)?
        .matmul(&mode_rotation(basis, mode_b, FRAC_PI_2)?);
    Ok(GateSchedule {
        basis: basis.clone(),
        segments: vec![
            Segment::Evolve { hamiltonian: h_jp, duration: 2.0 * PI / chi },
            Segment::Instant { unitary: frame.matrix },
        ],
    })
}

/// Full pulse-level CZ: two joint-parity blocks with the interleaved ancilla
/// rotations `e^{i pi/4 sy} JP e^{-i theta/2 sx} JP e^{-i pi/4 sy}` at
/// theta = pi/2, then the diagonal frame correction
/// `e^{i pi/4} exp(-i pi/2 [n_a + n_b])`.
pub fn cz_pulse_schedule(
    basis: &BasisRef,
    mode_a: usize,
    mode_b: usize,
    params: &ParameterSet,
) -> Result<GateSchedule> {
    let jp = jp_pulse_schedule(basis, mode_a, mode_b, params)?;
    let ry_minus = ancilla_operator(basis, AncillaOp::Rotation(RotationAxis::Y, FRAC_PI_2))?;
    let ry_plus = ancilla_operator(basis, AncillaOp::Rotation(RotationAxis::Y, -FRAC_PI_2))?;
    let rx = ancilla_operator(basis, AncillaOp::Rotation(RotationAxis::X, FRAC_PI_2))?;
    let frame = mode_rotation(basis, mode_a, FRAC_PI_2)?
        .matmul(&mode_rotation(basis, mode_b, FRAC_PI_2)?)
        .scale(C64::from_polar(1.0, FRAC_PI_4));
    let mut segments = Vec::new();
    segments.push(Segment::Instant { unitary: ry_minus.matrix });
    segments.extend(jp.segments.iter().cloned());
    segments.push(Segment::Instant { unitary: rx.matrix });
    segments.extend(jp.segments.iter().cloned());
    segments.push(Segment::Instant { unitary: ry_plus.matrix });
    segments.push(Segment::Instant { unitary: frame.matrix });
    Ok(GateSchedule { basis: basis.clone(), segments })
}

/// Data-copy variants; the subscript is the router state that triggers the
/// bus phase flip.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DataCopyVariant {
    C0Z,
    C1Z,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DataCopyGate {
    /// Physical CZ between bus and router.
    CzBusRouter,
    /// Software Z (`exp(i pi n)`) on the bus.
    SoftwareZBus,
}

/// Compile a data-copy gate. The classical control means the sequence is
/// empty when the data bit is 0; `C1Z` is a plain CZ, `C0Z` is CZ followed
/// by a software Z on the bus.
pub fn data_copy_gates(variant: DataCopyVariant, data_bit: u8) -> Vec<DataCopyGate> {
    if data_bit == 0 {
        return Vec::new();
    }
    match variant {
        DataCopyVariant::C1Z => vec![DataCopyGate::CzBusRouter],
        DataCopyVariant::C0Z => vec![DataCopyGate::CzBusRouter, DataCopyGate::SoftwareZBus],
    }
}

/// Largest elementwise deviation between two operators after aligning the
/// global phase on the largest-magnitude element of `a`.
pub fn max_diff_mod_phase(a: &LinearOperator, b: &LinearOperator) -> f64 {
    let ad = a.matrix.to_dense();
    let bd = b.matrix.to_dense();
    let mut best = (0usize, 0usize, 0.0f64);
    for ((r, c), v) in ad.indexed_iter() {
        if v.norm() > best.2 {
            best = (r, c, v.norm());
        }
    }
    let (r0, c0, _) = best;
    let phase = {
        let den = ad[(r0, c0)];
        if den.norm() < 1e-300 {
            C64::new(1.0, 0.0)
        } else {
            let p = bd[(r0, c0)] / den;
            if p.norm() < 1e-300 {
                C64::new(1.0, 0.0)
            } else {
                p / p.norm()
            }
        }
    };
    let mut m = 0.0f64;
    for ((r, c), v) in ad.indexed_iter() {
        m = m.max((v * phase - bd[(r, c)]).norm());
    }
    m
}
