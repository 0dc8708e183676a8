//! Analytic gate algebra of the CSWAP architecture: the C0SWAP/C1SWAP truth
//! tables, the bunching leakage when both targets are occupied, and the
//! frame identity tying ZZ(pi/2) to the CZ diagonal.

use num_complex::Complex64 as C64;
use qramsim::fock::{build_basis, PureState};
use qramsim::gates::{
    cswap_unitary, cz_unitary, mode_rotation, zz_unitary, CswapVariant,
};
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

fn main() -> qramsim::Result<()> {
    let basis = build_basis(3, 2, None, 0)?;
    let c1 = cswap_unitary(&basis, 0, 1, 2, CswapVariant::C1)?;
    let c0 = cswap_unitary(&basis, 0, 1, 2, CswapVariant::C0)?;

    println!("C1SWAP truth table (control, b, c):");
    for inp in [[1u8, 1, 0], [0, 1, 0], [1, 0, 1], [0, 0, 1]] {
        let out = c1.apply(&PureState::basis_state(basis.clone(), &inp, 0));
        let (best, amp) = dominant(&out);
        println!("  |{}> -> |{}>  (amplitude {:.3})", fmt3(&inp), best, amp);
    }
    println!("C0SWAP truth table:");
    for inp in [[0u8, 1, 0], [0, 0, 1], [1, 1, 0]] {
        let out = c0.apply(&PureState::basis_state(basis.clone(), &inp, 0));
        let (best, amp) = dominant(&out);
        println!("  |{}> -> |{}>  (amplitude {:.3})", fmt3(&inp), best, amp);
    }

    // both targets occupied: photons bunch and leave the computational space
    let leak = c1.apply(&PureState::basis_state(basis.clone(), &[1, 1, 1], 0));
    println!("C1SWAP on |111> (both targets occupied):");
    for (i, a) in leak.amplitudes.iter().enumerate() {
        if a.norm() > 1e-9 {
            println!("  |{}>: {:.4}", fmt3(&basis.state(i).modes), a);
        }
    }

    // ZZ(pi/2) with the single-cavity frame corrections equals the CZ diagonal
    let modes = build_basis(2, 2, None, 0)?;
    let zz = zz_unitary(&modes, 0, 1, FRAC_PI_2)?;
    let corr = mode_rotation(&modes, 0, FRAC_PI_2)?
        .matmul(&mode_rotation(&modes, 1, FRAC_PI_2)?)
        .scale(C64::from_polar(1.0, FRAC_PI_4));
    let composed = corr.matmul(&zz);
    let cz = cz_unitary(&modes, 0, 1)?;
    let defect = composed.matrix.sub(&cz.matrix).max_abs();
    println!("|| R(pi/2) R(pi/2) e^(i pi/4) ZZ(pi/2) - CZ ||_max = {defect:.3e}");
    Ok(())
}

fn fmt3(modes: &[u8]) -> String {
    modes.iter().map(|m| m.to_string()).collect()
}

fn dominant(st: &PureState) -> (String, f64) {
    let mut best = (0usize, 0.0f64);
    for (i, a) in st.amplitudes.iter().enumerate() {
        if a.norm() > best.1 {
            best = (i, a.norm());
        }
    }
    (fmt3(&st.basis.state(best.0).modes), best.1)
}
