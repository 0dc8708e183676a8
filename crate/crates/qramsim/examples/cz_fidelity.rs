//! Post-selected process fidelity of the pulse-level CZ gate: simulate the
//! noisy channel for one parameter set, apply the ancilla no-error
//! measurement, and print the single- and dual-rail gate infidelities with
//! their flag probabilities.

use qramsim::czfid::cz_fidelity;
use qramsim::linalg::OdeOptions;
use qramsim::noise::Preset;

fn main() -> qramsim::Result<()> {
    let preset = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "PS2".into())
        .parse::<Preset>()?;
    let r = cz_fidelity(preset, 2, &OdeOptions::default())?;
    println!("{preset} (cavity cutoff 2):");
    println!(
        "  single rail: eps = {:.3e} (post-selected), {:.3e} (plain), flag = {:.3e}",
        r.sr.epsilon,
        r.sr_nps.epsilon,
        1.0 - r.sr.p_success
    );
    println!(
        "  dual rail:   eps = {:.3e} (post-selected), {:.3e} (plain), flag = {:.3e}",
        r.dr.epsilon,
        r.dr_nps.epsilon,
        1.0 - r.dr.p_success
    );
    Ok(())
}
