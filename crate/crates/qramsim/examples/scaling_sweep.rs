//! Coherence-time scaling of the post-selected CZ infidelity: sweep the
//! transmon relaxation time with every other decay channel off and fit the
//! log-log slope (the post-selected infidelity is second order because
//! first-order ancilla errors are detected).

use qramsim::czfid::{scaling_sweep, Rail, SweepParameter};
use qramsim::linalg::{loglog_slope, OdeOptions};

fn main() -> qramsim::Result<()> {
    let param = SweepParameter::T1TransmonGe;
    let values = param.default_values();
    let rows = scaling_sweep(param, &values, Rail::Single, &OdeOptions::default())?;
    println!("{:>12} {:>14} {:>14}", "T1_ge (us)", "epsilon", "flag_prob");
    for r in &rows {
        println!("{:>12.1} {:>14.4e} {:>14.4e}", r.value_us, r.epsilon, r.flag_prob);
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.value_us).collect();
    let eps: Vec<f64> = rows.iter().map(|r| r.epsilon).collect();
    let flags: Vec<f64> = rows.iter().map(|r| r.flag_prob).collect();
    println!(
        "fitted slopes: epsilon {:.3} (expect -2), flag {:.3} (expect -1)",
        loglog_slope(&xs, &eps),
        loglog_slope(&xs, &flags)
    );
    Ok(())
}
