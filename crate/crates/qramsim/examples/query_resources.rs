//! Closed-form resource counts and query metrics for the four architecture
//! variants, using representative per-step error and keep probabilities.

use qramsim::czfid::Rail;
use qramsim::noise::{preset, Preset};
use qramsim::query::{resources, success_metrics, ArchitectureSpec, Family};

fn main() -> qramsim::Result<()> {
    println!("{:<8} {:<8} {:>3} {:>8} {:>9} {:>6}", "family", "rail", "n", "N_cav", "N_gates", "N_ts");
    for family in [Family::Cswap, Family::Gue] {
        for rail in [Rail::Single, Rail::Dual] {
            for n in [2u32, 4, 8, 12] {
                let r = resources(family, rail, n)?;
                println!(
                    "{:<8} {:<8} {:>3} {:>8} {:>9} {:>6}",
                    family.to_string(),
                    rail.to_string(),
                    n,
                    r.n_cav,
                    r.n_gates,
                    r.n_ts
                );
            }
        }
    }

    // success metrics at a representative per-gate flag rate
    let spec = ArchitectureSpec {
        family: Family::Cswap,
        rail: Rail::Single,
        n: 4,
        params: preset(Preset::PS2),
    };
    let m = success_metrics(&spec, 3.3e-5, 0.9968)?;
    println!(
        "\ncswap single n=4 at eps = 3.3e-5, P_CZ = 0.9968: 1-F <= {:.3e}, \
         P_no_flag = {:.3}, Gamma_success = {:.1} kHz",
        m.infidelity_bound,
        m.p_no_flag,
        m.gamma_success * 1e3
    );
    Ok(())
}
