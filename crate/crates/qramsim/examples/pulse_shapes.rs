//! Emission/catch pulse pair for the state-transfer protocol: print samples
//! of the analytic shapes and verify the transfer boundary conditions by
//! integrating the amplitude equations.

use qramsim::gue::{emission_pulse, solve_emission_amplitudes, PulsePair, PulseRole};
use qramsim::linalg::OdeOptions;
use qramsim::noise::{preset, Preset};
use std::f64::consts::FRAC_PI_2;

fn main() -> qramsim::Result<()> {
    let params = preset(Preset::PS2);
    let pulse = PulsePair::from_params(&params);
    println!(
        "window [{:.3}, {:.3}] us, zeta = {:.2} rad^2/us^2, clamp at {:.1} rad/us",
        -pulse.t_half, pulse.t_half, pulse.zeta, pulse.clamp_max
    );
    println!("{:>8} {:>12} {:>12}", "t (us)", "g_b", "g_c");
    for k in 0..=10 {
        let t = -pulse.t_half + 2.0 * pulse.t_half * k as f64 / 10.0;
        let gb = emission_pulse(t, &pulse, PulseRole::Sender).re;
        let gc = emission_pulse(t, &pulse, PulseRole::Receiver).re;
        println!("{t:>8.3} {gb:>12.4} {gc:>12.4}");
    }
    let sol = solve_emission_amplitudes(&pulse, params.gamma(), FRAC_PI_2, 100, &OdeOptions::default())?;
    println!(
        "boundary check: |alpha_Rc(t_f)|^2 = {:.6} (residual {:.2e})",
        sol.final_receiver_amplitude.norm_sqr(),
        sol.boundary_residual
    );
    Ok(())
}
