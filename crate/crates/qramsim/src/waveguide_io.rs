//! Input-output analysis of a single-photon wave packet incident on a GUE:
//! pass-through scattering coefficients, Wigner delay, reflection
//! probability under decay-rate asymmetry, and the time-domain absorption
//! problem with a catch pulse.
//!
//! Everything here lives in the single-excitation sector, where the
//! quantum Langevin equations reduce to classical linear ODEs for c-number
//! amplitudes.

use num_complex::Complex64 as C64;
use num_traits::Zero;
use rustfft::FftPlanner;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::gue::{emission_pulse, PulsePair, PulseRole};
use crate::linalg::{rk45_adaptive, OdeOptions};
use ndarray::Array1;

/// Sampled complex waveform on a uniform time grid.
#[derive(Clone, Debug)]
pub struct Waveform {
    pub times: Vec<f64>,
    pub amplitudes: Vec<C64>,
}

impl Waveform {
    pub fn new(times: Vec<f64>, amplitudes: Vec<C64>) -> Result<Self> {
        if times.len() != amplitudes.len() || times.len() < 2 {
            return Err(Error::DimensionMismatch("waveform grid/amplitude mismatch".into()));
        }
        if !times.windows(2).all(|w| w[1] > w[0]) {
            return Err(Error::DimensionMismatch("waveform grid must increase".into()));
        }
        Ok(Self { times, amplitudes })
    }

    pub fn dt(&self) -> f64 {
        (self.times[self.times.len() - 1] - self.times[0]) / (self.times.len() - 1) as f64
    }

    /// `integral |a|^2 dt` by the trapezoid rule.
    pub fn norm_sq(&self) -> f64 {
        let mut s = 0.0;
        for k in 0..self.times.len() - 1 {
            let dt = self.times[k + 1] - self.times[k];
            s += 0.5 * dt * (self.amplitudes[k].norm_sqr() + self.amplitudes[k + 1].norm_sqr());
        }
        s
    }

    /// Linear interpolation (zero outside the grid).
    pub fn sample(&self, t: f64) -> C64 {
        let t0 = self.times[0];
        let dt = self.dt();
        let x = (t - t0) / dt;
        if x < 0.0 || x > (self.times.len() - 1) as f64 {
            return C64::zero();
        }
        let k = (x.floor() as usize).min(self.times.len() - 2);
        let f = x - k as f64;
        self.amplitudes[k] * (1.0 - f) + self.amplitudes[k + 1] * f
    }
}

/// Pass-through scattering coefficients at detuning `omega` for an inactive
/// GUE with decay rates `gamma1`, `gamma2`:
/// transmission `t = (g1 g2 + w^2)/((w + i g1)(w + i g2))`,
/// reflection `r = w (g1 - g2)/((w + i g1)(w + i g2))`.
/// `|t|^2 + |r|^2 = 1` at every frequency.
pub fn pass_through_scattering(omega: f64, gamma1: f64, gamma2: f64) -> (C64, C64) {
    let den = C64::new(omega, gamma1) * C64::new(omega, gamma2);
    let t = C64::new(gamma1 * gamma2 + omega * omega, 0.0) / den;
    let r = C64::new(omega * (gamma1 - gamma2), 0.0) / den;
    (t, r)
}

/// Wigner delay of the symmetric pass-through GUE: `2/gamma`.
pub fn wigner_delay(gamma: f64) -> f64 {
    2.0 / gamma
}

fn fft_frequencies(n: usize, dt: f64) -> Vec<f64> {
    // angular frequencies of the unnormalized DFT bins
    let df = 2.0 * PI / (n as f64 * dt);
    (0..n)
        .map(|k| {
            let kk = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
            kk * df
        })
        .collect()
}

/// Frequency-domain amplitudes of a waveform, zero-padded by `pad` times the
/// original length. Returns (omegas, spectrum).
fn spectrum(input: &Waveform, pad: usize) -> (Vec<f64>, Vec<C64>) {
    let n0 = input.amplitudes.len();
    let n = (n0 * pad).next_power_of_two();
    let mut buf: Vec<rustfft::num_complex::Complex<f64>> =
        input.amplitudes.iter().map(|a| rustfft::num_complex::Complex::new(a.re, a.im)).collect();
    buf.resize(n, rustfft::num_complex::Complex::new(0.0, 0.0));
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    let omegas = fft_frequencies(n, input.dt());
    (omegas, buf.into_iter().map(|c| C64::new(c.re, c.im)).collect())
}

/// Reflection probability of an input packet from a pass-through GUE:
/// `p_refl = Int |r(w) a(w)|^2 dw / Int |a(w)|^2 dw`.
/// Rejects waveforms sampled coarser than 40 points per `1/gamma`.
pub fn reflection_probability(input: &Waveform, gamma1: f64, gamma2: f64) -> Result<f64> {
    let gamma = 0.5 * (gamma1 + gamma2);
    let limit = 1.0 / (40.0 * gamma);
    if input.dt() > limit {
        return Err(Error::Undersampled { dt: input.dt(), limit });
    }
    let (omegas, spec) = spectrum(input, 8);
    let mut num = 0.0;
    let mut den = 0.0;
    for (w, a) in omegas.iter().zip(&spec) {
        let (_, r) = pass_through_scattering(*w, gamma1, gamma2);
        num += (r * a).norm_sqr();
        den += a.norm_sqr();
    }
    Ok(num / den)
}

/// Apply the symmetric pass-through transfer function to a packet and return
/// the output waveform (FFT round trip), used for the Wigner-delay check.
pub fn pass_through_time_domain(input: &Waveform, gamma: f64) -> Waveform {
    let n0 = input.amplitudes.len();
    let n = (n0 * 8).next_power_of_two();
    let mut buf: Vec<rustfft::num_complex::Complex<f64>> =
        input.amplitudes.iter().map(|a| rustfft::num_complex::Complex::new(a.re, a.im)).collect();
    buf.resize(n, rustfft::num_complex::Complex::new(0.0, 0.0));
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    let omegas = fft_frequencies(n, input.dt());
    for (k, w) in omegas.iter().enumerate() {
        // the forward DFT uses the e^{-i w t} sign, conjugate to the
        // input-output convention, so the filter is evaluated at -w
        let (t, _) = pass_through_scattering(-*w, gamma, gamma);
        let c = buf[k];
        let tv = t * C64::new(c.re, c.im);
        buf[k] = rustfft::num_complex::Complex::new(tv.re, tv.im);
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    let scale = 1.0 / n as f64;
    let dt = input.dt();
    let t0 = input.times[0];
    let times: Vec<f64> = (0..n).map(|k| t0 + k as f64 * dt).collect();
    let amplitudes: Vec<C64> =
        buf.into_iter().map(|c| C64::new(c.re * scale, c.im * scale)).collect();
    Waveform { times, amplitudes }
}

/// Result of scattering an incident packet off a (possibly driven) GUE.
#[derive(Clone, Debug)]
pub struct ScatteringResult {
    pub p_refl: f64,
    pub p_tran: f64,
    pub out_right: Waveform,
    pub out_left: Waveform,
}

/// Integrate the four Langevin amplitude equations for a GUE driven by a
/// right-moving input packet, with an optional catch pulse, and read the
/// output fields from the input-output relations:
/// `a_R^out = a_R^in + i sqrt(g1) b1 + sqrt(g2) b2`,
/// `a_L^out = a_L^in + sqrt(g1) b1 + i sqrt(g2) b2`.
pub fn absorption_scattering(
    input: &Waveform,
    gamma1: f64,
    gamma2: f64,
    catch_pulse: Option<&PulsePair>,
) -> Result<ScatteringResult> {
    let gamma = 0.5 * (gamma1 + gamma2);
    let limit = 1.0 / (40.0 * gamma);
    if input.dt() > limit {
        return Err(Error::Undersampled { dt: input.dt(), limit });
    }
    let t0 = input.times[0];
    let t1 = *input.times.last().unwrap();
    let i = C64::new(0.0, 1.0);
    let input_c = input.clone();
    let pulse = catch_pulse.copied();
    // e^{-i w0 d/v} = -i at the lambda/4 spacing
    let mut rhs = move |t: f64, y: &Array1<C64>| -> Array1<C64> {
        let g = pulse
            .as_ref()
            .map(|p| emission_pulse(t, p, PulseRole::Receiver))
            .unwrap_or_else(C64::zero);
        let a_in = input_c.sample(t);
        let (b1, b2, b3, b4) = (y[0], y[1], y[2], y[3]);
        let mut dy = Array1::zeros(4);
        dy[0] = -gamma1 * b1 - i * g * b3 - gamma1.sqrt() * (-i) * a_in;
        dy[1] = -gamma2 * b2 - i * g * b4 - gamma2.sqrt() * a_in;
        dy[2] = -i * g * b1;
        dy[3] = -i * g * b2;
        dy
    };
    let y0 = Array1::zeros(4);
    let outs = input.times.clone();
    let mut times = Vec::new();
    let mut out_r = Vec::new();
    let mut out_l = Vec::new();
    rk45_adaptive(
        &mut rhs,
        &y0,
        t0,
        t1,
        &outs,
        &OdeOptions { rtol: 1e-9, atol: 1e-12, ..Default::default() },
        &mut |t, y: &Array1<C64>| {
            let a_in = input.sample(t);
            times.push(t);
            out_r.push(a_in + i * gamma1.sqrt() * y[0] + gamma2.sqrt() * y[1]);
            out_l.push(gamma1.sqrt() * y[0] + i * gamma2.sqrt() * y[1]);
        },
    )?;
    let out_right = Waveform::new(times.clone(), out_r)?;
    let out_left = Waveform::new(times, out_l)?;
    let norm_in = input.norm_sq();
    let p_refl = out_left.norm_sq() / norm_in;
    let p_tran = out_right.norm_sq() / norm_in;
    Ok(ScatteringResult { p_refl, p_tran, out_right, out_left })
}

/// Emitted waveform of the sender block of the amplitude equations, for use
/// as the incident packet in the scattering analyses.
pub fn emitted_waveform(pulse: &PulsePair, gamma: f64, opts: &OdeOptions) -> Result<Waveform> {
    // oversample well past the Nyquist guard (40 points per 1/gamma)
    let n = ((2.0 * pulse.t_half) * gamma * 60.0).ceil() as usize;
    let sol = crate::gue::solve_emission_amplitudes(
        pulse,
        gamma,
        std::f64::consts::FRAC_PI_2,
        n,
        opts,
    )?;
    Waveform::new(sol.times, sol.emitted)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn scattering_is_unitary_everywhere() {
        for (g1, g2) in [(125.7, 125.7), (131.9, 119.4), (80.0, 160.0)] {
            for w in [-500.0, -30.0, -1.0, 0.0, 2.5, 75.0, 400.0] {
                let (t, r) = pass_through_scattering(w, g1, g2);
                assert_abs_diff_eq!(t.norm_sqr() + r.norm_sqr(), 1.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn symmetric_case_transmits_with_unit_modulus() {
        let g = 2.0 * PI * 20.0;
        for w in [-40.0, 0.0, 13.0, 90.0] {
            let (t, r) = pass_through_scattering(w, g, g);
            assert_abs_diff_eq!(r.norm(), 0.0, epsilon = 1e-15);
            assert_abs_diff_eq!(t.norm(), 1.0, epsilon = 1e-12);
            // t = (w - i gamma)/(w + i gamma)
            let expect = C64::new(w, -g) / C64::new(w, g);
            assert_abs_diff_eq!((t - expect).norm(), 0.0, epsilon = 1e-12);
        }
        // on resonance the formula evaluates to -1 (unit modulus)
        let (t0, _) = pass_through_scattering(0.0, g, 0.9 * g);
        assert_abs_diff_eq!((t0 - C64::new(-1.0, 0.0)).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn small_detuning_phase_slope_is_wigner_delay() {
        let g = 2.0 * PI * 20.0;
        let dw = 1e-4 * g;
        let (tp, _) = pass_through_scattering(dw, g, g);
        let (tm, _) = pass_through_scattering(-dw, g, g);
        // arg via the ratio to avoid the branch cut at t(0) = -1
        let slope = (tp * tm.conj()).arg() / (2.0 * dw);
        assert_abs_diff_eq!(slope, wigner_delay(g), epsilon = 1e-6);
    }

    #[test]
    fn wigner_delay_values() {
        let g = 2.0 * PI * 20.0; // rad/us
        assert_abs_diff_eq!(wigner_delay(g), 0.0159154943, epsilon = 1e-9);
        assert!(wigner_delay(1e9) < 1e-8);
    }

    #[test]
    fn gaussian_packet_peak_shifts_by_wigner_delay() {
        let g = 2.0 * PI * 20.0;
        let sigma = 0.15; // us, spectrally narrow vs gamma
        let dt = 1.0 / (60.0 * g);
        let n = (1.6 / dt) as usize;
        let times: Vec<f64> = (0..n).map(|k| -0.8 + k as f64 * dt).collect();
        let amps: Vec<C64> =
            times.iter().map(|t| C64::new((-t * t / (2.0 * sigma * sigma)).exp(), 0.0)).collect();
        let input = Waveform::new(times, amps).unwrap();
        let out = pass_through_time_domain(&input, g);
        // sub-sample peak via quadratic interpolation
        let peak = |w: &Waveform| -> f64 {
            let (mut kmax, mut vmax) = (0usize, 0.0f64);
            for (k, a) in w.amplitudes.iter().enumerate() {
                if a.norm_sqr() > vmax {
                    vmax = a.norm_sqr();
                    kmax = k;
                }
            }
            let ym = w.amplitudes[kmax - 1].norm_sqr();
            let y0 = w.amplitudes[kmax].norm_sqr();
            let yp = w.amplitudes[kmax + 1].norm_sqr();
            let frac = 0.5 * (ym - yp) / (ym - 2.0 * y0 + yp);
            w.times[kmax] + frac * w.dt()
        };
        let shift = peak(&out) - peak(&input);
        let expect = wigner_delay(g);
        assert!((shift - expect).abs() < 0.02 * expect, "shift {shift} vs {expect}");
    }

    #[test]
    fn undersampled_waveform_rejected() {
        let g = 2.0 * PI * 20.0;
        let times: Vec<f64> = (0..50).map(|k| k as f64 * 0.05).collect();
        let amps = vec![C64::new(1.0, 0.0); 50];
        let w = Waveform::new(times, amps).unwrap();
        assert!(matches!(
            reflection_probability(&w, g, g),
            Err(Error::Undersampled { .. })
        ));
    }
}
