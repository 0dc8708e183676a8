//! Thin command-line front end over the experiment runners in
//! [`qramsim::cli`]. Exit codes: 0 success, 2 config error, 3 numerical
//! failure, 4 acceptance failure.

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use qramsim::cli::{
    run_cz_fidelity, run_export_pulse, run_io_analysis, run_query_metrics, run_query_sim,
    run_reproduce, run_resources, run_state_transfer, run_sweep, run_transfer_trajectories,
    run_validate, ReproduceTarget, RunConfig,
};
use qramsim::czfid::SweepParameter;
use qramsim::Error;

#[derive(Parser)]
#[command(name = "qramsim", about = "Superconducting-cavity QRAM simulation toolkit")]
struct Cli {
    /// JSON configuration file; flags override file values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (also via QRAMSIM_OUT_DIR).
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Parameter preset: PS1, PS2 or PS3.
    #[arg(long, global = true)]
    preset: Option<String>,
    /// Rail encoding: single or dual.
    #[arg(long, global = true)]
    rail: Option<String>,
    /// Architecture family: cswap or gue.
    #[arg(long, global = true)]
    family: Option<String>,
    /// Address-qubit count.
    #[arg(long, global = true)]
    n: Option<u32>,
    /// RNG seed for randomized inputs.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Post-selected and plain CZ gate infidelities for one preset.
    CzFidelity,
    /// Coherence-time scaling sweep with fitted log-log slopes.
    Sweep {
        /// One of t1-cavity, tphi-cavity, t1-transmon-ge, tphi-transmon-ee.
        #[arg(long)]
        parameter: String,
    },
    /// GUE pitch-and-catch state-transfer fidelities.
    StateTransfer {
        /// Also emit per-mode population trajectories.
        #[arg(long)]
        trajectories: bool,
    },
    /// Wave-packet scattering off an inactive GUE (rates in Hz).
    IoAnalysis {
        #[arg(long, default_value_t = 20e6)]
        gamma: f64,
        #[arg(long, default_value_t = 2e6)]
        dgamma: f64,
        /// Also print the scattering coefficients at this detuning (Hz).
        #[arg(long)]
        omega: Option<f64>,
    },
    /// Closed-form cavity/gate/timestep counts.
    Resources,
    /// Per-query metrics (computes channel inputs unless supplied).
    QueryMetrics {
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        p_step: Option<f64>,
    },
    /// Ideal statevector query against the oracle (n <= 3).
    QuerySim {
        /// Classical data bits, e.g. 0110 (random from seed when omitted).
        #[arg(long)]
        data: Option<String>,
        /// Computational address index (random superposition when omitted).
        #[arg(long)]
        address: Option<usize>,
    },
    /// Fast invariant bundle (truth tables, counts, n = 2 oracle).
    Validate,
    /// Regenerate a figure/table dataset and check its pinned values.
    Reproduce {
        /// fig2, fig3, fig6, fig8, fig9, fig11 or table3.
        target: String,
    },
    /// Sampled emission/catch pulse shapes.
    ExportPulse {
        #[arg(long, default_value_t = 400)]
        samples: usize,
    },
}

fn effective_config(cli: &Cli) -> Result<RunConfig, Error> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(d) = &cli.out_dir {
        cfg.out_dir = d.clone();
    }
    if let Some(p) = &cli.preset {
        cfg.preset = p.clone();
    }
    if let Some(r) = &cli.rail {
        cfg.rail = r.clone();
    }
    if let Some(f) = &cli.family {
        cfg.family = f.clone();
    }
    if let Some(n) = cli.n {
        cfg.n = n;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    cfg.validated()
}

fn dispatch(cli: &Cli, cfg: &RunConfig) -> Result<u8, Error> {
    match &cli.command {
        Command::CzFidelity => {
            let (r, path) = run_cz_fidelity(cfg)?;
            println!(
                "{}: eps_SR = {:.3e} (flag {:.3e}), eps_DR = {:.3e} (flag {:.3e})",
                cfg.preset,
                r.sr.epsilon,
                1.0 - r.sr.p_success,
                r.dr.epsilon,
                1.0 - r.dr.p_success
            );
            println!("wrote {}", path.display());
        }
        Command::Sweep { parameter } => {
            let param = match parameter.to_ascii_lowercase().as_str() {
                "t1-cavity" | "t1_cavity" => SweepParameter::T1Cavity,
                "tphi-cavity" | "tphi_cavity" => SweepParameter::TphiCavity,
                "t1-transmon-ge" | "t1_transmon_ge" => SweepParameter::T1TransmonGe,
                "tphi-transmon-ee" | "tphi_transmon_ee" => SweepParameter::TphiTransmonEe,
                other => return Err(Error::Config(format!("unknown sweep parameter '{other}'"))),
            };
            let (_, slope_eps, slope_flag, path) = run_sweep(cfg, param)?;
            println!("slope(epsilon) = {slope_eps:.3}, slope(flag) = {slope_flag:.3}");
            println!("wrote {}", path.display());
        }
        Command::StateTransfer { trajectories } => {
            let (sr, dr, path) = run_state_transfer(cfg)?;
            println!(
                "{}: SR 1-F_st = {:.3e}; DR 1-F_st = {:.3e}, 1-P_st = {:.3e}",
                cfg.preset,
                1.0 - sr.f_st,
                1.0 - dr.f_st,
                1.0 - dr.p_st
            );
            println!("wrote {}", path.display());
            if *trajectories {
                let p = run_transfer_trajectories(cfg, 300)?;
                println!("wrote {}", p.display());
            }
        }
        Command::IoAnalysis { gamma, dgamma, omega } => {
            if let Some(w_hz) = omega {
                let to_rad = 2.0 * std::f64::consts::PI * 1e-6;
                let (t, r) = qramsim::waveguide_io::pass_through_scattering(
                    w_hz * to_rad,
                    (gamma + dgamma) * to_rad,
                    gamma * to_rad,
                );
                println!(
                    "omega = {w_hz:.3e} Hz: t = {:.6} {:+.6}i (|t| = {:.6}), r = {:.3e} {:+.3e}i (|r| = {:.3e})",
                    t.re, t.im, t.norm(), r.re, r.im, r.norm()
                );
            }
            let (p_at, path) = run_io_analysis(cfg, *gamma, *dgamma)?;
            println!("p_refl = {p_at:.3e} at gamma = {gamma:.3e} Hz, dgamma = {dgamma:.3e} Hz");
            println!("wrote {}", path.display());
        }
        Command::Resources => {
            let (r, t_query, path) = run_resources(cfg)?;
            println!(
                "{} {} n={}: N_cav = {}, N_gates = {}, N_ts = {}, t_query = {} us",
                cfg.family, cfg.rail, cfg.n, r.n_cav, r.n_gates, r.n_ts, t_query
            );
            println!("wrote {}", path.display());
        }
        Command::QueryMetrics { epsilon, p_step } => {
            let (m, path) = run_query_metrics(cfg, *epsilon, *p_step)?;
            println!(
                "n={}: 1-F <= {:.3e}, P_no_flag = {:.3e}, Gamma_success = {:.3e} kHz",
                cfg.n,
                m.infidelity_bound,
                m.p_no_flag,
                m.gamma_success * 1e3
            );
            println!("wrote {}", path.display());
        }
        Command::QuerySim { data, address } => {
            let data_bits = match data {
                Some(s) => Some(
                    s.chars()
                        .map(|c| match c {
                            '0' => Ok(0u8),
                            '1' => Ok(1u8),
                            _ => Err(Error::Config(format!("bad data bit '{c}'"))),
                        })
                        .collect::<Result<Vec<u8>, Error>>()?,
                ),
                None => None,
            };
            let (fid, residual, path) = run_query_sim(cfg, data_bits, *address)?;
            println!("fidelity = {fid:.12}, tree residual = {residual:.3e}");
            println!("wrote {}", path.display());
        }
        Command::Validate => {
            let failures = run_validate()?;
            if failures.is_empty() {
                println!("validate: all checks passed");
            } else {
                for f in &failures {
                    println!("validate FAILED: {f}");
                }
                return Ok(4);
            }
        }
        Command::Reproduce { target } => {
            let t: ReproduceTarget = target.parse()?;
            let report = run_reproduce(cfg, t)?;
            for a in &report.artifacts {
                println!("wrote {}", a.display());
            }
            for (name, value, pass) in &report.checks {
                println!("[{}] {name} = {value:.4e}", if *pass { "pass" } else { "FAIL" });
            }
            if !report.all_passed() {
                return Ok(4);
            }
        }
        Command::ExportPulse { samples } => {
            let path = run_export_pulse(cfg, *samples)?;
            println!("wrote {}", path.display());
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match effective_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{}", error_json(&e));
            return ExitCode::from(2);
        }
    };
    match dispatch(&cli, &cfg) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("{}", error_json(&e));
            let code = match e {
                Error::Config(_) | Error::UnknownPreset(_) => 2,
                _ => 3,
            };
            ExitCode::from(code)
        }
    }
}

fn error_json(e: &Error) -> String {
    serde_json::json!({ "error": e.to_string() }).to_string()
}
