//! Batch experiment front end: named experiments with JSON configs, CSV/JSON
//! emission with reproducibility metadata, and the dataset generators behind
//! the headline figures and tables.
//!
//! Exit-code contract (used by the binary): 0 success, 2 configuration
//! error, 3 numerical failure, 4 acceptance failure.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::czfid::{
    self, cz_fidelity, CzFidelityResult, Rail, SweepParameter,
};
use crate::error::{Error, Result};
use crate::gue::{self, GueChain, PulsePair};
use crate::linalg::{loglog_slope, OdeOptions};
use crate::noise::{preset, ParameterSet, Preset};
use crate::query::{self, Family};
use crate::waveguide_io;

/// Experiment configuration; every field has a default so a config file can
/// specify only what it changes. Unknown keys are rejected.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub experiment: String,
    pub preset: String,
    /// Inline parameter overrides (applied after the preset).
    pub params: Option<ParameterSet>,
    pub rail: String,
    pub family: String,
    pub n: u32,
    /// Cavity Fock cutoff for CZ-channel runs.
    pub cz_cutoff: u8,
    /// Global excitation cutoff for state-transfer runs.
    pub transfer_cutoff: u32,
    pub rtol: f64,
    pub atol: f64,
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Sweep grid (us) for `sweep`; empty means the built-in grid.
    pub sweep_values: Vec<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            experiment: "unnamed".into(),
            preset: "PS2".into(),
            params: None,
            rail: "single".into(),
            family: "cswap".into(),
            n: 4,
            cz_cutoff: 2,
            transfer_cutoff: 2,
            rtol: 1e-8,
            atol: 1e-10,
            seed: 7,
            out_dir: PathBuf::from("out"),
            sweep_values: Vec::new(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{path:?}: {e}")))?;
        cfg.validated()
    }

    pub fn validated(self) -> Result<Self> {
        if self.n < 2 {
            return Err(Error::Config("n must be >= 2".into()));
        }
        if !(self.rtol > 0.0 && self.atol > 0.0) {
            return Err(Error::Config("tolerances must be positive".into()));
        }
        if self.cz_cutoff < 1 {
            return Err(Error::Config("cz_cutoff must be >= 1".into()));
        }
        self.preset()?;
        self.rail()?;
        self.family()?;
        Ok(self)
    }

    pub fn preset(&self) -> Result<Preset> {
        self.preset.parse()
    }

    pub fn rail(&self) -> Result<Rail> {
        match self.rail.to_ascii_lowercase().as_str() {
            "single" | "sr" => Ok(Rail::Single),
            "dual" | "dr" => Ok(Rail::Dual),
            other => Err(Error::Config(format!("unknown rail '{other}'"))),
        }
    }

    pub fn family(&self) -> Result<Family> {
        match self.family.to_ascii_lowercase().as_str() {
            "cswap" => Ok(Family::Cswap),
            "gue" => Ok(Family::Gue),
            other => Err(Error::Config(format!("unknown family '{other}'"))),
        }
    }

    pub fn parameters(&self) -> Result<ParameterSet> {
        Ok(match &self.params {
            Some(p) => p.clone(),
            None => preset(self.preset()?),
        })
    }

    pub fn ode_options(&self) -> OdeOptions {
        OdeOptions { rtol: self.rtol, atol: self.atol, ..Default::default() }
    }

    /// Stable hash of the effective configuration.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let mut h = Sha256::new();
        h.update(json.as_bytes());
        let digest = h.finalize();
        let mut out = String::new();
        for b in digest.iter().take(8) {
            let _ = write!(out, "{b:02x}");
        }
        out
    }

    /// Output directory, overridable through `QRAMSIM_OUT_DIR`.
    pub fn resolved_out_dir(&self) -> PathBuf {
        std::env::var_os("QRAMSIM_OUT_DIR").map(PathBuf::from).unwrap_or_else(|| self.out_dir.clone())
    }
}

/// Write a CSV with `# key: value` metadata lines followed by a header row.
/// Bodies are deterministic for a fixed config and seed.
pub fn write_csv(
    path: &Path,
    cfg: &RunConfig,
    extra_meta: &[(&str, String)],
    header: &[&str],
    rows: &[Vec<String>],
) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut out = String::new();
    let _ = writeln!(out, "# tool: qramsim {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(out, "# experiment: {}", cfg.experiment);
    let _ = writeln!(out, "# config_hash: {}", cfg.hash());
    let _ = writeln!(out, "# config: {}", serde_json::to_string(cfg)?);
    for (k, v) in extra_meta {
        let _ = writeln!(out, "# {k}: {v}");
    }
    let _ = writeln!(out, "{}", header.join(","));
    for row in rows {
        let _ = writeln!(out, "{}", row.join(","));
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

fn fmt(x: f64) -> String {
    format!("{x:.12e}")
}

/// `cz-fidelity`: post-selected and plain CZ infidelities for one preset.
pub fn run_cz_fidelity(cfg: &RunConfig) -> Result<(CzFidelityResult, PathBuf)> {
    let result = cz_fidelity(cfg.preset()?, cfg.cz_cutoff, &cfg.ode_options())?;
    let dir = cfg.resolved_out_dir();
    let path = dir.join(format!("cz_fidelity_{}.csv", cfg.preset()?));
    let rows = vec![
        vec![
            cfg.preset.clone(),
            "single".into(),
            fmt(result.sr.epsilon),
            fmt(result.sr_nps.epsilon),
            fmt(1.0 - result.sr.p_success),
        ],
        vec![
            cfg.preset.clone(),
            "dual".into(),
            fmt(result.dr.epsilon),
            fmt(result.dr_nps.epsilon),
            fmt(1.0 - result.dr.p_success),
        ],
    ];
    write_csv(
        &path,
        cfg,
        &[],
        &["preset", "rail", "epsilon_ps", "epsilon_nps", "flag_prob"],
        &rows,
    )?;
    Ok((result, path))
}

/// `sweep`: coherence-time scaling rows plus the fitted log-log slopes.
pub fn run_sweep(
    cfg: &RunConfig,
    parameter: SweepParameter,
) -> Result<(Vec<czfid::SweepRow>, f64, f64, PathBuf)> {
    let rail = cfg.rail()?;
    let values = if cfg.sweep_values.is_empty() {
        default_sweep_values(parameter, rail)
    } else {
        cfg.sweep_values.clone()
    };
    let rows = czfid::scaling_sweep(parameter, &values, rail, &cfg.ode_options())?;
    let xs: Vec<f64> = rows.iter().map(|r| r.value_us).collect();
    let eps: Vec<f64> = rows.iter().map(|r| r.epsilon.max(1e-300)).collect();
    let flags: Vec<f64> = rows.iter().map(|r| r.flag_prob.max(1e-300)).collect();
    let slope_eps = loglog_slope(&xs, &eps);
    let slope_flag = loglog_slope(&xs, &flags);
    let dir = cfg.resolved_out_dir();
    let path = dir.join(format!("sweep_{}_{}.csv", parameter.label(), rail));
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.parameter.label().into(),
                fmt(r.value_us),
                fmt(r.epsilon),
                fmt(r.flag_prob),
                r.rail.to_string(),
                cfg.preset.clone(),
            ]
        })
        .collect();
    write_csv(
        &path,
        cfg,
        &[
            ("slope_epsilon", format!("{slope_eps:.4}")),
            ("slope_flag", format!("{slope_flag:.4}")),
        ],
        &["parameter", "value_us", "epsilon", "flag_prob", "rail", "preset"],
        &body,
    )?;
    Ok((rows, slope_eps, slope_flag, path))
}

/// Sweep grids chosen so the swept channel dominates over integrator noise
/// while staying perturbative (the dual-rail T1 scaling is second order and
/// needs shorter lifetimes to resolve).
pub fn default_sweep_values(parameter: SweepParameter, rail: Rail) -> Vec<f64> {
    match (parameter, rail) {
        (SweepParameter::T1Cavity, Rail::Dual) => czfid::log_space(10.0, 100.0, 6),
        (SweepParameter::T1Cavity, Rail::Single) => czfid::log_space(300.0, 30_000.0, 6),
        (SweepParameter::TphiCavity, _) => czfid::log_space(300.0, 30_000.0, 6),
        (SweepParameter::T1TransmonGe, _) | (SweepParameter::TphiTransmonEe, _) => {
            czfid::log_space(50.0, 5_000.0, 6)
        }
    }
}

/// `state-transfer`: single- and dual-rail transfer outcomes for a preset.
pub fn run_state_transfer(
    cfg: &RunConfig,
) -> Result<(gue::TransferOutcome, gue::TransferOutcome, PathBuf)> {
    let params = cfg.parameters()?;
    let chain = GueChain::symmetric(3, params.gamma());
    let pulse = PulsePair::from_params(&params);
    let ch = gue::transfer_channel(&chain, &pulse, &params, cfg.transfer_cutoff, &cfg.ode_options())?;
    let sr = ch.single_rail_average();
    let dr = ch.dual_rail_average();
    let dir = cfg.resolved_out_dir();
    let path = dir.join(format!("state_transfer_{}.csv", cfg.preset()?));
    let rows = vec![
        vec!["single".into(), fmt(1.0 - sr.f_st), fmt(1.0 - sr.p_st), fmt(sr.dark_state_leakage)],
        vec!["dual".into(), fmt(1.0 - dr.f_st), fmt(1.0 - dr.p_st), fmt(dr.dark_state_leakage)],
    ];
    write_csv(
        &path,
        cfg,
        &[("wrong_direction_population", fmt(ch.wrong_direction_population))],
        &["rail", "infidelity", "flag_prob", "dark_state_leakage"],
        &rows,
    )?;
    Ok((sr, dr, path))
}

/// Population trajectories for one transfer, as CSV (time + per-mode <n>).
pub fn run_transfer_trajectories(cfg: &RunConfig, samples: usize) -> Result<PathBuf> {
    let params = cfg.parameters()?;
    let chain = GueChain::symmetric(3, params.gamma());
    let pulse = PulsePair::from_params(&params);
    let (times, pops) = gue::transfer_trajectories(
        &chain,
        &pulse,
        &params,
        cfg.transfer_cutoff,
        gue::RoutedState::PsiR,
        samples,
        &cfg.ode_options(),
    )?;
    let dir = cfg.resolved_out_dir();
    let path = dir.join(format!("transfer_populations_{}.csv", cfg.preset()?));
    let mut header: Vec<String> = vec!["t_us".into()];
    for g in ["a", "b", "c"] {
        for m in ["data_l", "data_r", "res_l", "res_r"] {
            header.push(format!("{g}_{m}"));
        }
    }
    let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    let rows: Vec<Vec<String>> = times
        .iter()
        .enumerate()
        .map(|(k, t)| {
            let mut row = vec![fmt(*t)];
            for p in &pops {
                row.push(fmt(p[k]));
            }
            row
        })
        .collect();
    write_csv(&path, cfg, &[], &header_refs, &rows)?;
    Ok(path)
}

/// `io-analysis`: pass-through reflection at the given rates plus a
/// delta-gamma sweep for both the pass-through and absorption problems.
/// Rates are given in Hz; the asymmetry is applied one-sided
/// (`gamma_1 = gamma + dgamma`, `gamma_2 = gamma`).
pub fn run_io_analysis(cfg: &RunConfig, gamma_hz: f64, dgamma_hz: f64) -> Result<(f64, PathBuf)> {
    let params = cfg.parameters()?;
    let gamma = 2.0 * std::f64::consts::PI * gamma_hz * 1e-6;
    let dgamma = 2.0 * std::f64::consts::PI * dgamma_hz * 1e-6;
    let mut pulse = PulsePair::from_params(&params);
    pulse.gamma = gamma;
    pulse.clamp_max = gamma / 2.0;
    let opts = cfg.ode_options();
    let input = waveguide_io::emitted_waveform(&pulse, gamma, &opts)?;
    let p_at = waveguide_io::reflection_probability(&input, gamma + dgamma, gamma)?;

    let mut rows = Vec::new();
    for frac in [0.01, 0.02, 0.05, 0.1, 0.15, 0.2] {
        let dg = frac * gamma;
        // symmetric split isolates the pure quadratic dependence of the
        // leading-order expansion (fixed mean rate)
        let p_sym =
            waveguide_io::reflection_probability(&input, gamma + dg / 2.0, gamma - dg / 2.0)?;
        let (g1, g2) = (gamma + dg, gamma);
        let p_pass = waveguide_io::reflection_probability(&input, g1, g2)?;
        let absorb = waveguide_io::absorption_scattering(&input, g1, g2, Some(&pulse))?;
        rows.push(vec![
            fmt(dg),
            fmt(frac),
            fmt(p_sym),
            fmt(p_pass),
            fmt(absorb.p_refl),
            fmt(absorb.p_tran),
        ]);
    }
    let dir = cfg.resolved_out_dir();
    let path = dir.join("io_analysis.csv");
    write_csv(
        &path,
        cfg,
        &[
            ("gamma_rad_per_us", fmt(gamma)),
            ("dgamma_rad_per_us", fmt(dgamma)),
            ("p_refl_at_requested_asymmetry", fmt(p_at)),
        ],
        &[
            "dgamma_rad_per_us",
            "dgamma_over_gamma",
            "p_refl_pass_sym",
            "p_refl_pass",
            "p_refl_absorb",
            "p_tran_absorb",
        ],
        &rows,
    )?;
    Ok((p_at, path))
}

/// `resources`: closed-form counts for one architecture point.
pub fn run_resources(cfg: &RunConfig) -> Result<(query::Resources, f64, PathBuf)> {
    let family = cfg.family()?;
    let res = query::resources(family, cfg.rail()?, cfg.n)?;
    let params = cfg.parameters()?;
    let t_query = query::timestep_duration(family, &params) * res.n_ts as f64;
    let dir = cfg.resolved_out_dir();
    let path = dir.join(format!("resources_{}_{}_n{}.json", cfg.family, cfg.rail, cfg.n));
    write_json(
        &path,
        &serde_json::json!({
            "family": cfg.family,
            "rail": cfg.rail,
            "n": cfg.n,
            "n_cav": res.n_cav,
            "n_gates": res.n_gates,
            "n_ts": res.n_ts,
            "t_query_us": t_query,
        }),
    )?;
    Ok((res, t_query, path))
}

/// `export-pulse`: sampled pulse pair with window and clamp metadata.
pub fn run_export_pulse(cfg: &RunConfig, samples: usize) -> Result<PathBuf> {
    let params = cfg.parameters()?;
    let pulse = PulsePair::from_params(&params);
    let mut rows = Vec::new();
    let mut clamp_events = 0usize;
    for k in 0..=samples {
        let t = -pulse.t_half + 2.0 * pulse.t_half * k as f64 / samples as f64;
        let gb = gue::emission_pulse(t, &pulse, gue::PulseRole::Sender);
        let gc = gue::emission_pulse(t, &pulse, gue::PulseRole::Receiver);
        if gb.norm() >= pulse.clamp_max * pulse.lambda_b - 1e-12
            || gc.norm() >= pulse.clamp_max * pulse.lambda_c - 1e-12
        {
            clamp_events += 1;
        }
        rows.push(vec![fmt(t), fmt(gb.re), fmt(gb.im), fmt(gc.re), fmt(gc.im)]);
    }
    let dir = cfg.resolved_out_dir();
    let path = dir.join("pulse_shapes.csv");
    write_csv(
        &path,
        cfg,
        &[
            ("window_us", format!("[{}, {}]", -pulse.t_half, pulse.t_half)),
            ("clamp_max_rad_per_us", fmt(pulse.clamp_max)),
            ("clamp_events", clamp_events.to_string()),
            ("zeta", fmt(pulse.zeta)),
        ],
        &["t_us", "re_g_b", "im_g_b", "re_g_c", "im_g_c"],
        &rows,
    )?;
    Ok(path)
}

/// `query-sim`: ideal n-bit query against the oracle, with random data and
/// addresses drawn from the seeded generator when not specified.
pub fn run_query_sim(
    cfg: &RunConfig,
    data: Option<Vec<u8>>,
    address_index: Option<usize>,
) -> Result<(f64, f64, PathBuf)> {
    use rand::{Rng, SeedableRng};
    if cfg.n > 3 {
        return Err(Error::CircuitSize(
            cfg.n,
            "statevector query simulation supports n in {2, 3}".into(),
        ));
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.seed);
    let nn = 1usize << cfg.n;
    let data = data.unwrap_or_else(|| (0..nn).map(|_| rng.gen_range(0..=1u8)).collect());
    let circuit = crate::circuit::build_qram_circuit(cfg.n, &data)?;
    let sim = crate::circuit::CircuitSimulator::new(&circuit)?;
    let address: Vec<C64> = match address_index {
        Some(i) => {
            let mut a = vec![C64::new(0.0, 0.0); nn];
            a[i] = C64::new(1.0, 0.0);
            a
        }
        None => {
            let mut a: Vec<C64> = (0..nn)
                .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let norm = a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
            for x in &mut a {
                *x /= norm;
            }
            a
        }
    };
    let outcome = sim.simulate_ideal_query(&circuit, &address)?;
    let dir = cfg.resolved_out_dir();
    let path = dir.join(format!("query_sim_n{}.json", cfg.n));
    write_json(
        &path,
        &serde_json::json!({
            "n": cfg.n,
            "data": data,
            "seed": cfg.seed,
            "fidelity": outcome.fidelity,
            "tree_vacuum_residual": outcome.tree_vacuum_residual,
            "norm": outcome.norm,
            "circuit": circuit.to_json(),
        }),
    )?;
    Ok((outcome.fidelity, outcome.tree_vacuum_residual, path))
}

/// `query-metrics`: full per-query metrics, computing the per-step inputs
/// from the channel pipelines unless they are supplied.
pub fn run_query_metrics(
    cfg: &RunConfig,
    epsilon: Option<f64>,
    p_step: Option<f64>,
) -> Result<(query::QueryMetrics, PathBuf)> {
    let params = cfg.parameters()?;
    let family = cfg.family()?;
    let rail = cfg.rail()?;
    let (eps, p) = match (epsilon, p_step) {
        (Some(e), Some(p)) => (e, p),
        _ => {
            let inputs = compute_step_inputs(cfg, family, rail)?;
            (epsilon.unwrap_or(inputs.epsilon), p_step.unwrap_or(inputs.p_step))
        }
    };
    let spec = query::ArchitectureSpec { family, rail, n: cfg.n, params };
    let m = query::success_metrics(&spec, eps, p)?;
    let dir = cfg.resolved_out_dir();
    let path = dir.join(format!("query_metrics_{}_{}_n{}.json", cfg.family, cfg.rail, cfg.n));
    write_json(&path, &serde_json::to_value(m)?)?;
    Ok((m, path))
}

/// Per-step error and keep probabilities from the channel simulations.
pub fn compute_step_inputs(cfg: &RunConfig, family: Family, rail: Rail) -> Result<query::StepInputs> {
    let fid = cz_fidelity(cfg.preset()?, cfg.cz_cutoff, &cfg.ode_options())?;
    let (cz, cz_nps) = match rail {
        Rail::Single => (fid.sr, fid.sr_nps),
        Rail::Dual => (fid.dr, fid.dr_nps),
    };
    Ok(match family {
        Family::Cswap => query::StepInputs {
            epsilon: cz.epsilon,
            epsilon_nps: cz_nps.epsilon,
            p_step: cz.p_success,
        },
        Family::Gue => {
            let params = cfg.parameters()?;
            let chain = GueChain::symmetric(3, params.gamma());
            let pulse = PulsePair::from_params(&params);
            let ch = gue::transfer_channel(
                &chain,
                &pulse,
                &params,
                cfg.transfer_cutoff,
                &cfg.ode_options(),
            )?;
            let st = match rail {
                Rail::Single => ch.single_rail_average(),
                Rail::Dual => ch.dual_rail_average(),
            };
            let st_nps = ch.single_rail_average();
            query::gue_step_inputs(&cz, &cz_nps, &st, st_nps.f_st)
        }
    })
}

/// `validate`: fast invariant bundle (gate truth tables, builder counts,
/// n = 2 oracle). Returns the list of failed checks.
pub fn run_validate() -> Result<Vec<String>> {
    let mut failures = Vec::new();

    // gate truth tables, exercised through the analytic constructors
    let basis = crate::fock::build_basis(3, 2, None, 0)?;
    let c1 = crate::gates::cswap_unitary(&basis, 0, 1, 2, crate::gates::CswapVariant::C1)?;
    let st = c1.apply(&crate::fock::PureState::basis_state(basis.clone(), &[1, 1, 0], 0));
    let target = crate::fock::PureState::basis_state(basis.clone(), &[1, 0, 1], 0);
    if (st.inner(&target).norm() - 1.0).abs() > 1e-12 {
        failures.push("C1SWAP truth table".into());
    }
    if c1.unitarity_defect() > 1e-12 {
        failures.push("C1SWAP unitarity".into());
    }

    // builder counts against the closed forms
    if let Err(e) = crate::circuit::count_validation(12) {
        failures.push(format!("count validation: {e}"));
    }

    // n = 2 oracle, all data words and computational addresses
    'outer: for data_word in 0..16u32 {
        let data: Vec<u8> = (0..4).map(|b| ((data_word >> b) & 1) as u8).collect();
        let circuit = crate::circuit::build_qram_circuit(2, &data)?;
        let sim = crate::circuit::CircuitSimulator::new(&circuit)?;
        for addr in 0..4usize {
            let mut a = vec![C64::new(0.0, 0.0); 4];
            a[addr] = C64::new(1.0, 0.0);
            let out = sim.simulate_ideal_query(&circuit, &a)?;
            if out.fidelity < 1.0 - 1e-9 {
                failures.push(format!("n=2 oracle: data {data:?} addr {addr}"));
                break 'outer;
            }
        }
    }
    Ok(failures)
}

/// Targets of the `reproduce` subcommand.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReproduceTarget {
    Fig2,
    Fig3,
    Fig6,
    Fig8,
    Fig9,
    Fig11,
    Table3,
}

impl std::str::FromStr for ReproduceTarget {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "fig2" => Self::Fig2,
            "fig3" => Self::Fig3,
            "fig6" => Self::Fig6,
            "fig8" => Self::Fig8,
            "fig9" => Self::Fig9,
            "fig11" => Self::Fig11,
            "table3" => Self::Table3,
            other => return Err(Error::Config(format!("unknown reproduce target '{other}'"))),
        })
    }
}

pub struct ReproduceReport {
    pub artifacts: Vec<PathBuf>,
    /// (check name, value, pass) rows for pinned quantities.
    pub checks: Vec<(String, f64, bool)>,
}

impl ReproduceReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.2)
    }
}

/// Generate the dataset behind a figure/table, asserting its pinned values.
pub fn run_reproduce(cfg: &RunConfig, target: ReproduceTarget) -> Result<ReproduceReport> {
    let mut artifacts = Vec::new();
    let mut checks = Vec::new();
    match target {
        ReproduceTarget::Fig2 => {
            let dir = cfg.resolved_out_dir();
            let mut rows = Vec::new();
            for p in [Preset::PS1, Preset::PS2, Preset::PS3] {
                let r = cz_fidelity(p, cfg.cz_cutoff, &cfg.ode_options())?;
                for (rail, est, nps) in
                    [("single", r.sr, r.sr_nps), ("dual", r.dr, r.dr_nps)]
                {
                    rows.push(vec![
                        p.to_string(),
                        rail.into(),
                        fmt(est.epsilon),
                        fmt(nps.epsilon),
                        fmt(1.0 - est.p_success),
                    ]);
                }
            }
            let path = dir.join("fig2_cz_infidelity.csv");
            write_csv(
                &path,
                cfg,
                &[],
                &["preset", "rail", "epsilon_ps", "epsilon_nps", "flag_prob"],
                &rows,
            )?;
            artifacts.push(path);
        }
        ReproduceTarget::Fig3 | ReproduceTarget::Fig6 => {
            let family = if target == ReproduceTarget::Fig3 { Family::Cswap } else { Family::Gue };
            let dir = cfg.resolved_out_dir();
            let mut rows = Vec::new();
            let presets = match family {
                Family::Cswap => vec![Preset::PS1, Preset::PS2, Preset::PS3],
                Family::Gue => vec![Preset::PS1, Preset::PS2],
            };
            for p in presets {
                for rail in [Rail::Single, Rail::Dual] {
                    let mut sub = cfg.clone();
                    sub.preset = p.to_string();
                    sub.rail = rail.to_string();
                    let inputs = compute_step_inputs(&sub, family, rail)?;
                    for row in query::architecture_comparison(family, rail, p, &inputs, 2..=12)? {
                        rows.push(vec![
                            row.family.to_string(),
                            row.rail.to_string(),
                            row.preset.to_string(),
                            row.n.to_string(),
                            fmt(row.epsilon),
                            fmt(row.infidelity_bound),
                            fmt(row.epsilon_nps),
                            fmt(row.infidelity_bound_nps),
                            fmt(row.flag_prob),
                            fmt(row.gamma_success_khz),
                        ]);
                    }
                }
            }
            let path = dir.join(format!(
                "{}_query_metrics.csv",
                if family == Family::Cswap { "fig3" } else { "fig6" }
            ));
            write_csv(
                &path,
                cfg,
                &[],
                &[
                    "family",
                    "rail",
                    "preset",
                    "n",
                    "epsilon",
                    "infidelity_bound",
                    "epsilon_nps",
                    "infidelity_bound_nps",
                    "flag_prob",
                    "gamma_success_khz",
                ],
                &rows,
            )?;
            artifacts.push(path);
        }
        ReproduceTarget::Fig8 => {
            let expected: Vec<(SweepParameter, Rail, f64, f64, Option<f64>)> = vec![
                (SweepParameter::T1TransmonGe, Rail::Single, -2.0, 0.15, Some(-1.0)),
                (SweepParameter::TphiTransmonEe, Rail::Single, -2.0, 0.15, Some(-1.0)),
                (SweepParameter::T1Cavity, Rail::Single, -1.0, 0.1, None),
                (SweepParameter::TphiCavity, Rail::Single, -1.0, 0.1, None),
                (SweepParameter::T1Cavity, Rail::Dual, -2.0, 0.15, Some(-1.0)),
                (SweepParameter::TphiCavity, Rail::Dual, -1.0, 0.1, None),
            ];
            for (param, rail, slope_expect, tol, flag_expect) in expected {
                let mut sub = cfg.clone();
                sub.rail = rail.to_string();
                let (_, slope_eps, slope_flag, path) = run_sweep(&sub, param)?;
                artifacts.push(path);
                checks.push((
                    format!("{} {} slope", param.label(), rail),
                    slope_eps,
                    (slope_eps - slope_expect).abs() <= tol,
                ));
                if let Some(fe) = flag_expect {
                    checks.push((
                        format!("{} {} flag slope", param.label(), rail),
                        slope_flag,
                        (slope_flag - fe).abs() <= 0.1,
                    ));
                }
            }
        }
        ReproduceTarget::Fig9 => {
            let (p_at, path) = run_io_analysis(cfg, 20e6, 2e6)?;
            artifacts.push(path);
            checks.push(("p_refl at 10% asymmetry".into(), p_at, (p_at - 7.2e-6).abs() <= 0.1 * 7.2e-6));
        }
        ReproduceTarget::Fig11 => {
            // state-transfer infidelity vs each coherence time (others
            // disabled), single and dual rail
            let dir = cfg.resolved_out_dir();
            let opts = cfg.ode_options();
            let mut rows = Vec::new();
            let grids: Vec<(&str, Vec<f64>)> = vec![
                ("t1_cavity", czfid::log_space(100.0, 10_000.0, 4)),
                ("tphi_cavity", czfid::log_space(100.0, 10_000.0, 4)),
                ("t1_transfer_nr", czfid::log_space(20.0, 2_000.0, 4)),
                ("tphi_transfer", czfid::log_space(20.0, 2_000.0, 4)),
            ];
            for (name, values) in grids {
                for &v in &values {
                    let mut params = preset(Preset::PS2).ideal();
                    match name {
                        "t1_cavity" => params.t1_cavity = v,
                        "tphi_cavity" => params.tphi_cavity = v,
                        "t1_transfer_nr" => params.t1_transfer_nr = v,
                        _ => params.tphi_transfer = v,
                    }
                    let chain = GueChain::symmetric(3, params.gamma());
                    let pulse = PulsePair::from_params(&params);
                    let ch = gue::transfer_channel(&chain, &pulse, &params, cfg.transfer_cutoff, &opts)?;
                    let sr = ch.single_rail_average();
                    let dr = ch.dual_rail_average();
                    rows.push(vec![
                        name.into(),
                        fmt(v),
                        fmt(1.0 - sr.f_st),
                        fmt(1.0 - dr.f_st),
                        fmt(1.0 - dr.p_st),
                    ]);
                }
            }
            let path = dir.join("fig11_transfer_sweeps.csv");
            write_csv(
                &path,
                cfg,
                &[],
                &["parameter", "value_us", "sr_infidelity", "dr_infidelity_ps", "dr_flag_prob"],
                &rows,
            )?;
            artifacts.push(path);
        }
        ReproduceTarget::Table3 => {
            let dir = cfg.resolved_out_dir();
            let mut rows = Vec::new();
            for p in [Preset::PS1, Preset::PS2] {
                let mut sub = cfg.clone();
                sub.preset = p.to_string();
                let params = sub.parameters()?;
                let chain = GueChain::symmetric(3, params.gamma());
                let pulse = PulsePair::from_params(&params);
                let ch = gue::transfer_channel(
                    &chain,
                    &pulse,
                    &params,
                    cfg.transfer_cutoff,
                    &cfg.ode_options(),
                )?;
                let sr = ch.single_rail_average();
                let dr = ch.dual_rail_average();
                let (sr_pin, dr_pin, flag_pin) = match p {
                    Preset::PS1 => (1.6e-3, 8.3e-5, 2.8e-3),
                    _ => (3.3e-4, 4.0e-6, 6.1e-4),
                };
                let sr_val = 1.0 - sr.f_st;
                let dr_val = 1.0 - dr.f_st;
                let flag_val = 1.0 - dr.p_st;
                let sr_ok = (sr_val - sr_pin).abs() <= 0.3 * sr_pin;
                let dr_ok = dr_val >= dr_pin / 2.0 && dr_val <= dr_pin * 2.0;
                let flag_ok = (flag_val - flag_pin).abs() <= 0.3 * flag_pin;
                checks.push((format!("{p} SR 1-F_st"), sr_val, sr_ok));
                checks.push((format!("{p} DR 1-F_st (ps)"), dr_val, dr_ok));
                checks.push((format!("{p} DR 1-P_st"), flag_val, flag_ok));
                rows.push(vec![
                    p.to_string(),
                    fmt(sr_val),
                    fmt(dr_val),
                    fmt(flag_val),
                    format!("{}", sr_ok && dr_ok && flag_ok),
                ]);
            }
            let path = dir.join("table3_state_transfer.csv");
            write_csv(
                &path,
                cfg,
                &[],
                &["preset", "sr_infidelity", "dr_infidelity_ps", "dr_flag_prob", "pass"],
                &rows,
            )?;
            artifacts.push(path);
        }
    }
    Ok(ReproduceReport { artifacts, checks })
}
