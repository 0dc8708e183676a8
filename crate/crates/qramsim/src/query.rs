//! Closed-form resource counts, query-infidelity bounds, and success-rate
//! metrics for the four architecture variants (CSWAP/GUE x single/dual
//! rail), consuming per-step error probabilities and flag rates from the
//! channel simulations.

use serde::{Deserialize, Serialize};

use crate::czfid::Rail;
use crate::error::{Error, Result};
use crate::noise::ParameterSet;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Family {
    Cswap,
    Gue,
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Family::Cswap => write!(f, "cswap"),
            Family::Gue => write!(f, "gue"),
        }
    }
}

/// Architecture variant under evaluation.
#[derive(Clone, Debug)]
pub struct ArchitectureSpec {
    pub family: Family,
    pub rail: Rail,
    /// Address-qubit count, n >= 2.
    pub n: u32,
    pub params: ParameterSet,
}

/// Hardware and schedule counts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Resources {
    pub n_cav: u64,
    pub n_gates: u64,
    pub n_ts: u64,
}

/// Per-query metrics.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct QueryMetrics {
    pub n_cav: u64,
    pub n_gates: u64,
    pub n_ts: u64,
    /// Wall-clock query time (us).
    pub t_query: f64,
    /// Error probability per time step.
    pub epsilon: f64,
    /// Query infidelity bound (capped at 1).
    pub infidelity_bound: f64,
    /// Probability that no gate flags an error over the whole query.
    pub p_no_flag: f64,
    /// Expected time to a successful query (us).
    pub t_success: f64,
    /// Success rate (MHz = 1/us).
    pub gamma_success: f64,
    /// Bound constant.
    pub a: f64,
}

/// Cavity/gate/timestep counts for one architecture at `n` address bits.
pub fn resources(family: Family, rail: Rail, n: u32) -> Result<Resources> {
    if n < 2 {
        return Err(Error::Config(format!("n = {n} < 2 address bits")));
    }
    let nn = 1u64 << n;
    let n64 = n as u64;
    let (sr_cav, n_gates, n_ts) = match family {
        Family::Cswap => (
            5 * nn / 2 + n64 - 3,
            7 * nn - 4 * n64 - 8,
            if n == 2 { 10 } else { 12 * n64 - 14 },
        ),
        Family::Gue => (3 * nn + n64 - 2, 4 * nn - 2 * n64 - 4, 6 * n64 - 6),
    };
    let n_cav = match rail {
        Rail::Single => sr_cav,
        Rail::Dual => 2 * sr_cav,
    };
    Ok(Resources { n_cav, n_gates, n_ts })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RouterModel {
    TwoLevel,
    ThreeLevel,
}

/// Query-infidelity bound `A eps N_ts log2(N) [1 + log2(N)]` (two-level
/// routers; the three-level variant drops the bracket), capped at 1.
pub fn infidelity_bound(
    epsilon: f64,
    n_ts: u64,
    n: u32,
    router_model: RouterModel,
    a: f64,
) -> f64 {
    let log2n = n as f64;
    let factor = match router_model {
        RouterModel::TwoLevel => log2n * (1.0 + log2n),
        RouterModel::ThreeLevel => log2n,
    };
    (a * epsilon * n_ts as f64 * factor).min(1.0)
}

/// Wall-clock duration of one timestep (us): the CZ gate time, plus the
/// state-transfer window for the GUE architecture.
pub fn timestep_duration(family: Family, params: &ParameterSet) -> f64 {
    match family {
        Family::Cswap => params.t_cz(),
        Family::Gue => params.t_cz() + 8.0 / params.xi(),
    }
}

/// Fill the per-query metrics given the per-step error probability and the
/// per-step keep probability (`P_CZ` for CSWAP, `P_CZ * P_st` for GUE).
pub fn success_metrics(spec: &ArchitectureSpec, epsilon: f64, p_step: f64) -> Result<QueryMetrics> {
    let res = resources(spec.family, spec.rail, spec.n)?;
    let t_step = timestep_duration(spec.family, &spec.params);
    let t_query = t_step * res.n_ts as f64;
    let p_no_flag = p_step.powi(res.n_gates as i32);
    let bound = infidelity_bound(epsilon, res.n_ts, spec.n, RouterModel::TwoLevel, 4.0);
    let t_success = t_query / p_no_flag;
    Ok(QueryMetrics {
        n_cav: res.n_cav,
        n_gates: res.n_gates,
        n_ts: res.n_ts,
        t_query,
        epsilon,
        infidelity_bound: bound,
        p_no_flag,
        t_success,
        gamma_success: 1.0 / t_success,
        a: 4.0,
    })
}

/// One row of the architecture comparison table.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub family: Family,
    pub rail: Rail,
    pub preset: crate::noise::Preset,
    pub n: u32,
    pub epsilon: f64,
    pub infidelity_bound: f64,
    pub epsilon_nps: f64,
    pub infidelity_bound_nps: f64,
    pub flag_prob: f64,
    pub gamma_success_khz: f64,
}

/// Channel-level inputs per (family, rail, preset), produced by the czfid
/// and gue pipelines.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct StepInputs {
    /// Post-selected per-step error probability.
    pub epsilon: f64,
    /// Non-post-selected per-step error probability.
    pub epsilon_nps: f64,
    /// Per-step keep probability.
    pub p_step: f64,
}

/// Combine a CZ gate estimate with a state-transfer outcome into the GUE
/// per-step quantities: `eps = 1 - F_g(CZ) F_st`, `p = P_CZ P_st`.
pub fn gue_step_inputs(
    cz: &crate::czfid::ChannelEstimate,
    cz_nps: &crate::czfid::ChannelEstimate,
    st: &crate::gue::TransferOutcome,
    st_nps_fidelity: f64,
) -> StepInputs {
    StepInputs {
        epsilon: 1.0 - cz.f_g * st.f_st,
        epsilon_nps: 1.0 - cz_nps.f_g * st_nps_fidelity,
        p_step: cz.p_success * st.p_st,
    }
}

/// Emit comparison rows over a range of n for one architecture/preset, given
/// the per-step inputs.
pub fn architecture_comparison(
    family: Family,
    rail: Rail,
    preset: crate::noise::Preset,
    inputs: &StepInputs,
    n_range: impl IntoIterator<Item = u32>,
) -> Result<Vec<ComparisonRow>> {
    let params = crate::noise::preset(preset);
    let mut rows = Vec::new();
    for n in n_range {
        let spec = ArchitectureSpec { family, rail, n, params: params.clone() };
        let m = success_metrics(&spec, inputs.epsilon, inputs.p_step)?;
        let bound_nps =
            infidelity_bound(inputs.epsilon_nps, m.n_ts, n, RouterModel::TwoLevel, 4.0);
        rows.push(ComparisonRow {
            family,
            rail,
            preset,
            n,
            epsilon: inputs.epsilon,
            infidelity_bound: m.infidelity_bound,
            epsilon_nps: inputs.epsilon_nps,
            infidelity_bound_nps: bound_nps,
            flag_prob: 1.0 - m.p_no_flag,
            gamma_success_khz: m.gamma_success * 1e3,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{preset, Preset};
    use approx::assert_abs_diff_eq;

    #[test]
    fn resource_formulas_pinned_values() {
        // CSWAP: N_ts(2) = 10; n = 12 gives 130 timesteps = 130 us at 1 us/CZ
        let r = resources(Family::Cswap, Rail::Single, 2).unwrap();
        assert_eq!((r.n_cav, r.n_gates, r.n_ts), (9, 12, 10));
        let r3 = resources(Family::Cswap, Rail::Single, 3).unwrap();
        assert_eq!((r3.n_cav, r3.n_gates, r3.n_ts), (20, 36, 22));
        let r12 = resources(Family::Cswap, Rail::Single, 12).unwrap();
        assert_eq!(r12.n_ts, 130);
        let p = preset(Preset::PS2);
        assert_abs_diff_eq!(timestep_duration(Family::Cswap, &p) * r12.n_ts as f64, 130.0, epsilon = 1e-9);
        // GUE at n = 3
        let g3 = resources(Family::Gue, Rail::Single, 3).unwrap();
        assert_eq!((g3.n_cav, g3.n_gates, g3.n_ts), (25, 22, 12));
        // dual rail doubles cavities only
        let d3 = resources(Family::Gue, Rail::Dual, 3).unwrap();
        assert_eq!((d3.n_cav, d3.n_gates, d3.n_ts), (50, 22, 12));
        // n < 2 rejected
        assert!(resources(Family::Cswap, Rail::Single, 1).is_err());
    }

    #[test]
    fn expanded_timestep_formula_consistency() {
        // 4(1 + 2 + 3(n-3) + 2) + 2 = 12 log2 N - 14 for n >= 3
        for n in 3..=12u32 {
            let expanded = 4 * (1 + 2 + 3 * (n as i64 - 3) + 2) + 2;
            let collapsed = 12 * n as i64 - 14;
            assert_eq!(expanded, collapsed);
            assert_eq!(resources(Family::Cswap, Rail::Single, n).unwrap().n_ts, collapsed as u64);
        }
    }

    #[test]
    fn bound_properties() {
        assert_eq!(infidelity_bound(0.0, 10, 4, RouterModel::TwoLevel, 4.0), 0.0);
        // two-level / three-level ratio = 1 + log2 N
        let b2 = infidelity_bound(1e-4, 34, 4, RouterModel::TwoLevel, 4.0);
        let b3 = infidelity_bound(1e-4, 34, 4, RouterModel::ThreeLevel, 4.0);
        assert_abs_diff_eq!(b2 / b3, 5.0, epsilon = 1e-12);
        // cap at 1
        assert_eq!(infidelity_bound(0.5, 100, 9, RouterModel::TwoLevel, 4.0), 1.0);
        // monotone in n for fixed eps
        let mut prev = 0.0;
        for n in 2..=12 {
            let r = resources(Family::Cswap, Rail::Single, n).unwrap();
            let b = infidelity_bound(1e-6, r.n_ts, n, RouterModel::TwoLevel, 4.0);
            assert!(b >= prev);
            prev = b;
        }
    }

    #[test]
    fn finite_size_crossover_below_n9() {
        // N_gates < 4 N_ts log2(N)(1 + log2(N)) for n <= 9
        for n in 2..=9u32 {
            let r = resources(Family::Cswap, Rail::Single, n).unwrap();
            let rhs = 4.0 * r.n_ts as f64 * n as f64 * (1.0 + n as f64);
            assert!(
                (r.n_gates as f64) < rhs,
                "n = {n}: N_gates {} !< {rhs}",
                r.n_gates
            );
        }
    }

    #[test]
    fn success_metrics_identities() {
        let spec = ArchitectureSpec {
            family: Family::Cswap,
            rail: Rail::Single,
            n: 4,
            params: preset(Preset::PS2),
        };
        let m = success_metrics(&spec, 3e-5, 0.9967).unwrap();
        assert_abs_diff_eq!(m.gamma_success * m.t_success, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.t_query, 34.0, epsilon = 1e-9);
        assert_abs_diff_eq!(m.p_no_flag, 0.9967f64.powi(88), epsilon = 1e-12);
        // flag probability is nondecreasing in n at fixed inputs
        let mut prev = 0.0;
        for n in 2..=12 {
            let spec = ArchitectureSpec {
                family: Family::Cswap,
                rail: Rail::Single,
                n,
                params: preset(Preset::PS2),
            };
            let m = success_metrics(&spec, 3e-5, 0.9967).unwrap();
            let flag = 1.0 - m.p_no_flag;
            assert!(flag >= prev);
            prev = flag;
        }
    }
}
