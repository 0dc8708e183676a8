//! Cross-validation of the channel machinery against independent routes:
//! the tensored single-rail CZ superoperator against a direct joint
//! simulation, Choi-level complete positivity, the Choi-based entanglement
//! fidelity against the ensemble pipeline, monotonicity across presets, and
//! integrator-tolerance robustness.

use ndarray::Array2;
use num_complex::Complex64 as C64;

use qramsim::czfid::{
    cz_fidelity, cz_mode_basis, extract_cz_channel, nielsen_post_selected_fidelity,
    MeasurementModel, SingleRailCz,
};
use qramsim::fock::{build_basis, tensor_superoperators, DenseSuperOp, SuperOperator};
use qramsim::gates::JP_BEAMSPLITTER_AMPLITUDE_OVER_CHI;
use qramsim::linalg::{min_eigenvalue, CsrMatrix, OdeOptions};
use qramsim::noise::{evolve_schedule, preset, CollapseSet, Preset};

fn opts() -> OdeOptions {
    OdeOptions::default()
}

/// Parameters used by the joint cross-check: PS1 coherence times without
/// thermal heating, so both sides truncate identically.
fn cross_check_params() -> qramsim::noise::ParameterSet {
    let mut p = preset(Preset::PS1);
    p.n_th = 0.0;
    p
}

/// Tensoring two flagged single-rail CZ superoperators and applying them to
/// |10><10| (x) |10><10| agrees with a direct joint simulation of four
/// cavities and two transmons (encoded as 3-level modes) at loose tolerance.
#[test]
fn tensored_channels_match_direct_joint_simulation() {
    let params = cross_check_params();
    let mm = MeasurementModel::default();

    // single-rail flagged channel as a full superoperator (cutoff 2)
    let (sup, _) = qramsim::czfid::cz_flagged_superoperator(&params, &mm, 2, &opts()).unwrap();
    let dense = match &sup {
        SuperOperator::Dense(d) => d.clone(),
        _ => unreachable!(),
    };
    let modes = cz_mode_basis(2);
    let dm = modes.dim();

    // tensored application to |10><10| (x) |10><10|
    let tensored = tensor_superoperators(
        SuperOperator::Dense(dense.clone()),
        SuperOperator::Dense(dense),
        false,
    );
    let i10 = modes.index_of_modes(&[1, 0]);
    let mut rho_in = Array2::<C64>::zeros((dm * dm, dm * dm));
    rho_in[(i10 * dm + i10, i10 * dm + i10)] = C64::new(1.0, 0.0);
    let rho_tensor = tensored.apply(&rho_in);

    // direct joint simulation: modes [a1, b1, a2, b2, t1, t2] where the
    // final two 3-level modes encode the transmons (0, 1, 2) = (g, e, f);
    // two photons plus two ancillas at f never exceed six total excitations
    let joint = build_basis(6, 2, Some(6), 0).unwrap();
    let jd = joint.dim();
    let diag_op = |f: &dyn Fn(&[u8]) -> C64| -> CsrMatrix {
        let d: Vec<C64> = joint.states().iter().map(|o| f(&o.modes)).collect();
        CsrMatrix::diagonal(&d)
    };
    let ladder = |mode: usize, from: u8, to: u8| -> CsrMatrix {
        let mut t = Vec::new();
        for (i, occ) in joint.states().iter().enumerate() {
            if occ.modes[mode] == from {
                let mut m = occ.modes.clone();
                m[mode] = to;
                let j = joint
                    .index_of(&qramsim::fock::Occupation { ancilla: 0, modes: m })
                    .unwrap();
                t.push((j, i, C64::new(1.0, 0.0)));
            }
        }
        CsrMatrix::from_triplets(jd, jd, t)
    };

    let chi = params.chi();
    let g_bs = JP_BEAMSPLITTER_AMPLITUDE_OVER_CHI * chi;
    let pairs = [(0usize, 1usize, 4usize), (2, 3, 5)]; // (cavity a, cavity b, transmon)

    // joint JP Hamiltonian: both pairs evolve in parallel
    let mut h_jp = CsrMatrix::zeros(jd, jd);
    for &(a, b, t) in &pairs {
        let sz = diag_op(&|m: &[u8]| {
            let v = match m[t] {
                0 => 1.0,
                2 => -1.0,
                _ => 0.0,
            };
            C64::new(v * m[a] as f64 * chi / 2.0, 0.0)
        });
        let hop = {
            let am = qramsim::fock::mode_operator(&joint, a, qramsim::fock::ModeOp::Annihilate)
                .unwrap()
                .matrix;
            let bm = qramsim::fock::mode_operator(&joint, b, qramsim::fock::ModeOp::Annihilate)
                .unwrap()
                .matrix;
            let x = am.dagger().matmul(&bm).scale(C64::new(g_bs, 0.0));
            x.add(&x.dagger())
        };
        h_jp = h_jp.add(&sz).add(&hop);
    }
    // ancilla rotations and frame corrections, mirroring the pulse schedule
    let rot = |axis: char, angle: f64, t: usize| -> CsrMatrix {
        // exp(-i angle/2 sigma) in the (0, 2) manifold of mode t
        let c = C64::new((angle / 2.0).cos(), 0.0);
        let ms = C64::new(0.0, -(angle / 2.0).sin());
        let mut tr = Vec::new();
        for (i, occ) in joint.states().iter().enumerate() {
            match occ.modes[t] {
                1 => tr.push((i, i, C64::new(1.0, 0.0))),
                lv => {
                    tr.push((i, i, c));
                    let other = if lv == 0 { 2 } else { 0 };
                    let mut m = occ.modes.clone();
                    m[t] = other;
                    let j = joint
                        .index_of(&qramsim::fock::Occupation { ancilla: 0, modes: m })
                        .unwrap();
                    let elem = match axis {
                        'x' => ms,
                        _ => {
                            // sigma_y = -i|g><f| + i|f><g|
                            if lv == 2 {
                                ms * C64::new(0.0, 1.0)
                            } else {
                                ms * C64::new(0.0, -1.0)
                            }
                        }
                    };
                    tr.push((j, i, elem));
                }
            }
        }
        CsrMatrix::from_triplets(jd, jd, tr)
    };
    let frame_jp = diag_op(&|m: &[u8]| {
        let n = (m[0] + m[1] + m[2] + m[3]) as f64;
        C64::from_polar(1.0, -std::f64::consts::FRAC_PI_2 * n)
    });
    let frame_final = diag_op(&|m: &[u8]| {
        let n = (m[0] + m[1] + m[2] + m[3]) as f64;
        C64::from_polar(1.0, std::f64::consts::FRAC_PI_2 - std::f64::consts::FRAC_PI_2 * n)
    });
    let both = |f: &dyn Fn(usize) -> CsrMatrix| -> CsrMatrix { f(4).matmul(&f(5)) };
    let ry_m = both(&|t| rot('y', std::f64::consts::FRAC_PI_2, t));
    let ry_p = both(&|t| rot('y', -std::f64::consts::FRAC_PI_2, t));
    let rx = both(&|t| rot('x', std::f64::consts::FRAC_PI_2, t));

    use qramsim::gates::{GateSchedule, Segment};
    let schedule = GateSchedule {
        basis: joint.clone(),
        segments: vec![
            Segment::Instant { unitary: ry_m },
            Segment::Evolve { hamiltonian: h_jp.clone(), duration: 2.0 * std::f64::consts::PI / chi },
            Segment::Instant { unitary: frame_jp.clone() },
            Segment::Instant { unitary: rx },
            Segment::Evolve { hamiltonian: h_jp, duration: 2.0 * std::f64::consts::PI / chi },
            Segment::Instant { unitary: frame_jp },
            Segment::Instant { unitary: ry_p },
            Segment::Instant { unitary: frame_final },
        ],
    };

    // collapse set: cavity decay/dephasing plus the transmon ladder
    let mut collapses = CollapseSet::default();
    for cav in 0..4usize {
        let a = qramsim::fock::mode_operator(&joint, cav, qramsim::fock::ModeOp::Annihilate)
            .unwrap()
            .matrix;
        let n = qramsim::fock::mode_operator(&joint, cav, qramsim::fock::ModeOp::Number)
            .unwrap()
            .matrix;
        collapses.push(a, 1.0 / params.t1_cavity);
        collapses.push(n, 1.0 / params.tphi_cavity);
    }
    for &t in &[4usize, 5] {
        collapses.push(ladder(t, 1, 0), 1.0 / params.t1_transmon_ge);
        collapses.push(ladder(t, 2, 1), 2.0 / params.t1_transmon_ge);
        collapses.push(ladder(t, 1, 1), 1.0 / params.tphi_transmon_ee);
        collapses.push(ladder(t, 2, 2), 4.0 / params.tphi_transmon_ee);
    }

    // initial |1 0 1 0> with both transmons in g
    let mut occ0 = vec![0u8; 6];
    occ0[0] = 1;
    occ0[2] = 1;
    let idx0 = joint.index_of_modes(&occ0);
    let mut rho0 = Array2::<C64>::zeros((jd, jd));
    rho0[(idx0, idx0)] = C64::new(1.0, 0.0);
    let loose = OdeOptions { rtol: 1e-7, atol: 1e-9, ..Default::default() };
    let rho_f = evolve_schedule(&schedule, &collapses, &rho0, &loose).unwrap();

    // flag both transmons and trace them out
    let mg = diag_op(&|m: &[u8]| {
        let eta = |lv: u8| match lv {
            0 => (1.0f64 - 1e-4).sqrt(),
            1 => 0.01f64.sqrt(),
            _ => 1e-4f64.sqrt(),
        };
        C64::new(eta(m[4]) * eta(m[5]), 0.0)
    });
    let m_rho = mg.mul_dense(&rho_f);
    let flagged = mg.dagger().mul_dense_left(&m_rho);
    let red = qramsim::fock::partial_trace(
        &qramsim::fock::DensityOperator { basis: joint.clone(), matrix: flagged },
        &[0, 1, 2, 3],
        false,
    )
    .unwrap();

    // the direct basis orders modes (a1, b1, a2, b2): identical to the
    // tensored (pair1) (x) (pair2) indexing, so compare elementwise after
    // re-indexing occupations
    let mut worst = 0.0f64;
    for (i, oi) in red.basis.states().iter().enumerate() {
        let ti = modes.index_of_modes(&oi.modes[0..2]) * dm
            + modes.index_of_modes(&oi.modes[2..4]);
        for (j, oj) in red.basis.states().iter().enumerate() {
            let tj = modes.index_of_modes(&oj.modes[0..2]) * dm
                + modes.index_of_modes(&oj.modes[2..4]);
            worst = worst.max((red.matrix[(i, j)] - rho_tensor[(ti, tj)]).norm());
        }
    }
    assert!(worst < 2e-5, "tensor vs direct joint simulation deviates by {worst}");
}

/// The flagged channel is completely positive (Choi eigenvalues bounded
/// below by -1e-9) and trace-non-increasing on the ensemble.
#[test]
fn flagged_channel_is_completely_positive() {
    let params = preset(Preset::PS1);
    let (sup, p_cz) =
        qramsim::czfid::cz_flagged_superoperator(&params, &MeasurementModel::default(), 2, &opts())
            .unwrap();
    let dense = match &sup {
        SuperOperator::Dense(d) => d.clone(),
        _ => unreachable!(),
    };
    let choi = dense.choi();
    let min_eig = min_eigenvalue(&choi);
    assert!(min_eig > -1e-9, "Choi minimum eigenvalue {min_eig}");
    assert!(p_cz > 0.0 && p_cz <= 1.0 + 1e-9, "keep probability {p_cz}");
    // trace non-increase on a few states
    let dm = cz_mode_basis(2).dim();
    for k in 0..4 {
        let mut rho = Array2::<C64>::zeros((dm, dm));
        rho[(k, k)] = C64::new(1.0, 0.0);
        let out = dense.apply(&rho);
        let tr: C64 = out.diag().iter().sum();
        assert!(tr.re <= 1.0 + 1e-9);
    }
}

/// With the identity measurement, the ensemble pipeline reduces to the
/// standard average gate fidelity, cross-checked against the Choi-state
/// overlap route on the computational block.
#[test]
fn identity_measurement_matches_choi_fidelity() {
    let params = preset(Preset::PS1);
    let blocks = extract_cz_channel(&params, &MeasurementModel::identity(), 2, &opts()).unwrap();
    let est = nielsen_post_selected_fidelity(&SingleRailCz { blocks: &blocks }).unwrap();
    assert!((est.p_success - 1.0).abs() < 1e-8, "identity measurement keeps everything");

    // Choi route: F_e = <Phi_U| J |Phi_U> / d^2 with J built from the
    // logical blocks and |Phi_U> = (I (x) U)|Phi>
    let sup = blocks.logical_superop();
    let choi = sup.choi();
    let modes = cz_mode_basis(1);
    let cz = qramsim::gates::cz_unitary(&modes, 0, 1).unwrap().matrix.to_dense();
    let comp = [
        modes.index_of_modes(&[0, 0]),
        modes.index_of_modes(&[0, 1]),
        modes.index_of_modes(&[1, 0]),
        modes.index_of_modes(&[1, 1]),
    ];
    let mut phi = vec![C64::new(0.0, 0.0); 16];
    for k in 0..4 {
        // (|k> (x) U|k>)/2; U diagonal
        phi[k * 4 + k] = cz[(comp[k], comp[k])] / 2.0;
    }
    let mut f_e = C64::new(0.0, 0.0);
    for i in 0..16 {
        for j in 0..16 {
            f_e += phi[i].conj() * choi[(i, j)] * phi[j];
        }
    }
    assert!(
        (f_e.re - est.f_e).abs() < 1e-9,
        "Choi route {} vs ensemble route {}",
        f_e.re,
        est.f_e
    );
}

/// Gate fidelity decreases monotonically as coherence worsens across the
/// preset grid (PS3 better than PS2 better than PS1 for the transmon;
/// cavities equal between PS2 and PS3).
#[test]
fn preset_grid_monotonicity() {
    let r1 = cz_fidelity(Preset::PS1, 2, &opts()).unwrap();
    let r2 = cz_fidelity(Preset::PS2, 2, &opts()).unwrap();
    let r3 = cz_fidelity(Preset::PS3, 2, &opts()).unwrap();
    assert!(r1.sr.f_g < r2.sr.f_g, "PS1 should be worse than PS2");
    assert!(r2.sr.f_g < r3.sr.f_g, "PS2 should be worse than PS3");
    assert!(r1.dr.f_g < r2.dr.f_g);
    assert!(r2.dr.f_g < r3.dr.f_g);
}

/// Halving the integrator tolerances moves the reported infidelity by less
/// than 10% of itself.
#[test]
fn integrator_tolerance_convergence() {
    let params = preset(Preset::PS1);
    let a = extract_cz_channel(&params, &MeasurementModel::default(), 2, &opts()).unwrap();
    let tight = OdeOptions { rtol: 5e-9, atol: 5e-11, ..Default::default() };
    let b = extract_cz_channel(&params, &MeasurementModel::default(), 2, &tight).unwrap();
    let ea = nielsen_post_selected_fidelity(&SingleRailCz { blocks: &a }).unwrap();
    let eb = nielsen_post_selected_fidelity(&SingleRailCz { blocks: &b }).unwrap();
    let rel = (ea.epsilon - eb.epsilon).abs() / ea.epsilon;
    assert!(rel < 0.10, "tolerance halving changed epsilon by {rel:.2e} relative");
}

/// Transfer linearity: superposition fidelities are consistent with the
/// basis-state channels (checked on a cheap single-excitation model).
#[test]
fn transfer_superposition_linearity() {
    use qramsim::gue::{transfer_channel, GueChain, PulsePair};
    let params = preset(Preset::PS2).ideal();
    let chain = GueChain::symmetric(3, params.gamma());
    let pulse = PulsePair::from_params(&params);
    let ch = transfer_channel(&chain, &pulse, &params, 1, &opts()).unwrap();
    let f_vac = ch.single_rail_fidelity(&[C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)]);
    let f_r = ch.single_rail_fidelity(&[C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);
    for c1 in [0.3f64, 0.6, 0.9] {
        let c0 = (1.0 - c1 * c1).sqrt();
        let f = ch.single_rail_fidelity(&[C64::new(c0, 0.0), C64::new(c1, 0.0), C64::new(0.0, 0.0)]);
        // amplitude-level mixing of the two channel outcomes
        let amp = c0 * c0 + c1 * c1 * f_r.sqrt() * f_vac.sqrt();
        let predicted = amp * amp;
        assert!(
            (f - predicted).abs() < 5e-4,
            "superposition fidelity {f} vs linear prediction {predicted}"
        );
    }
}

/// The dense superoperator path and the lazy tensor path agree on a noisy
/// channel applied to an entangled input.
#[test]
fn tensor_path_matches_dense_kron() {
    let dm = 3usize;
    // a small non-unitary test channel: amplitude damping mixed with a phase
    let mut m = Array2::<C64>::zeros((dm * dm, dm * dm));
    for i in 0..dm {
        for j in 0..dm {
            let damp = 0.9f64.powi((i + j) as i32);
            m[(i * dm + j, i * dm + j)] = C64::from_polar(damp, 0.1 * (i as f64 - j as f64));
        }
    }
    m[(0, 1 * dm + 1)] = C64::new(0.19, 0.0); // recycling term
    let e = DenseSuperOp { dim: dm, matrix: m };
    let t = tensor_superoperators(
        SuperOperator::Dense(e.clone()),
        SuperOperator::Dense(e.clone()),
        false,
    );
    // entangled input over the pair
    let mut rho = Array2::<C64>::zeros((dm * dm, dm * dm));
    for (i, j, v) in [
        (0usize, 0usize, C64::new(0.5, 0.0)),
        (4, 4, C64::new(0.5, 0.0)),
        (0, 4, C64::new(0.3, 0.2)),
        (4, 0, C64::new(0.3, -0.2)),
    ] {
        rho[(i, j)] = v;
    }
    let lazy = t.apply(&rho);
    // dense kron of the superoperator matrices with index interleaving
    let mut direct = Array2::<C64>::zeros((dm * dm, dm * dm));
    for i1 in 0..dm {
        for j1 in 0..dm {
            for i2 in 0..dm {
                for j2 in 0..dm {
                    let mut s = C64::new(0.0, 0.0);
                    for k1 in 0..dm {
                        for l1 in 0..dm {
                            for k2 in 0..dm {
                                for l2 in 0..dm {
                                    s += e.matrix[(i1 * dm + j1, k1 * dm + l1)]
                                        * e.matrix[(i2 * dm + j2, k2 * dm + l2)]
                                        * rho[(k1 * dm + k2, l1 * dm + l2)];
                                }
                            }
                        }
                    }
                    direct[(i1 * dm + i2, j1 * dm + j2)] = s;
                }
            }
        }
    }
    let mut worst = 0.0f64;
    for i in 0..dm * dm {
        for j in 0..dm * dm {
            worst = worst.max((lazy[(i, j)] - direct[(i, j)]).norm());
        }
    }
    assert!(worst < 1e-12, "lazy tensor path deviates by {worst}");
}
