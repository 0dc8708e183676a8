//! Truncated multimode bosonic Hilbert spaces with number-conserving basis
//! construction, optionally tensored with a 3-level (g/e/f) transmon ancilla.
//!
//! Basis states are occupation tuples ordered lexicographically over
//! (ancilla level, mode occupations), so indexing is deterministic and golden
//! tests can pin amplitudes. Creation past a cutoff truncates (maps to zero)
//! rather than erroring; convergence is checked by cutoff sweeps.

use std::collections::HashMap;
use std::sync::Arc;

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::linalg::{self, CsrMatrix};

/// One basis state: ancilla level (0 when the basis has no ancilla) plus a
/// photon occupation per mode.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Occupation {
    pub ancilla: u8,
    pub modes: Vec<u8>,
}

impl Occupation {
    pub fn total_photons(&self) -> u32 {
        self.modes.iter().map(|&n| n as u32).sum()
    }
}

/// Truncated Fock basis over `num_modes` bosonic modes with a per-mode photon
/// cutoff (inclusive), an optional global excitation cutoff, and an optional
/// 3-level ancilla.
#[derive(Clone, Debug)]
pub struct FockBasis {
    num_modes: usize,
    per_mode_cutoff: u8,
    global_cutoff: Option<u32>,
    ancilla_levels: u8,
    states: Vec<Occupation>,
    index: HashMap<Occupation, usize>,
}

pub type BasisRef = Arc<FockBasis>;

impl FockBasis {
    /// Enumerate the admissible occupation tuples in lexicographic order.
    pub fn build(
        num_modes: usize,
        per_mode_cutoff: u8,
        global_cutoff: Option<u32>,
        ancilla_levels: u8,
    ) -> Result<BasisRef> {
        if num_modes == 0 {
            return Err(Error::EmptyBasis("num_modes must be >= 1".into()));
        }
        if !(ancilla_levels == 0 || ancilla_levels == 3) {
            return Err(Error::EmptyBasis(format!(
                "ancilla_levels must be 0 or 3, got {ancilla_levels}"
            )));
        }
        let anc_range = if ancilla_levels == 0 { 1 } else { ancilla_levels };
        let mut states = Vec::new();
        for anc in 0..anc_range {
            let mut occ = vec![0u8; num_modes];
            loop {
                states.push(Occupation { ancilla: anc, modes: occ.clone() });
                // odometer increment under both cutoffs, last mode fastest,
                // which together with the outer ancilla loop yields
                // lexicographic order over (ancilla, modes)
                let mut k = num_modes;
                loop {
                    if k == 0 {
                        break;
                    }
                    k -= 1;
                    occ[k] += 1;
                    let total: u32 = occ.iter().map(|&n| n as u32).sum();
                    let ok = occ[k] <= per_mode_cutoff
                        && global_cutoff.map_or(true, |g| total <= g);
                    if ok {
                        break;
                    }
                    occ[k] = 0;
                    if k == 0 {
                        k = usize::MAX;
                        break;
                    }
                }
                if k == usize::MAX {
                    break;
                }
            }
        }
        if states.is_empty() {
            return Err(Error::EmptyBasis("cutoff combination admits no states".into()));
        }
        let index = states
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect::<HashMap<_, _>>();
        if index.len() != states.len() {
            return Err(Error::EmptyBasis("duplicate states in basis".into()));
        }
        Ok(Arc::new(Self {
            num_modes,
            per_mode_cutoff,
            global_cutoff,
            ancilla_levels,
            states,
            index,
        }))
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn num_modes(&self) -> usize {
        self.num_modes
    }

    pub fn per_mode_cutoff(&self) -> u8 {
        self.per_mode_cutoff
    }

    pub fn global_cutoff(&self) -> Option<u32> {
        self.global_cutoff
    }

    pub fn has_ancilla(&self) -> bool {
        self.ancilla_levels == 3
    }

    pub fn states(&self) -> &[Occupation] {
        &self.states
    }

    pub fn state(&self, i: usize) -> &Occupation {
        &self.states[i]
    }

    pub fn index_of(&self, occ: &Occupation) -> Option<usize> {
        self.index.get(occ).copied()
    }

    /// Index of the basis state with the given mode occupations (ancilla in
    /// the ground state). Panics if the state is outside the basis.
    pub fn index_of_modes(&self, modes: &[u8]) -> usize {
        self.index_of(&Occupation { ancilla: 0, modes: modes.to_vec() })
            .expect("state outside basis")
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.num_modes {
            return Err(Error::ModeIndex { index: mode, num_modes: self.num_modes });
        }
        Ok(())
    }
}

/// Kinds of single-mode operators.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModeOp {
    Annihilate,
    Create,
    Number,
}

/// Kinds of ancilla operators on the g/e/f transmon. Pauli-style operators
/// act in the g/f computational manifold and vanish on |e>.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AncillaOp {
    /// |g><g| - |f><f|
    SigmaZGf,
    /// |g><e|
    LowerGe,
    /// |e><f|
    LowerEf,
    ProjG,
    ProjE,
    ProjF,
    /// (|g> + |f>)(<g| + ...)/sqrt(2) Hadamard in the g/f manifold
    HadamardGf,
    /// exp(-i * angle/2 * sigma_axis) in the g/f manifold, identity on |e>
    Rotation(RotationAxis, f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RotationAxis {
    X,
    Y,
    Z,
}

/// Sparse operator tied to a basis.
#[derive(Clone, Debug)]
pub struct LinearOperator {
    pub basis: BasisRef,
    pub matrix: CsrMatrix,
}

impl LinearOperator {
    pub fn new(basis: BasisRef, matrix: CsrMatrix) -> Self {
        assert_eq!(matrix.nrows(), basis.dim());
        assert_eq!(matrix.ncols(), basis.dim());
        Self { basis, matrix }
    }

    pub fn identity(basis: BasisRef) -> Self {
        let n = basis.dim();
        Self { basis, matrix: CsrMatrix::identity(n) }
    }

    pub fn dagger(&self) -> Self {
        Self { basis: self.basis.clone(), matrix: self.matrix.dagger() }
    }

    pub fn matmul(&self, other: &Self) -> Self {
        Self { basis: self.basis.clone(), matrix: self.matrix.matmul(&other.matrix) }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self { basis: self.basis.clone(), matrix: self.matrix.add(&other.matrix) }
    }

    pub fn scale(&self, s: C64) -> Self {
        Self { basis: self.basis.clone(), matrix: self.matrix.scale(s) }
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.matrix.is_hermitian(tol)
    }

    /// `max |U†U - I|`.
    pub fn unitarity_defect(&self) -> f64 {
        self.matrix.dagger().matmul(&self.matrix).max_abs_deviation_from_identity()
    }

    pub fn apply(&self, state: &PureState) -> PureState {
        PureState { basis: self.basis.clone(), amplitudes: self.matrix.matvec(&state.amplitudes) }
    }

    /// `U rho U†`.
    pub fn conjugate(&self, rho: &Array2<C64>) -> Array2<C64> {
        let urho = self.matrix.mul_dense(rho);
        self.matrix.dagger().mul_dense_left(&urho)
    }
}

/// Dense complex amplitude vector over a basis.
#[derive(Clone, Debug)]
pub struct PureState {
    pub basis: BasisRef,
    pub amplitudes: Array1<C64>,
}

impl PureState {
    pub fn zero(basis: BasisRef) -> Self {
        let n = basis.dim();
        Self { basis, amplitudes: Array1::zeros(n) }
    }

    /// Basis state with the given mode occupations and ancilla level.
    pub fn basis_state(basis: BasisRef, modes: &[u8], ancilla: u8) -> Self {
        let idx = basis
            .index_of(&Occupation { ancilla, modes: modes.to_vec() })
            .expect("state outside basis");
        let mut st = Self::zero(basis);
        st.amplitudes[idx] = C64::new(1.0, 0.0);
        st
    }

    pub fn from_components(basis: BasisRef, comps: &[(Occupation, C64)]) -> Self {
        let mut st = Self::zero(basis);
        for (occ, amp) in comps {
            let idx = st.basis.index_of(occ).expect("state outside basis");
            st.amplitudes[idx] += *amp;
        }
        st
    }

    pub fn norm(&self) -> f64 {
        linalg::vec_norm(&self.amplitudes)
    }

    pub fn normalized(mut self) -> Self {
        let n = self.norm();
        if n > 0.0 {
            self.amplitudes.mapv_inplace(|v| v / n);
        }
        self
    }

    pub fn inner(&self, other: &Self) -> C64 {
        linalg::inner(&self.amplitudes, &other.amplitudes)
    }

    pub fn to_density(&self) -> DensityOperator {
        let n = self.amplitudes.len();
        let mut rho = Array2::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                rho[(i, j)] = self.amplitudes[i] * self.amplitudes[j].conj();
            }
        }
        DensityOperator { basis: self.basis.clone(), matrix: rho }
    }
}

/// Dense density operator over a basis.
#[derive(Clone, Debug)]
pub struct DensityOperator {
    pub basis: BasisRef,
    pub matrix: Array2<C64>,
}

impl DensityOperator {
    pub fn trace(&self) -> C64 {
        self.matrix.diag().iter().sum()
    }

    pub fn hermiticity_defect(&self) -> f64 {
        let mut m = 0.0f64;
        for i in 0..self.matrix.nrows() {
            for j in i..self.matrix.ncols() {
                m = m.max((self.matrix[(i, j)] - self.matrix[(j, i)].conj()).norm());
            }
        }
        m
    }

    pub fn min_eigenvalue(&self) -> f64 {
        linalg::min_eigenvalue(&self.matrix)
    }

    /// Expectation value of a sparse operator.
    pub fn expect(&self, op: &CsrMatrix) -> C64 {
        let prod = op.mul_dense(&self.matrix);
        prod.diag().iter().sum()
    }
}

/// Build a truncated Fock basis. See [`FockBasis::build`].
pub fn build_basis(
    num_modes: usize,
    per_mode_cutoff: u8,
    global_cutoff: Option<u32>,
    ancilla_levels: u8,
) -> Result<BasisRef> {
    FockBasis::build(num_modes, per_mode_cutoff, global_cutoff, ancilla_levels)
}

/// Ladder/number operator on one mode, identity elsewhere. Creation that
/// would exceed either cutoff truncates the amplitude to zero.
pub fn mode_operator(basis: &BasisRef, mode: usize, kind: ModeOp) -> Result<LinearOperator> {
    basis.check_mode(mode)?;
    let mut triplets = Vec::new();
    for (i, occ) in basis.states().iter().enumerate() {
        let n = occ.modes[mode];
        match kind {
            ModeOp::Number => {
                if n > 0 {
                    triplets.push((i, i, C64::new(n as f64, 0.0)));
                }
            }
            ModeOp::Annihilate => {
                if n > 0 {
                    let mut tgt = occ.clone();
                    tgt.modes[mode] = n - 1;
                    let j = basis.index_of(&tgt).expect("lowering stays in basis");
                    triplets.push((j, i, C64::new((n as f64).sqrt(), 0.0)));
                }
            }
            ModeOp::Create => {
                let mut tgt = occ.clone();
                tgt.modes[mode] = n + 1;
                if let Some(j) = basis.index_of(&tgt) {
                    triplets.push((j, i, C64::new((n as f64 + 1.0).sqrt(), 0.0)));
                }
            }
        }
    }
    Ok(LinearOperator::new(basis.clone(), CsrMatrix::from_triplets(basis.dim(), basis.dim(), triplets)))
}

/// Ancilla operator acting as identity on the mode sector.
pub fn ancilla_operator(basis: &BasisRef, kind: AncillaOp) -> Result<LinearOperator> {
    if !basis.has_ancilla() {
        return Err(Error::MissingAncilla);
    }
    // 3x3 single-ancilla matrix in the (g, e, f) = (0, 1, 2) ordering
    let mut m = [[C64::zero(); 3]; 3];
    let s = std::f64::consts::FRAC_1_SQRT_2;
    match kind {
        AncillaOp::SigmaZGf => {
            m[0][0] = C64::new(1.0, 0.0);
            m[2][2] = C64::new(-1.0, 0.0);
        }
        AncillaOp::LowerGe => m[0][1] = C64::new(1.0, 0.0),
        AncillaOp::LowerEf => m[1][2] = C64::new(1.0, 0.0),
        AncillaOp::ProjG => m[0][0] = C64::new(1.0, 0.0),
        AncillaOp::ProjE => m[1][1] = C64::new(1.0, 0.0),
        AncillaOp::ProjF => m[2][2] = C64::new(1.0, 0.0),
        AncillaOp::HadamardGf => {
            m[0][0] = C64::new(s, 0.0);
            m[0][2] = C64::new(s, 0.0);
            m[2][0] = C64::new(s, 0.0);
            m[2][2] = C64::new(-s, 0.0);
        }
        AncillaOp::Rotation(axis, angle) => {
            let c = C64::new((angle / 2.0).cos(), 0.0);
            let ms = C64::new(0.0, -(angle / 2.0).sin());
            // exp(-i angle/2 sigma) = cos I - i sin sigma on the g/f block
            m[1][1] = C64::new(1.0, 0.0);
            match axis {
                RotationAxis::X => {
                    m[0][0] = c;
                    m[2][2] = c;
                    m[0][2] = ms;
                    m[2][0] = ms;
                }
                RotationAxis::Y => {
                    m[0][0] = c;
                    m[2][2] = c;
                    // -i*(-i) = -1 on (g,f), -i*(i) = +1 on (f,g) with sigma_y = -i|g><f| + i|f><g|
                    m[0][2] = ms * C64::new(0.0, -1.0);
                    m[2][0] = ms * C64::new(0.0, 1.0);
                }
                RotationAxis::Z => {
                    m[0][0] = c + ms;
                    m[2][2] = c - ms;
                }
            }
        }
    }
    let mut triplets = Vec::new();
    for (i, occ) in basis.states().iter().enumerate() {
        let a_in = occ.ancilla as usize;
        for a_out in 0..3 {
            let v = m[a_out][a_in];
            if v.is_zero() {
                continue;
            }
            let tgt = Occupation { ancilla: a_out as u8, modes: occ.modes.clone() };
            let j = basis.index_of(&tgt).expect("ancilla levels fixed");
            triplets.push((j, i, v));
        }
    }
    Ok(LinearOperator::new(basis.clone(), CsrMatrix::from_triplets(basis.dim(), basis.dim(), triplets)))
}

/// Unitary evolution `exp(-i H t) |psi>`. `H` must be Hermitian; dense
/// eigendecomposition below dimension 600, Lanczos-Krylov above.
pub fn evolve_unitary(h: &LinearOperator, t: f64, state: &PureState) -> Result<PureState> {
    if !h.is_hermitian(1e-10 * h.matrix.max_abs().max(1.0)) {
        let dev = h.matrix.sub(&h.matrix.dagger()).max_abs();
        return Err(Error::NonHermitian { deviation: dev });
    }
    let amplitudes = if h.basis.dim() <= 600 {
        linalg::expm_i_hermitian_apply(&h.matrix, t, &state.amplitudes)
    } else {
        linalg::krylov_expm_apply(&h.matrix, t, &state.amplitudes, 48)
    };
    Ok(PureState { basis: state.basis.clone(), amplitudes })
}

/// Unitary matrix `exp(-i H)` for Hermitian generator `H` (dense path).
pub fn expm_generator(h: &LinearOperator) -> LinearOperator {
    let (vals, vecs) = linalg::eigh(&h.matrix.to_dense());
    let n = vals.len();
    let mut u = Array2::<C64>::zeros((n, n));
    for r in 0..n {
        for c in 0..n {
            let mut s = C64::zero();
            for k in 0..n {
                s += vecs[(r, k)] * C64::from_polar(1.0, -vals[k]) * vecs[(c, k)].conj();
            }
            u[(r, c)] = s;
        }
    }
    LinearOperator::new(h.basis.clone(), CsrMatrix::from_dense(&u))
}

/// Partial trace keeping the listed modes (and optionally the ancilla).
/// Returns the reduced density operator over a freshly built basis with the
/// same cutoffs restricted to the kept modes.
pub fn partial_trace(
    rho: &DensityOperator,
    keep_modes: &[usize],
    keep_ancilla: bool,
) -> Result<DensityOperator> {
    let basis = &rho.basis;
    for &m in keep_modes {
        basis.check_mode(m)?;
    }
    let reduced = FockBasis::build(
        keep_modes.len().max(1),
        basis.per_mode_cutoff(),
        basis.global_cutoff(),
        if keep_ancilla && basis.has_ancilla() { 3 } else { 0 },
    )?;
    let keep_set: Vec<usize> = keep_modes.to_vec();
    let dim = basis.dim();
    // classify each full-basis state by (kept part, environment part)
    let mut kept_idx = vec![0usize; dim];
    let mut env_key: Vec<(u8, Vec<u8>)> = Vec::with_capacity(dim);
    for (i, occ) in basis.states().iter().enumerate() {
        let kept_modes_occ: Vec<u8> = if keep_set.is_empty() {
            vec![0]
        } else {
            keep_set.iter().map(|&m| occ.modes[m]).collect()
        };
        let kept_anc = if keep_ancilla && basis.has_ancilla() { occ.ancilla } else { 0 };
        let kocc = Occupation { ancilla: kept_anc, modes: kept_modes_occ };
        kept_idx[i] = reduced.index_of(&kocc).expect("kept part within reduced basis");
        let env_modes: Vec<u8> = (0..basis.num_modes())
            .filter(|m| !keep_set.contains(m))
            .map(|m| occ.modes[m])
            .collect();
        let env_anc = if keep_ancilla || !basis.has_ancilla() { 0 } else { occ.ancilla };
        env_key.push((env_anc, env_modes));
    }
    let mut out = Array2::<C64>::zeros((reduced.dim(), reduced.dim()));
    // group indices by environment configuration
    let mut groups: HashMap<&(u8, Vec<u8>), Vec<usize>> = HashMap::new();
    for (i, key) in env_key.iter().enumerate() {
        groups.entry(key).or_default().push(i);
    }
    for (_, idxs) in groups {
        for &i in &idxs {
            for &j in &idxs {
                out[(kept_idx[i], kept_idx[j])] += rho.matrix[(i, j)];
            }
        }
    }
    Ok(DensityOperator { basis: reduced, matrix: out })
}

/// Dense superoperator acting on vectorized density matrices (row-major
/// flattening: `vec(rho)[i*d + j] = rho[i][j]`).
#[derive(Clone, Debug)]
pub struct DenseSuperOp {
    pub dim: usize,
    pub matrix: Array2<C64>,
}

impl DenseSuperOp {
    pub fn identity(dim: usize) -> Self {
        Self { dim, matrix: Array2::eye(dim * dim) }
    }

    /// Superoperator for `rho -> U rho U†`.
    pub fn from_unitary(u: &Array2<C64>) -> Self {
        let d = u.nrows();
        let mut m = Array2::zeros((d * d, d * d));
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    for l in 0..d {
                        m[(i * d + j, k * d + l)] = u[(i, k)] * u[(j, l)].conj();
                    }
                }
            }
        }
        Self { dim: d, matrix: m }
    }

    /// Build column-by-column from a channel action on matrix units.
    pub fn from_channel_fn(dim: usize, mut f: impl FnMut(usize, usize) -> Array2<C64>) -> Self {
        let mut m = Array2::zeros((dim * dim, dim * dim));
        for k in 0..dim {
            for l in 0..dim {
                let out = f(k, l);
                for i in 0..dim {
                    for j in 0..dim {
                        m[(i * dim + j, k * dim + l)] = out[(i, j)];
                    }
                }
            }
        }
        Self { dim, matrix: m }
    }

    pub fn apply(&self, rho: &Array2<C64>) -> Array2<C64> {
        let d = self.dim;
        assert_eq!(rho.nrows(), d);
        let mut out = Array2::zeros((d, d));
        for i in 0..d {
            for j in 0..d {
                let mut s = C64::zero();
                for k in 0..d {
                    for l in 0..d {
                        let v = self.matrix[(i * d + j, k * d + l)];
                        if !v.is_zero() {
                            s += v * rho[(k, l)];
                        }
                    }
                }
                out[(i, j)] = s;
            }
        }
        out
    }

    /// Apply to one factor of a bipartite state: `which = 0` applies to the
    /// first factor (dimension `self.dim`), `which = 1` to the second.
    pub fn apply_to_subsystem(&self, rho: &Array2<C64>, which: usize, other_dim: usize) -> Array2<C64> {
        let d = self.dim;
        let total = d * other_dim;
        assert_eq!(rho.nrows(), total);
        let mut out = Array2::zeros((total, total));
        match which {
            0 => {
                // rho[(i1 i2),(j1 j2)]; contract over (i1, j1)
                for i2 in 0..other_dim {
                    for j2 in 0..other_dim {
                        for k1 in 0..d {
                            for l1 in 0..d {
                                let mut s = C64::zero();
                                for i1 in 0..d {
                                    for j1 in 0..d {
                                        let v = self.matrix[(k1 * d + l1, i1 * d + j1)];
                                        if !v.is_zero() {
                                            s += v * rho[(i1 * other_dim + i2, j1 * other_dim + j2)];
                                        }
                                    }
                                }
                                out[(k1 * other_dim + i2, l1 * other_dim + j2)] = s;
                            }
                        }
                    }
                }
            }
            1 => {
                for i1 in 0..other_dim {
                    for j1 in 0..other_dim {
                        for k2 in 0..d {
                            for l2 in 0..d {
                                let mut s = C64::zero();
                                for i2 in 0..d {
                                    for j2 in 0..d {
                                        let v = self.matrix[(k2 * d + l2, i2 * d + j2)];
                                        if !v.is_zero() {
                                            s += v * rho[(i1 * d + i2, j1 * d + j2)];
                                        }
                                    }
                                }
                                out[(i1 * d + k2, j1 * d + l2)] = s;
                            }
                        }
                    }
                }
            }
            _ => panic!("subsystem index must be 0 or 1"),
        }
        out
    }

    /// Choi matrix `J[(i k),(j l)] = sum E(|k><l|)[i,j] |i k><j l|` reshuffle;
    /// complete positivity <=> J >= 0.
    pub fn choi(&self) -> Array2<C64> {
        let d = self.dim;
        let mut j = Array2::zeros((d * d, d * d));
        for k in 0..d {
            for l in 0..d {
                for i in 0..d {
                    for jj in 0..d {
                        j[(i * d + k, jj * d + l)] = self.matrix[(i * d + jj, k * d + l)];
                    }
                }
            }
        }
        j
    }

    pub fn compose_after(&self, first: &DenseSuperOp) -> DenseSuperOp {
        assert_eq!(self.dim, first.dim);
        DenseSuperOp { dim: self.dim, matrix: self.matrix.dot(&first.matrix) }
    }
}

/// A completely positive (possibly trace-decreasing) map over a mode space,
/// either dense or a lazy tensor product of two factors with an optional
/// wire permutation applied on input and output.
#[derive(Clone, Debug)]
pub enum SuperOperator {
    Dense(DenseSuperOp),
    /// `Tensor(a, b)` acts on `dim_a * dim_b` with factor `a` on the first
    /// (slow) index block.
    Tensor(Box<SuperOperator>, Box<SuperOperator>),
}

impl SuperOperator {
    pub fn dim(&self) -> usize {
        match self {
            SuperOperator::Dense(d) => d.dim,
            SuperOperator::Tensor(a, b) => a.dim() * b.dim(),
        }
    }

    pub fn apply(&self, rho: &Array2<C64>) -> Array2<C64> {
        match self {
            SuperOperator::Dense(d) => d.apply(rho),
            SuperOperator::Tensor(a, b) => match (a.as_ref(), b.as_ref()) {
                (SuperOperator::Dense(da), SuperOperator::Dense(db)) => {
                    let tmp = da.apply_to_subsystem(rho, 0, db.dim);
                    db.apply_to_subsystem(&tmp, 1, da.dim)
                }
                _ => {
                    // general nesting: flatten recursively (rare path)
                    let tmp = apply_factor(a, rho, 0, b.dim());
                    apply_factor(b, &tmp, 1, a.dim())
                }
            },
        }
    }
}

fn apply_factor(op: &SuperOperator, rho: &Array2<C64>, which: usize, other: usize) -> Array2<C64> {
    match op {
        SuperOperator::Dense(d) => d.apply_to_subsystem(rho, which, other),
        SuperOperator::Tensor(..) => {
            unimplemented!("nested tensor superoperators beyond two factors")
        }
    }
}

/// Tensor two superoperators; `swap_factors` reorders the wires so that the
/// second factor acts on the first index block instead.
pub fn tensor_superoperators(
    e1: SuperOperator,
    e2: SuperOperator,
    swap_factors: bool,
) -> SuperOperator {
    if swap_factors {
        SuperOperator::Tensor(Box::new(e2), Box::new(e1))
    } else {
        SuperOperator::Tensor(Box::new(e1), Box::new(e2))
    }
}

/// Apply a unitary defined on a few modes to a state over a large basis.
/// `local` is indexed in the product basis of the listed modes with the
/// full per-mode range 0..=cutoff (first listed mode most significant),
/// which matches the ordering of `build_basis(k, cutoff, None, 0)`.
/// Amplitudes whose targets fall outside the global cutoff are dropped
/// (truncation, detectable as norm loss).
pub fn apply_local_unitary(
    basis: &BasisRef,
    modes: &[usize],
    local: &Array2<C64>,
    amps: &Array1<C64>,
) -> Array1<C64> {
    let radix = basis.per_mode_cutoff() as usize + 1;
    let k = modes.len();
    let ldim = radix.pow(k as u32);
    assert_eq!(local.nrows(), ldim, "local operator dimension mismatch");
    // sparse columns of the local operator
    let mut cols: Vec<Vec<(usize, C64)>> = vec![Vec::new(); ldim];
    for ((r, c), v) in local.indexed_iter() {
        if v.norm() > 1e-15 {
            cols[c].push((r, *v));
        }
    }
    let mut out = Array1::<C64>::zeros(basis.dim());
    let mut scratch: Vec<u8> = vec![0; basis.num_modes()];
    for (i, amp) in amps.iter().enumerate() {
        if amp.is_zero() {
            continue;
        }
        let occ = basis.state(i);
        let mut c_in = 0usize;
        for &m in modes {
            c_in = c_in * radix + occ.modes[m] as usize;
        }
        for &(c_out, v) in &cols[c_in] {
            scratch.copy_from_slice(&occ.modes);
            let mut rem = c_out;
            for j in (0..k).rev() {
                scratch[modes[j]] = (rem % radix) as u8;
                rem /= radix;
            }
            let tgt = Occupation { ancilla: occ.ancilla, modes: scratch.clone() };
            if let Some(t) = basis.index_of(&tgt) {
                out[t] += v * amp;
            }
        }
    }
    out
}

/// Tensor product of pure states over disjoint mode sets, expressed in a
/// joint basis built as `basis1 (x) basis2` (first factor's modes first).
pub fn kron_states(a: &Array1<C64>, b: &Array1<C64>) -> Array1<C64> {
    let mut out = Array1::zeros(a.len() * b.len());
    for i in 0..a.len() {
        for j in 0..b.len() {
            out[i * b.len() + j] = a[i] * b[j];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// Independent brute-force enumeration used as the dimension oracle.
    fn count_tuples(num_modes: usize, per_mode: u8, global: Option<u32>) -> usize {
        fn rec(modes_left: usize, budget: Option<u32>, per_mode: u8) -> usize {
            if modes_left == 0 {
                return 1;
            }
            let mut total = 0;
            for n in 0..=per_mode {
                match budget {
                    Some(b) if (n as u32) > b => break,
                    _ => {}
                }
                total += rec(modes_left - 1, budget.map(|b| b - n as u32), per_mode);
            }
            total
        }
        rec(num_modes, global, per_mode)
    }

    #[test]
    fn basis_dimensions_match_enumeration_oracle() {
        // 12 modes, per-mode 2, global 2: the GUE working basis
        let b = build_basis(12, 2, Some(2), 0).unwrap();
        assert_eq!(b.dim(), 91);
        assert_eq!(b.dim(), count_tuples(12, 2, Some(2)));
        // one mode cutoff 3, no global cutoff
        let b = build_basis(1, 3, None, 0).unwrap();
        assert_eq!(b.dim(), 4);
        // 2 modes, per-mode 1, global 1
        let b = build_basis(2, 1, Some(1), 0).unwrap();
        assert_eq!(b.dim(), 3);
        let occs: Vec<Vec<u8>> = b.states().iter().map(|o| o.modes.clone()).collect();
        assert_eq!(occs, vec![vec![0, 0], vec![0, 1], vec![1, 0]]);
        // ancilla triples the count
        let b = build_basis(2, 1, Some(1), 3).unwrap();
        assert_eq!(b.dim(), 9);
        // a couple of randomized-ish shapes against the oracle
        for (m, p, g) in [(3usize, 2u8, Some(4u32)), (5, 1, Some(3)), (4, 3, None)] {
            let b = build_basis(m, p, g, 0).unwrap();
            assert_eq!(b.dim(), count_tuples(m, p, g));
        }
    }

    #[test]
    fn basis_index_is_bijective() {
        let b = build_basis(4, 2, Some(3), 3).unwrap();
        for (i, occ) in b.states().iter().enumerate() {
            assert_eq!(b.index_of(occ), Some(i));
        }
    }

    #[test]
    fn empty_basis_is_rejected() {
        assert!(build_basis(0, 2, None, 0).is_err());
    }

    #[test]
    fn mode_operator_actions() {
        let b = build_basis(1, 3, None, 0).unwrap();
        let a = mode_operator(&b, 0, ModeOp::Annihilate).unwrap();
        let n = mode_operator(&b, 0, ModeOp::Number).unwrap();
        // annihilate |1> -> |0>
        let one = PureState::basis_state(b.clone(), &[1], 0);
        let out = a.apply(&one);
        assert_abs_diff_eq!((out.amplitudes[b.index_of_modes(&[0])] - C64::new(1.0, 0.0)).norm(), 0.0, epsilon = 1e-14);
        // annihilate |0> -> 0
        let vac = PureState::basis_state(b.clone(), &[0], 0);
        assert_abs_diff_eq!(a.apply(&vac).norm(), 0.0, epsilon = 1e-14);
        // number |2> -> 2 |2>
        let two = PureState::basis_state(b.clone(), &[2], 0);
        let out = n.apply(&two);
        assert_abs_diff_eq!((out.amplitudes[b.index_of_modes(&[2])] - C64::new(2.0, 0.0)).norm(), 0.0, epsilon = 1e-14);
        // creation truncates at the cutoff
        let c = mode_operator(&b, 0, ModeOp::Create).unwrap();
        let three = PureState::basis_state(b.clone(), &[3], 0);
        assert_abs_diff_eq!(c.apply(&three).norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn commutator_identity_below_cutoff() {
        let b = build_basis(2, 4, None, 0).unwrap();
        let a = mode_operator(&b, 0, ModeOp::Annihilate).unwrap();
        let ad = a.dagger();
        let comm = a.matmul(&ad).matrix.sub(&ad.matmul(&a).matrix);
        // [a, a†] = I on states whose creation stays below the cutoff
        for (i, occ) in b.states().iter().enumerate() {
            if occ.modes[0] < 4 {
                let e = PureState::basis_state(b.clone(), &occ.modes, 0);
                let out = comm.matvec(&e.amplitudes);
                assert_abs_diff_eq!((out[i] - C64::new(1.0, 0.0)).norm(), 0.0, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn ancilla_operator_actions() {
        let b = build_basis(1, 1, None, 3).unwrap();
        let sz = ancilla_operator(&b, AncillaOp::SigmaZGf).unwrap();
        let g = PureState::basis_state(b.clone(), &[0], 0);
        let e = PureState::basis_state(b.clone(), &[0], 1);
        let f = PureState::basis_state(b.clone(), &[0], 2);
        assert_abs_diff_eq!((sz.apply(&g).inner(&g) - C64::new(1.0, 0.0)).norm(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(sz.apply(&e).norm(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!((sz.apply(&f).inner(&f) - C64::new(-1.0, 0.0)).norm(), 0.0, epsilon = 1e-14);
        let h = ancilla_operator(&b, AncillaOp::HadamardGf).unwrap();
        let hg = h.apply(&g);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!((hg.inner(&g) - C64::new(s, 0.0)).norm(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!((hg.inner(&f) - C64::new(s, 0.0)).norm(), 0.0, epsilon = 1e-14);
        let low = ancilla_operator(&b, AncillaOp::LowerGe).unwrap();
        assert_abs_diff_eq!((low.apply(&e).inner(&g) - C64::new(1.0, 0.0)).norm(), 0.0, epsilon = 1e-14);
        // requesting ancilla ops without an ancilla errors
        let nb = build_basis(1, 1, None, 0).unwrap();
        assert!(ancilla_operator(&nb, AncillaOp::ProjG).is_err());
    }

    #[test]
    fn evolve_unitary_basics() {
        let b = build_basis(2, 2, None, 0).unwrap();
        // H = 0 acts as the identity
        let h = LinearOperator::new(b.clone(), CsrMatrix::zeros(b.dim(), b.dim()));
        let st = PureState::basis_state(b.clone(), &[1, 0], 0);
        let out = evolve_unitary(&h, 1.0, &st).unwrap();
        assert_abs_diff_eq!((out.inner(&st) - C64::new(1.0, 0.0)).norm(), 0.0, epsilon = 1e-12);

        // two-mode generator (pi/4)(c†b - b†c) applied for unit parameter:
        // |10> -> (|10> + |01>)/sqrt(2), frozen from the dense matrix
        // exponential oracle below
        let bop = mode_operator(&b, 0, ModeOp::Annihilate).unwrap();
        let cop = mode_operator(&b, 1, ModeOp::Annihilate).unwrap();
        let gen = cop
            .dagger()
            .matmul(&bop)
            .matrix
            .sub(&bop.dagger().matmul(&cop).matrix)
            .scale(C64::new(0.0, std::f64::consts::FRAC_PI_4));
        // i*(pi/4)(c†b - b†c) is Hermitian; evolve with t = 1
        let h = LinearOperator::new(b.clone(), gen);
        assert!(h.is_hermitian(1e-12));
        let out = evolve_unitary(&h, 1.0, &st).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let i10 = b.index_of_modes(&[1, 0]);
        let i01 = b.index_of_modes(&[0, 1]);
        assert_abs_diff_eq!((out.amplitudes[i10] - C64::new(s, 0.0)).norm(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!((out.amplitudes[i01] - C64::new(s, 0.0)).norm(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(out.norm(), 1.0, epsilon = 1e-12);

        // non-Hermitian H is rejected
        let bad = LinearOperator::new(b.clone(), bop.matrix.clone());
        assert!(evolve_unitary(&bad, 1.0, &st).is_err());
    }

    #[test]
    fn norm_preserved_for_random_hermitian() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let b = build_basis(3, 2, Some(3), 0).unwrap();
        let d = b.dim();
        for _ in 0..5 {
            let mut m = Array2::<C64>::zeros((d, d));
            for r in 0..d {
                for c in r..d {
                    let v = C64::new(rng.gen_range(-1.0..1.0), if c == r { 0.0 } else { rng.gen_range(-1.0..1.0) });
                    m[(r, c)] = v;
                    m[(c, r)] = v.conj();
                }
            }
            let h = LinearOperator::new(b.clone(), CsrMatrix::from_dense(&m));
            let mut psi = PureState::zero(b.clone());
            for i in 0..d {
                psi.amplitudes[i] = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            }
            let psi = psi.normalized();
            let out = evolve_unitary(&h, 0.37, &psi).unwrap();
            assert_abs_diff_eq!(out.norm(), 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn partial_trace_product_and_entangled() {
        let b = build_basis(2, 1, None, 0).unwrap();
        // product state |1>|0>
        let st = PureState::basis_state(b.clone(), &[1, 0], 0);
        let rho = st.to_density();
        let red = partial_trace(&rho, &[0], false).unwrap();
        assert_abs_diff_eq!(red.trace().re, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(red.matrix[(1, 1)].re, 1.0, epsilon = 1e-14);
        // Bell-like (|10> + |01>)/sqrt(2) reduces to I/2
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let bell = PureState::from_components(
            b.clone(),
            &[
                (Occupation { ancilla: 0, modes: vec![1, 0] }, C64::new(s, 0.0)),
                (Occupation { ancilla: 0, modes: vec![0, 1] }, C64::new(s, 0.0)),
            ],
        );
        let red = partial_trace(&bell.to_density(), &[0], false).unwrap();
        assert_abs_diff_eq!(red.matrix[(0, 0)].re, 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(red.matrix[(1, 1)].re, 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(red.matrix[(0, 1)].norm(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(red.trace().re, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(red.hermiticity_defect(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn superoperator_identity_and_unitary_tensor() {
        let d = 2usize;
        let id = DenseSuperOp::identity(d);
        let both = tensor_superoperators(
            SuperOperator::Dense(id.clone()),
            SuperOperator::Dense(id),
            false,
        );
        let mut rho = Array2::<C64>::zeros((4, 4));
        rho[(1, 1)] = C64::new(0.5, 0.0);
        rho[(2, 2)] = C64::new(0.5, 0.0);
        rho[(1, 2)] = C64::new(0.0, 0.5);
        rho[(2, 1)] = C64::new(0.0, -0.5);
        let out = both.apply(&rho);
        for i in 0..4 {
            for j in 0..4 {
                assert_abs_diff_eq!((out[(i, j)] - rho[(i, j)]).norm(), 0.0, epsilon = 1e-13);
            }
        }

        // (U channel) (x) (V channel) on a product state = (U (x) V) rho (..)†
        let u = Array2::from_shape_vec(
            (2, 2),
            vec![C64::new(0.6, 0.0), C64::new(0.8, 0.0), C64::new(-0.8, 0.0), C64::new(0.6, 0.0)],
        )
        .unwrap();
        let v = Array2::from_shape_vec(
            (2, 2),
            vec![C64::new(0.0, 1.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(1.0, 0.0)],
        )
        .unwrap();
        let su = DenseSuperOp::from_unitary(&u);
        let sv = DenseSuperOp::from_unitary(&v);
        let t = tensor_superoperators(SuperOperator::Dense(su), SuperOperator::Dense(sv), false);
        let out = t.apply(&rho);
        // direct kron conjugation
        let mut uv = Array2::<C64>::zeros((4, 4));
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    for l in 0..2 {
                        uv[(i * 2 + k, j * 2 + l)] = u[(i, j)] * v[(k, l)];
                    }
                }
            }
        }
        let direct = {
            let tmp = uv.dot(&rho);
            let uvd = uv.t().mapv(|x| x.conj());
            tmp.dot(&uvd)
        };
        for i in 0..4 {
            for j in 0..4 {
                assert_abs_diff_eq!((out[(i, j)] - direct[(i, j)]).norm(), 0.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn choi_of_unitary_channel_is_positive_rank_one() {
        let u = Array2::from_shape_vec(
            (2, 2),
            vec![C64::new(0.0, 1.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(-1.0, 0.0)],
        )
        .unwrap();
        let s = DenseSuperOp::from_unitary(&u);
        let j = s.choi();
        let (vals, _) = linalg::eigh(&j);
        assert!(vals.iter().all(|&v| v > -1e-12));
        assert_abs_diff_eq!(vals[3], 2.0, epsilon = 1e-12);
        assert!(vals[2].abs() < 1e-12);
    }
}
