//! Synthetic latent and direct scenarios, and the eigenbasis rotation that
//! turns a two-party state into a probability table.

use serde::{Deserialize, Serialize};

use crate::classical::JointPmf;
use crate::error::{Error, Result};
use crate::qmath::{c64, eig_hermitian, embed_identity, hermitize, kron, reduce_to, CMatrix, SystemLayout};
use crate::states::{from_pmf_diagonal, DensityMatrix, KetVector};

/// Largest negative diagonal entry tolerated (and clamped) by the rotation.
pub const ROTATION_CLAMP_TOL: f64 = 1e-8;
const DEGENERACY_GAP: f64 = 1e-10;

fn check_prob(name: &str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!("{name} = {p} is not a probability")));
    }
    Ok(())
}

/// Real amplitudes of γ|0⟩ + λ|1⟩.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Amplitudes {
    pub gamma: f64,
    pub lambda: f64,
}

impl Amplitudes {
    pub fn new(gamma: f64, lambda: f64) -> Result<Self> {
        if ((gamma * gamma + lambda * lambda) - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "γ² + λ² = {} for (γ, λ) = ({gamma}, {lambda})",
                gamma * gamma + lambda * lambda
            )));
        }
        Ok(Self { gamma, lambda })
    }

    pub fn balanced() -> Self {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        Self { gamma: r, lambda: r }
    }

    pub fn ket(&self) -> KetVector {
        KetVector::real(&[self.gamma, self.lambda]).expect("normalized on construction")
    }

    /// γ|0⟩ − λ|1⟩.
    pub fn flipped_ket(&self) -> KetVector {
        KetVector::real(&[self.gamma, -self.lambda]).expect("normalized on construction")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum QubitOp {
    Identity,
    PhaseFlip,
    BitFlip,
    /// X·Z: phase flip followed by bit flip.
    BitPhaseFlip,
}

impl QubitOp {
    pub const ALL: [QubitOp; 4] = [QubitOp::Identity, QubitOp::PhaseFlip, QubitOp::BitFlip, QubitOp::BitPhaseFlip];

    pub fn matrix(self) -> CMatrix {
        let (o, l) = (c64(0.0, 0.0), c64(1.0, 0.0));
        let entries = match self {
            QubitOp::Identity => [l, o, o, l],
            QubitOp::PhaseFlip => [l, o, o, -l],
            QubitOp::BitFlip => [o, l, l, o],
            QubitOp::BitPhaseFlip => [o, -l, l, o],
        };
        CMatrix::from_row_slice(2, 2, &entries)
    }
}

fn bsc2_bits_prob(v: usize, q: f64) -> f64 {
    (0..2)
        .map(|b| if (v >> b) & 1 == 1 { q } else { 1.0 - q })
        .product()
}

fn bsc2_flip_prob(from: usize, to: usize, p: f64) -> f64 {
    (0..2)
        .map(|b| if ((from ^ to) >> b) & 1 == 1 { p } else { 1.0 - p })
        .product()
}

fn diag_xy(p: &JointPmf) -> Result<DensityMatrix> {
    let s = p.supports();
    from_pmf_diagonal(p, SystemLayout::new([("X", s[0]), ("Y", s[1])])?)
}

/// Full table p(x, y, z) of the two-bit latent model, indexed (x, y, z).
/// A value's bits are read most significant first, so "01" is 1.
pub fn bsc2_latent_joint(q: f64, p1: f64, p2: f64) -> Result<JointPmf> {
    check_prob("q", q)?;
    check_prob("p1", p1)?;
    check_prob("p2", p2)?;
    let mut probs = Vec::with_capacity(64);
    for x in 0..4 {
        for y in 0..4 {
            for z in 0..4 {
                probs.push(bsc2_bits_prob(z, q) * bsc2_flip_prob(z, x, p1) * bsc2_flip_prob(z, y, p2));
            }
        }
    }
    JointPmf::new(vec![4, 4, 4], probs)
}

/// Two-bit Z with Bernoulli(q) bits; X and Y are noisy copies with
/// per-bit flip probabilities p1 and p2; Z is then summed out.
pub fn bsc2_latent(q: f64, p1: f64, p2: f64) -> Result<(JointPmf, DensityMatrix)> {
    let full = bsc2_latent_joint(q, p1, p2)?;
    let pxy = JointPmf::normalized(vec![4, 4], full.marginal(&[0, 1]).probs().to_vec())?;
    let rho = diag_xy(&pxy)?;
    Ok((pxy, rho))
}

/// X has two Bernoulli(q) bits and Y is X through per-bit flips with
/// probability p.
pub fn bsc2_direct(q: f64, p: f64) -> Result<(JointPmf, DensityMatrix)> {
    check_prob("q", q)?;
    check_prob("p", p)?;
    let mut probs = Vec::with_capacity(16);
    for x in 0..4 {
        for y in 0..4 {
            probs.push(bsc2_bits_prob(x, q) * bsc2_flip_prob(x, y, p));
        }
    }
    let pxy = JointPmf::normalized(vec![4, 4], probs)?;
    let rho = diag_xy(&pxy)?;
    Ok((pxy, rho))
}

/// (1−p)ρ + (p/3)(ZρZ + XρX + (XZ)ρ(XZ)†) on the named qubit.
pub fn depolarize_qubit(rho: &DensityMatrix, target: &str, p: f64) -> Result<DensityMatrix> {
    check_prob("p", p)?;
    let layout = rho.layout();
    let d = layout.dim_of(target)?;
    if d != 2 {
        return Err(Error::InvalidParameter(format!("factor `{target}` has dimension {d}, not a qubit")));
    }
    let lt = layout.select(&[target])?;
    let mut acc = rho.mat() * c64(1.0 - p, 0.0);
    for op in [QubitOp::PhaseFlip, QubitOp::BitFlip, QubitOp::BitPhaseFlip] {
        let o = embed_identity(&op.matrix(), &lt, layout)?;
        acc += &o * rho.mat() * o.adjoint() * c64(p / 3.0, 0.0);
    }
    DensityMatrix::new(hermitize(&acc)?, layout.clone())
}

fn zxy_layout() -> SystemLayout {
    SystemLayout::new([("Z", 2), ("X", 2), ("Y", 2)]).expect("static layout")
}

fn xy_layout() -> SystemLayout {
    SystemLayout::new([("X", 2), ("Y", 2)]).expect("static layout")
}

/// `q ρ^{a1} + (1−q) ρ^{a2}` where ρ^a is |a⟩|a⟩|a⟩ on (Z, X, Y) with X and
/// Y depolarized by p1 and p2. Returns (ρ_ZXY, ρ_XY).
pub fn depolarizing_latent(
    a1: Amplitudes,
    a2: Amplitudes,
    q: f64,
    p1: f64,
    p2: f64,
) -> Result<(DensityMatrix, DensityMatrix)> {
    check_prob("q", q)?;
    let component = |a: Amplitudes| -> Result<DensityMatrix> {
        let v = a.ket();
        let pure = DensityMatrix::pure(&v.tensor(&v).tensor(&v), zxy_layout())?;
        depolarize_qubit(&depolarize_qubit(&pure, "X", p1)?, "Y", p2)
    };
    let zxy = DensityMatrix::mixture(&[(q, &component(a1)?), (1.0 - q, &component(a2)?)])?;
    let xy = zxy.reduce(&["X", "Y"])?;
    Ok((zxy, xy))
}

/// `q ρ^{a1} + (1−q) ρ^{a2}` where ρ^a is |a⟩|a⟩ on (X, Y) with Y
/// depolarized by p.
pub fn depolarizing_direct(a1: Amplitudes, a2: Amplitudes, q: f64, p: f64) -> Result<DensityMatrix> {
    check_prob("q", q)?;
    let component = |a: Amplitudes| -> Result<DensityMatrix> {
        let v = a.ket();
        depolarize_qubit(&DensityMatrix::pure(&v.tensor(&v), xy_layout())?, "Y", p)
    };
    DensityMatrix::mixture(&[(q, &component(a1)?), (1.0 - q, &component(a2)?)])
}

fn weighted_projectors(branches: &[(f64, KetVector)], layout: SystemLayout) -> Result<DensityMatrix> {
    let n = layout.total_dim();
    let mut acc = CMatrix::zeros(n, n);
    for (w, k) in branches {
        acc += k.projector() * c64(*w, 0.0);
    }
    DensityMatrix::new(hermitize(&acc)?, layout)
}

/// Z is |A⟩ = γ|0⟩+λ|1⟩ with probability q and |B⟩ = γ|0⟩−λ|1⟩ otherwise;
/// X and Y carry Z's label, switched to the other one with probability p1
/// and p2. Returns (ρ_ZXY, ρ_XY).
pub fn gqsc_latent(amp: Amplitudes, q: f64, p1: f64, p2: f64) -> Result<(DensityMatrix, DensityMatrix)> {
    check_prob("q", q)?;
    check_prob("p1", p1)?;
    check_prob("p2", p2)?;
    let kets = [amp.ket(), amp.flipped_ket()];
    let mut branches = Vec::with_capacity(8);
    for (zi, z) in kets.iter().enumerate() {
        let wz = if zi == 0 { q } else { 1.0 - q };
        for (xi, x) in kets.iter().enumerate() {
            let wx = if xi == zi { 1.0 - p1 } else { p1 };
            for (yi, y) in kets.iter().enumerate() {
                let wy = if yi == zi { 1.0 - p2 } else { p2 };
                branches.push((wz * wx * wy, z.tensor(x).tensor(y)));
            }
        }
    }
    let zxy = weighted_projectors(&branches, zxy_layout())?;
    let xy = zxy.reduce(&["X", "Y"])?;
    Ok((zxy, xy))
}

/// X is |A⟩ with probability q and |B⟩ otherwise; Y carries X's label,
/// switched with probability p.
pub fn gqsc_direct(amp: Amplitudes, q: f64, p: f64) -> Result<DensityMatrix> {
    check_prob("q", q)?;
    check_prob("p", p)?;
    let kets = [amp.ket(), amp.flipped_ket()];
    let mut branches = Vec::with_capacity(4);
    for (xi, x) in kets.iter().enumerate() {
        let wx = if xi == 0 { q } else { 1.0 - q };
        for (yi, y) in kets.iter().enumerate() {
            let wy = if yi == xi { 1.0 - p } else { p };
            branches.push((wx * wy, x.tensor(y)));
        }
    }
    weighted_projectors(&branches, xy_layout())
}

/// Probability table read off a two-party state in the product of its
/// marginal eigenbases.
#[derive(Debug, Clone, PartialEq)]
pub struct Rotation {
    pub pmf: JointPmf,
    /// True when either marginal has (numerically) repeated eigenvalues,
    /// in which case the basis and hence the table are not unique.
    pub degenerate: bool,
}

/// Diagonal of U†ρU with U = V_X ⊗ V_Y built from the marginals'
/// eigenvectors (descending eigenvalues), clamped and renormalized.
pub fn rotate_to_pmf(rho: &DensityMatrix) -> Result<Rotation> {
    let layout = rho.layout();
    if layout.len() != 2 {
        return Err(Error::InvalidLayout("rotation needs a two-factor state".into()));
    }
    let labels = layout.labels();
    let (rx, _) = reduce_to(rho.mat(), layout, &[labels[0]])?;
    let (ry, _) = reduce_to(rho.mat(), layout, &[labels[1]])?;
    let sx = eig_hermitian(&hermitize(&rx)?)?;
    let sy = eig_hermitian(&hermitize(&ry)?)?;
    let degenerate = [&sx.values, &sy.values]
        .iter()
        .any(|v| v.windows(2).any(|w| (w[0] - w[1]).abs() < DEGENERACY_GAP));
    let u = kron(&sx.vectors, &sy.vectors);
    let rotated = u.adjoint() * rho.mat() * &u;
    let mut probs: Vec<f64> = rotated.diagonal().iter().map(|z| z.re).collect();
    for (i, p) in probs.iter_mut().enumerate() {
        if *p < 0.0 {
            if -*p >= ROTATION_CLAMP_TOL {
                return Err(Error::Numeric(format!("rotated diagonal entry {i} is {p:e}")));
            }
            *p = 0.0;
        }
    }
    let pmf = JointPmf::normalized(layout.dims(), probs)?;
    Ok(Rotation { pmf, degenerate })
}
