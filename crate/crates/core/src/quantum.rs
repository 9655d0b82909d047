//! Quantum latent search over density matrices.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qmath::{
    c64, eig_hermitian, hermitize, id_kron_mul, identity, is_positive_definite, inv_sqrt_psd, kron, kron_id_sandwich, partial_trace,
    power_psd, sqrt_psd, trace, CMatrix, SystemLayout, EIG_FLOOR,
};
use crate::seeds::derive_seed;
use crate::states::{entropy_of, qcmi, ConditionalState, DensityMatrix};
use crate::verdict::{decide, BetaRun, Verdict};

pub type QuantumVerdict = Verdict;

/// Label given to the latent factor of every returned joint state.
pub const LATENT_LABEL: &str = "Z";

/// How the two conditional operators are combined in the update.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UpdateRule {
    /// `(I ⊗ ρ_Z^{β−1}) · ρ(Z|X) · ρ(Z|Y)`, then repaired.
    #[default]
    Ordered,
    /// Experimental: replaces the product with `½(AB + BA)`.
    Symmetrized,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantumSearchParams {
    pub beta: f64,
    pub iterations: usize,
    pub dim_z: usize,
    pub seed: u64,
    pub eig_floor: f64,
    #[serde(default)]
    pub rule: UpdateRule,
}

impl QuantumSearchParams {
    pub fn new(beta: f64, iterations: usize, dim_z: usize, seed: u64) -> Self {
        Self {
            beta,
            iterations,
            dim_z,
            seed,
            eig_floor: EIG_FLOOR,
            rule: UpdateRule::Ordered,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 || self.dim_z == 0 || !self.beta.is_finite() || !(self.eig_floor >= 0.0) {
            return Err(Error::InvalidParameter(format!("{self:?}")));
        }
        Ok(())
    }
}

/// Returns `(L, L_expanded)` where `L = I(X;Y|Z) + β S(Z)` and the second
/// value is computed from the conditional-entropy expansion.
pub fn q_loss(rho: &DensityMatrix, beta: f64, labels: [&str; 3]) -> Result<(f64, f64)> {
    let [x, y, z] = labels;
    let s = |keep: &[&str]| -> Result<f64> { entropy_of(rho.reduce(keep)?.mat()) };
    let sz = s(&[z])?;
    let direct = qcmi(rho, labels)? + beta * sz;

    let sx = s(&[x])?;
    let sy = s(&[y])?;
    let sxy = s(&[x, y])?;
    let sxyz = entropy_of(rho.mat())?;
    let s_z_given_x = s(&[x, z])? - sx;
    let s_z_given_y = s(&[y, z])? - sy;
    let s_z_given_xy = sxyz - sxy;
    let mi_xy = sx + sy - sxy;
    let expanded = s_z_given_x + s_z_given_y - s_z_given_xy + (beta - 1.0) * sz + mi_xy;
    Ok((direct, expanded))
}

fn xyz_layout(rho_xy: &DensityMatrix, dim_z: usize) -> Result<SystemLayout> {
    let l = rho_xy.layout();
    if l.len() != 2 {
        return Err(Error::InvalidLayout(format!("expected a two-factor state, found {} factors", l.len())));
    }
    if l.contains(LATENT_LABEL) {
        return Err(Error::InvalidLayout(format!("label `{LATENT_LABEL}` is reserved for the latent factor")));
    }
    let f = l.factors();
    SystemLayout::new([
        (f[0].label.as_str(), f[0].dim),
        (f[1].label.as_str(), f[1].dim),
        (LATENT_LABEL, dim_z),
    ])
}

/// Rescales a PSD operator on `XY ⊗ Z` so that its partial trace over the
/// last factor is the identity.
///
/// With `W = Tr_Z M` the result is `(W^{-1/2} ⊗ I) M (W^{-1/2} ⊗ I)`, plus
/// `Π ⊗ I/d_Z` where `Π` projects onto the kernel of `W`. The extra term
/// leaves the support untouched and makes the identity hold everywhere.
pub fn normalize_conditional(m: &CMatrix, layout: &SystemLayout) -> Result<ConditionalState> {
    normalize_conditional_with_floor(m, layout, EIG_FLOOR)
}

pub fn normalize_conditional_with_floor(m: &CMatrix, layout: &SystemLayout, floor: f64) -> Result<ConditionalState> {
    layout.check_matrix(m)?;
    let labels = layout.labels();
    let last = *labels.last().expect("layout is nonempty");
    let dz = layout.dim_of(last)?;
    let outer = layout.total_dim() / dz;
    let mat = normalize_raw(m, outer, dz, floor)?;
    let conditioned = labels[..labels.len() - 1].iter().map(|s| s.to_string()).collect();
    Ok(ConditionalState::from_trusted(mat, layout.clone(), conditioned))
}

fn trace_last(m: &CMatrix, outer: usize, inner: usize) -> CMatrix {
    let mut w = CMatrix::zeros(outer, outer);
    for b in 0..outer {
        for a in 0..outer {
            let mut acc = c64(0.0, 0.0);
            for s in 0..inner {
                acc += m[(a * inner + s, b * inner + s)];
            }
            w[(a, b)] = acc;
        }
    }
    w
}

fn normalize_raw(m: &CMatrix, outer: usize, dz: usize, floor: f64) -> Result<CMatrix> {
    let w = hermitize(&trace_last(m, outer, dz))?;
    let spec = eig_hermitian(&w)?;
    if spec.values.first().is_none_or(|&top| !(top > floor)) {
        return Err(Error::Numeric("partial trace over the latent factor vanishes".into()));
    }
    let k = spec.reconstruct_with(|l| if l < floor { 0.0 } else { 1.0 / l.sqrt() });
    let mut out = kron_id_sandwich(&k, dz, m);
    if spec.values.iter().any(|&l| l < floor) {
        let kernel = spec.reconstruct_with(|l| if l < floor { 1.0 } else { 0.0 });
        out += kron(&kernel, &(identity(dz) * c64(1.0 / dz as f64, 0.0)));
    }
    hermitize(&out)
}

/// Random ρ(Z|X,Y): `G G†` with i.i.d. complex standard normal entries,
/// passed through [`normalize_conditional`].
pub fn random_conditional_init(dims: (usize, usize, usize), seed: u64) -> Result<ConditionalState> {
    let (dx, dy, dz) = dims;
    let layout = SystemLayout::new([("X", dx), ("Y", dy), (LATENT_LABEL, dz)])?;
    random_conditional_for(&layout, seed)
}

fn random_conditional_for(layout: &SystemLayout, seed: u64) -> Result<ConditionalState> {
    let labels = layout.labels();
    let conditioned: Vec<String> = labels[..2].iter().map(|s| s.to_string()).collect();
    let n = layout.total_dim();
    let dz = layout.dims()[2];
    if dz == 1 {
        return Ok(ConditionalState::from_trusted(identity(n), layout.clone(), conditioned));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = CMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            g[(i, j)] = c64(re, im);
        }
    }
    let m = hermitize(&(&g * g.adjoint()))?;
    let mat = normalize_raw(&m, n / dz, dz, EIG_FLOOR)?;
    Ok(ConditionalState::from_trusted(mat, layout.clone(), conditioned))
}

/// Zeroes the negative part of a Hermitian matrix. A Cholesky factor with
/// real positive pivots proves there is nothing to clip.
fn clip_negative(h: CMatrix) -> Result<CMatrix> {
    if is_positive_definite(&h) {
        return Ok(h);
    }
    Ok(eig_hermitian(&h)?.reconstruct_with(|l| l.max(0.0)))
}

/// Precomputed pieces of one search run.
struct Searcher {
    dx: usize,
    dy: usize,
    dz: usize,
    sqrt_xy: CMatrix,
    beta: f64,
    floor: f64,
    rule: UpdateRule,
}

impl Searcher {
    fn joint(&self, cond: &CMatrix) -> Result<CMatrix> {
        hermitize(&kron_id_sandwich(&self.sqrt_xy, self.dz, cond))
    }

    /// `out[(x,y,z),(x',y',z'')] = Σ_{z'} a[(x,z),(x',z')] b[(y,z'),(y',z'')]`,
    /// i.e. `(a embedded on XYZ) · (I_X ⊗ b)`.
    fn product(&self, a: &CMatrix, b: &CMatrix) -> CMatrix {
        let (dx, dy, dz) = (self.dx, self.dy, self.dz);
        let n = dx * dy * dz;
        let mut out = CMatrix::zeros(n, n);
        for x2 in 0..dx {
            for y2 in 0..dy {
                for z2 in 0..dz {
                    let col = (x2 * dy + y2) * dz + z2;
                    for x in 0..dx {
                        for y in 0..dy {
                            for z in 0..dz {
                                let mut acc = Complex64::new(0.0, 0.0);
                                for zm in 0..dz {
                                    acc += a[(x * dz + z, x2 * dz + zm)] * b[(y * dz + zm, y2 * dz + z2)];
                                }
                                out[((x * dy + y) * dz + z, col)] = acc;
                            }
                        }
                    }
                }
            }
        }
        out
    }

    /// `(I_X ⊗ b) · (a embedded on XYZ)`.
    fn product_reversed(&self, a: &CMatrix, b: &CMatrix) -> CMatrix {
        let (dx, dy, dz) = (self.dx, self.dy, self.dz);
        let n = dx * dy * dz;
        let mut out = CMatrix::zeros(n, n);
        for x2 in 0..dx {
            for y2 in 0..dy {
                for z2 in 0..dz {
                    let col = (x2 * dy + y2) * dz + z2;
                    for x in 0..dx {
                        for y in 0..dy {
                            for z in 0..dz {
                                let mut acc = Complex64::new(0.0, 0.0);
                                for zm in 0..dz {
                                    acc += b[(y * dz + z, y2 * dz + zm)] * a[(x * dz + zm, x2 * dz + z2)];
                                }
                                out[((x * dy + y) * dz + z, col)] = acc;
                            }
                        }
                    }
                }
            }
        }
        out
    }

    fn update(&self, joint: &CMatrix, layout: &SystemLayout) -> Result<CMatrix> {
        let labels = layout.labels();
        let (x, y, z) = (labels[0], labels[1], labels[2]);
        let dz = self.dz;

        let (rxz, lxz) = partial_trace(joint, layout, &[y])?;
        let (rx, _) = partial_trace(&rxz, &lxz, &[z])?;
        let kx = inv_sqrt_psd(&hermitize(&rx)?, self.floor)?;
        let zx = kron_id_sandwich(&kx, dz, &rxz);

        let (ryz, lyz) = partial_trace(joint, layout, &[x])?;
        let (ry, _) = partial_trace(&ryz, &lyz, &[z])?;
        let ky = inv_sqrt_psd(&hermitize(&ry)?, self.floor)?;
        let zy = kron_id_sandwich(&ky, dz, &ryz);

        let (rz, _) = partial_trace(joint, layout, &[x, y])?;
        let pz = power_psd(&hermitize(&rz)?, self.beta - 1.0, self.floor)?;

        let prod = match self.rule {
            UpdateRule::Ordered => self.product(&zx, &zy),
            UpdateRule::Symmetrized => (self.product(&zx, &zy) + self.product_reversed(&zx, &zy)) * c64(0.5, 0.0),
        };
        let m = id_kron_mul(self.dx * self.dy, &pz, &prod);
        let m = clip_negative(hermitize(&m)?)?;
        normalize_raw(&m, self.dx * self.dy, dz, self.floor)
    }
}

/// Iterates the update `params.iterations` times and returns
/// `(ρ_XY^{1/2} ⊗ I) ρ_{N+1}(Z|X,Y) (ρ_XY^{1/2} ⊗ I)`.
pub fn q_latent_search(
    rho_xy: &DensityMatrix,
    params: &QuantumSearchParams,
    init: Option<&ConditionalState>,
) -> Result<DensityMatrix> {
    q_latent_search_observed(rho_xy, params, init, |_, _| {})
}

/// As [`q_latent_search`], calling `observer(i, ρ^i_XYZ)` for every formed
/// joint, i = 0 for the initial one through i = N for the returned one.
pub fn q_latent_search_observed(
    rho_xy: &DensityMatrix,
    params: &QuantumSearchParams,
    init: Option<&ConditionalState>,
    mut observer: impl FnMut(usize, &CMatrix),
) -> Result<DensityMatrix> {
    params.validate()?;
    let layout = xyz_layout(rho_xy, params.dim_z)?;
    let dims = layout.dims();
    let mut cond = match init {
        Some(c) => {
            if c.layout().dims() != dims {
                return Err(Error::DimensionMismatch(format!(
                    "initial conditional has dims {:?}, expected {dims:?}",
                    c.layout().dims()
                )));
            }
            c.mat().clone()
        }
        None => random_conditional_for(&layout, params.seed)?.mat().clone(),
    };
    let searcher = Searcher {
        dx: dims[0],
        dy: dims[1],
        dz: dims[2],
        sqrt_xy: sqrt_psd(rho_xy.mat())?,
        beta: params.beta,
        floor: params.eig_floor,
        rule: params.rule,
    };
    for i in 0..params.iterations {
        let wrap = |e: Error| Error::AtIteration {
            iteration: i,
            source: Box::new(e),
        };
        let joint = searcher.joint(&cond).map_err(wrap)?;
        observer(i, &joint);
        cond = searcher.update(&joint, &layout).map_err(wrap)?;
    }
    let joint = searcher.joint(&cond)?;
    observer(params.iterations, &joint);
    let tr = trace(&joint).re;
    DensityMatrix::new(joint / c64(tr, 0.0), layout)
}

/// θ = α·min(S(X), S(Y)).
pub fn q_theta(rho_xy: &DensityMatrix, alpha: f64) -> Result<f64> {
    let labels = rho_xy.layout().labels();
    if labels.len() != 2 {
        return Err(Error::InvalidLayout("expected a two-factor state".into()));
    }
    let sx = entropy_of(rho_xy.reduce(&[labels[0]])?.mat())?;
    let sy = entropy_of(rho_xy.reduce(&[labels[1]])?.mat())?;
    Ok(alpha * sx.min(sy))
}

/// Settings shared by every run of a β sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRuns {
    pub iterations: usize,
    pub dim_z: usize,
    pub restarts: usize,
    pub rule: UpdateRule,
}

/// Final (β, I(X;Y|Z), S(Z)) of every β and restart, β-major. Run seeds
/// are derived from `seed` and the (β, restart) indices.
pub fn q_trade_off(rho_xy: &DensityMatrix, betas: &[f64], runs: &SweepRuns, seed: u64) -> Result<Vec<BetaRun>> {
    if betas.is_empty() || runs.restarts == 0 {
        return Err(Error::InvalidParameter("need at least one β and one restart".into()));
    }
    let jobs: Vec<(usize, usize)> = (0..betas.len())
        .flat_map(|b| (0..runs.restarts).map(move |r| (b, r)))
        .collect();
    jobs.par_iter()
        .map(|&(b, r)| {
            let params = QuantumSearchParams {
                rule: runs.rule,
                ..QuantumSearchParams::new(betas[b], runs.iterations, runs.dim_z, derive_seed(seed, &[b as u64, r as u64]))
            };
            let rho = q_latent_search(rho_xy, &params, None)?;
            let labels = rho.layout().labels();
            let cmi = qcmi(&rho, [labels[0], labels[1], labels[2]])?;
            let entropy_z = entropy_of(rho.reduce(&[labels[2]])?.mat())?;
            Ok(BetaRun {
                beta: betas[b],
                restart: r,
                cmi,
                entropy_z,
            })
        })
        .collect()
}

/// One default-rule search per β followed by the latent-graph decision.
pub fn q_infer_graph(
    rho_xy: &DensityMatrix,
    threshold: f64,
    alpha: f64,
    betas: &[f64],
    iterations: usize,
    dim_z: usize,
    seed: u64,
) -> Result<QuantumVerdict> {
    let runs = SweepRuns {
        iterations,
        dim_z,
        restarts: 1,
        rule: UpdateRule::Ordered,
    };
    let per_beta = q_trade_off(rho_xy, betas, &runs, seed)?;
    Ok(decide(per_beta, q_theta(rho_xy, alpha)?, threshold))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classical::{latent_search_observed, ConditionalTable, JointPmf, SearchParams};
    use crate::qmath::{embed_identity, from_real_diagonal, max_abs, reduce_to};
    use crate::states::from_pmf_diagonal;
    use proptest::prelude::*;
    use rand::Rng;

    fn layout(spec: &[(&str, usize)]) -> SystemLayout {
        SystemLayout::new(spec.iter().map(|&(l, d)| (l, d))).unwrap()
    }

    fn random_state(dims: &[(&str, usize)], rank: usize, seed: u64) -> DensityMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l = layout(dims);
        let n = l.total_dim();
        let g = CMatrix::from_fn(n, rank, |_, _| c64(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let m = &g * g.adjoint();
        let t = trace(&m);
        DensityMatrix::new(hermitize(&(m / t)).unwrap(), l).unwrap()
    }

    fn random_pmf(supports: Vec<usize>, seed: u64) -> JointPmf {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let size: usize = supports.iter().product();
        let raw: Vec<f64> = (0..size).map(|_| rng.random::<f64>() + 1e-2).collect();
        JointPmf::normalized(supports, raw).unwrap()
    }

    #[test]
    fn structured_product_matches_embedded_dense_product() {
        let rho = random_state(&[("X", 2), ("Y", 3), ("Z", 2)], 12, 1);
        let l = rho.layout().clone();
        let s = Searcher {
            dx: 2,
            dy: 3,
            dz: 2,
            sqrt_xy: identity(6),
            beta: 0.5,
            floor: EIG_FLOOR,
            rule: UpdateRule::Ordered,
        };
        let (rxz, lxz) = reduce_to(rho.mat(), &l, &["X", "Z"]).unwrap();
        let (ryz, lyz) = reduce_to(rho.mat(), &l, &["Y", "Z"]).unwrap();
        let a = embed_identity(&rxz, &lxz, &l).unwrap();
        let b = embed_identity(&ryz, &lyz, &l).unwrap();
        assert!(max_abs(&(s.product(&rxz, &ryz) - &a * &b)) < 1e-14);
        assert!(max_abs(&(s.product_reversed(&rxz, &ryz) - &b * &a)) < 1e-14);
    }

    #[test]
    fn update_matches_dense_reference() {
        // The literal construction: embed, sandwich with full-size inverse
        // square roots, multiply, repair.
        let rho_xy = random_state(&[("X", 2), ("Y", 2)], 4, 3);
        let l = layout(&[("X", 2), ("Y", 2), ("Z", 2)]);
        let init = random_conditional_init((2, 2, 2), 5).unwrap();
        let beta = 0.75;
        let s = Searcher {
            dx: 2,
            dy: 2,
            dz: 2,
            sqrt_xy: sqrt_psd(rho_xy.mat()).unwrap(),
            beta,
            floor: EIG_FLOOR,
            rule: UpdateRule::Ordered,
        };
        let joint = s.joint(init.mat()).unwrap();
        let fast = s.update(&joint, &l).unwrap();

        let (rxz, lxz) = reduce_to(&joint, &l, &["X", "Z"]).unwrap();
        let (rx, lx) = reduce_to(&joint, &l, &["X"]).unwrap();
        let (ryz, lyz) = reduce_to(&joint, &l, &["Y", "Z"]).unwrap();
        let (ry, ly) = reduce_to(&joint, &l, &["Y"]).unwrap();
        let (rz, lz) = reduce_to(&joint, &l, &["Z"]).unwrap();
        let kx = embed_identity(&inv_sqrt_psd(&hermitize(&rx).unwrap(), EIG_FLOOR).unwrap(), &lx, &l).unwrap();
        let ky = embed_identity(&inv_sqrt_psd(&hermitize(&ry).unwrap(), EIG_FLOOR).unwrap(), &ly, &l).unwrap();
        let zx = &kx * embed_identity(&rxz, &lxz, &l).unwrap() * &kx;
        let zy = &ky * embed_identity(&ryz, &lyz, &l).unwrap() * &ky;
        let pz = embed_identity(&power_psd(&hermitize(&rz).unwrap(), beta - 1.0, EIG_FLOOR).unwrap(), &lz, &l).unwrap();
        let m = hermitize(&(pz * zx * zy)).unwrap();
        let m = eig_hermitian(&m).unwrap().reconstruct_with(|v| v.max(0.0));
        let (w, lw) = reduce_to(&m, &l, &["X", "Y"]).unwrap();
        let kw = embed_identity(&inv_sqrt_psd(&hermitize(&w).unwrap(), EIG_FLOOR).unwrap(), &lw, &l).unwrap();
        let slow = &kw * m * &kw;
        assert!(max_abs(&(fast - slow)) < 1e-10);
    }

    #[test]
    fn loss_examples() {
        let x = random_state(&[("X", 2)], 2, 7);
        let y = random_state(&[("Y", 2)], 2, 8);
        let z = DensityMatrix::new(from_real_diagonal(&[1.0, 0.0]), layout(&[("Z", 2)])).unwrap();
        let prod = x.tensor(&y).unwrap().tensor(&z).unwrap();
        let (l, le) = q_loss(&prod, 0.5, ["X", "Y", "Z"]).unwrap();
        assert!(l.abs() < 1e-10 && le.abs() < 1e-10);

        let q = random_pmf(vec![2, 2, 2], 9);
        let rho = from_pmf_diagonal(&q, layout(&[("X", 2), ("Y", 2), ("Z", 2)])).unwrap();
        let (l, _) = q_loss(&rho, 0.3, ["X", "Y", "Z"]).unwrap();
        let want = crate::classical::classical_cmi(&q).unwrap() + 0.3 * q.marginal(&[2]).entropy();
        assert!((l - want).abs() < 1e-10);

        let rho = random_state(&[("X", 2), ("Y", 2), ("Z", 2)], 3, 10);
        let (l, _) = q_loss(&rho, 0.0, ["X", "Y", "Z"]).unwrap();
        assert_eq!(l, qcmi(&rho, ["X", "Y", "Z"]).unwrap());
    }

    #[test]
    fn random_init_is_conditional_and_deterministic() {
        let a = random_conditional_init((2, 3, 2), 11).unwrap();
        let b = random_conditional_init((2, 3, 2), 11).unwrap();
        assert_eq!(a, b);
        assert!(a.identity_defect().unwrap() < 1e-10);
        assert!(ConditionalState::new(a.mat().clone(), a.layout().clone(), a.conditioned().to_vec()).is_ok());
        let t = random_conditional_init((2, 2, 1), 3).unwrap();
        assert_eq!(t.mat(), &identity(4));
    }

    #[test]
    fn normalize_examples() {
        let c = random_conditional_init((2, 2, 2), 12).unwrap();
        let again = normalize_conditional(c.mat(), c.layout()).unwrap();
        assert!(max_abs(&(again.mat() - c.mat())) < 1e-10);
        let scaled = normalize_conditional(&(c.mat() * c64(3.7, 0.0)), c.layout()).unwrap();
        assert!(max_abs(&(scaled.mat() - c.mat())) < 1e-10);

        let weights = [0.2, 0.6, 1.0, 1.0, 0.5, 0.5, 3.0, 1.0];
        let m = from_real_diagonal(&weights);
        let l = layout(&[("X", 2), ("Y", 2), ("Z", 2)]);
        let n = normalize_conditional(&m, &l).unwrap();
        for cell in 0..4 {
            let f = weights[2 * cell] + weights[2 * cell + 1];
            for z in 0..2 {
                let i = 2 * cell + z;
                assert!((n.mat()[(i, i)].re - weights[i] / f).abs() < 1e-12);
            }
        }
        assert!(normalize_conditional(&CMatrix::zeros(8, 8), &l).is_err());
    }

    #[test]
    fn normalize_fills_kernel() {
        let l = layout(&[("X", 2), ("Y", 1), ("Z", 2)]);
        let m = from_real_diagonal(&[0.3, 0.7, 0.0, 0.0]);
        let n = normalize_conditional(&m, &l).unwrap();
        assert!(n.identity_defect().unwrap() < 1e-12);
        assert!((n.mat()[(2, 2)].re - 0.5).abs() < 1e-15);
    }

    fn product_state_runs(betas: &[f64], rule: UpdateRule) -> Vec<BetaRun> {
        let x = random_state(&[("X", 2)], 2, 13);
        let y = random_state(&[("Y", 2)], 2, 14);
        let rho = x.tensor(&y).unwrap();
        let runs = SweepRuns {
            iterations: 300,
            dim_z: 2,
            restarts: 1,
            rule,
        };
        q_trade_off(&rho, betas, &runs, 1).unwrap()
    }

    #[test]
    fn product_state_reaches_trivial_latent_near_beta_one() {
        let per = product_state_runs(&[0.95], UpdateRule::Ordered);
        assert!(per[0].cmi <= 1e-4 && per[0].entropy_z <= 1e-3, "{per:?}");
    }

    // The hermitized ordered product amplifies coherences in the small
    // eigenvalue direction of rho_Z, so moderate beta settles on a mixed
    // fixed point with I_Q = 0 but S(Z) well above zero.
    #[test]
    fn product_state_stalls_at_moderate_beta() {
        let per = product_state_runs(&[0.75], UpdateRule::Ordered);
        assert!(per[0].cmi <= 1e-4, "{per:?}");
        assert!(per[0].entropy_z > 0.1, "{per:?}");
    }

    #[test]
    fn tr_z_recovers_input_every_iteration() {
        let rho = random_state(&[("X", 2), ("Y", 2)], 3, 15);
        let l = layout(&[("X", 2), ("Y", 2), ("Z", 2)]);
        for rule in [UpdateRule::Ordered, UpdateRule::Symmetrized] {
            let params = QuantumSearchParams {
                rule,
                ..QuantumSearchParams::new(0.75, 30, 2, 3)
            };
            let out = q_latent_search_observed(&rho, &params, None, |_, j| {
                let (back, _) = partial_trace(j, &l, &["Z"]).unwrap();
                assert!(max_abs(&(back - rho.mat())) < 1e-8);
            })
            .unwrap();
            assert_eq!(out.layout().labels(), vec!["X", "Y", "Z"]);
        }
    }

    #[test]
    fn diagonal_inputs_follow_classical_trajectory() {
        let p = random_pmf(vec![3, 2], 16);
        let rho = from_pmf_diagonal(&p, layout(&[("X", 3), ("Y", 2)])).unwrap();
        let table = ConditionalTable::random(3, 2, 3, 4);
        let init = ConditionalState::from_classical(&table, ["X", "Y", "Z"]).unwrap();
        let mut classical = vec![];
        latent_search_observed(
            &p,
            &SearchParams {
                beta: 0.6,
                iterations: 20,
                seed: 0,
                dim_z: 3,
            },
            Some(&table),
            |_, q| classical.push(q.probs().to_vec()),
        )
        .unwrap();
        let mut step = 0;
        q_latent_search_observed(&rho, &QuantumSearchParams::new(0.6, 20, 3, 0), Some(&init), |i, j| {
            assert_eq!(i, step);
            for r in 0..j.nrows() {
                for c in 0..j.ncols() {
                    let want = if r == c { classical[i][r] } else { 0.0 };
                    assert!((j[(r, c)].re - want).abs() < 1e-10 && j[(r, c)].im.abs() < 1e-10);
                }
            }
            step += 1;
        })
        .unwrap();
        assert_eq!(step, 21);
    }

    #[test]
    fn infer_reports_every_beta() {
        let rho = random_state(&[("X", 2), ("Y", 2)], 4, 17);
        let v = q_infer_graph(&rho, 0.05, 0.8, &[0.75], 20, 2, 1).unwrap();
        assert_eq!(v.per_beta.len(), 1);
        let again = q_infer_graph(&rho, 0.05, 0.8, &[0.75], 20, 2, 1).unwrap();
        assert_eq!(v, again);
    }

    #[test]
    fn rejects_bad_inputs() {
        let rho = random_state(&[("X", 2), ("Z", 2)], 4, 18);
        assert!(q_latent_search(&rho, &QuantumSearchParams::new(0.5, 3, 2, 0), None).is_err());
        let rho = random_state(&[("X", 2), ("Y", 2)], 4, 18);
        assert!(q_latent_search(&rho, &QuantumSearchParams::new(0.5, 0, 2, 0), None).is_err());
        let wrong = random_conditional_init((2, 2, 3), 0).unwrap();
        assert!(q_latent_search(&rho, &QuantumSearchParams::new(0.5, 3, 2, 0), Some(&wrong)).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn prop_outputs_recover_marginal_and_losses_agree(seed in any::<u64>(), beta in 0.05f64..0.95, rank in 1usize..5) {
            let rho = random_state(&[("X", 2), ("Y", 2)], rank, seed);
            let params = QuantumSearchParams::new(beta, 25, 2, seed);
            let l = layout(&[("X", 2), ("Y", 2), ("Z", 2)]);
            let out = q_latent_search_observed(&rho, &params, None, |_, j| {
                let tr = trace(j).re;
                let st = DensityMatrix::new(j / c64(tr, 0.0), l.clone()).unwrap();
                let (a, b) = q_loss(&st, beta, ["X", "Y", "Z"]).unwrap();
                assert!((a - b).abs() < 1e-6);
            }).unwrap();
            let (back, _) = partial_trace(out.mat(), out.layout(), &["Z"]).unwrap();
            prop_assert!(max_abs(&(back - rho.mat())) < 1e-8);
            let i = qcmi(&out, ["X", "Y", "Z"]).unwrap();
            let sz = entropy_of(out.reduce(&["Z"]).unwrap().mat()).unwrap();
            prop_assert!(i >= -1e-6);
            prop_assert!((-1e-12..=1.0 + 1e-8).contains(&sz));
        }
    }
}
