//! Validated density matrices, conditional states and von Neumann entropies.

use num_complex::Complex64;

use crate::classical::JointPmf;
use crate::error::{Error, Result};
use crate::qmath::{
    c64, eig_hermitian, embed_identity, from_real_diagonal, hermiticity_defect, hermitize, identity, inv_sqrt_psd,
    kron, max_abs, partial_trace, reduce_to, trace, CMatrix, SystemLayout, EIG_FLOOR,
};

/// Tolerance for Hermiticity, unit trace and positivity of states.
pub const STATE_TOL: f64 = 1e-10;
/// Tolerance for the partial-trace identity of conditional states.
pub const CONDITIONAL_TOL: f64 = 1e-8;
/// Projected traces below this make an instance conditional undefined.
pub const INSTANCE_CUTOFF: f64 = 1e-12;

fn validate_state(mat: &CMatrix, layout: &SystemLayout) -> Result<()> {
    layout.check_matrix(mat)?;
    crate::qmath::check_finite(mat)?;
    let defect = hermiticity_defect(mat);
    if defect > STATE_TOL {
        return Err(Error::InvalidState(format!("not Hermitian (defect {defect:e})")));
    }
    let tr = trace(mat);
    if (tr.re - 1.0).abs() > STATE_TOL || tr.im.abs() > STATE_TOL {
        return Err(Error::InvalidState(format!("trace is {tr}")));
    }
    let spec = eig_hermitian(&hermitize(mat)?)?;
    let min = spec.values.last().copied().unwrap_or(0.0);
    if min < -STATE_TOL {
        return Err(Error::InvalidState(format!("negative eigenvalue {min:e}")));
    }
    Ok(())
}

/// Hermitian PSD unit-trace operator on a named tensor product.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    mat: CMatrix,
    layout: SystemLayout,
}

impl DensityMatrix {
    pub fn new(mat: CMatrix, layout: SystemLayout) -> Result<Self> {
        validate_state(&mat, &layout)?;
        Ok(Self { mat, layout })
    }

    /// Hermitizes, clips negative eigenvalues and renormalizes the trace
    /// before validating. Only use when the input is known to carry
    /// rounding noise.
    pub fn repaired(mat: CMatrix, layout: SystemLayout) -> Result<Self> {
        layout.check_matrix(&mat)?;
        let spec = eig_hermitian(&hermitize(&mat)?)?;
        let clipped = spec.reconstruct_with(|l| l.max(0.0));
        let tr = trace(&clipped).re;
        if !(tr > 0.0) {
            return Err(Error::InvalidState("no positive part to renormalize".into()));
        }
        Self::new(clipped / c64(tr, 0.0), layout)
    }

    pub(crate) fn from_trusted(mat: CMatrix, layout: SystemLayout) -> Self {
        debug_assert_eq!(mat.nrows(), layout.total_dim());
        Self { mat, layout }
    }

    pub fn pure(ket: &KetVector, layout: SystemLayout) -> Result<Self> {
        Self::new(ket.projector(), layout)
    }

    pub fn mat(&self) -> &CMatrix {
        &self.mat
    }

    pub fn layout(&self) -> &SystemLayout {
        &self.layout
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn into_parts(self) -> (CMatrix, SystemLayout) {
        (self.mat, self.layout)
    }

    /// Marginal state on the named factors (kept in layout order).
    pub fn reduce(&self, keep: &[&str]) -> Result<DensityMatrix> {
        let (m, l) = reduce_to(&self.mat, &self.layout, keep)?;
        Ok(Self::from_trusted(hermitize(&m)?, l))
    }

    pub fn tensor(&self, other: &DensityMatrix) -> Result<DensityMatrix> {
        let layout = SystemLayout::new(
            self.layout
                .factors()
                .iter()
                .chain(other.layout.factors())
                .map(|f| (f.label.clone(), f.dim)),
        )?;
        Ok(Self::from_trusted(kron(&self.mat, &other.mat), layout))
    }

    pub fn relabel(self, labels: &[&str]) -> Result<DensityMatrix> {
        if labels.len() != self.layout.len() {
            return Err(Error::InvalidLayout("label count differs from factor count".into()));
        }
        let layout = SystemLayout::new(labels.iter().zip(self.layout.dims()).map(|(l, d)| (*l, d)))?;
        Ok(Self { mat: self.mat, layout })
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        Ok(eig_hermitian(&self.mat)?.values)
    }

    /// Mixture `Σ wᵢ ρᵢ` of states sharing a layout.
    pub fn mixture(parts: &[(f64, &DensityMatrix)]) -> Result<DensityMatrix> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidParameter("empty mixture".into()))?
            .1;
        let mut acc = CMatrix::zeros(first.dim(), first.dim());
        for (w, rho) in parts {
            if rho.layout != first.layout {
                return Err(Error::DimensionMismatch("mixture components differ in layout".into()));
            }
            acc += rho.mat() * c64(*w, 0.0);
        }
        Self::new(hermitize(&acc)?, first.layout.clone())
    }
}

/// Operator ρ(A|B) whose partial trace over the unconditioned factors is
/// the identity on the conditioned ones.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalState {
    mat: CMatrix,
    layout: SystemLayout,
    conditioned: Vec<String>,
}

impl ConditionalState {
    pub fn new(mat: CMatrix, layout: SystemLayout, conditioned: Vec<String>) -> Result<Self> {
        layout.check_matrix(&mat)?;
        for l in &conditioned {
            layout.position(l)?;
        }
        let s = Self {
            mat,
            layout,
            conditioned,
        };
        let defect = hermiticity_defect(&s.mat);
        if defect > STATE_TOL {
            return Err(Error::InvalidState(format!("conditional not Hermitian (defect {defect:e})")));
        }
        let min = eig_hermitian(&hermitize(&s.mat)?)?.values.last().copied().unwrap_or(0.0);
        if min < -STATE_TOL {
            return Err(Error::InvalidState(format!("conditional has eigenvalue {min:e}")));
        }
        let err = s.identity_defect()?;
        if err > CONDITIONAL_TOL {
            return Err(Error::InvalidState(format!(
                "partial trace deviates from identity by {err:e}"
            )));
        }
        Ok(s)
    }

    pub(crate) fn from_trusted(mat: CMatrix, layout: SystemLayout, conditioned: Vec<String>) -> Self {
        Self {
            mat,
            layout,
            conditioned,
        }
    }

    /// Diagonal embedding of a classical q(z|x,y) table over (X, Y, Z).
    pub fn from_classical(table: &crate::classical::ConditionalTable, labels: [&str; 3]) -> Result<Self> {
        let (r, m, n) = table.dims();
        let layout = SystemLayout::new([(labels[0], r), (labels[1], m), (labels[2], n)])?;
        Self::new(
            from_real_diagonal(table.probs()),
            layout,
            vec![labels[0].to_string(), labels[1].to_string()],
        )
    }

    pub fn mat(&self) -> &CMatrix {
        &self.mat
    }

    pub fn layout(&self) -> &SystemLayout {
        &self.layout
    }

    pub fn conditioned(&self) -> &[String] {
        &self.conditioned
    }

    /// Largest entry of `Tr_free(M) − I`.
    pub fn identity_defect(&self) -> Result<f64> {
        let free: Vec<&str> = self
            .layout
            .labels()
            .into_iter()
            .filter(|l| !self.conditioned.iter().any(|c| c == l))
            .collect();
        let (m, _) = partial_trace(&self.mat, &self.layout, &free)?;
        Ok(max_abs(&(m - identity(self.mat.nrows() / self.free_dim()))))
    }

    fn free_dim(&self) -> usize {
        self.layout
            .factors()
            .iter()
            .filter(|f| !self.conditioned.contains(&f.label))
            .map(|f| f.dim)
            .product()
    }
}

/// Unit-norm state vector.
#[derive(Debug, Clone, PartialEq)]
pub struct KetVector {
    amps: Vec<Complex64>,
}

impl KetVector {
    pub fn new(amps: Vec<Complex64>) -> Result<Self> {
        let norm = amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if amps.is_empty() || (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidState(format!("ket norm is {norm}")));
        }
        Ok(Self { amps })
    }

    pub fn normalized(amps: Vec<Complex64>) -> Result<Self> {
        let norm = amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::InvalidState("zero ket".into()));
        }
        Self::new(amps.into_iter().map(|z| z / norm).collect())
    }

    pub fn real(amps: &[f64]) -> Result<Self> {
        Self::new(amps.iter().map(|&a| c64(a, 0.0)).collect())
    }

    pub fn basis(dim: usize, index: usize) -> Result<Self> {
        if index >= dim {
            return Err(Error::InvalidParameter(format!("basis index {index} ≥ {dim}")));
        }
        let mut amps = vec![c64(0.0, 0.0); dim];
        amps[index] = c64(1.0, 0.0);
        Ok(Self { amps })
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn tensor(&self, other: &KetVector) -> KetVector {
        let amps = self
            .amps
            .iter()
            .flat_map(|a| other.amps.iter().map(move |b| a * b))
            .collect();
        KetVector { amps }
    }

    /// |v⟩⟨v|.
    pub fn projector(&self) -> CMatrix {
        let n = self.amps.len();
        CMatrix::from_fn(n, n, |i, j| self.amps[i] * self.amps[j].conj())
    }
}

/// Diagonal state whose diagonal is the row-major probability table.
pub fn from_pmf_diagonal(p: &JointPmf, layout: SystemLayout) -> Result<DensityMatrix> {
    if layout.dims() != p.supports() {
        return Err(Error::DimensionMismatch(format!(
            "layout dims {:?} vs supports {:?}",
            layout.dims(),
            p.supports()
        )));
    }
    DensityMatrix::new(from_real_diagonal(p.probs()), layout)
}

/// Entropy in bits of the spectrum of a Hermitian PSD matrix, treating
/// nonpositive eigenvalues as zero.
pub fn entropy_of(mat: &CMatrix) -> Result<f64> {
    let spec = eig_hermitian(mat)?;
    let s: f64 = spec
        .values
        .iter()
        .filter(|&&l| l > 0.0)
        .map(|&l| -l * l.log2())
        .sum();
    Ok(s.max(0.0))
}

/// S(ρ) = −Tr ρ log₂ ρ.
pub fn vn_entropy(rho: &DensityMatrix) -> Result<f64> {
    entropy_of(rho.mat())
}

/// ρ_{A|B} = (I ⊗ ρ_B^{-1/2}) ρ (I ⊗ ρ_B^{-1/2}) with a pseudo-inverse on
/// singular marginals.
pub fn conditional_state(rho: &DensityMatrix, given: &str) -> Result<ConditionalState> {
    let layout = rho.layout();
    layout.position(given)?;
    let (rb, lb) = reduce_to(rho.mat(), layout, &[given])?;
    let k = inv_sqrt_psd(&hermitize(&rb)?, EIG_FLOOR)?;
    let e = embed_identity(&k, &lb, layout)?;
    let out = hermitize(&(&e * rho.mat() * &e))?;
    Ok(ConditionalState::from_trusted(out, layout.clone(), vec![given.to_string()]))
}

/// State of the remaining factors after projecting `given` onto |y⟩.
pub fn instance_conditional(rho: &DensityMatrix, given: &str, y: &KetVector) -> Result<DensityMatrix> {
    let layout = rho.layout();
    let dy = layout.dim_of(given)?;
    if y.dim() != dy {
        return Err(Error::DimensionMismatch(format!(
            "ket of dimension {} for factor `{given}` of dimension {dy}",
            y.dim()
        )));
    }
    let ly = layout.select(&[given])?;
    let p = embed_identity(&y.projector(), &ly, layout)?;
    let projected = &p * rho.mat() * &p;
    let (rest, lrest) = partial_trace(&projected, layout, &[given])?;
    let tr = trace(&rest).re;
    if !(tr > INSTANCE_CUTOFF) {
        return Err(Error::ZeroProbabilityInstance(tr));
    }
    DensityMatrix::new(hermitize(&(rest / c64(tr, 0.0)))?, lrest)
}

fn entropy_of_marginal(mat: &CMatrix, layout: &SystemLayout, keep: &[&str]) -> Result<f64> {
    let (m, _) = reduce_to(mat, layout, keep)?;
    entropy_of(&hermitize(&m)?)
}

/// I(X;Y|Z) = S(XZ) + S(YZ) − S(Z) − S(XYZ) for a three-factor state.
pub fn qcmi(rho: &DensityMatrix, labels: [&str; 3]) -> Result<f64> {
    let l = rho.layout();
    if l.len() != 3 {
        return Err(Error::InvalidLayout(format!("expected 3 factors, found {}", l.len())));
    }
    let [x, y, z] = labels;
    let m = rho.mat();
    Ok(entropy_of_marginal(m, l, &[x, z])? + entropy_of_marginal(m, l, &[y, z])?
        - entropy_of_marginal(m, l, &[z])?
        - entropy_of(m)?)
}

/// I(X;Y) = S(X) + S(Y) − S(XY) for a two-factor state.
pub fn quantum_mi(rho: &DensityMatrix) -> Result<f64> {
    let l = rho.layout();
    if l.len() != 2 {
        return Err(Error::InvalidLayout(format!("expected 2 factors, found {}", l.len())));
    }
    let labels = l.labels();
    let m = rho.mat();
    Ok(entropy_of_marginal(m, l, &[labels[0]])? + entropy_of_marginal(m, l, &[labels[1]])? - entropy_of(m)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classical::{classical_cmi, mutual_information, shannon_entropy};
    use crate::qmath::sqrt_psd;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn layout(spec: &[(&str, usize)]) -> SystemLayout {
        SystemLayout::new(spec.iter().map(|&(l, d)| (l, d))).unwrap()
    }

    fn random_state(dims: &[(&str, usize)], rank: usize, rng: &mut ChaCha8Rng) -> DensityMatrix {
        let l = layout(dims);
        let n = l.total_dim();
        let g = CMatrix::from_fn(n, rank, |_, _| c64(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let m = &g * g.adjoint();
        let t = trace(&m);
        DensityMatrix::new(hermitize(&(m / t)).unwrap(), l).unwrap()
    }

    fn random_pmf(supports: Vec<usize>, rng: &mut ChaCha8Rng) -> JointPmf {
        let size: usize = supports.iter().product();
        let raw: Vec<f64> = (0..size).map(|_| rng.random::<f64>() + 1e-3).collect();
        JointPmf::normalized(supports, raw).unwrap()
    }

    fn bell() -> DensityMatrix {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let k = KetVector::real(&[r, 0.0, 0.0, r]).unwrap();
        DensityMatrix::pure(&k, layout(&[("X", 2), ("Y", 2)])).unwrap()
    }

    #[test]
    fn validation_rejects_bad_states() {
        let l = layout(&[("A", 2)]);
        assert!(DensityMatrix::new(identity(2), l.clone()).is_err());
        assert!(DensityMatrix::new(from_real_diagonal(&[1.5, -0.5]), l.clone()).is_err());
        let mut m = from_real_diagonal(&[0.5, 0.5]);
        m[(0, 1)] = c64(0.1, 0.0);
        assert!(DensityMatrix::new(m, l.clone()).is_err());
        assert!(DensityMatrix::new(from_real_diagonal(&[0.5, 0.5]), l).is_ok());
    }

    #[test]
    fn repair_fixes_rounding_noise() {
        let l = layout(&[("A", 2)]);
        let mut m = from_real_diagonal(&[1.0 + 1e-9, -1e-9]);
        m[(0, 1)] = c64(1e-9, 0.0);
        assert!(DensityMatrix::new(m.clone(), l.clone()).is_err());
        let r = DensityMatrix::repaired(m, l).unwrap();
        assert_relative_eq!(trace(r.mat()).re, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn pmf_diagonal_examples() {
        let u = JointPmf::new(vec![2, 2], vec![0.25; 4]).unwrap();
        let rho = from_pmf_diagonal(&u, layout(&[("X", 2), ("Y", 2)])).unwrap();
        assert!(max_abs(&(rho.mat() - identity(4) * c64(0.25, 0.0))) < 1e-15);

        let point = JointPmf::new(vec![2, 2], vec![0.0, 1.0, 0.0, 0.0]).unwrap();
        let rho = from_pmf_diagonal(&point, layout(&[("X", 2), ("Y", 2)])).unwrap();
        assert!(vn_entropy(&rho).unwrap().abs() < 1e-15);

        let (p, _) = crate::models::bsc2_latent(0.4, 0.1, 0.1).unwrap();
        let rho = from_pmf_diagonal(&p, layout(&[("X", 4), ("Y", 4)])).unwrap();
        let direct: f64 = p.probs().iter().filter(|&&v| v > 0.0).map(|&v| -v * v.log2()).sum();
        assert!((vn_entropy(&rho).unwrap() - direct).abs() < 1e-12);

        assert!(from_pmf_diagonal(&u, layout(&[("X", 4)])).is_err());
    }

    #[test]
    fn entropy_examples() {
        assert!(vn_entropy(&bell()).unwrap().abs() < 1e-12);
        let mixed = DensityMatrix::new(identity(2) * c64(0.5, 0.0), layout(&[("A", 2)])).unwrap();
        assert_relative_eq!(vn_entropy(&mixed).unwrap(), 1.0, epsilon = 1e-14);
        let d = DensityMatrix::new(from_real_diagonal(&[0.4, 0.6]), layout(&[("A", 2)])).unwrap();
        let h2 = -(0.4f64 * 0.4f64.log2() + 0.6 * 0.6f64.log2());
        assert_relative_eq!(vn_entropy(&d).unwrap(), h2, epsilon = 1e-14);
        assert_relative_eq!(vn_entropy(&d).unwrap(), 0.97095, epsilon = 1e-5);
    }

    #[test]
    fn conditional_of_product_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random_state(&[("X", 2)], 2, &mut rng);
        let b = random_state(&[("Y", 3)], 3, &mut rng);
        let c = conditional_state(&a.tensor(&b).unwrap(), "Y").unwrap();
        let want = kron(a.mat(), &identity(3));
        assert!(max_abs(&(c.mat() - want)) < 1e-10);
    }

    #[test]
    fn conditional_of_classical_diagonal() {
        let p = JointPmf::new(vec![2, 2], vec![0.1, 0.3, 0.2, 0.4]).unwrap();
        let rho = from_pmf_diagonal(&p, layout(&[("X", 2), ("Y", 2)])).unwrap();
        let c = conditional_state(&rho, "Y").unwrap();
        let py = [0.3, 0.7];
        for x in 0..2 {
            for y in 0..2 {
                let i = x * 2 + y;
                assert_relative_eq!(c.mat()[(i, i)].re, p.get(&[x, y]) / py[y], epsilon = 1e-12);
            }
        }
        assert!(c.identity_defect().unwrap() < 1e-8);
    }

    #[test]
    fn conditional_of_bell_state() {
        let c = conditional_state(&bell(), "Y").unwrap();
        assert!(c.identity_defect().unwrap() < 1e-8);
        assert!(ConditionalState::new(c.mat().clone(), c.layout().clone(), vec!["Y".into()]).is_ok());
    }

    #[test]
    fn instance_conditional_examples() {
        let p = JointPmf::new(vec![2, 2], vec![0.1, 0.3, 0.2, 0.4]).unwrap();
        let rho = from_pmf_diagonal(&p, layout(&[("X", 2), ("Y", 2)])).unwrap();
        let r = instance_conditional(&rho, "Y", &KetVector::basis(2, 0).unwrap()).unwrap();
        assert_relative_eq!(r.mat()[(0, 0)].re, 0.1 / 0.3, epsilon = 1e-12);
        assert_relative_eq!(r.mat()[(1, 1)].re, 0.2 / 0.3, epsilon = 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_state(&[("X", 2)], 2, &mut rng);
        let b = random_state(&[("Y", 2)], 2, &mut rng);
        let y = KetVector::normalized(vec![c64(0.3, 0.1), c64(-0.2, 0.7)]).unwrap();
        let r = instance_conditional(&a.tensor(&b).unwrap(), "Y", &y).unwrap();
        assert!(max_abs(&(r.mat() - a.mat())) < 1e-12);

        // Projecting the Bell state on |0⟩ leaves |0⟩⟨0|.
        let r = instance_conditional(&bell(), "Y", &KetVector::basis(2, 0).unwrap()).unwrap();
        assert!(max_abs(&(r.mat() - from_real_diagonal(&[1.0, 0.0]))) < 1e-14);
    }

    #[test]
    fn instance_conditional_zero_probability() {
        let p = JointPmf::new(vec![2, 2], vec![0.5, 0.0, 0.5, 0.0]).unwrap();
        let rho = from_pmf_diagonal(&p, layout(&[("X", 2), ("Y", 2)])).unwrap();
        let err = instance_conditional(&rho, "Y", &KetVector::basis(2, 1).unwrap()).unwrap_err();
        assert!(matches!(err, Error::ZeroProbabilityInstance(_)));
    }

    #[test]
    fn qcmi_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = random_state(&[("X", 2)], 2, &mut rng);
        let y = random_state(&[("Y", 2)], 2, &mut rng);
        let z = random_state(&[("Z", 2)], 2, &mut rng);
        let prod = x.tensor(&y).unwrap().tensor(&z).unwrap();
        assert!(qcmi(&prod, ["X", "Y", "Z"]).unwrap().abs() < 1e-8);

        let mut ghz = vec![0.0; 8];
        ghz[0] = 0.5;
        ghz[7] = 0.5;
        let q = JointPmf::new(vec![2, 2, 2], ghz).unwrap();
        let rho = from_pmf_diagonal(&q, layout(&[("X", 2), ("Y", 2), ("Z", 2)])).unwrap();
        assert!(qcmi(&rho, ["X", "Y", "Z"]).unwrap().abs() < 1e-8);

        assert!(qcmi(&x.tensor(&y).unwrap(), ["X", "Y", "Z"]).is_err());
    }

    #[test]
    fn qcmi_matches_classical_on_diagonals() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..120 {
            let q = random_pmf(vec![2, 2, 2], &mut rng);
            let rho = from_pmf_diagonal(&q, layout(&[("X", 2), ("Y", 2), ("Z", 2)])).unwrap();
            let diff = qcmi(&rho, ["X", "Y", "Z"]).unwrap() - classical_cmi(&q).unwrap();
            assert!(diff.abs() < 1e-10);
        }
    }

    #[test]
    fn quantum_mi_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = random_state(&[("X", 2)], 2, &mut rng);
        let y = random_state(&[("Y", 2)], 2, &mut rng);
        assert!(quantum_mi(&x.tensor(&y).unwrap()).unwrap().abs() < 1e-10);
        assert_relative_eq!(quantum_mi(&bell()).unwrap(), 2.0, epsilon = 1e-10);
        let p = random_pmf(vec![2, 3], &mut rng);
        let rho = from_pmf_diagonal(&p, layout(&[("X", 2), ("Y", 3)])).unwrap();
        assert!((quantum_mi(&rho).unwrap() - mutual_information(&p).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn ket_validation() {
        assert!(KetVector::real(&[1.0, 1.0]).is_err());
        assert!(KetVector::normalized(vec![c64(0.0, 0.0)]).is_err());
        let k = KetVector::normalized(vec![c64(3.0, 0.0), c64(0.0, 4.0)]).unwrap();
        assert_relative_eq!(k.amplitudes()[1].im, 0.8, epsilon = 1e-15);
        assert!(KetVector::basis(2, 2).is_err());
    }

    #[test]
    fn mixture_of_states() {
        let l = layout(&[("A", 2)]);
        let a = DensityMatrix::new(from_real_diagonal(&[1.0, 0.0]), l.clone()).unwrap();
        let b = DensityMatrix::new(from_real_diagonal(&[0.0, 1.0]), l).unwrap();
        let m = DensityMatrix::mixture(&[(0.25, &a), (0.75, &b)]).unwrap();
        assert_relative_eq!(shannon_entropy(&[0.25, 0.75]), vn_entropy(&m).unwrap(), epsilon = 1e-14);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn prop_entropy_additive(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_state(&[("A", 2)], 2, &mut rng);
            let b = random_state(&[("B", 3)], 2, &mut rng);
            let lhs = vn_entropy(&a.tensor(&b).unwrap()).unwrap();
            let rhs = vn_entropy(&a).unwrap() + vn_entropy(&b).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-10);
        }

        #[test]
        fn prop_entropy_bounded(seed in any::<u64>(), rank in 1usize..5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let r = random_state(&[("A", 2), ("B", 2)], rank, &mut rng);
            let s = vn_entropy(&r).unwrap();
            prop_assert!((0.0..=2.0 + 1e-12).contains(&s));
        }

        #[test]
        fn prop_conditional_sandwich_recovers_state(seed in any::<u64>(), rank in 1usize..7) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rho = random_state(&[("X", 2), ("Y", 3)], rank, &mut rng);
            let c = conditional_state(&rho, "Y").unwrap();
            let ry = rho.reduce(&["Y"]).unwrap();
            let s = embed_identity(&sqrt_psd(ry.mat()).unwrap(), ry.layout(), rho.layout()).unwrap();
            let back = &s * c.mat() * &s;
            prop_assert!(max_abs(&(back - rho.mat())) < 1e-8);
        }

        #[test]
        fn prop_qcmi_strong_subadditivity(seed in any::<u64>(), rank in 1usize..9) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rho = random_state(&[("X", 2), ("Y", 2), ("Z", 2)], rank, &mut rng);
            prop_assert!(qcmi(&rho, ["X", "Y", "Z"]).unwrap() >= -1e-8);
        }
    }
}
