//! Four-band BdG models in the basis `(c_k+, c_k-, c_-k-^dagger, c_-k+^dagger)`.

use crate::error::{OeeError, Result};
use crate::linalg::{self, CMat};
use crate::scalar::{cx, re, Cx, Real};
use faer::Mat;
use num_traits::{Float, Zero};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Momentum<T> {
    pub kx: T,
    pub ky: T,
}

impl<T: Real> Momentum<T> {
    pub fn new(kx: T, ky: T) -> Self {
        Momentum { kx, ky }
    }

    pub fn wrapped(self) -> Self {
        Momentum::new(crate::scalar::wrap_angle(self.kx), crate::scalar::wrap_angle(self.ky))
    }
}

/// One Fourier component `B e^{i k . (dx, dy)}` of a 2x2 matrix-valued function.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierTerm<T> {
    pub dx: i32,
    pub dy: i32,
    pub block: [[Cx<T>; 2]; 2],
}

/// Finite Fourier series of 2x2 matrices, `M(k) = sum_delta B_delta e^{i k . delta}`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FourierTable<T> {
    pub terms: Vec<FourierTerm<T>>,
}

impl<T: Real> FourierTable<T> {
    pub fn new(terms: Vec<FourierTerm<T>>) -> Self {
        FourierTable { terms }
    }

    pub fn eval(&self, k: Momentum<T>) -> CMat<T> {
        let mut m = linalg::zeros(2, 2);
        for t in &self.terms {
            let ph = crate::scalar::phase(k.kx * T::lit(t.dx as f64) + k.ky * T::lit(t.dy as f64));
            for i in 0..2 {
                for j in 0..2 {
                    m[(i, j)] += t.block[i][j] * ph;
                }
            }
        }
        m
    }

    fn summed_block(&self, dx: i32, dy: i32) -> [[Cx<T>; 2]; 2] {
        let mut b = [[Cx::zero(); 2]; 2];
        for t in self.terms.iter().filter(|t| t.dx == dx && t.dy == dy) {
            for i in 0..2 {
                for j in 0..2 {
                    b[i][j] += t.block[i][j];
                }
            }
        }
        b
    }

    /// Largest violation of `B_{-delta} = B_delta^dagger`; zero iff `M(k)` is Hermitian for all k.
    pub fn hermiticity_violation(&self) -> T {
        let mut worst = T::zero();
        for t in &self.terms {
            let b = self.summed_block(t.dx, t.dy);
            let m = self.summed_block(-t.dx, -t.dy);
            for i in 0..2 {
                for j in 0..2 {
                    worst = Float::max(worst, (m[i][j] - b[j][i].conj()).norm());
                }
            }
        }
        worst
    }

    pub fn is_finite(&self) -> bool {
        self.terms
            .iter()
            .all(|t| t.block.iter().flatten().all(|z| Float::is_finite(z.re) && Float::is_finite(z.im)))
    }
}

/// Normal-state vector `h(k)`.
#[derive(Debug, Clone, PartialEq)]
pub enum NormalState<T> {
    /// `h = (beta sin kx, beta sin ky, mu - t_q cos kx - t_q cos ky)`
    Qwz { mu: T, t_q: T, beta: T },
    /// `h = (alpha cos kx, alpha cos ky, t_s cos(kx + ky))`
    Sticlet { alpha: T, t_s: T },
    /// Arbitrary Hermitian 2x2 Bloch matrix; its identity part adds to `h0`.
    CustomFourier(FourierTable<T>),
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum ScalarTerm<T> {
    #[default]
    Zero,
    Constant(T),
}

impl<T: Real> ScalarTerm<T> {
    pub fn value(&self) -> T {
        match *self {
            ScalarTerm::Zero => T::zero(),
            ScalarTerm::Constant(c) => c,
        }
    }
}

/// Pairing vector `d(k)`; the gap matrix is `i Delta0 (d0 + d . sigma) sigma_y`.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum PairingVector<T> {
    #[default]
    Zero,
    /// `d = h`
    SameAsNormal,
    Constant([T; 3]),
    /// The full matrix `d0 + d . sigma` as a Fourier series; may be non-Hermitian (complex d).
    CustomFourier(FourierTable<T>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec<T> {
    pub normal: NormalState<T>,
    pub h0: ScalarTerm<T>,
    pub d0: ScalarTerm<T>,
    pub pairing: PairingVector<T>,
    pub delta0: T,
    /// Adds the uniform term `Delta0 tau_x (x) I`.
    pub h_prime: bool,
}

impl<T: Real> ModelSpec<T> {
    pub fn new(normal: NormalState<T>, delta0: T) -> Self {
        ModelSpec {
            normal,
            h0: ScalarTerm::Zero,
            d0: ScalarTerm::Zero,
            pairing: PairingVector::Zero,
            delta0,
            h_prime: false,
        }
    }

    pub fn qwz(mu: T, t_q: T, beta: T, delta0: T) -> Self {
        Self::new(NormalState::Qwz { mu, t_q, beta }, delta0)
    }

    pub fn sticlet(alpha: T, t_s: T, delta0: T) -> Self {
        Self::new(NormalState::Sticlet { alpha, t_s }, delta0)
    }

    pub fn with_pairing(mut self, pairing: PairingVector<T>) -> Self {
        self.pairing = pairing;
        self
    }

    pub fn with_h_prime(mut self, on: bool) -> Self {
        self.h_prime = on;
        self
    }

    pub fn with_h0(mut self, h0: ScalarTerm<T>) -> Self {
        self.h0 = h0;
        self
    }

    pub fn with_d0(mut self, d0: ScalarTerm<T>) -> Self {
        self.d0 = d0;
        self
    }

    /// Returns a copy with the chemical-potential-like mass replaced (QWZ only).
    pub fn with_mu(&self, mu: T) -> Result<Self> {
        match self.normal {
            NormalState::Qwz { t_q, beta, .. } => {
                let mut s = self.clone();
                s.normal = NormalState::Qwz { mu, t_q, beta };
                Ok(s)
            }
            _ => Err(OeeError::InvalidParameter("mu can only be swept on the QWZ normal state".into())),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fin = |x: T| Float::is_finite(x);
        let ok = match &self.normal {
            NormalState::Qwz { mu, t_q, beta } => fin(*mu) && fin(*t_q) && fin(*beta),
            NormalState::Sticlet { alpha, t_s } => fin(*alpha) && fin(*t_s),
            NormalState::CustomFourier(t) => t.is_finite(),
        } && fin(self.delta0)
            && fin(self.h0.value())
            && fin(self.d0.value());
        if !ok {
            return Err(OeeError::InvalidParameter("non-finite model parameter".into()));
        }
        match &self.pairing {
            PairingVector::Constant(d) if !d.iter().all(|x| fin(*x)) => {
                return Err(OeeError::InvalidParameter("non-finite pairing vector".into()))
            }
            PairingVector::CustomFourier(t) if !t.is_finite() => {
                return Err(OeeError::InvalidParameter("non-finite pairing table".into()))
            }
            _ => {}
        }
        if let NormalState::CustomFourier(t) = &self.normal {
            let v = t.hermiticity_violation();
            if v > T::tight() {
                return Err(OeeError::NonHermitian { deviation: v.to_f64_lossy() });
            }
        }
        Ok(())
    }

    /// Normal-state Bloch matrix `H_N(k) = h0 + h . sigma`.
    pub fn normal_matrix(&self, k: Momentum<T>) -> CMat<T> {
        let h0 = re(self.h0.value());
        match &self.normal {
            NormalState::CustomFourier(t) => {
                let mut m = t.eval(k);
                m[(0, 0)] += h0;
                m[(1, 1)] += h0;
                m
            }
            _ => {
                let h = self.h_vector(k);
                linalg::from_pauli(h0, h.map(re))
            }
        }
    }

    /// Real vector `h(k)`; for a custom table, the traceless Hermitian part.
    pub fn h_vector(&self, k: Momentum<T>) -> [T; 3] {
        let Momentum { kx, ky } = k;
        match &self.normal {
            NormalState::Qwz { mu, t_q, beta } => {
                [*beta * kx.sin(), *beta * ky.sin(), *mu - *t_q * kx.cos() - *t_q * ky.cos()]
            }
            NormalState::Sticlet { alpha, t_s } => {
                [*alpha * kx.cos(), *alpha * ky.cos(), *t_s * (kx + ky).cos()]
            }
            NormalState::CustomFourier(t) => {
                let (_, a) = linalg::pauli_components(&t.eval(k));
                a.map(|z| z.re)
            }
        }
    }

    /// `d0 + d . sigma` at k.
    pub fn pairing_matrix(&self, k: Momentum<T>) -> CMat<T> {
        let d0 = re(self.d0.value());
        let d: [Cx<T>; 3] = match &self.pairing {
            PairingVector::Zero => [Cx::zero(); 3],
            PairingVector::SameAsNormal => self.h_vector(k).map(re),
            PairingVector::Constant(d) => d.map(re),
            PairingVector::CustomFourier(t) => {
                let mut m = t.eval(k);
                m[(0, 0)] += d0;
                m[(1, 1)] += d0;
                return m;
            }
        };
        linalg::from_pauli(d0, d)
    }

    /// Real `d(k)` when the pairing matrix has real Pauli components.
    pub fn d_vector_real(&self, k: Momentum<T>) -> Option<[T; 3]> {
        let (_, d) = linalg::pauli_components(&self.pairing_matrix(k));
        let scale = Float::max(T::one(), d.iter().fold(T::zero(), |m, z| Float::max(m, z.norm())));
        if d.iter().all(|z| Float::abs(z.im) <= T::tight() * scale) {
            Some(d.map(|z| z.re))
        } else {
            None
        }
    }
}

/// Builds the 4x4 BdG Bloch Hamiltonian at k.
pub fn assemble_bdg<T: Real>(spec: &ModelSpec<T>, k: Momentum<T>) -> Result<CMat<T>> {
    spec.validate()?;
    Ok(assemble_unchecked(spec, k))
}

/// Same as [`assemble_bdg`] without re-validating the spec; for hot loops after one `validate`.
pub(crate) fn assemble_unchecked<T: Real>(spec: &ModelSpec<T>, k: Momentum<T>) -> CMat<T> {
    let hn = spec.normal_matrix(k);
    let sy = &linalg::pauli::<T>()[1];
    let gap = linalg::scale(&linalg::mul(&spec.pairing_matrix(k), sy), cx(T::zero(), spec.delta0));
    let mut h = Mat::from_fn(4, 4, |i, j| match (i < 2, j < 2) {
        (true, true) => hn[(i, j)],
        (true, false) => gap[(i, j - 2)],
        (false, true) => gap[(j, i - 2)].conj(),
        (false, false) => -hn[(j - 2, i - 2)],
    });
    if spec.h_prime {
        for i in 0..2 {
            h[(i, i + 2)] += re(spec.delta0);
            h[(i + 2, i)] += re(spec.delta0);
        }
    }
    h
}

/// The two decoupled 2x2 blocks `(h + Delta0 d_eff) . sigma` and `(h - Delta0 d_eff) . sigma`,
/// with `d_eff = d + y_hat` when the uniform term is on.
pub fn block_vectors<T: Real>(spec: &ModelSpec<T>, k: Momentum<T>) -> Result<([T; 3], [T; 3])> {
    if spec.h0.value() != T::zero() || spec.d0.value() != T::zero() {
        return Err(OeeError::BlockDecompositionUnavailable("requires h0 = 0 and d0 = 0".into()));
    }
    if let NormalState::CustomFourier(t) = &spec.normal {
        let (a0, _) = linalg::pauli_components(&t.eval(k));
        if a0.norm() > T::tight() {
            return Err(OeeError::BlockDecompositionUnavailable(
                "custom normal state has an identity component".into(),
            ));
        }
    }
    let mut d = spec
        .d_vector_real(k)
        .ok_or_else(|| OeeError::BlockDecompositionUnavailable("pairing vector is not real".into()))?;
    if spec.h_prime {
        // H' splits along tau_x, a real d along tau_y; the two do not commute
        if d.iter().any(|x| Float::abs(*x) > T::tight()) {
            return Err(OeeError::BlockDecompositionUnavailable(
                "uniform term combined with a nonzero pairing vector".into(),
            ));
        }
        d[1] = T::one();
    }
    let h = spec.h_vector(k);
    let p = std::array::from_fn(|i| h[i] + spec.delta0 * d[i]);
    let m = std::array::from_fn(|i| h[i] - spec.delta0 * d[i]);
    Ok((p, m))
}

/// The symmetry that splits the rotated BdG matrix into its two blocks: `tau_x` when the
/// uniform term is on, `tau_y` otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SectorBasis {
    TauX,
    TauY,
}

impl SectorBasis {
    pub fn of<T: Real>(spec: &ModelSpec<T>) -> Self {
        if spec.h_prime {
            SectorBasis::TauX
        } else {
            SectorBasis::TauY
        }
    }

    /// Hole-component phase `c` of the `(h + Delta0 d_eff)` block state `(phi, c phi) / sqrt 2`
    /// in the rotated basis; the other block uses `-c`.
    pub fn phase<T: Real>(self) -> Cx<T> {
        match self {
            SectorBasis::TauX => cx(T::one(), T::zero()),
            SectorBasis::TauY => cx(T::zero(), -T::one()),
        }
    }
}

pub fn block_decompose<T: Real>(spec: &ModelSpec<T>, k: Momentum<T>) -> Result<(CMat<T>, CMat<T>)> {
    spec.validate()?;
    let (p, m) = block_vectors(spec, k)?;
    Ok((linalg::from_real_vector(p), linalg::from_real_vector(m)))
}

/// Spin operators `S_mu = diag(sigma_mu, -sigma_mu^*)` and the rotation `U = I (+) sigma_y`
/// with `U^dagger S_mu U = I (x) sigma_mu`.
#[derive(Debug, Clone)]
pub struct SpinRepresentation<T: Real> {
    pub s: [CMat<T>; 3],
    pub u: CMat<T>,
}

impl<T: Real> SpinRepresentation<T> {
    pub fn new() -> Self {
        let sig = linalg::pauli::<T>();
        let s = std::array::from_fn(|m| {
            let p = &sig[m];
            Mat::from_fn(4, 4, |i, j| match (i < 2, j < 2) {
                (true, true) => p[(i, j)],
                (false, false) => -p[(i - 2, j - 2)].conj(),
                _ => Cx::zero(),
            })
        });
        let sy = &sig[1];
        let u = Mat::from_fn(4, 4, |i, j| match (i < 2, j < 2) {
            (true, true) => {
                if i == j {
                    Cx::from(T::one())
                } else {
                    Cx::zero()
                }
            }
            (false, false) => sy[(i - 2, j - 2)],
            _ => Cx::zero(),
        });
        SpinRepresentation { s, u }
    }

    /// Largest deviation from `U^dagger S_mu U = I (x) sigma_mu`.
    pub fn rotation_residual(&self) -> T {
        let sig = linalg::pauli::<T>();
        let id = linalg::identity::<T>(2);
        (0..3)
            .map(|m| {
                let r = linalg::mul(&linalg::mul_adj_left(&self.u, &self.s[m]), &self.u);
                linalg::max_abs_diff(&r, &linalg::kron(&id, &sig[m]))
            })
            .fold(T::zero(), Float::max)
    }
}

impl<T: Real> Default for SpinRepresentation<T> {
    fn default() -> Self {
        Self::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{eigvalsh, hermiticity_deviation};

    fn ks() -> Vec<Momentum<f64>> {
        vec![
            Momentum::new(0.3, 0.7),
            Momentum::new(1.1, -2.0),
            Momentum::new(-3.0, 0.05),
            Momentum::new(0.0, 0.0),
        ]
    }

    fn specs() -> Vec<ModelSpec<f64>> {
        vec![
            ModelSpec::qwz(-0.5, -1.0, 1.0, 1.0),
            ModelSpec::qwz(0.5, 1.0, 1.0, 0.1).with_pairing(PairingVector::SameAsNormal),
            ModelSpec::sticlet(1.0, 1.0, 0.1),
            ModelSpec::qwz(-0.2, -1.0, 1.0, 1.0).with_h_prime(true),
            ModelSpec::qwz(0.3, 0.7, 1.3, 0.4)
                .with_pairing(PairingVector::Constant([0.2, -0.5, 0.9]))
                .with_h_prime(true),
        ]
    }

    #[test]
    fn bdg_is_hermitian() {
        for s in specs() {
            for k in ks() {
                let h = assemble_bdg(&s, k).unwrap();
                assert!(hermiticity_deviation(&h) < 1e-14);
            }
        }
    }

    #[test]
    fn qwz_vector_literal() {
        let s = ModelSpec::qwz(0.5, 1.0, 2.0, 0.0);
        let h = s.h_vector(Momentum::new(0.0, std::f64::consts::FRAC_PI_2));
        assert!((h[0]).abs() < 1e-15 && (h[1] - 2.0).abs() < 1e-15 && (h[2] + 0.5).abs() < 1e-15);
    }

    #[test]
    fn blocks_reproduce_bdg_spectrum() {
        for s in specs() {
            for k in ks() {
                let full = eigvalsh(&assemble_bdg(&s, k).unwrap()).unwrap();
                let Ok((a, b)) = block_decompose(&s, k) else {
                    assert!(s.h_prime, "{s:?}");
                    continue;
                };
                let mut e = eigvalsh(&a).unwrap();
                e.extend(eigvalsh(&b).unwrap());
                e.sort_by(|x, y| x.partial_cmp(y).unwrap());
                for (x, y) in full.iter().zip(&e) {
                    assert!((x - y).abs() < 1e-12, "{s:?} {k:?}: {full:?} vs {e:?}");
                }
            }
        }
    }

    #[test]
    fn uniform_term_with_pairing_vector_does_not_split() {
        let s = ModelSpec::qwz(0.3, 0.7, 1.3, 0.4)
            .with_pairing(PairingVector::Constant([0.2, -0.5, 0.9]))
            .with_h_prime(true);
        assert!(matches!(
            block_decompose(&s, Momentum::new(0.3, 0.7)),
            Err(OeeError::BlockDecompositionUnavailable(_))
        ));
    }

    #[test]
    fn block_decomposition_needs_real_d() {
        let table = FourierTable::new(vec![FourierTerm {
            dx: 0,
            dy: 0,
            block: [[Cx::zero(), cx(0.0, 0.0)], [cx(0.0, 1.0), Cx::zero()]],
        }]);
        let s = ModelSpec::qwz(0.5, 1.0, 1.0, 1.0).with_pairing(PairingVector::CustomFourier(table));
        assert!(matches!(
            block_decompose(&s, Momentum::new(0.1, 0.2)),
            Err(OeeError::BlockDecompositionUnavailable(_))
        ));
        let s = ModelSpec::qwz(0.5, 1.0, 1.0, 1.0).with_h0(ScalarTerm::Constant(0.1));
        assert!(block_decompose(&s, Momentum::new(0.1, 0.2)).is_err());
    }

    #[test]
    fn custom_table_reproduces_qwz() {
        // QWZ written as hoppings: sin k = (e^{ik} - e^{-ik}) / 2i, cos k = (e^{ik} + e^{-ik}) / 2
        let (mu, t, b) = (0.4, 1.0, 0.8);
        let h = |d: f64| cx(0.0, d);
        let term = |dx, dy, blk| FourierTerm { dx, dy, block: blk };
        let z = Cx::zero();
        let mut terms = vec![term(0, 0, [[re(mu), z], [z, re(-mu)]])];
        for (dx, dy, s) in [(1, 0, 1.0), (-1, 0, -1.0)] {
            // b sin kx sigma_x - t cos kx sigma_z
            let sx = h(-s * b / 2.0);
            terms.push(term(dx, dy, [[re(-t / 2.0), sx], [sx, re(t / 2.0)]]));
        }
        for (dx, dy, s) in [(0, 1, 1.0), (0, -1, -1.0)] {
            // b sin ky sigma_y: (b / 2i) e^{ik} sigma_y has entries [0, -b/2; b/2, 0]
            let off = re(-s * b / 2.0);
            terms.push(term(dx, dy, [[re(-t / 2.0), off], [-off, re(t / 2.0)]]));
        }
        let table = FourierTable::new(terms);
        assert!(table.hermiticity_violation() < 1e-15);
        let custom = ModelSpec::new(NormalState::CustomFourier(table), 0.3);
        let reference = ModelSpec::qwz(mu, t, b, 0.3);
        for k in ks() {
            let d = linalg::max_abs_diff(
                &assemble_bdg(&custom, k).unwrap(),
                &assemble_bdg(&reference, k).unwrap(),
            );
            assert!(d < 1e-14, "{k:?}: {d}");
        }
    }

    #[test]
    fn rejects_non_hermitian_table() {
        let table = FourierTable::new(vec![FourierTerm {
            dx: 1,
            dy: 0,
            block: [[re(1.0), Cx::zero()], [Cx::zero(), Cx::zero()]],
        }]);
        let s = ModelSpec::new(NormalState::CustomFourier(table), 0.0);
        assert!(matches!(assemble_bdg(&s, Momentum::new(0.0, 0.0)), Err(OeeError::NonHermitian { .. })));
    }

    #[test]
    fn spin_rotation_identity() {
        assert!(SpinRepresentation::<f64>::new().rotation_residual() < 1e-15);
        assert!(SpinRepresentation::<f32>::new().rotation_residual() < 1e-6);
    }
}
