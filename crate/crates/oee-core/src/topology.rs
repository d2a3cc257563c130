//! Skyrmion and Chern invariants, their analytic block forms, and (mu, Delta0) phase diagrams.

use crate::bulk::{scan, BZGrid, GroundStateProjector, SpinTexture, TexturePath};
use crate::error::{OeeError, Result};
use crate::linalg;
use crate::models::{block_vectors, ModelSpec, Momentum, SpinRepresentation};
use crate::scalar::{compensated_sum, cross3, dot3, norm3, Cx, Real};
use num_traits::Float;
use rayon::prelude::*;

/// Rounding threshold separating a quantized invariant from a failed one.
pub const QUANTIZATION_THRESHOLD: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvariantResult<T> {
    pub value: i64,
    pub raw: T,
    /// `|raw - value|`
    pub residual: T,
    pub grid: BZGrid,
}

impl<T: Real> InvariantResult<T> {
    pub fn from_raw(raw: T, grid: BZGrid) -> Self {
        let value = raw.round().to_i64().unwrap_or(i64::MAX);
        InvariantResult { value, raw, residual: Float::abs(raw - raw.round()), grid }
    }

    pub fn is_quantized(&self) -> bool {
        self.residual < T::lit(QUANTIZATION_THRESHOLD)
    }
}

/// Signed solid angle of the spherical triangle `(a, b, c)` of unit vectors;
/// `None` when it is undefined (a vertex pair is antipodal).
pub fn solid_angle<T: Real>(a: &[T; 3], b: &[T; 3], c: &[T; 3]) -> Option<T> {
    let num = dot3(a, &cross3(b, c));
    let den = T::one() + dot3(a, b) + dot3(b, c) + dot3(c, a);
    if Float::abs(num) <= T::tight() && den <= T::tight() {
        return None;
    }
    Some((T::one() + T::one()) * num.atan2(den))
}

/// Lattice skyrmion number of a periodic texture: each plaquette
/// `(i,j) (i+1,j) (i+1,j+1) (i,j+1)` is split into two triangles and the
/// solid angles are summed, divided by `4 pi`. Exact integer on any grid
/// where no triangle is singular.
pub fn skyrmion_number<T: Real>(texture: &SpinTexture<T>) -> Result<InvariantResult<T>> {
    if !texture.periodic {
        return Err(OeeError::InvalidGrid("skyrmion number needs a periodic texture".into()));
    }
    let grid = BZGrid::new(texture.nx, texture.ny)?;
    let unit: Vec<[T; 3]> = texture
        .vectors
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let n = norm3(v);
            if n >= T::loose() {
                Ok(v.map(|c| c / n))
            } else {
                Err(OeeError::SingularTriangle { plaquette: i })
            }
        })
        .collect::<Result<_>>()?;
    let total = plaquette_sum(&grid, &unit)?;
    Ok(InvariantResult::from_raw(total / (T::lit(4.0) * T::PI()), grid))
}

fn plaquette_sum<T: Real>(grid: &BZGrid, unit: &[[T; 3]]) -> Result<T> {
    let at = |i: usize, j: usize| &unit[grid.index(i, j)];
    let per_row: Vec<T> = (0..grid.nx)
        .into_par_iter()
        .map(|i| {
            let mut terms = Vec::with_capacity(2 * grid.ny);
            for j in 0..grid.ny {
                let (a, b, c, d) = (at(i, j), at(i + 1, j), at(i + 1, j + 1), at(i, j + 1));
                let p = grid.index(i, j);
                terms.push(solid_angle(a, b, c).ok_or(OeeError::SingularTriangle { plaquette: p })?);
                terms.push(solid_angle(a, c, d).ok_or(OeeError::SingularTriangle { plaquette: p })?);
            }
            Ok(compensated_sum(terms))
        })
        .collect::<Result<_>>()?;
    Ok(compensated_sum(per_row))
}

/// Winding of the unit vector field `f / |f|` over the torus.
pub fn winding_number<T: Real, F>(grid: &BZGrid, f: F) -> Result<InvariantResult<T>>
where
    F: Fn(Momentum<T>) -> Result<[T; 3]> + Sync,
{
    let ks = grid.momenta::<T>();
    let vectors: Vec<[T; 3]> = ks.par_iter().map(|&k| f(k)).collect::<Result<_>>()?;
    let texture = SpinTexture {
        nx: grid.nx,
        ny: grid.ny,
        coords: ks.iter().map(|k| [k.kx, k.ky]).collect(),
        norms: vectors.iter().map(norm3).collect(),
        vectors,
        normalized: false,
        periodic: true,
    };
    skyrmion_number(&texture)
}

/// Chern number of the occupied bands from gauge-invariant link variables.
///
/// Convention: Berry connection `A = i <u|grad u>`, so this is minus the
/// usual counter-clockwise plaquette-phase sum over `2 pi`.
pub fn chern_number<T: Real>(
    spec: &ModelSpec<T>,
    grid: &BZGrid,
    filling: usize,
) -> Result<InvariantResult<T>> {
    let s = scan(spec, grid, filling, true)?;
    chern_from_states(grid, &s.states)
}

fn chern_from_states<T: Real>(
    grid: &BZGrid,
    states: &[GroundStateProjector<T>],
) -> Result<InvariantResult<T>> {
    let link = |a: &GroundStateProjector<T>, b: &GroundStateProjector<T>| -> Result<Cx<T>> {
        let d = linalg::det(&linalg::mul_adj_left(&a.occupied, &b.occupied));
        let n = d.norm();
        if !(n > T::tight()) {
            return Err(OeeError::SingularLink { kx: a.k.kx.to_f64_lossy(), ky: a.k.ky.to_f64_lossy() });
        }
        Ok(d / n)
    };
    let st = |i: usize, j: usize| &states[grid.index(i, j)];
    let per_row: Vec<T> = (0..grid.nx)
        .into_par_iter()
        .map(|i| {
            let mut terms = Vec::with_capacity(grid.ny);
            for j in 0..grid.ny {
                let ux = link(st(i, j), st(i + 1, j))?;
                let uy_right = link(st(i + 1, j), st(i + 1, j + 1))?;
                let ux_top = link(st(i, j + 1), st(i + 1, j + 1))?;
                let uy = link(st(i, j), st(i, j + 1))?;
                terms.push((ux * uy_right * ux_top.conj() * uy.conj()).arg());
            }
            Ok(compensated_sum(terms))
        })
        .collect::<Result<_>>()?;
    let raw = -compensated_sum(per_row) / (T::PI() + T::PI());
    Ok(InvariantResult::from_raw(raw, *grid))
}

/// `W[h + Delta0 d] + W[h - Delta0 d]`, available when the BdG matrix block-decomposes.
pub fn analytic_chern<T: Real>(spec: &ModelSpec<T>, grid: &BZGrid) -> Result<InvariantResult<T>> {
    spec.validate()?;
    let plus = winding_number(grid, |k| Ok(block_vectors(spec, k)?.0))?;
    let minus = winding_number(grid, |k| Ok(block_vectors(spec, k)?.1))?;
    Ok(InvariantResult::from_raw(plus.raw + minus.raw, *grid))
}

/// `Q_tot(alpha) = -W[n_+ + alpha n_-]` with `n_pm` the normalized block vectors.
/// At `alpha = 1` this is the skyrmion number of the ground-state texture.
pub fn homotopy_skyrmion<T: Real>(
    spec: &ModelSpec<T>,
    grid: &BZGrid,
    alpha: T,
) -> Result<InvariantResult<T>> {
    spec.validate()?;
    let w = winding_number(grid, |k| {
        let (p, m) = block_vectors(spec, k)?;
        let (np, nm) = (norm3(&p), norm3(&m));
        if !(np > T::tight() && nm > T::tight()) {
            return Err(OeeError::GapClosure {
                kx: k.kx.to_f64_lossy(),
                ky: k.ky.to_f64_lossy(),
                gap: Float::min(np, nm).to_f64_lossy(),
            });
        }
        Ok(std::array::from_fn(|i| p[i] / np + alpha * m[i] / nm))
    })?;
    Ok(InvariantResult::from_raw(-w.raw, *grid))
}

pub fn analytic_skyrmion<T: Real>(spec: &ModelSpec<T>, grid: &BZGrid) -> Result<InvariantResult<T>> {
    homotopy_skyrmion(spec, grid, T::one())
}

/// Sweeps `alpha` over the given values.
pub fn homotopy_interpolation<T: Real>(
    spec: &ModelSpec<T>,
    grid: &BZGrid,
    alphas: &[T],
) -> Result<Vec<(T, InvariantResult<T>)>> {
    alphas.iter().map(|&a| Ok((a, homotopy_skyrmion(spec, grid, a)?))).collect()
}

/// Finite-difference estimate of `(1/4pi) int S . (d_x S x d_y S)`; not quantized, diagnostic only.
pub fn continuum_skyrmion_estimate<T: Real>(texture: &SpinTexture<T>) -> T {
    let (nx, ny) = (texture.nx, texture.ny);
    let unit = |i: usize, j: usize| {
        let v = texture.at(i, j);
        let n = norm3(&v);
        v.map(|c| c / n)
    };
    let half = T::lit(0.5);
    let mut terms = Vec::with_capacity(nx * ny);
    for i in 0..nx {
        for j in 0..ny {
            let s = unit(i, j);
            let (xp, xm) = (unit(i + 1, j), unit(i + nx - 1, j));
            let (yp, ym) = (unit(i, j + 1), unit(i, j + ny - 1));
            let dx: [T; 3] = std::array::from_fn(|c| (xp[c] - xm[c]) * half);
            let dy: [T; 3] = std::array::from_fn(|c| (yp[c] - ym[c]) * half);
            terms.push(dot3(&s, &cross3(&dx, &dy)));
        }
    }
    compensated_sum(terms) / (T::lit(4.0) * T::PI())
}

/// Outcome of one phase-diagram point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointStatus {
    Ok,
    GapClosure,
    SingularSpin,
    NotQuantized,
    Failed,
}

impl PointStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            PointStatus::Ok => "ok",
            PointStatus::GapClosure => "gap_closure",
            PointStatus::SingularSpin => "singular_spin",
            PointStatus::NotQuantized => "not_quantized",
            PointStatus::Failed => "failed",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhasePoint<T> {
    pub mu: T,
    pub delta0: T,
    pub chern: Option<i64>,
    pub skyrmion: Option<i64>,
    pub min_spin_norm: T,
    pub min_gap: T,
    pub status: PointStatus,
}

/// Invariants on a `(mu, Delta0)` grid; `points` is ordered with `mu` as the slow index.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseDiagram<T> {
    pub mu: Vec<T>,
    pub delta0: Vec<T>,
    pub points: Vec<PhasePoint<T>>,
}

/// Gap below which a point is reported as a gap closure rather than evaluated.
pub fn phase_gap_floor<T: Real>() -> T {
    T::lit(1e-6).max(T::tight())
}

fn evaluate_point<T: Real>(
    spec: &ModelSpec<T>,
    grid: &BZGrid,
    filling: usize,
    rep: &SpinRepresentation<T>,
) -> PhasePoint<T> {
    let (mu, delta0) = match spec.normal {
        crate::models::NormalState::Qwz { mu, .. } => (mu, spec.delta0),
        _ => (T::nan(), spec.delta0),
    };
    let mut point = PhasePoint {
        mu,
        delta0,
        chern: None,
        skyrmion: None,
        min_spin_norm: T::nan(),
        min_gap: T::nan(),
        status: PointStatus::Failed,
    };
    let Ok(s) = scan(spec, grid, filling, false) else {
        return point;
    };
    point.min_gap = s.min_gap();
    let Ok(texture) = s.texture(grid, rep, false, TexturePath::GroundState) else {
        return point;
    };
    point.min_spin_norm = texture.min_norm();
    if !(point.min_gap > phase_gap_floor()) {
        point.status = PointStatus::GapClosure;
        return point;
    }
    let chern = chern_from_states(grid, &s.states);
    let sk = if point.min_spin_norm > T::loose() { skyrmion_number(&texture).ok() } else { None };
    let mut quantized = true;
    if let Ok(c) = chern {
        quantized &= c.is_quantized();
        point.chern = Some(c.value);
    }
    if let Some(q) = sk {
        quantized &= q.is_quantized();
        point.skyrmion = Some(q.value);
    }
    point.status = if point.chern.is_none() {
        PointStatus::Failed
    } else if point.skyrmion.is_none() {
        PointStatus::SingularSpin
    } else if !quantized {
        PointStatus::NotQuantized
    } else {
        PointStatus::Ok
    };
    point
}

/// Sweeps a QWZ template over `mu` and `Delta0`. Points run in parallel; output order is fixed.
pub fn phase_diagram<T: Real>(
    template: &ModelSpec<T>,
    mu_values: &[T],
    delta0_values: &[T],
    grid: &BZGrid,
    filling: usize,
) -> Result<PhaseDiagram<T>> {
    template.validate()?;
    template.with_mu(T::zero())?;
    if mu_values.is_empty() || delta0_values.is_empty() {
        return Err(OeeError::InvalidGrid("empty parameter axis".into()));
    }
    let rep = SpinRepresentation::new();
    let jobs: Vec<(T, T)> =
        mu_values.iter().flat_map(|&m| delta0_values.iter().map(move |&d| (m, d))).collect();
    let points = jobs
        .par_iter()
        .map(|&(m, d)| {
            let mut spec = template.with_mu(m)?;
            spec.delta0 = d;
            Ok(evaluate_point(&spec, grid, filling, &rep))
        })
        .collect::<Result<_>>()?;
    Ok(PhaseDiagram { mu: mu_values.to_vec(), delta0: delta0_values.to_vec(), points })
}

/// Qualitative features of a phase diagram.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSummary<T> {
    /// At every `mu`, all evaluated points share one skyrmion number.
    pub skyrmion_delta0_independent: bool,
    /// Number of `mu` values with nonzero Chern number, per `Delta0` (input order).
    pub nontrivial_chern_counts: Vec<usize>,
    /// Counts never grow with increasing `Delta0` and end below where they start.
    pub chern_region_narrows: bool,
    /// `(mu midpoint, Delta0)` where the skyrmion number jumps between neighbours
    /// that are both gapped and share a Chern number.
    pub spin_only_transitions: Vec<(T, T)>,
}

impl<T: Real> PhaseDiagram<T> {
    pub fn point(&self, imu: usize, idelta: usize) -> &PhasePoint<T> {
        &self.points[imu * self.delta0.len() + idelta]
    }

    pub fn summary(&self) -> PhaseSummary<T> {
        let (nm, nd) = (self.mu.len(), self.delta0.len());
        let skyrmion_delta0_independent = (0..nm).all(|i| {
            let vals: Vec<i64> = (0..nd).filter_map(|j| self.point(i, j).skyrmion).collect();
            vals.windows(2).all(|w| w[0] == w[1])
        });
        let mut order: Vec<usize> = (0..nd).collect();
        order.sort_by(|&a, &b| {
            self.delta0[a].partial_cmp(&self.delta0[b]).unwrap_or(std::cmp::Ordering::Equal)
        });
        let nontrivial_chern_counts: Vec<usize> = (0..nd)
            .map(|j| (0..nm).filter(|&i| matches!(self.point(i, j).chern, Some(c) if c != 0)).count())
            .collect();
        let sorted: Vec<usize> = order.iter().map(|&j| nontrivial_chern_counts[j]).collect();
        let chern_region_narrows = sorted.windows(2).all(|w| w[1] <= w[0]) && sorted.first() > sorted.last();
        let mut spin_only_transitions = Vec::new();
        for j in 0..nd {
            for i in 0..nm.saturating_sub(1) {
                let (a, b) = (self.point(i, j), self.point(i + 1, j));
                let gapped = a.status == PointStatus::Ok && b.status == PointStatus::Ok;
                if gapped && a.chern == b.chern && a.skyrmion != b.skyrmion {
                    let mid = (self.mu[i] + self.mu[i + 1]) * T::lit(0.5);
                    spin_only_transitions.push((mid, self.delta0[j]));
                }
            }
        }
        PhaseSummary {
            skyrmion_delta0_independent,
            nontrivial_chern_counts,
            chern_region_narrows,
            spin_only_transitions,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bulk::bulk_texture;
    use crate::models::PairingVector;

    fn q(spec: &ModelSpec<f64>, n: usize) -> InvariantResult<f64> {
        let g = BZGrid::square(n).unwrap();
        skyrmion_number(&bulk_texture(spec, &g, 2, true, TexturePath::GroundState).unwrap()).unwrap()
    }

    fn c(spec: &ModelSpec<f64>, n: usize) -> InvariantResult<f64> {
        chern_number(spec, &BZGrid::square(n).unwrap(), 2).unwrap()
    }

    #[test]
    fn solid_angle_octant() {
        let a = solid_angle(&[1.0f64, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]).unwrap();
        assert!((a - std::f64::consts::FRAC_PI_2).abs() < 1e-14);
        assert!(solid_angle(&[0.0f64, 0.0, 1.0], &[0.0, 0.0, -1.0], &[0.0, 0.0, 1.0]).is_none());
    }

    #[test]
    fn qwz_invariants() {
        let spec = ModelSpec::qwz(-0.5, -1.0, 1.0, 1.0);
        let (cc, qq) = (c(&spec, 32), q(&spec, 32));
        assert_eq!((cc.value, qq.value), (2, -1));
        assert!(cc.residual < 1e-8 && qq.residual < 1e-8);
    }

    #[test]
    fn sticlet_invariants() {
        let spec = ModelSpec::sticlet(1.0, 1.0, 0.1);
        assert_eq!((c(&spec, 32).value, q(&spec, 32).value), (-4, 2));
    }

    #[test]
    fn h_prime_skyrmion_without_chern() {
        let spec = ModelSpec::qwz(-0.2, -1.0, 1.0, 1.0).with_h_prime(true);
        assert_eq!((c(&spec, 32).value, q(&spec, 32).value), (0, -1));
        let spec = ModelSpec::qwz(0.2, -1.0, 1.0, 1.0).with_h_prime(true);
        assert_eq!((c(&spec, 32).value, q(&spec, 32).value), (0, 1));
    }

    #[test]
    fn analytic_forms_agree() {
        let g = BZGrid::square(32).unwrap();
        for spec in [
            ModelSpec::qwz(-0.5, -1.0, 1.0, 1.0),
            ModelSpec::sticlet(1.0, 1.0, 0.1),
            ModelSpec::qwz(-0.2, -1.0, 1.0, 1.0).with_h_prime(true),
            ModelSpec::qwz(0.5, 1.0, 1.0, 0.1).with_pairing(PairingVector::SameAsNormal),
        ] {
            let ac = analytic_chern(&spec, &g).unwrap();
            let aq = analytic_skyrmion(&spec, &g).unwrap();
            assert_eq!(ac.value, c(&spec, 32).value, "{spec:?}");
            assert_eq!(aq.value, q(&spec, 32).value, "{spec:?}");
        }
    }

    #[test]
    fn homotopy_endpoints() {
        let g = BZGrid::square(24).unwrap();
        let spec = ModelSpec::qwz(-0.5, -1.0, 1.0, 1.0);
        let sweep = homotopy_interpolation(&spec, &g, &[0.0, 1.0]).unwrap();
        let w_plus = winding_number(&g, |k| Ok(block_vectors(&spec, k)?.0)).unwrap();
        assert_eq!(sweep[0].1.value, -w_plus.value);
        assert_eq!(sweep[1].1.value, q(&spec, 24).value);
    }

    #[test]
    fn handedness_reversal_flips_sign() {
        let spec = ModelSpec::qwz(-0.5, -1.0, 1.0, 1.0);
        let g = BZGrid::square(16).unwrap();
        let t = bulk_texture(&spec, &g, 2, true, TexturePath::GroundState).unwrap();
        let a = skyrmion_number(&t).unwrap();
        let b = skyrmion_number(&t.reversed_handedness()).unwrap();
        assert_eq!(a.value, -b.value);
    }

    #[test]
    fn continuum_estimate_is_close_on_fine_grid() {
        let spec = ModelSpec::qwz(-0.5, -1.0, 1.0, 1.0);
        let g = BZGrid::square(64).unwrap();
        let t = bulk_texture(&spec, &g, 2, true, TexturePath::GroundState).unwrap();
        assert!((continuum_skyrmion_estimate(&t) + 1.0).abs() < 0.05);
    }

    #[test]
    fn singular_texture_is_reported() {
        let g = BZGrid::square(4).unwrap();
        let mut t =
            bulk_texture(&ModelSpec::qwz(-0.5, -1.0, 1.0, 1.0), &g, 2, false, TexturePath::GroundState)
                .unwrap();
        t.vectors[5] = [0.0; 3];
        assert!(matches!(skyrmion_number(&t), Err(OeeError::SingularTriangle { .. })));
    }

    #[test]
    fn small_phase_diagram() {
        let template = ModelSpec::qwz(0.0, -1.0, 1.0, 1.0).with_h_prime(true);
        let mus = [-3.0, -1.0, -0.2, 0.2, 1.0, 3.0];
        let deltas = [0.3, 1.0];
        let pd = phase_diagram(&template, &mus, &deltas, &BZGrid::square(24).unwrap(), 2).unwrap();
        let s = pd.summary();
        assert!(s.skyrmion_delta0_independent);
        assert_eq!(pd.point(2, 1).skyrmion, Some(-1));
        assert_eq!(pd.point(3, 1).skyrmion, Some(1));
        assert_eq!(pd.point(0, 0).skyrmion, Some(0));
    }
}
