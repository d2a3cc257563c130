//! Real-space geometries: hoppings from Bloch data, slabs (open or periodic in x,
//! `ky` conserved), fully open lattices, localization and real-space spin textures.

use crate::bulk::{axis_point, SpinTexture};
use crate::error::{OeeError, Result};
use crate::linalg::{self, CMat, Eigh};
use crate::models::{
    assemble_unchecked, block_vectors, ModelSpec, Momentum, NormalState, PairingVector, SectorBasis,
};
use crate::scalar::{compensated_sum, cx, phase, Cx, Real};
use num_traits::Float;
use rayon::prelude::*;
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Boundary {
    OpenX,
    PeriodicX,
}

/// Real-space hopping blocks `t_delta` with `H(k) = sum_delta t_delta e^{i k . delta}`.
#[derive(Debug, Clone)]
pub struct HoppingSet<T: Real> {
    /// Orbitals per site.
    pub dim: usize,
    pub entries: BTreeMap<(i32, i32), CMat<T>>,
}

impl<T: Real> HoppingSet<T> {
    pub fn range(&self) -> i32 {
        self.entries.keys().map(|&(x, y)| x.abs().max(y.abs())).max().unwrap_or(0)
    }

    pub fn bloch(&self, k: Momentum<T>) -> CMat<T> {
        let mut h = linalg::zeros(self.dim, self.dim);
        for (&(dx, dy), t) in &self.entries {
            let ph = phase(k.kx * T::lit(dx as f64) + k.ky * T::lit(dy as f64));
            for j in 0..self.dim {
                for i in 0..self.dim {
                    h[(i, j)] += t[(i, j)] * ph;
                }
            }
        }
        h
    }

    /// Largest violation of `t_{-delta} = t_delta^dagger`.
    pub fn hermiticity_violation(&self) -> T {
        let zero = linalg::zeros(self.dim, self.dim);
        self.entries
            .iter()
            .map(|(&(dx, dy), t)| {
                let m = self.entries.get(&(-dx, -dy)).unwrap_or(&zero);
                linalg::max_abs_diff(m, &linalg::adjoint(t))
            })
            .fold(T::zero(), Float::max)
    }
}

/// Inverse Fourier transform of the BdG Bloch Hamiltonian.
///
/// Fails with `RangeTooSmall` if the model has hoppings beyond `max_range`.
pub fn extract_hoppings<T: Real>(spec: &ModelSpec<T>, max_range: usize) -> Result<HoppingSet<T>> {
    spec.validate()?;
    extract_from_bloch(4, max_range, |k| assemble_unchecked(spec, k))
}

pub(crate) fn extract_from_bloch<T: Real, F>(dim: usize, max_range: usize, bloch: F) -> Result<HoppingSet<T>>
where
    F: Fn(Momentum<T>) -> CMat<T> + Sync,
{
    let r = max_range as i32;
    // two spare shells beyond the requested range expose longer hoppings
    let n = 2 * max_range + 4;
    let samples: Vec<(Momentum<T>, CMat<T>)> = (0..n * n)
        .into_par_iter()
        .map(|idx| {
            let k = Momentum::new(axis_point::<T>(idx / n, n), axis_point::<T>(idx % n, n));
            (k, bloch(k))
        })
        .collect();
    let norm = T::lit((n * n) as f64);
    let lo = -(n as i32) / 2;
    let mut entries = BTreeMap::new();
    let mut dropped = T::zero();
    let mut scale = T::zero();
    for dx in lo..lo + n as i32 {
        for dy in lo..lo + n as i32 {
            let mut t = linalg::zeros(dim, dim);
            for (k, h) in &samples {
                let ph = phase(-(k.kx * T::lit(dx as f64) + k.ky * T::lit(dy as f64)));
                for j in 0..dim {
                    for i in 0..dim {
                        t[(i, j)] += h[(i, j)] * ph;
                    }
                }
            }
            let t = linalg::scale(&t, cx(T::one() / norm, T::zero()));
            let m = linalg::max_abs(&t);
            scale = Float::max(scale, m);
            if dx.abs() > r || dy.abs() > r {
                dropped += m;
            } else if m > T::tight() * T::lit(1e-2) {
                entries.insert((dx, dy), t);
            }
        }
    }
    let set = HoppingSet { dim, entries };
    let tol = T::tight() * Float::max(T::one(), scale);
    if dropped > tol {
        return Err(OeeError::RangeTooSmall { dropped: dropped.to_f64_lossy() });
    }
    // off-grid check catches hoppings aliased onto kept offsets
    let golden = T::lit(0.618_033_988_749_895);
    let mut worst = T::zero();
    for i in 0..8 {
        let fi = T::lit(i as f64 + 0.5);
        let k = Momentum::new(
            crate::scalar::wrap_angle(fi * golden * T::lit(7.0)),
            crate::scalar::wrap_angle(fi * golden * T::lit(3.0) + T::lit(0.3)),
        );
        worst = Float::max(worst, linalg::max_abs_diff(&set.bloch(k), &bloch(k)));
    }
    if worst > T::lit(100.0) * tol {
        return Err(OeeError::RangeTooSmall { dropped: worst.to_f64_lossy() });
    }
    Ok(set)
}

/// Slab Hamiltonian for one `ky`; layers are the slow index, orbitals the fast one.
#[derive(Debug, Clone)]
pub struct SlabHamiltonian<T: Real> {
    pub ky: T,
    pub nx: usize,
    pub boundary: Boundary,
    pub dim: usize,
    pub matrix: CMat<T>,
}

/// `H_{x, x + dx} = sum_dy t_(dx, dy) e^{i ky dy}`; `OpenX` drops wrap-around blocks.
pub fn build_slab<T: Real>(
    hoppings: &HoppingSet<T>,
    ky: T,
    nx: usize,
    boundary: Boundary,
) -> Result<SlabHamiltonian<T>> {
    if nx == 0 {
        return Err(OeeError::InvalidParameter("slab needs at least one layer".into()));
    }
    let d = hoppings.dim;
    let mut m = linalg::zeros(d * nx, d * nx);
    for (&(dx, dy), t) in &hoppings.entries {
        let ph = phase(ky * T::lit(dy as f64));
        for x in 0..nx as i64 {
            let xp = x + dx as i64;
            let xp = match boundary {
                Boundary::OpenX if xp < 0 || xp >= nx as i64 => continue,
                Boundary::OpenX => xp,
                Boundary::PeriodicX => xp.rem_euclid(nx as i64),
            };
            let (r0, c0) = (d * x as usize, d * xp as usize);
            for j in 0..d {
                for i in 0..d {
                    m[(r0 + i, c0 + j)] += t[(i, j)] * ph;
                }
            }
        }
    }
    Ok(SlabHamiltonian { ky, nx, boundary, dim: d, matrix: m })
}

/// Hopping data for a model, plus the two 2x2 sector models when the BdG matrix
/// block-decomposes. Sector solves are exact and four times cheaper.
#[derive(Debug, Clone)]
pub struct LatticeModel<T: Real> {
    pub full: HoppingSet<T>,
    pub sectors: Option<[HoppingSet<T>; 2]>,
    pub basis: SectorBasis,
}

/// Hopping range used for the built-in models.
pub const DEFAULT_RANGE: usize = 2;

pub(crate) fn block_decomposable<T: Real>(spec: &ModelSpec<T>) -> bool {
    if spec.h0.value() != T::zero() || spec.d0.value() != T::zero() {
        return false;
    }
    let normal_ok = match &spec.normal {
        NormalState::CustomFourier(t) => {
            // an identity component at any k spoils the decomposition
            t.terms.iter().all(|term| (term.block[0][0] + term.block[1][1]).norm() <= T::tight())
        }
        _ => true,
    };
    let pairing_ok = match &spec.pairing {
        PairingVector::CustomFourier(t) => {
            t.hermiticity_violation() <= T::tight()
                && t.terms.iter().all(|term| (term.block[0][0] + term.block[1][1]).norm() <= T::tight())
        }
        _ => true,
    };
    let pairing_zero = match &spec.pairing {
        PairingVector::Zero => true,
        PairingVector::Constant(d) => d.iter().all(|x| *x == T::zero()),
        _ => false,
    };
    normal_ok && pairing_ok && (!spec.h_prime || pairing_zero)
}

impl<T: Real> LatticeModel<T> {
    pub fn new(spec: &ModelSpec<T>, max_range: usize, use_sectors: bool) -> Result<Self> {
        let full = extract_hoppings(spec, max_range)?;
        let sectors = if use_sectors && block_decomposable(spec) {
            let make = |sign: usize| {
                extract_from_bloch(2, max_range, |k| {
                    let (p, m) = block_vectors(spec, k).expect("decomposable model");
                    linalg::from_real_vector(if sign == 0 { p } else { m })
                })
            };
            Some([make(0)?, make(1)?])
        } else {
            None
        };
        Ok(LatticeModel { full, sectors, basis: SectorBasis::of(spec) })
    }

    pub fn slab(&self, ky: T, nx: usize, boundary: Boundary) -> Result<SlabHamiltonian<T>> {
        build_slab(&self.full, ky, nx, boundary)
    }

    /// Slab eigenvalues, ascending.
    pub fn slab_eigenvalues(&self, ky: T, nx: usize, boundary: Boundary) -> Result<Vec<T>> {
        match &self.sectors {
            Some(sec) => {
                let mut v = linalg::eigvalsh(&build_slab(&sec[0], ky, nx, boundary)?.matrix)?;
                v.extend(linalg::eigvalsh(&build_slab(&sec[1], ky, nx, boundary)?.matrix)?);
                v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
                Ok(v)
            }
            None => linalg::eigvalsh(&self.slab(ky, nx, boundary)?.matrix),
        }
    }

    /// Slab eigen-decomposition in the full four-orbital basis.
    pub fn slab_eigh(&self, ky: T, nx: usize, boundary: Boundary) -> Result<Eigh<T>> {
        match &self.sectors {
            Some(sec) => {
                let a = linalg::eigh(&build_slab(&sec[0], ky, nx, boundary)?.matrix)?;
                let b = linalg::eigh(&build_slab(&sec[1], ky, nx, boundary)?.matrix)?;
                Ok(merge_sectors(&a, &b, self.basis))
            }
            None => linalg::eigh(&self.slab(ky, nx, boundary)?.matrix),
        }
    }
}

/// Lifts sector eigenvectors `phi` to `U ((1, +-c) / sqrt 2 (x) phi)` per site and merges
/// both spectra with a stable `(energy, sector, index)` order.
pub(crate) fn merge_sectors<T: Real>(plus: &Eigh<T>, minus: &Eigh<T>, basis: SectorBasis) -> Eigh<T> {
    let sites = plus.vectors.nrows() / 2;
    let mut order: Vec<(T, usize, usize)> = plus
        .values
        .iter()
        .enumerate()
        .map(|(i, &v)| (v, 0, i))
        .chain(minus.values.iter().enumerate().map(|(i, &v)| (v, 1, i)))
        .collect();
    order.sort_by(|a, b| {
        a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2))
    });
    let h = T::lit(std::f64::consts::FRAC_1_SQRT_2);
    let i = cx(T::zero(), T::one());
    let c = basis.phase::<T>() * h;
    let mut vectors = linalg::zeros(4 * sites, 4 * sites);
    for (col, &(_, s, idx)) in order.iter().enumerate() {
        let (src, sign) = if s == 0 { (&plus.vectors, c) } else { (&minus.vectors, -c) };
        for r in 0..sites {
            let (a, b) = (src[(2 * r, idx)], src[(2 * r + 1, idx)]);
            vectors[(4 * r, col)] = a * h;
            vectors[(4 * r + 1, col)] = b * h;
            // sigma_y (a, b) = (-i b, i a)
            vectors[(4 * r + 2, col)] = -i * b * sign;
            vectors[(4 * r + 3, col)] = i * a * sign;
        }
    }
    Eigh { values: order.iter().map(|o| o.0).collect(), vectors }
}

/// Eigenvalues at one `ky`, ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumPoint<T> {
    pub ky: T,
    pub values: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SpectrumSeries<T> {
    pub points: Vec<SpectrumPoint<T>>,
}

impl<T: Real> SpectrumSeries<T> {
    pub fn ky(&self) -> Vec<T> {
        self.points.iter().map(|p| p.ky).collect()
    }

    /// Largest `|E_i + E_{n-1-i}|` over all points.
    pub fn particle_hole_asymmetry(&self) -> T {
        self.points
            .iter()
            .flat_map(|p| {
                let n = p.values.len();
                (0..n).map(move |i| Float::abs(p.values[i] + p.values[n - 1 - i]))
            })
            .fold(T::zero(), Float::max)
    }
}

/// `n` periodic samples `ky_j = -pi + 2 pi (j + 1/3) / n`.
///
/// The offset keeps every `n` (and every doubling of it) off `ky = 0, +-pi/2, pi`,
/// where edge and entanglement levels of the built-in models are exactly degenerate.
pub fn ky_samples<T: Real>(n: usize) -> Vec<T> {
    let two_pi = T::PI() + T::PI();
    (0..n).map(|j| -T::PI() + two_pi * (T::lit(j as f64) + T::lit(1.0 / 3.0)) / T::lit(n as f64)).collect()
}

pub fn slab_spectrum<T: Real>(
    spec: &ModelSpec<T>,
    nx: usize,
    ky_values: &[T],
    boundary: Boundary,
) -> Result<SpectrumSeries<T>> {
    let model = LatticeModel::new(spec, DEFAULT_RANGE, true)?;
    slab_spectrum_with(&model, nx, ky_values, boundary)
}

pub fn slab_spectrum_with<T: Real>(
    model: &LatticeModel<T>,
    nx: usize,
    ky_values: &[T],
    boundary: Boundary,
) -> Result<SpectrumSeries<T>> {
    let points = ky_values
        .par_iter()
        .map(|&ky| Ok(SpectrumPoint { ky, values: model.slab_eigenvalues(ky, nx, boundary)? }))
        .collect::<Result<_>>()?;
    Ok(SpectrumSeries { points })
}

/// Per-layer probability of one eigenstate.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalizationProfile<T> {
    pub ky: T,
    pub state_index: usize,
    pub energy: T,
    pub layer_index: Vec<usize>,
    pub probability: Vec<T>,
}

impl<T: Real> LocalizationProfile<T> {
    pub fn from_vector(ky: T, state_index: usize, energy: T, v: &[Cx<T>], dim: usize) -> Self {
        let layers = v.len() / dim;
        let raw: Vec<T> =
            (0..layers).map(|x| compensated_sum((0..dim).map(|o| v[x * dim + o].norm_sqr()))).collect();
        let total = compensated_sum(raw.iter().copied());
        LocalizationProfile {
            ky,
            state_index,
            energy,
            layer_index: (0..layers).collect(),
            probability: raw.iter().map(|p| *p / total).collect(),
        }
    }

    /// Total probability on layers `range`.
    pub fn weight(&self, range: std::ops::Range<usize>) -> T {
        compensated_sum(self.probability[range].iter().copied())
    }

    /// Least-squares line through `ln p` over `range`; returns `(slope, r_squared)`.
    pub fn log_linear_fit(&self, range: std::ops::Range<usize>) -> (T, T) {
        let pts: Vec<(T, T)> = range.map(|x| (T::lit(x as f64), self.probability[x].ln())).collect();
        let n = T::lit(pts.len() as f64);
        let mx = compensated_sum(pts.iter().map(|p| p.0)) / n;
        let my = compensated_sum(pts.iter().map(|p| p.1)) / n;
        let sxy = compensated_sum(pts.iter().map(|p| (p.0 - mx) * (p.1 - my)));
        let sxx = compensated_sum(pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)));
        let syy = compensated_sum(pts.iter().map(|p| (p.1 - my) * (p.1 - my)));
        let slope = sxy / sxx;
        (slope, sxy * sxy / (sxx * syy))
    }
}

pub fn localization_profile<T: Real>(
    slab: &SlabHamiltonian<T>,
    state_index: usize,
) -> Result<LocalizationProfile<T>> {
    if state_index >= slab.matrix.nrows() {
        return Err(OeeError::InvalidParameter(format!(
            "state index {state_index} outside spectrum of size {}",
            slab.matrix.nrows()
        )));
    }
    let e = linalg::eigh(&slab.matrix)?;
    let v: Vec<Cx<T>> = (0..e.vectors.nrows()).map(|i| e.vectors[(i, state_index)]).collect();
    Ok(LocalizationProfile::from_vector(slab.ky, state_index, e.values[state_index], &v, slab.dim))
}

/// Which side of an open slab an eigenstate lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    Left,
    Right,
    Bulk,
}

/// Tags each slab eigenstate by its weight in the outer quarters of the layers.
pub fn classify_sides<T: Real>(e: &Eigh<T>, dim: usize) -> Vec<Side> {
    let layers = e.vectors.nrows() / dim;
    let q = (layers / 4).max(1);
    (0..e.values.len())
        .map(|n| {
            let w = |range: std::ops::Range<usize>| {
                compensated_sum(
                    range
                        .flat_map(|x| (0..dim).map(move |o| (x, o)))
                        .map(|(x, o)| e.vectors[(x * dim + o, n)].norm_sqr()),
                )
            };
            let (l, r) = (w(0..q), w(layers - q..layers));
            let half = T::lit(0.5);
            if l > half {
                Side::Left
            } else if r > half {
                Side::Right
            } else {
                Side::Bulk
            }
        })
        .collect()
}

/// Site `x * ny + y` of an `nx x ny` open lattice.
pub fn build_open_lattice<T: Real>(hoppings: &HoppingSet<T>, nx: usize, ny: usize) -> CMat<T> {
    let d = hoppings.dim;
    let n = nx * ny;
    let mut m = linalg::zeros(d * n, d * n);
    for (&(dx, dy), t) in &hoppings.entries {
        for x in 0..nx as i64 {
            for y in 0..ny as i64 {
                let (xp, yp) = (x + dx as i64, y + dy as i64);
                if xp < 0 || yp < 0 || xp >= nx as i64 || yp >= ny as i64 {
                    continue;
                }
                let r0 = d * (x as usize * ny + y as usize);
                let c0 = d * (xp as usize * ny + yp as usize);
                for j in 0..d {
                    for i in 0..d {
                        m[(r0 + i, c0 + j)] += t[(i, j)];
                    }
                }
            }
        }
    }
    m
}

/// Which solver the real-space texture uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OpenSolver {
    /// Sector solve when the model decomposes, full otherwise.
    #[default]
    Auto,
    Full,
}

/// Per-site `<S>` of the fully open lattice ground state, unnormalized.
///
/// `filling` defaults to half of the `4 nx ny` single-particle states. A
/// degenerate Fermi level is reported as `GapClosure` with NaN momentum.
pub fn realspace_texture<T: Real>(
    spec: &ModelSpec<T>,
    nx: usize,
    ny: usize,
    filling: Option<usize>,
    solver: OpenSolver,
) -> Result<SpinTexture<T>> {
    if nx < 2 || ny < 2 {
        return Err(OeeError::InvalidGrid(format!("open lattice {nx}x{ny} is too small")));
    }
    let sites = nx * ny;
    let filling = filling.unwrap_or(2 * sites);
    if filling == 0 || filling >= 4 * sites {
        return Err(OeeError::InvalidParameter(format!("filling {filling} outside 1..{}", 4 * sites)));
    }
    let model = LatticeModel::new(spec, DEFAULT_RANGE, solver == OpenSolver::Auto)?;
    let rep = crate::models::SpinRepresentation::<T>::new();
    let sig = linalg::pauli::<T>();
    let spins: Vec<[T; 3]> = match &model.sectors {
        Some(sec) => {
            let e: Vec<Eigh<T>> =
                sec.iter().map(|h| linalg::eigh(&build_open_lattice(h, nx, ny))).collect::<Result<_>>()?;
            let mut order: Vec<(T, usize, usize)> =
                (0..2).flat_map(|s| e[s].values.iter().enumerate().map(move |(i, &v)| (v, s, i))).collect();
            order.sort_by(|a, b| {
                a.0.partial_cmp(&b.0)
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(a.1.cmp(&b.1))
                    .then(a.2.cmp(&b.2))
            });
            check_fermi_gap(&order.iter().map(|o| o.0).collect::<Vec<_>>(), filling)?;
            let occ: [usize; 2] = [0, 1].map(|s| order[..filling].iter().filter(|o| o.1 == s).count());
            // eigenvalues within each sector are ascending, so the filled ones are a prefix
            (0..sites)
                .map(|r| {
                    let mut s = [T::zero(); 3];
                    for sec in 0..2 {
                        let v = &e[sec].vectors;
                        let block = v.as_ref().subrows(2 * r, 2).subcols(0, occ[sec]);
                        let p = linalg::matmul_into(block, block.adjoint());
                        for m in 0..3 {
                            s[m] += linalg::trace_product_re(&p, &sig[m]);
                        }
                    }
                    s
                })
                .collect()
        }
        None => {
            let e = linalg::eigh(&build_open_lattice(&model.full, nx, ny))?;
            check_fermi_gap(&e.values, filling)?;
            (0..sites)
                .map(|r| {
                    let block = e.vectors.as_ref().subrows(4 * r, 4).subcols(0, filling);
                    let p = linalg::matmul_into(block, block.adjoint());
                    crate::bulk::oept_bulk(&p, &rep).spin
                })
                .collect()
        }
    };
    let norms = spins.iter().map(crate::scalar::norm3).collect();
    Ok(SpinTexture {
        nx,
        ny,
        coords: (0..sites).map(|i| [T::lit((i / ny) as f64), T::lit((i % ny) as f64)]).collect(),
        vectors: spins,
        norms,
        normalized: false,
        periodic: false,
    })
}

fn check_fermi_gap<T: Real>(values: &[T], filling: usize) -> Result<()> {
    let gap = values[filling] - values[filling - 1];
    let bw = values[values.len() - 1] - values[0];
    if gap < T::tight() * Float::max(T::one(), bw) {
        return Err(OeeError::GapClosure { kx: f64::NAN, ky: f64::NAN, gap: gap.to_f64_lossy() });
    }
    Ok(())
}

/// Sites of the outer ring of an open lattice, counter-clockwise from `(0, 0)`.
pub fn boundary_ring(nx: usize, ny: usize) -> Vec<(usize, usize)> {
    let mut ring: Vec<(usize, usize)> = (0..nx - 1).map(|x| (x, 0)).collect();
    ring.extend((0..ny - 1).map(|y| (nx - 1, y)));
    ring.extend((1..nx).rev().map(|x| (x, ny - 1)));
    ring.extend((1..ny).rev().map(|y| (0, y)));
    ring
}

/// Boundary chirality measures of a real-space texture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryReport<T> {
    /// `sum S_parallel . t` around the counter-clockwise ring.
    pub circulation: T,
    /// Winding number of the in-plane angle around the ring; zero when unresolved.
    pub inplane_winding: i64,
    /// Largest in-plane magnitude on the ring.
    pub inplane_max: T,
    pub mean_boundary_sz: T,
    /// Mean `S_z` on sites at least a quarter of the lattice away from every edge.
    pub mean_interior_sz: T,
    /// `sign(circulation)` when the in-plane texture is resolved, else `sign(mean_boundary_sz)`.
    pub handedness: i8,
}

pub fn boundary_circulation<T: Real>(texture: &SpinTexture<T>) -> T {
    let ring = boundary_ring(texture.nx, texture.ny);
    let terms = (0..ring.len()).map(|i| {
        let (a, b) = (ring[i], ring[(i + 1) % ring.len()]);
        let s = texture.raw(a.0 * texture.ny + a.1);
        let tx = T::lit(b.0 as f64 - a.0 as f64);
        let ty = T::lit(b.1 as f64 - a.1 as f64);
        s[0] * tx + s[1] * ty
    });
    compensated_sum(terms)
}

pub fn boundary_report<T: Real>(texture: &SpinTexture<T>) -> BoundaryReport<T> {
    let (nx, ny) = (texture.nx, texture.ny);
    let ring = boundary_ring(nx, ny);
    let at = |(x, y): (usize, usize)| texture.raw(x * ny + y);
    let inplane_max = ring
        .iter()
        .map(|&p| {
            let s = at(p);
            (s[0] * s[0] + s[1] * s[1]).sqrt()
        })
        .fold(T::zero(), Float::max);
    let resolved = inplane_max > T::loose();
    let inplane_winding = if resolved {
        let ang: Vec<T> = ring
            .iter()
            .map(|&p| {
                let s = at(p);
                s[1].atan2(s[0])
            })
            .collect();
        let total = compensated_sum(
            (0..ang.len()).map(|i| crate::scalar::wrap_angle(ang[(i + 1) % ang.len()] - ang[i])),
        );
        (total / (T::PI() + T::PI())).round().to_i64().unwrap_or(0)
    } else {
        0
    };
    let mean = |v: Vec<T>| {
        let n = T::lit(v.len().max(1) as f64);
        compensated_sum(v) / n
    };
    let mean_boundary_sz = mean(ring.iter().map(|&p| at(p)[2]).collect());
    let (qx, qy) = (nx / 4, ny / 4);
    let interior: Vec<T> =
        (qx..nx - qx).flat_map(|x| (qy..ny - qy).map(move |y| (x, y))).map(|p| at(p)[2]).collect();
    let circulation = boundary_circulation(texture);
    let sign = |x: T| {
        if x > T::zero() {
            1
        } else if x < T::zero() {
            -1
        } else {
            0
        }
    };
    BoundaryReport {
        circulation,
        inplane_winding,
        inplane_max,
        mean_boundary_sz,
        mean_interior_sz: mean(interior),
        handedness: if resolved { sign(circulation) } else { sign(mean_boundary_sz) },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::PairingVector;
    use faer::Mat;

    fn qwz() -> ModelSpec<f64> {
        ModelSpec::qwz(-0.5, -1.0, 1.0, 1.0)
    }

    #[test]
    fn qwz_offsets() {
        let h = extract_hoppings(&qwz(), 2).unwrap();
        let keys: Vec<_> = h.entries.keys().copied().collect();
        assert_eq!(keys, vec![(-1, 0), (0, -1), (0, 0), (0, 1), (1, 0)]);
        assert!(h.hermiticity_violation() < 1e-14);
    }

    #[test]
    fn sticlet_has_diagonal_offsets() {
        let h = extract_hoppings(&ModelSpec::sticlet(1.0, 1.0, 0.1), 2).unwrap();
        assert!(h.entries.contains_key(&(1, 1)) && h.entries.contains_key(&(-1, -1)));
        assert!(!h.entries.contains_key(&(1, -1)));
    }

    #[test]
    fn range_too_small() {
        let err = extract_hoppings(&qwz(), 0).unwrap_err();
        assert!(matches!(err, OeeError::RangeTooSmall { .. }));
    }

    #[test]
    fn single_layer_ring() {
        let h = extract_hoppings(&qwz(), 2).unwrap();
        let s = build_slab(&h, 0.7, 1, Boundary::PeriodicX).unwrap();
        let bulk = assemble_unchecked(&qwz(), Momentum::new(0.0, 0.7));
        assert!(linalg::max_abs_diff(&s.matrix, &bulk) < 1e-13);
    }

    #[test]
    fn periodic_slab_matches_bulk() {
        let spec = ModelSpec::sticlet(1.0, 1.0, 0.1);
        let nx = 8;
        let ky = 0.4;
        let slab = slab_spectrum(&spec, nx, &[ky], Boundary::PeriodicX).unwrap();
        let mut bulk: Vec<f64> = (0..nx)
            .flat_map(|n| {
                let k = Momentum::new(2.0 * std::f64::consts::PI * n as f64 / nx as f64, ky);
                linalg::eigvalsh(&assemble_unchecked(&spec, k)).unwrap()
            })
            .collect();
        bulk.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (a, b) in slab.points[0].values.iter().zip(&bulk) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn sector_solve_matches_full() {
        for spec in [
            qwz(),
            ModelSpec::qwz(-0.2, -1.0, 1.0, 1.0).with_h_prime(true),
            ModelSpec::qwz(0.5, 1.0, 1.0, 0.1).with_pairing(PairingVector::SameAsNormal),
        ] {
            let fast = LatticeModel::new(&spec, 2, true).unwrap();
            let slow = LatticeModel::new(&spec, 2, false).unwrap();
            assert!(fast.sectors.is_some());
            let (nx, ky) = (10, 0.37);
            let a = fast.slab_eigh(ky, nx, Boundary::OpenX).unwrap();
            let b = slow.slab_eigh(ky, nx, Boundary::OpenX).unwrap();
            for (x, y) in a.values.iter().zip(&b.values) {
                assert!((x - y).abs() < 1e-10);
            }
            // eigenvectors of the merged solve diagonalize the full slab
            let h = slow.slab(ky, nx, Boundary::OpenX).unwrap().matrix;
            let hv = linalg::mul(&h, &a.vectors);
            let vd = Mat::from_fn(4 * nx, 4 * nx, |i, j| a.vectors[(i, j)] * a.values[j]);
            assert!(linalg::max_abs_diff(&hv, &vd) < 1e-10);
            let p1 = linalg::projector_onto(&a.vectors, 2 * nx);
            let p2 = linalg::projector_onto(&b.vectors, 2 * nx);
            assert!(linalg::max_abs_diff(&p1, &p2) < 1e-8);
        }
    }

    #[test]
    fn localization_sums_to_one() {
        let h = extract_hoppings(&qwz(), 2).unwrap();
        let s = build_slab(&h, 0.0, 12, Boundary::OpenX).unwrap();
        let p = localization_profile(&s, 3).unwrap();
        assert!((p.probability.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(localization_profile(&s, 48).is_err());
    }

    #[test]
    fn sector_texture_matches_full() {
        let spec = ModelSpec::qwz(-0.2, -1.0, 1.0, 1.0).with_h_prime(true);
        let a = realspace_texture(&spec, 5, 4, None, OpenSolver::Auto).unwrap();
        let b = realspace_texture(&spec, 5, 4, None, OpenSolver::Full).unwrap();
        for (x, y) in a.vectors.iter().zip(&b.vectors) {
            for m in 0..3 {
                assert!((x[m] - y[m]).abs() < 1e-9, "{x:?} {y:?}");
            }
        }
    }

    #[test]
    fn ring_visits_every_boundary_site_once() {
        let r = boundary_ring(5, 4);
        assert_eq!(r.len(), 2 * (5 + 4) - 4);
        let mut u = r.clone();
        u.sort();
        u.dedup();
        assert_eq!(u.len(), r.len());
    }
}
