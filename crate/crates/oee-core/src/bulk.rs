//! Bulk ground states, the observable-enriched partial trace, and momentum-space spin textures.

use crate::error::{OeeError, Result};
use crate::linalg::{self, CMat};
use crate::models::{assemble_unchecked, ModelSpec, Momentum, SpinRepresentation};
use crate::scalar::{cx, Real};
use num_traits::Float;
use rayon::prelude::*;

/// Periodic momentum grid with `k = -pi + 2 pi i / n` along each axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BZGrid {
    pub nx: usize,
    pub ny: usize,
}

impl BZGrid {
    pub const MIN_POINTS: usize = 4;

    pub fn new(nx: usize, ny: usize) -> Result<Self> {
        if nx < Self::MIN_POINTS || ny < Self::MIN_POINTS {
            return Err(OeeError::InvalidGrid(format!(
                "{nx}x{ny} grid; each axis needs at least {} points",
                Self::MIN_POINTS
            )));
        }
        Ok(BZGrid { nx, ny })
    }

    pub fn square(n: usize) -> Result<Self> {
        Self::new(n, n)
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Row-major with `kx` as the slow index.
    pub fn index(&self, ix: usize, iy: usize) -> usize {
        (ix % self.nx) * self.ny + (iy % self.ny)
    }

    pub fn momentum<T: Real>(&self, ix: usize, iy: usize) -> Momentum<T> {
        Momentum::new(axis_point(ix, self.nx), axis_point(iy, self.ny))
    }

    pub fn momenta<T: Real>(&self) -> Vec<Momentum<T>> {
        (0..self.nx)
            .flat_map(|ix| (0..self.ny).map(move |iy| (ix, iy)))
            .map(|(ix, iy)| self.momentum(ix, iy))
            .collect()
    }
}

pub(crate) fn axis_point<T: Real>(i: usize, n: usize) -> T {
    -T::PI() + (T::PI() + T::PI()) * T::lit(i as f64) / T::lit(n as f64)
}

/// Projector onto the lowest `n_occ` eigenstates of a Bloch Hamiltonian.
#[derive(Debug, Clone)]
pub struct GroundStateProjector<T: Real> {
    pub k: Momentum<T>,
    pub projector: CMat<T>,
    /// Occupied eigenvectors as columns.
    pub occupied: CMat<T>,
    pub energies: Vec<T>,
    pub n_occ: usize,
    /// `E[n_occ] - E[n_occ - 1]`
    pub gap: T,
}

/// Fails with `GapClosure` when the gap above the filled states is below the tight tolerance.
pub fn ground_state_projector<T: Real>(
    h: &CMat<T>,
    k: Momentum<T>,
    filling: usize,
) -> Result<GroundStateProjector<T>> {
    let g = projector_unchecked(h, k, filling)?;
    let bandwidth = g.energies[g.energies.len() - 1] - g.energies[0];
    if g.gap < T::tight() * Float::max(T::one(), bandwidth) {
        return Err(OeeError::GapClosure {
            kx: k.kx.to_f64_lossy(),
            ky: k.ky.to_f64_lossy(),
            gap: g.gap.to_f64_lossy(),
        });
    }
    Ok(g)
}

fn projector_unchecked<T: Real>(
    h: &CMat<T>,
    k: Momentum<T>,
    filling: usize,
) -> Result<GroundStateProjector<T>> {
    let n = h.nrows();
    if filling == 0 || filling >= n {
        return Err(OeeError::InvalidParameter(format!("filling {filling} outside 1..{n}")));
    }
    let e = linalg::eigh(h)?;
    let occupied = e.vectors.as_ref().subcols(0, filling).to_owned();
    let projector = linalg::projector_onto(&e.vectors, filling);
    let gap = e.values[filling] - e.values[filling - 1];
    Ok(GroundStateProjector { k, projector, occupied, energies: e.values, n_occ: filling, gap })
}

pub fn projector_at<T: Real>(
    spec: &ModelSpec<T>,
    k: Momentum<T>,
    filling: usize,
) -> Result<GroundStateProjector<T>> {
    spec.validate()?;
    ground_state_projector(&assemble_unchecked(spec, k), k, filling)
}

/// `<S_mu> = Re Tr[P S_mu]`
pub fn spin_expectation<T: Real>(p: &CMat<T>, rep: &SpinRepresentation<T>) -> [T; 3] {
    std::array::from_fn(|m| linalg::trace_product_re(p, &rep.s[m]))
}

/// Spin-resolved state after tracing out the particle-hole factor.
#[derive(Debug, Clone)]
pub struct ReducedSpinState<T: Real> {
    /// Unit-trace density matrix `(I + <S> . sigma) / 2`.
    pub rho: CMat<T>,
    pub spin: [T; 3],
    /// `Tr_{ph}[U^dagger P U]` with trace equal to the number of occupied states.
    pub raw: CMat<T>,
}

pub fn oept_bulk<T: Real>(p: &CMat<T>, rep: &SpinRepresentation<T>) -> ReducedSpinState<T> {
    let rotated = linalg::mul(&linalg::mul_adj_left(&rep.u, p), &rep.u);
    let raw = linalg::partial_trace_outer(&rotated, 2);
    let sig = linalg::pauli::<T>();
    let spin: [T; 3] = std::array::from_fn(|m| linalg::trace_product_re(&raw, &sig[m]));
    let half = T::lit(0.5);
    let rho = linalg::from_pauli(cx(half, T::zero()), spin.map(|s| cx(s * half, T::zero())));
    ReducedSpinState { rho, spin, raw }
}

/// Which object the texture is read from; both must agree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TexturePath {
    #[default]
    GroundState,
    Reduced,
}

/// Field of spin vectors on a momentum grid or a real-space lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinTexture<T> {
    pub nx: usize,
    pub ny: usize,
    /// `(kx, ky)` or `(x, y)` per site, row-major with x slow.
    pub coords: Vec<[T; 2]>,
    pub vectors: Vec<[T; 3]>,
    /// Norm of the vector before any normalization.
    pub norms: Vec<T>,
    pub normalized: bool,
    /// Periodic in both directions (momentum grids); false for open lattices.
    pub periodic: bool,
}

impl<T: Real> SpinTexture<T> {
    pub fn at(&self, ix: usize, iy: usize) -> [T; 3] {
        self.vectors[(ix % self.nx) * self.ny + (iy % self.ny)]
    }

    pub fn min_norm(&self) -> T {
        self.norms.iter().copied().fold(T::infinity(), Float::min)
    }

    pub fn max_norm(&self) -> T {
        self.norms.iter().copied().fold(T::zero(), Float::max)
    }

    /// Raw (unnormalized) vector at a site.
    pub fn raw(&self, i: usize) -> [T; 3] {
        if self.normalized {
            self.vectors[i].map(|c| c * self.norms[i])
        } else {
            self.vectors[i]
        }
    }

    /// Mirror image `(Sx, Sy, Sz) -> (Sx, -Sy, Sz)`.
    pub fn reversed_handedness(&self) -> Self {
        let mut t = self.clone();
        for v in &mut t.vectors {
            v[1] = -v[1];
        }
        t
    }
}

/// Per-k state shared by textures, invariants and phase diagrams.
pub(crate) struct BulkScan<T: Real> {
    pub states: Vec<GroundStateProjector<T>>,
}

/// Diagonalizes every grid point; k points run in parallel, results keep grid order.
pub(crate) fn scan<T: Real>(
    spec: &ModelSpec<T>,
    grid: &BZGrid,
    filling: usize,
    require_gap: bool,
) -> Result<BulkScan<T>> {
    spec.validate()?;
    let ks = grid.momenta::<T>();
    let states = ks
        .par_iter()
        .map(|&k| {
            let h = assemble_unchecked(spec, k);
            if require_gap {
                ground_state_projector(&h, k, filling)
            } else {
                projector_unchecked(&h, k, filling)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BulkScan { states })
}

impl<T: Real> BulkScan<T> {
    pub fn min_gap(&self) -> T {
        self.states.iter().map(|s| s.gap).fold(T::infinity(), Float::min)
    }

    pub fn texture(
        &self,
        grid: &BZGrid,
        rep: &SpinRepresentation<T>,
        normalize: bool,
        path: TexturePath,
    ) -> Result<SpinTexture<T>> {
        let raw: Vec<[T; 3]> = self
            .states
            .par_iter()
            .map(|g| match path {
                TexturePath::GroundState => spin_expectation(&g.projector, rep),
                TexturePath::Reduced => oept_bulk(&g.projector, rep).spin,
            })
            .collect();
        texture_from_raw(grid, &self.states, raw, normalize)
    }
}

fn texture_from_raw<T: Real>(
    grid: &BZGrid,
    states: &[GroundStateProjector<T>],
    raw: Vec<[T; 3]>,
    normalize: bool,
) -> Result<SpinTexture<T>> {
    let norms: Vec<T> = raw.iter().map(crate::scalar::norm3).collect();
    let vectors = if normalize {
        let mut out = Vec::with_capacity(raw.len());
        for ((v, &n), g) in raw.iter().zip(&norms).zip(states) {
            if !(n >= T::loose()) {
                return Err(OeeError::SingularSpin {
                    kx: g.k.kx.to_f64_lossy(),
                    ky: g.k.ky.to_f64_lossy(),
                    norm: n.to_f64_lossy(),
                });
            }
            out.push(v.map(|c| c / n));
        }
        out
    } else {
        raw
    };
    Ok(SpinTexture {
        nx: grid.nx,
        ny: grid.ny,
        coords: states.iter().map(|g| [g.k.kx, g.k.ky]).collect(),
        vectors,
        norms,
        normalized: normalize,
        periodic: true,
    })
}

/// Ground-state spin texture over the Brillouin zone.
///
/// Fails with `GapClosure` if any k point is gapless at this filling, and with
/// `SingularSpin` if normalization meets a vanishing `<S>`.
pub fn bulk_texture<T: Real>(
    spec: &ModelSpec<T>,
    grid: &BZGrid,
    filling: usize,
    normalize: bool,
    path: TexturePath,
) -> Result<SpinTexture<T>> {
    let rep = SpinRepresentation::new();
    scan(spec, grid, filling, true)?.texture(grid, &rep, normalize, path)
}

/// Smallest gap above the filled states over the grid; never fails on closure.
pub fn min_gap<T: Real>(spec: &ModelSpec<T>, grid: &BZGrid, filling: usize) -> Result<T> {
    Ok(scan(spec, grid, filling, false)?.min_gap())
}

/// Checks `P^2 = P`, `P = P^dagger` and `Tr P = n_occ`.
pub fn projector_residual<T: Real>(g: &GroundStateProjector<T>) -> T {
    let p = &g.projector;
    let idem = linalg::max_abs_diff(&linalg::mul(p, p), p);
    let herm = linalg::hermiticity_deviation(p);
    let tr = (linalg::trace(p) - cx(T::lit(g.n_occ as f64), T::zero())).norm();
    Float::max(Float::max(idem, herm), tr)
}
