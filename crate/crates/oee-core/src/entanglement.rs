//! Entanglement spectra from restricted ground-state correlation matrices, their
//! observable-enriched (spin-resolved) reduction, and spectral-flow counting.

use crate::error::{OeeError, Result};
use crate::linalg::{self, CMat};
use crate::models::{ModelSpec, SpinRepresentation};
use crate::realspace::{Boundary, LatticeModel, LocalizationProfile, DEFAULT_RANGE};
use crate::scalar::{compensated_sum, Real};
use num_traits::Float;
use rayon::prelude::*;
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Geometry {
    /// Open in x: subsystem edges at `x = 0` or `x = nx` are physical.
    Cylinder,
    /// Periodic in x: every subsystem edge is a cut.
    Torus,
}

impl Geometry {
    pub fn boundary(self) -> Boundary {
        match self {
            Geometry::Cylinder => Boundary::OpenX,
            Geometry::Torus => Boundary::PeriodicX,
        }
    }
}

/// Subsystem `A` = layers `start..end`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CutSpec {
    pub geometry: Geometry,
    pub start: usize,
    pub end: usize,
}

impl CutSpec {
    pub fn new(geometry: Geometry, start: usize, end: usize) -> Self {
        CutSpec { geometry, start, end }
    }

    /// Layers `0..nx/2`.
    pub fn half(geometry: Geometry, nx: usize) -> Self {
        CutSpec::new(geometry, 0, nx / 2)
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `A` must be nonempty and a proper subset of the `nx` layers.
    pub fn validate(&self, nx: usize) -> Result<()> {
        if self.is_empty() || self.end > nx || self.len() >= nx {
            return Err(OeeError::InvalidPartition(format!("layers {}..{} of {nx}", self.start, self.end)));
        }
        Ok(())
    }

    /// Layers of `A` nearest a physical edge and nearest a cut.
    fn regions(&self, nx: usize) -> (Vec<usize>, Vec<usize>) {
        let q = (self.len() / 4).max(1);
        let low: Vec<usize> = (0..q).collect();
        let high: Vec<usize> = (self.len() - q..self.len()).collect();
        let physical = |at_boundary: bool| self.geometry == Geometry::Cylinder && at_boundary;
        let (mut real, mut virt) = (Vec::new(), Vec::new());
        for (side, at) in [(low, self.start == 0), (high, self.end == nx)] {
            if physical(at) {
                real.extend(side);
            } else {
                virt.extend(side);
            }
        }
        (real, virt)
    }
}

/// Where an entanglement eigenstate lives inside `A`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EdgeTag {
    Real,
    Virtual,
    Bulk,
    /// Pure mode (eigenvalue within the purity tolerance of 0 or 1); no edge assignment.
    None,
}

impl EdgeTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            EdgeTag::Real => "real",
            EdgeTag::Virtual => "virtual",
            EdgeTag::Bulk => "bulk",
            EdgeTag::None => "none",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "real" => Some(EdgeTag::Real),
            "virtual" => Some(EdgeTag::Virtual),
            "bulk" => Some(EdgeTag::Bulk),
            "none" => Some(EdgeTag::None),
            _ => None,
        }
    }
}

/// Eigenvalues at or beyond this distance from 0 and 1 count as pure.
pub const PURITY_TOLERANCE: f64 = 1e-6;
/// Eigenvalues closer than this share a degeneracy cluster.
pub const DEGENERACY_TOLERANCE: f64 = 1e-6;

/// How the per-block spin reduction is normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OeesNormalization {
    /// Half the partial trace: a filled site maps to the identity, spectrum in `[0, 1]`.
    #[default]
    UnitPerSite,
    /// The bare partial trace, with trace equal to the particle number of `A`.
    ProjectorWeighted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EsPoint<T> {
    pub ky: T,
    /// Ascending.
    pub xi: Vec<T>,
    pub degeneracy: Vec<usize>,
    pub tags: Vec<EdgeTag>,
    /// `[real, virtual, bulk]` weight of each eigenvector.
    pub weights: Vec<[T; 3]>,
    /// Weight of each eigenvector in `PROFILE_BINS` equal slices of `A`; empty when unknown.
    pub profile: Vec<[T; PROFILE_BINS]>,
}

/// Resolution of the eigenvector profiles used to follow bands across `ky`.
pub const PROFILE_BINS: usize = 8;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EntanglementSpectrum<T> {
    pub points: Vec<EsPoint<T>>,
}

/// Ground-state projector block on the layers of `A`.
///
/// Fails with `NotAProjector` if the input is not idempotent and Hermitian.
pub fn restricted_correlation<T: Real>(
    projector: &CMat<T>,
    layers: std::ops::Range<usize>,
    orbitals: usize,
) -> Result<CMat<T>> {
    let dev = Float::max(
        linalg::max_abs_diff(&linalg::mul(projector, projector), projector),
        linalg::hermiticity_deviation(projector),
    );
    if dev > T::tight() * T::lit(100.0) {
        return Err(OeeError::NotAProjector { deviation: dev.to_f64_lossy() });
    }
    let n = projector.nrows() / orbitals;
    if layers.is_empty() || layers.end > n {
        return Err(OeeError::InvalidPartition(format!("layers {layers:?} of {n}")));
    }
    let (a, len) = (orbitals * layers.start, orbitals * layers.len());
    Ok(projector.as_ref().submatrix(a, a, len, len).to_owned())
}

/// Replaces every 4x4 site block `B` of `c_a` by `Tr_ph[U^dagger B U]`.
pub fn oept_blocks<T: Real>(c_a: &CMat<T>, u: &CMat<T>, norm: OeesNormalization) -> CMat<T> {
    let sites = c_a.nrows() / 4;
    let f = match norm {
        OeesNormalization::UnitPerSite => T::lit(0.5),
        OeesNormalization::ProjectorWeighted => T::one(),
    };
    let ud = linalg::adjoint(u);
    let mut out = linalg::zeros(2 * sites, 2 * sites);
    for r in 0..sites {
        for s in 0..sites {
            let b = c_a.as_ref().submatrix(4 * r, 4 * s, 4, 4);
            let rot = linalg::matmul_into(linalg::matmul_into(ud.as_ref(), b).as_ref(), u.as_ref());
            for i in 0..2 {
                for j in 0..2 {
                    out[(2 * r + i, 2 * s + j)] = (rot[(i, j)] + rot[(i + 2, j + 2)]) * f;
                }
            }
        }
    }
    out
}

/// Entanglement and spin-enriched entanglement spectra at one `ky`.
#[derive(Debug, Clone)]
pub struct KyEntanglement<T> {
    pub plain: EsPoint<T>,
    pub enriched: EsPoint<T>,
}

/// Options for [`entanglement_spectra`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EsOptions {
    pub normalization: OeesNormalization,
    pub use_sectors: bool,
    /// Largest hopping offset kept when building the lattice model.
    pub hopping_range: usize,
}

impl Default for EsOptions {
    fn default() -> Self {
        EsOptions {
            normalization: OeesNormalization::UnitPerSite,
            use_sectors: true,
            hopping_range: DEFAULT_RANGE,
        }
    }
}

fn es_point<T: Real>(ky: T, m: &CMat<T>, orbitals: usize, cut: &CutSpec, nx: usize) -> Result<EsPoint<T>> {
    let e = linalg::eigh(m)?;
    let (real, virt) = cut.regions(nx);
    let sites = m.nrows() / orbitals;
    let mut is_real = vec![false; sites];
    let mut is_virt = vec![false; sites];
    real.iter().for_each(|&x| is_real[x] = true);
    virt.iter().for_each(|&x| is_virt[x] = true);
    let pure = T::lit(PURITY_TOLERANCE);
    let mut weights = Vec::with_capacity(e.values.len());
    let mut tags = Vec::with_capacity(e.values.len());
    let mut profile = Vec::with_capacity(e.values.len());
    for (n, &xi) in e.values.iter().enumerate() {
        let mut w = [T::zero(); 3];
        let mut bins = [T::zero(); PROFILE_BINS];
        for x in 0..sites {
            let p = compensated_sum((0..orbitals).map(|o| e.vectors[(x * orbitals + o, n)].norm_sqr()));
            let slot = if is_real[x] {
                0
            } else if is_virt[x] {
                1
            } else {
                2
            };
            w[slot] += p;
            let bin = x * PROFILE_BINS / sites;
            bins[bin] += p;
        }
        profile.push(bins);
        let tag = if xi < pure || xi > T::one() - pure { EdgeTag::None } else { edge_tag(w) };
        weights.push(w);
        tags.push(tag);
    }
    Ok(EsPoint { ky, degeneracy: degeneracies(&e.values), xi: e.values, tags, weights, profile })
}

/// A region wins the tag only if it leads the runner-up by this much weight;
/// delocalized states (e.g. on an uncut torus) are bulk.
pub const TAG_MARGIN: f64 = 0.1;

fn edge_tag<T: Real>(w: [T; 3]) -> EdgeTag {
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| w[b].partial_cmp(&w[a]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b)));
    if w[order[0]] - w[order[1]] < T::lit(TAG_MARGIN) {
        return EdgeTag::Bulk;
    }
    [EdgeTag::Real, EdgeTag::Virtual, EdgeTag::Bulk][order[0]]
}

/// Size of the cluster of near-equal values each entry belongs to.
pub fn degeneracies<T: Real>(sorted: &[T]) -> Vec<usize> {
    let tol = T::lit(DEGENERACY_TOLERANCE);
    let mut out = vec![1; sorted.len()];
    let mut start = 0;
    for i in 1..=sorted.len() {
        if i == sorted.len() || sorted[i] - sorted[i - 1] > tol {
            for slot in &mut out[start..i] {
                *slot = i - start;
            }
            start = i;
        }
    }
    out
}

/// Both spectra per `ky` from one diagonalization of the slab.
pub fn entanglement_spectra<T: Real>(
    spec: &ModelSpec<T>,
    nx: usize,
    ky_values: &[T],
    cut: &CutSpec,
    opts: EsOptions,
) -> Result<(EntanglementSpectrum<T>, EntanglementSpectrum<T>)> {
    cut.validate(nx)?;
    let model = LatticeModel::new(spec, opts.hopping_range, opts.use_sectors)?;
    let u = SpinRepresentation::<T>::new().u;
    let per_ky: Vec<KyEntanglement<T>> = ky_values
        .par_iter()
        .map(|&ky| {
            let e = model.slab_eigh(ky, nx, cut.geometry.boundary())?;
            let occ = e.vectors.as_ref().submatrix(4 * cut.start, 0, 4 * cut.len(), 2 * nx);
            let c_a = linalg::matmul_into(occ, occ.adjoint());
            let reduced = oept_blocks(&c_a, &u, opts.normalization);
            Ok(KyEntanglement {
                plain: es_point(ky, &c_a, 4, cut, nx)?,
                enriched: es_point(ky, &reduced, 2, cut, nx)?,
            })
        })
        .collect::<Result<_>>()?;
    let (plain, enriched) = per_ky.into_iter().map(|p| (p.plain, p.enriched)).unzip();
    Ok((EntanglementSpectrum { points: plain }, EntanglementSpectrum { points: enriched }))
}

/// Plain (`enriched = false`) or spin-enriched entanglement spectrum.
pub fn entanglement_spectrum<T: Real>(
    spec: &ModelSpec<T>,
    nx: usize,
    ky_values: &[T],
    cut: &CutSpec,
    enriched: bool,
) -> Result<EntanglementSpectrum<T>> {
    let (p, e) = entanglement_spectra(spec, nx, ky_values, cut, EsOptions::default())?;
    Ok(if enriched { e } else { p })
}

/// Layer profiles of the `count` entanglement eigenstates closest to `level` at one `ky`.
///
/// Layer indices are absolute (`cut.start + x`); energies hold the eigenvalues.
#[allow(clippy::too_many_arguments)]
pub fn es_localization<T: Real>(
    spec: &ModelSpec<T>,
    nx: usize,
    ky: T,
    cut: &CutSpec,
    opts: EsOptions,
    enriched: bool,
    level: T,
    count: usize,
) -> Result<Vec<LocalizationProfile<T>>> {
    cut.validate(nx)?;
    let model = LatticeModel::new(spec, opts.hopping_range, opts.use_sectors)?;
    let e = model.slab_eigh(ky, nx, cut.geometry.boundary())?;
    let occ = e.vectors.as_ref().submatrix(4 * cut.start, 0, 4 * cut.len(), 2 * nx);
    let c_a = linalg::matmul_into(occ, occ.adjoint());
    let (m, orbitals) = if enriched {
        let u = SpinRepresentation::<T>::new().u;
        (oept_blocks(&c_a, &u, opts.normalization), 2)
    } else {
        (c_a, 4)
    };
    let es = linalg::eigh(&m)?;
    let mut order: Vec<usize> = (0..es.values.len()).collect();
    order.sort_by(|&a, &b| {
        Float::abs(es.values[a] - level)
            .partial_cmp(&Float::abs(es.values[b] - level))
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    Ok(order
        .into_iter()
        .take(count)
        .map(|n| {
            let v: Vec<_> = (0..es.vectors.nrows()).map(|i| es.vectors[(i, n)]).collect();
            let mut p = LocalizationProfile::from_vector(ky, n, es.values[n], &v, orbitals);
            p.layer_index.iter_mut().for_each(|l| *l += cut.start);
            p
        })
        .collect())
}

/// Tuning of the spectral-flow tracker.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowOptions {
    /// Only values within this distance of the level are tracked.
    pub max_step: f64,
    /// Values within this distance of the level count as sitting on it.
    pub on_level: f64,
    /// A rival match within `ratio x` the chosen distance that changes the outcome is ambiguous.
    pub ambiguity_ratio: f64,
    /// Number of `ky` doublings tried on ambiguity.
    pub max_refinements: usize,
    /// Cost per unit of eigenvector-profile distance (total variation) when matching.
    pub profile_weight: f64,
}

impl Default for FlowOptions {
    fn default() -> Self {
        FlowOptions {
            max_step: 0.1,
            on_level: 1e-6,
            ambiguity_ratio: 1.5,
            max_refinements: 4,
            profile_weight: 0.05,
        }
    }
}

/// Net spectral flow through a level over one `ky` period.
#[derive(Debug, Clone, PartialEq)]
pub struct ChiralModeCount<T> {
    /// Upward minus downward crossings of continuously tracked bands.
    pub net_crossings: i64,
    pub up: usize,
    pub down: usize,
    /// Midpoint `ky` of each counted crossing.
    pub crossing_momenta: Vec<T>,
    /// Net crossings per edge tag.
    pub by_tag: BTreeMap<EdgeTag, i64>,
    /// Values that left the tracking window discontinuously.
    pub jumps: usize,
    /// Number of `ky` samples the count was obtained with.
    pub samples: usize,
}

impl<T> ChiralModeCount<T> {
    pub fn tag(&self, tag: EdgeTag) -> i64 {
        self.by_tag.get(&tag).copied().unwrap_or(0)
    }

    /// Crossings in either direction.
    pub fn gross(&self) -> usize {
        self.up + self.down
    }
}

/// Counts flow through `level` for a series sampled periodically in `ky` (ascending).
///
/// Values within `max_step` of the level are matched to their continuation at the
/// next `ky` by minimal cost `|d xi| + profile_weight * TV(profiles)`, where the
/// profile is the eigenvector's weight distribution over `A`. A value landing on
/// the level counts half a crossing on arrival and half on departure. Fails with
/// `AmbiguousCrossing` when a competing assignment of comparable cost would change
/// the net count of some tag; `up` and `down` follow the chosen assignment.
pub fn count_chiral_modes<T: Real>(
    series: &EntanglementSpectrum<T>,
    level: T,
    opts: &FlowOptions,
) -> Result<ChiralModeCount<T>> {
    let rows: Vec<FlowRow<'_, T, EdgeTag>> = series
        .points
        .iter()
        .map(|p| FlowRow {
            ky: p.ky,
            values: &p.xi,
            labels: &p.tags,
            profiles: (p.profile.len() == p.xi.len()).then_some(p.profile.as_slice()),
        })
        .collect();
    count_rows(&rows, level, opts)
}

/// Same as [`count_chiral_modes`] for an untagged spectrum.
pub fn count_spectrum_flow<T: Real>(
    series: &crate::realspace::SpectrumSeries<T>,
    level: T,
    opts: &FlowOptions,
) -> Result<ChiralModeCount<T>> {
    let labels: Vec<Vec<EdgeTag>> =
        series.points.iter().map(|p| vec![EdgeTag::Bulk; p.values.len()]).collect();
    let rows: Vec<FlowRow<'_, T, EdgeTag>> = series
        .points
        .iter()
        .zip(&labels)
        .map(|(p, l)| FlowRow { ky: p.ky, values: &p.values, labels: l, profiles: None })
        .collect();
    count_rows(&rows, level, opts)
}

/// Outcome of [`count_labelled`].
#[derive(Debug, Clone, PartialEq)]
pub struct LabelledFlow<T, L> {
    pub net: i64,
    pub up: usize,
    pub down: usize,
    pub by_label: BTreeMap<L, i64>,
    /// Momenta of the level crossings.
    pub momenta: Vec<T>,
}

/// Flow counting on arbitrary labelled rows `(ky, values, labels)`; a label change
/// costs `profile_weight`. Used for edge-resolved energy spectra.
pub fn count_labelled<T: Real, L: Copy + Ord>(
    rows: &[(T, Vec<T>, Vec<L>)],
    level: T,
    opts: &FlowOptions,
) -> Result<LabelledFlow<T, L>> {
    let refs: Vec<FlowRow<'_, T, L>> =
        rows.iter().map(|r| FlowRow { ky: r.0, values: &r.1, labels: &r.2, profiles: None }).collect();
    let f = flow_core(&refs, level, opts)?;
    Ok(LabelledFlow { net: f.net, up: f.up, down: f.down, by_label: f.by_tag, momenta: f.momenta })
}

struct FlowRow<'a, T, L> {
    ky: T,
    values: &'a [T],
    labels: &'a [L],
    profiles: Option<&'a [[T; PROFILE_BINS]]>,
}

struct FlowTotals<T, L> {
    net: i64,
    up: usize,
    down: usize,
    by_tag: BTreeMap<L, i64>,
    momenta: Vec<T>,
}

fn count_rows<T: Real>(
    rows: &[FlowRow<'_, T, EdgeTag>],
    level: T,
    opts: &FlowOptions,
) -> Result<ChiralModeCount<T>> {
    let jumps = jump_count(rows, level, opts);
    let f = flow_core(rows, level, opts)?;
    Ok(ChiralModeCount {
        net_crossings: f.net,
        up: f.up,
        down: f.down,
        crossing_momenta: f.momenta,
        by_tag: f.by_tag,
        jumps,
        samples: rows.len(),
    })
}

fn side<T: Real>(x: T, level: T, on: T) -> i64 {
    if x > level + on {
        1
    } else if x < level - on {
        -1
    } else {
        0
    }
}

/// Cost of continuing value `i` of row `a` as value `j` of row `b`; `None` beyond `step`.
fn pair_cost<T: Real, L: Copy + Ord>(
    a: &FlowRow<'_, T, L>,
    b: &FlowRow<'_, T, L>,
    i: usize,
    j: usize,
    step: T,
    kappa: T,
) -> Option<T> {
    let d = Float::abs(a.values[i] - b.values[j]);
    if d >= step {
        return None;
    }
    let dissimilarity = match (a.profiles, b.profiles) {
        (Some(pa), Some(pb)) => {
            let tv = compensated_sum(pa[i].iter().zip(&pb[j]).map(|(x, y)| Float::abs(*x - *y)));
            tv * T::lit(0.5)
        }
        _ if a.labels[i] == b.labels[j] => T::zero(),
        _ => T::one(),
    };
    Some(d + kappa * dissimilarity)
}

/// Greedy one-to-one matching by ascending cost; ties broken by index.
fn match_rows<T: Real, L: Copy + Ord>(
    a: &FlowRow<'_, T, L>,
    b: &FlowRow<'_, T, L>,
    ia: &[usize],
    ib: &[usize],
    step: T,
    kappa: T,
) -> Vec<(usize, usize, T)> {
    let mut cand: Vec<(T, usize, usize)> = Vec::new();
    for &i in ia {
        for &j in ib {
            if let Some(c) = pair_cost(a, b, i, j, step, kappa) {
                cand.push((c, i, j));
            }
        }
    }
    cand.sort_by(|x, y| {
        x.0.partial_cmp(&y.0).unwrap_or(std::cmp::Ordering::Equal).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2))
    });
    let (mut used_a, mut used_b) = (Vec::new(), Vec::new());
    let mut out = Vec::new();
    for (cost, i, j) in cand {
        if !used_a.contains(&i) && !used_b.contains(&j) {
            used_a.push(i);
            used_b.push(j);
            out.push((i, j, cost));
        }
    }
    out
}

fn windowed<T: Real>(v: &[T], level: T, step: T) -> Vec<usize> {
    (0..v.len()).filter(|&i| Float::abs(v[i] - level) < step).collect()
}

fn jump_count<T: Real, L: Copy + Ord>(rows: &[FlowRow<'_, T, L>], level: T, opts: &FlowOptions) -> usize {
    let step = T::lit(opts.max_step);
    let kappa = T::lit(opts.profile_weight);
    let n = rows.len();
    (0..n)
        .map(|s| {
            let (a, b) = (&rows[s], &rows[(s + 1) % n]);
            // a band leaving the window still has a continuation just outside it
            let (ia, ib) = (windowed(a.values, level, step), windowed(b.values, level, step + step));
            ia.len() - match_rows(a, b, &ia, &ib, step, kappa).len()
        })
        .sum()
}

/// Net half-step contribution per label of a set of assignments.
fn tally<L: Copy + Ord>(contribs: &[(L, i64)]) -> BTreeMap<L, i64> {
    let mut by: BTreeMap<L, i64> = BTreeMap::new();
    for &(l, c) in contribs {
        *by.entry(l).or_insert(0) += c;
    }
    by.retain(|_, v| *v != 0);
    by
}

fn flow_core<T: Real, L: Copy + Ord>(
    rows: &[FlowRow<'_, T, L>],
    level: T,
    opts: &FlowOptions,
) -> Result<FlowTotals<T, L>> {
    let step = T::lit(opts.max_step);
    let kappa = T::lit(opts.profile_weight);
    let on = T::lit(opts.on_level);
    let ratio = T::lit(opts.ambiguity_ratio);
    let n = rows.len();
    if n < 2 {
        return Err(OeeError::InvalidGrid("flow counting needs at least two ky samples".into()));
    }
    let two_pi = T::PI() + T::PI();
    let mut half_net = 0i64;
    let (mut half_up, mut half_down) = (0i64, 0i64);
    let mut by_tag: BTreeMap<L, i64> = BTreeMap::new();
    let mut momenta = Vec::new();
    for s in 0..n {
        let (a, b) = (&rows[s], &rows[(s + 1) % n]);
        let (ia, ib) = (windowed(a.values, level, step), windowed(b.values, level, step));
        let matches = match_rows(a, b, &ia, &ib, step, kappa);
        let contrib = |i: usize, j: usize| side(b.values[j], level, on) - side(a.values[i], level, on);
        // pairwise swaps of comparable cost that change the per-tag net count
        for (x, &(i, j, c1)) in matches.iter().enumerate() {
            for &(i2, j2, c2) in &matches[x + 1..] {
                let (Some(s1), Some(s2)) =
                    (pair_cost(a, b, i, j2, step, kappa), pair_cost(a, b, i2, j, step, kappa))
                else {
                    continue;
                };
                if s1 + s2 >= ratio * (c1 + c2) {
                    continue;
                }
                let orig = tally(&[(a.labels[i], contrib(i, j)), (a.labels[i2], contrib(i2, j2))]);
                let swapped = tally(&[(a.labels[i], contrib(i, j2)), (a.labels[i2], contrib(i2, j))]);
                if orig != swapped {
                    return Err(OeeError::AmbiguousCrossing { ky: a.ky.to_f64_lossy() });
                }
            }
        }
        for &(i, j, _) in &matches {
            let c = contrib(i, j);
            if c == 0 {
                continue;
            }
            half_net += c;
            if c > 0 {
                half_up += c;
            } else {
                half_down -= c;
            }
            *by_tag.entry(a.labels[i]).or_insert(0) += c;
            let kb = if s + 1 == n { b.ky + two_pi } else { b.ky };
            if side(a.values[i], level, on) != 0 || side(b.values[j], level, on) != 0 {
                momenta.push((a.ky + kb) * T::lit(0.5));
            }
        }
    }
    let halve = |x: i64| if x >= 0 { (x + 1) / 2 } else { -((-x + 1) / 2) };
    Ok(FlowTotals {
        net: halve(half_net),
        up: halve(half_up) as usize,
        down: halve(half_down) as usize,
        by_tag: by_tag.into_iter().filter(|(_, v)| *v != 0).map(|(k, v)| (k, halve(v))).collect(),
        momenta,
    })
}

/// Recomputes the series on doubled `ky` grids until the count is unambiguous.
pub fn count_with_refinement<T: Real, F>(
    mut sample: F,
    n_ky: usize,
    level: T,
    opts: &FlowOptions,
) -> Result<(ChiralModeCount<T>, EntanglementSpectrum<T>)>
where
    F: FnMut(&[T]) -> Result<EntanglementSpectrum<T>>,
{
    let mut n = n_ky;
    let mut last = None;
    for _ in 0..=opts.max_refinements {
        let ky = crate::realspace::ky_samples::<T>(n);
        let series = sample(&ky)?;
        match count_chiral_modes(&series, level, opts) {
            Ok(c) => return Ok((c, series)),
            Err(e @ OeeError::AmbiguousCrossing { .. }) => last = Some(e),
            Err(e) => return Err(e),
        }
        n *= 2;
    }
    Err(last.unwrap_or(OeeError::AmbiguousCrossing { ky: f64::NAN }))
}

/// The four spectra of a periodic-in-x system.
#[derive(Debug, Clone)]
pub struct TorusSuite<T> {
    /// Eigenvalues of the full ground-state projector.
    pub full: EntanglementSpectrum<T>,
    /// Plain entanglement spectrum of the cut.
    pub cut: EntanglementSpectrum<T>,
    /// Spin reduction of the uncut projector.
    pub enriched_full: EntanglementSpectrum<T>,
    /// Spin reduction of the cut.
    pub enriched_cut: EntanglementSpectrum<T>,
}

pub fn torus_suite<T: Real>(
    spec: &ModelSpec<T>,
    nx: usize,
    ky_values: &[T],
    cut: std::ops::Range<usize>,
    opts: EsOptions,
) -> Result<TorusSuite<T>> {
    let cut = CutSpec::new(Geometry::Torus, cut.start, cut.end);
    cut.validate(nx)?;
    let whole = CutSpec::new(Geometry::Torus, 0, nx);
    let model = LatticeModel::new(spec, opts.hopping_range, opts.use_sectors)?;
    let u = SpinRepresentation::<T>::new().u;
    let rows: Vec<[EsPoint<T>; 4]> = ky_values
        .par_iter()
        .map(|&ky| {
            let e = model.slab_eigh(ky, nx, Boundary::PeriodicX)?;
            let occ = e.vectors.as_ref().subcols(0, 2 * nx);
            let p = linalg::matmul_into(occ, occ.adjoint());
            let a = 4 * cut.start;
            let c_a = p.as_ref().submatrix(a, a, 4 * cut.len(), 4 * cut.len()).to_owned();
            Ok([
                es_point(ky, &p, 4, &whole, nx)?,
                es_point(ky, &c_a, 4, &cut, nx)?,
                es_point(ky, &oept_blocks(&p, &u, opts.normalization), 2, &whole, nx)?,
                es_point(ky, &oept_blocks(&c_a, &u, opts.normalization), 2, &cut, nx)?,
            ])
        })
        .collect::<Result<_>>()?;
    let mut cols: [Vec<EsPoint<T>>; 4] = Default::default();
    for r in rows {
        for (c, p) in cols.iter_mut().zip(r) {
            c.push(p);
        }
    }
    let [full, cut_s, enriched_full, enriched_cut] = cols.map(|points| EntanglementSpectrum { points });
    Ok(TorusSuite { full, cut: cut_s, enriched_full, enriched_cut })
}

/// One in-gap band family grouped by edge tag.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeBand<T> {
    pub tag: EdgeTag,
    pub chirality: i64,
    /// `ky` samples where a value with this tag sits inside the gap window.
    pub ky_support: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnomalyReport<T> {
    pub bands: Vec<EdgeBand<T>>,
    pub real_edge_present: bool,
}

impl<T: Real> AnomalyReport<T> {
    pub fn band(&self, tag: EdgeTag) -> Option<&EdgeBand<T>> {
        self.bands.iter().find(|b| b.tag == tag)
    }
}

/// Separates in-gap spectral weight near `level` into real-edge and virtual-edge
/// bands and attaches each band's chirality.
pub fn real_edge_anomaly_detect<T: Real>(
    series: &EntanglementSpectrum<T>,
    level: T,
    gap_window: T,
    opts: &FlowOptions,
) -> Result<AnomalyReport<T>> {
    let count = count_chiral_modes(series, level, opts)?;
    let mut bands = Vec::new();
    for tag in [EdgeTag::Real, EdgeTag::Virtual] {
        let ky_support: Vec<T> = series
            .points
            .iter()
            .filter(|p| {
                p.xi.iter().zip(&p.tags).any(|(&x, &t)| t == tag && Float::abs(x - level) < gap_window)
            })
            .map(|p| p.ky)
            .collect();
        if !ky_support.is_empty() {
            bands.push(EdgeBand { tag, chirality: count.tag(tag), ky_support });
        }
    }
    let real_edge_present = bands.iter().any(|b| b.tag == EdgeTag::Real);
    Ok(AnomalyReport { bands, real_edge_present })
}

/// Per-ky trace of a spectrum; for the enriched spectrum this is the particle content of `A`.
pub fn traces<T: Real>(series: &EntanglementSpectrum<T>) -> Vec<T> {
    series.points.iter().map(|p| compensated_sum(p.xi.iter().copied())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::realspace::ky_samples;
    use crate::scalar::cx;

    #[test]
    fn full_projector_is_pure() {
        let spec = ModelSpec::qwz(-0.5, -1.0, 1.0, 1.0);
        let model = LatticeModel::new(&spec, 2, true).unwrap();
        let e = model.slab_eigh(0.3, 8, Boundary::OpenX).unwrap();
        let p = linalg::projector_onto(&e.vectors, 16);
        let c = restricted_correlation(&p, 0..8, 4).unwrap();
        for x in linalg::eigvalsh(&c).unwrap() {
            assert!(x.abs() < 1e-10 || (x - 1.0).abs() < 1e-10);
        }
        assert!(restricted_correlation(&linalg::scale(&p, cx(2.0, 0.0)), 0..4, 4).is_err());
    }

    #[test]
    fn product_state_has_no_entanglement() {
        let spec = ModelSpec::qwz(-0.5, 0.0, 0.0, 0.5);
        let (plain, _) = entanglement_spectra(
            &spec,
            6,
            &[0.0, 1.0],
            &CutSpec::half(Geometry::Cylinder, 6),
            EsOptions::default(),
        )
        .unwrap();
        for p in &plain.points {
            assert!(p.xi.iter().all(|&x| x.abs() < 1e-10 || (x - 1.0).abs() < 1e-10));
            assert!(p.tags.iter().all(|&t| t == EdgeTag::None));
        }
    }

    #[test]
    fn identity_reduces_to_identity() {
        let u = SpinRepresentation::<f64>::new().u;
        let r = oept_blocks(&linalg::identity(12), &u, OeesNormalization::UnitPerSite);
        assert!(linalg::max_abs_diff(&r, &linalg::identity(6)) < 1e-15);
        let r = oept_blocks(&linalg::identity(12), &u, OeesNormalization::ProjectorWeighted);
        assert!(linalg::max_abs_diff(&r, &linalg::scale(&linalg::identity(6), cx(2.0, 0.0))) < 1e-15);
    }

    #[test]
    fn separable_block_reduces_to_spin_part() {
        // U (p_ph (x) p_s) U^dagger reduces to p_s when Tr p_ph = 1
        let u = SpinRepresentation::<f64>::new().u;
        let p_ph = linalg::from_rows([[cx(0.7, 0.0), cx(0.1, 0.2)], [cx(0.1, -0.2), cx(0.3, 0.0)]]);
        let p_s = linalg::from_rows([[cx(0.4, 0.0), cx(0.0, -0.3)], [cx(0.0, 0.3), cx(0.6, 0.0)]]);
        let b = linalg::mul(&linalg::mul(&u, &linalg::kron(&p_ph, &p_s)), &linalg::adjoint(&u));
        let r = oept_blocks(&b, &u, OeesNormalization::ProjectorWeighted);
        assert!(linalg::max_abs_diff(&r, &p_s) < 1e-15);
    }

    #[test]
    fn single_site_matches_bulk_reduction() {
        let spec = ModelSpec::qwz(-0.5, -1.0, 1.0, 1.0);
        let rep = SpinRepresentation::new();
        let g = crate::bulk::projector_at(&spec, crate::models::Momentum::new(0.2, -0.4), 2).unwrap();
        let b = crate::bulk::oept_bulk(&g.projector, &rep);
        let raw = oept_blocks(&g.projector, &rep.u, OeesNormalization::ProjectorWeighted);
        assert!(linalg::max_abs_diff(&raw, &b.raw) < 1e-14);
        let unit = oept_blocks(&g.projector, &rep.u, OeesNormalization::UnitPerSite);
        assert!(linalg::max_abs_diff(&unit, &linalg::scale(&b.raw, cx(0.5, 0.0))) < 1e-14);
    }

    #[test]
    fn degeneracy_clusters() {
        assert_eq!(degeneracies(&[0.0, 0.1, 0.1 + 1e-9, 0.5]), vec![1, 2, 2, 1]);
    }

    #[test]
    fn flat_spectrum_has_no_flow() {
        let pts = (0..8)
            .map(|j| EsPoint {
                ky: -3.0 + j as f64,
                xi: vec![0.1, 0.9],
                degeneracy: vec![1, 1],
                tags: vec![EdgeTag::Bulk; 2],
                weights: vec![[0.0, 0.0, 1.0]; 2],
                profile: vec![],
            })
            .collect();
        let c =
            count_chiral_modes(&EntanglementSpectrum { points: pts }, 0.5, &FlowOptions::default()).unwrap();
        assert_eq!((c.net_crossings, c.gross()), (0, 0));
    }

    #[test]
    fn synthetic_chiral_branch() {
        // one band rising through 1/2 once per period, compensated by a jump
        let n = 64;
        let pts = (0..n)
            .map(|j| {
                let ky = -std::f64::consts::PI + 2.0 * std::f64::consts::PI * j as f64 / n as f64;
                EsPoint {
                    ky,
                    xi: vec![0.5 + ky / 8.0],
                    degeneracy: vec![1],
                    tags: vec![EdgeTag::Virtual],
                    weights: vec![[0.0, 1.0, 0.0]],
                    profile: vec![],
                }
            })
            .collect();
        let c =
            count_chiral_modes(&EntanglementSpectrum { points: pts }, 0.5, &FlowOptions::default()).unwrap();
        assert_eq!(c.net_crossings, 1);
        assert_eq!(c.tag(EdgeTag::Virtual), 1);
        assert_eq!(c.jumps, 0);
    }

    #[test]
    fn pinned_band_counts_once() {
        // a band that comes down onto the level, stays, then leaves downwards
        let vals = [0.6, 0.55, 0.5, 0.5, 0.5, 0.45, 0.4, 0.47, 0.53, 0.6];
        let pts = vals
            .iter()
            .enumerate()
            .map(|(j, &x)| EsPoint {
                ky: j as f64,
                xi: vec![x],
                degeneracy: vec![1],
                tags: vec![EdgeTag::Real],
                weights: vec![[1.0, 0.0, 0.0]],
                profile: vec![],
            })
            .collect();
        let c =
            count_chiral_modes(&EntanglementSpectrum { points: pts }, 0.5, &FlowOptions::default()).unwrap();
        assert_eq!((c.net_crossings, c.up, c.down), (0, 1, 1));
    }

    #[test]
    fn complement_shares_spectrum() {
        let spec = ModelSpec::qwz(-0.5, -1.0, 1.0, 1.0);
        let nx = 12;
        let ky = ky_samples::<f64>(5);
        let opts = EsOptions::default();
        let (a, _) =
            entanglement_spectra(&spec, nx, &ky, &CutSpec::new(Geometry::Cylinder, 0, 5), opts).unwrap();
        let (b, _) =
            entanglement_spectra(&spec, nx, &ky, &CutSpec::new(Geometry::Cylinder, 5, 12), opts).unwrap();
        for (pa, pb) in a.points.iter().zip(&b.points) {
            let mut na: Vec<f64> = pa.xi.iter().copied().filter(|x| *x > 1e-9 && *x < 1.0 - 1e-9).collect();
            let mut nb: Vec<f64> =
                pb.xi.iter().map(|x| 1.0 - x).filter(|x| *x > 1e-9 && *x < 1.0 - 1e-9).collect();
            na.sort_by(|x, y| x.partial_cmp(y).unwrap());
            nb.sort_by(|x, y| x.partial_cmp(y).unwrap());
            assert_eq!(na.len(), nb.len());
            for (x, y) in na.iter().zip(&nb) {
                assert!((x - y).abs() < 1e-8);
            }
        }
    }
}
