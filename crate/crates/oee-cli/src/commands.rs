//! The four subcommands. Each writes its files through an [`OutputSink`] and
//! returns an error whose exit code classifies the failure.

use crate::config::{RunConfig, TextureKind};
use crate::error::CliError;
use crate::manifest::OutputSink;
use oee_core::bulk::{bulk_texture, min_gap, TexturePath};
use oee_core::entanglement::{
    count_chiral_modes, count_labelled, count_with_refinement, entanglement_spectra, es_localization,
    real_edge_anomaly_detect, torus_suite, traces, EsOptions,
};
use oee_core::io;
use oee_core::realspace::{
    boundary_report, classify_sides, ky_samples, realspace_texture, LatticeModel, OpenSolver, Side,
    SpectrumPoint,
};
use oee_core::topology::{
    analytic_chern, analytic_skyrmion, chern_number, phase_diagram, skyrmion_number, PointStatus,
};
use oee_core::{
    BZGrid, Boundary, ChiralModeCount, CutSpec, EdgeTag, EntanglementSpectrum, Geometry, InvariantResult,
    LocalizationProfile, OeeError, SpectrumSeries, SpinTexture,
};
use rayon::prelude::*;
use serde_json::{json, Value};
use std::collections::BTreeMap;

/// Which spectra `spectra` computes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SpectraKind {
    /// Energy spectrum of the slab with edge-resolved flow through zero energy.
    Slab,
    /// Plain entanglement spectrum of the cut.
    Es,
    /// Spin-enriched entanglement spectrum of the cut.
    Oees,
    /// The four spectra of the periodic geometry.
    TorusSuite,
}

impl SpectraKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SpectraKind::Slab => "slab",
            SpectraKind::Es => "es",
            SpectraKind::Oees => "oees",
            SpectraKind::TorusSuite => "torus-suite",
        }
    }
}

fn invariant_json(r: &InvariantResult) -> Value {
    json!({ "value": r.value, "raw": r.raw, "residual": r.residual })
}

fn max_texture_difference(a: &SpinTexture, b: &SpinTexture) -> f64 {
    a.vectors
        .iter()
        .zip(&b.vectors)
        .flat_map(|(u, v)| (0..3).map(move |i| (u[i] - v[i]).abs()))
        .fold(0.0, f64::max)
}

pub fn cmd_texture(cfg: &RunConfig, sink: &mut OutputSink) -> Result<(), CliError> {
    match cfg.texture.kind {
        TextureKind::Bulk => bulk_textures(cfg, sink),
        TextureKind::OpenLattice => open_lattice_texture(cfg, sink),
    }
}

fn bulk_textures(cfg: &RunConfig, sink: &mut OutputSink) -> Result<(), CliError> {
    let spec = cfg.model_spec()?;
    let n = cfg.numerics.texture_grid;
    let grid = BZGrid::square(n)?;
    let filling = cfg.filling();
    // both paths fail with the offending k on a gap closure
    let gs = bulk_texture(&spec, &grid, filling, false, TexturePath::GroundState)?;
    let oept = bulk_texture(&spec, &grid, filling, false, TexturePath::Reduced)?;
    let gap = min_gap(&spec, &grid, filling)?;
    sink.write_csv("texture_gs.csv", &io::texture_rows(&gs))?;
    sink.write_csv("texture_oept.csv", &io::texture_rows(&oept))?;
    let diff = max_texture_difference(&gs, &oept);
    let tol = cfg.numerics.equality_tolerance;
    let equal = diff < tol;
    sink.write_json(
        "texture_report.json",
        &json!({
            "name": cfg.name,
            "grid": n,
            "filling": filling,
            "files": ["texture_gs.csv", "texture_oept.csv"],
            "max_abs_difference": diff,
            "equality_tolerance": tol,
            "equal": equal,
            "min_spin_norm": gs.min_norm(),
            "max_spin_norm": gs.max_norm(),
            "min_gap": gap,
        }),
    )?;
    if gap < cfg.numerics.gap_tolerance {
        return Err(CliError::Check(format!(
            "minimum gap {gap:e} is below numerics.gap_tolerance {:e}",
            cfg.numerics.gap_tolerance
        )));
    }
    if !equal {
        return Err(CliError::Check(format!(
            "ground-state and reduced textures differ by {diff:e} (tolerance {tol:e})"
        )));
    }
    Ok(())
}

fn open_lattice_texture(cfg: &RunConfig, sink: &mut OutputSink) -> Result<(), CliError> {
    let spec = cfg.model_spec()?;
    let (nx, ny) = (cfg.geometry.nx, cfg.geometry.ny);
    let filling = cfg.numerics.filling.map(|f| f * nx * ny);
    let t = realspace_texture(&spec, nx, ny, filling, OpenSolver::Auto)?;
    sink.write_csv("texture_real.csv", &io::real_texture_rows(&t))?;
    let r = boundary_report(&t);
    sink.write_json(
        "texture_boundary.json",
        &json!({
            "name": cfg.name,
            "nx": nx,
            "ny": ny,
            "circulation": r.circulation,
            "inplane_winding": r.inplane_winding,
            "inplane_max": r.inplane_max,
            "inplane_resolved": r.inplane_max > 1e-8,
            "mean_boundary_sz": r.mean_boundary_sz,
            "mean_interior_sz": r.mean_interior_sz,
            "handedness": r.handedness,
            "handedness_source": if r.inplane_max > 1e-8 { "circulation" } else { "boundary_sz" },
        }),
    )?;
    Ok(())
}

pub fn cmd_invariants(cfg: &RunConfig, sink: &mut OutputSink) -> Result<(), CliError> {
    let spec = cfg.model_spec()?;
    let n = cfg.numerics.invariant_grid;
    let grid = BZGrid::square(n)?;
    let filling = cfg.filling();
    let chern = chern_number(&spec, &grid, filling)?;
    let gs = bulk_texture(&spec, &grid, filling, true, TexturePath::GroundState)?;
    let sk = skyrmion_number(&gs)?;
    let reduced = skyrmion_number(&bulk_texture(&spec, &grid, filling, true, TexturePath::Reduced)?)?;

    let mut checks = serde_json::Map::new();
    let mut consistent = reduced.value == sk.value;
    checks.insert("reduced_path_skyrmion".into(), invariant_json(&reduced));
    let analytic = if filling == 2 {
        analytic_chern(&spec, &grid).and_then(|c| Ok((c, analytic_skyrmion(&spec, &grid)?)))
    } else {
        Err(OeeError::BlockDecompositionUnavailable("only defined at half filling".into()))
    };
    match analytic {
        Ok((c, q)) => {
            consistent &= c.value == chern.value && q.value == sk.value;
            checks.insert("analytic_chern".into(), invariant_json(&c));
            checks.insert("analytic_skyrmion".into(), invariant_json(&q));
        }
        Err(OeeError::BlockDecompositionUnavailable(why)) => {
            checks.insert("analytic_unavailable".into(), json!(why));
        }
        Err(e) => return Err(e.into()),
    }
    checks.insert("chern_equals_minus_two_skyrmion".into(), json!(chern.value == -2 * sk.value));
    checks.insert("consistent".into(), json!(consistent));

    let thr = cfg.numerics.quantization_threshold;
    let quantized = chern.residual < thr && sk.residual < thr;
    sink.write_json(
        "invariants.json",
        &json!({
            "name": cfg.name,
            "grid": n,
            "filling": filling,
            "chern": chern.value,
            "skyrmion": sk.value,
            "raw": { "chern": chern.raw, "skyrmion": sk.raw },
            "residuals": { "chern": chern.residual, "skyrmion": sk.residual },
            "quantization_threshold": thr,
            "quantized": quantized,
            "min_spin_norm": gs.min_norm(),
            "cross_checks": Value::Object(checks),
        }),
    )?;
    if !quantized {
        return Err(CliError::Check(format!(
            "invariants not quantized: chern raw {} (residual {:.3e}), skyrmion raw {} (residual {:.3e}), threshold {thr}",
            chern.raw, chern.residual, sk.raw, sk.residual
        )));
    }
    if !consistent {
        return Err(CliError::Check(
            "independent invariant evaluations disagree; see invariants.json".into(),
        ));
    }
    Ok(())
}

pub fn cmd_spectra(cfg: &RunConfig, which: SpectraKind, sink: &mut OutputSink) -> Result<(), CliError> {
    match which {
        SpectraKind::Slab => slab(cfg, sink),
        SpectraKind::Es => entanglement(cfg, false, sink),
        SpectraKind::Oees => entanglement(cfg, true, sink),
        SpectraKind::TorusSuite => torus(cfg, sink),
    }
}

fn es_options(cfg: &RunConfig) -> EsOptions {
    EsOptions {
        normalization: cfg.normalization(),
        use_sectors: true,
        hopping_range: cfg.numerics.hopping_range,
    }
}

fn side_name(s: Side) -> &'static str {
    match s {
        Side::Left => "left",
        Side::Right => "right",
        Side::Bulk => "bulk",
    }
}

fn tag_counts<L: Copy>(m: &BTreeMap<L, i64>, name: impl Fn(L) -> &'static str) -> Value {
    Value::Object(m.iter().map(|(k, v)| (name(*k).to_string(), json!(v))).collect())
}

fn ambiguous(e: &OeeError) -> bool {
    matches!(e, OeeError::AmbiguousCrossing { .. })
}

type SlabRows = Vec<(f64, Vec<f64>, Vec<Side>)>;

fn slab(cfg: &RunConfig, sink: &mut OutputSink) -> Result<(), CliError> {
    let spec = cfg.model_spec()?;
    let nx = cfg.geometry.nx;
    let boundary = cfg.boundary();
    let model = LatticeModel::new(&spec, cfg.numerics.hopping_range, true)?;
    let flow = cfg.flow_options();
    let solve = |ky: &[f64]| -> Result<(SlabRows, Vec<oee_core::linalg::Eigh<f64>>), OeeError> {
        let eig: Vec<_> =
            ky.par_iter().map(|&k| model.slab_eigh(k, nx, boundary)).collect::<Result<_, _>>()?;
        let rows = ky.iter().zip(&eig).map(|(&k, e)| (k, e.values.clone(), classify_sides(e, 4))).collect();
        Ok((rows, eig))
    };
    let mut n = cfg.numerics.ky_samples;
    let mut attempt = 0;
    let (ky, rows, eig, counted) = loop {
        let ky = ky_samples::<f64>(n);
        let (rows, eig) = solve(&ky)?;
        match count_labelled(&rows, 0.0, &flow) {
            Ok(c) => break (ky, rows, eig, c),
            Err(e) if ambiguous(&e) && attempt < flow.max_refinements => {
                attempt += 1;
                n *= 2;
            }
            Err(e) => return Err(e.into()),
        }
    };
    let oee_core::entanglement::LabelledFlow { net, up, down, by_label: by_side, momenta } = counted;
    let series = SpectrumSeries {
        points: rows.iter().map(|r| SpectrumPoint { ky: r.0, values: r.1.clone() }).collect(),
    };
    sink.write_csv("slab_spectrum.csv", &io::spectrum_rows(&series))?;

    // the two states nearest zero energy, next to the first crossing (or ky = 0)
    let target = momenta.first().copied().unwrap_or(0.0);
    let at = nearest_index(&ky, target);
    let e = &eig[at];
    let mut order: Vec<usize> = (0..e.values.len()).collect();
    order.sort_by(|&a, &b| e.values[a].abs().total_cmp(&e.values[b].abs()).then(a.cmp(&b)));
    let sides = &rows[at].2;
    let layers = cfg.numerics.edge_layers.min(nx);
    let mut states = Vec::new();
    for (slot, &idx) in order.iter().take(2).enumerate() {
        let v: Vec<_> = (0..e.vectors.nrows()).map(|r| e.vectors[(r, idx)]).collect();
        let p = LocalizationProfile::from_vector(ky[at], idx, e.values[idx], &v, 4);
        let file = format!("slab_localization_{slot}.csv");
        sink.write_csv(&file, &io::localization_rows(&p))?;
        let fit = match sides[idx] {
            Side::Left => Some(p.log_linear_fit(0..nx / 2)),
            Side::Right => Some(p.log_linear_fit(nx / 2..nx)),
            Side::Bulk => None,
        };
        states.push(json!({
            "file": file,
            "ky": ky[at],
            "energy": e.values[idx],
            "side": side_name(sides[idx]),
            "edge_weight": p.weight(0..layers) + p.weight(nx - layers..nx),
            "decay_slope": fit.map(|f| f.0),
            "fit_r_squared": fit.map(|f| f.1),
        }));
    }
    sink.write_json(
        "slab_summary.json",
        &json!({
            "name": cfg.name,
            "nx": nx,
            "boundary": boundary_name(boundary),
            "samples": ky.len(),
            "particle_hole_asymmetry": series.particle_hole_asymmetry(),
            "flow_at_zero": {
                "net": net,
                "up": up,
                "down": down,
                "by_side": tag_counts(&by_side, side_name),
                "crossing_momenta": momenta,
            },
            "edge_layers": layers,
            "states": states,
        }),
    )?;
    Ok(())
}

fn boundary_name(b: Boundary) -> &'static str {
    match b {
        Boundary::OpenX => "open",
        Boundary::PeriodicX => "periodic",
    }
}

fn nearest_index(values: &[f64], target: f64) -> usize {
    (0..values.len())
        .min_by(|&a, &b| (values[a] - target).abs().total_cmp(&(values[b] - target).abs()))
        .unwrap_or(0)
}

fn count_json(c: &ChiralModeCount) -> Value {
    json!({
        "net_crossings": c.net_crossings,
        "up": c.up,
        "down": c.down,
        "gross": c.gross(),
        "by_tag": tag_counts(&c.by_tag, |t: EdgeTag| t.as_str()),
        "jumps": c.jumps,
        "samples": c.samples,
        "crossing_momenta": c.crossing_momenta,
    })
}

/// The eigenvalue nearest the level at the sample nearest each crossing.
fn crossing_states(series: &EntanglementSpectrum, count: &ChiralModeCount, level: f64) -> Vec<Value> {
    let ky: Vec<f64> = series.points.iter().map(|p| p.ky).collect();
    count
        .crossing_momenta
        .iter()
        .map(|&k| {
            let p = &series.points[nearest_index(&ky, k)];
            let i = nearest_index(&p.xi, level);
            json!({
                "crossing_ky": k,
                "ky": p.ky,
                "xi": p.xi[i],
                "tag": p.tags[i].as_str(),
                "degeneracy": p.degeneracy[i],
                "weights": { "real": p.weights[i][0], "virtual": p.weights[i][1], "bulk": p.weights[i][2] },
            })
        })
        .collect()
}

/// Layers of `A` within `n` of the physical edge, as positions inside `A`.
fn real_edge_positions(cut: &CutSpec, nx: usize, n: usize) -> Option<std::ops::Range<usize>> {
    if cut.geometry != Geometry::Cylinder {
        return None;
    }
    let n = n.min(cut.len());
    if cut.start == 0 {
        Some(0..n)
    } else if cut.end == nx {
        Some(cut.len() - n..cut.len())
    } else {
        None
    }
}

fn entanglement(cfg: &RunConfig, enriched: bool, sink: &mut OutputSink) -> Result<(), CliError> {
    let spec = cfg.model_spec()?;
    let nx = cfg.geometry.nx;
    let cut = cfg.cut()?;
    let opts = es_options(cfg);
    let flow = cfg.flow_options();
    let level = cfg.numerics.es_level;
    let (count, series) = count_with_refinement(
        |ky| {
            let (plain, rich) = entanglement_spectra(&spec, nx, ky, &cut, opts)?;
            Ok(if enriched { rich } else { plain })
        },
        cfg.numerics.ky_samples,
        level,
        &flow,
    )?;
    let prefix = if enriched { "oees" } else { "es" };
    sink.write_csv(&format!("{prefix}_spectrum.csv"), &io::es_rows(&series))?;

    let mut summary = serde_json::Map::new();
    summary.insert("name".into(), json!(cfg.name));
    summary.insert("which".into(), json!(prefix));
    summary.insert("nx".into(), json!(nx));
    summary.insert("cut".into(), json!([cut.start, cut.end]));
    summary.insert("level".into(), json!(level));
    summary.insert("count".into(), count_json(&count));
    summary.insert("crossing_states".into(), json!(crossing_states(&series, &count, level)));
    let max_degeneracy = series
        .points
        .iter()
        .flat_map(|p| {
            p.xi.iter().zip(&p.degeneracy).filter(|(x, _)| (**x - level).abs() < cfg.numerics.edge_window)
        })
        .map(|(_, d)| *d)
        .max()
        .unwrap_or(0);
    summary.insert("max_in_gap_degeneracy".into(), json!(max_degeneracy));

    if enriched {
        let tr = traces(&series);
        let spread = tr.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b))
            - tr.iter().fold(f64::INFINITY, |a, &b| a.min(b));
        summary.insert("trace_spread".into(), json!(spread));
        let report = real_edge_anomaly_detect(&series, level, cfg.numerics.edge_window, &flow)?;
        let mut bands = Vec::new();
        for b in &report.bands {
            // profile at the middle of the band's support
            let ky = b.ky_support[b.ky_support.len() / 2];
            let profiles = es_localization(&spec, nx, ky, &cut, opts, true, level, 4)?;
            let weights = |p: &LocalizationProfile| -> (f64, f64) {
                let q = (cut.len() / 4).max(1);
                let virt = match real_edge_positions(&cut, nx, cut.len()) {
                    Some(r) if r.start == 0 => p.weight(cut.len() - q..cut.len()),
                    _ => p.weight(0..q),
                };
                let real =
                    real_edge_positions(&cut, nx, cfg.numerics.edge_layers).map_or(0.0, |r| p.weight(r));
                (real, virt)
            };
            let best = profiles
                .iter()
                .max_by(|a, c| {
                    let (wa, wc) = (weights(a), weights(c));
                    let key = |w: (f64, f64)| if b.tag == EdgeTag::Real { w.0 } else { w.1 };
                    key(wa).total_cmp(&key(wc))
                })
                .ok_or_else(|| CliError::Check("empty entanglement spectrum".into()))?;
            let file = format!("oees_localization_{}.csv", b.tag.as_str());
            sink.write_csv(&file, &io::localization_rows(best))?;
            let (real_w, virt_w) = weights(best);
            bands.push(json!({
                "tag": b.tag.as_str(),
                "chirality": b.chirality,
                "support_samples": b.ky_support.len(),
                "ky_min": b.ky_support.first(),
                "ky_max": b.ky_support.last(),
                "profile_file": file,
                "profile_ky": ky,
                "profile_xi": best.energy,
                "real_edge_weight": real_w,
                "virtual_quarter_weight": virt_w,
            }));
        }
        summary.insert(
            "anomaly".into(),
            json!({
                "real_edge_present": report.real_edge_present,
                "edge_layers": cfg.numerics.edge_layers,
                "bands": bands,
            }),
        );
    }
    sink.write_json(&format!("{prefix}_summary.json"), &Value::Object(summary))?;
    Ok(())
}

fn torus(cfg: &RunConfig, sink: &mut OutputSink) -> Result<(), CliError> {
    if cfg.boundary() != Boundary::PeriodicX {
        return Err(CliError::Config("torus-suite needs geometry.boundary = \"periodic\"".into()));
    }
    let spec = cfg.model_spec()?;
    let nx = cfg.geometry.nx;
    let cut = cfg.cut()?;
    let opts = es_options(cfg);
    let flow = cfg.flow_options();
    let level = cfg.numerics.es_level;
    let mut n = cfg.numerics.ky_samples;
    let mut attempt = 0;
    let (suite, counts) = loop {
        let ky = ky_samples::<f64>(n);
        let suite = torus_suite(&spec, nx, &ky, cut.start..cut.end, opts)?;
        let counts: Result<Vec<ChiralModeCount>, OeeError> =
            [&suite.cut, &suite.enriched_full, &suite.enriched_cut]
                .into_iter()
                .map(|s| count_chiral_modes(s, level, &flow))
                .collect();
        match counts {
            Ok(c) => break (suite, c),
            Err(e) if ambiguous(&e) && attempt < flow.max_refinements => {
                attempt += 1;
                n *= 2;
            }
            Err(e) => return Err(e.into()),
        }
    };
    sink.write_csv("torus_full.csv", &io::es_rows(&suite.full))?;
    sink.write_csv("torus_cut.csv", &io::es_rows(&suite.cut))?;
    sink.write_csv("torus_oees_full.csv", &io::es_rows(&suite.enriched_full))?;
    sink.write_csv("torus_oees_cut.csv", &io::es_rows(&suite.enriched_cut))?;
    let purity = suite
        .full
        .points
        .iter()
        .flat_map(|p| p.xi.iter().map(|&x| x.abs().min((1.0 - x).abs())))
        .fold(0.0, f64::max);
    sink.write_json(
        "torus_summary.json",
        &json!({
            "name": cfg.name,
            "nx": nx,
            "cut": [cut.start, cut.end],
            "level": level,
            "panel_a": { "file": "torus_full.csv", "max_purity_deviation": purity, "pure": purity <= 1e-8 },
            "panel_b": { "file": "torus_cut.csv", "count": count_json(&counts[0]) },
            "panel_c": { "file": "torus_oees_full.csv", "count": count_json(&counts[1]) },
            "panel_d": { "file": "torus_oees_cut.csv", "count": count_json(&counts[2]) },
        }),
    )?;
    Ok(())
}

pub fn cmd_phasediagram(cfg: &RunConfig, sink: &mut OutputSink) -> Result<(), CliError> {
    let pd = cfg
        .phasediagram
        .as_ref()
        .ok_or_else(|| CliError::Config("phasediagram needs a [phasediagram] table".into()))?;
    let spec = cfg.model_spec()?;
    let mus = pd.mu.values();
    let deltas = pd.delta0.values();
    let n = pd.grid.unwrap_or(cfg.numerics.invariant_grid);
    let grid = BZGrid::square(n)?;
    let diagram = phase_diagram(&spec, &mus, &deltas, &grid, cfg.filling())?;
    sink.write_csv("phase_diagram.csv", &io::phase_rows(&diagram))?;

    let s = diagram.summary();
    let mut status_counts: BTreeMap<&str, usize> = BTreeMap::new();
    for p in &diagram.points {
        *status_counts.entry(p.status.as_str()).or_insert(0) += 1;
    }
    let step = if mus.len() > 1 { (mus[mus.len() - 1] - mus[0]) / (mus.len() - 1) as f64 } else { 0.0 };
    let mut lines: Vec<f64> = s.spin_only_transitions.iter().map(|t| t.0).collect();
    lines.sort_by(f64::total_cmp);
    lines.dedup();
    let near_expected =
        lines.iter().all(|m| [-2.0, 0.0, 2.0].iter().any(|e| (m - e).abs() <= step.abs() + 1e-9));
    let edge = mus.iter().map(|m| m.abs()).fold(0.0, f64::max);
    let edge_rows: Vec<_> = diagram.points.iter().filter(|p| (p.mu.abs() - edge).abs() < 1e-9).collect();
    let edge_trivial =
        edge_rows.iter().all(|p| p.status == PointStatus::Ok && p.chern == Some(0) && p.skyrmion == Some(0));
    let both: Vec<_> = diagram.points.iter().filter(|p| p.status == PointStatus::Ok).collect();
    let relation_holds = both.iter().filter(|p| p.chern == p.skyrmion.map(|q| -2 * q)).count();
    sink.write_json(
        "phase_summary.json",
        &json!({
            "name": cfg.name,
            "grid": n,
            "mu": mus,
            "delta0": deltas,
            "status_counts": status_counts,
            "skyrmion_delta0_independent": s.skyrmion_delta0_independent,
            "nontrivial_chern_counts": s.nontrivial_chern_counts,
            "chern_region_narrows": s.chern_region_narrows,
            "spin_only_transitions": s.spin_only_transitions.iter().map(|t| json!({ "mu": t.0, "delta0": t.1 })).collect::<Vec<_>>(),
            "type_ii_lines": lines,
            "type_ii_lines_near_0_and_pm2": near_expected,
            "outermost_mu_rows_trivial": edge_trivial,
            "chern_equals_minus_two_skyrmion": { "points": relation_holds, "of": both.len() },
        }),
    )?;
    Ok(())
}
