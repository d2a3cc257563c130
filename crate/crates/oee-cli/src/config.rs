//! Run configuration: a versioned TOML document with `model`, `geometry`,
//! `numerics`, `output` and (optionally) `phasediagram` tables.
//!
//! ```toml
//! schema_version = 1
//!
//! [model]
//! kind = "qwz"          # qwz | sticlet | custom
//! mu = -0.5
//! t_q = -1.0
//! beta = 1.0
//! delta0 = 1.0
//! h_prime = false       # uniform term Delta0 tau_x (x) I
//! pairing = "zero"      # zero | same_as_normal | constant | custom
//!
//! [geometry]
//! nx = 200              # layers of the slab / cylinder / torus
//! ny = 40               # second dimension of the open lattice
//! boundary = "open"     # open | periodic (x direction)
//! cut = [0, 100]        # subsystem A = layers cut[0]..cut[1]
//!
//! [numerics]
//! texture_grid = 101
//! invariant_grid = 256
//! ky_samples = 201
//!
//! [output]
//! dir = "out"
//! ```
//!
//! Every table rejects unknown keys. Custom models list Fourier terms as
//! `{ dx, dy, re = [[a, b], [c, d]], im = [[..], [..]] }` in `normal_terms` and
//! `pairing_terms`.

use crate::error::CliError;
use oee_core::entanglement::{FlowOptions, OeesNormalization};
use oee_core::models::{FourierTable, FourierTerm, NormalState, PairingVector, ScalarTerm};
use oee_core::scalar::cx;
use oee_core::{Boundary, CutSpec, Geometry, ModelSpec};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    /// Free-form label copied into reports.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub model: ModelConfig,
    #[serde(default)]
    pub geometry: GeometryConfig,
    #[serde(default)]
    pub numerics: NumericsConfig,
    #[serde(default)]
    pub texture: TextureConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phasediagram: Option<PhaseDiagramConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Qwz,
    Sticlet,
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairingKind {
    #[default]
    Zero,
    SameAsNormal,
    Constant,
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FourierTermConfig {
    pub dx: i32,
    pub dy: i32,
    pub re: [[f64; 2]; 2],
    #[serde(default)]
    pub im: [[f64; 2]; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: ModelKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_q: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub normal_terms: Vec<FourierTermConfig>,
    pub delta0: f64,
    #[serde(default)]
    pub h_prime: bool,
    #[serde(default)]
    pub pairing: PairingKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pairing_terms: Vec<FourierTermConfig>,
    #[serde(default)]
    pub h0: f64,
    #[serde(default)]
    pub d0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryKind {
    #[default]
    Open,
    Periodic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub nx: usize,
    pub ny: usize,
    pub boundary: BoundaryKind,
    /// Subsystem `A` as `[start, end)` in layers; defaults to the lower half.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cut: Option<[usize; 2]>,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        GeometryConfig { nx: 200, ny: 40, boundary: BoundaryKind::Open, cut: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizationKind {
    #[default]
    UnitPerSite,
    ProjectorWeighted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NumericsConfig {
    pub texture_grid: usize,
    pub invariant_grid: usize,
    pub ky_samples: usize,
    /// Filled bands per k point (bulk) or per layer (slabs); defaults to half filling.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub filling: Option<usize>,
    /// Gaps below this are reported as closures.
    pub gap_tolerance: f64,
    /// Largest accepted distance of a raw invariant from its integer.
    pub quantization_threshold: f64,
    /// Largest accepted difference between the two texture paths.
    pub equality_tolerance: f64,
    pub hopping_range: usize,
    pub oees_normalization: NormalizationKind,
    /// Level through which entanglement spectral flow is counted.
    pub es_level: f64,
    pub flow_max_step: f64,
    pub flow_on_level: f64,
    pub flow_ambiguity_ratio: f64,
    pub flow_profile_weight: f64,
    pub flow_refinements: usize,
    /// Half-width of the in-gap window around the level.
    pub edge_window: f64,
    /// Layers next to an edge counted as "at the edge" for localization weights.
    pub edge_layers: usize,
}

impl Default for NumericsConfig {
    fn default() -> Self {
        let f = FlowOptions::default();
        NumericsConfig {
            texture_grid: 101,
            invariant_grid: 256,
            ky_samples: 201,
            filling: None,
            gap_tolerance: 1e-10,
            quantization_threshold: 0.01,
            equality_tolerance: 1e-12,
            hopping_range: oee_core::realspace::DEFAULT_RANGE,
            oees_normalization: NormalizationKind::UnitPerSite,
            es_level: 0.5,
            flow_max_step: f.max_step,
            flow_on_level: f.on_level,
            flow_ambiguity_ratio: f.ambiguity_ratio,
            flow_profile_weight: f.profile_weight,
            flow_refinements: f.max_refinements,
            edge_window: 0.1,
            edge_layers: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TextureKind {
    /// Momentum-space texture over the Brillouin zone.
    #[default]
    Bulk,
    /// Real-space texture of the `nx x ny` lattice open in both directions.
    OpenLattice,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TextureConfig {
    pub kind: TextureKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisConfig {
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

impl AxisConfig {
    pub fn values(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.min];
        }
        (0..self.steps)
            .map(|i| self.min + (self.max - self.min) * i as f64 / (self.steps - 1) as f64)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseDiagramConfig {
    pub mu: AxisConfig,
    pub delta0: AxisConfig,
    /// Momentum grid per point; defaults to `numerics.invariant_grid`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: String,
    pub format: OutputFormat,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: "out".into(), format: OutputFormat::Csv }
    }
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn table(terms: &[FourierTermConfig]) -> FourierTable<f64> {
    FourierTable::new(
        terms
            .iter()
            .map(|t| FourierTerm {
                dx: t.dx,
                dy: t.dy,
                block: std::array::from_fn(|i| std::array::from_fn(|j| cx(t.re[i][j], t.im[i][j]))),
            })
            .collect(),
    )
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| bad(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Canonical serialization; the manifest hashes this, so formatting of the
    /// input file does not matter.
    pub fn canonical_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(bad(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        self.model_spec()?;
        let n = &self.numerics;
        for (name, v) in [
            ("gap_tolerance", n.gap_tolerance),
            ("quantization_threshold", n.quantization_threshold),
            ("equality_tolerance", n.equality_tolerance),
            ("flow_max_step", n.flow_max_step),
            ("flow_on_level", n.flow_on_level),
            ("flow_profile_weight", n.flow_profile_weight),
            ("edge_window", n.edge_window),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(bad(format!("numerics.{name} must be positive, got {v}")));
            }
        }
        if !(n.flow_ambiguity_ratio > 1.0) {
            return Err(bad("numerics.flow_ambiguity_ratio must exceed 1"));
        }
        if !(n.es_level > 0.0 && n.es_level.is_finite()) {
            return Err(bad("numerics.es_level must be positive"));
        }
        for (name, v) in [("texture_grid", n.texture_grid), ("invariant_grid", n.invariant_grid)] {
            if v < 4 {
                return Err(bad(format!("numerics.{name} must be at least 4, got {v}")));
            }
        }
        if n.ky_samples < 2 {
            return Err(bad("numerics.ky_samples must be at least 2"));
        }
        if n.hopping_range == 0 {
            return Err(bad("numerics.hopping_range must be positive"));
        }
        if n.filling == Some(0) || n.filling.is_some_and(|f| f >= 4) {
            return Err(bad("numerics.filling must be 1, 2 or 3 bands"));
        }
        let g = &self.geometry;
        if g.nx < 2 || g.ny < 2 {
            return Err(bad("geometry.nx and geometry.ny must be at least 2"));
        }
        self.cut()?;
        if let Some(pd) = &self.phasediagram {
            if self.model.kind != ModelKind::Qwz {
                return Err(bad("phasediagram sweeps mu and needs model.kind = \"qwz\""));
            }
            for (name, a) in [("mu", &pd.mu), ("delta0", &pd.delta0)] {
                if a.steps == 0 || !a.min.is_finite() || !a.max.is_finite() || a.max < a.min {
                    return Err(bad(format!("phasediagram.{name}: need steps >= 1 and min <= max")));
                }
            }
            if pd.grid.is_some_and(|g| g < 4) {
                return Err(bad("phasediagram.grid must be at least 4"));
            }
        }
        Ok(())
    }

    pub fn model_spec(&self) -> Result<ModelSpec, CliError> {
        let m = &self.model;
        let need = |v: Option<f64>, name: &str| {
            v.ok_or_else(|| bad(format!("model.{name} is required for kind {:?}", m.kind)))
        };
        let forbid = |present: bool, name: &str| {
            if present {
                Err(bad(format!("model.{name} does not apply to kind {:?}", m.kind)))
            } else {
                Ok(())
            }
        };
        let normal = match m.kind {
            ModelKind::Qwz => {
                forbid(m.alpha.is_some(), "alpha")?;
                forbid(m.t_s.is_some(), "t_s")?;
                forbid(!m.normal_terms.is_empty(), "normal_terms")?;
                NormalState::Qwz {
                    mu: need(m.mu, "mu")?,
                    t_q: need(m.t_q, "t_q")?,
                    beta: need(m.beta, "beta")?,
                }
            }
            ModelKind::Sticlet => {
                forbid(m.mu.is_some(), "mu")?;
                forbid(m.t_q.is_some(), "t_q")?;
                forbid(m.beta.is_some(), "beta")?;
                forbid(!m.normal_terms.is_empty(), "normal_terms")?;
                NormalState::Sticlet { alpha: need(m.alpha, "alpha")?, t_s: need(m.t_s, "t_s")? }
            }
            ModelKind::Custom => {
                for (p, name) in
                    [(m.mu, "mu"), (m.t_q, "t_q"), (m.beta, "beta"), (m.alpha, "alpha"), (m.t_s, "t_s")]
                {
                    forbid(p.is_some(), name)?;
                }
                if m.normal_terms.is_empty() {
                    return Err(bad("model.normal_terms is required for kind custom"));
                }
                NormalState::CustomFourier(table(&m.normal_terms))
            }
        };
        let pairing = match m.pairing {
            PairingKind::Zero => PairingVector::Zero,
            PairingKind::SameAsNormal => PairingVector::SameAsNormal,
            PairingKind::Constant => PairingVector::Constant(
                m.d.ok_or_else(|| bad("model.d is required for pairing = \"constant\""))?,
            ),
            PairingKind::Custom => {
                if m.pairing_terms.is_empty() {
                    return Err(bad("model.pairing_terms is required for pairing = \"custom\""));
                }
                PairingVector::CustomFourier(table(&m.pairing_terms))
            }
        };
        if m.pairing != PairingKind::Constant && m.d.is_some() {
            return Err(bad("model.d only applies to pairing = \"constant\""));
        }
        if m.pairing != PairingKind::Custom && !m.pairing_terms.is_empty() {
            return Err(bad("model.pairing_terms only applies to pairing = \"custom\""));
        }
        let scalar = |v: f64| if v == 0.0 { ScalarTerm::Zero } else { ScalarTerm::Constant(v) };
        let spec = ModelSpec::new(normal, m.delta0)
            .with_pairing(pairing)
            .with_h_prime(m.h_prime)
            .with_h0(scalar(m.h0))
            .with_d0(scalar(m.d0));
        spec.validate().map_err(|e| bad(e.to_string()))?;
        Ok(spec)
    }

    pub fn boundary(&self) -> Boundary {
        match self.geometry.boundary {
            BoundaryKind::Open => Boundary::OpenX,
            BoundaryKind::Periodic => Boundary::PeriodicX,
        }
    }

    pub fn cut(&self) -> Result<CutSpec, CliError> {
        let g = &self.geometry;
        let geometry = match g.boundary {
            BoundaryKind::Open => Geometry::Cylinder,
            BoundaryKind::Periodic => Geometry::Torus,
        };
        let cut = match g.cut {
            Some([a, b]) => CutSpec::new(geometry, a, b),
            None => CutSpec::half(geometry, g.nx),
        };
        cut.validate(g.nx).map_err(|e| bad(format!("geometry.cut: {e}")))?;
        Ok(cut)
    }

    /// Filled bands per k point.
    pub fn filling(&self) -> usize {
        self.numerics.filling.unwrap_or(2)
    }

    pub fn flow_options(&self) -> FlowOptions {
        let n = &self.numerics;
        FlowOptions {
            max_step: n.flow_max_step,
            on_level: n.flow_on_level,
            ambiguity_ratio: n.flow_ambiguity_ratio,
            max_refinements: n.flow_refinements,
            profile_weight: n.flow_profile_weight,
        }
    }

    pub fn normalization(&self) -> OeesNormalization {
        match self.numerics.oees_normalization {
            NormalizationKind::UnitPerSite => OeesNormalization::UnitPerSite,
            NormalizationKind::ProjectorWeighted => OeesNormalization::ProjectorWeighted,
        }
    }

    /// Applies `--grid`: the momentum grid of texture / invariant / phase-diagram runs
    /// and the number of `ky` samples of spectra.
    pub fn override_grid(&mut self, n: usize) -> Result<(), CliError> {
        self.numerics.texture_grid = n;
        self.numerics.invariant_grid = n;
        self.numerics.ky_samples = n;
        if let Some(pd) = &mut self.phasediagram {
            pd.grid = Some(n);
        }
        self.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str =
        "schema_version = 1\n[model]\nkind = \"qwz\"\nmu = -0.5\nt_q = -1.0\nbeta = 1.0\ndelta0 = 1.0\n";

    #[test]
    fn minimal_config_gets_defaults() {
        let c = RunConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(c.numerics.invariant_grid, 256);
        assert_eq!(c.geometry.nx, 200);
        assert_eq!(c.cut().unwrap(), CutSpec::new(Geometry::Cylinder, 0, 100));
    }

    #[test]
    fn unknown_keys_rejected_everywhere() {
        for extra in ["colour = 1\n", "[model2]\nx = 1\n"] {
            assert!(RunConfig::from_toml(&format!("{MINIMAL}{extra}")).is_err());
        }
        let bad_model = MINIMAL.replace("beta = 1.0", "beta = 1.0\ngamma = 2.0");
        assert!(RunConfig::from_toml(&bad_model).is_err());
        let bad_numerics = format!("{MINIMAL}[numerics]\ngrid = 5\n");
        assert!(RunConfig::from_toml(&bad_numerics).is_err());
    }

    #[test]
    fn tolerances_must_be_positive() {
        for t in ["gap_tolerance = 0.0", "quantization_threshold = -0.01", "equality_tolerance = nan"] {
            let text = format!("{MINIMAL}[numerics]\n{t}\n");
            assert!(RunConfig::from_toml(&text).is_err(), "{t}");
        }
    }

    #[test]
    fn schema_version_checked() {
        assert!(RunConfig::from_toml(&MINIMAL.replace("schema_version = 1", "schema_version = 2")).is_err());
        assert!(RunConfig::from_toml(&MINIMAL.replace("schema_version = 1\n", "")).is_err());
    }

    #[test]
    fn parameters_must_match_kind() {
        assert!(RunConfig::from_toml(&MINIMAL.replace("beta = 1.0\n", "")).is_err());
        assert!(RunConfig::from_toml(&MINIMAL.replace("beta = 1.0", "beta = 1.0\nalpha = 1.0")).is_err());
        assert!(RunConfig::from_toml(&MINIMAL.replace("delta0 = 1.0", "delta0 = 1.0\nd = [0.0, 0.0, 1.0]"))
            .is_err());
    }

    #[test]
    fn canonical_form_round_trips() {
        let c = RunConfig::from_toml(MINIMAL).unwrap();
        let again = RunConfig::from_toml(&c.canonical_toml()).unwrap();
        assert_eq!(c, again);
        assert_eq!(c.canonical_toml(), again.canonical_toml());
    }

    #[test]
    fn custom_model_from_terms() {
        let text = "schema_version = 1\n[model]\nkind = \"custom\"\ndelta0 = 0.5\nnormal_terms = [{ dx = 0, dy = 0, re = [[1.0, 0.0], [0.0, -1.0]] }]\n";
        let c = RunConfig::from_toml(text).unwrap();
        assert!(matches!(c.model_spec().unwrap().normal, NormalState::CustomFourier(_)));
    }

    #[test]
    fn bad_cut_is_a_config_error() {
        let text = format!("{MINIMAL}[geometry]\nnx = 10\nny = 10\nboundary = \"open\"\ncut = [0, 10]\n");
        assert!(matches!(RunConfig::from_toml(&text), Err(CliError::Config(_))));
    }
}
