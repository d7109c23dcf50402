//! Run configuration: line-oriented `key = value` text with `#` comments.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::piecewise::{load_reference_table, Knots, PiecewiseModel, SegmentForm};
use crate::potential::{CoordinateMap, OmegaConvention, PhysicalParams, PotentialSpec};

const KNOWN_KEYS: &[&str] = &[
    "potential",
    "type",
    "v0",
    "barrier_lo",
    "barrier_hi",
    "a",
    "b",
    "c",
    "spin",
    "mass",
    "particle_mass",
    "frequency",
    "separation_constant",
    "azimuthal",
    "orbital",
    "omega_convention",
    "coordinate_map",
    "table",
    "model",
    "energy",
    "x_min",
    "x_max",
    "x_far",
    "grid",
    "far_field",
    "t_far",
    "r_far",
    "k_far",
    "tol",
    "samples",
    "form",
    "knots",
    "max_segments",
    "continuity_weight",
    "tol_fit",
];

/// Where the potential comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum PotentialSource {
    /// Analytic form with a closed-form eiconal.
    Analytic(PotentialSpec),
    /// Kerr–Dirac or tabulated: fitted to segments before the IWKB stage.
    Fitted(PotentialSpec),
    /// The five-segment reference table.
    ReferenceTable,
    /// A serialized piecewise model.
    Model(PiecewiseModel),
}

/// Source of the far-field (T, R) fed to the constant solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FarFieldSource {
    Values { transmission: f64, reflection: f64 },
    Oracle,
    Wkb,
}

impl FarFieldSource {
    pub fn name(&self) -> &'static str {
        match self {
            FarFieldSource::Values { .. } => "values",
            FarFieldSource::Oracle => "oracle",
            FarFieldSource::Wkb => "wkb",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitSettings {
    pub samples: Option<PathBuf>,
    pub form: SegmentForm,
    pub knots: Knots,
    pub continuity_weight: f64,
    pub tol_fit: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub potential: PotentialSource,
    pub energy: f64,
    pub x_min: f64,
    pub x_max: f64,
    /// Far matching anchor; defaults to `x_max`.
    pub x_far: Option<f64>,
    pub grid: usize,
    pub far_field: FarFieldSource,
    pub k_far: Option<f64>,
    /// Oracle convergence tolerance on T.
    pub tol: f64,
    pub fit: FitSettings,
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    /// Parse `text`; relative file paths are resolved against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let entries = Entries::parse(text)?;
        entries.build(base)
    }

    pub fn x_far(&self) -> f64 {
        self.x_far.unwrap_or(self.x_max)
    }

    /// Final consistency checks, run after command-line overrides.
    pub fn validate(&self) -> Result<()> {
        if self.grid < 2 {
            return Err(Error::config(None, format!("grid must be at least 2, got {}", self.grid)));
        }
        if !(self.x_min < self.x_max) {
            return Err(Error::config(None, format!("x_min = {} must be below x_max = {}", self.x_min, self.x_max)));
        }
        let x_far = self.x_far();
        if !(self.x_min < x_far && x_far <= self.x_max) {
            return Err(Error::config(None, format!("x_far = {x_far} must lie in (x_min, x_max]")));
        }
        if !(self.tol > 0.0) {
            return Err(Error::config(None, format!("tol must be positive, got {}", self.tol)));
        }
        if !self.energy.is_finite() {
            return Err(Error::config(None, "energy must be finite"));
        }
        Ok(())
    }
}

struct Entry {
    line: usize,
    value: String,
}

struct Entries {
    map: HashMap<String, Entry>,
}

impl Entries {
    fn parse(text: &str) -> Result<Self> {
        let mut map = HashMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(Error::config(Some(line), format!("expected `key = value`, found `{content}`")));
            };
            let key = key.trim();
            let value = value.trim();
            if !KNOWN_KEYS.contains(&key) {
                return Err(Error::config(Some(line), format!("unknown key `{key}`")));
            }
            if value.is_empty() {
                return Err(Error::config(Some(line), format!("key `{key}` has no value")));
            }
            // `type` is an alternative spelling of the variant selector
            let key = if key == "type" { "potential" } else { key };
            if let Some(prev) = map.insert(key.to_string(), Entry { line, value: value.to_string() }) {
                return Err(Error::config(Some(line), format!("duplicate key `{key}` (first on line {})", prev.line)));
            }
        }
        Ok(Self { map })
    }

    fn str(&self, key: &str) -> Option<(&str, usize)> {
        self.map.get(key).map(|e| (e.value.as_str(), e.line))
    }

    fn has(&self, key: &str) -> bool {
        self.map.contains_key(key)
    }

    fn f64(&self, key: &str) -> Result<Option<f64>> {
        let Some((v, line)) = self.str(key) else { return Ok(None) };
        let x: f64 = v
            .parse()
            .map_err(|_| Error::config(Some(line), format!("`{key}` expects a number, got `{v}`")))?;
        if !x.is_finite() {
            return Err(Error::config(Some(line), format!("`{key}` must be finite")));
        }
        Ok(Some(x))
    }

    fn req(&self, key: &str) -> Result<f64> {
        self.f64(key)?.ok_or_else(|| Error::MissingKey(key.to_string()))
    }

    fn usize(&self, key: &str) -> Result<Option<usize>> {
        let Some((v, line)) = self.str(key) else { return Ok(None) };
        v.parse()
            .map(Some)
            .map_err(|_| Error::config(Some(line), format!("`{key}` expects a non-negative integer, got `{v}`")))
    }

    fn path(&self, key: &str, base: &Path) -> Option<PathBuf> {
        self.str(key).map(|(v, _)| base.join(v))
    }

    /// Reject keys that make no sense for the chosen variant.
    fn forbid(&self, keys: &[&str], why: &str) -> Result<()> {
        for k in keys {
            if let Some((_, line)) = self.str(k) {
                return Err(Error::config(Some(line), format!("key `{k}` is not allowed {why}")));
            }
        }
        Ok(())
    }

    fn build(&self, base: &Path) -> Result<RunConfig> {
        let (kind, kind_line) = self.str("potential").ok_or_else(|| Error::MissingKey("potential".into()))?;
        let mut default_energy = None;
        let mut default_domain = None;
        let potential = match kind {
            "constant" => PotentialSource::Analytic(PotentialSpec::Constant { v0: self.req("v0")? }),
            "rectangular" => {
                let (lo, hi) = (self.req("barrier_lo")?, self.req("barrier_hi")?);
                if !(lo < hi) {
                    return Err(Error::config(self.str("barrier_hi").map(|s| s.1), "barrier_lo must be below barrier_hi"));
                }
                PotentialSource::Analytic(PotentialSpec::Rectangular { v0: self.req("v0")?, x_lo: lo, x_hi: hi })
            }
            "exponential" => {
                let c = self.req("c")?;
                if c == 0.0 {
                    return Err(Error::config(self.str("c").map(|s| s.1), "exponential decay length c must be nonzero"));
                }
                PotentialSource::Analytic(PotentialSpec::Exponential { a: self.req("a")?, b: self.req("b")?, c })
            }
            "quadratic" => PotentialSource::Analytic(PotentialSpec::Quadratic {
                a: self.req("a")?,
                b: self.req("b")?,
                c: self.req("c")?,
            }),
            "kerr_dirac" => {
                let r = PhysicalParams::reference();
                let omega = match self.str("omega_convention") {
                    None | Some(("squared", _)) => OmegaConvention::Squared,
                    Some(("literal", _)) => OmegaConvention::Literal,
                    Some((v, line)) => {
                        return Err(Error::config(Some(line), format!("omega_convention must be squared|literal, got `{v}`")))
                    }
                };
                let params = PhysicalParams {
                    spin: self.f64("spin")?.unwrap_or(r.spin),
                    mass: self.f64("mass")?.unwrap_or(r.mass),
                    particle_mass: self.f64("particle_mass")?.unwrap_or(r.particle_mass),
                    frequency: self.f64("frequency")?.unwrap_or(r.frequency),
                    separation_constant: self.f64("separation_constant")?.unwrap_or(r.separation_constant),
                    azimuthal: self.f64("azimuthal")?.unwrap_or(r.azimuthal),
                    orbital: self.f64("orbital")?.unwrap_or(r.orbital),
                    omega,
                };
                let map = match self.str("coordinate_map") {
                    None | Some(("tortoise", _)) => CoordinateMap::Tortoise,
                    Some(("identity", _)) => CoordinateMap::Identity,
                    Some((v, line)) => {
                        return Err(Error::config(Some(line), format!("coordinate_map must be tortoise|identity, got `{v}`")))
                    }
                };
                default_energy = Some(params.frequency * params.frequency);
                let spec = PotentialSpec::kerr_dirac(params, map).map_err(|e| Error::config(Some(kind_line), e))?;
                PotentialSource::Fitted(spec)
            }
            "tabulated" => {
                let path = self.path("table", base).ok_or_else(|| Error::MissingKey("table".into()))?;
                let points = read_columns(&path)?;
                PotentialSource::Fitted(PotentialSpec::tabulated(&points)?)
            }
            "reference_table" => {
                default_energy = Some(0.64);
                default_domain = Some((crate::piecewise::TABLE_X_MIN, 310.0));
                PotentialSource::ReferenceTable
            }
            "model" => {
                let path = self.path("model", base).ok_or_else(|| Error::MissingKey("model".into()))?;
                let text = std::fs::read_to_string(&path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
                let model = PiecewiseModel::from_text(&text)?;
                default_energy = Some(model.energy());
                default_domain = Some(model.domain());
                PotentialSource::Model(model)
            }
            other => {
                return Err(Error::config(
                    Some(kind_line),
                    format!(
                        "unknown potential `{other}` (expected constant|rectangular|exponential|quadratic|kerr_dirac|tabulated|reference_table|model)"
                    ),
                ))
            }
        };
        if !matches!(potential, PotentialSource::Fitted(PotentialSpec::KerrDirac { .. })) {
            self.forbid(
                &["spin", "mass", "particle_mass", "frequency", "separation_constant", "azimuthal", "orbital", "omega_convention", "coordinate_map"],
                "for this potential",
            )?;
        }

        let energy = match (self.f64("energy")?, default_energy) {
            (Some(e), _) | (None, Some(e)) => e,
            (None, None) => return Err(Error::MissingKey("energy".into())),
        };
        let (x_min, x_max) = match default_domain {
            Some((lo, hi)) => (self.f64("x_min")?.unwrap_or(lo), self.f64("x_max")?.unwrap_or(hi)),
            None => (self.req("x_min")?, self.req("x_max")?),
        };
        let far_field = match self.str("far_field") {
            None | Some(("values", _)) if self.has("t_far") || self.has("r_far") => {
                let t = self.req("t_far")?;
                let r = match self.f64("r_far")? {
                    Some(r) => r,
                    None => 1.0 - t,
                };
                if (t + r - 1.0).abs() > 1e-12 || !(0.0..=1.0).contains(&t) || !(0.0..=1.0).contains(&r) {
                    return Err(Error::config(
                        self.str("t_far").map(|s| s.1),
                        format!("t_far = {t} and r_far = {r} must lie in [0, 1] and sum to 1"),
                    ));
                }
                FarFieldSource::Values { transmission: t, reflection: r }
            }
            Some(("values", line)) => return Err(Error::config(Some(line), "far_field = values needs t_far (and optionally r_far)")),
            None | Some(("wkb", _)) => FarFieldSource::Wkb,
            Some(("oracle", _)) => FarFieldSource::Oracle,
            Some((v, line)) => return Err(Error::config(Some(line), format!("far_field must be values|oracle|wkb, got `{v}`"))),
        };
        if !matches!(far_field, FarFieldSource::Values { .. }) {
            self.forbid(&["t_far", "r_far"], "unless far_field = values (exactly one far-field source)")?;
        }

        let form = match self.str("form") {
            None => SegmentForm::Exponential,
            Some((v, line)) => SegmentForm::parse(v)
                .ok_or_else(|| Error::config(Some(line), format!("form must be quadratic|exponential, got `{v}`")))?,
        };
        let knots = match self.str("knots") {
            None | Some(("auto", _)) => Knots::Auto { max_segments: self.usize("max_segments")?.unwrap_or(24) },
            Some((v, line)) => {
                let ks = v
                    .split(',')
                    .map(|s| s.trim())
                    .filter(|s| !s.is_empty())
                    .map(|s| s.parse::<f64>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|_| Error::config(Some(line), format!("knots must be `auto` or a comma-separated list, got `{v}`")))?;
                Knots::Explicit(ks)
            }
        };
        let fit = FitSettings {
            samples: self.path("samples", base),
            form,
            knots,
            continuity_weight: self.f64("continuity_weight")?.unwrap_or(1e4),
            tol_fit: self.f64("tol_fit")?.unwrap_or(1e-3),
        };

        let cfg = RunConfig {
            potential,
            energy,
            x_min,
            x_max,
            x_far: self.f64("x_far")?,
            grid: self.usize("grid")?.unwrap_or(721),
            far_field,
            k_far: self.f64("k_far")?,
            tol: self.f64("tol")?.unwrap_or(1e-6),
            fit,
        };
        if let Some(k) = cfg.k_far {
            if !(k > 0.0) {
                return Err(Error::config(self.str("k_far").map(|s| s.1), "k_far must be positive"));
            }
        }
        Ok(cfg)
    }
}

/// Two whitespace- or comma-separated numeric columns; `#` starts a comment.
pub fn read_columns(path: &Path) -> Result<Vec<(f64, f64)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_columns(&text)
}

pub fn parse_columns(text: &str) -> Result<Vec<(f64, f64)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let fields: Vec<&str> = content.split(|c: char| c == ',' || c.is_whitespace()).filter(|s| !s.is_empty()).collect();
        let parsed: Option<Vec<f64>> = fields.iter().map(|f| f.parse().ok()).collect();
        match parsed {
            Some(v) if v.len() == 2 => out.push((v[0], v[1])),
            // tolerate a single header row
            None if out.is_empty() && i == text.lines().position(|l| !l.trim().is_empty()).unwrap_or(0) => continue,
            _ => return Err(Error::config(Some(i + 1), format!("expected two numeric columns, found `{content}`"))),
        }
    }
    if out.is_empty() {
        return Err(Error::config(None, "no data rows"));
    }
    Ok(out)
}

/// Build the piecewise model for `potential` without fitting.
pub(crate) fn direct_model(cfg: &RunConfig) -> Option<Result<PiecewiseModel>> {
    match &cfg.potential {
        PotentialSource::Analytic(spec) => Some(PiecewiseModel::from_spec(spec, cfg.energy, cfg.x_min, cfg.x_max)),
        PotentialSource::ReferenceTable => Some(load_reference_table(cfg.x_min).map(|m| m.with_energy(cfg.energy))),
        PotentialSource::Model(m) => Some(Ok(m.with_energy(cfg.energy))),
        PotentialSource::Fitted(_) => None,
    }
}
