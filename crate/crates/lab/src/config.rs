//! Scenario configuration: a TOML document layered as preset defaults, then
//! the user's file, then `key.path=value` overrides.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tdeuler::euler::{BlowupSettings, DampingSplit, SolverConfig};
use tdeuler::params::{self, DampingLaw, GasLaw, WeightSpec};

use crate::diagnostic::Diagnostic;
use crate::error::{LabError, Result};
use crate::presets;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: String,
    /// Spatial dimension.
    pub n: usize,
    /// Slack of the decay index; defaults to `min(1/4, (1+λ)n/4)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    /// Seed for the optional randomized lobe of the initial data.
    pub seed: u64,
    /// Selected diagnostics; each yields exactly one verdict.
    pub diagnostics: Vec<String>,
    pub damping: DampingSection,
    pub gas: GasSection,
    pub grid: GridSection,
    pub data: DataSection,
    pub solver: SolverSection,
    pub fit: FitSection,
    pub linear: LinearSection,
    pub convolution: ConvolutionSection,
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DampingSection {
    pub lambda: f64,
    pub mu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GasSection {
    pub gamma: f64,
}

/// Periodic box `[-L, L)^n` with `points` nodes per axis. Missing entries
/// are sized by the scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub half_length: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
    /// Added to `R + T` when the half-length is sized automatically.
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    /// Support radius `R` of the bump.
    pub radius: f64,
    /// Sobolev size of the perturbation (ignored when `q0` is set).
    pub eps: f64,
    /// Excess mass; selects mass normalization when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q0: Option<f64>,
    /// Sobolev order of the `eps` normalization; defaults from `k_c`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<u32>,
    pub density: f64,
    pub velocity: [f64; 3],
    pub potential: f64,
    pub swirl: f64,
    /// Add the seeded off-centre lobe.
    pub lobe: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitChoice {
    Plain,
    IntegratingFactor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub cfl: f64,
    pub dealias: bool,
    pub t_final: f64,
    pub hyperviscosity: f64,
    pub damping_split: SplitChoice,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_dt: Option<f64>,
    /// Spacing of the dense observation times on `[0, 1]`.
    pub early_interval: f64,
    /// Log-spaced observation times on `(1, t_final]`.
    pub log_samples: usize,
    /// Extra uniformly spaced samples of the moment `F` (lower-bound checks).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub moment_interval: Option<f64>,
    /// Derivative order of the monitored norms.
    pub norm_order: u32,
    pub blowup_gradient_factor: f64,
    pub blowup_tail_fraction: f64,
    pub blowup_interval: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSection {
    /// Time window of slope fits.
    pub window: [f64; 2],
    /// Start of the window for lower-bound margins.
    pub margin_start: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearSection {
    /// Relative tolerance of the mode integrator.
    pub rtol: f64,
    /// Observation times for kernel decay, log-spaced over the fit window.
    pub samples: usize,
    /// Mode cutoff separating the fitted part from the tail estimate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cutoff: Option<f64>,
    /// Sample times of zone integrals.
    pub zone_times: Vec<f64>,
    /// Envelope constant of the zone bounds.
    pub c0: f64,
    /// Base `(t, |ξ|)` sample size per axis of the zone-bound sweep.
    pub zone_resolution: usize,
    /// Final time of the zone-bound sweep.
    pub zone_t_final: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvolutionSection {
    pub pairs: Vec<[f64; 2]>,
    pub times: Vec<f64>,
    /// Extended horizon compared against `times`.
    pub extended: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SnapshotFormat {
    None,
    Csv,
    Binary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: String,
    pub snapshots: SnapshotFormat,
    /// Number of stored snapshots, spread over the observation times.
    pub snapshot_count: usize,
}

/// Replace the value at a dotted path, creating intermediate tables.
pub fn set_path(doc: &mut toml::Table, path: &str, value: toml::Value) -> Result<()> {
    let mut keys = path.split('.').peekable();
    let mut table = doc;
    while let Some(key) = keys.next() {
        if key.is_empty() {
            return Err(LabError::config(path, "empty key segment"));
        }
        if keys.peek().is_none() {
            table.insert(key.to_string(), value);
            return Ok(());
        }
        let entry = table.entry(key.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry.as_table_mut().ok_or_else(|| LabError::config(path, format!("`{key}` is not a table")))?;
    }
    Err(LabError::config(path, "empty path"))
}

/// Parse the right-hand side of `key=value`: any TOML value, else a bare string.
pub fn parse_value(raw: &str) -> toml::Value {
    let probe = format!("v = {raw}");
    match probe.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.to_string())),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

/// Split `key=value` into the path and parsed value.
pub fn parse_override(spec: &str) -> Result<(String, toml::Value)> {
    let (k, v) = spec.split_once('=').ok_or_else(|| LabError::config(spec, "override must look like key=value"))?;
    Ok((k.trim().to_string(), parse_value(v.trim())))
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

impl ScenarioConfig {
    /// Defaults of the preset named in `doc` (or `scenario` when given), the
    /// document on top, then the overrides.
    pub fn resolve(doc: toml::Table, scenario: Option<&str>, overrides: &[(String, toml::Value)]) -> Result<Self> {
        let name = match scenario {
            Some(s) => s.to_string(),
            None => match doc.get("scenario") {
                Some(toml::Value::String(s)) => s.clone(),
                Some(_) => return Err(LabError::config("scenario", "must be a string")),
                None => return Err(LabError::config("scenario", "missing")),
            },
        };
        let preset = presets::preset(&name)?;
        let mut base = toml::Table::try_from(&preset)?;
        merge(&mut base, doc);
        base.insert("scenario".into(), toml::Value::String(name));
        for (path, value) in overrides {
            set_path(&mut base, path, value.clone())?;
        }
        let cfg: ScenarioConfig = toml::Value::Table(base).try_into()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml_str(text: &str, overrides: &[(String, toml::Value)]) -> Result<Self> {
        let doc: toml::Table = text.parse()?;
        Self::resolve(doc, None, overrides)
    }

    /// Read `source` as a TOML file when it names an existing path, else as a
    /// preset name.
    pub fn load(source: &str, overrides: &[(String, toml::Value)]) -> Result<Self> {
        let path = std::path::Path::new(source);
        if path.is_file() {
            let text = std::fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
            Self::from_toml_str(&text, overrides)
        } else {
            Self::resolve(toml::Table::new(), Some(source), overrides)
        }
    }

    pub fn to_toml_string(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn damping_law(&self) -> Result<DampingLaw> {
        DampingLaw::new(self.damping.lambda, self.damping.mu).map_err(|e| field_error("damping", e))
    }

    pub fn gas_law(&self) -> Result<GasLaw> {
        GasLaw::new(self.gas.gamma).map_err(|e| field_error("gas.gamma", e))
    }

    pub fn delta(&self) -> f64 {
        self.delta.unwrap_or_else(|| params::default_delta(self.damping.lambda, self.n))
    }

    pub fn weight(&self) -> Result<WeightSpec> {
        params::derive_constants(&self.damping_law()?, self.n, self.delta()).map_err(|e| field_error("delta", e))
    }

    pub fn selected(&self) -> Result<Vec<Diagnostic>> {
        self.diagnostics
            .iter()
            .map(|name| {
                Diagnostic::parse(name)
                    .ok_or_else(|| LabError::Diagnostic { scenario: self.scenario.clone(), name: name.clone() })
            })
            .collect()
    }

    /// Solver settings with the given observation times.
    pub fn solver_config(&self, snapshot_times: Vec<f64>) -> SolverConfig {
        let s = &self.solver;
        SolverConfig {
            cfl: s.cfl,
            dealias: s.dealias,
            t_final: s.t_final,
            snapshot_times,
            hyperviscosity: s.hyperviscosity,
            damping_split: match s.damping_split {
                SplitChoice::Plain => DampingSplit::Plain,
                SplitChoice::IntegratingFactor => DampingSplit::IntegratingFactor,
            },
            fixed_dt: s.fixed_dt,
            blowup: BlowupSettings {
                gradient_factor: s.blowup_gradient_factor,
                tail_fraction: s.blowup_tail_fraction,
                interval: s.blowup_interval,
            },
        }
    }

    /// Field-level validation; numerical invariants are re-checked by the
    /// core constructors.
    pub fn validate(&self) -> Result<()> {
        let kind = presets::kind_of(&self.scenario)?;
        if !(1..=3).contains(&self.n) {
            return Err(LabError::config("n", format!("{} not in 1..=3", self.n)));
        }
        self.damping_law()?;
        self.gas_law()?;
        if let Some(d) = self.delta {
            let upper = (1.0 + self.damping.lambda) * self.n as f64 / 2.0;
            if !(d > 0.0 && d <= upper) {
                return Err(LabError::config("delta", format!("{d} outside (0, {upper}]")));
            }
        }
        if let Some(l) = self.grid.half_length {
            if !(l > 0.0 && l.is_finite()) {
                return Err(LabError::config("grid.half_length", format!("{l} must be positive")));
            }
        }
        if let Some(p) = self.grid.points {
            if p < 8 || !p.is_power_of_two() {
                return Err(LabError::config("grid.points", format!("{p} must be a power of two >= 8")));
            }
        }
        if !(self.data.radius > 0.0) {
            return Err(LabError::config("data.radius", "must be positive"));
        }
        if !(self.data.eps >= 0.0) {
            return Err(LabError::config("data.eps", "must be nonnegative"));
        }
        let s = &self.solver;
        if !(s.t_final > 0.0 && s.t_final.is_finite()) {
            return Err(LabError::config("solver.t_final", "must be positive and finite"));
        }
        if !(s.early_interval > 0.0 && s.early_interval <= 1.0) {
            return Err(LabError::config("solver.early_interval", "must lie in (0, 1]"));
        }
        if let Some(m) = s.moment_interval {
            if !(m > 0.0) {
                return Err(LabError::config("solver.moment_interval", "must be positive"));
            }
        }
        let [a, b] = self.fit.window;
        if !(a >= 0.0 && b > a) {
            return Err(LabError::config("fit.window", format!("[{a}, {b}] is not an increasing pair")));
        }
        if !(self.linear.rtol > 0.0 && self.linear.rtol < 1e-2) {
            return Err(LabError::config("linear.rtol", "must lie in (0, 1e-2)"));
        }
        if self.linear.zone_times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(LabError::config("linear.zone_times", "must be strictly increasing"));
        }
        if !(self.linear.c0 > 0.0) {
            return Err(LabError::config("linear.c0", "must be positive"));
        }
        for (i, [a, b]) in self.convolution.pairs.iter().enumerate() {
            if !(*a > 1.0 && *b > 0.0 && b <= a) {
                return Err(LabError::config(
                    format!("convolution.pairs[{i}]"),
                    format!("need a > 1 and 0 < b <= a, got ({a}, {b})"),
                ));
            }
        }
        for d in self.selected()? {
            if !d.belongs_to(kind) {
                return Err(LabError::Diagnostic { scenario: self.scenario.clone(), name: d.label() });
            }
        }
        Ok(())
    }

    /// Hex digest of the effective configuration, excluding the output
    /// location.
    pub fn digest(&self) -> String {
        let mut c = self.clone();
        c.output.dir = String::new();
        let text = serde_json::to_string(&c).expect("config serializes");
        let hash = Sha256::digest(text.as_bytes());
        hash.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// `scenario-<first 12 hex digits>`.
    pub fn run_name(&self) -> String {
        format!("{}-{}", self.scenario, &self.digest()[..12])
    }
}

fn field_error(field: &str, e: tdeuler::Error) -> LabError {
    match e {
        tdeuler::Error::InvalidParameter { name, reason } => LabError::config(format!("{field} ({name})"), reason),
        other => LabError::Numerics(other),
    }
}
