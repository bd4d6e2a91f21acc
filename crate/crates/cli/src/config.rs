//! Experiment configuration: TOML on disk, flag overrides on the command line.

use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use qce_core::amol::{AmolParams, LatticeGrid, MotionalPrep, SpinScale};
use qce_core::classical::{FreeCoordinate, Integrator, Scheme, SectionDef};
use qce_core::kicked_top::KickedTopParams;
use qce_core::spin::SpinSpace;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    Amol,
    Qkt,
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Model::Amol => "amol",
            Model::Qkt => "qkt",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunType {
    Spectrum,
    Entropy,
    ClassicalSection,
    Lyapunov,
    Analyze,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AmolConfig {
    pub v1: f64,
    pub theta_l_deg: f64,
    pub mu_b_bx: f64,
    pub spin_f: f64,
    pub spin_scale: String,
    /// `gaussian` or `diabatic`.
    pub prep: String,
    pub width_over_lambda: f64,
    pub diabatic_m: f64,
}

impl Default for AmolConfig {
    fn default() -> Self {
        AmolConfig {
            v1: 160.0,
            theta_l_deg: 80.0,
            mu_b_bx: 12.0,
            spin_f: 4.0,
            spin_scale: "normalized".into(),
            prep: "gaussian".into(),
            width_over_lambda: 0.07,
            diabatic_m: 4.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub n_points: usize,
    pub n_periods: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { n_points: 256, n_periods: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QktConfig {
    pub kappa: f64,
    pub p_rot: f64,
    pub tau: f64,
    pub j: f64,
}

impl Default for QktConfig {
    fn default() -> Self {
        QktConfig { kappa: 3.0, p_rot: PI / 2.0, tau: 1.0, j: 25.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixedPointTag {
    /// First elliptic fixed point of the classical map.
    Elliptic,
    /// Grid point with the largest finite-time Lyapunov exponent.
    Chaotic,
}

/// Initial state: `(z/λ, p/ħk, θ, φ)` for the lattice atom, `(θ, φ)` or a
/// fixed-point tag for the kicked top.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateSpec {
    pub label: String,
    #[serde(default)]
    pub z0: f64,
    #[serde(default)]
    pub p0: f64,
    #[serde(default)]
    pub theta: f64,
    #[serde(default)]
    pub phi: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_point: Option<FixedPointTag>,
}

impl StateSpec {
    pub fn point(label: &str, z0: f64, p0: f64, theta: f64, phi: f64) -> Self {
        StateSpec { label: label.into(), z0, p0, theta, phi, fixed_point: None }
    }

    pub fn tagged(label: &str, tag: FixedPointTag) -> Self {
        StateSpec { label: label.into(), z0: 0.0, p0: 0.0, theta: 0.0, phi: 0.0, fixed_point: Some(tag) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct TimeConfig {
    pub t_start: f64,
    /// Defaults to 50 (lattice atom) or 500 kicks (kicked top).
    pub t_end: Option<f64>,
    /// Defaults to 0.005 (lattice atom) or 1 kick (kicked top).
    pub dt: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    /// `hann` or `none`.
    pub window: String,
    pub zero_pad: usize,
    /// Rise-fit window ends where `S` first reaches this fraction of its first local maximum.
    pub rise_fraction: f64,
    /// Number of dominant eigenstates reported in support summaries.
    pub support_top: usize,
    /// When set, an entropy series restricted to this many dominant eigenstates is also produced.
    pub truncate_top: Option<usize>,
    pub renormalize: bool,
    /// Eigenstates with population below this are dropped from the full propagator.
    pub prune_threshold: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            window: "hann".into(),
            zero_pad: 4,
            rise_fraction: 0.2,
            support_top: 8,
            truncate_top: None,
            renormalize: true,
            prune_threshold: 1e-14,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassicalConfig {
    pub dt: f64,
    /// `strang`, `yoshida4` or `yoshida6`.
    pub scheme: String,
    /// Any of `mu_y`, `p`.
    pub sections: Vec<String>,
    pub n_crossings: usize,
    pub t_max: f64,
    /// When set, each initial condition is moved onto this energy shell along `free`.
    pub energy: Option<f64>,
    /// `z`, `p`, `theta` or `phi`.
    pub free: String,
    pub lyapunov_time: f64,
}

impl Default for ClassicalConfig {
    fn default() -> Self {
        ClassicalConfig {
            dt: 1e-3,
            scheme: "yoshida6".into(),
            sections: vec!["mu_y".into()],
            n_crossings: 200,
            t_max: 1000.0,
            energy: None,
            free: "theta".into(),
            lyapunov_time: 2000.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: Model,
    pub run_type: RunType,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub amol: AmolConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub qkt: QktConfig,
    #[serde(default)]
    pub time: TimeConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default)]
    pub classical: ClassicalConfig,
    #[serde(default)]
    pub states: Vec<StateSpec>,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("qce-out")
}

impl ExperimentConfig {
    pub fn new(model: Model, run_type: RunType) -> Self {
        ExperimentConfig {
            model,
            run_type,
            output_dir: default_output_dir(),
            amol: AmolConfig::default(),
            grid: GridConfig::default(),
            qkt: QktConfig::default(),
            time: TimeConfig::default(),
            analysis: AnalysisConfig::default(),
            classical: ClassicalConfig::default(),
            states: Vec::new(),
        }
    }

    pub fn from_toml(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> CliResult<String> {
        toml::to_string(self).map_err(|e| CliError::Config(e.to_string()))
    }

    /// SHA-256 of the configuration with the output directory blanked.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        let canonical = serde_json::to_string(&c).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// States to run: the configured list, or the model's default.
    pub fn resolved_states(&self) -> Vec<StateSpec> {
        if !self.states.is_empty() {
            return self.states.clone();
        }
        match self.model {
            Model::Amol => vec![StateSpec::point("regular", -0.15, 0.0, 1.27, 0.0)],
            Model::Qkt => vec![StateSpec::tagged("elliptic", FixedPointTag::Elliptic)],
        }
    }

    /// Sample times `t_start, t_start + dt, …, t_end`.
    pub fn times(&self) -> CliResult<Vec<f64>> {
        let (end, dt) = match self.model {
            Model::Amol => (self.time.t_end.unwrap_or(50.0), self.time.dt.unwrap_or(0.005)),
            Model::Qkt => (self.time.t_end.unwrap_or(500.0), self.time.dt.unwrap_or(1.0)),
        };
        let start = self.time.t_start;
        if !(dt > 0.0 && dt.is_finite() && end.is_finite() && start.is_finite() && end >= start) {
            return Err(CliError::Config(format!("time grid needs dt > 0 and t_end ≥ t_start, got [{start}, {end}] step {dt}")));
        }
        if self.model == Model::Qkt && (dt.fract() != 0.0 || start.fract() != 0.0) {
            return Err(CliError::Config("kicked-top times must be whole kicks".into()));
        }
        let n = ((end - start) / dt + 1e-9).floor() as usize;
        Ok((0..=n).map(|k| start + k as f64 * dt).collect())
    }

    pub fn amol_params(&self) -> CliResult<AmolParams> {
        let a = &self.amol;
        let scale: SpinScale = a.spin_scale.parse().map_err(|e: qce_core::Error| CliError::Config(e.to_string()))?;
        Ok(AmolParams::new(a.v1, a.theta_l_deg.to_radians(), a.mu_b_bx, SpinSpace::new(a.spin_f)?, scale)?)
    }

    pub fn grid(&self) -> CliResult<LatticeGrid> {
        Ok(LatticeGrid::new(self.grid.n_points, self.grid.n_periods)?)
    }

    pub fn motional_prep(&self) -> CliResult<MotionalPrep> {
        match self.amol.prep.as_str() {
            "gaussian" => Ok(MotionalPrep::Gaussian { width_over_lambda: self.amol.width_over_lambda }),
            "diabatic" => Ok(MotionalPrep::Diabatic { m: self.amol.diabatic_m }),
            other => Err(CliError::Config(format!("unknown motional preparation `{other}` (gaussian, diabatic)"))),
        }
    }

    pub fn qkt_params(&self) -> CliResult<KickedTopParams> {
        let q = &self.qkt;
        Ok(KickedTopParams::new(q.kappa, q.p_rot, q.tau, q.j)?)
    }

    pub fn integrator(&self) -> CliResult<Integrator> {
        let scheme = match self.classical.scheme.as_str() {
            "strang" => Scheme::Strang,
            "yoshida4" => Scheme::Yoshida4,
            "yoshida6" => Scheme::Yoshida6,
            other => return Err(CliError::Config(format!("unknown integrator `{other}` (strang, yoshida4, yoshida6)"))),
        };
        Ok(Integrator::new(self.classical.dt, scheme))
    }

    pub fn sections(&self) -> CliResult<Vec<(String, SectionDef)>> {
        self.classical
            .sections
            .iter()
            .map(|s| match s.as_str() {
                "mu_y" => Ok((s.clone(), SectionDef::MU_Y_RISING)),
                "p" => Ok((s.clone(), SectionDef::P_RISING)),
                other => Err(CliError::Config(format!("unknown section `{other}` (mu_y, p)"))),
            })
            .collect()
    }

    pub fn free_coordinate(&self) -> CliResult<FreeCoordinate> {
        match self.classical.free.as_str() {
            "z" => Ok(FreeCoordinate::ZOverLambda),
            "p" => Ok(FreeCoordinate::POverHbark),
            "theta" => Ok(FreeCoordinate::Theta),
            "phi" => Ok(FreeCoordinate::Phi),
            other => Err(CliError::Config(format!("unknown free coordinate `{other}` (z, p, theta, phi)"))),
        }
    }

    /// Checks every field that can be checked without running anything.
    pub fn validate(&self) -> CliResult<()> {
        let states = self.resolved_states();
        let mut labels: Vec<&str> = states.iter().map(|s| s.label.as_str()).collect();
        labels.sort_unstable();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return Err(CliError::Config("state labels must be unique".into()));
        }
        for s in &states {
            if s.label.is_empty() || !s.label.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
                return Err(CliError::Config(format!("state label `{}` must be non-empty [A-Za-z0-9_-]", s.label)));
            }
            let coords = [s.z0, s.p0, s.theta, s.phi];
            if coords.iter().any(|x| !x.is_finite()) {
                return Err(CliError::Config(format!("state `{}` has non-finite coordinates", s.label)));
            }
            if self.model == Model::Amol && s.fixed_point.is_some() {
                return Err(CliError::Config("fixed-point tags apply to the kicked top only".into()));
            }
        }
        match self.analysis.window.as_str() {
            "hann" | "none" => {}
            other => return Err(CliError::Config(format!("unknown spectral window `{other}` (hann, none)"))),
        }
        if self.analysis.zero_pad == 0 {
            return Err(CliError::Config("zero_pad must be at least 1".into()));
        }
        if !(self.analysis.rise_fraction > 0.0 && self.analysis.rise_fraction <= 1.0) {
            return Err(CliError::Config("rise_fraction must lie in (0, 1]".into()));
        }
        match self.model {
            Model::Amol => {
                let params = self.amol_params()?;
                let grid = self.grid()?;
                self.motional_prep()?;
                if matches!(self.run_type, RunType::ClassicalSection | RunType::Lyapunov) {
                    self.integrator()?.check(&params)?;
                    self.sections()?;
                    self.free_coordinate()?;
                } else {
                    qce_core::amol::HamiltonianOperator::new(&params, &grid)?;
                }
            }
            Model::Qkt => {
                self.qkt_params()?;
                if matches!(self.run_type, RunType::ClassicalSection | RunType::Lyapunov) {
                    return Err(CliError::Config("classical runs are defined for the lattice atom only".into()));
                }
            }
        }
        if matches!(self.run_type, RunType::Entropy | RunType::Analyze) {
            self.times()?;
        }
        Ok(())
    }
}
