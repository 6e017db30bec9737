//! Run configuration: TOML with one table per concern.

use crate::error::{Error, Result};
use crate::operator::{Discretization, Scheme};
use crate::surface::{load_mesh, make_sphere};
use crate::volume::Gaussian;
use crate::{PhysParams, C64};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Curves,
    BoundStates,
    NonrelLimit,
    TraceCheck,
    Certify,
    OracleCompare,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Physics {
    pub m: f64,
    pub c: f64,
    pub eta: Option<f64>,
    pub eta_list: Option<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SurfaceKindSpec {
    #[default]
    Sphere,
    Mesh,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeChoice {
    #[default]
    Auto,
    Nystrom,
    Galerkin,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceSpec {
    #[serde(default)]
    pub kind: SurfaceKindSpec,
    #[serde(default = "one")]
    pub radius: f64,
    #[serde(default = "default_n_theta")]
    pub n_theta: usize,
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub scheme: SchemeChoice,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default = "default_points")]
    pub points: usize,
    /// Defaults to `-mc^2`.
    pub min: Option<f64>,
    /// Defaults to `mc^2`.
    pub max: Option<f64>,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { points: default_points(), min: None, max: None }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonrelSpec {
    #[serde(default = "default_c_list")]
    pub c_list: Vec<f64>,
    /// `[re, im]` of the spectral point relative to `mc^2`.
    #[serde(default = "default_nonrel_lambda")]
    pub lambda: [f64; 2],
    /// Half-edge of the cube whose corners are the targets.
    #[serde(default = "default_target_half")]
    pub target_half: f64,
}

impl Default for NonrelSpec {
    fn default() -> Self {
        NonrelSpec { c_list: default_c_list(), lambda: default_nonrel_lambda(), target_half: default_target_half() }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceSpec {
    #[serde(default = "default_trace_lambda")]
    pub lambda: [f64; 2],
}

impl Default for TraceSpec {
    fn default() -> Self {
        TraceSpec { lambda: default_trace_lambda() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum RuleChoice {
    #[default]
    Analytic,
    Grid,
    Rays,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSpec {
    #[serde(default = "default_center")]
    pub center: [f64; 3],
    #[serde(default = "default_width")]
    pub width: f64,
    /// Four `[re, im]` pairs.
    #[serde(default = "default_amplitude")]
    pub amplitude: [[f64; 2]; 4],
    #[serde(default)]
    pub rule: RuleChoice,
}

impl Default for SourceSpec {
    fn default() -> Self {
        SourceSpec { center: default_center(), width: default_width(), amplitude: default_amplitude(), rule: RuleChoice::default() }
    }
}

impl SourceSpec {
    pub fn gaussian(&self) -> Gaussian {
        Gaussian { center: self.center, width: self.width, amplitude: self.amplitude.map(|[re, im]| C64::new(re, im)) }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSpec {
    #[serde(default = "default_kappa_max")]
    pub kappa_max: usize,
    #[serde(default = "default_scan")]
    pub scan_points: usize,
}

impl Default for OracleSpec {
    fn default() -> Self {
        OracleSpec { kappa_max: default_kappa_max(), scan_points: default_scan() }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Relative bisection tolerance (times `mc^2`).
    #[serde(default = "default_bisection")]
    pub bisection: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { bisection: default_bisection() }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub physics: Physics,
    pub surface: SurfaceSpec,
    #[serde(default)]
    pub lambda_grid: GridSpec,
    #[serde(default)]
    pub nonrel: NonrelSpec,
    #[serde(default)]
    pub trace: TraceSpec,
    #[serde(default)]
    pub source: SourceSpec,
    #[serde(default)]
    pub oracle: OracleSpec,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Directory containing the config, for relative mesh paths.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn one() -> f64 {
    1.0
}
fn default_n_theta() -> usize {
    24
}
fn default_points() -> usize {
    41
}
fn default_c_list() -> Vec<f64> {
    vec![8.0, 16.0, 32.0, 64.0]
}
fn default_nonrel_lambda() -> [f64; 2] {
    [0.0, 1.0]
}
fn default_target_half() -> f64 {
    1.2
}
fn default_trace_lambda() -> [f64; 2] {
    [0.3, 0.5]
}
fn default_center() -> [f64; 3] {
    [0.2, -0.1, 0.15]
}
fn default_width() -> f64 {
    0.3
}
fn default_amplitude() -> [[f64; 2]; 4] {
    [[1.0, 0.0], [0.0, 0.5], [-0.3, 0.0], [0.2, 0.1]]
}
fn default_kappa_max() -> usize {
    6
}
fn default_scan() -> usize {
    201
}
fn default_bisection() -> f64 {
    1e-13
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.message().to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::parse(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    /// Coupling used by single-eta experiments (0 when only a list is given).
    pub fn eta(&self) -> f64 {
        self.physics.eta.unwrap_or(0.0)
    }

    pub fn params(&self) -> Result<PhysParams> {
        PhysParams::new(self.physics.m, self.physics.c, self.eta())
    }

    pub fn etas(&self) -> Vec<f64> {
        match (&self.physics.eta_list, self.physics.eta) {
            (Some(l), _) => l.clone(),
            (None, Some(e)) => vec![e],
            (None, None) => vec![0.0],
        }
    }

    pub fn mesh_path(&self) -> Option<PathBuf> {
        self.surface.path.as_ref().map(|p| if p.is_absolute() { p.clone() } else { self.base_dir.join(p) })
    }

    pub fn lambda_grid(&self) -> Result<Vec<f64>> {
        let mc2 = self.params()?.rest_energy();
        let lo = self.lambda_grid.min.unwrap_or(-mc2);
        let hi = self.lambda_grid.max.unwrap_or(mc2);
        Ok(crate::spectral::linspace(lo, hi, self.lambda_grid.points))
    }

    pub fn discretization(&self) -> Result<Discretization> {
        let s = &self.surface;
        match s.kind {
            SurfaceKindSpec::Sphere => match s.scheme {
                SchemeChoice::Auto | SchemeChoice::Galerkin => Discretization::spherical(s.radius, s.n_theta),
                SchemeChoice::Nystrom => Ok(Discretization::nystrom(make_sphere(s.radius, s.n_theta)?)),
            },
            SurfaceKindSpec::Mesh => {
                let path = self.mesh_path().ok_or_else(|| Error::Invalid("mesh surface needs surface.path".into()))?;
                let surf = load_mesh(path)?;
                match s.scheme {
                    SchemeChoice::Galerkin => Discretization::with_scheme(surf, Scheme::SphericalGalerkin),
                    _ => Ok(Discretization::nystrom(surf)),
                }
            }
        }
    }

    /// Problems found without computing anything; empty means valid.
    pub fn diagnostics(&self) -> Vec<String> {
        let mut out = Vec::new();
        let ph = &self.physics;
        if !(ph.m > 0.0 && ph.m.is_finite()) {
            out.push(format!("physics.m must be positive and finite (got {})", ph.m));
        }
        if !(ph.c > 0.0 && ph.c.is_finite()) {
            out.push(format!("physics.c must be positive and finite (got {})", ph.c));
        }
        match (&ph.eta, &ph.eta_list) {
            (Some(_), Some(_)) => out.push("give either physics.eta or physics.eta_list, not both".into()),
            (None, Some(l)) if l.is_empty() => out.push("physics.eta_list is empty".into()),
            _ => {}
        }
        for eta in self.etas() {
            if !eta.is_finite() {
                out.push(format!("coupling eta = {eta} is not finite"));
            } else if ph.c > 0.0 && (eta.abs() - 2.0 * ph.c).abs() <= 1e-12 * ph.c {
                out.push(format!("excluded coupling η=±2c (eta = {eta}, c = {})", ph.c));
            }
        }
        let s = &self.surface;
        match s.kind {
            SurfaceKindSpec::Sphere => {
                if !(s.radius > 0.0 && s.radius.is_finite()) {
                    out.push(format!("surface.radius must be positive (got {})", s.radius));
                }
                if s.n_theta < 4 {
                    out.push(format!("surface.n_theta must be at least 4 (got {})", s.n_theta));
                }
            }
            SurfaceKindSpec::Mesh => match self.mesh_path() {
                None => out.push("mesh surface needs surface.path".into()),
                Some(p) if !p.is_file() => out.push(format!("mesh file {} does not exist", p.display())),
                _ => {}
            },
        }
        if self.lambda_grid.points == 0 {
            out.push("lambda_grid.points must be positive".into());
        }
        if ph.m > 0.0 && ph.c > 0.0 {
            let mc2 = ph.m * ph.c * ph.c;
            for (name, v) in [("min", self.lambda_grid.min), ("max", self.lambda_grid.max)] {
                if let Some(v) = v {
                    if !(v.abs() <= mc2) {
                        out.push(format!("lambda_grid.{name} = {v} outside spectral gap [-{mc2}, {mc2}]"));
                    }
                }
            }
            if let (Some(a), Some(b)) = (self.lambda_grid.min, self.lambda_grid.max) {
                if !(a <= b) {
                    out.push("lambda_grid.min exceeds lambda_grid.max".into());
                }
            }
        }
        if self.experiment == Experiment::NonrelLimit {
            let l = &self.nonrel.c_list;
            if l.is_empty() || l.windows(2).any(|w| !(w[1] > w[0])) || l.iter().any(|c| !(*c > 0.0)) {
                out.push("nonrel.c_list must be positive and strictly increasing".into());
            }
            if self.nonrel.lambda[1] == 0.0 {
                out.push("nonrel.lambda must be non-real".into());
            }
            for eta in self.etas() {
                if self.nonrel.c_list.iter().any(|c| (eta.abs() - 2.0 * c).abs() <= 1e-12 * c) {
                    out.push(format!("excluded coupling η=±2c for some c in nonrel.c_list (eta = {eta})"));
                }
            }
        }
        if self.experiment == Experiment::TraceCheck && self.trace.lambda[1] == 0.0 {
            out.push("trace.lambda must be non-real".into());
        }
        if self.experiment == Experiment::OracleCompare && s.kind != SurfaceKindSpec::Sphere {
            out.push("oracle-compare needs a sphere".into());
        }
        if !(self.source.width > 0.0) {
            out.push("source.width must be positive".into());
        }
        out
    }
}

/// Parses and checks a config file; the listing is empty when it is valid.
pub fn validate(path: impl AsRef<Path>) -> Vec<String> {
    match RunConfig::load(path) {
        Ok(cfg) => cfg.diagnostics(),
        Err(e) => vec![e.to_string()],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
experiment = "bound-states"
physics.m = 1.0
physics.c = 1.0
physics.eta = -1.5
surface.kind = "sphere"
surface.radius = 1.0
surface.n_theta = 12
"#;

    #[test]
    fn well_formed_config_is_clean() {
        let c = RunConfig::parse(BASE).unwrap();
        assert!(c.diagnostics().is_empty(), "{:?}", c.diagnostics());
        assert_eq!(c.lambda_grid().unwrap().len(), 41);
    }

    #[test]
    fn excluded_coupling_is_reported() {
        let c = RunConfig::parse(&BASE.replace("physics.eta = -1.5", "physics.eta = 2.0")).unwrap();
        assert!(c.diagnostics().iter().any(|d| d.contains("excluded coupling η=±2c")));
    }

    #[test]
    fn grid_beyond_gap_is_reported() {
        let c = RunConfig::parse(&format!("{BASE}lambda_grid.max = 1.2\n")).unwrap();
        assert!(c.diagnostics().iter().any(|d| d.contains("outside spectral gap")));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(RunConfig::parse(&format!("{BASE}physics.mass = 2\n")), Err(Error::Parse(_))));
    }

    #[test]
    fn missing_mesh_file_is_reported() {
        let c = RunConfig::parse(&BASE.replace("surface.kind = \"sphere\"", "surface.kind = \"mesh\"\nsurface.path = \"/nonexistent/x.off\"")).unwrap();
        assert!(c.diagnostics().iter().any(|d| d.contains("does not exist")));
    }
}
