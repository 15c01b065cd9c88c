use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use wgpca::cpca::SolverOptions;
use wgpca::gpca::Method;
use wgpca::measures::extended_real;
use wgpca::GridConfig;

use crate::error::CliError;

pub const DEFAULT_TAUS: [f64; 6] = [-2.0, -1.0, -0.5, 0.5, 1.0, 2.0];

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "WGPCA_OUT";

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Omega {
    #[serde(with = "extended_real")]
    pub lo: f64,
    #[serde(with = "extended_real")]
    pub hi: f64,
}

impl Omega {
    pub const REAL_LINE: Omega = Omega {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    };

    pub fn is_compact(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }
}

/// `lo,hi`; either side may be `inf`/`-inf`.
pub fn parse_omega(s: &str) -> Result<Omega, String> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| format!("expected lo,hi, got {s:?}"))?;
    let side = |x: &str| {
        x.trim()
            .parse::<f64>()
            .map_err(|e| format!("bad bound {x:?}: {e}"))
    };
    Ok(Omega {
        lo: side(a)?,
        hi: side(b)?,
    })
}

pub fn parse_method(s: &str) -> Result<Method, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| format!("unknown method {s:?} (expected gpca-global, gpca-nested or fpca)"))
}

/// Settings of the `consistency` subcommand.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConsistencySettings {
    pub schedule: Vec<usize>,
    pub trials: usize,
    /// Range of the random scale `a`.
    pub scale: (f64, f64),
    /// Range of the random shift `b`.
    pub shift: (f64, f64),
    /// The base law is a standard normal truncated to `[-truncation, truncation]`.
    pub truncation: f64,
}

impl Default for ConsistencySettings {
    fn default() -> Self {
        ConsistencySettings {
            schedule: vec![25, 100, 400],
            trials: 50,
            scale: (0.5, 1.5),
            shift: (-1.0, 1.0),
            truncation: 3.0,
        }
    }
}

/// Everything a run depends on. Resolved from defaults, then `--config`,
/// then command-line flags, and echoed to `run.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub grid: usize,
    pub omega: Omega,
    pub method: Method,
    pub k: usize,
    /// Also used as the solver seed.
    pub seed: u64,
    pub taus: Vec<f64>,
    /// Cells of every density curve written.
    pub density_cells: usize,
    /// Geodesic subdivisions.
    pub steps: usize,
    pub consistency: ConsistencySettings,
    pub solver: SolverOptions,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            grid: 1000,
            omega: Omega::REAL_LINE,
            method: Method::default(),
            k: 2,
            seed: 0,
            taus: DEFAULT_TAUS.to_vec(),
            density_cells: 512,
            steps: 5,
            consistency: ConsistencySettings::default(),
            solver: SolverOptions::default(),
            out: None,
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let bytes = fs::read(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_slice(&bytes)
            .map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))
    }

    pub fn grid_config(&self) -> Result<GridConfig, CliError> {
        GridConfig::new(self.grid, self.omega.lo, self.omega.hi).map_err(CliError::Input)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Usage(m));
        self.grid_config()?;
        if self.k == 0 {
            return bad("k must be at least 1".into());
        }
        if let Some(t) = self.taus.iter().find(|t| !t.is_finite()) {
            return bad(format!("mode parameter {t} is not finite"));
        }
        if self.density_cells < 2 {
            return bad(format!(
                "density_cells = {} must be at least 2",
                self.density_cells
            ));
        }
        if self.steps == 0 {
            return bad("steps must be at least 1".into());
        }
        let c = &self.consistency;
        if c.schedule.is_empty() || c.schedule.iter().any(|&n| n < 2) {
            return bad(format!(
                "consistency schedule {:?} needs sample sizes of at least 2",
                c.schedule
            ));
        }
        if c.trials == 0 {
            return bad("consistency trials must be at least 1".into());
        }
        if !(c.scale.0 > 0.0 && c.scale.0 <= c.scale.1) {
            return bad(format!(
                "consistency scale range {:?} must satisfy 0 < lo <= hi",
                c.scale
            ));
        }
        if !(c.shift.0 <= c.shift.1) || !(c.truncation > 0.0) {
            return bad("consistency shift range or truncation is invalid".into());
        }
        Ok(())
    }

    /// Output directory: `--out` or the config's `out`, else
    /// `$WGPCA_OUT/<command>`, else `wgpca-out/<command>`.
    pub fn out_dir(&self, command: &str) -> PathBuf {
        if let Some(out) = &self.out {
            return out.clone();
        }
        let root = std::env::var_os(OUT_ENV)
            .filter(|v| !v.is_empty())
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("wgpca-out"));
        root.join(command)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn omega_accepts_infinite_bounds() {
        assert_eq!(parse_omega("-inf,inf").unwrap(), Omega::REAL_LINE);
        assert_eq!(parse_omega("0, 100").unwrap(), Omega { lo: 0.0, hi: 100.0 });
        assert!(parse_omega("3").is_err());
    }

    #[test]
    fn partial_config_keeps_defaults() {
        let c: RunConfig =
            serde_json::from_str(r#"{"k": 3, "omega": {"lo": 0, "hi": "inf"}}"#).unwrap();
        assert_eq!(c.k, 3);
        assert_eq!(c.grid, 1000);
        assert_eq!(c.omega.hi, f64::INFINITY);
        let back: RunConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"kk": 3}"#).is_err());
    }

    #[test]
    fn methods_by_name() {
        assert_eq!(parse_method("fpca").unwrap(), Method::Fpca);
        assert_eq!(parse_method("gpca-nested").unwrap(), Method::GpcaNested);
        assert!(parse_method("pca").is_err());
    }
}
