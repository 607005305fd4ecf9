//! Resolved run configuration: embedded defaults, an optional config file,
//! then flags and `BELLMAN_SEED`.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use dyadic_bellman::Axis;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const DEFAULTS: &str = include_str!("../defaults.toml");
pub const SEED_ENV: &str = "BELLMAN_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisSpec {
    pub min: f64,
    pub max: f64,
    pub n: usize,
}

impl AxisSpec {
    pub fn axis(&self) -> Result<Axis> {
        Ok(Axis::new(self.min, self.max, self.n)?)
    }
}

/// First axis (`p` or `x`) and second axis (`q` or `λ`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub p: AxisSpec,
    pub q: AxisSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grids {
    pub davis: GridSpec,
    pub bollobas: GridSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub check: f64,
    pub solver: f64,
    pub root: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DyadicSettings {
    pub samples: usize,
    pub test_depth: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McSettings {
    pub paths: usize,
    pub dt: f64,
    pub t_max: f64,
    pub bootstrap: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

/// Everything a run depends on. Written next to the results so the run can
/// be repeated with `--config`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    pub alphas: Vec<f64>,
    pub alpha: f64,
    pub seed: u64,
    pub depth: usize,
    pub a_set: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
    pub tol: Tolerances,
    pub grid: Grids,
    pub dyadic: DyadicSettings,
    pub mc: McSettings,
}

impl SuiteConfig {
    pub fn defaults() -> Self {
        toml::from_str(DEFAULTS).expect("embedded defaults parse")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Ok(toml::from_str(&text)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

/// Overrides collected from the command line.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub alpha: Vec<f64>,
    pub grid: Vec<String>,
    pub a_set: Option<usize>,
    pub seed: Option<u64>,
    pub depth: Option<usize>,
    pub paths: Option<usize>,
    pub dt: Option<f64>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
}

/// Which grid a `--grid` flag applies to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridTarget {
    Davis,
    Bollobas,
}

impl SuiteConfig {
    /// Applies flags, then `env_seed` when no `--seed` was given.
    pub fn resolve(mut self, o: &Overrides, env_seed: Option<&str>, grid_target: GridTarget) -> Result<Self> {
        match o.alpha.as_slice() {
            [] => {}
            [a] => {
                self.alpha = *a;
                self.alphas = vec![*a];
            }
            list => {
                self.alpha = list[0];
                self.alphas = list.to_vec();
            }
        }
        if !o.grid.is_empty() {
            let grid = match grid_target {
                GridTarget::Davis => &mut self.grid.davis,
                GridTarget::Bollobas => &mut self.grid.bollobas,
            };
            for spec in &o.grid {
                let (which, axis) = parse_axis(spec)?;
                match which {
                    AxisName::First => grid.p = axis,
                    AxisName::Second => grid.q = axis,
                }
            }
        }
        if let Some(n) = o.a_set {
            self.a_set = n;
        }
        match (o.seed, env_seed) {
            (Some(s), _) => self.seed = s,
            (None, Some(s)) => {
                self.seed = s
                    .trim()
                    .parse()
                    .map_err(|_| CliError::Usage(format!("{SEED_ENV}={s:?} is not a 64-bit unsigned integer")))?;
            }
            (None, None) => {}
        }
        if let Some(d) = o.depth {
            self.depth = d;
        }
        if let Some(p) = o.paths {
            self.mc.paths = p;
        }
        if let Some(dt) = o.dt {
            self.mc.dt = dt;
        }
        if o.out.is_some() {
            self.out.clone_from(&o.out);
        }
        if o.format.is_some() {
            self.format = o.format;
        }
        Ok(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum AxisName {
    First,
    Second,
}

/// `p:min,max,n` (also `x:`) or `q:min,max,n` (also `lambda:`).
fn parse_axis(spec: &str) -> Result<(AxisName, AxisSpec)> {
    let bad = || CliError::Usage(format!("bad grid spec {spec:?}, expected p:min,max,n or q:min,max,n"));
    let (name, rest) = spec.split_once(':').ok_or_else(bad)?;
    let which = match name.trim() {
        "p" | "x" => AxisName::First,
        "q" | "lambda" | "l" => AxisName::Second,
        _ => return Err(bad()),
    };
    let parts: Vec<&str> = rest.split(',').map(str::trim).collect();
    let [min, max, n] = parts.as_slice() else {
        return Err(bad());
    };
    let axis = AxisSpec {
        min: f64::from_str(min).map_err(|_| bad())?,
        max: f64::from_str(max).map_err(|_| bad())?,
        n: usize::from_str(n).map_err(|_| bad())?,
    };
    axis.axis()?;
    Ok((which, axis))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let d = SuiteConfig::defaults();
        assert_eq!(d.alpha, 3.0);
        assert_eq!(d.grid.davis.p.n, 401);
        let back: SuiteConfig = toml::from_str(&d.to_toml()).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn grid_flags() {
        let o = Overrides { grid: vec!["p:-1,1,11".into(), "lambda:0,2,5".into()], ..Default::default() };
        let c = SuiteConfig::defaults().resolve(&o, None, GridTarget::Bollobas).unwrap();
        assert_eq!(c.grid.bollobas.p, AxisSpec { min: -1.0, max: 1.0, n: 11 });
        assert_eq!(c.grid.bollobas.q.n, 5);
        assert_eq!(c.grid.davis, SuiteConfig::defaults().grid.davis);
        for bad in ["p:1,0,5", "z:0,1,3", "p:0,1", "q:a,1,3"] {
            let o = Overrides { grid: vec![bad.into()], ..Default::default() };
            assert!(SuiteConfig::defaults().resolve(&o, None, GridTarget::Davis).is_err(), "{bad}");
        }
    }

    #[test]
    fn seed_precedence() {
        let d = SuiteConfig::defaults();
        assert_eq!(d.clone().resolve(&Overrides::default(), Some("7"), GridTarget::Davis).unwrap().seed, 7);
        let o = Overrides { seed: Some(9), ..Default::default() };
        assert_eq!(d.clone().resolve(&o, Some("7"), GridTarget::Davis).unwrap().seed, 9);
        assert!(d.resolve(&Overrides::default(), Some("x"), GridTarget::Davis).is_err());
    }

    #[test]
    fn alpha_list() {
        let o = Overrides { alpha: vec![2.0, 4.0], ..Default::default() };
        let c = SuiteConfig::defaults().resolve(&o, None, GridTarget::Davis).unwrap();
        assert_eq!(c.alphas, vec![2.0, 4.0]);
        assert_eq!(c.alpha, 2.0);
    }
}
