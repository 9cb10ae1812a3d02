//! Run configuration: a command plus a key–value parameter map, merged from
//! an optional `key = value` file and command-line flags.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};
use crate::kernels::RieszParams;
use crate::lattice::{Lattice, LatticeName};

/// Version of the JSON report layout.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Lattice,
    Theta,
    Zeta,
    Green,
    Madelung,
    Energy,
    Optimize,
    ProbeCk,
    Jellium,
    KernelCheck,
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Command::Lattice => "lattice",
            Command::Theta => "theta",
            Command::Zeta => "zeta",
            Command::Green => "green",
            Command::Madelung => "madelung",
            Command::Energy => "energy",
            Command::Optimize => "optimize",
            Command::ProbeCk => "probe-ck",
            Command::Jellium => "jellium",
            Command::KernelCheck => "kernel-check",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

impl FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            _ => Err(Error::Parse(format!("unknown output format `{s}`"))),
        }
    }
}

/// Parameters shared by all commands. Unset keys take per-command defaults
/// when the configuration is resolved.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct Params {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lattice_file: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(
        default,
        deserialize_with = "one_or_many",
        skip_serializing_if = "Option::is_none"
    )]
    pub s: Option<Vec<f64>>,
    #[serde(
        default,
        deserialize_with = "one_or_many",
        skip_serializing_if = "Option::is_none"
    )]
    pub n: Option<Vec<u32>>,
    #[serde(
        default,
        deserialize_with = "one_or_many",
        skip_serializing_if = "Option::is_none"
    )]
    pub t: Option<Vec<f64>>,
    #[serde(
        default,
        rename = "R",
        alias = "r",
        deserialize_with = "one_or_many",
        skip_serializing_if = "Option::is_none"
    )]
    pub r: Option<Vec<f64>>,
    #[serde(
        default,
        deserialize_with = "one_or_many",
        skip_serializing_if = "Option::is_none"
    )]
    pub x: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub budget: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
    /// Worker cap; not part of the reported configuration, since results do
    /// not depend on it.
    #[serde(skip_serializing)]
    pub threads: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub restarts: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_iters: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_norm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub route: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub points_file: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub info: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dual: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub random: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gradient: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub compare: Option<bool>,
}

fn one_or_many<'de, D, T>(de: D) -> std::result::Result<Option<Vec<T>>, D::Error>
where
    D: Deserializer<'de>,
    T: Deserialize<'de>,
{
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany<T> {
        One(T),
        Many(Vec<T>),
    }
    Ok(Some(match OneOrMany::deserialize(de)? {
        OneOrMany::One(v) => vec![v],
        OneOrMany::Many(v) => v,
    }))
}

macro_rules! overlay {
    ($dst:expr, $src:expr, $($f:ident),*) => {
        $( if $src.$f.is_some() { $dst.$f = $src.$f.clone(); } )*
    };
}

impl Params {
    /// Parses the `key = value` configuration file format.
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(format!("config file: {}", e.message())))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// Keys set in `other` replace those in `self`.
    pub fn overlay(&mut self, other: &Params) {
        overlay!(
            self,
            other,
            name,
            lattice_file,
            d,
            s,
            n,
            t,
            r,
            x,
            seed,
            tol,
            budget,
            format,
            threads,
            restarts,
            trials,
            max_iters,
            max_norm,
            route,
            radius,
            points_file,
            info,
            dual,
            random,
            gradient,
            compare
        );
    }
}

/// A command with its fully resolved parameters; embedded in every report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub params: Params,
}

impl RunConfig {
    /// Fills every unset key the command reads with its default.
    pub fn resolve(command: Command, mut p: Params) -> Result<Self> {
        use Command::*;
        p.format.get_or_insert(Format::Json);
        let needs_lattice = !matches!(command, KernelCheck | Jellium) || p.compare == Some(true);
        if needs_lattice {
            if p.name.is_none() && p.lattice_file.is_none() {
                let name = match (command, p.d) {
                    (Jellium, Some(3)) => "Z3".to_string(),
                    (Jellium, _) => "A2".to_string(),
                    (_, Some(d)) => format!("Z{d}"),
                    (_, None) => {
                        return Err(Error::Parse(
                            "a lattice is required: --name or --lattice-file".into(),
                        ))
                    }
                };
                p.name = Some(name);
            }
            if p.d.is_none() {
                p.d = Some(resolve_lattice(&p)?.dim());
            }
        }
        let d = *p.d.get_or_insert(2);
        let coulomb = if d >= 3 { (d - 2) as f64 } else { 0.0 };
        match command {
            Lattice => {
                p.info.get_or_insert(true);
                p.dual.get_or_insert(false);
            }
            Theta => {
                p.max_norm.get_or_insert(8.0);
                p.route.get_or_insert_with(|| "auto".into());
                p.budget.get_or_insert(crate::lattice::DEFAULT_BUDGET);
            }
            Zeta => {
                p.s.get_or_insert_with(|| vec![d as f64 + 2.0]);
                p.route.get_or_insert_with(|| "auto".into());
            }
            Green => {
                p.s.get_or_insert_with(|| vec![coulomb]);
                p.n.get_or_insert_with(|| vec![1]);
                p.route.get_or_insert_with(|| "ewald".into());
                p.tol.get_or_insert(1e-12);
                if p.x.is_none() {
                    return Err(Error::Parse("green needs a point: --x".into()));
                }
            }
            Madelung => {
                p.s.get_or_insert_with(|| vec![coulomb]);
                p.n.get_or_insert_with(|| vec![1]);
                p.budget.get_or_insert(crate::lattice::DEFAULT_BUDGET);
            }
            Energy => {
                p.s.get_or_insert_with(|| vec![coulomb]);
                p.n.get_or_insert_with(|| vec![2]);
                p.seed.get_or_insert(0);
                p.random.get_or_insert(false);
                p.gradient.get_or_insert(false);
            }
            Optimize => {
                p.s.get_or_insert_with(|| vec![coulomb]);
                p.n.get_or_insert_with(|| vec![2]);
                p.seed.get_or_insert(0);
                p.restarts.get_or_insert(8);
                p.max_iters.get_or_insert(2000);
                p.tol.get_or_insert(1e-8);
            }
            ProbeCk => {
                p.n.get_or_insert_with(|| vec![if d >= 8 { 1 } else { 2 }]);
                p.budget.get_or_insert(crate::lattice::DEFAULT_BUDGET);
                p.t.get_or_insert_with(|| vec![0.25, 1.0]);
                p.trials.get_or_insert(500);
                p.seed.get_or_insert(0);
            }
            Jellium => {
                p.s.get_or_insert_with(|| vec![coulomb]);
                p.r.get_or_insert_with(|| vec![2.0]);
                p.seed.get_or_insert(0);
                p.restarts.get_or_insert(4);
                p.max_iters.get_or_insert(400);
                p.tol.get_or_insert(1e-11);
                p.compare.get_or_insert(false);
                if p.compare == Some(true) {
                    p.n.get_or_insert_with(|| vec![1, 2, 3]);
                }
            }
            KernelCheck => {
                p.s.get_or_insert_with(|| {
                    let mut v = vec![0.5, 1.0, coulomb];
                    v.retain(|&s| s < d as f64 && (s > 0.0 || d == 2));
                    v.dedup();
                    v
                });
                p.trials.get_or_insert(10);
                p.seed.get_or_insert(0);
                p.tol.get_or_insert(1e-9);
            }
        }
        Ok(RunConfig { command, params: p })
    }

    pub fn format(&self) -> Format {
        self.params.format.unwrap_or_default()
    }

    pub fn lattice(&self) -> Result<Lattice> {
        let lat = resolve_lattice(&self.params)?;
        if let Some(d) = self.params.d {
            if d != lat.dim() {
                return Err(Error::DimensionMismatch {
                    expected: lat.dim(),
                    got: d,
                });
            }
        }
        Ok(lat)
    }

    pub fn d(&self) -> usize {
        self.params.d.unwrap_or(2)
    }

    pub fn s_list(&self) -> &[f64] {
        self.params.s.as_deref().unwrap_or(&[])
    }

    pub fn riesz(&self, s: f64) -> Result<RieszParams> {
        RieszParams::new(self.d(), s)
    }

    /// First entry of `n`.
    pub fn n(&self) -> u32 {
        self.params
            .n
            .as_ref()
            .and_then(|v| v.first().copied())
            .unwrap_or(1)
    }

    pub fn n_list(&self) -> Vec<u32> {
        self.params.n.clone().unwrap_or_else(|| vec![1])
    }

    pub fn seed(&self) -> u64 {
        self.params.seed.unwrap_or(0)
    }
}

fn resolve_lattice(p: &Params) -> Result<Lattice> {
    match (&p.name, &p.lattice_file) {
        (Some(_), Some(_)) => Err(Error::Parse(
            "give either --name or --lattice-file, not both".into(),
        )),
        (Some(name), None) => Lattice::named(name.parse::<LatticeName>()?),
        (None, Some(path)) => Lattice::parse(&std::fs::read_to_string(path)?),
        (None, None) => Err(Error::Parse(
            "a lattice is required: --name or --lattice-file".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_values_accept_scalars_and_lists() {
        let p =
            Params::from_toml("name = \"A2\"\ns = 1\nt = [0.25, 1.0]\nR = 3\nseed = 7\n").unwrap();
        assert_eq!(p.s, Some(vec![1.0]));
        assert_eq!(p.t, Some(vec![0.25, 1.0]));
        assert_eq!(p.r, Some(vec![3.0]));
        assert_eq!(p.seed, Some(7));
        assert!(Params::from_toml("bogus = 1").is_err());
    }

    #[test]
    fn overlay_prefers_later_values() {
        let mut a = Params::from_toml("name = \"A2\"\nseed = 1").unwrap();
        a.overlay(&Params {
            seed: Some(5),
            ..Params::default()
        });
        assert_eq!(a.seed, Some(5));
        assert_eq!(a.name.as_deref(), Some("A2"));
    }

    #[test]
    fn resolve_fills_defaults() {
        let c = RunConfig::resolve(
            Command::Madelung,
            Params {
                name: Some("E8".into()),
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(c.d(), 8);
        assert_eq!(c.s_list(), &[6.0]);
        assert_eq!(c.n(), 1);
        let c = RunConfig::resolve(
            Command::KernelCheck,
            Params {
                d: Some(2),
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(c.s_list(), &[0.5, 1.0, 0.0]);
        let bad = RunConfig::resolve(
            Command::Madelung,
            Params {
                name: Some("A2".into()),
                d: Some(3),
                ..Default::default()
            },
        )
        .unwrap();
        assert!(matches!(
            bad.lattice(),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
