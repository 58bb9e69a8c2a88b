//! Run parameters from a TOML file and command-line flags (flags win),
//! their validation, and the hash that identifies a run.

use std::path::Path;

use clap::Args;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::mesh::ExteriorData;
use crate::nonlinearity::{NonlinearityModel, NonlinearitySpec};
use crate::solver::{ProblemData, SolveConfig, DEFAULT_DAMPING};

pub const DEFAULT_K_LIST: [f64; 6] = [1.0, 2.0, 4.0, 8.0, 16.0, 32.0];
pub const MIN_MESH_N: usize = 16;

/// Every physical and numerical knob. All optional so that a file and the
/// flags can be layered.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct Params {
    /// Fractional order in (0, 1).
    #[arg(long)]
    pub s: Option<f64>,
    /// Dimension: 1 for the interval, N >= 2 for the radial ball.
    #[arg(long = "N", id = "N")]
    #[serde(rename = "N")]
    pub dim: Option<usize>,
    /// power | powerlog | tabulated
    #[arg(long)]
    pub family: Option<String>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub table_path: Option<String>,
    /// Multiplies f.
    #[arg(long)]
    pub scale: Option<f64>,
    /// Singular trace of the approximating problem.
    #[arg(long)]
    pub k: Option<f64>,
    /// Exterior data: shell:R_IN:R_OUT:VALUE, power:COEFF:EXP:R_OUT or psi:R_OUT.
    #[arg(long)]
    pub g_spec: Option<String>,
    #[arg(long, value_delimiter = ',')]
    pub k_list: Option<Vec<f64>>,
    #[arg(long)]
    pub mesh_n: Option<usize>,
    #[arg(long)]
    pub mesh_q: Option<f64>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub damping: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

impl Params {
    pub fn from_toml_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// `self` where set, `base` otherwise.
    pub fn over(self, base: Params) -> Params {
        Params {
            s: self.s.or(base.s),
            dim: self.dim.or(base.dim),
            family: self.family.or(base.family),
            p: self.p.or(base.p),
            alpha: self.alpha.or(base.alpha),
            table_path: self.table_path.or(base.table_path),
            scale: self.scale.or(base.scale),
            k: self.k.or(base.k),
            g_spec: self.g_spec.or(base.g_spec),
            k_list: self.k_list.or(base.k_list),
            mesh_n: self.mesh_n.or(base.mesh_n),
            mesh_q: self.mesh_q.or(base.mesh_q),
            tol: self.tol.or(base.tol),
            max_iters: self.max_iters.or(base.max_iters),
            damping: self.damping.or(base.damping),
            seed: self.seed.or(base.seed),
        }
    }

    pub fn nonlinearity(&self) -> NonlinearitySpec {
        NonlinearitySpec {
            family: self.family.clone().unwrap_or_else(|| "power".into()),
            p: self.p,
            alpha: self.alpha,
            table_path: self.table_path.clone(),
            scale: self.scale,
        }
    }

    /// Fill defaults and validate.
    pub fn resolve(&self) -> Result<Resolved> {
        let s = self.s.ok_or_else(|| Error::Config("s is required".into()))?;
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::Config(format!("s must lie in (0, 1), got {s}")));
        }
        if let Some(p) = self.p {
            if !(p > 0.0) {
                return Err(Error::Config(format!("p must be positive, got {p}")));
            }
        }
        let mesh_n = self.mesh_n.unwrap_or(256);
        if mesh_n < MIN_MESH_N {
            return Err(Error::Config(format!("mesh-n must be at least {MIN_MESH_N}, got {mesh_n}")));
        }
        if let Some(k) = self.k {
            if !(k >= 0.0) {
                return Err(Error::Config(format!("k must be nonnegative, got {k}")));
            }
        }
        let nonlinearity = self.nonlinearity();
        nonlinearity.build()?;
        Ok(Resolved {
            s,
            dim: self.dim.unwrap_or(1),
            nonlinearity,
            k: self.k,
            g_spec: self.g_spec.clone(),
            k_list: self.k_list.clone().unwrap_or_else(|| DEFAULT_K_LIST.to_vec()),
            mesh_n,
            mesh_q: self.mesh_q,
            tol: self.tol.unwrap_or(1e-10),
            max_iters: self.max_iters.unwrap_or(200),
            damping: self.damping.unwrap_or(DEFAULT_DAMPING),
            seed: self.seed.unwrap_or(0),
        })
    }
}

/// Validated parameters with every default made explicit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Resolved {
    pub s: f64,
    #[serde(rename = "N")]
    pub dim: usize,
    pub nonlinearity: NonlinearitySpec,
    pub k: Option<f64>,
    pub g_spec: Option<String>,
    pub k_list: Vec<f64>,
    pub mesh_n: usize,
    pub mesh_q: Option<f64>,
    pub tol: f64,
    pub max_iters: usize,
    pub damping: f64,
    pub seed: u64,
}

impl Resolved {
    pub fn model(&self) -> Result<NonlinearityModel> {
        self.nonlinearity.build()
    }

    pub fn exterior(&self) -> Result<Option<ExteriorData>> {
        self.g_spec.as_deref().map(|g| parse_g_spec(g, self)).transpose()
    }

    pub fn solve_config(&self) -> Result<SolveConfig> {
        let data = match self.exterior()? {
            Some(g) => ProblemData::Exterior {
                g,
                ladder: self.k_list.clone(),
            },
            None => ProblemData::Trace(self.k.unwrap_or(0.0)),
        };
        let mut cfg = SolveConfig::new(self.s, self.dim, self.model()?, data).with_mesh(self.mesh_n, self.mesh_q);
        cfg.tol = self.tol;
        cfg.max_iters = self.max_iters;
        cfg.damping = self.damping;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn hash(&self) -> String {
        config_hash(self)
    }
}

/// Hex SHA-256 of the compact JSON form of `value`.
pub fn config_hash<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("config serializes");
    hex::encode(Sha256::digest(&bytes))
}

fn parse_g_spec(spec: &str, cfg: &Resolved) -> Result<ExteriorData> {
    let parts: Vec<&str> = spec.split(':').collect();
    let nums = |xs: &[&str]| -> Result<Vec<f64>> {
        xs.iter()
            .map(|v| v.parse::<f64>().map_err(|_| Error::Config(format!("bad number '{v}' in g-spec '{spec}'"))))
            .collect()
    };
    match (parts[0], parts.len()) {
        ("zero", 1) => Ok(ExteriorData::Zero),
        ("shell", 4) => {
            let v = nums(&parts[1..])?;
            Ok(ExteriorData::Shell {
                r_in: v[0],
                r_out: v[1],
                value: v[2],
            })
        }
        ("power", 4) => {
            let v = nums(&parts[1..])?;
            Ok(ExteriorData::Power {
                coeff: v[0],
                exponent: v[1],
                r_out: v[2],
            })
        }
        ("psi", 2) => {
            let r_out = nums(&parts[1..])?[0];
            crate::solver::psi_exterior_data(&cfg.model()?, cfg.s, r_out)
        }
        _ => Err(Error::Config(format!(
            "g-spec '{spec}' is not one of zero, shell:R_IN:R_OUT:VALUE, power:COEFF:EXP:R_OUT, psi:R_OUT"
        ))),
    }
}
