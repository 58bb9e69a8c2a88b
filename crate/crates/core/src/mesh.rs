//! Domains, graded meshes, exterior data and grid functions.
//!
//! Every node stores its boundary distance `δ` next to its coordinate:
//! near the boundary `1 - |x|` cannot be recovered from `x` to useful
//! relative precision once `δ` drops below ~1e-8.

use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::h1_profile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DomainKind {
    /// `(-1, 1)`, `N = 1`.
    Interval,
    /// Unit ball of `ℝ^N`, radial functions on `r ∈ [0, 1)`.
    RadialBall,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Domain {
    pub kind: DomainKind,
    pub dim: usize,
}

impl Domain {
    pub fn interval() -> Self {
        Self {
            kind: DomainKind::Interval,
            dim: 1,
        }
    }

    pub fn ball(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidParameter(format!(
                "radial ball needs dimension >= 2 (use the interval for N = 1), got {dim}"
            )));
        }
        Ok(Self {
            kind: DomainKind::RadialBall,
            dim,
        })
    }

    /// Interval for `N = 1`, radial ball otherwise.
    pub fn for_dim(dim: usize) -> Result<Self> {
        if dim == 1 {
            Ok(Self::interval())
        } else {
            Self::ball(dim)
        }
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            DomainKind::Interval => "interval",
            DomainKind::RadialBall => "ball",
        }
    }
}

/// Boundary distance `| |x| - 1 |`, extended to the exterior.
pub fn distance(x: f64) -> f64 {
    (x.abs() - 1.0).abs()
}

/// Nodes graded toward the boundary: `δ` is uniform in the variable `δ^{1/q}`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradedMesh {
    pub domain: Domain,
    pub q: f64,
    pub x: Vec<f64>,
    pub delta: Vec<f64>,
}

/// Build the graded mesh with `n` nodes.
///
/// Interval: `ξ_j = -1 + (2j+1)/n`, `δ_j = (1 - |ξ_j|)^q`.
/// Ball: `ξ_j = (j + 1/2)/n`, `r_j = 1 - (1 - ξ_j)^q`.
pub fn build_graded_mesh(domain: Domain, n: usize, q: f64) -> Result<GradedMesh> {
    if n < 16 {
        return Err(Error::MeshTooSmall { min: 16, got: n });
    }
    if !(q >= 1.0 && q.is_finite()) {
        return Err(Error::InvalidParameter(format!("grading exponent must be >= 1, got {q}")));
    }
    let nf = n as f64;
    let mut x = Vec::with_capacity(n);
    let mut delta = Vec::with_capacity(n);
    for j in 0..n {
        let (side, one_minus_xi) = match domain.kind {
            DomainKind::Interval => {
                // 1 - |ξ_j| without cancellation.
                let k = 2 * j + 1;
                if k < n {
                    (-1.0, k as f64 / nf)
                } else if k > n {
                    (1.0, (2 * n - k) as f64 / nf)
                } else {
                    (1.0, 1.0)
                }
            }
            DomainKind::RadialBall => (1.0, (nf - j as f64 - 0.5) / nf),
        };
        let d = one_minus_xi.powf(q);
        delta.push(d);
        x.push(side * (1.0 - d));
    }
    Ok(GradedMesh { domain, q, x, delta })
}

impl GradedMesh {
    /// Rebuild from stored coordinates and distances (e.g. a CSV dump).
    pub fn from_parts(domain: Domain, q: f64, x: Vec<f64>, delta: Vec<f64>) -> Result<Self> {
        if x.len() != delta.len() || x.len() < 2 {
            return Err(Error::InvalidParameter("mesh needs matching x and delta columns".into()));
        }
        for w in x.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::InvalidParameter("mesh nodes must be strictly increasing".into()));
            }
        }
        Ok(Self { domain, q, x, delta })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn min_delta(&self) -> f64 {
        self.delta.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// `+1` or `-1` depending on which boundary point is nearest.
    pub fn side(&self, j: usize) -> f64 {
        if self.x[j] < 0.0 {
            -1.0
        } else {
            1.0
        }
    }

    /// Left end of the computational segment (`-1` or the ball centre).
    pub fn left_end(&self) -> f64 {
        match self.domain.kind {
            DomainKind::Interval => -1.0,
            DomainKind::RadialBall => 0.0,
        }
    }

    /// Indices of the nodes with `δ < δ₀`.
    pub fn strip_indices(&self, delta0: f64) -> Vec<usize> {
        (0..self.len()).filter(|&j| self.delta[j] < delta0).collect()
    }

    /// Width of the larger of the two cells adjacent to node `j`.
    pub fn local_width(&self, j: usize) -> f64 {
        let n = self.len();
        let left = if j == 0 {
            match self.domain.kind {
                DomainKind::Interval => self.delta[0],
                DomainKind::RadialBall => self.x[0],
            }
        } else if self.side(j) == self.side(j - 1) && self.x[j].abs() > 0.5 {
            (self.delta[j] - self.delta[j - 1]).abs()
        } else {
            self.x[j] - self.x[j - 1]
        };
        let right = if j + 1 == n {
            self.delta[j]
        } else if self.side(j) == self.side(j + 1) && self.x[j].abs() > 0.5 {
            (self.delta[j] - self.delta[j + 1]).abs()
        } else {
            self.x[j + 1] - self.x[j]
        };
        left.max(right)
    }

    /// Node far enough from the boundary (two local cells) for pointwise
    /// operator evaluation.
    pub fn is_admissible(&self, j: usize) -> bool {
        self.delta[j] >= 2.0 * self.local_width(j)
    }

    pub fn admissible_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&j| self.is_admissible(j)).collect()
    }

    /// Smallest `δ` among admissible nodes.
    pub fn min_admissible_delta(&self) -> f64 {
        self.admissible_indices()
            .iter()
            .map(|&j| self.delta[j])
            .fold(f64::INFINITY, f64::min)
    }
}

/// Radial (or even, on the interval) exterior data as a function of the
/// distance `d = |y| - 1 > 0`.
#[derive(Debug, Clone, PartialEq)]
pub enum ExteriorData {
    Zero,
    /// `value` on `r_in < |y| < r_out`.
    Shell { r_in: f64, r_out: f64, value: f64 },
    /// `coeff (|y|² - 1)^exponent` on `1 < |y| < r_out`.
    Power { coeff: f64, exponent: f64, r_out: f64 },
    /// Log-log interpolated samples `(d_i, g_i)`, `g_i > 0`. Below the first
    /// sample the first segment is extended as a power law; above the last
    /// one likewise when `extend` is set, else the data vanish.
    Table { d: Vec<f64>, g: Vec<f64>, extend: bool },
    /// `min(cap, base)`.
    Truncated { base: Box<ExteriorData>, cap: f64 },
}

impl ExteriorData {
    pub fn is_zero(&self) -> bool {
        match self {
            ExteriorData::Zero => true,
            ExteriorData::Truncated { base, cap } => base.is_zero() || *cap <= 0.0,
            _ => false,
        }
    }

    pub fn truncated(&self, cap: f64) -> Self {
        ExteriorData::Truncated {
            base: Box::new(self.clone()),
            cap,
        }
    }

    pub fn table(d: Vec<f64>, g: Vec<f64>, extend: bool) -> Result<Self> {
        if d.len() != g.len() || d.len() < 2 {
            return Err(Error::DataInadmissible("table needs at least two samples".into()));
        }
        if d.windows(2).any(|w| w[1] <= w[0]) || d[0] <= 0.0 || g.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::DataInadmissible(
                "table needs increasing positive distances and positive values".into(),
            ));
        }
        Ok(ExteriorData::Table { d, g, extend })
    }

    /// `g` at distance `d > 0` from the boundary.
    pub fn value(&self, d: f64) -> f64 {
        if d <= 0.0 {
            return 0.0;
        }
        match self {
            ExteriorData::Zero => 0.0,
            ExteriorData::Shell { r_in, r_out, value } => {
                let r = 1.0 + d;
                if r > *r_in && r < *r_out {
                    *value
                } else {
                    0.0
                }
            }
            ExteriorData::Power { coeff, exponent, r_out } => {
                if 1.0 + d < *r_out {
                    coeff * (d * (2.0 + d)).powf(*exponent)
                } else {
                    0.0
                }
            }
            ExteriorData::Table { d: ds, g, extend } => {
                let n = ds.len();
                if d > ds[n - 1] && !extend {
                    return 0.0;
                }
                let i = ds.partition_point(|&v| v <= d).clamp(1, n - 1) - 1;
                let (x0, x1) = (ds[i].ln(), ds[i + 1].ln());
                let (y0, y1) = (g[i].ln(), g[i + 1].ln());
                (y0 + (y1 - y0) * (d.ln() - x0) / (x1 - x0)).exp()
            }
            ExteriorData::Truncated { base, cap } => base.value(d).min(*cap),
        }
    }

    /// Distances where the data may jump or kink.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            ExteriorData::Zero => vec![],
            ExteriorData::Shell { r_in, r_out, .. } => vec![r_in - 1.0, r_out - 1.0],
            ExteriorData::Power { r_out, .. } => vec![r_out - 1.0],
            ExteriorData::Table { d, extend, .. } => {
                if *extend {
                    vec![]
                } else {
                    vec![d[d.len() - 1]]
                }
            }
            ExteriorData::Truncated { base, .. } => base.breakpoints(),
        }
        .into_iter()
        .filter(|&d| d > 0.0)
        .collect()
    }

    /// Largest distance where the data may be nonzero (`∞` if unbounded).
    pub fn support_end(&self) -> f64 {
        match self {
            ExteriorData::Zero => 0.0,
            ExteriorData::Shell { r_out, .. } | ExteriorData::Power { r_out, .. } => r_out - 1.0,
            ExteriorData::Table { d, extend, .. } => {
                if *extend {
                    f64::INFINITY
                } else {
                    d[d.len() - 1]
                }
            }
            ExteriorData::Truncated { base, .. } => base.support_end(),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            ExteriorData::Zero => "zero".into(),
            ExteriorData::Shell { r_in, r_out, value } => format!("shell:{r_in}:{r_out}:{value}"),
            ExteriorData::Power { coeff, exponent, r_out } => format!("power:{coeff}:{exponent}:{r_out}"),
            ExteriorData::Table { d, extend, .. } => {
                format!("table[{} samples, d <= {:e}{}]", d.len(), d[d.len() - 1], if *extend { ", extended" } else { "" })
            }
            ExteriorData::Truncated { base, cap } => format!("min({cap}, {})", base.describe()),
        }
    }
}

/// Nodal values on a mesh, optionally split as `trace_coeff · h₁ + values`.
#[derive(Debug, Clone)]
pub struct GridFunction {
    pub mesh: Arc<GradedMesh>,
    pub s: f64,
    /// Regular remainder when `trace_coeff` is set, the function itself otherwise.
    pub values: Vec<f64>,
    pub exterior: ExteriorData,
    pub trace_coeff: Option<f64>,
}

impl GridFunction {
    pub fn new(mesh: Arc<GradedMesh>, s: f64, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.len() {
            return Err(Error::InvalidParameter(format!(
                "grid function has {} values for {} nodes",
                values.len(),
                mesh.len()
            )));
        }
        Ok(Self {
            mesh,
            s,
            values,
            exterior: ExteriorData::Zero,
            trace_coeff: None,
        })
    }

    /// Sample `f(x, δ)` at the nodes.
    pub fn from_fn<F: Fn(f64, f64) -> f64>(mesh: Arc<GradedMesh>, s: f64, f: F) -> Self {
        let values = (0..mesh.len()).map(|j| f(mesh.x[j], mesh.delta[j])).collect();
        Self {
            mesh,
            s,
            values,
            exterior: ExteriorData::Zero,
            trace_coeff: None,
        }
    }

    pub fn with_exterior(mut self, exterior: ExteriorData) -> Self {
        self.exterior = exterior;
        self
    }

    pub fn with_trace(mut self, k: f64) -> Self {
        self.trace_coeff = Some(k);
        self
    }

    pub fn singular_part(&self, j: usize) -> f64 {
        match self.trace_coeff {
            Some(k) if k != 0.0 => k * h1_profile(self.s, self.mesh.delta[j]),
            _ => 0.0,
        }
    }

    pub fn total(&self, j: usize) -> f64 {
        self.values[j] + self.singular_part(j)
    }

    pub fn totals(&self) -> Vec<f64> {
        (0..self.values.len()).map(|j| self.total(j)).collect()
    }

    /// Write the CSV dump: a `#` header line with the metadata, a column
    /// header, and one row per node.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut out = out;
        writeln!(
            out,
            "# s={:.17e},N={},trace_coeff={},domain={},q={:.17e}",
            self.s,
            self.mesh.domain.dim,
            self.trace_coeff.map(|k| format!("{k:.17e}")).unwrap_or_else(|| "none".into()),
            self.mesh.domain.name(),
            self.mesh.q
        )?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "delta", "value", "singular_part", "total"])?;
        for j in 0..self.values.len() {
            w.write_record([
                format!("{:.16e}", self.mesh.x[j]),
                format!("{:.16e}", self.mesh.delta[j]),
                format!("{:.16e}", self.values[j]),
                format!("{:.16e}", self.singular_part(j)),
                format!("{:.16e}", self.total(j)),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    /// Read a dump written by [`GridFunction::write_csv`]. Exterior data are
    /// not stored and come back as zero.
    pub fn load_csv(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        let mut reader = std::io::BufReader::new(file);
        let mut header = String::new();
        reader.read_line(&mut header)?;
        let header = header
            .trim()
            .strip_prefix('#')
            .ok_or_else(|| Error::Config(format!("{}: missing '#' metadata line", path.display())))?;
        let mut s = None;
        let mut dim = 1usize;
        let mut trace = None;
        let mut kind = DomainKind::Interval;
        let mut q = 1.0;
        for kv in header.split(',') {
            let (k, v) = kv
                .trim()
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("bad metadata entry '{kv}'")))?;
            let num = |v: &str| v.parse::<f64>().map_err(|_| Error::Config(format!("bad number '{v}' for {k}")));
            match k {
                "s" => s = Some(num(v)?),
                "N" => dim = v.parse().map_err(|_| Error::Config(format!("bad N '{v}'")))?,
                "trace_coeff" => {
                    if v != "none" {
                        trace = Some(num(v)?)
                    }
                }
                "domain" => {
                    kind = match v {
                        "interval" => DomainKind::Interval,
                        "ball" => DomainKind::RadialBall,
                        _ => return Err(Error::Config(format!("unknown domain '{v}'"))),
                    }
                }
                "q" => q = num(v)?,
                _ => {}
            }
        }
        let s = s.ok_or_else(|| Error::Config("metadata lacks s".into()))?;
        let mut rdr = csv::Reader::from_reader(reader);
        let (mut x, mut delta, mut values) = (Vec::new(), Vec::new(), Vec::new());
        for rec in rdr.records() {
            let rec = rec?;
            let get = |i: usize| -> Result<f64> {
                rec.get(i)
                    .and_then(|v| v.trim().parse().ok())
                    .ok_or_else(|| Error::Config(format!("bad row {:?}", rec)))
            };
            x.push(get(0)?);
            delta.push(get(1)?);
            values.push(get(2)?);
        }
        let domain = Domain { kind, dim };
        let mesh = GradedMesh::from_parts(domain, q, x, delta)?;
        let mut g = GridFunction::new(Arc::new(mesh), s, values)?;
        g.trace_coeff = trace;
        Ok(g)
    }
}
