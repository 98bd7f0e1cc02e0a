//! Experiment configuration files.
//!
//! ```toml
//! kind = "zeta_table"
//! seed = 1
//!
//! [params]
//! k = [10, 20]
//! L = [2.0]
//! N = [2, 4, 8]
//! delta = "L/3"
//! h = "k^-5/4"
//!
//! [output]
//! dir = "out/zeta"
//! ```

use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    ImpmapTable,
    ZetaTable,
    StripIterate,
    CheckerboardIterate,
    MetisIterate,
    OnedVerify,
    AlgebraVerify,
    FemConvergence,
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Kind::ImpmapTable => "impmap_table",
            Kind::ZetaTable => "zeta_table",
            Kind::StripIterate => "strip_iterate",
            Kind::CheckerboardIterate => "checkerboard_iterate",
            Kind::MetisIterate => "metis_iterate",
            Kind::OnedVerify => "oned_verify",
            Kind::AlgebraVerify => "algebra_verify",
            Kind::FemConvergence => "fem_convergence",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum RawValue {
    Number(f64),
    Text(String),
}

/// Overlap width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DeltaRule {
    LOver3,
    LOver6,
    TwoH,
    HOver4,
    HOver10,
    MeshH,
    Absolute(f64),
}

impl DeltaRule {
    /// `length` is the strip length `L`, `coarse` the subdomain size `H`, `h` the mesh size.
    pub fn resolve(self, length: f64, coarse: f64, h: f64) -> f64 {
        match self {
            DeltaRule::LOver3 => length / 3.0,
            DeltaRule::LOver6 => length / 6.0,
            DeltaRule::TwoH => 2.0 * h,
            DeltaRule::HOver4 => coarse / 4.0,
            DeltaRule::HOver10 => coarse / 10.0,
            DeltaRule::MeshH => h,
            DeltaRule::Absolute(d) => d,
        }
    }

    fn parse(raw: &RawValue) -> Result<Self> {
        match raw {
            RawValue::Number(d) if *d > 0.0 && d.is_finite() => Ok(DeltaRule::Absolute(*d)),
            RawValue::Number(d) => bail!("params.delta: must be positive, got {d}"),
            RawValue::Text(s) => Ok(match s.replace(' ', "").as_str() {
                "L/3" => DeltaRule::LOver3,
                "L/6" => DeltaRule::LOver6,
                "2h" => DeltaRule::TwoH,
                "H/4" => DeltaRule::HOver4,
                "H/10" => DeltaRule::HOver10,
                "h" => DeltaRule::MeshH,
                _ => bail!("params.delta: unknown rule {s:?}, expected one of L/3, L/6, 2h, H/4, H/10, h or a number"),
            }),
        }
    }
}

impl fmt::Display for DeltaRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DeltaRule::LOver3 => f.write_str("L/3"),
            DeltaRule::LOver6 => f.write_str("L/6"),
            DeltaRule::TwoH => f.write_str("2h"),
            DeltaRule::HOver4 => f.write_str("H/4"),
            DeltaRule::HOver10 => f.write_str("H/10"),
            DeltaRule::MeshH => f.write_str("h"),
            DeltaRule::Absolute(d) => write!(f, "{d}"),
        }
    }
}

/// Mesh size: `factor · base^{-5/4}` where `base` is `k` or a fixed number, or an absolute value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MeshRule {
    Scaled { factor: f64, base: Option<f64> },
    Absolute(f64),
}

impl MeshRule {
    pub fn resolve(self, k: f64) -> f64 {
        match self {
            MeshRule::Scaled { factor, base } => factor * base.unwrap_or(k).powf(-1.25),
            MeshRule::Absolute(h) => h,
        }
    }

    fn parse(raw: &RawValue) -> Result<Self> {
        match raw {
            RawValue::Number(h) if *h > 0.0 && h.is_finite() => Ok(MeshRule::Absolute(*h)),
            RawValue::Number(h) => bail!("params.h: must be positive, got {h}"),
            RawValue::Text(s) => {
                let t = s.replace(' ', "");
                let bad = || {
                    anyhow::anyhow!("params.h: cannot read {s:?}, expected \"k^-5/4\", \"c*k^-5/4\", \"c*m^-5/4\" or a number")
                };
                let (factor, rest) = match t.split_once('*') {
                    Some((c, r)) => (c.parse::<f64>().map_err(|_| bad())?, r),
                    None => (1.0, t.as_str()),
                };
                let base = rest.strip_suffix("^-5/4").ok_or_else(bad)?;
                let base = if base == "k" {
                    None
                } else {
                    Some(base.parse::<f64>().map_err(|_| bad())?)
                };
                if !(factor > 0.0) || base.is_some_and(|b| !(b > 0.0)) {
                    return Err(bad());
                }
                Ok(MeshRule::Scaled { factor, base })
            }
        }
    }
}

impl fmt::Display for MeshRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MeshRule::Scaled { factor, base } => {
                if *factor != 1.0 {
                    write!(f, "{factor}*")?;
                }
                match base {
                    Some(b) => write!(f, "{b}^-5/4"),
                    None => f.write_str("k^-5/4"),
                }
            }
            MeshRule::Absolute(h) => write!(f, "{h}"),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    kind: Kind,
    #[serde(default)]
    seed: u64,
    params: RawParams,
    #[serde(default)]
    output: RawOutput,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParams {
    k: Option<Vec<f64>>,
    #[serde(rename = "L")]
    length: Option<Vec<f64>>,
    #[serde(rename = "N")]
    n: Option<Vec<usize>>,
    delta: Option<RawValue>,
    h: Option<RawValue>,
    tol: Option<f64>,
    maxit: Option<usize>,
    starts: Option<usize>,
    trials: Option<usize>,
    dim: Option<usize>,
    levels: Option<usize>,
    min_ratio: Option<f64>,
    partition: Option<PathBuf>,
}

/// A validated experiment description.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub kind: Kind,
    pub seed: u64,
    pub k: Vec<f64>,
    pub lengths: Vec<f64>,
    pub n: Vec<usize>,
    pub delta: Option<DeltaRule>,
    pub h: MeshRule,
    pub tol: f64,
    pub maxit: usize,
    pub starts: usize,
    pub trials: usize,
    pub dim: usize,
    pub levels: usize,
    pub min_ratio: f64,
    pub partition: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

/// Which parameters a kind reads.
struct Uses {
    k: bool,
    length: bool,
    n: bool,
    delta: &'static [&'static str],
    h: bool,
    iteration: bool,
    trials: bool,
    dim: bool,
    levels: bool,
    partition: bool,
}

const STRIP_DELTAS: &[&str] = &["L/3", "L/6", "2h", "h", "absolute"];
const BOX_DELTAS: &[&str] = &["H/4", "H/10", "h", "absolute"];

fn uses(kind: Kind) -> Uses {
    let none = Uses {
        k: false,
        length: false,
        n: false,
        delta: &[],
        h: false,
        iteration: false,
        trials: false,
        dim: false,
        levels: false,
        partition: false,
    };
    match kind {
        Kind::ImpmapTable => Uses {
            k: true,
            length: true,
            delta: STRIP_DELTAS,
            h: true,
            ..none
        },
        Kind::ZetaTable => Uses {
            k: true,
            length: true,
            n: true,
            delta: STRIP_DELTAS,
            h: true,
            ..none
        },
        Kind::StripIterate => Uses {
            k: true,
            length: true,
            n: true,
            delta: STRIP_DELTAS,
            h: true,
            iteration: true,
            ..none
        },
        Kind::CheckerboardIterate => Uses {
            k: true,
            n: true,
            delta: BOX_DELTAS,
            h: true,
            iteration: true,
            ..none
        },
        Kind::MetisIterate => Uses {
            k: true,
            n: true,
            delta: BOX_DELTAS,
            h: true,
            iteration: true,
            partition: true,
            ..none
        },
        Kind::OnedVerify => Uses {
            k: true,
            length: true,
            n: true,
            delta: &["absolute"],
            trials: true,
            ..none
        },
        Kind::AlgebraVerify => Uses {
            n: true,
            dim: true,
            ..none
        },
        Kind::FemConvergence => Uses {
            k: true,
            h: true,
            levels: true,
            ..none
        },
    }
}

fn rule_name(d: &DeltaRule) -> &'static str {
    match d {
        DeltaRule::LOver3 => "L/3",
        DeltaRule::LOver6 => "L/6",
        DeltaRule::TwoH => "2h",
        DeltaRule::HOver4 => "H/4",
        DeltaRule::HOver10 => "H/10",
        DeltaRule::MeshH => "h",
        DeltaRule::Absolute(_) => "absolute",
    }
}

fn list<T: Clone>(
    field: &str,
    kind: Kind,
    used: bool,
    v: Option<Vec<T>>,
    default: Option<Vec<T>>,
) -> Result<Vec<T>> {
    match (used, v) {
        (false, Some(_)) => bail!("params.{field}: not used by kind {kind}"),
        (false, None) => Ok(Vec::new()),
        (true, Some(v)) if v.is_empty() => bail!("params.{field}: must be a nonempty list"),
        (true, Some(v)) => Ok(v),
        (true, None) => {
            default.ok_or_else(|| anyhow::anyhow!("params.{field}: required by kind {kind}"))
        }
    }
}

fn scalar<T>(field: &str, kind: Kind, used: bool, v: Option<T>, default: T) -> Result<T> {
    match (used, v) {
        (false, Some(_)) => bail!("params.{field}: not used by kind {kind}"),
        (_, Some(v)) => Ok(v),
        (_, None) => Ok(default),
    }
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text)?;
        Self::validate(raw)
    }

    fn validate(raw: RawConfig) -> Result<Self> {
        let kind = raw.kind;
        let u = uses(kind);
        let p = raw.params;

        let k = list("k", kind, u.k, p.k, None)?;
        if let Some(bad) = k.iter().find(|&&k| !(k > 0.0 && k.is_finite())) {
            bail!("params.k: wavenumbers must be positive, got {bad}");
        }
        let length_default = (kind == Kind::OnedVerify).then(|| vec![1.0]);
        let lengths = list("L", kind, u.length, p.length, length_default)?;
        if let Some(bad) = lengths.iter().find(|&&l| !(l > 0.0 && l.is_finite())) {
            bail!("params.L: lengths must be positive, got {bad}");
        }
        let n = list("N", kind, u.n, p.n, None)?;
        let n_min = match kind {
            Kind::ZetaTable | Kind::StripIterate | Kind::OnedVerify => 2,
            _ => 1,
        };
        if let Some(bad) = n.iter().find(|&&n| n < n_min) {
            bail!("params.N: values must be at least {n_min} for kind {kind}, got {bad}");
        }
        if kind == Kind::AlgebraVerify {
            if let Some(bad) = n
                .iter()
                .find(|&&n| n > helmdd::opalgebra::MAX_EXPANSION_ORDER)
            {
                bail!(
                    "params.N: orders above {} are not supported, got {bad}",
                    helmdd::opalgebra::MAX_EXPANSION_ORDER
                );
            }
        }

        let delta = match (u.delta.is_empty(), p.delta) {
            (true, Some(_)) => bail!("params.delta: not used by kind {kind}"),
            (true, None) => None,
            (false, None) => bail!("params.delta: required by kind {kind}"),
            (false, Some(raw)) => {
                let d = DeltaRule::parse(&raw)?;
                if !u.delta.contains(&rule_name(&d)) {
                    bail!(
                        "params.delta: rule {d} does not apply to kind {kind} (allowed: {})",
                        u.delta.join(", ")
                    );
                }
                Some(d)
            }
        };
        let h = match (u.h, p.h) {
            (false, Some(_)) => bail!("params.h: not used by kind {kind}"),
            (_, None) => MeshRule::Scaled {
                factor: 1.0,
                base: None,
            },
            (true, Some(raw)) => MeshRule::parse(&raw)?,
        };

        let tol = scalar(
            "tol",
            kind,
            u.iteration || u.trials || u.dim,
            p.tol,
            default_tol(kind),
        )?;
        if !(tol > 0.0 && tol < 1.0) {
            bail!("params.tol: must lie in (0, 1), got {tol}");
        }
        let maxit = scalar("maxit", kind, u.iteration, p.maxit, 200)?;
        if maxit == 0 {
            bail!("params.maxit: must be positive");
        }
        let starts_default = if kind == Kind::StripIterate { 10 } else { 1 };
        let starts = scalar("starts", kind, u.iteration, p.starts, starts_default)?;
        if starts == 0 {
            bail!("params.starts: must be positive");
        }
        let trials = scalar("trials", kind, u.trials, p.trials, 100)?;
        if trials == 0 {
            bail!("params.trials: must be positive");
        }
        let dim = scalar("dim", kind, u.dim, p.dim, 3)?;
        if dim == 0 {
            bail!("params.dim: must be positive");
        }
        let levels = scalar("levels", kind, u.levels, p.levels, 3)?;
        if levels < 2 {
            bail!("params.levels: need at least 2 refinement levels, got {levels}");
        }
        let min_ratio = scalar("min_ratio", kind, u.levels, p.min_ratio, 6.0)?;
        let partition = scalar("partition", kind, u.partition, p.partition.map(Some), None)?;
        if partition.is_some() && n.len() != 1 {
            bail!("params.partition: a partition file fixes the subdomain count, so N must have exactly one entry");
        }

        Ok(Self {
            kind,
            seed: raw.seed,
            k,
            lengths,
            n,
            delta,
            h,
            tol,
            maxit,
            starts,
            trials,
            dim,
            levels,
            min_ratio,
            partition,
            out_dir: raw.output.dir,
        })
    }
}

fn default_tol(kind: Kind) -> f64 {
    match kind {
        Kind::OnedVerify => 1e-12,
        Kind::AlgebraVerify => 1e-10,
        _ => 1e-6,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_doc_example() {
        let c = ExperimentConfig::parse(
            r#"
kind = "zeta_table"
seed = 1
[params]
k = [10, 20]
L = [2.0]
N = [2, 4, 8]
delta = "L/3"
h = "k^-5/4"
[output]
dir = "out/zeta"
"#,
        )
        .unwrap();
        assert_eq!(c.kind, Kind::ZetaTable);
        assert_eq!(c.n, [2, 4, 8]);
        assert_eq!(c.delta, Some(DeltaRule::LOver3));
        assert!((c.h.resolve(10.0) - 10f64.powf(-1.25)).abs() < 1e-15);
    }

    #[test]
    fn mesh_rules() {
        let r = MeshRule::parse(&RawValue::Text("0.5 * 80^-5/4".into())).unwrap();
        assert!((r.resolve(3.0) - 0.5 * 80f64.powf(-1.25)).abs() < 1e-15);
        assert_eq!(
            MeshRule::parse(&RawValue::Number(0.01)).unwrap(),
            MeshRule::Absolute(0.01)
        );
        assert!(MeshRule::parse(&RawValue::Text("k^-1".into())).is_err());
    }

    fn err(text: &str) -> String {
        format!("{:#}", ExperimentConfig::parse(text).unwrap_err())
    }

    #[test]
    fn diagnostics_name_the_field() {
        assert!(
            err("kind = \"oned_verify\"\n[params]\nk = []\nN = [2]\ndelta = 0.3")
                .contains("params.k")
        );
        assert!(
            err("kind = \"impmap_table\"\n[params]\nk = [10]\nL = [1]\ndelta = \"H/4\"")
                .contains("params.delta")
        );
        assert!(err("kind = \"algebra_verify\"\n[params]\nN = [3]\nk = [1]").contains("params.k"));
        assert!(err(
            "kind = \"zeta_table\"\n[params]\nk = [10]\nL = [1]\nN = [1]\ndelta = \"L/3\""
        )
        .contains("params.N"));
        assert!(err(
            "kind = \"zeta_table\"\n[params]\nk = [10]\nL = [1]\nN = [2]\ndelta = \"L/3\"\nfoo = 1"
        )
        .contains("foo"));
        assert!(err("kind = \"nope\"\n[params]\n").contains("kind"));
    }
}
