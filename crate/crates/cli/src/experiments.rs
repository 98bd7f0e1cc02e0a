//! One runner per experiment kind. Each sweep point is isolated: an error or
//! a point above the size guard is recorded and the sweep moves on.

use std::time::Instant;

use helmdd::decomp::{
    checkerboard_decomposition, checkerboard_lines, overlapping_from_parts, rcb_parts,
    read_partition, strips_from_geometry, Decomposition, StripGeometry,
};
use helmdd::fem::{plane_wave, FemSpace};
use helmdd::impmap::{
    assemble_imp_map, canonical_space, composite_zeta_with_cap, l2_operator_norm, Sign,
};
use helmdd::mesh::RectMeshBuilder;
use helmdd::oned::Interval1dDecomposition;
use helmdd::opalgebra::{binomial, enumerate_p, verify_expansion};
use helmdd::random::seeded;
use helmdd::schwarz::{OrasSolver, StopNorm};
use helmdd::C64;

use crate::config::{DeltaRule, ExperimentConfig, Kind};
use crate::output::{fmt_param, fmt_value, RunRecord, Status, Table};

/// Whether `iterate` runs the fixed-point method or `gmres` runs GMRES.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    FixedPoint,
    Gmres,
}

pub struct Outcome {
    pub table: Option<String>,
    pub tables: Vec<Table>,
    pub runs: Vec<RunRecord>,
}

enum PointError {
    Skipped(String),
    Failed(String),
}

impl From<helmdd::Error> for PointError {
    fn from(e: helmdd::Error) -> Self {
        match e {
            helmdd::Error::TooLarge { .. } => PointError::Skipped(e.to_string()),
            e => PointError::Failed(e.to_string()),
        }
    }
}

#[derive(Default)]
struct Meta {
    h: Option<f64>,
    dofs: Option<usize>,
}

struct Sweep {
    max_dofs: usize,
    runs: Vec<RunRecord>,
}

impl Sweep {
    fn point<T>(
        &mut self,
        label: String,
        f: impl FnOnce(&mut Meta, usize) -> Result<T, PointError>,
    ) -> Option<T> {
        let start = Instant::now();
        let mut meta = Meta::default();
        let res = f(&mut meta, self.max_dofs);
        let (status, message, value) = match res {
            Ok(v) => (Status::Ok, None, Some(v)),
            Err(PointError::Skipped(m)) => (Status::Skipped, Some(m), None),
            Err(PointError::Failed(m)) => (Status::Failed, Some(m), None),
        };
        self.runs.push(RunRecord {
            label,
            status,
            h: meta.h,
            dofs: meta.dofs,
            seconds: start.elapsed().as_secs_f64(),
            message,
        });
        value
    }

    /// Marks the last point failed while keeping its row.
    fn fail_last(&mut self, message: String) {
        if let Some(r) = self.runs.last_mut() {
            r.status = Status::Failed;
            r.message = Some(message);
        }
    }
}

fn guard(meta: &mut Meta, space: &FemSpace, max_dofs: usize) -> Result<(), PointError> {
    let n = space.num_dofs();
    meta.dofs = Some(meta.dofs.map_or(n, |m| m.max(n)));
    if n > max_dofs {
        return Err(PointError::Skipped(format!(
            "{n} dofs exceed --max-dofs {max_dofs}"
        )));
    }
    Ok(())
}

fn failed(msg: impl Into<String>) -> PointError {
    PointError::Failed(msg.into())
}

pub fn run(cfg: &ExperimentConfig, method: Method, max_dofs: usize) -> Outcome {
    let mut sweep = Sweep {
        max_dofs,
        runs: Vec::new(),
    };
    let (table, tables) = match cfg.kind {
        Kind::ImpmapTable => impmap_table(cfg, &mut sweep),
        Kind::ZetaTable => zeta_table(cfg, &mut sweep),
        Kind::StripIterate | Kind::CheckerboardIterate | Kind::MetisIterate => {
            iterate(cfg, method, &mut sweep)
        }
        Kind::OnedVerify => oned_verify(cfg, &mut sweep),
        Kind::AlgebraVerify => algebra_verify(cfg, &mut sweep),
        Kind::FemConvergence => fem_convergence(cfg, &mut sweep),
    };
    Outcome {
        table,
        tables,
        runs: sweep.runs,
    }
}

fn strip_delta(cfg: &ExperimentConfig, length: f64, h: f64) -> Result<f64, PointError> {
    let d = cfg.delta.expect("validated").resolve(length, f64::NAN, h);
    if !(d > 0.0 && d < length) {
        return Err(failed(format!("delta = {d} must lie in (0, L = {length})")));
    }
    Ok(d)
}

fn impmap_table(cfg: &ExperimentConfig, sweep: &mut Sweep) -> (Option<String>, Vec<Table>) {
    let mut t = Table::new("impmap.csv", &["k", "L", "delta", "rho", "gamma"]);
    for &k in &cfg.k {
        for &length in &cfg.lengths {
            let label = format!("k={k} L={length}");
            let row = sweep.point(label, |meta, cap| {
                let h = cfg.h.resolve(k);
                meta.h = Some(h);
                let delta = strip_delta(cfg, length, h)?;
                let near = canonical_space(length, 1.0, delta, h, cap)?;
                guard(meta, &near, cap)?;
                let far = canonical_space(length, 1.0, length - delta, h, cap)?;
                guard(meta, &far, cap)?;
                let rho =
                    l2_operator_norm(&assemble_imp_map(&near, k, Sign::Minus, delta, Sign::Plus)?)?;
                let gamma = l2_operator_norm(&assemble_imp_map(
                    &far,
                    k,
                    Sign::Minus,
                    length - delta,
                    Sign::Minus,
                )?)?;
                Ok(vec![
                    fmt_param(k),
                    fmt_param(length),
                    fmt_value(delta),
                    fmt_value(rho),
                    fmt_value(gamma),
                ])
            });
            if let Some(r) = row {
                t.push(r);
            }
        }
    }
    let id = "tb:imp-left2right-aspect (rho(k, delta, L) and gamma(k, L - delta, L)); L = 1 rows also mirror tb:imp-2algs";
    (Some(id.into()), vec![t])
}

fn zeta_table(cfg: &ExperimentConfig, sweep: &mut Sweep) -> (Option<String>, Vec<Table>) {
    let mut t = Table::new("zeta.csv", &["k", "L", "delta", "N", "zeta_N"]);
    for &k in &cfg.k {
        for &length in &cfg.lengths {
            for &n in &cfg.n {
                let row = sweep.point(format!("k={k} L={length} N={n}"), |meta, cap| {
                    let h = cfg.h.resolve(k);
                    meta.h = Some(h);
                    let delta = strip_delta(cfg, length, h)?;
                    guard(meta, &canonical_space(length, 1.0, delta, h, cap)?, cap)?;
                    let z = composite_zeta_with_cap(k, n, length, delta, h, cap)?;
                    Ok(vec![
                        fmt_param(k),
                        fmt_param(length),
                        fmt_value(delta),
                        n.to_string(),
                        fmt_value(z),
                    ])
                });
                if let Some(r) = row {
                    t.push(r);
                }
            }
        }
    }
    let id = match cfg.delta {
        Some(DeltaRule::LOver3) => Some("tb:composite-imp1"),
        Some(DeltaRule::LOver6) => Some("tb:composite-imp2"),
        Some(DeltaRule::TwoH) => Some("tb:composite-imp3"),
        _ => None,
    };
    (id.map(Into::into), vec![t])
}

/// A mesh, its cover and the overlap actually used.
struct Problem {
    space: FemSpace,
    decomposition: Decomposition,
    delta: f64,
}

fn build_problem(
    cfg: &ExperimentConfig,
    k: f64,
    n: usize,
    length: f64,
    meta: &mut Meta,
    cap: usize,
) -> Result<Problem, PointError> {
    let h = cfg.h.resolve(k);
    meta.h = Some(h);
    let rule = cfg.delta.expect("validated");
    match cfg.kind {
        Kind::StripIterate => {
            let delta = strip_delta(cfg, length, h)?;
            let geo = StripGeometry::from_length(n, length, delta)?;
            let mesh = RectMeshBuilder::new(geo.l_omega, 1.0, h)
                .abscissae(&geo.abscissae())
                .max_vertices(cap)
                .build()?;
            let space = FemSpace::new(mesh)?;
            guard(meta, &space, cap)?;
            let decomposition = strips_from_geometry(&space, geo)?;
            Ok(Problem {
                space,
                decomposition,
                delta,
            })
        }
        Kind::CheckerboardIterate => {
            let delta = rule.resolve(f64::NAN, 1.0 / n as f64, h);
            let lines = checkerboard_lines(1.0, n, delta);
            let mesh = RectMeshBuilder::new(1.0, 1.0, h)
                .abscissae(&lines)
                .ordinates(&lines)
                .max_vertices(cap)
                .build()?;
            let space = FemSpace::new(mesh)?;
            guard(meta, &space, cap)?;
            let decomposition = checkerboard_decomposition(&space, n, delta)?;
            Ok(Problem {
                space,
                decomposition,
                delta,
            })
        }
        Kind::MetisIterate => {
            let delta = rule.resolve(f64::NAN, 1.0 / (n as f64).sqrt(), h);
            let mesh = RectMeshBuilder::new(1.0, 1.0, h)
                .max_vertices(cap)
                .build()?;
            let space = FemSpace::new(mesh)?;
            guard(meta, &space, cap)?;
            let parts = match &cfg.partition {
                Some(path) => read_partition(path, space.mesh().num_triangles())?,
                None => rcb_parts(space.mesh(), n)?,
            };
            let found = parts.iter().max().map_or(0, |m| m + 1);
            if found != n {
                return Err(failed(format!(
                    "partition has {found} parts, config asks for N = {n}"
                )));
            }
            let decomposition = overlapping_from_parts(&space, &parts, delta)?;
            Ok(Problem {
                space,
                decomposition,
                delta,
            })
        }
        _ => unreachable!("not an iteration kind"),
    }
}

fn iterate(
    cfg: &ExperimentConfig,
    method: Method,
    sweep: &mut Sweep,
) -> (Option<String>, Vec<Table>) {
    let (name, mean_col) = match method {
        Method::FixedPoint => ("iterate", "mean_iterations"),
        Method::Gmres => ("gmres", "mean_gmres"),
    };
    let header: Vec<&'static str> = match cfg.kind {
        Kind::StripIterate => vec!["k", "N", "L", "delta", "h", "dofs", mean_col, "converged"],
        Kind::CheckerboardIterate => vec![
            "k",
            "N",
            "subdomains",
            "delta",
            "h",
            "dofs",
            mean_col,
            "converged",
        ],
        _ => vec!["k", "N", "delta", "h", "dofs", mean_col, "converged"],
    };
    let mut t = Table::new(format!("{name}.csv"), &header);
    let mut histories = Vec::new();
    // strips are judged by the error, box layouts by the residual
    let stop = if cfg.kind == Kind::StripIterate {
        StopNorm::Error
    } else {
        StopNorm::Residual
    };
    let lengths = if cfg.kind == Kind::StripIterate {
        cfg.lengths.clone()
    } else {
        vec![f64::NAN]
    };
    for &k in &cfg.k {
        for &n in &cfg.n {
            for &length in &lengths {
                let (mut label, mut tag) = (format!("k={k} N={n}"), format!("k{k}_N{n}"));
                if cfg.kind == Kind::StripIterate {
                    label.push_str(&format!(" L={length}"));
                    tag.push_str(&format!("_L{length}"));
                }
                let res = sweep.point(label, |meta, cap| {
                    let p = build_problem(cfg, k, n, length, meta, cap)?;
                    let solver = OrasSolver::setup(&p.space, k, &p.decomposition)?;
                    let mut total = 0usize;
                    let mut converged = 0usize;
                    let mut hist = Vec::new();
                    for s in 0..cfg.starts {
                        let seed = cfg.seed.wrapping_add(s as u64);
                        let h = match method {
                            Method::FixedPoint => {
                                let run =
                                    solver.run_random_start(seed, cfg.tol, cfg.maxit, stop)?;
                                let mut h = Table::new(
                                    format!("histories/{name}_{tag}_start{s}.csv"),
                                    &["iter", "rel_error", "rel_residual"],
                                );
                                for (i, (e, r)) in
                                    run.rel_error.iter().zip(&run.rel_residual).enumerate()
                                {
                                    h.push(vec![(i + 1).to_string(), fmt_value(*e), fmt_value(*r)]);
                                }
                                total += run.iterations.unwrap_or(cfg.maxit);
                                converged += usize::from(run.converged());
                                h
                            }
                            Method::Gmres => {
                                let run = solver.gmres_random_start(seed, cfg.tol, cfg.maxit)?;
                                let mut h = Table::new(
                                    format!("histories/{name}_{tag}_start{s}.csv"),
                                    &["iter", "rel_residual"],
                                );
                                for (i, r) in run.history.iter().enumerate() {
                                    h.push(vec![i.to_string(), fmt_value(*r)]);
                                }
                                total += if run.converged {
                                    run.iterations
                                } else {
                                    cfg.maxit
                                };
                                converged += usize::from(run.converged);
                                h
                            }
                        };
                        hist.push(h);
                    }
                    let mean = total as f64 / cfg.starts as f64;
                    let h = meta.h.unwrap_or(f64::NAN);
                    let dofs = p.space.num_dofs().to_string();
                    let row = match cfg.kind {
                        Kind::StripIterate => vec![
                            fmt_param(k),
                            n.to_string(),
                            fmt_param(length),
                            fmt_value(p.delta),
                            fmt_value(h),
                            dofs,
                            format!("{mean:.2}"),
                            converged.to_string(),
                        ],
                        Kind::CheckerboardIterate => vec![
                            fmt_param(k),
                            n.to_string(),
                            (n * n).to_string(),
                            fmt_value(p.delta),
                            fmt_value(h),
                            dofs,
                            format!("{mean:.2}"),
                            converged.to_string(),
                        ],
                        _ => vec![
                            fmt_param(k),
                            n.to_string(),
                            fmt_value(p.delta),
                            fmt_value(h),
                            dofs,
                            format!("{mean:.2}"),
                            converged.to_string(),
                        ],
                    };
                    Ok((row, hist, converged))
                });
                if let Some((row, hist, converged)) = res {
                    t.push(row);
                    histories.extend(hist);
                    if converged < cfg.starts {
                        sweep.fail_last(format!(
                            "{} of {} starts did not reach tol within {} steps",
                            cfg.starts - converged,
                            cfg.starts,
                            cfg.maxit
                        ));
                    }
                }
            }
        }
    }
    let suffix = match cfg.delta {
        Some(DeltaRule::HOver4) => Some("1"),
        Some(DeltaRule::HOver10) => Some("2"),
        Some(DeltaRule::MeshH) => Some("3"),
        _ => None,
    };
    let id = match cfg.kind {
        Kind::StripIterate if method == Method::FixedPoint => Some("tab:new1".to_string()),
        Kind::CheckerboardIterate => suffix.map(|s| format!("tb:checkerboard{s}")),
        Kind::MetisIterate => suffix.map(|s| format!("tb:metis{s}")),
        _ => None,
    };
    let mut tables = vec![t];
    tables.extend(histories);
    (id, tables)
}

fn oned_verify(cfg: &ExperimentConfig, sweep: &mut Sweep) -> (Option<String>, Vec<Table>) {
    let mut t = Table::new("oned.csv", &["k", "N", "L", "delta", "max_ratio"]);
    let overlap = cfg
        .delta
        .expect("validated")
        .resolve(f64::NAN, f64::NAN, f64::NAN);
    for &k in &cfg.k {
        for &n in &cfg.n {
            for &length in &cfg.lengths {
                let res = sweep.point(format!("k={k} N={n} L={length}"), |_, _| {
                    let d = Interval1dDecomposition::uniform(k, n, length, overlap)?;
                    let ratio = d.verify_nilpotency(&mut seeded(cfg.seed), cfg.trials);
                    Ok((
                        vec![
                            fmt_param(k),
                            n.to_string(),
                            fmt_param(length),
                            fmt_param(overlap),
                            fmt_value(ratio),
                        ],
                        ratio,
                    ))
                });
                if let Some((row, ratio)) = res {
                    t.push(row);
                    if !(ratio <= cfg.tol) {
                        sweep.fail_last(format!("max |T^N e|/|e| = {ratio:e} above {:e}", cfg.tol));
                    }
                }
            }
        }
    }
    (None, vec![t])
}

fn algebra_verify(cfg: &ExperimentConfig, sweep: &mut Sweep) -> (Option<String>, Vec<Table>) {
    let mut counts = Table::new("counts.csv", &["n", "j", "count", "expected"]);
    let mut defects = Table::new("expansion.csv", &["n", "dim", "defect"]);
    for &n in &cfg.n {
        let res = sweep.point(format!("n={n}"), |_, _| {
            let mut rows = Vec::new();
            let mut mismatch = None;
            for j in 0..n {
                let c = enumerate_p(n, j)?.len();
                let e = 2.0 * binomial(n - 1, j);
                if c as f64 != e {
                    mismatch = Some(format!("|P({n},{j})| = {c}, expected {e}"));
                }
                rows.push(vec![
                    n.to_string(),
                    j.to_string(),
                    c.to_string(),
                    format!("{e}"),
                ]);
            }
            let mut rng = seeded(cfg.seed.wrapping_add(n as u64));
            let defect = verify_expansion(&mut rng, n, cfg.dim)?;
            if !(defect <= cfg.tol) {
                mismatch.get_or_insert(format!("expansion defect {defect:e} above {:e}", cfg.tol));
            }
            Ok((
                rows,
                vec![n.to_string(), cfg.dim.to_string(), fmt_value(defect)],
                mismatch,
            ))
        });
        if let Some((rows, d, mismatch)) = res {
            rows.into_iter().for_each(|r| counts.push(r));
            defects.push(d);
            if let Some(m) = mismatch {
                sweep.fail_last(m);
            }
        }
    }
    (None, vec![counts, defects])
}

fn fem_convergence(cfg: &ExperimentConfig, sweep: &mut Sweep) -> (Option<String>, Vec<Table>) {
    let mut t = Table::new(
        "femcheck.csv",
        &["k", "h", "dofs", "l2_error", "ratio", "isometry_defect"],
    );
    for &k in &cfg.k {
        let res = sweep.point(format!("k={k}"), |meta, cap| {
            let h0 = cfg.h.resolve(k);
            meta.h = Some(h0);
            let (u, g) = plane_wave(k, 0.0);
            let mut rows = Vec::new();
            let mut errs: Vec<f64> = Vec::new();
            let mut defects: Vec<f64> = Vec::new();
            for level in 0..cfg.levels {
                let h = h0 / (1u64 << level) as f64;
                let mesh = RectMeshBuilder::new(1.0, 1.0, h)
                    .max_vertices(cap)
                    .build()?;
                let space = FemSpace::new(mesh)?;
                guard(meta, &space, cap)?;
                let uh = space.solve_interior_impedance(k, |_| C64::new(0.0, 0.0), g)?;
                let e = space.l2_error(&uh, u);
                let d = space.impedance_isometry_defect(k, &uh, space.outer_boundary())?;
                let ratio = errs.last().map_or(String::new(), |p| fmt_value(p / e));
                rows.push(vec![
                    fmt_param(k),
                    fmt_value(h),
                    space.num_dofs().to_string(),
                    fmt_value(e),
                    ratio,
                    fmt_value(d),
                ]);
                errs.push(e);
                defects.push(d);
            }
            let mut problem = None;
            if let Some(w) = errs.windows(2).find(|w| w[0] / w[1] < cfg.min_ratio) {
                problem = Some(format!(
                    "error ratio {:.3} below {}",
                    w[0] / w[1],
                    cfg.min_ratio
                ));
            } else if defects.windows(2).any(|w| w[1] >= w[0]) {
                problem = Some("isometry defect does not decrease under refinement".to_string());
            }
            Ok((rows, problem))
        });
        if let Some((rows, problem)) = res {
            rows.into_iter().for_each(|r| t.push(r));
            if let Some(m) = problem {
                sweep.fail_last(m);
            }
        }
    }
    (None, vec![t])
}
