//! The five subcommands. Each writes `resolved.toml` next to its results.

use std::fs;
use std::path::{Path, PathBuf};

use fold_core::fiber::FoldProblem;
use fold_core::oracle::{
    brute_force_count, convexity_triple_check, hybrid_spectral_facts, mean_jacobian_monotonicity_check,
    OracleConfig, CRITICAL_EIGEN_TOL,
};
use fold_core::perturbations::{PerturbationKind, SamplingPlan};
use fold_core::solver::{solve_batch, trace_fold, Classification, SolutionSet};
use fold_core::ApexResult;
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{FrameKind, Loaded};
use crate::error::{io_error, CliError};
use crate::rhs::build_rhs;
use crate::setup::{build, solve_options, Setup};

/// Matched oracle roots must agree with the solver to this distance.
pub const MATCH_TOL: f64 = 1e-6;
/// At a tangent right-hand side the oracle roots scatter around the double
/// root; they must stay within `sqrt(MATCH_TOL)` of it.
pub const TANGENT_MATCH_TOL: f64 = 1e-3;

struct Out {
    dir: PathBuf,
}

impl Out {
    fn create(loaded: &Loaded) -> Result<Self, CliError> {
        let dir = loaded.config.output_dir.clone();
        fs::create_dir_all(&dir).map_err(|e| io_error(&dir, e))?;
        let out = Out { dir };
        out.write("resolved.toml", &loaded.config.to_toml())?;
        Ok(out)
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn write(&self, name: &str, text: &str) -> Result<(), CliError> {
        let path = self.path(name);
        fs::write(&path, text).map_err(|e| io_error(&path, e))
    }

    fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).expect("reports serialize");
        text.push('\n');
        self.write(name, &text)
    }

    fn csv(&self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
        let path = self.path(name);
        let mut w = csv::Writer::from_path(&path).map_err(|e| io_error(&path, e))?;
        w.write_record(header).map_err(|e| io_error(&path, e))?;
        for row in rows {
            w.write_record(row).map_err(|e| io_error(&path, e))?;
        }
        w.flush().map_err(|e| io_error(&path, e))
    }
}

/// Shortest round-trip form, scientific for very small or large values.
fn num(x: f64) -> String {
    format!("{x:?}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn write_reports(out: &Out, setup: &Setup) -> Result<(), CliError> {
    out.json("amenability.json", &setup.amenability)?;
    out.json("compatibility.json", &setup.compatibility)
}

pub fn run_check(loaded: &Loaded) -> Result<(), CliError> {
    let setup = build(loaded)?;
    let out = Out::create(loaded)?;
    write_reports(&out, &setup)?;
    let c = setup.compatibility.as_ref();
    println!(
        "amenability: {} (eigenvalue {:.6})",
        if setup.amenability.passed { "passed" } else { "failed" },
        setup.amenability.eigenvalue
    );
    if let Some(c) = c {
        println!(
            "compatibility: {} (gamma {:.6}, contraction bound {:.6})",
            if c.passed { "passed" } else { "failed" },
            c.gamma,
            c.contraction_bound
        );
    }
    println!("reports written to {}", out.dir.display());
    if setup.passed() {
        Ok(())
    } else {
        Err(CliError::Hypothesis(setup.failures().join(", ")))
    }
}

#[derive(Serialize)]
struct SolveRecord<'a> {
    index: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    epsilon: Option<f64>,
    g: Vec<f64>,
    #[serde(flatten)]
    set: &'a SolutionSet,
}

pub fn run_solve(loaded: &Loaded, force: bool) -> Result<(), CliError> {
    let setup = build(loaded)?;
    let out = Out::create(loaded)?;
    write_reports(&out, &setup)?;
    let prob = setup.problem(loaded, force)?;
    let batch = build_rhs(loaded, &setup.spec, &prob)?;
    let sets = solve_batch(&prob, &batch.gs, &solve_options(loaded))
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;

    let eps = |k: usize| batch.epsilons.as_ref().map(|e| e[k]);
    let records: Vec<SolveRecord> = sets
        .iter()
        .enumerate()
        .map(|(k, set)| SolveRecord {
            index: k,
            epsilon: eps(k),
            g: batch.gs[k].iter().cloned().collect(),
            set,
        })
        .collect();
    out.json("solutions.json", &records)?;

    let rows: Vec<Vec<String>> = sets
        .iter()
        .enumerate()
        .map(|(k, set)| {
            let sol = |i: usize| set.solutions.get(i);
            vec![
                k.to_string(),
                opt(eps(k)),
                set.count.to_string(),
                set.classification.as_str().to_string(),
                opt(set.margin),
                opt(sol(0).map(|s| s.t)),
                opt(sol(1).map(|s| s.t)),
                opt(sol(0).map(|s| s.residual)),
                opt(sol(1).map(|s| s.residual)),
            ]
        })
        .collect();
    out.csv(
        "summary.csv",
        &["g_index", "epsilon", "count", "classification", "margin", "t_1", "t_2", "residual_1", "residual_2"],
        &rows,
    )?;
    let mut hist = [0usize; 3];
    for s in &sets {
        hist[s.count.min(2)] += 1;
    }
    println!(
        "solved {} right-hand sides: {} with 0, {} with 1, {} with 2 solutions",
        sets.len(),
        hist[0],
        hist[1],
        hist[2]
    );
    println!("results written to {}", out.dir.display());
    Ok(())
}

/// Seeded fiber coordinates shared by `fiber` and `fold`.
fn fiber_directions(loaded: &Loaded, prob: &FoldProblem) -> Vec<DVector<f64>> {
    let f = &loaded.config.fiber;
    let mut rng = ChaCha8Rng::seed_from_u64(loaded.config.seed);
    let m = prob.frame().w_dim();
    (0..f.fibers)
        .map(|_| {
            DVector::from_fn(m, |_, _| {
                if f.amplitude > 0.0 {
                    rng.random_range(-f.amplitude..=f.amplitude)
                } else {
                    0.0
                }
            })
        })
        .collect()
}

pub fn run_fiber(loaded: &Loaded, force: bool) -> Result<(), CliError> {
    let setup = build(loaded)?;
    let out = Out::create(loaded)?;
    let prob = setup.problem(loaded, force)?;
    let f = &loaded.config.fiber;
    let ts: Vec<f64> = (0..f.samples)
        .map(|k| f.t_min + (f.t_max - f.t_min) * k as f64 / (f.samples - 1) as f64)
        .collect();
    let zs = fiber_directions(loaded, &prob);
    let tables = zs
        .par_iter()
        .map(|z| {
            ts.iter()
                .map(|&t| {
                    let (h, p) = prob.height_at(z, t)?;
                    let lambda = if f.eigen {
                        Some(prob.critical_eigenvalue(&p.u)?)
                    } else {
                        None
                    };
                    Ok(vec![
                        num(t),
                        num(h),
                        opt(lambda),
                        p.iterations.to_string(),
                        num(p.residual),
                        num(p.max_ratio()),
                    ])
                })
                .collect::<fold_core::Result<Vec<_>>>()
        })
        .collect::<fold_core::Result<Vec<_>>>()?;
    for (k, rows) in tables.iter().enumerate() {
        out.csv(
            &format!("fiber_{k:03}.csv"),
            &["t", "height", "lambda_crit", "iterations", "residual", "max_ratio"],
            rows,
        )?;
    }
    let dirs: Vec<Vec<f64>> = zs.iter().map(|z| z.iter().cloned().collect()).collect();
    out.json("fibers.json", &dirs)?;
    println!("{} fibers x {} samples written to {}", zs.len(), ts.len(), out.dir.display());
    Ok(())
}

pub fn run_fold(loaded: &Loaded, force: bool) -> Result<(), CliError> {
    let setup = build(loaded)?;
    let out = Out::create(loaded)?;
    let prob = setup.problem(loaded, force)?;
    let zs = fiber_directions(loaded, &prob);
    let trace = trace_fold(&prob, &zs)?;
    let rows: Vec<Vec<String>> = trace
        .apexes
        .iter()
        .enumerate()
        .map(|(k, a)| match a {
            ApexResult::Apex(d) => vec![
                k.to_string(),
                "apex".into(),
                num(d.t_star),
                num(d.h_max),
                num(d.bracket.0),
                num(d.bracket.1),
                d.evaluations.to_string(),
            ],
            ApexResult::Monotone { increasing, evaluations } => vec![
                k.to_string(),
                if *increasing { "increasing" } else { "decreasing" }.into(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                evaluations.to_string(),
            ],
        })
        .collect();
    out.csv(
        "fold.csv",
        &["fiber", "shape", "t_star", "h_max", "bracket_lo", "bracket_hi", "evaluations"],
        &rows,
    )?;
    out.json("fold.json", &trace)?;
    println!("fold traced over {} fibers, written to {}", zs.len(), out.dir.display());
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CachedRoot {
    u: Vec<f64>,
    t: f64,
    residual: f64,
    hits: usize,
}

/// Brute-force result as stored in the cache.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CachedOracle {
    count: usize,
    roots: Vec<CachedRoot>,
    starts: usize,
    converged: usize,
    box_half_width: f64,
    box_source: String,
}

fn cache_key(loaded: &Loaded, g: &DVector<f64>, cfg: &OracleConfig) -> String {
    let c = &loaded.config;
    let mut h = Sha256::new();
    for part in [
        toml::to_string(&c.operator).unwrap_or_default(),
        toml::to_string(&c.nonlinearity).unwrap_or_default(),
        toml::to_string(&c.frame).unwrap_or_default(),
        toml::to_string(&c.tolerances).unwrap_or_default(),
        serde_json::to_string(cfg).unwrap_or_default(),
    ] {
        h.update(part.as_bytes());
        h.update([0]);
    }
    for x in g.iter() {
        h.update(x.to_bits().to_le_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn oracle_cached(
    loaded: &Loaded,
    prob: &FoldProblem,
    g: &DVector<f64>,
    cfg: &OracleConfig,
) -> Result<CachedOracle, CliError> {
    let path = loaded
        .config
        .output_dir
        .join("oracle-cache")
        .join(format!("{}.json", cache_key(loaded, g, cfg)));
    if loaded.config.oracle.cache {
        if let Some(hit) = fs::read_to_string(&path)
            .ok()
            .and_then(|t| serde_json::from_str::<CachedOracle>(&t).ok())
        {
            return Ok(hit);
        }
    }
    let r = brute_force_count(prob, g, cfg)?;
    let result = CachedOracle {
        count: r.count,
        roots: r
            .roots
            .into_iter()
            .map(|x| CachedRoot {
                u: x.u,
                t: x.t,
                residual: x.residual,
                hits: x.hits,
            })
            .collect(),
        starts: r.starts,
        converged: r.converged,
        box_half_width: r.box_half_width,
        box_source: r.box_source.to_string(),
    };
    if loaded.config.oracle.cache {
        write_cache(&path, &result)?;
    }
    Ok(result)
}

fn write_cache(path: &Path, value: &CachedOracle) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    }
    fs::write(path, serde_json::to_string(value).expect("serializes")).map_err(|e| io_error(path, e))
}

#[derive(Debug, Serialize)]
struct BatteryCheck {
    name: String,
    passed: bool,
    detail: String,
}

#[derive(Serialize)]
struct BatteryReport {
    passed: bool,
    checks: Vec<BatteryCheck>,
    oracle: Vec<CachedOracle>,
}

fn max_distance(set: &SolutionSet, oracle: &CachedOracle) -> Option<f64> {
    (set.count == oracle.count).then(|| {
        set.solutions
            .iter()
            .zip(&oracle.roots)
            .flat_map(|(s, r)| s.u.iter().zip(&r.u).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max)
    })
}

fn tangent_spread(set: &SolutionSet, oracle: &CachedOracle) -> Option<f64> {
    let sol = set.solutions.first()?;
    if oracle.roots.is_empty() {
        return None;
    }
    Some(
        oracle
            .roots
            .iter()
            .flat_map(|r| r.u.iter().zip(&sol.u).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max),
    )
}

fn same_roots(a: &CachedOracle, b: &CachedOracle, tol: f64) -> bool {
    a.count == b.count
        && a
            .roots
            .iter()
            .zip(&b.roots)
            .all(|(x, y)| x.u.iter().zip(&y.u).all(|(p, q)| (p - q).abs() <= tol))
}

pub fn run_oracle(loaded: &Loaded, force: bool) -> Result<(), CliError> {
    let setup = build(loaded)?;
    let out = Out::create(loaded)?;
    write_reports(&out, &setup)?;
    let prob = setup.problem(loaded, force)?;
    let batch = build_rhs(loaded, &setup.spec, &prob)?;
    let sets = solve_batch(&prob, &batch.gs, &solve_options(loaded))
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    let o = &loaded.config.oracle;
    let mut checks = Vec::new();
    let mut oracle_results = Vec::new();

    for (k, (g, set)) in batch.gs.iter().zip(&sets).enumerate() {
        let cfg = OracleConfig {
            starts: o.starts,
            box_half_width: o.box_half_width,
            seed: loaded.config.seed.wrapping_add(k as u64),
            dedup_tol: o.dedup_tol,
        };
        let oracle = oracle_cached(loaded, &prob, g, &cfg)?;
        if set.classification == Classification::Tangent {
            // a double root: Newton lands anywhere within ~sqrt(tol) of it
            let d = tangent_spread(set, &oracle);
            checks.push(BatteryCheck {
                name: format!("rhs-{k}: solve vs oracle (tangent)"),
                passed: d.is_some_and(|d| d <= TANGENT_MATCH_TOL),
                detail: match d {
                    Some(d) => format!("{} oracle roots within {d:.3e} of the tangent solution", oracle.count),
                    None => "oracle found no root".into(),
                },
            });
        } else {
            let d = max_distance(set, &oracle);
            checks.push(BatteryCheck {
                name: format!("rhs-{k}: solve vs oracle"),
                passed: d.is_some_and(|d| d <= MATCH_TOL),
                detail: match d {
                    Some(d) => format!("count {} on both sides, max distance {d:.3e}", set.count),
                    None => format!("solver count {}, oracle count {}", set.count, oracle.count),
                },
            });
        }
        if o.saturation && set.classification != Classification::Tangent {
            let big = oracle_cached(
                loaded,
                &prob,
                g,
                &OracleConfig {
                    starts: 2 * o.starts,
                    ..cfg
                },
            )?;
            checks.push(BatteryCheck {
                name: format!("rhs-{k}: oracle saturation"),
                passed: same_roots(&oracle, &big, o.dedup_tol),
                detail: format!("{} starts: {} roots, {} starts: {} roots", o.starts, oracle.count, 2 * o.starts, big.count),
            });
        }
        if let ApexResult::Apex(a) = set.apex {
            let z = DVector::from_column_slice(&set.rhs_coords.z);
            let u = prob.fiber_point(&z, a.t_star)?.u;
            let lambda = prob.critical_eigenvalue(&u)?;
            checks.push(BatteryCheck {
                name: format!("rhs-{k}: critical eigenvalue at apex"),
                passed: lambda.abs() <= CRITICAL_EIGEN_TOL,
                detail: format!("{lambda:.3e} at t* = {:.6}", a.t_star),
            });
        }
        if setup.frame_kind == FrameKind::Hybrid {
            let facts = hybrid_spectral_facts(&prob, g)?;
            checks.push(BatteryCheck {
                name: format!("rhs-{k}: hybrid spectral facts"),
                passed: facts.passed,
                detail: if facts.failed.is_empty() {
                    "E2, G1 and the curvature sign hold".into()
                } else {
                    format!("failed {}", facts.failed.join(", "))
                },
            });
        }
        oracle_results.push(oracle);
    }

    let plan = SamplingPlan {
        seed: loaded.config.seed,
        ..SamplingPlan::default()
    };
    let triples = plan.ordered_triples(prob.frame().phi());
    let p = prob.map().perturbation();
    if p.kind() != PerturbationKind::Affine && p.scalar().is_convex() {
        let c = convexity_triple_check(p, &triples)?;
        checks.push(BatteryCheck {
            name: "convexity triples".into(),
            passed: c.holds && !c.non_strict,
            detail: format!("{} triples, {} witnesses", triples.len(), c.witnesses.len()),
        });
    }
    if setup.frame_kind == FrameKind::Ground {
        let m = mean_jacobian_monotonicity_check(prob.map(), &triples)?;
        checks.push(BatteryCheck {
            name: "mean jacobian monotonicity".into(),
            passed: m.violations.is_empty(),
            detail: format!("{} triples, {} violations", triples.len(), m.violations.len()),
        });
    }

    let passed = checks.iter().all(|c| c.passed);
    for c in &checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    out.json(
        "oracle.json",
        &BatteryReport {
            passed,
            checks,
            oracle: oracle_results,
        },
    )?;
    println!("battery written to {}", out.dir.display());
    if passed {
        Ok(())
    } else {
        Err(CliError::Numeric("oracle battery has failing checks".into()))
    }
}
