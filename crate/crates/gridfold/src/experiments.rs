//! One function per experiment kind, plus the shared run wrapper that
//! writes the summary and manifest.

use std::fmt::Debug;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use gridfold_core::engine::{self, Contention, EngineConfig};
use gridfold_core::grid::{self, GridGraph};
use gridfold_core::latency::{self, ClusterLatencyParams, GridLatencyParams, Real};
use gridfold_core::monoid::{self, catalog, MonoidSpec};
use gridfold_core::percolation::{self, DetourParams};
use gridfold_core::rng;
use gridfold_core::transport::{self, DiscreteMeasure, SteinerMode};
use gridfold_core::variance;
use gridfold_core::NodeId;
use rand::Rng as _;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, Kind, SteinerChoice, TreefoldValues};
use crate::formats::{self, SCHEMA_VERSION};
use crate::runner::Rayon;
use crate::smallworld;
use crate::RunError;

/// What a run produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub kind: Kind,
    /// Deterministic summary record, also written to `<kind>.summary.json`.
    pub summary: Value,
    pub artifacts: Vec<PathBuf>,
    /// Statistical checks that did not hold.
    pub failures: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub tool: &'static str,
    pub version: &'static str,
    pub experiment: Kind,
    pub seed: u64,
    pub config_digest: String,
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
    pub artifacts: Vec<String>,
    pub failures: Vec<String>,
    pub summary: Value,
}

struct Produced {
    summary: Value,
    artifacts: Vec<PathBuf>,
    failures: Vec<String>,
}

fn now_ms() -> u128 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0)
}

/// Validates `cfg`, runs the experiment, and writes all artifacts under `cfg.out`.
pub fn run(kind: Kind, cfg: &ExperimentConfig) -> Result<Outcome, RunError> {
    cfg.validate(kind)?;
    let runner = Rayon::new(cfg.threads).map_err(|e| RunError::invalid("threads", e.to_string()))?;
    let started = now_ms();
    std::fs::create_dir_all(&cfg.out).map_err(|e| RunError::io(&cfg.out, e))?;
    let p = match kind {
        Kind::Bounds => bounds(cfg)?,
        Kind::Simulate => simulate(cfg)?,
        Kind::Treefold => treefold(cfg)?,
        Kind::Variance => variance_run(cfg, &runner)?,
        Kind::Percolation => percolation_run(cfg, &runner)?,
        Kind::Smallworld => smallworld_run(cfg, &runner)?,
        Kind::Latency => latency_run(cfg)?,
    };
    let mut artifacts = p.artifacts;
    let summary_path = cfg.out.join(format!("{kind}.summary.json"));
    formats::write_json(&summary_path, &p.summary)?;
    artifacts.push(summary_path);
    let manifest_path = cfg.out.join("manifest.json");
    let manifest = RunManifest {
        schema_version: SCHEMA_VERSION,
        tool: "gridfold",
        version: env!("CARGO_PKG_VERSION"),
        experiment: kind,
        seed: cfg.seed,
        config_digest: cfg.digest(),
        started_unix_ms: started,
        finished_unix_ms: now_ms(),
        artifacts: artifacts.iter().map(|a| file_name(a)).collect(),
        failures: p.failures.clone(),
        summary: p.summary.clone(),
    };
    formats::write_json(&manifest_path, &manifest)?;
    artifacts.push(manifest_path);
    Ok(Outcome {
        kind,
        summary: p.summary,
        artifacts,
        failures: p.failures,
    })
}

fn file_name(p: &Path) -> String {
    p.file_name().map_or_else(|| p.display().to_string(), |n| n.to_string_lossy().into_owned())
}

fn node(field: &str, g: &GridGraph, xy: [u32; 2]) -> Result<NodeId, RunError> {
    let v = NodeId::new(xy[0], xy[1]);
    if !g.contains(v) {
        return Err(RunError::invalid(field, format!("({}, {}) is outside the {}×{} grid", xy[0], xy[1], g.side(), g.side())));
    }
    Ok(v)
}

fn graph(cfg: &ExperimentConfig) -> Result<GridGraph, RunError> {
    let g = match &cfg.graph_file {
        Some(path) => formats::load_graph(path)?,
        None => smallworld::smallworld_graph(cfg.side, cfg.k, cfg.seed)?,
    };
    if let Some(path) = &cfg.save_graph {
        formats::save_graph(&g, path)?;
    }
    Ok(g)
}

fn measure(cfg: &ExperimentConfig, g: &GridGraph) -> Result<DiscreteMeasure, RunError> {
    let sink = node("sink", g, cfg.sink)?;
    let nodes = cfg
        .atoms
        .iter()
        .map(|&a| node("atoms", g, a))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(if cfg.masses.is_empty() {
        DiscreteMeasure::uniform(&nodes, sink)?
    } else {
        DiscreteMeasure::new(nodes.into_iter().zip(cfg.masses.iter().copied()).collect(), sink)?
    })
}

fn engine_config(cfg: &ExperimentConfig, node_count: usize) -> EngineConfig {
    let t_local = if cfg.max_local > 0 {
        let mut r = rng::substream(cfg.seed, u64::MAX - 1);
        (0..node_count).map(|_| r.gen_range(0..=cfg.max_local)).collect()
    } else {
        Vec::new()
    };
    EngineConfig {
        contention: cfg.contention,
        t_edge: cfg.t_edge,
        t_merge: cfg.t_merge,
        t_cycle: cfg.t_cycle,
        k_arch: cfg.k_arch,
        t_local,
        law_samples: cfg.law_samples,
        record_trace: cfg.trace.is_some(),
    }
}

#[derive(Serialize)]
struct BoundsDoc<'a> {
    schema_version: u32,
    digest: formats::MeasureDigest,
    #[serde(flatten)]
    report: &'a transport::BoundsReport,
}

fn bounds(cfg: &ExperimentConfig) -> Result<Produced, RunError> {
    let g = graph(cfg)?;
    let m = measure(cfg, &g)?;
    let mode = match cfg.steiner {
        SteinerChoice::Exact => SteinerMode::Exact,
        SteinerChoice::Heuristic => SteinerMode::HeuristicOnly,
    };
    let report = transport::bounds_report(&m, &g, cfg.t_edge as f64, cfg.t_cycle, mode)?;
    let doc = BoundsDoc {
        schema_version: SCHEMA_VERSION,
        digest: formats::measure_digest(&m, g.side(), g.seed()),
        report: &report,
    };
    let path = cfg.out.join("bounds.json");
    formats::write_json(&path, &doc)?;
    let mut failures = Vec::new();
    if report.w1 > report.r_mu as f64 || report.r_mu > report.steiner {
        failures.push(format!(
            "bound ordering w1 ≤ r_mu ≤ steiner violated: {} / {} / {}",
            report.w1, report.r_mu, report.steiner
        ));
    }
    Ok(Produced {
        summary: serde_json::to_value(&doc)?,
        artifacts: vec![path],
        failures,
    })
}

fn simulate(cfg: &ExperimentConfig) -> Result<Produced, RunError> {
    let g = graph(cfg)?;
    let m = measure(cfg, &g)?;
    let ecfg = engine_config(cfg, g.node_count());
    let a = engine::measure_attainment(&m, &g, &ecfg)?;
    let mut artifacts = Vec::new();
    let routes: Vec<Vec<[u32; 2]>> = a
        .run
        .routes
        .iter()
        .map(|r| r.iter().map(|v| [v.x, v.y]).collect())
        .collect();
    let routes_path = cfg.out.join("routes.json");
    formats::write_json(&routes_path, &json!({ "schema_version": SCHEMA_VERSION, "routes": routes }))?;
    artifacts.push(routes_path);
    if let (Some(path), Some(trace)) = (&cfg.trace, &a.run.trace) {
        formats::write_json_lines(path, trace)?;
        artifacts.push(path.clone());
    }
    let floor = a.bounds.r_mu as u64 * cfg.t_edge;
    let mut failures = Vec::new();
    if !a.work_attains_w1 {
        failures.push(format!("transport work {} differs from W1 {}", a.run.transport_work, a.bounds.w1));
    }
    if cfg.contention == Contention::NonCongesting && a.run.completion_cycles != floor {
        failures.push(format!("completion {} cycles, expected r_mu·t_edge = {floor}", a.run.completion_cycles));
    }
    if a.run.completion_cycles < floor {
        failures.push(format!("completion {} cycles is below r_mu·t_edge = {floor}", a.run.completion_cycles));
    }
    let summary = json!({
        "schema_version": SCHEMA_VERSION,
        "contention": cfg.contention,
        "w1": a.bounds.w1,
        "r_mu": a.bounds.r_mu,
        "transport_work": a.run.transport_work,
        "work_ratio": a.work_ratio,
        "work_attains_w1": a.work_attains_w1,
        "completion_cycles": a.run.completion_cycles,
        "rounds": a.run.rounds,
        "wallclock_seconds": a.run.wallclock_seconds,
        "depth_slack_cycles": a.depth_slack_cycles,
        "per_payload_hops": a.run.per_payload_hops,
    });
    Ok(Produced {
        summary,
        artifacts,
        failures,
    })
}

fn treefold_with<T: Clone + PartialEq + Debug>(
    cfg: &ExperimentConfig,
    g: &GridGraph,
    m: &MonoidSpec<T>,
    sequential: fn(u64) -> T,
) -> Result<Produced, RunError> {
    let origin = node("origin", g, cfg.origin)?;
    let n = g.node_count();
    let values: Vec<T> = match cfg.values {
        TreefoldValues::Sequential => (0..n as u64).map(|i| sequential(i + 1)).collect(),
        TreefoldValues::Random => {
            let mut r = rng::substream(cfg.seed, u64::MAX);
            (0..n).map(|_| (m.sample)(&mut r)).collect()
        }
    };
    let check = monoid::check_laws(m, cfg.law_samples, cfg.seed);
    let report = monoid::emit_law_report(m, Some(&check));
    let cert_path = cfg.out.join("law_report.json");
    formats::write_json(&cert_path, &report)?;
    let mut artifacts = vec![cert_path];
    if let Some(w) = check.first_witness() {
        return Ok(Produced {
            summary: json!({
                "schema_version": SCHEMA_VERSION,
                "monoid": m.name,
                "law_status": report.status,
                "witness": w.describe(),
            }),
            artifacts,
            failures: vec![format!("{} violates {:?}: {}", m.name, w.law(), w.describe())],
        });
    }
    let ecfg = engine_config(cfg, n);
    let r = engine::run_treefold(g, origin, m, &values, &ecfg, Some(cfg.seed))?;
    let fuzz = monoid::fuzz_schedule_independence(m, &values, cfg.fuzz_trees, cfg.seed);
    if let (Some(path), Some(trace)) = (&cfg.trace, &r.trace) {
        formats::write_json_lines(path, trace)?;
        artifacts.push(path.clone());
    }
    let ecc = grid::eccentricity(g, origin)?;
    let mut failures = Vec::new();
    if r.wallclock_seconds > r.wallclock_bound_seconds {
        failures.push(format!(
            "wall-clock {} s exceeds the depth bound {} s",
            r.wallclock_seconds, r.wallclock_bound_seconds
        ));
    }
    let fuzz_value = match &fuzz {
        monoid::ScheduleOutcome::Pass { value, .. } => {
            if *value != r.value {
                failures.push(format!("wavefront fold {:?} differs from tree fold {value:?}", r.value));
            }
            Some(format!("{value:?}"))
        }
        monoid::ScheduleOutcome::Fail {
            first_value,
            second_value,
            ..
        } => {
            failures.push(format!("two fold trees disagree: {first_value:?} vs {second_value:?}"));
            None
        }
    };
    let summary = json!({
        "schema_version": SCHEMA_VERSION,
        "monoid": m.name,
        "law_status": report.status,
        "value": format!("{:?}", r.value),
        "depth": r.depth,
        "eccentricity": ecc,
        "completion_cycles": r.completion_cycles,
        "wallclock_seconds": r.wallclock_seconds,
        "wallclock_bound_seconds": r.wallclock_bound_seconds,
        "used_edges": r.used_edges,
        "fuzz_trees": cfg.fuzz_trees,
        "fuzz_value": fuzz_value,
        "schedule_independent": fuzz.passed(),
    });
    Ok(Produced {
        summary,
        artifacts,
        failures,
    })
}

/// Names accepted by the `monoid` key.
pub const MONOIDS: &[&str] = &[
    "sum", "product", "max", "min", "xor", "or", "and", "gcd", "sum_mod", "difference", "float_sum",
];

fn treefold(cfg: &ExperimentConfig) -> Result<Produced, RunError> {
    let g = graph(cfg)?;
    match cfg.monoid.as_str() {
        "sum" => treefold_with(cfg, &g, &catalog::sum_i64(), |i| i as i64),
        "product" => treefold_with(cfg, &g, &catalog::product_u64(), |i| i),
        "max" => treefold_with(cfg, &g, &catalog::max_i64(), |i| i as i64),
        "min" => treefold_with(cfg, &g, &catalog::min_u64(), |i| i),
        "xor" => treefold_with(cfg, &g, &catalog::xor_u64(), |i| i),
        "or" => treefold_with(cfg, &g, &catalog::or_u64(), |i| i),
        "and" => treefold_with(cfg, &g, &catalog::and_u64(), |i| i),
        "gcd" => treefold_with(cfg, &g, &catalog::gcd_u64(), |i| i),
        "sum_mod" => treefold_with(cfg, &g, &catalog::sum_mod_prime(), |i| i),
        "difference" => treefold_with(cfg, &g, &catalog::difference_i64(), |i| i as i64),
        "float_sum" => treefold_with(cfg, &g, &catalog::float_sum(), |i| 0.1 * i as f64),
        other => Err(RunError::invalid(
            "monoid",
            format!("unknown monoid `{other}`, expected one of {}", MONOIDS.join(", ")),
        )),
    }
}

/// One line of the variance table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarianceRow {
    pub n: u32,
    #[serde(rename = "P")]
    pub p: u64,
    pub f: f64,
    pub trials: u64,
    pub mean_hat: f64,
    pub mean_exact: f64,
    pub var_hat: f64,
    pub var_exact: f64,
    #[serde(rename = "var_over_P2")]
    pub var_over_p2: f64,
    #[serde(rename = "var_over_P32")]
    pub var_over_p32: f64,
}

fn variance_run(cfg: &ExperimentConfig, runner: &Rayon) -> Result<Produced, RunError> {
    let report = variance::scaling_experiment(&cfg.n_list, cfg.f_act, cfg.trials, cfg.seed, runner)?;
    let rows: Vec<VarianceRow> = report
        .rows
        .iter()
        .map(|r| VarianceRow {
            n: r.n,
            p: r.p,
            f: r.f,
            trials: r.trials,
            mean_hat: r.mean_hat,
            mean_exact: r.mean_exact,
            var_hat: r.var_hat,
            var_exact: r.var_exact,
            var_over_p2: r.var_over_p2,
            var_over_p32: r.var_over_p32,
        })
        .collect();
    let table = formats::write_table(&cfg.out, "variance", cfg.format, &rows)?;
    let oracle: Vec<Value> = cfg
        .n_list
        .iter()
        .filter(|&&n| n * (n - 1) <= variance::ENUMERATION_MAX_INDICATORS)
        .map(|&n| {
            let (mean, var) = variance::enumerate_oracle(n, cfg.f_act)?;
            Ok(json!({ "n": n, "mean": mean, "var": var }))
        })
        .collect::<Result<_, RunError>>()?;
    let max_z = report.max_abs_z();
    let mut failures = Vec::new();
    if max_z > cfg.sigma {
        failures.push(format!("sample variance {max_z:.2}σ from the closed form (limit {}σ)", cfg.sigma));
    }
    let summary = json!({
        "schema_version": SCHEMA_VERSION,
        "rows": report.rows,
        "exact_loglog_slope": report.exact_slope.map(|f| f.slope),
        "sampled_loglog_slope": report.sampled_slope.map(|f| f.slope),
        "max_abs_z": max_z,
        "var_over_P32_increasing": report.var_over_p32_increasing(),
        "relative_concentration": report.relative_concentration(),
        "enumeration_oracle": oracle,
    });
    Ok(Produced {
        summary,
        artifacts: vec![table],
        failures,
    })
}

fn percolation_run(cfg: &ExperimentConfig, runner: &Rayon) -> Result<Produced, RunError> {
    let params = DetourParams {
        side: cfg.side,
        delta: cfg.delta,
        fields: cfg.fields,
        pairs_per_field: cfg.pairs_per_field,
        seed: cfg.seed,
    };
    let r = percolation::detour_experiment(&params, runner)?;
    let table = formats::write_table(&cfg.out, "percolation", cfg.format, &r.buckets)?;
    let mut failures = Vec::new();
    if cfg.delta > 0.0 {
        match &r.tail {
            Some(t) if t.ci_low > 0.0 => {}
            Some(t) => failures.push(format!("tail rate interval [{}, {}] reaches 0", t.ci_low, t.ci_high)),
            None => failures.push("too few clusters for a tail fit".into()),
        }
        if !r.means_non_decreasing {
            failures.push("bucket means decrease beyond 3σ".into());
        }
        if !r.envelope.is_finite() {
            failures.push("no finite linear envelope".into());
        }
        if !r.size_biased_at(cfg.bias_sigma) || !r.hit_dominates_ambient(cfg.bias_sigma) {
            failures.push(format!("hit clusters are not size-biased at {}σ", cfg.bias_sigma));
        }
    }
    let summary = json!({
        "schema_version": SCHEMA_VERSION,
        "result": r,
        "size_biased": r.size_biased_at(cfg.bias_sigma),
        "hit_dominates_ambient": r.hit_dominates_ambient(cfg.bias_sigma),
        "subcritical": cfg.delta < percolation::P_C_SITE_ESTIMATE,
    });
    Ok(Produced {
        summary,
        artifacts: vec![table],
        failures,
    })
}

fn smallworld_run(cfg: &ExperimentConfig, runner: &Rayon) -> Result<Produced, RunError> {
    let r = smallworld::smallworld_experiment(&cfg.side_list, cfg.k, cfg.pairs, cfg.seed, runner)?;
    let table = formats::write_table(&cfg.out, "smallworld", cfg.format, &r.rows)?;
    let mut failures = Vec::new();
    if cfg.k >= 1 && !r.collapse {
        failures.push(format!(
            "no distance collapse: mean/√P decreasing = {}, mean/log₂P band ratio = {:.3}",
            r.sqrt_strictly_decreasing, r.log_band_ratio
        ));
    }
    let mut summary = serde_json::to_value(&r)?;
    summary["schema_version"] = json!(SCHEMA_VERSION);
    Ok(Produced {
        summary,
        artifacts: vec![table],
        failures,
    })
}

#[derive(Serialize)]
struct CurveRow {
    x: f64,
    ratio: f64,
}

fn latency_run(cfg: &ExperimentConfig) -> Result<Produced, RunError> {
    let p = cfg.side as u64 * cfg.side as u64;
    let gp = GridLatencyParams {
        c1: cfg.c1,
        c_w: cfg.c_w,
        t_edge: cfg.t_edge as f64,
        merge_coeff: cfg.merge_coeff,
        t_merge: cfg.t_merge as f64,
        p,
    };
    let cp = ClusterLatencyParams {
        alpha: cfg.alpha,
        beta: cfg.beta,
        gamma: cfg.gamma,
        n: cfg.participants,
        m0: cfg.m0,
        c2: cfg.c2,
    };
    gp.validate()?;
    cp.validate()?;
    let (a_n, b_n) = (cp.a_n(), cp.b_n());
    let curve = latency::ratio_curve_exact(&gp, &cp, a_n, b_n, &latency::doubling_grid_exact(cfg.x_max_log2))?;
    let rows: Vec<CurveRow> = curve
        .samples
        .iter()
        .map(|(x, r)| CurveRow {
            x: x.approx_f64(),
            ratio: r.approx_f64(),
        })
        .collect();
    let div = latency::divergence_experiment(
        &latency::powers_of_two(cfg.log2_n_min, cfg.log2_n_max),
        cfg.f_act,
        &gp,
        &cp,
    )?;
    let curve_path = formats::write_table(&cfg.out, "latency_curve", cfg.format, &rows)?;
    let div_path = formats::write_table(&cfg.out, "latency_divergence", cfg.format, &div.rows)?;
    let bytes = cfg.m0 / cfg.f_act;
    let mut failures = Vec::new();
    if curve.sampled_trend() != Some(curve.trend) {
        failures.push(format!("sampled ratio curve does not follow the criterion trend {:?}", curve.trend));
    }
    if cfg.alpha > 0.0 && !div.diverges {
        failures.push(format!(
            "ratio/log₂N did not settle: tail spread {:.4}, R² {:?}",
            div.tail_spread,
            div.fit.map(|f| f.r_squared)
        ));
    }
    let summary = json!({
        "schema_version": SCHEMA_VERSION,
        "P": p,
        "m_p": gp.m_p(),
        "a_n": a_n,
        "b_n": b_n,
        "monotone": curve.monotone,
        "trend": curve.trend,
        "limit": curve.limit.approx_f64(),
        "collectives": {
            "n_bytes": bytes,
            "recursive_doubling": latency::t_recursive_doubling(cfg.participants, bytes, cfg.alpha, cfg.beta, cfg.gamma).ok(),
            "rabenseifner": latency::t_rabenseifner(cfg.participants, bytes, cfg.alpha, cfg.beta, cfg.gamma)?,
            "ring": latency::t_ring(cfg.participants, bytes, cfg.alpha, cfg.beta)?,
        },
        "divergence": {
            "tail_spread": div.tail_spread,
            "r_squared": div.fit.map(|f| f.r_squared),
            "slope_per_log2n": div.fit.map(|f| f.slope),
            "strictly_increasing": div.strictly_increasing,
            "diverges": div.diverges,
        },
    });
    Ok(Produced {
        summary,
        artifacts: vec![curve_path, div_path],
        failures,
    })
}
