use anyhow::{bail, Context, Result};
use potlab::capacity::{capacity_via_normalized_energy, equilibrium};
use potlab::embedding::SearchOptions;
use potlab::kernel::{quasi_symmetry_constant, symmetrize, wmp_constant, DEFAULT_WMP_MAX_SIZE};
use potlab::plot::{loglog_svg, Series};
use potlab::quadrature::QuadratureOptions;
use potlab::riesz::{counterexample_sweep, envelope_constant, omega_n};
use potlab::solver::{picard_solve, PicardOptions};
use potlab::suite::{
    generate_capacity_suite, generate_suite, run_capacity, run_pointwise, run_sandwich, run_semigroup, run_solver,
    run_weak_type, CapacityInstance, CapacityRow, Family, SolverChecks,
};
use potlab::Instance;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::output::{num, Outcome};

const POINTWISE_EXPONENTS: [f64; 4] = [1.0, 1.5, 2.0, 2.5];
const WEAK_TYPE_TRIALS: usize = 4;

fn count(out: &mut Outcome, name: &str, cases: usize, failures: usize) -> bool {
    let mut t = toml::Table::new();
    t.insert("cases".into(), (cases as i64).into());
    t.insert("failures".into(), (failures as i64).into());
    out.results.insert(name.into(), toml::Value::Table(t));
    failures == 0
}

/// The explicit instance, or `Ok(None)` when the random suite is used.
/// A kernel without a finite WMP constant is reported as a failed check.
fn explicit_instance(cfg: &ExperimentConfig, out: &mut Outcome) -> Result<Option<Instance>> {
    let Some(inst) = &cfg.instance else { return Ok(None) };
    match Instance::explicit(inst.kernel()?, inst.sigma()?) {
        Ok(i) => Ok(Some(i)),
        Err(potlab::Error::WmpFails(witness)) => {
            out.passed = false;
            out.result("wmp", "fails");
            out.result("diagnostic", format!("weak maximum principle fails ({witness}); the theorem does not apply"));
            Ok(None)
        }
        Err(e) => Err(e.into()),
    }
}

fn instances(cfg: &ExperimentConfig, out: &mut Outcome) -> Result<Vec<Instance>> {
    if cfg.instance.is_some() {
        return Ok(explicit_instance(cfg, out)?.into_iter().collect());
    }
    Ok(generate_suite(&cfg.suite.families, &cfg.suite_config())?)
}

pub fn verify_theorem(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut out = Outcome::new(true);
    let inst = instances(cfg, &mut out)?;
    if inst.is_empty() {
        return Ok(out);
    }
    out.result("instances", inst.len() as i64);
    let pairs: Vec<(f64, f64)> = cfg.verify.embedding_pairs.iter().map(|&[p, r]| (p, r)).collect();
    let opts = SearchOptions { restarts: cfg.verify.restarts, seed: cfg.seed, ..Default::default() };
    let sandwich = run_sandwich(&inst, &pairs, &opts)?;
    let mut ok = count(&mut out, "sandwich", sandwich.len(), sandwich.iter().filter(|r| !r.ok).count());

    let pairs: Vec<(f64, f64)> = cfg.verify.solver_pairs.iter().map(|&[q, r]| (q, r)).collect();
    let checks = SolverChecks { residual: cfg.solve.tol, lambda: cfg.verify.lambda, ..Default::default() };
    let picard = PicardOptions { tol: cfg.solve.tol.min(1e-12), max_iter: cfg.solve.max_iter, ..Default::default() };
    let solved = run_solver(&inst, &pairs, &picard, &checks)?;
    ok &= count(&mut out, "picard", solved.len(), solved.iter().filter(|r| !r.picard_ok()).count());
    let in_range: Vec<_> = solved.iter().filter(|r| r.lemma_gate == "in-range").collect();
    ok &= count(&mut out, "energy_comparison", in_range.len(), in_range.iter().filter(|r| !r.lemma_ok).count());
    out.result("energy_comparison_skipped", (solved.len() - in_range.len()) as i64);
    let built: Vec<_> = solved.iter().filter(|r| r.kappa.is_finite()).collect();
    ok &= count(&mut out, "supersolution", built.len(), built.iter().filter(|r| !r.gagliardo_ok).count());

    let pointwise = run_pointwise(&inst, &POINTWISE_EXPONENTS, 1e-12)?;
    ok &= count(&mut out, "pointwise", pointwise.len(), pointwise.iter().filter(|r| !r.ok).count());
    let weak = run_weak_type(&inst, cfg.seed, WEAK_TYPE_TRIALS)?;
    ok &= count(&mut out, "weak_type", weak.len(), weak.iter().filter(|r| !r.ok).count());

    out.passed = ok;
    out.table("data.csv", &sandwich)?;
    out.table("solver.csv", &solved)?;
    out.table("pointwise.csv", &pointwise)?;
    out.table("weak_type.csv", &weak)?;
    Ok(out)
}

fn capacity_rows(cfg: &ExperimentConfig) -> Result<Vec<CapacityRow>> {
    let tol = cfg.capacity.tol;
    let Some(inst) = &cfg.instance else {
        let suite = generate_capacity_suite::<f64>(&cfg.capacity.families, &cfg.suite_config())?;
        return Ok(run_capacity(&suite, tol)?);
    };
    let kernel = inst.kernel()?;
    let k = inst.target();
    // surface the library's own error (asymmetry, shape) before the row runner
    equilibrium(&kernel, &k)?;
    capacity_via_normalized_energy(&kernel, &k)?;
    Ok(run_capacity(&[CapacityInstance { id: 0, family: Family::Explicit, kernel, k }], tol)?)
}

pub fn capacity(cfg: &ExperimentConfig) -> Result<Outcome> {
    let rows = capacity_rows(cfg)?;
    let mut out = Outcome::new(true);
    out.passed = count(&mut out, "capacity", rows.len(), rows.iter().filter(|r| !r.ok).count());
    if let [row] = rows.as_slice() {
        out.result("capacity", num(row.capacity));
        out.result("dual_capacity", num(row.dual));
    }
    let worst = rows.iter().map(|r| r.relative_gap.max(r.residual).max(r.identity_gap)).fold(0.0, f64::max);
    out.result("worst_gap", num(worst));
    out.table("data.csv", &rows)?;
    Ok(out)
}

#[derive(Serialize)]
struct TraceRow {
    iteration: usize,
    norm: f64,
    residual: f64,
    monotone: bool,
}

#[derive(Serialize)]
struct SolutionRow {
    atom: usize,
    u: f64,
}

pub fn solve(cfg: &ExperimentConfig) -> Result<Outcome> {
    let s = &cfg.solve;
    let picard = PicardOptions { tol: s.tol.min(1e-12), max_iter: s.max_iter, ..Default::default() };
    let mut out = Outcome::new(true);
    if cfg.instance.is_none() {
        let inst = instances(cfg, &mut out)?;
        let checks = SolverChecks { residual: s.tol, ..Default::default() };
        let rows = run_solver(&inst, &[(s.q, s.r)], &picard, &checks)?;
        out.passed = count(&mut out, "picard", rows.len(), rows.iter().filter(|r| !r.picard_ok()).count());
        out.table("data.csv", &rows)?;
        return Ok(out);
    }
    let Some(inst) = explicit_instance(cfg, &mut out)? else { return Ok(out) };
    let trace = picard_solve(&inst.kernel, &inst.sigma, s.q, s.r, inst.h_max(), inst.a, &picard)?;
    let monotone = trace.monotone.iter().all(|&m| m);
    out.passed = trace.residual <= s.tol && monotone;
    out.result("iterations", trace.residuals.len().saturating_sub(1) as i64);
    out.result("residual", num(trace.residual));
    out.result("start_constant", num(trace.c));
    out.result("halvings", trace.halvings as i64);
    out.result("monotone", monotone);
    out.result("u", toml::Value::Array(trace.u.values().iter().map(|&v| num(v)).collect()));
    if let Some(b) = trace.uniform_bound {
        out.result("uniform_bound", num(b));
    }
    let rows: Vec<TraceRow> = (0..trace.residuals.len())
        .map(|j| TraceRow {
            iteration: j,
            norm: trace.norms[j],
            residual: trace.residuals[j],
            // step j -> j+1; the last iterate has no successor
            monotone: trace.monotone.get(j).copied().unwrap_or(true),
        })
        .collect();
    out.table("data.csv", &rows)?;
    let sol: Vec<SolutionRow> = trace.u.values().iter().enumerate().map(|(atom, &u)| SolutionRow { atom, u }).collect();
    out.table("solution.csv", &sol)?;
    Ok(out)
}

#[derive(Serialize)]
struct SweepRow {
    n: usize,
    energy_bound: f64,
    k_value: f64,
    kappa_lower: f64,
    kappa_oracle: f64,
    k_argmax: f64,
    k_ceiling_near: f64,
    k_ceiling_middle: f64,
    k_ceiling_far: f64,
    semigroup_min: f64,
    semigroup_max: f64,
}

pub fn counterexample(cfg: &ExperimentConfig) -> Result<Outcome> {
    let c = &cfg.counterexample;
    let mut truncations = c.truncations.clone();
    truncations.sort_unstable();
    truncations.dedup();
    if truncations.len() < 2 {
        bail!("counterexample.truncations needs two distinct values");
    }
    let config = cfg.counterexample_config();
    let sweep = counterexample_sweep(&config, &truncations, &QuadratureOptions::default())?;
    let rows: Vec<SweepRow> = sweep
        .iter()
        .map(|f| SweepRow {
            n: f.pieces,
            energy_bound: f.energy_bound,
            k_value: f.k_value,
            kappa_lower: f.kappa_lower,
            kappa_oracle: f.kappa_oracle,
            k_argmax: f.k_argmax,
            k_ceiling_near: f.k_ceiling_near,
            k_ceiling_middle: f.k_ceiling_middle,
            k_ceiling_far: f.k_ceiling_far,
            semigroup_min: f.semigroup_min,
            semigroup_max: f.semigroup_max,
        })
        .collect();
    let (first, prev, last) = (&rows[0], &rows[rows.len() - 2], &rows[rows.len() - 1]);
    let change = |a: f64, b: f64| (b - a).abs() / a.abs();
    let energy_change = change(prev.energy_bound, last.energy_bound);
    let k_change = change(prev.k_value, last.k_value);
    let tail: f64 = (first.n + 1..=last.n).map(|k| 1.0 / (k as f64 * ((k + 1) as f64).ln())).sum();
    let threshold = 0.5 * omega_n::<f64>(config.n)? * tail;
    let gain = last.kappa_lower - first.kappa_lower;
    let bounded = |x: f64| if x < c.stable_change { "bounded" } else { "growing" };
    let verdict =
        [bounded(energy_change), bounded(k_change), if gain > threshold { "divergent" } else { "inconclusive" }];

    let mut out = Outcome::new(verdict == ["bounded", "bounded", "divergent"]);
    out.result("verdict", toml::Value::Array(verdict.iter().map(|&v| v.into()).collect()));
    out.result("first_index", sweep[0].first_index as i64);
    out.result("energy_change", num(energy_change));
    out.result("k_change", num(k_change));
    out.result("kappa_gain", num(gain));
    out.result("kappa_gain_threshold", num(threshold));
    let series =
        |label: &str, f: fn(&SweepRow) -> f64| Series::new(label, rows.iter().map(|r| (r.n as f64, f(r))).collect());
    let svg = loglog_svg(
        "Growth of the embedding lower bound",
        "truncation N",
        "value",
        &[
            series("kappa_lower", |r| r.kappa_lower),
            series("oracle sum", |r| r.kappa_oracle),
            series("energy bound", |r| r.energy_bound),
        ],
    )?;
    out.plots.push(("kappa_growth.svg".into(), svg));
    out.table("data.csv", &rows)?;
    Ok(out)
}

#[derive(Serialize)]
struct WmpRow {
    id: usize,
    family: Family,
    atoms: usize,
    h: f64,
    h_sym: f64,
    a: f64,
}

pub fn wmp(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut out = Outcome::new(true);
    if let Some(inst) = &cfg.instance {
        let g = inst.kernel()?;
        let w = wmp_constant(&g, DEFAULT_WMP_MAX_SIZE)?;
        let ws = wmp_constant(&symmetrize(&g), DEFAULT_WMP_MAX_SIZE)?;
        let a = quasi_symmetry_constant(&g);
        out.passed = !w.fails;
        out.result("h", num(w.h));
        out.result("h_raw", num(w.raw));
        out.result("h_sym", num(ws.h));
        match &a {
            Ok(a) => out.result("a", num(*a)),
            Err(e) => out.result("a", e.to_string()),
        }
        if let Some(wit) = &w.witness {
            out.result("witness_subset", toml::Value::Array(wit.subset.iter().map(|&i| (i as i64).into()).collect()));
            out.result("witness_point", wit.point as i64);
        }
        let row = WmpRow {
            id: 0,
            family: Family::Explicit,
            atoms: g.len(),
            h: w.h,
            h_sym: ws.h,
            a: *a.as_ref().unwrap_or(&f64::INFINITY),
        };
        out.table("data.csv", &[row])?;
        return Ok(out);
    }
    let inst = generate_suite::<f64>(&cfg.suite.families, &cfg.suite_config())?;
    let rows: Vec<WmpRow> = inst
        .iter()
        .map(|i| WmpRow { id: i.id, family: i.family, atoms: i.atoms(), h: i.h, h_sym: i.h_sym, a: i.a })
        .collect();
    out.result("instances", rows.len() as i64);
    out.result("max_h", num(rows.iter().map(|r| r.h).fold(1.0, f64::max)));
    out.table("data.csv", &rows)?;
    Ok(out)
}

#[derive(Serialize)]
struct CheckRow {
    check: String,
    passed: bool,
    detail: String,
}

const SEMIGROUP_PARAMS: [(f64, f64); 12] = [
    (0.05, 0.2),
    (0.1, 0.3),
    (0.1, 0.5),
    (0.1, 0.8),
    (0.15, 0.45),
    (0.2, 0.5),
    (0.2, 0.7),
    (0.25, 0.6),
    (0.25, 0.75),
    (0.3, 0.7),
    (0.3, 0.9),
    (0.4, 0.9),
];

/// Every check at once: the theorem suite, capacities, the Riesz profile
/// envelope at the counterexample's beta, the semigroup fits and the sweep.
pub fn report(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut checks = Vec::new();
    let mut out = Outcome::new(true);
    let mut record = |name: &str, part: &Outcome, detail: String| {
        checks.push(CheckRow { check: name.into(), passed: part.passed, detail });
    };

    let v = verify_theorem(cfg).context("verify-theorem")?;
    record("verify-theorem", &v, summarize(&v.results));
    let c = capacity(cfg).context("capacity")?;
    record("capacity", &c, summarize(&c.results));

    let beta = cfg.counterexample.n as f64 - 2.0 * cfg.counterexample.alpha;
    let env = envelope_constant(
        beta,
        cfg.counterexample.n,
        &[0.5, 0.1, 0.02],
        &[1.0, 10.0, 100.0],
        &[0.0, 0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 1.0, 1.5, 2.0, 5.0, 10.0],
        &QuadratureOptions::default(),
    )?;
    let env_ok = Outcome::new(env.drift <= 2.0 && env.within(env.constant));
    record("profile-envelope", &env_ok, format!("beta {beta}: C* {:.4}, drift {:.4}", env.constant, env.drift));

    let sg = run_semigroup(&SEMIGROUP_PARAMS, 1e-2, &QuadratureOptions::default())?;
    let sg_ok = Outcome::new(sg.iter().all(|r| r.ok));
    record("semigroup", &sg_ok, format!("{} parameter sets, {} off", sg.len(), sg.iter().filter(|r| !r.ok).count()));

    let ce = counterexample(cfg).context("counterexample")?;
    record("counterexample", &ce, summarize(&ce.results));

    out.passed = checks.iter().all(|c| c.passed);
    for c in &checks {
        out.result(&c.check, c.passed);
    }
    out.table("data.csv", &checks)?;
    for (prefix, part) in [("verify", &v), ("capacity", &c), ("counterexample", &ce)] {
        for (name, csv) in &part.tables {
            out.tables.push((format!("{prefix}_{name}"), csv.clone()));
        }
    }
    out.tables.push(("semigroup.csv".into(), potlab::suite::csv_string(&sg)?));
    out.plots.extend(ce.plots);
    Ok(out)
}

fn summarize(results: &toml::Table) -> String {
    results
        .iter()
        .filter(|(_, v)| !v.is_array())
        .map(|(k, v)| match v {
            toml::Value::Table(t) => format!("{k} {}/{}", t["failures"], t["cases"]),
            other => format!("{k} {other}"),
        })
        .collect::<Vec<_>>()
        .join("; ")
}
