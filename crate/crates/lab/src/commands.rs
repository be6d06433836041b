//! One function per subcommand. Each reads what it needs from the config,
//! computes everything in memory and returns a [`Report`].

use std::path::Path;

use rand::Rng;
use smoothinglab_core::brw::{self, SweepConfig};
use smoothinglab_core::exponent::{solve_alpha, ExponentResult};
use smoothinglab_core::fixpoint::{
    self, apply_smoothing, build_solution, fit_modulation, iterate, residual, sample_w, sample_z, GridFunction, LowerTail,
    MartingaleLimitSamples,
};
use smoothinglab_core::fractal::{self, StableJumpMeasure};
use smoothinglab_core::rng::{Rng64, Streams};
use smoothinglab_core::rwalk::{self, HarmonicTable, IncrementLaw, WalkEstimate};
use smoothinglab_core::stats::{mean_ci, SummaryStats, DEFAULT_LEVEL};
use smoothinglab_core::weights::{condition_report, WeightModel, DEFAULT_RESOLUTION};

use crate::config::{missing, AlphaSpec, ExperimentConfig, FunctionSpec, KindSpec, SamplerSpec, SfpeSpec, SolveSpec};
use crate::report::{grid_function_json, grid_function_table, num, read_grid_function, Report, Table};
use crate::LabError;

/// The exponent requested by the config: a fixed value or a solve.
pub fn resolve_alpha(cfg: &ExperimentConfig, model: &WeightModel, streams: &Streams) -> Result<f64, LabError> {
    match cfg.alpha {
        Some(AlphaSpec::Value(a)) => Ok(a),
        Some(AlphaSpec::Solve { solve }) => Ok(solve_for(model, &solve, cfg.budgets.moment_budget, streams)?.alpha),
        None => Ok(solve_for(model, &SolveSpec::default(), cfg.budgets.moment_budget, streams)?.alpha),
    }
}

fn solve_for(model: &WeightModel, s: &SolveSpec, budget: usize, streams: &Streams) -> Result<ExponentResult, LabError> {
    Ok(solve_alpha(model, (s.bracket[0], s.bracket[1]), s.tol, budget, &streams.sub("exponent"))?)
}

fn stats_cells(s: &SummaryStats) -> [String; 2] {
    [num(s.mean), num(s.stderr)]
}

fn walk_row(t: &mut Table, function: &str, x: f64, y: Option<f64>, e: &WalkEstimate) {
    t.push([
        function.to_string(),
        num(x),
        y.map(num).unwrap_or_default(),
        num(e.stats.mean),
        num(e.stats.stderr),
        e.reps.to_string(),
        num(e.capped_fraction()),
    ]);
}

pub fn exponent(cfg: &ExperimentConfig, streams: &Streams) -> Result<Report, LabError> {
    let model = cfg.model()?;
    let solve = match cfg.alpha {
        Some(AlphaSpec::Solve { solve }) => solve,
        _ => SolveSpec::default(),
    };
    let r = solve_for(&model, &solve, cfg.budgets.moment_budget, streams)?;
    let mut t = Table::new(
        "exponent",
        &["alpha", "half_width", "lo", "hi", "iterations", "m_alpha", "m_alpha_stderr", "m_prime_alpha", "m_prime_stderr", "classification"],
    );
    t.push([
        num(r.alpha),
        num(r.half_width),
        num(r.refined.0),
        num(r.refined.1),
        r.iterations.to_string(),
        num(r.m_alpha.mean),
        num(r.m_alpha.stderr),
        num(r.m_prime_alpha.mean),
        num(r.m_prime_alpha.stderr),
        format!("{:?}", r.classification).to_lowercase(),
    ]);
    Ok(Report { tables: vec![t], notes: vec![format!("alpha = {}", r.alpha)], ..Report::default() })
}

pub fn conditions(cfg: &ExperimentConfig, streams: &Streams) -> Result<Report, LabError> {
    let model = cfg.model()?;
    let alpha = resolve_alpha(cfg, &model, streams)?;
    let res = cfg.params.resolution.unwrap_or(DEFAULT_RESOLUTION);
    let r = condition_report(&model, alpha, cfg.budgets.moment_budget, res, &streams.sub("conditions"))?;
    let mut t = Table::new("conditions", &["quantity", "mean", "stderr"]);
    for (name, s) in [
        ("supercritical", &r.supercritical),
        ("m_alpha", &r.m_alpha),
        ("m_prime_alpha", &r.m_prime_alpha),
        ("m_second_alpha", &r.m_second_alpha),
        ("w_log_w", &r.w_log_w),
        ("w_log2_w", &r.w_log2_w),
        ("xtilde_log_xtilde", &r.xtilde_log_xtilde),
    ] {
        let [m, se] = stats_cells(s);
        t.push([name.to_string(), m, se]);
    }
    let mut c = Table::new("classification", &["alpha", "classification", "violations"]);
    let v: Vec<String> = r.violations.iter().map(|v| format!("{v:?}")).collect();
    c.push([num(alpha), format!("{:?}", r.classification).to_lowercase(), v.join(";")]);
    Ok(Report { tables: vec![t, c], ..Report::default() })
}

pub fn simulate_brw(cfg: &ExperimentConfig, streams: &Streams) -> Result<Report, LabError> {
    let model = cfg.model()?;
    let alpha = resolve_alpha(cfg, &model, streams)?;
    let n = cfg.budgets.generations;
    let tree = brw::grow(&model, n, cfg.budgets.pop_cap, &mut streams.sub("tree").rng(0))?;
    let mut t = Table::new("brw", &["generation", "statistic", "value"]);
    for g in 0..=tree.depth() {
        let gen = tree.generation(g)?;
        let lo = gen.nodes.iter().map(|r| r.pos).fold(f64::INFINITY, f64::min);
        let hi = gen.nodes.iter().map(|r| r.pos).fold(f64::NEG_INFINITY, f64::max);
        for (name, v) in [
            ("population", gen.len() as f64),
            ("w", brw::additive_w(&tree, alpha, g)?),
            ("z", brw::derivative_z(&tree, alpha, g)?),
            ("min_position", lo),
            ("max_position", hi),
        ] {
            t.push([g.to_string(), name.to_string(), num(v)]);
        }
    }
    Ok(Report { tables: vec![t], ..Report::default() })
}

/// Mean of `W_n`, `Z_n` and their one-step increments over independent
/// trees, plus the truncated `Z_n^(a)(t)` when `params.a` and `params.t`
/// are given.
pub fn martingale(cfg: &ExperimentConfig, streams: &Streams) -> Result<Report, LabError> {
    let model = cfg.model()?;
    let alpha = resolve_alpha(cfg, &model, streams)?;
    let b = &cfg.budgets;
    let n = b.generations;
    let sweep_cfg = SweepConfig { alpha, generations: n, pop_cap: b.pop_cap, floor: b.floor };
    let s = streams.sub("sweep");
    let traces = smoothinglab_core::replicate::try_map(b.reps, |i| brw::sweep(&model, &sweep_cfg, &mut s.rng(i as u64)))?;
    let mut t = Table::new("martingale", &["generation", "statistic", "mean", "stderr", "reps"]);
    let mut push = |g: usize, name: &str, v: Vec<f64>| -> Result<(), LabError> {
        let st = mean_ci(&v, DEFAULT_LEVEL)?;
        let [m, se] = stats_cells(&st);
        t.push([g.to_string(), name.to_string(), m, se, v.len().to_string()]);
        Ok(())
    };
    for g in 0..=n {
        push(g, "w", traces.iter().map(|tr| tr.w[g]).collect())?;
        push(g, "z", traces.iter().map(|tr| tr.z[g]).collect())?;
    }
    for g in 0..n {
        push(g, "w_increment", traces.iter().map(|tr| tr.w[g + 1] - tr.w[g]).collect())?;
        push(g, "z_increment", traces.iter().map(|tr| tr.z[g + 1] - tr.z[g]).collect())?;
    }
    if let (Some(a), Some(tt)) = (cfg.params.a, cfg.params.t) {
        let table = harmonic_table(cfg, &model, alpha, streams)?;
        let ts = streams.sub("truncated");
        let vals = smoothinglab_core::replicate::try_map(b.reps, |i| -> Result<Vec<f64>, LabError> {
            let tree = brw::grow(&model, n, b.pop_cap, &mut ts.rng(i as u64))?;
            (0..=n).map(|g| Ok(brw::truncated_z(&tree, alpha, tt, a, |x| table.eval(x), g)?)).collect()
        })?;
        for g in 0..=n {
            push(g, "z_truncated", vals.iter().map(|v| v[g]).collect())?;
        }
        for g in 0..n {
            push(g, "z_truncated_increment", vals.iter().map(|v| v[g + 1] - v[g]).collect())?;
        }
    }
    let max_pop = traces.iter().map(|tr| tr.max_population).max().unwrap_or(0);
    Ok(Report { tables: vec![t], notes: vec![format!("largest population {max_pop}")], ..Report::default() })
}

/// Harmonic function of the size-biased walk. Centered normal laws use the
/// renewal quadrature; other laws are tabulated on `[0, 50]` from ladder
/// estimates (exact for integer-valued laws).
pub fn harmonic_table(cfg: &ExperimentConfig, model: &WeightModel, alpha: f64, streams: &Streams) -> Result<HarmonicTable, LabError> {
    let law = rwalk::make_increment_law(model, alpha, cfg.params.tol.unwrap_or(1e-9))?;
    if let IncrementLaw::Normal { mean, sd } = law {
        if mean.abs() < 1e-9 {
            return Ok(HarmonicTable::normal_quadrature(sd, 40.0 * sd.max(1.0), 800)?);
        }
    }
    let xs: Vec<f64> = (1..=100).map(|k| 0.5 * k as f64).collect();
    let reps = (cfg.budgets.reps / 10).max(1000);
    Ok(HarmonicTable::from_ladder(&law, &xs, reps, cfg.budgets.step_cap, &streams.sub("harmonic"))?)
}

pub fn line(cfg: &ExperimentConfig, streams: &Streams) -> Result<Report, LabError> {
    let model = cfg.model()?;
    let a = cfg.params.a.ok_or_else(|| missing("params.a"))?;
    let alpha = resolve_alpha(cfg, &model, streams)?;
    let l = brw::first_passage_line(&model, a, cfg.budgets.step_cap, &mut streams.sub("line").rng(0))?;
    let mut t = Table::new("line", &["vertex", "depth", "weight", "position", "max_weight_before"]);
    for m in &l.members {
        t.push([m.vertex.to_string(), m.vertex.depth().to_string(), num(m.record.l), num(m.record.pos), num(m.record.lmax)]);
    }
    let mut s = Table::new("line_summary", &["a", "members", "power_sum", "antichain"]);
    s.push([num(a), l.members.len().to_string(), num(brw::line_power_sum(&l, alpha)), l.is_antichain().to_string()]);
    Ok(Report { tables: vec![t, s], ..Report::default() })
}

fn law_of(cfg: &ExperimentConfig, streams: &Streams) -> Result<IncrementLaw, LabError> {
    cfg.walk_law(|| {
        let model = cfg.model()?;
        resolve_alpha(cfg, &model, streams)
    })
}

pub fn tanaka(cfg: &ExperimentConfig, streams: &Streams) -> Result<Report, LabError> {
    let law = law_of(cfg, streams)?;
    let xs = cfg.params.xs.clone().ok_or_else(|| missing("params.xs"))?;
    let (reps, cap) = (cfg.budgets.reps, cfg.budgets.step_cap);
    let mut t = Table::new("tanaka", &["function", "x", "y", "estimate", "stderr", "reps", "capped_fraction"]);
    for (k, &x) in xs.iter().enumerate() {
        let e = rwalk::tanaka_h_hat(&law, x, reps, cap, &streams.sub(&format!("h_hat/{k}")))?;
        walk_row(&mut t, "h_hat", x, None, &e);
        let e = rwalk::h_ladder(&law, x, reps, cap, &streams.sub(&format!("h_ladder/{k}")))?;
        walk_row(&mut t, "h_ladder", x, None, &e);
    }
    if let Some(ys) = &cfg.params.ys {
        let x = cfg.params.x.ok_or_else(|| missing("params.x"))?;
        for e in rwalk::limit_formula(&law, x, ys, reps, cap, &streams.sub("limit"))? {
            walk_row(&mut t, "limit", x, Some(e.x), &e);
        }
    }
    Ok(Report { tables: vec![t], ..Report::default() })
}

pub fn many2one(cfg: &ExperimentConfig, streams: &Streams) -> Result<Report, LabError> {
    let model = cfg.model()?;
    let alpha = resolve_alpha(cfg, &model, streams)?;
    let g = cfg.params.functional.ok_or_else(|| missing("params.functional"))?;
    let b = &cfg.budgets;
    let tol = cfg.params.tol.unwrap_or(1e-9);
    let s = streams.sub("many2one");
    let (mode, param, r) = match cfg.params.a {
        Some(a) => ("stopped", a, rwalk::many_to_one_stopped_verify(&model, alpha, a, |p: &[f64]| g.eval(p), b.reps, b.step_cap, tol, &s)?),
        None => {
            let n = b.generations;
            ("generation", n as f64, rwalk::many_to_one_verify(&model, alpha, n, |p: &[f64]| g.eval(p), b.reps, b.pop_cap, tol, &s)?)
        }
    };
    let mut t = Table::new(
        "many2one",
        &["mode", "parameter", "tree_mean", "tree_stderr", "walk_mean", "walk_stderr", "diff", "z", "exact", "capped"],
    );
    t.push([
        mode.to_string(),
        num(param),
        num(r.tree.mean),
        num(r.tree.stderr),
        num(r.walk.mean),
        num(r.walk.stderr),
        num(r.diff),
        num(r.z),
        r.exact.to_string(),
        r.capped.to_string(),
    ]);
    Ok(Report { tables: vec![t], ..Report::default() })
}

pub fn overshoot(cfg: &ExperimentConfig, streams: &Streams) -> Result<Report, LabError> {
    let law = law_of(cfg, streams)?;
    let x = cfg.params.x.unwrap_or(0.0);
    let levels = cfg.params.levels.clone().ok_or_else(|| missing("params.levels"))?;
    let mut t = Table::new(
        "overshoot",
        &["x", "a", "mean", "stderr", "min", "q25", "median", "q75", "max", "killed_mean", "killed_stderr", "capped", "reps"],
    );
    for (k, &a) in levels.iter().enumerate() {
        let r = rwalk::overshoot_stats(&law, x, a, cfg.budgets.reps, cfg.budgets.step_cap, &streams.sub(&format!("overshoot/{k}")))?;
        let mut row = vec![num(x), num(a), num(r.overshoot.mean), num(r.overshoot.stderr)];
        row.extend(r.quantiles.iter().map(|&q| num(q)));
        row.extend([num(r.killed.mean), num(r.killed.stderr), r.capped.to_string(), r.reps.to_string()]);
        t.push(row);
    }
    Ok(Report { tables: vec![t], ..Report::default() })
}

fn initial_function(cfg: &ExperimentConfig) -> Result<GridFunction, LabError> {
    let spec = cfg.params.initial.as_ref().ok_or_else(|| missing("params.initial"))?;
    let ts = cfg.grid()?;
    Ok(match *spec {
        FunctionSpec::ExpPower { c, power } => {
            if !(c > 0.0 && power > 0.0) {
                return Err(LabError::Config("exp_power needs c > 0 and power > 0".into()));
            }
            GridFunction::from_fn(ts, |t| (-c * t.powf(power)).exp(), LowerTail::SelfSimilar { alpha: power, period: 1.0 })?
                .with_provenance(format!("exp(-{c} t^{power})"))
        }
        FunctionSpec::Rational { c } => GridFunction::from_fn(ts, |t| 1.0 / (1.0 + c * t), LowerTail::One)?,
        FunctionSpec::Constant { value } => GridFunction::from_fn(ts, |_| value, LowerTail::Hold)?,
        FunctionSpec::File { ref path } => read_grid_function(Path::new(path))?,
    })
}

fn function_outputs(report: &mut Report, name: &str, f: &GridFunction) -> Result<(), LabError> {
    report.tables.push(grid_function_table(name, f));
    report.files.push((format!("{name}.json"), grid_function_json(f)?));
    Ok(())
}

pub fn fixpoint_apply(cfg: &ExperimentConfig, streams: &Streams) -> Result<Report, LabError> {
    let model = cfg.model()?;
    let f = initial_function(cfg)?;
    let s = apply_smoothing(&f, &model, cfg.budgets.reps, &streams.sub("apply"))?;
    let mut r = Report::default();
    function_outputs(&mut r, "apply", &s.f)?;
    r.notes.push(format!("monotone rearrangement moved values by at most {}", s.adjustment));
    Ok(r)
}

pub fn fixpoint_iterate(cfg: &ExperimentConfig, streams: &Streams) -> Result<Report, LabError> {
    let model = cfg.model()?;
    let f = initial_function(cfg)?;
    let iters = cfg.params.iters.ok_or_else(|| missing("params.iters"))?;
    let (traj, last) = iterate(&f, &model, iters, cfg.budgets.reps, &streams.sub("iterate"))?;
    let mut t = Table::new("iterate", &["iteration", "sup_change"]);
    for (k, d) in traj {
        t.push([k.to_string(), num(d)]);
    }
    let mut r = Report { tables: vec![t], ..Report::default() };
    function_outputs(&mut r, "iterate_final", &last)?;
    Ok(r)
}

fn residual_table(rep: &fixpoint::ResidualReport) -> Table {
    let mut t = Table::new("residual", &["t", "f", "sf", "diff", "stderr", "z"]);
    for r in &rep.rows {
        t.push([num(r.t), num(r.f), num(r.sf), num(r.diff), num(r.stderr), num(r.z)]);
    }
    t
}

pub fn fixpoint_residual(cfg: &ExperimentConfig, streams: &Streams) -> Result<Report, LabError> {
    let model = cfg.model()?;
    let f = initial_function(cfg)?;
    let rep = residual(&f, &model, cfg.budgets.reps, cfg.params.ts.as_deref(), &streams.sub("residual"))?;
    let notes = vec![format!("sup |f - Sf| = {}, max |z| = {}", rep.sup, rep.max_abs_z)];
    Ok(Report { tables: vec![residual_table(&rep)], notes, ..Report::default() })
}

/// Martingale limit samples of the requested kind (`params.kind`, default
/// additive) at generation `budgets.generations`.
pub fn limit_samples(cfg: &ExperimentConfig, model: &WeightModel, alpha: f64, streams: &Streams) -> Result<MartingaleLimitSamples, LabError> {
    let b = &cfg.budgets;
    let s = streams.sub("samples");
    Ok(match cfg.params.kind.unwrap_or(KindSpec::Additive) {
        KindSpec::Additive => sample_w(model, alpha, b.generations, b.reps, b.pop_cap, b.floor, &s)?,
        KindSpec::Derivative => sample_z(model, alpha, b.generations, b.reps, &s)?,
    })
}

pub fn fixpoint_build(cfg: &ExperimentConfig, streams: &Streams) -> Result<Report, LabError> {
    let model = cfg.model()?;
    let alpha = resolve_alpha(cfg, &model, streams)?;
    let h = cfg.params.modulation.ok_or_else(|| missing("params.modulation"))?.build(alpha)?;
    let samples = limit_samples(cfg, &model, alpha, streams)?;
    let f = build_solution(&h, &samples, &cfg.grid()?)?;
    let st = mean_ci(&samples.samples, DEFAULT_LEVEL)?;
    let mut t = Table::new("limit_samples", &["kind", "generation", "reps", "mean", "stderr", "clamped"]);
    t.push([
        format!("{:?}", samples.kind).to_lowercase(),
        samples.generation.to_string(),
        samples.len().to_string(),
        num(st.mean),
        num(st.stderr),
        samples.clamped.to_string(),
    ]);
    let mut r = Report { tables: vec![t], ..Report::default() };
    function_outputs(&mut r, "build", &f)?;
    Ok(r)
}

pub fn fixpoint_fit(cfg: &ExperimentConfig, streams: &Streams) -> Result<Report, LabError> {
    let f = initial_function(cfg)?;
    let alpha = match (cfg.alpha.as_ref(), f.alpha) {
        (Some(AlphaSpec::Value(a)), _) => *a,
        (_, Some(a)) => a,
        _ => resolve_alpha(cfg, &cfg.model()?, streams)?,
    };
    let fit = fit_modulation(&f, alpha, cfg.params.period.unwrap_or(1.0))?;
    let mut s = Table::new("fit", &["alpha", "period", "constancy", "periodicity", "monotone"]);
    s.push([num(alpha), num(fit.modulation.period()), num(fit.constancy), num(fit.periodicity), fit.monotone.to_string()]);
    let mut h = Table::new("modulation", &["t", "h_hat", "h_fit"]);
    for &(t, v) in &fit.h_hat {
        h.push([num(t), num(v), num(fit.modulation.eval(t))]);
    }
    Ok(Report { tables: vec![s, h], ..Report::default() })
}

pub fn sampler(spec: SamplerSpec) -> Result<impl Fn(&mut Rng64) -> f64 + Sync + Send, LabError> {
    match spec {
        SamplerSpec::PositiveStable { alpha } if !(alpha > 0.0 && alpha < 1.0) => {
            return Err(LabError::Config(format!("positive_stable index {alpha} outside (0, 1)")))
        }
        SamplerSpec::Exponential { rate } if !(rate > 0.0) => return Err(LabError::Config("exponential rate must be positive".into())),
        _ => {}
    }
    Ok(move |rng: &mut Rng64| match spec {
        SamplerSpec::One => 1.0,
        SamplerSpec::HalfStable => fixpoint::half_stable(rng),
        SamplerSpec::PositiveStable { alpha } => fractal::positive_stable(alpha, rng),
        SamplerSpec::Exponential { rate } => -(1.0 - rng.random::<f64>()).ln() / rate,
    })
}

pub fn fixpoint_sfpe(cfg: &ExperimentConfig, streams: &Streams) -> Result<Report, LabError> {
    let model = cfg.model()?;
    let x = sampler(cfg.params.sampler.ok_or_else(|| missing("params.sampler"))?)?;
    let kind = cfg.params.sfpe.unwrap_or(SfpeSpec::Additive);
    let s = streams.sub("sfpe");
    let r = match kind {
        SfpeSpec::Additive => fixpoint::verify_additive_sfpe(x, &model, cfg.budgets.reps, &s)?,
        SfpeSpec::Min => fixpoint::verify_min_sfpe(x, &model, cfg.budgets.reps, &s)?,
    };
    let mut t = Table::new("sfpe", &["equation", "statistic", "p_value", "critical_value", "pass", "infinite", "reps"]);
    t.push([
        format!("{kind:?}").to_lowercase(),
        num(r.ks.statistic),
        num(r.ks.p_value),
        num(r.ks.critical_value),
        r.pass.to_string(),
        r.infinite.to_string(),
        r.reps.to_string(),
    ]);
    Ok(Report { tables: vec![t], passed: Some(r.pass), ..Report::default() })
}

pub fn fractal_campbell(cfg: &ExperimentConfig, streams: &Streams) -> Result<Report, LabError> {
    let model = cfg.model()?;
    let alpha = resolve_alpha(cfg, &model, streams)?;
    let c = cfg.params.c.unwrap_or(1.0);
    let ts = cfg.params.ts.clone().ok_or_else(|| missing("params.ts"))?;
    let mode = cfg.params.kind.unwrap_or(KindSpec::Additive).mass();
    let rows = fractal::campbell_check(&model, alpha, c, &ts, cfg.budgets.generations, cfg.budgets.reps, mode, &streams.sub("campbell"))?;
    let mut t = Table::new("campbell", &["t", "empirical", "stderr", "predicted", "z"]);
    for r in rows {
        t.push([num(r.t), num(r.empirical.mean), num(r.empirical.stderr), num(r.predicted), num(r.z)]);
    }
    Ok(Report { tables: vec![t], ..Report::default() })
}

pub fn fractal_atoms(cfg: &ExperimentConfig, streams: &Streams) -> Result<Report, LabError> {
    let model = cfg.model()?;
    let alpha = resolve_alpha(cfg, &model, streams)?;
    let jm = StableJumpMeasure::new(alpha, cfg.params.c.unwrap_or(1.0))?;
    let b = &cfg.budgets;
    let depth = cfg.params.depth.unwrap_or(b.generations.min(4));
    if depth > b.generations {
        return Err(LabError::Config("params.depth exceeds budgets.generations".into()));
    }
    let xi = cfg.params.xi_min.ok_or_else(|| missing("params.xi_min"))?;
    let tree = brw::grow(&model, b.generations, b.pop_cap, &mut streams.sub("tree").rng(0))?;
    let mode = cfg.params.kind.unwrap_or(KindSpec::Additive).mass();
    let set = fractal::sample_boundary_measure(&tree, depth, &jm, mode, xi, &mut streams.sub("atoms").rng(0))?;
    let mut t = Table::new("atoms", &["prefix", "mark"]);
    for (m, v) in &set.atoms {
        t.push([v.to_string(), num(*m)]);
    }
    let mut s = Table::new("atoms_summary", &["depth", "xi_min", "atoms", "compensation_per_mass", "total_mass"]);
    s.push([depth.to_string(), num(xi), set.atoms.len().to_string(), num(set.compensation), num(set.total_mass())]);
    Ok(Report { tables: vec![t, s], ..Report::default() })
}
