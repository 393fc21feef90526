use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use morseflow::complex::{build_complex, filtered_complexes, Coefficients, HomologyResult, MorseChainComplex};
use morseflow::flow::{integrate, FlowSystem, Stop};
use morseflow::geometry::{find_critical_points_with, CriticalPoint};
use morseflow::moduli::{compare_under_homotopy, shooting_point, ModuliSet};
use morseflow::normalform::{inclination_sweep, FieldHomotopy, QuadraticNormalization};
use morseflow::pipeline::{analyze, resolve_field, Analysis, Tolerances};
use morseflow::scenario::{Potential, Scenario};
use morseflow::{load_scenario, MorseError};
use nalgebra::DMatrix;
use serde::Serialize;
use serde_json::{json, Value};

use crate::args::{Cli, Command, FlowArgs, HomologyArgs, HomotopyArgs, InclinationArgs, ModuliArgs, NormalFormArgs, ReportArgs};
use crate::output::{coordinate_header, num, nums, ManifestInfo, RunDir};

struct RunContext<'a> {
    cli: &'a Cli,
    tol: Tolerances,
    scenario: Option<Scenario>,
}

impl RunContext<'_> {
    fn scenario(&self) -> Result<&Scenario> {
        self.scenario
            .as_ref()
            .ok_or_else(|| MorseError::Validation("this subcommand needs --scenario".into()).into())
    }

    fn finish(&self, dir: RunDir) -> Result<PathBuf> {
        dir.finish(ManifestInfo {
            command: &self.cli.command,
            scenario_path: self.cli.common.scenario.as_deref(),
            scenario: self.scenario.as_ref().map(|s| s.file()),
            tolerances: &self.tol,
            seed: self.cli.common.seed,
        })
    }
}

fn load_tolerances(path: Option<&Path>) -> Result<Tolerances> {
    let Some(path) = path else { return Ok(Tolerances::default()) };
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| MorseError::Parse(format!("{}: {e}", path.display())).into())
}

pub fn run(cli: &Cli) -> Result<PathBuf> {
    let tol = load_tolerances(cli.common.config.as_deref())?;
    let scenario = cli.common.scenario.as_deref().map(load_scenario).transpose()?;
    let ctx = RunContext { cli, tol, scenario };
    let out = &cli.common.out;
    match &cli.command {
        Command::CriticalPoints => critical_points(&ctx, out),
        Command::Flow(a) => flow(&ctx, out, a),
        Command::Moduli(a) => moduli(&ctx, out, a),
        Command::Complex => complex(&ctx, out),
        Command::Homology(a) => homology_cmd(&ctx, out, a),
        Command::Inclination(a) => inclination(&ctx, out, a),
        Command::NormalForm(a) => normal_form(&ctx, out, a),
        Command::HomotopyCheck(a) => homotopy_check(&ctx, out, a),
        Command::Report(a) => report(&ctx, out, a),
    }
}

fn points_of(ctx: &RunContext) -> Result<Vec<CriticalPoint>> {
    Ok(find_critical_points_with(ctx.scenario()?, &ctx.tol.critical)?)
}

fn find_point(points: &[CriticalPoint], id: usize) -> Result<&CriticalPoint> {
    points
        .iter()
        .find(|p| p.id == id)
        .ok_or_else(|| MorseError::Validation(format!("no critical point with id {id}")).into())
}

fn critical_points(ctx: &RunContext, out: &Path) -> Result<PathBuf> {
    let points = points_of(ctx)?;
    let mut dir = RunDir::create(out, "critical-points")?;
    write_critical_points(&mut dir, &points)?;
    ctx.finish(dir)
}

fn write_critical_points(dir: &mut RunDir, points: &[CriticalPoint]) -> Result<()> {
    dir.json("critical_points.json", points)
}

fn flow(ctx: &RunContext, out: &Path, a: &FlowArgs) -> Result<PathBuf> {
    let scenario = ctx.scenario()?;
    let n = scenario.dimension();
    if a.start.len() != n {
        return Err(MorseError::Validation(format!("--start needs {n} coordinates")).into());
    }
    let points = points_of(ctx)?;
    let field = resolve_field(scenario, &points)?;
    let potential = field.potential(scenario);
    let sys = FlowSystem::new(scenario.space(), &field, potential);
    let t_max = a.t_max.unwrap_or(ctx.tol.flow.t_max);
    let mut stop = Stop::time(t_max);
    stop.level = a.stop_level;
    if let Some(ball) = &a.stop_ball {
        if ball.len() != n + 1 {
            return Err(MorseError::Validation(format!("--stop-ball needs {n} center coordinates and a radius")).into());
        }
        stop.ball = Some((ball[..n].to_vec(), ball[n]));
    }
    let traj = integrate(&sys, &a.start, &stop, &ctx.tol.flow)?;
    let mut dir = RunDir::create(out, "flow")?;
    dir.csv(
        "flow.csv",
        &coordinate_header(&["t"], n, &["f"]),
        traj.samples.iter().map(|s| polyline_row(&[], s.t, &s.x, potential)),
    )?;
    let end = traj.end();
    dir.json(
        "terminal.json",
        &json!({
            "terminal": traj.terminal,
            "t": end.t,
            "x": end.x,
            "x_wrapped": scenario.space().wrap(&end.x),
            "f": potential.value(&end.x),
            "steps": traj.samples.len() - 1,
        }),
    )?;
    ctx.finish(dir)
}

fn polyline_row(prefix: &[String], t: f64, x: &[f64], potential: &dyn Potential) -> Vec<String> {
    prefix
        .iter()
        .cloned()
        .chain(std::iter::once(num(t)))
        .chain(nums(x))
        .chain(std::iter::once(num(potential.value(x))))
        .collect()
}

fn moduli(ctx: &RunContext, out: &Path, a: &ModuliArgs) -> Result<PathBuf> {
    let mut tol = ctx.tol.clone();
    if let Some(c) = a.sphere_count {
        tol.shooting.sphere_count = c;
    }
    if let Some(e) = a.epsilon {
        tol.shooting.epsilon = e;
    }
    let analysis = analyze(ctx.scenario()?, &tol)?;
    for id in [a.source, a.target].into_iter().flatten() {
        find_point(&analysis.critical_points, id)?;
    }
    let mut dir = RunDir::create(out, "moduli")?;
    write_moduli(ctx.scenario()?, &mut dir, &analysis, &tol, a.source, a.target)?;
    let path = ctx.finish(dir)?;
    stratification_check(&analysis.moduli)?;
    Ok(path)
}

fn stratification_check(m: &ModuliSet) -> Result<()> {
    let failures: Vec<&String> = m.warnings.iter().filter(|w| w.contains("stratification failure")).collect();
    if failures.is_empty() {
        Ok(())
    } else {
        Err(MorseError::Stratification(failures.iter().map(|s| s.as_str()).collect::<Vec<_>>().join("; ")).into())
    }
}

fn write_moduli(
    scenario: &Scenario,
    dir: &mut RunDir,
    analysis: &Analysis,
    tol: &Tolerances,
    source: Option<usize>,
    target: Option<usize>,
) -> Result<()> {
    let keep = |p: usize, q: usize| source.is_none_or(|s| s == p) && target.is_none_or(|t| t == q);
    let m = &analysis.moduli;
    let points = &analysis.critical_points;
    let zero: Vec<_> = m.zero_dim.iter().filter(|z| keep(z.source, z.target)).collect();
    let one: Vec<_> = m.one_dim.iter().filter(|o| keep(o.source, o.target)).collect();
    let compact: Vec<_> = analysis.compactified.iter().filter(|c| keep(c.source, c.target)).collect();
    for w in &m.warnings {
        eprintln!("warning: {w}");
    }
    dir.json(
        "moduli.json",
        &json!({
            "critical_points": points,
            "levels": m.levels,
            "zero_dim": zero,
            "one_dim": one,
            "compactified": compact,
            "critical_sequences": critical_sequences(analysis, &keep),
            "flow_relation_acyclic": m.relation.is_acyclic(),
            "warnings": m.warnings,
        }),
    )?;

    let field = resolve_field(scenario, points)?;
    let potential = field.potential(scenario);
    let sys = FlowSystem::new(scenario.space(), &field, potential);
    let n = scenario.dimension();
    let flow_cfg = &tol.shooting.flow;
    let trace = |from: &[f64], p: &CriticalPoint, q: &CriticalPoint| -> Result<Vec<(f64, Vec<f64>)>> {
        let stop_level = q.value + 1e-3 * (p.value - q.value);
        let traj = integrate(&sys, from, &Stop::level(stop_level, flow_cfg.t_max), flow_cfg)?;
        Ok(traj.samples.into_iter().map(|s| (s.t, s.x)).collect())
    };

    let mut rows = Vec::new();
    let mut anchor_rows = Vec::new();
    for z in &zero {
        let (p, q) = (find_point(points, z.source)?, find_point(points, z.target)?);
        for c in &z.connections {
            let prefix = vec![z.source.to_string(), z.target.to_string(), c.ordinal.to_string()];
            for (t, x) in trace(&c.seed, p, q)? {
                rows.push(polyline_row(&prefix, t, &x, potential));
            }
            for an in &c.anchors {
                let mut row = vec!["connection".to_string()];
                row.extend(prefix.iter().cloned());
                row.push(num(an.level));
                row.extend(nums(&an.point));
                anchor_rows.push(row);
            }
        }
    }
    dir.csv("connections.csv", &coordinate_header(&["source", "target", "ordinal", "t"], n, &["f"]), rows)?;

    let mut rows = Vec::new();
    for o in &one {
        let (p, q) = (find_point(points, o.source)?, find_point(points, o.target)?);
        for (k, arc) in o.arcs.iter().enumerate() {
            let prefix = vec![o.source.to_string(), o.target.to_string(), k.to_string()];
            let mid = shooting_point(p, tol.shooting.epsilon, 0.5 * (arc.start + arc.end))?;
            for (t, x) in trace(&mid.seed, p, q)? {
                rows.push(polyline_row(&prefix, t, &x, potential));
            }
            for an in &arc.anchors {
                let mut row = vec!["arc".to_string()];
                row.extend(prefix.iter().cloned());
                row.push(num(an.level));
                row.extend(nums(&an.point));
                anchor_rows.push(row);
            }
        }
    }
    dir.csv("arcs.csv", &coordinate_header(&["source", "target", "arc", "t"], n, &["f"]), rows)?;
    dir.csv(
        "anchors.csv",
        &coordinate_header(&["kind", "source", "target", "ordinal", "level"], n, &[]),
        anchor_rows,
    )
}

fn critical_sequences(analysis: &Analysis, keep: &dyn Fn(usize, usize) -> bool) -> Vec<Value> {
    let points = &analysis.critical_points;
    let mut out = Vec::new();
    for p in points {
        for q in points.iter().filter(|q| q.value < p.value && keep(p.id, q.id)) {
            for seq in analysis.moduli.relation.critical_sequences(points, p.id, q.id) {
                out.push(json!({"source": p.id, "target": q.id, "sequence": seq}));
            }
        }
    }
    out
}

#[derive(Serialize)]
struct ComplexOutput<'a> {
    generators: &'a [Vec<usize>],
    boundaries: &'a [morseflow::complex::IntMatrix],
    smith_diagonals: Vec<Vec<i64>>,
    euler_characteristic: i64,
}

fn complex_table(c: &MorseChainComplex, h: &HomologyResult) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:>6} {:>10} {:>10} {:>6} {:>10}", "degree", "generators", "rank d_k", "betti", "torsion");
    for k in 0..=c.top_degree() {
        let torsion = h.torsion[k].iter().map(|t| format!("Z/{t}")).collect::<Vec<_>>().join(" ");
        let _ = writeln!(
            s,
            "{:>6} {:>10} {:>10} {:>6} {:>10}",
            k,
            c.rank(k),
            h.boundary_ranks[k],
            h.betti[k],
            if torsion.is_empty() { "-".to_string() } else { torsion }
        );
    }
    s
}

fn complex(ctx: &RunContext, out: &Path) -> Result<PathBuf> {
    let analysis = analyze(ctx.scenario()?, &ctx.tol)?;
    let c = &analysis.complex;
    let mut dir = RunDir::create(out, "complex")?;
    dir.json(
        "complex.json",
        &ComplexOutput {
            generators: &c.generators,
            boundaries: &c.boundaries,
            smith_diagonals: analysis.homology.smith.iter().map(|s| s.diagonal.clone()).collect(),
            euler_characteristic: c.euler_characteristic(),
        },
    )?;
    let table = complex_table(c, &analysis.homology);
    eprint!("{table}");
    dir.text("complex.txt", &table)?;
    ctx.finish(dir)
}

fn homology_cmd(ctx: &RunContext, out: &Path, a: &HomologyArgs) -> Result<PathBuf> {
    let analysis = analyze(ctx.scenario()?, &ctx.tol)?;
    let mut dir = RunDir::create(out, "homology")?;
    write_homology(&mut dir, &analysis, a, ctx.tol.regular_gap)?;
    ctx.finish(dir)
}

fn write_homology(dir: &mut RunDir, analysis: &Analysis, a: &HomologyArgs, regular_gap: f64) -> Result<()> {
    let coefficients = if a.mod2 { Coefficients::Mod2 } else { Coefficients::Integer };
    let h = if a.mod2 { &analysis.homology_mod2 } else { &analysis.homology };
    let counts = analysis.moduli.signed_counts();
    let filtered = filtered_complexes(&analysis.critical_points, &counts, &a.levels, regular_gap, coefficients)?;
    let filtered_json: Vec<Value> = filtered
        .iter()
        .map(|(level, fh)| {
            let sub = build_complex(&analysis.critical_points, &counts, Some(*level)).expect("checked by filtered_complexes");
            json!({
                "level": level,
                "generators": sub.generators,
                "betti": fh.betti,
                "torsion": fh.torsion,
            })
        })
        .collect();
    dir.json(
        "homology.json",
        &json!({
            "coefficients": h.coefficients,
            "betti": h.betti,
            "torsion": h.torsion,
            "boundary_ranks": h.boundary_ranks,
            "euler_characteristic": analysis.complex.euler_characteristic(),
            "filtered": filtered_json,
        }),
    )?;
    let mut table = complex_table(&analysis.complex, h);
    for (level, fh) in &filtered {
        let _ = writeln!(table, "sublevel {level}: betti {:?}", fh.betti);
    }
    eprint!("{table}");
    dir.text("homology.txt", &table)
}

fn inclination(ctx: &RunContext, out: &Path, a: &InclinationArgs) -> Result<PathBuf> {
    let mut cfg = ctx.tol.inclination.clone();
    if let Some(r) = &a.r_list {
        cfg.radii = r.clone();
    }
    if let Some(g) = a.grid {
        cfg.grid = g;
    }
    let m = |v: f64| DMatrix::from_element(1, 1, v);
    let sweep = inclination_sweep(&m(a.alpha0), &m(a.alpha1), &m(a.beta), &cfg)?;
    let mut dir = RunDir::create(out, "inclination")?;
    dir.json("inclination.json", &sweep)?;
    for report in &sweep.reports {
        let width = report.series.first().and_then(|s| s.first()).map_or(0, |s| s.inclinations.len());
        let n = report.series.first().and_then(|s| s.first()).map_or(0, |s| s.x.len());
        let mut header = coordinate_header(&["start", "t"], n, &[]);
        header.extend((0..width).map(|j| format!("inclination{j}")));
        let rows = report.series.iter().enumerate().flat_map(|(i, series)| {
            series.iter().map(move |s| {
                std::iter::once(i.to_string())
                    .chain(std::iter::once(num(s.t)))
                    .chain(nums(&s.x))
                    .chain(nums(&s.inclinations))
                    .collect()
            })
        });
        dir.csv(&format!("series_r{}.csv", report.r), &header, rows)?;
    }
    ctx.finish(dir)
}

fn normal_form(ctx: &RunContext, out: &Path, a: &NormalFormArgs) -> Result<PathBuf> {
    let scenario = ctx.scenario()?;
    let points = points_of(ctx)?;
    let eps = a.epsilon.unwrap_or(ctx.tol.normal_form.epsilon);
    let per_axis = a.per_axis.unwrap_or(ctx.tol.normal_form.per_axis);
    let selected: Vec<&CriticalPoint> = match a.point {
        Some(id) => vec![find_point(&points, id)?],
        None => points.iter().collect(),
    };
    let mut records = Vec::new();
    for p in selected {
        let check = QuadraticNormalization::new(scenario, p, eps)?.verify(per_axis)?;
        records.push(json!({
            "point": p.id,
            "index": p.index,
            "location": p.location,
            "epsilon": check.epsilon,
            "probes": check.probes,
            "max_residual": check.max_residual,
            "max_c_deviation": check.max_c_deviation,
        }));
    }
    let mut dir = RunDir::create(out, "normal-form")?;
    dir.json("normal_form.json", &records)?;
    ctx.finish(dir)
}

fn homotopy_check(ctx: &RunContext, out: &Path, a: &HomotopyArgs) -> Result<PathBuf> {
    let scenario = ctx.scenario()?;
    let points = points_of(ctx)?;
    let point = match a.point {
        Some(id) => find_point(&points, id)?,
        None => points
            .iter()
            .find(|p| p.index == 1)
            .ok_or_else(|| MorseError::Validation("scenario has no index-one critical point".into()))?,
    };
    let radius = a.radius.unwrap_or(ctx.tol.homotopy.radius);
    let grid = a.s_grid.clone().unwrap_or_else(|| ctx.tol.homotopy.s_grid.clone());
    let h = FieldHomotopy::new(scenario, point, radius)?;
    let report = compare_under_homotopy(
        scenario,
        &points,
        &h,
        &grid,
        &[],
        &ctx.tol.shooting,
        ctx.tol.homotopy.margin_floor,
    )?;
    let mut dir = RunDir::create(out, "homotopy-check")?;
    dir.json("homotopy.json", &report)?;
    let rows = report.samples.iter().flat_map(|s| {
        s.counts.iter().map(move |c| {
            vec![
                num(s.s),
                c.source.to_string(),
                c.target.to_string(),
                c.unsigned.to_string(),
                c.signed.to_string(),
                num(s.min_margin),
            ]
        })
    });
    let header: Vec<String> = ["s", "source", "target", "unsigned", "signed", "min_margin"].map(String::from).to_vec();
    dir.csv("homotopy.csv", &header, rows)?;
    for s in &report.degraded {
        eprintln!("warning: transversality margin below {} at s = {s}", ctx.tol.homotopy.margin_floor);
    }
    let path = ctx.finish(dir)?;
    if !report.samples.iter().all(|s| s.square_zero) {
        return Err(MorseError::SignConsistency("boundary does not square to zero along the homotopy".into()).into());
    }
    if !report.is_invariant() {
        return Err(MorseError::TransversalitySuspect("signed counts or homology change along the homotopy".into()).into());
    }
    Ok(path)
}

const REPORT_SOURCES: [(&str, &str); 7] = [
    ("critical-points", "critical_points.json"),
    ("moduli", "moduli.json"),
    ("complex", "complex.json"),
    ("homology", "homology.json"),
    ("homotopy-check", "homotopy.json"),
    ("inclination", "inclination.json"),
    ("normal-form", "normal_form.json"),
];

const REPORT_CSV: [(&str, &str, &str); 5] = [
    ("moduli", "connections.csv", "moduli_connections.csv"),
    ("moduli", "arcs.csv", "moduli_arcs.csv"),
    ("moduli", "anchors.csv", "anchors.csv"),
    ("flow", "flow.csv", "flow.csv"),
    ("homotopy-check", "homotopy.csv", "homotopy.csv"),
];

fn read_json(path: &Path) -> Result<Value> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| MorseError::Parse(format!("{}: {e}", path.display())).into())
}

fn report(ctx: &RunContext, out: &Path, a: &ReportArgs) -> Result<PathBuf> {
    if ctx.scenario.is_some() {
        let analysis = analyze(ctx.scenario()?, &ctx.tol)?;
        let mut dir = RunDir::create(out, "critical-points")?;
        write_critical_points(&mut dir, &analysis.critical_points)?;
        ctx.finish(dir)?;
        let mut dir = RunDir::create(out, "moduli")?;
        write_moduli(ctx.scenario()?, &mut dir, &analysis, &ctx.tol, None, None)?;
        ctx.finish(dir)?;
        let mut dir = RunDir::create(out, "homology")?;
        let args = HomologyArgs {
            mod2: false,
            levels: Vec::new(),
        };
        write_homology(&mut dir, &analysis, &args, ctx.tol.regular_gap)?;
        ctx.finish(dir)?;
    }
    let input = a.input.as_deref().unwrap_or(out);
    if !input.is_dir() {
        return Err(MorseError::Validation(format!("{} is not a directory", input.display())).into());
    }
    let mut sources = serde_json::Map::new();
    for (sub, file) in REPORT_SOURCES {
        let path = input.join(sub).join(file);
        if path.is_file() {
            sources.insert(sub.to_string(), read_json(&path)?);
        }
    }
    if sources.is_empty() {
        return Err(MorseError::Validation(format!("no outputs to report in {}", input.display())).into());
    }
    let summary = summarize(&sources);
    let mut dir = RunDir::create(out, "report")?;
    let names: Vec<String> = REPORT_SOURCES
        .iter()
        .filter(|(sub, _)| sources.contains_key(*sub))
        .map(|(sub, file)| format!("{sub}/{file}"))
        .collect();
    dir.json(
        "report.json",
        &json!({
            "sources": names,
            "summary": summary,
            "outputs": Value::Object(sources),
        }),
    )?;
    for (sub, file, target) in REPORT_CSV {
        let path = input.join(sub).join(file);
        if path.is_file() {
            dir.copy(&path, target)?;
        }
    }
    if let Some(table) = summary.get("betti_table").and_then(Value::as_str) {
        dir.text("betti.txt", table)?;
    }
    ctx.finish(dir)
}

fn summarize(sources: &serde_json::Map<String, Value>) -> Value {
    let mut s = serde_json::Map::new();
    let points = sources
        .get("critical-points")
        .or_else(|| sources.get("moduli").and_then(|m| m.get("critical_points")));
    if let Some(Value::Array(points)) = points {
        let mut by_index: Vec<u64> = Vec::new();
        for p in points {
            let k = p.get("index").and_then(Value::as_u64).unwrap_or(0) as usize;
            if by_index.len() <= k {
                by_index.resize(k + 1, 0);
            }
            by_index[k] += 1;
        }
        s.insert("critical_points".into(), json!(points.len()));
        s.insert("critical_points_by_index".into(), json!(by_index));
    }
    if let Some(m) = sources.get("moduli") {
        let zero = m.get("zero_dim").and_then(Value::as_array).cloned().unwrap_or_default();
        let connections: usize = zero
            .iter()
            .map(|z| z.get("connections").and_then(Value::as_array).map_or(0, |c| c.len()))
            .sum();
        let signed: Vec<Value> = zero
            .iter()
            .map(|z| json!({"source": z["source"], "target": z["target"], "signed_count": z["signed_count"]}))
            .collect();
        let arcs: usize = m
            .get("one_dim")
            .and_then(Value::as_array)
            .map_or(0, |o| o.iter().map(|x| x.get("arcs").and_then(Value::as_array).map_or(0, |a| a.len())).sum());
        let broken: usize = m
            .get("compactified")
            .and_then(Value::as_array)
            .map_or(0, |o| o.iter().map(|x| x.get("broken").and_then(Value::as_array).map_or(0, |a| a.len())).sum());
        s.insert("connections".into(), json!(connections));
        s.insert("signed_counts".into(), json!(signed));
        s.insert("arcs".into(), json!(arcs));
        s.insert("broken_pairs".into(), json!(broken));
        s.insert("moduli_warnings".into(), m.get("warnings").cloned().unwrap_or(json!([])));
    }
    if let Some(h) = sources.get("homology") {
        let betti = h.get("betti").cloned().unwrap_or(Value::Null);
        let torsion = h.get("torsion").cloned().unwrap_or(Value::Null);
        let mut table = String::from("degree betti torsion\n");
        if let (Some(b), Some(t)) = (betti.as_array(), torsion.as_array()) {
            for (k, (bk, tk)) in b.iter().zip(t).enumerate() {
                let _ = writeln!(table, "{k} {bk} {tk}");
            }
        }
        s.insert("betti".into(), betti);
        s.insert("torsion".into(), torsion);
        s.insert("betti_table".into(), json!(table));
    }
    if let Some(h) = sources.get("homotopy-check") {
        let per_s: Vec<Value> = h
            .get("samples")
            .and_then(Value::as_array)
            .map(|v| {
                v.iter()
                    .map(|x| json!({"s": x["s"], "betti": x["betti"], "min_margin": x["min_margin"], "counts": x["counts"]}))
                    .collect()
            })
            .unwrap_or_default();
        s.insert(
            "invariance".into(),
            json!({
                "counts_invariant": h["counts_invariant"],
                "betti_invariant": h["betti_invariant"],
                "min_margin": h["min_margin"],
                "per_s": per_s,
            }),
        );
    }
    if let Some(inc) = sources.get("inclination") {
        let per_r: Vec<Value> = inc
            .get("reports")
            .and_then(Value::as_array)
            .map(|v| {
                v.iter()
                    .map(|x| {
                        json!({
                            "r": x["r"],
                            "max_time_in_region": x["max_time_in_region"],
                            "max_entries": x["max_entries"],
                            "bound_violations": x["bound_violations"],
                        })
                    })
                    .collect()
            })
            .unwrap_or_default();
        s.insert("inclination".into(), json!({"time_bound": inc["time_bound"], "per_r": per_r}));
    }
    Value::Object(s)
}

/// Exit code for a failed run: numerical failures are 2, everything else 1.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    match err.chain().find_map(|e| e.downcast_ref::<MorseError>()) {
        Some(e) if e.is_numerical() => 2,
        _ => 1,
    }
}
