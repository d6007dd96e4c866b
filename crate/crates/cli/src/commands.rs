//! The six pipeline commands. Each writes its files under `output.dir` and
//! finishes with `summary.json`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thermotopo::fem::{self, ScalarField, VelocityField};
use thermotopo::paramopt::{
    generate_fin_layout, optimize_layout, rasterize_layout, sweep_fin_count, FinOrientation,
    LayoutProblem, NelderMeadOptions, Setup,
};
use thermotopo::sparse::SolverOptions;
use thermotopo::teg;
use thermotopo::topopt::{DesignProblem, TopOpt, STATE_SOLVER};
use thermotopo::{DensityField, Mesh, RegionMap};

use crate::config::{Format, RunConfig};
use crate::error::CliError;
use crate::export::{export_csv, export_vtk, write_file, FieldRef};
use crate::heatmap::{render_heatmap, Palette};
use crate::Command;

/// Contents of `summary.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub iterations: usize,
    pub final_objective: Option<f64>,
    pub wall_time_s: f64,
    pub results: Value,
}

struct Outcome {
    iterations: usize,
    final_objective: Option<f64>,
    results: Value,
}

pub fn execute(cmd: &Command, cfg: &RunConfig, seed: u64) -> Result<Summary, CliError> {
    let start = Instant::now();
    let dir = &cfg.output.dir;
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let out = match cmd {
        Command::Solve(_) => solve(cfg)?,
        Command::Topopt(_) => topopt(cfg)?,
        Command::Sweep(_) => sweep(cfg)?,
        Command::Paramopt(_) => paramopt(cfg, seed)?,
        Command::Teg(_) => teg_eval(cfg)?,
        Command::Transient(_) => transient(cfg)?,
    };
    let summary = Summary {
        command: cmd.name().to_string(),
        config_hash: cfg.hash(),
        seed,
        iterations: out.iterations,
        final_objective: out.final_objective,
        wall_time_s: start.elapsed().as_secs_f64(),
        results: out.results,
    };
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    write_file(&dir.join("summary.json"), text + "\n")?;
    Ok(summary)
}

fn layout_solver() -> SolverOptions {
    SolverOptions::default()
}

/// Writes a field in every configured format under `dir/<stem>.*`.
fn export_field(
    cfg: &RunConfig,
    mesh: &Mesh,
    field: FieldRef<'_>,
    stem: &str,
    palette: Palette,
) -> Result<Vec<PathBuf>, CliError> {
    let dir = &cfg.output.dir;
    let mut files = Vec::new();
    for f in &cfg.output.formats {
        let path = match f {
            Format::Vtk => {
                let p = dir.join(format!("{stem}.vtk"));
                export_vtk(mesh, field, stem, &p)?;
                p
            }
            Format::Csv => {
                let p = dir.join(format!("{stem}.csv"));
                export_csv(mesh, field, &p)?;
                p
            }
            Format::Png => {
                let p = dir.join(format!("{stem}.png"));
                render_heatmap(mesh, field, &p, palette, 4)?;
                p
            }
        };
        files.push(path);
    }
    Ok(files)
}

fn file_names(files: &[PathBuf]) -> Vec<String> {
    files
        .iter()
        .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
        .collect()
}

fn setup(label: &str, key: &str) -> Result<Setup, CliError> {
    label.parse().map_err(|_| CliError::Validation {
        key: key.into(),
        message: format!("unknown setup `{label}`"),
    })
}

/// Design density for `solve` and `transient`: a named layout or a uniform
/// value, with fixed regions pinned.
fn fixed_design(
    cfg: &RunConfig,
    mesh: &Mesh,
    regions: &RegionMap,
    theta: f64,
    layout: Option<&str>,
) -> Result<DensityField, CliError> {
    let theta_min = cfg.topopt.theta_min;
    let base = match layout {
        Some(label) => {
            let s = setup(label, "solve.layout")?;
            let l = generate_fin_layout(
                &s.to_string(),
                &cfg.paramopt.overrides,
                mesh.lx(),
                mesh.ly(),
            )?;
            rasterize_layout(mesh, &l, theta_min, cfg.paramopt.raster)?
        }
        None => DensityField::uniform(mesh, theta.max(theta_min))?,
    };
    let v = base
        .values()
        .iter()
        .zip(regions.regions())
        .map(|(&x, r)| match r {
            thermotopo::Region::FixedSolid => 1.0,
            thermotopo::Region::FixedFluid => theta_min,
            thermotopo::Region::Design => x,
        })
        .collect();
    Ok(DensityField::new(mesh, v)?)
}

fn solve(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let mesh = cfg.mesh()?;
    let regions = cfg.regions(&mesh)?;
    let sv = &cfg.solve;
    let theta = fixed_design(cfg, &mesh, &regions, sv.theta, sv.layout.as_deref())?;
    let k = cfg.material.conductivities(theta.values())?;
    let c = cfg.material.heat_capacities(theta.values())?;
    let s = cfg.bc.sink_from_density(theta.values());
    let vel = VelocityField::uniform(&mesh, sv.velocity);
    let sys = fem::assemble_convection(&mesh, &regions, &k, &c, &s, &vel, &cfg.bc)?;
    let t = fem::solve_steady(&sys, STATE_SOLVER)?;
    let objective = thermotopo::topopt::objective_thermal(&mesh, &k, &t)?;
    let mut files = export_field(cfg, &mesh, (&theta).into(), "theta", Palette::Gray)?;
    files.extend(export_field(
        cfg,
        &mesh,
        (&t).into(),
        "temperature",
        Palette::Heat,
    )?);
    let mut results = json!({
        "t_min": t.min(),
        "t_max": t.max(),
        "t_mean": t.mean(&mesh),
        "solid_fraction": theta.mean(),
        "files": file_names(&files),
    });
    // With flow, heat also leaves by advection, which this budget omits.
    if vel.is_zero() {
        let b = fem::heat_balance(&mesh, &sys, &s, &cfg.bc, &t);
        results["wall_inflow"] = json!(b.wall_inflow);
        results["sink_extraction"] = json!(b.sink_extraction);
        results["source_input"] = json!(b.source_input);
    }
    Ok(Outcome {
        iterations: 1,
        final_objective: Some(objective),
        results,
    })
}

fn topopt(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let mesh = cfg.mesh()?;
    let regions = cfg.regions(&mesh)?;
    let t = &cfg.topopt;
    let spec = t.objective(&mesh);
    let opt = TopOpt {
        problem: DesignProblem {
            mesh: &mesh,
            regions: &regions,
            bc: &cfg.bc,
            mat: &cfg.material,
            spec: &spec,
            solver: STATE_SOLVER,
        },
        cfg: t.opt_config(),
        r_min: t.filter_radius(&mesh),
    };
    let r = opt.run()?;

    let mut hist = String::from("iteration,objective,volume,max_change\n");
    for i in 0..r.objective_history.len() {
        let _ = writeln!(
            hist,
            "{i},{},{},{}",
            r.objective_history[i], r.volume_history[i], r.change_history[i]
        );
    }
    let dir = &cfg.output.dir;
    write_file(&dir.join("objective_history.csv"), hist)?;
    let mut files = vec![dir.join("objective_history.csv")];
    files.extend(export_field(
        cfg,
        &mesh,
        (&r.theta_f).into(),
        "theta_final",
        Palette::Gray,
    )?);
    files.extend(export_field(
        cfg,
        &mesh,
        (&r.temperature).into(),
        "temperature_final",
        Palette::Heat,
    )?);

    let initial = r.initial_objective();
    Ok(Outcome {
        iterations: r.iterations,
        final_objective: Some(r.objective),
        results: json!({
            "initial_objective": initial,
            "ratio": r.objective / initial,
            "volume": r.theta_f.mean(),
            "converged": r.converged,
            "r_min": opt.r_min,
            "files": file_names(&files),
        }),
    })
}

fn layout_problem<'a>(
    cfg: &RunConfig,
    mesh: &'a Mesh,
    regions: &'a RegionMap,
    bc: &'a thermotopo::ThermalBC,
    mat: &'a thermotopo::MaterialPair,
) -> LayoutProblem<'a> {
    LayoutProblem {
        mesh,
        regions,
        bc,
        mat,
        theta_min: cfg.topopt.theta_min,
        raster: cfg.paramopt.raster,
        solver: layout_solver(),
    }
}

fn family_name(o: FinOrientation) -> &'static str {
    match o {
        FinOrientation::Single => "single",
        FinOrientation::Paired => "paired",
    }
}

fn sweep(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let mesh = cfg.mesh()?;
    let regions = cfg.regions(&mesh)?;
    let problem = layout_problem(cfg, &mesh, &regions, &cfg.bc, &cfg.material);
    let range = &cfg.paramopt.sweep;
    let mut csv = String::from("count,objective,family\n");
    let mut families = serde_json::Map::new();
    let mut evaluations = 0;
    let mut overall: Option<f64> = None;
    for o in [FinOrientation::Single, FinOrientation::Paired] {
        let r = sweep_fin_count(o, range, &problem)?;
        for (n, j) in &r.samples {
            let _ = writeln!(csv, "{n},{j},{}", family_name(o));
        }
        evaluations += r.samples.len();
        let (best_count, best) = r.best().expect("sweep has samples");
        overall = Some(overall.map_or(best, |b: f64| b.min(best)));
        let interior = best_count != range.start && best_count != range.end;
        families.insert(
            family_name(o).into(),
            json!({ "best_count": best_count, "best_objective": best, "interior_minimum": interior }),
        );
    }
    write_file(&cfg.output.dir.join("sweep.csv"), csv)?;
    Ok(Outcome {
        iterations: evaluations,
        final_objective: overall,
        results: json!({ "families": families, "files": ["sweep.csv"] }),
    })
}

fn paramopt(cfg: &RunConfig, seed: u64) -> Result<Outcome, CliError> {
    let mesh = cfg.mesh()?;
    let regions = cfg.regions(&mesh)?;
    let problem = layout_problem(cfg, &mesh, &regions, &cfg.bc, &cfg.material);
    let p = &cfg.paramopt;
    let s = setup(&p.setup, "paramopt.setup")?;
    let initial = generate_fin_layout(&s.to_string(), &p.overrides, mesh.lx(), mesh.ly())?;
    let dim = initial.thickness.len() + if initial.post.is_some() { 4 } else { 0 };
    let opts = NelderMeadOptions {
        budget: p.budget.unwrap_or(10 * dim),
        seed,
        ..Default::default()
    };
    let r = optimize_layout(&initial, &problem, opts)?;
    let dir = &cfg.output.dir;
    let layout_json = serde_json::to_string_pretty(&r.layout).expect("layout serializes");
    write_file(&dir.join("best_layout.json"), layout_json + "\n")?;
    let theta = rasterize_layout(&mesh, &r.layout, cfg.topopt.theta_min, p.raster)?;
    let mut files = vec![dir.join("best_layout.json")];
    files.extend(export_field(
        cfg,
        &mesh,
        (&theta).into(),
        "theta_best",
        Palette::Gray,
    )?);
    Ok(Outcome {
        iterations: r.evaluations,
        final_objective: Some(r.objective),
        results: json!({
            "setup": s.to_string(),
            "parameters": dim,
            "initial_objective": r.initial_objective,
            "ratio": r.objective / r.initial_objective,
            "converged": r.converged,
            "files": file_names(&files),
        }),
    })
}

/// Reads `t_cold` from a summary written by `transient`.
fn cold_side_from_summary(path: &Path) -> Result<f64, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let s: Summary = serde_json::from_str(&text).map_err(|e| CliError::Parse {
        line: e.line(),
        column: e.column(),
        message: format!("{}: {e}", path.display()),
    })?;
    s.results
        .get("t_cold")
        .and_then(Value::as_f64)
        .ok_or_else(|| CliError::Validation {
            key: "teg.summary".into(),
            message: format!("{} has no results.t_cold", path.display()),
        })
}

fn teg_eval(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let g = &cfg.teg;
    let t_cold = match &g.summary {
        Some(p) => cold_side_from_summary(p)?,
        None => g.t_cold,
    };
    if !(t_cold > 0.0 && g.t_hot > t_cold) {
        return Err(CliError::Validation {
            key: "teg.summary".into(),
            message: format!("cold side {t_cold} K must lie below teg.t_hot"),
        });
    }
    let t_mean = 0.5 * (g.t_hot + t_cold);
    let zt_te = teg::zt_thermoelement(&g.params, t_mean)?;
    let zt_dev = teg::zt_device(zt_te, &g.params)?;
    let zt = g.zt_avg.unwrap_or(zt_dev);
    let eta = teg::teg_efficiency(g.t_hot, t_cold, zt)?;
    let pulse = teg::pulse_mode_efficiency(eta, &g.params)?;
    Ok(Outcome {
        iterations: 0,
        final_objective: None,
        results: json!({
            "t_hot": g.t_hot,
            "t_cold": t_cold,
            "zt_thermoelement": zt_te,
            "zt_device": zt_dev,
            "zt_avg": zt,
            "carnot": (g.t_hot - t_cold) / g.t_hot,
            "eta": eta,
            "eta_pulse": pulse,
        }),
    })
}

fn transient(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let mesh = cfg.mesh()?;
    let regions = cfg.regions(&mesh)?;
    let tr = &cfg.transient;
    let theta = fixed_design(cfg, &mesh, &regions, tr.theta, cfg.solve.layout.as_deref())?;
    let k = cfg.material.conductivities(theta.values())?;
    let c = cfg.material.heat_capacities(theta.values())?;
    let s = cfg.bc.sink_from_density(theta.values());
    let t0 = ScalarField::uniform(&mesh, tr.t0.unwrap_or(cfg.bc.t_amb));
    let run = fem::solve_transient(
        &mesh,
        &regions,
        &k,
        &c,
        &s,
        &cfg.bc,
        &t0,
        tr.dt,
        tr.t_end,
        STATE_SOLVER,
    )?;

    let mut hist = String::from("time,t_mean,t_min,t_max\n");
    for (time, t) in run.times.iter().zip(&run.snapshots) {
        let _ = writeln!(hist, "{time},{},{},{}", t.mean(&mesh), t.min(), t.max());
    }
    let dir = &cfg.output.dir;
    write_file(&dir.join("transient_history.csv"), hist)?;
    let last = run.last();
    let mut files = vec![dir.join("transient_history.csv")];
    files.extend(export_field(
        cfg,
        &mesh,
        last.into(),
        "temperature_final",
        Palette::Heat,
    )?);
    Ok(Outcome {
        iterations: run.times.len() - 1,
        final_objective: None,
        results: json!({
            "t_end": run.times.last(),
            "t_cold": last.mean(&mesh),
            "t_min": last.min(),
            "t_max": last.max(),
            "files": file_names(&files),
        }),
    })
}
