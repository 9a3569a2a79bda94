//! Command-line front end: simulate, verify, sensitivity, viewfactors.

use clap::{Parser, Subcommand, ValueEnum};
use std::path::{Path, PathBuf};
use std::time::Instant;
use urbantherm::engine::{self, Engine, SimulationConfig};
use urbantherm::error::{Error, Result};
use urbantherm::geometry::{EnclosureKind, ViewFactorMatrix};
use urbantherm::io::{self, load_scene, load_weather, write_results, RunMetadata};
use urbantherm::kelvin_to_celsius;
use urbantherm::verify::{
    convergence, local_sensitivity, oracle, theoretical, SensitivityParam, SensitivitySpec,
};

#[derive(Parser)]
#[command(
    name = "urbantherm",
    about = "District-scale thermo-radiative simulation: coupled conduction, radiosity and zone air"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scene against a weather file and write the result tables.
    Simulate {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        weather: PathBuf,
        /// TOML run configuration; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Reuse/fill a view factor cache produced by `viewfactors`.
        #[arg(long)]
        viewfactors: Option<PathBuf>,
    },
    /// Run the built-in verification case against the fine reference and
    /// emit error and convergence-order tables.
    Verify {
        #[arg(long, value_enum, default_value_t = VerifyCase::Theoretical)]
        case: VerifyCase,
        #[arg(long)]
        out: PathBuf,
        /// Model time step [s] for the error table.
        #[arg(long, default_value_t = 900.0)]
        dt: f64,
        /// Model node count for the error table.
        #[arg(long, default_value_t = 101)]
        nodes: usize,
        /// Skip the convergence-order sweeps (error table only).
        #[arg(long)]
        skip_orders: bool,
    },
    /// Local sensitivity analysis: run a parameter bracket and write the
    /// band table.
    Sensitivity {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        weather: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum)]
        param: SensitivityParam,
        /// Bracket endpoints `a,b` (scene units: albedo fraction or
        /// thickness in meters); the scene's current value is the
        /// reference.
        #[arg(long)]
        bounds: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Precompute the view factor matrices of a scene into cache files.
    Viewfactors {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum VerifyCase {
    Theoretical,
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}

fn load_config(path: Option<&Path>) -> Result<SimulationConfig> {
    let Some(path) = path else {
        return Ok(SimulationConfig::default());
    };
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let cfg: SimulationConfig = toml::from_str(&text)
        .map_err(|e| Error::InvalidArgument(format!("config {}: {e}", path.display())))?;
    cfg.validate()?;
    Ok(cfg)
}

fn sha256_file(path: &Path) -> Result<[u8; 32]> {
    use sha2::Digest;
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(sha2::Sha256::digest(&bytes).into())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate {
            scene,
            weather,
            config,
            out,
            viewfactors,
        } => {
            let cfg = load_config(config.as_deref())?;
            let (_, model) = load_scene(&scene)?;
            let series = load_weather(&weather, cfg.dt_s, cfg.horizon_s)?;
            let started = Instant::now();
            let engine =
                Engine::with_viewfactor_cache(&model, &series, cfg.clone(), viewfactors.as_deref())?;
            let rs = engine.run()?;
            let meta = RunMetadata::new(
                &model.name,
                &model.content_hash(),
                &sha256_file(&weather)?,
                &cfg,
                &rs,
            );
            write_results(&rs, &out, Some(&meta))?;
            println!(
                "simulated {} steps of {} in {:.2} s; max outer iterations {}, \
                 max boundary audit {:.2e} W/m^2",
                rs.convergence.steps.len(),
                model.name,
                started.elapsed().as_secs_f64(),
                rs.convergence.max_outer_iters(),
                rs.convergence.max_bc_audit(),
            );
            println!("results in {}", out.display());
            Ok(())
        }

        Command::Verify {
            case: VerifyCase::Theoretical,
            out,
            dt,
            nodes,
            skip_orders,
        } => {
            std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
            let case = theoretical::TheoreticalCase::default();
            println!("reference: dt = 1 s, 1001 nodes, Richardson self-check at 0.02 K");
            let reference =
                oracle::reference_solution(&case, oracle::OracleSpec::default(), Some(0.02))?;
            println!("model: dt = {dt} s, {nodes} nodes, 3 days");
            let rs = case.run_model(dt, nodes)?;
            let errs = theoretical::verification_errors(&rs, &reference)?;
            write_error_tables(&out, &case, &rs, &errs)?;

            let mut pass = true;
            let mut check = |label: &str, value: f64, ok: bool, target: &str| {
                println!(
                    "{}: {label} = {value:.4} (target {target})",
                    if ok { "PASS" } else { "FAIL" }
                );
                pass &= ok;
            };
            check(
                "eps_inf(wall)",
                errs.report.eps_inf,
                errs.report.eps_inf <= 0.40,
                "<= 0.40 K",
            );
            check("air RMSE", errs.air_rmse, errs.air_rmse <= 0.25, "<= 0.25 K");

            if !skip_orders {
                println!("convergence sweeps (temporal, spatial, coarse-grid plateau)...");
                let tables = convergence::convergence_orders(&case, &reference)?;
                write_order_tables(&out, &tables)?;
                check(
                    "temporal order",
                    tables.temporal_slope,
                    (0.8..=1.2).contains(&tables.temporal_slope),
                    "1.0 +/- 0.2",
                );
                check(
                    "spatial order",
                    tables.spatial_slope,
                    (1.7..=2.3).contains(&tables.spatial_slope),
                    "2.0 +/- 0.3",
                );
                println!(
                    "plateau: coarse-grid error ratio at the two finest steps {:.2} (flat when near 1)",
                    tables.plateau_ratio()
                );
            }
            println!("tables in {}", out.display());
            if pass {
                Ok(())
            } else {
                Err(Error::InvalidArgument(
                    "verification targets missed; see the report above".into(),
                ))
            }
        }

        Command::Sensitivity {
            scene,
            weather,
            config,
            param,
            bounds,
            out,
        } => {
            let cfg = load_config(config.as_deref())?;
            let (doc, _) = load_scene(&scene)?;
            let series = load_weather(&weather, cfg.dt_s, cfg.horizon_s)?;
            let (a, b) = parse_bounds(&bounds)?;
            let reference = reference_value(&doc, param)?;
            let spec = SensitivitySpec {
                param,
                reference,
                upper: b,
                lower: a,
            };
            let band = local_sensitivity(&doc, Some(&scene), spec, &series, &cfg)?;
            std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
            let path = out.join("sensitivity.csv");
            band.write_csv(&path)?;
            println!(
                "sensitivity of {} outputs over {param:?} bracket [{a}, {b}] \
                 (reference {reference}); table in {}",
                band.outputs.len(),
                path.display()
            );
            Ok(())
        }

        Command::Viewfactors { scene, out } => {
            let (_, model) = load_scene(&scene)?;
            let hash = model.content_hash();
            let started = Instant::now();
            let mut written = Vec::new();
            if model.radiation.outside_longwave {
                let patches = renumbered(&model, &model.exterior_patches);
                let vf = ViewFactorMatrix::assemble(
                    &patches,
                    EnclosureKind::ExteriorWithSky,
                    &model.quadrature,
                )?;
                written.push(write_vf(&out.with_extension("exterior.vf"), &vf, &hash)?);
            }
            if model.radiation.inside_longwave {
                for z in &model.zones {
                    let patches = renumbered(&model, &z.interior_patches);
                    let vf = ViewFactorMatrix::assemble(
                        &patches,
                        EnclosureKind::ClosedInterior,
                        &model.quadrature,
                    )?;
                    written.push(write_vf(&out.with_extension(format!("{}.vf", z.name)), &vf, &hash)?);
                }
            }
            if written.is_empty() {
                println!("scene has no long-wave enclosures enabled; nothing to precompute");
            } else {
                println!(
                    "assembled {} matrices in {:.2} s:",
                    written.len(),
                    started.elapsed().as_secs_f64()
                );
                for p in &written {
                    println!("  {}", p.display());
                }
            }
            Ok(())
        }
    }
}

fn write_vf(path: &Path, vf: &ViewFactorMatrix, hash: &[u8; 32]) -> Result<PathBuf> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    vf.write_bin(&mut f, hash).map_err(|e| Error::io(path, e))?;
    Ok(path.to_path_buf())
}

fn renumbered(model: &engine::Model, ids: &[usize]) -> Vec<urbantherm::geometry::SurfacePatch> {
    ids.iter()
        .enumerate()
        .map(|(k, &id)| {
            let mut p = model.mesh.patches[id].clone();
            p.id = k;
            p
        })
        .collect()
}

fn parse_bounds(s: &str) -> Result<(f64, f64)> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err(Error::InvalidArgument(format!(
            "--bounds wants two comma-separated values, got {s:?}"
        )));
    }
    let a: f64 = parts[0]
        .trim()
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("bad bound {:?}", parts[0])))?;
    let b: f64 = parts[1]
        .trim()
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("bad bound {:?}", parts[1])))?;
    Ok((a, b))
}

/// The reference parameter value a scene carries: shared by all groups
/// the parameter applies to.
fn reference_value(doc: &io::SceneDoc, param: SensitivityParam) -> Result<f64> {
    let mut value = None;
    for g in &doc.groups {
        if g.kind != urbantherm::conduction::SlabKind::Wall {
            continue;
        }
        let v = match param {
            SensitivityParam::Albedo => g.albedo,
            SensitivityParam::WallThickness => {
                if g.layers.len() != 1 {
                    continue;
                }
                g.layers[0].thickness
            }
        };
        match value {
            None => value = Some(v),
            Some(prev) if (prev - v).abs() > 1e-12 => {
                return Err(Error::InvalidArgument(format!(
                    "wall groups disagree on the reference value ({prev} vs {v}); \
                     the bracket would be ambiguous"
                )));
            }
            _ => {}
        }
    }
    value.ok_or_else(|| {
        Error::InvalidArgument("no wall-kind group to take the reference value from".into())
    })
}

fn write_error_tables(
    out: &Path,
    case: &theoretical::TheoreticalCase,
    rs: &engine::ResultSet,
    errs: &theoretical::VerificationErrors,
) -> Result<()> {
    let csv_err = |path: &Path, e: csv::Error| Error::ResultsFormat {
        path: path.to_path_buf(),
        message: e.to_string(),
    };

    let path = out.join("errors_eps2_x.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| csv_err(&path, e))?;
    w.write_record(["node", "x_m", "eps2_x_k"])
        .map_err(|e| csv_err(&path, e))?;
    let n = errs.report.eps2_x.len();
    for (i, e2) in errs.report.eps2_x.iter().enumerate() {
        let x = case.wall_thickness * i as f64 / (n - 1) as f64;
        w.write_record([format!("{i}"), format!("{x}"), format!("{e2}")])
            .map_err(|e| csv_err(&path, e))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let path = out.join("errors_eps2_t.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| csv_err(&path, e))?;
    w.write_record(["time_s", "eps2_t_k"])
        .map_err(|e| csv_err(&path, e))?;
    for (k, e2) in errs.report.eps2_t.iter().enumerate() {
        w.write_record([format!("{}", rs.times[k + 1]), format!("{e2}")])
            .map_err(|e| csv_err(&path, e))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let path = out.join("summary.txt");
    let t_max = rs.t_front.iter().flatten().cloned().fold(0.0, f64::max);
    let t_min = rs
        .t_front
        .iter()
        .flatten()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let text = format!(
        "eps_inf(wall field): {:.6} K\nair temperature RMSE: {:.6} K\nmax eps2(t): {:.6} K\n\
         outer wall surface temperature range: {:.2} .. {:.2} C\n",
        errs.report.eps_inf,
        errs.air_rmse,
        errs.max_eps2_t,
        kelvin_to_celsius(t_min),
        kelvin_to_celsius(t_max),
    );
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(())
}

fn write_order_tables(out: &Path, tables: &convergence::ConvergenceTables) -> Result<()> {
    let path = out.join("convergence_orders.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| Error::ResultsFormat {
        path: path.clone(),
        message: e.to_string(),
    })?;
    let err = |e: csv::Error| Error::ResultsFormat {
        path: path.clone(),
        message: e.to_string(),
    };
    w.write_record(["sweep", "resolution", "eps_inf_wall_k", "air_rmse_k"])
        .map_err(err)?;
    for (name, pts) in [
        ("temporal_dt_s", &tables.temporal),
        ("spatial_dx_m", &tables.spatial),
        ("plateau_dt_s", &tables.plateau),
    ] {
        for p in pts {
            w.write_record([
                name.to_string(),
                format!("{}", p.resolution),
                format!("{}", p.eps_inf_wall),
                format!("{}", p.air_rmse),
            ])
            .map_err(err)?;
        }
    }
    w.write_record([
        "fitted_slopes".to_string(),
        String::new(),
        format!("{}", tables.temporal_slope),
        format!("{}", tables.spatial_slope),
    ])
    .map_err(err)?;
    w.flush().map_err(|e| Error::io(&path, e))?;
    Ok(())
}
