//! Command-line entry point: one simulation run or a delta_k sweep.
//!
//! Exit codes: 0 success, 1 configuration error, 2 runtime failure (tangled
//! mesh, solver breakdown), with the failing step reported on stderr.

use super::config::{parse_config, MeshSource, RunConfig};
use super::{csv, vtk};
use crate::diagnostics::DiagnosticsRecord;
use crate::mesh;
use crate::stepper::{self, FieldState, RunOptions, RunSink};
use std::path::{Path, PathBuf};

const USAGE: &str = "usage: bsfem --config PATH [--preset NAME] [--out DIR] [--tau X] \
[--tmax X] [--sweep delta_k=v1,v2,...] [--quiet]";

#[derive(Debug, Default)]
struct CliArgs {
    config: Option<PathBuf>,
    preset: Option<String>,
    out: Option<PathBuf>,
    tau: Option<f64>,
    tmax: Option<f64>,
    sweep: Option<Vec<f64>>,
    quiet: bool,
}

fn parse_args(argv: &[String]) -> Result<CliArgs, String> {
    let mut args = CliArgs::default();
    let mut it = argv.iter();
    while let Some(flag) = it.next() {
        let mut value = |name: &str| -> Result<String, String> {
            it.next()
                .cloned()
                .ok_or_else(|| format!("{name} needs a value"))
        };
        match flag.as_str() {
            "--config" => args.config = Some(PathBuf::from(value("--config")?)),
            "--preset" => args.preset = Some(value("--preset")?),
            "--out" => args.out = Some(PathBuf::from(value("--out")?)),
            "--tau" => {
                args.tau = Some(
                    value("--tau")?
                        .parse()
                        .map_err(|_| "--tau needs a number".to_string())?,
                )
            }
            "--tmax" => {
                args.tmax = Some(
                    value("--tmax")?
                        .parse()
                        .map_err(|_| "--tmax needs a number".to_string())?,
                )
            }
            "--sweep" => {
                let spec = value("--sweep")?;
                let rest = spec
                    .strip_prefix("delta_k=")
                    .ok_or("--sweep expects delta_k=v1,v2,...".to_string())?;
                let vals: Vec<f64> = rest
                    .split(',')
                    .map(|tok| {
                        tok.trim()
                            .parse::<f64>()
                            .map_err(|_| format!("bad sweep value {tok:?}"))
                    })
                    .collect::<Result<_, _>>()?;
                if vals.is_empty() {
                    return Err("--sweep needs at least one value".into());
                }
                args.sweep = Some(vals);
            }
            "--quiet" => args.quiet = true,
            other => return Err(format!("unknown flag {other:?}")),
        }
    }
    if args.config.is_none() {
        return Err("--config is required".into());
    }
    Ok(args)
}

/// Streams VTK snapshot pairs into the output directory.
struct OutputSink {
    dir: PathBuf,
    write_vtk: bool,
    quiet: bool,
}

impl RunSink for OutputSink {
    fn on_snapshot(
        &mut self,
        step: usize,
        _time: f64,
        mesh: &mesh::SimplicialMesh,
        view: &mesh::SurfaceView,
        state: &FieldState,
    ) {
        if !self.write_vtk {
            return;
        }
        let bulk = self.dir.join(format!("bulk_{step:06}.vtk"));
        let surf = self.dir.join(format!("surface_{step:06}.vtk"));
        if let Err(e) = vtk::write_vtk(&bulk, mesh, &[("u", &state.u)]) {
            eprintln!("error: writing {bulk:?}: {e}");
        }
        let fields: [(&str, &[f64]); 2] = [("w", &state.w), ("z", &state.z)];
        if let Err(e) = vtk::write_surface_vtk(&surf, view, &fields) {
            eprintln!("error: writing {surf:?}: {e}");
        }
    }

    fn on_warning(&mut self, step: usize, message: &str) {
        if !self.quiet {
            eprintln!("note (step {step}): {message}");
        }
    }
}

fn build_mesh(cfg: &RunConfig) -> Result<mesh::SimplicialMesh, String> {
    match &cfg.mesh {
        MeshSource::Resolution(res) => {
            mesh::build_initial_mesh(&cfg.geometry, cfg.outer_radius, *res)
                .map_err(|e| e.to_string())
        }
        MeshSource::File(path) => mesh::read_mesh_file(path).map_err(|e| e.to_string()),
    }
}

fn single_run(cfg: &RunConfig, dir: &Path, quiet: bool) -> Result<Vec<DiagnosticsRecord>, (i32, String)> {
    std::fs::create_dir_all(dir).map_err(|e| (1, format!("cannot create {dir:?}: {e}")))?;
    let mesh0 = build_mesh(cfg).map_err(|m| (1, m))?;
    let opts = RunOptions {
        windshield_sign: cfg.windshield_sign,
        fb_threshold: cfg.fb_threshold,
        diag_every: cfg.diag_every,
        snapshot_every: cfg.output_every,
        solver: Default::default(),
        quiet,
    };
    let mut sink = OutputSink {
        dir: dir.to_path_buf(),
        write_vtk: cfg.write_vtk,
        quiet,
    };
    let initial = cfg.initial;
    let out = stepper::run_simulation(
        &cfg.params,
        &cfg.geometry,
        mesh0,
        &|p| initial.u0(p),
        &|p| initial.w0(p),
        &|p| initial.z0(p),
        &opts,
        &mut sink,
    )
    .map_err(|e| (2, e.to_string()))?;
    if cfg.write_csv {
        let path = dir.join("diagnostics.csv");
        csv::write_diag_csv(&path, &out.records)
            .map_err(|e| (2, format!("cannot write {path:?}: {e}")))?;
    }
    if !quiet {
        let last = out.records.last();
        println!(
            "done: {} steps, final time {:.6}, warnings {}{}",
            out.steps_taken,
            out.final_state.time,
            out.warnings,
            last.map(|r| format!(", mass_wz {:.6e}", r.mass_wz)).unwrap_or_default()
        );
    }
    Ok(out.records)
}

pub fn run(argv: &[String]) -> i32 {
    let args = match parse_args(argv) {
        Ok(a) => a,
        Err(msg) => {
            eprintln!("error: {msg}");
            eprintln!("{USAGE}");
            return 1;
        }
    };
    let config_path = args.config.expect("checked in parse_args");
    let text = match std::fs::read_to_string(&config_path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read config {config_path:?}: {e}");
            return 1;
        }
    };
    let effective = match &args.preset {
        // a CLI preset replaces the parameters section outright
        Some(name) => {
            let mut filtered = String::new();
            let mut in_params = false;
            for line in text.lines() {
                let trimmed = line.trim();
                if trimmed.starts_with('[') {
                    in_params = trimmed == "[parameters]";
                }
                if !in_params {
                    filtered.push_str(line);
                    filtered.push('\n');
                }
            }
            format!("{filtered}\n[parameters]\npreset = {name}\n")
        }
        None => text,
    };
    let mut cfg = match parse_config(&effective) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    if let Some(tau) = args.tau {
        cfg.params.tau = tau;
    }
    if let Some(tmax) = args.tmax {
        cfg.params.t_end = tmax;
    }
    if let Some(out) = args.out {
        cfg.out_dir = out;
    }
    if let Err(e) = cfg.params.validate() {
        eprintln!("error: {e}");
        return 1;
    }

    match args.sweep {
        None => match single_run(&cfg, &cfg.out_dir.clone(), args.quiet) {
            Ok(_) => 0,
            Err((code, msg)) => {
                eprintln!("error: {msg}");
                code
            }
        },
        Some(values) => {
            for v in values {
                let mut run_cfg = cfg.clone();
                run_cfg.params.delta_k = v;
                let dir = cfg.out_dir.join(format!("delta_k_{v}"));
                if !args.quiet {
                    println!("sweep: delta_k = {v} -> {dir:?}");
                }
                if let Err((code, msg)) = single_run(&run_cfg, &dir, args.quiet) {
                    eprintln!("error: sweep delta_k = {v}: {msg}");
                    return code;
                }
            }
            0
        }
    }
}

pub fn run_main() -> i32 {
    let argv: Vec<String> = std::env::args().skip(1).collect();
    run(&argv)
}
