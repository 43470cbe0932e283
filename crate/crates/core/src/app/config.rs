//! Sectioned key = value run configuration.
//!
//! Sections: `[geometry]`, `[mesh]`, `[parameters]`, `[time]`,
//! `[diagnostics]`, `[output]`. Unknown sections or keys are errors, as is
//! combining a preset with explicit delta values.

use crate::diagnostics::{regime_preset, InitialData};
use crate::fem::OuterBc;
use crate::geometry::{LevelSetGeometry, VelocityMode};
use crate::mesh::WindshieldSign;
use crate::stepper::{GKind, ParameterSet};
use std::collections::HashMap;
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid configuration ({field}): {message}")]
    Validation { field: String, message: String },
    #[error("conflicting configuration: {0}")]
    Conflict(String),
}

#[derive(Debug, Clone)]
pub enum MeshSource {
    Resolution(usize),
    File(PathBuf),
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub geometry: LevelSetGeometry,
    pub outer_radius: f64,
    pub mesh: MeshSource,
    pub params: ParameterSet,
    pub initial: InitialData,
    pub fb_threshold: f64,
    pub windshield_sign: WindshieldSign,
    /// diagnostics row cadence in steps
    pub diag_every: usize,
    /// snapshot cadence in steps (0 = first/last only)
    pub output_every: usize,
    pub out_dir: PathBuf,
    pub write_csv: bool,
    pub write_vtk: bool,
}

struct RawEntry {
    line: usize,
    value: String,
    consumed: std::cell::Cell<bool>,
}

struct Sections {
    map: HashMap<String, HashMap<String, RawEntry>>,
}

impl Sections {
    fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut map: HashMap<String, HashMap<String, RawEntry>> = HashMap::new();
        let mut current: Option<String> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(stripped) = line.strip_prefix('[') {
                let name = stripped.strip_suffix(']').ok_or(ConfigError::Parse {
                    line: line_no,
                    message: "unterminated section header".into(),
                })?;
                let name = name.trim().to_string();
                map.entry(name.clone()).or_default();
                current = Some(name);
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(ConfigError::Parse {
                line: line_no,
                message: format!("expected `key = value`, got {line:?}"),
            })?;
            let section = current.clone().ok_or(ConfigError::Parse {
                line: line_no,
                message: "key before any [section] header".into(),
            })?;
            let key = key.trim().to_string();
            let entry = RawEntry {
                line: line_no,
                value: value.trim().to_string(),
                consumed: std::cell::Cell::new(false),
            };
            if map
                .get_mut(&section)
                .expect("section inserted above")
                .insert(key.clone(), entry)
                .is_some()
            {
                return Err(ConfigError::Parse {
                    line: line_no,
                    message: format!("duplicate key {key:?} in [{section}]"),
                });
            }
        }
        Ok(Self { map })
    }

    fn get(&self, section: &str, key: &str) -> Option<&RawEntry> {
        self.map.get(section).and_then(|s| {
            s.get(key).map(|e| {
                e.consumed.set(true);
                e
            })
        })
    }

    fn has(&self, section: &str, key: &str) -> bool {
        self.map
            .get(section)
            .map(|s| s.contains_key(key))
            .unwrap_or(false)
    }

    fn check_all_consumed(&self) -> Result<(), ConfigError> {
        const KNOWN: [&str; 6] = [
            "geometry",
            "mesh",
            "parameters",
            "time",
            "diagnostics",
            "output",
        ];
        for (section, entries) in &self.map {
            if !KNOWN.contains(&section.as_str()) {
                return Err(ConfigError::Validation {
                    field: format!("[{section}]"),
                    message: "unknown section".into(),
                });
            }
            for (key, entry) in entries {
                if !entry.consumed.get() {
                    return Err(ConfigError::Validation {
                        field: format!("{section}.{key}"),
                        message: format!("unknown key (line {})", entry.line),
                    });
                }
            }
        }
        Ok(())
    }
}

fn parse_f64(e: &RawEntry, field: &str) -> Result<f64, ConfigError> {
    e.value.parse::<f64>().map_err(|_| ConfigError::Parse {
        line: e.line,
        message: format!("{field}: expected a number, got {:?}", e.value),
    })
}

fn parse_usize(e: &RawEntry, field: &str) -> Result<usize, ConfigError> {
    e.value.parse::<usize>().map_err(|_| ConfigError::Parse {
        line: e.line,
        message: format!("{field}: expected a non-negative integer, got {:?}", e.value),
    })
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let sections = Sections::parse(text)?;

    if !sections.map.contains_key("parameters") {
        return Err(ConfigError::Validation {
            field: "[parameters]".into(),
            message: "required section is missing".into(),
        });
    }

    let preset_entry = sections.get("parameters", "preset");
    let explicit_delta_keys = [
        "delta_omega",
        "delta_gamma",
        "delta_gamma_p",
        "delta_k",
        "delta_kp",
    ];
    let any_explicit_delta = explicit_delta_keys
        .iter()
        .any(|k| sections.has("parameters", k));

    let preset = match preset_entry {
        Some(e) => {
            if any_explicit_delta {
                return Err(ConfigError::Conflict(
                    "preset and explicit delta values cannot both be given".into(),
                ));
            }
            Some(regime_preset(&e.value).map_err(|err| ConfigError::Validation {
                field: "parameters.preset".into(),
                message: err.to_string(),
            })?)
        }
        None => None,
    };

    // start from the preset where available, then apply explicit keys
    let mut geometry = preset.as_ref().map(|p| p.geometry.clone());
    let mut outer_radius = preset.as_ref().map(|p| p.outer_radius).unwrap_or(2.0);
    let mut params = preset.as_ref().map(|p| p.params.clone());
    let initial = preset.as_ref().map(|p| p.initial);
    let mut windshield_sign = preset
        .as_ref()
        .map(|p| p.windshield_sign)
        .unwrap_or(WindshieldSign::JumpVelocity);

    // [geometry]
    if let Some(e) = sections.get("geometry", "dim") {
        let dim = parse_usize(e, "geometry.dim")?;
        if dim != 2 && dim != 3 {
            return Err(ConfigError::Validation {
                field: "geometry.dim".into(),
                message: format!("dimension must be 2 or 3, got {dim}"),
            });
        }
        if let Some(g) = &mut geometry {
            g.dim = dim;
        } else {
            geometry = Some(LevelSetGeometry::tanh_deform(dim));
        }
    }
    if let Some(e) = sections.get("geometry", "kind") {
        let dim = geometry.as_ref().map(|g| g.dim).unwrap_or(2);
        let coeffs: Vec<f64> = match sections.get("geometry", "coefficients") {
            Some(c) => c
                .value
                .split(',')
                .map(|tok| {
                    tok.trim().parse::<f64>().map_err(|_| ConfigError::Parse {
                        line: c.line,
                        message: format!("bad coefficient {tok:?}"),
                    })
                })
                .collect::<Result<_, _>>()?,
            None => Vec::new(),
        };
        let kind = match e.value.as_str() {
            "tanh_deform" => LevelSetGeometry::tanh_deform(dim),
            "sphere" => {
                let r = coeffs.first().copied().unwrap_or(1.0);
                LevelSetGeometry::sphere(dim, r)
            }
            "custom" => {
                if coeffs.len() != 8 {
                    return Err(ConfigError::Validation {
                        field: "geometry.coefficients".into(),
                        message: format!("custom kind needs 8 coefficients, got {}", coeffs.len()),
                    });
                }
                let mut c = [0.0; 8];
                c.copy_from_slice(&coeffs);
                LevelSetGeometry::custom(dim, c)
            }
            other => {
                return Err(ConfigError::Validation {
                    field: "geometry.kind".into(),
                    message: format!("unknown kind {other:?} (tanh_deform, sphere, custom)"),
                })
            }
        };
        geometry = Some(kind);
    } else {
        // consume coefficients silently only when kind is present
        let _ = sections.get("geometry", "coefficients");
    }
    if let Some(e) = sections.get("geometry", "outer_radius") {
        outer_radius = parse_f64(e, "geometry.outer_radius")?;
    }

    // [mesh]
    let mesh = match (sections.get("mesh", "resolution"), sections.get("mesh", "file")) {
        (Some(_), Some(_)) => {
            return Err(ConfigError::Conflict(
                "mesh.resolution and mesh.file cannot both be given".into(),
            ))
        }
        (Some(e), None) => MeshSource::Resolution(parse_usize(e, "mesh.resolution")?),
        (None, Some(e)) => MeshSource::File(PathBuf::from(&e.value)),
        (None, None) => MeshSource::Resolution(5000),
    };

    // [parameters] explicit values
    if params.is_none() {
        let need = |key: &str| -> Result<f64, ConfigError> {
            match sections.get("parameters", key) {
                Some(e) => parse_f64(e, key),
                None => Err(ConfigError::Validation {
                    field: format!("parameters.{key}"),
                    message: "required without a preset".into(),
                }),
            }
        };
        let delta_omega = need("delta_omega")?;
        let delta_gamma = need("delta_gamma")?;
        let delta_gamma_p = need("delta_gamma_p")?;
        let delta_k = need("delta_k")?;
        let delta_kp = need("delta_kp")?;
        params = Some(ParameterSet {
            delta_omega,
            delta_gamma,
            delta_gamma_p,
            delta_k,
            delta_kp,
            g_kind: GKind::Quadratic,
            outer_bc: OuterBc::Neumann,
            tau: 1e-3,
            t_end: 1.0,
            velocity_mode: VelocityMode::Zero,
        });
    }
    let params = params.as_mut().expect("set above");

    if let Some(e) = sections.get("parameters", "g") {
        params.g_kind = match e.value.as_str() {
            "quadratic" => GKind::Quadratic,
            "hill" => {
                let n = match sections.get("parameters", "hill_n") {
                    Some(h) => parse_f64(h, "parameters.hill_n")?,
                    None => 2.0,
                };
                GKind::Hill(n)
            }
            other => {
                return Err(ConfigError::Validation {
                    field: "parameters.g".into(),
                    message: format!("unknown kinetics {other:?} (quadratic, hill)"),
                })
            }
        };
    } else {
        let _ = sections.get("parameters", "hill_n");
    }
    if let Some(e) = sections.get("parameters", "outer_bc") {
        params.outer_bc = match e.value.as_str() {
            "neumann" => OuterBc::Neumann,
            "dirichlet" => {
                let v = match sections.get("parameters", "u_d") {
                    Some(u) => parse_f64(u, "parameters.u_d")?,
                    None => 1.0,
                };
                OuterBc::Dirichlet(v)
            }
            other => {
                return Err(ConfigError::Validation {
                    field: "parameters.outer_bc".into(),
                    message: format!("unknown boundary condition {other:?}"),
                })
            }
        };
    } else {
        let _ = sections.get("parameters", "u_d");
    }
    if let Some(e) = sections.get("parameters", "velocity") {
        params.velocity_mode = match e.value.as_str() {
            "zero" => VelocityMode::Zero,
            "harmonic_extension" => VelocityMode::HarmonicExtension,
            other => {
                return Err(ConfigError::Validation {
                    field: "parameters.velocity".into(),
                    message: format!("unknown velocity mode {other:?}"),
                })
            }
        };
    }

    // initial data
    let mut u0 = None;
    let mut w0_const = None;
    let mut w0_lobe = false;
    let mut z0 = None;
    if let Some(e) = sections.get("parameters", "u0") {
        u0 = Some(parse_f64(e, "parameters.u0")?);
    }
    if let Some(e) = sections.get("parameters", "w0") {
        if e.value == "lobe_bump" {
            w0_lobe = true;
        } else {
            w0_const = Some(parse_f64(e, "parameters.w0")?);
        }
    }
    if let Some(e) = sections.get("parameters", "z0") {
        z0 = Some(parse_f64(e, "parameters.z0")?);
    }
    let initial = if u0.is_some() || w0_const.is_some() || w0_lobe || z0.is_some() {
        let u0 = u0.unwrap_or_else(|| initial.map(|i| i.u0([0.0; 3])).unwrap_or(1.0));
        let z0 = z0.unwrap_or(0.0);
        if w0_lobe {
            InitialData::LobeBump { u0, z0 }
        } else {
            InitialData::Uniform {
                u0,
                w0: w0_const.unwrap_or(1.0),
                z0,
            }
        }
    } else {
        initial.unwrap_or(InitialData::Uniform {
            u0: 1.0,
            w0: 1.0,
            z0: 0.0,
        })
    };

    // [time]
    if let Some(e) = sections.get("time", "tau") {
        params.tau = parse_f64(e, "time.tau")?;
    }
    if let Some(e) = sections.get("time", "tmax") {
        params.t_end = parse_f64(e, "time.tmax")?;
    }
    let output_every = match sections.get("time", "output_every") {
        Some(e) => parse_usize(e, "time.output_every")?,
        None => 0,
    };
    if !(params.tau > 0.0) || !(params.t_end > 0.0) {
        return Err(ConfigError::Validation {
            field: "time".into(),
            message: format!(
                "tau and tmax must be positive (tau = {}, tmax = {})",
                params.tau, params.t_end
            ),
        });
    }

    // [diagnostics]
    let fb_threshold = match sections.get("diagnostics", "threshold") {
        Some(e) => parse_f64(e, "diagnostics.threshold")?,
        None => 0.1,
    };
    if let Some(e) = sections.get("diagnostics", "windshield_sign") {
        windshield_sign = match e.value.as_str() {
            "jump_velocity" => WindshieldSign::JumpVelocity,
            "surface_velocity" => WindshieldSign::SurfaceVelocity,
            other => {
                return Err(ConfigError::Validation {
                    field: "diagnostics.windshield_sign".into(),
                    message: format!(
                        "unknown sign {other:?} (jump_velocity, surface_velocity)"
                    ),
                })
            }
        };
    }
    let diag_every = match sections.get("diagnostics", "diag_every") {
        Some(e) => parse_usize(e, "diagnostics.diag_every")?,
        None => 1,
    };

    // [output]
    let out_dir = match sections.get("output", "dir") {
        Some(e) => PathBuf::from(&e.value),
        None => PathBuf::from("out"),
    };
    let (mut write_csv, mut write_vtk) = (true, false);
    if let Some(e) = sections.get("output", "formats") {
        write_csv = false;
        write_vtk = false;
        for tok in e.value.split(',') {
            match tok.trim() {
                "csv" => write_csv = true,
                "vtk" => write_vtk = true,
                other => {
                    return Err(ConfigError::Validation {
                        field: "output.formats".into(),
                        message: format!("unknown format {other:?} (csv, vtk)"),
                    })
                }
            }
        }
    }

    let geometry = geometry.ok_or(ConfigError::Validation {
        field: "[geometry]".into(),
        message: "geometry kind required without a preset".into(),
    })?;

    sections.check_all_consumed()?;

    Ok(RunConfig {
        geometry,
        outer_radius,
        mesh,
        params: params.clone(),
        initial,
        fb_threshold,
        windshield_sign,
        diag_every,
        output_every,
        out_dir,
        write_csv,
        write_vtk,
    })
}
