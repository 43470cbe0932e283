//! Quantities that connect a run to the model's conservation laws and limit
//! behavior: masses, the cumulative binding residual, the complementarity
//! gap, free-boundary extraction, nondimensionalization and regime presets.

use crate::fem;
use crate::geometry::{add3, scale3, sub3, LevelSetGeometry, Point, VelocityMode};
use crate::mesh::{SurfaceView, WindshieldSign};
use crate::sparse::CsrMatrix;
use crate::stepper::{FieldState, GKind, ParameterSet};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DiagnosticsError {
    #[error("unknown preset {0:?}")]
    UnknownPreset(String),
}

/// One row of per-step diagnostics.
#[derive(Debug, Clone, Copy)]
pub struct DiagnosticsRecord {
    pub step: usize,
    pub time: f64,
    /// delta_omega-weighted bulk mass.
    pub mass_u: f64,
    pub mass_w: f64,
    pub mass_z: f64,
    pub mass_wz: f64,
    /// mass_u + mass_z (both already carry their weights).
    pub combined_mass: f64,
    /// running total of the space-time integral of g.
    pub g_residual_cum: f64,
    /// integral of min(u+, w+) over the surface.
    pub comp_gap: f64,
    pub min_w: f64,
    pub max_u_trace: f64,
    /// measure of the region where the receptor field is below threshold.
    pub fb_measure: f64,
}

pub struct MassTuple {
    pub mass_u: f64,
    pub mass_w: f64,
    pub mass_z: f64,
    pub mass_wz: f64,
    pub combined_mass: f64,
}

fn weighted_sum(m: &CsrMatrix, f: &[f64]) -> f64 {
    if f.is_empty() {
        return 0.0;
    }
    m.spmv(f).map(|v| v.iter().sum()).unwrap_or(f64::NAN)
}

/// Mass-matrix weighted sums 1^T M f at one level; `m_bulk` carries the
/// delta_omega weight so combined_mass = mass_u + mass_z.
pub fn masses_from(m_bulk: &CsrMatrix, m_surf: &CsrMatrix, state: &FieldState) -> MassTuple {
    let mass_u = weighted_sum(m_bulk, &state.u);
    let mass_w = weighted_sum(m_surf, &state.w);
    let mass_z = weighted_sum(m_surf, &state.z);
    MassTuple {
        mass_u,
        mass_w,
        mass_z,
        mass_wz: mass_w + mass_z,
        combined_mass: mass_u + mass_z,
    }
}

/// Assemble the matrices fresh and compute the masses (convenience form).
pub fn compute_masses(
    mesh: &crate::mesh::SimplicialMesh,
    view: &SurfaceView,
    state: &FieldState,
    p: &ParameterSet,
) -> MassTuple {
    let mut t = crate::sparse::TripletBuffer::new(mesh.n_vertices(), mesh.n_vertices());
    for c in 0..mesh.n_cells() {
        let ids = mesh.cell_vertex_ids(c);
        let verts: Vec<Point> = ids.iter().map(|&i| mesh.vertices()[i]).collect();
        if let Ok(me) = fem::element_mass(&verts) {
            for (li, &gi) in ids.iter().enumerate() {
                for (lj, &gj) in ids.iter().enumerate() {
                    t.push(gi, gj, p.delta_omega * me.a[li][lj]);
                }
            }
        }
    }
    let m_bulk = t.to_csr().expect("indices valid");
    let (m_surf_t, _) = fem::assemble_surface_raw(view).expect("valid surface");
    let m_surf = m_surf_t.to_csr().expect("indices valid");
    masses_from(&m_bulk, &m_surf, state)
}

/// Advance the cumulative binding residual by tau * integral of
/// I_h(g(u, w)) over the given surface level.
pub fn g_residual(
    m_surf: &CsrMatrix,
    view: &SurfaceView,
    state: &FieldState,
    p: &ParameterSet,
    tau: f64,
    accumulator: f64,
) -> f64 {
    if view.vertices.is_empty() {
        return accumulator;
    }
    let u_trace = fem::restrict_to_surface(view, &state.u);
    let g: Vec<f64> = u_trace
        .iter()
        .zip(&state.w)
        .map(|(&u, &w)| crate::stepper::reaction_g(p, u, w))
        .collect();
    accumulator + tau * weighted_sum(m_surf, &g)
}

/// Integral of the nodal interpolant of min(u+, w+) over the surface;
/// zero exactly when the nodal supports are disjoint.
pub fn complementarity_gap(view: &SurfaceView, u_trace: &[f64], w: &[f64]) -> f64 {
    let weights = fem::surface_vertex_weights(view);
    weights
        .iter()
        .zip(u_trace.iter().zip(w))
        .map(|(&wt, (&u, &wv))| wt * u.max(0.0).min(wv.max(0.0)))
        .sum()
}

/// Threshold crossing geometry and the exact sub-threshold measure of the P1
/// interpolant of w.
pub struct FreeBoundary {
    /// Crossing points (2D) or crossing segment endpoints flattened (3D).
    pub crossings: Vec<Point>,
    pub measure: f64,
}

pub fn extract_free_boundary(view: &SurfaceView, w: &[f64], threshold: f64) -> FreeBoundary {
    let mut crossings = Vec::new();
    let mut measure = 0.0;
    match view.dim_s {
        1 => {
            for f in &view.facets {
                let (ia, ib) = (f[0], f[1]);
                let (pa, pb) = (view.vertices[ia], view.vertices[ib]);
                let (wa, wb) = (w[ia], w[ib]);
                let len = crate::geometry::norm3(sub3(pb, pa));
                let below_a = wa < threshold;
                let below_b = wb < threshold;
                match (below_a, below_b) {
                    (true, true) => measure += len,
                    (false, false) => {}
                    _ => {
                        let s = (threshold - wa) / (wb - wa);
                        crossings.push(add3(pa, scale3(sub3(pb, pa), s)));
                        measure += len * if below_a { s } else { 1.0 - s };
                    }
                }
            }
        }
        2 => {
            for f in &view.facets {
                let ids = [f[0], f[1], f[2]];
                let p: Vec<Point> = ids.iter().map(|&i| view.vertices[i]).collect();
                let v: Vec<f64> = ids.iter().map(|&i| w[i]).collect();
                let area = fem::simplex_measure(&p);
                let below: Vec<usize> = (0..3).filter(|&i| v[i] < threshold).collect();
                match below.len() {
                    0 => {}
                    3 => measure += area,
                    1 => {
                        let a = below[0];
                        let (b, c) = ((a + 1) % 3, (a + 2) % 3);
                        let sb = (threshold - v[a]) / (v[b] - v[a]);
                        let sc = (threshold - v[a]) / (v[c] - v[a]);
                        let pb = add3(p[a], scale3(sub3(p[b], p[a]), sb));
                        let pc = add3(p[a], scale3(sub3(p[c], p[a]), sc));
                        crossings.push(pb);
                        crossings.push(pc);
                        measure += area * sb * sc;
                    }
                    2 => {
                        // one vertex above: complement of the small triangle
                        let a = (0..3).find(|i| !below.contains(i)).unwrap();
                        let (b, c) = ((a + 1) % 3, (a + 2) % 3);
                        let sb = (threshold - v[a]) / (v[b] - v[a]);
                        let sc = (threshold - v[a]) / (v[c] - v[a]);
                        let pb = add3(p[a], scale3(sub3(p[b], p[a]), sb));
                        let pc = add3(p[a], scale3(sub3(p[c], p[a]), sc));
                        crossings.push(pb);
                        crossings.push(pc);
                        measure += area * (1.0 - sb * sc);
                    }
                    _ => unreachable!(),
                }
            }
        }
        _ => {}
    }
    FreeBoundary { crossings, measure }
}

/// Build a full diagnostics row from the cached level matrices.
#[allow(clippy::too_many_arguments)]
pub fn assemble_record(
    step: usize,
    time: f64,
    m_bulk: &CsrMatrix,
    m_surf: &CsrMatrix,
    view: &SurfaceView,
    state: &FieldState,
    g_residual_cum: f64,
    fb_threshold: f64,
) -> DiagnosticsRecord {
    let masses = masses_from(m_bulk, m_surf, state);
    let u_trace = fem::restrict_to_surface(view, &state.u);
    let comp_gap = complementarity_gap(view, &u_trace, &state.w);
    let fb = extract_free_boundary(view, &state.w, fb_threshold);
    DiagnosticsRecord {
        step,
        time,
        mass_u: masses.mass_u,
        mass_w: masses.mass_w,
        mass_z: masses.mass_z,
        mass_wz: masses.mass_wz,
        combined_mass: masses.combined_mass,
        g_residual_cum,
        comp_gap,
        min_w: state.w.iter().cloned().fold(f64::INFINITY, f64::min),
        max_u_trace: u_trace.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        fb_measure: fb.measure,
    }
}

/// Dimensional inputs for the rescaling map.
#[derive(Debug, Clone, Copy)]
pub struct PhysicalParameters {
    /// length scale (m)
    pub length: f64,
    /// bulk concentration scale (mol m^-3)
    pub bulk_scale: f64,
    /// receptor surface density scale (mol m^-2)
    pub receptor_scale: f64,
    /// complex surface density scale (mol m^-2)
    pub complex_scale: f64,
    /// bulk diffusivity (m^2 s^-1)
    pub d_bulk: f64,
    /// receptor surface diffusivity (m^2 s^-1)
    pub d_receptor: f64,
    /// complex surface diffusivity (m^2 s^-1)
    pub d_complex: f64,
    /// binding rate (m^3 mol^-1 s^-1)
    pub k_on: f64,
    /// unbinding rate (s^-1)
    pub k_off: f64,
    /// time scale (s)
    pub timescale: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct DimensionlessSet {
    pub delta_omega: f64,
    pub delta_gamma: f64,
    pub delta_gamma_p: f64,
    pub delta_k: f64,
    pub delta_kp_inv: f64,
    pub mu: f64,
    pub mu_p: f64,
}

pub fn nondimensionalize(phys: &PhysicalParameters) -> DimensionlessSet {
    let l2 = phys.length * phys.length;
    DimensionlessSet {
        delta_omega: l2 / (phys.d_bulk * phys.timescale),
        delta_gamma: phys.d_receptor * phys.timescale / l2,
        delta_gamma_p: phys.d_complex * phys.timescale / l2,
        delta_k: phys.d_bulk / (phys.k_on * phys.length * phys.receptor_scale),
        delta_kp_inv: phys.k_off * phys.complex_scale * phys.length
            / (phys.d_bulk * phys.bulk_scale),
        mu: phys.timescale * phys.bulk_scale * phys.d_bulk / (phys.length * phys.receptor_scale),
        mu_p: phys.timescale * phys.bulk_scale * phys.d_bulk / (phys.length * phys.complex_scale),
    }
}

/// Initial field profiles used by the presets.
#[derive(Debug, Clone, Copy)]
pub enum InitialData {
    Uniform { u0: f64, w0: f64, z0: f64 },
    /// Constant ligand/complex with receptors concentrated at the x1 lobes:
    /// w0(x) = exp(-6 (1 - x1^2)).
    LobeBump { u0: f64, z0: f64 },
}

impl InitialData {
    pub fn u0(&self, _p: Point) -> f64 {
        match self {
            InitialData::Uniform { u0, .. } | InitialData::LobeBump { u0, .. } => *u0,
        }
    }

    pub fn w0(&self, p: Point) -> f64 {
        match self {
            InitialData::Uniform { w0, .. } => *w0,
            InitialData::LobeBump { .. } => (-6.0 * (1.0 - p[0] * p[0])).exp(),
        }
    }

    pub fn z0(&self, _p: Point) -> f64 {
        match self {
            InitialData::Uniform { z0, .. } | InitialData::LobeBump { z0, .. } => *z0,
        }
    }
}

/// A named experiment configuration: parameters, geometry, initial data and
/// (for the limit regimes) the delta_k sweep values.
#[derive(Debug, Clone)]
pub struct RegimePreset {
    pub name: &'static str,
    pub params: ParameterSet,
    pub geometry: LevelSetGeometry,
    pub outer_radius: f64,
    pub initial: InitialData,
    pub delta_k_sweep: Option<Vec<f64>>,
    pub windshield_sign: WindshieldSign,
}

pub fn regime_preset(name: &str) -> Result<RegimePreset, DiagnosticsError> {
    use crate::fem::OuterBc;
    let tanh2 = LevelSetGeometry::tanh_deform(2);
    let uniform = InitialData::Uniform {
        u0: 1.0,
        w0: 1.0,
        z0: 0.0,
    };
    let sweep = Some(vec![1e-1, 1e-2, 1e-3]);
    let preset = match name {
        "fast_binding" => RegimePreset {
            name: "fast_binding",
            params: ParameterSet {
                delta_omega: 1.0,
                delta_gamma: 1.0,
                delta_gamma_p: 1.0,
                delta_k: 0.01,
                delta_kp: 1.0,
                g_kind: GKind::Quadratic,
                outer_bc: OuterBc::Neumann,
                tau: 1e-3,
                t_end: 1.0,
                velocity_mode: VelocityMode::Zero,
            },
            geometry: tanh2,
            outer_radius: 2.0,
            initial: uniform,
            delta_k_sweep: sweep,
            windshield_sign: WindshieldSign::JumpVelocity,
        },
        "fast_binding_no_surface_diffusion" => RegimePreset {
            name: "fast_binding_no_surface_diffusion",
            params: ParameterSet {
                delta_omega: 1.0,
                delta_gamma: 0.01,
                delta_gamma_p: 0.01,
                delta_k: 0.01,
                delta_kp: 1.0,
                g_kind: GKind::Quadratic,
                outer_bc: OuterBc::Neumann,
                tau: 1e-3,
                t_end: 1.0,
                velocity_mode: VelocityMode::Zero,
            },
            geometry: tanh2,
            outer_radius: 2.0,
            initial: uniform,
            delta_k_sweep: sweep,
            windshield_sign: WindshieldSign::JumpVelocity,
        },
        "full_limit_neumann" | "full_limit_dirichlet" => RegimePreset {
            name: if name == "full_limit_neumann" {
                "full_limit_neumann"
            } else {
                "full_limit_dirichlet"
            },
            params: ParameterSet {
                delta_omega: 0.01,
                delta_gamma: 0.01,
                delta_gamma_p: 0.01,
                delta_k: 0.01,
                // the slow-unbinding regime scales 1/delta_kp down with the rest
                delta_kp: 100.0,
                g_kind: GKind::Quadratic,
                outer_bc: if name == "full_limit_neumann" {
                    OuterBc::Neumann
                } else {
                    OuterBc::Dirichlet(1.0)
                },
                tau: 1e-3,
                t_end: 1.0,
                velocity_mode: VelocityMode::Zero,
            },
            geometry: tanh2,
            outer_radius: 2.0,
            initial: uniform,
            delta_k_sweep: sweep,
            windshield_sign: WindshieldSign::JumpVelocity,
        },
        "windshield_on" | "windshield_off" => RegimePreset {
            name: if name == "windshield_on" {
                "windshield_on"
            } else {
                "windshield_off"
            },
            params: ParameterSet {
                delta_omega: 1.0,
                delta_gamma: 0.001,
                delta_gamma_p: 0.001,
                delta_k: 0.001,
                delta_kp: 1.0,
                g_kind: GKind::Hill(2.0),
                outer_bc: OuterBc::Dirichlet(1.0),
                tau: 1e-5,
                t_end: 0.4,
                velocity_mode: if name == "windshield_on" {
                    VelocityMode::Zero
                } else {
                    VelocityMode::HarmonicExtension
                },
            },
            geometry: tanh2,
            outer_radius: 2.0,
            initial: InitialData::LobeBump { u0: 1.0, z0: 0.0 },
            delta_k_sweep: None,
            windshield_sign: WindshieldSign::JumpVelocity,
        },
        other => return Err(DiagnosticsError::UnknownPreset(other.to_string())),
    };
    Ok(preset)
}
