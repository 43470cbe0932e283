//! IMEX time loop coupling the bulk field to the two surface fields across
//! moving mesh levels.
//!
//! Per step, three linear solves: the bulk equation with implicit diffusion,
//! ALE advection, windshield term and binding loss (the binding is linearized
//! about the previous state and kept implicit in the bulk unknown, which is
//! what keeps fast-binding runs stable at practical timesteps); then the two
//! surface equations with implicit diffusion. The binding and unbinding
//! exchange loads are each computed once and shared by all three equations,
//! so the discrete conservation identities hold to roundoff.

use crate::diagnostics::{self, DiagnosticsRecord};
use crate::fem::{self, OuterBc, P1Space};
use crate::geometry::{LevelSetGeometry, Point, VelocityMode};
use crate::mesh::{self, MeshError, MeshMotion, SimplicialMesh, SurfaceView, WindshieldSign};
use crate::sparse::{self, CsrMatrix, SolveOptions, SparseError, TripletBuffer};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StepError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("assembly failed: {0}")]
    Assembly(#[from] fem::FemError),
    #[error("{field} solve failed: {source}")]
    SolveFailure {
        field: &'static str,
        source: SparseError,
    },
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

#[derive(Debug, Error)]
#[error("step {step} (t = {time:.6}): {source}")]
pub struct RunError {
    pub step: usize,
    pub time: f64,
    #[source]
    pub source: StepError,
}

/// Binding kinetics g(u, w).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GKind {
    /// g = u w
    Quadratic,
    /// g = u^n w / (1 + u^n), n > 1
    Hill(f64),
}

#[derive(Debug, Clone)]
pub struct ParameterSet {
    pub delta_omega: f64,
    pub delta_gamma: f64,
    pub delta_gamma_p: f64,
    pub delta_k: f64,
    pub delta_kp: f64,
    pub g_kind: GKind,
    pub outer_bc: OuterBc,
    pub tau: f64,
    pub t_end: f64,
    pub velocity_mode: VelocityMode,
}

impl ParameterSet {
    pub fn validate(&self) -> Result<(), StepError> {
        let deltas = [
            ("delta_omega", self.delta_omega),
            ("delta_gamma", self.delta_gamma),
            ("delta_gamma_p", self.delta_gamma_p),
            ("delta_k", self.delta_k),
            ("delta_kp", self.delta_kp),
        ];
        for (name, v) in deltas {
            if !(v > 0.0) {
                return Err(StepError::InvalidParams(format!("{name} must be > 0, got {v}")));
            }
        }
        if let GKind::Hill(n) = self.g_kind {
            if !(n > 1.0) {
                return Err(StepError::InvalidParams(format!(
                    "hill exponent must exceed 1, got {n}"
                )));
            }
        }
        if !(self.tau > 0.0 && self.tau <= self.t_end) {
            return Err(StepError::InvalidParams(format!(
                "need 0 < tau <= t_end, got tau = {}, t_end = {}",
                self.tau, self.t_end
            )));
        }
        Ok(())
    }
}

/// g(u, w) for the configured kinetics.
pub fn reaction_g(p: &ParameterSet, u: f64, w: f64) -> f64 {
    match p.g_kind {
        GKind::Quadratic => u * w,
        GKind::Hill(n) => {
            let un = u.powf(n);
            un * w / (1.0 + un)
        }
    }
}

/// The factor c(u, w) with g = u * c, used to keep the binding loss implicit
/// in the bulk unknown (quadratic: w; hill: u^{n-1} w / (1 + u^n)).
pub fn reaction_g_over_u(p: &ParameterSet, u: f64, w: f64) -> f64 {
    match p.g_kind {
        GKind::Quadratic => w,
        GKind::Hill(n) => {
            let un = u.powf(n);
            u.powf(n - 1.0) * w / (1.0 + un)
        }
    }
}

/// Rough bound on |dg| at the given state, for the explicit-coupling warning.
fn reaction_derivative_bound(p: &ParameterSet, u: f64, w: f64) -> f64 {
    match p.g_kind {
        GKind::Quadratic => u.abs().max(w.abs()),
        GKind::Hill(n) => {
            let un = u.abs().powf(n);
            let dgdu = n * u.abs().powf(n - 1.0) * w.abs() / ((1.0 + un) * (1.0 + un));
            let dgdw = un / (1.0 + un);
            dgdu.max(dgdw)
        }
    }
}

/// Nodal coefficient vectors at one time level.
#[derive(Debug, Clone)]
pub struct FieldState {
    pub u: Vec<f64>,
    pub w: Vec<f64>,
    pub z: Vec<f64>,
    pub time: f64,
    pub level: usize,
}

/// A mesh snapshot together with its induced surface view.
pub struct MeshLevel {
    pub mesh: SimplicialMesh,
    pub view: SurfaceView,
}

impl MeshLevel {
    pub fn new(mesh: SimplicialMesh) -> Self {
        let view = mesh::extract_surface(&mesh);
        Self { mesh, view }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolverSettings {
    pub bulk_tol: f64,
    pub surface_tol: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            bulk_tol: 1e-12,
            surface_tol: 1e-13,
        }
    }
}

struct StepOutput {
    state: FieldState,
    /// delta_omega-weighted bulk mass matrix at the new level.
    m_bulk: CsrMatrix,
    /// consistent surface mass matrix at the new level.
    m_surf: CsrMatrix,
}

fn assemble_bulk_mass(mesh: &SimplicialMesh, delta_omega: f64) -> Result<CsrMatrix, StepError> {
    let n = mesh.n_vertices();
    let mut t = TripletBuffer::with_capacity(n, n, 16 * mesh.n_cells());
    for c in 0..mesh.n_cells() {
        let ids = mesh.cell_vertex_ids(c);
        let verts: Vec<Point> = ids.iter().map(|&i| mesh.vertices()[i]).collect();
        let me = fem::element_mass(&verts)?;
        for (li, &gi) in ids.iter().enumerate() {
            for (lj, &gj) in ids.iter().enumerate() {
                t.push(gi, gj, delta_omega * me.a[li][lj]);
            }
        }
    }
    Ok(t.to_csr().expect("indices in range by construction"))
}

fn surface_mass_csr(view: &SurfaceView) -> Result<CsrMatrix, StepError> {
    let (mass, _) = fem::assemble_surface_raw(view)?;
    Ok(mass.to_csr().expect("indices in range by construction"))
}

fn step_core(
    p: &ParameterSet,
    prev: &MeshLevel,
    prev_m_bulk: &CsrMatrix,
    prev_m_surf: &CsrMatrix,
    next: &MeshLevel,
    motion: &MeshMotion,
    state: &FieldState,
    solver: &SolverSettings,
) -> Result<StepOutput, StepError> {
    let tau = p.tau;
    let n_bulk = next.mesh.n_vertices();
    let n_surf = next.view.vertices.len();

    // shared exchange loads on the previous surface
    let u_trace = fem::restrict_to_surface(&prev.view, &state.u);
    let g_nodal: Vec<f64> = u_trace
        .iter()
        .zip(&state.w)
        .map(|(&u, &w)| reaction_g(p, u, w))
        .collect();
    let c_nodal: Vec<f64> = u_trace
        .iter()
        .zip(&state.w)
        .map(|(&u, &w)| reaction_g_over_u(p, u, w))
        .collect();
    let _ = &g_nodal; // diagnostics consume g separately
    let unbinding: Vec<f64> = {
        let zf: Vec<f64> = state.z.iter().map(|&z| z / p.delta_kp).collect();
        prev_m_surf
            .spmv(&zf)
            .map_err(|e| StepError::SolveFailure {
                field: "unbinding load",
                source: e,
            })?
    };
    let weights_prev = fem::surface_vertex_weights(&prev.view);

    // bulk system on the new level
    let ops = fem::assemble_bulk(&next.mesh, motion, &next.view, p.delta_omega)?;
    let m_bulk_new = ops.mass.to_csr().expect("indices in range by construction");
    let mut lhs = TripletBuffer::with_capacity(n_bulk, n_bulk, 2 * ops.mass.entries().len());
    lhs.extend_scaled(&ops.mass, 1.0);
    lhs.extend_scaled(&ops.stiffness, tau);
    lhs.extend_scaled(&ops.ale, tau);
    lhs.extend_scaled(&ops.windshield, tau);
    // implicit binding loss, vertex rule on the previous surface
    for (s, &b) in prev.view.to_bulk.iter().enumerate() {
        let v = tau / p.delta_k * weights_prev[s] * c_nodal[s];
        if v != 0.0 {
            lhs.push(b, b, v);
        }
    }

    let mut rhs = prev_m_bulk
        .spmv(&state.u)
        .map_err(|e| StepError::SolveFailure {
            field: "bulk mass",
            source: e,
        })?;
    for (s, &b) in prev.view.to_bulk.iter().enumerate() {
        rhs[b] += tau * unbinding[s];
    }

    let space = P1Space::bulk(&next.mesh, matches!(p.outer_bc, OuterBc::Dirichlet(_)));
    fem::apply_outer_bc(&space, &mut lhs, &mut rhs, p.outer_bc);
    let lhs = lhs.to_csr().expect("indices in range by construction");
    let u_new = sparse::solve_general(
        &lhs,
        &rhs,
        SolveOptions::with_tol(solver.bulk_tol),
        Some(&state.u),
    )
    .map_err(|e| StepError::SolveFailure {
        field: "bulk",
        source: e,
    })?;

    // binding load shared by the surface equations (same quantity that the
    // bulk equation removed implicitly)
    let u_new_trace_prev = fem::restrict_to_surface(&prev.view, &u_new);
    let binding: Vec<f64> = (0..prev.view.to_bulk.len())
        .map(|s| weights_prev[s] * c_nodal[s] * u_new_trace_prev[s] / p.delta_k)
        .collect();

    // surface solves on the new level
    let (m_surf_new, w_lhs) = fem::assemble_surface(&next.view, p.delta_gamma, tau)?;
    let (_, z_lhs) = fem::assemble_surface(&next.view, p.delta_gamma_p, tau)?;

    let mut w_rhs = prev_m_surf
        .spmv(&state.w)
        .map_err(|e| StepError::SolveFailure {
            field: "receptor mass",
            source: e,
        })?;
    let mut z_rhs = prev_m_surf
        .spmv(&state.z)
        .map_err(|e| StepError::SolveFailure {
            field: "complex mass",
            source: e,
        })?;
    for s in 0..n_surf.min(w_rhs.len()) {
        w_rhs[s] += tau * (unbinding[s] - binding[s]);
        z_rhs[s] += tau * (binding[s] - unbinding[s]);
    }

    let w_new = sparse::solve_spd(
        &w_lhs,
        &w_rhs,
        SolveOptions::with_tol(solver.surface_tol),
        Some(&state.w),
    )
    .map_err(|e| StepError::SolveFailure {
        field: "receptor",
        source: e,
    })?;
    let z_new = sparse::solve_spd(
        &z_lhs,
        &z_rhs,
        SolveOptions::with_tol(solver.surface_tol),
        Some(&state.z),
    )
    .map_err(|e| StepError::SolveFailure {
        field: "complex",
        source: e,
    })?;

    Ok(StepOutput {
        state: FieldState {
            u: u_new,
            w: w_new,
            z: z_new,
            time: state.time + tau,
            level: state.level + 1,
        },
        m_bulk: m_bulk_new,
        m_surf: m_surf_new,
    })
}

/// One IMEX step from `state` on `prev` to the new level `next` moved by
/// `motion`. The surface meshes of both levels must share connectivity.
pub fn imex_step(
    p: &ParameterSet,
    prev: &MeshLevel,
    next: &MeshLevel,
    motion: &MeshMotion,
    state: &FieldState,
    solver: &SolverSettings,
) -> Result<FieldState, StepError> {
    let m_bulk = assemble_bulk_mass(&prev.mesh, p.delta_omega)?;
    let m_surf = surface_mass_csr(&prev.view)?;
    Ok(step_core(p, prev, &m_bulk, &m_surf, next, motion, state, solver)?.state)
}

/// Observers for the simulation loop. All methods default to no-ops.
pub trait RunSink {
    fn on_diagnostics(&mut self, _rec: &DiagnosticsRecord) {}
    fn on_snapshot(
        &mut self,
        _step: usize,
        _time: f64,
        _mesh: &SimplicialMesh,
        _view: &SurfaceView,
        _state: &FieldState,
    ) {
    }
    fn on_warning(&mut self, _step: usize, _message: &str) {}
}

pub struct NullSink;
impl RunSink for NullSink {}

#[derive(Debug, Clone, Copy)]
pub struct RunOptions {
    pub windshield_sign: WindshieldSign,
    /// receptor threshold for the free-boundary diagnostic
    pub fb_threshold: f64,
    /// record diagnostics every k-th step (0 disables intermediate records)
    pub diag_every: usize,
    /// emit a snapshot every k-th step (0 = first and last only)
    pub snapshot_every: usize,
    pub solver: SolverSettings,
    pub quiet: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            windshield_sign: WindshieldSign::JumpVelocity,
            fb_threshold: 0.1,
            diag_every: 1,
            snapshot_every: 0,
            solver: SolverSettings::default(),
            quiet: true,
        }
    }
}

pub struct RunOutput {
    pub final_state: FieldState,
    pub records: Vec<DiagnosticsRecord>,
    pub steps_taken: usize,
    pub warnings: usize,
}

/// Interpolate initial data, then loop advance_mesh -> imex_step ->
/// diagnostics at the configured cadence. Deterministic for a fixed
/// configuration; the first failure aborts with its step index and cause.
#[allow(clippy::too_many_arguments)]
pub fn run_simulation(
    p: &ParameterSet,
    geom: &LevelSetGeometry,
    mesh0: SimplicialMesh,
    u0: &dyn Fn(Point) -> f64,
    w0: &dyn Fn(Point) -> f64,
    z0: &dyn Fn(Point) -> f64,
    opts: &RunOptions,
    sink: &mut dyn RunSink,
) -> Result<RunOutput, RunError> {
    let fail = |step: usize, time: f64, source: StepError| RunError { step, time, source };
    p.validate().map_err(|e| fail(0, 0.0, e))?;

    let mut level = MeshLevel::new(mesh0);
    let state0 = FieldState {
        u: level.mesh.vertices().iter().map(|&v| u0(v)).collect(),
        w: level.view.vertices.iter().map(|&v| w0(v)).collect(),
        z: level.view.vertices.iter().map(|&v| z0(v)).collect(),
        time: 0.0,
        level: 0,
    };

    // full steps; a shorter trailing step covers any remainder
    let n_full = (p.t_end / p.tau + 1e-9).floor() as usize;
    let remainder = p.t_end - n_full as f64 * p.tau;
    let has_tail = remainder > 1e-12 * p.t_end;
    let total_steps = n_full + usize::from(has_tail);

    let mut warnings = 0usize;
    let warn = |sink: &mut dyn RunSink, quiet: bool, step: usize, msg: String| {
        if !quiet {
            eprintln!("warning (step {step}): {msg}");
        }
        sink.on_warning(step, &msg);
    };
    if has_tail {
        warnings += 1;
        warn(
            sink,
            opts.quiet,
            0,
            format!("t_end is not a multiple of tau; final step truncated to {remainder:.3e}"),
        );
    }

    let mut m_bulk = assemble_bulk_mass(&level.mesh, p.delta_omega).map_err(|e| fail(0, 0.0, e))?;
    let mut m_surf = surface_mass_csr(&level.view).map_err(|e| fail(0, 0.0, e))?;

    let mut g_residual_cum = 0.0;
    let mut records = Vec::new();
    let rec0 = diagnostics::assemble_record(
        0,
        0.0,
        &m_bulk,
        &m_surf,
        &level.view,
        &state0,
        g_residual_cum,
        opts.fb_threshold,
    );
    sink.on_diagnostics(&rec0);
    records.push(rec0);
    sink.on_snapshot(0, 0.0, &level.mesh, &level.view, &state0);

    let mut state = state0;
    let mut cfl_warned = false;
    let mut prev_motion: Option<MeshMotion> = None;
    for step in 1..=total_steps {
        let tau_step = if step <= n_full { p.tau } else { remainder };
        let p_step = ParameterSet {
            tau: tau_step,
            ..p.clone()
        };
        let t_old = state.time;

        // explicit-coupling guard
        if !cfl_warned {
            let u_trace = fem::restrict_to_surface(&level.view, &state.u);
            let dg_max = u_trace
                .iter()
                .zip(&state.w)
                .map(|(&u, &w)| reaction_derivative_bound(p, u, w))
                .fold(0.0, f64::max);
            let rate = (dg_max / p.delta_k).max(1.0 / p.delta_kp);
            if tau_step * rate > 1.0 {
                cfl_warned = true;
                warnings += 1;
                warn(
                    sink,
                    opts.quiet,
                    step,
                    format!(
                        "explicit reaction stability indicator tau*rate = {:.2} exceeds 1",
                        tau_step * rate
                    ),
                );
            }
        }

        let (new_mesh, motion) = mesh::advance_mesh(
            &level.mesh,
            geom,
            t_old,
            tau_step,
            p.velocity_mode,
            opts.windshield_sign,
            prev_motion.as_ref(),
        )
        .map_err(|e| fail(step, t_old, e.into()))?;
        let next = MeshLevel::new(new_mesh);

        // residual of the previous state accumulates before the step
        g_residual_cum = diagnostics::g_residual(&m_surf, &level.view, &state, &p_step, tau_step, g_residual_cum);

        let out = step_core(
            &p_step,
            &level,
            &m_bulk,
            &m_surf,
            &next,
            &motion,
            &state,
            &opts.solver,
        )
        .map_err(|e| fail(step, t_old, e))?;

        state = out.state;
        level = next;
        m_bulk = out.m_bulk;
        m_surf = out.m_surf;
        prev_motion = Some(motion);

        let negativity = state
            .u
            .iter()
            .chain(state.w.iter())
            .chain(state.z.iter())
            .cloned()
            .fold(0.0, f64::min);
        if negativity < -1e-8 {
            warnings += 1;
            warn(
                sink,
                opts.quiet,
                step,
                format!("negative concentration {negativity:.3e} (not clipped)"),
            );
        }

        let record_now = opts.diag_every > 0 && (step % opts.diag_every == 0 || step == total_steps);
        if record_now {
            let rec = diagnostics::assemble_record(
                step,
                state.time,
                &m_bulk,
                &m_surf,
                &level.view,
                &state,
                g_residual_cum,
                opts.fb_threshold,
            );
            sink.on_diagnostics(&rec);
            records.push(rec);
        }
        let snap_now = step == total_steps
            || (opts.snapshot_every > 0 && step % opts.snapshot_every == 0);
        if snap_now {
            sink.on_snapshot(step, state.time, &level.mesh, &level.view, &state);
        }
    }

    Ok(RunOutput {
        final_state: state,
        records,
        steps_taken: total_steps,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::LevelSetGeometry;

    fn stationary_levels(resolution: usize) -> (MeshLevel, MeshLevel, MeshMotion) {
        let geom = LevelSetGeometry::sphere(2, 1.0);
        let m = mesh::build_initial_mesh(&geom, 2.0, resolution).unwrap();
        let prev = MeshLevel::new(m.clone());
        let next = MeshLevel::new(m);
        let motion = MeshMotion::stationary(&next.mesh, &next.view);
        (prev, next, motion)
    }

    fn base_params() -> ParameterSet {
        ParameterSet {
            delta_omega: 1.0,
            delta_gamma: 1.0,
            delta_gamma_p: 1.0,
            delta_k: 1.0,
            delta_kp: 1.0,
            g_kind: GKind::Quadratic,
            outer_bc: OuterBc::Neumann,
            tau: 0.01,
            t_end: 0.1,
            velocity_mode: VelocityMode::Zero,
        }
    }

    #[test]
    fn reaction_values() {
        let mut p = base_params();
        assert_eq!(reaction_g(&p, 2.0, 3.0), 6.0);
        assert_eq!(reaction_g(&p, 0.0, 5.0), 0.0);
        p.g_kind = GKind::Hill(2.0);
        assert!((reaction_g(&p, 1.0, 4.0) - 2.0).abs() < 1e-15);
        assert_eq!(reaction_g(&p, 0.0, 4.0), 0.0);
        // g = u * (g/u)
        for &(u, w) in &[(0.3, 1.7), (2.0, 0.4), (1.0, 1.0)] {
            assert!((reaction_g(&p, u, w) - u * reaction_g_over_u(&p, u, w)).abs() < 1e-14);
        }
    }

    #[test]
    fn parameter_validation() {
        let mut p = base_params();
        assert!(p.validate().is_ok());
        p.delta_k = 0.0;
        assert!(p.validate().is_err());
        let mut p = base_params();
        p.g_kind = GKind::Hill(1.0);
        assert!(p.validate().is_err());
        let mut p = base_params();
        p.tau = 0.2; // > t_end
        assert!(p.validate().is_err());
    }

    #[test]
    fn constant_receptor_preserved_without_reaction() {
        let (prev, next, motion) = stationary_levels(300);
        let p = base_params();
        let c = 1.7;
        let state = FieldState {
            u: vec![0.0; prev.mesh.n_vertices()],
            w: vec![c; prev.view.vertices.len()],
            z: vec![0.0; prev.view.vertices.len()],
            time: 0.0,
            level: 0,
        };
        let out = imex_step(&p, &prev, &next, &motion, &state, &Default::default()).unwrap();
        for w in &out.w {
            assert!((w - c).abs() < 1e-11);
        }
    }

    #[test]
    fn complex_decays_at_unbinding_rate() {
        // no diffusion for z, no reaction: Z^n = (1 - tau/delta_kp) Z^{n-1}
        let (prev, next, motion) = stationary_levels(300);
        let mut p = base_params();
        p.delta_gamma_p = 1e-300; // diffusion off; must stay > 0 for validate
        p.delta_kp = 0.5;
        p.tau = 0.05;
        let z0 = 0.8;
        let state = FieldState {
            u: vec![0.0; prev.mesh.n_vertices()],
            w: vec![0.0; prev.view.vertices.len()],
            z: vec![z0; prev.view.vertices.len()],
            time: 0.0,
            level: 0,
        };
        let out = imex_step(&p, &prev, &next, &motion, &state, &Default::default()).unwrap();
        let expect = (1.0 - p.tau / p.delta_kp) * z0;
        for z in &out.z {
            assert!((z - expect).abs() < 1e-11, "z = {z}, expect {expect}");
        }
    }

    #[test]
    fn surface_mass_conserved_over_one_step() {
        let (prev, next, motion) = stationary_levels(400);
        let mut p = base_params();
        p.delta_k = 0.05;
        p.delta_kp = 2.0;
        let n_s = prev.view.vertices.len();
        let state = FieldState {
            u: vec![1.0; prev.mesh.n_vertices()],
            w: (0..n_s).map(|i| 1.0 + 0.3 * (i as f64 * 0.9).sin()).collect(),
            z: (0..n_s).map(|i| 0.2 + 0.1 * (i as f64 * 1.7).cos()).collect(),
            time: 0.0,
            level: 0,
        };
        let m_surf = surface_mass_csr(&prev.view).unwrap();
        let mass = |w: &[f64], z: &[f64]| -> f64 {
            let mw: f64 = m_surf.spmv(w).unwrap().iter().sum();
            let mz: f64 = m_surf.spmv(z).unwrap().iter().sum();
            mw + mz
        };
        let before = mass(&state.w, &state.z);
        let out = imex_step(&p, &prev, &next, &motion, &state, &Default::default()).unwrap();
        let after = mass(&out.w, &out.z);
        assert!(
            ((after - before) / before).abs() < 1e-12,
            "drift {:.3e}",
            (after - before) / before
        );
    }

    #[test]
    fn run_single_step_horizon() {
        let geom = LevelSetGeometry::sphere(2, 1.0);
        let m = mesh::build_initial_mesh(&geom, 2.0, 200).unwrap();
        let mut p = base_params();
        p.tau = 0.1;
        p.t_end = 0.1;
        let out = run_simulation(
            &p,
            &geom,
            m,
            &|_| 1.0,
            &|_| 1.0,
            &|_| 0.0,
            &RunOptions::default(),
            &mut NullSink,
        )
        .unwrap();
        assert_eq!(out.steps_taken, 1);
        assert_eq!(out.records.len(), 2); // levels 0 and 1
        assert!((out.final_state.time - 0.1).abs() < 1e-14);
    }

    #[test]
    fn run_truncates_final_step() {
        let geom = LevelSetGeometry::sphere(2, 1.0);
        let m = mesh::build_initial_mesh(&geom, 2.0, 150).unwrap();
        let mut p = base_params();
        p.tau = 0.04;
        p.t_end = 0.1; // 2 full steps + 0.02 tail
        let out = run_simulation(
            &p,
            &geom,
            m,
            &|_| 1.0,
            &|_| 1.0,
            &|_| 0.0,
            &RunOptions::default(),
            &mut NullSink,
        )
        .unwrap();
        assert_eq!(out.steps_taken, 3);
        assert!((out.final_state.time - 0.1).abs() < 1e-12);
        assert!(out.warnings >= 1);
    }

    #[test]
    fn empty_surface_runs_pure_heat_equation() {
        let m = mesh::build_disk_mesh(1.0, 6).unwrap();
        let geom = LevelSetGeometry::custom(2, [10.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        // constant-phi geometry never sees projections: no surface vertices
        let mut p = base_params();
        p.tau = 0.01;
        p.t_end = 0.05;
        let out = run_simulation(
            &p,
            &geom,
            m,
            &|v| v[0],
            &|_| 0.0,
            &|_| 0.0,
            &RunOptions::default(),
            &mut NullSink,
        )
        .unwrap();
        // Neumann heat flow preserves the mean and contracts toward it
        assert_eq!(out.final_state.w.len(), 0);
        let rec = out.records.last().unwrap();
        assert!(rec.mass_w == 0.0 && rec.mass_z == 0.0);
    }
}
