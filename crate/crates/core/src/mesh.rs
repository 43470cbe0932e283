//! Evolving simplicial meshes of the annular bulk region: construction,
//! ingestion, the induced surface triangulation, node motion with level-set
//! projection, and harmonic smoothing of the interior displacement.

use crate::geometry::{
    add3, norm3, scale3, sub3, GeometryError, LevelSetGeometry, Point, Vector, VelocityMode,
};
use crate::sparse::{solve_spd, SolveOptions, SparseError, TripletBuffer};
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("mesh generation failed: {0}")]
    MeshGenFailure(String),
    #[error("mesh tangled at step time {time}: cell {cell} volume {volume:.3e}")]
    TangledMesh { time: f64, cell: usize, volume: f64 },
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("mesh file parse error at line {line}: {message}")]
    ParseError { line: usize, message: String },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("harmonic extension solve failed: {0}")]
    SolveFailure(#[from] SparseError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VertexTag {
    Interior,
    InnerSurface,
    OuterBoundary,
}

/// Simplicial bulk mesh with tagged inner-surface and outer-boundary facets.
/// Cells store dim+1 vertex ids, facets dim ids (trailing slots unused).
#[derive(Debug, Clone)]
pub struct SimplicialMesh {
    dim: usize,
    vertices: Vec<Point>,
    cells: Vec<[usize; 4]>,
    inner_facets: Vec<[usize; 3]>,
    outer_facets: Vec<[usize; 3]>,
    vertex_tags: Vec<VertexTag>,
    vol_floor: f64,
}

/// View of the induced surface triangulation: facet ids are surface-local,
/// `to_bulk` maps them back to bulk vertex ids (injective, sorted).
#[derive(Debug, Clone)]
pub struct SurfaceView {
    pub dim_s: usize,
    pub vertices: Vec<Point>,
    pub facets: Vec<[usize; 3]>,
    pub to_bulk: Vec<usize>,
}

impl SurfaceView {
    pub fn facet_nodes(&self) -> usize {
        self.dim_s + 1
    }

    pub fn total_measure(&self) -> f64 {
        let nodes = self.facet_nodes();
        self.facets
            .iter()
            .map(|f| {
                let verts: Vec<Point> = f[..nodes].iter().map(|&i| self.vertices[i]).collect();
                crate::fem::simplex_measure(&verts)
            })
            .sum()
    }
}

/// Nodal mesh-motion data produced by one advance step.
#[derive(Debug, Clone)]
pub struct MeshMotion {
    pub prev_positions: Vec<Point>,
    /// (new - old)/tau per vertex.
    pub node_velocity: Vec<Vector>,
    /// Jump between material and mesh velocity per vertex; zero in the
    /// Lagrangian case, minus the node velocity for stationary bulk material.
    pub jump_nodal: Vec<Vector>,
    /// Normal-velocity jump scalar at inner-surface vertices (surface-local
    /// indexing), for the windshield boundary term.
    pub windshield_nodal: Vec<f64>,
}

impl MeshMotion {
    /// Motion data for a mesh that has not moved.
    pub fn stationary(mesh: &SimplicialMesh, view: &SurfaceView) -> Self {
        Self {
            prev_positions: mesh.vertices.clone(),
            node_velocity: vec![[0.0; 3]; mesh.n_vertices()],
            jump_nodal: vec![[0.0; 3]; mesh.n_vertices()],
            windshield_nodal: vec![0.0; view.vertices.len()],
        }
    }
}

/// Sign convention for the windshield scalar J on the surface. Both options
/// interpolate +/- phi_t/|grad phi| at the surface nodes; `JumpVelocity` is
/// the default used by the verification suite.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindshieldSign {
    /// J = +phi_t/|grad phi| (the jump (V_material - V_surface).nu with the
    /// printed normal-velocity pair).
    JumpVelocity,
    /// J = -phi_t/|grad phi| (the normal-velocity interpolant itself).
    SurfaceVelocity,
}

impl SimplicialMesh {
    /// Build a mesh, derive vertex tags from the facet lists and check all
    /// structural invariants.
    pub fn new(
        dim: usize,
        vertices: Vec<Point>,
        cells: Vec<[usize; 4]>,
        inner_facets: Vec<[usize; 3]>,
        outer_facets: Vec<[usize; 3]>,
    ) -> Result<Self, MeshError> {
        let mut mesh = Self::from_raw_unchecked(dim, vertices, cells, inner_facets, outer_facets);
        mesh.validate()?;
        let minvol = mesh.min_cell_volume();
        mesh.vol_floor = 1e-14 * minvol;
        Ok(mesh)
    }

    /// Assemble the struct without validation (diagnostics on broken meshes,
    /// tests). Tags are still derived from the facet lists.
    pub fn from_raw_unchecked(
        dim: usize,
        vertices: Vec<Point>,
        cells: Vec<[usize; 4]>,
        inner_facets: Vec<[usize; 3]>,
        outer_facets: Vec<[usize; 3]>,
    ) -> Self {
        let mut tags = vec![VertexTag::Interior; vertices.len()];
        for f in &inner_facets {
            for &v in &f[..dim] {
                if v < tags.len() {
                    tags[v] = VertexTag::InnerSurface;
                }
            }
        }
        for f in &outer_facets {
            for &v in &f[..dim] {
                if v < tags.len() {
                    tags[v] = VertexTag::OuterBoundary;
                }
            }
        }
        Self {
            dim,
            vertices,
            cells,
            inner_facets,
            outer_facets,
            vertex_tags: tags,
            vol_floor: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn cell_vertex_ids(&self, c: usize) -> &[usize] {
        &self.cells[c][..self.dim + 1]
    }

    pub fn inner_facets(&self) -> impl Iterator<Item = &[usize]> {
        self.inner_facets.iter().map(move |f| &f[..self.dim])
    }

    pub fn outer_facets(&self) -> impl Iterator<Item = &[usize]> {
        self.outer_facets.iter().map(move |f| &f[..self.dim])
    }

    pub fn n_inner_facets(&self) -> usize {
        self.inner_facets.len()
    }

    pub fn n_outer_facets(&self) -> usize {
        self.outer_facets.len()
    }

    pub fn vertex_tags(&self) -> &[VertexTag] {
        &self.vertex_tags
    }

    pub fn vol_floor(&self) -> f64 {
        self.vol_floor
    }

    pub fn signed_cell_volume(&self, c: usize) -> f64 {
        let ids = self.cell_vertex_ids(c);
        let p: Vec<Point> = ids.iter().map(|&i| self.vertices[i]).collect();
        signed_volume(self.dim, &p)
    }

    pub fn min_cell_volume(&self) -> f64 {
        (0..self.n_cells())
            .map(|c| self.signed_cell_volume(c))
            .fold(f64::INFINITY, f64::min)
    }

    fn validate(&self) -> Result<(), MeshError> {
        let n = self.vertices.len();
        for (c, cell) in self.cells.iter().enumerate() {
            for &v in &cell[..self.dim + 1] {
                if v >= n {
                    return Err(MeshError::InvalidMesh(format!(
                        "cell {c} references vertex {v} out of {n}"
                    )));
                }
            }
            let vol = self.signed_cell_volume(c);
            if vol <= 0.0 {
                return Err(MeshError::InvalidMesh(format!(
                    "cell {c} has non-positive volume {vol:.3e}"
                )));
            }
        }
        // boundary facets must each match exactly one cell face, and no cell
        // may contribute two faces to the inner surface
        let mut inner_per_cell = vec![0usize; self.cells.len()];
        for (fi, f) in self.inner_facets.iter().enumerate() {
            let owners = self.facet_owner_cells(&f[..self.dim]);
            if owners.len() != 1 {
                return Err(MeshError::InvalidMesh(format!(
                    "inner facet {fi} is a face of {} cells (expected 1)",
                    owners.len()
                )));
            }
            inner_per_cell[owners[0]] += 1;
        }
        if let Some((c, _)) = inner_per_cell.iter().enumerate().find(|(_, &k)| k > 1) {
            return Err(MeshError::InvalidMesh(format!(
                "cell {c} has more than one face on the inner surface"
            )));
        }
        for (fi, f) in self.outer_facets.iter().enumerate() {
            let owners = self.facet_owner_cells(&f[..self.dim]);
            if owners.len() != 1 {
                return Err(MeshError::InvalidMesh(format!(
                    "outer facet {fi} is a face of {} cells (expected 1)",
                    owners.len()
                )));
            }
        }
        // a vertex cannot sit on both boundaries
        let mut inner_set = std::collections::HashSet::new();
        for f in &self.inner_facets {
            inner_set.extend(f[..self.dim].iter().copied());
        }
        for f in &self.outer_facets {
            for &v in &f[..self.dim] {
                if inner_set.contains(&v) {
                    return Err(MeshError::InvalidMesh(format!(
                        "vertex {v} lies on both inner and outer boundary"
                    )));
                }
            }
        }
        Ok(())
    }

    fn facet_owner_cells(&self, facet: &[usize]) -> Vec<usize> {
        let mut key: Vec<usize> = facet.to_vec();
        key.sort_unstable();
        let mut owners = Vec::new();
        'cells: for (c, cell) in self.cells.iter().enumerate() {
            let ids = &cell[..self.dim + 1];
            for &v in &key {
                if !ids.contains(&v) {
                    continue 'cells;
                }
            }
            owners.push(c);
        }
        owners
    }

    /// Replace vertex positions (same connectivity), keeping the original
    /// tangling floor.
    fn with_positions(&self, vertices: Vec<Point>) -> Self {
        let mut m = self.clone();
        m.vertices = vertices;
        m
    }
}

pub fn signed_volume(dim: usize, p: &[Point]) -> f64 {
    match dim {
        2 => {
            let a = sub3(p[1], p[0]);
            let b = sub3(p[2], p[0]);
            0.5 * (a[0] * b[1] - a[1] * b[0])
        }
        3 => {
            let a = sub3(p[1], p[0]);
            let b = sub3(p[2], p[0]);
            let c = sub3(p[3], p[0]);
            (a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0])
                + a[2] * (b[0] * c[1] - b[1] * c[0]))
                / 6.0
        }
        _ => 0.0,
    }
}

/// The induced surface triangulation with a bulk-to-surface index map.
pub fn extract_surface(mesh: &SimplicialMesh) -> SurfaceView {
    let mut bulk_ids: Vec<usize> = mesh
        .inner_facets
        .iter()
        .flat_map(|f| f[..mesh.dim].iter().copied())
        .collect();
    bulk_ids.sort_unstable();
    bulk_ids.dedup();
    let mut inv = std::collections::HashMap::new();
    for (s, &b) in bulk_ids.iter().enumerate() {
        inv.insert(b, s);
    }
    let facets = mesh
        .inner_facets
        .iter()
        .map(|f| {
            let mut out = [0usize; 3];
            for (k, &v) in f[..mesh.dim].iter().enumerate() {
                out[k] = inv[&v];
            }
            out
        })
        .collect();
    SurfaceView {
        dim_s: mesh.dim - 1,
        vertices: bulk_ids.iter().map(|&b| mesh.vertices[b]).collect(),
        facets,
        to_bulk: bulk_ids,
    }
}

/// Discrete harmonic extension: P1 Laplace solve with the given values on the
/// inner-surface vertices and zero on the outer boundary.
pub fn harmonic_extension(
    mesh: &SimplicialMesh,
    inner_values: &[f64],
) -> Result<Vec<f64>, MeshError> {
    let view = extract_surface(mesh);
    let inner_full: Vec<(usize, f64)> = view
        .to_bulk
        .iter()
        .zip(inner_values)
        .map(|(&b, &v)| (b, v))
        .collect();
    let outer: Vec<(usize, f64)> = (0..mesh.n_vertices())
        .filter(|&i| mesh.vertex_tags[i] == VertexTag::OuterBoundary)
        .map(|i| (i, 0.0))
        .collect();
    harmonic_extension_with(mesh, &inner_full, &outer, None)
}

/// Harmonic extension with explicit Dirichlet data on both vertex sets
/// (bulk-indexed pairs). An optional warm start speeds up repeated solves.
pub fn harmonic_extension_with(
    mesh: &SimplicialMesh,
    inner: &[(usize, f64)],
    outer: &[(usize, f64)],
    warm_start: Option<&[f64]>,
) -> Result<Vec<f64>, MeshError> {
    let n = mesh.n_vertices();
    let mut mask = vec![false; n];
    let mut values = vec![0.0; n];
    for &(i, v) in inner.iter().chain(outer.iter()) {
        mask[i] = true;
        values[i] = v;
    }
    let solver = LaplaceSolver::build(mesh, &mask)?;
    solver.solve(&values, warm_start)
}

/// Eliminated P1 Laplace system for one constraint pattern, reusable across
/// several boundary-value vectors (e.g. displacement components).
struct LaplaceSolver {
    mask: Vec<bool>,
    matrix: crate::sparse::CsrMatrix,
    /// (row, constrained col, value) couplings moved to the right-hand side
    boundary_couplings: Vec<(usize, usize, f64)>,
}

impl LaplaceSolver {
    fn build(mesh: &SimplicialMesh, mask: &[bool]) -> Result<Self, MeshError> {
        let n = mesh.n_vertices();
        let mut t = TripletBuffer::with_capacity(n, n, 16 * mesh.n_cells());
        let mut couplings = Vec::new();
        for c in 0..mesh.n_cells() {
            let ids = mesh.cell_vertex_ids(c);
            let verts: Vec<Point> = ids.iter().map(|&i| mesh.vertices[i]).collect();
            let ke = crate::fem::element_stiffness(&verts)
                .map_err(|e| MeshError::InvalidMesh(e.to_string()))?;
            for (li, &gi) in ids.iter().enumerate() {
                if mask[gi] {
                    continue;
                }
                for (lj, &gj) in ids.iter().enumerate() {
                    if mask[gj] {
                        couplings.push((gi, gj, ke.a[li][lj]));
                    } else {
                        t.push(gi, gj, ke.a[li][lj]);
                    }
                }
            }
        }
        for (i, &constrained) in mask.iter().enumerate() {
            if constrained {
                t.push(i, i, 1.0);
            }
        }
        Ok(Self {
            mask: mask.to_vec(),
            matrix: t.to_csr()?,
            boundary_couplings: couplings,
        })
    }

    fn solve(&self, values: &[f64], warm_start: Option<&[f64]>) -> Result<Vec<f64>, MeshError> {
        let n = values.len();
        let mut rhs = vec![0.0; n];
        for &(r, c, v) in &self.boundary_couplings {
            rhs[r] -= v * values[c];
        }
        for i in 0..n {
            if self.mask[i] {
                rhs[i] = values[i];
            }
        }
        Ok(solve_spd(
            &self.matrix,
            &rhs,
            SolveOptions::with_tol(1e-9),
            warm_start,
        )?)
    }
}

/// Move the mesh from t_old to t_old + tau: inner-surface vertices follow the
/// interface velocity and are projected back onto the zero level set, interior
/// vertices follow the harmonic extension of the surface displacement, the
/// outer boundary stays fixed. `warm` (the previous step's motion) seeds the
/// extension solves.
pub fn advance_mesh(
    mesh: &SimplicialMesh,
    geom: &LevelSetGeometry,
    t_old: f64,
    tau: f64,
    mode: VelocityMode,
    sign: WindshieldSign,
    warm: Option<&MeshMotion>,
) -> Result<(SimplicialMesh, MeshMotion), MeshError> {
    let t_new = t_old + tau;
    let view = extract_surface(mesh);
    let n = mesh.n_vertices();

    // surface predictor + projection
    let mut surf_disp: Vec<Vector> = Vec::with_capacity(view.to_bulk.len());
    for &b in &view.to_bulk {
        let x = mesh.vertices[b];
        let v = geom.surface_velocity(x, t_old)?;
        let predictor = add3(x, scale3(v, tau));
        let projected = geom.project_to_surface(predictor, t_new)?;
        surf_disp.push(sub3(projected, x));
    }

    // harmonic extension of each displacement component
    let outer: Vec<(usize, f64)> = (0..n)
        .filter(|&i| mesh.vertex_tags[i] == VertexTag::OuterBoundary)
        .map(|i| (i, 0.0))
        .collect();
    let mut displacement = vec![[0.0; 3]; n];
    for d in 0..mesh.dim {
        let inner: Vec<(usize, f64)> = view
            .to_bulk
            .iter()
            .zip(&surf_disp)
            .map(|(&b, disp)| (b, disp[d]))
            .collect();
        let guess: Option<Vec<f64>> = warm.map(|m| {
            m.node_velocity
                .iter()
                .map(|v| v[d] * tau)
                .collect()
        });
        let ext = harmonic_extension_with(mesh, &inner, &outer, guess.as_deref())?;
        for i in 0..n {
            displacement[i][d] = ext[i];
        }
    }

    let new_positions: Vec<Point> = (0..n)
        .map(|i| add3(mesh.vertices[i], displacement[i]))
        .collect();
    let new_mesh = mesh.with_positions(new_positions);

    // tangling check against the construction-time floor
    for c in 0..new_mesh.n_cells() {
        let vol = new_mesh.signed_cell_volume(c);
        if vol <= mesh.vol_floor {
            return Err(MeshError::TangledMesh {
                time: t_new,
                cell: c,
                volume: vol,
            });
        }
    }

    let node_velocity: Vec<Vector> = displacement.iter().map(|d| scale3(*d, 1.0 / tau)).collect();
    let jump_nodal = match mode {
        VelocityMode::HarmonicExtension => vec![[0.0; 3]; n],
        VelocityMode::Zero => node_velocity.iter().map(|v| scale3(*v, -1.0)).collect(),
    };
    let windshield_nodal = match mode {
        VelocityMode::HarmonicExtension => vec![0.0; view.to_bulk.len()],
        VelocityMode::Zero => view
            .to_bulk
            .iter()
            .map(|&b| {
                let x = new_mesh.vertices[b];
                // normal_velocity is -phi_t/|grad phi|
                let v = geom.normal_velocity(x, t_new)?;
                Ok(match sign {
                    WindshieldSign::JumpVelocity => -v,
                    WindshieldSign::SurfaceVelocity => v,
                })
            })
            .collect::<Result<Vec<f64>, GeometryError>>()?,
    };

    Ok((
        new_mesh,
        MeshMotion {
            prev_positions: mesh.vertices.clone(),
            node_velocity,
            jump_nodal,
            windshield_nodal,
        },
    ))
}

#[derive(Debug, Clone, Copy)]
pub struct QualityReport {
    pub min_volume: f64,
    pub max_aspect_ratio: f64,
    pub min_facet_length: f64,
}

/// Scalar mesh summary. Aspect ratio is longest edge over inradius, scaled so
/// the equilateral simplex scores 1; degenerate cells report min_volume <= 0.
pub fn mesh_quality(mesh: &SimplicialMesh) -> QualityReport {
    let mut min_volume = f64::INFINITY;
    let mut max_aspect: f64 = 0.0;
    for c in 0..mesh.n_cells() {
        let ids = mesh.cell_vertex_ids(c);
        let p: Vec<Point> = ids.iter().map(|&i| mesh.vertices[i]).collect();
        let vol = signed_volume(mesh.dim, &p);
        min_volume = min_volume.min(vol);
        let mut longest: f64 = 0.0;
        for i in 0..p.len() {
            for j in (i + 1)..p.len() {
                longest = longest.max(norm3(sub3(p[i], p[j])));
            }
        }
        let aspect = match mesh.dim {
            2 => {
                let per: f64 = [(0, 1), (1, 2), (2, 0)]
                    .iter()
                    .map(|&(i, j)| norm3(sub3(p[i], p[j])))
                    .sum();
                if vol > 0.0 {
                    let inradius = 2.0 * vol / per;
                    longest / (2.0 * 3.0_f64.sqrt() * inradius)
                } else {
                    f64::INFINITY
                }
            }
            3 => {
                let faces = [[0, 1, 2], [0, 1, 3], [0, 2, 3], [1, 2, 3]];
                let area: f64 = faces
                    .iter()
                    .map(|f| crate::fem::simplex_measure(&[p[f[0]], p[f[1]], p[f[2]]]))
                    .sum();
                if vol > 0.0 {
                    let inradius = 3.0 * vol / area;
                    longest / (2.0 * 6.0_f64.sqrt() * inradius)
                } else {
                    f64::INFINITY
                }
            }
            _ => f64::INFINITY,
        };
        max_aspect = max_aspect.max(aspect);
    }
    let mut min_facet = f64::INFINITY;
    for f in mesh.inner_facets.iter().chain(mesh.outer_facets.iter()) {
        let ids = &f[..mesh.dim];
        for i in 0..ids.len() {
            for j in (i + 1)..ids.len() {
                min_facet = min_facet.min(norm3(sub3(
                    mesh.vertices[ids[i]],
                    mesh.vertices[ids[j]],
                )));
            }
        }
        if mesh.dim == 2 {
            // a 2D facet is a segment; its length is the vertex distance
        }
    }
    QualityReport {
        min_volume,
        max_aspect_ratio: max_aspect,
        min_facet_length: min_facet,
    }
}

/// Structured annulus mesh between the zero level set of phi(. , 0) and the
/// circle of `outer_radius`, with radial grading toward the inner curve.
/// 2D only; 3D meshes are ingested from files.
pub fn build_initial_mesh(
    geom: &LevelSetGeometry,
    outer_radius: f64,
    resolution: usize,
) -> Result<SimplicialMesh, MeshError> {
    if geom.dim != 2 {
        return Err(MeshError::MeshGenFailure(
            "built-in meshing is 2D; ingest 3D meshes from a file".into(),
        ));
    }
    // mean inner radius from a few projected rays
    let mut rho_sum = 0.0;
    for k in 0..8 {
        let th = 2.0 * std::f64::consts::PI * k as f64 / 8.0;
        let p = geom.project_to_surface([th.cos(), th.sin(), 0.0], 0.0)?;
        rho_sum += norm3(p);
    }
    let rho = rho_sum / 8.0;
    if !(rho > 0.0 && rho < outer_radius) {
        return Err(MeshError::MeshGenFailure(format!(
            "inner curve radius {rho:.3} incompatible with outer radius {outer_radius}"
        )));
    }
    let n_theta = (((resolution as f64) * std::f64::consts::PI * rho / (outer_radius - rho))
        .sqrt()
        .round() as usize)
        .max(8);
    let n_layers = (((n_theta as f64) * (outer_radius - rho)
        / (2.0 * std::f64::consts::PI * rho))
        .round() as usize)
        .max(3);
    build_annulus_mesh(geom, outer_radius, n_theta, n_layers)
}

/// Annulus mesher with explicit angular/radial counts. Layer spacing is
/// graded toward the inner curve with exponent 1.4.
pub fn build_annulus_mesh(
    geom: &LevelSetGeometry,
    outer_radius: f64,
    n_theta: usize,
    n_layers: usize,
) -> Result<SimplicialMesh, MeshError> {
    if geom.dim != 2 {
        return Err(MeshError::MeshGenFailure("annulus mesher is 2D".into()));
    }
    if n_theta < 3 || n_layers < 1 {
        return Err(MeshError::MeshGenFailure(format!(
            "resolution too low: {n_theta} angular, {n_layers} radial"
        )));
    }
    let grading = 1.4;
    let mut vertices = Vec::with_capacity((n_layers + 1) * n_theta);
    for k in 0..=n_layers {
        let s = ((k as f64) / (n_layers as f64)).powf(grading);
        for i in 0..n_theta {
            let th = 2.0 * std::f64::consts::PI * (i as f64) / (n_theta as f64);
            let dir = [th.cos(), th.sin(), 0.0];
            if k == 0 {
                let p = geom.project_to_surface(dir, 0.0)?;
                vertices.push(p);
            } else {
                // blend between the projected inner point and the outer circle
                let inner = geom.project_to_surface(dir, 0.0)?;
                let outer = scale3(dir, outer_radius);
                vertices.push([
                    inner[0] + s * (outer[0] - inner[0]),
                    inner[1] + s * (outer[1] - inner[1]),
                    0.0,
                ]);
            }
        }
    }
    let vid = |k: usize, i: usize| k * n_theta + (i % n_theta);
    let mut cells = Vec::with_capacity(2 * n_layers * n_theta);
    for k in 0..n_layers {
        for i in 0..n_theta {
            let a = vid(k, i);
            let b = vid(k, i + 1);
            let c = vid(k + 1, i + 1);
            let d = vid(k + 1, i);
            cells.push([a, b, c, 0]);
            cells.push([a, c, d, 0]);
        }
    }
    for cell in &mut cells {
        let p = [vertices[cell[0]], vertices[cell[1]], vertices[cell[2]]];
        if signed_volume(2, &p) < 0.0 {
            cell.swap(1, 2);
        }
    }
    let inner_facets = (0..n_theta)
        .map(|i| [vid(0, i), vid(0, i + 1), 0])
        .collect();
    let outer_facets = (0..n_theta)
        .map(|i| [vid(n_layers, i), vid(n_layers, i + 1), 0])
        .collect();
    SimplicialMesh::new(2, vertices, cells, inner_facets, outer_facets)
}

/// Concentric disk mesh (no inner surface): ring k holds 6k vertices, so the
/// triangles stay near-equilateral all the way to the center.
pub fn build_disk_mesh(radius: f64, n_rings: usize) -> Result<SimplicialMesh, MeshError> {
    if n_rings < 1 {
        return Err(MeshError::MeshGenFailure("disk needs at least one ring".into()));
    }
    let mut vertices: Vec<Point> = vec![[0.0, 0.0, 0.0]];
    let mut ring_start = vec![0usize; n_rings + 1];
    for k in 1..=n_rings {
        ring_start[k] = vertices.len();
        let r = radius * (k as f64) / (n_rings as f64);
        let count = 6 * k;
        for i in 0..count {
            let th = 2.0 * std::f64::consts::PI * (i as f64) / (count as f64);
            vertices.push([r * th.cos(), r * th.sin(), 0.0]);
        }
    }
    let mut cells: Vec<[usize; 4]> = Vec::new();
    // center fan
    for i in 0..6 {
        let a = ring_start[1] + i;
        let b = ring_start[1] + (i + 1) % 6;
        cells.push([0, a, b, 0]);
    }
    // walk ring k (inner, 6k pts) against ring k+1 (outer, 6(k+1) pts)
    for k in 1..n_rings {
        let n_in = 6 * k;
        let n_out = 6 * (k + 1);
        let s_in = ring_start[k];
        let s_out = ring_start[k + 1];
        let mut i = 0usize; // inner index
        let mut j = 0usize; // outer index
        // advance around both rings by angle, creating the shorter diagonal
        while i < n_in || j < n_out {
            let ang_in = (i + 1) as f64 / n_in as f64;
            let ang_out = (j + 1) as f64 / n_out as f64;
            let vi = s_in + (i % n_in);
            let vj = s_out + (j % n_out);
            if j < n_out && (i == n_in || ang_out <= ang_in) {
                let vj1 = s_out + ((j + 1) % n_out);
                cells.push([vi, vj, vj1, 0]);
                j += 1;
            } else {
                let vi1 = s_in + ((i + 1) % n_in);
                cells.push([vi, vj, vi1, 0]);
                i += 1;
            }
        }
    }
    // orient all cells positively
    for cell in &mut cells {
        let p = [
            vertices[cell[0]],
            vertices[cell[1]],
            vertices[cell[2]],
        ];
        if signed_volume(2, &p) < 0.0 {
            cell.swap(1, 2);
        }
    }
    let n_outer = 6 * n_rings;
    let s_outer = ring_start[n_rings];
    let outer_facets = (0..n_outer)
        .map(|i| [s_outer + i, s_outer + (i + 1) % n_outer, 0])
        .collect();
    SimplicialMesh::new(2, vertices, cells, Vec::new(), outer_facets)
}

/// Text format: `dim N_vertices N_cells N_inner N_outer` header, then vertex
/// coordinate lines, 0-based cell index lines, inner facet lines, outer facet
/// lines, all whitespace-separated.
pub fn write_mesh_text(mesh: &SimplicialMesh) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{} {} {} {} {}",
        mesh.dim,
        mesh.n_vertices(),
        mesh.n_cells(),
        mesh.inner_facets.len(),
        mesh.outer_facets.len()
    );
    for v in &mesh.vertices {
        for d in 0..mesh.dim {
            if d > 0 {
                s.push(' ');
            }
            let _ = write!(s, "{:.17e}", v[d]);
        }
        s.push('\n');
    }
    for c in &mesh.cells {
        let ids: Vec<String> = c[..mesh.dim + 1].iter().map(|i| i.to_string()).collect();
        let _ = writeln!(s, "{}", ids.join(" "));
    }
    for f in mesh.inner_facets.iter().chain(mesh.outer_facets.iter()) {
        let ids: Vec<String> = f[..mesh.dim].iter().map(|i| i.to_string()).collect();
        let _ = writeln!(s, "{}", ids.join(" "));
    }
    s
}

pub fn read_mesh_text(text: &str) -> Result<SimplicialMesh, MeshError> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (lno, header) = lines
        .next()
        .ok_or(MeshError::ParseError {
            line: 1,
            message: "empty mesh file".into(),
        })?;
    let head: Vec<usize> = header
        .split_whitespace()
        .map(|tok| {
            tok.parse::<usize>().map_err(|_| MeshError::ParseError {
                line: lno + 1,
                message: format!("bad header token {tok:?}"),
            })
        })
        .collect::<Result<_, _>>()?;
    if head.len() != 5 {
        return Err(MeshError::ParseError {
            line: lno + 1,
            message: "header must be `dim N_vertices N_cells N_inner N_outer`".into(),
        });
    }
    let (dim, nv, nc, ni, no) = (head[0], head[1], head[2], head[3], head[4]);
    if dim != 2 && dim != 3 {
        return Err(MeshError::ParseError {
            line: lno + 1,
            message: format!("dimension must be 2 or 3, got {dim}"),
        });
    }
    let mut take = |count: usize, field: usize, what: &str| -> Result<Vec<Vec<f64>>, MeshError> {
        let mut rows = Vec::with_capacity(count);
        for _ in 0..count {
            let (lno, line) = lines.next().ok_or(MeshError::ParseError {
                line: 0,
                message: format!("unexpected end of file while reading {what}"),
            })?;
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(|tok| {
                    tok.parse::<f64>().map_err(|_| MeshError::ParseError {
                        line: lno + 1,
                        message: format!("bad {what} token {tok:?}"),
                    })
                })
                .collect::<Result<_, _>>()?;
            if vals.len() != field {
                return Err(MeshError::ParseError {
                    line: lno + 1,
                    message: format!("{what} line needs {field} values, got {}", vals.len()),
                });
            }
            rows.push(vals);
        }
        Ok(rows)
    };
    let vrows = take(nv, dim, "vertex")?;
    let crows = take(nc, dim + 1, "cell")?;
    let irows = take(ni, dim, "inner facet")?;
    let orows = take(no, dim, "outer facet")?;
    let vertices: Vec<Point> = vrows
        .iter()
        .map(|r| {
            let mut p = [0.0; 3];
            p[..dim].copy_from_slice(&r[..dim]);
            p
        })
        .collect();
    let to_ids = |rows: &[Vec<f64>], width: usize| -> Result<Vec<[usize; 4]>, MeshError> {
        rows.iter()
            .map(|r| {
                let mut out = [0usize; 4];
                for (k, &v) in r[..width].iter().enumerate() {
                    if v < 0.0 || v.fract() != 0.0 || v as usize >= nv {
                        return Err(MeshError::ParseError {
                            line: 0,
                            message: format!("index {v} out of range (vertices: {nv})"),
                        });
                    }
                    out[k] = v as usize;
                }
                Ok(out)
            })
            .collect()
    };
    let cells = to_ids(&crows, dim + 1)?;
    let inner: Vec<[usize; 3]> = to_ids(&irows, dim)?
        .into_iter()
        .map(|a| [a[0], a[1], a[2]])
        .collect();
    let outer: Vec<[usize; 3]> = to_ids(&orows, dim)?
        .into_iter()
        .map(|a| [a[0], a[1], a[2]])
        .collect();
    SimplicialMesh::new(dim, vertices, cells, inner, outer)
}

pub fn read_mesh_file(path: &std::path::Path) -> Result<SimplicialMesh, MeshError> {
    let text = std::fs::read_to_string(path)?;
    read_mesh_text(&text)
}
