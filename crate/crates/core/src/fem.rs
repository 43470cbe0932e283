//! P1 finite element building blocks and assembly on bulk cells and surface
//! facets, including the ALE advection and windshield boundary terms.
//!
//! Element matrices are exact closed forms for P1 x P1 and grad x grad
//! products; terms with interpolated coefficients (the jump fields) use the
//! vertex quadrature rule, which is first-order consistent.

use crate::geometry::{dot3, Point, Vector};
use crate::mesh::{MeshMotion, SimplicialMesh, SurfaceView};
use crate::sparse::TripletBuffer;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FemError {
    #[error("degenerate simplex (measure {measure:.3e})")]
    DegenerateSimplex { measure: f64 },
}

/// Dense element matrix for a k-simplex (up to 4 nodes).
#[derive(Debug, Clone, Copy)]
pub struct ElementMatrix {
    pub n: usize,
    pub a: [[f64; 4]; 4],
}

impl ElementMatrix {
    fn zero(n: usize) -> Self {
        Self { n, a: [[0.0; 4]; 4] }
    }

    pub fn total_sum(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                s += self.a[i][j];
            }
        }
        s
    }
}

const DEGENERACY_FLOOR: f64 = 1e-300;

/// Unsigned measure of the k-simplex spanned by `verts` (k = verts.len()-1),
/// embedded in up to three ambient dimensions: sqrt(det Gram)/k!.
pub fn simplex_measure(verts: &[Point]) -> f64 {
    let k = verts.len() - 1;
    let e: Vec<Vector> = (1..=k)
        .map(|i| crate::geometry::sub3(verts[i], verts[0]))
        .collect();
    let mut g = [[0.0; 3]; 3];
    for i in 0..k {
        for j in 0..k {
            g[i][j] = dot3(e[i], e[j]);
        }
    }
    let det = match k {
        1 => g[0][0],
        2 => g[0][0] * g[1][1] - g[0][1] * g[1][0],
        3 => {
            g[0][0] * (g[1][1] * g[2][2] - g[1][2] * g[2][1])
                - g[0][1] * (g[1][0] * g[2][2] - g[1][2] * g[2][0])
                + g[0][2] * (g[1][0] * g[2][1] - g[1][1] * g[2][0])
        }
        _ => 0.0,
    };
    if det <= 0.0 {
        return 0.0;
    }
    let fact = [1.0, 1.0, 2.0, 6.0][k];
    det.sqrt() / fact
}

/// Exact integrals of barycentric products: M_ij = |K| (1 + delta_ij) / ((k+1)(k+2)).
pub fn element_mass(verts: &[Point]) -> Result<ElementMatrix, FemError> {
    let k = verts.len() - 1;
    let measure = simplex_measure(verts);
    if measure <= DEGENERACY_FLOOR {
        return Err(FemError::DegenerateSimplex { measure });
    }
    let mut m = ElementMatrix::zero(k + 1);
    let base = measure / ((k + 1) as f64 * (k + 2) as f64);
    for i in 0..=k {
        for j in 0..=k {
            m.a[i][j] = base * if i == j { 2.0 } else { 1.0 };
        }
    }
    Ok(m)
}

/// Barycentric basis gradients in ambient coordinates (tangential for facets
/// embedded in a higher dimension). grad(lambda_0) is the negative sum of the
/// others, so element stiffness rows vanish exactly.
pub fn basis_gradients(verts: &[Point]) -> Result<Vec<Vector>, FemError> {
    let k = verts.len() - 1;
    let e: Vec<Vector> = (1..=k)
        .map(|i| crate::geometry::sub3(verts[i], verts[0]))
        .collect();
    let mut g = [[0.0; 3]; 3];
    for i in 0..k {
        for j in 0..k {
            g[i][j] = dot3(e[i], e[j]);
        }
    }
    // invert the k x k Gram matrix
    let ginv = match k {
        1 => {
            let d = g[0][0];
            if d <= DEGENERACY_FLOOR {
                return Err(FemError::DegenerateSimplex { measure: 0.0 });
            }
            [[1.0 / d, 0.0, 0.0], [0.0; 3], [0.0; 3]]
        }
        2 => {
            let d = g[0][0] * g[1][1] - g[0][1] * g[1][0];
            if d <= DEGENERACY_FLOOR {
                return Err(FemError::DegenerateSimplex { measure: 0.0 });
            }
            [
                [g[1][1] / d, -g[0][1] / d, 0.0],
                [-g[1][0] / d, g[0][0] / d, 0.0],
                [0.0; 3],
            ]
        }
        3 => {
            let det = g[0][0] * (g[1][1] * g[2][2] - g[1][2] * g[2][1])
                - g[0][1] * (g[1][0] * g[2][2] - g[1][2] * g[2][0])
                + g[0][2] * (g[1][0] * g[2][1] - g[1][1] * g[2][0]);
            if det <= DEGENERACY_FLOOR {
                return Err(FemError::DegenerateSimplex { measure: 0.0 });
            }
            let mut inv = [[0.0; 3]; 3];
            inv[0][0] = (g[1][1] * g[2][2] - g[1][2] * g[2][1]) / det;
            inv[0][1] = (g[0][2] * g[2][1] - g[0][1] * g[2][2]) / det;
            inv[0][2] = (g[0][1] * g[1][2] - g[0][2] * g[1][1]) / det;
            inv[1][0] = (g[1][2] * g[2][0] - g[1][0] * g[2][2]) / det;
            inv[1][1] = (g[0][0] * g[2][2] - g[0][2] * g[2][0]) / det;
            inv[1][2] = (g[0][2] * g[1][0] - g[0][0] * g[1][2]) / det;
            inv[2][0] = (g[1][0] * g[2][1] - g[1][1] * g[2][0]) / det;
            inv[2][1] = (g[0][1] * g[2][0] - g[0][0] * g[2][1]) / det;
            inv[2][2] = (g[0][0] * g[1][1] - g[0][1] * g[1][0]) / det;
            inv
        }
        _ => return Err(FemError::DegenerateSimplex { measure: 0.0 }),
    };
    // grad(lambda_i) = sum_j E_j Ginv[j][i-1]
    let mut grads = vec![[0.0; 3]; k + 1];
    for i in 1..=k {
        let mut gr = [0.0; 3];
        for j in 0..k {
            for d in 0..3 {
                gr[d] += e[j][d] * ginv[j][i - 1];
            }
        }
        grads[i] = gr;
    }
    for d in 0..3 {
        grads[0][d] = -(1..=k).map(|i| grads[i][d]).sum::<f64>();
    }
    Ok(grads)
}

/// Exact integrals of gradient products: K_ij = |K| grad(lambda_i).grad(lambda_j).
pub fn element_stiffness(verts: &[Point]) -> Result<ElementMatrix, FemError> {
    let k = verts.len() - 1;
    let measure = simplex_measure(verts);
    if measure <= DEGENERACY_FLOOR {
        return Err(FemError::DegenerateSimplex { measure });
    }
    let grads = basis_gradients(verts)?;
    let mut m = ElementMatrix::zero(k + 1);
    for i in 0..=k {
        for j in 0..=k {
            m.a[i][j] = measure * dot3(grads[i], grads[j]);
        }
    }
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpaceKind {
    Bulk,
    Surface,
}

/// Nodal P1 space on the bulk mesh or on the induced surface mesh.
#[derive(Debug, Clone)]
pub struct P1Space {
    pub kind: SpaceKind,
    pub dof_count: usize,
    /// true at outer-boundary vertices when the outer condition is Dirichlet;
    /// always empty (all false) for surface spaces.
    pub dirichlet_mask: Vec<bool>,
}

impl P1Space {
    pub fn bulk(mesh: &SimplicialMesh, dirichlet_outer: bool) -> Self {
        let mask = if dirichlet_outer {
            mesh.vertex_tags()
                .iter()
                .map(|t| *t == crate::mesh::VertexTag::OuterBoundary)
                .collect()
        } else {
            vec![false; mesh.n_vertices()]
        };
        Self {
            kind: SpaceKind::Bulk,
            dof_count: mesh.n_vertices(),
            dirichlet_mask: mask,
        }
    }

    pub fn surface(view: &SurfaceView) -> Self {
        Self {
            kind: SpaceKind::Surface,
            dof_count: view.vertices.len(),
            dirichlet_mask: vec![false; view.vertices.len()],
        }
    }
}

/// Assembled bulk operators at one mesh level, kept as triplets so the time
/// stepper can combine them with step-dependent scalings.
pub struct BulkOperators {
    pub mass: TripletBuffer,
    pub stiffness: TripletBuffer,
    pub ale: TripletBuffer,
    pub windshield: TripletBuffer,
}

/// Bulk mass (delta_omega-weighted), stiffness, ALE advection from the nodal
/// jump field, and the windshield boundary term from the nodal jump-velocity
/// scalar. The step's left-hand side is M + tau (A + B_ale) + tau R_wind.
pub fn assemble_bulk(
    mesh: &SimplicialMesh,
    motion: &MeshMotion,
    view: &SurfaceView,
    delta_omega: f64,
) -> Result<BulkOperators, FemError> {
    let n = mesh.n_vertices();
    let nc = mesh.n_cells();
    let mut mass = TripletBuffer::with_capacity(n, n, 16 * nc);
    let mut stiffness = TripletBuffer::with_capacity(n, n, 16 * nc);
    let has_jump = motion.jump_nodal.iter().any(|j| dot3(*j, *j) != 0.0);
    let mut ale = TripletBuffer::with_capacity(n, n, if has_jump { 16 * nc } else { 0 });
    let mut windshield = TripletBuffer::new(n, n);

    let mut verts: Vec<Point> = Vec::with_capacity(4);
    for c in 0..nc {
        let ids = mesh.cell_vertex_ids(c);
        verts.clear();
        verts.extend(ids.iter().map(|&i| mesh.vertices()[i]));
        let me = element_mass(&verts)?;
        let ke = element_stiffness(&verts)?;
        for (li, &gi) in ids.iter().enumerate() {
            for (lj, &gj) in ids.iter().enumerate() {
                mass.push(gi, gj, delta_omega * me.a[li][lj]);
                stiffness.push(gi, gj, ke.a[li][lj]);
            }
        }
        if has_jump {
            let measure = simplex_measure(&verts);
            let grads = basis_gradients(&verts)?;
            let w = measure / ids.len() as f64;
            // row j (test), column i (vertex-rule point): -dO * w * J_i . grad(chi_j)
            for (lj, &gj) in ids.iter().enumerate() {
                for &gi in ids {
                    let v = -delta_omega * w * dot3(motion.jump_nodal[gi], grads[lj]);
                    if v != 0.0 {
                        ale.push(gj, gi, v);
                    }
                }
            }
        }
    }

    if motion.windshield_nodal.iter().any(|&j| j != 0.0) {
        // vertex rule on surface facets makes this term diagonal
        let weights = surface_vertex_weights(view);
        for (s, &b) in view.to_bulk.iter().enumerate() {
            let v = delta_omega * weights[s] * motion.windshield_nodal[s];
            if v != 0.0 {
                windshield.push(b, b, v);
            }
        }
    }

    Ok(BulkOperators {
        mass,
        stiffness,
        ale,
        windshield,
    })
}

/// Surface mass and stiffness triplets on the induced surface mesh
/// (surface-local dof numbering).
pub fn assemble_surface_raw(
    view: &SurfaceView,
) -> Result<(TripletBuffer, TripletBuffer), FemError> {
    let n = view.vertices.len();
    let mut mass = TripletBuffer::with_capacity(n, n, 9 * view.facets.len());
    let mut stiffness = TripletBuffer::with_capacity(n, n, 9 * view.facets.len());
    let mut verts: Vec<Point> = Vec::with_capacity(3);
    for f in &view.facets {
        let ids = &f[..view.facet_nodes()];
        verts.clear();
        verts.extend(ids.iter().map(|&i| view.vertices[i]));
        let me = element_mass(&verts)?;
        let ke = element_stiffness(&verts)?;
        for (li, &gi) in ids.iter().enumerate() {
            for (lj, &gj) in ids.iter().enumerate() {
                mass.push(gi, gj, me.a[li][lj]);
                stiffness.push(gi, gj, ke.a[li][lj]);
            }
        }
    }
    Ok((mass, stiffness))
}

/// Consistent surface mass matrix and the implicit-diffusion left-hand side
/// M + tau * delta_diff * A.
pub fn assemble_surface(
    view: &SurfaceView,
    delta_diff: f64,
    tau: f64,
) -> Result<(crate::sparse::CsrMatrix, crate::sparse::CsrMatrix), FemError> {
    let (mass, stiffness) = assemble_surface_raw(view)?;
    let mut lhs = TripletBuffer::new(mass.n_rows(), mass.n_cols());
    lhs.extend_scaled(&mass, 1.0);
    lhs.extend_scaled(&stiffness, tau * delta_diff);
    Ok((mass.to_csr().expect("validated indices"), lhs.to_csr().expect("validated indices")))
}

/// M_surf * I_h(f): the load vector of nodal data f against the surface basis.
pub fn surface_load(view: &SurfaceView, f: &[f64]) -> Result<Vec<f64>, FemError> {
    let (mass, _) = assemble_surface_raw(view)?;
    let m = mass.to_csr().expect("validated indices");
    Ok(m.spmv(f).expect("length checked by construction"))
}

/// Vertex-rule (lumped) surface weights: w_i = sum over facets of |s|/(k+1).
pub fn surface_vertex_weights(view: &SurfaceView) -> Vec<f64> {
    let mut w = vec![0.0; view.vertices.len()];
    let nodes = view.facet_nodes();
    let mut verts: Vec<Point> = Vec::with_capacity(3);
    for f in &view.facets {
        let ids = &f[..nodes];
        verts.clear();
        verts.extend(ids.iter().map(|&i| view.vertices[i]));
        let share = simplex_measure(&verts) / nodes as f64;
        for &i in ids {
            w[i] += share;
        }
    }
    w
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OuterBc {
    Neumann,
    Dirichlet(f64),
}

/// Neumann is natural (no-op); Dirichlet eliminates outer rows/columns with a
/// right-hand-side correction so the constrained dofs solve exactly to u_D.
pub fn apply_outer_bc(
    space: &P1Space,
    system: &mut TripletBuffer,
    rhs: &mut [f64],
    mode: OuterBc,
) {
    match mode {
        OuterBc::Neumann => {}
        OuterBc::Dirichlet(u_d) => {
            system.eliminate_dirichlet(&space.dirichlet_mask, u_d, rhs);
        }
    }
}

/// Scatter a surface-indexed vector into a bulk-sized vector (zero elsewhere).
pub fn scatter_to_bulk(view: &SurfaceView, surf: &[f64], n_bulk: usize) -> Vec<f64> {
    let mut out = vec![0.0; n_bulk];
    for (s, &b) in view.to_bulk.iter().enumerate() {
        out[b] = surf[s];
    }
    out
}

/// Restrict a bulk vector to the surface dofs (the discrete trace).
pub fn restrict_to_surface(view: &SurfaceView, bulk: &[f64]) -> Vec<f64> {
    view.to_bulk.iter().map(|&b| bulk[b]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh;

    const UNIT_TRIANGLE: [Point; 3] = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];

    #[test]
    fn mass_unit_right_triangle() {
        let m = element_mass(&UNIT_TRIANGLE).unwrap();
        let expect = [[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((m.a[i][j] - expect[i][j] / 24.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn mass_segment() {
        let h = 0.37;
        let m = element_mass(&[[0.0, 0.0, 0.0], [h, 0.0, 0.0]]).unwrap();
        assert!((m.a[0][0] - 2.0 * h / 6.0).abs() < 1e-15);
        assert!((m.a[0][1] - h / 6.0).abs() < 1e-15);
    }

    #[test]
    fn mass_total_is_measure() {
        let verts = [[0.2, 0.1, 0.0], [1.4, 0.3, 0.0], [0.5, 1.9, 0.0]];
        let m = element_mass(&verts).unwrap();
        assert!((m.total_sum() - simplex_measure(&verts)).abs() < 1e-14);
    }

    #[test]
    fn stiffness_unit_right_triangle() {
        let k = element_stiffness(&UNIT_TRIANGLE).unwrap();
        let expect = [[2.0, -1.0, -1.0], [-1.0, 1.0, 0.0], [-1.0, 0.0, 1.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((k.a[i][j] - expect[i][j] / 2.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn stiffness_segment() {
        let h = 0.25;
        let k = element_stiffness(&[[1.0, 2.0, 0.0], [1.0 + h, 2.0, 0.0]]).unwrap();
        assert!((k.a[0][0] - 1.0 / h).abs() < 1e-12);
        assert!((k.a[0][1] + 1.0 / h).abs() < 1e-12);
    }

    #[test]
    fn stiffness_annihilates_constants() {
        let verts = [
            [0.2, 0.1, 0.3],
            [1.4, 0.3, -0.2],
            [0.5, 1.9, 0.4],
            [0.7, 0.6, 1.5],
        ];
        let k = element_stiffness(&verts).unwrap();
        for i in 0..4 {
            let row: f64 = (0..4).map(|j| k.a[i][j]).sum();
            assert!(row.abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_simplex_rejected() {
        let collinear = [[0.0, 0.0, 0.0], [1.0, 1.0, 0.0], [2.0, 2.0, 0.0]];
        assert!(matches!(
            element_mass(&collinear),
            Err(FemError::DegenerateSimplex { .. })
        ));
        assert!(element_stiffness(&collinear).is_err());
    }

    fn square_fourgon_view() -> SurfaceView {
        // unit circle approximated by the regular 4-gon
        let verts = vec![
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [-1.0, 0.0, 0.0],
            [0.0, -1.0, 0.0],
        ];
        SurfaceView {
            dim_s: 1,
            vertices: verts,
            facets: vec![[0, 1, 0], [1, 2, 0], [2, 3, 0], [3, 0, 0]],
            to_bulk: vec![0, 1, 2, 3],
        }
    }

    #[test]
    fn surface_mass_total_is_perimeter() {
        let view = square_fourgon_view();
        let (m, lhs) = assemble_surface(&view, 0.0, 0.1).unwrap();
        let p = 4.0 * 2.0_f64.sqrt();
        assert!((m.total_sum() - p).abs() < 1e-12);
        // delta_diff = 0: lhs == mass
        assert_eq!(m.to_dense(), lhs.to_dense());
    }

    #[test]
    fn surface_lhs_preserves_constants() {
        let view = square_fourgon_view();
        let (m, lhs) = assemble_surface(&view, 0.7, 0.05).unwrap();
        let ones = vec![1.0; 4];
        let b = m.spmv(&ones).unwrap();
        let x = crate::sparse::solve_spd(&lhs, &b, crate::sparse::SolveOptions::default(), None)
            .unwrap();
        for xi in &x {
            assert!((xi - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn surface_load_values() {
        let view = square_fourgon_view();
        let zero = surface_load(&view, &[0.0; 4]).unwrap();
        assert!(zero.iter().all(|&v| v == 0.0));
        let ones = surface_load(&view, &[1.0; 4]).unwrap();
        let total: f64 = ones.iter().sum();
        assert!((total - 4.0 * 2.0_f64.sqrt()).abs() < 1e-12);
        // linearity
        let f = [0.3, -1.2, 2.0, 0.7];
        let g = [1.1, 0.4, -0.6, 0.9];
        let fg: Vec<f64> = f.iter().zip(&g).map(|(a, b)| a + b).collect();
        let lf = surface_load(&view, &f).unwrap();
        let lg = surface_load(&view, &g).unwrap();
        let lfg = surface_load(&view, &fg).unwrap();
        for i in 0..4 {
            assert!((lfg[i] - lf[i] - lg[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn dirichlet_elimination_toy_system() {
        // [[2,-1],[-1,2]] x = 0 with x_1 = 1 pinned -> x = (0.5, 1)
        let mut t = TripletBuffer::new(2, 2);
        t.push(0, 0, 2.0);
        t.push(0, 1, -1.0);
        t.push(1, 0, -1.0);
        t.push(1, 1, 2.0);
        let mut rhs = vec![0.0, 0.0];
        let space = P1Space {
            kind: SpaceKind::Bulk,
            dof_count: 2,
            dirichlet_mask: vec![false, true],
        };
        apply_outer_bc(&space, &mut t, &mut rhs, OuterBc::Dirichlet(1.0));
        let a = t.to_csr().unwrap();
        let x = crate::sparse::solve_general(&a, &rhs, Default::default(), None).unwrap();
        assert!((x[0] - 0.5).abs() < 1e-12);
        assert!((x[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn neumann_is_noop() {
        let mut t = TripletBuffer::new(2, 2);
        t.push(0, 0, 2.0);
        let mut rhs = vec![1.0, 2.0];
        let space = P1Space {
            kind: SpaceKind::Bulk,
            dof_count: 2,
            dirichlet_mask: vec![false, true],
        };
        apply_outer_bc(&space, &mut t, &mut rhs, OuterBc::Neumann);
        assert_eq!(t.entries().len(), 1);
        assert_eq!(rhs, vec![1.0, 2.0]);
    }

    #[test]
    fn bulk_assembly_invariants_on_annulus() {
        let geom = crate::geometry::LevelSetGeometry::sphere(2, 1.0);
        let m = mesh::build_initial_mesh(&geom, 2.0, 200).unwrap();
        let view = mesh::extract_surface(&m);
        let motion = MeshMotion::stationary(&m, &view);
        let ops = assemble_bulk(&m, &motion, &view, 0.25).unwrap();

        // zero jump and windshield data -> no ALE, no windshield entries
        assert_eq!(ops.ale.entries().len(), 0);
        assert_eq!(ops.windshield.entries().len(), 0);

        let mass = ops.mass.to_csr().unwrap();
        let stiff = ops.stiffness.to_csr().unwrap();
        // mass total = delta_omega * |Omega_h|
        let area: f64 = (0..m.n_cells())
            .map(|c| {
                let ids = m.cell_vertex_ids(c);
                let v: Vec<Point> = ids.iter().map(|&i| m.vertices()[i]).collect();
                simplex_measure(&v)
            })
            .sum();
        assert!((mass.total_sum() - 0.25 * area).abs() < 1e-12 * area);
        // stiffness row sums vanish
        assert!(stiff.max_abs_row_sum_deviation() <= 1e-12 * stiff.max_abs());
    }

    #[test]
    fn ale_columns_sum_to_constant_field_integral() {
        // single-cell mesh with constant jump e1: sum_i B[j][i] = -dO |K| d(lambda_j)/dx1
        let m = mesh::SimplicialMesh::from_raw_unchecked(
            2,
            vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
            vec![[0, 1, 2, 0]],
            vec![],
            vec![],
        );
        let view = mesh::extract_surface(&m);
        let mut motion = MeshMotion::stationary(&m, &view);
        motion.jump_nodal = vec![[1.0, 0.0, 0.0]; 3];
        let delta_omega = 0.7;
        let ops = assemble_bulk(&m, &motion, &view, delta_omega).unwrap();
        let b = ops.ale.to_csr().unwrap().to_dense();
        // gradients on the unit right triangle: (-1,-1), (1,0), (0,1)
        let dx = [-1.0, 1.0, 0.0];
        for j in 0..3 {
            let row_total: f64 = (0..3).map(|i| b[j][i]).sum();
            assert!((row_total - (-delta_omega * 0.5 * dx[j])).abs() < 1e-14);
        }
    }

    #[test]
    fn trace_roundtrip_is_identity() {
        let geom = crate::geometry::LevelSetGeometry::sphere(2, 1.0);
        let m = mesh::build_initial_mesh(&geom, 2.0, 300).unwrap();
        let view = mesh::extract_surface(&m);
        let surf: Vec<f64> = (0..view.vertices.len()).map(|i| i as f64 * 0.5 - 3.0).collect();
        let bulk = scatter_to_bulk(&view, &surf, m.n_vertices());
        let back = restrict_to_surface(&view, &bulk);
        assert_eq!(surf, back);
    }

    #[test]
    fn pinned_laplace_solve_gives_constant() {
        let geom = crate::geometry::LevelSetGeometry::sphere(2, 1.0);
        let m = mesh::build_initial_mesh(&geom, 2.0, 200).unwrap();
        let view = mesh::extract_surface(&m);
        let motion = MeshMotion::stationary(&m, &view);
        let ops = assemble_bulk(&m, &motion, &view, 1.0).unwrap();
        let mut t = TripletBuffer::new(m.n_vertices(), m.n_vertices());
        t.extend_scaled(&ops.stiffness, 1.0);
        let mut rhs = vec![0.0; m.n_vertices()];
        let mut mask = vec![false; m.n_vertices()];
        mask[0] = true;
        t.eliminate_dirichlet(&mask, 2.5, &mut rhs);
        let a = t.to_csr().unwrap();
        let x = crate::sparse::solve_spd(
            &a,
            &rhs,
            crate::sparse::SolveOptions::with_tol(1e-12),
            None,
        )
        .unwrap();
        for xi in &x {
            assert!((xi - 2.5).abs() < 1e-8);
        }
    }
}
