//! Analytic level-set description of the evolving inner surface and the
//! velocity fields it induces.
//!
//! The surface at time t is the zero set of phi(x, t). The unit normal
//! `nu = -grad(phi)/|grad(phi)|` points out of the bulk annulus into the
//! enclosed region, and `V = -phi_t/|grad(phi)|` is the scalar normal
//! velocity associated with that orientation.

use thiserror::Error;

pub type Point = [f64; 3];
pub type Vector = [f64; 3];

pub const EPS_GRAD: f64 = 1e-10;
pub const TOL_PROJ: f64 = 1e-12;
pub const MAX_PROJ_ITERS: usize = 50;
pub const H_FD: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("non-finite input: x = {x:?}, t = {t}")]
    NonFiniteInput { x: Point, t: f64 },
    #[error("degenerate gradient |grad phi| = {norm:.3e} at {x:?}, t = {t}")]
    DegenerateGradient { x: Point, t: f64, norm: f64 },
    #[error("surface projection did not converge after {iters} iterations (|phi| = {phi:.3e})")]
    NoConvergence { iters: usize, phi: f64 },
}

/// Which analytic level-set family describes the inner surface.
#[derive(Debug, Clone, PartialEq)]
pub enum LevelSetKind {
    /// Unit sphere deformed by a tanh-ramped protrusion along x1.
    TanhDeform,
    /// Stationary sphere |x|^2 - r^2.
    Sphere { radius: f64 },
    /// Quadric with user coefficients
    /// `[c0, cx, cy, cz, cxx, cyy, czz, ct]`:
    /// phi = c0 + cx*x1 + cy*x2 + cz*x3 + cxx*x1^2 + cyy*x2^2 + czz*x3^2 + ct*t.
    /// Derivatives come from central finite differences.
    Custom { coeffs: [f64; 8] },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelSetGeometry {
    pub dim: usize,
    pub kind: LevelSetKind,
}

/// Whether the bulk material moves with the mesh or stays put.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VelocityMode {
    /// Stationary bulk material; the mesh sweeps through it.
    Zero,
    /// Material follows the harmonic extension of the surface velocity
    /// (Lagrangian: no jump between material and mesh).
    HarmonicExtension,
}

impl LevelSetGeometry {
    pub fn tanh_deform(dim: usize) -> Self {
        Self {
            dim,
            kind: LevelSetKind::TanhDeform,
        }
    }

    pub fn sphere(dim: usize, radius: f64) -> Self {
        Self {
            dim,
            kind: LevelSetKind::Sphere { radius },
        }
    }

    pub fn custom(dim: usize, coeffs: [f64; 8]) -> Self {
        Self {
            dim,
            kind: LevelSetKind::Custom { coeffs },
        }
    }

    fn check_input(&self, x: Point, t: f64) -> Result<(), GeometryError> {
        if x.iter().any(|v| !v.is_finite()) || !t.is_finite() {
            return Err(GeometryError::NonFiniteInput { x, t });
        }
        Ok(())
    }

    pub fn eval_phi(&self, x: Point, t: f64) -> Result<f64, GeometryError> {
        self.check_input(x, t)?;
        Ok(self.phi_raw(x, t))
    }

    fn phi_raw(&self, x: Point, t: f64) -> f64 {
        let x3sq = if self.dim == 3 { x[2] * x[2] } else { 0.0 };
        match &self.kind {
            LevelSetKind::TanhDeform => {
                let s = (5.0 * t).tanh();
                let a = x[0] + s * (0.7 - x[1] * x[1]);
                a * a + x[1] * x[1] + x3sq - 1.0
            }
            LevelSetKind::Sphere { radius } => {
                x[0] * x[0] + x[1] * x[1] + x3sq - radius * radius
            }
            LevelSetKind::Custom { coeffs: c } => {
                let mut v = c[0] + c[1] * x[0] + c[2] * x[1] + c[4] * x[0] * x[0]
                    + c[5] * x[1] * x[1]
                    + c[7] * t;
                if self.dim == 3 {
                    v += c[3] * x[2] + c[6] * x[2] * x[2];
                }
                v
            }
        }
    }

    pub fn grad_phi(&self, x: Point, t: f64) -> Result<Vector, GeometryError> {
        self.check_input(x, t)?;
        Ok(match &self.kind {
            LevelSetKind::TanhDeform => {
                let s = (5.0 * t).tanh();
                let a = x[0] + s * (0.7 - x[1] * x[1]);
                let gz = if self.dim == 3 { 2.0 * x[2] } else { 0.0 };
                [2.0 * a, 2.0 * x[1] * (1.0 - 2.0 * a * s), gz]
            }
            LevelSetKind::Sphere { .. } => {
                let gz = if self.dim == 3 { 2.0 * x[2] } else { 0.0 };
                [2.0 * x[0], 2.0 * x[1], gz]
            }
            LevelSetKind::Custom { .. } => {
                let mut g = [0.0; 3];
                for d in 0..self.dim {
                    let mut xp = x;
                    let mut xm = x;
                    xp[d] += H_FD;
                    xm[d] -= H_FD;
                    g[d] = (self.phi_raw(xp, t) - self.phi_raw(xm, t)) / (2.0 * H_FD);
                }
                g
            }
        })
    }

    pub fn phi_t(&self, x: Point, t: f64) -> Result<f64, GeometryError> {
        self.check_input(x, t)?;
        Ok(match &self.kind {
            LevelSetKind::TanhDeform => {
                let s = (5.0 * t).tanh();
                let a = x[0] + s * (0.7 - x[1] * x[1]);
                // d/dt tanh(5t) = 5 sech^2(5t) = 5 (1 - s^2)
                2.0 * a * (0.7 - x[1] * x[1]) * 5.0 * (1.0 - s * s)
            }
            LevelSetKind::Sphere { .. } => 0.0,
            LevelSetKind::Custom { .. } => {
                (self.phi_raw(x, t + H_FD) - self.phi_raw(x, t - H_FD)) / (2.0 * H_FD)
            }
        })
    }

    /// Unit normal `-grad(phi)/|grad(phi)|`, pointing out of the bulk region.
    pub fn surface_normal(&self, x: Point, t: f64) -> Result<Vector, GeometryError> {
        let g = self.grad_phi(x, t)?;
        let n = norm3(g);
        if n <= EPS_GRAD {
            return Err(GeometryError::DegenerateGradient { x, t, norm: n });
        }
        Ok([-g[0] / n, -g[1] / n, -g[2] / n])
    }

    /// Scalar normal velocity `V = -phi_t/|grad(phi)|`.
    pub fn normal_velocity(&self, x: Point, t: f64) -> Result<f64, GeometryError> {
        let g = self.grad_phi(x, t)?;
        let n = norm3(g);
        if n <= EPS_GRAD {
            return Err(GeometryError::DegenerateGradient { x, t, norm: n });
        }
        Ok(-self.phi_t(x, t)? / n)
    }

    /// Velocity vector of the zero set: `-phi_t grad(phi)/|grad(phi)|^2`.
    /// Points where the interface actually travels; equal to `-V nu` in the
    /// sign conventions above.
    pub fn surface_velocity(&self, x: Point, t: f64) -> Result<Vector, GeometryError> {
        let g = self.grad_phi(x, t)?;
        let n2 = dot3(g, g);
        if n2.sqrt() <= EPS_GRAD {
            return Err(GeometryError::DegenerateGradient {
                x,
                t,
                norm: n2.sqrt(),
            });
        }
        let f = -self.phi_t(x, t)? / n2;
        Ok([f * g[0], f * g[1], f * g[2]])
    }

    /// Damped Newton projection of x onto the zero set at time t.
    pub fn project_to_surface(&self, x: Point, t: f64) -> Result<Point, GeometryError> {
        self.check_input(x, t)?;
        let mut y = x;
        let mut phi = self.phi_raw(y, t);
        for _ in 0..MAX_PROJ_ITERS {
            if phi.abs() <= TOL_PROJ {
                return Ok(y);
            }
            let g = self.grad_phi(y, t)?;
            let n2 = dot3(g, g);
            if n2.sqrt() <= EPS_GRAD {
                return Err(GeometryError::NoConvergence {
                    iters: MAX_PROJ_ITERS,
                    phi: phi.abs(),
                });
            }
            let mut step = 1.0;
            loop {
                let cand = [
                    y[0] - step * phi * g[0] / n2,
                    y[1] - step * phi * g[1] / n2,
                    y[2] - step * phi * g[2] / n2,
                ];
                let phi_cand = self.phi_raw(cand, t);
                if phi_cand.abs() < phi.abs() || step < 1.0 / 64.0 {
                    y = cand;
                    phi = phi_cand;
                    break;
                }
                step *= 0.5;
            }
        }
        if phi.abs() <= TOL_PROJ {
            Ok(y)
        } else {
            Err(GeometryError::NoConvergence {
                iters: MAX_PROJ_ITERS,
                phi: phi.abs(),
            })
        }
    }
}

pub fn dot3(a: Vector, b: Vector) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn norm3(a: Vector) -> f64 {
    dot3(a, a).sqrt()
}

pub fn sub3(a: Point, b: Point) -> Vector {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn add3(a: Point, b: Vector) -> Point {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn scale3(a: Vector, s: f64) -> Vector {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn phi_tanh_at_t0_is_unit_sphere() {
        let g = LevelSetGeometry::tanh_deform(3);
        assert_eq!(g.eval_phi([1.0, 0.0, 0.0], 0.0).unwrap(), 0.0);
        assert_eq!(g.eval_phi([0.0, 0.0, 0.0], 0.0).unwrap(), -1.0);
    }

    #[test]
    fn phi_tanh_late_time_limit() {
        // tanh(5t) -> 1: phi((1,0,0)) -> (1 + 0.7)^2 - 1 = 1.89
        let g = LevelSetGeometry::tanh_deform(3);
        let v = g.eval_phi([1.0, 0.0, 0.0], 1e3).unwrap();
        assert!((v - 1.89).abs() < 1e-12);
    }

    #[test]
    fn phi_rejects_non_finite() {
        let g = LevelSetGeometry::tanh_deform(3);
        assert!(g.eval_phi([f64::NAN, 0.0, 0.0], 0.0).is_err());
        assert!(g.eval_phi([0.0, 0.0, 0.0], f64::INFINITY).is_err());
    }

    #[test]
    fn grad_sphere() {
        let g = LevelSetGeometry::sphere(3, 1.0);
        assert_eq!(g.grad_phi([0.0, 1.0, 0.0], 7.5).unwrap(), [0.0, 2.0, 0.0]);
    }

    #[test]
    fn grad_tanh_at_t0() {
        let g = LevelSetGeometry::tanh_deform(3);
        let gr = g.grad_phi([0.0, 1.0, 0.0], 0.0).unwrap();
        assert!((gr[0] - 0.0).abs() < 1e-14);
        assert!((gr[1] - 2.0).abs() < 1e-14);
        assert!((gr[2] - 0.0).abs() < 1e-14);
    }

    #[test]
    fn constant_custom_phi_is_degenerate() {
        let g = LevelSetGeometry::custom(2, [3.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let gr = g.grad_phi([0.3, 0.4, 0.0], 1.0).unwrap();
        assert!(norm3(gr) < 1e-9);
        assert!(matches!(
            g.surface_normal([0.3, 0.4, 0.0], 1.0),
            Err(GeometryError::DegenerateGradient { .. })
        ));
    }

    #[test]
    fn normal_sphere_points_inward() {
        let g = LevelSetGeometry::sphere(3, 1.0);
        let n = g.surface_normal([0.0, 1.0, 0.0], 0.0).unwrap();
        assert!((n[0]).abs() < 1e-14 && (n[1] + 1.0).abs() < 1e-14);
    }

    #[test]
    fn normal_tanh_at_right_pole() {
        let g = LevelSetGeometry::tanh_deform(3);
        let n = g.surface_normal([1.0, 0.0, 0.0], 0.0).unwrap();
        assert!((n[0] + 1.0).abs() < 1e-14 && n[1].abs() < 1e-14 && n[2].abs() < 1e-14);
    }

    #[test]
    fn normal_invariant_under_phi_scaling() {
        // custom quadric = sphere and its 3x scaling
        let a = LevelSetGeometry::custom(2, [-1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0]);
        let b = LevelSetGeometry::custom(2, [-3.0, 0.0, 0.0, 0.0, 3.0, 3.0, 0.0, 0.0]);
        let p = [0.6, 0.8, 0.0];
        let na = a.surface_normal(p, 0.0).unwrap();
        let nb = b.surface_normal(p, 0.0).unwrap();
        for d in 0..3 {
            assert!((na[d] - nb[d]).abs() < 1e-9);
        }
        let va = a.normal_velocity(p, 0.0).unwrap();
        let vb = b.normal_velocity(p, 0.0).unwrap();
        assert!((va - vb).abs() < 1e-9);
    }

    #[test]
    fn velocity_tanh_values() {
        let g = LevelSetGeometry::tanh_deform(3);
        // phi_t = 2*1*0.7*5 = 7, |grad| = 2 at (1,0,0), t=0
        let v = g.normal_velocity([1.0, 0.0, 0.0], 0.0).unwrap();
        assert!((v + 3.5).abs() < 1e-14);
        let v = g.normal_velocity([0.0, 1.0, 0.0], 0.0).unwrap();
        assert!(v.abs() < 1e-14);
        // sech^2(5t) -> 0
        let v = g.normal_velocity([1.0, 0.0, 0.0], 1e3).unwrap();
        assert!(v.abs() < 1e-12);
    }

    #[test]
    fn surface_velocity_matches_true_zero_set_motion() {
        // right pole of the deforming curve travels as x1(t) = 1 - 0.7 tanh(5t)
        let g = LevelSetGeometry::tanh_deform(2);
        let v = g.surface_velocity([1.0, 0.0, 0.0], 0.0).unwrap();
        assert!((v[0] + 3.5).abs() < 1e-13, "expected -3.5, got {}", v[0]);
        assert!(v[1].abs() < 1e-13);
    }

    #[test]
    fn projection_noop_on_surface() {
        let g = LevelSetGeometry::sphere(2, 1.0);
        let y = g.project_to_surface([0.0, 1.0, 0.0], 0.0).unwrap();
        assert_eq!(y, [0.0, 1.0, 0.0]);
    }

    #[test]
    fn projection_radial_on_sphere() {
        let g = LevelSetGeometry::sphere(3, 1.0);
        let y = g.project_to_surface([2.0, 0.0, 0.0], 3.3).unwrap();
        assert!((y[0] - 1.0).abs() < 1e-9 && y[1].abs() < 1e-12 && y[2].abs() < 1e-12);
    }

    #[test]
    fn projection_fails_at_degenerate_point() {
        let g = LevelSetGeometry::sphere(2, 1.0);
        // gradient vanishes at the origin
        assert!(matches!(
            g.project_to_surface([0.0, 0.0, 0.0], 0.0),
            Err(GeometryError::NoConvergence { .. })
        ));
    }

    #[test]
    fn projection_displacement_bound() {
        let g = LevelSetGeometry::sphere(2, 1.0);
        let x = [1.1, 0.0, 0.0];
        let y = g.project_to_surface(x, 0.0).unwrap();
        let phi = g.eval_phi(x, 0.0).unwrap();
        let gn = norm3(g.grad_phi(x, 0.0).unwrap());
        assert!(norm3(sub3(y, x)) <= 2.0 * phi.abs() / gn);
    }

    #[test]
    fn tanh_dim2_matches_dim3_slice() {
        let g2 = LevelSetGeometry::tanh_deform(2);
        let g3 = LevelSetGeometry::tanh_deform(3);
        for &(x, y, t) in &[(0.3, 0.9, 0.2), (-1.1, 0.4, 0.7), (0.9, -0.5, 1.3)] {
            let p = [x, y, 0.0];
            assert_eq!(g2.eval_phi(p, t).unwrap(), g3.eval_phi(p, t).unwrap());
            assert_eq!(
                g2.normal_velocity(p, t).unwrap(),
                g3.normal_velocity(p, t).unwrap()
            );
        }
    }

    proptest! {
        #[test]
        fn normals_are_unit_where_defined(x in -1.5f64..1.5, y in -1.5f64..1.5, t in 0.0f64..1.0) {
            let g = LevelSetGeometry::tanh_deform(2);
            let p = [x, y, 0.0];
            if let Ok(n) = g.surface_normal(p, t) {
                prop_assert!((norm3(n) - 1.0).abs() <= 1e-12);
            }
        }
    }
}
