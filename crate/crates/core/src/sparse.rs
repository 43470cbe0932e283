//! Minimal sparse linear algebra: triplet accumulation, CSR storage and
//! Jacobi-preconditioned Krylov solvers (CG for SPD systems, BiCGStab for
//! the nonsymmetric ones).

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SparseError {
    #[error("triplet index ({row},{col}) out of range for {n_rows}x{n_cols} matrix")]
    IndexOutOfRange {
        row: usize,
        col: usize,
        n_rows: usize,
        n_cols: usize,
    },
    #[error("dimension mismatch: matrix is {n_rows}x{n_cols}, vector has length {len}")]
    DimensionMismatch {
        n_rows: usize,
        n_cols: usize,
        len: usize,
    },
    #[error("solver did not converge after {iters} iterations (relative residual {residual:.3e})")]
    NoConvergence { iters: usize, residual: f64 },
    #[error("non-finite value encountered during solve (iteration {iter})")]
    NonFiniteBreakdown { iter: usize },
}

/// Unordered (row, col, value) entries; duplicates are summed on conversion.
#[derive(Debug, Clone)]
pub struct TripletBuffer {
    n_rows: usize,
    n_cols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletBuffer {
    pub fn new(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            entries: Vec::new(),
        }
    }

    pub fn with_capacity(n_rows: usize, n_cols: usize, cap: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            entries: Vec::with_capacity(cap),
        }
    }

    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        self.entries.push((row, col, value));
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    /// Append every entry of `other`, scaled by `alpha`.
    pub fn extend_scaled(&mut self, other: &TripletBuffer, alpha: f64) {
        self.entries
            .extend(other.entries.iter().map(|&(r, c, v)| (r, c, alpha * v)));
    }

    /// Drop rows/columns of constrained dofs and put the boundary value into
    /// the right-hand side, leaving a unit diagonal on the constrained rows.
    pub fn eliminate_dirichlet(&mut self, mask: &[bool], value: f64, rhs: &mut [f64]) {
        let values = vec![value; mask.len()];
        self.eliminate_dirichlet_values(mask, &values, rhs);
    }

    /// Same as [`eliminate_dirichlet`](Self::eliminate_dirichlet) with a
    /// per-dof boundary value.
    pub fn eliminate_dirichlet_values(&mut self, mask: &[bool], values: &[f64], rhs: &mut [f64]) {
        self.entries.retain(|&(r, c, v)| {
            if mask[r] {
                false
            } else if mask[c] {
                rhs[r] -= v * values[c];
                false
            } else {
                true
            }
        });
        for (i, &constrained) in mask.iter().enumerate() {
            if constrained {
                self.entries.push((i, i, 1.0));
                rhs[i] = values[i];
            }
        }
    }

    pub fn to_csr(&self) -> Result<CsrMatrix, SparseError> {
        CsrMatrix::from_triplets(self)
    }
}

/// Compressed sparse row matrix; columns sorted and unique within each row.
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn from_triplets(t: &TripletBuffer) -> Result<Self, SparseError> {
        for &(r, c, _) in &t.entries {
            if r >= t.n_rows || c >= t.n_cols {
                return Err(SparseError::IndexOutOfRange {
                    row: r,
                    col: c,
                    n_rows: t.n_rows,
                    n_cols: t.n_cols,
                });
            }
        }
        let mut order: Vec<usize> = (0..t.entries.len()).collect();
        order.sort_unstable_by_key(|&i| (t.entries[i].0, t.entries[i].1));

        let mut row_ptr = vec![0usize; t.n_rows + 1];
        let mut col_idx = Vec::with_capacity(t.entries.len());
        let mut values = Vec::with_capacity(t.entries.len());
        let mut last: Option<(usize, usize)> = None;
        for &i in &order {
            let (r, c, v) = t.entries[i];
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] = col_idx.len();
                last = Some((r, c));
            }
        }
        // rows with no entries inherit the previous offset
        for r in 1..=t.n_rows {
            if row_ptr[r] < row_ptr[r - 1] {
                row_ptr[r] = row_ptr[r - 1];
            }
        }
        Ok(Self {
            n_rows: t.n_rows,
            n_cols: t.n_cols,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.row_ptr[r], self.row_ptr[r + 1]);
        (&self.col_idx[a..b], &self.values[a..b])
    }

    /// y = A x
    pub fn spmv(&self, x: &[f64]) -> Result<Vec<f64>, SparseError> {
        if x.len() != self.n_cols {
            return Err(SparseError::DimensionMismatch {
                n_rows: self.n_rows,
                n_cols: self.n_cols,
                len: x.len(),
            });
        }
        let mut y = vec![0.0; self.n_rows];
        self.spmv_into(x, &mut y);
        Ok(y)
    }

    fn spmv_into(&self, x: &[f64], y: &mut [f64]) {
        for r in 0..self.n_rows {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            y[r] = acc;
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n_rows];
        for r in 0..self.n_rows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                if self.col_idx[k] == r {
                    d[r] = self.values[k];
                }
            }
        }
        d
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut dense = vec![vec![0.0; self.n_cols]; self.n_rows];
        for r in 0..self.n_rows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                dense[r][self.col_idx[k]] = self.values[k];
            }
        }
        dense
    }

    /// Sum of all stored entries (1^T A 1).
    pub fn total_sum(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Max over rows of |sum of the row entries|.
    pub fn max_abs_row_sum_deviation(&self) -> f64 {
        (0..self.n_rows)
            .map(|r| {
                self.values[self.row_ptr[r]..self.row_ptr[r + 1]]
                    .iter()
                    .sum::<f64>()
                    .abs()
            })
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    pub tol: f64,
    /// 0 means the default 10*n.
    pub max_iters: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iters: 0,
        }
    }
}

impl SolveOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, max_iters: 0 }
    }

    fn iters_for(&self, n: usize) -> usize {
        if self.max_iters == 0 {
            10 * n.max(1)
        } else {
            self.max_iters
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn jacobi(diag: &[f64]) -> Vec<f64> {
    diag.iter()
        .map(|&d| if d.abs() > f64::MIN_POSITIVE { 1.0 / d } else { 1.0 })
        .collect()
}

fn check_dims(a: &CsrMatrix, b: &[f64]) -> Result<(), SparseError> {
    if a.n_rows != a.n_cols || b.len() != a.n_rows {
        return Err(SparseError::DimensionMismatch {
            n_rows: a.n_rows,
            n_cols: a.n_cols,
            len: b.len(),
        });
    }
    Ok(())
}

/// Verify the advertised residual contract with an actual spmv.
fn verify_residual(
    a: &CsrMatrix,
    b: &[f64],
    x: &[f64],
    tol: f64,
    iters: usize,
) -> Result<(), SparseError> {
    let ax = a.spmv(x)?;
    let mut res = 0.0;
    for i in 0..b.len() {
        res += (b[i] - ax[i]) * (b[i] - ax[i]);
    }
    let res = res.sqrt();
    let nb = norm(b);
    if !res.is_finite() {
        return Err(SparseError::NonFiniteBreakdown { iter: iters });
    }
    // allow a whisker of slack over the iteration's own estimate
    if res > tol * nb.max(f64::MIN_POSITIVE) * 1.001 && res > 1e-300 {
        return Err(SparseError::NoConvergence {
            iters,
            residual: res / nb.max(f64::MIN_POSITIVE),
        });
    }
    Ok(())
}

/// Preconditioned conjugate gradients for symmetric positive definite systems.
/// Returns x with ||b - Ax||_2 <= tol * ||b||_2.
pub fn solve_spd(
    a: &CsrMatrix,
    b: &[f64],
    opts: SolveOptions,
    x0: Option<&[f64]>,
) -> Result<Vec<f64>, SparseError> {
    check_dims(a, b)?;
    let n = b.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let minv = jacobi(&a.diagonal());
    let max_iters = opts.iters_for(n);
    let nb = norm(b);
    let target = opts.tol * nb;

    let mut x = match x0 {
        Some(g) if g.len() == n => g.to_vec(),
        _ => vec![0.0; n],
    };
    let mut r = vec![0.0; n];
    a.spmv_into(&x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    if nb == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let mut z: Vec<f64> = r.iter().zip(&minv).map(|(ri, mi)| ri * mi).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];

    for iter in 0..max_iters {
        if norm(&r) <= target {
            verify_residual(a, b, &x, opts.tol, iter)?;
            return Ok(x);
        }
        a.spmv_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !pap.is_finite() {
            return Err(SparseError::NonFiniteBreakdown { iter });
        }
        if pap == 0.0 {
            break;
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        for i in 0..n {
            z[i] = r[i] * minv[i];
        }
        let rz_new = dot(&r, &z);
        if !rz_new.is_finite() {
            return Err(SparseError::NonFiniteBreakdown { iter });
        }
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    if norm(&r) <= target {
        verify_residual(a, b, &x, opts.tol, max_iters)?;
        return Ok(x);
    }
    Err(SparseError::NoConvergence {
        iters: max_iters,
        residual: norm(&r) / nb,
    })
}

/// Jacobi-preconditioned BiCGStab for general nonsingular systems.
pub fn solve_general(
    a: &CsrMatrix,
    b: &[f64],
    opts: SolveOptions,
    x0: Option<&[f64]>,
) -> Result<Vec<f64>, SparseError> {
    check_dims(a, b)?;
    let n = b.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let minv = jacobi(&a.diagonal());
    let max_iters = opts.iters_for(n);
    let nb = norm(b);
    if nb == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let target = opts.tol * nb;

    let mut x = match x0 {
        Some(g) if g.len() == n => g.to_vec(),
        _ => vec![0.0; n],
    };
    let mut r = vec![0.0; n];
    a.spmv_into(&x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let r0 = r.clone();
    let mut rho = dot(&r0, &r);
    let mut p = r.clone();
    let mut v = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut t = vec![0.0; n];
    let mut phat = vec![0.0; n];
    let mut shat = vec![0.0; n];

    for iter in 0..max_iters {
        if norm(&r) <= target {
            verify_residual(a, b, &x, opts.tol, iter)?;
            return Ok(x);
        }
        if rho == 0.0 || !rho.is_finite() {
            return Err(SparseError::NonFiniteBreakdown { iter });
        }
        for i in 0..n {
            phat[i] = p[i] * minv[i];
        }
        a.spmv_into(&phat, &mut v);
        let r0v = dot(&r0, &v);
        if r0v == 0.0 || !r0v.is_finite() {
            return Err(SparseError::NonFiniteBreakdown { iter });
        }
        let alpha = rho / r0v;
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        if norm(&s) <= target {
            for i in 0..n {
                x[i] += alpha * phat[i];
            }
            verify_residual(a, b, &x, opts.tol, iter)?;
            return Ok(x);
        }
        for i in 0..n {
            shat[i] = s[i] * minv[i];
        }
        a.spmv_into(&shat, &mut t);
        let tt = dot(&t, &t);
        if tt == 0.0 || !tt.is_finite() {
            return Err(SparseError::NonFiniteBreakdown { iter });
        }
        let omega = dot(&t, &s) / tt;
        if omega == 0.0 || !omega.is_finite() {
            return Err(SparseError::NonFiniteBreakdown { iter });
        }
        for i in 0..n {
            x[i] += alpha * phat[i] + omega * shat[i];
            r[i] = s[i] - omega * t[i];
        }
        let rho_new = dot(&r0, &r);
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        if !norm(&r).is_finite() {
            return Err(SparseError::NonFiniteBreakdown { iter });
        }
    }
    if norm(&r) <= target {
        verify_residual(a, b, &x, opts.tol, max_iters)?;
        return Ok(x);
    }
    Err(SparseError::NoConvergence {
        iters: max_iters,
        residual: norm(&r) / nb,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn csr_from(entries: &[(usize, usize, f64)], n: usize, m: usize) -> CsrMatrix {
        let mut t = TripletBuffer::new(n, m);
        for &(r, c, v) in entries {
            t.push(r, c, v);
        }
        t.to_csr().unwrap()
    }

    #[test]
    fn to_csr_empty_buffer_is_zero_matrix() {
        let a = TripletBuffer::new(3, 3).to_csr().unwrap();
        assert_eq!(a.nnz(), 0);
        assert_eq!(a.spmv(&[1.0, 2.0, 3.0]).unwrap(), vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn to_csr_sums_duplicates() {
        let a = csr_from(&[(0, 0, 1.0), (0, 0, 2.0)], 1, 1);
        assert_eq!(a.nnz(), 1);
        assert_eq!(a.to_dense()[0][0], 3.0);
    }

    #[test]
    fn to_csr_dense_reconstruction() {
        let a = csr_from(&[(0, 1, 5.0), (1, 0, 7.0)], 2, 2);
        assert_eq!(a.to_dense(), vec![vec![0.0, 5.0], vec![7.0, 0.0]]);
    }

    #[test]
    fn to_csr_rejects_out_of_range() {
        let mut t = TripletBuffer::new(2, 2);
        t.push(2, 0, 1.0);
        assert!(matches!(
            t.to_csr(),
            Err(SparseError::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn spmv_identity() {
        let a = csr_from(&[(0, 0, 1.0), (1, 1, 1.0)], 2, 2);
        assert_eq!(a.spmv(&[3.0, -4.0]).unwrap(), vec![3.0, -4.0]);
    }

    #[test]
    fn spmv_hand_value() {
        let a = csr_from(&[(0, 0, 4.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 3.0)], 2, 2);
        assert_eq!(a.spmv(&[1.0, 2.0]).unwrap(), vec![6.0, 7.0]);
    }

    #[test]
    fn spmv_zero_vector() {
        let a = csr_from(&[(0, 0, 4.0), (1, 1, 3.0)], 2, 2);
        assert_eq!(a.spmv(&[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn spmv_dimension_mismatch() {
        let a = csr_from(&[(0, 0, 1.0)], 2, 2);
        assert!(matches!(
            a.spmv(&[1.0]),
            Err(SparseError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn cg_identity_single_iteration() {
        let a = csr_from(&[(0, 0, 1.0), (1, 1, 1.0)], 2, 2);
        let x = solve_spd(&a, &[2.0, -5.0], SolveOptions::default(), None).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-12 && (x[1] + 5.0).abs() < 1e-12);
    }

    #[test]
    fn cg_2x2_hand_solution() {
        let a = csr_from(&[(0, 0, 4.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 3.0)], 2, 2);
        let x = solve_spd(&a, &[1.0, 2.0], SolveOptions::default(), None).unwrap();
        assert!((x[0] - 1.0 / 11.0).abs() < 1e-10);
        assert!((x[1] - 7.0 / 11.0).abs() < 1e-10);
    }

    #[test]
    fn cg_diagonal() {
        let a = csr_from(&[(0, 0, 2.0), (1, 1, 8.0), (2, 2, 0.5)], 3, 3);
        let x = solve_spd(&a, &[2.0, 8.0, 0.5], SolveOptions::default(), None).unwrap();
        for xi in &x {
            assert!((xi - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn bicgstab_matches_cg_on_symmetric() {
        let a = csr_from(&[(0, 0, 4.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 3.0)], 2, 2);
        let x1 = solve_spd(&a, &[1.0, 2.0], SolveOptions::default(), None).unwrap();
        let x2 = solve_general(&a, &[1.0, 2.0], SolveOptions::default(), None).unwrap();
        assert!((x1[0] - x2[0]).abs() < 1e-10 && (x1[1] - x2[1]).abs() < 1e-10);
    }

    #[test]
    fn bicgstab_upper_triangular() {
        let a = csr_from(&[(0, 0, 2.0), (0, 1, 1.0), (1, 1, 2.0)], 2, 2);
        let x = solve_general(&a, &[3.0, 2.0], SolveOptions::default(), None).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-10 && (x[1] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn singular_matrix_raises() {
        // zero row
        let a = csr_from(&[(0, 0, 1.0), (0, 1, 2.0)], 2, 2);
        let r = solve_general(&a, &[1.0, 1.0], SolveOptions::default(), None);
        assert!(r.is_err(), "singular system must not return silently");
    }

    #[test]
    fn warm_start_converges() {
        let a = csr_from(&[(0, 0, 4.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 3.0)], 2, 2);
        let guess = [0.09, 0.63];
        let x = solve_spd(&a, &[1.0, 2.0], SolveOptions::default(), Some(&guess)).unwrap();
        assert!((x[0] - 1.0 / 11.0).abs() < 1e-10);
    }

    proptest! {
        #[test]
        fn csr_roundtrip_idempotent(entries in proptest::collection::vec((0usize..6, 0usize..6, -5.0f64..5.0), 0..40)) {
            let mut t = TripletBuffer::new(6, 6);
            for (r, c, v) in &entries {
                t.push(*r, *c, *v);
            }
            let a = t.to_csr().unwrap();
            let dense = a.to_dense();
            // densify and re-sparsify
            let mut t2 = TripletBuffer::new(6, 6);
            for (r, row) in dense.iter().enumerate() {
                for (c, v) in row.iter().enumerate() {
                    if *v != 0.0 {
                        t2.push(r, c, *v);
                    }
                }
            }
            let b = t2.to_csr().unwrap();
            prop_assert_eq!(a.to_dense(), b.to_dense());
            // duplicates summed correctly
            let mut expect = vec![vec![0.0; 6]; 6];
            for (r, c, v) in &entries {
                expect[*r][*c] += *v;
            }
            for r in 0..6 {
                for c in 0..6 {
                    prop_assert!((dense[r][c] - expect[r][c]).abs() < 1e-12);
                }
            }
        }
    }
}
