//! Thin deterministic wrapper around the Clarabel interior-point solver.
//!
//! All optimization in this crate reduces to linear conic programs
//!
//! ```text
//! minimize    q^T x
//! subject to  A x + s = b,   s in K
//! ```
//!
//! where `K` is a product of zero, nonnegative, second-order, and scaled
//! PSD-triangle cones. Rather than plumbing symbolic matrix expressions,
//! PSD constraints are entered through *probing*: the caller provides a
//! closure evaluating the (affine) matrix-valued map `x -> S(x)`, and the
//! builder recovers the exact coefficients from `S(0)` and `S(e_v)` for each
//! participating variable. This is exact for affine maps (the only kind a
//! linear conic program admits) and keeps constraint construction readable
//! at the call sites.
//!
//! Complex Hermitian LMIs are handled by realification: `H = A + iB` with
//! `A` symmetric and `B` antisymmetric maps to the symmetric real matrix
//! `[[A, -B], [B, A]]`, which has each eigenvalue of `H` twice — so
//! positive semidefiniteness is preserved both ways.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};
use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConicError {
    #[error("conic problem is structurally invalid: {0}")]
    Invalid(String),
    #[error("matrix passed as Hermitian deviates from its adjoint by {deviation:.3e} (relative)")]
    NotHermitian { deviation: f64 },
    #[error("solver could not construct the problem: {0}")]
    Setup(String),
}

/// Final solver status, collapsed to the four outcomes the callers
/// distinguish.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    /// Converged to the requested accuracy.
    Optimal,
    /// Progress stalled but the iterate satisfies the solver's reduced
    /// tolerances: near-optimal and near-feasible, almost never a sign of
    /// infeasibility. Callers may accept it after verifying the iterate
    /// against their own constraints.
    AlmostOptimal,
    /// Certificate of primal infeasibility.
    Infeasible,
    /// Anything else (iteration limit, numerical trouble, dual
    /// infeasibility); the returned iterate is not trusted.
    NumericalFailure,
}

#[derive(Debug, Clone)]
pub struct ConicSolution {
    pub status: SolveStatus,
    /// Primal iterate (meaningful when status is `Optimal`).
    pub x: Vec<f64>,
    /// Primal objective value.
    pub obj: f64,
    /// Verbatim solver status, for diagnostics.
    pub raw_status: String,
}

#[derive(Debug, Clone, Copy)]
enum ConeKind {
    Zero(usize),
    Nonneg(usize),
    SecondOrder(usize),
    PsdTriangle(usize), // matrix side length
}

/// Incremental conic-program builder; rows are appended cone by cone in
/// order.
pub struct ProblemBuilder {
    n_vars: usize,
    q: Vec<f64>,
    triplets: Vec<(usize, usize, f64)>,
    b: Vec<f64>,
    cones: Vec<ConeKind>,
    n_rows: usize,
}

impl Default for ProblemBuilder {
    fn default() -> Self {
        Self::new()
    }
}

/// One affine row `b_i - sum(coeff * x_var)`, entering the cone as a slack.
pub type Row = (f64, Vec<(usize, f64)>);

impl ProblemBuilder {
    pub fn new() -> Self {
        ProblemBuilder {
            n_vars: 0,
            q: Vec::new(),
            triplets: Vec::new(),
            b: Vec::new(),
            cones: Vec::new(),
            n_rows: 0,
        }
    }

    /// Allocates `n` new scalar variables, returning their index range.
    pub fn new_vars(&mut self, n: usize) -> std::ops::Range<usize> {
        let start = self.n_vars;
        self.n_vars += n;
        self.q.resize(self.n_vars, 0.0);
        start..self.n_vars
    }

    /// Adds `coeff * x[var]` to the minimized objective.
    pub fn add_objective(&mut self, var: usize, coeff: f64) {
        self.q[var] += coeff;
    }

    fn push_rows(&mut self, rows: &[Row]) {
        for (offset, (b_i, terms)) in rows.iter().enumerate() {
            let row = self.n_rows + offset;
            self.b.push(*b_i);
            for &(var, coeff) in terms {
                if coeff != 0.0 {
                    self.triplets.push((row, var, coeff));
                }
            }
        }
        self.n_rows += rows.len();
    }

    /// Equality rows: `b_i - sum(coeff * x) = 0`.
    pub fn add_zero_rows(&mut self, rows: &[Row]) {
        self.cones.push(ConeKind::Zero(rows.len()));
        self.push_rows(rows);
    }

    /// Inequality rows: `b_i - sum(coeff * x) >= 0`.
    pub fn add_nonneg_rows(&mut self, rows: &[Row]) {
        self.cones.push(ConeKind::Nonneg(rows.len()));
        self.push_rows(rows);
    }

    /// Second-order-cone rows: with slacks `s_i = b_i - sum(coeff * x)`,
    /// enforces `s_0 >= || (s_1, ..., s_{n-1}) ||`.
    pub fn add_second_order_rows(&mut self, rows: &[Row]) {
        assert!(rows.len() >= 2, "second-order cone needs at least two rows");
        self.cones.push(ConeKind::SecondOrder(rows.len()));
        self.push_rows(rows);
    }

    /// Constrains the affine symmetric-matrix map `x -> S(x)` to be PSD.
    ///
    /// `vars` lists the participating variable indices; `eval` receives the
    /// corresponding local values and must be affine in them. Coefficients
    /// are recovered exactly from `S(0)` and the unit probes `S(e_v)`.
    pub fn add_psd_probe<F>(&mut self, vars: &[usize], eval: F) -> Result<(), ConicError>
    where
        F: Fn(&[f64]) -> DMatrix<f64>,
    {
        let zero = vec![0.0; vars.len()];
        let s0 = eval(&zero);
        let d = s0.nrows();
        if s0.ncols() != d {
            return Err(ConicError::Invalid(format!(
                "PSD probe produced a {}x{} (non-square) matrix",
                s0.nrows(),
                s0.ncols()
            )));
        }
        check_symmetric(&s0)?;
        let base = self.n_rows;
        self.cones.push(ConeKind::PsdTriangle(d));
        let sv0 = svec(&s0);
        self.b.extend_from_slice(&sv0);
        self.n_rows += sv0.len();
        let mut probe = zero;
        for (local, &gvar) in vars.iter().enumerate() {
            probe[local] = 1.0;
            let sv = eval(&probe);
            probe[local] = 0.0;
            if sv.nrows() != d || sv.ncols() != d {
                return Err(ConicError::Invalid(
                    "PSD probe changed matrix dimensions between evaluations".into(),
                ));
            }
            check_symmetric(&sv)?;
            let diff = svec(&(sv - &s0));
            for (offset, &val) in diff.iter().enumerate() {
                if val != 0.0 {
                    self.triplets.push((base + offset, gvar, -val));
                }
            }
        }
        Ok(())
    }

    /// Hermitian variant of [`add_psd_probe`]: the complex map is realified
    /// before entering the cone (eigenvalues are preserved with doubled
    /// multiplicity, so PSD-ness is equivalent).
    pub fn add_hermitian_psd_probe<F>(&mut self, vars: &[usize], eval: F) -> Result<(), ConicError>
    where
        F: Fn(&[f64]) -> DMatrix<Complex64>,
    {
        self.add_psd_probe(vars, |x| {
            // Hermitian-ness is validated by the realify check below; probing
            // panics are converted by the outer check_symmetric on the result.
            realify_hermitian(&eval(x)).expect("hermitian PSD probe produced a non-Hermitian matrix")
        })
    }

    /// One-line structural summary for debugging solver issues.
    pub fn describe(&self) -> String {
        let cones: Vec<String> = self
            .cones
            .iter()
            .map(|c| match c {
                ConeKind::Zero(n) => format!("zero({n})"),
                ConeKind::Nonneg(n) => format!("nonneg({n})"),
                ConeKind::SecondOrder(n) => format!("soc({n})"),
                ConeKind::PsdTriangle(d) => format!("psd({d}x{d})"),
            })
            .collect();
        format!(
            "conic problem: {} vars, {} rows, {} nonzeros, cones [{}]",
            self.n_vars,
            self.n_rows,
            self.triplets.len(),
            cones.join(", ")
        )
    }

    fn assemble_a(&self) -> CscMatrix<f64> {
        let mut t = self.triplets.clone();
        t.sort_by(|a, b| (a.1, a.0).cmp(&(b.1, b.0)));
        let mut colptr = vec![0usize];
        let mut rowval: Vec<usize> = Vec::new();
        let mut nzval: Vec<f64> = Vec::new();
        let mut col = 0usize;
        for (r, c, v) in t {
            while col < c {
                colptr.push(rowval.len());
                col += 1;
            }
            // accumulate duplicates of the same (row, column) coordinate
            if rowval.len() > colptr[col] && *rowval.last().unwrap() == r {
                *nzval.last_mut().unwrap() += v;
            } else {
                rowval.push(r);
                nzval.push(v);
            }
        }
        while col < self.n_vars {
            colptr.push(rowval.len());
            col += 1;
        }
        CscMatrix::new(self.n_rows, self.n_vars, colptr, rowval, nzval)
    }

    /// Solves the assembled program at relative gap/feasibility tolerance
    /// `tol` (200 iteration cap).
    pub fn solve(&self, tol: f64) -> Result<ConicSolution, ConicError> {
        let a = self.assemble_a();
        let p = CscMatrix::zeros((self.n_vars, self.n_vars));
        let cones: Vec<SupportedConeT<f64>> = self
            .cones
            .iter()
            .map(|c| match *c {
                ConeKind::Zero(n) => SupportedConeT::ZeroConeT(n),
                ConeKind::Nonneg(n) => SupportedConeT::NonnegativeConeT(n),
                ConeKind::SecondOrder(n) => SupportedConeT::SecondOrderConeT(n),
                ConeKind::PsdTriangle(d) => SupportedConeT::PSDTriangleConeT(d),
            })
            .collect();
        let settings = DefaultSettingsBuilder::default()
            .verbose(false)
            .max_iter(200)
            .tol_gap_rel(tol)
            .tol_feas(tol)
            .build()
            .map_err(|e| ConicError::Setup(format!("{e:?}")))?;
        let mut solver = DefaultSolver::new(&p, &self.q, &a, &self.b, &cones, settings)
            .map_err(|e| ConicError::Setup(format!("{e:?}")))?;
        solver.solve();
        let status = match solver.solution.status {
            SolverStatus::Solved => SolveStatus::Optimal,
            SolverStatus::AlmostSolved => SolveStatus::AlmostOptimal,
            SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
                SolveStatus::Infeasible
            }
            _ => SolveStatus::NumericalFailure,
        };
        Ok(ConicSolution {
            status,
            x: solver.solution.x.clone(),
            obj: solver.solution.obj_val,
            raw_status: format!("{:?}", solver.solution.status),
        })
    }
}

fn check_symmetric(mat: &DMatrix<f64>) -> Result<(), ConicError> {
    let norm = mat.norm();
    let dev = (mat - mat.transpose()).norm();
    if dev > 1e-9 * norm.max(1e-12) {
        return Err(ConicError::Invalid(format!(
            "PSD probe matrix is not symmetric (deviation {:.3e} relative)",
            dev / norm.max(1e-300)
        )));
    }
    Ok(())
}

/// Scaled upper-triangle vectorization (column-major, off-diagonals times
/// sqrt(2)) matching the solver's PSD cone convention.
pub fn svec(mat: &DMatrix<f64>) -> Vec<f64> {
    let d = mat.nrows();
    let mut out = Vec::with_capacity(d * (d + 1) / 2);
    for c in 0..d {
        for r in 0..=c {
            if r == c {
                out.push(mat[(r, c)]);
            } else {
                out.push(std::f64::consts::SQRT_2 * 0.5 * (mat[(r, c)] + mat[(c, r)]));
            }
        }
    }
    out
}

/// Realifies a complex Hermitian matrix `H = A + iB` into the symmetric
/// `[[A, -B], [B, A]]`, which carries each eigenvalue of `H` twice. Errors
/// if `H` deviates from Hermitian beyond a relative 1e-9.
pub fn realify_hermitian(h: &DMatrix<Complex64>) -> Result<DMatrix<f64>, ConicError> {
    let norm = h.norm();
    let dev = (h - h.adjoint()).norm();
    if dev > 1e-9 * norm.max(1e-12) {
        return Err(ConicError::NotHermitian {
            deviation: dev / norm.max(1e-300),
        });
    }
    let d = h.nrows();
    let mut out = DMatrix::zeros(2 * d, 2 * d);
    for r in 0..d {
        for c in 0..d {
            // Numerically symmetrize so downstream svec sees an exactly
            // representable symmetric matrix.
            let re = 0.5 * (h[(r, c)].re + h[(c, r)].re);
            let im = 0.5 * (h[(r, c)].im - h[(c, r)].im);
            out[(r, c)] = re;
            out[(d + r, d + c)] = re;
            out[(r, d + c)] = -im;
            out[(d + r, c)] = im;
        }
    }
    Ok(out)
}

/// Number of real parameters of a `d x d` Hermitian matrix.
pub fn herm_param_count(d: usize) -> usize {
    d * d
}

/// Unpacks Hermitian parameters: first the `d` real diagonal entries, then
/// for each column `c` the pairs `(Re, Im)` of the strictly-upper entries
/// `(r, c)`, `r < c`, in column-major order.
pub fn herm_unpack(d: usize, params: &[f64]) -> DMatrix<Complex64> {
    assert_eq!(params.len(), herm_param_count(d));
    let mut m = DMatrix::zeros(d, d);
    for i in 0..d {
        m[(i, i)] = Complex64::new(params[i], 0.0);
    }
    let mut idx = d;
    for c in 0..d {
        for r in 0..c {
            let v = Complex64::new(params[idx], params[idx + 1]);
            idx += 2;
            m[(r, c)] = v;
            m[(c, r)] = v.conj();
        }
    }
    m
}

/// Packs a Hermitian matrix into the [`herm_unpack`] parameter order.
pub fn herm_pack(m: &DMatrix<Complex64>) -> Vec<f64> {
    let d = m.nrows();
    let mut out = Vec::with_capacity(herm_param_count(d));
    for i in 0..d {
        out.push(m[(i, i)].re);
    }
    for c in 0..d {
        for r in 0..c {
            out.push(m[(r, c)].re);
            out.push(m[(r, c)].im);
        }
    }
    out
}

/// Number of parameters of a `d x d` real symmetric matrix.
pub fn sym_param_count(d: usize) -> usize {
    d * (d + 1) / 2
}

/// Unpacks symmetric parameters in column-major upper-triangle order.
pub fn sym_unpack(d: usize, params: &[f64]) -> DMatrix<f64> {
    assert_eq!(params.len(), sym_param_count(d));
    let mut m = DMatrix::zeros(d, d);
    let mut idx = 0;
    for c in 0..d {
        for r in 0..=c {
            m[(r, c)] = params[idx];
            m[(c, r)] = params[idx];
            idx += 1;
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nonneg_scalar_minimum_is_zero() {
        let mut p = ProblemBuilder::new();
        let v = p.new_vars(1);
        p.add_objective(v.start, 1.0);
        // s = 0 - (-1) x = x >= 0
        p.add_nonneg_rows(&[(0.0, vec![(v.start, -1.0)])]);
        let sol = p.solve(1e-8).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!(sol.obj.abs() < 1e-7, "obj {}", sol.obj);
    }

    #[test]
    fn min_trace_above_identity() {
        let d = 3;
        let mut p = ProblemBuilder::new();
        let vars = p.new_vars(sym_param_count(d));
        let idx: Vec<usize> = vars.clone().collect();
        // objective: trace(X) = sum of diagonal parameters
        let mut pos = 0;
        for c in 0..d {
            for r in 0..=c {
                if r == c {
                    p.add_objective(idx[pos], 1.0);
                }
                pos += 1;
            }
        }
        p.add_psd_probe(&idx, |x| {
            sym_unpack(d, x) - DMatrix::identity(d, d)
        })
        .unwrap();
        let sol = p.solve(1e-8).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.obj - d as f64).abs() < 1e-6, "obj {}", sol.obj);
        let x = sym_unpack(d, &sol.x);
        assert!((x - DMatrix::identity(d, d)).norm() < 1e-5);
    }

    #[test]
    fn psd_with_negative_trace_is_infeasible() {
        let d = 2;
        let mut p = ProblemBuilder::new();
        let vars = p.new_vars(sym_param_count(d));
        let idx: Vec<usize> = vars.collect();
        p.add_psd_probe(&idx, |x| sym_unpack(d, x)).unwrap();
        // trace(X) <= -1:  s = -1 - trace(X) >= 0
        p.add_nonneg_rows(&[(-1.0, vec![(idx[0], 1.0), (idx[2], 1.0)])]);
        let sol = p.solve(1e-8).unwrap();
        assert_eq!(sol.status, SolveStatus::Infeasible);
    }

    #[test]
    fn off_diagonal_probe_coefficients() {
        // min x s.t. [[x, 1], [1, x]] >= 0  =>  x = 1 (eigenvalues x +- 1).
        let mut p = ProblemBuilder::new();
        let v = p.new_vars(1).start;
        p.add_objective(v, 1.0);
        p.add_psd_probe(&[v], |x| {
            DMatrix::from_row_slice(2, 2, &[x[0], 1.0, 1.0, x[0]])
        })
        .unwrap();
        let sol = p.solve(1e-8).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.obj - 1.0).abs() < 1e-6, "obj {}", sol.obj);
    }

    #[test]
    fn zero_and_second_order_rows() {
        // min t s.t. x = (3, 4), t >= ||x||  =>  t = 5.
        let mut p = ProblemBuilder::new();
        let vars = p.new_vars(3);
        let (t, x1, x2) = (vars.start, vars.start + 1, vars.start + 2);
        p.add_objective(t, 1.0);
        p.add_zero_rows(&[
            (3.0, vec![(x1, 1.0)]),
            (4.0, vec![(x2, 1.0)]),
        ]);
        p.add_second_order_rows(&[
            (0.0, vec![(t, -1.0)]),
            (0.0, vec![(x1, -1.0)]),
            (0.0, vec![(x2, -1.0)]),
        ]);
        let sol = p.solve(1e-8).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.obj - 5.0).abs() < 1e-6, "obj {}", sol.obj);
    }

    #[test]
    fn hermitian_probe_min_trace() {
        // min Tr(X) over Hermitian X >= H0 where H0 has eigenvalues 1 and 3.
        let h0 = {
            let mut m = DMatrix::zeros(2, 2);
            m[(0, 0)] = Complex64::new(2.0, 0.0);
            m[(1, 1)] = Complex64::new(2.0, 0.0);
            m[(0, 1)] = Complex64::new(0.0, 1.0);
            m[(1, 0)] = Complex64::new(0.0, -1.0);
            m
        };
        let d = 2;
        let mut p = ProblemBuilder::new();
        let vars = p.new_vars(herm_param_count(d));
        let idx: Vec<usize> = vars.collect();
        for i in 0..d {
            p.add_objective(idx[i], 1.0);
        }
        let h0c = h0.clone();
        p.add_hermitian_psd_probe(&idx, move |x| herm_unpack(d, x) - &h0c)
            .unwrap();
        let sol = p.solve(1e-8).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.obj - 4.0).abs() < 1e-6, "obj {}", sol.obj);
        let x = herm_unpack(d, &sol.x);
        assert!((&x - &h0).norm() < 1e-5, "X should equal H0 at optimum");
    }

    #[test]
    fn realify_preserves_spectrum() {
        let mut h = DMatrix::zeros(3, 3);
        h[(0, 0)] = Complex64::new(1.5, 0.0);
        h[(1, 1)] = Complex64::new(-0.5, 0.0);
        h[(2, 2)] = Complex64::new(2.0, 0.0);
        h[(0, 1)] = Complex64::new(0.3, 0.7);
        h[(1, 0)] = h[(0, 1)].conj();
        h[(1, 2)] = Complex64::new(-0.2, 0.4);
        h[(2, 1)] = h[(1, 2)].conj();
        let r = realify_hermitian(&h).unwrap();
        assert!((&r - r.transpose()).norm() < 1e-14);
        let mut ch = h.clone().symmetric_eigen().eigenvalues.iter().map(|c| *c).collect::<Vec<f64>>();
        let mut doubled: Vec<f64> = ch.iter().chain(ch.iter()).cloned().collect();
        ch.sort_by(|a, b| a.partial_cmp(b).unwrap());
        doubled.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut re = r.symmetric_eigen().eigenvalues.iter().cloned().collect::<Vec<f64>>();
        re.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (a, b) in re.iter().zip(doubled.iter()) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
        // identity maps to identity
        let id: DMatrix<Complex64> = DMatrix::identity(2, 2);
        assert_eq!(realify_hermitian(&id).unwrap(), DMatrix::identity(4, 4));
        // non-Hermitian rejected
        let mut bad = h;
        bad[(0, 1)] = Complex64::new(9.0, 9.0);
        assert!(matches!(
            realify_hermitian(&bad),
            Err(ConicError::NotHermitian { .. })
        ));
    }

    #[test]
    fn herm_pack_round_trip() {
        let mut h = DMatrix::zeros(3, 3);
        h[(0, 0)] = Complex64::new(1.0, 0.0);
        h[(1, 1)] = Complex64::new(2.0, 0.0);
        h[(2, 2)] = Complex64::new(3.0, 0.0);
        h[(0, 1)] = Complex64::new(0.1, 0.2);
        h[(1, 0)] = h[(0, 1)].conj();
        h[(0, 2)] = Complex64::new(-0.3, 0.4);
        h[(2, 0)] = h[(0, 2)].conj();
        h[(1, 2)] = Complex64::new(0.5, -0.6);
        h[(2, 1)] = h[(1, 2)].conj();
        let packed = herm_pack(&h);
        assert_eq!(packed.len(), herm_param_count(3));
        assert_eq!(herm_unpack(3, &packed), h);
    }

    #[test]
    fn feasible_points_respect_weak_duality() {
        // Any X = I + PSD has trace >= optimum of min_trace_above_identity.
        let d = 3;
        let samples = [
            DMatrix::identity(d, d),
            DMatrix::identity(d, d) * 2.0,
            DMatrix::from_row_slice(
                d,
                d,
                &[2.0, 0.5, 0.0, 0.5, 1.5, -0.3, 0.0, -0.3, 1.2],
            ),
        ];
        for x in &samples {
            let shifted = x - DMatrix::identity(d, d);
            let lmin = shifted
                .symmetric_eigen()
                .eigenvalues
                .iter()
                .cloned()
                .fold(f64::INFINITY, f64::min);
            if lmin >= -1e-12 {
                assert!(x.trace() >= d as f64 - 1e-6);
            }
        }
    }

    #[test]
    fn repeated_solves_are_bitwise_identical() {
        let run = || {
            let d = 3;
            let mut p = ProblemBuilder::new();
            let vars = p.new_vars(sym_param_count(d));
            let idx: Vec<usize> = vars.collect();
            let mut pos = 0;
            for c in 0..d {
                for r in 0..=c {
                    if r == c {
                        p.add_objective(idx[pos], 1.0);
                    }
                    pos += 1;
                }
            }
            p.add_psd_probe(&idx, |x| sym_unpack(d, x) - DMatrix::identity(d, d))
                .unwrap();
            p.solve(1e-8).unwrap().x
        };
        let a = run();
        let b = run();
        assert_eq!(a, b);
    }

    #[test]
    fn describe_reports_structure() {
        let mut p = ProblemBuilder::new();
        let v = p.new_vars(2);
        p.add_nonneg_rows(&[(1.0, vec![(v.start, 1.0)])]);
        let d = p.describe();
        assert!(d.contains("2 vars"), "{d}");
        assert!(d.contains("nonneg(1)"), "{d}");
    }
}
