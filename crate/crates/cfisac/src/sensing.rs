//! CRLB-optimal sensing covariance design.
//!
//! The sensing phase transmits Gaussian probing signals with per-AP
//! covariance `Psi_m` (trace-limited by the sensing power budget). Choosing
//! the covariances to minimize the aggregate position CRLB is a semidefinite
//! program: with `V >= U^{-1}` expressed by the Schur complement of
//! `[[V, I], [I, U]]` and `U <= EFIM(Psi)` expressed by PSD-ness of the full
//! FIM with `U` subtracted from the position block,
//!
//! ```text
//! minimize    trace(V)
//! subject to  [[V, I], [I, U]]                      PSD
//!             [[Jpp(Psi) - U, Jpa(Psi)],
//!              [Jpa(Psi)^T,   Jaa(Psi)]]            PSD
//!             trace(Psi_m) <= P_s,  Psi_m PSD       for every AP
//! ```
//!
//! whose optimum is `trace(EFIM^{-1})` at the CRLB-optimal covariance.
//!
//! Two transformations make this tractable and well-conditioned without
//! changing the optimum:
//!
//! 1. **Lossless compression.** Every way `Psi_m` enters the FIM is through
//!    products with the steering vectors and their position derivatives, so
//!    only the component of `Psi_m` on `span{a_km, da_km/dx, da_km/dy}_k`
//!    matters, and an optimal covariance exists inside that span.
//!    Parameterizing `Psi_m = C_m Phi_m C_m^H` with `C_m` an orthonormal
//!    basis of the span shrinks the matrix variables from `N x N` to
//!    `d_m x d_m` (21 -> 12/12/7 on the reference scenario).
//! 2. **Congruence scaling.** Position and gain FIM entries differ by ~9
//!    orders of magnitude. Scaling the LMI by `diag(s_p I, s_a I)` and
//!    substituting `U' = s_p^2 U`, `V' = V / s_p^2` (an exact congruence)
//!    brings every variable to order one; the objective is recovered as
//!    `trace(V) = s_p^2 trace(V')`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

use crate::conic::{
    self, herm_param_count, herm_unpack, sym_param_count, sym_unpack, ProblemBuilder, SolveStatus,
};
use crate::fim::{self, CrlbResult, EchoModel, FimError};
use crate::scenario::ScenarioConfig;

#[derive(Debug, Error)]
pub enum SensingError {
    #[error(transparent)]
    Fim(#[from] FimError),
    #[error(transparent)]
    Conic(#[from] conic::ConicError),
    #[error("sensing covariance SDP did not solve: {status:?} ({detail})")]
    SolverFailed { status: SolveStatus, detail: String },
    #[error(
        "reconstructed covariance block {ap} has eigenvalue {eig:.3e}, \
         below the clipping tolerance"
    )]
    IndefiniteBlock { ap: usize, eig: f64 },
    #[error("covariance text format error: {0}")]
    Format(String),
}

/// Block-diagonal sensing covariance: one `N x N` Hermitian PSD block per AP,
/// each with trace at most the per-AP sensing power budget.
#[derive(Debug, Clone)]
pub struct SensingCovariance {
    pub blocks: Vec<DMatrix<Complex64>>,
}

impl SensingCovariance {
    /// Uniform (scaled identity) covariance spending `power` watts per AP.
    pub fn uniform(config: &ScenarioConfig, power: f64) -> Self {
        let n = config.n_elements;
        let scale = Complex64::new(power / n as f64, 0.0);
        SensingCovariance {
            blocks: (0..config.n_aps())
                .map(|_| DMatrix::from_diagonal_element(n, n, scale))
                .collect(),
        }
    }

    /// Total transmitted sensing power across APs.
    pub fn total_power(&self) -> f64 {
        self.per_ap_power().iter().sum()
    }

    /// Per-AP transmitted powers (block traces).
    pub fn per_ap_power(&self) -> Vec<f64> {
        self.blocks
            .iter()
            .map(|b| b.diagonal().iter().map(|d| d.re).sum::<f64>())
            .collect()
    }

    /// Serializes to the `cfisac-psi v1` text format: a header line, a
    /// dimension line, then per block `N` lines of `N` whitespace-separated
    /// `re im` pairs, round-tripping `f64` exactly.
    pub fn export_text(&self) -> String {
        let mut out = String::from("cfisac-psi v1\n");
        let n = self.blocks.first().map_or(0, |b| b.nrows());
        out.push_str(&format!("blocks {} size {}\n", self.blocks.len(), n));
        for (m, b) in self.blocks.iter().enumerate() {
            out.push_str(&format!("block {m}\n"));
            for r in 0..b.nrows() {
                let row: Vec<String> = (0..b.ncols())
                    .map(|c| format!("{:.17e} {:.17e}", b[(r, c)].re, b[(r, c)].im))
                    .collect();
                out.push_str(&row.join(" "));
                out.push('\n');
            }
        }
        out
    }

    /// Parses the `cfisac-psi v1` text format.
    pub fn parse_text(text: &str) -> Result<Self, SensingError> {
        let mut lines = text.lines();
        let header = lines.next().unwrap_or_default();
        if header.trim() != "cfisac-psi v1" {
            return Err(SensingError::Format(format!(
                "unsupported header {header:?} (expected \"cfisac-psi v1\")"
            )));
        }
        let dims = lines.next().unwrap_or_default();
        let parts: Vec<&str> = dims.split_whitespace().collect();
        if parts.len() != 4 || parts[0] != "blocks" || parts[2] != "size" {
            return Err(SensingError::Format(format!("bad dimension line {dims:?}")));
        }
        let n_blocks: usize = parts[1]
            .parse()
            .map_err(|e| SensingError::Format(format!("bad block count: {e}")))?;
        let n: usize = parts[3]
            .parse()
            .map_err(|e| SensingError::Format(format!("bad size: {e}")))?;
        let mut blocks = Vec::with_capacity(n_blocks);
        for m in 0..n_blocks {
            let marker = lines.next().unwrap_or_default();
            if marker.trim() != format!("block {m}") {
                return Err(SensingError::Format(format!(
                    "expected \"block {m}\", found {marker:?}"
                )));
            }
            let mut b = DMatrix::zeros(n, n);
            for r in 0..n {
                let line = lines
                    .next()
                    .ok_or_else(|| SensingError::Format("truncated block".into()))?;
                let vals: Result<Vec<f64>, _> =
                    line.split_whitespace().map(str::parse::<f64>).collect();
                let vals =
                    vals.map_err(|e| SensingError::Format(format!("bad number: {e}")))?;
                if vals.len() != 2 * n {
                    return Err(SensingError::Format(format!(
                        "row {r} of block {m} has {} values, expected {}",
                        vals.len(),
                        2 * n
                    )));
                }
                for c in 0..n {
                    b[(r, c)] = Complex64::new(vals[2 * c], vals[2 * c + 1]);
                }
            }
            blocks.push(b);
        }
        Ok(SensingCovariance { blocks })
    }
}

/// Per-AP orthonormal bases of the steering/derivative span, plus the echo
/// model expressed in those bases.
#[derive(Debug, Clone)]
pub struct CompressedModel {
    /// `bases[m]`: `N x d_m` orthonormal columns spanning
    /// `{a_km, da_km/dx, da_km/dy}` over all users k.
    pub bases: Vec<DMatrix<Complex64>>,
    pub dims: Vec<usize>,
    /// Compressed steering vectors `C_m^H a_km`.
    pub steering: Vec<Vec<DVector<Complex64>>>,
    /// Compressed steering derivatives.
    pub dsteer: Vec<Vec<[DVector<Complex64>; 2]>>,
    /// Two-hop path gains (shared with the full model).
    pub alpha: Vec<Vec<Vec<Complex64>>>,
}

impl CompressedModel {
    pub fn new(model: &EchoModel) -> Self {
        let (m_aps, k_users, n) = (model.n_aps, model.n_users, model.n_elements);
        let mut bases = Vec::with_capacity(m_aps);
        for m in 0..m_aps {
            // Column-normalize before the SVD so the rank decision is about
            // directions, not magnitudes (derivative vectors are ~500x
            // larger than steering vectors).
            let mut cols: Vec<DVector<Complex64>> = Vec::with_capacity(3 * k_users);
            for k in 0..k_users {
                cols.push(model.steering[k][m].clone());
                cols.push(model.dsteer[k][m][0].clone());
                cols.push(model.dsteer[k][m][1].clone());
            }
            let mut mat = DMatrix::zeros(n, cols.len());
            for (j, c) in cols.iter().enumerate() {
                let nrm = c.norm();
                if nrm > 0.0 {
                    let inv = Complex64::new(1.0 / nrm, 0.0);
                    for r in 0..n {
                        mat[(r, j)] = c[r] * inv;
                    }
                }
            }
            let svd = mat.svd(true, false);
            let u = svd.u.expect("SVD with U requested");
            let smax = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
            let rank = svd
                .singular_values
                .iter()
                .filter(|&&s| s > 1e-10 * smax)
                .count();
            bases.push(u.columns(0, rank).into_owned());
        }
        let dims: Vec<usize> = bases.iter().map(|b| b.ncols()).collect();
        let steering: Vec<Vec<DVector<Complex64>>> = (0..k_users)
            .map(|k| {
                (0..m_aps)
                    .map(|m| bases[m].adjoint() * &model.steering[k][m])
                    .collect()
            })
            .collect();
        let dsteer: Vec<Vec<[DVector<Complex64>; 2]>> = (0..k_users)
            .map(|k| {
                (0..m_aps)
                    .map(|m| {
                        [
                            bases[m].adjoint() * &model.dsteer[k][m][0],
                            bases[m].adjoint() * &model.dsteer[k][m][1],
                        ]
                    })
                    .collect()
            })
            .collect();
        CompressedModel {
            bases,
            dims,
            steering,
            dsteer,
            alpha: model.alpha.clone(),
        }
    }

    /// Lifts compressed covariance factors back to full size:
    /// `Psi_m = C_m Phi_m C_m^H`.
    pub fn reconstruct(&self, phis: &[DMatrix<Complex64>]) -> SensingCovariance {
        SensingCovariance {
            blocks: self
                .bases
                .iter()
                .zip(phis)
                .map(|(c, phi)| c * phi * c.adjoint())
                .collect(),
        }
    }
}

/// Inverse symmetric square root with an eigenvalue floor at
/// `1e-12 * lambda_max` (guards unobservable directions).
fn inv_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = m.clone().symmetric_eigen();
    let lmax = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    let floor = 1e-12 * lmax.max(1e-300);
    let n = m.nrows();
    let mut out = DMatrix::zeros(n, n);
    for (i, &l) in eig.eigenvalues.iter().enumerate() {
        let col = eig.eigenvectors.column(i);
        out += col * col.transpose() / l.max(floor).sqrt();
    }
    out
}

/// Congruence transforms derived from the uniform-covariance FIM: the LMI
/// is conditioned with `blkdiag(T_p, T_a)` where `T_p` is the full inverse
/// root of the EFFECTIVE (gain-eliminated) position FIM and `T_a` a
/// diagonal scaling of the gain FIM.
///
/// A full (matrix, not diagonal) position transform matters twice over.
/// Range and cross-range information differ by orders of magnitude in
/// few-AP geometries — and because those directions are not axis-aligned,
/// the per-user 2x2 blocks carry correlations arbitrarily close to +-1
/// that no diagonal rescaling can remove. After this congruence the
/// uniform effective FIM is exactly the identity, so the solver works on
/// an O(1), well-conditioned feasible region.
///
/// The gain FIM, by contrast, must NOT be whitened with a full inverse
/// root: when a geometry collapses an AP's observable span (shared
/// steering rays), `j_aa` is legitimately rank-deficient, and inverting
/// through its null space would blow up the cross block. Its diagonal is
/// uniform, so a diagonal scale is both safe and sufficient.
fn congruence_transforms(
    model: &EchoModel,
    config: &ScenarioConfig,
) -> Result<(DMatrix<f64>, DMatrix<f64>), FimError> {
    let psi = SensingCovariance::uniform(config, config.sensing_power_budget);
    let f = fim::assemble_fim(&psi, model)?;
    let (eff, _) = fim::effective_fim(&f);
    let ta = DMatrix::from_diagonal(&f.j_aa.diagonal().map(|v| 1.0 / v.max(1e-300).sqrt()));
    Ok((inv_sqrt(&eff), ta))
}

/// Result of the covariance SDP.
#[derive(Debug, Clone)]
pub struct SensingOptimum {
    pub covariance: SensingCovariance,
    /// CRLB of the optimized covariance, recomputed directly from the full
    /// uncompressed FIM (evaluated at `eta = 0.5`; the normalized
    /// `crlb_bar` inside is split-independent).
    pub crlb: CrlbResult,
    /// `(sigma^2/2) * objective` reported by the SDP, for cross-checking
    /// against the direct recomputation.
    pub sdp_crlb_bar: f64,
    /// Per-AP compressed dimensions actually used.
    pub compressed_dims: Vec<usize>,
}

/// Solves the CRLB-optimal sensing covariance SDP for the scenario.
pub fn optimize_sensing_covariance(
    model: &EchoModel,
    config: &ScenarioConfig,
) -> Result<SensingOptimum, SensingError> {
    let comp = CompressedModel::new(model);
    let (tp, ta) = congruence_transforms(model, config)?;
    let k_users = model.n_users;
    let m_aps = model.n_aps;
    let p_dim = 2 * k_users; // position FIM side
    let a_dim = 2 * k_users * m_aps * m_aps; // gain FIM side
    let p_s = config.sensing_power_budget;
    // The transformed variables are U' = T_p U T_p and V' = inv(T_p) V
    // inv(T_p), so tr(V) = tr(V' T_p^2); the coefficient matrix is
    // normalized by its largest entry to keep the cost vector near unit
    // scale.
    let cost = &tp * &tp;
    let cmax = cost.iter().fold(0.0f64, |a, &v| a.max(v.abs())).max(1e-300);

    let mut pb = ProblemBuilder::new();
    let phi_vars: Vec<Vec<usize>> = comp
        .dims
        .iter()
        .map(|&d| pb.new_vars(herm_param_count(d)).collect())
        .collect();
    let u_vars: Vec<usize> = pb.new_vars(sym_param_count(p_dim)).collect();
    let v_vars: Vec<usize> = pb.new_vars(sym_param_count(p_dim)).collect();

    // Objective: tr(V' C) with C = T_p^2 symmetric; the parameter for the
    // (r, c) upper-triangle entry (column-major offset c(c+1)/2 + r) feeds
    // both (r, c) and (c, r), hence the doubled off-diagonal coefficient.
    for c in 0..p_dim {
        for r in 0..=c {
            let w = if r == c { 1.0 } else { 2.0 };
            pb.add_objective(v_vars[c * (c + 1) / 2 + r], w * cost[(r, c)] / cmax);
        }
    }

    // [[V', I], [I, U']] PSD.
    {
        let vars: Vec<usize> = u_vars.iter().chain(v_vars.iter()).copied().collect();
        let nu = u_vars.len();
        pb.add_psd_probe(&vars, move |x| {
            let u = sym_unpack(p_dim, &x[..nu]);
            let v = sym_unpack(p_dim, &x[nu..]);
            let mut s = DMatrix::zeros(2 * p_dim, 2 * p_dim);
            s.view_mut((0, 0), (p_dim, p_dim)).copy_from(&v);
            s.view_mut((p_dim, p_dim), (p_dim, p_dim)).copy_from(&u);
            for i in 0..p_dim {
                s[(i, p_dim + i)] = 1.0;
                s[(p_dim + i, i)] = 1.0;
            }
            s
        })?;
    }

    // Transformed FIM LMI:
    // [[T_p Jpp T_p - U', T_p Jpa T_a], [T_a Jpa^T T_p, T_a Jaa T_a]].
    {
        let mut vars: Vec<usize> = phi_vars.iter().flatten().copied().collect();
        let n_phi = vars.len();
        vars.extend_from_slice(&u_vars);
        let dims = comp.dims.clone();
        let steering = comp.steering.clone();
        let dsteer = comp.dsteer.clone();
        let alpha = comp.alpha.clone();
        let (tp, ta) = (tp.clone(), ta.clone());
        pb.add_psd_probe(&vars, move |x| {
            let mut offset = 0;
            let phis: Vec<DMatrix<Complex64>> = dims
                .iter()
                .map(|&d| {
                    let m = herm_unpack(d, &x[offset..offset + herm_param_count(d)]);
                    offset += herm_param_count(d);
                    m
                })
                .collect();
            let u = sym_unpack(p_dim, &x[n_phi..]);
            let f = fim::assemble_fim_from_vectors(&steering, &dsteer, &alpha, &phis);
            let mut s = DMatrix::zeros(p_dim + a_dim, p_dim + a_dim);
            s.view_mut((0, 0), (p_dim, p_dim))
                .copy_from(&(&tp * &f.j_pp * &tp - &u));
            let pa = &tp * &f.j_pa * &ta;
            s.view_mut((0, p_dim), (p_dim, a_dim)).copy_from(&pa);
            s.view_mut((p_dim, 0), (a_dim, p_dim))
                .copy_from(&pa.transpose());
            s.view_mut((p_dim, p_dim), (a_dim, a_dim))
                .copy_from(&(&ta * &f.j_aa * &ta));
            s
        })?;
    }

    // Phi_m PSD (realified) and per-AP power budget trace(Phi_m) <= P_s
    // (trace is preserved by the orthonormal basis change).
    for (m, vars) in phi_vars.iter().enumerate() {
        let d = comp.dims[m];
        pb.add_hermitian_psd_probe(vars, move |x| herm_unpack(d, x))?;
    }
    for (m, vars) in phi_vars.iter().enumerate() {
        let d = comp.dims[m];
        let row: Vec<(usize, f64)> = (0..d).map(|i| (vars[i], 1.0)).collect();
        pb.add_nonneg_rows(&[(p_s, row)]);
    }

    // Deterministic tolerance ladder: some power levels leave the
    // interior-point method a hair short of the 1e-7 target ("almost
    // solved"); a clean 1e-6 re-solve is preferred, otherwise a stalled
    // near-optimal iterate from either rung is accepted. Both are safe
    // here because the result never leaves this function unvalidated: the
    // covariance is eigenvalue-clipped, budget-enforced, and its CRLB
    // recomputed directly from the full FIM below.
    let mut sol = pb.solve(1e-7)?;
    if sol.status != SolveStatus::Optimal {
        let retry = pb.solve(1e-6)?;
        sol = match (sol.status, retry.status) {
            (_, SolveStatus::Optimal) => retry,
            (SolveStatus::AlmostOptimal, _) => sol,
            _ => retry,
        };
    }
    if !matches!(
        sol.status,
        SolveStatus::Optimal | SolveStatus::AlmostOptimal
    ) {
        return Err(SensingError::SolverFailed {
            status: sol.status,
            detail: format!("{} [{}]", sol.raw_status, pb.describe()),
        });
    }

    // Reconstruct, clip tiny negative eigenvalues, and enforce the budget.
    let mut offset = 0;
    let phis: Vec<DMatrix<Complex64>> = comp
        .dims
        .iter()
        .map(|&d| {
            let m = herm_unpack(d, &sol.x[offset..offset + herm_param_count(d)]);
            offset += herm_param_count(d);
            m
        })
        .collect();
    let raw = comp.reconstruct(&phis);
    let mut blocks = Vec::with_capacity(raw.blocks.len());
    for (m, b) in raw.blocks.iter().enumerate() {
        let herm = (b + b.adjoint()) * Complex64::new(0.5, 0.0);
        let eig = herm.clone().symmetric_eigen();
        let lmax = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
        let lmin = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        if lmin < -1e-8 * lmax.max(1e-300) {
            return Err(SensingError::IndefiniteBlock { ap: m, eig: lmin });
        }
        let n = herm.nrows();
        let mut clipped = DMatrix::zeros(n, n);
        for (i, &l) in eig.eigenvalues.iter().enumerate() {
            if l > 0.0 {
                let col = eig.eigenvectors.column(i);
                let scaled = col * Complex64::new(l, 0.0);
                clipped += &scaled * col.adjoint();
            }
        }
        let tr: f64 = clipped.diagonal().iter().map(|d| d.re).sum();
        if tr > p_s {
            clipped *= Complex64::new(p_s / tr, 0.0);
        }
        blocks.push(clipped);
    }
    let covariance = SensingCovariance { blocks };
    let crlb = fim::crlb(&covariance, 0.5, model, config)?;
    Ok(SensingOptimum {
        covariance,
        crlb,
        sdp_crlb_bar: 0.5 * config.noise_power * cmax * sol.obj,
        compressed_dims: comp.dims,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn micro_config() -> ScenarioConfig {
        let mut cfg = ScenarioConfig::default();
        cfg.ap_centers = vec![[0.0, 0.0]];
        cfg.ap_orientations = vec![[cfg.element_spacing, 0.0]];
        cfg.user_positions = vec![[0.24, 0.18]];
        cfg.n_elements = 5;
        cfg.sensing_power_budget = 1.0;
        cfg.crlb_threshold = 1e-3;
        cfg
    }

    #[test]
    fn single_ap_fairness_baseline_solves() {
        // One AP watching all four users is the hardest conditioning case:
        // per-user range information is orders of magnitude weaker than
        // cross-range and the two mix through the geometry, so the
        // effective FIM carries near-unit correlations. The matrix
        // congruence must keep the SDP solvable here.
        let mut cfg = ScenarioConfig::default();
        cfg.ap_centers.truncate(1);
        cfg.ap_orientations.truncate(1);
        cfg.n_elements = 63;
        cfg.sensing_power_budget = 30.0;
        let model = EchoModel::new(&cfg).unwrap();
        let opt = optimize_sensing_covariance(&model, &cfg).unwrap();
        assert!(opt.crlb.crlb_bar.is_finite() && opt.crlb.crlb_bar > 0.0);
        // SDP objective and the direct recomputation from the full FIM
        // must agree.
        let rel = (opt.crlb.crlb_bar - opt.sdp_crlb_bar).abs() / opt.sdp_crlb_bar;
        assert!(rel < 1e-3, "sdp/direct mismatch: rel {rel:.3e}");
        // The optimizer must not lose to the uniform baseline.
        let uniform = SensingCovariance::uniform(&cfg, cfg.sensing_power_budget);
        let base = fim::crlb(&uniform, 0.5, &model, &cfg).unwrap();
        assert!(
            opt.crlb.crlb_bar <= base.crlb_bar * (1.0 + 1e-9),
            "optimized {} vs uniform {}",
            opt.crlb.crlb_bar,
            base.crlb_bar
        );
    }

    #[test]
    fn uniform_covariance_spends_budget() {
        let cfg = ScenarioConfig::default();
        let psi = SensingCovariance::uniform(&cfg, 10.0);
        for p in psi.per_ap_power() {
            assert!((p - 10.0).abs() < 1e-12);
        }
        assert!((psi.total_power() - 30.0).abs() < 1e-12);
    }

    #[test]
    fn compression_dims_on_reference_scenario() {
        // Two users share the endfire ray of the third AP, collapsing its
        // span from 12 to 7 dimensions; the others stay full.
        let cfg = ScenarioConfig::default();
        let model = EchoModel::new(&cfg).unwrap();
        let comp = CompressedModel::new(&model);
        assert_eq!(comp.dims, vec![12, 12, 7]);
        // Orthonormal bases...
        for c in &comp.bases {
            let g = c.adjoint() * c;
            assert!((&g - DMatrix::identity(g.nrows(), g.ncols())).norm() < 1e-10);
        }
        // ...that actually span the steering vectors and derivatives.
        for k in 0..model.n_users {
            for m in 0..model.n_aps {
                let c = &comp.bases[m];
                let proj = c * (c.adjoint() * &model.steering[k][m]);
                assert!((&proj - &model.steering[k][m]).norm() < 1e-8 * model.steering[k][m].norm());
                for q in 0..2 {
                    let v = &model.dsteer[k][m][q];
                    // The endfire users' derivatives at the third AP vanish
                    // identically (range changes along the array axis only);
                    // spans are about directions, so skip those.
                    if v.norm() < 1e-6 {
                        continue;
                    }
                    let proj = c * (c.adjoint() * v);
                    assert!((&proj - v).norm() < 1e-8 * v.norm());
                }
            }
        }
    }

    #[test]
    fn compressed_fim_is_lossless() {
        let cfg = ScenarioConfig::default();
        let model = EchoModel::new(&cfg).unwrap();
        let comp = CompressedModel::new(&model);
        // Random PSD factors in the compressed spaces.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let phis: Vec<DMatrix<Complex64>> = comp
            .dims
            .iter()
            .map(|&d| {
                let g = DMatrix::from_fn(d, d, |_, _| {
                    Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
                });
                &g * g.adjoint()
            })
            .collect();
        let psi = comp.reconstruct(&phis);
        let full = fim::assemble_fim(&psi, &model).unwrap();
        let compressed =
            fim::assemble_fim_from_vectors(&comp.steering, &comp.dsteer, &comp.alpha, &phis);
        assert!((&full.j_pp - &compressed.j_pp).norm() <= 1e-12 * full.j_pp.norm());
        assert!((&full.j_pa - &compressed.j_pa).norm() <= 1e-12 * full.j_pa.norm());
        assert!((&full.j_aa - &compressed.j_aa).norm() <= 1e-12 * full.j_aa.norm());
    }

    #[test]
    fn optimizer_beats_uniform_and_binds_power_on_reference() {
        let cfg = ScenarioConfig::default();
        let model = EchoModel::new(&cfg).unwrap();
        let uniform = SensingCovariance::uniform(&cfg, cfg.sensing_power_budget);
        let base = fim::crlb(&uniform, 0.5, &model, &cfg).unwrap();
        let opt = optimize_sensing_covariance(&model, &cfg).unwrap();
        // Strict improvement with a wide margin.
        assert!(
            opt.crlb.crlb_bar < base.crlb_bar / 2.0,
            "optimized {} vs uniform {}",
            opt.crlb.crlb_bar,
            base.crlb_bar
        );
        // SDP objective agrees with the direct uncompressed recomputation.
        // The interior-point solution can carry a complementarity gap of
        // order sqrt(ladder tolerance) between the surrogate tr(V) and the
        // exact tr(E^-1) of the reconstructed covariance, so the gate is
        // 1e-3, far below the factor-2 improvement asserted above. The SDP
        // value must sit on or above the direct value (V >= U^-1 >= E^-1).
        let rel = (opt.sdp_crlb_bar - opt.crlb.crlb_bar).abs() / opt.crlb.crlb_bar;
        assert!(rel < 1e-3, "SDP {} direct {}", opt.sdp_crlb_bar, opt.crlb.crlb_bar);
        assert!(opt.sdp_crlb_bar > opt.crlb.crlb_bar * (1.0 - 1e-6));
        // Power budget: every block within budget, at least one tight.
        let powers = opt.covariance.per_ap_power();
        for &p in &powers {
            assert!(p <= cfg.sensing_power_budget * (1.0 + 1e-6));
        }
        let max = powers.iter().cloned().fold(0.0f64, f64::max);
        assert!(
            max >= 0.999 * cfg.sensing_power_budget,
            "no AP transmits at full power: {powers:?}"
        );
        // Blocks stay Hermitian PSD.
        for b in &opt.covariance.blocks {
            assert!((b - b.adjoint()).norm() < 1e-10 * b.norm());
            let eigs = b.clone().symmetric_eigen().eigenvalues;
            let lmax = eigs.iter().cloned().fold(0.0f64, f64::max);
            assert!(eigs.iter().all(|&l| l >= -1e-10 * lmax));
        }
    }

    #[test]
    fn doubling_sensing_power_halves_optimal_crlb() {
        let mut cfg = micro_config();
        cfg.user_positions = vec![[0.24, 0.18], [-0.1, 0.3]];
        let model = EchoModel::new(&cfg).unwrap();
        let opt1 = optimize_sensing_covariance(&model, &cfg).unwrap();
        cfg.sensing_power_budget = 2.0;
        let model2 = EchoModel::new(&cfg).unwrap();
        let opt2 = optimize_sensing_covariance(&model2, &cfg).unwrap();
        let ratio = opt2.crlb.crlb_bar / opt1.crlb.crlb_bar;
        assert!(
            (ratio - 0.5).abs() < 2e-3,
            "doubling power gave ratio {ratio}"
        );
    }

    #[test]
    fn micro_scenario_sdp_matches_rank_one_grid_oracle() {
        // Single AP, single user: the optimal covariance concentrates on the
        // 3-dimensional steering/derivative span. A dense random sample of
        // rank-one covariances inside that span must come within 2% of the
        // SDP optimum (and never beat it).
        let cfg = micro_config();
        let model = EchoModel::new(&cfg).unwrap();
        let comp = CompressedModel::new(&model);
        assert_eq!(comp.dims, vec![3]);
        let opt = optimize_sensing_covariance(&model, &cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut best = f64::INFINITY;
        for _ in 0..10_000 {
            let mut u = DVector::from_fn(3, |_, _| {
                Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
            });
            let nrm = u.norm();
            u /= Complex64::new(nrm, 0.0);
            let phi = (&u * u.adjoint()) * Complex64::new(cfg.sensing_power_budget, 0.0);
            let blocks =
                fim::assemble_fim_from_vectors(&comp.steering, &comp.dsteer, &comp.alpha, &[phi]);
            if let Ok(r) = fim::crlb_from_blocks(&blocks, 0.5, &cfg) {
                best = best.min(r.crlb_bar);
            }
        }
        assert!(
            opt.crlb.crlb_bar <= best * (1.0 + 1e-6),
            "a sampled covariance beat the SDP: {} vs {}",
            best,
            opt.crlb.crlb_bar
        );
        let gap = (best - opt.crlb.crlb_bar) / opt.crlb.crlb_bar;
        assert!(gap < 0.02, "grid oracle gap {gap}");
    }

    #[test]
    fn text_format_round_trips_exactly() {
        let cfg = ScenarioConfig::default();
        let model = EchoModel::new(&cfg).unwrap();
        let comp = CompressedModel::new(&model);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let phis: Vec<DMatrix<Complex64>> = comp
            .dims
            .iter()
            .map(|&d| {
                let g = DMatrix::from_fn(d, d, |_, _| {
                    Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
                });
                &g * g.adjoint()
            })
            .collect();
        let psi = comp.reconstruct(&phis);
        let text = psi.export_text();
        let back = SensingCovariance::parse_text(&text).unwrap();
        assert_eq!(psi.blocks.len(), back.blocks.len());
        for (a, b) in psi.blocks.iter().zip(back.blocks.iter()) {
            assert_eq!(a, b, "text round trip must be exact");
        }
        // Corrupt header rejected.
        assert!(SensingCovariance::parse_text("cfisac-psi v2\nblocks 0 size 0\n").is_err());
    }
}
