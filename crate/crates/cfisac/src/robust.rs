//! Sensing-error-coupled robust downlink beamforming.
//!
//! The communication phase serves K users with cell-free beams
//! `w_k in C^{MN}` under per-AP power budgets. The transmitter only knows
//! the channel estimates `hhat_k` reconstructed from the sensed positions;
//! the true channel deviates by per-AP errors `||e_km|| <= eps_km`, where
//! `eps_km = alpha_e * sqrt(crlb(eta)) * ||hhat_km||` couples the
//! communication robustness requirement to the sensing accuracy and the
//! time split.
//!
//! Worst-case SINR >= gamma for user k over all error balls is certified by
//! the S-procedure: with `M_k = (1/gamma) W_k - sum_{k' != k} W_{k'}` the
//! quadratic `(hhat+e)^H M_k (hhat+e) - sigma^2 >= 0` on every ball is
//! implied by existence of multipliers `lambda_km >= 0` with
//!
//! ```text
//! [[ M_k + Lambda_k,      M_k hhat_k                                   ],
//!  [ hhat_k^H M_k,        hhat_k^H M_k hhat_k - sigma^2 - lambda_k^T eps_k^2 ]]  PSD
//! ```
//!
//! where `Lambda_k = blkdiag(lambda_km I_N)`. The `- sigma^2` in the corner
//! is what makes the certificate meaningful: dropping it (or flipping its
//! sign) would let `w = 0, lambda = 0` certify arbitrary SINR targets.
//!
//! Two exact reductions keep the SDPs small and well-scaled:
//!
//! 1. **Channel-span compression.** Optimal beam covariances live on the
//!    per-AP span of the user channels (projecting onto it preserves every
//!    SINR form and only lowers power), and because `Lambda_k` acts as a
//!    scalar on each AP block, the S-procedure LMI restricted to the span is
//!    equivalent to the full one. Beams therefore use `N x d_m` per-AP bases
//!    of the channel span (certification re-derives a basis from beams plus
//!    channels so it accepts arbitrary input beams).
//! 2. **Corner scaling.** A congruence by `diag(I, 1/||hhat_k||)` brings
//!    the corner row of each LMI to the same order as the matrix block.
//!
//! All rates are block-normalized: a rate `R` at split `eta` requires
//! per-user SINR `gamma = 2^(R / (eta T)) - 1`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::channel::{self, ChannelError, ChannelSet};
use crate::conic::{self, herm_param_count, herm_unpack, ProblemBuilder, SolveStatus};
use crate::scenario::ScenarioConfig;

#[derive(Debug, Error)]
pub enum RobustError {
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Conic(#[from] conic::ConicError),
    #[error("beamforming SDP did not solve: {status:?} ({detail})")]
    SolverFailed { status: SolveStatus, detail: String },
    #[error("eta must lie strictly inside (0, 1), got {0}")]
    EtaOutOfRange(f64),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

/// Downlink beams, either as relaxed covariances or extracted vectors, in
/// the full stacked `MN` space.
#[derive(Debug, Clone)]
pub enum BeamformerSet {
    Relaxed(Vec<DMatrix<Complex64>>),
    Vectors(Vec<DVector<Complex64>>),
}

impl BeamformerSet {
    /// Per-AP transmitted powers.
    pub fn per_ap_power(&self, config: &ScenarioConfig) -> Vec<f64> {
        let n = config.n_elements;
        (0..config.n_aps())
            .map(|m| match self {
                BeamformerSet::Relaxed(ws) => ws
                    .iter()
                    .map(|w| {
                        (0..n).map(|i| w[(m * n + i, m * n + i)].re).sum::<f64>()
                    })
                    .sum(),
                BeamformerSet::Vectors(ws) => ws
                    .iter()
                    .map(|w| w.rows(m * n, n).norm().powi(2))
                    .sum(),
            })
            .collect()
    }

    pub fn zero_vectors(config: &ScenarioConfig) -> Self {
        let mn = config.n_aps() * config.n_elements;
        BeamformerSet::Vectors(
            (0..config.n_users()).map(|_| DVector::zeros(mn)).collect(),
        )
    }
}

/// Downlink channel model with the per-AP channel-span compression.
#[derive(Debug, Clone)]
pub struct CommModel {
    pub channels: ChannelSet,
    /// Per-AP orthonormal bases `N x d_m` of `span{hhat_km}_k`.
    pub bases: Vec<DMatrix<Complex64>>,
    pub dims: Vec<usize>,
    /// Compressed stacked channels (dimension `D = sum d_m`).
    pub compressed: Vec<DVector<Complex64>>,
    n_elements: usize,
}

/// Orthonormal per-AP basis of the given per-AP column families.
fn per_ap_span(
    columns: &[Vec<DVector<Complex64>>], // columns[j][m] is an N-vector at AP m
    m_aps: usize,
    n: usize,
) -> (Vec<DMatrix<Complex64>>, Vec<usize>) {
    let mut bases = Vec::with_capacity(m_aps);
    for m in 0..m_aps {
        let mut mat = DMatrix::zeros(n, columns.len());
        for (j, family) in columns.iter().enumerate() {
            let v = &family[m];
            let nrm = v.norm();
            if nrm > 0.0 {
                let inv = Complex64::new(1.0 / nrm, 0.0);
                for r in 0..n {
                    mat[(r, j)] = v[r] * inv;
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
    let dims = bases.iter().map(|b| b.ncols()).collect();
    (bases, dims)
}

impl CommModel {
    pub fn new(config: &ScenarioConfig) -> Result<Self, RobustError> {
        let channels = channel::channel_set(config)?;
        let (m_aps, n, k_users) = (config.n_aps(), config.n_elements, config.n_users());
        let families: Vec<Vec<DVector<Complex64>>> = (0..k_users)
            .map(|k| (0..m_aps).map(|m| channels.vectors[k][m].clone()).collect())
            .collect();
        let (bases, dims) = per_ap_span(&families, m_aps, n);
        let compressed = (0..k_users)
            .map(|k| compress_stacked(&channels.stacked[k], &bases, n))
            .collect();
        Ok(CommModel {
            channels,
            bases,
            dims,
            compressed,
            n_elements: n,
        })
    }

    pub fn total_dim(&self) -> usize {
        self.dims.iter().sum()
    }

    /// Lifts a compressed vector back to the stacked `MN` space.
    pub fn lift(&self, v: &DVector<Complex64>) -> DVector<Complex64> {
        lift_stacked(v, &self.bases, self.n_elements)
    }

    /// Compresses a stacked covariance onto the per-AP channel span.
    ///
    /// Exact (a congruence, not an approximation) whenever the covariance
    /// lives on the span — true for everything produced by the solvers in
    /// this module, which work in compressed coordinates and lift on exit.
    /// For foreign beams with off-span components this is a lossy projection
    /// and must not be fed to certification (use
    /// [`certify_worst_case_rate`], which rebuilds a basis covering the
    /// beams).
    pub fn compress_covariance(&self, w: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let n = self.n_elements;
        let d = self.total_dim();
        let mut out = DMatrix::zeros(d, d);
        let mut off_r = 0;
        for (mr, br) in self.bases.iter().enumerate() {
            let mut off_c = 0;
            for (mc, bc) in self.bases.iter().enumerate() {
                let blk = w.view((mr * n, mc * n), (n, n));
                let compressed = br.adjoint() * blk * bc;
                out.view_mut((off_r, off_c), (br.ncols(), bc.ncols()))
                    .copy_from(&compressed);
                off_c += bc.ncols();
            }
            off_r += br.ncols();
        }
        out
    }
}

fn compress_stacked(
    v: &DVector<Complex64>,
    bases: &[DMatrix<Complex64>],
    n: usize,
) -> DVector<Complex64> {
    let total: usize = bases.iter().map(|b| b.ncols()).sum();
    let mut out = DVector::zeros(total);
    let mut off = 0;
    for (m, b) in bases.iter().enumerate() {
        let seg = b.adjoint() * v.rows(m * n, n);
        out.rows_mut(off, b.ncols()).copy_from(&seg);
        off += b.ncols();
    }
    out
}

fn lift_stacked(
    v: &DVector<Complex64>,
    bases: &[DMatrix<Complex64>],
    n: usize,
) -> DVector<Complex64> {
    let m_aps = bases.len();
    let mut out = DVector::zeros(m_aps * n);
    let mut off = 0;
    for (m, b) in bases.iter().enumerate() {
        let seg = b * v.rows(off, b.ncols());
        out.rows_mut(m * n, n).copy_from(&seg);
        off += b.ncols();
    }
    out
}

/// SINR target for block-normalized rate `rate` at split `eta`.
pub fn gamma_from_rate(rate: f64, eta: f64, config: &ScenarioConfig) -> f64 {
    (rate / (eta * config.block_duration)).exp2() - 1.0
}

/// Block-normalized rate delivered by SINR `gamma` at split `eta`.
pub fn rate_from_gamma(gamma: f64, eta: f64, config: &ScenarioConfig) -> f64 {
    eta * config.block_duration * (1.0 + gamma).log2()
}

/// A safe upper bound on any achievable sum-normalized per-user rate.
pub fn rate_upper_bound(comm: &CommModel, eta: f64, config: &ScenarioConfig) -> f64 {
    let best = comm
        .channels
        .stacked
        .iter()
        .map(|h| h.norm().powi(2))
        .fold(0.0f64, f64::max);
    let snr = config.n_aps() as f64 * config.comm_power_budget * best / config.noise_power;
    eta * config.block_duration * config.n_users() as f64 * (1.0 + snr).log2()
}

/// The compressed S-procedure LMI for user `k`, with the corner row scaled
/// by `1/||h_k||`. `w` holds the compressed beam covariances of all users.
fn robust_lmi(
    w: &[DMatrix<Complex64>],
    lambda_k: &[f64],
    gamma: f64,
    k: usize,
    comm: &CommModel,
    eps: &[Vec<f64>],
    sigma2: f64,
) -> DMatrix<Complex64> {
    let d = comm.total_dim();
    let h = &comm.compressed[k];
    let hn = h.norm().max(1e-300);
    let mut m = w[k].clone() * Complex64::new(1.0 / gamma, 0.0);
    for (k2, wk2) in w.iter().enumerate() {
        if k2 != k {
            m -= wk2;
        }
    }
    let mut out = DMatrix::zeros(d + 1, d + 1);
    out.view_mut((0, 0), (d, d)).copy_from(&m);
    let mut off = 0;
    for (ap, &dm) in comm.dims.iter().enumerate() {
        for i in 0..dm {
            out[(off + i, off + i)] += Complex64::new(lambda_k[ap], 0.0);
        }
        off += dm;
    }
    let u = (&m * h) / Complex64::new(hn, 0.0);
    for i in 0..d {
        out[(i, d)] = u[i];
        out[(d, i)] = u[i].conj();
    }
    let quad = (h.adjoint() * &m * h)[(0, 0)].re;
    let penalty: f64 = lambda_k
        .iter()
        .zip(eps[k].iter())
        .map(|(l, e)| l * e * e)
        .sum();
    out[(d, d)] = Complex64::new((quad - sigma2 - penalty) / (hn * hn), 0.0);
    out
}

/// Which beam parameterization the feasibility SDP optimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BeamStructure {
    /// Full covariances on the channel span.
    Full,
    /// Covariances restricted to the per-AP matched-filter directions
    /// (maximum-ratio transmission with optimized per-AP allocation).
    MrtDirections,
}

/// Outcome of one robust feasibility solve at a fixed SINR target.
#[derive(Debug, Clone)]
pub struct FeasibilityOutcome {
    pub feasible: bool,
    /// Relaxed covariances (full space) when feasible.
    pub beams: Option<Vec<DMatrix<Complex64>>>,
    pub lambda: Option<Vec<Vec<f64>>>,
    /// True when the solver failed numerically (counted as infeasible).
    pub numerical_failure: bool,
    /// Solver status text of the deciding solve, for diagnostics.
    pub raw_status: String,
}

/// True when user `k`'s error balls contain `-h` entirely, in which case the
/// adversary can null the channel and no positive SINR is robustly
/// achievable — for any beams, since `q(-h) = -sigma^2 < 0`.
///
/// This case must be decided analytically: its infeasibility margin is
/// exactly `sigma^2`, far below interior-point resolution at transmit-power
/// scale.
fn channel_swallowed(k: usize, comm: &CommModel, eps: &[Vec<f64>]) -> bool {
    comm.channels.vectors[k]
        .iter()
        .zip(eps[k].iter())
        .all(|(h, &e)| e >= h.norm() * (1.0 - 1e-12))
}

/// Solves the robust feasibility SDP at SINR target `gamma`.
pub fn robust_feasibility(
    gamma: f64,
    comm: &CommModel,
    eps: &[Vec<f64>],
    config: &ScenarioConfig,
    structure: BeamStructure,
) -> Result<FeasibilityOutcome, RobustError> {
    let k_users = config.n_users();
    let m_aps = config.n_aps();
    let d = comm.total_dim();
    let sigma2 = config.noise_power;
    if eps.len() != k_users {
        return Err(RobustError::DimensionMismatch(format!(
            "eps has {} users, scenario has {k_users}",
            eps.len()
        )));
    }
    if gamma <= 0.0 {
        let mn = config.n_aps() * config.n_elements;
        return Ok(FeasibilityOutcome {
            feasible: true,
            beams: Some((0..k_users).map(|_| DMatrix::zeros(mn, mn)).collect()),
            lambda: Some((0..k_users).map(|_| vec![0.0; m_aps]).collect()),
            numerical_failure: false,
            raw_status: "trivial: gamma <= 0".into(),
        });
    }
    if (0..k_users).any(|k| channel_swallowed(k, comm, eps)) {
        return Ok(FeasibilityOutcome {
            feasible: false,
            beams: None,
            lambda: None,
            numerical_failure: false,
            raw_status: "analytic: error ball swallows a channel".into(),
        });
    }

    // Internal power unit. The minimum-power solution scales like
    // `gamma * sigma2 / ||h||^2`, which for realistic noise floors sits
    // many orders below the per-node budget; left at watt scale, the
    // covariance blocks are so small that routine interior-point cone
    // violations (~1e-7 absolute) dwarf them and stall the solver. All
    // powers are therefore expressed in units of the expected solution
    // scale (capped by the budget) and converted back on return. The
    // constraint set is homogeneous in (W, lambda, sigma2, budget), so
    // this is an exact reparameterization, not an approximation.
    let hmin2 = comm
        .compressed
        .iter()
        .map(|h| h.norm_squared())
        .fold(f64::INFINITY, f64::min)
        .max(1e-300);
    let unit = (gamma * sigma2 / hmin2)
        .min(config.comm_power_budget)
        .max(1e-300);
    let sigma2_eff = sigma2 / unit;
    let budget_eff = config.comm_power_budget / unit;

    // MRT directions: compressed normalized per-AP channels, one column per
    // AP, embedded at the AP's offset.
    let mrt_dirs: Vec<DMatrix<Complex64>> = if structure == BeamStructure::MrtDirections {
        (0..k_users)
            .map(|k| {
                let mut a = DMatrix::zeros(d, m_aps);
                let mut off = 0;
                for (m, &dm) in comm.dims.iter().enumerate() {
                    let seg = comm.bases[m].adjoint() * &comm.channels.vectors[k][m];
                    let nrm = seg.norm().max(1e-300);
                    for i in 0..dm {
                        a[(off + i, m)] = seg[i] / Complex64::new(nrm, 0.0);
                    }
                    off += dm;
                }
                a
            })
            .collect()
    } else {
        Vec::new()
    };
    let side = match structure {
        BeamStructure::Full => d,
        BeamStructure::MrtDirections => m_aps,
    };

    let mut pb = ProblemBuilder::new();
    let w_vars: Vec<Vec<usize>> = (0..k_users)
        .map(|_| pb.new_vars(herm_param_count(side)).collect())
        .collect();
    let l_vars: Vec<Vec<usize>> = (0..k_users)
        .map(|_| pb.new_vars(m_aps).collect())
        .collect();

    // Build compressed covariances from parameters.
    let unpack_w = {
        let mrt_dirs = mrt_dirs.clone();
        move |k: usize, params: &[f64]| -> DMatrix<Complex64> {
            let raw = herm_unpack(side, params);
            match structure {
                BeamStructure::Full => raw,
                BeamStructure::MrtDirections => &mrt_dirs[k] * raw * mrt_dirs[k].adjoint(),
            }
        }
    };

    // Per-user S-procedure LMIs.
    for k in 0..k_users {
        let mut vars: Vec<usize> = w_vars.iter().flatten().copied().collect();
        vars.extend_from_slice(&l_vars[k]);
        let comm_c = comm.clone();
        let eps_c: Vec<Vec<f64>> = eps.to_vec();
        let unpack = unpack_w.clone();
        let wlen = herm_param_count(side);
        pb.add_hermitian_psd_probe(&vars, move |x| {
            let w: Vec<DMatrix<Complex64>> = (0..k_users)
                .map(|k2| unpack(k2, &x[k2 * wlen..(k2 + 1) * wlen]))
                .collect();
            let lam = &x[k_users * wlen..];
            robust_lmi(&w, lam, gamma, k, &comm_c, &eps_c, sigma2_eff)
        })?;
    }
    // Covariance factors PSD.
    for vars in &w_vars {
        pb.add_hermitian_psd_probe(vars, move |x| herm_unpack(side, x))?;
    }
    // Multipliers nonnegative: s = lambda >= 0.
    let l_rows: Vec<(f64, Vec<(usize, f64)>)> = l_vars
        .iter()
        .flatten()
        .map(|&v| (0.0, vec![(v, -1.0)]))
        .collect();
    pb.add_nonneg_rows(&l_rows);
    // Least total power among feasible points: leaves the feasibility
    // verdict untouched but lands on an extreme point, which for SINR-type
    // constraint sets is (near-)rank-one — pure feasibility would return a
    // high-rank interior point and ruin the extraction.
    for vars in &w_vars {
        for &v in &vars[..side] {
            pb.add_objective(v, 1.0);
        }
    }
    // Per-AP power: sum_k trace(W_k block m) <= P_max (internal units).
    let power_rows: Vec<(f64, Vec<(usize, f64)>)> = (0..m_aps)
        .map(|m| {
            let mut terms = Vec::new();
            for k in 0..k_users {
                match structure {
                    BeamStructure::Full => {
                        // Diagonal parameters of the AP-m segment.
                        let off: usize = comm.dims[..m].iter().sum();
                        for i in 0..comm.dims[m] {
                            terms.push((w_vars[k][off + i], 1.0));
                        }
                    }
                    BeamStructure::MrtDirections => {
                        // trace(A P A^H block m) = P[m, m] (unit columns).
                        terms.push((w_vars[k][m], 1.0));
                    }
                }
            }
            (budget_eff, terms)
        })
        .collect();
    pb.add_nonneg_rows(&power_rows);

    // Feasibility is decided at tight tolerances. When the interior-point
    // method stalls at reduced precision ("almost solved") — common for
    // these S-procedure LMIs — the iterate is accepted only after an
    // independent re-check of every constraint below, so the verdict never
    // depends on solver luck. Genuinely infeasible targets produce
    // infeasibility certificates and are never accepted; treating stalls
    // as infeasible instead would make the rate bisection path-dependent.
    let mut sol = pb.solve(1e-8)?;
    if sol.status == SolveStatus::NumericalFailure {
        sol = pb.solve(1e-7)?;
    }
    let wlen = herm_param_count(side);

    // PSD part of each reconstructed covariance. Stalled iterates carry
    // small negative eigenvalues; clipping first means the matrices that
    // are verified below are exactly the matrices handed back.
    let clipped_covariances = |x: &[f64]| -> Vec<DMatrix<Complex64>> {
        (0..k_users)
            .map(|k| {
                let raw = unpack_w(k, &x[k * wlen..(k + 1) * wlen]);
                let herm = (&raw + &raw.adjoint()) * Complex64::new(0.5, 0.0);
                let eig = herm.clone().symmetric_eigen();
                let mut out = DMatrix::zeros(raw.nrows(), raw.ncols());
                for (i, &l) in eig.eigenvalues.iter().enumerate() {
                    if l > 0.0 {
                        let col = eig.eigenvectors.column(i);
                        out += &(col * Complex64::new(l, 0.0)) * col.adjoint();
                    }
                }
                out
            })
            .collect()
    };
    let clamped_lambdas = |x: &[f64]| -> Vec<Vec<f64>> {
        (0..k_users)
            .map(|k| {
                x[k_users * wlen + k * m_aps..k_users * wlen + (k + 1) * m_aps]
                    .iter()
                    .map(|&l| l.max(0.0))
                    .collect()
            })
            .collect()
    };

    // Independent constraint check (compressed space, internal units).
    let verify = |w: &[DMatrix<Complex64>], lam: &[Vec<f64>]| -> Result<(), String> {
        for m in 0..m_aps {
            let off: usize = comm.dims[..m].iter().sum();
            let mut p = 0.0;
            for wk in w {
                for i in 0..comm.dims[m] {
                    p += wk[(off + i, off + i)].re;
                }
            }
            if p > budget_eff * (1.0 + 1e-6) {
                return Err(format!(
                    "power {p:.9e} over budget {budget_eff:.9e} at node {m}"
                ));
            }
        }
        for k in 0..k_users {
            let l = robust_lmi(w, &lam[k], gamma, k, comm, eps, sigma2_eff);
            let lh = (&l + &l.adjoint()) * Complex64::new(0.5, 0.0);
            let eig = lh.symmetric_eigen().eigenvalues;
            let amax = l.iter().fold(0.0f64, |a, v| a.max(v.norm()));
            let bottom = eig.iter().cloned().fold(f64::INFINITY, f64::min);
            if bottom < -1e-5 * amax.max(1e-300) {
                return Err(format!(
                    "user {k} robust constraint violated: eig {bottom:.3e} vs scale {amax:.3e}"
                ));
            }
        }
        Ok(())
    };

    // Lift to the stacked space and convert back to watts.
    let accept = |w: &[DMatrix<Complex64>], lam: &[Vec<f64>], note: String| -> FeasibilityOutcome {
        let beams: Vec<DMatrix<Complex64>> = w
            .iter()
            .map(|wk| lift_covariance(wk, comm) * Complex64::new(unit, 0.0))
            .collect();
        let lambda: Vec<Vec<f64>> = lam
            .iter()
            .map(|row| row.iter().map(|&l| l * unit).collect())
            .collect();
        FeasibilityOutcome {
            feasible: true,
            beams: Some(beams),
            lambda: Some(lambda),
            numerical_failure: false,
            raw_status: note,
        }
    };

    match sol.status {
        SolveStatus::Optimal => {
            let w = clipped_covariances(&sol.x);
            let lam = clamped_lambdas(&sol.x);
            Ok(accept(&w, &lam, sol.raw_status))
        }
        SolveStatus::AlmostOptimal => {
            let w = clipped_covariances(&sol.x);
            let lam = clamped_lambdas(&sol.x);
            match verify(&w, &lam) {
                Ok(()) => {
                    let note =
                        format!("{} (iterate verified against constraints)", sol.raw_status);
                    Ok(accept(&w, &lam, note))
                }
                Err(reason) => Ok(FeasibilityOutcome {
                    feasible: false,
                    beams: None,
                    lambda: None,
                    numerical_failure: true,
                    raw_status: format!(
                        "{} (iterate failed verification: {reason})",
                        sol.raw_status
                    ),
                }),
            }
        }
        SolveStatus::Infeasible => Ok(FeasibilityOutcome {
            feasible: false,
            beams: None,
            lambda: None,
            numerical_failure: false,
            raw_status: sol.raw_status,
        }),
        SolveStatus::NumericalFailure => Ok(FeasibilityOutcome {
            feasible: false,
            beams: None,
            lambda: None,
            numerical_failure: true,
            raw_status: sol.raw_status,
        }),
    }
}

/// Lifts a compressed covariance to the stacked space.
fn lift_covariance(w: &DMatrix<Complex64>, comm: &CommModel) -> DMatrix<Complex64> {
    let n = comm.n_elements;
    let m_aps = comm.bases.len();
    let mn = m_aps * n;
    // Block-structured lift: W_full[(m, m')] = B_m W[(m, m')] B_{m'}^H.
    let mut full = DMatrix::zeros(mn, mn);
    let mut off_r = 0;
    for (mr, br) in comm.bases.iter().enumerate() {
        let mut off_c = 0;
        for (mc, bc) in comm.bases.iter().enumerate() {
            let blk = w.view((off_r, off_c), (br.ncols(), bc.ncols()));
            let lifted = br * blk * bc.adjoint();
            full.view_mut((mr * n, mc * n), (n, n)).copy_from(&lifted);
            off_c += bc.ncols();
        }
        off_r += br.ncols();
    }
    full
}

/// Result of the bisection rate optimizer.
#[derive(Debug, Clone)]
pub struct BiRboResult {
    /// Largest certified-feasible block-normalized rate.
    pub rate: f64,
    pub gamma: f64,
    /// Relaxed covariances achieving `rate` (zero beams when `rate` is 0).
    pub beams: Vec<DMatrix<Complex64>>,
    pub lambda: Vec<Vec<f64>>,
    pub iterations: usize,
    /// Bisection interval after each iteration.
    pub interval_history: Vec<(f64, f64)>,
    /// Number of feasibility solves that failed numerically (counted
    /// infeasible).
    pub numerical_failures: usize,
}

/// Bisection robust-beamforming optimizer: the largest rate whose SINR
/// target admits a robust-feasible beam set at split `eta`.
///
/// `lower_seed` warm-starts the bisection from an already-achieved rate
/// (verified before use), which keeps alternating optimization traces
/// monotone.
pub fn bi_rbo(
    comm: &CommModel,
    eps: &[Vec<f64>],
    eta: f64,
    config: &ScenarioConfig,
    tol_rel: f64,
    structure: BeamStructure,
    lower_seed: Option<f64>,
) -> Result<BiRboResult, RobustError> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(RobustError::EtaOutOfRange(eta));
    }
    let mn = config.n_aps() * config.n_elements;
    let mut lo = 0.0f64;
    let mut best_beams: Vec<DMatrix<Complex64>> =
        (0..config.n_users()).map(|_| DMatrix::zeros(mn, mn)).collect();
    let mut best_lambda: Vec<Vec<f64>> = (0..config.n_users())
        .map(|_| vec![0.0; config.n_aps()])
        .collect();
    let mut numerical_failures = 0;

    // Verify the seed before trusting it.
    if let Some(seed) = lower_seed {
        if seed > 0.0 {
            let out = robust_feasibility(
                gamma_from_rate(seed, eta, config),
                comm,
                eps,
                config,
                structure,
            )?;
            if out.feasible {
                lo = seed;
                best_beams = out.beams.unwrap();
                best_lambda = out.lambda.unwrap();
            } else if out.numerical_failure {
                numerical_failures += 1;
            }
        }
    }

    let mut hi = rate_upper_bound(comm, eta, config).max(lo * 1.001 + 1e-9);
    let mut history = vec![(lo, hi)];
    let mut iterations = 0;
    while hi - lo > tol_rel * hi.max(1e-12) && iterations < 60 {
        let mid = 0.5 * (lo + hi);
        let out = robust_feasibility(
            gamma_from_rate(mid, eta, config),
            comm,
            eps,
            config,
            structure,
        )?;
        if out.feasible {
            lo = mid;
            best_beams = out.beams.unwrap();
            best_lambda = out.lambda.unwrap();
        } else {
            if out.numerical_failure {
                numerical_failures += 1;
            }
            hi = mid;
        }
        iterations += 1;
        history.push((lo, hi));
    }
    Ok(BiRboResult {
        rate: lo,
        gamma: gamma_from_rate(lo, eta, config),
        beams: best_beams,
        lambda: best_lambda,
        iterations,
        interval_history: history,
        numerical_failures,
    })
}

/// Rank-one beam extraction: principal component of each covariance, scaled
/// (never up) to respect the per-AP budgets.
///
/// Because `lambda_max v v^H` is dominated by `W`, each per-AP power of the
/// extracted beam is at most the relaxed one, so the scaling is a numerical
/// safety net only.
pub fn extract_rank_one(
    relaxed: &[DMatrix<Complex64>],
    config: &ScenarioConfig,
) -> (Vec<DVector<Complex64>>, Vec<f64>) {
    let n = config.n_elements;
    let mut vectors: Vec<DVector<Complex64>> = Vec::with_capacity(relaxed.len());
    let mut defects = Vec::with_capacity(relaxed.len());
    for w in relaxed {
        let herm = (w + w.adjoint()) * Complex64::new(0.5, 0.0);
        let eig = herm.symmetric_eigen();
        let mut imax = 0;
        for i in 1..eig.eigenvalues.len() {
            if eig.eigenvalues[i] > eig.eigenvalues[imax] {
                imax = i;
            }
        }
        let lmax = eig.eigenvalues[imax].max(0.0);
        let tr: f64 = eig.eigenvalues.iter().map(|l| l.max(0.0)).sum();
        defects.push(if tr > 0.0 { 1.0 - lmax / tr } else { 0.0 });
        let v = eig.eigenvectors.column(imax).into_owned();
        vectors.push(v * Complex64::new(lmax.sqrt(), 0.0));
    }
    // Common down-scaling if any per-AP budget is (numerically) exceeded.
    let mut rho: f64 = 1.0;
    for m in 0..config.n_aps() {
        let p: f64 = vectors.iter().map(|v| v.rows(m * n, n).norm().powi(2)).sum();
        if p > config.comm_power_budget {
            rho = rho.min((config.comm_power_budget / p).sqrt());
        }
    }
    if rho < 1.0 {
        for v in vectors.iter_mut() {
            *v *= Complex64::new(rho, 0.0);
        }
    }
    (vectors, defects)
}

/// Worst-case rate certificate for a fixed beam set.
#[derive(Debug, Clone)]
pub struct RobustRateCertificate {
    /// Largest certified block-normalized rate.
    pub rate: f64,
    pub gamma: f64,
    /// Per-user S-procedure margins at the certified target.
    pub per_user_margin: Vec<f64>,
    /// Certifying multipliers at the certified target.
    pub lambda: Vec<Vec<f64>>,
}

/// Largest per-user S-procedure margin for fixed beams at SINR target
/// `gamma`: `max s` such that the user's LMI minus `s I` stays PSD over
/// `lambda >= 0`. Positive margins certify the target.
fn certification_margin(
    w_compressed: &[DMatrix<Complex64>],
    gamma: f64,
    k: usize,
    comm: &CommModel,
    eps: &[Vec<f64>],
    config: &ScenarioConfig,
) -> Result<(f64, Vec<f64>), RobustError> {
    let m_aps = config.n_aps();
    let sigma2 = config.noise_power;
    if gamma > 0.0 && channel_swallowed(k, comm, eps) {
        return Ok((f64::NEG_INFINITY, vec![0.0; m_aps]));
    }
    let mut pb = ProblemBuilder::new();
    let l_vars: Vec<usize> = pb.new_vars(m_aps).collect();
    let s_var = pb.new_vars(1).start;
    pb.add_objective(s_var, -1.0); // maximize s
    let comm_c = comm.clone();
    let eps_c: Vec<Vec<f64>> = eps.to_vec();
    let w_c: Vec<DMatrix<Complex64>> = w_compressed.to_vec();
    let mut vars = l_vars.clone();
    vars.push(s_var);
    pb.add_hermitian_psd_probe(&vars, move |x| {
        let lam = &x[..m_aps];
        let s = x[m_aps];
        let mut lmi = robust_lmi(&w_c, lam, gamma, k, &comm_c, &eps_c, sigma2);
        for i in 0..lmi.nrows() {
            lmi[(i, i)] -= Complex64::new(s, 0.0);
        }
        lmi
    })?;
    let l_rows: Vec<(f64, Vec<(usize, f64)>)> =
        l_vars.iter().map(|&v| (0.0, vec![(v, -1.0)])).collect();
    pb.add_nonneg_rows(&l_rows);
    let sol = pb.solve(1e-8)?;
    // The S-procedure is sufficient for EVERY nonnegative multiplier
    // vector, and for fixed multipliers the best shift is exactly the
    // smallest eigenvalue of the LMI. The solver therefore only proposes
    // multipliers; the margin itself is recomputed by eigendecomposition,
    // which keeps the certificate sound whatever the solve status was (a
    // stalled solve merely certifies a little less).
    let lam: Vec<f64> = sol.x[..m_aps].iter().map(|&l| l.max(0.0)).collect();
    let lmi = robust_lmi(w_compressed, &lam, gamma, k, comm, eps, sigma2);
    let lh = (&lmi + &lmi.adjoint()) * Complex64::new(0.5, 0.0);
    let margin = lh
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    Ok((margin, lam))
}

/// Best S-procedure corner slack over multipliers for fixed compressed beam
/// covariances at SINR target `gamma`, in noise-power units, together with
/// the multipliers achieving it.
///
/// The slack `A_k(lambda) = hhat^H M hhat - sigma^2 - lambda^T eps^2
/// - (M hhat)^H (M + Lambda)^+ (M hhat)` is concave in `lambda` (it is the
/// partial maximum of an LMI-representable set), so the search is one small
/// SDP in `M + 1` scalars. The slack itself is then recomputed from the
/// returned multipliers by eigendecomposition — sound for any
/// `lambda >= 0`, whatever the solve status — with the same relative
/// regularization as [`crate::timealloc::margins`], so a stalled solve can
/// only under-report the margin, never fabricate one.
///
/// `w_compressed` must represent the beams exactly in `comm`'s compression
/// (see [`CommModel::compress_covariance`]).
pub fn best_margin_over_multipliers(
    w_compressed: &[DMatrix<Complex64>],
    gamma: f64,
    k: usize,
    comm: &CommModel,
    eps: &[Vec<f64>],
    config: &ScenarioConfig,
) -> Result<(f64, Vec<f64>), RobustError> {
    let m_aps = config.n_aps();
    let sigma2 = config.noise_power;
    if gamma <= 0.0 {
        return Ok((f64::INFINITY, vec![0.0; m_aps]));
    }
    if channel_swallowed(k, comm, eps) {
        return Ok((f64::NEG_INFINITY, vec![0.0; m_aps]));
    }
    // Same internal power unit trick as the feasibility SDP: express all
    // power-scaled quantities in units of the beam scale so the corner
    // constants are not dwarfed by the blocks (exact by homogeneity in
    // (W, sigma2, lambda, slack)).
    let unit = w_compressed
        .iter()
        .map(|w| w.diagonal().iter().map(|v| v.re).sum::<f64>())
        .fold(sigma2, f64::max)
        .max(1e-300);
    let w_int: Vec<DMatrix<Complex64>> = w_compressed
        .iter()
        .map(|w| w * Complex64::new(1.0 / unit, 0.0))
        .collect();
    let sigma2_int = sigma2 / unit;

    let mut pb = ProblemBuilder::new();
    let l_vars: Vec<usize> = pb.new_vars(m_aps).collect();
    let s_var = pb.new_vars(1).start;
    pb.add_objective(s_var, -1.0); // maximize the corner slack
    let comm_c = comm.clone();
    let eps_c: Vec<Vec<f64>> = eps.to_vec();
    let w_c = w_int.clone();
    let mut vars = l_vars.clone();
    vars.push(s_var);
    pb.add_hermitian_psd_probe(&vars, move |x| {
        let lam = &x[..m_aps];
        let s = x[m_aps];
        let mut lmi = robust_lmi(&w_c, lam, gamma, k, &comm_c, &eps_c, sigma2_int);
        let d = lmi.nrows() - 1;
        lmi[(d, d)] -= Complex64::new(s, 0.0);
        lmi
    })?;
    let l_rows: Vec<(f64, Vec<(usize, f64)>)> =
        l_vars.iter().map(|&v| (0.0, vec![(v, -1.0)])).collect();
    pb.add_nonneg_rows(&l_rows);
    let sol = pb.solve(1e-8)?;
    let mut lam_int: Vec<f64> = sol.x[..m_aps].iter().map(|&l| l.max(0.0)).collect();

    // Sound recompute of the slack at the proposed multipliers. Build
    // M_k + Lambda_k in compressed coordinates.
    let d = comm.total_dim();
    let assemble = |lam: &[f64]| -> DMatrix<Complex64> {
        let mut m = w_int[k].clone() * Complex64::new(1.0 / gamma, 0.0);
        for (k2, wk2) in w_int.iter().enumerate() {
            if k2 != k {
                m -= wk2;
            }
        }
        let mut off = 0;
        for (ap, &dm) in comm.dims.iter().enumerate() {
            for i in 0..dm {
                m[(off + i, off + i)] += Complex64::new(lam[ap], 0.0);
            }
            off += dm;
        }
        (&m + m.adjoint()) * Complex64::new(0.5, 0.0)
    };
    let mut shifted = assemble(&lam_int);
    let eig = shifted.clone().symmetric_eigen();
    let lmax = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    let lmin = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if lmin < -1e-8 * lmax.max(1e-300) {
        // Solver dust can leave the shifted block slightly indefinite.
        // Raising every multiplier by the deficit restores PSD-ness (it adds
        // a multiple of the identity) at an honest extra eps^2 penalty, so
        // the recomputed slack stays a valid certificate.
        let bump = -lmin * (1.0 + 1e-9);
        for l in lam_int.iter_mut() {
            *l += bump;
        }
        shifted = assemble(&lam_int);
    }
    let mut m_k = w_int[k].clone() * Complex64::new(1.0 / gamma, 0.0);
    for (k2, wk2) in w_int.iter().enumerate() {
        if k2 != k {
            m_k -= wk2;
        }
    }
    let h = &comm.compressed[k];
    let u = &m_k * h;
    let delta = 1e-10 * lmax.max(1e-300);
    let mut reg = shifted;
    for i in 0..d {
        reg[(i, i)] += Complex64::new(delta, 0.0);
    }
    let solved = reg
        .lu()
        .solve(&u)
        .unwrap_or_else(|| DVector::zeros(u.len()));
    let quad = (h.adjoint() * &m_k * h)[(0, 0)].re;
    let penalty: f64 = lam_int
        .iter()
        .zip(eps[k].iter())
        .map(|(l, e)| l * e * e)
        .sum();
    let slack_int = quad - sigma2_int - penalty - u.dotc(&solved).re;
    let lam: Vec<f64> = lam_int.iter().map(|&l| l * unit).collect();
    Ok((slack_int * unit / sigma2, lam))
}

/// Certifies the largest worst-case rate of a fixed beam vector set by
/// bisection over the S-procedure margins.
///
/// The compression basis is rebuilt from the beams plus the channels, so
/// beams of any provenance (extracted, MRT, nominal-design) are certified
/// exactly.
pub fn certify_worst_case_rate(
    beams: &[DVector<Complex64>],
    eps: &[Vec<f64>],
    eta: f64,
    comm: &CommModel,
    config: &ScenarioConfig,
    tol_rel: f64,
) -> Result<RobustRateCertificate, RobustError> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(RobustError::EtaOutOfRange(eta));
    }
    let (m_aps, n, k_users) = (config.n_aps(), config.n_elements, config.n_users());
    // Basis over channels and beams.
    let mut families: Vec<Vec<DVector<Complex64>>> = (0..k_users)
        .map(|k| {
            (0..m_aps)
                .map(|m| comm.channels.vectors[k][m].clone())
                .collect()
        })
        .collect();
    for b in beams {
        families.push((0..m_aps).map(|m| b.rows(m * n, n).into_owned()).collect());
    }
    let (bases, dims) = per_ap_span(&families, m_aps, n);
    let cert_comm = CommModel {
        channels: comm.channels.clone(),
        compressed: comm
            .channels
            .stacked
            .iter()
            .map(|h| compress_stacked(h, &bases, n))
            .collect(),
        bases,
        dims,
        n_elements: n,
    };
    let w_compressed: Vec<DMatrix<Complex64>> = beams
        .iter()
        .map(|b| {
            let bc = compress_stacked(b, &cert_comm.bases, n);
            &bc * bc.adjoint()
        })
        .collect();

    let certified_at = |gamma: f64| -> Result<Option<(Vec<f64>, Vec<Vec<f64>>)>, RobustError> {
        let mut margins = Vec::with_capacity(k_users);
        let mut lambdas = Vec::with_capacity(k_users);
        for k in 0..k_users {
            let (s, lam) =
                certification_margin(&w_compressed, gamma, k, &cert_comm, eps, config)?;
            if s < 0.0 {
                return Ok(None);
            }
            margins.push(s);
            lambdas.push(lam);
        }
        Ok(Some((margins, lambdas)))
    };

    let mut lo = 0.0f64;
    let mut hi = rate_upper_bound(comm, eta, config);
    let mut best: Option<(Vec<f64>, Vec<Vec<f64>>)> = None;
    while hi - lo > tol_rel * hi.max(1e-12) {
        let mid = 0.5 * (lo + hi);
        match certified_at(gamma_from_rate(mid, eta, config))? {
            Some(result) => {
                lo = mid;
                best = Some(result);
            }
            None => hi = mid,
        }
    }
    let (per_user_margin, lambda) = best.unwrap_or_else(|| {
        (
            vec![0.0; k_users],
            (0..k_users).map(|_| vec![0.0; m_aps]).collect(),
        )
    });
    Ok(RobustRateCertificate {
        rate: lo,
        gamma: gamma_from_rate(lo, eta, config),
        per_user_margin,
        lambda,
    })
}

/// Nominal (estimate-as-truth) SINR feasibility as a second-order cone
/// program; returns extracted beam vectors when feasible. A target of zero
/// is trivially met by silence.
pub fn nominal_socp_feasibility(
    gamma: f64,
    comm: &CommModel,
    config: &ScenarioConfig,
) -> Result<Option<Vec<DVector<Complex64>>>, RobustError> {
    if gamma <= 0.0 {
        let mn = config.n_aps() * config.n_elements;
        return Ok(Some(
            (0..config.n_users()).map(|_| DVector::zeros(mn)).collect(),
        ));
    }
    let k_users = config.n_users();
    let m_aps = config.n_aps();
    let d = comm.total_dim();
    let sigma = config.noise_power.sqrt();
    let mut pb = ProblemBuilder::new();
    // Real parameter pairs (re, im) for every compressed beam entry.
    let w_vars: Vec<Vec<usize>> = (0..k_users)
        .map(|_| pb.new_vars(2 * d).collect())
        .collect();

    // Per-user SINR cones: Re(h_k^H w_k)/sqrt(gamma) >= ||(h_k^H w_{k'})_{k' != k}, sigma||,
    // with the phase fixed by Im(h_k^H w_k) = 0.
    for k in 0..k_users {
        let h = &comm.compressed[k];
        // coefficient row of Re/Im(h_k^H w_j) over w_j parameter pairs
        let inner_terms = |j: usize, imag: bool| -> Vec<(usize, f64)> {
            let mut terms = Vec::with_capacity(2 * d);
            for i in 0..d {
                let c = h[i].conj(); // h^H w = sum conj(h_i) w_i
                let (re_c, im_c) = (c.re, c.im);
                if !imag {
                    terms.push((w_vars[j][2 * i], -re_c));
                    terms.push((w_vars[j][2 * i + 1], im_c));
                } else {
                    terms.push((w_vars[j][2 * i], -im_c));
                    terms.push((w_vars[j][2 * i + 1], -re_c));
                }
            }
            terms
        };
        // s0 = Re(h^H w_k)/sqrt(gamma); terms carry -coeff so s = b - Ax.
        let mut rows: Vec<(f64, Vec<(usize, f64)>)> = Vec::new();
        let scale = 1.0 / gamma.sqrt();
        rows.push((
            0.0,
            inner_terms(k, false)
                .into_iter()
                .map(|(v, c)| (v, c * scale))
                .collect(),
        ));
        for k2 in 0..k_users {
            if k2 == k {
                continue;
            }
            rows.push((0.0, inner_terms(k2, false)));
            rows.push((0.0, inner_terms(k2, true)));
        }
        rows.push((sigma, vec![]));
        pb.add_second_order_rows(&rows);
        pb.add_zero_rows(&[(0.0, inner_terms(k, true))]);
    }
    // Per-AP power cones: sqrt(P) >= ||all users' AP-m beam entries||.
    for m in 0..m_aps {
        let off: usize = comm.dims[..m].iter().sum();
        let mut rows: Vec<(f64, Vec<(usize, f64)>)> =
            vec![(config.comm_power_budget.sqrt(), vec![])];
        for k in 0..k_users {
            for i in 0..comm.dims[m] {
                rows.push((0.0, vec![(w_vars[k][2 * (off + i)], -1.0)]));
                rows.push((0.0, vec![(w_vars[k][2 * (off + i) + 1], -1.0)]));
            }
        }
        pb.add_second_order_rows(&rows);
    }
    let sol = pb.solve(1e-8)?;
    let compressed_beams = |x: &[f64]| -> Vec<DVector<Complex64>> {
        (0..k_users)
            .map(|k| {
                DVector::from_fn(d, |i, _| {
                    Complex64::new(x[w_vars[k][2 * i]], x[w_vars[k][2 * i + 1]])
                })
            })
            .collect()
    };
    // A stalled ("almost solved") iterate is accepted only if the beams it
    // carries verifiably meet the SINR targets and power budgets.
    let verify = |beams: &[DVector<Complex64>]| -> bool {
        for m in 0..m_aps {
            let off: usize = comm.dims[..m].iter().sum();
            let p: f64 = beams
                .iter()
                .map(|w| w.rows(off, comm.dims[m]).norm_squared())
                .sum();
            if p > config.comm_power_budget * (1.0 + 1e-6) {
                return false;
            }
        }
        for k in 0..k_users {
            let h = &comm.compressed[k];
            let signal = (h.adjoint() * &beams[k])[(0, 0)].norm_sqr();
            let mut denom = sigma * sigma;
            for (j, w) in beams.iter().enumerate() {
                if j != k {
                    denom += (h.adjoint() * w)[(0, 0)].norm_sqr();
                }
            }
            if signal < gamma * denom * (1.0 - 1e-6) {
                return false;
            }
        }
        true
    };
    match sol.status {
        SolveStatus::Optimal => {
            let beams = compressed_beams(&sol.x).iter().map(|w| comm.lift(w)).collect();
            Ok(Some(beams))
        }
        SolveStatus::AlmostOptimal => {
            let compressed = compressed_beams(&sol.x);
            if verify(&compressed) {
                Ok(Some(compressed.iter().map(|w| comm.lift(w)).collect()))
            } else {
                Ok(None)
            }
        }
        SolveStatus::Infeasible => Ok(None),
        SolveStatus::NumericalFailure => Ok(None),
    }
}

/// Largest nominal rate achievable by the SOCP design at split `eta`.
pub fn nominal_max_rate(
    comm: &CommModel,
    eta: f64,
    config: &ScenarioConfig,
    tol_rel: f64,
) -> Result<(f64, Vec<DVector<Complex64>>), RobustError> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(RobustError::EtaOutOfRange(eta));
    }
    let mn = config.n_aps() * config.n_elements;
    let mut lo = 0.0f64;
    let mut beams: Vec<DVector<Complex64>> = (0..config.n_users())
        .map(|_| DVector::zeros(mn))
        .collect();
    let mut hi = rate_upper_bound(comm, eta, config);
    while hi - lo > tol_rel * hi.max(1e-12) {
        let mid = 0.5 * (lo + hi);
        match nominal_socp_feasibility(gamma_from_rate(mid, eta, config), comm, config)? {
            Some(b) => {
                lo = mid;
                beams = b;
            }
            None => hi = mid,
        }
    }
    Ok((lo, beams))
}

/// Empirical adversary report for criterion-style soundness checks.
#[derive(Debug, Clone)]
pub struct AdversarialReport {
    /// Worst (most negative) normalized S-procedure quadratic
    /// `((h+e)^H M_k (h+e) - sigma^2) / sigma^2` found over all users.
    pub worst_quadratic_over_sigma2: f64,
    pub per_user_worst: Vec<f64>,
}

/// Random-plus-projected-gradient adversary over the per-AP error balls.
///
/// For each user it samples `n_samples` error vectors (half on the ball
/// boundaries, half in the interior) and then runs 100 projected-gradient
/// steps from the worst sample, reporting the minimum of the S-procedure
/// quadratic normalized by the noise power. A sound certificate keeps this
/// above `-1e-6`.
pub fn adversarial_min_sinr(
    beams: &[DVector<Complex64>],
    eps: &[Vec<f64>],
    gamma: f64,
    comm: &CommModel,
    config: &ScenarioConfig,
    seed: u64,
    n_samples: usize,
) -> AdversarialReport {
    let (m_aps, n, k_users) = (config.n_aps(), config.n_elements, config.n_users());
    let sigma2 = config.noise_power;
    let mn = m_aps * n;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut per_user_worst = Vec::with_capacity(k_users);

    // M_k in the full space, from the beam vectors.
    let w_mats: Vec<DMatrix<Complex64>> = beams.iter().map(|w| w * w.adjoint()).collect();
    for k in 0..k_users {
        let mut m_k = w_mats[k].clone() * Complex64::new(1.0 / gamma, 0.0);
        for (k2, w) in w_mats.iter().enumerate() {
            if k2 != k {
                m_k -= w;
            }
        }
        let h = &comm.channels.stacked[k];
        let quad = |e: &DVector<Complex64>| -> f64 {
            let he = h + e;
            (he.adjoint() * &m_k * &he)[(0, 0)].re - sigma2
        };
        let project = |e: &mut DVector<Complex64>| {
            for m in 0..m_aps {
                let nrm = e.rows(m * n, n).norm();
                if nrm > eps[k][m] {
                    let scale = Complex64::new(eps[k][m] / nrm, 0.0);
                    let scaled = e.rows(m * n, n) * scale;
                    e.rows_mut(m * n, n).copy_from(&scaled);
                }
            }
        };
        let mut worst = f64::INFINITY;
        let mut worst_e = DVector::zeros(mn);
        for s in 0..n_samples {
            let mut e = DVector::zeros(mn);
            for m in 0..m_aps {
                let mut dir = DVector::from_fn(n, |_, _| {
                    Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
                });
                let nrm = dir.norm().max(1e-300);
                // Half the samples on the boundary, half scaled inside.
                let radius = if s % 2 == 0 {
                    eps[k][m]
                } else {
                    eps[k][m] * rng.gen::<f64>().powf(1.0 / (2.0 * n as f64))
                };
                dir *= Complex64::new(radius / nrm, 0.0);
                e.rows_mut(m * n, n).copy_from(&dir);
            }
            let q = quad(&e);
            if q < worst {
                worst = q;
                worst_e = e;
            }
        }
        // Projected gradient descent on the quadratic from the worst sample.
        let mut e = worst_e;
        let grad_scale: f64 = eps[k].iter().cloned().fold(0.0, f64::max);
        for _ in 0..100 {
            let he = h + &e;
            let g = &m_k * he; // gradient of the quadratic w.r.t. conj(e)
            let gn = g.norm().max(1e-300);
            e -= g * Complex64::new(0.1 * grad_scale / gn, 0.0);
            project(&mut e);
            let q = quad(&e);
            if q < worst {
                worst = q;
            }
        }
        per_user_worst.push(worst / sigma2);
    }
    AdversarialReport {
        worst_quadratic_over_sigma2: per_user_worst.iter().cloned().fold(f64::INFINITY, f64::min),
        per_user_worst,
    }
}
