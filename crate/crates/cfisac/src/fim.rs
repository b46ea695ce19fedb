//! Fisher information of the echo model and the position CRLB.
//!
//! The sensing phase estimates the 2D positions of all K users from echoes
//! received across all M APs. The unknown parameter vector stacks the user
//! positions `p = (x_1..x_K, y_1..y_K)` and, as nuisance parameters, the
//! complex two-hop path gains `alpha[k][i][j] = rho[k][i][j] *
//! beta[k][i] * beta[k][j]` (transmit AP j, reflection at user k, receive
//! AP i), split into real and imaginary parts.
//!
//! All blocks are kept in the normalized form `Jbar = (sigma^2 / (2 tau)) J`,
//! which removes both the noise power and the snapshot count; they re-enter
//! only in the final CRLB values:
//!
//! - `crlb_bar = (sigma^2 / 2) * trace(inv(Jbar_pp - Jbar_pa inv(Jbar_aa) Jbar_pa^T))`
//! - `crlb(eta) = crlb_bar * tau_s / ((1 - eta) * T)` (the snapshot count
//!   `(1 - eta) T / tau_s` is used without flooring here; only the echo
//!   generator floors it).
//!
//! The gain-gain block uses the quasi-orthogonality structure of distinct
//! propagation paths: within each (receive, transmit) AP pair the K x K
//! user coupling is kept exactly, couplings across different AP pairs and
//! between real and imaginary gain parts vanish. The reference-scenario
//! geometry makes `Jbar_aa` exactly singular (two users sit on the same
//! endfire ray of one AP and alias each other there), so its inversion is a
//! tolerance-thresholded pseudo-inverse by construction, reported in the
//! diagnostics.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

use crate::channel::{self, Axis};
use crate::scenario::ScenarioConfig;
use crate::sensing::SensingCovariance;

#[derive(Debug, Error)]
pub enum FimError {
    #[error(transparent)]
    Channel(#[from] channel::ChannelError),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("eta must lie strictly inside (0, 1), got {0}")]
    EtaOutOfRange(f64),
    #[error(
        "unidentifiable geometry: effective position FIM is singular \
         (condition number {cond:.3e}); CRLB is unbounded"
    )]
    UnidentifiableGeometry { cond: f64 },
}

/// Steering vectors, full position derivatives, and path gains of the echo
/// model, precomputed once per scenario.
#[derive(Debug, Clone)]
pub struct EchoModel {
    /// `steering[k][m]`: near-field steering of AP m toward user k.
    pub steering: Vec<Vec<DVector<Complex64>>>,
    /// `dsteer[k][m][q]`: full steering derivative (including the common
    /// r(0) phase term) along axis q.
    pub dsteer: Vec<Vec<[DVector<Complex64>; 2]>>,
    /// `alpha[k][i][j]`: two-hop complex path gain, receive AP i, transmit AP j.
    pub alpha: Vec<Vec<Vec<Complex64>>>,
    pub n_aps: usize,
    pub n_users: usize,
    pub n_elements: usize,
}

impl EchoModel {
    pub fn new(config: &ScenarioConfig) -> Result<Self, FimError> {
        let (m_aps, k_users) = (config.n_aps(), config.n_users());
        let rho = config.rcs();
        let mut steering = Vec::with_capacity(k_users);
        let mut dsteer = Vec::with_capacity(k_users);
        let mut gains = Vec::with_capacity(k_users);
        for k in 0..k_users {
            let target = config.user_positions[k];
            let mut s_row = Vec::with_capacity(m_aps);
            let mut d_row = Vec::with_capacity(m_aps);
            let mut g_row = Vec::with_capacity(m_aps);
            for m in 0..m_aps {
                s_row.push(channel::steering_vector(m, target, config)?.values);
                d_row.push([
                    channel::steering_derivative_full(m, target, Axis::X, config)?,
                    channel::steering_derivative_full(m, target, Axis::Y, config)?,
                ]);
                g_row.push(channel::gain(m, target, config)?);
            }
            steering.push(s_row);
            dsteer.push(d_row);
            gains.push(g_row);
        }
        let alpha = (0..k_users)
            .map(|k| {
                (0..m_aps)
                    .map(|i| {
                        (0..m_aps)
                            .map(|j| rho[k][i][j] * gains[k][i] * gains[k][j])
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Ok(EchoModel {
            steering,
            dsteer,
            alpha,
            n_aps: m_aps,
            n_users: k_users,
            n_elements: config.n_elements,
        })
    }

    /// Echo matrix `H_k` (MN x MN): block (i, j) is `alpha[k][i][j] *
    /// a[k][i] a[k][j]^H`.
    pub fn echo_matrix(&self, user: usize) -> DMatrix<Complex64> {
        let (m_aps, n) = (self.n_aps, self.n_elements);
        let mut h = DMatrix::zeros(m_aps * n, m_aps * n);
        for i in 0..m_aps {
            for j in 0..m_aps {
                let al = self.alpha[user][i][j];
                let ai = &self.steering[user][i];
                let aj = &self.steering[user][j];
                let mut blk = h.view_mut((i * n, j * n), (n, n));
                for r in 0..n {
                    for c in 0..n {
                        blk[(r, c)] = al * ai[r] * aj[c].conj();
                    }
                }
            }
        }
        h
    }
}

/// Normalized Fisher-information blocks.
#[derive(Debug, Clone)]
pub struct FimBlocks {
    /// Position block, `2K x 2K`, ordering `(x_1..x_K, y_1..y_K)`.
    pub j_pp: DMatrix<f64>,
    /// Position-gain cross block, `2K x 2KM^2`; gain ordering puts all real
    /// parts first, then all imaginary parts, each in `k*M^2 + i*M + j` order.
    pub j_pa: DMatrix<f64>,
    /// Gain-gain block, `2KM^2 x 2KM^2`, equal real and imaginary halves
    /// with zero cross coupling.
    pub j_aa: DMatrix<f64>,
}

impl FimBlocks {
    pub fn full(&self) -> DMatrix<f64> {
        let (p, a) = (self.j_pp.nrows(), self.j_aa.nrows());
        let mut j = DMatrix::zeros(p + a, p + a);
        j.view_mut((0, 0), (p, p)).copy_from(&self.j_pp);
        j.view_mut((0, p), (p, a)).copy_from(&self.j_pa);
        j.view_mut((p, 0), (a, p)).copy_from(&self.j_pa.transpose());
        j.view_mut((p, p), (a, a)).copy_from(&self.j_aa);
        j
    }
}

/// CRLB evaluation output.
#[derive(Debug, Clone)]
pub struct CrlbResult {
    /// `(sigma^2/2) * trace(inv(effective FIM))`, in m^2 per normalized
    /// snapshot (multiply by `tau_s / ((1-eta) T)` for a concrete split).
    pub crlb_bar: f64,
    /// Time split this result was evaluated at.
    pub eta: f64,
    /// `crlb_bar * tau_s / ((1 - eta) * T)`, in m^2.
    pub crlb: f64,
    /// Per-user CRLB contributions (x plus y variance), summing to crlb_bar.
    pub per_user_bar: Vec<f64>,
    /// Effective position FIM after eliminating the gain parameters.
    pub effective_fim: DMatrix<f64>,
    pub diagnostics: CrlbDiagnostics,
}

#[derive(Debug, Clone)]
pub struct CrlbDiagnostics {
    /// Number of eigenvalues clipped when pseudo-inverting the gain block.
    pub gain_block_clipped: usize,
    /// Condition number of the effective position FIM.
    pub effective_cond: f64,
    /// True when the gain-block inversion fell back to a pseudo-inverse.
    pub used_pseudo_inverse: bool,
}

/// Derivative of the stacked echo matrix `H_k` with respect to user k's
/// `axis` coordinate, holding the gains fixed: block (i, j) is
/// `alpha[k][i][j] * (da[k][i] a[k][j]^H + a[k][i] da[k][j]^H)`.
pub fn channel_derivative_matrix(
    user: usize,
    axis: Axis,
    model: &EchoModel,
) -> DMatrix<Complex64> {
    let (m_aps, n, q) = (model.n_aps, model.n_elements, axis.index());
    let mut h = DMatrix::zeros(m_aps * n, m_aps * n);
    for i in 0..m_aps {
        for j in 0..m_aps {
            let al = model.alpha[user][i][j];
            let ai = &model.steering[user][i];
            let aj = &model.steering[user][j];
            let di = &model.dsteer[user][i][q];
            let dj = &model.dsteer[user][j][q];
            let mut blk = h.view_mut((i * n, j * n), (n, n));
            for r in 0..n {
                for c in 0..n {
                    blk[(r, c)] = al * (di[r] * aj[c].conj() + ai[r] * dj[c].conj());
                }
            }
        }
    }
    h
}

/// Linear index of gain parameter (k, i, j) within one (real or imaginary)
/// half of the gain vector.
pub fn gain_index(k: usize, i: usize, j: usize, m_aps: usize) -> usize {
    k * m_aps * m_aps + i * m_aps + j
}

/// Assembles all normalized FIM blocks for a block-diagonal sensing
/// covariance.
pub fn assemble_fim(psi: &SensingCovariance, model: &EchoModel) -> Result<FimBlocks, FimError> {
    let (m_aps, k_users, n) = (model.n_aps, model.n_users, model.n_elements);
    if psi.blocks.len() != m_aps || psi.blocks.iter().any(|b| b.nrows() != n || b.ncols() != n) {
        return Err(FimError::DimensionMismatch(format!(
            "sensing covariance must be {m_aps} blocks of {n}x{n}"
        )));
    }

    // Stacked covariance (block diagonal) and the per-user derivative
    // matrices.
    let psi_full = channel::block_diag(&psi.blocks);
    let ht: Vec<[DMatrix<Complex64>; 2]> = (0..k_users)
        .map(|k| {
            [
                channel_derivative_matrix(k, Axis::X, model),
                channel_derivative_matrix(k, Axis::Y, model),
            ]
        })
        .collect();

    // Position block: entries Re tr(Psi Ht_qk^H Ht_rk').
    let mut j_pp = DMatrix::zeros(2 * k_users, 2 * k_users);
    // Cache Psi * Ht^H products.
    let pht: Vec<[DMatrix<Complex64>; 2]> = ht
        .iter()
        .map(|pair| [&psi_full * pair[0].adjoint(), &psi_full * pair[1].adjoint()])
        .collect();
    for q in 0..2 {
        for r in 0..2 {
            for k in 0..k_users {
                for k2 in 0..k_users {
                    // tr(A B) with A = Psi Ht_qk^H cached.
                    let mut acc = Complex64::new(0.0, 0.0);
                    let a = &pht[k][q];
                    let b = &ht[k2][r];
                    for c in 0..a.ncols() {
                        for rr in 0..a.nrows() {
                            acc += a[(rr, c)] * b[(c, rr)];
                        }
                    }
                    j_pp[(q * k_users + k, r * k_users + k2)] = acc.re;
                }
            }
        }
    }

    // Gain-gain block: within one (i, j) AP pair,
    // B[(k,i,j), (k',i,j)] = Re{ (a_{k,i}^H a_{k',i}) (a_{k',j}^H Psi_j a_{k,j}) }.
    let km2 = k_users * m_aps * m_aps;
    let mut b = DMatrix::zeros(km2, km2);
    for k in 0..k_users {
        for k2 in 0..k_users {
            for i in 0..m_aps {
                let rx = model.steering[k][i].dotc(&model.steering[k2][i]); // a_{k,i}^H a_{k2,i}
                for j in 0..m_aps {
                    let tx = (psi.blocks[j].clone() * &model.steering[k][j])
                        .dotc(&model.steering[k2][j])
                        .conj(); // a_{k2,j}^H Psi_j a_{k,j}
                    b[(gain_index(k, i, j, m_aps), gain_index(k2, i, j, m_aps))] = (rx * tx).re;
                }
            }
        }
    }
    let mut j_aa = DMatrix::zeros(2 * km2, 2 * km2);
    j_aa.view_mut((0, 0), (km2, km2)).copy_from(&b);
    j_aa.view_mut((km2, km2), (km2, km2)).copy_from(&b);

    // Position-gain cross block: Z[qK+k, (k',i,j)] =
    // a_{k',j}^H Psi_j (Ht_qk block(i,j))^H a_{k',i}; real parts first,
    // then negated imaginary parts.
    let mut j_pa = DMatrix::zeros(2 * k_users, 2 * km2);
    for q in 0..2 {
        for k in 0..k_users {
            for k2 in 0..k_users {
                for i in 0..m_aps {
                    for j in 0..m_aps {
                        let blk = ht[k][q].view((i * n, j * n), (n, n));
                        // w = blk^H a_{k2,i}
                        let mut w = DVector::zeros(n);
                        for c in 0..n {
                            let mut acc = Complex64::new(0.0, 0.0);
                            for r in 0..n {
                                acc += blk[(r, c)].conj() * model.steering[k2][i][r];
                            }
                            w[c] = acc;
                        }
                        let z = (psi.blocks[j].clone() * w).dotc(&model.steering[k2][j]).conj();
                        let col = gain_index(k2, i, j, m_aps);
                        j_pa[(q * k_users + k, col)] = z.re;
                        j_pa[(q * k_users + k, km2 + col)] = -z.im;
                    }
                }
            }
        }
    }

    Ok(FimBlocks { j_pp, j_pa, j_aa })
}

/// Assembles the FIM blocks from per-AP steering/derivative vectors and a
/// matching per-AP covariance, using only inner products.
///
/// Equivalent to [`assemble_fim`] (every FIM entry reduces to products of
/// receive-side inner products and transmit-side covariance-weighted inner
/// products), but the vectors may live in per-AP subspaces of differing
/// dimension — this is what makes lossless covariance compression work: with
/// `psi_m = C_m phi_m C_m^H` and all vectors in the span of the orthonormal
/// `C_m`, passing the compressed vectors `C_m^H v` together with `phi_m`
/// yields the exact same FIM.
pub fn assemble_fim_from_vectors(
    steering: &[Vec<DVector<Complex64>>],
    dsteer: &[Vec<[DVector<Complex64>; 2]>],
    alpha: &[Vec<Vec<Complex64>>],
    psi: &[DMatrix<Complex64>],
) -> FimBlocks {
    let k_users = steering.len();
    let m_aps = psi.len();
    let zero = Complex64::new(0.0, 0.0);

    // Receive-side inner products.
    // aa[m][k][k2] = a_{k,m}^H a_{k2,m}
    // da[m][q][k][k2] = d^q_{k,m}^H a_{k2,m}
    // dd[m][q][k][r][k2] = d^q_{k,m}^H d^r_{k2,m}
    let mut aa = vec![vec![vec![zero; k_users]; k_users]; m_aps];
    let mut da = vec![[vec![vec![zero; k_users]; k_users], vec![vec![zero; k_users]; k_users]]; m_aps];
    let mut dd =
        vec![vec![vec![vec![vec![zero; k_users]; 2]; k_users]; 2]; m_aps];
    for m in 0..m_aps {
        for k in 0..k_users {
            for k2 in 0..k_users {
                aa[m][k][k2] = steering[k][m].dotc(&steering[k2][m]);
                for q in 0..2 {
                    da[m][q][k][k2] = dsteer[k][m][q].dotc(&steering[k2][m]);
                    for r in 0..2 {
                        dd[m][q][k][r][k2] = dsteer[k][m][q].dotc(&dsteer[k2][m][r]);
                    }
                }
            }
        }
    }

    // Transmit-side covariance-weighted inner products.
    // paa[m][k2][k] = a_{k2,m}^H Psi_m a_{k,m}
    // pda[m][r][k2][k] = d^r_{k2,m}^H Psi_m a_{k,m}
    // pad[m][k2][q][k] = a_{k2,m}^H Psi_m d^q_{k,m}
    // pdd[m][r][k2][q][k] = d^r_{k2,m}^H Psi_m d^q_{k,m}
    let mut paa = vec![vec![vec![zero; k_users]; k_users]; m_aps];
    let mut pda = vec![vec![vec![vec![zero; k_users]; k_users]; 2]; m_aps];
    let mut pad = vec![vec![vec![vec![zero; k_users]; 2]; k_users]; m_aps];
    let mut pdd = vec![vec![vec![vec![vec![zero; k_users]; 2]; k_users]; 2]; m_aps];
    for m in 0..m_aps {
        for k in 0..k_users {
            let pa = &psi[m] * &steering[k][m];
            let pdx = &psi[m] * &dsteer[k][m][0];
            let pdy = &psi[m] * &dsteer[k][m][1];
            let pd = [pdx, pdy];
            for k2 in 0..k_users {
                // dotc conjugates its receiver: v.dotc(w) = v^H w, so
                // a_{k2}^H (Psi a_k) = steering[k2].dotc(&pa).
                paa[m][k2][k] = steering[k2][m].dotc(&pa);
                for q in 0..2 {
                    pad[m][k2][q][k] = steering[k2][m].dotc(&pd[q]);
                    pda[m][q][k2][k] = dsteer[k2][m][q].dotc(&pa);
                    for r in 0..2 {
                        pdd[m][r][k2][q][k] = dsteer[k2][m][r].dotc(&pd[q]);
                    }
                }
            }
        }
    }

    // Position block.
    let mut j_pp = DMatrix::zeros(2 * k_users, 2 * k_users);
    for q in 0..2 {
        for r in 0..2 {
            for k in 0..k_users {
                for k2 in 0..k_users {
                    let mut acc = zero;
                    for l in 0..m_aps {
                        for m in 0..m_aps {
                            let c = alpha[k][l][m].conj() * alpha[k2][l][m];
                            // a_{k,l}^H d^r_{k2,l} = conj(d^r_{k2,l}^H a_{k,l})
                            let ad = da[l][r][k2][k].conj();
                            acc += c
                                * (dd[l][q][k][r][k2] * paa[m][k2][k]
                                    + da[l][q][k][k2] * pda[m][r][k2][k]
                                    + ad * pad[m][k2][q][k]
                                    + aa[l][k][k2] * pdd[m][r][k2][q][k]);
                        }
                    }
                    j_pp[(q * k_users + k, r * k_users + k2)] = acc.re;
                }
            }
        }
    }

    // Gain-gain block.
    let km2 = k_users * m_aps * m_aps;
    let mut b = DMatrix::zeros(km2, km2);
    for k in 0..k_users {
        for k2 in 0..k_users {
            for i in 0..m_aps {
                for j in 0..m_aps {
                    b[(gain_index(k, i, j, m_aps), gain_index(k2, i, j, m_aps))] =
                        (aa[i][k][k2] * paa[j][k2][k]).re;
                }
            }
        }
    }
    let mut j_aa = DMatrix::zeros(2 * km2, 2 * km2);
    j_aa.view_mut((0, 0), (km2, km2)).copy_from(&b);
    j_aa.view_mut((km2, km2), (km2, km2)).copy_from(&b);

    // Position-gain cross block.
    let mut j_pa = DMatrix::zeros(2 * k_users, 2 * km2);
    for q in 0..2 {
        for k in 0..k_users {
            for k2 in 0..k_users {
                for i in 0..m_aps {
                    for j in 0..m_aps {
                        let z = alpha[k][i][j].conj()
                            * (da[i][q][k][k2] * paa[j][k2][k]
                                + aa[i][k][k2] * pad[j][k2][q][k]);
                        let col = gain_index(k2, i, j, m_aps);
                        j_pa[(q * k_users + k, col)] = z.re;
                        j_pa[(q * k_users + k, km2 + col)] = -z.im;
                    }
                }
            }
        }
    }

    FimBlocks { j_pp, j_pa, j_aa }
}

/// Symmetric eigen-pseudo-inverse with relative tolerance `tol * lambda_max`.
/// Returns the pseudo-inverse and the number of clipped eigenvalues.
pub fn sym_pinv(mat: &DMatrix<f64>, tol: f64) -> (DMatrix<f64>, usize) {
    let sym = (mat + mat.transpose()) * 0.5;
    let eig = sym.clone().symmetric_eigen();
    let lmax = eig.eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let thresh = tol * lmax.max(1e-300);
    let mut clipped = 0;
    let inv_vals: Vec<f64> = eig
        .eigenvalues
        .iter()
        .map(|&l| {
            if l.abs() <= thresh {
                clipped += 1;
                0.0
            } else {
                1.0 / l
            }
        })
        .collect();
    let v = &eig.eigenvectors;
    let mut out = DMatrix::zeros(sym.nrows(), sym.ncols());
    for (idx, &iv) in inv_vals.iter().enumerate() {
        if iv != 0.0 {
            let col = v.column(idx);
            for r in 0..sym.nrows() {
                for c in 0..sym.ncols() {
                    out[(r, c)] += iv * col[r] * col[c];
                }
            }
        }
    }
    (out, clipped)
}

/// Relative pseudo-inversion tolerance used throughout (the reference
/// geometry makes the gain block exactly singular).
pub const PINV_TOL: f64 = 1e-10;

/// Effective position FIM (gain parameters eliminated) together with the
/// pseudo-inverse diagnostics of the gain block.
pub fn effective_fim(blocks: &FimBlocks) -> (DMatrix<f64>, usize) {
    // Invert the gain block per (i, j) pair: it is two identical copies of a
    // matrix that couples users only within the same AP pair.
    let km2 = blocks.j_aa.nrows() / 2;
    let b = blocks.j_aa.view((0, 0), (km2, km2)).clone_owned();
    let k_users = blocks.j_pp.nrows() / 2;
    let m2 = km2 / k_users;
    let mut b_pinv = DMatrix::zeros(km2, km2);
    let mut clipped = 0;
    for pair in 0..m2 {
        // Gather the K x K sub-block of users coupled through AP pair `pair`.
        let mut sub = DMatrix::zeros(k_users, k_users);
        for k in 0..k_users {
            for k2 in 0..k_users {
                sub[(k, k2)] = b[(k * m2 + pair, k2 * m2 + pair)];
            }
        }
        let (sub_pinv, c) = sym_pinv(&sub, PINV_TOL);
        clipped += c;
        for k in 0..k_users {
            for k2 in 0..k_users {
                b_pinv[(k * m2 + pair, k2 * m2 + pair)] = sub_pinv[(k, k2)];
            }
        }
    }
    let mut aa_pinv = DMatrix::zeros(2 * km2, 2 * km2);
    aa_pinv.view_mut((0, 0), (km2, km2)).copy_from(&b_pinv);
    aa_pinv.view_mut((km2, km2), (km2, km2)).copy_from(&b_pinv);
    let eff = &blocks.j_pp - &blocks.j_pa * aa_pinv * blocks.j_pa.transpose();
    // Numerical symmetrization.
    ((&eff + eff.transpose()) * 0.5, clipped)
}

/// Evaluates the position CRLB for a sensing covariance and time split.
pub fn crlb(
    psi: &SensingCovariance,
    eta: f64,
    model: &EchoModel,
    config: &ScenarioConfig,
) -> Result<CrlbResult, FimError> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(FimError::EtaOutOfRange(eta));
    }
    let blocks = assemble_fim(psi, model)?;
    crlb_from_blocks(&blocks, eta, config)
}

/// CRLB from preassembled FIM blocks (shared by [`crlb`] and the covariance
/// optimizer's verification path).
pub fn crlb_from_blocks(
    blocks: &FimBlocks,
    eta: f64,
    config: &ScenarioConfig,
) -> Result<CrlbResult, FimError> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(FimError::EtaOutOfRange(eta));
    }
    let (eff, clipped) = effective_fim(blocks);
    let eig = eff.clone().symmetric_eigen();
    let lmax = eig.eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let lmin = eig.eigenvalues.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    let cond = if lmin > 0.0 { lmax / lmin } else { f64::INFINITY };
    if lmin <= PINV_TOL * lmax {
        return Err(FimError::UnidentifiableGeometry { cond });
    }
    let (inv, _) = sym_pinv(&eff, PINV_TOL);
    let k_users = blocks.j_pp.nrows() / 2;
    let sigma2 = config.noise_power;
    let per_user_bar: Vec<f64> = (0..k_users)
        .map(|k| sigma2 / 2.0 * (inv[(k, k)] + inv[(k_users + k, k_users + k)]))
        .collect();
    let crlb_bar: f64 = per_user_bar.iter().sum();
    let crlb = crlb_bar * config.sensing_slot / ((1.0 - eta) * config.block_duration);
    Ok(CrlbResult {
        crlb_bar,
        eta,
        crlb,
        per_user_bar,
        effective_fim: eff,
        diagnostics: CrlbDiagnostics {
            gain_block_clipped: clipped,
            effective_cond: cond,
            used_pseudo_inverse: clipped > 0,
        },
    })
}
