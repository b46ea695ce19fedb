//! Time-division coupling between sensing quality and communication
//! robustness, and the margin-based split update.
//!
//! A block of duration `T` spends the fraction `1 - eta` on sensing and
//! `eta` on communication. More communication time helps rates twice — the
//! SINR target for a rate `R` drops and there is more airtime — but it
//! stretches the position CRLB as `crlb(eta) = crlb_bar * tau_s / ((1-eta) T)`,
//! which widens every channel-uncertainty ball. The feasible splits are
//! capped by the sensing threshold at `eta_bar = 1 - crlb_bar tau_s / (T crlb_th)`.
//!
//! For fixed beams and multipliers, the per-user S-procedure slack as a
//! function of `eta` is a cheap scalar (a Schur complement), so the split
//! can be updated by maximizing the worst slack over a grid — the
//! alternating optimization keeps the incumbent solution feasible because
//! the incumbent split is always a candidate.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

use crate::channel::uncertainty_bounds;
use crate::robust::{gamma_from_rate, CommModel};
use crate::scenario::ScenarioConfig;

#[derive(Debug, Error)]
pub enum TimeAllocError {
    #[error("eta must lie strictly inside (0, 1), got {0}")]
    EtaOutOfRange(f64),
    #[error(
        "sensing-infeasible: even a full sensing block gives CRLB {best:.3e} m^2 \
         against threshold {threshold:.3e} m^2"
    )]
    SensingInfeasible { best: f64, threshold: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

/// How the current split value was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    /// Caller-supplied starting point.
    Initial,
    /// Picked by the worst-margin grid maximization.
    MarginMaximized,
    /// Clipped down to the sensing-feasibility cap `eta_bar`.
    CrlbProjected,
}

/// A communication-time fraction together with its provenance.
#[derive(Debug, Clone, Copy)]
pub struct TimeAllocation {
    pub eta: f64,
    pub provenance: Provenance,
}

/// Position CRLB at split `eta`, from the single-slot normalized `crlb_bar`.
pub fn crlb_at(crlb_bar: f64, eta: f64, config: &ScenarioConfig) -> f64 {
    crlb_bar * config.sensing_slot / ((1.0 - eta) * config.block_duration)
}

/// Largest split still meeting the CRLB threshold:
/// `eta_bar = 1 - crlb_bar tau_s / (T crlb_th)`.
///
/// Errors when even `eta -> 0` (the whole block sensing) cannot meet the
/// threshold.
pub fn eta_bar(crlb_bar: f64, config: &ScenarioConfig) -> Result<f64, TimeAllocError> {
    let best = crlb_bar * config.sensing_slot / config.block_duration;
    let bar = 1.0 - best / config.crlb_threshold;
    if bar <= 0.0 {
        return Err(TimeAllocError::SensingInfeasible {
            best,
            threshold: config.crlb_threshold,
        });
    }
    Ok(bar)
}

/// Clips an allocation to the sensing-feasibility cap.
pub fn project_eta(
    alloc: TimeAllocation,
    crlb_bar: f64,
    config: &ScenarioConfig,
) -> Result<TimeAllocation, TimeAllocError> {
    let bar = eta_bar(crlb_bar, config)?;
    if alloc.eta > bar {
        Ok(TimeAllocation {
            eta: bar,
            provenance: Provenance::CrlbProjected,
        })
    } else {
        Ok(alloc)
    }
}

/// Per-user S-procedure slacks (in noise-power units) of fixed beams and
/// multipliers at split `eta` and target rate `rate`.
///
/// The slack is the Schur complement of the robust LMI corner:
/// `A_k = hhat^H M hhat - sigma^2 - lambda_k^T eps(eta)^2
///        - (M hhat)^H (M + Lambda_k)^+ (M hhat)`,
/// which is nonnegative exactly when the LMI is PSD (given `M + Lambda_k`
/// PSD; a negative eigenvalue there beyond tolerance yields `-inf`). A
/// non-positive target is trivially met and reports `+inf`.
///
/// For solver-produced beams the slack inherits the SDP's absolute
/// accuracy, which in noise-power units can amount to a few units; the
/// grid maximization is insensitive to this because the variation across
/// splits is orders of magnitude larger.
pub fn margins(
    rate: f64,
    eta: f64,
    beams: &[DMatrix<Complex64>],
    lambda: &[Vec<f64>],
    crlb_bar: f64,
    comm: &CommModel,
    config: &ScenarioConfig,
) -> Result<Vec<f64>, TimeAllocError> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(TimeAllocError::EtaOutOfRange(eta));
    }
    let (k_users, m_aps, n) = (config.n_users(), config.n_aps(), config.n_elements);
    if beams.len() != k_users || lambda.len() != k_users {
        return Err(TimeAllocError::DimensionMismatch(format!(
            "{} beams / {} multiplier rows for {k_users} users",
            beams.len(),
            lambda.len()
        )));
    }
    let gamma = gamma_from_rate(rate, eta, config);
    if gamma <= 0.0 {
        return Ok(vec![f64::INFINITY; k_users]);
    }
    let sigma2 = config.noise_power;
    let bounds = uncertainty_bounds(crlb_at(crlb_bar, eta, config), &comm.channels, config);
    let mut out = Vec::with_capacity(k_users);
    for k in 0..k_users {
        let mut m_k = beams[k].clone() * Complex64::new(1.0 / gamma, 0.0);
        for (k2, w) in beams.iter().enumerate() {
            if k2 != k {
                m_k -= w;
            }
        }
        let mut shifted = m_k.clone();
        for ap in 0..m_aps {
            for i in 0..n {
                shifted[(ap * n + i, ap * n + i)] += Complex64::new(lambda[k][ap], 0.0);
            }
        }
        let herm = (&shifted + shifted.adjoint()) * Complex64::new(0.5, 0.0);
        let eig = herm.clone().symmetric_eigen();
        let lmax = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
        let lmin = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        if lmin < -1e-8 * lmax.max(1.0) {
            out.push(f64::NEG_INFINITY);
            continue;
        }
        let h = &comm.channels.stacked[k];
        let u = &m_k * h;
        // Regularized solve stands in for the pseudo-inverse; the shift is
        // relative to the block's scale so the slack ordering across eta is
        // unaffected.
        let delta = 1e-10 * lmax.max(1e-300);
        let mut reg = herm;
        for i in 0..reg.nrows() {
            reg[(i, i)] += Complex64::new(delta, 0.0);
        }
        let solved = reg
            .clone()
            .lu()
            .solve(&u)
            .unwrap_or_else(|| DVector::zeros(u.len()));
        let quad = (h.adjoint() * &m_k * h)[(0, 0)].re;
        let penalty: f64 = lambda[k]
            .iter()
            .zip(bounds.eps[k].iter())
            .map(|(l, e)| l * e * e)
            .sum();
        let schur = u.dotc(&solved).re;
        out.push((quad - sigma2 - penalty - schur) / sigma2);
    }
    Ok(out)
}

/// Worst-margin split update: evaluates the minimum margin on the percent
/// grid (restricted to sensing-feasible splits, the cap itself, and the
/// incumbent) and returns the maximizer, preferring larger `eta` on ties.
pub fn maximize_margin(
    current_eta: f64,
    rate: f64,
    beams: &[DMatrix<Complex64>],
    lambda: &[Vec<f64>],
    crlb_bar: f64,
    comm: &CommModel,
    config: &ScenarioConfig,
) -> Result<(TimeAllocation, f64), TimeAllocError> {
    let bar = eta_bar(crlb_bar, config)?;
    let mut candidates: Vec<f64> = (1..100)
        .map(|i| i as f64 / 100.0)
        .filter(|&e| e <= bar)
        .collect();
    candidates.push(bar.min(0.999999));
    if current_eta > 0.0 && current_eta < 1.0 {
        candidates.push(current_eta.min(bar));
    }
    candidates.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut best_eta = f64::NAN;
    let mut best_margin = f64::NEG_INFINITY;
    for &eta in &candidates {
        let margin = margins(rate, eta, beams, lambda, crlb_bar, comm, config)?
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        // `>=` prefers the larger split on ties (ascending scan).
        if margin >= best_margin {
            best_margin = margin;
            best_eta = eta;
        }
    }
    Ok((
        TimeAllocation {
            eta: best_eta,
            provenance: Provenance::MarginMaximized,
        },
        best_margin,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::robust::{bi_rbo, rate_from_gamma, BeamStructure};

    fn desk_config() -> ScenarioConfig {
        let mut cfg = ScenarioConfig::default();
        cfg.ap_centers = vec![[0.0, 0.0], [12.0, 0.0]];
        cfg.ap_orientations = vec![[cfg.element_spacing, 0.0]; 2];
        cfg.user_positions = vec![[3.0, 4.0], [9.0, 5.0]];
        cfg.n_elements = 7;
        cfg.comm_power_budget = 1.0;
        cfg.error_coefficient = 3.0;
        cfg.crlb_threshold = 2e-3;
        cfg
    }

    #[test]
    fn crlb_scaling_matches_definition() {
        let cfg = desk_config();
        let bar = 3.2e-4;
        let direct = bar * cfg.sensing_slot / ((1.0 - 0.7) * cfg.block_duration);
        assert!((crlb_at(bar, 0.7, &cfg) - direct).abs() < 1e-30);
        // Stretches without bound as eta -> 1.
        assert!(crlb_at(bar, 0.999, &cfg) > crlb_at(bar, 0.5, &cfg));
    }

    #[test]
    fn eta_bar_limits_and_monotonicity() {
        let mut cfg = desk_config();
        cfg.crlb_threshold = 1e-3;
        // crlb_bar such that a full sensing block lands exactly on the
        // threshold: no communication time is left.
        let critical = cfg.crlb_threshold * cfg.block_duration / cfg.sensing_slot;
        assert!(matches!(
            eta_bar(critical, &cfg),
            Err(TimeAllocError::SensingInfeasible { .. })
        ));
        assert!(matches!(
            eta_bar(critical * 10.0, &cfg),
            Err(TimeAllocError::SensingInfeasible { .. })
        ));
        // Half the critical value leaves exactly half the block.
        let half = eta_bar(critical / 2.0, &cfg).unwrap();
        assert!((half - 0.5).abs() < 1e-12);
        // Better sensing -> larger cap, approaching 1.
        let fine = eta_bar(critical / 1e6, &cfg).unwrap();
        assert!(fine > half && fine < 1.0);
        assert!((fine - (1.0 - 1e-6)).abs() < 1e-12);
    }

    #[test]
    fn projection_clips_only_above_cap() {
        let mut cfg = desk_config();
        cfg.crlb_threshold = 1e-3;
        let critical = cfg.crlb_threshold * cfg.block_duration / cfg.sensing_slot;
        let crlb_bar = critical / 2.0; // eta_bar = 0.5
        let keep = project_eta(
            TimeAllocation {
                eta: 0.3,
                provenance: Provenance::MarginMaximized,
            },
            crlb_bar,
            &cfg,
        )
        .unwrap();
        assert_eq!(keep.eta, 0.3);
        assert_eq!(keep.provenance, Provenance::MarginMaximized);
        let clipped = project_eta(
            TimeAllocation {
                eta: 0.9,
                provenance: Provenance::MarginMaximized,
            },
            crlb_bar,
            &cfg,
        )
        .unwrap();
        assert!((clipped.eta - 0.5).abs() < 1e-12);
        assert_eq!(clipped.provenance, Provenance::CrlbProjected);
    }

    #[test]
    fn rank_one_unit_multiplier_margin_is_minus_one() {
        // K=1, lambda=0, W proportional to h h^H: the Schur term consumes
        // the whole quadratic and the slack is exactly -sigma^2, i.e. -1 in
        // noise units, independent of the beam power.
        let mut cfg = desk_config();
        cfg.user_positions = vec![[3.0, 4.0]];
        let comm = CommModel::new(&cfg).unwrap();
        let h = &comm.channels.stacked[0];
        for power in [1e-3, 1.0, 1e3] {
            let w = h * h.adjoint() * Complex64::new(power, 0.0);
            let rate = rate_from_gamma(2.0, 0.5, &cfg);
            let m = margins(
                rate,
                0.5,
                &[w.clone()],
                &[vec![0.0; cfg.n_aps()]],
                1e-6,
                &comm,
                &cfg,
            )
            .unwrap();
            // The regularization bias grows with the block scale
            // (delta = 1e-10 lmax), so the tolerance covers the 1e3 case.
            assert!((m[0] + 1.0).abs() < 1e-3, "margin {} at power {power}", m[0]);
        }
    }

    #[test]
    fn margin_agrees_with_full_lmi_schur_route() {
        // Production route (regularized solve) against an independent
        // assembly of the full (MN+1) LMI and a brute-force Schur value via
        // eigen-decomposition pseudo-inverse.
        let cfg = desk_config();
        let comm = CommModel::new(&cfg).unwrap();
        let crlb_bar = 1e-4;
        let eta = 0.4;
        let bounds = uncertainty_bounds(crlb_at(crlb_bar, eta, &cfg), &comm.channels, &cfg);
        let out = bi_rbo(
            &comm,
            &bounds.eps,
            eta,
            &cfg,
            1e-2,
            BeamStructure::Full,
            None,
        )
        .unwrap();
        assert!(out.rate > 0.0);
        let got = margins(
            out.rate,
            eta,
            &out.beams,
            &out.lambda,
            crlb_bar,
            &comm,
            &cfg,
        )
        .unwrap();
        let gamma = gamma_from_rate(out.rate, eta, &cfg);
        for k in 0..cfg.n_users() {
            let mut m_k = out.beams[k].clone() * Complex64::new(1.0 / gamma, 0.0);
            for (k2, w) in out.beams.iter().enumerate() {
                if k2 != k {
                    m_k -= w;
                }
            }
            let mut shifted = m_k.clone();
            let n = cfg.n_elements;
            for ap in 0..cfg.n_aps() {
                for i in 0..n {
                    shifted[(ap * n + i, ap * n + i)] +=
                        Complex64::new(out.lambda[k][ap], 0.0);
                }
            }
            let herm = (&shifted + shifted.adjoint()) * Complex64::new(0.5, 0.0);
            let eig = herm.symmetric_eigen();
            let lmax = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
            // Pseudo-inverse through the eigenbasis with the same relative
            // regularization.
            let h = &comm.channels.stacked[k];
            let u = &m_k * h;
            let coeffs = eig.eigenvectors.adjoint() * &u;
            let schur: f64 = (0..coeffs.len())
                .map(|i| coeffs[i].norm_sqr() / (eig.eigenvalues[i] + 1e-10 * lmax))
                .sum();
            let quad = (h.adjoint() * &m_k * h)[(0, 0)].re;
            let penalty: f64 = out.lambda[k]
                .iter()
                .zip(bounds.eps[k].iter())
                .map(|(l, e)| l * e * e)
                .sum();
            let reference = (quad - cfg.noise_power - penalty - schur) / cfg.noise_power;
            let rel = (got[k] - reference).abs() / reference.abs().max(1.0);
            assert!(rel < 1e-9, "user {k}: {} vs {reference}", got[k]);
            // The slack of the solution at its own operating point is zero
            // up to solver dust, which in noise-power units can reach a few
            // units (absolute dust ~1e-12 W against sigma^2 = 1e-10 W);
            // infeasible operating points sit orders of magnitude lower.
            assert!(got[k] > -10.0, "user {k} margin {}", got[k]);
        }
    }

    #[test]
    fn indefinite_shift_reports_negative_infinity() {
        let cfg = desk_config();
        let comm = CommModel::new(&cfg).unwrap();
        let mn = cfg.n_aps() * cfg.n_elements;
        // Interference-only beams make M_k negative definite for user 0 and
        // no multiplier lifts it.
        let mut beams = vec![DMatrix::zeros(mn, mn); 2];
        beams[1] = DMatrix::identity(mn, mn) * Complex64::new(1e-2, 0.0);
        let rate = rate_from_gamma(1.0, 0.5, &cfg);
        let m = margins(
            rate,
            0.5,
            &beams,
            &[vec![0.0; 2], vec![0.0; 2]],
            1e-6,
            &comm,
            &cfg,
        )
        .unwrap();
        assert_eq!(m[0], f64::NEG_INFINITY);
    }

    #[test]
    fn zero_uncertainty_prefers_the_largest_split() {
        // With perfect sensing (crlb_bar = 0) the uncertainty vanishes at
        // every split — even at the cap, where any positive crlb_bar would
        // diverge as 1/(1-eta) — so the margin grows with eta purely
        // through the falling SINR target and the maximizer is the topmost
        // candidate.
        let cfg = desk_config();
        let comm = CommModel::new(&cfg).unwrap();
        let crlb_bar = 0.0;
        let bounds = uncertainty_bounds(crlb_at(crlb_bar, 0.5, &cfg), &comm.channels, &cfg);
        let out = bi_rbo(
            &comm,
            &bounds.eps,
            0.5,
            &cfg,
            1e-2,
            BeamStructure::Full,
            None,
        )
        .unwrap();
        let bar = eta_bar(crlb_bar, &cfg).unwrap();
        let (alloc, best) = maximize_margin(
            0.5,
            out.rate * 0.9,
            &out.beams,
            &out.lambda,
            crlb_bar,
            &comm,
            &cfg,
        )
        .unwrap();
        assert_eq!(alloc.provenance, Provenance::MarginMaximized);
        assert!((alloc.eta - bar.min(0.999999)).abs() < 1e-9, "eta {}", alloc.eta);
        assert!(best.is_finite());
        // And the incumbent split is never better than the chosen one.
        let incumbent = margins(
            out.rate * 0.9,
            0.5,
            &out.beams,
            &out.lambda,
            crlb_bar,
            &comm,
            &cfg,
        )
        .unwrap()
        .into_iter()
        .fold(f64::INFINITY, f64::min);
        assert!(best >= incumbent - 1e-12);
    }

    #[test]
    fn margin_update_respects_the_sensing_cap() {
        let mut cfg = desk_config();
        cfg.crlb_threshold = 1e-3;
        let comm = CommModel::new(&cfg).unwrap();
        let critical = cfg.crlb_threshold * cfg.block_duration / cfg.sensing_slot;
        let crlb_bar = critical * 0.4; // eta_bar = 0.6
        let bounds = uncertainty_bounds(crlb_at(crlb_bar, 0.3, &cfg), &comm.channels, &cfg);
        let out = bi_rbo(
            &comm,
            &bounds.eps,
            0.3,
            &cfg,
            1e-2,
            BeamStructure::Full,
            None,
        )
        .unwrap();
        let (alloc, _) = maximize_margin(
            0.3,
            out.rate,
            &out.beams,
            &out.lambda,
            crlb_bar,
            &comm,
            &cfg,
        )
        .unwrap();
        assert!(alloc.eta <= 0.6 + 1e-12, "eta {}", alloc.eta);
    }
}
