//! Near-field array responses and LOS channels.
//!
//! Each AP carries a uniform linear array of `2N+1` elements at positions
//! `c_ap + n * (dx, dy)` for `n in -N..=N`. The near-field (spherical
//! wavefront) steering vector toward a point `c` has entries
//! `exp(-j 2 pi / lambda * (r(n) - r(0)))` with `r(n)` the exact
//! element-to-point distance, so the response depends on distance, not just
//! angle. The LOS channel scales the steering vector by the complex gain
//! `beta = sqrt(lambda / (4 pi r(0)^2)) * exp(-j 2 pi r(0) / lambda)`; the
//! gain magnitude is taken uniform across elements (its variation over the
//! aperture is negligible at the geometries of interest).
//!
//! The module also provides the far-field (planar wavefront) benchmark
//! response, analytic position derivatives of the steering vector, and the
//! channel uncertainty bound that couples localization accuracy into the
//! downlink channel error: `eps[k][m] = alpha_e * sqrt(crlb_total) *
//! norm(h[k][m])`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

use crate::scenario::ScenarioConfig;

#[derive(Debug, Error)]
pub enum ChannelError {
    #[error("degenerate geometry: target coincides with element {element} of AP {ap}")]
    DegenerateGeometry { ap: usize, element: i64 },
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),
}

/// Near-field or far-field array response of one AP. Entries are unit
/// modulus; the center entry (n = 0) is exactly 1.
#[derive(Debug, Clone)]
pub struct SteeringVector {
    pub values: DVector<Complex64>,
}

/// All LOS channels of a scenario: per-(user, AP) complex gains and channel
/// vectors, plus the per-user stacked channel over APs (AP-major order).
#[derive(Debug, Clone)]
pub struct ChannelSet {
    /// `gains[k][m]`: complex gain beta of user k at AP m.
    pub gains: Vec<Vec<Complex64>>,
    /// `vectors[k][m]`: channel h = beta * a, length `n_elements`.
    pub vectors: Vec<Vec<DVector<Complex64>>>,
    /// `stacked[k]`: channels of user k stacked over APs (length M * n_elements).
    pub stacked: Vec<DVector<Complex64>>,
}

/// Channel uncertainty radii coupled to sensing quality, one per (user, AP).
#[derive(Debug, Clone)]
pub struct UncertaintyBounds {
    /// `eps[k][m] >= 0` in channel-norm units.
    pub eps: Vec<Vec<f64>>,
    /// The total position CRLB (m^2) these bounds were computed from.
    pub crlb_total: f64,
    /// The time split the CRLB was evaluated at, when known.
    pub eta: Option<f64>,
}

/// Positions of the array elements of one AP, in element order `-N..=N`.
pub fn element_positions(ap: usize, config: &ScenarioConfig) -> Vec<[f64; 2]> {
    let c = config.ap_centers[ap];
    let o = config.ap_orientations[ap];
    let half = config.half_elements();
    (-half..=half)
        .map(|n| [c[0] + n as f64 * o[0], c[1] + n as f64 * o[1]])
        .collect()
}

fn check_ap(ap: usize, config: &ScenarioConfig) -> Result<(), ChannelError> {
    if ap >= config.n_aps() {
        return Err(ChannelError::IndexOutOfRange(format!(
            "AP {ap} of {}",
            config.n_aps()
        )));
    }
    Ok(())
}

/// Element-to-target distances `r(n)` for `n in -N..=N`, plus `r(0)`.
fn distances(
    ap: usize,
    target: [f64; 2],
    config: &ScenarioConfig,
) -> Result<(Vec<f64>, f64), ChannelError> {
    check_ap(ap, config)?;
    let pts = element_positions(ap, config);
    let half = config.half_elements();
    let mut r = Vec::with_capacity(pts.len());
    for (i, p) in pts.iter().enumerate() {
        let dist = (target[0] - p[0]).hypot(target[1] - p[1]);
        if dist < 1e-9 {
            return Err(ChannelError::DegenerateGeometry {
                ap,
                element: i as i64 - half,
            });
        }
        r.push(dist);
    }
    let r0 = r[half as usize];
    Ok((r, r0))
}

/// Near-field steering vector of AP `ap` toward `target`: entry
/// `n = exp(-j 2 pi / lambda * (r(n) - r(0)))`.
pub fn steering_vector(
    ap: usize,
    target: [f64; 2],
    config: &ScenarioConfig,
) -> Result<SteeringVector, ChannelError> {
    let (r, r0) = distances(ap, target, config)?;
    let k = 2.0 * std::f64::consts::PI / config.carrier_wavelength;
    let half = config.half_elements() as usize;
    let values = DVector::from_iterator(
        r.len(),
        r.iter().enumerate().map(|(i, &rn)| {
            if i == half {
                Complex64::new(1.0, 0.0) // exactly 1 by construction
            } else {
                Complex64::from_polar(1.0, -k * (rn - r0))
            }
        }),
    );
    Ok(SteeringVector { values })
}

/// Far-field benchmark response: entry `n = exp(-j 2 pi / lambda * n d
/// sin(aod))` with `aod` measured from the broadside of the (possibly
/// rotated) array.
pub fn far_field_steering(_ap: usize, aod: f64, config: &ScenarioConfig) -> SteeringVector {
    let k = 2.0 * std::f64::consts::PI / config.carrier_wavelength;
    let d = config.element_spacing;
    let half = config.half_elements();
    let values = DVector::from_iterator(
        config.n_elements,
        (-half..=half).map(|n| {
            if n == 0 {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::from_polar(1.0, -k * n as f64 * d * aod.sin())
            }
        }),
    );
    SteeringVector { values }
}

/// Angle of departure from AP `ap` toward `target` in the far-field
/// convention used by [`far_field_steering`]: the near-field phases approach
/// the planar phases with `sin(aod) = -(unit(target - ap) . unit(orientation))`
/// as the distance grows.
pub fn far_field_aod(ap: usize, target: [f64; 2], config: &ScenarioConfig) -> f64 {
    let c = config.ap_centers[ap];
    let o = config.ap_orientations[ap];
    let (dx, dy) = (target[0] - c[0], target[1] - c[1]);
    let r = dx.hypot(dy);
    let d = config.element_spacing;
    (-(dx * o[0] + dy * o[1]) / (r * d)).clamp(-1.0, 1.0).asin()
}

/// Complex LOS gain `beta` of AP `ap` toward `target` (amplitude
/// `sqrt(lambda / (4 pi r(0)^2))`, phase `-2 pi r(0) / lambda`).
pub fn gain(ap: usize, target: [f64; 2], config: &ScenarioConfig) -> Result<Complex64, ChannelError> {
    let (_, r0) = distances(ap, target, config)?;
    let lam = config.carrier_wavelength;
    let amp = (lam / (4.0 * std::f64::consts::PI * r0 * r0)).sqrt();
    Ok(Complex64::from_polar(amp, -2.0 * std::f64::consts::PI * r0 / lam))
}

/// LOS channel `h = beta * a` from AP `ap` to user `user`.
pub fn channel(
    ap: usize,
    user: usize,
    config: &ScenarioConfig,
) -> Result<DVector<Complex64>, ChannelError> {
    if user >= config.n_users() {
        return Err(ChannelError::IndexOutOfRange(format!(
            "user {user} of {}",
            config.n_users()
        )));
    }
    let target = config.user_positions[user];
    let a = steering_vector(ap, target, config)?;
    let b = gain(ap, target, config)?;
    Ok(a.values.map(|v| b * v))
}

/// Builds the full channel set of the scenario.
pub fn channel_set(config: &ScenarioConfig) -> Result<ChannelSet, ChannelError> {
    let (m_aps, k_users, n) = (config.n_aps(), config.n_users(), config.n_elements);
    let mut gains = Vec::with_capacity(k_users);
    let mut vectors = Vec::with_capacity(k_users);
    let mut stacked = Vec::with_capacity(k_users);
    for k in 0..k_users {
        let target = config.user_positions[k];
        let mut g_row = Vec::with_capacity(m_aps);
        let mut v_row = Vec::with_capacity(m_aps);
        let mut s = DVector::zeros(m_aps * n);
        for m in 0..m_aps {
            let b = gain(m, target, config)?;
            let h = channel(m, k, config)?;
            s.rows_mut(m * n, n).copy_from(&h);
            g_row.push(b);
            v_row.push(h);
        }
        gains.push(g_row);
        vectors.push(v_row);
        stacked.push(s);
    }
    Ok(ChannelSet { gains, vectors, stacked })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

impl Axis {
    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
        }
    }
}

/// Analytic derivative of the steering-vector entries with respect to the
/// target coordinate `axis`, holding the common reference distance r(0)
/// fixed: entry `n = -j (2 pi / lambda) * dr(n)/dc_axis * a(n)` with
/// `dr(n)/dc = (c - e_n)/r(n)` for element position `e_n`.
///
/// This is the per-element term only; the derivative of the common r(0)
/// phase is accounted for where full channel derivatives are assembled (the
/// Fisher-information module), since the gains absorb the r(0) phase there.
pub fn steering_derivative(
    ap: usize,
    target: [f64; 2],
    axis: Axis,
    config: &ScenarioConfig,
) -> Result<DVector<Complex64>, ChannelError> {
    let (r, _) = distances(ap, target, config)?;
    let a = steering_vector(ap, target, config)?;
    let pts = element_positions(ap, config);
    let k = 2.0 * std::f64::consts::PI / config.carrier_wavelength;
    let q = axis.index();
    let values = DVector::from_iterator(
        r.len(),
        r.iter().enumerate().map(|(i, &rn)| {
            let drn = (target[q] - pts[i][q]) / rn;
            Complex64::new(0.0, -k * drn) * a.values[i]
        }),
    );
    Ok(values)
}

/// Full derivative of the steering vector including the r(0) phase term:
/// entry `n` of the truncated derivative minus its center entry times `a(n)`.
pub fn steering_derivative_full(
    ap: usize,
    target: [f64; 2],
    axis: Axis,
    config: &ScenarioConfig,
) -> Result<DVector<Complex64>, ChannelError> {
    let trunc = steering_derivative(ap, target, axis, config)?;
    let a = steering_vector(ap, target, config)?;
    let center = trunc[config.half_elements() as usize];
    Ok(DVector::from_iterator(
        trunc.len(),
        trunc.iter().zip(a.values.iter()).map(|(&t, &av)| t - center * av),
    ))
}

/// Channel uncertainty bounds `eps[k][m] = alpha_e * sqrt(crlb_total) *
/// norm(h[k][m])` for a given total position CRLB (m^2).
pub fn uncertainty_bounds(
    crlb_total: f64,
    channels: &ChannelSet,
    config: &ScenarioConfig,
) -> UncertaintyBounds {
    let root = crlb_total.max(0.0).sqrt();
    let eps = channels
        .vectors
        .iter()
        .map(|row| {
            row.iter()
                .map(|h| config.error_coefficient * root * h.norm())
                .collect()
        })
        .collect();
    UncertaintyBounds { eps, crlb_total, eta: None }
}

/// Block-diagonal stacking helper: places per-AP square blocks on the
/// diagonal of an `(M n) x (M n)` matrix.
pub fn block_diag(blocks: &[DMatrix<Complex64>]) -> DMatrix<Complex64> {
    let n: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = DMatrix::zeros(n, n);
    let mut off = 0;
    for b in blocks {
        out.view_mut((off, off), (b.nrows(), b.ncols())).copy_from(b);
        off += b.nrows();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::ScenarioConfig;

    fn cfg() -> ScenarioConfig {
        ScenarioConfig::default()
    }

    #[test]
    fn steering_center_entry_exact_and_unit_modulus() {
        let cfg = cfg();
        for (ap, &target) in [[20.0, 30.0], [35.0, 60.0]].iter().enumerate() {
            let a = steering_vector(ap, target, &cfg).unwrap();
            let half = cfg.half_elements() as usize;
            assert_eq!(a.values[half], Complex64::new(1.0, 0.0));
            for v in a.values.iter() {
                assert!((v.norm() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn steering_matches_extended_precision_distance_formula() {
        // Independent oracle: per-element distances computed in a separate
        // code path with explicit coordinates, N_t = 3, half-wave spacing.
        let mut cfg = cfg();
        cfg.n_elements = 3;
        cfg.element_spacing = cfg.carrier_wavelength / 2.0;
        cfg.ap_orientations = vec![[cfg.element_spacing, 0.0]; 3];
        let ap = 1; // (10, 20)
        let user = [20.0, 30.0];
        let a = steering_vector(ap, user, &cfg).unwrap();
        let d = cfg.element_spacing;
        let lam = cfg.carrier_wavelength;
        for n in -1i64..=1 {
            let ex = 10.0 + n as f64 * d;
            let rn = ((user[0] - ex).powi(2) + (user[1] - 20.0).powi(2)).sqrt();
            let r0 = ((user[0] - 10.0f64).powi(2) + (user[1] - 20.0).powi(2)).sqrt();
            let expect = Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI / lam * (rn - r0));
            let got = a.values[(n + 1) as usize];
            // agreement limited by cancellation in r(n) - r(0) at ~1e-12
            assert!((got - expect).norm() < 1e-10, "n={n}: {got} vs {expect}");
        }
    }

    #[test]
    fn far_field_broadside_and_conjugate_symmetry() {
        let cfg = cfg();
        let a0 = far_field_steering(0, 0.0, &cfg);
        for v in a0.values.iter() {
            assert_eq!(*v, Complex64::new(1.0, 0.0));
        }
        let ap = far_field_steering(0, 0.4, &cfg);
        let am = far_field_steering(0, -0.4, &cfg);
        for (x, y) in ap.values.iter().zip(am.values.iter()) {
            assert!((x - y.conj()).norm() < 1e-12);
        }
    }

    #[test]
    fn far_field_direct_formula_pi_over_6() {
        // aod = pi/6, d = lambda/2, N_t = 3: phases (+,0,-) of
        // 2 pi * (1/2) * (1/2) = pi/2 across n = -1, 0, +1.
        let mut cfg = cfg();
        cfg.n_elements = 3;
        cfg.element_spacing = cfg.carrier_wavelength / 2.0;
        cfg.ap_orientations = vec![[cfg.element_spacing, 0.0]; 3];
        let a = far_field_steering(0, std::f64::consts::FRAC_PI_6, &cfg);
        let q = std::f64::consts::FRAC_PI_2;
        assert!((a.values[0] - Complex64::from_polar(1.0, q)).norm() < 1e-12);
        assert!((a.values[1] - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        assert!((a.values[2] - Complex64::from_polar(1.0, -q)).norm() < 1e-12);
    }

    #[test]
    fn near_field_approaches_far_field_with_distance() {
        let cfg = cfg();
        let o = cfg.ap_orientations[0];
        let dir = [o[1] / cfg.element_spacing, -o[0] / cfg.element_spacing]; // broadside
        let mix = |r: f64| {
            // off-broadside by rotating the probe direction a bit
            let th: f64 = 0.3;
            let (s, c) = th.sin_cos();
            [
                cfg.ap_centers[0][0] + r * (c * dir[0] - s * dir[1]),
                cfg.ap_centers[0][1] + r * (s * dir[0] + c * dir[1]),
            ]
        };
        // The residual curvature phase decays like D^2 / (8 r), so the radii
        // must grow well past the Rayleigh distance (~52.5 m) to converge.
        let mut last = f64::INFINITY;
        for r in [50.0, 5e3, 5e5] {
            let target = mix(r);
            let near = steering_vector(0, target, &cfg).unwrap();
            let far = far_field_steering(0, far_field_aod(0, target, &cfg), &cfg);
            let err = (&near.values - &far.values).norm();
            assert!(err < last, "agreement must improve with distance");
            last = err;
        }
        assert!(last < 1e-3, "far-field limit not reached: {last}");
    }

    #[test]
    fn gain_inverse_distance_law_and_reference_value() {
        let mut cfg = cfg();
        cfg.ap_centers = vec![[0.0, 0.0]];
        cfg.ap_orientations = vec![[cfg.element_spacing, 0.0]];
        cfg.user_positions = vec![[25.0, 0.0], [50.0, 0.0]];
        let b1 = gain(0, [25.0, 0.0], &cfg).unwrap();
        let b2 = gain(0, [50.0, 0.0], &cfg).unwrap();
        assert!((b1.norm() / b2.norm() - 2.0).abs() < 1e-9);
        // lambda ~ 0.0107068..., r = 25: amplitude sqrt(lam / (4 pi 625)).
        let expect = (cfg.carrier_wavelength / (4.0 * std::f64::consts::PI * 625.0)).sqrt();
        assert!((b1.norm() - expect).abs() < 1e-15);
        assert!((expect - 1.1676e-3).abs() < 1e-6);
    }

    #[test]
    fn channel_norm_identity_and_reconstruction() {
        let cfg = cfg();
        let set = channel_set(&cfg).unwrap();
        for k in 0..cfg.n_users() {
            for m in 0..cfg.n_aps() {
                let h = &set.vectors[k][m];
                let b = set.gains[k][m];
                let expect = b.norm() * (cfg.n_elements as f64).sqrt();
                assert!((h.norm() - expect).abs() < 1e-9 * expect);
                // h = beta * a elementwise
                let a = steering_vector(m, cfg.user_positions[k], &cfg).unwrap();
                for (hv, av) in h.iter().zip(a.values.iter()) {
                    assert!((hv - b * av).norm() < 1e-15);
                }
                // norm^2 / N = lambda / (4 pi r0^2)
                let apc = cfg.ap_centers[m];
                let u = cfg.user_positions[k];
                let r0 = (u[0] - apc[0]).hypot(u[1] - apc[1]);
                let want = cfg.carrier_wavelength / (4.0 * std::f64::consts::PI * r0 * r0);
                let got = h.norm().powi(2) / cfg.n_elements as f64;
                assert!((got - want).abs() < 1e-12 * want);
            }
        }
        // stacking order is AP-major
        let n = cfg.n_elements;
        for k in 0..cfg.n_users() {
            for m in 0..cfg.n_aps() {
                let slice = set.stacked[k].rows(m * n, n).clone_owned();
                assert_eq!(slice, set.vectors[k][m]);
            }
        }
    }

    #[test]
    fn degenerate_geometry_is_an_error() {
        let mut cfg = cfg();
        cfg.user_positions[0] = cfg.ap_centers[0];
        let err = steering_vector(0, cfg.user_positions[0], &cfg).unwrap_err();
        assert!(matches!(err, ChannelError::DegenerateGeometry { .. }));
    }

    #[test]
    fn steering_derivative_center_entry_direct_substitution() {
        let cfg = cfg();
        let ap = 1;
        let target = [20.0, 30.0];
        let d = steering_derivative(ap, target, Axis::X, &cfg).unwrap();
        let apc = cfg.ap_centers[ap];
        let r0 = (target[0] - apc[0]).hypot(target[1] - apc[1]);
        let k = 2.0 * std::f64::consts::PI / cfg.carrier_wavelength;
        // dr(0)/dx = (c_x - ap_x)/r(0); entry = -j k dr(0) * 1.
        let expect = Complex64::new(0.0, -k * (target[0] - apc[0]) / r0);
        let half = cfg.half_elements() as usize;
        assert!((d[half] - expect).norm() < 1e-12 * expect.norm());
    }

    #[test]
    fn steering_derivative_matches_central_differences() {
        // Central differences (base step 1e-5 m, Richardson-extrapolated to
        // kill the O(h^2) term of the fast phase) of the fixed-reference
        // phase function exp(-j k (r(n)(c) - r(0)(c0))); per-element
        // relative error <= 1e-6.
        let cfg = cfg();
        let h = 1e-5;
        for ap in 0..cfg.n_aps() {
            for &target in &cfg.user_positions {
                let (_, r0) = super::distances(ap, target, &cfg).unwrap();
                let kw = 2.0 * std::f64::consts::PI / cfg.carrier_wavelength;
                let phase_ref = Complex64::from_polar(1.0, kw * r0);
                // full-phase vectors e^{-j k r(n)}, re-referenced to r0(c)
                let full = |t: [f64; 2]| {
                    let (r, _) = super::distances(ap, t, &cfg).unwrap();
                    DVector::from_iterator(
                        r.len(),
                        r.iter().map(|&rn| Complex64::from_polar(1.0, -kw * rn) * phase_ref),
                    )
                };
                for axis in [Axis::X, Axis::Y] {
                    let analytic = steering_derivative(ap, target, axis, &cfg).unwrap();
                    let central = |step: f64| {
                        let mut tp = target;
                        let mut tm = target;
                        tp[axis.index()] += step;
                        tm[axis.index()] -= step;
                        (full(tp) - full(tm)) / Complex64::new(2.0 * step, 0.0)
                    };
                    let fd = (central(h) * Complex64::new(4.0, 0.0) - central(2.0 * h))
                        / Complex64::new(3.0, 0.0);
                    for (a, f) in analytic.iter().zip(fd.iter()) {
                        let scale = f.norm().max(1e-30);
                        assert!(
                            (a - f).norm() / scale < 1e-6,
                            "ap {ap} axis {axis:?}: {a} vs {f}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn steering_derivative_bisector_symmetry() {
        // User on the perpendicular bisector of every +-n element pair
        // (broadside through the array center): r(+n) = r(-n) and
        // a(+n) = a(-n), so dr/dx is odd in n (x runs along the array) and
        // dr/dy is even. The derivative entries inherit exactly that
        // symmetry: d_x(+n) = -d_x(-n) and d_y(+n) = d_y(-n).
        let mut cfg = cfg();
        cfg.ap_centers = vec![[0.0, 0.0]];
        cfg.ap_orientations = vec![[cfg.element_spacing, 0.0]];
        cfg.user_positions = vec![[0.0, 10.0]];
        let dx = steering_derivative(0, [0.0, 10.0], Axis::X, &cfg).unwrap();
        let dy = steering_derivative(0, [0.0, 10.0], Axis::Y, &cfg).unwrap();
        let half = cfg.half_elements();
        for n in 1..=half {
            let (xp, xm) = (dx[(half + n) as usize], dx[(half - n) as usize]);
            assert!((xp + xm).norm() < 1e-12 * xp.norm().max(1e-30));
            let (yp, ym) = (dy[(half + n) as usize], dy[(half - n) as usize]);
            assert!((yp - ym).norm() < 1e-12 * yp.norm().max(1e-30));
        }
    }

    #[test]
    fn uncertainty_bounds_arithmetic_and_linearity() {
        let mut cfg = cfg();
        cfg.error_coefficient = 373.0;
        let set = channel_set(&cfg).unwrap();
        let b = uncertainty_bounds(1e-11, &set, &cfg);
        for k in 0..cfg.n_users() {
            for m in 0..cfg.n_aps() {
                let expect = 373.0 * 1e-11f64.sqrt() * set.vectors[k][m].norm();
                assert!((b.eps[k][m] - expect).abs() < 1e-15);
                assert!(b.eps[k][m] >= 0.0);
            }
        }
        // alpha_e = 373, crlb = 1e-11, |h| = 0.01 -> eps ~ 1.18e-5
        let unit = 373.0 * 1e-11f64.sqrt() * 0.01;
        assert!((unit - 1.17953e-5).abs() < 1e-9);
        // zero sensing error -> zero bounds
        let z = uncertainty_bounds(0.0, &set, &cfg);
        assert!(z.eps.iter().flatten().all(|&e| e == 0.0));
        // doubling the channel norm doubles eps (linearity in |h|)
        let b2 = uncertainty_bounds(4e-11, &set, &cfg);
        for (r1, r2) in b.eps.iter().zip(b2.eps.iter()) {
            for (e1, e2) in r1.iter().zip(r2.iter()) {
                assert!((e2 / e1 - 2.0).abs() < 1e-12);
            }
        }
    }
}
