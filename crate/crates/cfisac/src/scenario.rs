//! Scenario configuration: geometry, powers, timing, and thresholds.
//!
//! Configurations are read from a TOML document whose boundary units are
//! meters, dBm, and milliseconds; internally everything is stored in SI
//! units (meters, watts, seconds). Omitted keys fall back to the reference
//! three-AP / four-user scenario.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Speed of light in m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Reference carrier frequency (28 GHz) used by the default scenario.
pub const DEFAULT_CARRIER_HZ: f64 = 28e9;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("failed to read scenario file: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed scenario document: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invariant violated: {0}")]
    Invariant(String),
}

/// Validated simulation scenario. Immutable after construction and safely
/// shareable across threads; all quantities in SI units.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    /// AP array centers `(x, y)` in meters.
    pub ap_centers: Vec<[f64; 2]>,
    /// Per-AP inter-element offset vector `(dx, dy)` in meters; its norm must
    /// equal `element_spacing`.
    pub ap_orientations: Vec<[f64; 2]>,
    /// User positions `(x, y)` in meters.
    pub user_positions: Vec<[f64; 2]>,
    /// Antennas per AP; odd, `>= 3` (elements are indexed `-N..=N`).
    pub n_elements: usize,
    /// Inter-element spacing `d` in meters.
    pub element_spacing: f64,
    /// Carrier wavelength in meters.
    pub carrier_wavelength: f64,
    /// Noise power in watts.
    pub noise_power: f64,
    /// Transmission block duration `T` in seconds.
    pub block_duration: f64,
    /// Sensing slot duration (one echo snapshot) in seconds.
    pub sensing_slot: f64,
    /// Per-AP communication power budget in watts.
    pub comm_power_budget: f64,
    /// Per-AP sensing power budget in watts.
    pub sensing_power_budget: f64,
    /// Localization requirement on the total position CRLB, in meters^2.
    pub crlb_threshold: f64,
    /// Calibration coefficient mapping localization error to channel error.
    pub error_coefficient: f64,
    /// Seed for the radar-cross-section draw.
    pub rcs_seed: u64,
}

/// Raw file-boundary representation (meters / dBm / milliseconds), with all
/// keys optional so that omitted values fall back to the reference scenario.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct ScenarioFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    ap_centers: Option<Vec<[f64; 2]>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ap_orientations: Option<Vec<[f64; 2]>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    user_positions: Option<Vec<[f64; 2]>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    n_elements: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    element_spacing: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    carrier_wavelength: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    noise_power_dbm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    block_duration_ms: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sensing_slot_ms: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    comm_power_budget_dbm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sensing_power_budget_dbm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    crlb_threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error_coefficient: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rcs_seed: Option<u64>,
}

/// dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Watts to dBm.
pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * watts.log10() + 30.0
}

impl Default for ScenarioConfig {
    /// The reference scenario: three APs at (30,70), (10,20), (60,30) m and
    /// four users at (20,30), (25,40), (40,30), (35,60) m; 21 antennas per AP
    /// at 26.5 mm spacing (0.53 m aperture); 28 GHz carrier; -70 dBm noise;
    /// 100 ms blocks with 1 ms sensing slots; 30 dBm communication and
    /// 40 dBm sensing budgets per AP.
    fn default() -> Self {
        let d = 0.0265;
        ScenarioConfig {
            ap_centers: vec![[30.0, 70.0], [10.0, 20.0], [60.0, 30.0]],
            ap_orientations: vec![[d, 0.0]; 3],
            user_positions: vec![[20.0, 30.0], [25.0, 40.0], [40.0, 30.0], [35.0, 60.0]],
            n_elements: 21,
            element_spacing: d,
            carrier_wavelength: SPEED_OF_LIGHT / DEFAULT_CARRIER_HZ,
            noise_power: dbm_to_watts(-70.0),
            block_duration: 0.1,
            sensing_slot: 1e-3,
            comm_power_budget: dbm_to_watts(30.0),
            sensing_power_budget: dbm_to_watts(40.0),
            crlb_threshold: 1e-11,
            error_coefficient: 373.0,
            rcs_seed: 12,
        }
    }
}

impl ScenarioConfig {
    /// Number of APs.
    pub fn n_aps(&self) -> usize {
        self.ap_centers.len()
    }

    /// Number of users.
    pub fn n_users(&self) -> usize {
        self.user_positions.len()
    }

    /// Half-aperture index `N` such that `n_elements = 2N + 1`.
    pub fn half_elements(&self) -> i64 {
        (self.n_elements as i64 - 1) / 2
    }

    /// Validates all construction invariants; returns the violated invariant
    /// by name on failure.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let inv = |msg: String| Err(ScenarioError::Invariant(msg));
        if self.n_elements % 2 == 0 {
            return inv(format!("n_elements must be odd (got {})", self.n_elements));
        }
        if self.n_elements < 3 {
            return inv(format!("n_elements must be >= 3 (got {})", self.n_elements));
        }
        if self.ap_centers.is_empty() {
            return inv("ap_centers must be nonempty".into());
        }
        if self.user_positions.is_empty() {
            return inv("user_positions must be nonempty".into());
        }
        if self.ap_orientations.len() != self.ap_centers.len() {
            return inv(format!(
                "ap_orientations length {} must match ap_centers length {}",
                self.ap_orientations.len(),
                self.ap_centers.len()
            ));
        }
        for (m, o) in self.ap_orientations.iter().enumerate() {
            let norm = o[0].hypot(o[1]);
            if (norm - self.element_spacing).abs() > 1e-9 * self.element_spacing.max(1e-30) {
                return inv(format!(
                    "ap_orientations[{m}] norm {norm} must equal element_spacing {}",
                    self.element_spacing
                ));
            }
        }
        for (name, v) in [
            ("element_spacing", self.element_spacing),
            ("carrier_wavelength", self.carrier_wavelength),
            ("noise_power", self.noise_power),
            ("block_duration", self.block_duration),
            ("sensing_slot", self.sensing_slot),
            ("comm_power_budget", self.comm_power_budget),
            ("sensing_power_budget", self.sensing_power_budget),
            ("crlb_threshold", self.crlb_threshold),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return inv(format!("{name} must be strictly positive (got {v})"));
            }
        }
        if self.error_coefficient < 0.0 || !self.error_coefficient.is_finite() {
            return inv(format!(
                "error_coefficient must be nonnegative (got {})",
                self.error_coefficient
            ));
        }
        if self.sensing_slot > self.block_duration {
            return inv(format!(
                "sensing_slot {} must not exceed block_duration {}",
                self.sensing_slot, self.block_duration
            ));
        }
        Ok(())
    }

    /// Rayleigh distance `2 D^2 / lambda` with aperture `D = (n_elements-1) d`.
    /// Targets closer than this see a curved (near-field) wavefront.
    pub fn rayleigh_distance(&self) -> f64 {
        let aperture = (self.n_elements as f64 - 1.0) * self.element_spacing;
        2.0 * aperture * aperture / self.carrier_wavelength
    }

    /// AP-user pairs whose distance is at or beyond the Rayleigh distance
    /// (the near-field model is then questionable). Violations are warnings,
    /// not errors.
    pub fn far_field_violations(&self) -> Vec<(usize, usize, f64)> {
        let rd = self.rayleigh_distance();
        let mut out = Vec::new();
        for (k, u) in self.user_positions.iter().enumerate() {
            for (m, a) in self.ap_centers.iter().enumerate() {
                let dist = (u[0] - a[0]).hypot(u[1] - a[1]);
                if dist >= rd {
                    out.push((k, m, dist));
                }
            }
        }
        out
    }

    /// Radar cross-section coefficients `rho[k][l][m] ~ CN(0, 1)` for user k
    /// between receive AP l and transmit AP m, drawn deterministically from
    /// `rcs_seed`. One draw per scenario (quasi-static block assumption).
    pub fn rcs(&self) -> Vec<Vec<Vec<Complex64>>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.rcs_seed);
        let (m_aps, k_users) = (self.n_aps(), self.n_users());
        (0..k_users)
            .map(|_| {
                (0..m_aps)
                    .map(|_| (0..m_aps).map(|_| draw_cn01(&mut rng)).collect())
                    .collect()
            })
            .collect()
    }

    /// Serializes to the file-boundary TOML representation (meters / dBm /
    /// milliseconds). Parsing the output reproduces this config exactly.
    pub fn to_toml_string(&self) -> String {
        let raw = ScenarioFile {
            ap_centers: Some(self.ap_centers.clone()),
            ap_orientations: Some(self.ap_orientations.clone()),
            user_positions: Some(self.user_positions.clone()),
            n_elements: Some(self.n_elements),
            element_spacing: Some(self.element_spacing),
            carrier_wavelength: Some(self.carrier_wavelength),
            noise_power_dbm: Some(watts_to_dbm(self.noise_power)),
            block_duration_ms: Some(self.block_duration * 1e3),
            sensing_slot_ms: Some(self.sensing_slot * 1e3),
            comm_power_budget_dbm: Some(watts_to_dbm(self.comm_power_budget)),
            sensing_power_budget_dbm: Some(watts_to_dbm(self.sensing_power_budget)),
            crlb_threshold: Some(self.crlb_threshold),
            error_coefficient: Some(self.error_coefficient),
            rcs_seed: Some(self.rcs_seed),
        };
        toml::to_string(&raw).expect("scenario serialization cannot fail")
    }

    /// Short hex digest of the canonical serialized form, attached to every
    /// experiment output row for provenance.
    pub fn content_hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let digest = Sha256::digest(self.to_toml_string().as_bytes());
        let mut s = String::with_capacity(12);
        for b in &digest[..6] {
            s.push_str(&format!("{b:02x}"));
        }
        s
    }
}

/// One standard complex normal draw (unit total variance).
pub(crate) fn draw_cn01<R: Rng>(rng: &mut R) -> Complex64 {
    use rand_distr::StandardNormal;
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Parses and validates a scenario from a TOML string. Omitted keys default
/// to the reference scenario; dBm and millisecond values are converted to
/// watts and seconds. Near-field violations are reported on stderr as
/// warnings.
pub fn load_scenario_str(doc: &str) -> Result<ScenarioConfig, ScenarioError> {
    let raw: ScenarioFile = toml::from_str(doc)?;
    let d = ScenarioConfig::default();
    let element_spacing = raw.element_spacing.unwrap_or(d.element_spacing);
    let ap_centers = raw.ap_centers.unwrap_or(d.ap_centers);
    // Orientation defaults to horizontal when unspecified.
    let ap_orientations = raw
        .ap_orientations
        .unwrap_or_else(|| vec![[element_spacing, 0.0]; ap_centers.len()]);
    let cfg = ScenarioConfig {
        ap_centers,
        ap_orientations,
        user_positions: raw.user_positions.unwrap_or(d.user_positions),
        n_elements: raw.n_elements.unwrap_or(d.n_elements),
        element_spacing,
        carrier_wavelength: raw.carrier_wavelength.unwrap_or(d.carrier_wavelength),
        noise_power: raw.noise_power_dbm.map_or(d.noise_power, dbm_to_watts),
        block_duration: raw.block_duration_ms.map_or(d.block_duration, |v| v * 1e-3),
        sensing_slot: raw.sensing_slot_ms.map_or(d.sensing_slot, |v| v * 1e-3),
        comm_power_budget: raw
            .comm_power_budget_dbm
            .map_or(d.comm_power_budget, dbm_to_watts),
        sensing_power_budget: raw
            .sensing_power_budget_dbm
            .map_or(d.sensing_power_budget, dbm_to_watts),
        crlb_threshold: raw.crlb_threshold.unwrap_or(d.crlb_threshold),
        error_coefficient: raw.error_coefficient.unwrap_or(d.error_coefficient),
        rcs_seed: raw.rcs_seed.unwrap_or(d.rcs_seed),
    };
    cfg.validate()?;
    for (k, m, dist) in cfg.far_field_violations() {
        eprintln!(
            "warning: user {k} is {dist:.1} m from AP {m}, at or beyond the \
             Rayleigh distance {:.1} m; the near-field model degenerates there",
            cfg.rayleigh_distance()
        );
    }
    Ok(cfg)
}

/// Loads a scenario from a TOML file. See [`load_scenario_str`].
pub fn load_scenario<P: AsRef<std::path::Path>>(path: P) -> Result<ScenarioConfig, ScenarioError> {
    let doc = std::fs::read_to_string(path)?;
    load_scenario_str(&doc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dbm_conversion_round_numbers() {
        assert!((dbm_to_watts(-70.0) - 1e-10).abs() < 1e-25);
        assert!((dbm_to_watts(30.0) - 1.0).abs() < 1e-12);
        assert!((dbm_to_watts(40.0) - 10.0).abs() < 1e-11);
        assert!((watts_to_dbm(1e-10) + 70.0).abs() < 1e-9);
    }

    #[test]
    fn default_reference_scenario_is_valid() {
        let cfg = ScenarioConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.n_aps(), 3);
        assert_eq!(cfg.n_users(), 4);
        assert_eq!(cfg.n_elements, 21);
        assert!((cfg.noise_power - 1e-10).abs() < 1e-25);
        assert!((cfg.sensing_power_budget - 10.0).abs() < 1e-11);
        assert!((cfg.carrier_wavelength - 0.0107068735).abs() < 1e-9);
    }

    #[test]
    fn empty_document_loads_reference_defaults() {
        let cfg = load_scenario_str("").unwrap();
        assert_eq!(cfg, ScenarioConfig::default());
    }

    #[test]
    fn even_n_elements_rejected_naming_invariant() {
        let err = load_scenario_str("n_elements = 20").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("n_elements must be odd"), "got: {msg}");
    }

    #[test]
    fn orientation_norm_invariant_enforced() {
        let doc = r#"
            ap_centers = [[0.0, 0.0]]
            ap_orientations = [[0.03, 0.0]]
            user_positions = [[5.0, 5.0]]
        "#;
        let err = load_scenario_str(doc).unwrap_err();
        assert!(err.to_string().contains("ap_orientations[0]"));
    }

    #[test]
    fn rotated_orientation_accepted_when_norm_matches() {
        let d = 0.0265;
        let (s, c) = (std::f64::consts::FRAC_PI_4).sin_cos();
        let doc = format!(
            "ap_centers = [[0.0, 0.0]]\nap_orientations = [[{}, {}]]\nuser_positions = [[5.0, 5.0]]\n",
            d * c,
            d * s
        );
        load_scenario_str(&doc).unwrap();
    }

    #[test]
    fn rayleigh_distance_reference_value() {
        // 0.53 m aperture at 28 GHz: 2 * 0.53^2 / 0.010707 ~ 52.5 m.
        let cfg = ScenarioConfig::default();
        let rd = cfg.rayleigh_distance();
        assert!((rd - 52.5).abs() < 0.5, "rd = {rd}");
    }

    #[test]
    fn rayleigh_distance_half_wave_identity() {
        // N_t = 3 at half-wavelength spacing: D = 2*(lambda/2) = lambda, so
        // the Rayleigh distance is exactly 2*lambda.
        let mut cfg = ScenarioConfig::default();
        cfg.n_elements = 3;
        cfg.element_spacing = cfg.carrier_wavelength / 2.0;
        cfg.ap_orientations = vec![[cfg.element_spacing, 0.0]; 3];
        let rd = cfg.rayleigh_distance();
        assert!((rd - 2.0 * cfg.carrier_wavelength).abs() < 1e-12);
    }

    #[test]
    fn rayleigh_distance_quadratic_scaling() {
        let cfg = ScenarioConfig::default();
        let mut cfg2 = cfg.clone();
        cfg2.n_elements = 2 * cfg.n_elements - 1; // doubled aperture, same d
        assert!((cfg2.rayleigh_distance() / cfg.rayleigh_distance() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn serialization_round_trip_is_exact() {
        let cfg = ScenarioConfig::default();
        let doc = cfg.to_toml_string();
        let back = load_scenario_str(&doc).unwrap();
        assert_eq!(cfg, back);

        // A non-default config with rotated arrays round-trips too.
        let mut cfg = ScenarioConfig::default();
        cfg.user_positions = vec![[12.5, 33.25], [1.0, 2.0]];
        cfg.crlb_threshold = 2e-3;
        cfg.error_coefficient = 3.0;
        cfg.rcs_seed = 77;
        let back = load_scenario_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn rcs_deterministic_and_unit_variance() {
        let mut cfg = ScenarioConfig::default();
        // 100 users x 10 APs x 10 APs = 1e4 draws.
        cfg.user_positions = (0..100).map(|i| [i as f64, 1.0 + i as f64]).collect();
        cfg.ap_centers = (0..10).map(|i| [0.0, 10.0 * i as f64]).collect();
        cfg.ap_orientations = vec![[cfg.element_spacing, 0.0]; 10];
        let a = cfg.rcs();
        let b = cfg.rcs();
        assert_eq!(a, b, "same seed must reproduce the identical draw");

        let mut n = 0usize;
        let (mut sum, mut sumsq) = (Complex64::new(0.0, 0.0), 0.0);
        for k in &a {
            for l in k {
                for v in l {
                    n += 1;
                    sum += v;
                    sumsq += v.norm_sqr();
                }
            }
        }
        assert_eq!(n, 10_000);
        let var = sumsq / n as f64;
        assert!((var - 1.0).abs() < 0.05, "empirical variance {var}");
        assert!(sum.norm() / n as f64 * (n as f64).sqrt() < 4.0, "mean not ~0");

        cfg.rcs_seed = 2;
        assert_ne!(cfg.rcs(), a, "different seed must change the draw");
    }

    #[test]
    fn content_hash_tracks_config_changes() {
        let a = ScenarioConfig::default();
        let mut b = a.clone();
        assert_eq!(a.content_hash(), b.content_hash());
        b.rcs_seed = 99;
        assert_ne!(a.content_hash(), b.content_hash());
    }

    #[test]
    fn far_field_violation_detected_not_fatal() {
        let mut cfg = ScenarioConfig::default();
        cfg.user_positions.push([500.0, 500.0]); // ~665 m > 52.5 m
        cfg.validate().unwrap();
        let v = cfg.far_field_violations();
        assert!(v.iter().any(|&(k, _, _)| k == 4));
    }
}
