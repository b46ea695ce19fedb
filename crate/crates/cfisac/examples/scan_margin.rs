use cfisac::channel::uncertainty_bounds;
use cfisac::robust::{bi_rbo, BeamStructure, CommModel};
use cfisac::scenario::ScenarioConfig;
use cfisac::schemes::sensing_crlb_bar;
use cfisac::timealloc::{crlb_at, margins};

fn desk_config() -> ScenarioConfig {
    let mut cfg = ScenarioConfig::default();
    cfg.ap_centers = vec![[0.0, 0.0], [12.0, 0.0]];
    cfg.ap_orientations = vec![[cfg.element_spacing, 0.0]; 2];
    cfg.user_positions = vec![[3.0, 4.0], [9.0, 5.0]];
    cfg.n_elements = 7;
    cfg.comm_power_budget = 1.0;
    cfg.sensing_power_budget = 10.0;
    cfg.error_coefficient = 3.0;
    cfg.crlb_threshold = 2e-3;
    cfg
}

fn main() {
    let cfg = desk_config();
    let crlb_bar = sensing_crlb_bar(&cfg).unwrap();
    let comm = CommModel::new(&cfg).unwrap();
    let eta0 = 0.53;
    let eps = uncertainty_bounds(crlb_at(crlb_bar, eta0, &cfg), &comm.channels, &cfg).eps;
    let out = bi_rbo(&comm, &eps, eta0, &cfg, 1e-3, BeamStructure::Full, None).unwrap();
    println!("rate at eta {eta0}: {:.6}", out.rate);
    for i in [10, 20, 30, 40, 50, 53, 56, 60, 70, 80, 90, 95, 99] {
        let eta = i as f64 / 100.0;
        let m = margins(out.rate, eta, &out.beams, &out.lambda, crlb_bar, &comm, &cfg).unwrap();
        let min = m.iter().cloned().fold(f64::INFINITY, f64::min);
        println!("eta {eta:.2}: min margin {min:+.6e}  per-user {m:?}");
    }
}
