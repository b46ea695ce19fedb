use cfisac::channel::uncertainty_bounds;
use cfisac::robust::{robust_feasibility, BeamStructure, CommModel};
use cfisac::scenario::ScenarioConfig;
use cfisac::schemes::sensing_crlb_bar;
use cfisac::timealloc::crlb_at;

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
    for eta in [0.94] {
        let eps = uncertainty_bounds(crlb_at(crlb_bar, eta, &cfg), &comm.channels, &cfg).eps;
        println!("eta {eta} eps {:?}", eps);
        for i in 0..26 {
            let rate = 0.40 + 0.02 * i as f64;
            // gamma from rate: R = eta * T? — use the same helper the bisection uses
            let gamma = cfisac::robust::gamma_from_rate(rate, eta, &cfg);
            let out = robust_feasibility(gamma, &comm, &eps, &cfg, BeamStructure::Full).unwrap();
            println!("rate {rate:.2} gamma {gamma:.4e} feasible {} numfail {} [{}]", out.feasible, out.numerical_failure, out.raw_status);
        }
    }
}
