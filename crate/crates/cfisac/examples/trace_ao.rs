use cfisac::scenario::ScenarioConfig;
use cfisac::schemes::run_main;

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
    for eta0 in [0.1, 0.2, 0.5, 0.8, 0.9] {
        let r = run_main(&desk_config(), eta0, 1e-3).unwrap();
        println!(
            "eta0 {eta0}: eta_final {:.6} certified {:.6} relaxed {:.6} iters {} eta_bar {:.6}",
            r.eta_final, r.certified_rate, r.relaxed_rate, r.iterations, r.eta_bar
        );
        println!("  eta_trace: {:?}", r.eta_trace.iter().map(|v| (v * 1e4).round() / 1e4).collect::<Vec<_>>());
        println!("  rate_trace: {:?}", r.rate_trace.iter().map(|v| (v * 1e4).round() / 1e4).collect::<Vec<_>>());
    }
}
