//! Runs a bundled scenario in-process and prints the summary and the
//! per-round interference. Pass a scenario name or path as the first
//! argument (default `static_office`).

use chanalloc::{simulate, Scenario};

fn main() {
    let name = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "static_office".into());
    let scenario = Scenario::load(&name).unwrap_or_else(|e| panic!("{e}"));
    let report = simulate(scenario, 10).unwrap();
    print!("{}", report.summary());
    for a in &report.assignments {
        println!("round {}: {} {} -> {}", a.round, a.ap_id, a.from, a.to);
    }
    for i in &report.interference {
        if let Some(level) = i.level_dbm {
            println!("round {} interference {level:.2} dBm", i.round);
        }
    }
}
