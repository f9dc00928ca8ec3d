//! Starts a controller on loopback, runs every sensor of a scenario as a
//! separate TCP client and compares the result with an in-process run.

use std::thread;
use std::time::Duration;

use chanalloc::client::run_sensor_emitter;
use chanalloc::server::{Controller, ServeOptions};
use chanalloc::{simulate, Scenario};

fn main() {
    let rounds = 5;
    let scenario = Scenario::bundled("static_office").unwrap();
    let mut opts = ServeOptions::new(scenario.clone());
    opts.max_rounds = Some(rounds);
    let handle = Controller::bind("127.0.0.1:0", opts)
        .unwrap()
        .spawn()
        .unwrap();
    println!("controller on {}", handle.addr());

    let addr = handle.addr();
    let clients: Vec<_> = scenario
        .sensors
        .iter()
        .map(|s| {
            let sc = scenario.clone();
            let id = s.id.clone();
            thread::spawn(move || {
                (
                    id.clone(),
                    run_sensor_emitter(addr, &sc, &id, rounds, Duration::from_secs(10)),
                )
            })
        })
        .collect();
    for c in clients {
        let (id, summary) = c.join().unwrap();
        let summary = summary.unwrap();
        println!(
            "{id}: {} reports, {} assignments seen",
            summary.reports_sent,
            summary.assignments_seen.len()
        );
    }

    let served = handle.join();
    let local = simulate(scenario, rounds).unwrap();
    print!("{}", served.summary());
    println!("matches in-process run: {}", served == local);
}
