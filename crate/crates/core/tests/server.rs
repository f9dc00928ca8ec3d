use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::thread;
use std::time::{Duration, Instant};

use chanalloc::client::{replay_lines, run_sensor_emitter};
use chanalloc::protocol::{decode, encode, ErrorCode, Message};
use chanalloc::scenario::Scenario;
use chanalloc::server::{query_status, serve_status, Controller, ServeOptions};
use chanalloc::sim::{simulate, SensorDriver};

fn start(
    sc: Scenario,
    rounds: Option<u64>,
    timeout: Duration,
) -> chanalloc::server::ControllerHandle {
    let mut opts = ServeOptions::new(sc);
    opts.max_rounds = rounds;
    opts.window_timeout = timeout;
    Controller::bind("127.0.0.1:0", opts)
        .unwrap()
        .spawn()
        .unwrap()
}

fn wait_until(mut f: impl FnMut() -> bool) {
    let deadline = Instant::now() + Duration::from_secs(10);
    while !f() {
        assert!(Instant::now() < deadline, "timed out");
        thread::sleep(Duration::from_millis(10));
    }
}

#[test]
fn malformed_line_gets_a_parse_error_and_the_connection_survives() {
    let handle = start(
        Scenario::bundled("single_jammer").unwrap(),
        None,
        Duration::from_secs(60),
    );
    let mut stream = TcpStream::connect(handle.addr()).unwrap();
    stream
        .set_read_timeout(Some(Duration::from_secs(5)))
        .unwrap();
    let mut reader = BufReader::new(stream.try_clone().unwrap());

    stream
        .write_all(b"{\"type\":\"channel_report\",\"seq\":\n")
        .unwrap();
    let mut line = String::new();
    reader.read_line(&mut line).unwrap();
    match decode(line.as_bytes()).unwrap() {
        Message::Error { code, .. } => assert_eq!(code, ErrorCode::Parse),
        other => panic!("{other:?}"),
    }

    let sc = Scenario::bundled("single_jammer").unwrap();
    let driver = SensorDriver::new(sc.sensors[0].clone());
    stream.write_all(&encode(&driver.hello()).unwrap()).unwrap();
    wait_until(|| handle.status().devices.contains(&sc.sensors[0].id));
    assert_eq!(handle.status().connections, 1);
    handle.shutdown();
    handle.join();
}

#[test]
fn report_from_unknown_device_is_refused() {
    let handle = start(
        Scenario::bundled("single_jammer").unwrap(),
        None,
        Duration::from_secs(60),
    );
    let mut stream = TcpStream::connect(handle.addr()).unwrap();
    stream
        .set_read_timeout(Some(Duration::from_secs(5)))
        .unwrap();
    let report = Message::ChannelReport {
        device_id: "ghost".into(),
        seq: 0,
        slot: 0,
        channels: Vec::new(),
    };
    stream.write_all(&encode(&report).unwrap()).unwrap();
    let mut line = String::new();
    BufReader::new(stream).read_line(&mut line).unwrap();
    assert!(matches!(
        decode(line.as_bytes()).unwrap(),
        Message::Error {
            code: ErrorCode::UnknownDevice,
            ..
        }
    ));
}

#[test]
fn replayed_log_is_ingested() {
    let sc = Scenario::bundled("single_jammer").unwrap();
    let handle = start(sc.clone(), None, Duration::from_millis(200));
    let mut driver = SensorDriver::new(sc.sensors[0].clone());
    let lines: Vec<String> = [driver.hello(), driver.scan(&sc, &sc.initial_channels(), 0)]
        .iter()
        .map(|m| String::from_utf8(encode(m).unwrap()).unwrap())
        .collect();
    let replies = replay_lines(handle.addr(), &lines, Duration::from_millis(800)).unwrap();
    assert!(handle.status().reports_ingested >= 1);
    assert!(
        replies.iter().any(|m| matches!(m, Message::Ack { .. })),
        "{replies:?}"
    );
}

#[test]
fn second_controller_on_the_same_port_fails_to_bind() {
    let first = Controller::bind(
        "127.0.0.1:0",
        ServeOptions::new(Scenario::bundled("single_jammer").unwrap()),
    )
    .unwrap();
    let addr = first.local_addr().unwrap();
    let second = Controller::bind(
        addr,
        ServeOptions::new(Scenario::bundled("single_jammer").unwrap()),
    );
    assert!(second.is_err());
}

#[test]
fn silent_controller_keeps_running_rounds() {
    let handle = start(
        Scenario::bundled("two_ap_flat").unwrap(),
        Some(3),
        Duration::from_millis(30),
    );
    wait_until(|| handle.is_finished());
    let report = handle.join();
    assert_eq!(report.rounds, 3);
    assert!(report.assignments.is_empty());
    assert_eq!(
        report.final_channels,
        Scenario::bundled("two_ap_flat").unwrap().initial_channels()
    );
}

#[test]
fn networked_office_matches_in_process_run() {
    let rounds = 6;
    let sc = Scenario::bundled("static_office").unwrap();
    let expected = simulate(sc.clone(), rounds).unwrap();
    let handle = start(sc.clone(), Some(rounds), Duration::from_secs(20));
    let addr = handle.addr();
    let workers: Vec<_> = sc
        .sensors
        .iter()
        .map(|s| {
            let sc = sc.clone();
            let id = s.id.clone();
            thread::spawn(move || {
                run_sensor_emitter(addr, &sc, &id, rounds, Duration::from_secs(20)).unwrap()
            })
        })
        .collect();
    for w in workers {
        let summary = w.join().unwrap();
        assert_eq!(summary.reports_sent, rounds);
        assert!(summary.errors.is_empty());
    }
    wait_until(|| handle.is_finished());
    let served = handle.join();
    assert_eq!(served.final_channels, expected.final_channels);
    assert_eq!(served.assignments, expected.assignments);
    assert_eq!(served.occupancy, expected.occupancy);
}

#[test]
fn status_endpoint_reports_the_allocation() {
    let sc = Scenario::bundled("single_jammer").unwrap();
    let handle = start(sc.clone(), None, Duration::from_secs(20));
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let status_addr = listener.local_addr().unwrap();
    serve_status(listener, handle.status_cell(), handle.shutdown_flag()).unwrap();
    let addr = handle.addr();
    let workers: Vec<_> = sc
        .sensors
        .iter()
        .map(|s| {
            let sc = sc.clone();
            let id = s.id.clone();
            thread::spawn(move || {
                run_sensor_emitter(addr, &sc, &id, 2, Duration::from_secs(20)).unwrap()
            })
        })
        .collect();
    for w in workers {
        w.join().unwrap();
    }
    let status = query_status(status_addr).unwrap();
    assert_eq!(status.round, 2);
    assert_eq!(status.reports_ingested, 6);
    assert_eq!(status.ap_channels["ap-1"].index(), 1);
    assert_eq!(status.occupancy["ap-1"].len(), 13);
}
