//! In-process harness wiring the RF model, the simulated sensors and the
//! allocator together, plus the [`RunReport`] it produces.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::allocator::{AllocError, AllocationState, IngestError, RoundOutcome};
use crate::protocol::{decode, encode, hello_for, Message, ProtocolError};
use crate::scenario::{device_kind, Scenario};
use crate::sensors::{make_channel_report, ReportMeta, Sensor};
use crate::spectrum::ChannelId;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Alloc(#[from] AllocError),
    #[error("protocol: {0}")]
    Protocol(#[from] ProtocolError),
    #[error("controller rejected message: {0}")]
    Ingest(#[from] IngestError),
    #[error("report output: {0}")]
    Output(String),
}

/// Drives one simulated sensor: scans the scenario and frames reports.
#[derive(Debug, Clone)]
pub struct SensorDriver {
    sensor: Sensor,
    seq: u64,
}

impl SensorDriver {
    pub fn new(sensor: Sensor) -> Self {
        Self { sensor, seq: 0 }
    }

    pub fn id(&self) -> &str {
        &self.sensor.id
    }

    pub fn hello(&self) -> Message {
        hello_for(
            &self.sensor.id,
            device_kind(&self.sensor),
            self.sensor.weight,
        )
    }

    /// Scans at the first slot of `round`'s window and returns the framed
    /// report.
    pub fn scan(
        &mut self,
        scenario: &Scenario,
        ap_channels: &BTreeMap<String, ChannelId>,
        round: u64,
    ) -> Message {
        let slot = round * scenario.allocator.collection_window_slots;
        let rf = scenario.rf_for_sensor(&self.sensor, ap_channels);
        let output = self.sensor.scan(&rf, slot);
        self.seq += 1;
        let meta = ReportMeta {
            device_id: self.sensor.id.clone(),
            weight: self.sensor.weight,
            seq: self.seq,
            slot,
        };
        let channels: Vec<ChannelId> = ChannelId::all().collect();
        Message::from(&make_channel_report(&output, meta, &channels))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentRecord {
    pub round: u64,
    pub ap_id: String,
    pub from: ChannelId,
    pub to: ChannelId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyRecord {
    pub round: u64,
    pub ap_id: String,
    pub channel: ChannelId,
    pub level_dbm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterferenceRecord {
    pub round: u64,
    pub level_dbm: Option<f64>,
}

/// Outcome of a run: what was assigned when, where every AP ended up, the
/// occupancy each AP saw per round, and the aggregate interference on the
/// assigned channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: String,
    pub seed: u64,
    pub rounds: u64,
    pub assignments: Vec<AssignmentRecord>,
    pub final_channels: BTreeMap<String, ChannelId>,
    pub occupancy: Vec<OccupancyRecord>,
    pub interference: Vec<InterferenceRecord>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct CsvRow {
    section: String,
    round: Option<u64>,
    ap_id: Option<String>,
    channel: Option<u8>,
    prev_channel: Option<u8>,
    level_dbm: Option<f64>,
    seed: Option<u64>,
    name: Option<String>,
}

fn channel_field(v: Option<u8>) -> Result<ChannelId, SimError> {
    v.and_then(|c| ChannelId::new(c).ok())
        .ok_or_else(|| SimError::Output("missing or invalid channel".into()))
}

impl RunReport {
    pub fn new(scenario: &Scenario, initial: BTreeMap<String, ChannelId>) -> Self {
        Self {
            scenario: scenario.name.clone(),
            seed: scenario.seed,
            rounds: 0,
            assignments: Vec::new(),
            final_channels: initial,
            occupancy: Vec::new(),
            interference: Vec::new(),
        }
    }

    pub fn record(&mut self, outcome: &RoundOutcome) {
        self.rounds += 1;
        for a in &outcome.assignments {
            self.assignments.push(AssignmentRecord {
                round: outcome.round,
                ap_id: a.ap_id.clone(),
                from: a.from,
                to: a.to,
            });
            self.final_channels.insert(a.ap_id.clone(), a.to);
        }
        for (ap, row) in &outcome.occupancy {
            for (&channel, level) in row {
                self.occupancy.push(OccupancyRecord {
                    round: outcome.round,
                    ap_id: ap.clone(),
                    channel,
                    level_dbm: level.dbm(),
                });
            }
        }
        self.interference.push(InterferenceRecord {
            round: outcome.round,
            level_dbm: outcome.interference_dbm,
        });
    }

    /// Assignments issued in rounds `>= round`.
    pub fn assignments_from(&self, round: u64) -> usize {
        self.assignments.iter().filter(|a| a.round >= round).count()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, SimError> {
        serde_json::from_str(text).map_err(|e| SimError::Output(e.to_string()))
    }

    /// Long-format CSV, one row per record, tagged by `section`.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut rows = vec![CsvRow {
            section: "meta".into(),
            round: Some(self.rounds),
            seed: Some(self.seed),
            name: Some(self.scenario.clone()),
            ..CsvRow::default()
        }];
        rows.extend(self.assignments.iter().map(|a| CsvRow {
            section: "assignment".into(),
            round: Some(a.round),
            ap_id: Some(a.ap_id.clone()),
            channel: Some(a.to.index()),
            prev_channel: Some(a.from.index()),
            ..CsvRow::default()
        }));
        rows.extend(self.final_channels.iter().map(|(ap, ch)| CsvRow {
            section: "final".into(),
            ap_id: Some(ap.clone()),
            channel: Some(ch.index()),
            ..CsvRow::default()
        }));
        rows.extend(self.occupancy.iter().map(|o| CsvRow {
            section: "occupancy".into(),
            round: Some(o.round),
            ap_id: Some(o.ap_id.clone()),
            channel: Some(o.channel.index()),
            level_dbm: Some(o.level_dbm),
            ..CsvRow::default()
        }));
        rows.extend(self.interference.iter().map(|i| CsvRow {
            section: "interference".into(),
            round: Some(i.round),
            level_dbm: i.level_dbm,
            ..CsvRow::default()
        }));
        for row in rows {
            w.serialize(row).expect("in-memory csv");
        }
        String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8")
    }

    pub fn from_csv(text: &str) -> Result<Self, SimError> {
        let mut report = RunReport {
            scenario: String::new(),
            seed: 0,
            rounds: 0,
            assignments: Vec::new(),
            final_channels: BTreeMap::new(),
            occupancy: Vec::new(),
            interference: Vec::new(),
        };
        let missing = |f: &str| SimError::Output(format!("missing {f}"));
        let mut r = csv::Reader::from_reader(text.as_bytes());
        for row in r.deserialize::<CsvRow>() {
            let row = row.map_err(|e| SimError::Output(e.to_string()))?;
            match row.section.as_str() {
                "meta" => {
                    report.rounds = row.round.ok_or_else(|| missing("rounds"))?;
                    report.seed = row.seed.ok_or_else(|| missing("seed"))?;
                    report.scenario = row.name.unwrap_or_default();
                }
                "assignment" => report.assignments.push(AssignmentRecord {
                    round: row.round.ok_or_else(|| missing("round"))?,
                    ap_id: row.ap_id.ok_or_else(|| missing("ap_id"))?,
                    from: channel_field(row.prev_channel)?,
                    to: channel_field(row.channel)?,
                }),
                "final" => {
                    let ap = row.ap_id.ok_or_else(|| missing("ap_id"))?;
                    report
                        .final_channels
                        .insert(ap, channel_field(row.channel)?);
                }
                "occupancy" => report.occupancy.push(OccupancyRecord {
                    round: row.round.ok_or_else(|| missing("round"))?,
                    ap_id: row.ap_id.ok_or_else(|| missing("ap_id"))?,
                    channel: channel_field(row.channel)?,
                    level_dbm: row.level_dbm.ok_or_else(|| missing("level_dbm"))?,
                }),
                "interference" => report.interference.push(InterferenceRecord {
                    round: row.round.ok_or_else(|| missing("round"))?,
                    level_dbm: row.level_dbm,
                }),
                other => return Err(SimError::Output(format!("unknown section `{other}`"))),
            }
        }
        Ok(report)
    }

    /// Short human-readable summary, levels to two decimals.
    pub fn summary(&self) -> String {
        let mut out = format!(
            "scenario {} (seed {}), {} rounds, {} assignments\n",
            self.scenario,
            self.seed,
            self.rounds,
            self.assignments.len()
        );
        for (ap, ch) in &self.final_channels {
            out.push_str(&format!("  {ap}: channel {ch}\n"));
        }
        if let Some(level) = self.interference.last().and_then(|i| i.level_dbm) {
            out.push_str(&format!("  aggregate interference: {level:.2} dBm\n"));
        }
        out
    }
}

/// Round-by-round in-process simulation. Every message passes through the
/// wire encoding so results match a networked run bit for bit.
pub struct Simulation {
    scenario: Scenario,
    state: AllocationState,
    drivers: Vec<SensorDriver>,
    report: RunReport,
}

fn loopback(msg: &Message) -> Result<Message, SimError> {
    Ok(decode(&encode(msg)?)?)
}

impl Simulation {
    pub fn new(scenario: Scenario) -> Result<Self, SimError> {
        let mut state = AllocationState::new(scenario.allocator_config())?;
        for ap in &scenario.access_points {
            state.register_ap(ap.id.clone(), ap.channel);
        }
        let drivers: Vec<SensorDriver> = scenario
            .sensors
            .iter()
            .cloned()
            .map(SensorDriver::new)
            .collect();
        for d in &drivers {
            state.ingest(&loopback(&d.hello())?)?;
        }
        let report = RunReport::new(&scenario, scenario.initial_channels());
        Ok(Self {
            scenario,
            state,
            drivers,
            report,
        })
    }

    pub fn state(&self) -> &AllocationState {
        &self.state
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    /// Collects one window of reports and runs the allocation round.
    pub fn step(&mut self) -> Result<RoundOutcome, SimError> {
        let round = self.state.round();
        let channels = self.state.ap_channels().clone();
        for d in &mut self.drivers {
            let msg = loopback(&d.scan(&self.scenario, &channels, round))?;
            self.state.ingest(&msg)?;
        }
        let outcome = self.state.allocate_round();
        self.report.record(&outcome);
        Ok(outcome)
    }

    pub fn run(mut self, rounds: u64) -> Result<RunReport, SimError> {
        for _ in 0..rounds {
            self.step()?;
        }
        Ok(self.report)
    }

    pub fn report(&self) -> &RunReport {
        &self.report
    }
}

/// Runs `rounds` allocation rounds of `scenario` in-process.
pub fn simulate(scenario: Scenario, rounds: u64) -> Result<RunReport, SimError> {
    Simulation::new(scenario)?.run(rounds)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_rounds_gives_empty_log() {
        let r = simulate(Scenario::bundled("single_jammer").unwrap(), 0).unwrap();
        assert!(r.assignments.is_empty());
        assert_eq!(r.rounds, 0);
        assert_eq!(r.final_channels["ap-1"], ChannelId::new(6).unwrap());
    }

    #[test]
    fn csv_and_json_carry_the_same_numbers() {
        let r = simulate(Scenario::bundled("static_office").unwrap(), 4).unwrap();
        let back = RunReport::from_csv(&r.to_csv()).unwrap();
        assert_eq!(back.occupancy, r.occupancy);
        assert_eq!(back.interference, r.interference);
        assert_eq!(back, r);
        assert_eq!(RunReport::from_json(&r.to_json()).unwrap(), r);
    }

    #[test]
    fn drivers_number_reports() {
        let sc = Scenario::bundled("single_jammer").unwrap();
        let mut d = SensorDriver::new(sc.sensors[0].clone());
        let ch = sc.initial_channels();
        assert_eq!(d.scan(&sc, &ch, 0).report_key(), Some(("rssi-1", 1)));
        assert_eq!(d.scan(&sc, &ch, 1).report_key(), Some(("rssi-1", 2)));
    }
}
