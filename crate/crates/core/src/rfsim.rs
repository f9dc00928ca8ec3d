//! Simulated 2.4 GHz environment.
//!
//! Emitters radiate flat over their occupied band; received power follows a
//! log-distance law with optional static log-normal shadowing. Per-bin
//! contributions are summed in milliwatts on top of the noise floor.

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seed;
use crate::spectrum::{dbm_to_mw, mw_to_dbm, ChannelId, FrequencyBin, LevelDbm};

/// Bounds every simulated level is clamped to.
pub const MIN_LEVEL_DBM: f64 = -120.0;
pub const MAX_LEVEL_DBM: f64 = 0.0;

/// Closest emitter-receiver distance used by the path-loss law.
pub const MIN_DISTANCE_M: f64 = 0.1;

/// Bluetooth hop channels are 1 MHz wide starting at 2402 MHz.
pub const BT_HOP_COUNT: u8 = 79;
pub const BT_FIRST_HOP_MHZ: f64 = 2402.0;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("invalid {field}: {reason}")]
pub struct RfError {
    pub field: String,
    pub reason: String,
}

impl RfError {
    fn new(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// A position in time: a slot plus a sub-slot for repeated polls inside it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct SlotTime {
    pub slot: u64,
    pub sub: u32,
}

impl SlotTime {
    pub const fn at(slot: u64) -> Self {
        Self { slot, sub: 0 }
    }
}

fn full_hop_set() -> Vec<u8> {
    (0..BT_HOP_COUNT).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EmitterKind {
    /// 20 MHz Wi-Fi transmitter, flat over its channel.
    Wifi20 { channel: ChannelId },
    /// Frequency hopper occupying one 1 MHz hop per sub-slot.
    BluetoothHopper {
        #[serde(default = "full_hop_set")]
        hop_set: Vec<u8>,
    },
    /// Flat noise over `[start_mhz, end_mhz]`.
    WidebandNoise { start_mhz: f64, end_mhz: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Emitter {
    pub id: String,
    #[serde(flatten)]
    pub kind: EmitterKind,
    pub position: Point,
    pub tx_power_dbm: f64,
    /// First slot the emitter is on, inclusive.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub active_from_slot: Option<u64>,
    /// First slot the emitter is off again.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub active_until_slot: Option<u64>,
}

impl Emitter {
    pub fn wifi(
        id: impl Into<String>,
        channel: ChannelId,
        position: Point,
        tx_power_dbm: f64,
    ) -> Self {
        Self {
            id: id.into(),
            kind: EmitterKind::Wifi20 { channel },
            position,
            tx_power_dbm,
            active_from_slot: None,
            active_until_slot: None,
        }
    }

    pub fn is_active(&self, slot: u64) -> bool {
        self.active_from_slot.is_none_or(|from| slot >= from)
            && self.active_until_slot.is_none_or(|until| slot < until)
    }

    pub fn is_time_varying(&self) -> bool {
        matches!(self.kind, EmitterKind::BluetoothHopper { .. })
    }

    fn validate(&self, idx: usize) -> Result<(), RfError> {
        let field = |f: &str| format!("emitters[{idx}].{f}");
        if !(-30.0..=30.0).contains(&self.tx_power_dbm) {
            return Err(RfError::new(
                field("tx_power_dbm"),
                "must be within [-30, 30] dBm",
            ));
        }
        if !self.position.is_finite() {
            return Err(RfError::new(field("position"), "must be finite"));
        }
        match &self.kind {
            EmitterKind::Wifi20 { .. } => {}
            EmitterKind::BluetoothHopper { hop_set } => {
                if hop_set.is_empty() || hop_set.iter().any(|&h| h >= BT_HOP_COUNT) {
                    return Err(RfError::new(field("hop_set"), "needs hop indices in 0..79"));
                }
            }
            EmitterKind::WidebandNoise { start_mhz, end_mhz } => {
                if !(start_mhz.is_finite() && end_mhz.is_finite() && start_mhz < end_mhz) {
                    return Err(RfError::new(
                        field("start_mhz"),
                        "band must satisfy start < end",
                    ));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Propagation {
    /// Path loss at 1 m.
    pub pl0_db: f64,
    pub exponent_n: f64,
    pub shadowing_sigma_db: f64,
}

impl Default for Propagation {
    fn default() -> Self {
        Self {
            pl0_db: 40.0,
            exponent_n: 2.7,
            shadowing_sigma_db: 0.0,
        }
    }
}

impl Propagation {
    pub fn path_loss_db(&self, distance_m: f64) -> f64 {
        self.pl0_db + 10.0 * self.exponent_n * distance_m.max(MIN_DISTANCE_M).log10()
    }

    fn validate(&self) -> Result<(), RfError> {
        if !(self.pl0_db > 0.0 && self.pl0_db.is_finite()) {
            return Err(RfError::new("propagation.pl0_db", "must be positive"));
        }
        if !(1.6..=6.0).contains(&self.exponent_n) {
            return Err(RfError::new(
                "propagation.exponent_n",
                "must be within [1.6, 6]",
            ));
        }
        if !(self.shadowing_sigma_db >= 0.0 && self.shadowing_sigma_db.is_finite()) {
            return Err(RfError::new(
                "propagation.shadowing_sigma_db",
                "must be non-negative",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfScenario {
    pub emitters: Vec<Emitter>,
    pub propagation: Propagation,
    pub noise_floor_dbm: f64,
    pub rng_seed: u64,
}

impl Default for RfScenario {
    fn default() -> Self {
        Self {
            emitters: Vec::new(),
            propagation: Propagation::default(),
            noise_floor_dbm: -100.0,
            rng_seed: 0,
        }
    }
}

impl RfScenario {
    pub fn validate(&self) -> Result<(), RfError> {
        self.propagation.validate()?;
        if !(MIN_LEVEL_DBM..=MAX_LEVEL_DBM).contains(&self.noise_floor_dbm) {
            return Err(RfError::new("noise_floor_dbm", "must be within [-120, 0]"));
        }
        for (i, e) in self.emitters.iter().enumerate() {
            e.validate(i)?;
        }
        Ok(())
    }

    pub fn is_time_varying(&self) -> bool {
        self.emitters.iter().any(Emitter::is_time_varying)
    }

    /// Static shadowing term for an emitter-receiver pair.
    fn shadowing_db(&self, emitter: &Emitter, point: Point) -> f64 {
        let sigma = self.propagation.shadowing_sigma_db;
        if sigma == 0.0 {
            return 0.0;
        }
        let mut rng = seed::rng(
            self.rng_seed,
            &format!("shadow/{}", emitter.id),
            &[point.x.to_bits(), point.y.to_bits()],
        );
        Normal::new(0.0, sigma)
            .expect("sigma validated")
            .sample(&mut rng)
    }

    /// Level of `emitter` at `point` in dBm, ignoring spectral occupancy.
    pub fn received_from(&self, emitter: &Emitter, point: Point) -> f64 {
        emitter.tx_power_dbm
            - self
                .propagation
                .path_loss_db(emitter.position.distance(point))
            - self.shadowing_db(emitter, point)
    }

    fn hop_mhz(&self, emitter: &Emitter, hop_set: &[u8], at: SlotTime) -> f64 {
        let h = seed::derive(
            self.rng_seed,
            &format!("hop/{}", emitter.id),
            &[at.slot, u64::from(at.sub)],
        );
        let hop = hop_set[(h % hop_set.len() as u64) as usize];
        BT_FIRST_HOP_MHZ + f64::from(hop)
    }

    /// True when `emitter` puts energy into `bin` at time `at`.
    pub fn occupies(&self, emitter: &Emitter, bin: &FrequencyBin, at: SlotTime) -> bool {
        if !emitter.is_active(at.slot) {
            return false;
        }
        match &emitter.kind {
            EmitterKind::Wifi20 { channel } => channel.covers(bin),
            EmitterKind::BluetoothHopper { hop_set } => {
                (bin.center_mhz - self.hop_mhz(emitter, hop_set, at)).abs() <= 0.5
            }
            EmitterKind::WidebandNoise { start_mhz, end_mhz } => {
                (*start_mhz..=*end_mhz).contains(&bin.center_mhz)
            }
        }
    }

    /// Precomputes per-emitter received power at a fixed point.
    pub fn view_at(&self, point: Point) -> PointView<'_> {
        let contributions = self
            .emitters
            .iter()
            .map(|e| dbm_to_mw(self.received_from(e, point)))
            .collect();
        PointView {
            scenario: self,
            contributions,
        }
    }
}

/// Received-power evaluator bound to one receiver position.
pub struct PointView<'a> {
    scenario: &'a RfScenario,
    contributions: Vec<f64>,
}

impl PointView<'_> {
    pub fn level(&self, bin: &FrequencyBin, at: SlotTime) -> LevelDbm {
        let sc = self.scenario;
        let signal: f64 = sc
            .emitters
            .iter()
            .zip(&self.contributions)
            .filter(|(e, _)| sc.occupies(e, bin, at))
            .map(|(_, mw)| mw)
            .sum();
        let total = signal + dbm_to_mw(sc.noise_floor_dbm);
        let dbm = mw_to_dbm(total).clamp(MIN_LEVEL_DBM, MAX_LEVEL_DBM);
        LevelDbm::new(dbm).expect("clamped level is finite")
    }

    pub fn snapshot(&self, grid: &[FrequencyBin], at: SlotTime) -> Vec<LevelDbm> {
        grid.iter().map(|b| self.level(b, at)).collect()
    }
}

/// Total received power in one bin at one point.
pub fn received_power(
    scenario: &RfScenario,
    point: Point,
    bin: &FrequencyBin,
    at: SlotTime,
) -> LevelDbm {
    scenario.view_at(point).level(bin, at)
}

/// Received power over a whole grid.
pub fn snapshot(
    scenario: &RfScenario,
    point: Point,
    grid: &[FrequencyBin],
    at: SlotTime,
) -> Vec<LevelDbm> {
    scenario.view_at(point).snapshot(grid, at)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::standard_grid;
    use proptest::prelude::*;

    fn ch(i: u8) -> ChannelId {
        ChannelId::new(i).unwrap()
    }

    fn bin_at(mhz: f64) -> FrequencyBin {
        FrequencyBin {
            index: 0,
            center_mhz: mhz,
        }
    }

    fn lone(e: Emitter) -> RfScenario {
        RfScenario {
            emitters: vec![e],
            ..RfScenario::default()
        }
    }

    #[test]
    fn empty_scenario_is_floor() {
        let sc = RfScenario::default();
        let snap = snapshot(&sc, Point::new(3.0, 4.0), &standard_grid(), SlotTime::at(7));
        assert_eq!(snap.len(), 128);
        assert!(snap.iter().all(|l| l.dbm() == -100.0));
    }

    #[test]
    fn one_meter_wifi_emitter() {
        let sc = lone(Emitter::wifi("ap", ch(6), Point::new(1.0, 0.0), 20.0));
        let origin = Point::default();
        let inside = received_power(&sc, origin, &bin_at(2437.0), SlotTime::at(0)).dbm();
        // -20 dBm signal plus -100 dBm floor, summed in mW
        let expect = mw_to_dbm(dbm_to_mw(-20.0) + dbm_to_mw(-100.0));
        assert_eq!(inside, expect);
        assert!((inside + 20.0).abs() < 1e-7);
        assert_eq!(
            received_power(&sc, origin, &bin_at(2460.0), SlotTime::at(0)).dbm(),
            -100.0
        );
    }

    #[test]
    fn snapshot_gate_matches_channel_span() {
        let sc = lone(Emitter::wifi("ap", ch(6), Point::new(5.0, 0.0), 10.0));
        let grid = standard_grid();
        let snap = snapshot(&sc, Point::default(), &grid, SlotTime::at(0));
        for (b, l) in grid.iter().zip(&snap) {
            let inside = (2427.0..=2447.0).contains(&b.center_mhz);
            assert_eq!(l.dbm() > -100.0, inside, "bin {}", b.index);
        }
    }

    #[test]
    fn doubling_adds_three_db() {
        let e = Emitter::wifi("a", ch(6), Point::new(2.0, 0.0), 0.0);
        let mut e2 = e.clone();
        e2.id = "b".into();
        let one = RfScenario {
            noise_floor_dbm: -120.0,
            ..lone(e.clone())
        };
        let two = RfScenario {
            emitters: vec![e, e2],
            ..one.clone()
        };
        let b = bin_at(2437.0);
        let a1 = dbm_to_mw(received_power(&one, Point::default(), &b, SlotTime::at(0)).dbm());
        let a2 = dbm_to_mw(received_power(&two, Point::default(), &b, SlotTime::at(0)).dbm());
        let floor = dbm_to_mw(-120.0);
        let gain = mw_to_dbm((a2 - floor) / (a1 - floor));
        assert!((gain - 10.0 * 2f64.log10()).abs() < 1e-9);
    }

    #[test]
    fn distance_clamps_and_levels_clamp() {
        let p = Propagation::default();
        assert_eq!(p.path_loss_db(0.0), p.path_loss_db(0.1));
        let sc = lone(Emitter::wifi("hot", ch(1), Point::default(), 30.0));
        let l = received_power(&sc, Point::default(), &bin_at(2412.0), SlotTime::at(0));
        assert_eq!(l.dbm(), 0.0);
    }

    #[test]
    fn activity_window() {
        let mut e = Emitter::wifi("j", ch(6), Point::new(1.0, 0.0), 20.0);
        e.active_from_slot = Some(10);
        e.active_until_slot = Some(20);
        assert!(!e.is_active(9));
        assert!(e.is_active(10));
        assert!(!e.is_active(20));
    }

    #[test]
    fn validation_names_field() {
        let mut sc = lone(Emitter::wifi("x", ch(1), Point::default(), 40.0));
        assert_eq!(sc.validate().unwrap_err().field, "emitters[0].tx_power_dbm");
        sc.emitters.clear();
        sc.propagation.exponent_n = 7.0;
        assert_eq!(sc.validate().unwrap_err().field, "propagation.exponent_n");
    }

    #[test]
    fn shadowing_is_static_and_seeded() {
        let mut sc = lone(Emitter::wifi("a", ch(3), Point::new(4.0, 0.0), 0.0));
        sc.propagation.shadowing_sigma_db = 6.0;
        let p = Point::new(0.5, 0.5);
        let a = sc.received_from(&sc.emitters[0], p);
        assert_eq!(a, sc.received_from(&sc.emitters[0], p));
        sc.rng_seed = 99;
        assert_ne!(a, sc.received_from(&sc.emitters[0], p));
    }

    #[test]
    fn bluetooth_visits_every_hop() {
        let bt = Emitter {
            id: "bt".into(),
            kind: EmitterKind::BluetoothHopper {
                hop_set: full_hop_set(),
            },
            position: Point::new(1.0, 0.0),
            tx_power_dbm: 0.0,
            active_from_slot: None,
            active_until_slot: None,
        };
        let sc = lone(bt);
        let EmitterKind::BluetoothHopper { hop_set } = &sc.emitters[0].kind else {
            unreachable!()
        };
        let mut seen = [0u32; BT_HOP_COUNT as usize];
        for slot in 0..(79 * 50) {
            let mhz = sc.hop_mhz(&sc.emitters[0], hop_set, SlotTime::at(slot));
            seen[(mhz - BT_FIRST_HOP_MHZ) as usize] += 1;
        }
        assert!(seen.iter().all(|&n| n > 0));
        // exactly one hop occupied per slot: bins lit in one snapshot lie within 1 MHz
        let grid = standard_grid();
        for slot in 0..50 {
            let snap = snapshot(&sc, Point::default(), &grid, SlotTime::at(slot));
            let lit: Vec<f64> = grid
                .iter()
                .zip(&snap)
                .filter(|(_, l)| l.dbm() > -100.0)
                .map(|(b, _)| b.center_mhz)
                .collect();
            assert!(!lit.is_empty() && lit.len() <= 2);
            assert!(lit.last().unwrap() - lit[0] <= 1.0);
        }
    }

    proptest! {
        #[test]
        fn farther_is_never_louder(ch_i in 1u8..=13, d in 0.0f64..50.0, extra in 0.0f64..50.0, tx in -30.0f64..30.0, bin in 0usize..128) {
            let grid = standard_grid();
            let near = lone(Emitter::wifi("e", ch(ch_i), Point::new(d, 0.0), tx));
            let far = lone(Emitter::wifi("e", ch(ch_i), Point::new(d + extra, 0.0), tx));
            let a = received_power(&near, Point::default(), &grid[bin], SlotTime::at(0));
            let b = received_power(&far, Point::default(), &grid[bin], SlotTime::at(0));
            prop_assert!(b.dbm() <= a.dbm());
        }

        #[test]
        fn adding_an_emitter_never_lowers(
            base in prop::collection::vec((1u8..=13, 0.0f64..30.0, -30.0f64..30.0), 0..4),
            extra in (1u8..=13, 0.0f64..30.0, -30.0f64..30.0),
            slot in 0u64..1000,
        ) {
            let mk = |v: &[(u8, f64, f64)]| RfScenario {
                emitters: v.iter().enumerate().map(|(i, &(c, x, p))| Emitter::wifi(format!("e{i}"), ch(c), Point::new(x, 1.0), p)).collect(),
                ..RfScenario::default()
            };
            let mut more = base.clone();
            more.push(extra);
            let grid = standard_grid();
            let a = snapshot(&mk(&base), Point::default(), &grid, SlotTime::at(slot));
            let b = snapshot(&mk(&more), Point::default(), &grid, SlotTime::at(slot));
            for (x, y) in a.iter().zip(&b) {
                prop_assert!(y.dbm() >= x.dbm());
            }
        }

        #[test]
        fn snapshot_is_deterministic(seed in any::<u64>(), slot in any::<u64>(), sub in any::<u32>()) {
            let sc = RfScenario {
                emitters: vec![Emitter {
                    id: "bt".into(),
                    kind: EmitterKind::BluetoothHopper { hop_set: full_hop_set() },
                    position: Point::new(2.0, 2.0),
                    tx_power_dbm: 4.0,
                    active_from_slot: None,
                    active_until_slot: None,
                }],
                rng_seed: seed,
                propagation: Propagation { shadowing_sigma_db: 4.0, ..Propagation::default() },
                ..RfScenario::default()
            };
            let at = SlotTime { slot, sub };
            let grid = standard_grid();
            let a = snapshot(&sc, Point::new(0.3, 0.7), &grid, at);
            let b = snapshot(&sc, Point::new(0.3, 0.7), &grid, at);
            prop_assert_eq!(
                a.iter().map(|l| l.dbm().to_bits()).collect::<Vec<_>>(),
                b.iter().map(|l| l.dbm().to_bits()).collect::<Vec<_>>()
            );
        }
    }
}
