//! Scenario files: the simulated environment plus access-point and sensor
//! placements, in TOML.
//!
//! ```toml
//! format_version = 1
//! name = "single_jammer"
//! seed = 42
//! noise_floor_dbm = -100.0
//!
//! [propagation]
//! pl0_db = 40.0
//! exponent_n = 2.7
//! shadowing_sigma_db = 0.0
//!
//! [[emitters]]
//! id = "jammer"
//! kind = "wifi20"
//! channel = 6
//! position = { x = 5.0, y = 0.0 }
//! tx_power_dbm = 20.0
//!
//! [[access_points]]
//! id = "ap-1"
//! position = { x = 0.0, y = 0.0 }
//! channel = 6
//!
//! [[sensors]]
//! id = "rssi-1"
//! kind = "rssi"
//! position = { x = 1.0, y = 0.0 }
//!
//! [allocator]
//! hysteresis_db = 3.0
//! ```

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::allocator::AllocatorConfig;
use crate::protocol::{DeviceKind, FORMAT_VERSION};
use crate::rfsim::{Emitter, Point, Propagation, RfScenario};
use crate::sensors::{Sensor, SensorKind};
use crate::spectrum::ChannelId;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read scenario {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed scenario: {0}")]
    Parse(String),
    #[error("invalid scenario field `{field}`: {reason}")]
    Invalid { field: String, reason: String },
}

fn invalid(field: impl Into<String>, reason: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid {
        field: field.into(),
        reason: reason.into(),
    }
}

fn default_floor() -> f64 {
    -100.0
}

fn default_ap_power() -> f64 {
    20.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccessPoint {
    pub id: String,
    pub position: Point,
    /// Channel at start-up.
    pub channel: ChannelId,
    #[serde(default = "default_ap_power")]
    pub tx_power_dbm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub format_version: u32,
    pub name: String,
    pub seed: u64,
    #[serde(default = "default_floor")]
    pub noise_floor_dbm: f64,
    #[serde(default)]
    pub propagation: Propagation,
    #[serde(default)]
    pub emitters: Vec<Emitter>,
    pub access_points: Vec<AccessPoint>,
    #[serde(default)]
    pub sensors: Vec<Sensor>,
    #[serde(default)]
    pub allocator: AllocatorConfig,
}

const BUNDLED: &[(&str, &str)] = &[
    (
        "single_jammer",
        include_str!("../scenarios/single_jammer.toml"),
    ),
    ("two_ap_flat", include_str!("../scenarios/two_ap_flat.toml")),
    (
        "static_office",
        include_str!("../scenarios/static_office.toml"),
    ),
    (
        "jammer_toggle",
        include_str!("../scenarios/jammer_toggle.toml"),
    ),
];

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        let sc: Scenario = toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    /// Loads a scenario file, or a bundled scenario when `spec` names one
    /// and no such file exists.
    pub fn load(spec: &str) -> Result<Self, ScenarioError> {
        let path = Path::new(spec);
        if !path.exists() {
            if let Some(sc) = Self::bundled(spec) {
                return Ok(sc);
            }
        }
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: spec.to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn bundled(name: &str) -> Option<Self> {
        BUNDLED
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, text)| Self::from_toml(text).expect("bundled scenarios are valid"))
    }

    pub fn bundled_names() -> impl Iterator<Item = &'static str> {
        BUNDLED.iter().map(|(n, _)| *n)
    }

    pub fn with_seed(mut self, seed: Option<u64>) -> Self {
        if let Some(s) = seed {
            self.seed = s;
        }
        self
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.format_version != FORMAT_VERSION {
            return Err(invalid(
                "format_version",
                format!("expected {FORMAT_VERSION}, got {}", self.format_version),
            ));
        }
        self.rf_base()
            .validate()
            .map_err(|e| invalid(e.field, e.reason))?;
        if self.access_points.is_empty() {
            return Err(invalid(
                "access_points",
                "at least one access point is required",
            ));
        }
        let mut ids = BTreeSet::new();
        let all_ids = self
            .emitters
            .iter()
            .map(|e| ("emitters", &e.id))
            .chain(self.access_points.iter().map(|a| ("access_points", &a.id)))
            .chain(self.sensors.iter().map(|s| ("sensors", &s.id)));
        for (section, id) in all_ids {
            if id.is_empty() || !ids.insert(id.clone()) {
                return Err(invalid(
                    format!("{section}.id"),
                    format!("`{id}` is empty or duplicated"),
                ));
            }
        }
        let ap_ids: BTreeSet<&str> = self.access_points.iter().map(|a| a.id.as_str()).collect();
        for (i, ap) in self.access_points.iter().enumerate() {
            if !(-30.0..=30.0).contains(&ap.tx_power_dbm) {
                return Err(invalid(
                    format!("access_points[{i}].tx_power_dbm"),
                    "must be within [-30, 30] dBm",
                ));
            }
            if !(ap.position.x.is_finite() && ap.position.y.is_finite()) {
                return Err(invalid(
                    format!("access_points[{i}].position"),
                    "must be finite",
                ));
            }
        }
        for (i, s) in self.sensors.iter().enumerate() {
            let field = |f: &str| format!("sensors[{i}].{f}");
            if let Some(ap) = s.bind.iter().find(|a| !ap_ids.contains(a.as_str())) {
                return Err(invalid(
                    field("bind"),
                    format!("unknown access point `{ap}`"),
                ));
            }
            match &s.kind {
                SensorKind::Rssi(p) => {
                    if p.chip.min_dbm.partial_cmp(&p.chip.max_dbm) != Some(Ordering::Less) {
                        return Err(invalid(field("chip"), "min_dbm must be below max_dbm"));
                    }
                    if p.samples_per_point == 0 {
                        return Err(invalid(field("samples_per_point"), "must be at least 1"));
                    }
                }
                SensorKind::Binary(p) => {
                    if p.l_min_dbm.partial_cmp(&p.threshold_dbm) != Some(Ordering::Less) {
                        return Err(invalid(field("l_min_dbm"), "must be below threshold_dbm"));
                    }
                    if p.n_samples == 0 {
                        return Err(invalid(field("n_samples"), "must be at least 1"));
                    }
                    if !(p.jitter_sigma_db >= 0.0 && p.jitter_sigma_db.is_finite()) {
                        return Err(invalid(field("jitter_sigma_db"), "must be non-negative"));
                    }
                }
                SensorKind::WifiCard(p) => {
                    if !p.detection_floor_dbm.is_finite() {
                        return Err(invalid(field("detection_floor_dbm"), "must be finite"));
                    }
                }
            }
        }
        self.allocator_config()
            .validate()
            .map_err(|e| invalid("allocator", e.to_string()))?;
        Ok(())
    }

    fn rf_base(&self) -> RfScenario {
        RfScenario {
            emitters: self.emitters.clone(),
            propagation: self.propagation,
            noise_floor_dbm: self.noise_floor_dbm,
            rng_seed: self.seed,
        }
    }

    /// Allocator settings with sensor bindings and the card noise floor
    /// filled in from the placements.
    pub fn allocator_config(&self) -> AllocatorConfig {
        let mut cfg = self.allocator.clone();
        cfg.noise_floor_dbm = self.noise_floor_dbm;
        let mut binding: BTreeMap<String, BTreeSet<String>> = cfg.sensor_binding;
        for s in &self.sensors {
            for ap in &s.bind {
                binding.entry(ap.clone()).or_default().insert(s.id.clone());
            }
        }
        cfg.sensor_binding = binding;
        cfg
    }

    pub fn initial_channels(&self) -> BTreeMap<String, ChannelId> {
        self.access_points
            .iter()
            .map(|a| (a.id.clone(), a.channel))
            .collect()
    }

    pub fn sensor(&self, id: &str) -> Option<&Sensor> {
        self.sensors.iter().find(|s| s.id == id)
    }

    /// The RF environment `sensor` observes: every scenario emitter plus
    /// the access points it is not bound to, on their current channels.
    /// Bound APs are silent while their sensors scan.
    pub fn rf_for_sensor(
        &self,
        sensor: &Sensor,
        ap_channels: &BTreeMap<String, ChannelId>,
    ) -> RfScenario {
        let mut rf = self.rf_base();
        for ap in &self.access_points {
            let bound = sensor.bind.is_empty() || sensor.bind.contains(&ap.id);
            if bound {
                continue;
            }
            let channel = ap_channels.get(&ap.id).copied().unwrap_or(ap.channel);
            rf.emitters.push(Emitter::wifi(
                ap.id.clone(),
                channel,
                ap.position,
                ap.tx_power_dbm,
            ));
        }
        rf
    }
}

pub fn device_kind(sensor: &Sensor) -> DeviceKind {
    match sensor.kind {
        SensorKind::Rssi(_) => DeviceKind::RssiSensor,
        SensorKind::Binary(_) => DeviceKind::BinarySensor,
        SensorKind::WifiCard(_) => DeviceKind::WifiCard,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rfsim::EmitterKind;

    #[test]
    fn bundled_scenarios_parse_and_round_trip() {
        for name in Scenario::bundled_names() {
            let sc = Scenario::bundled(name).unwrap();
            assert_eq!(sc.name, name);
            let again = Scenario::from_toml(&sc.to_toml()).unwrap();
            assert_eq!(again, sc, "{name}");
        }
    }

    #[test]
    fn errors_name_the_field() {
        let base = Scenario::bundled("single_jammer").unwrap();
        let mut sc = base.clone();
        sc.emitters[0].tx_power_dbm = 45.0;
        let err = Scenario::from_toml(&sc.to_toml()).unwrap_err().to_string();
        assert!(err.contains("emitters[0].tx_power_dbm"), "{err}");

        let mut sc = base.clone();
        sc.sensors[0].bind = vec!["nope".into()];
        let err = sc.validate().unwrap_err().to_string();
        assert!(err.contains("sensors[0].bind"), "{err}");

        let mut sc = base.clone();
        sc.format_version = 2;
        assert!(sc
            .validate()
            .unwrap_err()
            .to_string()
            .contains("format_version"));

        let text = base
            .to_toml()
            .replace("exponent_n = 2.7", "exponent_n = \"steep\"");
        let err = Scenario::from_toml(&text).unwrap_err().to_string();
        assert!(err.contains("exponent_n"), "{err}");
    }

    #[test]
    fn bound_aps_are_silent_for_their_sensors() {
        let mut sc = Scenario::bundled("two_ap_flat").unwrap();
        let mut s = sc.sensors[0].clone();
        s.bind = vec![sc.access_points[0].id.clone()];
        sc.sensors[0] = s.clone();
        let rf = sc.rf_for_sensor(&s, &sc.initial_channels());
        let ids: Vec<&str> = rf.emitters.iter().map(|e| e.id.as_str()).collect();
        assert_eq!(ids, vec![sc.access_points[1].id.as_str()]);
        assert!(matches!(rf.emitters[0].kind, EmitterKind::Wifi20 { .. }));
    }

    #[test]
    fn seed_override() {
        let sc = Scenario::bundled("single_jammer").unwrap();
        assert_eq!(sc.clone().with_seed(Some(7)).seed, 7);
        assert_eq!(sc.clone().with_seed(None).seed, sc.seed);
    }
}
