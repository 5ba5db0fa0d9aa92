//! Hospital records and run configuration turned into a solvable scenario:
//! distance classes, flights per day and per-epoch demand rates.

use std::collections::BTreeMap;
use std::io::Read;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::demand::{default_arrival_shape, DemandSchedule, DEFAULT_TRUNCATION_EPS};
use crate::error::{Error, Result};
use crate::mdp::{ModelConfig, State};

pub const EARTH_RADIUS_KM: f64 = 6371.0;
const MINUTES_PER_DAY: f64 = 24.0 * 60.0;

/// Great-circle distance between two points given in degrees.
pub fn haversine_km(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    let (p1, p2) = (lat1.to_radians(), lat2.to_radians());
    let dp = (lat2 - lat1).to_radians();
    let dl = (lon2 - lon1).to_radians();
    let h = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DemandClass {
    #[serde(rename = "1")]
    One,
    #[serde(rename = "2")]
    Two,
    /// Out of flight range; excluded from demand.
    #[serde(rename = "NA")]
    Unreachable,
}

impl DemandClass {
    pub fn label(&self) -> &'static str {
        match self {
            DemandClass::One => "1",
            DemandClass::Two => "2",
            DemandClass::Unreachable => "NA",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "1" => Some(DemandClass::One),
            "2" => Some(DemandClass::Two),
            "NA" | "na" => Some(DemandClass::Unreachable),
            _ => None,
        }
    }
}

/// Upper distance bounds of the demand classes. Every band but the last is
/// half-open `[lo, hi)`; the last is closed `[lo, hi]`. `None` is unbounded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DistanceBands(pub Vec<Option<f64>>);

impl Default for DistanceBands {
    fn default() -> Self {
        DistanceBands(vec![Some(40.0), Some(80.0)])
    }
}

impl DistanceBands {
    /// Everything reachable, all demand in class 1.
    pub fn single_class() -> Self {
        DistanceBands(vec![None])
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.0.len();
        if n == 0 || n > 2 {
            return Err(Error::invalid(format!(
                "expected 1 or 2 distance bands, got {n}"
            )));
        }
        let mut prev = 0.0;
        for (i, b) in self.0.iter().enumerate() {
            match b {
                Some(v) if !(v.is_finite() && *v > prev) => {
                    return Err(Error::invalid(
                        "distance band bounds must be positive and increasing",
                    ));
                }
                Some(v) => prev = *v,
                None if i + 1 != n => {
                    return Err(Error::invalid(
                        "only the last distance band may be unbounded",
                    ));
                }
                None => {}
            }
        }
        Ok(())
    }

    pub fn classify(&self, distance_km: f64) -> DemandClass {
        let last = self.0.len() - 1;
        for (i, bound) in self.0.iter().enumerate() {
            let inside = match bound {
                None => true,
                Some(b) if i == last => distance_km <= *b,
                Some(b) => distance_km < *b,
            };
            if inside {
                return if i == 0 {
                    DemandClass::One
                } else {
                    DemandClass::Two
                };
            }
        }
        DemandClass::Unreachable
    }
}

pub fn classify(distance_km: f64, bands: &DistanceBands) -> DemandClass {
    bands.classify(distance_km)
}

/// Blood units needed per day by `population` people.
pub fn units_per_day(population: f64, blood_need_fraction: f64) -> f64 {
    population * blood_need_fraction / 365.0
}

/// Rounded-up flights per day needed to carry the daily blood units.
pub fn flights_per_day(population: f64, blood_need_fraction: f64, units_per_flight: f64) -> u64 {
    let flights = units_per_day(population, blood_need_fraction) / units_per_flight;
    // absorb representation error on exact integers before rounding up
    (flights - 1e-9 * flights.max(1.0)).ceil().max(0.0) as u64
}

fn default_epoch_minutes() -> f64 {
    90.0
}
fn default_blood_need_fraction() -> f64 {
    0.02
}
fn default_units_per_flight() -> f64 {
    2.0
}
fn default_truncation_eps() -> f64 {
    DEFAULT_TRUNCATION_EPS
}
fn default_rho() -> f64 {
    1.0
}
fn default_rho21() -> f64 {
    0.5
}

/// Scenario configuration document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub fleet_size: usize,
    /// `N`. Derived from `epoch_minutes` when absent.
    #[serde(default)]
    pub horizon_epochs: Option<usize>,
    #[serde(default = "default_epoch_minutes")]
    pub epoch_minutes: f64,
    #[serde(default = "default_rho")]
    pub rho11: f64,
    #[serde(default = "default_rho21")]
    pub rho21: f64,
    #[serde(default = "default_rho")]
    pub rho22: f64,
    #[serde(default)]
    pub bands: DistanceBands,
    #[serde(default = "default_blood_need_fraction")]
    pub blood_need_fraction: f64,
    #[serde(default = "default_units_per_flight")]
    pub units_per_flight: f64,
    /// `N - 1` weights summing to 1; the built-in daily curve when absent.
    #[serde(default)]
    pub arrival_shape: Option<Vec<f64>>,
    #[serde(default = "default_truncation_eps")]
    pub truncation_eps: f64,
    /// `s_1`; all batteries fully charged when absent.
    #[serde(default)]
    pub initial_state: Option<[usize; 2]>,
    #[serde(default)]
    pub station_lat: Option<f64>,
    #[serde(default)]
    pub station_lon: Option<f64>,
}

impl ScenarioConfig {
    pub fn new(fleet_size: usize) -> Self {
        ScenarioConfig {
            fleet_size,
            horizon_epochs: None,
            epoch_minutes: default_epoch_minutes(),
            rho11: 1.0,
            rho21: 0.5,
            rho22: 1.0,
            bands: DistanceBands::default(),
            blood_need_fraction: default_blood_need_fraction(),
            units_per_flight: default_units_per_flight(),
            arrival_shape: None,
            truncation_eps: DEFAULT_TRUNCATION_EPS,
            initial_state: None,
            station_lat: None,
            station_lon: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// `N = day / epoch + 1` unless set explicitly.
    pub fn horizon(&self) -> Result<usize> {
        if let Some(n) = self.horizon_epochs {
            if n < 2 {
                return Err(Error::invalid(format!(
                    "horizon_epochs must be at least 2, got {n}"
                )));
            }
            return Ok(n);
        }
        if !(self.epoch_minutes.is_finite() && self.epoch_minutes > 0.0) {
            return Err(Error::invalid("epoch_minutes must be positive"));
        }
        let per_day = MINUTES_PER_DAY / self.epoch_minutes;
        if (per_day - per_day.round()).abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "epoch_minutes {} does not divide a day; set horizon_epochs explicitly",
                self.epoch_minutes
            )));
        }
        Ok(per_day.round() as usize + 1)
    }

    pub fn model(&self) -> Result<ModelConfig> {
        ModelConfig::new(
            self.fleet_size,
            self.horizon()?,
            self.rho11,
            self.rho21,
            self.rho22,
        )
    }

    fn validate(&self) -> Result<()> {
        self.model()?;
        self.bands.validate()?;
        if !(self.blood_need_fraction.is_finite() && self.blood_need_fraction >= 0.0) {
            return Err(Error::invalid("blood_need_fraction must be nonnegative"));
        }
        if !(self.units_per_flight.is_finite() && self.units_per_flight > 0.0) {
            return Err(Error::invalid("units_per_flight must be positive"));
        }
        if let Some([s1, s2]) = self.initial_state {
            State::new(s1, s2).check(self.fleet_size)?;
        }
        Ok(())
    }

    fn shape(&self) -> Result<Vec<f64>> {
        let epochs = self.horizon()? - 1;
        match &self.arrival_shape {
            Some(shape) if shape.len() != epochs => Err(Error::invalid(format!(
                "arrival_shape has {} weights, expected {epochs}",
                shape.len()
            ))),
            Some(shape) => Ok(shape.clone()),
            None => Ok(default_arrival_shape(epochs, self.epoch_minutes)),
        }
    }
}

/// One hospital after ingestion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HospitalRecord {
    pub name: String,
    pub district: String,
    pub distance_km: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latitude: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub longitude: Option<f64>,
    pub district_population: u64,
    /// District population split evenly over the district's hospitals.
    pub population: f64,
    pub units_per_day: f64,
    pub flights_per_day: u64,
    pub class: DemandClass,
}

#[derive(Debug, Clone, Default)]
struct RawHospital {
    row: usize,
    name: String,
    district: String,
    distance_km: Option<f64>,
    population: u64,
    lat: Option<f64>,
    lon: Option<f64>,
    distance_override_km: Option<f64>,
    class_override: Option<DemandClass>,
}

const REQUIRED_COLUMNS: [&str; 4] = ["name", "district", "distance_km", "population"];
const OPTIONAL_COLUMNS: [&str; 4] = ["lat", "lon", "distance_override_km", "class_override"];

fn read_hospitals<R: Read>(input: R) -> Result<Vec<RawHospital>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input);
    let headers = reader.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    for name in REQUIRED_COLUMNS {
        if col(name).is_none() {
            return Err(Error::Parse {
                row: 0,
                column: name.to_string(),
                message: "missing required column".into(),
            });
        }
    }
    for h in headers.iter() {
        if !REQUIRED_COLUMNS.contains(&h) && !OPTIONAL_COLUMNS.contains(&h) {
            return Err(Error::Parse {
                row: 0,
                column: h.to_string(),
                message: "unknown column".into(),
            });
        }
    }
    let index: BTreeMap<&str, Option<usize>> = REQUIRED_COLUMNS
        .iter()
        .chain(OPTIONAL_COLUMNS.iter())
        .map(|&c| (c, col(c)))
        .collect();

    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record?;
        let field = |name: &str| -> &str { index[name].and_then(|c| record.get(c)).unwrap_or("") };
        let parse_err = |column: &str, message: String| Error::Parse {
            row,
            column: column.to_string(),
            message,
        };
        let real = |name: &str| -> Result<Option<f64>> {
            let v = field(name);
            if v.is_empty() {
                return Ok(None);
            }
            v.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .map(Some)
                .ok_or_else(|| parse_err(name, format!("`{v}` is not a number")))
        };

        let name = field("name").to_string();
        if name.is_empty() {
            return Err(parse_err("name", "hospital name is empty".into()));
        }
        let pop_text = field("population");
        let population = match pop_text.parse::<i64>() {
            Ok(p) if p < 0 => {
                return Err(parse_err("population", format!("negative population {p}")))
            }
            Ok(p) => p as u64,
            Err(_) => {
                return Err(parse_err(
                    "population",
                    format!("`{pop_text}` is not an integer"),
                ))
            }
        };
        let distance_km = real("distance_km")?;
        let distance_override_km = real("distance_override_km")?;
        for (c, d) in [
            ("distance_km", distance_km),
            ("distance_override_km", distance_override_km),
        ] {
            if matches!(d, Some(v) if v < 0.0) {
                return Err(parse_err(c, "distance must be nonnegative".into()));
            }
        }
        let lat = real("lat")?;
        let lon = real("lon")?;
        if matches!(lat, Some(v) if v.abs() > 90.0) {
            return Err(parse_err("lat", "latitude outside [-90, 90]".into()));
        }
        if matches!(lon, Some(v) if v.abs() > 180.0) {
            return Err(parse_err("lon", "longitude outside [-180, 180]".into()));
        }
        let class_text = field("class_override");
        let class_override = if class_text.is_empty() {
            None
        } else {
            Some(DemandClass::parse(class_text).ok_or_else(|| {
                parse_err(
                    "class_override",
                    format!("unknown class override `{class_text}`"),
                )
            })?)
        };
        out.push(RawHospital {
            row,
            name,
            district: field("district").to_string(),
            distance_km,
            population,
            lat,
            lon,
            distance_override_km,
            class_override,
        });
    }
    Ok(out)
}

/// A fully derived, solvable instance.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub model: ModelConfig,
    pub initial_state: State,
    pub schedule: DemandSchedule,
    pub hospitals: Vec<HospitalRecord>,
    pub class_daily_flights: [f64; 2],
}

/// Canonical on-disk form of a [`Scenario`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDocument {
    pub config: ScenarioConfig,
    pub hospitals: Vec<HospitalRecord>,
    pub class_daily_flights: [f64; 2],
    pub arrival_shape: Vec<f64>,
    pub rates_class1: Vec<f64>,
    pub rates_class2: Vec<f64>,
}

impl Scenario {
    /// Runs the ingestion pipeline on a hospital CSV.
    pub fn build<R: Read>(hospital_csv: R, config: ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let raw = read_hospitals(hospital_csv)?;

        let mut districts: BTreeMap<&str, (u64, usize, usize)> = BTreeMap::new();
        for h in &raw {
            let entry = districts
                .entry(h.district.as_str())
                .or_insert((h.population, 0, h.row));
            if entry.0 != h.population {
                return Err(Error::Parse {
                    row: h.row,
                    column: "population".into(),
                    message: format!(
                        "district `{}` population {} disagrees with {} given at row {}",
                        h.district, h.population, entry.0, entry.2
                    ),
                });
            }
            entry.1 += 1;
        }

        let mut hospitals = Vec::with_capacity(raw.len());
        for h in &raw {
            let distance_km = match (h.distance_override_km, h.distance_km, h.lat, h.lon) {
                (Some(d), _, _, _) | (None, Some(d), _, _) => d,
                (None, None, Some(lat), Some(lon)) => {
                    match (config.station_lat, config.station_lon) {
                        (Some(slat), Some(slon)) => haversine_km(slat, slon, lat, lon),
                        _ => {
                            return Err(Error::Parse {
                                row: h.row,
                                column: "distance_km".into(),
                                message: "distance missing and no station coordinates configured"
                                    .into(),
                            })
                        }
                    }
                }
                _ => {
                    return Err(Error::Parse {
                        row: h.row,
                        column: "distance_km".into(),
                        message: "distance missing and no coordinates given".into(),
                    })
                }
            };
            let (district_population, count, _) = districts[h.district.as_str()];
            let population = district_population as f64 / count as f64;
            hospitals.push(HospitalRecord {
                name: h.name.clone(),
                district: h.district.clone(),
                distance_km,
                latitude: h.lat,
                longitude: h.lon,
                district_population,
                population,
                units_per_day: units_per_day(population, config.blood_need_fraction),
                flights_per_day: flights_per_day(
                    population,
                    config.blood_need_fraction,
                    config.units_per_flight,
                ),
                class: h
                    .class_override
                    .unwrap_or_else(|| config.bands.classify(distance_km)),
            });
        }

        if !hospitals
            .iter()
            .any(|h| h.class != DemandClass::Unreachable)
        {
            return Err(Error::invalid("no hospitals in range"));
        }
        let total_for = |class| {
            hospitals
                .iter()
                .filter(|h| h.class == class)
                .map(|h| h.flights_per_day)
                .sum::<u64>() as f64
        };
        let class_daily_flights = [total_for(DemandClass::One), total_for(DemandClass::Two)];
        let shape = config.shape()?;
        let schedule = DemandSchedule::from_daily_totals(
            class_daily_flights[0],
            class_daily_flights[1],
            &shape,
            config.truncation_eps,
        )?;
        Self::assemble(config, schedule, hospitals, class_daily_flights)
    }

    /// Scenario from explicit per-epoch rates, without a hospital dataset.
    pub fn from_rates(config: ScenarioConfig, rates1: &[f64], rates2: &[f64]) -> Result<Self> {
        config.validate()?;
        let epochs = config.horizon()? - 1;
        if rates1.len() != epochs || rates2.len() != epochs {
            return Err(Error::invalid(format!("expected {epochs} rates per class")));
        }
        let schedule = DemandSchedule::from_rates(rates1, rates2, config.truncation_eps)?;
        let totals = [
            rates1.iter().fold(0.0, |a, r| a + r),
            rates2.iter().fold(0.0, |a, r| a + r),
        ];
        Self::assemble(config, schedule, Vec::new(), totals)
    }

    fn assemble(
        config: ScenarioConfig,
        schedule: DemandSchedule,
        hospitals: Vec<HospitalRecord>,
        class_daily_flights: [f64; 2],
    ) -> Result<Self> {
        let model = config.model()?;
        let initial_state = match config.initial_state {
            Some([s1, s2]) => State::new(s1, s2),
            None => State::new(0, config.fleet_size),
        };
        Ok(Scenario {
            config,
            model,
            initial_state,
            schedule,
            hospitals,
            class_daily_flights,
        })
    }

    pub fn to_document(&self) -> ScenarioDocument {
        ScenarioDocument {
            config: self.config.clone(),
            hospitals: self.hospitals.clone(),
            class_daily_flights: self.class_daily_flights,
            arrival_shape: self.schedule.arrival_shape().to_vec(),
            rates_class1: self.schedule.rates(1),
            rates_class2: self.schedule.rates(2),
        }
    }

    pub fn from_document(doc: ScenarioDocument) -> Result<Self> {
        let mut s = Self::from_rates(doc.config, &doc.rates_class1, &doc.rates_class2)?;
        s.schedule.set_arrival_shape(doc.arrival_shape)?;
        s.hospitals = doc.hospitals;
        s.class_daily_flights = doc.class_daily_flights;
        Ok(s)
    }

    pub fn to_json(&self) -> String {
        let mut text =
            serde_json::to_string_pretty(&self.to_document()).expect("scenario serializes");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_document(serde_json::from_str(text)?)
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_json().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn hash_bytes(&self) -> [u8; 32] {
        Sha256::digest(self.to_json().as_bytes()).into()
    }

    /// Same demand, different fleet. A default initial state follows the fleet.
    pub fn with_fleet_size(&self, fleet_size: usize) -> Result<Self> {
        let mut config = self.config.clone();
        config.fleet_size = fleet_size;
        self.rebuilt(config)
    }

    pub fn with_rho21(&self, rho21: f64) -> Result<Self> {
        let mut config = self.config.clone();
        config.rho21 = rho21;
        self.rebuilt(config)
    }

    fn rebuilt(&self, config: ScenarioConfig) -> Result<Self> {
        config.validate()?;
        Self::assemble(
            config,
            self.schedule.clone(),
            self.hospitals.clone(),
            self.class_daily_flights,
        )
    }

    /// `epoch,lambda1,lambda2` rows for plotting.
    pub fn rates_csv(&self) -> String {
        let mut out = String::from("t,lambda1,lambda2\n");
        for (t, (a, b)) in self
            .schedule
            .rates(1)
            .iter()
            .zip(self.schedule.rates(2))
            .enumerate()
        {
            out.push_str(&format!("{},{},{}\n", t + 1, a, b));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn haversine_reference_points() {
        assert_eq!(haversine_km(1.0, 2.0, 1.0, 2.0), 0.0);
        assert!((haversine_km(0.0, 0.0, 0.0, 180.0) - 20015.1).abs() < 0.1);
        assert!((haversine_km(36.12, -86.67, 33.94, -118.40) - 2886.4).abs() < 0.5);
    }

    #[test]
    fn band_lookup() {
        let b = DistanceBands::default();
        assert_eq!(b.classify(34.3), DemandClass::One);
        assert_eq!(b.classify(73.5), DemandClass::Two);
        assert_eq!(b.classify(85.4), DemandClass::Unreachable);
        assert_eq!(b.classify(40.0), DemandClass::Two);
        assert_eq!(b.classify(80.0), DemandClass::Two);
        assert_eq!(
            DistanceBands::single_class().classify(1e6),
            DemandClass::One
        );
        assert!(DistanceBands(vec![Some(50.0), Some(40.0)])
            .validate()
            .is_err());
        assert!(DistanceBands(vec![None, Some(40.0)]).validate().is_err());
        assert!(DistanceBands(vec![]).validate().is_err());
    }

    #[test]
    fn flight_rounding() {
        assert_eq!(flights_per_day(319141.0, 0.02, 2.0), 9);
        assert_eq!(flights_per_day(110603.0, 0.02, 2.0), 4);
        assert_eq!(flights_per_day(0.0, 0.02, 2.0), 0);
        // exactly three flights stays three
        assert_eq!(flights_per_day(3.0 * 2.0 * 365.0 / 0.02, 0.02, 2.0), 3);
    }

    #[test]
    fn district_split_and_errors() {
        let csv = "name,district,distance_km,population\nA,D,10,200000\nB,D,50,200000\n";
        let s = Scenario::build(csv.as_bytes(), ScenarioConfig::new(3)).unwrap();
        assert_eq!(s.hospitals[0].population, 100000.0);
        assert_eq!(s.hospitals[1].population, 100000.0);
        assert_eq!(s.class_daily_flights, [3.0, 3.0]);

        let bad = "name,district,distance_km,population\nA,D,10,200000\nB,D,50,1\n";
        match Scenario::build(bad.as_bytes(), ScenarioConfig::new(3)) {
            Err(Error::Parse { row: 2, column, .. }) => assert_eq!(column, "population"),
            other => panic!("unexpected {other:?}"),
        }
        let neg = "name,district,distance_km,population\nA,D,10,-5\n";
        assert!(matches!(
            Scenario::build(neg.as_bytes(), ScenarioConfig::new(3)),
            Err(Error::Parse { row: 1, .. })
        ));
        let missing = "name,district,population\nA,D,5\n";
        assert!(matches!(
            Scenario::build(missing.as_bytes(), ScenarioConfig::new(3)),
            Err(Error::Parse { row: 0, .. })
        ));
        let class = "name,district,distance_km,population,class_override\nA,D,10,5,3\n";
        match Scenario::build(class.as_bytes(), ScenarioConfig::new(3)) {
            Err(Error::Parse { column, .. }) => assert_eq!(column, "class_override"),
            other => panic!("unexpected {other:?}"),
        }
        let empty = "name,district,distance_km,population\n";
        let err = Scenario::build(empty.as_bytes(), ScenarioConfig::new(3)).unwrap_err();
        assert!(err.to_string().contains("no hospitals in range"));
    }

    #[test]
    fn zero_population_gives_zero_rates() {
        let csv = "name,district,distance_km,population\nA,D,10,0\n";
        let s = Scenario::build(csv.as_bytes(), ScenarioConfig::new(2)).unwrap();
        assert!(s
            .schedule
            .rates(1)
            .iter()
            .chain(&s.schedule.rates(2))
            .all(|&l| l == 0.0));
    }

    #[test]
    fn coordinates_and_overrides() {
        let mut cfg = ScenarioConfig::new(2);
        cfg.station_lat = Some(0.0);
        cfg.station_lon = Some(0.0);
        let csv = "name,district,distance_km,population,lat,lon,distance_override_km\n\
                   A,D1,,1000,0.0,0.3,\nB,D2,30,1000,,,75\n";
        let s = Scenario::build(csv.as_bytes(), cfg).unwrap();
        assert!((s.hospitals[0].distance_km - haversine_km(0.0, 0.0, 0.0, 0.3)).abs() < 1e-12);
        assert_eq!(s.hospitals[0].class, DemandClass::One);
        assert_eq!(s.hospitals[1].distance_km, 75.0);
        assert_eq!(s.hospitals[1].class, DemandClass::Two);
    }

    #[test]
    fn horizon_from_epoch_length() {
        let cfg = ScenarioConfig::new(3);
        assert_eq!(cfg.horizon().unwrap(), 17);
        let mut cfg = ScenarioConfig::new(3);
        cfg.epoch_minutes = 77.0;
        assert!(cfg.horizon().is_err());
        cfg.horizon_epochs = Some(4);
        assert_eq!(cfg.horizon().unwrap(), 4);
        assert!(ScenarioConfig::from_json(r#"{"fleet_size": 3, "bogus": 1}"#).is_err());
        let parsed = ScenarioConfig::from_json(r#"{"fleet_size": 3, "bands": [null]}"#).unwrap();
        assert_eq!(parsed.bands, DistanceBands::single_class());
    }

    #[test]
    fn json_roundtrip_is_stable() {
        let csv = "name,district,distance_km,population\nA,D,10,123456\nB,E,60,654321\n";
        let s = Scenario::build(csv.as_bytes(), ScenarioConfig::new(4)).unwrap();
        let text = s.to_json();
        let back = Scenario::from_json(&text).unwrap();
        assert_eq!(back.to_json(), text);
        assert_eq!(back.hash(), s.hash());
        assert_eq!(back.schedule, s.schedule);
    }
}
