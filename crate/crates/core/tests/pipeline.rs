mod common;

use common::read_fixture;
use swapdp_core::scenario::DemandClass;
use swapdp_core::{Error, Scenario, ScenarioConfig};

fn rwanda() -> Scenario {
    let cfg = ScenarioConfig::from_json(&read_fixture("rwanda_config.json")).unwrap();
    Scenario::build(read_fixture("rwanda_hospitals.csv").as_bytes(), cfg).unwrap()
}

#[test]
fn reproduces_hospital_table() {
    let sc = rwanda();
    let expected = read_fixture("rwanda_expected.csv");
    let mut rows = csv::Reader::from_reader(expected.as_bytes());
    let mut n = 0;
    for (rec, h) in rows.records().zip(&sc.hospitals) {
        let rec = rec.unwrap();
        assert_eq!(&rec[0], h.name);
        assert_eq!(
            rec[1].parse::<f64>().unwrap(),
            h.population.round(),
            "{}",
            h.name
        );
        assert_eq!(
            rec[2].parse::<u64>().unwrap(),
            h.flights_per_day,
            "{}",
            h.name
        );
        assert_eq!(&rec[3], h.class.label(), "{}", h.name);
        n += 1;
    }
    assert_eq!(n, 33);
    assert_eq!(sc.hospitals.len(), 33);
    let na = sc
        .hospitals
        .iter()
        .filter(|h| h.class == DemandClass::Unreachable)
        .count();
    assert_eq!(na, 6);
    assert_eq!(sc.class_daily_flights, [72.0, 112.0]);
}

#[test]
fn rates_spread_daily_flights() {
    let sc = rwanda();
    assert_eq!(sc.model.horizon, 17);
    for (class, daily) in [(1, 72.0), (2, 112.0)] {
        let total: f64 = sc.schedule.rates(class).iter().sum();
        assert!((total - daily).abs() < 1e-9, "{total}");
    }
}

#[test]
fn scenario_document_roundtrips() {
    let sc = rwanda();
    let text = sc.to_json();
    let back = Scenario::from_json(&text).unwrap();
    assert_eq!(back.to_json(), text);
    assert_eq!(back.hash(), sc.hash());
    assert_ne!(sc.with_rho21(0.7).unwrap().hash(), sc.hash());
}

#[test]
fn all_hospitals_out_of_range() {
    let mut cfg = ScenarioConfig::new(3);
    cfg.bands = serde_json::from_str("[5.0, 10.0]").unwrap();
    let err = Scenario::build(read_fixture("desk_hospitals.csv").as_bytes(), cfg).unwrap_err();
    assert!(matches!(err, Error::InvalidInput(_)), "{err}");
    assert!(err.to_string().contains("no hospitals in range"), "{err}");
}

#[test]
fn single_band_puts_everything_in_class_one() {
    let mut cfg = ScenarioConfig::new(3);
    cfg.bands = serde_json::from_str("[100.0]").unwrap();
    let sc = Scenario::build(read_fixture("desk_hospitals.csv").as_bytes(), cfg).unwrap();
    assert_eq!(sc.class_daily_flights, [29.0, 0.0]);
    assert!(sc.schedule.rates(2).iter().all(|&r| r == 0.0));
}

#[test]
fn malformed_rows_name_the_column() {
    let csv = "name,district,distance_km,population\nA,X,12.0,lots\n";
    match Scenario::build(csv.as_bytes(), ScenarioConfig::new(2)).unwrap_err() {
        Error::Parse { row, column, .. } => assert_eq!((row, column.as_str()), (1, "population")),
        e => panic!("{e}"),
    }
    let csv = "name,district,distance_km\nA,X,12.0\n";
    assert!(matches!(
        Scenario::build(csv.as_bytes(), ScenarioConfig::new(2)),
        Err(Error::Parse { row: 0, .. })
    ));
}

#[test]
fn config_rejects_unknown_keys() {
    assert!(ScenarioConfig::from_json(r#"{"fleet_size": 3, "fleet": 4}"#).is_err());
    assert!(ScenarioConfig::from_json(r#"{"fleet_size": 3, "rho21": -1}"#).is_err());
}
