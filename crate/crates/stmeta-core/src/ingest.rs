//! Raw event records (trips, check-ins, readings) into traffic tensors,
//! station registries, grids, and origin-destination matrices.

use std::collections::HashMap;
use std::path::Path;

use chrono::{NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::Tensor;
use crate::timeseries::{TimeseriesError, TrafficTensor};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Unreadable {
        path: String,
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("missing mandatory column {0:?}")]
    MissingColumn(String),
    #[error("schema needs either a station column or a lat/lon column pair for the start location")]
    NoStartLocation,
    #[error("no locations defined")]
    NoLocations,
    #[error("no events to bin")]
    NoEvents,
    #[error("registry: {0}")]
    Registry(String),
    #[error(transparent)]
    Timeseries(#[from] TimeseriesError),
}

/// Either a station id or a raw coordinate pair.
#[derive(Debug, Clone, PartialEq)]
pub enum LocRef {
    Station(String),
    LatLon(f64, f64),
}

/// One raw mobility event. End fields are present only for trip-like
/// records.
#[derive(Debug, Clone, PartialEq)]
pub struct EventRecord {
    pub start_time: NaiveDateTime,
    pub end_time: Option<NaiveDateTime>,
    pub start_loc: LocRef,
    pub end_loc: Option<LocRef>,
}

/// Column mapping for an event CSV. Column names refer to the header row;
/// timestamps are parsed with the chrono `time_format` string.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventSchema {
    pub time_format: String,
    pub start_time: String,
    #[serde(default)]
    pub end_time: Option<String>,
    #[serde(default)]
    pub start_station: Option<String>,
    #[serde(default)]
    pub end_station: Option<String>,
    #[serde(default)]
    pub start_lat: Option<String>,
    #[serde(default)]
    pub start_lon: Option<String>,
    #[serde(default)]
    pub end_lat: Option<String>,
    #[serde(default)]
    pub end_lon: Option<String>,
}

/// Parsed events plus the count of malformed rows that were skipped.
#[derive(Debug)]
pub struct EventBatch {
    pub events: Vec<EventRecord>,
    pub skipped: usize,
}

/// Reads and time-sorts event records; malformed rows are counted and
/// skipped rather than aborting the ingest.
pub fn read_events(path: &Path, schema: &EventSchema) -> Result<EventBatch, IngestError> {
    let file = std::fs::File::open(path).map_err(|source| IngestError::Unreadable {
        path: path.display().to_string(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(file);
    let headers = reader.headers()?.clone();
    let col = |name: &str| -> Result<usize, IngestError> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| IngestError::MissingColumn(name.to_string()))
    };
    let opt_col = |name: &Option<String>| -> Result<Option<usize>, IngestError> {
        name.as_deref().map(col).transpose()
    };

    let start_time_col = col(&schema.start_time)?;
    let end_time_col = opt_col(&schema.end_time)?;
    let start_station_col = opt_col(&schema.start_station)?;
    let end_station_col = opt_col(&schema.end_station)?;
    let start_lat_col = opt_col(&schema.start_lat)?;
    let start_lon_col = opt_col(&schema.start_lon)?;
    let end_lat_col = opt_col(&schema.end_lat)?;
    let end_lon_col = opt_col(&schema.end_lon)?;
    if start_station_col.is_none() && (start_lat_col.is_none() || start_lon_col.is_none()) {
        return Err(IngestError::NoStartLocation);
    }

    let parse_time = |field: &str| NaiveDateTime::parse_from_str(field.trim(), &schema.time_format);
    let mut events = Vec::new();
    let mut skipped = 0usize;
    for record in reader.records() {
        let record = match record {
            Ok(r) => r,
            Err(_) => {
                skipped += 1;
                continue;
            }
        };
        let row = |idx: usize| record.get(idx).unwrap_or("");
        let start_time = match parse_time(row(start_time_col)) {
            Ok(t) => t,
            Err(_) => {
                skipped += 1;
                continue;
            }
        };
        let start_loc = match start_station_col {
            Some(c) if !row(c).trim().is_empty() => LocRef::Station(row(c).trim().to_string()),
            _ => {
                let lat = start_lat_col.map(row).and_then(|v| v.trim().parse().ok());
                let lon = start_lon_col.map(row).and_then(|v| v.trim().parse().ok());
                match (lat, lon) {
                    (Some(lat), Some(lon)) => LocRef::LatLon(lat, lon),
                    _ => {
                        skipped += 1;
                        continue;
                    }
                }
            }
        };
        let end_time = end_time_col.and_then(|c| parse_time(row(c)).ok());
        let end_loc = match end_station_col {
            Some(c) if !row(c).trim().is_empty() => Some(LocRef::Station(row(c).trim().to_string())),
            _ => {
                let lat: Option<f64> = end_lat_col.map(row).and_then(|v| v.trim().parse().ok());
                let lon: Option<f64> = end_lon_col.map(row).and_then(|v| v.trim().parse().ok());
                match (lat, lon) {
                    (Some(lat), Some(lon)) => Some(LocRef::LatLon(lat, lon)),
                    _ => None,
                }
            }
        };
        if let Some(e) = end_time {
            if e < start_time {
                skipped += 1;
                continue;
            }
        }
        events.push(EventRecord { start_time, end_time, start_loc, end_loc });
    }
    events.sort_by_key(|e| e.start_time);
    Ok(EventBatch { events, skipped })
}

/// Regular lat/lon grid, row-major cell indexing from the south-west
/// origin corner.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub origin_lat: f64,
    pub origin_lon: f64,
    pub rows: usize,
    pub cols: usize,
    pub cell_km: f64,
}

const KM_PER_DEG_LAT: f64 = std::f64::consts::PI * 6371.0 / 180.0;

impl GridSpec {
    pub fn cell_count(&self) -> usize {
        self.rows * self.cols
    }

    /// Cell index of a point, or None when out of bounds. Cell size in
    /// degrees uses local-latitude scaling for the longitude direction.
    pub fn cell_of(&self, lat: f64, lon: f64) -> Option<usize> {
        let dlat = self.cell_km / KM_PER_DEG_LAT;
        let dlon = self.cell_km / (KM_PER_DEG_LAT * self.origin_lat.to_radians().cos());
        let r = (lat - self.origin_lat) / dlat;
        let c = (lon - self.origin_lon) / dlon;
        if r < 0.0 || c < 0.0 {
            return None;
        }
        let (r, c) = (r as usize, c as usize);
        if r >= self.rows || c >= self.cols {
            return None;
        }
        Some(r * self.cols + c)
    }

    pub fn location_ids(&self) -> Vec<String> {
        (0..self.rows)
            .flat_map(|r| (0..self.cols).map(move |c| format!("g{r}_{c}")))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Station {
    pub id: String,
    pub lat: f64,
    pub lon: f64,
    pub lines: Vec<String>,
}

/// Ordered station list; the ordering defines the location index.
#[derive(Debug, Clone, Default)]
pub struct StationRegistry {
    stations: Vec<Station>,
    by_id: HashMap<String, usize>,
}

impl StationRegistry {
    pub fn new(stations: Vec<Station>) -> Result<Self, IngestError> {
        let mut by_id = HashMap::new();
        for (i, s) in stations.iter().enumerate() {
            if by_id.insert(s.id.clone(), i).is_some() {
                return Err(IngestError::Registry(format!("duplicate station id {:?}", s.id)));
            }
        }
        Ok(StationRegistry { stations, by_id })
    }

    pub fn len(&self) -> usize {
        self.stations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stations.is_empty()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.by_id.get(id).copied()
    }

    pub fn stations(&self) -> &[Station] {
        &self.stations
    }

    pub fn coords(&self) -> Vec<(f64, f64)> {
        self.stations.iter().map(|s| (s.lat, s.lon)).collect()
    }

    pub fn line_assignment(&self) -> Vec<Vec<String>> {
        self.stations.iter().map(|s| s.lines.clone()).collect()
    }

    pub fn location_ids(&self) -> Vec<String> {
        self.stations.iter().map(|s| s.id.clone()).collect()
    }

    /// CSV form `id,lat,lon,lines` with line ids joined by `|`.
    pub fn save_csv(&self, path: &Path) -> Result<(), IngestError> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["id", "lat", "lon", "lines"])?;
        for s in &self.stations {
            w.write_record([
                s.id.as_str(),
                &s.lat.to_string(),
                &s.lon.to_string(),
                &s.lines.join("|"),
            ])?;
        }
        w.flush().map_err(|e| IngestError::Registry(e.to_string()))?;
        Ok(())
    }

    pub fn load_csv(path: &Path) -> Result<Self, IngestError> {
        let mut r = csv::Reader::from_path(path)?;
        let mut stations = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let get = |i: usize| rec.get(i).unwrap_or("").trim().to_string();
            let lat: f64 = get(1)
                .parse()
                .map_err(|e| IngestError::Registry(format!("bad lat: {e}")))?;
            let lon: f64 = get(2)
                .parse()
                .map_err(|e| IngestError::Registry(format!("bad lon: {e}")))?;
            let lines: Vec<String> = get(3)
                .split('|')
                .filter(|s| !s.is_empty())
                .map(str::to_string)
                .collect();
            stations.push(Station { id: get(0), lat, lon, lines });
        }
        StationRegistry::new(stations)
    }
}

/// The set of prediction locations an ingest bins events into.
#[derive(Debug, Clone)]
pub enum Locations {
    Grid(GridSpec),
    Stations(StationRegistry),
}

impl Locations {
    pub fn len(&self) -> usize {
        match self {
            Locations::Grid(g) => g.cell_count(),
            Locations::Stations(r) => r.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn location_ids(&self) -> Vec<String> {
        match self {
            Locations::Grid(g) => g.location_ids(),
            Locations::Stations(r) => r.location_ids(),
        }
    }

    fn index_of(&self, loc: &LocRef) -> Option<usize> {
        match (self, loc) {
            (Locations::Grid(g), LocRef::LatLon(lat, lon)) => g.cell_of(*lat, *lon),
            (Locations::Stations(r), LocRef::Station(id)) => r.index_of(id),
            _ => None,
        }
    }
}

/// Which endpoint of an event is counted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CountField {
    Start,
    End,
}

/// Tensor plus the number of events dropped for falling outside the
/// location set (or lacking the chosen endpoint).
#[derive(Debug)]
pub struct BinnedTensor {
    pub tensor: TrafficTensor,
    pub dropped: usize,
}

/// Bins events into a TrafficTensor: data[t][i] counts the events whose
/// chosen timestamp falls in slot t at location i.
///
/// Slots are half-open [t, t+1): an event exactly on a boundary goes to
/// the later slot. The origin is the midnight of the first counted
/// event's day, so daily lags line up with wall-clock time.
pub fn events_to_tensor(
    events: &[EventRecord],
    locations: &Locations,
    slot_minutes: u32,
    count_field: CountField,
) -> Result<BinnedTensor, IngestError> {
    if locations.is_empty() {
        return Err(IngestError::NoLocations);
    }
    let picked: Vec<(NaiveDateTime, &LocRef)> = events
        .iter()
        .filter_map(|e| match count_field {
            CountField::Start => Some((e.start_time, &e.start_loc)),
            CountField::End => match (&e.end_time, &e.end_loc) {
                (Some(t), Some(l)) => Some((*t, l)),
                _ => None,
            },
        })
        .collect();
    let endpoint_missing = events.len() - picked.len();
    if picked.is_empty() {
        return Err(IngestError::NoEvents);
    }
    let first = picked.iter().map(|(t, _)| *t).min().expect("non-empty");
    let last = picked.iter().map(|(t, _)| *t).max().expect("non-empty");
    let origin = first
        .date()
        .and_hms_opt(0, 0, 0)
        .expect("midnight exists");
    debug_assert_eq!(origin.minute(), 0);
    let slot_secs = slot_minutes as i64 * 60;
    let t_slots = ((last - origin).num_seconds() / slot_secs + 1) as usize;
    let n = locations.len();

    let mut data = vec![0.0; t_slots * n];
    let mut dropped = endpoint_missing;
    for (time, loc) in picked {
        match locations.index_of(loc) {
            Some(i) => {
                let slot = ((time - origin).num_seconds() / slot_secs) as usize;
                data[slot * n + i] += 1.0;
            }
            None => dropped += 1,
        }
    }
    let tensor = TrafficTensor::new(
        Tensor::from_vec(vec![t_slots, n], data).expect("sized above"),
        slot_minutes,
        origin,
        locations.location_ids(),
    )?;
    Ok(BinnedTensor { tensor, dropped })
}

/// n×n origin-destination totals: od[i][j] counts trips starting at i and
/// ending at j. Events lacking either endpoint contribute nothing.
pub fn build_od_matrix(events: &[EventRecord], locations: &Locations) -> Tensor {
    let n = locations.len();
    let mut od = Tensor::zeros(vec![n, n]);
    for e in events {
        let (Some(end_loc), start_loc) = (&e.end_loc, &e.start_loc) else {
            continue;
        };
        if let (Some(i), Some(j)) = (locations.index_of(start_loc), locations.index_of(end_loc)) {
            let v = od.at(i, j) + 1.0;
            od.set(i, j, v);
        }
    }
    od
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write as _;

    fn schema() -> EventSchema {
        EventSchema {
            time_format: "%Y-%m-%d %H:%M:%S".into(),
            start_time: "starttime".into(),
            end_time: Some("stoptime".into()),
            start_station: Some("start_id".into()),
            end_station: Some("end_id".into()),
            start_lat: None,
            start_lon: None,
            end_lat: None,
            end_lon: None,
        }
    }

    fn write_csv(content: &str) -> (tempfile::TempDir, std::path::PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("events.csv");
        let mut f = std::fs::File::create(&path).unwrap();
        f.write_all(content.as_bytes()).unwrap();
        (dir, path)
    }

    fn registry_abc() -> StationRegistry {
        StationRegistry::new(vec![
            Station { id: "a".into(), lat: 40.0, lon: -74.0, lines: vec!["1".into()] },
            Station { id: "b".into(), lat: 40.01, lon: -74.0, lines: vec!["1".into()] },
            Station { id: "c".into(), lat: 40.02, lon: -74.0, lines: vec!["2".into()] },
        ])
        .unwrap()
    }

    #[test]
    fn empty_file_parses_to_empty_batch() {
        let (_d, path) = write_csv("starttime,stoptime,start_id,end_id\n");
        let batch = read_events(&path, &schema()).unwrap();
        assert!(batch.events.is_empty());
        assert_eq!(batch.skipped, 0);
    }

    #[test]
    fn unparsable_timestamp_skipped_and_counted() {
        let (_d, path) = write_csv(
            "starttime,stoptime,start_id,end_id\n\
             2026-01-05 08:00:00,2026-01-05 08:10:00,a,b\n\
             not-a-time,2026-01-05 08:10:00,a,b\n",
        );
        let batch = read_events(&path, &schema()).unwrap();
        assert_eq!(batch.events.len(), 1);
        assert_eq!(batch.skipped, 1);
    }

    #[test]
    fn three_row_fixture_parses_sorted() {
        let (_d, path) = write_csv(
            "starttime,stoptime,start_id,end_id\n\
             2026-01-05 09:00:00,2026-01-05 09:30:00,b,c\n\
             2026-01-05 08:00:00,2026-01-05 08:10:00,a,b\n\
             2026-01-05 10:00:00,,c,\n",
        );
        let batch = read_events(&path, &schema()).unwrap();
        assert_eq!(batch.events.len(), 3);
        assert_eq!(batch.skipped, 0);
        assert_eq!(batch.events[0].start_loc, LocRef::Station("a".into()));
        assert_eq!(batch.events[1].start_loc, LocRef::Station("b".into()));
        assert_eq!(batch.events[2].end_loc, None);
        assert_eq!(batch.events[2].end_time, None);
    }

    #[test]
    fn missing_mandatory_column_is_an_error() {
        let (_d, path) = write_csv("when,start_id\n2026-01-05 08:00:00,a\n");
        assert!(matches!(
            read_events(&path, &schema()),
            Err(IngestError::MissingColumn(_))
        ));
    }

    fn event_at(hms: (u32, u32, u32), station: &str) -> EventRecord {
        EventRecord {
            start_time: chrono::NaiveDate::from_ymd_opt(2026, 1, 5)
                .unwrap()
                .and_hms_opt(hms.0, hms.1, hms.2)
                .unwrap(),
            end_time: None,
            start_loc: LocRef::Station(station.into()),
            end_loc: None,
        }
    }

    #[test]
    fn two_events_in_same_slot_count_two() {
        let events = vec![event_at((8, 5, 0), "a"), event_at((8, 40, 0), "a")];
        let binned =
            events_to_tensor(&events, &Locations::Stations(registry_abc()), 60, CountField::Start)
                .unwrap();
        assert_eq!(binned.tensor.value(8, 0), 2.0);
        assert_eq!(binned.dropped, 0);
    }

    #[test]
    fn end_counting_uses_trip_destinations() {
        let mut trip = event_at((8, 5, 0), "a");
        trip.end_loc = Some(LocRef::Station("b".into()));
        trip.end_time = Some(trip.start_time + chrono::Duration::minutes(90));
        let no_end = event_at((8, 10, 0), "a");
        let binned = events_to_tensor(
            &[trip, no_end],
            &Locations::Stations(registry_abc()),
            60,
            CountField::End,
        )
        .unwrap();
        // the trip ends 09:35 at station b; the endpoint-less event drops
        assert_eq!(binned.tensor.value(9, 1), 1.0);
        assert_eq!(binned.dropped, 1);
        let total: f64 = binned.tensor.data.values().iter().sum();
        assert_eq!(total as usize + binned.dropped, 2);
    }

    #[test]
    fn boundary_event_goes_to_later_slot() {
        let events = vec![event_at((9, 0, 0), "b")];
        let binned =
            events_to_tensor(&events, &Locations::Stations(registry_abc()), 60, CountField::Start)
                .unwrap();
        // slot 9 is [09:00, 10:00)
        assert_eq!(binned.tensor.value(9, 1), 1.0);
        assert_eq!(binned.tensor.value(8, 1), 0.0);
    }

    #[test]
    fn ten_event_fixture_matches_hand_tally() {
        // Hand tally over 2 stations × 3 half-hour slots from 08:00:
        //   a: 08:00-08:30 → 2, 08:30-09:00 → 1, 09:00-09:30 → 0
        //   b: 08:00-08:30 → 1, 08:30-09:00 → 3, 09:00-09:30 → 2
        // plus one event at unknown station "z" → dropped.
        let events = vec![
            event_at((8, 0, 0), "a"),
            event_at((8, 29, 59), "a"),
            event_at((8, 45, 0), "a"),
            event_at((8, 10, 0), "b"),
            event_at((8, 30, 0), "b"),
            event_at((8, 31, 0), "b"),
            event_at((8, 59, 0), "b"),
            event_at((9, 0, 0), "b"),
            event_at((9, 29, 0), "b"),
            event_at((9, 15, 0), "z"),
        ];
        let reg = StationRegistry::new(vec![
            Station { id: "a".into(), lat: 40.0, lon: -74.0, lines: vec![] },
            Station { id: "b".into(), lat: 40.01, lon: -74.0, lines: vec![] },
        ])
        .unwrap();
        let binned =
            events_to_tensor(&events, &Locations::Stations(reg), 30, CountField::Start).unwrap();
        assert_eq!(binned.dropped, 1);
        // origin is midnight, 08:00 = slot 16 at 30-minute slots
        let at = |slot_from_8: usize, loc: usize| binned.tensor.value(16 + slot_from_8, loc);
        assert_eq!(at(0, 0), 2.0);
        assert_eq!(at(1, 0), 1.0);
        assert_eq!(at(2, 0), 0.0);
        assert_eq!(at(0, 1), 1.0);
        assert_eq!(at(1, 1), 3.0);
        assert_eq!(at(2, 1), 2.0);
        // conservation: counted + dropped == total
        let total: f64 = binned.tensor.data.values().iter().sum();
        assert_eq!(total as usize + binned.dropped, events.len());
    }

    #[test]
    fn grid_binning_and_out_of_bounds_drop() {
        let grid = GridSpec {
            origin_lat: 30.6,
            origin_lon: 104.0,
            rows: 2,
            cols: 2,
            cell_km: 1.0,
        };
        let inside = EventRecord {
            start_time: event_at((8, 0, 0), "x").start_time,
            end_time: None,
            start_loc: LocRef::LatLon(30.6001, 104.0001),
            end_loc: None,
        };
        let far = EventRecord {
            start_loc: LocRef::LatLon(31.5, 104.0),
            ..inside.clone()
        };
        let binned = events_to_tensor(
            &[inside, far],
            &Locations::Grid(grid.clone()),
            60,
            CountField::Start,
        )
        .unwrap();
        assert_eq!(binned.dropped, 1);
        assert_eq!(binned.tensor.value(8, 0), 1.0);

        // each in-bounds point maps to exactly one cell
        let dlat = 1.0 / KM_PER_DEG_LAT;
        let mut hits = vec![0; 4];
        for (rlat, rlon) in [(0.2, 0.2), (0.2, 1.7), (1.7, 0.2), (1.7, 1.7)] {
            let lat = 30.6 + rlat * dlat;
            let lon = 104.0 + rlon * (dlat / 30.6_f64.to_radians().cos());
            hits[grid.cell_of(lat, lon).unwrap()] += 1;
        }
        assert_eq!(hits, vec![1, 1, 1, 1]);
    }

    #[test]
    fn od_matrix_counts_directed_trips() {
        let reg = Locations::Stations(registry_abc());
        let mut trip = event_at((8, 0, 0), "a");
        trip.end_loc = Some(LocRef::Station("b".into()));
        trip.end_time = Some(trip.start_time + chrono::Duration::minutes(10));
        let od = build_od_matrix(&[trip.clone()], &reg);
        assert_eq!(od.at(0, 1), 1.0);
        assert_eq!(od.at(1, 0), 0.0);

        // without end locations the matrix stays zero
        let od = build_od_matrix(&[event_at((8, 0, 0), "a")], &reg);
        assert!(od.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn od_matrix_five_trip_fixture() {
        let reg = Locations::Stations(registry_abc());
        let mk = |from: &str, to: &str| {
            let mut e = event_at((8, 0, 0), from);
            e.end_loc = Some(LocRef::Station(to.into()));
            e.end_time = Some(e.start_time);
            e
        };
        let trips = vec![mk("a", "b"), mk("a", "b"), mk("b", "a"), mk("c", "c"), mk("a", "c")];
        let od = build_od_matrix(&trips, &reg);
        assert_eq!(od.at(0, 1), 2.0);
        assert_eq!(od.at(1, 0), 1.0);
        assert_eq!(od.at(2, 2), 1.0, "diagonal allowed");
        assert_eq!(od.at(0, 2), 1.0);
        assert_eq!(od.values().iter().sum::<f64>(), 5.0);
    }

    #[test]
    fn registry_round_trip_and_duplicate_rejection() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("registry.csv");
        let reg = registry_abc();
        reg.save_csv(&path).unwrap();
        let back = StationRegistry::load_csv(&path).unwrap();
        assert_eq!(reg.stations(), back.stations());

        assert!(StationRegistry::new(vec![
            Station { id: "a".into(), lat: 0.0, lon: 0.0, lines: vec![] },
            Station { id: "a".into(), lat: 1.0, lon: 1.0, lines: vec![] },
        ])
        .is_err());
    }
}
