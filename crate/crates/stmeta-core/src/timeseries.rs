//! Slot-indexed traffic tensors and their conversion into supervised
//! samples for closeness / daily / weekly temporal factors.

use std::io::{BufRead, BufReader, Write};
use std::ops::Range;
use std::path::Path;

use chrono::{Duration, NaiveDateTime};
use thiserror::Error;

use crate::numerics::Tensor;

pub const TIME_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";

#[derive(Debug, Error)]
pub enum TimeseriesError {
    #[error("traffic tensor needs at least {needed} slots, has {got}")]
    TooFewSlots { needed: usize, got: usize },
    #[error("factor spec needs c + d + w >= 1")]
    EmptyFactorSpec,
    #[error("slot length {0} min is not one of 15/30/60")]
    BadSlotMinutes(u32),
    #[error("no sample has full history (T={t}, first valid target {first_valid})")]
    NoSamples { t: usize, first_valid: usize },
    #[error("csv i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv parse at line {line}: {what}")]
    Parse { line: usize, what: String },
}

/// Traffic history: a T×n matrix of values per (time slot, location).
#[derive(Debug, Clone, PartialEq)]
pub struct TrafficTensor {
    /// T×n, row-major: row = slot, column = location.
    pub data: Tensor,
    pub slot_minutes: u32,
    /// Wall-clock time of slot 0.
    pub origin: NaiveDateTime,
    pub location_ids: Vec<String>,
}

impl TrafficTensor {
    pub fn new(
        data: Tensor,
        slot_minutes: u32,
        origin: NaiveDateTime,
        location_ids: Vec<String>,
    ) -> Result<Self, TimeseriesError> {
        if !matches!(slot_minutes, 15 | 30 | 60) {
            return Err(TimeseriesError::BadSlotMinutes(slot_minutes));
        }
        assert_eq!(
            data.cols(),
            location_ids.len(),
            "data columns must match location count"
        );
        Ok(TrafficTensor { data, slot_minutes, origin, location_ids })
    }

    pub fn slots(&self) -> usize {
        self.data.rows()
    }

    pub fn locations(&self) -> usize {
        self.location_ids.len()
    }

    pub fn value(&self, slot: usize, loc: usize) -> f64 {
        self.data.at(slot, loc)
    }

    pub fn slot_time(&self, slot: usize) -> NaiveDateTime {
        self.origin + Duration::minutes(self.slot_minutes as i64 * slot as i64)
    }

    /// One location's series over a slot range.
    pub fn series(&self, loc: usize, slots: Range<usize>) -> Vec<f64> {
        slots.map(|t| self.value(t, loc)).collect()
    }

    /// Writes the CSV interchange form: header `slot_iso_time,<loc ids>`,
    /// one row per slot. Values are printed in shortest round-trip form,
    /// so load(save(t)) == t.
    pub fn save_csv(&self, path: &Path) -> Result<(), TimeseriesError> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        write!(out, "slot_iso_time")?;
        for id in &self.location_ids {
            write!(out, ",{id}")?;
        }
        writeln!(out)?;
        let n = self.locations();
        for t in 0..self.slots() {
            write!(out, "{}", self.slot_time(t).format(TIME_FORMAT))?;
            for i in 0..n {
                write!(out, ",{}", self.data.values()[t * n + i])?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    /// Loads the CSV interchange form. Needs at least two rows to recover
    /// the slot length from consecutive timestamps.
    pub fn load_csv(path: &Path) -> Result<Self, TimeseriesError> {
        let reader = BufReader::new(std::fs::File::open(path)?);
        let mut lines = reader.lines();
        let header = lines.next().ok_or(TimeseriesError::Parse {
            line: 1,
            what: "empty file".into(),
        })??;
        let mut cols = header.split(',');
        let first = cols.next().unwrap_or("");
        if first != "slot_iso_time" {
            return Err(TimeseriesError::Parse {
                line: 1,
                what: format!("expected header to start with slot_iso_time, got {first}"),
            });
        }
        let location_ids: Vec<String> = cols.map(str::to_string).collect();
        let n = location_ids.len();
        if n == 0 {
            return Err(TimeseriesError::Parse { line: 1, what: "no locations".into() });
        }
        let mut times = Vec::new();
        let mut values = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let lineno = i + 2;
            let mut fields = line.split(',');
            let ts = fields.next().ok_or(TimeseriesError::Parse {
                line: lineno,
                what: "missing timestamp".into(),
            })?;
            let ts = NaiveDateTime::parse_from_str(ts, TIME_FORMAT).map_err(|e| {
                TimeseriesError::Parse { line: lineno, what: format!("bad timestamp: {e}") }
            })?;
            times.push(ts);
            let mut count = 0;
            for f in fields {
                let v: f64 = f.parse().map_err(|e| TimeseriesError::Parse {
                    line: lineno,
                    what: format!("bad value {f:?}: {e}"),
                })?;
                values.push(v);
                count += 1;
            }
            if count != n {
                return Err(TimeseriesError::Parse {
                    line: lineno,
                    what: format!("expected {n} values, got {count}"),
                });
            }
        }
        if times.len() < 2 {
            return Err(TimeseriesError::TooFewSlots { needed: 2, got: times.len() });
        }
        let delta = times[1] - times[0];
        let slot_minutes = delta.num_minutes();
        if slot_minutes <= 0 {
            return Err(TimeseriesError::Parse {
                line: 3,
                what: "non-increasing timestamps".into(),
            });
        }
        let t = times.len();
        let data = Tensor::from_vec(vec![t, n], values).expect("row count enforced");
        TrafficTensor::new(data, slot_minutes as u32, times[0], location_ids)
    }
}

/// Lag counts for the closeness / daily / weekly temporal factors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct FactorSpec {
    pub closeness_lags: usize,
    pub daily_lags: usize,
    pub weekly_lags: usize,
}

impl Default for FactorSpec {
    /// Covers all three temporal knowledge factors: c=6, d=7, w=2.
    fn default() -> Self {
        FactorSpec { closeness_lags: 6, daily_lags: 7, weekly_lags: 2 }
    }
}

impl FactorSpec {
    pub fn new(c: usize, d: usize, w: usize) -> Result<Self, TimeseriesError> {
        if c + d + w == 0 {
            return Err(TimeseriesError::EmptyFactorSpec);
        }
        Ok(FactorSpec { closeness_lags: c, daily_lags: d, weekly_lags: w })
    }

    pub fn closeness_only(c: usize) -> Self {
        FactorSpec { closeness_lags: c, daily_lags: 0, weekly_lags: 0 }
    }

    pub fn slots_per_day(&self, slot_minutes: u32) -> usize {
        (1440 / slot_minutes) as usize
    }

    pub fn slots_per_week(&self, slot_minutes: u32) -> usize {
        7 * self.slots_per_day(slot_minutes)
    }

    /// First slot index with full history for every requested factor.
    pub fn first_valid_target(&self, slot_minutes: u32) -> usize {
        let spd = self.slots_per_day(slot_minutes);
        let spw = self.slots_per_week(slot_minutes);
        self.closeness_lags
            .max(self.daily_lags * spd)
            .max(self.weekly_lags * spw)
            .max(1)
    }

    /// The factors actually present, in fixed (closeness, daily, weekly)
    /// order, as (kind, lag count).
    pub fn active_factors(&self) -> Vec<(FactorKind, usize)> {
        let mut f = Vec::new();
        if self.closeness_lags > 0 {
            f.push((FactorKind::Closeness, self.closeness_lags));
        }
        if self.daily_lags > 0 {
            f.push((FactorKind::Daily, self.daily_lags));
        }
        if self.weekly_lags > 0 {
            f.push((FactorKind::Weekly, self.weekly_lags));
        }
        f
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FactorKind {
    Closeness,
    Daily,
    Weekly,
}

impl FactorKind {
    pub fn label(self) -> &'static str {
        match self {
            FactorKind::Closeness => "closeness",
            FactorKind::Daily => "daily",
            FactorKind::Weekly => "weekly",
        }
    }
}

/// Supervised samples: input lag windows per factor plus next-slot targets.
///
/// Lag windows are stored oldest→newest, S×n×lags row-major.
#[derive(Debug, Clone)]
pub struct FactorSampleSet {
    pub x_closeness: Vec<f64>,
    pub x_daily: Vec<f64>,
    pub x_weekly: Vec<f64>,
    /// S×n targets.
    pub target: Vec<f64>,
    /// Slot index of each sample's target.
    pub sample_slots: Vec<usize>,
    pub locations: usize,
    pub spec: FactorSpec,
}

impl FactorSampleSet {
    pub fn len(&self) -> usize {
        self.sample_slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sample_slots.is_empty()
    }

    fn factor_buf(&self, kind: FactorKind) -> (&[f64], usize) {
        match kind {
            FactorKind::Closeness => (&self.x_closeness, self.spec.closeness_lags),
            FactorKind::Daily => (&self.x_daily, self.spec.daily_lags),
            FactorKind::Weekly => (&self.x_weekly, self.spec.weekly_lags),
        }
    }

    /// Lag window (oldest→newest) of one factor for (sample, location).
    pub fn window(&self, kind: FactorKind, sample: usize, loc: usize) -> &[f64] {
        let (buf, lags) = self.factor_buf(kind);
        let base = (sample * self.locations + loc) * lags;
        &buf[base..base + lags]
    }

    pub fn target_at(&self, sample: usize, loc: usize) -> f64 {
        self.target[sample * self.locations + loc]
    }

    /// Value at a single lag position across every location of one sample,
    /// as an n×1 column. `step` counts oldest→newest.
    pub fn lag_column(&self, kind: FactorKind, sample: usize, step: usize) -> Vec<f64> {
        let (buf, lags) = self.factor_buf(kind);
        (0..self.locations)
            .map(|loc| buf[(sample * self.locations + loc) * lags + step])
            .collect()
    }

    /// Restricts the set to samples whose target slot lies in `slots`.
    pub fn filter_by_target_slot(&self, slots: &Range<usize>) -> FactorSampleSet {
        let keep: Vec<usize> = self
            .sample_slots
            .iter()
            .enumerate()
            .filter(|(_, t)| slots.contains(t))
            .map(|(i, _)| i)
            .collect();
        self.select(&keep)
    }

    /// Copies out the samples at the given indices, preserving order.
    pub fn select(&self, indices: &[usize]) -> FactorSampleSet {
        let n = self.locations;
        let gather = |buf: &[f64], lags: usize| -> Vec<f64> {
            let mut out = Vec::with_capacity(indices.len() * n * lags);
            for &s in indices {
                out.extend_from_slice(&buf[s * n * lags..(s + 1) * n * lags]);
            }
            out
        };
        FactorSampleSet {
            x_closeness: gather(&self.x_closeness, self.spec.closeness_lags),
            x_daily: gather(&self.x_daily, self.spec.daily_lags),
            x_weekly: gather(&self.x_weekly, self.spec.weekly_lags),
            target: gather(&self.target, 1),
            sample_slots: indices.iter().map(|&s| self.sample_slots[s]).collect(),
            locations: n,
            spec: self.spec,
        }
    }
}

/// Builds supervised samples for every slot with full factor history.
///
/// For a target slot t: closeness lags are t−c..t−1, daily lags are
/// t − j·slots_per_day (j = d..1), weekly lags t − j·slots_per_week
/// (j = w..1); each window is ordered oldest→newest. Slots lacking full
/// history are dropped.
pub fn assemble_samples(
    traffic: &TrafficTensor,
    spec: &FactorSpec,
) -> Result<FactorSampleSet, TimeseriesError> {
    if spec.closeness_lags + spec.daily_lags + spec.weekly_lags == 0 {
        return Err(TimeseriesError::EmptyFactorSpec);
    }
    let t_total = traffic.slots();
    let n = traffic.locations();
    let spd = spec.slots_per_day(traffic.slot_minutes);
    let spw = spec.slots_per_week(traffic.slot_minutes);
    let first = spec.first_valid_target(traffic.slot_minutes);
    if first >= t_total {
        return Err(TimeseriesError::NoSamples { t: t_total, first_valid: first });
    }
    let s_count = t_total - first;
    let (c, d, w) = (spec.closeness_lags, spec.daily_lags, spec.weekly_lags);
    let mut set = FactorSampleSet {
        x_closeness: Vec::with_capacity(s_count * n * c),
        x_daily: Vec::with_capacity(s_count * n * d),
        x_weekly: Vec::with_capacity(s_count * n * w),
        target: Vec::with_capacity(s_count * n),
        sample_slots: Vec::with_capacity(s_count),
        locations: n,
        spec: *spec,
    };
    for t in first..t_total {
        set.sample_slots.push(t);
        for loc in 0..n {
            for j in (1..=c).rev() {
                set.x_closeness.push(traffic.value(t - j, loc));
            }
            for j in (1..=d).rev() {
                set.x_daily.push(traffic.value(t - j * spd, loc));
            }
            for j in (1..=w).rev() {
                set.x_weekly.push(traffic.value(t - j * spw, loc));
            }
            set.target.push(traffic.value(t, loc));
        }
    }
    Ok(set)
}

/// Contiguous, disjoint train / validation / test slot ranges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitSlots {
    pub train: Range<usize>,
    pub val: Range<usize>,
    pub test: Range<usize>,
}

/// Last 10% of slots for test, the 10% before that for validation, the
/// rest for training.
pub fn split(traffic: &TrafficTensor) -> Result<SplitSlots, TimeseriesError> {
    split_slots(traffic.slots())
}

pub fn split_slots(t: usize) -> Result<SplitSlots, TimeseriesError> {
    if t < 10 {
        return Err(TimeseriesError::TooFewSlots { needed: 10, got: t });
    }
    let tenth = t / 10;
    Ok(SplitSlots {
        train: 0..t - 2 * tenth,
        val: t - 2 * tenth..t - tenth,
        test: t - tenth..t,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormalizerMode {
    Zscore,
    Minmax,
    None,
}

/// Per-location normalization whose statistics are fit on training slots
/// only.
#[derive(Debug, Clone)]
pub struct Normalizer {
    pub mode: NormalizerMode,
    /// Per location: (offset, scale) so that apply(x) = (x - offset) / scale.
    stats: Vec<(f64, f64)>,
}

const SCALE_FLOOR: f64 = 1e-8;

impl Normalizer {
    pub fn fit(traffic: &TrafficTensor, train_slots: &Range<usize>, mode: NormalizerMode) -> Self {
        let n = traffic.locations();
        let len = train_slots.len().max(1) as f64;
        let mut stats = Vec::with_capacity(n);
        for loc in 0..n {
            let stat = match mode {
                NormalizerMode::None => (0.0, 1.0),
                NormalizerMode::Zscore => {
                    let mean: f64 =
                        train_slots.clone().map(|t| traffic.value(t, loc)).sum::<f64>() / len;
                    let var: f64 = train_slots
                        .clone()
                        .map(|t| (traffic.value(t, loc) - mean).powi(2))
                        .sum::<f64>()
                        / len;
                    (mean, var.sqrt().max(SCALE_FLOOR))
                }
                NormalizerMode::Minmax => {
                    let min = train_slots
                        .clone()
                        .map(|t| traffic.value(t, loc))
                        .fold(f64::INFINITY, f64::min);
                    let max = train_slots
                        .clone()
                        .map(|t| traffic.value(t, loc))
                        .fold(f64::NEG_INFINITY, f64::max);
                    (min, (max - min).max(SCALE_FLOOR))
                }
            };
            stats.push(stat);
        }
        Normalizer { mode, stats }
    }

    pub fn apply_value(&self, loc: usize, x: f64) -> f64 {
        let (offset, scale) = self.stats[loc];
        (x - offset) / scale
    }

    pub fn invert_value(&self, loc: usize, x: f64) -> f64 {
        let (offset, scale) = self.stats[loc];
        x * scale + offset
    }

    /// Normalized copy of a whole traffic tensor.
    pub fn apply(&self, traffic: &TrafficTensor) -> TrafficTensor {
        let n = traffic.locations();
        let mut data = traffic.data.clone();
        for (i, v) in data.values_mut().iter_mut().enumerate() {
            *v = self.apply_value(i % n, *v);
        }
        TrafficTensor { data, ..traffic.clone() }
    }

    /// Inverts an S×n prediction buffer in place.
    pub fn invert_matrix(&self, values: &mut [f64], locations: usize) {
        for (i, v) in values.iter_mut().enumerate() {
            *v = self.invert_value(i % locations, *v);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn epoch() -> NaiveDateTime {
        chrono::NaiveDate::from_ymd_opt(2026, 1, 5)
            .unwrap()
            .and_hms_opt(0, 0, 0)
            .unwrap()
    }

    fn tensor_from_series(series: &[f64]) -> TrafficTensor {
        let data = Tensor::from_vec(vec![series.len(), 1], series.to_vec()).unwrap();
        TrafficTensor::new(data, 60, epoch(), vec!["s1".into()]).unwrap()
    }

    #[test]
    fn hourly_lag_arithmetic() {
        let spec = FactorSpec::new(1, 1, 1).unwrap();
        assert_eq!(spec.slots_per_day(60), 24);
        assert_eq!(spec.slots_per_week(60), 168);
        assert_eq!(spec.slots_per_day(15), 96);
    }

    #[test]
    fn closeness_only_on_short_series() {
        let t = tensor_from_series(&[1.0, 2.0, 3.0]);
        let spec = FactorSpec::closeness_only(1);
        let set = assemble_samples(&t, &spec).unwrap();
        assert_eq!(set.len(), 2);
        assert_eq!(set.window(FactorKind::Closeness, 0, 0), &[1.0]);
        assert_eq!(set.target_at(0, 0), 2.0);
        assert_eq!(set.window(FactorKind::Closeness, 1, 0), &[2.0]);
        assert_eq!(set.target_at(1, 0), 3.0);
    }

    #[test]
    fn daily_and_weekly_lags_hit_expected_slots() {
        // 2 weeks of hourly data, value = slot index, so lag values are
        // directly readable as slot indices.
        let series: Vec<f64> = (0..400).map(|t| t as f64).collect();
        let t = tensor_from_series(&series);
        let spec = FactorSpec::new(2, 1, 1).unwrap();
        let set = assemble_samples(&t, &spec).unwrap();
        assert_eq!(set.sample_slots[0], 168); // one full week of history
        assert_eq!(set.window(FactorKind::Closeness, 0, 0), &[166.0, 167.0]);
        assert_eq!(set.window(FactorKind::Daily, 0, 0), &[144.0]); // 168−24
        assert_eq!(set.window(FactorKind::Weekly, 0, 0), &[0.0]); // 168−168
        assert_eq!(set.target_at(0, 0), 168.0);
    }

    #[test]
    fn constant_series_gives_constant_lags() {
        let t = tensor_from_series(&vec![5.5; 400]);
        let spec = FactorSpec::new(3, 2, 1).unwrap();
        let set = assemble_samples(&t, &spec).unwrap();
        for s in 0..set.len() {
            assert!(set.window(FactorKind::Closeness, s, 0).iter().all(|&v| v == 5.5));
            assert!(set.window(FactorKind::Daily, s, 0).iter().all(|&v| v == 5.5));
            assert!(set.window(FactorKind::Weekly, s, 0).iter().all(|&v| v == 5.5));
            assert_eq!(set.target_at(s, 0), 5.5);
        }
    }

    #[test]
    fn insufficient_history_is_an_error() {
        let t = tensor_from_series(&[1.0; 100]); // < one week
        let spec = FactorSpec::new(1, 0, 1).unwrap();
        assert!(matches!(
            assemble_samples(&t, &spec),
            Err(TimeseriesError::NoSamples { .. })
        ));
    }

    #[test]
    fn sample_count_matches_weekly_history_cut() {
        let t = tensor_from_series(&(0..500).map(|v| v as f64).collect::<Vec<_>>());
        let spec = FactorSpec::new(4, 2, 2).unwrap();
        let set = assemble_samples(&t, &spec).unwrap();
        assert_eq!(set.len(), 500 - 2 * 168);
    }

    #[test]
    fn split_example_t100() {
        let s = split_slots(100).unwrap();
        assert_eq!(s.train, 0..80);
        assert_eq!(s.val, 80..90);
        assert_eq!(s.test, 90..100);
    }

    #[test]
    fn split_example_t10_and_too_small() {
        let s = split_slots(10).unwrap();
        assert_eq!(s.train, 0..8);
        assert_eq!(s.val, 8..9);
        assert_eq!(s.test, 9..10);
        assert!(split_slots(9).is_err());
    }

    #[test]
    fn zscore_stats_match_hand_computation() {
        // Column [1, 2, 6]: mean 3, population variance (4+1+9)/3 = 14/3.
        let t = tensor_from_series(&[1.0, 2.0, 6.0]);
        let norm = Normalizer::fit(&t, &(0..3), NormalizerMode::Zscore);
        let sigma = (14.0_f64 / 3.0).sqrt();
        let z = norm.apply_value(0, 6.0);
        assert!((z - (6.0 - 3.0) / sigma).abs() < 1e-12);
    }

    #[test]
    fn constant_column_sigma_floored() {
        let t = tensor_from_series(&[4.0; 20]);
        let norm = Normalizer::fit(&t, &(0..20), NormalizerMode::Zscore);
        assert_eq!(norm.apply_value(0, 4.0), 0.0);
        assert!(norm.apply_value(0, 5.0).is_finite());
    }

    #[test]
    fn normalizer_ignores_val_test_contents() {
        let mut series: Vec<f64> = (0..100).map(|v| v as f64).collect();
        let t1 = tensor_from_series(&series);
        for v in series[80..].iter_mut() {
            *v *= 1000.0;
        }
        let t2 = tensor_from_series(&series);
        let n1 = Normalizer::fit(&t1, &(0..80), NormalizerMode::Zscore);
        let n2 = Normalizer::fit(&t2, &(0..80), NormalizerMode::Zscore);
        assert_eq!(n1.apply_value(0, 17.0), n2.apply_value(0, 17.0));
    }

    #[test]
    fn csv_round_trip_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tensor.csv");
        let data = Tensor::from_vec(
            vec![3, 2],
            vec![0.1, 1.0 / 3.0, 2.25, -7.5e-9, 123456.789, 0.0],
        )
        .unwrap();
        let t = TrafficTensor::new(data, 30, epoch(), vec!["a".into(), "b".into()]).unwrap();
        t.save_csv(&path).unwrap();
        let back = TrafficTensor::load_csv(&path).unwrap();
        assert_eq!(t, back);
    }

    proptest! {
        #[test]
        fn no_sample_leaks_future_data(
            t_total in 340usize..500,
            c in 1usize..5,
            d in 0usize..3,
            w in 0usize..2,
        ) {
            let series: Vec<f64> = (0..t_total).map(|v| v as f64).collect();
            let tensor = tensor_from_series(&series);
            let spec = FactorSpec::new(c, d, w).unwrap();
            let set = assemble_samples(&tensor, &spec).unwrap();
            for s in 0..set.len() {
                let target_slot = set.sample_slots[s] as f64;
                for (kind, _) in spec.active_factors() {
                    for v in set.window(kind, s, 0) {
                        // values encode slot indices
                        prop_assert!(*v < target_slot);
                    }
                }
                prop_assert_eq!(set.target_at(s, 0), target_slot);
            }
        }

        #[test]
        fn split_ranges_cover_everything_disjointly(t in 10usize..700) {
            let s = split_slots(t).unwrap();
            prop_assert_eq!(s.train.start, 0);
            prop_assert_eq!(s.train.end, s.val.start);
            prop_assert_eq!(s.val.end, s.test.start);
            prop_assert_eq!(s.test.end, t);
            let tenth = t / 10;
            prop_assert_eq!(s.test.len(), tenth);
            prop_assert_eq!(s.val.len(), tenth);
        }

        #[test]
        fn normalize_round_trip(values in proptest::collection::vec(-1e4f64..1e4, 20)) {
            let tensor = tensor_from_series(&values);
            for mode in [NormalizerMode::Zscore, NormalizerMode::Minmax, NormalizerMode::None] {
                let norm = Normalizer::fit(&tensor, &(0..20), mode);
                for &v in &values {
                    let there = norm.apply_value(0, v);
                    let back = norm.invert_value(0, there);
                    prop_assert!((back - v).abs() <= 1e-9 * v.abs().max(1.0));
                }
            }
        }
    }
}
