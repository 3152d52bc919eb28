//! Lifecycle segmentation of a daily volume series into bootstrap,
//! hyperoperation and collapse.
//!
//! The hyperoperation phase is a chain of cycles. Each cycle is centred on a
//! peak and bounded by the nearest days on either side whose volume is at most
//! `peak / g`, where the growth factor `g` is 10 for the dominant (largest)
//! peak and is rescaled by the peak ratio for each neighbouring cycle. Cycles
//! are accepted outward from the dominant one while their duration stays
//! below, but within a factor `g` of, their neighbour's.

use std::ops::Range;

use chrono::NaiveDate;
use num_rational::Ratio;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::coredata::{DayRange, SchemeDataset};
use crate::error::{Error, Result};

/// Exact growth factor.
pub type Factor = Ratio<u128>;

/// Growth factor of the first (dominant) cycle.
pub const INITIAL_FACTOR: u128 = 10;

/// Daily transaction counts indexed by day offset from `origin`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VolumeSeries {
    pub vols: Vec<u64>,
    pub origin: NaiveDate,
}

impl VolumeSeries {
    pub fn from_dataset(ds: &SchemeDataset) -> Self {
        let range = ds.day_range();
        VolumeSeries {
            vols: (0..range.len())
                .map(|i| ds.on_offset(i).len() as u64)
                .collect(),
            origin: range.start,
        }
    }

    pub fn date(&self, offset: usize) -> NaiveDate {
        self.origin + chrono::Days::new(offset as u64)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cycle {
    pub starts: usize,
    pub ends: usize,
    pub peak_day: usize,
    pub duration: usize,
    pub peak_vol: u64,
    pub factor: Factor,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Phase {
    pub starts: usize,
    pub ends: usize,
    /// Chronological.
    pub cycles: Vec<Cycle>,
}

/// How cycle boundaries are located when scanning outward from a peak.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScanMode {
    /// Stop at the first qualifying day next to the peak.
    #[default]
    Nearest,
    /// Keep scanning to the range boundary and take the farthest qualifying
    /// day. Tends to merge later cycles into the first.
    Literal,
}

/// Largest volume in `[start_day, end_day)` and its earliest day.
/// An empty range yields `(0, start_day)`.
pub fn get_peak(vols: &[u64], start_day: usize, end_day: usize) -> (u64, usize) {
    let mut peak = (0, start_day);
    for (day, &v) in vols.iter().enumerate().take(end_day).skip(start_day) {
        if v > peak.0 {
            peak = (v, day);
        }
    }
    peak
}

/// 10 without a neighbouring cycle; otherwise the neighbour's factor scaled by
/// the peak ratio, floored at 1.
pub fn get_factor(neighbour: Option<&Cycle>, peak_vol: u64) -> Result<Factor> {
    let Some(prev) = neighbour else {
        return Ok(Factor::from_integer(INITIAL_FACTOR));
    };
    if prev.peak_vol == 0 {
        return Err(Error::DegenerateCycle);
    }
    let scaled = prev.factor * Factor::new(peak_vol as u128, prev.peak_vol as u128);
    Ok(scaled.max(Factor::one()))
}

fn at_or_below(vol: u64, peak_vol: u64, factor: &Factor) -> bool {
    // vol <= peak / factor, with factor > 0
    vol as u128 * factor.numer() <= peak_vol as u128 * factor.denom()
}

/// Finds the cycle around the peak of `[start_day, end_day)`.
///
/// Without a qualifying day on a side, the cycle extends to that range bound.
/// `accepted` holds the cycles found so far (chronological) and `neighbour`
/// the one the new cycle is measured against. The start day never precedes
/// the end of an accepted cycle that finishes before the new peak.
pub fn get_cycle(
    vols: &[u64],
    accepted: &[Cycle],
    neighbour: Option<&Cycle>,
    start_day: usize,
    end_day: usize,
    mode: ScanMode,
) -> Result<Cycle> {
    let (peak_vol, peak_day) = get_peak(vols, start_day, end_day);
    let factor = get_factor(neighbour, peak_vol)?;

    let mut starts = start_day;
    for day in (start_day + 1..=peak_day).rev() {
        if at_or_below(vols[day - 1], peak_vol, &factor) {
            starts = day - 1;
            if mode == ScanMode::Nearest {
                break;
            }
        }
    }
    let mut ends = end_day.max(peak_day);
    for day in peak_day..end_day {
        if at_or_below(vols[day + 1], peak_vol, &factor) {
            ends = day + 1;
            if mode == ScanMode::Nearest {
                break;
            }
        }
    }
    if let Some(prev_end) = accepted
        .iter()
        .map(|c| c.ends)
        .filter(|&e| e <= peak_day)
        .max()
    {
        starts = starts.max(prev_end);
    }
    Ok(Cycle {
        starts,
        ends,
        peak_day,
        duration: ends - starts,
        peak_vol,
        factor,
    })
}

/// Accepts a candidate whose duration is below its neighbour's but at least
/// the neighbour's duration divided by the candidate's factor.
pub fn valid_cycle(cycle: &Cycle, neighbour: &Cycle) -> bool {
    // duration >= neighbour.duration / factor
    let valid_low = cycle.duration as u128 * cycle.factor.numer()
        >= neighbour.duration as u128 * cycle.factor.denom();
    let valid_high = cycle.duration < neighbour.duration;
    valid_low && valid_high
}

/// Locates the hyperoperation phase of a volume series.
pub fn get_phase(vols: &[u64], mode: ScanMode) -> Result<Phase> {
    if vols.is_empty() {
        return Err(Error::NoPeak);
    }
    let end_day = vols.len() - 1;
    let first = get_cycle(vols, &[], None, 0, end_day, mode)?;
    if first.peak_vol == 0 {
        return Err(Error::NoPeak);
    }
    let mut cycles = vec![first];

    // Earlier cycles, each measured against the cycle just after it.
    loop {
        let earliest = &cycles[0];
        let cand = get_cycle(vols, &cycles, Some(earliest), 0, earliest.starts, mode)?;
        if !valid_cycle(&cand, earliest) {
            break;
        }
        cycles.insert(0, cand);
    }
    // Later cycles, each measured against the cycle just before it.
    loop {
        let latest = cycles.last().expect("non-empty");
        let cand = get_cycle(vols, &cycles, Some(latest), latest.ends, end_day, mode)?;
        if !valid_cycle(&cand, latest) {
            break;
        }
        cycles.push(cand);
    }
    Ok(Phase {
        starts: cycles[0].starts,
        ends: cycles.last().expect("non-empty").ends,
        cycles,
    })
}

/// The three ordered, disjoint, exhaustive lifecycle ranges (day offsets).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub bootstrap: Range<usize>,
    pub hyperoperation: Phase,
    pub collapse: Range<usize>,
}

impl Partition {
    pub fn hyper_range(&self) -> Range<usize> {
        self.hyperoperation.starts..self.hyperoperation.ends + 1
    }
}

pub fn partition(vols: &[u64], mode: ScanMode) -> Result<Partition> {
    let phase = get_phase(vols, mode)?;
    Ok(Partition {
        bootstrap: 0..phase.starts,
        collapse: phase.ends + 1..vols.len(),
        hyperoperation: phase,
    })
}

/// Renders a factor as a decimal string with at most 12 fractional digits
/// (half-even), trailing zeros removed.
pub fn factor_decimal(f: &Factor) -> String {
    const DIGITS: u32 = 12;
    let scale = 10u128.pow(DIGITS);
    let scaled = crate::coredata::money::div_round_half_even(
        (f.numer() * scale) as i128,
        *f.denom() as i128,
    ) as u128;
    let int = scaled / scale;
    let frac = scaled % scale;
    if frac.is_zero() {
        return int.to_string();
    }
    let s = format!("{:0width$}", frac, width = DIGITS as usize);
    format!("{int}.{}", s.trim_end_matches('0'))
}

fn parse_factor(s: &str) -> Option<Factor> {
    match s.split_once('/') {
        Some((n, d)) => {
            let n: u128 = n.parse().ok()?;
            let d: u128 = d.parse().ok()?;
            (d != 0).then(|| Factor::new(n, d))
        }
        None => Some(Factor::from_integer(s.parse().ok()?)),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpanJson {
    pub starts: NaiveDate,
    pub ends: NaiveDate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CycleJson {
    pub starts: NaiveDate,
    pub ends: NaiveDate,
    pub peak_day: NaiveDate,
    pub peak_vol: u64,
    pub duration: usize,
    /// Decimal rendering of the growth factor.
    pub factor: String,
    /// Exact growth factor as `numerator/denominator`.
    pub factor_exact: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HyperJson {
    pub starts: NaiveDate,
    pub ends: NaiveDate,
    pub cycles: Vec<CycleJson>,
}

/// On-disk form of a [`Partition`]; empty ranges are `null`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhasesJson {
    pub bootstrap: Option<SpanJson>,
    pub hyperoperation: HyperJson,
    pub collapse: Option<SpanJson>,
}

impl PhasesJson {
    pub fn new(p: &Partition, origin: NaiveDate) -> Self {
        let date = |off: usize| origin + chrono::Days::new(off as u64);
        let span = |r: &Range<usize>| {
            (!r.is_empty()).then(|| SpanJson {
                starts: date(r.start),
                ends: date(r.end - 1),
            })
        };
        PhasesJson {
            bootstrap: span(&p.bootstrap),
            hyperoperation: HyperJson {
                starts: date(p.hyperoperation.starts),
                ends: date(p.hyperoperation.ends),
                cycles: p
                    .hyperoperation
                    .cycles
                    .iter()
                    .map(|c| CycleJson {
                        starts: date(c.starts),
                        ends: date(c.ends),
                        peak_day: date(c.peak_day),
                        peak_vol: c.peak_vol,
                        duration: c.duration,
                        factor: factor_decimal(&c.factor),
                        factor_exact: format!("{}/{}", c.factor.numer(), c.factor.denom()),
                    })
                    .collect(),
            },
            collapse: span(&p.collapse),
        }
    }

    pub fn hyper_range(&self) -> DayRange {
        DayRange {
            start: self.hyperoperation.starts,
            end: self.hyperoperation.ends,
        }
    }

    /// Rebuilds the hyperoperation phase in day offsets relative to `origin`.
    pub fn to_phase(&self, origin: NaiveDate) -> Result<Phase> {
        let off = |d: NaiveDate| -> Result<usize> {
            let n = (d - origin).num_days();
            usize::try_from(n).map_err(|_| Error::InvalidField {
                field: "phases",
                message: format!("{d} precedes the dataset window"),
            })
        };
        let cycles = self
            .hyperoperation
            .cycles
            .iter()
            .map(|c| {
                Ok(Cycle {
                    starts: off(c.starts)?,
                    ends: off(c.ends)?,
                    peak_day: off(c.peak_day)?,
                    duration: c.duration,
                    peak_vol: c.peak_vol,
                    factor: parse_factor(&c.factor_exact).ok_or_else(|| Error::InvalidField {
                        field: "factor_exact",
                        message: c.factor_exact.clone(),
                    })?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Phase {
            starts: off(self.hyperoperation.starts)?,
            ends: off(self.hyperoperation.ends)?,
            cycles,
        })
    }
}

/// Growth factor as a float, for display.
pub fn factor_f64(f: &Factor) -> f64 {
    f.to_f64().unwrap_or(f64::NAN)
}

#[cfg(test)]
mod tests {
    use super::*;

    const THIRTEEN: [u64; 13] = [1, 1, 2, 3, 10, 100, 40, 9, 50, 8, 2, 1, 1];

    fn int(n: u128) -> Factor {
        Factor::from_integer(n)
    }

    fn cyc(starts: usize, ends: usize, peak_day: usize, peak_vol: u64, factor: Factor) -> Cycle {
        Cycle {
            starts,
            ends,
            peak_day,
            duration: ends - starts,
            peak_vol,
            factor,
        }
    }

    #[test]
    fn peaks() {
        assert_eq!(get_peak(&[1, 5, 3], 0, 3), (5, 1));
        assert_eq!(get_peak(&[1, 5, 3], 2, 2), (0, 2));
        assert_eq!(get_peak(&[2, 7, 7, 1], 0, 4), (7, 1));
    }

    #[test]
    fn factors() {
        assert_eq!(get_factor(None, 123).unwrap(), int(10));
        let prior = cyc(0, 1, 0, 100, int(10));
        assert_eq!(get_factor(Some(&prior), 50).unwrap(), int(5));
        let prior = cyc(0, 1, 0, 50, int(5));
        assert_eq!(get_factor(Some(&prior), 8).unwrap(), int(1));
        let zero = cyc(0, 1, 0, 0, int(1));
        assert!(matches!(
            get_factor(Some(&zero), 8),
            Err(Error::DegenerateCycle)
        ));
        // stays exact when the ratio does not divide
        let prior = cyc(0, 1, 0, 30, int(10));
        assert_eq!(get_factor(Some(&prior), 20).unwrap(), Factor::new(20, 3));
    }

    #[test]
    fn cycles_of_the_thirteen_day_series() {
        let v = &THIRTEEN;
        let first = get_cycle(v, &[], None, 0, 12, ScanMode::Nearest).unwrap();
        assert_eq!(first, cyc(4, 7, 5, 100, int(10)));
        let second = get_cycle(
            v,
            std::slice::from_ref(&first),
            Some(&first),
            7,
            12,
            ScanMode::Nearest,
        )
        .unwrap();
        assert_eq!(second, cyc(7, 9, 8, 50, int(5)));
        assert!(valid_cycle(&second, &first));
    }

    #[test]
    fn flat_series_falls_back_to_range_bounds() {
        let c = get_cycle(&[7, 7, 7], &[], None, 0, 2, ScanMode::Nearest).unwrap();
        assert_eq!((c.starts, c.ends), (0, 2));
    }

    #[test]
    fn validity_bounds() {
        let prior = cyc(0, 3, 1, 100, int(10));
        assert!(valid_cycle(&cyc(0, 2, 1, 50, int(5)), &prior));
        assert!(!valid_cycle(&cyc(0, 1, 0, 10, int(1)), &prior));
        assert!(!valid_cycle(&cyc(0, 3, 1, 50, int(5)), &prior));
    }

    #[test]
    fn thirteen_day_phase() {
        let p = get_phase(&THIRTEEN, ScanMode::Nearest).unwrap();
        assert_eq!((p.starts, p.ends), (4, 9));
        let peaks: Vec<_> = p.cycles.iter().map(|c| (c.peak_vol, c.peak_day)).collect();
        assert_eq!(peaks, vec![(100, 5), (50, 8)]);

        let part = partition(&THIRTEEN, ScanMode::Nearest).unwrap();
        assert_eq!(part.bootstrap, 0..4);
        assert_eq!(part.hyper_range(), 4..10);
        assert_eq!(part.collapse, 10..13);
    }

    #[test]
    fn literal_scan_takes_farthest_crossing() {
        let p = get_phase(&THIRTEEN, ScanMode::Literal).unwrap();
        // the first cycle swallows everything up to the last day
        assert_eq!(p.cycles.len(), 1);
        assert_eq!((p.starts, p.ends), (0, 12));
    }

    #[test]
    fn single_spike() {
        let part = partition(&[0, 0, 100, 0, 0], ScanMode::Nearest).unwrap();
        assert_eq!(part.hyperoperation.cycles.len(), 1);
        assert_eq!(
            (part.hyperoperation.starts, part.hyperoperation.ends),
            (1, 3)
        );
        assert_eq!(part.bootstrap, 0..1);
        assert_eq!(part.collapse, 4..5);
    }

    #[test]
    fn whole_series_phase() {
        let part = partition(&[1, 100, 1], ScanMode::Nearest).unwrap();
        assert!(part.bootstrap.is_empty());
        assert!(part.collapse.is_empty());
    }

    #[test]
    fn no_peak() {
        assert!(matches!(
            get_phase(&[0, 0, 0], ScanMode::Nearest),
            Err(Error::NoPeak)
        ));
        assert!(matches!(
            get_phase(&[], ScanMode::Nearest),
            Err(Error::NoPeak)
        ));
    }

    #[test]
    fn factor_rendering() {
        assert_eq!(factor_decimal(&int(10)), "10");
        assert_eq!(factor_decimal(&Factor::new(5, 2)), "2.5");
        assert_eq!(factor_decimal(&Factor::new(20, 3)), "6.666666666667");
        assert_eq!(parse_factor("20/3"), Some(Factor::new(20, 3)));
        assert_eq!(parse_factor("7"), Some(int(7)));
        assert_eq!(parse_factor("1/0"), None);
    }

    #[test]
    fn json_round_trip() {
        let origin = NaiveDate::from_ymd_opt(2016, 1, 1).unwrap();
        let part = partition(&THIRTEEN, ScanMode::Nearest).unwrap();
        let j = PhasesJson::new(&part, origin);
        assert_eq!(
            j.bootstrap.as_ref().unwrap().ends,
            NaiveDate::from_ymd_opt(2016, 1, 4).unwrap()
        );
        let text = serde_json::to_string(&j).unwrap();
        let back: PhasesJson = serde_json::from_str(&text).unwrap();
        assert_eq!(back.to_phase(origin).unwrap(), part.hyperoperation);
    }
}
