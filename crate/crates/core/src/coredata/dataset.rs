use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::model::{PriceTable, Roster, WalletDirectory};
use crate::error::{Error, Result};
use crate::txclass::TypedTx;

/// Inclusive range of UTC calendar days.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DayRange {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl DayRange {
    pub fn new(start: NaiveDate, end: NaiveDate) -> Result<Self> {
        if end < start {
            return Err(Error::ReversedRange { start, end });
        }
        Ok(DayRange { start, end })
    }

    pub fn len(&self) -> usize {
        (self.end - self.start).num_days() as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, day: NaiveDate) -> bool {
        self.start <= day && day <= self.end
    }

    pub fn offset(&self, day: NaiveDate) -> Option<usize> {
        self.contains(day)
            .then(|| (day - self.start).num_days() as usize)
    }

    pub fn day(&self, offset: usize) -> NaiveDate {
        self.start + chrono::Days::new(offset as u64)
    }

    pub fn days(&self) -> impl Iterator<Item = NaiveDate> + '_ {
        (0..self.len()).map(|i| self.day(i))
    }
}

impl fmt::Display for DayRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.start, self.end)
    }
}

impl FromStr for DayRange {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |message: String| Error::InvalidField {
            field: "day_range",
            message,
        };
        let (a, b) = s
            .split_once("..")
            .ok_or_else(|| bad(format!("expected START..END, got {s:?}")))?;
        let start = a.trim().parse().map_err(|e| bad(format!("{a:?}: {e}")))?;
        let end = b.trim().parse().map_err(|e| bad(format!("{b:?}: {e}")))?;
        DayRange::new(start, end)
    }
}

/// Share of transactions the automatic analysis window must cover.
pub const AUTO_WINDOW_COVERAGE_PCT: usize = 98;

/// Shortest run of calendar days holding at least 98% of the given
/// transaction days; the earliest such run wins ties. `days` need not be sorted.
pub fn auto_day_range(days: &[NaiveDate]) -> Option<DayRange> {
    if days.is_empty() {
        return None;
    }
    let mut sorted = days.to_vec();
    sorted.sort_unstable();
    let n = sorted.len();
    let need = (AUTO_WINDOW_COVERAGE_PCT * n).div_ceil(100).max(1);
    let mut best: Option<(i64, usize)> = None;
    for i in 0..=(n - need) {
        let span = (sorted[i + need - 1] - sorted[i]).num_days();
        if best.is_none_or(|(b, _)| span < b) {
            best = Some((span, i));
        }
    }
    let (_, i) = best?;
    Some(DayRange {
        start: sorted[i],
        end: sorted[i + need - 1],
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildReport {
    pub day_range: DayRange,
    pub retained: usize,
    pub dropped_out_of_range: usize,
}

/// Immutable, day-indexed view of a cleaned scheme.
#[derive(Debug, Clone)]
pub struct SchemeDataset {
    txs: Vec<TypedTx>,
    by_day: Vec<Range<usize>>,
    range: DayRange,
    roster: Roster,
    wallets: WalletDirectory,
    prices: PriceTable,
}

/// Assembles a dataset. Transactions dated outside `day_range` are dropped;
/// with no explicit range the automatic 98% window is used.
pub fn build_dataset(
    typed: Vec<TypedTx>,
    roster: Roster,
    wallets: WalletDirectory,
    prices: PriceTable,
    day_range: Option<DayRange>,
) -> Result<(SchemeDataset, BuildReport)> {
    if roster.is_empty() {
        return Err(Error::EmptyRoster);
    }
    let range = match day_range {
        Some(r) => DayRange::new(r.start, r.end)?,
        None => {
            let days: Vec<_> = typed.iter().map(|t| t.day).collect();
            auto_day_range(&days).ok_or_else(|| Error::InvalidField {
                field: "day_range",
                message: "no transactions to derive a window from".into(),
            })?
        }
    };
    let total = typed.len();
    let mut txs: Vec<TypedTx> = typed
        .into_iter()
        .filter(|t| range.contains(t.day))
        .collect();
    txs.sort_by(|a, b| a.tx.order_key().cmp(&b.tx.order_key()));

    let mut by_day = vec![0..0; range.len()];
    let mut i = 0;
    for (off, slot) in by_day.iter_mut().enumerate() {
        let day = range.day(off);
        let start = i;
        while i < txs.len() && txs[i].day == day {
            i += 1;
        }
        *slot = start..i;
    }
    debug_assert_eq!(i, txs.len());

    let report = BuildReport {
        day_range: range,
        retained: txs.len(),
        dropped_out_of_range: total - txs.len(),
    };
    Ok((
        SchemeDataset {
            txs,
            by_day,
            range,
            roster,
            wallets,
            prices,
        },
        report,
    ))
}

impl SchemeDataset {
    pub fn day_range(&self) -> DayRange {
        self.range
    }

    /// All transactions, ordered by (timestamp, txid).
    pub fn transactions(&self) -> &[TypedTx] {
        &self.txs
    }

    pub fn on_day(&self, day: NaiveDate) -> &[TypedTx] {
        match self.range.offset(day) {
            Some(off) => &self.txs[self.by_day[off].clone()],
            None => &[],
        }
    }

    pub fn on_offset(&self, offset: usize) -> &[TypedTx] {
        self.by_day
            .get(offset)
            .map_or(&[][..], |r| &self.txs[r.clone()])
    }

    pub fn roster(&self) -> &Roster {
        &self.roster
    }

    pub fn wallets(&self) -> &WalletDirectory {
        &self.wallets
    }

    pub fn prices(&self) -> &PriceTable {
        &self.prices
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str) -> NaiveDate {
        s.parse().unwrap()
    }

    #[test]
    fn range_parsing() {
        let r: DayRange = "2016-01-01..2016-01-31".parse().unwrap();
        assert_eq!(r.len(), 31);
        assert_eq!(r.offset(d("2016-01-02")), Some(1));
        assert_eq!(r.offset(d("2016-02-01")), None);
        assert!(matches!(
            "2016-02-01..2016-01-01".parse::<DayRange>(),
            Err(Error::ReversedRange { .. })
        ));
    }

    #[test]
    fn auto_window_trims_sparse_tails() {
        // 100 transactions on day 10..=19, one straggler far before and one after.
        let mut days = vec![d("2015-01-01"), d("2017-01-01")];
        for i in 0..100 {
            days.push(d("2016-01-10") + chrono::Days::new(i % 10));
        }
        // 102 txs -> need 100 -> both stragglers fall outside
        let r = auto_day_range(&days).unwrap();
        assert_eq!(r, DayRange::new(d("2016-01-10"), d("2016-01-19")).unwrap());
        assert_eq!(auto_day_range(&[]), None);
        assert_eq!(auto_day_range(&[d("2016-01-01")]).unwrap().len(), 1);
    }
}
