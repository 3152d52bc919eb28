//! Per-day and per-address scheme metrics.
//!
//! Daily: transaction volume (DTV), money flow under an aggregate (DMF),
//! flow rate (DFR), Gini index of daily net income (DGI) and net difference
//! (DND). Per address and day: net income (DNI), net spending (DNS), net
//! worth (DNW = DNI - DNS), and over the hyperoperation phase the cumulative
//! net worth (TNW), its per-transaction normalisation and the cumulative
//! victim ratio (CVR).
//!
//! Money stays in satoshi until a value is reported, at which point the day's
//! quote converts it to cents.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use chrono::NaiveDate;
use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::coredata::money::{usd_of, usd_of_priced_sum, usd_of_ratio, usd_of_signed};
use crate::coredata::{DayRange, SchemeDataset, Usd};
use crate::error::Result;
use crate::txclass::{TxKind, TypedTx};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AggregateKind {
    Sum,
    Mean,
    Max,
}

/// Which addresses enter the daily Gini index.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GiniPopulation {
    /// Addresses sending or receiving in that day's ponzi transactions.
    #[default]
    Active,
    /// Every roster address, inactive ones contributing zero income.
    AllRoster,
}

/// Denominator of the cumulative victim ratio.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CvrDenominator {
    /// Addresses with at least one ponzi transaction so far.
    #[default]
    Active,
    AllRoster,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricOptions {
    pub gini_population: GiniPopulation,
    pub cvr_denominator: CvrDenominator,
}

/// Number of typed transactions dated `day`.
pub fn dtv(ds: &SchemeDataset, day: NaiveDate) -> usize {
    ds.on_day(day).len()
}

/// Money a transaction contributes to the daily flow: roster outputs for
/// deposits and ponzi transactions, roster inputs for withdrawals.
pub fn dmf_contribution(t: &TypedTx) -> u64 {
    match t.kind {
        TxKind::Deposit | TxKind::Ponzi => t.ponzi_outputs,
        TxKind::Withdrawal => t.ponzi_inputs,
    }
}

/// DMF in satoshi as an exact ratio (the mean is not whole satoshi).
fn dmf_sat(txs: &[TypedTx], f: AggregateKind) -> (i128, i128) {
    if txs.is_empty() {
        return (0, 1);
    }
    let contributions = txs.iter().map(dmf_contribution);
    match f {
        AggregateKind::Sum => (contributions.map(|v| v as i128).sum(), 1),
        AggregateKind::Mean => (contributions.map(|v| v as i128).sum(), txs.len() as i128),
        AggregateKind::Max => (contributions.max().unwrap_or(0) as i128, 1),
    }
}

/// Daily money flow in USD; an empty day is 0 under every aggregate.
pub fn dmf(ds: &SchemeDataset, day: NaiveDate, f: AggregateKind) -> Result<Usd> {
    let txs = ds.on_day(day);
    if txs.is_empty() {
        return Ok(Usd::ZERO);
    }
    let (num, den) = dmf_sat(txs, f);
    Ok(usd_of_ratio(num, den, ds.prices().get(day)?))
}

/// DMF-sum divided by DTV; `None` on a day without transactions.
pub fn dfr(ds: &SchemeDataset, day: NaiveDate) -> Result<Option<Usd>> {
    let txs = ds.on_day(day);
    if txs.is_empty() {
        return Ok(None);
    }
    let (num, _) = dmf_sat(txs, AggregateKind::Sum);
    Ok(Some(usd_of_ratio(
        num,
        txs.len() as i128,
        ds.prices().get(day)?,
    )))
}

/// Per-address income and spending from one day's ponzi transactions.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DayFlows {
    /// address -> (dni, dns, ponzi transactions involving the address)
    pub by_addr: BTreeMap<String, AddrDay>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AddrDay {
    pub dni: u64,
    pub dns: u64,
    pub ponzi_txs: u64,
}

impl AddrDay {
    pub fn dnw(&self) -> i64 {
        self.dni as i64 - self.dns as i64
    }
}

impl DayFlows {
    pub fn of(txs: &[TypedTx]) -> Self {
        let mut by_addr: BTreeMap<String, AddrDay> = BTreeMap::new();
        for t in txs.iter().filter(|t| t.kind == TxKind::Ponzi) {
            for io in t.roster_inputs() {
                by_addr.entry(io.addr.clone()).or_default().dns += io.value;
            }
            for io in t.roster_outputs() {
                by_addr.entry(io.addr.clone()).or_default().dni += io.value;
            }
            for addr in t.roster_addresses() {
                by_addr.get_mut(addr).expect("inserted above").ponzi_txs += 1;
            }
        }
        DayFlows { by_addr }
    }

    pub fn get(&self, addr: &str) -> AddrDay {
        self.by_addr.get(addr).copied().unwrap_or_default()
    }

    /// Sum of DNW over all addresses.
    pub fn dnd_sat(&self) -> i64 {
        self.by_addr.values().map(AddrDay::dnw).sum()
    }
}

pub fn dni(ds: &SchemeDataset, addr: &str, day: NaiveDate) -> u64 {
    DayFlows::of(ds.on_day(day)).get(addr).dni
}

pub fn dns(ds: &SchemeDataset, addr: &str, day: NaiveDate) -> u64 {
    DayFlows::of(ds.on_day(day)).get(addr).dns
}

pub fn dnw(ds: &SchemeDataset, addr: &str, day: NaiveDate) -> i64 {
    DayFlows::of(ds.on_day(day)).get(addr).dnw()
}

/// Gini index as an exact ratio `sum_i sum_j |x_i - x_j| / (2 n^2 mean)`.
/// `None` for an empty population; 0 when every value is zero.
pub fn gini_ratio(values: &[u64]) -> Option<Ratio<u128>> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as i128;
    let total: i128 = values.iter().map(|&v| v as i128).sum();
    if total == 0 {
        return Some(Ratio::from_integer(0));
    }
    let mut sorted = values.to_vec();
    sorted.sort_unstable();
    // sum over ordered pairs of |x_i - x_j| = 2 * sum_i (2i - n + 1) x_(i)
    let weighted: i128 = sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| (2 * i as i128 - n + 1) * x as i128)
        .sum();
    let pairwise = 2 * weighted;
    Some(Ratio::new(pairwise as u128, (2 * n * total) as u128))
}

pub fn gini(values: &[u64]) -> Option<f64> {
    gini_ratio(values).map(|r| *r.numer() as f64 / *r.denom() as f64)
}

/// Daily Gini index of DNI values; `None` when the population is empty.
pub fn dgi(ds: &SchemeDataset, day: NaiveDate, population: GiniPopulation) -> Option<f64> {
    let flows = DayFlows::of(ds.on_day(day));
    let values: Vec<u64> = match population {
        GiniPopulation::Active => flows.by_addr.values().map(|a| a.dni).collect(),
        GiniPopulation::AllRoster => ds.roster().addresses().map(|a| flows.get(a).dni).collect(),
    };
    gini(&values)
}

pub fn dnd_sat(ds: &SchemeDataset, day: NaiveDate) -> i64 {
    DayFlows::of(ds.on_day(day)).dnd_sat()
}

/// Daily net difference in USD. Fee and leak outflows make it negative.
pub fn dnd(ds: &SchemeDataset, day: NaiveDate) -> Result<Usd> {
    let sat = dnd_sat(ds, day);
    if sat == 0 {
        return Ok(Usd::ZERO);
    }
    Ok(usd_of_signed(sat, ds.prices().get(day)?))
}

/// Sum of DND over `phase`, converted at each day's quote and rounded once.
pub fn total_dnd(ds: &SchemeDataset, phase: DayRange) -> Result<Usd> {
    priced_dnd(ds, phase, |s| s)
}

/// Sum of absolute DND over `phase`, rounded once.
pub fn total_abs_dnd(ds: &SchemeDataset, phase: DayRange) -> Result<Usd> {
    priced_dnd(ds, phase, i64::abs)
}

fn priced_dnd(ds: &SchemeDataset, phase: DayRange, f: fn(i64) -> i64) -> Result<Usd> {
    let mut items = Vec::new();
    for day in phase.days() {
        let sat = dnd_sat(ds, day);
        if sat != 0 {
            items.push((f(sat), ds.prices().get(day)?));
        }
    }
    Ok(usd_of_priced_sum(items))
}

/// Cumulative net worth divided by the number of ponzi transactions, kept
/// as an exact fraction so that rankings do not depend on rounding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TnwNorm {
    pub tnw: i64,
    pub count: u64,
}

impl TnwNorm {
    pub fn new(tnw: i64, count: u64) -> Option<Self> {
        (count > 0).then_some(TnwNorm { tnw, count })
    }

    pub fn as_f64(&self) -> f64 {
        self.tnw as f64 / self.count as f64
    }

    pub fn is_victim(&self) -> bool {
        self.tnw < 0
    }
}

impl Ord for TnwNorm {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.tnw as i128 * other.count as i128).cmp(&(other.tnw as i128 * self.count as i128))
    }
}

impl PartialOrd for TnwNorm {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Running state of one address since the start of hyperoperation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Cumulative {
    pub tnw: i64,
    pub ponzi_tx_count: u64,
    /// Sum of each day's DNW converted at that day's quote.
    pub tnw_usd: Usd,
}

impl Cumulative {
    pub fn norm(&self) -> Option<TnwNorm> {
        TnwNorm::new(self.tnw, self.ponzi_tx_count)
    }
}

/// Walks the hyperoperation days in order, calling `visit` with each day's
/// flows and the cumulative state of every address active so far.
pub fn walk_cumulative<F>(ds: &SchemeDataset, hyper: DayRange, mut visit: F) -> Result<()>
where
    F: FnMut(NaiveDate, &DayFlows, &BTreeMap<String, Cumulative>) -> Result<()>,
{
    let mut state: BTreeMap<String, Cumulative> = BTreeMap::new();
    for day in hyper.days() {
        let flows = DayFlows::of(ds.on_day(day));
        if !flows.by_addr.is_empty() {
            let price = ds.prices().get(day)?;
            for (addr, a) in &flows.by_addr {
                let c = state.entry(addr.clone()).or_default();
                c.tnw += a.dnw();
                c.ponzi_tx_count += a.ponzi_txs;
                c.tnw_usd += usd_of_signed(a.dnw(), price);
            }
        }
        visit(day, &flows, &state)?;
    }
    Ok(())
}

fn state_at(ds: &SchemeDataset, hyper: DayRange, addr: &str, day: NaiveDate) -> Result<Cumulative> {
    let mut out = Cumulative::default();
    let upto = DayRange::new(hyper.start, day.min(hyper.end))?;
    for d in upto.days() {
        let a = DayFlows::of(ds.on_day(d)).get(addr);
        out.tnw += a.dnw();
        out.ponzi_tx_count += a.ponzi_txs;
    }
    Ok(out)
}

/// Sum of DNW from the first hyperoperation day through `day`.
pub fn tnw(ds: &SchemeDataset, hyper: DayRange, addr: &str, day: NaiveDate) -> Result<i64> {
    Ok(state_at(ds, hyper, addr, day)?.tnw)
}

/// TNW per ponzi transaction; `None` before the address's first one.
pub fn tnw_norm(
    ds: &SchemeDataset,
    hyper: DayRange,
    addr: &str,
    day: NaiveDate,
) -> Result<Option<TnwNorm>> {
    Ok(state_at(ds, hyper, addr, day)?.norm())
}

/// Victim ratio from a cumulative snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VictimCount {
    pub active: usize,
    pub victims: usize,
    pub cvr: Option<f64>,
}

pub fn victim_count(
    state: &BTreeMap<String, Cumulative>,
    denominator: CvrDenominator,
    roster_size: usize,
) -> VictimCount {
    let active = state.values().filter(|c| c.ponzi_tx_count > 0).count();
    let victims = state
        .values()
        .filter(|c| c.norm().is_some_and(|n| n.is_victim()))
        .count();
    let denom = match denominator {
        CvrDenominator::Active => active,
        CvrDenominator::AllRoster => roster_size,
    };
    VictimCount {
        active,
        victims,
        cvr: (denom > 0 && active > 0).then(|| victims as f64 / denom as f64),
    }
}

/// Share of active addresses that are victims on `day`.
pub fn cvr(
    ds: &SchemeDataset,
    hyper: DayRange,
    day: NaiveDate,
    denominator: CvrDenominator,
) -> Result<Option<f64>> {
    let mut out = None;
    let upto = DayRange::new(hyper.start, day.min(hyper.end))?;
    walk_cumulative(ds, upto, |d, _, state| {
        if d == upto.end {
            out = victim_count(state, denominator, ds.roster().len()).cvr;
        }
        Ok(())
    })?;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailyReport {
    pub day: NaiveDate,
    pub dtv: usize,
    pub dmf_sum: Usd,
    pub dmf_mean: Usd,
    pub dmf_max: Usd,
    pub dfr: Option<Usd>,
    pub dgi: Option<f64>,
    pub dnd: Usd,
    pub dnd_sat: i64,
    /// Roster-input total of ponzi transactions; diagnostic only, not part of DMF.
    pub ponzi_inputs: Usd,
}

/// Headline figures of the hyperoperation phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseSummary {
    pub hyperoperation: DayRange,
    pub peak_day: NaiveDate,
    pub peak_dtv: usize,
    /// Mean over hyperoperation days with a defined DGI.
    pub mean_dgi: Option<f64>,
    pub total_dnd: Usd,
    pub total_abs_dnd: Usd,
}

/// Summarises `daily` (as produced by [`daily_reports`]) over `hyper`. The
/// peak is the earliest day of maximal DTV in the whole dataset.
pub fn summarize(
    ds: &SchemeDataset,
    hyper: DayRange,
    daily: &[DailyReport],
) -> Result<PhaseSummary> {
    let mut peak = (ds.day_range().start, 0);
    for r in daily {
        if r.dtv > peak.1 {
            peak = (r.day, r.dtv);
        }
    }
    let dgis: Vec<f64> = daily
        .iter()
        .filter(|r| hyper.contains(r.day))
        .filter_map(|r| r.dgi)
        .collect();
    Ok(PhaseSummary {
        hyperoperation: hyper,
        peak_day: peak.0,
        peak_dtv: peak.1,
        mean_dgi: (!dgis.is_empty()).then(|| dgis.iter().sum::<f64>() / dgis.len() as f64),
        total_dnd: total_dnd(ds, hyper)?,
        total_abs_dnd: total_abs_dnd(ds, hyper)?,
    })
}

pub fn daily_reports(ds: &SchemeDataset, opts: &MetricOptions) -> Result<Vec<DailyReport>> {
    ds.day_range()
        .days()
        .map(|day| {
            let txs = ds.on_day(day);
            let ponzi_in: u64 = txs
                .iter()
                .filter(|t| t.kind == TxKind::Ponzi)
                .map(|t| t.ponzi_inputs)
                .sum();
            Ok(DailyReport {
                day,
                dtv: txs.len(),
                dmf_sum: dmf(ds, day, AggregateKind::Sum)?,
                dmf_mean: dmf(ds, day, AggregateKind::Mean)?,
                dmf_max: dmf(ds, day, AggregateKind::Max)?,
                dfr: dfr(ds, day)?,
                dgi: dgi(ds, day, opts.gini_population),
                dnd: dnd(ds, day)?,
                dnd_sat: dnd_sat(ds, day),
                ponzi_inputs: if ponzi_in == 0 {
                    Usd::ZERO
                } else {
                    usd_of(ponzi_in, ds.prices().get(day)?)
                },
            })
        })
        .collect()
}

/// One address on one day with ponzi activity. Cumulative fields are only
/// defined inside the hyperoperation window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub address: String,
    pub day: NaiveDate,
    pub dni: u64,
    pub dns: u64,
    pub dnw: i64,
    pub tnw: Option<i64>,
    pub tnw_norm: Option<f64>,
    pub ponzi_tx_count: Option<u64>,
}

/// Ledger rows ordered by (address, day).
pub fn ledger(ds: &SchemeDataset, hyper: DayRange) -> Result<Vec<LedgerEntry>> {
    let mut rows = Vec::new();
    let mut state: BTreeMap<String, Cumulative> = BTreeMap::new();
    for day in ds.day_range().days() {
        let flows = DayFlows::of(ds.on_day(day));
        let in_hyper = hyper.contains(day);
        for (addr, a) in &flows.by_addr {
            let cum = in_hyper.then(|| {
                let c = state.entry(addr.clone()).or_default();
                c.tnw += a.dnw();
                c.ponzi_tx_count += a.ponzi_txs;
                *c
            });
            rows.push(LedgerEntry {
                address: addr.clone(),
                day,
                dni: a.dni,
                dns: a.dns,
                dnw: a.dnw(),
                tnw: cum.map(|c| c.tnw),
                tnw_norm: cum.and_then(|c| c.norm()).map(|n| n.as_f64()),
                ponzi_tx_count: cum.map(|c| c.ponzi_tx_count),
            });
        }
    }
    rows.sort_by(|a, b| (a.address.as_str(), a.day).cmp(&(b.address.as_str(), b.day)));
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gini_examples() {
        assert_eq!(gini(&[5, 5, 5, 5]), Some(0.0));
        assert_eq!(gini(&[10, 0, 0, 0]), Some(0.75));
        assert_eq!(gini(&[3, 1]), Some(0.25));
        assert_eq!(gini(&[0, 0]), Some(0.0));
        assert_eq!(gini(&[]), None);
        assert_eq!(gini(&[42]), Some(0.0));
    }

    #[test]
    fn tnw_norm_ordering_is_exact() {
        let a = TnwNorm::new(1, 3).unwrap();
        let b = TnwNorm::new(333_333_333, 1_000_000_000).unwrap();
        assert!(a > b);
        assert_eq!(
            TnwNorm::new(6, 2)
                .unwrap()
                .cmp(&TnwNorm::new(3, 1).unwrap()),
            Ordering::Equal
        );
        assert!(TnwNorm::new(5, 0).is_none());
        assert!(TnwNorm::new(-1, 7).unwrap().is_victim());
    }

    proptest::proptest! {
        #[test]
        fn gini_is_bounded_and_scale_free(values in proptest::collection::vec(0u64..1_000_000, 1..60), k in 1u64..50) {
            let n = values.len() as f64;
            let g = gini(&values).unwrap();
            proptest::prop_assert!(g >= 0.0);
            proptest::prop_assert!(g <= (n - 1.0) / n + 1e-12);
            let scaled: Vec<u64> = values.iter().map(|v| v * k).collect();
            proptest::prop_assert_eq!(gini_ratio(&scaled), gini_ratio(&values));
        }
    }
}
