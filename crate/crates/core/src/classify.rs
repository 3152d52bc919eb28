//! Member classification over the hyperoperation phase: victim labels, daily
//! top-k rankings by normalised cumulative net worth, likely scammers (those
//! ranked in every calendar month) and the scammer report.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use chrono::{Datelike, Months, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::coredata::money::usd_of;
use crate::coredata::{DayRange, SchemeDataset, Usd, UNPARSEABLE};
use crate::error::{Error, Result};
use crate::metrics::{victim_count, walk_cumulative, Cumulative, CvrDenominator, VictimCount};
use crate::txclass::{TxKind, TypedTx};

/// Ranking depth used for the scammer heuristic.
pub const TOP_K: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Victim,
    NonVictim,
    Unlabeled,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemberLabel {
    pub address: String,
    pub day: NaiveDate,
    pub label: Label,
}

pub fn label_of(c: Option<&Cumulative>) -> Label {
    match c.and_then(Cumulative::norm) {
        None => Label::Unlabeled,
        Some(n) if n.is_victim() => Label::Victim,
        Some(_) => Label::NonVictim,
    }
}

/// Labels of every roster address on `day`.
pub fn labels_on(ds: &SchemeDataset, hyper: DayRange, day: NaiveDate) -> Result<Vec<MemberLabel>> {
    let mut out = Vec::new();
    let upto = DayRange::new(hyper.start, day.min(hyper.end))?;
    walk_cumulative(ds, upto, |d, _, state| {
        if d == upto.end {
            out = ds
                .roster()
                .addresses()
                .map(|a| MemberLabel {
                    address: a.to_string(),
                    day,
                    label: label_of(state.get(a)),
                })
                .collect();
        }
        Ok(())
    })?;
    Ok(out)
}

/// Top `k` active addresses by TNW-norm, descending, ties by address.
pub fn top_k(state: &BTreeMap<String, Cumulative>, k: usize) -> Vec<String> {
    let mut ranked: Vec<_> = state
        .iter()
        .filter_map(|(a, c)| c.norm().map(|n| (n, a)))
        .collect();
    ranked.sort_by(|(na, a), (nb, b)| nb.cmp(na).then_with(|| a.cmp(b)));
    ranked.into_iter().take(k).map(|(_, a)| a.clone()).collect()
}

pub fn rank_daily(
    ds: &SchemeDataset,
    hyper: DayRange,
    day: NaiveDate,
    k: usize,
) -> Result<Vec<String>> {
    let mut out = Vec::new();
    let upto = DayRange::new(hyper.start, day.min(hyper.end))?;
    walk_cumulative(ds, upto, |d, _, state| {
        if d == upto.end {
            out = top_k(state, k);
        }
        Ok(())
    })?;
    Ok(out)
}

/// Daily top-k lists for every hyperoperation day.
pub fn daily_rankings(
    ds: &SchemeDataset,
    hyper: DayRange,
    k: usize,
) -> Result<Vec<(NaiveDate, Vec<String>)>> {
    let mut out = Vec::with_capacity(hyper.len());
    walk_cumulative(ds, hyper, |d, _, state| {
        out.push((d, top_k(state, k)));
        Ok(())
    })?;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScammerOptions {
    pub k: usize,
    /// Ignore calendar months only partly covered by the phase.
    pub require_full_months: bool,
}

impl Default for ScammerOptions {
    fn default() -> Self {
        ScammerOptions {
            k: TOP_K,
            require_full_months: false,
        }
    }
}

fn month_start(d: NaiveDate) -> NaiveDate {
    d.with_day(1).expect("day 1 exists")
}

fn month_end(d: NaiveDate) -> NaiveDate {
    month_start(d) + Months::new(1) - chrono::Days::new(1)
}

/// Calendar months (as their first day) that count for the phase.
pub fn phase_months(hyper: DayRange, require_full: bool) -> Result<Vec<NaiveDate>> {
    let too_short = Error::PhaseTooShort {
        start: hyper.start,
        end: hyper.end,
    };
    if hyper
        .end
        .succ_opt()
        .is_none_or(|next| next < hyper.start + Months::new(1))
    {
        return Err(too_short);
    }
    let mut months = Vec::new();
    let mut m = month_start(hyper.start);
    while m <= hyper.end {
        if !require_full || (m >= hyper.start && month_end(m) <= hyper.end) {
            months.push(m);
        }
        m = m + Months::new(1);
    }
    if months.is_empty() {
        return Err(too_short);
    }
    Ok(months)
}

/// Union of daily top-k lists per counted month.
pub fn monthly_sets(
    rankings: &[(NaiveDate, Vec<String>)],
    hyper: DayRange,
    require_full: bool,
) -> Result<BTreeMap<NaiveDate, BTreeSet<String>>> {
    let mut sets: BTreeMap<NaiveDate, BTreeSet<String>> = phase_months(hyper, require_full)?
        .into_iter()
        .map(|m| (m, BTreeSet::new()))
        .collect();
    for (day, top) in rankings {
        if let Some(set) = sets.get_mut(&month_start(*day)) {
            set.extend(top.iter().cloned());
        }
    }
    Ok(sets)
}

/// Addresses ranked in the daily top-k at least once in every month of the
/// phase.
pub fn likely_scammers(
    ds: &SchemeDataset,
    hyper: DayRange,
    opts: &ScammerOptions,
) -> Result<BTreeSet<String>> {
    let rankings = daily_rankings(ds, hyper, opts.k)?;
    let sets = monthly_sets(&rankings, hyper, opts.require_full_months)?;
    let mut iter = sets.into_values();
    let first = iter.next().unwrap_or_default();
    Ok(iter.fold(first, |acc, s| acc.intersection(&s).cloned().collect()))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counterparty {
    pub address: String,
    pub wallet_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScammerRow {
    pub address: String,
    pub final_tnw_sat: i64,
    pub final_tnw: Usd,
    pub wallet_size: usize,
    pub registration_date: Option<NaiveDate>,
    pub top_deposit_from: Option<Counterparty>,
    pub top_withdrawal_to: Option<Counterparty>,
}

fn largest<'a>(ios: impl Iterator<Item = (&'a str, u64)>) -> Option<&'a str> {
    let mut best: Option<(&str, u64)> = None;
    for (a, v) in ios {
        if a != UNPARSEABLE && best.is_none_or(|(_, bv)| v > bv) {
            best = Some((a, v));
        }
    }
    best.map(|(a, _)| a)
}

/// Counterparty of the largest-USD transaction of `kind` touching `addr`.
fn top_counterparty(ds: &SchemeDataset, addr: &str, kind: TxKind) -> Result<Option<Counterparty>> {
    let mut best: Option<(Usd, &TypedTx)> = None;
    for t in ds.transactions().iter().filter(|t| t.kind == kind) {
        let sat: u64 = match kind {
            TxKind::Deposit => t
                .roster_outputs()
                .filter(|io| io.addr == addr)
                .map(|io| io.value)
                .sum(),
            _ => t
                .roster_inputs()
                .filter(|io| io.addr == addr)
                .map(|io| io.value)
                .sum(),
        };
        if sat == 0 {
            continue;
        }
        let usd = usd_of(sat, ds.prices().get(t.day)?);
        if best.is_none_or(|(b, _)| usd > b) {
            best = Some((usd, t));
        }
    }
    let Some((_, t)) = best else {
        return Ok(None);
    };
    let roster = ds.roster();
    let address = match kind {
        TxKind::Deposit => largest(t.tx.inputs.iter().map(|io| (io.addr.as_str(), io.value))),
        _ => largest(
            t.tx.outputs
                .iter()
                .filter(|io| !roster.contains(&io.addr))
                .map(|io| (io.addr.as_str(), io.value)),
        ),
    };
    Ok(address.map(|a| Counterparty {
        address: a.to_string(),
        wallet_id: ds.wallets().wallet_id(a).to_string(),
    }))
}

/// Report rows ordered by final TNW descending, then address.
pub fn scammer_report(
    ds: &SchemeDataset,
    hyper: DayRange,
    addresses: &BTreeSet<String>,
) -> Result<Vec<ScammerRow>> {
    let mut final_state = BTreeMap::new();
    walk_cumulative(ds, hyper, |d, _, state| {
        if d == hyper.end {
            final_state = state.clone();
        }
        Ok(())
    })?;
    let mut rows = Vec::with_capacity(addresses.len());
    for addr in addresses {
        let c = final_state.get(addr).copied().unwrap_or_default();
        rows.push(ScammerRow {
            address: addr.clone(),
            final_tnw_sat: c.tnw,
            final_tnw: c.tnw_usd,
            wallet_size: ds.wallets().wallet_size(addr),
            registration_date: ds.roster().get(addr).and_then(|m| m.registration_date),
            top_deposit_from: top_counterparty(ds, addr, TxKind::Deposit)?,
            top_withdrawal_to: top_counterparty(ds, addr, TxKind::Withdrawal)?,
        });
    }
    rows.sort_by(|a, b| {
        b.final_tnw
            .cmp(&a.final_tnw)
            .then_with(|| a.address.cmp(&b.address))
    });
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VictimDay {
    pub day: NaiveDate,
    #[serde(flatten)]
    pub count: VictimCount,
}

pub fn victim_series(
    ds: &SchemeDataset,
    hyper: DayRange,
    denominator: CvrDenominator,
) -> Result<Vec<VictimDay>> {
    let mut out = Vec::with_capacity(hyper.len());
    walk_cumulative(ds, hyper, |day, _, state| {
        out.push(VictimDay {
            day,
            count: victim_count(state, denominator, ds.roster().len()),
        });
        Ok(())
    })?;
    Ok(out)
}

pub fn write_scammers_csv<W: Write>(w: W, rows: &[ScammerRow]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record([
        "address",
        "final_tnw_usd",
        "final_tnw_sat",
        "wallet_size",
        "registration_date",
        "top_deposit_from",
        "top_deposit_from_wallet",
        "top_withdrawal_to",
        "top_withdrawal_to_wallet",
    ])?;
    let cp = |c: &Option<Counterparty>| match c {
        Some(c) => (c.address.clone(), c.wallet_id.clone()),
        None => (String::new(), String::new()),
    };
    for r in rows {
        let (dep, dep_w) = cp(&r.top_deposit_from);
        let (wd, wd_w) = cp(&r.top_withdrawal_to);
        wtr.write_record([
            r.address.clone(),
            r.final_tnw.to_string(),
            r.final_tnw_sat.to_string(),
            r.wallet_size.to_string(),
            r.registration_date
                .map(|d| d.to_string())
                .unwrap_or_default(),
            dep,
            dep_w,
            wd,
            wd_w,
        ])?;
    }
    wtr.flush().map_err(|e| Error::io("<scammers>", e))?;
    Ok(())
}

pub fn write_victims_csv<W: Write>(w: W, rows: &[VictimDay]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["day", "cvr", "active_count", "victim_count"])?;
    for r in rows {
        wtr.write_record([
            r.day.to_string(),
            r.count.cvr.map(|c| c.to_string()).unwrap_or_default(),
            r.count.active.to_string(),
            r.count.victims.to_string(),
        ])?;
    }
    wtr.flush().map_err(|e| Error::io("<victims>", e))?;
    Ok(())
}
