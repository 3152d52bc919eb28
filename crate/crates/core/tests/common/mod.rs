//! Reference oracles and fixture generators shared by the integration tests
//! and the acceptance suite.
#![allow(dead_code)]

use chrono::{DateTime, Duration, NaiveDate, Utc};
use ponzi_core::coredata::{MemberRecord, Roster, TxIO, TxRecord};
use ponzi_core::phases::Phase;
use ponzi_core::txclass::{TxKind, TypedTx};
use rand::Rng;

const B58: &[u8] = b"123456789ABCDEFGHJKLMNPQRSTUVWXYZabcdefghijkmnopqrstuvwxyz";

/// Syntactically valid address: `lead` followed by `i` in base58, padded to 34 characters.
pub fn addr(lead: char, i: usize) -> String {
    let mut digits = Vec::new();
    let mut n = i;
    loop {
        digits.push(B58[n % 58] as char);
        n /= 58;
        if n == 0 {
            break;
        }
    }
    let body: String = digits.into_iter().rev().collect();
    format!("{lead}{body:1>33}")
}

pub fn txid(i: u64) -> String {
    format!("{i:064x}")
}

pub fn day0() -> NaiveDate {
    NaiveDate::from_ymd_opt(2016, 1, 1).unwrap()
}

pub fn at(day: i64, secs: i64) -> DateTime<Utc> {
    day0().and_hms_opt(0, 0, 0).unwrap().and_utc() + Duration::days(day) + Duration::seconds(secs)
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Half the relative mean absolute difference, as an unreduced fraction,
/// summed over all ordered pairs.
pub fn gini_brute(xs: &[u64]) -> Option<(u128, u128)> {
    if xs.is_empty() {
        return None;
    }
    let n = xs.len() as u128;
    let total: u128 = xs.iter().map(|&x| x as u128).sum();
    if total == 0 {
        return Some((0, 1));
    }
    let mut pairs: u128 = 0;
    for &a in xs {
        for &b in xs {
            pairs += a.abs_diff(b) as u128;
        }
    }
    // mean = total / n; G = pairs / (2 n^2 mean) = pairs / (2 n total)
    Some((pairs, 2 * n * total))
}

/// A cycle as the reference transcription records it; the factor is a
/// reduced (numerator, denominator) pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RefCycle {
    pub starts: usize,
    pub ends: usize,
    pub duration: usize,
    pub peak_vol: u64,
    pub peak_day: usize,
    pub factor: (u128, u128),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RefPhase {
    pub starts: usize,
    pub ends: usize,
    pub cycles: Vec<RefCycle>,
}

impl RefPhase {
    pub fn of(p: &Phase) -> Self {
        RefPhase {
            starts: p.starts,
            ends: p.ends,
            cycles: p
                .cycles
                .iter()
                .map(|c| RefCycle {
                    starts: c.starts,
                    ends: c.ends,
                    duration: c.duration,
                    peak_vol: c.peak_vol,
                    peak_day: c.peak_day,
                    factor: (*c.factor.numer(), *c.factor.denom()),
                })
                .collect(),
        }
    }
}

fn ref_get_peak(vols: &[u64], start_day: usize, end_day: usize) -> (u64, usize) {
    let mut peak_vol = 0;
    let mut peak_day = start_day;
    for (day, &vol) in vols.iter().enumerate().take(end_day).skip(start_day) {
        if vol > peak_vol {
            peak_vol = vol;
            peak_day = day;
        }
    }
    (peak_vol, peak_day)
}

fn ref_get_factor(last_cycle: Option<&RefCycle>, peak_vol: u64) -> (u128, u128) {
    match last_cycle {
        None => (10, 1),
        Some(last) => {
            let (fn_, fd) = last.factor;
            let n = fn_ * peak_vol as u128;
            let d = fd * last.peak_vol as u128;
            if n <= d {
                return (1, 1);
            }
            let g = gcd(n, d);
            (n / g, d / g)
        }
    }
}

fn below(vol: u64, peak_vol: u64, factor: (u128, u128)) -> bool {
    vol as u128 * factor.0 <= peak_vol as u128 * factor.1
}

fn ref_get_cycle(
    vols: &[u64],
    cycles: &[&RefCycle],
    last_cycle: Option<&RefCycle>,
    start_day: usize,
    end_day: usize,
) -> RefCycle {
    let (peak_vol, peak_day) = ref_get_peak(vols, start_day, end_day);
    let factor = ref_get_factor(last_cycle, peak_vol);
    let mut cycle = RefCycle {
        starts: start_day,
        ends: end_day.max(peak_day),
        duration: 0,
        peak_vol,
        peak_day,
        factor,
    };
    // days before the peak, nearest crossing
    let mut day = peak_day;
    while day > start_day {
        if below(vols[day - 1], peak_vol, factor) {
            cycle.starts = day - 1;
            break;
        }
        day -= 1;
    }
    // days after the peak, nearest crossing
    let mut day = peak_day;
    while day < end_day {
        if below(vols[day + 1], peak_vol, factor) {
            cycle.ends = day + 1;
            break;
        }
        day += 1;
    }
    let mut prior_end = None;
    for c in cycles {
        if c.ends <= peak_day && prior_end.is_none_or(|e| c.ends > e) {
            prior_end = Some(c.ends);
        }
    }
    if let Some(e) = prior_end {
        cycle.starts = cycle.starts.max(e);
    }
    cycle.duration = cycle.ends - cycle.starts;
    cycle
}

fn ref_valid_cycle(cycle: &RefCycle, last: &RefCycle) -> bool {
    let valid_low =
        cycle.duration as u128 * cycle.factor.0 >= last.duration as u128 * cycle.factor.1;
    let valid_high = cycle.duration < last.duration;
    valid_low && valid_high
}

/// Transcription of the hyperoperation search: first cycle over the whole
/// series, then cycles before the earliest and after the latest until one
/// fails validation. `None` when no day before the last has positive volume.
pub fn ref_get_phase(vols: &[u64]) -> Option<RefPhase> {
    if vols.is_empty() {
        return None;
    }
    let start_day = 0;
    let end_day = vols.len() - 1;
    let first = ref_get_cycle(vols, &[], None, start_day, end_day);
    if first.peak_vol == 0 {
        return None;
    }
    let mut before: Vec<RefCycle> = Vec::new();
    let mut after: Vec<RefCycle> = Vec::new();
    loop {
        let last = before.last().unwrap_or(&first);
        let all: Vec<&RefCycle> = before.iter().chain([&first]).collect();
        let cycle = ref_get_cycle(vols, &all, Some(last), start_day, last.starts);
        if ref_valid_cycle(&cycle, last) {
            before.push(cycle);
        } else {
            break;
        }
    }
    loop {
        let last = after.last().unwrap_or(&first);
        let all: Vec<&RefCycle> = before.iter().chain([&first]).chain(after.iter()).collect();
        let cycle = ref_get_cycle(vols, &all, Some(last), last.ends, end_day);
        if ref_valid_cycle(&cycle, last) {
            after.push(cycle);
        } else {
            break;
        }
    }
    let mut cycles: Vec<RefCycle> = before.into_iter().rev().collect();
    cycles.push(first);
    cycles.extend(after);
    Some(RefPhase {
        starts: cycles[0].starts,
        ends: cycles.last().unwrap().ends,
        cycles,
    })
}

/// Random daily volume series mixing noise, bumps, spikes and flat runs.
pub fn random_series<R: Rng>(rng: &mut R) -> Vec<u64> {
    let len = rng.random_range(1..=400);
    let mut v = vec![0u64; len];
    match rng.random_range(0..4) {
        0 => {
            let hi = rng.random_range(1..50);
            for x in &mut v {
                *x = rng.random_range(0..hi);
            }
        }
        1 => {
            for _ in 0..rng.random_range(1..5) {
                let centre = rng.random_range(0..len) as f64;
                let height = rng.random_range(5..5000) as f64;
                let width = rng.random_range(2..60) as f64;
                for (i, x) in v.iter_mut().enumerate() {
                    let d = (i as f64 - centre) / width;
                    *x += (height * (-d * d).exp()) as u64;
                }
            }
            for x in &mut v {
                *x += rng.random_range(0..4);
            }
        }
        2 => {
            let mut level: i64 = rng.random_range(0..100);
            for x in &mut v {
                level = (level + rng.random_range(-10..=10)).max(0);
                *x = level as u64;
            }
        }
        _ => {
            let c = rng.random_range(0..3);
            v.fill(c);
            for _ in 0..rng.random_range(0..6) {
                let i = rng.random_range(0..len);
                v[i] = rng.random_range(1..1000);
            }
        }
    }
    v
}

/// Random transactions over a small roster: deposits (some coinbase),
/// withdrawals, ponzi payments including single-member self-change ones,
/// with colliding timestamps so ties fall back to txid.
pub fn random_fixture<R: Rng>(rng: &mut R) -> (Vec<TxRecord>, Roster) {
    let members = rng.random_range(1..8);
    let roster =
        Roster::new((0..members).map(|i| MemberRecord::new(addr('1', i), format!("m{i}"))))
            .unwrap();
    let external = |rng: &mut R| {
        TxIO::new(
            addr('3', rng.random_range(0..20)),
            rng.random_range(1..1_000_000),
        )
    };
    let member = |rng: &mut R| {
        TxIO::new(
            addr('1', rng.random_range(0..members)),
            rng.random_range(1..1_000_000),
        )
    };
    let n = rng.random_range(0..40);
    let mut txs = Vec::with_capacity(n);
    for i in 0..n {
        let time = at(rng.random_range(0..6), rng.random_range(0..4) * 3600);
        let mut tx = TxRecord {
            txid: txid(rng.random_range(0..1_000_000) * 1000 + i as u64),
            time,
            coinbase: false,
            inputs: Vec::new(),
            outputs: Vec::new(),
        };
        match rng.random_range(0..5) {
            0 => {
                tx.coinbase = rng.random_bool(0.3);
                if !tx.coinbase {
                    tx.inputs.push(external(rng));
                }
                tx.outputs.push(member(rng));
            }
            1 => {
                tx.inputs.push(member(rng));
                tx.outputs.push(external(rng));
            }
            2 => {
                let m = member(rng);
                tx.inputs.push(m.clone());
                tx.outputs
                    .push(TxIO::new(m.addr, rng.random_range(1..1000)));
                tx.outputs.push(external(rng));
            }
            _ => {
                for _ in 0..rng.random_range(1..3) {
                    tx.inputs.push(member(rng));
                }
                for _ in 0..rng.random_range(1..3) {
                    tx.outputs.push(member(rng));
                }
            }
        }
        if !tx.coinbase {
            let need = tx.output_total().saturating_sub(tx.input_total());
            if need > 0 {
                tx.inputs.push(TxIO::new(addr('3', 99), need));
            }
        }
        txs.push(tx);
    }
    (txs, roster)
}

fn key(t: &TypedTx) -> (DateTime<Utc>, String) {
    (t.tx.time, t.tx.txid.clone())
}

fn is_self_change(t: &TypedTx) -> bool {
    t.kind == TxKind::Ponzi && t.roster_addresses().len() == 1
}

/// Brute-force cleaning: rule by rule, each deposit and withdrawal checked
/// against every surviving ponzi transaction. Returns kept txids sorted by
/// (time, txid).
pub fn ref_clean(typed: &[TypedTx]) -> Vec<String> {
    let ponzi: Vec<&TypedTx> = typed
        .iter()
        .filter(|t| t.kind == TxKind::Ponzi && !is_self_change(t))
        .collect();
    let mut kept: Vec<&TypedTx> = typed
        .iter()
        .filter(|t| match t.kind {
            TxKind::Deposit if t.tx.coinbase => false,
            TxKind::Ponzi => !is_self_change(t),
            TxKind::Deposit => t.roster_outputs().any(|o| {
                ponzi
                    .iter()
                    .any(|p| key(p) > key(t) && p.roster_addresses().contains(o.addr.as_str()))
            }),
            TxKind::Withdrawal => t.roster_inputs().any(|i| {
                ponzi
                    .iter()
                    .any(|p| key(p) < key(t) && p.roster_addresses().contains(i.addr.as_str()))
            }),
        })
        .collect();
    kept.sort_by_key(|t| key(t));
    kept.into_iter().map(|t| t.tx.txid.clone()).collect()
}

/// Temporal invariants of a cleaned set; returns the first violation.
pub fn check_clean_invariants(kept: &[TypedTx]) -> Result<(), String> {
    let ponzi: Vec<&TypedTx> = kept.iter().filter(|t| t.kind == TxKind::Ponzi).collect();
    for t in kept {
        match t.kind {
            TxKind::Deposit if t.tx.coinbase => {
                return Err(format!("coinbase deposit {}", t.tx.txid))
            }
            TxKind::Ponzi if is_self_change(t) => {
                return Err(format!("self-change ponzi {}", t.tx.txid))
            }
            TxKind::Deposit => {
                let ok = t.roster_outputs().any(|o| {
                    ponzi
                        .iter()
                        .any(|p| key(p) > key(t) && p.roster_addresses().contains(o.addr.as_str()))
                });
                if !ok {
                    return Err(format!("deposit {} not followed", t.tx.txid));
                }
            }
            TxKind::Withdrawal => {
                let ok = t.roster_inputs().any(|i| {
                    ponzi
                        .iter()
                        .any(|p| key(p) < key(t) && p.roster_addresses().contains(i.addr.as_str()))
                });
                if !ok {
                    return Err(format!("withdrawal {} not preceded", t.tx.txid));
                }
            }
            TxKind::Ponzi => {}
        }
    }
    Ok(())
}

pub const COUNTRIES: [&str; 4] = ["IN", "ID", "TH", "NG"];

/// Ponzi transactions whose outputs all go to roster members with a
/// country and whose inputs may include outsiders; no fee.
pub fn random_geo_fixture<R: Rng>(rng: &mut R) -> (Vec<TxRecord>, Roster) {
    let members = rng.random_range(2..12);
    let roster =
        Roster::new((0..members).map(|i| {
            MemberRecord::new(addr('1', i), format!("m{i}")).with_country(COUNTRIES[i % 4])
        }))
        .unwrap();
    let mut txs = Vec::new();
    for i in 0..rng.random_range(1..20) {
        let mut tx = TxRecord {
            txid: txid(i),
            time: at(0, i as i64),
            coinbase: false,
            inputs: Vec::new(),
            outputs: Vec::new(),
        };
        for _ in 0..rng.random_range(1..4) {
            tx.inputs.push(TxIO::new(
                addr('1', rng.random_range(0..members)),
                rng.random_range(1..10_000_000),
            ));
        }
        if rng.random_bool(0.3) {
            tx.inputs
                .push(TxIO::new(addr('3', 1), rng.random_range(1..10_000_000)));
        }
        let mut left = tx.input_total();
        let outs = rng.random_range(1..4);
        for k in 0..outs {
            let v = if k + 1 == outs {
                left
            } else {
                rng.random_range(0..=left)
            };
            left -= v;
            if v > 0 {
                tx.outputs
                    .push(TxIO::new(addr('1', rng.random_range(0..members)), v));
            }
        }
        txs.push(tx);
    }
    (txs, roster)
}
