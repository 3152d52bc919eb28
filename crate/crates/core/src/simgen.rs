//! Deterministic synthetic scheme generator with ground-truth labels.
//!
//! The daily transaction volume follows a configured envelope: a linear
//! bootstrap ramp, one log-linear rise and fall per configured cycle, and a
//! geometric collapse. Every cycle boundary sits exactly at one tenth of the
//! dominant peak, which is where the lifecycle detector draws its lines, so
//! the generated phase bounds and peaks are known exactly.
//!
//! Ponzi transactions run through a FIFO pool: the oldest pool member pays a
//! fresh member, which joins the pool. Every ponzi transaction also pays a
//! skim to each scammer that exceeds any member payment, so scammers top the
//! daily rankings throughout. Deposits land on members with later ponzi
//! activity and withdrawals leave members with earlier activity, so cleaning
//! keeps every generated transaction.
//!
//! Randomness comes from ChaCha8 (`rand_chacha` 0.9, `seed_from_u64`); the
//! identifier is recorded in the ground truth.

use std::collections::{BTreeMap, VecDeque};

use chrono::{DateTime, Days, NaiveDate, Utc};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::coredata::country::is_alpha2;
use crate::coredata::{
    write_prices, write_roster, write_transactions, write_wallets, Category, DayRange, Gender,
    MemberRecord, Price, PriceTable, TxIO, TxRecord, WalletDirectory, WalletEntry,
};
use crate::error::{Error, Result};
use crate::phases::{get_phase, ScanMode};

pub const PRNG_ID: &str = "ChaCha8Rng (rand_chacha 0.9, seed_from_u64)";

/// Smallest and largest member payment in a ponzi transaction, in satoshi.
const PAYMENT_MIN: u64 = 1_000_000;
const PAYMENT_MAX: u64 = 50_000_000;
/// Transactions of one kind are spaced one second apart inside an 8-hour slot.
const SLOT_SECONDS: u64 = 8 * 3600;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CycleSpec {
    pub peak_day: usize,
    pub peak_dtv: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CountryWeight {
    pub code: String,
    pub weight: f64,
}

fn default_decay() -> f64 {
    0.6
}
fn default_deposit_rate() -> f64 {
    0.6
}
fn default_withdrawal_rate() -> f64 {
    0.4
}
fn default_start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2016, 1, 1).expect("valid date")
}
fn default_price() -> String {
    "400.00".into()
}
fn default_ponzi_share() -> f64 {
    0.34
}
fn default_pool() -> usize {
    15
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub seed: u64,
    pub members: usize,
    pub scammers: usize,
    pub days: usize,
    pub bootstrap_days: usize,
    pub cycles: Vec<CycleSpec>,
    #[serde(default = "default_decay")]
    pub collapse_decay: f64,
    #[serde(default)]
    pub leak_fraction: f64,
    #[serde(default)]
    pub fee_sat: u64,
    pub countries: Vec<CountryWeight>,
    /// Relative weight of deposits among non-ponzi transactions.
    #[serde(default = "default_deposit_rate")]
    pub deposit_rate: f64,
    /// Relative weight of withdrawals among non-ponzi transactions.
    #[serde(default = "default_withdrawal_rate")]
    pub withdrawal_rate: f64,
    #[serde(default = "default_start")]
    pub start_date: NaiveDate,
    /// Constant BTC quote for every generated day.
    #[serde(default = "default_price")]
    pub usd_per_btc: String,
    /// Fraction of each day's volume that is ponzi transactions.
    #[serde(default = "default_ponzi_share")]
    pub ponzi_share: f64,
    /// Members waiting in the payout queue.
    #[serde(default = "default_pool")]
    pub pool_size: usize,
}

impl SimConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidField {
            field: "config",
            message: e.to_string(),
        })
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InfeasibleConfig(m));
        if self.scammers == 0 || self.scammers >= self.members {
            return bad(format!(
                "need 0 < scammers < members, got {} and {}",
                self.scammers, self.members
            ));
        }
        if self.cycles.is_empty() {
            return bad("at least one cycle is required".into());
        }
        let mut prev = None;
        for c in &self.cycles {
            if c.peak_day <= self.bootstrap_days || c.peak_day >= self.days {
                return bad(format!(
                    "peak day {} outside ({}, {})",
                    c.peak_day, self.bootstrap_days, self.days
                ));
            }
            if prev.is_some_and(|p| c.peak_day < p + 2) {
                return bad("peak days must increase by at least 2".into());
            }
            if c.peak_dtv > SLOT_SECONDS {
                return bad(format!("peak volume {} above {SLOT_SECONDS}", c.peak_dtv));
            }
            prev = Some(c.peak_day);
        }
        if self.countries.is_empty() {
            return bad("no countries".into());
        }
        for c in &self.countries {
            if !is_alpha2(&c.code) || !(c.weight > 0.0 && c.weight.is_finite()) {
                return bad(format!(
                    "bad country entry {:?} weight {}",
                    c.code, c.weight
                ));
            }
        }
        let unit = |x: f64| (0.0..1.0).contains(&x);
        if !(self.collapse_decay > 0.0 && self.collapse_decay < 1.0) {
            return bad("collapse_decay must lie in (0, 1)".into());
        }
        if !unit(self.leak_fraction) {
            return bad("leak_fraction must lie in [0, 1)".into());
        }
        if !(self.ponzi_share > 0.0 && self.ponzi_share <= 1.0) {
            return bad("ponzi_share must lie in (0, 1]".into());
        }
        if !(self.deposit_rate >= 0.0
            && self.withdrawal_rate >= 0.0
            && self.deposit_rate + self.withdrawal_rate > 0.0)
        {
            return bad(
                "deposit_rate and withdrawal_rate must be non-negative, not both zero".into(),
            );
        }
        if self.pool_size == 0 {
            return bad("pool_size must be positive".into());
        }
        Ok(())
    }
}

/// Day offsets of the generated lifecycle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Envelope {
    pub vols: Vec<u64>,
    /// Cycle boundaries: `bounds[0]` starts hyperoperation, `bounds[k]` ends cycle k.
    pub bounds: Vec<usize>,
    pub peaks: Vec<usize>,
}

/// Builds the daily volume envelope and checks that lifecycle detection
/// recovers it exactly.
pub fn envelope(cfg: &SimConfig) -> Result<Envelope> {
    cfg.validate()?;
    let pmax = cfg
        .cycles
        .iter()
        .map(|c| c.peak_dtv)
        .max()
        .expect("non-empty");
    let floor = pmax / 10;
    if floor == 0 {
        return Err(Error::InfeasibleConfig(
            "largest peak must be at least 10".into(),
        ));
    }
    let k = cfg.cycles.len();
    let mut bounds = vec![cfg.bootstrap_days];
    for w in cfg.cycles.windows(2) {
        bounds.push((w[0].peak_day + w[1].peak_day) / 2);
    }
    let last = &cfg.cycles[k - 1];
    bounds.push(2 * last.peak_day - bounds[k - 1]);
    if bounds[k] >= cfg.days {
        return Err(Error::InfeasibleConfig(format!(
            "last cycle ends on day {} but only {} days are generated",
            bounds[k], cfg.days
        )));
    }

    let mut vols = vec![0u64; cfg.days];
    for (t, v) in vols.iter_mut().enumerate().take(cfg.bootstrap_days) {
        *v = floor * (t as u64 + 1) / (cfg.bootstrap_days as u64 + 1);
    }
    for (i, c) in cfg.cycles.iter().enumerate() {
        if c.peak_dtv < floor + 2 {
            return Err(Error::InfeasibleConfig(format!(
                "peak {} on day {} is too close to the boundary volume {floor}",
                c.peak_dtv, c.peak_day
            )));
        }
        let (s, p, e) = (bounds[i], c.peak_day, bounds[i + 1]);
        let ratio = c.peak_dtv as f64 / floor as f64;
        let level = |x: f64| {
            ((floor as f64 * ratio.powf(x)).ceil() as u64).clamp(floor + 1, c.peak_dtv - 1)
        };
        vols[s] = floor;
        for (t, v) in vols.iter_mut().enumerate().take(p).skip(s + 1) {
            *v = level((t - s) as f64 / (p - s) as f64);
        }
        vols[p] = c.peak_dtv;
        for (t, v) in vols.iter_mut().enumerate().take(e).skip(p + 1) {
            *v = level((e - t) as f64 / (e - p) as f64);
        }
        vols[e] = floor;
    }
    let mut level = floor as f64;
    for v in vols.iter_mut().skip(bounds[k] + 1) {
        level *= cfg.collapse_decay;
        *v = level.floor() as u64;
    }

    let phase = get_phase(&vols, ScanMode::Nearest)?;
    let peaks: Vec<usize> = cfg.cycles.iter().map(|c| c.peak_day).collect();
    let found: Vec<usize> = phase.cycles.iter().map(|c| c.peak_day).collect();
    if phase.starts != bounds[0] || phase.ends != bounds[k] || found != peaks {
        return Err(Error::InfeasibleConfig(format!(
            "cycle durations do not satisfy the detector's bounds: detected peaks {found:?} over {}..{}, configured {peaks:?} over {}..{}",
            phase.starts, phase.ends, bounds[0], bounds[k]
        )));
    }
    Ok(Envelope {
        vols,
        bounds,
        peaks,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeoTotal {
    pub from: String,
    pub to: String,
    pub sat: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub prng: String,
    pub seed: u64,
    pub day_range: DayRange,
    pub bootstrap_end: Option<NaiveDate>,
    pub hyper_start: NaiveDate,
    pub hyper_end: NaiveDate,
    pub peak_days: Vec<NaiveDate>,
    pub peak_dtv: Vec<u64>,
    pub daily_volume: Vec<u64>,
    pub scammer_addresses: Vec<String>,
    pub total_leak_sat: u64,
    /// Fees of ponzi transactions only; other fees never touch the net flows.
    pub total_fee_sat: u64,
    pub per_day_dnd_sat: Vec<i64>,
    /// Value paid from members of one country to members of another by
    /// ponzi transactions, self-pairs included. Proportional attribution
    /// reproduces these totals exactly when `fee_sat` is 0.
    pub geo_totals: Vec<GeoTotal>,
}

#[derive(Debug, Clone)]
pub struct SimOutput {
    pub transactions: Vec<TxRecord>,
    pub roster: Vec<MemberRecord>,
    pub wallets: WalletDirectory,
    pub prices: PriceTable,
    pub truth: GroundTruth,
}

impl SimOutput {
    /// File name and contents of every artifact, in a fixed order.
    pub fn files(&self) -> Result<Vec<(&'static str, Vec<u8>)>> {
        let mut tx = Vec::new();
        write_transactions(&mut tx, &self.transactions)?;
        let mut roster = Vec::new();
        write_roster(&mut roster, &self.roster)?;
        let mut wallets = Vec::new();
        write_wallets(&mut wallets, &self.wallets)?;
        let mut prices = Vec::new();
        write_prices(&mut prices, &self.prices)?;
        let truth = serde_json::to_vec_pretty(&self.truth)?;
        Ok(vec![
            ("transactions.ndjson", tx),
            ("roster.csv", roster),
            ("wallets.csv", wallets),
            ("prices.csv", prices),
            ("groundtruth.json", truth),
        ])
    }
}

fn p2pkh(rng: &mut ChaCha8Rng, version: u8) -> String {
    let mut payload = [0u8; 21];
    payload[0] = version;
    rng.fill(&mut payload[1..]);
    bs58::encode(payload).with_check().into_string()
}

fn txid(rng: &mut ChaCha8Rng) -> String {
    let words: [u64; 4] = rng.random();
    words.iter().map(|w| format!("{w:016x}")).collect()
}

struct Member {
    address: String,
    country: String,
}

/// Generates a scheme from `cfg`. The same configuration always yields the
/// same output.
pub fn generate(cfg: &SimConfig) -> Result<SimOutput> {
    let env = envelope(cfg)?;
    let price: Price = cfg.usd_per_btc.parse()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let ponzi_per_day: Vec<u64> = env
        .vols
        .iter()
        .map(|&v| {
            if v == 0 {
                0
            } else {
                ((v as f64 * cfg.ponzi_share).round() as u64).clamp(1, v)
            }
        })
        .collect();
    let needed = cfg.scammers + cfg.pool_size + ponzi_per_day.iter().sum::<u64>() as usize;
    if needed > cfg.members {
        return Err(Error::InfeasibleConfig(format!(
            "the envelope needs {needed} members but only {} are configured",
            cfg.members
        )));
    }

    let weights = WeightedIndex::new(cfg.countries.iter().map(|c| c.weight))
        .map_err(|e| Error::InfeasibleConfig(e.to_string()))?;
    let members: Vec<Member> = (0..cfg.members)
        .map(|_| Member {
            address: p2pkh(&mut rng, 0x00),
            country: cfg.countries[weights.sample(&mut rng)].code.clone(),
        })
        .collect();
    let roster: Vec<MemberRecord> = members
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let mut r = MemberRecord::new(&m.address, format!("m{i:06}")).with_country(&m.country);
            r.registration_date = Some(cfg.start_date - Days::new(rng.random_range(0..60)));
            r.age = Some(rng.random_range(18..=70));
            r.gender = [Gender::Male, Gender::Female, Gender::Unspecified][rng.random_range(0..3)];
            r
        })
        .collect();

    let categories = [
        Category::Exchanges,
        Category::Exchanges,
        Category::Gambling,
        Category::Mixers,
        Category::Generic,
        Category::Pools,
        Category::Darkweb,
    ];
    let mut wallet_entries = Vec::new();
    for (w, cat) in categories.iter().enumerate() {
        for _ in 0..rng.random_range(1..=3) {
            wallet_entries.push(WalletEntry {
                address: p2pkh(&mut rng, 0x05),
                wallet_id: format!("w{w:03}"),
                category: *cat,
            });
        }
    }
    let services: Vec<String> = wallet_entries.iter().map(|e| e.address.clone()).collect();

    let scammers: Vec<usize> = (0..cfg.scammers).collect();
    let mut pool: VecDeque<usize> = (cfg.scammers..cfg.scammers + cfg.pool_size).collect();
    let mut fresh = cfg.scammers + cfg.pool_size..cfg.members;

    let origin: DateTime<Utc> = cfg
        .start_date
        .and_hms_opt(0, 0, 0)
        .expect("midnight")
        .and_utc();
    let at = |day: usize, secs: u64| {
        origin + chrono::Duration::seconds((day as u64 * 86_400 + secs) as i64)
    };

    let mut txs: Vec<TxRecord> = Vec::new();
    let mut first_seen: BTreeMap<usize, DateTime<Utc>> = BTreeMap::new();
    let mut last_seen: BTreeMap<usize, DateTime<Utc>> = BTreeMap::new();
    let mut per_day_dnd = vec![0i64; cfg.days];
    let mut total_leak = 0u64;
    let mut total_fee = 0u64;
    let mut geo: BTreeMap<(String, String), u64> = BTreeMap::new();

    for (day, &n) in ponzi_per_day.iter().enumerate() {
        for i in 0..n {
            let time = at(day, SLOT_SECONDS + i);
            let sender = pool.pop_front().expect("pool never empties");
            let receiver = fresh.next().expect("member count checked above");
            pool.push_back(receiver);

            let pay = rng.random_range(PAYMENT_MIN..=PAYMENT_MAX);
            let mut outputs = vec![TxIO::new(&members[receiver].address, pay)];
            let mut paid = vec![(receiver, pay)];
            for &s in &scammers {
                let skim = rng.random_range(PAYMENT_MAX + 1..=2 * PAYMENT_MAX);
                outputs.push(TxIO::new(&members[s].address, skim));
                paid.push((s, skim));
            }
            let base: u64 = paid.iter().map(|p| p.1).sum::<u64>() + cfg.fee_sat;
            let spend = ((base as f64 / (1.0 - cfg.leak_fraction)).ceil() as u64).max(base);
            let leak = spend - base;
            if leak > 0 {
                outputs.push(TxIO::new(p2pkh(&mut rng, 0x00), leak));
            }
            total_leak += leak;
            total_fee += cfg.fee_sat;
            per_day_dnd[day] -= (leak + cfg.fee_sat) as i64;
            for &(to, v) in &paid {
                *geo.entry((members[sender].country.clone(), members[to].country.clone()))
                    .or_default() += v;
            }
            for m in std::iter::once(sender).chain(paid.iter().map(|p| p.0)) {
                first_seen.entry(m).or_insert(time);
                last_seen.insert(m, time);
            }
            txs.push(TxRecord {
                txid: txid(&mut rng),
                time,
                coinbase: false,
                inputs: vec![TxIO::new(&members[sender].address, spend)],
                outputs,
            });
        }
    }

    // Members ordered by their last and first ponzi activity, for picking
    // deposit and withdrawal parties.
    let mut by_last: Vec<(DateTime<Utc>, usize)> =
        last_seen.iter().map(|(&m, &t)| (t, m)).collect();
    by_last.sort_unstable();
    let mut by_first: Vec<(DateTime<Utc>, usize)> =
        first_seen.iter().map(|(&m, &t)| (t, m)).collect();
    by_first.sort_unstable();
    let deposit_p = cfg.deposit_rate / (cfg.deposit_rate + cfg.withdrawal_rate);

    for (day, (&v, &n)) in env.vols.iter().zip(&ponzi_per_day).enumerate() {
        for j in 0..v - n {
            let dep_time = at(day, j);
            let wd_time = at(day, 2 * SLOT_SECONDS + j);
            let dep_from = by_last.partition_point(|(t, _)| *t <= dep_time);
            let wd_to = by_first.partition_point(|(t, _)| *t < wd_time);
            let can_deposit = dep_from < by_last.len();
            let can_withdraw = wd_to > 0;
            let deposit = match (can_deposit, can_withdraw) {
                (true, true) => rng.random_bool(deposit_p),
                (d, _) => d,
            };
            let amount = rng.random_range(PAYMENT_MIN..=PAYMENT_MAX);
            let counterparty = if rng.random_bool(0.7) {
                services[rng.random_range(0..services.len())].clone()
            } else {
                p2pkh(&mut rng, 0x00)
            };
            let tx = if deposit {
                let m = by_last[rng.random_range(dep_from..by_last.len())].1;
                TxRecord {
                    txid: txid(&mut rng),
                    time: dep_time,
                    coinbase: false,
                    inputs: vec![TxIO::new(counterparty, amount + cfg.fee_sat)],
                    outputs: vec![TxIO::new(&members[m].address, amount)],
                }
            } else {
                let m = by_first[rng.random_range(0..wd_to)].1;
                TxRecord {
                    txid: txid(&mut rng),
                    time: wd_time,
                    coinbase: false,
                    inputs: vec![TxIO::new(&members[m].address, amount + cfg.fee_sat)],
                    outputs: vec![TxIO::new(counterparty, amount)],
                }
            };
            txs.push(tx);
        }
    }
    txs.sort_by(|a, b| a.order_key().cmp(&b.order_key()));

    let day_of = |off: usize| cfg.start_date + Days::new(off as u64);
    let k = env.bounds.len() - 1;
    let mut scammer_addresses: Vec<String> = scammers
        .iter()
        .map(|&s| members[s].address.clone())
        .collect();
    scammer_addresses.sort();
    let truth = GroundTruth {
        prng: PRNG_ID.into(),
        seed: cfg.seed,
        day_range: DayRange::new(cfg.start_date, day_of(cfg.days - 1))?,
        bootstrap_end: (env.bounds[0] > 0).then(|| day_of(env.bounds[0] - 1)),
        hyper_start: day_of(env.bounds[0]),
        hyper_end: day_of(env.bounds[k]),
        peak_days: env.peaks.iter().map(|&p| day_of(p)).collect(),
        peak_dtv: cfg.cycles.iter().map(|c| c.peak_dtv).collect(),
        daily_volume: env.vols.clone(),
        scammer_addresses,
        total_leak_sat: total_leak,
        total_fee_sat: total_fee,
        per_day_dnd_sat: per_day_dnd,
        geo_totals: geo
            .into_iter()
            .map(|((from, to), sat)| GeoTotal { from, to, sat })
            .collect(),
    };
    Ok(SimOutput {
        transactions: txs,
        roster,
        wallets: WalletDirectory::new(wallet_entries)?,
        prices: PriceTable::new((0..cfg.days).map(|d| (day_of(d), price))),
        truth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn config() -> SimConfig {
        SimConfig::from_toml(
            r#"
            seed = 7
            members = 1500
            scammers = 3
            days = 120
            bootstrap_days = 30
            cycles = [{ peak_day = 60, peak_dtv = 80 }]
            countries = [{ code = "IN", weight = 2.0 }, { code = "ID", weight = 1.0 }]
            "#,
        )
        .unwrap()
    }

    #[test]
    fn envelope_shape() {
        let cfg = config();
        let env = envelope(&cfg).unwrap();
        assert_eq!(env.vols[60], 80);
        assert_eq!(env.bounds, vec![30, 90]);
        assert_eq!(env.vols[30], 8);
        assert_eq!(env.vols[90], 8);
        assert!(env.vols[..30].windows(2).all(|w| w[0] <= w[1]));
        assert!(env.vols[91..].iter().all(|&v| v < 8));
    }

    #[test]
    fn two_cycles() {
        let mut cfg = config();
        cfg.days = 160;
        cfg.cycles = vec![
            CycleSpec {
                peak_day: 60,
                peak_dtv: 100,
            },
            CycleSpec {
                peak_day: 100,
                peak_dtv: 60,
            },
        ];
        let env = envelope(&cfg).unwrap();
        assert_eq!(env.bounds, vec![30, 80, 120]);
        assert_eq!(env.peaks, vec![60, 100]);
    }

    #[test]
    fn infeasible_configs() {
        let mut cfg = config();
        cfg.members = 50;
        assert!(matches!(generate(&cfg), Err(Error::InfeasibleConfig(_))));
        let mut cfg = config();
        cfg.days = 80;
        assert!(matches!(envelope(&cfg), Err(Error::InfeasibleConfig(_))));
        let mut cfg = config();
        cfg.cycles[0].peak_dtv = 5;
        assert!(matches!(envelope(&cfg), Err(Error::InfeasibleConfig(_))));
    }

    #[test]
    fn output_matches_envelope_and_is_valid() {
        let cfg = config();
        let out = generate(&cfg).unwrap();
        let env = envelope(&cfg).unwrap();
        let mut per_day = vec![0u64; cfg.days];
        for t in &out.transactions {
            t.validate().unwrap();
            per_day[(t.day() - cfg.start_date).num_days() as usize] += 1;
        }
        assert_eq!(per_day, env.vols);
        assert_eq!(out.truth.per_day_dnd_sat.iter().sum::<i64>(), 0);
        assert_eq!(
            generate(&cfg).unwrap().files().unwrap(),
            out.files().unwrap()
        );
    }
}
