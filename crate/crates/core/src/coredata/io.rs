//! Readers and writers for the on-disk formats: transactions NDJSON and the
//! roster, wallet and price CSVs.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::model::{
    parse_timestamp, Category, MemberRecord, PriceTable, Roster, TxIO, TxRecord, WalletDirectory,
    WalletEntry,
};
use super::money::Price;
use crate::error::{Error, Result};

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

#[derive(Deserialize)]
struct RawIO {
    addr: String,
    value: i128,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTx {
    txid: String,
    time: String,
    coinbase: bool,
    inputs: Vec<RawIO>,
    outputs: Vec<RawIO>,
}

fn convert_io(txid: &str, raw: Vec<RawIO>) -> Result<Vec<TxIO>> {
    raw.into_iter()
        .map(|io| {
            if io.value < 0 {
                return Err(Error::NegativeValue {
                    txid: txid.to_string(),
                    value: io.value,
                });
            }
            let value = u64::try_from(io.value).map_err(|_| Error::InvalidTransaction {
                txid: txid.to_string(),
                message: format!("value {} out of range", io.value),
            })?;
            Ok(TxIO {
                addr: io.addr,
                value,
            })
        })
        .collect()
}

fn parse_tx_line(line: &str, lineno: usize) -> Result<TxRecord> {
    let raw: RawTx = serde_json::from_str(line).map_err(|e| Error::Malformed {
        line: lineno,
        message: e.to_string(),
    })?;
    let time = parse_timestamp(&raw.time).map_err(|e| Error::Malformed {
        line: lineno,
        message: format!("time: {e}"),
    })?;
    let tx = TxRecord {
        inputs: convert_io(&raw.txid, raw.inputs)?,
        outputs: convert_io(&raw.txid, raw.outputs)?,
        txid: raw.txid,
        time,
        coinbase: raw.coinbase,
    };
    tx.validate()?;
    Ok(tx)
}

/// Reads NDJSON transactions in file order. Blank lines are ignored.
pub fn read_transactions<R: Read>(reader: R) -> Result<Vec<TxRecord>> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in BufReader::new(reader).lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::Malformed {
            line: lineno,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let tx = parse_tx_line(&line, lineno)?;
        if !seen.insert(tx.txid.clone()) {
            return Err(Error::DuplicateTxid(tx.txid));
        }
        out.push(tx);
    }
    Ok(out)
}

pub fn load_transactions(path: &Path) -> Result<Vec<TxRecord>> {
    read_transactions(open(path)?)
}

pub fn write_transactions<W: Write>(mut w: W, txs: &[TxRecord]) -> Result<()> {
    for tx in txs {
        serde_json::to_writer(&mut w, tx)?;
        w.write_all(b"\n")
            .map_err(|e| Error::io("<transactions>", e))?;
    }
    Ok(())
}

const ROSTER_HEADER: [&str; 6] = [
    "address",
    "member_id",
    "country",
    "registration_date",
    "age",
    "gender",
];

fn check_header<R: Read>(rdr: &mut csv::Reader<R>, expected: &[&str]) -> Result<()> {
    let headers = rdr.headers()?.clone();
    for col in expected {
        if !headers.iter().any(|h| h.trim() == *col) {
            return Err(Error::Malformed {
                line: 1,
                message: format!("missing column {col:?}"),
            });
        }
    }
    Ok(())
}

pub fn read_roster<R: Read>(reader: R) -> Result<Vec<MemberRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    check_header(&mut rdr, &ROSTER_HEADER)?;
    let records: Vec<MemberRecord> = rdr.deserialize().collect::<Result<_, csv::Error>>()?;
    // Roster::new enforces address validity, uniqueness and country codes.
    Roster::new(records.iter().cloned())?;
    Ok(records)
}

pub fn load_roster(path: &Path) -> Result<Vec<MemberRecord>> {
    read_roster(open(path)?)
}

pub fn write_roster<W: Write>(w: W, rows: &[MemberRecord]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(ROSTER_HEADER)?;
    for r in rows {
        wtr.write_record([
            r.address.as_str(),
            r.member_id.as_str(),
            r.country.as_deref().unwrap_or(""),
            &r.registration_date
                .map(|d| d.to_string())
                .unwrap_or_default(),
            &r.age.map(|a| a.to_string()).unwrap_or_default(),
            match r.gender {
                super::model::Gender::Unspecified => "",
                super::model::Gender::Male => "male",
                super::model::Gender::Female => "female",
            },
        ])?;
    }
    wtr.flush().map_err(|e| Error::io("<roster>", e))?;
    Ok(())
}

#[derive(Deserialize)]
struct RawWallet {
    address: String,
    wallet_id: String,
    category: String,
}

pub fn read_wallets<R: Read>(reader: R) -> Result<WalletDirectory> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    check_header(&mut rdr, &["address", "wallet_id", "category"])?;
    let mut entries = Vec::new();
    for row in rdr.deserialize() {
        let raw: RawWallet = row?;
        let category: Category = raw.category.parse()?;
        entries.push(WalletEntry {
            address: raw.address,
            wallet_id: raw.wallet_id,
            category,
        });
    }
    WalletDirectory::new(entries)
}

pub fn load_wallets(path: &Path) -> Result<WalletDirectory> {
    read_wallets(open(path)?)
}

pub fn write_wallets<W: Write>(w: W, wallets: &WalletDirectory) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["address", "wallet_id", "category"])?;
    for e in wallets.entries() {
        wtr.write_record([
            e.address.as_str(),
            e.wallet_id.as_str(),
            e.category.as_str(),
        ])?;
    }
    wtr.flush().map_err(|e| Error::io("<wallets>", e))?;
    Ok(())
}

#[derive(Deserialize, Serialize)]
struct RawPrice {
    date: NaiveDate,
    usd_per_btc: String,
}

pub fn read_prices<R: Read>(reader: R) -> Result<PriceTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    check_header(&mut rdr, &["date", "usd_per_btc"])?;
    let mut rows = Vec::new();
    for row in rdr.deserialize() {
        let raw: RawPrice = row?;
        let price: Price = raw.usd_per_btc.parse()?;
        rows.push((raw.date, price));
    }
    Ok(PriceTable::new(rows))
}

pub fn load_prices(path: &Path) -> Result<PriceTable> {
    read_prices(open(path)?)
}

pub fn write_prices<W: Write>(w: W, prices: &PriceTable) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for (date, p) in prices.iter() {
        wtr.serialize(RawPrice {
            date,
            usd_per_btc: p.to_string(),
        })?;
    }
    if prices.is_empty() {
        wtr.write_record(["date", "usd_per_btc"])?;
    }
    wtr.flush().map_err(|e| Error::io("<prices>", e))?;
    Ok(())
}
