//! Scheme-relative transaction typing and cleaning.
//!
//! A transaction touching roster addresses only on its output side moves money
//! into the scheme (deposit), only on its input side moves money out
//! (withdrawal), and on both sides circulates money between members (ponzi).

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::io::{BufRead, BufReader, Read, Write};

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};

use crate::coredata::{Roster, TxRecord};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TxKind {
    Deposit,
    Ponzi,
    Withdrawal,
}

impl fmt::Display for TxKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TxKind::Deposit => "deposit",
            TxKind::Ponzi => "ponzi",
            TxKind::Withdrawal => "withdrawal",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypedTx {
    pub tx: TxRecord,
    pub kind: TxKind,
    /// Sum of input values held by roster addresses.
    pub ponzi_inputs: u64,
    /// Sum of output values paid to roster addresses.
    pub ponzi_outputs: u64,
    pub day: NaiveDate,
    roster_in: Vec<usize>,
    roster_out: Vec<usize>,
}

impl TypedTx {
    /// Inputs spent by roster addresses.
    pub fn roster_inputs(&self) -> impl Iterator<Item = &crate::coredata::TxIO> {
        self.roster_in.iter().map(|&i| &self.tx.inputs[i])
    }

    /// Outputs paid to roster addresses.
    pub fn roster_outputs(&self) -> impl Iterator<Item = &crate::coredata::TxIO> {
        self.roster_out.iter().map(|&i| &self.tx.outputs[i])
    }

    /// Distinct roster addresses on either side.
    pub fn roster_addresses(&self) -> BTreeSet<&str> {
        self.roster_inputs()
            .chain(self.roster_outputs())
            .map(|io| io.addr.as_str())
            .collect()
    }

    pub fn order_key(&self) -> (DateTime<Utc>, &str) {
        self.tx.order_key()
    }
}

/// Types a transaction against the roster; `None` when no roster address appears.
pub fn classify(tx: &TxRecord, roster: &Roster) -> Option<TypedTx> {
    let roster_in: Vec<usize> = (0..tx.inputs.len())
        .filter(|&i| roster.contains(&tx.inputs[i].addr))
        .collect();
    let roster_out: Vec<usize> = (0..tx.outputs.len())
        .filter(|&i| roster.contains(&tx.outputs[i].addr))
        .collect();
    let kind = match (roster_in.is_empty(), roster_out.is_empty()) {
        (true, true) => return None,
        (true, false) => TxKind::Deposit,
        (false, true) => TxKind::Withdrawal,
        (false, false) => TxKind::Ponzi,
    };
    Some(TypedTx {
        ponzi_inputs: roster_in.iter().map(|&i| tx.inputs[i].value).sum(),
        ponzi_outputs: roster_out.iter().map(|&i| tx.outputs[i].value).sum(),
        day: tx.day(),
        kind,
        roster_in,
        roster_out,
        tx: tx.clone(),
    })
}

pub fn classify_all(txs: &[TxRecord], roster: &Roster) -> Vec<TypedTx> {
    txs.iter().filter_map(|tx| classify(tx, roster)).collect()
}

/// Which ponzi transactions may justify keeping a deposit or withdrawal.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Justification {
    /// Ponzi transactions that survive the self-change rule.
    #[default]
    Retained,
    /// Every ponzi transaction in the input, including self-change payments
    /// removed by the cleaning itself. Not idempotent.
    SinglePass,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct KindCounts {
    pub deposits: usize,
    pub ponzi: usize,
    pub withdrawals: usize,
}

impl KindCounts {
    pub fn of(txs: &[TypedTx]) -> Self {
        let mut c = KindCounts::default();
        for t in txs {
            match t.kind {
                TxKind::Deposit => c.deposits += 1,
                TxKind::Ponzi => c.ponzi += 1,
                TxKind::Withdrawal => c.withdrawals += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.deposits + self.ponzi + self.withdrawals
    }
}

/// Per-rule drop counts from [`clean`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleanReport {
    pub input: KindCounts,
    pub coinbase_deposits: usize,
    pub self_change_ponzi: usize,
    pub unfollowed_deposits: usize,
    pub unpreceded_withdrawals: usize,
    pub retained: KindCounts,
}

/// Removes transactions unrelated to the scheme's operation, in order:
/// coinbase deposits; ponzi transactions touching a single roster address;
/// deposits to addresses with no strictly later ponzi transaction; and
/// withdrawals from addresses with no strictly earlier ponzi transaction.
/// "Later" and "earlier" compare (timestamp, txid).
pub fn clean(typed: &[TypedTx], justification: Justification) -> (Vec<TypedTx>, CleanReport) {
    let mut report = CleanReport {
        input: KindCounts::of(typed),
        ..Default::default()
    };
    let mut sorted: Vec<&TypedTx> = typed.iter().collect();
    sorted.sort_by(|a, b| a.order_key().cmp(&b.order_key()));

    let self_change = |t: &TypedTx| t.kind == TxKind::Ponzi && t.roster_addresses().len() == 1;

    // First and last ponzi activity per roster address.
    type Key<'a> = (DateTime<Utc>, &'a str);
    let mut span: HashMap<&str, (Key, Key)> = HashMap::new();
    for t in &sorted {
        if t.kind != TxKind::Ponzi {
            continue;
        }
        if justification == Justification::Retained && self_change(t) {
            continue;
        }
        let key = t.order_key();
        for addr in t.roster_addresses() {
            span.entry(addr)
                .and_modify(|(lo, hi)| {
                    *lo = (*lo).min(key);
                    *hi = (*hi).max(key);
                })
                .or_insert((key, key));
        }
    }

    let mut kept = Vec::with_capacity(sorted.len());
    for t in sorted {
        let key = t.order_key();
        let keep = match t.kind {
            TxKind::Deposit if t.tx.coinbase => {
                report.coinbase_deposits += 1;
                false
            }
            TxKind::Ponzi if self_change(t) => {
                report.self_change_ponzi += 1;
                false
            }
            TxKind::Ponzi => true,
            TxKind::Deposit => {
                let followed = t
                    .roster_outputs()
                    .any(|io| span.get(io.addr.as_str()).is_some_and(|(_, hi)| *hi > key));
                if !followed {
                    report.unfollowed_deposits += 1;
                }
                followed
            }
            TxKind::Withdrawal => {
                let preceded = t
                    .roster_inputs()
                    .any(|io| span.get(io.addr.as_str()).is_some_and(|(lo, _)| *lo < key));
                if !preceded {
                    report.unpreceded_withdrawals += 1;
                }
                preceded
            }
        };
        if keep {
            kept.push(t.clone());
        }
    }
    report.retained = KindCounts::of(&kept);
    (kept, report)
}

/// An address's part in a ponzi transaction.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Roles {
    pub send: bool,
    pub receive: bool,
}

impl Roles {
    pub fn is_empty(&self) -> bool {
        !self.send && !self.receive
    }
}

/// Ponzi-send iff `addr` is among the inputs, ponzi-receive iff among the
/// outputs. Non-ponzi transactions give no roles.
pub fn roles(tx: &TypedTx, addr: &str) -> Roles {
    if tx.kind != TxKind::Ponzi {
        return Roles::default();
    }
    Roles {
        send: tx.tx.inputs.iter().any(|io| io.addr == addr),
        receive: tx.tx.outputs.iter().any(|io| io.addr == addr),
    }
}

#[derive(Serialize, Deserialize)]
struct TypedLine {
    #[serde(flatten)]
    tx: TxRecord,
    kind: TxKind,
}

/// Writes typed transactions as NDJSON: the transaction object plus `kind`.
pub fn write_typed<W: Write>(mut w: W, txs: &[TypedTx]) -> Result<()> {
    for t in txs {
        let line = TypedLine {
            tx: t.tx.clone(),
            kind: t.kind,
        };
        serde_json::to_writer(&mut w, &line)?;
        w.write_all(b"\n").map_err(|e| Error::io("<typed>", e))?;
    }
    Ok(())
}

/// Reads typed NDJSON, re-deriving roster positions and checking each stored
/// kind against the roster.
pub fn read_typed<R: Read>(reader: R, roster: &Roster) -> Result<Vec<TypedTx>> {
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(reader).lines().enumerate() {
        let line = line.map_err(|e| Error::Malformed {
            line: idx + 1,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: TypedLine = serde_json::from_str(&line).map_err(|e| Error::Malformed {
            line: idx + 1,
            message: e.to_string(),
        })?;
        parsed.tx.validate()?;
        let typed = classify(&parsed.tx, roster).ok_or_else(|| Error::Malformed {
            line: idx + 1,
            message: format!("{} touches no roster address", parsed.tx.txid),
        })?;
        if typed.kind != parsed.kind {
            return Err(Error::Malformed {
                line: idx + 1,
                message: format!(
                    "{} stored as {} but roster says {}",
                    parsed.tx.txid, parsed.kind, typed.kind
                ),
            });
        }
        out.push(typed);
    }
    Ok(out)
}
