//! External-service flow shares and the geopolitical money-flow network.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::coredata::money::usd_of;
use crate::coredata::{Category, Roster, SchemeDataset, Usd, WalletDirectory};
use crate::error::{Error, Result};
use crate::txclass::{TxKind, TypedTx};

/// Counterparty addresses and values of a deposit (its inputs) or a
/// withdrawal (its non-roster outputs). Empty for ponzi transactions.
fn counterparties<'a>(
    t: &'a TypedTx,
    roster: &'a Roster,
) -> Box<dyn Iterator<Item = (&'a str, u64)> + 'a> {
    match t.kind {
        TxKind::Deposit => Box::new(t.tx.inputs.iter().map(|io| (io.addr.as_str(), io.value))),
        TxKind::Withdrawal => Box::new(
            t.tx.outputs
                .iter()
                .filter(|io| !roster.contains(&io.addr))
                .map(|io| (io.addr.as_str(), io.value)),
        ),
        TxKind::Ponzi => Box::new(std::iter::empty()),
    }
}

/// Distinct service categories of a transaction's counterparties.
pub fn categorize_tx(
    t: &TypedTx,
    roster: &Roster,
    wallets: &WalletDirectory,
) -> BTreeSet<Category> {
    counterparties(t, roster)
        .map(|(a, _)| wallets.category(a))
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShareMode {
    /// One count per distinct category a transaction touches.
    #[default]
    Incidence,
    /// Counterparty satoshi per category.
    ValueWeighted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CategoryShare {
    pub category: Category,
    pub deposit_share: Option<f64>,
    pub withdrawal_share: Option<f64>,
}

/// Per-category shares of deposits and withdrawals. A direction with no
/// transactions (or nothing to count) has `None` shares.
pub fn external_shares(ds: &SchemeDataset, mode: ShareMode) -> Vec<CategoryShare> {
    let tally = |kind: TxKind| -> BTreeMap<Category, u128> {
        let mut m = BTreeMap::new();
        for t in ds.transactions().iter().filter(|t| t.kind == kind) {
            match mode {
                ShareMode::Incidence => {
                    for c in categorize_tx(t, ds.roster(), ds.wallets()) {
                        *m.entry(c).or_default() += 1;
                    }
                }
                ShareMode::ValueWeighted => {
                    for (a, v) in counterparties(t, ds.roster()) {
                        *m.entry(ds.wallets().category(a)).or_default() += v as u128;
                    }
                }
            }
        }
        m
    };
    let share = |m: &BTreeMap<Category, u128>, c: Category| {
        let total: u128 = m.values().sum();
        (total > 0).then(|| m.get(&c).copied().unwrap_or(0) as f64 / total as f64)
    };
    let dep = tally(TxKind::Deposit);
    let wd = tally(TxKind::Withdrawal);
    Category::ALL
        .into_iter()
        .map(|c| CategoryShare {
            category: c,
            deposit_share: share(&dep, c),
            withdrawal_share: share(&wd, c),
        })
        .collect()
}

pub fn write_shares_csv<W: Write>(w: W, shares: &[CategoryShare]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["category", "deposit_share", "withdrawal_share"])?;
    let f = |s: Option<f64>| s.map(|v| v.to_string()).unwrap_or_default();
    for s in shares {
        wtr.write_record([
            s.category.as_str().to_string(),
            f(s.deposit_share),
            f(s.withdrawal_share),
        ])?;
    }
    wtr.flush().map_err(|e| Error::io("<shares>", e))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeoFlow {
    pub from: String,
    pub to: String,
    pub sat: u64,
}

/// Splits a ponzi transaction's money between sender and receiver countries.
///
/// The exact share of a pair is `value_in(a) * value_out(b) / total_output`
/// over roster addresses with a known country; shares are summed per
/// country pair, floored, and the leftover satoshi handed out by largest
/// remainder so the flows add up to the floor of the exact total.
pub fn attribute_geo(t: &TypedTx, roster: &Roster) -> Vec<GeoFlow> {
    let total_out = t.tx.output_total() as u128;
    if t.kind != TxKind::Ponzi || total_out == 0 {
        return Vec::new();
    }
    let by_country = |ios: &mut dyn Iterator<Item = &crate::coredata::TxIO>| {
        let mut m: BTreeMap<&str, u128> = BTreeMap::new();
        for io in ios {
            if let Some(c) = roster.country(&io.addr) {
                *m.entry(c).or_default() += io.value as u128;
            }
        }
        m
    };
    let ins = by_country(&mut t.roster_inputs());
    let outs = by_country(&mut t.roster_outputs());

    let mut pairs: Vec<(&str, &str, u128, u128)> = Vec::new();
    let mut exact_total: u128 = 0;
    for (&from, &vin) in &ins {
        for (&to, &vout) in &outs {
            let num = vin * vout;
            exact_total += num;
            pairs.push((from, to, num / total_out, num % total_out));
        }
    }
    let target = exact_total / total_out;
    let floored: u128 = pairs.iter().map(|p| p.2).sum();
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    order.sort_by(|&i, &j| pairs[j].3.cmp(&pairs[i].3).then(i.cmp(&j)));
    for &i in order.iter().take((target - floored) as usize) {
        pairs[i].2 += 1;
    }
    pairs
        .into_iter()
        .filter(|p| p.2 > 0)
        .map(|(from, to, sat, _)| GeoFlow {
            from: from.to_string(),
            to: to.to_string(),
            sat: sat as u64,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeoEdge {
    pub from: String,
    pub to: String,
    pub sat: u64,
    /// Sum of each transaction's attributed satoshi at that day's quote.
    pub usd: Usd,
    pub member_count_from: usize,
    pub member_count_to: usize,
    pub self_loop: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeoNode {
    pub country: String,
    pub members: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeoNetwork {
    /// Every attributed edge, including intra-country ones, ordered by (from, to).
    pub edges: Vec<GeoEdge>,
    /// Roster member count per country.
    pub members: BTreeMap<String, usize>,
}

pub fn build_geo_network(ds: &SchemeDataset) -> Result<GeoNetwork> {
    let mut members: BTreeMap<String, usize> = BTreeMap::new();
    for m in ds.roster().members() {
        if let Some(c) = &m.country {
            *members.entry(c.clone()).or_default() += 1;
        }
    }
    let mut acc: BTreeMap<(String, String), (u64, Usd)> = BTreeMap::new();
    for t in ds.transactions().iter().filter(|t| t.kind == TxKind::Ponzi) {
        let flows = attribute_geo(t, ds.roster());
        if flows.is_empty() {
            continue;
        }
        let price = ds.prices().get(t.day)?;
        for f in flows {
            let e = acc.entry((f.from, f.to)).or_insert((0, Usd::ZERO));
            e.0 += f.sat;
            e.1 += usd_of(f.sat, price);
        }
    }
    let count = |c: &str| members.get(c).copied().unwrap_or(0);
    let edges = acc
        .into_iter()
        .map(|((from, to), (sat, usd))| GeoEdge {
            member_count_from: count(&from),
            member_count_to: count(&to),
            self_loop: from == to,
            from,
            to,
            sat,
            usd,
        })
        .collect();
    Ok(GeoNetwork { edges, members })
}

impl GeoNetwork {
    pub fn edge(&self, from: &str, to: &str) -> Option<&GeoEdge> {
        self.edges.iter().find(|e| e.from == from && e.to == to)
    }

    /// Edges shown in the exported graph.
    pub fn visible_edges(&self, include_self_loops: bool) -> impl Iterator<Item = &GeoEdge> {
        self.edges
            .iter()
            .filter(move |e| include_self_loops || !e.self_loop)
    }

    /// Countries incident to a visible edge.
    pub fn nodes(&self, include_self_loops: bool) -> Vec<GeoNode> {
        let names: BTreeSet<&str> = self
            .visible_edges(include_self_loops)
            .flat_map(|e| [e.from.as_str(), e.to.as_str()])
            .collect();
        names
            .into_iter()
            .map(|c| GeoNode {
                country: c.to_string(),
                members: self.members.get(c).copied().unwrap_or(0),
            })
            .collect()
    }

    pub fn to_dot(&self, include_self_loops: bool) -> String {
        let mut s = String::from("digraph geo {\n");
        for n in self.nodes(include_self_loops) {
            let _ = writeln!(
                s,
                "  \"{0}\" [label=\"{0} ({1})\", members={1}];",
                n.country, n.members
            );
        }
        for e in self.visible_edges(include_self_loops) {
            let penwidth = 1.0 + e.usd.as_f64().max(1.0).log10();
            let _ = writeln!(
                s,
                "  \"{}\" -> \"{}\" [usd=\"{}\", sat={}, penwidth={:.3}];",
                e.from, e.to, e.usd, e.sat, penwidth
            );
        }
        s.push_str("}\n");
        s
    }

    pub fn to_json(&self, include_self_loops: bool) -> Result<String> {
        #[derive(Serialize)]
        struct Out<'a> {
            nodes: Vec<GeoNode>,
            edges: Vec<&'a GeoEdge>,
        }
        let out = Out {
            nodes: self.nodes(include_self_loops),
            edges: self.visible_edges(include_self_loops).collect(),
        };
        Ok(serde_json::to_string_pretty(&out)? + "\n")
    }
}

/// How much more money `b` received from `a` than it sent back.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Asymmetry {
    Ratio(f64),
    /// Only one direction carries money; its amount is reported instead.
    OneSided {
        from: String,
        to: String,
        usd: Usd,
    },
}

/// `usd(a -> b) / usd(b -> a)`.
pub fn asymmetry(net: &GeoNetwork, a: &str, b: &str) -> Result<Asymmetry> {
    let ab = net.edge(a, b).map(|e| e.usd).filter(|u| *u > Usd::ZERO);
    let ba = net.edge(b, a).map(|e| e.usd).filter(|u| *u > Usd::ZERO);
    match (ab, ba) {
        (Some(x), Some(y)) => Ok(Asymmetry::Ratio(x.cents() as f64 / y.cents() as f64)),
        (Some(x), None) => Ok(Asymmetry::OneSided {
            from: a.into(),
            to: b.into(),
            usd: x,
        }),
        (None, Some(y)) => Ok(Asymmetry::OneSided {
            from: b.into(),
            to: a.into(),
            usd: y,
        }),
        (None, None) => Err(Error::NoFlow(a.into(), b.into())),
    }
}
