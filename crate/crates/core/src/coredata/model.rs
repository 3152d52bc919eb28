use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, NaiveDate, SecondsFormat, Utc};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::address::{is_valid_address, UNPARSEABLE};
use super::country::is_alpha2;
use super::money::Price;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TxIO {
    pub addr: String,
    pub value: u64,
}

impl TxIO {
    pub fn new(addr: impl Into<String>, value: u64) -> Self {
        TxIO {
            addr: addr.into(),
            value,
        }
    }
}

/// One blockchain transaction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TxRecord {
    pub txid: String,
    #[serde(with = "rfc3339_secs")]
    pub time: DateTime<Utc>,
    pub coinbase: bool,
    pub inputs: Vec<TxIO>,
    pub outputs: Vec<TxIO>,
}

impl TxRecord {
    pub fn input_total(&self) -> u64 {
        self.inputs.iter().map(|io| io.value).sum()
    }

    pub fn output_total(&self) -> u64 {
        self.outputs.iter().map(|io| io.value).sum()
    }

    /// Inputs minus outputs; zero for coinbase transactions.
    pub fn fee(&self) -> u64 {
        if self.coinbase {
            0
        } else {
            self.input_total().saturating_sub(self.output_total())
        }
    }

    pub fn day(&self) -> NaiveDate {
        self.time.date_naive()
    }

    /// Ordering key used for "earlier/later" comparisons: timestamp, then txid.
    pub fn order_key(&self) -> (DateTime<Utc>, &str) {
        (self.time, self.txid.as_str())
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |message: String| Error::InvalidTransaction {
            txid: self.txid.clone(),
            message,
        };
        if self.txid.len() != 64
            || !self
                .txid
                .bytes()
                .all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b))
        {
            return Err(invalid("txid must be 64 lowercase hex characters".into()));
        }
        if self.coinbase && !self.inputs.is_empty() {
            return Err(invalid("coinbase transaction has inputs".into()));
        }
        for io in self.inputs.iter().chain(&self.outputs) {
            if io.addr != UNPARSEABLE && !is_valid_address(&io.addr) {
                return Err(invalid(format!("invalid address {:?}", io.addr)));
            }
        }
        if !self.coinbase && self.output_total() > self.input_total() {
            return Err(invalid(format!(
                "outputs ({}) exceed inputs ({})",
                self.output_total(),
                self.input_total()
            )));
        }
        Ok(())
    }
}

mod rfc3339_secs {
    use super::*;

    pub fn serialize<S: Serializer>(
        t: &DateTime<Utc>,
        s: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&t.to_rfc3339_opts(SecondsFormat::Secs, true))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> std::result::Result<DateTime<Utc>, D::Error> {
        let s = String::deserialize(d)?;
        parse_timestamp(&s).map_err(serde::de::Error::custom)
    }
}

/// Parses an RFC 3339 timestamp, normalised to UTC and truncated to whole seconds.
pub(crate) fn parse_timestamp(s: &str) -> std::result::Result<DateTime<Utc>, chrono::ParseError> {
    let t = DateTime::parse_from_rfc3339(s)?.with_timezone(&Utc);
    Ok(DateTime::from_timestamp(t.timestamp(), 0).expect("in range"))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub enum Gender {
    Male,
    Female,
    #[default]
    Unspecified,
}

impl Gender {
    fn as_str(self) -> &'static str {
        match self {
            Gender::Male => "male",
            Gender::Female => "female",
            Gender::Unspecified => "unspecified",
        }
    }
}

impl FromStr for Gender {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "male" => Ok(Gender::Male),
            "female" => Ok(Gender::Female),
            "" | "unspecified" => Ok(Gender::Unspecified),
            other => Err(Error::InvalidField {
                field: "gender",
                message: format!("unknown gender {other:?}"),
            }),
        }
    }
}

impl Serialize for Gender {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Gender {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

/// A roster row linking an address to a scheme member.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemberRecord {
    pub address: String,
    pub member_id: String,
    #[serde(default, deserialize_with = "empty_as_none")]
    pub country: Option<String>,
    #[serde(default)]
    pub registration_date: Option<NaiveDate>,
    #[serde(default)]
    pub age: Option<u32>,
    #[serde(default)]
    pub gender: Gender,
}

fn empty_as_none<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<String>, D::Error> {
    let s: Option<String> = Option::deserialize(d)?;
    Ok(s.map(|s| s.trim().to_string()).filter(|s| !s.is_empty()))
}

impl MemberRecord {
    pub fn new(address: impl Into<String>, member_id: impl Into<String>) -> Self {
        MemberRecord {
            address: address.into(),
            member_id: member_id.into(),
            country: None,
            registration_date: None,
            age: None,
            gender: Gender::Unspecified,
        }
    }

    pub fn with_country(mut self, country: &str) -> Self {
        self.country = Some(country.to_string());
        self
    }
}

/// External-service category of a wallet.
#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    #[default]
    Unknown,
    Exchanges,
    Pools,
    Generic,
    Mixers,
    Gambling,
    Ponzi,
    Darkweb,
}

impl Category {
    pub const ALL: [Category; 8] = [
        Category::Unknown,
        Category::Exchanges,
        Category::Pools,
        Category::Generic,
        Category::Mixers,
        Category::Gambling,
        Category::Ponzi,
        Category::Darkweb,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Unknown => "unknown",
            Category::Exchanges => "exchanges",
            Category::Pools => "pools",
            Category::Generic => "generic",
            Category::Mixers => "mixers",
            Category::Gambling => "gambling",
            Category::Ponzi => "ponzi",
            Category::Darkweb => "darkweb",
        }
    }

    /// Services other than personal wallets and exchanges.
    pub fn is_non_exchange_service(self) -> bool {
        !matches!(self, Category::Unknown | Category::Exchanges)
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Category::ALL
            .into_iter()
            .find(|c| c.as_str() == s.trim())
            .ok_or_else(|| Error::UnknownCategory(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WalletEntry {
    pub address: String,
    pub wallet_id: String,
    pub category: Category,
}

/// Address → wallet lookup. Addresses without an entry form their own
/// singleton wallet of category `unknown`.
#[derive(Debug, Clone, Default)]
pub struct WalletDirectory {
    entries: BTreeMap<String, WalletEntry>,
    sizes: BTreeMap<String, usize>,
}

impl WalletDirectory {
    pub fn new(entries: impl IntoIterator<Item = WalletEntry>) -> Result<Self> {
        let mut dir = WalletDirectory::default();
        for e in entries {
            if dir.entries.contains_key(&e.address) {
                return Err(Error::DuplicateAddress(e.address));
            }
            *dir.sizes.entry(e.wallet_id.clone()).or_default() += 1;
            dir.entries.insert(e.address.clone(), e);
        }
        Ok(dir)
    }

    pub fn get(&self, addr: &str) -> Option<&WalletEntry> {
        self.entries.get(addr)
    }

    pub fn category(&self, addr: &str) -> Category {
        self.entries
            .get(addr)
            .map_or(Category::Unknown, |e| e.category)
    }

    pub fn wallet_id<'a>(&'a self, addr: &'a str) -> &'a str {
        self.entries
            .get(addr)
            .map_or(addr, |e| e.wallet_id.as_str())
    }

    /// Number of addresses in the wallet containing `addr`.
    pub fn wallet_size(&self, addr: &str) -> usize {
        self.entries
            .get(addr)
            .map_or(1, |e| self.sizes.get(&e.wallet_id).copied().unwrap_or(1))
    }

    pub fn entries(&self) -> impl Iterator<Item = &WalletEntry> {
        self.entries.values()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Daily USD/BTC quotes. A missing day is an error, never interpolated.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PriceTable {
    prices: BTreeMap<NaiveDate, Price>,
}

impl PriceTable {
    pub fn new(prices: impl IntoIterator<Item = (NaiveDate, Price)>) -> Self {
        PriceTable {
            prices: prices.into_iter().collect(),
        }
    }

    pub fn get(&self, day: NaiveDate) -> Result<Price> {
        self.prices
            .get(&day)
            .copied()
            .ok_or(Error::MissingPrice(day))
    }

    pub fn iter(&self) -> impl Iterator<Item = (NaiveDate, Price)> + '_ {
        self.prices.iter().map(|(d, p)| (*d, *p))
    }

    pub fn len(&self) -> usize {
        self.prices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prices.is_empty()
    }
}

/// The set of scheme ("Ponzi") addresses and their member metadata.
#[derive(Debug, Clone, Default)]
pub struct Roster {
    members: BTreeMap<String, MemberRecord>,
}

impl Roster {
    pub fn new(records: impl IntoIterator<Item = MemberRecord>) -> Result<Self> {
        let mut members = BTreeMap::new();
        for r in records {
            if !is_valid_address(&r.address) {
                return Err(Error::InvalidAddress(r.address));
            }
            if r.member_id.trim().is_empty() {
                return Err(Error::InvalidField {
                    field: "member_id",
                    message: format!("empty for {}", r.address),
                });
            }
            if let Some(c) = &r.country {
                if !is_alpha2(c) {
                    return Err(Error::InvalidField {
                        field: "country",
                        message: format!("{c:?} is not an ISO 3166 alpha-2 code"),
                    });
                }
            }
            if members.contains_key(&r.address) {
                return Err(Error::DuplicateAddress(r.address));
            }
            members.insert(r.address.clone(), r);
        }
        Ok(Roster { members })
    }

    pub fn contains(&self, addr: &str) -> bool {
        self.members.contains_key(addr)
    }

    pub fn get(&self, addr: &str) -> Option<&MemberRecord> {
        self.members.get(addr)
    }

    pub fn country(&self, addr: &str) -> Option<&str> {
        self.members.get(addr).and_then(|m| m.country.as_deref())
    }

    pub fn addresses(&self) -> impl Iterator<Item = &str> {
        self.members.keys().map(String::as_str)
    }

    pub fn members(&self) -> impl Iterator<Item = &MemberRecord> {
        self.members.values()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}
