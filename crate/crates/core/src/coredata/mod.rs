//! Canonical data model, file formats and loaders.

pub mod address;
pub mod country;
pub mod dataset;
pub mod io;
pub mod model;
pub mod money;

use chrono::NaiveDate;

pub use address::{classify_address, is_valid_address, AddressKind, UNPARSEABLE};
pub use dataset::{auto_day_range, build_dataset, BuildReport, DayRange, SchemeDataset};
pub use io::{
    load_prices, load_roster, load_transactions, load_wallets, read_prices, read_roster,
    read_transactions, read_wallets, write_prices, write_roster, write_transactions, write_wallets,
};
pub use model::{
    Category, Gender, MemberRecord, PriceTable, Roster, TxIO, TxRecord, WalletDirectory,
    WalletEntry,
};
pub use money::{Price, Usd, SAT_PER_BTC};

use crate::error::Result;

/// Converts satoshi to dollars at the given day's quote.
pub fn to_usd(value: u64, day: NaiveDate, prices: &PriceTable) -> Result<Usd> {
    Ok(money::usd_of(value, prices.get(day)?))
}

/// Signed variant of [`to_usd`], for net flows.
pub fn to_usd_signed(value: i64, day: NaiveDate, prices: &PriceTable) -> Result<Usd> {
    Ok(money::usd_of_signed(value, prices.get(day)?))
}
