//! Bitcoin address shapes recognised by the toolkit.

use std::fmt;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

/// Placeholder for outputs whose script did not decode to an address.
/// Kept so fee accounting stays exact; never matched against a roster.
pub const UNPARSEABLE: &str = "unparseable";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AddressKind {
    P2PKH,
    P2SH,
    Bech32,
}

impl AddressKind {
    pub const ALL: [AddressKind; 3] = [AddressKind::P2PKH, AddressKind::P2SH, AddressKind::Bech32];

    /// Unanchored pattern for this address type.
    pub fn pattern(self) -> &'static str {
        match self {
            AddressKind::P2PKH => "1[a-km-zA-HJ-NP-Z1-9]{25,34}",
            AddressKind::P2SH => "3[a-km-zA-HJ-NP-Z1-9]{25,34}",
            AddressKind::Bech32 => "bc1[a-zA-HJ-NP-Z0-9]{25,39}",
        }
    }

    fn anchored(self) -> &'static Regex {
        static RES: OnceLock<[Regex; 3]> = OnceLock::new();
        let all = RES.get_or_init(|| {
            AddressKind::ALL.map(|k| Regex::new(&format!("^(?:{})$", k.pattern())).unwrap())
        });
        &all[self as usize]
    }

    pub fn matches(self, s: &str) -> bool {
        self.anchored().is_match(s)
    }
}

impl fmt::Display for AddressKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AddressKind::P2PKH => "P2PKH",
            AddressKind::P2SH => "P2SH",
            AddressKind::Bech32 => "Bech32",
        })
    }
}

/// Returns the address type whose pattern matches the whole string.
pub fn classify_address(s: &str) -> Option<AddressKind> {
    AddressKind::ALL.into_iter().find(|k| k.matches(s))
}

pub fn is_valid_address(s: &str) -> bool {
    classify_address(s).is_some()
}

/// Checks the embedded checksum (base58check version byte, or the segwit
/// bech32/bech32m checksum). Regex-valid strings can still fail this.
pub fn checksum_ok(s: &str, kind: AddressKind) -> bool {
    match kind {
        AddressKind::P2PKH | AddressKind::P2SH => {
            let version = if kind == AddressKind::P2PKH {
                0x00
            } else {
                0x05
            };
            match bs58::decode(s).with_check(Some(version)).into_vec() {
                Ok(payload) => payload.len() == 21,
                Err(_) => false,
            }
        }
        AddressKind::Bech32 => match bech32::segwit::decode(s) {
            Ok((hrp, _, _)) => hrp == bech32::hrp::BC,
            Err(_) => false,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Well-known mainnet addresses.
    const GENESIS: &str = "1A1zP1eP5QGefi2DMPTfTL5SLmv7DivfNa";
    const P2SH: &str = "3J98t1WpEZ73CNmQviecrnyiWrnqRhWNLy";
    const SEGWIT: &str = "bc1qar0srrr7xfkvy5l643lydnw9re59gtzzwf5mdq";

    #[test]
    fn table_patterns() {
        assert_eq!(classify_address(GENESIS), Some(AddressKind::P2PKH));
        assert_eq!(classify_address(P2SH), Some(AddressKind::P2SH));
        assert_eq!(classify_address(SEGWIT), Some(AddressKind::Bech32));
        assert_eq!(classify_address(UNPARSEABLE), None);
        // excluded characters
        assert_eq!(classify_address("1A0zP1eP5QGefi2DMPTfTL5SLmv7DivfNa"), None);
        assert_eq!(classify_address("1AOzP1eP5QGefi2DMPTfTL5SLmv7DivfNa"), None);
        assert_eq!(classify_address("1AIzP1eP5QGefi2DMPTfTL5SLmv7DivfNa"), None);
        assert_eq!(classify_address("1AlzP1eP5QGefi2DMPTfTL5SLmv7DivfNa"), None);
        // length bounds: 1 + 25..=34
        assert!(AddressKind::P2PKH.matches(&format!("1{}", "a".repeat(25))));
        assert!(!AddressKind::P2PKH.matches(&format!("1{}", "a".repeat(24))));
        assert!(AddressKind::P2PKH.matches(&format!("1{}", "a".repeat(34))));
        assert!(!AddressKind::P2PKH.matches(&format!("1{}", "a".repeat(35))));
    }

    #[test]
    fn checksums() {
        assert!(checksum_ok(GENESIS, AddressKind::P2PKH));
        assert!(checksum_ok(P2SH, AddressKind::P2SH));
        assert!(checksum_ok(SEGWIT, AddressKind::Bech32));
        assert!(!checksum_ok(
            "1A1zP1eP5QGefi2DMPTfTL5SLmv7DivfNb",
            AddressKind::P2PKH
        ));
        assert!(!checksum_ok(
            "bc1qar0srrr7xfkvy5l643lydnw9re59gtzzwf5mdr",
            AddressKind::Bech32
        ));
        // right checksum, wrong version byte
        assert!(!checksum_ok(GENESIS, AddressKind::P2SH));
    }
}
