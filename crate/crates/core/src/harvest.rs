//! Roster construction from a local corpus of forum profiles and address tags.
//!
//! A profile links a member to the scheme through a URL containing the
//! scheme substring; every address found in that profile becomes a roster
//! candidate. Verified tags whose label names the scheme add further
//! addresses. Addresses claimed by more than one profile, and addresses in
//! non-exchange service wallets, are removed.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::OnceLock;

use chrono::NaiveDate;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::coredata::address::checksum_ok;
use crate::coredata::country::is_alpha2;
use crate::coredata::{classify_address, AddressKind, Gender, MemberRecord, WalletDirectory};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HarvestConfig {
    /// Substring identifying a scheme URL in a profile.
    pub member_substring: String,
    /// Substring identifying a scheme tag label.
    pub tag_substring: String,
    /// Tag labels matching any of these patterns are ignored.
    pub tag_exclusions: Vec<String>,
    /// Drop extracted addresses whose checksum does not verify.
    pub verify_checksums: bool,
}

impl Default for HarvestConfig {
    fn default() -> Self {
        HarvestConfig {
            member_substring: "mmmglobal".into(),
            tag_substring: "mmm".into(),
            tag_exclusions: vec!["hmm+".into()],
            verify_checksums: false,
        }
    }
}

impl HarvestConfig {
    pub fn exclusion_regexes(&self) -> Result<Vec<Regex>> {
        self.tag_exclusions
            .iter()
            .map(|p| {
                Regex::new(p).map_err(|e| Error::InvalidField {
                    field: "tag_exclusions",
                    message: e.to_string(),
                })
            })
            .collect()
    }
}

fn is_flank_char(c: char) -> bool {
    // Union of the base58 and bech32 pattern alphabets.
    c.is_ascii_alphanumeric() && c != 'I' && c != 'O'
}

fn address_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        let alts: Vec<String> = [AddressKind::Bech32, AddressKind::P2PKH, AddressKind::P2SH]
            .iter()
            .map(|k| format!("(?:{})", k.pattern()))
            .collect();
        Regex::new(&alts.join("|")).unwrap()
    })
}

/// Addresses in `text`, in order of first occurrence. Matches that touch
/// another alphabet character on either side are part of a longer token and
/// are skipped.
pub fn extract_addresses(text: &str) -> Vec<(String, AddressKind)> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for m in address_regex().find_iter(text) {
        let before = text[..m.start()].chars().next_back();
        let after = text[m.end()..].chars().next();
        if before.is_some_and(is_flank_char) || after.is_some_and(is_flank_char) {
            continue;
        }
        let s = m.as_str();
        let kind = classify_address(s).expect("match of an address pattern");
        if seen.insert(s) {
            out.push((s.to_string(), kind));
        }
    }
    out
}

/// A forum profile: free text plus structured fields from its sidecar.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProfileDoc {
    pub profile_id: String,
    #[serde(default)]
    pub body: String,
    #[serde(default)]
    pub website_url: Option<String>,
    #[serde(default)]
    pub registration_date: Option<NaiveDate>,
    #[serde(default)]
    pub last_active: Option<NaiveDate>,
    #[serde(default)]
    pub country: Option<String>,
    #[serde(default)]
    pub age: Option<u32>,
    #[serde(default)]
    pub gender: Option<String>,
}

fn link_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r#"https?://[^\s"'<>]+"#).unwrap())
}

fn member_id_from_url(link: &str) -> Option<String> {
    let url = url::Url::parse(link).ok()?;
    url.path_segments()?
        .rfind(|s| !s.is_empty())
        .map(str::to_string)
}

/// Member id from the first scheme link, checking the declared website
/// before links in the body. The id is the last non-empty path segment.
pub fn label_member(profile: &ProfileDoc, substring: &str) -> Option<String> {
    let declared = profile.website_url.iter().map(String::as_str);
    let in_body = link_regex().find_iter(&profile.body).map(|m| m.as_str());
    declared
        .chain(in_body)
        .find(|u| u.contains(substring))
        .and_then(member_id_from_url)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagDoc {
    pub address: String,
    pub label: String,
    pub verified: bool,
}

/// True for verified tags naming the scheme and matching no exclusion.
pub fn label_tag(tag: &TagDoc, substring: &str, exclusions: &[Regex]) -> bool {
    let label = tag.label.to_lowercase();
    tag.verified && label.contains(substring) && !exclusions.iter().any(|r| r.is_match(&label))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidate {
    pub profile_id: String,
    pub address: String,
    pub member_id: String,
}

/// Splits candidates into those whose address is claimed by a single
/// profile and those claimed by several.
pub fn dedup_shared(candidates: Vec<Candidate>) -> (Vec<Candidate>, Vec<Candidate>) {
    let mut claims: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for c in &candidates {
        claims.entry(&c.address).or_default().insert(&c.profile_id);
    }
    let shared: HashSet<String> = claims
        .into_iter()
        .filter(|(_, p)| p.len() > 1)
        .map(|(a, _)| a.to_string())
        .collect();
    let mut seen = HashSet::new();
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for c in candidates {
        if shared.contains(&c.address) {
            dropped.push(c);
        } else if seen.insert(c.address.clone()) {
            kept.push(c);
        }
    }
    (kept, dropped)
}

/// Splits roster rows into those kept and those in non-exchange service wallets.
pub fn filter_service_addresses(
    rows: Vec<MemberRecord>,
    wallets: &WalletDirectory,
) -> (Vec<MemberRecord>, Vec<MemberRecord>) {
    rows.into_iter()
        .partition(|r| !wallets.category(&r.address).is_non_exchange_service())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RejectReason {
    Shared,
    Service,
    Invalid,
}

impl RejectReason {
    pub fn as_str(self) -> &'static str {
        match self {
            RejectReason::Shared => "shared",
            RejectReason::Service => "service",
            RejectReason::Invalid => "invalid",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Reject {
    pub address: String,
    pub profile_id: String,
    pub reason: RejectReason,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct HarvestOutput {
    /// Roster rows sorted by address.
    pub roster: Vec<MemberRecord>,
    /// Rejected candidates sorted by (address, profile_id, reason).
    pub rejects: Vec<Reject>,
}

const TAG_PROFILE: &str = "tag";

fn member_record(c: &Candidate, profile: Option<&ProfileDoc>) -> MemberRecord {
    let mut r = MemberRecord::new(&c.address, &c.member_id);
    if let Some(p) = profile {
        r.country = p
            .country
            .as_deref()
            .map(|s| s.trim().to_ascii_uppercase())
            .filter(|s| is_alpha2(s));
        r.registration_date = p.registration_date;
        r.age = p.age;
        r.gender = p
            .gender
            .as_deref()
            .and_then(|g| g.parse().ok())
            .unwrap_or(Gender::Unspecified);
    }
    r
}

/// Runs labeling, deduplication and service filtering end to end.
pub fn harvest(
    profiles: &[ProfileDoc],
    tags: &[TagDoc],
    wallets: &WalletDirectory,
    cfg: &HarvestConfig,
) -> Result<HarvestOutput> {
    let exclusions = cfg.exclusion_regexes()?;
    let mut rejects = Vec::new();
    let mut ids = HashSet::new();
    for p in profiles {
        if !ids.insert(p.profile_id.as_str()) {
            return Err(Error::InvalidField {
                field: "profile_id",
                message: format!("duplicate profile {:?}", p.profile_id),
            });
        }
    }

    let mut candidates = Vec::new();
    for p in profiles {
        let Some(member_id) = label_member(p, &cfg.member_substring) else {
            continue;
        };
        let text = match &p.website_url {
            Some(u) => format!("{u}\n{}", p.body),
            None => p.body.clone(),
        };
        for (address, kind) in extract_addresses(&text) {
            if cfg.verify_checksums && !checksum_ok(&address, kind) {
                rejects.push(Reject {
                    address,
                    profile_id: p.profile_id.clone(),
                    reason: RejectReason::Invalid,
                });
                continue;
            }
            candidates.push(Candidate {
                profile_id: p.profile_id.clone(),
                address,
                member_id: member_id.clone(),
            });
        }
    }

    let (kept, shared) = dedup_shared(candidates);
    let shared_addrs: HashSet<&str> = shared.iter().map(|c| c.address.as_str()).collect();
    let by_id: BTreeMap<&str, &ProfileDoc> = profiles
        .iter()
        .map(|p| (p.profile_id.as_str(), p))
        .collect();
    let mut rows: Vec<MemberRecord> = kept
        .iter()
        .map(|c| member_record(c, by_id.get(c.profile_id.as_str()).copied()))
        .collect();

    let mut present: HashSet<String> = rows.iter().map(|r| r.address.clone()).collect();
    for t in tags
        .iter()
        .filter(|t| label_tag(t, &cfg.tag_substring, &exclusions))
    {
        let address = t.address.trim();
        let invalid = match classify_address(address) {
            None => true,
            Some(kind) => cfg.verify_checksums && !checksum_ok(address, kind),
        };
        if invalid {
            rejects.push(Reject {
                address: address.to_string(),
                profile_id: TAG_PROFILE.into(),
                reason: RejectReason::Invalid,
            });
            continue;
        }
        if shared_addrs.contains(address) || !present.insert(address.to_string()) {
            continue;
        }
        let c = Candidate {
            profile_id: TAG_PROFILE.into(),
            address: address.to_string(),
            member_id: format!("tag:{}", t.label.to_lowercase()),
        };
        rows.push(member_record(&c, None));
    }
    rejects.extend(shared.into_iter().map(|c| Reject {
        address: c.address,
        profile_id: c.profile_id,
        reason: RejectReason::Shared,
    }));

    let (mut roster, services) = filter_service_addresses(rows, wallets);
    let owner: BTreeMap<&str, &str> = kept
        .iter()
        .map(|c| (c.address.as_str(), c.profile_id.as_str()))
        .collect();
    rejects.extend(services.into_iter().map(|r| {
        Reject {
            profile_id: owner
                .get(r.address.as_str())
                .unwrap_or(&TAG_PROFILE)
                .to_string(),
            address: r.address,
            reason: RejectReason::Service,
        }
    }));

    roster.sort_by(|a, b| a.address.cmp(&b.address));
    rejects.sort();
    rejects.dedup();
    Ok(HarvestOutput { roster, rejects })
}

const SIDECAR_SUFFIX: &str = ".meta.json";

/// Loads a corpus directory: each regular file is one profile document, with
/// optional structured fields in `<stem>.meta.json` beside it. Without a
/// sidecar `profile_id`, the file stem is used. Files load in name order.
pub fn load_corpus(dir: &Path) -> Result<Vec<ProfileDoc>> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|entry| {
            let entry = entry.map_err(|e| Error::io(dir, e))?;
            let is_file = entry
                .file_type()
                .map_err(|e| Error::io(entry.path(), e))?
                .is_file();
            Ok(is_file.then(|| entry.file_name().to_string_lossy().into_owned()))
        })
        .filter_map(Result::transpose)
        .collect::<Result<_>>()?;
    names.retain(|n| !n.ends_with(SIDECAR_SUFFIX));
    names.sort();

    let mut docs = Vec::with_capacity(names.len());
    for name in names {
        let path = dir.join(&name);
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let stem = Path::new(&name)
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| name.clone());
        let sidecar = dir.join(format!("{stem}{SIDECAR_SUFFIX}"));
        let mut doc = if sidecar.is_file() {
            let text = fs::read_to_string(&sidecar).map_err(|e| Error::io(&sidecar, e))?;
            let mut v: serde_json::Value = serde_json::from_str(&text)?;
            if let Some(obj) = v.as_object_mut() {
                obj.entry("profile_id")
                    .or_insert_with(|| stem.clone().into());
            }
            serde_json::from_value(v)?
        } else {
            ProfileDoc {
                profile_id: stem,
                ..Default::default()
            }
        };
        doc.body = String::from_utf8_lossy(&bytes).into_owned();
        docs.push(doc);
    }
    Ok(docs)
}

#[derive(Deserialize)]
struct RawTag {
    address: String,
    label: String,
    verified: String,
}

/// Reads a tags CSV with columns address,label,verified.
pub fn read_tags<R: Read>(reader: R) -> Result<Vec<TagDoc>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut out = Vec::new();
    for (i, row) in rdr.deserialize().enumerate() {
        let raw: RawTag = row?;
        let verified = match raw.verified.to_ascii_lowercase().as_str() {
            "true" | "1" | "yes" => true,
            "false" | "0" | "no" | "" => false,
            other => {
                return Err(Error::Malformed {
                    line: i + 2,
                    message: format!("verified must be true or false, got {other:?}"),
                })
            }
        };
        out.push(TagDoc {
            address: raw.address,
            label: raw.label.to_lowercase(),
            verified,
        });
    }
    Ok(out)
}

pub fn load_tags(path: &Path) -> Result<Vec<TagDoc>> {
    read_tags(fs::File::open(path).map_err(|e| Error::io(path, e))?)
}

pub fn write_rejects<W: Write>(w: W, rejects: &[Reject]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["address", "profile_id", "reason"])?;
    for r in rejects {
        wtr.write_record([r.address.as_str(), r.profile_id.as_str(), r.reason.as_str()])?;
    }
    wtr.flush().map_err(|e| Error::io("<rejects>", e))?;
    Ok(())
}
