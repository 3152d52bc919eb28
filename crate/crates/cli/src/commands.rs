use std::fs::File;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use log::info;
use ponzi_core::classify::{
    likely_scammers, scammer_report, victim_series, write_scammers_csv, write_victims_csv,
    ScammerOptions,
};
use ponzi_core::coredata::{
    build_dataset, load_prices, load_roster, load_transactions, load_wallets, write_prices,
    write_roster, write_wallets, BuildReport, DayRange, Roster, SchemeDataset, WalletDirectory,
};
use ponzi_core::flows::{build_geo_network, external_shares, write_shares_csv, ShareMode};
use ponzi_core::harvest::{harvest, load_corpus, load_tags, write_rejects, HarvestConfig};
use ponzi_core::metrics::{
    daily_reports, ledger, summarize, CvrDenominator, DailyReport, GiniPopulation, LedgerEntry,
    MetricOptions,
};
use ponzi_core::phases::{partition, PhasesJson, ScanMode, VolumeSeries};
use ponzi_core::simgen::{generate, SimConfig};
use ponzi_core::txclass::{classify_all, clean, read_typed, write_typed, Justification};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::output::Outputs;
use crate::{Cli, Command, Format};

/// Settings shared by every command after merging flags over the config file.
struct Ctx {
    cfg: RunConfig,
    out: Option<PathBuf>,
    day_range: Option<DayRange>,
    format: Format,
}

impl Ctx {
    fn out(&self) -> Result<&Path> {
        self.out.as_deref().ok_or_else(|| anyhow!("missing --out"))
    }

    fn ext(&self) -> &'static str {
        match self.format {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

fn input(flag: Option<PathBuf>, from_cfg: &Option<PathBuf>, name: &str) -> Result<PathBuf> {
    let path = flag
        .or_else(|| from_cfg.clone())
        .ok_or_else(|| anyhow!("missing --{name}"))?;
    if !path.exists() {
        bail!("--{name} {} does not exist", path.display());
    }
    Ok(path)
}

fn optional_input(
    flag: Option<PathBuf>,
    from_cfg: &Option<PathBuf>,
    name: &str,
) -> Result<Option<PathBuf>> {
    match flag.or_else(|| from_cfg.clone()) {
        None => Ok(None),
        Some(p) if p.exists() => Ok(Some(p)),
        Some(p) => bail!("--{name} {} does not exist", p.display()),
    }
}

pub fn run(cli: Cli) -> Result<()> {
    if let Command::Simulate = cli.command {
        let path = cli
            .config
            .ok_or_else(|| anyhow!("simulate needs --config"))?;
        let out = cli.out.ok_or_else(|| anyhow!("missing --out"))?;
        return simulate(&path, &out);
    }
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let day_range = match (cli.day_range, &cfg.day_range) {
        (Some(r), _) => Some(r),
        (None, Some(s)) => Some(s.parse::<DayRange>()?),
        (None, None) => None,
    };
    let ctx = Ctx {
        out: cli.out.or_else(|| cfg.out.clone()),
        format: cli.format.or(cfg.format).unwrap_or(Format::Csv),
        day_range,
        cfg,
    };
    match cli.command {
        Command::Harvest(a) => cmd_harvest(&ctx, a),
        Command::Ingest(a) => cmd_ingest(&ctx, a),
        Command::Metrics(a) => cmd_metrics(&ctx, a),
        Command::Phases(a) => cmd_phases(&ctx, a),
        Command::Classify(a) => cmd_classify(&ctx, a),
        Command::Flows(a) => cmd_flows(&ctx, a),
        Command::Report(a) => {
            crate::report::cmd_report(ctx.out()?, a.dir.as_deref().unwrap_or(ctx.out()?))
        }
        Command::Simulate => unreachable!("handled above"),
    }
}

fn commit(outputs: Outputs, dir: &Path) -> Result<()> {
    for path in outputs.commit(dir)? {
        info!("wrote {}", path.display());
    }
    Ok(())
}

fn render<F>(write: F) -> Result<Vec<u8>>
where
    F: FnOnce(&mut Vec<u8>) -> ponzi_core::Result<()>,
{
    let mut buf = Vec::new();
    write(&mut buf)?;
    Ok(buf)
}

fn json<T: Serialize + ?Sized>(value: &T) -> Result<Vec<u8>> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s.into_bytes())
}

fn cmd_harvest(ctx: &Ctx, a: crate::HarvestArgs) -> Result<()> {
    let corpus = input(a.corpus, &ctx.cfg.corpus, "corpus")?;
    let tags = optional_input(a.tags, &ctx.cfg.tags, "tags")?;
    let wallets = optional_input(a.wallets, &ctx.cfg.wallets, "wallets")?;
    let mut hc = HarvestConfig {
        verify_checksums: a.verify_checksums || ctx.cfg.verify_checksums,
        ..HarvestConfig::default()
    };
    if let Some(s) = a
        .member_substring
        .or_else(|| ctx.cfg.member_substring.clone())
    {
        hc.member_substring = s;
    }
    if let Some(s) = a.tag_substring.or_else(|| ctx.cfg.tag_substring.clone()) {
        hc.tag_substring = s;
    }
    if !a.tag_exclusions.is_empty() {
        hc.tag_exclusions = a.tag_exclusions;
    } else if let Some(ex) = &ctx.cfg.tag_exclusions {
        hc.tag_exclusions = ex.clone();
    }

    let profiles = load_corpus(&corpus)?;
    let tags = match tags {
        Some(p) => load_tags(&p)?,
        None => Vec::new(),
    };
    let wallets = match wallets {
        Some(p) => load_wallets(&p)?,
        None => WalletDirectory::default(),
    };
    let result = harvest(&profiles, &tags, &wallets, &hc)?;
    info!(
        "{} profiles, {} roster addresses, {} rejected",
        profiles.len(),
        result.roster.len(),
        result.rejects.len()
    );
    let mut out = Outputs::default();
    out.add("roster.csv", render(|w| write_roster(w, &result.roster))?);
    out.add(
        "rejects.csv",
        render(|w| write_rejects(w, &result.rejects))?,
    );
    commit(out, ctx.out()?)
}

/// Summary written next to an ingested dataset.
#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub day_range: DayRange,
    pub justification: Justification,
    pub build: BuildReport,
}

fn cmd_ingest(ctx: &Ctx, a: crate::IngestArgs) -> Result<()> {
    let tx_path = input(a.tx, &ctx.cfg.tx, "tx")?;
    let roster_path = input(a.roster, &ctx.cfg.roster, "roster")?;
    let prices_path = input(a.prices, &ctx.cfg.prices, "prices")?;
    let wallets_path = optional_input(a.wallets, &ctx.cfg.wallets, "wallets")?;

    let txs = load_transactions(&tx_path)?;
    let members = load_roster(&roster_path)?;
    let roster = Roster::new(members.iter().cloned())?;
    let wallets = match wallets_path {
        Some(p) => load_wallets(&p)?,
        None => WalletDirectory::default(),
    };
    let prices = load_prices(&prices_path)?;

    let justification = if a.single_pass_clean || ctx.cfg.single_pass_clean {
        Justification::SinglePass
    } else {
        Justification::Retained
    };
    let typed = classify_all(&txs, &roster);
    let (cleaned, report) = clean(&typed, justification);
    info!(
        "{} transactions, {} typed, {} kept after cleaning",
        txs.len(),
        typed.len(),
        cleaned.len()
    );
    let (ds, build) = build_dataset(
        cleaned,
        roster,
        wallets.clone(),
        prices.clone(),
        ctx.day_range,
    )?;
    for t in ds.transactions() {
        ds.prices().get(t.day)?;
    }

    let manifest = Manifest {
        day_range: ds.day_range(),
        justification,
        build,
    };
    let mut out = Outputs::default();
    out.add(
        "typed.ndjson",
        render(|w| write_typed(w, ds.transactions()))?,
    );
    out.add("cleaning_report.json", json(&report)?);
    out.add("roster.csv", render(|w| write_roster(w, &members))?);
    out.add("wallets.csv", render(|w| write_wallets(w, &wallets))?);
    out.add("prices.csv", render(|w| write_prices(w, &prices))?);
    out.add("dataset.json", json(&manifest)?);
    commit(out, ctx.out()?)
}

pub fn load_dataset(dir: &Path, day_range: Option<DayRange>) -> Result<SchemeDataset> {
    let manifest: Manifest = serde_json::from_reader(
        File::open(dir.join("dataset.json"))
            .with_context(|| format!("{} is not an ingested dataset", dir.display()))?,
    )
    .map_err(ponzi_core::Error::from)?;
    let roster = Roster::new(load_roster(&dir.join("roster.csv"))?)?;
    let wallets = load_wallets(&dir.join("wallets.csv"))?;
    let prices = load_prices(&dir.join("prices.csv"))?;
    let typed_path = dir.join("typed.ndjson");
    let typed = read_typed(
        File::open(&typed_path).map_err(|e| ponzi_core::Error::Io {
            path: typed_path.clone(),
            source: e,
        })?,
        &roster,
    )?;
    let (ds, _) = build_dataset(
        typed,
        roster,
        wallets,
        prices,
        Some(day_range.unwrap_or(manifest.day_range)),
    )?;
    Ok(ds)
}

fn scan_mode(flag: bool, cfg: &RunConfig) -> ScanMode {
    if flag || cfg.literal_scan {
        ScanMode::Literal
    } else {
        ScanMode::Nearest
    }
}

fn detect_phases(ds: &SchemeDataset, mode: ScanMode) -> Result<PhasesJson> {
    let series = VolumeSeries::from_dataset(ds);
    let p = partition(&series.vols, mode)?;
    Ok(PhasesJson::new(&p, series.origin))
}

/// Hyperoperation window from a phases file, or detected from the dataset.
fn hyper_window(ds: &SchemeDataset, phases: Option<PathBuf>, mode: ScanMode) -> Result<DayRange> {
    let pj = match phases {
        Some(p) => serde_json::from_reader::<_, PhasesJson>(
            File::open(&p).with_context(|| format!("opening {}", p.display()))?,
        )
        .map_err(ponzi_core::Error::from)?,
        None => detect_phases(ds, mode)?,
    };
    let hyper = pj.hyper_range();
    let range = ds.day_range();
    if !range.contains(hyper.start) || !range.contains(hyper.end) {
        return Err(ponzi_core::Error::InvalidField {
            field: "phases",
            message: format!("hyperoperation {hyper} lies outside the dataset window {range}"),
        }
        .into());
    }
    Ok(hyper)
}

fn dataset(ctx: &Ctx, arg: crate::DatasetArg) -> Result<SchemeDataset> {
    let dir = input(arg.dataset, &ctx.cfg.dataset, "dataset")?;
    load_dataset(&dir, ctx.day_range)
}

fn opt_str<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn daily_csv(rows: &[DailyReport]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "day",
        "dtv",
        "dmf_sum_usd",
        "dmf_mean_usd",
        "dmf_max_usd",
        "dfr_usd",
        "dgi",
        "dnd_usd",
        "dnd_sat",
        "ponzi_inputs_usd",
    ])?;
    for r in rows {
        w.write_record([
            r.day.to_string(),
            r.dtv.to_string(),
            r.dmf_sum.to_string(),
            r.dmf_mean.to_string(),
            r.dmf_max.to_string(),
            opt_str(r.dfr),
            opt_str(r.dgi),
            r.dnd.to_string(),
            r.dnd_sat.to_string(),
            r.ponzi_inputs.to_string(),
        ])?;
    }
    Ok(w.into_inner()?)
}

fn ledger_csv(rows: &[LedgerEntry]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "address",
        "day",
        "dni_sat",
        "dns_sat",
        "dnw_sat",
        "tnw_sat",
        "tnw_norm_sat",
        "ponzi_tx_count",
    ])?;
    for r in rows {
        w.write_record([
            r.address.clone(),
            r.day.to_string(),
            r.dni.to_string(),
            r.dns.to_string(),
            r.dnw.to_string(),
            opt_str(r.tnw),
            opt_str(r.tnw_norm),
            opt_str(r.ponzi_tx_count),
        ])?;
    }
    Ok(w.into_inner()?)
}

fn cmd_metrics(ctx: &Ctx, a: crate::MetricsArgs) -> Result<()> {
    let ds = dataset(ctx, a.dataset)?;
    let phases = optional_input(a.phases, &ctx.cfg.phases, "phases")?;
    let hyper = hyper_window(&ds, phases, scan_mode(a.literal_scan, &ctx.cfg))?;
    let opts = MetricOptions {
        gini_population: if a.all_roster_gini || ctx.cfg.all_roster_gini {
            GiniPopulation::AllRoster
        } else {
            GiniPopulation::Active
        },
        cvr_denominator: CvrDenominator::Active,
    };
    let daily = daily_reports(&ds, &opts)?;
    let rows = ledger(&ds, hyper)?;
    let summary = summarize(&ds, hyper, &daily)?;
    let mut out = Outputs::default();
    out.add("summary.json", json(&summary)?);
    match ctx.format {
        Format::Csv => {
            out.add("daily.csv", daily_csv(&daily)?);
            out.add("ledger.csv", ledger_csv(&rows)?);
        }
        Format::Json => {
            out.add("daily.json", json(&daily)?);
            out.add("ledger.json", json(&rows)?);
        }
    }
    commit(out, ctx.out()?)
}

fn cmd_phases(ctx: &Ctx, a: crate::PhasesArgs) -> Result<()> {
    let ds = dataset(ctx, a.dataset)?;
    let pj = detect_phases(&ds, scan_mode(a.literal_scan, &ctx.cfg))?;
    info!(
        "hyperoperation {}..{} with {} cycle(s)",
        pj.hyperoperation.starts,
        pj.hyperoperation.ends,
        pj.hyperoperation.cycles.len()
    );
    let mut out = Outputs::default();
    out.add("phases.json", json(&pj)?);
    commit(out, ctx.out()?)
}

fn cmd_classify(ctx: &Ctx, a: crate::ClassifyArgs) -> Result<()> {
    let ds = dataset(ctx, a.dataset)?;
    let phases = optional_input(a.phases, &ctx.cfg.phases, "phases")?;
    let hyper = hyper_window(&ds, phases, scan_mode(a.literal_scan, &ctx.cfg))?;
    let opts = ScammerOptions {
        k: a.top_k
            .or(ctx.cfg.top_k)
            .unwrap_or(ponzi_core::classify::TOP_K),
        require_full_months: a.full_months || ctx.cfg.full_months,
    };
    let denominator = if a.all_roster_cvr || ctx.cfg.all_roster_cvr {
        CvrDenominator::AllRoster
    } else {
        CvrDenominator::Active
    };
    let scammers = likely_scammers(&ds, hyper, &opts)?;
    let report = scammer_report(&ds, hyper, &scammers)?;
    let victims = victim_series(&ds, hyper, denominator)?;
    info!("{} likely scammers", report.len());
    let mut out = Outputs::default();
    match ctx.format {
        Format::Csv => {
            out.add("scammers.csv", render(|w| write_scammers_csv(w, &report))?);
            out.add("victims.csv", render(|w| write_victims_csv(w, &victims))?);
        }
        Format::Json => {
            out.add("scammers.json", json(&report)?);
            out.add("victims.json", json(&victims)?);
        }
    }
    commit(out, ctx.out()?)
}

fn cmd_flows(ctx: &Ctx, a: crate::FlowsArgs) -> Result<()> {
    let ds = dataset(ctx, a.dataset)?;
    let mode = if a.value_weighted_shares || ctx.cfg.value_weighted_shares {
        ShareMode::ValueWeighted
    } else {
        ShareMode::Incidence
    };
    let self_loops = a.self_loops || ctx.cfg.self_loops;
    let shares = external_shares(&ds, mode);
    let net = build_geo_network(&ds)?;
    let mut out = Outputs::default();
    let name = format!("shares.{}", ctx.ext());
    match ctx.format {
        Format::Csv => out.add(name, render(|w| write_shares_csv(w, &shares))?),
        Format::Json => out.add(name, json(&shares)?),
    }
    out.add("geo.dot", net.to_dot(self_loops));
    out.add("geo.json", net.to_json(self_loops)?);
    commit(out, ctx.out()?)
}

fn simulate(config: &Path, out_dir: &Path) -> Result<()> {
    let text =
        std::fs::read_to_string(config).with_context(|| format!("reading {}", config.display()))?;
    let cfg = SimConfig::from_toml(&text)?;
    let sim = generate(&cfg)?;
    info!(
        "{} transactions, {} members, hyperoperation {}..{}",
        sim.transactions.len(),
        sim.roster.len(),
        sim.truth.hyper_start,
        sim.truth.hyper_end
    );
    let mut out = Outputs::default();
    for (name, bytes) in sim.files()? {
        out.add(name, bytes);
    }
    commit(out, out_dir)
}
