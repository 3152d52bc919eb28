//! Markdown summary assembled from the other commands' outputs.

use std::fs;
use std::path::Path;

use anyhow::Result;
use ponzi_core::coredata::Usd;
use ponzi_core::metrics::PhaseSummary;
use ponzi_core::phases::PhasesJson;
use ponzi_core::txclass::CleanReport;

use crate::output::Outputs;

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn read(path: &Path) -> Result<Option<Table>> {
        if !path.is_file() {
            return Ok(None);
        }
        let mut rdr = csv::Reader::from_path(path)?;
        let header = rdr.headers()?.iter().map(str::to_string).collect();
        let rows = rdr
            .records()
            .map(|r| r.map(|r| r.iter().map(str::to_string).collect()))
            .collect::<Result<_, _>>()?;
        Ok(Some(Table { header, rows }))
    }

    fn col(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    fn markdown(&self, limit: usize) -> String {
        let mut s = format!(
            "| {} |\n|{}\n",
            self.header.join(" | "),
            "---|".repeat(self.header.len())
        );
        for r in self.rows.iter().take(limit) {
            s += &format!("| {} |\n", r.join(" | "));
        }
        if self.rows.len() > limit {
            s += &format!("\n{} more rows omitted.\n", self.rows.len() - limit);
        }
        s
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Option<T>> {
    if !path.is_file() {
        return Ok(None);
    }
    Ok(Some(
        serde_json::from_slice(&fs::read(path)?).map_err(ponzi_core::Error::from)?,
    ))
}

const MISSING: &str = "Not available.\n";

pub fn cmd_report(out: &Path, dir: &Path) -> Result<()> {
    let mut md = String::from("# Scheme report\n\n");

    md += "## Transactions\n\n";
    match read_json::<CleanReport>(&dir.join("cleaning_report.json"))? {
        Some(c) => {
            md += "| kind | typed | kept |\n|---|---|---|\n";
            md += &format!(
                "| deposit | {} | {} |\n",
                c.input.deposits, c.retained.deposits
            );
            md += &format!("| ponzi | {} | {} |\n", c.input.ponzi, c.retained.ponzi);
            md += &format!(
                "| withdrawal | {} | {} |\n\n",
                c.input.withdrawals, c.retained.withdrawals
            );
            md += &format!(
                "Dropped: {} coinbase deposits, {} self-change ponzi transactions, {} deposits without later ponzi activity, {} withdrawals without earlier ponzi activity.\n",
                c.coinbase_deposits, c.self_change_ponzi, c.unfollowed_deposits, c.unpreceded_withdrawals
            );
        }
        None => md += MISSING,
    }

    md += "\n## Lifecycle\n\n";
    let phases = read_json::<PhasesJson>(&dir.join("phases.json"))?;
    match &phases {
        Some(p) => {
            let span = |s: &Option<ponzi_core::phases::SpanJson>| match s {
                Some(s) => format!("{} .. {}", s.starts, s.ends),
                None => "empty".into(),
            };
            md += &format!("- Bootstrap: {}\n", span(&p.bootstrap));
            md += &format!(
                "- Hyperoperation: {} .. {}\n",
                p.hyperoperation.starts, p.hyperoperation.ends
            );
            md += &format!("- Collapse: {}\n\n", span(&p.collapse));
            md += "| cycle start | peak day | peak DTV | cycle end | factor |\n|---|---|---|---|---|\n";
            for c in &p.hyperoperation.cycles {
                md += &format!(
                    "| {} | {} | {} | {} | {} |\n",
                    c.starts, c.peak_day, c.peak_vol, c.ends, c.factor
                );
            }
        }
        None => md += MISSING,
    }

    md += "\n## Phase metrics\n\n";
    match read_json::<PhaseSummary>(&dir.join("summary.json"))? {
        Some(m) => {
            md += &format!("- Peak DTV: {} on {}\n", m.peak_dtv, m.peak_day);
            if let Some(g) = m.mean_dgi {
                md += &format!("- Mean DGI over hyperoperation: {g:.4}\n");
            }
            md += &format!("- Total DND over hyperoperation: {} USD\n", m.total_dnd);
            md += &format!(
                "- Total absolute DND over hyperoperation: {} USD\n",
                m.total_abs_dnd
            );
        }
        None => md += MISSING,
    }
    md += "\n## Likely scammers\n\n";
    match Table::read(&dir.join("scammers.csv"))? {
        Some(t) if t.rows.is_empty() => md += "None found.\n",
        Some(t) => md += &t.markdown(10),
        None => md += MISSING,
    }

    md += "\n## Victims\n\n";
    match Table::read(&dir.join("victims.csv"))? {
        Some(t) => match (t.rows.last(), t.col("cvr"), t.col("day")) {
            (Some(last), Some(cvr), Some(day)) => {
                md += &format!("Cumulative victim ratio on {}: {}\n", last[day], last[cvr]);
            }
            _ => md += MISSING,
        },
        None => md += MISSING,
    }

    md += "\n## External services\n\n";
    match Table::read(&dir.join("shares.csv"))? {
        Some(t) => md += &t.markdown(usize::MAX),
        None => md += MISSING,
    }

    md += "\n## Country flows\n\n";
    match read_json::<serde_json::Value>(&dir.join("geo.json"))? {
        Some(g) => {
            let nodes = g["nodes"].as_array().map_or(0, Vec::len);
            let mut edges: Vec<&serde_json::Value> = g["edges"]
                .as_array()
                .map(|e| e.iter().collect())
                .unwrap_or_default();
            md += &format!("{nodes} countries, {} directed edges.\n\n", edges.len());
            let cents = |e: &serde_json::Value| {
                e["usd"]
                    .as_str()
                    .and_then(|s| s.parse::<Usd>().ok())
                    .unwrap_or(Usd::ZERO)
            };
            edges.sort_by_key(|e| std::cmp::Reverse(cents(e)));
            md += "| from | to | usd |\n|---|---|---|\n";
            for e in edges.iter().take(20) {
                md += &format!(
                    "| {} | {} | {} |\n",
                    e["from"].as_str().unwrap_or(""),
                    e["to"].as_str().unwrap_or(""),
                    cents(e)
                );
            }
        }
        None => md += MISSING,
    }

    let mut outputs = Outputs::default();
    outputs.add("report.md", md);
    outputs.commit(out)?;
    Ok(())
}
