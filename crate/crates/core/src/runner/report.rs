use std::collections::BTreeMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::records::{CommandKind, Outcome, ResultRecord};
use crate::corpus::TaskKind;
use crate::error::{Error, Result};
use crate::protocol::{Setting, SweepResult};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    #[default]
    Markdown,
    Csv,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Grouping {
    #[default]
    Source,
    Target,
    /// One row per pruning depth.
    K,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportKind {
    /// Unpruned and pruned scores per setting.
    #[default]
    Scores,
    /// The latest correlation matrix as CSV.
    Correlation,
    /// The latest subsample study.
    Subsample,
}

/// Which records to report on. Empty or `None` fields match everything.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportFilter {
    #[serde(default)]
    pub commands: Vec<CommandKind>,
    #[serde(default)]
    pub source: Option<String>,
    #[serde(default)]
    pub target: Option<String>,
    #[serde(default)]
    pub task_kind: Option<TaskKind>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportSpec {
    #[serde(default)]
    pub kind: ReportKind,
    #[serde(default)]
    pub filter: ReportFilter,
    #[serde(default)]
    pub format: ReportFormat,
    #[serde(default)]
    pub grouping: Grouping,
}

fn sweep_of(r: &ResultRecord) -> Option<&SweepResult> {
    match &r.outcome {
        Outcome::Sweep { sweep } => Some(sweep),
        Outcome::MultiSource { multi } => Some(&multi.result),
        _ => None,
    }
}

impl ReportFilter {
    fn matches(&self, r: &ResultRecord, s: &SweepResult) -> bool {
        let commands_ok = if self.commands.is_empty() {
            matches!(r.command, CommandKind::Sweep | CommandKind::MultiSource)
        } else {
            self.commands.contains(&r.command)
        };
        commands_ok
            && self.source.as_ref().is_none_or(|l| s.source_languages.contains(l))
            && self.target.as_ref().is_none_or(|l| &s.target_language == l)
            && self.task_kind.is_none_or(|t| s.task_kind == t)
    }
}

/// Renders a report from the results log. Pure: the same log and spec give
/// the same text.
pub fn report(records: &[ResultRecord], spec: &ReportSpec) -> Result<String> {
    match spec.kind {
        ReportKind::Correlation => records
            .iter()
            .rev()
            .find_map(|r| match &r.outcome {
                Outcome::Correlation { table } => Some(table.to_csv()),
                _ => None,
            })
            .ok_or_else(|| Error::Validation("report: no correlation record matches".into())),
        ReportKind::Subsample => subsample_report(records, spec),
        ReportKind::Scores => {
            let selected: Vec<(&ResultRecord, &SweepResult)> = records
                .iter()
                .filter_map(|r| sweep_of(r).map(|s| (r, s)))
                .filter(|(r, s)| spec.filter.matches(r, s))
                .collect();
            if selected.is_empty() {
                return Err(Error::Validation("report: no records match the filter".into()));
            }
            let sweeps: Vec<&SweepResult> = selected.into_iter().map(|(_, s)| s).collect();
            Ok(match spec.grouping {
                Grouping::K => per_k_table(&sweeps, spec.format),
                g => pair_table(&sweeps, g, spec.format),
            })
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Higher {
    Unpruned,
    Pruned,
    Tie,
}

fn higher(unpruned: f64, pruned: f64) -> Higher {
    if pruned > unpruned {
        Higher::Pruned
    } else if unpruned > pruned {
        Higher::Unpruned
    } else {
        Higher::Tie
    }
}

type RowKey = (String, String, String);

fn pair_table(sweeps: &[&SweepResult], grouping: Grouping, format: ReportFormat) -> String {
    // Later records win, so a forced re-run replaces the earlier cell.
    let mut rows: BTreeMap<RowKey, BTreeMap<Setting, (f64, f64)>> = BTreeMap::new();
    for s in sweeps {
        let sl = s.source_languages.join("+");
        let key = match grouping {
            Grouping::Target => (s.task_kind.to_string(), s.target_language.clone(), sl),
            _ => (s.task_kind.to_string(), sl, s.target_language.clone()),
        };
        rows.entry(key).or_default().insert(s.setting, (s.unpruned_score(), s.best_score));
    }
    let settings = [Setting::CrossLingual, Setting::MultiLingual];
    let unswap = |k: &RowKey| match grouping {
        Grouping::Target => (k.2.clone(), k.1.clone()),
        _ => (k.1.clone(), k.2.clone()),
    };
    let mut out = String::new();
    match format {
        ReportFormat::Markdown => {
            out.push_str("| Task | SL | TL | CrLing Unpruned | CrLing Pruned | MulLing Unpruned | MulLing Pruned |\n");
            out.push_str("|---|---|---|---|---|---|---|\n");
            for (key, cells) in &rows {
                let (sl, tl) = unswap(key);
                let _ = write!(out, "| {} | {sl} | {tl} |", key.0);
                for setting in settings {
                    match cells.get(&setting) {
                        Some(&(u, p)) => {
                            let h = higher(u, p);
                            let bold = |v: f64, win: bool| if win { format!("**{v:.4}**") } else { format!("{v:.4}") };
                            let _ = write!(
                                out,
                                " {} | {} |",
                                bold(u, h != Higher::Pruned),
                                bold(p, h != Higher::Unpruned)
                            );
                        }
                        None => out.push_str(" - | - |"),
                    }
                }
                out.push('\n');
            }
        }
        ReportFormat::Csv => {
            out.push_str("task,source,target,setting,unpruned,pruned,higher\n");
            for (key, cells) in &rows {
                let (sl, tl) = unswap(key);
                for (setting, &(u, p)) in cells {
                    let flag = match higher(u, p) {
                        Higher::Pruned => "pruned",
                        Higher::Unpruned => "unpruned",
                        Higher::Tie => "tie",
                    };
                    let _ = writeln!(out, "{},{sl},{tl},{setting},{u:.6},{p:.6},{flag}", key.0);
                }
            }
        }
    }
    out
}

fn per_k_table(sweeps: &[&SweepResult], format: ReportFormat) -> String {
    let mut out = String::new();
    match format {
        ReportFormat::Markdown => {
            out.push_str("| SL | TL | Setting | Kind | k | F1 |\n|---|---|---|---|---|---|\n");
        }
        ReportFormat::Csv => out.push_str("source,target,setting,kind,k,f1,best\n"),
    }
    for s in sweeps {
        let sl = s.source_languages.join("+");
        for k in &s.per_k_scores {
            let best = k.k == s.best_k;
            match format {
                ReportFormat::Markdown => {
                    let f1 = if best { format!("**{:.4}**", k.f1) } else { format!("{:.4}", k.f1) };
                    let _ = writeln!(out, "| {sl} | {} | {} | {} | {} | {f1} |", s.target_language, s.setting, s.kind, k.k);
                }
                ReportFormat::Csv => {
                    let _ = writeln!(out, "{sl},{},{},{},{},{:.6},{best}", s.target_language, s.setting, s.kind, k.k, k.f1);
                }
            }
        }
    }
    out
}

fn subsample_report(records: &[ResultRecord], spec: &ReportSpec) -> Result<String> {
    let table = records
        .iter()
        .rev()
        .find_map(|r| match &r.outcome {
            Outcome::Subsample { table }
                if spec.filter.target.as_ref().is_none_or(|t| t == &table.target_language) =>
            {
                Some(table)
            }
            _ => None,
        })
        .ok_or_else(|| Error::Validation("report: no subsample record matches".into()))?;
    Ok(match spec.format {
        ReportFormat::Csv => table.to_csv(),
        ReportFormat::Markdown => {
            let mut out = String::from("| Tenths | Target sentences | Unpruned | Pruned |\n|---|---|---|---|\n");
            for p in &table.points {
                let h = higher(p.unpruned, p.pruned);
                let bold = |v: f64, win: bool| if win { format!("**{v:.4}**") } else { format!("{v:.4}") };
                let _ = writeln!(
                    out,
                    "| {} | {} | {} | {} |",
                    p.tenths,
                    p.target_train_sentences,
                    bold(p.unpruned, h != Higher::Pruned),
                    bold(p.pruned, h != Higher::Unpruned)
                );
            }
            out
        }
    })
}
