//! CSV reports: the simple/complex table, per-bin curves, simulator sweeps
//! and overuse label counts.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::classify::LabeledTrajectory;
use crate::error::{Error, Result};
use crate::ingest::QueryCorpus;
use crate::numfmt::{format_g6, format_opt, parse_opt};
use crate::profile::{mean, partition_simple_complex, BinSummary, Difficulty, KnowledgeProfile, BIN_COUNT};
use crate::utility::SweepBin;

pub const TABLE1_HEADER: &str = "benchmark,simple_avg_at_8,simple_avg_at_8_with_tool,simple_tool_freq,\
complex_avg_at_8,complex_avg_at_8_with_tool,complex_tool_freq";
pub const BINS_HEADER: &str = "bin_index,count,mean_entropy_bits,mean_avg_with_tool,mean_tool_calls";
pub const SWEEP_HEADER: &str = "bin_index,tool_rate,mean_perceived_gap";
pub const OVERUSE_HEADER: &str = "label,count,fraction";
pub const ALL_BENCHMARKS: &str = "all";
pub const LABEL_NAMES: [&str; 4] = ["no_tool", "irrelevant", "redundant", "justified"];

/// The three Table 1 quantities for one difficulty group. All are `None`
/// when the group is empty.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub avg_at_8: Option<f64>,
    pub avg_at_8_with_tool: Option<f64>,
    pub tool_freq: Option<f64>,
}

impl GroupStats {
    fn of(members: &[&KnowledgeProfile]) -> Self {
        GroupStats {
            avg_at_8: mean(members.iter().map(|p| p.avg_at_k)),
            avg_at_8_with_tool: mean(members.iter().filter_map(|p| p.avg_at_k_with_tool)),
            tool_freq: mean(members.iter().filter_map(|p| p.mean_tool_calls)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1Row {
    pub benchmark: String,
    pub simple: GroupStats,
    pub complex: GroupStats,
}

/// One row per benchmark in name order, then an `all` row. Tool frequency is
/// the mean over queries of each query's mean calls per with-tool rollout.
pub fn table1(corpus: &QueryCorpus, profiles: &[KnowledgeProfile]) -> Result<Vec<Table1Row>> {
    if profiles.is_empty() {
        return Err(Error::Empty("profiles"));
    }
    let mut groups: BTreeMap<&str, [Vec<&KnowledgeProfile>; 2]> = BTreeMap::new();
    let mut all: [Vec<&KnowledgeProfile>; 2] = Default::default();
    for p in profiles {
        if !p.has_with_tool() {
            return Err(Error::Invalid(format!(
                "profile for `{}` has no with-tool statistics; rerun `profile` with --with-tool",
                p.query_id
            )));
        }
        let query = corpus.get(&p.query_id).ok_or_else(|| Error::UnknownQuery {
            line: 0,
            query_id: p.query_id.clone(),
        })?;
        check_cell(&query.benchmark)?;
        let slot = match partition_simple_complex(p)? {
            Difficulty::Simple => 0,
            Difficulty::Complex => 1,
        };
        groups.entry(query.benchmark.as_str()).or_default()[slot].push(p);
        all[slot].push(p);
    }
    let row = |name: &str, [simple, complex]: &[Vec<&KnowledgeProfile>; 2]| Table1Row {
        benchmark: name.to_string(),
        simple: GroupStats::of(simple),
        complex: GroupStats::of(complex),
    };
    let mut rows: Vec<Table1Row> = groups.iter().map(|(name, g)| row(name, g)).collect();
    rows.push(row(ALL_BENCHMARKS, &all));
    Ok(rows)
}

fn check_cell(s: &str) -> Result<()> {
    if s.contains([',', '"', '\n', '\r']) {
        return Err(Error::Invalid(format!("`{s}` cannot be written as a plain CSV cell")));
    }
    Ok(())
}

pub fn write_table1_csv(rows: &[Table1Row]) -> String {
    let mut out = format!("{TABLE1_HEADER}\n");
    for r in rows {
        let cells = [
            r.simple.avg_at_8,
            r.simple.avg_at_8_with_tool,
            r.simple.tool_freq,
            r.complex.avg_at_8,
            r.complex.avg_at_8_with_tool,
            r.complex.tool_freq,
        ];
        out.push_str(&r.benchmark);
        for c in cells {
            out.push(',');
            out.push_str(&format_opt(c));
        }
        out.push('\n');
    }
    out
}

/// Splits a CSV body after checking the header and the column count.
fn csv_rows<'a>(text: &'a str, header: &str) -> Result<Vec<(usize, Vec<&'a str>)>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, first)) if first.trim_end() == header => {}
        Some((_, first)) => {
            return Err(Error::Schema {
                line: 1,
                message: format!("expected header `{header}`, found `{first}`"),
            })
        }
        None => return Err(Error::Empty("CSV")),
    }
    let width = header.split(',').count();
    lines
        .map(|(i, l)| {
            let cells: Vec<&str> = l.trim_end().split(',').collect();
            if cells.len() != width {
                return Err(Error::Schema {
                    line: i + 1,
                    message: format!("expected {width} columns, found {}", cells.len()),
                });
            }
            Ok((i + 1, cells))
        })
        .collect()
}

fn cell_opt(line: usize, cell: &str) -> Result<Option<f64>> {
    parse_opt(cell).map_err(|message| Error::Schema { line, message })
}

fn cell_f64(line: usize, cell: &str) -> Result<f64> {
    cell_opt(line, cell)?.ok_or_else(|| Error::Schema {
        line,
        message: "value required".into(),
    })
}

fn cell_int<T: std::str::FromStr>(line: usize, cell: &str) -> Result<T> {
    cell.trim().parse().map_err(|_| Error::Schema {
        line,
        message: format!("not an integer: `{cell}`"),
    })
}

pub fn parse_table1_csv(text: &str) -> Result<Vec<Table1Row>> {
    csv_rows(text, TABLE1_HEADER)?
        .into_iter()
        .map(|(line, c)| {
            let group = |i: usize| -> Result<GroupStats> {
                Ok(GroupStats {
                    avg_at_8: cell_opt(line, c[i])?,
                    avg_at_8_with_tool: cell_opt(line, c[i + 1])?,
                    tool_freq: cell_opt(line, c[i + 2])?,
                })
            };
            Ok(Table1Row {
                benchmark: c[0].to_string(),
                simple: group(1)?,
                complex: group(4)?,
            })
        })
        .collect()
}

pub fn write_bins_csv(bins: &[BinSummary]) -> String {
    let mut out = format!("{BINS_HEADER}\n");
    for b in bins {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            b.bin_index,
            b.query_count,
            format_opt(b.mean_entropy_bits),
            format_opt(b.mean_avg_at_k_with_tool),
            format_opt(b.mean_tool_calls)
        ));
    }
    out
}

fn check_bin_order(line: usize, position: usize, bin_index: u8) -> Result<()> {
    if usize::from(bin_index) != position {
        return Err(Error::Schema {
            line,
            message: format!("expected bin {position}, found {bin_index}"),
        });
    }
    Ok(())
}

fn check_bin_count(found: usize) -> Result<()> {
    if found != BIN_COUNT {
        return Err(Error::Invalid(format!("expected {BIN_COUNT} bins, found {found}")));
    }
    Ok(())
}

/// Requires all eleven bins in order.
pub fn parse_bins_csv(text: &str) -> Result<Vec<BinSummary>> {
    let rows = csv_rows(text, BINS_HEADER)?;
    check_bin_count(rows.len())?;
    rows.into_iter()
        .enumerate()
        .map(|(pos, (line, c))| {
            let bin_index = cell_int(line, c[0])?;
            check_bin_order(line, pos, bin_index)?;
            Ok(BinSummary {
                bin_index,
                query_count: cell_int(line, c[1])?,
                mean_entropy_bits: cell_opt(line, c[2])?,
                mean_avg_at_k_with_tool: cell_opt(line, c[3])?,
                mean_tool_calls: cell_opt(line, c[4])?,
            })
        })
        .collect()
}

pub fn write_sweep_csv(bins: &[SweepBin]) -> String {
    let mut out = format!("{SWEEP_HEADER}\n");
    for b in bins {
        out.push_str(&format!(
            "{},{},{}\n",
            b.bin_index,
            format_g6(b.tool_rate),
            format_g6(b.mean_perceived_gap)
        ));
    }
    out
}

pub fn parse_sweep_csv(text: &str) -> Result<Vec<SweepBin>> {
    let rows = csv_rows(text, SWEEP_HEADER)?;
    check_bin_count(rows.len())?;
    rows.into_iter()
        .enumerate()
        .map(|(pos, (line, c))| {
            let bin_index = cell_int(line, c[0])?;
            check_bin_order(line, pos, bin_index)?;
            Ok(SweepBin {
                bin_index,
                tool_rate: cell_f64(line, c[1])?,
                mean_perceived_gap: cell_f64(line, c[2])?,
            })
        })
        .collect()
}

/// Label counts in taxonomy order. Fractions are of all labeled rollouts.
pub fn overuse_counts(labels: &[LabeledTrajectory]) -> [(&'static str, usize); 4] {
    let mut counts = LABEL_NAMES.map(|n| (n, 0usize));
    for l in labels {
        let name = l.label.name();
        if let Some(slot) = counts.iter_mut().find(|(n, _)| *n == name) {
            slot.1 += 1;
        }
    }
    counts
}

pub fn write_overuse_csv(labels: &[LabeledTrajectory]) -> Result<String> {
    if labels.is_empty() {
        return Err(Error::Empty("labels"));
    }
    let total = labels.len() as f64;
    let mut out = format!("{OVERUSE_HEADER}\n");
    for (name, count) in overuse_counts(labels) {
        out.push_str(&format!("{name},{count},{}\n", format_g6(count as f64 / total)));
    }
    Ok(out)
}

pub fn parse_overuse_csv(text: &str) -> Result<Vec<(String, usize, f64)>> {
    csv_rows(text, OVERUSE_HEADER)?
        .into_iter()
        .map(|(line, c)| Ok((c[0].to_string(), cell_int(line, c[1])?, cell_f64(line, c[2])?)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::OveruseLabel;
    use crate::numfmt::round_g6;
    use crate::profile::{assign_bin, bin_summaries};
    use crate::trajectory::{Mode, QueryRecord};
    use proptest::prelude::*;

    fn query(id: &str, benchmark: &str) -> QueryRecord {
        QueryRecord {
            query_id: id.into(),
            benchmark: benchmark.into(),
            prompt: "p".into(),
            gold_answer: "1".into(),
            relevant_tools: None,
        }
    }

    fn profile(id: &str, hits: u32, with_tool: Option<(f64, f64)>) -> KnowledgeProfile {
        let avg = f64::from(hits) / 8.0;
        KnowledgeProfile {
            query_id: id.into(),
            k_no_tool: 8,
            avg_at_k: avg,
            entropy_bits: 0.0,
            bin_index: assign_bin(avg).unwrap(),
            k_with_tool: with_tool.map(|_| 8),
            avg_at_k_with_tool: with_tool.map(|w| w.0),
            mean_tool_calls: with_tool.map(|w| w.1),
            tool_at_k: None,
        }
    }

    #[test]
    fn table1_by_hand() {
        let corpus = QueryCorpus::from_records(vec![
            query("a", "gsm"),
            query("b", "gsm"),
            query("c", "gsm"),
            query("d", "gsm"),
        ])
        .unwrap();
        let profiles = vec![
            profile("a", 8, Some((1.0, 0.5))),
            profile("b", 4, Some((0.75, 1.5))),
            profile("c", 3, Some((0.5, 2.0))),
            profile("d", 0, Some((0.25, 3.0))),
        ];
        let rows = table1(&corpus, &profiles).unwrap();
        assert_eq!(rows.len(), 2);
        let all = &rows[1];
        assert_eq!(all.benchmark, "all");
        // simple: a (1.0) and b (0.5); complex: c (0.375) and d (0)
        assert_eq!(all.simple.avg_at_8, Some(0.75));
        assert_eq!(all.simple.avg_at_8_with_tool, Some(0.875));
        assert_eq!(all.simple.tool_freq, Some(1.0));
        assert_eq!(all.complex.avg_at_8, Some(0.1875));
        assert_eq!(all.complex.avg_at_8_with_tool, Some(0.375));
        assert_eq!(all.complex.tool_freq, Some(2.5));
        assert_eq!(
            write_table1_csv(&rows).lines().nth(2).unwrap(),
            "all,0.75,0.875,1,0.1875,0.375,2.5"
        );
    }

    #[test]
    fn table1_absent_groups_and_errors() {
        let corpus = QueryCorpus::from_records(vec![query("a", "x"), query("b", "y")]).unwrap();
        let rows = table1(&corpus, &[profile("a", 8, Some((1.0, 0.0)))]).unwrap();
        assert!(write_table1_csv(&rows).contains("x,1,1,0,NA,NA,NA\n"));
        assert!(table1(&corpus, &[]).is_err());
        assert!(table1(&corpus, &[profile("a", 8, None)]).is_err());
        let mut wrong_k = profile("a", 8, Some((1.0, 0.0)));
        wrong_k.k_no_tool = 16;
        assert!(table1(&corpus, &[wrong_k]).is_err());
        let comma = QueryCorpus::from_records(vec![query("a", "x,y")]).unwrap();
        assert!(table1(&comma, &[profile("a", 8, Some((1.0, 0.0)))]).is_err());
    }

    #[test]
    fn bins_csv_with_empty_bins() {
        let mut profiles = Vec::new();
        for i in 0..5 {
            profiles.push(profile(&format!("lo{i}"), 0, Some((0.0, 2.0))));
            profiles.push(profile(&format!("hi{i}"), 8, Some((1.0, 1.0))));
        }
        let bins = bin_summaries(&profiles);
        let csv = write_bins_csv(&bins);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], BINS_HEADER);
        assert_eq!(lines[1], "0,5,0,0,2");
        assert_eq!(lines[2], "1,0,NA,NA,NA");
        assert_eq!(lines[11], "10,5,0,1,1");
        assert_eq!(parse_bins_csv(&csv).unwrap(), bins);
    }

    #[test]
    fn malformed_bins_are_rejected() {
        let bins = bin_summaries(&[]);
        let csv = write_bins_csv(&bins);
        let short: String = csv.lines().take(5).map(|l| format!("{l}\n")).collect();
        assert!(parse_bins_csv(&short).is_err());
        assert!(parse_bins_csv(&csv.replacen("3,0", "4,0", 1)).is_err());
        assert!(parse_bins_csv(&csv.replacen("bin_index", "bin", 1)).is_err());
        assert!(parse_bins_csv("").is_err());
    }

    #[test]
    fn overuse_csv_counts() {
        let label = |label| LabeledTrajectory {
            query_id: "q".into(),
            mode: Mode::WithTool,
            sample_index: 0,
            tool_calls: 1,
            label,
        };
        let labels = vec![
            label(OveruseLabel::NoTool),
            label(OveruseLabel::Redundant { availability: 0.9 }),
            label(OveruseLabel::Redundant { availability: 1.0 }),
        ];
        let csv = write_overuse_csv(&labels).unwrap();
        assert_eq!(
            csv,
            "label,count,fraction\nno_tool,1,0.333333\nirrelevant,0,0\nredundant,2,0.666667\njustified,0,0\n"
        );
        assert_eq!(parse_overuse_csv(&csv).unwrap()[2], ("redundant".into(), 2, 0.666667));
        assert!(write_overuse_csv(&[]).is_err());
    }

    fn opt() -> impl Strategy<Value = Option<f64>> {
        prop::option::of(-1e6f64..1e6)
    }

    proptest! {
        #[test]
        fn bins_round_trip(
            rows in prop::collection::vec((0usize..1000, opt(), opt(), opt()), BIN_COUNT)
        ) {
            let bins: Vec<BinSummary> = rows
                .into_iter()
                .enumerate()
                .map(|(i, (n, e, a, t))| BinSummary {
                    bin_index: i as u8,
                    query_count: n,
                    mean_entropy_bits: e.map(round_g6),
                    mean_avg_at_k_with_tool: a.map(round_g6),
                    mean_tool_calls: t.map(round_g6),
                })
                .collect();
            let csv = write_bins_csv(&bins);
            prop_assert_eq!(parse_bins_csv(&csv).unwrap(), bins);
        }

        #[test]
        fn sweep_round_trip(rates in prop::collection::vec((0.0f64..1.0, -1.0f64..1.0), BIN_COUNT)) {
            let bins: Vec<SweepBin> = rates
                .into_iter()
                .enumerate()
                .map(|(i, (r, g))| SweepBin {
                    bin_index: i as u8,
                    tool_rate: round_g6(r),
                    mean_perceived_gap: round_g6(g),
                })
                .collect();
            prop_assert_eq!(parse_sweep_csv(&write_sweep_csv(&bins)).unwrap(), bins);
        }

        #[test]
        fn table1_round_trip(cells in prop::collection::vec(opt(), 6)) {
            let g = |i: usize| GroupStats {
                avg_at_8: cells[i].map(round_g6),
                avg_at_8_with_tool: cells[i + 1].map(round_g6),
                tool_freq: cells[i + 2].map(round_g6),
            };
            let rows = vec![Table1Row { benchmark: "all".into(), simple: g(0), complex: g(3) }];
            prop_assert_eq!(parse_table1_csv(&write_table1_csv(&rows)).unwrap(), rows);
        }
    }
}
