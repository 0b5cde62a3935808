//! On-disk artifact formats: JSONL records, tab-separated tables and
//! reports, CSV plot data, and the serialized model.
//!
//! Readers are strict: structural damage is a parse error naming the line,
//! not a best-effort recovery. Floats are printed in the shortest decimal
//! form that parses back to the same 64-bit value, making every writer
//! byte-deterministic and float round trips exact.

use std::collections::HashMap;
use std::io::{BufRead, Read, Write};

use serde::{Deserialize, Serialize};

use crate::ca::{CaModel, EigenReportRow};
use crate::corpus::{Record, VocabEntry, Vocabulary};
use crate::matrix::{ContingencyTable, RowGrouping};
use crate::neighbors::PairLinkReport;
use crate::{Error, Result};

fn parse_err(file: &str, line: usize, what: impl std::fmt::Display) -> Error {
    Error::Parse(format!("{file} line {line}: {what}"))
}

fn writable_label(label: &str) -> Result<()> {
    if label.is_empty() || label.contains(['\t', '\n', '\r']) {
        return Err(Error::InvalidLabel(format!(
            "{label:?} cannot appear in a tab-separated file"
        )));
    }
    Ok(())
}

/// One JSON object per line: `{"id": ..., "text": ...}`.
pub fn write_records(out: &mut impl Write, records: &[Record]) -> Result<()> {
    for record in records {
        serde_json::to_writer(&mut *out, record)
            .map_err(|e| Error::Parse(e.to_string()))?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_records(input: impl BufRead) -> Result<Vec<Record>> {
    let mut records = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let record: Record = serde_json::from_str(&line)
            .map_err(|e| parse_err("records", i + 1, e))?;
        if record.id.is_empty() {
            return Err(parse_err("records", i + 1, "empty record id"));
        }
        if !seen.insert(record.id.clone()) {
            return Err(Error::DuplicateId(record.id));
        }
        records.push(record);
    }
    Ok(records)
}

/// `term<TAB>frequency<TAB>rank`, sorted by rank.
pub fn write_vocabulary(out: &mut impl Write, vocab: &Vocabulary) -> Result<()> {
    for entry in &vocab.entries {
        writable_label(&entry.term)?;
        writeln!(out, "{}\t{}\t{}", entry.term, entry.frequency, entry.rank)?;
    }
    Ok(())
}

pub fn read_vocabulary(input: impl BufRead) -> Result<Vocabulary> {
    let mut entries: Vec<VocabEntry> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let mut parts = line.split('\t');
        let (term, frequency, rank) = match (parts.next(), parts.next(), parts.next(), parts.next())
        {
            (Some(t), Some(f), Some(r), None) => (t, f, r),
            _ => return Err(parse_err("vocabulary", i + 1, "expected 3 tab-separated fields")),
        };
        if term.is_empty() {
            return Err(parse_err("vocabulary", i + 1, "empty term"));
        }
        if !seen.insert(term.to_string()) {
            return Err(Error::DuplicateId(term.to_string()));
        }
        let frequency: u64 = frequency
            .parse()
            .map_err(|_| parse_err("vocabulary", i + 1, "bad frequency"))?;
        let rank: usize = rank
            .parse()
            .map_err(|_| parse_err("vocabulary", i + 1, "bad rank"))?;
        if rank != i + 1 {
            return Err(parse_err(
                "vocabulary",
                i + 1,
                format!("rank {rank} out of sequence"),
            ));
        }
        if entries.last().is_some_and(|prev| prev.frequency < frequency) {
            return Err(parse_err(
                "vocabulary",
                i + 1,
                "frequency increases with rank",
            ));
        }
        entries.push(VocabEntry { term: term.to_string(), frequency, rank });
    }
    Ok(Vocabulary { entries })
}

/// Header `#rows <n> #cols <m> #total <N>`, then one
/// `row_label<TAB>col_label<TAB>count` line per nonzero cell, row-major.
/// Row and column order are recovered from first occurrence, so a read
/// table may list columns in a different order than the one written, with
/// identical content under each label.
pub fn write_table(out: &mut impl Write, table: &ContingencyTable) -> Result<()> {
    writeln!(
        out,
        "#rows {} #cols {} #total {}",
        table.n_rows(),
        table.n_cols(),
        table.total()
    )?;
    for i in 0..table.n_rows() {
        for &(j, count) in table.row_cells(i) {
            writeln!(
                out,
                "{}\t{}\t{}",
                table.row_labels()[i],
                table.col_labels()[j],
                count
            )?;
        }
    }
    Ok(())
}

pub fn read_table(input: impl BufRead) -> Result<ContingencyTable> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| parse_err("table", 1, "missing header"))??;
    let tokens: Vec<&str> = header.split_whitespace().collect();
    let (n, m, total) = match tokens.as_slice() {
        ["#rows", n, "#cols", m, "#total", total] => (
            n.parse::<usize>()
                .map_err(|_| parse_err("table", 1, "bad row count"))?,
            m.parse::<usize>()
                .map_err(|_| parse_err("table", 1, "bad column count"))?,
            total
                .parse::<u64>()
                .map_err(|_| parse_err("table", 1, "bad total"))?,
        ),
        _ => return Err(parse_err("table", 1, "malformed header")),
    };

    let mut row_labels: Vec<String> = Vec::new();
    let mut col_labels: Vec<String> = Vec::new();
    let mut row_index: HashMap<String, usize> = HashMap::new();
    let mut col_index: HashMap<String, usize> = HashMap::new();
    let mut cells: Vec<Vec<(usize, u64)>> = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let line_no = i + 2;
        let mut parts = line.split('\t');
        let (row, col, count) = match (parts.next(), parts.next(), parts.next(), parts.next()) {
            (Some(r), Some(c), Some(v), None) => (r, c, v),
            _ => return Err(parse_err("table", line_no, "expected 3 tab-separated fields")),
        };
        let count: u64 = count
            .parse()
            .map_err(|_| parse_err("table", line_no, "bad count"))?;
        if count == 0 {
            return Err(parse_err("table", line_no, "explicit zero cell"));
        }
        let ri = *row_index.entry(row.to_string()).or_insert_with(|| {
            row_labels.push(row.to_string());
            cells.push(Vec::new());
            row_labels.len() - 1
        });
        let ci = *col_index.entry(col.to_string()).or_insert_with(|| {
            col_labels.push(col.to_string());
            col_labels.len() - 1
        });
        if cells[ri].iter().any(|&(j, _)| j == ci) {
            return Err(parse_err("table", line_no, "duplicate cell"));
        }
        cells[ri].push((ci, count));
    }
    if row_labels.len() != n || col_labels.len() != m {
        return Err(Error::Parse(format!(
            "table header declares {n}x{m}, file has {}x{}",
            row_labels.len(),
            col_labels.len()
        )));
    }
    let table = ContingencyTable::new(row_labels, col_labels, cells)?;
    if table.total() != total {
        return Err(Error::Parse(format!(
            "table header declares total {total}, cells sum to {}",
            table.total()
        )));
    }
    Ok(table)
}

/// `group_label<TAB>row_label` lines; groups ordered by first occurrence,
/// members resolved to row indices of `table` in file order.
pub fn read_grouping(input: impl BufRead, table: &ContingencyTable) -> Result<RowGrouping> {
    let mut order: Vec<String> = Vec::new();
    let mut members: HashMap<String, Vec<usize>> = HashMap::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let mut parts = line.split('\t');
        let (group, row) = match (parts.next(), parts.next(), parts.next()) {
            (Some(g), Some(r), None) => (g, r),
            _ => return Err(parse_err("groups", i + 1, "expected 2 tab-separated fields")),
        };
        let index = table
            .row_index(row)
            .ok_or_else(|| Error::UnknownLabel(row.to_string()))?;
        members
            .entry(group.to_string())
            .or_insert_with(|| {
                order.push(group.to_string());
                Vec::new()
            })
            .push(index);
    }
    Ok(RowGrouping::new(
        order
            .into_iter()
            .map(|g| {
                let m = members.remove(&g).expect("every ordered group was filled");
                (g, m)
            })
            .collect(),
    ))
}

/// Header `label<TAB>F1<TAB>F2...`, one line per point.
pub fn write_coords(out: &mut impl Write, points: &[(String, Vec<f64>)]) -> Result<()> {
    let k = points.first().map_or(0, |(_, coords)| coords.len());
    let mut header = String::from("label");
    for factor in 1..=k {
        header.push_str(&format!("\tF{factor}"));
    }
    writeln!(out, "{header}")?;
    for (label, coords) in points {
        writable_label(label)?;
        if coords.len() != k {
            return Err(Error::LengthMismatch {
                what: "coordinate vector",
                actual: coords.len(),
                expected: k,
            });
        }
        let mut line = label.clone();
        for &c in coords {
            line.push_str(&format!("\t{c}"));
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// Header `factor<TAB>eigenvalue<TAB>percent<TAB>cumulative`.
pub fn write_eigen_report(out: &mut impl Write, report: &[EigenReportRow]) -> Result<()> {
    writeln!(out, "factor\teigenvalue\tpercent\tcumulative")?;
    for row in report {
        writeln!(
            out,
            "{}\t{}\t{}\t{}",
            row.factor, row.eigenvalue, row.percent, row.cumulative
        )?;
    }
    Ok(())
}

/// One point of a factor-plane scatter plot.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScatterPoint {
    pub label: String,
    pub x: f64,
    pub y: f64,
    pub mass: f64,
    /// Contributions to the two plotted factors.
    pub ctr1: f64,
    pub ctr2: f64,
}

/// CSV with header `label,x,y,mass,ctr1,ctr2`.
pub fn write_scatter(out: &mut impl Write, points: &[ScatterPoint]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    for point in points {
        writer.serialize(point).map_err(csv_err)?;
    }
    writer.flush()?;
    Ok(())
}

/// CSV with header `ln_rank,ln_freq`.
pub fn write_loglog(out: &mut impl Write, points: &[(f64, f64)]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(["ln_rank", "ln_freq"]).map_err(csv_err)?;
    for &(ln_rank, ln_freq) in points {
        writer
            .write_record([ln_rank.to_string(), ln_freq.to_string()])
            .map_err(csv_err)?;
    }
    writer.flush()?;
    Ok(())
}

/// CSV with header `label_a,label_b,distance`; the distance field is empty
/// for pairs with a label missing from the model.
pub fn write_links(out: &mut impl Write, report: &PairLinkReport) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer
        .write_record(["label_a", "label_b", "distance"])
        .map_err(csv_err)?;
    for link in &report.links {
        let distance = link.distance.map(|d| d.to_string()).unwrap_or_default();
        writer
            .write_record([link.label_a.as_str(), link.label_b.as_str(), &distance])
            .map_err(csv_err)?;
    }
    writer.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse(format!("csv: {other:?}")),
    }
}

/// Pretty-printed JSON artifact with a trailing newline.
pub fn write_json(out: &mut impl Write, value: &impl Serialize) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, value).map_err(|e| Error::Parse(e.to_string()))?;
    out.write_all(b"\n")?;
    Ok(())
}

const MODEL_FORMAT: &str = "textca-model";
const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    model: CaModel,
}

/// Serialized model: a tagged JSON envelope. JSON prints floats in
/// shortest round-trip form, so save → load reproduces the model exactly.
pub fn write_model(out: &mut impl Write, model: &CaModel) -> Result<()> {
    let file = ModelFile {
        format: MODEL_FORMAT.to_string(),
        version: MODEL_VERSION,
        model: model.clone(),
    };
    serde_json::to_writer(&mut *out, &file).map_err(|e| Error::Parse(e.to_string()))?;
    out.write_all(b"\n")?;
    Ok(())
}

pub fn read_model(input: impl Read) -> Result<CaModel> {
    let file: ModelFile =
        serde_json::from_reader(input).map_err(|e| Error::Parse(format!("model: {e}")))?;
    if file.format != MODEL_FORMAT || file.version != MODEL_VERSION {
        return Err(Error::Parse(format!(
            "model envelope {} v{} is not {MODEL_FORMAT} v{MODEL_VERSION}",
            file.format, file.version
        )));
    }
    let model = file.model;
    let k = model.n_factors();
    let consistent = model.row_masses.len() == model.n_rows()
        && model.col_masses.len() == model.n_cols()
        && model.row_dist2.len() == model.n_rows()
        && model.col_dist2.len() == model.n_cols()
        && model.row_coords.len() == model.n_rows()
        && model.col_coords.len() == model.n_cols()
        && model.row_coords.iter().all(|c| c.len() == k)
        && model.col_coords.iter().all(|c| c.len() == k)
        && model.eigenvalues.iter().all(|&l| l.is_finite() && l > 0.0)
        && model.total_inertia.is_finite();
    if !consistent {
        return Err(Error::Parse("model fields are inconsistent".into()));
    }
    Ok(model)
}
