//! Sparse contingency tables of term counts, row aggregation, reordering,
//! and transposition.
//!
//! A table stores, per row, only the occupied cells. Every row and column
//! margin is positive: builders drop empty rows and columns up front and
//! report what they dropped, so downstream analysis never divides by a
//! zero margin.

use std::collections::{BTreeMap, HashMap, HashSet};

use crate::corpus::{TokenStream, Vocabulary};
use crate::{Error, Result};

/// Cross-tabulated counts with labeled rows and columns.
///
/// `rows[i]` holds the occupied cells of row `i` as `(column, count)` pairs
/// sorted by column index, with every count positive.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyTable {
    row_labels: Vec<String>,
    col_labels: Vec<String>,
    rows: Vec<Vec<(usize, u64)>>,
    row_sums: Vec<u64>,
    col_sums: Vec<u64>,
    total: u64,
}

/// What a table builder had to discard to keep all margins positive.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BuildReport {
    /// Record ids contributing no counted term.
    pub dropped_records: Vec<String>,
    /// Vocabulary terms absent from every stream.
    pub unused_terms: Vec<String>,
}

fn check_label(label: &str, what: &str) -> Result<()> {
    if label.is_empty() {
        return Err(Error::InvalidLabel(format!("empty {what} label")));
    }
    if label.contains(['\t', '\n', '\r']) {
        return Err(Error::InvalidLabel(format!(
            "{what} label {label:?} contains a tab or line break"
        )));
    }
    Ok(())
}

fn check_labels_unique<'a>(labels: impl Iterator<Item = &'a str>, what: &str) -> Result<()> {
    let mut seen = HashSet::new();
    for label in labels {
        check_label(label, what)?;
        if !seen.insert(label) {
            return Err(Error::DuplicateId(format!("{what} label {label:?}")));
        }
    }
    Ok(())
}

impl ContingencyTable {
    /// Assemble a table from per-row sparse cells. Cells need not be sorted;
    /// duplicate columns within a row are summed. Rows or columns whose
    /// margin would be zero are rejected.
    pub fn new(
        row_labels: Vec<String>,
        col_labels: Vec<String>,
        cells: Vec<Vec<(usize, u64)>>,
    ) -> Result<Self> {
        if row_labels.len() != cells.len() {
            return Err(Error::LengthMismatch {
                what: "rows",
                actual: cells.len(),
                expected: row_labels.len(),
            });
        }
        check_labels_unique(row_labels.iter().map(String::as_str), "row")?;
        check_labels_unique(col_labels.iter().map(String::as_str), "column")?;
        let n_cols = col_labels.len();
        let mut rows = Vec::with_capacity(cells.len());
        for (i, cell_list) in cells.into_iter().enumerate() {
            let mut acc: BTreeMap<usize, u64> = BTreeMap::new();
            for (j, count) in cell_list {
                if j >= n_cols {
                    return Err(Error::Bounds {
                        what: "column index",
                        value: j,
                        min: 0,
                        max: n_cols.saturating_sub(1),
                    });
                }
                if count > 0 {
                    *acc.entry(j).or_insert(0) += count;
                }
            }
            if acc.is_empty() {
                return Err(Error::Degenerate(format!(
                    "row {:?} has zero margin",
                    row_labels[i]
                )));
            }
            rows.push(acc.into_iter().collect::<Vec<_>>());
        }
        let mut col_sums = vec![0u64; n_cols];
        let mut row_sums = Vec::with_capacity(rows.len());
        for row in &rows {
            let mut sum = 0u64;
            for &(j, count) in row {
                col_sums[j] += count;
                sum += count;
            }
            row_sums.push(sum);
        }
        if let Some(j) = col_sums.iter().position(|&s| s == 0) {
            return Err(Error::Degenerate(format!(
                "column {:?} has zero margin",
                col_labels[j]
            )));
        }
        let total = row_sums.iter().sum();
        Ok(ContingencyTable { row_labels, col_labels, rows, row_sums, col_sums, total })
    }

    /// Assemble a table from dense counts, mostly for tests and small data.
    pub fn from_dense(
        row_labels: Vec<String>,
        col_labels: Vec<String>,
        counts: &[Vec<u64>],
    ) -> Result<Self> {
        let cells = counts
            .iter()
            .map(|row| {
                if row.len() != col_labels.len() {
                    return Err(Error::LengthMismatch {
                        what: "row cells",
                        actual: row.len(),
                        expected: col_labels.len(),
                    });
                }
                Ok(row
                    .iter()
                    .enumerate()
                    .filter(|(_, &c)| c > 0)
                    .map(|(j, &c)| (j, c))
                    .collect())
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(row_labels, col_labels, cells)
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.col_labels.len()
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn row_labels(&self) -> &[String] {
        &self.row_labels
    }

    pub fn col_labels(&self) -> &[String] {
        &self.col_labels
    }

    pub fn row_sum(&self, i: usize) -> u64 {
        self.row_sums[i]
    }

    pub fn col_sum(&self, j: usize) -> u64 {
        self.col_sums[j]
    }

    pub fn get(&self, i: usize, j: usize) -> u64 {
        match self.rows[i].binary_search_by_key(&j, |&(col, _)| col) {
            Ok(pos) => self.rows[i][pos].1,
            Err(_) => 0,
        }
    }

    /// Occupied cells of row `i`, sorted by column.
    pub fn row_cells(&self, i: usize) -> &[(usize, u64)] {
        &self.rows[i]
    }

    pub fn occupied_cells(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    /// Row profile: the row's cells divided by its margin. Sparse, sorted
    /// by column; entries sum to 1.
    pub fn row_profile(&self, i: usize) -> Vec<(usize, f64)> {
        let sum = self.row_sums[i] as f64;
        self.rows[i]
            .iter()
            .map(|&(j, c)| (j, c as f64 / sum))
            .collect()
    }

    pub fn row_index(&self, label: &str) -> Option<usize> {
        self.row_labels.iter().position(|l| l == label)
    }

    pub fn col_index(&self, label: &str) -> Option<usize> {
        self.col_labels.iter().position(|l| l == label)
    }

    /// Transposed copy: rows become columns. An involution that keeps the
    /// grand total.
    pub fn transposed(&self) -> ContingencyTable {
        let mut cells: Vec<Vec<(usize, u64)>> = vec![Vec::new(); self.n_cols()];
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, count) in row {
                cells[j].push((i, count));
            }
        }
        ContingencyTable {
            row_labels: self.col_labels.clone(),
            col_labels: self.row_labels.clone(),
            rows: cells,
            row_sums: self.col_sums.clone(),
            col_sums: self.row_sums.clone(),
            total: self.total,
        }
    }
}

/// Cross-tabulate token streams against a vocabulary: one row per record,
/// one column per vocabulary term in rank order. Records containing no
/// vocabulary term and terms absent from every record are dropped and
/// reported, keeping all margins positive.
pub fn build_table(
    streams: &[TokenStream],
    vocab: &Vocabulary,
) -> Result<(ContingencyTable, BuildReport)> {
    let term_index: HashMap<&str, usize> = vocab
        .entries
        .iter()
        .enumerate()
        .map(|(j, e)| (e.term.as_str(), j))
        .collect();

    let mut report = BuildReport::default();
    let mut row_labels = Vec::new();
    let mut raw_rows: Vec<Vec<(usize, u64)>> = Vec::new();
    let mut col_used = vec![false; vocab.len()];
    for stream in streams {
        let mut counts: BTreeMap<usize, u64> = BTreeMap::new();
        for token in &stream.tokens {
            if let Some(&j) = term_index.get(token.as_str()) {
                *counts.entry(j).or_insert(0) += 1;
            }
        }
        if counts.is_empty() {
            report.dropped_records.push(stream.record_id.clone());
            continue;
        }
        for &j in counts.keys() {
            col_used[j] = true;
        }
        row_labels.push(stream.record_id.clone());
        raw_rows.push(counts.into_iter().collect());
    }
    if raw_rows.is_empty() {
        return Err(Error::EmptyInput(
            "no record contains any vocabulary term".into(),
        ));
    }

    // Remap columns past the dropped ones.
    let mut new_index = vec![usize::MAX; vocab.len()];
    let mut col_labels = Vec::new();
    for (j, entry) in vocab.entries.iter().enumerate() {
        if col_used[j] {
            new_index[j] = col_labels.len();
            col_labels.push(entry.term.clone());
        } else {
            report.unused_terms.push(entry.term.clone());
        }
    }
    for row in &mut raw_rows {
        for cell in row.iter_mut() {
            cell.0 = new_index[cell.0];
        }
    }

    let table = ContingencyTable::new(row_labels, col_labels, raw_rows)?;
    Ok((table, report))
}

/// Labeled, pairwise-disjoint groups of row indices. Groups need not cover
/// every row.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RowGrouping {
    pub groups: Vec<(String, Vec<usize>)>,
}

impl RowGrouping {
    pub fn new(groups: Vec<(String, Vec<usize>)>) -> Self {
        RowGrouping { groups }
    }

    /// Consecutive blocks of `group_size` rows, labeled `g001`, `g002`, ...
    /// The row count must divide evenly.
    pub fn consecutive_blocks(n_rows: usize, group_size: usize) -> Result<Self> {
        if group_size == 0 || n_rows % group_size != 0 {
            return Err(Error::InvalidGrouping(format!(
                "{n_rows} rows do not divide into groups of {group_size}"
            )));
        }
        Ok(RowGrouping {
            groups: (0..n_rows / group_size)
                .map(|g| {
                    (
                        format!("g{:03}", g + 1),
                        (g * group_size..(g + 1) * group_size).collect(),
                    )
                })
                .collect(),
        })
    }
}

/// Sum each group's member rows into one row, in group order. Column sums
/// over the grouped rows are preserved; when the groups cover only part of
/// the table, columns occupied solely by ungrouped rows lose their margin
/// and the result is rejected as degenerate.
pub fn aggregate_rows(
    table: &ContingencyTable,
    grouping: &RowGrouping,
) -> Result<ContingencyTable> {
    if grouping.groups.is_empty() {
        return Err(Error::InvalidGrouping("no groups given".into()));
    }
    check_labels_unique(
        grouping.groups.iter().map(|(label, _)| label.as_str()),
        "group",
    )?;
    let mut assigned: HashMap<usize, &str> = HashMap::new();
    for (group_label, members) in &grouping.groups {
        if members.is_empty() {
            return Err(Error::InvalidGrouping(format!(
                "group {group_label:?} has no members"
            )));
        }
        for &member in members {
            if member >= table.n_rows() {
                return Err(Error::Bounds {
                    what: "group member row index",
                    value: member,
                    min: 0,
                    max: table.n_rows() - 1,
                });
            }
            if assigned.insert(member, group_label).is_some() {
                return Err(Error::InvalidGrouping(format!(
                    "row index {member} assigned to more than one group"
                )));
            }
        }
    }

    let mut row_labels = Vec::with_capacity(grouping.groups.len());
    let mut cells = Vec::with_capacity(grouping.groups.len());
    for (group_label, members) in &grouping.groups {
        let mut acc: BTreeMap<usize, u64> = BTreeMap::new();
        for &member in members {
            for &(j, count) in table.row_cells(member) {
                *acc.entry(j).or_insert(0) += count;
            }
        }
        row_labels.push(group_label.clone());
        cells.push(acc.into_iter().collect::<Vec<_>>());
    }
    ContingencyTable::new(row_labels, table.col_labels().to_vec(), cells)
}

/// Permute rows by non-decreasing score, stable on ties.
pub fn order_rows_by_scores(
    table: &ContingencyTable,
    scores: &[f64],
) -> Result<ContingencyTable> {
    if scores.len() != table.n_rows() {
        return Err(Error::LengthMismatch {
            what: "scores",
            actual: scores.len(),
            expected: table.n_rows(),
        });
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(Error::Parse(format!("score for row {i} is not finite")));
    }
    let mut order: Vec<usize> = (0..table.n_rows()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let row_labels = order.iter().map(|&i| table.row_labels[i].clone()).collect();
    let cells = order.iter().map(|&i| table.rows[i].clone()).collect();
    ContingencyTable::new(row_labels, table.col_labels().to_vec(), cells)
}
