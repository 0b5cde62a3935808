//! Aggregation quality protocol: how faithfully supplementary projection
//! reproduces an active analysis when rows are aggregated into groups.
//!
//! The protocol fits the full table and the group-aggregated table, projects
//! each side supplementarily onto the other, and scores the agreement by the
//! sum of squared Euclidean distances in the principal plane. Factor signs
//! are arbitrary per fit, so each comparison first aligns signs per factor.

use serde::{Deserialize, Serialize};

use crate::ca::{self, CaModel, ProjectionOutcome};
use crate::matrix::{self, ContingencyTable, RowGrouping};
use crate::{Error, Result};

/// Which pair of analyses a comparison scores. `Clustered` variants arise
/// when rows were re-ordered by their first-factor coordinate before
/// grouping, so each group collects rows that are close on factor 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scenario {
    AggOntoFull,
    FullOntoAgg,
    ClusteredAggOntoFull,
    FullOntoClusteredAgg,
}

/// Agreement between two principal-plane maps of the same labeled points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub scenario: Scenario,
    /// Sum of squared Euclidean distances after sign alignment.
    pub ssd: f64,
    pub n_points: usize,
    /// Whether each factor of the second coordinate set was negated.
    pub alignment: [bool; 2],
}

impl ComparisonReport {
    pub fn flips(&self) -> usize {
        self.alignment.iter().filter(|&&f| f).count()
    }
}

/// Row order used before grouping rows into aggregates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RowOrdering {
    /// Rows grouped in the order the table gives them.
    Given,
    /// Rows sorted by their first-factor coordinate, so groups are clusters
    /// of factor-1 neighbors.
    Factor1,
}

/// Sum of squared Euclidean distances between two labeled principal-plane
/// maps, minimized over per-factor signs of `b`. Labels must form the same
/// set on both sides; order is irrelevant.
pub fn ssd_principal_plane(
    scenario: Scenario,
    a: &[(String, [f64; 2])],
    b: &[(String, [f64; 2])],
) -> Result<ComparisonReport> {
    if a.len() != b.len() {
        return Err(Error::LabelMismatch(format!(
            "{} points against {}",
            a.len(),
            b.len()
        )));
    }
    let mut b_by_label = std::collections::HashMap::with_capacity(b.len());
    for (label, point) in b {
        if b_by_label.insert(label.as_str(), point).is_some() {
            return Err(Error::DuplicateId(label.clone()));
        }
    }
    let mut pairs = Vec::with_capacity(a.len());
    let mut seen = std::collections::HashSet::with_capacity(a.len());
    for (label, point) in a {
        if !seen.insert(label.as_str()) {
            return Err(Error::DuplicateId(label.clone()));
        }
        let matched = b_by_label.get(label.as_str()).ok_or_else(|| {
            Error::LabelMismatch(format!("label {label:?} missing from one side"))
        })?;
        pairs.push((point, *matched));
    }

    // Per factor, sum of (a_k - s b_k)^2 is minimized by s = sign(sum a_k b_k);
    // factors separate, so per-factor choice equals the global optimum.
    let mut ssd = 0.0;
    let mut alignment = [false; 2];
    for k in 0..2 {
        let dot: f64 = pairs.iter().map(|(pa, pb)| pa[k] * pb[k]).sum();
        let flip = dot < 0.0;
        alignment[k] = flip;
        let sign = if flip { -1.0 } else { 1.0 };
        ssd += pairs
            .iter()
            .map(|(pa, pb)| {
                let d = pa[k] - sign * pb[k];
                d * d
            })
            .sum::<f64>();
    }
    Ok(ComparisonReport { scenario, ssd, n_points: pairs.len(), alignment })
}

/// First two principal coordinates per label; factors beyond the model's
/// rank contribute 0.
fn model_row_plane(model: &CaModel) -> Vec<(String, [f64; 2])> {
    model
        .row_labels
        .iter()
        .zip(&model.row_coords)
        .map(|(label, coords)| (label.clone(), plane_point(coords)))
        .collect()
}

fn outcome_plane(outcome: &ProjectionOutcome) -> Vec<(String, [f64; 2])> {
    outcome
        .coords
        .iter()
        .map(|(label, coords)| (label.clone(), plane_point(coords)))
        .collect()
}

fn plane_point(coords: &[f64]) -> [f64; 2] {
    [
        coords.first().copied().unwrap_or(0.0),
        coords.get(1).copied().unwrap_or(0.0),
    ]
}

/// Run the aggregation quality protocol: fit the full table and the
/// aggregated table, project each onto the other, and report the two
/// principal-plane comparisons, aggregated-side first.
///
/// With `RowOrdering::Factor1`, rows are first sorted by their coordinate
/// on the full fit's leading factor, so consecutive groups are factor-1
/// clusters and the comparisons carry the `Clustered` scenario names.
pub fn run_aggregation_protocol(
    table: &ContingencyTable,
    group_size: usize,
    ordering: RowOrdering,
) -> Result<Vec<ComparisonReport>> {
    let full_model = ca::fit(table)?;
    let working = match ordering {
        RowOrdering::Given => table.clone(),
        RowOrdering::Factor1 => {
            let scores: Vec<f64> = full_model
                .row_coords
                .iter()
                .map(|coords| coords.first().copied().unwrap_or(0.0))
                .collect();
            matrix::order_rows_by_scores(table, &scores)?
        }
    };
    let grouping = RowGrouping::consecutive_blocks(working.n_rows(), group_size)?;
    let agg_table = matrix::aggregate_rows(&working, &grouping)?;
    let agg_model = ca::fit(&agg_table)?;

    // Reordering rows permutes labels but not their fitted coordinates, so
    // the full model's plane serves both orderings.
    let agg_onto_full = outcome_plane(&ca::project_supplementary_rows(&full_model, &agg_table)?);
    let full_onto_agg = outcome_plane(&ca::project_supplementary_rows(&agg_model, &working)?);

    let (agg_scenario, full_scenario) = match ordering {
        RowOrdering::Given => (Scenario::AggOntoFull, Scenario::FullOntoAgg),
        RowOrdering::Factor1 => (
            Scenario::ClusteredAggOntoFull,
            Scenario::FullOntoClusteredAgg,
        ),
    };
    Ok(vec![
        ssd_principal_plane(agg_scenario, &agg_onto_full, &model_row_plane(&agg_model))?,
        ssd_principal_plane(full_scenario, &full_onto_agg, &model_row_plane(&full_model))?,
    ])
}
