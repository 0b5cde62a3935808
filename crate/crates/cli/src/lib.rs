//! Plumbing behind the `textca` binary: configuration loading, the
//! end-to-end pipeline runner, and exit-status mapping.

pub mod config;
pub mod pipeline;

use textca::ca::{self, CaModel};
use textca::formats::ScatterPoint;

/// Errors surfaced to the terminal. `Usage` means the invocation itself is
/// wrong; `Stage` wraps a library error and names the pipeline stage that
/// raised it.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("stage {stage}: {source}")]
    Stage {
        stage: &'static str,
        source: textca::Error,
    },
}

impl CliError {
    /// Process exit code: 1 usage, 2 bad data, 3 numerical degeneracy.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Stage { source, .. } if source.is_degenerate() => 3,
            CliError::Stage { .. } => 2,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Tag a library result with the stage it belongs to.
pub fn stage<T>(name: &'static str, result: textca::Result<T>) -> CliResult<T> {
    result.map_err(|source| CliError::Stage {
        stage: name,
        source,
    })
}

/// Tag an io result the same way.
pub fn stage_io<T>(name: &'static str, result: std::io::Result<T>) -> CliResult<T> {
    stage(name, result.map_err(textca::Error::from))
}

/// Prefix an io error with the path it concerns; io errors alone do not
/// remember it.
pub fn with_path(path: &std::path::Path, e: std::io::Error) -> textca::Error {
    std::io::Error::new(e.kind(), format!("{}: {e}", path.display())).into()
}

/// Both clouds of a factor plane as scatter rows: documents first, then
/// terms, with masses and per-axis contributions. `plane` axes are 1-based.
pub fn scatter_points(
    model: &CaModel,
    plane: (usize, usize),
) -> textca::Result<Vec<ScatterPoint>> {
    let (a, b) = plane;
    for axis in [a, b] {
        if axis == 0 || axis > model.n_factors() {
            return Err(textca::Error::Bounds {
                what: "plane axis",
                value: axis,
                min: 1,
                max: model.n_factors(),
            });
        }
    }
    let (ka, kb) = (a - 1, b - 1);
    let contributions = ca::contributions(model);
    let mut points = Vec::with_capacity(model.n_rows() + model.n_cols());
    for i in 0..model.n_rows() {
        points.push(ScatterPoint {
            label: model.row_labels[i].clone(),
            x: model.row_coords[i][ka],
            y: model.row_coords[i][kb],
            mass: model.row_masses[i],
            ctr1: contributions.row_ctr[i][ka],
            ctr2: contributions.row_ctr[i][kb],
        });
    }
    for j in 0..model.n_cols() {
        points.push(ScatterPoint {
            label: model.col_labels[j].clone(),
            x: model.col_coords[j][ka],
            y: model.col_coords[j][kb],
            mass: model.col_masses[j],
            ctr1: contributions.col_ctr[j][ka],
            ctr2: contributions.col_ctr[j][kb],
        });
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use textca::matrix::ContingencyTable;

    fn model() -> CaModel {
        let table = ContingencyTable::from_dense(
            vec!["r0".into(), "r1".into(), "r2".into()],
            vec!["c0".into(), "c1".into(), "c2".into()],
            &[vec![8, 1, 1], vec![1, 6, 2], vec![2, 1, 7]],
        )
        .unwrap();
        ca::fit(&table).unwrap()
    }

    #[test]
    fn scatter_lists_rows_then_cols() {
        let model = model();
        let points = scatter_points(&model, (1, 2)).unwrap();
        let labels: Vec<&str> = points.iter().map(|p| p.label.as_str()).collect();
        assert_eq!(labels, ["r0", "r1", "r2", "c0", "c1", "c2"]);
        assert!((points.iter().map(|p| p.mass).sum::<f64>() - 2.0).abs() < 1e-12);
        assert_eq!(points[0].x, model.row_coords[0][0]);
        assert_eq!(points[3].y, model.col_coords[0][1]);
    }

    #[test]
    fn scatter_rejects_axes_beyond_rank() {
        let model = model();
        assert!(scatter_points(&model, (1, 3)).is_err());
        assert!(scatter_points(&model, (0, 1)).is_err());
    }

    #[test]
    fn exit_codes_follow_error_class() {
        assert_eq!(CliError::Usage("bad flag".into()).exit_code(), 1);
        let data = CliError::Stage {
            stage: "fit",
            source: textca::Error::UnknownLabel("x".into()),
        };
        assert_eq!(data.exit_code(), 2);
        let degenerate = CliError::Stage {
            stage: "fit",
            source: textca::Error::Degenerate("flat table".into()),
        };
        assert_eq!(degenerate.exit_code(), 3);
        assert_eq!(degenerate.to_string(), "stage fit: numerical degeneracy: flat table");
    }
}
