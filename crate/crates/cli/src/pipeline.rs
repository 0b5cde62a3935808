//! The end-to-end pipeline: ingest, vocabulary, table, fit, then optional
//! experiment, neighbour, and export stages, finished by a manifest hashing
//! every artifact. Any stage error aborts before the manifest exists.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use textca::ca;
use textca::corpus;
use textca::experiments;
use textca::export;
use textca::formats;
use textca::matrix;
use textca::neighbors;

use crate::config::PipelineConfig;
use crate::{scatter_points, stage, stage_io, with_path, CliResult};

pub const MANIFEST_NAME: &str = "manifest.json";

/// One artifact, hashed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ManifestEntry {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

/// Everything a pipeline run produced. Identical configuration, seed, and
/// thread count must reproduce identical hashes.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub seed: u64,
    pub threads: usize,
    pub files: Vec<ManifestEntry>,
}

fn write_artifact(
    artifacts: &mut Vec<String>,
    dir: &Path,
    name: &str,
    stage_name: &'static str,
    write: impl FnOnce(&mut BufWriter<File>) -> textca::Result<()>,
) -> CliResult<()> {
    let file = stage_io(stage_name, File::create(dir.join(name)))?;
    let mut writer = BufWriter::new(file);
    stage(stage_name, write(&mut writer))?;
    stage_io(stage_name, writer.flush())?;
    artifacts.push(name.to_string());
    Ok(())
}

fn hash_artifacts(dir: &Path, names: &[String]) -> std::io::Result<Vec<ManifestEntry>> {
    names
        .par_iter()
        .map(|name| {
            let data = fs::read(dir.join(name))?;
            let digest = Sha256::digest(&data);
            let sha256 = digest.iter().map(|b| format!("{b:02x}")).collect();
            Ok(ManifestEntry {
                path: name.clone(),
                bytes: data.len() as u64,
                sha256,
            })
        })
        .collect()
}

/// Run every configured stage and return the written manifest.
pub fn run_pipeline(config: &PipelineConfig) -> CliResult<Manifest> {
    config.validate()?;
    let dir = config.output.dir.clone();
    stage_io("setup", fs::create_dir_all(&dir))?;
    let mut artifacts: Vec<String> = Vec::new();

    let raw = stage(
        "ingest",
        fs::read(&config.input.path).map_err(|e| with_path(&config.input.path, e)),
    )?;
    let rule = config.delimiter_rule()?;
    let records = stage(
        "ingest",
        corpus::split_records(&raw, &rule, config.input.encoding.into()),
    )?;
    write_artifact(&mut artifacts, &dir, "records.jsonl", "ingest", |w| {
        formats::write_records(w, &records.records)
    })?;

    let streams = corpus::tokenize_records(&records);
    let vocab = stage("vocab", corpus::build_vocabulary(&streams))?;
    write_artifact(&mut artifacts, &dir, "vocab.tsv", "vocab", |w| {
        formats::write_vocabulary(w, &vocab)
    })?;

    let filtered = if config.vocab.min_term_length > 0 {
        stage("matrix", vocab.retain_min_length(config.vocab.min_term_length))?
    } else {
        vocab
    };
    let selected = stage("matrix", corpus::top_terms(&filtered, config.vocab.top_k))?;
    let (table, report) = stage("matrix", matrix::build_table(&streams, &selected))?;
    if !report.dropped_records.is_empty() {
        eprintln!(
            "matrix: dropped {} records containing no selected term",
            report.dropped_records.len()
        );
    }
    write_artifact(&mut artifacts, &dir, "table.tsv", "matrix", |w| {
        formats::write_table(w, &table)
    })?;

    let model = stage("fit", ca::fit(&table))?;
    write_artifact(&mut artifacts, &dir, "model.bin", "fit", |w| {
        formats::write_model(w, &model)
    })?;
    write_artifact(&mut artifacts, &dir, "eig.tsv", "fit", |w| {
        formats::write_eigen_report(w, &ca::eigen_report(&model))
    })?;
    let row_coords: Vec<(String, Vec<f64>)> = model
        .row_labels
        .iter()
        .cloned()
        .zip(model.row_coords.iter().cloned())
        .collect();
    write_artifact(&mut artifacts, &dir, "coords.tsv", "fit", |w| {
        formats::write_coords(w, &row_coords)
    })?;
    let scatter = stage("fit", scatter_points(&model, config.fit.plane))?;
    write_artifact(&mut artifacts, &dir, "scatter.csv", "fit", |w| {
        formats::write_scatter(w, &scatter)
    })?;

    if let Some(section) = &config.experiment {
        let reports = stage(
            "experiment",
            experiments::run_aggregation_protocol(
                &table,
                section.group_size,
                section.ordering.into(),
            ),
        )?;
        write_artifact(&mut artifacts, &dir, "experiment.json", "experiment", |w| {
            formats::write_json(w, &reports)
        })?;
    }

    if let Some(section) = &config.neighbors {
        let points = stage("neighbors", neighbors::LabeledPoints::from_model_rows(&model))?;
        let dendrogram = stage(
            "neighbors",
            neighbors::nn_chain_cluster(&points, section.linkage.into()),
        )?;
        write_artifact(&mut artifacts, &dir, "dendrogram.json", "neighbors", |w| {
            formats::write_json(w, &dendrogram)
        })?;
        let pairs = stage("neighbors", neighbors::reciprocal_pairs(&points))?;
        write_artifact(&mut artifacts, &dir, "rnn.tsv", "neighbors", |w| {
            for (a, b) in &pairs {
                writeln!(w, "{a}\t{b}")?;
            }
            Ok(())
        })?;
    }

    if let Some(section) = &config.export {
        if section.xml {
            let factor_records = stage(
                "export",
                export::build_factor_records(&model, &records.records),
            )?;
            write_artifact(&mut artifacts, &dir, "corpus.xml", "export", |w| {
                export::export_xml(&factor_records, w).map(|_| ())
            })?;
        }
    }

    let files = stage_io("manifest", hash_artifacts(&dir, &artifacts))?;
    let manifest = Manifest {
        format: "textca-manifest".into(),
        version: 1,
        seed: config.output.seed,
        threads: rayon::current_num_threads(),
        files,
    };
    let file = stage_io("manifest", File::create(dir.join(MANIFEST_NAME)))?;
    let mut writer = BufWriter::new(file);
    stage("manifest", formats::write_json(&mut writer, &manifest))?;
    stage_io("manifest", writer.flush())?;
    Ok(manifest)
}
