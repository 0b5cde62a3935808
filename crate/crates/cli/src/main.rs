//! `textca` command line: corpus ingestion through factor maps, neighbour
//! structure, XML export, and spatial queries over the exported plane.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use textca::ca;
use textca::corpus::{self, RecordSet};
use textca::experiments;
use textca::export;
use textca::formats;
use textca::matrix;
use textca::neighbors;
use textca::powerlaw;
use textca::query;

use textca_cli::config::{
    self, load_config, EncodingName, LinkageName, OrderingName, Overrides,
};
use textca_cli::pipeline::{run_pipeline, MANIFEST_NAME};
use textca_cli::{scatter_points, stage, stage_io, with_path, CliError, CliResult};

#[derive(Parser)]
#[command(
    name = "textca",
    version,
    about = "Correspondence analysis of delimited text corpora"
)]
struct Cli {
    /// Worker threads for parallel stages; default uses every core.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Split a raw corpus file into numbered records.
    Ingest {
        /// Raw corpus file.
        #[arg(long)]
        input: PathBuf,
        /// Literal delimiter line, or count:N for fixed-size line blocks.
        /// Dash-heavy literals are common, so leading hyphens are allowed.
        #[arg(long, allow_hyphen_values = true)]
        delimiter: String,
        /// Byte encoding of the input.
        #[arg(long, value_enum, default_value = "latin1")]
        encoding: EncodingName,
        /// Records file to write (JSON lines).
        #[arg(long)]
        out: PathBuf,
    },
    /// Count terms over ingested records.
    Vocab {
        /// Records file from `ingest`.
        #[arg(long)]
        records: PathBuf,
        /// Vocabulary file to write: term, frequency, rank.
        #[arg(long)]
        out: PathBuf,
    },
    /// Build a term-document table, or aggregate one by row groups.
    Matrix {
        #[command(subcommand)]
        action: Option<MatrixAction>,
        /// Records file from `ingest`.
        #[arg(long)]
        records: Option<PathBuf>,
        /// Vocabulary file from `vocab`.
        #[arg(long)]
        vocab: Option<PathBuf>,
        /// Keep the K most frequent terms as columns.
        #[arg(long, value_name = "K")]
        top_k: Option<usize>,
        /// Table file to write.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit, project into, or plot a correspondence model.
    Ca {
        #[command(subcommand)]
        action: CaAction,
    },
    /// Fit the rank-frequency power law of a vocabulary.
    Powerlaw {
        /// Vocabulary file from `vocab`.
        #[arg(long)]
        vocab: PathBuf,
        /// Inclusive rank range LO:HI; default picks the linear regime.
        #[arg(long, value_name = "LO:HI")]
        range: Option<String>,
        /// Fit summary to write (JSON).
        #[arg(long)]
        out: PathBuf,
        /// Log-log plot points to write (CSV).
        #[arg(long)]
        points: PathBuf,
    },
    /// Protocol experiments over a fitted table.
    Experiment {
        #[command(subcommand)]
        action: ExperimentAction,
    },
    /// Neighbour structure among documents in factor space.
    Neighbors {
        #[command(subcommand)]
        action: NeighborsAction,
    },
    /// Write analysis artifacts for external tools.
    Export {
        #[command(subcommand)]
        action: ExportAction,
    },
    /// Spatial queries over exported documents.
    Query {
        #[command(subcommand)]
        action: QueryAction,
    },
    /// Run the whole pipeline from a declarative config file.
    Run {
        /// Pipeline configuration (TOML).
        #[arg(long)]
        config: PathBuf,
        /// Override output.dir.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Override output.seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override vocab.top_k.
        #[arg(long, value_name = "K")]
        top_k: Option<usize>,
        /// Override experiment.group_size.
        #[arg(long)]
        group_size: Option<usize>,
        /// Override experiment.ordering.
        #[arg(long, value_enum)]
        ordering: Option<OrderingName>,
    },
}

#[derive(Subcommand)]
enum MatrixAction {
    /// Sum row groups of an existing table into a smaller table.
    Aggregate {
        /// Table file to aggregate.
        #[arg(long)]
        table: PathBuf,
        /// Two-column group file: group_label TAB row_label.
        #[arg(long)]
        groups: PathBuf,
        /// Aggregated table file to write.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum CaAction {
    /// Fit a model to a table.
    Fit {
        #[arg(long)]
        table: PathBuf,
        /// Model file to write.
        #[arg(long)]
        out: PathBuf,
        /// Eigenvalue report to write (factor, eigenvalue, percent, cumulative).
        #[arg(long)]
        report: PathBuf,
    },
    /// Project supplementary rows into a fitted model.
    Project {
        #[arg(long)]
        model: PathBuf,
        /// Supplementary table; columns are matched to the model by label.
        #[arg(long)]
        sup: PathBuf,
        /// Coordinates file to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a factor-plane scatter of documents and terms.
    Plot {
        #[arg(long)]
        model: PathBuf,
        /// 1-based factor axes, e.g. 1,2.
        #[arg(long, default_value = "1,2")]
        plane: String,
        /// Scatter file to write: label,x,y,mass,ctr1,ctr2.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum ExperimentAction {
    /// Compare aggregate-onto-full and full-onto-aggregate projections.
    Aggregation {
        #[arg(long)]
        table: PathBuf,
        /// Rows per group; must divide the row count.
        #[arg(long)]
        group_size: usize,
        /// Row order before grouping.
        #[arg(long, value_enum, default_value = "given")]
        ordering: OrderingName,
        /// Comparison report to write (JSON).
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum NeighborsAction {
    /// K nearest documents to one document.
    Knn {
        #[arg(long)]
        model: PathBuf,
        /// Query document label.
        #[arg(long)]
        label: String,
        #[arg(long, default_value_t = 3)]
        k: usize,
    },
    /// All reciprocal nearest-neighbour document pairs.
    Rnn {
        #[arg(long)]
        model: PathBuf,
    },
    /// Agglomerative clustering of documents.
    Cluster {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_enum, default_value = "ward")]
        linkage: LinkageName,
        /// Dendrogram file to write (JSON).
        #[arg(long)]
        out: PathBuf,
    },
    /// Planar distances between designated document pairs.
    Pairs {
        #[arg(long)]
        model: PathBuf,
        /// Two-column pair file: label_a TAB label_b.
        #[arg(long)]
        pairs: PathBuf,
        /// 1-based factor axes, e.g. 1,2.
        #[arg(long, default_value = "1,2")]
        plane: String,
        /// Link distances to write (CSV).
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum ExportAction {
    /// Write documents with their principal-plane coordinates as XML.
    Xml {
        #[arg(long)]
        model: PathBuf,
        /// Records file from `ingest`.
        #[arg(long)]
        records: PathBuf,
        /// XML file to write.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum QueryAction {
    /// Documents inside a coordinate box.
    Bbox {
        /// Exported XML file to search.
        #[arg(long)]
        xml: PathBuf,
        /// Inclusive box XMIN,XMAX,YMIN,YMAX; coordinates may be negative.
        #[arg(long = "box", value_name = "XMIN,XMAX,YMIN,YMAX", allow_hyphen_values = true)]
        bounds: String,
    },
    /// Documents near a term's position.
    Around {
        /// Exported XML file to search.
        #[arg(long)]
        xml: PathBuf,
        /// Model holding the term positions.
        #[arg(long)]
        model: PathBuf,
        /// Term label to centre on.
        #[arg(long)]
        label: String,
        /// Half-width of the box along factor 1.
        #[arg(long)]
        dx: f64,
        /// Half-height of the box along factor 2.
        #[arg(long)]
        dy: f64,
    },
}

/// Die quietly when a downstream pipe closes (`textca ... | head`) instead of
/// panicking on the failed write.
fn restore_sigpipe() {
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
}

fn main() -> ExitCode {
    restore_sigpipe();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    if let Err(e) = configure_threads(cli.threads) {
        eprintln!("error: {e}");
        return ExitCode::from(e.exit_code());
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn configure_threads(threads: Option<usize>) -> CliResult<()> {
    let Some(n) = threads else { return Ok(()) };
    if n == 0 {
        return Err(CliError::Usage("--threads must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(format!("cannot configure {n} threads: {e}")))
}

fn run(command: Command) -> CliResult<()> {
    match command {
        Command::Ingest {
            input,
            delimiter,
            encoding,
            out,
        } => cmd_ingest(&input, &delimiter, encoding, &out),
        Command::Vocab { records, out } => cmd_vocab(&records, &out),
        Command::Matrix {
            action: Some(MatrixAction::Aggregate { table, groups, out }),
            records,
            vocab,
            top_k,
            out: build_out,
        } => {
            if records.is_some() || vocab.is_some() || top_k.is_some() || build_out.is_some() {
                return Err(CliError::Usage(
                    "matrix aggregate takes only --table, --groups, and --out".into(),
                ));
            }
            cmd_matrix_aggregate(&table, &groups, &out)
        }
        Command::Matrix {
            action: None,
            records,
            vocab,
            top_k,
            out,
        } => {
            let (records, vocab, top_k, out) = match (records, vocab, top_k, out) {
                (Some(r), Some(v), Some(k), Some(o)) => (r, v, k, o),
                _ => {
                    return Err(CliError::Usage(
                        "matrix requires --records, --vocab, --top-k, and --out".into(),
                    ))
                }
            };
            cmd_matrix_build(&records, &vocab, top_k, &out)
        }
        Command::Ca { action } => match action {
            CaAction::Fit { table, out, report } => cmd_ca_fit(&table, &out, &report),
            CaAction::Project { model, sup, out } => cmd_ca_project(&model, &sup, &out),
            CaAction::Plot { model, plane, out } => cmd_ca_plot(&model, &plane, &out),
        },
        Command::Powerlaw {
            vocab,
            range,
            out,
            points,
        } => cmd_powerlaw(&vocab, range.as_deref(), &out, &points),
        Command::Experiment {
            action:
                ExperimentAction::Aggregation {
                    table,
                    group_size,
                    ordering,
                    out,
                },
        } => cmd_experiment_aggregation(&table, group_size, ordering, &out),
        Command::Neighbors { action } => match action {
            NeighborsAction::Knn { model, label, k } => cmd_neighbors_knn(&model, &label, k),
            NeighborsAction::Rnn { model } => cmd_neighbors_rnn(&model),
            NeighborsAction::Cluster {
                model,
                linkage,
                out,
            } => cmd_neighbors_cluster(&model, linkage, &out),
            NeighborsAction::Pairs {
                model,
                pairs,
                plane,
                out,
            } => cmd_neighbors_pairs(&model, &pairs, &plane, &out),
        },
        Command::Export {
            action: ExportAction::Xml {
                model,
                records,
                out,
            },
        } => cmd_export_xml(&model, &records, &out),
        Command::Query { action } => match action {
            QueryAction::Bbox { xml, bounds } => cmd_query_bbox(&xml, &bounds),
            QueryAction::Around {
                xml,
                model,
                label,
                dx,
                dy,
            } => cmd_query_around(&xml, &model, &label, dx, dy),
        },
        Command::Run {
            config,
            out_dir,
            seed,
            top_k,
            group_size,
            ordering,
        } => cmd_run(
            &config,
            Overrides {
                out_dir,
                seed,
                top_k,
                group_size,
                ordering,
            },
        ),
    }
}

// ------------------------------------------------------------- io helpers

fn write_file(
    stage_name: &'static str,
    path: &Path,
    write: impl FnOnce(&mut BufWriter<File>) -> textca::Result<()>,
) -> CliResult<()> {
    let file = stage(stage_name, File::create(path).map_err(|e| with_path(path, e)))?;
    let mut writer = BufWriter::new(file);
    stage(stage_name, write(&mut writer))?;
    stage_io(stage_name, writer.flush())
}

fn open(stage_name: &'static str, path: &Path) -> CliResult<BufReader<File>> {
    let file = stage(stage_name, File::open(path).map_err(|e| with_path(path, e)))?;
    Ok(BufReader::new(file))
}

fn read_records_file(stage_name: &'static str, path: &Path) -> CliResult<RecordSet> {
    let records = stage(stage_name, formats::read_records(open(stage_name, path)?))?;
    stage(stage_name, RecordSet::from_records(records))
}

fn read_model_file(stage_name: &'static str, path: &Path) -> CliResult<ca::CaModel> {
    stage(stage_name, formats::read_model(open(stage_name, path)?))
}

fn read_table_file(stage_name: &'static str, path: &Path) -> CliResult<matrix::ContingencyTable> {
    stage(stage_name, formats::read_table(open(stage_name, path)?))
}

fn read_xml_records(path: &Path) -> CliResult<Vec<export::FactorRecord>> {
    let text = stage_io("query", fs::read_to_string(path))?;
    stage("query", export::parse_xml(&text))
}

// --------------------------------------------------------------- commands

fn cmd_ingest(
    input: &Path,
    delimiter: &str,
    encoding: EncodingName,
    out: &Path,
) -> CliResult<()> {
    let rule = config::parse_delimiter(delimiter)?;
    let raw = stage_io("ingest", fs::read(input))?;
    let records = stage("ingest", corpus::split_records(&raw, &rule, encoding.into()))?;
    write_file("ingest", out, |w| formats::write_records(w, &records.records))?;
    println!("ingested {} records into {}", records.len(), out.display());
    Ok(())
}

fn cmd_vocab(records: &Path, out: &Path) -> CliResult<()> {
    let records = read_records_file("vocab", records)?;
    let streams = corpus::tokenize_records(&records);
    let vocab = stage("vocab", corpus::build_vocabulary(&streams))?;
    write_file("vocab", out, |w| formats::write_vocabulary(w, &vocab))?;
    println!(
        "counted {} distinct terms ({} tokens) into {}",
        vocab.len(),
        vocab.total_frequency(),
        out.display()
    );
    Ok(())
}

fn cmd_matrix_build(records: &Path, vocab: &Path, top_k: usize, out: &Path) -> CliResult<()> {
    let records = read_records_file("matrix", records)?;
    let vocab = stage("matrix", formats::read_vocabulary(open("matrix", vocab)?))?;
    let selected = stage("matrix", corpus::top_terms(&vocab, top_k))?;
    let streams = corpus::tokenize_records(&records);
    let (table, report) = stage("matrix", matrix::build_table(&streams, &selected))?;
    if !report.dropped_records.is_empty() {
        eprintln!(
            "matrix: dropped {} records containing no selected term",
            report.dropped_records.len()
        );
    }
    write_file("matrix", out, |w| formats::write_table(w, &table))?;
    println!(
        "built {}x{} table (total {}) into {}",
        table.n_rows(),
        table.n_cols(),
        table.total(),
        out.display()
    );
    Ok(())
}

fn cmd_matrix_aggregate(table: &Path, groups: &Path, out: &Path) -> CliResult<()> {
    let table = read_table_file("matrix", table)?;
    let grouping = stage("matrix", formats::read_grouping(open("matrix", groups)?, &table))?;
    let aggregated = stage("matrix", matrix::aggregate_rows(&table, &grouping))?;
    write_file("matrix", out, |w| formats::write_table(w, &aggregated))?;
    println!(
        "aggregated {} rows into {} groups in {}",
        table.n_rows(),
        aggregated.n_rows(),
        out.display()
    );
    Ok(())
}

fn cmd_ca_fit(table: &Path, out: &Path, report: &Path) -> CliResult<()> {
    let table = read_table_file("fit", table)?;
    let model = stage("fit", ca::fit(&table))?;
    write_file("fit", out, |w| formats::write_model(w, &model))?;
    write_file("fit", report, |w| {
        formats::write_eigen_report(w, &ca::eigen_report(&model))
    })?;
    println!(
        "fitted {} factors (total inertia {:.6}) into {}",
        model.n_factors(),
        model.total_inertia,
        out.display()
    );
    Ok(())
}

fn cmd_ca_project(model: &Path, sup: &Path, out: &Path) -> CliResult<()> {
    let model = read_model_file("project", model)?;
    let sup = read_table_file("project", sup)?;
    let outcome = stage("project", ca::project_supplementary_rows(&model, &sup))?;
    for label in &outcome.skipped {
        eprintln!("project: row {label:?} has no mass on the model's columns; skipped");
    }
    write_file("project", out, |w| formats::write_coords(w, &outcome.coords))?;
    println!(
        "projected {} rows into {}",
        outcome.coords.len(),
        out.display()
    );
    Ok(())
}

fn cmd_ca_plot(model: &Path, plane: &str, out: &Path) -> CliResult<()> {
    let plane = config::parse_plane(plane)?;
    let model = read_model_file("plot", model)?;
    let points = stage("plot", scatter_points(&model, plane))?;
    write_file("plot", out, |w| formats::write_scatter(w, &points))?;
    println!("plotted {} points into {}", points.len(), out.display());
    Ok(())
}

fn cmd_powerlaw(
    vocab: &Path,
    range: Option<&str>,
    out: &Path,
    points: &Path,
) -> CliResult<()> {
    let regime = range.map(config::parse_range).transpose()?;
    let vocab = stage("powerlaw", formats::read_vocabulary(open("powerlaw", vocab)?))?;
    let rf = stage("powerlaw", powerlaw::rank_frequency(&vocab))?;
    let fit = stage("powerlaw", powerlaw::fit_loglog(&rf, regime))?;
    write_file("powerlaw", out, |w| formats::write_json(w, &fit))?;
    write_file("powerlaw", points, |w| {
        formats::write_loglog(w, &powerlaw::loglog_points(&rf))
    })?;
    println!(
        "slope {:.4} over ranks {}..{} (R^2 {:.4}) into {}",
        fit.slope,
        fit.fit_range.0,
        fit.fit_range.1,
        fit.r_squared,
        out.display()
    );
    Ok(())
}

fn cmd_experiment_aggregation(
    table: &Path,
    group_size: usize,
    ordering: OrderingName,
    out: &Path,
) -> CliResult<()> {
    let table = read_table_file("experiment", table)?;
    let reports = stage(
        "experiment",
        experiments::run_aggregation_protocol(&table, group_size, ordering.into()),
    )?;
    write_file("experiment", out, |w| formats::write_json(w, &reports))?;
    for report in &reports {
        println!(
            "{:?}: ssd {:.6} over {} points ({} factor signs flipped)",
            report.scenario,
            report.ssd,
            report.n_points,
            report.flips()
        );
    }
    Ok(())
}

fn cmd_neighbors_knn(model: &Path, label: &str, k: usize) -> CliResult<()> {
    let model = read_model_file("neighbors", model)?;
    let points = stage("neighbors", neighbors::LabeledPoints::from_model_rows(&model))?;
    let result = stage("neighbors", neighbors::nearest(&points, label, k))?;
    for (neighbor, sqdist) in &result.matches {
        println!("{neighbor}\t{}", sqdist.sqrt());
    }
    Ok(())
}

fn cmd_neighbors_rnn(model: &Path) -> CliResult<()> {
    let model = read_model_file("neighbors", model)?;
    let points = stage("neighbors", neighbors::LabeledPoints::from_model_rows(&model))?;
    let pairs = stage("neighbors", neighbors::reciprocal_pairs(&points))?;
    for (a, b) in &pairs {
        println!("{a}\t{b}");
    }
    Ok(())
}

fn cmd_neighbors_cluster(model: &Path, linkage: LinkageName, out: &Path) -> CliResult<()> {
    let model = read_model_file("neighbors", model)?;
    let points = stage("neighbors", neighbors::LabeledPoints::from_model_rows(&model))?;
    let dendrogram = stage(
        "neighbors",
        neighbors::nn_chain_cluster(&points, linkage.into()),
    )?;
    write_file("neighbors", out, |w| formats::write_json(w, &dendrogram))?;
    println!(
        "clustered {} documents ({} merges) into {}",
        points.len(),
        dendrogram.merges.len(),
        out.display()
    );
    Ok(())
}

fn read_pairs_file(path: &Path) -> CliResult<Vec<(String, String)>> {
    let reader = open("neighbors", path)?;
    let mut pairs = Vec::new();
    for (index, line) in reader.lines().enumerate() {
        let line = stage_io("neighbors", line)?;
        if line.is_empty() {
            continue;
        }
        let Some((a, b)) = line.split_once('\t') else {
            return Err(CliError::Stage {
                stage: "neighbors",
                source: textca::Error::Parse(format!(
                    "{}:{}: expected label_a<TAB>label_b",
                    path.display(),
                    index + 1
                )),
            });
        };
        pairs.push((a.to_string(), b.to_string()));
    }
    Ok(pairs)
}

fn cmd_neighbors_pairs(model: &Path, pairs: &Path, plane: &str, out: &Path) -> CliResult<()> {
    let (a, b) = config::parse_plane(plane)?;
    let model = read_model_file("neighbors", model)?;
    let points = stage("neighbors", neighbors::LabeledPoints::from_model_rows(&model))?;
    let pairs = read_pairs_file(pairs)?;
    let report = stage(
        "neighbors",
        neighbors::pair_links(&points, &pairs, (a - 1, b - 1)),
    )?;
    write_file("neighbors", out, |w| formats::write_links(w, &report))?;
    match (report.mean, report.max) {
        (Some(mean), Some(max)) => println!(
            "{} links in plane {a},{b}: mean {mean:.6}, max {max:.6}",
            report.links.len()
        ),
        _ => println!("no resolvable links"),
    }
    Ok(())
}

fn cmd_export_xml(model: &Path, records: &Path, out: &Path) -> CliResult<()> {
    let model = read_model_file("export", model)?;
    let records = read_records_file("export", records)?;
    let factor_records = stage(
        "export",
        export::build_factor_records(&model, &records.records),
    )?;
    write_file("export", out, |w| {
        export::export_xml(&factor_records, w).map(|_| ())
    })?;
    println!(
        "exported {} documents into {}",
        factor_records.len(),
        out.display()
    );
    Ok(())
}

fn cmd_query_bbox(xml: &Path, bounds: &str) -> CliResult<()> {
    let bbox = config::parse_box(bounds)?;
    let records = read_xml_records(xml)?;
    for id in query::bbox_query(&records, &bbox) {
        println!("{id}");
    }
    Ok(())
}

fn cmd_query_around(xml: &Path, model: &Path, label: &str, dx: f64, dy: f64) -> CliResult<()> {
    let model = read_model_file("query", model)?;
    let bbox = stage("query", query::center_box(&model, label, dx, dy))?;
    let records = read_xml_records(xml)?;
    for id in query::bbox_query(&records, &bbox) {
        println!("{id}");
    }
    Ok(())
}

fn cmd_run(config_path: &Path, overrides: Overrides) -> CliResult<()> {
    let mut config = load_config(config_path)?;
    config.apply_overrides(&overrides);
    let manifest = run_pipeline(&config)?;
    println!(
        "pipeline wrote {} artifacts and {} to {}",
        manifest.files.len(),
        MANIFEST_NAME,
        config.output.dir.display()
    );
    Ok(())
}
