//! End-to-end checks of the `textca` binary: the bundled-corpus determinism
//! guarantee, the exit-code contract, and a walk across every subcommand.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::Instant;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_textca"))
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/data")
        .join(name)
}

fn stderr_of(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

fn write_pipeline_config(path: &Path) {
    let config = format!(
        r#"
[input]
path = "{corpus}"
delimiter = "-----"

[vocab]
top_k = 40
min_term_length = 3

[experiment]
group_size = 10
ordering = "given"

[neighbors]
linkage = "ward"

[export]
xml = true

[output]
seed = 7
"#,
        corpus = data("toy-corpus.txt").display()
    );
    fs::write(path, config).unwrap();
}

#[test]
fn criterion_12_bundled_pipeline_is_deterministic() {
    let started = Instant::now();
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("pipeline.toml");
    write_pipeline_config(&config);

    let run = |out_dir: &Path| -> String {
        let output = bin()
            .arg("run")
            .arg("--config")
            .arg(&config)
            .arg("--out-dir")
            .arg(out_dir)
            .args(["--threads", "2"])
            .output()
            .unwrap();
        assert!(
            output.status.success(),
            "pipeline failed:\n{}",
            stderr_of(&output)
        );
        fs::read_to_string(out_dir.join("manifest.json")).unwrap()
    };

    let first = run(&tmp.path().join("out-a"));
    let second = run(&tmp.path().join("out-b"));
    assert_eq!(first, second, "manifests differ between identical runs");

    let manifest: serde_json::Value = serde_json::from_str(&first).unwrap();
    assert_eq!(manifest["seed"], 7);
    assert_eq!(manifest["threads"], 2);
    let files = manifest["files"].as_array().unwrap();
    let names: Vec<&str> = files.iter().map(|f| f["path"].as_str().unwrap()).collect();
    for name in [
        "records.jsonl",
        "vocab.tsv",
        "table.tsv",
        "model.bin",
        "eig.tsv",
        "coords.tsv",
        "scatter.csv",
        "experiment.json",
        "dendrogram.json",
        "rnn.tsv",
        "corpus.xml",
    ] {
        assert!(names.contains(&name), "{name} missing from manifest");
    }
    for file in files {
        let path = tmp.path().join("out-a").join(file["path"].as_str().unwrap());
        assert_eq!(
            fs::metadata(&path).unwrap().len(),
            file["bytes"].as_u64().unwrap(),
            "size mismatch for {}",
            path.display()
        );
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 30.0, "pipeline pair took {elapsed:?}");
    println!(
        "ACCEPTANCE 12 PASS: two pipeline runs over the bundled 50-document corpus \
         produced identical manifests ({} artifacts) in {elapsed:?}",
        files.len()
    );
}

#[test]
fn usage_errors_exit_1() {
    let unknown = bin().arg("frobnicate").output().unwrap();
    assert_eq!(unknown.status.code(), Some(1));

    let missing_flag = bin().args(["vocab", "--out", "v.tsv"]).output().unwrap();
    assert_eq!(missing_flag.status.code(), Some(1));

    let inverted_box = bin()
        .args(["query", "bbox", "--xml", "x.xml", "--box", "1,0,0,1"])
        .output()
        .unwrap();
    assert_eq!(inverted_box.status.code(), Some(1));
    assert!(stderr_of(&inverted_box).contains("bad box"));

    let bare_matrix = bin().arg("matrix").output().unwrap();
    assert_eq!(bare_matrix.status.code(), Some(1));
    assert!(stderr_of(&bare_matrix).contains("requires"));
}

#[test]
fn data_errors_exit_2_with_stage_tag() {
    let output = bin()
        .args([
            "ca",
            "fit",
            "--table",
            "/nonexistent/table.tsv",
            "--out",
            "m.bin",
            "--report",
            "eig.tsv",
        ])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    assert!(stderr_of(&output).contains("stage fit"));

    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("pipeline.toml");
    fs::write(
        &config,
        format!(
            "[input]\npath = \"{}\"\ndelimiter = \"-----\"\n\n[vocab]\ntop_k = 10\n\n[output]\ndir = \"{}\"\n",
            tmp.path().join("absent.txt").display(),
            tmp.path().join("out").display()
        ),
    )
    .unwrap();
    let output = bin()
        .arg("run")
        .arg("--config")
        .arg(&config)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    assert!(stderr_of(&output).contains("stage ingest"));
    assert!(
        !tmp.path().join("out/manifest.json").exists(),
        "failed run must not leave a manifest"
    );
}

#[test]
fn degenerate_models_exit_3() {
    let tmp = tempfile::tempdir().unwrap();
    let table = tmp.path().join("table.tsv");
    fs::write(
        &table,
        "#rows 2 #cols 2 #total 6\n\
         r000001\tc0\t2\nr000001\tc1\t1\nr000002\tc0\t1\nr000002\tc1\t2\n",
    )
    .unwrap();
    let records = tmp.path().join("records.jsonl");
    fs::write(
        &records,
        "{\"id\":\"r000001\",\"text\":\"one\"}\n{\"id\":\"r000002\",\"text\":\"two\"}\n",
    )
    .unwrap();
    let model = tmp.path().join("model.bin");

    let fit = bin()
        .args(["ca", "fit"])
        .arg("--table")
        .arg(&table)
        .arg("--out")
        .arg(&model)
        .arg("--report")
        .arg(tmp.path().join("eig.tsv"))
        .output()
        .unwrap();
    assert!(fit.status.success(), "{}", stderr_of(&fit));

    // A 2x2 table has one factor; the planar export must refuse it.
    let export = bin()
        .args(["export", "xml"])
        .arg("--model")
        .arg(&model)
        .arg("--records")
        .arg(&records)
        .arg("--out")
        .arg(tmp.path().join("corpus.xml"))
        .output()
        .unwrap();
    assert_eq!(export.status.code(), Some(3));
    assert!(stderr_of(&export).contains("stage export"));
}

#[test]
fn help_lists_every_subcommand() {
    let output = bin().arg("--help").output().unwrap();
    assert!(output.status.success());
    let text = String::from_utf8(output.stdout).unwrap();
    for name in [
        "ingest",
        "vocab",
        "matrix",
        "ca",
        "powerlaw",
        "experiment",
        "neighbors",
        "export",
        "query",
        "run",
        "--threads",
    ] {
        assert!(text.contains(name), "help missing {name}");
    }
}

#[test]
fn every_subcommand_round_trips_on_the_bundled_corpus() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let path = |name: &str| dir.join(name);
    let ok = |args: &mut Command| {
        let output = args.output().unwrap();
        assert!(output.status.success(), "{}", stderr_of(&output));
        output
    };

    ok(bin()
        .args(["ingest", "--delimiter", "-----"])
        .arg("--input")
        .arg(data("toy-corpus.txt"))
        .arg("--out")
        .arg(path("records.jsonl")));
    ok(bin()
        .arg("vocab")
        .arg("--records")
        .arg(path("records.jsonl"))
        .arg("--out")
        .arg(path("vocab.tsv")));
    ok(bin()
        .args(["matrix", "--top-k", "40"])
        .arg("--records")
        .arg(path("records.jsonl"))
        .arg("--vocab")
        .arg(path("vocab.tsv"))
        .arg("--out")
        .arg(path("table.tsv")));
    ok(bin()
        .args(["ca", "fit"])
        .arg("--table")
        .arg(path("table.tsv"))
        .arg("--out")
        .arg(path("model.bin"))
        .arg("--report")
        .arg(path("eig.tsv")));
    ok(bin()
        .args(["ca", "plot", "--plane", "1,2"])
        .arg("--model")
        .arg(path("model.bin"))
        .arg("--out")
        .arg(path("scatter.csv")));
    // The active table doubles as a supplementary table.
    ok(bin()
        .args(["ca", "project"])
        .arg("--model")
        .arg(path("model.bin"))
        .arg("--sup")
        .arg(path("table.tsv"))
        .arg("--out")
        .arg(path("coords.tsv")));
    ok(bin()
        .arg("powerlaw")
        .arg("--vocab")
        .arg(path("vocab.tsv"))
        .arg("--out")
        .arg(path("fit.json"))
        .arg("--points")
        .arg(path("loglog.csv")));
    ok(bin()
        .args(["experiment", "aggregation", "--group-size", "10", "--ordering", "factor1"])
        .arg("--table")
        .arg(path("table.tsv"))
        .arg("--out")
        .arg(path("report.json")));

    let knn = ok(bin()
        .args(["neighbors", "knn", "--label", "r000001", "--k", "3"])
        .arg("--model")
        .arg(path("model.bin")));
    assert_eq!(String::from_utf8(knn.stdout).unwrap().lines().count(), 3);
    ok(bin()
        .args(["neighbors", "rnn"])
        .arg("--model")
        .arg(path("model.bin")));
    ok(bin()
        .args(["neighbors", "cluster", "--linkage", "average"])
        .arg("--model")
        .arg(path("model.bin"))
        .arg("--out")
        .arg(path("dendro.json")));
    fs::write(path("pairs.tsv"), "r000001\tr000002\nr000003\tr000004\n").unwrap();
    ok(bin()
        .args(["neighbors", "pairs", "--plane", "1,2"])
        .arg("--model")
        .arg(path("model.bin"))
        .arg("--pairs")
        .arg(path("pairs.tsv"))
        .arg("--out")
        .arg(path("links.csv")));

    fs::write(
        path("groups.tsv"),
        (1..=50)
            .map(|i| format!("g{}\tr{:06}\n", if i <= 25 { 1 } else { 2 }, i))
            .collect::<String>(),
    )
    .unwrap();
    ok(bin()
        .args(["matrix", "aggregate"])
        .arg("--table")
        .arg(path("table.tsv"))
        .arg("--groups")
        .arg(path("groups.tsv"))
        .arg("--out")
        .arg(path("agg.tsv")));

    ok(bin()
        .args(["export", "xml"])
        .arg("--model")
        .arg(path("model.bin"))
        .arg("--records")
        .arg(path("records.jsonl"))
        .arg("--out")
        .arg(path("corpus.xml")));
    let bbox = ok(bin()
        .args(["query", "bbox", "--box", "-10,10,-10,10"])
        .arg("--xml")
        .arg(path("corpus.xml")));
    assert_eq!(String::from_utf8(bbox.stdout).unwrap().lines().count(), 50);
    ok(bin()
        .args(["query", "around", "--label", "salt", "--dx", "0.5", "--dy", "0.5"])
        .arg("--xml")
        .arg(path("corpus.xml"))
        .arg("--model")
        .arg(path("model.bin")));

    for artifact in [
        "records.jsonl",
        "vocab.tsv",
        "table.tsv",
        "model.bin",
        "eig.tsv",
        "scatter.csv",
        "coords.tsv",
        "fit.json",
        "loglog.csv",
        "report.json",
        "dendro.json",
        "links.csv",
        "agg.tsv",
        "corpus.xml",
    ] {
        assert!(
            fs::metadata(path(artifact)).unwrap().len() > 0,
            "{artifact} is empty"
        );
    }
}
