//! Declarative pipeline configuration. One TOML file drives ingest through
//! export; command-line flags override individual keys so experiment grids
//! can be scripted without editing the file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use textca::corpus::{DelimiterRule, Encoding};
use textca::experiments::RowOrdering;
use textca::neighbors::Linkage;
use textca::query::BoundingBox;

use crate::{CliError, CliResult};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub input: InputSection,
    pub vocab: VocabSection,
    #[serde(default)]
    pub fit: FitSection,
    #[serde(default)]
    pub experiment: Option<ExperimentSection>,
    #[serde(default)]
    pub neighbors: Option<NeighborsSection>,
    #[serde(default)]
    pub export: Option<ExportSection>,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSection {
    /// Raw corpus file.
    pub path: PathBuf,
    #[serde(default)]
    pub encoding: EncodingName,
    /// Literal delimiter line, or `count:N` for fixed-size line blocks.
    pub delimiter: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VocabSection {
    /// Number of most-frequent terms kept as table columns.
    pub top_k: usize,
    /// Keep only terms at least this long; 0 disables the filter.
    #[serde(default)]
    pub min_term_length: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSection {
    /// 1-based factor axes written to the scatter artifact.
    pub plane: (usize, usize),
}

impl Default for FitSection {
    fn default() -> Self {
        FitSection { plane: (1, 2) }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    /// Rows per aggregated group; must divide the table's row count.
    pub group_size: usize,
    #[serde(default)]
    pub ordering: OrderingName,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NeighborsSection {
    #[serde(default)]
    pub linkage: LinkageName,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExportSection {
    #[serde(default = "default_true")]
    pub xml: bool,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
    /// Recorded in the manifest; fixed seed plus fixed thread count pins
    /// every artifact byte-for-byte.
    pub seed: u64,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: PathBuf::from("out"),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum EncodingName {
    #[default]
    Latin1,
    Utf8,
}

impl From<EncodingName> for Encoding {
    fn from(name: EncodingName) -> Encoding {
        match name {
            EncodingName::Latin1 => Encoding::Latin1,
            EncodingName::Utf8 => Encoding::Utf8,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OrderingName {
    #[default]
    Given,
    Factor1,
}

impl From<OrderingName> for RowOrdering {
    fn from(name: OrderingName) -> RowOrdering {
        match name {
            OrderingName::Given => RowOrdering::Given,
            OrderingName::Factor1 => RowOrdering::Factor1,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum LinkageName {
    #[default]
    Ward,
    Average,
}

impl From<LinkageName> for Linkage {
    fn from(name: LinkageName) -> Linkage {
        match name {
            LinkageName::Ward => Linkage::Ward,
            LinkageName::Average => Linkage::Average,
        }
    }
}

/// Flag-level overrides for individual config keys.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub out_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub top_k: Option<usize>,
    pub group_size: Option<usize>,
    pub ordering: Option<OrderingName>,
}

pub fn load_config(path: &Path) -> CliResult<PipelineConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
}

impl PipelineConfig {
    pub fn apply_overrides(&mut self, overrides: &Overrides) {
        if let Some(dir) = &overrides.out_dir {
            self.output.dir = dir.clone();
        }
        if let Some(seed) = overrides.seed {
            self.output.seed = seed;
        }
        if let Some(k) = overrides.top_k {
            self.vocab.top_k = k;
        }
        if let Some(group_size) = overrides.group_size {
            match &mut self.experiment {
                Some(section) => section.group_size = group_size,
                None => {
                    self.experiment = Some(ExperimentSection {
                        group_size,
                        ordering: OrderingName::default(),
                    })
                }
            }
        }
        if let Some(ordering) = overrides.ordering {
            if let Some(section) = &mut self.experiment {
                section.ordering = ordering;
            }
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.vocab.top_k == 0 {
            return Err(CliError::Usage("vocab.top_k must be at least 1".into()));
        }
        if let Some(section) = &self.experiment {
            if section.group_size == 0 {
                return Err(CliError::Usage(
                    "experiment.group_size must be at least 1".into(),
                ));
            }
        }
        let (a, b) = self.fit.plane;
        if a == 0 || b == 0 || a == b {
            return Err(CliError::Usage(
                "fit.plane axes must be distinct and 1-based".into(),
            ));
        }
        Ok(())
    }

    pub fn delimiter_rule(&self) -> CliResult<DelimiterRule> {
        parse_delimiter(&self.input.delimiter)
    }
}

/// `count:N` cuts every N lines; anything else is a literal delimiter line.
pub fn parse_delimiter(text: &str) -> CliResult<DelimiterRule> {
    if let Some(rest) = text.strip_prefix("count:") {
        let n: usize = rest
            .parse()
            .map_err(|_| CliError::Usage(format!("bad line count {rest:?} in delimiter")))?;
        if n == 0 {
            return Err(CliError::Usage(
                "delimiter line count must be at least 1".into(),
            ));
        }
        Ok(DelimiterRule::LineCount(n))
    } else {
        Ok(DelimiterRule::Literal(text.to_string()))
    }
}

/// Two comma-separated 1-based factor axes, e.g. `1,2`.
pub fn parse_plane(text: &str) -> CliResult<(usize, usize)> {
    let bad = || CliError::Usage(format!("bad plane {text:?}: expected two 1-based axes like 1,2"));
    let (a, b) = text.split_once(',').ok_or_else(bad)?;
    let a: usize = a.trim().parse().map_err(|_| bad())?;
    let b: usize = b.trim().parse().map_err(|_| bad())?;
    if a == 0 || b == 0 || a == b {
        return Err(bad());
    }
    Ok((a, b))
}

/// Inclusive rank range `LO:HI`.
pub fn parse_range(text: &str) -> CliResult<(u64, u64)> {
    let bad = || CliError::Usage(format!("bad range {text:?}: expected LO:HI with 1 <= LO <= HI"));
    let (lo, hi) = text.split_once(':').ok_or_else(bad)?;
    let lo: u64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: u64 = hi.trim().parse().map_err(|_| bad())?;
    if lo == 0 || lo > hi {
        return Err(bad());
    }
    Ok((lo, hi))
}

/// `XMIN,XMAX,YMIN,YMAX` with finite values and min <= max per axis.
pub fn parse_box(text: &str) -> CliResult<BoundingBox> {
    let bad = |why: String| CliError::Usage(format!("bad box {text:?}: {why}"));
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 4 {
        return Err(bad("expected XMIN,XMAX,YMIN,YMAX".into()));
    }
    let mut values = [0.0f64; 4];
    for (slot, part) in values.iter_mut().zip(&parts) {
        *slot = part
            .trim()
            .parse()
            .map_err(|_| bad(format!("{part:?} is not a number")))?;
    }
    BoundingBox::new(values[0], values[1], values[2], values[3]).map_err(|e| bad(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[input]
path = "corpus.txt"
delimiter = "-----"

[vocab]
top_k = 25
"#;

    #[test]
    fn minimal_config_fills_defaults() {
        let config: PipelineConfig = toml::from_str(MINIMAL).unwrap();
        config.validate().unwrap();
        assert_eq!(config.input.encoding, EncodingName::Latin1);
        assert_eq!(config.vocab.min_term_length, 0);
        assert_eq!(config.fit.plane, (1, 2));
        assert!(config.experiment.is_none());
        assert_eq!(config.output.dir, PathBuf::from("out"));
        assert_eq!(config.output.seed, 0);
        assert_eq!(
            config.delimiter_rule().unwrap(),
            DelimiterRule::Literal("-----".into())
        );
    }

    #[test]
    fn full_config_parses_every_section() {
        let text = r#"
[input]
path = "corpus.txt"
encoding = "utf8"
delimiter = "count:12"

[vocab]
top_k = 100
min_term_length = 3

[fit]
plane = [1, 3]

[experiment]
group_size = 10
ordering = "factor1"

[neighbors]
linkage = "average"

[export]
xml = true

[output]
dir = "artifacts"
seed = 42
"#;
        let config: PipelineConfig = toml::from_str(text).unwrap();
        config.validate().unwrap();
        assert_eq!(
            config.delimiter_rule().unwrap(),
            DelimiterRule::LineCount(12)
        );
        assert_eq!(config.fit.plane, (1, 3));
        let experiment = config.experiment.unwrap();
        assert_eq!(experiment.group_size, 10);
        assert_eq!(experiment.ordering, OrderingName::Factor1);
        assert_eq!(config.neighbors.unwrap().linkage, LinkageName::Average);
        assert_eq!(config.output.seed, 42);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = format!("{MINIMAL}\n[vocab.extra]\nx = 1\n");
        assert!(toml::from_str::<PipelineConfig>(&text).is_err());
    }

    #[test]
    fn overrides_replace_config_keys() {
        let mut config: PipelineConfig = toml::from_str(MINIMAL).unwrap();
        config.apply_overrides(&Overrides {
            out_dir: Some(PathBuf::from("elsewhere")),
            seed: Some(9),
            top_k: Some(7),
            group_size: Some(5),
            ordering: Some(OrderingName::Factor1),
        });
        assert_eq!(config.output.dir, PathBuf::from("elsewhere"));
        assert_eq!(config.output.seed, 9);
        assert_eq!(config.vocab.top_k, 7);
        let experiment = config.experiment.unwrap();
        assert_eq!(experiment.group_size, 5);
        assert_eq!(experiment.ordering, OrderingName::Factor1);
    }

    #[test]
    fn validation_rejects_degenerate_knobs() {
        let mut config: PipelineConfig = toml::from_str(MINIMAL).unwrap();
        config.vocab.top_k = 0;
        assert!(matches!(config.validate(), Err(CliError::Usage(_))));

        let mut config: PipelineConfig = toml::from_str(MINIMAL).unwrap();
        config.fit.plane = (2, 2);
        assert!(config.validate().is_err());
    }

    #[test]
    fn value_parsers_accept_and_reject() {
        assert_eq!(parse_plane("1,2").unwrap(), (1, 2));
        assert_eq!(parse_plane(" 2 , 3 ").unwrap(), (2, 3));
        assert!(parse_plane("1").is_err());
        assert!(parse_plane("0,2").is_err());
        assert!(parse_plane("2,2").is_err());

        assert_eq!(parse_range("5:40").unwrap(), (5, 40));
        assert!(parse_range("0:4").is_err());
        assert!(parse_range("9:3").is_err());
        assert!(parse_range("9").is_err());

        let bbox = parse_box("-1,1,-0.5,0.5").unwrap();
        assert!(bbox.contains(0.0, 0.0));
        assert!(!bbox.contains(2.0, 0.0));
        assert!(parse_box("1,2,3").is_err());
        assert!(parse_box("2,1,0,1").is_err());
        assert!(parse_box("a,b,c,d").is_err());

        assert!(matches!(
            parse_delimiter("count:0"),
            Err(CliError::Usage(_))
        ));
        assert!(matches!(
            parse_delimiter("count:x"),
            Err(CliError::Usage(_))
        ));
    }
}
