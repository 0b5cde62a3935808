//! Export of factor-annotated documents as a search-index XML file.
//!
//! The layout is frozen so output is byte-deterministic: an `<add>` root,
//! one `<doc>` per record, and inside it exactly the fields id, xcoord,
//! ycoord, name, recipe in that order, each on its own two-space-indented
//! line. Coordinates print in the shortest decimal form that parses back
//! to the same 64-bit float; text escapes the five XML entities. The
//! parser here reads exactly this dialect back, closing the round trip.

use std::collections::HashMap;
use std::io::Write;

use crate::ca::CaModel;
use crate::corpus::Record;
use crate::{Error, Result};

/// A document annotated with its principal-plane position.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorRecord {
    pub id: String,
    pub name: String,
    /// Factor-1 coordinate.
    pub xcoord: f64,
    /// Factor-2 coordinate.
    pub ycoord: f64,
    /// Full text, newlines preserved.
    pub body: String,
}

fn validate(records: &[FactorRecord]) -> Result<()> {
    let mut seen = std::collections::HashSet::with_capacity(records.len());
    for record in records {
        if record.id.is_empty() {
            return Err(Error::InvalidLabel("empty record id".into()));
        }
        if !seen.insert(record.id.as_str()) {
            return Err(Error::DuplicateId(record.id.clone()));
        }
        if !record.xcoord.is_finite() || !record.ycoord.is_finite() {
            return Err(Error::Parse(format!(
                "record {:?} has a non-finite coordinate",
                record.id
            )));
        }
    }
    Ok(())
}

fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for ch in text.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(ch),
        }
    }
    out
}

fn unescape(text: &str) -> Result<String> {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(pos) = rest.find('&') {
        out.push_str(&rest[..pos]);
        rest = &rest[pos..];
        let entity = ["&amp;", "&lt;", "&gt;", "&quot;", "&apos;"]
            .iter()
            .find(|e| rest.starts_with(**e))
            .ok_or_else(|| {
                Error::Parse(format!(
                    "unrecognized entity at {:?}",
                    &rest[..rest.len().min(8)]
                ))
            })?;
        out.push(match *entity {
            "&amp;" => '&',
            "&lt;" => '<',
            "&gt;" => '>',
            "&quot;" => '"',
            _ => '\'',
        });
        rest = &rest[entity.len()..];
    }
    out.push_str(rest);
    Ok(out)
}

/// Write the records as index XML. All validation happens before the first
/// byte is written, so a failed export leaves the stream untouched.
/// Returns the number of records written.
pub fn export_xml(records: &[FactorRecord], out: &mut impl Write) -> Result<usize> {
    validate(records)?;
    if records.is_empty() {
        out.write_all(b"<add></add>\n")?;
        return Ok(0);
    }
    let mut buf = String::new();
    buf.push_str("<add>\n");
    for record in records {
        buf.push_str("<doc>\n");
        let field = |buf: &mut String, name: &str, value: &str| {
            buf.push_str("  <field name=\"");
            buf.push_str(name);
            buf.push_str("\">");
            buf.push_str(&escape(value));
            buf.push_str("</field>\n");
        };
        field(&mut buf, "id", &record.id);
        field(&mut buf, "xcoord", &record.xcoord.to_string());
        field(&mut buf, "ycoord", &record.ycoord.to_string());
        field(&mut buf, "name", &record.name);
        field(&mut buf, "recipe", &record.body);
        buf.push_str("</doc>\n");
    }
    buf.push_str("</add>\n");
    out.write_all(buf.as_bytes())?;
    Ok(records.len())
}

/// Cursor over the XML text, tolerant of whitespace between structural
/// tags but strict about everything else.
struct Cursor<'a> {
    rest: &'a str,
}

impl<'a> Cursor<'a> {
    fn skip_ws(&mut self) {
        self.rest = self.rest.trim_start();
    }

    fn eat(&mut self, token: &str) -> bool {
        if let Some(after) = self.rest.strip_prefix(token) {
            self.rest = after;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, token: &str) -> Result<()> {
        if self.eat(token) {
            Ok(())
        } else {
            Err(Error::Parse(format!(
                "expected {token:?} at {:?}",
                &self.rest[..self.rest.len().min(24)]
            )))
        }
    }

    fn until(&mut self, stop: &str) -> Result<&'a str> {
        let pos = self.rest.find(stop).ok_or_else(|| {
            Error::Parse(format!("missing closing {stop:?}"))
        })?;
        let taken = &self.rest[..pos];
        self.rest = &self.rest[pos + stop.len()..];
        Ok(taken)
    }
}

const FIELD_ORDER: [&str; 5] = ["id", "xcoord", "ycoord", "name", "recipe"];

/// Parse index XML written by [`export_xml`] back into records. The frozen
/// field order is enforced; coordinates must be finite numbers.
pub fn parse_xml(input: &str) -> Result<Vec<FactorRecord>> {
    let mut cursor = Cursor { rest: input };
    cursor.skip_ws();
    cursor.expect("<add>")?;
    let mut records = Vec::new();
    loop {
        cursor.skip_ws();
        if cursor.eat("</add>") {
            break;
        }
        cursor.expect("<doc>")?;
        let mut values = Vec::with_capacity(FIELD_ORDER.len());
        for name in FIELD_ORDER {
            cursor.skip_ws();
            cursor.expect("<field name=\"")?;
            let found = cursor.until("\"")?;
            if found != name {
                return Err(Error::Parse(format!(
                    "expected field {name:?}, found {found:?}"
                )));
            }
            cursor.expect(">")?;
            values.push(unescape(cursor.until("</field>")?)?);
        }
        cursor.skip_ws();
        cursor.expect("</doc>")?;
        let parse_coord = |text: &str| -> Result<f64> {
            let value: f64 = text
                .parse()
                .map_err(|_| Error::Parse(format!("bad coordinate {text:?}")))?;
            if !value.is_finite() {
                return Err(Error::Parse(format!("non-finite coordinate {text:?}")));
            }
            Ok(value)
        };
        records.push(FactorRecord {
            id: values[0].clone(),
            xcoord: parse_coord(&values[1])?,
            ycoord: parse_coord(&values[2])?,
            name: values[3].clone(),
            body: values[4].clone(),
        });
    }
    cursor.skip_ws();
    if !cursor.rest.is_empty() {
        return Err(Error::Parse(format!(
            "trailing content after </add>: {:?}",
            &cursor.rest[..cursor.rest.len().min(24)]
        )));
    }
    validate(&records)?;
    Ok(records)
}

/// Display name for a document: the first line with any non-whitespace,
/// trimmed; the id when the body has none.
fn derive_name(id: &str, body: &str) -> String {
    body.lines()
        .map(str::trim)
        .find(|line| !line.is_empty())
        .unwrap_or(id)
        .to_string()
}

/// Join a fitted model with the source documents: one record per model row,
/// in model order, positioned at its factor-1/factor-2 coordinates. The
/// model must carry at least two factors; every model row must have a
/// source document (extra documents are ignored, as they were dropped
/// during table construction).
pub fn build_factor_records(model: &CaModel, records: &[Record]) -> Result<Vec<FactorRecord>> {
    if model.n_factors() < 2 {
        return Err(Error::Degenerate(format!(
            "planar export needs 2 factors, model has {}",
            model.n_factors()
        )));
    }
    let by_id: HashMap<&str, &Record> =
        records.iter().map(|r| (r.id.as_str(), r)).collect();
    model
        .row_labels
        .iter()
        .enumerate()
        .map(|(i, label)| {
            let source = by_id
                .get(label.as_str())
                .ok_or_else(|| Error::UnknownLabel(label.clone()))?;
            Ok(FactorRecord {
                id: label.clone(),
                name: derive_name(label, &source.raw_text),
                xcoord: model.row_coords[i][0],
                ycoord: model.row_coords[i][1],
                body: source.raw_text.clone(),
            })
        })
        .collect()
}
