//! Rater CSV files for the `agreement` command.
//!
//! Schema: a header line `id,realism,...,transformation` (all nine
//! attributes, canonical order), then one row per rated item with integer
//! scores in 1..=5. Ratings from two raters are matched by `id`, so the two
//! files must cover exactly the same items.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::Context;

use artscore::dataset::{AttributeMap, SCORE_MAX, SCORE_MIN};
use artscore::Attribute;

use crate::UsageError;

/// One rater's scores: item ids in file order plus one score column per
/// attribute, aligned with `ids`.
#[derive(Debug)]
pub struct RatingsFile {
    pub ids: Vec<String>,
    pub scores: AttributeMap<Vec<u8>>,
}

impl RatingsFile {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    /// Index of each id, for aligning a second rater against this one.
    pub fn id_index(&self) -> BTreeMap<&str, usize> {
        self.ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect()
    }
}

fn expected_header() -> Vec<&'static str> {
    let mut h = vec!["id"];
    h.extend(Attribute::ALL.iter().map(|a| a.key()));
    h
}

/// Parses and validates one rater CSV.
pub fn load_ratings(path: &Path) -> anyhow::Result<RatingsFile> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .with_context(|| format!("open ratings file {}", path.display()))?;

    let header: Vec<String> =
        reader.headers().context("read ratings header")?.iter().map(str::to_string).collect();
    let expected = expected_header();
    if header != expected {
        return Err(UsageError(format!(
            "{}: bad header: expected '{}', got '{}'",
            path.display(),
            expected.join(","),
            header.join(",")
        ))
        .into());
    }

    let mut ids: Vec<String> = Vec::new();
    let mut columns: Vec<Vec<u8>> = vec![Vec::new(); Attribute::COUNT];
    for (i, record) in reader.records().enumerate() {
        let line = i + 2; // header is line 1
        let record =
            record.with_context(|| format!("{}: malformed row at line {line}", path.display()))?;
        if record.len() != expected.len() {
            return Err(UsageError(format!(
                "{}:{line}: expected {} fields, got {}",
                path.display(),
                expected.len(),
                record.len()
            ))
            .into());
        }
        let id = record[0].to_string();
        if id.is_empty() {
            return Err(UsageError(format!("{}:{line}: empty id", path.display())).into());
        }
        if ids.contains(&id) {
            return Err(
                UsageError(format!("{}:{line}: duplicate id '{id}'", path.display())).into()
            );
        }
        for (col, column) in columns.iter_mut().enumerate() {
            let field = &record[col + 1];
            let score: u8 = field.parse().map_err(|_| {
                UsageError(format!(
                    "{}:{line}: score '{field}' for {} is not an integer",
                    path.display(),
                    Attribute::ALL[col].key()
                ))
            })?;
            if !(SCORE_MIN..=SCORE_MAX).contains(&score) {
                return Err(UsageError(format!(
                    "{}:{line}: score {score} for {} outside {SCORE_MIN}..={SCORE_MAX}",
                    path.display(),
                    Attribute::ALL[col].key()
                ))
                .into());
            }
            column.push(score);
        }
        ids.push(id);
    }
    if ids.is_empty() {
        return Err(UsageError(format!("{}: no rated items", path.display())).into());
    }

    let scores = AttributeMap::from_fn(|a| columns[a.index()].clone());
    Ok(RatingsFile { ids, scores })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let f = tempfile::NamedTempFile::new().unwrap();
        fs::write(f.path(), content).unwrap();
        f
    }

    const HEADER: &str = "id,realism,deformation,imagination,color_richness,color_contrast,\
                          line_combination,line_texture,picture_organization,transformation";

    #[test]
    fn parses_a_well_formed_file() {
        let f = write_tmp(&format!("{HEADER}\nitem-1,1,2,3,4,5,1,2,3,4\nitem-2,5,4,3,2,1,5,4,3,2\n"));
        let ratings = load_ratings(f.path()).unwrap();
        assert_eq!(ratings.ids, vec!["item-1", "item-2"]);
        assert_eq!(ratings.scores.get(Attribute::Realism), &vec![1, 5]);
        assert_eq!(ratings.scores.get(Attribute::Transformation), &vec![4, 2]);
    }

    #[test]
    fn rejects_wrong_header_out_of_range_and_duplicates() {
        let bad_header = write_tmp("id,realism\nitem-1,3\n");
        assert!(load_ratings(bad_header.path()).unwrap_err().to_string().contains("bad header"));

        let out_of_range = write_tmp(&format!("{HEADER}\nitem-1,1,2,3,4,5,1,2,3,6\n"));
        assert!(load_ratings(out_of_range.path()).unwrap_err().to_string().contains("outside"));

        let dup = write_tmp(&format!("{HEADER}\nitem-1,1,2,3,4,5,1,2,3,4\nitem-1,1,2,3,4,5,1,2,3,4\n"));
        assert!(load_ratings(dup.path()).unwrap_err().to_string().contains("duplicate id"));
    }
}
