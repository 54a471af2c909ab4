use std::fs::File;
use std::io::Read;
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::labels::{label_sbic, label_toxigen};
use super::{Dataset, Label, Sample, SampleSet, Split};
use crate::error::{Error, Result};

/// Column names for one corpus. Unset fields fall back to the names used by
/// the public releases (see [`ColumnMap::defaults`]).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ColumnMap {
    pub text: Option<String>,
    /// Class column for IHC and DynaHate.
    pub label: Option<String>,
    pub id: Option<String>,
    /// Per-annotator offensiveness (SBIC).
    pub offensiveness: Option<String>,
    /// Rows sharing this key are one post (SBIC); defaults to the text column.
    pub group: Option<String>,
    pub human_toxicity: Option<String>,
    pub model_toxicity: Option<String>,
    /// Split column shipped with the corpus; ToxiGen picks up a `split` column by default.
    pub split: Option<String>,
}

impl ColumnMap {
    pub fn defaults(kind: Dataset) -> ColumnMap {
        let s = |v: &str| Some(v.to_string());
        match kind {
            Dataset::Ihc => ColumnMap {
                text: s("post"),
                label: s("class"),
                ..Default::default()
            },
            Dataset::Sbic => ColumnMap {
                text: s("post"),
                offensiveness: s("offensiveYN"),
                ..Default::default()
            },
            Dataset::DynaHate => ColumnMap {
                text: s("text"),
                label: s("label"),
                ..Default::default()
            },
            Dataset::ToxiGen => ColumnMap {
                text: s("text"),
                human_toxicity: s("toxicity_human"),
                model_toxicity: s("toxicity_ai"),
                ..Default::default()
            },
            Dataset::Probe | Dataset::Synthetic => ColumnMap {
                text: s("text"),
                ..Default::default()
            },
        }
    }

    /// Fills unset fields from the defaults of `kind`.
    pub fn resolved(&self, kind: Dataset) -> ColumnMap {
        let d = ColumnMap::defaults(kind);
        let pick = |a: &Option<String>, b: Option<String>| a.clone().or(b);
        ColumnMap {
            text: pick(&self.text, d.text),
            label: pick(&self.label, d.label),
            id: pick(&self.id, d.id),
            offensiveness: pick(&self.offensiveness, d.offensiveness),
            group: pick(&self.group, d.group),
            human_toxicity: pick(&self.human_toxicity, d.human_toxicity),
            model_toxicity: pick(&self.model_toxicity, d.model_toxicity),
            split: pick(&self.split, d.split),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct IngestOptions {
    pub columns: ColumnMap,
    /// Field delimiter; inferred from the file extension when unset.
    pub delimiter: Option<char>,
}

pub fn ingest(kind: Dataset, path: &Path, opts: &IngestOptions) -> Result<SampleSet> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let delimiter = opts.delimiter.unwrap_or_else(|| {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("tsv") => '\t',
            _ => ',',
        }
    });
    let set = ingest_reader(kind, file, &path.display().to_string(), delimiter, &opts.columns)?;
    report_counts(&set);
    Ok(set)
}

fn report_counts(set: &SampleSet) {
    let c = set.counts();
    log::info!(
        "ingested {}: {} samples ({} hate, {} not hate)",
        set.source(),
        c.total(),
        c.hate,
        c.not_hate
    );
    if let Some((total, hate, not_hate)) = set.source().reference_counts() {
        if (c.total(), c.hate, c.not_hate) != (total, hate, not_hate) {
            log::warn!(
                "{} counts differ from the published distribution ({total} total, {hate} hate, {not_hate} not hate)",
                set.source()
            );
        }
    }
}

struct Table<'a> {
    path: &'a str,
    headers: csv::StringRecord,
}

impl Table<'_> {
    fn col(&self, name: &Option<String>, role: &str) -> Result<usize> {
        let name = name
            .as_deref()
            .ok_or_else(|| Error::Config(format!("no column configured for {role}")))?;
        self.headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Ingest {
                path: self.path.to_string(),
                row: 1,
                msg: format!("missing {role} column `{name}`"),
            })
    }

    fn opt_col(&self, name: &Option<String>, role: &str) -> Result<Option<usize>> {
        match name {
            Some(_) => self.col(name, role).map(Some),
            None => Ok(None),
        }
    }

    fn err(&self, row: usize, msg: impl Into<String>) -> Error {
        Error::Ingest {
            path: self.path.to_string(),
            row,
            msg: msg.into(),
        }
    }
}

/// Parses one corpus from any reader. `name` is used in error messages.
pub fn ingest_reader<R: Read>(
    kind: Dataset,
    reader: R,
    name: &str,
    delimiter: char,
    columns: &ColumnMap,
) -> Result<SampleSet> {
    if !delimiter.is_ascii() {
        return Err(Error::Config(format!("delimiter {delimiter:?} is not ASCII")));
    }
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(delimiter as u8)
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Ingest {
            path: name.to_string(),
            row: 1,
            msg: e.to_string(),
        })?
        .clone();
    let table = Table { path: name, headers };
    let mut cols = columns.resolved(kind);
    if kind == Dataset::ToxiGen && cols.split.is_none() && table.headers.iter().any(|h| h.trim() == "split") {
        cols.split = Some("split".into());
    }

    let text_col = table.col(&cols.text, "text")?;
    let id_col = table.opt_col(&cols.id, "id")?;
    let split_col = table.opt_col(&cols.split, "split")?;

    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let row = e.position().map(|p| p.line() as usize).unwrap_or(0);
            table.err(row, e.to_string())
        })?;
        let row = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        rows.push((row, rec));
    }
    if rows.is_empty() {
        return Err(table.err(1, "file has no data rows"));
    }

    let id_of = |row: usize, rec: &csv::StringRecord| -> Result<String> {
        match id_col {
            Some(c) => {
                let id = rec[c].trim();
                if id.is_empty() {
                    Err(table.err(row, "empty id"))
                } else {
                    Ok(id.to_string())
                }
            }
            None => Ok(format!("{kind}-{row}")),
        }
    };
    let text_of = |row: usize, rec: &csv::StringRecord| -> Result<String> {
        let text = &rec[text_col];
        if text.trim().is_empty() {
            Err(table.err(row, "empty text"))
        } else {
            Ok(text.to_string())
        }
    };
    let split_of = |row: usize, rec: &csv::StringRecord| -> Result<Option<Split>> {
        match split_col {
            Some(c) => rec[c]
                .parse::<Split>()
                .map(Some)
                .map_err(|_| table.err(row, format!("unknown split token `{}`", &rec[c]))),
            None => Ok(None),
        }
    };

    let mut samples = Vec::with_capacity(rows.len());
    match kind {
        Dataset::Ihc | Dataset::DynaHate => {
            let label_col = table.col(&cols.label, "label")?;
            for (row, rec) in &rows {
                let token = rec[label_col].trim();
                let label = match (kind, token) {
                    (Dataset::Ihc, "implicit_hate") => Label::Hate,
                    (Dataset::Ihc, "not_hate") => Label::NotHate,
                    (Dataset::Ihc, "explicit_hate") => continue,
                    (Dataset::DynaHate, "hate") => Label::Hate,
                    (Dataset::DynaHate, "nothate") => Label::NotHate,
                    _ => return Err(table.err(*row, format!("unknown label token `{token}`"))),
                };
                samples.push(Sample {
                    id: id_of(*row, rec)?,
                    text: text_of(*row, rec)?,
                    label,
                    dataset: kind,
                    split: split_of(*row, rec)?,
                });
            }
        }
        Dataset::Sbic => {
            let off_col = table.col(&cols.offensiveness, "offensiveness")?;
            let group_col = match &cols.group {
                Some(_) => table.col(&cols.group, "group")?,
                None => text_col,
            };
            // post key -> (first row, record, scores)
            let mut groups: IndexMap<String, (usize, &csv::StringRecord, Vec<f64>)> = IndexMap::new();
            for (row, rec) in &rows {
                let raw = rec[off_col].trim();
                let score: f64 = raw
                    .parse()
                    .map_err(|_| table.err(*row, format!("malformed offensiveness `{raw}`")))?;
                if !(0.0..=1.0).contains(&score) {
                    return Err(table.err(*row, format!("offensiveness {score} outside [0, 1]")));
                }
                groups
                    .entry(rec[group_col].to_string())
                    .or_insert_with(|| (*row, rec, Vec::new()))
                    .2
                    .push(score);
            }
            for (_, (row, rec, scores)) in groups {
                let label = label_sbic(&scores, row).map_err(|e| match e {
                    Error::Ingest { row, msg, .. } => table.err(row, msg),
                    other => other,
                })?;
                samples.push(Sample {
                    id: id_of(row, rec)?,
                    text: text_of(row, rec)?,
                    label,
                    dataset: kind,
                    split: split_of(row, rec)?,
                });
            }
        }
        Dataset::ToxiGen => {
            let human_col = table.col(&cols.human_toxicity, "human toxicity")?;
            let model_col = table.col(&cols.model_toxicity, "model toxicity")?;
            for (row, rec) in &rows {
                let parse = |c: usize, what: &str| -> Result<f64> {
                    let raw = rec[c].trim();
                    if raw.is_empty() {
                        return Err(table.err(*row, format!("missing {what} toxicity score")));
                    }
                    raw.parse()
                        .map_err(|_| table.err(*row, format!("malformed {what} toxicity `{raw}`")))
                };
                let label = label_toxigen(parse(human_col, "human")?, parse(model_col, "model")?)
                    .map_err(|e| table.err(*row, e.to_string()))?;
                samples.push(Sample {
                    id: id_of(*row, rec)?,
                    text: text_of(*row, rec)?,
                    label,
                    dataset: kind,
                    split: split_of(*row, rec)?,
                });
            }
        }
        Dataset::Probe | Dataset::Synthetic => {
            return Err(Error::Config(format!("{kind} samples are generated, not ingested")))
        }
    }
    SampleSet::new(kind, samples)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(kind: Dataset, delim: char, body: &str) -> Result<SampleSet> {
        ingest_reader(kind, body.as_bytes(), "fixture", delim, &ColumnMap::default())
    }

    #[test]
    fn ihc_drops_explicit_rows() {
        let set = run(
            Dataset::Ihc,
            '\t',
            "post\tclass\nwhites will never be welcome\timplicit_hate\nwhite supremacy = pure evil\tnot_hate\nslur here\texplicit_hate\n",
        )
        .unwrap();
        assert_eq!(set.len(), 2);
        assert_eq!(set.counts().hate, 1);
        assert_eq!(set.counts().not_hate, 1);
        assert_eq!(set.samples()[0].id, "ihc-2");
        assert_eq!(set.samples()[1].id, "ihc-3");
    }

    #[test]
    fn unknown_label_reports_row() {
        let err = run(Dataset::Ihc, '\t', "post\tclass\na\tnot_hate\nb\tmaybe\n").unwrap_err();
        match err {
            Error::Ingest { row, msg, .. } => {
                assert_eq!(row, 3);
                assert!(msg.contains("maybe"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_and_malformed_files_fail() {
        assert!(matches!(run(Dataset::Ihc, '\t', "post\tclass\n"), Err(Error::Ingest { .. })));
        assert!(matches!(run(Dataset::Ihc, '\t', ""), Err(Error::Ingest { .. })));
        // ragged row
        assert!(matches!(
            run(Dataset::Ihc, '\t', "post\tclass\na\tnot_hate\textra\n"),
            Err(Error::Ingest { row: 2, .. })
        ));
        // missing column
        assert!(matches!(run(Dataset::Ihc, '\t', "text\tclass\na\tnot_hate\n"), Err(Error::Ingest { row: 1, .. })));
    }

    #[test]
    fn dynahate_tokens() {
        let set = run(
            Dataset::DynaHate,
            ',',
            "acl.id,text,label\nx1,\"they, again\",hate\nx2,fine text,nothate\n",
        )
        .unwrap();
        assert_eq!(set.counts().hate, 1);
        assert_eq!(set.samples()[0].text, "they, again");
        assert!(run(Dataset::DynaHate, ',', "text,label\na,not_hate\n").is_err());
    }

    #[test]
    fn sbic_aggregates_annotators() {
        let body = "post,offensiveYN\n\
                    post one,1.0\npost two,0.0\npost one,0.5\npost two,0.5\npost one,0.0\npost three,0.4\npost three,0.5\npost three,0.55\n";
        let set = run(Dataset::Sbic, ',', body).unwrap();
        assert_eq!(set.len(), 3);
        let labels: Vec<_> = set.samples().iter().map(|s| s.label).collect();
        assert_eq!(labels, vec![Label::Hate, Label::NotHate, Label::NotHate]);
        assert_eq!(set.samples()[0].id, "sbic-2");
        assert!(matches!(
            run(Dataset::Sbic, ',', "post,offensiveYN\na,\n"),
            Err(Error::Ingest { row: 2, .. })
        ));
    }

    #[test]
    fn toxigen_labels_and_source_split() {
        let body = "text,toxicity_human,toxicity_ai,split\nA,3.0,2.6,train\nB,2.75,2.75,dev\nC,0,0,test\n";
        let set = run(Dataset::ToxiGen, ',', body).unwrap();
        let labels: Vec<_> = set.samples().iter().map(|s| s.label).collect();
        assert_eq!(labels, vec![Label::Hate, Label::NotHate, Label::NotHate]);
        let splits: Vec<_> = set.samples().iter().map(|s| s.split).collect();
        assert_eq!(splits, vec![Some(Split::Train), Some(Split::Validation), Some(Split::Test)]);
        assert!(matches!(
            run(Dataset::ToxiGen, ',', "text,toxicity_human,toxicity_ai\nA,,1\n"),
            Err(Error::Ingest { row: 2, .. })
        ));
    }

    #[test]
    fn custom_columns() {
        let cols = ColumnMap {
            text: Some("tweet".into()),
            label: Some("y".into()),
            id: Some("key".into()),
            ..Default::default()
        };
        let set = ingest_reader(Dataset::Ihc, "key,tweet,y\nk9,hello,not_hate\n".as_bytes(), "f", ',', &cols).unwrap();
        assert_eq!(set.samples()[0].id, "k9");
    }

    #[test]
    fn ingest_is_idempotent() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("ihc.tsv");
        std::fs::write(&p, "post\tclass\na b\timplicit_hate\nc\tnot_hate\n").unwrap();
        let a = ingest(Dataset::Ihc, &p, &IngestOptions::default()).unwrap();
        let b = ingest(Dataset::Ihc, &p, &IngestOptions::default()).unwrap();
        assert_eq!(a, b);
    }
}
