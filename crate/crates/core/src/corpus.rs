//! Candidate-study collections and their CSV representation.
//!
//! Input files carry the columns `Document Title`, `Abstract`, `Year` and
//! `PDF Link`, optionally a ground-truth `label` column (`yes`/`no`) used only
//! for simulation, and optionally a reviewer `code` column. Exports always
//! carry the `code` column.

use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const COL_TITLE: &str = "Document Title";
pub const COL_ABSTRACT: &str = "Abstract";
pub const COL_YEAR: &str = "Year";
pub const COL_LINK: &str = "PDF Link";
pub const COL_LABEL: &str = "label";
pub const COL_CODE: &str = "code";

const REQUIRED: [&str; 4] = [COL_TITLE, COL_ABSTRACT, COL_YEAR, COL_LINK];

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("missing required column {0:?}")]
    MissingColumn(String),
    #[error("corpus has no data rows")]
    Empty,
    #[error("row {row}: {message}")]
    Row { row: u64, message: String },
    #[error("csv: {0}")]
    Csv(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<csv::Error> for CorpusError {
    fn from(err: csv::Error) -> Self {
        let row = err.position().map(|p| p.line());
        match (row, err.into_kind()) {
            (_, csv::ErrorKind::Io(io)) => CorpusError::Io(io),
            (Some(row), kind) => CorpusError::Row {
                row,
                message: csv_kind_message(&kind),
            },
            (None, kind) => CorpusError::Csv(csv_kind_message(&kind)),
        }
    }
}

fn csv_kind_message(kind: &csv::ErrorKind) -> String {
    match kind {
        csv::ErrorKind::Utf8 { err, .. } => format!("invalid UTF-8: {err}"),
        csv::ErrorKind::UnequalLengths {
            expected_len, len, ..
        } => format!("expected {expected_len} fields, found {len}"),
        other => format!("{other:?}"),
    }
}

/// Ground-truth relevance of a study, known only in simulation corpora.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Relevance {
    Relevant,
    Irrelevant,
}

impl Relevance {
    pub fn is_relevant(self) -> bool {
        matches!(self, Relevance::Relevant)
    }

    fn parse_yes_no(s: &str) -> Option<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("yes") {
            Some(Relevance::Relevant)
        } else if s.eq_ignore_ascii_case("no") {
            Some(Relevance::Irrelevant)
        } else {
            None
        }
    }

    fn as_yes_no(self) -> &'static str {
        match self {
            Relevance::Relevant => "yes",
            Relevance::Irrelevant => "no",
        }
    }
}

/// Reviewer decision recorded against a study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Code {
    Yes,
    No,
    #[default]
    Undetermined,
}

impl Code {
    pub fn as_str(self) -> &'static str {
        match self {
            Code::Yes => "yes",
            Code::No => "no",
            Code::Undetermined => "undetermined",
        }
    }

    pub fn is_coded(self) -> bool {
        !matches!(self, Code::Undetermined)
    }
}

impl From<Relevance> for Code {
    fn from(r: Relevance) -> Self {
        match r {
            Relevance::Relevant => Code::Yes,
            Relevance::Irrelevant => Code::No,
        }
    }
}

impl fmt::Display for Code {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Code {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        if t.is_empty() || t.eq_ignore_ascii_case("undetermined") {
            Ok(Code::Undetermined)
        } else if t.eq_ignore_ascii_case("yes") {
            Ok(Code::Yes)
        } else if t.eq_ignore_ascii_case("no") {
            Ok(Code::No)
        } else {
            Err(format!("unknown code {s:?}"))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Study {
    pub id: usize,
    pub title: String,
    #[serde(rename = "abstract")]
    pub abstract_text: String,
    pub year: Option<i32>,
    pub pdf_link: String,
    pub oracle_label: Option<Relevance>,
    pub code: Code,
    /// Values of any non-standard input columns, aligned with
    /// [`Corpus::extra_columns`].
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub extra: Vec<String>,
}

impl Study {
    pub fn new(id: usize, title: impl Into<String>, abstract_text: impl Into<String>) -> Self {
        Study {
            id,
            title: title.into(),
            abstract_text: abstract_text.into(),
            year: None,
            pdf_link: String::new(),
            oracle_label: None,
            code: Code::Undetermined,
            extra: Vec::new(),
        }
    }

    pub fn with_label(mut self, label: Relevance) -> Self {
        self.oracle_label = Some(label);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub candidates: usize,
    /// `None` when the corpus carries no oracle labels.
    pub relevant: Option<usize>,
}

impl fmt::Display for CorpusStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.relevant {
            Some(r) => write!(f, "candidates: {}, relevant: {}", self.candidates, r),
            None => write!(f, "candidates: {}, relevant: unknown", self.candidates),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Corpus {
    pub name: String,
    pub studies: Vec<Study>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub extra_columns: Vec<String>,
}

impl Corpus {
    /// Builds a corpus from studies, renumbering ids to their positions.
    pub fn new(name: impl Into<String>, mut studies: Vec<Study>) -> Self {
        for (i, s) in studies.iter_mut().enumerate() {
            s.id = i;
        }
        Corpus {
            name: name.into(),
            studies,
            extra_columns: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.studies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.studies.is_empty()
    }

    pub fn get(&self, id: usize) -> Option<&Study> {
        self.studies.get(id)
    }

    /// True when at least one study has an oracle label.
    pub fn is_simulation_capable(&self) -> bool {
        self.studies.iter().any(|s| s.oracle_label.is_some())
    }

    /// True when every study has an oracle label.
    pub fn is_fully_labeled(&self) -> bool {
        !self.studies.is_empty() && self.studies.iter().all(|s| s.oracle_label.is_some())
    }

    /// Ids of the ground-truth relevant studies (R).
    pub fn relevant_ids(&self) -> Vec<usize> {
        self.studies
            .iter()
            .filter(|s| s.oracle_label == Some(Relevance::Relevant))
            .map(|s| s.id)
            .collect()
    }

    pub fn stats(&self) -> CorpusStats {
        CorpusStats {
            candidates: self.len(),
            relevant: self
                .is_simulation_capable()
                .then(|| self.relevant_ids().len()),
        }
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self, CorpusError> {
        let path = path.as_ref();
        let file = File::open(path)?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        Self::from_reader(name, file)
    }

    pub fn from_reader(name: impl Into<String>, reader: impl Read) -> Result<Self, CorpusError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(false)
            .from_reader(reader);

        let headers: Vec<String> = rdr
            .headers()?
            .iter()
            .map(|h| h.trim().trim_start_matches('\u{feff}').trim().to_string())
            .collect();
        let find = |name: &str| headers.iter().position(|h| h == name);

        let mut required = [0usize; 4];
        for (slot, col) in required.iter_mut().zip(REQUIRED) {
            *slot = find(col).ok_or_else(|| CorpusError::MissingColumn(col.to_string()))?;
        }
        let [title_ix, abstract_ix, year_ix, link_ix] = required;
        let label_ix = find(COL_LABEL);
        let code_ix = find(COL_CODE);

        let known: Vec<usize> = required.iter().copied().chain(label_ix).chain(code_ix).collect();
        let extra_ix: Vec<usize> = (0..headers.len()).filter(|i| !known.contains(i)).collect();
        let extra_columns = extra_ix.iter().map(|&i| headers[i].clone()).collect();

        let mut studies = Vec::new();
        for (id, record) in rdr.records().enumerate() {
            let record = record?;
            let field = |i: usize| record.get(i).unwrap_or("");
            let row = id as u64 + 1;

            let year_text = field(year_ix).trim();
            let year = if year_text.is_empty() {
                None
            } else {
                match year_text.parse::<i32>() {
                    Ok(y) => Some(y),
                    Err(_) => {
                        tracing::debug!(row, year = year_text, "unparseable year, treated as unknown");
                        None
                    }
                }
            };

            let oracle_label = label_ix.and_then(|i| {
                let raw = field(i);
                let parsed = Relevance::parse_yes_no(raw);
                if parsed.is_none() && !raw.trim().is_empty() {
                    tracing::warn!(row, label = raw, "unknown label value, treated as absent");
                }
                parsed
            });

            let code = match code_ix {
                Some(i) => field(i).parse::<Code>().unwrap_or_else(|e| {
                    tracing::warn!(row, "{e}, treated as undetermined");
                    Code::Undetermined
                }),
                None => Code::Undetermined,
            };

            studies.push(Study {
                id,
                title: field(title_ix).to_string(),
                abstract_text: field(abstract_ix).to_string(),
                year,
                pdf_link: field(link_ix).to_string(),
                oracle_label,
                code,
                extra: extra_ix.iter().map(|&i| field(i).to_string()).collect(),
            });
        }

        if studies.is_empty() {
            return Err(CorpusError::Empty);
        }
        Ok(Corpus {
            name: name.into(),
            studies,
            extra_columns,
        })
    }

    pub fn export_csv(&self, path: impl AsRef<Path>) -> Result<(), CorpusError> {
        let file = File::create(path)?;
        self.to_writer(file)?;
        Ok(())
    }

    /// Writes the corpus with its `code` column. A `label` column is
    /// written whenever any study carries an oracle label.
    pub fn to_writer(&self, writer: impl Write) -> Result<(), CorpusError> {
        if self.is_empty() {
            return Err(CorpusError::Empty);
        }
        let with_label = self.is_simulation_capable();
        let mut wtr = csv::WriterBuilder::new().from_writer(writer);

        let mut header: Vec<&str> = REQUIRED.to_vec();
        if with_label {
            header.push(COL_LABEL);
        }
        header.extend(self.extra_columns.iter().map(String::as_str));
        header.push(COL_CODE);
        wtr.write_record(&header)?;

        for s in &self.studies {
            let year = s.year.map(|y| y.to_string()).unwrap_or_default();
            let mut rec: Vec<&str> = vec![&s.title, &s.abstract_text, &year, &s.pdf_link];
            if with_label {
                rec.push(s.oracle_label.map(Relevance::as_yes_no).unwrap_or(""));
            }
            for i in 0..self.extra_columns.len() {
                rec.push(s.extra.get(i).map(String::as_str).unwrap_or(""));
            }
            rec.push(s.code.as_str());
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String, CorpusError> {
        let mut buf = Vec::new();
        self.to_writer(&mut buf)?;
        String::from_utf8(buf).map_err(|e| CorpusError::Csv(e.to_string()))
    }

    /// Clears every reviewer code.
    pub fn reset_codes(&mut self) {
        for s in &mut self.studies {
            s.code = Code::Undetermined;
        }
    }
}
