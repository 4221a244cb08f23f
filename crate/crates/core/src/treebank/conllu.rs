//! CoNLL-U reading and writing.
//!
//! Only basic token lines are materialized. Multiword-token ranges
//! (`3-4`) and empty nodes (`5.1`) are skipped on input, so they are
//! never seen by tree validation or corpus statistics.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

const N_COLUMNS: usize = 10;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConlluError {
    #[error("line {line}: expected {N_COLUMNS} tab-separated columns, found {found}")]
    ColumnCount { line: usize, found: usize },

    #[error("line {line}: invalid token id {value:?}")]
    BadId { line: usize, value: String },

    #[error("line {line}: invalid head {value:?}")]
    BadHead { line: usize, value: String },

    #[error("line {line}: token id {found}, expected {expected}")]
    NonContiguousIds {
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("line {line}: token {id} is its own head")]
    SelfHead { line: usize, id: usize },

    #[error("line {line}: sentence block has no token lines")]
    EmptySentence { line: usize },

    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    /// 1-based position in the sentence.
    pub id: usize,
    pub form: String,
    pub lemma: Option<String>,
    pub upos: String,
    pub xpos: Option<String>,
    pub feats: Option<String>,
    /// Head position; 0 is the artificial root.
    pub head: usize,
    pub deprel: String,
    pub deps: Option<String>,
    pub misc: Option<String>,
}

impl Token {
    /// A token with only the columns the probes care about filled in.
    pub fn new(
        id: usize,
        form: impl Into<String>,
        upos: impl Into<String>,
        head: usize,
        deprel: impl Into<String>,
    ) -> Self {
        Token {
            id,
            form: form.into(),
            lemma: None,
            upos: upos.into(),
            xpos: None,
            feats: None,
            head,
            deprel: deprel.into(),
            deps: None,
            misc: None,
        }
    }

    pub fn is_punct(&self) -> bool {
        self.upos == "PUNCT"
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub sent_id: String,
    pub tokens: Vec<Token>,
    /// Comment lines without the leading `#`.
    pub comments: Vec<String>,
}

impl Sentence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn heads(&self) -> Vec<usize> {
        self.tokens.iter().map(|t| t.head).collect()
    }

    /// Copy of this sentence with heads replaced and relations cleared.
    ///
    /// Panics if `heads` does not have one entry per token.
    pub fn with_heads(&self, heads: &[usize]) -> Sentence {
        assert_eq!(heads.len(), self.tokens.len(), "head vector length");
        let tokens = self
            .tokens
            .iter()
            .zip(heads)
            .map(|(t, &head)| Token {
                head,
                deprel: "_".to_owned(),
                deps: None,
                ..t.clone()
            })
            .collect();
        Sentence {
            sent_id: self.sent_id.clone(),
            tokens,
            comments: self.comments.clone(),
        }
    }
}

fn sent_id_from_comments(comments: &[String]) -> Option<String> {
    comments.iter().find_map(|c| {
        let rest = c.trim_start().strip_prefix("sent_id")?;
        let value = rest.trim_start().strip_prefix('=')?;
        Some(value.trim().to_owned())
    })
}

fn optional(column: &str) -> Option<String> {
    if column == "_" {
        None
    } else {
        Some(column.to_owned())
    }
}

enum LineId {
    Word(usize),
    Skipped,
}

fn parse_id(value: &str, line: usize) -> Result<LineId, ConlluError> {
    let bad = || ConlluError::BadId {
        line,
        value: value.to_owned(),
    };
    if value.contains('-') || value.contains('.') {
        // Range or empty node; still require numeric parts.
        let ok = value
            .split(['-', '.'])
            .all(|part| !part.is_empty() && part.bytes().all(|b| b.is_ascii_digit()));
        return if ok { Ok(LineId::Skipped) } else { Err(bad()) };
    }
    match value.parse::<usize>() {
        Ok(id) if id >= 1 => Ok(LineId::Word(id)),
        _ => Err(bad()),
    }
}

struct Block {
    first_line: usize,
    comments: Vec<String>,
    tokens: Vec<Token>,
}

impl Block {
    fn new(first_line: usize) -> Self {
        Block {
            first_line,
            comments: Vec::new(),
            tokens: Vec::new(),
        }
    }

    fn is_blank(&self) -> bool {
        self.comments.is_empty() && self.tokens.is_empty()
    }

    fn finish(self, ordinal: usize) -> Result<Sentence, ConlluError> {
        if self.tokens.is_empty() {
            return Err(ConlluError::EmptySentence {
                line: self.first_line,
            });
        }
        let sent_id =
            sent_id_from_comments(&self.comments).unwrap_or_else(|| format!("s{ordinal}"));
        Ok(Sentence {
            sent_id,
            tokens: self.tokens,
            comments: self.comments,
        })
    }
}

/// Parse CoNLL-U text, keeping at most `max_sentences` sentences.
pub fn parse_conllu(text: &str, max_sentences: Option<usize>) -> Result<Vec<Sentence>, ConlluError> {
    let limit = max_sentences.unwrap_or(usize::MAX);
    let mut sentences = Vec::new();
    let mut block = Block::new(1);

    for (idx, raw) in text.split('\n').enumerate() {
        if sentences.len() >= limit {
            break;
        }
        let line_no = idx + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);

        if line.trim().is_empty() {
            if !block.is_blank() {
                let done = std::mem::replace(&mut block, Block::new(line_no + 1));
                sentences.push(done.finish(sentences.len() + 1)?);
            } else {
                block.first_line = line_no + 1;
            }
            continue;
        }

        if let Some(comment) = line.strip_prefix('#') {
            block.comments.push(comment.to_owned());
            continue;
        }

        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != N_COLUMNS {
            return Err(ConlluError::ColumnCount {
                line: line_no,
                found: cols.len(),
            });
        }

        let id = match parse_id(cols[0], line_no)? {
            LineId::Word(id) => id,
            LineId::Skipped => continue,
        };
        let expected = block.tokens.len() + 1;
        if id != expected {
            return Err(ConlluError::NonContiguousIds {
                line: line_no,
                expected,
                found: id,
            });
        }
        let head = cols[6].parse::<usize>().map_err(|_| ConlluError::BadHead {
            line: line_no,
            value: cols[6].to_owned(),
        })?;
        if head == id {
            return Err(ConlluError::SelfHead { line: line_no, id });
        }

        block.tokens.push(Token {
            id,
            form: cols[1].to_owned(),
            lemma: optional(cols[2]),
            upos: cols[3].to_owned(),
            xpos: optional(cols[4]),
            feats: optional(cols[5]),
            head,
            deprel: cols[7].to_owned(),
            deps: optional(cols[8]),
            misc: optional(cols[9]),
        });
    }

    if sentences.len() < limit && !block.is_blank() {
        sentences.push(block.finish(sentences.len() + 1)?);
    }
    Ok(sentences)
}

pub fn read_conllu_file(
    path: impl AsRef<Path>,
    max_sentences: Option<usize>,
) -> Result<Vec<Sentence>, ConlluError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| ConlluError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_conllu(&text, max_sentences)
}

fn column(value: &Option<String>) -> &str {
    value.as_deref().unwrap_or("_")
}

fn non_empty(value: &str) -> &str {
    if value.is_empty() {
        "_"
    } else {
        value
    }
}

/// Serialize sentences as CoNLL-U, each followed by a blank line.
pub fn write_conllu(sentences: &[Sentence]) -> String {
    let mut out = String::new();
    for sentence in sentences {
        for comment in &sentence.comments {
            out.push('#');
            out.push_str(comment);
            out.push('\n');
        }
        for t in &sentence.tokens {
            // Infallible on String.
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                t.id,
                non_empty(&t.form),
                column(&t.lemma),
                non_empty(&t.upos),
                column(&t.xpos),
                column(&t.feats),
                t.head,
                non_empty(&t.deprel),
                column(&t.deps),
                column(&t.misc),
            );
        }
        out.push('\n');
    }
    out
}
