use std::io::{self, Write};

use super::{CorpusError, Sentence, TagSet, Token, OTHER_TAG};

/// Parses a three-column corpus. Columns may be separated by any run of
/// horizontal whitespace; blank lines end sentences.
pub fn parse_corpus(text: &str) -> Result<(Vec<Sentence>, TagSet), CorpusError> {
    parse_corpus_with_tags(text, TagSet::new())
}

/// Like [`parse_corpus`] but starts from an existing tag set, so known tags
/// keep their ids and unseen tags are appended.
pub fn parse_corpus_with_tags(
    text: &str,
    mut tags: TagSet,
) -> Result<(Vec<Sentence>, TagSet), CorpusError> {
    let mut sentences = Vec::new();
    let mut current: Option<Sentence> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            if let Some(s) = current.take() {
                sentences.push(s);
            }
            continue;
        }

        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() != 3 {
            return Err(CorpusError::Parse {
                line: line_no,
                message: format!("expected 3 columns, found {}", cols.len()),
            });
        }
        let doc_id: u64 = cols[1].parse().map_err(|_| CorpusError::Parse {
            line: line_no,
            message: format!("doc id `{}` is not a non-negative integer", cols[1]),
        })?;
        let tag = tags.intern(cols[2]);
        let token = Token {
            surface: cols[0].to_string(),
            tag,
        };

        match current.as_mut() {
            Some(s) if s.doc_id != doc_id => {
                return Err(CorpusError::Parse {
                    line: line_no,
                    message: format!(
                        "doc id {} differs from {} earlier in the same sentence",
                        doc_id, s.doc_id
                    ),
                });
            }
            Some(s) => s.tokens.push(token),
            None => {
                current = Some(Sentence {
                    doc_id,
                    tokens: vec![token],
                })
            }
        }
    }
    if let Some(s) = current.take() {
        sentences.push(s);
    }

    if sentences.is_empty() {
        return Err(CorpusError::Empty);
    }
    Ok((sentences, tags))
}

/// Writes sentences as tab-separated `token doc_id TAG` lines with a blank
/// line after each sentence.
pub fn write_corpus<W: Write>(
    sentences: &[Sentence],
    tags: &TagSet,
    mut out: W,
) -> io::Result<()> {
    for sentence in sentences {
        for token in &sentence.tokens {
            writeln!(
                out,
                "{}\t{}\t{}",
                token.surface,
                sentence.doc_id,
                tags.name(token.tag)
            )?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Collapses IOB tags to the TO scheme: `B-X` and `I-X` become `X`.
pub fn iob_to_to<S: AsRef<str>>(tags: &[S]) -> Result<Vec<String>, CorpusError> {
    tags.iter()
        .map(|tag| {
            let tag = tag.as_ref();
            if tag == OTHER_TAG {
                return Ok(OTHER_TAG.to_string());
            }
            match tag.strip_prefix("B-").or_else(|| tag.strip_prefix("I-")) {
                Some(bare) if !bare.is_empty() && bare != OTHER_TAG => Ok(bare.to_string()),
                _ => Err(CorpusError::InvalidIobTag(tag.to_string())),
            }
        })
        .collect()
}
