use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use super::KnowledgeError;
use crate::text::tokens_with;

/// Word → connotative polarity in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConnotationLexicon {
    entries: BTreeMap<String, f64>,
}

impl ConnotationLexicon {
    pub fn from_entries<S: AsRef<str>>(
        entries: impl IntoIterator<Item = (S, f64)>,
    ) -> Result<Self, KnowledgeError> {
        let mut lex = ConnotationLexicon::default();
        for (word, polarity) in entries {
            lex.insert(word.as_ref(), polarity, None)?;
        }
        Ok(lex)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, KnowledgeError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| KnowledgeError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::parse(&text)
    }

    /// Parses `word<TAB>polarity` lines. Blank lines and `#` comments are
    /// skipped; a repeated word keeps its last value.
    pub fn parse(text: &str) -> Result<Self, KnowledgeError> {
        let mut lex = ConnotationLexicon::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            if raw.trim().is_empty() || raw.trim_start().starts_with('#') {
                continue;
            }
            let (word, value) = raw
                .split_once('\t')
                .ok_or_else(|| KnowledgeError::Malformed {
                    line,
                    message: "expected word<TAB>polarity".into(),
                })?;
            let polarity: f64 = value
                .trim()
                .parse()
                .map_err(|_| KnowledgeError::Malformed {
                    line,
                    message: format!("polarity {:?} is not a number", value.trim()),
                })?;
            lex.insert(word, polarity, Some(line))?;
        }
        Ok(lex)
    }

    fn insert(
        &mut self,
        word: &str,
        polarity: f64,
        line: Option<usize>,
    ) -> Result<(), KnowledgeError> {
        let word = word.trim().to_lowercase();
        if word.is_empty() {
            return Err(KnowledgeError::Malformed {
                line: line.unwrap_or(0),
                message: "empty word".into(),
            });
        }
        if word.split_whitespace().count() > 1 {
            return Err(KnowledgeError::MultiTokenWord { line, word });
        }
        if !(-1.0..=1.0).contains(&polarity) {
            return Err(KnowledgeError::PolarityOutOfRange { line, polarity });
        }
        self.entries.insert(word, polarity);
        Ok(())
    }

    /// Canonical TSV form, sorted by word.
    pub fn to_tsv(&self) -> String {
        self.entries
            .iter()
            .map(|(w, p)| format!("{w}\t{p}\n"))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, word: &str) -> Option<f64> {
        self.entries.get(word).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> + '_ {
        self.entries.iter().map(|(w, p)| (w.as_str(), *p))
    }

    /// Mean token polarity of `phrase`; unknown tokens count as 0 and an
    /// empty phrase scores 0.
    pub fn polarity(&self, phrase: &str) -> f64 {
        let tokens = tokens_with(phrase, |w| self.entries.contains_key(w));
        if tokens.is_empty() {
            return 0.0;
        }
        let total: f64 = tokens.iter().map(|t| self.get(t).unwrap_or(0.0)).sum();
        (total / tokens.len() as f64).clamp(-1.0, 1.0)
    }
}
