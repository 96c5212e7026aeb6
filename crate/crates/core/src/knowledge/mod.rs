//! Commonsense triple base and connotation lexicon.
//!
//! File formats:
//!
//! * knowledge base: CSV `head,relation,tail,weight`, UTF-8, `#` comment
//!   lines, optional header row. `relation` is one of the nine
//!   [`RelationKind`] names; `weight` lies in `(0, 1]`.
//! * lexicon: TSV `word<TAB>polarity`, one single-token word per line,
//!   polarity in `[-1, 1]`.

mod kb;
mod lexicon;

pub use kb::{remedy_order, KnowledgeBase, RelationKind, Triple};
pub use lexicon::ConnotationLexicon;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum KnowledgeError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: unknown relation {token:?}")]
    UnknownRelation { line: usize, token: String },
    #[error("{}weight {weight} outside (0, 1]", line_prefix(*.line))]
    WeightOutOfRange { line: Option<usize>, weight: f64 },
    #[error("{}empty head or tail concept", line_prefix(*.line))]
    EmptyConcept { line: Option<usize> },
    #[error("{}polarity {polarity} outside [-1, 1]", line_prefix(*.line))]
    PolarityOutOfRange { line: Option<usize>, polarity: f64 },
    #[error("{}lexicon entry {word:?} is not a single token", line_prefix(*.line))]
    MultiTokenWord { line: Option<usize>, word: String },
    #[error("remedy lookup needs at least one harm token")]
    EmptyHarmTokens,
}

fn line_prefix(line: Option<usize>) -> String {
    line.map(|l| format!("line {l}: ")).unwrap_or_default()
}
