use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs::File;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::KnowledgeError;
use crate::text::{normalize_label, raw_tokens, tokens_with};

/// Closed relation vocabulary. Variants are declared in alphabetical order
/// so the derived `Ord` matches lexicographic order of the names.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RelationKind {
    AtLocation,
    CapableOf,
    Causes,
    HasProperty,
    IsA,
    MadeOf,
    PartOf,
    Produces,
    UsedFor,
}

impl RelationKind {
    pub const ALL: [RelationKind; 9] = [
        RelationKind::AtLocation,
        RelationKind::CapableOf,
        RelationKind::Causes,
        RelationKind::HasProperty,
        RelationKind::IsA,
        RelationKind::MadeOf,
        RelationKind::PartOf,
        RelationKind::Produces,
        RelationKind::UsedFor,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            RelationKind::AtLocation => "AtLocation",
            RelationKind::CapableOf => "CapableOf",
            RelationKind::Causes => "Causes",
            RelationKind::HasProperty => "HasProperty",
            RelationKind::IsA => "IsA",
            RelationKind::MadeOf => "MadeOf",
            RelationKind::PartOf => "PartOf",
            RelationKind::Produces => "Produces",
            RelationKind::UsedFor => "UsedFor",
        }
    }

    /// Scene-graph predicate used when the relation is added as an edge.
    pub fn predicate(&self) -> &'static str {
        match self {
            RelationKind::AtLocation => "at location",
            RelationKind::CapableOf => "capable of",
            RelationKind::Causes => "causes",
            RelationKind::HasProperty => "has property",
            RelationKind::IsA => "is a",
            RelationKind::MadeOf => "made of",
            RelationKind::PartOf => "part of",
            RelationKind::Produces => "produces",
            RelationKind::UsedFor => "used for",
        }
    }

    pub fn is_remedial(&self) -> bool {
        matches!(self, RelationKind::CapableOf | RelationKind::UsedFor)
    }
}

impl fmt::Display for RelationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RelationKind {
    type Err = String;

    /// Accepts the canonical names case-insensitively, with or without a
    /// ConceptNet-style `/r/` prefix.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bare = s.trim();
        let bare = bare.strip_prefix("/r/").unwrap_or(bare);
        RelationKind::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(bare))
            .ok_or_else(|| s.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Triple {
    pub head: String,
    pub relation: RelationKind,
    pub tail: String,
    pub weight: f64,
}

impl Triple {
    pub fn new(head: &str, relation: RelationKind, tail: &str, weight: f64) -> Self {
        Triple {
            head: normalize_label(head),
            relation,
            tail: normalize_label(tail),
            weight,
        }
    }
}

impl fmt::Display for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({}, {}, {}, {})",
            self.head, self.relation, self.tail, self.weight
        )
    }
}

/// Indexed, immutable store of weighted commonsense triples.
///
/// Triples are held in canonical `(head, relation, tail)` order, so two
/// bases loaded from differently ordered files compare equal.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct KnowledgeBase {
    triples: Vec<Triple>,
    head_index: BTreeMap<String, Vec<usize>>,
    token_index: BTreeMap<String, Vec<usize>>,
    isa_index: BTreeSet<(String, String)>,
    vocabulary: BTreeSet<String>,
}

impl KnowledgeBase {
    /// Builds a base from triples. Duplicate `(head, relation, tail)`
    /// entries keep the maximal weight.
    pub fn from_triples(triples: impl IntoIterator<Item = Triple>) -> Result<Self, KnowledgeError> {
        let mut canonical: BTreeMap<(String, RelationKind, String), f64> = BTreeMap::new();
        for t in triples {
            let head = normalize_label(&t.head);
            let tail = normalize_label(&t.tail);
            if head.is_empty() || tail.is_empty() {
                return Err(KnowledgeError::EmptyConcept { line: None });
            }
            check_weight(t.weight, None)?;
            let w = canonical
                .entry((head, t.relation, tail))
                .or_insert(t.weight);
            if t.weight > *w {
                *w = t.weight;
            }
        }
        let triples = canonical
            .into_iter()
            .map(|((head, relation, tail), weight)| Triple {
                head,
                relation,
                tail,
                weight,
            })
            .collect();
        Ok(Self::index(triples))
    }

    fn index(triples: Vec<Triple>) -> Self {
        let mut vocabulary = BTreeSet::new();
        for t in &triples {
            vocabulary.extend(raw_tokens(&t.head));
            vocabulary.extend(raw_tokens(&t.tail));
        }
        let mut kb = KnowledgeBase {
            triples,
            vocabulary,
            ..Default::default()
        };
        for (pos, t) in kb.triples.iter().enumerate() {
            kb.head_index.entry(t.head.clone()).or_default().push(pos);
            let mut seen = BTreeSet::new();
            for tok in tokens_with(&t.tail, |w| kb.vocabulary.contains(w)) {
                if seen.insert(tok.clone()) {
                    kb.token_index.entry(tok).or_default().push(pos);
                }
            }
            if t.relation == RelationKind::IsA {
                kb.isa_index.insert((t.head.clone(), t.tail.clone()));
            }
        }
        kb
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, KnowledgeError> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| KnowledgeError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::parse(file)
    }

    /// Parses `head,relation,tail,weight` rows, one per line. Lines starting
    /// with `#` are comments; an optional literal header row is skipped.
    /// Fields may be double-quoted to contain commas.
    pub fn parse(mut reader: impl Read) -> Result<Self, KnowledgeError> {
        let mut text = String::new();
        reader
            .read_to_string(&mut text)
            .map_err(|e| KnowledgeError::Malformed {
                line: 0,
                message: e.to_string(),
            })?;
        let mut triples = Vec::new();
        let mut first_row = true;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            if raw.trim().is_empty() || raw.trim_start().starts_with('#') {
                continue;
            }
            let record =
                parse_row(raw).map_err(|message| KnowledgeError::Malformed { line, message })?;
            if record.len() != 4 {
                return Err(KnowledgeError::Malformed {
                    line,
                    message: format!("expected 4 columns, found {}", record.len()),
                });
            }
            if std::mem::replace(&mut first_row, false) && is_header(&record) {
                continue;
            }
            let relation: RelationKind = record[1]
                .parse()
                .map_err(|token| KnowledgeError::UnknownRelation { line, token })?;
            let weight: f64 = record[3].parse().map_err(|_| KnowledgeError::Malformed {
                line,
                message: format!("weight {:?} is not a number", &record[3]),
            })?;
            check_weight(weight, Some(line))?;
            let t = Triple::new(&record[0], relation, &record[2], weight);
            if t.head.is_empty() || t.tail.is_empty() {
                return Err(KnowledgeError::EmptyConcept { line: Some(line) });
            }
            triples.push(t);
        }
        Self::from_triples(triples)
    }

    /// Canonical CSV form, header included.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["head", "relation", "tail", "weight"])
            .expect("in-memory write");
        for t in &self.triples {
            w.write_record([
                t.head.as_str(),
                t.relation.as_str(),
                t.tail.as_str(),
                &t.weight.to_string(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    /// True when `word` occurs as a token anywhere in the base.
    pub fn knows_word(&self, word: &str) -> bool {
        self.vocabulary.contains(word)
    }

    /// Tokens of `phrase` with plurals folded against the base vocabulary.
    pub fn tokens(&self, phrase: &str) -> Vec<String> {
        tokens_with(phrase, |w| self.knows_word(w))
    }

    pub fn is_a(&self, hyponym: &str, hypernym: &str) -> bool {
        self.isa_index
            .contains(&(hyponym.to_string(), hypernym.to_string()))
    }

    /// All triples headed by `concept`, by descending weight, ties broken
    /// by `(relation, tail)`.
    pub fn outgoing(&self, concept: &str) -> Vec<Triple> {
        let key = normalize_label(concept);
        let mut out: Vec<Triple> = self
            .head_index
            .get(&key)
            .into_iter()
            .flatten()
            .map(|&i| self.triples[i].clone())
            .collect();
        out.sort_by(|a, b| {
            b.weight
                .total_cmp(&a.weight)
                .then_with(|| (a.relation, &a.tail).cmp(&(b.relation, &b.tail)))
        });
        out
    }

    /// `CapableOf`/`UsedFor` triples whose tail shares a token with
    /// `harm_tokens`, by descending weight, keeping the first triple per head.
    pub fn remedies_for(
        &self,
        harm_tokens: &BTreeSet<String>,
    ) -> Result<Vec<Triple>, KnowledgeError> {
        if harm_tokens.is_empty() {
            return Err(KnowledgeError::EmptyHarmTokens);
        }
        let positions: BTreeSet<usize> = harm_tokens
            .iter()
            .filter_map(|t| self.token_index.get(t))
            .flatten()
            .copied()
            .filter(|&i| self.triples[i].relation.is_remedial())
            .collect();
        let mut hits: Vec<&Triple> = positions.into_iter().map(|i| &self.triples[i]).collect();
        hits.sort_by(|a, b| remedy_order(a, b));
        let mut heads = BTreeSet::new();
        Ok(hits
            .into_iter()
            .filter(|t| heads.insert(t.head.as_str()))
            .cloned()
            .collect())
    }
}

/// Ordering used by [`KnowledgeBase::remedies_for`]: weight descending, then
/// `(head, relation, tail)` ascending.
pub fn remedy_order(a: &Triple, b: &Triple) -> std::cmp::Ordering {
    b.weight
        .total_cmp(&a.weight)
        .then_with(|| (&a.head, a.relation, &a.tail).cmp(&(&b.head, b.relation, &b.tail)))
}

fn check_weight(weight: f64, line: Option<usize>) -> Result<(), KnowledgeError> {
    if weight > 0.0 && weight <= 1.0 {
        Ok(())
    } else {
        Err(KnowledgeError::WeightOutOfRange { line, weight })
    }
}

fn parse_row(raw: &str) -> Result<csv::StringRecord, String> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(raw.as_bytes());
    match rdr.records().next() {
        Some(Ok(record)) => Ok(record),
        Some(Err(e)) => Err(e.to_string()),
        None => Ok(csv::StringRecord::new()),
    }
}

fn is_header(record: &csv::StringRecord) -> bool {
    record
        .iter()
        .map(str::to_ascii_lowercase)
        .eq(["head", "relation", "tail", "weight"])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kb(text: &str) -> KnowledgeBase {
        KnowledgeBase::parse(text.as_bytes()).unwrap()
    }

    #[test]
    fn single_triple_is_indexed() {
        let kb = kb("oven,Produces,heat,1.0\n");
        assert_eq!(kb.len(), 1);
        assert_eq!(
            kb.outgoing("oven"),
            vec![Triple::new("oven", RelationKind::Produces, "heat", 1.0)]
        );
        assert_eq!(kb.outgoing("Oven").len(), 1);
    }

    #[test]
    fn empty_input() {
        let kb = kb("");
        assert!(kb.is_empty());
        assert!(kb.outgoing("oven").is_empty());
        let toks: BTreeSet<String> = ["hurt".to_string()].into();
        assert!(kb.remedies_for(&toks).unwrap().is_empty());
    }

    #[test]
    fn duplicates_keep_max_weight() {
        let kb = kb("a,IsA,b,0.6\na,IsA,b,0.9\na,IsA,b,0.7\n");
        assert_eq!(kb.len(), 1);
        assert_eq!(kb.triples()[0].weight, 0.9);
    }

    #[test]
    fn comments_header_and_quoting() {
        let kb = kb("# knife fixture\nhead,relation,tail,weight\nknife,UsedFor,\"cutting, slicing\",0.5\n/r/IsA,IsA,x,1\n");
        assert_eq!(kb.len(), 2);
        assert_eq!(kb.outgoing("knife")[0].tail, "cutting, slicing");
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = KnowledgeBase::parse("a,IsA,b,1\nc,Likes,d,1\n".as_bytes()).unwrap_err();
        assert!(
            matches!(err, KnowledgeError::UnknownRelation { line: 2, ref token } if token == "Likes")
        );
        let err = KnowledgeBase::parse("a,IsA,b,1.5\n".as_bytes()).unwrap_err();
        assert!(matches!(
            err,
            KnowledgeError::WeightOutOfRange { line: Some(1), .. }
        ));
        let err = KnowledgeBase::parse("a,IsA,b,0\n".as_bytes()).unwrap_err();
        assert!(matches!(err, KnowledgeError::WeightOutOfRange { .. }));
        let err = KnowledgeBase::parse("a,IsA,b\n".as_bytes()).unwrap_err();
        assert!(matches!(err, KnowledgeError::Malformed { line: 1, .. }));
        let err = KnowledgeBase::parse("# c\na,IsA,b,x\n".as_bytes()).unwrap_err();
        assert!(matches!(err, KnowledgeError::Malformed { line: 2, .. }));
    }

    #[test]
    fn outgoing_orders_ties_lexicographically() {
        let kb = kb("knife,UsedFor,stabbing,1.0\nknife,UsedFor,cutting vegetables,1.0\nknife,AtLocation,kitchen,0.5\n");
        let tails: Vec<_> = kb.outgoing("knife").into_iter().map(|t| t.tail).collect();
        assert_eq!(tails, ["cutting vegetables", "stabbing", "kitchen"]);
        assert!(kb.outgoing("unicorn").is_empty());
    }

    #[test]
    fn remedies_match_tail_tokens() {
        let kb = kb("glove,CapableOf,protect hand,1.0\n\
             glove,UsedFor,gardening,0.4\n\
             mitt,UsedFor,protect hands,0.8\n\
             hand,IsA,skin,1.0\n\
             knife,CapableOf,stab hand,0.9\n");
        let toks: BTreeSet<String> = ["hurt", "hand"].iter().map(|s| s.to_string()).collect();
        let heads: Vec<_> = kb
            .remedies_for(&toks)
            .unwrap()
            .into_iter()
            .map(|t| t.head)
            .collect();
        // "hands" folds to "hand"; IsA is not remedial
        assert_eq!(heads, ["glove", "knife", "mitt"]);
        let only_hurt: BTreeSet<String> = ["hurt".to_string()].into();
        assert!(kb.remedies_for(&only_hurt).unwrap().is_empty());
        assert!(matches!(
            kb.remedies_for(&BTreeSet::new()),
            Err(KnowledgeError::EmptyHarmTokens)
        ));
    }

    #[test]
    fn isa_and_plural_folding() {
        let kb = kb("tomato,IsA,vegetable,1\nknife,UsedFor,cutting vegetables,1\n");
        assert!(kb.is_a("tomato", "vegetable"));
        assert!(!kb.is_a("vegetable", "tomato"));
        assert_eq!(kb.tokens("Cutting Vegetables"), ["cutting", "vegetable"]);
    }

    #[test]
    fn relation_names_parse() {
        assert_eq!(
            "usedfor".parse::<RelationKind>().unwrap(),
            RelationKind::UsedFor
        );
        assert_eq!("/r/IsA".parse::<RelationKind>().unwrap(), RelationKind::IsA);
        assert!("RelatedTo".parse::<RelationKind>().is_err());
        let mut sorted = RelationKind::ALL;
        sorted.sort_by_key(|k| k.as_str());
        assert_eq!(sorted, RelationKind::ALL);
    }

    #[test]
    fn csv_round_trip() {
        let a = kb("z,IsA,y,0.25\nknife,UsedFor,\"cutting, slicing\",1\n");
        let b = KnowledgeBase::parse(a.to_csv().as_bytes()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn indexes_match_rebuild() {
        let a = kb(
            "glove,CapableOf,protect hand,1.0\nhand,IsA,skin,1.0\nheat,CapableOf,hurt hands,0.7\n",
        );
        let rebuilt = KnowledgeBase::index(a.triples().to_vec());
        assert_eq!(a, rebuilt);
        for (head, positions) in &a.head_index {
            assert!(positions.iter().all(|&i| &a.triples[i].head == head));
        }
    }
}
