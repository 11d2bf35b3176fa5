//! Labeled text corpora: tokenization, part-of-speech tagging, and
//! train/test management.
//!
//! Tokenization is rule-free (lowercase, split on whitespace and
//! punctuation) and tagging is a static lexicon lookup. Attacks only need
//! POS agreement between a word and its substitute, so a coarse five-tag
//! set is enough.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coarse part-of-speech tag. Everything that is not a content word the
/// tagger knows about maps to `Other`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pos {
    Noun,
    Verb,
    Adj,
    Adv,
    Other,
}

impl Pos {
    /// Tag priority used when a word carries several lexicon tags:
    /// NOUN > VERB > ADJ > ADV. Lower rank wins.
    fn priority(self) -> u8 {
        match self {
            Pos::Noun => 0,
            Pos::Verb => 1,
            Pos::Adj => 2,
            Pos::Adv => 3,
            Pos::Other => 4,
        }
    }

    pub fn parse(tag: &str) -> Option<Pos> {
        match tag {
            "NOUN" => Some(Pos::Noun),
            "VERB" => Some(Pos::Verb),
            "ADJ" => Some(Pos::Adj),
            "ADV" => Some(Pos::Adv),
            "OTHER" => Some(Pos::Other),
            _ => None,
        }
    }
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Pos::Noun => "NOUN",
            Pos::Verb => "VERB",
            Pos::Adj => "ADJ",
            Pos::Adv => "ADV",
            Pos::Other => "OTHER",
        };
        f.write_str(s)
    }
}

/// One lowercased token with its tag and sentence position.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub surface: String,
    pub pos: Pos,
    pub position: usize,
}

/// A labeled, tokenized training or test instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub id: u64,
    pub tokens: Vec<Token>,
    pub label: usize,
}

impl Example {
    /// Number of tokens whose POS is not `Other`; the denominator for
    /// modified-word fractions.
    pub fn substitutable_count(&self) -> usize {
        self.tokens.iter().filter(|t| t.pos != Pos::Other).count()
    }

    pub fn surfaces(&self) -> Vec<&str> {
        self.tokens.iter().map(|t| t.surface.as_str()).collect()
    }

    pub fn text(&self) -> String {
        self.surfaces().join(" ")
    }
}

/// A named corpus with an ordered label set and disjoint train/test splits.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Dataset {
    pub name: String,
    pub labels: Vec<String>,
    pub train: Vec<Example>,
    pub test: Vec<Example>,
}

impl Dataset {
    pub fn label_count(&self) -> usize {
        self.labels.len()
    }
}

/// Static word -> POS map backing [`assign_pos`].
///
/// A word listed under several tags resolves to the highest-priority one
/// (NOUN > VERB > ADJ > ADV); unknown words are `Other`.
#[derive(Debug, Clone, Default)]
pub struct PosLexicon {
    map: HashMap<String, Pos>,
}

impl PosLexicon {
    pub fn new() -> Self {
        PosLexicon::default()
    }

    /// Build from (word, tag) pairs with priority merging.
    pub fn from_pairs<I, S>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (S, Pos)>,
        S: Into<String>,
    {
        let mut lex = PosLexicon::new();
        for (word, pos) in pairs {
            lex.insert(word.into(), pos);
        }
        lex
    }

    /// Load a `word<TAB>TAG` file. `#`-prefixed lines are comments.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut lex = PosLexicon::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split('\t');
            let (word, tag) = match (parts.next(), parts.next(), parts.next()) {
                (Some(w), Some(t), None) if !w.is_empty() => (w, t),
                _ => {
                    return Err(Error::MalformedLine {
                        path: path.to_path_buf(),
                        line: idx + 1,
                        reason: "expected word<TAB>TAG".into(),
                    })
                }
            };
            let pos = Pos::parse(tag).ok_or_else(|| Error::MalformedLine {
                path: path.to_path_buf(),
                line: idx + 1,
                reason: format!("unknown POS tag {tag:?}"),
            })?;
            lex.insert(word.to_lowercase(), pos);
        }
        Ok(lex)
    }

    fn insert(&mut self, word: String, pos: Pos) {
        self.map
            .entry(word)
            .and_modify(|existing| {
                if pos.priority() < existing.priority() {
                    *existing = pos;
                }
            })
            .or_insert(pos);
    }

    /// Deterministic tag lookup; out-of-lexicon words map to `Other`.
    pub fn assign(&self, surface: &str) -> Pos {
        self.map.get(surface).copied().unwrap_or(Pos::Other)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

/// Lowercase and split `text` into word and punctuation tokens, tagging
/// each through `pos_lexicon`.
///
/// Words are maximal alphanumeric runs; every other non-whitespace
/// character becomes a single-character token tagged `Other`. Joining the
/// resulting surfaces with single spaces and re-tokenizing reproduces the
/// same surface sequence.
pub fn tokenize(text: &str, pos_lexicon: &PosLexicon) -> Vec<Token> {
    let lowered = text.to_lowercase();
    let mut tokens = Vec::new();
    let mut word = String::new();
    let flush = |word: &mut String, tokens: &mut Vec<Token>| {
        if !word.is_empty() {
            let pos = pos_lexicon.assign(word);
            tokens.push(Token {
                surface: std::mem::take(word),
                pos,
                position: tokens.len(),
            });
        }
    };
    for ch in lowered.chars() {
        if ch.is_alphanumeric() {
            word.push(ch);
        } else {
            flush(&mut word, &mut tokens);
            if !ch.is_whitespace() {
                tokens.push(Token {
                    surface: ch.to_string(),
                    pos: Pos::Other,
                    position: tokens.len(),
                });
            }
        }
    }
    flush(&mut word, &mut tokens);
    tokens
}

/// Supported corpus file formats. Records are `label<TAB>text`, one per
/// line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    Tsv,
}

/// Load a corpus into a tokenized, tagged [`Dataset`].
///
/// `path` may be a single record file (all records become the train split)
/// or a directory containing `train.tsv`, an optional `test.tsv`, and an
/// optional `labels.txt` sidecar (one label per line, order defines class
/// indices). Without a sidecar, labels are collected in first-appearance
/// order. Ids are assigned sequentially across train then test.
pub fn load_dataset(
    path: impl AsRef<Path>,
    format: CorpusFormat,
    pos_lexicon: &PosLexicon,
) -> Result<Dataset> {
    let CorpusFormat::Tsv = format;
    let path = path.as_ref();
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".to_string());

    let (train_path, test_path, sidecar) = if path.is_dir() {
        let train = path.join("train.tsv");
        let test = path.join("test.tsv");
        let labels = path.join("labels.txt");
        (
            train,
            test.exists().then_some(test),
            labels.exists().then_some(labels),
        )
    } else {
        (path.to_path_buf(), None, None)
    };

    let mut labels: Vec<String> = Vec::new();
    let declared = match &sidecar {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            labels = text
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .map(str::to_string)
                .collect();
            true
        }
        None => false,
    };

    let mut next_id = 0u64;
    let mut read_split = |split_path: &Path| -> Result<Vec<Example>> {
        let text = fs::read_to_string(split_path).map_err(|e| Error::io(split_path, e))?;
        let mut examples = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            if raw.trim().is_empty() {
                continue;
            }
            let (label, body) = raw.split_once('\t').ok_or_else(|| Error::MalformedLine {
                path: split_path.to_path_buf(),
                line: idx + 1,
                reason: "expected label<TAB>text".into(),
            })?;
            let label = label.trim();
            if label.is_empty() {
                return Err(Error::MalformedLine {
                    path: split_path.to_path_buf(),
                    line: idx + 1,
                    reason: "empty label".into(),
                });
            }
            let label_idx = match labels.iter().position(|l| l == label) {
                Some(i) => i,
                None if declared => {
                    return Err(Error::UnknownLabel {
                        path: split_path.to_path_buf(),
                        line: idx + 1,
                        label: label.to_string(),
                    })
                }
                None => {
                    labels.push(label.to_string());
                    labels.len() - 1
                }
            };
            let tokens = tokenize(body, pos_lexicon);
            if tokens.is_empty() {
                return Err(Error::MalformedLine {
                    path: split_path.to_path_buf(),
                    line: idx + 1,
                    reason: "record has no tokens".into(),
                });
            }
            examples.push(Example {
                id: next_id,
                tokens,
                label: label_idx,
            });
            next_id += 1;
        }
        Ok(examples)
    };

    let train = read_split(&train_path)?;
    let test = match &test_path {
        Some(p) => read_split(p)?,
        None => Vec::new(),
    };

    if train.is_empty() && test.is_empty() {
        return Err(Error::EmptyCorpus(path.to_path_buf()));
    }
    if labels.len() < 2 {
        return Err(Error::TooFewLabels(labels.len()));
    }

    Ok(Dataset {
        name,
        labels,
        train,
        test,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn toy_lexicon() -> PosLexicon {
        PosLexicon::from_pairs([
            ("fine", Pos::Adj),
            ("film", Pos::Noun),
            ("dull", Pos::Adj),
            ("brilliant", Pos::Adj),
        ])
    }

    #[test]
    fn tokenize_splits_words_and_punctuation() {
        let lex = toy_lexicon();
        let tokens = tokenize("A fine film.", &lex);
        let surfaces: Vec<_> = tokens.iter().map(|t| t.surface.as_str()).collect();
        assert_eq!(surfaces, ["a", "fine", "film", "."]);
        assert_eq!(
            tokens.iter().map(|t| t.pos).collect::<Vec<_>>(),
            [Pos::Other, Pos::Adj, Pos::Noun, Pos::Other]
        );
        assert_eq!(
            tokens.iter().map(|t| t.position).collect::<Vec<_>>(),
            [0, 1, 2, 3]
        );
    }

    #[test]
    fn tokenize_empty_is_empty() {
        assert!(tokenize("", &toy_lexicon()).is_empty());
    }

    #[test]
    fn tokenize_case_folds() {
        let tokens = tokenize("Film film FILM", &toy_lexicon());
        assert_eq!(tokens.len(), 3);
        assert!(tokens.iter().all(|t| t.surface == "film"));
    }

    #[test]
    fn pos_priority_noun_beats_verb() {
        let lex = PosLexicon::from_pairs([("film", Pos::Verb), ("film", Pos::Noun)]);
        assert_eq!(lex.assign("film"), Pos::Noun);
        let lex = PosLexicon::from_pairs([("film", Pos::Noun), ("film", Pos::Verb)]);
        assert_eq!(lex.assign("film"), Pos::Noun);
    }

    #[test]
    fn pos_unknown_is_other() {
        assert_eq!(toy_lexicon().assign("zzxqv"), Pos::Other);
    }

    #[test]
    fn load_two_line_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("toy.tsv");
        let mut f = fs::File::create(&path).unwrap();
        writeln!(f, "pos\ta fine film").unwrap();
        writeln!(f, "neg\ta dull film").unwrap();
        drop(f);

        let ds = load_dataset(&path, CorpusFormat::Tsv, &toy_lexicon()).unwrap();
        assert_eq!(ds.labels, ["pos", "neg"]);
        assert_eq!(ds.train.len(), 2);
        assert!(ds.test.is_empty());
        assert_eq!(ds.train[0].tokens.len(), 3);
        assert_eq!(ds.train[1].tokens.len(), 3);
        assert_eq!(ds.train[0].label, 0);
        assert_eq!(ds.train[1].label, 1);
        assert_eq!(ds.train[0].id, 0);
        assert_eq!(ds.train[1].id, 1);
    }

    #[test]
    fn load_empty_file_fails() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.tsv");
        fs::File::create(&path).unwrap();
        let err = load_dataset(&path, CorpusFormat::Tsv, &toy_lexicon()).unwrap_err();
        assert!(matches!(err, Error::EmptyCorpus(_)));
    }

    #[test]
    fn load_malformed_line_reports_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.tsv");
        fs::write(&path, "pos\tgood line\nno tab here\n").unwrap();
        let err = load_dataset(&path, CorpusFormat::Tsv, &toy_lexicon()).unwrap_err();
        match err {
            Error::MalformedLine { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn sidecar_rejects_unknown_label() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("labels.txt"), "pos\nneg\n").unwrap();
        fs::write(dir.path().join("train.tsv"), "pos\tfine\nmeh\tdull\n").unwrap();
        let err = load_dataset(dir.path(), CorpusFormat::Tsv, &toy_lexicon()).unwrap_err();
        assert!(matches!(err, Error::UnknownLabel { .. }));
    }

    #[test]
    fn directory_layout_assigns_disjoint_ids() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("train.tsv"), "pos\ta fine film\n").unwrap();
        fs::write(dir.path().join("test.tsv"), "neg\ta dull film\n").unwrap();
        let ds = load_dataset(dir.path(), CorpusFormat::Tsv, &toy_lexicon()).unwrap();
        assert_eq!(ds.train[0].id, 0);
        assert_eq!(ds.test[0].id, 1);
    }

    #[test]
    fn round_trip_tokenization() {
        let lex = toy_lexicon();
        let tokens = tokenize("A fine, fine film -- really!", &lex);
        let joined = tokens
            .iter()
            .map(|t| t.surface.as_str())
            .collect::<Vec<_>>()
            .join(" ");
        let again = tokenize(&joined, &lex);
        assert_eq!(
            tokens.iter().map(|t| &t.surface).collect::<Vec<_>>(),
            again.iter().map(|t| &t.surface).collect::<Vec<_>>()
        );
    }
}
