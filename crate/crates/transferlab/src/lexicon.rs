//! POS-constrained substitute candidates from a flat synonym file.
//!
//! The lexicon is a precompiled data asset: `word<TAB>POS<TAB>c1,c2,...`
//! per line, `#` lines ignored. A substitute is valid for a token only
//! when the token's surface and tag match an entry exactly, so the POS
//! constraint lives entirely in the lookup key.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::corpus::{Pos, PosLexicon, Token};
use crate::error::{Error, Result};

/// One head word with its ordered substitute list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynonymEntry {
    pub word: String,
    pub pos: Pos,
    pub candidates: Vec<String>,
}

/// Map from (word, POS) to substitute candidates.
///
/// Candidate order is file order; duplicate lines merge with first-seen
/// order preserved. Self-references and multi-word candidates are dropped
/// at load. Symmetry is not assumed: `w -> w'` being allowed says nothing
/// about `w' -> w`.
#[derive(Debug, Clone, Default)]
pub struct SynonymLexicon {
    entries: HashMap<(String, Pos), Vec<String>>,
    /// Entries dropped because cleaning left them without candidates.
    pub skipped: usize,
}

impl SynonymLexicon {
    pub fn new() -> Self {
        SynonymLexicon::default()
    }

    /// Load a lexicon file. Malformed lines are hard errors; entries that
    /// end up with no candidates after cleaning are skipped and counted.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut lexicon = SynonymLexicon::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim_end();
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 || fields[0].is_empty() {
                return Err(Error::MalformedLine {
                    path: path.to_path_buf(),
                    line: idx + 1,
                    reason: "expected word<TAB>POS<TAB>candidates".into(),
                });
            }
            let pos = Pos::parse(fields[1]).ok_or_else(|| Error::MalformedLine {
                path: path.to_path_buf(),
                line: idx + 1,
                reason: format!("unknown POS tag {:?}", fields[1]),
            })?;
            let word = fields[0].to_lowercase();
            let candidates = fields[2]
                .split(',')
                .map(|c| c.trim().to_lowercase())
                .filter(|c| !c.is_empty());
            lexicon.add_entry(&word, pos, candidates);
        }
        Ok(lexicon)
    }

    /// Insert candidates for (word, pos), merging with union semantics and
    /// dropping self-references and multi-word candidates.
    pub fn add_entry<I, S>(&mut self, word: &str, pos: Pos, candidates: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let key = (word.to_string(), pos);
        let had_entry = self.entries.contains_key(&key);
        let entry = self.entries.entry(key).or_default();
        for cand in candidates {
            let cand = cand.as_ref();
            if cand == word || cand.chars().any(char::is_whitespace) || cand.is_empty() {
                continue;
            }
            if !entry.iter().any(|c| c == cand) {
                entry.push(cand.to_string());
            }
        }
        if entry.is_empty() && !had_entry {
            self.entries.remove(&(word.to_string(), pos));
            self.skipped += 1;
        }
    }

    /// Ordered substitute surfaces for a token, or empty when the
    /// (surface, POS) pair is not in the lexicon.
    pub fn candidates_for(&self, token: &Token) -> &[String] {
        self.candidates(&token.surface, token.pos)
    }

    pub fn candidates(&self, surface: &str, pos: Pos) -> &[String] {
        self.entries
            .get(&(surface.to_string(), pos))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn entry(&self, surface: &str, pos: Pos) -> Option<SynonymEntry> {
        self.entries
            .get(&(surface.to_string(), pos))
            .map(|cands| SynonymEntry {
                word: surface.to_string(),
                pos,
                candidates: cands.clone(),
            })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(String, Pos), &Vec<String>)> {
        self.entries.iter()
    }

    /// Derive a POS lexicon from the heads and candidates of this lexicon.
    pub fn derive_pos_lexicon(&self) -> PosLexicon {
        let mut pairs: Vec<(String, Pos)> = Vec::new();
        for ((word, pos), cands) in &self.entries {
            pairs.push((word.clone(), *pos));
            for c in cands {
                pairs.push((c.clone(), *pos));
            }
        }
        PosLexicon::from_pairs(pairs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn token(surface: &str, pos: Pos) -> Token {
        Token {
            surface: surface.into(),
            pos,
            position: 0,
        }
    }

    fn write_lexicon(lines: &str) -> (tempfile::TempDir, std::path::PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("syn.tsv");
        fs::write(&path, lines).unwrap();
        (dir, path)
    }

    #[test]
    fn loads_simple_entry() {
        let (_d, path) = write_lexicon("glorious\tADJ\tsplendiferous,resplendent\n");
        let lex = SynonymLexicon::load(&path).unwrap();
        assert_eq!(
            lex.candidates("glorious", Pos::Adj),
            ["splendiferous", "resplendent"]
        );
        assert_eq!(lex.skipped, 0);
    }

    #[test]
    fn self_reference_only_entry_is_skipped() {
        let (_d, path) = write_lexicon("good\tADJ\tgood\n");
        let lex = SynonymLexicon::load(&path).unwrap();
        assert!(lex.candidates("good", Pos::Adj).is_empty());
        assert_eq!(lex.skipped, 1);
    }

    #[test]
    fn duplicate_lines_merge_in_first_seen_order() {
        let (_d, path) = write_lexicon("keep\tVERB\tpreserve\nkeep\tVERB\tretain,preserve\n");
        let lex = SynonymLexicon::load(&path).unwrap();
        assert_eq!(lex.candidates("keep", Pos::Verb), ["preserve", "retain"]);
    }

    #[test]
    fn pos_mismatch_blocks_lookup() {
        let (_d, path) = write_lexicon("keep\tVERB\tpreserve,retain\n");
        let lex = SynonymLexicon::load(&path).unwrap();
        assert_eq!(
            lex.candidates_for(&token("keep", Pos::Verb)),
            ["preserve", "retain"]
        );
        assert!(lex.candidates_for(&token("keep", Pos::Noun)).is_empty());
        assert!(lex.candidates_for(&token("zzxqv", Pos::Other)).is_empty());
    }

    #[test]
    fn multi_word_candidates_are_dropped() {
        let (_d, path) = write_lexicon("keep\tVERB\thold on,retain\n");
        let lex = SynonymLexicon::load(&path).unwrap();
        assert_eq!(lex.candidates("keep", Pos::Verb), ["retain"]);
    }

    #[test]
    fn malformed_line_errors() {
        let (_d, path) = write_lexicon("keep\tVERB\n");
        assert!(matches!(
            SynonymLexicon::load(&path),
            Err(Error::MalformedLine { line: 1, .. })
        ));
    }

    #[test]
    fn comments_ignored() {
        let (_d, path) = write_lexicon("# comment\nkeep\tVERB\tretain\n");
        let lex = SynonymLexicon::load(&path).unwrap();
        assert_eq!(lex.len(), 1);
    }

    #[test]
    fn original_never_among_candidates() {
        let (_d, path) = write_lexicon("fine\tADJ\tdecent,fine,ok\n");
        let lex = SynonymLexicon::load(&path).unwrap();
        assert!(!lex
            .candidates("fine", Pos::Adj)
            .iter()
            .any(|c| c == "fine"));
    }
}
