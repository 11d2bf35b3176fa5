//! Input-form-specific vocabularies and example encoding.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{Example, Token};
use crate::zoo::InputForm;

/// Reserved row for the synthetic padding symbol (used for empty inputs).
pub const PAD_ID: usize = 0;
/// Reserved row for the unknown symbol.
pub const UNK_ID: usize = 1;

/// Surface that is guaranteed to fall outside every vocabulary, so
/// substituting it for a word masks that word with the UNK symbol. The
/// angle brackets cannot appear in tokenized text (words are alphanumeric).
pub const UNK_SURFACE: &str = "<unk>";

/// A word or character-trigram vocabulary built from a training split.
///
/// Rows 0 and 1 are reserved for PAD and UNK; remaining symbols are ordered
/// by descending frequency with alphabetic tie-break, so two builds over
/// the same data are identical.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ZooVocab {
    form: InputForm,
    symbols: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

/// An example encoded for a particular input form: one word id per
/// position, or one bag of trigram ids per position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EncodedInput {
    Words(Vec<usize>),
    CharBags(Vec<Vec<usize>>),
}

impl EncodedInput {
    pub fn positions(&self) -> usize {
        match self {
            EncodedInput::Words(ids) => ids.len(),
            EncodedInput::CharBags(bags) => bags.len(),
        }
    }

    /// Mask the symbol(s) at `position` with UNK.
    pub fn mask_position(&mut self, position: usize) {
        match self {
            EncodedInput::Words(ids) => ids[position] = UNK_ID,
            EncodedInput::CharBags(bags) => bags[position] = vec![UNK_ID],
        }
    }
}

/// Character trigrams of `^word$`.
pub fn char_trigrams(surface: &str) -> Vec<String> {
    let chars: Vec<char> = std::iter::once('^')
        .chain(surface.chars())
        .chain(std::iter::once('$'))
        .collect();
    chars.windows(3).map(|w| w.iter().collect()).collect()
}

impl ZooVocab {
    /// Build the vocabulary for `form` over the given examples, keeping
    /// symbols seen at least `min_count` times, capped at `max_symbols`
    /// (reserved rows excluded from the cap accounting).
    pub fn build(
        examples: &[Example],
        form: InputForm,
        min_count: usize,
        max_symbols: usize,
    ) -> Self {
        let mut counts: HashMap<String, usize> = HashMap::new();
        for ex in examples {
            for tok in &ex.tokens {
                match form {
                    InputForm::Word => {
                        *counts.entry(tok.surface.clone()).or_insert(0) += 1;
                    }
                    InputForm::CharNgram => {
                        for tri in char_trigrams(&tok.surface) {
                            *counts.entry(tri).or_insert(0) += 1;
                        }
                    }
                }
            }
        }
        let mut ranked: Vec<(String, usize)> = counts
            .into_iter()
            .filter(|(_, c)| *c >= min_count)
            .collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        ranked.truncate(max_symbols);

        let mut symbols = Vec::with_capacity(ranked.len() + 2);
        symbols.push("<pad>".to_string());
        symbols.push(UNK_SURFACE.to_string());
        symbols.extend(ranked.into_iter().map(|(s, _)| s));
        let index = Self::build_index(&symbols);
        ZooVocab {
            form,
            symbols,
            index,
        }
    }

    fn build_index(symbols: &[String]) -> HashMap<String, usize> {
        symbols
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect()
    }

    /// Reconstruct a vocabulary from an already-ordered symbol list (rows 0
    /// and 1 must be the PAD and UNK symbols).
    pub fn from_symbols(form: InputForm, symbols: Vec<String>) -> Self {
        let index = Self::build_index(&symbols);
        ZooVocab {
            form,
            symbols,
            index,
        }
    }

    /// Restore the lookup index after deserialization.
    pub fn rebuild_index(&mut self) {
        self.index = Self::build_index(&self.symbols);
    }

    pub fn form(&self) -> InputForm {
        self.form
    }

    /// Number of embedding rows (symbols incl. PAD and UNK).
    pub fn rows(&self) -> usize {
        self.symbols.len()
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn lookup(&self, symbol: &str) -> usize {
        self.index.get(symbol).copied().unwrap_or(UNK_ID)
    }

    pub fn contains(&self, symbol: &str) -> bool {
        self.index.contains_key(symbol)
    }

    /// Encode a token sequence. Empty input becomes a single PAD position,
    /// and [`UNK_SURFACE`] maps to the UNK row for every input form.
    pub fn encode(&self, tokens: &[Token]) -> EncodedInput {
        match self.form {
            InputForm::Word => {
                if tokens.is_empty() {
                    return EncodedInput::Words(vec![PAD_ID]);
                }
                EncodedInput::Words(tokens.iter().map(|t| self.lookup(&t.surface)).collect())
            }
            InputForm::CharNgram => {
                if tokens.is_empty() {
                    return EncodedInput::CharBags(vec![vec![PAD_ID]]);
                }
                EncodedInput::CharBags(
                    tokens
                        .iter()
                        .map(|t| {
                            if t.surface == UNK_SURFACE {
                                return vec![UNK_ID];
                            }
                            char_trigrams(&t.surface)
                                .iter()
                                .map(|tri| self.lookup(tri))
                                .collect()
                        })
                        .collect(),
                )
            }
        }
    }
}
