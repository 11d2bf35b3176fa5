//! Deterministic generator for the shipped desk-scale assets: a binary
//! sentiment review corpus, the synonym lexicon, the POS lexicon, and the
//! pretrained embedding file.
//!
//! The vocabulary is layered so the lexicon offers substitutions with
//! different footprints: same-polarity siblings (harmless), corpus words
//! associated with the opposite class (damage every input form), rare
//! out-of-vocabulary synonyms that share stems with in-corpus words
//! (damage word models, barely touch character models), and
//! opposite-stem intensifiers in positive usage (the reverse). Class-
//! correlated nouns provide dataset bias for the rule miners to find.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::corpus::{load_dataset, CorpusFormat, Dataset, Pos, PosLexicon};
use crate::error::{Error, Result};
use crate::lexicon::SynonymLexicon;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub train_size: usize,
    pub test_size: usize,
    pub seed: u64,
    pub embedding_dim: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            train_size: 8000,
            test_size: 2000,
            seed: 20_260_809,
            embedding_dim: 24,
        }
    }
}

const STRONG_POS_ADJ: &[&str] = &[
    "brilliant", "superb", "wonderful", "delightful", "charming", "excellent", "glorious",
    "stunning", "masterful", "elegant", "witty", "gripping", "moving", "graceful", "inspired",
    "thrilling", "engaging", "enjoyable", "satisfying", "remarkable", "impressive", "compelling",
    "inventive", "polished", "sincere", "luminous", "exquisite", "radiant", "splendid",
    "magnificent",
];

const STRONG_NEG_ADJ: &[&str] = &[
    "dull", "bland", "tedious", "awful", "dreadful", "clumsy", "shallow", "stale", "weak",
    "messy", "hollow", "lifeless", "sloppy", "tiresome", "grim", "crude", "flat", "lame",
    "cheap", "murky", "boring", "painful", "pointless", "drab", "dismal", "wooden", "laborious",
    "forgettable", "incoherent", "terrible", "mediocre", "horrid",
];

const MILD_POS_ADJ: &[&str] = &[
    "fine", "good", "solid", "neat", "pleasant", "decent", "crisp", "lively", "warm", "bright",
];

const MILD_NEG_ADJ: &[&str] = &[
    "slow", "thin", "rough", "tired", "noisy", "bleak", "stiff", "sour", "average", "routine",
    "bizarre",
];

/// Positive-usage words whose character shape overlaps negative stems
/// ("terrific" vs "terrible"). They damage character models when swapped
/// in, while word models read them as positive.
const CONTRAST_POS_ADJ: &[&str] = &["terrific", "killer", "wicked", "fearless"];
const CONTRAST_POS_ADV: &[&str] = &["awfully", "terribly", "frightfully", "painfully"];

/// Opposite-class "trap" synonyms: plausible replacements for strong
/// positive words that the corpus associates with negative reviews, and
/// vice versa. Swapping one in damages every input form.
const TRAP_NEG_ADJ: &[&str] = &[
    "glib", "maudlin", "showy", "hokey", "schmaltzy", "stagy", "garish", "saccharine",
    "mawkish", "florid",
];
const TRAP_POS_ADJ: &[&str] = &[
    "understated", "wry", "deadpan", "breezy", "earnest", "snappy", "brisk", "spirited",
    "soulful", "tender",
];

const POS_NOUN: &[&str] = &[
    "gem", "triumph", "delight", "masterpiece", "treat", "marvel", "winner", "charmer",
];
const NEG_NOUN: &[&str] = &[
    "mess", "bore", "failure", "disaster", "chore", "dud", "misfire", "slog",
];
const POS_VERB: &[&str] = &["shines", "dazzles", "delights", "soars", "charms", "sparkles"];
const NEG_VERB: &[&str] = &["drags", "stumbles", "bores", "fails", "plods", "fizzles"];

const NEUTRAL_NOUN: &[&str] = &[
    "film", "movie", "story", "plot", "script", "director", "actor", "cast", "scene", "ending",
    "dialogue", "character", "pace", "tone", "style", "theme", "camera", "screen", "picture",
    "acting", "humor", "action", "music", "moment", "idea", "image", "voice", "craft",
];
const NEUTRAL_VERB: &[&str] = &["feels", "looks", "seems", "plays", "moves", "runs", "lands"];
const NEUTRAL_ADV: &[&str] = &[
    "really", "quite", "very", "rather", "almost", "nearly", "truly", "fairly",
];

/// Class-correlated but sentiment-free nouns: the dataset bias the rule
/// miners should surface.
const BIAS_POS_NOUN: &[&str] = &["journey", "portrait", "ensemble", "debut", "festival", "classic"];
const BIAS_NEG_NOUN: &[&str] = &["sequel", "franchise", "remake", "formula", "runtime", "trailer"];

/// Individually rare but perfectly class-pure nouns. Ratio-form PMI
/// saturates on them while trained models barely weight them, so
/// association-only rule rankings overrate their positions.
const RARE_PURE_POS_NOUN: &[&str] = &[
    "standout", "showcase", "knockout", "stunner", "beauty", "highlight", "keeper",
    "crowdpleaser", "heartwarmer", "charmfest", "gemstone", "winnerpiece", "joyride",
    "delighter", "sparkler", "crownjewel", "peach", "corker", "humdinger", "dynamo",
    "beaut", "gembox", "winnings", "treatlet", "dazzler", "pleaser", "grabber",
    "uplifter", "rouser", "gladdener", "shiner", "gleamer", "funfest", "gleefest",
    "cheerfest", "heartlifter", "wonderbox", "giftbox", "prize", "jubilee", "festivity",
    "rhapsody", "serenade", "bouquet", "confection", "nugget", "pearl", "sunburst",
];
const RARE_PURE_NEG_NOUN: &[&str] = &[
    "stinker", "clunker", "snoozer", "misstep", "letdown", "eyesore", "timewaster",
    "groaner", "plodder", "cashgrab", "trainwreck", "bellyflop", "fiasco", "botchjob",
    "yawner", "drudge", "misfit", "washout", "deadweight", "bummer", "dirge", "slogfest",
    "mishmash", "blunderfest", "dampener", "downer", "drainer", "mopefest", "gloomfest",
    "dudfest", "flopper", "squanderer", "timesink", "chorefest", "grindfest", "drearfest",
    "mudpile", "sludgefest", "wreckage", "rubble", "debris", "landfill", "quagmire",
    "swamp", "morass", "dungheap", "potboiler", "retread",
];

/// Rare synonyms that never occur in the corpus. The word form is new to a
/// word model (UNK), but the stems overlap in-corpus positive words, so
/// character models still read the polarity.
const RARE_POS_STEM_ADJ: &[&str] = &[
    "dazzling", "sparkling", "shimmering", "gleaming", "thrilled", "inspiring", "masterly",
    "resplendent", "luminescent", "splendiferous", "charmed", "delightsome",
];
/// The negative-side mirror: out-of-corpus comparatives and variants whose
/// stems overlap in-corpus negative words.
const RARE_NEG_STEM_ADJ: &[&str] = &[
    "staler", "flatter", "cheaper", "grimmer", "cruder", "lamer", "weaker", "blander",
    "murkier", "messier", "duller", "slower", "dullish",
];
/// In-corpus negative adjectives whose character shape carries positive
/// stems (charm, joy, wit, grace): swapping one in damages character
/// models while word models read plain negativity.
const NEG_POS_STEM_ADJ: &[&str] = &[
    "charmless", "joyless", "witless", "graceless", "humorless", "loveless",
];
/// Rare, no stem overlap with anything in the corpus: pure UNK swaps.
const RARE_PLAIN_ADJ: &[&str] = &[
    "passable", "serviceable", "unexceptional", "everyday", "outlandish", "brainy", "peachy",
    "presentable", "outre",
];
const RARE_PLAIN_NOUN: &[&str] = &["jewel", "victory", "landmark", "triumphette", "keepsake"];

const DETS: &[&str] = &["the", "a", "this", "its", "one"];
const PREPS: &[&str] = &["of", "with", "in", "for"];
const LINKS: &[&str] = &["is", "was"];
const PRONOUNS: &[&str] = &["it"];

fn pick<'a>(rng: &mut ChaCha8Rng, list: &[&'a str]) -> &'a str {
    list[rng.gen_range(0..list.len())]
}

/// Sentence-level word pools for one label.
struct Pools {
    strong_adj: &'static [&'static str],
    mild_adj: &'static [&'static str],
    polar_noun: &'static [&'static str],
    polar_verb: &'static [&'static str],
    trap_adj: &'static [&'static str],
    bias_noun: &'static [&'static str],
}

fn pools(label: usize) -> Pools {
    if label == 0 {
        Pools {
            strong_adj: STRONG_POS_ADJ,
            mild_adj: MILD_POS_ADJ,
            polar_noun: POS_NOUN,
            polar_verb: POS_VERB,
            trap_adj: TRAP_POS_ADJ,
            bias_noun: BIAS_POS_NOUN,
        }
    } else {
        Pools {
            strong_adj: STRONG_NEG_ADJ,
            mild_adj: MILD_NEG_ADJ,
            polar_noun: NEG_NOUN,
            polar_verb: NEG_VERB,
            trap_adj: TRAP_NEG_ADJ,
            bias_noun: BIAS_NEG_NOUN,
        }
    }
}

/// An adjective drawn mostly from the label's own side. Positive sentences
/// occasionally use the contrast intensifiers and adjectives.
fn polar_adj(rng: &mut ChaCha8Rng, label: usize) -> String {
    let flip = rng.gen_bool(0.12);
    let side = if flip { 1 - label } else { label };
    let p = pools(side);
    let roll: f64 = rng.gen();
    let word = if side == 0 && roll < 0.08 {
        pick(rng, CONTRAST_POS_ADJ)
    } else if side == 1 && roll < 0.10 {
        pick(rng, NEG_POS_STEM_ADJ)
    } else if roll < 0.75 {
        pick(rng, p.strong_adj)
    } else {
        pick(rng, p.mild_adj)
    };
    word.to_string()
}

fn adverb(rng: &mut ChaCha8Rng, label: usize) -> String {
    if label == 0 && rng.gen_bool(0.25) {
        pick(rng, CONTRAST_POS_ADV).to_string()
    } else {
        pick(rng, NEUTRAL_ADV).to_string()
    }
}

fn noun(rng: &mut ChaCha8Rng, label: usize) -> String {
    let roll: f64 = rng.gen();
    if roll < 0.18 {
        let side = if rng.gen_bool(0.85) { label } else { 1 - label };
        pick(rng, pools(side).bias_noun).to_string()
    } else {
        pick(rng, NEUTRAL_NOUN).to_string()
    }
}

fn clause(rng: &mut ChaCha8Rng, label: usize) -> String {
    let p = pools(label);
    match rng.gen_range(0..7u32) {
        0 => format!(
            "{} {} {} {} {}",
            pick(rng, DETS),
            noun(rng, label),
            pick(rng, LINKS),
            adverb(rng, label),
            polar_adj(rng, label)
        ),
        1 => format!(
            "{} {} {} {} {} {}",
            pick(rng, DETS),
            polar_adj(rng, label),
            noun(rng, label),
            pick(rng, PREPS),
            polar_adj(rng, label),
            noun(rng, label)
        ),
        2 => {
            let verb = if rng.gen_bool(0.6) {
                pick(rng, p.polar_verb)
            } else {
                pick(rng, NEUTRAL_VERB)
            };
            format!(
                "{} {} {} {} {} {} {}",
                pick(rng, DETS),
                noun(rng, label),
                verb,
                pick(rng, PREPS),
                pick(rng, DETS),
                polar_adj(rng, label),
                noun(rng, label)
            )
        }
        3 => format!(
            "{} {} {} {} {}",
            pick(rng, DETS),
            p.polar_noun[rng.gen_range(0..p.polar_noun.len())],
            pick(rng, PREPS),
            pick(rng, DETS),
            noun(rng, label)
        ),
        4 => format!(
            "{} {} {} {} {}",
            pick(rng, DETS),
            noun(rng, label),
            pick(rng, LINKS),
            pick(rng, DETS),
            p.polar_noun[rng.gen_range(0..p.polar_noun.len())]
        ),
        5 => format!(
            "{} {} {} {} {}",
            adverb(rng, label),
            polar_adj(rng, label),
            "and",
            adverb(rng, label),
            polar_adj(rng, label)
        ),
        _ => {
            let adj = if rng.gen_bool(0.30) {
                pick(rng, p.trap_adj).to_string()
            } else {
                polar_adj(rng, label)
            };
            format!(
                "{} {} {} {} {}",
                pick(rng, PRONOUNS),
                pick(rng, LINKS),
                pick(rng, DETS),
                adj,
                noun(rng, label)
            )
        }
    }
}

/// A clause with no sentiment-bearing words: filler that raises the
/// substitutable-token count without adding class evidence.
fn neutral_clause(rng: &mut ChaCha8Rng, label: usize) -> String {
    match rng.gen_range(0..3u32) {
        0 => format!(
            "{} {} {} {} {} {}",
            pick(rng, DETS),
            noun(rng, label),
            pick(rng, NEUTRAL_VERB),
            pick(rng, PREPS),
            pick(rng, DETS),
            noun(rng, label)
        ),
        1 => format!(
            "{} {} {} {} {}",
            pick(rng, DETS),
            noun(rng, label),
            pick(rng, PREPS),
            pick(rng, DETS),
            noun(rng, label)
        ),
        _ => format!(
            "{} {} {} {} {}",
            pick(rng, PRONOUNS),
            pick(rng, NEUTRAL_VERB),
            pick(rng, PREPS),
            pick(rng, DETS),
            noun(rng, label)
        ),
    }
}

/// One generated review sentence for the given label: one or two polar
/// clauses padded with neutral clauses and, often, a rare class-pure noun.
pub fn sentence(rng: &mut ChaCha8Rng, label: usize) -> String {
    let polar = if rng.gen_bool(0.6) { 1 } else { 2 };
    let neutral = match rng.gen_range(0..20u32) {
        0..=4 => 0,
        5..=13 => 1,
        _ => 2,
    };
    let mut clauses: Vec<String> = Vec::new();
    for _ in 0..polar {
        clauses.push(clause(rng, label));
    }
    for _ in 0..neutral {
        clauses.push(neutral_clause(rng, label));
    }
    let pure_list = if label == 0 {
        RARE_PURE_POS_NOUN
    } else {
        RARE_PURE_NEG_NOUN
    };
    if rng.gen_bool(0.85) {
        clauses.push(format!("{} {}", pick(rng, DETS), pick(rng, pure_list)));
        if rng.gen_bool(0.40) {
            clauses.push(format!("{} {}", pick(rng, DETS), pick(rng, pure_list)));
        }
    }
    // Random clause order so no position systematically carries the
    // class-pure or polar material.
    clauses.shuffle(rng);
    let mut out = String::new();
    for (i, c) in clauses.iter().enumerate() {
        if i > 0 {
            let joiner = if rng.gen_bool(0.5) { " and " } else { " , " };
            out.push_str(if rng.gen_bool(0.3) { " but " } else { joiner });
        }
        out.push_str(c);
    }
    out.push_str(if rng.gen_bool(0.1) { " !" } else { " ." });
    out
}

/// The full generated asset bundle, as file contents.
#[derive(Debug, Clone)]
pub struct SynthAssets {
    pub train_tsv: String,
    pub test_tsv: String,
    pub labels_txt: String,
    pub synonyms_tsv: String,
    pub pos_tsv: String,
    pub embeddings_txt: String,
}

fn corpus_records(cfg: &SynthConfig) -> (String, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut write_split = |count: usize| -> String {
        let mut out = String::new();
        for i in 0..count {
            let label = i % 2; // balanced
            let name = if label == 0 { "pos" } else { "neg" };
            let _ = writeln!(out, "{name}\t{}", sentence(&mut rng, label));
        }
        out
    };
    let train = write_split(cfg.train_size);
    let test = write_split(cfg.test_size);
    (train, test)
}

/// Every corpus word with its lexicon tag.
fn pos_entries() -> Vec<(&'static str, Pos)> {
    let mut entries: Vec<(&'static str, Pos)> = Vec::new();
    let adj_lists = [
        STRONG_POS_ADJ,
        STRONG_NEG_ADJ,
        MILD_POS_ADJ,
        MILD_NEG_ADJ,
        CONTRAST_POS_ADJ,
        TRAP_NEG_ADJ,
        TRAP_POS_ADJ,
        NEG_POS_STEM_ADJ,
        RARE_POS_STEM_ADJ,
        RARE_NEG_STEM_ADJ,
        RARE_PLAIN_ADJ,
    ];
    for list in adj_lists {
        entries.extend(list.iter().map(|w| (*w, Pos::Adj)));
    }
    let noun_lists = [
        POS_NOUN,
        NEG_NOUN,
        NEUTRAL_NOUN,
        BIAS_POS_NOUN,
        BIAS_NEG_NOUN,
        RARE_PURE_POS_NOUN,
        RARE_PURE_NEG_NOUN,
        RARE_PLAIN_NOUN,
    ];
    for list in noun_lists {
        entries.extend(list.iter().map(|w| (*w, Pos::Noun)));
    }
    for list in [POS_VERB, NEG_VERB, NEUTRAL_VERB] {
        entries.extend(list.iter().map(|w| (*w, Pos::Verb)));
    }
    for list in [NEUTRAL_ADV, CONTRAST_POS_ADV] {
        entries.extend(list.iter().map(|w| (*w, Pos::Adv)));
    }
    entries
}

/// Lexicon lines: each head word gets a blend of sibling, trap, rare-stem
/// and plain-rare candidates so attacks have meaningfully different
/// options per input form.
fn synonym_lines(seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5e_ed);
    let mut out = String::from("# word<TAB>POS<TAB>comma-separated candidates\n");
    let mut line = |word: &str, pos: Pos, cands: Vec<&str>| {
        let mut uniq: Vec<&str> = Vec::new();
        for c in cands {
            if c != word && !uniq.contains(&c) {
                uniq.push(c);
            }
        }
        if !uniq.is_empty() {
            let _ = writeln!(out, "{word}\t{pos}\t{}", uniq.join(","));
        }
    };

    let sibling = |rng: &mut ChaCha8Rng, list: &[&'static str], not: &str| -> &'static str {
        loop {
            let w = list[rng.gen_range(0..list.len())];
            if w != not {
                return w;
            }
        }
    };

    for (i, &w) in STRONG_POS_ADJ.iter().enumerate() {
        let mut cands = vec![sibling(&mut rng, STRONG_POS_ADJ, w)];
        match i % 4 {
            0 => cands.push(pick(&mut rng, RARE_POS_STEM_ADJ)),
            1 => {
                cands.push(pick(&mut rng, RARE_POS_STEM_ADJ));
                cands.push(pick(&mut rng, CONTRAST_POS_ADJ));
            }
            2 => {
                cands.push(pick(&mut rng, RARE_PLAIN_ADJ));
                cands.push(pick(&mut rng, TRAP_NEG_ADJ));
            }
            _ => {
                cands.push(pick(&mut rng, RARE_POS_STEM_ADJ));
                cands.push(pick(&mut rng, RARE_PLAIN_ADJ));
            }
        }
        line(w, Pos::Adj, cands);
    }
    for (i, &w) in STRONG_NEG_ADJ.iter().enumerate() {
        let mut cands = vec![sibling(&mut rng, STRONG_NEG_ADJ, w)];
        match i % 4 {
            0 => cands.push(pick(&mut rng, RARE_NEG_STEM_ADJ)),
            1 => {
                cands.push(pick(&mut rng, RARE_NEG_STEM_ADJ));
                cands.push(pick(&mut rng, NEG_POS_STEM_ADJ));
            }
            2 => {
                cands.push(pick(&mut rng, RARE_PLAIN_ADJ));
                cands.push(pick(&mut rng, TRAP_POS_ADJ));
            }
            _ => {
                cands.push(pick(&mut rng, RARE_NEG_STEM_ADJ));
                cands.push(pick(&mut rng, RARE_PLAIN_ADJ));
            }
        }
        line(w, Pos::Adj, cands);
    }
    for (i, &w) in MILD_POS_ADJ.iter().enumerate() {
        let mut cands = vec![
            sibling(&mut rng, MILD_POS_ADJ, w),
            pick(&mut rng, RARE_PLAIN_ADJ),
        ];
        if i % 3 == 0 {
            cands.push(pick(&mut rng, TRAP_NEG_ADJ));
        }
        line(w, Pos::Adj, cands);
    }
    for (i, &w) in MILD_NEG_ADJ.iter().enumerate() {
        let mut cands = vec![
            sibling(&mut rng, MILD_NEG_ADJ, w),
            pick(&mut rng, RARE_NEG_STEM_ADJ),
        ];
        if i % 3 == 0 {
            cands.push(pick(&mut rng, TRAP_POS_ADJ));
        }
        line(w, Pos::Adj, cands);
    }
    for &w in NEG_POS_STEM_ADJ {
        line(w, Pos::Adj, vec![sibling(&mut rng, STRONG_NEG_ADJ, w)]);
    }
    // Table-style flavor pairs with fixed candidates.
    line("average", Pos::Adj, vec!["mediocre", "everyday"]);
    line("routine", Pos::Adj, vec!["everyday", "unexceptional"]);
    line("excellent", Pos::Adj, vec!["splendid", "terrific"]);
    line("bizarre", Pos::Adj, vec!["outlandish", "outre"]);
    line("glorious", Pos::Adj, vec!["splendiferous", "resplendent"]);
    line("brilliant", Pos::Adj, vec!["brainy", "dazzling"]);

    for &w in CONTRAST_POS_ADJ {
        line(w, Pos::Adj, vec![sibling(&mut rng, STRONG_POS_ADJ, w)]);
    }
    for &w in NEUTRAL_ADV {
        line(
            w,
            Pos::Adv,
            vec![
                sibling(&mut rng, NEUTRAL_ADV, w),
                pick(&mut rng, CONTRAST_POS_ADV),
            ],
        );
    }
    for &w in POS_NOUN {
        line(
            w,
            Pos::Noun,
            vec![
                sibling(&mut rng, POS_NOUN, w),
                pick(&mut rng, RARE_PLAIN_NOUN),
            ],
        );
    }
    for &w in RARE_PURE_POS_NOUN {
        line(
            w,
            Pos::Noun,
            vec![
                sibling(&mut rng, NEUTRAL_NOUN, w),
                pick(&mut rng, RARE_PLAIN_NOUN),
            ],
        );
    }
    for &w in RARE_PURE_NEG_NOUN {
        line(
            w,
            Pos::Noun,
            vec![
                sibling(&mut rng, NEUTRAL_NOUN, w),
                pick(&mut rng, RARE_PLAIN_NOUN),
            ],
        );
    }
    for &w in NEG_NOUN {
        line(w, Pos::Noun, vec![sibling(&mut rng, NEG_NOUN, w)]);
    }
    // Neutral and bias nouns swap among themselves; bias words crossing
    // sides is the dataset-bias lever.
    for &w in NEUTRAL_NOUN {
        line(w, Pos::Noun, vec![sibling(&mut rng, NEUTRAL_NOUN, w)]);
    }
    for &w in BIAS_POS_NOUN {
        line(
            w,
            Pos::Noun,
            vec![
                pick(&mut rng, BIAS_NEG_NOUN),
                sibling(&mut rng, NEUTRAL_NOUN, w),
            ],
        );
    }
    for &w in BIAS_NEG_NOUN {
        line(
            w,
            Pos::Noun,
            vec![
                pick(&mut rng, BIAS_POS_NOUN),
                sibling(&mut rng, NEUTRAL_NOUN, w),
            ],
        );
    }
    for &w in POS_VERB {
        line(w, Pos::Verb, vec![sibling(&mut rng, POS_VERB, w)]);
    }
    for &w in NEG_VERB {
        line(w, Pos::Verb, vec![sibling(&mut rng, NEG_VERB, w)]);
    }
    for &w in NEUTRAL_VERB {
        line(w, Pos::Verb, vec![sibling(&mut rng, NEUTRAL_VERB, w)]);
    }
    out
}

/// Seed-stable hash of a word, independent of process or platform.
fn word_hash(word: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in word.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x1000_0000_01b3);
    }
    h
}

fn polarity_of(word: &str) -> f64 {
    let strong_pos = STRONG_POS_ADJ
        .iter()
        .chain(POS_NOUN)
        .chain(POS_VERB)
        .chain(CONTRAST_POS_ADJ);
    let strong_neg = STRONG_NEG_ADJ
        .iter()
        .chain(NEG_NOUN)
        .chain(NEG_VERB)
        .chain(NEG_POS_STEM_ADJ);
    if strong_pos.clone().any(|w| *w == word) {
        return 1.0;
    }
    if strong_neg.clone().any(|w| *w == word) {
        return -1.0;
    }
    if MILD_POS_ADJ.contains(&word) || TRAP_POS_ADJ.contains(&word) {
        return 0.6;
    }
    if MILD_NEG_ADJ.contains(&word) || TRAP_NEG_ADJ.contains(&word) {
        return -0.6;
    }
    if BIAS_POS_NOUN.contains(&word) {
        return 0.3;
    }
    if BIAS_NEG_NOUN.contains(&word) {
        return -0.3;
    }
    if RARE_PURE_POS_NOUN.contains(&word) {
        return 0.15;
    }
    if RARE_PURE_NEG_NOUN.contains(&word) {
        return -0.15;
    }
    0.0
}

/// Pretrained-style vectors: shared polarity direction plus word-specific
/// noise. Rare lexicon-only words are deliberately absent so the OOV
/// fallback path is exercised.
fn embedding_lines(cfg: &SynthConfig) -> String {
    let dim = cfg.embedding_dim;
    let mut words: Vec<&str> = Vec::new();
    for (w, _) in pos_entries() {
        if !RARE_POS_STEM_ADJ.contains(&w)
            && !RARE_NEG_STEM_ADJ.contains(&w)
            && !RARE_PLAIN_ADJ.contains(&w)
            && !RARE_PLAIN_NOUN.contains(&w)
            && !words.contains(&w)
        {
            words.push(w);
        }
    }
    for w in DETS
        .iter()
        .chain(PREPS)
        .chain(LINKS)
        .chain(PRONOUNS)
        .chain(["and", "but"].iter())
    {
        if !words.contains(w) {
            words.push(w);
        }
    }

    // Fixed polarity direction from the corpus seed.
    let mut dir_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0xd1_2e);
    let mut dir = vec![0.0f64; dim];
    for v in dir.iter_mut() {
        *v = dir_rng.gen_range(-1.0..1.0);
    }
    let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
    dir.iter_mut().for_each(|v| *v /= norm);

    let mut out = String::new();
    for w in words {
        let mut rng = ChaCha8Rng::seed_from_u64(word_hash(w) ^ cfg.seed);
        let pol = polarity_of(w);
        let mut vec = Vec::with_capacity(dim);
        for d in dir.iter() {
            let noise: f64 = rng.gen_range(-0.6..0.6);
            vec.push(0.6 * pol * d + noise);
        }
        let joined = vec
            .iter()
            .map(|v| format!("{v:.6}"))
            .collect::<Vec<_>>()
            .join(" ");
        let _ = writeln!(out, "{w} {joined}");
    }
    out
}

/// Generate every asset as in-memory file contents.
pub fn generate_assets(cfg: &SynthConfig) -> SynthAssets {
    let (train_tsv, test_tsv) = corpus_records(cfg);
    let mut pos_tsv = String::from("# word<TAB>TAG\n");
    let mut entries = pos_entries();
    entries.sort();
    entries.dedup();
    for (w, pos) in entries {
        let _ = writeln!(pos_tsv, "{w}\t{pos}");
    }
    SynthAssets {
        train_tsv,
        test_tsv,
        labels_txt: "pos\nneg\n".to_string(),
        synonyms_tsv: synonym_lines(cfg.seed),
        pos_tsv,
        embeddings_txt: embedding_lines(cfg),
    }
}

/// Write the asset bundle under `dir`:
/// `corpus/{train.tsv,test.tsv,labels.txt}`, `lexicon/synonyms.tsv`,
/// `lexicon/pos.tsv`, `embeddings/desk.txt`.
pub fn write_assets(cfg: &SynthConfig, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    let assets = generate_assets(cfg);
    let write = |rel: &str, content: &str| -> Result<()> {
        let path = dir.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        fs::write(&path, content).map_err(|e| Error::io(&path, e))
    };
    write("corpus/train.tsv", &assets.train_tsv)?;
    write("corpus/test.tsv", &assets.test_tsv)?;
    write("corpus/labels.txt", &assets.labels_txt)?;
    write("lexicon/synonyms.tsv", &assets.synonyms_tsv)?;
    write("lexicon/pos.tsv", &assets.pos_tsv)?;
    write("embeddings/desk.txt", &assets.embeddings_txt)?;
    Ok(())
}

/// Build the desk dataset and lexicons fully in memory (used by tests; the
/// CLI reads the shipped files instead).
pub fn desk_dataset(cfg: &SynthConfig) -> Result<(Dataset, SynonymLexicon, PosLexicon)> {
    let dir = tempdir_for_assets(cfg)?;
    let pos_lexicon = PosLexicon::load(dir.path().join("lexicon/pos.tsv"))?;
    let dataset = load_dataset(dir.path().join("corpus"), CorpusFormat::Tsv, &pos_lexicon)?;
    let synonyms = SynonymLexicon::load(dir.path().join("lexicon/synonyms.tsv"))?;
    Ok((dataset, synonyms, pos_lexicon))
}

fn tempdir_for_assets(cfg: &SynthConfig) -> Result<tempfile_shim::TempDir> {
    let dir = tempfile_shim::TempDir::new()?;
    write_assets(cfg, dir.path())?;
    Ok(dir)
}

/// Minimal scoped temporary directory (avoids a hard dependency for
/// non-test callers).
mod tempfile_shim {
    use std::path::{Path, PathBuf};

    pub struct TempDir(PathBuf);

    impl TempDir {
        pub fn new() -> crate::error::Result<TempDir> {
            let base = std::env::temp_dir();
            let unique = format!(
                "transferlab-synth-{}-{}",
                std::process::id(),
                std::time::SystemTime::now()
                    .duration_since(std::time::UNIX_EPOCH)
                    .map(|d| d.as_nanos())
                    .unwrap_or(0)
            );
            let path = base.join(unique);
            std::fs::create_dir_all(&path)
                .map_err(|e| crate::error::Error::io(&path, e))?;
            Ok(TempDir(path))
        }

        pub fn path(&self) -> &Path {
            &self.0
        }
    }

    impl Drop for TempDir {
        fn drop(&mut self) {
            let _ = std::fs::remove_dir_all(&self.0);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg() -> SynthConfig {
        SynthConfig {
            train_size: 200,
            test_size: 60,
            seed: 7,
            embedding_dim: 8,
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_assets(&small_cfg());
        let b = generate_assets(&small_cfg());
        assert_eq!(a.train_tsv, b.train_tsv);
        assert_eq!(a.synonyms_tsv, b.synonyms_tsv);
        assert_eq!(a.embeddings_txt, b.embeddings_txt);
    }

    #[test]
    fn assets_load_cleanly() {
        let (data, synonyms, pos) = desk_dataset(&small_cfg()).unwrap();
        assert_eq!(data.labels, ["pos", "neg"]);
        assert_eq!(data.train.len(), 200);
        assert_eq!(data.test.len(), 60);
        assert!(synonyms.len() > 100, "lexicon has {} entries", synonyms.len());
        assert_eq!(synonyms.skipped, 0);
        assert!(pos.len() > 150);
        // Tagged content words exist in generated sentences.
        let substitutable: usize = data
            .train
            .iter()
            .map(|ex| ex.substitutable_count())
            .sum();
        assert!(substitutable > data.train.len() * 2);
    }

    #[test]
    fn rare_synonyms_stay_out_of_corpus() {
        let assets = generate_assets(&small_cfg());
        for rare in RARE_POS_STEM_ADJ
            .iter()
            .chain(RARE_NEG_STEM_ADJ)
            .chain(RARE_PLAIN_ADJ)
        {
            let needle = format!(" {rare} ");
            assert!(
                !assets.train_tsv.contains(&needle),
                "{rare} leaked into the corpus"
            );
            assert!(!assets.embeddings_txt.contains(&format!("{rare} ")));
        }
    }

    #[test]
    fn lexicon_candidates_share_pos_with_heads() {
        let (_, synonyms, pos) = desk_dataset(&small_cfg()).unwrap();
        for ((word, entry_pos), cands) in synonyms.iter() {
            let head_tag = pos.assign(word);
            assert_eq!(head_tag, *entry_pos, "head {word} tagged {head_tag:?}");
            for c in cands {
                assert_eq!(pos.assign(c), *entry_pos, "candidate {c} of {word}");
            }
        }
    }
}
