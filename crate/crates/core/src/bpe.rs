//! Byte-pair encoding over integer symbol streams.
//!
//! Training repeatedly merges the most frequent adjacent pair across the
//! corpus (ties go to the lexicographically smallest `(left, right)`) until
//! the vocabulary cap is reached or no pair occurs at least twice. Each
//! corpus entry is merged on its own; pairs never span entries.
//!
//! Pair counts are maintained incrementally: after a merge only the entries
//! that contained the merged pair are recounted, and the best pair is found
//! through a max-heap with lazily discarded stale entries.

use std::cmp::Reverse;
use std::collections::hash_map::Entry;
use std::collections::{BinaryHeap, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const BPE_FORMAT: &str = "actok-bpe";
pub const BPE_FORMAT_VERSION: u32 = 1;
/// Total id budget (base alphabet plus merges).
pub const DEFAULT_MAX_VOCAB: u32 = 2048;

pub type Pair = (u32, u32);

#[derive(Debug, Error, PartialEq)]
pub enum BpeError {
    #[error("symbol {symbol} is outside the base alphabet of size {alphabet}")]
    SymbolOutOfRange { symbol: u32, alphabet: u32 },
    #[error("token {token} is not in the vocabulary of size {vocab}")]
    UnknownToken { token: u32, vocab: u32 },
    #[error("max_vocab {max_vocab} is smaller than the base alphabet {alphabet}")]
    VocabTooSmall { max_vocab: u32, alphabet: u32 },
    #[error("invalid model file: {0}")]
    Format(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BpeModel {
    format: String,
    version: u32,
    base_alphabet_size: u32,
    max_vocab: u32,
    /// Merge `i` creates id `base_alphabet_size + i`.
    merges: Vec<Pair>,
    #[serde(skip)]
    ranks: HashMap<Pair, u32>,
}

impl BpeModel {
    /// A model with no merges: encode and decode are the identity.
    pub fn identity(base_alphabet_size: u32) -> Self {
        Self::from_merges(base_alphabet_size, base_alphabet_size, Vec::new())
            .expect("empty merge list is valid")
    }

    pub fn from_merges(
        base_alphabet_size: u32,
        max_vocab: u32,
        merges: Vec<Pair>,
    ) -> Result<Self, BpeError> {
        let mut m = Self {
            format: BPE_FORMAT.into(),
            version: BPE_FORMAT_VERSION,
            base_alphabet_size,
            max_vocab,
            merges,
            ranks: HashMap::new(),
        };
        m.validate()?;
        m.index();
        Ok(m)
    }

    fn index(&mut self) {
        self.ranks = self
            .merges
            .iter()
            .enumerate()
            .map(|(i, &p)| (p, i as u32))
            .collect();
    }

    fn validate(&self) -> Result<(), BpeError> {
        if self.format != BPE_FORMAT || self.version != BPE_FORMAT_VERSION {
            return Err(BpeError::Format(format!(
                "unsupported format {} v{}",
                self.format, self.version
            )));
        }
        if self.max_vocab < self.base_alphabet_size {
            return Err(BpeError::VocabTooSmall {
                max_vocab: self.max_vocab,
                alphabet: self.base_alphabet_size,
            });
        }
        if self.vocab_size() > self.max_vocab {
            return Err(BpeError::Format(format!(
                "{} ids exceed the cap of {}",
                self.vocab_size(),
                self.max_vocab
            )));
        }
        let mut seen = HashSet::new();
        for (i, &(l, r)) in self.merges.iter().enumerate() {
            let defined = self.base_alphabet_size + i as u32;
            if l >= defined || r >= defined {
                return Err(BpeError::Format(format!(
                    "merge {i} ({l}, {r}) references an id not yet defined"
                )));
            }
            if !seen.insert((l, r)) {
                return Err(BpeError::Format(format!(
                    "merge {i} ({l}, {r}) is duplicated"
                )));
            }
        }
        Ok(())
    }

    pub fn base_alphabet_size(&self) -> u32 {
        self.base_alphabet_size
    }

    pub fn max_vocab(&self) -> u32 {
        self.max_vocab
    }

    pub fn merges(&self) -> &[Pair] {
        &self.merges
    }

    pub fn vocab_size(&self) -> u32 {
        self.base_alphabet_size + self.merges.len() as u32
    }

    /// Trains on `corpus`. Every symbol must be below `base_alphabet_size`.
    pub fn train(
        corpus: &[Vec<u32>],
        base_alphabet_size: u32,
        max_vocab: u32,
    ) -> Result<Self, BpeError> {
        if max_vocab < base_alphabet_size {
            return Err(BpeError::VocabTooSmall {
                max_vocab,
                alphabet: base_alphabet_size,
            });
        }
        for seq in corpus {
            check_symbols(seq, base_alphabet_size)?;
        }
        let merges = Trainer::new(corpus).run(base_alphabet_size, max_vocab - base_alphabet_size);
        Self::from_merges(base_alphabet_size, max_vocab, merges)
    }

    /// Applies merges in training order until none applies.
    pub fn encode(&self, seq: &[u32]) -> Result<Vec<u32>, BpeError> {
        check_symbols(seq, self.base_alphabet_size)?;
        let mut tokens = seq.to_vec();
        while tokens.len() >= 2 {
            let best = tokens
                .windows(2)
                .filter_map(|w| self.ranks.get(&(w[0], w[1])).copied())
                .min();
            let Some(rank) = best else { break };
            let pair = self.merges[rank as usize];
            merge_in_place(&mut tokens, pair, self.base_alphabet_size + rank);
        }
        Ok(tokens)
    }

    /// Expands merged ids back to base symbols.
    pub fn decode(&self, tokens: &[u32]) -> Result<Vec<u32>, BpeError> {
        let vocab = self.vocab_size();
        let mut out = Vec::with_capacity(tokens.len() * 2);
        let mut stack = Vec::new();
        for &t in tokens {
            if t >= vocab {
                return Err(BpeError::UnknownToken { token: t, vocab });
            }
            stack.push(t);
            while let Some(id) = stack.pop() {
                if id < self.base_alphabet_size {
                    out.push(id);
                } else {
                    let (l, r) = self.merges[(id - self.base_alphabet_size) as usize];
                    stack.push(r);
                    stack.push(l);
                }
            }
        }
        Ok(out)
    }

    /// Number of base symbols an id expands to.
    pub fn expanded_len(&self, token: u32) -> Option<usize> {
        if token >= self.vocab_size() {
            return None;
        }
        self.decode(&[token]).ok().map(|v| v.len())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self, BpeError> {
        let mut m: Self =
            serde_json::from_str(text).map_err(|e| BpeError::Format(e.to_string()))?;
        m.validate()?;
        m.index();
        Ok(m)
    }
}

fn check_symbols(seq: &[u32], alphabet: u32) -> Result<(), BpeError> {
    match seq.iter().find(|&&s| s >= alphabet) {
        Some(&symbol) => Err(BpeError::SymbolOutOfRange { symbol, alphabet }),
        None => Ok(()),
    }
}

/// Replaces non-overlapping occurrences of `pair`, scanning left to right.
fn merge_in_place(tokens: &mut Vec<u32>, pair: Pair, id: u32) {
    let mut write = 0;
    let mut read = 0;
    while read < tokens.len() {
        if read + 1 < tokens.len() && tokens[read] == pair.0 && tokens[read + 1] == pair.1 {
            tokens[write] = id;
            read += 2;
        } else {
            tokens[write] = tokens[read];
            read += 1;
        }
        write += 1;
    }
    tokens.truncate(write);
}

struct Trainer {
    /// Distinct corpus entries with their multiplicities.
    words: Vec<(Vec<u32>, u64)>,
    counts: HashMap<Pair, u64>,
    locations: HashMap<Pair, HashSet<usize>>,
    heap: BinaryHeap<(u64, Reverse<Pair>)>,
}

impl Trainer {
    fn new(corpus: &[Vec<u32>]) -> Self {
        let mut index: HashMap<&[u32], usize> = HashMap::new();
        let mut words: Vec<(Vec<u32>, u64)> = Vec::new();
        for seq in corpus {
            match index.entry(seq.as_slice()) {
                Entry::Occupied(e) => words[*e.get()].1 += 1,
                Entry::Vacant(e) => {
                    e.insert(words.len());
                    words.push((seq.clone(), 1));
                }
            }
        }
        let mut t = Self {
            words,
            counts: HashMap::new(),
            locations: HashMap::new(),
            heap: BinaryHeap::new(),
        };
        for i in 0..t.words.len() {
            t.add_word(i, None);
        }
        let heap = t.counts.iter().map(|(&p, &c)| (c, Reverse(p))).collect();
        t.heap = heap;
        t
    }

    fn add_word(&mut self, i: usize, changed: Option<&mut HashSet<Pair>>) {
        let (word, w) = &self.words[i];
        let mut changed = changed;
        for win in word.windows(2) {
            let p = (win[0], win[1]);
            *self.counts.entry(p).or_insert(0) += w;
            self.locations.entry(p).or_default().insert(i);
            if let Some(c) = changed.as_deref_mut() {
                c.insert(p);
            }
        }
    }

    fn remove_word(&mut self, i: usize, changed: &mut HashSet<Pair>) {
        let (word, w) = &self.words[i];
        for win in word.windows(2) {
            let p = (win[0], win[1]);
            if let Some(c) = self.counts.get_mut(&p) {
                *c -= w;
            }
            changed.insert(p);
        }
    }

    fn best(&mut self) -> Option<(Pair, u64)> {
        while let Some((c, Reverse(p))) = self.heap.pop() {
            if self.counts.get(&p).copied() == Some(c) && c > 0 {
                return Some((p, c));
            }
        }
        None
    }

    fn run(mut self, base: u32, max_merges: u32) -> Vec<Pair> {
        let mut merges = Vec::new();
        while (merges.len() as u32) < max_merges {
            let Some((pair, count)) = self.best() else {
                break;
            };
            if count < 2 {
                break;
            }
            let id = base + merges.len() as u32;
            merges.push(pair);

            let mut affected: Vec<usize> = self
                .locations
                .remove(&pair)
                .map(|s| s.into_iter().collect())
                .unwrap_or_default();
            affected.sort_unstable();
            let mut changed = HashSet::new();
            for i in affected {
                let has = self.words[i].0.windows(2).any(|w| (w[0], w[1]) == pair);
                if !has {
                    continue;
                }
                self.remove_word(i, &mut changed);
                merge_in_place(&mut self.words[i].0, pair, id);
                self.add_word(i, Some(&mut changed));
            }
            self.counts.remove(&pair);
            for p in changed {
                if let Some(&c) = self.counts.get(&p) {
                    if c > 0 {
                        self.heap.push((c, Reverse(p)));
                    }
                }
            }
        }
        merges
    }
}
