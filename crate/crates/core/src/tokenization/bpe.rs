//! Byte-level byte-pair encoding.
//!
//! Text is first split into word-like chunks (a leading space sticks to the
//! following word, as in GPT-2), then each chunk is encoded as bytes and the
//! learned merges are applied in rank order. Merges never cross chunk
//! boundaries, and every byte has a base symbol, so encoding is lossless.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, HashMap, HashSet};
use std::sync::LazyLock;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::TokenizerError;

/// Number of base symbols (one per byte value).
pub const BASE_ALPHABET: usize = 256;

/// Merges need at least this many occurrences to be learned.
const MIN_PAIR_FREQUENCY: i64 = 2;

/// GPT-2's reversible byte → printable-char table, so token strings are
/// valid, whitespace-free JSON strings.
static BYTE_TO_CHAR: LazyLock<[char; 256]> = LazyLock::new(|| {
    let mut table = ['\0'; 256];
    let mut extra = 0u32;
    for b in 0..=255u8 {
        let printable = matches!(b, b'!'..=b'~' | 0xA1..=0xAC | 0xAE..=0xFF);
        table[b as usize] = if printable {
            char::from(b)
        } else {
            let c = char::from_u32(256 + extra).expect("valid scalar");
            extra += 1;
            c
        };
    }
    table
});

static CHAR_TO_BYTE: LazyLock<HashMap<char, u8>> = LazyLock::new(|| {
    BYTE_TO_CHAR
        .iter()
        .enumerate()
        .map(|(b, c)| (*c, b as u8))
        .collect()
});

fn bytes_to_symbol(bytes: &[u8]) -> String {
    bytes.iter().map(|b| BYTE_TO_CHAR[*b as usize]).collect()
}

fn symbol_to_bytes(symbol: &str) -> Option<Vec<u8>> {
    symbol.chars().map(|c| CHAR_TO_BYTE.get(&c).copied()).collect()
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum CharClass {
    Word,
    Space,
    Other,
}

fn class_of(c: char) -> CharClass {
    if c.is_whitespace() {
        CharClass::Space
    } else if c.is_alphanumeric() || c == '_' {
        CharClass::Word
    } else {
        CharClass::Other
    }
}

/// Split text into the chunks merges operate within.
pub fn pre_tokenize(text: &str) -> Vec<&str> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut chunks = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let start = chars[i].0;
        let cls = class_of(chars[i].1);
        let mut j = i + 1;
        if cls == CharClass::Space {
            while j < chars.len() && class_of(chars[j].1) == CharClass::Space {
                j += 1;
            }
            // Leave a trailing single space for the next word, GPT-2 style.
            if j < chars.len() && chars[j - 1].1 == ' ' && j - i > 1 {
                j -= 1;
            } else if j < chars.len() && chars[j - 1].1 == ' ' && j - i == 1 {
                // A lone space joins the following run.
                let next = class_of(chars[j].1);
                j += 1;
                while j < chars.len() && class_of(chars[j].1) == next {
                    j += 1;
                }
            }
        } else {
            while j < chars.len() && class_of(chars[j].1) == cls {
                j += 1;
            }
        }
        let end = chars.get(j).map_or(text.len(), |(b, _)| *b);
        chunks.push(&text[start..end]);
        i = j;
    }
    chunks
}

/// A trained byte-level BPE model.
#[derive(Debug, Clone)]
pub struct BpeModel {
    vocab: BTreeMap<String, u32>,
    merges: Vec<(String, String)>,
    special_tokens: Vec<String>,
    id_to_bytes: Vec<Vec<u8>>,
    id_to_symbol: Vec<String>,
    merge_lookup: HashMap<(u32, u32), (usize, u32)>,
}

impl PartialEq for BpeModel {
    fn eq(&self, other: &Self) -> bool {
        self.vocab == other.vocab
            && self.merges == other.merges
            && self.special_tokens == other.special_tokens
    }
}

#[derive(Serialize, Deserialize)]
struct BpeRepr {
    vocab: BTreeMap<String, u32>,
    merges: Vec<(String, String)>,
    special_tokens: Vec<String>,
}

impl Serialize for BpeModel {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        BpeRepr {
            vocab: self.vocab.clone(),
            merges: self.merges.clone(),
            special_tokens: self.special_tokens.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for BpeModel {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let repr = BpeRepr::deserialize(d)?;
        BpeModel::from_parts(repr.vocab, repr.merges, repr.special_tokens)
            .map_err(serde::de::Error::custom)
    }
}

impl BpeModel {
    /// Rebuild a model, checking that the base alphabet is complete, ids are
    /// dense, and every merge result is in the vocabulary after its inputs.
    pub fn from_parts(
        vocab: BTreeMap<String, u32>,
        merges: Vec<(String, String)>,
        special_tokens: Vec<String>,
    ) -> Result<Self, TokenizerError> {
        let invalid = |m: String| TokenizerError::InvalidModel(m);
        let n = vocab.len();
        let mut id_to_symbol = vec![String::new(); n];
        for (tok, id) in &vocab {
            let slot = id_to_symbol
                .get_mut(*id as usize)
                .ok_or_else(|| invalid(format!("id {id} out of range for {n} tokens")))?;
            if !slot.is_empty() {
                return Err(invalid(format!("duplicate id {id}")));
            }
            *slot = tok.clone();
        }
        for b in 0..=255u8 {
            let sym = bytes_to_symbol(&[b]);
            if vocab.get(&sym) != Some(&u32::from(b)) {
                return Err(invalid(format!("base symbol for byte {b} missing or misplaced")));
            }
        }
        let specials: HashSet<&str> = special_tokens.iter().map(String::as_str).collect();
        let mut id_to_bytes = Vec::with_capacity(n);
        for sym in &id_to_symbol {
            if specials.contains(sym.as_str()) {
                id_to_bytes.push(sym.as_bytes().to_vec());
            } else {
                id_to_bytes.push(
                    symbol_to_bytes(sym).ok_or_else(|| invalid(format!("token {sym:?} is not byte-mapped")))?,
                );
            }
        }
        let mut merge_lookup = HashMap::with_capacity(merges.len());
        for (rank, (a, b)) in merges.iter().enumerate() {
            let lookup = |t: &str| vocab.get(t).copied();
            let (Some(ia), Some(ib)) = (lookup(a), lookup(b)) else {
                return Err(invalid(format!("merge {rank} uses unknown symbols")));
            };
            let joined = format!("{a}{b}");
            let out = lookup(&joined)
                .ok_or_else(|| invalid(format!("merge result {joined:?} not in vocabulary")))?;
            if out <= ia.max(ib) {
                return Err(invalid(format!("merge {rank} result precedes its inputs")));
            }
            merge_lookup.entry((ia, ib)).or_insert((rank, out));
        }
        Ok(BpeModel {
            vocab,
            merges,
            special_tokens,
            id_to_bytes,
            id_to_symbol,
            merge_lookup,
        })
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    pub fn merges(&self) -> &[(String, String)] {
        &self.merges
    }

    pub fn vocabulary(&self) -> &BTreeMap<String, u32> {
        &self.vocab
    }

    pub fn special_tokens(&self) -> &[String] {
        &self.special_tokens
    }

    /// Byte-mapped symbol of a token id.
    pub fn symbol(&self, id: u32) -> Option<&str> {
        self.id_to_symbol.get(id as usize).map(String::as_str)
    }

    fn encode_chunk(&self, chunk: &str, out: &mut Vec<u32>) {
        let mut ids: Vec<u32> = chunk.bytes().map(u32::from).collect();
        while ids.len() > 1 {
            let best = ids
                .windows(2)
                .enumerate()
                .filter_map(|(i, w)| self.merge_lookup.get(&(w[0], w[1])).map(|m| (m.0, i, m.1)))
                .min();
            let Some((rank, _, new_id)) = best else {
                break;
            };
            let mut merged = Vec::with_capacity(ids.len());
            let mut i = 0;
            while i < ids.len() {
                if i + 1 < ids.len()
                    && self.merge_lookup.get(&(ids[i], ids[i + 1])).map(|m| m.0) == Some(rank)
                {
                    merged.push(new_id);
                    i += 2;
                } else {
                    merged.push(ids[i]);
                    i += 1;
                }
            }
            ids = merged;
        }
        out.extend(ids);
    }

    /// Encode text to token ids. Special tokens are matched verbatim first.
    pub fn encode(&self, text: &str) -> Vec<u32> {
        let mut out = Vec::new();
        let mut rest = text;
        while !rest.is_empty() {
            let next_special = self
                .special_tokens
                .iter()
                .filter(|s| !s.is_empty())
                .filter_map(|s| rest.find(s.as_str()).map(|pos| (pos, Reverse(s.len()), s)))
                .min();
            let (plain, special) = match next_special {
                Some((pos, _, s)) => (&rest[..pos], Some(s)),
                None => (rest, None),
            };
            for chunk in pre_tokenize(plain) {
                self.encode_chunk(chunk, &mut out);
            }
            match special {
                Some(s) => {
                    out.push(self.vocab[s]);
                    rest = &rest[plain.len() + s.len()..];
                }
                None => break,
            }
        }
        out
    }

    /// Inverse of [`encode`](Self::encode).
    pub fn decode(&self, ids: &[u32]) -> Result<String, TokenizerError> {
        let mut bytes = Vec::new();
        for id in ids {
            let b = self
                .id_to_bytes
                .get(*id as usize)
                .ok_or(TokenizerError::UnknownId(*id))?;
            bytes.extend_from_slice(b);
        }
        String::from_utf8(bytes).map_err(|_| TokenizerError::InvalidUtf8)
    }

    /// Decoded text of every token; bytes that split a UTF-8 sequence are
    /// replaced lossily.
    pub fn token_texts(&self, text: &str) -> Vec<String> {
        self.encode(text)
            .into_iter()
            .map(|id| String::from_utf8_lossy(&self.id_to_bytes[id as usize]).into_owned())
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serializes")
    }

    pub fn from_json(json: &str) -> Result<Self, TokenizerError> {
        serde_json::from_str(json).map_err(|e| TokenizerError::InvalidModel(e.to_string()))
    }
}

/// Learn merges until the vocabulary holds `vocab_size` entries or no pair
/// occurs at least twice. Equal-frequency pairs are broken by the
/// lexicographically smallest (left bytes, right bytes).
pub fn train_bpe<S: AsRef<str>>(
    corpus: &[S],
    vocab_size: usize,
    special_tokens: &[String],
) -> Result<BpeModel, TokenizerError> {
    if corpus.is_empty() {
        return Err(TokenizerError::EmptyCorpus);
    }
    let minimum = BASE_ALPHABET + special_tokens.len();
    if vocab_size <= minimum {
        return Err(TokenizerError::VocabTooSmall {
            requested: vocab_size,
            minimum: minimum + 1,
        });
    }

    let mut id_bytes: Vec<Vec<u8>> = (0..=255u8).map(|b| vec![b]).collect();
    let mut vocab: BTreeMap<String, u32> = (0..=255u8)
        .map(|b| (bytes_to_symbol(&[b]), u32::from(b)))
        .collect();
    for s in special_tokens {
        let id = vocab.len() as u32;
        vocab.insert(s.clone(), id);
        id_bytes.push(s.as_bytes().to_vec());
    }

    let mut word_counts: BTreeMap<&str, i64> = BTreeMap::new();
    for text in corpus {
        for chunk in pre_tokenize(text.as_ref()) {
            *word_counts.entry(chunk).or_default() += 1;
        }
    }
    let mut words: Vec<(Vec<u32>, i64)> = word_counts
        .into_iter()
        .map(|(w, c)| (w.bytes().map(u32::from).collect(), c))
        .collect();

    let mut pair_counts: HashMap<(u32, u32), i64> = HashMap::new();
    let mut pair_words: HashMap<(u32, u32), HashSet<usize>> = HashMap::new();
    for (wi, (syms, count)) in words.iter().enumerate() {
        for w in syms.windows(2) {
            *pair_counts.entry((w[0], w[1])).or_default() += count;
            pair_words.entry((w[0], w[1])).or_default().insert(wi);
        }
    }

    type HeapEntry = (i64, Reverse<(Vec<u8>, Vec<u8>)>, u32, u32);
    let entry = |ids: &[Vec<u8>], pair: (u32, u32), count: i64| -> HeapEntry {
        (
            count,
            Reverse((ids[pair.0 as usize].clone(), ids[pair.1 as usize].clone())),
            pair.0,
            pair.1,
        )
    };
    let mut heap: BinaryHeap<HeapEntry> = pair_counts
        .iter()
        .map(|(p, c)| entry(&id_bytes, *p, *c))
        .collect();

    let mut merges = Vec::new();
    while vocab.len() < vocab_size {
        let Some((count, _, a, b)) = heap.pop() else {
            break;
        };
        if pair_counts.get(&(a, b)) != Some(&count) {
            continue;
        }
        if count < MIN_PAIR_FREQUENCY {
            break;
        }
        let new_id = id_bytes.len() as u32;
        let mut joined = id_bytes[a as usize].clone();
        joined.extend_from_slice(&id_bytes[b as usize]);
        id_bytes.push(joined.clone());
        let left = bytes_to_symbol(&id_bytes[a as usize]);
        let right = bytes_to_symbol(&id_bytes[b as usize]);
        vocab.insert(bytes_to_symbol(&joined), new_id);
        merges.push((left, right));

        let mut touched: Vec<usize> = pair_words
            .remove(&(a, b))
            .unwrap_or_default()
            .into_iter()
            .collect();
        touched.sort_unstable();
        pair_counts.remove(&(a, b));
        let mut changed: HashSet<(u32, u32)> = HashSet::new();
        for wi in touched {
            let (syms, wc) = &mut words[wi];
            let wc = *wc;
            for w in syms.windows(2) {
                let p = (w[0], w[1]);
                if p != (a, b) {
                    if let Some(c) = pair_counts.get_mut(&p) {
                        *c -= wc;
                    }
                    changed.insert(p);
                }
            }
            let mut merged = Vec::with_capacity(syms.len());
            let mut i = 0;
            while i < syms.len() {
                if i + 1 < syms.len() && syms[i] == a && syms[i + 1] == b {
                    merged.push(new_id);
                    i += 2;
                } else {
                    merged.push(syms[i]);
                    i += 1;
                }
            }
            *syms = merged;
            for w in syms.windows(2) {
                let p = (w[0], w[1]);
                *pair_counts.entry(p).or_default() += wc;
                pair_words.entry(p).or_default().insert(wi);
                changed.insert(p);
            }
        }
        let mut changed: Vec<_> = changed.into_iter().collect();
        changed.sort_unstable();
        for p in changed {
            match pair_counts.get(&p).copied() {
                Some(c) if c > 0 => heap.push(entry(&id_bytes, p, c)),
                _ => {
                    pair_counts.remove(&p);
                    pair_words.remove(&p);
                }
            }
        }
    }

    BpeModel::from_parts(vocab, merges, special_tokens.to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn pre_tokenize_attaches_space_to_word() {
        assert_eq!(
            pre_tokenize("def f(x):\n    return x"),
            vec!["def", " f", "(", "x", "):", "\n   ", " return", " x"]
        );
        assert_eq!(pre_tokenize(""), Vec::<&str>::new());
        assert_eq!(pre_tokenize("  a"), vec![" ", " a"]);
    }

    #[test]
    fn most_frequent_pair_merged_first() {
        let m = train_bpe(&["aaaa"], 260, &[]).unwrap();
        assert_eq!(m.merges()[0], ("a".to_string(), "a".to_string()));
    }

    #[test]
    fn ties_break_lexicographically() {
        // "ab" and "cd" both occur twice; "ab" < "cd".
        let m = train_bpe(&["cd", "ab", "cd", "ab"], 257, &[]).unwrap();
        assert_eq!(m.merges()[0], ("a".to_string(), "b".to_string()));
    }

    #[test]
    fn single_char_corpus_round_trips() {
        let corpus = ["zzzz", "zz", "zzzzzzz", "z"];
        let m = train_bpe(&corpus, 300, &[]).unwrap();
        for s in corpus {
            assert_eq!(m.decode(&m.encode(s)).unwrap(), s);
        }
    }

    #[test]
    fn errors() {
        assert!(matches!(train_bpe::<&str>(&[], 300, &[]), Err(TokenizerError::EmptyCorpus)));
        assert!(matches!(train_bpe(&["a"], 256, &[]), Err(TokenizerError::VocabTooSmall { .. })));
    }

    #[test]
    fn vocab_bounded_and_merges_in_vocab() {
        let corpus = ["def foo(bar):\n    return bar + bar\n"; 5];
        let m = train_bpe(&corpus, 270, &[]).unwrap();
        assert!(m.vocab_size() <= 270);
        for (a, b) in m.merges() {
            assert!(m.vocabulary().contains_key(&format!("{a}{b}")));
        }
    }

    #[test]
    fn special_tokens_encode_whole() {
        let m = train_bpe(&["hello world"], 300, &["<|sep|>".to_string()]).unwrap();
        let ids = m.encode("hello<|sep|>world");
        assert!(ids.contains(&256));
        assert_eq!(m.decode(&ids).unwrap(), "hello<|sep|>world");
    }

    #[test]
    fn serialization_round_trip() {
        let m = train_bpe(&["one two three one two"], 280, &[]).unwrap();
        let back = BpeModel::from_json(&m.to_json()).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.encode("one two"), m.encode("one two"));
    }

    #[test]
    fn rejects_bad_model() {
        let m = train_bpe(&["aaaa aaaa"], 270, &[]).unwrap();
        let mut v: serde_json::Value = serde_json::from_str(&m.to_json()).unwrap();
        v["merges"].as_array_mut().unwrap().push(serde_json::json!(["q", "r"]));
        assert!(BpeModel::from_json(&v.to_string()).is_err());
    }

    proptest! {
        #[test]
        fn lossless(text in "\\PC{0,80}") {
            static MODEL: LazyLock<BpeModel> = LazyLock::new(|| {
                train_bpe(&["def main(args):\n    for a in args:\n        print(a) # é ü"], 320, &[]).unwrap()
            });
            prop_assert_eq!(MODEL.decode(&MODEL.encode(&text)).unwrap(), text);
        }
    }
}
