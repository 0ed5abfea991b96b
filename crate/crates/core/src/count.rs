//! Token budgets for the corpus filter.

use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::lexer::tokenize;

#[derive(Debug, Clone, Default)]
pub enum TokenizerConfig {
    /// One token per non-whitespace lexer token (comments included, each
    /// counted once). Needs no external files.
    #[default]
    Lexical,
    Bpe(BpeTokenizer),
}

impl TokenizerConfig {
    /// `lexical`, or `bpe` with a merges file (`merges.txt` or a
    /// `tokenizer.json`).
    pub fn from_name(name: &str, merges: Option<&Path>) -> Result<Self> {
        match name {
            "lexical" => Ok(TokenizerConfig::Lexical),
            "bpe" => {
                let path = merges.ok_or_else(|| {
                    Error::Config("the bpe tokenizer needs a merges file".to_string())
                })?;
                Ok(TokenizerConfig::Bpe(BpeTokenizer::from_file(path)?))
            }
            other => Err(Error::UnknownTokenizer(other.to_string())),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            TokenizerConfig::Lexical => "lexical",
            TokenizerConfig::Bpe(_) => "bpe",
        }
    }
}

pub fn count_tokens(text: &str, tokenizer: &TokenizerConfig) -> usize {
    match tokenizer {
        TokenizerConfig::Lexical => tokenize(text)
            .tokens
            .iter()
            .filter(|t| t.kind != crate::lexer::TokenKind::Whitespace)
            .count(),
        TokenizerConfig::Bpe(bpe) => bpe.count(text),
    }
}

/// Byte-level BPE in the GPT-2 style: bytes are mapped to printable
/// characters, text is pre-split into word-like pieces, and merges are
/// applied by rank inside each piece.
#[derive(Debug, Clone)]
pub struct BpeTokenizer {
    ranks: HashMap<(String, String), usize>,
    byte_chars: Box<[char; 256]>,
}

impl BpeTokenizer {
    pub fn from_merges<I, S>(merges: I) -> Self
    where
        I: IntoIterator<Item = (S, S)>,
        S: Into<String>,
    {
        let mut ranks = HashMap::new();
        for (rank, (a, b)) in merges.into_iter().enumerate() {
            ranks.entry((a.into(), b.into())).or_insert(rank);
        }
        BpeTokenizer {
            ranks,
            byte_chars: Box::new(byte_to_char_table()),
        }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let invalid = |reason: String| Error::InvalidMerges {
            path: path.to_path_buf(),
            reason,
        };
        let is_json = path.extension().is_some_and(|e| e == "json");
        let pairs = if is_json {
            let doc: serde_json::Value =
                serde_json::from_str(&raw).map_err(|e| Error::json(path, e))?;
            let merges = doc
                .pointer("/model/merges")
                .and_then(|m| m.as_array())
                .ok_or_else(|| invalid("missing model.merges array".to_string()))?;
            merges
                .iter()
                .map(|m| match m {
                    serde_json::Value::String(s) => split_merge_line(s),
                    serde_json::Value::Array(pair) => match (pair.first(), pair.get(1)) {
                        (Some(a), Some(b)) => Some((
                            a.as_str()?.to_string(),
                            b.as_str()?.to_string(),
                        )),
                        _ => None,
                    },
                    _ => None,
                })
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| invalid("merge entry is not a pair".to_string()))?
        } else {
            let mut pairs = Vec::new();
            for (i, line) in raw.lines().enumerate() {
                if line.starts_with("#version") || line.trim().is_empty() {
                    continue;
                }
                let pair = split_merge_line(line)
                    .ok_or_else(|| invalid(format!("line {}: expected `a b`", i + 1)))?;
                pairs.push(pair);
            }
            pairs
        };
        Ok(BpeTokenizer::from_merges(pairs))
    }

    pub fn count(&self, text: &str) -> usize {
        pretokenize(text).map(|piece| self.encode_piece(piece).len()).sum()
    }

    fn encode_piece(&self, piece: &str) -> Vec<String> {
        let mut symbols: Vec<String> = piece
            .bytes()
            .map(|b| self.byte_chars[b as usize].to_string())
            .collect();
        while symbols.len() > 1 {
            let best = symbols
                .windows(2)
                .enumerate()
                .filter_map(|(i, w)| {
                    self.ranks
                        .get(&(w[0].clone(), w[1].clone()))
                        .map(|&r| (r, i))
                })
                .min();
            let Some((_, i)) = best else { break };
            let right = symbols.remove(i + 1);
            symbols[i].push_str(&right);
        }
        symbols
    }
}

fn split_merge_line(line: &str) -> Option<(String, String)> {
    let mut parts = line.split(' ');
    let a = parts.next().filter(|s| !s.is_empty())?;
    let b = parts.next().filter(|s| !s.is_empty())?;
    parts.next().is_none().then(|| (a.to_string(), b.to_string()))
}

/// The GPT-2 reversible byte-to-printable-character table.
fn byte_to_char_table() -> [char; 256] {
    let mut table = ['\0'; 256];
    let mut extra = 0u32;
    for b in 0..=255u8 {
        let printable = matches!(b, b'!'..=b'~' | 0xA1..=0xAC | 0xAE..=0xFF);
        table[b as usize] = if printable {
            char::from(b)
        } else {
            extra += 1;
            char::from_u32(255 + extra).expect("valid code point")
        };
    }
    table
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Class {
    Letter,
    Digit,
    Space,
    Symbol,
}

fn classify(c: char) -> Class {
    if c.is_alphabetic() {
        Class::Letter
    } else if c.is_numeric() {
        Class::Digit
    } else if c.is_whitespace() {
        Class::Space
    } else {
        Class::Symbol
    }
}

const CONTRACTIONS: [&str; 7] = ["'s", "'t", "'re", "'ve", "'m", "'ll", "'d"];

/// GPT-2 style pre-tokenization: contractions, ` ?letters`, ` ?digits`,
/// ` ?symbols`, and whitespace runs whose last space attaches to the next
/// word.
fn pretokenize(text: &str) -> impl Iterator<Item = &str> {
    let mut pos = 0;
    std::iter::from_fn(move || {
        let rest = &text[pos..];
        let first = rest.chars().next()?;
        let len = if let Some(c) = CONTRACTIONS.iter().find(|c| rest.starts_with(*c)) {
            c.len()
        } else if classify(first) == Class::Space {
            let run: usize = rest
                .chars()
                .take_while(|c| c.is_whitespace())
                .map(char::len_utf8)
                .sum();
            let last = rest[..run].chars().next_back().unwrap();
            if run == rest.len() {
                run
            } else if run == last.len_utf8() {
                if last == ' ' {
                    1 + class_run(&rest[1..])
                } else {
                    run
                }
            } else {
                run - last.len_utf8()
            }
        } else {
            class_run(rest)
        };
        pos += len;
        Some(&rest[..len])
    })
}

fn class_run(s: &str) -> usize {
    let Some(first) = s.chars().next() else {
        return 0;
    };
    let class = classify(first);
    s.chars()
        .take_while(|&c| classify(c) == class && class != Class::Space)
        .map(char::len_utf8)
        .sum::<usize>()
        .max(first.len_utf8())
}
