//! Semantics-free anonymization: user identifiers and literals become
//! categorized placeholders (`var_N`, `func_N`, `type_N`, `num_N`, and
//! optionally `str_N`), while keywords, punctuation, layout and MPI function
//! names survive untouched.

use std::collections::{HashMap, HashSet};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::calls::is_mpi_name;
use crate::diag::{DiagKind, Diagnostic};
use crate::error::{Error, Result};
use crate::lexer::{tokenize, Token, TokenKind};

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Var,
    Func,
    Type,
    Num,
    Str,
}

impl Category {
    pub fn prefix(self) -> &'static str {
        match self {
            Category::Var => "var",
            Category::Func => "func",
            Category::Type => "type",
            Category::Num => "num",
            Category::Str => "str",
        }
    }

    fn from_prefix(p: &str) -> Option<Self> {
        Some(match p {
            "var" => Category::Var,
            "func" => Category::Func,
            "type" => Category::Type,
            "num" => Category::Num,
            "str" => Category::Str,
            _ => return None,
        })
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.prefix())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MapEntry {
    pub original: String,
    pub placeholder: String,
    pub category: Category,
}

/// Original token to placeholder, in order of first occurrence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnonymizationMap {
    pub seed: u64,
    pub entries: Vec<MapEntry>,
}

impl AnonymizationMap {
    pub fn placeholder_for(&self, original: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|e| e.original == original)
            .map(|e| e.placeholder.as_str())
    }

    pub fn original_for(&self, placeholder: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|e| e.placeholder == placeholder)
            .map(|e| e.original.as_str())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("map serializes")
    }
}

#[derive(Debug, Clone, Copy)]
pub struct AnonymizeOptions {
    pub seed: u64,
    /// Replace string and character literals with `str_N`.
    pub strings: bool,
}

impl Default for AnonymizeOptions {
    fn default() -> Self {
        AnonymizeOptions {
            seed: DEFAULT_SEED,
            strings: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Anonymized {
    pub code: String,
    pub map: AnonymizationMap,
    pub diagnostics: Vec<Diagnostic>,
}

const KEYWORDS: &[&str] = &[
    // C
    "auto", "break", "case", "char", "const", "continue", "default", "do", "double", "else",
    "enum", "extern", "float", "for", "goto", "if", "inline", "int", "long", "register",
    "restrict", "return", "short", "signed", "sizeof", "static", "struct", "switch", "typedef",
    "union", "unsigned", "void", "volatile", "while", "_Bool", "_Complex", "_Imaginary",
    "_Alignas", "_Alignof", "_Atomic", "_Noreturn", "_Static_assert", "_Thread_local",
    // C++
    "alignas", "alignof", "and", "and_eq", "asm", "bitand", "bitor", "bool", "catch", "char8_t",
    "char16_t", "char32_t", "class", "compl", "concept", "const_cast", "consteval", "constexpr",
    "constinit", "co_await", "co_return", "co_yield", "decltype", "delete", "dynamic_cast",
    "explicit", "export", "false", "final", "friend", "mutable", "namespace", "new", "noexcept",
    "not", "not_eq", "nullptr", "operator", "or", "or_eq", "override", "private", "protected",
    "public", "reinterpret_cast", "requires", "static_assert", "static_cast", "template",
    "this", "thread_local", "throw", "true", "try", "typeid", "typename", "using", "virtual",
    "wchar_t", "xor", "xor_eq",
];

const TAG_KEYWORDS: &[&str] = &["struct", "union", "enum", "class", "typename"];

pub fn is_keyword(ident: &str) -> bool {
    KEYWORDS.contains(&ident)
}

/// Anonymizes with default options and `seed`.
pub fn anonymize(code: &str, seed: u64) -> Anonymized {
    anonymize_with(
        code,
        &AnonymizeOptions {
            seed,
            ..AnonymizeOptions::default()
        },
    )
}

pub fn anonymize_with(code: &str, opts: &AnonymizeOptions) -> Anonymized {
    let lexed = tokenize(code);
    let tokens = &lexed.tokens;
    let sig: Vec<usize> = (0..tokens.len())
        .filter(|&i| !tokens[i].kind.is_trivia())
        .collect();
    let mut diagnostics = Vec::new();

    let roles = identifier_roles(tokens, &sig);
    let preserved_mpi: HashSet<&str> = roles
        .iter()
        .filter(|(name, r)| r.callee && is_mpi_name(name))
        .map(|(name, _)| *name)
        .collect();

    let mut taken: HashSet<String> = HashSet::new();
    for t in tokens {
        match t.kind {
            TokenKind::Identifier => {
                taken.insert(t.text.to_string());
            }
            TokenKind::PreprocessorDirective => {
                for word in t
                    .text
                    .split(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
                    .filter(|w| !w.is_empty())
                {
                    taken.insert(word.to_string());
                }
            }
            _ => {}
        }
    }

    let mut assigner = Assigner {
        seed: opts.seed,
        taken,
        forward: HashMap::new(),
        entries: Vec::new(),
    };
    let mut out = String::with_capacity(code.len() + code.len() / 4);

    for (i, tok) in tokens.iter().enumerate() {
        let category = match tok.kind {
            TokenKind::Identifier => {
                if is_keyword(tok.text) || preserved_mpi.contains(tok.text) {
                    None
                } else {
                    let role = &roles[tok.text];
                    Some(match (role.type_position, role.callee) {
                        (true, true) => {
                            if !role.reported.replace(true) {
                                diagnostics.push(
                                    Diagnostic::new(
                                        DiagKind::CategoryConflict,
                                        format!("`{}` is used both as a type and as a callee; treated as a variable", tok.text),
                                    )
                                    .at_line(tok.line),
                                );
                            }
                            Category::Var
                        }
                        (true, false) => Category::Type,
                        (false, true) => Category::Func,
                        (false, false) => Category::Var,
                    })
                }
            }
            TokenKind::Number => Some(Category::Num),
            // A literal spanning lines would take its line breaks with it.
            TokenKind::StringLiteral | TokenKind::CharLiteral
                if opts.strings && !tok.text.contains('\n') =>
            {
                Some(Category::Str)
            }
            _ => None,
        };

        let Some(category) = category else {
            out.push_str(tok.text);
            continue;
        };
        if category != Category::Var
            && category != Category::Func
            && category != Category::Type
            && glues_to_neighbour(tokens, i)
        {
            // A placeholder here would fuse with the neighbouring token.
            diagnostics.push(
                Diagnostic::new(
                    DiagKind::PlaceholderSkipped,
                    format!("`{}` left as is: no separator from the adjacent token", tok.text),
                )
                .at_line(tok.line),
            );
            out.push_str(tok.text);
            continue;
        }
        out.push_str(assigner.placeholder(tok.text, category));
    }

    Anonymized {
        code: out,
        map: AnonymizationMap {
            seed: opts.seed,
            entries: assigner.entries,
        },
        diagnostics,
    }
}

#[derive(Default)]
struct Role {
    type_position: bool,
    callee: bool,
    reported: std::cell::Cell<bool>,
}

fn identifier_roles<'a>(tokens: &[Token<'a>], sig: &[usize]) -> HashMap<&'a str, Role> {
    let mut roles: HashMap<&'a str, Role> = HashMap::new();
    let is_plain_ident =
        |t: &Token<'_>| t.kind == TokenKind::Identifier && !is_keyword(t.text);
    let mut in_typedef = false;
    let mut typedef_depth = 0i32;
    let mut typedef_last: Option<&'a str> = None;

    for (k, &i) in sig.iter().enumerate() {
        let tok = &tokens[i];
        let prev = k.checked_sub(1).map(|p| &tokens[sig[p]]);
        let next = sig.get(k + 1).map(|&n| &tokens[n]);

        if tok.kind == TokenKind::Identifier && tok.text == "typedef" {
            in_typedef = true;
            typedef_depth = 0;
            typedef_last = None;
            continue;
        }
        if in_typedef {
            match tok.text {
                "{" | "(" | "[" if tok.kind == TokenKind::Punctuation => typedef_depth += 1,
                "}" | ")" | "]" if tok.kind == TokenKind::Punctuation => typedef_depth -= 1,
                ";" if tok.kind == TokenKind::Punctuation && typedef_depth <= 0 => {
                    if let Some(name) = typedef_last.take() {
                        roles.entry(name).or_default().type_position = true;
                    }
                    in_typedef = false;
                }
                _ => {}
            }
            if is_plain_ident(tok) && typedef_depth <= 0 {
                typedef_last = Some(tok.text);
            }
        }

        if !is_plain_ident(tok) {
            continue;
        }
        let role = roles.entry(tok.text).or_default();
        if prev.is_some_and(|p| p.kind == TokenKind::Identifier && TAG_KEYWORDS.contains(&p.text))
            || next.is_some_and(is_plain_ident)
        {
            role.type_position = true;
        }
        if next.is_some_and(|n| n.is_punct("(")) {
            role.callee = true;
        }
    }
    roles
}

fn glues_to_neighbour(tokens: &[Token<'_>], i: usize) -> bool {
    let sticky = |t: &Token<'_>| {
        matches!(
            t.kind,
            TokenKind::Identifier
                | TokenKind::Number
                | TokenKind::StringLiteral
                | TokenKind::CharLiteral
        )
    };
    i.checked_sub(1).is_some_and(|p| sticky(&tokens[p]))
        || tokens.get(i + 1).is_some_and(sticky)
}

struct Assigner {
    seed: u64,
    taken: HashSet<String>,
    forward: HashMap<(Category, String), String>,
    entries: Vec<MapEntry>,
}

impl Assigner {
    fn placeholder(&mut self, original: &str, category: Category) -> &str {
        let key = (category, original.to_string());
        if !self.forward.contains_key(&key) {
            let placeholder = self.draw(original, category);
            self.taken.insert(placeholder.clone());
            self.entries.push(MapEntry {
                original: original.to_string(),
                placeholder: placeholder.clone(),
                category,
            });
            self.forward.insert(key.clone(), placeholder);
        }
        &self.forward[&key]
    }

    /// Suffixes come from a generator keyed by (seed, category, token); on
    /// collision it draws again, widening the range tenfold every 64 misses.
    fn draw(&self, original: &str, category: Category) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.seed.to_le_bytes());
        hasher.update(category.prefix().as_bytes());
        hasher.update([0u8]);
        hasher.update(original.as_bytes());
        let seed: [u8; 32] = hasher.finalize().into();
        let mut rng = ChaCha8Rng::from_seed(seed);
        let mut bound = 1000u64;
        loop {
            for _ in 0..64 {
                let candidate = format!("{}_{}", category.prefix(), rng.gen_range(0..bound));
                if !self.taken.contains(&candidate) {
                    return candidate;
                }
            }
            bound = bound.saturating_mul(10);
        }
    }
}

fn parse_placeholder(ident: &str) -> Option<Category> {
    let (prefix, digits) = ident.split_once('_')?;
    let category = Category::from_prefix(prefix)?;
    (!digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit())).then_some(category)
}

/// Replaces every placeholder in `code` with its original token.
pub fn deanonymize(code: &str, map: &AnonymizationMap) -> Result<String> {
    let reverse: HashMap<&str, &str> = map
        .entries
        .iter()
        .map(|e| (e.placeholder.as_str(), e.original.as_str()))
        .collect();
    let mut out = String::with_capacity(code.len());
    for tok in tokenize(code).tokens {
        if tok.kind == TokenKind::Identifier && parse_placeholder(tok.text).is_some() {
            let original = reverse
                .get(tok.text)
                .ok_or_else(|| Error::UnknownPlaceholder(tok.text.to_string()))?;
            out.push_str(original);
        } else {
            out.push_str(tok.text);
        }
    }
    Ok(out)
}
