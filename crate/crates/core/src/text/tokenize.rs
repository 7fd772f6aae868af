use std::collections::HashSet;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

const SMART_STOPLIST: &str = include_str!("../../stoplists/smart.txt");

/// Lowercased alphabetic runs of at least two characters. Everything that is
/// not alphabetic (punctuation, digits, whitespace) separates tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphabetic())
        .filter(|t| t.chars().count() >= 2)
        .map(str::to_lowercase)
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Stoplist {
    words: HashSet<String>,
}

impl Stoplist {
    /// The 570-term SMART English stoplist.
    pub fn smart() -> Self {
        Self::parse(SMART_STOPLIST)
    }

    pub fn empty() -> Self {
        Self::default()
    }

    /// One term per line; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Self {
        Stoplist {
            words: text
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(str::to_lowercase)
                .collect(),
        }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read stoplist {}: {e}", path.display())))?;
        Ok(Self::parse(&text))
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// Order-preserving removal of stopwords.
pub fn remove_stopwords(tokens: Vec<String>, stoplist: &Stoplist) -> Vec<String> {
    tokens
        .into_iter()
        .filter(|t| !stoplist.contains(t))
        .collect()
}

/// What to keep of a newsgroup-style header block (the `Key: value` lines
/// before the first blank line).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HeaderMode {
    Keep,
    Drop,
    /// Drop the header but keep the text of the `Subject:` line.
    #[default]
    SubjectOnly,
}

impl std::str::FromStr for HeaderMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "keep" => Ok(HeaderMode::Keep),
            "drop" => Ok(HeaderMode::Drop),
            "subject" => Ok(HeaderMode::SubjectOnly),
            other => Err(Error::usage(format!(
                "unknown header mode '{other}' (keep|drop|subject)"
            ))),
        }
    }
}

fn looks_like_header(line: &str) -> bool {
    match line.split_once(':') {
        Some((key, _)) => {
            !key.is_empty() && key.chars().all(|c| c.is_ascii_alphanumeric() || c == '-')
        }
        None => false,
    }
}

/// Applies `mode` to a leading header block. Text without a header block is
/// returned unchanged.
pub fn strip_headers(text: &str, mode: HeaderMode) -> String {
    if mode == HeaderMode::Keep {
        return text.to_string();
    }
    if !text.lines().next().is_some_and(looks_like_header) {
        return text.to_string();
    }
    let mut lines = text.lines();
    let mut subject = None;
    let mut in_header = true;
    let mut body = Vec::new();
    for line in lines.by_ref() {
        if in_header {
            if line.trim().is_empty() {
                in_header = false;
                continue;
            }
            if let Some((key, value)) = line.split_once(':') {
                if key.eq_ignore_ascii_case("subject") {
                    subject = Some(value.trim().to_string());
                }
            }
            continue;
        }
        body.push(line);
    }
    let mut out = String::new();
    if mode == HeaderMode::SubjectOnly {
        if let Some(s) = subject {
            out.push_str(&s);
            out.push('\n');
        }
    }
    out.push_str(&body.join("\n"));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenizer_rules() {
        assert_eq!(tokenize("God exists?"), vec!["god", "exists"]);
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("a I ok"), vec!["ok"]);
        assert_eq!(
            tokenize("x86 won't--stop_3times"),
            vec!["won", "stop", "times"]
        );
        assert_eq!(tokenize("Ünïcode Straße"), vec!["ünïcode", "straße"]);
    }

    #[test]
    fn stopword_removal() {
        let mut s = Stoplist::empty();
        let toks = vec!["the".to_string(), "god".to_string()];
        assert_eq!(remove_stopwords(toks.clone(), &s), toks);
        s = Stoplist::parse("the\n");
        assert_eq!(remove_stopwords(toks, &s), vec!["god"]);
        let all = vec!["the".to_string(), "the".to_string()];
        assert!(remove_stopwords(all, &s).is_empty());
    }

    #[test]
    fn smart_list_loaded() {
        let s = Stoplist::smart();
        assert_eq!(s.len(), 570);
        for w in ["the", "about", "yourselves", "zero", "would"] {
            assert!(s.contains(w), "{w}");
        }
        assert!(!s.contains("god"));
    }

    #[test]
    fn missing_stoplist_is_config_error() {
        let e = Stoplist::from_file(Path::new("/definitely/not/here.txt")).unwrap_err();
        assert!(matches!(e, Error::Config(_)));
    }

    #[test]
    fn header_handling() {
        let post = "From: someone@example.com\nSubject: Re: faith and reason\nLines: 3\n\nBody text here.\nMore.";
        assert_eq!(
            strip_headers(post, HeaderMode::Drop),
            "Body text here.\nMore."
        );
        assert_eq!(
            strip_headers(post, HeaderMode::SubjectOnly),
            "Re: faith and reason\nBody text here.\nMore."
        );
        assert_eq!(strip_headers(post, HeaderMode::Keep), post);
        let plain = "Just a body: with a colon later.\n\nAnd more.";
        assert_eq!(strip_headers(plain, HeaderMode::Drop), plain);
    }
}
