use std::collections::HashSet;
use std::sync::Arc;

use crate::corpus::Study;

/// Identifier of the embedded English stop-word list.
pub const STOPLIST_VERSION: &str = "english-318-v1";

const ENGLISH: &str = include_str!("stopwords_en.txt");

#[derive(Debug, Clone, Default)]
pub struct Stoplist {
    words: Arc<HashSet<String>>,
}

impl Stoplist {
    /// The pinned 318-word English list.
    pub fn english() -> Self {
        Self::from_words(ENGLISH.lines().map(str::trim).filter(|w| !w.is_empty()))
    }

    pub fn none() -> Self {
        Stoplist::default()
    }

    pub fn from_words<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Stoplist {
            words: Arc::new(words.into_iter().map(|w| w.as_ref().to_lowercase()).collect()),
        }
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

    /// Words in lexicographic order.
    pub fn sorted(&self) -> Vec<&str> {
        let mut v: Vec<&str> = self.words.iter().map(String::as_str).collect();
        v.sort_unstable();
        v
    }
}

/// Lowercase alphanumeric runs of at least two characters, stop words removed.
pub fn tokenize_text(text: &str, stoplist: &Stoplist) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| t.chars().nth(1).is_some())
        .map(str::to_lowercase)
        .filter(|t| !stoplist.contains(t))
        .collect()
}

/// Tokens of `title + " " + abstract`.
pub fn tokenize(study: &Study, stoplist: &Stoplist) -> Vec<String> {
    let mut text = String::with_capacity(study.title.len() + study.abstract_text.len() + 1);
    text.push_str(&study.title);
    text.push(' ');
    text.push_str(&study.abstract_text);
    tokenize_text(&text, stoplist)
}
