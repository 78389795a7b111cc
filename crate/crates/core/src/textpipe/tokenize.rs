use std::collections::HashSet;

const ENGLISH_STOPWORDS: &str = include_str!("../../data/stopwords_en.txt");

/// Tokens shorter than this are discarded.
pub const MIN_TOKEN_LEN: usize = 2;

/// Splits text into lowercase runs of ASCII letters, dropping stopwords and
/// tokens shorter than [`MIN_TOKEN_LEN`].
pub fn tokenize(raw_text: &str, stopwords: &HashSet<String>) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    let mut flush = |current: &mut String| {
        if current.len() >= MIN_TOKEN_LEN && !stopwords.contains(current.as_str()) {
            tokens.push(std::mem::take(current));
        } else {
            current.clear();
        }
    };
    for ch in raw_text.chars().flat_map(char::to_lowercase) {
        if ch.is_ascii_lowercase() {
            current.push(ch);
        } else if !current.is_empty() {
            flush(&mut current);
        }
    }
    if !current.is_empty() {
        flush(&mut current);
    }
    tokens
}

/// Tokenizer bound to a stopword list.
#[derive(Debug, Clone)]
pub struct Tokenizer {
    stopwords: HashSet<String>,
}

impl Tokenizer {
    /// Tokenizer using the built-in English stopword list.
    pub fn english() -> Self {
        Self::with_stopwords(ENGLISH_STOPWORDS.lines().map(str::trim).filter(|w| !w.is_empty()))
    }

    pub fn with_stopwords<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            stopwords: words.into_iter().map(Into::into).collect(),
        }
    }

    pub fn stopwords(&self) -> &HashSet<String> {
        &self.stopwords
    }

    pub fn tokenize(&self, raw_text: &str) -> Vec<String> {
        tokenize(raw_text, &self.stopwords)
    }
}

impl Default for Tokenizer {
    fn default() -> Self {
        Self::english()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn stop(words: &[&str]) -> HashSet<String> {
        words.iter().map(|w| w.to_string()).collect()
    }

    #[test]
    fn splits_on_non_alphabetic_runs() {
        assert_eq!(
            tokenize("The cat's 2nd cat", &stop(&["the"])),
            vec!["cat", "nd", "cat"]
        );
    }

    #[test]
    fn empty_and_all_stopwords() {
        assert!(tokenize("", &stop(&[])).is_empty());
        assert!(tokenize("is the", &stop(&["is", "the"])).is_empty());
    }

    #[test]
    fn non_ascii_letters_split_tokens() {
        assert_eq!(tokenize("café-au_lait", &stop(&[])), vec!["caf", "au", "lait"]);
    }

    #[test]
    fn english_list_has_common_words() {
        let t = Tokenizer::english();
        assert!(t.stopwords().contains("the"));
        assert!(t.stopwords().contains("is"));
        assert_eq!(t.tokenize("The engine IS running"), vec!["engine", "running"]);
    }

    proptest! {
        #[test]
        fn idempotent_on_own_output(text in "\\PC{0,200}") {
            let t = Tokenizer::english();
            let once = t.tokenize(&text);
            let twice = t.tokenize(&once.join(" "));
            prop_assert_eq!(&once, &twice);
            for tok in &once {
                prop_assert!(tok.len() >= MIN_TOKEN_LEN);
                prop_assert!(tok.bytes().all(|b| b.is_ascii_lowercase()));
                prop_assert!(!t.stopwords().contains(tok));
            }
        }
    }
}
