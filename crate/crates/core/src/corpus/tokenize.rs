use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TokenKind {
    Word,
    Url,
    Number,
    Punct,
    Other,
}

/// A token with half-open byte offsets into its sentence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    pub start: usize,
    pub end: usize,
    pub kind: TokenKind,
}

/// Characters allowed between two alphanumeric runs of a single word,
/// e.g. `127.0.0.1`, `sab01-98cba-1d`, `cs_net`.
const CONNECTORS: &[char] = &['-', '_', '.', '@', '/'];

const TRAILING_URL_PUNCT: &[char] = &['.', ',', ';', ':', '!', '?', ')', ']', '}', '\'', '"', '>'];

pub fn tokenize(sentence: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let chars: Vec<(usize, char)> = sentence.char_indices().collect();
    let byte_at = |ci: usize| chars.get(ci).map_or(sentence.len(), |&(b, _)| b);
    let mut ci = 0;
    while ci < chars.len() {
        let (start, c) = chars[ci];
        if c.is_whitespace() {
            ci += 1;
            continue;
        }
        let word_boundary = ci == 0 || !chars[ci - 1].1.is_alphanumeric();
        if word_boundary {
            if let Some(end_ci) = url_end(sentence, &chars, ci) {
                let end = byte_at(end_ci);
                tokens.push(Token {
                    text: sentence[start..end].to_string(),
                    start,
                    end,
                    kind: TokenKind::Url,
                });
                ci = end_ci;
                continue;
            }
        }
        if c.is_alphanumeric() {
            let mut end_ci = ci;
            while end_ci < chars.len() && chars[end_ci].1.is_alphanumeric() {
                end_ci += 1;
            }
            while end_ci + 1 < chars.len()
                && CONNECTORS.contains(&chars[end_ci].1)
                && chars[end_ci + 1].1.is_alphanumeric()
            {
                end_ci += 1;
                while end_ci < chars.len() && chars[end_ci].1.is_alphanumeric() {
                    end_ci += 1;
                }
            }
            let end = byte_at(end_ci);
            push_word(&mut tokens, sentence, start, end);
            ci = end_ci;
            continue;
        }
        let end = start + c.len_utf8();
        tokens.push(Token {
            text: c.to_string(),
            start,
            end,
            kind: if c.is_ascii_punctuation() {
                TokenKind::Punct
            } else {
                TokenKind::Other
            },
        });
        ci += 1;
    }
    tokens
}

/// Char index one past a URL (or rooted path) starting at `ci`.
fn url_end(sentence: &str, chars: &[(usize, char)], ci: usize) -> Option<usize> {
    let rest = &sentence[chars[ci].0..];
    let lower: String = rest.chars().take(8).collect::<String>().to_ascii_lowercase();
    let is_url = scheme_len(rest).is_some() || lower.starts_with("www.");
    let is_path = rest.starts_with('/') && looks_like_path(rest);
    if !is_url && !is_path {
        return None;
    }
    let mut end = ci;
    while end < chars.len() && !chars[end].1.is_whitespace() {
        end += 1;
    }
    while end > ci + 1 && TRAILING_URL_PUNCT.contains(&chars[end - 1].1) {
        end -= 1;
    }
    Some(end)
}

fn scheme_len(s: &str) -> Option<usize> {
    let mut it = s.char_indices();
    let (_, first) = it.next()?;
    if !first.is_ascii_alphabetic() {
        return None;
    }
    for (i, c) in it {
        if c == ':' {
            return s[i..].starts_with("://").then_some(i);
        }
        if !(c.is_ascii_alphanumeric() || c == '+' || c == '.' || c == '-') {
            return None;
        }
    }
    None
}

fn looks_like_path(s: &str) -> bool {
    let word: &str = s.split(char::is_whitespace).next().unwrap_or("");
    let segments = word.split('/').filter(|seg| !seg.is_empty()).count();
    segments >= 2 && word[1..].starts_with(|c: char| c.is_alphanumeric())
}

fn push_word(tokens: &mut Vec<Token>, sentence: &str, start: usize, end: usize) {
    let word = &sentence[start..end];
    if word.chars().all(char::is_alphabetic) {
        for (a, b) in camel_case_bounds(word) {
            tokens.push(Token {
                text: word[a..b].to_string(),
                start: start + a,
                end: start + b,
                kind: TokenKind::Word,
            });
        }
        return;
    }
    let numeric = word.starts_with(|c: char| c.is_ascii_digit())
        && word.chars().all(|c| c.is_ascii_digit() || c == '.' || c == ',');
    tokens.push(Token {
        text: word.to_string(),
        start,
        end,
        kind: if numeric {
            TokenKind::Number
        } else {
            TokenKind::Word
        },
    });
}

/// Byte ranges of the camel-case pieces of an alphabetic word. Splits at
/// lower→upper transitions; an uppercase run stays whole except for its last
/// letter when that letter starts a capitalised word ("IPAddress" → IP, Address).
pub fn camel_case_bounds(word: &str) -> Vec<(usize, usize)> {
    let chars: Vec<(usize, char)> = word.char_indices().collect();
    let mut bounds = Vec::new();
    let mut piece_start = 0;
    for i in 1..chars.len() {
        let prev = chars[i - 1].1;
        let cur = chars[i].1;
        let next_lower = chars.get(i + 1).is_some_and(|&(_, n)| n.is_lowercase());
        let split = (prev.is_lowercase() && cur.is_uppercase())
            || (prev.is_uppercase() && cur.is_uppercase() && next_lower);
        if split {
            bounds.push((piece_start, chars[i].0));
            piece_start = chars[i].0;
        }
    }
    bounds.push((piece_start, word.len()));
    bounds
}

#[cfg(test)]
mod tests {
    use super::*;

    fn texts(s: &str) -> Vec<String> {
        tokenize(s).into_iter().map(|t| t.text).collect()
    }

    #[test]
    fn camel_case_and_ip() {
        assert_eq!(
            texts("The SourceIPAddress is 127.0.0.1"),
            vec!["The", "Source", "IP", "Address", "is", "127.0.0.1"]
        );
        let toks = tokenize("The SourceIPAddress is 127.0.0.1");
        assert_eq!(toks[5].kind, TokenKind::Number);
    }

    #[test]
    fn colon_is_separate() {
        assert_eq!(texts("Status code: 401"), vec!["Status", "code", ":", "401"]);
    }

    #[test]
    fn urls_stay_whole() {
        let toks = tokenize("see https://supportcenter.cloudx.com/caseoverview?srid=112 now");
        assert_eq!(toks.len(), 3);
        assert_eq!(toks[1].text, "https://supportcenter.cloudx.com/caseoverview?srid=112");
        assert_eq!(toks[1].kind, TokenKind::Url);
        assert_eq!(texts("go to www.example.com."), vec!["go", "to", "www.example.com", "."]);
    }

    #[test]
    fn rooted_paths_are_urls() {
        let p = "/resource/2aa3abc0-7986/resourcegroups/cs-net/providers/network/frontdoor/";
        let toks = tokenize(&format!("Resource Id: {p}"));
        assert_eq!(toks.last().unwrap().text, p);
        assert_eq!(toks.last().unwrap().kind, TokenKind::Url);
        assert_eq!(texts("a / b"), vec!["a", "/", "b"]);
    }

    #[test]
    fn hyphenated_identifiers() {
        assert_eq!(texts("Device sab01-98cba-1d, ok"), vec!["Device", "sab01-98cba-1d", ",", "ok"]);
        assert_eq!(texts("VM-Name"), vec!["VM-Name"]);
        assert_eq!(texts("a - b"), vec!["a", "-", "b"]);
    }

    #[test]
    fn camel_pieces() {
        let split = |w: &str| -> Vec<String> {
            camel_case_bounds(w).into_iter().map(|(a, b)| w[a..b].to_string()).collect()
        };
        assert_eq!(split("VNet"), vec!["V", "Net"]);
        assert_eq!(split("SubscriptionId"), vec!["Subscription", "Id"]);
        assert_eq!(split("HTTP"), vec!["HTTP"]);
        assert_eq!(split("lower"), vec!["lower"]);
    }

    #[test]
    fn offsets_index_sentence() {
        let s = "x  SourceIP:é 10:32";
        for t in tokenize(s) {
            assert_eq!(&s[t.start..t.end], t.text);
        }
        assert_eq!(texts("10:32"), vec!["10", ":", "32"]);
    }
}
