use super::mapped::MappedText;

/// Split on newlines, collapse internal whitespace, drop empty lines.
pub fn segment_sentences(text: &str) -> Vec<String> {
    segment_mapped(&MappedText::from_plain(text))
        .into_iter()
        .map(|m| m.text)
        .collect()
}

pub(crate) fn segment_mapped(text: &MappedText) -> Vec<MappedText> {
    text.split_lines()
        .iter()
        .map(MappedText::normalized)
        .filter(|l| !l.is_empty())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn drops_empty_and_trims() {
        assert_eq!(segment_sentences("a\n\nb "), vec!["a", "b"]);
    }

    #[test]
    fn collapses_whitespace() {
        assert_eq!(segment_sentences("x   y"), vec!["x y"]);
        assert_eq!(segment_sentences("\t x \t y\r\nz"), vec!["x y", "z"]);
    }

    #[test]
    fn empty_input() {
        assert!(segment_sentences("").is_empty());
        assert!(segment_sentences(" \n \n").is_empty());
    }
}
