/// Text paired with, for every byte, the byte range in the original HTML it
/// came from. Lets gold spans expressed against the raw description be
/// located among cleaned tokens.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MappedText {
    pub text: String,
    pub src: Vec<(usize, usize)>,
}

impl MappedText {
    pub fn new() -> Self {
        Self::default()
    }

    /// Identity mapping for plain text.
    pub fn from_plain(text: &str) -> Self {
        let mut out = Self::new();
        for (i, c) in text.char_indices() {
            out.push(c, (i, i + c.len_utf8()));
        }
        out
    }

    pub fn push(&mut self, c: char, src: (usize, usize)) {
        self.text.push(c);
        for _ in 0..c.len_utf8() {
            self.src.push(src);
        }
    }

    pub fn is_empty(&self) -> bool {
        self.text.is_empty()
    }

    pub fn append(&mut self, other: &MappedText) {
        self.text.push_str(&other.text);
        self.src.extend_from_slice(&other.src);
    }

    /// Collapse whitespace runs into single spaces and trim both ends.
    pub fn normalized(&self) -> MappedText {
        let mut out = MappedText::new();
        let mut pending_space: Option<(usize, usize)> = None;
        for (i, c) in self.text.char_indices() {
            let src = self.src[i];
            if c.is_whitespace() {
                if !out.is_empty() && pending_space.is_none() {
                    pending_space = Some(src);
                }
                continue;
            }
            if let Some(s) = pending_space.take() {
                out.push(' ', s);
            }
            out.push(c, src);
        }
        out
    }

    /// Break a '<' that directly precedes an ASCII letter so no cleaned text
    /// can be mistaken for markup on a second pass.
    pub fn defuse_angle_brackets(&self) -> MappedText {
        let mut out = MappedText::new();
        let mut chars = self.text.char_indices().peekable();
        while let Some((i, c)) = chars.next() {
            out.push(c, self.src[i]);
            if c == '<' {
                if let Some(&(_, next)) = chars.peek() {
                    if next.is_ascii_alphabetic() || next == '/' || next == '!' || next == '?' {
                        out.push(' ', self.src[i]);
                    }
                }
            }
        }
        out
    }

    pub fn split_lines(&self) -> Vec<MappedText> {
        let mut lines = Vec::new();
        let mut cur = MappedText::new();
        for (i, c) in self.text.char_indices() {
            if c == '\n' || c == '\r' {
                lines.push(std::mem::take(&mut cur));
            } else {
                cur.push(c, self.src[i]);
            }
        }
        lines.push(cur);
        lines
    }

    /// Source range covering bytes `start..end` of this text.
    pub fn source_range(&self, start: usize, end: usize) -> Option<(usize, usize)> {
        if start >= end || end > self.src.len() {
            return None;
        }
        Some((self.src[start].0, self.src[end - 1].1))
    }
}
