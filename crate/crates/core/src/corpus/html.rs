//! Lenient HTML stripping.
//!
//! Tables with more than two columns are discarded outright. Narrower
//! tables are kept both as structure ([`ExtractedTable`]) and as text, one
//! sentence per row. Every other tag is dropped with its text retained, and
//! block-level boundaries become line breaks.

use serde::{Deserialize, Serialize};

use super::mapped::MappedText;
use super::segment::segment_mapped;

const BLOCK_TAGS: &[&str] = &[
    "p", "br", "div", "li", "tr", "ul", "ol", "h1", "h2", "h3", "h4", "h5", "h6", "pre", "hr",
    "blockquote", "section", "article", "header", "footer", "dl", "dt", "dd", "table", "caption",
];

const RAW_TEXT_TAGS: &[&str] = &["script", "style"];

/// A table of at most two columns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractedTable {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
    /// Sentence index of the header row, when it produced any text.
    #[serde(default)]
    pub header_sentence: Option<usize>,
    /// Sentence index of each data row (None for rows without text).
    #[serde(default)]
    pub row_sentences: Vec<Option<usize>>,
    /// Byte range of every data cell inside its row sentence.
    #[serde(default)]
    pub cell_spans: Vec<Vec<Option<(usize, usize)>>>,
}

/// Stripped description: sentences in document order plus kept tables.
#[derive(Debug, Clone, Default)]
pub struct Stripped {
    pub sentences: Vec<MappedText>,
    pub tables: Vec<ExtractedTable>,
}

impl Stripped {
    pub fn sentence_texts(&self) -> Vec<String> {
        self.sentences.iter().map(|s| s.text.clone()).collect()
    }
}

#[derive(Default)]
struct Cell {
    text: MappedText,
    header: bool,
}

#[derive(Default)]
struct TableBuilder {
    rows: Vec<Vec<Cell>>,
    row_open: bool,
    cell_open: bool,
    /// Nesting depth of tables inside this one; inner tables are flattened.
    inner_depth: usize,
}

impl TableBuilder {
    fn ensure_row(&mut self) {
        if !self.row_open {
            self.rows.push(Vec::new());
            self.row_open = true;
        }
    }

    fn open_cell(&mut self, header: bool) {
        self.ensure_row();
        self.rows.last_mut().unwrap().push(Cell {
            text: MappedText::new(),
            header,
        });
        self.cell_open = true;
    }

    fn push_text(&mut self, c: char, src: (usize, usize)) {
        if !self.cell_open {
            if c.is_whitespace() {
                return;
            }
            self.open_cell(false);
        }
        self.rows
            .last_mut()
            .and_then(|r| r.last_mut())
            .unwrap()
            .text
            .push(c, src);
    }
}

enum Block {
    Text(MappedText),
    Table(TableBuilder),
}

struct Stripper<'a> {
    html: &'a str,
    blocks: Vec<Block>,
    text: MappedText,
    table: Option<TableBuilder>,
}

impl<'a> Stripper<'a> {
    fn push_char(&mut self, c: char, src: (usize, usize)) {
        match self.table.as_mut() {
            Some(t) => t.push_text(c, src),
            None => self.text.push(c, src),
        }
    }

    fn flush_text(&mut self) {
        if !self.text.is_empty() {
            self.blocks.push(Block::Text(std::mem::take(&mut self.text)));
        }
    }

    fn finish_table(&mut self) {
        if let Some(t) = self.table.take() {
            self.blocks.push(Block::Table(t));
        }
    }

    fn handle_tag(&mut self, name: &str, closing: bool, at: usize) {
        let boundary = (at, at);
        if let Some(t) = self.table.as_mut() {
            if t.inner_depth > 0 {
                match (name, closing) {
                    ("table", false) => t.inner_depth += 1,
                    ("table", true) => t.inner_depth -= 1,
                    _ if BLOCK_TAGS.contains(&name) => t.push_text(' ', boundary),
                    _ => {}
                }
                return;
            }
            match (name, closing) {
                ("table", false) => {
                    t.inner_depth += 1;
                    t.push_text(' ', boundary);
                }
                ("table", true) => self.finish_table(),
                ("tr", false) => {
                    t.row_open = false;
                    t.cell_open = false;
                    t.ensure_row();
                }
                ("tr", true) => {
                    t.row_open = false;
                    t.cell_open = false;
                }
                ("td", false) => t.open_cell(false),
                ("th", false) => t.open_cell(true),
                ("td", true) | ("th", true) => t.cell_open = false,
                ("thead", _) | ("tbody", _) | ("tfoot", _) => {}
                _ if BLOCK_TAGS.contains(&name) => t.push_text(' ', boundary),
                _ => {}
            }
            return;
        }
        if name == "table" && !closing {
            self.flush_text();
            self.table = Some(TableBuilder::default());
            return;
        }
        if BLOCK_TAGS.contains(&name) {
            self.text.push('\n', boundary);
        }
    }

    fn run(mut self) -> Vec<Block> {
        let html = self.html;
        let bytes = html.as_bytes();
        let mut i = 0;
        while i < bytes.len() {
            let rest = &html[i..];
            if rest.starts_with("<!--") {
                i = match rest[4..].find("-->") {
                    Some(p) => i + 4 + p + 3,
                    None => bytes.len(),
                };
                continue;
            }
            if bytes[i] == b'<' {
                let next = bytes.get(i + 1).copied().unwrap_or(b' ');
                let after = bytes.get(i + 2).copied().unwrap_or(b' ');
                let is_tag = next.is_ascii_alphabetic()
                    || next == b'!'
                    || next == b'?'
                    || (next == b'/' && after.is_ascii_alphabetic());
                if is_tag {
                    let Some(end) = find_tag_end(bytes, i + 1) else {
                        // unterminated tag runs to end of input
                        break;
                    };
                    let inner = &html[i + 1..end];
                    let (closing, name) = tag_name(inner);
                    i = end + 1;
                    if !closing && RAW_TEXT_TAGS.contains(&name.as_str()) {
                        let close = format!("</{name}");
                        i = match find_ci(&html[i..], &close) {
                            Some(p) => match find_tag_end(bytes, i + p + 1) {
                                Some(e) => e + 1,
                                None => bytes.len(),
                            },
                            None => bytes.len(),
                        };
                        continue;
                    }
                    if !name.is_empty() {
                        self.handle_tag(&name, closing, i);
                    }
                    continue;
                }
            }
            if bytes[i] == b'&' {
                if let Some((c, len)) = decode_entity(rest) {
                    self.push_char(c, (i, i + len));
                    i += len;
                    continue;
                }
            }
            let c = rest.chars().next().unwrap();
            self.push_char(c, (i, i + c.len_utf8()));
            i += c.len_utf8();
        }
        self.finish_table();
        self.flush_text();
        self.blocks
    }
}

fn find_tag_end(bytes: &[u8], mut i: usize) -> Option<usize> {
    let mut quote: Option<u8> = None;
    while i < bytes.len() {
        let b = bytes[i];
        match quote {
            Some(q) if b == q => quote = None,
            Some(_) => {}
            None if b == b'"' || b == b'\'' => quote = Some(b),
            None if b == b'>' => return Some(i),
            None => {}
        }
        i += 1;
    }
    None
}

fn tag_name(inner: &str) -> (bool, String) {
    let (closing, body) = match inner.strip_prefix('/') {
        Some(b) => (true, b),
        None => (false, inner),
    };
    let name: String = body
        .chars()
        .take_while(|c| c.is_ascii_alphanumeric())
        .map(|c| c.to_ascii_lowercase())
        .collect();
    (closing, name)
}

fn find_ci(haystack: &str, needle: &str) -> Option<usize> {
    haystack
        .to_ascii_lowercase()
        .find(&needle.to_ascii_lowercase())
}

fn decode_entity(s: &str) -> Option<(char, usize)> {
    let semi = s[..s.len().min(12)].find(';')?;
    let body = &s[1..semi];
    let c = if let Some(num) = body.strip_prefix('#') {
        let code = match num.strip_prefix(['x', 'X']) {
            Some(hex) => u32::from_str_radix(hex, 16).ok()?,
            None => num.parse::<u32>().ok()?,
        };
        char::from_u32(code)?
    } else {
        match body {
            "amp" => '&',
            "lt" => '<',
            "gt" => '>',
            "quot" => '"',
            "apos" => '\'',
            "nbsp" => ' ',
            _ => return None,
        }
    };
    Some((c, semi + 1))
}

fn table_lines(t: TableBuilder) -> Option<(ExtractedTable, Vec<MappedText>, Vec<Vec<Option<(usize, usize)>>>)> {
    let rows: Vec<Vec<Cell>> = t.rows.into_iter().filter(|r| !r.is_empty()).collect();
    let ncols = rows.iter().map(Vec::len).max().unwrap_or(0);
    if ncols == 0 || ncols > 2 {
        return None;
    }
    let header_idx = rows
        .iter()
        .position(|r| r.iter().any(|c| c.header))
        .unwrap_or(0);

    // Each row becomes one line of its non-empty cells joined by a space.
    let mut lines = Vec::with_capacity(rows.len());
    let mut spans = Vec::with_capacity(rows.len());
    let mut texts = Vec::with_capacity(rows.len());
    for row in &rows {
        let mut line = MappedText::new();
        let mut row_spans = Vec::with_capacity(ncols);
        let mut row_texts = Vec::with_capacity(ncols);
        for col in 0..ncols {
            let cell = row
                .get(col)
                .map(|c| c.text.normalized().defuse_angle_brackets())
                .unwrap_or_default();
            if cell.is_empty() {
                row_spans.push(None);
                row_texts.push(String::new());
                continue;
            }
            if !line.is_empty() {
                let sep = *cell.src.first().unwrap();
                line.push(' ', (sep.0, sep.0));
            }
            let start = line.text.len();
            line.append(&cell);
            row_spans.push(Some((start, line.text.len())));
            row_texts.push(cell.text.clone());
        }
        lines.push(line);
        spans.push(row_spans);
        texts.push(row_texts);
    }

    let headers = texts[header_idx].clone();
    let data_rows: Vec<Vec<String>> = texts
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != header_idx)
        .map(|(_, r)| r.clone())
        .collect();
    let table = ExtractedTable {
        headers,
        rows: data_rows,
        header_sentence: None,
        row_sentences: Vec::new(),
        cell_spans: Vec::new(),
    };
    // header line first, then data lines, in document order otherwise
    let mut ordered_lines = Vec::with_capacity(lines.len());
    let mut ordered_spans = Vec::with_capacity(lines.len());
    ordered_lines.push(lines[header_idx].clone());
    ordered_spans.push(spans[header_idx].clone());
    for (i, (l, s)) in lines.into_iter().zip(spans).enumerate() {
        if i != header_idx {
            ordered_lines.push(l);
            ordered_spans.push(s);
        }
    }
    Some((table, ordered_lines, ordered_spans))
}

/// Strip markup from an incident description.
pub fn strip_html(html: &str) -> Stripped {
    let blocks = Stripper {
        html,
        blocks: Vec::new(),
        text: MappedText::new(),
        table: None,
    }
    .run();

    let mut out = Stripped::default();
    for block in blocks {
        match block {
            Block::Text(text) => {
                for s in segment_mapped(&text) {
                    out.sentences.push(s.defuse_angle_brackets());
                }
            }
            Block::Table(builder) => {
                let Some((mut table, lines, spans)) = table_lines(builder) else {
                    continue;
                };
                let mut sentence_of = Vec::with_capacity(lines.len());
                for line in lines {
                    if line.is_empty() {
                        sentence_of.push(None);
                    } else {
                        sentence_of.push(Some(out.sentences.len()));
                        out.sentences.push(line);
                    }
                }
                table.header_sentence = sentence_of[0];
                table.row_sentences = sentence_of[1..].to_vec();
                table.cell_spans = spans[1..].to_vec();
                out.tables.push(table);
            }
        }
    }
    out
}
