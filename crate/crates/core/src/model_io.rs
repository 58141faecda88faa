//! Plain-text model files.
//!
//! Fields are separated by a tab. Unigram:
//!
//! ```text
//! #subreg unigram 1
//! <unk> nan
//! <s> nan
//! </s> nan
//! <piece> <log_prob>
//! ```
//!
//! Log-probabilities are written with 17 significant digits, which is enough
//! to read back the same `f64`.
//!
//! BPE:
//!
//! ```text
//! #subreg bpe 1
//! <char>
//! <left> <right>
//! ```
//!
//! Alphabet lines hold a single character and no tab; they come first, in
//! codepoint order, and fix the ids. Merge lines follow in merge order.
//!
//! In pieces, `\`, tab, newline and carriage return are escaped as `\\`,
//! `\t`, `\n` and `\r`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::bpe::BpeModel;
use crate::error::{Error, Result};
use crate::unigram::UnigramModel;
use crate::vocab::{PieceId, Vocabulary, RESERVED_PIECES};

const MAGIC: &str = "#subreg";
const VERSION: &str = "1";

/// Either kind of trained model.
#[derive(Debug, Clone)]
pub enum Model {
    Unigram(UnigramModel),
    Bpe(BpeModel),
}

impl Model {
    pub fn kind(&self) -> &'static str {
        match self {
            Model::Unigram(_) => "unigram",
            Model::Bpe(_) => "bpe",
        }
    }

    pub fn encode_pieces(&self, raw: &str) -> Result<Vec<String>> {
        match self {
            Model::Unigram(m) => m.encode_pieces(raw),
            Model::Bpe(m) => m.encode(raw),
        }
    }

    pub fn encode_ids(&self, raw: &str) -> Result<Vec<PieceId>> {
        match self {
            Model::Unigram(m) => m.encode_ids(raw),
            Model::Bpe(m) => m.encode_ids(raw),
        }
    }

    pub fn decode(&self, ids: &[PieceId]) -> Result<String> {
        match self {
            Model::Unigram(m) => m.decode(ids),
            Model::Bpe(m) => m.decode(ids),
        }
    }

    pub fn id_of(&self, piece: &str) -> Option<PieceId> {
        match self {
            Model::Unigram(m) => m.vocab().id_of(piece),
            Model::Bpe(m) => m.id_of(piece),
        }
    }

    pub fn write_to<W: Write>(&self, out: W) -> Result<()> {
        match self {
            Model::Unigram(m) => write_unigram(m, out),
            Model::Bpe(m) => write_bpe(m, out),
        }
    }

    /// Reads either kind, going by the header.
    pub fn read_from<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = next_line(&mut lines)?.ok_or_else(|| Error::UnsupportedFormat("empty model file".into()))?;
        match parse_header(&header)? {
            "unigram" => read_unigram_body(lines).map(Model::Unigram),
            "bpe" => read_bpe_body(lines).map(Model::Bpe),
            other => Err(Error::UnsupportedFormat(format!("unknown model type {other:?}"))),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        self.write_to(&mut out)?;
        out.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(BufReader::new(File::open(path)?))
    }
}

impl From<UnigramModel> for Model {
    fn from(m: UnigramModel) -> Self {
        Model::Unigram(m)
    }
}

impl From<BpeModel> for Model {
    fn from(m: BpeModel) -> Self {
        Model::Bpe(m)
    }
}

pub fn escape(piece: &str) -> String {
    let mut out = String::with_capacity(piece.len());
    for c in piece.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

pub fn unescape(field: &str) -> Option<String> {
    let mut out = String::with_capacity(field.len());
    let mut chars = field.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        out.push(match chars.next()? {
            '\\' => '\\',
            't' => '\t',
            'n' => '\n',
            'r' => '\r',
            _ => return None,
        });
    }
    Some(out)
}

/// 17 significant digits, enough to read back the same `f64`.
fn format_log_prob(lp: f64) -> String {
    format!("{lp:.16e}")
}

pub fn write_unigram<W: Write>(model: &UnigramModel, mut out: W) -> Result<()> {
    writeln!(out, "{MAGIC} unigram {VERSION}")?;
    for name in RESERVED_PIECES {
        writeln!(out, "{name}\tnan")?;
    }
    for (id, piece, lp) in model.vocab().iter() {
        if Vocabulary::is_reserved(id) {
            continue;
        }
        writeln!(out, "{}\t{}", escape(piece), format_log_prob(lp))?;
    }
    Ok(())
}

pub fn write_bpe<W: Write>(model: &BpeModel, mut out: W) -> Result<()> {
    writeln!(out, "{MAGIC} bpe {VERSION}")?;
    for &c in model.alphabet() {
        writeln!(out, "{}", escape(&c.to_string()))?;
    }
    for (left, right) in model.merges() {
        writeln!(out, "{}\t{}", escape(left), escape(right))?;
    }
    Ok(())
}

pub fn read_unigram<R: BufRead>(input: R) -> Result<UnigramModel> {
    let mut lines = input.lines();
    expect_header(&mut lines, "unigram")?;
    read_unigram_body(lines)
}

pub fn read_bpe<R: BufRead>(input: R) -> Result<BpeModel> {
    let mut lines = input.lines();
    expect_header(&mut lines, "bpe")?;
    read_bpe_body(lines)
}

impl UnigramModel {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        write_unigram(self, &mut out)?;
        out.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        read_unigram(BufReader::new(File::open(path)?))
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        write_unigram(self, &mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("model text is UTF-8")
    }
}

impl BpeModel {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        write_bpe(self, &mut out)?;
        out.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        read_bpe(BufReader::new(File::open(path)?))
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        write_bpe(self, &mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("model text is UTF-8")
    }
}

type Lines<R> = std::io::Lines<R>;

fn next_line<R: BufRead>(lines: &mut Lines<R>) -> Result<Option<String>> {
    lines.next().transpose().map_err(|e| match e.kind() {
        std::io::ErrorKind::InvalidData => Error::CorruptModel {
            line: 0,
            reason: "file is not valid UTF-8".into(),
        },
        _ => Error::Io(e),
    })
}

fn parse_header(header: &str) -> Result<&str> {
    let header = header.strip_prefix('\u{feff}').unwrap_or(header);
    let mut parts = header.split(' ');
    match (parts.next(), parts.next(), parts.next(), parts.next()) {
        (Some(MAGIC), Some(kind), Some(VERSION), None) => Ok(kind),
        (Some(MAGIC), Some(_), Some(v), None) => {
            Err(Error::UnsupportedFormat(format!("unsupported version {v:?}")))
        }
        _ => Err(Error::UnsupportedFormat(format!("unrecognized header {header:?}"))),
    }
}

fn expect_header<R: BufRead>(lines: &mut Lines<R>, kind: &str) -> Result<()> {
    let header = next_line(lines)?.ok_or_else(|| Error::UnsupportedFormat("empty model file".into()))?;
    let found = parse_header(&header)?;
    if found != kind {
        return Err(Error::UnsupportedFormat(format!("expected a {kind} model, found {found}")));
    }
    Ok(())
}

fn corrupt(line: usize, reason: impl Into<String>) -> Error {
    Error::CorruptModel {
        line,
        reason: reason.into(),
    }
}

fn field(raw: &str, line: usize) -> Result<String> {
    let s = unescape(raw).ok_or_else(|| corrupt(line, format!("bad escape in {raw:?}")))?;
    if s.is_empty() {
        return Err(corrupt(line, "empty piece"));
    }
    Ok(s)
}

fn read_unigram_body<R: BufRead>(mut lines: Lines<R>) -> Result<UnigramModel> {
    let mut line_no = 1;
    for name in RESERVED_PIECES {
        line_no += 1;
        let line = next_line(&mut lines)?.ok_or_else(|| corrupt(line_no, format!("missing reserved piece {name}")))?;
        if line != format!("{name}\tnan") {
            return Err(corrupt(line_no, format!("expected reserved piece {name}, found {line:?}")));
        }
    }
    let mut pieces = Vec::new();
    let mut seen = std::collections::HashSet::new();
    while let Some(line) = next_line(&mut lines)? {
        line_no += 1;
        let (piece, lp) = line
            .split_once('\t')
            .ok_or_else(|| corrupt(line_no, "expected <piece>\\t<log_prob>"))?;
        let piece = field(piece, line_no)?;
        let lp: f64 = lp
            .parse()
            .map_err(|_| corrupt(line_no, format!("bad log-probability {lp:?}")))?;
        if !lp.is_finite() {
            return Err(corrupt(line_no, format!("non-finite log-probability for {piece:?}")));
        }
        if RESERVED_PIECES.contains(&piece.as_str()) || !seen.insert(piece.clone()) {
            return Err(corrupt(line_no, format!("duplicate piece {piece:?}")));
        }
        pieces.push((piece, lp));
    }
    if pieces.is_empty() {
        return Err(corrupt(line_no, "no pieces"));
    }
    let vocab = Vocabulary::new(pieces).map_err(|e| corrupt(line_no, e.to_string()))?;
    Ok(UnigramModel::new(vocab))
}

fn read_bpe_body<R: BufRead>(mut lines: Lines<R>) -> Result<BpeModel> {
    let mut line_no = 1;
    let mut alphabet: Vec<char> = Vec::new();
    let mut merges = Vec::new();
    while let Some(line) = next_line(&mut lines)? {
        line_no += 1;
        match line.split_once('\t') {
            None => {
                if !merges.is_empty() {
                    return Err(corrupt(line_no, "alphabet entry after merges"));
                }
                let s = field(&line, line_no)?;
                let mut chars = s.chars();
                let c = chars.next().expect("non-empty");
                if chars.next().is_some() {
                    return Err(corrupt(line_no, format!("alphabet entry {s:?} is not one character")));
                }
                if alphabet.last().is_some_and(|&last| last >= c) {
                    return Err(corrupt(line_no, format!("alphabet entry {s:?} is duplicated or out of order")));
                }
                alphabet.push(c);
            }
            Some((left, right)) => {
                merges.push((field(left, line_no)?, field(right, line_no)?));
            }
        }
    }
    BpeModel::new(alphabet, merges).map_err(|e| corrupt(line_no, e.to_string()))
}
