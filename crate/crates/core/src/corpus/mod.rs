//! Chat logs, reply annotations and the canonical JSON-lines format.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub mod stats;
pub mod vocab;

pub use stats::{corpus_stats, CorpusStats};
pub use vocab::Vocabulary;

/// Speaker field of channel notices such as joins and quits.
pub const SYSTEM: &str = "===";

/// Characters that may appear inside an IRC nick and are therefore never
/// peeled off a word by the tokenizer.
const NICK_PUNCT: &[char] = &['_', '-', '[', ']', '\\', '`', '^', '{', '}', '|'];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Timestamp {
    pub hour: u8,
    pub minute: u8,
}

impl Timestamp {
    pub fn new(hour: u8, minute: u8) -> Result<Self> {
        if hour > 23 || minute > 59 {
            return Err(Error::Contract(format!(
                "timestamp {hour:02}:{minute:02} out of range"
            )));
        }
        Ok(Timestamp { hour, minute })
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:02}:{:02}", self.hour, self.minute)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Utterance {
    pub index: usize,
    pub time: Timestamp,
    /// Nick as written in the log, or [`SYSTEM`].
    pub speaker: String,
    pub tokens: Vec<String>,
    pub raw_text: String,
    pub is_system: bool,
}

impl Utterance {
    pub fn new(index: usize, time: Timestamp, speaker: &str, raw_text: &str, is_system: bool) -> Self {
        Utterance {
            index,
            time,
            speaker: speaker.to_string(),
            tokens: tokenize(raw_text),
            raw_text: raw_text.to_string(),
            is_system,
        }
    }

    pub fn from_line(index: usize, line: LogLine) -> Self {
        Utterance::new(index, line.time, &line.speaker, &line.text, line.is_system)
    }
}

/// The fields of one log line before it is given a stream position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogLine {
    pub time: Timestamp,
    pub speaker: String,
    pub text: String,
    pub is_system: bool,
}

/// Parses `[HH:MM] <nick> text`, `[HH:MM] * nick text` or `[HH:MM] === text`.
///
/// Returns `Ok(None)` for blank lines. `line_no` is only used in errors.
pub fn parse_log_line(line: &str, line_no: usize) -> Result<Option<LogLine>> {
    let err = |message: &str| Error::Parse {
        line: line_no,
        message: message.to_string(),
    };
    let line = line.trim_start().trim_end_matches(['\r', '\n']);
    if line.trim().is_empty() {
        return Ok(None);
    }
    let rest = line
        .strip_prefix('[')
        .ok_or_else(|| err("expected `[HH:MM]` timestamp"))?;
    let (stamp, rest) = rest
        .split_once(']')
        .ok_or_else(|| err("unterminated timestamp"))?;
    let time = parse_stamp(stamp).ok_or_else(|| err(&format!("malformed timestamp `[{stamp}]`")))?;
    let rest = rest.trim_start();

    if let Some(text) = rest.strip_prefix(SYSTEM) {
        return Ok(Some(LogLine {
            time,
            speaker: SYSTEM.to_string(),
            text: text.strip_prefix(' ').unwrap_or(text).to_string(),
            is_system: true,
        }));
    }
    let (speaker, text) = if let Some(body) = rest.strip_prefix('<') {
        body.split_once('>')
            .ok_or_else(|| err("unterminated `<speaker>` field"))?
    } else if let Some(body) = rest.strip_prefix("* ") {
        body.split_once(' ').unwrap_or((body, ""))
    } else {
        return Err(err("missing `<speaker>` field"));
    };
    if speaker.is_empty() || speaker.contains(char::is_whitespace) {
        return Err(err("empty or malformed speaker"));
    }
    Ok(Some(LogLine {
        time,
        speaker: speaker.to_string(),
        text: text.strip_prefix(' ').unwrap_or(text).to_string(),
        is_system: false,
    }))
}

fn parse_stamp(s: &str) -> Option<Timestamp> {
    let (h, m) = s.split_once(':')?;
    let ok = |p: &str| (1..=2).contains(&p.len()) && p.bytes().all(|b| b.is_ascii_digit());
    if !ok(h) || !ok(m) {
        return None;
    }
    Timestamp::new(h.parse().ok()?, m.parse().ok()?).ok()
}

/// Parses a whole log. Blank lines are skipped and do not consume an index.
pub fn parse_log(text: &str) -> Result<Vec<Utterance>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if let Some(parsed) = parse_log_line(line, n + 1)? {
            out.push(Utterance::from_line(out.len(), parsed));
        }
    }
    Ok(out)
}

/// Renders an utterance back into log syntax.
pub fn format_log_line(u: &Utterance) -> String {
    if u.is_system {
        format!("[{}] {} {}", u.time, SYSTEM, u.raw_text)
    } else {
        format!("[{}] <{}> {}", u.time, u.speaker, u.raw_text)
    }
}

fn is_peeled(c: char) -> bool {
    c.is_ascii_punctuation() && !NICK_PUNCT.contains(&c)
}

/// Lowercases, splits on whitespace and peels punctuation off both ends of
/// each word into single-character tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    let lower = text.to_lowercase();
    let mut out = Vec::new();
    for word in lower.split_whitespace() {
        let chars: Vec<char> = word.chars().collect();
        let mut lo = 0;
        while lo < chars.len() && is_peeled(chars[lo]) {
            out.push(chars[lo].to_string());
            lo += 1;
        }
        let mut hi = chars.len();
        while hi > lo && is_peeled(chars[hi - 1]) {
            hi -= 1;
        }
        if hi > lo {
            out.push(chars[lo..hi].iter().collect());
        }
        out.extend(chars[hi..].iter().map(|c| c.to_string()));
    }
    out
}

/// A reply link. `parent == child` is a self-link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LinkAnnotation {
    pub child: usize,
    pub parent: usize,
}

impl LinkAnnotation {
    pub fn new(child: usize, parent: usize) -> Self {
        LinkAnnotation { child, parent }
    }

    pub fn is_self(&self) -> bool {
        self.child == self.parent
    }

    pub fn distance(&self) -> usize {
        self.child - self.parent
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationOptions {
    /// Subtracted from every index on the line.
    pub offset: usize,
    /// Columns are `child parent` instead of `parent child`.
    pub child_first: bool,
}

/// Parses `parent child [ignored...]` lines. Duplicates are dropped, first occurrence wins.
pub fn load_annotations(text: &str, opts: &AnnotationOptions) -> Result<Vec<LinkAnnotation>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line_no = n + 1;
        let err = |message: String| Error::Format {
            line: line_no,
            message,
        };
        let mut fields = line.split_whitespace();
        let Some(first) = fields.next() else { continue };
        let second = fields
            .next()
            .ok_or_else(|| err("expected two integer fields".into()))?;
        let parse = |s: &str| -> Result<usize> {
            let v: usize = s
                .parse()
                .map_err(|_| err(format!("`{s}` is not a non-negative integer")))?;
            v.checked_sub(opts.offset)
                .ok_or_else(|| err(format!("index {v} is below offset {}", opts.offset)))
        };
        let (a, b) = (parse(first)?, parse(second)?);
        let (parent, child) = if opts.child_first { (b, a) } else { (a, b) };
        if parent > child {
            return Err(err(format!("parent {parent} follows child {child}")));
        }
        let link = LinkAnnotation::new(child, parent);
        if seen.insert(link) {
            out.push(link);
        }
    }
    Ok(out)
}

pub fn format_annotations(links: &[LinkAnnotation]) -> String {
    links
        .iter()
        .map(|l| format!("{} {} -\n", l.parent, l.child))
        .collect()
}

#[derive(Debug, Serialize, Deserialize)]
struct JsonUtterance {
    i: usize,
    h: u8,
    m: u8,
    s: String,
    sys: bool,
    text: String,
}

pub fn to_jsonl(utterances: &[Utterance]) -> Result<String> {
    let mut out = String::new();
    for u in utterances {
        let row = JsonUtterance {
            i: u.index,
            h: u.time.hour,
            m: u.time.minute,
            s: u.speaker.clone(),
            sys: u.is_system,
            text: u.raw_text.clone(),
        };
        out.push_str(&serde_json::to_string(&row)?);
        out.push('\n');
    }
    Ok(out)
}

/// Reads the JSON-lines form. Indices must run consecutively from 0.
pub fn from_jsonl(text: &str) -> Result<Vec<Utterance>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: JsonUtterance = serde_json::from_str(line).map_err(|e| Error::Format {
            line: n + 1,
            message: e.to_string(),
        })?;
        if row.i != out.len() {
            return Err(Error::Format {
                line: n + 1,
                message: format!("index {} out of sequence, expected {}", row.i, out.len()),
            });
        }
        let time = Timestamp::new(row.h, row.m).map_err(|e| Error::Format {
            line: n + 1,
            message: e.to_string(),
        })?;
        out.push(Utterance::new(row.i, time, &row.s, &row.text, row.sys));
    }
    Ok(out)
}

/// One contiguous channel log together with its gold links.
#[derive(Debug, Clone, PartialEq)]
pub struct ChatFile {
    pub name: String,
    pub utterances: Vec<Utterance>,
    pub links: Vec<LinkAnnotation>,
}

impl ChatFile {
    /// Checks that every link points inside the log.
    pub fn new(name: &str, utterances: Vec<Utterance>, links: Vec<LinkAnnotation>) -> Result<Self> {
        if let Some(bad) = links.iter().find(|l| l.child >= utterances.len()) {
            return Err(Error::Integrity(format!(
                "{name}: link {} -> {} points past the {} utterances of the log",
                bad.child,
                bad.parent,
                utterances.len()
            )));
        }
        Ok(ChatFile {
            name: name.to_string(),
            utterances,
            links,
        })
    }

    pub fn from_texts(name: &str, log: &str, annotations: &str, opts: &AnnotationOptions) -> Result<Self> {
        ChatFile::new(name, parse_log(log)?, load_annotations(annotations, opts)?)
    }

    /// Gold parents per annotated child, children ascending.
    pub fn gold_parents(&self) -> BTreeMap<usize, Vec<usize>> {
        let mut map: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for l in &self.links {
            map.entry(l.child).or_default().push(l.parent);
        }
        for parents in map.values_mut() {
            parents.sort_unstable();
        }
        map
    }

    /// Children that carry at least one gold link, ascending.
    pub fn annotated(&self) -> Vec<usize> {
        self.gold_parents().into_keys().collect()
    }
}

const LOG_SUFFIXES: [&str; 3] = [".ascii.txt", ".raw.txt", ".jsonl"];
const ANNOTATION_SUFFIX: &str = ".annotation.txt";

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::file(path, e))
}

/// Loads a log from disk, choosing the parser by file suffix.
pub fn load_log(path: &Path) -> Result<Vec<Utterance>> {
    let text = read(path)?;
    let name = path.to_string_lossy();
    let parsed = if name.ends_with(".jsonl") {
        from_jsonl(&text)
    } else {
        parse_log(&text)
    };
    parsed.map_err(|e| with_path(path, e))
}

fn with_path(path: &Path, e: Error) -> Error {
    match e {
        Error::Parse { line, message } => Error::Parse {
            line,
            message: format!("{}: {message}", path.display()),
        },
        Error::Format { line, message } => Error::Format {
            line,
            message: format!("{}: {message}", path.display()),
        },
        other => other,
    }
}

/// Loads every `<stem>.annotation.txt` in `dir` with its log
/// (`<stem>.ascii.txt`, `<stem>.raw.txt` or `<stem>.jsonl`, first found wins).
/// Subdirectories are searched recursively; files come back sorted by path.
pub fn load_dir(dir: &Path, opts: &AnnotationOptions) -> Result<Vec<ChatFile>> {
    let mut annotation_files = Vec::new();
    collect_annotations(dir, &mut annotation_files)?;
    annotation_files.sort();
    if annotation_files.is_empty() {
        return Err(Error::Integrity(format!(
            "{}: no `*{ANNOTATION_SUFFIX}` files found",
            dir.display()
        )));
    }
    let mut files = Vec::with_capacity(annotation_files.len());
    for ann in annotation_files {
        let full = ann.to_string_lossy();
        let stem = &full[..full.len() - ANNOTATION_SUFFIX.len()];
        let log = LOG_SUFFIXES
            .iter()
            .map(|s| PathBuf::from(format!("{stem}{s}")))
            .find(|p| p.is_file())
            .ok_or_else(|| Error::Integrity(format!("{full}: no matching log file")))?;
        let utterances = load_log(&log)?;
        let links = load_annotations(&read(&ann)?, opts).map_err(|e| with_path(&ann, e))?;
        let name = ann
            .strip_prefix(dir)
            .unwrap_or(&ann)
            .to_string_lossy()
            .trim_end_matches(ANNOTATION_SUFFIX)
            .to_string();
        files.push(ChatFile::new(&name, utterances, links)?);
    }
    Ok(files)
}

fn collect_annotations(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let entries = fs::read_dir(dir).map_err(|e| Error::file(dir, e))?;
    for entry in entries {
        let path = entry.map_err(|e| Error::file(dir, e))?.path();
        if path.is_dir() {
            collect_annotations(&path, out)?;
        } else if path.to_string_lossy().ends_with(ANNOTATION_SUFFIX) {
            out.push(path);
        }
    }
    Ok(())
}

/// Writes `<stem>.ascii.txt` and `<stem>.annotation.txt` into `dir`.
pub fn save_file(dir: &Path, file: &ChatFile) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
    let log: String = file
        .utterances
        .iter()
        .map(|u| format_log_line(u) + "\n")
        .collect();
    let log_path = dir.join(format!("{}.ascii.txt", file.name));
    fs::write(&log_path, log).map_err(|e| Error::file(&log_path, e))?;
    let ann_path = dir.join(format!("{}{ANNOTATION_SUFFIX}", file.name));
    fs::write(&ann_path, format_annotations(&file.links)).map_err(|e| Error::file(&ann_path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_speaker_line() {
        let l = parse_log_line(
            "[02:26] <zelot> hi, where can i get some help in regards to issues with mount?",
            1,
        )
        .unwrap()
        .unwrap();
        assert_eq!(l.time, Timestamp { hour: 2, minute: 26 });
        assert_eq!(l.speaker, "zelot");
        assert!(!l.is_system);
        assert!(l.text.starts_with("hi, where"));
    }

    #[test]
    fn parses_system_line() {
        let l = parse_log_line("[02:26] === zelot joined the channel", 1)
            .unwrap()
            .unwrap();
        assert_eq!(l.time, Timestamp { hour: 2, minute: 26 });
        assert_eq!(l.speaker, SYSTEM);
        assert!(l.is_system);
        assert_eq!(l.text, "zelot joined the channel");
    }

    #[test]
    fn parses_minimal_and_action_lines() {
        let l = parse_log_line("  [00:00] <a> x", 1).unwrap().unwrap();
        assert_eq!((l.time.hour, l.time.minute, l.speaker.as_str()), (0, 0, "a"));
        let a = parse_log_line("[10:01] * bob waves", 1).unwrap().unwrap();
        assert_eq!((a.speaker.as_str(), a.text.as_str()), ("bob", "waves"));
    }

    #[test]
    fn blank_lines_are_skipped() {
        assert_eq!(parse_log_line("", 1).unwrap(), None);
        assert_eq!(parse_log_line("   ", 1).unwrap(), None);
    }

    #[test]
    fn malformed_lines_carry_their_line_number() {
        for bad in ["[2:61] <a> x", "[aa:bb] <a> x", "02:26 <a> x", "[02:26] a x", "[02:26] <a x"] {
            match parse_log_line(bad, 9) {
                Err(Error::Parse { line: 9, .. }) => {}
                other => panic!("{bad}: {other:?}"),
            }
        }
    }

    #[test]
    fn tokenizer_examples() {
        assert_eq!(
            tokenize("TuxThePenguin, try booting"),
            ["tuxthepenguin", ",", "try", "booting"]
        );
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("A  B"), ["a", "b"]);
        assert_eq!(tokenize("zelot: If"), ["zelot", ":", "if"]);
        assert_eq!(tokenize("(ok)."), ["(", "ok", ")", "."]);
        assert_eq!(tokenize("[foo]_ ok"), ["[foo]_", "ok"]);
        assert_eq!(tokenize("..."), [".", ".", "."]);
    }

    #[test]
    fn annotation_examples() {
        let opts = AnnotationOptions {
            offset: 1000,
            ..Default::default()
        };
        assert_eq!(
            load_annotations("1002 1005 -", &opts).unwrap(),
            [LinkAnnotation::new(5, 2)]
        );
        let l = load_annotations("7 7 -", &AnnotationOptions::default()).unwrap();
        assert!(l[0].is_self() && l[0].child == 7);
        assert!(matches!(
            load_annotations("3 1 -", &AnnotationOptions::default()),
            Err(Error::Format { line: 1, .. })
        ));
    }

    #[test]
    fn annotations_dedupe_and_report_bad_fields() {
        let d = AnnotationOptions::default();
        assert_eq!(load_annotations("1 2\n\n1 2 -\n0 2", &d).unwrap().len(), 2);
        assert!(matches!(
            load_annotations("0 0\n1 x", &d),
            Err(Error::Format { line: 2, .. })
        ));
        let swapped = AnnotationOptions {
            child_first: true,
            ..d
        };
        assert_eq!(
            load_annotations("5 2", &swapped).unwrap(),
            [LinkAnnotation::new(5, 2)]
        );
    }

    #[test]
    fn jsonl_round_trip() {
        let log = "[02:26] === zelot joined the channel\n[02:27] <zelot> hi, \"quoted\" \\ text\n[02:28] <b>\n";
        let us = parse_log(log).unwrap();
        let back = from_jsonl(&to_jsonl(&us).unwrap()).unwrap();
        assert_eq!(us, back);
        assert_eq!(back[2].raw_text, "");
        assert!(back[2].tokens.is_empty());
    }

    #[test]
    fn log_line_formatting_round_trips() {
        let log = "[02:26] === zelot joined\n[23:59] <a> x y\n";
        let us = parse_log(log).unwrap();
        let again: String = us.iter().map(|u| format_log_line(u) + "\n").collect();
        assert_eq!(again, log);
    }

    #[test]
    fn dangling_link_is_an_integrity_error() {
        let us = parse_log("[00:00] <a> x").unwrap();
        assert!(matches!(
            ChatFile::new("f", us, vec![LinkAnnotation::new(3, 0)]),
            Err(Error::Integrity(_))
        ));
    }
}
