use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{read_file, Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SubtitleOptions {
    /// Remove `[...]` captions such as "[APPLAUSE]".
    pub strip_bracketed: bool,
}

/// Reads a subtitle file (SRT or plain text, auto-detected) and returns its
/// spoken text.
pub fn load_subtitles(path: &Path, opts: SubtitleOptions) -> Result<String> {
    let bytes = read_file(path)?;
    let text = String::from_utf8(bytes).map_err(|_| Error::InvalidEncoding(path.to_path_buf()))?;
    strip_subtitles(&text, opts)
}

/// Text-level half of [`load_subtitles`].
pub fn strip_subtitles(text: &str, opts: SubtitleOptions) -> Result<String> {
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let out = if is_srt(text) {
        parse_srt(text)?
    } else {
        text.to_string()
    };
    Ok(if opts.strip_bracketed {
        remove_delimited(&out, '[', ']')
    } else {
        out
    })
}

fn is_srt(text: &str) -> bool {
    let mut lines = text.lines().map(str::trim).skip_while(|l| l.is_empty());
    match (lines.next(), lines.next()) {
        (Some(first), Some(second)) => first.parse::<u64>().is_ok() && second.contains("-->"),
        _ => false,
    }
}

fn parse_srt(text: &str) -> Result<String> {
    enum State {
        Index,
        Timing,
        Text,
    }
    let mut state = State::Index;
    let mut cues: Vec<String> = Vec::new();
    let mut current: Vec<String> = Vec::new();

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let lineno = lineno + 1;
        match state {
            State::Index => {
                if line.is_empty() {
                    continue;
                }
                if line.parse::<u64>().is_err() {
                    return Err(Error::MalformedSrt {
                        line: lineno,
                        message: format!("expected cue index, found {line:?}"),
                    });
                }
                state = State::Timing;
            }
            State::Timing => {
                parse_timing(line).map_err(|message| Error::MalformedSrt { line: lineno, message })?;
                state = State::Text;
            }
            State::Text => {
                if line.is_empty() {
                    flush(&mut current, &mut cues);
                    state = State::Index;
                } else {
                    let cleaned = remove_delimited(line, '<', '>');
                    let cleaned = cleaned.split_whitespace().collect::<Vec<_>>().join(" ");
                    if !cleaned.is_empty() {
                        current.push(cleaned);
                    }
                }
            }
        }
    }
    if let State::Timing = state {
        return Err(Error::MalformedSrt {
            line: text.lines().count(),
            message: "cue index without timestamp line".into(),
        });
    }
    flush(&mut current, &mut cues);
    Ok(cues.join(" "))
}

fn flush(current: &mut Vec<String>, cues: &mut Vec<String>) {
    if !current.is_empty() {
        cues.push(current.join(" "));
        current.clear();
    }
}

fn parse_timing(line: &str) -> std::result::Result<(u64, u64), String> {
    let (start, rest) = line
        .split_once("-->")
        .ok_or_else(|| format!("expected timestamp line, found {line:?}"))?;
    // anything after the end time (position hints) is ignored
    let end = rest.split_whitespace().next().unwrap_or("");
    let s = parse_timestamp(start.trim()).ok_or_else(|| format!("bad start time {:?}", start.trim()))?;
    let e = parse_timestamp(end).ok_or_else(|| format!("bad end time {end:?}"))?;
    Ok((s, e))
}

/// `HH:MM:SS,mmm` to milliseconds.
fn parse_timestamp(ts: &str) -> Option<u64> {
    let (hms, ms) = ts.split_once([',', '.'])?;
    let mut parts = hms.split(':');
    let h: u64 = parts.next()?.parse().ok()?;
    let m: u64 = parts.next()?.parse().ok()?;
    let s: u64 = parts.next()?.parse().ok()?;
    if parts.next().is_some() || m >= 60 || s >= 60 || ms.len() != 3 {
        return None;
    }
    let ms: u64 = ms.parse().ok()?;
    Some(((h * 60 + m) * 60 + s) * 1000 + ms)
}

/// Removes every `open ... close` span (shortest match). An `open` with no
/// later `close` is kept.
fn remove_delimited(s: &str, open: char, close: char) -> String {
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    while let Some(start) = rest.find(open) {
        match rest[start..].find(close) {
            Some(len) => {
                out.push_str(&rest[..start]);
                rest = &rest[start + len + close.len_utf8()..];
            }
            None => break,
        }
    }
    out.push_str(rest);
    out
}
