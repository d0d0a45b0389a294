//! Per-point observing view ids: header `TRK1 <count>`, then one line per
//! point listing the frame ids that observe it.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub fn encode_tracks(tracks: &[Vec<u32>]) -> String {
    let mut s = format!("TRK1 {}\n", tracks.len());
    for t in tracks {
        let mut first = true;
        for id in t {
            if !first {
                s.push(' ');
            }
            let _ = write!(s, "{id}");
            first = false;
        }
        s.push('\n');
    }
    s
}

pub fn parse_tracks(path: &Path, text: &str) -> Result<Vec<Vec<u32>>> {
    if !text.ends_with('\n') {
        return Err(Error::parse(path, None, "truncated: missing final newline"));
    }
    let mut lines = text.split_terminator('\n');
    let head = lines.next().unwrap_or("");
    let count = head
        .strip_prefix("TRK1 ")
        .and_then(|n| n.trim().parse::<usize>().ok())
        .ok_or_else(|| Error::parse(path, Some(1), format!("bad header {head:?}")))?;
    let mut out = Vec::with_capacity(count);
    for (i, line) in lines.enumerate() {
        let ids = line
            .split_whitespace()
            .map(|t| t.parse::<u32>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| Error::parse(path, Some(i + 2), format!("bad view id list {line:?}")))?;
        out.push(ids);
    }
    if out.len() != count {
        return Err(Error::parse(
            path,
            None,
            format!("expected {count} tracks, found {}", out.len()),
        ));
    }
    Ok(out)
}

pub fn read_tracks(path: impl AsRef<Path>) -> Result<Vec<Vec<u32>>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_tracks(path, &text)
}

pub fn write_tracks(tracks: &[Vec<u32>], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_tracks(tracks)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_and_truncation() {
        let tracks = vec![vec![0, 1], vec![], vec![12]];
        let text = encode_tracks(&tracks);
        assert_eq!(parse_tracks(Path::new("t"), &text).unwrap(), tracks);
        for cut in 0..text.len() {
            assert!(parse_tracks(Path::new("t"), &text[..cut]).is_err(), "cut {cut}");
        }
    }
}
