//! Gaze log: `timestamp_ms,x_px,y_px,valid,source_tag`, one sample per line.
//!
//! A leading header line is optional. Invalid samples may leave the
//! coordinates empty or `nan`.

use serde::{Deserialize, Serialize};

use crate::error::{GazeError, Result};

pub const GAZE_LOG_HEADER: &str = "timestamp_ms,x_px,y_px,valid,source_tag";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GazeRecord {
    pub timestamp_ms: i64,
    pub x: f32,
    pub y: f32,
    pub valid: bool,
    pub source: String,
}

fn parse_bool(s: &str) -> Option<bool> {
    match s.to_ascii_lowercase().as_str() {
        "1" | "true" => Some(true),
        "0" | "false" => Some(false),
        _ => None,
    }
}

fn parse_coord(s: &str) -> Option<f32> {
    if s.is_empty() {
        Some(f32::NAN)
    } else {
        s.parse().ok()
    }
}

pub fn parse_gaze_log(text: &str) -> Result<Vec<GazeRecord>> {
    const NAME: &str = "gaze log";
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut out: Vec<GazeRecord> = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(|e| GazeError::parse(NAME, i as u64 + 1, e.to_string()))?;
        let line = row.position().map(|p| p.line()).unwrap_or(i as u64 + 1);
        if row.iter().all(|f| f.is_empty()) {
            continue;
        }
        if out.is_empty() && i == 0 && row.get(0) == Some("timestamp_ms") {
            continue;
        }
        if row.len() != 5 {
            return Err(GazeError::parse(NAME, line, format!("expected 5 fields, got {}", row.len())));
        }
        let bad = |what: &str| GazeError::parse(NAME, line, format!("bad {what}: {:?}", row.iter().collect::<Vec<_>>()));
        let timestamp_ms: i64 = row[0].parse().map_err(|_| bad("timestamp"))?;
        let x = parse_coord(&row[1]).ok_or_else(|| bad("x"))?;
        let y = parse_coord(&row[2]).ok_or_else(|| bad("y"))?;
        let valid = parse_bool(&row[3]).ok_or_else(|| bad("valid flag"))?;
        if valid && !(x.is_finite() && y.is_finite()) {
            return Err(GazeError::parse(NAME, line, "valid sample needs finite coordinates"));
        }
        if let Some(prev) = out.last() {
            if timestamp_ms < prev.timestamp_ms {
                return Err(GazeError::parse(NAME, line, "timestamps must be nondecreasing"));
            }
        }
        out.push(GazeRecord {
            timestamp_ms,
            x,
            y,
            valid,
            source: row[4].to_string(),
        });
    }
    Ok(out)
}

pub fn format_gaze_log(records: &[GazeRecord]) -> String {
    let mut s = format!("{GAZE_LOG_HEADER}\n");
    for r in records {
        let coord = |v: f32| if v.is_finite() { v.to_string() } else { String::new() };
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            r.timestamp_ms,
            coord(r.x),
            coord(r.y),
            u8::from(r.valid),
            r.source
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let recs = vec![
            GazeRecord { timestamp_ms: 0, x: 1.5, y: 2.0, valid: true, source: "a".into() },
            GazeRecord { timestamp_ms: 33, x: f32::NAN, y: f32::NAN, valid: false, source: "a".into() },
        ];
        let back = parse_gaze_log(&format_gaze_log(&recs)).unwrap();
        assert_eq!(back[0], recs[0]);
        assert!(!back[1].valid && back[1].x.is_nan());
    }

    #[test]
    fn errors_carry_line_numbers() {
        let text = "timestamp_ms,x_px,y_px,valid,source_tag\n0,1,2,1,a\n5,1,oops,1,a\n";
        match parse_gaze_log(text) {
            Err(GazeError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(parse_gaze_log("10,1,2,1,a\n5,1,2,1,a\n").is_err());
        assert!(parse_gaze_log("10,,2,1,a\n").is_err());
    }
}
