//! JSON-lines detection predictions, one object per line.

use std::fmt::Write as _;
use std::path::Path;

use crate::eval::Prediction;

use super::{read_bytes, write_bytes, IoError};

pub fn parse_jsonl(path: &Path, text: &str) -> Result<Vec<Prediction>, IoError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |reason: String| IoError::BadLine {
            path: path.to_path_buf(),
            line: i + 1,
            reason,
        };
        let p: Prediction = serde_json::from_str(line).map_err(|e| bad(e.to_string()))?;
        p.validate().map_err(|e| bad(e.to_string()))?;
        out.push(p);
    }
    Ok(out)
}

pub fn read_jsonl(path: &Path) -> Result<Vec<Prediction>, IoError> {
    let bytes = read_bytes(path)?;
    let text = String::from_utf8(bytes).map_err(|e| IoError::BadLine {
        path: path.to_path_buf(),
        line: 0,
        reason: e.to_string(),
    })?;
    parse_jsonl(path, &text)
}

pub fn write_jsonl(path: &Path, preds: &[Prediction]) -> Result<(), IoError> {
    let mut s = String::new();
    for p in preds {
        let _ = writeln!(s, "{}", serde_json::to_string(p).expect("prediction serializes"));
    }
    write_bytes(path, s.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BBox3D, DetectionClass};

    #[test]
    fn round_trip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.jsonl");
        let b = BBox3D::new(1, DetectionClass::Bus, [1.0, 2.0, 3.0], [11.0, 2.9, 3.3], 0.1);
        let preds = vec![Prediction::from_box("scene_0000/0001", &b, 0.75)];
        write_jsonl(&path, &preds).unwrap();
        assert_eq!(read_jsonl(&path).unwrap(), preds);

        let line = r#"{"frame_id":"a/0001","class":"car","center":[0,0,0],"size":[1,1,1],"yaw":0,"score":0.5}"#;
        assert_eq!(parse_jsonl(&path, line).unwrap()[0].velocity, [0.0; 3]);
        let err = parse_jsonl(&path, &format!("{line}\n{{\"frame_id\":1}}")).unwrap_err();
        assert!(err.to_string().contains(":2:"), "{err}");
        assert!(parse_jsonl(&path, &line.replace("\"car\"", "\"tram\"")).is_err());
        assert!(parse_jsonl(&path, &line.replace("0.5}", "0.5,\"extra\":1}")).is_err());
    }
}
