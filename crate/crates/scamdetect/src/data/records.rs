//! JSONL persistence. One record per line, validated on load: schema,
//! parseable bytecode, non-empty unique addresses.

use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::path::Path;

use super::{DataError, DatasetRecord};
use crate::disasm::Bytecode;

pub fn load_jsonl(path: &Path) -> Result<Vec<DatasetRecord>, DataError> {
    let text = fs::read_to_string(path)?;
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let record: DatasetRecord =
            serde_json::from_str(line).map_err(|e| DataError::MalformedLine {
                line: lineno,
                reason: e.to_string(),
            })?;
        validate(&record).map_err(|reason| DataError::MalformedLine { line: lineno, reason })?;
        if !seen.insert(record.address.clone()) {
            return Err(DataError::DuplicateAddress(record.address));
        }
        records.push(record);
    }
    Ok(records)
}

/// Writes records in input order, one JSON object per line. The same
/// validation as load applies, so a saved file always loads back.
pub fn save_jsonl(records: &[DatasetRecord], path: &Path) -> Result<(), DataError> {
    let mut seen = HashSet::new();
    for record in records {
        validate(record).map_err(|reason| DataError::MalformedLine { line: 0, reason })?;
        if !seen.insert(record.address.as_str()) {
            return Err(DataError::DuplicateAddress(record.address.clone()));
        }
    }
    let mut out = Vec::new();
    for record in records {
        let line = serde_json::to_string(record).expect("records always serialize");
        out.extend_from_slice(line.as_bytes());
        out.push(b'\n');
    }
    let mut file = fs::File::create(path)?;
    file.write_all(&out)?;
    Ok(())
}

fn validate(record: &DatasetRecord) -> Result<(), String> {
    if record.address.is_empty() {
        return Err("empty address".into());
    }
    Bytecode::parse_hex(&record.bytecode)
        .map_err(|e| format!("bad bytecode: {e}"))
        .map(|_| ())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Label, Source, Split};
    use tempfile::tempdir;

    fn rec(address: &str, bytecode: &str) -> DatasetRecord {
        DatasetRecord {
            address: address.into(),
            bytecode: bytecode.into(),
            label: Label::Benign,
            source: Source::File,
            split: None,
        }
    }

    #[test]
    fn round_trip_is_identity() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("corpus.jsonl");
        let mut records = vec![rec("0xaa", "0x6001"), rec("0xbb", "6002"), rec("0xcc", "00")];
        records[1].label = Label::Phishing;
        records[2].split = Some(Split::Test);
        save_jsonl(&records, &path).unwrap();
        let loaded = load_jsonl(&path).unwrap();
        assert_eq!(loaded, records);
    }

    #[test]
    fn lines_have_sorted_keys_and_skip_absent_split() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("corpus.jsonl");
        let mut with_split = rec("0xbb", "6002");
        with_split.split = Some(Split::Val);
        save_jsonl(&[rec("0xaa", "0x6001"), with_split], &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(
            lines[0],
            r#"{"address":"0xaa","bytecode":"0x6001","label":"benign","source":"file"}"#
        );
        assert_eq!(
            lines[1],
            r#"{"address":"0xbb","bytecode":"6002","label":"benign","source":"file","split":"val"}"#
        );
    }

    #[test]
    fn example_line_parses() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("one.jsonl");
        std::fs::write(
            &path,
            "{\"address\":\"a\",\"bytecode\":\"0x6001\",\"label\":\"benign\",\"source\":\"file\"}\n",
        )
        .unwrap();
        let records = load_jsonl(&path).unwrap();
        assert_eq!(records.len(), 1);
        assert_eq!(records[0].address, "a");
        assert_eq!(records[0].label, Label::Benign);
        assert_eq!(records[0].split, None);
    }

    #[test]
    fn unknown_label_is_malformed_with_line_number() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        std::fs::write(
            &path,
            concat!(
                "{\"address\":\"a\",\"bytecode\":\"6001\",\"label\":\"benign\",\"source\":\"file\"}\n",
                "{\"address\":\"b\",\"bytecode\":\"6001\",\"label\":\"ponzi\",\"source\":\"file\"}\n",
            ),
        )
        .unwrap();
        match load_jsonl(&path).unwrap_err() {
            DataError::MalformedLine { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn bad_hex_and_empty_address_are_malformed() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        std::fs::write(
            &path,
            "{\"address\":\"a\",\"bytecode\":\"0xzz\",\"label\":\"benign\",\"source\":\"file\"}\n",
        )
        .unwrap();
        assert!(matches!(
            load_jsonl(&path).unwrap_err(),
            DataError::MalformedLine { line: 1, .. }
        ));
        std::fs::write(
            &path,
            "{\"address\":\"\",\"bytecode\":\"6001\",\"label\":\"benign\",\"source\":\"file\"}\n",
        )
        .unwrap();
        assert!(matches!(
            load_jsonl(&path).unwrap_err(),
            DataError::MalformedLine { line: 1, .. }
        ));
    }

    #[test]
    fn duplicate_addresses_are_rejected_on_load_and_save() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("dup.jsonl");
        std::fs::write(
            &path,
            concat!(
                "{\"address\":\"a\",\"bytecode\":\"6001\",\"label\":\"benign\",\"source\":\"file\"}\n",
                "{\"address\":\"a\",\"bytecode\":\"6002\",\"label\":\"benign\",\"source\":\"file\"}\n",
            ),
        )
        .unwrap();
        assert!(matches!(
            load_jsonl(&path).unwrap_err(),
            DataError::DuplicateAddress(a) if a == "a"
        ));
        let out = dir.path().join("out.jsonl");
        assert!(matches!(
            save_jsonl(&[rec("x", "6001"), rec("x", "6002")], &out).unwrap_err(),
            DataError::DuplicateAddress(_)
        ));
    }

    #[test]
    fn missing_file_is_io_failure() {
        let err = load_jsonl(Path::new("/nonexistent/corpus.jsonl")).unwrap_err();
        assert!(matches!(err, DataError::IoFailure(_)));
    }
}
