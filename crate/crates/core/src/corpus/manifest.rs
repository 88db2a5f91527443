use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::write_atomic;
use crate::{Error, Result};

/// 0 = control, 1 = depressed.
pub type Label = u8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Utterance {
    pub id: String,
    pub path: PathBuf,
    pub label: Label,
    pub split: Split,
}

/// Dataset index. Relative audio paths resolve against `root`, the
/// directory holding the manifest file.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Manifest {
    pub utterances: Vec<Utterance>,
    pub root: PathBuf,
}

impl Manifest {
    pub fn new(utterances: Vec<Utterance>, root: impl Into<PathBuf>) -> Result<Self> {
        let m = Self {
            utterances,
            root: root.into(),
        };
        m.check_ids()?;
        Ok(m)
    }

    pub fn len(&self) -> usize {
        self.utterances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.utterances.is_empty()
    }

    pub fn audio_path(&self, utt: &Utterance) -> PathBuf {
        if utt.path.is_absolute() {
            utt.path.clone()
        } else {
            self.root.join(&utt.path)
        }
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &Utterance> {
        self.utterances.iter().filter(move |u| u.split == split)
    }

    pub fn get(&self, id: &str) -> Option<&Utterance> {
        self.utterances.iter().find(|u| u.id == id)
    }

    fn check_ids(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for u in &self.utterances {
            if !seen.insert(u.id.as_str()) {
                return Err(Error::DuplicateId(u.id.clone()));
            }
        }
        Ok(())
    }

    /// Fails with every id whose audio file does not exist.
    pub fn check_files(&self) -> Result<()> {
        let missing: Vec<String> = self
            .utterances
            .iter()
            .filter(|u| !self.audio_path(u).is_file())
            .map(|u| u.id.clone())
            .collect();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(Error::MissingAudio(missing))
        }
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for u in &self.utterances {
            out.push_str(&serde_json::to_string(u).expect("utterance serializes"));
            out.push('\n');
        }
        out
    }
}

/// Parses JSON-lines text; blank lines are skipped.
pub fn parse_manifest(text: &str, source: &Path) -> Result<Vec<Utterance>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: source.to_path_buf(),
            line: i + 1,
            message,
        };
        let utt: Utterance = serde_json::from_str(line).map_err(|e| parse_err(e.to_string()))?;
        if utt.label > 1 {
            return Err(parse_err(format!("label must be 0 or 1, got {}", utt.label)));
        }
        if utt.id.is_empty() {
            return Err(parse_err("empty utterance id".into()));
        }
        out.push(utt);
    }
    Ok(out)
}

/// Loads and validates a manifest: ids unique, every audio file present.
pub fn load_manifest(path: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(path)?;
    let utterances = parse_manifest(&text, path)?;
    let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let manifest = Manifest::new(utterances, root)?;
    manifest.check_files()?;
    Ok(manifest)
}

pub fn save_manifest(manifest: &Manifest, path: &Path) -> Result<()> {
    write_atomic(path, manifest.to_jsonl().as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn touch(dir: &Path, name: &str) {
        fs::write(dir.join(name), b"").unwrap();
    }

    #[test]
    fn empty_and_single_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.jsonl");
        fs::write(&p, "").unwrap();
        assert!(load_manifest(&p).unwrap().is_empty());

        touch(dir.path(), "a.wav");
        fs::write(&p, r#"{"id":"a","path":"a.wav","label":1,"split":"train"}"#).unwrap();
        let m = load_manifest(&p).unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m.audio_path(&m.utterances[0]), dir.path().join("a.wav"));
    }

    #[test]
    fn duplicate_id_is_named() {
        let dir = tempfile::tempdir().unwrap();
        touch(dir.path(), "a.wav");
        let p = dir.path().join("m.jsonl");
        let line = r#"{"id":"spk7","path":"a.wav","label":0,"split":"test"}"#;
        fs::write(&p, format!("{line}\n{line}\n")).unwrap();
        match load_manifest(&p) {
            Err(Error::DuplicateId(id)) => assert_eq!(id, "spk7"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let dir = tempfile::tempdir().unwrap();
        touch(dir.path(), "a.wav");
        let p = dir.path().join("m.jsonl");
        fs::write(
            &p,
            "{\"id\":\"a\",\"path\":\"a.wav\",\"label\":0,\"split\":\"train\"}\n\n{\"id\":\"b\",\"label\":0}\n",
        )
        .unwrap();
        match load_manifest(&p) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        fs::write(&p, "{\"id\":\"a\",\"path\":\"a.wav\",\"label\":2,\"split\":\"train\"}\n").unwrap();
        assert!(matches!(load_manifest(&p), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn missing_audio_lists_ids() {
        let dir = tempfile::tempdir().unwrap();
        touch(dir.path(), "a.wav");
        let p = dir.path().join("m.jsonl");
        fs::write(
            &p,
            "{\"id\":\"a\",\"path\":\"a.wav\",\"label\":0,\"split\":\"train\"}\n\
             {\"id\":\"b\",\"path\":\"b.wav\",\"label\":0,\"split\":\"train\"}\n\
             {\"id\":\"c\",\"path\":\"c.wav\",\"label\":1,\"split\":\"test\"}\n",
        )
        .unwrap();
        match load_manifest(&p) {
            Err(Error::MissingAudio(ids)) => assert_eq!(ids, vec!["b", "c"]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn save_then_load_is_identity() {
        let dir = tempfile::tempdir().unwrap();
        touch(dir.path(), "a.wav");
        touch(dir.path(), "b.wav");
        let utts = vec![
            Utterance { id: "a".into(), path: "a.wav".into(), label: 0, split: Split::Train },
            Utterance { id: "b".into(), path: "b.wav".into(), label: 1, split: Split::Validation },
        ];
        let m = Manifest::new(utts, dir.path()).unwrap();
        let p = dir.path().join("m.jsonl");
        save_manifest(&m, &p).unwrap();
        assert_eq!(load_manifest(&p).unwrap(), m);
    }
}
