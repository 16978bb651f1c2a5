use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mil::Label;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    /// Image or bag file; relative paths are resolved against the manifest's directory on load.
    pub path: PathBuf,
    pub label: Label,
}

impl ManifestEntry {
    /// Bag files are recognized by their `.json` extension; anything else is read as an image.
    pub fn is_bag_file(&self) -> bool {
        self.path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
}

#[derive(Deserialize)]
struct Row {
    id: String,
    path_or_bagfile: String,
    label: String,
}

impl Manifest {
    pub fn new(entries: Vec<ManifestEntry>) -> Result<Manifest> {
        if entries.is_empty() {
            return Err(Error::Contract("manifest has no entries".into()));
        }
        let mut seen = HashSet::new();
        if let Some(dup) = entries.iter().find(|e| !seen.insert(e.id.as_str())) {
            return Err(Error::Contract(format!("duplicate manifest id {:?}", dup.id)));
        }
        Ok(Manifest { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn labels(&self) -> Vec<Label> {
        self.entries.iter().map(|e| e.label).collect()
    }

    pub fn subset(&self, indices: &[usize]) -> Manifest {
        Manifest {
            entries: indices.iter().map(|&i| self.entries[i].clone()).collect(),
        }
    }
}

/// Reads a CSV manifest with header `id,path_or_bagfile,label`.
pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new(""));
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let mut entries = Vec::new();
    for row in reader.deserialize::<Row>() {
        let row = row.map_err(|e| Error::format(path, e))?;
        let label: Label = row
            .label
            .parse()
            .map_err(|_| Error::format(path, format!("entry {}: label {:?} is not +1 or -1", row.id, row.label)))?;
        entries.push(ManifestEntry {
            id: row.id,
            path: base.join(row.path_or_bagfile),
            label,
        });
    }
    Manifest::new(entries).map_err(|e| Error::format(path, e))
}

/// Writes a manifest with paths relative to `base` where possible.
pub fn write_manifest(path: &Path, manifest: &Manifest, base: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let fail = |e: csv::Error| Error::format(path, e);
    w.write_record(["id", "path_or_bagfile", "label"]).map_err(fail)?;
    for e in &manifest.entries {
        let rel = e.path.strip_prefix(base).unwrap_or(&e.path);
        w.write_record([e.id.as_str(), &rel.to_string_lossy(), &e.label.to_string()])
            .map_err(fail)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::format(path, e))?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
