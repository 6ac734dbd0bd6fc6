use std::collections::HashSet;
use std::fs::{self, File};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Named tensor buffers in manifest order. Each buffer is its own
/// allocation; nothing assumes tensors sit next to each other in memory.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TensorMap {
    entries: Vec<(String, Vec<u8>)>,
}

impl TensorMap {
    pub fn new() -> Self {
        TensorMap::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, data: Vec<u8>) -> Result<()> {
        let name = name.into();
        if self.entries.iter().any(|(n, _)| *n == name) {
            return Err(Error::InvalidInput(format!("duplicate tensor name `{name}`")));
        }
        self.entries.push((name, data));
        Ok(())
    }

    pub fn from_entries<I, S>(entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, Vec<u8>)>,
        S: Into<String>,
    {
        let mut map = TensorMap::new();
        for (name, data) in entries {
            map.insert(name, data)?;
        }
        Ok(map)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(n, _)| n.as_str())
    }

    pub fn tensors(&self) -> impl Iterator<Item = &[u8]> {
        self.entries.iter().map(|(_, t)| t.as_slice())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[u8])> {
        self.entries.iter().map(|(n, t)| (n.as_str(), t.as_slice()))
    }

    pub fn tensor(&self, i: usize) -> &[u8] {
        &self.entries[i].1
    }

    pub fn tensor_mut(&mut self, i: usize) -> &mut [u8] {
        &mut self.entries[i].1
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.entries.iter().map(|(_, t)| t.len()).collect()
    }

    pub fn total_size(&self) -> usize {
        self.entries.iter().map(|(_, t)| t.len()).sum()
    }

    /// All tensors copied into one allocation, in entry order.
    pub fn concatenated(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.total_size());
        for t in self.tensors() {
            out.extend_from_slice(t);
        }
        out
    }

    /// Loads a model from a JSON manifest. Each tensor is read into its own
    /// buffer.
    pub fn load(manifest_path: &Path) -> Result<TensorMap> {
        let manifest = ModelManifest::load(manifest_path)?;
        let data_path = manifest.data_path(manifest_path);
        let mut file = File::open(&data_path)?;
        let file_len = file.metadata()?.len();
        let mut map = TensorMap::new();
        for t in &manifest.tensors {
            let end = t.offset.checked_add(t.length).ok_or_else(|| Error::format("tensor range overflows"))?;
            if end > file_len {
                return Err(Error::format(format!(
                    "tensor `{}` spans [{}, {end}) past the end of {} ({file_len} bytes)",
                    t.name,
                    t.offset,
                    data_path.display()
                )));
            }
            let len = usize::try_from(t.length).map_err(|_| Error::format("tensor too large"))?;
            let mut buf = Vec::new();
            buf.try_reserve_exact(len)
                .map_err(|e| Error::Resource(format!("allocating tensor `{}`: {e}", t.name)))?;
            buf.resize(len, 0);
            file.seek(SeekFrom::Start(t.offset))?;
            file.read_exact(&mut buf)?;
            map.insert(t.name.clone(), buf).map_err(|e| Error::format(e.to_string()))?;
        }
        Ok(map)
    }

    /// Writes `<dir>/<stem>.json` and `<dir>/<stem>.bin`; returns the manifest
    /// path.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<PathBuf> {
        fs::create_dir_all(dir)?;
        let data_name = format!("{stem}.bin");
        let mut data = File::create(dir.join(&data_name))?;
        let mut tensors = Vec::with_capacity(self.len());
        let mut offset = 0u64;
        for (name, t) in self.iter() {
            data.write_all(t)?;
            tensors.push(TensorEntry {
                name: name.to_string(),
                offset,
                length: t.len() as u64,
            });
            offset += t.len() as u64;
        }
        data.flush()?;
        let manifest = ModelManifest { tensors, data: data_name };
        let path = dir.join(format!("{stem}.json"));
        fs::write(&path, serde_json::to_vec_pretty(&manifest)?)?;
        Ok(path)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub offset: u64,
    pub length: u64,
}

/// On-disk model description: tensor ranges into one raw data file whose
/// path is relative to the manifest.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelManifest {
    pub tensors: Vec<TensorEntry>,
    pub data: String,
}

impl ModelManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let raw = fs::read(path)?;
        let manifest: ModelManifest = serde_json::from_slice(&raw)?;
        let mut seen = HashSet::new();
        for t in &manifest.tensors {
            if !seen.insert(t.name.as_str()) {
                return Err(Error::format(format!("duplicate tensor name `{}`", t.name)));
            }
        }
        Ok(manifest)
    }

    pub fn data_path(&self, manifest_path: &Path) -> PathBuf {
        manifest_path
            .parent()
            .unwrap_or_else(|| Path::new("."))
            .join(&self.data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicate_names_rejected() {
        let mut m = TensorMap::new();
        m.insert("a", vec![1]).unwrap();
        assert!(m.insert("a", vec![2]).is_err());
    }

    #[test]
    fn save_then_load() {
        let dir = tempfile::tempdir().unwrap();
        let m = TensorMap::from_entries([("w", vec![1u8, 2, 3]), ("empty", vec![]), ("b", vec![9u8; 10])]).unwrap();
        let path = m.save(dir.path(), "model").unwrap();
        let back = TensorMap::load(&path).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.names().collect::<Vec<_>>(), ["w", "empty", "b"]);
    }

    #[test]
    fn out_of_range_tensor_is_format_error() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("d.bin"), [0u8; 4]).unwrap();
        let manifest = r#"{"tensors":[{"name":"x","offset":2,"length":4}],"data":"d.bin"}"#;
        fs::write(dir.path().join("m.json"), manifest).unwrap();
        assert!(matches!(TensorMap::load(&dir.path().join("m.json")), Err(Error::Format(_))));
    }
}
