//! Tensor archive: `u64` little-endian header length, a JSON header mapping
//! tensor names to `{dtype, shape, data_offsets}` (plus an optional
//! `__metadata__` string map), then the raw little-endian buffers. This is
//! the safetensors layout restricted to `F32`.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};

const METADATA_KEY: &str = "__metadata__";
/// Headers above this size are rejected as corrupt.
const MAX_HEADER: u64 = 256 << 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f32>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Self { shape, data }
    }
}

/// Location of one tensor inside an archive file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub name: String,
    pub shape: Vec<usize>,
    /// Absolute byte offset of the tensor data in the file.
    pub offset: u64,
    pub len: usize,
}

#[derive(Debug, Clone, Default)]
pub struct Header {
    /// Entries ordered by data offset.
    pub entries: Vec<Entry>,
    pub metadata: BTreeMap<String, String>,
}

#[derive(Deserialize)]
struct RawEntry {
    dtype: String,
    shape: Vec<usize>,
    data_offsets: [u64; 2],
}

fn bad(path: &Path, message: impl Into<String>) -> Error {
    Error::format(path.display().to_string(), 0, message)
}

/// Parses and validates the header of an archive of `file_len` bytes.
pub fn read_header(reader: &mut impl Read, file_len: u64, path: &Path) -> Result<Header> {
    let mut len_bytes = [0u8; 8];
    reader
        .read_exact(&mut len_bytes)
        .map_err(|_| bad(path, "file shorter than the 8-byte header length"))?;
    let header_len = u64::from_le_bytes(len_bytes);
    if header_len > MAX_HEADER || 8 + header_len > file_len {
        return Err(bad(path, format!("header length {header_len} exceeds file size {file_len}")));
    }
    let mut buf = vec![0u8; header_len as usize];
    reader
        .read_exact(&mut buf)
        .map_err(|e| bad(path, format!("truncated header: {e}")))?;
    let raw: Map<String, Value> = serde_json::from_slice(&buf).map_err(|e| bad(path, format!("header is not a JSON object: {e}")))?;

    let data_start = 8 + header_len;
    let data_len = file_len - data_start;
    let mut header = Header::default();
    for (name, value) in raw {
        if name == METADATA_KEY {
            header.metadata = serde_json::from_value(value).map_err(|e| bad(path, format!("metadata must map strings to strings: {e}")))?;
            continue;
        }
        let e: RawEntry = serde_json::from_value(value).map_err(|e| bad(path, format!("tensor `{name}`: {e}")))?;
        if e.dtype != "F32" {
            return Err(bad(path, format!("tensor `{name}`: unsupported dtype {}", e.dtype)));
        }
        let [begin, end] = e.data_offsets;
        let numel: usize = e.shape.iter().product();
        if end < begin || end - begin != 4 * numel as u64 {
            return Err(bad(
                path,
                format!("tensor `{name}`: offsets [{begin}, {end}) do not hold shape {:?}", e.shape),
            ));
        }
        if end > data_len {
            return Err(bad(
                path,
                format!("tensor `{name}` ends at {end} but the data section has {data_len} bytes (truncated file?)"),
            ));
        }
        header.entries.push(Entry {
            name,
            shape: e.shape,
            offset: data_start + begin,
            len: numel,
        });
    }
    header.entries.sort_by_key(|e| e.offset);
    Ok(header)
}

fn decode_f32(bytes: &[u8]) -> Vec<f32> {
    bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect()
}

/// In-memory archive.
#[derive(Debug, Clone, Default)]
pub struct TensorArchive {
    pub tensors: BTreeMap<String, Tensor>,
    pub metadata: BTreeMap<String, String>,
}

impl TensorArchive {
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut bytes = Vec::new();
        File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, path)
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let header = read_header(&mut &bytes[..], bytes.len() as u64, path)?;
        let tensors = header
            .entries
            .into_iter()
            .map(|e| {
                let start = e.offset as usize;
                let data = decode_f32(&bytes[start..start + 4 * e.len]);
                (e.name, Tensor::new(e.shape, data))
            })
            .collect();
        Ok(Self {
            tensors,
            metadata: header.metadata,
        })
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.get(name)
    }

    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor) {
        self.tensors.insert(name.into(), tensor);
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let shapes: Vec<(String, Vec<usize>)> = self.tensors.iter().map(|(n, t)| (n.clone(), t.shape.clone())).collect();
        let mut out = encode_header(&shapes, &self.metadata);
        for t in self.tensors.values() {
            for v in &t.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }
}

/// Header bytes (length prefix included) for tensors laid out back to back
/// in the given order. The JSON is padded with spaces to a multiple of 8.
fn encode_header(entries: &[(String, Vec<usize>)], metadata: &BTreeMap<String, String>) -> Vec<u8> {
    let mut map = Map::new();
    if !metadata.is_empty() {
        map.insert(METADATA_KEY.into(), serde_json::to_value(metadata).expect("string map"));
    }
    let mut offset = 0u64;
    for (name, shape) in entries {
        let bytes = 4 * shape.iter().product::<usize>() as u64;
        map.insert(
            name.clone(),
            serde_json::json!({"dtype": "F32", "shape": shape, "data_offsets": [offset, offset + bytes]}),
        );
        offset += bytes;
    }
    let mut json = serde_json::to_vec(&Value::Object(map)).expect("header serializes");
    while !json.len().is_multiple_of(8) {
        json.push(b' ');
    }
    let mut out = (json.len() as u64).to_le_bytes().to_vec();
    out.extend_from_slice(&json);
    out
}

/// Streams tensors into an archive whose names and shapes are fixed up front.
pub struct ArchiveWriter {
    out: BufWriter<File>,
    path: PathBuf,
    expected: Vec<(String, Vec<usize>)>,
    next: usize,
}

impl ArchiveWriter {
    pub fn create(path: impl AsRef<Path>, entries: Vec<(String, Vec<usize>)>, metadata: &BTreeMap<String, String>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let mut names = std::collections::HashSet::new();
        if let Some((dup, _)) = entries.iter().find(|(n, _)| !names.insert(n.as_str())) {
            return Err(Error::Integrity(format!("duplicate tensor name `{dup}`")));
        }
        if entries.iter().any(|(n, _)| n == METADATA_KEY) {
            return Err(Error::Integrity(format!("`{METADATA_KEY}` is reserved")));
        }
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut out = BufWriter::new(file);
        out.write_all(&encode_header(&entries, metadata)).map_err(|e| Error::io(&path, e))?;
        Ok(Self {
            out,
            path,
            expected: entries,
            next: 0,
        })
    }

    pub fn write_next(&mut self, data: &[f32]) -> Result<()> {
        let (name, shape) = self
            .expected
            .get(self.next)
            .ok_or_else(|| Error::Integrity("more tensors written than declared".into()))?;
        let numel: usize = shape.iter().product();
        if numel != data.len() {
            return Err(Error::Integrity(format!(
                "tensor `{name}` declared with {numel} elements, got {}",
                data.len()
            )));
        }
        self.next += 1;
        for v in data {
            self.out.write_all(&v.to_le_bytes()).map_err(|e| Error::io(&self.path, e))?;
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        if let Some((name, _)) = self.expected.get(self.next) {
            return Err(Error::Integrity(format!("tensor `{name}` was declared but never written")));
        }
        self.out.flush().map_err(|e| Error::io(&self.path, e))
    }
}

/// Random access to the tensors of an archive on disk.
pub struct ArchiveReader {
    file: File,
    path: PathBuf,
    pub header: Header,
}

impl ArchiveReader {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let mut file = File::open(&path).map_err(|e| Error::io(&path, e))?;
        let len = file.metadata().map_err(|e| Error::io(&path, e))?.len();
        let header = read_header(&mut file, len, &path)?;
        Ok(Self { file, path, header })
    }

    pub fn read(&mut self, index: usize) -> Result<Tensor> {
        let entry = &self.header.entries[index];
        let mut buf = vec![0u8; 4 * entry.len];
        self.file
            .seek(SeekFrom::Start(entry.offset))
            .and_then(|_| self.file.read_exact(&mut buf))
            .map_err(|e| Error::io(&self.path, e))?;
        Ok(Tensor::new(entry.shape.clone(), decode_f32(&buf)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> TensorArchive {
        let mut a = TensorArchive::default();
        a.insert("b", Tensor::new(vec![2, 2], vec![1.0, -2.0, 3.5, f32::MIN_POSITIVE]));
        a.insert("a", Tensor::new(vec![3], vec![0.0, 1e-30, -0.0]));
        a.metadata.insert("kind".into(), "test".into());
        a
    }

    #[test]
    fn roundtrip_is_bit_exact() {
        let a = sample();
        let bytes = a.to_bytes();
        let b = TensorArchive::from_bytes(&bytes, Path::new("mem")).unwrap();
        assert_eq!(b.metadata, a.metadata);
        for (name, t) in &a.tensors {
            let u = &b.tensors[name];
            assert_eq!(u.shape, t.shape);
            let bits = |v: &[f32]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(&u.data), bits(&t.data));
        }
        assert_eq!(b.to_bytes(), bytes);
    }

    #[test]
    fn header_is_eight_byte_aligned() {
        let bytes = sample().to_bytes();
        let n = u64::from_le_bytes(bytes[..8].try_into().unwrap());
        assert_eq!(n % 8, 0);
    }

    #[test]
    fn empty_file_is_format_error() {
        let err = TensorArchive::from_bytes(&[], Path::new("empty")).unwrap_err();
        assert!(matches!(err, Error::Format { .. }), "{err}");
    }

    #[test]
    fn truncated_data_is_format_error() {
        let mut bytes = sample().to_bytes();
        bytes.truncate(bytes.len() - 3);
        let err = TensorArchive::from_bytes(&bytes, Path::new("t")).unwrap_err();
        assert!(err.to_string().contains("truncated"), "{err}");
    }

    #[test]
    fn streamed_writer_matches_reader() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.bin");
        let entries = vec![("z".to_string(), vec![2]), ("y".to_string(), vec![1, 3])];
        let mut w = ArchiveWriter::create(&path, entries, &BTreeMap::new()).unwrap();
        w.write_next(&[1.0, 2.0]).unwrap();
        assert!(w.write_next(&[1.0]).is_err());
        w.write_next(&[3.0, 4.0, 5.0]).unwrap();
        w.finish().unwrap();
        let mut r = ArchiveReader::open(&path).unwrap();
        assert_eq!(r.header.entries[0].name, "z");
        assert_eq!(r.read(1).unwrap().data, vec![3.0, 4.0, 5.0]);
    }
}
