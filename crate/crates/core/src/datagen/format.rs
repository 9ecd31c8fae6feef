//! On-disk dataset formats.
//!
//! Binary `GDMF` (version 1, little-endian):
//!
//! ```text
//! offset  size  field
//! 0       4     magic "GDMF"
//! 4       4     u32 version (= 1)
//! 8       4     u32 dim
//! 12      8     u64 frame count
//! 20      4     u32 collection id
//! 24      ..    rows, each 20 + 8 * dim bytes:
//!               u64 sequence_id, u32 frame_index,
//!               i32 category_id (-1 = none), i32 instance_id (-1 = none),
//!               dim x f64 values
//! ```
//!
//! Text variant: an optional `# collection=<id>` line, then a header row
//! `sequence_id,frame_index,category_id,instance_id,v0,..,v{dim-1}` and one
//! comma-separated row per frame. Values are printed in shortest round-trip
//! form, so both variants are lossless.

use std::fs;
use std::path::{Path, PathBuf};

use crate::codec::{Reader, Writer};
use crate::error::{GdmError, Result};
use crate::gwr::Label;

use super::{Collection, Dataset, FeatureFrame, Sequence};

pub const GDMF_MAGIC: &[u8; 4] = b"GDMF";
pub const GDMF_VERSION: u32 = 1;
const HEADER_LEN: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataFormat {
    Binary,
    Text,
}

impl DataFormat {
    pub fn extension(self) -> &'static str {
        match self {
            DataFormat::Binary => "gdmf",
            DataFormat::Text => "csv",
        }
    }
}

fn label_code(l: Option<Label>) -> i32 {
    l.map(|v| v as i32).unwrap_or(-1)
}

fn decode_label(v: i64, what: &str) -> std::result::Result<Option<Label>, String> {
    match v {
        -1 => Ok(None),
        v if v >= 0 && v <= i32::MAX as i64 => Ok(Some(v as Label)),
        v => Err(format!("invalid {what} {v}")),
    }
}

pub fn encode_binary(collection: &Collection, dim: usize) -> Vec<u8> {
    let mut w = Writer::new();
    w.bytes(GDMF_MAGIC);
    w.u32(GDMF_VERSION);
    w.u32(dim as u32);
    w.u64(collection.frame_count() as u64);
    w.u32(collection.id);
    for s in &collection.sequences {
        for f in &s.frames {
            w.u64(f.sequence_id);
            w.u32(f.frame_index);
            w.i32(label_code(f.category_id));
            w.i32(label_code(f.instance_id));
            w.f64s(&f.vector);
        }
    }
    w.into_bytes()
}

pub fn encode_text(collection: &Collection, dim: usize) -> String {
    let mut out = format!("# collection={}\nsequence_id,frame_index,category_id,instance_id", collection.id);
    for i in 0..dim {
        out.push_str(&format!(",v{i}"));
    }
    out.push('\n');
    for s in &collection.sequences {
        for f in &s.frames {
            out.push_str(&format!(
                "{},{},{},{}",
                f.sequence_id,
                f.frame_index,
                label_code(f.category_id),
                label_code(f.instance_id)
            ));
            for v in &f.vector {
                out.push(',');
                out.push_str(&format!("{v:?}"));
            }
            out.push('\n');
        }
    }
    out
}

/// Groups rows into sequences; rows of one sequence must be contiguous and
/// share their labels.
fn assemble(id: u32, frames: Vec<FeatureFrame>) -> std::result::Result<Collection, String> {
    let mut sequences: Vec<Sequence> = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for f in frames {
        match sequences.last_mut() {
            Some(s) if s.id == f.sequence_id => {
                if s.category_id != f.category_id || s.instance_id != f.instance_id {
                    return Err(format!("sequence {} changes labels at frame {}", s.id, f.frame_index));
                }
                s.frames.push(f);
            }
            _ => {
                if !seen.insert(f.sequence_id) {
                    return Err(format!("sequence {} is not contiguous", f.sequence_id));
                }
                sequences.push(Sequence {
                    id: f.sequence_id,
                    category_id: f.category_id,
                    instance_id: f.instance_id,
                    frames: vec![f],
                });
            }
        }
    }
    Ok(Collection { id, sequences })
}

pub fn decode_binary(bytes: &[u8]) -> Result<(usize, Collection)> {
    let mut r = Reader::new(bytes);
    r.expect_magic(GDMF_MAGIC)?;
    let at = r.offset();
    let version = r.u32("version")?;
    if version != GDMF_VERSION {
        return Err(GdmError::parse(at, format!("unsupported GDMF version {version}, expected {GDMF_VERSION}")));
    }
    let at = r.offset();
    let dim = r.u32("dim")? as usize;
    if dim == 0 {
        return Err(GdmError::parse(at, "dim must be positive"));
    }
    let at = r.offset();
    let count = r.u64("frame count")?;
    let id = r.u32("collection id")?;
    let row = 20 + 8 * dim;
    let body = (bytes.len() - HEADER_LEN) as u64;
    if body != count.saturating_mul(row as u64) {
        return Err(GdmError::parse(
            at,
            format!(
                "header promises {count} rows of {row} bytes ({} bytes) but body holds {body} bytes",
                count.saturating_mul(row as u64)
            ),
        ));
    }
    let mut frames = Vec::with_capacity(count as usize);
    for n in 0..count {
        let at = r.offset();
        let sequence_id = r.u64("sequence_id")?;
        let frame_index = r.u32("frame_index")?;
        let cat = r.i32("category_id")?;
        let inst = r.i32("instance_id")?;
        let vector = r.f64s(dim, "feature values")?;
        let wrap = |m: String| GdmError::parse(at, format!("row {n}: {m}"));
        let category_id = decode_label(cat as i64, "category_id").map_err(wrap)?;
        let instance_id = decode_label(inst as i64, "instance_id").map_err(wrap)?;
        frames.push(FeatureFrame {
            vector,
            category_id,
            instance_id,
            sequence_id,
            frame_index,
        });
    }
    let c = assemble(id, frames).map_err(|m| GdmError::parse(HEADER_LEN as u64, m))?;
    Ok((dim, c))
}

pub fn decode_text(text: &str, default_id: u32) -> Result<(usize, Collection)> {
    let mut id = default_id;
    let mut dim = None;
    let mut frames = Vec::new();
    let mut offset = 0u64;
    let mut row_no = 0usize;
    for line in text.split_inclusive('\n') {
        let at = offset;
        offset += line.len() as u64;
        let line = line.trim_end_matches(['\n', '\r']);
        if line.trim().is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            if let Some(v) = rest.trim().strip_prefix("collection=") {
                id = v.trim().parse().map_err(|_| GdmError::parse(at, format!("bad collection id `{v}`")))?;
            }
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        let Some(d) = dim else {
            if cols.len() < 5 || cols[..4] != ["sequence_id", "frame_index", "category_id", "instance_id"] {
                return Err(GdmError::parse(
                    at,
                    "expected header `sequence_id,frame_index,category_id,instance_id,v0,..`",
                ));
            }
            dim = Some(cols.len() - 4);
            continue;
        };
        row_no += 1;
        let err = |m: String| GdmError::parse(at, format!("row {row_no}: {m}"));
        if cols.len() != d + 4 {
            return Err(err(format!("expected {d} values for dim={d}, found {}", cols.len() as i64 - 4)));
        }
        let int = |s: &str, what: &str| s.parse::<i64>().map_err(|_| err(format!("bad {what} `{s}`")));
        let sequence_id = int(cols[0], "sequence_id")?;
        let frame_index = int(cols[1], "frame_index")?;
        if sequence_id < 0 || frame_index < 0 || frame_index > u32::MAX as i64 {
            return Err(err("negative or oversized index".into()));
        }
        let category_id = decode_label(int(cols[2], "category_id")?, "category_id").map_err(err)?;
        let instance_id = decode_label(int(cols[3], "instance_id")?, "instance_id").map_err(err)?;
        let vector = cols[4..]
            .iter()
            .map(|s| s.parse::<f64>().map_err(|_| err(format!("bad value `{s}`"))))
            .collect::<Result<Vec<f64>>>()?;
        frames.push(FeatureFrame {
            vector,
            category_id,
            instance_id,
            sequence_id: sequence_id as u64,
            frame_index: frame_index as u32,
        });
    }
    let dim = dim.ok_or_else(|| GdmError::parse(0, "missing header row"))?;
    let c = assemble(id, frames).map_err(|m| GdmError::parse(0, m))?;
    Ok((dim, c))
}

pub fn write_collection_file(collection: &Collection, dim: usize, path: &Path, format: DataFormat) -> Result<()> {
    match format {
        DataFormat::Binary => fs::write(path, encode_binary(collection, dim))?,
        DataFormat::Text => fs::write(path, encode_text(collection, dim))?,
    }
    Ok(())
}

/// Writes one file per collection into `dir` and returns the paths.
pub fn write_dataset(dataset: &Dataset, dir: &Path, format: DataFormat) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut paths = Vec::new();
    for c in &dataset.collections {
        let p = dir.join(format!("collection_{:02}.{}", c.id, format.extension()));
        write_collection_file(c, dataset.dim, &p, format)?;
        paths.push(p);
    }
    Ok(paths)
}

fn context(path: &Path, e: GdmError) -> GdmError {
    match e {
        GdmError::Parse { offset, message } => GdmError::Parse {
            offset,
            message: format!("{}: {message}", path.display()),
        },
        other => other,
    }
}

/// Reads a single collection file, binary or text (sniffed by magic).
pub fn read_dataset_file(path: &Path, default_id: u32) -> Result<(usize, Collection)> {
    let bytes = fs::read(path)?;
    let is_text = path.extension().map(|e| e == "csv" || e == "txt").unwrap_or(false) && !bytes.starts_with(GDMF_MAGIC);
    let res = if is_text {
        let text = String::from_utf8(bytes).map_err(|e| GdmError::parse(e.utf8_error().valid_up_to() as u64, "invalid UTF-8"))?;
        decode_text(&text, default_id)
    } else {
        decode_binary(&bytes)
    };
    res.map_err(|e| context(path, e))
}

/// Data files making up the dataset at `path`: the `.gdmf`/`.csv` files of a
/// directory in name order, or the path itself.
pub fn dataset_files(path: &Path) -> Result<Vec<PathBuf>> {
    let files: Vec<PathBuf> = if path.is_dir() {
        let mut v: Vec<PathBuf> = fs::read_dir(path)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().map(|e| e == "gdmf" || e == "csv").unwrap_or(false))
            .collect();
        v.sort();
        v
    } else {
        vec![path.to_path_buf()]
    };
    if files.is_empty() {
        return Err(GdmError::Dataset(format!("no .gdmf or .csv files in {}", path.display())));
    }
    Ok(files)
}

/// Reads a dataset from a directory of collection files (sorted by name) or
/// from a single file.
pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let files = dataset_files(path)?;
    let mut dim = None;
    let mut collections = Vec::new();
    for (i, f) in files.iter().enumerate() {
        let (d, c) = read_dataset_file(f, i as u32)?;
        match dim {
            None => dim = Some(d),
            Some(prev) if prev != d => {
                return Err(GdmError::Dataset(format!(
                    "{} has dim {d} but earlier files have dim {prev}",
                    f.display()
                )))
            }
            _ => {}
        }
        collections.push(c);
    }
    Ok(Dataset {
        dim: dim.unwrap_or(0),
        collections,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{generate, CollectionSpec};

    fn tiny() -> Dataset {
        generate(&CollectionSpec {
            categories: 2,
            instances_per_category: 2,
            frames_per_sequence: 3,
            dim: 4,
            collections: 2,
            test_collections: 1,
            ..CollectionSpec::default()
        })
        .unwrap()
    }

    #[test]
    fn binary_round_trip() {
        let ds = tiny();
        let dir = tempfile::tempdir().unwrap();
        write_dataset(&ds, dir.path(), DataFormat::Binary).unwrap();
        assert_eq!(read_dataset(dir.path()).unwrap(), ds);
    }

    #[test]
    fn text_round_trip() {
        let ds = tiny();
        let dir = tempfile::tempdir().unwrap();
        write_dataset(&ds, dir.path(), DataFormat::Text).unwrap();
        assert_eq!(read_dataset(dir.path()).unwrap(), ds);
    }

    #[test]
    fn header_layout() {
        let ds = tiny();
        let bytes = encode_binary(&ds.collections[1], 4);
        assert_eq!(&bytes[..4], b"GDMF");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 4);
        assert_eq!(u64::from_le_bytes(bytes[12..20].try_into().unwrap()), 12);
        assert_eq!(u32::from_le_bytes(bytes[20..24].try_into().unwrap()), 1);
        assert_eq!(bytes.len(), 24 + 12 * (20 + 32));
    }

    #[test]
    fn worked_example_bytes() {
        let frame = FeatureFrame {
            vector: vec![1.0, -0.5],
            category_id: Some(1),
            instance_id: Some(3),
            sequence_id: 7,
            frame_index: 0,
        };
        let c = Collection {
            id: 4,
            sequences: vec![Sequence {
                id: 7,
                category_id: Some(1),
                instance_id: Some(3),
                frames: vec![frame],
            }],
        };
        let bytes = encode_binary(&c, 2);
        let expected: [u8; 60] = [
            0x47, 0x44, 0x4d, 0x46, 1, 0, 0, 0, 2, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0, 4, 0, 0, 0, //
            7, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1, 0, 0, 0, 3, 0, 0, 0, //
            0, 0, 0, 0, 0, 0, 0xf0, 0x3f, 0, 0, 0, 0, 0, 0, 0xe0, 0xbf,
        ];
        assert_eq!(bytes, expected);
        assert_eq!(decode_binary(&bytes).unwrap(), (2, c));
    }

    #[test]
    fn wrong_magic_names_expected() {
        let ds = tiny();
        let mut bytes = encode_binary(&ds.collections[0], 4);
        bytes[..4].copy_from_slice(b"NOPE");
        let err = decode_binary(&bytes).unwrap_err().to_string();
        assert!(err.contains("GDMF"), "{err}");
        assert!(err.contains("byte 0"), "{err}");
    }

    #[test]
    fn truncated_binary_is_rejected() {
        let ds = tiny();
        let bytes = encode_binary(&ds.collections[0], 4);
        let err = decode_binary(&bytes[..bytes.len() - 5]).unwrap_err();
        assert!(matches!(err, GdmError::Parse { offset: 12, .. }), "{err}");
        let err = decode_binary(&bytes[..10]).unwrap_err();
        assert!(matches!(err, GdmError::Parse { .. }));
    }

    #[test]
    fn short_text_row_reports_row_number() {
        let mut text = String::from("sequence_id,frame_index,category_id,instance_id");
        for i in 0..256 {
            text.push_str(&format!(",v{i}"));
        }
        text.push('\n');
        text.push_str("0,0,1,2");
        for _ in 0..256 {
            text.push_str(",0.5");
        }
        text.push('\n');
        text.push_str("0,1,1,2");
        for _ in 0..255 {
            text.push_str(",0.5");
        }
        text.push('\n');
        let err = decode_text(&text, 0).unwrap_err().to_string();
        assert!(err.contains("row 2"), "{err}");
        assert!(err.contains("dim=256"), "{err}");
    }

    #[test]
    fn non_contiguous_sequences_are_rejected() {
        let text = "sequence_id,frame_index,category_id,instance_id,v0\n0,0,0,0,1\n1,0,0,1,1\n0,1,0,0,1\n";
        assert!(decode_text(text, 0).is_err());
    }
}
