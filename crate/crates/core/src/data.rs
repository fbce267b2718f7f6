//! File formats and dataset plumbing: IDX image/label archives, delimited
//! text matrices, column normalization, one-hot labels, and the binary
//! model container.
//!
//! The model container is fully deterministic: a fixed magic, a JSON
//! header with a stable field order, and little-endian row-major `f64`
//! payloads. Writing the same trained model twice produces identical
//! bytes.

use crate::enhance::EnhancementMap;
use crate::error::{Error, Result};
use crate::train::{TrainConfig, TrainedModel};
use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Expected magic of an IDX image file: unsigned bytes, three dimensions.
pub const IDX_IMAGE_MAGIC: u32 = 0x0000_0803;
/// Expected magic of an IDX label file: unsigned bytes, one dimension.
pub const IDX_LABEL_MAGIC: u32 = 0x0000_0801;

/// First bytes of every model file.
pub const MODEL_MAGIC: &[u8; 8] = b"RVFLDL1\n";
/// Version written into and required from the model header.
pub const MODEL_FORMAT_VERSION: u32 = 1;

/// How raw data columns are rescaled before training and querying.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormalizeMode {
    /// Rescale every column to unit Euclidean norm.
    L2,
    /// Divide every value by 255.
    Pixel,
    /// Leave values as loaded.
    Off,
}

/// A data matrix with one sample per column, plus labels when present.
#[derive(Debug, Clone)]
pub struct LabeledDataset {
    pub data: Array2<f64>,
    pub labels: Vec<usize>,
    /// One more than the largest label; zero when the set is unlabeled.
    pub class_count: usize,
}

fn read_be_u32(bytes: &[u8], offset: usize, path: &Path) -> Result<u32> {
    let end = offset + 4;
    if bytes.len() < end {
        return Err(Error::IdxTruncated {
            path: path.display().to_string(),
            expected: end,
            found: bytes.len(),
        });
    }
    Ok(u32::from_be_bytes([
        bytes[offset],
        bytes[offset + 1],
        bytes[offset + 2],
        bytes[offset + 3],
    ]))
}

/// Loads an IDX image file into a `(rows * cols) x count` matrix of raw
/// pixel values in `[0, 255]`. Pixels of each image are flattened
/// row-major into one column.
pub fn load_idx_images(path: &Path) -> Result<Array2<f64>> {
    let bytes = std::fs::read(path)?;
    let magic = read_be_u32(&bytes, 0, path)?;
    if magic != IDX_IMAGE_MAGIC {
        return Err(Error::IdxMagic {
            path: path.display().to_string(),
            expected: IDX_IMAGE_MAGIC,
            found: magic,
        });
    }
    let count = read_be_u32(&bytes, 4, path)? as usize;
    let rows = read_be_u32(&bytes, 8, path)? as usize;
    let cols = read_be_u32(&bytes, 12, path)? as usize;
    let pixels = rows * cols;
    let expected = 16 + count * pixels;
    if bytes.len() < expected {
        return Err(Error::IdxTruncated {
            path: path.display().to_string(),
            expected,
            found: bytes.len(),
        });
    }
    let mut data = Array2::<f64>::zeros((pixels, count));
    for n in 0..count {
        let base = 16 + n * pixels;
        for p in 0..pixels {
            data[[p, n]] = bytes[base + p] as f64;
        }
    }
    Ok(data)
}

/// Loads an IDX label file into plain label values.
pub fn load_idx_labels(path: &Path) -> Result<Vec<usize>> {
    let bytes = std::fs::read(path)?;
    let magic = read_be_u32(&bytes, 0, path)?;
    if magic != IDX_LABEL_MAGIC {
        return Err(Error::IdxMagic {
            path: path.display().to_string(),
            expected: IDX_LABEL_MAGIC,
            found: magic,
        });
    }
    let count = read_be_u32(&bytes, 4, path)? as usize;
    let expected = 8 + count;
    if bytes.len() < expected {
        return Err(Error::IdxTruncated {
            path: path.display().to_string(),
            expected,
            found: bytes.len(),
        });
    }
    Ok(bytes[8..8 + count].iter().map(|&b| b as usize).collect())
}

/// Loads paired IDX image and label files, enforcing matching counts.
pub fn load_idx(path_images: &Path, path_labels: &Path) -> Result<LabeledDataset> {
    let data = load_idx_images(path_images)?;
    let labels = load_idx_labels(path_labels)?;
    if data.ncols() != labels.len() {
        return Err(Error::IdxCountMismatch {
            images: data.ncols(),
            labels: labels.len(),
        });
    }
    let class_count = labels.iter().max().map_or(0, |&m| m + 1);
    Ok(LabeledDataset {
        data,
        labels,
        class_count,
    })
}

/// Loads a delimited text matrix with one sample per line (comma
/// separated, LF or CRLF endings) into sample columns. With `has_labels`
/// set, the final field of every line is an integer class label.
pub fn load_csv_matrix(path: &Path, has_labels: bool) -> Result<LabeledDataset> {
    let text = std::fs::read_to_string(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut labels: Vec<usize> = Vec::new();
    let mut width: Option<usize> = None;
    for (line_index, raw_line) in text.lines().enumerate() {
        let row_number = line_index + 1;
        let line = raw_line.trim_end_matches('\r');
        if line.is_empty() {
            if line_index + 1 == text.lines().count() {
                continue;
            }
            return Err(Error::Parse {
                row: row_number,
                column: 1,
                reason: "empty line inside the table".into(),
            });
        }
        let fields: Vec<&str> = line.split(',').collect();
        let expected = *width.get_or_insert(fields.len());
        if fields.len() != expected {
            return Err(Error::Parse {
                row: row_number,
                column: fields.len().min(expected) + 1,
                reason: format!("expected {expected} fields, found {}", fields.len()),
            });
        }
        let value_fields = if has_labels {
            if fields.len() < 2 {
                return Err(Error::Parse {
                    row: row_number,
                    column: 1,
                    reason: "a labeled row needs at least one feature and a label".into(),
                });
            }
            let label_text = fields[fields.len() - 1].trim();
            let label: usize = label_text.parse().map_err(|_| Error::Parse {
                row: row_number,
                column: fields.len(),
                reason: format!("invalid integer label {label_text:?}"),
            })?;
            labels.push(label);
            &fields[..fields.len() - 1]
        } else {
            &fields[..]
        };
        let mut row = Vec::with_capacity(value_fields.len());
        for (field_index, field) in value_fields.iter().enumerate() {
            let value: f64 = field.trim().parse().map_err(|_| Error::Parse {
                row: row_number,
                column: field_index + 1,
                reason: format!("invalid number {:?}", field.trim()),
            })?;
            row.push(value);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            row: 1,
            column: 1,
            reason: "the file holds no data rows".into(),
        });
    }
    let n = rows.len();
    let d = rows[0].len();
    let mut data = Array2::<f64>::zeros((d, n));
    for (j, row) in rows.iter().enumerate() {
        for (i, &v) in row.iter().enumerate() {
            data[[i, j]] = v;
        }
    }
    let class_count = labels.iter().max().map_or(0, |&m| m + 1);
    Ok(LabeledDataset {
        data,
        labels,
        class_count,
    })
}

/// Rescales every column to unit Euclidean norm in place.
pub fn normalize_columns(data: &mut Array2<f64>) -> Result<()> {
    for (index, mut col) in data.axis_iter_mut(Axis(1)).enumerate() {
        let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::ZeroNormColumn { index });
        }
        col.mapv_inplace(|v| v / norm);
    }
    Ok(())
}

/// Applies the configured rescaling to raw data columns.
pub fn apply_normalization(data: &mut Array2<f64>, mode: NormalizeMode) -> Result<()> {
    match mode {
        NormalizeMode::L2 => normalize_columns(data),
        NormalizeMode::Pixel => {
            data.mapv_inplace(|v| v / 255.0);
            Ok(())
        }
        NormalizeMode::Off => Ok(()),
    }
}

/// One-hot label matrix with `class_count` rows and one column per label.
pub fn one_hot(labels: &[usize], class_count: usize) -> Result<Array2<f64>> {
    if class_count == 0 {
        return Err(Error::InvalidArgument {
            name: "class_count",
            reason: "one-hot encoding needs at least one class".into(),
        });
    }
    let mut h = Array2::<f64>::zeros((class_count, labels.len()));
    for (j, &label) in labels.iter().enumerate() {
        if label >= class_count {
            return Err(Error::InvalidArgument {
                name: "labels",
                reason: format!("label {label} exceeds class count {class_count}"),
            });
        }
        h[[label, j]] = 1.0;
    }
    Ok(h)
}

#[derive(Debug, Serialize, Deserialize)]
struct HeaderDims {
    d: usize,
    k: usize,
    l: usize,
    c: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelHeader {
    format_version: u32,
    dims: HeaderDims,
    config: TrainConfig,
    child_seeds: Vec<u64>,
    activation: String,
    provenance: Vec<crate::train::ProvenanceRecord>,
}

fn write_matrix(out: &mut Vec<u8>, m: &Array2<f64>) {
    out.extend_from_slice(&(m.nrows() as u32).to_le_bytes());
    out.extend_from_slice(&(m.ncols() as u32).to_le_bytes());
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            out.extend_from_slice(&m[[r, c]].to_le_bytes());
        }
    }
}

struct MatrixReader<'a> {
    bytes: &'a [u8],
    offset: usize,
}

impl<'a> MatrixReader<'a> {
    fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        if self.bytes.len() < self.offset + len {
            return Err(Error::ModelDims {
                field: "payload",
                header: self.offset + len,
                payload: self.bytes.len(),
            });
        }
        let slice = &self.bytes[self.offset..self.offset + len];
        self.offset += len;
        Ok(slice)
    }

    fn read_matrix(&mut self) -> Result<Array2<f64>> {
        let rows_bytes = self.take(4)?;
        let cols_bytes = self.take(4)?;
        let rows = u32::from_le_bytes(rows_bytes.try_into().unwrap()) as usize;
        let cols = u32::from_le_bytes(cols_bytes.try_into().unwrap()) as usize;
        let payload = self.take(rows * cols * 8)?;
        let mut values = Vec::with_capacity(rows * cols);
        for chunk in payload.chunks_exact(8) {
            values.push(f64::from_le_bytes(chunk.try_into().unwrap()));
        }
        Ok(Array2::from_shape_vec((rows, cols), values)
            .expect("length rows*cols matches the requested shape"))
    }
}

/// Serializes a trained model: magic, little-endian header length, JSON
/// header, then the dictionary, label map, enhancement weights, and
/// enhancement biases as dimension-prefixed matrices. An unsupervised
/// model writes a `0 x (k + l)` label map sentinel.
pub fn save_model(path: &Path, model: &TrainedModel) -> Result<()> {
    let k = model.config.k;
    let l = model.config.enhancement_nodes();
    let header = ModelHeader {
        format_version: MODEL_FORMAT_VERSION,
        dims: HeaderDims {
            d: model.dictionary.nrows(),
            k,
            l,
            c: model.class_count,
        },
        config: model.config.clone(),
        child_seeds: model.provenance.iter().map(|p| p.seed).collect(),
        activation: crate::enhance::ACTIVATION_TAG.to_string(),
        provenance: model.provenance.clone(),
    };
    let header_bytes = serde_json::to_vec(&header)?;
    let mut out = Vec::new();
    out.extend_from_slice(MODEL_MAGIC);
    out.extend_from_slice(&(header_bytes.len() as u32).to_le_bytes());
    out.extend_from_slice(&header_bytes);
    write_matrix(&mut out, &model.dictionary);
    match &model.classifier {
        Some(w) => write_matrix(&mut out, w),
        None => write_matrix(&mut out, &Array2::<f64>::zeros((0, k + l))),
    }
    write_matrix(&mut out, model.map.weights());
    let biases = model
        .map
        .biases()
        .clone()
        .into_shape_with_order((l, 1))
        .expect("bias vector reshapes to a column");
    write_matrix(&mut out, &biases);
    std::fs::write(path, &out)?;
    Ok(())
}

/// Reads a model container back, verifying magic, version, and the
/// consistency of header dimensions with every payload matrix.
pub fn load_model(path: &Path) -> Result<TrainedModel> {
    let bytes = std::fs::read(path)?;
    if bytes.len() < MODEL_MAGIC.len() + 4 {
        return Err(Error::ModelMagic {
            expected: String::from_utf8_lossy(MODEL_MAGIC).into_owned(),
            found: String::from_utf8_lossy(&bytes).into_owned(),
        });
    }
    if &bytes[..MODEL_MAGIC.len()] != MODEL_MAGIC {
        return Err(Error::ModelMagic {
            expected: String::from_utf8_lossy(MODEL_MAGIC).into_owned(),
            found: String::from_utf8_lossy(&bytes[..MODEL_MAGIC.len()]).into_owned(),
        });
    }
    let header_len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    if bytes.len() < 12 + header_len {
        return Err(Error::ModelDims {
            field: "header",
            header: 12 + header_len,
            payload: bytes.len(),
        });
    }
    let header_value: serde_json::Value = serde_json::from_slice(&bytes[12..12 + header_len])?;
    let found_version = header_value
        .get("format_version")
        .and_then(serde_json::Value::as_u64)
        .unwrap_or(0) as u32;
    if found_version != MODEL_FORMAT_VERSION {
        return Err(Error::ModelVersion {
            found: found_version,
            supported: MODEL_FORMAT_VERSION,
        });
    }
    let header: ModelHeader = serde_json::from_value(header_value)?;
    let mut reader = MatrixReader {
        bytes: &bytes,
        offset: 12 + header_len,
    };
    let dictionary = reader.read_matrix()?;
    let classifier = reader.read_matrix()?;
    let weights = reader.read_matrix()?;
    let biases = reader.read_matrix()?;

    let HeaderDims { d, k, l, c } = header.dims;
    let width = k + l;
    if dictionary.nrows() != d {
        return Err(Error::ModelDims {
            field: "dictionary rows",
            header: d,
            payload: dictionary.nrows(),
        });
    }
    if dictionary.ncols() != width {
        return Err(Error::ModelDims {
            field: "dictionary columns",
            header: width,
            payload: dictionary.ncols(),
        });
    }
    if classifier.nrows() != c {
        return Err(Error::ModelDims {
            field: "classifier rows",
            header: c,
            payload: classifier.nrows(),
        });
    }
    if classifier.ncols() != width {
        return Err(Error::ModelDims {
            field: "classifier columns",
            header: width,
            payload: classifier.ncols(),
        });
    }
    if weights.nrows() != l || weights.ncols() != k {
        return Err(Error::ModelDims {
            field: "enhancement weights",
            header: l,
            payload: weights.nrows(),
        });
    }
    if biases.nrows() != l || biases.ncols() != 1 {
        return Err(Error::ModelDims {
            field: "enhancement biases",
            header: l,
            payload: biases.nrows(),
        });
    }

    let bias_vec = Array1::from_iter(biases.column(0).iter().copied());
    let map = EnhancementMap::from_parts(weights, bias_vec)?;
    Ok(TrainedModel {
        dictionary,
        classifier: if c == 0 { None } else { Some(classifier) },
        map,
        class_count: c,
        config: header.config,
        provenance: header.provenance,
    })
}
