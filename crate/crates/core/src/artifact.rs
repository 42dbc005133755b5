//! On-disk formats.
//!
//! * Feature image: 8-byte magic `GFIMAGE\0`, then little-endian `u32`
//!   version, width and height, then `width * height` little-endian `f64`
//!   values in row-major order.
//! * Observation sequence: text, two `#` header lines (version, source id)
//!   followed by one value per line.
//! * HMM and classifier: pretty-printed JSON with a leading `version` field
//!   and the feature fingerprint of the configuration they were built with.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::classify::ClassifierState;
use crate::error::{Error, Result};
use crate::features::ObservationSequence;
use crate::gabor::FeatureImage;
use crate::grid::Grid;
use crate::phmm::CyclicHmm;

pub const FEATURE_MAGIC: &[u8; 8] = b"GFIMAGE\0";
pub const FEATURE_VERSION: u32 = 1;
pub const SEQUENCE_VERSION: u32 = 1;
pub const MODEL_VERSION: u32 = 1;
pub const CLASSIFIER_VERSION: u32 = 1;

pub fn encode_feature_image(img: &FeatureImage) -> Vec<u8> {
    let mut out = Vec::with_capacity(20 + 8 * img.grid().len());
    out.extend_from_slice(FEATURE_MAGIC);
    out.extend_from_slice(&FEATURE_VERSION.to_le_bytes());
    out.extend_from_slice(&(img.width() as u32).to_le_bytes());
    out.extend_from_slice(&(img.height() as u32).to_le_bytes());
    for v in img.grid().as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_feature_image(bytes: &[u8], path: &Path) -> Result<FeatureImage> {
    if bytes.len() < 8 || &bytes[..8] != FEATURE_MAGIC {
        return Err(Error::UnknownFormat { path: path.to_path_buf() });
    }
    if bytes.len() < 20 {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            detail: "header".into(),
        });
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("4 bytes"));
    let version = word(8);
    if version != FEATURE_VERSION {
        return Err(Error::Version {
            what: "feature image",
            found: version,
            expected: FEATURE_VERSION,
        });
    }
    let (w, h) = (word(12) as usize, word(16) as usize);
    if w == 0 || h == 0 {
        return Err(Error::ZeroDimensions { path: path.to_path_buf() });
    }
    let body = &bytes[20..];
    if body.len() != 8 * w * h {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            detail: format!("{} data bytes for a {w}x{h} image", body.len()),
        });
    }
    let values = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    FeatureImage::new(Grid::from_vec(w, h, values)).map_err(|e| Error::Malformed {
        path: path.to_path_buf(),
        detail: e.to_string(),
    })
}

pub fn write_feature_image(path: &Path, img: &FeatureImage) -> Result<()> {
    write_bytes(path, &encode_feature_image(img))
}

pub fn read_feature_image(path: &Path) -> Result<FeatureImage> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_feature_image(&bytes, path)
}

pub fn encode_sequence(seq: &ObservationSequence) -> String {
    let mut s = format!("# version={SEQUENCE_VERSION}\n# source={}\n", seq.source_id.replace('\n', " "));
    for v in &seq.values {
        s.push_str(&v.to_string());
        s.push('\n');
    }
    s
}

pub fn decode_sequence(text: &str, path: &Path) -> Result<ObservationSequence> {
    let mut source_id = String::new();
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if let Some(meta) = line.strip_prefix('#') {
            let meta = meta.trim();
            if let Some(v) = meta.strip_prefix("version=") {
                let found: u32 = v.parse().map_err(|_| Error::Malformed {
                    path: path.to_path_buf(),
                    detail: format!("bad version '{v}'"),
                })?;
                if found != SEQUENCE_VERSION {
                    return Err(Error::Version {
                        what: "sequence",
                        found,
                        expected: SEQUENCE_VERSION,
                    });
                }
            } else if let Some(id) = meta.strip_prefix("source=") {
                source_id = id.to_string();
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        values.push(line.parse::<f64>().map_err(|_| Error::Malformed {
            path: path.to_path_buf(),
            detail: format!("line {}: '{line}' is not a number", i + 1),
        })?);
    }
    Ok(ObservationSequence { source_id, values })
}

pub fn write_sequence(path: &Path, seq: &ObservationSequence) -> Result<()> {
    write_bytes(path, encode_sequence(seq).as_bytes())
}

pub fn read_sequence(path: &Path) -> Result<ObservationSequence> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    decode_sequence(&text, path)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub version: u32,
    pub n_states: usize,
    /// Row-major `n_states × n_states`.
    pub trans: Vec<f64>,
    pub emit_mean: Vec<f64>,
    pub emit_var: Vec<f64>,
    pub init: Vec<f64>,
    pub var_floor: f64,
    pub fingerprint: String,
}

impl ModelFile {
    pub fn new(hmm: &CyclicHmm, fingerprint: &str) -> Self {
        ModelFile {
            version: MODEL_VERSION,
            n_states: hmm.n_states(),
            trans: hmm.trans().to_vec(),
            emit_mean: hmm.emit_mean().to_vec(),
            emit_var: hmm.emit_var().to_vec(),
            init: hmm.init().to_vec(),
            var_floor: hmm.var_floor(),
            fingerprint: fingerprint.to_string(),
        }
    }

    pub fn to_model(&self) -> Result<CyclicHmm> {
        if self.version != MODEL_VERSION {
            return Err(Error::Version {
                what: "model",
                found: self.version,
                expected: MODEL_VERSION,
            });
        }
        if self.emit_mean.len() != self.n_states {
            return Err(Error::DimensionMismatch(format!(
                "model declares {} states but has {} emission means",
                self.n_states,
                self.emit_mean.len()
            )));
        }
        CyclicHmm::new(
            self.trans.clone(),
            self.emit_mean.clone(),
            self.emit_var.clone(),
            self.init.clone(),
            self.var_floor,
        )
    }
}

/// One HMM per class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSetFile {
    pub version: u32,
    pub fingerprint: String,
    pub classes: Vec<String>,
    pub models: Vec<ModelFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifierFile {
    pub version: u32,
    pub fingerprint: String,
    /// SHA-256 of the model file the training paths were decoded with.
    pub model_digest: String,
    pub tau: f64,
    pub state: ClassifierState,
}

pub fn check_fingerprint(found: &str, expected: &str) -> Result<()> {
    if found != expected {
        return Err(Error::FingerprintMismatch {
            expected: expected.to_string(),
            found: found.to_string(),
        });
    }
    Ok(())
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("artifact serializes to JSON");
    s.push('\n');
    s
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_bytes(path, to_json(value).as_bytes())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

/// Loads a model and rejects it unless it was built with `fingerprint`.
pub fn load_model(path: &Path, fingerprint: &str) -> Result<(CyclicHmm, String)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let file: ModelFile = serde_json::from_slice(&bytes).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    check_fingerprint(&file.fingerprint, fingerprint)?;
    Ok((file.to_model()?, digest(&bytes)))
}

/// Loads a classifier and rejects it unless it matches both the feature
/// fingerprint and the digest of the model it will be used with.
pub fn load_classifier(path: &Path, fingerprint: &str, model_digest: &str) -> Result<ClassifierFile> {
    let file: ClassifierFile = read_json(path)?;
    if file.version != CLASSIFIER_VERSION {
        return Err(Error::Version {
            what: "classifier",
            found: file.version,
            expected: CLASSIFIER_VERSION,
        });
    }
    check_fingerprint(&file.fingerprint, fingerprint)?;
    if file.model_digest != model_digest {
        return Err(Error::FingerprintMismatch {
            expected: format!("model {model_digest}"),
            found: format!("model {}", file.model_digest),
        });
    }
    Ok(file)
}

pub fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
