//! Dataset manifests: a JSON header line followed by delimited rows.
//!
//! Format:
//!
//! ```text
//! {"mode":"multiclass-7","attributes":{"gender":["Male","Female"],"race":["Caucasian","African-American","Asian"]},"image_root":".","exclude":{"gender":["Unsure"]}}
//! id,path,label(s),gender,race,split
//! 00001,images/a.png,3,Male,Caucasian,train
//! ```
//!
//! Labels are a class index in multiclass mode and `;`-separated 0/1 bits
//! in multilabel mode. Paths are relative to the manifest location; rows
//! generated synthetically reference a sidecar `bin:` file holding raw f64
//! pixels. Rows whose attribute value appears in `exclude` are dropped at
//! load time (and counted); values outside the vocabulary are errors.

use crate::data::preprocess::{decode_image, preprocess_tensor, PreprocessConfig};
use crate::data::{LabelData, Sample, Split};
use crate::error::{Error, Result};
use crate::model::TaskMode;
use crate::tensor::Tensor;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestHeader {
    /// "multiclass-<M>" or "multilabel-<L>".
    pub mode: String,
    pub attributes: BTreeMap<String, Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_root: Option<String>,
    /// Required for `bin:`/inline rows: the stored [H, W, C].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_shape: Option<[usize; 3]>,
    /// Attribute values excluded at load time (e.g. gender "Unsure").
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub exclude: BTreeMap<String, Vec<String>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SampleSource {
    /// Image file path relative to the manifest.
    Path(String),
    /// In-memory pixel data (synthetic datasets before saving).
    Inline(Tensor),
    /// Index into a sidecar binary of f64 pixels.
    Bin { file: String, index: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRow {
    pub id: String,
    pub source: SampleSource,
    pub label: LabelData,
    pub gender: String,
    pub race: String,
    pub split: Split,
}

#[derive(Debug, Clone)]
pub struct DatasetManifest {
    pub mode: TaskMode,
    /// Classes in multiclass mode, label bits in multilabel mode.
    pub num_labels: usize,
    pub attributes: BTreeMap<String, Vec<String>>,
    pub exclude: BTreeMap<String, Vec<String>>,
    /// Base directory for relative paths (the manifest's directory).
    pub image_root: Option<PathBuf>,
    pub image_shape: Option<[usize; 3]>,
    pub rows: Vec<ManifestRow>,
}

/// Load statistics reported alongside resolved samples.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LoadReport {
    pub loaded: usize,
    pub excluded: usize,
    pub undecodable: usize,
}

impl DatasetManifest {
    pub fn vocabulary(&self, attribute: &str) -> Result<&[String]> {
        self.attributes
            .get(attribute)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::Config(format!("manifest declares no attribute '{attribute}'")))
    }

    /// Per-(attribute value, class) sample counts over training rows.
    pub fn train_counts(&self, attribute: &str) -> BTreeMap<(String, usize), usize> {
        let mut counts = BTreeMap::new();
        for row in self.rows.iter().filter(|r| r.split == Split::Train) {
            let value = match attribute {
                "race" => row.race.clone(),
                _ => row.gender.clone(),
            };
            let class = match &row.label {
                LabelData::Class(c) => *c,
                LabelData::MultiHot(_) => 0,
            };
            *counts.entry((value, class)).or_insert(0) += 1;
        }
        counts
    }

    /// Materialize rows into preprocessed samples, skipping undecodable
    /// files with a warning.
    pub fn resolve_samples(&self, pp: &PreprocessConfig) -> Result<(Vec<Sample>, LoadReport)> {
        let mut samples = Vec::with_capacity(self.rows.len());
        let mut report = LoadReport::default();
        let mut bin_cache: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for row in &self.rows {
            let input = match &row.source {
                SampleSource::Inline(t) => preprocess_tensor(t, pp)?,
                SampleSource::Path(rel) => {
                    let path = match &self.image_root {
                        Some(root) => root.join(rel),
                        None => PathBuf::from(rel),
                    };
                    match decode_image(&path, pp.target[2]) {
                        Ok(raw) => crate::data::preprocess::preprocess_image(&raw, pp)?,
                        Err(e) => {
                            log::warn!("skipping undecodable sample '{}': {e}", row.id);
                            report.undecodable += 1;
                            continue;
                        }
                    }
                }
                SampleSource::Bin { file, index } => {
                    let shape = self.image_shape.ok_or_else(|| {
                        Error::Config("bin rows require image_shape in the header".into())
                    })?;
                    let pixels = shape[0] * shape[1] * shape[2];
                    if !bin_cache.contains_key(file) {
                        let path = match &self.image_root {
                            Some(root) => root.join(file),
                            None => PathBuf::from(file),
                        };
                        bin_cache.insert(file.clone(), read_bin(&path)?);
                    }
                    let data = &bin_cache[file];
                    let start = index * pixels;
                    if start + pixels > data.len() {
                        return Err(Error::Input(format!(
                            "bin index {index} out of range for '{file}'"
                        )));
                    }
                    let t = Tensor::new(shape.to_vec(), data[start..start + pixels].to_vec())?;
                    preprocess_tensor(&t, pp)?
                }
            };
            samples.push(Sample {
                id: row.id.clone(),
                input,
                label: row.label.clone(),
                gender: row.gender.clone(),
                race: row.race.clone(),
                subject: None,
                split: row.split,
            });
            report.loaded += 1;
        }
        Ok((samples, report))
    }
}

fn parse_mode(mode: &str) -> Result<(TaskMode, usize)> {
    let (kind, count) = mode
        .rsplit_once('-')
        .ok_or_else(|| Error::Parse { row: None, msg: format!("bad mode '{mode}'") })?;
    let n: usize = count
        .parse()
        .map_err(|_| Error::Parse { row: None, msg: format!("bad mode count in '{mode}'") })?;
    match kind {
        "multiclass" => Ok((TaskMode::Multiclass, n)),
        "multilabel" => Ok((TaskMode::Multilabel, n)),
        _ => Err(Error::Parse { row: None, msg: format!("unknown mode kind '{kind}'") }),
    }
}

fn mode_string(mode: TaskMode, num_labels: usize) -> String {
    match mode {
        TaskMode::Multiclass => format!("multiclass-{num_labels}"),
        TaskMode::Multilabel => format!("multilabel-{num_labels}"),
    }
}

/// Parse a manifest file. Rows with excluded attribute values are dropped
/// (logged); unknown attribute values are errors listing the vocabulary.
pub fn load_manifest(path: &Path) -> Result<DatasetManifest> {
    let mut text = String::new();
    std::fs::File::open(path)
        .map_err(|e| Error::Input(format!("cannot open manifest '{}': {e}", path.display())))?
        .read_to_string(&mut text)?;
    let mut lines = text.lines().enumerate();
    let (_, header_line) = lines
        .next()
        .ok_or_else(|| Error::Parse { row: Some(1), msg: "empty manifest".into() })?;
    let header: ManifestHeader = serde_json::from_str(header_line)
        .map_err(|e| Error::Parse { row: Some(1), msg: format!("bad header: {e}") })?;
    let (mode, num_labels) = parse_mode(&header.mode)?;

    let base = path.parent().map(Path::to_path_buf);
    let image_root = match (&header.image_root, base) {
        (Some(rel), Some(base)) => Some(base.join(rel)),
        (Some(rel), None) => Some(PathBuf::from(rel)),
        (None, base) => base,
    };

    let mut manifest = DatasetManifest {
        mode,
        num_labels,
        attributes: header.attributes.clone(),
        exclude: header.exclude.clone(),
        image_root,
        image_shape: header.image_shape,
        rows: Vec::new(),
    };

    let mut excluded = 0usize;
    let mut seen_ids = std::collections::BTreeSet::new();
    for (idx, line) in lines {
        let row_no = idx + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("id,") {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(Error::Parse {
                row: Some(row_no),
                msg: format!("expected 6 fields (id,path,label,gender,race,split), got {}", fields.len()),
            });
        }
        let [id, source, label, gender, race, split] =
            [fields[0], fields[1], fields[2], fields[3], fields[4], fields[5]];
        if !seen_ids.insert(id.to_string()) {
            return Err(Error::Parse { row: Some(row_no), msg: format!("duplicate id '{id}'") });
        }

        // Exclusion rule first (e.g. gender "Unsure").
        let excluded_row = manifest
            .exclude
            .get("gender")
            .map(|vals| vals.iter().any(|v| v == gender))
            .unwrap_or(false)
            || manifest
                .exclude
                .get("race")
                .map(|vals| vals.iter().any(|v| v == race))
                .unwrap_or(false);
        if excluded_row {
            log::info!("row {row_no}: excluding sample '{id}' per exclusion rule");
            excluded += 1;
            continue;
        }

        for (attr, value) in [("gender", gender), ("race", race)] {
            if let Some(vocab) = manifest.attributes.get(attr) {
                if !vocab.iter().any(|v| v == value) {
                    return Err(Error::Parse {
                        row: Some(row_no),
                        msg: format!(
                            "unknown {attr} value '{value}'; vocabulary is {vocab:?}"
                        ),
                    });
                }
            }
        }

        let label = parse_label(label, mode, num_labels, row_no)?;
        let split = match split {
            "train" => Split::Train,
            "test" => Split::Test,
            other => {
                return Err(Error::Parse {
                    row: Some(row_no),
                    msg: format!("bad split '{other}' (expected train|test)"),
                })
            }
        };
        let source = if let Some(rest) = source.strip_prefix("bin:") {
            let (file, index) = rest.rsplit_once(':').ok_or_else(|| Error::Parse {
                row: Some(row_no),
                msg: format!("bad bin reference '{source}'"),
            })?;
            let index = index.parse().map_err(|_| Error::Parse {
                row: Some(row_no),
                msg: format!("bad bin index in '{source}'"),
            })?;
            SampleSource::Bin { file: file.to_string(), index }
        } else {
            SampleSource::Path(source.to_string())
        };
        manifest.rows.push(ManifestRow {
            id: id.to_string(),
            source,
            label,
            gender: gender.to_string(),
            race: race.to_string(),
            split,
        });
    }
    if excluded > 0 {
        log::info!("manifest '{}': excluded {excluded} rows", path.display());
    }
    Ok(manifest)
}

fn parse_label(raw: &str, mode: TaskMode, num_labels: usize, row_no: usize) -> Result<LabelData> {
    match mode {
        TaskMode::Multiclass => {
            let c: usize = raw.parse().map_err(|_| Error::Parse {
                row: Some(row_no),
                msg: format!("bad class label '{raw}'"),
            })?;
            if c >= num_labels {
                return Err(Error::Parse {
                    row: Some(row_no),
                    msg: format!("class {c} out of range 0..{num_labels}"),
                });
            }
            Ok(LabelData::Class(c))
        }
        TaskMode::Multilabel => {
            let bits: Vec<u8> = raw
                .split(';')
                .map(|b| match b {
                    "0" => Ok(0u8),
                    "1" => Ok(1u8),
                    other => Err(Error::Parse {
                        row: Some(row_no),
                        msg: format!("bad label bit '{other}'"),
                    }),
                })
                .collect::<Result<_>>()?;
            if bits.len() != num_labels {
                return Err(Error::Parse {
                    row: Some(row_no),
                    msg: format!("{} label bits, expected {num_labels}", bits.len()),
                });
            }
            Ok(LabelData::MultiHot(bits))
        }
    }
}

/// Write a manifest (and a sidecar `data.bin` for inline rows) under `dir`.
/// Returns the manifest path.
pub fn save_manifest(manifest: &DatasetManifest, dir: &Path, name: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let has_inline = manifest.rows.iter().any(|r| matches!(r.source, SampleSource::Inline(_)));
    let bin_name = format!("{name}.data.bin");
    let mut bin: Vec<u8> = Vec::new();
    let mut inline_index = 0usize;

    let header = ManifestHeader {
        mode: mode_string(manifest.mode, manifest.num_labels),
        attributes: manifest.attributes.clone(),
        image_root: None,
        image_shape: manifest.image_shape,
        exclude: manifest.exclude.clone(),
    };
    let mut out = String::new();
    out.push_str(&serde_json::to_string(&header)?);
    out.push('\n');
    out.push_str("id,path,label(s),gender,race,split\n");
    for row in &manifest.rows {
        let source = match &row.source {
            SampleSource::Path(p) => p.clone(),
            SampleSource::Bin { file, index } => format!("bin:{file}:{index}"),
            SampleSource::Inline(t) => {
                for v in t.data() {
                    bin.extend_from_slice(&v.to_le_bytes());
                }
                let s = format!("bin:{bin_name}:{inline_index}");
                inline_index += 1;
                s
            }
        };
        let label = match &row.label {
            LabelData::Class(c) => c.to_string(),
            LabelData::MultiHot(bits) => {
                bits.iter().map(u8::to_string).collect::<Vec<_>>().join(";")
            }
        };
        let split = match row.split {
            Split::Train => "train",
            Split::Test => "test",
        };
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            row.id, source, label, row.gender, row.race, split
        ));
    }
    let manifest_path = dir.join(format!("{name}.manifest"));
    std::fs::File::create(&manifest_path)?.write_all(out.as_bytes())?;
    if has_inline {
        std::fs::File::create(dir.join(&bin_name))?.write_all(&bin)?;
    }
    Ok(manifest_path)
}

fn read_bin(path: &Path) -> Result<Vec<f64>> {
    let bytes = std::fs::read(path)
        .map_err(|e| Error::Input(format!("cannot read '{}': {e}", path.display())))?;
    if bytes.len() % 8 != 0 {
        return Err(Error::Input(format!("'{}' is not a stream of f64", path.display())));
    }
    Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
}
