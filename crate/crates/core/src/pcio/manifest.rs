//! Dataset directories: one file per sample plus an optional `manifest.json`
//! declaring the class count, class names and the train/test split.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{binary, file_stem, text, Dataset, Format, PointCloud, Split};
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Manifest {
    pub version: u32,
    pub num_classes: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_names: Option<Vec<String>>,
    #[serde(default)]
    pub format: Format,
    pub samples: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ManifestEntry {
    pub id: String,
    pub file: String,
    #[serde(default)]
    pub split: Split,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<u32>,
}

fn read_sample(path: &Path, id: &str, format: Format, num_classes: Option<usize>) -> Result<(PointCloud, Option<usize>)> {
    match format {
        Format::Text => {
            let content = fs::read_to_string(path)?;
            Ok((text::parse_text_sample(path, &content, id, num_classes)?, None))
        }
        Format::Binary => {
            let bytes = fs::read(path)?;
            let (cloud, c) = binary::read_binary_sample(&bytes, id)?;
            if let Some(declared) = num_classes {
                if c != declared {
                    return Err(Error::Format(format!(
                        "{}: header declares {c} classes, dataset declares {declared}",
                        path.display()
                    )));
                }
            }
            Ok((cloud, Some(c)))
        }
    }
}

/// Loads a single sample file or a dataset directory.
///
/// The class count comes from, in order: `num_classes`, the directory
/// manifest, binary headers, or the largest label seen plus one.
pub fn load_dataset(path: &Path, format: Format, num_classes: Option<usize>) -> Result<Dataset> {
    if path.is_file() {
        let id = file_stem(path);
        let (cloud, header_c) = read_sample(path, &id, format, num_classes)?;
        let c = num_classes.or(header_c).unwrap_or_else(|| inferred_classes(&[&cloud]));
        return Dataset::train_only(vec![cloud], c);
    }
    let manifest_path = path.join(MANIFEST_FILE);
    if manifest_path.is_file() {
        let manifest: Manifest = serde_json::from_str(&fs::read_to_string(&manifest_path)?)?;
        if manifest.version != MANIFEST_VERSION {
            return Err(Error::Format(format!(
                "unsupported manifest version {}",
                manifest.version
            )));
        }
        let c = num_classes.unwrap_or(manifest.num_classes);
        let mut samples = Vec::with_capacity(manifest.samples.len());
        let mut splits = Vec::with_capacity(manifest.samples.len());
        for entry in &manifest.samples {
            let (cloud, _) = read_sample(&path.join(&entry.file), &entry.id, manifest.format, Some(c))?;
            let cloud = PointCloud::new(
                entry.id.clone(),
                cloud.points().to_vec(),
                cloud.colors().map(<[_]>::to_vec),
                cloud.labels().to_vec(),
                entry.category,
            )?;
            samples.push(cloud);
            splits.push(entry.split);
        }
        return Dataset::new(samples, splits, c, manifest.class_names);
    }
    let mut files: Vec<PathBuf> = fs::read_dir(path)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|e| e == format.extension()))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "{}: no .{} sample files",
            path.display(),
            format.extension()
        )));
    }
    let mut samples = Vec::with_capacity(files.len());
    let mut header_c = None;
    for f in &files {
        let (cloud, c) = read_sample(f, &file_stem(f), format, num_classes)?;
        header_c = header_c.max(c);
        samples.push(cloud);
    }
    let c = num_classes
        .or(header_c)
        .unwrap_or_else(|| inferred_classes(&samples.iter().collect::<Vec<_>>()));
    Dataset::train_only(samples, c)
}

fn inferred_classes(clouds: &[&PointCloud]) -> usize {
    clouds
        .iter()
        .flat_map(|c| c.labels())
        .max()
        .map_or(1, |&m| m as usize + 1)
}

/// Writes every sample plus a manifest into `dir` (created if missing).
pub fn save_dataset(dataset: &Dataset, dir: &Path, format: Format) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut entries = Vec::with_capacity(dataset.len());
    for (cloud, split) in dataset.samples().iter().zip(dataset.splits()) {
        let file = format!("{}.{}", cloud.id(), format.extension());
        match format {
            Format::Text => fs::write(dir.join(&file), text::write_text_sample(cloud))?,
            Format::Binary => fs::write(
                dir.join(&file),
                binary::write_binary_sample(cloud, dataset.num_classes()),
            )?,
        }
        entries.push(ManifestEntry {
            id: cloud.id().to_string(),
            file,
            split: *split,
            category: cloud.category(),
        });
    }
    let manifest = Manifest {
        version: MANIFEST_VERSION,
        num_classes: dataset.num_classes(),
        class_names: dataset.class_names().map(<[_]>::to_vec),
        format,
        samples: entries,
    };
    fs::write(dir.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}
