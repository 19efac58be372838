//! Dataset ingestion and the negative sub-sampling step of the
//! one-vs-rest evaluation protocol.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::util;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Test,
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(Error::Validation(format!(
                "unknown split token {other:?}; expected \"train\" or \"test\""
            ))),
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

/// One image of the dataset; `path` is relative to the manifest root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetEntry {
    pub path: String,
    pub class: String,
    pub split: Split,
}

/// Inventory of a dataset: image paths with their action class and
/// train/test split. Paths are unique, entries are ordered
/// lexicographically by path, and every listed class has at least one
/// entry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    root: PathBuf,
    entries: Vec<DatasetEntry>,
    class_names: Vec<String>,
}

/// On-disk arrangements `ingest` understands.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetLayout {
    /// One sub-folder per class; optional `train.txt` / `test.txt` at
    /// the root list relative paths per split (default is train).
    FolderPerClass,
    /// A `manifest.csv` at the root with headerless rows
    /// `path,class,split`.
    ManifestFile,
}

impl DatasetManifest {
    pub fn new(root: impl Into<PathBuf>, mut entries: Vec<DatasetEntry>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for e in &entries {
            if e.class.trim().is_empty() {
                return Err(Error::Validation(format!(
                    "entry {:?} has an empty class name",
                    e.path
                )));
            }
            if !seen.insert(e.path.clone()) {
                return Err(Error::Validation(format!("repeated path {:?}", e.path)));
            }
        }
        entries.sort_by(|a, b| a.path.cmp(&b.path));
        let class_names: Vec<String> = entries
            .iter()
            .map(|e| e.class.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        Ok(DatasetManifest { root: root.into(), entries, class_names })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn entries(&self) -> &[DatasetEntry] {
        &self.entries
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    /// Absolute (root-joined) location of an entry's image.
    pub fn resolve(&self, entry: &DatasetEntry) -> PathBuf {
        self.root.join(&entry.path)
    }

    pub fn split_entries(&self, split: Split) -> impl Iterator<Item = &DatasetEntry> {
        self.entries.iter().filter(move |e| e.split == split)
    }
}

/// Reads the optional `classes.txt` next to the dataset: when present
/// it fixes the allowed class universe.
fn read_declared_classes(root: &Path) -> Result<Option<BTreeSet<String>>> {
    let path = root.join("classes.txt");
    if !path.is_file() {
        return Ok(None);
    }
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let classes: BTreeSet<String> =
        text.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from).collect();
    Ok(Some(classes))
}

fn check_declared(declared: Option<&BTreeSet<String>>, class: &str, origin: &str) -> Result<()> {
    if let Some(set) = declared {
        if !set.contains(class) {
            return Err(Error::Validation(format!(
                "unknown class {class:?} in {origin}; classes.txt does not declare it"
            )));
        }
    }
    Ok(())
}

fn utf8_name(path: &Path) -> Result<String> {
    path.file_name()
        .and_then(|n| n.to_str())
        .map(String::from)
        .ok_or_else(|| Error::Validation(format!("non-UTF-8 file name under {}", path.display())))
}

/// Reads `train.txt` / `test.txt` when present and returns the
/// explicit split per listed path.
fn read_split_lists(root: &Path) -> Result<BTreeMap<String, Split>> {
    let mut map = BTreeMap::new();
    for (file, split) in [("train.txt", Split::Train), ("test.txt", Split::Test)] {
        let path = root.join(file);
        if !path.is_file() {
            continue;
        }
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            if map.insert(line.to_string(), split).is_some() {
                return Err(Error::Validation(format!(
                    "path {line:?} appears in more than one split list"
                )));
            }
        }
    }
    Ok(map)
}

fn ingest_folders(root: &Path) -> Result<DatasetManifest> {
    let declared = read_declared_classes(root)?;
    let mut splits = read_split_lists(root)?;

    let mut class_dirs = Vec::new();
    let dir = fs::read_dir(root).map_err(|e| Error::io(root, e))?;
    for item in dir {
        let item = item.map_err(|e| Error::io(root, e))?;
        let path = item.path();
        if path.is_dir() {
            let name = utf8_name(&path)?;
            if !name.starts_with('.') {
                class_dirs.push((name, path));
            }
        }
    }
    class_dirs.sort_by(|a, b| a.0.cmp(&b.0));

    let mut entries = Vec::new();
    for (class, dir_path) in class_dirs {
        check_declared(declared.as_ref(), &class, "folder layout")?;
        let mut files = Vec::new();
        let dir = fs::read_dir(&dir_path).map_err(|e| Error::io(&dir_path, e))?;
        for item in dir {
            let item = item.map_err(|e| Error::io(&dir_path, e))?;
            let path = item.path();
            if path.is_file() {
                let name = utf8_name(&path)?;
                if !name.starts_with('.') {
                    files.push(name);
                }
            }
        }
        if files.is_empty() {
            log::warn!("class folder {} has no images; class {class:?} excluded", dir_path.display());
            continue;
        }
        files.sort();
        for file in files {
            let rel = format!("{class}/{file}");
            let split = splits.remove(&rel).unwrap_or(Split::Train);
            entries.push(DatasetEntry { path: rel, class: class.clone(), split });
        }
    }
    if let Some((path, _)) = splits.pop_first() {
        return Err(Error::Validation(format!(
            "split list names {path:?}, which is not in the dataset"
        )));
    }
    DatasetManifest::new(root, entries)
}

fn ingest_manifest(root: &Path) -> Result<DatasetManifest> {
    let declared = read_declared_classes(root)?;
    let path = root.join("manifest.csv");
    let file = fs::File::open(&path).map_err(|e| Error::io(&path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(file);
    let mut entries = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::format(&path, format!("row {}: {e}", i + 1)))?;
        if record.len() != 3 {
            return Err(Error::format(
                &path,
                format!("row {}: expected path,class,split but found {} fields", i + 1, record.len()),
            ));
        }
        let class = record[1].to_string();
        check_declared(declared.as_ref(), &class, "manifest.csv")?;
        entries.push(DatasetEntry {
            path: record[0].to_string(),
            class,
            split: record[2].parse()?,
        });
    }
    DatasetManifest::new(root, entries)
}

/// Builds a manifest from a dataset directory. Ordering is
/// deterministic (lexicographic by relative path) regardless of
/// filesystem enumeration order.
pub fn ingest(root: impl AsRef<Path>, layout: DatasetLayout) -> Result<DatasetManifest> {
    let root = root.as_ref();
    match layout {
        DatasetLayout::FolderPerClass => ingest_folders(root),
        DatasetLayout::ManifestFile => ingest_manifest(root),
    }
}

/// Training list for one one-vs-rest model: every training image of
/// the positive class plus `per_class` seeded picks from each other
/// class. Picks are without replacement and deterministic per seed.
pub fn subsample_negatives(
    manifest: &DatasetManifest,
    positive_class: &str,
    per_class: usize,
    seed: u64,
) -> Result<Vec<DatasetEntry>> {
    if !manifest.class_names().iter().any(|c| c == positive_class) {
        return Err(Error::Validation(format!(
            "class {positive_class:?} is not in the manifest"
        )));
    }
    let mut rng = util::rng_from(seed);
    let mut out: Vec<DatasetEntry> = manifest
        .split_entries(Split::Train)
        .filter(|e| e.class == positive_class)
        .cloned()
        .collect();
    for class in manifest.class_names() {
        if class == positive_class {
            continue;
        }
        let candidates: Vec<&DatasetEntry> =
            manifest.split_entries(Split::Train).filter(|e| &e.class == class).collect();
        if per_class > candidates.len() {
            return Err(Error::Capacity(format!(
                "class {class:?} has {} training images; cannot sample {per_class}",
                candidates.len()
            )));
        }
        let mut picks = rand::seq::index::sample(&mut rng, candidates.len(), per_class).into_vec();
        picks.sort_unstable();
        out.extend(picks.into_iter().map(|i| candidates[i].clone()));
    }
    Ok(out)
}

/// Single-column CSV of class names, one per feature row.
pub fn read_class_column(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(file);
    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::format(path, format!("row {}: {e}", i + 1)))?;
        if record.len() != 1 || record[0].is_empty() {
            return Err(Error::format(path, format!("row {}: expected one class name", i + 1)));
        }
        out.push(record[0].to_string());
    }
    Ok(out)
}

/// Rows `name,label` with a binary label; used to attach action labels
/// to per-image score files.
pub fn read_binary_labels_csv(path: impl AsRef<Path>) -> Result<Vec<(String, usize)>> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(file);
    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::format(path, format!("row {}: {e}", i + 1)))?;
        if record.len() != 2 {
            return Err(Error::format(path, format!("row {}: expected name,label", i + 1)));
        }
        let label = match &record[1] {
            "0" => 0,
            "1" => 1,
            other => {
                return Err(Error::format(
                    path,
                    format!("row {}: label must be 0 or 1, found {other:?}", i + 1),
                ))
            }
        };
        out.push((record[0].to_string(), label));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;
    use std::io::Write;

    fn touch(path: &Path) {
        fs::create_dir_all(path.parent().unwrap()).unwrap();
        fs::File::create(path).unwrap().write_all(b"x").unwrap();
    }

    fn mock_manifest(classes: usize, per_class_train: usize, per_class_test: usize) -> DatasetManifest {
        let mut entries = Vec::new();
        for c in 0..classes {
            let class = format!("class_{c:02}");
            for i in 0..per_class_train {
                entries.push(DatasetEntry {
                    path: format!("{class}/train_{i:03}.ppm"),
                    class: class.clone(),
                    split: Split::Train,
                });
            }
            for i in 0..per_class_test {
                entries.push(DatasetEntry {
                    path: format!("{class}/test_{i:03}.ppm"),
                    class: class.clone(),
                    split: Split::Test,
                });
            }
        }
        DatasetManifest::new("mock", entries).unwrap()
    }

    #[test]
    fn folder_layout_lists_classes_and_images_in_order() {
        let dir = tempfile::tempdir().unwrap();
        for class in ["waving", "climbing"] {
            for i in 0..3 {
                touch(&dir.path().join(class).join(format!("img_{i}.ppm")));
            }
        }
        fs::create_dir(dir.path().join("empty_class")).unwrap();
        let manifest = ingest(dir.path(), DatasetLayout::FolderPerClass).unwrap();
        assert_eq!(manifest.class_names(), ["climbing", "waving"]);
        assert_eq!(manifest.entries().len(), 6);
        let paths: Vec<&str> = manifest.entries().iter().map(|e| e.path.as_str()).collect();
        let mut sorted = paths.clone();
        sorted.sort();
        assert_eq!(paths, sorted);
        assert!(manifest.entries().iter().all(|e| e.split == Split::Train));
        assert_eq!(
            manifest.resolve(&manifest.entries()[0]),
            dir.path().join("climbing/img_0.ppm")
        );
    }

    #[test]
    fn split_lists_assign_test_entries_and_reject_unknown_paths() {
        let dir = tempfile::tempdir().unwrap();
        for i in 0..4 {
            touch(&dir.path().join("jumping").join(format!("img_{i}.ppm")));
        }
        fs::write(dir.path().join("test.txt"), "jumping/img_2.ppm\n").unwrap();
        let manifest = ingest(dir.path(), DatasetLayout::FolderPerClass).unwrap();
        let tests: Vec<&str> =
            manifest.split_entries(Split::Test).map(|e| e.path.as_str()).collect();
        assert_eq!(tests, ["jumping/img_2.ppm"]);
        assert_eq!(manifest.split_entries(Split::Train).count(), 3);

        fs::write(dir.path().join("train.txt"), "jumping/missing.ppm\n").unwrap();
        assert!(matches!(
            ingest(dir.path(), DatasetLayout::FolderPerClass),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn manifest_file_layout_parses_and_validates() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(
            dir.path().join("manifest.csv"),
            "imgs/a.ppm,waving,train\nimgs/b.ppm,waving,test\nimgs/c.ppm,running,train\n",
        )
        .unwrap();
        let manifest = ingest(dir.path(), DatasetLayout::ManifestFile).unwrap();
        assert_eq!(manifest.class_names(), ["running", "waving"]);
        assert_eq!(manifest.entries().len(), 3);
        assert_eq!(manifest.split_entries(Split::Test).count(), 1);

        fs::write(dir.path().join("classes.txt"), "waving\n").unwrap();
        let err = ingest(dir.path(), DatasetLayout::ManifestFile).unwrap_err();
        assert!(matches!(err, Error::Validation(_)), "{err}");

        fs::remove_file(dir.path().join("classes.txt")).unwrap();
        fs::write(
            dir.path().join("manifest.csv"),
            "imgs/a.ppm,waving,train\nimgs/a.ppm,waving,train\n",
        )
        .unwrap();
        assert!(matches!(
            ingest(dir.path(), DatasetLayout::ManifestFile),
            Err(Error::Validation(_))
        ));

        fs::write(dir.path().join("manifest.csv"), "imgs/a.ppm,waving,validation\n").unwrap();
        assert!(matches!(
            ingest(dir.path(), DatasetLayout::ManifestFile),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn subsample_matches_protocol_counts_on_a_forty_class_manifest() {
        let manifest = mock_manifest(40, 100, 10);
        let list = subsample_negatives(&manifest, "class_17", 5, 9).unwrap();
        assert_eq!(list.len(), 100 + 39 * 5);
        assert_eq!(list.iter().filter(|e| e.class == "class_17").count(), 100);
        for class in manifest.class_names() {
            if class != "class_17" {
                assert_eq!(list.iter().filter(|e| &e.class == class).count(), 5);
            }
        }
    }

    #[test]
    fn subsample_never_duplicates_and_never_borrows_positives() {
        let manifest = mock_manifest(6, 8, 2);
        for seed in 0..20 {
            let list = subsample_negatives(&manifest, "class_03", 4, seed).unwrap();
            let unique: HashSet<&str> = list.iter().map(|e| e.path.as_str()).collect();
            assert_eq!(unique.len(), list.len());
            assert!(list.iter().all(|e| e.split == Split::Train));
            assert_eq!(list.iter().filter(|e| e.class == "class_03").count(), 8);
        }
    }

    #[test]
    fn subsample_is_seeded_and_bounded() {
        let manifest = mock_manifest(4, 6, 1);
        let a = subsample_negatives(&manifest, "class_00", 3, 42).unwrap();
        let b = subsample_negatives(&manifest, "class_00", 3, 42).unwrap();
        assert_eq!(a, b);
        let c = subsample_negatives(&manifest, "class_00", 3, 43).unwrap();
        assert_ne!(a, c);

        let positives_only = subsample_negatives(&manifest, "class_00", 0, 0).unwrap();
        assert_eq!(positives_only.len(), 6);
        assert!(matches!(
            subsample_negatives(&manifest, "class_00", 7, 0),
            Err(Error::Capacity(_))
        ));
        assert!(subsample_negatives(&manifest, "no_such_class", 1, 0).is_err());
    }

    #[test]
    fn label_csv_helpers_parse_and_reject() {
        let dir = tempfile::tempdir().unwrap();
        let classes = dir.path().join("classes.csv");
        fs::write(&classes, "cow\ngrass\ncow\n").unwrap();
        assert_eq!(read_class_column(&classes).unwrap(), ["cow", "grass", "cow"]);

        let labels = dir.path().join("labels.csv");
        fs::write(&labels, "img_a,1\nimg_b,0\n").unwrap();
        assert_eq!(
            read_binary_labels_csv(&labels).unwrap(),
            [("img_a".to_string(), 1), ("img_b".to_string(), 0)]
        );
        fs::write(&labels, "img_a,2\n").unwrap();
        assert!(matches!(read_binary_labels_csv(&labels), Err(Error::Format { .. })));
    }
}
