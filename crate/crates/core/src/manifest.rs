//! Dataset manifests in JSON Lines: one entry per line,
//!
//! ```text
//! {"path": "s1/1.pgm", "subject": "s1", "role": "train", "class": "s1"}
//! {"path": "s7/3.pgm", "subject": "s7", "role": "probe_neg", "class": "s1"}
//! ```
//!
//! `class` is the class an entry is filed under; for `probe_neg` entries it
//! differs from `subject`. Relative paths resolve against the manifest's
//! directory. Blank lines and lines starting with `#` are skipped.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluate::assign_negatives;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Train,
    ProbePos,
    ProbeNeg,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub path: String,
    pub subject: String,
    pub role: Role,
    pub class: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
    /// Directory relative entry paths resolve against.
    pub base_dir: PathBuf,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, base_dir).map_err(|e| match e {
            Error::Malformed { detail, .. } => Error::Malformed {
                path: path.to_path_buf(),
                detail,
            },
            other => other,
        })
    }

    pub fn parse(text: &str, base_dir: PathBuf) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let e: ManifestEntry = serde_json::from_str(line).map_err(|e| Error::Malformed {
                path: "<manifest>".into(),
                detail: format!("line {}: {e}", i + 1),
            })?;
            entries.push(e);
        }
        Ok(Manifest { entries, base_dir })
    }

    pub fn to_jsonl(&self) -> String {
        self.entries
            .iter()
            .map(|e| serde_json::to_string(e).expect("entry serializes") + "\n")
            .collect()
    }

    pub fn resolve(&self, entry: &ManifestEntry) -> PathBuf {
        let p = Path::new(&entry.path);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Classes with training entries, in order of first appearance.
    pub fn classes(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for e in self.entries.iter().filter(|e| e.role == Role::Train) {
            if !out.contains(&e.class) {
                out.push(e.class.clone());
            }
        }
        out
    }

    pub fn with_role(&self, role: Role) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(move |e| e.role == role)
    }

    /// Structural checks: training entries belong to their own class, positive
    /// probes match their class, and every class referenced by a probe has
    /// training data. With `check_files`, every path must exist.
    pub fn validate(&self, check_files: bool) -> Result<()> {
        let classes = self.classes();
        for e in &self.entries {
            let bad = |detail: String| Error::Malformed {
                path: self.resolve(e),
                detail,
            };
            match e.role {
                Role::Train | Role::ProbePos if e.subject != e.class => {
                    return Err(bad(format!("subject '{}' filed under class '{}'", e.subject, e.class)));
                }
                Role::ProbeNeg if e.subject == e.class => {
                    return Err(bad(format!("negative probe of subject '{}' filed under its own class", e.subject)));
                }
                _ => {}
            }
            if !classes.contains(&e.class) {
                return Err(bad(format!("class '{}' has no training entries", e.class)));
            }
            if check_files && !self.resolve(e).is_file() {
                return Err(bad("file does not exist".into()));
            }
        }
        Ok(())
    }

    /// Builds a manifest from a directory of subject folders (`root/<subject>/<image>`),
    /// the layout of the ORL/AT&T distribution. Per subject, the first `n_train`
    /// images (in natural filename order) train, up to `n_probe` of the rest
    /// (all if `None`) are positive probes, and `negatives` images of other
    /// subjects are drawn with a seeded shuffle as negative probes.
    pub fn from_subject_dirs(
        root: &Path,
        n_train: usize,
        n_probe: Option<usize>,
        negatives: usize,
        seed: u64,
    ) -> Result<Self> {
        let mut subjects: Vec<(String, Vec<String>)> = Vec::new();
        let mut dirs = read_dir_sorted(root)?;
        dirs.retain(|p| p.is_dir());
        for dir in dirs {
            let name = dir.file_name().unwrap_or_default().to_string_lossy().into_owned();
            let mut files = read_dir_sorted(&dir)?;
            files.retain(|p| {
                p.is_file()
                    && matches!(
                        p.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref(),
                        Some("pgm" | "png")
                    )
            });
            let rel = files
                .iter()
                .map(|f| format!("{name}/{}", f.file_name().unwrap_or_default().to_string_lossy()))
                .collect();
            subjects.push((name, rel));
        }
        if subjects.is_empty() {
            return Err(Error::Malformed {
                path: root.to_path_buf(),
                detail: "no subject directories".into(),
            });
        }

        let mut entries = Vec::new();
        let mut pool = Vec::new();
        for (subject, files) in &subjects {
            if files.len() <= n_train {
                return Err(Error::Malformed {
                    path: root.join(subject),
                    detail: format!("{} images, need more than {n_train}", files.len()),
                });
            }
            for (i, f) in files.iter().enumerate() {
                pool.push((subject.clone(), f.clone()));
                let role = if i < n_train {
                    Role::Train
                } else if n_probe.is_none_or(|n| i < n_train + n) {
                    Role::ProbePos
                } else {
                    continue;
                };
                entries.push(ManifestEntry {
                    path: f.clone(),
                    subject: subject.clone(),
                    role,
                    class: subject.clone(),
                });
            }
        }
        if negatives > 0 {
            let classes: Vec<String> = subjects.iter().map(|(s, _)| s.clone()).collect();
            for (class, items) in assign_negatives(&pool, &classes, negatives, seed)? {
                for item in items {
                    let subject = item.split('/').next().unwrap_or_default().to_string();
                    entries.push(ManifestEntry {
                        path: item,
                        subject,
                        role: Role::ProbeNeg,
                        class: class.clone(),
                    });
                }
            }
        }
        Ok(Manifest {
            entries,
            base_dir: root.to_path_buf(),
        })
    }
}

fn natural_key(s: &str) -> (u64, String) {
    let stem = s.split('.').next().unwrap_or(s);
    let digits: String = stem.chars().filter(char::is_ascii_digit).collect();
    (digits.parse().unwrap_or(u64::MAX), s.to_string())
}

fn read_dir_sorted(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|r| r.map(|e| e.path()).map_err(|e| Error::io(dir, e)))
        .collect::<Result<_>>()?;
    out.sort_by_cached_key(|p| natural_key(&p.file_name().unwrap_or_default().to_string_lossy()));
    Ok(out)
}
