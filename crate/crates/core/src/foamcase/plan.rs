use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::CaseError;

/// Top-level location of a case file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Folder {
    System,
    Constant,
    Zero,
    Root,
}

impl Folder {
    pub fn dir_name(self) -> &'static str {
        match self {
            Folder::System => "system",
            Folder::Constant => "constant",
            Folder::Zero => "0",
            Folder::Root => "",
        }
    }

    fn priority(self) -> u8 {
        match self {
            Folder::System => 0,
            Folder::Constant => 1,
            Folder::Zero => 2,
            Folder::Root => 3,
        }
    }
}

/// One file of a case plan, e.g. `system/controlDict` or `Allrun`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct FilePlanEntry {
    folder: Folder,
    filename: String,
}

impl FilePlanEntry {
    pub fn new(folder: Folder, filename: impl Into<String>) -> Result<Self, CaseError> {
        let filename = filename.into();
        let trimmed = filename.trim_matches('/');
        if trimmed.is_empty() || trimmed.split('/').any(|s| s.is_empty() || s == "." || s == "..") {
            return Err(CaseError::InvalidPath(filename));
        }
        if folder == Folder::Root && trimmed != "Allrun" {
            return Err(CaseError::InvalidPath(filename));
        }
        Ok(Self {
            folder,
            filename: trimmed.to_string(),
        })
    }

    pub fn folder(&self) -> Folder {
        self.folder
    }

    pub fn filename(&self) -> &str {
        &self.filename
    }

    /// Case-relative path with forward slashes.
    pub fn rel_path(&self) -> String {
        match self.folder {
            Folder::Root => self.filename.clone(),
            f => format!("{}/{}", f.dir_name(), self.filename),
        }
    }

    /// Ordering key: folder priority, then in-folder priority, then filename.
    pub fn rank(&self) -> (u8, u8, &str) {
        let within = match self.folder {
            Folder::System => match self.filename.as_str() {
                "blockMeshDict" => 0,
                "controlDict" => 1,
                "fvSchemes" => 2,
                "fvSolution" => 3,
                _ => 4,
            },
            Folder::Constant => match self.filename.as_str() {
                "transportProperties" => 0,
                _ => 1,
            },
            Folder::Zero | Folder::Root => 0,
        };
        (self.folder.priority(), within, self.filename.as_str())
    }
}

impl Ord for FilePlanEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.rank().cmp(&other.rank())
    }
}

impl PartialOrd for FilePlanEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl FromStr for FilePlanEntry {
    type Err = CaseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim().trim_start_matches("./");
        if s == "Allrun" {
            return FilePlanEntry::new(Folder::Root, "Allrun");
        }
        let (head, rest) = s
            .split_once('/')
            .ok_or_else(|| CaseError::InvalidPath(s.to_string()))?;
        let folder = match head {
            "system" => Folder::System,
            "constant" => Folder::Constant,
            "0" => Folder::Zero,
            _ => return Err(CaseError::InvalidPath(s.to_string())),
        };
        FilePlanEntry::new(folder, rest)
    }
}

impl TryFrom<String> for FilePlanEntry {
    type Error = CaseError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        value.parse()
    }
}

impl From<FilePlanEntry> for String {
    fn from(value: FilePlanEntry) -> Self {
        value.rel_path()
    }
}

impl fmt::Display for FilePlanEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.rel_path())
    }
}

/// Sorts entries into generation order and drops duplicates.
///
/// Folders go `system`, `constant`, `0`, then `Allrun`. Inside `system` the
/// order is blockMeshDict, controlDict, fvSchemes, fvSolution, then the rest;
/// inside `constant` transportProperties leads. Equal priorities fall back to
/// the filename so the result is deterministic.
pub fn plan_order<I>(entries: I) -> Vec<FilePlanEntry>
where
    I: IntoIterator<Item = FilePlanEntry>,
{
    let mut out: Vec<FilePlanEntry> = entries.into_iter().collect();
    out.sort();
    out.dedup();
    out
}

/// The basic case layout every plan must contain.
pub fn base_plan() -> Vec<FilePlanEntry> {
    [
        "0/p",
        "0/U",
        "constant/transportProperties",
        "system/blockMeshDict",
        "system/controlDict",
        "system/fvSchemes",
        "system/fvSolution",
        "Allrun",
    ]
    .iter()
    .map(|p| p.parse().expect("base plan paths are valid"))
    .collect()
}
