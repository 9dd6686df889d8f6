use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::clean::is_clean;
use super::{CaseError, FilePlanEntry, Folder};

/// A generated case file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoamFile {
    pub entry: FilePlanEntry,
    pub content: String,
    pub cleaned: bool,
}

impl FoamFile {
    pub fn new(entry: FilePlanEntry, content: impl Into<String>) -> Self {
        let content = content.into();
        let cleaned = is_clean(&content);
        Self { entry, content, cleaned }
    }

    pub fn rel_path(&self) -> String {
        self.entry.rel_path()
    }
}

pub fn file_path(case_dir: &Path, entry: &FilePlanEntry) -> PathBuf {
    match entry.folder() {
        Folder::Root => case_dir.join(entry.filename()),
        f => case_dir.join(f.dir_name()).join(entry.filename()),
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CaseError + '_ {
    move |source| CaseError::Io { path: path.to_path_buf(), source }
}

/// Writes files into the standard case layout, replacing existing ones atomically.
pub fn write_case(case_dir: &Path, files: &[FoamFile]) -> Result<(), CaseError> {
    fs::create_dir_all(case_dir).map_err(io_err(case_dir))?;
    for file in files {
        write_file(case_dir, file)?;
    }
    Ok(())
}

pub fn write_file(case_dir: &Path, file: &FoamFile) -> Result<PathBuf, CaseError> {
    let target = file_path(case_dir, &file.entry);
    let parent = target.parent().unwrap_or(case_dir);
    fs::create_dir_all(parent).map_err(io_err(parent))?;

    let tmp = parent.join(format!(
        ".{}.tmp",
        target.file_name().and_then(|n| n.to_str()).unwrap_or("file")
    ));
    {
        let mut f = fs::File::create(&tmp).map_err(io_err(&tmp))?;
        f.write_all(file.content.as_bytes()).map_err(io_err(&tmp))?;
        f.sync_all().map_err(io_err(&tmp))?;
    }
    if file.entry.folder() == Folder::Root {
        set_executable(&tmp)?;
    }
    fs::rename(&tmp, &target).map_err(io_err(&target))?;
    Ok(target)
}

#[cfg(unix)]
fn set_executable(path: &Path) -> Result<(), CaseError> {
    use std::os::unix::fs::PermissionsExt;
    fs::set_permissions(path, fs::Permissions::from_mode(0o755)).map_err(io_err(path))
}

#[cfg(not(unix))]
fn set_executable(_path: &Path) -> Result<(), CaseError> {
    Ok(())
}

/// Reads the configuration files currently present in a case directory.
///
/// Only direct children of `0`, `constant` and `system` plus `Allrun` are
/// considered; run products such as `constant/polyMesh` are skipped.
pub fn read_case(case_dir: &Path) -> Result<Vec<FoamFile>, CaseError> {
    let mut out = Vec::new();
    for folder in [Folder::System, Folder::Constant, Folder::Zero] {
        let dir = case_dir.join(folder.dir_name());
        if !dir.is_dir() {
            continue;
        }
        let mut names: Vec<String> = fs::read_dir(&dir)
            .map_err(io_err(&dir))?
            .filter_map(|e| e.ok())
            .filter(|e| e.file_type().map(|t| t.is_file()).unwrap_or(false))
            .filter_map(|e| e.file_name().into_string().ok())
            .filter(|n| !n.starts_with('.'))
            .collect();
        names.sort();
        for name in names {
            let Ok(entry) = FilePlanEntry::new(folder, name.clone()) else {
                continue;
            };
            let path = dir.join(&name);
            let content = fs::read_to_string(&path).map_err(io_err(&path))?;
            out.push(FoamFile::new(entry, content));
        }
    }
    let allrun = case_dir.join("Allrun");
    if allrun.is_file() {
        let content = fs::read_to_string(&allrun).map_err(io_err(&allrun))?;
        out.push(FoamFile::new(FilePlanEntry::new(Folder::Root, "Allrun")?, content));
    }
    Ok(out)
}

/// Case-relative paths of the configuration files present on disk.
pub fn list_case_files(case_dir: &Path) -> Result<Vec<String>, CaseError> {
    Ok(read_case(case_dir)?.iter().map(FoamFile::rel_path).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::foamcase::base_plan;

    #[test]
    fn base_layout_on_disk() {
        let dir = tempfile::tempdir().unwrap();
        let files: Vec<FoamFile> = base_plan()
            .into_iter()
            .map(|e| FoamFile::new(e.clone(), format!("// {e}\n")))
            .collect();
        write_case(dir.path(), &files).unwrap();
        for d in ["0", "constant", "system"] {
            assert!(dir.path().join(d).is_dir());
        }
        let allrun = dir.path().join("Allrun");
        assert!(allrun.is_file());
        #[cfg(unix)]
        {
            use std::os::unix::fs::PermissionsExt;
            let mode = fs::metadata(&allrun).unwrap().permissions().mode();
            assert_eq!(mode & 0o111, 0o111);
        }
        assert_eq!(read_case(dir.path()).unwrap().len(), 8);
    }

    #[test]
    fn empty_list_creates_dir() {
        let dir = tempfile::tempdir().unwrap();
        let case = dir.path().join("fresh");
        write_case(&case, &[]).unwrap();
        assert!(case.is_dir());
        assert_eq!(fs::read_dir(&case).unwrap().count(), 0);
    }

    #[test]
    fn rewrite_replaces_content() {
        let dir = tempfile::tempdir().unwrap();
        let entry: FilePlanEntry = "system/controlDict".parse().unwrap();
        write_case(dir.path(), &[FoamFile::new(entry.clone(), "old;\n")]).unwrap();
        write_case(dir.path(), &[FoamFile::new(entry.clone(), "new;\n")]).unwrap();
        let path = file_path(dir.path(), &entry);
        assert_eq!(fs::read_to_string(&path).unwrap(), "new;\n");
        let leftovers: Vec<_> = fs::read_dir(path.parent().unwrap())
            .unwrap()
            .filter_map(|e| e.ok())
            .filter(|e| e.file_name().to_string_lossy().ends_with(".tmp"))
            .collect();
        assert!(leftovers.is_empty());
    }
}
