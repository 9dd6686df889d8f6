use std::fs;
use std::path::Path;

use super::ReviewerError;

fn is_time_dir(name: &str) -> bool {
    name != "0" && name.parse::<f64>().map(|v| v.is_finite() && v >= 0.0).unwrap_or(false)
}

/// Removes everything a run produces, leaving the configuration files.
pub fn restore_state(case_dir: &Path) -> Result<(), ReviewerError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| ReviewerError::Io { path, source }
    };
    for entry in fs::read_dir(case_dir).map_err(io(case_dir))? {
        let entry = entry.map_err(io(case_dir))?;
        let path = entry.path();
        let name = entry.file_name().to_string_lossy().into_owned();
        let is_dir = path.is_dir();
        if is_dir && (is_time_dir(&name) || name == "postProcessing") {
            fs::remove_dir_all(&path).map_err(io(&path))?;
        } else if !is_dir && name.starts_with("log.") {
            fs::remove_file(&path).map_err(io(&path))?;
        }
    }
    let mesh = case_dir.join("constant/polyMesh");
    if mesh.is_dir() {
        fs::remove_dir_all(&mesh).map_err(io(&mesh))?;
    }
    Ok(())
}
