//! Output files are written to a hidden temporary name and renamed into
//! place, so a directory never holds a partially written result.

use std::fs;
use std::io;
use std::path::Path;

pub fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    let tmp = dir.join(format!(".{name}.tmp"));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, dir.join(name))
}

pub fn write_json(dir: &Path, name: &str, value: &impl serde::Serialize) -> io::Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(io::Error::other)?;
    text.push('\n');
    write_atomic(dir, name, text.as_bytes())
}

/// Removes `state_{i}.gfld` files left by an earlier, longer run.
pub fn remove_stale_states(dir: &Path, keep: usize) -> io::Result<()> {
    let Ok(entries) = fs::read_dir(dir) else {
        return Ok(());
    };
    for entry in entries {
        let entry = entry?;
        let name = entry.file_name();
        let Some(index) = name
            .to_str()
            .and_then(|n| n.strip_prefix("state_"))
            .and_then(|n| n.strip_suffix(".gfld"))
            .and_then(|n| n.parse::<usize>().ok())
        else {
            continue;
        };
        if index >= keep {
            fs::remove_file(entry.path())?;
        }
    }
    Ok(())
}
