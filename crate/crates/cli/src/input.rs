//! Count-file parsing: one nonnegative integer per line, or a single-column
//! CSV whose first line is the header `count`.

use std::path::Path;

use crate::CliError;

pub fn read_counts(path: &Path) -> Result<Vec<u32>, CliError> {
    let content = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    let mut counts = Vec::new();
    let mut seen_any = false;
    for (idx, raw) in content.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if !seen_any && line == "count" {
            seen_any = true;
            continue;
        }
        seen_any = true;
        let value: u32 = line.parse().map_err(|_| {
            CliError::Input(format!(
                "line {}: {line:?} is not a nonnegative integer count",
                idx + 1
            ))
        })?;
        counts.push(value);
    }
    if counts.is_empty() {
        return Err(CliError::Input(format!(
            "{} contains no counts",
            path.display()
        )));
    }
    Ok(counts)
}
