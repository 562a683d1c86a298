//! All-or-nothing output: every file is staged next to its target and only
//! renamed into place once all of them were written.

use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};
use tempfile::NamedTempFile;

pub fn check_targets(dir: &Path, names: &[&str], force: bool) -> Result<()> {
    if dir.exists() && !dir.is_dir() {
        bail!("output path {} exists and is not a directory", dir.display());
    }
    if force {
        return Ok(());
    }
    for name in names {
        let p = dir.join(name);
        if p.exists() {
            bail!("refusing to overwrite {} (pass --force)", p.display());
        }
    }
    Ok(())
}

pub fn write_all(dir: &Path, files: &[(String, String)], force: bool) -> Result<()> {
    let names: Vec<&str> = files.iter().map(|(n, _)| n.as_str()).collect();
    check_targets(dir, &names, force)?;
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut staged = Vec::with_capacity(files.len());
    for (name, contents) in files {
        let mut tmp = NamedTempFile::new_in(dir).with_context(|| format!("staging {name}"))?;
        tmp.write_all(contents.as_bytes())?;
        tmp.flush()?;
        staged.push((tmp, dir.join(name)));
    }
    for (tmp, target) in staged {
        tmp.persist(&target)
            .with_context(|| format!("writing {}", target.display()))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn refuses_existing_without_force() {
        let d = tempfile::tempdir().unwrap();
        let files = vec![("a.txt".to_string(), "1".to_string())];
        write_all(d.path(), &files, false).unwrap();
        let again = vec![("a.txt".to_string(), "2".to_string())];
        assert!(write_all(d.path(), &again, false).is_err());
        assert_eq!(fs::read_to_string(d.path().join("a.txt")).unwrap(), "1");
        write_all(d.path(), &again, true).unwrap();
        assert_eq!(fs::read_to_string(d.path().join("a.txt")).unwrap(), "2");
    }

    #[test]
    fn conflict_writes_nothing() {
        let d = tempfile::tempdir().unwrap();
        fs::write(d.path().join("b.txt"), "old").unwrap();
        let files = vec![
            ("a.txt".to_string(), "new".to_string()),
            ("b.txt".to_string(), "new".to_string()),
        ];
        assert!(write_all(d.path(), &files, false).is_err());
        assert!(!d.path().join("a.txt").exists());
        assert_eq!(fs::read_dir(d.path()).unwrap().count(), 1);
    }
}
