//! Files: JSON documents, audit logs and instance directories.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use ceps_core::ceps::AuditEvent;
use ceps_core::matrix::MatrixInstance;
use ceps_core::tsp::{TspInstance, TspProblem};
use ceps_core::vrp::VrpInstance;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::tsplib;

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Creates missing parent directories, then replaces the file.
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| Error::json(path, e))
}

/// Pretty JSON with sorted object keys and a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_text(
        path,
        &(to_sorted_json(value).map_err(|e| Error::json(path, e))? + "\n"),
    )
}

/// Going through `serde_json::Value` sorts every object's keys.
pub fn to_sorted_json<T: Serialize>(value: &T) -> serde_json::Result<String> {
    let v = serde_json::to_value(value)?;
    serde_json::to_string_pretty(&v)
}

pub fn write_audit(path: &Path, events: &[AuditEvent]) -> Result<()> {
    let mut out = String::new();
    for e in events {
        out.push_str(&serde_json::to_string(e).map_err(|err| Error::json(path, err))?);
        out.push('\n');
    }
    write_text(path, &out)
}

pub fn append_audit(path: &Path, events: &[AuditEvent]) -> Result<()> {
    let mut f = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    for e in events {
        let line = serde_json::to_string(e).map_err(|err| Error::json(path, err))?;
        writeln!(f, "{line}").map_err(|err| Error::io(path, err))?;
    }
    Ok(())
}

pub fn read_audit(path: &Path) -> Result<Vec<AuditEvent>> {
    read_text(path)?
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

/// Files in `dir` with the given extension, sorted by name.
pub fn files_with_extension(dir: &Path, ext: &str) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_file() && path.extension().is_some_and(|e| e == ext) {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

/// Loads every `*.tsp` file, attaching optima from the sidecar. Instances
/// without a recorded optimum are certified when `problem` is given.
pub fn load_tsp_dir(dir: &Path, problem: Option<&TspProblem>) -> Result<Vec<TspInstance>> {
    let optima = tsplib::read_optima(dir)?;
    let mut out = Vec::new();
    for path in files_with_extension(dir, "tsp")? {
        let mut inst = tsplib::read_file(&path)?;
        inst.reference_optimum = optima.get(&inst.fingerprint()).copied();
        if inst.reference_optimum.is_none() {
            if let Some(p) = problem {
                inst = p.certify(&inst)?;
            }
        }
        out.push(inst);
    }
    if out.is_empty() {
        return Err(Error::usage(format!("no .tsp files in {}", dir.display())));
    }
    Ok(out)
}

pub fn save_tsp_dir(dir: &Path, instances: &[TspInstance]) -> Result<()> {
    for inst in instances {
        tsplib::write_file(&dir.join(format!("{}.tsp", inst.name)), inst)?;
    }
    tsplib::record_optima(dir, instances)
}

pub fn load_vrp_dir(dir: &Path) -> Result<Vec<VrpInstance>> {
    let out = files_with_extension(dir, "json")?
        .iter()
        .map(|p| read_json(p))
        .collect::<Result<Vec<VrpInstance>>>()?;
    if out.is_empty() {
        return Err(Error::usage(format!(
            "no .json instances in {}",
            dir.display()
        )));
    }
    Ok(out)
}

pub fn save_vrp_dir(dir: &Path, instances: &[VrpInstance]) -> Result<()> {
    for inst in instances {
        write_json(&dir.join(format!("{}.json", inst.name)), inst)?;
    }
    Ok(())
}

/// Display name of an instance in reports.
pub trait Named {
    fn name(&self) -> String;
}

impl Named for TspInstance {
    fn name(&self) -> String {
        self.name.clone()
    }
}

impl Named for VrpInstance {
    fn name(&self) -> String {
        self.name.clone()
    }
}

impl Named for MatrixInstance {
    fn name(&self) -> String {
        format!("s{}", self.0)
    }
}
