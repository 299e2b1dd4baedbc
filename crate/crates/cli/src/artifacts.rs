//! Output directory bookkeeping and the run manifest.

use std::path::{Path, PathBuf};

use planecover::io;
use planecover::reconstruct::Image;
use planecover::xray::Sinogram;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::exit::Failure;

/// Writes artifacts into one directory and remembers their names. Writes
/// happen on the calling thread only.
pub struct OutDir {
    path: PathBuf,
    files: Vec<String>,
}

fn io_err(path: &Path) -> impl FnOnce(planecover::Error) -> Failure + '_ {
    move |e| Failure::io(format!("{}: {e}", path.display()))
}

impl OutDir {
    pub fn create(path: &Path) -> Result<Self, Failure> {
        std::fs::create_dir_all(path).map_err(|e| Failure::io(format!("{}: {e}", path.display())))?;
        Ok(OutDir { path: path.to_path_buf(), files: Vec::new() })
    }

    fn target(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.path.join(name)
    }

    pub fn json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<(), Failure> {
        let p = self.target(name);
        io::write_json_file(&p, value).map_err(io_err(&p))
    }

    pub fn table(&mut self, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<(), Failure> {
        let p = self.target(name);
        io::write_table_file(&p, header, rows).map_err(io_err(&p))
    }

    pub fn occupancy(&mut self, name: &str, probes: &[Vec<f64>], inside: &[bool]) -> Result<(), Failure> {
        let p = self.target(name);
        let file = std::fs::File::create(&p).map_err(|e| Failure::io(format!("{}: {e}", p.display())))?;
        io::write_occupancy(std::io::BufWriter::new(file), probes, inside).map_err(io_err(&p))
    }

    pub fn sinogram(&mut self, stem: &str, s: &Sinogram) -> Result<(), Failure> {
        self.files.push(format!("{stem}.csv"));
        self.files.push(format!("{stem}.json"));
        io::write_sinogram_files(&self.path, stem, s).map_err(io_err(&self.path))
    }

    pub fn pgm(&mut self, name: &str, img: &Image) -> Result<(), Failure> {
        let p = self.target(name);
        io::write_pgm_file(&p, img).map_err(io_err(&p))
    }

    pub fn bytes(&mut self, name: &str, data: &[u8]) -> Result<(), Failure> {
        let p = self.target(name);
        std::fs::write(&p, data).map_err(|e| Failure::io(format!("{}: {e}", p.display())))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

#[derive(Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config_file: &'static str,
    pub config_sha256: String,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub tolerance_scale: f64,
    pub rerun: String,
    pub artifacts: Vec<String>,
    pub checks_passed: bool,
    pub summary: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub struct RunInfo<'a> {
    pub command: &'a str,
    pub config_bytes: &'a [u8],
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub tolerance_scale: f64,
}

/// Copies the config next to the artifacts and writes `manifest.json`.
pub fn finish(mut out: OutDir, info: &RunInfo<'_>, checks_passed: bool, summary: String) -> Result<(), Failure> {
    out.bytes("config.json", info.config_bytes)?;
    let mut rerun = String::from("planecover");
    if let Some(t) = info.threads {
        rerun.push_str(&format!(" --threads {t}"));
    }
    if let Some(s) = info.seed {
        rerun.push_str(&format!(" --seed {s}"));
    }
    rerun.push_str(&format!(" --tolerance-scale {} {} --config config.json --out .", info.tolerance_scale, info.command));
    let mut artifacts = out.files.clone();
    artifacts.sort();
    let manifest = Manifest {
        tool: "planecover",
        version: env!("CARGO_PKG_VERSION"),
        command: info.command.to_string(),
        config_file: "config.json",
        config_sha256: sha256_hex(info.config_bytes),
        seed: info.seed,
        threads: info.threads,
        tolerance_scale: info.tolerance_scale,
        rerun,
        artifacts,
        checks_passed,
        summary,
    };
    let p = out.path().join("manifest.json");
    io::write_json_file(&p, &manifest).map_err(io_err(&p))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_of_empty_input() {
        assert_eq!(sha256_hex(b""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }

    #[test]
    fn manifest_lists_sorted_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutDir::create(dir.path()).unwrap();
        out.table("b.csv", &["x"], vec![vec![1.0]]).unwrap();
        out.json("a.json", &[1, 2]).unwrap();
        let info = RunInfo { command: "algebra", config_bytes: b"{}", seed: Some(4), threads: None, tolerance_scale: 2.0 };
        finish(out, &info, true, "done".into()).unwrap();
        let m: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("manifest.json")).unwrap()).unwrap();
        assert_eq!(m["artifacts"], serde_json::json!(["a.json", "b.csv", "config.json"]));
        assert_eq!(m["rerun"], "planecover --seed 4 --tolerance-scale 2 algebra --config config.json --out .");
    }
}
