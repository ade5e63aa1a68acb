//! Run directories and file writers. Every file carries the schema version.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use num_complex::Complex64 as C64;
use serde::Serialize;
use sha2::{Digest, Sha256};

use ahpl_core::ahpl::{EscapeField, Grid};

use crate::config::{ExperimentConfig, SCHEMA_VERSION};
use crate::error::LabResult;

/// Writes `bytes` to `path` through a sibling temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> LabResult<()> {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

#[derive(Serialize)]
struct Stamped<'a, T: Serialize> {
    schema_version: u32,
    #[serde(flatten)]
    body: &'a T,
}

/// JSON with `schema_version` first and struct fields in declaration order.
pub fn json_bytes<T: Serialize>(body: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(&Stamped { schema_version: SCHEMA_VERSION, body }).expect("report serializes");
    s.push('\n');
    s.into_bytes()
}

/// CSV with a schema comment line, a header row, and shortest round-trip floats.
pub fn csv_bytes(header: &[&str], rows: &[Vec<String>]) -> Vec<u8> {
    let mut s = format!("# schema_version {SCHEMA_VERSION}\n{}\n", header.join(","));
    for r in rows {
        debug_assert_eq!(r.len(), header.len());
        s.push_str(&r.join(","));
        s.push('\n');
    }
    s.into_bytes()
}

/// Binary PPM (P6, 8-bit) with the schema version in a header comment.
pub fn ppm_bytes(width: usize, height: usize, rgb: &[u8]) -> Vec<u8> {
    assert_eq!(rgb.len(), 3 * width * height);
    let mut out = format!("P6\n# schema_version {SCHEMA_VERSION}\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(rgb);
    out
}

/// Exit-time palette; non-escaping pixels are black.
pub const PALETTE: [[u8; 3]; 16] = [
    [9, 1, 47],
    [4, 4, 73],
    [0, 7, 100],
    [12, 44, 138],
    [24, 82, 177],
    [57, 125, 209],
    [134, 181, 229],
    [211, 236, 248],
    [241, 233, 191],
    [248, 201, 95],
    [255, 170, 0],
    [204, 128, 0],
    [153, 87, 0],
    [106, 52, 3],
    [66, 30, 15],
    [25, 7, 26],
];

pub fn render(field: &EscapeField) -> Vec<u8> {
    let mut rgb = Vec::with_capacity(3 * field.times.len());
    for &t in &field.times {
        let c = if t == field.max_iter { [0, 0, 0] } else { PALETTE[t as usize % PALETTE.len()] };
        rgb.extend_from_slice(&c);
    }
    rgb
}

/// Nearest pixel of `z`, or `None` outside the grid.
pub fn pixel_of(grid: &Grid, z: C64) -> Option<(usize, usize)> {
    let sx = if grid.nx > 1 { grid.half_width / (grid.nx - 1) as f64 } else { return None };
    let sy = if grid.ny > 1 { grid.half_height / (grid.ny - 1) as f64 } else { return None };
    let fi = ((z.re - grid.center.re) / sx + (grid.nx - 1) as f64) / 2.0;
    let fj = ((grid.ny - 1) as f64 - (z.im - grid.center.im) / sy) / 2.0;
    let (i, j) = (fi.round(), fj.round());
    if i < 0.0 || j < 0.0 || i >= grid.nx as f64 || j >= grid.ny as f64 {
        return None;
    }
    Some((i as usize, j as usize))
}

/// Draws the vertices of `curve` and linear interpolants between them.
pub fn overlay(rgb: &mut [u8], grid: &Grid, curve: &[C64], color: [u8; 3]) {
    let step = grid.half_width / grid.nx.max(2) as f64;
    for w in curve.windows(2) {
        let n = ((w[1] - w[0]).norm() / step).ceil().clamp(1.0, 1e4) as usize;
        for k in 0..=n {
            let z = w[0] + (w[1] - w[0]) * (k as f64 / n as f64);
            if let Some((i, j)) = pixel_of(grid, z) {
                let o = 3 * (j * grid.nx + i);
                rgb[o..o + 3].copy_from_slice(&color);
            }
        }
    }
}

/// One directory per run, named by the command and a digest of the config.
pub struct RunDir {
    pub path: PathBuf,
    log: Vec<String>,
}

impl RunDir {
    pub fn create(root: &Path, command: &str, config: &ExperimentConfig) -> LabResult<Self> {
        let snapshot = config.to_json();
        let digest = Sha256::digest(format!("{command}\n{snapshot}").as_bytes());
        let tag: String = digest.iter().take(6).map(|b| format!("{b:02x}")).collect();
        let path = root.join(format!("{command}-{tag}"));
        fs::create_dir_all(&path)?;
        let run = Self { path, log: Vec::new() };
        run.write("config.json", &json_bytes(config))?;
        Ok(run)
    }

    pub fn write(&self, name: &str, bytes: &[u8]) -> LabResult<()> {
        write_atomic(&self.path.join(name), bytes)
    }

    pub fn json<T: Serialize>(&self, name: &str, body: &T) -> LabResult<()> {
        self.write(name, &json_bytes(body))
    }

    pub fn csv(&self, name: &str, header: &[&str], rows: &[Vec<String>]) -> LabResult<()> {
        self.write(name, &csv_bytes(header, rows))
    }

    pub fn ppm(&self, name: &str, width: usize, height: usize, rgb: &[u8]) -> LabResult<()> {
        self.write(name, &ppm_bytes(width, height, rgb))
    }

    /// Log lines hold no timings or paths, so logs are reproducible too.
    pub fn log(&mut self, line: impl Into<String>) {
        let line = line.into();
        eprintln!("[ahpl] {line}");
        self.log.push(line);
    }

    pub fn finish(self) -> LabResult<PathBuf> {
        let mut text = format!("# schema_version {SCHEMA_VERSION}\n");
        for l in &self.log {
            text.push_str(l);
            text.push('\n');
        }
        self.write("log.txt", text.as_bytes())?;
        Ok(self.path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ppm_header_and_size() {
        let b = ppm_bytes(2, 1, &[1, 2, 3, 4, 5, 6]);
        let head = b"P6\n# schema_version 1\n2 1\n255\n";
        assert_eq!(&b[..head.len()], head);
        assert_eq!(b.len(), head.len() + 6);
    }

    #[test]
    fn csv_has_header_after_stamp() {
        let b = csv_bytes(&["n", "x"], &[vec!["1".into(), "0.5".into()]]);
        assert_eq!(String::from_utf8(b).unwrap(), "# schema_version 1\nn,x\n1,0.5\n");
    }

    #[test]
    fn json_is_stamped_first() {
        #[derive(Serialize)]
        struct R {
            b: u32,
            a: u32,
        }
        let s = String::from_utf8(json_bytes(&R { b: 1, a: 2 })).unwrap();
        assert_eq!(s, "{\n  \"schema_version\": 1,\n  \"b\": 1,\n  \"a\": 2\n}\n");
    }

    #[test]
    fn pixels_invert_grid_points() {
        let g = Grid::covering(2.0, 33, 17);
        for (i, j) in [(0, 0), (32, 16), (16, 8), (5, 11)] {
            assert_eq!(pixel_of(&g, g.point(i, j)), Some((i, j)));
        }
        assert_eq!(pixel_of(&g, C64::new(3.0, 0.0)), None);
    }

    #[test]
    fn atomic_write_leaves_no_temporary() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.txt");
        write_atomic(&p, b"x").unwrap();
        write_atomic(&p, b"y").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"y");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
