//! Matrix Market files and the JSON model manifest.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{LqoSystem, Operator, RomSystem};
use crate::sparse::CscMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestFiles {
    #[serde(rename = "A")]
    pub a: String,
    #[serde(rename = "B")]
    pub b: String,
    #[serde(rename = "C")]
    pub c: String,
    #[serde(rename = "M")]
    pub m: Vec<String>,
}

/// `{name, n, m, p, files: {A, B, C, M: [..]}}`; file paths are relative to the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelManifest {
    pub name: String,
    pub n: usize,
    pub m: usize,
    pub p: usize,
    pub files: ManifestFiles,
}

/// Parse Matrix Market text. Coordinate files become sparse operators, array files dense ones.
pub fn parse_matrix_market(text: &str) -> Result<Operator> {
    let header = text
        .lines()
        .next()
        .ok_or_else(|| Error::Parse("empty Matrix Market input".into()))?
        .to_ascii_lowercase();
    if !header.starts_with("%%matrixmarket") {
        return Err(Error::Parse(format!(
            "missing Matrix Market banner: '{header}'"
        )));
    }
    let coo = nalgebra_sparse::io::load_coo_from_matrix_market_str::<f64>(text)
        .map_err(|e| Error::Parse(format!("{:?}: {}", e.kind(), e.message())))?;
    if header.split_whitespace().any(|w| w == "array") {
        let mut d = DMatrix::zeros(coo.nrows(), coo.ncols());
        for (r, c, v) in coo.triplet_iter() {
            d[(r, c)] += *v;
        }
        Ok(Operator::Dense(d))
    } else {
        let trip: Vec<(usize, usize, f64)> =
            coo.triplet_iter().map(|(r, c, v)| (r, c, *v)).collect();
        Ok(Operator::Sparse(CscMatrix::from_triplets(
            coo.nrows(),
            coo.ncols(),
            &trip,
        )?))
    }
}

pub fn read_matrix_market(path: &Path) -> Result<Operator> {
    let text = fs::read_to_string(path)?;
    parse_matrix_market(&text).map_err(|e| match e {
        Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Coordinate-format text; values use the shortest representation that round-trips.
pub fn coordinate_string(a: &CscMatrix) -> String {
    let mut s = String::from("%%MatrixMarket matrix coordinate real general\n");
    s.push_str(&format!("{} {} {}\n", a.nrows(), a.ncols(), a.nnz()));
    for (r, c, v) in a.triplets() {
        s.push_str(&format!("{} {} {:e}\n", r + 1, c + 1, v));
    }
    s
}

/// Column-major array-format text.
pub fn array_string(a: &DMatrix<f64>) -> String {
    let mut s = String::from("%%MatrixMarket matrix array real general\n");
    s.push_str(&format!("{} {}\n", a.nrows(), a.ncols()));
    for v in a.iter() {
        s.push_str(&format!("{v:e}\n"));
    }
    s
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    w.write_all(text.as_bytes())?;
    w.flush()?;
    Ok(())
}

pub fn write_operator(path: &Path, op: &Operator) -> Result<()> {
    match op {
        Operator::Sparse(s) => write_text(path, &coordinate_string(s)),
        Operator::Dense(d) => write_text(path, &array_string(d)),
    }
}

pub fn write_dense(path: &Path, a: &DMatrix<f64>) -> Result<()> {
    write_text(path, &array_string(a))
}

fn read_dense(path: &Path) -> Result<DMatrix<f64>> {
    Ok(read_matrix_market(path)?.to_dense())
}

fn check_shape(what: &str, got: (usize, usize), want: (usize, usize)) -> Result<()> {
    if got != want {
        return Err(Error::Dimension(format!(
            "{what} is {}x{}, manifest says {}x{}",
            got.0, got.1, want.0, want.1
        )));
    }
    Ok(())
}

pub fn read_manifest(path: &Path) -> Result<ModelManifest> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

fn base_dir(manifest: &Path) -> PathBuf {
    manifest.parent().map(Path::to_path_buf).unwrap_or_default()
}

/// Load a full-order system from its manifest.
pub fn load_model(manifest_path: &Path) -> Result<LqoSystem> {
    let man = read_manifest(manifest_path)?;
    let dir = base_dir(manifest_path);
    if man.files.m.len() != man.p {
        return Err(Error::Dimension(format!(
            "manifest lists {} quadratic terms for p = {}",
            man.files.m.len(),
            man.p
        )));
    }
    let a = read_matrix_market(&dir.join(&man.files.a))?;
    check_shape("A", (a.nrows(), a.ncols()), (man.n, man.n))?;
    let b = read_dense(&dir.join(&man.files.b))?;
    check_shape("B", b.shape(), (man.n, man.m))?;
    let c = read_dense(&dir.join(&man.files.c))?;
    check_shape("C", c.shape(), (man.p, man.n))?;
    let mut ms = Vec::with_capacity(man.p);
    for (i, f) in man.files.m.iter().enumerate() {
        let mi = read_matrix_market(&dir.join(f))?;
        check_shape(&format!("M[{i}]"), (mi.nrows(), mi.ncols()), (man.n, man.n))?;
        ms.push(mi);
    }
    LqoSystem::new(a, b, c, ms)
}

fn write_parts(
    dir: &Path,
    name: &str,
    a: &Operator,
    b: &DMatrix<f64>,
    c: &DMatrix<f64>,
    m: &[Operator],
) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let file = |part: &str| format!("{name}_{part}.mtx");
    let files = ManifestFiles {
        a: file("A"),
        b: file("B"),
        c: file("C"),
        m: (1..=m.len()).map(|i| file(&format!("M{i}"))).collect(),
    };
    write_operator(&dir.join(&files.a), a)?;
    write_dense(&dir.join(&files.b), b)?;
    write_dense(&dir.join(&files.c), c)?;
    for (f, mi) in files.m.iter().zip(m) {
        write_operator(&dir.join(f), mi)?;
    }
    let man = ModelManifest {
        name: name.to_string(),
        n: a.nrows(),
        m: b.ncols(),
        p: c.nrows(),
        files,
    };
    let path = dir.join(format!("{name}.json"));
    let json = serde_json::to_string_pretty(&man).map_err(|e| Error::Numerical(e.to_string()))?;
    write_text(&path, &(json + "\n"))?;
    Ok(path)
}

/// Write `sys` as `<dir>/<name>.json` plus one Matrix Market file per block.
pub fn save_model(dir: &Path, name: &str, sys: &LqoSystem) -> Result<PathBuf> {
    write_parts(dir, name, sys.a(), sys.b(), sys.c(), sys.m())
}

pub fn save_rom(dir: &Path, name: &str, rom: &RomSystem) -> Result<PathBuf> {
    let m: Vec<Operator> = rom.m().iter().cloned().map(Operator::Dense).collect();
    write_parts(
        dir,
        name,
        &Operator::Dense(rom.a().clone()),
        rom.b(),
        rom.c(),
        &m,
    )
}

pub fn load_rom(manifest_path: &Path) -> Result<RomSystem> {
    let sys = load_model(manifest_path)?;
    let d = sys.densified();
    RomSystem::new(d.a, d.b, d.c, d.m)
}
