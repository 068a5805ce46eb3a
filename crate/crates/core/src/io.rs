//! JSON files for cylinder functions and banded operators.
//!
//! ```json
//! {"lattice": "l.json",
//!  "terms": [{"b": [[1]], "atoms": [{"xi": [[0.3]], "c": [1.0, 0.0]}]}]}
//! ```
//!
//! Frequencies are given per edge (one block of `gauge_dim` numbers per edge
//! in canonical order). `lattice` is either a path, resolved relative to the
//! file that names it, or an inline lattice object. Operators use the same
//! layout with `"hbar"` and `"bands"` in place of `"terms"`.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use num::complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cylinder::{Atom, CylinderError, CylinderFunction, Term};
use crate::lattice::{Lattice, LatticeError, LatticeFile};
use crate::weylq::{BandedOperator, HbarParam, QuantError};

#[derive(Debug, Error)]
pub enum FileError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{path}: {source}")]
    Lattice { path: PathBuf, source: LatticeError },
    #[error("{path}: {msg}")]
    Shape { path: PathBuf, msg: String },
    #[error(transparent)]
    Cylinder(#[from] CylinderError),
    #[error(transparent)]
    Quant(#[from] QuantError),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LatticeRef {
    Path(String),
    Inline(LatticeFile),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomFile {
    pub xi: Vec<Vec<f64>>,
    pub c: [f64; 2],
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermFile {
    pub b: Vec<Vec<i64>>,
    pub atoms: Vec<AtomFile>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionFile {
    pub lattice: LatticeRef,
    pub terms: Vec<TermFile>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorFile {
    pub lattice: LatticeRef,
    pub hbar: f64,
    pub bands: Vec<TermFile>,
}

fn read(path: &Path) -> Result<String, FileError> {
    fs::read_to_string(path).map_err(|source| FileError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn parse<T: for<'de> Deserialize<'de>>(path: &Path, text: &str) -> Result<T, FileError> {
    serde_json::from_str(text).map_err(|source| FileError::Json {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_lattice(path: &Path) -> Result<Lattice, FileError> {
    let file: LatticeFile = parse(path, &read(path)?)?;
    Lattice::try_from(file).map_err(|source| FileError::Lattice {
        path: path.to_path_buf(),
        source,
    })
}

fn resolve(lattice: LatticeRef, origin: &Path) -> Result<Lattice, FileError> {
    match lattice {
        LatticeRef::Path(p) => {
            let base = origin.parent().unwrap_or_else(|| Path::new("."));
            load_lattice(&base.join(p))
        }
        LatticeRef::Inline(file) => Lattice::try_from(file).map_err(|source| FileError::Lattice {
            path: origin.to_path_buf(),
            source,
        }),
    }
}

fn flatten<T: Copy>(blocks: &[Vec<T>], lattice: &Lattice, what: &str, path: &Path) -> Result<Vec<T>, FileError> {
    let (edges, n) = (lattice.num_edges(), lattice.gauge_dim());
    if blocks.len() != edges || blocks.iter().any(|b| b.len() != n) {
        return Err(FileError::Shape {
            path: path.to_path_buf(),
            msg: format!("{what} must have {edges} blocks of {n} numbers"),
        });
    }
    Ok(blocks.concat())
}

fn blocks<T: Copy>(flat: &[T], n: usize) -> Vec<Vec<T>> {
    flat.chunks(n).map(|c| c.to_vec()).collect()
}

fn terms_from_file(files: Vec<TermFile>, lattice: &Lattice, path: &Path) -> Result<Vec<Term>, FileError> {
    files
        .into_iter()
        .map(|t| {
            let b = flatten(&t.b, lattice, "b", path)?;
            let atoms = t
                .atoms
                .into_iter()
                .map(|a| {
                    Ok(Atom::new(
                        flatten(&a.xi, lattice, "xi", path)?,
                        Complex64::new(a.c[0], a.c[1]),
                    ))
                })
                .collect::<Result<_, FileError>>()?;
            Ok(Term::new(b, atoms))
        })
        .collect()
}

fn terms_to_file(terms: &[Term], n: usize) -> Vec<TermFile> {
    terms
        .iter()
        .map(|t| TermFile {
            b: blocks(&t.b, n),
            atoms: t
                .atoms
                .iter()
                .map(|a| AtomFile {
                    xi: blocks(&a.xi, n),
                    c: [a.c.re, a.c.im],
                })
                .collect(),
        })
        .collect()
}

pub fn parse_function(text: &str, origin: &Path) -> Result<CylinderFunction, FileError> {
    let file: FunctionFile = parse(origin, text)?;
    let lattice = resolve(file.lattice, origin)?;
    let terms = terms_from_file(file.terms, &lattice, origin)?;
    Ok(CylinderFunction::new(Arc::new(lattice), terms)?)
}

pub fn load_function(path: &Path) -> Result<CylinderFunction, FileError> {
    parse_function(&read(path)?, path)
}

pub fn parse_operator(text: &str, origin: &Path) -> Result<BandedOperator, FileError> {
    let file: OperatorFile = parse(origin, text)?;
    let hbar = HbarParam::new(file.hbar)?;
    let lattice = resolve(file.lattice, origin)?;
    let terms = terms_from_file(file.bands, &lattice, origin)?;
    Ok(BandedOperator::new(Arc::new(lattice), hbar, terms)?)
}

pub fn load_operator(path: &Path) -> Result<BandedOperator, FileError> {
    parse_operator(&read(path)?, path)
}

/// Pretty JSON with the lattice inlined.
pub fn function_to_json(f: &CylinderFunction) -> String {
    let file = FunctionFile {
        lattice: LatticeRef::Inline(LatticeFile::from((**f.lattice()).clone())),
        terms: terms_to_file(f.terms(), f.lattice().gauge_dim()),
    };
    serde_json::to_string_pretty(&file).expect("plain data serializes") + "\n"
}

pub fn operator_to_json(op: &BandedOperator) -> String {
    let file = OperatorFile {
        lattice: LatticeRef::Inline(LatticeFile::from((**op.lattice()).clone())),
        hbar: op.hbar().value(),
        bands: terms_to_file(op.bands(), op.lattice().gauge_dim()),
    };
    serde_json::to_string_pretty(&file).expect("plain data serializes") + "\n"
}

pub fn lattice_to_json(l: &Lattice) -> String {
    serde_json::to_string_pretty(&LatticeFile::from(l.clone())).expect("plain data serializes") + "\n"
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weylq::quantize;

    const LATTICE: &str = r#"{"ambient_dim": 2, "gauge_dim": 2,
        "edges": [{"src": ["0","0"], "dst": ["1","0"]}, {"src": ["0","0"], "dst": ["0","1"]}]}"#;

    #[test]
    fn inline_function_round_trip() {
        let text = format!(
            r#"{{"lattice": {LATTICE},
               "terms": [{{"b": [[1, 0], [0, -1]],
                          "atoms": [{{"xi": [[0.1, 0.2], [0.0, -0.3]], "c": [1.0, -0.5]}}]}}]}}"#
        );
        let f = parse_function(&text, Path::new("f.json")).unwrap();
        assert_eq!(f.terms()[0].b, vec![1, 0, 0, -1]);
        assert_eq!(f.terms()[0].atoms[0].xi, vec![0.1, 0.2, 0.0, -0.3]);
        let again = parse_function(&function_to_json(&f), Path::new("g.json")).unwrap();
        assert_eq!(again, f);

        let op = quantize(&f, HbarParam::new(0.25).unwrap()).unwrap();
        let back = parse_operator(&operator_to_json(&op), Path::new("op.json")).unwrap();
        assert_eq!(back, op);
    }

    #[test]
    fn lattice_by_path() {
        let dir = std::env::temp_dir().join(format!("latquant-io-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        fs::write(dir.join("l.json"), LATTICE).unwrap();
        let fpath = dir.join("f.json");
        fs::write(
            &fpath,
            r#"{"lattice": "l.json", "terms": [{"b": [[0,0],[0,0]], "atoms": [{"xi": [[0,0],[0,0]], "c": [1,0]}]}]}"#,
        )
        .unwrap();
        let f = load_function(&fpath).unwrap();
        assert_eq!(f, CylinderFunction::one(f.lattice().clone()));
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn shape_and_hbar_errors() {
        let bad = format!(r#"{{"lattice": {LATTICE}, "terms": [{{"b": [[1]], "atoms": []}}]}}"#);
        assert!(matches!(parse_function(&bad, Path::new("f.json")), Err(FileError::Shape { .. })));
        let op = format!(r#"{{"lattice": {LATTICE}, "hbar": 1.5, "bands": []}}"#);
        let err = parse_operator(&op, Path::new("op.json")).unwrap_err();
        assert!(err.to_string().contains("hbar outside [-1,1]"));
    }
}
