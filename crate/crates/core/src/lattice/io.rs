use num::{BigInt, BigRational, Zero};
use serde::{Deserialize, Serialize};

use super::{Edge, Lattice, LatticeError, Point};

/// On-disk form of a lattice. Rationals are strings: `"3"`, `"-1/2"`, or a
/// finite decimal such as `"0.25"`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeFile {
    pub ambient_dim: usize,
    pub gauge_dim: usize,
    pub edges: Vec<EdgeFile>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeFile {
    pub src: Vec<String>,
    pub dst: Vec<String>,
}

pub fn parse_rational(s: &str) -> Result<BigRational, LatticeError> {
    let err = || LatticeError::Parse(s.to_string());
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| err())?;
        let d: BigInt = d.trim().parse().map_err(|_| err())?;
        if d.is_zero() {
            return Err(err());
        }
        return Ok(BigRational::new(n, d));
    }
    if let Some((int, frac)) = s.split_once('.') {
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(err());
        }
        let negative = int.starts_with('-');
        let digits = format!("{}{}", int.trim_start_matches(['-', '+']), frac);
        let mut n: BigInt = digits.parse().map_err(|_| err())?;
        if negative {
            n = -n;
        }
        let d = num::pow(BigInt::from(10), frac.len());
        return Ok(BigRational::new(n, d));
    }
    let n: BigInt = s.parse().map_err(|_| err())?;
    Ok(BigRational::from_integer(n))
}

fn parse_point(coords: &[String]) -> Result<Point, LatticeError> {
    coords
        .iter()
        .map(|c| parse_rational(c))
        .collect::<Result<Vec<_>, _>>()
        .map(Point::new)
}

impl TryFrom<LatticeFile> for Lattice {
    type Error = LatticeError;

    fn try_from(file: LatticeFile) -> Result<Self, Self::Error> {
        let edges = file
            .edges
            .iter()
            .map(|e| {
                Ok(Edge {
                    src: parse_point(&e.src)?,
                    dst: parse_point(&e.dst)?,
                })
            })
            .collect::<Result<Vec<_>, LatticeError>>()?;
        Lattice::new(file.ambient_dim, file.gauge_dim, edges)
    }
}

impl From<Lattice> for LatticeFile {
    fn from(l: Lattice) -> Self {
        let point = |p: &Point| p.coords.iter().map(|c| c.to_string()).collect();
        LatticeFile {
            ambient_dim: l.ambient_dim,
            gauge_dim: l.gauge_dim,
            edges: l
                .edges
                .iter()
                .map(|e| EdgeFile {
                    src: point(&e.src),
                    dst: point(&e.dst),
                })
                .collect(),
        }
    }
}
