//! Geometric lattices in ℝ^D with exact rational coordinates.
//!
//! A lattice is a finite set of directed straight edges whose open interiors
//! are pairwise disjoint. Edges are kept in canonical order (lexicographic on
//! `(src, dst)`), and that position is the edge's index everywhere else in
//! the crate: multi-indices, frequencies and momenta are laid out edge-major
//! with `gauge_dim` components per edge.

mod geometry;
mod io;
mod refine;

use std::fmt;

use num::{BigInt, BigRational, ToPrimitive};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use geometry::{contact, line_parameter, point_at, Contact};
pub use io::{parse_rational, EdgeFile, LatticeFile};
pub use refine::{leq, refine_uniform, supremum, EdgeOrigin, RefinementPath, RefinementStep};

/// Shorthand for the exact rational `num / den`.
pub fn rat(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

#[derive(Debug, Error, PartialEq)]
pub enum LatticeError {
    #[error("invalid lattice: {}", join_violations(.0))]
    Invalid(Vec<Violation>),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("edge source must precede its target lexicographically")]
    Misoriented,
    #[error("invalid refinement step: {0}")]
    InvalidStep(String),
    #[error("paths do not compose: target of the first is not the source of the second")]
    NotComposable,
    #[error("no common refinement: {0}")]
    NotRepresentable(String),
    #[error("cannot parse rational {0:?}")]
    Parse(String),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

/// A point of ℝ^D. Ordering is lexicographic on coordinates.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Point {
    pub coords: Vec<BigRational>,
}

impl Point {
    pub fn new(coords: Vec<BigRational>) -> Self {
        Point { coords }
    }

    pub fn from_ints(coords: &[i64]) -> Self {
        Point {
            coords: coords.iter().map(|&c| rat(c, 1)).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.coords.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// Directed straight edge with `src < dst`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge {
    pub src: Point,
    pub dst: Point,
}

impl Edge {
    pub fn new(src: Point, dst: Point) -> Result<Self, LatticeError> {
        if src.dim() != dst.dim() {
            return Err(LatticeError::DimensionMismatch(format!(
                "endpoints have dimensions {} and {}",
                src.dim(),
                dst.dim()
            )));
        }
        if src >= dst {
            return Err(LatticeError::Misoriented);
        }
        Ok(Edge { src, dst })
    }

    /// Edge between two distinct points, oriented lexicographically.
    pub fn between(a: Point, b: Point) -> Result<Self, LatticeError> {
        if a <= b {
            Edge::new(a, b)
        } else {
            Edge::new(b, a)
        }
    }

    /// Euclidean length. Irrational in general, so only a float is exposed.
    pub fn length(&self) -> f64 {
        self.src
            .coords
            .iter()
            .zip(&self.dst.coords)
            .map(|(a, b)| (b - a).to_f64().unwrap_or(f64::NAN).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}->{}", self.src, self.dst)
    }
}

/// One failed lattice invariant. Indices refer to the edge list as given.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    WrongDimension {
        edge: usize,
        expected: usize,
        found: usize,
    },
    Degenerate {
        edge: usize,
    },
    Misoriented {
        edge: usize,
    },
    Duplicate {
        first: usize,
        second: usize,
    },
    Crossing {
        first: usize,
        second: usize,
        at: Point,
    },
    Overlap {
        first: usize,
        second: usize,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::WrongDimension {
                edge,
                expected,
                found,
            } => write!(
                f,
                "edge {edge}: expected ambient dimension {expected}, found {found}"
            ),
            Violation::Degenerate { edge } => write!(f, "edge {edge}: zero length"),
            Violation::Misoriented { edge } => {
                write!(f, "edge {edge}: source does not precede target")
            }
            Violation::Duplicate { first, second } => {
                write!(f, "edges {first} and {second}: duplicate")
            }
            Violation::Crossing { first, second, at } => {
                write!(f, "edges {first} and {second}: open-interior crossing at {at}")
            }
            Violation::Overlap { first, second } => {
                write!(f, "edges {first} and {second}: collinear overlap")
            }
        }
    }
}

/// Checks every lattice invariant on a raw edge list. An empty result means
/// the edges form a valid lattice in ℝ^`ambient_dim`.
pub fn validate(ambient_dim: usize, edges: &[Edge]) -> Vec<Violation> {
    let mut violations = Vec::new();
    let mut usable = vec![true; edges.len()];
    for (i, e) in edges.iter().enumerate() {
        for p in [&e.src, &e.dst] {
            if p.dim() != ambient_dim {
                violations.push(Violation::WrongDimension {
                    edge: i,
                    expected: ambient_dim,
                    found: p.dim(),
                });
                usable[i] = false;
                break;
            }
        }
        if !usable[i] {
            continue;
        }
        if e.src == e.dst {
            violations.push(Violation::Degenerate { edge: i });
            usable[i] = false;
        } else if e.src > e.dst {
            violations.push(Violation::Misoriented { edge: i });
        }
    }
    for i in 0..edges.len() {
        for j in (i + 1)..edges.len() {
            if !usable[i] || !usable[j] {
                continue;
            }
            let same = (edges[i].src == edges[j].src && edges[i].dst == edges[j].dst)
                || (edges[i].src == edges[j].dst && edges[i].dst == edges[j].src);
            if same {
                violations.push(Violation::Duplicate {
                    first: i,
                    second: j,
                });
                continue;
            }
            match contact(&edges[i], &edges[j]) {
                Contact::Disjoint => {}
                Contact::Crossing(at) => violations.push(Violation::Crossing {
                    first: i,
                    second: j,
                    at,
                }),
                Contact::Overlap { .. } => violations.push(Violation::Overlap {
                    first: i,
                    second: j,
                }),
            }
        }
    }
    violations
}

/// A validated lattice: immutable, edges in canonical order.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "LatticeFile", into = "LatticeFile")]
pub struct Lattice {
    ambient_dim: usize,
    gauge_dim: usize,
    edges: Vec<Edge>,
}

impl Lattice {
    pub fn new(ambient_dim: usize, gauge_dim: usize, edges: Vec<Edge>) -> Result<Self, LatticeError> {
        if ambient_dim == 0 || gauge_dim == 0 {
            return Err(LatticeError::DimensionMismatch(
                "ambient and gauge dimensions must be positive".into(),
            ));
        }
        let violations = validate(ambient_dim, &edges);
        if !violations.is_empty() {
            return Err(LatticeError::Invalid(violations));
        }
        Ok(Self::from_edges_unchecked(ambient_dim, gauge_dim, edges))
    }

    pub(crate) fn from_edges_unchecked(ambient_dim: usize, gauge_dim: usize, mut edges: Vec<Edge>) -> Self {
        edges.sort();
        Lattice {
            ambient_dim,
            gauge_dim,
            edges,
        }
    }

    /// A lattice of unit-spaced collinear edges `(k,0,…)→(k+1,0,…)`, handy for tests.
    pub fn chain(ambient_dim: usize, gauge_dim: usize, len: usize) -> Self {
        let edges = (0..len as i64)
            .map(|k| {
                let mut a = vec![0; ambient_dim];
                let mut b = vec![0; ambient_dim];
                a[0] = k;
                b[0] = k + 1;
                Edge::new(Point::from_ints(&a), Point::from_ints(&b)).unwrap()
            })
            .collect();
        Self::from_edges_unchecked(ambient_dim, gauge_dim, edges)
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn gauge_dim(&self) -> usize {
        self.gauge_dim
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Length `n·|l|` of multi-indices, frequencies and momenta on this lattice.
    pub fn coord_dim(&self) -> usize {
        self.gauge_dim * self.edges.len()
    }

    pub fn index_of(&self, edge: &Edge) -> Option<usize> {
        self.edges.binary_search(edge).ok()
    }

    pub fn edge_lengths(&self) -> Vec<f64> {
        self.edges.iter().map(Edge::length).collect()
    }

    /// Re-runs validation; always empty for a constructed lattice.
    pub fn validate(&self) -> Vec<Violation> {
        validate(self.ambient_dim, &self.edges)
    }

    pub(crate) fn same_dims(&self, other: &Lattice) -> Result<(), LatticeError> {
        if self.ambient_dim != other.ambient_dim || self.gauge_dim != other.gauge_dim {
            return Err(LatticeError::DimensionMismatch(format!(
                "(D={}, n={}) vs (D={}, n={})",
                self.ambient_dim, self.gauge_dim, other.ambient_dim, other.gauge_dim
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(c: &[(i64, i64)]) -> Point {
        Point::new(c.iter().map(|&(n, d)| rat(n, d)).collect())
    }

    #[test]
    fn single_edge_is_valid() {
        let e = Edge::new(Point::from_ints(&[0, 0]), Point::from_ints(&[1, 0])).unwrap();
        assert!(validate(2, &[e]).is_empty());
    }

    #[test]
    fn crossing_diagonals_are_reported_with_the_point() {
        let e = Edge::new(Point::from_ints(&[0, 0]), Point::from_ints(&[1, 1])).unwrap();
        let f = Edge::new(Point::from_ints(&[0, 1]), Point::from_ints(&[1, 0])).unwrap();
        let v = validate(2, &[e, f]);
        assert_eq!(
            v,
            vec![Violation::Crossing {
                first: 0,
                second: 1,
                at: p(&[(1, 2), (1, 2)])
            }]
        );
        assert_eq!(
            v[0].to_string(),
            "edges 0 and 1: open-interior crossing at (1/2,1/2)"
        );
    }

    #[test]
    fn boundary_contact_allowed() {
        let e = Edge::new(Point::from_ints(&[0, 0]), Point::from_ints(&[1, 0])).unwrap();
        let f = Edge::new(Point::from_ints(&[1, 0]), Point::from_ints(&[2, 0])).unwrap();
        assert!(validate(2, &[e, f]).is_empty());
    }

    #[test]
    fn raw_violations() {
        let a = Point::from_ints(&[0, 0]);
        let b = Point::from_ints(&[1, 0]);
        let raw = vec![
            Edge { src: b.clone(), dst: a.clone() },
            Edge { src: a.clone(), dst: a.clone() },
            Edge { src: a.clone(), dst: b.clone() },
            Edge { src: Point::from_ints(&[0]), dst: Point::from_ints(&[1]) },
        ];
        let v = validate(2, &raw);
        assert!(v.contains(&Violation::Misoriented { edge: 0 }));
        assert!(v.contains(&Violation::Degenerate { edge: 1 }));
        assert!(v.contains(&Violation::Duplicate { first: 0, second: 2 }));
        assert!(v.contains(&Violation::WrongDimension { edge: 3, expected: 2, found: 1 }));
    }

    #[test]
    fn overlap_is_invalid() {
        let e = Edge::new(Point::from_ints(&[0, 0]), Point::from_ints(&[2, 0])).unwrap();
        let f = Edge::new(Point::from_ints(&[1, 0]), Point::from_ints(&[3, 0])).unwrap();
        assert!(matches!(
            Lattice::new(2, 1, vec![e, f]),
            Err(LatticeError::Invalid(_))
        ));
    }

    #[test]
    fn edges_are_sorted_and_lengths_float() {
        let e = Edge::new(Point::from_ints(&[1, 0]), Point::from_ints(&[2, 0])).unwrap();
        let f = Edge::new(Point::from_ints(&[0, 0]), Point::from_ints(&[3, 4])).unwrap();
        let l = Lattice::new(2, 1, vec![e.clone(), f.clone()]).unwrap();
        assert_eq!(l.edges(), &[f, e]);
        assert_eq!(l.edge_lengths(), vec![5.0, 1.0]);
        assert_eq!(l.coord_dim(), 2);
    }

    #[test]
    fn misoriented_edge_rejected_by_constructor() {
        assert!(Edge::new(Point::from_ints(&[1]), Point::from_ints(&[0])).is_err());
        assert!(Edge::between(Point::from_ints(&[1]), Point::from_ints(&[0])).is_ok());
    }
}
