//! Cylinder functions on the phase space `T*G^l`, `G = 𝕋^n`.
//!
//! An element is a finite sum of terms `e^{2πi b·q} ⊗ Σ_j c_j e^{i ξ_j·v}`:
//! an integer torus frequency `b` tensored with the Fourier transform of a
//! finite atomic measure. Products, adjoints, Poisson brackets, pullbacks
//! along refinements and the free electric flow all act exactly on this atom
//! data. The operator system `𝓜₀^l` is the subspace whose atoms satisfy
//! `‖ξ_e‖₂ < 1/2` on every edge.

mod supnorm;

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use num::complex::Complex64;
use thiserror::Error;

use crate::lattice::{refine_uniform, Lattice, RefinementPath};

pub use supnorm::{sup_norm, SupNorm};

#[derive(Debug, Error, PartialEq)]
pub enum CylinderError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("functions live on different lattices")]
    LatticeMismatch,
    #[error("refinement path does not start at the function's lattice")]
    PathMismatch,
    #[error("not in the operator system: {0}")]
    NotInOperatorSystem(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Atom {
    pub xi: Vec<f64>,
    pub c: Complex64,
}

impl Atom {
    pub fn new(xi: Vec<f64>, c: Complex64) -> Self {
        Atom { xi, c }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Term {
    pub b: Vec<i64>,
    pub atoms: Vec<Atom>,
}

impl Term {
    pub fn new(b: Vec<i64>, atoms: Vec<Atom>) -> Self {
        Term { b, atoms }
    }
}

/// Bit-exact key for frequency vectors; `-0.0` is folded into `0.0`.
#[derive(Clone, Debug)]
pub(crate) struct XiKey(pub Vec<f64>);

impl XiKey {
    pub(crate) fn new(xi: &[f64]) -> Self {
        XiKey(xi.iter().map(|&x| if x == 0.0 { 0.0 } else { x }).collect())
    }
}

impl PartialEq for XiKey {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for XiKey {}

impl PartialOrd for XiKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for XiKey {
    fn cmp(&self, other: &Self) -> Ordering {
        for (a, b) in self.0.iter().zip(&other.0) {
            match a.total_cmp(b) {
                Ordering::Equal => continue,
                o => return o,
            }
        }
        self.0.len().cmp(&other.0.len())
    }
}

pub(crate) type TermMap = BTreeMap<Vec<i64>, BTreeMap<XiKey, Complex64>>;

pub(crate) fn accumulate(map: &mut TermMap, b: Vec<i64>, xi: &[f64], c: Complex64) {
    *map.entry(b)
        .or_default()
        .entry(XiKey::new(xi))
        .or_insert(Complex64::new(0.0, 0.0)) += c;
}

/// Sorted terms with merged, nonzero atoms.
pub(crate) fn collect_terms(map: TermMap) -> Vec<Term> {
    map.into_iter()
        .filter_map(|(b, atoms)| {
            let atoms: Vec<Atom> = atoms
                .into_iter()
                .filter(|(_, c)| *c != Complex64::new(0.0, 0.0))
                .map(|(k, c)| Atom { xi: k.0, c })
                .collect();
            (!atoms.is_empty()).then_some(Term { b, atoms })
        })
        .collect()
}

pub(crate) fn dot_int(b: &[i64], x: &[f64]) -> f64 {
    b.iter().zip(x).map(|(&bi, xi)| bi as f64 * xi).sum()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Largest per-edge Euclidean norm of `xi` (blocks of `n`).
pub(crate) fn max_edge_norm(xi: &[f64], n: usize) -> f64 {
    xi.chunks(n)
        .map(|block| block.iter().map(|x| x * x).sum::<f64>().sqrt())
        .fold(0.0, f64::max)
}

pub(crate) fn same_lattice(a: &Arc<Lattice>, b: &Arc<Lattice>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

/// An element of `𝓐₀^l` with finitely many atoms.
#[derive(Clone, Debug, PartialEq)]
pub struct CylinderFunction {
    lattice: Arc<Lattice>,
    terms: Vec<Term>,
}

impl CylinderFunction {
    pub fn new(lattice: Arc<Lattice>, terms: Vec<Term>) -> Result<Self, CylinderError> {
        let dim = lattice.coord_dim();
        let mut map = TermMap::new();
        for t in terms {
            if t.b.len() != dim {
                return Err(CylinderError::Shape(format!(
                    "frequency b has length {}, expected {dim}",
                    t.b.len()
                )));
            }
            for a in &t.atoms {
                if a.xi.len() != dim {
                    return Err(CylinderError::Shape(format!(
                        "atom xi has length {}, expected {dim}",
                        a.xi.len()
                    )));
                }
                if !a.xi.iter().all(|x| x.is_finite()) || !a.c.re.is_finite() || !a.c.im.is_finite() {
                    return Err(CylinderError::Shape("non-finite atom data".into()));
                }
                accumulate(&mut map, t.b.clone(), &a.xi, a.c);
            }
        }
        Ok(CylinderFunction {
            lattice,
            terms: collect_terms(map),
        })
    }

    pub(crate) fn from_map(lattice: Arc<Lattice>, map: TermMap) -> Self {
        CylinderFunction {
            lattice,
            terms: collect_terms(map),
        }
    }

    pub fn zero(lattice: Arc<Lattice>) -> Self {
        CylinderFunction {
            lattice,
            terms: Vec::new(),
        }
    }

    pub fn one(lattice: Arc<Lattice>) -> Self {
        let dim = lattice.coord_dim();
        Self::monomial(lattice, vec![0; dim], vec![0.0; dim], Complex64::new(1.0, 0.0))
            .expect("unit has matching shape")
    }

    /// `c · e^{2πi b·q} ⊗ e^{i ξ·v}`.
    pub fn monomial(lattice: Arc<Lattice>, b: Vec<i64>, xi: Vec<f64>, c: Complex64) -> Result<Self, CylinderError> {
        Self::new(lattice, vec![Term::new(b, vec![Atom::new(xi, c)])])
    }

    pub fn lattice(&self) -> &Arc<Lattice> {
        &self.lattice
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn atom_count(&self) -> usize {
        self.terms.iter().map(|t| t.atoms.len()).sum()
    }

    /// Membership in `𝓜₀^l`: every atom strictly inside the per-edge ball of radius 1/2.
    pub fn in_operator_system(&self) -> bool {
        self.max_edge_norm() < 0.5
    }

    pub fn max_edge_norm(&self) -> f64 {
        let n = self.lattice.gauge_dim();
        self.terms
            .iter()
            .flat_map(|t| &t.atoms)
            .map(|a| max_edge_norm(&a.xi, n))
            .fold(0.0, f64::max)
    }

    /// `Σ_terms Σ_atoms |c|`, an upper bound for the sup norm and for every
    /// quantization of the function.
    pub fn atom_l1_norm(&self) -> f64 {
        self.terms
            .iter()
            .flat_map(|t| &t.atoms)
            .map(|a| a.c.norm())
            .sum()
    }

    fn check_point(&self, q: &[f64], v: &[f64]) -> Result<(), CylinderError> {
        let dim = self.lattice.coord_dim();
        if q.len() != dim || v.len() != dim {
            return Err(CylinderError::Shape(format!(
                "point has lengths ({}, {}), expected {dim}",
                q.len(),
                v.len()
            )));
        }
        Ok(())
    }

    pub fn evaluate(&self, q: &[f64], v: &[f64]) -> Result<Complex64, CylinderError> {
        self.check_point(q, v)?;
        Ok(self.evaluate_unchecked(q, v))
    }

    pub(crate) fn evaluate_unchecked(&self, q: &[f64], v: &[f64]) -> Complex64 {
        self.terms
            .iter()
            .map(|t| {
                let h: Complex64 = t
                    .atoms
                    .iter()
                    .map(|a| a.c * Complex64::from_polar(1.0, dot(&a.xi, v)))
                    .sum();
                Complex64::from_polar(1.0, 2.0 * PI * dot_int(&t.b, q)) * h
            })
            .sum()
    }

    fn check_same(&self, other: &Self) -> Result<(), CylinderError> {
        if same_lattice(&self.lattice, &other.lattice) {
            Ok(())
        } else {
            Err(CylinderError::LatticeMismatch)
        }
    }

    fn atoms(&self) -> impl Iterator<Item = (&[i64], &Atom)> {
        self.terms
            .iter()
            .flat_map(|t| t.atoms.iter().map(move |a| (t.b.as_slice(), a)))
    }

    fn add_b(b1: &[i64], b2: &[i64]) -> Vec<i64> {
        b1.iter().zip(b2).map(|(x, y)| x + y).collect()
    }

    fn add_xi(x1: &[f64], x2: &[f64]) -> Vec<f64> {
        x1.iter().zip(x2).map(|(x, y)| x + y).collect()
    }

    /// Pointwise product; frequencies add.
    pub fn product(&self, other: &Self) -> Result<Self, CylinderError> {
        self.check_same(other)?;
        let mut map = TermMap::new();
        for (b1, a1) in self.atoms() {
            for (b2, a2) in other.atoms() {
                accumulate(&mut map, Self::add_b(b1, b2), &Self::add_xi(&a1.xi, &a2.xi), a1.c * a2.c);
            }
        }
        Ok(Self::from_map(self.lattice.clone(), map))
    }

    /// Complex conjugation.
    pub fn adjoint(&self) -> Self {
        let mut map = TermMap::new();
        for (b, a) in self.atoms() {
            let nb: Vec<i64> = b.iter().map(|x| -x).collect();
            let nxi: Vec<f64> = a.xi.iter().map(|x| -x).collect();
            accumulate(&mut map, nb, &nxi, a.c.conj());
        }
        Self::from_map(self.lattice.clone(), map)
    }

    /// Poisson bracket. On exponentials,
    /// `{(b₁,ξ₁,c₁),(b₂,ξ₂,c₂)} = (b₁+b₂, ξ₁+ξ₂, −2π(b₂·ξ₁ − b₁·ξ₂) c₁c₂)`,
    /// the sign for which `(−iℏ)⁻¹[Q f, Q g] → Q{f, g}`.
    pub fn poisson(&self, other: &Self) -> Result<Self, CylinderError> {
        self.check_same(other)?;
        let mut map = TermMap::new();
        for (b1, a1) in self.atoms() {
            for (b2, a2) in other.atoms() {
                let k = -2.0 * PI * (dot_int(b2, &a1.xi) - dot_int(b1, &a2.xi));
                if k == 0.0 {
                    continue;
                }
                accumulate(&mut map, Self::add_b(b1, b2), &Self::add_xi(&a1.xi, &a2.xi), a1.c * a2.c * k);
            }
        }
        Ok(Self::from_map(self.lattice.clone(), map))
    }

    pub fn add(&self, other: &Self) -> Result<Self, CylinderError> {
        self.check_same(other)?;
        let mut map = TermMap::new();
        for (b, a) in self.atoms().chain(other.atoms()) {
            accumulate(&mut map, b.to_vec(), &a.xi, a.c);
        }
        Ok(Self::from_map(self.lattice.clone(), map))
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let mut map = TermMap::new();
        for (b, a) in self.atoms() {
            accumulate(&mut map, b.to_vec(), &a.xi, a.c * s);
        }
        Self::from_map(self.lattice.clone(), map)
    }

    pub fn sub(&self, other: &Self) -> Result<Self, CylinderError> {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    /// Pullback along a refinement: torus frequencies are copied onto every
    /// sub-edge, momentum frequencies are split by length ratio, added edges
    /// get zero blocks.
    pub fn classical_embed(&self, path: &RefinementPath) -> Result<Self, CylinderError> {
        if path.source() != &*self.lattice {
            return Err(CylinderError::PathMismatch);
        }
        let mut map = TermMap::new();
        for (b, a) in self.atoms() {
            accumulate(&mut map, path.lift_frequency(b), &path.split_momentum(&a.xi), a.c);
        }
        Ok(Self::from_map(Arc::new(path.target().clone()), map))
    }

    /// Smallest uniform refinement `l^R` on which the pullback lies in the
    /// operator system, with that pullback.
    pub fn germ_normalize(&self) -> (usize, Self) {
        let mut r = (2.0 * self.max_edge_norm()).floor() as usize + 1;
        loop {
            let (_, path) = refine_uniform(&self.lattice, r);
            let g = self.classical_embed(&path).expect("path starts at own lattice");
            if g.in_operator_system() {
                return (r, g);
            }
            r += 1;
        }
    }

    /// Free electric flow `f ∘ Φ_t` for `H = Σ_e d_e ‖v_e‖²`: each atom's
    /// momentum frequency shifts by `4πt d_e b_e`.
    pub fn classical_flow(&self, t: f64) -> Self {
        let n = self.lattice.gauge_dim();
        let lengths = self.lattice.edge_lengths();
        let mut map = TermMap::new();
        for (b, a) in self.atoms() {
            let xi: Vec<f64> = a
                .xi
                .iter()
                .enumerate()
                .map(|(k, x)| x + 4.0 * PI * t * lengths[k / n] * b[k] as f64)
                .collect();
            accumulate(&mut map, b.to_vec(), &xi, a.c);
        }
        Self::from_map(self.lattice.clone(), map)
    }
}
