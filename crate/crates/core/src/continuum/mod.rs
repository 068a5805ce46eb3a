//! Germs of the continuum algebras: a representative on some lattice, with
//! equality and products taken after pushing to a common refinement.
//!
//! Norms in the continuum are suprema over refinements. Along the uniform
//! refinements `l^R` the embedded operator decomposes over the cosets of the
//! image of `T`: on the coset through `a'` it acts as the operator on `l`
//! with weights evaluated at `k + θ`, where `θ = γ^mom(a') mod 1` ranges over
//! `((1/R)ℤ/ℤ)^N`. So
//! `‖Q^{l^R}(F_C f)‖ = max_θ ‖Q^l(f)_θ‖`, and each fiber is a window problem
//! in the original `N` coordinates instead of `R·N`.

use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;
use thiserror::Error;

use crate::cylinder::{CylinderError, CylinderFunction};
use crate::lattice::{leq, refine_uniform, supremum, Lattice, LatticeError, RefinementPath};
use crate::weylq::{operator_norm, quantize, BandedOperator, HbarParam, QuantError, Window};

#[derive(Debug, Error, PartialEq)]
pub enum ContinuumError {
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Cylinder(#[from] CylinderError),
    #[error(transparent)]
    Quant(#[from] QuantError),
    #[error("germs are not comparable: {0}")]
    NotComparable(String),
    #[error("refinement level must be at least 1")]
    BadLevel,
}

/// Operations a germ representative needs for common refinement and products.
pub trait Germ: Sized + Clone {
    fn lattice(&self) -> &Arc<Lattice>;
    fn push(&self, path: &RefinementPath) -> Result<Self, ContinuumError>;
    /// Product of two representatives on the same lattice.
    fn multiply(&self, other: &Self) -> Result<Self, ContinuumError>;
}

/// `f ∘ γ_l` with `f ∈ 𝓜₀^l`.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassicalGerm {
    f: CylinderFunction,
}

impl ClassicalGerm {
    pub fn new(f: CylinderFunction) -> Result<Self, ContinuumError> {
        if !f.in_operator_system() {
            return Err(CylinderError::NotInOperatorSystem(format!(
                "largest per-edge atom norm {} is not below 1/2",
                f.max_edge_norm()
            ))
            .into());
        }
        Ok(ClassicalGerm { f })
    }

    pub fn function(&self) -> &CylinderFunction {
        &self.f
    }

    pub fn quantize(&self, hbar: HbarParam) -> QuantumGerm {
        QuantumGerm {
            op: quantize(&self.f, hbar).expect("germ representatives lie in the operator system"),
        }
    }
}

impl Germ for ClassicalGerm {
    fn lattice(&self) -> &Arc<Lattice> {
        self.f.lattice()
    }

    fn push(&self, path: &RefinementPath) -> Result<Self, ContinuumError> {
        Ok(ClassicalGerm {
            f: self.f.classical_embed(path)?,
        })
    }

    fn multiply(&self, other: &Self) -> Result<Self, ContinuumError> {
        ClassicalGerm::new(self.f.product(&other.f)?)
    }
}

/// `F_Q^l(a)` with `a ∈ 𝓜_ℏ^l`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantumGerm {
    op: BandedOperator,
}

impl QuantumGerm {
    pub fn new(op: BandedOperator) -> Result<Self, ContinuumError> {
        if !op.symbol().in_operator_system() {
            return Err(QuantError::Domain("band atoms leave the operator-system ball".into()).into());
        }
        Ok(QuantumGerm { op })
    }

    pub fn operator(&self) -> &BandedOperator {
        &self.op
    }

    pub fn hbar(&self) -> HbarParam {
        self.op.hbar()
    }
}

impl Germ for QuantumGerm {
    fn lattice(&self) -> &Arc<Lattice> {
        self.op.lattice()
    }

    fn push(&self, path: &RefinementPath) -> Result<Self, ContinuumError> {
        Ok(QuantumGerm {
            op: self.op.quantum_embed(path)?,
        })
    }

    fn multiply(&self, other: &Self) -> Result<Self, ContinuumError> {
        QuantumGerm::new(self.op.compose(&other.op)?)
    }
}

fn path_to(from: &Lattice, to: &Lattice) -> Result<RefinementPath, ContinuumError> {
    leq(from, to)?.ok_or_else(|| ContinuumError::NotComparable("supremum is not a refinement".into()))
}

/// Both germs pushed to the supremum of their lattices.
pub fn common_refine<G: Germ>(g1: &G, g2: &G) -> Result<(G, G), ContinuumError> {
    if **g1.lattice() == **g2.lattice() {
        return Ok((g1.clone(), g2.clone()));
    }
    let sup = supremum(g1.lattice(), g2.lattice()).map_err(|e| ContinuumError::NotComparable(e.to_string()))?;
    let p1 = path_to(g1.lattice(), &sup)?;
    let p2 = path_to(g2.lattice(), &sup)?;
    Ok((g1.push(&p1)?, g2.push(&p2)?))
}

/// Both germs pushed to `l²`, where `l` is their common refinement. The
/// halved atoms keep products of operator-system elements inside it.
pub fn refine_pair_for_product<G: Germ>(g1: &G, g2: &G) -> Result<(G, G), ContinuumError> {
    let (a, b) = common_refine(g1, g2)?;
    let (_, path) = refine_uniform(a.lattice(), 2);
    Ok((a.push(&path)?, b.push(&path)?))
}

/// Germ product, represented on `l²`.
pub fn germ_product<G: Germ>(g1: &G, g2: &G) -> Result<G, ContinuumError> {
    let (a, b) = refine_pair_for_product(g1, g2)?;
    a.multiply(&b)
}

/// One line of a continuum norm sequence.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormRow {
    pub r: usize,
    pub window: usize,
    pub lower: f64,
    pub upper: f64,
    pub converged: bool,
}

/// All quasi-momenta `θ ∈ ((1/R)ℤ/ℤ)^N`.
pub fn fiber_points(r: usize, dim: usize) -> Vec<Vec<f64>> {
    let count = r.checked_pow(dim as u32).expect("fiber count overflows");
    (0..count)
        .map(|mut i| {
            let mut theta = vec![0.0; dim];
            for slot in theta.iter_mut().rev() {
                *slot = (i % r) as f64 / r as f64;
                i /= r;
            }
            theta
        })
        .collect()
}

/// Norm interval of `Q^{l^R}(F_C f)` via the fiber decomposition.
pub fn refined_norm(op: &BandedOperator, r: usize, window: &Window, tol: f64) -> Result<NormRow, ContinuumError> {
    if r == 0 {
        return Err(ContinuumError::BadLevel);
    }
    let thetas = fiber_points(r, op.lattice().coord_dim());
    let norms = thetas
        .par_iter()
        .map(|theta| operator_norm(&op.twisted(theta), window, tol))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(NormRow {
        r,
        window: window.radius,
        lower: norms.iter().map(|n| n.lower).fold(0.0, f64::max),
        upper: op.upper_bound(),
        converged: norms.iter().all(|n| n.converged),
    })
}

/// Lower bounds for `‖Q_ℏ^{l^R}(F_C f)‖`, `R = 1..=rmax`, each with the
/// `Σ|c|` upper bound. Values are per level; along divisibility chains
/// (`R | R'`) they are nondecreasing up to estimator slack.
pub fn continuum_norm(g: &QuantumGerm, rmax: usize, window: &Window, tol: f64) -> Result<Vec<NormRow>, ContinuumError> {
    if rmax == 0 {
        return Err(ContinuumError::BadLevel);
    }
    (1..=rmax).map(|r| refined_norm(g.operator(), r, window, tol)).collect()
}

/// `R,window,lower,upper` with 17 significant digits.
pub fn norm_csv(rows: &[NormRow]) -> String {
    let mut out = String::from("R,window,lower,upper\n");
    for row in rows {
        let _ = writeln!(out, "{},{},{:.16e},{:.16e}", row.r, row.window, row.lower, row.upper);
    }
    out
}
