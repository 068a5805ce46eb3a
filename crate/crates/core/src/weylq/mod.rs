//! Weyl quantization on the Fourier basis `ψ_a`, `a ∈ (ℤ^n)^l`.
//!
//! `Q_ℏ(e^{2πib·q} ⊗ h) ψ_a = h(2πℏ(a + b/2)) ψ_{a+b}`, so a quantized
//! cylinder function is a finite sum of weighted shifts whose weights are
//! trigonometric sums. Everything here (composition, adjoints, embeddings,
//! the free flow) is exact on that band data.

mod dequant;
mod norm;

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num::complex::Complex64;
use thiserror::Error;

use crate::cylinder::{accumulate, collect_terms, dot, dot_int, same_lattice, Atom, CylinderFunction, Term, TermMap};
use crate::lattice::{Lattice, RefinementPath};

pub use dequant::{dequantize, dequantize_with_cap};
pub use norm::{export_window, operator_norm, operator_norm_grown, NormBounds, Window, WINDOW_SCHEDULE};

#[derive(Debug, Error, PartialEq)]
pub enum QuantError {
    #[error("hbar outside [-1,1]: {0}")]
    HbarOutOfRange(f64),
    #[error("not in the operator system: {0}")]
    Domain(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("operators live on different lattices")]
    LatticeMismatch,
    #[error("operators have different hbar ({0} vs {1})")]
    HbarMismatch(f64, f64),
    #[error("refinement path does not start at the operator's lattice")]
    PathMismatch,
    #[error("window radius {radius} is smaller than band width {width}")]
    WindowTooSmall { radius: usize, width: i64 },
    #[error("window with {0} sites exceeds the size limit")]
    WindowTooLarge(u128),
    #[error("cannot dequantize at hbar = 0: all frequencies collapse")]
    ZeroHbar,
    #[error("recovery failed: {0}")]
    RecoveryFailed(String),
    #[error("recovered atom outside the operator-system ball: {0}")]
    AtomOutsideBall(String),
}

/// Deformation parameter, restricted to `[-1, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct HbarParam(f64);

impl HbarParam {
    pub fn new(value: f64) -> Result<Self, QuantError> {
        if value.is_finite() && (-1.0..=1.0).contains(&value) {
            Ok(HbarParam(value))
        } else {
            Err(QuantError::HbarOutOfRange(value))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl fmt::Display for HbarParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Finitely supported vector in `ℓ²((ℤ^n)^l)`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StateVector {
    coeffs: BTreeMap<Vec<i64>, Complex64>,
}

impl StateVector {
    pub fn new() -> Self {
        Self::default()
    }

    /// The basis vector `ψ_a`.
    pub fn basis(a: Vec<i64>) -> Self {
        let mut s = Self::new();
        s.add(a, Complex64::new(1.0, 0.0));
        s
    }

    pub fn add(&mut self, a: Vec<i64>, c: Complex64) {
        let slot = self.coeffs.entry(a).or_insert(Complex64::new(0.0, 0.0));
        *slot += c;
    }

    fn prune(mut self) -> Self {
        self.coeffs.retain(|_, c| *c != Complex64::new(0.0, 0.0));
        self
    }

    pub fn get(&self, a: &[i64]) -> Complex64 {
        self.coeffs.get(a).copied().unwrap_or(Complex64::new(0.0, 0.0))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Vec<i64>, &Complex64)> {
        self.coeffs.iter()
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.coeffs.values().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `max_a |self_a − other_a|`.
    pub fn max_diff(&self, other: &Self) -> f64 {
        let mut keys: Vec<&Vec<i64>> = self.coeffs.keys().chain(other.coeffs.keys()).collect();
        keys.sort();
        keys.dedup();
        keys.into_iter()
            .map(|k| (self.get(k) - other.get(k)).norm())
            .fold(0.0, f64::max)
    }
}

impl FromIterator<(Vec<i64>, Complex64)> for StateVector {
    fn from_iter<I: IntoIterator<Item = (Vec<i64>, Complex64)>>(iter: I) -> Self {
        let mut s = StateVector::new();
        for (a, c) in iter {
            s.add(a, c);
        }
        s.prune()
    }
}

/// A finite sum of weighted shifts,
/// `ψ_a ↦ Σ_bands [Σ_atoms c e^{i ξ·2πℏ(a + b/2)}] ψ_{a+b}`.
#[derive(Clone, Debug, PartialEq)]
pub struct BandedOperator {
    lattice: Arc<Lattice>,
    hbar: HbarParam,
    bands: Vec<Term>,
}

/// `Q_ℏ^l(f)` for `f ∈ 𝓜₀^l`.
pub fn quantize(f: &CylinderFunction, hbar: HbarParam) -> Result<BandedOperator, QuantError> {
    if !f.in_operator_system() {
        return Err(QuantError::Domain(format!(
            "largest per-edge atom norm {} is not below 1/2",
            f.max_edge_norm()
        )));
    }
    Ok(BandedOperator::from_function(f, hbar))
}

impl BandedOperator {
    /// Band data with no operator-system check. Used where only band
    /// arithmetic matters, e.g. for flowed functions that left `𝓜₀`.
    pub fn from_function(f: &CylinderFunction, hbar: HbarParam) -> Self {
        BandedOperator {
            lattice: f.lattice().clone(),
            hbar,
            bands: f.terms().to_vec(),
        }
    }

    pub fn new(lattice: Arc<Lattice>, hbar: HbarParam, bands: Vec<Term>) -> Result<Self, QuantError> {
        let f = CylinderFunction::new(lattice, bands).map_err(|e| QuantError::Shape(e.to_string()))?;
        Ok(Self::from_function(&f, hbar))
    }

    fn from_map(lattice: Arc<Lattice>, hbar: HbarParam, map: TermMap) -> Self {
        BandedOperator {
            lattice,
            hbar,
            bands: collect_terms(map),
        }
    }

    pub fn identity(lattice: Arc<Lattice>, hbar: HbarParam) -> Self {
        Self::from_function(&CylinderFunction::one(lattice), hbar)
    }

    pub fn lattice(&self) -> &Arc<Lattice> {
        &self.lattice
    }

    pub fn hbar(&self) -> HbarParam {
        self.hbar
    }

    pub fn bands(&self) -> &[Term] {
        &self.bands
    }

    pub fn is_zero(&self) -> bool {
        self.bands.is_empty()
    }

    /// The band data read back as a cylinder function (no numerics).
    pub fn symbol(&self) -> CylinderFunction {
        CylinderFunction::new(self.lattice.clone(), self.bands.clone()).expect("band shapes already checked")
    }

    /// `Σ |c|`: an upper bound on the operator norm, uniform in `ℏ`.
    pub fn upper_bound(&self) -> f64 {
        self.bands.iter().flat_map(|t| &t.atoms).map(|a| a.c.norm()).sum()
    }

    /// Largest `‖b‖∞` over bands.
    pub fn band_width(&self) -> i64 {
        self.bands
            .iter()
            .flat_map(|t| t.b.iter().map(|x| x.abs()))
            .max()
            .unwrap_or(0)
    }

    /// Weight of band `b` at column `a`: `Σ c e^{i ξ·2πℏ(a + b/2)}`.
    pub fn band_weight(band: &Term, hbar: f64, a: &[i64]) -> Complex64 {
        let x: Vec<f64> = a.iter().zip(&band.b).map(|(&ai, &bi)| ai as f64 + 0.5 * bi as f64).collect();
        band.atoms
            .iter()
            .map(|at| at.c * Complex64::from_polar(1.0, 2.0 * PI * hbar * dot(&at.xi, &x)))
            .sum()
    }

    /// `⟨ψ_{a+b}, op ψ_a⟩`.
    pub fn matrix_element(&self, a: &[i64], b: &[i64]) -> Complex64 {
        self.bands
            .iter()
            .find(|t| t.b == b)
            .map(|t| Self::band_weight(t, self.hbar.0, a))
            .unwrap_or(Complex64::new(0.0, 0.0))
    }

    pub fn apply(&self, psi: &StateVector) -> Result<StateVector, QuantError> {
        let dim = self.lattice.coord_dim();
        let mut out = StateVector::new();
        for (a, &coeff) in psi.iter() {
            if a.len() != dim {
                return Err(QuantError::Shape(format!("state index has length {}, expected {dim}", a.len())));
            }
            for band in &self.bands {
                let target: Vec<i64> = a.iter().zip(&band.b).map(|(x, y)| x + y).collect();
                out.add(target, coeff * Self::band_weight(band, self.hbar.0, a));
            }
        }
        Ok(out.prune())
    }

    fn check_same(&self, other: &Self) -> Result<(), QuantError> {
        if !same_lattice(&self.lattice, &other.lattice) {
            return Err(QuantError::LatticeMismatch);
        }
        if self.hbar != other.hbar {
            return Err(QuantError::HbarMismatch(self.hbar.0, other.hbar.0));
        }
        Ok(())
    }

    fn atoms(&self) -> impl Iterator<Item = (&[i64], &Atom)> {
        self.bands
            .iter()
            .flat_map(|t| t.atoms.iter().map(move |a| (t.b.as_slice(), a)))
    }

    /// `self ∘ other`. Bands add and each atom pair picks up the phase
    /// `e^{iπℏ(ξ_A·b_B − ξ_B·b_A)}`.
    pub fn compose(&self, other: &Self) -> Result<Self, QuantError> {
        self.check_same(other)?;
        let h = self.hbar.0;
        let mut map = TermMap::new();
        for (ba, aa) in self.atoms() {
            for (bb, ab) in other.atoms() {
                let phase = PI * h * (dot_int(bb, &aa.xi) - dot_int(ba, &ab.xi));
                let b: Vec<i64> = ba.iter().zip(bb).map(|(x, y)| x + y).collect();
                let xi: Vec<f64> = aa.xi.iter().zip(&ab.xi).map(|(x, y)| x + y).collect();
                accumulate(&mut map, b, &xi, aa.c * ab.c * Complex64::from_polar(1.0, phase));
            }
        }
        Ok(Self::from_map(self.lattice.clone(), self.hbar, map))
    }

    pub fn adjoint(&self) -> Self {
        let mut map = TermMap::new();
        for (b, a) in self.atoms() {
            let nb: Vec<i64> = b.iter().map(|x| -x).collect();
            let nxi: Vec<f64> = a.xi.iter().map(|x| -x).collect();
            accumulate(&mut map, nb, &nxi, a.c.conj());
        }
        Self::from_map(self.lattice.clone(), self.hbar, map)
    }

    pub fn add(&self, other: &Self) -> Result<Self, QuantError> {
        self.check_same(other)?;
        let mut map = TermMap::new();
        for (b, a) in self.atoms().chain(other.atoms()) {
            accumulate(&mut map, b.to_vec(), &a.xi, a.c);
        }
        Ok(Self::from_map(self.lattice.clone(), self.hbar, map))
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let mut map = TermMap::new();
        for (b, a) in self.atoms() {
            accumulate(&mut map, b.to_vec(), &a.xi, a.c * s);
        }
        Self::from_map(self.lattice.clone(), self.hbar, map)
    }

    pub fn sub(&self, other: &Self) -> Result<Self, QuantError> {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    /// `[self, other]`.
    pub fn commutator(&self, other: &Self) -> Result<Self, QuantError> {
        self.compose(other)?.sub(&other.compose(self)?)
    }

    /// `F_Q` along a refinement, directly on band data: `b ↦ T b`, `ξ ↦ S ξ`.
    pub fn quantum_embed(&self, path: &RefinementPath) -> Result<Self, QuantError> {
        if path.source() != &*self.lattice {
            return Err(QuantError::PathMismatch);
        }
        let mut map = TermMap::new();
        for (b, a) in self.atoms() {
            accumulate(&mut map, path.lift_frequency(b), &path.split_momentum(&a.xi), a.c);
        }
        Ok(Self::from_map(Arc::new(path.target().clone()), self.hbar, map))
    }

    /// `U_t · op · U_t*` with `U_t ψ_a = exp(i t 4π²ℏ Σ_e d_e ‖a_e‖²) ψ_a`.
    /// Each atom's momentum frequency shifts by `4πt d_e b_e`.
    pub fn quantum_flow_conjugate(&self, t: f64) -> Self {
        let n = self.lattice.gauge_dim();
        let d = self.lattice.edge_lengths();
        let mut map = TermMap::new();
        for (b, a) in self.atoms() {
            let xi: Vec<f64> = a
                .xi
                .iter()
                .enumerate()
                .map(|(k, x)| x + 4.0 * PI * t * d[k / n] * b[k] as f64)
                .collect();
            accumulate(&mut map, b.to_vec(), &xi, a.c);
        }
        Self::from_map(self.lattice.clone(), self.hbar, map)
    }

    /// The fiber operator at quasi-momentum `θ`: the same shifts with weights
    /// evaluated at `a + θ`, i.e. `c ↦ c e^{i 2πℏ ξ·θ}`.
    pub fn twisted(&self, theta: &[f64]) -> Self {
        let h = self.hbar.0;
        let mut map = TermMap::new();
        for (b, a) in self.atoms() {
            let c = a.c * Complex64::from_polar(1.0, 2.0 * PI * h * dot(&a.xi, theta));
            accumulate(&mut map, b.to_vec(), &a.xi, c);
        }
        Self::from_map(self.lattice.clone(), self.hbar, map)
    }
}

/// `ψ_a ↦ ψ_{T a}`: the isometry `u^{ml}` for a refinement path.
pub fn intertwiner_apply(path: &RefinementPath, psi: &StateVector) -> Result<StateVector, QuantError> {
    let dim = path.source().coord_dim();
    let mut out = StateVector::new();
    for (a, &c) in psi.iter() {
        if a.len() != dim {
            return Err(QuantError::PathMismatch);
        }
        out.add(path.lift_frequency(a), c);
    }
    Ok(out.prune())
}

/// Distance between two operators' band data: the largest difference in
/// atom frequency or coefficient after canonical ordering, or `∞` when the
/// band/atom structures differ.
pub fn band_distance(x: &BandedOperator, y: &BandedOperator) -> f64 {
    if !same_lattice(&x.lattice, &y.lattice) || x.bands.len() != y.bands.len() {
        return f64::INFINITY;
    }
    let mut worst: f64 = 0.0;
    for (bx, by) in x.bands.iter().zip(&y.bands) {
        if bx.b != by.b || bx.atoms.len() != by.atoms.len() {
            return f64::INFINITY;
        }
        for (ax, ay) in bx.atoms.iter().zip(&by.atoms) {
            for (p, q) in ax.xi.iter().zip(&ay.xi) {
                worst = worst.max((p - q).abs());
            }
            worst = worst.max((ax.c - ay.c).norm());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    fn edge() -> Arc<Lattice> {
        Arc::new(Lattice::chain(1, 1, 1))
    }

    fn hb(x: f64) -> HbarParam {
        HbarParam::new(x).unwrap()
    }

    fn mono(b: i64, xi: f64, c: Complex64) -> CylinderFunction {
        CylinderFunction::monomial(edge(), vec![b], vec![xi], c).unwrap()
    }

    #[test]
    fn hbar_range() {
        assert!(HbarParam::new(1.0).is_ok());
        assert!(HbarParam::new(-1.0).is_ok());
        let err = HbarParam::new(1.5).unwrap_err();
        assert!(err.to_string().starts_with("hbar outside [-1,1]"));
        assert!(HbarParam::new(f64::NAN).is_err());
    }

    #[test]
    fn basis_action_example() {
        let op = quantize(&mono(1, 0.4, Complex64::new(1.0, 0.0)), hb(0.5)).unwrap();
        let out = op.apply(&StateVector::basis(vec![2])).unwrap();
        assert_eq!(out.len(), 1);
        assert!((out.get(&[3]) + Complex64::new(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn identity_and_domain() {
        let id = quantize(&CylinderFunction::one(edge()), hb(0.3)).unwrap();
        let psi: StateVector = vec![(vec![1], Complex64::new(0.5, 0.1)), (vec![-4], Complex64::new(0.0, 2.0))]
            .into_iter()
            .collect();
        assert_eq!(id.apply(&psi).unwrap(), psi);
        assert!(matches!(
            quantize(&mono(0, 0.5, Complex64::new(1.0, 0.0)), hb(0.3)),
            Err(QuantError::Domain(_))
        ));
    }

    #[test]
    fn compose_matches_sequential_application() {
        let f = CylinderFunction::new(
            edge(),
            vec![
                Term::new(vec![1], vec![Atom::new(vec![0.3], Complex64::new(1.0, 0.5))]),
                Term::new(vec![-2], vec![Atom::new(vec![-0.1], Complex64::new(0.2, 0.0))]),
            ],
        )
        .unwrap();
        let g = mono(1, 0.4, Complex64::new(0.0, 1.0));
        let (qf, qg) = (quantize(&f, hb(0.7)).unwrap(), quantize(&g, hb(0.7)).unwrap());
        let qfg = qf.compose(&qg).unwrap();
        for a in -3..=3 {
            let psi = StateVector::basis(vec![a]);
            let lhs = qfg.apply(&psi).unwrap();
            let rhs = qf.apply(&qg.apply(&psi).unwrap()).unwrap();
            assert!(lhs.max_diff(&rhs) < 1e-13);
        }
    }

    #[test]
    fn adjoint_is_conjugate_transpose() {
        let f = mono(1, 0.3, Complex64::new(0.2, -0.7));
        let q = quantize(&f, hb(-0.6)).unwrap();
        let qa = quantize(&f.adjoint(), hb(-0.6)).unwrap();
        assert_eq!(qa, q.adjoint());
        for a in -4..4 {
            let lhs = qa.matrix_element(&[a + 1], &[-1]);
            let rhs = q.matrix_element(&[a], &[1]).conj();
            assert!((lhs - rhs).norm() < 1e-15);
        }
    }

    #[test]
    fn flow_phase_example() {
        let op = quantize(&mono(1, 0.2, Complex64::new(1.0, 0.0)), hb(0.5)).unwrap();
        let flowed = op.quantum_flow_conjugate(0.1);
        let ratio = flowed.matrix_element(&[0], &[1]) / op.matrix_element(&[0], &[1]);
        assert!((ratio - Complex64::from_polar(1.0, 0.2 * PI * PI)).norm() < 1e-13);
        assert_eq!(op.quantum_flow_conjugate(0.0), op);
        let diag = quantize(&mono(0, 0.2, Complex64::new(1.0, 0.0)), hb(0.5)).unwrap();
        assert_eq!(diag.quantum_flow_conjugate(5.0), diag);
    }

    #[test]
    fn embed_and_intertwiner_examples() {
        use crate::lattice::{leq, rat, refine_uniform, Edge, Point, RefinementStep};
        let l = edge();
        let (_, split) = refine_uniform(&l, 2);
        assert_eq!(
            intertwiner_apply(&split, &StateVector::basis(vec![3])).unwrap(),
            StateVector::basis(vec![3, 3])
        );
        let extra = Edge::new(Point::from_ints(&[1]), Point::from_ints(&[2])).unwrap();
        let add = RefinementPath::from_steps(&l, vec![RefinementStep::AddEdge(extra)]).unwrap();
        assert_eq!(
            intertwiner_apply(&add, &StateVector::basis(vec![3])).unwrap(),
            StateVector::basis(vec![3, 0])
        );

        let third = Lattice::new(
            1,
            1,
            vec![
                Edge::new(Point::from_ints(&[0]), Point::new(vec![rat(1, 3)])).unwrap(),
                Edge::new(Point::new(vec![rat(1, 3)]), Point::from_ints(&[1])).unwrap(),
            ],
        )
        .unwrap();
        let path = leq(&l, &third).unwrap().unwrap();
        let op = quantize(&mono(2, 0.3, Complex64::new(1.0, 0.0)), hb(0.5)).unwrap();
        let up = op.quantum_embed(&path).unwrap();
        assert_eq!(up.bands()[0].b, vec![2, 2]);
        let xi = &up.bands()[0].atoms[0].xi;
        assert!((xi[0] - 0.1).abs() < 1e-15 && (xi[1] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn band_distance_structure() {
        let a = quantize(&mono(1, 0.2, Complex64::new(1.0, 0.0)), hb(0.5)).unwrap();
        let b = quantize(&mono(2, 0.2, Complex64::new(1.0, 0.0)), hb(0.5)).unwrap();
        assert_eq!(band_distance(&a, &a), 0.0);
        assert_eq!(band_distance(&a, &b), f64::INFINITY);
    }
}
