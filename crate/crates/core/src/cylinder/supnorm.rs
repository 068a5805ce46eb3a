//! Numerical sup norm of a cylinder function over `T*G^l`.
//!
//! The function is periodic in `q` but only almost periodic in `v`, so the
//! search box in `v` is tied to the smallest spacing between distinct atom
//! frequencies: on a box of half-width `π/gap` every relative phase between
//! atoms is visited at least once.

use num::complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{dot, CylinderFunction};
use std::f64::consts::PI;

#[derive(Clone, Debug, PartialEq)]
pub struct SupNorm {
    /// Largest `|f|` actually attained at a sampled point.
    pub lower: f64,
    /// `min(Σ|c|, lower + slack)`.
    pub upper: f64,
    /// Lipschitz slack from the search grid spacing.
    pub slack: f64,
    pub argmax_q: Vec<f64>,
    pub argmax_v: Vec<f64>,
}

const GRID_BUDGET: f64 = 16384.0;
const RANDOM_POINTS: usize = 2048;
const REFINE_TOP: usize = 12;
const MAX_RADIUS: f64 = 1.0e4;

struct Flat {
    /// (2π b, ξ, c) per atom.
    atoms: Vec<(Vec<f64>, Vec<f64>, Complex64)>,
}

impl Flat {
    fn new(f: &CylinderFunction) -> Self {
        Flat {
            atoms: f
                .terms()
                .iter()
                .flat_map(|t| {
                    let kb: Vec<f64> = t.b.iter().map(|&b| 2.0 * PI * b as f64).collect();
                    t.atoms.iter().map(move |a| (kb.clone(), a.xi.clone(), a.c))
                })
                .collect(),
        }
    }

    fn value(&self, q: &[f64], v: &[f64]) -> Complex64 {
        self.atoms
            .iter()
            .map(|(kb, xi, c)| c * Complex64::from_polar(1.0, dot(kb, q) + dot(xi, v)))
            .sum()
    }

    /// `|f|²` and its gradient in `(q, v)`.
    fn value_grad(&self, q: &[f64], v: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
        let n = q.len();
        let mut f = Complex64::new(0.0, 0.0);
        let mut dq = vec![Complex64::new(0.0, 0.0); n];
        let mut dv = vec![Complex64::new(0.0, 0.0); n];
        for (kb, xi, c) in &self.atoms {
            let w = c * Complex64::from_polar(1.0, dot(kb, q) + dot(xi, v));
            f += w;
            let iw = Complex64::i() * w;
            for k in 0..n {
                dq[k] += iw * kb[k];
                dv[k] += iw * xi[k];
            }
        }
        let g = |d: &[Complex64]| -> Vec<f64> { d.iter().map(|x| 2.0 * (f.conj() * x).re).collect() };
        (f.norm_sqr(), g(&dq), g(&dv))
    }

    /// `Σ |c| ‖(2πb, ξ)‖`, a Lipschitz constant for `|f|`.
    fn lipschitz(&self) -> f64 {
        self.atoms
            .iter()
            .map(|(kb, xi, c)| c.norm() * (dot(kb, kb) + dot(xi, xi)).sqrt())
            .sum()
    }
}

fn min_gap(f: &CylinderFunction) -> Option<f64> {
    let mut xis: Vec<&[f64]> = f.terms().iter().flat_map(|t| t.atoms.iter().map(|a| a.xi.as_slice())).collect();
    xis.sort_by(|a, b| {
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    xis.dedup();
    let mut gap: Option<f64> = None;
    for i in 0..xis.len() {
        for j in (i + 1)..xis.len() {
            let d = xis[i]
                .iter()
                .zip(xis[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            if d > 0.0 {
                gap = Some(gap.map_or(d, |g| g.min(d)));
            }
        }
    }
    gap
}

fn ascend(flat: &Flat, q: &mut [f64], v: &mut [f64], tol: f64) -> f64 {
    let (mut val, mut gq, mut gv) = flat.value_grad(q, v);
    let mut step = 1e-2;
    for _ in 0..400 {
        let norm = (dot(&gq, &gq) + dot(&gv, &gv)).sqrt();
        if norm == 0.0 {
            break;
        }
        let mut improved = false;
        while step * norm > 1e-16 {
            let nq: Vec<f64> = q.iter().zip(&gq).map(|(x, g)| x + step * g / norm).collect();
            let nv: Vec<f64> = v.iter().zip(&gv).map(|(x, g)| x + step * g / norm).collect();
            let (nval, ngq, ngv) = flat.value_grad(&nq, &nv);
            if nval > val {
                let gain = nval - val;
                q.copy_from_slice(&nq);
                v.copy_from_slice(&nv);
                val = nval;
                gq = ngq;
                gv = ngv;
                step *= 2.0;
                improved = gain > tol * tol * 1e-4;
                break;
            }
            step *= 0.5;
        }
        if !improved {
            break;
        }
    }
    val
}

/// Lower and upper estimates of `sup |f|` with the point where the lower
/// value is attained. `tol` controls the local refinement.
pub fn sup_norm(f: &CylinderFunction, tol: f64) -> SupNorm {
    let dim = f.lattice().coord_dim();
    if f.is_zero() {
        return SupNorm {
            lower: 0.0,
            upper: 0.0,
            slack: 0.0,
            argmax_q: vec![0.0; dim],
            argmax_v: vec![0.0; dim],
        };
    }
    let flat = Flat::new(f);
    let radius = min_gap(f).map_or(PI, |g| (PI / g).min(MAX_RADIUS));

    let per_axis = (GRID_BUDGET.powf(1.0 / (2 * dim) as f64).floor() as usize).max(2);
    let total = per_axis.checked_pow(2 * dim as u32).unwrap_or(usize::MAX).min(1 << 20);
    let q_at = |i: usize| i as f64 / per_axis as f64;
    let v_at = |i: usize| -radius + 2.0 * radius * i as f64 / (per_axis - 1) as f64;

    let mut candidates: Vec<(f64, Vec<f64>, Vec<f64>)> = Vec::new();
    let consider = |q: Vec<f64>, v: Vec<f64>, cands: &mut Vec<(f64, Vec<f64>, Vec<f64>)>| {
        let val = flat.value(&q, &v).norm_sqr();
        cands.push((val, q, v));
        if cands.len() > 4 * REFINE_TOP {
            cands.sort_by(|a, b| b.0.total_cmp(&a.0));
            cands.truncate(REFINE_TOP);
        }
    };

    // Full grid when the budget allows it; otherwise the budget is spent on
    // the random phase alone.
    let use_grid = per_axis.checked_pow(2 * dim as u32).is_some_and(|t| t == total);
    if use_grid {
        let mut idx = vec![0usize; 2 * dim];
        for _ in 0..total {
            let q: Vec<f64> = idx[..dim].iter().map(|&i| q_at(i)).collect();
            let v: Vec<f64> = idx[dim..].iter().map(|&i| v_at(i)).collect();
            consider(q, v, &mut candidates);
            for slot in idx.iter_mut() {
                *slot += 1;
                if *slot < per_axis {
                    break;
                }
                *slot = 0;
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_f00d);
    for _ in 0..RANDOM_POINTS {
        let q: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>()).collect();
        let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-radius..=radius)).collect();
        consider(q, v, &mut candidates);
    }
    consider(vec![0.0; dim], vec![0.0; dim], &mut candidates);

    candidates.sort_by(|a, b| b.0.total_cmp(&a.0));
    candidates.truncate(REFINE_TOP);
    let mut best = (0.0, vec![0.0; dim], vec![0.0; dim]);
    for (_, mut q, mut v) in candidates {
        let val = ascend(&flat, &mut q, &mut v, tol);
        if val > best.0 {
            best = (val, q, v);
        }
    }
    let (_, mut q, v) = best;
    for x in q.iter_mut() {
        *x = x.rem_euclid(1.0);
    }
    let lower = flat.value(&q, &v).norm();

    let l1 = f.atom_l1_norm();
    let spacing = if use_grid {
        let dq = 1.0 / per_axis as f64;
        let dv = 2.0 * radius / (per_axis - 1) as f64;
        0.5 * (dim as f64 * (dq * dq + dv * dv)).sqrt()
    } else {
        f64::INFINITY
    };
    let upper = l1.min(lower + flat.lipschitz() * spacing).max(lower);
    SupNorm {
        lower,
        upper,
        slack: upper - lower,
        argmax_q: q,
        argmax_v: v,
    }
}
