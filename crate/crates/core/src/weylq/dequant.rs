//! Recovering the symbol of a quantized operator from its matrix elements.
//!
//! Along band `b` the matrix elements are an exponential sum
//! `s(a) = Σ_j c'_j z_j^a` with nodes `z_{j,k} = e^{2πiℏ ξ_{j,k}}` and
//! `c'_j = c_j e^{iπℏ ξ_j·b}`. Because `|ℏ ξ_{j,k}| < 1/2` the nodes
//! determine `ξ` without wrap-around, which is what makes `Q_ℏ` injective
//! for `ℏ ≠ 0`. The nodes are found with a multivariate matrix pencil
//! (Hankel SVD plus joint diagonalization of the shift matrices), first at
//! unit step, then at a larger step that spreads the nodes over the circle,
//! and polished by Gauss-Newton on all samples.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Schur};
use num::complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{BandedOperator, QuantError};
use crate::cylinder::{max_edge_norm, Atom, CylinderFunction, Term};

type CMat = DMatrix<Complex64>;

#[derive(Clone, Copy, Debug)]
enum Order {
    Exact(usize),
    Cap(usize),
}

/// Inverse of `quantize` on `𝓜₀` data, using only matrix elements and, per
/// band, the number of atoms.
pub fn dequantize(op: &BandedOperator) -> Result<CylinderFunction, QuantError> {
    dequantize_impl(op, |band| Order::Exact(band.atoms.len()))
}

/// Like [`dequantize`] but with the model order per band estimated from the
/// numerical rank of the sample matrix, at most `cap`.
pub fn dequantize_with_cap(op: &BandedOperator, cap: usize) -> Result<CylinderFunction, QuantError> {
    dequantize_impl(op, |_| Order::Cap(cap.max(1)))
}

fn dequantize_impl(op: &BandedOperator, order: impl Fn(&Term) -> Order) -> Result<CylinderFunction, QuantError> {
    let h = op.hbar().value();
    if h == 0.0 {
        return Err(QuantError::ZeroHbar);
    }
    let n = op.lattice().gauge_dim();
    let dim = op.lattice().coord_dim();
    let mut terms = Vec::new();
    for band in op.bands() {
        let sample = |a: &[i64]| op.matrix_element(a, &band.b);
        let atoms = recover_band(&sample, dim, h, order(band))?;
        let mut out = Vec::with_capacity(atoms.len());
        for (xi, cp) in atoms {
            let norm = max_edge_norm(&xi, n);
            if norm >= 0.5 {
                return Err(QuantError::AtomOutsideBall(format!(
                    "band {:?}: recovered frequency {:?} has edge norm {norm}",
                    band.b, xi
                )));
            }
            let shift: f64 = xi.iter().zip(&band.b).map(|(x, &b)| x * b as f64).sum();
            out.push(Atom::new(xi, cp * Complex64::from_polar(1.0, -PI * h * shift)));
        }
        terms.push(Term::new(band.b.clone(), out));
    }
    CylinderFunction::new(op.lattice().clone(), terms).map_err(|e| QuantError::RecoveryFailed(e.to_string()))
}

/// Multi-indices `α ∈ ℕ^dim` with `|α| ≤ degree`.
fn index_set(dim: usize, degree: usize) -> Vec<Vec<i64>> {
    let mut out = vec![vec![0i64; dim]];
    let mut frontier = out.clone();
    for _ in 0..degree {
        let mut next = Vec::new();
        for alpha in &frontier {
            // Only increase coordinates at or after the last nonzero one, so
            // each multi-index is generated once.
            let start = alpha.iter().rposition(|&x| x != 0).unwrap_or(0);
            for k in start..dim {
                let mut beta = alpha.clone();
                beta[k] += 1;
                next.push(beta);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

fn scaled(step: i64, parts: &[&[i64]]) -> Vec<i64> {
    let dim = parts[0].len();
    (0..dim).map(|k| step * parts.iter().map(|p| p[k]).sum::<i64>()).collect()
}

/// Nodes `z_j^{step}` (one vector of `dim` components per atom).
fn pencil(
    sample: &dyn Fn(&[i64]) -> Complex64,
    dim: usize,
    step: i64,
    order: Order,
) -> Result<Vec<Vec<Complex64>>, QuantError> {
    let k_max = match order {
        Order::Exact(k) | Order::Cap(k) => k,
    };
    let pad = if dim <= 2 { 2 } else { 1 };
    let set = index_set(dim, k_max - 1 + pad);
    let m = set.len();
    let unit: Vec<Vec<i64>> = (0..dim)
        .map(|k| {
            let mut e = vec![0; dim];
            e[k] = 1;
            e
        })
        .collect();

    let hankel = |shift: &[i64]| CMat::from_fn(m, m, |i, j| sample(&scaled(step, &[&set[i], &set[j], shift])));
    let h0 = hankel(&vec![0; dim]);
    let svd = h0.svd(true, true);
    let u = svd.u.ok_or_else(|| QuantError::RecoveryFailed("SVD did not produce U".into()))?;
    let v_t = svd.v_t.ok_or_else(|| QuantError::RecoveryFailed("SVD did not produce V".into()))?;
    let mut idx: Vec<usize> = (0..m).collect();
    idx.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let sigma: Vec<f64> = idx.iter().map(|&i| svd.singular_values[i]).collect();
    let top = sigma[0];
    if top == 0.0 {
        return Ok(Vec::new());
    }
    let r = match order {
        Order::Exact(k) => {
            if sigma[k - 1] <= 1e-13 * top {
                return Err(QuantError::RecoveryFailed(format!(
                    "sample matrix has rank below the model order {k}"
                )));
            }
            k
        }
        Order::Cap(k) => sigma.iter().take(k).filter(|&&s| s > 1e-9 * top).count(),
    };
    let ur = CMat::from_fn(m, r, |i, j| u[(i, idx[j])]);
    // V = (V^*)^*, columns idx[..r].
    let vr = CMat::from_fn(m, r, |i, j| v_t[(idx[j], i)].conj());
    let sinv = CMat::from_fn(r, r, |i, j| {
        if i == j {
            Complex64::new(1.0 / sigma[i], 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let ur_adj = ur.adjoint();
    let shifts: Vec<CMat> = unit.iter().map(|e| &ur_adj * hankel(e) * &vr * &sinv).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(0xdec0_de);
    let mut mix = CMat::zeros(r, r);
    for a in &shifts {
        let mu = rng.gen_range(0.5..1.5) * if rng.gen::<bool>() { 1.0 } else { -1.0 };
        mix += a * Complex64::new(mu, 0.0);
    }
    let p = eigenvectors(mix)?;
    let p_inv = p
        .clone()
        .try_inverse()
        .ok_or_else(|| QuantError::RecoveryFailed("eigenvector matrix is singular".into()))?;
    let diags: Vec<CMat> = shifts.iter().map(|a| &p_inv * a * &p).collect();
    Ok((0..r).map(|j| diags.iter().map(|d| d[(j, j)]).collect()).collect())
}

/// Eigenvectors of a diagonalizable complex matrix, via Schur form and
/// back-substitution.
fn eigenvectors(m: CMat) -> Result<CMat, QuantError> {
    let r = m.nrows();
    let schur = Schur::try_new(m, 1e-15, 10_000)
        .ok_or_else(|| QuantError::RecoveryFailed("Schur iteration did not converge".into()))?;
    let (q, t) = schur.unpack();
    let scale = (0..r).map(|i| t[(i, i)].norm()).fold(0.0, f64::max).max(1e-300);
    let mut y = CMat::zeros(r, r);
    for j in 0..r {
        y[(j, j)] = Complex64::new(1.0, 0.0);
        let lambda = t[(j, j)];
        for i in (0..j).rev() {
            let s: Complex64 = ((i + 1)..=j).map(|k| t[(i, k)] * y[(k, j)]).sum();
            let mut d = t[(i, i)] - lambda;
            if d.norm() < 1e-14 * scale {
                d = Complex64::new(1e-14 * scale, 0.0);
            }
            y[(i, j)] = -s / d;
        }
    }
    let mut p = q * y;
    for j in 0..r {
        let n = p.column(j).norm();
        p.column_mut(j).scale_mut(1.0 / n);
    }
    Ok(p)
}

fn model(atoms: &[(Vec<f64>, Complex64)], h: f64, a: &[i64]) -> Complex64 {
    atoms
        .iter()
        .map(|(xi, c)| {
            let phase: f64 = xi.iter().zip(a).map(|(x, &ai)| x * ai as f64).sum();
            c * Complex64::from_polar(1.0, 2.0 * PI * h * phase)
        })
        .sum()
}

/// Least-squares amplitudes for fixed frequencies.
fn amplitudes(xis: &[Vec<f64>], h: f64, points: &[Vec<i64>], values: &[Complex64]) -> Result<Vec<Complex64>, QuantError> {
    let a = CMat::from_fn(points.len(), xis.len(), |i, j| {
        let phase: f64 = xis[j].iter().zip(&points[i]).map(|(x, &ai)| x * ai as f64).sum();
        Complex64::from_polar(1.0, 2.0 * PI * h * phase)
    });
    let rhs = DVector::from_column_slice(values);
    let sol = a
        .svd(true, true)
        .solve(&rhs, 1e-14)
        .map_err(|e| QuantError::RecoveryFailed(e.to_string()))?;
    Ok(sol.iter().copied().collect())
}

/// Gauss-Newton on frequencies and amplitudes jointly.
fn polish(
    atoms: &mut Vec<(Vec<f64>, Complex64)>,
    h: f64,
    points: &[Vec<i64>],
    values: &[Complex64],
) -> Result<(), QuantError> {
    let dim = points[0].len();
    let k = atoms.len();
    let unknowns = k * (dim + 2);
    for _ in 0..30 {
        let rows = 2 * points.len();
        let mut jac = DMatrix::<f64>::zeros(rows, unknowns);
        let mut res = DVector::<f64>::zeros(rows);
        for (p, (a, &s)) in points.iter().zip(values).enumerate() {
            let r = model(atoms, h, a) - s;
            res[2 * p] = r.re;
            res[2 * p + 1] = r.im;
            for (j, (xi, c)) in atoms.iter().enumerate() {
                let phase: f64 = xi.iter().zip(a).map(|(x, &ai)| x * ai as f64).sum();
                let e = Complex64::from_polar(1.0, 2.0 * PI * h * phase);
                let base = j * (dim + 2);
                for d in 0..dim {
                    let g = c * e * Complex64::new(0.0, 2.0 * PI * h * a[d] as f64);
                    jac[(2 * p, base + d)] = g.re;
                    jac[(2 * p + 1, base + d)] = g.im;
                }
                jac[(2 * p, base + dim)] = e.re;
                jac[(2 * p + 1, base + dim)] = e.im;
                let ie = Complex64::i() * e;
                jac[(2 * p, base + dim + 1)] = ie.re;
                jac[(2 * p + 1, base + dim + 1)] = ie.im;
            }
        }
        let delta = jac
            .svd(true, true)
            .solve(&res, 1e-14)
            .map_err(|e| QuantError::RecoveryFailed(e.to_string()))?;
        let mut biggest: f64 = 0.0;
        for (j, (xi, c)) in atoms.iter_mut().enumerate() {
            let base = j * (dim + 2);
            for d in 0..dim {
                xi[d] -= delta[base + d];
                biggest = biggest.max(delta[base + d].abs());
            }
            *c -= Complex64::new(delta[base + dim], delta[base + dim + 1]);
        }
        if biggest < 1e-15 {
            break;
        }
    }
    Ok(())
}

fn recover_band(
    sample: &dyn Fn(&[i64]) -> Complex64,
    dim: usize,
    h: f64,
    order: Order,
) -> Result<Vec<(Vec<f64>, Complex64)>, QuantError> {
    let angle = |z: Complex64, step: i64| z.arg() / (2.0 * PI * h * step as f64);

    let coarse = pencil(sample, dim, 1, order)?;
    if coarse.is_empty() {
        return Ok(Vec::new());
    }
    let max_xi = coarse
        .iter()
        .flat_map(|z| z.iter().map(|&zk| angle(zk, 1).abs()))
        .fold(0.0, f64::max);
    let step = ((0.4 / (h.abs() * (max_xi + 0.02))).floor() as i64).clamp(1, 64);
    let k = coarse.len();
    let nodes = if step > 1 {
        let fine = pencil(sample, dim, step, Order::Exact(k))?;
        if fine.len() != k {
            return Err(QuantError::RecoveryFailed("stepped pencil changed the model order".into()));
        }
        fine
    } else {
        coarse
    };
    let xis: Vec<Vec<f64>> = nodes
        .iter()
        .map(|z| z.iter().map(|&zk| angle(zk, step)).collect())
        .collect();

    let degree = k + 1;
    let mut points: Vec<Vec<i64>> = index_set(dim, degree);
    if step > 1 {
        points.extend(index_set(dim, degree).iter().map(|a| a.iter().map(|x| x * step).collect::<Vec<_>>()));
    }
    let values: Vec<Complex64> = points.iter().map(|a| sample(a)).collect();
    let cs = amplitudes(&xis, h, &points, &values)?;
    let mut atoms: Vec<(Vec<f64>, Complex64)> = xis.into_iter().zip(cs).collect();
    // A long baseline separates nearby frequencies in the polish.
    let reach = (64 * step).min(4096);
    let mut rng = ChaCha8Rng::seed_from_u64(0xba5e_11e);
    for _ in 0..8 * k * (dim + 2) {
        let a: Vec<i64> = (0..dim).map(|_| rng.gen_range(-reach..=reach)).collect();
        points.push(a);
    }
    let values: Vec<Complex64> = points.iter().map(|a| sample(a)).collect();
    polish(&mut atoms, h, &points, &values)?;

    let mut rng = ChaCha8Rng::seed_from_u64(0x0ddba11);
    let scale: f64 = atoms.iter().map(|(_, c)| c.norm()).sum::<f64>().max(1.0);
    for _ in 0..24 {
        let a: Vec<i64> = (0..dim).map(|_| rng.gen_range(-40..=40)).collect();
        let err = (model(&atoms, h, &a) - sample(&a)).norm();
        if err > 1e-8 * scale {
            return Err(QuantError::RecoveryFailed(format!(
                "held-out residual {err:e} at {a:?} exceeds tolerance"
            )));
        }
    }
    Ok(atoms)
}
