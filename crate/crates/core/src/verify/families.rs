//! Seeded random test objects.

use std::sync::Arc;

use num::complex::Complex64;
use num::{BigRational, ToPrimitive};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::cylinder::{Atom, CylinderFunction, Term};
use crate::lattice::{Edge, Lattice, Point, RefinementPath, RefinementStep};

/// A vector of `n`-blocks, each uniform in the Euclidean ball of `radius`.
pub fn ball_vector<R: Rng>(rng: &mut R, edges: usize, n: usize, radius: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(edges * n);
    for _ in 0..edges {
        loop {
            let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect();
            if v.iter().map(|x| x * x).sum::<f64>() <= 1.0 {
                out.extend(v.iter().map(|x| x * radius));
                break;
            }
        }
    }
    out
}

fn coefficient<R: Rng>(rng: &mut R) -> Complex64 {
    Complex64::new(rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0))
}

/// Frequencies with entries in `{-1, 0, 1}`.
pub fn small_frequency<R: Rng>(rng: &mut R, dim: usize) -> Vec<i64> {
    (0..dim).map(|_| rng.gen_range(-1..=1)).collect()
}

/// A function in `𝓜₀^l`: up to `max_terms` distinct bands with up to
/// `max_atoms` atoms each, atoms in the per-edge ball of `radius`, frequencies in
/// `{-max_b..=max_b}`.
pub fn random_function<R: Rng>(
    rng: &mut R,
    lattice: &Arc<Lattice>,
    max_terms: usize,
    max_atoms: usize,
    max_b: i64,
    radius: f64,
) -> CylinderFunction {
    let (edges, n) = (lattice.num_edges(), lattice.gauge_dim());
    let terms = rng.gen_range(1..=max_terms);
    let mut out: Vec<Term> = Vec::new();
    let mut tries = 0;
    while out.len() < terms && tries < 16 * max_terms {
        tries += 1;
        let b: Vec<i64> = (0..edges * n).map(|_| rng.gen_range(-max_b..=max_b)).collect();
        // Distinct bands, so no band carries more than `max_atoms` atoms.
        if out.iter().any(|t| t.b == b) {
            continue;
        }
        let atoms = (0..rng.gen_range(1..=max_atoms))
            .map(|_| Atom::new(ball_vector(rng, edges, n, radius), coefficient(rng)))
            .collect();
        out.push(Term::new(b, atoms));
    }
    CylinderFunction::new(lattice.clone(), out).expect("shapes match the lattice")
}

/// `g + g*` for a random `g` with 1-2 terms of 1-2 atoms: a real function
/// with 2-4 terms, atoms in the ball of radius 0.45, `b ∈ {-1,0,1}^N`.
pub fn self_adjoint<R: Rng>(rng: &mut R, lattice: &Arc<Lattice>) -> CylinderFunction {
    let (edges, n) = (lattice.num_edges(), lattice.gauge_dim());
    let mut terms = Vec::new();
    for _ in 0..rng.gen_range(1..=2) {
        let b = small_frequency(rng, edges * n);
        let atoms = (0..rng.gen_range(1..=2))
            .map(|_| Atom::new(ball_vector(rng, edges, n, 0.45), coefficient(rng)))
            .collect();
        terms.push(Term::new(b, atoms));
    }
    let g = CylinderFunction::new(lattice.clone(), terms).expect("shapes match the lattice");
    g.add(&g.adjoint()).expect("same lattice")
}

const SPLITS: [(i64, i64); 5] = [(1, 2), (1, 3), (2, 3), (2, 5), (3, 4)];

/// A replayable path of `steps` random subdivisions and edge additions.
/// Added edges are horizontal unit segments above the lattice, so they
/// never meet existing edges.
pub fn random_path<R: Rng>(rng: &mut R, lattice: &Lattice, steps: usize) -> RefinementPath {
    let d = lattice.ambient_dim();
    let top = lattice
        .edges()
        .iter()
        .flat_map(|e| [&e.src, &e.dst])
        .filter_map(|p| p.coords.get(1).and_then(|c| c.ceil().to_integer().to_i64()))
        .max()
        .unwrap_or(0);
    let mut path = RefinementPath::identity(lattice);
    let mut added = 0i64;
    for _ in 0..steps {
        let current = path.target().clone();
        let step = if d >= 2 && rng.gen_bool(0.3) {
            added += 1;
            let mut a = vec![0i64; d];
            let mut b = vec![0i64; d];
            a[1] = top + 1 + added;
            b[1] = top + 1 + added;
            b[0] = 1;
            RefinementStep::AddEdge(Edge::new(Point::from_ints(&a), Point::from_ints(&b)).unwrap())
        } else {
            let &(p, q) = SPLITS.choose(rng).unwrap();
            RefinementStep::Subdivide {
                edge_index: rng.gen_range(0..current.num_edges()),
                t: BigRational::new(p.into(), q.into()),
            }
        };
        let next = RefinementPath::from_steps(&current, vec![step]).expect("generated steps are valid");
        path = path.compose(&next).expect("paths chain");
    }
    path
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn self_adjoint_family_is_real_and_in_ball() {
        let l = Arc::new(Lattice::chain(2, 2, 2));
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let f = self_adjoint(&mut rng, &l);
            assert!(f.max_edge_norm() <= 0.45 + 1e-15);
            assert!(f.terms().len() <= 4);
            for &(q, v) in &[([0.1, 0.2, 0.3, 0.4], [1.0, -2.0, 0.5, 3.0])] {
                assert!(f.evaluate(&q, &v).unwrap().im.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn random_paths_replay() {
        let l = Lattice::chain(2, 1, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let p = random_path(&mut rng, &l, 5);
            let again = RefinementPath::from_steps(&l, p.steps().to_vec()).unwrap();
            assert_eq!(again.target(), p.target());
            assert!(p.ratios_sum_to_one());
        }
    }
}
