//! Refinement of lattices by adding and subdividing edges.

use num::{BigRational, One, Signed, ToPrimitive, Zero};

use super::geometry::{contact, line_parameter, point_at, Contact};
use super::{Edge, Lattice, LatticeError};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RefinementStep {
    AddEdge(Edge),
    /// Splits the edge at `edge_index` (canonical order of the lattice the
    /// step is applied to) at `src + t (dst - src)`.
    Subdivide { edge_index: usize, t: BigRational },
}

/// Where a target edge came from: the source edge it lies in and the exact
/// ratio of its length to that source edge's length.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EdgeOrigin {
    pub source_edge: usize,
    pub ratio: BigRational,
}

/// Certificate for `source ≤ target`: a replayable sequence of steps plus
/// the composite edge bookkeeping that the embedding maps need.
#[derive(Clone, Debug, PartialEq)]
pub struct RefinementPath {
    source: Lattice,
    steps: Vec<RefinementStep>,
    target: Lattice,
    origins: Vec<Option<EdgeOrigin>>,
    split: Vec<Option<(usize, f64, f64)>>,
}

struct Replay {
    ambient_dim: usize,
    gauge_dim: usize,
    edges: Vec<(Edge, Option<EdgeOrigin>)>,
}

impl Replay {
    fn start(l: &Lattice) -> Self {
        Replay {
            ambient_dim: l.ambient_dim,
            gauge_dim: l.gauge_dim,
            edges: l
                .edges
                .iter()
                .enumerate()
                .map(|(i, e)| {
                    (
                        e.clone(),
                        Some(EdgeOrigin {
                            source_edge: i,
                            ratio: BigRational::one(),
                        }),
                    )
                })
                .collect(),
        }
    }

    fn position(&self, e: &Edge) -> Result<usize, usize> {
        self.edges.binary_search_by(|(x, _)| x.cmp(e))
    }

    fn insert(&mut self, e: Edge, origin: Option<EdgeOrigin>) {
        let pos = self.position(&e).unwrap_or_else(|p| p);
        self.edges.insert(pos, (e, origin));
    }

    fn apply(&mut self, step: &RefinementStep) -> Result<(), LatticeError> {
        match step {
            RefinementStep::AddEdge(e) => {
                if e.src.dim() != self.ambient_dim || e.dst.dim() != self.ambient_dim {
                    return Err(LatticeError::InvalidStep(format!(
                        "added edge {e} is not in dimension {}",
                        self.ambient_dim
                    )));
                }
                if e.src >= e.dst {
                    return Err(LatticeError::InvalidStep(format!("added edge {e} is misoriented")));
                }
                if self.position(e).is_ok() {
                    return Err(LatticeError::InvalidStep(format!("edge {e} already present")));
                }
                if let Some((other, _)) = self
                    .edges
                    .iter()
                    .find(|(x, _)| contact(x, e) != Contact::Disjoint)
                {
                    return Err(LatticeError::InvalidStep(format!(
                        "added edge {e} meets {other} in the open interior"
                    )));
                }
                self.insert(e.clone(), None);
            }
            RefinementStep::Subdivide { edge_index, t } => {
                if *edge_index >= self.edges.len() {
                    return Err(LatticeError::InvalidStep(format!(
                        "edge index {edge_index} out of range ({} edges)",
                        self.edges.len()
                    )));
                }
                if !t.is_positive() || *t >= BigRational::one() {
                    return Err(LatticeError::InvalidStep(format!(
                        "subdivision parameter {t} not in (0,1)"
                    )));
                }
                let (e, origin) = self.edges.remove(*edge_index);
                let mid = point_at(&e, t);
                let first = Edge {
                    src: e.src.clone(),
                    dst: mid.clone(),
                };
                let second = Edge { src: mid, dst: e.dst };
                let (o1, o2) = match origin {
                    Some(o) => (
                        Some(EdgeOrigin {
                            source_edge: o.source_edge,
                            ratio: &o.ratio * t,
                        }),
                        Some(EdgeOrigin {
                            source_edge: o.source_edge,
                            ratio: &o.ratio * (BigRational::one() - t),
                        }),
                    ),
                    None => (None, None),
                };
                self.insert(first, o1);
                self.insert(second, o2);
            }
        }
        Ok(())
    }

    fn finish(self, source: Lattice, steps: Vec<RefinementStep>) -> RefinementPath {
        let (edges, origins): (Vec<_>, Vec<_>) = self.edges.into_iter().unzip();
        let target = Lattice {
            ambient_dim: self.ambient_dim,
            gauge_dim: self.gauge_dim,
            edges,
        };
        let split = origins
            .iter()
            .map(|o: &Option<EdgeOrigin>| {
                o.as_ref().map(|o| {
                    (
                        o.source_edge,
                        o.ratio.numer().to_f64().unwrap_or(f64::NAN),
                        o.ratio.denom().to_f64().unwrap_or(f64::NAN),
                    )
                })
            })
            .collect();
        RefinementPath {
            source,
            steps,
            target,
            origins,
            split,
        }
    }
}

impl RefinementPath {
    pub fn identity(l: &Lattice) -> Self {
        Replay::start(l).finish(l.clone(), Vec::new())
    }

    /// Replays `steps` from `source`, validating each one.
    pub fn from_steps(source: &Lattice, steps: Vec<RefinementStep>) -> Result<Self, LatticeError> {
        let mut replay = Replay::start(source);
        for s in &steps {
            replay.apply(s)?;
        }
        Ok(replay.finish(source.clone(), steps))
    }

    pub fn source(&self) -> &Lattice {
        &self.source
    }

    pub fn target(&self) -> &Lattice {
        &self.target
    }

    pub fn steps(&self) -> &[RefinementStep] {
        &self.steps
    }

    /// Per target edge: `None` for added edges, otherwise the source edge and
    /// exact length ratio.
    pub fn origins(&self) -> &[Option<EdgeOrigin>] {
        &self.origins
    }

    pub fn compose(&self, next: &RefinementPath) -> Result<RefinementPath, LatticeError> {
        if self.target != next.source {
            return Err(LatticeError::NotComposable);
        }
        let steps = self.steps.iter().chain(&next.steps).cloned().collect();
        RefinementPath::from_steps(&self.source, steps)
    }

    /// Sub-edge ratios along every source edge sum to exactly one.
    pub fn ratios_sum_to_one(&self) -> bool {
        let mut sums = vec![BigRational::zero(); self.source.num_edges()];
        for o in self.origins.iter().flatten() {
            sums[o.source_edge] += &o.ratio;
        }
        sums.iter().all(|s| s.is_one())
    }

    fn n(&self) -> usize {
        self.source.gauge_dim
    }

    /// The T map on edge-major coordinate vectors: copies each source block
    /// onto every sub-edge, zero on added edges. Used for torus frequencies
    /// and Fourier multi-indices.
    pub fn lift_frequency<T: Copy + Default>(&self, b: &[T]) -> Vec<T> {
        let n = self.n();
        debug_assert_eq!(b.len(), n * self.source.num_edges());
        let mut out = vec![T::default(); n * self.target.num_edges()];
        for (j, o) in self.split.iter().enumerate() {
            if let Some((i, _, _)) = o {
                out[j * n..(j + 1) * n].copy_from_slice(&b[i * n..(i + 1) * n]);
            }
        }
        out
    }

    /// The S map: scales each source block by the sub-edge length ratio,
    /// zero on added edges.
    pub fn split_momentum(&self, xi: &[f64]) -> Vec<f64> {
        let n = self.n();
        debug_assert_eq!(xi.len(), n * self.source.num_edges());
        let mut out = vec![0.0; n * self.target.num_edges()];
        for (j, o) in self.split.iter().enumerate() {
            if let Some((i, num, den)) = o {
                for k in 0..n {
                    out[j * n + k] = xi[i * n + k] * num / den;
                }
            }
        }
        out
    }

    /// Momentum projection target → source: length-weighted average over
    /// the sub-edges of each source edge.
    pub fn project_momentum(&self, v: &[f64]) -> Vec<f64> {
        let n = self.n();
        let mut out = vec![0.0; n * self.source.num_edges()];
        for (j, o) in self.split.iter().enumerate() {
            if let Some((i, num, den)) = o {
                for k in 0..n {
                    out[i * n + k] += v[j * n + k] * num / den;
                }
            }
        }
        out
    }

    /// Configuration projection target → source: parallel transports along
    /// the sub-edges compose (sum in ℝ^n, to be read mod ℤ^n).
    pub fn project_configuration(&self, q: &[f64]) -> Vec<f64> {
        let n = self.n();
        let mut out = vec![0.0; n * self.source.num_edges()];
        for (j, o) in self.split.iter().enumerate() {
            if let Some((i, _, _)) = o {
                for k in 0..n {
                    out[i * n + k] += q[j * n + k];
                }
            }
        }
        out
    }
}

/// Decides `l ≤ m`. Returns the certifying path, or `None` when some edge of
/// `l` is not an exact chain of consecutive edges of `m`.
pub fn leq(l: &Lattice, m: &Lattice) -> Result<Option<RefinementPath>, LatticeError> {
    l.same_dims(m)?;
    let mut used = vec![false; m.num_edges()];
    let mut chains: Vec<Vec<BigRational>> = Vec::with_capacity(l.num_edges());
    for e in &l.edges {
        let mut pieces: Vec<(BigRational, BigRational, usize)> = Vec::new();
        for (j, f) in m.edges.iter().enumerate() {
            let (Some(a), Some(b)) = (line_parameter(e, &f.src), line_parameter(e, &f.dst)) else {
                continue;
            };
            if !a.is_negative() && b <= BigRational::one() {
                pieces.push((a, b, j));
            }
        }
        pieces.sort();
        let mut at = BigRational::zero();
        let mut breaks = Vec::new();
        for (a, b, j) in pieces {
            if a != at {
                return Ok(None);
            }
            if !at.is_zero() {
                breaks.push(at.clone());
            }
            used[j] = true;
            at = b;
        }
        if !at.is_one() {
            return Ok(None);
        }
        chains.push(breaks);
    }

    let mut replay = Replay::start(l);
    let mut steps = Vec::new();
    for (e, breaks) in l.edges.iter().zip(chains) {
        let mut current = e.clone();
        let mut done = BigRational::zero();
        for lambda in breaks {
            let t = (&lambda - &done) / (BigRational::one() - &done);
            let edge_index = replay.position(&current).expect("edge being split is present");
            let step = RefinementStep::Subdivide {
                edge_index,
                t: t.clone(),
            };
            replay.apply(&step)?;
            steps.push(step);
            current = Edge {
                src: point_at(&current, &t),
                dst: current.dst,
            };
            done = lambda;
        }
    }
    for (j, f) in m.edges.iter().enumerate() {
        if !used[j] {
            let step = RefinementStep::AddEdge(f.clone());
            replay.apply(&step)?;
            steps.push(step);
        }
    }
    let path = replay.finish(l.clone(), steps);
    debug_assert_eq!(path.target, *m);
    Ok(Some(path))
}

/// `l^R`: every edge split into `r` edges of equal length, with its path.
pub fn refine_uniform(l: &Lattice, r: usize) -> (Lattice, RefinementPath) {
    assert!(r >= 1, "refinement factor must be positive");
    let mut replay = Replay::start(l);
    let mut steps = Vec::new();
    for e in &l.edges {
        let mut current = e.clone();
        for k in 0..r - 1 {
            let t = BigRational::new(1.into(), ((r - k) as i64).into());
            let edge_index = replay.position(&current).expect("edge being split is present");
            let step = RefinementStep::Subdivide {
                edge_index,
                t: t.clone(),
            };
            replay.apply(&step).expect("uniform subdivision is always valid");
            steps.push(step);
            current = Edge {
                src: point_at(&current, &t),
                dst: current.dst,
            };
        }
    }
    let path = replay.finish(l.clone(), steps);
    (path.target.clone(), path)
}

/// Coarsest common refinement of two lattices, when one exists in the
/// collinear-overlap sense: overlapping edges must be collinear, and get cut
/// at every endpoint of the cluster they belong to.
pub fn supremum(l1: &Lattice, l2: &Lattice) -> Result<Lattice, LatticeError> {
    l1.same_dims(l2)?;
    let mut all: Vec<Edge> = l1.edges.clone();
    for e in &l2.edges {
        if l1.index_of(e).is_none() {
            all.push(e.clone());
        }
    }

    let mut parent: Vec<usize> = (0..all.len()).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for i in 0..all.len() {
        for j in (i + 1)..all.len() {
            match contact(&all[i], &all[j]) {
                Contact::Disjoint => {}
                Contact::Crossing(at) => {
                    return Err(LatticeError::NotRepresentable(format!(
                        "{} and {} cross in their open interiors at {at}",
                        all[i], all[j]
                    )))
                }
                Contact::Overlap { .. } => {
                    let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                    parent[a] = b;
                }
            }
        }
    }

    let mut clusters: Vec<Vec<usize>> = Vec::new();
    let mut root_slot = vec![usize::MAX; all.len()];
    for i in 0..all.len() {
        let r = find(&mut parent, i);
        if root_slot[r] == usize::MAX {
            root_slot[r] = clusters.len();
            clusters.push(Vec::new());
        }
        clusters[root_slot[r]].push(i);
    }

    let mut out = Vec::new();
    for cluster in clusters {
        if cluster.len() == 1 {
            out.push(all[cluster[0]].clone());
            continue;
        }
        let base = all[cluster[0]].clone();
        let param = |p| line_parameter(&base, p).expect("cluster edges are collinear");
        let spans: Vec<(BigRational, BigRational)> = cluster
            .iter()
            .map(|&i| (param(&all[i].src), param(&all[i].dst)))
            .collect();
        let mut cuts: Vec<BigRational> = spans
            .iter()
            .flat_map(|(a, b)| [a.clone(), b.clone()])
            .collect();
        cuts.sort();
        cuts.dedup();
        for w in cuts.windows(2) {
            let mid = (&w[0] + &w[1]) / BigRational::from_integer(2.into());
            if spans.iter().any(|(a, b)| *a < mid && mid < *b) {
                out.push(Edge {
                    src: point_at(&base, &w[0]),
                    dst: point_at(&base, &w[1]),
                });
            }
        }
    }
    Lattice::new(l1.ambient_dim, l1.gauge_dim, out).map_err(|e| LatticeError::NotRepresentable(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{rat, Point};

    fn seg(a: &[(i64, i64)], b: &[(i64, i64)]) -> Edge {
        let p = |c: &[(i64, i64)]| Point::new(c.iter().map(|&(n, d)| rat(n, d)).collect());
        Edge::new(p(a), p(b)).unwrap()
    }

    fn unit() -> Lattice {
        Lattice::new(2, 1, vec![seg(&[(0, 1), (0, 1)], &[(1, 1), (0, 1)])]).unwrap()
    }

    #[test]
    fn leq_equal_split() {
        let m = Lattice::new(
            2,
            1,
            vec![
                seg(&[(0, 1), (0, 1)], &[(1, 2), (0, 1)]),
                seg(&[(1, 2), (0, 1)], &[(1, 1), (0, 1)]),
            ],
        )
        .unwrap();
        let path = leq(&unit(), &m).unwrap().unwrap();
        assert_eq!(
            path.steps(),
            &[RefinementStep::Subdivide {
                edge_index: 0,
                t: rat(1, 2)
            }]
        );
        assert_eq!(path.target(), &m);
    }

    #[test]
    fn leq_addition_only() {
        let added = seg(&[(0, 1), (0, 1)], &[(0, 1), (1, 1)]);
        let mut edges = unit().edges().to_vec();
        edges.push(added.clone());
        let m = Lattice::new(2, 1, edges).unwrap();
        let path = leq(&unit(), &m).unwrap().unwrap();
        assert_eq!(path.steps(), &[RefinementStep::AddEdge(added)]);
    }

    #[test]
    fn leq_split_then_add() {
        let far = seg(&[(5, 1), (5, 1)], &[(6, 1), (5, 1)]);
        let m = Lattice::new(
            2,
            1,
            vec![
                seg(&[(0, 1), (0, 1)], &[(1, 3), (0, 1)]),
                seg(&[(1, 3), (0, 1)], &[(1, 1), (0, 1)]),
                far.clone(),
            ],
        )
        .unwrap();
        let path = leq(&unit(), &m).unwrap().unwrap();
        assert_eq!(
            path.steps(),
            &[
                RefinementStep::Subdivide {
                    edge_index: 0,
                    t: rat(1, 3)
                },
                RefinementStep::AddEdge(far)
            ]
        );
        let replayed = RefinementPath::from_steps(&unit(), path.steps().to_vec()).unwrap();
        assert_eq!(replayed.target(), &m);
        assert!(path.ratios_sum_to_one());
    }

    #[test]
    fn leq_rejects_unrelated() {
        let other = Lattice::new(2, 1, vec![seg(&[(0, 1), (0, 1)], &[(1, 2), (0, 1)])]).unwrap();
        assert!(leq(&unit(), &other).unwrap().is_none());
        assert!(leq(&other, &unit()).unwrap().is_none());
        let three_d = Lattice::chain(3, 1, 1);
        assert!(leq(&unit(), &three_d).is_err());
    }

    #[test]
    fn uniform_refinement() {
        let (same, path) = refine_uniform(&unit(), 1);
        assert_eq!(same, unit());
        assert!(path.steps().is_empty());

        let (half, path) = refine_uniform(&unit(), 2);
        assert_eq!(half.num_edges(), 2);
        assert_eq!(
            path.steps(),
            &[RefinementStep::Subdivide {
                edge_index: 0,
                t: rat(1, 2)
            }]
        );

        let two = Lattice::new(
            2,
            1,
            vec![
                seg(&[(0, 1), (0, 1)], &[(1, 1), (0, 1)]),
                seg(&[(0, 1), (0, 1)], &[(0, 1), (1, 1)]),
            ],
        )
        .unwrap();
        let (six, path) = refine_uniform(&two, 3);
        assert_eq!(six.num_edges(), 6);
        assert!(path.origins().iter().all(|o| o.as_ref().unwrap().ratio == rat(1, 3)));
        let replayed = RefinementPath::from_steps(&two, path.steps().to_vec()).unwrap();
        assert_eq!(replayed.target(), &six);
    }

    #[test]
    fn supremum_cases() {
        assert_eq!(supremum(&unit(), &unit()).unwrap(), unit());

        let half = Lattice::new(2, 1, vec![seg(&[(0, 1), (0, 1)], &[(1, 2), (0, 1)])]).unwrap();
        let sup = supremum(&unit(), &half).unwrap();
        assert_eq!(sup, refine_uniform(&unit(), 2).0);
        assert!(leq(&unit(), &sup).unwrap().is_some());
        assert!(leq(&half, &sup).unwrap().is_some());

        let d1 = Lattice::new(2, 1, vec![seg(&[(0, 1), (0, 1)], &[(1, 1), (1, 1)])]).unwrap();
        let d2 = Lattice::new(2, 1, vec![seg(&[(0, 1), (1, 1)], &[(1, 1), (0, 1)])]).unwrap();
        assert!(matches!(
            supremum(&d1, &d2),
            Err(LatticeError::NotRepresentable(_))
        ));
    }

    #[test]
    fn supremum_of_staggered_collinear_edges() {
        let shifted = Lattice::new(2, 1, vec![seg(&[(1, 2), (0, 1)], &[(3, 2), (0, 1)])]).unwrap();
        let sup = supremum(&unit(), &shifted).unwrap();
        assert_eq!(sup.num_edges(), 3);
        assert!(leq(&unit(), &sup).unwrap().is_some());
        assert!(leq(&shifted, &sup).unwrap().is_some());
    }

    #[test]
    fn maps_on_unequal_split() {
        let m = Lattice::new(
            2,
            1,
            vec![
                seg(&[(0, 1), (0, 1)], &[(1, 3), (0, 1)]),
                seg(&[(1, 3), (0, 1)], &[(1, 1), (0, 1)]),
            ],
        )
        .unwrap();
        let path = leq(&unit(), &m).unwrap().unwrap();
        assert_eq!(path.lift_frequency(&[3i64]), vec![3, 3]);
        let s = path.split_momentum(&[0.3]);
        assert!((s[0] - 0.1).abs() < 1e-15 && (s[1] - 0.2).abs() < 1e-15);
        assert!((path.project_momentum(&[1.0, 4.0])[0] - 3.0).abs() < 1e-15);
        assert_eq!(path.project_configuration(&[0.25, 0.5]), vec![0.75]);
    }

    #[test]
    fn bad_steps_are_rejected() {
        let cross = seg(&[(1, 2), (-1, 1)], &[(1, 2), (1, 1)]);
        assert!(RefinementPath::from_steps(&unit(), vec![RefinementStep::AddEdge(cross)]).is_err());
        let bad_t = RefinementStep::Subdivide {
            edge_index: 0,
            t: rat(1, 1),
        };
        assert!(RefinementPath::from_steps(&unit(), vec![bad_t]).is_err());
        let bad_i = RefinementStep::Subdivide {
            edge_index: 3,
            t: rat(1, 2),
        };
        assert!(RefinementPath::from_steps(&unit(), vec![bad_i]).is_err());
    }
}
