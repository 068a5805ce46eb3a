//! Exact segment relations in ℝ^D over the rationals.

use num::{BigRational, Signed, Zero};

use super::{Edge, Point};

/// How two straight edges meet.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Contact {
    /// No common point in the open interiors (touching at endpoints is fine).
    Disjoint,
    /// Non-parallel edges whose open interiors meet in exactly one point.
    Crossing(Point),
    /// Collinear edges sharing a segment of positive length. The bounds are
    /// parameters along the first edge (0 at its source, 1 at its target).
    Overlap { lo: BigRational, hi: BigRational },
}

pub(crate) fn dot(a: &[BigRational], b: &[BigRational]) -> BigRational {
    a.iter()
        .zip(b)
        .fold(BigRational::zero(), |acc, (x, y)| acc + x * y)
}

pub(crate) fn diff(a: &Point, b: &Point) -> Vec<BigRational> {
    a.coords.iter().zip(&b.coords).map(|(x, y)| x - y).collect()
}

/// Parameter λ with `p = src + λ (dst - src)` when `p` lies on the line
/// through `edge`, `None` otherwise.
pub fn line_parameter(edge: &Edge, p: &Point) -> Option<BigRational> {
    let u = diff(&edge.dst, &edge.src);
    let r = diff(p, &edge.src);
    let uu = dot(&u, &u);
    if uu.is_zero() {
        return None;
    }
    let lambda = dot(&r, &u) / uu;
    let on_line = r.iter().zip(&u).all(|(ri, ui)| *ri == &lambda * ui);
    on_line.then_some(lambda)
}

/// Point `src + λ (dst - src)`.
pub fn point_at(edge: &Edge, lambda: &BigRational) -> Point {
    Point {
        coords: edge
            .src
            .coords
            .iter()
            .zip(&edge.dst.coords)
            .map(|(x, y)| x + lambda * (y - x))
            .collect(),
    }
}

fn is_parallel(u: &[BigRational], v: &[BigRational]) -> bool {
    let uu = dot(u, u);
    let k = dot(v, u) / uu;
    v.iter().zip(u).all(|(vi, ui)| *vi == &k * ui)
}

/// Classifies the contact between two non-degenerate edges of equal ambient
/// dimension.
pub fn contact(e: &Edge, f: &Edge) -> Contact {
    let u = diff(&e.dst, &e.src);
    let v = diff(&f.dst, &f.src);

    if is_parallel(&u, &v) {
        let (Some(a), Some(b)) = (line_parameter(e, &f.src), line_parameter(e, &f.dst)) else {
            return Contact::Disjoint;
        };
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let lo = lo.max(BigRational::zero());
        let hi = hi.min(BigRational::from_integer(1.into()));
        return if lo < hi {
            Contact::Overlap { lo, hi }
        } else {
            Contact::Disjoint
        };
    }

    // Solve t u - s v = r in the least-squares sense, then confirm exactly.
    let r = diff(&f.src, &e.src);
    let uu = dot(&u, &u);
    let vv = dot(&v, &v);
    let uv = dot(&u, &v);
    let ru = dot(&r, &u);
    let rv = dot(&r, &v);
    let det = &uv * &uv - &uu * &vv;
    let t = (&uv * &rv - &ru * &vv) / &det;
    let s = (&uu * &rv - &uv * &ru) / &det;
    let coplanar = u
        .iter()
        .zip(&v)
        .zip(&r)
        .all(|((ui, vi), ri)| &t * ui - &s * vi == *ri);
    let one = BigRational::from_integer(1.into());
    if coplanar && t.is_positive() && t < one && s.is_positive() && s < one {
        Contact::Crossing(point_at(e, &t))
    } else {
        Contact::Disjoint
    }
}
