//! Witness-free view simulator and exact distribution comparison.
//!
//! A verifier's view of one round is `(X, A, C, B(C))`. The simulator picks
//! uniform `A'`, opens the challenged edge to two distinct colors by solving
//! `b' = x·y' - a'`, and never touches a witness: it only accepts a [`Graph`].
//!
//! For tiny instances both the real and the simulated view distributions for
//! a fixed `(X, C)` are enumerated exhaustively over the `6·Q^|V|` equally
//! likely random tapes and compared in exact rational arithmetic.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::commitment::{commit, embed_color, CommitError};
use crate::field::{Field, FieldElement, FieldError};
use crate::graph::{Color, ColorPermutation, ColoredGraph, Edge, Graph};

/// Enumeration limits: `Q^|V|` tapes per permutation.
pub const MAX_ENUM_WIDTH_BITS: u32 = 4;
pub const MAX_ENUM_VERTICES: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ZkError {
    #[error("challenge {0:?} is not an edge")]
    InvalidChallenge(Edge),
    #[error("query must have one nonzero element per vertex")]
    InvalidQuery,
    #[error("real-view enumeration needs the witness")]
    NotAProver,
    #[error("GF(2^{width_bits}) with {vertices} vertices is too large to enumerate (limits: N <= {MAX_ENUM_WIDTH_BITS}, |V| <= {MAX_ENUM_VERTICES})")]
    TooLargeToEnumerate { width_bits: u32, vertices: usize },
    #[error("distributions are over different (field, X, C)")]
    DomainMismatch,
    #[error(transparent)]
    Commit(#[from] CommitError),
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// One round as the verifiers see it, minus timestamps.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct View {
    pub x: Vec<FieldElement>,
    pub a: Vec<FieldElement>,
    pub c: Edge,
    pub b_c: [FieldElement; 2],
}

impl View {
    /// `X || A || i || j || b_i || b_j`, elements little-endian, indices u32 LE.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for e in self.x.iter().chain(&self.a) {
            out.extend_from_slice(&e.to_bytes());
        }
        let (i, j) = self.c.endpoints();
        out.extend_from_slice(&i.to_le_bytes());
        out.extend_from_slice(&j.to_le_bytes());
        for e in &self.b_c {
            out.extend_from_slice(&e.to_bytes());
        }
        out
    }
}

fn check_inputs(graph: &Graph, x: &[FieldElement], c: Edge) -> Result<(), ZkError> {
    if !graph.contains_edge(c) {
        return Err(ZkError::InvalidChallenge(c));
    }
    if x.len() != graph.num_vertices() || x.iter().any(FieldElement::is_zero) {
        return Err(ZkError::InvalidQuery);
    }
    Ok(())
}

/// The simulator's coloring: `π(0)` and `π(1)` on the challenged endpoints,
/// color 0 everywhere else (never revealed).
fn sim_coloring(n: usize, c: Edge, pi: ColorPermutation) -> Vec<Color> {
    let (i, j) = c.endpoints();
    let mut y = vec![Color::ALL[0]; n];
    y[i as usize] = pi.apply(Color::ALL[0]);
    y[j as usize] = pi.apply(Color::ALL[1]);
    y
}

/// Keys that open `a` to `y` under `x`: `b = x·y - a`.
fn solve_keys(field: &Field, x: &[FieldElement], y: &[Color], a: &[FieldElement]) -> Result<Vec<FieldElement>, ZkError> {
    x.iter()
        .zip(y)
        .zip(a)
        .map(|((&xk, &yk), &ak)| Ok(field.sub(field.mul(xk, embed_color(field, yk)?)?, ak)?))
        .collect()
}

/// Produce a view for `(X, C)` from public data only.
pub fn simulate_view<R: Rng + ?Sized>(
    graph: &Graph,
    field: &Field,
    x: &[FieldElement],
    c: Edge,
    rng: &mut R,
) -> Result<View, ZkError> {
    check_inputs(graph, x, c)?;
    let a: Vec<_> = x.iter().map(|_| field.sample_uniform(rng)).collect();
    let y = sim_coloring(x.len(), c, ColorPermutation::random(rng));
    let b = solve_keys(field, x, &y, &a)?;
    let (i, j) = c.endpoints();
    Ok(View {
        x: x.to_vec(),
        a,
        c,
        b_c: [b[i as usize], b[j as usize]],
    })
}

/// What a distribution is over: the field and the fixed `(X, C)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Universe {
    pub width_bits: u32,
    pub reduction_poly: u128,
    pub x: Vec<FieldElement>,
    pub c: Edge,
}

/// Exact distribution over `(A, b_i, b_j)`: counts over equally likely tapes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ViewDistribution {
    pub universe: Universe,
    /// Key is `A` followed by `b_i, b_j`, as integer representations.
    pub counts: BTreeMap<Vec<u128>, u64>,
    pub total: u64,
}

impl ViewDistribution {
    pub fn probability(&self, key: &[u128]) -> BigRational {
        let c = self.counts.get(key).copied().unwrap_or(0);
        BigRational::new(BigInt::from(c), BigInt::from(self.total))
    }

    /// Sum of all probabilities, exactly.
    pub fn mass(&self) -> BigRational {
        let sum: u64 = self.counts.values().sum();
        BigRational::new(BigInt::from(sum), BigInt::from(self.total))
    }

    /// Marginal counts of `A` alone.
    pub fn commitment_marginal(&self) -> BTreeMap<Vec<u128>, u64> {
        let n = self.universe.x.len();
        let mut m = BTreeMap::new();
        for (k, &c) in &self.counts {
            *m.entry(k[..n].to_vec()).or_insert(0) += c;
        }
        m
    }
}

fn enumeration_guard(field: &Field, n: usize) -> Result<(), ZkError> {
    if field.width_bits() > MAX_ENUM_WIDTH_BITS || n > MAX_ENUM_VERTICES {
        return Err(ZkError::TooLargeToEnumerate {
            width_bits: field.width_bits(),
            vertices: n,
        });
    }
    Ok(())
}

/// Every vector in `F^n`, as integer representations, in lexicographic order.
fn all_vectors(field: &Field, n: usize) -> impl Iterator<Item = Vec<FieldElement>> + '_ {
    let q = 1u64 << field.width_bits();
    (0..q.pow(n as u32)).map(move |mut idx| {
        (0..n)
            .map(|_| {
                let e = field.element(u128::from(idx % q)).expect("in range");
                idx /= q;
                e
            })
            .collect()
    })
}

/// Enumerate over `(tape, secret vector)`, where `f` maps one pair to
/// `(A, B)`.
fn enumerate<F>(field: &Field, x: &[FieldElement], c: Edge, f: F) -> Result<ViewDistribution, ZkError>
where
    F: Fn(ColorPermutation, &[FieldElement]) -> Result<(Vec<FieldElement>, Vec<FieldElement>), ZkError>,
{
    let (i, j) = c.endpoints();
    let mut counts = BTreeMap::new();
    let mut total = 0u64;
    for pi in ColorPermutation::ALL {
        for v in all_vectors(field, x.len()) {
            let (a, b) = f(pi, &v)?;
            let mut key: Vec<u128> = a.iter().map(FieldElement::bits).collect();
            key.push(b[i as usize].bits());
            key.push(b[j as usize].bits());
            *counts.entry(key).or_insert(0u64) += 1;
            total += 1;
        }
    }
    Ok(ViewDistribution {
        universe: Universe {
            width_bits: field.width_bits(),
            reduction_poly: field.spec().reduction_poly(),
            x: x.to_vec(),
            c,
        },
        counts,
        total,
    })
}

/// Real provers: uniform `π` and `B`, `A = X·π(Y) - B`.
pub fn enumerate_real_distribution(
    graph: &ColoredGraph,
    field: &Field,
    x: &[FieldElement],
    c: Edge,
) -> Result<ViewDistribution, ZkError> {
    let witness = graph.witness().ok_or(ZkError::NotAProver)?;
    check_inputs(graph.graph(), x, c)?;
    enumeration_guard(field, x.len())?;
    enumerate(field, x, c, |pi, b| {
        let a = x
            .iter()
            .zip(witness)
            .zip(b)
            .map(|((&xk, &yk), &bk)| commit(field, xk, pi.apply(yk), bk))
            .collect::<Result<Vec<_>, _>>()?;
        Ok((a, b.to_vec()))
    })
}

/// Simulator: uniform `π` (choosing the revealed colors) and `A'`.
pub fn enumerate_sim_distribution(
    graph: &Graph,
    field: &Field,
    x: &[FieldElement],
    c: Edge,
) -> Result<ViewDistribution, ZkError> {
    check_inputs(graph, x, c)?;
    enumeration_guard(field, x.len())?;
    enumerate(field, x, c, |pi, a| {
        let y = sim_coloring(x.len(), c, pi);
        Ok((a.to_vec(), solve_keys(field, x, &y, a)?))
    })
}

/// `(1/2)·Σ|p - q|`, exactly.
pub fn tv_distance(p: &ViewDistribution, q: &ViewDistribution) -> Result<BigRational, ZkError> {
    if p.universe != q.universe {
        return Err(ZkError::DomainMismatch);
    }
    let mut sum = BigRational::zero();
    for key in p.counts.keys().chain(q.counts.keys().filter(|k| !p.counts.contains_key(*k))) {
        sum += (p.probability(key) - q.probability(key)).abs();
    }
    Ok(sum / BigRational::from_integer(BigInt::from(2)))
}

/// TV distance for one `(X, C)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZkInstance {
    /// Query as integer representations.
    pub x: Vec<u128>,
    pub c: Edge,
    /// Exact, as a reduced fraction string.
    pub tv: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZkReport {
    pub width_bits: u32,
    pub vertices: usize,
    pub edges: usize,
    pub instances: Vec<ZkInstance>,
    /// Largest TV distance seen, as a fraction string.
    pub max_tv: String,
    pub pass: bool,
}

/// Compare real and simulated views for every nonzero `X` and every edge.
pub fn zk_equality_check(graph: &ColoredGraph, field: &Field) -> Result<ZkReport, ZkError> {
    let g = graph.graph();
    let n = g.num_vertices();
    graph.witness().ok_or(ZkError::NotAProver)?;
    enumeration_guard(field, n)?;
    let queries: Vec<Vec<FieldElement>> = all_vectors(field, n)
        .filter(|x| x.iter().all(|e| !e.is_zero()))
        .collect();
    let grid: Vec<(&Vec<FieldElement>, Edge)> = queries
        .iter()
        .flat_map(|x| g.edges().iter().map(move |&c| (x, c)))
        .collect();
    let results = grid
        .par_iter()
        .map(|&(x, c)| {
            let real = enumerate_real_distribution(graph, field, x, c)?;
            let sim = enumerate_sim_distribution(g, field, x, c)?;
            Ok((x, c, tv_distance(&real, &sim)?))
        })
        .collect::<Result<Vec<_>, ZkError>>()?;
    let max = results
        .iter()
        .map(|(_, _, tv)| tv.clone())
        .max()
        .unwrap_or_else(BigRational::zero);
    Ok(ZkReport {
        width_bits: field.width_bits(),
        vertices: n,
        edges: g.num_edges(),
        instances: results
            .into_iter()
            .map(|(x, c, tv)| ZkInstance {
                x: x.iter().map(FieldElement::bits).collect(),
                c,
                tv: tv.to_string(),
            })
            .collect(),
        pass: max.is_zero(),
        max_tv: max.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::commitment::reveal_verify;
    use crate::rng::SeededRng;

    fn triangle() -> ColoredGraph {
        let g = Graph::new(3, [Edge::new(0, 1), Edge::new(1, 2), Edge::new(0, 2)]).unwrap();
        ColoredGraph::with_witness(g, Color::ALL.to_vec()).unwrap()
    }

    fn x_of(f: &Field, v: &[u128]) -> Vec<FieldElement> {
        v.iter().map(|&b| f.element(b).unwrap()).collect()
    }

    #[test]
    fn simulated_views_open_to_distinct_colors() {
        let f = Field::preset(112).unwrap();
        let g = triangle();
        let mut rng = SeededRng::from_seed(9);
        for _ in 0..200 {
            let x: Vec<_> = (0..3).map(|_| f.sample_uniform_nonzero(&mut rng)).collect();
            let c = g.graph().edges()[rng.random_range(0..3)];
            let v = simulate_view(g.graph(), &f, &x, c, &mut rng).unwrap();
            let (i, j) = c.endpoints();
            let yi = reveal_verify(&f, x[i as usize], v.a[i as usize], v.b_c[0], None).unwrap();
            let yj = reveal_verify(&f, x[j as usize], v.a[j as usize], v.b_c[1], None).unwrap();
            assert_ne!(yi, yj);
        }
    }

    #[test]
    fn simulator_output_ignores_witness() {
        let f = Field::preset(8).unwrap();
        let with = triangle();
        let without = with.strip_witness();
        let x = x_of(&f, &[3, 5, 7]);
        let c = Edge::new(0, 2);
        let a = simulate_view(with.graph(), &f, &x, c, &mut SeededRng::from_seed(4)).unwrap();
        let b = simulate_view(without.graph(), &f, &x, c, &mut SeededRng::from_seed(4)).unwrap();
        assert_eq!(a.canonical_bytes(), b.canonical_bytes());
    }

    #[test]
    fn simulate_rejects_bad_inputs() {
        let f = Field::preset(8).unwrap();
        let g = Graph::new(3, [Edge::new(0, 1)]).unwrap();
        let mut rng = SeededRng::from_seed(0);
        let x = x_of(&f, &[1, 2, 3]);
        assert_eq!(
            simulate_view(&g, &f, &x, Edge::new(1, 2), &mut rng),
            Err(ZkError::InvalidChallenge(Edge::new(1, 2)))
        );
        assert_eq!(
            simulate_view(&g, &f, &x_of(&f, &[1, 0, 3]), Edge::new(0, 1), &mut rng),
            Err(ZkError::InvalidQuery)
        );
    }

    #[test]
    fn tv_distance_basics() {
        let f = Field::preset(3).unwrap();
        let g = triangle();
        let x = x_of(&f, &[1, 2, 3]);
        let c = Edge::new(0, 1);
        let real = enumerate_real_distribution(&g, &f, &x, c).unwrap();
        assert_eq!(real.total, 6 * 512);
        assert_eq!(real.mass(), BigRational::from_integer(1.into()));
        assert!(tv_distance(&real, &real).unwrap().is_zero());

        let point = |key: Vec<u128>| ViewDistribution {
            universe: real.universe.clone(),
            counts: BTreeMap::from([(key, 1)]),
            total: 1,
        };
        let one = BigRational::from_integer(1.into());
        assert_eq!(tv_distance(&point(vec![0; 5]), &point(vec![1; 5])).unwrap(), one);

        let other = enumerate_real_distribution(&g, &f, &x, Edge::new(1, 2)).unwrap();
        assert_eq!(tv_distance(&real, &other), Err(ZkError::DomainMismatch));
    }

    #[test]
    fn real_commitments_are_uniform_and_open_to_distinct_colors() {
        let f = Field::preset(3).unwrap();
        let g = triangle();
        let x = x_of(&f, &[4, 6, 1]);
        let c = Edge::new(1, 2);
        let real = enumerate_real_distribution(&g, &f, &x, c).unwrap();
        let marginal = real.commitment_marginal();
        assert_eq!(marginal.len(), 512);
        assert!(marginal.values().all(|&n| n == 6));
        for key in real.counts.keys() {
            let e = |b: u128| f.element(b).unwrap();
            let yi = reveal_verify(&f, x[1], e(key[1]), e(key[3]), None).unwrap();
            let yj = reveal_verify(&f, x[2], e(key[2]), e(key[4]), None).unwrap();
            assert_ne!(yi, yj);
        }
    }

    #[test]
    fn enumeration_limits() {
        let g = triangle();
        let big = Field::preset(8).unwrap();
        let x = x_of(&big, &[1, 1, 1]);
        assert!(matches!(
            enumerate_real_distribution(&g, &big, &x, Edge::new(0, 1)),
            Err(ZkError::TooLargeToEnumerate { width_bits: 8, .. })
        ));
        assert!(matches!(zk_equality_check(&g, &big), Err(ZkError::TooLargeToEnumerate { .. })));
        let f = Field::preset(3).unwrap();
        assert_eq!(
            enumerate_real_distribution(&g.strip_witness(), &f, &x_of(&f, &[1, 1, 1]), Edge::new(0, 1)),
            Err(ZkError::NotAProver)
        );
    }
}
