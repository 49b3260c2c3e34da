//! Explicit growth of the uniform random recursive k-DAG.
//!
//! Vertices are 0-based. Vertices `0..k` are the roots, with `0..ell` red.
//! Vertex `i >= k` draws `k` parents uniformly with replacement from
//! `0..i`, sees each draw through the mutation channel (one independent
//! flip per draw, repeats included) and takes the majority color. Only
//! the set of distinct parents is kept.

use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::params::{Color, ModelParams};
use crate::rng::RandomStream;
use crate::urn_sim::majority_color;

#[derive(Debug, Clone, PartialEq)]
pub struct KDag {
    params: ModelParams,
    colors: Vec<Color>,
    // CSR layout: parents of vertex i are parent_list[offsets[i]..offsets[i + 1]].
    offsets: Vec<usize>,
    parent_list: Vec<u32>,
    red: u64,
    stream: Option<RandomStream>,
}

impl KDag {
    /// The `k` roots with no edges.
    pub fn roots(params: ModelParams) -> Self {
        let k = params.k() as usize;
        let colors = (0..k)
            .map(|i| if i < params.ell() as usize { Color::Red } else { Color::Blue })
            .collect();
        Self {
            params,
            colors,
            offsets: alloc::vec![0; k + 1],
            parent_list: Vec::new(),
            red: params.ell() as u64,
            stream: None,
        }
    }

    /// Rebuilds a graph from its colors and per-vertex parent lists,
    /// checking every structural invariant.
    pub fn from_parts(params: ModelParams, colors: Vec<Color>, parents: &[Vec<u32>]) -> Result<Self> {
        let k = params.k() as usize;
        if colors.len() != parents.len() {
            return Err(Error::InvalidParameter("colors and parents must have the same length"));
        }
        if colors.len() < k {
            return Err(Error::InvalidHorizon {
                n: colors.len() as u64,
                k: params.k(),
            });
        }
        let root_red = colors[..k].iter().filter(|c| c.is_red()).count();
        if root_red != params.ell() as usize {
            return Err(Error::InvalidParameter("root colors do not match ell"));
        }
        let mut offsets = Vec::with_capacity(colors.len() + 1);
        let mut parent_list = Vec::new();
        offsets.push(0);
        for (i, ps) in parents.iter().enumerate() {
            if i < k {
                if !ps.is_empty() {
                    return Err(Error::InvalidParameter("roots have no parents"));
                }
            } else {
                if ps.is_empty() || ps.len() > k {
                    return Err(Error::InvalidParameter("a vertex has between 1 and k parents"));
                }
                if ps.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::InvalidParameter("parent lists must be sorted and distinct"));
                }
                if ps[ps.len() - 1] as usize >= i {
                    return Err(Error::InvalidParameter("parents must precede their child"));
                }
            }
            parent_list.extend_from_slice(ps);
            offsets.push(parent_list.len());
        }
        let red = colors.iter().filter(|c| c.is_red()).count() as u64;
        Ok(Self {
            params,
            colors,
            offsets,
            parent_list,
            red,
            stream: None,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    /// Number of vertices.
    pub fn n(&self) -> u64 {
        self.colors.len() as u64
    }

    pub fn colors(&self) -> &[Color] {
        &self.colors
    }

    pub fn parents(&self, vertex: usize) -> &[u32] {
        &self.parent_list[self.offsets[vertex]..self.offsets[vertex + 1]]
    }

    /// `(child, parent)` pairs in child order, parents ascending.
    pub fn edges(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        (0..self.colors.len()).flat_map(move |child| self.parents(child).iter().map(move |&p| (child as u32, p)))
    }

    pub fn edge_count(&self) -> usize {
        self.parent_list.len()
    }

    pub fn red_count(&self) -> u64 {
        self.red
    }

    /// The stream the graph was grown from, if any.
    pub fn stream(&self) -> Option<RandomStream> {
        self.stream
    }

    /// `(n, red count among the first n vertices)` for `n = k..=self.n()`.
    pub fn red_count_path(&self) -> Vec<(u64, u64)> {
        let k = self.params.k() as usize;
        let mut red = self.params.ell() as u64;
        let mut path = Vec::with_capacity(self.colors.len() - k + 1);
        path.push((k as u64, red));
        for (i, c) in self.colors.iter().enumerate().skip(k) {
            red += c.is_red() as u64;
            path.push((i as u64 + 1, red));
        }
        path
    }

    /// Adds one vertex.
    pub fn grow_one<R: Rng + ?Sized>(&mut self, rng: &mut R, scratch: &mut Vec<u32>) {
        let k = self.params.k();
        let p = self.params.p();
        let existing = self.colors.len() as u64;
        scratch.clear();
        let mut red_votes = 0u32;
        for _ in 0..k {
            let parent = rng.random_range(0..existing) as u32;
            let mut seen = self.colors[parent as usize];
            if p > 0.0 && rng.random::<f64>() < p {
                seen = seen.flipped();
            }
            red_votes += seen.is_red() as u32;
            scratch.push(parent);
        }
        scratch.sort_unstable();
        scratch.dedup();
        let color = if 2 * red_votes > k { Color::Red } else { Color::Blue };
        self.red += color.is_red() as u64;
        self.colors.push(color);
        self.parent_list.extend_from_slice(scratch);
        self.offsets.push(self.parent_list.len());
    }
}

/// Grows the k-DAG up to `n` vertices from a reproducible stream.
pub fn grow(params: ModelParams, n: u64, stream: RandomStream) -> Result<KDag> {
    let mut rng = stream.rng();
    let mut dag = grow_with(params, n, &mut rng)?;
    dag.stream = Some(stream);
    Ok(dag)
}

/// Grows the k-DAG up to `n` vertices drawing from `rng`.
pub fn grow_with<R: Rng + ?Sized>(params: ModelParams, n: u64, rng: &mut R) -> Result<KDag> {
    if n < params.k() as u64 {
        return Err(Error::InvalidHorizon { n, k: params.k() });
    }
    let mut dag = KDag::roots(params);
    let extra = (n - params.k() as u64) as usize;
    dag.colors.reserve(extra);
    dag.offsets.reserve(extra);
    dag.parent_list.reserve(extra * params.k() as usize);
    let mut scratch = Vec::with_capacity(params.k() as usize);
    for _ in 0..extra {
        dag.grow_one(rng, &mut scratch);
    }
    Ok(dag)
}

/// `R_n`, the red fraction of the vertices.
pub fn red_proportion(dag: &KDag) -> f64 {
    dag.red_count() as f64 / dag.n() as f64
}

/// The majority color of all vertices, ties broken by a fair coin from `rng`.
pub fn majority_bit<R: Rng + ?Sized>(dag: &KDag, rng: &mut R) -> Color {
    majority_color(dag.red_count(), dag.n(), rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RandomStream;
    use std::vec;

    fn params(k: u32, p: f64, ell: u32) -> ModelParams {
        ModelParams::new(k, p, ell).unwrap()
    }

    #[test]
    fn horizon_equal_to_k_gives_the_roots() {
        let dag = grow(params(3, 0.2, 2), 3, RandomStream::new(1, 0)).unwrap();
        assert_eq!(dag.n(), 3);
        assert_eq!(dag.red_count(), 2);
        assert_eq!(dag.edge_count(), 0);
        assert_eq!(dag.colors(), &[Color::Red, Color::Red, Color::Blue]);
        assert!((red_proportion(&dag) - 2.0 / 3.0).abs() < 1e-16);
    }

    #[test]
    fn horizon_below_k_is_rejected() {
        assert_eq!(
            grow(params(5, 0.2, 3), 4, RandomStream::new(1, 0)),
            Err(Error::InvalidHorizon { n: 4, k: 5 })
        );
    }

    #[test]
    fn no_mutation_keeps_everything_red() {
        let dag = grow(params(3, 0.0, 3), 500, RandomStream::new(9, 1)).unwrap();
        assert_eq!(dag.red_count(), 500);
        assert_eq!(red_proportion(&dag), 1.0);
    }

    #[test]
    fn structural_invariants_hold() {
        let k = 5;
        let dag = grow(params(k, 0.3, 3), 2000, RandomStream::new(3, 3)).unwrap();
        for v in 0..dag.n() as usize {
            let ps = dag.parents(v);
            if v < k as usize {
                assert!(ps.is_empty());
            } else {
                assert!(!ps.is_empty() && ps.len() <= k as usize);
                assert!(ps.windows(2).all(|w| w[0] < w[1]));
                assert!((*ps.last().unwrap() as usize) < v);
            }
        }
        let path = dag.red_count_path();
        assert_eq!(path[0], (5, 3));
        assert_eq!(*path.last().unwrap(), (dag.n(), dag.red_count()));
    }

    #[test]
    fn single_edge_graph() {
        let dag = grow(params(1, 0.1, 1), 2, RandomStream::new(0, 0)).unwrap();
        assert_eq!(dag.edges().collect::<std::vec::Vec<_>>(), vec![(1, 0)]);
    }

    #[test]
    fn reproducible_from_stream() {
        let s = RandomStream::new(42, 17);
        assert_eq!(grow(params(3, 0.2, 2), 300, s).unwrap(), grow(params(3, 0.2, 2), 300, s).unwrap());
    }

    #[test]
    fn distinct_parent_count_law_for_fourth_vertex() {
        // 27 equally likely draw triples from 3 vertices: 6 with 3 distinct,
        // 18 with 2, 3 with 1.
        let trials = 60_000u64;
        let mut counts = [0u64; 4];
        for t in 0..trials {
            let dag = grow(params(3, 0.2, 2), 4, RandomStream::new(5, t)).unwrap();
            counts[dag.parents(3).len()] += 1;
        }
        for (d, expected) in [(1usize, 3.0 / 27.0), (2, 18.0 / 27.0), (3, 6.0 / 27.0)] {
            let freq = counts[d] as f64 / trials as f64;
            let se = libm::sqrt(expected * (1.0 - expected) / trials as f64);
            assert!((freq - expected).abs() < 4.0 * se, "{d} distinct: {freq} vs {expected}");
        }
    }

    #[test]
    fn fourth_vertex_red_probability() {
        // f(2/3) = 0.6 at p = 0.2, and P{Bin(3, 0.6) >= 2} = 0.648.
        let trials = 100_000u64;
        let red = (0..trials)
            .filter(|&t| grow(params(3, 0.2, 2), 4, RandomStream::new(11, t)).unwrap().colors()[3].is_red())
            .count();
        let freq = red as f64 / trials as f64;
        assert!((freq - 0.648).abs() < 0.005, "{freq}");
    }

    #[test]
    fn majority_bit_cases() {
        let mut rng = RandomStream::new(0, 0).rng();
        let p = params(3, 0.2, 3);
        let red = |n: usize| KDag::from_parts(
            p,
            (0..4).map(|i| if i < n { Color::Red } else { Color::Blue }).collect(),
            &[vec![], vec![], vec![], vec![0]],
        );
        assert_eq!(majority_bit(&red(3).unwrap(), &mut rng), Color::Red);
        let tie = KDag::from_parts(
            params(3, 0.2, 2),
            vec![Color::Red, Color::Red, Color::Blue, Color::Blue],
            &[vec![], vec![], vec![], vec![0, 2]],
        )
        .unwrap();
        let reds = (0..20_000).filter(|_| majority_bit(&tie, &mut rng).is_red()).count();
        assert!((reds as f64 / 20_000.0 - 0.5).abs() < 0.02);
        let mostly_blue = KDag::from_parts(
            params(1, 0.2, 1),
            vec![Color::Red, Color::Blue, Color::Blue, Color::Blue],
            &[vec![], vec![0], vec![1], vec![1]],
        )
        .unwrap();
        assert_eq!(majority_bit(&mostly_blue, &mut rng), Color::Blue);
    }

    #[test]
    fn from_parts_rejects_broken_graphs() {
        let p = params(3, 0.2, 2);
        let colors = vec![Color::Red, Color::Red, Color::Blue, Color::Red];
        assert!(KDag::from_parts(p, colors.clone(), &[vec![], vec![], vec![], vec![]]).is_err());
        assert!(KDag::from_parts(p, colors.clone(), &[vec![], vec![], vec![], vec![3]]).is_err());
        assert!(KDag::from_parts(p, colors.clone(), &[vec![], vec![], vec![], vec![1, 0]]).is_err());
        assert!(KDag::from_parts(p, colors.clone(), &[vec![0], vec![], vec![], vec![1]]).is_err());
        assert!(KDag::from_parts(p, colors, &[vec![], vec![], vec![], vec![0, 1, 2]]).is_ok());
    }
}
