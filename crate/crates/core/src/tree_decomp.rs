//! Marked random recursive trees (`k = 1`).
//!
//! The color process on a uniform random recursive tree can be generated
//! by marking each non-root vertex with probability `2p` and letting a
//! marked vertex take its parent's color or the opposite color with a fair
//! coin. Root and marked vertices then head monochromatic subtrees that
//! partition the tree, and the red-minus-blue count splits as
//! `Delta = N_0 + W` with `W = sum_i N_i B_{parent(i)} xi_i M_i`.
//!
//! Coins are drawn for marked vertices only; unmarked vertices store `+1`.

use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::params::check_p;
use crate::rng::RandomStream;
use crate::stats::{wilson_95, ProportionEstimate};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MarkedTree {
    /// `parent[i] < i` for `i >= 1`; `parent[0]` is unused and set to 0.
    pub parent: Vec<u32>,
    pub marked: Vec<bool>,
    /// Rademacher coin, `+1` keeps the parent color, `-1` flips it.
    pub coin: Vec<i8>,
    /// `+1` red, `-1` blue. The root is red.
    pub color: Vec<i8>,
}

impl MarkedTree {
    /// Number of non-root vertices.
    pub fn n(&self) -> usize {
        self.parent.len().saturating_sub(1)
    }

    /// Regrows the tree in place on vertices `0..=n`.
    pub fn regrow<R: Rng + ?Sized>(&mut self, p: f64, n: usize, rng: &mut R) {
        self.parent.clear();
        self.marked.clear();
        self.coin.clear();
        self.color.clear();
        self.parent.push(0);
        self.marked.push(false);
        self.coin.push(1);
        self.color.push(1);
        let mark_prob = 2.0 * p;
        for i in 1..=n {
            let parent = rng.random_range(0..i as u64) as usize;
            let marked = mark_prob > 0.0 && rng.random::<f64>() < mark_prob;
            let coin: i8 = if marked && !rng.random::<bool>() { -1 } else { 1 };
            self.parent.push(parent as u32);
            self.marked.push(marked);
            self.coin.push(coin);
            self.color.push(self.color[parent] * coin);
        }
    }

    /// Checks the parent ordering and the coloring rule.
    pub fn validate(&self) -> Result<()> {
        let len = self.parent.len();
        if len == 0 || self.marked.len() != len || self.coin.len() != len || self.color.len() != len {
            return Err(Error::InvalidParameter("marked tree arrays must have equal, nonzero length"));
        }
        if self.color[0] != 1 {
            return Err(Error::InvalidParameter("the root must be red"));
        }
        for i in 1..len {
            let p = self.parent[i] as usize;
            if p >= i {
                return Err(Error::InvalidParameter("parents must precede their child"));
            }
            let flip = self.marked[i] && self.coin[i] == -1;
            let expected = if flip { -self.color[p] } else { self.color[p] };
            if self.color[i] != expected || !matches!(self.coin[i], -1 | 1) {
                return Err(Error::InvalidParameter("colors violate the marking rule"));
            }
        }
        Ok(())
    }
}

pub fn grow_marked_tree<R: Rng + ?Sized>(p: f64, n: usize, rng: &mut R) -> Result<MarkedTree> {
    check_p(p)?;
    if n == 0 {
        return Err(Error::InvalidParameter("the tree needs at least one non-root vertex"));
    }
    let mut tree = MarkedTree::default();
    tree.regrow(p, n, rng);
    Ok(tree)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decomposition {
    /// `sizes[i]`: vertices in the largest subtree at `i` whose other
    /// vertices are all unmarked.
    pub sizes: Vec<u64>,
    /// Red minus blue over all vertices.
    pub delta: i64,
    pub w: i64,
}

impl Decomposition {
    pub fn n0(&self) -> u64 {
        self.sizes[0]
    }
}

/// Summary of one decomposed tree without the per-vertex sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreeOutcome {
    pub delta: i64,
    pub n0: u64,
    pub w: i64,
}

/// Computes the subtree sizes into `sizes` and returns `(Delta, N_0, W)`,
/// checking the partition and `Delta = N_0 + W`.
pub fn decompose_into(tree: &MarkedTree, sizes: &mut Vec<u64>) -> Result<TreeOutcome> {
    let len = tree.parent.len();
    sizes.clear();
    sizes.resize(len, 1);
    // Children have larger indices, so one reverse pass folds each
    // unmarked vertex into its parent's block.
    for i in (1..len).rev() {
        if !tree.marked[i] {
            sizes[tree.parent[i] as usize] += sizes[i];
        }
    }
    let mut delta: i64 = 0;
    let mut w: i64 = 0;
    let mut covered = sizes[0];
    for i in 0..len {
        delta += tree.color[i] as i64;
        if i > 0 && tree.marked[i] {
            let parent_color = tree.color[tree.parent[i] as usize] as i64;
            w += sizes[i] as i64 * parent_color * tree.coin[i] as i64;
            covered += sizes[i];
        }
    }
    if covered != len as u64 {
        return Err(Error::Internal("root and marked subtrees do not partition the tree"));
    }
    let n0 = sizes[0];
    if delta != n0 as i64 + w {
        return Err(Error::Internal("Delta differs from N_0 + W"));
    }
    Ok(TreeOutcome { delta, n0, w })
}

pub fn decompose(tree: &MarkedTree) -> Result<Decomposition> {
    let mut sizes = Vec::new();
    let out = decompose_into(tree, &mut sizes)?;
    Ok(Decomposition {
        sizes,
        delta: out.delta,
        w: out.w,
    })
}

/// Reusable buffers for repeated tree trials.
#[derive(Debug, Clone, Default)]
pub struct TreeScratch {
    tree: MarkedTree,
    sizes: Vec<u64>,
}

/// Grows and decomposes one tree on `stream`.
pub fn tree_trial(p: f64, n: usize, stream: RandomStream, scratch: &mut TreeScratch) -> Result<TreeOutcome> {
    let mut rng = stream.rng();
    scratch.tree.regrow(p, n, &mut rng);
    decompose_into(&scratch.tree, &mut scratch.sizes)
}

/// Counts accumulated over tree trials; merging is order independent.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TreeTally {
    pub trials: u64,
    pub delta_positive: u64,
    /// Trials with `N_0 <= |W|`.
    pub n0_within_w: u64,
    pub w_positive: u64,
    pub w_negative: u64,
    pub n0_sum: u128,
}

impl TreeTally {
    pub fn record(&mut self, o: &TreeOutcome) {
        self.trials += 1;
        self.delta_positive += (o.delta > 0) as u64;
        self.n0_within_w += (o.n0 <= o.w.unsigned_abs()) as u64;
        self.w_positive += (o.w > 0) as u64;
        self.w_negative += (o.w < 0) as u64;
        self.n0_sum += o.n0 as u128;
    }

    pub fn merge(&mut self, other: &TreeTally) {
        self.trials += other.trials;
        self.delta_positive += other.delta_positive;
        self.n0_within_w += other.n0_within_w;
        self.w_positive += other.w_positive;
        self.w_negative += other.w_negative;
        self.n0_sum += other.n0_sum;
    }

    pub fn estimate(&self) -> DeltaEstimate {
        let direct = wilson_95(self.delta_positive, self.trials);
        // P{Delta > 0} = 1 - P{N_0 <= |W|} / 2 by the symmetry of W.
        let within = wilson_95(self.n0_within_w, self.trials);
        DeltaEstimate {
            direct,
            via_symmetry: 1.0 - 0.5 * within.estimate,
            via_symmetry_ci: (1.0 - 0.5 * within.ci_hi, 1.0 - 0.5 * within.ci_lo),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaEstimate {
    /// Fraction of trials with `Delta > 0`, with its Wilson interval.
    pub direct: ProportionEstimate,
    pub via_symmetry: f64,
    pub via_symmetry_ci: (f64, f64),
}

/// Sequential Monte Carlo estimate of `P{Delta_n > 0}`; trial `t` uses
/// stream `(seed, t)`.
pub fn estimate_delta_positive(p: f64, n: usize, trials: u64, seed: u64) -> Result<(DeltaEstimate, TreeTally)> {
    check_p(p)?;
    if n == 0 || trials == 0 {
        return Err(Error::InvalidParameter("n and trials must be positive"));
    }
    let mut scratch = TreeScratch::default();
    let mut tally = TreeTally::default();
    for t in 0..trials {
        let o = tree_trial(p, n, RandomStream::for_trial(seed, 0, t), &mut scratch)?;
        tally.record(&o);
    }
    Ok((tally.estimate(), tally))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::vec;

    #[test]
    fn no_mutation_means_no_marks() {
        let mut rng = RandomStream::new(1, 0).rng();
        let tree = grow_marked_tree(0.0, 100, &mut rng).unwrap();
        assert!(tree.marked.iter().all(|&m| !m));
        assert!(tree.color.iter().all(|&c| c == 1));
        let d = decompose(&tree).unwrap();
        assert_eq!(d.delta, 101);
        assert_eq!(d.n0(), 101);
        assert_eq!(d.w, 0);
    }

    #[test]
    fn single_child_rule() {
        for s in 0..50 {
            let mut rng = RandomStream::new(2, s).rng();
            let t = grow_marked_tree(0.3, 1, &mut rng).unwrap();
            assert_eq!(t.parent, [0, 0]);
            let flips = t.marked[1] && t.coin[1] == -1;
            assert_eq!(t.color[1], if flips { -1 } else { 1 });
        }
    }

    #[test]
    fn half_mutation_marks_everything() {
        let mut rng = RandomStream::new(3, 0).rng();
        let t = grow_marked_tree(0.5, 500, &mut rng).unwrap();
        assert!(t.marked[1..].iter().all(|&m| m));
        for i in 1..=500 {
            let mut c = 1i8;
            let mut v = i;
            while v != 0 {
                c *= t.coin[v];
                v = t.parent[v] as usize;
            }
            assert_eq!(t.color[i], c);
        }
        t.validate().unwrap();
    }

    #[test]
    fn three_vertex_path_by_hand() {
        let tree = MarkedTree {
            parent: vec![0, 0, 1],
            marked: vec![false, true, false],
            coin: vec![1, -1, 1],
            color: vec![1, -1, -1],
        };
        tree.validate().unwrap();
        let d = decompose(&tree).unwrap();
        assert_eq!(d.sizes, [1, 2, 1]);
        assert_eq!(d.delta, -1);
        assert_eq!(d.w, -2);
        assert_eq!(d.n0() as i64 + d.w, d.delta);
    }

    #[test]
    fn identity_and_partition_on_random_trees() {
        let mut scratch = TreeScratch::default();
        for s in 0..200 {
            let o = tree_trial(0.2, 1000, RandomStream::new(4, s), &mut scratch).unwrap();
            assert_eq!(o.delta, o.n0 as i64 + o.w);
        }
    }

    #[test]
    fn rejects_bad_input() {
        let mut rng = RandomStream::new(0, 0).rng();
        assert!(grow_marked_tree(0.6, 10, &mut rng).is_err());
        assert!(grow_marked_tree(0.1, 0, &mut rng).is_err());
        assert!(estimate_delta_positive(0.1, 10, 0, 1).is_err());
        let broken = MarkedTree {
            parent: vec![0, 0],
            marked: vec![false, false],
            coin: vec![1, 1],
            color: vec![1, -1],
        };
        assert!(broken.validate().is_err());
    }

    #[test]
    fn zero_mutation_estimate_is_one() {
        let (est, tally) = estimate_delta_positive(0.0, 100, 10, 5).unwrap();
        assert_eq!(est.direct.estimate, 1.0);
        assert_eq!(est.via_symmetry, 1.0);
        assert_eq!(tally.trials, 10);
    }

    #[test]
    fn tally_merge_is_additive() {
        let mut scratch = TreeScratch::default();
        let outcomes: std::vec::Vec<_> = (0..40)
            .map(|s| tree_trial(0.15, 300, RandomStream::new(6, s), &mut scratch).unwrap())
            .collect();
        let mut whole = TreeTally::default();
        outcomes.iter().for_each(|o| whole.record(o));
        let (mut a, mut b) = (TreeTally::default(), TreeTally::default());
        outcomes[..17].iter().for_each(|o| a.record(o));
        outcomes[17..].iter().for_each(|o| b.record(o));
        a.merge(&b);
        assert_eq!(a, whole);
    }
}
