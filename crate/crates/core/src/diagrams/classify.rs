//! Taxonomy of single-line contraction graphs.
//!
//! Vertices `1..=n+ñ`, the first `n` left of the ρ₀-vertex. For a contraction
//! `ℓ ∼ ℓ'` with `ℓ < ℓ'`:
//!
//! * immediate recollision: `ℓ' = ℓ + 1`, both on the same side;
//! * rung: `ℓ ≤ n < ℓ'`;
//! * decorated ladder: every contraction is a recollision or a rung, and the
//!   rungs are anti-monotone (`ℓ₁ < ℓ₂ ⇒ ℓ₂' < ℓ₁'`);
//! * basic ladder: a decorated ladder without recollisions;
//! * crossing: two contractions interleave, `ℓ < j < ℓ' < j'`;
//! * nesting: a same-side contraction `ℓ ∼ ℓ + 2k + 1`, `k ≥ 1`, enclosing
//!   exactly the chain of recollisions `j ∼ j + 1`, `j = ℓ+1, ℓ+3, …, ℓ+2k−1`.
//!
//! With these readings every graph that is not a decorated ladder has a
//! crossing or a nesting: without crossings, a minimal same-side long
//! contraction can only enclose a tiling by recollisions, and non-crossing
//! rungs are automatically anti-monotone.

use serde::{Deserialize, Serialize};

use super::graph::{enumerate_pairings, FeynmanGraph, MAX_VERTICES};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClassLabel {
    BasicLadder,
    DecoratedLadder,
    Crossing,
    Nesting,
    OtherNonladder,
}

impl ClassLabel {
    pub fn name(self) -> &'static str {
        match self {
            ClassLabel::BasicLadder => "basic-ladder",
            ClassLabel::DecoratedLadder => "decorated-ladder",
            ClassLabel::Crossing => "crossing",
            ClassLabel::Nesting => "nesting",
            ClassLabel::OtherNonladder => "other-nonladder",
        }
    }
}

/// Result of [`classify`]. `label` is the first matching class in the order
/// basic ladder, decorated ladder, crossing, nesting, other; the flags record
/// every property independently.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphClass {
    pub label: ClassLabel,
    pub basic_ladder: bool,
    pub decorated_ladder: bool,
    pub has_immediate_recollision: bool,
    pub has_crossing: bool,
    pub has_nesting: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Connectivity {
    /// No contraction joins two different particle lines.
    CompletelyDisconnected,
    NonDisconnected,
}

pub fn connectivity(g: &FeynmanGraph) -> Connectivity {
    if g.pairing().iter().all(|(a, b)| a.line == b.line) {
        Connectivity::CompletelyDisconnected
    } else {
        Connectivity::NonDisconnected
    }
}

/// Position pairs `(ℓ, ℓ')`, `ℓ < ℓ'`, and the partner table of a one-line
/// graph.
fn single_line_pairs(g: &FeynmanGraph) -> Result<(usize, Vec<(usize, usize)>, Vec<usize>)> {
    if g.lines() != 1 {
        return Err(Error::InconsistentGraph(format!(
            "taxonomy is defined for one particle line, graph has {}",
            g.lines()
        )));
    }
    let (n, nt) = g.degrees()[0];
    let mut partner = vec![0usize; n + nt + 1];
    let pairs: Vec<(usize, usize)> = g
        .pairing()
        .iter()
        .map(|(a, b)| {
            let (l, r) = (a.position.min(b.position), a.position.max(b.position));
            partner[l] = r;
            partner[r] = l;
            (l, r)
        })
        .collect();
    Ok((n, pairs, partner))
}

pub fn classify(g: &FeynmanGraph) -> Result<GraphClass> {
    let (n, pairs, partner) = single_line_pairs(g)?;
    let same_side = |a: usize, b: usize| (a <= n) == (b <= n);
    let is_recollision = |&(l, r): &(usize, usize)| r == l + 1 && same_side(l, r);
    let is_rung = |&(l, r): &(usize, usize)| l <= n && r > n;

    let has_immediate_recollision = pairs.iter().any(is_recollision);

    let mut rungs: Vec<(usize, usize)> = pairs.iter().copied().filter(is_rung).collect();
    rungs.sort();
    let rungs_antimonotone = rungs.windows(2).all(|w| w[1].1 < w[0].1);
    let decorated_ladder =
        pairs.iter().all(|p| is_recollision(p) || is_rung(p)) && rungs_antimonotone;
    let basic_ladder = decorated_ladder && !has_immediate_recollision;

    let has_crossing = pairs
        .iter()
        .any(|&(l, lp)| pairs.iter().any(|&(j, jp)| l < j && j < lp && lp < jp));

    let has_nesting = pairs.iter().any(|&(l, r)| {
        let span = r - l;
        if span < 3 || span % 2 == 0 || !same_side(l, r) {
            return false;
        }
        (l + 1..r).step_by(2).all(|j| partner[j] == j + 1)
    });

    let label = if basic_ladder {
        ClassLabel::BasicLadder
    } else if decorated_ladder {
        ClassLabel::DecoratedLadder
    } else if has_crossing {
        ClassLabel::Crossing
    } else if has_nesting {
        ClassLabel::Nesting
    } else {
        ClassLabel::OtherNonladder
    };
    Ok(GraphClass {
        label,
        basic_ladder,
        decorated_ladder,
        has_immediate_recollision,
        has_crossing,
        has_nesting,
    })
}

/// Outcome of the exhaustive dichotomy check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DichotomyReport {
    pub max_nbar: usize,
    /// `(n, ñ, number of graphs, number of decorated ladders)` per split.
    pub splits: Vec<(usize, usize, usize, usize)>,
    pub graphs_checked: usize,
    pub counterexamples: Vec<FeynmanGraph>,
}

impl DichotomyReport {
    pub fn holds(&self) -> bool {
        self.counterexamples.is_empty()
    }
}

/// Checks "decorated ladder ∨ crossing ∨ nesting" for every single-line graph
/// with `1 ≤ n̄ ≤ max_nbar` and every split `n + ñ = 2n̄`.
pub fn verify_dichotomy(max_nbar: usize) -> Result<DichotomyReport> {
    if 2 * max_nbar > MAX_VERTICES.min(10) {
        return Err(Error::SizeGuard(format!(
            "max_nbar = {max_nbar}, at most 5 supported"
        )));
    }
    let mut splits = Vec::new();
    let mut counterexamples = Vec::new();
    let mut graphs_checked = 0;
    for nbar in 1..=max_nbar {
        for n in 0..=2 * nbar {
            let graphs = enumerate_pairings(&[(n, 2 * nbar - n)])?;
            let mut ladders = 0;
            for g in &graphs {
                let c = classify(g)?;
                if c.decorated_ladder {
                    ladders += 1;
                }
                if !(c.decorated_ladder || c.has_crossing || c.has_nesting) {
                    counterexamples.push(g.clone());
                }
            }
            graphs_checked += graphs.len();
            splits.push((n, 2 * nbar - n, graphs.len(), ladders));
        }
    }
    Ok(DichotomyReport {
        max_nbar,
        splits,
        graphs_checked,
        counterexamples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagrams::graph::VertexAddress;
    use proptest::prelude::*;

    fn single(n: usize, nt: usize, pairs: &[(usize, usize)]) -> GraphClass {
        classify(&FeynmanGraph::single_line(n, nt, pairs).unwrap()).unwrap()
    }

    #[test]
    fn single_rung_is_basic_ladder() {
        let c = single(1, 1, &[(1, 2)]);
        assert_eq!(c.label, ClassLabel::BasicLadder);
        assert!(c.decorated_ladder);
    }

    #[test]
    fn same_side_pair_is_a_recollision() {
        let c = single(2, 0, &[(1, 2)]);
        assert_eq!(c.label, ClassLabel::DecoratedLadder);
        assert!(c.has_immediate_recollision);
        assert!(!c.basic_ladder);
        // on the right side as well
        assert!(single(0, 2, &[(1, 2)]).has_immediate_recollision);
    }

    #[test]
    fn interleaved_pairs_cross() {
        let c = single(2, 2, &[(1, 3), (2, 4)]);
        assert_eq!(c.label, ClassLabel::Crossing);
        assert!(c.has_crossing);
    }

    #[test]
    fn ladders_of_two_rungs() {
        assert_eq!(
            single(2, 2, &[(1, 4), (2, 3)]).label,
            ClassLabel::BasicLadder
        );
        // two recollisions, one per side
        let c = single(2, 2, &[(1, 2), (3, 4)]);
        assert_eq!(c.label, ClassLabel::DecoratedLadder);
    }

    #[test]
    fn nesting_examples() {
        // 1 ∼ 4 around the recollision 2 ∼ 3, all on the left
        let c = single(4, 0, &[(1, 4), (2, 3)]);
        assert_eq!(c.label, ClassLabel::Nesting);
        assert!(c.has_nesting && !c.has_crossing);
        // a long contraction enclosing two recollisions
        let c = single(0, 6, &[(1, 6), (2, 3), (4, 5)]);
        assert!(c.has_nesting);
        // same shape across the ρ₀-vertex is a ladder, not a nesting
        let c = single(2, 2, &[(1, 4), (2, 3)]);
        assert!(!c.has_nesting);
    }

    #[test]
    fn brute_force_crossing_agrees() {
        // oracle: draw each contraction as an arc over a line and test arc
        // intersection through endpoint ordering with all four orders checked
        for g in enumerate_pairings(&[(3, 3)]).unwrap() {
            let pairs = g.canonical_pairs();
            let mut crossing = false;
            for a in &pairs {
                for b in &pairs {
                    let (x0, x1) = (a.0.position, a.1.position);
                    let (y0, y1) = (b.0.position, b.1.position);
                    let inside = |v: usize| x0 < v && v < x1;
                    if a != b && inside(y0) != inside(y1) {
                        crossing = true;
                    }
                }
            }
            assert_eq!(classify(&g).unwrap().has_crossing, crossing);
        }
    }

    #[test]
    fn dichotomy_small() {
        let report = verify_dichotomy(4).unwrap();
        assert!(report.holds());
        assert_eq!(report.graphs_checked, 3 * 1 + 5 * 3 + 7 * 15 + 9 * 105);
        assert!(verify_dichotomy(6).is_err());
    }

    #[test]
    fn basic_ladders_are_unique_per_split() {
        for nbar in 1..=4 {
            let graphs = enumerate_pairings(&[(nbar, nbar)]).unwrap();
            let basic: Vec<_> = graphs
                .iter()
                .filter(|g| classify(g).unwrap().basic_ladder)
                .collect();
            assert_eq!(basic.len(), 1);
            for (l, r) in basic[0].canonical_pairs() {
                assert_eq!(l.position + r.position, 2 * nbar + 1);
            }
        }
    }

    #[test]
    fn connectivity_of_multi_line_graphs() {
        let g = enumerate_pairings(&[(1, 0), (1, 0)]).unwrap();
        assert_eq!(connectivity(&g[0]), Connectivity::NonDisconnected);
        assert!(classify(&g[0]).is_err());
        let graphs = enumerate_pairings(&[(1, 1), (1, 1)]).unwrap();
        let disc = graphs
            .iter()
            .filter(|g| connectivity(g) == Connectivity::CompletelyDisconnected)
            .count();
        assert_eq!(disc, 1);
    }

    proptest! {
        #[test]
        fn classification_ignores_pair_order(idx in 0usize..105, rot in 0usize..4, flips in any::<u8>()) {
            let graphs = enumerate_pairings(&[(4, 4)]).unwrap();
            let g = &graphs[idx];
            let mut pairs: Vec<(VertexAddress, VertexAddress)> = g.pairing().to_vec();
            pairs.rotate_left(rot);
            for (i, p) in pairs.iter_mut().enumerate() {
                if flips >> i & 1 == 1 {
                    *p = (p.1, p.0);
                }
            }
            let h = FeynmanGraph::new(g.degrees().to_vec(), pairs).unwrap();
            prop_assert_eq!(classify(g).unwrap(), classify(&h).unwrap());
        }
    }
}
