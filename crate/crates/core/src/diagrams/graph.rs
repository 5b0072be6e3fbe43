use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest total vertex count accepted by [`enumerate_pairings`].
pub const MAX_VERTICES: usize = 12;

/// Interaction vertex `position` (1-based, left to right across the
/// ρ₀-vertex) on particle line `line` (0-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VertexAddress {
    pub line: usize,
    pub position: usize,
}

impl VertexAddress {
    pub fn new(line: usize, position: usize) -> Self {
        Self { line, position }
    }
}

/// Degrees `(n_j, ñ_j)` of every particle line and a perfect matching of all
/// interaction vertices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeynmanGraph {
    degrees: Vec<(usize, usize)>,
    pairing: Vec<(VertexAddress, VertexAddress)>,
}

impl FeynmanGraph {
    pub fn new(
        degrees: Vec<(usize, usize)>,
        pairing: Vec<(VertexAddress, VertexAddress)>,
    ) -> Result<Self> {
        if degrees.is_empty() {
            return Err(Error::InconsistentGraph("no particle lines".into()));
        }
        let total: usize = degrees.iter().map(|(a, b)| a + b).sum();
        if total % 2 != 0 {
            return Err(Error::OddVertexCount(total));
        }
        let mut seen = vec![Vec::new(); degrees.len()];
        for (line, (n, nt)) in degrees.iter().enumerate() {
            seen[line] = vec![false; n + nt];
        }
        for &(a, b) in &pairing {
            if a == b {
                return Err(Error::InconsistentGraph(format!(
                    "vertex {a:?} paired with itself"
                )));
            }
            for v in [a, b] {
                let slot = seen
                    .get_mut(v.line)
                    .and_then(|s| v.position.checked_sub(1).and_then(|p| s.get_mut(p)))
                    .ok_or_else(|| Error::InconsistentGraph(format!("no vertex {v:?}")))?;
                if *slot {
                    return Err(Error::InconsistentGraph(format!(
                        "vertex {v:?} paired twice"
                    )));
                }
                *slot = true;
            }
        }
        if seen.iter().flatten().any(|s| !s) {
            return Err(Error::InconsistentGraph("pairing is not perfect".into()));
        }
        Ok(Self { degrees, pairing })
    }

    /// Single-line graph from 1-based position pairs.
    pub fn single_line(n: usize, n_tilde: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        let pairing = pairs
            .iter()
            .map(|&(a, b)| (VertexAddress::new(0, a), VertexAddress::new(0, b)))
            .collect();
        Self::new(vec![(n, n_tilde)], pairing)
    }

    pub fn degrees(&self) -> &[(usize, usize)] {
        &self.degrees
    }

    pub fn pairing(&self) -> &[(VertexAddress, VertexAddress)] {
        &self.pairing
    }

    pub fn lines(&self) -> usize {
        self.degrees.len()
    }

    pub fn vertex_count(&self) -> usize {
        self.degrees.iter().map(|(a, b)| a + b).sum()
    }

    /// `n̄ = (n + ñ)/2` summed over lines.
    pub fn nbar(&self) -> usize {
        self.vertex_count() / 2
    }

    /// Pairs with endpoints ordered and the list sorted.
    pub fn canonical_pairs(&self) -> Vec<(VertexAddress, VertexAddress)> {
        let mut pairs: Vec<_> = self
            .pairing
            .iter()
            .map(|&(a, b)| if a <= b { (a, b) } else { (b, a) })
            .collect();
        pairs.sort();
        pairs
    }
}

/// Every perfect matching of the interaction vertices, in lexicographic
/// order of the matching.
pub fn enumerate_pairings(degrees: &[(usize, usize)]) -> Result<Vec<FeynmanGraph>> {
    if degrees.is_empty() {
        return Err(Error::InconsistentGraph("no particle lines".into()));
    }
    let vertices: Vec<VertexAddress> = degrees
        .iter()
        .enumerate()
        .flat_map(|(line, (n, nt))| (1..=n + nt).map(move |p| VertexAddress::new(line, p)))
        .collect();
    if vertices.len() % 2 != 0 {
        return Err(Error::OddVertexCount(vertices.len()));
    }
    if vertices.len() > MAX_VERTICES {
        return Err(Error::SizeGuard(format!(
            "{} vertices, at most {MAX_VERTICES} supported",
            vertices.len()
        )));
    }
    let mut out = Vec::new();
    let mut used = vec![false; vertices.len()];
    let mut current = Vec::with_capacity(vertices.len() / 2);
    matchings(&vertices, &mut used, &mut current, &mut |pairs| {
        out.push(FeynmanGraph {
            degrees: degrees.to_vec(),
            pairing: pairs.to_vec(),
        })
    });
    Ok(out)
}

fn matchings(
    vertices: &[VertexAddress],
    used: &mut [bool],
    current: &mut Vec<(VertexAddress, VertexAddress)>,
    emit: &mut dyn FnMut(&[(VertexAddress, VertexAddress)]),
) {
    let Some(first) = used.iter().position(|u| !u) else {
        emit(current);
        return;
    };
    used[first] = true;
    for other in first + 1..vertices.len() {
        if used[other] {
            continue;
        }
        used[other] = true;
        current.push((vertices[first], vertices[other]));
        matchings(vertices, used, current, emit);
        current.pop();
        used[other] = false;
    }
    used[first] = false;
}

/// `(2k − 1)!!`.
pub fn double_factorial_odd(k: usize) -> u64 {
    (1..=k as u64).map(|i| 2 * i - 1).product()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_match_double_factorial() {
        for nbar in 0..=5 {
            for n in 0..=2 * nbar {
                let graphs = enumerate_pairings(&[(n, 2 * nbar - n)]).unwrap();
                assert_eq!(graphs.len() as u64, double_factorial_odd(nbar));
            }
        }
        assert_eq!(double_factorial_odd(5), 945);
    }

    #[test]
    fn guards() {
        assert_eq!(enumerate_pairings(&[(1, 2)]), Err(Error::OddVertexCount(3)));
        assert!(matches!(
            enumerate_pairings(&[(7, 7)]),
            Err(Error::SizeGuard(_))
        ));
        assert!(enumerate_pairings(&[]).is_err());
    }

    #[test]
    fn empty_pairing_is_one_graph() {
        let g = enumerate_pairings(&[(0, 0)]).unwrap();
        assert_eq!(g.len(), 1);
        assert!(g[0].pairing().is_empty());
    }

    #[test]
    fn two_lines_one_vertex_each() {
        let g = enumerate_pairings(&[(1, 0), (1, 0)]).unwrap();
        assert_eq!(g.len(), 1);
        assert_eq!(
            g[0].pairing(),
            &[(VertexAddress::new(0, 1), VertexAddress::new(1, 1))]
        );
    }

    #[test]
    fn matchings_are_distinct_and_perfect() {
        let graphs = enumerate_pairings(&[(2, 2), (1, 1)]).unwrap();
        assert_eq!(graphs.len(), 15);
        let set: std::collections::HashSet<_> =
            graphs.iter().map(|g| g.canonical_pairs()).collect();
        assert_eq!(set.len(), 15);
        for g in &graphs {
            FeynmanGraph::new(g.degrees().to_vec(), g.pairing().to_vec()).unwrap();
        }
    }

    #[test]
    fn validation() {
        assert!(FeynmanGraph::single_line(1, 1, &[(1, 2)]).is_ok());
        assert!(FeynmanGraph::single_line(1, 1, &[(1, 1)]).is_err());
        assert!(FeynmanGraph::single_line(2, 0, &[]).is_err());
        assert!(FeynmanGraph::single_line(2, 0, &[(1, 3)]).is_err());
        assert!(FeynmanGraph::single_line(2, 2, &[(1, 2), (2, 3)]).is_err());
    }

    #[test]
    fn json_round_trip() {
        let g = FeynmanGraph::single_line(2, 2, &[(1, 3), (2, 4)]).unwrap();
        let s = serde_json::to_string(&g).unwrap();
        let back: FeynmanGraph = serde_json::from_str(&s).unwrap();
        assert_eq!(g, back);
    }
}
