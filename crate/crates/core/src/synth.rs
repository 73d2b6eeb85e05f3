//! Forward simulation from the model with known ground truth.
//!
//! Nodes are generated already in topological order (the true order is the
//! identity): for every `p < q` the interaction groups are drawn from the
//! membership rows of `p` and `q`, and `p` cites `q` with the block
//! probability of that group pair.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dist;
use crate::error::{Error, Result};
use crate::graph::{Adjacency, CitationGraph, Edge, EdgeList, NodeId, NodeMeta, Ordering};
use crate::model::{DIAG_SENTINEL, MAX_GROUPS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum MembershipSpec {
    /// Rows drawn from a symmetric Dirichlet.
    Dirichlet { alpha: f64 },
    Explicit(Array2<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum YearMode {
    None,
    /// `year = base_year + (n - position)` with 1-based positions, so the
    /// front of the order is the most recent.
    PositionLinked { base_year: i32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n: usize,
    pub k: usize,
    pub c_true: Array2<f64>,
    pub membership: MembershipSpec,
    pub seed: u64,
    pub year_mode: YearMode,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::config("n must be positive"));
        }
        if self.k == 0 || self.k > MAX_GROUPS {
            return Err(Error::config(format!("K must be in 1..={MAX_GROUPS}")));
        }
        if self.c_true.dim() != (self.k, self.k) {
            return Err(Error::dims(
                format!("{0}x{0}", self.k),
                format!("{:?}", self.c_true.dim()),
            ));
        }
        if !self.c_true.iter().all(|v| (0.0..=1.0).contains(v)) {
            return Err(Error::config("C entries must lie in [0, 1]"));
        }
        match &self.membership {
            MembershipSpec::Dirichlet { alpha } if alpha.is_nan() || *alpha <= 0.0 => {
                return Err(Error::config("alpha must be positive"))
            }
            MembershipSpec::Explicit(d) => {
                if d.dim() != (self.n, self.k) {
                    return Err(Error::dims(
                        format!("{}x{}", self.n, self.k),
                        format!("{:?}", d.dim()),
                    ));
                }
                for row in d.rows() {
                    if row.iter().any(|&v| v < 0.0) || (row.sum() - 1.0).abs() > 1e-9 {
                        return Err(Error::config("membership rows must be on the simplex"));
                    }
                }
            }
            _ => {}
        }
        Ok(())
    }
}

/// Memberships with weight `purity` on group `p mod K` and the rest spread
/// evenly, so every group is spread along the whole order.
pub fn near_hard_membership(n: usize, k: usize, purity: f64) -> Array2<f64> {
    if k == 1 {
        return Array2::ones((n, 1));
    }
    let rest = (1.0 - purity) / (k - 1) as f64;
    Array2::from_shape_fn((n, k), |(p, i)| if p % k == i { purity } else { rest })
}

/// `diag` on the diagonal, `off` elsewhere.
pub fn diagonal_block_matrix(k: usize, diag: f64, off: f64) -> Array2<f64> {
    Array2::from_shape_fn((k, k), |(i, j)| if i == j { diag } else { off })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthTruth {
    pub nodes: Vec<NodeMeta>,
    pub y: Adjacency,
    pub order: Ordering,
    /// Node-indexed interaction groups (0-based, sentinel on the diagonal).
    pub z: Array2<u8>,
    pub d: Array2<f64>,
    pub c: Array2<f64>,
    /// `None` when memberships were given explicitly.
    pub alpha: Option<f64>,
}

impl SynthTruth {
    pub fn graph(&self) -> CitationGraph {
        let n = self.nodes.len();
        let mut edges = Vec::new();
        for r in 0..n {
            for s in 0..n {
                if self.y[[r, s]] == 1 {
                    edges.push(Edge {
                        from: self.nodes[r].id.clone(),
                        to: self.nodes[s].id.clone(),
                    });
                }
            }
        }
        let edges = EdgeList::new(edges).expect("no self-loops");
        CitationGraph::new(self.nodes.clone(), &edges).expect("ids are unique")
    }

    /// Dominant true group of every node.
    pub fn dominant_groups(&self) -> Vec<usize> {
        self.d
            .rows()
            .into_iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
                    .0
            })
            .collect()
    }
}

/// Ids `n1..nN`, zero-padded so lexicographic order matches numeric order.
pub fn node_ids(n: usize) -> Vec<NodeId> {
    let width = n.to_string().len();
    (1..=n)
        .map(|i| NodeId::new(format!("n{i:0width$}")).expect("non-empty"))
        .collect()
}

pub fn generate(spec: &SynthSpec) -> Result<SynthTruth> {
    spec.validate()?;
    let (n, k) = (spec.n, spec.k);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let (d, alpha) = match &spec.membership {
        MembershipSpec::Explicit(d) => (d.clone(), None),
        MembershipSpec::Dirichlet { alpha } => {
            let shapes = vec![*alpha; k];
            let mut d = Array2::zeros((n, k));
            for mut row in d.rows_mut() {
                let draw = dist::dirichlet(&shapes, &mut rng);
                row.assign(&ndarray::ArrayView1::from(&draw[..]));
            }
            (d, Some(*alpha))
        }
    };

    let mut z = Array2::from_elem((n, n), DIAG_SENTINEL);
    let mut y = Adjacency::zeros((n, n));
    let rows: Vec<Vec<f64>> = d.rows().into_iter().map(|r| r.to_vec()).collect();
    for p in 0..n {
        for q in p + 1..n {
            let zi = dist::categorical(&rows[p], &mut rng).expect("simplex row");
            let zj = dist::categorical(&rows[q], &mut rng).expect("simplex row");
            z[[p, q]] = zi as u8;
            z[[q, p]] = zj as u8;
            if rng.random::<f64>() < spec.c_true[[zi, zj]] {
                y[[p, q]] = 1;
            }
        }
    }

    let nodes = node_ids(n)
        .into_iter()
        .enumerate()
        .map(|(p, id)| NodeMeta {
            id,
            label: None,
            year: match spec.year_mode {
                YearMode::None => None,
                YearMode::PositionLinked { base_year } => Some(base_year + (n - (p + 1)) as i32),
            },
            month: None,
        })
        .collect();

    Ok(SynthTruth {
        nodes,
        y,
        order: Ordering::identity(n),
        z,
        d,
        c: spec.c_true.clone(),
        alpha,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{assert_dag, is_upper_triangular};

    fn spec(n: usize, c: Array2<f64>, membership: MembershipSpec) -> SynthSpec {
        SynthSpec {
            n,
            k: c.nrows(),
            c_true: c,
            membership,
            seed: 17,
            year_mode: YearMode::None,
        }
    }

    #[test]
    fn extreme_block_matrices() {
        let empty = generate(&spec(12, Array2::zeros((2, 2)), MembershipSpec::Dirichlet { alpha: 1.0 })).unwrap();
        assert_eq!(empty.y.sum(), 0);
        let full = generate(&spec(12, Array2::ones((2, 2)), MembershipSpec::Dirichlet { alpha: 1.0 })).unwrap();
        assert_eq!(full.y.iter().map(|&v| v as usize).sum::<usize>(), 12 * 11 / 2);
        assert!(is_upper_triangular(&full.y));
        assert!(assert_dag(&full.graph()).is_ok());
    }

    #[test]
    fn deterministic_per_seed() {
        let s = spec(30, diagonal_block_matrix(3, 0.6, 0.1), MembershipSpec::Dirichlet { alpha: 0.5 });
        assert_eq!(generate(&s).unwrap(), generate(&s).unwrap());
    }

    #[test]
    fn hard_memberships_give_complete_blocks() {
        let s = spec(10, diagonal_block_matrix(2, 1.0, 0.0), MembershipSpec::Explicit(near_hard_membership(10, 2, 1.0)));
        let t = generate(&s).unwrap();
        for p in 0..10 {
            for q in p + 1..10 {
                assert_eq!(t.y[[p, q]], u8::from(p % 2 == q % 2));
            }
        }
        assert_eq!(t.dominant_groups(), (0..10).map(|p| p % 2).collect::<Vec<_>>());
    }

    #[test]
    fn within_block_rate() {
        let n = 200;
        let s = spec(n, ndarray::arr2(&[[0.8, 0.05], [0.05, 0.8]]), MembershipSpec::Explicit(near_hard_membership(n, 2, 0.98)));
        let t = generate(&s).unwrap();
        let (mut edges, mut dyads) = (0.0, 0.0);
        for p in 0..n {
            for q in p + 1..n {
                let (zi, zj) = (t.z[[p, q]], t.z[[q, p]]);
                if zi == zj {
                    dyads += 1.0;
                    edges += t.y[[p, q]] as f64;
                }
            }
        }
        assert!((edges / dyads - 0.8).abs() < 0.03, "{}", edges / dyads);
    }

    #[test]
    fn position_linked_years() {
        let mut s = spec(5, Array2::zeros((2, 2)), MembershipSpec::Dirichlet { alpha: 1.0 });
        s.year_mode = YearMode::PositionLinked { base_year: 1950 };
        let t = generate(&s).unwrap();
        let years: Vec<_> = t.nodes.iter().map(|n| n.year.unwrap()).collect();
        assert_eq!(years, vec![1954, 1953, 1952, 1951, 1950]);
        assert_eq!(t.nodes[0].id.as_str(), "n1");
    }

    #[test]
    fn invalid_specs() {
        assert!(generate(&spec(0, Array2::zeros((2, 2)), MembershipSpec::Dirichlet { alpha: 1.0 })).is_err());
        assert!(generate(&spec(3, Array2::from_elem((2, 2), 1.5), MembershipSpec::Dirichlet { alpha: 1.0 })).is_err());
        assert!(generate(&spec(3, Array2::zeros((2, 2)), MembershipSpec::Dirichlet { alpha: 0.0 })).is_err());
    }
}
