//! Parameters of the mixed-membership block model on a DAG and the log of
//! its joint density.
//!
//! The state is kept in *reordered* form: `z_star[[p, q]]` is the group of
//! the node at position `p` when interacting with the node at position `q`,
//! and row `p` of `d_star` is the membership vector of that node. Groups are
//! 0-based in memory. Use [`ModelState::membership`] and
//! [`ModelState::interactions`] for the node-indexed views.

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::graph::{reorder, reorder_rows, Adjacency, Ordering};

/// Diagonal entries of `Z`, which never take part in an interaction.
pub const DIAG_SENTINEL: u8 = u8::MAX;

/// Groups are stored as `u8` with one value reserved for the sentinel.
pub const MAX_GROUPS: usize = DIAG_SENTINEL as usize;

const ROW_SUM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub k: usize,
    /// First Beta shapes for `C`.
    pub beta_a: Array2<f64>,
    /// Second Beta shapes for `C`.
    pub beta_b: Array2<f64>,
    /// Gamma prior on the Dirichlet concentration (shape, rate).
    pub gamma_shape: f64,
    pub gamma_rate: f64,
}

impl Hyperparams {
    /// Beta(1, 1) on every block probability and Gamma(3, 3) on the concentration.
    pub fn new(k: usize) -> Self {
        Hyperparams {
            k,
            beta_a: Array2::ones((k, k)),
            beta_b: Array2::ones((k, k)),
            gamma_shape: 3.0,
            gamma_rate: 3.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.k > MAX_GROUPS {
            return Err(Error::config(format!("K must be in 1..={MAX_GROUPS}")));
        }
        for m in [&self.beta_a, &self.beta_b] {
            if m.dim() != (self.k, self.k) {
                return Err(Error::dims(format!("{0}x{0}", self.k), format!("{:?}", m.dim())));
            }
            if !m.iter().all(|&v| v > 0.0 && v.is_finite()) {
                return Err(Error::config("Beta shapes must be positive"));
            }
        }
        if !(self.gamma_shape > 0.0 && self.gamma_rate > 0.0) {
            return Err(Error::config("Gamma shape and rate must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelState {
    pub order: Ordering,
    /// Dirichlet concentration.
    pub alpha: f64,
    /// `K x K` block probabilities; `c[[i, j]]` is the chance that a node
    /// acting in group `i` cites one acting in group `j`.
    pub c: Array2<f64>,
    /// `n x K` memberships, rows by position.
    pub d_star: Array2<f64>,
    /// `n x n` interaction groups, by position.
    pub z_star: Array2<u8>,
}

impl ModelState {
    /// Builds a state from node-indexed `Z` and `D`. Rows of `D` are
    /// renormalized to sum to one.
    pub fn from_node_order(
        z: &Array2<u8>,
        d: &Array2<f64>,
        c: Array2<f64>,
        alpha: f64,
        order: Ordering,
    ) -> Result<Self> {
        let mut d_star = reorder_rows(d, &order)?;
        normalize_rows(&mut d_star);
        let state = ModelState {
            z_star: reorder(z, &order)?,
            d_star,
            c,
            alpha,
            order,
        };
        state.validate()?;
        Ok(state)
    }

    pub fn n(&self) -> usize {
        self.order.len()
    }

    pub fn k(&self) -> usize {
        self.c.nrows()
    }

    /// Node-indexed membership matrix `D`.
    pub fn membership(&self) -> Array2<f64> {
        reorder_rows(&self.d_star, &self.order.inverse()).expect("consistent dims")
    }

    /// Node-indexed interaction groups `Z`.
    pub fn interactions(&self) -> Array2<u8> {
        reorder(&self.z_star, &self.order.inverse()).expect("consistent dims")
    }

    pub fn validate(&self) -> Result<()> {
        let (n, k) = (self.n(), self.k());
        if self.c.dim() != (k, k) {
            return Err(Error::dims(format!("{k}x{k}"), format!("{:?}", self.c.dim())));
        }
        if self.d_star.dim() != (n, k) {
            return Err(Error::dims(format!("{n}x{k}"), format!("{:?}", self.d_star.dim())));
        }
        if self.z_star.dim() != (n, n) {
            return Err(Error::dims(format!("{n}x{n}"), format!("{:?}", self.z_star.dim())));
        }
        if !self.c.iter().all(|&v| (0.0..=1.0).contains(&v)) {
            return Err(Error::config("block probabilities must lie in [0, 1]"));
        }
        for row in self.d_star.rows() {
            let sum: f64 = row.sum();
            if row.iter().any(|&v| v < 0.0) || (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::config("membership rows must be on the simplex"));
            }
        }
        for ((p, q), &z) in self.z_star.indexed_iter() {
            let ok = if p == q {
                z == DIAG_SENTINEL
            } else {
                (z as usize) < k
            };
            if !ok {
                return Err(Error::config(format!("invalid interaction group at ({p}, {q})")));
            }
        }
        Ok(())
    }
}

pub(crate) fn normalize_rows(m: &mut Array2<f64>) {
    for mut row in m.rows_mut() {
        let sum: f64 = row.sum();
        if sum > 0.0 {
            row.mapv_inplace(|v| v / sum);
        }
    }
}

/// Edge (`e`) and non-edge (`f`) counts of upper-triangle dyads, keyed by
/// the ordered pair (group of the earlier node, group of the later node).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockCounts {
    pub e: Array2<u64>,
    pub f: Array2<u64>,
}

impl BlockCounts {
    pub fn total(&self) -> u64 {
        self.e.sum() + self.f.sum()
    }
}

pub fn block_counts(z_star: &Array2<u8>, y_star: &Adjacency, k: usize) -> Result<BlockCounts> {
    let n = z_star.nrows();
    if z_star.dim() != (n, n) || y_star.dim() != (n, n) {
        return Err(Error::dims(
            format!("{n}x{n}"),
            format!("{:?} / {:?}", z_star.dim(), y_star.dim()),
        ));
    }
    let mut e = Array2::zeros((k, k));
    let mut f = Array2::zeros((k, k));
    for p in 0..n {
        for q in p + 1..n {
            let cell = [z_star[[p, q]] as usize, z_star[[q, p]] as usize];
            if y_star[[p, q]] == 1 {
                e[cell] += 1;
            } else {
                f[cell] += 1;
            }
        }
    }
    Ok(BlockCounts { e, f })
}

/// `out[[p, i]]` = number of `q != p` with `z_star[[p, q]] == i`.
pub fn membership_counts(z_star: &Array2<u8>, k: usize) -> Array2<u64> {
    let n = z_star.nrows();
    let mut out = Array2::zeros((n, k));
    for (p, row) in z_star.axis_iter(Axis(0)).enumerate() {
        for (q, &z) in row.iter().enumerate() {
            if p != q {
                out[[p, z as usize]] += 1;
            }
        }
    }
    out
}

/// `a * ln(x)` with the convention `0 * ln(0) = 0`.
fn xlogy(a: f64, x: f64) -> f64 {
    if a == 0.0 {
        0.0
    } else {
        a * x.ln()
    }
}

/// Log of the joint density of `(Y, Z, D, C, alpha)` given the order, i.e.
/// the log posterior up to an additive constant. The Beta, Dirichlet and
/// Gamma terms carry their normalizers; the uniform prior on the order is
/// dropped.
///
/// Returns `-inf` when the order is not topological for `y` or `alpha <= 0`.
pub fn log_joint(state: &ModelState, y: &Adjacency, h: &Hyperparams) -> Result<f64> {
    let (n, k) = (state.n(), state.k());
    if h.k != k {
        return Err(Error::dims(format!("K={}", h.k), format!("K={k}")));
    }
    let y_star = reorder(y, &state.order)?;
    if y_star.indexed_iter().any(|((p, q), &v)| p > q && v == 1) {
        return Ok(f64::NEG_INFINITY);
    }
    let alpha = state.alpha;
    if alpha.is_nan() || alpha <= 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    let (z, d, c) = (&state.z_star, &state.d_star, &state.c);

    let mut total = 0.0;
    for p in 0..n {
        for q in p + 1..n {
            let (zi, zj) = (z[[p, q]] as usize, z[[q, p]] as usize);
            let prob = c[[zi, zj]];
            total += if y_star[[p, q]] == 1 {
                prob.ln()
            } else {
                (1.0 - prob).ln()
            };
            total += d[[p, zi]].ln() + d[[q, zj]].ln();
        }
    }

    let kf = k as f64;
    let dirichlet_norm = ln_gamma(kf * alpha) - kf * ln_gamma(alpha);
    for row in d.rows() {
        total += dirichlet_norm + row.iter().map(|&v| xlogy(alpha - 1.0, v)).sum::<f64>();
    }

    for ((i, j), &cij) in c.indexed_iter() {
        let (a, b) = (h.beta_a[[i, j]], h.beta_b[[i, j]]);
        total += ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b);
        total += xlogy(a - 1.0, cij) + xlogy(b - 1.0, 1.0 - cij);
    }

    let (shape, rate) = (h.gamma_shape, h.gamma_rate);
    total += shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * alpha.ln() - rate * alpha;
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;

    fn sentinel_z(n: usize, fill: u8) -> Array2<u8> {
        Array2::from_shape_fn((n, n), |(p, q)| if p == q { DIAG_SENTINEL } else { fill })
    }

    #[test]
    fn log_joint_two_nodes_one_group() {
        let c = 0.3;
        let state = ModelState::from_node_order(
            &sentinel_z(2, 0),
            &arr2(&[[1.0], [1.0]]),
            arr2(&[[c]]),
            1.0,
            Ordering::identity(2),
        )
        .unwrap();
        let y = arr2(&[[0u8, 1], [0, 0]]);
        let lj = log_joint(&state, &y, &Hyperparams::new(1)).unwrap();
        let expected = c.ln() + (3.0 * 3f64.ln() - 2f64.ln() - 3.0);
        assert!((lj - expected).abs() < 1e-12, "{lj} vs {expected}");
    }

    #[test]
    fn log_joint_indicators() {
        let mut state = ModelState::from_node_order(
            &sentinel_z(2, 0),
            &arr2(&[[1.0], [1.0]]),
            arr2(&[[0.5]]),
            1.0,
            Ordering::new(vec![1, 0]).unwrap(),
        )
        .unwrap();
        let y = arr2(&[[0u8, 1], [0, 0]]);
        let h = Hyperparams::new(1);
        assert_eq!(log_joint(&state, &y, &h).unwrap(), f64::NEG_INFINITY);
        state.order = Ordering::identity(2);
        state.alpha = -0.5;
        assert_eq!(log_joint(&state, &y, &h).unwrap(), f64::NEG_INFINITY);
        state.alpha = 1.0;
        assert!(log_joint(&state, &y, &h).unwrap().is_finite());
    }

    #[test]
    fn block_counts_single_dyad() {
        let z = arr2(&[[DIAG_SENTINEL, 0], [1, DIAG_SENTINEL]]);
        let counts = block_counts(&z, &arr2(&[[0, 1], [0, 0]]), 2).unwrap();
        assert_eq!(counts.e, arr2(&[[0, 1], [0, 0]]));
        assert_eq!(counts.f.sum(), 0);
        let counts = block_counts(&z, &arr2(&[[0, 0], [0, 0]]), 2).unwrap();
        assert_eq!(counts.f, arr2(&[[0, 1], [0, 0]]));
        assert_eq!(counts.e.sum(), 0);
    }

    #[test]
    fn membership_counts_examples() {
        let counts = membership_counts(&sentinel_z(3, 1), 2);
        assert_eq!(counts, arr2(&[[0, 2], [0, 2], [0, 2]]));
        let counts = membership_counts(&sentinel_z(2, 0), 2);
        assert!(counts.rows().into_iter().all(|r| r.sum() == 1));
    }

    #[test]
    fn construction_renormalizes_and_validates() {
        let d = arr2(&[[0.5, 0.5 + 1e-12], [0.2, 0.8]]);
        let s = ModelState::from_node_order(
            &sentinel_z(2, 0),
            &d,
            Array2::from_elem((2, 2), 0.5),
            1.0,
            Ordering::identity(2),
        )
        .unwrap();
        assert!((s.d_star.row(0).sum() - 1.0).abs() < 1e-15);

        let mut bad = sentinel_z(2, 0);
        bad[[0, 0]] = 0;
        assert!(ModelState::from_node_order(
            &bad,
            &d,
            Array2::from_elem((2, 2), 0.5),
            1.0,
            Ordering::identity(2)
        )
        .is_err());
    }

    #[test]
    fn node_views_invert_reordering() {
        let z = arr2(&[[DIAG_SENTINEL, 0, 1], [1, DIAG_SENTINEL, 0], [0, 0, DIAG_SENTINEL]]);
        let d = arr2(&[[0.1, 0.9], [0.6, 0.4], [0.3, 0.7]]);
        let o = Ordering::new(vec![2, 0, 1]).unwrap();
        let s = ModelState::from_node_order(&z, &d, Array2::from_elem((2, 2), 0.5), 1.0, o)
            .unwrap();
        assert_eq!(s.interactions(), z);
        assert_eq!(s.membership(), d);
        assert_eq!(s.d_star.row(0), d.row(2));
    }

    #[test]
    fn hyperparams_validation() {
        assert!(Hyperparams::new(3).validate().is_ok());
        let mut h = Hyperparams::new(2);
        h.beta_a[[0, 1]] = 0.0;
        assert!(h.validate().is_err());
        assert!(Hyperparams::new(0).validate().is_err());
    }
}
