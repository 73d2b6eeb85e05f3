//! Independent oracles shared by the integration tests. Nothing here calls
//! into the sampler; everything is recomputed from node-level definitions.

#![allow(dead_code)]

use dagmm::graph::Adjacency;
use dagmm::model::DIAG_SENTINEL;
use dagmm::ModelState;
use ndarray::Array2;

/// `(E, F)` block counts straight from node-indexed matrices: for every
/// pair with `r` before `s` in the order, the pair `(Z[r][s], Z[s][r])`
/// gains an edge or a non-edge.
pub fn brute_block_counts(state: &ModelState, y: &Adjacency) -> (Array2<f64>, Array2<f64>) {
    let k = state.k();
    let z = state.interactions();
    let pos = state.order.positions();
    let n = state.n();
    let mut e = Array2::zeros((k, k));
    let mut f = Array2::zeros((k, k));
    for r in 0..n {
        for s in 0..n {
            if r == s || pos[r] > pos[s] {
                continue;
            }
            let (i, j) = (z[[r, s]] as usize, z[[s, r]] as usize);
            if y[[r, s]] == 1 {
                e[[i, j]] += 1.0;
            } else {
                f[[i, j]] += 1.0;
            }
        }
    }
    (e, f)
}

/// How often each node adopts each group, by node.
pub fn brute_membership_counts(z: &Array2<u8>, k: usize) -> Array2<f64> {
    let n = z.nrows();
    let mut m = Array2::zeros((n, k));
    for r in 0..n {
        for s in 0..n {
            if z[[r, s]] != DIAG_SENTINEL {
                m[[r, z[[r, s]] as usize]] += 1.0;
            }
        }
    }
    m
}

/// Encodes the off-diagonal entries of a small `Z*` (row-major) in base `k`.
pub fn encode_z(z_star: &Array2<u8>, k: usize) -> usize {
    let n = z_star.nrows();
    let mut code = 0;
    for p in 0..n {
        for q in 0..n {
            if p != q {
                code = code * k + z_star[[p, q]] as usize;
            }
        }
    }
    code
}

fn decode_z(mut code: usize, n: usize, k: usize) -> Array2<u8> {
    let mut z = Array2::from_elem((n, n), DIAG_SENTINEL);
    let cells: Vec<(usize, usize)> = (0..n)
        .flat_map(|p| (0..n).filter(move |&q| q != p).map(move |q| (p, q)))
        .collect();
    for &(p, q) in cells.iter().rev() {
        z[[p, q]] = (code % k) as u8;
        code /= k;
    }
    z
}

/// Exact conditional of `Z*` given `C`, `D*` and an upper-triangular `Y*`,
/// indexed by [`encode_z`].
pub fn exact_z_conditional(c: &Array2<f64>, d_star: &Array2<f64>, y_star: &Adjacency) -> Vec<f64> {
    let (n, k) = d_star.dim();
    let states = k.pow((n * (n - 1)) as u32);
    let mut w: Vec<f64> = (0..states)
        .map(|code| {
            let z = decode_z(code, n, k);
            let mut prod = 1.0;
            for p in 0..n {
                for q in p + 1..n {
                    let (i, j) = (z[[p, q]] as usize, z[[q, p]] as usize);
                    let link = if y_star[[p, q]] == 1 { c[[i, j]] } else { 1.0 - c[[i, j]] };
                    prod *= d_star[[p, i]] * d_star[[q, j]] * link;
                }
            }
            prod
        })
        .collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    w
}

pub fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

/// Every permutation of `0..k`.
pub fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for rest in permutations(k - 1) {
        for slot in 0..=rest.len() {
            let mut p = rest.clone();
            p.insert(slot, k - 1);
            out.push(p);
        }
    }
    out
}

/// Smallest worst-case elementwise gap between `est` and `truth` over
/// relabelings `g -> perm[g]` of the estimate.
pub fn best_permuted_gap(est: &Array2<f64>, truth: &Array2<f64>) -> (f64, Vec<usize>) {
    let k = truth.nrows();
    permutations(k)
        .into_iter()
        .map(|perm| {
            let mut gap: f64 = 0.0;
            for i in 0..k {
                for j in 0..k {
                    gap = gap.max((est[[i, j]] - truth[[perm[i], perm[j]]]).abs());
                }
            }
            (gap, perm)
        })
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .expect("at least one permutation")
}

/// Kolmogorov-Smirnov distance between a sample and a CDF tabulated on an
/// increasing grid (linear interpolation between grid points).
pub fn ks_distance(sample: &mut [f64], grid: &[f64], cdf: &[f64]) -> f64 {
    sample.sort_by(f64::total_cmp);
    let n = sample.len() as f64;
    let interp = |x: f64| -> f64 {
        match grid.partition_point(|&g| g < x) {
            0 => 0.0,
            i if i >= grid.len() => 1.0,
            i => {
                let t = (x - grid[i - 1]) / (grid[i] - grid[i - 1]);
                cdf[i - 1] + t * (cdf[i] - cdf[i - 1])
            }
        }
    };
    sample
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = interp(x);
            (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
        })
        .fold(0.0, f64::max)
}
