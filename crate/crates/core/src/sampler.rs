//! Gibbs sampler with Metropolis steps for the concentration and the
//! topological order.
//!
//! One sweep updates, in this order: every interaction pair `(p, q)` with
//! `p < q` in lexicographic order (upper entry first, then the lower entry
//! using the fresh upper value), every membership row, every block
//! probability, the concentration, and finally `o_swaps_per_sweep`
//! adjacent-swap proposals on the order.
//!
//! Randomness comes from a single [`ChainRng`] stream seeded from the
//! config. Per kernel the stream is consumed as follows:
//!
//! * Z pair: one uniform for the upper entry, one for the lower entry.
//! * D: one Dirichlet draw per row, rows in position order.
//! * C: one Beta draw per entry, row-major.
//! * alpha: one standard normal, then one uniform.
//! * order: one integer for `p`, one boolean for the direction when `p` is
//!   interior, and one uniform when the swap is not blocked by an edge.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::dist;
use crate::error::{Error, Result};
use crate::graph::{find_cycle, reorder, topological_order_by, Adjacency, Ordering};
use crate::model::{
    block_counts, log_joint, membership_counts, BlockCounts, Hyperparams, ModelState,
    DIAG_SENTINEL,
};

/// Portable generator used for every chain.
pub type ChainRng = ChaCha8Rng;

/// Switches for each kernel; disabled kernels leave their block untouched.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KernelFlags {
    pub z: bool,
    pub d: bool,
    pub c: bool,
    pub alpha: bool,
    pub order: bool,
}

impl Default for KernelFlags {
    fn default() -> Self {
        KernelFlags {
            z: true,
            d: true,
            c: true,
            alpha: true,
            order: true,
        }
    }
}

impl KernelFlags {
    pub fn only_z() -> Self {
        KernelFlags {
            z: true,
            d: false,
            c: false,
            alpha: false,
            order: false,
        }
    }

    pub fn none() -> Self {
        KernelFlags {
            z: false,
            d: false,
            c: false,
            alpha: false,
            order: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub iterations_retained: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    /// Standard deviation of the random-walk proposal for alpha.
    pub s_alpha: f64,
    /// Adjacent-swap proposals per sweep; `None` means one per node.
    pub o_swaps_per_sweep: Option<usize>,
    #[serde(default)]
    pub kernels: KernelFlags,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig {
            iterations_retained: 2000,
            burn_in: 20_000,
            thin: 10,
            seed: 0,
            s_alpha: 0.1,
            o_swaps_per_sweep: None,
            kernels: KernelFlags::default(),
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations_retained == 0 {
            return Err(Error::config("iterations_retained must be positive"));
        }
        if self.thin == 0 {
            return Err(Error::config("thin must be positive"));
        }
        if !(self.s_alpha > 0.0 && self.s_alpha.is_finite()) {
            return Err(Error::config("s_alpha must be positive"));
        }
        if self.o_swaps_per_sweep == Some(0) {
            return Err(Error::config("o_swaps_per_sweep must be positive"));
        }
        Ok(())
    }

    pub fn swaps_for(&self, n: usize) -> usize {
        self.o_swaps_per_sweep.unwrap_or(n)
    }
}

/// Running proposal/acceptance tallies.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Tallies {
    pub alpha_proposed: u64,
    pub alpha_accepted: u64,
    /// Every adjacent-swap proposal, including those blocked by an edge.
    pub o_proposed: u64,
    /// Proposals not blocked by an edge.
    pub o_attempted: u64,
    pub o_accepted: u64,
}

impl Tallies {
    pub fn alpha_rate(&self) -> f64 {
        ratio(self.alpha_accepted, self.alpha_proposed)
    }

    /// Accepted swaps over swaps that were not blocked by an edge.
    pub fn o_swap_rate(&self) -> f64 {
        ratio(self.o_accepted, self.o_attempted)
    }
}

fn ratio(a: u64, b: u64) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Acceptance {
    pub alpha_rate: f64,
    pub o_swap_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    pub samples: Vec<ModelState>,
    pub log_joint_trace: Vec<f64>,
    /// Absolute sweep number (1-based) of each retained sample.
    pub iterations: Vec<usize>,
    pub config: ChainConfig,
    pub tallies: Tallies,
}

impl Chain {
    pub fn acceptance(&self) -> Acceptance {
        Acceptance {
            alpha_rate: self.tallies.alpha_rate(),
            o_swap_rate: self.tallies.o_swap_rate(),
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

fn initial_order(y: &Adjacency) -> Result<Ordering> {
    topological_order_by(y, std::cmp::Reverse).ok_or_else(|| {
        let cycle = find_cycle(y).expect("Kahn stalls only on a cycle");
        Error::CycleFound(cycle.into_iter().map(|v| v.to_string()).collect())
    })
}

/// Draws a starting state from the prior, with the order taken from a
/// topological sort of `y` (smallest index first among ties).
pub fn init_state<R: Rng + ?Sized>(y: &Adjacency, h: &Hyperparams, rng: &mut R) -> Result<ModelState> {
    let order = initial_order(y)?;
    init_state_with_order(y, order, h, rng)
}

/// As [`init_state`] but with a caller-supplied topological order.
pub fn init_state_with_order<R: Rng + ?Sized>(
    y: &Adjacency,
    order: Ordering,
    h: &Hyperparams,
    rng: &mut R,
) -> Result<ModelState> {
    h.validate()?;
    let n = y.nrows();
    if y.dim() != (n, n) || order.len() != n {
        return Err(Error::dims(format!("{n}x{n}"), format!("{:?}", y.dim())));
    }
    let y_star = reorder(y, &order)?;
    if !crate::graph::is_upper_triangular(&y_star) {
        return Err(Error::config("initial order is not topological"));
    }
    let k = h.k;
    let alpha = rand_distr::Gamma::new(h.gamma_shape, 1.0 / h.gamma_rate)
        .expect("validated")
        .sample(rng);
    let mut d_star = Array2::zeros((n, k));
    let shapes = vec![alpha; k];
    let mut row = vec![0.0; k];
    for p in 0..n {
        dist::dirichlet_into(&shapes, rng, &mut row);
        d_star.row_mut(p).assign(&ndarray::ArrayView1::from(&row[..]));
    }
    let c = Array2::from_shape_fn((k, k), |(i, j)| {
        Beta::new(h.beta_a[[i, j]], h.beta_b[[i, j]])
            .expect("validated")
            .sample(rng)
    });
    let mut z_star = Array2::from_elem((n, n), DIAG_SENTINEL);
    for p in 0..n {
        let weights = d_star.row(p).to_vec();
        for q in 0..n {
            if p != q {
                z_star[[p, q]] = dist::categorical(&weights, rng).expect("simplex row") as u8;
            }
        }
    }
    Ok(ModelState {
        order,
        alpha,
        c,
        d_star,
        z_star,
    })
}

/// Redraws every block probability from `Beta(E + A, F + B)`.
pub fn update_c<R: Rng + ?Sized>(counts: &BlockCounts, h: &Hyperparams, rng: &mut R) -> Array2<f64> {
    Array2::from_shape_fn(counts.e.dim(), |(i, j)| {
        let a = counts.e[[i, j]] as f64 + h.beta_a[[i, j]];
        let b = counts.f[[i, j]] as f64 + h.beta_b[[i, j]];
        Beta::new(a, b).expect("positive shapes").sample(rng)
    })
}

/// Redraws every membership row from `Dirichlet(alpha + counts row)`.
pub fn update_d<R: Rng + ?Sized>(mcounts: &Array2<u64>, alpha: f64, rng: &mut R) -> Array2<f64> {
    let (n, k) = mcounts.dim();
    let mut out = Array2::zeros((n, k));
    let mut shapes = vec![0.0; k];
    let mut row = vec![0.0; k];
    for p in 0..n {
        for (s, &c) in shapes.iter_mut().zip(mcounts.row(p)) {
            *s = alpha + c as f64;
        }
        dist::dirichlet_into(&shapes, rng, &mut row);
        out.row_mut(p).assign(&ndarray::ArrayView1::from(&row[..]));
    }
    out
}

/// Log conditional density of alpha up to a constant, given
/// `sum_log_d = sum of ln D` over all entries.
pub fn alpha_log_conditional(alpha: f64, n: usize, k: usize, sum_log_d: f64, h: &Hyperparams) -> f64 {
    if alpha.is_nan() || alpha <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let (n, kf) = (n as f64, k as f64);
    n * (ln_gamma(kf * alpha) - kf * ln_gamma(alpha)) + alpha * sum_log_d
        + (h.gamma_shape - 1.0) * alpha.ln()
        - h.gamma_rate * alpha
}

/// Random-walk Metropolis step for alpha. Returns the new value and
/// whether the proposal was accepted.
pub fn update_alpha<R: Rng + ?Sized>(
    state: &ModelState,
    h: &Hyperparams,
    s_alpha: f64,
    rng: &mut R,
) -> (f64, bool) {
    let z: f64 = StandardNormal.sample(rng);
    let proposal = state.alpha + s_alpha * z;
    let u: f64 = rng.random();
    if proposal <= 0.0 {
        return (state.alpha, false);
    }
    let (n, k) = (state.n(), state.k());
    let sum_log_d: f64 = state.d_star.iter().map(|v| v.ln()).sum();
    let log_ratio = alpha_log_conditional(proposal, n, k, sum_log_d, h)
        - alpha_log_conditional(state.alpha, n, k, sum_log_d, h);
    if u.ln() < log_ratio {
        (proposal, true)
    } else {
        (state.alpha, false)
    }
}

fn bernoulli(c: f64, edge: bool) -> f64 {
    if edge {
        c
    } else {
        1.0 - c
    }
}

/// Unnormalized full-conditional weights of the upper entry `Z*[p, q]`
/// (`p < q`): column `Z*[q, p]` of `C` times row `p` of `D*`.
pub fn upper_weights(state: &ModelState, y_star: &Adjacency, p: usize, q: usize, out: &mut [f64]) {
    let edge = y_star[[p, q]] == 1;
    let partner = state.z_star[[q, p]] as usize;
    for (i, w) in out.iter_mut().enumerate() {
        *w = bernoulli(state.c[[i, partner]], edge) * state.d_star[[p, i]];
    }
}

/// Unnormalized full-conditional weights of the lower entry `Z*[q, p]`
/// (`p < q`): row `Z*[p, q]` of `C` times row `q` of `D*`.
pub fn lower_weights(state: &ModelState, y_star: &Adjacency, p: usize, q: usize, out: &mut [f64]) {
    let edge = y_star[[p, q]] == 1;
    let partner = state.z_star[[p, q]] as usize;
    for (j, w) in out.iter_mut().enumerate() {
        *w = bernoulli(state.c[[partner, j]], edge) * state.d_star[[q, j]];
    }
}

/// Gibbs update of the interaction pair at positions `p < q`: the upper
/// entry first, then the lower entry given the new upper entry.
pub fn update_z_pair<R: Rng + ?Sized>(
    state: &mut ModelState,
    y_star: &Adjacency,
    p: usize,
    q: usize,
    rng: &mut R,
) -> Result<(u8, u8)> {
    debug_assert!(p < q);
    let mut w = vec![0.0; state.k()];
    update_z_pair_with(state, y_star, p, q, rng, &mut w)
}

fn update_z_pair_with<R: Rng + ?Sized>(
    state: &mut ModelState,
    y_star: &Adjacency,
    p: usize,
    q: usize,
    rng: &mut R,
    w: &mut [f64],
) -> Result<(u8, u8)> {
    upper_weights(state, y_star, p, q, w);
    let upper = dist::categorical(w, rng).ok_or(Error::DegenerateWeights { p, q })? as u8;
    state.z_star[[p, q]] = upper;
    lower_weights(state, y_star, p, q, w);
    let lower = dist::categorical(w, rng).ok_or(Error::DegenerateWeights { p: q, q: p })? as u8;
    state.z_star[[q, p]] = lower;
    Ok((upper, lower))
}

/// Probability of choosing `to` as the partner of the uniformly drawn
/// position `from` (up to the common `1/n`).
fn partner_probability(from: usize, n: usize) -> f64 {
    if from == 0 || from == n - 1 {
        1.0
    } else {
        0.5
    }
}

/// Acceptance probability for swapping the nodes at adjacent positions
/// `p` and `q` (0-based), when `p` was drawn first and `q` chosen as its
/// neighbour.
///
/// Only the dyad between the two nodes changes its contribution: the node
/// moving to the front becomes the potential citer. The target ratio is
/// multiplied by the ratio of reverse to forward proposal probabilities,
/// which is 1/2 when `p` is an end position and its neighbour is interior,
/// 2 in the mirrored case, and 1 otherwise. A `0/0` ratio rejects.
pub fn swap_acceptance(state: &ModelState, y_star: &Adjacency, p: usize, q: usize) -> f64 {
    let (lo, hi) = (p.min(q), p.max(q));
    debug_assert_eq!(hi, lo + 1);
    if y_star[[lo, hi]] == 1 {
        return 0.0;
    }
    let n = state.n();
    let front = state.z_star[[lo, hi]] as usize;
    let back = state.z_star[[hi, lo]] as usize;
    let current = 1.0 - state.c[[front, back]];
    let swapped = 1.0 - state.c[[back, front]];
    let proposal = partner_probability(q, n) / partner_probability(p, n);
    let numerator = proposal * swapped;
    if current > 0.0 {
        (numerator / current).min(1.0)
    } else if numerator > 0.0 {
        1.0
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SwapOutcome {
    /// `false` if `n < 2` or the swap was blocked by an edge between the pair.
    pub attempted: bool,
    pub accepted: bool,
}

/// Swaps positions `a` and `b` in the order and in every star matrix.
pub fn apply_swap(state: &mut ModelState, y_star: &mut Adjacency, a: usize, b: usize) {
    state.order.swap(a, b);
    swap_rows_cols(&mut state.z_star, a, b);
    swap_rows_cols(y_star, a, b);
    let k = state.k();
    for i in 0..k {
        state.d_star.swap([a, i], [b, i]);
    }
}

fn swap_rows_cols<T>(m: &mut Array2<T>, a: usize, b: usize) {
    let n = m.nrows();
    for j in 0..n {
        m.swap([a, j], [b, j]);
    }
    for i in 0..n {
        m.swap([i, a], [i, b]);
    }
}

/// One adjacent-swap Metropolis proposal on the order.
pub fn update_o<R: Rng + ?Sized>(state: &mut ModelState, y_star: &mut Adjacency, rng: &mut R) -> SwapOutcome {
    let n = state.n();
    let rejected = SwapOutcome {
        attempted: false,
        accepted: false,
    };
    if n < 2 {
        return rejected;
    }
    let p = rng.random_range(0..n);
    let q = if p == 0 {
        1
    } else if p == n - 1 {
        n - 2
    } else if rng.random_bool(0.5) {
        p - 1
    } else {
        p + 1
    };
    if y_star[[p.min(q), p.max(q)]] == 1 {
        return rejected;
    }
    let prob = swap_acceptance(state, y_star, p, q);
    let u: f64 = rng.random();
    let accepted = u < prob;
    if accepted {
        apply_swap(state, y_star, p, q);
    }
    SwapOutcome {
        attempted: true,
        accepted,
    }
}

/// One full systematic scan (see module docs for the kernel order).
pub fn sweep<R: Rng + ?Sized>(
    state: &mut ModelState,
    y_star: &mut Adjacency,
    h: &Hyperparams,
    cfg: &ChainConfig,
    rng: &mut R,
    tallies: &mut Tallies,
) -> Result<()> {
    let n = state.n();
    let k = state.k();
    let flags = cfg.kernels;
    if flags.z {
        let mut w = vec![0.0; k];
        for p in 0..n {
            for q in p + 1..n {
                update_z_pair_with(state, y_star, p, q, rng, &mut w)?;
            }
        }
    }
    if flags.d {
        let mcounts = membership_counts(&state.z_star, k);
        state.d_star = update_d(&mcounts, state.alpha, rng);
    }
    if flags.c {
        let counts = block_counts(&state.z_star, y_star, k)?;
        state.c = update_c(&counts, h, rng);
    }
    if flags.alpha {
        let (alpha, accepted) = update_alpha(state, h, cfg.s_alpha, rng);
        state.alpha = alpha;
        tallies.alpha_proposed += 1;
        tallies.alpha_accepted += accepted as u64;
    }
    if flags.order {
        for _ in 0..cfg.swaps_for(n) {
            let outcome = update_o(state, y_star, rng);
            tallies.o_proposed += 1;
            tallies.o_attempted += outcome.attempted as u64;
            tallies.o_accepted += outcome.accepted as u64;
        }
    }
    Ok(())
}

/// Runs a chain from a prior draw, seeded by `cfg.seed`.
pub fn run_chain(y: &Adjacency, h: &Hyperparams, cfg: &ChainConfig) -> Result<Chain> {
    let mut rng = ChainRng::seed_from_u64(cfg.seed);
    let state = init_state(y, h, &mut rng)?;
    run_chain_from(state, y, h, cfg, &mut rng)
}

/// Runs a chain from the given state: `burn_in` discarded sweeps, then
/// `iterations_retained` snapshots taken every `thin` sweeps.
pub fn run_chain_from<R: Rng + ?Sized>(
    mut state: ModelState,
    y: &Adjacency,
    h: &Hyperparams,
    cfg: &ChainConfig,
    rng: &mut R,
) -> Result<Chain> {
    cfg.validate()?;
    h.validate()?;
    state.validate()?;
    if h.k != state.k() {
        return Err(Error::dims(format!("K={}", h.k), format!("K={}", state.k())));
    }
    let mut y_star = reorder(y, &state.order)?;
    let mut tallies = Tallies::default();
    for _ in 0..cfg.burn_in {
        sweep(&mut state, &mut y_star, h, cfg, rng, &mut tallies)?;
    }
    let mut samples = Vec::with_capacity(cfg.iterations_retained);
    let mut trace = Vec::with_capacity(cfg.iterations_retained);
    let mut iterations = Vec::with_capacity(cfg.iterations_retained);
    let mut done = cfg.burn_in;
    for _ in 0..cfg.iterations_retained {
        for _ in 0..cfg.thin {
            sweep(&mut state, &mut y_star, h, cfg, rng, &mut tallies)?;
        }
        done += cfg.thin;
        trace.push(log_joint(&state, y, h)?);
        samples.push(state.clone());
        iterations.push(done);
    }
    Ok(Chain {
        samples,
        log_joint_trace: trace,
        iterations,
        config: cfg.clone(),
        tallies,
    })
}
