//! Random variates used by the kernels and the generator.

use rand::Rng;
use rand_distr::{Distribution, Gamma};

/// Log of a Gamma(shape, 1) draw. Shapes below one use
/// `G(a) = G(a + 1) * U^(1/a)` evaluated in log space, so tiny shapes do
/// not underflow to zero.
pub fn ln_gamma_variate<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> f64 {
    if shape >= 1.0 {
        Gamma::new(shape, 1.0).expect("positive shape").sample(rng).ln()
    } else {
        let boosted = Gamma::new(shape + 1.0, 1.0)
            .expect("positive shape")
            .sample(rng)
            .ln();
        let u: f64 = 1.0 - rng.random::<f64>();
        boosted + u.ln() / shape
    }
}

/// Fills `out` with a Dirichlet(`shapes`) draw. Entries are kept strictly
/// positive.
pub fn dirichlet_into<R: Rng + ?Sized>(shapes: &[f64], rng: &mut R, out: &mut [f64]) {
    debug_assert_eq!(shapes.len(), out.len());
    for (o, &a) in out.iter_mut().zip(shapes) {
        *o = ln_gamma_variate(a, rng);
    }
    let max = out.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    for o in out.iter_mut() {
        *o = (*o - max).exp().max(f64::MIN_POSITIVE);
    }
    let sum: f64 = out.iter().sum();
    for o in out.iter_mut() {
        *o /= sum;
    }
}

pub fn dirichlet<R: Rng + ?Sized>(shapes: &[f64], rng: &mut R) -> Vec<f64> {
    let mut out = vec![0.0; shapes.len()];
    dirichlet_into(shapes, rng, &mut out);
    out
}

/// Inverse-CDF draw from unnormalized weights using one uniform.
/// `None` if the weights do not sum to a positive finite value.
pub fn categorical<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> Option<usize> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return None;
    }
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            last_positive = i;
            acc += w;
            if target < acc {
                return Some(i);
            }
        }
    }
    Some(last_positive)
}
