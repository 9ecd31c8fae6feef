//! Per-neuron update rules, kept free of network state so they can be checked
//! in isolation.

/// Neuron activity for a best-match distance: `exp(-d_b)`.
#[inline]
pub fn activation(distance: f64) -> f64 {
    (-distance).exp()
}

/// One habituation step: `h + tau * kappa * (1 - h) - tau`, clamped to `[0, 1]`.
///
/// Starting from `h = 1` the counter decays monotonically towards the fixed
/// point `1 - 1 / kappa`.
#[inline]
pub fn habituate(h: f64, tau: f64, kappa: f64) -> f64 {
    (h + tau * kappa * (1.0 - h) - tau).clamp(0.0, 1.0)
}

/// Habituation fixed point `1 - 1 / kappa`.
pub fn habituation_floor(kappa: f64) -> f64 {
    1.0 - 1.0 / kappa
}

/// `v += rate * h * (target - v)` in place.
#[inline]
pub fn adapt_toward(v: &mut [f64], target: &[f64], rate: f64, h: f64) {
    let g = rate * h;
    if g == 0.0 {
        return;
    }
    for (vi, ti) in v.iter_mut().zip(target) {
        *vi += g * (ti - *vi);
    }
}

/// Global context recursion for one frame.
///
/// `prev_state` is the previous BMU laid out as `[w, c_1, .., c_K]`, each of
/// length `dim`; the result is `[C_1, .., C_K]` with
/// `C_k = beta * w + (1 - beta) * c_{k-1}` and `c_0 = w`.
pub fn global_context(prev_state: &[f64], dim: usize, k: usize, beta: f64, out: &mut [f64]) {
    debug_assert_eq!(out.len(), k * dim);
    let w = &prev_state[..dim];
    for ki in 0..k {
        let prev_ctx = &prev_state[ki * dim..(ki + 1) * dim];
        let dst = &mut out[ki * dim..(ki + 1) * dim];
        for i in 0..dim {
            dst[i] = beta * w[i] + (1.0 - beta) * prev_ctx[i];
        }
    }
}
