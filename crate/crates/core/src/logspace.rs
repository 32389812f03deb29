//! Log-domain helpers shared by the trajectory and thermodynamic ledgers.

/// `ln Σ exp(x_i)`, ignoring `-inf` entries. Returns `-inf` when every entry is `-inf`.
///
/// The largest term is factored out and the remainder goes through `ln_1p`, so
/// `ln p_max = x_max - lse` keeps full relative precision even when the other
/// terms are below machine epsilon.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let mut argmax = None;
    let mut max = f64::NEG_INFINITY;
    for (i, &x) in xs.iter().enumerate() {
        if x > max {
            max = x;
            argmax = Some(i);
        }
    }
    let Some(argmax) = argmax else {
        return f64::NEG_INFINITY;
    };
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let rest: f64 = xs
        .iter()
        .enumerate()
        .filter(|&(i, &x)| i != argmax && x > f64::NEG_INFINITY)
        .map(|(_, &x)| (x - max).exp())
        .sum();
    max + rest.ln_1p()
}

/// `-x ln x` with the convention `0 ln 0 = 0`.
#[inline]
pub fn neg_x_ln_x(x: f64) -> f64 {
    if x > 0.0 {
        -x * x.ln()
    } else {
        0.0
    }
}

/// Binary entropy `H(a) = -a ln a - (1-a) ln(1-a)` in nats.
pub fn binary_entropy(a: f64) -> f64 {
    neg_x_ln_x(a) + neg_x_ln_x(1.0 - a)
}
