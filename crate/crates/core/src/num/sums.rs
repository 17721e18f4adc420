//! Periodic lattice sums of power-law-tailed functions.
//!
//! Sums of the form Σ_{n≥n₀} Σ_i w_i φ(x_i + nP) are evaluated exactly for
//! the first terms and closed by an Euler–Maclaurin expansion of the pure
//! power tail `c·x^{-s}` once every argument is well past the threshold.

/// One shifted family `weight · φ(offset + n·period)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeTerm {
    pub weight: f64,
    pub offset: f64,
}

/// Far-field form `coefficient · x^(-exponent)`, exact for `x ≥ threshold`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerTail {
    pub coefficient: f64,
    pub exponent: f64,
    pub threshold: f64,
}

/// B_{2k}/(2k)! for k = 1..7.
const BERNOULLI_OVER_FACT: [f64; 7] = [
    1.0 / 6.0 / 2.0,
    -1.0 / 30.0 / 24.0,
    1.0 / 42.0 / 720.0,
    -1.0 / 30.0 / 40_320.0,
    5.0 / 66.0 / 3_628_800.0,
    -691.0 / 2730.0 / 479_001_600.0,
    7.0 / 6.0 / 87_178_291_200.0,
];

/// Arguments (in periods) beyond which the expansion is used.
const SWITCH_PERIODS: f64 = 12.0;

/// Σ_{n ≥ n_start} Σ_i w_i φ(x_i + n·period).
///
/// `exact` is φ itself. When `tail.exponent ≤ 1` the weights must sum to
/// zero, otherwise the series diverges.
pub fn lattice_sum<F: Fn(f64) -> f64>(
    terms: &[LatticeTerm],
    period: f64,
    n_start: u64,
    exact: F,
    tail: PowerTail,
) -> f64 {
    if terms.is_empty() {
        return 0.0;
    }
    let min_offset = terms.iter().map(|t| t.offset).fold(f64::INFINITY, f64::min);
    let reach = tail.threshold.max(SWITCH_PERIODS * period);
    let mut n = n_start;
    let mut total = 0.0;
    while min_offset + n as f64 * period < reach {
        let shift = n as f64 * period;
        total += terms.iter().map(|t| t.weight * exact(t.offset + shift)).sum::<f64>();
        n += 1;
    }
    total + euler_maclaurin_tail(terms, period, n, tail)
}

fn euler_maclaurin_tail(terms: &[LatticeTerm], period: f64, n: u64, tail: PowerTail) -> f64 {
    let s = tail.exponent;
    let mut acc = 0.0;
    let weight_sum: f64 = terms.iter().map(|t| t.weight).sum();
    for t in terms {
        let z = t.offset / period + n as f64;
        let lz = z.ln();
        // ∫_N^∞ (n+y)^{-s} dn, written so that s → 1 degrades to −ln z.
        let integral = if (s - 1.0).abs() < 1e-12 {
            -lz
        } else {
            ((1.0 - s) * lz).exp_m1() / (s - 1.0)
        };
        let mut sum = integral + 0.5 * z.powf(-s);
        let mut rising = s; // (s)_{2k-1}
        let mut zpow = z.powf(-s - 1.0);
        for (k, b) in BERNOULLI_OVER_FACT.iter().enumerate() {
            if k > 0 {
                let m = (2 * k - 1) as f64;
                rising *= (s + m) * (s + m + 1.0);
                zpow /= z * z;
            }
            sum += b * rising * zpow;
        }
        acc += t.weight * sum;
    }
    if (s - 1.0).abs() >= 1e-12 {
        acc += weight_sum / (s - 1.0);
    }
    tail.coefficient * period.powf(-s) * acc
}
