//! Scalar numerics shared by the algorithm modules: compensated and
//! log-domain summation, binomials, the Hurwitz zeta function, Gauss–Legendre
//! rules and a small least-squares line fit.

use statrs::function::gamma::ln_gamma;

/// Neumaier's variant of Kahan summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeumaierSum {
    sum: f64,
    compensation: f64,
}

impl NeumaierSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl std::iter::FromIterator<f64> for NeumaierSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = NeumaierSum::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}

/// Compensated sum of an iterator.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<NeumaierSum>().value()
}

/// Accumulates `ln(Σ exp(a_i))` without overflow.
#[derive(Debug, Clone, Copy)]
pub struct LogSum {
    max: f64,
    scaled: f64,
}

impl Default for LogSum {
    fn default() -> Self {
        Self {
            max: f64::NEG_INFINITY,
            scaled: 0.0,
        }
    }
}

impl LogSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_ln(&mut self, ln_x: f64) {
        if ln_x == f64::NEG_INFINITY {
            return;
        }
        if ln_x > self.max {
            self.scaled = self.scaled * (self.max - ln_x).exp() + 1.0;
            self.max = ln_x;
        } else {
            self.scaled += (ln_x - self.max).exp();
        }
    }

    /// `ln` of the accumulated sum; `-inf` when nothing was added.
    pub fn ln_value(&self) -> f64 {
        if self.max == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.max + self.scaled.ln()
        }
    }
}

/// Exact binomial coefficient when it fits in a `u128`.
pub fn binomial_exact(n: u64, k: u64) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 1..=k as u128 {
        // acc * (n - k + i) is divisible by i at every step.
        acc = acc.checked_mul(n as u128 - k as u128 + i)? / i;
    }
    Some(acc)
}

/// `ln C(n, k)`, exact (up to one rounding) whenever the coefficient fits in a `u128`.
pub fn ln_binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    match binomial_exact(n, k) {
        Some(b) => (b as f64).ln(),
        None => {
            ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
        }
    }
}

/// `C(n, k)` as a float (exact below 2^53).
pub fn binomial(n: u64, k: u64) -> f64 {
    match binomial_exact(n, k) {
        Some(b) => b as f64,
        None => ln_binomial(n, k).exp(),
    }
}

/// `ln Γ(x)` for `x > 0`.
pub fn ln_gamma_fn(x: f64) -> f64 {
    ln_gamma(x)
}

/// Natural log of `k!`.
pub fn ln_factorial(k: u64) -> f64 {
    ln_gamma(k as f64 + 1.0)
}

// B_{2j} / (2j)! for j = 1..=10.
const BERNOULLI_OVER_FACTORIAL: [f64; 10] = [
    1.0 / 12.0,
    -1.0 / 720.0,
    1.0 / 30240.0,
    -1.0 / 1209600.0,
    1.0 / 47900160.0,
    -691.0 / 1307674368000.0,
    1.0 / 74724249600.0,
    -3617.0 / 10670622842880000.0,
    43867.0 / 5109094217170944000.0,
    -174611.0 / 802857662698291200000.0,
];

/// Hurwitz zeta `ζ(s, a) = Σ_{k≥0} (a+k)^{-s}` for `s > 1`, `a > 0`,
/// by Euler–Maclaurin summation.
pub fn hurwitz_zeta(s: f64, a: f64) -> f64 {
    assert!(s > 1.0, "hurwitz_zeta requires s > 1, got {s}");
    assert!(a > 0.0, "hurwitz_zeta requires a > 0, got {a}");
    let shift_target = 12.0_f64.max(s);
    let shift = if a >= shift_target {
        0
    } else {
        (shift_target - a).ceil() as usize
    };
    let mut head = NeumaierSum::new();
    for k in 0..shift {
        head.add((a + k as f64).powf(-s));
    }
    let x = a + shift as f64;
    let mut tail = NeumaierSum::new();
    tail.add(x.powf(1.0 - s) / (s - 1.0));
    tail.add(0.5 * x.powf(-s));
    // rising = s (s+1) ... (s+2j-2), power = x^{-s-2j+1}
    let mut rising = s;
    let mut power = x.powf(-s - 1.0);
    let inv_x2 = 1.0 / (x * x);
    for (j, coeff) in BERNOULLI_OVER_FACTORIAL.iter().enumerate() {
        let term = coeff * rising * power;
        tail.add(term);
        if term.abs() < 1e-18 * tail.value().abs() {
            break;
        }
        let m = 2.0 * (j as f64 + 1.0);
        rising *= (s + m - 1.0) * (s + m);
        power *= inv_x2;
    }
    head.value() + tail.value()
}

/// Riemann zeta for `s > 1`.
pub fn riemann_zeta(s: f64) -> f64 {
    hurwitz_zeta(s, 1.0)
}

/// Gauss–Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 1 { x } else { p1 };
            let pm1 = if n == 1 { 1.0 } else { p0 };
            dp = nf * (x * p - pm1) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // map [-1, 1] -> [0, 1]
        nodes[i] = 0.5 * (1.0 - x);
        nodes[n - 1 - i] = 0.5 * (1.0 + x);
        weights[i] = 0.5 * w;
        weights[n - 1 - i] = 0.5 * w;
    }
    (nodes, weights)
}

/// Ordinary least-squares line `y ≈ intercept + slope * x`.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub residuals: Vec<f64>,
    pub rms_residual: f64,
}

pub fn fit_line(xs: &[f64], ys: &[f64]) -> Option<LineFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let n = xs.len() as f64;
    let mx = compensated_sum(xs.iter().copied()) / n;
    let my = compensated_sum(ys.iter().copied()) / n;
    let sxx = compensated_sum(xs.iter().map(|x| (x - mx) * (x - mx)));
    if sxx == 0.0 {
        return None;
    }
    let sxy = compensated_sum(xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)));
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residuals: Vec<f64> = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| y - (intercept + slope * x))
        .collect();
    let rms_residual = (compensated_sum(residuals.iter().map(|r| r * r)) / n).sqrt();
    Some(LineFit {
        slope,
        intercept,
        residuals,
        rms_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn zeta_known_values() {
        assert_relative_eq!(riemann_zeta(2.0), PI * PI / 6.0, max_relative = 1e-15);
        assert_relative_eq!(riemann_zeta(4.0), PI.powi(4) / 90.0, max_relative = 1e-15);
        assert_relative_eq!(riemann_zeta(1.5), 2.612_375_348_685_488, max_relative = 1e-14);
        assert_relative_eq!(hurwitz_zeta(2.0, 0.5), PI * PI / 2.0, max_relative = 1e-14);
        // ζ(3, 2) = ζ(3) - 1
        assert_relative_eq!(
            hurwitz_zeta(3.0, 2.0),
            1.202_056_903_159_594_2 - 1.0,
            max_relative = 1e-14
        );
    }

    #[test]
    fn zeta_tail_matches_direct_sum() {
        let direct = compensated_sum((0..200_000).map(|k| (5000.5 + k as f64).powf(-2.2)));
        let rest = hurwitz_zeta(2.2, 205_000.5);
        assert_relative_eq!(hurwitz_zeta(2.2, 5000.5), direct + rest, max_relative = 1e-13);
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial_exact(10, 3), Some(120));
        assert_eq!(binomial_exact(4, 5), Some(0));
        assert_eq!(binomial(50, 5), 2_118_760.0);
        assert_relative_eq!(
            ln_binomial(1_000_000, 300),
            ln_gamma(1_000_001.0) - ln_gamma(301.0) - ln_gamma(999_701.0),
            max_relative = 1e-12
        );
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre_unit(5);
        let integral: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(9)).sum();
        assert_relative_eq!(integral, 0.1, max_relative = 1e-14);
        let (x, w) = gauss_legendre_unit(1);
        assert_relative_eq!(x[0], 0.5);
        assert_relative_eq!(w[0], 1.0);
    }

    #[test]
    fn log_sum_matches_direct() {
        let mut s = LogSum::new();
        for v in [1.0_f64, 2.0, 3.5] {
            s.add_ln(v.ln());
        }
        assert_relative_eq!(s.ln_value(), 6.5_f64.ln(), max_relative = 1e-15);
        let mut big = LogSum::new();
        big.add_ln(1000.0);
        big.add_ln(1000.0);
        assert_relative_eq!(big.ln_value(), 1000.0 + 2.0_f64.ln(), max_relative = 1e-15);
    }

    #[test]
    fn neumaier_recovers_small_terms() {
        let s = compensated_sum([1.0, 1e100, 1.0, -1e100]);
        assert_eq!(s, 2.0);
    }

    #[test]
    fn line_fit_exact() {
        let fit = fit_line(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]).unwrap();
        assert_relative_eq!(fit.slope, 2.0);
        assert_relative_eq!(fit.intercept, 1.0);
        assert!(fit.rms_residual < 1e-15);
    }
}
