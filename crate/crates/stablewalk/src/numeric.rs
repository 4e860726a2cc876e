//! Small numerical utilities shared across modules: Gauss-Legendre rules,
//! composite quadrature on a half line, and a weighted least-squares line
//! fit used by the rate regressions.

/// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1].
///
/// Newton iteration on the Legendre polynomial, seeded with the Chebyshev
/// angle estimate. Exact for polynomials of degree 2n-1.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Evaluate P_n and P_n' by the three-term recurrence.
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// n-point Gauss-Legendre rule mapped to [a, b].
pub fn gauss_legendre_on (n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    (
        x.iter().map(|t| mid + half * t).collect(),
        w.iter().map(|v| v * half).collect(),
    )
}

/// Integral of f over [a, b] with a composite Gauss-Legendre rule
/// (panels panels of degree deg).
pub fn integrate_panels<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize, deg: usize) -> f64 {
    let mut total = 0.0;
    let step = (b - a) / panels as f64;
    for p in 0..panels {
        let lo = a + p as f64 * step;
        let (x, w) = gauss_legendre_on(deg, lo, lo + step);
        total += x.iter().zip(&w).map(|(xi, wi)| wi * f(*xi)).sum::<f64>();
    }
    total
}

/// Integral of f over [0, inf) for integrands decaying at least
/// exponentially past `cut`: composite rule on [0, cut], tail ignored.
/// The caller picks `cut` so the tail is below its tolerance.
pub fn integrate_halfline<F: Fn(f64) -> f64>(f: F, cut: f64, panels: usize, deg: usize) -> f64 {
    integrate_panels(f, 0.0, cut, panels, deg)
}

/// Weighted least-squares fit of y = intercept + slope x.
///
/// Weights are inverse variances. Returns (slope, intercept, slope standard
/// error). With all weights equal this reduces to ordinary least squares
/// with the residual-based error estimate.
pub fn weighted_line_fit(x: &[f64], y: &[f64], w: &[f64]) -> (f64, f64, f64) {
    assert!(x.len() == y.len() && y.len() == w.len());
    assert!(x.len() >= 2);
    let sw: f64 = w.iter().sum();
    let mx: f64 = x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let my: f64 = y.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let sxx: f64 = x.iter().zip(w).map(|(a, b)| b * (a - mx) * (a - mx)).sum();
    let sxy: f64 = x
        .iter()
        .zip(y)
        .zip(w)
        .map(|((a, c), b)| b * (a - mx) * (c - my))
        .sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    // Residual variance scaled onto the slope; with n = 2 points the fit is
    // exact and the error degenerates to 0.
    let n = x.len() as f64;
    if x.len() == 2 {
        return (slope, intercept, 0.0);
    }
    let chi2: f64 = x
        .iter()
        .zip(y)
        .zip(w)
        .map(|((a, c), b)| {
            let r = c - intercept - slope * a;
            b * r * r
        })
        .sum();
    let se = (chi2 / (n - 2.0) / sxx).sqrt();
    (slope, intercept, se)
}

/// Sum by recursive halving. Error grows like log2(n) rounding steps instead
/// of n, and the result does not depend on chunk boundaries chosen by a
/// parallel runtime, so reductions stay identical across worker counts.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        2 => xs[0] + xs[1],
        n => {
            let mid = n / 2;
            pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
        }
    }
}

/// Sample mean and standard error of the mean.
pub fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    assert!(!xs.is_empty());
    let n = xs.len() as f64;
    let mean = pairwise_sum(xs) / n;
    if xs.len() == 1 {
        return (mean, 0.0);
    }
    let sq: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&sq) / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gauss_legendre_five_point_reference() {
        // Classical 5-point nodes/weights.
        let (x, w) = gauss_legendre(5);
        assert_relative_eq!(x[4], 0.9061798459386640, epsilon = 1e-14);
        assert_relative_eq!(x[3], 0.5384693101056831, epsilon = 1e-14);
        assert_relative_eq!(x[2], 0.0, epsilon = 1e-14);
        assert_relative_eq!(w[4], 0.2369268850561891, epsilon = 1e-14);
        assert_relative_eq!(w[2], 0.5688888888888889, epsilon = 1e-14);
    }

    #[test]
    fn quadrature_integrates_polynomials_exactly() {
        // Degree 15 polynomial with an 8-point rule.
        let (x, w) = gauss_legendre_on(8, 0.0, 2.0);
        let val: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(15)).sum();
        assert_relative_eq!(val, 2.0f64.powi(16) / 16.0, max_relative = 1e-13);
    }

    #[test]
    fn halfline_gamma_function_value() {
        // integral of exp(-u^1.5) over [0, inf) equals Gamma(1 + 2/3);
        // substituting u = v^2 removes the sqrt singularity of the
        // derivative at zero so the panels converge spectrally.
        let val = integrate_halfline(|v| 2.0 * v * (-v.powi(3)).exp(), 8.0, 32, 16);
        let gamma = statrs::function::gamma::gamma(1.0 + 2.0 / 3.0);
        assert_relative_eq!(val, gamma, max_relative = 1e-12);
    }

    #[test]
    fn line_fit_recovers_exact_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 0.5 * v - 2.0).collect();
        let w = [1.0; 4];
        let (slope, intercept, se) = weighted_line_fit(&x, &y, &w);
        assert_relative_eq!(slope, 0.5, epsilon = 1e-12);
        assert_relative_eq!(intercept, -2.0, epsilon = 1e-12);
        assert!(se < 1e-10);
    }

    #[test]
    fn pairwise_sum_matches_naive_on_small_inputs() {
        assert_eq!(pairwise_sum(&[]), 0.0);
        assert_eq!(pairwise_sum(&[3.5]), 3.5);
        let xs: Vec<f64> = (1..=100).map(|k| k as f64).collect();
        assert_relative_eq!(pairwise_sum(&xs), 5050.0, epsilon = 1e-12);
    }

    #[test]
    fn mean_and_stderr_reference_values() {
        let xs = [2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0];
        let (mean, se) = mean_and_stderr(&xs);
        assert_relative_eq!(mean, 5.0, epsilon = 1e-13);
        // Sample variance 32/7, stderr sqrt(32/7/8).
        assert_relative_eq!(se, (32.0 / 7.0 / 8.0f64).sqrt(), epsilon = 1e-13);
        let (single, zero) = mean_and_stderr(&[1.25]);
        assert_eq!(single, 1.25);
        assert_eq!(zero, 0.0);
    }
}
