//! Composite Gauss-Legendre quadrature.

use std::sync::OnceLock;

pub const GL_ORDER: usize = 16;

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Chebyshev-type initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let d = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, d)
}

pub fn gl16() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(GL_ORDER))
}

/// Splits `[a, b]` at every break strictly inside it, then subdivides each
/// piece evenly so that no panel is wider than `max_width`.
pub fn panels(a: f64, b: f64, breaks: &[f64], max_width: f64) -> Vec<(f64, f64)> {
    if b <= a {
        return Vec::new();
    }
    let mut cuts: Vec<f64> = breaks.iter().copied().filter(|&t| t > a && t < b).collect();
    cuts.push(a);
    cuts.push(b);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut out = Vec::new();
    for w in cuts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let n = ((hi - lo) / max_width).ceil().max(1.0) as usize;
        let h = (hi - lo) / n as f64;
        for k in 0..n {
            let p0 = lo + k as f64 * h;
            let p1 = if k + 1 == n { hi } else { lo + (k + 1) as f64 * h };
            out.push((p0, p1));
        }
    }
    out
}

/// Quadrature nodes and weights of the composite 16-point rule over `panels`.
pub fn composite_nodes(panels: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let (xs, ws) = gl16();
    let mut out = Vec::with_capacity(panels.len() * GL_ORDER);
    for &(a, b) in panels {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        for (x, w) in xs.iter().zip(ws) {
            out.push((mid + half * x, half * w));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_two() {
        let (_, w) = gl16();
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn exact_for_degree_31() {
        let nodes = composite_nodes(&[(0.0, 1.0)]);
        let v: f64 = nodes.iter().map(|(x, w)| w * x.powi(31)).sum();
        assert!((v - 1.0 / 32.0).abs() < 1e-15);
    }

    #[test]
    fn composite_integrates_oscillatory() {
        let p = panels(0.0, 10.0, &[3.3], 1.0);
        assert_eq!(p.len(), 11);
        let v: f64 = composite_nodes(&p).iter().map(|(x, w)| w * (5.0 * x).cos()).sum();
        assert!((v - (50.0f64).sin() / 5.0).abs() < 1e-13);
    }
}
