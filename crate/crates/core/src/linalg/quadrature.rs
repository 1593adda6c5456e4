//! Gauss–Legendre, Simpson and trapezoid rules.

use crate::error::{Error, Result};

/// Nodes and weights of an n-point rule on an interval.
#[derive(Debug, Clone)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Gauss–Legendre rule with `n` nodes on `[a, b]`, nodes ascending.
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> Result<Rule> {
    if n == 0 {
        return Err(Error::domain("Gauss-Legendre rule needs at least one node"));
    }
    if !(a.is_finite() && b.is_finite()) || b < a {
        return Err(Error::domain(format!("invalid interval [{a}, {b}]")));
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    for i in 0..n.div_ceil(2) {
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
        nodes[i] = mid - half * x;
        nodes[n - 1 - i] = mid + half * x;
        weights[i] = half * w;
        weights[n - 1 - i] = half * w;
    }
    Ok(Rule { nodes, weights })
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Composite Gauss–Legendre rule: `panels` equal panels, `per_panel` nodes each.
pub fn composite_gauss_legendre(per_panel: usize, panels: usize, a: f64, b: f64) -> Result<Rule> {
    if panels == 0 {
        return Err(Error::domain("composite rule needs at least one panel"));
    }
    let edges: Vec<f64> = (0..=panels).map(|i| a + (b - a) * i as f64 / panels as f64).collect();
    graded_gauss_legendre(per_panel, &edges)
}

/// Gauss–Legendre on each consecutive pair of the ascending `edges`.
pub fn graded_gauss_legendre(per_panel: usize, edges: &[f64]) -> Result<Rule> {
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    for pair in edges.windows(2) {
        let r = gauss_legendre(per_panel, pair[0], pair[1])?;
        nodes.extend(r.nodes);
        weights.extend(r.weights);
    }
    Ok(Rule { nodes, weights })
}

/// Composite Simpson weights for `samples` equispaced points on `[a, b]`.
pub fn simpson(samples: usize, a: f64, b: f64) -> Result<Rule> {
    if samples < 3 || samples.is_multiple_of(2) {
        return Err(Error::domain(format!("Simpson needs an odd sample count >= 3, got {samples}")));
    }
    let h = (b - a) / (samples - 1) as f64;
    let nodes = (0..samples).map(|i| a + h * i as f64).collect();
    let weights = (0..samples)
        .map(|i| {
            let c = if i == 0 || i == samples - 1 {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            c * h / 3.0
        })
        .collect();
    Ok(Rule { nodes, weights })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_exact_for_polynomials() {
        let r = gauss_legendre(8, -1.0, 3.0).unwrap();
        for k in 0..16 {
            let exact = (3f64.powi(k + 1) - (-1f64).powi(k + 1)) / (k + 1) as f64;
            let got = r.integrate(|x| x.powi(k));
            assert!((got - exact).abs() < 1e-12 * exact.abs().max(1.0), "k={k}");
        }
    }

    #[test]
    fn single_node_is_midpoint() {
        let r = gauss_legendre(1, 2.0, 4.0).unwrap();
        assert_eq!(r.nodes, vec![3.0]);
        assert!((r.weights[0] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn simpson_exact_for_cubics() {
        let r = simpson(5, 0.0, 2.0).unwrap();
        assert!((r.integrate(|x| x * x * x) - 4.0).abs() < 1e-14);
        assert!(simpson(4, 0.0, 1.0).is_err());
    }
}
