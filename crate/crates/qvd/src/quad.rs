//! Gauss–Legendre quadrature: node tables, composite panels, and geometrically
//! graded panels for integrands with an endpoint singularity.

/// Gauss–Legendre nodes and weights on [-1, 1], computed by Newton iteration
/// on the Legendre polynomial recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Chebyshev-based initial guess for the i-th positive root.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Legendre recurrence: p_k(x) with derivative from the standard identity.
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { x } else { p1 };
            let pnm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pnm1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        weights[i] = w;
        nodes[n - 1 - i] = x;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Quadrature nodes for one interval [a, b] mapped from the reference rule.
pub fn map_to_interval(nodes: &[f64], weights: &[f64], a: f64, b: f64) -> Vec<(f64, f64)> {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    nodes
        .iter()
        .zip(weights)
        .map(|(&x, &w)| (mid + half * x, half * w))
        .collect()
}

/// Composite Gauss–Legendre over uniform panels.
pub fn integrate_composite<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    panels: usize,
    nodes_per_panel: usize,
) -> f64 {
    let (nodes, weights) = gauss_legendre(nodes_per_panel);
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let pa = a + p as f64 * h;
        for (x, w) in map_to_interval(&nodes, &weights, pa, pa + h) {
            total += w * f(x);
        }
    }
    total
}

/// Node/weight pairs for a composite uniform-panel rule on [a, b]. Useful when
/// the integrand is a tensor product over several axes.
pub fn composite_nodes(a: f64, b: f64, panels: usize, nodes_per_panel: usize) -> Vec<(f64, f64)> {
    let (nodes, weights) = gauss_legendre(nodes_per_panel);
    let h = (b - a) / panels as f64;
    let mut out = Vec::with_capacity(panels * nodes_per_panel);
    for p in 0..panels {
        let pa = a + p as f64 * h;
        out.extend(map_to_interval(&nodes, &weights, pa, pa + h));
    }
    out
}

/// Node/weight pairs for geometrically graded panels on [t_min, t_max]: panel
/// boundaries shrink by `ratio` toward t_min, resolving endpoint singularities
/// such as t^{-gamma}.
pub fn graded_nodes(t_min: f64, t_max: f64, ratio: f64, nodes_per_panel: usize) -> Vec<(f64, f64)> {
    assert!(t_min > 0.0 && t_max > t_min && ratio > 0.0 && ratio < 1.0);
    let (nodes, weights) = gauss_legendre(nodes_per_panel);
    let mut out = Vec::new();
    let mut hi = t_max;
    loop {
        let lo = (hi * ratio).max(t_min);
        out.extend(map_to_interval(&nodes, &weights, lo, hi));
        if lo <= t_min {
            break;
        }
        hi = lo;
    }
    out
}
