//! Density evolution and code design.
//!
//! With M = cK bins and left degree d, bin degrees are Poisson with mean
//! λ = d/c. The fraction of uncolored balls evolves as
//! p ↦ (1 + e^{-λ} - e^{-λp})^{d-1}; its smallest fixed point is the error
//! floor p*. Decoding starts only if the singleton/doubleton merge graph
//! has a giant component, and the error floor is reachable only inside the
//! instability range of the fixed point at 1.

/// ρ(t) = e^{-λ(1-t)}, the edge-perspective bin degree generating function.
pub fn edge_degree_poly(t: f64, lambda: f64) -> f64 {
    (-lambda * (1.0 - t)).exp()
}

/// Probability that an edge lands in a bin of degree i (i ≥ 1).
pub fn rho_i(i: u32, lambda: f64) -> f64 {
    if i == 0 {
        return 0.0;
    }
    let mut v = (-lambda).exp();
    for j in 1..i {
        v *= lambda / j as f64;
    }
    v
}

/// One density-evolution step.
pub fn de_step(p: f64, lambda: f64, d: usize) -> f64 {
    (1.0 + (-lambda).exp() - (-lambda * p).exp()).powi(d as i32 - 1)
}

/// p_0 = `start` followed by `steps` applications of [`de_step`].
pub fn de_trajectory(start: f64, lambda: f64, d: usize, steps: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(steps + 1);
    let mut p = start;
    out.push(p);
    for _ in 0..steps {
        p = de_step(p, lambda, d);
        out.push(p);
    }
    out
}

/// Smallest fixed point of the recursion, reached by iterating upward from 0.
/// Returns a value near 1 when no interior fixed point exists.
pub fn error_floor(lambda: f64, d: usize) -> f64 {
    let mut p = 0.0;
    for _ in 0..1_000_000 {
        let q = de_step(p, lambda, d);
        if (q - p).abs() <= 1e-15 {
            return q;
        }
        p = q;
    }
    p
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= tol {
            break;
        }
        if (f(mid) > 0.0) == (flo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Sign changes of `f` on a log grid over [lo, hi], refined by bisection.
fn roots_on_grid(f: impl Fn(f64) -> f64 + Copy, lo: f64, hi: f64, steps: usize, tol: f64) -> Vec<f64> {
    let ratio = (hi / lo).powf(1.0 / steps as f64);
    let mut out = Vec::new();
    let mut a = lo;
    let mut fa = f(a);
    for _ in 0..steps {
        let b = a * ratio;
        let fb = f(b);
        if fa == 0.0 {
            out.push(a);
        } else if (fa > 0.0) != (fb > 0.0) {
            out.push(bisect(f, a, b, tol));
        }
        a = b;
        fa = fb;
    }
    out
}

/// λ-interval where the fixed point at 1 is unstable, (d-1)λe^{-λ} > 1.
/// `None` when d is too small for the interval to exist.
pub fn instability_range(d: usize) -> Option<(f64, f64)> {
    if d < 2 {
        return None;
    }
    let g = |l: f64| (d as f64 - 1.0) * l * (-l).exp() - 1.0;
    // The maximum of λe^{-λ} is at λ = 1.
    if g(1.0) <= 0.0 {
        return None;
    }
    Some((bisect(g, 1e-12, 1.0, 1e-13), bisect(g, 1.0, 200.0, 1e-12)))
}

/// The instability range expressed as c = d/λ.
pub fn instability_range_c(d: usize) -> Option<(f64, f64)> {
    instability_range(d).map(|(lo, hi)| (d as f64 / hi, d as f64 / lo))
}

/// Ingredients of the merge-graph model at load c.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MergeGraph {
    pub lambda: f64,
    /// Probability that a ball has at least one singleton bin.
    pub q_s: f64,
    /// P(a given bin of the ball is a singleton | the ball is found).
    pub p1: f64,
    /// P(a given bin of the ball is a singleton | not found).
    pub p2: f64,
    /// P(a ball in a doubleton bin is found by the singleton pass).
    pub q: f64,
    /// Mean degree of the merge graph on found balls, 2M_s/K_s.
    pub mean_degree: f64,
}

pub fn merge_graph(c: f64, d: usize) -> MergeGraph {
    let lambda = d as f64 / c;
    let d = d as i32;
    let r1 = (-lambda).exp();
    let r2 = lambda * r1;
    let q_s = 1.0 - (1.0 - r1).powi(d);
    let p1 = (1.0 - (1.0 - r1).powi(d) - (1.0 - r2).powi(d) + (1.0 - r1 - r2).powi(d)) / q_s;
    let p2 = 1.0 - (1.0 - r1 - r2).powi(d) / (1.0 - r1).powi(d);
    let q = p1 * q_s / (p1 * q_s + p2 * (1.0 - q_s));
    let mean_degree = c * lambda * lambda * r1 * q * q / q_s;
    MergeGraph { lambda, q_s, p1, p2, q, mean_degree }
}

/// Load range c = M/K over which the merge graph has a giant component.
pub fn giant_component_range(d: usize) -> Option<(f64, f64)> {
    if d < 2 {
        return None;
    }
    let f = |c: f64| merge_graph(c, d).mean_degree - 1.0;
    let roots = roots_on_grid(f, 0.5, 1e4, 20_000, 1e-12);
    match roots.as_slice() {
        [lo, hi, ..] => Some((*lo, *hi)),
        _ => None,
    }
}

/// Fraction ζ of found balls in the giant component, ζ + e^{-ζ·2M_s/K_s} = 1.
pub fn giant_fraction(c: f64, d: usize) -> f64 {
    giant_fraction_for_degree(merge_graph(c, d).mean_degree)
}

pub fn giant_fraction_for_degree(m: f64) -> f64 {
    if m <= 1.0 {
        return 0.0;
    }
    bisect(|z| z + (-z * m).exp() - 1.0, 1e-12, 1.0, 1e-15)
}

/// One row of the design table.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DesignRow {
    pub d: usize,
    pub c_min_giant: f64,
    pub c_max_giant: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    /// Binding lower bound on c.
    pub c: f64,
    pub p_star: f64,
    /// Measurement count per unit K, 4c.
    pub m_per_k: f64,
}

/// Smallest feasible c for each d together with its error floor.
pub fn design_table(ds: &[usize]) -> Vec<DesignRow> {
    ds.iter()
        .filter_map(|&d| {
            let (c_lo, c_hi) = giant_component_range(d)?;
            let (l_lo, l_hi) = instability_range(d)?;
            let c = c_lo.max(d as f64 / l_hi);
            Some(DesignRow {
                d,
                c_min_giant: c_lo,
                c_max_giant: c_hi,
                lambda_min: l_lo,
                lambda_max: l_hi,
                c,
                p_star: error_floor(d as f64 / c, d),
                m_per_k: 4.0 * c,
            })
        })
        .collect()
}

/// Everything the analysis knows about one operating point.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityEvolutionReport {
    pub d: usize,
    pub c: f64,
    pub lambda: f64,
    pub trajectory: Vec<f64>,
    pub error_floor: f64,
    pub giant_range_c: Option<(f64, f64)>,
    pub instability_range_lambda: Option<(f64, f64)>,
    pub giant_fraction: f64,
}

impl DensityEvolutionReport {
    /// Trajectory starts at `p2` (the uncolored fraction after merging) and
    /// runs `steps` iterations.
    pub fn new(d: usize, c: f64, p2: f64, steps: usize) -> Self {
        let lambda = d as f64 / c;
        Self {
            d,
            c,
            lambda,
            trajectory: de_trajectory(p2, lambda, d, steps),
            error_floor: error_floor(lambda, d),
            giant_range_c: giant_component_range(d),
            instability_range_lambda: instability_range(d),
            giant_fraction: giant_fraction(c, d),
        }
    }

    /// Fixed points t1 = 1 and t2 = p*.
    pub fn fixed_points(&self) -> (f64, f64) {
        (1.0, self.error_floor)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn edge_polynomial() {
        assert_eq!(edge_degree_poly(1.0, 2.3), 1.0);
        assert!((edge_degree_poly(0.0, 2.3) - rho_i(1, 2.3)).abs() < 1e-16);
        assert!((rho_i(2, 2.0) - 0.270_670_566_473_225_4).abs() < 1e-15);
        let total: f64 = (1..60).map(|i| rho_i(i, 3.1)).sum();
        assert!((total - 1.0).abs() < 1e-14);
    }

    #[test]
    fn step_endpoints() {
        for d in 3..10 {
            for l in [0.5, 1.7, 2.4] {
                assert!((de_step(1.0, l, d) - 1.0).abs() < 1e-15);
                let want = (-l * (d as f64 - 1.0)).exp();
                assert!((de_step(0.0, l, d) - want).abs() < 1e-12 * want);
            }
        }
    }

    #[test]
    fn trajectory_from_ninety_percent() {
        let t = de_trajectory(0.9, 2.0, 5, 40);
        let first = t.iter().position(|p| *p < 1e-3).unwrap();
        assert_eq!(first, 13);
    }

    #[test]
    fn instability_endpoints_are_roots() {
        for d in 4..=10 {
            let (a, b) = instability_range(d).unwrap();
            for l in [a, b] {
                let v = (d as f64 - 1.0) * l * (-l).exp();
                assert!((v - 1.0).abs() < 1e-9);
            }
        }
        assert!(instability_range(3).is_none() || instability_range(3).unwrap().0 < 1.0);
    }

    #[test]
    fn giant_root_residual() {
        for d in 4..=10 {
            let (lo, _) = giant_component_range(d).unwrap();
            assert!((merge_graph(lo, d).mean_degree - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn giant_fraction_limits() {
        assert!(giant_fraction_for_degree(1.0 + 1e-6) < 1e-5);
        assert!(giant_fraction_for_degree(50.0) > 1.0 - 1e-12);
        assert_eq!(giant_fraction_for_degree(0.5), 0.0);
        let z = giant_fraction_for_degree(2.0);
        assert!((z + (-2.0 * z).exp() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn floor_tracks_large_lambda_approximation() {
        let (l, d) = (5.0, 5);
        let ratio = error_floor(l, d) / (-l * (d as f64 - 1.0)).exp();
        assert!((ratio - 1.0).abs() < 1e-3, "{ratio}");
    }
}
