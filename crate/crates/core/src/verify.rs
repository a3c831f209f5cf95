//! Residual suite run by `hausdorff verify`.
//!
//! Every check reduces to one non-negative number compared against a fixed
//! threshold, so a report is a flat list of `(name, value, threshold)`.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::Result;
use crate::mellin::{
    block_apply, diagonalization_residuals, mellin_forward, GridFunction, LogGrid,
};
use crate::octant::{octant_count, OctantIndex};
use crate::quadrature::{discretize_measure, NodeSet, QuadConfig};
use crate::spec::OperatorSpec;
use crate::spectral::{norm_bound, operator_norm_from, SGrid, SymbolSamples};
use crate::symbol::{adjoint_spec, compose_specs, symbol_inverse, SymbolEvaluator};

pub const NORM_BOUND_SLACK: f64 = 1e-9;
pub const PLANCHEREL_TOL: f64 = 1e-3;
pub const DIAGONALIZATION_TOL: f64 = 1e-3;
pub const INVERSE_TOL: f64 = 1e-9;
/// Symbols with `|det|` below this are skipped by the inverse check.
pub const INVERTIBILITY_FLOOR: f64 = 1e-8;

/// Coarse node sets keep the product measure of the composition check small.
const COMPOSITION_QUADRATURE: QuadConfig = QuadConfig {
    order: 8,
    tolerance: 1e-6,
    max_depth: 64,
    max_frequency: 0.0,
};
const COMPOSITION_MAX_NODES: usize = 1 << 20;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &'static str, value: f64, threshold: f64, detail: String) -> Check {
        Check {
            name,
            value,
            threshold,
            passed: value <= threshold,
            detail,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub spec: String,
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

/// Run every check on one operator.
pub fn run_suite(
    spec: &OperatorSpec,
    nodes: &NodeSet,
    s_grid: &SGrid,
    log_grid: &LogGrid,
) -> Result<VerifyReport> {
    let samples = SymbolSamples::compute(spec, nodes, s_grid)?;
    let checks = vec![
        norm_bound_check(spec, nodes, &samples),
        plancherel_check(log_grid),
        diagonalization_check(nodes, log_grid),
        adjointness_check(spec, nodes, log_grid)?,
        composition_check(spec, s_grid)?,
        inverse_check(&samples),
    ];
    Ok(VerifyReport {
        spec: spec.name.clone(),
        checks,
    })
}

/// `sup ||Φ(s)|| - ∫ |K| |det A|^{-1/2} dμ`, floored at zero.
pub fn norm_bound_check(spec: &OperatorSpec, nodes: &NodeSet, samples: &SymbolSamples) -> Check {
    let bound = norm_bound(spec, nodes);
    let r = operator_norm_from(samples, bound);
    Check::new(
        "norm_bound",
        (r.norm - bound).max(0.0),
        NORM_BOUND_SLACK,
        format!("sup|Φ| = {}, integral bound = {bound}", r.norm),
    )
}

/// Centre for a test bump, on the side the dilations move mass away from so
/// that the image stays inside the grid.
pub fn bump_center(nodes: &NodeSet, n: usize) -> Vec<f64> {
    let drift: f64 = nodes
        .iter()
        .filter(|nd| nd.kernel != 0.0)
        .map(|nd| nd.weight * nd.kernel.abs() * nd.eig.iter().map(|a| a.abs().ln()).sum::<f64>())
        .sum();
    let c = if drift > 0.0 {
        6.0
    } else if drift < 0.0 {
        -6.0
    } else {
        0.0
    };
    vec![c; n]
}

/// Largest relative Plancherel defect over Gaussian bumps on every octant.
pub fn plancherel_check(grid: &LogGrid) -> Check {
    let n = grid.dim();
    let mut worst = 0.0f64;
    for i in 0..octant_count(n) {
        let f = GridFunction::log_gaussian(grid, i, &vec![0.5; n], 1.5);
        let m = mellin_forward(&f, OctantIndex(i));
        worst = worst.max((m.norm() - f.norm()).abs() / f.norm());
    }
    Check::new(
        "plancherel",
        worst,
        PLANCHEREL_TOL,
        format!("{} octant bump(s)", octant_count(n)),
    )
}

/// Largest block residual `||M_i H_ij f_j - φ_ij M_j f_j|| / ||M_j f_j||`.
pub fn diagonalization_check(nodes: &NodeSet, grid: &LogGrid) -> Check {
    let n = grid.dim();
    let center = bump_center(nodes, n);
    let mut f = GridFunction::zeros(grid);
    for j in 0..octant_count(n) {
        f.data[j] = GridFunction::log_gaussian(grid, j, &center, 1.0).data[j].clone();
    }
    let residuals = diagonalization_residuals(nodes, &f);
    let mut worst = (0.0f64, 0, 0);
    for (i, row) in residuals.iter().enumerate() {
        for (j, &r) in row.iter().enumerate() {
            if r > worst.0 {
                worst = (r, i, j);
            }
        }
    }
    Check::new(
        "diagonalization",
        worst.0,
        DIAGONALIZATION_TOL,
        format!(
            "worst block ({}, {}), bump at t = {}",
            worst.1, worst.2, center[0]
        ),
    )
}

/// `H f` on the grid, summed over all blocks.
fn grid_apply(nodes: &NodeSet, f: &GridFunction) -> GridFunction {
    let octants = octant_count(f.grid.dim());
    let mut out = GridFunction::zeros(&f.grid);
    for j in 0..octants {
        let fj = f.restrict(j);
        for i in 0..octants {
            let part = block_apply(nodes, &fj, OctantIndex(i), OctantIndex(j));
            for (o, p) in out.data[i].iter_mut().zip(&part.data[i]) {
                *o += p;
            }
        }
    }
    out
}

/// Threshold for the adjointness check. Both sides interpolate linearly at
/// shifted points, which is exact only up to `Δt^2 / 8` times the second
/// derivative of unit-width bumps.
pub fn adjointness_tol(grid: &LogGrid) -> f64 {
    let dt = grid.axes.iter().map(|a| a.dt()).fold(0.0, f64::max);
    dt * dt / 8.0
}

/// `|<Hf, g> - <f, H*g>| / (||Hf|| ||g||)` with `H*` built from the adjoint
/// spec, for bumps spread over every octant.
pub fn adjointness_check(spec: &OperatorSpec, nodes: &NodeSet, grid: &LogGrid) -> Result<Check> {
    let adj = adjoint_spec(spec);
    let adj_nodes = discretize_measure(&adj, &adj.quadrature)?;
    let n = grid.dim();
    let octants = octant_count(n);
    let mut f = GridFunction::zeros(grid);
    let mut g = GridFunction::zeros(grid);
    for i in 0..octants {
        let shift = i as f64 / octants as f64;
        let fi = GridFunction::log_gaussian(grid, i, &vec![0.5 - shift; n], 1.0);
        let gi = GridFunction::log_gaussian(grid, i, &vec![shift - 0.5; n], 1.5);
        f.data[i] = fi.data[i].clone();
        g.data[i] = gi.data[i]
            .iter()
            .map(|v| v * Complex64::new(1.0, shift))
            .collect();
    }
    let hf = grid_apply(nodes, &f);
    let hg = grid_apply(&adj_nodes, &g);
    let lhs = hf.inner(&g);
    let rhs = f.inner(&hg);
    let scale = (hf.norm() * g.norm()).max(f64::MIN_POSITIVE);
    let value = if lhs == rhs {
        0.0
    } else {
        (lhs - rhs).norm() / scale
    };
    Ok(Check::new(
        "adjointness",
        value,
        adjointness_tol(grid),
        format!("<Hf,g> = {lhs}, <f,H*g> = {rhs}"),
    ))
}

/// Symbol of `H∘H` against `Φ(s)^2`, both from the same coarse node set, on
/// the grid axes thinned to at most 65 points.
pub fn composition_check(spec: &OperatorSpec, s_grid: &SGrid) -> Result<Check> {
    let cfg = QuadConfig {
        max_depth: spec.quadrature.max_depth,
        ..COMPOSITION_QUADRATURE
    };
    let nodes = discretize_measure(spec, &cfg)?;
    let threshold = 2.0 * (cfg.tolerance + cfg.tolerance);
    if nodes.len() * nodes.len() > COMPOSITION_MAX_NODES {
        return Ok(Check::new(
            "composition",
            0.0,
            threshold,
            format!(
                "skipped: {} coarse nodes give too large a product",
                nodes.len()
            ),
        ));
    }
    let product = compose_specs(spec, &nodes, spec, &nodes)?;
    let product_nodes = discretize_measure(&product, &product.quadrature)?;
    let single = SymbolEvaluator::new(&nodes);
    let composed = SymbolEvaluator::new(&product_nodes);
    let mut gs = s_grid.grid_spec();
    for axis in &mut gs.axes {
        axis.count = axis.count.min(65);
    }
    let mut worst = 0.0f64;
    for k in 0..gs.len() {
        let s = gs.point(k);
        let phi = single.symbol(&s);
        let want = phi.mul(&phi);
        let got = composed.symbol(&s);
        for (a, b) in got.coeffs.iter().zip(&want.coeffs) {
            worst = worst.max((a - b).norm());
        }
    }
    Ok(Check::new(
        "composition",
        worst,
        threshold,
        format!(
            "{} product nodes, {} frequencies",
            product_nodes.len(),
            gs.len()
        ),
    ))
}

/// `max |Φ^{-1}(s) Φ(s) - I|` over samples with `|det Φ(s)|` above the floor.
pub fn inverse_check(samples: &SymbolSamples) -> Check {
    let mut worst = 0.0f64;
    let mut used = 0;
    let all = samples.points.iter().chain(&samples.far_points);
    for phi in all {
        let Ok(inv) = symbol_inverse(phi, INVERTIBILITY_FLOOR) else {
            continue;
        };
        used += 1;
        let prod = inv.mul(phi);
        for (d, c) in prod.coeffs.iter().enumerate() {
            let want = if d == 0 { 1.0 } else { 0.0 };
            worst = worst.max((c - want).norm());
        }
    }
    let total = samples.points.len() + samples.far_points.len();
    Check::new(
        "inverse_roundtrip",
        worst,
        INVERSE_TOL,
        format!("{used} of {total} samples invertible"),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn suite(spec: &OperatorSpec, grid: SGrid, log: LogGrid) -> VerifyReport {
        let nodes = discretize_measure(spec, &spec.quadrature).unwrap();
        run_suite(spec, &nodes, &grid, &log).unwrap()
    }

    #[test]
    fn reflection_passes_everything() {
        let spec = fixtures::reflection(1);
        let r = suite(&spec, SGrid::uniform(1, 10.0, 65), LogGrid::default_for(1));
        for c in &r.checks {
            assert!(c.passed, "{c:?}");
        }
        let names: Vec<_> = r.checks.iter().map(|c| c.name).collect();
        assert_eq!(
            names,
            [
                "norm_bound",
                "plancherel",
                "diagonalization",
                "adjointness",
                "composition",
                "inverse_roundtrip"
            ]
        );
    }

    #[test]
    fn qcesaro_passes_everything() {
        let spec = fixtures::qcesaro(0.25);
        let r = suite(&spec, SGrid::uniform(1, 10.0, 65), LogGrid::default_for(1));
        assert!(r.passed(), "{:?}", r.failures().collect::<Vec<_>>());
    }

    #[test]
    fn zero_kernel_skips_inverse_samples() {
        let spec = fixtures::zero_kernel();
        let r = suite(
            &spec,
            SGrid::uniform(1, 5.0, 9),
            LogGrid::new(1, -6.0, 6.0, 256).unwrap(),
        );
        let inv = r
            .checks
            .iter()
            .find(|c| c.name == "inverse_roundtrip")
            .unwrap();
        assert!(inv.detail.starts_with("0 of"), "{}", inv.detail);
        assert!(r.passed());
    }

    #[test]
    fn failing_check_is_named() {
        let c = Check::new("adjointness", 1.0, 1e-4, String::new());
        let r = VerifyReport {
            spec: "x".into(),
            checks: vec![c],
        };
        assert!(!r.passed());
        assert_eq!(r.failures().next().unwrap().name, "adjointness");
    }
}
