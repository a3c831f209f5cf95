//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so that every line is printed whether
//! or not it passes. The process exits non-zero if any criterion fails.

use std::collections::HashMap;
use std::time::Instant;

use hausdorff::fixtures;
use hausdorff::mellin::{
    apply_hausdorff, diagonalization_residual, mellin_forward, GridFunction, LogGrid,
};
use hausdorff::octant::OctantIndex;
use hausdorff::quadrature::{discretize_measure, MAX_PANEL_PHASE};
use hausdorff::spec::{parse_config, FunctionSpec};
use hausdorff::special::cesaro_gamma_symbol;
use hausdorff::spectral::{
    classify_from, noncompactness_probe, norm_bound, operator_norm_from, point_spectrum_from,
    spectrum_from, SGrid, SymbolSamples,
};
use hausdorff::symbol::{adjoint_spec, compose_specs, SymbolEvaluator};
use hausdorff::verify::bump_center;
use hausdorff::{NodeSet, OperatorSpec, QuadConfig};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// Fixture specs, their node sets and default-grid samples, built once.
struct Context {
    specs: Vec<OperatorSpec>,
    nodes: Vec<NodeSet>,
    samples: HashMap<String, SymbolSamples>,
}

impl Context {
    fn new() -> Context {
        let specs: Vec<OperatorSpec> = fixtures::ALL
            .iter()
            .map(|d| parse_config(d).unwrap())
            .collect();
        let nodes = specs
            .iter()
            .map(|s| discretize_measure(s, &s.quadrature).unwrap())
            .collect();
        Context {
            specs,
            nodes,
            samples: HashMap::new(),
        }
    }

    fn index(&self, name: &str) -> usize {
        self.specs.iter().position(|s| s.name == name).unwrap()
    }

    fn spec(&self, name: &str) -> &OperatorSpec {
        &self.specs[self.index(name)]
    }

    fn nodes(&self, name: &str) -> &NodeSet {
        &self.nodes[self.index(name)]
    }

    fn samples(&mut self, name: &str) -> &SymbolSamples {
        if !self.samples.contains_key(name) {
            let k = self.index(name);
            let grid = SGrid::default_for(self.specs[k].n);
            let s = SymbolSamples::compute(&self.specs[k], &self.nodes[k], &grid).unwrap();
            self.samples.insert(name.to_string(), s);
        }
        &self.samples[name]
    }
}

fn criterion_1(ctx: &mut Context) -> Outcome {
    let mut details = Vec::new();
    let mut pass = true;
    for (name, want, tol) in [("cesaro-1-1", 2.0, 1e-6), ("cesaro-2-2", 1.0, 1e-5)] {
        let start = Instant::now();
        let bound = norm_bound(ctx.spec(name), ctx.nodes(name));
        let samples = ctx.samples(name);
        let r = operator_norm_from(samples, bound);
        let secs = start.elapsed().as_secs_f64();
        let spacing = samples.grid.axes[0].spacing();
        let at_zero = r.argmax_s.iter().all(|s| s.abs() <= spacing);
        let ok = (r.norm - want).abs() <= tol && at_zero && secs < 10.0;
        pass &= ok;
        details.push(format!(
            "{name}: norm {} (|err| {:.1e}), argmax {:?}, {secs:.1}s",
            r.norm,
            (r.norm - want).abs(),
            r.argmax_s
        ));
    }
    outcome(pass, details.join("; "))
}

fn criterion_2(ctx: &mut Context) -> Outcome {
    let samples = ctx.samples("cesaro-1-1");
    let mut worst = 0.0f64;
    for (p, ev) in samples.points.iter().zip(&samples.eigenvalues) {
        let want = cesaro_gamma_symbol(1.0, 1, p.s[0]);
        for l in ev {
            worst = worst.max((l - want).norm());
        }
    }
    let mut far_ok = true;
    let mut far = Vec::new();
    for (p, ev) in samples.far_points.iter().zip(&samples.far_eigenvalues) {
        let r = ev.iter().map(|l| l.norm()).fold(0.0, f64::max);
        let want = cesaro_gamma_symbol(1.0, 1, p.s[0]);
        worst = worst.max(ev.iter().map(|l| (l - want).norm()).fold(0.0, f64::max));
        if p.s[0].abs() == 1e3 {
            far_ok &= r <= 0.05;
        }
        far.push((p.s[0].abs(), r));
    }
    // moduli shrink toward zero as |t| grows
    far.sort_by(|a, b| a.0.total_cmp(&b.0));
    let shrinking = far.windows(2).all(|w| w[0].0 == w[1].0 || w[1].1 < w[0].1);
    let last = far.last().map_or(0.0, |f| f.1);
    outcome(
        worst <= 1e-7 && far_ok && shrinking,
        format!("max |λ - γ(t)| = {worst:.2e}; far-field |λ| at 1e4 = {last:.2e}"),
    )
}

fn criterion_3(ctx: &mut Context) -> Outcome {
    let samples = ctx.samples("qcesaro-0.25");
    let sp = spectrum_from(samples, 1e-6);
    let one = Complex64::new(1.0, 0.0);
    let pos = sp
        .samples
        .iter()
        .chain(&sp.far_field)
        .map(|e| ((e.lambda() - one).norm() - 0.5).abs())
        .fold(0.0, f64::max);
    let norm = operator_norm_from(samples, 1.5);

    let samples = ctx.samples("qcesaro-neg0.25");
    let sp = spectrum_from(samples, 1e-6);
    let neg = sp
        .samples
        .iter()
        .chain(&sp.far_field)
        .map(|e| {
            let l = e.lambda();
            (((l - one).norm() - 0.5).abs()).min(((l + one).norm() - 0.5).abs())
        })
        .fold(0.0, f64::max);
    let five_thirds = Complex64::new(5.0 / 3.0, 0.0);
    let actual_circle = sp
        .samples
        .iter()
        .map(|e| ((e.lambda() - five_thirds).norm() - 5.0 / 6.0).abs())
        .fold(0.0, f64::max);
    outcome(
        pos <= 1e-8 && neg <= 1e-8,
        format!(
            "q=0.25 max ||λ-1|-0.5| = {pos:.1e}; q=-0.25 max dist to |λ∓1|=0.5 circles = {neg:.3} \
             (samples lie on |λ-5/3| = 5/6 to {actual_circle:.1e}); \
             q=0.25 sup|φ| = {}, sup|φ-1| = {} (reported, not resolved)",
            norm.norm, norm.sup_distance_from_identity
        ),
    )
}

fn criterion_4(ctx: &mut Context) -> Outcome {
    let mut pass = true;
    let mut worst_excess = f64::NEG_INFINITY;
    let mut sharp = Vec::new();
    let names: Vec<String> = ctx.specs.iter().map(|s| s.name.clone()).collect();
    for name in names {
        let bound = norm_bound(ctx.spec(&name), ctx.nodes(&name));
        let r = operator_norm_from(ctx.samples(&name), bound);
        worst_excess = worst_excess.max(r.norm - bound);
        pass &= r.norm <= bound + 1e-9;
        if name.starts_with("cesaro") {
            pass &= (r.norm - bound).abs() <= 1e-6;
            sharp.push(format!(
                "{name} |norm-bound| {:.1e}",
                (r.norm - bound).abs()
            ));
        }
    }
    outcome(
        pass,
        format!(
            "max(norm - bound) over fixtures = {worst_excess:.1e}; {}",
            sharp.join(", ")
        ),
    )
}

fn fixture_bump(grid: &LogGrid, nodes: &NodeSet, octant: usize) -> GridFunction {
    GridFunction::log_gaussian(grid, octant, &bump_center(nodes, grid.dim()), 1.0)
}

fn criterion_5(ctx: &mut Context) -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut per = Vec::new();
    for name in [
        "cesaro-1-1",
        "qcesaro-0.25",
        "reflection",
        "qcesaro-neg0.25",
    ] {
        let spec = ctx.spec(name);
        let nodes = ctx.nodes(name);
        let grid = LogGrid::default_for(spec.n);
        let mut spec_worst = 0.0f64;
        for j in 0..(1 << spec.n) {
            let f = fixture_bump(&grid, nodes, j);
            for i in 0..(1 << spec.n) {
                let r = diagonalization_residual(nodes, &f, OctantIndex(i), OctantIndex(j));
                spec_worst = spec_worst.max(r);
            }
        }
        worst = worst.max(spec_worst);
        per.push(format!("{name} {spec_worst:.1e}"));
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst <= 1e-3 && secs < 60.0,
        format!("max residual per spec: {}; {secs:.1}s", per.join(", ")),
    )
}

fn criterion_6(ctx: &mut Context) -> Outcome {
    let mut worst = 0.0f64;
    let names: Vec<String> = ctx.specs.iter().map(|s| s.name.clone()).collect();
    for name in names {
        let spec = ctx.spec(&name).clone();
        let adj = adjoint_spec(&spec);
        let adj_nodes = discretize_measure(&adj, &adj.quadrature).unwrap();
        let grid = SGrid::default_for(spec.n).with_far_field(vec![]);
        let a = SymbolSamples::compute(&adj, &adj_nodes, &grid).unwrap();
        let b = ctx.samples(&name);
        for (p, q) in a.points.iter().zip(&b.points) {
            let qs = q.adjoint();
            for (x, y) in p.coeffs.iter().zip(&qs.coeffs) {
                worst = worst.max((x - y).norm());
            }
        }
    }
    outcome(
        worst <= 1e-8,
        format!("max |Φ_adj - Φ*| = {worst:.1e} over all fixtures"),
    )
}

fn criterion_7() -> Outcome {
    let grid = SGrid::uniform(1, 40.0, 257).with_far_field(vec![]);
    let mut pass = true;
    let mut details = Vec::new();
    for spec in [fixtures::cesaro_1_1(), fixtures::qcesaro(0.25)] {
        let cfg = QuadConfig {
            order: 8,
            tolerance: 1e-6,
            max_frequency: 0.0,
            ..spec.quadrature.clone()
        };
        let nodes = discretize_measure(&spec, &cfg).unwrap();
        let prod = compose_specs(&spec, &nodes, &spec, &nodes).unwrap();
        let pn = discretize_measure(&prod, &prod.quadrature).unwrap();
        let a = SymbolEvaluator::new(&pn);
        let b = SymbolEvaluator::new(&nodes);
        let tol = 2.0 * (cfg.tolerance + cfg.tolerance);
        let mut worst = 0.0f64;
        let gs = grid.grid_spec();
        for k in 0..gs.len() {
            let s = gs.point(k);
            let phi = b.symbol(&s);
            let want = phi.mul(&phi);
            let got = a.symbol(&s);
            for (x, y) in got.to_dense().iter().zip(want.to_dense()) {
                worst = worst.max((x - y).norm());
            }
        }
        pass &= worst <= tol;
        details.push(format!(
            "{}: {} product nodes, max err {worst:.1e} (tol {tol:.0e})",
            spec.name,
            pn.len()
        ));
    }
    outcome(pass, details.join("; "))
}

fn criterion_8(ctx: &mut Context) -> Outcome {
    let q = 0.25;
    let spec = ctx.spec("qcesaro-0.25").clone();
    let nodes = ctx.nodes("qcesaro-0.25").clone();
    let grid = LogGrid::default_for(1);
    let f = GridFunction::log_gaussian(&grid, 0, &[0.0], 1.0);
    let interior: Vec<usize> = (0..grid.len())
        .filter(|&k| grid.axes[0].t(k).abs() <= 8.0)
        .collect();
    let xs: Vec<Vec<f64>> = interior.iter().map(|&k| grid.x_point(0, k)).collect();
    let qxs: Vec<Vec<f64>> = xs.iter().map(|x| vec![q * x[0]]).collect();
    let g = apply_hausdorff(&spec, &nodes, &f, &xs).unwrap();
    let gq = apply_hausdorff(&spec, &nodes, &f, &qxs).unwrap();
    let peak = f.data[0].iter().map(|v| v.norm()).fold(0.0, f64::max);
    let mut worst = 0.0f64;
    for (n, &k) in interior.iter().enumerate() {
        let back = (g[n] - gq[n] * q) / (1.0 - q);
        worst = worst.max((back - f.data[0][k]).norm() / peak);
    }
    let report = classify_from(ctx.samples("qcesaro-0.25"), 1e-9);
    let det = report.invertible.value;
    outcome(
        worst <= 1e-6 && (det - 0.25).abs() <= 1e-8,
        format!(
            "roundtrip rel err {worst:.1e}; min|det Φ| = {det} at s = {:?}",
            report.invertible.s
        ),
    )
}

fn criterion_9(ctx: &mut Context) -> Outcome {
    let samples = ctx.samples("reflection");
    let sp = spectrum_from(samples, 1e-12);
    let mut values: Vec<f64> = Vec::new();
    let mut off = 0.0f64;
    for e in sp.samples.iter().chain(&sp.far_field) {
        let target = if e.re < 0.0 { -1.0 } else { 1.0 };
        off = off.max((e.lambda() - Complex64::new(target, 0.0)).norm());
        if !values.contains(&target) {
            values.push(target);
        }
    }
    values.sort_by(f64::total_cmp);
    let clusters: Vec<f64> = point_spectrum_from(samples, 1e-12)
        .iter()
        .map(|p| p.re)
        .collect();
    let norm = operator_norm_from(samples, 1.0).norm;
    let r = classify_from(samples, 1e-12);
    let ok = values == [-1.0, 1.0]
        && off <= 1e-12
        && clusters == [-1.0, 1.0]
        && norm == 1.0
        && r.self_adjoint.holds
        && r.unitary.holds;
    outcome(
        ok,
        format!(
            "clusters {clusters:?}, max |Δ| {off:.1e}, norm {norm}, self-adjoint {}, unitary {}",
            r.self_adjoint.holds, r.unitary.holds
        ),
    )
}

fn dense_eigenvalues(m: &hausdorff::SymbolMatrix) -> Vec<Complex64> {
    let k = m.order();
    let dense = DMatrix::from_row_slice(k, k, &m.to_dense());
    let (_, t) = dense.schur().unpack();
    (0..k).map(|i| t[(i, i)]).collect()
}

fn multiset_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    let mut used = vec![false; b.len()];
    let mut worst = 0.0f64;
    for x in a {
        let (j, d) = b
            .iter()
            .enumerate()
            .filter(|(j, _)| !used[*j])
            .map(|(j, y)| (j, (x - y).norm()))
            .min_by(|p, q| p.1.total_cmp(&q.1))
            .unwrap();
        used[j] = true;
        worst = worst.max(d);
    }
    worst
}

fn criterion_10(ctx: &mut Context) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let evaluators: Vec<SymbolEvaluator> = ctx.nodes.iter().map(SymbolEvaluator::new).collect();
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let k = rng.random_range(0..evaluators.len());
        let n = ctx.specs[k].n;
        let s: Vec<f64> = (0..n).map(|_| rng.random_range(-40.0..40.0)).collect();
        let m = evaluators[k].symbol(&s);
        worst = worst.max(multiset_distance(&m.eigenvalues(), &dense_eigenvalues(&m)));
    }
    outcome(
        worst <= 1e-9,
        format!("max multiset distance over 1e4 draws = {worst:.1e}"),
    )
}

fn criterion_11() -> Outcome {
    let g1 = LogGrid::default_for(1);
    let g2 = LogGrid::default_for(2);
    let sqrt_piece = FunctionSpec::new(1, &[(1, "1/sqrt(abs(x))")], vec![(-3.0, 2.5)]).unwrap();
    let poly_2d =
        FunctionSpec::new(2, &[(2, "x_1^2 * x_2")], vec![(-2.0, 1.0), (0.5, 3.0)]).unwrap();
    let suite: Vec<(&str, GridFunction, usize)> = vec![
        (
            "box [1,e]",
            GridFunction::log_box(&g1, 0, &[0.0], &[1.0]),
            0,
        ),
        (
            "mirrored box",
            GridFunction::log_box(&g1, 1, &[-2.0], &[0.5]),
            1,
        ),
        (
            "gaussian",
            GridFunction::log_gaussian(&g1, 0, &[3.0], 0.7),
            0,
        ),
        (
            "dsl piece",
            GridFunction::from_spec(&sqrt_piece, &g1).unwrap(),
            1,
        ),
        (
            "2d box",
            GridFunction::log_box(&g2, 3, &[-1.0, 0.0], &[1.5, 2.0]),
            3,
        ),
        (
            "2d gaussian",
            GridFunction::log_gaussian(&g2, 1, &[0.5, -1.0], 0.8),
            1,
        ),
        (
            "2d dsl piece",
            GridFunction::from_spec(&poly_2d, &g2).unwrap(),
            2,
        ),
    ];
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for (name, f, oct) in &suite {
        let m = mellin_forward(f, OctantIndex(*oct));
        let d = (m.norm() - f.norm()).abs() / f.norm();
        worst = worst.max(d);
        parts.push(format!("{name} {d:.1e}"));
    }
    outcome(
        worst <= 1e-3,
        format!("Plancherel defects: {}", parts.join(", ")),
    )
}

fn criterion_12() -> Outcome {
    let spec = fixtures::cesaro_1_1();
    let p = noncompactness_probe(&spec, &[32, 64, 128], 0.5).unwrap();
    outcome(
        p.increasing,
        format!("counts above 0.5 for N = {:?}: {:?}", p.sizes, p.counts),
    )
}

fn criterion_13(ctx: &mut Context) -> Outcome {
    let atom = ctx.samples("constant-atom");
    let box_volume = atom.grid.box_volume();
    let ps = point_spectrum_from(atom, 1e-6);
    let atom_ok = ps.len() == 1
        && ps[0].lambda() == Complex64::new(2.0, 0.0)
        && (ps[0].measure - box_volume).abs() <= 1e-9 * box_volume;
    let ces = point_spectrum_from(ctx.samples("cesaro-1-1"), 1e-6);
    outcome(
        atom_ok && ces.is_empty(),
        format!(
            "constant atom: {:?} (box volume {box_volume}); cesaro candidates: {}",
            ps.iter().map(|p| (p.re, p.measure)).collect::<Vec<_>>(),
            ces.len()
        ),
    )
}

fn criterion_14() -> Outcome {
    let spec = fixtures::cesaro_1_1();
    let grid = LogGrid::default_for(1);
    let indicator = FunctionSpec::new(1, &[(0, "1")], vec![(-12.0, 0.0)]).unwrap();
    let f = GridFunction::from_spec(&indicator, &grid).unwrap();
    // nodes fine enough that a panel spans about one log-grid step
    let cfg = spec
        .quadrature
        .with_max_frequency(MAX_PANEL_PHASE / grid.min_dt());
    let nodes = discretize_measure(&spec, &cfg).unwrap();
    let xs: Vec<Vec<f64>> = (0..=90).map(|k| vec![0.05 + 0.01 * k as f64]).collect();
    let hf = apply_hausdorff(&spec, &nodes, &f, &xs).unwrap();
    let worst = xs
        .iter()
        .zip(&hf)
        .map(|(x, v)| (v - Complex64::new(-x[0].ln(), 0.0)).norm())
        .fold(0.0, f64::max);
    let beyond = apply_hausdorff(&spec, &nodes, &f, &[vec![1.5], vec![3.0]]).unwrap();
    let zero_beyond = beyond.iter().all(|v| v.norm() == 0.0);
    outcome(
        worst <= 1e-4 && zero_beyond,
        format!("max |Hf + ln x| on [0.05, 0.95] = {worst:.1e} ({} nodes); Hf = 0 for x > 1: {zero_beyond}", nodes.len()),
    )
}

fn main() {
    let mut ctx = Context::new();
    let criteria: Vec<(&str, Box<dyn Fn(&mut Context) -> Outcome>)> = vec![
        ("1 Cesàro norm", Box::new(criterion_1)),
        ("2 Cesàro spectrum curve", Box::new(criterion_2)),
        ("3 q-Cesàro spectra", Box::new(criterion_3)),
        ("4 integral norm bound", Box::new(criterion_4)),
        ("5 Mellin diagonalization", Box::new(criterion_5)),
        ("6 adjoint symbol", Box::new(criterion_6)),
        ("7 composition symbol", Box::new(|_| criterion_7())),
        ("8 q-Cesàro inverse", Box::new(criterion_8)),
        ("9 reflection spectrum", Box::new(criterion_9)),
        ("10 Hadamard vs dense eigenvalues", Box::new(criterion_10)),
        ("11 Mellin unitarity", Box::new(|_| criterion_11())),
        ("12 noncompactness probe", Box::new(|_| criterion_12())),
        ("13 point spectrum", Box::new(criterion_13)),
        ("14 direct application", Box::new(|_| criterion_14())),
    ];
    let mut failed = 0;
    for (name, run) in &criteria {
        let start = Instant::now();
        let o = run(&mut ctx);
        let tag = if o.pass { "PASS" } else { "FAIL" };
        if !o.pass {
            failed += 1;
        }
        println!(
            "{tag} criterion {name} [{:.1}s]: {}",
            start.elapsed().as_secs_f64(),
            o.detail
        );
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
