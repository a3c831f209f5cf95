//! Operator facts read off the symbol.
//!
//! Everything here samples `Φ(s)` on a finite box plus a few far-field
//! points. Suprema and infima found on the grid are polished by a
//! golden-section search around the best grid point, so extremes that fall
//! between grid points (the Cesàro peak at `s = 0`, the q-Cesàro minimum at
//! `s = π / ln 4`) are still located to near machine precision.

use std::collections::HashMap;
use std::io::Write;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::par::Execution;
use crate::quadrature::{discretize_measure, NodeSet};
use crate::spec::{MeasureSpec, OperatorSpec};
use crate::symbol::{Axis, GridSpec, SymbolEvaluator, SymbolMatrix};

/// Frequency sampling plan: a box `[-S, S]^n` plus far-field magnitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct SGrid {
    pub axes: Vec<Axis>,
    pub far_field: Vec<f64>,
    pub execution: Execution,
}

impl SGrid {
    /// `[-40, 40]` with 2048 points for `n = 1`, `[-20, 20]^n` with 256 per
    /// axis otherwise, far field at `1e2, 1e3, 1e4`.
    pub fn default_for(n: usize) -> SGrid {
        let axis = if n == 1 {
            Axis::symmetric(40.0, 2048)
        } else {
            Axis::symmetric(20.0, 256)
        };
        SGrid {
            axes: vec![axis; n],
            far_field: vec![1e2, 1e3, 1e4],
            execution: Execution::default(),
        }
    }

    pub fn uniform(n: usize, half_width: f64, count: usize) -> SGrid {
        SGrid {
            axes: vec![Axis::symmetric(half_width, count); n],
            far_field: vec![],
            execution: Execution::default(),
        }
    }

    pub fn with_far_field(mut self, far: Vec<f64>) -> Self {
        self.far_field = far;
        self
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.axes.is_empty() {
            return Err(Error::Grid("grid needs at least one axis".into()));
        }
        for (l, a) in self.axes.iter().enumerate() {
            if !(a.max > 0.0 && a.min == -a.max) {
                return Err(Error::Grid(format!(
                    "axis {l} must be a symmetric range [-S, S] with S > 0"
                )));
            }
            if a.count < 3 {
                return Err(Error::Grid(format!("axis {l} needs at least 3 points")));
            }
        }
        if self.far_field.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(Error::Grid("far-field magnitudes must be positive".into()));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn grid_spec(&self) -> GridSpec {
        GridSpec {
            axes: self.axes.clone(),
        }
    }

    /// Lebesgue measure attributed to one grid point.
    pub fn cell_volume(&self) -> f64 {
        self.axes
            .iter()
            .map(|a| (a.max - a.min) / a.count as f64)
            .product()
    }

    pub fn box_volume(&self) -> f64 {
        self.axes.iter().map(|a| a.max - a.min).product()
    }

    /// Far-field directions for one magnitude: `±r e_l` for each axis, and
    /// `±r (1,..,1)/sqrt(n)` when `n > 1`.
    pub fn far_field_points(&self, r: f64) -> Vec<Vec<f64>> {
        let n = self.dim();
        let mut out = Vec::new();
        for l in 0..n {
            for sign in [1.0, -1.0] {
                let mut s = vec![0.0; n];
                s[l] = sign * r;
                out.push(s);
            }
        }
        if n > 1 {
            let v = r / (n as f64).sqrt();
            out.push(vec![v; n]);
            out.push(vec![-v; n]);
        }
        out
    }

    fn max_abs(&self) -> f64 {
        self.axes
            .iter()
            .map(|a| a.max.abs().max(a.min.abs()))
            .fold(0.0, f64::max)
    }
}

/// Node set able to resolve frequencies up to `freq`; interval measures are
/// rediscretized when the spec's own node set was built for less.
pub fn nodes_for_frequency(
    spec: &OperatorSpec,
    nodes: &NodeSet,
    freq: f64,
) -> Result<Option<NodeSet>> {
    match spec.measure {
        MeasureSpec::IntervalLebesgue { .. } if freq > spec.quadrature.max_frequency => {
            let cfg = spec.quadrature.with_max_frequency(freq);
            let _ = nodes;
            discretize_measure(spec, &cfg).map(Some)
        }
        _ => Ok(None),
    }
}

/// Symbol samples over an [`SGrid`], shared by the analyses below.
#[derive(Debug, Clone)]
pub struct SymbolSamples {
    pub grid: SGrid,
    pub points: Vec<SymbolMatrix>,
    /// Eigenvalues `λ_χ(s)` per grid point.
    pub eigenvalues: Vec<Vec<Complex64>>,
    pub far_points: Vec<SymbolMatrix>,
    pub far_eigenvalues: Vec<Vec<Complex64>>,
    evaluator: SymbolEvaluator,
}

impl SymbolSamples {
    pub fn compute(spec: &OperatorSpec, nodes: &NodeSet, grid: &SGrid) -> Result<SymbolSamples> {
        grid.validate()?;
        if grid.dim() != nodes.dim() {
            return Err(Error::Dimension(format!(
                "grid has {} axes, operator dimension is {}",
                grid.dim(),
                nodes.dim()
            )));
        }
        let near = nodes_for_frequency(spec, nodes, grid.max_abs())?;
        let evaluator = SymbolEvaluator::new(near.as_ref().unwrap_or(nodes));
        let gs = grid.grid_spec();
        let points = evaluator.grid_symbols(&gs, grid.execution);
        let eigenvalues = grid
            .execution
            .map_indexed(points.len(), |k| points[k].eigenvalues());

        let mut far_points = Vec::new();
        for &r in &grid.far_field {
            let far_nodes = nodes_for_frequency(spec, nodes, r)?;
            let ev = SymbolEvaluator::new(far_nodes.as_ref().unwrap_or(nodes));
            for s in grid.far_field_points(r) {
                far_points.push(ev.symbol(&s));
            }
        }
        let far_eigenvalues = far_points.iter().map(|p| p.eigenvalues()).collect();
        Ok(SymbolSamples {
            grid: grid.clone(),
            points,
            eigenvalues,
            far_points,
            far_eigenvalues,
            evaluator,
        })
    }

    pub fn eval(&self, s: &[f64]) -> SymbolMatrix {
        self.evaluator.symbol(s)
    }

    fn spacing(&self) -> Vec<f64> {
        self.grid.axes.iter().map(|a| a.spacing()).collect()
    }

    /// Locate the grid or far-field sample maximizing `score`, then refine
    /// it inside the surrounding grid cell. Values equal up to rounding are
    /// ties, broken toward the smallest `|s|` so that flat ridges report
    /// their point nearest the origin.
    fn extremum<F>(&self, score: F) -> (Vec<f64>, f64)
    where
        F: Fn(&SymbolMatrix, &[Complex64]) -> f64,
    {
        let mut best: Option<(usize, bool, f64, f64)> = None;
        let consider =
            |best: &mut Option<(usize, bool, f64, f64)>, k: usize, far: bool, v: f64, s: &[f64]| {
                let r2: f64 = s.iter().map(|x| x * x).sum();
                let better = best.map_or(true, |b| {
                    let tie = TIE_TOL * b.2.abs().max(1.0);
                    v > b.2 + tie || (v >= b.2 - tie && r2 < b.3)
                });
                if better {
                    *best = Some((k, far, v, r2));
                }
            };
        for (k, (p, ev)) in self.points.iter().zip(&self.eigenvalues).enumerate() {
            consider(&mut best, k, false, score(p, ev), &p.s);
        }
        for (k, (p, ev)) in self
            .far_points
            .iter()
            .zip(&self.far_eigenvalues)
            .enumerate()
        {
            consider(&mut best, k, true, score(p, ev), &p.s);
        }
        let (k, far, v, _) = best.expect("grid is non-empty");
        if far {
            return (self.far_points[k].s.clone(), v);
        }
        let f = |s: &[f64]| {
            let m = self.eval(s);
            score(&m, &m.eigenvalues())
        };
        refine_max(f, &self.points[k].s, &self.spacing(), v)
    }
}

const GOLDEN_ITERS: usize = 90;

/// Relative gap below which two sampled maxima count as equal.
const TIE_TOL: f64 = 1e-12;

/// Golden-section maximization of `f` on `[a, b]`.
fn golden_max<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..GOLDEN_ITERS {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
        if b - a <= 1e-15 * (1.0 + a.abs().max(b.abs())) {
            break;
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Coordinate-wise golden search in the box `center ± step`; never returns
/// a value worse than `start`.
fn refine_max<F: Fn(&[f64]) -> f64>(
    f: F,
    center: &[f64],
    step: &[f64],
    start: f64,
) -> (Vec<f64>, f64) {
    let n = center.len();
    let mut best = center.to_vec();
    let mut value = start;
    let sweeps = if n == 1 { 1 } else { 3 };
    for _ in 0..sweeps {
        for l in 0..n {
            let mut probe = best.clone();
            let (x, v) = golden_max(
                |x| {
                    probe[l] = x;
                    f(&probe)
                },
                center[l] - step[l],
                center[l] + step[l],
            );
            if v > value {
                value = v;
                best[l] = x;
            }
        }
    }
    (best, value)
}

fn spectral_radius(ev: &[Complex64]) -> f64 {
    ev.iter().map(|l| l.norm()).fold(0.0, f64::max)
}

// ---------------------------------------------------------------------------
// norms

/// `∫ |K(u)| |det A(u)|^{-1/2} dμ(u)` on the node set.
pub fn norm_bound(_spec: &OperatorSpec, nodes: &NodeSet) -> f64 {
    nodes.mass()
}

#[derive(Debug, Clone, Serialize)]
pub struct NormReport {
    /// `sup_s ||Φ(s)||`.
    pub norm: f64,
    pub argmax_s: Vec<f64>,
    /// Integral upper bound on the norm.
    pub bound: f64,
    /// `sup_s max_χ |λ_χ(s) - 1|`, the spectral radius of `H - I`.
    pub sup_distance_from_identity: f64,
    pub argmax_distance_s: Vec<f64>,
}

pub fn operator_norm(spec: &OperatorSpec, nodes: &NodeSet, grid: &SGrid) -> Result<NormReport> {
    let samples = SymbolSamples::compute(spec, nodes, grid)?;
    Ok(operator_norm_from(&samples, norm_bound(spec, nodes)))
}

pub fn operator_norm_from(samples: &SymbolSamples, bound: f64) -> NormReport {
    let (argmax_s, norm) = samples.extremum(|_, ev| spectral_radius(ev));
    let one = Complex64::new(1.0, 0.0);
    let (argmax_distance_s, dist) =
        samples.extremum(|_, ev| ev.iter().map(|l| (l - one).norm()).fold(0.0, f64::max));
    NormReport {
        norm,
        argmax_s,
        bound,
        sup_distance_from_identity: dist,
        argmax_distance_s,
    }
}

// ---------------------------------------------------------------------------
// spectrum

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenSample {
    pub s: Vec<f64>,
    pub branch: usize,
    pub re: f64,
    pub im: f64,
}

impl EigenSample {
    pub fn lambda(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointCandidate {
    pub re: f64,
    pub im: f64,
    /// Estimated Lebesgue measure of `{s : min_χ |λ - λ_χ(s)| < tol}`.
    pub measure: f64,
    pub cells: usize,
}

impl PointCandidate {
    pub fn lambda(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
}

/// Sampled spectrum. The point-spectrum list is a heuristic: it reports the
/// values whose near-level set covers more than one grid cell.
#[derive(Debug, Clone, Serialize)]
pub struct SpectrumEstimate {
    pub samples: Vec<EigenSample>,
    pub far_field: Vec<EigenSample>,
    pub point_spectrum: Vec<PointCandidate>,
    pub tolerance: f64,
    pub cell_volume: f64,
    pub box_volume: f64,
}

impl SpectrumEstimate {
    /// CSV: `s_1..s_n, branch, re, im`; far-field rows follow the grid rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let n = self
            .samples
            .first()
            .or(self.far_field.first())
            .map_or(1, |e| e.s.len());
        let mut header: Vec<String> = (1..=n).map(|l| format!("s_{l}")).collect();
        header.extend(["branch", "re", "im"].map(String::from));
        w.write_record(&header)?;
        for e in self.samples.iter().chain(&self.far_field) {
            let mut row: Vec<String> = e.s.iter().map(|v| v.to_string()).collect();
            row.push(e.branch.to_string());
            row.push(e.re.to_string());
            row.push(e.im.to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Default tolerance of the point-spectrum heuristic.
pub const POINT_SPECTRUM_TOL: f64 = 1e-6;

pub fn spectrum(spec: &OperatorSpec, nodes: &NodeSet, grid: &SGrid) -> Result<SpectrumEstimate> {
    let samples = SymbolSamples::compute(spec, nodes, grid)?;
    Ok(spectrum_from(&samples, POINT_SPECTRUM_TOL))
}

fn to_samples(points: &[SymbolMatrix], eig: &[Vec<Complex64>]) -> Vec<EigenSample> {
    let mut out = Vec::with_capacity(points.len() * eig.first().map_or(0, |e| e.len()));
    for (p, ev) in points.iter().zip(eig) {
        for (chi, l) in ev.iter().enumerate() {
            out.push(EigenSample {
                s: p.s.clone(),
                branch: chi,
                re: l.re,
                im: l.im,
            });
        }
    }
    out
}

pub fn spectrum_from(samples: &SymbolSamples, tol: f64) -> SpectrumEstimate {
    SpectrumEstimate {
        samples: to_samples(&samples.points, &samples.eigenvalues),
        far_field: to_samples(&samples.far_points, &samples.far_eigenvalues),
        point_spectrum: point_spectrum_from(samples, tol),
        tolerance: tol,
        cell_volume: samples.grid.cell_volume(),
        box_volume: samples.grid.box_volume(),
    }
}

/// `min_s |det(λ - Φ(s))| = min_s prod_χ |λ - λ_χ(s)|` over the grid and far
/// field, refined around the grid minimum.
pub fn resolvent_margin(
    spec: &OperatorSpec,
    nodes: &NodeSet,
    grid: &SGrid,
    lambda: Complex64,
) -> Result<f64> {
    let samples = SymbolSamples::compute(spec, nodes, grid)?;
    Ok(resolvent_margin_from(&samples, lambda))
}

pub fn resolvent_margin_from(samples: &SymbolSamples, lambda: Complex64) -> f64 {
    let (_, v) = samples.extremum(|_, ev| -ev.iter().map(|l| (lambda - l).norm()).product::<f64>());
    -v
}

// ---------------------------------------------------------------------------
// point spectrum

type Cell = (i64, i64);

fn cell_of(z: Complex64, size: f64) -> Cell {
    let f = |v: f64| (v / size).floor().clamp(-9e18, 9e18) as i64;
    (f(z.re), f(z.im))
}

fn neighbours((a, b): Cell) -> impl Iterator<Item = Cell> {
    (-1..=1)
        .flat_map(move |da| (-1..=1).map(move |db| (a.saturating_add(da), b.saturating_add(db))))
}

pub fn point_spectrum_estimate(
    spec: &OperatorSpec,
    nodes: &NodeSet,
    grid: &SGrid,
    tol: f64,
) -> Result<Vec<PointCandidate>> {
    let grid = SGrid {
        far_field: vec![],
        ..grid.clone()
    };
    let samples = SymbolSamples::compute(spec, nodes, &grid)?;
    Ok(point_spectrum_from(&samples, tol))
}

/// Cluster eigenvalue samples at radius `10 tol` (smallest `|λ|` first) and
/// count, for each cluster value, the grid points with some branch within
/// `tol`. Only grid samples take part; far-field points carry no cell.
pub fn point_spectrum_from(samples: &SymbolSamples, tol: f64) -> Vec<PointCandidate> {
    let mut all: Vec<(usize, Complex64)> = Vec::new();
    for (k, ev) in samples.eigenvalues.iter().enumerate() {
        for l in ev {
            all.push((k, *l));
        }
    }
    if all.is_empty() || !(tol > 0.0) {
        return vec![];
    }
    let radius = 10.0 * tol;

    // sample index by cell of size tol
    let mut by_cell: HashMap<Cell, Vec<usize>> = HashMap::new();
    for (idx, (_, l)) in all.iter().enumerate() {
        by_cell.entry(cell_of(*l, tol)).or_default().push(idx);
    }

    let mut order: Vec<usize> = (0..all.len()).collect();
    order.sort_by(|&a, &b| {
        let (x, y) = (all[a].1, all[b].1);
        x.norm()
            .total_cmp(&y.norm())
            .then(x.re.total_cmp(&y.re))
            .then(x.im.total_cmp(&y.im))
    });
    let mut reps: Vec<Complex64> = Vec::new();
    let mut rep_cells: HashMap<Cell, Vec<usize>> = HashMap::new();
    for idx in order {
        let l = all[idx].1;
        let c = cell_of(l, radius);
        let taken = neighbours(c).any(|nc| {
            rep_cells
                .get(&nc)
                .is_some_and(|v| v.iter().any(|&r| (reps[r] - l).norm() <= radius))
        });
        if !taken {
            rep_cells.entry(c).or_default().push(reps.len());
            reps.push(l);
        }
    }

    let vol = samples.grid.cell_volume();
    let mut out = Vec::new();
    let mut hit = vec![usize::MAX; samples.eigenvalues.len()];
    for (r, lam) in reps.iter().enumerate() {
        let mut cells = 0;
        let c = cell_of(*lam, tol);
        for nc in neighbours(c) {
            if let Some(v) = by_cell.get(&nc) {
                for &idx in v {
                    let (k, l) = all[idx];
                    if hit[k] != r && (l - lam).norm() < tol {
                        hit[k] = r;
                        cells += 1;
                    }
                }
            }
        }
        if cells > 1 {
            out.push(PointCandidate {
                re: lam.re,
                im: lam.im,
                measure: cells as f64 * vol,
                cells,
            });
        }
    }
    out
}

// ---------------------------------------------------------------------------
// classification

#[derive(Debug, Clone, Serialize)]
pub struct Witness {
    pub holds: bool,
    /// Worst value of the defining quantity over the samples.
    pub value: f64,
    /// Frequency where `value` is attained.
    pub s: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassificationReport {
    pub tolerance: f64,
    /// `max_s ||Φ - Φ*||`.
    pub self_adjoint: Witness,
    /// Minimum eigenvalue (real part) of `Φ(s)`; holds when self-adjoint and
    /// the minimum is at least `-tol`.
    pub positive: Witness,
    /// `max_s ||Φ Φ* - I||`.
    pub unitary: Witness,
    /// `min_s |det Φ(s)|`.
    pub invertible: Witness,
    /// `sup_s ||Φ(s)||`.
    pub non_zero: Witness,
}

pub fn classify(
    spec: &OperatorSpec,
    nodes: &NodeSet,
    grid: &SGrid,
    tol: f64,
) -> Result<ClassificationReport> {
    let samples = SymbolSamples::compute(spec, nodes, grid)?;
    Ok(classify_from(&samples, tol))
}

/// Norm identities for normal `Φ`: `||Φ - Φ*|| = 2 max |Im λ|`,
/// `||Φ Φ* - I|| = max ||λ|^2 - 1|`.
pub fn classify_from(samples: &SymbolSamples, tol: f64) -> ClassificationReport {
    let (s_sa, sa) =
        samples.extremum(|_, ev| ev.iter().map(|l| 2.0 * l.im.abs()).fold(0.0, f64::max));
    let (s_min, neg_min) =
        samples.extremum(|_, ev| -ev.iter().map(|l| l.re).fold(f64::INFINITY, f64::min));
    let (s_u, u) = samples.extremum(|_, ev| {
        ev.iter()
            .map(|l| (l.norm_sqr() - 1.0).abs())
            .fold(0.0, f64::max)
    });
    let (s_det, neg_det) = samples.extremum(|_, ev| -ev.iter().map(|l| l.norm()).product::<f64>());
    let (s_nz, nz) = samples.extremum(|_, ev| spectral_radius(ev));
    let self_adjoint = sa <= tol;
    ClassificationReport {
        tolerance: tol,
        self_adjoint: Witness {
            holds: self_adjoint,
            value: sa,
            s: s_sa,
        },
        positive: Witness {
            holds: self_adjoint && -neg_min >= -tol,
            value: -neg_min,
            s: s_min,
        },
        unitary: Witness {
            holds: u <= tol,
            value: u,
            s: s_u,
        },
        invertible: Witness {
            holds: -neg_det > tol,
            value: -neg_det,
            s: s_det,
        },
        non_zero: Witness {
            holds: nz > tol,
            value: nz,
            s: s_nz,
        },
    }
}

// ---------------------------------------------------------------------------
// noncompactness

#[derive(Debug, Clone, Serialize)]
pub struct CompactnessProbe {
    pub threshold: f64,
    pub sizes: Vec<usize>,
    /// Singular values above `threshold` per size.
    pub counts: Vec<usize>,
    /// Counts are strictly increasing, as expected for a non-compact operator.
    pub increasing: bool,
}

pub fn noncompactness_probe(
    spec: &OperatorSpec,
    sizes: &[usize],
    threshold: f64,
) -> Result<CompactnessProbe> {
    let nodes = discretize_measure(spec, &spec.quadrature.with_max_frequency(0.0))?;
    let mut counts = Vec::with_capacity(sizes.len());
    for &size in sizes {
        let sv = crate::mellin::galerkin_singular_values(spec, &nodes, size)?;
        counts.push(sv.iter().filter(|&&v| v > threshold).count());
    }
    let increasing = counts.windows(2).all(|w| w[1] > w[0]);
    Ok(CompactnessProbe {
        threshold,
        sizes: sizes.to_vec(),
        counts,
        increasing,
    })
}
