//! Modified Mellin transforms on logarithmic grids, direct application of
//! the operator, and the Galerkin oracle.
//!
//! On octant `i` write `x = σ_i ⊙ e^t`. The transform
//! `(M_i f)(s) = (2π)^{-n/2} ∫ |x|^{-1/2+is} f(x) dx` becomes
//! `(2π)^{-n/2} ∫ e^{i<s,t>} g(t) dt` with `g(t) = e^{Σt/2} f(σ ⊙ e^t)`,
//! which is a Fourier integral of `g`.
//!
//! Grid convention: axis `l` has points `t_k = t_min + k Δt`, `k = 0..m`,
//! `Δt = (t_max - t_min)/(m - 1)`, trapezoid weights (½ at both ends). The
//! dual frequencies are `s = 2π f(k) / (m Δt)` with `f(k) = k` for `k < m/2`
//! and `k - m` otherwise, so the transform at dual index `k` is
//! `(2π)^{-n/2} Δt^n e^{i<s,t_min>} Σ_j w_j g_j e^{+2πi jk/m}`: an
//! unnormalized inverse DFT.

use std::io::{Read, Write};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};

use crate::error::{Error, Result};
use crate::octant::{octant_count, octant_of_point, OctantIndex};
use crate::par::Execution;
use crate::quadrature::NodeSet;
use crate::spec::{FunctionSpec, OperatorSpec};
use crate::symbol::SymbolEvaluator;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogAxis {
    pub t_min: f64,
    pub t_max: f64,
    pub m: usize,
}

impl LogAxis {
    pub fn dt(&self) -> f64 {
        (self.t_max - self.t_min) / (self.m - 1) as f64
    }

    pub fn t(&self, k: usize) -> f64 {
        self.t_min + k as f64 * self.dt()
    }

    pub fn weight(&self, k: usize) -> f64 {
        if k == 0 || k + 1 == self.m {
            0.5
        } else {
            1.0
        }
    }

    pub fn dual(&self, k: usize) -> f64 {
        let f = if k < self.m / 2 {
            k as f64
        } else {
            k as f64 - self.m as f64
        };
        2.0 * std::f64::consts::PI * f / (self.m as f64 * self.dt())
    }

    pub fn ds(&self) -> f64 {
        2.0 * std::f64::consts::PI / (self.m as f64 * self.dt())
    }
}

/// Product log-grid, identical for every octant. Flat indices are row-major
/// with the last axis fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct LogGrid {
    pub axes: Vec<LogAxis>,
}

impl LogGrid {
    pub fn new(n: usize, t_min: f64, t_max: f64, m: usize) -> Result<LogGrid> {
        let g = LogGrid {
            axes: vec![LogAxis { t_min, t_max, m }; n],
        };
        g.validate()?;
        Ok(g)
    }

    /// `[-12, 12]^n` with 4096 points for `n = 1` and 256 per axis otherwise.
    pub fn default_for(n: usize) -> LogGrid {
        let m = if n == 1 { 4096 } else { 256 };
        LogGrid::new(n, -12.0, 12.0, m).expect("default grid is valid")
    }

    pub fn validate(&self) -> Result<()> {
        if self.axes.is_empty() {
            return Err(Error::Grid("log grid needs at least one axis".into()));
        }
        for (l, a) in self.axes.iter().enumerate() {
            if a.m < 8 || !a.m.is_power_of_two() {
                return Err(Error::Grid(format!(
                    "log axis {l}: m must be a power of two >= 8"
                )));
            }
            if !(a.t_min < a.t_max) || !a.t_min.is_finite() || !a.t_max.is_finite() {
                return Err(Error::Grid(format!(
                    "log axis {l}: need finite t_min < t_max"
                )));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.m).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let n = self.dim();
        let mut idx = vec![0; n];
        for l in (0..n).rev() {
            idx[l] = flat % self.axes[l].m;
            flat /= self.axes[l].m;
        }
        idx
    }

    pub fn t_point(&self, flat: usize) -> Vec<f64> {
        self.multi_index(flat)
            .iter()
            .zip(&self.axes)
            .map(|(&k, a)| a.t(k))
            .collect()
    }

    pub fn s_point(&self, flat: usize) -> Vec<f64> {
        self.multi_index(flat)
            .iter()
            .zip(&self.axes)
            .map(|(&k, a)| a.dual(k))
            .collect()
    }

    /// Point `σ_i ⊙ e^t` of octant `i`.
    pub fn x_point(&self, octant: usize, flat: usize) -> Vec<f64> {
        let signs = OctantIndex(octant).signs(self.dim());
        self.t_point(flat)
            .iter()
            .zip(signs)
            .map(|(t, s)| s * t.exp())
            .collect()
    }

    /// Trapezoid weight times `Δt^n`.
    pub fn cell(&self, flat: usize) -> f64 {
        self.multi_index(flat)
            .iter()
            .zip(&self.axes)
            .map(|(&k, a)| a.weight(k) * a.dt())
            .product()
    }

    pub fn ds_volume(&self) -> f64 {
        self.axes.iter().map(|a| a.ds()).product()
    }

    /// Smallest `Δt` over the axes.
    pub fn min_dt(&self) -> f64 {
        self.axes
            .iter()
            .map(|a| a.dt())
            .fold(f64::INFINITY, f64::min)
    }
}

/// Samples of a function on every octant's copy of a [`LogGrid`]; zero
/// outside the grid box.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    pub grid: LogGrid,
    /// `data[i][flat]` is `f(σ_i ⊙ e^{t_flat})`.
    pub data: Vec<Vec<Complex64>>,
}

fn half_sum(t: &[f64]) -> f64 {
    0.5 * t.iter().sum::<f64>()
}

impl GridFunction {
    pub fn zeros(grid: &LogGrid) -> GridFunction {
        GridFunction {
            grid: grid.clone(),
            data: vec![vec![Complex64::new(0.0, 0.0); grid.len()]; octant_count(grid.dim())],
        }
    }

    /// Point samples `f(x)` of a closure on one octant.
    pub fn from_fn<F: Fn(&[f64]) -> Complex64>(
        grid: &LogGrid,
        octant: usize,
        f: F,
    ) -> GridFunction {
        let mut out = GridFunction::zeros(grid);
        for k in 0..grid.len() {
            out.data[octant][k] = f(&grid.x_point(octant, k));
        }
        out
    }

    /// Samples `|x|^{-1/2} g(log|x|)` on one octant, from the log-picture
    /// profile `g`.
    pub fn from_log_profile<F: Fn(&[f64]) -> f64>(
        grid: &LogGrid,
        octant: usize,
        g: F,
    ) -> GridFunction {
        let mut out = GridFunction::zeros(grid);
        for k in 0..grid.len() {
            let t = grid.t_point(k);
            out.data[octant][k] = Complex64::new(g(&t) * (-half_sum(&t)).exp(), 0.0);
        }
        out
    }

    /// `|x|^{-1/2} 1[log|x| ∈ box]` on one octant, sampled by exact cell
    /// averages of the log-picture indicator so that box faces between grid
    /// points carry their fractional share.
    pub fn log_box(grid: &LogGrid, octant: usize, lo: &[f64], hi: &[f64]) -> GridFunction {
        let overlap = |a: &LogAxis, k: usize, lo: f64, hi: f64| {
            let dt = a.dt();
            let t = a.t(k);
            let (c0, c1) = (t - 0.5 * dt, t + 0.5 * dt);
            ((c1.min(hi) - c0.max(lo)).max(0.0)) / dt
        };
        let mut out = GridFunction::zeros(grid);
        for k in 0..grid.len() {
            let idx = grid.multi_index(k);
            let frac: f64 = (0..grid.dim())
                .map(|l| overlap(&grid.axes[l], idx[l], lo[l], hi[l]))
                .product();
            if frac > 0.0 {
                let t = grid.t_point(k);
                out.data[octant][k] = Complex64::new(frac * (-half_sum(&t)).exp(), 0.0);
            }
        }
        out
    }

    /// Gaussian bump `exp(-|t - c|^2 / (2 w^2))` in the log picture.
    pub fn log_gaussian(grid: &LogGrid, octant: usize, center: &[f64], width: f64) -> GridFunction {
        GridFunction::from_log_profile(grid, octant, |t| {
            let r2: f64 = t.iter().zip(center).map(|(a, b)| (a - b).powi(2)).sum();
            (-r2 / (2.0 * width * width)).exp()
        })
    }

    /// Samples of a DSL test function on every octant.
    pub fn from_spec(fs: &FunctionSpec, grid: &LogGrid) -> Result<GridFunction> {
        if fs.n != grid.dim() {
            return Err(Error::Dimension(format!(
                "function has dimension {}, grid {}",
                fs.n,
                grid.dim()
            )));
        }
        let mut out = GridFunction::zeros(grid);
        for i in 0..octant_count(fs.n) {
            for k in 0..grid.len() {
                out.data[i][k] = Complex64::new(fs.eval(&grid.x_point(i, k))?, 0.0);
            }
        }
        Ok(out)
    }

    /// Keep only octant `i`.
    pub fn restrict(&self, i: usize) -> GridFunction {
        let mut out = GridFunction::zeros(&self.grid);
        out.data[i] = self.data[i].clone();
        out
    }

    /// `<f, h> = Σ_i ∫_{U_i} f conj(h) dx` by the trapezoid rule.
    pub fn inner(&self, other: &GridFunction) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..self.data.len() {
            for k in 0..self.grid.len() {
                let t = self.grid.t_point(k);
                let jac = (2.0 * half_sum(&t)).exp() * self.grid.cell(k);
                acc += self.data[i][k] * other.data[i][k].conj() * jac;
            }
        }
        acc
    }

    pub fn norm(&self) -> f64 {
        self.inner(self).re.max(0.0).sqrt()
    }

    pub fn norm_on(&self, i: usize) -> f64 {
        self.restrict(i).norm()
    }

    /// Multilinear interpolation in log coordinates, with `f` extended by
    /// zero one step beyond the grid box; zero further out and on coordinate
    /// hyperplanes.
    pub fn eval(&self, y: &[f64]) -> Complex64 {
        let Ok(OctantIndex(oct)) = octant_of_point(y) else {
            return Complex64::new(0.0, 0.0);
        };
        let t: Vec<f64> = y.iter().map(|v| v.abs().ln()).collect();
        self.eval_log(oct, &t)
    }

    pub fn eval_log(&self, oct: usize, t: &[f64]) -> Complex64 {
        let n = self.grid.dim();
        let mut lower = [0isize; 8];
        let mut frac = [0.0f64; 8];
        for l in 0..n {
            let a = &self.grid.axes[l];
            let r = (t[l] - a.t_min) / a.dt();
            if !(r > -1.0 && r < a.m as f64) {
                return Complex64::new(0.0, 0.0);
            }
            let k0 = r.floor();
            lower[l] = k0 as isize;
            frac[l] = r - k0;
        }
        let data = &self.data[oct];
        let mut acc = Complex64::new(0.0, 0.0);
        'corners: for corner in 0..(1usize << n) {
            let mut w = 1.0;
            let mut idx = 0usize;
            for l in 0..n {
                let m = self.grid.axes[l].m;
                let (k, wl) = if corner >> l & 1 == 1 {
                    (lower[l] + 1, frac[l])
                } else {
                    (lower[l], 1.0 - frac[l])
                };
                if wl == 0.0 || k < 0 || k >= m as isize {
                    continue 'corners;
                }
                w *= wl;
                idx = idx * m + k as usize;
            }
            acc += data[idx] * w;
        }
        acc
    }

    /// CSV: `octant, t_1..t_n, re, im`, one row per sample.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let n = self.grid.dim();
        let mut header = vec!["octant".to_string()];
        header.extend((1..=n).map(|l| format!("t_{l}")));
        header.extend(["re", "im"].map(String::from));
        w.write_record(&header)?;
        for (i, d) in self.data.iter().enumerate() {
            for (k, v) in d.iter().enumerate() {
                let mut row = vec![i.to_string()];
                row.extend(self.grid.t_point(k).iter().map(|t| t.to_string()));
                row.push(v.re.to_string());
                row.push(v.im.to_string());
                w.write_record(&row)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Read rows written by [`write_csv`](Self::write_csv) onto `grid`. Each
    /// row's t-coordinates must hit a grid point to within `1e-9 Δt`.
    pub fn read_csv<R: Read>(grid: &LogGrid, input: R) -> Result<GridFunction> {
        let n = grid.dim();
        let mut out = GridFunction::zeros(grid);
        let mut r = csv::Reader::from_reader(input);
        for (row, rec) in r.records().enumerate() {
            let rec = rec?;
            if rec.len() != n + 3 {
                return Err(Error::Schema {
                    path: format!("row {}", row + 1),
                    message: format!("expected {} columns, found {}", n + 3, rec.len()),
                });
            }
            let num = |c: usize| -> Result<f64> {
                rec[c].trim().parse::<f64>().map_err(|e| Error::Schema {
                    path: format!("row {} column {}", row + 1, c + 1),
                    message: e.to_string(),
                })
            };
            let oct = num(0)? as usize;
            if oct >= out.data.len() {
                return Err(Error::Schema {
                    path: format!("row {} column 1", row + 1),
                    message: format!("octant {oct} out of range"),
                });
            }
            let mut flat = 0;
            for l in 0..n {
                let a = &grid.axes[l];
                let r = (num(l + 1)? - a.t_min) / a.dt();
                let k = r.round();
                if (r - k).abs() > 1e-9 || k < 0.0 || k >= a.m as f64 {
                    return Err(Error::Schema {
                        path: format!("row {} column {}", row + 1, l + 2),
                        message: "t-coordinate is not a grid point".into(),
                    });
                }
                flat = flat * a.m + k as usize;
            }
            out.data[oct][flat] = Complex64::new(num(n + 1)?, num(n + 2)?);
        }
        Ok(out)
    }
}

// ---------------------------------------------------------------------------
// transforms

/// Transform samples on the dual grid of one octant.
#[derive(Debug, Clone, PartialEq)]
pub struct MellinSamples {
    pub grid: LogGrid,
    pub octant: usize,
    pub values: Vec<Complex64>,
    /// Largest boundary sample of `g` relative to its peak.
    pub leakage: f64,
}

/// Leakage above this ratio means the support touches the grid boundary.
pub const LEAKAGE_WARNING: f64 = 1e-12;

impl MellinSamples {
    pub fn leaks(&self) -> bool {
        self.leakage > LEAKAGE_WARNING
    }

    pub fn norm(&self) -> f64 {
        (self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.ds_volume()).sqrt()
    }
}

fn fft_nd(data: &mut [Complex64], dims: &[usize], dir: FftDirection) {
    let mut planner = FftPlanner::<f64>::new();
    let n = dims.len();
    let total: usize = dims.iter().product();
    for l in 0..n {
        let len = dims[l];
        let stride: usize = dims[l + 1..].iter().product();
        let fft = planner.plan_fft(len, dir);
        let mut line = vec![Complex64::new(0.0, 0.0); len];
        let outer = total / (len * stride);
        for o in 0..outer {
            for inner in 0..stride {
                let start = o * len * stride + inner;
                for k in 0..len {
                    line[k] = data[start + k * stride];
                }
                fft.process(&mut line);
                for k in 0..len {
                    data[start + k * stride] = line[k];
                }
            }
        }
    }
}

fn normalization(grid: &LogGrid) -> f64 {
    let n = grid.dim() as f64;
    (2.0 * std::f64::consts::PI).powf(-n / 2.0)
}

pub fn mellin_forward(f: &GridFunction, i: OctantIndex) -> MellinSamples {
    let grid = &f.grid;
    let dims: Vec<usize> = grid.axes.iter().map(|a| a.m).collect();
    let mut buf = Vec::with_capacity(grid.len());
    let mut peak = 0.0f64;
    let mut edge = 0.0f64;
    for k in 0..grid.len() {
        let t = grid.t_point(k);
        let g = f.data[i.0][k] * half_sum(&t).exp();
        peak = peak.max(g.norm());
        let idx = grid.multi_index(k);
        if idx
            .iter()
            .zip(&grid.axes)
            .any(|(&j, a)| j == 0 || j + 1 == a.m)
        {
            edge = edge.max(g.norm());
        }
        buf.push(g * grid.cell(k));
    }
    fft_nd(&mut buf, &dims, FftDirection::Inverse);
    let norm = normalization(grid);
    for (k, v) in buf.iter_mut().enumerate() {
        let s = grid.s_point(k);
        let phase: f64 = s.iter().zip(&grid.axes).map(|(s, a)| s * a.t_min).sum();
        *v *= Complex64::from_polar(norm, phase);
    }
    MellinSamples {
        grid: grid.clone(),
        octant: i.0,
        values: buf,
        leakage: if peak > 0.0 { edge / peak } else { 0.0 },
    }
}

/// Exact inverse of [`mellin_forward`] on the grid; the result lives on
/// octant `i` only.
pub fn mellin_inverse(samples: &MellinSamples, i: OctantIndex) -> GridFunction {
    let grid = &samples.grid;
    let dims: Vec<usize> = grid.axes.iter().map(|a| a.m).collect();
    let norm = normalization(grid);
    let mut buf: Vec<Complex64> = samples
        .values
        .iter()
        .enumerate()
        .map(|(k, v)| {
            let s = grid.s_point(k);
            let phase: f64 = s.iter().zip(&grid.axes).map(|(s, a)| s * a.t_min).sum();
            v * Complex64::from_polar(1.0 / norm, -phase)
        })
        .collect();
    fft_nd(&mut buf, &dims, FftDirection::Forward);
    let scale = 1.0 / grid.len() as f64;
    let mut out = GridFunction::zeros(grid);
    for (k, v) in buf.into_iter().enumerate() {
        let t = grid.t_point(k);
        out.data[i.0][k] = v * (scale / grid.cell(k) * (-half_sum(&t)).exp());
    }
    out
}

// ---------------------------------------------------------------------------
// application

/// `(Hf)(x) = Σ_k w_k K(u_k) f(A(u_k) x)` with `A = C diag(a) C^T`.
pub fn apply_hausdorff(
    spec: &OperatorSpec,
    nodes: &NodeSet,
    f: &GridFunction,
    xs: &[Vec<f64>],
) -> Result<Vec<Complex64>> {
    for x in xs {
        octant_of_point(x)?;
        if x.len() != spec.n {
            return Err(Error::Dimension(format!(
                "point {x:?} is not in R^{}",
                spec.n
            )));
        }
    }
    let diag = spec.dilations.is_identity_conjugator();
    let mats: Vec<Option<Vec<f64>>> = nodes
        .iter()
        .map(|nd| (!diag).then(|| spec.dilation_matrix(nd.eig)))
        .collect();
    let n = spec.n;
    let values = Execution::default().map_indexed(xs.len(), |p| {
        let x = &xs[p];
        let mut acc = Complex64::new(0.0, 0.0);
        let mut y = vec![0.0; n];
        for (k, nd) in nodes.iter().enumerate() {
            if nd.kernel == 0.0 {
                continue;
            }
            match &mats[k] {
                None => {
                    for l in 0..n {
                        y[l] = nd.eig[l] * x[l];
                    }
                }
                Some(a) => {
                    for r in 0..n {
                        y[r] = (0..n).map(|c| a[r * n + c] * x[c]).sum();
                    }
                }
            }
            acc += f.eval(&y) * (nd.weight * nd.kernel);
        }
        acc
    });
    Ok(values)
}

/// `H_ij f_j` for the diagonalized family, sampled on octant `i`:
/// `Σ_{δ(u_k) = i^j} w_k K(u_k) f_j(a(u_k) ⊙ x)`.
///
/// On the lattice a shift by `log|a|` has the same fractional part at every
/// grid point, so interpolating `f_j` at all shifted points is a correlation
/// of `f_j` with a lattice kernel holding each node's amplitude split over
/// the `2^n` surrounding offsets. That correlation runs through a zero-padded
/// FFT when the padded box is small enough, and pointwise otherwise; both
/// agree with [`GridFunction::eval_log`] up to rounding.
pub fn block_apply(
    nodes: &NodeSet,
    f: &GridFunction,
    i: OctantIndex,
    j: OctantIndex,
) -> GridFunction {
    let grid = &f.grid;
    let class = i.0 ^ j.0;
    let selected: Vec<(f64, Vec<f64>)> = nodes
        .iter()
        .filter(|nd| nd.class == class && nd.kernel != 0.0)
        .map(|nd| {
            (
                nd.weight * nd.kernel,
                nd.eig.iter().map(|a| a.abs().ln()).collect(),
            )
        })
        .collect();
    let padded: Vec<usize> = grid
        .axes
        .iter()
        .map(|a| (3 * a.m - 2).next_power_of_two())
        .collect();
    let values = if padded.iter().product::<usize>() <= MAX_CORRELATION_LEN {
        lattice_correlation(&selected, &f.data[j.0], grid, &padded)
    } else {
        pointwise_shifts(&selected, f, j.0)
    };
    let mut out = GridFunction::zeros(grid);
    out.data[i.0] = values;
    out
}

/// Largest zero-padded box, in points, for the FFT path of [`block_apply`].
const MAX_CORRELATION_LEN: usize = 1 << 22;

fn pointwise_shifts(selected: &[(f64, Vec<f64>)], f: &GridFunction, j: usize) -> Vec<Complex64> {
    let grid = &f.grid;
    let n = grid.dim();
    Execution::default().map_indexed(grid.len(), |k| {
        let t = grid.t_point(k);
        let mut shifted = vec![0.0; n];
        let mut acc = Complex64::new(0.0, 0.0);
        for (amp, la) in selected {
            for l in 0..n {
                shifted[l] = t[l] + la[l];
            }
            acc += f.eval_log(j, &shifted) * *amp;
        }
        acc
    })
}

/// Lattice kernel `E`: offsets `d` (one per axis) with summed weights, in
/// ascending offset order. Offsets that cannot reach the grid are dropped.
fn lattice_kernel(selected: &[(f64, Vec<f64>)], grid: &LogGrid) -> Vec<(Vec<i64>, f64)> {
    let n = grid.dim();
    let mut taps: Vec<(Vec<i64>, f64)> = Vec::new();
    'nodes: for (amp, la) in selected {
        let mut lower = [0i64; 8];
        let mut frac = [0.0f64; 8];
        for l in 0..n {
            let r = la[l] / grid.axes[l].dt();
            if !r.is_finite() {
                continue 'nodes;
            }
            lower[l] = r.floor() as i64;
            frac[l] = r - r.floor();
        }
        'corners: for corner in 0..(1usize << n) {
            let mut w = *amp;
            let mut d = Vec::with_capacity(n);
            for l in 0..n {
                let m = grid.axes[l].m as i64;
                let (k, wl) = if corner >> l & 1 == 1 {
                    (lower[l] + 1, frac[l])
                } else {
                    (lower[l], 1.0 - frac[l])
                };
                if wl == 0.0 || k <= -m || k >= m {
                    continue 'corners;
                }
                w *= wl;
                d.push(k);
            }
            taps.push((d, w));
        }
    }
    // stable sort keeps node order within an offset, so sums are reproducible
    taps.sort_by(|a, b| a.0.cmp(&b.0));
    let mut merged: Vec<(Vec<i64>, f64)> = Vec::new();
    for (d, w) in taps {
        match merged.last_mut() {
            Some(last) if last.0 == d => last.1 += w,
            _ => merged.push((d, w)),
        }
    }
    merged
}

/// `out[p] = Σ_d E[d] f[p + d]`, directly when `E` has few taps and
/// otherwise as the circular convolution of `f` with `E` reflected. The
/// padding `L >= 3m - 2` per axis keeps the wrap-around away from `p < m`.
fn lattice_correlation(
    selected: &[(f64, Vec<f64>)],
    f: &[Complex64],
    grid: &LogGrid,
    padded: &[usize],
) -> Vec<Complex64> {
    let taps = lattice_kernel(selected, grid);
    let total: usize = padded.iter().product();
    let fft_cost = 3.0 * total as f64 * (total as f64).log2();
    if (taps.len() * grid.len()) as f64 <= fft_cost {
        sparse_correlation(&taps, f, grid)
    } else {
        fft_correlation(&taps, f, grid, padded)
    }
}

fn fft_correlation(
    taps: &[(Vec<i64>, f64)],
    f: &[Complex64],
    grid: &LogGrid,
    padded: &[usize],
) -> Vec<Complex64> {
    let total: usize = padded.iter().product();
    let mut kernel = vec![Complex64::new(0.0, 0.0); total];
    for (d, w) in taps {
        let idx = d.iter().zip(padded).fold(0, |acc, (&k, &p)| {
            acc * p + (-k).rem_euclid(p as i64) as usize
        });
        kernel[idx] += w;
    }
    let mut signal = vec![Complex64::new(0.0, 0.0); total];
    for k in 0..grid.len() {
        let idx = grid.multi_index(k);
        let flat = idx.iter().zip(padded).fold(0, |acc, (&x, &p)| acc * p + x);
        signal[flat] = f[k];
    }
    fft_nd(&mut kernel, padded, FftDirection::Forward);
    fft_nd(&mut signal, padded, FftDirection::Forward);
    for (s, k) in signal.iter_mut().zip(&kernel) {
        *s *= k;
    }
    fft_nd(&mut signal, padded, FftDirection::Inverse);
    let scale = 1.0 / total as f64;
    (0..grid.len())
        .map(|k| {
            let idx = grid.multi_index(k);
            let flat = idx.iter().zip(padded).fold(0, |acc, (&x, &p)| acc * p + x);
            signal[flat] * scale
        })
        .collect()
}

fn sparse_correlation(taps: &[(Vec<i64>, f64)], f: &[Complex64], grid: &LogGrid) -> Vec<Complex64> {
    let n = grid.dim();
    Execution::default().map_indexed(grid.len(), |k| {
        let p = grid.multi_index(k);
        let mut acc = Complex64::new(0.0, 0.0);
        'taps: for (d, w) in taps {
            let mut flat = 0usize;
            for l in 0..n {
                let q = p[l] as i64 + d[l];
                let m = grid.axes[l].m;
                if q < 0 || q >= m as i64 {
                    continue 'taps;
                }
                flat = flat * m + q as usize;
            }
            acc += f[flat] * *w;
        }
        acc
    })
}

/// `||M_i(H_ij f) - φ_ij M_j f|| / ||M_j f||` over the dual grid.
pub fn diagonalization_residual(
    nodes: &NodeSet,
    f: &GridFunction,
    i: OctantIndex,
    j: OctantIndex,
) -> f64 {
    let coeffs = dual_coefficients(nodes, &f.grid);
    block_residual(nodes, &coeffs, f, i, j)
}

/// Residuals of every block, `r[i][j]`, testing block `(i, j)` on the
/// octant-`j` part of `f`. The symbol is evaluated once for all blocks.
pub fn diagonalization_residuals(nodes: &NodeSet, f: &GridFunction) -> Vec<Vec<f64>> {
    let coeffs = dual_coefficients(nodes, &f.grid);
    let octants = octant_count(f.grid.dim());
    (0..octants)
        .map(|i| {
            (0..octants)
                .map(|j| block_residual(nodes, &coeffs, f, OctantIndex(i), OctantIndex(j)))
                .collect()
        })
        .collect()
}

/// XOR coefficients at every dual frequency of `grid`, in flat order.
fn dual_coefficients(nodes: &NodeSet, grid: &LogGrid) -> Vec<Vec<Complex64>> {
    let axes: Vec<Vec<f64>> = grid
        .axes
        .iter()
        .map(|a| (0..a.m).map(|k| a.dual(k)).collect())
        .collect();
    SymbolEvaluator::new(nodes).tensor_coefficients(&axes, Execution::default())
}

fn block_residual(
    nodes: &NodeSet,
    coeffs: &[Vec<Complex64>],
    f: &GridFunction,
    i: OctantIndex,
    j: OctantIndex,
) -> f64 {
    let fj = f.restrict(j.0);
    let mj = mellin_forward(&fj, j);
    let denom = mj.norm();
    if denom == 0.0 {
        return 0.0;
    }
    let hij = block_apply(nodes, &fj, i, j);
    let mi = mellin_forward(&hij, i);
    let class = i.0 ^ j.0;
    let grid = &f.grid;
    let diffs: f64 = (0..grid.len())
        .map(|k| (mi.values[k] - coeffs[k][class] * mj.values[k]).norm_sqr())
        .sum();
    (diffs * grid.ds_volume()).sqrt() / denom
}

// ---------------------------------------------------------------------------
// Galerkin oracle

/// Cells per axis for a basis of `size` functions in dimension `n`.
fn cells_per_axis(n: usize, size: usize) -> Result<usize> {
    let per_octant = size / octant_count(n);
    if per_octant == 0 || per_octant * octant_count(n) != size {
        return Err(Error::Grid(format!(
            "basis size {size} is not a multiple of 2^{n}"
        )));
    }
    let c = (per_octant as f64).powf(1.0 / n as f64).round() as usize;
    if c.pow(n as u32) != per_octant {
        return Err(Error::Grid(format!(
            "basis size {size} needs 2^{n} times a perfect {n}-th power"
        )));
    }
    Ok(c)
}

/// `<H e_q, e_p>` for the flat log-cell basis
/// `e_p(x) = |x|^{-1/2} 1[log|x| ∈ cell_p] / sqrt(|cell_p|)`.
///
/// The cells split the log-grid box into equal pieces on every octant;
/// basis index `p = octant * cells + cell`. Since `e_q(a ⊙ x)` is again a
/// flat cell, each entry is an exact cell average:
/// `Σ_k w_k K_k |a_k|^{-1/2} |cell_p ∩ (cell_q - log|a_k|)| / |cell|`,
/// collected over nodes whose sign class links the two octants. The matrix
/// represents the diagonalized operator, which is unitarily equivalent to
/// `H`.
pub fn galerkin_matrix(nodes: &NodeSet, size: usize, grid: &LogGrid) -> Result<DMatrix<Complex64>> {
    let n = grid.dim();
    let c = cells_per_axis(n, size)?;
    let per_octant = c.pow(n as u32);
    let widths: Vec<f64> = grid
        .axes
        .iter()
        .map(|a| (a.t_max - a.t_min) / c as f64)
        .collect();
    let cell_index = |flat: usize| -> Vec<usize> {
        let mut idx = vec![0; n];
        let mut f = flat;
        for l in (0..n).rev() {
            idx[l] = f % c;
            f /= c;
        }
        idx
    };
    let nodes_data: Vec<(usize, f64, Vec<f64>)> = nodes
        .iter()
        .filter(|nd| nd.kernel != 0.0)
        .map(|nd| {
            (
                nd.class,
                nd.weight * nd.kernel / nd.abs_det.sqrt(),
                nd.eig.iter().map(|a| a.abs().ln()).collect(),
            )
        })
        .collect();
    let overlap = |lo1: f64, lo2: f64, w: f64| ((lo1 + w).min(lo2 + w) - lo1.max(lo2)).max(0.0);
    let entries = Execution::default().map_indexed(size * size, |pq| {
        let (p, q) = (pq / size, pq % size);
        let (op, cp) = (p / per_octant, cell_index(p % per_octant));
        let (oq, cq) = (q / per_octant, cell_index(q % per_octant));
        let class = op ^ oq;
        let mut acc = 0.0;
        for (cl, amp, la) in &nodes_data {
            if *cl != class {
                continue;
            }
            let mut frac = 1.0;
            for l in 0..n {
                let lo_p = grid.axes[l].t_min + cp[l] as f64 * widths[l] + la[l];
                let lo_q = grid.axes[l].t_min + cq[l] as f64 * widths[l];
                frac *= overlap(lo_p, lo_q, widths[l]) / widths[l];
                if frac == 0.0 {
                    break;
                }
            }
            acc += amp * frac;
        }
        Complex64::new(acc, 0.0)
    });
    Ok(DMatrix::from_row_slice(size, size, &entries))
}

/// Log-cell width used by the compactness probe.
pub const PROBE_CELL_WIDTH: f64 = 0.5;

/// Singular values of the Galerkin matrix on a window that grows with
/// `size` at fixed cell width, centred at `t = 0`.
pub fn galerkin_singular_values(
    spec: &OperatorSpec,
    nodes: &NodeSet,
    size: usize,
) -> Result<Vec<f64>> {
    let n = spec.n;
    let c = cells_per_axis(n, size)?;
    let half = 0.5 * c as f64 * PROBE_CELL_WIDTH;
    let grid = LogGrid::new(n, -half, half, 8)?;
    let g = galerkin_matrix(nodes, size, &grid)?;
    let mut sv: Vec<f64> = g.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    Ok(sv)
}
