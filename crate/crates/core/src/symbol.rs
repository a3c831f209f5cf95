//! Matrix symbols.
//!
//! The entry `phi_ij(s)` integrates `K(u) |a(u)|^{-1/2 - is}` over the nodes
//! whose sign class equals `i ^ j`, so the whole `2^n x 2^n` matrix is fixed
//! by the `2^n` XOR coefficients `c_delta(s)`. Those are what we store; the
//! dense matrix is a derived view, and eigenvalues come from a Walsh-Hadamard
//! transform of the coefficients.

use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hadamard::{fwht, ifwht};
use crate::octant::{octant_count, pairing_permutation};
use crate::par::Execution;
use crate::quadrature::NodeSet;
use crate::spec::{
    adjoint_kernel_expr, reciprocal_expr, DilationFamily, MeasureSpec, OperatorSpec, ScalarFn,
};

/// Node data prepared for fast symbol evaluation.
#[derive(Debug, Clone)]
pub struct SymbolEvaluator {
    n: usize,
    amplitude: Vec<f64>,
    log_abs: Vec<f64>,
    class: Vec<usize>,
}

impl SymbolEvaluator {
    pub fn new(nodes: &NodeSet) -> Self {
        let n = nodes.dim();
        let mut amplitude = Vec::with_capacity(nodes.len());
        let mut log_abs = Vec::with_capacity(nodes.len() * n);
        let mut class = Vec::with_capacity(nodes.len());
        for nd in nodes.iter().filter(|nd| nd.kernel != 0.0) {
            amplitude.push(nd.weight * nd.kernel / nd.abs_det.sqrt());
            log_abs.extend(nd.eig.iter().map(|a| a.abs().ln()));
            class.push(nd.class);
        }
        SymbolEvaluator {
            n,
            amplitude,
            log_abs,
            class,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// All `2^n` XOR coefficients at frequency `s`, accumulated in node order.
    pub fn coefficients(&self, s: &[f64]) -> Vec<Complex64> {
        assert_eq!(s.len(), self.n, "frequency has wrong dimension");
        let mut c = vec![Complex64::new(0.0, 0.0); octant_count(self.n)];
        let n = self.n;
        for (k, &amp) in self.amplitude.iter().enumerate() {
            let logs = &self.log_abs[k * n..(k + 1) * n];
            let phase: f64 = -logs.iter().zip(s).map(|(l, sj)| l * sj).sum::<f64>();
            let (sin, cos) = phase.sin_cos();
            c[self.class[k]] += Complex64::new(amp * cos, amp * sin);
        }
        c
    }

    pub fn symbol(&self, s: &[f64]) -> SymbolMatrix {
        SymbolMatrix {
            s: s.to_vec(),
            coeffs: self.coefficients(s),
        }
    }

    /// Symbols at every point of a tensor grid, in flat index order.
    pub fn grid_symbols(&self, grid: &GridSpec, exec: Execution) -> Vec<SymbolMatrix> {
        let axes: Vec<Vec<f64>> = grid
            .axes
            .iter()
            .map(|a| (0..a.count).map(|i| a.point(i)).collect())
            .collect();
        self.tensor_coefficients(&axes, exec)
            .into_iter()
            .enumerate()
            .map(|(k, coeffs)| SymbolMatrix {
                s: grid.point(k),
                coeffs,
            })
            .collect()
    }

    /// Coefficients at every point of the tensor product of `axes`, row-major
    /// with the first axis slowest.
    ///
    /// In two or more dimensions the phase `e^{-i s·log|a|}` factors over
    /// the axes, so per-axis tables replace one `sin_cos` per node and point
    /// with `n` complex products.
    pub fn tensor_coefficients(&self, axes: &[Vec<f64>], exec: Execution) -> Vec<Vec<Complex64>> {
        let n = self.n;
        assert_eq!(axes.len(), n, "frequency grid has wrong dimension");
        let nodes = self.amplitude.len();
        let len: usize = axes.iter().map(|a| a.len()).product();
        let index = |mut flat: usize| {
            let mut idx = vec![0; n];
            for l in (0..n).rev() {
                idx[l] = flat % axes[l].len();
                flat /= axes[l].len();
            }
            idx
        };
        let table_len: usize = axes.iter().map(|a| a.len() * nodes).sum();
        if n < 2 || table_len > MAX_PHASE_TABLE {
            return exec.map_indexed(len, |k| {
                let s: Vec<f64> = index(k).iter().zip(axes).map(|(&i, a)| a[i]).collect();
                self.coefficients(&s)
            });
        }
        let tables: Vec<Vec<Complex64>> = (0..n)
            .map(|l| {
                let mut t = Vec::with_capacity(axes[l].len() * nodes);
                for &s in &axes[l] {
                    t.extend(
                        (0..nodes)
                            .map(|k| Complex64::from_polar(1.0, -self.log_abs[k * n + l] * s)),
                    );
                }
                t
            })
            .collect();
        exec.map_indexed(len, |flat| {
            let idx = index(flat);
            let rows: Vec<&[Complex64]> = (0..n)
                .map(|l| &tables[l][idx[l] * nodes..(idx[l] + 1) * nodes])
                .collect();
            let mut c = vec![Complex64::new(0.0, 0.0); octant_count(n)];
            for (k, &amp) in self.amplitude.iter().enumerate() {
                let mut z = rows[0][k] * amp;
                for row in &rows[1..] {
                    z *= row[k];
                }
                c[self.class[k]] += z;
            }
            c
        })
    }
}

/// Largest combined phase-table size, in entries, before falling back to direct
/// evaluation.
const MAX_PHASE_TABLE: usize = 1 << 24;

/// `c_delta(s)` for one sign class.
pub fn xor_coefficient(nodes: &NodeSet, delta: usize, s: &[f64]) -> Complex64 {
    SymbolEvaluator::new(nodes).coefficients(s)[delta]
}

/// `Phi(s)` with the normality check.
pub fn symbol_matrix(nodes: &NodeSet, s: &[f64]) -> Result<SymbolMatrix> {
    let m = SymbolEvaluator::new(nodes).symbol(s);
    let defect = m.normality_defect();
    let scale = m.norm().powi(2);
    if defect > 1e-10 * scale.max(f64::MIN_POSITIVE) && defect > 1e-300 {
        return Err(Error::NotNormal { defect });
    }
    Ok(m)
}

/// Scalar symbol `phi(s)` of a positive definite family.
pub fn scalar_symbol(nodes: &NodeSet, s: &[f64]) -> Result<Complex64> {
    if let Some((k, nd)) = nodes
        .iter()
        .enumerate()
        .find(|(_, nd)| nd.class != 0 && nd.kernel != 0.0)
    {
        return Err(Error::NotPositiveDefinite {
            node: k,
            class: nd.class,
        });
    }
    Ok(xor_coefficient(nodes, 0, s))
}

/// The symbol at one frequency, stored as XOR coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolMatrix {
    pub s: Vec<f64>,
    pub coeffs: Vec<Complex64>,
}

impl SymbolMatrix {
    pub fn from_coeffs(s: Vec<f64>, coeffs: Vec<Complex64>) -> Self {
        assert!(coeffs.len().is_power_of_two());
        SymbolMatrix { s, coeffs }
    }

    /// Matrix order `2^n`.
    pub fn order(&self) -> usize {
        self.coeffs.len()
    }

    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        self.coeffs[i ^ j]
    }

    /// Row-major dense matrix.
    pub fn to_dense(&self) -> Vec<Complex64> {
        let m = self.order();
        let mut out = Vec::with_capacity(m * m);
        for i in 0..m {
            for j in 0..m {
                out.push(self.entry(i, j));
            }
        }
        out
    }

    /// Eigenvalues `lambda_chi`, indexed by the character `chi`.
    pub fn eigenvalues(&self) -> Vec<Complex64> {
        let mut v = self.coeffs.clone();
        fwht(&mut v);
        v
    }

    pub fn det(&self) -> Complex64 {
        self.eigenvalues().into_iter().product()
    }

    /// Operator norm on `C^{2^n}`; equals the spectral radius since the
    /// matrix is normal.
    pub fn norm(&self) -> f64 {
        self.eigenvalues()
            .iter()
            .map(|l| l.norm())
            .fold(0.0, f64::max)
    }

    /// Conjugate transpose; symmetric, so entrywise conjugation.
    pub fn adjoint(&self) -> SymbolMatrix {
        SymbolMatrix {
            s: self.s.clone(),
            coeffs: self.coeffs.iter().map(|c| c.conj()).collect(),
        }
    }

    /// Matrix product, computed as an XOR convolution of the coefficients.
    pub fn mul(&self, other: &SymbolMatrix) -> SymbolMatrix {
        assert_eq!(self.order(), other.order());
        let m = self.order();
        let mut c = vec![Complex64::new(0.0, 0.0); m];
        for a in 0..m {
            for b in 0..m {
                c[a ^ b] += self.coeffs[a] * other.coeffs[b];
            }
        }
        SymbolMatrix {
            s: self.s.clone(),
            coeffs: c,
        }
    }

    /// Max-abs entry of `Phi Phi^* - Phi^* Phi`, from the dense matrices.
    pub fn normality_defect(&self) -> f64 {
        let m = self.order();
        let a = self.to_dense();
        let mut worst = 0.0f64;
        for i in 0..m {
            for j in 0..m {
                let mut aa = Complex64::new(0.0, 0.0);
                let mut ha = Complex64::new(0.0, 0.0);
                for k in 0..m {
                    aa += a[i * m + k] * a[j * m + k].conj();
                    ha += a[k * m + i].conj() * a[k * m + j];
                }
                worst = worst.max((aa - ha).norm());
            }
        }
        worst
    }

    /// Dense matrix reordered by [`pairing_permutation`] for reflection
    /// `mask`, exposing the `[[p I, m I], [m I, p I]]` block form.
    pub fn block_form(&self, mask: usize) -> Vec<Complex64> {
        let m = self.order();
        let n = m.trailing_zeros() as usize;
        let perm = pairing_permutation(n, mask);
        let mut out = Vec::with_capacity(m * m);
        for &i in &perm {
            for &j in &perm {
                out.push(self.entry(i, j));
            }
        }
        out
    }
}

/// Inverse symbol. The inverse of an XOR-structured matrix is XOR-structured,
/// so the coefficients come back through the Hadamard transform.
pub fn symbol_inverse(phi: &SymbolMatrix, tolerance: f64) -> Result<SymbolMatrix> {
    let mut lam = phi.eigenvalues();
    let det: Complex64 = lam.iter().product();
    if det.norm() <= tolerance {
        return Err(Error::Singular {
            s: phi.s.clone(),
            det: det.norm(),
        });
    }
    for l in lam.iter_mut() {
        *l = 1.0 / *l;
    }
    ifwht(&mut lam);
    Ok(SymbolMatrix {
        s: phi.s.clone(),
        coeffs: lam,
    })
}

// ---------------------------------------------------------------------------
// grids

/// One axis of a rectangular frequency grid, endpoints included.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl Axis {
    pub fn symmetric(half_width: f64, count: usize) -> Self {
        Axis {
            min: -half_width,
            max: half_width,
            count,
        }
    }

    pub fn point(&self, k: usize) -> f64 {
        if self.count == 1 {
            return self.min;
        }
        self.min + (self.max - self.min) * k as f64 / (self.count - 1) as f64
    }

    pub fn spacing(&self) -> f64 {
        (self.max - self.min) / (self.count - 1).max(1) as f64
    }
}

/// Rectangular grid of frequency points; the last axis varies fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub axes: Vec<Axis>,
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.axes.is_empty() {
            return Err(Error::Grid("grid needs at least one axis".into()));
        }
        for (l, a) in self.axes.iter().enumerate() {
            if a.count < 2 {
                return Err(Error::Grid(format!("axis {l} needs at least 2 points")));
            }
            if !(a.min < a.max) {
                return Err(Error::Grid(format!("axis {l} has min >= max")));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.count).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for l in (0..self.dim()).rev() {
            idx[l] = flat % self.axes[l].count;
            flat /= self.axes[l].count;
        }
        idx
    }

    pub fn point(&self, flat: usize) -> Vec<f64> {
        self.multi_index(flat)
            .iter()
            .zip(&self.axes)
            .map(|(&k, a)| a.point(k))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StructureTag {
    /// Only `c_0` is non-zero: `Phi = phi I`.
    DiagonalScalar,
    /// Only `c_{1..1}` is non-zero.
    AntidiagonalBlock,
    /// Exactly `c_0` and `c_{1..1}` are non-zero.
    XorBlock,
    General,
}

impl StructureTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            StructureTag::DiagonalScalar => "diagonal-scalar",
            StructureTag::AntidiagonalBlock => "antidiagonal-block",
            StructureTag::XorBlock => "xor-block",
            StructureTag::General => "general",
        }
    }
}

/// Coefficients below this magnitude count as zero for structure detection.
pub const STRUCTURE_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct SymbolGrid {
    pub grid: GridSpec,
    pub points: Vec<SymbolMatrix>,
    pub tag: StructureTag,
}

impl SymbolGrid {
    pub fn compute(nodes: &NodeSet, grid: &GridSpec, exec: Execution) -> Result<SymbolGrid> {
        grid.validate()?;
        if grid.dim() != nodes.dim() {
            return Err(Error::Dimension(format!(
                "grid has {} axes, operator dimension is {}",
                grid.dim(),
                nodes.dim()
            )));
        }
        let eval = SymbolEvaluator::new(nodes);
        let points = eval.grid_symbols(grid, exec);
        let mut out = SymbolGrid {
            grid: grid.clone(),
            points,
            tag: StructureTag::General,
        };
        out.tag = detect_structure(&out);
        Ok(out)
    }

    /// CSV export: `s_1..s_n`, then `re_c<d>,im_c<d>` for each class `d`
    /// in ascending order.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let n = self.grid.dim();
        let mut header: Vec<String> = (1..=n).map(|l| format!("s_{l}")).collect();
        for d in 0..octant_count(n) {
            header.push(format!("re_c{d}"));
            header.push(format!("im_c{d}"));
        }
        w.write_record(&header)?;
        for p in &self.points {
            let mut row: Vec<String> = p.s.iter().map(|v| v.to_string()).collect();
            for c in &p.coeffs {
                row.push(c.re.to_string());
                row.push(c.im.to_string());
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn detect_structure(grid: &SymbolGrid) -> StructureTag {
    let Some(first) = grid.points.first() else {
        return StructureTag::General;
    };
    let m = first.order();
    let full = m - 1;
    let mut nonzero = vec![false; m];
    for p in &grid.points {
        for (d, c) in p.coeffs.iter().enumerate() {
            if c.norm() > STRUCTURE_TOL {
                nonzero[d] = true;
            }
        }
    }
    let others = (1..full).any(|d| nonzero[d]);
    match (nonzero[0], nonzero[full], others) {
        (_, false, false) if full > 0 => StructureTag::DiagonalScalar,
        (false, true, false) => StructureTag::AntidiagonalBlock,
        (true, true, false) => StructureTag::XorBlock,
        _ if full == 0 => StructureTag::DiagonalScalar,
        _ => StructureTag::General,
    }
}

// ---------------------------------------------------------------------------
// spec algebra

/// Spec of the adjoint operator: kernel `K(v) |det A(v)|^{-1}` and
/// eigenvalues `1/a_j(v)`, on the same measure.
pub fn adjoint_spec(spec: &OperatorSpec) -> OperatorSpec {
    let eig_exprs: Option<Vec<_>> = spec
        .dilations
        .eigenvalues
        .iter()
        .map(|a| a.as_expr())
        .collect();
    let (kernel, eigenvalues) = match (spec.kernel.as_expr(), eig_exprs) {
        (Some(k), Some(eig)) => (
            ScalarFn::Expr(adjoint_kernel_expr(k, &eig)),
            eig.iter()
                .map(|e| ScalarFn::Expr(reciprocal_expr(e)))
                .collect(),
        ),
        _ => {
            // tabulated: evaluate on the atoms
            let atoms = match &spec.measure {
                MeasureSpec::AtomList { points } => points.iter().map(|p| p.0).collect::<Vec<_>>(),
                _ => unreachable!("tabulated functions only live on atom lists"),
            };
            let len = atoms.len();
            let mut k = Vec::with_capacity(len);
            let mut eig: Vec<Vec<f64>> = vec![Vec::with_capacity(len); spec.n];
            for &u in &atoms {
                let a = spec
                    .dilations
                    .eval(u)
                    .unwrap_or_else(|_| vec![f64::NAN; spec.n]);
                let det: f64 = a.iter().map(|v| v.abs()).product();
                let kv = spec.kernel.eval(u).unwrap_or(f64::NAN);
                k.push(if kv == 0.0 { 0.0 } else { kv / det });
                for (l, v) in a.iter().enumerate() {
                    eig[l].push(1.0 / v);
                }
            }
            (
                ScalarFn::Table(Arc::from(k)),
                eig.into_iter()
                    .map(|t| ScalarFn::Table(Arc::from(t)))
                    .collect(),
            )
        }
    };
    OperatorSpec {
        name: format!("{}-adjoint", spec.name),
        n: spec.n,
        measure: spec.measure.clone(),
        kernel,
        dilations: DilationFamily {
            eigenvalues,
            conjugator: spec.dilations.conjugator.clone(),
        },
        quadrature: spec.quadrature.clone(),
    }
}

/// Product operator `H_1 H_2` over the product of the two node sets,
/// materialized as an atom list with tabulated kernel `K_1(u) K_2(v)` and
/// eigenvalues `a_j(u) b_j(v)`.
pub fn compose_specs(
    spec1: &OperatorSpec,
    nodes1: &NodeSet,
    spec2: &OperatorSpec,
    nodes2: &NodeSet,
) -> Result<OperatorSpec> {
    if spec1.n != spec2.n {
        return Err(Error::Dimension(format!(
            "cannot compose dimensions {} and {}",
            spec1.n, spec2.n
        )));
    }
    let c_diff = spec1
        .dilations
        .conjugator
        .iter()
        .zip(&spec2.dilations.conjugator)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    if c_diff > 1e-12 {
        return Err(Error::ConjugatorMismatch);
    }
    let n = spec1.n;
    let len = nodes1.len() * nodes2.len();
    let mut points = Vec::with_capacity(len);
    let mut kernel = Vec::with_capacity(len);
    let mut eig: Vec<Vec<f64>> = vec![Vec::with_capacity(len); n];
    for x in nodes1.iter() {
        for y in nodes2.iter() {
            points.push((points.len() as f64, x.weight * y.weight));
            kernel.push(x.kernel * y.kernel);
            for l in 0..n {
                eig[l].push(x.eig[l] * y.eig[l]);
            }
        }
    }
    Ok(OperatorSpec {
        name: format!("{}*{}", spec1.name, spec2.name),
        n,
        measure: MeasureSpec::AtomList { points },
        kernel: ScalarFn::Table(Arc::from(kernel)),
        dilations: DilationFamily {
            eigenvalues: eig
                .into_iter()
                .map(|t| ScalarFn::Table(Arc::from(t)))
                .collect(),
            conjugator: spec1.dilations.conjugator.clone(),
        },
        quadrature: spec1.quadrature.clone(),
    })
}
