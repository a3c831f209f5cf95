//! Discretization of the parameter measure into weighted nodes.
//!
//! Interval measures use fixed-order Gauss-Legendre panels refined by
//! bisection. A panel is accepted when two conditions hold:
//!
//! * the panel estimate of `int |K| |det A|^{-1/2}` agrees with the sum over
//!   its two halves to within `tolerance`, and
//! * the symbol phase `sum_j s_j log|a_j(u)|` varies by at most
//!   [`MAX_PANEL_PHASE`] radians across the panel for every
//!   `|s_j| <= max_frequency`.
//!
//! The phase condition is waived for panels whose mass is already below
//! `tolerance`. Declared singular endpoints start from a geometric grading
//! (panel widths halving toward the endpoint) which refinement then extends.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::octant::sign_class;
use crate::spec::{MeasureSpec, OperatorSpec};

/// Largest phase excursion tolerated inside one panel, in radians.
pub const MAX_PANEL_PHASE: f64 = 8.0;

/// Number of geometric grading levels laid down before adaptive refinement.
const INITIAL_GRADING: usize = 8;
/// Relative panel width below which bisection stops.
const RESOLUTION_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct QuadConfig {
    /// Gauss-Legendre points per panel.
    pub order: usize,
    /// Absolute tolerance per panel.
    pub tolerance: f64,
    pub max_depth: usize,
    /// Largest `|s_j|` the node set must resolve; 0 disables the phase check.
    pub max_frequency: f64,
}

impl Default for QuadConfig {
    fn default() -> Self {
        QuadConfig {
            order: 16,
            tolerance: 1e-10,
            max_depth: 64,
            max_frequency: 40.0,
        }
    }
}

impl QuadConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, message: &str| Error::Schema {
            path: format!("quadrature.{field}"),
            message: message.into(),
        };
        if self.order < 2 {
            return Err(bad("order", "order must be at least 2"));
        }
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(bad("tolerance", "tolerance must be positive"));
        }
        if self.max_depth < 1 {
            return Err(bad("max_depth", "depth must be at least 1"));
        }
        if !(self.max_frequency >= 0.0 && self.max_frequency.is_finite()) {
            return Err(bad(
                "max_frequency",
                "max_frequency must be finite and non-negative",
            ));
        }
        Ok(())
    }

    pub fn with_max_frequency(&self, f: f64) -> Self {
        QuadConfig {
            max_frequency: f,
            ..self.clone()
        }
    }
}

/// Gauss-Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Nodes by Newton iteration on `P_n`, weights `2 / ((1-x^2) P_n'(x)^2)`.
    pub fn new(order: usize) -> Self {
        let n = order;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
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
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        GaussLegendre { nodes, weights }
    }

    /// Integrate `f` over `[a, b]`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(mid + half * x))
            .sum::<f64>()
            * half
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// One node of a discretized measure.
#[derive(Debug, Clone, Copy)]
pub struct NodeRef<'a> {
    pub u: f64,
    pub weight: f64,
    pub kernel: f64,
    pub eig: &'a [f64],
    pub abs_det: f64,
    pub class: usize,
}

/// Quadrature nodes with cached kernel and eigenvalue data.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSet {
    n: usize,
    u: Vec<f64>,
    weight: Vec<f64>,
    kernel: Vec<f64>,
    /// `n` eigenvalues per node, flattened.
    eig: Vec<f64>,
    abs_det: Vec<f64>,
    class: Vec<usize>,
    /// Summed panel error estimates of the mass integral.
    pub error_estimate: f64,
    /// Geometric tail bound for truncated counting measures.
    pub tail_bound: Option<f64>,
}

impl NodeSet {
    pub fn empty(n: usize) -> Self {
        NodeSet {
            n,
            u: vec![],
            weight: vec![],
            kernel: vec![],
            eig: vec![],
            abs_det: vec![],
            class: vec![],
            error_estimate: 0.0,
            tail_bound: None,
        }
    }

    fn push(&mut self, u: f64, weight: f64, kernel: f64, eig: &[f64]) -> Result<()> {
        let node = self.u.len();
        let class = match sign_class(eig) {
            Some(c) => c,
            None if kernel == 0.0 => 0,
            None => {
                let axis = eig
                    .iter()
                    .position(|&v| v == 0.0 || v.is_nan())
                    .unwrap_or(0);
                return Err(Error::ZeroEigenvalue { node, axis, u });
            }
        };
        let abs_det = eig.iter().map(|a| a.abs()).product();
        self.u.push(u);
        self.weight.push(weight);
        self.kernel.push(kernel);
        self.eig.extend_from_slice(eig);
        self.abs_det.push(abs_det);
        self.class.push(class);
        Ok(())
    }

    /// Build directly from per-node data (materialized products).
    pub fn from_parts(
        n: usize,
        u: Vec<f64>,
        weight: Vec<f64>,
        kernel: Vec<f64>,
        eig: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let mut set = NodeSet::empty(n);
        for k in 0..u.len() {
            if !(weight[k] > 0.0) {
                return Err(Error::Schema {
                    path: format!("nodes[{k}].weight"),
                    message: "weights must be positive".into(),
                });
            }
            set.push(u[k], weight[k], kernel[k], &eig[k])?;
        }
        Ok(set)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn get(&self, k: usize) -> NodeRef<'_> {
        NodeRef {
            u: self.u[k],
            weight: self.weight[k],
            kernel: self.kernel[k],
            eig: &self.eig[k * self.n..(k + 1) * self.n],
            abs_det: self.abs_det[k],
            class: self.class[k],
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = NodeRef<'_>> + '_ {
        (0..self.len()).map(move |k| self.get(k))
    }

    /// `sum_k w_k |K(u_k)| |det A(u_k)|^{-1/2}`.
    pub fn mass(&self) -> f64 {
        self.iter()
            .filter(|nd| nd.kernel != 0.0)
            .map(|nd| nd.weight * nd.kernel.abs() / nd.abs_det.sqrt())
            .sum()
    }
}

/// `sum_k w_k g(k)` in ascending node order.
pub fn integrate<G: FnMut(usize) -> Complex64>(nodes: &NodeSet, mut g: G) -> Result<Complex64> {
    let mut acc = Complex64::new(0.0, 0.0);
    for k in 0..nodes.len() {
        let v = g(k);
        if !(v.re.is_finite() && v.im.is_finite()) {
            return Err(Error::NonFinite { node: k });
        }
        acc += nodes.weight[k] * v;
    }
    Ok(acc)
}

pub fn discretize_measure(spec: &OperatorSpec, cfg: &QuadConfig) -> Result<NodeSet> {
    cfg.validate()?;
    let n = spec.n;
    let mut set = NodeSet::empty(n);
    match &spec.measure {
        MeasureSpec::AtomList { points } => {
            for &(u, w) in points {
                let k = spec.kernel.eval(u)?;
                let a = spec.dilations.eval(u)?;
                set.push(u, w, k, &a)?;
            }
        }
        MeasureSpec::Counting {
            start,
            truncate,
            tail_ratio,
        } => {
            let mut last = 0.0;
            for k in *start..=*truncate {
                let u = k as f64;
                let kv = spec.kernel.eval(u)?;
                let a = spec.dilations.eval(u)?;
                set.push(u, 1.0, kv, &a)?;
                let nd = set.get(set.len() - 1);
                last = if kv == 0.0 {
                    0.0
                } else {
                    kv.abs() / nd.abs_det.sqrt()
                };
            }
            let bound = last * tail_ratio / (1.0 - tail_ratio);
            set.tail_bound = Some(bound);
            set.error_estimate = bound;
        }
        MeasureSpec::IntervalLebesgue { a, b, singular, .. } => {
            let rule = GaussLegendre::new(cfg.order);
            let mut ctx = Refiner {
                spec,
                cfg,
                rule: &rule,
                set: &mut set,
                error: 0.0,
            };
            for (lo, hi, depth) in initial_panels(*a, *b, singular) {
                ctx.refine(lo, hi, depth, None)?;
            }
            let err = ctx.error;
            set.error_estimate = err;
        }
    }
    Ok(set)
}

fn initial_panels(a: f64, b: f64, singular: &[f64]) -> Vec<(f64, f64, usize)> {
    let sing_a = singular.contains(&a);
    let sing_b = singular.contains(&b);
    let graded = |lo: f64, hi: f64, toward_lo: bool, depth0: usize| {
        let len = hi - lo;
        let mut panels = Vec::new();
        for k in 0..INITIAL_GRADING {
            let near = len * 0.5f64.powi(k as i32 + 1);
            let far = len * 0.5f64.powi(k as i32);
            let depth = depth0 + k + 1;
            if toward_lo {
                panels.push((lo + near, lo + far, depth));
            } else {
                panels.push((hi - far, hi - near, depth));
            }
        }
        let inner = len * 0.5f64.powi(INITIAL_GRADING as i32);
        let depth = depth0 + INITIAL_GRADING;
        if toward_lo {
            panels.push((lo, lo + inner, depth));
        } else {
            panels.push((hi - inner, hi, depth));
        }
        panels.sort_by(|x, y| x.0.total_cmp(&y.0));
        panels
    };
    match (sing_a, sing_b) {
        (false, false) => vec![(a, b, 0)],
        (true, false) => graded(a, b, true, 0),
        (false, true) => graded(a, b, false, 0),
        (true, true) => {
            let m = 0.5 * (a + b);
            let mut p = graded(a, m, true, 1);
            p.extend(graded(m, b, false, 1));
            p
        }
    }
}

struct PanelEval {
    mass: f64,
    phase: f64,
    u: Vec<f64>,
    w: Vec<f64>,
    k: Vec<f64>,
    a: Vec<Vec<f64>>,
}

struct Refiner<'a> {
    spec: &'a OperatorSpec,
    cfg: &'a QuadConfig,
    rule: &'a GaussLegendre,
    set: &'a mut NodeSet,
    error: f64,
}

impl Refiner<'_> {
    fn eval_panel(&self, lo: f64, hi: f64) -> Result<PanelEval> {
        let n = self.spec.n;
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        let m = self.rule.nodes.len();
        let mut out = PanelEval {
            mass: 0.0,
            phase: 0.0,
            u: Vec::with_capacity(m),
            w: Vec::with_capacity(m),
            k: Vec::with_capacity(m),
            a: Vec::with_capacity(m),
        };
        let mut lo_log = vec![f64::INFINITY; n];
        let mut hi_log = vec![f64::NEG_INFINITY; n];
        for (x, wq) in self.rule.nodes.iter().zip(&self.rule.weights) {
            let u = mid + half * x;
            let w = wq * half;
            let kv = self.spec.kernel.eval(u)?;
            let a = self.spec.dilations.eval(u)?;
            if kv != 0.0 {
                let det: f64 = a.iter().map(|v| v.abs()).product();
                if det > 0.0 {
                    out.mass += w * kv.abs() / det.sqrt();
                }
                for l in 0..n {
                    let la = a[l].abs().ln();
                    lo_log[l] = lo_log[l].min(la);
                    hi_log[l] = hi_log[l].max(la);
                }
            }
            out.u.push(u);
            out.w.push(w);
            out.k.push(kv);
            out.a.push(a);
        }
        if self.cfg.max_frequency > 0.0 {
            out.phase = (0..n)
                .filter(|&l| hi_log[l] >= lo_log[l])
                .map(|l| self.cfg.max_frequency * (hi_log[l] - lo_log[l]))
                .sum();
        }
        Ok(out)
    }

    fn accept(&mut self, p: PanelEval) -> Result<()> {
        for k in 0..p.u.len() {
            self.set.push(p.u[k], p.w[k], p.k[k], &p.a[k])?;
        }
        Ok(())
    }

    fn refine(&mut self, lo: f64, hi: f64, depth: usize, whole: Option<PanelEval>) -> Result<()> {
        let whole = match whole {
            Some(p) => p,
            None => self.eval_panel(lo, hi)?,
        };
        // Below this width the nodes of a child panel next to a non-zero
        // endpoint would round onto the endpoint itself. Keep the panel and
        // charge its whole mass to the error estimate.
        if hi - lo <= RESOLUTION_FLOOR * lo.abs().max(hi.abs()) {
            self.error += whole.mass;
            return self.accept(whole);
        }
        let mid = 0.5 * (lo + hi);
        let left = self.eval_panel(lo, mid)?;
        let right = self.eval_panel(mid, hi)?;
        let err = (whole.mass - left.mass - right.mass).abs();
        let tol = self.cfg.tolerance;
        let converged = err <= tol;
        let resolved =
            whole.phase <= MAX_PANEL_PHASE || whole.mass.max(left.mass + right.mass) <= tol;
        let at_floor = depth >= self.cfg.max_depth || !(lo < mid && mid < hi);
        if converged && resolved {
            self.error += err;
            return self.accept(whole);
        }
        if at_floor {
            if !converged {
                return Err(Error::NonIntegrable {
                    a: lo,
                    b: hi,
                    depth: self.cfg.max_depth,
                });
            }
            self.error += err;
            return self.accept(whole);
        }
        self.refine(lo, mid, depth + 1, Some(left))?;
        self.refine(mid, hi, depth + 1, Some(right))
    }
}
