//! Declarative operator descriptions and their JSON document format.
//!
//! A spec document looks like
//!
//! ```json
//! {
//!   "name": "cesaro-1-1",
//!   "n": 1,
//!   "measure": {"type": "interval", "a": 0, "b": 1, "singular_endpoints": [0]},
//!   "kernel": "1*(1-u)^0/u",
//!   "eigenvalues": ["1/u"],
//!   "C": [[1]]
//! }
//! ```
//!
//! `measure` is one of
//!
//! * `{"type":"interval","a":A,"b":B,"singular_endpoints":[..],"open":[bool,bool]}`
//!   (Lebesgue measure on `[A,B]`; `singular_endpoints` lists endpoints
//!   that get geometric panel grading, `open` is optional)
//! * `{"type":"counting","start":S,"truncate":N,"tail_ratio":R}` (counting
//!   measure on `S..=N`, with `0 < R < 1` bounding the ratio of successive
//!   terms of the tail)
//! * `{"type":"atoms","points":[[u,w],..]}` (weighted point masses)
//!
//! `kernel` is an expression in `u`, `eigenvalues` holds `n` expressions in
//! `u` (the diagonal of `C^T A(u) C`), and `C` is an optional row-major
//! orthogonal matrix (identity when absent). An optional `quadrature`
//! object (`order`, `tolerance`, `max_depth`, `max_frequency`) overrides the
//! discretization defaults. Unknown keys are rejected.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{BinaryOp, Expr, Func, Node};
use crate::quadrature::QuadConfig;

/// A real function of the measure variable `u`.
///
/// `Table` is used by materialized specs (products, adjoints of products):
/// the measure is then an atom list whose points are `0, 1, 2, ..` and the
/// table is indexed by that position.
#[derive(Debug, Clone, PartialEq)]
pub enum ScalarFn {
    Expr(Expr),
    Table(Arc<[f64]>),
}

impl ScalarFn {
    pub fn eval(&self, u: f64) -> Result<f64> {
        match self {
            ScalarFn::Expr(e) => e.eval(&[u]),
            ScalarFn::Table(t) => {
                let k = u as usize;
                if u < 0.0 || u.fract() != 0.0 || k >= t.len() {
                    return Err(Error::Domain {
                        node: format!("table[{u}]"),
                        reason: "tabulated function evaluated off its atoms".into(),
                    });
                }
                Ok(t[k])
            }
        }
    }

    pub fn as_expr(&self) -> Option<&Expr> {
        match self {
            ScalarFn::Expr(e) => Some(e),
            ScalarFn::Table(_) => None,
        }
    }
}

impl From<Expr> for ScalarFn {
    fn from(e: Expr) -> Self {
        ScalarFn::Expr(e)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MeasureSpec {
    IntervalLebesgue {
        a: f64,
        b: f64,
        open: [bool; 2],
        singular: Vec<f64>,
    },
    Counting {
        start: i64,
        truncate: i64,
        tail_ratio: f64,
    },
    AtomList {
        points: Vec<(f64, f64)>,
    },
}

impl MeasureSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |path: &str, message: String| Error::Schema {
            path: format!("measure.{path}"),
            message,
        };
        match self {
            MeasureSpec::IntervalLebesgue { a, b, singular, .. } => {
                if !(a.is_finite() && b.is_finite()) {
                    return Err(bad("a", "interval endpoints must be finite".into()));
                }
                if a >= b {
                    return Err(bad(
                        "b",
                        format!("interval requires a < b (got a={a}, b={b})"),
                    ));
                }
                for (k, s) in singular.iter().enumerate() {
                    if s != a && s != b {
                        return Err(bad(
                            &format!("singular_endpoints[{k}]"),
                            format!("{s} is not an endpoint of [{a}, {b}]"),
                        ));
                    }
                }
            }
            MeasureSpec::Counting {
                start,
                truncate,
                tail_ratio,
            } => {
                if truncate < start {
                    return Err(bad(
                        "truncate",
                        format!("truncation {truncate} precedes start {start}"),
                    ));
                }
                if !(*tail_ratio > 0.0 && *tail_ratio < 1.0) {
                    return Err(bad(
                        "tail_ratio",
                        format!("tail ratio must lie in (0,1), got {tail_ratio}"),
                    ));
                }
            }
            MeasureSpec::AtomList { points } => {
                if points.is_empty() {
                    return Err(bad("points", "atom list is empty".into()));
                }
                for (k, (u, w)) in points.iter().enumerate() {
                    if !u.is_finite() {
                        return Err(bad(
                            &format!("points[{k}]"),
                            "atom location not finite".into(),
                        ));
                    }
                    if !(*w > 0.0 && w.is_finite()) {
                        return Err(bad(
                            &format!("points[{k}]"),
                            format!("atom weight must be positive, got {w}"),
                        ));
                    }
                    if points[..k].iter().any(|(v, _)| v == u) {
                        return Err(bad(
                            &format!("points[{k}]"),
                            format!("duplicate atom at {u}"),
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Simultaneously diagonalized dilation family `A(u) = C diag(a(u)) C^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct DilationFamily {
    pub eigenvalues: Vec<ScalarFn>,
    /// Row-major `n x n` orthogonal conjugator.
    pub conjugator: Vec<f64>,
}

impl DilationFamily {
    pub fn diagonal(eigenvalues: Vec<ScalarFn>) -> Self {
        let n = eigenvalues.len();
        let mut c = vec![0.0; n * n];
        for i in 0..n {
            c[i * n + i] = 1.0;
        }
        DilationFamily {
            eigenvalues,
            conjugator: c,
        }
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eval(&self, u: f64) -> Result<Vec<f64>> {
        self.eigenvalues.iter().map(|a| a.eval(u)).collect()
    }

    /// Max-abs entry of `C^T C - I`.
    pub fn orthogonality_defect(&self) -> f64 {
        let n = self.dim();
        let c = &self.conjugator;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let dot: f64 = (0..n).map(|k| c[k * n + i] * c[k * n + j]).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).abs());
            }
        }
        worst
    }

    pub fn is_identity_conjugator(&self) -> bool {
        let n = self.dim();
        (0..n).all(|i| (0..n).all(|j| self.conjugator[i * n + j] == if i == j { 1.0 } else { 0.0 }))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OperatorSpec {
    pub name: String,
    pub n: usize,
    pub measure: MeasureSpec,
    pub kernel: ScalarFn,
    pub dilations: DilationFamily,
    pub quadrature: QuadConfig,
}

/// Upper bound accepted for the integrability integral at load time.
pub const INTEGRABILITY_CAP: f64 = 1e12;

impl OperatorSpec {
    /// Structural validation (no discretization).
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Schema {
                path: "n".into(),
                message: "dimension must be at least 1".into(),
            });
        }
        if self.dilations.dim() != self.n {
            return Err(Error::Dimension(format!(
                "n = {} but {} eigenvalue functions given",
                self.n,
                self.dilations.dim()
            )));
        }
        if self.dilations.conjugator.len() != self.n * self.n {
            return Err(Error::Dimension(format!(
                "C must be {0}x{0}, got {1} entries",
                self.n,
                self.dilations.conjugator.len()
            )));
        }
        let defect = self.dilations.orthogonality_defect();
        if defect > 1e-12 {
            return Err(Error::NotOrthogonal { deviation: defect });
        }
        self.measure.validate()?;
        self.quadrature.validate()?;
        Ok(())
    }

    /// Dense `A(u) = C diag(a(u)) C^T`, row-major.
    pub fn dilation_matrix(&self, a: &[f64]) -> Vec<f64> {
        let n = self.n;
        let c = &self.dilations.conjugator;
        let mut m = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                m[i * n + j] = (0..n).map(|k| c[i * n + k] * a[k] * c[j * n + k]).sum();
            }
        }
        m
    }
}

// ---------------------------------------------------------------------------
// JSON document

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecDoc {
    name: String,
    n: usize,
    measure: MeasureDoc,
    kernel: String,
    eigenvalues: Vec<String>,
    #[serde(rename = "C", default)]
    c: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    quadrature: Option<QuadDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
enum MeasureDoc {
    Interval {
        a: f64,
        b: f64,
        #[serde(default)]
        singular_endpoints: Vec<f64>,
        #[serde(default)]
        open: Option<[bool; 2]>,
    },
    Counting {
        start: i64,
        truncate: i64,
        tail_ratio: f64,
    },
    Atoms {
        points: Vec<[f64; 2]>,
    },
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct QuadDoc {
    order: Option<usize>,
    tolerance: Option<f64>,
    max_depth: Option<usize>,
    max_frequency: Option<f64>,
}

/// Parse and validate a JSON spec document.
pub fn parse_config(document: &str) -> Result<OperatorSpec> {
    let doc: SpecDoc = serde_json::from_str(document).map_err(|e| Error::Schema {
        path: format!("line {} column {}", e.line(), e.column()),
        message: e.to_string(),
    })?;
    from_doc(doc)
}

fn from_doc(doc: SpecDoc) -> Result<OperatorSpec> {
    let kernel = Expr::parse(&doc.kernel, &["u"]).map_err(|e| Error::Schema {
        path: "kernel".into(),
        message: e.to_string(),
    })?;
    if doc.eigenvalues.len() != doc.n {
        return Err(Error::Dimension(format!(
            "n = {} but {} eigenvalue expressions given",
            doc.n,
            doc.eigenvalues.len()
        )));
    }
    let eigenvalues = doc
        .eigenvalues
        .iter()
        .enumerate()
        .map(|(k, text)| {
            Expr::parse(text, &["u"])
                .map(ScalarFn::Expr)
                .map_err(|e| Error::Schema {
                    path: format!("eigenvalues[{k}]"),
                    message: e.to_string(),
                })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut dilations = DilationFamily::diagonal(eigenvalues);
    if let Some(rows) = doc.c {
        if rows.len() != doc.n || rows.iter().any(|r| r.len() != doc.n) {
            return Err(Error::Dimension(format!("C must be {0}x{0}", doc.n)));
        }
        dilations.conjugator = rows.into_iter().flatten().collect();
    }
    let measure = match doc.measure {
        MeasureDoc::Interval {
            a,
            b,
            singular_endpoints,
            open,
        } => MeasureSpec::IntervalLebesgue {
            a,
            b,
            open: open.unwrap_or([true, true]),
            singular: singular_endpoints,
        },
        MeasureDoc::Counting {
            start,
            truncate,
            tail_ratio,
        } => MeasureSpec::Counting {
            start,
            truncate,
            tail_ratio,
        },
        MeasureDoc::Atoms { points } => MeasureSpec::AtomList {
            points: points.into_iter().map(|[u, w]| (u, w)).collect(),
        },
    };
    let mut quadrature = QuadConfig::default();
    if let Some(q) = doc.quadrature {
        if let Some(v) = q.order {
            quadrature.order = v;
        }
        if let Some(v) = q.tolerance {
            quadrature.tolerance = v;
        }
        if let Some(v) = q.max_depth {
            quadrature.max_depth = v;
        }
        if let Some(v) = q.max_frequency {
            quadrature.max_frequency = v;
        }
    }
    let spec = OperatorSpec {
        name: doc.name,
        n: doc.n,
        measure,
        kernel: ScalarFn::Expr(kernel),
        dilations,
        quadrature,
    };
    spec.validate()?;
    // Integrability of the kernel on a coarse (non-oscillatory) discretization.
    let probe = QuadConfig {
        max_frequency: 0.0,
        ..spec.quadrature.clone()
    };
    let nodes = crate::quadrature::discretize_measure(&spec, &probe)?;
    let mass = nodes.mass();
    if !(mass.is_finite() && mass <= INTEGRABILITY_CAP) {
        return Err(Error::Schema {
            path: "kernel".into(),
            message: format!("integral of |K||det A|^(-1/2) is {mass:e}, exceeds cap"),
        });
    }
    Ok(spec)
}

/// Serialize an expression-backed spec back to its JSON document.
///
/// Returns `None` for specs with tabulated functions (materialized products).
pub fn to_document(spec: &OperatorSpec) -> Option<String> {
    let kernel = spec.kernel.as_expr()?.to_string();
    let eigenvalues = spec
        .dilations
        .eigenvalues
        .iter()
        .map(|a| a.as_expr().map(|e| e.to_string()))
        .collect::<Option<Vec<_>>>()?;
    let n = spec.n;
    let c = (0..n)
        .map(|i| spec.dilations.conjugator[i * n..(i + 1) * n].to_vec())
        .collect();
    let measure = match &spec.measure {
        MeasureSpec::IntervalLebesgue {
            a,
            b,
            open,
            singular,
        } => MeasureDoc::Interval {
            a: *a,
            b: *b,
            singular_endpoints: singular.clone(),
            open: Some(*open),
        },
        MeasureSpec::Counting {
            start,
            truncate,
            tail_ratio,
        } => MeasureDoc::Counting {
            start: *start,
            truncate: *truncate,
            tail_ratio: *tail_ratio,
        },
        MeasureSpec::AtomList { points } => MeasureDoc::Atoms {
            points: points.iter().map(|&(u, w)| [u, w]).collect(),
        },
    };
    let q = &spec.quadrature;
    let doc = SpecDoc {
        name: spec.name.clone(),
        n,
        measure,
        kernel,
        eigenvalues,
        c: Some(c),
        quadrature: Some(QuadDoc {
            order: Some(q.order),
            tolerance: Some(q.tolerance),
            max_depth: Some(q.max_depth),
            max_frequency: Some(q.max_frequency),
        }),
    };
    serde_json::to_string_pretty(&doc).ok()
}

// ---------------------------------------------------------------------------
// test functions

/// Piecewise test function: one expression per hyperoctant in the variables
/// `x_1..x_n` (or `x` when `n = 1`), restricted to a box in log coordinates.
#[derive(Debug, Clone)]
pub struct FunctionSpec {
    pub n: usize,
    /// Indexed by octant; `None` means identically zero on that octant.
    pub pieces: Vec<Option<Expr>>,
    /// Per-axis `[lo, hi]` bounds on `log|x_l|`.
    pub log_box: Vec<(f64, f64)>,
}

impl FunctionSpec {
    pub fn variable_names(n: usize) -> Vec<String> {
        if n == 1 {
            vec!["x".into()]
        } else {
            (1..=n).map(|l| format!("x_{l}")).collect()
        }
    }

    /// `pieces` pairs an octant index with expression text.
    pub fn new(n: usize, pieces: &[(usize, &str)], log_box: Vec<(f64, f64)>) -> Result<Self> {
        if log_box.len() != n {
            return Err(Error::Dimension(format!(
                "log box has {} axes, expected {n}",
                log_box.len()
            )));
        }
        for (l, (lo, hi)) in log_box.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::Schema {
                    path: format!("log_box[{l}]"),
                    message: "support box must be bounded with lo < hi".into(),
                });
            }
        }
        let names = Self::variable_names(n);
        let refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
        let mut out = vec![None; 1 << n];
        for &(octant, text) in pieces {
            if octant >= out.len() {
                return Err(Error::Schema {
                    path: format!("pieces[{octant}]"),
                    message: "octant index out of range".into(),
                });
            }
            out[octant] = Some(Expr::parse(text, &refs)?);
        }
        Ok(FunctionSpec {
            n,
            pieces: out,
            log_box,
        })
    }

    /// Value at `x`. Points on a face of the support box get half weight per
    /// face, matching the trapezoidal convention of the log grids.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        let octant = crate::octant::octant_of_point(x)?;
        let Some(expr) = &self.pieces[octant.0] else {
            return Ok(0.0);
        };
        let mut weight = 1.0;
        for (l, &(lo, hi)) in self.log_box.iter().enumerate() {
            let t = x[l].abs().ln();
            if t < lo || t > hi {
                return Ok(0.0);
            }
            if t == lo || t == hi {
                weight *= 0.5;
            }
        }
        Ok(weight * expr.eval(x)?)
    }
}

/// Build the adjoint-kernel expression `K(u) / |a_1(u) ... a_n(u)|`.
pub(crate) fn adjoint_kernel_expr(kernel: &Expr, eig: &[&Expr]) -> Expr {
    let mut det = eig[0].root().clone();
    for e in &eig[1..] {
        det = Node::Binary(BinaryOp::Mul, Box::new(det), Box::new(e.root().clone()));
    }
    let node = Node::Binary(
        BinaryOp::Div,
        Box::new(kernel.root().clone()),
        Box::new(Node::Call(Func::Abs, vec![det])),
    );
    Expr::from_node(node, &["u"])
}

pub(crate) fn reciprocal_expr(e: &Expr) -> Expr {
    Expr::from_node(
        Node::Binary(
            BinaryOp::Div,
            Box::new(Node::Const(1.0)),
            Box::new(e.root().clone()),
        ),
        &["u"],
    )
}
