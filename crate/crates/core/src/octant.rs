//! Hyperoctant bookkeeping.
//!
//! Octants are numbered by a bit pattern: bit `l` of the index is 0 when
//! coordinate `l` is positive and 1 when it is negative. So in the plane
//! `(+,+) = 0b00`, `(-,+) = 0b01`, `(+,-) = 0b10`, `(-,-) = 0b11`.
//!
//! Under this numbering the reflection carrying octant `i` onto octant `j`
//! is determined by `i ^ j`, and a measure node with eigenvalue sign class
//! `delta` (bit `l` set iff `a_l(u) < 0`) contributes to the symbol entry
//! `(i, j)` exactly when `delta == i ^ j`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OctantIndex(pub usize);

impl OctantIndex {
    /// Sign vector `(+-1, ..)` of the octant.
    pub fn signs(self, n: usize) -> Vec<f64> {
        (0..n)
            .map(|l| if self.0 >> l & 1 == 0 { 1.0 } else { -1.0 })
            .collect()
    }
}

/// Number of hyperoctants in dimension `n`.
pub fn octant_count(n: usize) -> usize {
    1 << n
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignVector(pub Vec<i8>);

impl SignVector {
    pub fn from_class(class: usize, n: usize) -> Self {
        SignVector(
            (0..n)
                .map(|l| if class >> l & 1 == 0 { 1 } else { -1 })
                .collect(),
        )
    }

    pub fn class(&self) -> usize {
        self.0
            .iter()
            .enumerate()
            .fold(0, |acc, (l, &s)| if s < 0 { acc | 1 << l } else { acc })
    }

    /// Componentwise product `eps * x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.0.iter().zip(x).map(|(&e, &v)| e as f64 * v).collect()
    }
}

/// The sign vector carrying `U_i` onto `U_j`.
pub fn epsilon(i: OctantIndex, j: OctantIndex, n: usize) -> SignVector {
    SignVector::from_class(i.0 ^ j.0, n)
}

pub fn octant_of_point(x: &[f64]) -> Result<OctantIndex> {
    let mut idx = 0;
    for (l, &v) in x.iter().enumerate() {
        if v == 0.0 || v.is_nan() {
            return Err(Error::Hyperplane(x.to_vec()));
        }
        if v < 0.0 {
            idx |= 1 << l;
        }
    }
    Ok(OctantIndex(idx))
}

/// Sign class of a measure node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSignature {
    pub node: usize,
    pub signs: SignVector,
    /// Bit `l` set iff `a_l(u) < 0`.
    pub class: usize,
}

/// Sign class of one eigenvalue vector; `None` if some entry is zero.
pub fn sign_class(a: &[f64]) -> Option<usize> {
    let mut class = 0;
    for (l, &v) in a.iter().enumerate() {
        if v == 0.0 || v.is_nan() {
            return None;
        }
        if v < 0.0 {
            class |= 1 << l;
        }
    }
    Some(class)
}

/// Classify every node of a discretized measure.
pub fn classify_nodes(nodes: &crate::quadrature::NodeSet) -> Vec<NodeSignature> {
    let n = nodes.dim();
    nodes
        .iter()
        .enumerate()
        .map(|(k, node)| NodeSignature {
            node: k,
            signs: SignVector::from_class(node.class, n),
            class: node.class,
        })
        .collect()
}

/// Classify raw eigenvalue samples, failing on a zero eigenvalue where the
/// kernel is non-zero.
pub fn classify_samples(u: &[f64], kernel: &[f64], eig: &[Vec<f64>]) -> Result<Vec<NodeSignature>> {
    let mut out = Vec::with_capacity(u.len());
    for k in 0..u.len() {
        let a = &eig[k];
        let class = match sign_class(a) {
            Some(c) => c,
            None if kernel[k] == 0.0 => 0,
            None => {
                let axis = a.iter().position(|&v| v == 0.0).unwrap_or(0);
                return Err(Error::ZeroEigenvalue {
                    node: k,
                    axis,
                    u: u[k],
                });
            }
        };
        out.push(NodeSignature {
            node: k,
            signs: SignVector::from_class(class, a.len()),
            class,
        });
    }
    Ok(out)
}

/// Does a node of class `class` belong to `Omega_ij`?
pub fn in_omega(class: usize, i: OctantIndex, j: OctantIndex) -> bool {
    class == i.0 ^ j.0
}

/// Reordering of the canonical octants that pairs each octant with its
/// image under the reflection `mask`.
///
/// Returns `perm` with `perm[k]` the canonical index placed at position `k`:
/// the first half lists representatives (highest bit of `mask` clear) in
/// ascending order, the second half their images `rep ^ mask` in the same
/// order. With `mask = 2^n - 1` this realizes `U_{2^(n-1)+i} = -U_i`.
pub fn pairing_permutation(n: usize, mask: usize) -> Vec<usize> {
    let count = octant_count(n);
    assert!(
        mask != 0 && mask < count,
        "pairing mask must be a non-zero class"
    );
    let top = 1 << (usize::BITS - 1 - mask.leading_zeros());
    let reps: Vec<usize> = (0..count).filter(|i| i & top == 0).collect();
    let mut perm = reps.clone();
    perm.extend(reps.iter().map(|r| r ^ mask));
    perm
}
