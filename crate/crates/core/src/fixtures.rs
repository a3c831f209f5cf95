//! Reference operators used by tests, benches and the CLI examples.

use crate::spec::{parse_config, OperatorSpec};

pub const CESARO_1_1: &str = include_str!("../fixtures/cesaro-1-1.json");
pub const CESARO_2_2: &str = include_str!("../fixtures/cesaro-2-2.json");
pub const QCESARO_QUARTER: &str = include_str!("../fixtures/qcesaro-0.25.json");
pub const QCESARO_NEG_QUARTER: &str = include_str!("../fixtures/qcesaro-neg0.25.json");
pub const REFLECTION: &str = include_str!("../fixtures/reflection.json");
pub const REFLECTION_2D: &str = include_str!("../fixtures/reflection-2d.json");
pub const CONSTANT_ATOM: &str = include_str!("../fixtures/constant-atom.json");
pub const ZERO_KERNEL: &str = include_str!("../fixtures/zero-kernel.json");

pub const ALL: [&str; 8] = [
    CESARO_1_1,
    CESARO_2_2,
    QCESARO_QUARTER,
    QCESARO_NEG_QUARTER,
    REFLECTION,
    REFLECTION_2D,
    CONSTANT_ATOM,
    ZERO_KERNEL,
];

fn load(doc: &str) -> OperatorSpec {
    parse_config(doc).expect("built-in fixture must parse")
}

pub fn cesaro_1_1() -> OperatorSpec {
    load(CESARO_1_1)
}

/// `C_{alpha,n}`: kernel `alpha (1-u)^{alpha-1} / u`, `A(u) = I/u` on `(0,1)`.
pub fn cesaro(alpha: f64, n: usize) -> OperatorSpec {
    let eig = vec!["\"1/u\""; n].join(",");
    let singular = if alpha < 1.0 { "[0,1]" } else { "[0]" };
    load(&format!(
        r#"{{"name":"cesaro-{alpha}-{n}","n":{n},
            "measure":{{"type":"interval","a":0,"b":1,"singular_endpoints":{singular}}},
            "kernel":"{alpha:?}*(1-u)^({alpha:?}-1)/u","eigenvalues":[{eig}]}}"#
    ))
}

/// q-Cesàro: counting measure on `k = 0..=60`, `K(k) = (1-q) q^k`, `a(k) = q^k`.
pub fn qcesaro(q: f64) -> OperatorSpec {
    assert!(q != 0.0 && q.abs() < 1.0);
    let base = if q < 0.0 {
        format!("({q:?})")
    } else {
        format!("{q:?}")
    };
    load(&format!(
        r#"{{"name":"qcesaro-{q}","n":1,
            "measure":{{"type":"counting","start":0,"truncate":60,"tail_ratio":{r:?}}},
            "kernel":"{k:?}*{base}^u","eigenvalues":["{base}^u"]}}"#,
        k = 1.0 - q,
        r = q.abs().sqrt(),
    ))
}

/// Single atom with `A = -I` and unit kernel: `(Hf)(x) = f(-x)`.
pub fn reflection(n: usize) -> OperatorSpec {
    match n {
        1 => load(REFLECTION),
        2 => load(REFLECTION_2D),
        _ => constant_atom_with(1.0, -1.0, n, "reflection"),
    }
}

/// Single atom with `A = I` and kernel `c`: `H = c I`.
pub fn constant_atom(c: f64, n: usize) -> OperatorSpec {
    constant_atom_with(c, 1.0, n, "constant-atom")
}

fn constant_atom_with(c: f64, a: f64, n: usize, name: &str) -> OperatorSpec {
    let eig = vec![format!("\"{a:?}\""); n].join(",");
    load(&format!(
        r#"{{"name":"{name}","n":{n},"measure":{{"type":"atoms","points":[[1,1]]}},
            "kernel":"{c:?}","eigenvalues":[{eig}]}}"#
    ))
}

pub fn zero_kernel() -> OperatorSpec {
    load(ZERO_KERNEL)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builders_match_documents() {
        assert_eq!(cesaro(1.0, 1).measure, cesaro_1_1().measure);
        assert_eq!(
            cesaro(2.0, 2).kernel.eval(0.5).unwrap(),
            load(CESARO_2_2).kernel.eval(0.5).unwrap()
        );
        let q = qcesaro(0.25);
        assert_eq!(
            q.kernel.eval(3.0).unwrap(),
            load(QCESARO_QUARTER).kernel.eval(3.0).unwrap()
        );
        let qn = qcesaro(-0.25);
        assert_eq!(
            qn.dilations.eval(3.0).unwrap(),
            load(QCESARO_NEG_QUARTER).dilations.eval(3.0).unwrap()
        );
        assert_eq!(reflection(3).dilations.eval(1.0).unwrap(), vec![-1.0; 3]);
        assert_eq!(constant_atom(2.0, 1).kernel.eval(1.0).unwrap(), 2.0);
    }
}
