//! Algebraic properties of the symbol on randomly drawn atom-list operators.

use hausdorff::quadrature::discretize_measure;
use hausdorff::spec::to_document;
use hausdorff::spectral::{norm_bound, operator_norm, SGrid};
use hausdorff::symbol::{
    adjoint_spec, compose_specs, symbol_inverse, symbol_matrix, Axis, GridSpec,
};
use hausdorff::{parse_config, Execution, OperatorSpec, SymbolGrid};
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

/// Atom positions and weights, plus a sign pattern and exponent per axis:
/// eigenvalue `l` at atom `u` is `sign_l * u^{p_l}`.
#[derive(Debug, Clone)]
struct Draw {
    atoms: Vec<(f64, f64)>,
    signs: Vec<bool>,
    powers: Vec<i32>,
}

fn draw(n: usize) -> impl Strategy<Value = Draw> {
    (
        prop::collection::vec((0.2f64..3.0, 0.1f64..2.0), 1..5),
        prop::collection::vec(any::<bool>(), n),
        prop::collection::vec(prop_oneof![Just(-1), Just(1), Just(2)], n),
    )
        .prop_map(|(atoms, signs, powers)| Draw {
            atoms,
            signs,
            powers,
        })
}

fn build(d: &Draw) -> OperatorSpec {
    let n = d.signs.len();
    let points: Vec<String> = d
        .atoms
        .iter()
        .map(|(u, w)| format!("[{u:?},{w:?}]"))
        .collect();
    let eig: Vec<String> = d
        .signs
        .iter()
        .zip(&d.powers)
        .map(|(neg, p)| format!("\"{}u^({p})\"", if *neg { "-" } else { "" }))
        .collect();
    parse_config(&format!(
        r#"{{"name":"drawn","n":{n},"measure":{{"type":"atoms","points":[{}]}},
            "kernel":"1+u/2","eigenvalues":[{}]}}"#,
        points.join(","),
        eig.join(",")
    ))
    .unwrap()
}

fn frequencies(n: usize) -> Vec<Vec<f64>> {
    let axis = [-3.7, -0.4, 0.0, 1.3, 6.1];
    (0..axis.len().pow(n as u32))
        .map(|k| {
            (0..n)
                .map(|l| axis[(k / axis.len().pow(l as u32)) % axis.len()])
                .collect()
        })
        .collect()
}

fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
    (a - b).norm() <= tol * (1.0 + a.norm().max(b.norm()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn hadamard_eigenvalues_match_dense_solver(d in (1usize..=3).prop_flat_map(draw)) {
        let spec = build(&d);
        let nodes = discretize_measure(&spec, &spec.quadrature).unwrap();
        for s in frequencies(spec.n).into_iter().step_by(3) {
            let phi = symbol_matrix(&nodes, &s).unwrap();
            let m = phi.order();
            let dense = DMatrix::from_row_slice(m, m, &phi.to_dense());
            let mut reference: Vec<Complex64> = dense.schur().eigenvalues().unwrap().iter().copied().collect();
            for lam in phi.eigenvalues() {
                let (k, best) = reference
                    .iter()
                    .enumerate()
                    .map(|(k, r)| (k, (r - lam).norm()))
                    .min_by(|a, b| a.1.total_cmp(&b.1))
                    .unwrap();
                prop_assert!(best <= 1e-9 * (1.0 + lam.norm()), "{lam} unmatched at {s:?}");
                reference.swap_remove(k);
            }
        }
    }

    #[test]
    fn adjoint_spec_conjugates_the_symbol(d in (1usize..=2).prop_flat_map(draw)) {
        let spec = build(&d);
        let adj = adjoint_spec(&spec);
        let nodes = discretize_measure(&spec, &spec.quadrature).unwrap();
        let adj_nodes = discretize_measure(&adj, &adj.quadrature).unwrap();
        for s in frequencies(spec.n) {
            let phi = symbol_matrix(&nodes, &s).unwrap().adjoint();
            let psi = symbol_matrix(&adj_nodes, &s).unwrap();
            for (a, b) in phi.coeffs.iter().zip(&psi.coeffs) {
                prop_assert!(close(*a, *b, 1e-12), "{a} vs {b} at {s:?}");
            }
        }
    }

    #[test]
    fn composition_multiplies_symbols(d1 in draw(2), d2 in draw(2)) {
        let (a, b) = (build(&d1), build(&d2));
        let na = discretize_measure(&a, &a.quadrature).unwrap();
        let nb = discretize_measure(&b, &b.quadrature).unwrap();
        let ab = compose_specs(&a, &na, &b, &nb).unwrap();
        let nab = discretize_measure(&ab, &ab.quadrature).unwrap();
        for s in frequencies(2) {
            let want = symbol_matrix(&na, &s).unwrap().mul(&symbol_matrix(&nb, &s).unwrap());
            let got = symbol_matrix(&nab, &s).unwrap();
            for (x, y) in want.coeffs.iter().zip(&got.coeffs) {
                prop_assert!(close(*x, *y, 1e-11), "{x} vs {y} at {s:?}");
            }
        }
    }

    #[test]
    fn inverse_symbol_inverts(d in (1usize..=3).prop_flat_map(draw)) {
        let spec = build(&d);
        let nodes = discretize_measure(&spec, &spec.quadrature).unwrap();
        for s in frequencies(spec.n).into_iter().step_by(2) {
            let phi = symbol_matrix(&nodes, &s).unwrap();
            let Ok(inv) = symbol_inverse(&phi, 1e-6) else { continue };
            let id = phi.mul(&inv);
            for (k, c) in id.coeffs.iter().enumerate() {
                let want = if k == 0 { 1.0 } else { 0.0 };
                prop_assert!((c - want).norm() <= 1e-8, "coefficient {k} = {c} at {s:?}");
            }
        }
    }

    #[test]
    fn norm_never_exceeds_the_integral_bound(d in (1usize..=2).prop_flat_map(draw)) {
        let spec = build(&d);
        let nodes = discretize_measure(&spec, &spec.quadrature).unwrap();
        let grid = SGrid::uniform(spec.n, 10.0, 41).with_far_field(vec![100.0]);
        let report = operator_norm(&spec, &nodes, &grid).unwrap();
        prop_assert!(report.norm <= norm_bound(&spec, &nodes) * (1.0 + 1e-12));
    }

    #[test]
    fn documents_round_trip(d in (1usize..=3).prop_flat_map(draw)) {
        let spec = build(&d);
        let again = parse_config(&to_document(&spec).unwrap()).unwrap();
        let nodes = discretize_measure(&spec, &spec.quadrature).unwrap();
        let nodes2 = discretize_measure(&again, &again.quadrature).unwrap();
        for s in frequencies(spec.n).into_iter().step_by(4) {
            prop_assert_eq!(symbol_matrix(&nodes, &s).unwrap(), symbol_matrix(&nodes2, &s).unwrap());
        }
    }
}

#[test]
fn schedules_agree_bit_for_bit() {
    for spec in [
        hausdorff::fixtures::qcesaro(-0.25),
        hausdorff::fixtures::cesaro(2.0, 2),
    ] {
        let nodes = discretize_measure(&spec, &spec.quadrature).unwrap();
        let grid = GridSpec {
            axes: vec![Axis::symmetric(15.0, 33); spec.n],
        };
        let par = SymbolGrid::compute(&nodes, &grid, Execution::Parallel).unwrap();
        let seq = SymbolGrid::compute(&nodes, &grid, Execution::Sequential).unwrap();
        let (mut a, mut b) = (Vec::new(), Vec::new());
        par.write_csv(&mut a).unwrap();
        seq.write_csv(&mut b).unwrap();
        assert_eq!(a, b, "{}", spec.name);
    }
}
