//! FEM operators against quadrature and dense-assembly oracles.

mod common;

use common::*;
use heatopt::fem::{
    apply_delta_k, apply_k, diagonal_of_k, element_sensitivities, objective, reference_element,
};
use heatopt::linalg::{dot, norm2};
use heatopt::model::{heat_load, mid_left_nodes, StructuredMesh, ThermalModel};

fn model_2d(nel: usize, source: f64) -> ThermalModel<f64> {
    let mesh = StructuredMesh::new(2, &[nel, nel]).unwrap();
    let ne = mesh.elem_count();
    let sink = mid_left_nodes(&mesh);
    ThermalModel::new(mesh, 1.0, 1e-3, 3.0, vec![source; ne], sink).unwrap()
}

fn varied_rho(n: usize, seed: u64) -> Vec<f64> {
    random_vector(seed, n)
        .into_iter()
        .map(|v| 0.5 + 0.45 * v)
        .collect()
}

#[test]
fn reference_element_matches_quadrature_2d_and_3d() {
    for dim in [2usize, 3] {
        let em = reference_element::<f64>(dim);
        let oracle = gauss_element_matrix(dim);
        for i in 0..em.n {
            for j in 0..em.n {
                assert!(
                    (em.a[i][j] - oracle[i][j]).abs() < 1e-14,
                    "dim {dim} entry ({i},{j}): {} vs {}",
                    em.a[i][j],
                    oracle[i][j]
                );
            }
        }
    }
}

#[test]
fn apply_k_matches_dense_assembly() {
    let model = model_2d(2, 1e-4);
    let rho = vec![1.0; model.mesh.elem_count()];
    let dense = assemble_dense(&model, &rho);
    let v = random_vector(7, model.mesh.node_count());
    let ours = apply_k(&rho, &v, &model).unwrap();
    let reference = matvec_dense(&dense, &v);
    for (a, b) in ours.iter().zip(reference.iter()) {
        assert!((a - b).abs() < 1e-13);
    }
}

#[test]
fn apply_k_matches_dense_assembly_on_varied_densities_3d() {
    let mesh = StructuredMesh::new(3, &[2, 2, 2]).unwrap();
    let sink = vec![mesh.node_index(0, 0, 0), mesh.node_index(1, 0, 0)];
    let model = ThermalModel::new(mesh, 1.0, 1e-3, 3.0, vec![1e-4; 8], sink).unwrap();
    let rho = varied_rho(8, 3);
    let dense = assemble_dense(&model, &rho);
    let v = random_vector(11, model.mesh.node_count());
    let ours = apply_k(&rho, &v, &model).unwrap();
    let reference = matvec_dense(&dense, &v);
    for (a, b) in ours.iter().zip(reference.iter()) {
        assert!((a - b).abs() < 1e-13);
    }
}

#[test]
fn delta_k_equals_two_pass_difference() {
    let model = model_2d(4, 1e-4);
    let ne = model.mesh.elem_count();
    let rho_cur = varied_rho(ne, 1);
    let rho_ref = varied_rho(ne, 2);
    let v = random_vector(3, model.mesh.node_count());
    let one_pass = apply_delta_k(&rho_cur, &rho_ref, &v, &model).unwrap();
    let a = apply_k(&rho_cur, &v, &model).unwrap();
    let b = apply_k(&rho_ref, &v, &model).unwrap();
    for (i, o) in one_pass.iter().enumerate() {
        let two_pass = if model.dirichlet_mask[i] { 0.0 } else { a[i] - b[i] };
        assert!((o - two_pass).abs() < 1e-13, "node {i}");
    }
}

#[test]
fn diagonal_matches_dense_assembly() {
    let model = model_2d(4, 1e-4);
    let rho = varied_rho(model.mesh.elem_count(), 5);
    let dense = assemble_dense(&model, &rho);
    let diag = diagonal_of_k(&rho, &model);
    for i in 0..diag.len() {
        assert!((diag[i] - dense[i][i]).abs() < 1e-14);
    }
}

#[test]
fn operator_is_symmetric_and_spd_on_free_space() {
    let model = model_2d(6, 1e-4);
    let rho = varied_rho(model.mesh.elem_count(), 9);
    for seed in 0..5u64 {
        let u = random_vector(seed * 2 + 100, model.mesh.node_count());
        let v = random_vector(seed * 2 + 101, model.mesh.node_count());
        let ku = apply_k(&rho, &u, &model).unwrap();
        let kv = apply_k(&rho, &v, &model).unwrap();
        let a = dot(&u, &kv);
        let b = dot(&v, &ku);
        assert!(
            (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1e-30),
            "symmetry: {a} vs {b}"
        );
        // SPD on free-supported vectors
        let mut w = u.clone();
        for &s in &model.dirichlet {
            w[s] = 0.0;
        }
        let kw = apply_k(&rho, &w, &model).unwrap();
        assert!(dot(&w, &kw) > 0.0);
    }
}

#[test]
fn sensitivities_match_central_finite_differences() {
    // exact dense solves, h = 1e-6, per-element relative error <= 1e-4
    let model = model_2d(4, 1e-4);
    let ne = model.mesh.elem_count();
    let rho = varied_rho(ne, 13).iter().map(|v| v.clamp(0.2, 0.9)).collect::<Vec<_>>();
    let q = heat_load(&model);

    let dense = assemble_dense(&model, &rho);
    let t = lu_solve(&dense, &q);
    let analytic = element_sensitivities(&t, &rho, &model);

    let h = 1e-6;
    for e in 0..ne {
        let mut plus = rho.clone();
        plus[e] += h;
        let mut minus = rho.clone();
        minus[e] -= h;
        let fp = {
            let a = assemble_dense(&model, &plus);
            let tp = lu_solve(&a, &q);
            dot(&q, &tp)
        };
        let fm = {
            let a = assemble_dense(&model, &minus);
            let tm = lu_solve(&a, &q);
            dot(&q, &tm)
        };
        let fd = (fp - fm) / (2.0 * h);
        let rel = (analytic[e] - fd).abs() / analytic[e].abs().max(1e-30);
        assert!(rel <= 1e-4, "element {e}: analytic {} vs fd {fd}", analytic[e]);
    }
}

#[test]
fn objective_forms_agree_at_converged_solves() {
    let model = model_2d(4, 1e-4);
    let rho = vec![0.5; model.mesh.elem_count()];
    let q = heat_load(&model);
    let dense = assemble_dense(&model, &rho);
    let t = lu_solve(&dense, &q);
    let f_qt = objective(&t, &q);
    let kt = apply_k(&rho, &t, &model).unwrap();
    let f_energy = dot(&t, &kt);
    let res: f64 = {
        let r: Vec<f64> = kt.iter().zip(q.iter()).map(|(a, b)| a - b).collect();
        norm2(&r) / norm2(&q)
    };
    let bound = res * norm2(&t) * norm2(&q) + 1e-12 * f_qt.abs();
    assert!((f_qt - f_energy).abs() <= bound.max(1e-12));
}
