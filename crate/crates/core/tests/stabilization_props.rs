#![allow(clippy::needless_range_loop)]

mod common;

use fcmg::assembly::{Discretization, QuadratureSettings};
use fcmg::geometry::ImplicitDomain;
use fcmg::mesh::adaptive_grid;
use fcmg::numerics::dot;
use fcmg::stabilization::{
    estimate_global, estimate_local, local_pencil, max_generalized_eig, EigenPencil,
};
use fcmg::DenseMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::perturbed_max_eig;

fn quad_form(m: &DenseMatrix, x: &[f64]) -> f64 {
    let n = m.dim();
    let mx: Vec<f64> = (0..n).map(|i| dot(m.row(i), x)).collect();
    dot(x, &mx)
}

#[test]
fn local_constant_bounds_the_flux_ratio() {
    let d = ImplicitDomain::default_circle();
    let g = adaptive_grid::<f64, _>(&d, 4, 1).unwrap();
    let disc = Discretization::new(g, &d, QuadratureSettings::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for c in disc.dirichlet_cut_cells() {
        let p = local_pencil(&disc, c).unwrap();
        let cmax = max_generalized_eig(&p, 1e-9).unwrap();
        for _ in 0..50 {
            let x: Vec<f64> = (0..p.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let (k, m) = (quad_form(&p.k, &x), quad_form(&p.m, &x));
            assert!(k <= cmax * m * (1.0 + 1e-8) + 1e-12 * k.abs());
        }
    }
}

#[test]
fn estimates_are_insensitive_to_the_truncation_tolerance() {
    let d = ImplicitDomain::default_circle();
    let g = adaptive_grid::<f64, _>(&d, 4, 1).unwrap();
    let disc = Discretization::new(g, &d, QuadratureSettings::default()).unwrap();
    let a = estimate_global(&disc, 1e-9).unwrap();
    let b = estimate_global(&disc, 1e-8).unwrap();
    assert!((a - b).abs() <= 1e-6 * a);
    let la = estimate_local(&disc, 1e-9).unwrap();
    let lb = estimate_local(&disc, 1e-8).unwrap();
    for (q, v) in &la {
        assert!((v - lb[q]).abs() <= 1e-6 * v);
    }
    let lmax = la.values().copied().fold(0.0, f64::max);
    assert!(a <= lmax * (1.0 + 1e-8), "global {a} local max {lmax}");
}

/// Gram matrix of `rows` after removing each row's mean, so constants lie in the kernel.
fn centered_gram(rows: &[[f64; 4]], scale: f64) -> DenseMatrix {
    let centered: Vec<[f64; 4]> = rows
        .iter()
        .map(|r| {
            let mean = r.iter().sum::<f64>() / 4.0;
            r.map(|v| v - mean)
        })
        .collect();
    DenseMatrix::from_fn(4, |i, j| {
        scale * centered.iter().map(|r| r[i] * r[j]).sum::<f64>()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rank_deficient_pencils_match_the_regularized_oracle(seed in any::<u64>(), scale in 0.1..10.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = || [(); 4].map(|_| rng.gen_range(-1.0..1.0));
        let m_rows = [draw(), draw(), draw()];
        let k_rows = [draw(), draw()];
        let m = centered_gram(&m_rows, 1.0);
        let k = centered_gram(&k_rows, scale);
        let eig = fcmg::numerics::sym_eigvals(&m).unwrap();
        prop_assume!(eig[1] > 1e-3 * eig[3]);
        let p = EigenPencil { k: k.clone(), m: m.clone(), dofs: (0..4).collect() };
        let ours = max_generalized_eig(&p, 1e-9).unwrap();
        let oracle = perturbed_max_eig(&k, &m);
        prop_assert!((ours - oracle).abs() <= 1e-6 * oracle, "ours {} oracle {}", ours, oracle);
    }
}
