use std::f64::consts::PI;

use approx::assert_relative_eq;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use vicinal::continuum::{pde_rhs, semi_implicit_matrix};
use vicinal::energetics::{dissipation_energy, free_energy};
use vicinal::grid::{diff2, diff4, PeriodicField, PeriodicGrid};
use vicinal::harness::format_f64;
use vicinal::pentadiag::CyclicPentadiagonal;
use vicinal::step_chain::{step_energy, to_slopes, velocities, StepConfiguration, VelocityLaw};

fn positive_field(n: usize) -> impl Strategy<Value = PeriodicField> {
    prop::collection::vec(0.5f64..2.0, n)
        .prop_map(move |v| PeriodicField::new(PeriodicGrid::unit(n).unwrap(), v).unwrap())
}

fn smooth_field(n: usize) -> impl Strategy<Value = PeriodicField> {
    (0.0f64..0.3, 0.0f64..0.2, 0.0..2.0 * PI).prop_map(move |(a, b, th)| {
        PeriodicField::from_fn(PeriodicGrid::unit(n).unwrap(), |h| {
            1.0 + a * (2.0 * PI * h + th).sin() + b * (4.0 * PI * h).cos()
        })
        .unwrap()
    })
}

fn step_train() -> impl Strategy<Value = StepConfiguration> {
    prop::collection::vec(0.2f64..1.0, 4..24).prop_map(|gaps| {
        let total: f64 = gaps.iter().sum();
        let mut x = 0.0;
        let pos = gaps
            .iter()
            .map(|g| {
                let p = x;
                x += g / total;
                p
            })
            .collect();
        StepConfiguration::new(1.0, pos).unwrap()
    })
}

proptest! {
    #[test]
    fn rhs_commutes_with_index_shifts(u in positive_field(32), k in -40isize..40, eps in 0.0f64..1e-2) {
        let lhs = pde_rhs(&u.shifted(k), eps);
        let rhs = pde_rhs(&u, eps).shifted(k);
        prop_assert!(lhs.max_abs_diff(&rhs) <= 1e-9 * rhs.values().iter().fold(1.0, |m, v| f64::max(m, v.abs())));
    }

    #[test]
    fn fourth_difference_sums_by_parts(f in positive_field(24), g in positive_field(24)) {
        let lhs: f64 = f.values().iter().zip(diff4(&g).values()).map(|(a, b)| a * b).sum();
        let rhs: f64 = diff2(&f).values().iter().zip(diff2(&g).values()).map(|(a, b)| a * b).sum();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(rhs.abs()).max(1.0));
    }

    #[test]
    fn degenerate_flow_keeps_reciprocal_integral(u in positive_field(40)) {
        // d/dt sum(1/u) = -sum(u_t / u^2) = sum D4(u^3) = 0
        let r = pde_rhs(&u, 0.0);
        let rate: f64 = r.values().iter().zip(u.values()).map(|(d, v)| d / (v * v)).sum();
        let scale: f64 = r.values().iter().zip(u.values()).map(|(d, v)| (d / (v * v)).abs()).sum();
        prop_assert!(rate.abs() <= 1e-12 * scale.max(1.0));
    }

    #[test]
    fn energies_are_translation_invariant(u in smooth_field(64), k in 0isize..64) {
        let v = u.shifted(k);
        assert_relative_eq!(dissipation_energy(&u), dissipation_energy(&v), max_relative = 1e-12);
        assert_relative_eq!(free_energy(&u), free_energy(&v), max_relative = 1e-12);
    }

    #[test]
    fn step_energy_and_velocities_are_translation_invariant(c in step_train(), dx in -3.0f64..3.0) {
        let moved = c.translated(dx);
        assert_relative_eq!(step_energy(&c), step_energy(&moved), max_relative = 1e-10);
        let (v0, v1) = (velocities(&c, VelocityLaw::Adl), velocities(&moved.canonical(), VelocityLaw::Adl));
        let total: f64 = v0.iter().sum();
        let scale = v0.iter().fold(1.0, |m, v| f64::max(m, v.abs()));
        prop_assert!(total.abs() <= 1e-10 * scale * v0.len() as f64);
        let mut a = v0.clone();
        let mut b = v1.clone();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-8 * scale);
        }
    }

    #[test]
    fn slopes_of_a_train_average_to_the_inverse_terrace_mean(c in step_train()) {
        let s = to_slopes(&c);
        let mean_w = c.period() / c.len() as f64;
        let harmonic = s.values().len() as f64 / s.values().iter().map(|u| 1.0 / u).sum::<f64>();
        assert_relative_eq!(harmonic, c.step_height() / mean_w, max_relative = 1e-12);
    }

    #[test]
    fn pentadiagonal_solve_matches_dense_lu(
        n in 5usize..40,
        seed in prop::collection::vec(-1.0f64..1.0, 5 * 40),
        rhs in prop::collection::vec(-1.0f64..1.0, 40),
    ) {
        let take = |k: usize| seed[k * n..(k + 1) * n].to_vec();
        let mut a = CyclicPentadiagonal {
            lower2: take(0),
            lower1: take(1),
            diag: take(2),
            upper1: take(3),
            upper2: take(4),
        };
        for d in &mut a.diag {
            *d += 4.5f64.copysign(*d);
        }
        let b = &rhs[..n];
        let sol = a.solve(b, 1e-12, 1.0).unwrap();
        let dense = DMatrix::from_fn(n, n, |i, j| a.to_dense()[i][j]);
        let x = dense.lu().solve(&DVector::from_column_slice(b)).unwrap();
        for (p, q) in sol.x.iter().zip(x.iter()) {
            prop_assert!((p - q).abs() <= 1e-11);
        }
    }

    #[test]
    fn formatted_numbers_round_trip(v in any::<f64>().prop_filter("finite", |v| v.is_finite())) {
        prop_assert_eq!(format_f64(v).parse::<f64>().unwrap(), v);
    }
}

#[test]
fn semi_implicit_matrix_is_identity_plus_scaled_biharmonic() {
    let g = PeriodicGrid::unit(16).unwrap();
    let u = PeriodicField::from_fn(g, |h| 1.0 + 0.3 * (2.0 * PI * h).cos()).unwrap();
    let w = PeriodicField::from_fn(g, |h| (6.0 * PI * h).sin() + 0.2).unwrap();
    let (eps, dt) = (1e-3, 1e-6);
    let a = semi_implicit_matrix(&u, eps, dt);
    let d4 = diff4(&w);
    for i in 0..16 {
        let v = u.values()[i];
        let m = v.powi(6) / (eps + v * v);
        let expected = w.values()[i] + 3.0 * dt * m * d4.values()[i];
        assert_relative_eq!(a.apply(w.values())[i], expected, max_relative = 1e-12);
    }
    let dense = DMatrix::from_fn(16, 16, |i, j| a.to_dense()[i][j]);
    assert!(dense.determinant().abs() > 0.0);
}
