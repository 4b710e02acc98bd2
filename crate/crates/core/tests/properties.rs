use nalgebra::DMatrix;
use proptest::prelude::*;

use ressim::analysis::detect_convergence;
use ressim::control::{allocate, norm, null_space, phi1, phi2, pseudo_inverse, ControllerState};
use ressim::diffusion::{mean_over, BoundaryKind, DiffusionParams, DiffusionSolver, PressureState, Scope};
use ressim::mesh::{build_grid, DomainGrid, Mask, ScalarField, Well, WellSet};
use ressim::seismicity::{sr_field, step_sr, SrParams, SrState};

fn grid(nx: usize, ny: usize) -> DomainGrid {
    build_grid((10.0, 8.0), (nx, ny), &Mask::full(nx, ny)).unwrap()
}

fn wells(g: &DomainGrid) -> WellSet {
    let n = g.n_cells();
    WellSet::new(vec![
        Well::new(g, "a", &[0]).unwrap(),
        Well::new(g, "b", &[n / 2]).unwrap(),
        Well::new(g, "c", &[n - 1]).unwrap(),
    ])
}

fn matrix(rows: usize, cols: usize, v: &[f64]) -> DMatrix<f64> {
    DMatrix::from_row_slice(rows, cols, &v[..rows * cols])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn seismicity_rate_stays_positive(
        ut in prop::collection::vec(-1e3f64..1e3, 16),
        h0 in prop::collection::vec(-5.0f64..5.0, 16),
        dt in 1e-4f64..0.1,
    ) {
        let g = grid(4, 4);
        let p = SrParams::from_density(&ScalarField::constant(&g, 1.0), 4.7, 1.08e-2, 0.99);
        let s = SrState { log_r: ScalarField(h0), t: 0.0 };
        let next = step_sr(&s, &p, &ScalarField(ut), dt).unwrap();
        prop_assert!(sr_field(&next).iter().all(|r| *r > 0.0 && r.is_finite()));
    }

    #[test]
    fn phi_homogeneity(
        sigma in prop::collection::vec(-10.0f64..10.0, 1..6),
        lambda in 1e-3f64..1e3,
        a1 in 0.01f64..10.0,
    ) {
        prop_assume!(norm(&sigma) > 1e-6);
        let scaled: Vec<f64> = sigma.iter().map(|s| lambda * s).collect();
        let p = phi1(&sigma, a1, 0.0);
        let q = phi1(&scaled, a1, 0.0);
        for (a, b) in p.iter().zip(&q) {
            prop_assert!((b - lambda.sqrt() * a).abs() <= 1e-12 * (1.0 + b.abs()));
        }
        // φ₂ is homogeneous of degree zero without the linear term
        let p2 = phi2(&sigma, a1, 0.0);
        let q2 = phi2(&scaled, a1, 0.0);
        for (a, b) in p2.iter().zip(&q2) {
            prop_assert!((b - a).abs() <= 1e-11 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn phi_chaining_and_sign(
        sigma in prop::collection::vec(-10.0f64..10.0, 1..6),
        a1 in 0.0f64..10.0,
        a2 in 0.0f64..10.0,
    ) {
        let r = norm(&sigma);
        prop_assume!(r > 1e-6);
        let p1 = phi1(&sigma, a1, a2);
        let p2 = phi2(&sigma, a1, a2);
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        prop_assert!(dot(&sigma, &p1) >= 0.0);
        prop_assert!(dot(&sigma, &p2) >= 0.0);
        // ‖φ₂‖ = (½α₁r^{-1/2} + α₂)(α₁r^{1/2} + α₂r)
        let expect = (0.5 * a1 / r.sqrt() + a2) * (a1 * r.sqrt() + a2 * r);
        prop_assert!((norm(&p2) - expect).abs() <= 1e-10 * (1.0 + expect));
    }

    #[test]
    fn b0_right_inverse(
        m in 1usize..4,
        extra in 0usize..5,
        v in prop::collection::vec(-1.0f64..1.0, 64),
    ) {
        let n = m + extra;
        let b0 = matrix(m, n, &v) + DMatrix::identity(m, n) * 3.0;
        let (pinv, rank) = pseudo_inverse(&b0);
        prop_assert_eq!(rank, m);
        let err = (&b0 * &pinv - DMatrix::<f64>::identity(m, m)).abs().max();
        prop_assert!(err < 1e-10, "{}", err);
    }

    #[test]
    fn demand_null_space_and_allocation(
        m in 1usize..3,
        nr in 1usize..3,
        extra in 0usize..4,
        v in prop::collection::vec(-1.0f64..1.0, 128),
        virt in prop::collection::vec(-5.0f64..5.0, 3),
        d in prop::collection::vec(-2.0f64..2.0, 3),
    ) {
        let n = m + nr + extra;
        let w = matrix(nr, n, &v[64..]).map(|x| 1.0 + 0.2 * x);
        let b0 = matrix(m, n, &v) + DMatrix::identity(m, n) * 3.0;
        let w_bar = null_space(&w).unwrap();
        prop_assert_eq!(w_bar.ncols(), n - nr);
        prop_assert!((&w * &w_bar).abs().max() < 1e-12);
        prop_assert!((w_bar.transpose() * &w_bar - DMatrix::<f64>::identity(n - nr, n - nr)).abs().max() < 1e-12);

        let state = match ControllerState::new(b0, Some(w.clone())) {
            Ok(s) => s,
            // random W rows may be nearly parallel to B0 rows; that is a legitimate rejection
            Err(_) => return Ok(()),
        };
        let q = allocate(&virt[..m], &state, Some(&d[..nr])).unwrap();
        let wq = &w * nalgebra::DVector::from_column_slice(&q);
        for i in 0..nr {
            prop_assert!((wq[i] - d[i]).abs() < 1e-10 * (1.0 + d[i].abs()), "{} vs {}", wq[i], d[i]);
        }
    }

    #[test]
    fn neumann_mass_balance(
        nx in 3usize..12,
        ny in 3usize..12,
        rates in prop::collection::vec(-10.0f64..10.0, 3),
        dt in 1e-4f64..0.5,
        u0 in prop::collection::vec(-3.0f64..3.0, 144),
        beta in 1e-4f64..1.0,
        c in 1.0f64..500.0,
    ) {
        let g = grid(nx, ny);
        let w = wells(&g);
        let params = DiffusionParams::uniform(&g, beta, c, BoundaryKind::Neumann);
        let mut solver = DiffusionSolver::new(&g, &params).unwrap();
        let state = PressureState::from_field(ScalarField(u0[..g.n_active()].to_vec()), &g);
        let before = mean_over(&state.u, Scope::Whole).unwrap();
        let (next, _) = solver.step(&state, &w, &rates, dt).unwrap();
        let after = mean_over(&next.u, Scope::Whole).unwrap();
        let expect = before + dt * rates.iter().sum::<f64>() / (beta * g.total_volume());
        prop_assert!((after - expect).abs() <= 1e-12 * before.abs().max(1.0), "{} vs {}", after, expect);
    }

    #[test]
    fn solver_is_deterministic(
        rates in prop::collection::vec(-1.0f64..1.0, 3),
        dt in 1e-3f64..0.1,
    ) {
        let g = grid(9, 7);
        let w = wells(&g);
        let params = DiffusionParams::uniform(&g, 0.01, 50.0, BoundaryKind::Dirichlet);
        let s0 = PressureState::zeros(&g);
        let mut a = DiffusionSolver::new(&g, &params).unwrap();
        let mut b = DiffusionSolver::new(&g, &params).unwrap();
        let (x, _) = a.step(&s0, &w, &rates, dt).unwrap();
        let (x, _) = a.step(&x, &w, &rates, dt).unwrap();
        let (y, _) = b.step(&s0, &w, &rates, dt).unwrap();
        let (y, _) = b.step(&y, &w, &rates, dt).unwrap();
        prop_assert_eq!(x, y);
    }

    #[test]
    fn convergence_time_monotone_in_threshold(
        values in prop::collection::vec(0.0f64..1.0, 1..60),
        a in 0.0f64..1.2,
        b in 0.0f64..1.2,
        hold in prop_oneof![Just(f64::INFINITY), 0.0f64..20.0],
    ) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let t: Vec<f64> = (0..values.len()).map(|k| k as f64 * 0.5).collect();
        let key = |x: Option<f64>| x.unwrap_or(f64::INFINITY);
        let t_lo = key(detect_convergence(&t, &values, lo, hold));
        let t_hi = key(detect_convergence(&t, &values, hi, hold));
        prop_assert!(t_hi <= t_lo);
    }
}

#[cfg(feature = "parallel")]
proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn parallel_and_sequential_reductions_agree(
        len in 0usize..60_000,
        seed in any::<u64>(),
    ) {
        let xs: Vec<f64> = (0..len)
            .map(|i| ((i as u64).wrapping_mul(6364136223846793005).wrapping_add(seed) >> 11) as f64 * 1e-12 - 2.0)
            .collect();
        let ys: Vec<f64> = xs.iter().map(|x| x.sin()).collect();
        prop_assert_eq!(ressim::par::sum_seq(&xs).to_bits(), ressim::par::sum_par(&xs).to_bits());
        prop_assert_eq!(ressim::par::dot_seq(&xs, &ys).to_bits(), ressim::par::dot_par(&xs, &ys).to_bits());
        prop_assert_eq!(ressim::par::sum(&xs).to_bits(), ressim::par::sum_seq(&xs).to_bits());
    }
}
