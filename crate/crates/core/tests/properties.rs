//! Randomized invariants across the modules.

use std::f64::consts::PI;

use laughlin_core::ground_state::{density_counts, minimize, MinimizeSettings};
use laughlin_core::incompressibility::{bathtub_energy, TrapPotential};
use laughlin_core::sampler::{
    acceptance_log_probability, delta_log_weight, disk_averages, DensityHistogram, HistogramGeometry,
};
use laughlin_core::states::{log_gibbs_weight, scaled_gradient, scaled_hamiltonian};
use laughlin_core::tf::{tf_solve, GridSpec, NucleiSet, TfSettings};
use laughlin_core::{Complex64, Configuration, PlasmaParams, Point, Prefactor};
use proptest::prelude::*;

fn points(n: usize, spread: f64) -> impl Strategy<Value = Vec<Point>> {
    prop::collection::vec([-spread..spread, -spread..spread], n)
}

fn fast() -> ProptestConfig {
    ProptestConfig::with_cases(12)
}

proptest! {
    #[test]
    fn temperature_times_n_is_one(n in 1usize..5000, ell in 1u32..9) {
        let p = PlasmaParams::new(n, ell).unwrap();
        prop_assert_eq!(p.temperature(), 1.0 / n as f64);
        // T * N rounds to within one ulp of 1.
        prop_assert!((p.temperature() * n as f64 - 1.0).abs() <= f64::EPSILON);
    }

    #[test]
    fn configurations_need_n_finite_points(pts in points(5, 3.0), bad in 0usize..5) {
        let p = PlasmaParams::new(5, 2).unwrap();
        prop_assert!(Configuration::new(pts.clone(), p).is_ok());
        prop_assert!(Configuration::new(pts[..4].to_vec(), p).is_err());
        let mut nan = pts;
        nan[bad][1] = f64::NAN;
        prop_assert!(Configuration::new(nan, p).is_err());
    }

    #[test]
    fn quadratic_coefficient_is_capped(re in -0.6f64..0.6, im in -0.6f64..0.6) {
        let c = Complex64::new(re, im);
        let ok = Prefactor::quadratic_exponential(c).is_ok();
        prop_assert_eq!(ok, c.norm() <= 0.4);
    }

    #[test]
    fn gradient_matches_central_differences(pts in points(6, 1.5), hole in [-2.0f64..2.0, -2.0f64..2.0]) {
        let p = PlasmaParams::new(6, 2).unwrap();
        let pf = Prefactor::single_hole(hole, 1).unwrap();
        let Ok(c) = Configuration::new(pts.clone(), p) else { return Ok(()) };
        // Skip near-singular draws.
        let near = pts.iter().enumerate().any(|(i, a)| {
            (hole[0] - a[0]).hypot(hole[1] - a[1]) * p.ground_to_physical() < 0.05
                || pts[i + 1..].iter().any(|b| (a[0] - b[0]).hypot(a[1] - b[1]) < 0.05)
        });
        prop_assume!(!near);
        let g = scaled_gradient(&c, &pf).unwrap();
        let step = 1e-6;
        for i in 0..6 {
            for k in 0..2 {
                let mut plus = pts.clone();
                let mut minus = pts.clone();
                plus[i][k] += step;
                minus[i][k] -= step;
                let fp = scaled_hamiltonian(&Configuration::new(plus, p).unwrap(), &pf).unwrap();
                let fm = scaled_hamiltonian(&Configuration::new(minus, p).unwrap(), &pf).unwrap();
                let fd = (fp - fm) / (2.0 * step);
                prop_assert!((fd - g[i][k]).abs() <= 1e-5 * g[i][k].abs().max(1.0), "{} vs {}", fd, g[i][k]);
            }
        }
    }

    #[test]
    fn acceptance_rule_is_reversible(delta in -50.0f64..50.0) {
        // pi(A) P(A->B) = pi(B) P(B->A) with pi(B)/pi(A) = exp(delta).
        let forward = acceptance_log_probability(delta);
        let backward = acceptance_log_probability(-delta);
        prop_assert_eq!(forward - backward, delta);
    }

    #[test]
    fn incremental_weight_matches_full_difference(
        pts in points(8, 1.0),
        i in 0usize..8,
        step in [-0.3f64..0.3, -0.3f64..0.3],
    ) {
        let p = PlasmaParams::new(8, 3).unwrap();
        let pf = Prefactor::single_hole([0.4, 0.1], 2).unwrap();
        let Ok(c) = Configuration::new(pts.clone(), p) else { return Ok(()) };
        let Ok(before) = log_gibbs_weight(&c, &pf) else { return Ok(()) };
        let mut moved = pts;
        moved[i] = [moved[i][0] + step[0], moved[i][1] + step[1]];
        let Ok(after) = log_gibbs_weight(&c.with_points(moved.clone()).unwrap(), &pf) else { return Ok(()) };
        let delta = delta_log_weight(&c, &pf, i, moved[i]).unwrap();
        prop_assert!((delta - (after - before)).abs() <= 1e-9 * before.abs().max(1.0));
    }

    #[test]
    fn histograms_integrate_to_one(
        counts in prop::collection::vec(prop::collection::vec(0u64..1000, 16 * 16), 1..5),
    ) {
        let g = HistogramGeometry::new([0.0, 0.0], 1.0, 0.125).unwrap();
        prop_assume!(counts.iter().all(|c| c.iter().sum::<u64>() > 0));
        let clipped = vec![0; counts.len()];
        let h = DensityHistogram::from_counts(g, counts, clipped);
        prop_assert!((h.integral() - 1.0).abs() <= 1e-12);
        prop_assert!(h.density().iter().all(|&d| d >= 0.0));
    }

    #[test]
    fn disk_flags_follow_their_definition(
        density in prop::collection::vec(0.0f64..0.4, 40 * 40),
        tol in 0.0f64..0.3,
        alpha in 0.3f64..0.5,
    ) {
        let p = PlasmaParams::new(50, 2).unwrap();
        let g = HistogramGeometry::new([0.0, 0.0], 2.5, 0.125).unwrap();
        let h = DensityHistogram::from_density(g, density).unwrap();
        for d in disk_averages(&h, p, alpha, tol).unwrap() {
            prop_assert!(d.radius > 0.0);
            prop_assert_eq!(d.exceeds, d.mean - 2.0 * d.stderr > (1.0 + tol) * d.bound);
        }
    }

    #[test]
    fn counts_are_monotone_in_radius(pts in points(30, 4.0), r in 0.5f64..3.0) {
        let c = density_counts(&pts, &[r, r + 0.5]);
        prop_assert!(c[0].count <= c[1].count);
        prop_assert!(c.iter().all(|c| c.within == (c.ratio <= c.allowance)));
    }

    #[test]
    fn bathtub_is_monotone_in_every_argument(
        n in 8usize..400,
        ell in 1u32..6,
        s in 0.1f64..6.0,
        ds in 0.01f64..1.0,
    ) {
        let e = |n: usize, ell: u32, s: f64| {
            bathtub_energy(PlasmaParams::new(n, ell).unwrap(), TrapPotential::new(s).unwrap())
        };
        let base = e(n, ell, s);
        prop_assert!(base > 0.0);
        prop_assert!(e(n, ell, s + ds) > base);
        prop_assert!(e(n + 1, ell, s) > base);
        prop_assert!(e(n, ell + 1, s) > base);
    }

    #[test]
    fn trap_exponent_must_be_positive(s in -3.0f64..3.0) {
        prop_assert_eq!(TrapPotential::new(s).is_ok(), s > 0.0);
    }
}

proptest! {
    #![proptest_config(fast())]

    #[test]
    fn minimizers_descend_and_centre(n in 2usize..9, seed in any::<u64>(), angle in 0.0..(2.0 * PI)) {
        let p = PlasmaParams::new(n, 2).unwrap();
        let settings = MinimizeSettings { restarts: 3, seed, ..MinimizeSettings::default() };
        let r = minimize(p, &Prefactor::Identity, &settings).unwrap();
        prop_assert!(r.converged);
        prop_assert!(r.energy.is_finite());
        for s in &r.restarts {
            prop_assert!(s.final_energy <= s.initial_energy);
            prop_assert!(r.energy <= s.final_energy);
        }
        let cx: f64 = r.points.iter().map(|q| q[0]).sum::<f64>() / n as f64;
        let cy: f64 = r.points.iter().map(|q| q[1]).sum::<f64>() / n as f64;
        prop_assert!(cx.hypot(cy) <= 1e-6);
        let (sn, cs) = angle.sin_cos();
        let rot: Vec<Point> = r.points.iter().map(|q| [cs * q[0] - sn * q[1], sn * q[0] + cs * q[1]]).collect();
        let e = scaled_hamiltonian(&Configuration::new(rot, p).unwrap(), &Prefactor::Identity).unwrap();
        prop_assert!((e - r.energy).abs() <= 1e-9 * r.energy.abs().max(1.0));
    }

    #[test]
    fn tf_solutions_are_feasible_and_descend(
        nuclei in prop::collection::vec([-0.8f64..0.8, -0.8f64..0.8], 1..4),
        shift in [-3.0f64..3.0, -3.0f64..3.0],
    ) {
        let distinct = nuclei.iter().enumerate().all(|(i, a)| {
            nuclei[i + 1..].iter().all(|b| (a[0] - b[0]).hypot(a[1] - b[1]) > 1e-3)
        });
        prop_assume!(distinct);
        let nuc = NucleiSet::new(nuclei).unwrap();
        let k = nuc.charge();
        let spec = GridSpec::padded(&nuc, 96).unwrap();
        let sol = tf_solve(&nuc, spec, &TfSettings::default()).unwrap();
        let h2 = spec.cell_area();
        prop_assert!(sol.sigma.values.iter().all(|&s| (0.0..=1.0).contains(&s)));
        prop_assert!((h2 * sol.sigma.values.iter().sum::<f64>() - k).abs() <= 1e-6);
        prop_assert!(sol.phi.values.iter().all(|v| v.is_finite()));
        prop_assert!(sol.region.area > 0.0);
        for w in sol.energy_history.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12 * w[0].abs().max(1.0));
        }
        // Translation covariance on the shifted grid, solved to round-off.
        let tight = TfSettings { relative_tolerance: 1e-13, max_iterations: 100_000, ..TfSettings::default() };
        let base = tf_solve(&nuc, spec, &tight).unwrap();
        let moved = nuc.translated(shift);
        let mut shifted = spec;
        shifted.origin = [spec.origin[0] + shift[0], spec.origin[1] + shift[1]];
        let other = tf_solve(&moved, shifted, &tight).unwrap();
        let diff = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        let dphi = diff(&base.phi.values, &other.phi.values);
        prop_assert!(dphi <= 1e-8, "phi differs by {}", dphi);
        prop_assert_eq!(&base.region.inside, &other.region.inside);
        // sigma is ill-conditioned where phi vanishes; its round-off floor is about 1e-7.
        let dsigma = diff(&base.sigma.values, &other.sigma.values);
        prop_assert!(dsigma <= 1e-6, "sigma differs by {}", dsigma);
    }
}
