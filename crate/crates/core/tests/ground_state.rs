use std::f64::consts::PI;

use laughlin_core::ground_state::{
    density_counts, exclusion_check, min_pairwise_distance, minimize, unit_disk_radius,
    verify_boundary_descent, ExclusionSettings, MinimizeSettings,
};
use laughlin_core::states::scaled_hamiltonian;
use laughlin_core::{Configuration, PlasmaParams, Prefactor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Energy of a flat coordinate vector, written out independently of the
/// library: confinement minus pair logarithms.
fn flat_energy(x: &[f64]) -> f64 {
    let n = x.len() / 2;
    let mut e = 0.0;
    for i in 0..n {
        e += 0.5 * PI * (x[2 * i] * x[2 * i] + x[2 * i + 1] * x[2 * i + 1]);
        for j in i + 1..n {
            let dx = x[2 * i] - x[2 * j];
            let dy = x[2 * i + 1] - x[2 * j + 1];
            let d2 = dx * dx + dy * dy;
            if d2 == 0.0 {
                return f64::INFINITY;
            }
            e -= 0.5 * d2.ln();
        }
    }
    e
}

/// Plain Nelder-Mead simplex search.
fn nelder_mead(f: &dyn Fn(&[f64]) -> f64, start: &[f64], step: f64, iters: usize) -> (Vec<f64>, f64) {
    let d = start.len();
    let mut simplex: Vec<Vec<f64>> = vec![start.to_vec()];
    for k in 0..d {
        let mut v = start.to_vec();
        v[k] += step;
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| f(v)).collect();
    for _ in 0..iters {
        let mut order: Vec<usize> = (0..=d).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();
        if (values[d] - values[0]).abs() <= 1e-15 * (1.0 + values[0].abs()) {
            break;
        }
        let centroid: Vec<f64> = (0..d)
            .map(|k| simplex[..d].iter().map(|v| v[k]).sum::<f64>() / d as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            (0..d).map(|k| centroid[k] + t * (simplex[d][k] - centroid[k])).collect()
        };
        let xr = along(-1.0);
        let fr = f(&xr);
        if fr < values[0] {
            let xe = along(-2.0);
            let fe = f(&xe);
            if fe < fr {
                simplex[d] = xe;
                values[d] = fe;
            } else {
                simplex[d] = xr;
                values[d] = fr;
            }
        } else if fr < values[d - 1] {
            simplex[d] = xr;
            values[d] = fr;
        } else {
            let xc = if fr < values[d] { along(-0.5) } else { along(0.5) };
            let fc = f(&xc);
            if fc < values[d].min(fr) {
                simplex[d] = xc;
                values[d] = fc;
            } else {
                for i in 1..=d {
                    for k in 0..d {
                        simplex[i][k] = simplex[0][k] + 0.5 * (simplex[i][k] - simplex[0][k]);
                    }
                    values[i] = f(&simplex[i]);
                }
            }
        }
    }
    let best = (0..=d).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap();
    (simplex[best].clone(), values[best])
}

/// Multistart Nelder-Mead, each start refined by repeated restarts with a
/// shrinking simplex.
fn oracle_minimum(n: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = f64::INFINITY;
    for _ in 0..12 {
        let start: Vec<f64> = (0..2 * n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (mut x, mut fx) = nelder_mead(&flat_energy, &start, 0.3, 20_000);
        let mut step = 0.1;
        for _ in 0..30 {
            let (y, fy) = nelder_mead(&flat_energy, &x, step, 20_000);
            if fy >= fx - 1e-15 {
                step *= 0.3;
                if step < 1e-7 {
                    break;
                }
            }
            if fy < fx {
                x = y;
                fx = fy;
            }
        }
        best = best.min(fx);
    }
    best
}

#[test]
fn small_minimizers_match_simplex_oracle() {
    for n in 2..=6 {
        let params = PlasmaParams::new(n, 2).unwrap();
        let r = minimize(params, &Prefactor::Identity, &MinimizeSettings::default()).unwrap();
        assert!(r.converged, "N = {n}");
        let oracle = oracle_minimum(n, 100 + n as u64);
        let rel = (r.energy - oracle).abs() / oracle.abs();
        assert!(rel <= 1e-6, "N = {n}: {} vs {oracle}", r.energy);
    }
}

#[test]
fn reported_energy_is_the_hamiltonian() {
    let params = PlasmaParams::new(9, 3).unwrap();
    let pf = Prefactor::single_hole([0.4, 0.1], 2).unwrap();
    let r = minimize(params, &pf, &MinimizeSettings::default()).unwrap();
    let c = Configuration::new(r.points.clone(), params).unwrap();
    assert!((scaled_hamiltonian(&c, &pf).unwrap() - r.energy).abs() < 1e-10);
}

#[test]
fn minimizers_obey_distance_and_density_bounds() {
    for (n, pf) in [
        (20, Prefactor::Identity),
        (30, Prefactor::single_hole([0.0, 0.0], 1).unwrap()),
    ] {
        let params = PlasmaParams::new(n, 2).unwrap();
        let r = minimize(params, &pf, &MinimizeSettings::default()).unwrap();
        assert!(r.converged);
        assert!(min_pairwise_distance(&r.points) >= 0.98 * unit_disk_radius());
        let droplet = (n as f64 / PI).sqrt();
        for c in density_counts(&r.points, &[2.0, 4.0, 0.5 * droplet]) {
            assert!(c.within, "{c:?}");
        }
    }
}

#[test]
fn pair_exclusion_on_a_minimizer() {
    let params = PlasmaParams::new(20, 2).unwrap();
    let r = minimize(params, &Prefactor::Identity, &MinimizeSettings::default()).unwrap();
    let report = exclusion_check(&r.points, 2, &ExclusionSettings::default()).unwrap();
    assert!(report.passed(), "{:?}", report.violations);
    assert!(!report.clusters.is_empty());
    for c in &report.clusters {
        assert!((c.area - 2.0).abs() <= 0.04, "{c:?}");
    }
}

#[test]
fn boundary_descent_between_nearest_pair() {
    let params = PlasmaParams::new(10, 2).unwrap();
    let r = minimize(params, &Prefactor::Identity, &MinimizeSettings::default()).unwrap();
    let pts = &r.points;
    let (mut a, mut b, mut best) = (0, 1, f64::INFINITY);
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            let d = (pts[i][0] - pts[j][0]).hypot(pts[i][1] - pts[j][1]);
            if d < best {
                (a, b, best) = (i, j, d);
            }
        }
    }
    let mid = [0.5 * (pts[a][0] + pts[b][0]), 0.5 * (pts[a][1] + pts[b][1])];
    // Midpoint is at distance >= 0.28 from a; move it inward to stay inside.
    let probe = [pts[a][0] + 0.5 * (mid[0] - pts[a][0]), pts[a][1] + 0.5 * (mid[1] - pts[a][1])];
    let config = r.configuration().unwrap();
    let rep = verify_boundary_descent(
        &config,
        &Prefactor::Identity,
        &[a],
        b,
        probe,
        &ExclusionSettings::default(),
    )
    .unwrap();
    assert!(rep.boundary_points >= 64);
    assert!(rep.descent_margin > 0.0, "{rep:?}");
    assert!(rep.phi_probe > 0.0);
}

#[test]
fn boundary_potential_and_probe_near_a_nucleus() {
    // Single nucleus at the origin, probe at (0.2, 0).
    let params = PlasmaParams::new(2, 2).unwrap();
    let config = Configuration::new(vec![[0.0, 0.0], [3.0, 0.0]], params).unwrap();
    let rep = verify_boundary_descent(
        &config,
        &Prefactor::Identity,
        &[0],
        1,
        [0.2, 0.0],
        &ExclusionSettings::default(),
    )
    .unwrap();
    let r = unit_disk_radius();
    let d: f64 = 0.2;
    let closed = -d.ln() + r.ln() - 0.5 * (r * r - d * d) / (r * r);
    let h = ExclusionSettings::default().cell_size();
    assert!((rep.phi_probe - closed).abs() < 0.02, "{} vs {closed}", rep.phi_probe);
    assert!(rep.phi_boundary_max_abs < 2.0 * h, "{}", rep.phi_boundary_max_abs);
    assert!(rep.passed);
}
