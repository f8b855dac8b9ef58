//! Independent checks of the ground-truth fields used by the cases.

use gp_pde_bench::cases::{cube_source, cube_truth, disk_truth, heat_reference, HEAT_DIFFUSIVITY};

/// Tridiagonal solve with constant bands.
fn thomas(lower: f64, diag: f64, upper: f64, rhs: &[f64]) -> Vec<f64> {
    let n = rhs.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = upper / diag;
    d[0] = rhs[0] / diag;
    for i in 1..n {
        let m = diag - lower * c[i - 1];
        c[i] = upper / m;
        d[i] = (rhs[i] - lower * d[i - 1]) / m;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

#[test]
fn crank_nicolson_matches_heat_reference() {
    let n = 201;
    let dx = 1.0 / (n - 1) as f64;
    let dt = 1.0 / (n - 1) as f64;
    let r = HEAT_DIFFUSIVITY * dt / (dx * dx);
    let xs: Vec<f64> = (0..n).map(|i| i as f64 * dx).collect();
    let mut u: Vec<f64> = xs.iter().map(|&x| (std::f64::consts::PI * x).sin()).collect();
    u[0] = 0.0;
    u[n - 1] = 0.0;
    let mut worst: f64 = 0.0;
    for step in 1..n {
        let rhs: Vec<f64> = (1..n - 1)
            .map(|i| 0.5 * r * u[i - 1] + (1.0 - r) * u[i] + 0.5 * r * u[i + 1])
            .collect();
        let inner = thomas(-0.5 * r, 1.0 + r, -0.5 * r, &rhs);
        u[1..n - 1].copy_from_slice(&inner);
        let t = step as f64 * dt;
        for (x, v) in xs.iter().zip(&u) {
            worst = worst.max((v - heat_reference(&[*x, t])).abs());
        }
    }
    assert!(worst <= 1e-4, "max deviation {worst}");
}

fn laplacian(f: impl Fn(&[f64]) -> f64, z: &[f64], h: f64) -> f64 {
    (0..z.len())
        .map(|k| {
            let shift = |s: f64| {
                let mut y = z.to_vec();
                y[k] += s;
                f(&y)
            };
            (shift(h) - 2.0 * f(z) + shift(-h)) / (h * h)
        })
        .sum()
}

#[test]
fn poisson_truths_satisfy_their_equations() {
    let h = 1e-3;
    for i in 0..50 {
        let a = i as f64 * 0.61803398875 % 1.0;
        let b = i as f64 * 0.41421356237 % 1.0;
        let c = i as f64 * 0.73205080757 % 1.0;
        let (r, th) = (a.sqrt() * 0.999, 2.0 * std::f64::consts::PI * b);
        let disk = [r * th.cos(), r * th.sin()];
        assert!((-laplacian(disk_truth, &disk, h) - 1.0).abs() < 1e-6);
        let cube = [a, b, c];
        let lhs = -laplacian(cube_truth, &cube, h);
        assert!((lhs - cube_source(&cube)).abs() < 1e-4 * cube_source(&cube).abs().max(1.0), "{lhs}");
    }
    for th in [0.0f64, 1.0, 2.5, 4.0] {
        assert!(disk_truth(&[th.cos(), th.sin()]).abs() < 1e-15);
    }
    for p in [[0.0, 0.3, 0.7], [1.0, 0.5, 0.5], [0.2, 1.0, 0.4], [0.6, 0.1, 0.0]] {
        assert!(cube_truth(&p).abs() < 1e-12);
    }
}

#[test]
fn heat_reference_satisfies_equation_and_initial_condition() {
    let h = 1e-4;
    for i in 1..20 {
        let x = i as f64 / 20.0;
        let t = (i as f64 * 0.37) % 1.0;
        let u = |x: f64, t: f64| heat_reference(&[x, t]);
        let ut = (u(x, t + h) - u(x, t - h)) / (2.0 * h);
        let uxx = (u(x + h, t) - 2.0 * u(x, t) + u(x - h, t)) / (h * h);
        assert!((ut - HEAT_DIFFUSIVITY * uxx).abs() < 1e-5);
        assert!((u(x, 0.0) - (std::f64::consts::PI * x).sin()).abs() < 1e-15);
    }
}
