//! Closed-form oracles for the numerical building blocks.

use std::f64::consts::PI;

use anls::evolution::{self, EvolveConfig, OutcomeStatus};
use anls::functionals::Norms;
use anls::ground_state::{self, SolverOptions};
use anls::kernel;
use anls::spectral;
use anls::{Field, Grid2D, ModelParams};
use num_complex::Complex64;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn gaussian_functionals_match_closed_forms() {
    // e^{-x^2-y^2}: M = pi/2, ||u_x||^2 = pi/2, ||u_yy||^2 = 3 pi/2, ||u||_4^4 = pi/4
    let f = Field::gaussian(Grid2D::square(128, 12.0).unwrap(), 1.0, 1.0, 1.0);
    let n = Norms::of(&f, 4.0);
    assert!(rel(n.mass, PI / 2.0) < 1e-12);
    assert!(rel(n.dx_sq, PI / 2.0) < 1e-12);
    assert!(rel(n.dyy_sq, 1.5 * PI) < 1e-12);
    assert!(rel(n.lp, PI / 4.0) < 1e-12);
    assert!(rel(n.energy(), 0.5 * (PI / 2.0 + 1.5 * PI) - PI / 16.0) < 1e-12);
}

#[test]
fn plane_waves_are_eigenfunctions_of_the_derivatives() {
    let g = Grid2D::new(32, 64, 10.0, 7.0).unwrap();
    let (kx, ky) = (2.0 * PI * 3.0 / 10.0, 2.0 * PI * -5.0 / 7.0);
    let f = Field::from_fn(g, |x, y| Complex64::from_polar(1.0, kx * x + ky * y));
    let dx = spectral::dx(&f).unwrap();
    let dyy = spectral::dyy(&f).unwrap();
    for ((a, b), c) in f.data().iter().zip(dx.data()).zip(dyy.data()) {
        assert!((a * Complex64::new(0.0, kx) - b).norm() < 1e-12);
        assert!((a * (-ky * ky) - c).norm() < 1e-11);
    }
}

#[test]
fn linear_flow_of_a_plane_wave_is_exact() {
    let g = Grid2D::new(32, 32, 8.0, 8.0).unwrap();
    let (kx, ky) = (2.0 * PI * 2.0 / 8.0, 2.0 * PI * 3.0 / 8.0);
    let f = Field::from_fn(g, |x, y| Complex64::from_polar(0.5, kx * x + ky * y));
    let t = 0.37;
    let out = spectral::linear_propagate(&f, t).unwrap();
    let phase = Complex64::from_polar(1.0, -(kx * kx + ky.powi(4)) * t);
    for (a, b) in f.data().iter().zip(out.data()) {
        assert!((a * phase - b).norm() < 1e-12);
    }
}

#[test]
fn flat_state_rotates_by_its_nonlinear_phase() {
    // a constant c solves i c' + |c|^(p-2) c = 0, so c(t) = c e^{i |c|^(p-2) t}
    let g = Grid2D::new(16, 16, 5.0, 5.0).unwrap();
    let c = 0.8;
    let p = 3.0;
    let f = Field::from_real_fn(g, |_, _| c);
    let mut psi = f.clone();
    let params = ModelParams::new(p, 1.0).unwrap();
    for _ in 0..500 {
        psi = evolution::step_strang(&psi, 1e-3, &params).unwrap();
    }
    let expected = Complex64::from_polar(c, c.powf(p - 2.0) * 0.5);
    for z in psi.data() {
        assert!((z - expected).norm() < 1e-12);
    }
}

#[test]
fn zero_field_evolves_to_zero_with_zero_diagnostics() {
    let g = Grid2D::new(32, 32, 10.0, 10.0).unwrap();
    let out = evolution::evolve(&Field::zeros(g), &EvolveConfig::new(1e-2, 0.2).with_stride(2), &ModelParams::new(4.0, 1.0).unwrap())
        .unwrap();
    assert_eq!(out.status, OutcomeStatus::Completed);
    assert_eq!(out.t_final, 0.2);
    assert!(out.final_field.is_zero());
    for r in &out.records {
        for v in [r.mass, r.energy, r.q, r.k, r.virial, r.h12_norm, r.boundary_mass_fraction] {
            assert_eq!(v, 0.0);
        }
    }
}

#[test]
fn ground_state_meets_pohozaev_identities_and_closed_form_constant() {
    let g = Grid2D::square(128, 20.0).unwrap();
    let params = ModelParams::new(4.0, 1.0).unwrap();
    let r = ground_state::petviashvili_solve(&params, &g, &ground_state::default_seed(g), &SolverOptions::default()).unwrap();
    assert!(r.residual_l2 < 1e-8);
    assert!(r.pohozaev.max_abs() < 1e-6);
    let gn = ground_state::gn_constant_from_ground_state(&r);
    let q = anls::functionals::gn_quotient(&r.profile, 4.0).unwrap();
    assert!(rel(q, gn.c_opt) < 1e-6, "{q} vs {}", gn.c_opt);
    assert!(rel(gn.c_star, (7.0 / (3.0 * gn.c_opt)).powf(3.0 / 8.0)) < 1e-14);
}

#[test]
fn omega_scaling_of_the_ground_state_action() {
    // ground states at two frequencies map onto the same unit-frequency mass
    let g = Grid2D::square(256, 20.0).unwrap();
    let p = 4.0;
    let solve = |omega: f64| {
        let params = ModelParams::new(p, omega).unwrap();
        ground_state::petviashvili_solve(&params, &g, &ground_state::default_seed(g), &SolverOptions::default()).unwrap()
    };
    let (a, b) = (solve(1.0), solve(1.5));
    let ma = ground_state::unit_frequency_mass(a.norms.mass, p, 1.0);
    let mb = ground_state::unit_frequency_mass(b.norms.mass, p, 1.5);
    assert!(rel(mb, ma) < 1e-6, "{ma} vs {mb}");
}

#[test]
fn kernel_is_even_in_each_variable_and_positive_on_the_x_axis() {
    let tol = 1e-10;
    for &(x, y) in &[(0.7, 1.3), (2.0, 0.5), (1.1, 2.4)] {
        let k = kernel::kernel_eval(x, y, tol).unwrap();
        assert_eq!(k, kernel::kernel_eval(-x, y, tol).unwrap());
        assert_eq!(k, kernel::kernel_eval(x, -y, tol).unwrap());
    }
    for x in [0.5, 1.0, 2.0, 4.0] {
        assert!(kernel::kernel_eval(x, 0.0, tol).unwrap() > 0.0);
    }
    assert!(kernel::kernel_eval(0.0, 0.0, tol).is_err());
}

#[test]
fn h2_at_zero_is_the_quartic_gaussian_integral() {
    // H2(0, 1) = 2 int_0^inf e^{-xi^4} d xi = 2 Gamma(5/4)
    let direct = kernel::h2_direct(0.0);
    assert!(rel(direct, kernel::h2_unit(0.0)) < 1e-12);
    assert!(rel(kernel::h2_unit(0.0), 2.0 * kernel::QUARTIC_GAUSSIAN_INTEGRAL) < 1e-12);
}
