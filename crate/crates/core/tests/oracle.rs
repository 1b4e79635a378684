mod common;

use std::f64::consts::PI;

use ch_gsav::{Grid, GsavState, SpectralField};
use common::{coefficient_gap, dense_step, random_state, values, Dense};

#[test]
fn one_step_matches_dense_reference() {
    let dense = Dense::new(2, 8, 2.0 * PI);
    for seed in 0..20 {
        let (mut state, tau) = random_state(seed);
        let reference = dense_step(&dense, &state, tau);
        let rec = state.advance(tau).unwrap();
        let gap_bar = coefficient_gap(&dense, state.phi_bar(), &reference.phi_bar);
        let gap = coefficient_gap(&dense, state.phi(), &reference.phi);
        assert!(gap_bar < 1e-10 && gap < 1e-10, "seed {seed}: {gap_bar:e} {gap:e}");
        assert!((rec.gamma - reference.gamma).abs() <= 1e-12 * reference.gamma);
        assert!((rec.energy - reference.energy).abs() <= 1e-11 * (1.0 + reference.energy));
        assert!((rec.xi - reference.xi).abs() < 1e-12);
        assert!((rec.dissipation - reference.dissipation).abs() <= 1e-11 * (1.0 + reference.dissipation));
    }
}

#[test]
fn dense_energy_matches_library_energy() {
    let dense = Dense::new(2, 8, 2.0 * PI);
    let grid = Grid::new(2, 8, 2.0 * PI).unwrap();
    let field = SpectralField::from_fn(grid, |x| 0.3 * x[0].sin() + 0.2 * (3.0 * x[1]).cos() + 0.1 * (4.0 * x[0]).cos());
    let e = ch_gsav::energy(&field, 0.4).unwrap();
    assert!((e - dense.energy(&values(&field), 0.4)).abs() < 1e-12 * e);
}

#[test]
fn dense_oracle_in_three_dimensions() {
    let dense = Dense::new(3, 4, 2.0 * PI);
    let grid = Grid::new(3, 4, 2.0 * PI).unwrap();
    let phi0 = SpectralField::from_fn(grid, |x| 0.2 + 0.5 * x[0].cos() * x[1].sin() - 0.3 * (2.0 * x[2]).sin());
    let mut state = GsavState::new(&phi0, 0.5).unwrap();
    for tau in [0.01, 0.03, 0.012] {
        let reference = dense_step(&dense, &state, tau);
        state.advance(tau).unwrap();
        assert!(coefficient_gap(&dense, state.phi(), &reference.phi) < 1e-10);
        assert!((state.gamma() - reference.gamma).abs() < 1e-12 * reference.gamma);
    }
}
