use blitz_core::engine::{eps_grid, estimate_progress, estimate_solve, median, xi_grid, TuningModel};

#[test]
fn grid_sizes_and_ranges() {
    let xi = xi_grid();
    assert_eq!(xi.len(), 125);
    assert!((xi[0] - 1e-6).abs() < 1e-18 && xi[124] == 1.0);
    assert!(xi.windows(2).all(|w| w[0] < w[1]));
    let r = xi[1] / xi[0];
    assert!(xi.windows(2).all(|w| (w[1] / w[0] - r).abs() < 1e-9));
    let eps = eps_grid();
    assert_eq!(eps.len(), 10);
    assert!((eps[0] - 0.01).abs() < 1e-15 && eps[9] == 0.7);
    assert_eq!(TuningModel::new().xis().len() * TuningModel::new().epss().len(), 1250);
}

#[test]
fn solve_estimator() {
    assert_eq!(estimate_solve(2.0, 0.5, 1000.0), 0.001);
}

#[test]
fn progress_estimator() {
    // Δ halves with ξ = 0.5, ε = 0 → C = 1
    assert_eq!(estimate_progress(2.0, 1.0, 0.5, 0.0), Some(1.0));
    assert_eq!(estimate_progress(1.0, 0.25, 0.5, 0.5), Some(3.0));
}

#[test]
fn medians() {
    assert_eq!(median(&[]), None);
    assert_eq!(median(&[3.0]), Some(3.0));
    assert_eq!(median(&[5.0, 1.0]), Some(3.0));
    assert_eq!(median(&[9.0, 1.0, 4.0]), Some(4.0));
    assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]), Some(2.5));
}

#[test]
fn five_most_recent_setup_and_solve() {
    let mut m = TuningModel::new();
    assert_eq!((m.c_setup, m.c_solve, m.c_progress), (0.0, 0.0, 1.0));
    let setups = [10.0, 1.0, 2.0, 3.0, 4.0, 5.0, 100.0];
    for (k, &s) in setups.iter().enumerate() {
        // T^solve = s, ε = 0.5, size = 10 → Ĉ^solve = s / 20
        m.record(s, s, 0.5, 10.0, 0.5, 1.0, 0.5);
        let lo = (k + 1).saturating_sub(5);
        let window = &setups[lo..=k];
        assert_eq!(m.c_setup, median(window).unwrap(), "after {} records", k + 1);
        let solve: Vec<f64> = window.iter().map(|s| s * 0.5 / 10.0).collect();
        assert_eq!(m.c_solve, median(&solve).unwrap());
        assert!(m.setup_history.len() <= 5);
    }
    assert_eq!(m.c_setup, 4.0);
}

#[test]
fn progress_uses_two_most_recent_and_clamps() {
    let mut m = TuningModel::new();
    // Ĉ = (1 − Δ/Δprev)/((1−ε)ξ) with ξ = 0.5, ε = 0
    m.record(0.0, 0.0, 0.0, 1.0, 0.5, 1.0, 0.0); // 2.0
    assert_eq!(m.c_progress, 2.0);
    m.record(0.0, 0.0, 0.0, 1.0, 0.5, 1.0, 0.5); // 1.0
    assert_eq!(m.c_progress, 1.5);
    m.record(0.0, 0.0, 0.0, 1.0, 0.5, 1.0, 0.9); // 0.2
    assert!((m.c_progress - 0.6f64.max(1.0)).abs() < 1e-15);
    assert_eq!(m.progress_history.len(), 2);
    m.record(0.0, 0.0, 0.0, 1.0, 0.5, 1.0, 0.95); // 0.1
    assert_eq!(m.c_progress, 1.0);
}

#[test]
fn model_formulas() {
    let mut m = TuningModel::new();
    m.c_setup = 2.0;
    m.c_solve = 0.01;
    m.c_progress = 1.5;
    assert_eq!(m.predicted_time(100.0, 0.5), 2.0 + 0.01 * 100.0 / 0.5);
    assert_eq!(m.predicted_gap(4.0, 0.2, 0.5), (1.0 - 0.5 * 0.2 * 1.5) * 4.0);
    // ε floor
    assert_eq!(m.predicted_gap(4.0, 1.0, 0.7), (1.0 - 0.3 * 1.5f64).max(0.7) * 4.0);
}

#[test]
fn choice_is_grid_argmax() {
    let mut m = TuningModel::new();
    m.c_setup = 0.5;
    m.c_solve = 1e-4;
    m.c_progress = 1.2;
    let sizes: Vec<f64> = m.xis().iter().map(|xi| 100.0 + 1e4 * xi).collect();
    let (xi, eps) = m.choose(&sizes, 3.0);
    let score = |k: usize, e: f64| {
        let t = m.predicted_time(sizes[k], e);
        -(m.predicted_gap(3.0, m.xis()[k], e) / 3.0).ln() / t
    };
    let k = m.xis().iter().position(|x| *x == xi).unwrap();
    let best = score(k, eps);
    for kk in 0..m.xis().len() {
        for &e in m.epss() {
            assert!(score(kk, e) <= best);
        }
    }
}
