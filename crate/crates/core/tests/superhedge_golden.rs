use leland_core::asymptotics::{corrector, superhedge_rho, LimitContext, SUPERHEDGE_REL_TOL};
use leland_core::experiment::{run_ensemble, ExperimentConfig};

const SQRT_8_OVER_PI: f64 = 1.595_769_121_605_730_7;

// Recorded from the first run of this test; a change means the simulation,
// the corrector or the search moved.
const GOLDEN_RHO_STAR: f64 = 4.446_752_207_085_515_4e-3;

fn hull_white_states() -> (Vec<(f64, f64)>, LimitContext) {
    let cfg = ExperimentConfig::hull_white_default();
    let (records, _) = run_ensemble(&cfg, 100).unwrap();
    let states = records.iter().map(|r| (r.s1, r.y1)).collect();
    let ctx = LimitContext {
        strike: cfg.hedge.strike,
        kappa: cfg.hedge.kappa,
        rho: cfg.hedge.schedule.rho,
        sigma_fn: cfg.model.sigma_fn,
    };
    (states, ctx)
}

#[test]
fn hull_white_superhedge_threshold_is_stable() {
    let (states, ctx) = hull_white_states();
    let grid: Vec<f64> = (0..100).map(|i| 10f64.powf(-6.0 + 8.0 * i as f64 / 99.0)).collect();
    let found = superhedge_rho(&states, &ctx, &grid).unwrap();
    assert!(found.rho_star <= 10.0 * SQRT_8_OVER_PI);
    assert!(
        (found.rho_star - GOLDEN_RHO_STAR).abs() <= 1e-9 * GOLDEN_RHO_STAR,
        "rho_star {:e}",
        found.rho_star
    );

    let worst = |rho: f64| {
        states
            .iter()
            .map(|&(x, y)| corrector(x, y, &ctx.with_rho(rho)).unwrap())
            .fold(f64::INFINITY, f64::min)
    };
    assert!(worst(found.rho_star) >= 0.0);
    assert!(worst(found.rho_star * (1.0 - 2.0 * SUPERHEDGE_REL_TOL)) < 0.0);
}
