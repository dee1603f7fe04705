//! Trace behavior of the SAEM iteration on synthetic data: the
//! decreasing-stepsize phase must actually settle.

use zibr::model::ZibrParams;
use zibr::saem::{default_init, fit, StepSchedule};
use zibr::sampler::McmcConfig;
use zibr::simulate::{generate, SimConfig};

#[test]
fn k2_phase_trace_variance_decreases() {
    // Windowed variance of each parameter trace over the first 50 iterations
    // of the decreasing phase must exceed that of the last 50.
    let truth = ZibrParams::scalar(6.4, -0.5, -0.5, 0.5, 0.5, 0.49, 0.25);
    let data = generate(&SimConfig {
        params: truth,
        n_individuals: 60,
        t_per_individual: 10,
        seed: 15,
    })
    .unwrap();
    let schedule = StepSchedule { k1: 60, k2: 150 };
    let res = fit(&data, &default_init(&data), &schedule, 3, &McmcConfig::default(), 8).unwrap();

    let window_var = |range: std::ops::Range<usize>, pick: &dyn Fn(&ZibrParams) -> f64| {
        let vals: Vec<f64> = res.trace[range].iter().map(pick).collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64
    };

    type Pick = Box<dyn Fn(&ZibrParams) -> f64>;
    let picks: Vec<(&str, Pick)> = vec![
        ("a", Box::new(|p: &ZibrParams| p.a)),
        ("b", Box::new(|p: &ZibrParams| p.b)),
        ("alpha", Box::new(|p: &ZibrParams| p.alpha[0])),
        ("beta", Box::new(|p: &ZibrParams| p.beta[0])),
        ("sigma1_sq", Box::new(|p: &ZibrParams| p.sigma1_sq)),
        ("sigma2_sq", Box::new(|p: &ZibrParams| p.sigma2_sq)),
        ("phi", Box::new(|p: &ZibrParams| p.phi)),
    ];
    let k1 = schedule.k1;
    let total = schedule.total();
    for (name, pick) in &picks {
        let early = window_var(k1..k1 + 50, pick.as_ref());
        let late = window_var(total - 50..total, pick.as_ref());
        assert!(
            late < early,
            "{name}: late-window variance {late:.3e} not below early-window {early:.3e}"
        );
    }
}
