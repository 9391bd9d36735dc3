use metricfuse::bayes_opt::{optimize, BoConfig};

fn separable(targets: &'static [f64]) -> impl Fn(&[f64]) -> metricfuse::Result<f64> + Copy {
    move |w: &[f64]| Ok(-w.iter().zip(targets).map(|(x, t)| (x - t).powi(2)).sum::<f64>())
}

#[test]
fn concave_objectives_reach_their_optimum() {
    let cases: [&'static [f64]; 3] = [&[0.3], &[0.7, 0.2], &[0.4, 0.8, 0.1]];
    for targets in cases {
        let f = separable(targets);
        // The optimum is 0; "within 2%" is read against the objective's
        // range over the cube.
        let worst = -targets.iter().map(|t| t.max(1.0 - t).powi(2)).sum::<f64>();
        let hits = (0..10u64)
            .filter(|&seed| {
                let best = optimize(f, &BoConfig::new(targets.len(), seed)).unwrap().best_value;
                best >= 0.02 * worst
            })
            .count();
        assert!(hits >= 9, "{targets:?}: {hits}/10 seeds within 2%");
    }
}

#[test]
fn trace_points_stay_in_the_unit_cube() {
    let opt = optimize(separable(&[0.0, 1.0]), &BoConfig::new(2, 3).with_budget(5, 30)).unwrap();
    assert_eq!(opt.trace.len(), 35);
    assert!(opt
        .trace
        .iter()
        .all(|e| e.point.iter().all(|v| (0.0..=1.0).contains(v))));
}

#[test]
fn init_only_budget_returns_best_initial_point() {
    let opt = optimize(separable(&[0.5]), &BoConfig::new(1, 9).with_budget(1, 0)).unwrap();
    assert_eq!(opt.trace.len(), 1);
    assert_eq!(opt.best_point, opt.trace[0].point);
}
