use super::*;

fn small(users: usize) -> Scenario {
    Scenario {
        name: "small".into(),
        seed: 5,
        repetitions: 3,
        topology: TopologySpec::Random { nodes: 6, links: 8, latency: 1.0 },
        resources: Resources { capacity_scale: 1e-4, ..Resources::default() },
        users: UserSpec { count: users, ..UserSpec::default() },
        ..Scenario::default()
    }
}

fn without_timings(mut r: ScenarioReport) -> ScenarioReport {
    for run in &mut r.runs {
        run.timings.clear();
    }
    r.summary.retain(|s| s.method != "timing");
    r
}

#[test]
fn reports_are_deterministic() {
    let a = without_timings(run_experiment(&small(40)).unwrap());
    let b = without_timings(run_experiment(&small(40)).unwrap());
    assert_eq!(a, b);
    assert_eq!(a.runs.len(), 3);
    assert!(a.runs.iter().all(|r| r.failures.is_empty()), "{:?}", a.runs[0].failures);
}

#[test]
fn histograms_sum_to_rejections() {
    let report = run_experiment(&small(60)).unwrap();
    for run in &report.runs {
        for m in run.methods.iter().filter(|m| m.method != "fractional") {
            let hist = rejection_histogram(run, &m.method);
            let total: usize = hist.iter().map(|h| h.2).sum();
            assert_eq!(total as f64, m.metrics["rejected_total"]);
            assert!(hist.windows(2).all(|w| w[0].1 >= w[1].1));
            assert_eq!(m.metrics["violations"], 0.0);
        }
    }
}

#[test]
fn zero_users_cost_nothing() {
    let report = run_experiment(&small(0)).unwrap();
    for run in &report.runs {
        for m in &run.methods {
            assert_eq!(m.metrics.get("rejected_total").copied().unwrap_or(0.0), 0.0);
            assert_eq!(m.metrics["cost"], 0.0);
        }
    }
}

#[test]
fn summary_averages_over_repetitions() {
    let report = run_experiment(&small(30)).unwrap();
    let row = report.summary.iter().find(|r| r.method == "pranos" && r.metric == "cost").unwrap();
    assert_eq!(row.n, 3);
    let costs: Vec<f64> = report.runs.iter().map(|r| r.metric("pranos", "cost").unwrap()).collect();
    let mean = costs.iter().sum::<f64>() / 3.0;
    let std = (costs.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / 2.0).sqrt();
    assert!((row.mean - mean).abs() < 1e-9 * mean.max(1.0));
    assert!((row.std - std).abs() < 1e-9 * std.max(1.0));
}

#[test]
fn exact_runs_only_within_ceiling() {
    let mut s = small(8);
    s.repetitions = 1;
    let run = &run_experiment(&s).unwrap().runs[0];
    assert!(run.method("exact").is_some());
    let exact = run.metric("exact", "cost").unwrap();
    assert!(run.metric("fractional", "cost").unwrap() <= exact * (1.0 + 1e-5) + 1e-9);
    assert!(exact <= run.metric("pranos", "cost").unwrap() * (1.0 + 1e-5) + 1e-9);
    let run = &run_experiment(&small(20)).unwrap().runs[0];
    assert!(run.method("exact").is_none());
}

#[test]
fn scenario_from_toml() {
    let text = r#"
        name = "hotspot"
        seed = 3
        repetitions = 2
        latency = "mixed"
        apps = 2

        [topology]
        kind = "preset"
        name = "5gen-like"

        [resources]
        capacity_scale = 0.5

        [users]
        count = 100
        distribution = { zipf = { a = 1.2 } }
        demand = { uniform = { low = 0.5, high = 1.5 } }

        [methods]
        exact = "never"
    "#;
    let s = Scenario::from_toml(text).unwrap();
    assert_eq!(s.latency, LatencyMode::Mixed);
    assert_eq!(s.users.distribution, EntryDistribution::Zipf { a: 1.2 });
    assert_eq!(s.resources.capacity_scale, 0.5);
    assert_eq!(s.resources.core.capacity, 2_500_000.0);
    assert!(Scenario::from_toml("repetitions = 0").is_err());
    let back = Scenario::from_toml(&toml::to_string(&s).unwrap()).unwrap();
    assert_eq!(back, s);
}

#[test]
fn writes_all_csv_files() {
    let dir = tempfile::tempdir().unwrap();
    let report = run_experiment(&small(20)).unwrap();
    write_report(&report, dir.path()).unwrap();
    for f in ["report.csv", "summary.csv", "rejections_by_dc.csv", "ecu_by_layer.csv", "timings.csv"] {
        let text = std::fs::read_to_string(dir.path().join(f)).unwrap();
        assert!(text.lines().count() > 1, "{f} is empty");
    }
}
