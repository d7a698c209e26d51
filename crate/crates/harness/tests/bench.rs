use blitz_harness::bench::{
    build_instance, cached_reference, prepare, read_jsonl, run_arm, run_benchmark, screen_report, Arm, ArmOptions,
    DataSource, LogRecord, Reg, RunConfig, Task,
};
use blitz_harness::fixtures::{make_fixture, FixtureKind, FixtureSpec};
use blitz_harness::preprocess::PreprocessOptions;

fn opts() -> PreprocessOptions {
    PreprocessOptions { min_nnz: 1, ..Default::default() }
}

fn check_log(records: &[LogRecord], arm: Arm) {
    assert!(records.len() >= 2);
    for w in records.windows(2) {
        assert!(w[1].wall_seconds > w[0].wall_seconds);
        assert!(w[1].rel_subopt <= w[0].rel_subopt);
        assert!(w[1].work >= w[0].work);
        assert!(w[1].screened_count >= w[0].screened_count);
        assert!(w[1].t > w[0].t);
    }
    for r in records {
        assert!(r.rel_subopt >= 0.0);
        assert_eq!(r.xi.is_some(), arm == Arm::BlitzWs && r.t > 0);
    }
}

#[test]
fn arms_agree_and_logs_are_monotone() {
    let dir = tempfile::tempdir().unwrap();
    for (task, kind, reg) in [
        (Task::Lasso, FixtureKind::Lasso, Reg::Ratio(0.1)),
        (Task::Logreg, FixtureKind::Logreg, Reg::Ratio(0.2)),
        (Task::Grouplasso, FixtureKind::Group, Reg::Ratio(0.2)),
        (Task::Svm, FixtureKind::Svm, Reg::C(0.5)),
    ] {
        let cfg = RunConfig {
            task,
            data: DataSource::Synthetic(FixtureSpec::new(kind, 11, 80, 120)),
            reg,
            arms: Arm::ALL.to_vec(),
            options: ArmOptions { tol: 1e-10, ..Default::default() },
            preprocess: opts(),
            bias: task == Task::Logreg,
            out: Some(dir.path().join(task.name())),
            cache_dir: None,
        };
        let out = run_benchmark(&cfg).unwrap();
        for run in &out.runs {
            let s = &run.summary;
            assert!(s.converged, "{task:?} {:?}", s.arm);
            assert!(s.rel_subopt <= 1e-7, "{task:?} {:?}: {}", s.arm, s.rel_subopt);
            assert!(s.work_to_1e6.is_some());
            let path = dir.path().join(task.name()).join(format!("{}_{}.jsonl", task.name(), s.arm.name()));
            let back = read_jsonl(&path).unwrap();
            assert_eq!(back, run.records);
            check_log(&back, s.arm);
        }
        assert!(dir.path().join(task.name()).join("summary.json").exists());
    }
}

#[test]
fn jsonl_field_order_is_fixed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        task: Task::Lasso,
        data: DataSource::Synthetic(FixtureSpec::new(FixtureKind::Lasso, 2, 40, 60)),
        reg: Reg::Ratio(0.3),
        arms: vec![Arm::Plain],
        options: ArmOptions::default(),
        preprocess: opts(),
        bias: false,
        out: Some(dir.path().to_path_buf()),
        cache_dir: None,
    };
    run_benchmark(&cfg).unwrap();
    let text = std::fs::read_to_string(dir.path().join("lasso_plain.jsonl")).unwrap();
    let first = text.lines().next().unwrap();
    let keys = ["t", "wall_seconds", "rel_subopt", "ws_size", "xi", "eps", "screened_count", "gap", "work"];
    let mut at = 0;
    for k in keys {
        let pos = first[at..].find(&format!("\"{k}\":")).unwrap_or_else(|| panic!("{k} missing or out of order"));
        at += pos + 1;
    }
    // no certificate yet at t = 0
    assert!(first.contains("\"gap\":null"));
}

#[test]
fn lambda_ratio_is_relative_to_lambda_max() {
    let fx = make_fixture(&FixtureSpec::new(FixtureKind::Lasso, 3, 50, 80)).unwrap();
    let prep = prepare(Task::Lasso, &fx.dataset, None, opts(), false).unwrap();
    let a = build_instance(&prep, Reg::Ratio(0.02)).unwrap();
    let lmax = a.lambda_max.unwrap();
    assert!((a.value - 0.02 * lmax).abs() <= 1e-15 * lmax);
    let b = build_instance(&prep, Reg::Lambda(0.02 * lmax)).unwrap();
    assert_eq!(a.key, b.key);
    // at λ_max the solution is zero
    let top = build_instance(&prep, Reg::Ratio(1.0)).unwrap();
    let reference = cached_reference(&top, None).unwrap();
    let run = run_arm(&top, &reference, Arm::BlitzWs, &ArmOptions::default()).unwrap();
    assert!(run.w.iter().all(|w| w.abs() < 1e-9));
    assert!(build_instance(&prep, Reg::C(1.0)).is_err());
    assert!(build_instance(&prep, Reg::Ratio(-1.0)).is_err());
}

#[test]
fn reference_cache_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let fx = make_fixture(&FixtureSpec::new(FixtureKind::Svm, 4, 60, 30)).unwrap();
    let prep = prepare(Task::Svm, &fx.dataset, None, opts(), false).unwrap();
    let inst = build_instance(&prep, Reg::C(0.1)).unwrap();
    let a = cached_reference(&inst, Some(dir.path())).unwrap();
    assert!(dir.path().join(format!("{}.json", inst.key)).exists());
    let b = cached_reference(&inst, Some(dir.path())).unwrap();
    assert_eq!(a, b);
    assert!(a.g_star <= a.g_best && a.g_best - a.g_star <= 1e-12 * (1.0 + a.g_star.abs()) + a.gap);
    let other = build_instance(&prep, Reg::C(0.2)).unwrap();
    assert_ne!(other.key, inst.key);
}

#[test]
fn screening_count_never_drops() {
    let fx = make_fixture(&FixtureSpec::new(FixtureKind::Lasso, 5, 60, 300)).unwrap();
    let prep = prepare(Task::Lasso, &fx.dataset, None, opts(), false).unwrap();
    let inst = build_instance(&prep, Reg::Ratio(0.3)).unwrap();
    let reference = cached_reference(&inst, None).unwrap();
    for arm in [Arm::PlainBlitzScreen, Arm::PlainGapSafe] {
        let run = run_arm(&inst, &reference, arm, &ArmOptions::default()).unwrap();
        check_log(&run.records, arm);
        assert!(run.summary.screened_count > 0, "{arm:?}");
    }
    let blitz = run_arm(&inst, &reference, Arm::PlainBlitzScreen, &ArmOptions::default()).unwrap();
    let gap = run_arm(&inst, &reference, Arm::PlainGapSafe, &ArmOptions::default()).unwrap();
    assert!(blitz.summary.work <= gap.summary.work);
}

#[test]
fn screen_report_dominates() {
    let fx = make_fixture(&FixtureSpec::new(FixtureKind::Lasso, 6, 60, 300)).unwrap();
    let prep = prepare(Task::Lasso, &fx.dataset, None, opts(), false).unwrap();
    let inst = build_instance(&prep, Reg::Ratio(0.3)).unwrap();
    let rep = screen_report(&inst, 5).unwrap();
    assert!(rep.blitz_screened >= rep.gapsafe_screened);
    assert!(rep.radius_ratio >= 2f64.sqrt() * (1.0 - 1e-12));
}
