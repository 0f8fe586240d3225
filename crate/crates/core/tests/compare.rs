use std::time::{Duration, Instant};

use sorsa::harness::experiment::{compare_runs, desk_config, parse_methods};
use sorsa::harness::output::{write_run, RunManifest};
use sorsa::harness::{make_task, TaskSpec};
use sorsa::{Adapter, Method};

#[test]
fn four_method_sweep_is_quick_and_writes_four_traces() {
    let spec = TaskSpec::default_teacher_student(0);
    let task = make_task(&spec).unwrap();
    let cfg = desk_config(0);
    assert_eq!((task.shape(), cfg.rank, cfg.total_steps), ((16, 12), 4, 500));
    let methods = parse_methods("sorsa,lora,pissa,full").unwrap();

    let start = Instant::now();
    let runs = compare_runs(&task, &cfg, &methods).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let hash = RunManifest::new("compare", vec![], &spec, &cfg).hash();
    for run in &runs {
        write_run(tmp.path(), &hash, run).unwrap();
    }
    assert!(start.elapsed() < Duration::from_secs(60));

    let traces = std::fs::read_dir(tmp.path())
        .unwrap()
        .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().starts_with("trace-"))
        .count();
    assert_eq!(traces, 4);
    for run in &runs {
        let first = run.trace.records[0].train_loss;
        let last = run.trace.records.last().unwrap().train_loss;
        assert!(last < first, "{} did not reduce the loss", run.spec.label);
    }
}

#[test]
fn split_adapters_start_at_the_full_finetuning_loss() {
    for seed in 0..5 {
        let task = make_task(&TaskSpec::default_teacher_student(seed)).unwrap();
        let full = Adapter::init(Method::Full, task.w0(), 4, seed).unwrap();
        let base = task.loss(&full.effective_weight()).unwrap();
        for method in [Method::Sorsa, Method::Pissa, Method::Lora] {
            let a = Adapter::init(method, task.w0(), 4, seed).unwrap();
            let loss = task.loss(&a.effective_weight()).unwrap();
            assert!((loss - base).abs() <= 1e-12 * base, "{method}: {loss} vs {base}");
        }
    }
}

#[test]
fn comparisons_share_task_data() {
    let task = make_task(&TaskSpec::default_teacher_student(4)).unwrap();
    let again = make_task(&TaskSpec::default_teacher_student(4)).unwrap();
    assert_eq!(task.w0(), again.w0());
    assert_eq!(task.data(), again.data());
}
