mod common;

use common::{code, read, Run};

#[test]
fn full_pipeline_writes_every_artifact() {
    let run = Run::new();
    run.prepare();
    run.ok(&["train"]);
    run.ok(&["eval"]);
    for name in [
        "catalog.json",
        "splits.json",
        "embeddings.ckpt",
        "policy_pg.ckpt",
        "policy.ckpt",
        "reward.ckpt",
        "train_log.csv",
        "metrics.csv",
    ] {
        assert!(run.path(name).exists(), "{name} missing");
    }
    let log = read(&run.path("train_log.csv"));
    assert_eq!(log.lines().count(), 7);
    assert!(log.starts_with("iteration,alpha,"));
    let metrics = read(&run.path("metrics.csv"));
    assert!(metrics.starts_with("seed,sr_at_T,at,hdcg,n_episodes\n0,"));
    assert!(metrics.lines().last().unwrap().starts_with("all,"));
    let leftovers: Vec<_> = std::fs::read_dir(run.out())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.starts_with(".tmp"))
        .collect();
    assert!(leftovers.is_empty(), "{leftovers:?}");
}

#[test]
fn baselines_need_no_checkpoints() {
    let run = Run::new();
    run.ok(&["gen"]);
    run.ok(&["embed"]);
    for alg in ["rulejudge", "maxent", "absgreedy", "random"] {
        run.ok(&["eval", "--algorithm", alg, "--seed", "0,1"]);
        let metrics = read(&run.path("metrics.csv"));
        assert_eq!(metrics.lines().count(), 4, "{alg}");
    }
    assert!(!run.path("policy.ckpt").exists());
    assert!(!run.path("policy_pg.ckpt").exists());
}

#[test]
fn pg_fine_tuning_and_pretrained_eval() {
    let run = Run::new();
    run.prepare();
    run.ok(&["eval", "--algorithm", "pg"]);
    run.ok(&["train", "--algorithm", "pg"]);
    assert!(run.path("policy.ckpt").exists());
    assert!(!run.path("reward.ckpt").exists());
}

#[test]
fn train_from_scratch_with_init_flag() {
    let run = Run::new();
    run.ok(&["gen"]);
    run.ok(&["embed"]);
    run.ok(&["train", "--init", "--reward", "handcrafted"]);
    assert!(run.path("policy.ckpt").exists());
    let o = run.crsirl(&["train", "--no-hrs", "--no-rpm"]);
    assert_eq!(code(&o), 2);
}
