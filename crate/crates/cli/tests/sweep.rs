mod common;

use common::{code, read, Run};

#[test]
fn lambda_sweep_has_rows_per_value_and_seed() {
    let run = Run::new();
    run.prepare();
    run.ok(&["sweep", "--param", "lambda", "--values", "0.05,0.1,0.5,1.0", "--seed", "0,1"]);
    let csv = read(&run.path("sweep_lambda.csv"));
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "parameter,value,seed,sr_at_T,at,hdcg,n_episodes");
    assert_eq!(lines.len(), 1 + 4 * 3);
    assert_eq!(lines.iter().filter(|l| l.split(',').nth(2) == Some("all")).count(), 4);
}

#[test]
fn single_value_sweep_matches_train_then_eval() {
    let run = Run::new();
    run.prepare();
    run.ok(&["sweep", "--param", "lambda", "--values", "0.5", "--seed", "2"]);
    run.ok(&["train", "--lambda", "0.5", "--seed", "2"]);
    run.ok(&["eval", "--lambda", "0.5", "--seed", "2"]);
    let sweep = read(&run.path("sweep_lambda.csv"));
    let row: Vec<&str> = sweep.lines().nth(1).unwrap().split(',').collect();
    let metrics = read(&run.path("metrics.csv"));
    let plain: Vec<&str> = metrics.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[2..], plain[..]);
}

#[test]
fn t_max_sweep_with_rule_rewards() {
    let run = Run::new();
    run.prepare();
    run.ok(&["sweep", "--param", "T_max", "--values", "10", "--reward", "rules"]);
    let csv = read(&run.path("sweep_T_max.csv"));
    assert!(csv.lines().nth(1).unwrap().starts_with("T_max,10,0,"));
    assert_eq!(code(&run.crsirl(&["sweep", "--param", "T_max", "--values", "2.5"])), 2);
    assert_eq!(code(&run.crsirl(&["sweep", "--param", "gamma", "--values", "0.5"])), 2);
}
