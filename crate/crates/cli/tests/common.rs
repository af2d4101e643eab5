#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub const SMALL: &str = r#"{
  "n_users": 12, "n_items": 30, "n_attrs": 10,
  "attrs_per_item_min": 3, "attrs_per_item_max": 5,
  "interactions_per_user": 6, "n_clusters": 2,
  "embed_dim": 8, "embed_epochs": 5,
  "t_max": 8, "k": 3, "k_v": 3, "k_p": 5,
  "eta": 0.001, "beta": 0.01, "lambda": 1.0,
  "pretrain_episodes": 60, "outer_iterations": 6,
  "probe_every": 3, "checkpoint_every": 3
}"#;

pub struct Run {
    pub dir: tempfile::TempDir,
}

impl Default for Run {
    fn default() -> Self {
        Run::new()
    }
}

impl Run {
    pub fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("config.json"), SMALL).unwrap();
        Run { dir }
    }

    pub fn out(&self) -> PathBuf {
        self.dir.path().join("out")
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out().join(name)
    }

    pub fn crsirl(&self, args: &[&str]) -> Output {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_crsirl"));
        cmd.arg("--config").arg(self.dir.path().join("config.json")).arg("--out").arg(self.out());
        cmd.args(args).env("CRSIRL_LOG", "error").output().unwrap()
    }

    pub fn ok(&self, args: &[&str]) {
        let o = self.crsirl(args);
        assert!(o.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&o.stderr));
    }

    pub fn prepare(&self) {
        for cmd in ["gen", "embed", "pretrain"] {
            self.ok(&[cmd]);
        }
    }
}

pub fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap()
}

pub fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}
