#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sinklab"))
}

pub fn run(args: &[&str], out: &Path) -> Output {
    bin()
        .args(args)
        .arg("--out-dir")
        .arg(out)
        .output()
        .expect("spawn sinklab")
}

pub fn code(o: &Output) -> i32 {
    o.status.code().unwrap_or(-1)
}

/// Every file under `root` by relative path.
pub fn files(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in std::fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(
                    p.strip_prefix(root).unwrap().to_path_buf(),
                    std::fs::read(&p).unwrap(),
                );
            }
        }
    }
    out
}

/// Manifest with the timing field removed.
pub fn manifest_sans_timing(dir: &Path) -> serde_json::Value {
    let text = std::fs::read_to_string(dir.join("manifest.json")).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v.as_object_mut().unwrap().remove("duration_secs");
    v
}

/// Data files that differ between two output directories, or a missing one.
pub fn differing(a: &Path, b: &Path) -> Vec<String> {
    let fa = files(a);
    let fb = files(b);
    let mut bad = Vec::new();
    for (k, v) in &fa {
        if k == Path::new("manifest.json") {
            continue;
        }
        if fb.get(k) != Some(v) {
            bad.push(k.display().to_string());
        }
    }
    for k in fb.keys() {
        if !fa.contains_key(k) {
            bad.push(k.display().to_string());
        }
    }
    if manifest_sans_timing(a) != manifest_sans_timing(b) {
        bad.push("manifest.json".into());
    }
    bad
}

/// Small training settings shared by the CLI tests.
pub fn small_train_config(dir: &Path) -> PathBuf {
    let p = dir.join("train.json");
    std::fs::write(
        &p,
        r#"{"train": {"batch_size": 2, "seq_len": 32, "snapshot_every": 5},
            "probe": {"sequences": 4, "len": 32}}"#,
    )
    .unwrap();
    p
}

pub struct Case {
    pub name: &'static str,
    pub args: Vec<String>,
}

/// One invocation per subcommand. `fixed` holds inputs produced once and
/// shared by both runs (a built circuit and a training run).
pub fn reproducibility_cases(fixed: &Path) -> Vec<Case> {
    let build = fixed.join("build");
    let trained = fixed.join("train");
    if !build.exists() {
        let o = run(&["circuit", "build"], &build);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let cfg = small_train_config(fixed);
    if !trained.exists() {
        let c = cfg.to_str().unwrap();
        let o = run(&["train", "--steps", "5", "--config", c], &trained);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let ck = build.join("checkpoint").display().to_string();
    let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
    vec![
        Case {
            name: "cone",
            args: s(&["cone", "--trials", "2000", "--alpha", "0.3", "--alpha", "0.9"]),
        },
        Case {
            name: "normcheck",
            args: s(&["normcheck"]),
        },
        Case {
            name: "circuit build",
            args: s(&["circuit", "build", "--seed", "3"]),
        },
        Case {
            name: "circuit verify",
            args: s(&["circuit", "verify", "--checkpoint", &ck]),
        },
        Case {
            name: "trace",
            args: s(&["trace", "--seed", "4"]),
        },
        Case {
            name: "metrics",
            args: s(&["metrics", "--checkpoint", &ck]),
        },
        Case {
            name: "ngram",
            args: s(&["ngram", "--n", "2,3,4,5"]),
        },
        Case {
            name: "repeat",
            args: s(&["repeat", "--seed", "2"]),
        },
        Case {
            name: "ablate",
            args: s(&["ablate", "--checkpoint", &ck]),
        },
        Case {
            name: "train",
            args: s(&["train", "--steps", "5", "--config", cfg.to_str().unwrap()]),
        },
        Case {
            name: "timeline",
            args: s(&[
                "timeline",
                "--records",
                trained.join("records.json").to_str().unwrap(),
            ]),
        },
    ]
}
