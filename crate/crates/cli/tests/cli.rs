use std::process::Command;

fn holonomy(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_holonomy")).args(args).output().unwrap()
}

#[test]
fn sonia_passes_with_exit_zero() {
    let out = holonomy(&["verify", "sonia", "--d", "2", "--trials", "50", "--seed", "42"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["pass"], true);
}

#[test]
fn intertwine_on_torus() {
    let out = holonomy(&["verify", "intertwine", "--graph", "torus", "--L", "3", "--n", "2", "--d", "2", "--seed", "7"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn failing_and_broken_runs() {
    let fail = holonomy(&["verify", "sonia", "--d", "2", "--trials", "3", "--tolerance", "1e-300"]);
    assert_eq!(fail.status.code(), Some(1));
    assert_eq!(holonomy(&["verify", "no-such-suite"]).status.code(), Some(2));
    assert_eq!(holonomy(&["verify", "haar-sd", "--graph", "cycle", "--m", "3"]).status.code(), Some(2));
    assert_eq!(holonomy(&["verify", "sonia", "--eps", "-1"]).status.code(), Some(2));
}

fn strip_timing(mut v: serde_json::Value) -> serde_json::Value {
    for t in v["tests"].as_array_mut().unwrap() {
        t["wall_ms"] = 0.into();
    }
    v
}

#[test]
fn thread_count_does_not_change_the_report() {
    let run = |threads: &str| {
        let out = holonomy(&["verify", "heat-fk", "--trials", "2000", "--seed", "5", "--threads", threads]);
        strip_timing(serde_json::from_slice(&out.stdout).unwrap())
    };
    assert_eq!(run("1"), run("2"));
}

#[test]
fn sample_writes_csv() {
    let dir = std::env::temp_dir().join(format!("holonomy-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("heat.csv");
    let out = holonomy(&["sample", "heat", "--trials", "5", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "trial_index,value_re,value_im");
    assert_eq!(lines.len(), 6);
    let out = holonomy(&["sample", "ym", "--trials", "20"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().count(), 21);
    std::fs::remove_dir_all(&dir).ok();
}
