use std::process::Command;

fn crtprune(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_crtprune")).args(args).output().unwrap()
}

#[test]
fn law_prints_the_quadratic_law() {
    let out = crtprune(&["law", "--out", "-"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["probs"][0], 0.5);
    assert_eq!(v["probs"][2], 0.5);
}

#[test]
fn sampling_commands_emit_newick() {
    for cmd in ["sample", "prune", "grow", "ascension", "spine"] {
        let out = crtprune(&[cmd, "--seed", "5", "--replicates", "3"]);
        assert!(out.status.success(), "{cmd}: {}", String::from_utf8_lossy(&out.stderr));
        let text = String::from_utf8(out.stdout).unwrap();
        assert!(text.contains(";\""), "{cmd}: {text}");
        assert_eq!(text, String::from_utf8(crtprune(&[cmd, "--seed", "5", "--replicates", "3"]).stdout).unwrap());
    }
}

#[test]
fn verify_writes_a_report_file() {
    let dir = std::env::temp_dir().join(format!("crtprune-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("e1.json");
    let out = crtprune(&["verify", "--experiment", "E1", "--out", path.to_str().unwrap()]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v[0]["experiment"], "E1");
    assert_eq!(v[0]["pass"], true);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn bad_input_exits_with_code_two() {
    assert_eq!(crtprune(&["verify", "--experiment", "E9"]).status.code(), Some(2));
    let dir = std::env::temp_dir().join(format!("crtprune-cfg-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("bad.toml");
    std::fs::write(&path, "seed = 1\nlambda = -2\n").unwrap();
    let out = crtprune(&["law", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
    std::fs::remove_dir_all(&dir).unwrap();
}
