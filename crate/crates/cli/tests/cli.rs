use std::fs;
use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mltsr"))
}

fn temp_path(name: &str) -> PathBuf {
    let mut p = std::env::temp_dir();
    p.push(format!("mltsr-cli-{}-{name}", std::process::id()));
    p
}

#[test]
fn decompose_model_round_trip() {
    let input = temp_path("decomp.json");
    fs::write(
        &input,
        r#"{
            "shape": [3, 4],
            "model": {
                "freqs": [[0.2, 0.7], [0.6, 0.1]],
                "powers": [1.5, 0.5]
            }
        }"#,
    )
    .unwrap();
    let out = bin().arg("decompose").arg(&input).output().unwrap();
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["order"], 2);
    assert_eq!(v["method"], "recursive");
    assert!(v["residual"].as_f64().unwrap() < 1e-8);
    let freqs = v["model"]["freqs"].as_array().unwrap();
    let f0 = freqs[0].as_array().unwrap();
    assert!((f0[0].as_f64().unwrap() - 0.2).abs() < 1e-8);
    assert!((f0[1].as_f64().unwrap() - 0.7).abs() < 1e-8);
    fs::remove_file(&input).ok();
}

#[test]
fn decompose_rejects_ambiguous_input() {
    let input = temp_path("ambiguous.json");
    fs::write(
        &input,
        r#"{
            "shape": [2, 2],
            "model": {"freqs": [[0.1, 0.2]], "powers": [1.0]},
            "sequence": {"shape": [2, 2], "values": []}
        }"#,
    )
    .unwrap();
    let out = bin().arg("decompose").arg(&input).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("exactly one"));
    fs::remove_file(&input).ok();
}

#[test]
fn superres_single_atom_full_data() {
    // y = c a(f) on a full (3,3) grid, amplitude 0.8 - 0.6i at f = (0.3, 0.8)
    let mut measurements = Vec::new();
    let (re_c, im_c) = (0.8, -0.6);
    for k1 in 0..3 {
        for k2 in 0..3 {
            let ph = 2.0 * std::f64::consts::PI * (0.3 * k1 as f64 + 0.8 * k2 as f64);
            let (s, c) = ph.sin_cos();
            let scale = 1.0 / 3.0;
            measurements.push([scale * (re_c * c - im_c * s), scale * (re_c * s + im_c * c)]);
        }
    }
    let input = temp_path("obs.json");
    fs::write(
        &input,
        serde_json::to_string(&serde_json::json!({
            "shape": [3, 3],
            "measurements": measurements,
            "eta2": 0.0
        }))
        .unwrap(),
    )
    .unwrap();
    let out = bin()
        .arg("superres")
        .arg("--obs")
        .arg(&input)
        .arg("--method")
        .arg("convrelax")
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["rank"], 1);
    assert_eq!(v["certificate"], "guaranteed");
    let f = v["model"]["freqs"][0].as_array().unwrap();
    assert!((f[0].as_f64().unwrap() - 0.3).abs() < 1e-6, "{f:?}");
    assert!((f[1].as_f64().unwrap() - 0.8).abs() < 1e-6, "{f:?}");
    // objective of the trace relaxation at a single atom is twice its magnitude
    assert!((v["objective"].as_f64().unwrap() - 2.0).abs() < 1e-4);
    assert_eq!(v["iterate_eigenvalues"].as_array().unwrap().len(), 1);
    fs::remove_file(&input).ok();
}

#[test]
fn bench_decomp_deterministic_csv_and_exit_code() {
    let cfg = temp_path("bench.json");
    fs::write(&cfg, r#"{"shape": [4, 4], "r_values": [1, 2], "trials": 4, "seed": 5}"#).unwrap();
    let out_a = temp_path("a.csv");
    let out_b = temp_path("b.csv");
    for out in [&out_a, &out_b] {
        let st = bin()
            .arg("bench")
            .arg("decomp")
            .arg("--config")
            .arg(&cfg)
            .arg("--out")
            .arg(out)
            .arg("--parallel")
            .arg("2")
            .status()
            .unwrap();
        assert!(st.success());
    }
    let strip_runtime = |text: &str| {
        text.lines()
            .map(|l| {
                let mut f: Vec<&str> = l.split(',').collect();
                f.remove(9);
                f.join(",")
            })
            .collect::<Vec<_>>()
            .join("\n")
    };
    let a = fs::read_to_string(&out_a).unwrap();
    let b = fs::read_to_string(&out_b).unwrap();
    assert_eq!(strip_runtime(&a), strip_runtime(&b));
    assert!(a.starts_with("row,r,trial,seed,"));
    assert!(a.contains("summary"));
    for p in [&cfg, &out_a, &out_b] {
        fs::remove_file(p).ok();
    }
}
