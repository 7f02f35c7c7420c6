use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn cells() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../cells")
}

fn mmspeed(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mmspeed")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = mmspeed(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn cell(name: &str) -> String {
    cells().join(name).to_string_lossy().into_owned()
}

/// Data rows as maps from header to field.
fn rows(csv: &str) -> Vec<std::collections::HashMap<String, String>> {
    let body: String = csv.lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect();
    let mut r = csv::Reader::from_reader(body.as_bytes());
    let header: Vec<String> = r.headers().unwrap().iter().map(String::from).collect();
    r.records()
        .map(|rec| header.iter().cloned().zip(rec.unwrap().iter().map(String::from)).collect())
        .collect()
}

fn f(row: &std::collections::HashMap<String, String>, key: &str) -> f64 {
    row[key].parse().unwrap_or_else(|_| panic!("{key} = '{}'", row[key]))
}

fn temp_cell(text: &str) -> tempfile::NamedTempFile {
    let mut file = tempfile::Builder::new().suffix(".toml").tempfile().unwrap();
    std::io::Write::write_all(&mut file, text.as_bytes()).unwrap();
    file
}

#[test]
fn compute_homogeneous_epoxy() {
    let epoxy = cell("epoxy.toml");
    let out = ok(&["compute", "--cell", &epoxy, "--methods", "mm,pwe"]);
    assert!(out.starts_with("method,truncation,M11,M22,M12,c_k1,c_k2,rho_avg,mu_avg,wall_time_ms\n"));
    let rows = rows(&out);
    assert_eq!(rows.len(), 2);
    for r in &rows {
        for k in ["c_k1", "c_k2"] {
            assert!((f(r, k) - 1139.4058).abs() < 1e-3, "{r:?}");
        }
        for k in ["M11", "M22", "M12"] {
            assert!(f(r, k).abs() <= 1e-8 * 1.48e9, "{r:?}");
        }
    }
}

#[test]
fn estimate_only_has_empty_cross_term() {
    let out = ok(&["compute", "--cell", &cell("steel_rods_in_epoxy.toml"), "--methods", "estimate"]);
    let rows = rows(&out);
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0]["method"], "estimate");
    assert_eq!(rows[0]["M12"], "");
}

#[test]
fn compare_against_oracle() {
    let out = ok(&[
        "compare",
        "--cell",
        &cell("steel_rods_in_epoxy.toml"),
        "--methods",
        "mm,oracle",
        "--N",
        "8",
        "--grid",
        "256",
    ]);
    let rows = rows(&out);
    let mm = rows.iter().find(|r| r["method"] == "mm").unwrap();
    assert!(f(mm, "rel_gap_k1") <= 5e-3, "{mm:?}");
    let oracle = rows.iter().find(|r| r["method"] == "oracle").unwrap();
    assert_eq!(f(oracle, "rel_gap_k1"), 0.0);
}

#[test]
fn sweep_end_points_and_bounds() {
    let out = ok(&["sweep", "--methods", "mm,estimate,pwe", "--N", "2", "--G", "3", "--f-range", "0:1:6"]);
    assert!(out.starts_with("f,method,d,c,c_reuss,c_voigt,note\n"));
    let rows = rows(&out);
    assert_eq!(rows.len(), 18);
    let epoxy = (1.48e9f64 / 1140.0).sqrt();
    let steel = (80e9f64 / 7800.0).sqrt();
    for r in &rows {
        let (c, lo, hi) = (f(r, "c"), f(r, "c_reuss"), f(r, "c_voigt"));
        assert!(c >= lo * (1.0 - 1e-12) && c <= hi * (1.0 + 1e-12), "{r:?}");
        match r["f"].as_str() {
            "0" => assert!((c - epoxy).abs() < 1e-8 * epoxy && r["note"] == "no rod"),
            "1" => assert!((c - steel).abs() < 1e-8 * steel && r["note"].contains("clamped")),
            _ => assert!(r["note"].is_empty()),
        }
    }
    let keys: Vec<(f64, String)> = rows.iter().map(|r| (f(r, "f"), r["method"].clone())).collect();
    let mut sorted = keys.clone();
    sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    assert_eq!(keys, sorted);
}

#[test]
fn swapped_sweep_ends_in_matrix_phase() {
    let out = ok(&["sweep", "--N", "1", "--f-range", "0:1:2", "--swap"]);
    let rows = rows(&out);
    assert!((f(&rows[0], "c") - (80e9f64 / 7800.0).sqrt()).abs() < 1e-6);
    assert!((f(&rows[1], "c") - (1.48e9f64 / 1140.0).sqrt()).abs() < 1e-6);
}

#[test]
fn dense_steel_rods_fall_below_steel() {
    let out = ok(&["sweep", "--N", "8", "--f-range", "0.98:0.98:1"]);
    let c = f(&rows(&out)[0], "c");
    // Oracle, n = 1024: 2599.03 m/s.
    assert!((c - 2599.03).abs() < 5e-3 * 2599.03, "{c}");
    assert!(c < 0.85 * (80e9f64 / 7800.0).sqrt());
}

#[test]
fn sweep_is_independent_of_worker_count() {
    let args = ["sweep", "--methods", "mm,pwe,estimate", "--N", "1,3", "--G", "2", "--f-range", "0.1:0.9:5"];
    let one = ok(&[&args[..], &["--workers", "1"]].concat());
    let three = ok(&[&args[..], &["--workers", "3"]].concat());
    assert_eq!(one, three);
}

#[test]
fn convergence_on_homogeneous_cell() {
    let out = ok(&["convergence", "--cell", &cell("epoxy.toml"), "--methods", "mm,pwe", "--G", "2,4"]);
    assert!(out.starts_with("method,d,rel_error,wall_time_ms,matrix_dim\n"));
    for r in rows(&out) {
        assert!(f(&r, "rel_error") <= 1e-14, "{r:?}");
        let d: usize = r["d"].parse().unwrap();
        let dim: usize = r["matrix_dim"].parse().unwrap();
        assert_eq!(dim, if r["method"] == "mm" { 2 * d } else { d * d - 1 });
    }
    assert!(out.contains("# decay_exponent,mm,none\n"));
    assert!(out.contains("# decay_exponent,pwe,none\n"));
}

#[test]
fn moderate_contrast_mm_beats_pwe() {
    let file = temp_cell(
        "[cell]\nperiods = [1.0, 1.0]\n[background]\nrho = 1.0\nmu = 1.0\n\
         [[inclusion]]\ncorner = [0.25, 0.25]\nsize = [0.5, 0.5]\nrho = 1.0\nmu = 4.0\n",
    );
    let path = file.path().to_string_lossy().into_owned();
    let out = ok(&[
        "convergence", "--cell", &path, "--methods", "mm,pwe,oracle", "--N", "4", "--G", "12", "--grid", "128,256",
    ]);
    let rows = rows(&out);
    let err = |m: &str| f(rows.iter().find(|r| r["method"] == m).unwrap(), "rel_error");
    assert!(err("mm") < err("pwe"), "{out}");
    assert!(out.contains("# reference,oracle n=128..256 extrapolated,"));
}

#[test]
fn one_term_is_already_close_for_dense_steel() {
    let file = temp_cell(
        "[cell]\nperiods = [1.0, 1.0]\n[background]\nmaterial = \"epoxy\"\n\
         [[inclusion]]\ncorner = [0.02565835097474313, 0.02565835097474313]\n\
         size = [0.9486832980505138, 0.9486832980505138]\nmaterial = \"steel\"\n",
    );
    let path = file.path().to_string_lossy().into_owned();
    let out = ok(&["convergence", "--cell", &path, "--N", "1,2", "--reference-N", "32"]);
    let rows = rows(&out);
    assert_eq!(rows[0]["d"], "3");
    assert!(f(&rows[0], "rel_error") < 0.05, "{out}");
}

#[test]
fn three_dimensional_compute() {
    let out = ok(&["compute", "--cell", &cell("rod3d.toml"), "--methods", "elastic3d", "--N2", "1", "--N3", "1"]);
    let rows = rows(&out);
    assert_eq!(rows.len(), 3);
    for r in &rows {
        assert!(f(r, "c1") >= f(r, "c2") && f(r, "c2") >= f(r, "c3"));
    }
}

#[test]
fn out_file_matches_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.csv");
    let path_s = path.to_string_lossy().into_owned();
    let out = ok(&["sweep", "--N", "1", "--f-range", "0:1:3", "--out", &path_s]);
    assert_eq!(std::fs::read_to_string(path).unwrap(), out);
}

#[test]
fn failures_set_the_exit_code() {
    let missing = mmspeed(&["compute", "--cell", "/nonexistent/cell.toml"]);
    assert!(!missing.status.success());
    assert!(String::from_utf8_lossy(&missing.stderr).contains("cannot read"));

    let bad = temp_cell("[cell]\nperiods = [1.0, 1.0]\n[background]\nrho = 1.0\n");
    let out = mmspeed(&["compute", "--cell", &bad.path().to_string_lossy()]);
    assert!(!out.status.success());

    let epoxy = cell("epoxy.toml");
    let failed = mmspeed(&["compute", "--cell", &epoxy, "--methods", "mm,pwe", "--G", "0"]);
    assert_eq!(failed.status.code(), Some(1));
    assert_eq!(rows(&String::from_utf8(failed.stdout).unwrap()).len(), 1);

    assert!(!mmspeed(&["sweep", "--f-range", "0:2:3"]).status.success());
    assert!(!mmspeed(&["sweep", "--methods", "elastic3d"]).status.success());
}

#[test]
fn failing_sweep_points_are_rows() {
    // G = 0 is rejected by the plane-wave solver at every point.
    let out = mmspeed(&["sweep", "--methods", "mm,pwe", "--N", "1", "--G", "0", "--f-range", "0.2:0.4:2"]);
    assert!(out.status.success());
    let rows = rows(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(rows.len(), 4);
    let pwe: Vec<_> = rows.iter().filter(|r| r["method"] == "pwe").collect();
    assert!(pwe.iter().all(|r| r["c"].is_empty() && r["note"].starts_with("error:")));
}
