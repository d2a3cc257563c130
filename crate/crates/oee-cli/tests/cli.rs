//! End-to-end runs of the `oee` binary on small configurations.

use std::path::Path;
use std::process::{Command, Output};

fn oee(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_oee")).args(args).output().expect("spawn oee")
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn manifest(dir: &Path, command: &str) -> serde_json::Value {
    let text = std::fs::read_to_string(dir.join(format!("manifest_{command}.json"))).unwrap();
    serde_json::from_str(&text).unwrap()
}

const SMALL_QWZ: &str = r#"
schema_version = 1
name = "small"

[model]
kind = "qwz"
mu = -0.5
t_q = -1.0
beta = 1.0
delta0 = 1.0

[geometry]
nx = 24
ny = 12
boundary = "open"
cut = [0, 12]

[numerics]
texture_grid = 21
invariant_grid = 32
ky_samples = 31
edge_layers = 3
"#;

#[test]
fn texture_outputs_are_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.toml", SMALL_QWZ);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for d in [&a, &b] {
        let o = oee(&["texture", "--config", &cfg, "--out", d.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let (ma, mb) = (manifest(&a, "texture"), manifest(&b, "texture"));
    assert_eq!(ma["config_hash"], mb["config_hash"]);
    assert_eq!(ma["outputs"], mb["outputs"]);
    let csv = std::fs::read_to_string(a.join("texture_gs.csv")).unwrap();
    assert!(csv.starts_with("kx,ky,Sx,Sy,Sz,|S|"));
    assert_eq!(csv.lines().count(), 1 + 21 * 21);
    for name in ["texture_gs.csv", "texture_oept.csv", "texture_report.json"] {
        assert_eq!(std::fs::read(a.join(name)).unwrap(), std::fs::read(b.join(name)).unwrap(), "{name}");
    }
}

#[test]
fn invariants_report_the_expected_pair() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.toml", SMALL_QWZ);
    let out = tmp.path().join("o");
    let o = oee(&["invariants", "--config", &cfg, "--out", out.to_str().unwrap(), "--grid", "48"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("invariants.json")).unwrap()).unwrap();
    assert_eq!(r["chern"], 2);
    assert_eq!(r["skyrmion"], -1);
}

#[test]
fn unknown_key_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.toml", &SMALL_QWZ.replace("beta = 1.0", "beta = 1.0\nbogus = 3"));
    let o = oee(&["invariants", "--config", &cfg, "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn missing_or_doubled_sources_are_config_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    assert_eq!(oee(&["invariants", "--out", out]).status.code(), Some(3));
    let missing = tmp.path().join("nope.toml");
    assert_eq!(
        oee(&["invariants", "--config", missing.to_str().unwrap(), "--out", out]).status.code(),
        Some(3)
    );
    assert_eq!(oee(&["invariants", "--preset", "no_such_preset", "--out", out]).status.code(), Some(3));
    assert_eq!(
        oee(&["invariants", "--preset", "fig3", "--threads", "0", "--out", out]).status.code(),
        Some(3)
    );
}

#[test]
fn closed_gap_exits_with_two_and_names_the_momentum() {
    let tmp = tempfile::tempdir().unwrap();
    let body = SMALL_QWZ.replace("mu = -0.5", "mu = 2.0").replace("delta0 = 1.0", "delta0 = 0.0");
    let cfg = write(tmp.path(), "c.toml", &body);
    let o = oee(&["invariants", "--config", &cfg, "--grid", "64", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("k = ("), "{}", stderr(&o));
}

#[test]
fn slab_and_entanglement_spectra_write_their_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.toml", SMALL_QWZ);
    let out = tmp.path().join("o");
    for (which, table, header) in [
        ("slab", "slab_spectrum.csv", "ky,band_index,energy"),
        ("es", "es_spectrum.csv", "ky,index,xi,degeneracy,edge_tag"),
        ("oees", "oees_spectrum.csv", "ky,index,xi,degeneracy,edge_tag"),
    ] {
        let o = oee(&["spectra", which, "--config", &cfg, "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{which}: {}", stderr(&o));
        let csv = std::fs::read_to_string(out.join(table)).unwrap();
        assert!(csv.starts_with(header), "{which}");
        let m = manifest(&out, &format!("spectra_{which}").replace('-', "_"));
        assert!(!m["outputs"].as_array().unwrap().is_empty());
    }
    let loc = std::fs::read_to_string(out.join("slab_localization_0.csv")).unwrap();
    assert!(loc.starts_with("layer,probability"));
}

#[test]
fn torus_suite_needs_a_periodic_geometry() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.toml", SMALL_QWZ);
    let o = oee(&["spectra", "torus-suite", "--config", &cfg, "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn phase_diagram_runs_on_a_coarse_grid() {
    let tmp = tempfile::tempdir().unwrap();
    let body = format!(
        "{}\n[phasediagram]\nmu = {{ min = -3.0, max = 3.0, steps = 7 }}\ndelta0 = {{ min = 0.5, max = 1.5, steps = 2 }}\ngrid = 24\n",
        SMALL_QWZ
    );
    let cfg = write(tmp.path(), "c.toml", &body);
    let out = tmp.path().join("o");
    let o = oee(&["phasediagram", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(out.join("phase_diagram.csv")).unwrap();
    assert!(csv.starts_with("mu,delta0,chern,skyrmion,min_spin_norm,status"));
    assert_eq!(csv.lines().count(), 1 + 7 * 2);
}

#[test]
fn presets_are_listed() {
    let o = oee(&["presets"]);
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout);
    for name in ["fig1_qwz", "fig2_sticlet", "fig3", "fig4", "figS8", "figS9"] {
        assert!(text.lines().any(|l| l.trim() == name), "{name} missing from {text}");
    }
}
