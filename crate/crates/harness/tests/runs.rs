use std::fs;
use std::path::Path;
use std::process::Command;

use adjmc_harness::output::read_csv_rows;
use adjmc_harness::{run_experiment, ExperimentConfig};

fn small(kind: &str, out: &Path) -> ExperimentConfig {
    ExperimentConfig::default()
        .with_overrides(&[
            format!("experiment.kind={kind}"),
            "experiment.repeats=2".into(),
            "experiment.seed=77".into(),
            "rte.n_particles=4000".into(),
            "rte.block=1500".into(),
            "fvm.ref_nx=160".into(),
            "fvm.ref_steps=100".into(),
            "dsmc.n_particles=2000".into(),
            "dsmc.t_final=0.5".into(),
            "mc_demo.sizes=[500]".into(),
            format!("experiment.output_dir=\"{}\"", out.display()),
        ])
        .unwrap()
}

fn body(path: &Path) -> String {
    fs::read_to_string(path).unwrap()
}

#[test]
fn identical_configs_give_identical_csv_files() {
    let dir = tempfile::tempdir().unwrap();
    for kind in ["rte_gradient", "dsmc_gradient", "mc_demo", "rte_forward", "dsmc_forward"] {
        let a = run_experiment(&small(kind, &dir.path().join(format!("{kind}_a")))).unwrap();
        let b = run_experiment(&small(kind, &dir.path().join(format!("{kind}_b")))).unwrap();
        assert_eq!(a.files.len(), b.files.len());
        for (fa, fb) in a.files.iter().zip(&b.files) {
            let name = fa.file_name().unwrap().to_str().unwrap();
            assert_eq!(name, fb.file_name().unwrap().to_str().unwrap());
            if name == "timings.csv" || name == "manifest.txt" {
                continue;
            }
            assert!(fs::read(fa).unwrap() == fs::read(fb).unwrap(), "{kind}: {name} differs");
        }
    }
}

#[test]
fn different_seeds_differ() {
    let dir = tempfile::tempdir().unwrap();
    let a = small("dsmc_gradient", &dir.path().join("a"));
    let b = a.with_overrides(&["experiment.seed=78", &format!("experiment.output_dir=\"{}\"", dir.path().join("b").display())]).unwrap();
    run_experiment(&a).unwrap();
    run_experiment(&b).unwrap();
    let file = |d: &str| read_csv_rows(&dir.path().join(d).join("dsmc_gradient.csv")).unwrap().1;
    assert_ne!(file("a"), file("b"));
}

#[test]
fn rte_gradient_csv_has_the_plotting_schema() {
    let dir = tempfile::tempdir().unwrap();
    let report = run_experiment(&small("rte_gradient", dir.path())).unwrap();
    let path = dir.path().join("rte_gradient.csv");
    let text = body(&path);
    assert!(text.starts_with("# schema=adjmc.rte_gradient/1\n"));
    assert!(text.contains("# rte.n_particles=4000\n"));
    assert!(!text.contains("output_dir"));
    let (header, rows) = read_csv_rows(&path).unwrap();
    assert_eq!(
        header,
        ["bin_center", "grad_p_otd", "grad_p_dto", "grad_fvm_ref", "grad_fvm_coarse", "std_err_p_otd", "std_err_p_dto"]
    );
    assert_eq!(rows.len(), 80);
    for row in &rows {
        for cell in row {
            assert!(cell.parse::<f64>().unwrap().is_finite(), "{cell}");
        }
    }
    // the aggregate is the mean of the stored per-repeat grids
    let otd = report.series("p_otd").unwrap();
    assert_eq!(otd.repeats.len(), 2);
    let mean = otd.mean();
    for (row, m) in rows.iter().zip(&mean) {
        assert_eq!(row[1].parse::<f64>().unwrap(), *m);
    }
    assert!(report.summary_value("relative_l2_p_otd").is_some());
    assert!(dir.path().join("manifest.txt").exists());
    assert!(body(&dir.path().join("timings.csv")).contains("forward,1,"));
}

#[test]
fn single_method_leaves_other_columns_empty() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small("rte_gradient", dir.path()).with_overrides(&["rte.method=p-dto"]).unwrap();
    run_experiment(&cfg).unwrap();
    let (_, rows) = read_csv_rows(&dir.path().join("rte_gradient.csv")).unwrap();
    assert!(rows.iter().all(|r| r[1].parse::<f64>().unwrap().is_nan() && r[2].parse::<f64>().unwrap().is_finite()));
    assert!(rows.iter().all(|r| r[3].parse::<f64>().unwrap().is_nan()));
}

#[test]
fn dsmc_gradient_report_compares_methods() {
    let dir = tempfile::tempdir().unwrap();
    run_experiment(&small("dsmc_gradient", dir.path())).unwrap();
    let (header, rows) = read_csv_rows(&dir.path().join("dsmc_gradient.csv")).unwrap();
    assert_eq!(header, ["component", "adjoint_value", "adjoint_stderr", "fd_value", "fd_stderr", "combined_z"]);
    let names: Vec<&str> = rows.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(names, ["T_x", "T_y", "T_z"]);
    // maxwellian: adjoint and coupled FD differentiate the same sample path
    for r in &rows {
        let a: f64 = r[1].parse().unwrap();
        let f: f64 = r[3].parse().unwrap();
        assert!((a - f).abs() < 1e-3 * (1.0 + a.abs()), "{r:?}");
    }
}

#[test]
fn dsmc_forward_writes_moments_and_tape() {
    let dir = tempfile::tempdir().unwrap();
    run_experiment(&small("dsmc_forward", dir.path())).unwrap();
    let (header, rows) = read_csv_rows(&dir.path().join("dsmc_moments.csv")).unwrap();
    assert_eq!(header, ["t", "T_x", "T_y", "T_z", "m4x"]);
    assert_eq!(rows.len(), 6);
    let tape = fs::File::open(dir.path().join("dsmc_tape.bin")).unwrap();
    let tape: adjmc::CollisionTape = adjmc::dsmc::read_collision_tape(tape).unwrap();
    assert_eq!(tape.n_steps(), 5);
    let (_, rows) = read_csv_rows(&dir.path().join("dsmc_forward.csv")).unwrap();
    for r in rows {
        assert!(r[4].parse::<f64>().unwrap() < 1e-10 && r[5].parse::<f64>().unwrap() < 1e-10);
    }
}

#[test]
fn mc_demo_lists_every_method() {
    let dir = tempfile::tempdir().unwrap();
    run_experiment(&small("mc_demo", dir.path())).unwrap();
    let (header, rows) = read_csv_rows(&dir.path().join("mc_demo.csv")).unwrap();
    assert_eq!(header, ["method", "N", "component", "value", "std_err", "analytic"]);
    for m in ["score", "pathwise", "coupled_fd", "independent_fd"] {
        assert_eq!(rows.iter().filter(|r| r[0] == m).count(), 5);
    }
}

#[test]
fn validate_passes_and_reports_each_check() {
    let dir = tempfile::tempdir().unwrap();
    let report = run_experiment(&small("validate", dir.path())).unwrap();
    assert!(report.passed(), "{:?}", report.checks.iter().filter(|c| !c.passed).collect::<Vec<_>>());
    let (_, rows) = read_csv_rows(&dir.path().join("validate.csv")).unwrap();
    assert_eq!(rows.len(), report.checks.len());
}

#[test]
fn rte_scaling_table_has_a_row_per_size_and_method() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small("rte_scaling", dir.path()).with_overrides(&["scaling.n_values=[256, 512, 1024]", "experiment.repeats=4"]).unwrap();
    let report = run_experiment(&cfg).unwrap();
    let (_, rows) = read_csv_rows(&dir.path().join("scaling.csv")).unwrap();
    assert_eq!(rows.len(), 6);
    assert!(report.summary_value("slope_p_otd").is_some());
    assert!(body(&dir.path().join("scaling.csv")).contains("# slope_p_dto="));
}

fn adjmc() -> Command {
    Command::new(env!("CARGO_BIN_EXE_adjmc"))
}

#[test]
fn cli_validate_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = adjmc().args(["validate", "--out"]).arg(dir.path()).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().filter(|l| l.starts_with("PASS")).count() >= 10);
    assert!(!text.contains("FAIL"));
}

#[test]
fn cli_flags_override_config_and_env_sets_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "[experiment]\nseed = 5\n[dsmc]\nn_particles = 1000\nt_final = 0.3\n").unwrap();
    let out_dir = dir.path().join("env-out");
    let out = adjmc()
        .args(["dsmc-grad", "--method", "adjoint", "--seed", "9", "--set", "dsmc.kernel=vhs", "--config"])
        .arg(&cfg)
        .env("ADJMC_OUT", &out_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = body(&out_dir.join("dsmc_gradient.csv"));
    assert!(text.contains("# experiment.seed=9\n"));
    assert!(text.contains("# dsmc.kernel=vhs\n"));
    assert!(text.contains("# dsmc.method=adjoint\n"));
    assert!(text.contains("# dsmc.n_particles=1000\n"));
    let (_, rows) = read_csv_rows(&out_dir.join("dsmc_gradient.csv")).unwrap();
    assert!(rows.iter().all(|r| r[3] == "NaN"));
}

#[test]
fn cli_rejects_bad_configuration() {
    let out = adjmc().args(["rte-grad", "--set", "rte.steps=0"]).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("rte.steps"));
    let out = adjmc().args(["rte-grad", "--preset", "nope"]).output().unwrap();
    assert!(!out.status.success());
}

#[test]
fn cli_lists_presets() {
    let out = adjmc().arg("presets").output().unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("rte_fig4") && text.contains("dsmc_table2_desk"));
}
