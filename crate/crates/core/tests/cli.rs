use std::path::Path;
use std::process::{Command, Output};

fn sigmin(args: &[&str], config: Option<&Path>, out: &Path) -> Output {
    let mut c = Command::new(env!("CARGO_BIN_EXE_sigmin"));
    c.args(args).arg("--out").arg(out).env_remove("SIGMIN_THREADS");
    if let Some(cfg) = config {
        c.arg("--config").arg(cfg);
    }
    c.output().unwrap()
}

fn data_lines(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(str::to_string)
        .collect()
}

fn write_cfg(dir: &Path, text: &str) -> std::path::PathBuf {
    let p = dir.join("run.cfg");
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn approx_report_schema_and_unsupported_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        dir.path(),
        "[problem]\nkind = approx_curve\nm = 48\nn_centres = 3\nk = 3\n[methods]\nlist = cobyla, praxis, lbfgs\nbudget = 60\n",
    );
    let out = sigmin(&["approx"], Some(&cfg), dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let lines = data_lines(&dir.path().join("approx_report.csv"));
    assert_eq!(lines[0], "method,functional_value,functional_count,time_s,converged");
    assert_eq!(lines.len(), 4);
    let cobyla: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(cobyla[0], "cobyla");
    assert!(cobyla[2].parse::<usize>().unwrap() <= 61);
    for (row, name) in lines[2..].iter().zip(["praxis", "lbfgs"]) {
        assert!(row.starts_with(&format!("{name},,,,")), "{row}");
        assert!(row.contains("unsupported"), "{row}");
    }
    assert!(dir.path().join("trace_cobyla.csv").exists());
    assert!(!dir.path().join("trace_praxis.csv").exists());
}

#[test]
fn denoise_writes_report_gap_and_images() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        dir.path(),
        "[problem]\nkind = denoise\nimage_side = 24\nnsv = 6\n[methods]\nlist = lbfgs, direct_l+praxis\nbudget = 300\n",
    );
    let out = sigmin(&["denoise"], Some(&cfg), dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = data_lines(&dir.path().join("denoise_report.csv"));
    assert_eq!(report.len(), 3);
    assert!(report[2].starts_with("direct_l+praxis,"));
    let gap = data_lines(&dir.path().join("closed_form_gap.csv"));
    assert_eq!(gap[0], "method,gap_inf");
    let lbfgs_gap: f64 = gap[1].split(',').nth(1).unwrap().parse().unwrap();
    assert!(lbfgs_gap <= 1e-6, "{lbfgs_gap}");
    assert!(dir.path().join("denoised_lbfgs.pgm").exists());
}

#[test]
fn scale_rows_cover_every_operation_and_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "threads = 2\n[problem]\nside = 16\nn_centres = 8\nk = 4\n[scale]\nrepetitions = 1\n");
    let out = sigmin(&["scale"], Some(&cfg), dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let lines = data_lines(&dir.path().join("scaling.csv"));
    assert_eq!(lines[0], "operation,threads,milliseconds,efficiency");
    // ten operations, each at the 1-thread baseline and at 2 threads
    assert_eq!(lines.len(), 1 + 10 * 2);
    for row in &lines[1..] {
        let c: Vec<&str> = row.split(',').collect();
        let ms: f64 = c[2].parse().unwrap();
        let eff: f64 = c[3].parse().unwrap();
        assert!(ms > 0.0 && eff > 0.0 && eff.is_finite(), "{row}");
        if c[1] == "1" {
            assert_eq!(eff, 1.0);
        }
    }
}

#[test]
fn svdcmp_lists_both_methods_on_both_matrices() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "[svd]\nnsv = 5\ndense_side = 20\nlaplacian_side = 6\n");
    let out = sigmin(&["svdcmp"], Some(&cfg), dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let lines = data_lines(&dir.path().join("svd_compare.csv"));
    assert_eq!(lines[0], "method,matrix,threads,time_ms,max_resid,converged");
    assert_eq!(lines.len(), 5);
    for row in &lines[1..] {
        let c: Vec<&str> = row.split(',').collect();
        assert!(c[0] == "cross" || c[0] == "lanczos");
        assert!(c[4].parse::<f64>().unwrap() <= 1e-6, "{row}");
        assert_eq!(c[5], "true");
    }
}

#[test]
fn demo_writes_inputs_variables_and_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "[problem]\nside = 12\nn_centres = 4\nk = 4\n[methods]\nbudget = 40\n");
    let out = sigmin(&["demo"], Some(&cfg), dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["demo_input.csv", "demo_centres.csv", "demo_reconstruction.csv"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    assert_eq!(data_lines(&dir.path().join("demo_input.csv")).len(), 1 + 144);
}

#[test]
fn bad_configs_fail_with_a_message() {
    let dir = tempfile::tempdir().unwrap();
    for text in ["[problem]\nsidee = 4\n", "[methods]\nlist = newton\n", "threads = 0\n", "seed = 1\nseed = 2\n"] {
        let cfg = write_cfg(dir.path(), text);
        let out = sigmin(&["approx"], Some(&cfg), dir.path());
        assert!(!out.status.success(), "{text:?} was accepted");
        assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"), "{text:?}");
    }
}

#[test]
fn help_lists_config_keys() {
    let out = Command::new(env!("CARGO_BIN_EXE_sigmin")).arg("--help").output().unwrap();
    let text = String::from_utf8_lossy(&out.stdout);
    for key in ["problem.kind", "methods.list", "scale.repetitions", "svd.nsv"] {
        assert!(text.contains(key), "{key}");
    }
}
