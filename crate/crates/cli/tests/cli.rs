use std::path::Path;
use std::process::{Command, Output};

fn sntd(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sntd"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], cwd: &Path) -> String {
    let out = sntd(args, cwd);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn is_exp12(v: &str) -> bool {
    // d.dddddddddddde±XX
    let Some((mant, exp)) = v.split_once('e') else {
        return false;
    };
    let mant = mant.trim_start_matches('-');
    mant.len() == 14
        && mant.as_bytes()[1] == b'.'
        && mant.chars().filter(|c| c.is_ascii_digit()).count() == 13
        && (exp.starts_with('+') || exp.starts_with('-'))
        && exp.len() >= 3
        && exp[1..].chars().all(|c| c.is_ascii_digit())
}

#[test]
fn generate_observe_solve_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(
        &[
            "generate", "--dims", "12,10,8", "--ranks", "2,2,2", "--sparsity", "0.5", "--scale", "1", "--seed", "42",
            "--out", "x.tns", "--model-out", "m.json",
        ],
        d,
    );
    let x = sntd::io::load_tensor(d.join("x.tns")).unwrap();
    assert_eq!(x.dims(), &[12, 10, 8]);
    let model: sntd::TuckerModel = serde_json::from_str(&std::fs::read_to_string(d.join("m.json")).unwrap()).unwrap();
    assert!(model.reconstruct().unwrap().max_abs_diff(&x) < 1e-12);

    ok(
        &[
            "observe", "--input", "x.tns", "--noise", "gaussian", "--param", "1e-4", "--ratio", "0.6", "--seed", "7",
            "--out", "y.obs",
        ],
        d,
    );
    let obs = sntd::io::load_observations(d.join("y.obs")).unwrap();
    assert!(obs.len() > 300 && obs.len() < 860, "{} observed", obs.len());

    ok(
        &[
            "solve", "--obs", "y.obs", "--ranks", "2,2,2", "--model", "m.json", "--truth", "x.tns", "--out",
            "xhat.tns", "--report", "report.csv", "--model-out", "fit.json",
        ],
        d,
    );
    let xhat = sntd::io::load_tensor(d.join("xhat.tns")).unwrap();
    let rel = sntd::tensor::relative_error(&xhat, &x).unwrap();
    assert!(rel < 0.2, "relative error {rel}");
    assert!(xhat.as_slice().iter().all(|&v| v >= 0.0 && v <= model.entry_bound));

    let report = std::fs::read_to_string(d.join("report.csv")).unwrap();
    let mut lines = report.lines();
    assert_eq!(
        lines.next().unwrap(),
        "iter,objective,rel_change,res_tucker,res_z,res_b,res_h,res_s"
    );
    let rows: Vec<&str> = lines.collect();
    assert!(!rows.is_empty() && rows.len() <= 300);
    for (k, row) in rows.iter().enumerate() {
        let f: Vec<&str> = row.split(',').collect();
        assert_eq!(f.len(), 8);
        assert_eq!(f[0], (k + 1).to_string());
        assert!(f[1..].iter().all(|v| is_exp12(v)), "{row}");
    }
    let fit: sntd::TuckerModel = serde_json::from_str(&std::fs::read_to_string(d.join("fit.json")).unwrap()).unwrap();
    assert!(fit.core.as_slice().iter().all(|&v| (0.0..=1.0).contains(&v)));
    for (f, &a) in fit.factors.iter().zip(&fit.amplitude_bounds) {
        assert!(f.as_slice().iter().all(|&v| (0.0..=a).contains(&v)));
    }
}

#[test]
fn poisson_observation_is_shifted_by_default() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["generate", "--dims", "6,5,4", "--ranks", "2,2,2", "--sparsity", "0.3", "--out", "x.tns"], d);
    ok(
        &[
            "observe", "--input", "x.tns", "--noise", "poisson", "--param", "0.1", "--ratio", "1", "--out", "y.obs",
        ],
        d,
    );
    let obs = sntd::io::load_observations(d.join("y.obs")).unwrap();
    assert_eq!(obs.len(), 120);
    assert_eq!(obs.model(), sntd::NoiseModel::Poisson { floor: 0.1 });
    ok(&["solve", "--obs", "y.obs", "--ranks", "2,2,2", "--beta", "100", "--rho", "100", "--alpha", "100", "--out", "xhat.tns"], d);
    let xhat = sntd::io::load_tensor(d.join("xhat.tns")).unwrap();
    assert!(xhat.as_slice().iter().all(|&v| v >= 0.1));
}

#[test]
fn exact_m_observes_requested_count() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["generate", "--dims", "10,10,10", "--ranks", "2,2,2", "--out", "x.tns"], d);
    ok(
        &[
            "observe", "--input", "x.tns", "--noise", "laplace", "--param", "0.1", "--ratio", "0.25", "--exact-m",
            "--out", "y.obs",
        ],
        d,
    );
    assert_eq!(sntd::io::load_observations(d.join("y.obs")).unwrap().len(), 250);
}

const SWEEP: &str = "\
# small sweep
dims = 10,10,10
ranks = 2,2,2
sparsity = 0.5
truth_seed = 3
noise = gaussian
param = 1e-3
ratios = 0.3, 0.8
trials = 2
max_iters = 50
timing = false
";

#[test]
fn sweep_writes_csvs_reproducibly() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("sweep.cfg"), SWEEP).unwrap();
    ok(&["sweep", "--spec", "sweep.cfg", "--out", "a.csv", "--aggregate", "agg.csv"], d);
    ok(&["sweep", "--spec", "sweep.cfg", "--out", "b.csv"], d);
    let a = std::fs::read_to_string(d.join("a.csv")).unwrap();
    assert_eq!(a, std::fs::read_to_string(d.join("b.csv")).unwrap());
    let lines: Vec<&str> = a.lines().collect();
    assert_eq!(lines[0], "ratio,trial,rel_error,iters,seconds");
    assert_eq!(lines.len(), 5);
    assert!(lines[1].starts_with("0.3,0,") && lines[1].ends_with(",0.000000"));
    let agg = std::fs::read_to_string(d.join("agg.csv")).unwrap();
    let agg: Vec<&str> = agg.lines().collect();
    assert_eq!(agg[0], "ratio,mean_rel_error,std_rel_error");
    assert_eq!(agg.len(), 3);
    assert!(agg[1].split(',').skip(1).all(is_exp12));
}

#[test]
fn sweep_reads_tensor_relative_to_spec() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::create_dir(d.join("run")).unwrap();
    ok(&["generate", "--dims", "8,8,8", "--ranks", "2,2,2", "--out", "run/x.tns"], d);
    std::fs::write(
        d.join("run/sweep.cfg"),
        "input = x.tns\nranks = 2,2,2\nnoise = gaussian\nparam = 1e-3\nratios = 0.5\ntrials = 1\nmax_iters = 20\nmethod = mean_fill\n",
    )
    .unwrap();
    ok(&["sweep", "--spec", "run/sweep.cfg", "--out", "r.csv"], d);
    assert_eq!(std::fs::read_to_string(d.join("r.csv")).unwrap().lines().count(), 2);
}

#[test]
fn unknown_config_key_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("sweep.cfg"), format!("{SWEEP}colour = blue\n")).unwrap();
    let out = sntd(&["sweep", "--spec", "sweep.cfg", "--out", "a.csv"], d);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("unknown key `colour`") && err.contains("line 12"), "{err}");
}

#[test]
fn bounds_text_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("problem.cfg"),
        "dims = 100,100,100\nranks = 5\na = 1\nc = 2\nm = 500000\nnoise = gaussian\nparam = 0.01\nsparsity = 150\n",
    )
    .unwrap();
    let text = ok(&["bounds", "--spec", "problem.cfg"], d);
    let keys: Vec<&str> = text.lines().map(|l| l.split_whitespace().next().unwrap()).collect();
    assert_eq!(keys, ["beta", "tau", "gamma", "lambda_theoretical", "dof", "upper_bound"]);
    assert!(text.contains("dof                 575"), "{text}");

    let csv = ok(&["bounds", "--spec", "problem.cfg", "--csv"], d);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "beta,tau,gamma,lambda_theoretical,dof,upper_bound");
    assert_eq!(lines[1].split(',').count(), 6);

    std::fs::write(
        d.join("minimax.cfg"),
        "dims = 100,100,100\nranks = 5\nc = 2\nm = 500000\nnoise = gaussian\nparam = 0.01\nsparsity = 150\n\
         mu = 0.01\nalpha_tilde = 0.5\ngamma_m = 0.1\n",
    )
    .unwrap();
    assert!(ok(&["bounds", "--spec", "minimax.cfg"], d).contains("lower_bound"));

    std::fs::write(d.join("partial.cfg"), "dims = 100,100,100\nranks = 5\nc = 2\nm = 500000\nnoise = gaussian\nparam = 0.01\nsparsity = 150\nmu = 0.01\n").unwrap();
    assert!(!sntd(&["bounds", "--spec", "partial.cfg"], d).status.success());
}

#[test]
fn tune_requires_truth() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["generate", "--dims", "6,6,6", "--ranks", "2,2,2", "--out", "x.tns"], d);
    ok(&["observe", "--input", "x.tns", "--noise", "gaussian", "--param", "0.01", "--ratio", "0.5", "--out", "y.obs"], d);
    let out = sntd(&["solve", "--obs", "y.obs", "--ranks", "2,2,2", "--tune", "--out", "xhat.tns"], d);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--truth"));
}

#[test]
fn bad_arguments_fail_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for args in [
        &["generate", "--dims", "4,4", "--ranks", "2,2,2", "--out", "x.tns"][..],
        &["generate", "--dims", "4,x,4", "--ranks", "2,2,2", "--out", "x.tns"][..],
        &["observe", "--input", "missing.tns", "--noise", "gaussian", "--param", "1", "--ratio", "0.5", "--out", "y"][..],
    ] {
        let out = sntd(args, d);
        assert!(!out.status.success(), "{args:?}");
        assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"), "{args:?}");
    }
}
