use std::path::Path;
use std::process::{Command, Output};

use cran_duplex::cli::{parse_budget, EXIT_CONFIG, EXIT_OK, EXIT_VALIDATION};
use cran_duplex::config::parse_params;

fn run(args: &[&str]) -> Output {
    run_env(args, &[])
}

fn run_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_cran-duplex"));
    cmd.args(args);
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn code(o: &Output) -> u8 {
    o.status.code().expect("exit code") as u8
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// Non-comment lines: header row first.
fn body(text: &str) -> Vec<String> {
    text.lines().filter(|l| !l.starts_with('#')).map(str::to_string).collect()
}

fn rows(text: &str) -> Vec<Vec<String>> {
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    r.records().map(|x| x.unwrap().iter().map(str::to_string).collect()).collect()
}

fn column(text: &str, name: &str) -> usize {
    body(text)[0].split(',').position(|c| c == name).unwrap_or_else(|| panic!("no column {name}"))
}

#[test]
fn budget_syntax() {
    assert_eq!(parse_budget("2000x100").unwrap().total(), 200_000);
    assert_eq!(parse_budget("3*4").unwrap().n_fading, 4);
    assert!(parse_budget("0x10").is_err());
    assert!(parse_budget("100").is_err());
}

#[test]
fn point_csv_has_metadata_and_rows() {
    let o = run(&["point", "--budget", "50x5", "--seed", "9"]);
    assert_eq!(code(&o), EXIT_OK);
    let text = stdout(&o);
    assert!(text.starts_with("# cran-duplex "));
    assert!(text.contains("# seed: 9"));
    assert!(text.contains("# budget: 50x5"));
    let config: String = text
        .lines()
        .filter_map(|l| l.strip_prefix("#   "))
        .map(|l| format!("{l}\n"))
        .collect();
    assert_eq!(parse_params(&config).unwrap(), cran_duplex::config::SystemParams::reference());
    let b = body(&text);
    assert_eq!(b[0], "scheme,link,method,rate,stderr");
    assert!(b.iter().any(|l| l.contains(",ul,mc,")));
    assert!(b.iter().any(|l| l.contains(",dl,integral-form,")));
}

#[test]
fn same_seed_same_output_body() {
    let a = run(&["point", "--budget", "40x4", "--method", "mc"]);
    let b = run(&["point", "--budget", "40x4", "--method", "mc"]);
    assert_eq!(body(&stdout(&a)), body(&stdout(&b)));
    let c = run(&["point", "--budget", "40x4", "--method", "mc", "--seed", "3"]);
    assert_ne!(body(&stdout(&a)), body(&stdout(&c)));
}

#[test]
fn config_errors_exit_with_two() {
    for args in [
        vec!["point", "--set", "no_such_key=1"],
        vec!["point", "--set", "p_dl=1.5"],
        vec!["point", "--set", "lambda"],
        vec!["point", "--config", "/nonexistent/params.cfg"],
        vec!["validate", "--criteria", "12"],
        vec!["fig9"],
    ] {
        let o = run(&args);
        assert_eq!(code(&o), EXIT_CONFIG, "{args:?}");
    }
}

#[test]
fn config_file_and_override_are_applied() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("p.cfg");
    std::fs::write(
        &cfg,
        "lambda = 2e-3\np_dl = 0.4\nm_antennas = 3\nalpha = 7/2\np_b_dbm = 40\np_u_dbm = 20\nsigma_li_dbm = off\n",
    )
    .unwrap();
    let out = dir.path().join("o.csv");
    let o = run(&[
        "point",
        "--config",
        cfg.to_str().unwrap(),
        "--set",
        "radius=300",
        "--method",
        "analytic",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), EXIT_OK, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    for needle in ["#   lambda = 0.002", "#   alpha = 7/2", "#   radius = 300.0", "#   sigma_li_dbm = off", "# override: radius = 300"] {
        assert!(text.contains(needle), "missing {needle}");
    }
}

#[test]
fn validate_exit_codes() {
    let ok = run(&["validate", "--criteria", "1,9"]);
    assert_eq!(code(&ok), EXIT_OK);
    let text = stdout(&ok);
    assert_eq!(body(&text)[0], "criterion,check,observed,reference,rule,passed");
    assert!(text.contains("# overall: PASS"));

    let bad = run(&["validate", "--criteria", "1", "--tolerance-scale", "0"]);
    assert_eq!(code(&bad), EXIT_VALIDATION);
    let text = stdout(&bad);
    assert!(text.contains("# overall: FAIL"));
    assert!(rows(&text).iter().all(|r| r[5] == "false"));
}

#[test]
fn validate_body_independent_of_thread_count() {
    let args = ["validate", "--criteria", "2,6,9", "--budget", "100x10"];
    let one = run_env(&args, &[("CRAN_DUPLEX_THREADS", "1")]);
    let three = run_env(&args, &[("CRAN_DUPLEX_THREADS", "3")]);
    assert!(stdout(&one).contains("# threads: 1"));
    assert!(stdout(&three).contains("# threads: 3"));
    assert_eq!(body(&stdout(&one)), body(&stdout(&three)));
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn fig1_has_both_power_cases_and_degrades_with_li() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fig1.csv");
    let o = run(&["fig1", "--budget", "80x10", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), EXIT_OK, "{}", String::from_utf8_lossy(&o.stderr));
    let text = read(&out);
    assert_eq!(body(&text)[0], "sigma_li_dbm,scheme,method,p_u_dbm,dl_rate,stderr");
    let rs = rows(&text);
    for pu in ["23.0", "10.0"] {
        for scheme in ["ARA", "SRA"] {
            for method in ["mc", "analytic"] {
                let curve: Vec<(f64, f64)> = rs
                    .iter()
                    .filter(|r| r[1] == scheme && r[2] == method && r[3] == pu)
                    .map(|r| (r[0].parse().unwrap(), r[4].parse().unwrap()))
                    .collect();
                assert!(curve.len() >= 7, "{scheme} {method} {pu}");
                assert_eq!(curve[0].0, -50.0);
                assert_eq!(curve.last().unwrap().0, pu.parse::<f64>().unwrap());
                assert!(curve[0].1 > curve.last().unwrap().1, "{scheme} {method} {pu}");
            }
        }
    }
    assert!(rs.iter().any(|r| r[2] == "upper-bound"));
}

#[test]
fn fig2_emits_both_exponents_and_zf_ignores_pb() {
    let o = run(&["fig2", "--budget", "100x10"]);
    assert_eq!(code(&o), EXIT_OK);
    let text = stdout(&o);
    let rs = rows(&text);
    for alpha in ["3", "4"] {
        assert!(rs.iter().any(|r| r[0] == alpha));
        let zf = |pb: &str, m: &str| -> Vec<String> {
            rs.iter()
                .filter(|r| r[0] == alpha && r[1] == pb && r[2] == "ZF/MRT" && r[3] == m)
                .map(|r| r[5].clone())
                .collect()
        };
        // same seed and a statistic that does not involve P_b
        assert_eq!(zf("23.0", "mc"), zf("46.0", "mc"));
        assert_eq!(zf("23.0", "analytic"), zf("46.0", "analytic"));
        assert_eq!(zf("23.0", "mc").len(), 9);
    }
    // MRC beats ZF at the weaker interference level, analytically
    let rate = |pb: &str, comb: &str| -> f64 {
        rs.iter()
            .find(|r| r[0] == "3" && r[1] == pb && r[2] == comb && r[3] == "analytic" && r[4] == "20.0")
            .map(|r| r[5].parse().unwrap())
            .unwrap()
    };
    assert!(rate("23.0", "MRC/MRT") > rate("23.0", "ZF/MRT"));
}

#[test]
fn fig3_endpoints_and_gain_column() {
    let o = run(&["fig3", "--budget", "40x10"]);
    assert_eq!(code(&o), EXIT_OK);
    let text = stdout(&o);
    let (ip, iu, id, im) = (column(&text, "p_dl"), column(&text, "ul_rate"), column(&text, "dl_rate"), column(&text, "method"));
    let ig = column(&text, "gain_vs_hd_pct");
    let rs = rows(&text);
    for r in rs.iter().filter(|r| r[im] == "mc") {
        if r[ip] == "0.0" {
            assert_eq!(r[id].parse::<f64>().unwrap(), 0.0, "{r:?}");
        }
        if r[ip] == "1.0" {
            assert_eq!(r[iu].parse::<f64>().unwrap(), 0.0, "{r:?}");
        }
    }
    assert!(rs.iter().any(|r| r[column(&text, "power_split")] == "total"));
    assert!(rs.iter().filter(|r| r[column(&text, "duplex")] == "FD").all(|r| !r[ig].is_empty()));
    assert!(text.contains("# summary SRA-ZF/MRT FD per_rrh p_b=46 analytic"));
}
