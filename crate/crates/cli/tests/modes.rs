mod support;

use std::process::Command;

use support::*;
use timoslip_cli::run::{run_converge, run_fit, run_simulate, run_sweep};
use timoslip_cli::ExitCode;

const SINE: &str = "
[initial.phi]
kind = \"sine\"
amplitude = 1.0

[initial.v]
kind = \"sine\"
amplitude = 0.5
";

const EXP_KERNELS: &str = "
[material]
k = 2.0
b = 2.0

[kernel.phi]
family = \"exponential\"
amplitude = 1.0
rate = 1.0

[kernel.psi]
family = \"exponential\"
amplitude = 1.0
rate = 1.0
";

#[test]
fn zero_initial_data_gives_zero_energy() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = parse_text(&format!("{MINIMAL}{EXP_KERNELS}")).unwrap();
    let out = run_simulate(&cfg, dir.path(), 1, false).unwrap();
    assert_eq!(out.exit_code(), 0);
    let e = column(&dir.path().join("energy.csv"), "total");
    assert_eq!(e.len(), 21);
    assert!(e.iter().all(|&x| x == 0.0));
    let phi = column(&dir.path().join("final_state.csv"), "phi");
    assert_eq!(phi.len(), 12);
}

#[test]
fn verify_on_a_conservative_config_has_zero_decrement() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = load("conservative.toml");
    let out = run_simulate(&cfg, dir.path(), 7, true).unwrap();
    assert_eq!(out.exit_code(), 0);
    let e0 = column(&dir.path().join("energy.csv"), "total")[0];
    let path = dir.path().join("decrement.csv");
    let observed = column(&path, "observed");
    assert_eq!(observed.len(), 1000);
    for name in [
        "predicted",
        "damping_loss",
        "kernel_smoothing_phi",
        "tail_drop_psi",
    ] {
        assert!(column(&path, name).iter().all(|&x| x == 0.0), "{name}");
    }
    assert!(observed.iter().all(|x| x.abs() <= 1e-9 * e0.max(1.0)));
}

#[test]
fn sine_data_with_exponential_kernels_decays_monotonically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg =
        parse_text(&format!("{MINIMAL}{EXP_KERNELS}{SINE}").replace("steps = 20", "steps = 300")).unwrap();
    run_simulate(&cfg, dir.path(), 3, false).unwrap();
    let path = dir.path().join("energy.csv");
    let e = column(&path, "total");
    assert_eq!(column(&path, "step")[1], 3.0);
    assert!(e.windows(2).all(|w| w[1] <= w[0] + 1e-12 * e[0]));
    assert!(e[e.len() - 1] < 0.9 * e[0]);
}

#[test]
fn prescribed_histories_keep_the_identity() {
    for kind in ["linear", "exponential"] {
        let dir = tempfile::tempdir().unwrap();
        let text = format!("{MINIMAL}{EXP_KERNELS}{SINE}\n[history]\nkind = \"{kind}\"\nrate = 0.5\n");
        let cfg = parse_text(&text).unwrap();
        let out = run_simulate(&cfg, dir.path(), 1, true).unwrap();
        assert!(out.error.is_none(), "{kind}: {:?}", out.error);
        let m = column(&dir.path().join("decrement.csv"), "mismatch");
        assert!(m.iter().all(|&x| x <= 1e-9));
    }
}

#[test]
fn printed_convention_is_caught_by_verify() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{MINIMAL}{EXP_KERNELS}{SINE}\n[energy]\nconvention = \"as_printed\"\n");
    let out = run_simulate(&parse_text(&text).unwrap(), dir.path(), 1, true).unwrap();
    let err = out.error.unwrap();
    assert_eq!(err.code, ExitCode::IdentityViolation);
    // the ledger stops at the violating step and is still written
    assert_eq!(column(&dir.path().join("decrement.csv"), "step").len(), 1);
}

#[test]
fn verify_requires_the_conservative_newmark_pair() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = parse_text(&MINIMAL.replace("steps = 20", "steps = 20\nbeta = 0.3")).unwrap();
    let e = run_simulate(&cfg, dir.path(), 1, true).unwrap_err();
    assert_eq!(e.code, ExitCode::Config);
    assert!(run_simulate(&cfg, dir.path(), 1, false).is_ok());
}

#[test]
fn converge_reports_second_order_on_a_small_ladder() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{MINIMAL}{EXP_KERNELS}{SINE}\n[converge]\nlevels = [11, 23, 47, 95]\nt_end = 0.5\n");
    let (out, rows) = run_converge(&parse_text(&text).unwrap(), dir.path()).unwrap();
    assert!(out.error.is_none());
    let orders: Vec<f64> = rows.iter().filter_map(|r| r.order).collect();
    assert_eq!(orders.len(), 2);
    assert!(orders.iter().all(|p| (1.7..=2.3).contains(p)), "{orders:?}");
    assert_eq!(
        column(&dir.path().join("convergence.csv"), "interior"),
        vec![11.0, 23.0, 47.0, 95.0]
    );
}

#[test]
fn sweep_of_identical_variants_is_bitwise_identical() {
    let dir = tempfile::tempdir().unwrap();
    let v = |name: &str| {
        format!(
            "[[sweep.variant]]\nname = \"{name}\"\nphi = {{ family = \"exponential\", amplitude = 1.0, rate = 1.0 }}\npsi = {{ family = \"exponential\", amplitude = 1.0, rate = 1.0 }}\n"
        )
    };
    let text = format!(
        "{}{EXP_KERNELS}{SINE}\n{}{}",
        MINIMAL.replace("steps = 20", "steps = 400"),
        v("one"),
        v("two")
    );
    let (out, rows) = run_sweep(&parse_text(&text).unwrap(), dir.path(), 1).unwrap();
    assert!(out.error.is_none());
    assert_eq!(rows.len(), 2);
    let a = std::fs::read(dir.path().join("energy_one.csv")).unwrap();
    let b = std::fs::read(dir.path().join("energy_two.csv")).unwrap();
    assert_eq!(a, b);
    let report = std::fs::read_to_string(dir.path().join("sweep_report.csv")).unwrap();
    assert_eq!(report.lines().count(), 3);
}

#[test]
fn sweep_without_variants_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = parse_text(&format!("{MINIMAL}\n[sweep]\n")).unwrap();
    assert_eq!(run_sweep(&cfg, dir.path(), 1).unwrap_err().code, ExitCode::Config);
}

#[test]
fn sweep_marks_failed_members_and_keeps_the_rest() {
    let dir = tempfile::tempdir().unwrap();
    // the unstable member uses a huge step with the explicit Newmark pair
    let text = format!(
        "{}{SINE}\n[[sweep.variant]]\nname = \"calm\"\nphi = {{ family = \"none\" }}\npsi = {{ family = \"none\" }}\n",
        MINIMAL.replace("dt = 0.01", "dt = 0.2").replace("steps = 20", "steps = 200\nbeta = 0.0")
    );
    let (out, rows) = run_sweep(&parse_text(&text).unwrap(), dir.path(), 1).unwrap();
    assert_eq!(out.error.unwrap().code, ExitCode::Divergence);
    assert!(rows[0].status.starts_with("failed[4]"));
}

#[test]
fn fit_reads_an_energy_trace() {
    let dir = tempfile::tempdir().unwrap();
    let cfg =
        parse_text(&format!("{MINIMAL}{EXP_KERNELS}{SINE}").replace("steps = 20", "steps = 400")).unwrap();
    run_simulate(&cfg, dir.path(), 1, false).unwrap();
    run_fit(&cfg, &dir.path().join("energy.csv"), dir.path()).unwrap();
    let report = std::fs::read_to_string(dir.path().join("fit_report.csv")).unwrap();
    let rows: Vec<&str> = report.lines().collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[1].starts_with("exponential,") && rows[1].ends_with(",exponential"));
}

fn cli(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_timoslip"))
        .args(args)
        .output()
        .unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

#[test]
fn binary_exit_codes_and_single_line_reasons() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = d.join("o");
    let out = out.to_str().unwrap();
    let case = |text: &str, mode: &str| {
        let p = write(d, text);
        cli(&[mode, "--config", p.to_str().unwrap(), "--out", out, "--seed", "7"])
    };
    let (code, stdout, _) = case(MINIMAL, "simulate");
    assert_eq!(code, 0);
    assert!(stdout.contains("energy.csv"));

    let (code, _, err) = case("[mesh]\ninterior = 3\n", "simulate");
    assert_eq!(code, 2);
    assert_eq!(err.lines().count(), 1);
    assert!(err.starts_with("error[2]: "));

    let (code, _, err) = case(&format!("{MINIMAL}\n[material]\nb = 1.0\n[kernel.psi]\nfamily = \"exponential\"\namplitude = 2.0\nrate = 1.0\n"), "simulate");
    assert_eq!(code, 3);
    assert!(err.contains("b - g2_total > 0") && err.lines().count() == 1);

    let unstable = format!(
        "{}{SINE}",
        MINIMAL
            .replace("dt = 0.01", "dt = 0.2")
            .replace("steps = 20", "steps = 200\nbeta = 0.0")
    );
    let (code, _, err) = case(&unstable, "simulate");
    assert_eq!(code, 4, "{err}");
    assert!(err.starts_with("error[4]: divergence"));

    let printed = format!("{MINIMAL}{EXP_KERNELS}{SINE}\n[energy]\nconvention = \"as_printed\"\n");
    let (code, _, err) = case(&printed, "verify");
    assert_eq!(code, 5);
    assert!(err.contains("energy identity violated"));

    let (code, _, _) = cli(&["simulate", "--config", d.join("missing.toml").to_str().unwrap()]);
    assert_eq!(code, 2);
}

#[test]
fn repeated_runs_write_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = load("representative.toml");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run_simulate(&cfg, &a, 10, false).unwrap();
    run_simulate(&cfg, &b, 10, false).unwrap();
    for f in ["energy.csv", "final_state.csv"] {
        assert_eq!(
            std::fs::read(a.join(f)).unwrap(),
            std::fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
}
