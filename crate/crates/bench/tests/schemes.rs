use std::process::Command;

use irshp::alamouti::{cascaded_channel, PhaseConfig};
use irshp::channel::{generate_channels, LinkLosses};
use irshp::{Channels, SeedStream, SystemConfig};
use irshp_bench::schemes::fd_oracle_for_fixed_phases;
use irshp_bench::{run_scheme, BenchSettings, SchemeId, TrialCache};
use proptest::prelude::*;
use rand::SeedableRng;

fn small() -> SystemConfig {
    SystemConfig {
        m: 4,
        n_rf: 2,
        r1: 4,
        r2: 4,
        ..SystemConfig::table1()
    }
}

fn draw(cfg: &SystemConfig, seed: u64) -> Channels {
    generate_channels(cfg, &LinkLosses::uniform(0.0, 0.0), &SeedStream::new(seed)).unwrap()
}

#[test]
fn fixed_phase_oracle_puts_power_on_top_eigenvector() {
    let cfg = small();
    let ch = draw(&cfg, 1);
    let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(2);
    let p = PhaseConfig::random(ch.r1(), ch.r2(), &mut r);
    let h = cascaded_channel(&ch, &p);
    let top = (h.adjoint() * &h)
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let (pt, sigma2) = (3.0, 0.5);
    let (f, snr) = fd_oracle_for_fixed_phases(&ch, &p, pt, sigma2).unwrap();
    assert!((snr - pt / (2.0 * sigma2) * 2.0 * top).abs() < 1e-9 * snr);
    assert!((f.norm_squared() - 2.0).abs() < 1e-12);
}

#[test]
fn schemes_are_deterministic_per_seed() {
    let cfg = small();
    let ch = draw(&cfg, 3);
    let seeds = SeedStream::new(3);
    let settings = BenchSettings::default();
    for s in SchemeId::ALL {
        let a = run_scheme(s, &ch, 2, &seeds, &settings, &mut TrialCache::default()).unwrap();
        let b = run_scheme(s, &ch, 2, &seeds, &settings, &mut TrialCache::default()).unwrap();
        assert_eq!(a.gain.to_bits(), b.gain.to_bits(), "{s}");
    }
}

#[test]
fn scheme_names_round_trip() {
    for s in SchemeId::ALL {
        assert_eq!(s.name().parse::<SchemeId>().unwrap(), s);
    }
    assert!("best".parse::<SchemeId>().is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn hybrid_below_digital_below_bound(seed in 0u64..10_000) {
        let cfg = small();
        let ch = draw(&cfg, seed);
        let seeds = SeedStream::new(seed);
        let settings = BenchSettings::default();
        let mut cache = TrialCache::default();
        let mut g = |s| run_scheme(s, &ch, cfg.n_rf, &seeds, &settings, &mut cache).unwrap().gain;
        let fd = g(SchemeId::ProposedFD);
        let hp = g(SchemeId::ProposedHP);
        let ub = g(SchemeId::UpperBoundFD);
        let rnd = g(SchemeId::RandomIRS);
        prop_assert!(hp <= fd * (1.0 + 1e-9));
        prop_assert!(fd <= ub * (1.0 + 1e-9));
        prop_assert!(rnd > 0.0);
    }
}

fn cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_irshp"))
        .args(args)
        .output()
        .unwrap()
}

#[test]
fn cli_exit_codes() {
    assert_eq!(cli(&["--help"]).status.code(), Some(0));
    assert_eq!(cli(&["sweep", "--bogus"]).status.code(), Some(1));
    assert_eq!(cli(&["run", "--scenario", "nowhere"]).status.code(), Some(1));
    assert_eq!(cli(&["run", "--schemes", "fastest"]).status.code(), Some(1));
    assert_eq!(cli(&["sweep", "--trials", "0"]).status.code(), Some(1));
    assert_eq!(cli(&["--m", "0", "oracle", "--trials", "1"]).status.code(), Some(1));
}

#[test]
fn cli_run_reports_every_requested_scheme() {
    let out = cli(&[
        "--m", "4", "--r1", "4", "--r2", "4", "run", "--scenario", "config", "--schemes",
        "proposed-fd,random-irs", "--snr-db", "10",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("config,proposed-fd,0,"));
    assert!(lines[2].starts_with("config,random-irs,0,"));
}

#[test]
fn cli_reads_scenarios_from_config_file() {
    let dir = std::env::temp_dir().join(format!("irshp-cfg-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("cfg.toml");
    std::fs::write(
        &path,
        r#"
[[scenario]]
name = "near"
d_bs_irs = [20.0, 20.0]
d_irs_users = [[10.0, 10.0], [10.0, 10.0]]
r = 2
placement = "co-located"
"#,
    )
    .unwrap();
    let out = cli(&[
        "--config",
        path.to_str().unwrap(),
        "--m",
        "4",
        "run",
        "--scenario",
        "near",
        "--schemes",
        "random-irs",
    ]);
    let _ = std::fs::remove_dir_all(&dir);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8(out.stdout).unwrap().contains("near,random-irs"));
}

#[test]
fn cli_wide_sweep_has_one_column_per_scheme() {
    let out = cli(&[
        "--m", "4", "--r1", "4", "--r2", "4", "sweep", "--scenarios", "config", "--schemes",
        "random-irs,proposed-fd", "--snr-db", "10,0", "--trials", "1", "--wide",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "snr_db,config:proposed-fd,config:random-irs");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("0,") && lines[2].starts_with("10,"));
}
