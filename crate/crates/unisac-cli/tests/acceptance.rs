//! End-to-end acceptance checks, one test per release criterion.
//!
//! Each test prints a single PASS line (visible with `--nocapture`) after the
//! criterion's clauses hold, driving either the library surface or the
//! compiled binary exactly as a user would. Numeric regression fixtures were
//! captured from the first verified run at seed 3 and are compared as the
//! exact emitted strings.

use std::collections::BTreeSet;
use std::process::Command;

use rand::Rng;
use unisac::bounds::{self, GainScope, SystemConfig};
use unisac::mra::{check_mra, expected_index_gap, known_patterns, mra_search, PortPattern};
use unisac::numerics::linalg::{largest_eigenvalue, CMat};
use unisac::numerics::rng::{complex_gaussian, RandomStream};
use unisac::numerics::special::{chi2_cdf, chi2_inv};
use unisac::sensing::{build_codebook, linf_correlation, SensingCodebook};
use unisac_cli::table::parse_csv;

struct Run {
    stdout: String,
    stderr: String,
    code: i32,
}

fn unisac_bin(args: &[&str]) -> Run {
    let out = Command::new(env!("CARGO_BIN_EXE_unisac"))
        .args(args)
        .env_remove("UNISAC_SEED")
        .output()
        .expect("binary runs");
    Run {
        stdout: String::from_utf8(out.stdout).expect("utf8 stdout"),
        stderr: String::from_utf8(out.stderr).expect("utf8 stderr"),
        code: out.status.code().expect("exit code"),
    }
}

fn run_ok(args: &[&str]) -> String {
    let run = unisac_bin(args);
    assert_eq!(run.code, 0, "{args:?} failed: {}", run.stderr);
    run.stdout
}

fn data_rows(csv: &str) -> Vec<Vec<String>> {
    parse_csv(csv).expect("well-formed csv").rows
}

fn real(cell: &str) -> f64 {
    cell.parse().expect("real cell")
}

fn fas_book(m: usize) -> SensingCodebook {
    let indices = known_patterns(m).expect("tabulated pattern")[0];
    let pattern = PortPattern::new(indices.to_vec()).expect("valid pattern");
    let ports = *indices.last().unwrap() as usize + 1;
    let w = (m as f64 - 1.0) / 2.0;
    build_codebook(&pattern, ports, w, 90).expect("codebook builds")
}

fn toy_system(bits_c: u32, bits_s: u32, users_c: u32, users_s: u32) -> SystemConfig {
    SystemConfig {
        bits_c,
        bits_s,
        users_c,
        users_s,
        blocklength: 50,
        noise_var: 1.0,
        pattern: PortPattern::ula(2),
        surface_w: 0.5,
        ports: 2,
        gain: 1.0,
        gain_scope: GainScope::Both,
        gamma_max: 0.0,
        lambda_bar_sq: 0.0,
    }
}

#[test]
fn criterion_1_minimum_redundancy_tables() {
    let printed: [(usize, &[f64]); 6] = [
        (3, &[1.3333, 1.3333]),
        (5, &[3.84, 3.68]),
        (7, &[6.9388, 6.6122]),
        (9, &[12.0988, 12.2469]),
        (10, &[15.44]),
        (11, &[18.314]),
    ];

    let found3 = mra_search(3, 3).unwrap();
    let got3: Vec<&[u32]> = found3.iter().map(|p| p.indices()).collect();
    assert_eq!(got3, vec![&[0, 1, 3][..], &[0, 2, 3][..]], "search at 3 elements");

    for (m, cap, listed) in [(5usize, 9u32, known_patterns(5).unwrap()), (7, 17, known_patterns(7).unwrap())] {
        let found = mra_search(m, cap).unwrap();
        let set: BTreeSet<&[u32]> = found.iter().map(|p| p.indices()).collect();
        for want in listed {
            assert!(set.contains(*want), "search at {m} elements misses {want:?}");
        }
        assert!(found.iter().all(|p| p.aperture() == cap), "search at {m} stops short of {cap}");
    }

    let erratum: &[u32] = &[0, 1, 3, 10, 16, 22, 24, 27, 29];
    let mut flagged = Vec::new();
    for (m, gaps) in printed {
        let patterns = known_patterns(m).expect("tabulated element count");
        assert_eq!(patterns.len(), gaps.len());
        for (indices, want) in patterns.iter().zip(gaps) {
            let pattern = PortPattern::new(indices.to_vec()).unwrap();
            let gap = expected_index_gap(&pattern);
            assert!((gap - want).abs() < 1e-4, "gap for {indices:?}: {gap} vs {want}");
            if !check_mra(&pattern) {
                flagged.push(indices.to_vec());
            }
        }
    }
    assert_eq!(
        flagged,
        vec![erratum.to_vec()],
        "coarray check flags exactly the known hole-bearing published pattern"
    );

    println!(
        "PASS  criterion 1: searches recover the tabulated patterns, all gaps match \
         within 1e-4, and the one published pattern with coarray holes is flagged"
    );
}

#[test]
fn criterion_2_recovery_error_bound_dominates() {
    let csv = run_ok(&[
        "sense-verify",
        "--m",
        "3,5,11",
        "--snr-db=-10:20:5",
        "--trials",
        "200",
        "--seed",
        "0",
    ]);
    let rows = data_rows(&csv);
    assert_eq!(rows.len(), 3 * 7 * 200 * 3, "one row per solver, array, point, trial");
    let solvers: BTreeSet<&str> = rows.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(solvers, BTreeSet::from(["cosamp", "mp", "romp"]));
    let violations = rows.iter().filter(|r| real(&r[4]) > real(&r[5])).count();
    assert_eq!(violations, 0, "every recovery error stays under the closed-form bound");

    println!(
        "PASS  criterion 2: {} recovery trials across three solvers, zero bound violations",
        rows.len()
    );
}

#[test]
fn criterion_3_linf_noise_identity() {
    let mut checked = 0;
    for m in [3usize, 5, 7, 9, 10, 11] {
        for indices in known_patterns(m).unwrap() {
            let pattern = PortPattern::new(indices.to_vec()).unwrap();
            let ports = *indices.last().unwrap() as usize + 1;
            let w = (m as f64 - 1.0) / 2.0;
            let book = build_codebook(&pattern, ports, w, 90).unwrap();
            for sigma_z2 in [0.25, 1.0, 3.5] {
                let got = linf_correlation(&book, sigma_z2);
                assert!(
                    (got - sigma_z2).abs() < 1e-12,
                    "pattern {indices:?} noise {sigma_z2}: {got}"
                );
                checked += 1;
            }
        }
    }

    println!("PASS  criterion 3: noise correlation identity holds to 1e-12 in {checked} cases");
}

#[test]
fn criterion_4_collision_bound_dominates() {
    let pair = toy_system(4, 4, 2, 0);
    let exact = bounds::eps_coll(&pair).unwrap();
    assert!((exact - 0.0625).abs() < 1e-15, "two users on 16 words: {exact}");

    let cfg = toy_system(6, 4, 4, 3);
    let bound = bounds::eps_coll(&cfg).unwrap();
    let draws = 100_000u32;
    let mut rng = RandomStream::new(5).substream(0x9000, 0).rng();
    let total = (cfg.users_c + cfg.users_s) as f64;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..draws {
        let mut collided = 0u32;
        for (users, bits) in [(cfg.users_c, cfg.bits_c), (cfg.users_s, cfg.bits_s)] {
            let words = 1u64 << bits;
            let picks: Vec<u64> = (0..users).map(|_| rng.gen_range(0..words)).collect();
            collided += picks
                .iter()
                .enumerate()
                .filter(|(i, w)| picks.iter().enumerate().any(|(j, x)| j != *i && x == *w))
                .count() as u32;
        }
        let frac = collided as f64 / total;
        sum += frac;
        sum_sq += frac * frac;
    }
    let mean = sum / draws as f64;
    let var = (sum_sq / draws as f64 - mean * mean).max(0.0);
    let se = (var / draws as f64).sqrt();
    assert!(
        mean <= bound + 3.0 * se,
        "empirical collision rate {mean:.6} exceeds bound {bound:.6} + 3se {se:.2e}"
    );

    println!(
        "PASS  criterion 4: collision rate {mean:.5} under bound {bound:.5} across {draws} draws, \
         and the two-user case is exactly 1/16"
    );
}

#[test]
fn criterion_5_detection_errors_bounded() {
    let csv = run_ok(&["oracle", "--trials", "2000", "--seed", "0"]);
    let rows = data_rows(&csv);
    assert_eq!(rows.len(), 2 * 3, "error-count grid of the tiny configuration");
    let trials: u32 = rows.iter().map(|r| r[2].parse::<u32>().unwrap()).sum();
    assert_eq!(trials, 2000);
    assert!(
        rows[0][2].parse::<u32>().unwrap() < 2000,
        "the operating point must produce real detection errors"
    );
    let mut informative = 0;
    for row in &rows {
        let freq = real(&row[3]);
        let se = real(&row[4]);
        let bound = real(&row[5]);
        if bound < 1.0 {
            assert!(
                freq <= bound + 3.0 * se,
                "cell ({}, {}): frequency {freq} above bound {bound} + 3se",
                row[0],
                row[1]
            );
            informative += 1;
        }
    }
    assert!(informative >= 3, "enough cells carry bounds below one");

    println!(
        "PASS  criterion 5: all {informative} informative error-count cells sit under their \
         analytic bounds across 2000 decoded trials"
    );
}

const ACHIEVABLE_FAS_SEED3: [&str; 5] = [
    "100,1.20342548e1,1.00000000e-3,3.86541844e-29,9.76925883e-2,3.93509703e-4,pupe",
    "200,1.20727166e1,1.00000000e-3,7.80972296e-29,7.63344375e-2,4.99664109e-4,mseaoa",
    "400,1.21841334e1,1.00000000e-3,1.56983320e-28,4.68320947e-3,1.43893209e-4,mseaoa",
    "800,1.26926263e1,1.00000000e-3,3.14755501e-28,2.32445077e-7,4.83158234e-5,mseaoa",
    "1400,1.35654933e1,1.00000000e-3,5.51413773e-28,1.84856606e-15,3.24182650e-5,mseaoa",
];

const ACHIEVABLE_LOS_SEED3: [&str; 5] = [
    "100,1.49245747e1,1.00000000e-3,3.86541844e-29,9.82975869e-2,9.54882150e-5,pupe",
    "200,1.49575433e1,1.00000000e-3,7.80972296e-29,9.64399607e-2,1.40005462e-4,pupe",
    "400,1.50744533e1,1.00000000e-3,1.56983320e-28,4.71021580e-3,3.48994650e-5,mseaoa",
    "800,1.55829462e1,1.00000000e-3,3.14755501e-28,2.33338034e-7,1.16860780e-5,mseaoa",
    "1400,1.64558131e1,1.00000000e-3,5.51413773e-28,1.85739947e-15,7.84095301e-6,mseaoa",
];

const FLOOR_FAS_SEED3: [&str; 5] = [
    "100,5.95062256e0,capacity,2.01246208e0,6.11027588e-3",
    "200,6.40563965e0,capacity,4.01610264e0,7.73874501e-3",
    "400,7.37518311e0,capacity,8.01873647e0,9.24925501e-3",
    "800,9.17144775e0,capacity,1.60257067e1,1.23694071e-2",
    "1400,1.17816162e1,capacity,2.80309729e1,1.50099510e-2",
];

fn assert_rows(kind: &str, rows: &[Vec<String>], frozen: &[&str]) {
    assert_eq!(rows.len(), frozen.len(), "{kind}: row count");
    for (row, want) in rows.iter().zip(frozen) {
        let got = row.join(",");
        assert_eq!(got, *want, "{kind} regression row drifted");
    }
}

#[test]
fn criterion_6_energy_frontier_shape() {
    let users = "100,200,400,800,1400";
    let fas = data_rows(&run_ok(&["achievable", "--users", users, "--seed", "3"]));
    let los = data_rows(&run_ok(&[
        "achievable",
        "--users",
        users,
        "--seed",
        "3",
        "--gain-mode",
        "los",
    ]));
    let floor = data_rows(&run_ok(&["floor", "--users", users, "--seed", "3"]));

    for w in fas.windows(2) {
        assert!(
            real(&w[1][1]) >= real(&w[0][1]),
            "achievable energy must not fall as load grows: {w:?}"
        );
    }
    for (f, a) in floor.iter().zip(&fas) {
        assert!(
            real(&f[1]) <= real(&a[1]),
            "floor above the achievable frontier at {} users",
            f[0]
        );
    }
    for (a, l) in fas.iter().zip(&los) {
        assert!(
            real(&a[1]) <= real(&l[1]),
            "port selection must not cost energy at {} users",
            a[0]
        );
    }

    assert_rows("achievable fas", &fas, &ACHIEVABLE_FAS_SEED3);
    assert_rows("achievable los", &los, &ACHIEVABLE_LOS_SEED3);
    assert_rows("floor fas", &floor, &FLOOR_FAS_SEED3);

    println!(
        "PASS  criterion 6: frontier grows with load, floor stays below it, the fluid array \
         beats the fixed baseline pointwise, and all 15 frozen rows are unchanged"
    );
}

const ANTENNAS_FAS_SEED3: [&str; 5] = [
    "3,2.12389667e1,1.00000000e-3,3.86541844e-29,2.10160868e-17,4.99949196e-4,mseaoa",
    "5,1.60497578e1,1.00000000e-3,3.86541844e-29,4.78359069e-3,4.99821154e-4,mseaoa",
    "7,1.42846210e1,1.00000000e-3,3.86541844e-29,3.03141455e-2,4.95739039e-4,mseaoa",
    "9,1.27950581e1,1.00000000e-3,3.86541844e-29,8.34186854e-2,4.90887967e-4,mseaoa",
    "11,1.14940937e1,1.00000000e-3,3.86541844e-29,9.63306110e-2,3.10515494e-4,pupe",
];

const ANTENNAS_LOS_SEED3: [&str; 5] = [
    "3,2.09395893e1,1.00000000e-3,3.86541844e-29,1.30671516e-8,4.99915064e-4,mseaoa",
    "5,1.79732807e1,1.00000000e-3,3.86541844e-29,3.48606447e-2,4.23144975e-4,mseaoa",
    "7,1.64782246e1,1.00000000e-3,3.86541844e-29,9.85416000e-2,2.84792358e-4,pupe",
    "9,1.53832539e1,1.00000000e-3,3.86541844e-29,9.86197461e-2,1.31857359e-4,pupe",
    "11,1.45098408e1,1.00000000e-3,3.86541844e-29,9.77621642e-2,7.12703694e-5,pupe",
];

#[test]
fn criterion_7_antenna_count_sweep() {
    let args = ["antennas", "--m", "3,5,7,9,11", "--users", "100", "--seed", "3"];
    let fas = data_rows(&run_ok(&args));
    let mut los_args = args.to_vec();
    los_args.extend(["--gain-mode", "los"]);
    let los = data_rows(&run_ok(&los_args));

    for rows in [&fas, &los] {
        for w in rows[1..].windows(2) {
            assert!(
                real(&w[1][1]) < real(&w[0][1]),
                "required energy must fall strictly with more antennas: {w:?}"
            );
        }
    }
    for (f, l) in fas.iter().zip(&los).skip(1) {
        assert!(
            real(&f[1]) <= real(&l[1]),
            "the fluid array must win from 5 antennas up, lost at m = {}",
            f[0]
        );
    }
    assert!(
        real(&fas[0][1]) > real(&los[0][1]),
        "the documented small-array penalty at 3 antennas has the wrong sign"
    );

    assert_rows("antennas fas", &fas, &ANTENNAS_FAS_SEED3);
    assert_rows("antennas los", &los, &ANTENNAS_LOS_SEED3);

    let gamma = fas_book(3).gamma_max();
    let published = 1.5471e3;
    if (gamma - published).abs() > 0.05 * published {
        println!(
            "FAIL  criterion 7: dictionary gamma at 3 antennas on the 90-point grid is \
             {gamma:.4}, not within 5% of the published {published}"
        );
        panic!(
            "dictionary gamma {gamma:.4} vs published {published}: the deterministic \
             steering dictionary provably cannot exceed its trace 810 (90 unit-modulus \
             columns of squared norm 9), and Monte Carlo channel dictionaries at the \
             documented defaults measure 476.6 +/- 12.6 (fresh draw per column) or \
             585.8 +/- 105.7 (one draw per trial), scaling with the square of the mean \
             channel power; no documented construction reaches the published value, so \
             this clause is reported as-is rather than retuned"
        );
    }

    println!(
        "PASS  criterion 7: energy falls strictly with antenna count, the fluid array wins \
         from 5 antennas, the 3-antenna penalty has the documented sign, and gamma matches"
    );
}

fn jacobi_max_eigenvalue(a: &CMat) -> f64 {
    let n = a.rows();
    let dim = 2 * n;
    let mut e = vec![vec![0.0f64; dim]; dim];
    for r in 0..n {
        for c in 0..n {
            let z = a.get(r, c);
            e[r][c] = z.re;
            e[r + n][c + n] = z.re;
            e[r][c + n] = -z.im;
            e[r + n][c] = z.im;
        }
    }
    let scale: f64 = e.iter().flatten().map(|x| x * x).sum::<f64>().sqrt().max(1.0);
    for _ in 0..60 {
        let mut off = 0.0;
        for p in 0..dim {
            for q in p + 1..dim {
                off += e[p][q] * e[p][q];
            }
        }
        if off.sqrt() <= 1e-13 * scale {
            break;
        }
        for p in 0..dim {
            for q in p + 1..dim {
                let apq = e[p][q];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let theta = (e[q][q] - e[p][p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (1.0 + theta * theta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..dim {
                    let ekp = e[k][p];
                    let ekq = e[k][q];
                    e[k][p] = c * ekp - s * ekq;
                    e[k][q] = s * ekp + c * ekq;
                }
                for k in 0..dim {
                    let epk = e[p][k];
                    let eqk = e[q][k];
                    e[p][k] = c * epk - s * eqk;
                    e[q][k] = s * epk + c * eqk;
                }
            }
        }
    }
    (0..dim).map(|i| e[i][i]).fold(f64::NEG_INFINITY, f64::max)
}

#[test]
fn criterion_8_special_functions() {
    for x in [1e-6f64, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 30.0, 100.0] {
        let got = chi2_cdf(x, 2).unwrap();
        let want = -(-0.5 * x).exp_m1();
        assert!((got - want).abs() < 1e-10, "cdf at {x}: {got} vs {want}");
    }
    for p in [1e-9f64, 1e-4, 0.1, 0.5, 0.9, 0.999, 1.0 - 1e-9] {
        let got = chi2_inv(p, 2).unwrap();
        let want = -2.0 * (-p).ln_1p();
        assert!(
            (got - want).abs() < 1e-10 * want.max(1.0),
            "quantile at {p}: {got} vs {want}"
        );
    }
    for k in [1u32, 2, 3, 10, 100, 1000, 10_000] {
        for p in [1e-8f64, 1e-3, 0.05, 0.3, 0.5, 0.7, 0.95, 1.0 - 1e-3, 1.0 - 1e-8] {
            let x = chi2_inv(p, k).unwrap();
            let back = chi2_cdf(x, k).unwrap();
            assert!((back - p).abs() < 1e-8, "round trip at k={k} p={p}: {back}");
        }
    }

    for case in 0..50u32 {
        let mut rng = RandomStream::new(8).substream(0x8100 + case, 0).rng();
        let b = CMat::from_fn(10, 10, |_, _| complex_gaussian(&mut rng, 1.0));
        let gram = b.gram();
        let power = largest_eigenvalue(&gram).unwrap();
        let oracle = jacobi_max_eigenvalue(&gram);
        assert!(
            (power - oracle).abs() <= 1e-7 * oracle.max(1.0),
            "case {case}: power {power} vs rotation oracle {oracle}"
        );
    }

    println!(
        "PASS  criterion 8: quantile closed forms to 1e-10, round trips to 1e-8 through \
         10000 degrees of freedom, and 50 eigenvalue cross-checks to 1e-7"
    );
}

#[test]
fn criterion_9_byte_reproducibility() {
    let commands: [&[&str]; 7] = [
        &["mra", "--m", "5"],
        &["gain", "--m", "3", "--trials", "50"],
        &["sense-verify", "--m", "3", "--snr-db", "0:10:5", "--trials", "20"],
        &["achievable", "--users", "100"],
        &["antennas", "--m", "3,5"],
        &["floor", "--users", "100", "--trials", "100"],
        &["oracle", "--trials", "200"],
    ];
    for base in commands {
        let mut seeded = base.to_vec();
        seeded.extend(["--seed", "11"]);
        let first = run_ok(&seeded);
        let second = run_ok(&seeded);
        assert_eq!(first, second, "{base:?} drifts between runs");
        for threads in ["1", "8"] {
            let mut pinned = seeded.clone();
            pinned.extend(["--threads", threads]);
            assert_eq!(
                first,
                run_ok(&pinned),
                "{base:?} output depends on a {threads}-worker pool"
            );
        }
    }

    println!("PASS  criterion 9: all seven subcommands byte-identical across reruns and 1 vs 8 workers");
}

#[test]
fn cli_contract_exit_codes_and_artifacts() {
    assert_eq!(unisac_bin(&["--help"]).code, 0);
    assert_eq!(unisac_bin(&["--version"]).code, 0);
    assert_eq!(unisac_bin(&["mra", "--m", "oops"]).code, 3);

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[system]\nbogus = 1\n").unwrap();
    let run = unisac_bin(&["mra", "--m", "3", "--config", bad.to_str().unwrap()]);
    assert_eq!(run.code, 3);
    assert!(run.stderr.contains("bogus"), "config errors name the offending key: {}", run.stderr);

    let narrow = dir.path().join("narrow.toml");
    std::fs::write(&narrow, "[system]\nbits_c = 4\nbits_s = 4\n").unwrap();
    for cmd in ["achievable", "floor"] {
        let run = unisac_bin(&[cmd, "--users", "100", "--config", narrow.to_str().unwrap()]);
        assert_eq!(run.code, 2, "{cmd} must report infeasibility: {}", run.stderr);
        assert!(run.stderr.contains("collision floor"), "{cmd}: {}", run.stderr);
    }

    let out_dir = dir.path().join("results");
    let stdout = run_ok(&[
        "achievable",
        "--users",
        "100",
        "--seed",
        "3",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    let file = std::fs::read_to_string(out_dir.join("achievable.csv")).unwrap();
    assert_eq!(stdout, file, "the written artifact must carry the emitted bytes");
    let parsed = parse_csv(&file).unwrap();
    for key in ["config_hash", "seed", "version"] {
        assert!(
            parsed.meta.iter().any(|(k, _)| k == key),
            "artifact metadata is missing {key}"
        );
    }

    let dumped = run_ok(&["--dump-config"]);
    let cfg = unisac_cli::config::ExperimentConfig::parse(&dumped).unwrap();
    assert_eq!(cfg, unisac_cli::config::ExperimentConfig::default());

    println!("PASS  exit codes, artifact metadata, and the config dump follow the documented contract");
}
