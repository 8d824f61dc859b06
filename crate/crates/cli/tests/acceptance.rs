//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.
//!
//! Run with `cargo test -p efpsa-cli --test acceptance`.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use efpsa_core::control::{crosstalk_report, eliminate_crosstalk, local_drive, ControlOptions, DriveTarget};
use efpsa_core::device::{load_device, DeviceModel, NvField};
use efpsa_core::field::profiles::{log_radii, profile_curve};
use efpsa_core::field::{
    assemble_g, fit_loglog_slope, Components, FieldBasisSet, ProfileKind, DEFAULT_FIN_CONFINEMENT,
};
use efpsa_core::photonic::{beta_efficiency, collection_efficiency, LossUnits, OpticalInterface};
use efpsa_core::repeater::{
    channel_capacity, hybrid_envelope, monte_carlo_protocol, mzi_scaling_exponent, rate_curve, scheme_crossover,
    superradiance_fidelity, superradiance_time, tradeoff, Architecture, Limit, LinkParams, PairModel,
};
use efpsa_core::spin::{average_gate_fidelity, dephasing_pi_fidelity, rabi_frequency, DriveConfig, Transition};
use efpsa_core::thermal::{dissipation_ratio, heat_electric, heat_magnetic, CircuitParams};

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new() -> Self {
        Self { pass: true, detail: String::new() }
    }

    /// Record one sub-check.
    fn check(&mut self, ok: bool, what: String) {
        if !self.detail.is_empty() {
            self.detail.push_str("; ");
        }
        if !ok {
            self.pass = false;
            self.detail.push_str("!! ");
        }
        self.detail.push_str(&what);
    }

    fn runtime(&mut self, elapsed: Duration, bound: Duration) {
        self.check(elapsed < bound, format!("runtime {:.3?} < {:?}", elapsed, bound));
    }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let v = f();
    (v, t.elapsed())
}

fn device() -> DeviceModel {
    load_device("").expect("default device")
}

fn c1_rabi() -> Outcome {
    let mut o = Outcome::new();
    let k = device().constants;
    let (omega, dt) = timed(|| {
        let d = DriveConfig::resonant(Transition::PlusMinus, NvField::new(0.0, 1e7, 0.0), 0.0, 0.0, &k);
        rabi_frequency(&d, &k)
    });
    o.check((omega / 1.7e6 - 1.0).abs() <= 0.02, format!("Ω(1e7 V/m) = {omega:.6e} Hz (1.7 MHz ± 2%)"));
    o.runtime(dt, Duration::from_millis(1));
    o
}

fn c2_gate_fidelity() -> Outcome {
    let mut o = Outcome::new();
    let ((avg, eq), dt) = timed(|| {
        let avg = average_gate_fidelity(1.7e6, 10e-6, 100_000, 7).unwrap();
        (avg, dephasing_pi_fidelity(1.7e6, 10e-6))
    });
    o.check(avg >= 0.99, format!("F_avg = {avg:.6} >= 0.99 (1e5 samples)"));
    o.check((eq - 0.98549).abs() <= 1e-5, format!("F_equator = {eq:.7}, pinned 0.98549 ± 1e-5, |Δ| = {:.2e}", (eq - 0.98549).abs()));
    o.runtime(dt, Duration::from_secs(5));
    o
}

fn c3_crosstalk() -> Outcome {
    let mut o = Outcome::new();
    let ((ce_f, fin_f, bare_f, residual), dt) = timed(|| {
        let dev = device();
        let k = &dev.constants;
        let n = dev.geometry.n_sites;
        let site = (n - 1) / 2;
        let field = (1e7, 0.0);
        let target = DriveTarget::single_site(n, site, field);
        let positions = dev.geometry.nv_positions();
        let g_of = |fin: f64| {
            let basis = FieldBasisSet::surrogate(&dev.geometry, fin).unwrap();
            assemble_g(&basis, &positions, &dev.frame, Components::Perp2).unwrap()
        };
        let neighbour_min = |r: Vec<efpsa_core::control::SiteCrosstalk>| {
            r.iter().filter(|c| c.site + 1 == site || c.site == site + 1).map(|c| c.equator).fold(1.0, f64::min)
        };
        let g = g_of(DEFAULT_FIN_CONFINEMENT);
        let ce = eliminate_crosstalk(&g, &target, k, &ControlOptions::default()).unwrap();
        let ce_f = neighbour_min(crosstalk_report(&g, &ce.voltages, &target, k).unwrap());
        let fin_f = neighbour_min(crosstalk_report(&g, &local_drive(&g, site, field).unwrap(), &target, k).unwrap());
        let gb = g_of(1.0);
        let bare_f = neighbour_min(crosstalk_report(&gb, &local_drive(&gb, site, field).unwrap(), &target, k).unwrap());
        (ce_f, fin_f, bare_f, ce.relative_residual)
    });
    o.check(ce_f > 0.999, format!("F_CE = {ce_f:.9} > 0.999"));
    o.check(residual < 1e-9, format!("‖GV−E‖/‖E‖ = {residual:.2e} < 1e-9"));
    o.check((0.85..=0.95).contains(&fin_f), format!("F_fin = {fin_f:.4} in [0.85, 0.95]"));
    o.check((0.60..=0.75).contains(&bare_f), format!("F_bare = {bare_f:.4} in [0.60, 0.75]"));
    o.check(ce_f > fin_f && fin_f > bare_f, "F_CE > F_fin > F_bare".into());
    o.runtime(dt, Duration::from_secs(10));
    o
}

fn c4_optics() -> Outcome {
    let mut o = Outcome::new();
    let ((beta, factor), dt) = timed(|| {
        let beta = beta_efficiency(10.0, 0.03);
        (beta, collection_efficiency(beta, 4e-3, 100.0, LossUnits::Decibel) / beta)
    });
    o.check((beta - 0.2362).abs() <= 1e-4, format!("β = {beta:.6} (0.2362 ± 1e-4)"));
    o.check((factor - 0.912).abs() <= 1e-3, format!("η/β = {factor:.6} (0.912 ± 1e-3)"));
    o.runtime(dt, Duration::from_millis(1));
    o
}

fn c5_repeater() -> Outcome {
    let mut o = Outcome::new();
    let lp = LinkParams::default();
    let op = OpticalInterface::default();
    let start = Instant::now();
    let ns: Vec<usize> = (1..=5000).collect();
    let efpsa = rate_curve(Architecture::Efpsa, &ns, &lp, &op);
    let mzi = rate_curve(Architecture::Mzi, &ns, &lp, &op);
    let env = hybrid_envelope(&ns, &lp, &op);
    let peak = efpsa.iter().max_by(|a, b| a.rate.total_cmp(&b.rate)).unwrap();
    o.check((600..=1200).contains(&peak.n), format!("peak N = {} in [600, 1200]", peak.n));
    o.check((5e3..=1e5).contains(&peak.rate), format!("peak Γ = {:.4e} in [5e3, 1e5]", peak.rate));
    let cap = channel_capacity(&lp);
    let first_clamped = efpsa.iter().find(|p| p.limit == Limit::Capacity).map(|p| p.n);
    let ok = first_clamped.is_some_and(|n| (n as f64 / 3000.0 - 1.0).abs() <= 0.15);
    o.check(ok, format!("clamp at N = {first_clamped:?} (capacity {cap}) within 15% of 3000"));
    let pow2: Vec<usize> = (6..=12).map(|k| 1usize << k).collect();
    let expo = mzi_scaling_exponent(&pow2, &lp, &op);
    o.check((expo - 0.880).abs() <= 0.01, format!("MZI exponent = {expo:.5} (0.880 ± 0.01)"));
    let dominated = env
        .iter()
        .zip(efpsa.iter().zip(&mzi))
        .all(|(h, (a, b))| h.rate >= a.rate.max(b.rate) * (1.0 - 1e-12));
    o.check(dominated, "hybrid envelope >= max(eFPSA, MZI) at every N in 1..=5000".into());
    for n in [10, 100, 800] {
        let m = PairModel::new(Architecture::Efpsa, n, &lp, &op);
        let mc = monte_carlo_protocol(&m, 7, 100_000).unwrap();
        let z = (mc.rate - m.rate()) / mc.stderr;
        o.check(z.abs() < 3.0, format!("MC N={n}: z = {z:+.2}"));
    }
    let nats = OpticalInterface { units: LossUnits::Neper, ..op.clone() };
    let nats_peak = rate_curve(Architecture::Efpsa, &ns, &lp, &nats)
        .into_iter()
        .max_by(|a, b| a.rate.total_cmp(&b.rate))
        .unwrap();
    let at_cap = |c: &[efpsa_core::repeater::RatePoint]| c[cap - 1].rate;
    o.check(
        true,
        format!(
            "info: nats peak N = {} Γ = {:.3e}; MZI/eFPSA at capacity = {:.2}",
            nats_peak.n,
            nats_peak.rate,
            at_cap(&mzi) / at_cap(&efpsa)
        ),
    );
    o.runtime(start.elapsed(), Duration::from_secs(60));
    o
}

fn c6_superradiance() -> Outcome {
    let mut o = Outcome::new();
    let ((t0, tr, cross), dt) = timed(|| {
        (superradiance_time(0.99, 100e6).unwrap(), tradeoff(0.99), scheme_crossover(0.99).unwrap())
    });
    o.check((t0 - 52.9e-9).abs() <= 0.5e-9, format!("t0 = {:.3} ns (52.9 ± 0.5)", t0 * 1e9));
    o.check(
        (superradiance_fidelity(t0, 100e6) - 0.99).abs() < 1e-12,
        format!("F(t0) = {:.12}", superradiance_fidelity(t0, 100e6)),
    );
    o.check((tr - 5.05e-3).abs() <= 1e-5, format!("tradeoff = {tr:.6e} (5.05e-3 ± 1e-5)"));
    let ok = cross.is_some_and(|p| (p / 3e-2 - 1.0).abs() <= 0.5);
    o.check(ok, format!("crossover p_det = {cross:?} (3e-2 ± 50%)"));
    o.runtime(dt, Duration::from_secs(1));
    o
}

fn c7_slopes() -> Outcome {
    let mut o = Outcome::new();
    let (slopes, dt) = timed(|| {
        let rs = log_radii(5e-6, 50e-6, 21);
        ProfileKind::ALL.map(|k| (k, fit_loglog_slope(&rs, &profile_curve(k, &rs).unwrap())))
    });
    for (k, s) in slopes {
        let want = k.expected_slope();
        o.check((s - want).abs() <= 0.15, format!("{} {s:.3} ({want})", k.name()));
    }
    o.runtime(dt, Duration::from_secs(10));
    o
}

fn c8_thermal(bin: &Path, work: &Path) -> Outcome {
    let mut o = Outcome::new();
    let k = device().constants;
    let (worst, dt) = timed(|| {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut worst = 0.0f64;
        for _ in 0..100 {
            let d = 10f64.powf(rng.random_range(-7.0..-5.0));
            let p = CircuitParams {
                c: 10f64.powf(rng.random_range(-18.0..-14.0)),
                r: 10f64.powf(rng.random_range(10.0..21.0)),
                r_w: 10f64.powf(rng.random_range(-4.0..0.0)),
                lambda: d,
                ..CircuitParams::default()
            };
            let omega = 10f64.powf(rng.random_range(5.0..11.0));
            let rabi = 10f64.powf(rng.random_range(4.0..8.0));
            let dp = rng.random_range(1e-3..1.0);
            let ratio = heat_electric(&p, rabi, omega, dp) / heat_magnetic(&p, rabi, d, k.gamma, k.mu0);
            let r = dissipation_ratio(&p, omega, dp, k.gamma, k.mu0);
            worst = worst.max((ratio / r - 1.0).abs());
        }
        worst
    });
    o.check(worst <= 1e-12, format!("J_E/J_B vs ratio at 100 points: max rel err {worst:.1e}"));
    o.runtime(dt, Duration::from_secs(1));

    let out = work.join("c8");
    let t = Instant::now();
    let status = run(bin, &["heat-budget", "--rabi", "2e6", "--omega-sweep", "1e6:2e9", "--out"], &out, &[]);
    let elapsed = t.elapsed();
    if !status {
        o.check(false, "heat-budget failed".into());
        return o;
    }
    let text = std::fs::read_to_string(out.join("heat_budget.csv")).unwrap();
    let rows: Vec<Vec<f64>> = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    let je: Vec<f64> = rows.iter().map(|r| r[3]).collect();
    let (lo, hi) = (je.iter().cloned().fold(f64::INFINITY, f64::min), je.iter().cloned().fold(0.0, f64::max));
    o.check(lo < 1.1e-21 && 1.1e-21 < hi, format!("table J_E in [{lo:.2e}, {hi:.2e}] brackets 1.1e-21 J"));
    let monotone = je.windows(2).all(|w| w[1] >= w[0]) && rows.windows(2).all(|w| w[1][5] >= w[0][5]);
    o.check(monotone && lo > 0.0, "J_E and ratio positive and nondecreasing in ω".into());
    o.runtime(elapsed, Duration::from_secs(1));
    o
}

fn run(bin: &Path, args: &[&str], out: &Path, env: &[(&str, &str)]) -> bool {
    let mut cmd = Command::new(bin);
    cmd.args(args).arg(out);
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().map(|o| o.status.success()).unwrap_or(false)
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .map(|rd| {
            rd.filter_map(|e| e.ok())
                .map(|e| (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap()))
                .collect()
        })
        .unwrap_or_default();
    files.sort();
    files
}

fn c9_determinism(bin: &Path, work: &Path) -> Outcome {
    let mut o = Outcome::new();
    let drive = work.join("drive.json");
    let stark = work.join("stark.json");
    std::fs::write(&drive, r#"{"mode":"drive","n_sites":10,"sites":[{"site":4,"mu1":1e7},{"site":7,"mu1":5e6,"mu2":2e6}]}"#)
        .unwrap();
    std::fs::write(&stark, r#"{"mode":"stark","n_sites":10,"sites":[{"site":2,"channel":1},{"site":5,"shift_hz":-1e11}]}"#)
        .unwrap();
    let (drive, stark) = (drive.to_string_lossy().into_owned(), stark.to_string_lossy().into_owned());
    // (name, args, env of run a, env of run b)
    type Case<'a> = (&'a str, Vec<&'a str>, Vec<(&'a str, &'a str)>, Vec<(&'a str, &'a str)>);
    let cases: Vec<Case> = vec![
        ("gate-fidelity", vec!["gate-fidelity", "--samples", "2e4"], vec![], vec![]),
        ("field-profile", vec!["field-profile"], vec![], vec![]),
        ("gmatrix", vec!["gmatrix"], vec![], vec![]),
        ("synthesize-drive", vec!["synthesize", "--target", &drive], vec![], vec![]),
        ("synthesize-stark", vec!["synthesize", "--target", &stark], vec![], vec![]),
        ("heat-budget", vec!["heat-budget"], vec![], vec![]),
        ("rates", vec!["rates", "--arch", "hybrid", "--nmax", "600"], vec![], vec![]),
        ("schemes", vec!["schemes"], vec![], vec![]),
        ("mc", vec!["mc", "--trials", "2e4"], vec![("EFPSA_THREADS", "1")], vec![("EFPSA_THREADS", "4")]),
        ("fig2", vec!["fig2"], vec![], vec![]),
        ("fig4", vec!["fig4"], vec![], vec![]),
        ("appendix", vec!["appendix"], vec![], vec![]),
    ];
    let start = Instant::now();
    for (name, mut args, env_a, env_b) in cases {
        args.push("--out");
        let (a, b) = (work.join(format!("{name}-a")), work.join(format!("{name}-b")));
        let t = Instant::now();
        let ok = run(bin, &args, &a, &env_a) && run(bin, &args, &b, &env_b);
        let elapsed = t.elapsed() / 2;
        let (fa, fb) = (dir_bytes(&a), dir_bytes(&b));
        let same = ok && !fa.is_empty() && fa == fb;
        o.check(same, format!("{name} ({} files, {:.2?}/run)", fa.len(), elapsed));
        if name == "fig4" {
            o.check(elapsed < Duration::from_secs(60), format!("fig4 sweep {elapsed:.2?} < 60s"));
        }
    }
    // Stdout mode as well.
    let stdout = |_: ()| Command::new(bin).args(["schemes", "--fidelity", "0.95"]).output().unwrap().stdout;
    let (x, y) = (stdout(()), stdout(()));
    o.check(!x.is_empty() && x == y, "schemes to stdout".into());
    o.check(true, format!("total {:.2?}", start.elapsed()));
    o
}

fn main() {
    let bin = PathBuf::from(env!("CARGO_BIN_EXE_efpsa"));
    let work = tempfile::tempdir().expect("temp dir");
    type Criterion<'a> = (&'a str, Box<dyn Fn() -> Outcome + 'a>);
    let criteria: Vec<Criterion> = vec![
        ("rabi calibration", Box::new(c1_rabi)),
        ("gate fidelity", Box::new(c2_gate_fidelity)),
        ("cross-talk elimination", Box::new(c3_crosstalk)),
        ("optical interface", Box::new(c4_optics)),
        ("repeater curves", Box::new(c5_repeater)),
        ("superradiance", Box::new(c6_superradiance)),
        ("field scaling laws", Box::new(c7_slopes)),
        ("thermal model", Box::new(|| c8_thermal(&bin, work.path()))),
        ("determinism", Box::new(|| c9_determinism(&bin, work.path()))),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let o = f();
        if !o.pass {
            failed += 1;
        }
        println!("{} {}. {name}: {}", if o.pass { "PASS" } else { "FAIL" }, i + 1, o.detail);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
