//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Criteria listed in `KNOWN_RED` are reported as FAIL like any other but
//! do not fail the run; see the README for why they are red. Any other
//! failure exits non-zero.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::Rng;
use tree_itp::experiment::{comparison_table, run_trials, Algorithm, ExperimentSpec};
use tree_itp::measurement::{
    derive_seed, estimate_tree_rip, sample_gaussian_matrix, stream_rng, CoeffLaw, InstanceSpec,
    ProblemInstance,
};
use tree_itp::projection::{project, project_bruteforce};
use tree_itp::solver::{solve, SolverConfig, SolverReport, Termination};
use tree_itp::theory::bounds::{
    prior_bound_domain_limit, prior_bound_residual, prior_bound_tr, rip_bound_lower,
    rip_bound_upper, rip_lower_residual, rip_upper_residual, tail_bound_tif, tail_bound_til,
    tail_bound_tiu, tif_residual, til_residual, tiu_residual,
};
use tree_itp::theory::factors::stable_point_sides;
use tree_itp::theory::thresholds::{
    prior_recovery_level, threshold_rip_residual, threshold_stable_point_residual,
};
use tree_itp::theory::{
    linear_grid, oversampling_factor, rip_factors, stability_factor_sp, threshold, Analysis,
    Stepsize, Variant,
};
use tree_itp::tree::{
    build_complete_tree, enumerate_supports, ln_tree_count, tree_count, TreeTopology,
};

/// Criteria expected to fail, with the reason printed beside them.
const KNOWN_RED: &[(&str, &str)] = &[(
    "1b",
    "the stable-point threshold equation as written solves to values 0.7-1% below the quoted ones",
)];

struct Verdict {
    id: &'static str,
    title: &'static str,
    pass: bool,
    detail: String,
    elapsed: Duration,
}

fn check(id: &'static str, title: &'static str, f: impl FnOnce() -> (bool, String)) -> Verdict {
    let start = Instant::now();
    let (pass, detail) = f();
    Verdict {
        id,
        title,
        pass,
        detail,
        elapsed: start.elapsed(),
    }
}

/// Within half a unit of the third significant digit of `quoted`.
fn three_digits(value: f64, quoted: f64) -> bool {
    let unit = 10f64.powi(quoted.abs().log10().floor() as i32 - 2);
    (value - quoted).abs() <= 0.5 * unit * (1.0 + 1e-9)
}

fn itp() -> Variant {
    Variant::itp_optimal()
}

fn nitp() -> Variant {
    Variant::nitp(1.1)
}

fn c1a() -> (bool, String) {
    let cases = [
        (2, itp(), 0.00875),
        (2, nitp(), 0.00146),
        (4, itp(), 0.00705),
        (4, nitp(), 0.00123),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (d, v, quoted) in cases {
        let t = Instant::now();
        let rho = threshold(d, v, Analysis::Rip).unwrap();
        let fast = t.elapsed() < Duration::from_secs(1);
        let good = three_digits(rho, quoted) && fast;
        ok &= good;
        parts.push(format!("d={d} {}={rho:.6} (quoted {quoted})", v.name()));
    }
    (ok, parts.join(", "))
}

fn c1b() -> (bool, String) {
    let cases = [
        (2, itp(), 0.0202),
        (2, nitp(), 0.0184),
        (4, itp(), 0.0147),
        (4, nitp(), 0.0134),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (d, v, quoted) in cases {
        let rho = threshold(d, v, Analysis::StablePoint).unwrap();
        ok &= three_digits(rho, quoted);
        parts.push(format!("d={d} {}={rho:.6} (quoted {quoted})", v.name()));
    }
    // Closure at the quoted binary ITP value.
    let (lhs, rhs) = stable_point_sides(2, 0.0202, 1.0).unwrap();
    let gap = (lhs - rhs).abs() / rhs;
    ok &= gap <= 1e-3;
    parts.push(format!(
        "relative gap of the two sides at 0.0202: {gap:.2e}"
    ));
    (ok, parts.join(", "))
}

fn c1c() -> (bool, String) {
    let got = [
        oversampling_factor(threshold(2, itp(), Analysis::StablePoint).unwrap()),
        oversampling_factor(threshold(2, nitp(), Analysis::StablePoint).unwrap()),
        oversampling_factor(threshold(2, itp(), Analysis::Rip).unwrap()),
        oversampling_factor(threshold(2, nitp(), Analysis::Rip).unwrap()),
    ];
    (
        got == [50, 55, 115, 683],
        format!("ceil(1/rho_hat) = {got:?}, want [50, 55, 115, 683]"),
    )
}

fn c1d() -> (bool, String) {
    let rows = comparison_table(1.1).unwrap();
    let ok = three_digits(rows[0].prior_rho_hat, 1.24e-4)
        && three_digits(rows[1].prior_rho_hat, 1.25e-5)
        && rows[0].factor == 70
        && rows[1].factor == 116;
    (
        ok,
        format!(
            "prior itp {:.4e} nitp {:.4e}, factors {} and {}",
            rows[0].prior_rho_hat, rows[1].prior_rho_hat, rows[0].factor, rows[1].factor
        ),
    )
}

fn c2() -> (bool, String) {
    let mut worst: Vec<(&str, f64)> = Vec::new();
    let mut track = |name: &'static str, r: f64| match worst.iter_mut().find(|(n, _)| *n == name) {
        Some(e) => e.1 = e.1.max(r.abs()),
        None => worst.push((name, r.abs())),
    };
    for d in [2, 3, 4] {
        // Past rho ~ 0.75 lambda_min underflows relative to 1 and TL = 1 - lambda
        // no longer carries enough digits to evaluate the residual.
        for rho in linear_grid(0.002, 0.5, 50) {
            track(
                "TU",
                rip_upper_residual(d, rho, rip_bound_upper(d, rho).unwrap()).unwrap(),
            );
            track(
                "TL",
                rip_lower_residual(d, rho, rip_bound_lower(d, rho).unwrap()).unwrap(),
            );
        }
        for rho in linear_grid(0.002, 0.49, 50) {
            let lam = 1.0 - rho;
            track(
                "TIU",
                tiu_residual(d, rho, lam, tail_bound_tiu(d, rho, lam).unwrap()).unwrap(),
            );
            track(
                "TIL",
                til_residual(d, rho, lam, tail_bound_til(d, rho, lam).unwrap()).unwrap(),
            );
            track(
                "TIF",
                tif_residual(d, rho, tail_bound_tif(d, rho).unwrap()).unwrap(),
            );
        }
    }
    let edge = prior_bound_domain_limit();
    for rho in linear_grid(1e-5, edge * 0.999, 50) {
        track(
            "TR",
            prior_bound_residual(rho, prior_bound_tr(rho).unwrap()),
        );
    }
    for d in [2, 4] {
        for v in [itp(), nitp()] {
            let r = threshold(d, v, Analysis::Rip).unwrap();
            track("rho_hat", threshold_rip_residual(d, v, r).unwrap());
            let s = threshold(d, v, Analysis::StablePoint).unwrap();
            track("rho_hat", threshold_stable_point_residual(d, v, s).unwrap());
        }
    }
    for v in [itp(), nitp()] {
        let p = threshold(2, v, Analysis::Prior).unwrap();
        let level = prior_recovery_level(v).unwrap();
        track("rho_hat", prior_bound_tr(3.0 * p).unwrap() - level);
    }
    let ok = worst.iter().all(|(_, r)| *r <= 1e-10);
    let detail = worst
        .iter()
        .map(|(n, r)| format!("{n} {r:.1e}"))
        .collect::<Vec<_>>()
        .join(", ");
    (ok, format!("max |residual|: {detail}"))
}

/// A random tree: each node hangs off a uniformly chosen earlier node that
/// still has room, then labels are shuffled.
fn random_topology<R: Rng>(rng: &mut R, n: usize, d: usize) -> TreeTopology {
    let mut parent = vec![None; n];
    let mut kids = vec![0usize; n];
    for (i, slot) in parent.iter_mut().enumerate().skip(1) {
        let open: Vec<usize> = (0..i).filter(|&j| kids[j] < d).collect();
        let p = *open.choose(rng).unwrap();
        kids[p] += 1;
        *slot = Some(p);
    }
    let mut label: Vec<usize> = (0..n).collect();
    label.shuffle(rng);
    let mut relabelled = vec![None; n];
    for i in 0..n {
        relabelled[label[i]] = parent[i].map(|p| label[p]);
    }
    TreeTopology::from_parents(d, relabelled).unwrap()
}

fn c3() -> (bool, String) {
    let mut rng = stream_rng(3, 0);
    let mut agree = 0;
    let mut ties = 0;
    let total = 2000;
    for trial in 0..total {
        let d = if trial % 2 == 0 { 2 } else { 3 };
        let n = rng.gen_range(1..=15);
        let t = random_topology(&mut rng, n, d);
        let k = rng.gen_range(1..=6.min(n));
        // Every fourth instance is built to tie: half from a tiny value set,
        // half mixing repeated integers with arbitrary values so that tied
        // sums can round differently.
        let x: Vec<f64> = if trial % 8 == 0 {
            (0..n)
                .map(|_| [0.0, 1.0, -1.0, 2.0][rng.gen_range(0..4)])
                .collect()
        } else if trial % 4 == 0 {
            (0..n)
                .map(|_| match rng.gen_range(0..3) {
                    0 => 3.0,
                    1 => -3.0,
                    _ => rng.gen_range(-8.0..8.0),
                })
                .collect()
        } else {
            (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect()
        };
        let dp = project(&t, &x, k).unwrap();
        let bf = project_bruteforce(&t, &x, k).unwrap();
        if dp.captured_energy.to_bits() == bf.captured_energy.to_bits() && dp.support == bf.support
        {
            agree += 1;
        }
        if trial % 4 == 0 {
            ties += 1;
        }
    }
    (
        agree == total,
        format!("{agree}/{total} instances agree on energy bits and support ({ties} tie-heavy)"),
    )
}

fn c4() -> (bool, String) {
    let mut ok = true;
    let mut checked = 0;
    for d in [2usize, 3, 4] {
        for k in 1..=6usize {
            // k complete levels hold every rooted shape of k nodes.
            let size = (d.pow(k as u32) - 1) / (d - 1);
            let t = build_complete_tree(size, d).unwrap();
            let count = enumerate_supports(&t, k).count() as u64;
            let want: u64 = tree_count(d, k).unwrap().try_into().unwrap();
            ok &= count == want;
            checked += 1;
        }
    }
    let per = ln_tree_count(2, 2000).unwrap() / 2000.0;
    let target = 2.0 * 2f64.ln();
    ok &= (per - target).abs() <= 0.01;
    (
        ok,
        format!(
            "{checked} (d, k) counts match; (1/k) ln T(2000) = {per:.5} vs 2 ln 2 = {target:.5}"
        ),
    )
}

fn instance(n: usize, n_signal: usize, k: usize, sigma: f64, seed: u64) -> ProblemInstance {
    ProblemInstance::generate(&InstanceSpec {
        n,
        topology: build_complete_tree(n_signal, 2).unwrap(),
        k,
        sigma,
        law: CoeffLaw::UnitGaussian,
        seed,
    })
    .unwrap()
}

struct Converged {
    count: usize,
    worst_gradient: f64,
    worst_pinv: f64,
}

impl Converged {
    fn new() -> Self {
        Self {
            count: 0,
            worst_gradient: 0.0,
            worst_pinv: 0.0,
        }
    }

    fn add(&mut self, inst: &ProblemInstance, rep: &SolverReport) {
        if rep.termination == Termination::MaxIters {
            return;
        }
        self.count += 1;
        let scale = inst.b.norm().max(f64::MIN_POSITIVE);
        let g = rep.stable_point_check.gradient_on_support_norm / scale;
        self.worst_gradient = self.worst_gradient.max(g);
        let p = rep
            .stable_point_check
            .pinv_deviation
            .unwrap_or(f64::INFINITY);
        self.worst_pinv = self.worst_pinv.max(p);
    }

    fn ok(&self) -> bool {
        self.count > 0 && self.worst_gradient <= 1e-8 && self.worst_pinv <= 1e-8
    }
}

fn c5(converged: &mut Converged) -> Vec<Verdict> {
    let mut out = Vec::new();
    out.push(check("5a", "NITP stepsize branch contracts", || {
        let mut rng = stream_rng(5, 0);
        let mut steps = 0;
        let mut bad = 0;
        let mut shrunk = 0;
        for run in 0..100 {
            let k = rng.gen_range(2..=6);
            let sigma = if run % 2 == 0 { 0.0 } else { 0.05 };
            let inst = instance(rng.gen_range(40..=120), 255, k, sigma, 500 + run);
            let rep = solve(&inst, &SolverConfig::nitp(k, 0.05, 1.1)).unwrap();
            for s in &rep.nitp_trace {
                steps += 1;
                let good = if s.support_changed {
                    shrunk += usize::from(s.shrinks > 0);
                    s.alpha < s.exit_ratio.unwrap()
                } else {
                    s.alpha == s.linesearch_alpha && s.shrinks == 0
                };
                bad += usize::from(!good);
            }
            converged.add(&inst, &rep);
        }
        (
            bad == 0 && steps > 0,
            format!("{steps} iterations over 100 runs, {bad} violations, {shrunk} with shrinkage"),
        )
    }));
    out.push(check(
        "5b",
        "ITP objective is non-increasing below the empirical cap",
        || {
            let (n, n_signal, k) = (40, 63, 3);
            let mut worst_rise = f64::NEG_INFINITY;
            let mut runs = 0;
            for run in 0..100u64 {
                let inst = instance(n, n_signal, k, 0.05, 900 + run);
                // 2k = 6 admits 132 supports here; 10^4 draws see them all.
                let est =
                    estimate_tree_rip(&inst.matrix_a, &inst.topology, 2 * k, 10_000, run).unwrap();
                let alpha = 0.99 / (1.0 + est.upper_hat);
                let rep = solve(&inst, &SolverConfig::itp(k, alpha)).unwrap();
                for w in rep.objective_trace.windows(2) {
                    worst_rise = worst_rise.max(w[1] - w[0]);
                }
                converged.add(&inst, &rep);
                runs += 1;
            }
            (
                worst_rise <= 1e-12,
                format!("{runs} runs, largest one-step increase of Psi {worst_rise:.2e}"),
            )
        },
    ));
    out
}

fn c6(converged: &mut Converged) -> (bool, String) {
    let rho = 0.01;
    let n = 500;
    let k = 5;
    let mut detail = Vec::new();
    let mut ok = true;
    // c = 0.1 with kappa = 1.1 breaks kappa (1 - c) > 1, so NITP runs at
    // c = 0.05.
    let rejected = SolverConfig::nitp(k, 0.1, 1.1).validate().is_err();
    ok &= rejected;
    let itp_alpha = tree_itp::theory::optimal_alpha(2, rho).unwrap();
    let algs = [
        (
            Algorithm::Itp { alpha: None },
            Variant::Itp {
                alpha: Stepsize::Fixed(itp_alpha),
            },
        ),
        (
            Algorithm::Nitp {
                c: 0.05,
                kappa: 1.1,
            },
            nitp(),
        ),
    ];
    for (alg, theory_variant) in algs {
        let mut spec = ExperimentSpec::new(2, n, vec![rho], alg);
        spec.trials = 100;
        spec.seed = 6;
        let outcomes = run_trials(&spec).unwrap();
        let rate = outcomes.iter().filter(|o| o.rel_error <= 1e-6).count() as f64 / 100.0;
        ok &= rate >= 0.95;

        spec.sigma = 0.1;
        let noisy = run_trials(&spec).unwrap();
        let xi = stability_factor_sp(2, rho, theory_variant).unwrap().xi;
        let within = noisy.iter().filter(|o| o.abs_error <= xi * 0.1).count() as f64 / 100.0;
        ok &= within >= 0.95;
        detail.push(format!(
            "{}: exact {rate:.2}, noisy within xi_SP sigma = {:.3}: {within:.2}",
            alg.name(),
            xi * 0.1
        ));
    }
    // Converged points of the same runs, re-solved for their reports.
    for seed in 0..20 {
        let inst = instance(n, 127, k, 0.1, 7000 + seed);
        converged.add(
            &inst,
            &solve(&inst, &SolverConfig::itp_optimal(k, n, 2).unwrap()).unwrap(),
        );
        converged.add(
            &inst,
            &solve(&inst, &SolverConfig::nitp(k, 0.05, 1.1)).unwrap(),
        );
    }
    detail.push(format!("c = 0.1 rejected as infeasible: {rejected}"));
    (ok, detail.join("; "))
}

fn c7() -> (bool, String) {
    let n = 400;
    let t = build_complete_tree(4095, 2).unwrap();
    let mut ok = true;
    let mut parts = Vec::new();
    for rho in [0.005, 0.01] {
        let s = (rho * n as f64).round() as usize;
        let tu = rip_bound_upper(2, rho).unwrap();
        let tl = rip_bound_lower(2, rho).unwrap();
        let mut up: f64 = 0.0;
        let mut lo: f64 = 0.0;
        for m in 0..20u64 {
            let a = sample_gaussian_matrix(n, 4095, derive_seed(70, m)).unwrap();
            let est = estimate_tree_rip(&a, &t, s, 10_000, derive_seed(71, m)).unwrap();
            up = up.max(est.upper_hat);
            lo = lo.max(est.lower_hat);
        }
        ok &= up <= tu + 0.1 && lo <= tl + 0.1;
        parts.push(format!(
            "rho={rho}: upper {up:.3} vs TU+0.1 = {:.3}, lower {lo:.3} vs TL+0.1 = {:.3}",
            tu + 0.1,
            tl + 0.1
        ));
    }
    (ok, parts.join("; "))
}

fn c8() -> (bool, String) {
    let mut ok = true;
    let mut parts = Vec::new();
    let scales = [0.9, 0.99, 0.999];
    for v in [itp(), nitp()] {
        let r = threshold(2, v, Analysis::Rip).unwrap();
        let vals: Vec<f64> = scales
            .iter()
            .map(|s| rip_factors(2, r * s, v).unwrap().noise_amplification())
            .collect();
        ok &= vals.windows(2).all(|w| w[1] > w[0]) && vals[2] > 100.0;
        parts.push(format!("rip {} {vals:.3?}", v.name()));
    }
    for (v, sp_v) in [
        (
            itp(),
            Variant::Itp {
                alpha: Stepsize::ConvergenceCap,
            },
        ),
        (nitp(), nitp()),
    ] {
        let r = threshold(2, v, Analysis::StablePoint).unwrap();
        let vals: Vec<f64> = scales
            .iter()
            .map(|s| stability_factor_sp(2, r * s, sp_v).unwrap().xi)
            .collect();
        ok &= vals.windows(2).all(|w| w[1] > w[0]) && vals[2] > 100.0;
        parts.push(format!("sp {} {vals:.3?}", v.name()));
    }
    (ok, parts.join("; "))
}

fn cli(args: &[&str]) -> Vec<u8> {
    let out = Command::new(env!("CARGO_BIN_EXE_tree-itp"))
        .args(args)
        .output()
        .expect("binary runs");
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out.stdout
}

fn c9() -> (bool, String) {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name).to_string_lossy().into_owned();
    let inst = p("inst.json");
    std::fs::write(
        &inst,
        cli(&[
            "generate",
            "--n",
            "60",
            "--n-signal",
            "127",
            "--k",
            "4",
            "--sigma",
            "0.05",
            "--seed",
            "3",
        ]),
    )
    .unwrap();
    std::fs::write(
        p("topo.json"),
        r#"{"n":7,"d":2,"parent":[null,0,0,1,1,2,2]}"#,
    )
    .unwrap();
    std::fs::write(p("x.txt"), "1\n0.1\n5\n0\n0\n9\n0\n").unwrap();
    let commands: Vec<Vec<String>> = [
        vec!["thresholds", "--seed", "1"],
        vec!["thresholds", "--compare", "--format", "json"],
        vec!["bounds", "--points", "40", "--seed", "1"],
        vec!["bounds", "--d", "4", "--format", "json"],
        vec![
            "generate",
            "--n",
            "30",
            "--n-signal",
            "63",
            "--k",
            "3",
            "--seed",
            "9",
        ],
        vec!["recover", "--instance", &inst, "--seed", "2"],
        vec![
            "recover",
            "--instance",
            &inst,
            "--variant",
            "nitp",
            "--format",
            "csv",
        ],
        vec![
            "phase",
            "--trials",
            "5",
            "--rho",
            "0.01,0.05",
            "--seed",
            "4",
        ],
        vec![
            "phase",
            "--trials",
            "3",
            "--variant",
            "nitp",
            "--sigma",
            "0.1",
            "--format",
            "json",
        ],
        vec![
            "project",
            "--topology",
            &p("topo.json"),
            "--vector",
            &p("x.txt"),
            "--k",
            "3",
        ],
        vec![
            "rip-estimate",
            "--n",
            "50",
            "--n-signal",
            "255",
            "--s",
            "4",
            "--samples",
            "2000",
            "--matrices",
            "2",
            "--seed",
            "5",
        ],
    ]
    .iter()
    .map(|c| c.iter().map(|s| s.to_string()).collect())
    .collect();
    let mut same = 0;
    for c in &commands {
        let args: Vec<&str> = c.iter().map(String::as_str).collect();
        if cli(&args) == cli(&args) {
            same += 1;
        }
    }
    // --out writes the same bytes as stdout.
    let via_file = p("t.csv");
    cli(&["thresholds", "--out", &via_file]);
    let file_same = std::fs::read(Path::new(&via_file)).unwrap() == cli(&["thresholds"]);
    (
        same == commands.len() && file_same,
        format!(
            "{same}/{} commands byte-identical across two runs; --out matches stdout: {file_same}",
            commands.len()
        ),
    )
}

fn main() {
    let mut verdicts = vec![
        check("1a", "tree-RIP thresholds", c1a),
        check("1b", "stable-point thresholds", c1b),
        check("1c", "oversampling reciprocals", c1c),
        check("1d", "prior-analysis thresholds and factors", c1d),
        check("2", "defining-equation residuals", c2),
        check("3", "projection matches the exhaustive oracle", c3),
        check("4", "tree counting", c4),
    ];
    let mut converged = Converged::new();
    verdicts.extend(c5(&mut converged));
    verdicts.push(check("6", "desk-scale recovery", || c6(&mut converged)));
    verdicts.push(check("5c", "converged points are stable points", || {
        (
            converged.ok(),
            format!(
                "{} converged runs, max gradient/||b|| {:.2e}, max pseudoinverse deviation {:.2e}",
                converged.count, converged.worst_gradient, converged.worst_pinv
            ),
        )
    }));
    verdicts.push(check(
        "7",
        "empirical RIP stays below the asymptotic bounds",
        c7,
    ));
    verdicts.push(check(
        "8",
        "stability factors diverge at the thresholds",
        c8,
    ));
    verdicts.push(check("9", "CLI determinism", c9));

    let mut unexpected = 0;
    for v in &verdicts {
        let known = KNOWN_RED.iter().find(|(id, _)| *id == v.id);
        let tag = if v.pass { "PASS" } else { "FAIL" };
        println!(
            "{tag} [{:>2}] {} ({:.2}s): {}",
            v.id,
            v.title,
            v.elapsed.as_secs_f64(),
            v.detail
        );
        match (v.pass, known) {
            (false, Some((_, why))) => println!("       known red: {why}"),
            (false, None) => unexpected += 1,
            (true, Some(_)) => println!("       listed as known red but now passes"),
            (true, None) => {}
        }
    }
    let passed = verdicts.iter().filter(|v| v.pass).count();
    println!("{passed}/{} criteria pass", verdicts.len());
    if unexpected > 0 {
        eprintln!("{unexpected} criteria failed unexpectedly");
        std::process::exit(1);
    }
}
