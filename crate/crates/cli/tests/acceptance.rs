//! Acceptance criteria. Each test prints one `criterion N PASS|FAIL: ...`
//! line and then asserts the outcome.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use ndarray::Array2;
use privleak_core::data::{generate_synthetic, Dataset, SyntheticSpec, Task};
use privleak_core::experiments::{
    run_experiment, sweep_lambda_epsilon, ExperimentPlan, PrivacyModel, SweepResult, DEFAULT_EPSILONS,
    DEFAULT_LAMBDAS,
};
use privleak_core::mechanisms::{
    dp_empirical_check, laplace_mechanism, ldp_perturb_normalized, nearest_exhaustive, MdpSwapper, PivotIndex,
    PrivacyParams, Vocabulary,
};
use privleak_core::metrics::{anova_two_way, f_quantile, f_survival};
use privleak_core::neural::{
    joint_gradients, train_cgt, train_joint, train_plain, HeadSpec, JointData, JointMode, Mlp, MlpGrads, Network,
    TrainConfig,
};
use privleak_core::{distance, Metric, RandomSource};

fn verdict(criterion: u32, pass: bool, detail: &str) {
    println!("criterion {criterion} {}: {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {criterion} failed: {detail}");
}

#[test]
fn criterion_01_f_distribution_anchors() {
    let start = Instant::now();
    let cases = [
        (f_quantile(2.0, 14.0, 0.05).unwrap(), 3.739, 0.002, "F(2,14) crit"),
        (f_quantile(7.0, 14.0, 0.05).unwrap(), 2.764, 0.002, "F(7,14) crit"),
        (f_quantile(2.0, 82.0, 0.05).unwrap(), 3.108, 0.002, "F(2,82) crit"),
        (f_quantile(41.0, 82.0, 0.05).unwrap(), 1.537, 0.002, "F(41,82) crit"),
        (f_survival(2.0, 14.0, 9.318).unwrap(), 0.003, 0.001, "P(F(2,14) > 9.318)"),
    ];
    let elapsed = start.elapsed().as_secs_f64();
    let mut ok = elapsed < 1.0;
    let mut detail = Vec::new();
    for (got, want, tol, name) in cases {
        ok &= (got - want).abs() <= tol;
        detail.push(format!("{name} = {got:.4} (want {want} ± {tol})"));
    }
    detail.push(format!("{elapsed:.3} s"));
    verdict(1, ok, &detail.join(", "));
}

#[test]
fn criterion_02_ldp_deviation_anchor() {
    let start = Instant::now();
    let params = PrivacyParams::new(0.1).unwrap();
    let mut rng = RandomSource::new(2);
    let (n, m) = (10_000, 768);
    let (mut euc, mut cos) = (0.0, 0.0);
    for _ in 0..n {
        let v: Vec<f64> = (0..m).map(|_| rng.standard_normal()).collect();
        let (normalized, noisy) = ldp_perturb_normalized(&v, &params, &mut rng).unwrap();
        euc += distance(&normalized, &noisy, Metric::Euclidean).unwrap();
        cos += distance(&normalized, &noisy, Metric::CosineDistance).unwrap();
    }
    let (euc, cos) = (euc / n as f64, cos / n as f64);
    let elapsed = start.elapsed().as_secs_f64();
    verdict(
        2,
        (376.0..=404.0).contains(&euc) && cos >= 0.95 && elapsed < 30.0,
        &format!("mean Euclidean {euc:.3} (want [376, 404]), mean cosine distance {cos:.4} (want >= 0.95), {elapsed:.1} s"),
    );
}

#[test]
fn criterion_03_dp_bound() {
    let mut ok = true;
    let mut detail = Vec::new();
    for (eps, seed) in [(0.1, 31), (1.0, 32)] {
        let mech = laplace_mechanism(PrivacyParams::new(eps).unwrap());
        let check = dp_empirical_check(mech, eps, 1_000_000, 20, &mut RandomSource::new(seed)).unwrap();
        let within = check.within(eps, 3.0);
        ok &= within;
        detail.push(format!("ε={eps}: max |ln ratio| {:.4}, within ε + 3 se: {within}", check.max_log_ratio));
    }
    let identity = dp_empirical_check(|x, _| x, 1.0, 1_000_000, 20, &mut RandomSource::new(33)).unwrap();
    let rejected = !identity.within(1.0, 3.0);
    ok &= rejected;
    detail.push(format!("no-noise mechanism rejected: {rejected}"));
    verdict(3, ok, &detail.join(", "));
}

fn relu_margin(net: &Network, x: &Array2<f64>) -> f64 {
    fn walk(mlp: &Mlp, x: Array2<f64>, margin: &mut f64) -> Array2<f64> {
        let mut h = x;
        for (k, l) in mlp.layers.iter().enumerate() {
            let z = h.dot(&l.weights) + &l.bias;
            if k + 1 < mlp.layers.len() || mlp.relu_output {
                *margin = z.iter().fold(*margin, |m, v| m.min(v.abs()));
                h = z.mapv(|v| v.max(0.0));
            } else {
                h = z;
            }
        }
        h
    }
    let mut margin = f64::INFINITY;
    let rep = walk(&net.trunk, x.clone(), &mut margin);
    for head in net.heads.values() {
        walk(head, rep.clone(), &mut margin);
    }
    margin
}

/// Largest relative error between `analytic` and central differences of
/// `loss` over every parameter of the selected MLP.
fn fd_error(net: &Network, pick: impl Fn(&mut Network) -> &mut Mlp, analytic: &MlpGrads, loss: impl Fn(&Network) -> f64) -> f64 {
    const H: f64 = 1e-5;
    let expected: Vec<f64> = analytic.flat().collect();
    let mut probe = net.clone();
    let mut worst: f64 = 0.0;
    for (k, &want) in expected.iter().enumerate() {
        let orig = *pick(&mut probe).params_mut().nth(k).unwrap();
        *pick(&mut probe).params_mut().nth(k).unwrap() = orig + H;
        let up = loss(&probe);
        *pick(&mut probe).params_mut().nth(k).unwrap() = orig - H;
        let down = loss(&probe);
        *pick(&mut probe).params_mut().nth(k).unwrap() = orig;
        let numeric = (up - down) / (2.0 * H);
        worst = worst.max((want - numeric).abs() / (want.abs() + numeric.abs()).max(1e-7));
    }
    worst
}

#[test]
fn criterion_04_gradient_oracle() {
    let mut rng = RandomSource::new(4);
    let mut worst: f64 = 0.0;
    let mut params = 0;
    for config in 0..10 {
        let input = 2 + rng.below(6);
        let trunk: Vec<usize> = (0..1 + rng.below(2)).map(|_| 2 + rng.below(5)).collect();
        let heads = [
            HeadSpec {
                name: "base".into(),
                classes: 2 + rng.below(4),
                hidden: vec![2 + rng.below(4)],
            },
            HeadSpec {
                name: "adv".into(),
                classes: 2 + rng.below(3),
                hidden: vec![2 + rng.below(4)],
            },
        ];
        let net = Network::new(input, &trunk, &heads, &mut rng.derive_indexed("net", config)).unwrap();
        let rows = 4 + rng.below(8);
        let x = loop {
            let x = Array2::from_shape_fn((rows, input), |_| rng.uniform(-1.5, 1.5));
            if relu_margin(&net, &x) > 1e-3 {
                break x;
            }
        };
        let y: Vec<usize> = (0..rows).map(|_| rng.below(heads[0].classes)).collect();
        let z: Vec<usize> = (0..rows).map(|_| rng.below(heads[1].classes)).collect();
        let (mode, lambda) = if config % 2 == 0 {
            (JointMode::GradientReversal, rng.uniform(0.0, 3.0))
        } else {
            (JointMode::Baseline, 1.0)
        };
        let g = joint_gradients(&net, x.view(), "base", &y, "adv", &z, mode, lambda).unwrap();
        let gr = if mode == JointMode::GradientReversal { lambda } else { 0.0 };
        let trunk_loss = |n: &Network| n.loss(x.view(), &y, "base").unwrap() - gr * n.loss(x.view(), &z, "adv").unwrap();
        worst = worst.max(fd_error(&net, |n| &mut n.trunk, &g.trunk, trunk_loss));
        worst = worst.max(fd_error(&net, |n| n.heads.get_mut("base").unwrap(), &g.base_head, |n| {
            n.loss(x.view(), &y, "base").unwrap()
        }));
        worst = worst.max(fd_error(&net, |n| n.heads.get_mut("adv").unwrap(), &g.adversary_head, |n| {
            n.loss(x.view(), &z, "adv").unwrap()
        }));
        params += g.trunk.flat().count() + g.base_head.flat().count() + g.adversary_head.flat().count();
    }
    verdict(
        4,
        worst < 1e-4,
        &format!("10 configurations, {params} parameters, worst relative error {worst:.2e} (want < 1e-4)"),
    );
}

fn toy_problem(n: usize) -> (Array2<f64>, Vec<usize>, Vec<usize>) {
    let mut rng = RandomSource::new(5);
    let x = Array2::from_shape_fn((n, 6), |_| rng.standard_normal());
    let y = x.rows().into_iter().map(|r| usize::from(r[0] + r[1] > 0.0)).collect();
    let z = x.rows().into_iter().map(|r| usize::from(r[2] > 0.0)).collect();
    (x, y, z)
}

#[test]
fn criterion_05_reduction_identities() {
    let (x, y, z) = toy_problem(300);
    let data = JointData {
        x: x.view(),
        base_head: "base",
        base_labels: &y,
        adversary_head: "adv",
        private_labels: &z,
    };
    let fresh = || Network::standard(6, &[("base", 2), ("adv", 2)], &mut RandomSource::new(50)).unwrap();
    let single = |head: &str, seed| Network::standard(6, &[(head, 2)], &mut RandomSource::new(seed)).unwrap();
    let mut gr_ok = true;
    let mut cgt_ok = true;
    for epochs in 1..=4 {
        let cfg = TrainConfig {
            epochs,
            lambda: 0.0,
            ..TrainConfig::default()
        };
        let (mut base, mut gr) = (fresh(), fresh());
        train_joint(&mut base, data, &cfg, JointMode::Baseline).unwrap();
        train_joint(&mut gr, data, &cfg, JointMode::GradientReversal).unwrap();
        gr_ok &= base == gr;

        let cfg = TrainConfig { alpha: 0.0, ..cfg };
        let (mut plain_b, mut plain_p) = (single("base", 51), single("adv", 52));
        train_plain(&mut plain_b, x.view(), &y, "base", &cfg).unwrap();
        train_plain(&mut plain_p, x.view(), &z, "adv", &cfg).unwrap();
        let (mut b, mut p) = (single("base", 51), single("adv", 52));
        train_cgt(&mut b, &mut p, data, &cfg).unwrap();
        cgt_ok &= b == plain_b && p == plain_p;
    }
    verdict(
        5,
        gr_ok && cgt_ok,
        &format!("GR(λ=0) == baseline after epochs 1..4: {gr_ok}; CGT(α=0) == plain training: {cgt_ok}"),
    );
}

fn lattice_vocab(dim: usize, n: usize) -> Vocabulary {
    Vocabulary::new(
        (0..n)
            .map(|i| {
                let mut rest = i;
                let v = (0..dim)
                    .map(|_| {
                        let c = (rest % 4) as f64;
                        rest /= 4;
                        c
                    })
                    .collect();
                (format!("w{i}"), v)
            })
            .collect(),
    )
    .unwrap()
}

fn self_swap_rate(vocab: &Vocabulary, epsilon: f64, trials: usize, seed: u64) -> f64 {
    let swapper = MdpSwapper::new(vocab, epsilon).unwrap();
    let mut rng = RandomSource::new(seed);
    let hits = (0..trials)
        .filter(|t| {
            let i = t % vocab.len();
            swapper.swap_index(vocab.word(i), &mut rng).unwrap() == Some(i)
        })
        .count();
    hits as f64 / trials as f64
}

#[test]
fn criterion_06_mdp_behavior() {
    let vocab = lattice_vocab(4, 200);
    let high = self_swap_rate(&vocab, 1000.0, 10_000, 61);
    let at2 = self_swap_rate(&vocab, 2.0, 10_000, 62);
    let at20 = self_swap_rate(&vocab, 20.0, 10_000, 62);

    let mut rng = RandomSource::new(63);
    let random = Vocabulary::new(
        (0..2000)
            .map(|i| (format!("v{i}"), (0..32).map(|_| rng.standard_normal()).collect()))
            .collect(),
    )
    .unwrap();
    let index = PivotIndex::new(&random).unwrap();
    let agree = (0..1000)
        .filter(|_| {
            let q: Vec<f64> = (0..32).map(|_| 1.5 * rng.standard_normal()).collect();
            index.nearest(&q).unwrap() == nearest_exhaustive(&q, &random).unwrap()
        })
        .count();
    verdict(
        6,
        high >= 0.99 && at2 <= at20 && agree == 1000,
        &format!(
            "self-swap rate ε=1000: {high:.4} (want >= 0.99); ε=2: {at2:.4} <= ε=20: {at20:.4}; index agrees on {agree}/1000 queries"
        ),
    );
}

fn synthetic(records: usize) -> Dataset {
    let data = generate_synthetic(&SyntheticSpec {
        records,
        ..SyntheticSpec::default()
    })
    .unwrap();
    Dataset::new(data.records).unwrap()
}

fn gender_plan(model: PrivacyModel, seeds: usize) -> ExperimentPlan {
    let mut plan = ExperimentPlan::new(model).with_seeds(privleak_core::rng::DEFAULT_SEED, seeds);
    plan.attributes = vec![Task::Gender];
    plan
}

#[test]
fn criterion_07_end_to_end_privacy_effect() {
    let start = Instant::now();
    let data = synthetic(10_000);
    let baseline = run_experiment(&gender_plan(PrivacyModel::Baseline, 5), &data, None).unwrap();
    let cape = run_experiment(&gender_plan(PrivacyModel::Cape, 5).with_epsilon(0.1).with_lambda(1.0), &data, None).unwrap();
    let base_f1 = baseline.attacker("gender").unwrap().fresh.macro_f1;
    let g = cape.attacker("gender").unwrap();
    let f1 = g.fresh.macro_f1;
    let drop = (base_f1 - f1) / base_f1;
    let elapsed = start.elapsed().as_secs_f64();
    let pass = base_f1 >= 0.9 && drop >= 0.4 && f1 <= g.majority_f1 + 0.05 && elapsed < 600.0;
    verdict(
        7,
        pass,
        &format!(
            "baseline attacker F1 {base_f1:.3} (want >= 0.9); CAPE(ε=0.1, λ=1) attacker F1 {f1:.3}, relative drop {:.1}% (want >= 40%), majority F1 {:.3} (want F1 <= majority + 0.05); co-trained F1 {:.3}; base F1 {:.3}; {elapsed:.0} s",
            100.0 * drop,
            g.majority_f1,
            g.co_trained.map_or(f64::NAN, |s| s.macro_f1),
            cape.base.macro_f1
        ),
    );
}

/// Spearman rank correlation with average ranks for ties.
fn spearman(a: &[f64], b: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            for &k in &idx[i..=j] {
                r[k] = (i + j) as f64 / 2.0 + 1.0;
            }
            i = j + 1;
        }
        r
    }
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

fn row_values(s: &SweepResult, i: usize, metric: impl Fn(&privleak_core::experiments::CellScores) -> f64) -> Vec<f64> {
    (0..s.cols.len())
        .map(|j| s.cell(i, j).scores.as_ref().map_or(f64::NAN, &metric))
        .collect()
}

#[test]
fn criterion_08_sweep_shape() {
    let start = Instant::now();
    let data = synthetic(4_000);
    let cape = sweep_lambda_epsilon(
        &gender_plan(PrivacyModel::Cape, 1),
        &DEFAULT_LAMBDAS,
        &DEFAULT_EPSILONS,
        &data,
        None,
        1,
    )
    .unwrap();
    let mut detail = vec![format!("{} cells, {} failed", cape.cells.len(), cape.failures())];
    for c in cape.cells.iter().filter(|c| c.error.is_some()) {
        detail.push(format!("failed cell λ={} ε={}: {}", c.row, c.col, c.error.as_deref().unwrap_or("")));
    }
    let mut trend_ok = true;
    let mut flat_ok = cape.failures() == 0;
    for (i, &lambda) in cape.rows.iter().enumerate() {
        let base = row_values(&cape, i, |c| c.base_f1);
        let attacker = row_values(&cape, i, |c| c.attacker_f1);
        let co = row_values(&cape, i, |c| c.co_trained_f1.unwrap_or(f64::NAN));
        let rho = spearman(&cape.cols, &base);
        let range = attacker.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            - attacker.iter().copied().fold(f64::INFINITY, f64::min);
        if lambda <= 1.0 {
            trend_ok &= base.iter().all(|v| v.is_finite()) && rho > 0.6;
        }
        flat_ok &= range <= 0.1;
        let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(" ");
        detail.push(format!(
            "λ={lambda}: base F1 Spearman {rho:.3}, attacker F1 range {range:.3} [{}], co-trained [{}]",
            fmt(&attacker),
            fmt(&co)
        ));
    }

    let ldp_at = |eps: f64| {
        run_experiment(&gender_plan(PrivacyModel::Ldp, 1).with_epsilon(eps), &data, None)
            .unwrap()
            .attacker("gender")
            .unwrap()
            .fresh
            .macro_f1
    };
    let (low, high) = (ldp_at(0.1), ldp_at(100.0));
    let ldp_ok = high > low;
    detail.push(format!("LDP attacker F1 ε=100 {high:.3} vs ε=0.1 {low:.3}"));
    detail.insert(
        0,
        format!(
            "base F1 Spearman > 0.6 at λ <= 1: {trend_ok}; CAPE attacker F1 range <= 0.1 at every λ: {flat_ok}; LDP ε=100 > ε=0.1: {ldp_ok}; {:.0} s",
            start.elapsed().as_secs_f64()
        ),
    );
    verdict(8, trend_ok && flat_ok && ldp_ok, &detail.join("\n    "));
}

/// Textbook computational formulas: sums of squares from raw totals.
fn textbook_anova(grid: &[Vec<f64>]) -> [f64; 6] {
    let (r, c) = (grid.len() as f64, grid[0].len() as f64);
    let n = r * c;
    let total: f64 = grid.iter().flatten().sum();
    let correction = total * total / n;
    let ss_total = grid.iter().flatten().map(|x| x * x).sum::<f64>() - correction;
    let ss_row = grid.iter().map(|row| row.iter().sum::<f64>().powi(2)).sum::<f64>() / c - correction;
    let ss_col = (0..grid[0].len())
        .map(|j| grid.iter().map(|row| row[j]).sum::<f64>().powi(2))
        .sum::<f64>()
        / r
        - correction;
    let ss_error = ss_total - ss_row - ss_col;
    let ms_error = ss_error / ((r - 1.0) * (c - 1.0));
    [ss_row, ss_col, ss_error, ss_total, ss_row / (r - 1.0) / ms_error, ss_col / (c - 1.0) / ms_error]
}

#[test]
fn criterion_09_anova_oracle() {
    let mut rng = RandomSource::new(9);
    let mut worst: f64 = 0.0;
    let mut df_ok = true;
    for _ in 0..10_000 {
        let (r, c) = (2 + rng.below(9), 2 + rng.below(5));
        let grid: Vec<Vec<f64>> = (0..r).map(|_| (0..c).map(|_| rng.uniform(0.0, 1.0)).collect()).collect();
        let a = anova_two_way(&grid).unwrap();
        let want = textbook_anova(&grid);
        let got = [a.ss_row, a.ss_col, a.ss_error, a.ss_total, a.f_row, a.f_col];
        for (g, w) in got.iter().zip(want) {
            worst = worst.max((g - w).abs() / w.abs().max(1.0));
        }
        df_ok &= (a.df_row, a.df_col, a.df_error, a.df_total) == (r - 1, c - 1, (r - 1) * (c - 1), r * c - 1);
    }
    let grid: Vec<Vec<f64>> = (0..8).map(|i| (0..3).map(|j| (i * 3 + j) as f64 % 5.0).collect()).collect();
    let a = anova_two_way(&grid).unwrap();
    let table = (a.df_row, a.df_col, a.df_total);
    verdict(
        9,
        worst < 1e-9 && df_ok && table == (7, 2, 23),
        &format!("10000 grids, worst scaled deviation {worst:.2e} (want < 1e-9), df consistent: {df_ok}; 8x3 df {table:?} (want (7, 2, 23))"),
    );
}

fn privleak(dir: &Path, args: &[&str]) {
    let out = Command::new(env!("CARGO_BIN_EXE_privleak"))
        .arg("--out-dir")
        .arg(dir)
        .args(["--seed", "10"])
        .args(args)
        .output()
        .unwrap();
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn criterion_10_cli_determinism() {
    let t = tempfile::tempdir().unwrap();
    let runs = [t.path().join("a"), t.path().join("b")];
    for dir in &runs {
        let data = dir.join("data.jsonl");
        let vocab = dir.join("vocab.txt");
        let (d, v) = (data.to_str().unwrap(), vocab.to_str().unwrap());
        let sub = |name: &str| dir.join(name);
        privleak(dir, &["gen-data", "--n", "300", "--dim", "16"]);
        privleak(&sub("ldp"), &["privatize", "--data", d, "--mechanism", "ldp", "--epsilon", "0.1"]);
        privleak(&sub("mdp"), &["privatize", "--data", d, "--vocab", v, "--mechanism", "mdp", "--epsilon", "20"]);
        privleak(
            &sub("run"),
            &["run", "--data", d, "--vocab", v, "--model", "baseline,gr,cgt,ldp,mdp,cape", "--epochs", "3", "--attacker-width", "16"],
        );
        privleak(
            &sub("sweep"),
            &["sweep", "--grid", "lambda-epsilon", "--data", d, "--lambdas", "0.5,1", "--epsilons", "0.1,100", "--epochs", "3", "--workers", "2"],
        );
        privleak(
            &sub("topology"),
            &["sweep", "--grid", "topology", "--data", d, "--depths", "1,3", "--widths", "16,32", "--epochs", "3"],
        );
        privleak(&sub("deviation"), &["deviation", "--data", d, "--vocab", v]);
        let results = sub("run").join("results.csv");
        privleak(&sub("report"), &["report", "--results", results.to_str().unwrap()]);
    }
    let files = [
        "data.jsonl",
        "vocab.txt",
        "ldp/privatized.jsonl",
        "mdp/privatized.jsonl",
        "run/results.csv",
        "run/report.md",
        "sweep/sweep_lambda_epsilon.csv",
        "topology/sweep_topology.csv",
        "deviation/deviation.csv",
        "deviation/projection.csv",
        "report/report.md",
    ];
    let differing: Vec<&str> = files
        .iter()
        .copied()
        .filter(|f| std::fs::read(runs[0].join(f)).unwrap() != std::fs::read(runs[1].join(f)).unwrap())
        .collect();
    verdict(
        10,
        differing.is_empty(),
        &format!("{} outputs compared across repeated invocations, differing: {differing:?}", files.len()),
    );
}
