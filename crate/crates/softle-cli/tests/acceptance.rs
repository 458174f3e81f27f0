//! Acceptance suite: exact unit properties plus directional replications
//! on the synthetic benchmark (defaults, 5 fixed seeds). One printed line
//! per criterion; the test fails if any criterion fails.

use std::fmt::Write as _;
use std::process::Command;

use rand::Rng;

use softle_core::baselines::{train_poe, train_reweighted, train_standard};
use softle_core::config::{OptimizerKind, ScheduleMode};
use softle_core::data::{Dataset, LabelKind, LabelVector, Sample, SplitTag};
use softle_core::datagen::{generate, BiasedDatasetSpec};
use softle_core::eval;
use softle_core::labeling::{encode_labels, shortcut_degree};
use softle_core::model::{backward, cross_entropy, forward};
use softle_core::pipeline::{loss_schedule, train_student, train_teacher, EvalSets, LossKind};
use softle_core::rng::{substream, Stream};
use softle_core::{Arch, ClassifierParams, RunConfig};

const SEEDS: [u64; 5] = [1, 2, 3, 4, 5];

struct Outcome {
    name: &'static str,
    pass: bool,
    detail: String,
}

fn check(name: &'static str, pass: bool, detail: String) -> Outcome {
    Outcome { name, pass, detail }
}

// ---------------------------------------------------------- criterion 1

fn criterion_1() -> Outcome {
    let cfg = RunConfig::default();
    let worked = shortcut_degree(0.99, &cfg);
    let mut ok = (worked - 0.444).abs() < 5e-4;
    let mut prev = 0.0;
    for i in 1..=1000 {
        let sigma = cfg.xi + (1.0 - cfg.xi) * i as f64 / 1000.0;
        let s = shortcut_degree(sigma, &cfg);
        ok &= s > 0.0 && s < 1.0 && s > prev;
        prev = s;
    }
    check("shortcut-degree exactness", ok, format!("s(0.99)={worked:.6}, sweep max={prev:.6}"))
}

// ---------------------------------------------------------- criterion 2

fn criterion_2() -> Outcome {
    let cfg = RunConfig::default();
    let mut rng = substream(0, Stream::MonteCarlo);
    let mut ok = true;
    let mut soft_count = 0usize;
    for _ in 0..10_000 {
        let k = rng.gen_range(2usize..9);
        let gold = rng.gen_range(0..k);
        let sigma: f64 = rng.gen();
        let s = shortcut_degree(sigma, &cfg);
        let label = if s > 0.0 {
            soft_count += 1;
            LabelVector::soft(gold, s, k).unwrap()
        } else {
            LabelVector::hard(gold, k).unwrap()
        };
        ok &= label.sums_to_one();
        if sigma <= cfg.xi {
            let mut expected = vec![0.0; k + 1];
            expected[gold] = 1.0;
            ok &= label.kind() == LabelKind::Hard
                && label.probs() == expected.as_slice()
                && label.dummy_mass() == 0.0;
        } else {
            ok &= label.dummy_mass() > 0.0 && label.dummy_mass() < 1.0;
        }
    }
    check(
        "label-encoding invariants",
        ok,
        format!("10000 cases, {soft_count} soft, all sums within 1e-9"),
    )
}

// ---------------------------------------------------------- criterion 3

fn loss_of(params: &ClassifierParams, x: &[f64], y: &[f64]) -> f64 {
    cross_entropy(&forward(params, x).unwrap().probs, y).unwrap()
}

fn criterion_3() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut rng = substream(1, Stream::MonteCarlo);
    for arch_idx in 0..2 {
        for _ in 0..20 {
            let inputs = rng.gen_range(2usize..6);
            let outputs = rng.gen_range(2usize..5);
            let arch = if arch_idx == 0 { Arch::Linear } else { Arch::Mlp { hidden: 5 } };
            let params = ClassifierParams::init(arch, inputs, outputs, &mut rng);
            let x: Vec<f64> = (0..inputs).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut y: Vec<f64> = (0..outputs).map(|_| rng.gen_range(0.05..1.0)).collect();
            let total: f64 = y.iter().sum();
            y.iter_mut().for_each(|v| *v /= total);

            let analytic = backward(&params, &x, &y).unwrap();
            let h = 1e-5;
            for li in 0..params.layers.len() {
                let n_weights = params.layers[li].weights.len();
                let n_biases = params.layers[li].biases.len();
                for idx in 0..n_weights + n_biases {
                    let slot = |p: &mut ClassifierParams, delta: f64| {
                        if idx < n_weights {
                            p.layers[li].weights[idx] += delta;
                        } else {
                            p.layers[li].biases[idx - n_weights] += delta;
                        }
                    };
                    let mut plus = params.clone();
                    slot(&mut plus, h);
                    let mut minus = params.clone();
                    slot(&mut minus, -h);
                    let fd = (loss_of(&plus, &x, &y) - loss_of(&minus, &x, &y)) / (2.0 * h);
                    let a = if idx < n_weights {
                        analytic.layers[li].weights[idx]
                    } else {
                        analytic.layers[li].biases[idx - n_weights]
                    };
                    let rel = (a - fd).abs() / fd.abs().max(1e-4);
                    worst = worst.max(rel);
                }
            }
        }
    }
    check("gradient oracle", worst <= 1e-5, format!("worst relative error {worst:.2e}"))
}

// ---------------------------------------------------------- criterion 4

fn tiny_dataset() -> Dataset {
    let samples = (0..8u64)
        .map(|i| {
            let c = (i % 2) as usize;
            let sign = if c == 0 { 1.0 } else { -1.0 };
            Sample { id: i, gold_class: c, features: vec![sign, sign * 0.5] }
        })
        .collect();
    Dataset::new(samples, 2, 2, SplitTag::Train).unwrap()
}

fn criterion_4() -> Outcome {
    let data = tiny_dataset();
    let labels: Vec<LabelVector> =
        data.samples().iter().map(|s| LabelVector::soft(s.gold_class, 0.3, 2).unwrap()).collect();
    let mut ok = true;
    let mut detail = String::new();
    for name in ["F2", "L2", "none"] {
        let (mode, n) = ScheduleMode::parse(name).unwrap();
        let hard = n.unwrap_or(2);
        for total in 3..=8usize {
            // expected sequence built independently of loss_schedule
            let expected: Vec<LossKind> = (0..total)
                .map(|e| match mode {
                    ScheduleMode::HardFirst if e < hard => LossKind::Hard,
                    ScheduleMode::HardLast if e >= total - hard => LossKind::Hard,
                    ScheduleMode::AllSoft => LossKind::Soft,
                    _ => LossKind::Soft,
                })
                .collect();
            let cfg = RunConfig {
                schedule_mode: mode,
                warmup_epochs: hard,
                student_epochs: total,
                learning_rate: 0.1,
                batch_size: 4,
                optimizer: OptimizerKind::Sgd,
                arch: Arch::Linear,
                seed: 0,
                ..RunConfig::default()
            };
            let (_, log) = train_student(&data, Some(&labels), &cfg, None).unwrap();
            let good = loss_schedule(mode, hard, total) == expected && log.loss_kinds() == expected;
            if !good {
                ok = false;
                write!(detail, "{name}x{total} mismatch; ").unwrap();
            }
        }
    }
    if ok {
        detail = "all 18 mode x epoch-count sequences exact".into();
    }
    check("schedule exactness", ok, detail)
}

// ------------------------------------------------- criteria 5-10 (panel)

struct Panel {
    oc_positive_seeds: usize,
    teacher_id_oc: f64,
    teacher_ood_oc: f64,
    f2_id: f64,
    f2_ood: f64,
    none_ood: f64,
    std_id: f64,
    std_ood: f64,
    er_ood: f64,
    poe_ood: f64,
    f2_top_bin: f64,
    teacher_top_bin: f64,
    lin_student_mass: f64,
    teacher_mass: f64,
}

/// One experiment per seed with the default config: teacher, SoftLE-F2
/// student, all-soft student, standard model, both baselines, plus a
/// linear-student run for the weight probe. Means over the 5 seeds.
fn run_panel() -> Panel {
    let n = SEEDS.len() as f64;
    let mut p = Panel {
        oc_positive_seeds: 0,
        teacher_id_oc: 0.0,
        teacher_ood_oc: 0.0,
        f2_id: 0.0,
        f2_ood: 0.0,
        none_ood: 0.0,
        std_id: 0.0,
        std_ood: 0.0,
        er_ood: 0.0,
        poe_ood: 0.0,
        f2_top_bin: 0.0,
        teacher_top_bin: 0.0,
        lin_student_mass: 0.0,
        teacher_mass: 0.0,
    };
    for &seed in &SEEDS {
        let spec = BiasedDatasetSpec::default();
        let (train, id, ood) = generate(&spec, seed).unwrap();
        let cfg = RunConfig { seed, ..RunConfig::default() };
        let none_cfg = RunConfig { schedule_mode: ScheduleMode::AllSoft, ..cfg.clone() };
        let lin_cfg = RunConfig { arch: Arch::Linear, ..cfg.clone() };
        let sets = EvalSets { id_test: &id, ood_test: &ood };

        let (teacher, _) = train_teacher(&train, &cfg, Some(sets)).unwrap();
        let id_oc = eval::overconfidence_ratio(&teacher, &id, cfg.xi).unwrap();
        let ood_oc = eval::overconfidence_ratio(&teacher, &ood, cfg.xi).unwrap();
        if id_oc > ood_oc {
            p.oc_positive_seeds += 1;
        }
        p.teacher_id_oc += id_oc / n;
        p.teacher_ood_oc += ood_oc / n;

        let encoded = encode_labels(&train, &teacher, &cfg).unwrap();
        let labels: Vec<LabelVector> = encoded.iter().map(|(_, l)| l.clone()).collect();
        let anns: Vec<_> = encoded.into_iter().map(|(a, _)| a).collect();

        let (f2, _) = train_student(&train, Some(&labels), &cfg, None).unwrap();
        let (all_soft, _) = train_student(&train, Some(&labels), &none_cfg, None).unwrap();
        let (standard, _) = train_standard(&train, &cfg, None).unwrap();
        let (er, _) = train_reweighted(&train, &anns, &cfg, None).unwrap();
        let (poe, _) = train_poe(&train, &teacher, &cfg, None).unwrap();
        let (f2_lin, _) = train_student(&train, Some(&labels), &lin_cfg, None).unwrap();

        p.f2_id += eval::accuracy(&f2, &id, true).unwrap() / n;
        p.f2_ood += eval::accuracy(&f2, &ood, true).unwrap() / n;
        p.none_ood += eval::accuracy(&all_soft, &ood, true).unwrap() / n;
        p.std_id += eval::accuracy(&standard, &id, false).unwrap() / n;
        p.std_ood += eval::accuracy(&standard, &ood, false).unwrap() / n;
        p.er_ood += eval::accuracy(&er, &ood, false).unwrap() / n;
        p.poe_ood += eval::accuracy(&poe, &ood, false).unwrap() / n;
        p.f2_top_bin +=
            eval::misclassified_confidence_histogram(&f2, &ood).unwrap().top_bin_fraction() / n;
        p.teacher_top_bin +=
            eval::misclassified_confidence_histogram(&teacher, &ood).unwrap().top_bin_fraction() / n;
        p.lin_student_mass += eval::shortcut_weight_mass(&f2_lin, &spec).unwrap() / n;
        p.teacher_mass += eval::shortcut_weight_mass(&teacher, &spec).unwrap() / n;
    }
    p
}

fn criterion_5(p: &Panel) -> Outcome {
    check(
        "over-confidence ratio ID > OOD",
        p.oc_positive_seeds >= 4,
        format!(
            "{}/5 seeds, mean {:.3} vs {:.3}",
            p.oc_positive_seeds, p.teacher_id_oc, p.teacher_ood_oc
        ),
    )
}

fn criterion_6(p: &Panel) -> Outcome {
    let ood_gain = p.f2_ood - p.std_ood;
    let id_drop = p.std_id - p.f2_id;
    let avg_gain = (p.f2_id + p.f2_ood) / 2.0 - (p.std_id + p.std_ood) / 2.0;
    check(
        "OOD gain with bounded ID drop",
        ood_gain > 0.0 && id_drop <= 0.04 && avg_gain > 0.0,
        format!("OOD {:+.3}, ID drop {:.3}, avg {:+.3}", ood_gain, id_drop, avg_gain),
    )
}

fn criterion_7(p: &Panel) -> Outcome {
    check(
        "F2 schedule >= all-soft on OOD",
        p.f2_ood >= p.none_ood,
        format!("F2 {:.3} vs all-soft {:.3}", p.f2_ood, p.none_ood),
    )
}

fn criterion_8(p: &Panel) -> Outcome {
    check(
        "fewer high-confidence OOD errors",
        p.f2_top_bin < p.teacher_top_bin,
        format!("top-bin fraction {:.3} vs teacher {:.3}", p.f2_top_bin, p.teacher_top_bin),
    )
}

fn criterion_9(p: &Panel) -> Outcome {
    check(
        "lower shortcut weight mass",
        p.lin_student_mass < p.teacher_mass,
        format!("linear student {:.3} vs teacher {:.3}", p.lin_student_mass, p.teacher_mass),
    )
}

fn criterion_10(p: &Panel) -> Outcome {
    // Uniform teacher makes the PoE loss equal the plain loss, so with
    // shared streams the two trainings take identical SGD steps; a single
    // step bounds the per-step gradient difference by |delta_w| / lr.
    let data = tiny_dataset();
    let uniform = ClassifierParams {
        arch: Arch::Linear,
        num_inputs: 2,
        num_outputs: 2,
        layers: vec![softle_core::model::Layer {
            rows: 2,
            cols: 2,
            weights: vec![0.0; 4],
            biases: vec![0.0; 2],
        }],
    };
    let lr = 0.1;
    let cfg = RunConfig {
        student_epochs: 1,
        learning_rate: lr,
        batch_size: data.len(),
        optimizer: OptimizerKind::Sgd,
        arch: Arch::Linear,
        seed: 0,
        ..RunConfig::default()
    };
    let (plain, _) = train_standard(&data, &cfg, None).unwrap();
    let (combined, _) = train_poe(&data, &uniform, &cfg, None).unwrap();
    let mut max_grad_diff: f64 = 0.0;
    for (a, b) in plain.layers.iter().zip(&combined.layers) {
        for (x, y) in a.weights.iter().zip(&b.weights).chain(a.biases.iter().zip(&b.biases)) {
            max_grad_diff = max_grad_diff.max((x - y).abs() / lr);
        }
    }
    let er_gain = p.er_ood - p.std_ood;
    let poe_gain = p.poe_ood - p.std_ood;
    check(
        "baseline sanity",
        max_grad_diff <= 1e-10 && er_gain > 0.0 && poe_gain > 0.0,
        format!(
            "uniform-PoE grad diff {max_grad_diff:.1e}, ER OOD {er_gain:+.3}, PoE OOD {poe_gain:+.3}"
        ),
    )
}

// ---------------------------------------------------------- criterion 11

fn criterion_11() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_softle");
    let root = tempfile::tempdir().unwrap();
    let config_path = root.path().join("bench.cfg");
    std::fs::write(
        &config_path,
        "n_train = 2000\nn_id = 500\nn_ood = 500\nteacher_epochs = 5\nstudent_epochs = 4\nseed = 1\n",
    )
    .unwrap();
    let mut outputs = Vec::new();
    for sub in ["a", "b"] {
        let dir = root.path().join(sub);
        let status = Command::new(bin)
            .args(["run-all", "--config"])
            .arg(&config_path)
            .arg("--out-dir")
            .arg(&dir)
            .status()
            .unwrap();
        if !status.success() {
            return check("byte-identical reruns", false, format!("run-all exited with {status}"));
        }
        let mut bytes = Vec::new();
        for f in ["report", "metrics.csv", "histograms.csv", "manifest.json"] {
            bytes.push(std::fs::read(dir.join(f)).unwrap());
        }
        outputs.push(bytes);
    }
    check(
        "byte-identical reruns",
        outputs[0] == outputs[1],
        "report, metrics.csv, histograms.csv, manifest.json identical across invocations".into(),
    )
}

#[test]
fn acceptance() {
    let mut results = vec![criterion_1(), criterion_2(), criterion_3(), criterion_4()];
    let panel = run_panel();
    results.extend([
        criterion_5(&panel),
        criterion_6(&panel),
        criterion_7(&panel),
        criterion_8(&panel),
        criterion_9(&panel),
        criterion_10(&panel),
        criterion_11(),
    ]);
    let mut failed = 0;
    for (i, r) in results.iter().enumerate() {
        let status = if r.pass { "PASS" } else { "FAIL" };
        println!("criterion {:>2} ({}): {status} — {}", i + 1, r.name, r.detail);
        if !r.pass {
            failed += 1;
        }
    }
    assert_eq!(failed, 0, "{failed} acceptance criteria failed");
}
