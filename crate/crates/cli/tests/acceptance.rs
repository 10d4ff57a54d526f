//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the process exits nonzero if any fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;

use sentivec::baseline::fit_tfidf;
use sentivec::bilstm::train::TrainConfig;
use sentivec::bilstm::{lstm_cell_forward, BiLstmModel, InputMatrix, InputMode, LstmDirectionParams};
use sentivec::corpus::{build_vocabulary, split, synth_corpus, synth_corpus_annotated, Document, Label, PositionMode};
use sentivec::embeddings::{train_skipgram, EmbeddingConfig};
use sentivec::evaluation::{case_study, confusion, metrics, ConfusionMatrix};
use sentivec::optim::{adam_step, bce_loss, grad_check, AdamConfig, AdamState, EarlyStopper, StopDecision};
use sentivec::paragraph_vector::{pv_step_gradients, train_pv, ParagraphVectorizer, PvConfig, PvMode, PvModel};
use sentivec::pipeline::{predict_all, train_classifier};
use sentivec::rng::{fill_uniform, rng_from_seed, StageRng};
use sentivec::sampling::ns_loss;
use sentivec::tensor::{axpy, cosine, Matrix};

const TOL: f64 = 1e-4;
const H: f64 = 1e-4;

fn check(what: &str, r: sentivec::optim::GradCheckReport) {
    assert!(r.passed, "{what}: {r:?}");
}

fn random_matrix(rng: &mut StageRng, rows: usize, cols: usize, scale: f64) -> Matrix {
    let mut m = Matrix::zeros(rows, cols);
    fill_uniform(rng, scale, m.as_mut_slice());
    m
}

fn bilstm_gradients(rng: &mut StageRng, instance: usize) {
    let hidden = rng.gen_range(1..=8);
    let n = rng.gen_range(1..=6);
    let word_dim = rng.gen_range(1..=12);
    let pv_dim = if instance % 2 == 1 { rng.gen_range(1..=4) } else { 0 };
    let mode = if pv_dim > 0 {
        InputMode::ParagraphVector
    } else {
        InputMode::WordEmbedding
    };
    let mut model = BiLstmModel::zeros(mode, word_dim, pv_dim, hidden, 0.5).unwrap();
    for t in model.tensors_mut() {
        fill_uniform(rng, 0.8, t);
    }
    let mut m = random_matrix(rng, n, pv_dim + word_dim, 1.0);
    let pv = m.row(0)[..pv_dim].to_vec();
    for t in 1..n {
        m.row_mut(t)[..pv_dim].copy_from_slice(&pv);
    }
    let x = InputMatrix::new(m, pv_dim).unwrap();
    let y = (instance % 3 == 0) as u8 as f64;
    let mask = (instance % 4 < 2).then(|| model.dropout_mask(rng));
    let (p, cache) = model.forward_with_mask(&x, mask.clone()).unwrap();
    let grads = model.backward(&cache, bce_loss(p, y).1).unwrap();
    let analytic = grads.tensors();
    let base = model.tensors();
    for k in 0..base.len() {
        let r = grad_check(
            |theta| {
                let mut m = model.clone();
                m.tensors_mut()[k].copy_from_slice(theta);
                bce_loss(m.forward_with_mask(&x, mask.clone()).unwrap().0, y).0
            },
            base[k],
            analytic[k],
            H,
            TOL,
        );
        check(&format!("bilstm instance {instance} tensor {k}"), r);
    }
}

fn skipgram_gradients(rng: &mut StageRng, instance: usize) {
    let (v, d) = (rng.gen_range(4..=10), rng.gen_range(1..=16));
    let out = random_matrix(rng, v, d, 0.8);
    let mut center = vec![0.0; d];
    fill_uniform(rng, 0.8, &mut center);
    let target = rng.gen_range(0..v);
    let negatives: Vec<usize> = (0..rng.gen_range(1..=5)).map(|_| rng.gen_range(0..v)).collect();
    let mut d_center = vec![0.0; d];
    let mut d_out = Matrix::zeros(v, d);
    ns_loss(&center, &out, target, &negatives, &mut d_center, |row, g| {
        axpy(g, &center, d_out.row_mut(row))
    });
    let loss_at = |c: &[f64], o: &Matrix| ns_loss(c, o, target, &negatives, &mut vec![0.0; d], |_, _| {});
    check(
        &format!("skip-gram center {instance}"),
        grad_check(|c| loss_at(c, &out), &center, &d_center, H, TOL),
    );
    check(
        &format!("skip-gram output {instance}"),
        grad_check(
            |o| loss_at(&center, &Matrix::from_vec(v, d, o.to_vec())),
            out.as_slice(),
            d_out.as_slice(),
            H,
            TOL,
        ),
    );
}

fn pv_gradients(rng: &mut StageRng, instance: usize, dm: bool) {
    let (v, d) = (rng.gen_range(4..=10), rng.gen_range(1..=16));
    let out = random_matrix(rng, v, d, 0.8);
    let words = random_matrix(rng, v, d, 0.8);
    let mut doc = vec![0.0; d];
    fill_uniform(rng, 0.8, &mut doc);
    let mut ids: Vec<usize> = (0..v).collect();
    ids.shuffle(rng);
    let context: Vec<usize> = ids[..rng.gen_range(1..=3)].to_vec();
    let target = rng.gen_range(0..v);
    let negatives: Vec<usize> = (0..rng.gen_range(1..=5)).map(|_| rng.gen_range(0..v)).collect();
    let words_arg = |w: &Matrix| -> Option<(Matrix, Vec<usize>)> { dm.then(|| (w.clone(), context.clone())) };
    let loss = |doc: &[f64], w: &Matrix, o: &Matrix| {
        let wa = words_arg(w);
        pv_step_gradients(doc, wa.as_ref().map(|(m, c)| (m, c.as_slice())), o, target, &negatives).loss
    };
    let wa = words_arg(&words);
    let g = pv_step_gradients(
        &doc,
        wa.as_ref().map(|(m, c)| (m, c.as_slice())),
        &out,
        target,
        &negatives,
    );
    let tag = if dm { "pv-dm" } else { "pv-dbow" };
    check(
        &format!("{tag} doc {instance}"),
        grad_check(|x| loss(x, &words, &out), &doc, &g.d_doc, H, TOL),
    );
    check(
        &format!("{tag} output {instance}"),
        grad_check(
            |o| loss(&doc, &words, &Matrix::from_vec(v, d, o.to_vec())),
            out.as_slice(),
            g.d_output.as_slice(),
            H,
            TOL,
        ),
    );
    if dm {
        let w = context[0];
        check(
            &format!("{tag} context word {instance}"),
            grad_check(
                |row| {
                    let mut m = words.clone();
                    m.row_mut(w).copy_from_slice(row);
                    loss(&doc, &m, &out)
                },
                words.row(w),
                &g.d_context_word,
                H,
                TOL,
            ),
        );
    }
}

fn criterion_1() -> String {
    let mut rng = rng_from_seed(101);
    for i in 0..20 {
        bilstm_gradients(&mut rng, i);
        skipgram_gradients(&mut rng, i);
        pv_gradients(&mut rng, i, true);
        pv_gradients(&mut rng, i, false);
    }
    for k in 1..=9 {
        let p = f64::from(k) / 10.0;
        for y in [0.0, 1.0] {
            let g = bce_loss(p, y).1;
            check(
                &format!("bce p={p} y={y}"),
                grad_check(|t| bce_loss(t[0], y).0, &[p], &[g], 1e-6, 1e-8),
            );
        }
    }
    "20 instances each of bilstm, skip-gram, pv-dm, pv-dbow; bce grid".into()
}

fn sig(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

/// Scalar LSTM step for H = D = 1.
fn scalar_step(p: &LstmDirectionParams, x: f64, h: f64, c: f64) -> (f64, f64) {
    let (w, u, b) = (p.w.as_slice(), p.u.as_slice(), &p.b);
    let i = sig(w[0] * x + u[0] * h + b[0]);
    let f = sig(w[1] * x + u[1] * h + b[1]);
    let o = sig(w[2] * x + u[2] * h + b[2]);
    let g = (w[3] * x + u[3] * h + b[3]).tanh();
    let c = f * c + i * g;
    (o * c.tanh(), c)
}

fn criterion_2() -> String {
    let mut rng = rng_from_seed(202);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let mut model = BiLstmModel::zeros(InputMode::WordEmbedding, 1, 0, 1, 0.5).unwrap();
        for t in model.tensors_mut() {
            fill_uniform(&mut rng, 1.5, t);
        }
        let n = rng.gen_range(1..=8);
        let x = InputMatrix::word_only(random_matrix(&mut rng, n, 1, 2.0));
        let xs: Vec<f64> = (0..n).map(|t| x.row(t)[0]).collect();

        let (hp, cp) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let (h, c, _) = lstm_cell_forward(&[xs[0]], &[hp], &[cp], &model.forward).unwrap();
        let (h_ref, c_ref) = scalar_step(&model.forward, xs[0], hp, cp);
        worst = worst.max((h[0] - h_ref).abs()).max((c[0] - c_ref).abs());

        let run = |p: &LstmDirectionParams, seq: Vec<f64>| {
            seq.into_iter().fold((0.0, 0.0), |(h, c), x| scalar_step(p, x, h, c)).0
        };
        let hf = run(&model.forward, xs.clone());
        let hb = run(&model.backward, xs.iter().rev().copied().collect());
        let p_ref = sig(model.w_out[0] * hf + model.w_out[1] * hb + model.b_out);
        worst = worst.max((model.probability(&x).unwrap() - p_ref).abs());
    }
    assert!(worst <= 1e-12, "max deviation {worst:e}");
    format!("50 H=1 instances, max deviation {worst:.1e}")
}

fn criterion_3() -> String {
    let doc = |id: &str, text: &str| Document::new(id, text.split(' ').map(String::from).collect(), Label::Positive);
    let mut rng = rng_from_seed(303);
    let bank: Vec<String> = (0..60).map(|i| format!("w{i}")).collect();
    let mut docs: Vec<Document> = (0..1000)
        .map(|i| {
            let len = rng.gen_range(1..=40);
            let tokens = (0..len).map(|_| bank.choose(&mut rng).unwrap().clone()).collect();
            Document::new(format!("r{i}"), tokens, Label::Positive)
        })
        .collect();
    docs.push(doc("pair-a", "saya suka karena tidak ada yang merokok"));
    docs.push(doc("pair-b", "saya tidak suka karena ada yang merokok"));
    let model = fit_tfidf(&docs).unwrap();
    for d in &docs {
        let mut shuffled = d.clone();
        shuffled.tokens.shuffle(&mut rng);
        assert_eq!(model.transform(d), model.transform(&shuffled), "{}", d.id);
    }
    let (a, b) = (&docs[1000], &docs[1001]);
    assert_eq!(model.transform(a), model.transform(b));
    "1000 random documents and the word-order sentence pair".into()
}

fn criterion_4() -> String {
    let start = Instant::now();
    let docs = synth_corpus(2000, PositionMode::Mixed, 7);
    let (train, val) = split(&docs, 0.1, 7).unwrap();
    let vocab = build_vocabulary(&train, 1).unwrap();
    let emb = train_skipgram(&train, &vocab, &EmbeddingConfig::default()).unwrap();
    let pv_cfg = PvConfig::default();
    let pv = ParagraphVectorizer::new(
        train_pv(&train, &vocab, PvMode::Dm, &pv_cfg).unwrap(),
        train_pv(&train, &vocab, PvMode::Dbow, &pv_cfg).unwrap(),
    )
    .unwrap();
    let cfg = TrainConfig {
        target_accuracy: Some(0.95),
        ..TrainConfig::default()
    };
    let mut detail = Vec::new();
    for mode in [InputMode::WordEmbedding, InputMode::ParagraphVector] {
        let (_, report) = train_classifier(
            mode.as_str(),
            &train,
            &val,
            emb.clone(),
            Some(pv.clone()),
            mode,
            &cfg,
            |_| {},
        )
        .unwrap();
        let best = report.epochs.iter().map(|e| e.validation_accuracy).fold(0.0, f64::max);
        assert!(
            best >= 0.95 && report.epochs.len() <= 30,
            "{mode}: best accuracy {best} after {} epochs",
            report.epochs.len()
        );
        detail.push(format!("{mode} {best:.3} in {} epochs", report.epochs.len()));
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed <= 300.0, "took {elapsed:.0}s");
    format!("{}; {elapsed:.0}s", detail.join(", "))
}

fn criterion_5() -> String {
    let (dim, pv_dim, hidden) = (100, 50, 32);
    let (mut we_total, mut pv_total) = (0.0, 0.0);
    let mut stable_flips = 0;
    let mut detail = Vec::new();
    for seed in 0..5u64 {
        let all = synth_corpus(1000, PositionMode::SentimentLast, seed);
        let test = synth_corpus_annotated(400, PositionMode::SentimentMiddle, seed + 100);
        let (train, val) = split(&all, 0.1, seed).unwrap();
        let vocab = build_vocabulary(&train, 1).unwrap();
        let emb = train_skipgram(
            &train,
            &vocab,
            &EmbeddingConfig {
                dim,
                seed,
                ..Default::default()
            },
        )
        .unwrap();
        let pv_cfg = PvConfig {
            dim: pv_dim,
            seed,
            ..Default::default()
        };
        let pv = ParagraphVectorizer::new(
            train_pv(&train, &vocab, PvMode::Dm, &pv_cfg).unwrap(),
            train_pv(&train, &vocab, PvMode::Dbow, &pv_cfg).unwrap(),
        )
        .unwrap();
        let cfg = TrainConfig {
            hidden_size: hidden,
            seed,
            max_epochs: 10,
            ..TrainConfig::default()
        };
        let (we, _) = train_classifier(
            "we",
            &train,
            &val,
            emb.clone(),
            None,
            InputMode::WordEmbedding,
            &cfg,
            |_| {},
        )
        .unwrap();
        let (pw, _) = train_classifier(
            "pv-we",
            &train,
            &val,
            emb,
            Some(pv),
            InputMode::ParagraphVector,
            &cfg,
            |_| {},
        )
        .unwrap();

        let docs: Vec<Document> = test.iter().map(|s| s.document.clone()).collect();
        let accuracy = |preds: Vec<Label>| {
            preds.iter().zip(&docs).filter(|(p, d)| **p == d.label).count() as f64 / docs.len() as f64
        };
        let (a_we, a_pv) = (
            accuracy(predict_all(&we, &docs).unwrap()),
            accuracy(predict_all(&pw, &docs).unwrap()),
        );
        let mut stable = 0;
        for s in &test {
            let r = case_study(&s.document, s.carrier.clone(), &[&we, &pw]).unwrap();
            if r.outcomes[0].flipped && !r.outcomes[1].flipped {
                stable += 1;
            }
        }
        detail.push(format!(
            "seed {seed}: we {a_we:.3} pv-we {a_pv:.3} stable-on-we-flips {stable}"
        ));
        we_total += a_we;
        pv_total += a_pv;
        stable_flips += stable;
    }
    let (we_mean, pv_mean) = (we_total / 5.0, pv_total / 5.0);
    for line in &detail {
        println!("    {line}");
    }
    assert!(pv_mean >= we_mean, "mean pv-we {pv_mean} < we {we_mean}");
    assert!(stable_flips >= 1, "no document where WE flips and PV+WE holds");
    format!("mean accuracy we {we_mean:.3}, pv-we {pv_mean:.3}; {stable_flips} WE flips with PV+WE stable")
}

const TOPIC_A: &[&str] = &["makanan", "nasi", "ayam", "sambal", "pedas", "goreng", "kuah", "bumbu"];
const TOPIC_B: &[&str] = &[
    "hotel",
    "kamar",
    "kasur",
    "mandi",
    "resepsionis",
    "kolam",
    "sarapan",
    "lobi",
];
const SHARED: &[&str] = &["yang", "dan", "di", "itu"];

fn topic_doc(id: String, topic: &[&str], seed: u64) -> Document {
    let mut rng = rng_from_seed(seed);
    let tokens = (0..14)
        .map(|i| {
            let bank = if i % 4 == 3 { SHARED } else { topic };
            bank.choose(&mut rng).unwrap().to_string()
        })
        .collect();
    Document::new(id, tokens, Label::Positive)
}

fn intra_inter(model: &PvModel) -> (f64, f64) {
    let ids = model.doc_ids();
    let (mut intra, mut n_intra, mut inter, mut n_inter) = (0.0, 0, 0.0, 0);
    for i in 0..ids.len() {
        for j in i + 1..ids.len() {
            let c = cosine(model.doc_vector(&ids[i]).unwrap(), model.doc_vector(&ids[j]).unwrap());
            if ids[i].as_bytes()[0] == ids[j].as_bytes()[0] {
                intra += c;
                n_intra += 1;
            } else {
                inter += c;
                n_inter += 1;
            }
        }
    }
    (intra / n_intra as f64, inter / n_inter as f64)
}

fn criterion_6() -> String {
    let mut worst_gap = f64::INFINITY;
    for seed in 0..5u64 {
        let mut docs = Vec::new();
        for i in 0..10 {
            docs.push(topic_doc(format!("a{i}"), TOPIC_A, seed * 100 + i));
            docs.push(topic_doc(format!("b{i}"), TOPIC_B, seed * 100 + 50 + i));
        }
        let vocab = build_vocabulary(&docs, 1).unwrap();
        let cfg = PvConfig {
            dim: 16,
            window: 3,
            epochs: 100,
            seed,
            ..PvConfig::default()
        };
        for mode in [PvMode::Dm, PvMode::Dbow] {
            let (intra, inter) = intra_inter(&train_pv(&docs, &vocab, mode, &cfg).unwrap());
            assert!(intra > inter, "seed {seed} {mode:?}: intra {intra} inter {inter}");
            worst_gap = worst_gap.min(intra - inter);
        }
    }
    format!("5/5 seeds in both modes, smallest intra-inter gap {worst_gap:.3}")
}

fn labels(bits: &[u8]) -> Vec<Label> {
    bits.iter().map(|&b| Label::from_value(b).unwrap()).collect()
}

fn criterion_7() -> String {
    let cm = |p: &[u8], g: &[u8]| confusion(&labels(p), &labels(g)).unwrap();
    assert_eq!(
        cm(&[1, 0, 1], &[1, 0, 1]),
        ConfusionMatrix {
            tp: 2,
            fp: 0,
            fn_: 0,
            tn: 1
        }
    );
    assert_eq!(cm(&[1, 1], &[0, 0]).fp, 2);
    assert_eq!(
        cm(&[1, 0, 0, 1, 1], &[1, 1, 0, 0, 1]),
        ConfusionMatrix {
            tp: 2,
            fp: 1,
            fn_: 1,
            tn: 1
        }
    );
    assert!(confusion(&labels(&[1]), &labels(&[1, 0])).is_err());

    let perfect = metrics(&ConfusionMatrix {
        tp: 2,
        fp: 0,
        fn_: 0,
        tn: 0,
    })
    .unwrap()
    .positive;
    assert_eq!((perfect.precision, perfect.recall, perfect.f1), (1.0, 1.0, 1.0));
    let half = metrics(&ConfusionMatrix {
        tp: 1,
        fp: 1,
        fn_: 1,
        tn: 0,
    })
    .unwrap()
    .positive;
    assert_eq!((half.precision, half.recall, half.f1), (0.5, 0.5, 0.5));

    // 208 positive and 204 negative gold documents.
    let m = metrics(&ConfusionMatrix {
        tp: 190,
        fn_: 18,
        tn: 180,
        fp: 24,
    })
    .unwrap();
    assert_eq!((m.positive.support, m.negative.support), (208, 204));
    let (pp, pr) = (190.0 / 214.0, 190.0 / 208.0);
    let (np, nr) = (180.0 / 198.0, 180.0 / 204.0);
    assert_eq!(m.positive.precision, pp);
    assert_eq!(m.negative.recall, nr);
    let weighted = |a: f64, b: f64| (208.0 * a + 204.0 * b) / 412.0;
    let f1 = |p: f64, r: f64| 2.0 * p * r / (p + r);
    for (got, want) in [
        (m.weighted.precision, weighted(pp, np)),
        (m.weighted.recall, weighted(pr, nr)),
        (m.weighted.f1, weighted(f1(pp, pr), f1(np, nr))),
    ] {
        assert!((got - want).abs() <= 1e-15, "{got} vs {want}");
    }
    assert_eq!(m.accuracy, 370.0 / 412.0);
    "confusion and metric examples; 208/204 weighted averages".into()
}

fn run_pipeline(bin: &str, out: &Path) {
    let common = [
        "--out",
        out.to_str().unwrap(),
        "--seed",
        "11",
        "--embedding-dim",
        "24",
        "--pv-dim",
        "12",
        "--pv-epochs",
        "5",
        "--infer-steps",
        "10",
        "--hidden-size",
        "8",
        "--epochs",
        "3",
    ];
    let steps: &[&[&str]] = &[
        &[
            "synth",
            "--n",
            "300",
            "--position",
            "mixed",
            "--test-position",
            "sentiment-middle",
        ],
        &["train-embeddings"],
        &["train-pv"],
        &["train", "--mode", "we"],
        &["train", "--mode", "pv-we"],
        &["train", "--mode", "svm"],
        &["evaluate"],
        &["case-study"],
        &["predict", "--text", "makanannya sangat enak dan tempatnya bersih ."],
    ];
    for step in steps {
        let status = Command::new(bin).args(*step).args(common).output().unwrap();
        assert!(
            status.status.success(),
            "{step:?}: {}",
            String::from_utf8_lossy(&status.stderr)
        );
    }
}

fn criterion_8() -> String {
    let bin = env!("CARGO_BIN_EXE_sentivec");
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run_pipeline(bin, &a);
    run_pipeline(bin, &b);
    let mut names: Vec<String> = std::fs::read_dir(&a)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert!(names.len() >= 15, "{names:?}");
    for name in &names {
        let (x, y) = (
            std::fs::read(a.join(name)).unwrap(),
            std::fs::read(b.join(name)).unwrap(),
        );
        assert!(x == y, "{name} differs between runs");
    }
    format!("{} artifacts byte-identical", names.len())
}

fn criterion_9() -> String {
    let mut theta = vec![0.3, -1.2, 4.0];
    let mut state = AdamState::new(AdamConfig::default(), &[3]);
    adam_step(&mut [&mut theta], &[&[0.0; 3]], &mut state).unwrap();
    assert_eq!(theta, vec![0.3, -1.2, 4.0]);

    let mut theta = vec![0.0];
    let mut state = AdamState::new(AdamConfig::default(), &[1]);
    adam_step(&mut [&mut theta], &[&[1.0]], &mut state).unwrap();
    assert_eq!(theta[0], -1e-3 / (1.0 + 1e-8));

    let run = || {
        let mut theta = vec![0.5, -0.25];
        let mut state = AdamState::new(AdamConfig::default(), &[2]);
        (0..20)
            .map(|k| {
                let g = [theta[0] * 2.0 - f64::from(k) * 0.01, theta[1].sin()];
                adam_step(&mut [&mut theta], &[&g], &mut state).unwrap();
                theta.clone()
            })
            .collect::<Vec<_>>()
    };
    assert_eq!(run(), run());

    let mut theta = vec![1.0];
    let mut state = AdamState::new(AdamConfig::default(), &[1]);
    let err = adam_step(&mut [&mut theta], &[&[f64::NAN]], &mut state).unwrap_err();
    assert_eq!(err.to_string(), "non-finite gradient");

    let first = |lr: f64| {
        let mut theta = vec![0.0, 0.0];
        let mut state = AdamState::new(
            AdamConfig {
                learning_rate: lr,
                ..AdamConfig::default()
            },
            &[2],
        );
        adam_step(&mut [&mut theta], &[&[0.7, -3.0]], &mut state).unwrap();
        theta
    };
    let (a, b) = (first(1e-3), first(2e-3));
    assert_eq!([2.0 * a[0], 2.0 * a[1]], [b[0], b[1]]);

    let mut s = EarlyStopper::new(2, 1e-5);
    for (epoch, loss) in [1.0, 0.9, 0.8].into_iter().enumerate() {
        assert_eq!(s.update(loss, || epoch), StopDecision::Continue);
    }
    assert_eq!((s.best_loss(), s.best()), (0.8, Some(&2)));

    let mut s = EarlyStopper::new(2, 1e-5);
    let decisions: Vec<_> = [1.0, 1.1, 1.2, 1.3]
        .into_iter()
        .enumerate()
        .map(|(i, loss)| s.update(loss, || i + 1))
        .collect();
    assert_eq!(decisions.last(), Some(&StopDecision::Stop));
    assert!(decisions[..3].iter().all(|d| *d == StopDecision::Continue));
    assert_eq!(s.into_best(), Some(1));

    let mut s = EarlyStopper::new(3, 1e-5);
    s.update(1.0, || 0);
    s.update(1.0 - 5e-6, || 1);
    assert_eq!((s.epochs_since_improvement(), s.best()), (1, Some(&0)));
    "adam and early stopping examples".into()
}

fn main() {
    let criteria: [(&str, fn() -> String); 9] = [
        ("gradient suite", criterion_1),
        ("scalar oracle equivalence", criterion_2),
        ("tf-idf permutation invariance", criterion_3),
        ("toy corpus learnability", criterion_4),
        ("position sensitivity", criterion_5),
        ("paragraph vector structure", criterion_6),
        ("metric arithmetic", criterion_7),
        ("pipeline determinism", criterion_8),
        ("adam and early stopping examples", criterion_9),
    ];
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|v| v.parse().ok());
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let n = i + 1;
        if only.is_some_and(|o| o != n) {
            continue;
        }
        let start = Instant::now();
        match catch_unwind(AssertUnwindSafe(f)) {
            Ok(detail) => println!(
                "criterion {n} PASS  {name}: {detail} ({:.1}s)",
                start.elapsed().as_secs_f64()
            ),
            Err(e) => {
                failed += 1;
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                println!("criterion {n} FAIL  {name}: {msg}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
