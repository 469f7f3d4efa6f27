//! Acceptance checks, one line per criterion.
//!
//! Run: cargo test -p classwatch-core --test acceptance -- --nocapture

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::time::{Duration, Instant};

use chrono::{TimeZone, Utc};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use classwatch_core::alert::{parse_log, AlertKind, AlertRule, AlertStore, Judgment, Pipeline, ReviewVerdict, StoreState};
use classwatch_core::demo;
use classwatch_core::detector::{scan, Channel, Detector, PinyinTable, Verdict, DEFAULT_MAX_GAP};
use classwatch_core::linguistic::{LinguisticFeatures, SegmentationLexicon, SubjectLexicon};
use classwatch_core::prosodic::{mfcc, FrameSpec, MelFilterbank, ProsodicConfig, ProsodicFeatures, Window};
use classwatch_core::quality::{
    ablation, evaluate, train, EvalReport, FeatureMode, FeatureVector, LabeledDataset, LabeledExample, LogisticModel,
    Objective, Standardizer, TrainConfig,
};
use classwatch_core::session::{Role, SessionRecord, TranscriptSegment};
use classwatch_core::word_bank::{expand_seeds, EmbeddingTable, EntrySource};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.random_range(f64::EPSILON..1.0);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

// ---------------------------------------------------------------- 1 ----

fn oracle_mfcc(samples: &[f64], rate: u32, bank: &MelFilterbank<f64>, n_coeffs: usize) -> Vec<Vec<f64>> {
    let len = (0.025 * f64::from(rate)).round() as usize;
    let hop = (0.010 * f64::from(rate)).round() as usize;
    let n_fft = len.next_power_of_two();
    let window: Vec<f64> = (0..len)
        .map(|i| 0.54 - 0.46 * (std::f64::consts::TAU * i as f64 / (len - 1) as f64).cos())
        .collect();
    let twiddle: Vec<(f64, f64)> = (0..n_fft)
        .map(|j| {
            let angle = -std::f64::consts::TAU * j as f64 / n_fft as f64;
            (angle.cos(), angle.sin())
        })
        .collect();
    let weights = bank.weights();
    let m = weights.len();
    let mut out = Vec::new();
    let mut start = 0;
    while start < samples.len() {
        let mut x = vec![0.0; n_fft];
        for i in 0..len {
            if let Some(&s) = samples.get(start + i) {
                x[i] = s * window[i];
            }
        }
        let power: Vec<f64> = (0..=n_fft / 2)
            .map(|k| {
                let (mut re, mut im) = (0.0, 0.0);
                for (n, &v) in x.iter().enumerate() {
                    let (c, s) = twiddle[k * n % n_fft];
                    re += v * c;
                    im += v * s;
                }
                re * re + im * im
            })
            .collect();
        let log_bands: Vec<f64> = weights
            .iter()
            .map(|row| row.iter().zip(&power).map(|(w, p)| w * p).sum::<f64>().max(1e-10).ln())
            .collect();
        let coeffs = (1..=n_coeffs)
            .map(|k| {
                (2.0 / m as f64).sqrt()
                    * log_bands
                        .iter()
                        .enumerate()
                        .map(|(i, &l)| l * (std::f64::consts::PI * k as f64 * (i as f64 + 0.5) / m as f64).cos())
                        .sum::<f64>()
            })
            .collect();
        out.push(coeffs);
        start += hop;
    }
    out
}

fn criterion_mfcc() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let spec = FrameSpec {
        frame_len_ms: 25.0,
        hop_ms: 10.0,
        window: Window::Hamming,
    };
    let mut worst: f64 = 0.0;
    let n_signals = 50;
    for i in 0..n_signals {
        let rate = if i % 2 == 0 { 8_000 } else { 16_000 };
        let n = rng.random_range(rate as usize / 20..=rate as usize);
        let kind = i % 3;
        let f: f64 = rng.random_range(80.0..3000.0);
        let samples: Vec<f64> = (0..n)
            .map(|t| match kind {
                0 => rng.random_range(-1.0..1.0),
                1 => 0.8 * (std::f64::consts::TAU * f * t as f64 / f64::from(rate)).sin(),
                _ => 0.5 * (std::f64::consts::TAU * f * t as f64 / f64::from(rate)).sin() + 0.05 * rng.random_range(-1.0..1.0),
            })
            .collect();
        let bank = MelFilterbank::for_frames(&spec, rate, 26).unwrap();
        let got = mfcc(&samples, &spec, &bank, 13).unwrap();
        let want = oracle_mfcc(&samples, rate, &bank, 13);
        if got.len() != want.len() {
            return outcome(false, format!("signal {i}: {} frames vs oracle {}", got.len(), want.len()));
        }
        let scale = want.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
        let diff = got
            .iter()
            .flatten()
            .zip(want.iter().flatten())
            .fold(0.0f64, |a, (g, w)| a.max((g - w).abs()));
        worst = worst.max(diff / scale);
    }
    outcome(worst <= 1e-6, format!("{n_signals} signals, max relative error {worst:.2e} (tol 1e-6)"))
}

// ---------------------------------------------------------------- 2 ----

fn criterion_gradient() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    let n_instances = 100;
    for _ in 0..n_instances {
        let d = rng.random_range(1..=20);
        let n = rng.random_range(1..=50);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| normal(&mut rng)).collect()).collect();
        let labels: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
        let weights: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..3.0)).collect();
        let obj = Objective {
            rows: &rows,
            labels: &labels,
            weights: &weights,
            l2_lambda: rng.random_range(0.0..0.1),
        };
        let w: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b: f64 = rng.random_range(-1.0..1.0);
        let (gw, gb) = obj.gradient(&w, b);
        let mut numeric = Vec::with_capacity(d + 1);
        for j in 0..d {
            let (mut plus, mut minus) = (w.clone(), w.clone());
            plus[j] += h;
            minus[j] -= h;
            numeric.push((obj.loss(&plus, b) - obj.loss(&minus, b)) / (2.0 * h));
        }
        numeric.push((obj.loss(&w, b + h) - obj.loss(&w, b - h)) / (2.0 * h));
        let analytic: Vec<f64> = gw.into_iter().chain([gb]).collect();
        let norm = analytic.iter().fold(0.0f64, |a, g| a.max(g.abs())).max(1e-8);
        let diff = analytic.iter().zip(&numeric).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
        worst = worst.max(diff / norm);
    }
    outcome(worst <= 1e-5, format!("{n_instances} instances, max relative error {worst:.2e} (tol 1e-5)"))
}

// ---------------------------------------------------------------- 3 ----

fn toy_dataset(points: &[(Vec<f64>, bool)], names: &[&str]) -> LabeledDataset<f64> {
    let schema: Vec<String> = names.iter().map(|s| s.to_string()).collect();
    LabeledDataset::new(
        points
            .iter()
            .enumerate()
            .map(|(i, (x, y))| LabeledExample {
                features: FeatureVector::new(format!("p{i}"), schema.clone(), x.clone()).unwrap(),
                label: *y,
            })
            .collect(),
    )
    .unwrap()
}

fn criterion_separable() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    // Points on either side of x + 2y = 0, at least 1 from the boundary.
    let norm = 5.0f64.sqrt();
    let points: Vec<(Vec<f64>, bool)> = (0..200)
        .map(|i| {
            let good = i % 2 == 0;
            let along: f64 = rng.random_range(-6.0..6.0);
            let dist: f64 = rng.random_range(1.0..4.0) * if good { 1.0 } else { -1.0 };
            let (ux, uy) = (1.0 / norm, 2.0 / norm);
            (vec![dist * ux - along * uy, dist * uy + along * ux], good)
        })
        .collect();
    let data = toy_dataset(&points, &["energy_mean", "talk_ratio"]);
    let model = train(&data, &TrainConfig::default()).unwrap();
    let r = evaluate(&model, &data, 0.5).unwrap();
    outcome(r.accuracy >= 0.99, format!("training accuracy {:.3} on 200 points (need >= 0.99)", r.accuracy))
}

// ---------------------------------------------------------------- 4 ----

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Sessions whose label depends on one linguistic latent and one prosodic
/// latent; class sizes 979 good / 221 bad after exactly 10% label flips.
fn synthetic_corpus(seed: u64) -> LabeledDataset<f64> {
    let n = 1200;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let latents: Vec<(f64, f64)> = (0..n).map(|_| (normal(&mut rng), normal(&mut rng))).collect();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        let (si, sj) = (latents[i].0 + latents[i].1, latents[j].0 + latents[j].1);
        si.total_cmp(&sj)
    });
    let mut label = vec![true; n];
    for &i in &order[..127] {
        label[i] = false;
    }
    let mut bad: Vec<usize> = order[..127].to_vec();
    let mut good: Vec<usize> = order[127..].to_vec();
    bad.shuffle(&mut rng);
    good.shuffle(&mut rng);
    for &i in &bad[..13] {
        label[i] = true;
    }
    for &i in &good[..107] {
        label[i] = false;
    }

    let ling_schema: Vec<String> = LinguisticFeatures::SCHEMA.iter().map(|s| s.to_string()).collect();
    let pros_schema = ProsodicFeatures::<f64>::schema(13);
    let rows = latents
        .iter()
        .zip(&label)
        .enumerate()
        .map(|(i, (&(a, b), &y))| {
            let mut noise = || normal(&mut rng);
            let ling = [
                2000.0 + 400.0 * (a + 0.5 * noise()),
                1200.0 + 240.0 * (a + 0.5 * noise()),
                150.0 + 20.0 * noise(),
                30.0 + 5.0 * noise(),
                sigmoid(a + 0.8 * noise()),
                60.0 + 10.0 * noise(),
                12.0 + 2.0 * noise(),
                10.0 + 3.0 * noise(),
            ];
            let mut pros: Vec<f64> = pros_schema
                .iter()
                .map(|name| match name.as_str() {
                    "energy_mean" => (-4.0 + 0.5 * (b + 0.5 * noise())).exp(),
                    "loudness_mean" => 20.0 + 4.0 * (b + 0.7 * noise()),
                    "talk_ratio" => sigmoid(b + 0.8 * noise()),
                    "n_frames" => 180_000.0 + 1000.0 * noise(),
                    _ => noise(),
                })
                .collect();
            let mut values = ling.to_vec();
            values.append(&mut pros);
            let schema: Vec<String> = ling_schema.iter().chain(&pros_schema).cloned().collect();
            LabeledExample {
                features: FeatureVector::new(format!("syn-{i:04}"), schema, values).unwrap(),
                label: y,
            }
        })
        .collect();
    LabeledDataset::new(rows).unwrap()
}

fn criterion_ablation() -> Outcome {
    let data = synthetic_corpus(4);
    let (good, bad) = (data.count(true), data.count(false));
    let rows = ablation(&data, &FeatureMode::ALL, &TrainConfig::default(), 0.5, 0.8, 4).unwrap();
    let f1 = |m: FeatureMode| rows.iter().find(|r| r.mode == m).unwrap().report.f1;
    let (l, p, c) = (f1(FeatureMode::LinguisticOnly), f1(FeatureMode::ProsodicOnly), f1(FeatureMode::Combined));
    let pass = c >= l.max(p) - 0.02 && l >= 0.7 && p >= 0.7;
    outcome(
        pass,
        format!("{good}:{bad} corpus, F1 linguistic {l:.3} prosodic {p:.3} combined {c:.3}"),
    )
}

// ---------------------------------------------------------------- 5 ----

fn oracle_scan(text: &str, surfaces: &[String], table: &PinyinTable, g: usize) -> BTreeSet<(usize, usize, usize, Channel, String)> {
    let chars: Vec<char> = text.chars().collect();
    let accepts = |unit: char, c: char| -> Option<bool> {
        if unit == c {
            Some(true)
        } else if !table.syllables(unit).is_disjoint(&table.syllables(c)) {
            Some(false)
        } else {
            None
        }
    };
    // every (end, all_identity) for index sequences matching units[j..] from pos
    fn walk(
        units: &[char],
        chars: &[char],
        pos: usize,
        g: usize,
        identity: bool,
        accepts: &dyn Fn(char, char) -> Option<bool>,
        out: &mut Vec<(usize, bool)>,
    ) {
        let Some(id) = accepts(units[0], chars[pos]) else { return };
        let identity = identity && id;
        if units.len() == 1 {
            out.push((pos + 1, identity));
            return;
        }
        for next in pos + 1..=(pos + 1 + g).min(chars.len().saturating_sub(1)) {
            if next < chars.len() {
                walk(&units[1..], chars, next, g, identity, accepts, out);
            }
        }
    }
    let mut found = BTreeSet::new();
    for (p, surface) in surfaces.iter().enumerate() {
        let units: Vec<char> = surface.chars().collect();
        for start in 0..chars.len() {
            let mut ends = Vec::new();
            walk(&units, &chars, start, g, true, &accepts, &mut ends);
            let Some(end) = ends.iter().map(|e| e.0).min() else { continue };
            let surface_hit = ends.iter().any(|&(e, id)| e == end && id);
            let channel = if surface_hit { Channel::Surface } else { Channel::Phonetic };
            found.insert((p, start, end, channel, chars[start..end].iter().collect()));
        }
    }
    found
}

fn criterion_detector() -> Outcome {
    let table = demo::pinyin_table();
    let seg = SegmentationLexicon::parse(demo::SEGMENTATION_LEXICON);
    let bank = demo::bank();
    let benign_words = [
        "我们", "今天", "学习", "数学", "英语", "题目", "老师", "同学", "这个", "问题", "答案", "很好", "继续",
        "一下", "方程", "练习", "课文", "句子", "你", "看", "好的", "吗", "，",
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut texts: Vec<(String, bool)> = (0..100)
        .map(|_| {
            let n = rng.random_range(3..12);
            let mut s: String = (0..n).map(|_| *benign_words.choose(&mut rng).unwrap()).collect();
            s.push('。');
            (s, false)
        })
        .collect();
    let planted = [
        "你真是个笨蛋。",
        "你这个本但啊。",
        "他就是个百吃！",
        "你是笨呀蛋吗？",
        "别当蠢了货。",
    ];
    let decoys = ["这是本单元的重点。", "我们本单位很好。", "百尺竿头，更进一步。"];
    for (k, p) in planted.iter().enumerate() {
        texts.insert(10 + 20 * k, (p.to_string(), true));
    }
    for (k, d) in decoys.iter().enumerate() {
        texts.insert(5 + 30 * k, (d.to_string(), false));
    }

    let segments: Vec<TranscriptSegment> = texts
        .iter()
        .enumerate()
        .map(|(i, (t, _))| TranscriptSegment {
            role: if i % 2 == 0 { Role::Instructor } else { Role::Student },
            start_s: i as f64,
            end_s: i as f64 + 0.9,
            text: t.clone(),
            asr_confidence: 0.8,
        })
        .collect();
    let record = SessionRecord::new("planted", "math", "t", "s", texts.len() as f64, vec![], segments).unwrap();
    let detector = Detector::new(&bank, table.clone(), seg, DEFAULT_MAX_GAP);
    let hits = detector.detect(&record);

    let planted_idx: BTreeSet<usize> = texts.iter().enumerate().filter(|(_, t)| t.1).map(|(i, _)| i).collect();
    let hit_idx: BTreeSet<usize> = hits.iter().map(|h| h.segment_index).collect();
    let false_pos = hits.iter().filter(|h| !planted_idx.contains(&h.segment_index)).count();
    let all_confirmed = hits.iter().all(|h| h.verdict == Verdict::Confirmed);

    let surfaces: Vec<String> = detector.patterns().iter().map(|p| p.entry.surface.clone()).collect();
    let mut oracle_mismatch = 0;
    for (t, _) in &texts {
        let got: BTreeSet<_> = scan(t, detector.patterns(), &table)
            .into_iter()
            .map(|c| (c.pattern, c.span.start, c.span.end, c.channel, c.matched_text))
            .collect();
        if got != oracle_scan(t, &surfaces, &table, DEFAULT_MAX_GAP) {
            oracle_mismatch += 1;
        }
    }
    let suppressed = texts
        .iter()
        .enumerate()
        .flat_map(|(i, (t, _))| detector.judge_segment("planted", i, Role::Instructor, t))
        .filter(|h| h.verdict == Verdict::Suppressed)
        .count();
    let pass = hits.len() == 5 && hit_idx == planted_idx && false_pos == 0 && all_confirmed && oracle_mismatch == 0;
    outcome(
        pass,
        format!(
            "{} segments: {} confirmed, {false_pos} false positives, {suppressed} suppressed decoys, {oracle_mismatch} scan/oracle mismatches",
            texts.len(),
            hits.len()
        ),
    )
}

// ---------------------------------------------------------------- 6 ----

type Expansion = BTreeMap<String, (String, f64)>;

fn oracle_expand(seeds: &[String], table: &EmbeddingTable<f64>, k: usize, tau: f64) -> Expansion {
    let seed_set: BTreeSet<&str> = seeds.iter().map(String::as_str).collect();
    let mut out: Expansion = BTreeMap::new();
    for &seed in &seed_set {
        let Some(sv) = table.get(seed) else { continue };
        let sn = sv.iter().map(|x| x * x).sum::<f64>().sqrt();
        let mut cands: Vec<(f64, String)> = Vec::new();
        for (w, v) in table.iter() {
            if seed_set.contains(w) {
                continue;
            }
            let vn = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if vn == 0.0 || sn == 0.0 {
                continue;
            }
            let cos = (sv.iter().zip(v).map(|(a, b)| a * b).sum::<f64>() / (sn * vn)).clamp(-1.0, 1.0);
            if cos >= tau {
                cands.push((cos, w.to_string()));
            }
        }
        cands.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
        for (sim, w) in cands.into_iter().take(k) {
            match out.get(&w) {
                Some((_, cur)) if *cur >= sim => {}
                _ => {
                    out.insert(w, (seed.to_string(), sim));
                }
            }
        }
    }
    out
}

fn criterion_bank() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let ks = [0, 1, 3, 10];
    let taus = [-0.5, 0.0, 0.3, 0.6, 0.9];
    let mut mismatches = 0;
    let mut monotone_violations = 0;
    let mut checked = 0;
    for t in 0..12 {
        let v = if t == 0 { 1000 } else { rng.random_range(5..=1000) };
        let d = rng.random_range(2..=16);
        let mut table = EmbeddingTable::<f64>::new(d);
        for i in 0..v {
            let vec: Vec<f64> = if i % 97 == 13 {
                vec![0.0; d]
            } else {
                (0..d).map(|_| normal(&mut rng)).collect()
            };
            table.insert(format!("w{i:04}"), vec).unwrap();
        }
        let mut seeds: Vec<String> = (0..rng.random_range(1..=5)).map(|_| format!("w{:04}", rng.random_range(0..v))).collect();
        seeds.push("missing".into());
        for &k in &ks {
            let mut previous: Option<BTreeSet<String>> = None;
            for &tau in &taus {
                let bank = expand_seeds(&seeds, &table, k, tau).unwrap();
                let got: Expansion = bank
                    .entries
                    .iter()
                    .filter(|e| e.source == EntrySource::Expanded)
                    .map(|e| (e.surface.clone(), (e.seed_parent.clone().unwrap(), e.similarity)))
                    .collect();
                let want = oracle_expand(&seeds, &table, k, tau);
                let same = got.len() == want.len()
                    && got.iter().zip(&want).all(|((gw, (gp, gs)), (ww, (wp, ws)))| {
                        gw == ww && gp == wp && (gs - ws).abs() <= 1e-12
                    });
                if !same {
                    mismatches += 1;
                }
                let words: BTreeSet<String> = got.into_keys().collect();
                if let Some(prev) = &previous {
                    if !words.is_subset(prev) {
                        monotone_violations += 1;
                    }
                }
                previous = Some(words);
                checked += 1;
            }
        }
    }
    outcome(
        mismatches == 0 && monotone_violations == 0,
        format!("{checked} (table, k, tau) cases: {mismatches} oracle mismatches, {monotone_violations} tau-monotonicity violations"),
    )
}

// ---------------------------------------------------------------- 7 ----

fn criterion_metrics() -> Outcome {
    // Identity standardizer, weight 1: predicted good iff x >= 0.
    let model = LogisticModel {
        schema: vec!["energy_mean".into()],
        weights: vec![1.0],
        bias: 0.0,
        standardizer: Standardizer::identity(1),
        hyperparams: TrainConfig::default(),
        final_loss: 0.0,
    };
    let mut points = Vec::new();
    points.extend(std::iter::repeat_n((vec![1.0], true), 3)); // tp
    points.extend(std::iter::repeat_n((vec![1.0], false), 1)); // fp
    points.extend(std::iter::repeat_n((vec![-1.0], true), 2)); // fn
    points.extend(std::iter::repeat_n((vec![-1.0], false), 4)); // tn
    let r = evaluate(&model, &toy_dataset(&points, &["energy_mean"]), 0.5).unwrap();
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-4;
    let fixture = (r.tp, r.fp, r.fn_, r.tn) == (3, 1, 2, 4)
        && close(r.accuracy, 0.7)
        && close(r.precision, 0.75)
        && close(r.recall, 0.6)
        && close(r.f1, 0.6667);

    let none_predicted = evaluate(&model, &toy_dataset(&[(vec![-1.0], true), (vec![-1.0], false)], &["energy_mean"]), 0.5).unwrap();
    let zero_conv = none_predicted.precision == 0.0 && none_predicted.f1 == 0.0 && none_predicted.recall == 0.0;
    let no_positive = EvalReport::from_counts(0, 2, 0, 3, 0.5);
    let zero_conv = zero_conv && no_positive.recall == 0.0 && no_positive.f1 == 0.0;
    let perfect = EvalReport::from_counts(4, 0, 0, 6, 0.5);
    let perfect_ok = [perfect.accuracy, perfect.precision, perfect.recall, perfect.f1] == [1.0; 4];
    outcome(
        fixture && zero_conv && perfect_ok,
        format!(
            "3/1/2/4 -> {:.4} / {:.4} / {:.4} / {:.4}; zero denominators -> 0",
            r.accuracy, r.precision, r.recall, r.f1
        ),
    )
}

// ---------------------------------------------------------------- 8 ----

fn demo_pipeline(corpus: &demo::DemoCorpus) -> Pipeline {
    let seg = SegmentationLexicon::load(&corpus.segmentation).unwrap();
    Pipeline {
        detector: Detector::new(
            &classwatch_core::word_bank::BannedWordBank::load(&corpus.bank).unwrap(),
            PinyinTable::load(&corpus.pinyin).unwrap(),
            seg.clone(),
            DEFAULT_MAX_GAP,
        ),
        segmentation: seg,
        subjects: SubjectLexicon::load(&corpus.subjects).unwrap(),
        model: LogisticModel::load(&corpus.model).unwrap(),
        rule: AlertRule::default(),
        prosodic: ProsodicConfig::default(),
    }
}

fn verdict(alert_id: &str, judgment: Judgment, minute: u32) -> ReviewVerdict {
    ReviewVerdict {
        alert_id: alert_id.into(),
        reviewer_id: "ops-1".into(),
        judgment,
        note: String::new(),
        reviewed_at: Utc.with_ymd_and_hms(2024, 5, 1, 9, minute, 0).unwrap(),
    }
}

fn criterion_pipeline(dir: &Path) -> Outcome {
    let corpus = demo::write_corpus(dir, 12, &[2, 7, 10, 11]).unwrap();
    let log = dir.join("events.jsonl");
    let pipeline = demo_pipeline(&corpus);
    let fixed = Utc.with_ymd_and_hms(2024, 5, 1, 8, 0, 0).unwrap();
    let mut store = AlertStore::open(&log).unwrap().with_clock(move || fixed);

    for m in &corpus.manifests[..10] {
        pipeline.run_manifest(&mut store, m).unwrap();
    }
    let first_state = store.state().clone();
    let first_bytes = std::fs::read(&log).unwrap();
    for m in &corpus.manifests[..10] {
        pipeline.run_manifest(&mut store, m).unwrap();
    }
    let replayed = AlertStore::open(&log).unwrap();
    let identical = store.state() == &first_state
        && replayed.state() == &first_state
        && std::fs::read(&log).unwrap() == first_bytes;
    let alerts_after_ten = first_state.alerts(None).len();
    let banned_only = first_state.alerts(None).iter().all(|a| a.kind == AlertKind::BannedWord);

    for m in &corpus.manifests[10..] {
        pipeline.run_manifest(&mut store, m).unwrap();
    }
    let ids: Vec<String> = store.state().alerts(None).iter().map(|a| a.alert_id.clone()).collect();
    let judgments = [Judgment::TruePositive, Judgment::TruePositive, Judgment::FalsePositive, Judgment::TruePositive];
    for (i, (id, j)) in ids.iter().zip(judgments).enumerate() {
        store.record_verdict(verdict(id, j, i as u32)).unwrap();
    }
    drop(store);
    let report = AlertStore::open(&log).unwrap().alerting_accuracy().unwrap();
    let ratio = report.confirmed as f64 / (report.confirmed + report.dismissed) as f64;
    let pass = identical && alerts_after_ten == 2 && banned_only && ids.len() == 4 && report.accuracy == ratio && report.accuracy == 0.75;
    outcome(
        pass,
        format!(
            "10 sessions -> {alerts_after_ten} alerts, rerun identical: {identical}; after verdicts {}/{} -> accuracy {:.2}",
            report.confirmed,
            report.confirmed + report.dismissed,
            report.accuracy
        ),
    )
}

// ---------------------------------------------------------------- 9 ----

fn criterion_crash_replay(dir: &Path) -> Outcome {
    let log = dir.join("events.jsonl");
    let text = std::fs::read_to_string(&log).unwrap();
    let (events, _) = parse_log(&text).unwrap();
    let final_state = StoreState::fold(&events).unwrap();
    let mut bounds = vec![0];
    bounds.extend(text.match_indices('\n').map(|(i, _)| i + 1));

    let mut cuts: Vec<usize> = bounds.clone();
    for w in bounds.windows(2) {
        cuts.push((w[0] + w[1]) / 2);
        cuts.push(w[1] - 1);
    }
    let mut failures = 0;
    for (n, &cut) in cuts.iter().enumerate() {
        let mut cut = cut;
        while !text.is_char_boundary(cut) {
            cut -= 1;
        }
        let path = dir.join(format!("cut-{n}.jsonl"));
        std::fs::write(&path, &text[..cut]).unwrap();
        let store = AlertStore::open(&path).unwrap();
        let whole = bounds.iter().filter(|&&b| b <= cut).count() - 1;
        let prefix = StoreState::fold(&events[..whole]).unwrap();
        let complete_alerts = store.state().alerts(None).iter().all(|a| {
            final_state
                .alert(&a.alert_id)
                .is_some_and(|f| f.evidence == a.evidence && f.kind == a.kind && f.created_at == a.created_at)
        });
        let truncated = std::fs::metadata(&path).unwrap().len() as usize == bounds[whole];
        if store.state() != &prefix || !complete_alerts || !truncated {
            failures += 1;
        }
    }
    outcome(
        failures == 0,
        format!("{} truncation points over {} events, {failures} invalid prefixes", cuts.len(), events.len()),
    )
}

type Criterion = (&'static str, Duration, Box<dyn Fn() -> Outcome>);

fn main() {
    let dir = tempfile::tempdir().unwrap();
    let dir_path = dir.path().to_path_buf();
    let criteria: Vec<Criterion> = vec![
        ("MFCC matches naive DFT + DCT oracle", Duration::from_secs(60), Box::new(criterion_mfcc)),
        ("logistic gradient matches central differences", Duration::from_secs(10), Box::new(criterion_gradient)),
        ("separable 2-D data trains to >= 99%", Duration::from_secs(5), Box::new(criterion_separable)),
        ("combined features at least as good as either block", Duration::from_secs(120), Box::new(criterion_ablation)),
        ("planted banned words found exactly, decoys suppressed", Duration::from_secs(10), Box::new(criterion_detector)),
        ("bank expansion equals exhaustive neighbour scan", Duration::from_secs(30), Box::new(criterion_bank)),
        ("confusion-matrix metrics and zero-denominator rules", Duration::from_secs(5), Box::new(criterion_metrics)),
        ("pipeline rerun is idempotent; report accuracy", Duration::from_secs(60), {
            let d = dir_path.clone();
            Box::new(move || criterion_pipeline(&d))
        }),
        ("truncated event log replays to a valid prefix", Duration::from_secs(60), {
            let d = dir_path.clone();
            Box::new(move || criterion_crash_replay(&d))
        }),
    ];

    let mut failed = 0;
    for (i, (name, budget, check)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let result = check();
        let elapsed = started.elapsed();
        let pass = result.pass && elapsed <= *budget;
        if !pass {
            failed += 1;
        }
        println!(
            "[{}] {}. {name}: {} ({:.2}s, budget {}s)",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            result.detail,
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
