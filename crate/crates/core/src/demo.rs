//! A small synthetic corpus with every resource the pipeline needs.
//!
//! Audio is tone bursts, transcripts are canned classroom lines, and the
//! quality model has fixed weights rather than trained ones. It exists to
//! exercise the tooling end to end, not to say anything about real classes.

use std::f64::consts::TAU;
use std::io;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::detector::{annotate_bank, PinyinTable};
use crate::linguistic::LinguisticFeatures;
use crate::prosodic::{ProsodicFeatures, DEFAULT_N_COEFFS};
use crate::quality::{LogisticModel, Standardizer, TrainConfig};
use crate::session::{encode_wav, Manifest, Role, TrackRef, TranscriptSegment};
use crate::word_bank::BannedWordBank;

pub const PINYIN_TABLE: &str = "\
# character  tone-numbered reading(s)
笨 ben4
本 ben3
奔 ben1
蛋 dan4
但 dan4
单 dan1
淡 dan4
白 bai2
百 bai3
摆 bai3
痴 chi1
尺 chi3
吃 chi1
蠢 chun3
春 chun1
纯 chun2
货 huo4
或 huo4
火 huo3
";

pub const SEGMENTATION_LEXICON: &str = "\
# benign words; longer entries shield homophones inside them
本单元
本单位
百尺竿头
我们
今天
学习
数学
英语
题目
老师
同学
这个
问题
答案
很好
继续
一下
方程
练习
课文
句子
";

pub const SUBJECT_LEXICON: &str = r#"{
  "math": ["数学", "方程", "题目", "答案"],
  "english": ["英语", "课文", "句子"]
}"#;

pub const SEEDS: [&str; 3] = ["笨蛋", "白痴", "蠢货"];

const BENIGN_LINES: [(Role, &str); 8] = [
    (Role::Instructor, "同学们好，今天我们继续学习。"),
    (Role::Student, "老师好！"),
    (Role::Instructor, "这个方程怎么解？"),
    (Role::Student, "答案是三吗？"),
    (Role::Instructor, "很好，我们看一下练习题目。"),
    (Role::Student, "这个句子我不会读。"),
    (Role::Instructor, "没关系，跟我读一下课文。"),
    (Role::Student, "好的。"),
];

const PLANTED_LINES: [&str; 2] = ["你怎么这么笨蛋啊。", "你真是个白呀痴。"];

pub fn pinyin_table() -> PinyinTable {
    PinyinTable::parse(PINYIN_TABLE).expect("built-in pinyin table parses")
}

pub fn bank() -> BannedWordBank {
    let mut bank = BannedWordBank::from_seeds(SEEDS);
    annotate_bank(&mut bank, &pinyin_table());
    bank
}

/// Fixed-weight model over the combined schema. Probability rises with the
/// instructor's character share and talk ratio; typical demo sessions score
/// well above 0.5.
pub fn model() -> LogisticModel<f64> {
    let mut schema: Vec<String> = LinguisticFeatures::SCHEMA.iter().map(|s| s.to_string()).collect();
    schema.extend(ProsodicFeatures::<f64>::schema(DEFAULT_N_COEFFS));
    let mut weights = vec![0.0; schema.len()];
    let mut set = |name: &str, w: f64| {
        let i = schema.iter().position(|n| n == name).expect("known feature");
        weights[i] = w;
    };
    set("instructor_char_share", 2.0);
    set("talk_ratio", 1.0);
    set("question_count", 0.1);
    LogisticModel {
        standardizer: Standardizer::identity(schema.len()),
        schema,
        weights,
        bias: 0.5,
        hyperparams: TrainConfig::default(),
        final_loss: 0.0,
    }
}

/// Paths of a corpus written by [`write_corpus`].
#[derive(Debug, Clone)]
pub struct DemoCorpus {
    pub root: PathBuf,
    pub manifests: Vec<PathBuf>,
    /// Sessions carrying a planted banned word.
    pub planted: Vec<String>,
    pub bank: PathBuf,
    pub pinyin: PathBuf,
    pub segmentation: PathBuf,
    pub subjects: PathBuf,
    pub model: PathBuf,
}

pub fn session_id(i: usize) -> String {
    format!("demo-{i:03}")
}

/// Syllable-rate tone bursts with a little noise.
fn speech_like(rng: &mut ChaCha8Rng, rate: u32, seconds: f64, amplitude: f64) -> Vec<f64> {
    let n = (f64::from(rate) * seconds) as usize;
    let f0: f64 = rng.random_range(110.0..240.0);
    let syllable = (f64::from(rate) * 0.2) as usize;
    let mut out = Vec::with_capacity(n);
    let mut voiced = true;
    for i in 0..n {
        if i % syllable == 0 {
            voiced = rng.random_bool(0.7);
        }
        let t = i as f64 / f64::from(rate);
        let tone = if voiced {
            (1..=3)
                .map(|h| (TAU * f0 * h as f64 * t).sin() / h as f64)
                .sum::<f64>()
                * amplitude
                / 1.9
        } else {
            0.0
        };
        out.push(tone + rng.random_range(-1e-3..1e-3));
    }
    out
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> io::Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, bytes)
}

/// Writes `n_sessions` sessions plus resources under `dir`. Sessions whose
/// index is in `planted` get a banned word in one instructor line.
pub fn write_corpus(dir: &Path, n_sessions: usize, planted: &[usize]) -> io::Result<DemoCorpus> {
    let corpus = DemoCorpus {
        root: dir.to_path_buf(),
        manifests: Vec::new(),
        planted: Vec::new(),
        bank: dir.join("bank.json"),
        pinyin: dir.join("pinyin.txt"),
        segmentation: dir.join("segmentation.txt"),
        subjects: dir.join("subjects.json"),
        model: dir.join("model.json"),
    };
    write(&corpus.bank, bank().to_json())?;
    write(&corpus.pinyin, PINYIN_TABLE)?;
    write(&corpus.segmentation, SEGMENTATION_LEXICON)?;
    write(&corpus.subjects, SUBJECT_LEXICON)?;
    write(&corpus.model, model().to_json())?;

    let mut corpus = corpus;
    for i in 0..n_sessions {
        let id = session_id(i);
        let mut rng = ChaCha8Rng::seed_from_u64(i as u64);
        let rate = if i % 2 == 0 { 16_000 } else { 8_000 };
        let duration = 2.0;
        let session_dir = dir.join("sessions").join(&id);
        let mut tracks = Vec::new();
        for (role, amp) in [(Role::Instructor, 0.4), (Role::Student, 0.15)] {
            let name = format!("{role}.wav");
            let wav = encode_wav(&speech_like(&mut rng, rate, duration, amp), rate)
                .map_err(|e| io::Error::other(e.to_string()))?;
            write(&session_dir.join(&name), wav)?;
            tracks.push(TrackRef {
                role,
                wav_path: PathBuf::from(name),
            });
        }

        let mut lines: Vec<(Role, String)> = BENIGN_LINES
            .iter()
            .map(|&(r, t)| (r, t.to_string()))
            .collect();
        if let Some(k) = planted.iter().position(|&p| p == i) {
            lines[4] = (Role::Instructor, PLANTED_LINES[k % PLANTED_LINES.len()].to_string());
            corpus.planted.push(id.clone());
        }
        let step = duration / lines.len() as f64;
        let segments = lines
            .into_iter()
            .enumerate()
            .map(|(j, (role, text))| TranscriptSegment {
                role,
                start_s: j as f64 * step,
                end_s: (j as f64 + 0.9) * step,
                text,
                asr_confidence: 0.9,
            })
            .collect();

        let manifest = Manifest {
            session_id: id,
            subject: if i % 3 == 0 { "english" } else { "math" }.into(),
            instructor_id: format!("t{}", i % 4),
            student_id: format!("s{i}"),
            duration_s: duration,
            tracks,
            segments,
        };
        let path = session_dir.join("manifest.json");
        write(&path, serde_json::to_vec_pretty(&manifest).expect("manifest serializes"))?;
        corpus.manifests.push(path);
    }
    Ok(corpus)
}
