//! Fixture generators, brute-force oracles and a scripted HTTP server shared
//! by the integration tests and the acceptance run.
#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use bitext_forge::tokenization::tokenize;
use bitext_forge::LanguageTag;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

const ONSETS: &[&str] = &[
    "b", "c", "d", "đ", "g", "h", "k", "l", "m", "n", "ph", "t", "th", "tr", "v", "x", "s", "r",
    "ng", "nh",
];
const VOWELS: &[&str] = &[
    "à", "á", "ả", "ã", "ạ", "ê", "ế", "ề", "ô", "ố", "ồ", "ơ", "ớ", "ư", "ừ", "ă", "â", "ì", "í",
    "ò", "ó", "ù", "ú", "ý",
];
const CODAS: &[&str] = &["", "n", "ng", "t", "m", "c"];

/// `n` distinct Vietnamese syllables, each carrying a diacritic.
pub fn vi_vocab(n: usize) -> Vec<String> {
    let mut out = Vec::with_capacity(n);
    'outer: for coda in CODAS {
        for vowel in VOWELS {
            for onset in ONSETS {
                if out.len() == n {
                    break 'outer;
                }
                out.push(format!("{onset}{vowel}{coda}"));
            }
        }
    }
    assert_eq!(out.len(), n, "at most {} syllables", ONSETS.len() * VOWELS.len() * CODAS.len());
    out
}

/// `n` distinct CJK ideographs.
pub fn zh_vocab(n: usize) -> Vec<String> {
    (0..n as u32)
        .map(|i| char::from_u32(0x4E00 + i).unwrap().to_string())
        .collect()
}

pub fn vocab(lang: LanguageTag, n: usize) -> Vec<String> {
    match lang {
        LanguageTag::Zh => zh_vocab(n),
        _ => vi_vocab(n),
    }
}

/// Joins words the way each language is written.
pub fn join(lang: LanguageTag, words: &[&str]) -> String {
    match lang {
        LanguageTag::Zh => words.concat(),
        _ => words.join(" "),
    }
}

/// Zipf-ish draw: low ranks are much more frequent.
pub fn draw<'a, R: Rng>(rng: &mut R, vocab: &'a [String]) -> &'a str {
    let u: f64 = rng.random();
    let idx = ((vocab.len() as f64).powf(u) - 1.0) as usize;
    &vocab[idx.min(vocab.len() - 1)]
}

pub fn sentence<R: Rng>(rng: &mut R, lang: LanguageTag, vocab: &[String], len: usize) -> String {
    let words: Vec<&str> = (0..len).map(|_| draw(rng, vocab)).collect();
    join(lang, &words)
}

pub fn corpus<R: Rng>(
    rng: &mut R,
    lang: LanguageTag,
    vocab: &[String],
    n: usize,
    len: std::ops::RangeInclusive<usize>,
) -> Vec<String> {
    (0..n)
        .map(|_| {
            let l = rng.random_range(len.clone());
            sentence(rng, lang, vocab, l)
        })
        .collect()
}

pub fn write_lines(path: &std::path::Path, lines: &[String]) {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path).unwrap());
    for l in lines {
        writeln!(f, "{l}").unwrap();
    }
    f.flush().unwrap();
}

/// TF-IDF over string keys with explicit loops, summing in sorted term
/// order so equal bags of words always give bit-equal results.
pub struct NaiveTfIdf {
    pub lang: LanguageTag,
    pub n_docs: u64,
    pub df: HashMap<String, u64>,
}

fn terms(text: &str, lang: LanguageTag) -> Vec<String> {
    tokenize(text, lang).into_iter().map(|t| t.text).collect()
}

impl NaiveTfIdf {
    pub fn build(docs: &[String], lang: LanguageTag) -> Self {
        let mut df: HashMap<String, u64> = HashMap::new();
        for d in docs {
            let mut seen: Vec<String> = Vec::new();
            for t in terms(d, lang) {
                if !seen.contains(&t) {
                    seen.push(t);
                }
            }
            for t in seen {
                *df.entry(t).or_insert(0) += 1;
            }
        }
        NaiveTfIdf {
            lang,
            n_docs: docs.len() as u64,
            df,
        }
    }

    pub fn vector(&self, text: &str) -> BTreeMap<String, f64> {
        let mut tf: BTreeMap<String, f64> = BTreeMap::new();
        for t in terms(text, self.lang) {
            if self.df.contains_key(&t) {
                *tf.entry(t).or_insert(0.0) += 1.0;
            }
        }
        let mut v = BTreeMap::new();
        for (t, c) in tf {
            let w = c * (self.n_docs as f64 / self.df[&t] as f64).ln();
            if w != 0.0 {
                v.insert(t, w);
            }
        }
        v
    }

    pub fn centroid(&self, docs: &[String]) -> BTreeMap<String, f64> {
        let mut sum: BTreeMap<String, f64> = BTreeMap::new();
        let mut counted = 0.0;
        for d in docs {
            let v = self.vector(d);
            let n = norm(&v);
            if n == 0.0 {
                continue;
            }
            counted += 1.0;
            for (t, w) in v {
                *sum.entry(t).or_insert(0.0) += w / n;
            }
        }
        sum.into_iter().map(|(t, w)| (t, w / counted)).collect()
    }

    /// Dedup by text (first copy wins), score everything, sort, truncate.
    pub fn select(&self, mono: &[String], centroid: &BTreeMap<String, f64>, k: usize) -> Vec<(u64, f64)> {
        let mut seen = HashSet::new();
        let mut all = Vec::new();
        for (id, text) in mono.iter().enumerate() {
            if seen.insert(text.clone()) {
                all.push((id as u64, cosine(&self.vector(text), centroid)));
            }
        }
        all.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        all.truncate(k);
        all
    }
}

pub fn norm(v: &BTreeMap<String, f64>) -> f64 {
    v.values().map(|w| w * w).sum::<f64>().sqrt()
}

pub fn cosine(a: &BTreeMap<String, f64>, b: &BTreeMap<String, f64>) -> f64 {
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    let mut dot = 0.0;
    for (t, w) in a {
        if let Some(x) = b.get(t) {
            dot += w * x;
        }
    }
    (dot / (na * nb)).clamp(0.0, 1.0)
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    a == b || (a - b).abs() <= tol * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// Corpus BLEU-4 straight from the definition: n-grams as owned vectors,
/// counts by linear search, no smoothing.
pub fn naive_bleu(hyps: &[Vec<String>], refs: &[Vec<String>]) -> (f64, [u64; 4], [u64; 4]) {
    let mut matched = [0u64; 4];
    let mut total = [0u64; 4];
    let (mut hl, mut rl) = (0u64, 0u64);
    for (h, r) in hyps.iter().zip(refs) {
        hl += h.len() as u64;
        rl += r.len() as u64;
        for n in 1..=4 {
            let grams = |s: &[String]| -> Vec<Vec<String>> {
                if s.len() < n {
                    return vec![];
                }
                (0..=s.len() - n).map(|i| s[i..i + n].to_vec()).collect()
            };
            let hg = grams(h);
            let rg = grams(r);
            total[n - 1] += hg.len() as u64;
            let mut distinct: Vec<Vec<String>> = Vec::new();
            for g in &hg {
                if !distinct.contains(g) {
                    distinct.push(g.clone());
                }
            }
            for g in distinct {
                let ch = hg.iter().filter(|x| **x == g).count() as u64;
                let cr = rg.iter().filter(|x| **x == g).count() as u64;
                matched[n - 1] += ch.min(cr);
            }
        }
    }
    if hl == 0 || matched.iter().any(|&m| m == 0) {
        return (0.0, matched, total);
    }
    let log_mean: f64 = (0..4)
        .map(|i| (matched[i] as f64 / total[i] as f64).ln())
        .sum::<f64>()
        / 4.0;
    let bp = if hl >= rl { 1.0 } else { (1.0 - rl as f64 / hl as f64).exp() };
    (100.0 * bp * log_mean.exp(), matched, total)
}

/// What the scripted server sends back for one request.
pub struct Reply {
    pub status: u16,
    pub body: String,
}

impl Reply {
    pub fn translations(texts: &[String]) -> Reply {
        Reply {
            status: 200,
            body: serde_json::json!({ "translations": texts }).to_string(),
        }
    }

    pub fn error(status: u16) -> Reply {
        Reply {
            status,
            body: "{\"error\":\"scripted failure\"}".into(),
        }
    }
}

pub struct Request {
    pub call: usize,
    pub path: String,
    pub authorization: Option<String>,
    pub src_lang: String,
    pub tgt_lang: String,
    pub texts: Vec<String>,
}

type Script = dyn Fn(&Request) -> Reply + Send + Sync;

/// One-request-per-connection HTTP/1.1 server on a background thread.
pub struct MockServer {
    pub url: String,
    pub calls: Arc<AtomicUsize>,
    pub seen: Arc<Mutex<Vec<Request>>>,
    _thread: JoinHandle<()>,
}

impl MockServer {
    pub fn start(script: impl Fn(&Request) -> Reply + Send + Sync + 'static) -> MockServer {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}", listener.local_addr().unwrap());
        let calls = Arc::new(AtomicUsize::new(0));
        let seen = Arc::new(Mutex::new(Vec::new()));
        let script: Arc<Script> = Arc::new(script);
        let (c, s) = (Arc::clone(&calls), Arc::clone(&seen));
        let thread = std::thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(stream) = stream else { continue };
                let (c, s, script) = (Arc::clone(&c), Arc::clone(&s), Arc::clone(&script));
                std::thread::spawn(move || serve(stream, &c, &s, script.as_ref()));
            }
        });
        MockServer {
            url,
            calls,
            seen,
            _thread: thread,
        }
    }

    /// Texts of every request received, in arrival order.
    pub fn requests(&self) -> Vec<Vec<String>> {
        self.seen.lock().unwrap().iter().map(|r| r.texts.clone()).collect()
    }
}

fn serve(stream: TcpStream, calls: &AtomicUsize, seen: &Mutex<Vec<Request>>, script: &Script) {
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut line = String::new();
    if reader.read_line(&mut line).unwrap_or(0) == 0 {
        return;
    }
    let path = line.split_whitespace().nth(1).unwrap_or("").to_string();
    let mut length = 0usize;
    let mut chunked = false;
    let mut authorization = None;
    loop {
        let mut h = String::new();
        reader.read_line(&mut h).unwrap();
        let h = h.trim_end();
        if h.is_empty() {
            break;
        }
        let (name, value) = h.split_once(':').unwrap();
        let value = value.trim();
        match name.to_ascii_lowercase().as_str() {
            "content-length" => length = value.parse().unwrap(),
            "transfer-encoding" => chunked = value.eq_ignore_ascii_case("chunked"),
            "authorization" => authorization = Some(value.to_string()),
            _ => {}
        }
    }
    let mut body = Vec::new();
    if chunked {
        loop {
            let mut size = String::new();
            reader.read_line(&mut size).unwrap();
            let n = usize::from_str_radix(size.trim(), 16).unwrap();
            let mut chunk = vec![0; n + 2];
            reader.read_exact(&mut chunk).unwrap();
            if n == 0 {
                break;
            }
            body.extend_from_slice(&chunk[..n]);
        }
    } else {
        body.resize(length, 0);
        reader.read_exact(&mut body).unwrap();
    }
    let json: serde_json::Value = serde_json::from_slice(&body).unwrap();
    let request = Request {
        call: calls.fetch_add(1, Ordering::SeqCst),
        path,
        authorization,
        src_lang: json["src_lang"].as_str().unwrap_or_default().to_string(),
        tgt_lang: json["tgt_lang"].as_str().unwrap_or_default().to_string(),
        texts: json["texts"]
            .as_array()
            .map(|a| a.iter().map(|t| t.as_str().unwrap().to_string()).collect())
            .unwrap_or_default(),
    };
    let reply = script(&request);
    seen.lock().unwrap().push(request);
    let mut out = stream;
    let msg = format!(
        "HTTP/1.1 {} Scripted\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
        reply.status,
        reply.body.len(),
        reply.body
    );
    let _ = out.write_all(msg.as_bytes());
    let _ = out.flush();
}

/// A small run directory: bitext `train.{vi,zh}`, raw `mono.zh` with some
/// noise, a zh->vi token dictionary, and `config.json` pointing at them.
pub struct PipelineFixture {
    pub dir: std::path::PathBuf,
    pub config: std::path::PathBuf,
}

pub fn pipeline_fixture(
    dir: &std::path::Path,
    n_bitext: usize,
    n_mono: usize,
    k: usize,
    extra_config: &str,
) -> PipelineFixture {
    let mut r = rng(2024);
    let vi = vi_vocab(600);
    let zh = zh_vocab(600);
    let src: Vec<String> = corpus(&mut r, LanguageTag::Vi, &vi, n_bitext, 3..=14);
    let tgt: Vec<String> = corpus(&mut r, LanguageTag::Zh, &zh[..300], n_bitext, 3..=14);
    let mut mono = Vec::with_capacity(n_mono);
    for i in 0..n_mono {
        let line = match i % 20 {
            0 => format!("<p>{}</p>", sentence(&mut r, LanguageTag::Zh, &zh, 6)),
            1 => sentence(&mut r, LanguageTag::Vi, &vi, 6),
            2 => draw(&mut r, &zh).to_string(),
            3..=9 => sentence(&mut r, LanguageTag::Zh, &zh[300..], 8),
            _ => {
                let len = r.random_range(3..=16);
                sentence(&mut r, LanguageTag::Zh, &zh[..300], len)
            }
        };
        mono.push(line);
    }
    write_lines(&dir.join("train.vi"), &src);
    write_lines(&dir.join("train.zh"), &tgt);
    write_lines(&dir.join("mono.zh"), &mono);
    let dict: Vec<String> = zh.iter().zip(&vi).map(|(z, v)| format!("{z}\t{v}")).collect();
    write_lines(&dir.join("dict.tsv"), &dict);
    let config = dir.join("config.json");
    std::fs::write(
        &config,
        format!(
            r#"{{
  "paths": {{"parallel": "train", "monolingual": {{"zh": "mono.zh"}}, "output_dir": "run"}},
  "selection": {{"k": {k}}},
  "synthesis": {{"backend": {{"kind": "dictionary", "dictionary": "dict.tsv"}}, "direction": "zh-vi", "retry_backoff_ms": 0}}{extra_config}
}}"#
        ),
    )
    .unwrap();
    PipelineFixture {
        dir: dir.to_path_buf(),
        config,
    }
}
