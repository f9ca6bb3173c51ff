//! Self-contained binary checkpoints.
//!
//! Layout: the magic `MOTO1\n`, a little-endian u64 count of tensor
//! sections, that many sections (u64 name length, UTF-8 name, u64 rank,
//! u64 dimensions, f64 little-endian values), then a trailer marked `META`
//! holding `key=value` lines — model geometry, label names, and all four
//! vocabularies — so a checkpoint plus the transliteration dictionaries is
//! everything evaluation needs.
//!
//! Tensor order and metadata key order are fixed, so saving an unchanged
//! model reproduces the file byte for byte.

use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::encode::Granularity;
use crate::error::{Error, Result};
use crate::model::{ModelConfig, ModelParams, StreamFlags};
use crate::tensor::Tensor;
use crate::vocab::Vocab;

const MAGIC: &[u8; 6] = b"MOTO1\n";
const META_MARK: &[u8; 4] = b"META";
const MAX_NAME: u64 = 4096;
const MAX_RANK: u64 = 8;
const MAX_ELEMENTS: u64 = 1 << 30;

/// Everything a checkpoint stores.
#[derive(Debug)]
pub struct Checkpoint {
    pub params: ModelParams,
    pub vocabs: [Vocab; 4],
    pub labels: Vec<String>,
    /// Caller-supplied `key=value` pairs carried verbatim through the
    /// metadata trailer, in their stored order.
    pub extras: Vec<(String, String)>,
}

pub fn save(
    path: &Path,
    params: &ModelParams,
    vocabs: &[Vocab; 4],
    labels: &[String],
    extras: &[(String, String)],
) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);

    w.write_all(MAGIC).map_err(io)?;
    let tensors = params.tensors();
    w.write_all(&(tensors.len() as u64).to_le_bytes())
        .map_err(io)?;
    for (name, t) in &tensors {
        w.write_all(&(name.len() as u64).to_le_bytes())
            .map_err(io)?;
        w.write_all(name.as_bytes()).map_err(io)?;
        w.write_all(&(t.rank() as u64).to_le_bytes()).map_err(io)?;
        for &d in t.shape() {
            w.write_all(&(d as u64).to_le_bytes()).map_err(io)?;
        }
        for &v in t.data() {
            w.write_all(&v.to_le_bytes()).map_err(io)?;
        }
    }

    let meta = render_meta(params, vocabs, labels, extras);
    w.write_all(META_MARK).map_err(io)?;
    w.write_all(&(meta.len() as u64).to_le_bytes())
        .map_err(io)?;
    w.write_all(meta.as_bytes()).map_err(io)?;
    w.flush().map_err(io)
}

pub fn load(path: &Path) -> Result<Checkpoint> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);

    let mut magic = [0u8; 6];
    read_exact(&mut r, &mut magic, path)?;
    if &magic != MAGIC {
        return Err(Error::Incompatible(format!(
            "{} is not a model checkpoint (bad magic)",
            path.display()
        )));
    }

    let count = read_u64(&mut r, path)?;
    if count > 1024 {
        return Err(Error::parse(
            path,
            0,
            format!("implausible tensor count {count}"),
        ));
    }
    let mut tensors: Vec<(String, Tensor)> = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let name_len = read_u64(&mut r, path)?;
        if name_len > MAX_NAME {
            return Err(Error::parse(path, 0, "tensor name too long"));
        }
        let mut name_buf = vec![0u8; name_len as usize];
        read_exact(&mut r, &mut name_buf, path)?;
        let name = String::from_utf8(name_buf)
            .map_err(|_| Error::parse(path, 0, "tensor name is not UTF-8"))?;
        let rank = read_u64(&mut r, path)?;
        if rank > MAX_RANK {
            return Err(Error::parse(path, 0, format!("implausible rank {rank}")));
        }
        let mut shape = Vec::with_capacity(rank as usize);
        let mut elements: u64 = 1;
        for _ in 0..rank {
            let d = read_u64(&mut r, path)?;
            elements = elements.saturating_mul(d.max(1));
            shape.push(d as usize);
        }
        if elements > MAX_ELEMENTS {
            return Err(Error::parse(path, 0, "tensor too large"));
        }
        let n: usize = shape.iter().product();
        let mut data = Vec::with_capacity(n);
        let mut buf = [0u8; 8];
        for _ in 0..n {
            read_exact(&mut r, &mut buf, path)?;
            let v = f64::from_le_bytes(buf);
            if !v.is_finite() {
                return Err(Error::parse(path, 0, format!("non-finite value in {name}")));
            }
            data.push(v);
        }
        tensors.push((name, Tensor::from_vec(shape, data)));
    }

    let mut mark = [0u8; 4];
    read_exact(&mut r, &mut mark, path)?;
    if &mark != META_MARK {
        return Err(Error::parse(path, 0, "missing metadata trailer"));
    }
    let meta_len = read_u64(&mut r, path)?;
    if meta_len > (1 << 26) {
        return Err(Error::parse(path, 0, "metadata too large"));
    }
    let mut meta_buf = vec![0u8; meta_len as usize];
    read_exact(&mut r, &mut meta_buf, path)?;
    let meta =
        String::from_utf8(meta_buf).map_err(|_| Error::parse(path, 0, "metadata is not UTF-8"))?;

    assemble(path, tensors, &meta)
}

// ---------------------------------------------------------------------------
// Metadata rendering and parsing

fn render_meta(
    params: &ModelParams,
    vocabs: &[Vocab; 4],
    labels: &[String],
    extras: &[(String, String)],
) -> String {
    let c = &params.config;
    let mut out = String::new();
    out.push_str(&format!("dim={}\n", c.dim));
    out.push_str(&format!("classes={}\n", c.classes));
    out.push_str(&format!("dropout={}\n", c.dropout));
    out.push_str(&format!("sigmoid_scores={}\n", c.sigmoid_scores));
    let aux: Vec<&str> = c.streams.aux().iter().map(|g| g.name()).collect();
    out.push_str(&format!("streams={}\n", aux.join(",")));
    out.push_str(&format!("downsample_target={}\n", c.downsample_target));
    out.push_str(&format!(
        "downsample_threshold={}\n",
        c.downsample_threshold
    ));
    let lens: Vec<String> = params.stream_lens.iter().map(|l| l.to_string()).collect();
    out.push_str(&format!("stream_lens={}\n", lens.join(",")));
    let esc_labels: Vec<String> = labels.iter().map(|l| escape(l)).collect();
    out.push_str(&format!("labels={}\n", esc_labels.join(",")));
    for g in Granularity::ALL {
        let toks: Vec<String> = vocabs[g.index()]
            .tokens()
            .iter()
            .map(|t| escape(t))
            .collect();
        out.push_str(&format!("vocab.{}={}\n", g.name(), toks.join(",")));
    }
    for (key, value) in extras {
        out.push_str(&format!("extra.{}={}\n", escape(key), escape(value)));
    }
    out
}

fn assemble(path: &Path, tensors: Vec<(String, Tensor)>, meta: &str) -> Result<Checkpoint> {
    let mut dim = None;
    let mut classes = None;
    let mut dropout = None;
    let mut sigmoid_scores = None;
    let mut streams = None;
    let mut downsample_target = None;
    let mut downsample_threshold = None;
    let mut stream_lens = None;
    let mut labels = None;
    let mut vocab_tokens: [Option<Vec<String>>; 4] = [None, None, None, None];
    let mut extras: Vec<(String, String)> = Vec::new();

    let bad = |msg: String| Error::parse(path, 0, msg);
    for line in meta.lines() {
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| bad(format!("metadata line without '=': {line:?}")))?;
        match key {
            "dim" => dim = Some(parse_num::<usize>(path, key, value)?),
            "classes" => classes = Some(parse_num::<usize>(path, key, value)?),
            "dropout" => dropout = Some(parse_num::<f64>(path, key, value)?),
            "sigmoid_scores" => sigmoid_scores = Some(parse_num::<bool>(path, key, value)?),
            "streams" => {
                let mut f = StreamFlags::none();
                for name in value.split(',').filter(|s| !s.is_empty()) {
                    match name {
                        "radical" => f.radical = true,
                        "wubi" => f.wubi = true,
                        "pinyin" => f.pinyin = true,
                        other => return Err(bad(format!("unknown stream {other:?}"))),
                    }
                }
                streams = Some(f);
            }
            "downsample_target" => downsample_target = Some(parse_num::<usize>(path, key, value)?),
            "downsample_threshold" => {
                downsample_threshold = Some(parse_num::<usize>(path, key, value)?)
            }
            "stream_lens" => {
                let lens: Vec<usize> = value
                    .split(',')
                    .map(|v| parse_num::<usize>(path, key, v))
                    .collect::<Result<_>>()?;
                if lens.len() != 4 {
                    return Err(bad(format!(
                        "expected 4 stream lengths, got {}",
                        lens.len()
                    )));
                }
                stream_lens = Some([lens[0], lens[1], lens[2], lens[3]]);
            }
            "labels" => {
                labels = Some(
                    value
                        .split(',')
                        .map(unescape)
                        .collect::<std::result::Result<Vec<_>, _>>()
                        .map_err(|e| bad(format!("labels: {e}")))?,
                );
            }
            _ => {
                if let Some(gname) = key.strip_prefix("vocab.") {
                    let g = granularity_by_name(gname)
                        .ok_or_else(|| bad(format!("unknown vocabulary {gname:?}")))?;
                    let toks = value
                        .split(',')
                        .map(unescape)
                        .collect::<std::result::Result<Vec<_>, _>>()
                        .map_err(|e| bad(format!("vocab.{gname}: {e}")))?;
                    vocab_tokens[g.index()] = Some(toks);
                } else if let Some(raw) = key.strip_prefix("extra.") {
                    let k = unescape(raw).map_err(|e| bad(format!("extra key: {e}")))?;
                    let v = unescape(value).map_err(|e| bad(format!("extra.{k}: {e}")))?;
                    extras.push((k, v));
                } else {
                    return Err(bad(format!("unknown metadata key {key:?}")));
                }
            }
        }
    }

    let missing = |what: &str| bad(format!("metadata is missing {what}"));
    let config = ModelConfig {
        dim: dim.ok_or_else(|| missing("dim"))?,
        classes: classes.ok_or_else(|| missing("classes"))?,
        streams: streams.ok_or_else(|| missing("streams"))?,
        dropout: dropout.ok_or_else(|| missing("dropout"))?,
        sigmoid_scores: sigmoid_scores.ok_or_else(|| missing("sigmoid_scores"))?,
        downsample_target: downsample_target.ok_or_else(|| missing("downsample_target"))?,
        downsample_threshold: downsample_threshold
            .ok_or_else(|| missing("downsample_threshold"))?,
    };
    let stream_lens = stream_lens.ok_or_else(|| missing("stream_lens"))?;
    let labels = labels.ok_or_else(|| missing("labels"))?;
    let mut vocabs_iter = vocab_tokens.into_iter().enumerate().map(|(gi, toks)| {
        let toks =
            toks.ok_or_else(|| missing(&format!("vocab.{}", Granularity::ALL[gi].name())))?;
        if toks.len() < 2
            || toks[0] != crate::vocab::PAD_TOKEN
            || toks[1] != crate::vocab::UNK_TOKEN
        {
            return Err(bad(format!(
                "vocab.{} does not start with the reserved tokens",
                Granularity::ALL[gi].name()
            )));
        }
        Ok(Vocab::from_tokens(toks))
    });
    let vocabs = [
        vocabs_iter.next().unwrap()?,
        vocabs_iter.next().unwrap()?,
        vocabs_iter.next().unwrap()?,
        vocabs_iter.next().unwrap()?,
    ];
    if labels.len() != config.classes {
        return Err(Error::Incompatible(format!(
            "{} labels but {} classes",
            labels.len(),
            config.classes
        )));
    }

    let params = assemble_params(path, config, stream_lens, &vocabs, tensors)?;
    Ok(Checkpoint {
        params,
        vocabs,
        labels,
        extras,
    })
}

/// Rebuilds `ModelParams` from named tensors, checking that exactly the
/// expected tensors are present with the expected shapes.
fn assemble_params(
    path: &Path,
    config: ModelConfig,
    stream_lens: [usize; 4],
    vocabs: &[Vocab; 4],
    tensors: Vec<(String, Tensor)>,
) -> Result<ModelParams> {
    use crate::neural::{BiLstmParams, Conv1dParams, EmbeddingTable, LstmParams};

    let mut iter = tensors.into_iter();
    let mut take = |want: &str, shape: Vec<usize>| -> Result<Tensor> {
        let (name, t) = iter.next().ok_or_else(|| {
            Error::Incompatible(format!("{}: missing tensor {want}", path.display()))
        })?;
        if name != want {
            return Err(Error::Incompatible(format!(
                "{}: expected tensor {want}, found {name}",
                path.display()
            )));
        }
        if t.shape() != shape.as_slice() {
            return Err(Error::Incompatible(format!(
                "{}: tensor {want} has shape {:?}, expected {:?}",
                path.display(),
                t.shape(),
                shape
            )));
        }
        Ok(t)
    };

    let d = config.dim;
    let h = config.hidden();
    let mut embeddings: [Option<EmbeddingTable>; 4] = [None, None, None, None];
    for g in config.streams.enabled() {
        let gi = g.index();
        let weights = take(&format!("embed.{}", g.name()), vec![vocabs[gi].len(), d])?;
        embeddings[gi] = Some(EmbeddingTable { weights });
    }
    let encoder = BiLstmParams {
        fwd: LstmParams {
            w: take("encoder.fwd.w", vec![d + h, 4 * h])?,
            b: take("encoder.fwd.b", vec![4 * h])?,
            hidden: h,
        },
        bwd: LstmParams {
            w: take("encoder.bwd.w", vec![d + h, 4 * h])?,
            b: take("encoder.bwd.b", vec![4 * h])?,
            hidden: h,
        },
    };
    let fusion = if config.streams.aux().is_empty() {
        None
    } else {
        Some(crate::fusion::FusionParams {
            w: take("fusion.w", vec![2 * d, d])?,
            b: take("fusion.b", vec![d])?,
        })
    };
    let mut downsamplers: [Option<Conv1dParams>; 4] = [None, None, None, None];
    for g in config.streams.enabled() {
        let gi = g.index();
        if stream_lens[gi] > config.downsample_threshold {
            let width = stream_lens[gi].div_ceil(config.downsample_target);
            downsamplers[gi] = Some(Conv1dParams {
                weight: take(
                    &format!("downsample.{}.weight", g.name()),
                    vec![width, d, d],
                )?,
                bias: take(&format!("downsample.{}.bias", g.name()), vec![d])?,
                pad: take(&format!("downsample.{}.pad", g.name()), vec![d])?,
            });
        }
    }
    let classifier = take("classifier.w", vec![config.feature_width(), config.classes])?;
    if let Some((name, _)) = iter.next() {
        return Err(Error::Incompatible(format!(
            "{}: unexpected extra tensor {name}",
            path.display()
        )));
    }
    Ok(ModelParams {
        config,
        stream_lens,
        embeddings,
        encoder,
        fusion,
        downsamplers,
        classifier,
    })
}

fn granularity_by_name(name: &str) -> Option<Granularity> {
    Granularity::ALL.into_iter().find(|g| g.name() == name)
}

fn parse_num<T: std::str::FromStr>(path: &Path, key: &str, value: &str) -> Result<T> {
    value
        .parse::<T>()
        .map_err(|_| Error::parse(path, 0, format!("bad value for {key}: {value:?}")))
}

// ---------------------------------------------------------------------------
// Value escaping: metadata values are comma-joined lists on single lines,
// so commas, equals signs, percent signs, whitespace, and control bytes are
// percent-encoded. Multi-byte UTF-8 passes through untouched.

fn must_escape(b: u8) -> bool {
    matches!(b, b'%' | b'=' | b',') || b.is_ascii_whitespace() || b.is_ascii_control()
}

fn escape(s: &str) -> String {
    let mut out = Vec::with_capacity(s.len());
    for &b in s.as_bytes() {
        if must_escape(b) {
            out.extend_from_slice(format!("%{b:02X}").as_bytes());
        } else {
            out.push(b);
        }
    }
    // Unescaped bytes are ASCII or intact multi-byte sequences, so the
    // result is still valid UTF-8.
    String::from_utf8(out).unwrap()
}

fn unescape(s: &str) -> std::result::Result<String, String> {
    let bytes = s.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'%' {
            if i + 3 > bytes.len() {
                return Err(format!("truncated escape in {s:?}"));
            }
            let hex = std::str::from_utf8(&bytes[i + 1..i + 3])
                .map_err(|_| format!("bad escape in {s:?}"))?;
            let b = u8::from_str_radix(hex, 16).map_err(|_| format!("bad escape in {s:?}"))?;
            out.push(b);
            i += 3;
        } else {
            out.push(bytes[i]);
            i += 1;
        }
    }
    String::from_utf8(out).map_err(|_| format!("escape does not decode to UTF-8 in {s:?}"))
}

fn read_u64(r: &mut impl Read, path: &Path) -> Result<u64> {
    let mut buf = [0u8; 8];
    read_exact(r, &mut buf, path)?;
    Ok(u64::from_le_bytes(buf))
}

fn read_exact(r: &mut impl Read, buf: &mut [u8], path: &Path) -> Result<()> {
    r.read_exact(buf).map_err(|e| Error::io(path, e))
}
