//! Canonical checkpoint serialization.
//!
//! A checkpoint is a text header (version, kind, shapes, flags, decimal
//! integers) followed by tensor payloads encoded as lowercase hexadecimal
//! IEEE-754 big-endian doubles, one line per tensor, and a trailing FNV-1a
//! checksum. Floats never pass through decimal text, so `save -> load ->
//! save` is byte-identical and every stored value round-trips bit-exactly.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::Tensor;
use crate::pipeline::{Bias, LayerSpec, NetworkSpec, ReadoutMode};
use crate::qann::{QcfsAnn, QcfsLayer};
use crate::tgim::TGimParams;

pub const FORMAT_VERSION: u32 = 1;

/// Either kind of trained model.
#[derive(Debug, Clone)]
pub enum Checkpoint {
    Snn(NetworkSpec),
    Ann(QcfsAnn),
}

/// Creation provenance carried in the header.
#[derive(Debug, Clone, Default)]
pub struct CheckpointMeta {
    pub seed: Option<u64>,
    pub command: Option<String>,
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

fn hex_line(values: &[f64]) -> String {
    let mut s = String::with_capacity(values.len() * 16);
    for v in values {
        for b in v.to_be_bytes() {
            let _ = write!(s, "{b:02x}");
        }
    }
    s
}

fn parse_hex_line(line: &str, expect: usize) -> Result<Vec<f64>> {
    let bytes = line.as_bytes();
    if bytes.len() != expect * 16 {
        return Err(Error::Checkpoint(format!(
            "payload length {} for {expect} doubles",
            bytes.len()
        )));
    }
    let mut out = Vec::with_capacity(expect);
    for chunk in bytes.chunks(16) {
        let mut raw = [0u8; 8];
        for (i, pair) in chunk.chunks(2).enumerate() {
            let hi = hex_digit(pair[0])?;
            let lo = hex_digit(pair[1])?;
            raw[i] = (hi << 4) | lo;
        }
        out.push(f64::from_be_bytes(raw));
    }
    Ok(out)
}

fn hex_digit(c: u8) -> Result<u8> {
    match c {
        b'0'..=b'9' => Ok(c - b'0'),
        b'a'..=b'f' => Ok(c - b'a' + 10),
        _ => Err(Error::Checkpoint(format!("bad hex digit {:?}", c as char))),
    }
}

fn push_tensor(out: &mut String, layer: &str, name: &str, rows: usize, cols: usize, data: &[f64]) {
    let _ = writeln!(out, "tensor {layer} {name} {rows} {cols}");
    out.push_str(&hex_line(data));
    out.push('\n');
}

/// Serialize to the canonical text form.
pub fn encode(checkpoint: &Checkpoint, meta: &CheckpointMeta) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "lmht-checkpoint v{FORMAT_VERSION}");
    match checkpoint {
        Checkpoint::Snn(net) => {
            let _ = writeln!(out, "kind snn");
            let _ = writeln!(out, "layers {}", net.layers.len());
            let _ = writeln!(out, "horizon {}", net.horizon);
            let _ = writeln!(out, "readout rate");
            if let Some(seed) = meta.seed {
                let _ = writeln!(out, "meta seed={seed}");
            }
            if let Some(cmd) = &meta.command {
                let _ = writeln!(out, "meta cmd={cmd}");
            }
            for (i, layer) in net.layers.iter().enumerate() {
                let bias_kind = match &layer.bias {
                    Bias::Shared(_) => "shared",
                    Bias::PerStep(_) => "perstep",
                };
                let tgim_kind = if layer.tgim.frozen { "frozen" } else { "logits" };
                let _ = writeln!(
                    out,
                    "layer {i} in={} out={} levels={} bias={bias_kind} tgim={tgim_kind} schedule={}",
                    layer.width_in(),
                    layer.width_out(),
                    layer.levels,
                    layer.leak_schedule.is_some() as u8
                );
            }
            for (i, layer) in net.layers.iter().enumerate() {
                let tag = i.to_string();
                push_tensor(
                    &mut out,
                    &tag,
                    "weights",
                    layer.width_out(),
                    layer.width_in(),
                    layer.weights.data(),
                );
                match &layer.bias {
                    Bias::Shared(b) => push_tensor(&mut out, &tag, "bias", 1, b.len(), b.data()),
                    Bias::PerStep(m) => {
                        push_tensor(&mut out, &tag, "bias", m.rows(), m.cols(), m.data())
                    }
                }
                push_tensor(&mut out, &tag, "theta", 1, 1, &[layer.threshold]);
                push_tensor(&mut out, &tag, "v0", 1, 1, &[layer.v0]);
                push_tensor(
                    &mut out,
                    &tag,
                    "tgim_omega",
                    layer.tgim.raw_omega.rows(),
                    layer.tgim.raw_omega.cols(),
                    layer.tgim.raw_omega.data(),
                );
                push_tensor(&mut out, &tag, "tgim_leak", 1, 1, &[layer.tgim.raw_leak]);
                if let Some(s) = &layer.leak_schedule {
                    push_tensor(&mut out, &tag, "leak_schedule", 1, s.len(), s);
                }
            }
            push_tensor(&mut out, "net", "input_gain", 1, 1, &[net.input_gain]);
        }
        Checkpoint::Ann(ann) => {
            let _ = writeln!(out, "kind ann");
            let _ = writeln!(out, "layers {}", ann.layers.len());
            let _ = writeln!(out, "tq {}", ann.t_q);
            if let Some(seed) = meta.seed {
                let _ = writeln!(out, "meta seed={seed}");
            }
            if let Some(cmd) = &meta.command {
                let _ = writeln!(out, "meta cmd={cmd}");
            }
            for (i, layer) in ann.layers.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "layer {i} in={} out={}",
                    layer.weights.cols(),
                    layer.weights.rows()
                );
            }
            for (i, layer) in ann.layers.iter().enumerate() {
                let tag = i.to_string();
                push_tensor(
                    &mut out,
                    &tag,
                    "weights",
                    layer.weights.rows(),
                    layer.weights.cols(),
                    layer.weights.data(),
                );
                push_tensor(&mut out, &tag, "bias", 1, layer.bias.len(), layer.bias.data());
                push_tensor(&mut out, &tag, "vartheta", 1, 1, &[layer.vartheta]);
            }
        }
    }
    let _ = writeln!(out, "checksum fnv1a {:016x}", fnv1a(out.as_bytes()));
    out
}

struct Lines<'a> {
    iter: std::str::Lines<'a>,
    no: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<&'a str> {
        self.no += 1;
        self.iter
            .next()
            .ok_or_else(|| Error::Checkpoint(format!("truncated at line {}", self.no)))
    }
}

fn parse_kv(field: &str, key: &str) -> Result<String> {
    field
        .strip_prefix(key)
        .and_then(|s| s.strip_prefix('='))
        .map(str::to_string)
        .ok_or_else(|| Error::Checkpoint(format!("expected {key}=..., got {field:?}")))
}

fn read_tensor(lines: &mut Lines, layer: &str, name: &str) -> Result<(usize, usize, Vec<f64>)> {
    let header = lines.next()?;
    let parts: Vec<&str> = header.split(' ').collect();
    if parts.len() != 5 || parts[0] != "tensor" || parts[1] != layer || parts[2] != name {
        return Err(Error::Checkpoint(format!(
            "expected tensor {layer} {name}, got {header:?}"
        )));
    }
    let rows: usize = parts[3]
        .parse()
        .map_err(|_| Error::Checkpoint("bad tensor rows".into()))?;
    let cols: usize = parts[4]
        .parse()
        .map_err(|_| Error::Checkpoint("bad tensor cols".into()))?;
    let data = parse_hex_line(lines.next()?, rows * cols)?;
    Ok((rows, cols, data))
}

/// Parse the canonical text form, verifying the checksum.
pub fn decode(text: &str) -> Result<(Checkpoint, CheckpointMeta)> {
    let checksum_at = text
        .rfind("checksum fnv1a ")
        .ok_or_else(|| Error::Checkpoint("missing checksum (truncated file?)".into()))?;
    let body = &text[..checksum_at];
    let stored = text[checksum_at..]
        .trim_end()
        .strip_prefix("checksum fnv1a ")
        .expect("found above");
    let computed = format!("{:016x}", fnv1a(body.as_bytes()));
    if stored != computed {
        return Err(Error::Checkpoint(format!(
            "checksum mismatch: stored {stored}, computed {computed}"
        )));
    }

    let mut lines = Lines {
        iter: body.lines(),
        no: 0,
    };
    let version = lines.next()?;
    if version != format!("lmht-checkpoint v{FORMAT_VERSION}") {
        return Err(Error::Checkpoint(format!(
            "unsupported version line {version:?}"
        )));
    }
    let kind = lines.next()?;
    let mut meta = CheckpointMeta::default();

    match kind {
        "kind snn" => {
            let n_layers: usize = parse_kv(&lines.next()?.replace(' ', "="), "layers")?
                .parse()
                .map_err(|_| Error::Checkpoint("bad layer count".into()))?;
            let horizon: usize = parse_kv(&lines.next()?.replace(' ', "="), "horizon")?
                .parse()
                .map_err(|_| Error::Checkpoint("bad horizon".into()))?;
            let readout = lines.next()?;
            if readout != "readout rate" {
                return Err(Error::Checkpoint(format!("unknown readout {readout:?}")));
            }

            // Optional meta lines, then per-layer headers.
            let mut headers = Vec::with_capacity(n_layers);
            while headers.len() < n_layers {
                let line = lines.next()?;
                if let Some(rest) = line.strip_prefix("meta ") {
                    apply_meta(&mut meta, rest);
                } else if line.starts_with("layer ") {
                    headers.push(parse_layer_header(line)?);
                } else {
                    return Err(Error::Checkpoint(format!("unexpected line {line:?}")));
                }
            }

            let mut layers = Vec::with_capacity(n_layers);
            for (i, h) in headers.iter().enumerate() {
                let tag = i.to_string();
                let (rows, cols, w) = read_tensor(&mut lines, &tag, "weights")?;
                if rows != h.out || cols != h.inp {
                    return Err(Error::Checkpoint(format!("layer {i} weight shape")));
                }
                let (brows, bcols, b) = read_tensor(&mut lines, &tag, "bias")?;
                let bias = if h.bias_shared {
                    if brows != 1 || bcols != h.out {
                        return Err(Error::Checkpoint(format!("layer {i} bias shape")));
                    }
                    Bias::Shared(Tensor::new(vec![bcols], b)?)
                } else {
                    if brows != horizon || bcols != h.out {
                        return Err(Error::Checkpoint(format!("layer {i} bias shape")));
                    }
                    Bias::PerStep(Tensor::new(vec![brows, bcols], b)?)
                };
                let (_, _, theta) = read_tensor(&mut lines, &tag, "theta")?;
                let (_, _, v0) = read_tensor(&mut lines, &tag, "v0")?;
                let (orows, ocols, omega) = read_tensor(&mut lines, &tag, "tgim_omega")?;
                if orows != horizon || ocols != horizon {
                    return Err(Error::Checkpoint(format!("layer {i} mixing shape")));
                }
                let (_, _, leak) = read_tensor(&mut lines, &tag, "tgim_leak")?;
                let schedule = if h.schedule {
                    let (_, scols, s) = read_tensor(&mut lines, &tag, "leak_schedule")?;
                    if scols != horizon {
                        return Err(Error::Checkpoint(format!("layer {i} schedule length")));
                    }
                    Some(s)
                } else {
                    None
                };
                layers.push(LayerSpec {
                    weights: Tensor::new(vec![rows, cols], w)?,
                    bias,
                    threshold: theta[0],
                    levels: h.levels,
                    v0: v0[0],
                    tgim: TGimParams {
                        raw_omega: Tensor::new(vec![orows, ocols], omega)?,
                        raw_leak: leak[0],
                        time_steps: horizon,
                        frozen: h.frozen,
                    },
                    leak_schedule: schedule,
                });
            }
            let (_, _, gain) = read_tensor(&mut lines, "net", "input_gain")?;
            let net = NetworkSpec {
                layers,
                horizon,
                input_gain: gain[0],
                readout: ReadoutMode::Rate,
            };
            net.validate()?;
            Ok((Checkpoint::Snn(net), meta))
        }
        "kind ann" => {
            let n_layers: usize = parse_kv(&lines.next()?.replace(' ', "="), "layers")?
                .parse()
                .map_err(|_| Error::Checkpoint("bad layer count".into()))?;
            let t_q: u32 = parse_kv(&lines.next()?.replace(' ', "="), "tq")?
                .parse()
                .map_err(|_| Error::Checkpoint("bad tq".into()))?;
            let mut headers = Vec::with_capacity(n_layers);
            while headers.len() < n_layers {
                let line = lines.next()?;
                if let Some(rest) = line.strip_prefix("meta ") {
                    apply_meta(&mut meta, rest);
                } else if line.starts_with("layer ") {
                    let parts: Vec<&str> = line.split(' ').collect();
                    if parts.len() != 4 {
                        return Err(Error::Checkpoint(format!("bad layer line {line:?}")));
                    }
                    let inp: usize = parse_kv(parts[2], "in")?
                        .parse()
                        .map_err(|_| Error::Checkpoint("bad in width".into()))?;
                    let out: usize = parse_kv(parts[3], "out")?
                        .parse()
                        .map_err(|_| Error::Checkpoint("bad out width".into()))?;
                    headers.push((inp, out));
                } else {
                    return Err(Error::Checkpoint(format!("unexpected line {line:?}")));
                }
            }
            let mut layers = Vec::with_capacity(n_layers);
            for (i, &(inp, out)) in headers.iter().enumerate() {
                let tag = i.to_string();
                let (rows, cols, w) = read_tensor(&mut lines, &tag, "weights")?;
                if rows != out || cols != inp {
                    return Err(Error::Checkpoint(format!("layer {i} weight shape")));
                }
                let (_, bcols, b) = read_tensor(&mut lines, &tag, "bias")?;
                if bcols != out {
                    return Err(Error::Checkpoint(format!("layer {i} bias shape")));
                }
                let (_, _, vartheta) = read_tensor(&mut lines, &tag, "vartheta")?;
                layers.push(QcfsLayer {
                    weights: Tensor::new(vec![rows, cols], w)?,
                    bias: Tensor::new(vec![bcols], b)?,
                    vartheta: vartheta[0],
                });
            }
            Ok((Checkpoint::Ann(QcfsAnn { layers, t_q }), meta))
        }
        other => Err(Error::Checkpoint(format!("unknown kind line {other:?}"))),
    }
}

struct LayerHeader {
    inp: usize,
    out: usize,
    levels: u32,
    bias_shared: bool,
    frozen: bool,
    schedule: bool,
}

fn parse_layer_header(line: &str) -> Result<LayerHeader> {
    let parts: Vec<&str> = line.split(' ').collect();
    if parts.len() != 8 {
        return Err(Error::Checkpoint(format!("bad layer line {line:?}")));
    }
    let bad = |what: &str| Error::Checkpoint(format!("bad {what} in {line:?}"));
    Ok(LayerHeader {
        inp: parse_kv(parts[2], "in")?.parse().map_err(|_| bad("in"))?,
        out: parse_kv(parts[3], "out")?.parse().map_err(|_| bad("out"))?,
        levels: parse_kv(parts[4], "levels")?
            .parse()
            .map_err(|_| bad("levels"))?,
        bias_shared: parse_kv(parts[5], "bias")? == "shared",
        frozen: parse_kv(parts[6], "tgim")? == "frozen",
        schedule: parse_kv(parts[7], "schedule")? == "1",
    })
}

fn apply_meta(meta: &mut CheckpointMeta, rest: &str) {
    if let Some(seed) = rest.strip_prefix("seed=") {
        meta.seed = seed.parse().ok();
    } else if let Some(cmd) = rest.strip_prefix("cmd=") {
        meta.command = Some(cmd.to_string());
    }
}

/// Write a checkpoint file.
pub fn save_checkpoint(
    path: impl AsRef<Path>,
    checkpoint: &Checkpoint,
    meta: &CheckpointMeta,
) -> Result<()> {
    std::fs::write(path, encode(checkpoint, meta))?;
    Ok(())
}

/// Read and verify a checkpoint file.
pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(Checkpoint, CheckpointMeta)> {
    let text = std::fs::read_to_string(path)?;
    decode(&text)
}
