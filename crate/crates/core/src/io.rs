//! File formats for traces and attention matrices.
//!
//! Binary trace layout: one ASCII header line
//!
//! ```text
//! FILT3R-TRACE v1 generator=<id> seed=<u64> frames=<T> tokens=<N> dim=<D> image_tokens=<K> transitions=<f1,f2,..|->
//! ```
//!
//! followed by little-endian `f64` blocks, all row-major: true latents
//! (`T*N*D`), candidates (`T*N*D`), then attention (`T*N*K`, absent when
//! `K = 0`).
//!
//! Binary matrix layout: `FILT3R-MATRIX v1 rows=<R> cols=<C>` newline, then
//! `R*C` little-endian `f64`. CSV matrices have one row per line; blank
//! lines and lines starting with `#` are skipped.

use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::noise::AttentionSummary;
use crate::sim::StreamTrace;
use crate::TokenMatrix;

const TRACE_MAGIC: &str = "FILT3R-TRACE v1";
const MATRIX_MAGIC: &str = "FILT3R-MATRIX v1";

fn bad(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}

fn write_f64s<W: Write>(out: &mut W, values: &[f64]) -> std::io::Result<()> {
    for v in values {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_f64s<R: Read>(input: &mut R, count: usize) -> Result<Vec<f64>> {
    let mut buf = vec![0u8; count * 8];
    input
        .read_exact(&mut buf)
        .map_err(|e| bad(format!("truncated data block: {e}")))?;
    Ok(buf
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().expect("8-byte chunk")))
        .collect())
}

pub fn write_trace<W: Write>(trace: &StreamTrace, out: &mut W) -> std::io::Result<()> {
    let (n, d) = trace.shape();
    let k = trace
        .attention
        .as_ref()
        .and_then(|a| a.first())
        .map_or(0, AttentionSummary::n_image_tokens);
    let transitions = if trace.transition_frames.is_empty() {
        "-".to_string()
    } else {
        trace
            .transition_frames
            .iter()
            .map(u64::to_string)
            .collect::<Vec<_>>()
            .join(",")
    };
    writeln!(
        out,
        "{TRACE_MAGIC} generator={} seed={} frames={} tokens={n} dim={d} image_tokens={k} transitions={transitions}",
        trace.generator,
        trace.seed,
        trace.len()
    )?;
    for m in &trace.true_latents {
        write_f64s(out, m.as_slice())?;
    }
    for m in &trace.candidates {
        write_f64s(out, m.as_slice())?;
    }
    if let Some(att) = &trace.attention {
        for a in att {
            write_f64s(out, a.as_slice())?;
        }
    }
    Ok(())
}

fn header_fields<'a>(line: &'a str, magic: &str) -> Result<HashMap<&'a str, &'a str>> {
    let rest = line
        .strip_prefix(magic)
        .ok_or_else(|| bad(format!("missing `{magic}` header")))?;
    rest.split_whitespace()
        .map(|kv| kv.split_once('=').ok_or_else(|| bad(format!("malformed header field `{kv}`"))))
        .collect()
}

fn field<T: std::str::FromStr>(fields: &HashMap<&str, &str>, key: &str) -> Result<T> {
    fields
        .get(key)
        .ok_or_else(|| bad(format!("header lacks `{key}`")))?
        .parse()
        .map_err(|_| bad(format!("header field `{key}` is malformed")))
}

pub fn read_trace<R: Read>(input: R) -> Result<StreamTrace> {
    let mut reader = BufReader::new(input);
    let mut line = String::new();
    reader
        .read_line(&mut line)
        .map_err(|e| bad(format!("unreadable header: {e}")))?;
    let fields = header_fields(line.trim_end(), TRACE_MAGIC)?;
    let frames: usize = field(&fields, "frames")?;
    let n: usize = field(&fields, "tokens")?;
    let d: usize = field(&fields, "dim")?;
    let k: usize = field(&fields, "image_tokens")?;
    let seed: u64 = field(&fields, "seed")?;
    let generator: String = field(&fields, "generator")?;
    let transition_frames = match fields.get("transitions") {
        None | Some(&"-") => Vec::new(),
        Some(list) => list
            .split(',')
            .map(|f| f.parse().map_err(|_| bad("malformed transition list")))
            .collect::<Result<_>>()?,
    };
    let mut matrices = |count: usize| -> Result<Vec<TokenMatrix>> {
        (0..frames)
            .map(|_| TokenMatrix::new(n, d, read_f64s(&mut reader, count)?))
            .collect()
    };
    let true_latents = matrices(n * d)?;
    let candidates = matrices(n * d)?;
    let attention = if k > 0 {
        Some(
            (0..frames)
                .map(|_| AttentionSummary::new(n, k, read_f64s(&mut reader, n * k)?))
                .collect::<Result<Vec<_>>>()?,
        )
    } else {
        None
    };
    Ok(StreamTrace {
        true_latents,
        candidates,
        attention,
        transition_frames,
        seed,
        generator,
    })
}

/// Long-format CSV: one line per (frame, token, component).
pub fn write_trace_csv<W: Write>(trace: &StreamTrace, out: &mut W) -> std::io::Result<()> {
    writeln!(out, "# filt3r-trace schema=1 generator={} seed={}", trace.generator, trace.seed)?;
    writeln!(out, "frame,token,component,true_latent,candidate")?;
    for (t, (truth, cand)) in trace.true_latents.iter().zip(&trace.candidates).enumerate() {
        let d = truth.dim();
        for (idx, (x, c)) in truth.as_slice().iter().zip(cand.as_slice()).enumerate() {
            writeln!(out, "{},{},{},{x},{c}", t + 1, idx / d, idx % d)?;
        }
    }
    Ok(())
}

pub fn write_matrix<W: Write>(rows: usize, cols: usize, values: &[f64], out: &mut W) -> std::io::Result<()> {
    writeln!(out, "{MATRIX_MAGIC} rows={rows} cols={cols}")?;
    write_f64s(out, values)
}

pub fn read_matrix<R: Read>(input: R) -> Result<(usize, usize, Vec<f64>)> {
    let mut reader = BufReader::new(input);
    let mut line = String::new();
    reader
        .read_line(&mut line)
        .map_err(|e| bad(format!("unreadable header: {e}")))?;
    let fields = header_fields(line.trim_end(), MATRIX_MAGIC)?;
    let rows: usize = field(&fields, "rows")?;
    let cols: usize = field(&fields, "cols")?;
    let values = read_f64s(&mut reader, rows * cols)?;
    Ok((rows, cols, values))
}

pub fn parse_matrix_csv(text: &str) -> Result<(usize, usize, Vec<f64>)> {
    let mut values = Vec::new();
    let mut rows = 0;
    let mut cols = None;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| bad(format!("line {}: {e}", lineno + 1)))?;
        match cols {
            None => cols = Some(row.len()),
            Some(c) if c != row.len() => {
                return Err(Error::Shape(format!("line {}: expected {c} columns, got {}", lineno + 1, row.len())))
            }
            _ => {}
        }
        values.extend(row);
        rows += 1;
    }
    let cols = cols.ok_or_else(|| bad("matrix file has no rows"))?;
    Ok((rows, cols, values))
}

/// Loads an attention summary from a `.csv` file or the binary matrix layout.
pub fn load_attention(path: &Path) -> Result<AttentionSummary> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let (rows, cols, values) = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        let text = String::from_utf8(bytes).map_err(|_| bad("attention CSV is not UTF-8"))?;
        parse_matrix_csv(&text)?
    } else {
        read_matrix(bytes.as_slice())?
    };
    AttentionSummary::new(rows, cols, values)
}
