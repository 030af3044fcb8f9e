//! Flat-record persistence for contexts and labelled datasets.
//!
//! Context CSV: one transition per row with columns
//! `s0..s{d-1}, action, reward, ns0..ns{d-1}, done`. Dataset CSV prefixes a
//! `context` id column; its labels sidecar has `context, q0..q{d-1}, label,
//! behaviour_prob`. JSON mirrors are plain serde documents.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Context, Transition};
use crate::error::{invalid, Result, SpiceError};

/// One training example: a context, a query state, the (possibly weak) label
/// and the behaviour-policy probability of that label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelledContext {
    pub context: Context,
    pub query: Vec<f64>,
    pub label: usize,
    pub behaviour_prob: f64,
}

fn state_dim_of(ctx: &Context) -> usize {
    ctx.transitions().first().map(|t| t.state.len()).unwrap_or(0)
}

fn header(prefix: Option<&str>, dim: usize) -> Vec<String> {
    let mut h = Vec::new();
    if let Some(p) = prefix {
        h.push(p.to_string());
    }
    h.extend((0..dim).map(|i| format!("s{i}")));
    h.push("action".into());
    h.push("reward".into());
    h.extend((0..dim).map(|i| format!("ns{i}")));
    h.push("done".into());
    h
}

fn row(tr: &Transition) -> Vec<String> {
    let mut r: Vec<String> = tr.state.iter().map(|v| v.to_string()).collect();
    r.push(tr.action.to_string());
    r.push(tr.reward.to_string());
    r.extend(tr.next_state.iter().map(|v| v.to_string()));
    r.push(u8::from(tr.done).to_string());
    r
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|e| invalid(format!("bad number {s:?}: {e}")))
}

fn parse_row(fields: &[&str], dim: usize) -> Result<Transition> {
    if fields.len() != 2 * dim + 3 {
        return Err(SpiceError::DimensionMismatch {
            expected: 2 * dim + 3,
            got: fields.len(),
        });
    }
    let state = fields[..dim].iter().map(|s| parse_f64(s)).collect::<Result<Vec<_>>>()?;
    let action = fields[dim]
        .trim()
        .parse::<usize>()
        .map_err(|e| invalid(format!("bad action {:?}: {e}", fields[dim])))?;
    let reward = parse_f64(fields[dim + 1])?;
    let next_state = fields[dim + 2..2 * dim + 2]
        .iter()
        .map(|s| parse_f64(s))
        .collect::<Result<Vec<_>>>()?;
    let done = match fields[2 * dim + 2].trim() {
        "1" | "true" => true,
        "0" | "false" => false,
        other => return Err(invalid(format!("bad episode flag {other:?}"))),
    };
    Ok(Transition {
        state,
        action,
        reward,
        next_state,
        done,
    })
}

fn dim_from_header(headers: &csv::StringRecord, prefixed: bool) -> Result<usize> {
    let extra = if prefixed { 4 } else { 3 };
    if headers.len() < extra || !(headers.len() - extra).is_multiple_of(2) {
        return Err(invalid(format!("unexpected context header with {} columns", headers.len())));
    }
    Ok((headers.len() - extra) / 2)
}

pub fn write_context_csv<W: Write>(ctx: &Context, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(header(None, state_dim_of(ctx)))?;
    for tr in ctx {
        w.write_record(row(tr))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_context_csv<R: Read>(reader: R) -> Result<Context> {
    let mut r = csv::Reader::from_reader(reader);
    let dim = dim_from_header(r.headers()?, false)?;
    let mut trs = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let fields: Vec<&str> = rec.iter().collect();
        trs.push(parse_row(&fields, dim)?);
    }
    Ok(Context::from_transitions(trs))
}

pub fn write_context_json<W: Write>(ctx: &Context, writer: W) -> Result<()> {
    serde_json::to_writer_pretty(writer, ctx)?;
    Ok(())
}

pub fn read_context_json<R: Read>(reader: R) -> Result<Context> {
    Ok(serde_json::from_reader(reader)?)
}

/// Writes `<stem>.csv` (transitions) and `<stem>.labels.csv` (labels sidecar).
pub fn write_dataset_csv(samples: &[LabelledContext], dir: &Path, stem: &str) -> Result<()> {
    let dim = samples
        .iter()
        .find(|s| !s.context.is_empty())
        .map(|s| state_dim_of(&s.context))
        .or_else(|| samples.first().map(|s| s.query.len()))
        .unwrap_or(0);
    let mut w = csv::Writer::from_path(dir.join(format!("{stem}.csv")))?;
    w.write_record(header(Some("context"), dim))?;
    for (i, s) in samples.iter().enumerate() {
        for tr in &s.context {
            let mut r = vec![i.to_string()];
            r.extend(row(tr));
            w.write_record(r)?;
        }
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join(format!("{stem}.labels.csv")))?;
    let mut h = vec!["context".to_string()];
    h.extend((0..dim).map(|i| format!("q{i}")));
    h.push("label".into());
    h.push("behaviour_prob".into());
    w.write_record(h)?;
    for (i, s) in samples.iter().enumerate() {
        let mut r = vec![i.to_string()];
        r.extend(s.query.iter().map(|v| v.to_string()));
        r.push(s.label.to_string());
        r.push(s.behaviour_prob.to_string());
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_dataset_csv(dir: &Path, stem: &str) -> Result<Vec<LabelledContext>> {
    let mut labels = csv::Reader::from_path(dir.join(format!("{stem}.labels.csv")))?;
    let lh = labels.headers()?.clone();
    if lh.len() < 3 {
        return Err(invalid("labels sidecar needs context, label and behaviour_prob columns"));
    }
    let dim = lh.len() - 3;
    let mut samples = Vec::new();
    for rec in labels.records() {
        let rec = rec?;
        let id: usize = rec[0].trim().parse().map_err(|e| invalid(format!("bad context id: {e}")))?;
        if id != samples.len() {
            return Err(invalid(format!("labels out of order at context {id}")));
        }
        let query = (1..=dim).map(|i| parse_f64(&rec[i])).collect::<Result<Vec<_>>>()?;
        let label = rec[dim + 1]
            .trim()
            .parse::<usize>()
            .map_err(|e| invalid(format!("bad label: {e}")))?;
        let behaviour_prob = parse_f64(&rec[dim + 2])?;
        samples.push(LabelledContext {
            context: Context::new(),
            query,
            label,
            behaviour_prob,
        });
    }
    let mut r = csv::Reader::from_path(dir.join(format!("{stem}.csv")))?;
    let cdim = dim_from_header(r.headers()?, true)?;
    for rec in r.records() {
        let rec = rec?;
        let fields: Vec<&str> = rec.iter().collect();
        let id: usize = fields[0].trim().parse().map_err(|e| invalid(format!("bad context id: {e}")))?;
        let tr = parse_row(&fields[1..], cdim)?;
        samples
            .get_mut(id)
            .ok_or_else(|| invalid(format!("context id {id} has no label row")))?
            .context
            .push(tr);
    }
    Ok(samples)
}

pub fn write_dataset_json<W: Write>(samples: &[LabelledContext], writer: W) -> Result<()> {
    serde_json::to_writer(writer, samples)?;
    Ok(())
}

pub fn read_dataset_json<R: Read>(reader: R) -> Result<Vec<LabelledContext>> {
    Ok(serde_json::from_reader(reader)?)
}
