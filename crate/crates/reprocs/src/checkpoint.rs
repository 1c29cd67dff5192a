//! Basis checkpoints. Both encodings carry the header `n, r, tau, alpha`,
//! the basis in row-major order, the singular values and an optional mean.
//!
//! Binary: little-endian `u64 n, u64 r, u64 tau, f64 alpha, u64 has_mean`,
//! then `n·r` basis values, `r` singular values and `n` mean values if
//! `has_mean` is 1. CSV (chosen by a `.csv` extension): a header row
//! `n,r,tau,alpha,has_mean` and its values, then `n` basis rows, one row of
//! singular values and one mean row if present.

use std::path::Path;

use nalgebra::{DMatrix, DVector};

use reprocs_core::{SubspaceEstimate, UpdateParams, UpdateTrigger};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub basis: DMatrix<f64>,
    pub singvals: Vec<f64>,
    pub tau: usize,
    pub alpha: f64,
    pub mean: Option<DVector<f64>>,
}

impl Checkpoint {
    pub fn from_estimate(est: &SubspaceEstimate) -> Self {
        Checkpoint {
            basis: est.basis().clone(),
            singvals: est.singvals().to_vec(),
            tau: est.params().tau,
            alpha: est.params().alpha,
            mean: est.mean().cloned(),
        }
    }

    /// Estimate with the given update rule; the stored `tau` and `alpha`
    /// are informational.
    pub fn into_estimate(self, params: UpdateParams) -> Result<SubspaceEstimate, CliError> {
        Ok(SubspaceEstimate::from_parts(self.basis, self.singvals, params, self.mean)?)
    }

    /// Estimate with the stored update rule and a periodic trigger.
    pub fn into_stored_estimate(self) -> Result<SubspaceEstimate, CliError> {
        let params = UpdateParams {
            tau: self.tau,
            alpha: self.alpha,
            trigger: UpdateTrigger::Periodic,
        };
        self.into_estimate(params)
    }
}

fn is_csv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

pub fn write_checkpoint(path: &Path, cp: &Checkpoint) -> Result<(), CliError> {
    let bytes = if is_csv(path) { encode_csv(cp) } else { encode_binary(cp) };
    std::fs::write(path, bytes).map_err(|e| CliError::output(path, e))
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::input(path, e))?;
    let cp = if is_csv(path) { decode_csv(&bytes) } else { decode_binary(&bytes) };
    cp.map_err(|reason| CliError::input(path, reason))
}

fn encode_binary(cp: &Checkpoint) -> Vec<u8> {
    let (n, r) = cp.basis.shape();
    let mut out = Vec::new();
    for word in [n as u64, r as u64, cp.tau as u64] {
        out.extend_from_slice(&word.to_le_bytes());
    }
    out.extend_from_slice(&cp.alpha.to_le_bytes());
    out.extend_from_slice(&(cp.mean.is_some() as u64).to_le_bytes());
    let mut push = |x: f64| out.extend_from_slice(&x.to_le_bytes());
    for i in 0..n {
        for j in 0..r {
            push(cp.basis[(i, j)]);
        }
    }
    cp.singvals.iter().for_each(|&s| push(s));
    if let Some(mu) = &cp.mean {
        mu.iter().for_each(|&x| push(x));
    }
    out
}

fn decode_binary(bytes: &[u8]) -> Result<Checkpoint, String> {
    let mut words = bytes.chunks_exact(8).map(|c| <[u8; 8]>::try_from(c).expect("chunk of 8"));
    if !bytes.len().is_multiple_of(8) || bytes.len() < 40 {
        return Err("truncated checkpoint".into());
    }
    let mut header = || u64::from_le_bytes(words.next().expect("length checked"));
    let (n, r, tau) = (header() as usize, header() as usize, header() as usize);
    let alpha = f64::from_le_bytes(words.next().expect("length checked"));
    let has_mean = match u64::from_le_bytes(words.next().expect("length checked")) {
        0 => false,
        1 => true,
        _ => return Err("bad mean flag".into()),
    };
    let body: Vec<f64> = words.map(f64::from_le_bytes).collect();
    let expected = n
        .checked_mul(r)
        .and_then(|v| v.checked_add(r))
        .and_then(|v| v.checked_add(if has_mean { n } else { 0 }));
    if expected != Some(body.len()) {
        return Err(format!("header says n = {n}, r = {r} but the body has {} values", body.len()));
    }
    let basis = DMatrix::from_row_slice(n, r, &body[..n * r]);
    let singvals = body[n * r..n * r + r].to_vec();
    let mean = has_mean.then(|| DVector::from_column_slice(&body[n * r + r..]));
    Ok(Checkpoint {
        basis,
        singvals,
        tau,
        alpha,
        mean,
    })
}

fn encode_csv(cp: &Checkpoint) -> Vec<u8> {
    let (n, r) = cp.basis.shape();
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(Vec::new());
    let fmt = |xs: &mut dyn Iterator<Item = f64>| xs.map(|x| x.to_string()).collect::<Vec<_>>();
    let result: csv::Result<()> = (|| {
        w.write_record(["n", "r", "tau", "alpha", "has_mean"])?;
        w.write_record([n.to_string(), r.to_string(), cp.tau.to_string(), cp.alpha.to_string(), (cp.mean.is_some() as u8).to_string()])?;
        for i in 0..n {
            w.write_record(fmt(&mut cp.basis.row(i).iter().copied()))?;
        }
        w.write_record(fmt(&mut cp.singvals.iter().copied()))?;
        if let Some(mu) = &cp.mean {
            w.write_record(fmt(&mut mu.iter().copied()))?;
        }
        Ok(())
    })();
    result.expect("writing to memory");
    w.into_inner().expect("writing to memory")
}

fn decode_csv(bytes: &[u8]) -> Result<Checkpoint, String> {
    let mut rd = csv::ReaderBuilder::new().flexible(true).has_headers(true).from_reader(bytes);
    let headers = rd.headers().map_err(|e| e.to_string())?.clone();
    if headers.iter().collect::<Vec<_>>() != ["n", "r", "tau", "alpha", "has_mean"] {
        return Err("unexpected checkpoint header".into());
    }
    let mut rows = rd.records();
    let mut next_row = |what: &str| -> Result<csv::StringRecord, String> {
        rows.next().ok_or_else(|| format!("missing {what}"))?.map_err(|e| e.to_string())
    };
    let head = next_row("header values")?;
    let field = |k: usize| head.get(k).ok_or_else(|| "short header row".to_string());
    let parse_usize = |s: &str| s.trim().parse::<usize>().map_err(|e| format!("{s}: {e}"));
    let parse_f64 = |s: &str| s.trim().parse::<f64>().map_err(|e| format!("{s}: {e}"));
    let n = parse_usize(field(0)?)?;
    let r = parse_usize(field(1)?)?;
    let tau = parse_usize(field(2)?)?;
    let alpha = parse_f64(field(3)?)?;
    let has_mean = parse_usize(field(4)?)? == 1;
    let parse_row = |rec: csv::StringRecord, len: usize| -> Result<Vec<f64>, String> {
        // An empty record stands for a zero-length row.
        if len == 0 && rec.iter().all(|s| s.is_empty()) {
            return Ok(Vec::new());
        }
        if rec.len() != len {
            return Err(format!("expected {len} values, found {}", rec.len()));
        }
        rec.iter().map(parse_f64).collect()
    };
    let mut data = Vec::with_capacity(n * r);
    for _ in 0..n {
        data.extend(parse_row(next_row("basis row")?, r)?);
    }
    let singvals = parse_row(next_row("singular values")?, r)?;
    let mean = if has_mean {
        Some(DVector::from_vec(parse_row(next_row("mean")?, n)?))
    } else {
        None
    };
    if rows.next().is_some() {
        return Err("trailing rows".into());
    }
    Ok(Checkpoint {
        basis: DMatrix::from_row_slice(n, r, &data),
        singvals,
        tau,
        alpha,
        mean,
    })
}
