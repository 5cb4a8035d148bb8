//! File formats: the binary FTT container and trajectory CSV tables.
//!
//! FTT layout, all integers and floats little-endian:
//!
//! ```text
//! "FTTC" | u32 version = 1 | u32 d
//! per dimension: u8 kind (0 Lagrange, 1 Legendre) | u32 n | f64 a | f64 b | n × f64 nodes
//! (d + 1) × u32 ranks
//! cores, each r_{k-1} × n_k × r_k f64 in (left rank, node, right rank) order
//! u32 CRC32 of everything before it
//! ```

use std::io::Write;
use std::path::Path;

use crate::basis::{gauss_legendre, Basis, BasisKind};
use crate::control::TrajectoryResult;
use crate::error::{Error, Result};
use crate::ftt::Ftt;

pub const MAGIC: &[u8; 4] = b"FTTC";
pub const FORMAT_VERSION: u32 = 1;

pub fn ftt_to_bytes(ftt: &Ftt) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(ftt.dim() as u32).to_le_bytes());
    for b in ftt.bases() {
        out.push(b.kind().code());
        out.extend_from_slice(&(b.len() as u32).to_le_bytes());
        let (lo, hi) = b.interval();
        out.extend_from_slice(&lo.to_le_bytes());
        out.extend_from_slice(&hi.to_le_bytes());
        for x in b.nodes() {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    for &r in ftt.ranks() {
        out.extend_from_slice(&(r as u32).to_le_bytes());
    }
    for core in ftt.cores() {
        for v in core {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| Error::Format(format!("truncated file at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn count(&mut self, what: &str) -> Result<usize> {
        let v = self.u32()? as usize;
        // Every counted item occupies at least one byte.
        if v > self.buf.len() {
            return Err(Error::Format(format!("{what} = {v} exceeds the file size")));
        }
        Ok(v)
    }
}

/// Quadrature weights matching `nodes`: Gauss-Legendre weights when the
/// nodes are the Gauss-Legendre nodes, interpolatory weights otherwise.
fn quadrature_for(nodes: &[f64], interval: (f64, f64)) -> Result<Vec<f64>> {
    let n = nodes.len();
    if !nodes.iter().all(|x| x.is_finite()) || nodes.windows(2).any(|p| p[0] >= p[1]) {
        return Err(Error::Format("basis nodes must be finite and strictly increasing".into()));
    }
    let (gl, w) = gauss_legendre(n, interval).map_err(|e| Error::Format(e.to_string()))?;
    let scale = (interval.1 - interval.0).abs().max(1.0);
    if gl.iter().zip(nodes).all(|(a, b)| (a - b).abs() <= 1e-14 * scale) {
        return Ok(w);
    }
    let cardinal = Basis::with_nodes(BasisKind::Lagrange, interval, nodes.to_vec(), vec![0.0; n])?;
    let mut weights = vec![0.0; n];
    let mut phi = vec![0.0; n];
    for (x, wg) in gl.iter().zip(&w) {
        cardinal.eval_into(*x, &mut phi);
        for (acc, p) in weights.iter_mut().zip(&phi) {
            *acc += wg * p;
        }
    }
    Ok(weights)
}

pub fn ftt_from_bytes(buf: &[u8]) -> Result<Ftt> {
    if buf.len() < 16 {
        return Err(Error::Format("file too short".into()));
    }
    let (body, tail) = buf.split_at(buf.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().expect("4 bytes"));
    let crc = crc32fast::hash(body);
    if crc != stored {
        return Err(Error::Format(format!("CRC mismatch: stored {stored:08x}, computed {crc:08x}")));
    }
    let mut r = Reader { buf: body, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::Format("bad magic bytes".into()));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let d = r.count("dimension")?;
    let mut bases = Vec::with_capacity(d);
    for k in 0..d {
        let code = r.u8()?;
        let kind = BasisKind::from_code(code)
            .ok_or_else(|| Error::Format(format!("dimension {k}: unknown basis kind {code}")))?;
        let n = r.count("basis size")?;
        let interval = (r.f64()?, r.f64()?);
        let nodes = (0..n).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        let weights = quadrature_for(&nodes, interval)?;
        bases.push(Basis::with_nodes(kind, interval, nodes, weights)?);
    }
    let ranks = (0..=d).map(|_| r.count("rank")).collect::<Result<Vec<_>>>()?;
    let mut cores = Vec::with_capacity(d);
    for k in 0..d {
        let len = ranks[k]
            .checked_mul(bases[k].len())
            .and_then(|v| v.checked_mul(ranks[k + 1]))
            .filter(|&v| v <= body.len() / 8)
            .ok_or_else(|| Error::Format(format!("core {k} larger than the file")))?;
        cores.push((0..len).map(|_| r.f64()).collect::<Result<Vec<_>>>()?);
    }
    if r.pos != body.len() {
        return Err(Error::Format(format!("{} trailing bytes", body.len() - r.pos)));
    }
    Ftt::new(bases, ranks, cores).map_err(|e| Error::Format(e.to_string()))
}

pub fn save_ftt(ftt: &Ftt, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, ftt_to_bytes(ftt))?;
    Ok(())
}

pub fn load_ftt(path: impl AsRef<Path>) -> Result<Ftt> {
    ftt_from_bytes(&std::fs::read(path)?)
}

/// Scientific notation with 17 significant digits, enough to round-trip.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes `t,x1..xd,u1..um,cost`, one row per stored time.
pub fn write_trajectory_csv(traj: &TrajectoryResult, mut w: impl Write) -> Result<()> {
    let d = traj.states.first().map_or(0, Vec::len);
    let m = traj.controls.first().map_or(0, Vec::len);
    let mut header = vec!["t".to_string()];
    header.extend((1..=d).map(|i| format!("x{i}")));
    header.extend((1..=m).map(|i| format!("u{i}")));
    header.push("cost".into());
    writeln!(w, "{}", header.join(","))?;
    for (i, t) in traj.times.iter().enumerate() {
        let mut row = vec![fmt_f64(*t)];
        row.extend(traj.states[i].iter().map(|v| fmt_f64(*v)));
        row.extend(traj.controls[i].iter().map(|v| fmt_f64(*v)));
        row.push(fmt_f64(traj.costs[i]));
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn save_trajectory_csv(traj: &TrajectoryResult, path: impl AsRef<Path>) -> Result<()> {
    let mut buf = Vec::new();
    write_trajectory_csv(traj, &mut buf)?;
    std::fs::write(path, buf)?;
    Ok(())
}
