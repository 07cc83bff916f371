//! Record/replay store for sample sets, keyed by problem content.
//!
//! File layout: a sequence of records, each
//! `[sha256(canonical problem bytes): 32][json length: u64 LE][json]`. The
//! JSON body is the QUBO dump (`n`, `q`, `b`, `offset`) extended with
//! `solutions` (one `"0110…"` bit string per unique solution), `energies`,
//! `occurrences` and `total_reads`.

use std::fs::OpenOptions;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::SolverError;
use crate::qubo::{QuboDump, QuboProblem, SampleSet};
use crate::scalar::Real;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Record {
    #[serde(flatten)]
    problem: QuboDump,
    solutions: Vec<String>,
    energies: Vec<f64>,
    occurrences: Vec<u64>,
    total_reads: u64,
}

pub fn problem_hash<T: Real>(p: &QuboProblem<T>) -> [u8; 32] {
    Sha256::digest(p.canonical_bytes()).into()
}

fn encode_bits(z: &[u8]) -> String {
    z.iter().map(|&b| if b == 0 { '0' } else { '1' }).collect()
}

fn decode_bits(s: &str) -> Result<Vec<u8>, SolverError> {
    s.bytes()
        .map(|c| match c {
            b'0' => Ok(0),
            b'1' => Ok(1),
            _ => Err(SolverError::Format(format!("bad bit character {:?}", c as char))),
        })
        .collect()
}

/// Appends `(hash(p), s)` to the replay file at `path`, creating it if needed.
pub fn record_samples<T: Real>(p: &QuboProblem<T>, s: &SampleSet<T>, path: impl AsRef<Path>) -> Result<(), SolverError> {
    let path = path.as_ref();
    let hash = problem_hash(p);
    if path.exists() {
        for (h, rec) in read_records(path)? {
            if h == hash && !same_problem(&rec.problem, p) {
                return Err(SolverError::HashCollision);
            }
        }
    }
    let rec = Record {
        problem: QuboDump::from_problem(p),
        solutions: s.solutions.iter().map(|z| encode_bits(z)).collect(),
        energies: s.energies.iter().map(|e| e.as_f64()).collect(),
        occurrences: s.occurrences.clone(),
        total_reads: s.total_reads,
    };
    let body = serde_json::to_vec(&rec).map_err(|e| SolverError::Format(e.to_string()))?;
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    let mut buf = Vec::with_capacity(40 + body.len());
    buf.extend_from_slice(&hash);
    buf.extend_from_slice(&(body.len() as u64).to_le_bytes());
    buf.extend_from_slice(&body);
    f.write_all(&buf)?;
    Ok(())
}

/// Looks `p` up by content hash; the first matching record wins.
pub fn replay_samples<T: Real>(p: &QuboProblem<T>, path: impl AsRef<Path>) -> Result<SampleSet<T>, SolverError> {
    let hash = problem_hash(p);
    let records = read_records(path.as_ref())?;
    let (_, rec) = records.into_iter().find(|(h, _)| *h == hash).ok_or(SolverError::NotRecorded)?;
    if !same_problem(&rec.problem, p) {
        return Err(SolverError::HashCollision);
    }
    Ok(SampleSet {
        solutions: rec.solutions.iter().map(|s| decode_bits(s)).collect::<Result<_, _>>()?,
        energies: rec.energies.iter().map(|&e| T::lit(e)).collect(),
        occurrences: rec.occurrences,
        total_reads: rec.total_reads,
    })
}

fn same_problem<T: Real>(dump: &QuboDump, p: &QuboProblem<T>) -> bool {
    dump.to_problem::<T>().map(|q| q.canonical_bytes() == p.canonical_bytes()).unwrap_or(false)
}

fn read_records(path: &Path) -> Result<Vec<([u8; 32], Record)>, SolverError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    let mut out = Vec::new();
    let mut pos = 0;
    while pos < bytes.len() {
        if bytes.len() - pos < 40 {
            return Err(SolverError::Format("truncated record header".into()));
        }
        let mut hash = [0u8; 32];
        hash.copy_from_slice(&bytes[pos..pos + 32]);
        let len = u64::from_le_bytes(bytes[pos + 32..pos + 40].try_into().unwrap()) as usize;
        pos += 40;
        if bytes.len() - pos < len {
            return Err(SolverError::Format("truncated record body".into()));
        }
        let rec: Record = serde_json::from_slice(&bytes[pos..pos + len]).map_err(|e| SolverError::Format(e.to_string()))?;
        pos += len;
        out.push((hash, rec));
    }
    Ok(out)
}
