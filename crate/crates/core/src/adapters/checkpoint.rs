//! Adapter checkpoints: a one-line JSON header followed by named CSV blocks.
//!
//! ```text
//! {"type":"sorsa","m":16,"n":12,"r":4,"seed":0}
//! #block u_p 16 4
//! <16 CSV rows>
//! #block s_p 1 4
//! ...
//! ```

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Adapter, FullAdapter, LoraAdapter, Method, PissaAdapter, SorsaAdapter};
use crate::error::{Error, Result};
use crate::linalg::{read_csv, write_csv, Matrix};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointHeader {
    #[serde(rename = "type")]
    pub kind: Method,
    pub m: usize,
    pub n: usize,
    pub r: Option<usize>,
    pub seed: u64,
}

const BLOCK_TAG: &str = "#block";

fn blocks(adapter: &Adapter) -> Vec<(&'static str, Matrix)> {
    match adapter {
        Adapter::Sorsa(a) => vec![
            ("u_p", a.u_p.clone()),
            ("s_p", Matrix::from_vec_unchecked(1, a.s_p.len(), a.s_p.clone())),
            ("v_p", a.v_p.clone()),
            ("w_r", a.w_r.clone()),
        ],
        Adapter::Lora(a) => vec![("w_0", a.w_0.clone()), ("a", a.a.clone()), ("b", a.b.clone())],
        Adapter::Pissa(a) => vec![("a", a.a.clone()), ("b", a.b.clone()), ("w_res", a.w_res.clone())],
        Adapter::Full(a) => vec![("w", a.w.clone())],
    }
}

pub fn write_checkpoint<W: Write>(adapter: &Adapter, seed: u64, mut out: W) -> Result<()> {
    let (m, n) = adapter.shape();
    let header = CheckpointHeader {
        kind: adapter.method(),
        m,
        n,
        r: adapter.rank(),
        seed,
    };
    writeln!(out, "{}", serde_json::to_string(&header)?)?;
    for (name, block) in blocks(adapter) {
        writeln!(out, "{BLOCK_TAG} {name} {} {}", block.rows(), block.cols())?;
        write_csv(&block, &mut out)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_checkpoint<R: Read>(input: R) -> Result<(CheckpointHeader, Adapter)> {
    let mut lines = BufReader::new(input).lines();
    let header_line = lines.next().ok_or_else(|| Error::Parse("empty checkpoint".into()))??;
    let header: CheckpointHeader = serde_json::from_str(&header_line)?;

    let mut parsed: Vec<(String, Matrix)> = Vec::new();
    let mut current: Option<(String, usize, usize, String)> = None;
    let finish = |block: (String, usize, usize, String), parsed: &mut Vec<(String, Matrix)>| -> Result<()> {
        let (name, rows, cols, body) = block;
        let mat = read_csv(body.as_bytes())?;
        if mat.shape() != (rows, cols) {
            return Err(Error::Parse(format!(
                "block {name} declared {rows}x{cols}, found {:?}",
                mat.shape()
            )));
        }
        parsed.push((name, mat));
        Ok(())
    };
    for line in lines {
        let line = line?;
        if let Some(rest) = line.strip_prefix(BLOCK_TAG) {
            if let Some(done) = current.take() {
                finish(done, &mut parsed)?;
            }
            let fields: Vec<&str> = rest.split_whitespace().collect();
            let [name, rows, cols] = fields[..] else {
                return Err(Error::Parse(format!("bad block line {line:?}")));
            };
            let dim = |s: &str| {
                s.parse::<usize>()
                    .map_err(|e| Error::Parse(format!("bad block size {s:?}: {e}")))
            };
            current = Some((name.to_string(), dim(rows)?, dim(cols)?, String::new()));
        } else if let Some((_, _, _, body)) = current.as_mut() {
            body.push_str(&line);
            body.push('\n');
        } else if !line.trim().is_empty() {
            return Err(Error::Parse("data before first block".into()));
        }
    }
    if let Some(done) = current.take() {
        finish(done, &mut parsed)?;
    }

    let mut take = |name: &str| -> Result<Matrix> {
        let pos = parsed
            .iter()
            .position(|(n, _)| n == name)
            .ok_or_else(|| Error::Parse(format!("missing block {name}")))?;
        Ok(parsed.remove(pos).1)
    };
    let adapter = match header.kind {
        Method::Sorsa => Adapter::Sorsa(SorsaAdapter::from_parts(
            take("u_p")?,
            take("s_p")?.as_slice().to_vec(),
            take("v_p")?,
            take("w_r")?,
        )?),
        Method::Lora => Adapter::Lora(LoraAdapter::from_parts(take("w_0")?, take("a")?, take("b")?)?),
        Method::Pissa => Adapter::Pissa(PissaAdapter::from_parts(take("a")?, take("b")?, take("w_res")?)?),
        Method::Full => Adapter::Full(FullAdapter { w: take("w")? }),
    };
    if adapter.shape() != (header.m, header.n) || adapter.rank() != header.r {
        return Err(Error::Parse("checkpoint header disagrees with its blocks".into()));
    }
    Ok((header, adapter))
}

pub fn save_checkpoint(adapter: &Adapter, seed: u64, path: &Path) -> Result<()> {
    write_checkpoint(adapter, seed, std::io::BufWriter::new(std::fs::File::create(path)?))
}

pub fn load_checkpoint(path: &Path) -> Result<(CheckpointHeader, Adapter)> {
    read_checkpoint(std::fs::File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;

    #[test]
    fn every_kind_round_trips_exactly() {
        let w0 = SeededRng::new(8).gaussian_matrix(6, 5, 1.0);
        for method in [Method::Sorsa, Method::Lora, Method::Pissa, Method::Full] {
            let adapter = Adapter::init(method, &w0, 2, 17).unwrap();
            let mut buf = Vec::new();
            write_checkpoint(&adapter, 17, &mut buf).unwrap();
            let (header, back) = read_checkpoint(buf.as_slice()).unwrap();
            assert_eq!(back, adapter);
            assert_eq!(header.seed, 17);
            assert_eq!(header.kind, method);
        }
    }

    #[test]
    fn header_format() {
        let adapter = Adapter::init(Method::Sorsa, &Matrix::from_diag(&[2.0, 1.0]), 1, 0).unwrap();
        let mut buf = Vec::new();
        write_checkpoint(&adapter, 3, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            r#"{"type":"sorsa","m":2,"n":2,"r":1,"seed":3}"#
        );
        assert!(text.contains("#block s_p 1 1\n2.0000000000000000e0\n"));
    }

    #[test]
    fn malformed_checkpoints_are_rejected() {
        assert!(read_checkpoint("".as_bytes()).is_err());
        let no_blocks = r#"{"type":"full","m":1,"n":1,"r":null,"seed":0}"#;
        assert!(read_checkpoint(no_blocks.as_bytes()).is_err());
        let wrong_size = format!("{no_blocks}\n#block w 2 1\n1.0\n");
        assert!(read_checkpoint(wrong_size.as_bytes()).is_err());
        let extra_key = r#"{"type":"full","m":1,"n":1,"r":null,"seed":0,"x":1}"#;
        assert!(read_checkpoint(format!("{extra_key}\n#block w 1 1\n1.0\n").as_bytes()).is_err());
    }
}
