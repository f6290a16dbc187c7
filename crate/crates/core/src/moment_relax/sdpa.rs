//! Sparse SDPA (`.dat-s`) export of a moment problem and a matching reader.
//!
//! The file encodes `min cᵀx` s.t. `Σ F_i x_i − F_0 ⪰ 0`. Variable `i` is
//! moment class `i` (class `0`, the identity, is the constant and feeds `F_0`).
//! Linear constraints go into a trailing diagonal block, two rows per range.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{MomentProblem, Sense, Statistic};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdpaEntry {
    pub matrix: usize,
    pub block: usize,
    pub i: usize,
    pub j: usize,
    pub value: f64,
}

/// In-memory `.dat-s` content.
#[derive(Debug, Clone, PartialEq)]
pub struct SdpaFile {
    pub num_vars: usize,
    /// Negative sizes denote diagonal blocks.
    pub block_sizes: Vec<i64>,
    pub c: Vec<f64>,
    pub entries: Vec<SdpaEntry>,
}

impl SdpaFile {
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "\"moment relaxation\"");
        let _ = writeln!(s, "{}", self.num_vars);
        let _ = writeln!(s, "{}", self.block_sizes.len());
        let blocks: Vec<String> = self.block_sizes.iter().map(|b| b.to_string()).collect();
        let _ = writeln!(s, "{}", blocks.join(" "));
        let c: Vec<String> = self.c.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(s, "{}", c.join(" "));
        for e in &self.entries {
            let _ = writeln!(s, "{} {} {} {} {}", e.matrix, e.block, e.i, e.j, e.value);
        }
        s
    }

    /// Entries sorted for multiset comparison.
    pub fn sorted_entries(&self) -> Vec<SdpaEntry> {
        let mut v = self.entries.clone();
        v.sort_by(|a, b| {
            (a.matrix, a.block, a.i, a.j)
                .cmp(&(b.matrix, b.block, b.i, b.j))
                .then(a.value.total_cmp(&b.value))
        });
        v
    }
}

/// Sidecar describing what each SDPA variable means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdpaManifest {
    pub n: usize,
    pub level: usize,
    /// Sense of the original problem; the file always minimizes.
    pub sense: Sense,
    /// Add to the file's optimum (after undoing the sign for maximization) to recover the bound.
    pub objective_offset: f64,
    pub provenance: String,
    pub statistic: Statistic,
    pub block_sizes: Vec<i64>,
    /// Word string of every moment class; entry `0` is the constant `I`.
    pub classes: Vec<String>,
}

/// Builds the SDPA data and manifest for `problem`.
pub fn write_sdpa(problem: &MomentProblem) -> (SdpaFile, SdpaManifest) {
    let m = problem.num_classes();
    let sign = match problem.sense() {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    let mut c = vec![0.0; m - 1];
    let mut offset = problem.offset();
    for &(id, v) in problem.objective() {
        if id == 0 {
            offset += v;
        } else {
            c[id - 1] += sign * v;
        }
    }

    let mut entries = Vec::new();
    let mut push = |matrix: usize, block: usize, i: usize, j: usize, value: f64| {
        if value != 0.0 {
            entries.push(SdpaEntry {
                matrix,
                block,
                i,
                j,
                value,
            });
        }
    };
    let mut block_sizes = Vec::new();

    let gamma = problem.gamma();
    block_sizes.push(gamma.size() as i64);
    for a in 0..gamma.size() {
        for b in a..gamma.size() {
            if let Some(id) = gamma.cell(a, b) {
                if id == 0 {
                    push(0, 1, a + 1, b + 1, -1.0);
                } else {
                    push(id, 1, a + 1, b + 1, 1.0);
                }
            }
        }
    }

    let mut block = 1;
    if let Some(loc) = problem.localizing() {
        block += 1;
        block_sizes.push(loc.size() as i64);
        for a in 0..loc.size() {
            for b in a..loc.size() {
                for &(id, v) in loc.entry(a, b) {
                    if id == 0 {
                        push(0, block, a + 1, b + 1, -v);
                    } else {
                        push(id, block, a + 1, b + 1, v);
                    }
                }
            }
        }
    }

    let rows: Vec<(f64, &[(usize, f64)], f64)> = problem
        .constraints()
        .iter()
        .flat_map(|con| {
            let mut r = Vec::new();
            if con.lower.is_finite() {
                r.push((1.0, con.coeffs.as_slice(), con.lower));
            }
            if con.upper.is_finite() {
                r.push((-1.0, con.coeffs.as_slice(), con.upper));
            }
            r
        })
        .collect();
    if !rows.is_empty() {
        block += 1;
        block_sizes.push(-(rows.len() as i64));
        for (r, (s, coeffs, bound)) in rows.iter().enumerate() {
            let mut constant = -s * bound;
            for &(id, v) in coeffs.iter() {
                if id == 0 {
                    constant += s * v;
                } else {
                    push(id, block, r + 1, r + 1, s * v);
                }
            }
            push(0, block, r + 1, r + 1, -constant);
        }
    }

    let file = SdpaFile {
        num_vars: m - 1,
        block_sizes: block_sizes.clone(),
        c,
        entries,
    };
    let manifest = SdpaManifest {
        n: problem.n(),
        level: problem.level(),
        sense: problem.sense(),
        objective_offset: offset,
        provenance: problem.provenance().to_string(),
        statistic: problem.statistic().clone(),
        block_sizes,
        classes: problem
            .classes()
            .representatives()
            .iter()
            .map(|w| w.to_string())
            .collect(),
    };
    (file, manifest)
}

/// Path of the manifest written next to `dest`.
pub fn manifest_path(dest: &Path) -> PathBuf {
    dest.with_extension("json")
}

/// Writes `dest` and its `.json` manifest; returns the manifest path.
pub fn export_sdpa(problem: &MomentProblem, dest: &Path) -> Result<PathBuf> {
    let (file, manifest) = write_sdpa(problem);
    std::fs::write(dest, file.render()).map_err(|e| Error::io(dest, e))?;
    let mpath = manifest_path(dest);
    let json = serde_json::to_string_pretty(&manifest)?;
    std::fs::write(&mpath, json).map_err(|e| Error::io(&mpath, e))?;
    Ok(mpath)
}

/// Reads `.dat-s` text. Comment lines start with `"` or `*`; separators may include `,{}()`.
pub fn parse_sdpa(text: &str) -> Result<SdpaFile> {
    let mut lines = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('"') && !l.starts_with('*'));
    let mut next = |what: &str| {
        lines
            .next()
            .ok_or_else(|| Error::Parse(format!("missing {what}")))
    };
    let tokens = |l: &str| -> Vec<String> {
        l.split(|ch: char| ch.is_whitespace() || ",{}()".contains(ch))
            .filter(|t| !t.is_empty())
            .map(String::from)
            .collect()
    };
    let num = |t: &str, what: &str| -> Result<f64> {
        t.parse::<f64>()
            .map_err(|_| Error::Parse(format!("bad {what}: {t:?}")))
    };
    let int = |t: &str, what: &str| -> Result<i64> {
        t.parse::<i64>()
            .map_err(|_| Error::Parse(format!("bad {what}: {t:?}")))
    };

    let m_tok = tokens(next("mDIM")?);
    let num_vars = int(m_tok.first().map_or("", String::as_str), "mDIM")? as usize;
    let nb_tok = tokens(next("nBLOCK")?);
    let nblocks = int(nb_tok.first().map_or("", String::as_str), "nBLOCK")? as usize;
    let bs_tok = tokens(next("block structure")?);
    if bs_tok.len() < nblocks {
        return Err(Error::Parse("block structure shorter than nBLOCK".into()));
    }
    let block_sizes = bs_tok[..nblocks]
        .iter()
        .map(|t| int(t, "block size"))
        .collect::<Result<Vec<_>>>()?;
    let c_tok = tokens(next("objective")?);
    if c_tok.len() < num_vars {
        return Err(Error::Parse("objective vector shorter than mDIM".into()));
    }
    let c = c_tok[..num_vars]
        .iter()
        .map(|t| num(t, "objective"))
        .collect::<Result<Vec<_>>>()?;

    let mut entries = Vec::new();
    for line in lines {
        let t = tokens(line);
        if t.len() < 5 {
            return Err(Error::Parse(format!("short entry line {line:?}")));
        }
        let e = SdpaEntry {
            matrix: int(&t[0], "matrix number")? as usize,
            block: int(&t[1], "block number")? as usize,
            i: int(&t[2], "row")? as usize,
            j: int(&t[3], "column")? as usize,
            value: num(&t[4], "value")?,
        };
        if e.matrix > num_vars || e.block == 0 || e.block > nblocks {
            return Err(Error::Parse(format!("entry out of range: {line:?}")));
        }
        let size = block_sizes[e.block - 1].unsigned_abs() as usize;
        if e.i == 0 || e.j == 0 || e.i > size || e.j > size || e.i > e.j {
            return Err(Error::Parse(format!(
                "entry outside upper triangle: {line:?}"
            )));
        }
        entries.push(e);
    }
    Ok(SdpaFile {
        num_vars,
        block_sizes,
        c,
        entries,
    })
}
