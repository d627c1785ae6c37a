//! SDPA sparse (.dat-s) importer for linear SDPs.
//!
//! The file encodes `min c'x s.t. sum_i x_i F_i - F_0 PSD`; its dual is the
//! standard-form SDP `min <-F_0, Y> s.t. <F_i, Y> = c_i, Y PSD`, which is
//! what the importer produces: `C = -F_0`, `A_i = F_i`, `b = c`, all rows
//! equalities.
//!
//! Limitations: at most one semidefinite block; LP blocks (negative block
//! sizes) are mapped to diagonal entries of the enlarged single block.

use crate::problem_file::{ConstraintFile, ConstraintKind, ObjectiveFile, ProblemFile};

fn clean_tokens(text: &str) -> Vec<(usize, String)> {
    let mut tokens = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let trimmed = line.trim_start();
        if trimmed.starts_with('"') || trimmed.starts_with('*') {
            continue;
        }
        for tok in line
            .replace(['{', '}', '(', ')', ','], " ")
            .split_whitespace()
        {
            tokens.push((lineno + 1, tok.to_string()));
        }
    }
    tokens
}

struct Cursor {
    tokens: Vec<(usize, String)>,
    pos: usize,
}

impl Cursor {
    fn next(&mut self, what: &str) -> Result<(usize, String), String> {
        let t = self
            .tokens
            .get(self.pos)
            .cloned()
            .ok_or_else(|| format!("sdpa: unexpected end of file while reading {what}"))?;
        self.pos += 1;
        Ok(t)
    }

    fn exhausted(&self) -> bool {
        self.pos >= self.tokens.len()
    }
}

pub fn parse_sdpa(text: &str) -> Result<ProblemFile, String> {
    let mut cur = Cursor {
        tokens: clean_tokens(text),
        pos: 0,
    };
    let parse_usize = |(line, tok): (usize, String), what: &str| -> Result<usize, String> {
        tok.parse()
            .map_err(|e| format!("sdpa line {line}: bad {what} {tok:?}: {e}"))
    };
    let parse_i64 = |(line, tok): (usize, String), what: &str| -> Result<i64, String> {
        tok.parse()
            .map_err(|e| format!("sdpa line {line}: bad {what} {tok:?}: {e}"))
    };
    let parse_f64 = |(line, tok): (usize, String), what: &str| -> Result<f64, String> {
        tok.parse()
            .map_err(|e| format!("sdpa line {line}: bad {what} {tok:?}: {e}"))
    };

    let m = parse_usize(cur.next("constraint count")?, "constraint count")?;
    let nblocks = parse_usize(cur.next("block count")?, "block count")?;
    let mut sizes = Vec::with_capacity(nblocks);
    for i in 0..nblocks {
        sizes.push(parse_i64(cur.next("block size")?, &format!("block size {i}"))?);
    }
    let psd_blocks = sizes.iter().filter(|&&s| s > 1).count();
    if psd_blocks > 1 {
        return Err(format!(
            "sdpa: {psd_blocks} semidefinite blocks; only one is supported"
        ));
    }
    let mut offsets = Vec::with_capacity(nblocks);
    let mut n = 0usize;
    for &s in &sizes {
        offsets.push(n);
        n += s.unsigned_abs() as usize;
    }
    if n == 0 {
        return Err("sdpa: zero total dimension".into());
    }

    let mut b = Vec::with_capacity(m);
    for i in 0..m {
        b.push(parse_f64(cur.next("objective entry")?, &format!("objective entry {i}"))?);
    }

    let zero = vec![vec![0.0; n]; n];
    let mut mats = vec![zero; m + 1];
    while !cur.exhausted() {
        let matno = parse_usize(cur.next("matrix index")?, "matrix index")?;
        let (blk_line, blk_tok) = cur.next("block index")?;
        let blkno = parse_usize((blk_line, blk_tok), "block index")?;
        let i = parse_usize(cur.next("row index")?, "row index")?;
        let j = parse_usize(cur.next("column index")?, "column index")?;
        let v = parse_f64(cur.next("value")?, "value")?;
        if matno > m {
            return Err(format!(
                "sdpa line {blk_line}: matrix index {matno} exceeds constraint count {m}"
            ));
        }
        if blkno == 0 || blkno > nblocks {
            return Err(format!("sdpa line {blk_line}: block index {blkno} out of range"));
        }
        let size = sizes[blkno - 1].unsigned_abs() as usize;
        if i == 0 || j == 0 || i > size || j > size {
            return Err(format!(
                "sdpa line {blk_line}: entry ({i}, {j}) out of range for block {blkno} of size {size}"
            ));
        }
        if sizes[blkno - 1] < 0 && i != j {
            return Err(format!(
                "sdpa line {blk_line}: off-diagonal entry in diagonal block {blkno}"
            ));
        }
        let gi = offsets[blkno - 1] + i - 1;
        let gj = offsets[blkno - 1] + j - 1;
        mats[matno][gi][gj] = v;
        mats[matno][gj][gi] = v;
    }

    let c: Vec<Vec<f64>> = mats[0]
        .iter()
        .map(|row| row.iter().map(|v| -v).collect())
        .collect();
    let constraints = (1..=m)
        .map(|k| ConstraintFile {
            a: mats[k].clone(),
            b: b[k - 1],
            kind: ConstraintKind::Eq,
        })
        .collect();
    Ok(ProblemFile {
        n,
        objective: ObjectiveFile::Linear,
        c,
        constraints,
        strictly_feasible: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = r#""toy problem
2
1
2
10.0 20.0
0 1 1 1 1.0
0 1 2 2 2.0
1 1 1 1 1.0
1 1 1 2 1.0
2 1 2 2 1.0
"#;

    #[test]
    fn parses_single_block() {
        let pf = parse_sdpa(SMALL).unwrap();
        assert_eq!(pf.n, 2);
        assert_eq!(pf.constraints.len(), 2);
        assert_eq!(pf.c[0][0], -1.0);
        assert_eq!(pf.c[1][1], -2.0);
        assert_eq!(pf.constraints[0].a[0][1], 1.0);
        assert_eq!(pf.constraints[0].a[1][0], 1.0);
        assert_eq!(pf.constraints[0].b, 10.0);
        assert!(pf.build().is_ok());
    }

    #[test]
    fn lp_block_maps_to_diagonal() {
        let text = r#"1
2
2 -2
1.0
0 1 1 2 0.5
1 2 1 1 3.0
1 2 2 2 4.0
"#;
        let pf = parse_sdpa(text).unwrap();
        assert_eq!(pf.n, 4);
        assert_eq!(pf.constraints[0].a[2][2], 3.0);
        assert_eq!(pf.constraints[0].a[3][3], 4.0);
        assert_eq!(pf.c[0][1], -0.5);
    }

    #[test]
    fn rejects_two_psd_blocks() {
        let text = "1\n2\n2 3\n1.0\n";
        assert!(parse_sdpa(text).unwrap_err().contains("only one"));
    }

    #[test]
    fn rejects_offdiagonal_lp_entry() {
        let text = "1\n1\n-2\n1.0\n1 1 1 2 3.0\n";
        assert!(parse_sdpa(text).unwrap_err().contains("off-diagonal"));
    }
}
