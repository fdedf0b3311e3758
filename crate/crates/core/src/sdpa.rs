//! SDPA sparse format and export of the performance-estimation programs.
//!
//! SDPA pairs
//!
//! ```text
//! (primal) min c'x       s.t. X = sum_i F_i x_i - F_0 >= 0
//! (dual)   max F_0 . Y   s.t. F_i . Y = c_i,  Y >= 0
//! ```
//!
//! Files list `m`, the block count, block sizes (negative for diagonal
//! blocks), `c`, then `matrix block i j value` lines for the upper triangle,
//! all indices 1-based. The in-memory API below is 0-based.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::certificate::GramIndexing;
use crate::error::{invalid, Error, Result};
use crate::numeric::fmt_f64;
use crate::schedules::{theta_ogm, InexactnessSchedule, StepsizeSchedule};

#[derive(Debug, Clone, PartialEq)]
pub struct SdpaProblem {
    /// Positive for dense symmetric blocks, negative for diagonal ones.
    pub block_sizes: Vec<i64>,
    pub objective: Vec<f64>,
    /// `(matrix, block, row, col) -> value`, `row <= col`, matrix 0 is `F_0`.
    pub entries: BTreeMap<(usize, usize, usize, usize), f64>,
}

impl SdpaProblem {
    pub fn new(block_sizes: Vec<i64>, objective: Vec<f64>) -> Self {
        Self {
            block_sizes,
            objective,
            entries: BTreeMap::new(),
        }
    }

    pub fn constraint_count(&self) -> usize {
        self.objective.len()
    }

    fn block_dim(&self, block: usize) -> usize {
        self.block_sizes[block].unsigned_abs() as usize
    }

    /// Adds `value` at `(row, col)` of `F_matrix`; symmetric, so the pair is
    /// stored once.
    pub fn add(&mut self, matrix: usize, block: usize, row: usize, col: usize, value: f64) {
        let (r, c) = if row <= col { (row, col) } else { (col, row) };
        assert!(matrix <= self.constraint_count() && block < self.block_sizes.len());
        assert!(c < self.block_dim(block), "entry outside block {block}");
        assert!(self.block_sizes[block] > 0 || r == c, "off-diagonal in diagonal block");
        *self.entries.entry((matrix, block, r, c)).or_insert(0.0) += value;
    }

    /// Adds the upper triangle of a dense symmetric matrix.
    pub fn add_dense(&mut self, matrix: usize, block: usize, m: &DMatrix<f64>) {
        for c in 0..m.ncols() {
            for r in 0..=c {
                if m[(r, c)] != 0.0 {
                    self.add(matrix, block, r, c, m[(r, c)]);
                }
            }
        }
    }

    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(self.to_text().as_bytes())?;
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{}", self.constraint_count());
        let _ = writeln!(s, "{}", self.block_sizes.len());
        let sizes: Vec<String> = self.block_sizes.iter().map(|b| b.to_string()).collect();
        let _ = writeln!(s, "{}", sizes.join(" "));
        let c: Vec<String> = self.objective.iter().map(|&v| fmt_f64(v)).collect();
        let _ = writeln!(s, "{}", c.join(" "));
        for (&(m, b, r, c), &v) in &self.entries {
            if v != 0.0 {
                let _ = writeln!(s, "{} {} {} {} {}", m, b + 1, r + 1, c + 1, fmt_f64(v));
            }
        }
        s
    }

    /// Reads SDPA sparse text. Comment lines start with `"` or `*`; braces,
    /// parentheses and commas count as whitespace.
    pub fn parse(text: &str) -> Result<Self> {
        let mut tokens = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.starts_with('"') || line.starts_with('*') {
                continue;
            }
            let cleaned: String = line
                .chars()
                .map(|c| if "{}(),".contains(c) { ' ' } else { c })
                .collect();
            tokens.extend(cleaned.split_whitespace().map(|t| (n + 1, t.to_string())));
        }
        let mut it = tokens.into_iter();
        let mut next = |what: &str| {
            it.next().ok_or_else(|| Error::SdpaParse {
                line: 0,
                msg: format!("unexpected end of input, expected {what}"),
            })
        };
        fn num<T: std::str::FromStr>(tok: (usize, String), what: &str) -> Result<T> {
            tok.1.parse().map_err(|_| Error::SdpaParse {
                line: tok.0,
                msg: format!("cannot read {what} from '{}'", tok.1),
            })
        }
        let m: usize = num(next("constraint count")?, "constraint count")?;
        let nblocks: usize = num(next("block count")?, "block count")?;
        let mut block_sizes = Vec::with_capacity(nblocks);
        for _ in 0..nblocks {
            let b: i64 = num(next("block size")?, "block size")?;
            if b == 0 {
                return Err(Error::SdpaParse {
                    line: 3,
                    msg: "block size 0".into(),
                });
            }
            block_sizes.push(b);
        }
        let mut objective = Vec::with_capacity(m);
        for _ in 0..m {
            objective.push(num::<f64>(next("objective entry")?, "objective entry")?);
        }
        let mut problem = Self::new(block_sizes, objective);
        let rest: Vec<(usize, String)> = it.collect();
        if !rest.len().is_multiple_of(5) {
            return Err(Error::SdpaParse {
                line: rest.last().map(|t| t.0).unwrap_or(0),
                msg: "matrix entries must come in groups of five".into(),
            });
        }
        for chunk in rest.chunks(5) {
            let line = chunk[0].0;
            let mat: usize = num(chunk[0].clone(), "matrix number")?;
            let block: usize = num(chunk[1].clone(), "block number")?;
            let r: usize = num(chunk[2].clone(), "row")?;
            let c: usize = num(chunk[3].clone(), "column")?;
            let v: f64 = num(chunk[4].clone(), "value")?;
            let bad = |msg: &str| Error::SdpaParse {
                line,
                msg: msg.to_string(),
            };
            if mat > m {
                return Err(bad("matrix number exceeds constraint count"));
            }
            if block == 0 || block > nblocks {
                return Err(bad("block number out of range"));
            }
            let dim = problem.block_dim(block - 1);
            if r == 0 || c == 0 || r > dim || c > dim {
                return Err(bad("index outside block"));
            }
            if problem.block_sizes[block - 1] < 0 && r != c {
                return Err(bad("off-diagonal entry in diagonal block"));
            }
            problem.add(mat, block - 1, r - 1, c - 1, v);
        }
        Ok(problem)
    }

    /// Dense symmetric blocks of `F_matrix`.
    pub fn dense(&self, matrix: usize) -> Vec<DMatrix<f64>> {
        let mut blocks: Vec<DMatrix<f64>> = (0..self.block_sizes.len())
            .map(|b| DMatrix::zeros(self.block_dim(b), self.block_dim(b)))
            .collect();
        for (&(m, b, r, c), &v) in self.entries.range((matrix, 0, 0, 0)..(matrix + 1, 0, 0, 0)) {
            debug_assert_eq!(m, matrix);
            blocks[b][(r, c)] = v;
            blocks[b][(c, r)] = v;
        }
        blocks
    }

    /// `X = sum_i F_i x_i - F_0`, block by block.
    pub fn primal_slack(&self, x: &[f64]) -> Result<Vec<DMatrix<f64>>> {
        if x.len() != self.constraint_count() {
            return Err(Error::DimensionMismatch {
                expected: self.constraint_count(),
                got: x.len(),
            });
        }
        let mut out: Vec<DMatrix<f64>> = self.dense(0).into_iter().map(|b| -b).collect();
        for (&(m, b, r, c), &v) in &self.entries {
            if m == 0 {
                continue;
            }
            let w = v * x[m - 1];
            out[b][(r, c)] += w;
            if r != c {
                out[b][(c, r)] += w;
            }
        }
        Ok(out)
    }

    /// `(F_0 . Y, [F_i . Y])` for a block-diagonal `Y`.
    pub fn dual_values(&self, y: &[DMatrix<f64>]) -> Result<(f64, Vec<f64>)> {
        if y.len() != self.block_sizes.len() {
            return Err(Error::DimensionMismatch {
                expected: self.block_sizes.len(),
                got: y.len(),
            });
        }
        let mut vals = vec![0.0; self.constraint_count() + 1];
        for (&(m, b, r, c), &v) in &self.entries {
            let mult = if r == c { 1.0 } else { 2.0 };
            vals[m] += mult * v * y[b][(r, c)];
        }
        let objective = vals.remove(0);
        Ok((objective, vals))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SdpTarget {
    /// The worst-case problem over Gram matrix `G` and function values.
    PrimalP,
    /// The certificate problem over `(tau, u, v, v*)`.
    DualD,
}

impl SdpTarget {
    pub fn label(self) -> &'static str {
        match self {
            SdpTarget::PrimalP => "primal-P",
            SdpTarget::DualD => "dual-D",
        }
    }
}

impl std::str::FromStr for SdpTarget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "primal-P" | "primal-p" | "primal" => Ok(SdpTarget::PrimalP),
            "dual-D" | "dual-d" | "dual" => Ok(SdpTarget::DualD),
            other => Err(invalid(format!("unknown SDP target '{other}'"))),
        }
    }
}

/// Interpolation matrices of the optimized-gradient iterates in Gram form.
struct PepData {
    idx: GramIndexing,
    consecutive: Vec<DMatrix<f64>>,
    optimality: Vec<DMatrix<f64>>,
    x0: DMatrix<f64>,
    errors: Vec<DMatrix<f64>>,
    /// `g_K g_K' / (2L)`.
    final_gradient: DMatrix<f64>,
}

impl PepData {
    fn new(schedule: &StepsizeSchedule, lipschitz: f64) -> Self {
        let horizon = schedule.horizon();
        let idx = GramIndexing::new(horizon);
        let theta = theta_ogm(schedule);
        let outer = |v: DVector<f64>| &v * v.transpose();
        let mut x0 = DVector::zeros(idx.dim());
        x0[idx.x0()] = 1.0;
        Self {
            consecutive: (0..horizon)
                .map(|i| idx.consecutive_matrix(&theta, i, lipschitz))
                .collect(),
            optimality: (0..=horizon)
                .map(|i| idx.optimality_matrix(&theta, i, lipschitz))
                .collect(),
            x0: outer(x0),
            errors: (0..horizon).map(|i| outer(idx.error_vector(i))).collect(),
            final_gradient: outer(idx.gradient_vector(horizon)) / (2.0 * lipschitz),
            idx,
        }
    }
}

/// Builds the SDP for the optimized-gradient iterates with radius `R` and
/// error levels `b`.
///
/// `DualD`: variables `x = (tau, u_0..u_{K-1}, v_{0,1}..v_{K-1,K}, v*_0..v*_K)`,
/// blocks `[Gram 2K+2 | -(3K+2) sign | -2(K+1) equality pairs]`, objective
/// `tau R^2 + sum u_i b_i^2`.
///
/// `PrimalP`: `Y = diag(G, f+/f- split of f_0..f_K, slacks)`; constraints in
/// order `K` consecutive interpolations, `K+1` optimality ones, the initial
/// distance, then `K` error norms; `F_0 . Y = f_K - G . g_K g_K' / (2L)`.
pub fn export_sdp(
    schedule: &StepsizeSchedule,
    lipschitz: f64,
    radius: f64,
    inexactness: &InexactnessSchedule,
    target: SdpTarget,
) -> Result<SdpaProblem> {
    let horizon = schedule.horizon();
    if inexactness.horizon() != horizon {
        return Err(Error::DimensionMismatch {
            expected: horizon,
            got: inexactness.horizon(),
        });
    }
    if !(lipschitz > 0.0) || !(radius >= 0.0) {
        return Err(invalid("need L > 0 and R >= 0"));
    }
    let pep = PepData::new(schedule, lipschitz);
    let n = pep.idx.dim();
    let m = 3 * horizon + 2;
    let b2: Vec<f64> = inexactness.levels().iter().map(|b| b * b).collect();
    let problem = match target {
        SdpTarget::DualD => {
            let mut c = vec![0.0; m];
            c[0] = radius * radius;
            c[1..=horizon].copy_from_slice(&b2);
            let mut p = SdpaProblem::new(vec![n as i64, -(m as i64), -2 * (horizon as i64 + 1)], c);
            let tau = 1;
            let u = |i: usize| 2 + i;
            let v = |i: usize| 2 + horizon + i;
            let vs = |i: usize| 2 + 2 * horizon + i;
            p.add_dense(0, 0, &(-&pep.final_gradient));
            p.add_dense(tau, 0, &pep.x0);
            for i in 0..horizon {
                p.add_dense(u(i), 0, &pep.errors[i]);
                p.add_dense(v(i), 0, &pep.consecutive[i]);
            }
            for i in 0..=horizon {
                p.add_dense(vs(i), 0, &pep.optimality[i]);
            }
            for var in 1..=m {
                p.add(var, 1, var - 1, var - 1, 1.0);
            }
            // coefficient of f_j: v_{j,j+1} - v_{j-1,j} - v*_j + [j = K] = 0
            for j in 0..=horizon {
                let mut terms = vec![(vs(j), -1.0)];
                if j < horizon {
                    terms.push((v(j), 1.0));
                }
                if j > 0 {
                    terms.push((v(j - 1), -1.0));
                }
                for (var, coef) in terms {
                    p.add(var, 2, 2 * j, 2 * j, coef);
                    p.add(var, 2, 2 * j + 1, 2 * j + 1, -coef);
                }
                if j == horizon {
                    p.add(0, 2, 2 * j, 2 * j, -1.0);
                    p.add(0, 2, 2 * j + 1, 2 * j + 1, 1.0);
                }
            }
            p
        }
        SdpTarget::PrimalP => {
            let mut c = vec![0.0; m];
            c[2 * horizon + 1] = radius * radius;
            c[2 * horizon + 2..].copy_from_slice(&b2);
            let mut p = SdpaProblem::new(vec![n as i64, -2 * (horizon as i64 + 1), -(m as i64)], c);
            // f_j = f+_j - f-_j at diagonal slots 2j, 2j+1 of block 1
            let add_value = |p: &mut SdpaProblem, mat: usize, j: usize, coef: f64| {
                p.add(mat, 1, 2 * j, 2 * j, coef);
                p.add(mat, 1, 2 * j + 1, 2 * j + 1, -coef);
            };
            p.add_dense(0, 0, &(-&pep.final_gradient));
            add_value(&mut p, 0, horizon, 1.0);
            for i in 0..horizon {
                let mat = 1 + i;
                p.add_dense(mat, 0, &pep.consecutive[i]);
                add_value(&mut p, mat, i + 1, 1.0);
                add_value(&mut p, mat, i, -1.0);
            }
            for i in 0..=horizon {
                let mat = 1 + horizon + i;
                p.add_dense(mat, 0, &pep.optimality[i]);
                add_value(&mut p, mat, i, 1.0);
            }
            p.add_dense(2 * horizon + 2, 0, &pep.x0);
            for i in 0..horizon {
                p.add_dense(2 * horizon + 3 + i, 0, &pep.errors[i]);
            }
            for mat in 1..=m {
                p.add(mat, 2, mat - 1, mat - 1, 1.0);
            }
            p
        }
    };
    Ok(problem)
}

/// Certificate variables in the `DualD` ordering.
pub fn dual_d_point(cert: &crate::certificate::DualCertificate) -> Vec<f64> {
    std::iter::once(cert.tau)
        .chain(cert.u.iter().copied())
        .chain(cert.v.iter().copied())
        .chain(cert.v_star.iter().copied())
        .collect()
}

/// Certificate variables in the constraint order of `PrimalP`, for
/// evaluating that file's SDPA primal side.
pub fn primal_p_multipliers(cert: &crate::certificate::DualCertificate) -> Vec<f64> {
    cert.v
        .iter()
        .copied()
        .chain(cert.v_star.iter().copied())
        .chain(std::iter::once(cert.tau))
        .chain(cert.u.iter().copied())
        .collect()
}
