//! Standard-form conic program data.
//!
//! A [`ConeProgram`] encodes
//!
//! ```text
//! minimize    cᵀx
//! subject to  s = b − A x,   s ∈ K = K₁ × K₂ × … ,
//! ```
//!
//! with `x` free. Each cone block owns a contiguous range of rows. Blocks
//! flagged as *variable* blocks have `A = −I` on a contiguous range of `x`
//! and `b = 0`, i.e. they constrain a group of variables directly; the
//! solver exploits that structure.
//!
//! PSD blocks store their slack in an isometric vectorization: `svec` for
//! real symmetric blocks (diagonal entry, then `√2·` each strictly-upper
//! entry, row by row) and [`hermitian_vec`](crate::hermitian::hermitian_vec)
//! for complex blocks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hermitian::{hermitian_unvec, hermitian_vec, psd_project, HermitianMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Cone {
    Nonneg { size: usize },
    Psd { order: usize, complex: bool },
}

impl Cone {
    pub fn nonneg(size: usize) -> Self {
        Cone::Nonneg { size }
    }

    pub fn psd(order: usize, complex: bool) -> Self {
        Cone::Psd { order, complex }
    }

    /// Number of real rows the block occupies.
    pub fn dim(&self) -> usize {
        match *self {
            Cone::Nonneg { size } => size,
            Cone::Psd { order, complex: true } => order * order,
            Cone::Psd { order, complex: false } => order * (order + 1) / 2,
        }
    }

    /// Euclidean projection of `v` onto the cone (the cone is self-dual, so
    /// this also projects onto the dual cone).
    pub fn project(&self, v: &[f64]) -> Vec<f64> {
        match *self {
            Cone::Nonneg { .. } => v.iter().map(|x| x.max(0.0)).collect(),
            Cone::Psd { order, complex } => {
                let h = psd_block_matrix(v, order, complex);
                let p = psd_project(&h).expect("finite cone point");
                psd_block_vec(&p, complex)
            }
        }
    }

    pub fn distance(&self, v: &[f64]) -> f64 {
        let p = self.project(v);
        v.iter()
            .zip(&p)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

/// Real symmetric blocks are carried as Hermitian matrices with zero
/// imaginary part so one projection routine serves both.
pub(crate) fn psd_block_matrix(v: &[f64], order: usize, complex: bool) -> HermitianMatrix {
    if complex {
        hermitian_unvec(v, order).expect("cone dimension")
    } else {
        let h = svec_to_hvec(v, order);
        hermitian_unvec(&h, order).expect("cone dimension")
    }
}

pub(crate) fn psd_block_vec(a: &HermitianMatrix, complex: bool) -> Vec<f64> {
    let h = hermitian_vec(a);
    if complex {
        h
    } else {
        hvec_to_svec(&h, a.order())
    }
}

fn svec_to_hvec(v: &[f64], n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n * n);
    let mut it = v.iter();
    for i in 0..n {
        out.push(*it.next().unwrap());
        for _ in i + 1..n {
            out.push(*it.next().unwrap());
            out.push(0.0);
        }
    }
    out
}

fn hvec_to_svec(h: &[f64], n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n * (n + 1) / 2);
    let mut it = h.iter();
    for i in 0..n {
        out.push(*it.next().unwrap());
        for _ in i + 1..n {
            out.push(*it.next().unwrap());
            it.next();
        }
    }
    out
}

/// Semantic origin of a cone block. Indices are 0-based.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "index", rename_all = "snake_case")]
pub enum BlockLabel {
    UserCovariance(usize),
    CompressionCovariance,
    Sinr(usize),
    Fronthaul(usize),
    PowerBudget(usize),
    Other(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeBlock {
    pub cone: Cone,
    pub label: BlockLabel,
    pub row_offset: usize,
    /// Set for variable blocks: rows are `s = x[offset..offset + dim]`.
    pub variable_offset: Option<usize>,
}

impl ConeBlock {
    pub fn rows(&self) -> std::ops::Range<usize> {
        self.row_offset..self.row_offset + self.cone.dim()
    }
}

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub data: Vec<f64>,
}

impl SparseMatrix {
    /// Builds from `(row, col, value)` triplets; duplicates are summed and
    /// exact zeros dropped.
    pub fn from_triplets(nrows: usize, ncols: usize, mut t: Vec<(usize, usize, f64)>) -> Self {
        t.sort_by_key(|a| (a.0, a.1));
        let mut indptr = vec![0; nrows + 1];
        let mut indices = Vec::with_capacity(t.len());
        let mut data: Vec<f64> = Vec::with_capacity(t.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in t {
            assert!(r < nrows && c < ncols, "triplet out of bounds");
            if last == Some((r, c)) {
                *data.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                data.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..nrows {
            indptr[r + 1] += indptr[r];
        }
        let mut m = Self {
            nrows,
            ncols,
            indptr,
            indices,
            data,
        };
        m.drop_zeros();
        m
    }

    fn drop_zeros(&mut self) {
        let mut indptr = vec![0; self.nrows + 1];
        let mut indices = Vec::with_capacity(self.indices.len());
        let mut data = Vec::with_capacity(self.data.len());
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                if v != 0.0 {
                    indices.push(c);
                    data.push(v);
                }
            }
            indptr[r + 1] = indices.len();
        }
        self.indptr = indptr;
        self.indices = indices;
        self.data = data;
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.indptr[r]..self.indptr[r + 1];
        self.indices[span.clone()]
            .iter()
            .copied()
            .zip(self.data[span].iter().copied())
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.nrows)
            .map(|r| self.row(r).map(|(c, v)| v * x[c]).sum())
            .collect()
    }

    pub fn matvec_transpose(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.ncols];
        for (r, &yr) in y.iter().enumerate() {
            if yr == 0.0 {
                continue;
            }
            for (c, v) in self.row(r) {
                out[c] += v * yr;
            }
        }
        out
    }

    pub fn row_inf_norm(&self, r: usize) -> f64 {
        self.row(r).map(|(_, v)| v.abs()).fold(0.0, f64::max)
    }

    pub(crate) fn scale_row(&mut self, r: usize, factor: f64) {
        for v in &mut self.data[self.indptr[r]..self.indptr[r + 1]] {
            *v *= factor;
        }
    }
}

/// Network dimensions a program was built for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemShape {
    pub num_bs: usize,
    pub num_users: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProgramKind {
    /// Full relaxation including per-antenna power rows.
    Sdr,
    /// Power-budget rows dualized with these multipliers.
    Inner { multipliers: Vec<f64> },
    Generic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeProgram {
    pub num_vars: usize,
    pub objective: Vec<f64>,
    pub a: SparseMatrix,
    pub b: Vec<f64>,
    pub blocks: Vec<ConeBlock>,
    /// Positive factor each row was divided by at build time; multiply a
    /// scaled slack by it to recover the physical slack.
    pub row_scale: Vec<f64>,
    pub kind: ProgramKind,
    pub shape: Option<ProblemShape>,
}

impl ConeProgram {
    /// Assembles a program from blocks given in order; `rows` holds the
    /// `(row, col, value)` triplets of `A` for non-variable blocks (variable
    /// blocks get their `−I` rows automatically).
    pub fn assemble(
        num_vars: usize,
        objective: Vec<f64>,
        specs: Vec<BlockSpec>,
        kind: ProgramKind,
        shape: Option<ProblemShape>,
    ) -> Result<Self> {
        if objective.len() != num_vars {
            return Err(Error::DimensionMismatch {
                what: "objective",
                expected: num_vars,
                got: objective.len(),
            });
        }
        let mut blocks = Vec::with_capacity(specs.len());
        let mut triplets = Vec::new();
        let mut b = Vec::new();
        let mut row = 0;
        for spec in specs {
            let dim = spec.cone.dim();
            match spec.variable_offset {
                Some(off) => {
                    if off + dim > num_vars {
                        return Err(Error::invalid("variable block exceeds variable count"));
                    }
                    for i in 0..dim {
                        triplets.push((row + i, off + i, -1.0));
                    }
                    b.extend(std::iter::repeat_n(0.0, dim));
                }
                None => {
                    if spec.offset.len() != dim {
                        return Err(Error::DimensionMismatch {
                            what: "block offset vector",
                            expected: dim,
                            got: spec.offset.len(),
                        });
                    }
                    for (r, c, v) in spec.rows {
                        if r >= dim || c >= num_vars {
                            return Err(Error::invalid("block triplet out of range"));
                        }
                        triplets.push((row + r, c, v));
                    }
                    b.extend(spec.offset);
                }
            }
            blocks.push(ConeBlock {
                cone: spec.cone,
                label: spec.label,
                row_offset: row,
                variable_offset: spec.variable_offset,
            });
            row += dim;
        }
        let a = SparseMatrix::from_triplets(row, num_vars, triplets);
        let p = Self {
            num_vars,
            objective,
            a,
            b,
            blocks,
            row_scale: vec![1.0; row],
            kind,
            shape,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn num_rows(&self) -> usize {
        self.b.len()
    }

    pub fn validate(&self) -> Result<()> {
        let total: usize = self.blocks.iter().map(|b| b.cone.dim()).sum();
        if total != self.num_rows() || self.a.nrows != total || self.row_scale.len() != total {
            return Err(Error::invalid("cone block sizes do not sum to the row count"));
        }
        if self.a.ncols != self.num_vars || self.objective.len() != self.num_vars {
            return Err(Error::invalid("column count does not match variable count"));
        }
        let mut labels = std::collections::HashSet::new();
        let mut covered = vec![false; self.num_vars];
        let mut next_row = 0;
        for blk in &self.blocks {
            if blk.row_offset != next_row {
                return Err(Error::invalid("cone blocks must be contiguous and ordered"));
            }
            next_row += blk.cone.dim();
            if !labels.insert(blk.label.clone()) {
                return Err(Error::invalid(format!("duplicate block label {:?}", blk.label)));
            }
            if let Some(off) = blk.variable_offset {
                for (i, r) in blk.rows().enumerate() {
                    let entries: Vec<_> = self.a.row(r).collect();
                    if entries.len() != 1 || entries[0].0 != off + i || self.b[r] != 0.0 {
                        return Err(Error::invalid("variable block rows must be −I with zero offset"));
                    }
                    if covered[off + i] {
                        return Err(Error::invalid("variable blocks overlap"));
                    }
                    covered[off + i] = true;
                }
            }
        }
        if self.objective.iter().chain(&self.b).chain(&self.a.data).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("cone program data"));
        }
        Ok(())
    }

    pub fn block(&self, label: &BlockLabel) -> Option<&ConeBlock> {
        self.blocks.iter().find(|b| &b.label == label)
    }

    /// Divides every non-variable row by its coefficient ∞-norm. PSD blocks
    /// share one factor (their largest row norm) so the cone is unchanged.
    pub fn normalize_rows(&mut self) {
        for blk in &self.blocks {
            if blk.variable_offset.is_some() {
                continue;
            }
            let rows = blk.rows();
            match blk.cone {
                Cone::Nonneg { .. } => {
                    for r in rows {
                        let n = self.a.row_inf_norm(r);
                        if n > 0.0 {
                            self.a.scale_row(r, 1.0 / n);
                            self.b[r] /= n;
                            self.row_scale[r] *= n;
                        }
                    }
                }
                Cone::Psd { .. } => {
                    let n = rows.clone().map(|r| self.a.row_inf_norm(r)).fold(0.0, f64::max);
                    if n > 0.0 {
                        for r in rows {
                            self.a.scale_row(r, 1.0 / n);
                            self.b[r] /= n;
                            self.row_scale[r] *= n;
                        }
                    }
                }
            }
        }
    }

    /// `b − A x`.
    pub fn slack(&self, x: &[f64]) -> Vec<f64> {
        let ax = self.a.matvec(x);
        self.b.iter().zip(ax).map(|(b, a)| b - a).collect()
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, x)| c * x).sum()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let p: Self = serde_json::from_str(s)?;
        p.validate()?;
        Ok(p)
    }
}

/// One block handed to [`ConeProgram::assemble`].
#[derive(Debug, Clone)]
pub struct BlockSpec {
    pub cone: Cone,
    pub label: BlockLabel,
    pub variable_offset: Option<usize>,
    /// Block-local `(row, col, value)` entries of `A`.
    pub rows: Vec<(usize, usize, f64)>,
    /// Block-local entries of `b`.
    pub offset: Vec<f64>,
}

impl BlockSpec {
    pub fn variable(cone: Cone, label: BlockLabel, offset: usize) -> Self {
        Self {
            cone,
            label,
            variable_offset: Some(offset),
            rows: vec![],
            offset: vec![],
        }
    }

    pub fn constraint(
        cone: Cone,
        label: BlockLabel,
        rows: Vec<(usize, usize, f64)>,
        offset: Vec<f64>,
    ) -> Self {
        Self {
            cone,
            label,
            variable_offset: None,
            rows,
            offset,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sparse_sums_duplicates_and_drops_zeros() {
        let m = SparseMatrix::from_triplets(2, 3, vec![(0, 1, 1.0), (0, 1, 2.0), (1, 2, 1.0), (1, 2, -1.0)]);
        assert_eq!(m.nnz(), 1);
        assert_eq!(m.matvec(&[1.0, 1.0, 1.0]), vec![3.0, 0.0]);
        assert_eq!(m.matvec_transpose(&[1.0, 5.0]), vec![0.0, 3.0, 0.0]);
    }

    #[test]
    fn cone_dims_and_projection() {
        assert_eq!(Cone::psd(3, true).dim(), 9);
        assert_eq!(Cone::psd(3, false).dim(), 6);
        let p = Cone::psd(2, false).project(&[1.0, 0.0, -1.0]);
        assert!((p[0] - 1.0).abs() < 1e-14 && p[2].abs() < 1e-14);
        // [[0,1],[1,0]] in svec is (0, √2, 0)
        let p = Cone::psd(2, false).project(&[0.0, 2f64.sqrt(), 0.0]);
        assert!((p[0] - 0.5).abs() < 1e-14 && (p[1] - 0.5 * 2f64.sqrt()).abs() < 1e-14);
        assert_eq!(Cone::nonneg(2).distance(&[-3.0, 4.0]), 3.0);
    }

    #[test]
    fn assemble_rejects_duplicate_labels() {
        let specs = vec![
            BlockSpec::variable(Cone::nonneg(1), BlockLabel::Other("x".into()), 0),
            BlockSpec::constraint(Cone::nonneg(1), BlockLabel::Other("x".into()), vec![(0, 0, -1.0)], vec![-1.0]),
        ];
        assert!(ConeProgram::assemble(1, vec![1.0], specs, ProgramKind::Generic, None).is_err());
    }

    #[test]
    fn normalize_keeps_psd_blocks_uniform() {
        let specs = vec![BlockSpec::constraint(
            Cone::psd(2, false),
            BlockLabel::Other("lmi".into()),
            vec![(0, 0, -4.0), (1, 0, -1.0), (2, 0, -2.0)],
            vec![1.0, 0.0, 1.0],
        )];
        let mut p = ConeProgram::assemble(1, vec![1.0], specs, ProgramKind::Generic, None).unwrap();
        p.normalize_rows();
        assert_eq!(p.row_scale, vec![4.0; 3]);
        assert_eq!(p.b, vec![0.25, 0.0, 0.25]);
    }
}
