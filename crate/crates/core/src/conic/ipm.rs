//! Infeasible-start primal-dual interior-point method on the internal block
//! form
//!
//! ```text
//! minimize ⟨C, X⟩  s.t.  ⟨A_i, X⟩ = b_i,  X = (X_1, …) ⪰ 0
//! maximize bᵀy     s.t.  C − Σ y_i A_i = Z ⪰ 0
//! ```
//!
//! Each scalar coordinate of the program (a variable or a constraint-row
//! slack) corresponds to one basis matrix `N` inside an internal block.
//! The coordinate value is `w·⟨N, X⟩`, where `w = 1/‖N‖²`.

use nalgebra::{Cholesky, DMatrix, DVector};

use super::{kkt_residuals, KktResiduals, SolveResult, SolveStatus, SolverSettings, WarmStart};
use crate::sdr::{Cone, ConeProgram};

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;
const STEP_FRACTION: f64 = 0.98;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Kind {
    Lp,
    Sdp,
}

#[derive(Debug, Clone, Copy)]
struct IBlock {
    kind: Kind,
    size: usize,
}

/// Upper-triangle entries `(r, c, v)`, `r ≤ c`, of a symmetric matrix; an
/// off-diagonal entry stands for both `(r, c)` and `(c, r)`. LP blocks use
/// `(d, d, v)`.
type Entries = Vec<(usize, usize, f64)>;

#[derive(Debug, Clone)]
struct Basis {
    blk: usize,
    entries: Entries,
    weight: f64,
}

#[derive(Debug, Clone)]
struct SymData {
    entries: Entries,
    dense: Option<DMatrix<f64>>,
    fro: f64,
}

#[derive(Debug, Clone)]
enum Mat {
    Sdp(DMatrix<f64>),
    Lp(DVector<f64>),
}

impl Mat {
    fn zeros(b: IBlock) -> Self {
        match b.kind {
            Kind::Sdp => Mat::Sdp(DMatrix::zeros(b.size, b.size)),
            Kind::Lp => Mat::Lp(DVector::zeros(b.size)),
        }
    }

    fn identity(b: IBlock, s: f64) -> Self {
        match b.kind {
            Kind::Sdp => Mat::Sdp(DMatrix::identity(b.size, b.size) * s),
            Kind::Lp => Mat::Lp(DVector::from_element(b.size, s)),
        }
    }

    fn sdp(&self) -> &DMatrix<f64> {
        match self {
            Mat::Sdp(m) => m,
            Mat::Lp(_) => unreachable!("LP block used as SDP"),
        }
    }

    fn lp(&self) -> &DVector<f64> {
        match self {
            Mat::Lp(v) => v,
            Mat::Sdp(_) => unreachable!("SDP block used as LP"),
        }
    }

    fn dot(&self, o: &Mat) -> f64 {
        match (self, o) {
            (Mat::Sdp(a), Mat::Sdp(b)) => a.dot(b),
            (Mat::Lp(a), Mat::Lp(b)) => a.dot(b),
            _ => unreachable!(),
        }
    }

    fn axpy(&mut self, alpha: f64, o: &Mat) {
        match (self, o) {
            (Mat::Sdp(a), Mat::Sdp(b)) => a.zip_apply(b, |x, y| *x += alpha * y),
            (Mat::Lp(a), Mat::Lp(b)) => a.axpy(alpha, b, 1.0),
            _ => unreachable!(),
        }
    }

    fn norm_sq(&self) -> f64 {
        match self {
            Mat::Sdp(a) => a.norm_squared(),
            Mat::Lp(a) => a.norm_squared(),
        }
    }

    /// `⟨S, self⟩` for symmetric `S` given by entries.
    fn inner(&self, e: &[(usize, usize, f64)]) -> f64 {
        match self {
            Mat::Sdp(m) => e
                .iter()
                .map(|&(r, c, v)| if r == c { v * m[(r, c)] } else { v * (m[(r, c)] + m[(c, r)]) })
                .sum(),
            Mat::Lp(x) => e.iter().map(|&(r, _, v)| v * x[r]).sum(),
        }
    }

    fn add_entries(&mut self, alpha: f64, e: &[(usize, usize, f64)]) {
        match self {
            Mat::Sdp(m) => {
                for &(r, c, v) in e {
                    m[(r, c)] += alpha * v;
                    if r != c {
                        m[(c, r)] += alpha * v;
                    }
                }
            }
            Mat::Lp(x) => {
                for &(r, _, v) in e {
                    x[r] += alpha * v;
                }
            }
        }
    }
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Internal block form of a program plus the coordinate maps back to it.
struct Internal {
    blocks: Vec<IBlock>,
    var_basis: Vec<Basis>,
    free_vars: Vec<usize>,
    /// Per program row: basis of the coordinate whose dual is that row's `y`.
    row_basis: Vec<Basis>,
    eq_rows: Vec<usize>,
    a: Vec<Vec<(usize, SymData)>>,
    by_block: Vec<Vec<(usize, usize)>>,
    b: DVector<f64>,
    c: Vec<Mat>,
    nu: f64,
}

fn cone_bases(cone: Cone, blk: usize) -> (IBlock, Vec<Basis>) {
    match cone {
        Cone::Nonneg { size } => (
            IBlock { kind: Kind::Lp, size },
            (0..size)
                .map(|d| Basis { blk, entries: vec![(d, d, 1.0)], weight: 1.0 })
                .collect(),
        ),
        Cone::Psd { order: n, complex: false } => {
            let mut out = Vec::with_capacity(n * (n + 1) / 2);
            for i in 0..n {
                out.push(Basis { blk, entries: vec![(i, i, 1.0)], weight: 1.0 });
                for j in i + 1..n {
                    out.push(Basis { blk, entries: vec![(i, j, FRAC_1_SQRT_2)], weight: 1.0 });
                }
            }
            (IBlock { kind: Kind::Sdp, size: n }, out)
        }
        Cone::Psd { order: n, complex: true } => {
            let mut out = Vec::with_capacity(n * n);
            for i in 0..n {
                out.push(Basis { blk, entries: vec![(i, i, 1.0), (i + n, i + n, 1.0)], weight: 0.5 });
                for j in i + 1..n {
                    out.push(Basis {
                        blk,
                        entries: vec![(i, j, FRAC_1_SQRT_2), (i + n, j + n, FRAC_1_SQRT_2)],
                        weight: 0.5,
                    });
                    out.push(Basis {
                        blk,
                        entries: vec![(i, j + n, -FRAC_1_SQRT_2), (j, i + n, FRAC_1_SQRT_2)],
                        weight: 0.5,
                    });
                }
            }
            (IBlock { kind: Kind::Sdp, size: 2 * n }, out)
        }
    }
}

fn merge(mut e: Entries) -> Entries {
    e.sort_by_key(|a| (a.0, a.1));
    let mut out: Entries = Vec::with_capacity(e.len());
    for (r, c, v) in e {
        match out.last_mut() {
            Some(last) if last.0 == r && last.1 == c => last.2 += v,
            _ => out.push((r, c, v)),
        }
    }
    out.retain(|t| t.2 != 0.0);
    out
}

impl Internal {
    fn new(p: &ConeProgram) -> Self {
        let mut blocks = Vec::new();
        let mut var_basis: Vec<Option<Basis>> = vec![None; p.num_vars];
        let mut row_basis: Vec<Option<Basis>> = vec![None; p.num_rows()];
        let mut eq_rows = Vec::new();
        for blk in &p.blocks {
            let (ib, bases) = cone_bases(blk.cone, blocks.len());
            blocks.push(ib);
            match blk.variable_offset {
                Some(off) => {
                    for (i, basis) in bases.into_iter().enumerate() {
                        var_basis[off + i] = Some(basis.clone());
                        row_basis[blk.row_offset + i] = Some(basis);
                    }
                }
                None => {
                    for (i, basis) in bases.into_iter().enumerate() {
                        row_basis[blk.row_offset + i] = Some(basis);
                        eq_rows.push(blk.row_offset + i);
                    }
                }
            }
        }
        let free_vars: Vec<usize> = (0..p.num_vars).filter(|&j| var_basis[j].is_none()).collect();
        if !free_vars.is_empty() {
            let blk = blocks.len();
            blocks.push(IBlock { kind: Kind::Lp, size: 2 * free_vars.len() });
            for (q, &j) in free_vars.iter().enumerate() {
                var_basis[j] = Some(Basis {
                    blk,
                    entries: vec![(2 * q, 2 * q, 1.0), (2 * q + 1, 2 * q + 1, -1.0)],
                    weight: 1.0,
                });
            }
        }
        let var_basis: Vec<Basis> = var_basis.into_iter().map(Option::unwrap).collect();
        let row_basis: Vec<Basis> = row_basis.into_iter().map(Option::unwrap).collect();

        let mut a = Vec::with_capacity(eq_rows.len());
        for &r in &eq_rows {
            let mut per_block: std::collections::BTreeMap<usize, Entries> = Default::default();
            for (j, coef) in p.a.row(r) {
                let nb = &var_basis[j];
                let e = per_block.entry(nb.blk).or_default();
                e.extend(nb.entries.iter().map(|&(rr, cc, v)| (rr, cc, coef * nb.weight * v)));
            }
            let sb = &row_basis[r];
            per_block
                .entry(sb.blk)
                .or_default()
                .extend(sb.entries.iter().map(|&(rr, cc, v)| (rr, cc, sb.weight * v)));
            let row: Vec<(usize, SymData)> = per_block
                .into_iter()
                .map(|(blk, e)| {
                    let entries = merge(e);
                    let ib = blocks[blk];
                    let fro = entries
                        .iter()
                        .map(|&(r, c, v)| if r == c { v * v } else { 2.0 * v * v })
                        .sum::<f64>()
                        .sqrt();
                    let dense = (ib.kind == Kind::Sdp && entries.len() > ib.size).then(|| {
                        let mut m = Mat::zeros(ib);
                        m.add_entries(1.0, &entries);
                        match m {
                            Mat::Sdp(d) => d,
                            Mat::Lp(_) => unreachable!(),
                        }
                    });
                    (blk, SymData { entries, dense, fro })
                })
                .filter(|(_, s)| !s.entries.is_empty())
                .collect();
            a.push(row);
        }
        let mut by_block = vec![Vec::new(); blocks.len()];
        for (i, row) in a.iter().enumerate() {
            for (pos, (blk, _)) in row.iter().enumerate() {
                by_block[*blk].push((i, pos));
            }
        }
        let b = DVector::from_iterator(eq_rows.len(), eq_rows.iter().map(|&r| p.b[r]));
        let mut c: Vec<Mat> = blocks.iter().map(|&ib| Mat::zeros(ib)).collect();
        for (j, &cj) in p.objective.iter().enumerate() {
            if cj != 0.0 {
                let nb = &var_basis[j];
                c[nb.blk].add_entries(cj * nb.weight, &nb.entries);
            }
        }
        let nu = blocks.iter().map(|b| b.size as f64).sum();
        Self {
            blocks,
            var_basis,
            free_vars,
            row_basis,
            eq_rows,
            a,
            by_block,
            b,
            c,
            nu,
        }
    }

    fn m(&self) -> usize {
        self.eq_rows.len()
    }

    /// `⟨A_i, X⟩` for every row.
    fn apply(&self, x: &[Mat]) -> DVector<f64> {
        DVector::from_iterator(
            self.m(),
            self.a
                .iter()
                .map(|row| row.iter().map(|(blk, s)| x[*blk].inner(&s.entries)).sum::<f64>()),
        )
    }

    /// `tr(A_i U)` for non-symmetric `U`.
    fn apply_nonsym(&self, u: &[Mat]) -> DVector<f64> {
        DVector::from_iterator(
            self.m(),
            self.a.iter().map(|row| {
                row.iter()
                    .map(|(blk, s)| match &u[*blk] {
                        Mat::Sdp(m) => s
                            .entries
                            .iter()
                            .map(|&(r, c, v)| {
                                if r == c {
                                    v * m[(r, r)]
                                } else {
                                    v * (m[(c, r)] + m[(r, c)])
                                }
                            })
                            .sum::<f64>(),
                        Mat::Lp(x) => s.entries.iter().map(|&(r, _, v)| v * x[r]).sum(),
                    })
                    .sum::<f64>()
            }),
        )
    }

    /// `Σ y_i A_i`.
    fn adjoint(&self, y: &DVector<f64>) -> Vec<Mat> {
        let mut out: Vec<Mat> = self.blocks.iter().map(|&b| Mat::zeros(b)).collect();
        for (i, row) in self.a.iter().enumerate() {
            if y[i] == 0.0 {
                continue;
            }
            for (blk, s) in row {
                out[*blk].add_entries(y[i], &s.entries);
            }
        }
        out
    }

    /// Program-level primal and dual points read out of internal iterates.
    fn readout(&self, p: &ConeProgram, x: &[Mat], z: &[Mat]) -> (Vec<f64>, Vec<f64>) {
        let xs = self
            .var_basis
            .iter()
            .map(|nb| nb.weight * x[nb.blk].inner(&nb.entries))
            .collect();
        let mut ys = Vec::with_capacity(p.num_rows());
        for nb in &self.row_basis {
            ys.push(z[nb.blk].inner(&nb.entries));
        }
        (xs, ys)
    }

    /// HKM Schur complement `M_ij = tr(A_i X A_j Z⁻¹)`.
    fn schur(&self, x: &[Mat], zinv: &[Mat]) -> DMatrix<f64> {
        let m = self.m();
        let mut out = DMatrix::zeros(m, m);
        for (blk, ib) in self.blocks.iter().enumerate() {
            let rows = &self.by_block[blk];
            match ib.kind {
                Kind::Sdp => {
                    let xm = x[blk].sdp();
                    let zi = zinv[blk].sdp();
                    let p = ib.size;
                    let mut g = DMatrix::zeros(p, p);
                    for (jj, &(j, pj)) in rows.iter().enumerate() {
                        let aj = &self.a[j][pj].1;
                        match &aj.dense {
                            Some(d) => g = xm * (d * zi),
                            None => {
                                g.fill(0.0);
                                for &(r, c, v) in &aj.entries {
                                    outer_acc(&mut g, v, xm, r, zi, c);
                                    if r != c {
                                        outer_acc(&mut g, v, xm, c, zi, r);
                                    }
                                }
                            }
                        }
                        for &(i, pi) in &rows[..=jj] {
                            let ai = &self.a[i][pi].1;
                            let val: f64 = ai
                                .entries
                                .iter()
                                .map(|&(r, c, v)| {
                                    if r == c {
                                        v * g[(r, r)]
                                    } else {
                                        v * (g[(c, r)] + g[(r, c)])
                                    }
                                })
                                .sum();
                            out[(i, j)] += val;
                        }
                    }
                }
                Kind::Lp => {
                    let xv = x[blk].lp();
                    let zv = zinv[blk].lp();
                    for (jj, &(j, pj)) in rows.iter().enumerate() {
                        let aj = &self.a[j][pj].1;
                        for &(i, pi) in &rows[..=jj] {
                            let ai = &self.a[i][pi].1;
                            out[(i, j)] += sparse_diag_dot(&ai.entries, &aj.entries, xv, zv);
                        }
                    }
                }
            }
        }
        for j in 0..m {
            for i in 0..j {
                out[(j, i)] = out[(i, j)];
            }
        }
        out
    }
}

/// `g += v · X[:, r] · Zinv[c, :]`.
fn outer_acc(g: &mut DMatrix<f64>, v: f64, x: &DMatrix<f64>, r: usize, zi: &DMatrix<f64>, c: usize) {
    let p = g.nrows();
    let xc = x.column(r);
    for q in 0..p {
        let s = v * zi[(c, q)];
        if s == 0.0 {
            continue;
        }
        let mut gc = g.column_mut(q);
        gc.axpy(s, &xc, 1.0);
    }
}

fn sparse_diag_dot(a: &Entries, b: &Entries, x: &DVector<f64>, zinv: &DVector<f64>) -> f64 {
    // both sorted by index
    let (mut i, mut j, mut acc) = (0, 0, 0.0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                let d = a[i].0;
                acc += a[i].2 * b[j].2 * x[d] * zinv[d];
                i += 1;
                j += 1;
            }
        }
    }
    acc
}

/// Largest step `α` with `X + α dX` in the cone (`∞` if unbounded).
fn max_step(x: &Mat, dx: &Mat) -> Option<f64> {
    match (x, dx) {
        (Mat::Lp(x), Mat::Lp(d)) => Some(
            x.iter()
                .zip(d.iter())
                .filter(|(_, d)| **d < 0.0)
                .map(|(x, d)| -x / d)
                .fold(f64::INFINITY, f64::min),
        ),
        (Mat::Sdp(x), Mat::Sdp(d)) => {
            if x.nrows() == 0 {
                return Some(f64::INFINITY);
            }
            let chol = Cholesky::new(x.clone())?;
            let l = chol.l();
            let t = l.solve_lower_triangular(d)?;
            let w = l.solve_lower_triangular(&t.transpose())?;
            let lmin = symmetrize(&w)
                .symmetric_eigenvalues()
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min);
            Some(if lmin >= 0.0 { f64::INFINITY } else { -1.0 / lmin })
        }
        _ => unreachable!(),
    }
}

fn invert(z: &Mat) -> Option<Mat> {
    match z {
        Mat::Lp(v) => {
            if v.iter().all(|&x| x > 0.0) {
                Some(Mat::Lp(v.map(|x| 1.0 / x)))
            } else {
                None
            }
        }
        Mat::Sdp(m) => {
            if m.nrows() == 0 {
                return Some(Mat::Sdp(m.clone()));
            }
            let inv = Cholesky::new(m.clone())?.inverse();
            Some(Mat::Sdp(symmetrize(&inv)))
        }
    }
}

struct Direction {
    dx: Vec<Mat>,
    dy: DVector<f64>,
    dz: Vec<Mat>,
}

struct Iterate {
    x: Vec<Mat>,
    y: DVector<f64>,
    z: Vec<Mat>,
}

impl Internal {
    fn cold_start(&self) -> Iterate {
        let mut x = Vec::with_capacity(self.blocks.len());
        let mut z = Vec::with_capacity(self.blocks.len());
        for (blk, &ib) in self.blocks.iter().enumerate() {
            let n = ib.size as f64;
            let mut xi: f64 = 10f64.max(n.sqrt());
            let mut eta: f64 = 10f64.max(n.sqrt()).max(self.c[blk].norm_sq().sqrt());
            for &(i, pos) in &self.by_block[blk] {
                let fro = self.a[i][pos].1.fro;
                xi = xi.max(n * (1.0 + self.b[i].abs()) / (1.0 + fro));
                eta = eta.max(fro);
            }
            x.push(Mat::identity(ib, xi));
            z.push(Mat::identity(ib, eta));
        }
        Iterate {
            x,
            y: DVector::zeros(self.m()),
            z,
        }
    }

    fn warm_start(&self, p: &ConeProgram, ws: &WarmStart) -> Iterate {
        let mut x: Vec<Mat> = self.blocks.iter().map(|&b| Mat::zeros(b)).collect();
        for (j, nb) in self.var_basis.iter().enumerate() {
            if self.free_vars.binary_search(&j).is_err() {
                x[nb.blk].add_entries(ws.x[j], &nb.entries);
            }
        }
        for (q, &j) in self.free_vars.iter().enumerate() {
            let blk = self.var_basis[j].blk;
            if let Mat::Lp(v) = &mut x[blk] {
                v[2 * q] = ws.x[j].max(0.0);
                v[2 * q + 1] = (-ws.x[j]).max(0.0);
            }
        }
        let s = p.slack(&ws.x);
        for &r in &self.eq_rows {
            let nb = &self.row_basis[r];
            x[nb.blk].add_entries(s[r], &nb.entries);
        }
        let y = DVector::from_iterator(self.m(), self.eq_rows.iter().map(|&r| -ws.y[r]));
        let aty = self.adjoint(&y);
        let mut z: Vec<Mat> = self.c.clone();
        for (zb, ab) in z.iter_mut().zip(&aty) {
            zb.axpy(-1.0, ab);
        }
        for blk in 0..self.blocks.len() {
            shift_interior(&mut x[blk]);
            shift_interior(&mut z[blk]);
        }
        Iterate { x, y, z }
    }
}

/// Pushes a block strictly inside its cone with a margin proportional to
/// its size.
fn shift_interior(m: &mut Mat) {
    const MARGIN: f64 = 0.1;
    match m {
        Mat::Lp(v) => {
            let scale = v.iter().map(|x| x.abs()).sum::<f64>() / v.len().max(1) as f64;
            let floor = MARGIN * scale.max(1e-6);
            for x in v.iter_mut() {
                *x = x.max(0.0) + floor;
            }
        }
        Mat::Sdp(a) => {
            let n = a.nrows();
            if n == 0 {
                return;
            }
            let eig = symmetrize(a).symmetric_eigenvalues();
            let lmin = eig.iter().copied().fold(f64::INFINITY, f64::min);
            let scale = eig.iter().map(|x| x.abs()).sum::<f64>() / n as f64;
            let shift = (-lmin).max(0.0) + MARGIN * scale.max(1e-6);
            for i in 0..n {
                a[(i, i)] += shift;
            }
        }
    }
}

pub(super) fn solve_with(
    program: &ConeProgram,
    settings: &SolverSettings,
    warm: Option<&WarmStart>,
) -> SolveResult {
    let int = Internal::new(program);
    let start = match warm {
        Some(ws) => int.warm_start(program, ws),
        None => int.cold_start(),
    };
    run(&int, program, settings, start)
}

/// Cold solve ignoring any warm start in `settings`.
pub fn solve_cold(program: &ConeProgram, settings: &SolverSettings) -> SolveResult {
    solve_with(program, settings, None)
}

fn finish(
    program: &ConeProgram,
    x: Vec<f64>,
    y: Vec<f64>,
    status: SolveStatus,
    residuals: KktResiduals,
    iterations: usize,
) -> SolveResult {
    let objective = program.objective_value(&x);
    SolveResult {
        x,
        y,
        status,
        residuals,
        iterations,
        objective,
    }
}

fn run(int: &Internal, program: &ConeProgram, settings: &SolverSettings, start: Iterate) -> SolveResult {
    let Iterate { mut x, mut y, mut z } = start;
    let nblk = int.blocks.len();
    let mut best: Option<(f64, Vec<f64>, Vec<f64>, KktResiduals)> = None;
    let mut stalls = 0;

    for iter in 0..=settings.max_iterations {
        let (px, py) = int.readout(program, &x, &z);
        let res = kkt_residuals(program, &px, &py);
        if res.max() <= settings.tolerance {
            return finish(program, px, py, SolveStatus::Optimal, res, iter);
        }
        if let Some(status) = certificate(program, &px, &py, settings.infeasibility_tolerance) {
            return finish(program, px, py, status, res, iter);
        }
        if best.as_ref().is_none_or(|b| res.max() < b.0) {
            best = Some((res.max(), px, py, res));
        }
        if iter == settings.max_iterations || stalls >= 3 {
            break;
        }

        let rp = &int.b - int.apply(&x);
        let aty = int.adjoint(&y);
        let rd: Vec<Mat> = (0..nblk)
            .map(|b| {
                let mut r = int.c[b].clone();
                r.axpy(-1.0, &aty[b]);
                r.axpy(-1.0, &z[b]);
                r
            })
            .collect();
        let Some(zinv) = z.iter().map(invert).collect::<Option<Vec<_>>>() else {
            break;
        };
        let schur = int.schur(&x, &zinv);
        let Some(chol) = factor(schur) else {
            break;
        };
        let mu = x.iter().zip(&z).map(|(a, b)| a.dot(b)).sum::<f64>() / int.nu;

        // predictor: target XZ = 0
        let rc_aff: Vec<Mat> = (0..nblk).map(|b| neg_product(&x[b], &z[b])).collect();
        let aff = direction(int, &chol, &x, &zinv, &rp, &rd, &rc_aff);
        let (Some(ap), Some(ad)) = (steps(&x, &aff.dx), steps(&z, &aff.dz)) else {
            break;
        };
        let (ap, ad) = (ap.min(1.0), ad.min(1.0));
        let mut gap_aff = 0.0;
        for b in 0..nblk {
            let mut xb = x[b].clone();
            xb.axpy(ap, &aff.dx[b]);
            let mut zb = z[b].clone();
            zb.axpy(ad, &aff.dz[b]);
            gap_aff += xb.dot(&zb);
        }
        let sigma = ((gap_aff / int.nu) / mu).clamp(0.0, 1.0).powi(3);

        // corrector: target XZ = σμI with the second-order term removed
        let rc: Vec<Mat> = (0..nblk)
            .map(|b| {
                let mut r = neg_product(&x[b], &z[b]);
                r.axpy(-1.0, &product(&aff.dx[b], &aff.dz[b]));
                add_identity(&mut r, sigma * mu);
                r
            })
            .collect();
        let dir = direction(int, &chol, &x, &zinv, &rp, &rd, &rc);
        let (Some(ap), Some(ad)) = (steps(&x, &dir.dx), steps(&z, &dir.dz)) else {
            break;
        };
        let ap = (STEP_FRACTION * ap).min(1.0);
        let ad = (STEP_FRACTION * ad).min(1.0);
        if ap < 1e-10 && ad < 1e-10 {
            stalls += 1;
        } else {
            stalls = 0;
        }
        for b in 0..nblk {
            x[b].axpy(ap, &dir.dx[b]);
            z[b].axpy(ad, &dir.dz[b]);
        }
        y.axpy(ad, &dir.dy, 1.0);
    }

    let iterations_done = settings.max_iterations;
    let (_, px, py, res) = best.expect("at least one iterate evaluated");
    finish(program, px, py, SolveStatus::MaxIterations, res, iterations_done)
}

fn factor(mut m: DMatrix<f64>) -> Option<Cholesky<f64, nalgebra::Dyn>> {
    if let Some(c) = Cholesky::new(m.clone()) {
        return Some(c);
    }
    let scale = (0..m.nrows()).map(|i| m[(i, i)].abs()).fold(0.0, f64::max);
    for i in 0..m.nrows() {
        m[(i, i)] += 1e-12 * scale.max(1e-300);
    }
    Cholesky::new(m)
}

fn steps(x: &[Mat], dx: &[Mat]) -> Option<f64> {
    let mut a = f64::INFINITY;
    for (xb, db) in x.iter().zip(dx) {
        a = a.min(max_step(xb, db)?);
    }
    Some(a)
}

fn product(a: &Mat, b: &Mat) -> Mat {
    match (a, b) {
        (Mat::Sdp(a), Mat::Sdp(b)) => Mat::Sdp(a * b),
        (Mat::Lp(a), Mat::Lp(b)) => Mat::Lp(a.component_mul(b)),
        _ => unreachable!(),
    }
}

fn neg_product(a: &Mat, b: &Mat) -> Mat {
    match product(a, b) {
        Mat::Sdp(m) => Mat::Sdp(-m),
        Mat::Lp(v) => Mat::Lp(-v),
    }
}

fn add_identity(m: &mut Mat, s: f64) {
    match m {
        Mat::Sdp(a) => {
            for i in 0..a.nrows() {
                a[(i, i)] += s;
            }
        }
        Mat::Lp(v) => v.add_scalar_mut(s),
    }
}

/// Solves the Newton system for complementarity target residual `rc`:
/// `ΔX = sym((Rc − X ΔZ) Z⁻¹)`, `ΔZ = Rd − Σ Δy_i A_i`, `⟨A_i, ΔX⟩ = rp_i`.
fn direction(
    int: &Internal,
    chol: &Cholesky<f64, nalgebra::Dyn>,
    x: &[Mat],
    zinv: &[Mat],
    rp: &DVector<f64>,
    rd: &[Mat],
    rc: &[Mat],
) -> Direction {
    let nblk = int.blocks.len();
    let u: Vec<Mat> = (0..nblk)
        .map(|b| match (&x[b], &zinv[b], &rd[b], &rc[b]) {
            (Mat::Sdp(x), Mat::Sdp(zi), Mat::Sdp(rd), Mat::Sdp(rc)) => Mat::Sdp((rc - x * rd) * zi),
            (Mat::Lp(x), Mat::Lp(zi), Mat::Lp(rd), Mat::Lp(rc)) => {
                Mat::Lp((rc - x.component_mul(rd)).component_mul(zi))
            }
            _ => unreachable!(),
        })
        .collect();
    let rhs = rp - int.apply_nonsym(&u);
    let dy = chol.solve(&rhs);
    let ady = int.adjoint(&dy);
    let dz: Vec<Mat> = (0..nblk)
        .map(|b| {
            let mut d = rd[b].clone();
            d.axpy(-1.0, &ady[b]);
            d
        })
        .collect();
    let dx: Vec<Mat> = (0..nblk)
        .map(|b| match (&x[b], &zinv[b], &dz[b], &rc[b]) {
            (Mat::Sdp(x), Mat::Sdp(zi), Mat::Sdp(dz), Mat::Sdp(rc)) => {
                Mat::Sdp(symmetrize(&((rc - x * dz) * zi)))
            }
            (Mat::Lp(x), Mat::Lp(zi), Mat::Lp(dz), Mat::Lp(rc)) => {
                Mat::Lp((rc - x.component_mul(dz)).component_mul(zi))
            }
            _ => unreachable!(),
        })
        .collect();
    Direction { dx, dy, dz }
}

/// Checks the normalized Farkas certificates on the current readout.
fn certificate(p: &ConeProgram, x: &[f64], y: &[f64], tol: f64) -> Option<SolveStatus> {
    let by: f64 = p.b.iter().zip(y).map(|(b, y)| b * y).sum();
    if by < 0.0 {
        let aty = p.a.matvec_transpose(y);
        let r = aty.iter().map(|v| v * v).sum::<f64>().sqrt();
        if r <= tol * (-by) {
            return Some(SolveStatus::Infeasible);
        }
    }
    let cx = p.objective_value(x);
    if cx < 0.0 {
        let ax = p.a.matvec(x);
        let neg: Vec<f64> = ax.iter().map(|v| -v).collect();
        let mut dist_sq = 0.0;
        for blk in &p.blocks {
            dist_sq += blk.cone.distance(&neg[blk.rows()]).powi(2);
        }
        if dist_sq.sqrt() <= tol * (-cx) {
            return Some(SolveStatus::Unbounded);
        }
    }
    None
}
