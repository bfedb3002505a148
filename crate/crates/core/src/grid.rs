//! Uniform grids on an interval or a rectangle with zero Dirichlet boundary,
//! nodal fields, piecewise-linear gradients and the discrete norms.
//!
//! Unknowns live at interior nodes. In 1D each cell carries one gradient
//! sample. In 2D each cell is split along its anti-diagonal into two
//! triangles, each carrying one gradient sample, so `<A Du, Dv>` is an exact
//! sum over samples and `-div(A D.)` is its adjoint.

use std::path::Path;
use std::sync::{Arc, OnceLock};

use crate::error::{Error, Result};
use crate::linalg::{cg_solve, dot, CsrMatrix};
use crate::nonlinear::{min_eigenvalue, Mat2, PointCoeffs};

const CG_MAX_ITER: usize = 20_000;

/// One gradient sample: `Dv = sum coeff * v[node]` over `entries`.
#[derive(Clone, Debug)]
pub struct Sample {
    pub cell: usize,
    pub weight: f64,
    pub entries: Vec<(usize, [f64; 2])>,
}

#[derive(Debug)]
pub struct Grid {
    dim: usize,
    extents: [f64; 2],
    n: [usize; 2],
    h: [f64; 2],
    samples: Vec<Sample>,
    laplacian: OnceLock<CsrMatrix>,
}

impl Grid {
    pub fn new(dim: usize, extents: &[f64], n: &[usize]) -> Result<Arc<Self>> {
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidParameter(format!("dimension {dim} not in {{1, 2}}")));
        }
        if extents.len() != dim || n.len() != dim {
            return Err(Error::InvalidParameter(format!(
                "expected {dim} extents and {dim} point counts, got {} and {}",
                extents.len(),
                n.len()
            )));
        }
        let mut e = [1.0; 2];
        let mut m = [1usize; 2];
        let mut h = [1.0; 2];
        for a in 0..dim {
            if !(extents[a].is_finite() && extents[a] > 0.0) {
                return Err(Error::InvalidParameter(format!("extent {} must be positive", extents[a])));
            }
            if n[a] < 3 {
                return Err(Error::InvalidParameter(format!("need at least 3 interior points per axis, got {}", n[a])));
            }
            e[a] = extents[a];
            m[a] = n[a];
            h[a] = extents[a] / (n[a] + 1) as f64;
        }
        let samples = if dim == 1 { samples_1d(m[0], h[0]) } else { samples_2d(m, h) };
        Ok(Arc::new(Self {
            dim,
            extents: e,
            n: m,
            h,
            samples,
            laplacian: OnceLock::new(),
        }))
    }

    pub fn line(extent: f64, n: usize) -> Result<Arc<Self>> {
        Self::new(1, &[extent], &[n])
    }

    pub fn rect(extents: [f64; 2], n: [usize; 2]) -> Result<Arc<Self>> {
        Self::new(2, &extents, &n)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn extents(&self) -> &[f64] {
        &self.extents[..self.dim]
    }

    pub fn n(&self) -> &[usize] {
        &self.n[..self.dim]
    }

    pub fn h(&self) -> &[f64] {
        &self.h[..self.dim]
    }

    pub fn num_nodes(&self) -> usize {
        self.n[0] * self.n[1]
    }

    /// Quadrature weight of one node, `h^d`.
    pub fn node_measure(&self) -> f64 {
        self.h[0] * if self.dim == 2 { self.h[1] } else { 1.0 }
    }

    pub fn num_cells(&self) -> usize {
        if self.dim == 1 {
            self.n[0] + 1
        } else {
            (self.n[0] + 1) * (self.n[1] + 1)
        }
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    /// Interior node index of `(i, j)`; `j` is ignored in 1D.
    pub fn node_index(&self, i: usize, j: usize) -> usize {
        i + j * self.n[0]
    }

    pub fn node_position(&self, idx: usize) -> [f64; 2] {
        let i = idx % self.n[0];
        let j = idx / self.n[0];
        let y = if self.dim == 2 { (j + 1) as f64 * self.h[1] } else { 0.0 };
        [(i + 1) as f64 * self.h[0], y]
    }

    pub fn cell_center(&self, cell: usize) -> [f64; 2] {
        let cx = self.n[0] + 1;
        let i = cell % cx;
        let j = cell / cx;
        let y = if self.dim == 2 { (j as f64 + 0.5) * self.h[1] } else { 0.0 };
        [(i as f64 + 0.5) * self.h[0], y]
    }

    /// `-Delta` with the same gradient samples, built once.
    pub fn laplacian(&self) -> &CsrMatrix {
        self.laplacian.get_or_init(|| {
            let eye = [[1.0, 0.0], [0.0, 1.0]];
            assemble_from_samples(self, |_| eye)
        })
    }

    fn same_shape(&self, other: &Grid) -> bool {
        self.dim == other.dim && self.n == other.n && self.h == other.h
    }
}

fn samples_1d(n: usize, h: f64) -> Vec<Sample> {
    (0..=n)
        .map(|c| {
            let mut entries = Vec::with_capacity(2);
            if c >= 1 {
                entries.push((c - 1, [-1.0 / h, 0.0]));
            }
            if c < n {
                entries.push((c, [1.0 / h, 0.0]));
            }
            Sample { cell: c, weight: h, entries }
        })
        .collect()
}

fn samples_2d(n: [usize; 2], h: [f64; 2]) -> Vec<Sample> {
    let [nx, ny] = n;
    let [hx, hy] = h;
    let w = 0.5 * hx * hy;
    let node = |i: isize, j: isize| -> Option<usize> {
        (i >= 0 && j >= 0 && (i as usize) < nx && (j as usize) < ny).then(|| i as usize + j as usize * nx)
    };
    let mut out = Vec::with_capacity(2 * (nx + 1) * (ny + 1));
    for cj in 0..=ny {
        for ci in 0..=nx {
            let cell = ci + cj * (nx + 1);
            let (i, j) = (ci as isize, cj as isize);
            let n00 = node(i - 1, j - 1);
            let n10 = node(i, j - 1);
            let n01 = node(i - 1, j);
            let n11 = node(i, j);
            let lower = [(n00, [-1.0 / hx, -1.0 / hy]), (n10, [1.0 / hx, 0.0]), (n01, [0.0, 1.0 / hy])];
            let upper = [(n11, [1.0 / hx, 1.0 / hy]), (n01, [-1.0 / hx, 0.0]), (n10, [0.0, -1.0 / hy])];
            for tri in [lower, upper] {
                let entries = tri.iter().filter_map(|&(nd, g)| nd.map(|k| (k, g))).collect();
                out.push(Sample { cell, weight: w, entries });
            }
        }
    }
    out
}

/// Nodal values at interior nodes; boundary values are zero.
#[derive(Clone, Debug)]
pub struct ScalarField {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.num_nodes() {
            return Err(Error::InvalidField(format!(
                "{} values for {} interior nodes",
                values.len(),
                grid.num_nodes()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidField(format!("non-finite value {} at node {i}", values[i])));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Arc<Grid>) -> Self {
        let n = grid.num_nodes();
        Self { grid, values: vec![0.0; n] }
    }

    pub fn from_fn(grid: Arc<Grid>, f: impl Fn([f64; 2]) -> f64) -> Result<Self> {
        let values = (0..grid.num_nodes()).map(|i| f(grid.node_position(i))).collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.grid.clone(), self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn scaled(&self, s: f64) -> Result<Self> {
        self.map(|v| s * v)
    }

    /// Lumped `L^2` pairing `sum h^d u v`.
    pub fn pairing(&self, other: &ScalarField) -> f64 {
        self.grid.node_measure() * dot(&self.values, &other.values)
    }
}

/// Gradient samples, one per entry of [`Grid::samples`].
#[derive(Clone, Debug)]
pub struct VectorField {
    grid: Arc<Grid>,
    values: Vec<[f64; 2]>,
}

impl VectorField {
    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[[f64; 2]] {
        &self.values
    }

    /// `(sum_s w_s |g_s|^2)^{1/2}`.
    pub fn l2_norm(&self) -> f64 {
        self.grid
            .samples()
            .iter()
            .zip(&self.values)
            .map(|(s, g)| s.weight * (g[0] * g[0] + g[1] * g[1]))
            .sum::<f64>()
            .sqrt()
    }
}

/// Per-cell symmetric coefficient matrix with a certified lower eigenvalue bound.
#[derive(Clone, Debug)]
pub struct MatrixField {
    grid: Arc<Grid>,
    cells: Vec<Mat2>,
    alpha: f64,
}

impl MatrixField {
    /// Checks exact symmetry and `lambda_min >= alpha > 0` on every cell.
    pub fn new(grid: Arc<Grid>, cells: Vec<Mat2>, alpha: f64) -> Result<Self> {
        if cells.len() != grid.num_cells() {
            return Err(Error::MatrixInvariant(format!("{} matrices for {} cells", cells.len(), grid.num_cells())));
        }
        if !(alpha > 0.0) {
            return Err(Error::MatrixInvariant(format!("declared alpha = {alpha} must be positive")));
        }
        let dim = grid.dim();
        for (c, m) in cells.iter().enumerate() {
            if m.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::MatrixInvariant(format!("non-finite entry in cell {c}")));
            }
            if dim == 2 && m[0][1] != m[1][0] {
                return Err(Error::MatrixInvariant(format!(
                    "cell {c} is not symmetric: a12 = {}, a21 = {}",
                    m[0][1], m[1][0]
                )));
            }
            let lam = min_eigenvalue(m, dim);
            if lam < alpha {
                return Err(Error::MatrixInvariant(format!(
                    "cell {c}: smallest eigenvalue {lam} < alpha = {alpha}"
                )));
            }
        }
        Ok(Self { grid, cells, alpha })
    }

    pub fn constant(grid: Arc<Grid>, m: Mat2, alpha: f64) -> Result<Self> {
        let cells = vec![m; grid.num_cells()];
        Self::new(grid, cells, alpha)
    }

    pub fn identity(grid: Arc<Grid>) -> Self {
        Self::constant(grid, [[1.0, 0.0], [0.0, 1.0]], 1.0).expect("identity is coercive")
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn cells(&self) -> &[Mat2] {
        &self.cells
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `sum_s w_s A Du . Dv`.
    pub fn energy_pairing(&self, du: &VectorField, dv: &VectorField) -> f64 {
        let dim = self.grid.dim();
        self.grid
            .samples()
            .iter()
            .zip(du.values().iter().zip(dv.values()))
            .map(|(s, (g, q))| {
                let a = &self.cells[s.cell];
                let mut acc = 0.0;
                for i in 0..dim {
                    for j in 0..dim {
                        acc += a[i][j] * g[j] * q[i];
                    }
                }
                s.weight * acc
            })
            .sum()
    }

    /// Sample-weighted average of `A` around each node.
    pub fn nodal(&self) -> Vec<Mat2> {
        let n = self.grid.num_nodes();
        let mut acc = vec![[[0.0; 2]; 2]; n];
        let mut wsum = vec![0.0; n];
        for s in self.grid.samples() {
            let a = &self.cells[s.cell];
            for &(k, _) in &s.entries {
                for i in 0..2 {
                    for j in 0..2 {
                        acc[k][i][j] += s.weight * a[i][j];
                    }
                }
                wsum[k] += s.weight;
            }
        }
        for (m, w) in acc.iter_mut().zip(&wsum) {
            for row in m.iter_mut() {
                for v in row.iter_mut() {
                    *v /= w;
                }
            }
            // Keep exact symmetry after averaging.
            let off = 0.5 * (m[0][1] + m[1][0]);
            m[0][1] = off;
            m[1][0] = off;
        }
        acc
    }

    /// [`PointCoeffs`] at every node with a constant `mu`.
    pub fn point_coeffs(&self, mu: f64) -> Vec<PointCoeffs> {
        let dim = self.grid.dim();
        self.nodal().into_iter().map(|a| PointCoeffs { dim, a, mu }).collect()
    }
}

pub fn gradient(v: &ScalarField) -> VectorField {
    let vals = v.values();
    let values = v
        .grid()
        .samples()
        .iter()
        .map(|s| {
            let mut g = [0.0; 2];
            for &(k, c) in &s.entries {
                g[0] += c[0] * vals[k];
                g[1] += c[1] * vals[k];
            }
            g
        })
        .collect();
    VectorField { grid: v.grid().clone(), values }
}

/// Sample-weighted average of the gradient samples touching each node
/// (a central difference in 1D).
pub fn nodal_gradient(v: &ScalarField) -> Vec<[f64; 2]> {
    let grid = v.grid();
    let dv = gradient(v);
    let n = grid.num_nodes();
    let mut acc = vec![[0.0; 2]; n];
    let mut wsum = vec![0.0; n];
    for (s, g) in grid.samples().iter().zip(dv.values()) {
        for &(k, _) in &s.entries {
            acc[k][0] += s.weight * g[0];
            acc[k][1] += s.weight * g[1];
            wsum[k] += s.weight;
        }
    }
    for (a, w) in acc.iter_mut().zip(&wsum) {
        a[0] /= w;
        a[1] /= w;
    }
    acc
}

pub fn lp_norm(v: &ScalarField, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::InvalidParameter(format!("Lebesgue exponent {p} < 1")));
    }
    let m = v.grid().node_measure();
    if p.is_infinite() {
        return Ok(v.max_abs());
    }
    Ok((m * v.values().iter().map(|x| x.abs().powf(p)).sum::<f64>()).powf(1.0 / p))
}

pub fn h1_seminorm(v: &ScalarField) -> f64 {
    gradient(v).l2_norm()
}

/// `|f|_{H^-1} = |Dz|_2` where `-Delta z = f`; returns the norm and `z`.
pub fn hminus1_riesz(f: &ScalarField, tol: f64) -> Result<(f64, ScalarField)> {
    let grid = f.grid();
    let rhs: Vec<f64> = f.values().iter().map(|v| v * grid.node_measure()).collect();
    let (z, _) = cg_solve(grid.laplacian(), &rhs, tol, CG_MAX_ITER)?;
    let z = ScalarField::new(grid.clone(), z)?;
    let norm = z.pairing(f).max(0.0).sqrt();
    Ok((norm, z))
}

pub fn hminus1_norm(f: &ScalarField) -> Result<f64> {
    Ok(hminus1_riesz(f, 1e-12)?.0)
}

fn assemble_from_samples(grid: &Grid, coeff: impl Fn(usize) -> Mat2) -> CsrMatrix {
    let dim = grid.dim();
    let mut triplets = Vec::new();
    for s in grid.samples() {
        let a = coeff(s.cell);
        for &(r, gr) in &s.entries {
            for &(c, gc) in &s.entries {
                let mut v = 0.0;
                for i in 0..dim {
                    for j in 0..dim {
                        v += gr[i] * a[i][j] * gc[j];
                    }
                }
                triplets.push((r, c, s.weight * v));
            }
        }
    }
    CsrMatrix::from_triplets(grid.num_nodes(), triplets)
}

/// Stiffness matrix of `-div(A D.)`; checked for symmetry and a positive diagonal.
pub fn assemble_operator(a: &MatrixField) -> Result<CsrMatrix> {
    let grid = a.grid();
    let op = assemble_from_samples(grid, |c| a.cells()[c]);
    let asym = op.asymmetry();
    if asym > 1e-14 {
        return Err(Error::MatrixInvariant(format!("assembled operator asymmetric (relative {asym:e})")));
    }
    if let Some(i) = op.diagonal().iter().position(|&d| !(d > 0.0)) {
        return Err(Error::MatrixInvariant(format!("nonpositive diagonal at node {i}")));
    }
    Ok(op)
}

/// `op x = rhs` to relative residual `tol`.
pub fn solve_field(op: &CsrMatrix, rhs: &ScalarField, tol: f64) -> Result<ScalarField> {
    let (x, _) = cg_solve(op, rhs.values(), tol, CG_MAX_ITER)?;
    ScalarField::new(rhs.grid().clone(), x)
}

/// Writes the header `nx[,ny],hx[,hy]` then one value per line, row-major.
pub fn write_field_csv(path: &Path, field: &ScalarField) -> Result<()> {
    let grid = field.grid();
    let mut w = csv::WriterBuilder::new().flexible(true).from_path(path)?;
    let mut header: Vec<String> = grid.n().iter().map(|n| n.to_string()).collect();
    header.extend(grid.h().iter().map(|h| format!("{h:e}")));
    w.write_record(&header)?;
    for v in field.values() {
        w.write_record([format!("{v:e}")])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_field_csv(path: &Path, grid: &Arc<Grid>) -> Result<ScalarField> {
    let mut r = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_path(path)?;
    let mut records = r.records();
    let header = records
        .next()
        .ok_or_else(|| Error::InvalidField(format!("{}: empty file", path.display())))??;
    let dim = grid.dim();
    if header.len() != 2 * dim {
        return Err(Error::InvalidField(format!("{}: header has {} entries, expected {}", path.display(), header.len(), 2 * dim)));
    }
    for a in 0..dim {
        let n: usize = header[a]
            .trim()
            .parse()
            .map_err(|_| Error::InvalidField(format!("{}: bad point count {:?}", path.display(), &header[a])))?;
        let h: f64 = header[dim + a]
            .trim()
            .parse()
            .map_err(|_| Error::InvalidField(format!("{}: bad spacing {:?}", path.display(), &header[dim + a])))?;
        if n != grid.n()[a] || (h - grid.h()[a]).abs() > 1e-12 * grid.h()[a] {
            return Err(Error::InvalidField(format!(
                "{}: grid {n} points, spacing {h} does not match axis {a} ({} points, spacing {})",
                path.display(),
                grid.n()[a],
                grid.h()[a]
            )));
        }
    }
    let mut values = Vec::with_capacity(grid.num_nodes());
    for rec in records {
        let rec = rec?;
        for s in rec.iter() {
            let v: f64 = s
                .trim()
                .parse()
                .map_err(|_| Error::InvalidField(format!("{}: bad value {s:?}", path.display())))?;
            values.push(v);
        }
    }
    ScalarField::new(grid.clone(), values)
}

/// Grid-level check that `grid` and `other` describe the same nodes.
pub fn same_grid(a: &ScalarField, b: &ScalarField) -> bool {
    Arc::ptr_eq(a.grid(), b.grid()) || a.grid().same_shape(b.grid())
}
