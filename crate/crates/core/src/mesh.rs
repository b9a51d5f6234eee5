//! Tensor-product grids on axis-aligned boxes with continuous multilinear (Q1)
//! elements and Gauss–Legendre quadrature.
//!
//! Nodes are numbered with the first axis running fastest. Local node `a` of
//! a 2D cell sits at offset `(a & 1, a >> 1)` from the cell's lower corner.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Axis-aligned box `Θ = Π [lo_k, hi_k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxDomain {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl BoxDomain {
    /// Box with the given corners. Dimension must be 1 or 2.
    pub fn new(lo: &[f64], hi: &[f64]) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() || lo.len() > 2 {
            return Err(Error::Configuration(format!(
                "box corners must both have length 1 or 2 (got {} and {})",
                lo.len(),
                hi.len()
            )));
        }
        for k in 0..lo.len() {
            if !(hi[k] - lo[k] > 0.0) || !lo[k].is_finite() || !hi[k].is_finite() {
                return Err(Error::Configuration(format!(
                    "axis {k} of the box is degenerate: [{}, {}]",
                    lo[k], hi[k]
                )));
            }
        }
        Ok(BoxDomain {
            lo: lo.to_vec(),
            hi: hi.to_vec(),
        })
    }

    /// `(0,1)^dim`.
    pub fn unit(dim: usize) -> Self {
        BoxDomain {
            lo: vec![0.0; dim],
            hi: vec![1.0; dim],
        }
    }

    /// Spatial dimension.
    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    /// Lower corner.
    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    /// Upper corner.
    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    /// Lebesgue measure.
    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).product()
    }
}

/// Gauss–Legendre points and weights on `[0, 1]`, exact through degree `2k − 1`.
pub fn gauss_legendre_unit(k: usize) -> (Vec<f64>, Vec<f64>) {
    let mut pts = vec![0.0; k];
    let mut wts = vec![0.0; k];
    for i in 0..k {
        // Chebyshev-like initial guess, then Newton on P_k.
        let mut z = libm::cos(core::f64::consts::PI * (i as f64 + 0.75) / (k as f64 + 0.5));
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for j in 2..=k {
                let p2 = ((2 * j - 1) as f64 * z * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            let pk = if k == 1 { z } else { p1 };
            let pkm1 = if k == 1 { 1.0 } else { p0 };
            dp = k as f64 * (z * pk - pkm1) / (z * z - 1.0);
            let dz = pk / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        pts[i] = 0.5 * (1.0 - z);
        wts[i] = 1.0 / ((1.0 - z * z) * dp * dp);
    }
    (pts, wts)
}

/// Reference quadrature and basis tables shared by every cell.
#[derive(Debug, Clone)]
struct RefTables {
    /// Reference coordinates per point, padded to 2.
    points: Vec<[f64; 2]>,
    /// Reference weights (sum to 1).
    weights: Vec<f64>,
    /// `values[q][a]`.
    values: Vec<Vec<f64>>,
    /// `grads[q][a]`, derivatives with respect to reference coordinates.
    grads: Vec<Vec<[f64; 2]>>,
}

#[derive(Debug)]
struct SpaceInner {
    domain: BoxDomain,
    cells: Vec<usize>,
    h: Vec<f64>,
    quad_order: usize,
    nodes: Vec<[f64; 2]>,
    interior: Vec<usize>,
    boundary: Vec<usize>,
    /// Node to interior-dof index.
    dof_of: Vec<Option<usize>>,
    tables: RefTables,
}

/// A discretized box: grid, nodal basis, quadrature rule and node classification.
///
/// Cheap to clone (shared immutable storage).
#[derive(Debug, Clone)]
pub struct DiscreteSpace {
    inner: Arc<SpaceInner>,
}

/// One quadrature point of one cell.
#[derive(Debug, Clone, Copy)]
pub struct QuadPoint {
    /// Cell index.
    pub cell: usize,
    /// Index within the cell's rule.
    pub index: usize,
    /// Physical coordinates (unused trailing entries are zero).
    pub x: [f64; 2],
    /// Physical weight.
    pub weight: f64,
}

/// Basis data of one cell at one quadrature point.
#[derive(Debug, Clone)]
pub struct LocalBasis {
    /// Global node indices of the cell's local nodes.
    pub nodes: Vec<usize>,
    /// Basis values.
    pub values: Vec<f64>,
    /// Physical gradients, padded to 2.
    pub grads: Vec<[f64; 2]>,
}

/// Build the space. Requires at least two cells per axis and quadrature order ≥ 2.
pub fn build_space(domain: &BoxDomain, cells_per_axis: &[usize], quad_order: usize) -> Result<DiscreteSpace> {
    let dim = domain.dim();
    if cells_per_axis.len() != dim {
        return Err(Error::Configuration(format!(
            "{} cell counts given for a {dim}-dimensional box",
            cells_per_axis.len()
        )));
    }
    if cells_per_axis.iter().any(|&c| c < 2) {
        return Err(Error::Configuration("need at least 2 cells per axis".into()));
    }
    if quad_order < 2 {
        return Err(Error::Configuration("quadrature order must be at least 2".into()));
    }
    let h: Vec<f64> = (0..dim)
        .map(|k| (domain.hi[k] - domain.lo[k]) / cells_per_axis[k] as f64)
        .collect();
    let per_axis: Vec<usize> = cells_per_axis.iter().map(|c| c + 1).collect();
    let n_nodes: usize = per_axis.iter().product();

    let mut nodes = Vec::with_capacity(n_nodes);
    let mut interior = Vec::new();
    let mut boundary = Vec::new();
    let mut dof_of = vec![None; n_nodes];
    for idx in 0..n_nodes {
        let (i, j) = (idx % per_axis[0], if dim == 2 { idx / per_axis[0] } else { 0 });
        let mut x = [0.0; 2];
        // Exact endpoints so boundary coordinates are bit-identical to the box corners.
        x[0] = axis_coord(domain.lo[0], domain.hi[0], i, cells_per_axis[0]);
        let mut on_boundary = i == 0 || i == cells_per_axis[0];
        if dim == 2 {
            x[1] = axis_coord(domain.lo[1], domain.hi[1], j, cells_per_axis[1]);
            on_boundary |= j == 0 || j == cells_per_axis[1];
        }
        nodes.push(x);
        if on_boundary {
            boundary.push(idx);
        } else {
            dof_of[idx] = Some(interior.len());
            interior.push(idx);
        }
    }

    let tables = ref_tables(dim, quad_order);
    Ok(DiscreteSpace {
        inner: Arc::new(SpaceInner {
            domain: domain.clone(),
            cells: cells_per_axis.to_vec(),
            h,
            quad_order,
            nodes,
            interior,
            boundary,
            dof_of,
            tables,
        }),
    })
}

fn axis_coord(lo: f64, hi: f64, i: usize, n: usize) -> f64 {
    if i == n {
        hi
    } else {
        lo + (hi - lo) * (i as f64 / n as f64)
    }
}

fn ref_tables(dim: usize, k: usize) -> RefTables {
    let (gp, gw) = gauss_legendre_unit(k);
    let mut points = Vec::new();
    let mut weights = Vec::new();
    let mut values = Vec::new();
    let mut grads = Vec::new();
    if dim == 1 {
        for (p, w) in gp.iter().zip(&gw) {
            points.push([*p, 0.0]);
            weights.push(*w);
            values.push(vec![1.0 - p, *p]);
            grads.push(vec![[-1.0, 0.0], [1.0, 0.0]]);
        }
    } else {
        for (py, wy) in gp.iter().zip(&gw) {
            for (px, wx) in gp.iter().zip(&gw) {
                points.push([*px, *py]);
                weights.push(wx * wy);
                let bx = [1.0 - px, *px];
                let by = [1.0 - py, *py];
                let dx = [-1.0, 1.0];
                let mut v = Vec::with_capacity(4);
                let mut g = Vec::with_capacity(4);
                for a in 0..4 {
                    let (ax, ay) = (a & 1, a >> 1);
                    v.push(bx[ax] * by[ay]);
                    g.push([dx[ax] * by[ay], bx[ax] * dx[ay]]);
                }
                values.push(v);
                grads.push(g);
            }
        }
    }
    RefTables {
        points,
        weights,
        values,
        grads,
    }
}

impl DiscreteSpace {
    /// Spatial dimension.
    pub fn dim(&self) -> usize {
        self.inner.domain.dim()
    }

    /// The discretized box.
    pub fn domain(&self) -> &BoxDomain {
        &self.inner.domain
    }

    /// Cells per axis.
    pub fn cells_per_axis(&self) -> &[usize] {
        &self.inner.cells
    }

    /// Mesh widths per axis.
    pub fn h(&self) -> &[f64] {
        &self.inner.h
    }

    /// Largest mesh width.
    pub fn h_max(&self) -> f64 {
        self.inner.h.iter().fold(0.0, |m, &v| m.max(v))
    }

    /// Gauss points per axis.
    pub fn quad_order(&self) -> usize {
        self.inner.quad_order
    }

    /// Total number of cells.
    pub fn n_cells(&self) -> usize {
        self.inner.cells.iter().product()
    }

    /// Total number of nodes.
    pub fn n_nodes(&self) -> usize {
        self.inner.nodes.len()
    }

    /// Coordinates of node `i` (length `dim`).
    pub fn node(&self, i: usize) -> &[f64] {
        &self.inner.nodes[i][..self.dim()]
    }

    /// Interior node indices, ascending.
    pub fn interior(&self) -> &[usize] {
        &self.inner.interior
    }

    /// Boundary node indices, ascending.
    pub fn boundary(&self) -> &[usize] {
        &self.inner.boundary
    }

    /// Interior dof index of node `i`, if interior.
    pub fn dof_of(&self, node: usize) -> Option<usize> {
        self.inner.dof_of[node]
    }

    /// Number of interior dofs.
    pub fn n_interior(&self) -> usize {
        self.inner.interior.len()
    }

    /// Quadrature points per cell.
    pub fn n_quad_per_cell(&self) -> usize {
        self.inner.tables.weights.len()
    }

    /// Lower-corner grid index of a cell.
    fn cell_origin(&self, cell: usize) -> (usize, usize) {
        let nx = self.inner.cells[0];
        if self.dim() == 1 {
            (cell, 0)
        } else {
            (cell % nx, cell / nx)
        }
    }

    /// Global nodes of a cell in local order.
    pub fn cell_nodes(&self, cell: usize) -> Vec<usize> {
        let (i, j) = self.cell_origin(cell);
        if self.dim() == 1 {
            vec![i, i + 1]
        } else {
            let stride = self.inner.cells[0] + 1;
            let base = j * stride + i;
            vec![base, base + 1, base + stride, base + stride + 1]
        }
    }

    fn cell_corner(&self, cell: usize) -> [f64; 2] {
        let (i, j) = self.cell_origin(cell);
        let d = &self.inner.domain;
        let mut c = [d.lo[0] + self.inner.h[0] * i as f64, 0.0];
        if self.dim() == 2 {
            c[1] = d.lo[1] + self.inner.h[1] * j as f64;
        }
        c
    }

    fn cell_volume(&self) -> f64 {
        self.inner.h.iter().product()
    }

    /// Quadrature points of one cell.
    pub fn cell_quad(&self, cell: usize) -> impl Iterator<Item = QuadPoint> + '_ {
        let corner = self.cell_corner(cell);
        let vol = self.cell_volume();
        let h = &self.inner.h;
        let dim = self.dim();
        let t = &self.inner.tables;
        (0..t.weights.len()).map(move |q| {
            let mut x = [0.0; 2];
            for k in 0..dim {
                x[k] = corner[k] + h[k] * t.points[q][k];
            }
            QuadPoint {
                cell,
                index: q,
                x,
                weight: vol * t.weights[q],
            }
        })
    }

    /// Every quadrature point, cell by cell.
    pub fn quad_points(&self) -> impl Iterator<Item = QuadPoint> + '_ {
        (0..self.n_cells()).flat_map(move |c| self.cell_quad(c))
    }

    /// All quadrature point coordinates as owned vectors (for hypothesis checks).
    pub fn quad_coords(&self) -> Vec<Vec<f64>> {
        let dim = self.dim();
        self.quad_points().map(|qp| qp.x[..dim].to_vec()).collect()
    }

    /// Basis values and physical gradients at a quadrature point.
    pub fn local_basis(&self, qp: &QuadPoint) -> LocalBasis {
        let t = &self.inner.tables;
        let h = &self.inner.h;
        let dim = self.dim();
        let grads = t.grads[qp.index]
            .iter()
            .map(|g| {
                let mut out = [0.0; 2];
                for k in 0..dim {
                    out[k] = g[k] / h[k];
                }
                out
            })
            .collect();
        LocalBasis {
            nodes: self.cell_nodes(qp.cell),
            values: t.values[qp.index].clone(),
            grads,
        }
    }

    /// Cell containing `x` and the reference coordinates of `x` in it.
    pub fn locate(&self, x: &[f64]) -> Result<(usize, [f64; 2])> {
        let dim = self.dim();
        if x.len() != dim {
            return Err(Error::contract("point dimension differs from space dimension"));
        }
        let d = &self.inner.domain;
        let mut idx = [0usize; 2];
        let mut r = [0.0; 2];
        for k in 0..dim {
            let s = (x[k] - d.lo[k]) / self.inner.h[k];
            let n = self.inner.cells[k];
            if !(s >= -1e-12 && s <= n as f64 + 1e-12) {
                return Err(Error::contract(format!("point {x:?} lies outside the box")));
            }
            let i = (libm::floor(s).max(0.0) as usize).min(n - 1);
            idx[k] = i;
            r[k] = (s - i as f64).clamp(0.0, 1.0);
        }
        let cell = if dim == 1 { idx[0] } else { idx[1] * self.inner.cells[0] + idx[0] };
        Ok((cell, r))
    }

    /// Sample `g` at every node.
    pub fn interpolate(&self, g: impl Fn(&[f64]) -> f64) -> Result<DiscreteField> {
        let mut values = Vec::with_capacity(self.n_nodes());
        for i in 0..self.n_nodes() {
            let v = g(self.node(i));
            if !v.is_finite() {
                return Err(Error::Data {
                    what: "interpolated function".into(),
                    location: self.node(i).to_vec(),
                });
            }
            values.push(v);
        }
        Ok(DiscreteField {
            space: self.clone(),
            values,
        })
    }

    /// Field from interior dof values, zero on the boundary.
    pub fn field_from_interior(&self, dofs: &[f64]) -> DiscreteField {
        assert_eq!(dofs.len(), self.n_interior(), "interior vector length");
        let mut values = vec![0.0; self.n_nodes()];
        for (k, &node) in self.inner.interior.iter().enumerate() {
            values[node] = dofs[k];
        }
        DiscreteField {
            space: self.clone(),
            values,
        }
    }

    /// `Σ_cells Σ_q w_q f(q)`, in fixed cell order.
    pub fn integrate(&self, mut f: impl FnMut(&QuadPoint) -> f64) -> Result<f64> {
        let mut total = 0.0;
        for qp in self.quad_points() {
            let v = f(&qp);
            if !v.is_finite() {
                return Err(Error::Data {
                    what: "integrand".into(),
                    location: qp.x[..self.dim()].to_vec(),
                });
            }
            total += qp.weight * v;
        }
        Ok(total)
    }
}

/// Free-function form of [`DiscreteSpace::interpolate`].
pub fn interpolate(space: &DiscreteSpace, g: impl Fn(&[f64]) -> f64) -> Result<DiscreteField> {
    space.interpolate(g)
}

/// Free-function form of [`DiscreteSpace::integrate`].
pub fn integrate(space: &DiscreteSpace, f: impl FnMut(&QuadPoint) -> f64) -> Result<f64> {
    space.integrate(f)
}

/// Nodal values of a continuous Q1 function on a space.
#[derive(Debug, Clone)]
pub struct DiscreteField {
    space: DiscreteSpace,
    values: Vec<f64>,
}

impl DiscreteField {
    /// Wrap nodal values (one per node).
    pub fn new(space: &DiscreteSpace, values: Vec<f64>) -> Result<Self> {
        if values.len() != space.n_nodes() {
            return Err(Error::contract("one nodal value per node expected"));
        }
        Ok(DiscreteField {
            space: space.clone(),
            values,
        })
    }

    /// The underlying space.
    pub fn space(&self) -> &DiscreteSpace {
        &self.space
    }

    /// Nodal values.
    pub fn nodal_values(&self) -> &[f64] {
        &self.values
    }

    /// Values at the interior nodes, in dof order.
    pub fn interior_values(&self) -> Vec<f64> {
        self.space.interior().iter().map(|&i| self.values[i]).collect()
    }

    /// Value and gradient at a quadrature point.
    pub fn at_quad(&self, qp: &QuadPoint) -> (f64, [f64; 2]) {
        let t = &self.space.inner.tables;
        let h = &self.space.inner.h;
        let nodes = self.space.cell_nodes(qp.cell);
        let mut v = 0.0;
        let mut g = [0.0; 2];
        for (a, &n) in nodes.iter().enumerate() {
            let u = self.values[n];
            v += u * t.values[qp.index][a];
            for k in 0..self.space.dim() {
                g[k] += u * t.grads[qp.index][a][k] / h[k];
            }
        }
        (v, g)
    }

    /// Value and gradient of the multilinear interpolant at an arbitrary point.
    pub fn eval(&self, x: &[f64]) -> Result<(f64, [f64; 2])> {
        let (cell, r) = self.space.locate(x)?;
        let nodes = self.space.cell_nodes(cell);
        let h = &self.space.inner.h;
        let mut v = 0.0;
        let mut g = [0.0; 2];
        if self.space.dim() == 1 {
            let (u0, u1) = (self.values[nodes[0]], self.values[nodes[1]]);
            v = u0 * (1.0 - r[0]) + u1 * r[0];
            g[0] = (u1 - u0) / h[0];
        } else {
            let bx = [1.0 - r[0], r[0]];
            let by = [1.0 - r[1], r[1]];
            for (a, &n) in nodes.iter().enumerate() {
                let (ax, ay) = (a & 1, a >> 1);
                let u = self.values[n];
                v += u * bx[ax] * by[ay];
                let sx = if ax == 1 { 1.0 } else { -1.0 };
                let sy = if ay == 1 { 1.0 } else { -1.0 };
                g[0] += u * sx * by[ay] / h[0];
                g[1] += u * bx[ax] * sy / h[1];
            }
        }
        Ok((v, g))
    }

    /// `self + other` on the same space.
    pub fn add(&self, other: &DiscreteField) -> DiscreteField {
        DiscreteField {
            space: self.space.clone(),
            values: self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use core::f64::consts::PI;

    #[test]
    fn node_counts() {
        let s = build_space(&BoxDomain::unit(2), &[2, 2], 3).unwrap();
        assert_eq!(s.n_nodes(), 9);
        assert_eq!(s.interior(), &[4]);
        let s = build_space(&BoxDomain::unit(1), &[4], 3).unwrap();
        assert_eq!(s.n_nodes(), 5);
        assert_eq!(s.n_interior(), 3);
        assert_eq!(s.boundary(), &[0, 4]);
    }

    #[test]
    fn rejects_bad_configurations() {
        assert!(BoxDomain::new(&[0.0, 0.0], &[1.0, 0.0]).is_err());
        assert!(build_space(&BoxDomain::unit(2), &[1, 4], 3).is_err());
        assert!(build_space(&BoxDomain::unit(2), &[4, 4], 1).is_err());
    }

    #[test]
    fn volume_and_polynomial_exactness() {
        let s = build_space(&BoxDomain::unit(2), &[8, 8], 3).unwrap();
        assert_relative_eq!(s.integrate(|_| 1.0).unwrap(), 1.0, epsilon = 1e-14);
        let s1 = build_space(&BoxDomain::unit(1), &[3], 2).unwrap();
        assert_relative_eq!(s1.integrate(|q| q.x[0] * q.x[0]).unwrap(), 1.0 / 3.0, epsilon = 1e-14);
        // degree 5 per axis with order 3
        let v = s.integrate(|q| q.x[0].powi(5) * q.x[1].powi(5)).unwrap();
        assert_relative_eq!(v, 1.0 / 36.0, max_relative = 1e-12);
    }

    #[test]
    fn sine_integral() {
        let s = build_space(&BoxDomain::unit(1), &[16], 4).unwrap();
        let v = s.integrate(|q| libm::sin(PI * q.x[0])).unwrap();
        assert!((v - 2.0 / PI).abs() < 1e-8);
    }

    #[test]
    fn gauss_weights_sum_and_positivity() {
        for k in 2..8 {
            let (p, w) = gauss_legendre_unit(k);
            assert!(w.iter().all(|&x| x > 0.0));
            assert_relative_eq!(w.iter().sum::<f64>(), 1.0, epsilon = 1e-14);
            assert!(p.iter().all(|&x| x > 0.0 && x < 1.0));
        }
    }

    #[test]
    fn interpolation_examples() {
        let s = build_space(&BoxDomain::unit(2), &[4, 4], 3).unwrap();
        let one = s.interpolate(|_| 1.0).unwrap();
        assert!(one.nodal_values().iter().all(|&v| v == 1.0));
        let x1 = s.interpolate(|x| x[0]).unwrap();
        for i in 0..s.n_nodes() {
            assert_eq!(x1.nodal_values()[i], s.node(i)[0]);
        }
        assert!(s.interpolate(|_| f64::NAN).is_err());
    }

    #[test]
    fn interpolant_converges_at_cell_centres() {
        let g = |x: &[f64]| libm::sin(PI * x[0]) * libm::sin(PI * x[1]);
        let err = |n: usize| {
            let s = build_space(&BoxDomain::unit(2), &[n, n], 3).unwrap();
            let f = s.interpolate(g).unwrap();
            let h = 1.0 / n as f64;
            let mut e: f64 = 0.0;
            for i in 0..n {
                for j in 0..n {
                    let c = [(i as f64 + 0.5) * h, (j as f64 + 0.5) * h];
                    e = e.max((f.eval(&c).unwrap().0 - g(&c)).abs());
                }
            }
            e
        };
        let (e8, e16) = (err(8), err(16));
        assert!(e8 / e16 > 3.5, "ratio {}", e8 / e16);
    }

    #[test]
    fn affine_gradient_is_exact() {
        let s = build_space(&BoxDomain::new(&[-1.0, 0.5], &[2.0, 1.5]).unwrap(), &[5, 3], 3).unwrap();
        let f = s.interpolate(|x| 3.0 * x[0] - 2.0 * x[1] + 0.25).unwrap();
        for qp in s.quad_points() {
            let (v, g) = f.at_quad(&qp);
            assert_relative_eq!(v, 3.0 * qp.x[0] - 2.0 * qp.x[1] + 0.25, epsilon = 1e-12);
            assert_relative_eq!(g[0], 3.0, epsilon = 1e-12);
            assert_relative_eq!(g[1], -2.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn refinement_nests_nodal_values() {
        let g = |x: &[f64]| libm::exp(x[0]) * libm::cos(x[1]);
        let coarse = build_space(&BoxDomain::unit(2), &[4, 4], 3).unwrap();
        let fine = build_space(&BoxDomain::unit(2), &[8, 8], 3).unwrap();
        let fc = coarse.interpolate(g).unwrap();
        let ff = fine.interpolate(g).unwrap();
        for j in 0..=4 {
            for i in 0..=4 {
                assert_eq!(fc.nodal_values()[j * 5 + i], ff.nodal_values()[(2 * j) * 9 + 2 * i]);
            }
        }
    }
}
