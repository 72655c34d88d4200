//! Nonuniform spatial grids on `(0, 1)`, three-point finite differences for
//! the `y`-space operator, and the payoff sampled on one- or two-dimensional
//! grids (cell averaged at inception, pointwise as an obstacle).

use crate::error::{Error, Result};
use crate::transform::{convection_coef, diffusion_coef, y_to_x, FaceValue, ReducedPayoff, MAX_EXPONENT};
use crate::tridiag::Tridiagonal;

/// Half-width of the window around the anchor where nodes are concentrated.
const WINDOW: f64 = 0.15;
pub const MAX_MESH_RATIO: f64 = 1.5;
const KINK_TOL: f64 = 1e-12;

/// Interior nodes `0 < y_0 < ... < y_{m-1} < 1` of one axis. The faces
/// `y = 0` and `y = 1` carry Dirichlet data and are not unknowns.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisGrid {
    pub nodes: Vec<f64>,
    /// Index of the node that equals the anchor coordinate exactly.
    pub anchor_index: usize,
}

impl AxisGrid {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn anchor(&self) -> f64 {
        self.nodes[self.anchor_index]
    }

    /// Node `j` with the faces at positions `-1` and `m`.
    fn point(&self, j: isize) -> f64 {
        if j < 0 {
            0.0
        } else if j as usize >= self.len() {
            1.0
        } else {
            self.nodes[j as usize]
        }
    }

    /// Mesh widths `(h_-, h_+)` around node `j`.
    pub fn widths(&self, j: usize) -> (f64, f64) {
        let j = j as isize;
        (self.point(j) - self.point(j - 1), self.point(j + 1) - self.point(j))
    }

    /// Midpoint-to-midpoint cell around node `j`.
    pub fn dual_cell(&self, j: usize) -> (f64, f64) {
        let j = j as isize;
        (
            0.5 * (self.point(j - 1) + self.point(j)),
            0.5 * (self.point(j) + self.point(j + 1)),
        )
    }

    /// Largest ratio between neighbouring mesh widths, faces included.
    pub fn max_mesh_ratio(&self) -> f64 {
        let h: Vec<f64> = (0..=self.len() as isize)
            .map(|j| self.point(j) - self.point(j - 1))
            .collect();
        h.windows(2).map(|w| (w[1] / w[0]).max(w[0] / w[1])).fold(1.0, f64::max)
    }
}

/// Builds a smooth sinh-stretched grid with `m` interior nodes, densest near
/// `anchor` and with one node exactly at `anchor`.
///
/// The map is `y = A + c sinh(k (xi - xi_A))` on each side of the anchor
/// node, where `xi` is uniform and the slopes `k` on the two sides differ
/// only by the rounding of the anchor's index. `c` starts at the window
/// width and grows until the mesh-ratio bound holds.
pub fn build_axis_grid(m: usize, anchor: f64) -> Result<AxisGrid> {
    if m < 3 {
        return Err(Error::Domain(format!("need at least 3 grid nodes, got {m}")));
    }
    if !(anchor > 0.0 && anchor < 1.0) {
        return Err(Error::Domain(format!("anchor {anchor} outside (0, 1)")));
    }
    let mut c = WINDOW;
    loop {
        let grid = sinh_grid(m, anchor, c);
        if grid.max_mesh_ratio() <= MAX_MESH_RATIO || c > 1e3 {
            return Ok(grid);
        }
        c *= 1.5;
    }
}

fn sinh_grid(m: usize, anchor: f64, c: f64) -> AxisGrid {
    let intervals = (m + 1) as f64;
    let left = (anchor / c).asinh();
    let right = ((1.0 - anchor) / c).asinh();
    let p = ((intervals * left / (left + right)).round() as usize).clamp(1, m);
    let xi_a = p as f64 / intervals;
    let nodes = (1..=m)
        .map(|i| {
            let xi = i as f64 / intervals;
            if i < p {
                anchor + c * (left * (xi - xi_a) / xi_a).sinh()
            } else if i == p {
                anchor
            } else {
                anchor + c * (right * (xi - xi_a) / (1.0 - xi_a)).sinh()
            }
        })
        .collect();
    AxisGrid { nodes, anchor_index: p - 1 }
}

/// Three-point weights `[minus, centre, plus]` on a nonuniform stencil.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdWeights {
    pub first: [f64; 3],
    pub second: [f64; 3],
}

pub fn fd_coefficients(h_minus: f64, h_plus: f64) -> FdWeights {
    let (hm, hp) = (h_minus, h_plus);
    let sum = hm + hp;
    FdWeights {
        first: [-hp / (hm * sum), (hp - hm) / (hm * hp), hm / (hp * sum)],
        second: [2.0 / (hm * sum), -2.0 / (hm * hp), 2.0 / (hp * sum)],
    }
}

/// Semidiscrete operator of one axis: `lambda [p D2 + q D1] - reaction`,
/// plus the weights through which the face values enter the first and last
/// rows.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisOperator {
    pub matrix: Tridiagonal,
    pub lower_weight: f64,
    pub upper_weight: f64,
    pub lower_face: FaceValue,
    pub upper_face: FaceValue,
}

impl AxisOperator {
    pub fn len(&self) -> usize {
        self.matrix.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.is_empty()
    }

    /// Boundary contributions to the first and last rows at time `t`.
    pub fn source_ends(&self, t: f64) -> (f64, f64) {
        (self.lower_weight * self.lower_face.at(t), self.upper_weight * self.upper_face.at(t))
    }

    /// The full source vector `g(t)`.
    pub fn source(&self, t: f64) -> Vec<f64> {
        let n = self.len();
        let mut g = vec![0.0; n];
        let (lo, hi) = self.source_ends(t);
        g[0] += lo;
        g[n - 1] += hi;
        g
    }

    /// An operator that does nothing.
    pub fn zero(n: usize) -> Self {
        AxisOperator {
            matrix: Tridiagonal::zeros(n),
            lower_weight: 0.0,
            upper_weight: 0.0,
            lower_face: FaceValue::Zero,
            upper_face: FaceValue::Zero,
        }
    }
}

pub fn assemble_axis_operator(
    grid: &AxisGrid,
    lambda: f64,
    reaction: f64,
    lower_face: FaceValue,
    upper_face: FaceValue,
) -> AxisOperator {
    let m = grid.len();
    let mut matrix = Tridiagonal::zeros(m);
    let mut lower_weight = 0.0;
    let mut upper_weight = 0.0;
    for j in 0..m {
        let (hm, hp) = grid.widths(j);
        let w = fd_coefficients(hm, hp);
        let y = grid.nodes[j];
        let (p, q) = (lambda * diffusion_coef(y), lambda * convection_coef(y));
        let row: [f64; 3] = std::array::from_fn(|i| p * w.second[i] + q * w.first[i]);
        if j == 0 {
            lower_weight = row[0];
        } else {
            matrix.sub[j] = row[0];
        }
        matrix.diag[j] = row[1] - reaction;
        if j + 1 == m {
            upper_weight = row[2];
        } else {
            matrix.sup[j] = row[2];
        }
    }
    AxisOperator { matrix, lower_weight, upper_weight, lower_face, upper_face }
}

const GAUSS_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683_1,
    0.0,
    0.538_469_310_105_683_1,
    0.906_179_845_938_664,
];
const GAUSS_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189_1,
    0.478_628_670_499_366_5,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
];
const PANELS: usize = 2;

/// Composite five-point Gauss–Legendre integral over `[a, b]`.
pub fn gauss_legendre(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let mid = a + (p as f64 + 0.5) * h;
        for (x, w) in GAUSS_NODES.iter().zip(GAUSS_WEIGHTS) {
            total += w * f(mid + 0.5 * h * x);
        }
    }
    0.5 * h * total
}

/// Mean of `f` over `[a, b]`, splitting the quadrature at `kink`.
pub fn cell_average(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, kink: Option<f64>) -> f64 {
    let integral = match kink {
        Some(c) if c > a && c < b => gauss_legendre(&mut f, a, c, PANELS) + gauss_legendre(&mut f, c, b, PANELS),
        _ => gauss_legendre(&mut f, a, b, PANELS),
    };
    integral / (b - a)
}

/// Bisection for a sign change of `f` on `[a, b]`.
pub fn locate_kink(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> Option<f64> {
    let (fa, fb) = (f(a), f(b));
    if fa == 0.0 {
        return Some(a);
    }
    if fb == 0.0 {
        return Some(b);
    }
    if (fa > 0.0) == (fb > 0.0) {
        return None;
    }
    let positive_at_a = fa > 0.0;
    while b - a > KINK_TOL {
        let mid = 0.5 * (a + b);
        let fm = f(mid);
        if fm == 0.0 {
            return Some(mid);
        }
        if (fm > 0.0) == positive_at_a {
            a = mid;
        } else {
            b = mid;
        }
    }
    Some(0.5 * (a + b))
}

/// Per-time factors of a [`PayoffField`].
pub trait Obstacle: Sync {
    /// Time-dependent coefficients shared by every row at time `t`.
    fn prepare(&self, t: f64) -> Vec<f64>;
    /// Writes the obstacle values of row `row` (fast axis) into `out`.
    fn fill_row(&self, factors: &[f64], row: usize, out: &mut [f64]);
}

/// The transformed payoff on a tensor grid of one or two axes, stored as
/// separable exponential factors so that a full obstacle evaluation costs
/// `d` multiply-adds per node.
///
/// Layout is row-major with the primary axis slow: `index = j * n2 + k`.
#[derive(Debug, Clone)]
pub struct PayoffField {
    payoff: ReducedPayoff,
    primary: AxisGrid,
    secondary: Option<AxisGrid>,
    /// `exp(col0_i x_j)`, laid out `[j][i]`.
    primary_factors: Vec<f64>,
    /// `exp(col1_i x_k)`, laid out `[i][k]`.
    secondary_factors: Vec<f64>,
    /// Whether every product of factors stays inside the exponent clamp.
    separable: bool,
}

impl PayoffField {
    pub fn new(payoff: ReducedPayoff, primary: AxisGrid, secondary: Option<AxisGrid>, horizon: f64) -> Self {
        assert_eq!(payoff.columns.len(), 1 + secondary.is_some() as usize);
        let d = payoff.dim();
        let x1: Vec<f64> = primary.nodes.iter().map(|&y| y_to_x(y)).collect();
        let xl: Vec<f64> = secondary
            .as_ref()
            .map(|g| g.nodes.iter().map(|&y| y_to_x(y)).collect())
            .unwrap_or_else(|| vec![0.0]);
        let n2 = xl.len();
        let col0 = &payoff.columns[0];
        let zero_col = vec![0.0; d];
        let col1 = payoff.columns.get(1).unwrap_or(&zero_col);

        let mut bound = 0.0_f64;
        for i in 0..d {
            let base = payoff.offset[i].abs() + (payoff.drift_rates[i] * horizon).abs();
            let e1 = x1.iter().fold(0.0_f64, |m, x| m.max((col0[i] * x).abs()));
            let e2 = xl.iter().fold(0.0_f64, |m, x| m.max((col1[i] * x).abs()));
            bound = bound.max(base + e1 + e2);
        }
        let primary_factors = x1
            .iter()
            .flat_map(|x| col0.iter().map(move |q| (q * x).clamp(-MAX_EXPONENT, MAX_EXPONENT).exp()))
            .collect();
        let secondary_factors = col1
            .iter()
            .flat_map(|q| xl.iter().map(move |x| (q * x).clamp(-MAX_EXPONENT, MAX_EXPONENT).exp()))
            .collect::<Vec<f64>>();
        debug_assert_eq!(secondary_factors.len(), d * n2);
        PayoffField {
            payoff,
            primary,
            secondary,
            primary_factors,
            secondary_factors,
            separable: bound <= MAX_EXPONENT,
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.primary.len(), self.secondary.as_ref().map_or(1, |g| g.len()))
    }

    pub fn payoff(&self) -> &ReducedPayoff {
        &self.payoff
    }

    fn active_y(&self, j: usize, k: usize) -> Vec<f64> {
        match &self.secondary {
            Some(g) => vec![self.primary.nodes[j], g.nodes[k]],
            None => vec![self.primary.nodes[j]],
        }
    }

    /// Pointwise samples of `psi(., t)` at every node.
    pub fn obstacle_vector(&self, t: f64) -> Vec<f64> {
        let (n1, n2) = self.shape();
        let factors = self.prepare(t);
        let mut out = vec![0.0; n1 * n2];
        for (j, row) in out.chunks_mut(n2).enumerate() {
            self.fill_row(&factors, j, row);
        }
        out
    }

    /// Payoff at inception, replaced by its dual-cell average wherever the
    /// cell contains part of the kink `K = sum w_i s_i`.
    pub fn initial_vector(&self) -> Vec<f64> {
        let mut w = self.obstacle_vector(0.0);
        let (n1, n2) = self.shape();
        let money = |y1: f64, yl: Option<f64>| {
            let y: Vec<f64> = std::iter::once(y1).chain(yl).collect();
            self.payoff.moneyness(&y, 0.0)
        };
        let psi = |y1: f64, yl: Option<f64>| {
            let y: Vec<f64> = std::iter::once(y1).chain(yl).collect();
            self.payoff.psi(&y, 0.0)
        };
        let line_average = |a1: f64, b1: f64, yl: Option<f64>| {
            let kink = locate_kink(|y| money(y, yl), a1, b1);
            cell_average(|y| psi(y, yl), a1, b1, kink)
        };

        match &self.secondary {
            None => {
                for j in 0..n1 {
                    let (a, b) = self.primary.dual_cell(j);
                    if (money(a, None) > 0.0) != (money(b, None) > 0.0) {
                        w[j] = line_average(a, b, None);
                    }
                }
            }
            Some(sec) => {
                for j in 0..n1 {
                    let (a1, b1) = self.primary.dual_cell(j);
                    for k in 0..n2 {
                        let (al, bl) = sec.dual_cell(k);
                        let signs = [
                            money(a1, Some(al)) > 0.0,
                            money(b1, Some(al)) > 0.0,
                            money(a1, Some(bl)) > 0.0,
                            money(b1, Some(bl)) > 0.0,
                        ];
                        if signs.iter().all(|s| *s == signs[0]) {
                            continue;
                        }
                        let mut inner = |yl: f64| line_average(a1, b1, Some(yl));
                        w[j * n2 + k] = gauss_legendre(&mut inner, al, bl, PANELS) / (bl - al);
                    }
                }
            }
        }
        debug_assert!(w.iter().all(|v| v.is_finite()));
        w
    }
}

impl Obstacle for PayoffField {
    fn prepare(&self, t: f64) -> Vec<f64> {
        let p = &self.payoff;
        (0..p.dim())
            .map(|i| {
                let e = p.offset[i] + p.drift_rates[i] * t;
                if self.separable {
                    p.weights[i] * e.exp()
                } else {
                    e
                }
            })
            .collect()
    }

    fn fill_row(&self, factors: &[f64], row: usize, out: &mut [f64]) {
        let d = self.payoff.dim();
        let n2 = out.len();
        let strike = self.payoff.strike;
        if self.separable {
            out.iter_mut().for_each(|v| *v = 0.0);
            let e1 = &self.primary_factors[row * d..(row + 1) * d];
            for i in 0..d {
                let coef = factors[i] * e1[i];
                let el = &self.secondary_factors[i * n2..(i + 1) * n2];
                out.iter_mut().zip(el).for_each(|(o, e)| *o += coef * e);
            }
            out.iter_mut().for_each(|v| *v = strike * (1.0 - *v).max(0.0));
        } else {
            for (k, o) in out.iter_mut().enumerate() {
                let y = self.active_y(row, k);
                let x: Vec<f64> = y.iter().map(|&v| y_to_x(v)).collect();
                let ratio: f64 = (0..d)
                    .map(|i| {
                        let mut e = factors[i];
                        for (col, xa) in self.payoff.columns.iter().zip(&x) {
                            e += col[i] * xa;
                        }
                        self.payoff.weights[i] * e.clamp(-MAX_EXPONENT, MAX_EXPONENT).exp()
                    })
                    .sum();
                *o = strike * (1.0 - ratio).max(0.0);
            }
        }
    }
}
