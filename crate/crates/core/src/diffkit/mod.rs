//! Matrix-valued reverse-mode tape with a forward tangent channel.
//!
//! Every node holds a dense matrix. Binary elementwise ops broadcast
//! dimensions of size one, which is how per-design quantities (one column per
//! design) meet per-strain-point quantities (one column per point).
//!
//! The tangent channel tracks `d(node)/d(eps)` for a single scalar input
//! direction. Leaves created with [`Tape::seeded_leaf`] carry a tangent; every
//! op whose inputs carry tangents records its tangent as *ordinary tape
//! nodes*, built from primal values. A reverse sweep through
//! [`Tape::tangent_of`] therefore yields mixed second derivatives
//! `d2 out / (d eps d leaf)` (forward-over-reverse).
//!
//! Tangent nodes never carry tangents of their own: derivatives above second
//! order are not representable.

mod mat;

pub use mat::Mat;

use alloc::boxed::Box;
use alloc::vec::Vec;
use thiserror::Error;

use crate::math;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiffError {
    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    ShapeMismatch { op: &'static str, lhs: (usize, usize), rhs: (usize, usize) },
    #[error("backward requires a 1x1 output, got {0:?}")]
    NonScalarOutput((usize, usize)),
    #[error("log of non-positive value {0}")]
    LogNonPositive(f64),
    #[error("tangent channel not enabled on this tape")]
    TangentDisabled,
    #[error("index {index} out of range for {len} columns")]
    IndexOutOfRange { index: usize, len: usize },
}

pub type Result<T> = core::result::Result<T, DiffError>;

/// Handle to a tape node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(u32);

impl Var {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Column index used by [`Tape::gather_cols`] to produce a zero column.
pub const ZERO_COL: u32 = u32::MAX;

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    Neg(Var),
    Scale(Var, f64),
    Offset(Var, f64),
    Exp(Var),
    Ln(Var),
    Tanh(Var),
    Relu(Var),
    Softplus(Var),
    Logistic(Var),
    Square(Var),
    Abs(Var),
    Pass(Var),
    MatMul(Var, Var),
    Sum(Var),
    Rows(Var, usize),
    Gather(Var, Box<[u32]>),
    Softmin(Var, Var, f64),
}

struct Node {
    op: Op,
    value: Mat,
    tangent: Option<Var>,
}

/// Single-writer computation tape.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    seeded: bool,
}

fn broadcast_shape(op: &'static str, a: (usize, usize), b: (usize, usize)) -> Result<(usize, usize)> {
    let dim = |x: usize, y: usize| {
        if x == y || y == 1 {
            Some(x)
        } else if x == 1 {
            Some(y)
        } else {
            None
        }
    };
    match (dim(a.0, b.0), dim(a.1, b.1)) {
        (Some(r), Some(c)) => Ok((r, c)),
        _ => Err(DiffError::ShapeMismatch { op, lhs: a, rhs: b }),
    }
}

fn zip_broadcast(a: &Mat, b: &Mat, shape: (usize, usize), f: impl Fn(f64, f64) -> f64) -> Mat {
    if a.shape() == shape && b.shape() == shape {
        let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
        return Mat::from_vec(shape.0, shape.1, data).expect("shape");
    }
    Mat::from_fn(shape.0, shape.1, |i, j| {
        let x = a.get(if a.rows() == 1 { 0 } else { i }, if a.cols() == 1 { 0 } else { j });
        let y = b.get(if b.rows() == 1 { 0 } else { i }, if b.cols() == 1 { 0 } else { j });
        f(x, y)
    })
}

/// Sum a broadcast gradient back down to `shape`.
fn reduce_to(g: Mat, shape: (usize, usize)) -> Mat {
    if g.shape() == shape {
        return g;
    }
    let mut out = Mat::zeros(shape.0, shape.1);
    for i in 0..g.rows() {
        for j in 0..g.cols() {
            let (ri, rj) = (if shape.0 == 1 { 0 } else { i }, if shape.1 == 1 { 0 } else { j });
            let v = out.get(ri, rj) + g.get(i, j);
            out.set(ri, rj, v);
        }
    }
    out
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Mat {
        &self.nodes[v.index()].value
    }

    /// Primal of a `1 x 1` node; panics on other shapes.
    pub fn scalar(&self, v: Var) -> f64 {
        self.value(v).as_scalar().expect("scalar node")
    }

    fn push(&mut self, op: Op, value: Mat) -> Var {
        let id = Var(u32::try_from(self.nodes.len()).expect("tape too long"));
        self.nodes.push(Node { op, value, tangent: None });
        id
    }

    /// Input node (weights, design variables, data). Gradients are reported
    /// for every node, so leaves and constants are the same thing.
    pub fn leaf(&mut self, value: Mat) -> Var {
        self.push(Op::Leaf, value)
    }

    pub fn constant(&mut self, value: Mat) -> Var {
        self.push(Op::Leaf, value)
    }

    pub fn scalar_leaf(&mut self, value: f64) -> Var {
        self.leaf(Mat::scalar(value))
    }

    /// Leaf whose derivative with respect to the tangent direction is
    /// `tangent` (usually all ones for the strain input). Enables the channel.
    pub fn seeded_leaf(&mut self, value: Mat, tangent: Mat) -> Result<Var> {
        if value.shape() != tangent.shape() {
            return Err(DiffError::ShapeMismatch { op: "seeded_leaf", lhs: value.shape(), rhs: tangent.shape() });
        }
        self.seeded = true;
        let t = self.push(Op::Leaf, tangent);
        let v = self.push(Op::Leaf, value);
        self.nodes[v.index()].tangent = Some(t);
        Ok(v)
    }

    pub fn tangent_enabled(&self) -> bool {
        self.seeded
    }

    /// Node holding `d v / d eps`; itself differentiable by [`Tape::backward`].
    pub fn tangent_of(&mut self, v: Var) -> Result<Var> {
        if !self.seeded {
            return Err(DiffError::TangentDisabled);
        }
        match self.nodes[v.index()].tangent {
            Some(t) => Ok(t),
            None => {
                let (r, c) = self.value(v).shape();
                Ok(self.constant(Mat::zeros(r, c)))
            }
        }
    }

    fn tan(&self, v: Var) -> Option<Var> {
        self.nodes[v.index()].tangent
    }

    fn eval(&self, op: &Op) -> Result<Mat> {
        let val = |v: &Var| &self.nodes[v.index()].value;
        Ok(match op {
            Op::Leaf => unreachable!("leaves are pushed directly"),
            Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) | Op::Div(a, b) => {
                let (x, y) = (val(a), val(b));
                let (name, f): (&'static str, fn(f64, f64) -> f64) = match op {
                    Op::Add(..) => ("add", |p, q| p + q),
                    Op::Sub(..) => ("sub", |p, q| p - q),
                    Op::Mul(..) => ("mul", |p, q| p * q),
                    _ => ("div", |p, q| p / q),
                };
                let shape = broadcast_shape(name, x.shape(), y.shape())?;
                zip_broadcast(x, y, shape, f)
            }
            Op::Neg(a) => val(a).map(|x| -x),
            Op::Scale(a, s) => {
                let s = *s;
                val(a).map(|x| x * s)
            }
            Op::Offset(a, s) => {
                let s = *s;
                val(a).map(|x| x + s)
            }
            Op::Exp(a) => val(a).map(math::exp),
            Op::Ln(a) => {
                if let Some(&bad) = val(a).data().iter().find(|&&x| !(x > 0.0)) {
                    return Err(DiffError::LogNonPositive(bad));
                }
                val(a).map(math::ln)
            }
            Op::Tanh(a) => val(a).map(math::tanh),
            Op::Relu(a) => val(a).map(|x| x.max(0.0)),
            Op::Softplus(a) => val(a).map(math::softplus),
            Op::Logistic(a) => val(a).map(math::logistic),
            Op::Square(a) => val(a).map(|x| x * x),
            Op::Abs(a) => val(a).map(f64::abs),
            Op::Pass(a) => val(a).clone(),
            Op::MatMul(a, b) => {
                let (x, y) = (val(a), val(b));
                x.matmul(y).ok_or(DiffError::ShapeMismatch { op: "matmul", lhs: x.shape(), rhs: y.shape() })?
            }
            Op::Sum(a) => Mat::scalar(val(a).data().iter().sum()),
            Op::Rows(a, start) => unreachable!("rows evaluated in place {a:?} {start}"),
            Op::Gather(a, idx) => {
                let x = val(a);
                let mut out = Mat::zeros(x.rows(), idx.len());
                for (j, &src) in idx.iter().enumerate() {
                    if src == ZERO_COL {
                        continue;
                    }
                    let src = src as usize;
                    if src >= x.cols() {
                        return Err(DiffError::IndexOutOfRange { index: src, len: x.cols() });
                    }
                    for i in 0..x.rows() {
                        out.set(i, j, x.get(i, src));
                    }
                }
                out
            }
            Op::Softmin(a, b, k) => {
                let (x, y) = (val(a), val(b));
                if x.shape() != y.shape() {
                    return Err(DiffError::ShapeMismatch { op: "softmin", lhs: x.shape(), rhs: y.shape() });
                }
                let k = *k;
                zip_broadcast(x, y, x.shape(), |p, q| {
                    let m = p.min(q);
                    m - k * math::ln(math::exp(-(p - m) / k) + math::exp(-(q - m) / k))
                })
            }
        })
    }

    fn raw(&mut self, op: Op) -> Result<Var> {
        let value = self.eval(&op)?;
        Ok(self.push(op, value))
    }

    fn set_tangent(&mut self, out: Var, t: Option<Var>) -> Result<Var> {
        if let Some(t) = t {
            let want = self.value(out).shape();
            let t = if self.value(t).shape() == want {
                t
            } else {
                let z = self.constant(Mat::zeros(want.0, want.1));
                self.raw(Op::Add(z, t))?
            };
            self.nodes[out.index()].tangent = Some(t);
        }
        Ok(out)
    }

    fn tadd(&mut self, a: Option<Var>, b: Option<Var>) -> Result<Option<Var>> {
        Ok(match (a, b) {
            (None, None) => None,
            (Some(x), None) | (None, Some(x)) => Some(x),
            (Some(x), Some(y)) => Some(self.raw(Op::Add(x, y))?),
        })
    }

    /// Multiply an optional tangent by a constant mask computed from `src`.
    fn tmask(&mut self, t: Option<Var>, src: Var, f: impl Fn(f64) -> f64) -> Result<Option<Var>> {
        match t {
            None => Ok(None),
            Some(t) => {
                let m = self.value(src).map(f);
                let m = self.constant(m);
                Ok(Some(self.raw(Op::Mul(m, t))?))
            }
        }
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.raw(Op::Add(a, b))?;
        let t = self.tadd(self.tan(a), self.tan(b))?;
        self.set_tangent(out, t)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.raw(Op::Sub(a, b))?;
        let t = match (self.tan(a), self.tan(b)) {
            (None, None) => None,
            (Some(x), None) => Some(x),
            (None, Some(y)) => Some(self.raw(Op::Neg(y))?),
            (Some(x), Some(y)) => Some(self.raw(Op::Sub(x, y))?),
        };
        self.set_tangent(out, t)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.raw(Op::Mul(a, b))?;
        let ta = match self.tan(a) {
            Some(t) => Some(self.raw(Op::Mul(t, b))?),
            None => None,
        };
        let tb = match self.tan(b) {
            Some(t) => Some(self.raw(Op::Mul(a, t))?),
            None => None,
        };
        let t = self.tadd(ta, tb)?;
        self.set_tangent(out, t)
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.raw(Op::Div(a, b))?;
        // d(a/b) = (da - out * db) / b
        let num = match self.tan(b) {
            Some(tb) => {
                let p = self.raw(Op::Mul(out, tb))?;
                match self.tan(a) {
                    Some(ta) => Some(self.raw(Op::Sub(ta, p))?),
                    None => Some(self.raw(Op::Neg(p))?),
                }
            }
            None => self.tan(a),
        };
        let t = match num {
            Some(n) => Some(self.raw(Op::Div(n, b))?),
            None => None,
        };
        self.set_tangent(out, t)
    }

    pub fn neg(&mut self, a: Var) -> Result<Var> {
        let out = self.raw(Op::Neg(a))?;
        let t = match self.tan(a) {
            Some(t) => Some(self.raw(Op::Neg(t))?),
            None => None,
        };
        self.set_tangent(out, t)
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Result<Var> {
        let out = self.raw(Op::Scale(a, s))?;
        let t = match self.tan(a) {
            Some(t) => Some(self.raw(Op::Scale(t, s))?),
            None => None,
        };
        self.set_tangent(out, t)
    }

    pub fn offset(&mut self, a: Var, s: f64) -> Result<Var> {
        let out = self.raw(Op::Offset(a, s))?;
        let t = self.tan(a);
        self.set_tangent(out, t)
    }

    pub fn exp(&mut self, a: Var) -> Result<Var> {
        let out = self.raw(Op::Exp(a))?;
        let t = match self.tan(a) {
            Some(t) => Some(self.raw(Op::Mul(out, t))?),
            None => None,
        };
        self.set_tangent(out, t)
    }

    pub fn ln(&mut self, a: Var) -> Result<Var> {
        let out = self.raw(Op::Ln(a))?;
        let t = match self.tan(a) {
            Some(t) => Some(self.raw(Op::Div(t, a))?),
            None => None,
        };
        self.set_tangent(out, t)
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        let out = self.raw(Op::Tanh(a))?;
        let t = match self.tan(a) {
            Some(t) => {
                let sq = self.raw(Op::Square(out))?;
                let n = self.raw(Op::Neg(sq))?;
                let d = self.raw(Op::Offset(n, 1.0))?;
                Some(self.raw(Op::Mul(d, t))?)
            }
            None => None,
        };
        self.set_tangent(out, t)
    }

    /// `max(x, 0)`; the derivative at 0 is taken as 0.
    pub fn relu(&mut self, a: Var) -> Result<Var> {
        let out = self.raw(Op::Relu(a))?;
        let t = self.tmask(self.tan(a), a, |x| if x > 0.0 { 1.0 } else { 0.0 })?;
        self.set_tangent(out, t)
    }

    pub fn softplus(&mut self, a: Var) -> Result<Var> {
        let out = self.raw(Op::Softplus(a))?;
        let t = match self.tan(a) {
            Some(t) => {
                let s = self.raw(Op::Logistic(a))?;
                Some(self.raw(Op::Mul(s, t))?)
            }
            None => None,
        };
        self.set_tangent(out, t)
    }

    pub fn logistic(&mut self, a: Var) -> Result<Var> {
        let out = self.raw(Op::Logistic(a))?;
        let t = match self.tan(a) {
            Some(t) => {
                let n = self.raw(Op::Neg(out))?;
                let one_minus = self.raw(Op::Offset(n, 1.0))?;
                let d = self.raw(Op::Mul(out, one_minus))?;
                Some(self.raw(Op::Mul(d, t))?)
            }
            None => None,
        };
        self.set_tangent(out, t)
    }

    pub fn square(&mut self, a: Var) -> Result<Var> {
        let out = self.raw(Op::Square(a))?;
        let t = match self.tan(a) {
            Some(t) => {
                let p = self.raw(Op::Mul(a, t))?;
                Some(self.raw(Op::Scale(p, 2.0))?)
            }
            None => None,
        };
        self.set_tangent(out, t)
    }

    pub fn abs(&mut self, a: Var) -> Result<Var> {
        let out = self.raw(Op::Abs(a))?;
        let t = self.tmask(self.tan(a), a, |x| {
            if x > 0.0 {
                1.0
            } else if x < 0.0 {
                -1.0
            } else {
                0.0
            }
        })?;
        self.set_tangent(out, t)
    }

    /// Same value and gradient as `a`, but treated as constant in the tangent
    /// direction. Used for quantities that depend only on design inputs but
    /// were computed on strain-seeded columns.
    pub fn drop_tangent(&mut self, a: Var) -> Result<Var> {
        self.raw(Op::Pass(a))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.raw(Op::MatMul(a, b))?;
        let ta = match self.tan(a) {
            Some(t) => Some(self.raw(Op::MatMul(t, b))?),
            None => None,
        };
        let tb = match self.tan(b) {
            Some(t) => Some(self.raw(Op::MatMul(a, t))?),
            None => None,
        };
        let t = self.tadd(ta, tb)?;
        self.set_tangent(out, t)
    }

    /// Matrix-vector product; `x` is a column vector.
    pub fn matvec(&mut self, a: Var, x: Var) -> Result<Var> {
        if self.value(x).cols() != 1 {
            return Err(DiffError::ShapeMismatch { op: "matvec", lhs: self.value(a).shape(), rhs: self.value(x).shape() });
        }
        self.matmul(a, x)
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let out = self.raw(Op::Sum(a))?;
        let t = match self.tan(a) {
            Some(t) => Some(self.raw(Op::Sum(t))?),
            None => None,
        };
        self.set_tangent(out, t)
    }

    pub fn dot(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.value(a).shape() != self.value(b).shape() {
            return Err(DiffError::ShapeMismatch { op: "dot", lhs: self.value(a).shape(), rhs: self.value(b).shape() });
        }
        let p = self.mul(a, b)?;
        self.sum(p)
    }

    fn raw_rows(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let x = self.value(a);
        if start + len > x.rows() {
            return Err(DiffError::IndexOutOfRange { index: start + len, len: x.rows() });
        }
        let value = Mat::from_fn(len, x.cols(), |i, j| x.get(start + i, j));
        Ok(self.push(Op::Rows(a, start), value))
    }

    /// Rows `start..start + len`.
    pub fn rows(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let out = self.raw_rows(a, start, len)?;
        let t = match self.tan(a) {
            Some(t) => Some(self.raw_rows(t, start, len)?),
            None => None,
        };
        self.set_tangent(out, t)
    }

    /// Column `j` of the output is column `idx[j]` of `a`, or zeros for
    /// [`ZERO_COL`]. The adjoint scatter-adds.
    pub fn gather_cols(&mut self, a: Var, idx: &[u32]) -> Result<Var> {
        let idx: Box<[u32]> = idx.into();
        let out = self.raw(Op::Gather(a, idx.clone()))?;
        let t = match self.tan(a) {
            Some(t) => Some(self.raw(Op::Gather(t, idx))?),
            None => None,
        };
        self.set_tangent(out, t)
    }

    /// `-k * log(exp(-a/k) + exp(-b/k))`, evaluated with the log-sum-exp
    /// shift. Its derivative is the softmin-weighted mix of `da` and `db`.
    pub fn softmin(&mut self, a: Var, b: Var, k: f64) -> Result<Var> {
        let out = self.raw(Op::Softmin(a, b, k))?;
        let (ta, tb) = (self.tan(a), self.tan(b));
        let t = if ta.is_none() && tb.is_none() {
            None
        } else {
            // weight of `a` is logistic((b - a) / k)
            let d = self.raw(Op::Sub(b, a))?;
            let d = self.raw(Op::Scale(d, 1.0 / k))?;
            let wa = self.raw(Op::Logistic(d))?;
            let ta = match ta {
                Some(ta) => Some(self.raw(Op::Mul(wa, ta))?),
                None => None,
            };
            let tb = match tb {
                Some(tb) => {
                    let n = self.raw(Op::Neg(wa))?;
                    let wb = self.raw(Op::Offset(n, 1.0))?;
                    Some(self.raw(Op::Mul(wb, tb))?)
                }
                None => None,
            };
            self.tadd(ta, tb)?
        };
        self.set_tangent(out, t)
    }

    /// Reverse sweep from a `1 x 1` node.
    pub fn backward(&self, output: Var) -> Result<Gradients> {
        let shape = self.value(output).shape();
        if shape != (1, 1) {
            return Err(DiffError::NonScalarOutput(shape));
        }
        let n = output.index() + 1;
        let mut adj: Vec<Option<Mat>> = (0..n).map(|_| None).collect();
        adj[output.index()] = Some(Mat::scalar(1.0));

        fn acc(adj: &mut [Option<Mat>], v: Var, g: Mat) {
            match &mut adj[v.index()] {
                Some(existing) => existing.add_assign(&g),
                slot @ None => *slot = Some(g),
            }
        }

        for i in (0..n).rev() {
            let Some(g) = adj[i].take() else { continue };
            let node = &self.nodes[i];
            let val = |v: &Var| &self.nodes[v.index()].value;
            match &node.op {
                Op::Leaf => {}
                Op::Add(a, b) => {
                    acc(&mut adj, *b, reduce_to(g.clone(), val(b).shape()));
                    acc(&mut adj, *a, reduce_to(g.clone(), val(a).shape()));
                }
                Op::Sub(a, b) => {
                    acc(&mut adj, *b, reduce_to(g.map(|x| -x), val(b).shape()));
                    acc(&mut adj, *a, reduce_to(g.clone(), val(a).shape()));
                }
                Op::Mul(a, b) => {
                    let (x, y) = (val(a), val(b));
                    let ga = zip_broadcast(&g, y, g.shape(), |p, q| p * q);
                    let gb = zip_broadcast(&g, x, g.shape(), |p, q| p * q);
                    acc(&mut adj, *b, reduce_to(gb, y.shape()));
                    acc(&mut adj, *a, reduce_to(ga, x.shape()));
                }
                Op::Div(a, b) => {
                    let (x, y) = (val(a), val(b));
                    let ga = zip_broadcast(&g, y, g.shape(), |p, q| p / q);
                    let t = zip_broadcast(&ga, &node.value, g.shape(), |p, q| -p * q);
                    acc(&mut adj, *b, reduce_to(t, y.shape()));
                    acc(&mut adj, *a, reduce_to(ga, x.shape()));
                }
                Op::Neg(a) => acc(&mut adj, *a, g.map(|x| -x)),
                Op::Scale(a, s) => {
                    let s = *s;
                    acc(&mut adj, *a, g.map(|x| x * s))
                }
                Op::Offset(a, _) | Op::Pass(a) => acc(&mut adj, *a, g.clone()),
                Op::Exp(a) => acc(&mut adj, *a, zip_broadcast(&g, &node.value, g.shape(), |p, q| p * q)),
                Op::Ln(a) => acc(&mut adj, *a, zip_broadcast(&g, val(a), g.shape(), |p, q| p / q)),
                Op::Tanh(a) => acc(&mut adj, *a, zip_broadcast(&g, &node.value, g.shape(), |p, q| p * (1.0 - q * q))),
                Op::Relu(a) => acc(
                    &mut adj,
                    *a,
                    zip_broadcast(&g, val(a), g.shape(), |p, q| if q > 0.0 { p } else { 0.0 }),
                ),
                Op::Softplus(a) => {
                    acc(&mut adj, *a, zip_broadcast(&g, val(a), g.shape(), |p, q| p * math::logistic(q)))
                }
                Op::Logistic(a) => {
                    acc(&mut adj, *a, zip_broadcast(&g, &node.value, g.shape(), |p, q| p * q * (1.0 - q)))
                }
                Op::Square(a) => acc(&mut adj, *a, zip_broadcast(&g, val(a), g.shape(), |p, q| 2.0 * p * q)),
                Op::Abs(a) => acc(
                    &mut adj,
                    *a,
                    zip_broadcast(&g, val(a), g.shape(), |p, q| {
                        if q > 0.0 {
                            p
                        } else if q < 0.0 {
                            -p
                        } else {
                            0.0
                        }
                    }),
                ),
                Op::MatMul(a, b) => {
                    let (x, y) = (val(a), val(b));
                    acc(&mut adj, *b, x.t_matmul(&g));
                    acc(&mut adj, *a, g.matmul_t(y));
                }
                Op::Sum(a) => {
                    let (r, c) = val(a).shape();
                    acc(&mut adj, *a, Mat::filled(r, c, g.data()[0]));
                }
                Op::Rows(a, start) => {
                    let (r, c) = val(a).shape();
                    let mut ga = Mat::zeros(r, c);
                    for i in 0..g.rows() {
                        for j in 0..c {
                            ga.set(start + i, j, g.get(i, j));
                        }
                    }
                    acc(&mut adj, *a, ga);
                }
                Op::Gather(a, idx) => {
                    let (r, c) = val(a).shape();
                    let mut ga = Mat::zeros(r, c);
                    for (j, &src) in idx.iter().enumerate() {
                        if src == ZERO_COL {
                            continue;
                        }
                        for i in 0..r {
                            let v = ga.get(i, src as usize) + g.get(i, j);
                            ga.set(i, src as usize, v);
                        }
                    }
                    acc(&mut adj, *a, ga);
                }
                Op::Softmin(a, b, k) => {
                    let k = *k;
                    let (x, y) = (val(a), val(b));
                    let wa = zip_broadcast(x, y, x.shape(), |p, q| math::logistic((q - p) / k));
                    let ga = zip_broadcast(&g, &wa, g.shape(), |p, w| p * w);
                    let gb = zip_broadcast(&g, &wa, g.shape(), |p, w| p * (1.0 - w));
                    acc(&mut adj, *b, gb);
                    acc(&mut adj, *a, ga);
                }
            }
            adj[i] = Some(g);
        }
        Ok(Gradients { adj })
    }
}

/// Adjoints from one reverse sweep.
pub struct Gradients {
    adj: Vec<Option<Mat>>,
}

impl Gradients {
    /// Adjoint of `v`, or `None` if the output does not depend on it.
    pub fn get(&self, v: Var) -> Option<&Mat> {
        self.adj.get(v.index()).and_then(Option::as_ref)
    }

    /// Adjoint of `v` with unreached nodes reported as zeros of `shape`.
    pub fn wrt(&self, v: Var, shape: (usize, usize)) -> Mat {
        self.get(v).cloned().unwrap_or_else(|| Mat::zeros(shape.0, shape.1))
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.get(v).map(|m| m.data()[0]).unwrap_or(0.0)
    }
}
