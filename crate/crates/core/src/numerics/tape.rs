//! Reverse-mode tape over matrix primitives.
//!
//! Every op appends a node holding its output value and enough saved state for
//! its vector-Jacobian product. `backward` walks the nodes once, newest first.

use super::matrix::softmax_in_place;
use super::{Matrix, NumericsError, Scalar};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op<T> {
    Leaf,
    MatMul(Var, Var),
    Relu(Var),
    LeakyRelu(Var, T),
    RowSoftmax(Var),
    Tanh(Var),
    Sigmoid(Var),
    Mul(Var, Var),
    Add(Var, Var),
    Scale(Var, T),
    Transpose(Var),
    MeanPair(Var, Var),
    SoftmaxCrossEntropy {
        logits: Var,
        label: usize,
        probs: Matrix<T>,
    },
}

#[derive(Clone, Debug)]
struct Node<T> {
    value: Matrix<T>,
    op: Op<T>,
    needs_grad: bool,
}

/// Single-threaded record of one forward pass.
#[derive(Clone, Debug, Default)]
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
}

/// Gradients of a scalar output with respect to every node that needs them.
#[derive(Debug)]
pub struct Gradients<T> {
    grads: Vec<Option<Matrix<T>>>,
    visited: Vec<usize>,
}

impl<T: Scalar> Gradients<T> {
    pub fn get(&self, var: Var) -> Option<&Matrix<T>> {
        self.grads.get(var.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, var: Var) -> Option<Matrix<T>> {
        self.grads.get_mut(var.0).and_then(Option::take)
    }

    /// Node indices whose VJP ran, in execution order.
    pub fn visited(&self) -> &[usize] {
        &self.visited
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, var: Var) -> &Matrix<T> {
        &self.nodes[var.0].value
    }

    /// A trainable input; gradients are reported for it.
    pub fn param(&mut self, value: Matrix<T>) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// A constant input; no gradient flows into it.
    pub fn constant(&mut self, value: Matrix<T>) -> Var {
        self.push(value, Op::Leaf, false)
    }

    fn push(&mut self, value: Matrix<T>, op: Op<T>, needs_grad: bool) -> Var {
        self.nodes.push(Node { value, op, needs_grad });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, NumericsError> {
        let value = self.value(a).matmul(self.value(b))?;
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(value, Op::MatMul(a, b), ng))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.value(a).relu();
        let ng = self.needs(a);
        self.push(value, Op::Relu(a), ng)
    }

    pub fn leaky_relu(&mut self, a: Var, slope: T) -> Result<Var, NumericsError> {
        if !(slope > T::zero() && slope < T::one()) {
            return Err(NumericsError::InvalidSlope(slope.to_f64().unwrap_or(f64::NAN)));
        }
        let value = self.value(a).leaky_relu(slope);
        let ng = self.needs(a);
        Ok(self.push(value, Op::LeakyRelu(a, slope), ng))
    }

    pub fn row_softmax(&mut self, a: Var) -> Var {
        let value = self.value(a).row_softmax();
        let ng = self.needs(a);
        self.push(value, Op::RowSoftmax(a), ng)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let value = self.value(a).tanh();
        let ng = self.needs(a);
        self.push(value, Op::Tanh(a), ng)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let value = self.value(a).sigmoid();
        let ng = self.needs(a);
        self.push(value, Op::Sigmoid(a), ng)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, NumericsError> {
        let value = self.value(a).hadamard(self.value(b))?;
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(value, Op::Mul(a, b), ng))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, NumericsError> {
        let value = self.value(a).add(self.value(b))?;
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(value, Op::Add(a, b), ng))
    }

    pub fn scale(&mut self, a: Var, s: T) -> Var {
        let value = self.value(a).scale(s);
        let ng = self.needs(a);
        self.push(value, Op::Scale(a, s), ng)
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let value = self.value(a).transpose();
        let ng = self.needs(a);
        self.push(value, Op::Transpose(a), ng)
    }

    /// Elementwise `½(a + b)`.
    pub fn mean_pair(&mut self, a: Var, b: Var) -> Result<Var, NumericsError> {
        let value = self.value(a).mean_pair(self.value(b))?;
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(value, Op::MeanPair(a, b), ng))
    }

    /// Fused softmax + cross-entropy on a `1×C` logits row. Produces a `1×1`
    /// loss `-ln(max(softmax(z)[label], 1e-12))`; its VJP is `softmax(z) - onehot`.
    pub fn softmax_cross_entropy(&mut self, logits: Var, label: usize) -> Result<Var, NumericsError> {
        let z = self.value(logits);
        let classes = z.cols();
        if label >= classes {
            return Err(NumericsError::InvalidLabel { label, classes });
        }
        if z.rows() != 1 {
            return Err(NumericsError::ShapeMismatch {
                op: "softmax_cross_entropy",
                lhs: z.shape(),
                rhs: (1, classes),
            });
        }
        let mut probs = z.clone();
        softmax_in_place(probs.row_mut(0));
        let floor = T::from(1e-12).unwrap();
        let loss = -probs[(0, label)].max(floor).ln();
        let value = Matrix::filled(1, 1, loss);
        let ng = self.needs(logits);
        Ok(self.push(value, Op::SoftmaxCrossEntropy { logits, label, probs }, ng))
    }

    /// Back-propagates from a `1×1` output.
    pub fn backward(&self, output: Var) -> Gradients<T> {
        let n = self.nodes.len();
        let mut grads: Vec<Option<Matrix<T>>> = vec![None; n];
        let mut visited = Vec::new();
        let out = &self.nodes[output.0].value;
        grads[output.0] = Some(Matrix::filled(out.rows(), out.cols(), T::one()));

        for idx in (0..=output.0).rev() {
            let node = &self.nodes[idx];
            if !node.needs_grad || matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            visited.push(idx);
            for (parent, pg) in self.vjp(node, &g) {
                if !self.nodes[parent.0].needs_grad {
                    continue;
                }
                match &mut grads[parent.0] {
                    Some(acc) => acc.add_assign(&pg),
                    slot => *slot = Some(pg),
                }
            }
        }
        Gradients { grads, visited }
    }

    fn vjp(&self, node: &Node<T>, g: &Matrix<T>) -> Vec<(Var, Matrix<T>)> {
        let y = &node.value;
        match &node.op {
            Op::Leaf => Vec::new(),
            Op::MatMul(a, b) => {
                let mut out = Vec::with_capacity(2);
                if self.needs(*a) {
                    out.push((*a, g.matmul_t(self.value(*b)).expect("vjp shape")));
                }
                if self.needs(*b) {
                    out.push((*b, self.value(*a).t_matmul(g).expect("vjp shape")));
                }
                out
            }
            Op::Relu(a) => {
                let x = self.value(*a);
                let ga = g.zip_map(x, "relu_vjp", |g, x| if x > T::zero() { g } else { T::zero() });
                vec![(*a, ga.expect("vjp shape"))]
            }
            Op::LeakyRelu(a, slope) => {
                let x = self.value(*a);
                let s = *slope;
                let ga = g.zip_map(x, "leaky_vjp", |g, x| if x > T::zero() { g } else { s * g });
                vec![(*a, ga.expect("vjp shape"))]
            }
            Op::RowSoftmax(a) => {
                let mut ga = g.clone();
                for i in 0..y.rows() {
                    let yr = y.row(i);
                    let inner = g.row(i).iter().zip(yr).fold(T::zero(), |acc, (&g, &y)| acc + g * y);
                    for (o, &yv) in ga.row_mut(i).iter_mut().zip(yr) {
                        *o = yv * (*o - inner);
                    }
                }
                vec![(*a, ga)]
            }
            Op::Tanh(a) => {
                let ga = g.zip_map(y, "tanh_vjp", |g, y| g * (T::one() - y * y));
                vec![(*a, ga.expect("vjp shape"))]
            }
            Op::Sigmoid(a) => {
                let ga = g.zip_map(y, "sigmoid_vjp", |g, y| g * y * (T::one() - y));
                vec![(*a, ga.expect("vjp shape"))]
            }
            Op::Mul(a, b) => {
                let mut out = Vec::with_capacity(2);
                if self.needs(*a) {
                    out.push((*a, g.hadamard(self.value(*b)).expect("vjp shape")));
                }
                if self.needs(*b) {
                    out.push((*b, g.hadamard(self.value(*a)).expect("vjp shape")));
                }
                out
            }
            Op::Add(a, b) => vec![(*a, g.clone()), (*b, g.clone())],
            Op::Scale(a, s) => vec![(*a, g.scale(*s))],
            Op::Transpose(a) => vec![(*a, g.transpose())],
            Op::MeanPair(a, b) => {
                let half = g.scale(T::from(0.5).unwrap());
                vec![(*a, half.clone()), (*b, half)]
            }
            Op::SoftmaxCrossEntropy { logits, label, probs } => {
                let scale = g[(0, 0)];
                let mut ga = probs.clone();
                ga[(0, *label)] = ga[(0, *label)] - T::one();
                vec![(*logits, ga.scale(scale))]
            }
        }
    }
}
