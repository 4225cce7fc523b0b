//! The DyHG network: hypergraph construction, one round of hypergraph
//! convolution, residual averaging, gated attention pooling and a bias-free
//! softmax classifier.
//!
//! ```text
//! X ──► ReLU(X·W1) ──► softmax((·+G)/τ) = A
//! E  = LeakyReLU(Aᵀ·X)
//! X' = LeakyReLU(A·E)
//! Z  = ½(X + X')
//! aₙ = softmax_n( w·(tanh(V zₙ) ⊙ sigmoid(U zₙ)) ),   h = Σ aₙ zₙ
//! ŷ  = softmax(h·W)
//! ```

mod adam;
pub mod checkpoint;
pub mod layers;

pub use adam::{adam_step, AdamConfig};
pub use layers::{attention_pool, classify, cross_entropy, hyperedge_features, node_update, residual_fuse};

use serde::{Deserialize, Serialize};

use crate::dhcm::{self, DhcmConfig, IncidenceForm, IncidenceMatrix, Noise, Variant};
use crate::error::{Error, Result};
use crate::numerics::{Matrix, Rng, Scalar, Tape, Var};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Patch embedding dimension.
    pub d: usize,
    /// Attention hidden dimension.
    pub hidden: usize,
    pub classes: usize,
    pub leaky_slope: f64,
    pub dhcm: DhcmConfig,
}

impl ModelConfig {
    pub fn new(d: usize, classes: usize) -> Self {
        Self {
            d,
            hidden: 256,
            classes,
            leaky_slope: 0.01,
            dhcm: DhcmConfig::default(),
        }
    }

    pub fn num_hyperedges(&self) -> usize {
        self.dhcm.num_hyperedges
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.hidden == 0 || self.classes == 0 {
            return Err(Error::config(format!(
                "d, hidden and classes must be >= 1 (d={}, hidden={}, classes={})",
                self.d, self.hidden, self.classes
            )));
        }
        if !(self.leaky_slope > 0.0 && self.leaky_slope < 1.0) {
            return Err(Error::config(format!(
                "leaky slope {} outside (0, 1)",
                self.leaky_slope
            )));
        }
        self.dhcm.validate()
    }
}

/// A learnable tensor with its gradient and Adam moment buffers.
#[derive(Clone, Debug, PartialEq)]
pub struct Param<T> {
    pub value: Matrix<T>,
    pub grad: Matrix<T>,
    pub m: Matrix<T>,
    pub v: Matrix<T>,
}

impl<T: Scalar> Param<T> {
    pub fn new(value: Matrix<T>) -> Self {
        let (r, c) = value.shape();
        Self {
            value,
            grad: Matrix::zeros(r, c),
            m: Matrix::zeros(r, c),
            v: Matrix::zeros(r, c),
        }
    }

    fn cast<U: Scalar>(&self) -> Param<U> {
        Param {
            value: self.value.cast(),
            grad: self.grad.cast(),
            m: self.m.cast(),
            v: self.v.cast(),
        }
    }
}

/// All learnable tensors. No bias terms.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams<T> {
    /// d×H low-rank incidence projection.
    pub w1: Param<T>,
    /// M×d tanh-branch attention weights.
    pub v: Param<T>,
    /// M×d sigmoid-branch attention weights.
    pub u: Param<T>,
    /// 1×M attention scoring vector.
    pub w: Param<T>,
    /// d×C classifier.
    pub w_cls: Param<T>,
}

pub const TENSOR_NAMES: [&str; 5] = ["W1", "V", "U", "w", "W"];

impl<T: Scalar> ModelParams<T> {
    pub fn tensors(&self) -> [&Param<T>; 5] {
        [&self.w1, &self.v, &self.u, &self.w, &self.w_cls]
    }

    pub fn tensors_mut(&mut self) -> [&mut Param<T>; 5] {
        [&mut self.w1, &mut self.v, &mut self.u, &mut self.w, &mut self.w_cls]
    }

    pub fn expected_shapes(cfg: &ModelConfig) -> [(usize, usize); 5] {
        [
            (cfg.d, cfg.num_hyperedges()),
            (cfg.hidden, cfg.d),
            (cfg.hidden, cfg.d),
            (1, cfg.hidden),
            (cfg.d, cfg.classes),
        ]
    }

    /// Rebuilds parameters from bare values (moments and gradients zeroed).
    pub fn from_values(values: [Matrix<T>; 5]) -> Self {
        let [w1, v, u, w, w_cls] = values;
        Self {
            w1: Param::new(w1),
            v: Param::new(v),
            u: Param::new(u),
            w: Param::new(w),
            w_cls: Param::new(w_cls),
        }
    }

    pub fn values(&self) -> [Matrix<T>; 5] {
        self.tensors().map(|p| p.value.clone())
    }

    pub fn cast<U: Scalar>(&self) -> ModelParams<U> {
        ModelParams {
            w1: self.w1.cast(),
            v: self.v.cast(),
            u: self.u.cast(),
            w: self.w.cast(),
            w_cls: self.w_cls.cast(),
        }
    }

    pub fn zero_grad(&mut self) {
        for p in self.tensors_mut() {
            p.grad = Matrix::zeros(p.value.rows(), p.value.cols());
        }
    }
}

/// Glorot-uniform matrix: entries in `±√(6/(rows+cols))`.
pub fn xavier_uniform<T: Scalar>(rows: usize, cols: usize, rng: &mut Rng) -> Matrix<T> {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    rng.uniform_matrix(rows, cols, -bound, bound)
}

/// Glorot-uniform initialization of every tensor, drawn in the order
/// W1, V, U, w, W. Moment buffers start at zero.
pub fn init_params<T: Scalar>(cfg: &ModelConfig, rng: &mut Rng) -> ModelParams<T> {
    let shapes = ModelParams::<T>::expected_shapes(cfg);
    ModelParams::from_values(shapes.map(|(r, c)| xavier_uniform(r, c, rng)))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Prediction<T> {
    /// 1×C class probabilities.
    pub probs: Matrix<T>,
    /// N×1 attention weights over patches.
    pub attention: Matrix<T>,
    /// 1×d bag embedding.
    pub bag_embedding: Matrix<T>,
    /// Incidence matrix used for this pass.
    pub incidence: IncidenceMatrix<T>,
}

impl<T: Scalar> Prediction<T> {
    pub fn predicted_class(&self) -> usize {
        self.probs.row_argmax(0)
    }
}

struct Graph {
    params: [Var; 5],
    incidence: Var,
    attention_row: Var,
    h: Var,
    class_logits: Var,
    probs: Var,
}

fn build_graph<T: Scalar>(
    tape: &mut Tape<T>,
    x: &Matrix<T>,
    params: &ModelParams<T>,
    cfg: &ModelConfig,
    noise: Noise<'_, T>,
    training: bool,
) -> Result<Graph> {
    cfg.validate()?;
    if x.rows() == 0 {
        return Err(Error::EmptyBag);
    }
    if x.cols() != cfg.d {
        return Err(Error::config(format!(
            "bag feature dimension {} does not match model d={}",
            x.cols(),
            cfg.d
        )));
    }
    let slope = T::from(cfg.leaky_slope).unwrap();
    let vars = params.tensors().map(|p| tape.param(p.value.clone()));
    let [w1, v, u, w, w_cls] = vars;
    let xv = tape.constant(x.clone());

    let logits = dhcm::build_logits_on(tape, xv, w1)?;
    let inc = dhcm::sample_assignment_on(tape, logits, &cfg.dhcm, noise, training)?;

    let inc_t = tape.transpose(inc);
    let pooled = tape.matmul(inc_t, xv)?;
    let e = tape.leaky_relu(pooled, slope)?;
    let spread = tape.matmul(inc, e)?;
    let x_upd = tape.leaky_relu(spread, slope)?;
    let z = tape.mean_pair(xv, x_upd)?;

    let v_t = tape.transpose(v);
    let u_t = tape.transpose(u);
    let zv = tape.matmul(z, v_t)?;
    let zu = tape.matmul(z, u_t)?;
    let t_branch = tape.tanh(zv);
    let s_branch = tape.sigmoid(zu);
    let gate = tape.mul(t_branch, s_branch)?;
    let w_t = tape.transpose(w);
    let scores = tape.matmul(gate, w_t)?;
    let scores_row = tape.transpose(scores);
    let attention_row = tape.row_softmax(scores_row);
    let h = tape.matmul(attention_row, z)?;

    let class_logits = tape.matmul(h, w_cls)?;
    let probs = tape.row_softmax(class_logits);
    Ok(Graph {
        params: vars,
        incidence: inc,
        attention_row,
        h,
        class_logits,
        probs,
    })
}

fn prediction_from<T: Scalar>(tape: &Tape<T>, g: &Graph, cfg: &ModelConfig) -> Prediction<T> {
    let form = if cfg.dhcm.variant == Variant::NoSampling {
        IncidenceForm::Logits
    } else {
        IncidenceForm::Assignment
    };
    Prediction {
        probs: tape.value(g.probs).clone(),
        attention: tape.value(g.attention_row).transpose(),
        bag_embedding: tape.value(g.h).clone(),
        incidence: IncidenceMatrix {
            values: tape.value(g.incidence).clone(),
            form,
        },
    }
}

/// Forward pass for one bag.
pub fn forward<T: Scalar>(
    x: &Matrix<T>,
    params: &ModelParams<T>,
    cfg: &ModelConfig,
    noise: Noise<'_, T>,
    training: bool,
) -> Result<Prediction<T>> {
    let mut tape = Tape::new();
    let g = build_graph(&mut tape, x, params, cfg, noise, training)?;
    Ok(prediction_from(&tape, &g, cfg))
}

/// Training-mode forward and backward for one bag. Returns the loss and the
/// prediction and writes the gradients into `params.*.grad`.
pub fn loss_and_grad<T: Scalar>(
    x: &Matrix<T>,
    label: usize,
    params: &mut ModelParams<T>,
    cfg: &ModelConfig,
    noise: Noise<'_, T>,
) -> Result<(T, Prediction<T>)> {
    let mut tape = Tape::new();
    let g = build_graph(&mut tape, x, params, cfg, noise, true)?;
    let loss = tape.softmax_cross_entropy(g.class_logits, label)?;
    let mut grads = tape.backward(loss);
    for (p, var) in params.tensors_mut().into_iter().zip(g.params) {
        p.grad = grads
            .take(var)
            .unwrap_or_else(|| Matrix::zeros(p.value.rows(), p.value.cols()));
    }
    let loss_value = tape.value(loss)[(0, 0)];
    Ok((loss_value, prediction_from(&tape, &g, cfg)))
}

/// Training-mode loss only (no gradients).
pub fn loss<T: Scalar>(
    x: &Matrix<T>,
    label: usize,
    params: &ModelParams<T>,
    cfg: &ModelConfig,
    noise: Noise<'_, T>,
) -> Result<T> {
    let mut tape = Tape::new();
    let g = build_graph(&mut tape, x, params, cfg, noise, true)?;
    let loss = tape.softmax_cross_entropy(g.class_logits, label)?;
    Ok(tape.value(loss)[(0, 0)])
}
