//! Single-use reverse-mode differentiation tape.
//!
//! The tape records exactly the primitives the adapter training graph needs
//! — affine pieces (mat-vec, add, scale), softmax, dot products, weighted
//! sums, squared error, and mean — over f64 vector values. Scalars are
//! length-1 vectors. A tape lives for one training step: record the forward
//! pass, call [`Tape::backward`] once (it consumes the tape), apply the
//! returned gradients, drop everything.
//!
//! Node inputs always refer to earlier nodes, so a single reverse sweep
//! visits every node exactly once. Trainable leaves that never reach the
//! loss keep their exact-zero gradients.

use super::{Matrix, NumError, Vector};

/// Handle to a vector-valued node on the tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

/// Handle to a matrix leaf on the tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatId(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    /// `m · v`
    MatVec { m: MatId, v: NodeId },
    /// `a + b` elementwise
    Add { a: NodeId, b: NodeId },
    /// `k · a`
    Scale { a: NodeId, k: f64 },
    /// stable softmax of `a`
    Softmax { a: NodeId },
    /// `⟨a, b⟩` → scalar
    Dot { a: NodeId, b: NodeId },
    /// `⟨a, w⟩` with constant weights → scalar
    WeightedSum { a: NodeId, w: Vec<f64> },
    /// `(a₀ - target)²` → scalar
    SquaredError { a: NodeId, target: f64 },
    /// mean of scalar nodes → scalar
    Mean { xs: Vec<NodeId> },
}

#[derive(Debug)]
struct Node {
    value: Vec<f64>,
    op: Op,
    trainable: bool,
}

#[derive(Debug)]
struct MatEntry {
    value: Matrix,
    trainable: bool,
}

/// Recording tape. See the module docs for the usage contract.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    mats: Vec<MatEntry>,
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    fn push(&mut self, value: Vec<f64>, op: Op, trainable: bool) -> NodeId {
        self.nodes.push(Node { value, op, trainable });
        NodeId(self.nodes.len() - 1)
    }

    /// Frozen vector leaf.
    pub fn constant(&mut self, v: &[f64]) -> NodeId {
        self.push(v.to_vec(), Op::Leaf, false)
    }

    /// Trainable vector leaf; its gradient is retrievable after `backward`.
    pub fn param(&mut self, v: &[f64]) -> NodeId {
        self.push(v.to_vec(), Op::Leaf, true)
    }

    /// Frozen scalar leaf.
    pub fn constant_scalar(&mut self, x: f64) -> NodeId {
        self.constant(&[x])
    }

    /// Trainable scalar leaf.
    pub fn param_scalar(&mut self, x: f64) -> NodeId {
        self.param(&[x])
    }

    /// Frozen matrix leaf; no gradient is accumulated for it.
    pub fn constant_matrix(&mut self, m: &Matrix) -> MatId {
        self.mats.push(MatEntry { value: m.clone(), trainable: false });
        MatId(self.mats.len() - 1)
    }

    /// Trainable matrix leaf.
    pub fn param_matrix(&mut self, m: &Matrix) -> MatId {
        self.mats.push(MatEntry { value: m.clone(), trainable: true });
        MatId(self.mats.len() - 1)
    }

    /// Forward value of a node.
    pub fn value(&self, id: NodeId) -> &[f64] {
        &self.nodes[id.0].value
    }

    /// `m · v`.
    pub fn matvec(&mut self, m: MatId, v: NodeId) -> Result<NodeId, NumError> {
        let out = self.mats[m.0]
            .value
            .matvec(&Vector::new(self.nodes[v.0].value.clone()))?;
        Ok(self.push(out.into_vec(), Op::MatVec { m, v }, false))
    }

    /// `a + b`; lengths must match.
    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NumError> {
        let (va, vb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        if va.len() != vb.len() {
            return Err(NumError::Shape {
                op: "tape::add",
                detail: format!("lhs len {} vs rhs len {}", va.len(), vb.len()),
            });
        }
        let out: Vec<f64> = va.iter().zip(vb).map(|(x, y)| x + y).collect();
        Ok(self.push(out, Op::Add { a, b }, false))
    }

    /// `k · a`.
    pub fn scale(&mut self, a: NodeId, k: f64) -> NodeId {
        let out: Vec<f64> = self.nodes[a.0].value.iter().map(|x| k * x).collect();
        self.push(out, Op::Scale { a, k }, false)
    }

    /// Stable softmax of `a`.
    pub fn softmax(&mut self, a: NodeId) -> Result<NodeId, NumError> {
        let out = super::softmax(&self.nodes[a.0].value)?;
        Ok(self.push(out, Op::Softmax { a }, false))
    }

    /// `⟨a, b⟩` as a scalar node; lengths must match.
    pub fn dot(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NumError> {
        let (va, vb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        if va.len() != vb.len() {
            return Err(NumError::Shape {
                op: "tape::dot",
                detail: format!("lhs len {} vs rhs len {}", va.len(), vb.len()),
            });
        }
        let out: f64 = va.iter().zip(vb).map(|(x, y)| x * y).sum();
        Ok(self.push(vec![out], Op::Dot { a, b }, false))
    }

    /// `⟨a, w⟩` with constant weights, as a scalar node.
    pub fn weighted_sum(&mut self, a: NodeId, w: &[f64]) -> Result<NodeId, NumError> {
        let va = &self.nodes[a.0].value;
        if va.len() != w.len() {
            return Err(NumError::Shape {
                op: "tape::weighted_sum",
                detail: format!("value len {} vs weight len {}", va.len(), w.len()),
            });
        }
        let out: f64 = va.iter().zip(w).map(|(x, y)| x * y).sum();
        Ok(self.push(vec![out], Op::WeightedSum { a, w: w.to_vec() }, false))
    }

    /// `(a₀ - target)²`; `a` must be scalar.
    pub fn squared_error(&mut self, a: NodeId, target: f64) -> Result<NodeId, NumError> {
        let va = &self.nodes[a.0].value;
        if va.len() != 1 {
            return Err(NumError::Contract {
                op: "tape::squared_error",
                detail: format!("expected scalar node, got len {}", va.len()),
            });
        }
        let d = va[0] - target;
        Ok(self.push(vec![d * d], Op::SquaredError { a, target }, false))
    }

    /// Mean of scalar nodes; the list must be non-empty.
    pub fn mean(&mut self, xs: &[NodeId]) -> Result<NodeId, NumError> {
        if xs.is_empty() {
            return Err(NumError::Contract {
                op: "tape::mean",
                detail: "empty input list".to_string(),
            });
        }
        let mut acc = 0.0;
        for &x in xs {
            let v = &self.nodes[x.0].value;
            if v.len() != 1 {
                return Err(NumError::Contract {
                    op: "tape::mean",
                    detail: format!("expected scalar node, got len {}", v.len()),
                });
            }
            acc += v[0];
        }
        let n = xs.len() as f64;
        Ok(self.push(vec![acc / n], Op::Mean { xs: xs.to_vec() }, false))
    }

    /// Reverse sweep from `loss` (which must be scalar). Consumes the tape —
    /// a tape is good for exactly one step. Trainable leaves off the loss
    /// path come back with exact-zero gradients.
    pub fn backward(self, loss: NodeId) -> Result<Gradients, NumError> {
        if self.nodes[loss.0].value.len() != 1 {
            return Err(NumError::Contract {
                op: "tape::backward",
                detail: format!(
                    "loss node must be scalar, got len {}",
                    self.nodes[loss.0].value.len()
                ),
            });
        }
        let mut vec_grads: Vec<Vec<f64>> =
            self.nodes.iter().map(|n| vec![0.0; n.value.len()]).collect();
        let mut mat_grads: Vec<Option<Matrix>> = self
            .mats
            .iter()
            .map(|m| {
                m.trainable
                    .then(|| Matrix::zeros(m.value.rows(), m.value.cols()))
            })
            .collect();
        vec_grads[loss.0][0] = 1.0;

        // Inputs of a node always precede it, so one reverse pass suffices;
        // by the time node i is visited every consumer has contributed.
        for i in (0..self.nodes.len()).rev() {
            let g = std::mem::take(&mut vec_grads[i]);
            if g.iter().all(|&x| x == 0.0) {
                vec_grads[i] = g;
                continue;
            }
            match &self.nodes[i].op {
                Op::Leaf => {}
                Op::MatVec { m, v } => {
                    let gv = Vector::new(g.clone());
                    let vin = Vector::new(self.nodes[v.0].value.clone());
                    if let Some(gm) = &mut mat_grads[m.0] {
                        gm.add_outer(&gv, &vin, 1.0)?;
                    }
                    let gdown = self.mats[m.0].value.matvec_transpose(&gv)?;
                    accumulate(&mut vec_grads[v.0], gdown.as_slice());
                }
                Op::Add { a, b } => {
                    accumulate(&mut vec_grads[a.0], &g);
                    accumulate(&mut vec_grads[b.0], &g);
                }
                Op::Scale { a, k } => {
                    let scaled: Vec<f64> = g.iter().map(|x| k * x).collect();
                    accumulate(&mut vec_grads[a.0], &scaled);
                }
                Op::Softmax { a } => {
                    // y = softmax(x): dx = y ⊙ (g - ⟨g, y⟩)
                    let y = &self.nodes[i].value;
                    let gy: f64 = g.iter().zip(y).map(|(gi, yi)| gi * yi).sum();
                    let down: Vec<f64> =
                        y.iter().zip(&g).map(|(yi, gi)| yi * (gi - gy)).collect();
                    accumulate(&mut vec_grads[a.0], &down);
                }
                Op::Dot { a, b } => {
                    let g0 = g[0];
                    let (va, vb) =
                        (self.nodes[a.0].value.clone(), self.nodes[b.0].value.clone());
                    let da: Vec<f64> = vb.iter().map(|x| g0 * x).collect();
                    let db: Vec<f64> = va.iter().map(|x| g0 * x).collect();
                    accumulate(&mut vec_grads[a.0], &da);
                    accumulate(&mut vec_grads[b.0], &db);
                }
                Op::WeightedSum { a, w } => {
                    let g0 = g[0];
                    let da: Vec<f64> = w.iter().map(|x| g0 * x).collect();
                    accumulate(&mut vec_grads[a.0], &da);
                }
                Op::SquaredError { a, target } => {
                    let d = self.nodes[a.0].value[0] - target;
                    vec_grads[a.0][0] += 2.0 * d * g[0];
                }
                Op::Mean { xs } => {
                    let share = g[0] / xs.len() as f64;
                    for &x in xs {
                        vec_grads[x.0][0] += share;
                    }
                }
            }
            vec_grads[i] = g;
        }

        let trainable_vec: Vec<bool> = self.nodes.iter().map(|n| n.trainable).collect();
        Ok(Gradients { vec_grads, mat_grads, trainable_vec })
    }
}

fn accumulate(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

/// Gradients produced by [`Tape::backward`], keyed by the original handles.
#[derive(Debug)]
pub struct Gradients {
    vec_grads: Vec<Vec<f64>>,
    mat_grads: Vec<Option<Matrix>>,
    trainable_vec: Vec<bool>,
}

impl Gradients {
    /// Gradient of the loss w.r.t. a trainable vector leaf.
    pub fn wrt(&self, id: NodeId) -> Result<&[f64], NumError> {
        if !self.trainable_vec[id.0] {
            return Err(NumError::Contract {
                op: "Gradients::wrt",
                detail: "node is not a trainable leaf".to_string(),
            });
        }
        Ok(&self.vec_grads[id.0])
    }

    /// Gradient of the loss w.r.t. a trainable matrix leaf.
    pub fn wrt_mat(&self, id: MatId) -> Result<&Matrix, NumError> {
        self.mat_grads[id.0].as_ref().ok_or(NumError::Contract {
            op: "Gradients::wrt_mat",
            detail: "matrix is not a trainable leaf".to_string(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Central finite difference of a scalar function of one coordinate.
    fn central_diff(mut f: impl FnMut(f64) -> f64, x: f64, h: f64) -> f64 {
        (f(x + h) - f(x - h)) / (2.0 * h)
    }

    #[test]
    fn square_gradient_is_two_x() {
        let mut t = Tape::new();
        let x = t.param_scalar(3.0);
        let loss = t.squared_error(x, 0.0).unwrap();
        assert_eq!(t.value(loss), &[9.0]);
        let g = t.backward(loss).unwrap();
        assert_eq!(g.wrt(x).unwrap(), &[6.0]); // d(x²)/dx = 2x = 6
    }

    #[test]
    fn backward_rejects_non_scalar_loss() {
        let mut t = Tape::new();
        let x = t.param(&[1.0, 2.0]);
        assert!(matches!(t.backward(x), Err(NumError::Contract { .. })));
    }

    #[test]
    fn off_path_parameters_get_exact_zero() {
        let mut t = Tape::new();
        let x = t.param_scalar(2.0);
        let unused = t.param(&[5.0, 5.0]);
        let unused_mat = t.param_matrix(&Matrix::zeros(2, 2));
        let loss = t.squared_error(x, 1.0).unwrap();
        let g = t.backward(loss).unwrap();
        assert_eq!(g.wrt(unused).unwrap(), &[0.0, 0.0]);
        assert!(g.wrt_mat(unused_mat).unwrap().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn frozen_matrix_has_no_gradient_slot() {
        let mut t = Tape::new();
        let m = t.constant_matrix(&Matrix::identity(2));
        let v = t.param(&[1.0, 2.0]);
        let mv = t.matvec(m, v).unwrap();
        let s = t.weighted_sum(mv, &[1.0, 1.0]).unwrap();
        let loss = t.squared_error(s, 0.0).unwrap();
        let g = t.backward(loss).unwrap();
        assert!(matches!(g.wrt_mat(m), Err(NumError::Contract { .. })));
        // loss = (v0+v1)², d/dv_i = 2(v0+v1) = 6
        assert_eq!(g.wrt(v).unwrap(), &[6.0, 6.0]);
    }

    #[test]
    fn softmax_weighted_sum_gradient_matches_finite_differences() {
        // Scalar expectation through a softmax — the shape of the decoding
        // path — checked coordinate-by-coordinate against central
        // differences.
        let logits = [0.3, -1.2, 2.0, 0.7, -0.4];
        let weights = [1.0, 2.0, 3.0, 4.0, 5.0];
        let eval = |ls: &[f64]| {
            let mut t = Tape::new();
            let x = t.param(ls);
            let p = t.softmax(x).unwrap();
            let e = t.weighted_sum(p, &weights).unwrap();
            let loss = t.squared_error(e, 4.2).unwrap();
            t.value(loss)[0]
        };
        let mut t = Tape::new();
        let x = t.param(&logits);
        let p = t.softmax(x).unwrap();
        let e = t.weighted_sum(p, &weights).unwrap();
        let loss = t.squared_error(e, 4.2).unwrap();
        let g = t.backward(loss).unwrap();
        let gx = g.wrt(x).unwrap().to_vec();

        for i in 0..logits.len() {
            let fd = central_diff(
                |xi| {
                    let mut ls = logits;
                    ls[i] = xi;
                    eval(&ls)
                },
                logits[i],
                1e-5,
            );
            let err = (gx[i] - fd).abs() / gx[i].abs().max(fd.abs()).max(1e-6);
            assert!(err < 1e-6, "coord {i}: tape {} vs fd {}", gx[i], fd);
        }
    }

    #[test]
    fn five_parameter_graph_matches_finite_differences() {
        // Five scalar parameters spread over two leaves, pushed through
        // every primitive the tape supports.
        let p3 = [0.5, -0.3, 1.1];
        let p2 = [2.0, -1.0];
        let m = Matrix::new(2, 3, vec![0.2, -0.5, 1.0, 0.7, 0.1, -0.3]).unwrap();

        let eval = |a: &[f64], b: &[f64]| {
            let mut t = Tape::new();
            let pa = t.param(a);
            let pb = t.param(b);
            let mc = t.constant_matrix(&m);
            let mv = t.matvec(mc, pa).unwrap(); // len 2
            let sum = t.add(mv, pb).unwrap();
            let sm = t.softmax(sum).unwrap();
            let ws = t.weighted_sum(sm, &[1.0, 2.0]).unwrap();
            let d = t.dot(pb, pb).unwrap();
            let dn = t.scale(d, 0.25);
            let e1 = t.squared_error(ws, 1.5).unwrap();
            let e2 = t.squared_error(dn, 1.0).unwrap();
            let loss = t.mean(&[e1, e2]).unwrap();
            (t, pa, pb, loss)
        };

        let (t, pa, pb, loss) = eval(&p3, &p2);
        let g = t.backward(loss).unwrap();
        let ga = g.wrt(pa).unwrap().to_vec();
        let gb = g.wrt(pb).unwrap().to_vec();

        let f = |a: &[f64], b: &[f64]| {
            let (t, _, _, loss) = eval(a, b);
            t.value(loss)[0]
        };
        for i in 0..3 {
            let fd = central_diff(
                |x| {
                    let mut a = p3;
                    a[i] = x;
                    f(&a, &p2)
                },
                p3[i],
                1e-5,
            );
            let err = (ga[i] - fd).abs() / ga[i].abs().max(fd.abs()).max(1e-6);
            assert!(err < 1e-6, "pa[{i}]: tape {} vs fd {}", ga[i], fd);
        }
        for i in 0..2 {
            let fd = central_diff(
                |x| {
                    let mut b = p2;
                    b[i] = x;
                    f(&p3, &b)
                },
                p2[i],
                1e-5,
            );
            let err = (gb[i] - fd).abs() / gb[i].abs().max(fd.abs()).max(1e-6);
            assert!(err < 1e-6, "pb[{i}]: tape {} vs fd {}", gb[i], fd);
        }
    }

    #[test]
    fn matrix_parameter_gradient_matches_finite_differences() {
        let a = Matrix::new(2, 2, vec![0.3, -0.7, 0.9, 0.1]).unwrap();
        let z = [1.5, -0.5];
        let f = |m: &Matrix| {
            let mut t = Tape::new();
            let mp = t.param_matrix(m);
            let zc = t.constant(&z);
            let mv = t.matvec(mp, zc).unwrap();
            let s = t.weighted_sum(mv, &[1.0, -1.0]).unwrap();
            let loss = t.squared_error(s, 0.3).unwrap();
            (t, mp, loss)
        };
        let (t, mp, loss) = f(&a);
        let g = t.backward(loss).unwrap();
        let gm = g.wrt_mat(mp).unwrap().clone();

        for i in 0..2 {
            for j in 0..2 {
                let fd = central_diff(
                    |x| {
                        let mut m = a.clone();
                        m.set(i, j, x);
                        let (t, _, loss) = f(&m);
                        t.value(loss)[0]
                    },
                    a.get(i, j),
                    1e-5,
                );
                let got = gm.get(i, j);
                let err = (got - fd).abs() / got.abs().max(fd.abs()).max(1e-6);
                assert!(err < 1e-6, "m[{i}][{j}]: tape {got} vs fd {fd}");
            }
        }
    }

    #[test]
    fn repeated_node_in_mean_accumulates_both_shares() {
        let mut t = Tape::new();
        let x = t.param_scalar(2.0);
        let e = t.squared_error(x, 0.0).unwrap();
        let loss = t.mean(&[e, e]).unwrap();
        assert_eq!(t.value(loss), &[4.0]);
        let g = t.backward(loss).unwrap();
        // mean(e, e) = e, so d/dx = 2x = 4
        assert_eq!(g.wrt(x).unwrap(), &[4.0]);
    }
}
