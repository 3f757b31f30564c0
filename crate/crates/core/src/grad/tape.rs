//! Define-by-run tape over vector-valued nodes.

use std::sync::Arc;

use super::{GradBuffer, GradError, ParamId, ParamStore};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

/// Primitive operations that can be recorded. Inputs are earlier nodes.
#[derive(Clone, Debug)]
pub enum Primitive {
    /// A view of `len` entries of a parameter block starting at `offset`.
    Param { block: ParamId, offset: usize, len: usize },
    Const(Vec<f64>),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, f64),
    /// Vector times a length-1 node.
    ScaleBy(NodeId, NodeId),
    /// Vector plus a length-1 node broadcast to every entry.
    AddScalar(NodeId, NodeId),
    Tanh(NodeId),
    Exp(NodeId),
    Log(NodeId),
    Powf(NodeId, f64),
    Sum(NodeId),
    SumSq(NodeId),
    Slice { src: NodeId, start: usize, len: usize },
    /// `y[r] = Σ_{k < prefix[r]} w[r·cols + k] · x[k]`
    PrefixLinear { w: NodeId, x: NodeId, cols: usize, prefix: Arc<[usize]> },
    /// Row vector times a row-major matrix: `y[c] = Σ_r v[r] · m[r·cols + c]`.
    VecMat { v: NodeId, m: NodeId, cols: usize },
    LogAddExp(NodeId, NodeId),
    Atan2 { y: NodeId, x: NodeId },
}

impl Primitive {
    fn name(&self) -> &'static str {
        match self {
            Primitive::Param { .. } => "param",
            Primitive::Const(_) => "const",
            Primitive::Add(..) => "add",
            Primitive::Sub(..) => "sub",
            Primitive::Mul(..) => "mul",
            Primitive::Scale(..) => "scale",
            Primitive::ScaleBy(..) => "scale_by",
            Primitive::AddScalar(..) => "add_scalar",
            Primitive::Tanh(_) => "tanh",
            Primitive::Exp(_) => "exp",
            Primitive::Log(_) => "log",
            Primitive::Powf(..) => "powf",
            Primitive::Sum(_) => "sum",
            Primitive::SumSq(_) => "sum_sq",
            Primitive::Slice { .. } => "slice",
            Primitive::PrefixLinear { .. } => "prefix_linear",
            Primitive::VecMat { .. } => "vec_mat",
            Primitive::LogAddExp(..) => "log_add_exp",
            Primitive::Atan2 { .. } => "atan2",
        }
    }
}

struct Node {
    prim: Primitive,
    len: usize,
    // Empty for parameter views, which read straight from the store.
    value: Vec<f64>,
}

/// Records primitives against a borrowed [`ParamStore`] and backpropagates
/// into a [`GradBuffer`].
pub struct Tape<'a> {
    store: &'a ParamStore,
    nodes: Vec<Node>,
    fault: Option<GradError>,
    consumed: bool,
}

impl<'a> Tape<'a> {
    pub fn new(store: &'a ParamStore) -> Self {
        Self { store, nodes: Vec::new(), fault: None, consumed: false }
    }

    pub fn store(&self) -> &'a ParamStore {
        self.store
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// First failure seen while recording, if any.
    pub fn fault(&self) -> Option<&GradError> {
        self.fault.as_ref()
    }

    /// Re-arms the tape for another backward pass over the same graph.
    pub fn reset(&mut self) {
        self.consumed = false;
    }

    /// Drops every node so the tape can record a new configuration.
    pub fn clear(&mut self) {
        self.nodes.clear();
        self.fault = None;
        self.consumed = false;
    }

    pub fn value(&self, id: NodeId) -> &[f64] {
        let node = &self.nodes[id.0];
        match node.prim {
            Primitive::Param { block, offset, len } => &self.store.values(block)[offset..offset + len],
            _ => &node.value,
        }
    }

    pub fn scalar(&self, id: NodeId) -> f64 {
        self.value(id)[0]
    }

    /// Evaluates `prim` forward and appends it.
    pub fn record(&mut self, prim: Primitive) -> Result<NodeId, GradError> {
        let id = self.push(prim);
        match &self.fault {
            Some(GradError::NonFinite { node, .. }) if *node == id.0 => Err(self.fault.clone().unwrap()),
            _ => Ok(id),
        }
    }

    pub(crate) fn push(&mut self, prim: Primitive) -> NodeId {
        let value = match self.forward(&prim) {
            Ok(v) => v,
            Err(e) => {
                self.fault.get_or_insert(e);
                vec![f64::NAN]
            }
        };
        let len = match &prim {
            Primitive::Param { len, .. } => *len,
            _ => value.len(),
        };
        if self.fault.is_none() && !value.iter().all(|v| v.is_finite()) {
            self.fault = Some(GradError::NonFinite { op: prim.name(), node: self.nodes.len() });
        }
        self.nodes.push(Node { prim, len, value });
        NodeId(self.nodes.len() - 1)
    }

    fn forward(&self, prim: &Primitive) -> Result<Vec<f64>, GradError> {
        use super::kernels as k;
        let v = |id: &NodeId| self.value(*id);
        let check_same = |a: &NodeId, b: &NodeId| -> Result<(), GradError> {
            let (la, lb) = (self.nodes[a.0].len, self.nodes[b.0].len);
            if la == lb {
                Ok(())
            } else {
                Err(GradError::Shape { expected: la, got: lb })
            }
        };
        let check_scalar = |s: &NodeId| -> Result<(), GradError> {
            if self.nodes[s.0].len == 1 {
                Ok(())
            } else {
                Err(GradError::NotScalar)
            }
        };
        Ok(match prim {
            Primitive::Param { block, offset, len } => {
                if offset + len > self.store.values(*block).len() {
                    return Err(GradError::Shape { expected: self.store.values(*block).len(), got: offset + len });
                }
                Vec::new()
            }
            Primitive::Const(c) => c.clone(),
            Primitive::Add(a, b) => {
                check_same(a, b)?;
                k::add(v(a), v(b))
            }
            Primitive::Sub(a, b) => {
                check_same(a, b)?;
                k::sub(v(a), v(b))
            }
            Primitive::Mul(a, b) => {
                check_same(a, b)?;
                k::mul(v(a), v(b))
            }
            Primitive::Scale(a, c) => k::scale(v(a), *c),
            Primitive::ScaleBy(a, s) => {
                check_scalar(s)?;
                k::scale(v(a), v(s)[0])
            }
            Primitive::AddScalar(a, s) => {
                check_scalar(s)?;
                k::add_scalar(v(a), v(s)[0])
            }
            Primitive::Tanh(a) => v(a).iter().map(|x| x.tanh()).collect(),
            Primitive::Exp(a) => v(a).iter().map(|x| x.exp()).collect(),
            Primitive::Log(a) => v(a).iter().map(|x| x.ln()).collect(),
            Primitive::Powf(a, p) => v(a).iter().map(|x| x.powf(*p)).collect(),
            Primitive::Sum(a) => vec![v(a).iter().sum()],
            Primitive::SumSq(a) => vec![k::sum_sq(v(a))],
            Primitive::Slice { src, start, len } => {
                let s = v(src);
                if start + len > s.len() {
                    return Err(GradError::Shape { expected: s.len(), got: start + len });
                }
                s[*start..start + len].to_vec()
            }
            Primitive::PrefixLinear { w, x, cols, prefix } => {
                let (wv, xv) = (v(w), v(x));
                if wv.len() != prefix.len() * cols || xv.len() != *cols {
                    return Err(GradError::Shape { expected: prefix.len() * cols, got: wv.len() });
                }
                k::prefix_linear(wv, xv, *cols, prefix)
            }
            Primitive::VecMat { v: vv, m, cols } => {
                let (a, b) = (v(vv), v(m));
                if a.len() * cols != b.len() {
                    return Err(GradError::Shape { expected: a.len() * cols, got: b.len() });
                }
                k::vec_mat(a, b, *cols)
            }
            Primitive::LogAddExp(a, b) => {
                check_scalar(a)?;
                check_scalar(b)?;
                vec![k::log_add_exp(v(a)[0], v(b)[0])]
            }
            Primitive::Atan2 { y, x } => {
                check_scalar(y)?;
                check_scalar(x)?;
                vec![v(y)[0].atan2(v(x)[0])]
            }
        })
    }

    /// Reverse pass: `grads[p] += seed · ∂loss/∂p` for every parameter entry.
    pub fn backward(&mut self, loss: NodeId, seed: f64, grads: &mut GradBuffer) -> Result<(), GradError> {
        if let Some(f) = &self.fault {
            return Err(f.clone());
        }
        if self.consumed {
            return Err(GradError::AlreadyBackpropagated);
        }
        if self.nodes[loss.0].len != 1 {
            return Err(GradError::NotScalar);
        }
        self.consumed = true;

        let mut adj: Vec<Vec<f64>> = vec![Vec::new(); loss.0 + 1];
        adj[loss.0] = vec![seed];

        for i in (0..=loss.0).rev() {
            if adj[i].is_empty() {
                continue;
            }
            let g = std::mem::take(&mut adj[i]);
            let node = &self.nodes[i];
            match &node.prim {
                Primitive::Param { block, offset, len } => {
                    let dst = &mut grads.block_mut(*block)[*offset..offset + len];
                    for (d, s) in dst.iter_mut().zip(&g) {
                        *d += s;
                    }
                }
                Primitive::Const(_) => {}
                Primitive::Add(a, b) => {
                    accumulate(&mut adj, *a, &g, self);
                    accumulate(&mut adj, *b, &g, self);
                }
                Primitive::Sub(a, b) => {
                    accumulate(&mut adj, *a, &g, self);
                    let neg: Vec<f64> = g.iter().map(|x| -x).collect();
                    accumulate(&mut adj, *b, &neg, self);
                }
                Primitive::Mul(a, b) => {
                    let ga: Vec<f64> = g.iter().zip(self.value(*b)).map(|(g, y)| g * y).collect();
                    let gb: Vec<f64> = g.iter().zip(self.value(*a)).map(|(g, x)| g * x).collect();
                    accumulate(&mut adj, *a, &ga, self);
                    accumulate(&mut adj, *b, &gb, self);
                }
                Primitive::Scale(a, c) => {
                    let ga: Vec<f64> = g.iter().map(|x| x * c).collect();
                    accumulate(&mut adj, *a, &ga, self);
                }
                Primitive::ScaleBy(a, s) => {
                    let sv = self.value(*s)[0];
                    let ga: Vec<f64> = g.iter().map(|x| x * sv).collect();
                    let gs: f64 = g.iter().zip(self.value(*a)).map(|(g, x)| g * x).sum();
                    accumulate(&mut adj, *a, &ga, self);
                    accumulate(&mut adj, *s, &[gs], self);
                }
                Primitive::AddScalar(a, s) => {
                    let gs: f64 = g.iter().sum();
                    accumulate(&mut adj, *a, &g, self);
                    accumulate(&mut adj, *s, &[gs], self);
                }
                Primitive::Tanh(a) => {
                    let ga: Vec<f64> = g.iter().zip(&node.value).map(|(g, y)| g * (1.0 - y * y)).collect();
                    accumulate(&mut adj, *a, &ga, self);
                }
                Primitive::Exp(a) => {
                    let ga: Vec<f64> = g.iter().zip(&node.value).map(|(g, y)| g * y).collect();
                    accumulate(&mut adj, *a, &ga, self);
                }
                Primitive::Log(a) => {
                    let ga: Vec<f64> = g.iter().zip(self.value(*a)).map(|(g, x)| g / x).collect();
                    accumulate(&mut adj, *a, &ga, self);
                }
                Primitive::Powf(a, p) => {
                    let ga: Vec<f64> =
                        g.iter().zip(self.value(*a)).map(|(g, x)| g * p * x.powf(p - 1.0)).collect();
                    accumulate(&mut adj, *a, &ga, self);
                }
                Primitive::Sum(a) => {
                    let ga = vec![g[0]; self.nodes[a.0].len];
                    accumulate(&mut adj, *a, &ga, self);
                }
                Primitive::SumSq(a) => {
                    let ga: Vec<f64> = self.value(*a).iter().map(|x| 2.0 * x * g[0]).collect();
                    accumulate(&mut adj, *a, &ga, self);
                }
                Primitive::Slice { src, start, len } => {
                    let slot = &mut adj[src.0];
                    if slot.is_empty() {
                        *slot = vec![0.0; self.nodes[src.0].len];
                    }
                    for (d, s) in slot[*start..start + len].iter_mut().zip(&g) {
                        *d += s;
                    }
                }
                Primitive::PrefixLinear { w, x, cols, prefix } => {
                    let (wv, xv) = (self.value(*w), self.value(*x));
                    let mut gw = vec![0.0; wv.len()];
                    let mut gx = vec![0.0; xv.len()];
                    for (r, (&gr, &p)) in g.iter().zip(prefix.iter()).enumerate() {
                        if gr == 0.0 {
                            continue;
                        }
                        let row = &wv[r * cols..r * cols + p];
                        let grow = &mut gw[r * cols..r * cols + p];
                        for k in 0..p {
                            grow[k] += gr * xv[k];
                            gx[k] += gr * row[k];
                        }
                    }
                    accumulate(&mut adj, *w, &gw, self);
                    accumulate(&mut adj, *x, &gx, self);
                }
                Primitive::VecMat { v, m, cols } => {
                    let (vv, mv) = (self.value(*v), self.value(*m));
                    let rows = vv.len();
                    let mut gv = vec![0.0; rows];
                    let mut gm = vec![0.0; mv.len()];
                    for r in 0..rows {
                        let mrow = &mv[r * cols..(r + 1) * cols];
                        let gmrow = &mut gm[r * cols..(r + 1) * cols];
                        let mut s = 0.0;
                        for c in 0..*cols {
                            s += g[c] * mrow[c];
                            gmrow[c] += vv[r] * g[c];
                        }
                        gv[r] = s;
                    }
                    accumulate(&mut adj, *v, &gv, self);
                    accumulate(&mut adj, *m, &gm, self);
                }
                Primitive::LogAddExp(a, b) => {
                    let out = node.value[0];
                    let ga = g[0] * (self.value(*a)[0] - out).exp();
                    let gb = g[0] * (self.value(*b)[0] - out).exp();
                    accumulate(&mut adj, *a, &[ga], self);
                    accumulate(&mut adj, *b, &[gb], self);
                }
                Primitive::Atan2 { y, x } => {
                    let (yv, xv) = (self.value(*y)[0], self.value(*x)[0]);
                    let r2 = xv * xv + yv * yv;
                    let (gy, gx) = if r2 > 0.0 { (g[0] * xv / r2, -g[0] * yv / r2) } else { (0.0, 0.0) };
                    accumulate(&mut adj, *y, &[gy], self);
                    accumulate(&mut adj, *x, &[gx], self);
                }
            }
        }
        Ok(())
    }
}

fn accumulate(adj: &mut [Vec<f64>], target: NodeId, g: &[f64], tape: &Tape<'_>) {
    if matches!(tape.nodes[target.0].prim, Primitive::Const(_)) {
        return;
    }
    let slot = &mut adj[target.0];
    if slot.is_empty() {
        *slot = g.to_vec();
    } else {
        for (d, s) in slot.iter_mut().zip(g) {
            *d += s;
        }
    }
}
