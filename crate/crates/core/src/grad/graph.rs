//! A small op vocabulary that model code is written against once, then run
//! either on a [`Tape`] (for gradients) or on [`Eval`] (values only).

use std::borrow::Cow;
use std::sync::Arc;

use super::kernels as k;
use super::tape::{NodeId, Primitive, Tape};
use super::{GradError, ParamId, ParamStore};

pub trait Graph {
    type V: Clone;

    fn store(&self) -> &ParamStore;
    fn value<'s>(&'s self, v: &'s Self::V) -> &'s [f64];
    /// First recording failure; values after a fault are meaningless.
    fn fault(&self) -> Option<&GradError>;

    fn param(&mut self, block: ParamId, offset: usize, len: usize) -> Self::V;
    fn constant(&mut self, v: Vec<f64>) -> Self::V;
    fn add(&mut self, a: &Self::V, b: &Self::V) -> Self::V;
    fn sub(&mut self, a: &Self::V, b: &Self::V) -> Self::V;
    fn mul(&mut self, a: &Self::V, b: &Self::V) -> Self::V;
    fn scale(&mut self, a: &Self::V, c: f64) -> Self::V;
    fn scale_by(&mut self, a: &Self::V, s: &Self::V) -> Self::V;
    fn add_scalar(&mut self, a: &Self::V, s: &Self::V) -> Self::V;
    fn tanh(&mut self, a: &Self::V) -> Self::V;
    fn exp(&mut self, a: &Self::V) -> Self::V;
    fn log(&mut self, a: &Self::V) -> Self::V;
    fn powf(&mut self, a: &Self::V, p: f64) -> Self::V;
    fn sum(&mut self, a: &Self::V) -> Self::V;
    fn sum_sq(&mut self, a: &Self::V) -> Self::V;
    fn slice(&mut self, a: &Self::V, start: usize, len: usize) -> Self::V;
    fn prefix_linear(&mut self, w: &Self::V, x: &Self::V, cols: usize, prefix: &Arc<[usize]>) -> Self::V;
    fn vec_mat(&mut self, v: &Self::V, m: &Self::V, cols: usize) -> Self::V;
    fn log_add_exp(&mut self, a: &Self::V, b: &Self::V) -> Self::V;
    fn atan2(&mut self, y: &Self::V, x: &Self::V) -> Self::V;

    fn scalar(&self, v: &Self::V) -> f64 {
        self.value(v)[0]
    }
}

impl<'a> Graph for Tape<'a> {
    type V = NodeId;

    fn store(&self) -> &ParamStore {
        Tape::store(self)
    }
    fn value<'s>(&'s self, v: &'s NodeId) -> &'s [f64] {
        Tape::value(self, *v)
    }
    fn fault(&self) -> Option<&GradError> {
        Tape::fault(self)
    }
    fn param(&mut self, block: ParamId, offset: usize, len: usize) -> NodeId {
        self.push(Primitive::Param { block, offset, len })
    }
    fn constant(&mut self, v: Vec<f64>) -> NodeId {
        self.push(Primitive::Const(v))
    }
    fn add(&mut self, a: &NodeId, b: &NodeId) -> NodeId {
        self.push(Primitive::Add(*a, *b))
    }
    fn sub(&mut self, a: &NodeId, b: &NodeId) -> NodeId {
        self.push(Primitive::Sub(*a, *b))
    }
    fn mul(&mut self, a: &NodeId, b: &NodeId) -> NodeId {
        self.push(Primitive::Mul(*a, *b))
    }
    fn scale(&mut self, a: &NodeId, c: f64) -> NodeId {
        self.push(Primitive::Scale(*a, c))
    }
    fn scale_by(&mut self, a: &NodeId, s: &NodeId) -> NodeId {
        self.push(Primitive::ScaleBy(*a, *s))
    }
    fn add_scalar(&mut self, a: &NodeId, s: &NodeId) -> NodeId {
        self.push(Primitive::AddScalar(*a, *s))
    }
    fn tanh(&mut self, a: &NodeId) -> NodeId {
        self.push(Primitive::Tanh(*a))
    }
    fn exp(&mut self, a: &NodeId) -> NodeId {
        self.push(Primitive::Exp(*a))
    }
    fn log(&mut self, a: &NodeId) -> NodeId {
        self.push(Primitive::Log(*a))
    }
    fn powf(&mut self, a: &NodeId, p: f64) -> NodeId {
        self.push(Primitive::Powf(*a, p))
    }
    fn sum(&mut self, a: &NodeId) -> NodeId {
        self.push(Primitive::Sum(*a))
    }
    fn sum_sq(&mut self, a: &NodeId) -> NodeId {
        self.push(Primitive::SumSq(*a))
    }
    fn slice(&mut self, a: &NodeId, start: usize, len: usize) -> NodeId {
        self.push(Primitive::Slice { src: *a, start, len })
    }
    fn prefix_linear(&mut self, w: &NodeId, x: &NodeId, cols: usize, prefix: &Arc<[usize]>) -> NodeId {
        self.push(Primitive::PrefixLinear { w: *w, x: *x, cols, prefix: prefix.clone() })
    }
    fn vec_mat(&mut self, v: &NodeId, m: &NodeId, cols: usize) -> NodeId {
        self.push(Primitive::VecMat { v: *v, m: *m, cols })
    }
    fn log_add_exp(&mut self, a: &NodeId, b: &NodeId) -> NodeId {
        self.push(Primitive::LogAddExp(*a, *b))
    }
    fn atan2(&mut self, y: &NodeId, x: &NodeId) -> NodeId {
        self.push(Primitive::Atan2 { y: *y, x: *x })
    }
}

/// Tape-free forward evaluation. Parameter views borrow from the store.
pub struct Eval<'a> {
    store: &'a ParamStore,
    fault: Option<GradError>,
}

impl<'a> Eval<'a> {
    pub fn new(store: &'a ParamStore) -> Self {
        Self { store, fault: None }
    }

    fn fail(&mut self, e: GradError) -> Cow<'a, [f64]> {
        self.fault.get_or_insert(e);
        Cow::Owned(vec![f64::NAN])
    }

    fn same(&mut self, a: &[f64], b: &[f64]) -> bool {
        if a.len() == b.len() {
            true
        } else {
            self.fault.get_or_insert(GradError::Shape { expected: a.len(), got: b.len() });
            false
        }
    }

    fn owned(&mut self, op: &'static str, v: Vec<f64>) -> Cow<'a, [f64]> {
        if self.fault.is_none() && !v.iter().all(|x| x.is_finite()) {
            self.fault = Some(GradError::NonFinite { op, node: usize::MAX });
        }
        Cow::Owned(v)
    }
}

type CowV<'a> = Cow<'a, [f64]>;

impl<'a> Graph for Eval<'a> {
    type V = CowV<'a>;

    fn store(&self) -> &ParamStore {
        self.store
    }
    fn value<'s>(&'s self, v: &'s CowV<'a>) -> &'s [f64] {
        v
    }
    fn fault(&self) -> Option<&GradError> {
        self.fault.as_ref()
    }
    fn param(&mut self, block: ParamId, offset: usize, len: usize) -> CowV<'a> {
        let vals = self.store.values(block);
        if offset + len > vals.len() {
            return self.fail(GradError::Shape { expected: vals.len(), got: offset + len });
        }
        Cow::Borrowed(&vals[offset..offset + len])
    }
    fn constant(&mut self, v: Vec<f64>) -> CowV<'a> {
        self.owned("const", v)
    }
    fn add(&mut self, a: &CowV<'a>, b: &CowV<'a>) -> CowV<'a> {
        if !self.same(a, b) {
            return self.fail(GradError::NotScalar);
        }
        self.owned("add", k::add(a, b))
    }
    fn sub(&mut self, a: &CowV<'a>, b: &CowV<'a>) -> CowV<'a> {
        if !self.same(a, b) {
            return self.fail(GradError::NotScalar);
        }
        self.owned("sub", k::sub(a, b))
    }
    fn mul(&mut self, a: &CowV<'a>, b: &CowV<'a>) -> CowV<'a> {
        if !self.same(a, b) {
            return self.fail(GradError::NotScalar);
        }
        self.owned("mul", k::mul(a, b))
    }
    fn scale(&mut self, a: &CowV<'a>, c: f64) -> CowV<'a> {
        self.owned("scale", k::scale(a, c))
    }
    fn scale_by(&mut self, a: &CowV<'a>, s: &CowV<'a>) -> CowV<'a> {
        if s.len() != 1 {
            return self.fail(GradError::NotScalar);
        }
        self.owned("scale_by", k::scale(a, s[0]))
    }
    fn add_scalar(&mut self, a: &CowV<'a>, s: &CowV<'a>) -> CowV<'a> {
        if s.len() != 1 {
            return self.fail(GradError::NotScalar);
        }
        self.owned("add_scalar", k::add_scalar(a, s[0]))
    }
    fn tanh(&mut self, a: &CowV<'a>) -> CowV<'a> {
        self.owned("tanh", a.iter().map(|x| x.tanh()).collect())
    }
    fn exp(&mut self, a: &CowV<'a>) -> CowV<'a> {
        self.owned("exp", a.iter().map(|x| x.exp()).collect())
    }
    fn log(&mut self, a: &CowV<'a>) -> CowV<'a> {
        self.owned("log", a.iter().map(|x| x.ln()).collect())
    }
    fn powf(&mut self, a: &CowV<'a>, p: f64) -> CowV<'a> {
        self.owned("powf", a.iter().map(|x| x.powf(p)).collect())
    }
    fn sum(&mut self, a: &CowV<'a>) -> CowV<'a> {
        self.owned("sum", vec![a.iter().sum()])
    }
    fn sum_sq(&mut self, a: &CowV<'a>) -> CowV<'a> {
        self.owned("sum_sq", vec![k::sum_sq(a)])
    }
    fn slice(&mut self, a: &CowV<'a>, start: usize, len: usize) -> CowV<'a> {
        if start + len > a.len() {
            return self.fail(GradError::Shape { expected: a.len(), got: start + len });
        }
        match a {
            Cow::Borrowed(b) => Cow::Borrowed(&b[start..start + len]),
            Cow::Owned(o) => Cow::Owned(o[start..start + len].to_vec()),
        }
    }
    fn prefix_linear(&mut self, w: &CowV<'a>, x: &CowV<'a>, cols: usize, prefix: &Arc<[usize]>) -> CowV<'a> {
        if w.len() != prefix.len() * cols || x.len() != cols {
            return self.fail(GradError::Shape { expected: prefix.len() * cols, got: w.len() });
        }
        self.owned("prefix_linear", k::prefix_linear(w, x, cols, prefix))
    }
    fn vec_mat(&mut self, v: &CowV<'a>, m: &CowV<'a>, cols: usize) -> CowV<'a> {
        if v.len() * cols != m.len() {
            return self.fail(GradError::Shape { expected: v.len() * cols, got: m.len() });
        }
        self.owned("vec_mat", k::vec_mat(v, m, cols))
    }
    fn log_add_exp(&mut self, a: &CowV<'a>, b: &CowV<'a>) -> CowV<'a> {
        if a.len() != 1 || b.len() != 1 {
            return self.fail(GradError::NotScalar);
        }
        self.owned("log_add_exp", vec![k::log_add_exp(a[0], b[0])])
    }
    fn atan2(&mut self, y: &CowV<'a>, x: &CowV<'a>) -> CowV<'a> {
        if y.len() != 1 || x.len() != 1 {
            return self.fail(GradError::NotScalar);
        }
        self.owned("atan2", vec![y[0].atan2(x[0])])
    }
}
