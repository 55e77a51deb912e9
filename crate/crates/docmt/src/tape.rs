//! Reverse-mode automatic differentiation over [`Tensor`] values.
//!
//! A [`Tape`] records one forward computation as a list of nodes; parents
//! always precede children, so a single reverse sweep in creation order is a
//! valid topological traversal. Backward functions are closures capturing
//! `Rc` clones of whatever forward values they need.
//!
//! Gradients can be seeded at several nodes at once
//! ([`Tape::backward_seeded`]), which is how batch-coupled loss terms inject
//! their gradient into per-sentence graphs.

use std::rc::Rc;

use crate::tensor::{matmul_nn, matmul_nt, matmul_tn, Tensor};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(pub(crate) usize);

type BackFn = Box<dyn Fn(&Tensor, &mut GradSink)>;

struct Node {
    value: Rc<Tensor>,
    back: Option<BackFn>,
    requires_grad: bool,
}

/// Accumulates gradients during the reverse sweep.
pub struct GradSink {
    grads: Vec<Option<Tensor>>,
    needs: Vec<bool>,
}

impl GradSink {
    /// Whether this node participates in gradient flow. Backward closures
    /// check it to skip work on constant subtrees.
    pub fn needs(&self, v: Var) -> bool {
        self.needs[v.0]
    }

    /// Add a gradient contribution for `v`.
    pub fn add(&mut self, v: Var, g: Tensor) {
        if !self.needs[v.0] {
            return;
        }
        match &mut self.grads[v.0] {
            Some(acc) => acc.add_assign(&g),
            slot => *slot = Some(g),
        }
    }
}

/// Gradients of one backward sweep, indexed by [`Var`].
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads[v.0].as_ref()
    }

    /// Gradient of a variable, or zeros of the given shape if it never
    /// received one.
    pub fn get_or_zeros(&self, v: Var, shape: &[usize]) -> Tensor {
        self.grads[v.0].clone().unwrap_or_else(|| Tensor::zeros(shape))
    }
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Value of a node.
    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn rc_value(&self, v: Var) -> Rc<Tensor> {
        Rc::clone(&self.nodes[v.0].value)
    }

    fn push(&mut self, value: Tensor, requires_grad: bool, back: Option<BackFn>) -> Var {
        self.push_rc(Rc::new(value), requires_grad, back)
    }

    fn push_rc(&mut self, value: Rc<Tensor>, requires_grad: bool, back: Option<BackFn>) -> Var {
        self.nodes.push(Node { value, back, requires_grad });
        Var(self.nodes.len() - 1)
    }

    fn any_grad(&self, parents: &[Var]) -> bool {
        parents.iter().any(|p| self.nodes[p.0].requires_grad)
    }

    /// A differentiable input (parameters).
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, true, None)
    }

    /// A differentiable input shared with the caller; no copy is made.
    pub fn leaf_rc(&mut self, value: Rc<Tensor>) -> Var {
        self.push_rc(value, true, None)
    }

    /// A non-differentiable input (data, masks, sampled noise).
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, false, None)
    }

    /// Run the reverse sweep from a scalar root.
    pub fn backward(&self, root: Var) -> Gradients {
        assert_eq!(self.value(root).len(), 1, "backward root must be scalar");
        self.backward_seeded(&[(root, Tensor::scalar(1.0))])
    }

    /// Run the reverse sweep from several seeded nodes at once. Each seed is
    /// an upstream gradient for that node; seeds at the same node accumulate.
    pub fn backward_seeded(&self, seeds: &[(Var, Tensor)]) -> Gradients {
        let needs = self.nodes.iter().map(|n| n.requires_grad).collect::<Vec<_>>();
        let mut sink = GradSink { grads: vec![None; self.nodes.len()], needs };
        let mut hi = 0usize;
        for (v, g) in seeds {
            assert_eq!(
                self.value(*v).shape(),
                g.shape(),
                "seed gradient shape mismatch at node {}",
                v.0
            );
            sink.add(*v, g.clone());
            hi = hi.max(v.0);
        }
        for idx in (0..=hi).rev() {
            if sink.grads[idx].is_none() {
                continue;
            }
            if let Some(back) = &self.nodes[idx].back {
                let g = sink.grads[idx].take().unwrap();
                back(&g, &mut sink);
                sink.grads[idx] = Some(g);
            }
        }
        Gradients { grads: sink.grads }
    }

    // ---- elementwise and shape ops -------------------------------------

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let (av, bv) = (self.value(a), self.value(b));
        assert_eq!(av.shape(), bv.shape(), "add shape mismatch");
        let mut out = av.clone();
        out.add_assign(bv);
        let rg = self.any_grad(&[a, b]);
        self.push(
            out,
            rg,
            Some(Box::new(move |g, sink| {
                if sink.needs(a) {
                    sink.add(a, g.clone());
                }
                if sink.needs(b) {
                    sink.add(b, g.clone());
                }
            })),
        )
    }

    /// Matrix `[s×d]` plus row vector `[d]`, broadcast over rows.
    pub fn add_row(&mut self, m: Var, r: Var) -> Var {
        let (mv, rv) = (self.value(m), self.value(r));
        let d = mv.cols();
        assert_eq!(rv.len(), d, "add_row width mismatch");
        let mut out = mv.clone();
        for row in 0..out.rows() {
            let slice = &mut out.data_mut()[row * d..(row + 1) * d];
            for (x, &b) in slice.iter_mut().zip(rv.data()) {
                *x += b;
            }
        }
        let rg = self.any_grad(&[m, r]);
        self.push(
            out,
            rg,
            Some(Box::new(move |g, sink| {
                if sink.needs(m) {
                    sink.add(m, g.clone());
                }
                if sink.needs(r) {
                    let d = g.cols();
                    let mut acc = Tensor::zeros(&[d]);
                    for row in 0..g.rows() {
                        for (a, &v) in acc.data_mut().iter_mut().zip(g.row(row)) {
                            *a += v;
                        }
                    }
                    sink.add(r, acc);
                }
            })),
        )
    }

    pub fn scale_const(&mut self, a: Var, c: f64) -> Var {
        let mut out = self.value(a).clone();
        out.scale(c);
        let rg = self.any_grad(&[a]);
        self.push(
            out,
            rg,
            Some(Box::new(move |g, sink| {
                if sink.needs(a) {
                    let mut ga = g.clone();
                    ga.scale(c);
                    sink.add(a, ga);
                }
            })),
        )
    }

    /// Elementwise add of a constant tensor.
    pub fn add_const(&mut self, a: Var, c: Tensor) -> Var {
        let av = self.value(a);
        assert_eq!(av.shape(), c.shape(), "add_const shape mismatch");
        let mut out = av.clone();
        out.add_assign(&c);
        let rg = self.any_grad(&[a]);
        self.push(
            out,
            rg,
            Some(Box::new(move |g, sink| {
                if sink.needs(a) {
                    sink.add(a, g.clone());
                }
            })),
        )
    }

    /// Multiply a tensor by a learnable scalar (one-element variable).
    pub fn scale_var(&mut self, a: Var, s: Var) -> Var {
        let sv = self.value(s).item();
        let av = self.rc_value(a);
        let mut out = (*av).clone();
        out.scale(sv);
        let rg = self.any_grad(&[a, s]);
        self.push(
            out,
            rg,
            Some(Box::new(move |g, sink| {
                if sink.needs(a) {
                    let mut ga = g.clone();
                    ga.scale(sv);
                    sink.add(a, ga);
                }
                if sink.needs(s) {
                    let dot: f64 = g.data().iter().zip(av.data()).map(|(x, y)| x * y).sum();
                    sink.add(s, Tensor::scalar(dot));
                }
            })),
        )
    }

    /// Elementwise multiply by a constant mask (dropout and the like).
    pub fn mul_const(&mut self, a: Var, mask: Tensor) -> Var {
        let av = self.value(a);
        assert_eq!(av.shape(), mask.shape(), "mul_const shape mismatch");
        let mut out = av.clone();
        for (x, &m) in out.data_mut().iter_mut().zip(mask.data()) {
            *x *= m;
        }
        let rg = self.any_grad(&[a]);
        self.push(
            out,
            rg,
            Some(Box::new(move |g, sink| {
                if sink.needs(a) {
                    let mut ga = g.clone();
                    for (x, &m) in ga.data_mut().iter_mut().zip(mask.data()) {
                        *x *= m;
                    }
                    sink.add(a, ga);
                }
            })),
        )
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Var {
        let av = self.value(a);
        let (rows, cols) = (av.rows(), av.cols());
        assert!(start + len <= cols, "slice_cols out of range");
        let mut out = Tensor::zeros(&[rows, len]);
        for r in 0..rows {
            out.data_mut()[r * len..(r + 1) * len]
                .copy_from_slice(&av.row(r)[start..start + len]);
        }
        let rg = self.any_grad(&[a]);
        self.push(
            out,
            rg,
            Some(Box::new(move |g, sink| {
                if sink.needs(a) {
                    let rows = g.rows();
                    let mut ga = Tensor::zeros(&[rows, cols]);
                    for r in 0..rows {
                        ga.data_mut()[r * cols + start..r * cols + start + len]
                            .copy_from_slice(g.row(r));
                    }
                    sink.add(a, ga);
                }
            })),
        )
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty());
        let rows = self.value(parts[0]).rows();
        let widths: Vec<usize> = parts.iter().map(|p| self.value(*p).cols()).collect();
        let total: usize = widths.iter().sum();
        let mut out = Tensor::zeros(&[rows, total]);
        let mut off = 0;
        for (p, w) in parts.iter().zip(&widths) {
            let pv = self.value(*p);
            assert_eq!(pv.rows(), rows, "concat_cols row mismatch");
            for r in 0..rows {
                out.data_mut()[r * total + off..r * total + off + w].copy_from_slice(pv.row(r));
            }
            off += w;
        }
        let parents: Vec<Var> = parts.to_vec();
        let rg = self.any_grad(&parents);
        self.push(
            out,
            rg,
            Some(Box::new(move |g, sink| {
                let rows = g.rows();
                let mut off = 0;
                for (p, w) in parents.iter().zip(&widths) {
                    if sink.needs(*p) {
                        let mut gp = Tensor::zeros(&[rows, *w]);
                        for r in 0..rows {
                            gp.data_mut()[r * w..(r + 1) * w]
                                .copy_from_slice(&g.row(r)[off..off + w]);
                        }
                        sink.add(*p, gp);
                    }
                    off += w;
                }
            })),
        )
    }

    // ---- matrix products ------------------------------------------------

    /// A·B.
    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let out = matmul_nn(self.value(a), self.value(b));
        let (ac, bc) = (self.rc_value(a), self.rc_value(b));
        let rg = self.any_grad(&[a, b]);
        self.push(
            out,
            rg,
            Some(Box::new(move |g, sink| {
                if sink.needs(a) {
                    sink.add(a, matmul_nt(g, &bc));
                }
                if sink.needs(b) {
                    sink.add(b, matmul_tn(&ac, g));
                }
            })),
        )
    }

    /// A·Bᵀ (attention scores).
    pub fn matmul_t(&mut self, a: Var, b: Var) -> Var {
        let out = matmul_nt(self.value(a), self.value(b));
        let (ac, bc) = (self.rc_value(a), self.rc_value(b));
        let rg = self.any_grad(&[a, b]);
        self.push(
            out,
            rg,
            Some(Box::new(move |g, sink| {
                if sink.needs(a) {
                    sink.add(a, matmul_nn(g, &bc));
                }
                if sink.needs(b) {
                    sink.add(b, matmul_tn(g, &ac));
                }
            })),
        )
    }

    // ---- nonlinear ops --------------------------------------------------

    /// Row softmax with a boolean keep-mask over entries. Masked-out entries
    /// get weight zero; a fully masked row yields an all-zero row instead of
    /// NaN so padding rows stay inert.
    pub fn softmax_masked(&mut self, x: Var, allowed: Vec<bool>) -> Var {
        let xv = self.value(x);
        let (rows, cols) = (xv.rows(), xv.cols());
        assert_eq!(allowed.len(), rows * cols, "softmax mask size");
        let mut out = Tensor::zeros(&[rows, cols]);
        for r in 0..rows {
            let xrow = xv.row(r);
            let arow = &allowed[r * cols..(r + 1) * cols];
            let mut mx = f64::NEG_INFINITY;
            for (v, &ok) in xrow.iter().zip(arow) {
                if ok && *v > mx {
                    mx = *v;
                }
            }
            if mx == f64::NEG_INFINITY {
                continue; // fully masked row stays zero
            }
            let orow = &mut out.data_mut()[r * cols..(r + 1) * cols];
            let mut sum = 0.0;
            for ((o, v), &ok) in orow.iter_mut().zip(xrow).zip(arow) {
                if ok {
                    *o = (*v - mx).exp();
                    sum += *o;
                }
            }
            for o in orow.iter_mut() {
                *o /= sum;
            }
        }
        let yc = Rc::new(out.clone());
        let rg = self.any_grad(&[x]);
        self.push(
            out,
            rg,
            Some(Box::new(move |g, sink| {
                if !sink.needs(x) {
                    return;
                }
                let (rows, cols) = (yc.rows(), yc.cols());
                let mut gx = Tensor::zeros(&[rows, cols]);
                for r in 0..rows {
                    let yrow = yc.row(r);
                    let grow = g.row(r);
                    let dot: f64 = yrow.iter().zip(grow).map(|(y, gg)| y * gg).sum();
                    let gxrow = &mut gx.data_mut()[r * cols..(r + 1) * cols];
                    for ((o, &y), &gg) in gxrow.iter_mut().zip(yrow).zip(grow) {
                        *o = y * (gg - dot);
                    }
                }
                sink.add(x, gx);
            })),
        )
    }

    /// Plain softmax over a rank-1 vector.
    pub fn softmax_vec(&mut self, x: Var) -> Var {
        let n = self.value(x).len();
        self.softmax_masked(x, vec![true; n])
    }

    /// Row-wise log-softmax.
    pub fn log_softmax(&mut self, x: Var) -> Var {
        let xv = self.value(x);
        let (rows, cols) = (xv.rows(), xv.cols());
        let mut out = Tensor::zeros(xv.shape());
        for r in 0..rows {
            let xrow = xv.row(r);
            let mx = xrow.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = mx + xrow.iter().map(|v| (v - mx).exp()).sum::<f64>().ln();
            for (o, v) in out.data_mut()[r * cols..(r + 1) * cols].iter_mut().zip(xrow) {
                *o = v - lse;
            }
        }
        let yc = Rc::new(out.clone());
        let rg = self.any_grad(&[x]);
        self.push(
            out,
            rg,
            Some(Box::new(move |g, sink| {
                if !sink.needs(x) {
                    return;
                }
                let (rows, cols) = (yc.rows(), yc.cols());
                let mut gx = Tensor::zeros(&[rows, cols]);
                for r in 0..rows {
                    let grow = g.row(r);
                    let gsum: f64 = grow.iter().sum();
                    let yrow = yc.row(r);
                    let gxrow = &mut gx.data_mut()[r * cols..(r + 1) * cols];
                    for ((o, &gg), &lp) in gxrow.iter_mut().zip(grow).zip(yrow) {
                        *o = gg - lp.exp() * gsum;
                    }
                }
                sink.add(x, gx);
            })),
        )
    }

    /// Per-row layer normalization with learnable gain and bias.
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var, eps: f64) -> Var {
        let xv = self.value(x);
        let gv = self.value(gain);
        let bv = self.value(bias);
        let (rows, cols) = (xv.rows(), xv.cols());
        assert_eq!(gv.len(), cols);
        assert_eq!(bv.len(), cols);
        let mut out = Tensor::zeros(xv.shape());
        let mut xhat = Tensor::zeros(xv.shape());
        let mut inv_std = vec![0.0; rows];
        for r in 0..rows {
            let xrow = xv.row(r);
            let mean = xrow.iter().sum::<f64>() / cols as f64;
            let var = xrow.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / cols as f64;
            let is = 1.0 / (var + eps).sqrt();
            inv_std[r] = is;
            for c in 0..cols {
                let xh = (xrow[c] - mean) * is;
                xhat.data_mut()[r * cols + c] = xh;
                out.data_mut()[r * cols + c] = gv.data()[c] * xh + bv.data()[c];
            }
        }
        let xhat = Rc::new(xhat);
        let gc = self.rc_value(gain);
        let rg = self.any_grad(&[x, gain, bias]);
        self.push(
            out,
            rg,
            Some(Box::new(move |g, sink| {
                let (rows, cols) = (xhat.rows(), xhat.cols());
                if sink.needs(gain) {
                    let mut gg = Tensor::zeros(&[cols]);
                    for r in 0..rows {
                        for (acc, (&go, &xh)) in
                            gg.data_mut().iter_mut().zip(g.row(r).iter().zip(xhat.row(r)))
                        {
                            *acc += go * xh;
                        }
                    }
                    sink.add(gain, gg);
                }
                if sink.needs(bias) {
                    let mut gb = Tensor::zeros(&[cols]);
                    for r in 0..rows {
                        for (acc, &go) in gb.data_mut().iter_mut().zip(g.row(r)) {
                            *acc += go;
                        }
                    }
                    sink.add(bias, gb);
                }
                if sink.needs(x) {
                    let mut gx = Tensor::zeros(&[rows, cols]);
                    let n = cols as f64;
                    for r in 0..rows {
                        let grow = g.row(r);
                        let xhrow = xhat.row(r);
                        // dxhat_c = g_c * gain_c
                        let mut sum_d = 0.0;
                        let mut sum_dx = 0.0;
                        for c in 0..cols {
                            let d = grow[c] * gc.data()[c];
                            sum_d += d;
                            sum_dx += d * xhrow[c];
                        }
                        let gxrow = &mut gx.data_mut()[r * cols..(r + 1) * cols];
                        for c in 0..cols {
                            let d = grow[c] * gc.data()[c];
                            gxrow[c] = inv_std[r] * (d - sum_d / n - xhrow[c] * sum_dx / n);
                        }
                    }
                    sink.add(x, gx);
                }
            })),
        )
    }

    /// GELU activation (tanh form), smooth everywhere.
    pub fn gelu(&mut self, x: Var) -> Var {
        const C: f64 = 0.7978845608028654; // sqrt(2/pi)
        const A: f64 = 0.044715;
        let xc = self.rc_value(x);
        let mut out = (*xc).clone();
        for v in out.data_mut() {
            let u = C * (*v + A * *v * *v * *v);
            *v = 0.5 * *v * (1.0 + u.tanh());
        }
        let rg = self.any_grad(&[x]);
        self.push(
            out,
            rg,
            Some(Box::new(move |g, sink| {
                if !sink.needs(x) {
                    return;
                }
                let mut gx = g.clone();
                for (gv, &v) in gx.data_mut().iter_mut().zip(xc.data()) {
                    let u = C * (v + A * v * v * v);
                    let t = u.tanh();
                    let du = C * (1.0 + 3.0 * A * v * v);
                    let dy = 0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * du;
                    *gv *= dy;
                }
                sink.add(x, gx);
            })),
        )
    }

    /// Rows of an embedding table selected by token id.
    pub fn embed(&mut self, ids: Vec<usize>, table: Var) -> Var {
        let tv = self.value(table);
        let (vocab, d) = (tv.rows(), tv.cols());
        let mut out = Tensor::zeros(&[ids.len(), d]);
        for (r, &id) in ids.iter().enumerate() {
            assert!(id < vocab, "embed id {id} out of range {vocab}");
            out.data_mut()[r * d..(r + 1) * d].copy_from_slice(tv.row(id));
        }
        let rg = self.any_grad(&[table]);
        self.push(
            out,
            rg,
            Some(Box::new(move |g, sink| {
                if !sink.needs(table) {
                    return;
                }
                let d = g.cols();
                let mut gt = Tensor::zeros(&[vocab, d]);
                for (r, &id) in ids.iter().enumerate() {
                    let dst = &mut gt.data_mut()[id * d..(id + 1) * d];
                    for (a, &v) in dst.iter_mut().zip(g.row(r)) {
                        *a += v;
                    }
                }
                sink.add(table, gt);
            })),
        )
    }

    /// Mean over the rows where `keep` is true; output is rank-1 `[d]`.
    pub fn mean_rows_masked(&mut self, x: Var, keep: Vec<bool>) -> Var {
        let xv = self.value(x);
        let (rows, cols) = (xv.rows(), xv.cols());
        assert_eq!(keep.len(), rows, "mean_rows_masked mask size");
        let k = keep.iter().filter(|&&b| b).count();
        assert!(k > 0, "mean_rows_masked over zero rows");
        let mut out = Tensor::zeros(&[cols]);
        for r in 0..rows {
            if keep[r] {
                for (o, &v) in out.data_mut().iter_mut().zip(xv.row(r)) {
                    *o += v;
                }
            }
        }
        out.scale(1.0 / k as f64);
        let rg = self.any_grad(&[x]);
        self.push(
            out,
            rg,
            Some(Box::new(move |g, sink| {
                if !sink.needs(x) {
                    return;
                }
                let mut gx = Tensor::zeros(&[rows, cols]);
                let inv = 1.0 / k as f64;
                for r in 0..rows {
                    if keep[r] {
                        let grow = &mut gx.data_mut()[r * cols..(r + 1) * cols];
                        for (o, &v) in grow.iter_mut().zip(g.data()) {
                            *o = v * inv;
                        }
                    }
                }
                sink.add(x, gx);
            })),
        )
    }

    /// Mean negative log-probability of `targets` over the rows where
    /// `scored` is true. `log_probs` is `[t×v]` of log-probabilities.
    pub fn nll_masked(&mut self, log_probs: Var, targets: Vec<usize>, scored: Vec<bool>) -> Var {
        let lp = self.value(log_probs);
        let (rows, cols) = (lp.rows(), lp.cols());
        assert_eq!(targets.len(), rows);
        assert_eq!(scored.len(), rows);
        let k = scored.iter().filter(|&&b| b).count();
        assert!(k > 0, "nll_masked over zero scored positions");
        let mut acc = 0.0;
        for r in 0..rows {
            if scored[r] {
                acc -= lp.row(r)[targets[r]];
            }
        }
        let out = Tensor::scalar(acc / k as f64);
        let rg = self.any_grad(&[log_probs]);
        self.push(
            out,
            rg,
            Some(Box::new(move |g, sink| {
                if !sink.needs(log_probs) {
                    return;
                }
                let s = g.item() / k as f64;
                let mut gx = Tensor::zeros(&[rows, cols]);
                for r in 0..rows {
                    if scored[r] {
                        gx.data_mut()[r * cols + targets[r]] = -s;
                    }
                }
                sink.add(log_probs, gx);
            })),
        )
    }

    /// Elementwise `ln(max(x, floor))`; entries at or below the floor get
    /// zero gradient.
    pub fn log_clamped(&mut self, x: Var, floor: f64) -> Var {
        let xc = self.rc_value(x);
        let mut out = (*xc).clone();
        for v in out.data_mut() {
            *v = v.max(floor).ln();
        }
        let rg = self.any_grad(&[x]);
        self.push(
            out,
            rg,
            Some(Box::new(move |g, sink| {
                if !sink.needs(x) {
                    return;
                }
                let mut gx = g.clone();
                for (gv, &v) in gx.data_mut().iter_mut().zip(xc.data()) {
                    *gv = if v > floor { *gv / v } else { 0.0 };
                }
                sink.add(x, gx);
            })),
        )
    }

    /// Sum of all entries, as a scalar.
    pub fn sum(&mut self, x: Var) -> Var {
        let xv = self.value(x);
        let shape = xv.shape().to_vec();
        let out = Tensor::scalar(xv.data().iter().sum());
        let rg = self.any_grad(&[x]);
        self.push(
            out,
            rg,
            Some(Box::new(move |g, sink| {
                if !sink.needs(x) {
                    return;
                }
                let s = g.item();
                let mut gx = Tensor::zeros(&shape);
                for v in gx.data_mut() {
                    *v = s;
                }
                sink.add(x, gx);
            })),
        )
    }

    /// Σᵢ weights[i]·items[i] where `weights` is a rank-1 variable and each
    /// item is a scalar variable.
    pub fn weighted_sum_scalars(&mut self, weights: Var, items: &[Var]) -> Var {
        let wv = self.rc_value(weights);
        assert_eq!(wv.len(), items.len(), "weighted_sum_scalars arity");
        let vals: Vec<f64> = items.iter().map(|i| self.value(*i).item()).collect();
        let out = Tensor::scalar(wv.data().iter().zip(&vals).map(|(w, v)| w * v).sum());
        let items: Vec<Var> = items.to_vec();
        let mut parents = items.clone();
        parents.push(weights);
        let rg = self.any_grad(&parents);
        self.push(
            out,
            rg,
            Some(Box::new(move |g, sink| {
                let s = g.item();
                if sink.needs(weights) {
                    let mut gw = Tensor::zeros(wv.shape());
                    for (o, &v) in gw.data_mut().iter_mut().zip(&vals) {
                        *o = s * v;
                    }
                    sink.add(weights, gw);
                }
                for (item, &w) in items.iter().zip(wv.data()) {
                    if sink.needs(*item) {
                        sink.add(*item, Tensor::scalar(s * w));
                    }
                }
            })),
        )
    }
}
