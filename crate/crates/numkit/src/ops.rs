//! Differentiable operations recorded on the [`Tape`].
//!
//! Every constructor validates operand shapes up front and reports the op
//! name plus both shapes on mismatch. When no operand participates in
//! differentiation the result is stored as a plain leaf, so inference pays
//! nothing for the tape.

use crate::tape::{Op, Tape};
use crate::{NumError, Result, Tensor, Var};

const GELU_SCALE: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_CUBIC: f64 = 0.044_715;

impl Tape {
    fn shapes_equal(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa != sb {
            return Err(NumError::ShapeMismatch {
                op,
                lhs: sa.to_vec(),
                rhs: sb.to_vec(),
            });
        }
        Ok(())
    }

    fn record(&mut self, value: Tensor, op: Op, parents: &[Var]) -> Var {
        if parents.iter().any(|p| self.wants_grad(p.0)) {
            let mut value = value;
            value.requires_grad = true;
            self.push(value, op)
        } else {
            self.push(value, Op::Leaf)
        }
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.lincomb(a, b, 1.0, 1.0, "add")
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.lincomb(a, b, 1.0, -1.0, "sub")
    }

    /// ca*a + cb*b over identical shapes.
    pub fn lincomb(&mut self, a: Var, b: Var, ca: f64, cb: f64, op: &'static str) -> Result<Var> {
        self.shapes_equal(op, a, b)?;
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| ca * x + cb * y)
            .collect();
        let out = Tensor::new(self.value(a).shape().to_vec(), data)?;
        Ok(self.record(out, Op::Lincomb { a: a.0, b: b.0, ca, cb }, &[a, b]))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.shapes_equal("mul", a, b)?;
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| x * y)
            .collect();
        let out = Tensor::new(self.value(a).shape().to_vec(), data)?;
        Ok(self.record(out, Op::Mul { a: a.0, b: b.0 }, &[a, b]))
    }

    /// mul*x + add, with compile-time constants.
    pub fn affine(&mut self, a: Var, mul: f64, add: f64) -> Result<Var> {
        let data = self.value(a).data().iter().map(|x| mul * x + add).collect();
        let out = Tensor::new(self.value(a).shape().to_vec(), data)?;
        Ok(self.record(out, Op::Affine { a: a.0, mul }, &[a]))
    }

    pub fn scale(&mut self, a: Var, mul: f64) -> Result<Var> {
        self.affine(a, mul, 0.0)
    }

    /// x[..., n] + b[n], broadcasting the bias over all leading dimensions.
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let xs = self.value(x).shape().to_vec();
        let bs = self.value(bias).shape().to_vec();
        let n = *xs.last().unwrap_or(&0);
        if bs.len() != 1 || bs[0] != n || n == 0 {
            return Err(NumError::ShapeMismatch { op: "add_bias", lhs: xs, rhs: bs });
        }
        let bd = self.value(bias).data().to_vec();
        let data = self
            .value(x)
            .data()
            .chunks_exact(n)
            .flat_map(|row| row.iter().zip(&bd).map(|(v, b)| v + b).collect::<Vec<_>>())
            .collect();
        let out = Tensor::new(xs, data)?;
        Ok(self.record(out, Op::AddBias { a: x.0, bias: bias.0 }, &[x, bias]))
    }

    /// x[b,c,l] + bias, where bias is [c] (shared) or [b,c] (per sample);
    /// the bias is broadcast along the trailing length dimension.
    pub fn add_channel_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let xs = self.value(x).shape().to_vec();
        let bs = self.value(bias).shape().to_vec();
        let ok = xs.len() == 3
            && ((bs.len() == 1 && bs[0] == xs[1]) || (bs.len() == 2 && bs == xs[..2]));
        if !ok {
            return Err(NumError::ShapeMismatch { op: "add_channel_bias", lhs: xs, rhs: bs });
        }
        let (b, c, l) = (xs[0], xs[1], xs[2]);
        let per_sample = bs.len() == 2;
        let bd = self.value(bias).data().to_vec();
        let mut data = self.value(x).data().to_vec();
        for bi in 0..b {
            for ci in 0..c {
                let bv = if per_sample { bd[bi * c + ci] } else { bd[ci] };
                let row = &mut data[(bi * c + ci) * l..][..l];
                for v in row {
                    *v += bv;
                }
            }
        }
        let out = Tensor::new(xs, data)?;
        Ok(self.record(out, Op::AddChannelBias { a: x.0, bias: bias.0 }, &[x, bias]))
    }

    /// a[m,k] @ b[k,n] -> [m,n]
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let sa = self.value(a).shape().to_vec();
        let sb = self.value(b).shape().to_vec();
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(NumError::ShapeMismatch { op: "matmul", lhs: sa, rhs: sb });
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let data = matmul_kernel(self.value(a).data(), self.value(b).data(), m, k, n);
        let out = Tensor::new(vec![m, n], data)?;
        Ok(self.record(out, Op::MatMul { a: a.0, b: b.0, m, k, n }, &[a, b]))
    }

    /// x[b,cin,l] * w[cout,cin,kw] -> [b,cout,l+2*pad-kw+1], stride 1,
    /// zero padding of `pad` on both ends.
    pub fn conv1d(&mut self, x: Var, w: Var, pad: usize) -> Result<Var> {
        let xs = self.value(x).shape().to_vec();
        let ws = self.value(w).shape().to_vec();
        if xs.len() != 3 || ws.len() != 3 || xs[1] != ws[1] {
            return Err(NumError::ShapeMismatch { op: "conv1d", lhs: xs, rhs: ws });
        }
        let (b, cin, l) = (xs[0], xs[1], xs[2]);
        let (cout, kw) = (ws[0], ws[2]);
        if l + 2 * pad + 1 <= kw {
            return Err(NumError::invalid(
                "conv1d",
                format!("kernel width {kw} exceeds padded length {}", l + 2 * pad),
            ));
        }
        let lout = l + 2 * pad - kw + 1;
        let data = conv1d_kernel(
            self.value(x).data(),
            self.value(w).data(),
            b,
            cin,
            l,
            cout,
            kw,
            pad,
        );
        let out = Tensor::new(vec![b, cout, lout], data)?;
        Ok(self.record(out, Op::Conv1d { x: x.0, w: w.0, pad }, &[x, w]))
    }

    /// Group normalization over x[b,c,l] with per-channel affine parameters.
    pub fn group_norm(
        &mut self,
        x: Var,
        gamma: Var,
        beta: Var,
        groups: usize,
        eps: f64,
    ) -> Result<Var> {
        let xs = self.value(x).shape().to_vec();
        let gs = self.value(gamma).shape().to_vec();
        if xs.len() != 3 || gs.len() != 1 || gs[0] != xs[1] {
            return Err(NumError::ShapeMismatch { op: "group_norm", lhs: xs, rhs: gs });
        }
        self.shapes_equal("group_norm", gamma, beta)?;
        let c = xs[1];
        if groups == 0 || c % groups != 0 {
            return Err(NumError::invalid(
                "group_norm",
                format!("channels {c} not divisible by groups {groups}"),
            ));
        }
        let data = group_norm_kernel(
            self.value(x).data(),
            self.value(gamma).data(),
            self.value(beta).data(),
            xs[0],
            c,
            xs[2],
            groups,
            eps,
        );
        let out = Tensor::new(xs, data)?;
        Ok(self.record(
            out,
            Op::GroupNorm { x: x.0, gamma: gamma.0, beta: beta.0, groups, eps },
            &[x, gamma, beta],
        ))
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        let data = self.value(x).data().iter().map(|v| v.max(0.0)).collect();
        let out = Tensor::new(self.value(x).shape().to_vec(), data)?;
        Ok(self.record(out, Op::Relu { x: x.0 }, &[x]))
    }

    /// x * tanh(softplus(x))
    pub fn mish(&mut self, x: Var) -> Result<Var> {
        let data = self
            .value(x)
            .data()
            .iter()
            .map(|&v| v * softplus(v).tanh())
            .collect();
        let out = Tensor::new(self.value(x).shape().to_vec(), data)?;
        Ok(self.record(out, Op::Mish { x: x.0 }, &[x]))
    }

    /// tanh-approximated gaussian error linear unit.
    pub fn gelu(&mut self, x: Var) -> Result<Var> {
        let data = self
            .value(x)
            .data()
            .iter()
            .map(|&v| 0.5 * v * (1.0 + gelu_inner(v).tanh()))
            .collect();
        let out = Tensor::new(self.value(x).shape().to_vec(), data)?;
        Ok(self.record(out, Op::Gelu { x: x.0 }, &[x]))
    }

    /// Concatenates tensors of identical rank along `axis`; all other
    /// dimensions must agree.
    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var> {
        if parts.is_empty() {
            return Err(NumError::invalid("concat", "no operands"));
        }
        let first = self.value(parts[0]).shape().to_vec();
        if axis >= first.len() {
            return Err(NumError::invalid("concat", format!("axis {axis} out of range")));
        }
        let mut axis_total = 0;
        for p in parts {
            let s = self.value(*p).shape();
            let compatible = s.len() == first.len()
                && s.iter()
                    .zip(&first)
                    .enumerate()
                    .all(|(i, (a, b))| i == axis || a == b);
            if !compatible {
                return Err(NumError::ShapeMismatch {
                    op: "concat",
                    lhs: first,
                    rhs: s.to_vec(),
                });
            }
            axis_total += s[axis];
        }
        let outer: usize = first[..axis].iter().product();
        let inner: usize = first[axis + 1..].iter().product();
        let mut shape = first.clone();
        shape[axis] = axis_total;
        let mut data = vec![0.0; outer * axis_total * inner];
        let mut offset = 0;
        for p in parts {
            let s = self.value(*p).shape();
            let span = s[axis] * inner;
            let src = self.value(*p).data();
            for o in 0..outer {
                let dst = &mut data[o * axis_total * inner + offset..][..span];
                dst.copy_from_slice(&src[o * span..][..span]);
            }
            offset += span;
        }
        let out = Tensor::new(shape, data)?;
        let op = Op::Concat { parts: parts.iter().map(|p| p.0).collect(), axis };
        Ok(self.record(out, op, parts))
    }

    /// Contiguous range `[start, start+len)` along `axis`; copies.
    pub fn slice(&mut self, x: Var, axis: usize, start: usize, len: usize) -> Result<Var> {
        let xs = self.value(x).shape().to_vec();
        if axis >= xs.len() || start + len > xs[axis] {
            return Err(NumError::invalid(
                "slice",
                format!("range {start}..{} out of bounds for axis {axis} of {:?}", start + len, xs),
            ));
        }
        let outer: usize = xs[..axis].iter().product();
        let inner: usize = xs[axis + 1..].iter().product();
        let mut shape = xs.clone();
        shape[axis] = len;
        let src = self.value(x).data();
        let mut data = vec![0.0; outer * len * inner];
        for o in 0..outer {
            let from = (o * xs[axis] + start) * inner;
            data[o * len * inner..][..len * inner].copy_from_slice(&src[from..][..len * inner]);
        }
        let out = Tensor::new(shape, data)?;
        Ok(self.record(out, Op::Slice { x: x.0, axis, start, len }, &[x]))
    }

    pub fn reduce_sum(&mut self, x: Var) -> Result<Var> {
        let total: f64 = self.value(x).data().iter().sum();
        let out = Tensor::scalar(total);
        Ok(self.record(out, Op::ReduceSum { x: x.0 }, &[x]))
    }

    pub fn reduce_mean(&mut self, x: Var) -> Result<Var> {
        let t = self.value(x);
        if t.numel() == 0 {
            return Err(NumError::invalid("reduce_mean", "empty tensor"));
        }
        let total: f64 = t.data().iter().sum();
        let out = Tensor::scalar(total / t.numel() as f64);
        Ok(self.record(out, Op::ReduceMean { x: x.0 }, &[x]))
    }

    /// Selects rows of a [n, ...] tensor by index, with repetition allowed.
    pub fn gather_rows(&mut self, x: Var, idx: &[usize]) -> Result<Var> {
        let xs = self.value(x).shape().to_vec();
        if xs.is_empty() {
            return Err(NumError::invalid("gather_rows", "operand must have rank >= 1"));
        }
        let rows = xs[0];
        if let Some(&bad) = idx.iter().find(|&&i| i >= rows) {
            return Err(NumError::invalid(
                "gather_rows",
                format!("index {bad} out of range for {rows} rows"),
            ));
        }
        let inner: usize = xs[1..].iter().product();
        let src = self.value(x).data();
        let mut data = vec![0.0; idx.len() * inner];
        for (o, &i) in idx.iter().enumerate() {
            data[o * inner..][..inner].copy_from_slice(&src[i * inner..][..inner]);
        }
        let mut shape = xs.clone();
        shape[0] = idx.len();
        let out = Tensor::new(shape, data)?;
        Ok(self.record(out, Op::GatherRows { x: x.0, idx: idx.to_vec() }, &[x]))
    }

    /// Mean of squared differences; the workhorse for both training losses.
    pub fn mse(&mut self, a: Var, b: Var) -> Result<Var> {
        let d = self.sub(a, b)?;
        let sq = self.mul(d, d)?;
        self.reduce_mean(sq)
    }

    pub(crate) fn backprop_node(&mut self, idx: usize) {
        let gy = match &self.nodes[idx].tensor.grad {
            Some(g) if !matches!(self.nodes[idx].op, Op::Leaf) => g.clone(),
            _ => return,
        };
        let op = self.nodes[idx].op.clone();
        match op {
            Op::Leaf => {}
            Op::Lincomb { a, b, ca, cb } => {
                if self.wants_grad(a) {
                    let c: Vec<f64> = gy.iter().map(|g| ca * g).collect();
                    self.accumulate(a, &c);
                }
                if self.wants_grad(b) {
                    let c: Vec<f64> = gy.iter().map(|g| cb * g).collect();
                    self.accumulate(b, &c);
                }
            }
            Op::Mul { a, b } => {
                if self.wants_grad(a) {
                    let bd = self.nodes[b].tensor.data();
                    let c: Vec<f64> = gy.iter().zip(bd).map(|(g, v)| g * v).collect();
                    self.accumulate(a, &c);
                }
                if self.wants_grad(b) {
                    let ad = self.nodes[a].tensor.data();
                    let c: Vec<f64> = gy.iter().zip(ad).map(|(g, v)| g * v).collect();
                    self.accumulate(b, &c);
                }
            }
            Op::Affine { a, mul } => {
                let c: Vec<f64> = gy.iter().map(|g| mul * g).collect();
                self.accumulate(a, &c);
            }
            Op::AddBias { a, bias } => {
                if self.wants_grad(a) {
                    self.accumulate(a, &gy);
                }
                if self.wants_grad(bias) {
                    let n = self.nodes[bias].tensor.numel();
                    let mut c = vec![0.0; n];
                    for row in gy.chunks_exact(n) {
                        for (acc, g) in c.iter_mut().zip(row) {
                            *acc += g;
                        }
                    }
                    self.accumulate(bias, &c);
                }
            }
            Op::AddChannelBias { a, bias } => {
                if self.wants_grad(a) {
                    self.accumulate(a, &gy);
                }
                if self.wants_grad(bias) {
                    let xs = self.nodes[a].tensor.shape().to_vec();
                    let (b, ch, l) = (xs[0], xs[1], xs[2]);
                    let per_sample = self.nodes[bias].tensor.shape().len() == 2;
                    let mut c = vec![0.0; if per_sample { b * ch } else { ch }];
                    for bi in 0..b {
                        for ci in 0..ch {
                            let s: f64 = gy[(bi * ch + ci) * l..][..l].iter().sum();
                            if per_sample {
                                c[bi * ch + ci] += s;
                            } else {
                                c[ci] += s;
                            }
                        }
                    }
                    self.accumulate(bias, &c);
                }
            }
            Op::MatMul { a, b, m, k, n } => {
                if self.wants_grad(a) {
                    // dA = dY . B^T
                    let bd = self.nodes[b].tensor.data();
                    let mut c = vec![0.0; m * k];
                    for i in 0..m {
                        for p in 0..k {
                            let mut acc = 0.0;
                            let gyr = &gy[i * n..][..n];
                            let br = &bd[p * n..][..n];
                            for j in 0..n {
                                acc += gyr[j] * br[j];
                            }
                            c[i * k + p] = acc;
                        }
                    }
                    self.accumulate(a, &c);
                }
                if self.wants_grad(b) {
                    // dB = A^T . dY
                    let ad = self.nodes[a].tensor.data();
                    let mut c = vec![0.0; k * n];
                    for i in 0..m {
                        for p in 0..k {
                            let av = ad[i * k + p];
                            if av == 0.0 {
                                continue;
                            }
                            let gyr = &gy[i * n..][..n];
                            let cr = &mut c[p * n..][..n];
                            for j in 0..n {
                                cr[j] += av * gyr[j];
                            }
                        }
                    }
                    self.accumulate(b, &c);
                }
            }
            Op::Conv1d { x, w, pad } => {
                let xs = self.nodes[x].tensor.shape().to_vec();
                let ws = self.nodes[w].tensor.shape().to_vec();
                let (b, cin, l) = (xs[0], xs[1], xs[2]);
                let (cout, kw) = (ws[0], ws[2]);
                let lout = l + 2 * pad - kw + 1;
                if self.wants_grad(x) {
                    let wd = self.nodes[w].tensor.data();
                    let mut c = vec![0.0; b * cin * l];
                    for bi in 0..b {
                        for o in 0..cout {
                            let gyr = &gy[(bi * cout + o) * lout..][..lout];
                            for ci in 0..cin {
                                let dxr = &mut c[(bi * cin + ci) * l..][..l];
                                for t in 0..kw {
                                    let wv = wd[(o * cin + ci) * kw + t];
                                    let jlo = pad.saturating_sub(t);
                                    let jhi = lout.min(l + pad - t);
                                    for j in jlo..jhi {
                                        dxr[j + t - pad] += gyr[j] * wv;
                                    }
                                }
                            }
                        }
                    }
                    self.accumulate(x, &c);
                }
                if self.wants_grad(w) {
                    let xd = self.nodes[x].tensor.data();
                    let mut c = vec![0.0; cout * cin * kw];
                    for bi in 0..b {
                        for o in 0..cout {
                            let gyr = &gy[(bi * cout + o) * lout..][..lout];
                            for ci in 0..cin {
                                let xr = &xd[(bi * cin + ci) * l..][..l];
                                for t in 0..kw {
                                    let jlo = pad.saturating_sub(t);
                                    let jhi = lout.min(l + pad - t);
                                    let mut acc = 0.0;
                                    for j in jlo..jhi {
                                        acc += gyr[j] * xr[j + t - pad];
                                    }
                                    c[(o * cin + ci) * kw + t] += acc;
                                }
                            }
                        }
                    }
                    self.accumulate(w, &c);
                }
            }
            Op::GroupNorm { x, gamma, beta, groups, eps } => {
                self.backprop_group_norm(&gy, x, gamma, beta, groups, eps);
            }
            Op::Relu { x } => {
                let xd = self.nodes[x].tensor.data();
                let c: Vec<f64> = gy
                    .iter()
                    .zip(xd)
                    .map(|(g, &v)| if v > 0.0 { *g } else { 0.0 })
                    .collect();
                self.accumulate(x, &c);
            }
            Op::Mish { x } => {
                let xd = self.nodes[x].tensor.data();
                let c: Vec<f64> = gy
                    .iter()
                    .zip(xd)
                    .map(|(g, &v)| {
                        let t = softplus(v).tanh();
                        let s = 1.0 / (1.0 + (-v).exp());
                        g * (t + v * (1.0 - t * t) * s)
                    })
                    .collect();
                self.accumulate(x, &c);
            }
            Op::Gelu { x } => {
                let xd = self.nodes[x].tensor.data();
                let c: Vec<f64> = gy
                    .iter()
                    .zip(xd)
                    .map(|(g, &v)| {
                        let t = gelu_inner(v).tanh();
                        let du = GELU_SCALE * (1.0 + 3.0 * GELU_CUBIC * v * v);
                        g * (0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * du)
                    })
                    .collect();
                self.accumulate(x, &c);
            }
            Op::Concat { parts, axis } => {
                let out_shape = self.nodes[idx].tensor.shape().to_vec();
                let outer: usize = out_shape[..axis].iter().product();
                let inner: usize = out_shape[axis + 1..].iter().product();
                let total_span = out_shape[axis] * inner;
                let mut offset = 0;
                for p in parts {
                    let span = self.nodes[p].tensor.shape()[axis] * inner;
                    if self.wants_grad(p) {
                        let mut c = vec![0.0; outer * span];
                        for o in 0..outer {
                            c[o * span..][..span]
                                .copy_from_slice(&gy[o * total_span + offset..][..span]);
                        }
                        self.accumulate(p, &c);
                    }
                    offset += span;
                }
            }
            Op::Slice { x, axis, start, len } => {
                let xs = self.nodes[x].tensor.shape().to_vec();
                let outer: usize = xs[..axis].iter().product();
                let inner: usize = xs[axis + 1..].iter().product();
                let mut c = vec![0.0; self.nodes[x].tensor.numel()];
                for o in 0..outer {
                    let dst = (o * xs[axis] + start) * inner;
                    c[dst..][..len * inner].copy_from_slice(&gy[o * len * inner..][..len * inner]);
                }
                self.accumulate(x, &c);
            }
            Op::ReduceSum { x } => {
                let c = vec![gy[0]; self.nodes[x].tensor.numel()];
                self.accumulate(x, &c);
            }
            Op::ReduceMean { x } => {
                let n = self.nodes[x].tensor.numel();
                let c = vec![gy[0] / n as f64; n];
                self.accumulate(x, &c);
            }
            Op::GatherRows { x, idx: rows } => {
                let xs = self.nodes[x].tensor.shape().to_vec();
                let inner: usize = xs[1..].iter().product();
                let mut c = vec![0.0; self.nodes[x].tensor.numel()];
                for (o, &i) in rows.iter().enumerate() {
                    for (acc, g) in c[i * inner..][..inner].iter_mut().zip(&gy[o * inner..][..inner]) {
                        *acc += g;
                    }
                }
                self.accumulate(x, &c);
            }
        }
    }

    fn backprop_group_norm(
        &mut self,
        gy: &[f64],
        x: usize,
        gamma: usize,
        beta: usize,
        groups: usize,
        eps: f64,
    ) {
        let xs = self.nodes[x].tensor.shape().to_vec();
        let (b, c, l) = (xs[0], xs[1], xs[2]);
        let cpg = c / groups;
        let m = (cpg * l) as f64;
        let xd = self.nodes[x].tensor.data();
        let gd = self.nodes[gamma].tensor.data();

        let mut dx = vec![0.0; b * c * l];
        let mut dgamma = vec![0.0; c];
        let mut dbeta = vec![0.0; c];

        for bi in 0..b {
            for g in 0..groups {
                let base = (bi * c + g * cpg) * l;
                let xg = &xd[base..][..cpg * l];
                let mu = xg.iter().sum::<f64>() / m;
                let var = xg.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / m;
                let inv = 1.0 / (var + eps).sqrt();

                // grads w.r.t. the normalized values, plus their group means
                let mut mean_gn = 0.0;
                let mut mean_gn_y = 0.0;
                for ci in 0..cpg {
                    let ch = g * cpg + ci;
                    for li in 0..l {
                        let i = base + ci * l + li;
                        let y = (xd[i] - mu) * inv;
                        let gn = gy[i] * gd[ch];
                        mean_gn += gn;
                        mean_gn_y += gn * y;
                        dgamma[ch] += gy[i] * y;
                        dbeta[ch] += gy[i];
                    }
                }
                mean_gn /= m;
                mean_gn_y /= m;
                for ci in 0..cpg {
                    let ch = g * cpg + ci;
                    for li in 0..l {
                        let i = base + ci * l + li;
                        let y = (xd[i] - mu) * inv;
                        let gn = gy[i] * gd[ch];
                        dx[i] = inv * (gn - mean_gn - y * mean_gn_y);
                    }
                }
            }
        }
        if self.wants_grad(x) {
            self.accumulate(x, &dx);
        }
        if self.wants_grad(gamma) {
            self.accumulate(gamma, &dgamma);
        }
        if self.wants_grad(beta) {
            self.accumulate(beta, &dbeta);
        }
    }
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn gelu_inner(x: f64) -> f64 {
    GELU_SCALE * (x + GELU_CUBIC * x * x * x)
}

pub(crate) fn matmul_kernel(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        let or = &mut out[i * n..][..n];
        for p in 0..k {
            let av = a[i * k + p];
            if av == 0.0 {
                continue;
            }
            let br = &b[p * n..][..n];
            for j in 0..n {
                or[j] += av * br[j];
            }
        }
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn conv1d_kernel(
    x: &[f64],
    w: &[f64],
    b: usize,
    cin: usize,
    l: usize,
    cout: usize,
    kw: usize,
    pad: usize,
) -> Vec<f64> {
    let lout = l + 2 * pad - kw + 1;
    let mut out = vec![0.0; b * cout * lout];
    for bi in 0..b {
        for o in 0..cout {
            let or = &mut out[(bi * cout + o) * lout..][..lout];
            for c in 0..cin {
                let xr = &x[(bi * cin + c) * l..][..l];
                for t in 0..kw {
                    let wv = w[(o * cin + c) * kw + t];
                    let jlo = pad.saturating_sub(t);
                    let jhi = lout.min(l + pad - t);
                    for j in jlo..jhi {
                        or[j] += xr[j + t - pad] * wv;
                    }
                }
            }
        }
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn group_norm_kernel(
    x: &[f64],
    gamma: &[f64],
    beta: &[f64],
    b: usize,
    c: usize,
    l: usize,
    groups: usize,
    eps: f64,
) -> Vec<f64> {
    let cpg = c / groups;
    let m = (cpg * l) as f64;
    let mut out = vec![0.0; b * c * l];
    for bi in 0..b {
        for g in 0..groups {
            let base = (bi * c + g * cpg) * l;
            let xg = &x[base..][..cpg * l];
            let mu = xg.iter().sum::<f64>() / m;
            let var = xg.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / m;
            let inv = 1.0 / (var + eps).sqrt();
            for ci in 0..cpg {
                let ch = g * cpg + ci;
                let (gm, bt) = (gamma[ch], beta[ch]);
                for li in 0..l {
                    let i = base + ci * l + li;
                    out[i] = gm * (x[i] - mu) * inv + bt;
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{Tape, Tensor};

    #[test]
    fn matmul_identity_passthrough() {
        let mut tape = Tape::new();
        let a = tape.constant(Tensor::new(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap());
        let eye = tape.constant(Tensor::new(vec![2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap());
        let y = tape.matmul(a, eye).unwrap();
        assert_eq!(tape.value(y).data(), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn reduce_sum_of_zeros_is_zero() {
        let mut tape = Tape::new();
        let z = tape.constant(Tensor::zeros(&[3, 4]));
        let s = tape.reduce_sum(z).unwrap();
        assert_eq!(tape.value(s).item().unwrap(), 0.0);
    }

    #[test]
    fn conv1d_valid_matches_hand_convolution() {
        // kernel [1,0,0] over signal [a,b,c,d], valid mode -> [a,b]
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::new(vec![1, 1, 4], vec![2.0, 3.0, 5.0, 7.0]).unwrap());
        let w = tape.constant(Tensor::new(vec![1, 1, 3], vec![1.0, 0.0, 0.0]).unwrap());
        let y = tape.conv1d(x, w, 0).unwrap();
        assert_eq!(tape.value(y).shape(), &[1, 1, 2]);
        // independent direct convolution
        let sig = [2.0, 3.0, 5.0, 7.0];
        let ker = [1.0, 0.0, 0.0];
        let expect: Vec<f64> = (0..2)
            .map(|j| (0..3).map(|t| sig[j + t] * ker[t]).sum())
            .collect();
        assert_eq!(tape.value(y).data(), expect.as_slice());
    }

    #[test]
    fn shape_mismatch_names_op_and_shapes() {
        let mut tape = Tape::new();
        let a = tape.constant(Tensor::zeros(&[2, 3]));
        let b = tape.constant(Tensor::zeros(&[3, 3]));
        let err = tape.add(a, b).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("add"), "{msg}");
        assert!(msg.contains("[2, 3]") && msg.contains("[3, 3]"), "{msg}");
    }

    #[test]
    fn sum_squares_gradient() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::from_slice(&[1.0, 2.0, 3.0]));
        let sq = tape.mul(x, x).unwrap();
        let loss = tape.reduce_sum(sq).unwrap();
        tape.backward(loss).unwrap();
        assert_eq!(tape.grad(x).unwrap().data(), &[2.0, 4.0, 6.0]);
    }

    #[test]
    fn constant_branch_gets_no_grad() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::from_slice(&[1.0, -2.0]));
        let k = tape.constant(Tensor::from_slice(&[5.0, 5.0]));
        let y = tape.mul(x, k).unwrap();
        let loss = tape.reduce_sum(y).unwrap();
        tape.backward(loss).unwrap();
        assert_eq!(tape.grad(x).unwrap().data(), &[5.0, 5.0]);
        assert!(tape.grad(k).is_none());
    }

    #[test]
    fn constant_function_has_zero_gradient() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::from_slice(&[1.0, 2.0]));
        let zero = tape.scale(x, 0.0).unwrap();
        let loss = tape.reduce_sum(zero).unwrap();
        tape.backward(loss).unwrap();
        assert_eq!(tape.grad(x).unwrap().data(), &[0.0, 0.0]);
    }

    #[test]
    fn branch_gradients_add_linearly() {
        // grad of (f + g) equals grad f + grad g computed separately
        let run = |with_g: bool, with_f: bool| -> Vec<f64> {
            let mut tape = Tape::new();
            let x = tape.param(Tensor::from_slice(&[0.5, -1.5, 2.0]));
            let mut terms = Vec::new();
            if with_f {
                let sq = tape.mul(x, x).unwrap();
                terms.push(tape.reduce_sum(sq).unwrap());
            }
            if with_g {
                let m = tape.mish(x).unwrap();
                terms.push(tape.reduce_sum(m).unwrap());
            }
            let loss = if terms.len() == 2 {
                tape.add(terms[0], terms[1]).unwrap()
            } else {
                terms[0]
            };
            tape.backward(loss).unwrap();
            tape.grad(x).unwrap().data().to_vec()
        };
        let both = run(true, true);
        let f = run(false, true);
        let g = run(true, false);
        for i in 0..3 {
            assert!((both[i] - (f[i] + g[i])).abs() < 1e-12);
        }
    }

    #[test]
    fn gather_and_concat_round_trip() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::new(vec![3, 2], vec![1., 2., 3., 4., 5., 6.]).unwrap());
        let g = tape.gather_rows(x, &[2, 0]).unwrap();
        assert_eq!(tape.value(g).data(), &[5., 6., 1., 2.]);
        let a = tape.slice(x, 0, 0, 1).unwrap();
        let b = tape.slice(x, 0, 1, 2).unwrap();
        let back = tape.concat(&[a, b], 0).unwrap();
        assert_eq!(tape.value(back).data(), tape.value(x).data());
    }
}
