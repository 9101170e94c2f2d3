//! Differentiable operations. Every op validates shapes up front and returns
//! a `Shape` error naming the operation on mismatch.

use super::gemm::{gemm, Mat};
use super::tensor::{numel, Tensor};
use crate::error::{Error, Result};

fn shape_err(op: &str, msg: String) -> Error {
    Error::Shape(format!("{op}: {msg}"))
}

fn broadcast_shape(op: &str, a: &[usize], b: &[usize]) -> Result<Vec<usize>> {
    let n = a.len().max(b.len());
    let mut out = vec![0; n];
    for i in 0..n {
        let da = if i + a.len() >= n { a[i + a.len() - n] } else { 1 };
        let db = if i + b.len() >= n { b[i + b.len() - n] } else { 1 };
        out[i] = match (da, db) {
            (x, y) if x == y => x,
            (1, y) => y,
            (x, 1) => x,
            _ => return Err(shape_err(op, format!("cannot broadcast {a:?} with {b:?}"))),
        };
    }
    Ok(out)
}

/// For each flat output index, the flat index of the broadcast input.
enum Bcast {
    Same,
    /// The input equals the trailing dims of the output.
    Suffix(usize),
    Map(Vec<usize>),
}

impl Bcast {
    fn new(out: &[usize], inp: &[usize]) -> Self {
        if out == inp {
            return Bcast::Same;
        }
        if inp.len() <= out.len() && out[out.len() - inp.len()..] == *inp {
            return Bcast::Suffix(numel(inp));
        }
        let n = out.len();
        let mut strides = vec![0usize; n];
        let mut s = 1;
        for i in (0..inp.len()).rev() {
            let o = n - inp.len() + i;
            strides[o] = if inp[i] == 1 { 0 } else { s };
            s *= inp[i];
        }
        let total = numel(out);
        let mut map = Vec::with_capacity(total);
        let mut idx = vec![0usize; n];
        let mut flat = 0usize;
        for _ in 0..total {
            map.push(flat);
            for d in (0..n).rev() {
                idx[d] += 1;
                flat += strides[d];
                if idx[d] < out[d] {
                    break;
                }
                flat -= strides[d] * idx[d];
                idx[d] = 0;
            }
        }
        Bcast::Map(map)
    }

    /// The input laid out in the output's shape.
    fn expand<'a>(&self, src: &'a [f64], n_out: usize) -> std::borrow::Cow<'a, [f64]> {
        match self {
            Bcast::Same => std::borrow::Cow::Borrowed(src),
            Bcast::Suffix(_) => std::borrow::Cow::Owned(src.iter().copied().cycle().take(n_out).collect()),
            Bcast::Map(m) => std::borrow::Cow::Owned(m.iter().map(|&j| src[j]).collect()),
        }
    }

    /// Sums an output-shaped gradient back onto the input.
    fn reduce(&self, g: &[f64], n_in: usize) -> Vec<f64> {
        match self {
            Bcast::Same => g.to_vec(),
            Bcast::Suffix(n) => {
                let mut out = vec![0.0; n_in];
                for chunk in g.chunks(*n) {
                    out.iter_mut().zip(chunk).for_each(|(o, v)| *o += v);
                }
                out
            }
            Bcast::Map(m) => {
                let mut out = vec![0.0; n_in];
                for (&j, v) in m.iter().zip(g) {
                    out[j] += v;
                }
                out
            }
        }
    }
}

#[derive(Clone, Copy)]
enum BinOp {
    Add,
    Sub,
    Mul,
}

fn binary(a: &Tensor, b: &Tensor, op: BinOp) -> Result<Tensor> {
    let name = match op {
        BinOp::Add => "add",
        BinOp::Sub => "sub",
        BinOp::Mul => "mul",
    };
    let shape = broadcast_shape(name, a.shape(), b.shape())?;
    let ia = Bcast::new(&shape, a.shape());
    let ib = Bcast::new(&shape, b.shape());
    let n = numel(&shape);
    let data = {
        let (da, db) = (a.data(), b.data());
        let (xa, xb) = (ia.expand(&da, n), ib.expand(&db, n));
        let pairs = xa.iter().zip(xb.iter());
        match op {
            BinOp::Add => pairs.map(|(x, y)| x + y).collect(),
            BinOp::Sub => pairs.map(|(x, y)| x - y).collect(),
            BinOp::Mul => pairs.map(|(x, y)| x * y).collect(),
        }
    };
    let (ac, bc) = (a.clone(), b.clone());
    Ok(Tensor::from_op(
        shape,
        data,
        vec![a.clone(), b.clone()],
        Box::new(move |g| {
            let (na, nb) = (ac.numel(), bc.numel());
            match op {
                BinOp::Add => vec![
                    ac.requires_grad().then(|| ia.reduce(g, na)),
                    bc.requires_grad().then(|| ib.reduce(g, nb)),
                ],
                BinOp::Sub => vec![
                    ac.requires_grad().then(|| ia.reduce(g, na)),
                    bc.requires_grad().then(|| {
                        let mut r = ib.reduce(g, nb);
                        r.iter_mut().for_each(|v| *v = -*v);
                        r
                    }),
                ],
                BinOp::Mul => {
                    let (da, db) = (ac.data(), bc.data());
                    let ga = ac.requires_grad().then(|| {
                        let prod: Vec<f64> = g.iter().zip(ib.expand(&db, g.len()).iter()).map(|(v, y)| v * y).collect();
                        ia.reduce(&prod, na)
                    });
                    let gb = bc.requires_grad().then(|| {
                        let prod: Vec<f64> = g.iter().zip(ia.expand(&da, g.len()).iter()).map(|(v, x)| v * x).collect();
                        ib.reduce(&prod, nb)
                    });
                    vec![ga, gb]
                }
            }
        }),
    ))
}

fn check_axis(op: &str, t: &Tensor, axis: usize) -> Result<()> {
    if axis >= t.ndim() {
        return Err(shape_err(op, format!("axis {axis} out of range for shape {:?}", t.shape())));
    }
    Ok(())
}

/// (outer, axis length, inner) split of a shape around `axis`.
fn split_at_axis(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    (numel(&shape[..axis]), shape[axis], numel(&shape[axis + 1..]))
}

impl Tensor {
    /// Elementwise sum with numpy-style broadcasting.
    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        binary(self, other, BinOp::Add)
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        binary(self, other, BinOp::Sub)
    }

    pub fn mul(&self, other: &Tensor) -> Result<Tensor> {
        binary(self, other, BinOp::Mul)
    }

    pub fn scale(&self, c: f64) -> Tensor {
        let data = self.data().iter().map(|v| v * c).collect();
        Tensor::from_op(
            self.shape().to_vec(),
            data,
            vec![self.clone()],
            Box::new(move |g| vec![Some(g.iter().map(|v| v * c).collect())]),
        )
    }

    pub fn relu(&self) -> Tensor {
        let data = self.data().iter().map(|v| v.max(0.0)).collect();
        let x = self.clone();
        Tensor::from_op(
            self.shape().to_vec(),
            data,
            vec![self.clone()],
            Box::new(move |g| {
                let d = x.data();
                vec![Some(
                    g.iter()
                        .zip(d.iter())
                        .map(|(g, &v)| if v > 0.0 { *g } else { 0.0 })
                        .collect(),
                )]
            }),
        )
    }

    /// Sum of all elements as a scalar.
    pub fn sum(&self) -> Tensor {
        let s = self.data().iter().sum();
        let n = self.numel();
        Tensor::from_op(vec![], vec![s], vec![self.clone()], Box::new(move |g| vec![Some(vec![g[0]; n])]))
    }

    /// Mean over `axis`, which is removed from the shape.
    pub fn mean_axis(&self, axis: usize) -> Result<Tensor> {
        check_axis("mean_axis", self, axis)?;
        let (outer, len, inner) = split_at_axis(self.shape(), axis);
        if len == 0 {
            return Err(shape_err("mean_axis", "empty axis".into()));
        }
        let mut shape = self.shape().to_vec();
        shape.remove(axis);
        let mut out = vec![0.0; outer * inner];
        {
            let d = self.data();
            for o in 0..outer {
                for l in 0..len {
                    let src = &d[(o * len + l) * inner..][..inner];
                    for (acc, v) in out[o * inner..][..inner].iter_mut().zip(src) {
                        *acc += v;
                    }
                }
            }
        }
        let inv = 1.0 / len as f64;
        out.iter_mut().for_each(|v| *v *= inv);
        Ok(Tensor::from_op(
            shape,
            out,
            vec![self.clone()],
            Box::new(move |g| {
                let mut gx = vec![0.0; outer * len * inner];
                for o in 0..outer {
                    let src = &g[o * inner..][..inner];
                    for l in 0..len {
                        for (dst, v) in gx[(o * len + l) * inner..][..inner].iter_mut().zip(src) {
                            *dst = v * inv;
                        }
                    }
                }
                vec![Some(gx)]
            }),
        ))
    }

    pub fn reshape(&self, shape: &[usize]) -> Result<Tensor> {
        if numel(shape) != self.numel() {
            return Err(shape_err(
                "reshape",
                format!("cannot view {:?} as {shape:?}", self.shape()),
            ));
        }
        Ok(Tensor::from_op(
            shape.to_vec(),
            self.to_vec(),
            vec![self.clone()],
            Box::new(|g| vec![Some(g.to_vec())]),
        ))
    }

    /// Reorders axes: output axis `i` is input axis `axes[i]`.
    pub fn permute(&self, axes: &[usize]) -> Result<Tensor> {
        let n = self.ndim();
        let mut seen = vec![false; n];
        if axes.len() != n || axes.iter().any(|&a| a >= n || std::mem::replace(&mut seen[a], true)) {
            return Err(shape_err(
                "permute",
                format!("{axes:?} is not a permutation of {n} axes"),
            ));
        }
        let in_shape = self.shape().to_vec();
        let out_shape: Vec<usize> = axes.iter().map(|&a| in_shape[a]).collect();
        let data = permute_data(&self.data(), &in_shape, axes);
        let mut inverse = vec![0; n];
        for (i, &a) in axes.iter().enumerate() {
            inverse[a] = i;
        }
        let out_shape_c = out_shape.clone();
        Ok(Tensor::from_op(
            out_shape,
            data,
            vec![self.clone()],
            Box::new(move |g| vec![Some(permute_data(g, &out_shape_c, &inverse))]),
        ))
    }

    pub fn transpose(&self, a: usize, b: usize) -> Result<Tensor> {
        check_axis("transpose", self, a)?;
        check_axis("transpose", self, b)?;
        let mut axes: Vec<usize> = (0..self.ndim()).collect();
        axes.swap(a, b);
        self.permute(&axes)
    }

    /// The slice `start..start + len` along `axis`.
    pub fn narrow(&self, axis: usize, start: usize, len: usize) -> Result<Tensor> {
        check_axis("narrow", self, axis)?;
        let (outer, full, inner) = split_at_axis(self.shape(), axis);
        if start + len > full {
            return Err(shape_err(
                "narrow",
                format!("range {start}..{} exceeds axis length {full}", start + len),
            ));
        }
        let mut shape = self.shape().to_vec();
        shape[axis] = len;
        let mut out = Vec::with_capacity(outer * len * inner);
        {
            let d = self.data();
            for o in 0..outer {
                out.extend_from_slice(&d[(o * full + start) * inner..][..len * inner]);
            }
        }
        Ok(Tensor::from_op(
            shape,
            out,
            vec![self.clone()],
            Box::new(move |g| {
                let mut gx = vec![0.0; outer * full * inner];
                for o in 0..outer {
                    gx[(o * full + start) * inner..][..len * inner]
                        .copy_from_slice(&g[o * len * inner..][..len * inner]);
                }
                vec![Some(gx)]
            }),
        ))
    }

    /// Joins tensors along `axis`; all other dims must agree.
    pub fn concat(parts: &[Tensor], axis: usize) -> Result<Tensor> {
        let first = parts
            .first()
            .ok_or_else(|| shape_err("concat", "no inputs".into()))?;
        check_axis("concat", first, axis)?;
        for p in parts {
            let ok = p.ndim() == first.ndim()
                && p.shape()
                    .iter()
                    .zip(first.shape())
                    .enumerate()
                    .all(|(i, (x, y))| i == axis || x == y);
            if !ok {
                return Err(shape_err(
                    "concat",
                    format!("incompatible shapes {:?} and {:?} along axis {axis}", first.shape(), p.shape()),
                ));
            }
        }
        let (outer, _, inner) = split_at_axis(first.shape(), axis);
        let lens: Vec<usize> = parts.iter().map(|p| p.shape()[axis]).collect();
        let total: usize = lens.iter().sum();
        let mut shape = first.shape().to_vec();
        shape[axis] = total;
        let mut out = Vec::with_capacity(outer * total * inner);
        {
            let datas: Vec<_> = parts.iter().map(Tensor::data).collect();
            for o in 0..outer {
                for (d, &l) in datas.iter().zip(&lens) {
                    out.extend_from_slice(&d[o * l * inner..][..l * inner]);
                }
            }
        }
        let flags: Vec<bool> = parts.iter().map(Tensor::requires_grad).collect();
        Ok(Tensor::from_op(
            shape,
            out,
            parts.to_vec(),
            Box::new(move |g| {
                let mut grads: Vec<Option<Vec<f64>>> = lens
                    .iter()
                    .zip(&flags)
                    .map(|(&l, &f)| f.then(|| Vec::with_capacity(outer * l * inner)))
                    .collect();
                let mut off = 0;
                for _ in 0..outer {
                    for (gp, &l) in grads.iter_mut().zip(&lens) {
                        if let Some(gp) = gp {
                            gp.extend_from_slice(&g[off..off + l * inner]);
                        }
                        off += l * inner;
                    }
                }
                grads
            }),
        ))
    }

    /// Rows of a `[n, d]` table: output shape `[indices.len(), d]`.
    pub fn gather_rows(&self, indices: &[usize]) -> Result<Tensor> {
        if self.ndim() != 2 {
            return Err(shape_err("gather_rows", format!("table must be 2-D, got {:?}", self.shape())));
        }
        let (n, d) = (self.shape()[0], self.shape()[1]);
        if let Some(&bad) = indices.iter().find(|&&i| i >= n) {
            return Err(Error::Bounds(format!("row {bad} out of range for a table of {n} rows")));
        }
        let mut out = Vec::with_capacity(indices.len() * d);
        {
            let t = self.data();
            for &i in indices {
                out.extend_from_slice(&t[i * d..][..d]);
            }
        }
        let idx = indices.to_vec();
        Ok(Tensor::from_op(
            vec![indices.len(), d],
            out,
            vec![self.clone()],
            Box::new(move |g| {
                let mut gt = vec![0.0; n * d];
                for (r, &i) in idx.iter().enumerate() {
                    for (dst, v) in gt[i * d..][..d].iter_mut().zip(&g[r * d..][..d]) {
                        *dst += v;
                    }
                }
                vec![Some(gt)]
            }),
        ))
    }

    /// Softmax over the last axis.
    pub fn softmax(&self) -> Result<Tensor> {
        let d = *self
            .shape()
            .last()
            .ok_or_else(|| shape_err("softmax", "needs at least one axis".into()))?;
        let mut y = self.to_vec();
        for row in y.chunks_mut(d) {
            let mx = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut s = 0.0;
            for v in row.iter_mut() {
                *v = (*v - mx).exp();
                s += *v;
            }
            for v in row.iter_mut() {
                *v /= s;
            }
        }
        let yc = y.clone();
        Ok(Tensor::from_op(
            self.shape().to_vec(),
            y,
            vec![self.clone()],
            Box::new(move |g| {
                let mut gx = vec![0.0; g.len()];
                for ((gx, g), y) in gx.chunks_mut(d).zip(g.chunks(d)).zip(yc.chunks(d)) {
                    let dot: f64 = g.iter().zip(y).map(|(a, b)| a * b).sum();
                    for ((o, gi), yi) in gx.iter_mut().zip(g).zip(y) {
                        *o = yi * (gi - dot);
                    }
                }
                vec![Some(gx)]
            }),
        ))
    }

    /// Normalizes the last axis to zero mean and unit variance, then applies
    /// a per-feature gain and bias.
    pub fn layer_norm(&self, gain: &Tensor, bias: &Tensor, eps: f64) -> Result<Tensor> {
        let d = *self
            .shape()
            .last()
            .ok_or_else(|| shape_err("layer_norm", "needs at least one axis".into()))?;
        if gain.shape() != [d] || bias.shape() != [d] {
            return Err(shape_err(
                "layer_norm",
                format!(
                    "gain {:?} and bias {:?} must both be [{d}]",
                    gain.shape(),
                    bias.shape()
                ),
            ));
        }
        let rows = self.numel() / d.max(1);
        let mut xhat = self.to_vec();
        let mut rstd = vec![0.0; rows];
        for (row, r) in xhat.chunks_mut(d).zip(rstd.iter_mut()) {
            let mu = row.iter().sum::<f64>() / d as f64;
            let var = row.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / d as f64;
            *r = 1.0 / (var + eps).sqrt();
            for v in row.iter_mut() {
                *v = (*v - mu) * *r;
            }
        }
        let out = {
            let (gd, bd) = (gain.data(), bias.data());
            xhat.chunks(d)
                .flat_map(|row| row.iter().zip(gd.iter()).zip(bd.iter()).map(|((x, g), b)| x * g + b))
                .collect()
        };
        let (x, gc, bc) = (self.clone(), gain.clone(), bias.clone());
        Ok(Tensor::from_op(
            self.shape().to_vec(),
            out,
            vec![self.clone(), gain.clone(), bias.clone()],
            Box::new(move |g| {
                let gd = gc.data();
                let mut dgain = vec![0.0; d];
                let mut dbias = vec![0.0; d];
                let mut dx = vec![0.0; g.len()];
                let mut dxhat = vec![0.0; d];
                for r in 0..rows {
                    let gr = &g[r * d..][..d];
                    let xr = &xhat[r * d..][..d];
                    let (mut s1, mut s2) = (0.0, 0.0);
                    for j in 0..d {
                        dgain[j] += gr[j] * xr[j];
                        dbias[j] += gr[j];
                        dxhat[j] = gr[j] * gd[j];
                        s1 += dxhat[j];
                        s2 += dxhat[j] * xr[j];
                    }
                    let scale = rstd[r] / d as f64;
                    for j in 0..d {
                        dx[r * d + j] = scale * (d as f64 * dxhat[j] - s1 - xr[j] * s2);
                    }
                }
                vec![
                    x.requires_grad().then_some(dx),
                    gc.requires_grad().then_some(dgain),
                    bc.requires_grad().then_some(dbias),
                ]
            }),
        ))
    }

    /// Mean cross-entropy of `[batch, classes]` logits against class indices.
    pub fn cross_entropy(&self, targets: &[usize]) -> Result<Tensor> {
        if self.ndim() != 2 || self.shape()[0] != targets.len() {
            return Err(shape_err(
                "cross_entropy",
                format!("logits {:?} do not match {} targets", self.shape(), targets.len()),
            ));
        }
        let (b, c) = (self.shape()[0], self.shape()[1]);
        if b == 0 {
            return Err(shape_err("cross_entropy", "empty batch".into()));
        }
        if let Some(&bad) = targets.iter().find(|&&t| t >= c) {
            return Err(Error::Bounds(format!("target class {bad} out of range for {c} classes")));
        }
        let mut probs = self.to_vec();
        let mut loss = 0.0;
        for (row, &t) in probs.chunks_mut(c).zip(targets) {
            let mx = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = mx + row.iter().map(|v| (v - mx).exp()).sum::<f64>().ln();
            loss += lse - row[t];
            for v in row.iter_mut() {
                *v = (*v - lse).exp();
            }
        }
        loss /= b as f64;
        let tg = targets.to_vec();
        Ok(Tensor::from_op(
            vec![],
            vec![loss],
            vec![self.clone()],
            Box::new(move |g| {
                let s = g[0] / b as f64;
                let mut gx = probs.clone();
                for (row, &t) in gx.chunks_mut(c).zip(&tg) {
                    row[t] -= 1.0;
                    row.iter_mut().for_each(|v| *v *= s);
                }
                vec![Some(gx)]
            }),
        ))
    }

    /// Matrix product over the last two axes. A 2-D right operand is shared
    /// by every leading index of the left; otherwise leading dims must match.
    pub fn matmul(&self, other: &Tensor) -> Result<Tensor> {
        let (a, b) = (self, other);
        if a.ndim() < 2 || b.ndim() < 2 {
            return Err(shape_err("matmul", format!("operands {:?} and {:?} need ≥ 2 axes", a.shape(), b.shape())));
        }
        let (p, q) = (a.shape()[a.ndim() - 2], a.shape()[a.ndim() - 1]);
        let (q2, r) = (b.shape()[b.ndim() - 2], b.shape()[b.ndim() - 1]);
        if q != q2 {
            return Err(shape_err("matmul", format!("inner dims differ: {:?} × {:?}", a.shape(), b.shape())));
        }
        let lead_a = &a.shape()[..a.ndim() - 2];
        let shared_rhs = b.ndim() == 2;
        if !shared_rhs && lead_a != &b.shape()[..b.ndim() - 2] {
            return Err(shape_err("matmul", format!("batch dims differ: {:?} × {:?}", a.shape(), b.shape())));
        }
        let batch = numel(lead_a);
        let mut shape = lead_a.to_vec();
        shape.extend([p, r]);
        let mut out = vec![0.0; batch * p * r];
        {
            let (da, db) = (a.data(), b.data());
            if shared_rhs {
                gemm(batch * p, q, r, Mat::rows(&da, q), Mat::rows(&db, r), &mut out, 0.0);
            } else {
                for i in 0..batch {
                    gemm(
                        p,
                        q,
                        r,
                        Mat::rows(&da[i * p * q..][..p * q], q),
                        Mat::rows(&db[i * q * r..][..q * r], r),
                        &mut out[i * p * r..][..p * r],
                        0.0,
                    );
                }
            }
        }
        let (ac, bc) = (a.clone(), b.clone());
        Ok(Tensor::from_op(
            shape,
            out,
            vec![a.clone(), b.clone()],
            Box::new(move |g| {
                let (da, db) = (ac.data(), bc.data());
                let ga = ac.requires_grad().then(|| {
                    // dA = G · Bᵀ
                    let mut ga = vec![0.0; batch * p * q];
                    if shared_rhs {
                        gemm(batch * p, r, q, Mat::rows(g, r), Mat::cols(&db, r), &mut ga, 0.0);
                    } else {
                        for i in 0..batch {
                            gemm(
                                p,
                                r,
                                q,
                                Mat::rows(&g[i * p * r..][..p * r], r),
                                Mat::cols(&db[i * q * r..][..q * r], r),
                                &mut ga[i * p * q..][..p * q],
                                0.0,
                            );
                        }
                    }
                    ga
                });
                let gb = bc.requires_grad().then(|| {
                    // dB = Aᵀ · G
                    if shared_rhs {
                        let mut gb = vec![0.0; q * r];
                        gemm(q, batch * p, r, Mat::cols(&da, q), Mat::rows(g, r), &mut gb, 0.0);
                        gb
                    } else {
                        let mut gb = vec![0.0; batch * q * r];
                        for i in 0..batch {
                            gemm(
                                q,
                                p,
                                r,
                                Mat::cols(&da[i * p * q..][..p * q], q),
                                Mat::rows(&g[i * p * r..][..p * r], r),
                                &mut gb[i * q * r..][..q * r],
                                0.0,
                            );
                        }
                        gb
                    }
                });
                vec![ga, gb]
            }),
        ))
    }

    /// 1-D convolution (cross-correlation) of `[batch, c_in, len]` input with
    /// `[c_out, c_in, width]` filters and zero padding on both sides.
    pub fn conv1d(&self, weight: &Tensor, bias: Option<&Tensor>, stride: usize, padding: usize) -> Result<Tensor> {
        if self.ndim() != 3 || weight.ndim() != 3 || weight.shape()[1] != self.shape()[1] {
            return Err(shape_err(
                "conv1d",
                format!("input {:?} and weight {:?} are incompatible", self.shape(), weight.shape()),
            ));
        }
        let (bsz, c_in, len) = (self.shape()[0], self.shape()[1], self.shape()[2]);
        let (c_out, width) = (weight.shape()[0], weight.shape()[2]);
        if let Some(b) = bias {
            if b.shape() != [c_out] {
                return Err(shape_err("conv1d", format!("bias {:?} must be [{c_out}]", b.shape())));
            }
        }
        if stride == 0 || len + 2 * padding < width {
            return Err(shape_err(
                "conv1d",
                format!("length {len} with padding {padding} is shorter than filter width {width}"),
            ));
        }
        let l_out = (len + 2 * padding - width) / stride + 1;
        let geo = ConvGeometry { bsz, c_in, len, width, stride, padding, l_out };
        let cols = geo.im2col(&self.data());
        let ck = c_in * width;
        // [bsz·l_out, c_out] = cols · Wᵀ
        let mut rows_out = vec![0.0; bsz * l_out * c_out];
        gemm(bsz * l_out, ck, c_out, Mat::rows(&cols, ck), Mat::cols(&weight.data(), ck), &mut rows_out, 0.0);
        let mut out = vec![0.0; bsz * c_out * l_out];
        {
            let bd = bias.map(|b| b.data());
            for b in 0..bsz {
                for t in 0..l_out {
                    let src = &rows_out[(b * l_out + t) * c_out..][..c_out];
                    for (o, v) in src.iter().enumerate() {
                        let add = bd.as_ref().map_or(0.0, |bd| bd[o]);
                        out[(b * c_out + o) * l_out + t] = v + add;
                    }
                }
            }
        }
        let mut parents = vec![self.clone(), weight.clone()];
        parents.extend(bias.cloned());
        let (x, w) = (self.clone(), weight.clone());
        let bias_grad = bias.map(Tensor::requires_grad);
        Ok(Tensor::from_op(
            vec![bsz, c_out, l_out],
            out,
            parents,
            Box::new(move |g| {
                // g as [bsz·l_out, c_out]
                let mut g2 = vec![0.0; bsz * l_out * c_out];
                for b in 0..bsz {
                    for o in 0..c_out {
                        let src = &g[(b * c_out + o) * l_out..][..l_out];
                        for (t, v) in src.iter().enumerate() {
                            g2[(b * l_out + t) * c_out + o] = *v;
                        }
                    }
                }
                let gw = w.requires_grad().then(|| {
                    let cols = geo.im2col(&x.data());
                    let mut gw = vec![0.0; c_out * ck];
                    gemm(c_out, bsz * l_out, ck, Mat::cols(&g2, c_out), Mat::rows(&cols, ck), &mut gw, 0.0);
                    gw
                });
                let gx = x.requires_grad().then(|| {
                    let mut dcols = vec![0.0; bsz * l_out * ck];
                    gemm(bsz * l_out, c_out, ck, Mat::rows(&g2, c_out), Mat::rows(&w.data(), ck), &mut dcols, 0.0);
                    geo.col2im(&dcols)
                });
                let mut grads = vec![gx, gw];
                if let Some(flag) = bias_grad {
                    grads.push(flag.then(|| {
                        let mut gb = vec![0.0; c_out];
                        for row in g2.chunks(c_out) {
                            for (a, v) in gb.iter_mut().zip(row) {
                                *a += v;
                            }
                        }
                        gb
                    }));
                }
                grads
            }),
        ))
    }
}

fn permute_data(data: &[f64], shape: &[usize], axes: &[usize]) -> Vec<f64> {
    let n = shape.len();
    let mut in_strides = vec![1usize; n];
    for i in (0..n.saturating_sub(1)).rev() {
        in_strides[i] = in_strides[i + 1] * shape[i + 1];
    }
    let out_shape: Vec<usize> = axes.iter().map(|&a| shape[a]).collect();
    let strides: Vec<usize> = axes.iter().map(|&a| in_strides[a]).collect();
    let total = data.len();
    let mut out = Vec::with_capacity(total);
    if total == 0 {
        return out;
    }
    // Walk the output in order; the innermost axis is copied with its stride.
    let inner_len = out_shape.last().copied().unwrap_or(1);
    let inner_stride = strides.last().copied().unwrap_or(1);
    let outer_dims = &out_shape[..n.saturating_sub(1)];
    let outer_strides = &strides[..n.saturating_sub(1)];
    let mut idx = vec![0usize; outer_dims.len()];
    let mut base = 0usize;
    for _ in 0..total / inner_len.max(1) {
        for j in 0..inner_len {
            out.push(data[base + j * inner_stride]);
        }
        for d in (0..outer_dims.len()).rev() {
            idx[d] += 1;
            base += outer_strides[d];
            if idx[d] < outer_dims[d] {
                break;
            }
            base -= outer_strides[d] * idx[d];
            idx[d] = 0;
        }
    }
    out
}

#[derive(Clone, Copy)]
struct ConvGeometry {
    bsz: usize,
    c_in: usize,
    len: usize,
    width: usize,
    stride: usize,
    padding: usize,
    l_out: usize,
}

impl ConvGeometry {
    /// Source index into the unpadded input for output step `t`, tap `j`.
    fn source(&self, t: usize, j: usize) -> Option<usize> {
        (t * self.stride + j)
            .checked_sub(self.padding)
            .filter(|&s| s < self.len)
    }

    /// `[bsz·l_out, c_in·width]` patch matrix.
    fn im2col(&self, x: &[f64]) -> Vec<f64> {
        let ck = self.c_in * self.width;
        let mut cols = vec![0.0; self.bsz * self.l_out * ck];
        for b in 0..self.bsz {
            for t in 0..self.l_out {
                let row = &mut cols[(b * self.l_out + t) * ck..][..ck];
                for c in 0..self.c_in {
                    let xc = &x[(b * self.c_in + c) * self.len..][..self.len];
                    for j in 0..self.width {
                        if let Some(s) = self.source(t, j) {
                            row[c * self.width + j] = xc[s];
                        }
                    }
                }
            }
        }
        cols
    }

    fn col2im(&self, dcols: &[f64]) -> Vec<f64> {
        let ck = self.c_in * self.width;
        let mut dx = vec![0.0; self.bsz * self.c_in * self.len];
        for b in 0..self.bsz {
            for t in 0..self.l_out {
                let row = &dcols[(b * self.l_out + t) * ck..][..ck];
                for c in 0..self.c_in {
                    let base = (b * self.c_in + c) * self.len;
                    for j in 0..self.width {
                        if let Some(s) = self.source(t, j) {
                            dx[base + s] += row[c * self.width + j];
                        }
                    }
                }
            }
        }
        dx
    }
}
