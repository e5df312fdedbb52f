use std::collections::hash_map::DefaultHasher;
use std::hash::Hasher;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::layer::{Compiler, ConvGeom, LayerSpec, Node, ParamDecl, ParamRole, PoolGeom};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::seed::mix;

static NEXT_ID: AtomicU64 = AtomicU64::new(1);

fn fresh_id() -> u64 {
    NEXT_ID.fetch_add(1, Ordering::Relaxed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// A layer list with its parameters.
///
/// Every clone gets a new identity, and any mutable access to the parameters
/// bumps a version counter, so a [`Cache`] can only be used for backward with
/// the exact parameters that produced it.
#[derive(Debug)]
pub struct Network<T> {
    input_shape: Vec<usize>,
    output_shape: Vec<usize>,
    layers: Vec<LayerSpec>,
    nodes: Vec<Node>,
    decls: Vec<ParamDecl>,
    params: Vec<Tensor<T>>,
    buffers: Vec<Tensor<T>>,
    seed: u64,
    id: u64,
    version: u64,
}

impl<T: Scalar> Clone for Network<T> {
    fn clone(&self) -> Self {
        Network {
            input_shape: self.input_shape.clone(),
            output_shape: self.output_shape.clone(),
            layers: self.layers.clone(),
            nodes: self.nodes.clone(),
            decls: self.decls.clone(),
            params: self.params.clone(),
            buffers: self.buffers.clone(),
            seed: self.seed,
            id: fresh_id(),
            version: 0,
        }
    }
}

/// Intermediate values from [`Network::forward`] needed by the backward pass.
#[derive(Debug, Clone)]
pub struct Cache<T> {
    model_id: u64,
    version: u64,
    batch: usize,
    mode: Mode,
    entries: Vec<Entry<T>>,
}

#[derive(Debug, Clone)]
enum Entry<T> {
    Conv { cols: Vec<T> },
    Pool { argmax: Vec<usize> },
    Dense { input: Vec<T> },
    Relu { mask: Vec<bool> },
    Dropout { mask: Option<Vec<T>> },
    Flatten,
    BatchNorm {
        xhat: Vec<T>,
        inv_std: Vec<T>,
        batch_mean: Vec<T>,
        batch_var: Vec<T>,
        train: bool,
    },
    GlobalAvgPool,
    Residual { main: Vec<Entry<T>>, shortcut: Vec<Entry<T>> },
}

impl<T: Scalar> Cache<T> {
    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Hash of every ReLU on/off pattern and max-pool routing decision.
    /// Two forwards with equal signatures run through the same linear piece.
    pub fn signature(&self) -> u64 {
        fn walk<T>(entries: &[Entry<T>], h: &mut DefaultHasher) {
            for e in entries {
                match e {
                    Entry::Relu { mask } => {
                        for &m in mask {
                            h.write_u8(m as u8);
                        }
                    }
                    Entry::Pool { argmax } => {
                        for &a in argmax {
                            h.write_usize(a);
                        }
                    }
                    Entry::Residual { main, shortcut } => {
                        walk(main, h);
                        walk(shortcut, h);
                    }
                    _ => {}
                }
            }
        }
        let mut h = DefaultHasher::new();
        walk(&self.entries, &mut h);
        h.finish()
    }
}

fn he_uniform<T: Scalar>(shape: Vec<usize>, fan_in: usize, seed: u64) -> Tensor<T> {
    let limit = (6.0 / fan_in.max(1) as f64).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor::from_fn(shape, |_| T::lit(rng.gen_range(-limit..limit)))
}

impl<T: Scalar> Network<T> {
    /// Compiles `layers` against a per-sample `input_shape` and initializes
    /// weights He-uniform (one seeded stream per tensor), biases to zero.
    pub fn new(input_shape: &[usize], layers: Vec<LayerSpec>, seed: u64) -> Result<Self> {
        if input_shape.is_empty() || input_shape.contains(&0) {
            return Err(Error::dim("input", format!("invalid input shape {input_shape:?}")));
        }
        let mut compiler = Compiler::default();
        let (nodes, output_shape) = compiler.compile(&layers, input_shape)?;
        let params = compiler
            .params
            .iter()
            .enumerate()
            .map(|(i, d)| match d.role {
                ParamRole::Weight { fan_in } => he_uniform(d.shape.clone(), fan_in, mix(&[seed, i as u64])),
                ParamRole::Bias | ParamRole::Beta => Tensor::zeros(d.shape.clone()),
                ParamRole::Gamma => Tensor::filled(d.shape.clone(), T::one()),
            })
            .collect();
        // running mean then running variance for each batch-norm layer
        let buffers = compiler
            .buffers
            .iter()
            .enumerate()
            .map(|(i, s)| Tensor::filled(s.clone(), if i % 2 == 0 { T::zero() } else { T::one() }))
            .collect();
        Ok(Network {
            input_shape: input_shape.to_vec(),
            output_shape,
            layers,
            nodes,
            decls: compiler.params,
            params,
            buffers,
            seed,
            id: fresh_id(),
            version: 0,
        })
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn output_shape(&self) -> &[usize] {
        &self.output_shape
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(Tensor::len).sum()
    }

    pub fn param_names(&self) -> Vec<&str> {
        self.decls.iter().map(|d| d.name.as_str()).collect()
    }

    pub fn params(&self) -> &[Tensor<T>] {
        &self.params
    }

    /// Mutable parameter access; invalidates outstanding caches.
    pub fn params_mut(&mut self) -> &mut [Tensor<T>] {
        self.version += 1;
        &mut self.params
    }

    pub fn set_params(&mut self, params: Vec<Tensor<T>>) -> Result<()> {
        check_shapes("parameters", &self.params, &params)?;
        self.version += 1;
        self.params = params;
        Ok(())
    }

    pub fn buffers(&self) -> &[Tensor<T>] {
        &self.buffers
    }

    pub fn set_buffers(&mut self, buffers: Vec<Tensor<T>>) -> Result<()> {
        check_shapes("buffers", &self.buffers, &buffers)?;
        self.version += 1;
        self.buffers = buffers;
        Ok(())
    }

    /// Same layers and values in another precision.
    pub fn cast<U: Scalar>(&self) -> Network<U> {
        Network {
            input_shape: self.input_shape.clone(),
            output_shape: self.output_shape.clone(),
            layers: self.layers.clone(),
            nodes: self.nodes.clone(),
            decls: self.decls.clone(),
            params: self.params.iter().map(Tensor::cast).collect(),
            buffers: self.buffers.iter().map(Tensor::cast).collect(),
            seed: self.seed,
            id: fresh_id(),
            version: 0,
        }
    }

    /// Runs the layer list on a batch shaped `[N, ..input_shape]`.
    ///
    /// Dropout masks come from `rng_seed` and are only drawn in train mode.
    /// Batch norm normalizes with batch statistics in train mode; call
    /// [`Network::update_running_stats`] to fold them into the buffers.
    pub fn forward(&self, x: &Tensor<T>, mode: Mode, rng_seed: u64) -> Result<(Tensor<T>, Cache<T>)> {
        let shape = x.shape();
        if shape.len() != self.input_shape.len() + 1 || shape[1..] != self.input_shape[..] || shape[0] == 0 {
            return Err(Error::dim(
                "input",
                format!("batch shape {shape:?} does not match [N, {:?}]", self.input_shape),
            ));
        }
        let n = shape[0];
        let (y, entries) = self.forward_seq(&self.nodes, x.data().to_vec(), n, mode, rng_seed, None);
        if !y.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("forward output".into()));
        }
        let mut out_shape = vec![n];
        out_shape.extend_from_slice(&self.output_shape);
        let cache = Cache {
            model_id: self.id,
            version: self.version,
            batch: n,
            mode,
            entries,
        };
        Ok((Tensor::new(out_shape, y)?, cache))
    }

    /// Forward pass that reuses the ReLU masks and max-pool routes recorded
    /// in `pattern` instead of recomputing them, so the result stays on one
    /// linear piece of the network. Used by the gradient checker.
    pub fn forward_with_pattern(&self, x: &Tensor<T>, mode: Mode, rng_seed: u64, pattern: &Cache<T>) -> Result<Tensor<T>> {
        let n = x.shape()[0];
        if pattern.batch != n || x.shape()[1..] != self.input_shape[..] {
            return Err(Error::dim("input", "batch does not match the recorded pattern"));
        }
        let (y, _) = self.forward_seq(&self.nodes, x.data().to_vec(), n, mode, rng_seed, Some(&pattern.entries));
        let mut shape = vec![n];
        shape.extend_from_slice(&self.output_shape);
        Tensor::new(shape, y)
    }

    /// Eval-mode forward without keeping the cache.
    pub fn predict(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(self.forward(x, Mode::Eval, 0)?.0)
    }

    /// Gradients of every parameter given the upstream gradient of the output.
    pub fn backward(&self, cache: &Cache<T>, dout: &Tensor<T>) -> Result<Vec<Tensor<T>>> {
        Ok(self.backward_impl(cache, dout, false)?.0)
    }

    /// Like [`Network::backward`], also returning the gradient of the input batch.
    pub fn backward_with_input(&self, cache: &Cache<T>, dout: &Tensor<T>) -> Result<(Vec<Tensor<T>>, Tensor<T>)> {
        let (grads, dx) = self.backward_impl(cache, dout, true)?;
        let mut shape = vec![cache.batch];
        shape.extend_from_slice(&self.input_shape);
        Ok((grads, Tensor::new(shape, dx)?))
    }

    fn backward_impl(&self, cache: &Cache<T>, dout: &Tensor<T>, input_grad: bool) -> Result<(Vec<Tensor<T>>, Vec<T>)> {
        if cache.model_id != self.id || cache.version != self.version {
            return Err(Error::StaleCache(format!(
                "cache from model {} v{}, backward on model {} v{}",
                cache.model_id, cache.version, self.id, self.version
            )));
        }
        let mut expect = vec![cache.batch];
        expect.extend_from_slice(&self.output_shape);
        if dout.shape() != expect.as_slice() {
            return Err(Error::dim(
                "backward",
                format!("upstream gradient {:?}, expected {expect:?}", dout.shape()),
            ));
        }
        let mut grads: Vec<Tensor<T>> = self.params.iter().map(|p| Tensor::zeros(p.shape().to_vec())).collect();
        let dx = self.backward_seq(&self.nodes, &cache.entries, dout.data().to_vec(), cache.batch, &mut grads, input_grad);
        if !grads.iter().all(Tensor::all_finite) {
            return Err(Error::NonFinite("parameter gradients".into()));
        }
        Ok((grads, dx))
    }

    /// Folds train-mode batch statistics into the batch-norm running buffers.
    pub fn update_running_stats(&mut self, cache: &Cache<T>) {
        fn walk<T: Scalar>(nodes: &[Node], entries: &[Entry<T>], buffers: &mut [Tensor<T>]) {
            for (node, entry) in nodes.iter().zip(entries) {
                match (node, entry) {
                    (
                        Node::BatchNorm { mean, var, momentum, .. },
                        Entry::BatchNorm { batch_mean, batch_var, train: true, .. },
                    ) => {
                        let m = T::lit(*momentum);
                        let r = T::one() - m;
                        for (b, &v) in buffers[*mean].data_mut().iter_mut().zip(batch_mean) {
                            *b = m * *b + r * v;
                        }
                        for (b, &v) in buffers[*var].data_mut().iter_mut().zip(batch_var) {
                            *b = m * *b + r * v;
                        }
                    }
                    (Node::Residual { main, shortcut }, Entry::Residual { main: em, shortcut: es }) => {
                        walk(main, em, buffers);
                        walk(shortcut, es, buffers);
                    }
                    _ => {}
                }
            }
        }
        if cache.model_id == self.id {
            walk(&self.nodes, &cache.entries, &mut self.buffers);
        }
    }

    fn forward_seq(
        &self,
        nodes: &[Node],
        mut x: Vec<T>,
        n: usize,
        mode: Mode,
        seed: u64,
        frozen: Option<&[Entry<T>]>,
    ) -> (Vec<T>, Vec<Entry<T>>) {
        let mut entries = Vec::with_capacity(nodes.len());
        for (i, node) in nodes.iter().enumerate() {
            let (y, e) = self.forward_node(node, x, n, mode, seed, frozen.map(|f| &f[i]));
            entries.push(e);
            x = y;
        }
        (x, entries)
    }

    fn forward_node(
        &self,
        node: &Node,
        x: Vec<T>,
        n: usize,
        mode: Mode,
        seed: u64,
        frozen: Option<&Entry<T>>,
    ) -> (Vec<T>, Entry<T>) {
        match (node, frozen) {
            (Node::Relu, Some(Entry::Relu { mask })) => {
                let y = x.iter().zip(mask).map(|(&v, &m)| if m { v } else { T::zero() }).collect();
                return (y, Entry::Relu { mask: mask.clone() });
            }
            (Node::Pool(_), Some(Entry::Pool { argmax })) => {
                let y = argmax.iter().map(|&a| x[a]).collect();
                return (y, Entry::Pool { argmax: argmax.clone() });
            }
            _ => {}
        }
        match node {
            Node::Conv(g) => {
                let (y, cols) = self.conv_forward(g, &x, n);
                (y, Entry::Conv { cols })
            }
            Node::Pool(g) => {
                let (y, argmax) = pool_forward(g, &x, n);
                (y, Entry::Pool { argmax })
            }
            &Node::Dense { inputs, units, weight, bias } => {
                let b = self.params[bias].data();
                let mut y = Vec::with_capacity(n * units);
                for _ in 0..n {
                    y.extend_from_slice(b);
                }
                T::gemm(false, true, n, units, inputs, T::one(), &x, self.params[weight].data(), T::one(), &mut y);
                (y, Entry::Dense { input: x })
            }
            Node::Relu => {
                let mask: Vec<bool> = x.iter().map(|&v| v > T::zero()).collect();
                let y = x.into_iter().map(|v| if v > T::zero() { v } else { T::zero() }).collect();
                (y, Entry::Relu { mask })
            }
            &Node::Dropout { rate, ordinal } => {
                if mode == Mode::Eval || rate == 0.0 {
                    return (x, Entry::Dropout { mask: None });
                }
                let mut rng = ChaCha8Rng::seed_from_u64(mix(&[seed, ordinal]));
                let scale = T::lit(1.0 / (1.0 - rate));
                let mask: Vec<T> = (0..x.len())
                    .map(|_| if rng.gen::<f64>() < rate { T::zero() } else { scale })
                    .collect();
                let y = x.iter().zip(&mask).map(|(&v, &m)| v * m).collect();
                (y, Entry::Dropout { mask: Some(mask) })
            }
            Node::Flatten => (x, Entry::Flatten),
            &Node::BatchNorm { channels, spatial, epsilon, gamma, beta, mean, var, .. } => {
                let train = mode == Mode::Train;
                let m = n * spatial;
                let (bm, bv) = if train {
                    let mut bm = vec![T::zero(); channels];
                    let mut bv = vec![T::zero(); channels];
                    for c in 0..channels {
                        let mut s = T::zero();
                        for i in 0..n {
                            s += x[(i * channels + c) * spatial..][..spatial].iter().copied().sum::<T>();
                        }
                        let mu = s / T::from_usize_lossy(m);
                        let mut q = T::zero();
                        for i in 0..n {
                            for &v in &x[(i * channels + c) * spatial..][..spatial] {
                                q += (v - mu) * (v - mu);
                            }
                        }
                        bm[c] = mu;
                        bv[c] = q / T::from_usize_lossy(m);
                    }
                    (bm, bv)
                } else {
                    (self.buffers[mean].data().to_vec(), self.buffers[var].data().to_vec())
                };
                let eps = T::lit(epsilon);
                let inv_std: Vec<T> = bv.iter().map(|&v| T::one() / (v + eps).sqrt()).collect();
                let g = self.params[gamma].data();
                let b = self.params[beta].data();
                let mut xhat = x;
                let mut y = vec![T::zero(); xhat.len()];
                for i in 0..n {
                    for c in 0..channels {
                        let off = (i * channels + c) * spatial;
                        for k in off..off + spatial {
                            xhat[k] = (xhat[k] - bm[c]) * inv_std[c];
                            y[k] = g[c] * xhat[k] + b[c];
                        }
                    }
                }
                (
                    y,
                    Entry::BatchNorm {
                        xhat,
                        inv_std,
                        batch_mean: bm,
                        batch_var: bv,
                        train,
                    },
                )
            }
            &Node::GlobalAvgPool { channels, spatial } => {
                let inv = T::one() / T::from_usize_lossy(spatial);
                let y = (0..n * channels)
                    .map(|j| x[j * spatial..(j + 1) * spatial].iter().copied().sum::<T>() * inv)
                    .collect();
                (y, Entry::GlobalAvgPool)
            }
            Node::Residual { main, shortcut } => {
                let (fm, fs) = match frozen {
                    Some(Entry::Residual { main, shortcut }) => (Some(main.as_slice()), Some(shortcut.as_slice())),
                    _ => (None, None),
                };
                let (ys, es) = self.forward_seq(shortcut, x.clone(), n, mode, seed, fs);
                let (mut y, em) = self.forward_seq(main, x, n, mode, seed, fm);
                for (a, b) in y.iter_mut().zip(ys) {
                    *a += b;
                }
                (y, Entry::Residual { main: em, shortcut: es })
            }
        }
    }

    fn conv_forward(&self, g: &ConvGeom, x: &[T], n: usize) -> (Vec<T>, Vec<T>) {
        let (ck, p, chw) = (g.ck(), g.p(), g.c * g.h * g.w);
        let w = self.params[g.weight].data();
        let b = self.params[g.bias].data();
        let mut cols = vec![T::zero(); n * ck * p];
        let mut y = vec![T::zero(); n * g.o * p];
        for s in 0..n {
            let cs = &mut cols[s * ck * p..(s + 1) * ck * p];
            im2col(g, &x[s * chw..(s + 1) * chw], cs);
            let ys = &mut y[s * g.o * p..(s + 1) * g.o * p];
            for (o, row) in ys.chunks_mut(p).enumerate() {
                row.fill(b[o]);
            }
            T::gemm(false, false, g.o, p, ck, T::one(), w, cs, T::one(), ys);
        }
        (y, cols)
    }

    fn backward_seq(
        &self,
        nodes: &[Node],
        entries: &[Entry<T>],
        mut dy: Vec<T>,
        n: usize,
        grads: &mut [Tensor<T>],
        need_input_grad: bool,
    ) -> Vec<T> {
        for (i, (node, entry)) in nodes.iter().zip(entries).enumerate().rev() {
            dy = self.backward_node(node, entry, dy, n, grads, need_input_grad || i > 0);
        }
        dy
    }

    fn backward_node(
        &self,
        node: &Node,
        entry: &Entry<T>,
        dy: Vec<T>,
        n: usize,
        grads: &mut [Tensor<T>],
        need: bool,
    ) -> Vec<T> {
        match (node, entry) {
            (Node::Conv(g), Entry::Conv { cols }) => {
                let (ck, p, chw) = (g.ck(), g.p(), g.c * g.h * g.w);
                let dw = grads[g.weight].data_mut();
                for s in 0..n {
                    let dys = &dy[s * g.o * p..(s + 1) * g.o * p];
                    let cs = &cols[s * ck * p..(s + 1) * ck * p];
                    T::gemm(false, true, g.o, ck, p, T::one(), dys, cs, T::one(), dw);
                }
                let db = grads[g.bias].data_mut();
                for s in 0..n {
                    for (o, row) in dy[s * g.o * p..(s + 1) * g.o * p].chunks(p).enumerate() {
                        db[o] += row.iter().copied().sum::<T>();
                    }
                }
                if !need {
                    return Vec::new();
                }
                let w = self.params[g.weight].data();
                let mut dx = vec![T::zero(); n * chw];
                let mut dcols = vec![T::zero(); ck * p];
                for s in 0..n {
                    let dys = &dy[s * g.o * p..(s + 1) * g.o * p];
                    T::gemm(true, false, ck, p, g.o, T::one(), w, dys, T::zero(), &mut dcols);
                    col2im(g, &dcols, &mut dx[s * chw..(s + 1) * chw]);
                }
                dx
            }
            (Node::Pool(g), Entry::Pool { argmax }) => {
                let mut dx = vec![T::zero(); n * g.c * g.h * g.w];
                for (&a, &d) in argmax.iter().zip(&dy) {
                    dx[a] += d;
                }
                dx
            }
            (&Node::Dense { inputs, units, weight, bias }, Entry::Dense { input }) => {
                T::gemm(true, false, units, inputs, n, T::one(), &dy, input, T::one(), grads[weight].data_mut());
                let db = grads[bias].data_mut();
                for row in dy.chunks(units) {
                    for (b, &d) in db.iter_mut().zip(row) {
                        *b += d;
                    }
                }
                if !need {
                    return Vec::new();
                }
                let mut dx = vec![T::zero(); n * inputs];
                T::gemm(false, false, n, inputs, units, T::one(), &dy, self.params[weight].data(), T::zero(), &mut dx);
                dx
            }
            (Node::Relu, Entry::Relu { mask }) => dy
                .into_iter()
                .zip(mask)
                .map(|(d, &m)| if m { d } else { T::zero() })
                .collect(),
            (Node::Dropout { .. }, Entry::Dropout { mask }) => match mask {
                None => dy,
                Some(mask) => dy.into_iter().zip(mask).map(|(d, &m)| d * m).collect(),
            },
            (Node::Flatten, Entry::Flatten) => dy,
            (
                &Node::BatchNorm { channels, spatial, gamma, beta, .. },
                Entry::BatchNorm { xhat, inv_std, train, .. },
            ) => {
                let m = T::from_usize_lossy(n * spatial);
                let mut sum_dy = vec![T::zero(); channels];
                let mut sum_dy_xhat = vec![T::zero(); channels];
                for i in 0..n {
                    for c in 0..channels {
                        let off = (i * channels + c) * spatial;
                        for k in off..off + spatial {
                            sum_dy[c] += dy[k];
                            sum_dy_xhat[c] += dy[k] * xhat[k];
                        }
                    }
                }
                for c in 0..channels {
                    grads[gamma].data_mut()[c] += sum_dy_xhat[c];
                    grads[beta].data_mut()[c] += sum_dy[c];
                }
                let g = self.params[gamma].data();
                let mut dx = dy;
                for i in 0..n {
                    for c in 0..channels {
                        let off = (i * channels + c) * spatial;
                        let k0 = g[c] * inv_std[c];
                        for k in off..off + spatial {
                            dx[k] = if *train {
                                k0 / m * (m * dx[k] - sum_dy[c] - xhat[k] * sum_dy_xhat[c])
                            } else {
                                k0 * dx[k]
                            };
                        }
                    }
                }
                dx
            }
            (&Node::GlobalAvgPool { spatial, .. }, Entry::GlobalAvgPool) => {
                let inv = T::one() / T::from_usize_lossy(spatial);
                dy.iter().flat_map(|&d| std::iter::repeat(d * inv).take(spatial)).collect()
            }
            (Node::Residual { main, shortcut }, Entry::Residual { main: em, shortcut: es }) => {
                let ds = self.backward_seq(shortcut, es, dy.clone(), n, grads, true);
                let mut dx = self.backward_seq(main, em, dy, n, grads, true);
                for (a, b) in dx.iter_mut().zip(ds) {
                    *a += b;
                }
                dx
            }
            _ => unreachable!("cache entry does not match layer"),
        }
    }
}

fn check_shapes<T: Scalar>(what: &str, old: &[Tensor<T>], new: &[Tensor<T>]) -> Result<()> {
    if old.len() != new.len() {
        return Err(Error::dim(what, format!("expected {} tensors, got {}", old.len(), new.len())));
    }
    for (i, (a, b)) in old.iter().zip(new).enumerate() {
        if a.shape() != b.shape() {
            return Err(Error::dim(
                format!("{what}[{i}]"),
                format!("expected shape {:?}, got {:?}", a.shape(), b.shape()),
            ));
        }
    }
    Ok(())
}

fn im2col<T: Scalar>(g: &ConvGeom, x: &[T], cols: &mut [T]) {
    let p = g.p();
    for c in 0..g.c {
        let plane = &x[c * g.h * g.w..(c + 1) * g.h * g.w];
        for ki in 0..g.kh {
            for kj in 0..g.kw {
                let row = (c * g.kh + ki) * g.kw + kj;
                let dst = &mut cols[row * p..(row + 1) * p];
                for oy in 0..g.oh {
                    let d = &mut dst[oy * g.ow..(oy + 1) * g.ow];
                    let iy = (oy * g.sh + ki) as isize - g.ph as isize;
                    if iy < 0 || iy >= g.h as isize {
                        d.fill(T::zero());
                        continue;
                    }
                    let src = &plane[iy as usize * g.w..(iy as usize + 1) * g.w];
                    for (ox, v) in d.iter_mut().enumerate() {
                        let ix = (ox * g.sw + kj) as isize - g.pw as isize;
                        *v = if ix >= 0 && ix < g.w as isize { src[ix as usize] } else { T::zero() };
                    }
                }
            }
        }
    }
}

fn col2im<T: Scalar>(g: &ConvGeom, cols: &[T], dx: &mut [T]) {
    let p = g.p();
    for c in 0..g.c {
        let plane = &mut dx[c * g.h * g.w..(c + 1) * g.h * g.w];
        for ki in 0..g.kh {
            for kj in 0..g.kw {
                let row = (c * g.kh + ki) * g.kw + kj;
                let src = &cols[row * p..(row + 1) * p];
                for oy in 0..g.oh {
                    let iy = (oy * g.sh + ki) as isize - g.ph as isize;
                    if iy < 0 || iy >= g.h as isize {
                        continue;
                    }
                    let dst = &mut plane[iy as usize * g.w..(iy as usize + 1) * g.w];
                    for (ox, &v) in src[oy * g.ow..(oy + 1) * g.ow].iter().enumerate() {
                        let ix = (ox * g.sw + kj) as isize - g.pw as isize;
                        if ix >= 0 && ix < g.w as isize {
                            dst[ix as usize] += v;
                        }
                    }
                }
            }
        }
    }
}

/// Max pooling; ties go to the first maximum in row-major window order.
fn pool_forward<T: Scalar>(g: &PoolGeom, x: &[T], n: usize) -> (Vec<T>, Vec<usize>) {
    let mut y = Vec::with_capacity(n * g.c * g.oh * g.ow);
    let mut argmax = Vec::with_capacity(y.capacity());
    for plane in 0..n * g.c {
        let base = plane * g.h * g.w;
        for oy in 0..g.oh {
            for ox in 0..g.ow {
                let mut best = base + oy * g.sh * g.w + ox * g.sw;
                for ki in 0..g.kh {
                    for kj in 0..g.kw {
                        let idx = base + (oy * g.sh + ki) * g.w + ox * g.sw + kj;
                        if x[idx] > x[best] {
                            best = idx;
                        }
                    }
                }
                y.push(x[best]);
                argmax.push(best);
            }
        }
    }
    (y, argmax)
}
