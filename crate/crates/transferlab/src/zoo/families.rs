//! Parameter layouts, forward passes, and hand-rolled backward passes for
//! the four desk-scale families. Everything is f64 and single-threaded so
//! training is bit-reproducible.

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::math::log_softmax;
use crate::zoo::vocab::{EncodedInput, PAD_ID};
use crate::zoo::{Architecture, EmbeddingInit, ModelSpec};

/// Width of the embedding and hidden layers.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Dims {
    pub emb: usize,
    pub hidden: usize,
}

#[derive(Debug, Clone)]
pub(crate) enum Params {
    LinearBow(LinearBow),
    AvgEmbMlp(AvgEmbMlp),
    Conv1d(Conv1d),
    Recurrent(Recurrent),
}

#[derive(Debug, Clone)]
pub(crate) struct LinearBow {
    /// Per-symbol class weights, rows x Z.
    pub w: Array2<f64>,
    pub b: Array1<f64>,
    /// depth-1 extra square maps (kept linear).
    pub extra: Vec<(Array2<f64>, Array1<f64>)>,
}

#[derive(Debug, Clone)]
pub(crate) struct AvgEmbMlp {
    pub emb: Array2<f64>,
    /// depth tanh layers: first H x D, then H x H.
    pub hidden: Vec<(Array2<f64>, Array1<f64>)>,
    pub out_w: Array2<f64>,
    pub out_b: Array1<f64>,
}

#[derive(Debug, Clone)]
pub(crate) struct Conv1d {
    pub emb: Array2<f64>,
    /// depth width-3 conv layers: H x 3*(D|H) kernels.
    pub convs: Vec<(Array2<f64>, Array1<f64>)>,
    pub out_w: Array2<f64>,
    pub out_b: Array1<f64>,
}

#[derive(Debug, Clone)]
pub(crate) struct RecurrentCell {
    pub wx: Array2<f64>,
    pub wh: Array2<f64>,
    pub b: Array1<f64>,
}

#[derive(Debug, Clone)]
pub(crate) struct Recurrent {
    pub emb: Array2<f64>,
    pub cells: Vec<RecurrentCell>,
    pub out_w: Array2<f64>,
    pub out_b: Array1<f64>,
}

pub(crate) enum TensorRef<'a> {
    Mat(&'a Array2<f64>),
    Vec1(&'a Array1<f64>),
}

pub(crate) enum TensorMut<'a> {
    Mat(&'a mut Array2<f64>),
    Vec1(&'a mut Array1<f64>),
}

fn uniform_mat(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Array2<f64> {
    let mut m = Array2::zeros((rows, cols));
    for r in 0..rows {
        for c in 0..cols {
            m[[r, c]] = rng.gen_range(-scale..scale);
        }
    }
    m
}

/// Glorot-scaled layer init; keeps stacked tanh layers trainable.
fn glorot_mat(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    uniform_mat(rng, rows, cols, limit)
}

fn near_identity(rng: &mut ChaCha8Rng, n: usize) -> Array2<f64> {
    let mut m = uniform_mat(rng, n, n, 0.01);
    for i in 0..n {
        m[[i, i]] += 1.0;
    }
    m
}

/// Build the initial V x D embedding table: pretrained rows where the
/// caller supplies them, uniform(-0.1, 0.1) otherwise, PAD row zero.
pub(crate) fn init_embedding_table(
    rng: &mut ChaCha8Rng,
    rows: usize,
    dim: usize,
    pretrained_rows: Option<&dyn Fn(usize) -> Option<Vec<f64>>>,
) -> Array2<f64> {
    let mut emb = Array2::zeros((rows, dim));
    for r in 0..rows {
        let preset = pretrained_rows.and_then(|f| f(r));
        match preset {
            Some(v) => {
                for (c, val) in v.iter().enumerate() {
                    emb[[r, c]] = *val;
                }
            }
            None => {
                for c in 0..dim {
                    emb[[r, c]] = rng.gen_range(-0.1..0.1);
                }
            }
        }
    }
    for c in 0..dim {
        emb[[PAD_ID, c]] = 0.0;
    }
    emb
}

/// Per-position input vector: the symbol's row for word input, the bag of
/// trigram rows pooled as sum/sqrt(len) for character input (scaled so a
/// pooled bag has the same per-dimension variance as a single row).
fn position_vec(table: &Array2<f64>, input: &EncodedInput, i: usize) -> Array1<f64> {
    match input {
        EncodedInput::Words(ids) => table.row(ids[i]).to_owned(),
        EncodedInput::CharBags(bags) => {
            let bag = &bags[i];
            let mut v = Array1::zeros(table.ncols());
            for &id in bag {
                v += &table.row(id);
            }
            v / (bag.len() as f64).sqrt()
        }
    }
}

/// Scatter a gradient w.r.t. the position vector back onto table rows.
fn scatter_position_grad(
    grad_table: &mut Array2<f64>,
    input: &EncodedInput,
    i: usize,
    dvec: &Array1<f64>,
) {
    match input {
        EncodedInput::Words(ids) => {
            let mut row = grad_table.row_mut(ids[i]);
            row += dvec;
        }
        EncodedInput::CharBags(bags) => {
            let bag = &bags[i];
            let scale = 1.0 / (bag.len() as f64).sqrt();
            for &id in bag {
                let mut row = grad_table.row_mut(id);
                row.scaled_add(scale, dvec);
            }
        }
    }
}

/// Cross-entropy loss and its gradient w.r.t. the logits.
pub(crate) fn cross_entropy(logits: &Array1<f64>, gold: usize) -> (f64, Array1<f64>) {
    let lp = log_softmax(logits.as_slice().unwrap());
    let loss = -lp[gold];
    let mut dlogits = Array1::from_vec(lp.iter().map(|v| v.exp()).collect());
    dlogits[gold] -= 1.0;
    (loss, dlogits)
}

impl Params {
    /// Initialize parameters for a spec. `rng` must be freshly seeded from
    /// the spec seed; draw order is fixed so training is reproducible.
    pub fn init(
        spec: &ModelSpec,
        rows: usize,
        label_count: usize,
        dims: Dims,
        pretrained_row: Option<&dyn Fn(usize) -> Option<Vec<f64>>>,
        rng: &mut ChaCha8Rng,
    ) -> Params {
        let (d, h, z) = (dims.emb, dims.hidden, label_count);
        match spec.architecture {
            Architecture::LinearBow => {
                let w = match spec.embedding_init {
                    EmbeddingInit::Random => {
                        let mut w = uniform_mat(rng, rows, z, 0.1);
                        for c in 0..z {
                            w[[PAD_ID, c]] = 0.0;
                        }
                        w
                    }
                    EmbeddingInit::PretrainedFile => {
                        // Class weights start as a seeded linear readout of
                        // the pretrained vectors.
                        let emb = init_embedding_table(rng, rows, d, pretrained_row);
                        let proj = uniform_mat(rng, d, z, 0.1);
                        emb.dot(&proj)
                    }
                };
                let extra = (1..spec.depth)
                    .map(|_| (near_identity(rng, z), Array1::zeros(z)))
                    .collect();
                Params::LinearBow(LinearBow {
                    w,
                    b: Array1::zeros(z),
                    extra,
                })
            }
            Architecture::AvgEmbMlp => {
                let emb = init_embedding_table(
                    rng,
                    rows,
                    d,
                    pretrained_for(spec, pretrained_row),
                );
                let mut hidden = Vec::new();
                for layer in 0..spec.depth {
                    let input_dim = if layer == 0 { d } else { h };
                    hidden.push((glorot_mat(rng, h, input_dim), Array1::zeros(h)));
                }
                Params::AvgEmbMlp(AvgEmbMlp {
                    emb,
                    hidden,
                    out_w: glorot_mat(rng, z, h),
                    out_b: Array1::zeros(z),
                })
            }
            Architecture::Conv1d => {
                let emb = init_embedding_table(
                    rng,
                    rows,
                    d,
                    pretrained_for(spec, pretrained_row),
                );
                let mut convs = Vec::new();
                for layer in 0..spec.depth {
                    let input_dim = if layer == 0 { d } else { h };
                    convs.push((glorot_mat(rng, h, 3 * input_dim), Array1::zeros(h)));
                }
                Params::Conv1d(Conv1d {
                    emb,
                    convs,
                    out_w: glorot_mat(rng, z, h),
                    out_b: Array1::zeros(z),
                })
            }
            Architecture::Recurrent => {
                let emb = init_embedding_table(
                    rng,
                    rows,
                    d,
                    pretrained_for(spec, pretrained_row),
                );
                let mut cells = Vec::new();
                for layer in 0..spec.depth {
                    let input_dim = if layer == 0 { d } else { h };
                    cells.push(RecurrentCell {
                        wx: glorot_mat(rng, h, input_dim),
                        wh: glorot_mat(rng, h, h),
                        b: Array1::zeros(h),
                    });
                }
                Params::Recurrent(Recurrent {
                    emb,
                    cells,
                    out_w: glorot_mat(rng, z, h),
                    out_b: Array1::zeros(z),
                })
            }
        }
    }

    pub fn forward(&self, input: &EncodedInput) -> Array1<f64> {
        match self {
            Params::LinearBow(p) => p.forward(input),
            Params::AvgEmbMlp(p) => p.forward(input).0,
            Params::Conv1d(p) => p.forward(input).0,
            Params::Recurrent(p) => p.forward(input).0,
        }
    }

    /// Accumulate the cross-entropy gradient for one example into `grad`
    /// and return (loss, logits).
    pub fn accumulate(
        &self,
        input: &EncodedInput,
        gold: usize,
        grad: &mut Params,
    ) -> (f64, Array1<f64>) {
        match (self, grad) {
            (Params::LinearBow(p), Params::LinearBow(g)) => p.accumulate(input, gold, g),
            (Params::AvgEmbMlp(p), Params::AvgEmbMlp(g)) => p.accumulate(input, gold, g),
            (Params::Conv1d(p), Params::Conv1d(g)) => p.accumulate(input, gold, g),
            (Params::Recurrent(p), Params::Recurrent(g)) => p.accumulate(input, gold, g),
            _ => unreachable!("gradient/parameter family mismatch"),
        }
    }

    pub fn zeros_like(&self) -> Params {
        let mut z = self.clone();
        for t in z.tensor_muts() {
            match t {
                TensorMut::Mat(m) => m.fill(0.0),
                TensorMut::Vec1(v) => v.fill(0.0),
            }
        }
        z
    }

    /// SGD step: self -= scale * grad.
    pub fn step(&mut self, grad: &Params, scale: f64) {
        let gs = grad.tensor_refs();
        for (t, g) in self.tensor_muts().into_iter().zip(gs) {
            match (t, g) {
                (TensorMut::Mat(m), TensorRef::Mat(gm)) => m.scaled_add(-scale, gm),
                (TensorMut::Vec1(v), TensorRef::Vec1(gv)) => v.scaled_add(-scale, gv),
                _ => unreachable!("tensor order mismatch"),
            }
        }
    }

    pub fn tensor_refs(&self) -> Vec<TensorRef<'_>> {
        let mut out = Vec::new();
        match self {
            Params::LinearBow(p) => {
                out.push(TensorRef::Mat(&p.w));
                out.push(TensorRef::Vec1(&p.b));
                for (a, c) in &p.extra {
                    out.push(TensorRef::Mat(a));
                    out.push(TensorRef::Vec1(c));
                }
            }
            Params::AvgEmbMlp(p) => {
                out.push(TensorRef::Mat(&p.emb));
                for (a, c) in &p.hidden {
                    out.push(TensorRef::Mat(a));
                    out.push(TensorRef::Vec1(c));
                }
                out.push(TensorRef::Mat(&p.out_w));
                out.push(TensorRef::Vec1(&p.out_b));
            }
            Params::Conv1d(p) => {
                out.push(TensorRef::Mat(&p.emb));
                for (k, c) in &p.convs {
                    out.push(TensorRef::Mat(k));
                    out.push(TensorRef::Vec1(c));
                }
                out.push(TensorRef::Mat(&p.out_w));
                out.push(TensorRef::Vec1(&p.out_b));
            }
            Params::Recurrent(p) => {
                out.push(TensorRef::Mat(&p.emb));
                for cell in &p.cells {
                    out.push(TensorRef::Mat(&cell.wx));
                    out.push(TensorRef::Mat(&cell.wh));
                    out.push(TensorRef::Vec1(&cell.b));
                }
                out.push(TensorRef::Mat(&p.out_w));
                out.push(TensorRef::Vec1(&p.out_b));
            }
        }
        out
    }

    pub fn tensor_muts(&mut self) -> Vec<TensorMut<'_>> {
        let mut out = Vec::new();
        match self {
            Params::LinearBow(p) => {
                out.push(TensorMut::Mat(&mut p.w));
                out.push(TensorMut::Vec1(&mut p.b));
                for (a, c) in &mut p.extra {
                    out.push(TensorMut::Mat(a));
                    out.push(TensorMut::Vec1(c));
                }
            }
            Params::AvgEmbMlp(p) => {
                out.push(TensorMut::Mat(&mut p.emb));
                for (a, c) in &mut p.hidden {
                    out.push(TensorMut::Mat(a));
                    out.push(TensorMut::Vec1(c));
                }
                out.push(TensorMut::Mat(&mut p.out_w));
                out.push(TensorMut::Vec1(&mut p.out_b));
            }
            Params::Conv1d(p) => {
                out.push(TensorMut::Mat(&mut p.emb));
                for (k, c) in &mut p.convs {
                    out.push(TensorMut::Mat(k));
                    out.push(TensorMut::Vec1(c));
                }
                out.push(TensorMut::Mat(&mut p.out_w));
                out.push(TensorMut::Vec1(&mut p.out_b));
            }
            Params::Recurrent(p) => {
                out.push(TensorMut::Mat(&mut p.emb));
                for cell in &mut p.cells {
                    out.push(TensorMut::Mat(&mut cell.wx));
                    out.push(TensorMut::Mat(&mut cell.wh));
                    out.push(TensorMut::Vec1(&mut cell.b));
                }
                out.push(TensorMut::Mat(&mut p.out_w));
                out.push(TensorMut::Vec1(&mut p.out_b));
            }
        }
        out
    }
}

/// Pretrained rows apply only to specs that asked for them.
fn pretrained_for<'a>(
    spec: &ModelSpec,
    rows: Option<&'a dyn Fn(usize) -> Option<Vec<f64>>>,
) -> Option<&'a dyn Fn(usize) -> Option<Vec<f64>>> {
    match spec.embedding_init {
        EmbeddingInit::PretrainedFile => rows,
        EmbeddingInit::Random => None,
    }
}

impl LinearBow {
    fn forward(&self, input: &EncodedInput) -> Array1<f64> {
        let mut s = self.b.clone();
        for i in 0..input.positions() {
            s += &position_vec(&self.w, input, i);
        }
        for (a, c) in &self.extra {
            s = a.dot(&s) + c;
        }
        s
    }

    fn accumulate(
        &self,
        input: &EncodedInput,
        gold: usize,
        grad: &mut LinearBow,
    ) -> (f64, Array1<f64>) {
        // Recompute the per-layer activations for the backward pass.
        let mut s0 = self.b.clone();
        for i in 0..input.positions() {
            s0 += &position_vec(&self.w, input, i);
        }
        let mut acts = vec![s0];
        for (a, c) in &self.extra {
            let next = a.dot(acts.last().unwrap()) + c;
            acts.push(next);
        }
        let logits = acts.last().unwrap().clone();
        let (loss, dlogits) = cross_entropy(&logits, gold);

        let mut ds = dlogits;
        for (idx, (a, _)) in self.extra.iter().enumerate().rev() {
            let (ga, gc) = &mut grad.extra[idx];
            let prev = &acts[idx];
            for r in 0..ga.nrows() {
                let d = ds[r];
                gc[r] += d;
                for c in 0..ga.ncols() {
                    ga[[r, c]] += d * prev[c];
                }
            }
            ds = a.t().dot(&ds);
        }
        grad.b += &ds;
        for i in 0..input.positions() {
            scatter_position_grad(&mut grad.w, input, i, &ds);
        }
        (loss, logits)
    }
}

impl AvgEmbMlp {
    /// Returns (logits, (mean embedding, per-layer activations)).
    fn forward(&self, input: &EncodedInput) -> (Array1<f64>, (Array1<f64>, Vec<Array1<f64>>)) {
        let n = input.positions();
        let mut e = Array1::zeros(self.emb.ncols());
        for i in 0..n {
            e += &position_vec(&self.emb, input, i);
        }
        e /= n as f64;
        let mut acts = Vec::with_capacity(self.hidden.len());
        let mut h = e.clone();
        for (a, b) in &self.hidden {
            h = (a.dot(&h) + b).mapv(f64::tanh);
            acts.push(h.clone());
        }
        let logits = self.out_w.dot(&h) + &self.out_b;
        (logits, (e, acts))
    }

    fn accumulate(
        &self,
        input: &EncodedInput,
        gold: usize,
        grad: &mut AvgEmbMlp,
    ) -> (f64, Array1<f64>) {
        let (logits, (e, acts)) = self.forward(input);
        let (loss, dlogits) = cross_entropy(&logits, gold);

        let top = acts.last().unwrap();
        for r in 0..self.out_w.nrows() {
            let d = dlogits[r];
            grad.out_b[r] += d;
            for c in 0..self.out_w.ncols() {
                grad.out_w[[r, c]] += d * top[c];
            }
        }
        let mut dh = self.out_w.t().dot(&dlogits);
        for idx in (0..self.hidden.len()).rev() {
            let y = &acts[idx];
            let da = &dh * &y.mapv(|v| 1.0 - v * v);
            let below: &Array1<f64> = if idx == 0 { &e } else { &acts[idx - 1] };
            let (ga, gb) = &mut grad.hidden[idx];
            for r in 0..ga.nrows() {
                let d = da[r];
                gb[r] += d;
                for c in 0..ga.ncols() {
                    ga[[r, c]] += d * below[c];
                }
            }
            dh = self.hidden[idx].0.t().dot(&da);
        }
        let n = input.positions();
        let de = dh / n as f64;
        for i in 0..n {
            scatter_position_grad(&mut grad.emb, input, i, &de);
        }
        (loss, logits)
    }
}

struct ConvCache {
    /// Per layer: the input vectors (unpadded).
    inputs: Vec<Vec<Array1<f64>>>,
    /// Per layer: the tanh outputs.
    outputs: Vec<Vec<Array1<f64>>>,
    /// Per pooled channel: position of its max.
    argmax: Vec<usize>,
    pooled: Array1<f64>,
}

impl Conv1d {
    fn forward(&self, input: &EncodedInput) -> (Array1<f64>, ConvCache) {
        let n = input.positions();
        let mut xs: Vec<Array1<f64>> = (0..n)
            .map(|i| position_vec(&self.emb, input, i))
            .collect();
        let mut inputs = Vec::with_capacity(self.convs.len());
        let mut outputs = Vec::with_capacity(self.convs.len());
        for (k, b) in &self.convs {
            let din = xs[0].len();
            let zero = Array1::zeros(din);
            let mut ys = Vec::with_capacity(n);
            for t in 0..n {
                let mut z = b.clone();
                for (j, off) in (-1i64..=1).enumerate() {
                    let src = t as i64 + off;
                    let x: &Array1<f64> = if src < 0 || src >= n as i64 {
                        &zero
                    } else {
                        &xs[src as usize]
                    };
                    let block = k.slice(ndarray::s![.., j * din..(j + 1) * din]);
                    z += &block.dot(x);
                }
                ys.push(z.mapv(f64::tanh));
            }
            inputs.push(xs);
            outputs.push(ys.clone());
            xs = ys;
        }
        let channels = xs[0].len();
        let mut pooled = Array1::zeros(channels);
        let mut argmax = vec![0usize; channels];
        for c in 0..channels {
            let mut best = f64::NEG_INFINITY;
            for (t, x) in xs.iter().enumerate() {
                if x[c] > best {
                    best = x[c];
                    argmax[c] = t;
                }
            }
            pooled[c] = best;
        }
        let logits = self.out_w.dot(&pooled) + &self.out_b;
        (
            logits,
            ConvCache {
                inputs,
                outputs,
                argmax,
                pooled,
            },
        )
    }

    fn accumulate(
        &self,
        input: &EncodedInput,
        gold: usize,
        grad: &mut Conv1d,
    ) -> (f64, Array1<f64>) {
        let (logits, cache) = self.forward(input);
        let (loss, dlogits) = cross_entropy(&logits, gold);
        let n = input.positions();

        for r in 0..self.out_w.nrows() {
            let d = dlogits[r];
            grad.out_b[r] += d;
            for c in 0..self.out_w.ncols() {
                grad.out_w[[r, c]] += d * cache.pooled[c];
            }
        }
        let dpooled = self.out_w.t().dot(&dlogits);

        // Route pooled gradient back to the argmax positions of the top layer.
        let top = cache.outputs.last().unwrap();
        let channels = top[0].len();
        let mut dy: Vec<Array1<f64>> = (0..n).map(|_| Array1::zeros(channels)).collect();
        for c in 0..channels {
            dy[cache.argmax[c]][c] += dpooled[c];
        }

        for layer in (0..self.convs.len()).rev() {
            let (k, _) = &self.convs[layer];
            let ys = &cache.outputs[layer];
            let xs = &cache.inputs[layer];
            let din = xs[0].len();
            let mut dx: Vec<Array1<f64>> = (0..n).map(|_| Array1::zeros(din)).collect();
            let (gk, gb) = &mut grad.convs[layer];
            for t in 0..n {
                let dz = &dy[t] * &ys[t].mapv(|v| 1.0 - v * v);
                *gb += &dz;
                for (j, off) in (-1i64..=1).enumerate() {
                    let src = t as i64 + off;
                    if src < 0 || src >= n as i64 {
                        continue;
                    }
                    let src = src as usize;
                    let x = &xs[src];
                    let mut gblock = gk.slice_mut(ndarray::s![.., j * din..(j + 1) * din]);
                    for r in 0..gblock.nrows() {
                        let d = dz[r];
                        for c in 0..din {
                            gblock[[r, c]] += d * x[c];
                        }
                    }
                    let block = k.slice(ndarray::s![.., j * din..(j + 1) * din]);
                    dx[src] += &block.t().dot(&dz);
                }
            }
            dy = dx;
        }
        for (i, d) in dy.iter().enumerate() {
            scatter_position_grad(&mut grad.emb, input, i, d);
        }
        (loss, logits)
    }
}

struct RecurrentCache {
    /// Per layer: inputs x_1..x_n.
    inputs: Vec<Vec<Array1<f64>>>,
    /// Per layer: states h_1..h_n.
    states: Vec<Vec<Array1<f64>>>,
}

impl Recurrent {
    fn forward(&self, input: &EncodedInput) -> (Array1<f64>, RecurrentCache) {
        let n = input.positions();
        let mut xs: Vec<Array1<f64>> = (0..n)
            .map(|i| position_vec(&self.emb, input, i))
            .collect();
        let mut inputs = Vec::with_capacity(self.cells.len());
        let mut states = Vec::with_capacity(self.cells.len());
        for cell in &self.cells {
            let h_dim = cell.b.len();
            let mut h = Array1::zeros(h_dim);
            let mut hs = Vec::with_capacity(n);
            for x in &xs {
                h = (cell.wx.dot(x) + cell.wh.dot(&h) + &cell.b).mapv(f64::tanh);
                hs.push(h.clone());
            }
            inputs.push(xs);
            states.push(hs.clone());
            xs = hs;
        }
        let final_state = states.last().unwrap().last().unwrap();
        let logits = self.out_w.dot(final_state) + &self.out_b;
        (logits, RecurrentCache { inputs, states })
    }

    fn accumulate(
        &self,
        input: &EncodedInput,
        gold: usize,
        grad: &mut Recurrent,
    ) -> (f64, Array1<f64>) {
        let (logits, cache) = self.forward(input);
        let (loss, dlogits) = cross_entropy(&logits, gold);
        let n = input.positions();

        let final_state = cache.states.last().unwrap().last().unwrap();
        for r in 0..self.out_w.nrows() {
            let d = dlogits[r];
            grad.out_b[r] += d;
            for c in 0..self.out_w.ncols() {
                grad.out_w[[r, c]] += d * final_state[c];
            }
        }

        // dh[t]: gradient flowing into state t of the current layer.
        let top_h = self.cells.last().unwrap().b.len();
        let mut dh: Vec<Array1<f64>> = (0..n).map(|_| Array1::zeros(top_h)).collect();
        dh[n - 1] = self.out_w.t().dot(&dlogits);

        for layer in (0..self.cells.len()).rev() {
            let cell = &self.cells[layer];
            let hs = &cache.states[layer];
            let xs = &cache.inputs[layer];
            let din = xs[0].len();
            let mut dx: Vec<Array1<f64>> = (0..n).map(|_| Array1::zeros(din)).collect();
            let gcell = &mut grad.cells[layer];
            let mut carry: Array1<f64> = Array1::zeros(cell.b.len());
            for t in (0..n).rev() {
                let total = &dh[t] + &carry;
                let dz = &total * &hs[t].mapv(|v| 1.0 - v * v);
                gcell.b += &dz;
                let x = &xs[t];
                for r in 0..gcell.wx.nrows() {
                    let d = dz[r];
                    for c in 0..din {
                        gcell.wx[[r, c]] += d * x[c];
                    }
                }
                if t > 0 {
                    let prev = &hs[t - 1];
                    for r in 0..gcell.wh.nrows() {
                        let d = dz[r];
                        for c in 0..prev.len() {
                            gcell.wh[[r, c]] += d * prev[c];
                        }
                    }
                }
                carry = cell.wh.t().dot(&dz);
                dx[t] = cell.wx.t().dot(&dz);
            }
            dh = dx;
        }
        for (i, d) in dh.iter().enumerate() {
            scatter_position_grad(&mut grad.emb, input, i, d);
        }
        (loss, logits)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use crate::zoo::{FactorGrid, InputForm};

    fn toy_input(form: InputForm) -> EncodedInput {
        match form {
            InputForm::Word => EncodedInput::Words(vec![2, 3, 4, 2, 5]),
            InputForm::CharNgram => EncodedInput::CharBags(vec![
                vec![2, 3],
                vec![4],
                vec![5, 2, 3],
                vec![3],
            ]),
        }
    }

    /// Central-difference check of every parameter for every family and
    /// both input forms.
    #[test]
    fn gradients_match_finite_differences() {
        let dims = Dims { emb: 5, hidden: 4 };
        let rows = 8;
        let z = 3;
        for spec in crate::zoo::build_zoo(&FactorGrid::full(), &[13]).unwrap() {
            // Pretrained init only changes starting values, not gradients.
            if spec.embedding_init != EmbeddingInit::Random {
                continue;
            }
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            let params = Params::init(&spec, rows, z, dims, None, &mut rng);
            let input = toy_input(spec.input_form);
            let gold = 1usize;

            let mut grad = params.zeros_like();
            params.accumulate(&input, gold, &mut grad);

            let loss_at = |p: &Params| -> f64 {
                let logits = p.forward(&input);
                cross_entropy(&logits, gold).0
            };

            let mut analytic = Vec::new();
            for t in grad.tensor_refs() {
                match t {
                    TensorRef::Mat(m) => analytic.extend(m.iter().copied()),
                    TensorRef::Vec1(v) => analytic.extend(v.iter().copied()),
                }
            }
            let mut numeric = Vec::with_capacity(analytic.len());
            let mut probe = params.clone();
            let h = 1e-5;
            let mut idx = 0;
            let n_tensors = probe.tensor_refs().len();
            for ti in 0..n_tensors {
                let len = match &probe.tensor_refs()[ti] {
                    TensorRef::Mat(m) => m.len(),
                    TensorRef::Vec1(v) => v.len(),
                };
                for ei in 0..len {
                    let set = |p: &mut Params, delta: f64| {
                        match &mut p.tensor_muts()[ti] {
                            TensorMut::Mat(m) => {
                                *m.as_slice_mut().unwrap().get_mut(ei).unwrap() += delta
                            }
                            TensorMut::Vec1(v) => {
                                *v.as_slice_mut().unwrap().get_mut(ei).unwrap() += delta
                            }
                        };
                    };
                    set(&mut probe, h);
                    let up = loss_at(&probe);
                    set(&mut probe, -2.0 * h);
                    let down = loss_at(&probe);
                    set(&mut probe, h);
                    numeric.push((up - down) / (2.0 * h));
                    idx += 1;
                }
            }
            assert_eq!(idx, analytic.len());
            let diff: f64 = analytic
                .iter()
                .zip(&numeric)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            let scale: f64 = analytic
                .iter()
                .map(|a| a * a)
                .sum::<f64>()
                .sqrt()
                .max(numeric.iter().map(|a| a * a).sum::<f64>().sqrt());
            let rel = diff / scale.max(1e-12);
            assert!(
                rel < 1e-6,
                "family {:?} form {:?}: finite-difference mismatch {rel}",
                spec.architecture,
                spec.input_form
            );
        }
    }

    #[test]
    fn step_moves_against_gradient() {
        let dims = Dims { emb: 4, hidden: 3 };
        let spec = ModelSpec::parse_id("avgmlp-word-rand-1-3").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut params = Params::init(&spec, 6, 2, dims, None, &mut rng);
        let input = EncodedInput::Words(vec![2, 3]);
        let before = cross_entropy(&params.forward(&input), 0).0;
        for _ in 0..50 {
            let mut grad = params.zeros_like();
            params.accumulate(&input, 0, &mut grad);
            params.step(&grad, 0.5);
        }
        let after = cross_entropy(&params.forward(&input), 0).0;
        assert!(after < before);
    }
}
