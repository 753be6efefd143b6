//! The built-in encoder-decoder scorer.
//!
//! Encoder: shared token embedding into a bidirectional GRU; each direction
//! has `hidden_dim / 2` units and position states are the concatenation.
//! Decoder: a GRU whose input is the previous target embedding together with
//! the previous attentional vector, scaled dot-product attention over the
//! encoder states, a `tanh` combination layer, and the `W_lm`/`b_lm` softmax
//! over the shared vocabulary. All arithmetic is `f64`.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::tensor::{add_assign, dot, mat_vec_acc, outer_acc, sigmoid, softmax_into, vec_mat_acc, Matrix};
use super::vocab::{Vocab, BOS_ID, EOS};
use super::{GenerativeScorer, ScoreError, TokenScores};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ModelConfig {
    pub embed_dim: usize,
    /// Must be even; each encoder direction gets half.
    pub hidden_dim: usize,
    pub seed: u64,
    /// Start with `W_lm = 0, b_lm = 0`, i.e. a uniform next-token distribution.
    pub zero_output_layer: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self { embed_dim: 64, hidden_dim: 128, seed: 42, zero_output_layer: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct GruParams {
    pub wx: Matrix,
    pub wh: Matrix,
    pub bx: Matrix,
    pub bh: Matrix,
}

impl GruParams {
    fn new<R: rand::Rng>(input: usize, hidden: usize, rng: &mut R) -> Self {
        Self {
            wx: Matrix::xavier(input, 3 * hidden, rng),
            wh: Matrix::xavier(hidden, 3 * hidden, rng),
            bx: Matrix::zeros(1, 3 * hidden),
            bh: Matrix::zeros(1, 3 * hidden),
        }
    }

    fn zeros_like(other: &Self) -> Self {
        Self {
            wx: Matrix::zeros(other.wx.rows, other.wx.cols),
            wh: Matrix::zeros(other.wh.rows, other.wh.cols),
            bx: Matrix::zeros(1, other.bx.cols),
            bh: Matrix::zeros(1, other.bh.cols),
        }
    }

    fn hidden(&self) -> usize {
        self.wh.rows
    }
}

/// Every trainable tensor of the model.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub(crate) embed: Matrix,
    pub(crate) enc_fwd: GruParams,
    pub(crate) enc_bwd: GruParams,
    /// Token embedding projected into every encoder state.
    pub(crate) src_proj: Matrix,
    pub(crate) init_w: Matrix,
    pub(crate) init_b: Matrix,
    pub(crate) dec: GruParams,
    pub(crate) attn_q: Matrix,
    pub(crate) comb_w: Matrix,
    pub(crate) comb_b: Matrix,
    pub(crate) lm_w: Matrix,
    pub(crate) lm_b: Matrix,
}

/// Names of the parameter tensors, in storage order.
pub const TENSOR_NAMES: [&str; 21] = [
    "embed",
    "enc_fwd.wx",
    "enc_fwd.wh",
    "enc_fwd.bx",
    "enc_fwd.bh",
    "enc_bwd.wx",
    "enc_bwd.wh",
    "enc_bwd.bx",
    "enc_bwd.bh",
    "src_proj",
    "init_w",
    "init_b",
    "dec.wx",
    "dec.wh",
    "dec.bx",
    "dec.bh",
    "attn_q",
    "comb_w",
    "comb_b",
    "lm_w",
    "lm_b",
];

impl Params {
    fn new(vocab: usize, config: &ModelConfig) -> Self {
        let (e, h) = (config.embed_dim, config.hidden_dim);
        let mut rng = rng::seeded(config.seed);
        let embed = Matrix::uniform(vocab, e, 0.1, &mut rng);
        let enc_fwd = GruParams::new(e, h / 2, &mut rng);
        let enc_bwd = GruParams::new(e, h / 2, &mut rng);
        let src_proj = Matrix::xavier(e, h, &mut rng);
        let init_w = Matrix::xavier(h, h, &mut rng);
        let dec = GruParams::new(e + h, h, &mut rng);
        let attn_q = Matrix::xavier(h, h, &mut rng);
        let comb_w = Matrix::xavier(2 * h, h, &mut rng);
        let mut lm_w = Matrix::xavier(h, vocab, &mut rng);
        let mut lm_b = Matrix::uniform(1, vocab, 0.1, &mut rng);
        if config.zero_output_layer {
            lm_w.fill(0.0);
            lm_b.fill(0.0);
        }
        Self {
            embed,
            enc_fwd,
            enc_bwd,
            src_proj,
            init_w,
            init_b: Matrix::zeros(1, h),
            dec,
            attn_q,
            comb_w,
            comb_b: Matrix::zeros(1, h),
            lm_w,
            lm_b,
        }
    }

    pub(crate) fn zeros_like(other: &Self) -> Self {
        let z = |m: &Matrix| Matrix::zeros(m.rows, m.cols);
        Self {
            embed: z(&other.embed),
            enc_fwd: GruParams::zeros_like(&other.enc_fwd),
            enc_bwd: GruParams::zeros_like(&other.enc_bwd),
            src_proj: z(&other.src_proj),
            init_w: z(&other.init_w),
            init_b: z(&other.init_b),
            dec: GruParams::zeros_like(&other.dec),
            attn_q: z(&other.attn_q),
            comb_w: z(&other.comb_w),
            comb_b: z(&other.comb_b),
            lm_w: z(&other.lm_w),
            lm_b: z(&other.lm_b),
        }
    }

    /// Named tensors in [`TENSOR_NAMES`] order.
    pub fn tensors(&self) -> Vec<(&'static str, &Matrix)> {
        let list = [
            &self.embed,
            &self.enc_fwd.wx,
            &self.enc_fwd.wh,
            &self.enc_fwd.bx,
            &self.enc_fwd.bh,
            &self.enc_bwd.wx,
            &self.enc_bwd.wh,
            &self.enc_bwd.bx,
            &self.enc_bwd.bh,
            &self.src_proj,
            &self.init_w,
            &self.init_b,
            &self.dec.wx,
            &self.dec.wh,
            &self.dec.bx,
            &self.dec.bh,
            &self.attn_q,
            &self.comb_w,
            &self.comb_b,
            &self.lm_w,
            &self.lm_b,
        ];
        TENSOR_NAMES.iter().copied().zip(list).collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<(&'static str, &mut Matrix)> {
        let list = [
            &mut self.embed,
            &mut self.enc_fwd.wx,
            &mut self.enc_fwd.wh,
            &mut self.enc_fwd.bx,
            &mut self.enc_fwd.bh,
            &mut self.enc_bwd.wx,
            &mut self.enc_bwd.wh,
            &mut self.enc_bwd.bx,
            &mut self.enc_bwd.bh,
            &mut self.src_proj,
            &mut self.init_w,
            &mut self.init_b,
            &mut self.dec.wx,
            &mut self.dec.wh,
            &mut self.dec.bx,
            &mut self.dec.bh,
            &mut self.attn_q,
            &mut self.comb_w,
            &mut self.comb_b,
            &mut self.lm_w,
            &mut self.lm_b,
        ];
        TENSOR_NAMES.iter().copied().zip(list).collect()
    }

    pub(crate) fn zero(&mut self) {
        for (_, m) in self.tensors_mut() {
            m.fill(0.0);
        }
    }

    fn expected_shapes(vocab: usize, e: usize, h: usize) -> [(usize, usize); 21] {
        let hf = h / 2;
        [
            (vocab, e),
            (e, 3 * hf),
            (hf, 3 * hf),
            (1, 3 * hf),
            (1, 3 * hf),
            (e, 3 * hf),
            (hf, 3 * hf),
            (1, 3 * hf),
            (1, 3 * hf),
            (e, h),
            (h, h),
            (1, h),
            (e + h, 3 * h),
            (h, 3 * h),
            (1, 3 * h),
            (1, 3 * h),
            (h, h),
            (2 * h, h),
            (1, h),
            (h, vocab),
            (1, vocab),
        ]
    }
}

struct GruStep {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    z: Vec<f64>,
    r: Vec<f64>,
    n: Vec<f64>,
    /// Recurrent part of the candidate pre-activation, before the reset gate.
    ghn: Vec<f64>,
    h: Vec<f64>,
}

fn gru_forward(p: &GruParams, x: &[f64], h_prev: &[f64]) -> GruStep {
    let hd = p.hidden();
    let mut gx = p.bx.data.clone();
    vec_mat_acc(x, &p.wx, &mut gx);
    let mut gh = p.bh.data.clone();
    vec_mat_acc(h_prev, &p.wh, &mut gh);
    let mut z = vec![0.0; hd];
    let mut r = vec![0.0; hd];
    let mut n = vec![0.0; hd];
    let mut h = vec![0.0; hd];
    for k in 0..hd {
        z[k] = sigmoid(gx[k] + gh[k]);
        r[k] = sigmoid(gx[hd + k] + gh[hd + k]);
        n[k] = libm::tanh(gx[2 * hd + k] + r[k] * gh[2 * hd + k]);
        h[k] = (1.0 - z[k]) * n[k] + z[k] * h_prev[k];
    }
    GruStep { x: x.to_vec(), h_prev: h_prev.to_vec(), z, r, n, ghn: gh[2 * hd..].to_vec(), h }
}

/// Accumulates parameter gradients for one GRU step and returns
/// `(dx, dh_prev)`.
fn gru_backward(p: &GruParams, g: &mut GruParams, step: &GruStep, dh: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let hd = p.hidden();
    let mut dgx = vec![0.0; 3 * hd];
    let mut dgh = vec![0.0; 3 * hd];
    let mut dh_prev = vec![0.0; hd];
    for k in 0..hd {
        let (z, r, n) = (step.z[k], step.r[k], step.n[k]);
        let dn = dh[k] * (1.0 - z);
        let dz = dh[k] * (step.h_prev[k] - n);
        dh_prev[k] = dh[k] * z;
        let dan = dn * (1.0 - n * n);
        let dr = dan * step.ghn[k];
        let daz = dz * z * (1.0 - z);
        let dar = dr * r * (1.0 - r);
        dgx[k] = daz;
        dgx[hd + k] = dar;
        dgx[2 * hd + k] = dan;
        dgh[k] = daz;
        dgh[hd + k] = dar;
        dgh[2 * hd + k] = dan * r;
    }
    outer_acc(&step.x, &dgx, &mut g.wx);
    add_assign(&mut g.bx.data, &dgx);
    outer_acc(&step.h_prev, &dgh, &mut g.wh);
    add_assign(&mut g.bh.data, &dgh);
    let mut dx = vec![0.0; step.x.len()];
    mat_vec_acc(&p.wx, &dgx, &mut dx);
    mat_vec_acc(&p.wh, &dgh, &mut dh_prev);
    (dx, dh_prev)
}

/// Cached encoder pass for one source sentence.
pub struct Encoding {
    ids: Vec<usize>,
    fwd: Vec<GruStep>,
    bwd: Vec<GruStep>,
    states: Vec<Vec<f64>>,
    mean: Vec<f64>,
    s0: Vec<f64>,
}

struct DecStep {
    input: usize,
    target: usize,
    gru: GruStep,
    q: Vec<f64>,
    attn: Vec<f64>,
    ctx: Vec<f64>,
    o: Vec<f64>,
    probs: Vec<f64>,
    logp: f64,
}

/// Trainable encoder-decoder implementing [`GenerativeScorer`].
#[derive(Debug, Clone, PartialEq)]
pub struct TinySeq2Seq {
    vocab: Vocab,
    config: ModelConfig,
    params: Params,
}

impl TinySeq2Seq {
    pub fn new(vocab: Vocab, config: ModelConfig) -> Result<Self, ScoreError> {
        if config.embed_dim == 0 || config.hidden_dim < 2 || !config.hidden_dim.is_multiple_of(2) {
            return Err(ScoreError::InvalidModel(String::from(
                "embed_dim must be >= 1 and hidden_dim a positive even number",
            )));
        }
        let params = Params::new(vocab.len(), &config);
        Ok(Self { vocab, config, params })
    }

    /// Reassembles a model from named tensors (as stored in a checkpoint).
    pub fn from_tensors(
        vocab: Vocab,
        config: ModelConfig,
        tensors: Vec<(String, Matrix)>,
    ) -> Result<Self, ScoreError> {
        let mut model = Self::new(vocab, config)?;
        let shapes = Params::expected_shapes(model.vocab.len(), config.embed_dim, config.hidden_dim);
        if tensors.len() != shapes.len() {
            return Err(ScoreError::InvalidModel(alloc::format!(
                "expected {} tensors, found {}",
                shapes.len(),
                tensors.len()
            )));
        }
        for (((name, slot), (given_name, matrix)), shape) in
            model.params.tensors_mut().into_iter().zip(tensors).zip(shapes)
        {
            if name != given_name || matrix.shape() != shape {
                return Err(ScoreError::InvalidModel(alloc::format!(
                    "tensor `{given_name}` {:?} does not match `{name}` {:?}",
                    matrix.shape(),
                    shape
                )));
            }
            *slot = matrix;
        }
        Ok(model)
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub(crate) fn params_mut(&mut self) -> &mut Params {
        &mut self.params
    }

    pub fn tensors(&self) -> Vec<(&'static str, &Matrix)> {
        self.params.tensors()
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|(_, m)| m.data.len()).sum()
    }

    /// Adds unseen tokens to the shared vocabulary. New embedding rows are
    /// drawn from `seed`; new output columns start at zero. Returns the
    /// number of added tokens (zero means nothing was resized).
    pub fn extend_vocab<I, S>(&mut self, tokens: I, seed: u64) -> usize
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let old = self.vocab.len();
        let added = self.vocab.extend(tokens);
        if added == 0 {
            return 0;
        }
        let new = self.vocab.len();
        let (e, h) = (self.config.embed_dim, self.config.hidden_dim);
        let mut rng = rng::seeded(seed);
        let fresh = Matrix::uniform(added, e, 0.1, &mut rng);
        self.params.embed.data.extend_from_slice(&fresh.data);
        self.params.embed.rows = new;

        let mut lm_w = Matrix::zeros(h, new);
        for r in 0..h {
            lm_w.row_mut(r)[..old].copy_from_slice(self.params.lm_w.row(r));
        }
        self.params.lm_w = lm_w;
        self.params.lm_b.data.resize(new, 0.0);
        self.params.lm_b.cols = new;
        added
    }

    pub fn encode<S: AsRef<str>>(&self, source: &[S]) -> Encoding {
        let p = &self.params;
        let ids = self.vocab.encode(source);
        let hf = self.config.hidden_dim / 2;
        let h = self.config.hidden_dim;

        let mut fwd = Vec::with_capacity(ids.len());
        let mut prev = vec![0.0; hf];
        for &id in &ids {
            let step = gru_forward(&p.enc_fwd, p.embed.row(id), &prev);
            prev.clone_from(&step.h);
            fwd.push(step);
        }
        let mut bwd: Vec<GruStep> = Vec::with_capacity(ids.len());
        let mut next = vec![0.0; hf];
        for &id in ids.iter().rev() {
            let step = gru_forward(&p.enc_bwd, p.embed.row(id), &next);
            next.clone_from(&step.h);
            bwd.push(step);
        }
        bwd.reverse();

        let states: Vec<Vec<f64>> = fwd
            .iter()
            .zip(&bwd)
            .zip(&ids)
            .map(|((f, b), &id)| {
                let mut s = f.h.clone();
                s.extend_from_slice(&b.h);
                vec_mat_acc(p.embed.row(id), &p.src_proj, &mut s);
                s
            })
            .collect();
        let mut mean = vec![0.0; h];
        for s in &states {
            add_assign(&mut mean, s);
        }
        if !states.is_empty() {
            let n = states.len() as f64;
            mean.iter_mut().for_each(|m| *m /= n);
        }
        let mut s0 = p.init_b.data.clone();
        vec_mat_acc(&mean, &p.init_w, &mut s0);
        s0.iter_mut().for_each(|x| *x = libm::tanh(*x));
        Encoding { ids, fwd, bwd, states, mean, s0 }
    }

    fn decode(&self, enc: &Encoding, targets: &[usize]) -> Vec<DecStep> {
        let p = &self.params;
        let (e, h) = (self.config.embed_dim, self.config.hidden_dim);
        let scale = 1.0 / libm::sqrt(h as f64);
        let vocab = self.vocab.len();

        let mut steps = Vec::with_capacity(targets.len());
        let mut s = enc.s0.clone();
        let mut o_prev = vec![0.0; h];
        let mut input = BOS_ID;
        let mut x = vec![0.0; e + h];
        for &target in targets {
            let step_input = input;
            x[..e].copy_from_slice(p.embed.row(input));
            x[e..].copy_from_slice(&o_prev);
            let gru = gru_forward(&p.dec, &x, &s);
            let mut q = vec![0.0; h];
            vec_mat_acc(&gru.h, &p.attn_q, &mut q);

            let scores: Vec<f64> = enc.states.iter().map(|k| dot(&q, k) * scale).collect();
            let mut attn = vec![0.0; scores.len()];
            let mut ctx = vec![0.0; h];
            if !scores.is_empty() {
                softmax_into(&scores, &mut attn);
                for (a, state) in attn.iter().zip(&enc.states) {
                    for (c, v) in ctx.iter_mut().zip(state) {
                        *c += a * v;
                    }
                }
            }

            let mut o = p.comb_b.data.clone();
            let mut u = gru.h.clone();
            u.extend_from_slice(&ctx);
            vec_mat_acc(&u, &p.comb_w, &mut o);
            o.iter_mut().for_each(|v| *v = libm::tanh(*v));

            let mut logits = p.lm_b.data.clone();
            vec_mat_acc(&o, &p.lm_w, &mut logits);
            let mut probs = vec![0.0; vocab];
            let lse = softmax_into(&logits, &mut probs);
            let logp = logits[target] - lse;

            s.clone_from(&gru.h);
            o_prev.clone_from(&o);
            input = target;
            steps.push(DecStep { input: step_input, target, gru, q, attn, ctx, o, probs, logp });
        }
        steps
    }

    fn scores_from_steps(steps: &[DecStep]) -> TokenScores {
        TokenScores::from_per_token(steps.iter().map(|s| s.logp).collect())
    }

    /// Scores several targets against one encoding of `source`.
    pub fn score_with<S: AsRef<str>>(&self, enc: &Encoding, target: &[S]) -> TokenScores {
        let ids = self.vocab.encode(target);
        Self::scores_from_steps(&self.decode(enc, &ids))
    }

    /// Teacher-forced next-token distributions, one per target position.
    pub fn step_distributions<S: AsRef<str>>(&self, source: &[S], target: &[S]) -> Vec<Vec<f64>> {
        let enc = self.encode(source);
        let ids = self.vocab.encode(target);
        self.decode(&enc, &ids).into_iter().map(|s| s.probs).collect()
    }

    /// Negative log-likelihood of `target` (scored as given, no EOS added)
    /// times `weight`, accumulating `weight`-scaled gradients into `grads`.
    pub(crate) fn nll_and_grad<S: AsRef<str>>(
        &self,
        source: &[S],
        target: &[S],
        weight: f64,
        grads: &mut Params,
    ) -> f64 {
        let enc = self.encode(source);
        let ids = self.vocab.encode(target);
        let steps = self.decode(&enc, &ids);
        self.backward(&enc, &steps, weight, grads);
        -steps.iter().map(|s| s.logp).sum::<f64>() * weight
    }

    fn backward(&self, enc: &Encoding, steps: &[DecStep], weight: f64, g: &mut Params) {
        let p = &self.params;
        let (e, h) = (self.config.embed_dim, self.config.hidden_dim);
        let hf = h / 2;
        let scale = 1.0 / libm::sqrt(h as f64);
        let n = enc.states.len();

        let mut denc = vec![vec![0.0; h]; n];
        let mut do_next = vec![0.0; h];
        let mut ds_next = vec![0.0; h];
        for step in steps.iter().rev() {
            let mut dlogits: Vec<f64> = step.probs.iter().map(|p| p * weight).collect();
            dlogits[step.target] -= weight;
            outer_acc(&step.o, &dlogits, &mut g.lm_w);
            add_assign(&mut g.lm_b.data, &dlogits);

            let mut d_o = do_next;
            mat_vec_acc(&p.lm_w, &dlogits, &mut d_o);
            let dpre: Vec<f64> = d_o.iter().zip(&step.o).map(|(d, o)| d * (1.0 - o * o)).collect();
            let mut u = step.gru.h.clone();
            u.extend_from_slice(&step.ctx);
            outer_acc(&u, &dpre, &mut g.comb_w);
            add_assign(&mut g.comb_b.data, &dpre);
            let mut du = vec![0.0; 2 * h];
            mat_vec_acc(&p.comb_w, &dpre, &mut du);
            let mut ds = ds_next;
            add_assign(&mut ds, &du[..h]);
            let dctx = &du[h..];

            if n > 0 {
                let da: Vec<f64> = enc.states.iter().map(|k| dot(dctx, k)).collect();
                let mix: f64 = step.attn.iter().zip(&da).map(|(a, d)| a * d).sum();
                let mut dq = vec![0.0; h];
                for i in 0..n {
                    let a = step.attn[i];
                    let de = a * (da[i] - mix) * scale;
                    let state = &enc.states[i];
                    for k in 0..h {
                        denc[i][k] += a * dctx[k] + de * step.q[k];
                        dq[k] += de * state[k];
                    }
                }
                outer_acc(&step.gru.h, &dq, &mut g.attn_q);
                mat_vec_acc(&p.attn_q, &dq, &mut ds);
            }

            let (dx, dh_prev) = gru_backward(&p.dec, &mut g.dec, &step.gru, &ds);
            add_assign(g.embed.row_mut(step.input), &dx[..e]);
            do_next = dx[e..].to_vec();
            ds_next = dh_prev;
        }

        let dpre0: Vec<f64> = ds_next.iter().zip(&enc.s0).map(|(d, s)| d * (1.0 - s * s)).collect();
        outer_acc(&enc.mean, &dpre0, &mut g.init_w);
        add_assign(&mut g.init_b.data, &dpre0);
        if n == 0 {
            return;
        }
        let mut dmean = vec![0.0; h];
        mat_vec_acc(&p.init_w, &dpre0, &mut dmean);
        let inv = 1.0 / n as f64;
        for d in &mut denc {
            for (x, m) in d.iter_mut().zip(&dmean) {
                *x += m * inv;
            }
        }

        for (d, &id) in denc.iter().zip(&enc.ids) {
            outer_acc(p.embed.row(id), d, &mut g.src_proj);
            mat_vec_acc(&p.src_proj, d, g.embed.row_mut(id));
        }

        let mut carry = vec![0.0; hf];
        for i in (0..n).rev() {
            let mut dh = denc[i][..hf].to_vec();
            add_assign(&mut dh, &carry);
            let (dx, dprev) = gru_backward(&p.enc_fwd, &mut g.enc_fwd, &enc.fwd[i], &dh);
            add_assign(g.embed.row_mut(enc.ids[i]), &dx);
            carry = dprev;
        }
        let mut carry = vec![0.0; hf];
        for (i, d) in denc.iter().enumerate().take(n) {
            let mut dh = d[hf..].to_vec();
            add_assign(&mut dh, &carry);
            let (dx, dprev) = gru_backward(&p.enc_bwd, &mut g.enc_bwd, &enc.bwd[i], &dh);
            add_assign(g.embed.row_mut(enc.ids[i]), &dx);
            carry = dprev;
        }
    }
}

impl GenerativeScorer for TinySeq2Seq {
    fn score_target(&self, source: &[String], target: &[String]) -> Result<TokenScores, ScoreError> {
        if target.is_empty() {
            return Ok(TokenScores::default());
        }
        let enc = self.encode(source);
        Ok(self.score_with(&enc, target))
    }

    fn score_targets(&self, source: &[String], targets: &[Vec<String>]) -> Result<Vec<TokenScores>, ScoreError> {
        let enc = self.encode(source);
        Ok(targets
            .iter()
            .map(|t| if t.is_empty() { TokenScores::default() } else { self.score_with(&enc, t) })
            .collect())
    }
}

/// The end-of-sequence token appended to every template before scoring or
/// training.
pub fn with_eos(target: &[String]) -> Vec<String> {
    let mut out = target.to_vec();
    out.push(String::from(EOS));
    out
}
