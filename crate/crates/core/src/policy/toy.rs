//! Log-linear next-token policy over a closed vocabulary.
//!
//! The feature vector for position `t` is
//! `[1 | prompt bag (P) | one-hot(token t-1) (V) | one-hot(token t-2) (V)]`,
//! with `<bos>` standing in before the first token, and
//! `log π(y | ·) = log softmax(featuresᵀ W)[y]` for a `(1 + P + 2V) × V`
//! weight matrix `W`. For the toy policy the prompt bag is the set of
//! vocabulary tokens present in the prompt (each present token contributes
//! 1.0), so `P = V`.

use std::collections::BTreeSet;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::vocab::{tokenize, Vocab};
use super::{GenError, Generator, GeneratorRequest, PolicyError, TokenSequence};
use crate::reward::ANSWER_CLOSE;

/// Sparse prompt features: `(prompt dimension, value)`, sorted by dimension.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PromptBag {
    pub entries: Vec<(u32, f64)>,
}

impl PromptBag {
    pub fn from_dense(x: &[f64]) -> Self {
        Self {
            entries: x
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(i, v)| (i as u32, *v))
                .collect(),
        }
    }

    pub fn presence(ids: impl IntoIterator<Item = u32>) -> Self {
        let set: BTreeSet<u32> = ids.into_iter().collect();
        Self {
            entries: set.into_iter().map(|i| (i, 1.0)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    pub vocab: Vocab,
    pub prompt_dim: usize,
    /// Row-major `rows() × vocab.len()`.
    pub weights: Vec<f64>,
}

impl PolicyParams {
    pub fn zeros(vocab: Vocab) -> Self {
        let p = vocab.len();
        Self::zeros_with_prompt_dim(vocab, p)
    }

    pub fn zeros_with_prompt_dim(vocab: Vocab, prompt_dim: usize) -> Self {
        let v = vocab.len();
        Self {
            weights: vec![0.0; (1 + prompt_dim + 2 * v) * v],
            vocab,
            prompt_dim,
        }
    }

    /// Uniform weights in `[-scale, scale)`.
    pub fn random(vocab: Vocab, prompt_dim: usize, scale: f64, seed: u64) -> Self {
        let mut p = Self::zeros_with_prompt_dim(vocab, prompt_dim);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for w in &mut p.weights {
            *w = rng.random_range(-scale..scale);
        }
        p
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    pub fn rows(&self) -> usize {
        1 + self.prompt_dim + 2 * self.vocab.len()
    }

    fn row(&self, r: usize) -> &[f64] {
        let v = self.vocab.len();
        &self.weights[r * v..(r + 1) * v]
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.is_finite())
    }

    pub fn check_shape(&self) -> Result<(), PolicyError> {
        if self.weights.len() != self.rows() * self.vocab_size() {
            return Err(PolicyError::Shape(format!(
                "{} weights for a {}x{} matrix",
                self.weights.len(),
                self.rows(),
                self.vocab_size()
            )));
        }
        Ok(())
    }

    fn last_row(&self, tok: u32) -> usize {
        1 + self.prompt_dim + tok as usize
    }

    fn second_row(&self, tok: u32) -> usize {
        1 + self.prompt_dim + self.vocab.len() + tok as usize
    }

    /// Presence bag over the tokens of every section tag and body.
    pub fn prompt_bag(&self, sections: &[(String, String)]) -> PromptBag {
        debug_assert_eq!(self.prompt_dim, self.vocab.len());
        PromptBag::presence(sections.iter().flat_map(|(tag, text)| {
            tokenize(tag)
                .into_iter()
                .chain(tokenize(text))
                .filter_map(|t| self.vocab.id(t))
        }))
    }

    /// Bias plus prompt contribution, shared by every position of a segment.
    pub fn base_logits(&self, bag: &PromptBag) -> Vec<f64> {
        let mut out = self.row(0).to_vec();
        for &(i, x) in &bag.entries {
            for (o, w) in out.iter_mut().zip(self.row(1 + i as usize)) {
                *o += x * w;
            }
        }
        out
    }

    /// `out = base + W[last] + W[second]`.
    pub fn position_logits(&self, base: &[f64], prev: [u32; 2], out: &mut [f64]) {
        let a = self.row(self.last_row(prev[0]));
        let b = self.row(self.second_row(prev[1]));
        for (((o, x), y), z) in out.iter_mut().zip(base).zip(a).zip(b) {
            *o = x + y + z;
        }
    }

    /// `θ += scale · g`.
    pub fn add_scaled(&mut self, g: &Gradient, scale: f64) {
        for (w, d) in self.weights.iter_mut().zip(&g.data) {
            *w += scale * d;
        }
    }

    fn check_tokens(&self, tokens: &[u32]) -> Result<(), PolicyError> {
        match tokens.iter().find(|&&t| t as usize >= self.vocab.len()) {
            Some(t) => Err(PolicyError::UnknownToken(format!("#{t}"))),
            None => Ok(()),
        }
    }
}

/// Dense gradient with the same shape as [`PolicyParams::weights`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub data: Vec<f64>,
    pub cols: usize,
}

impl Gradient {
    pub fn zeros_like(p: &PolicyParams) -> Self {
        Self {
            data: vec![0.0; p.weights.len()],
            cols: p.vocab_size(),
        }
    }

    pub fn add(&mut self, other: &Gradient) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn scale(&mut self, s: f64) {
        for a in &mut self.data {
            *a *= s;
        }
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }
}

/// Accumulates `Σ_t ∂f/∂logits_t` for one segment into a [`Gradient`].
///
/// Per-position rows (previous tokens) are updated immediately; bias and
/// prompt rows receive the summed logit gradient in [`SegmentGrad::finish`].
pub struct SegmentGrad<'a> {
    params: &'a PolicyParams,
    grad: &'a mut Gradient,
    bag: &'a PromptBag,
    sum: Vec<f64>,
}

impl<'a> SegmentGrad<'a> {
    pub fn new(params: &'a PolicyParams, bag: &'a PromptBag, grad: &'a mut Gradient) -> Self {
        Self {
            sum: vec![0.0; params.vocab_size()],
            params,
            grad,
            bag,
        }
    }

    pub fn add(&mut self, prev: [u32; 2], dlogits: &[f64]) {
        for (s, d) in self.sum.iter_mut().zip(dlogits) {
            *s += d;
        }
        let r = self.params.last_row(prev[0]);
        for (g, d) in self.grad.row_mut(r).iter_mut().zip(dlogits) {
            *g += d;
        }
        let r = self.params.second_row(prev[1]);
        for (g, d) in self.grad.row_mut(r).iter_mut().zip(dlogits) {
            *g += d;
        }
    }

    pub fn finish(self) {
        let Self { grad, bag, sum, .. } = self;
        for (g, d) in grad.row_mut(0).iter_mut().zip(&sum) {
            *g += d;
        }
        for &(i, x) in &bag.entries {
            for (g, d) in grad.row_mut(1 + i as usize).iter_mut().zip(&sum) {
                *g += x * d;
            }
        }
    }
}

/// In-place log-softmax; returns the log normalizer.
pub fn log_softmax(logits: &mut [f64]) -> f64 {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let z = logits.iter().map(|x| (x - m).exp()).sum::<f64>().ln() + m;
    for x in logits.iter_mut() {
        *x -= z;
    }
    z
}

/// Exact `KL(p ‖ q)` between two categoricals given as log-probabilities,
/// and its gradient with respect to the logits of `p`.
pub fn kl_and_grad(logp: &[f64], logq: &[f64]) -> (f64, Vec<f64>) {
    let kl: f64 = logp
        .iter()
        .zip(logq)
        .map(|(lp, lq)| lp.exp() * (lp - lq))
        .sum();
    let grad = logp
        .iter()
        .zip(logq)
        .map(|(lp, lq)| lp.exp() * (lp - lq - kl))
        .collect();
    (kl, grad)
}

/// `(last, second-to-last)` before each position of `tokens`.
pub(crate) fn prev_pairs(bos: u32, tokens: &[u32]) -> impl Iterator<Item = [u32; 2]> + '_ {
    (0..tokens.len()).map(move |t| {
        let last = if t >= 1 { tokens[t - 1] } else { bos };
        let second = if t >= 2 { tokens[t - 2] } else { bos };
        [last, second]
    })
}

/// Per-token log-probabilities of `tokens` and the gradient of their sum.
pub fn logprob_and_grad(
    params: &PolicyParams,
    bag: &PromptBag,
    tokens: &[u32],
) -> Result<(Vec<f64>, Gradient), PolicyError> {
    params.check_tokens(tokens)?;
    let mut grad = Gradient::zeros_like(params);
    let mut out = Vec::with_capacity(tokens.len());
    if tokens.is_empty() {
        return Ok((out, grad));
    }
    let base = params.base_logits(bag);
    let mut lp = vec![0.0; params.vocab_size()];
    let mut seg = SegmentGrad::new(params, bag, &mut grad);
    for (prev, &y) in prev_pairs(params.vocab.bos(), tokens).zip(tokens) {
        params.position_logits(&base, prev, &mut lp);
        log_softmax(&mut lp);
        out.push(lp[y as usize]);
        // d log p_y / d z = onehot(y) - p
        let mut d: Vec<f64> = lp.iter().map(|l| -l.exp()).collect();
        d[y as usize] += 1.0;
        seg.add(prev, &d);
    }
    seg.finish();
    Ok((out, grad))
}

/// Samples up to `max_tokens` tokens, stopping after `stop`. Temperature 0 is
/// greedy (lowest id wins ties). Returned log-probabilities are under the
/// untempered policy. The flag reports whether `stop` was emitted.
pub fn sample(
    params: &PolicyParams,
    bag: &PromptBag,
    temperature: f64,
    seed: u64,
    max_tokens: usize,
    stop: Option<u32>,
) -> (TokenSequence, bool) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = params.base_logits(bag);
    let bos = params.vocab.bos();
    let v = params.vocab_size();
    let mut logits = vec![0.0; v];
    let mut tokens = Vec::new();
    let mut logprobs = Vec::new();
    let mut stopped = false;
    let mut prev = [bos, bos];
    while tokens.len() < max_tokens {
        params.position_logits(&base, prev, &mut logits);
        let mut lp = logits.clone();
        log_softmax(&mut lp);
        let y = if temperature <= 0.0 {
            let mut best = 0;
            for (i, x) in logits.iter().enumerate() {
                if *x > logits[best] {
                    best = i;
                }
            }
            best
        } else {
            let mut scaled: Vec<f64> = logits.iter().map(|x| x / temperature).collect();
            log_softmax(&mut scaled);
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut pick = v - 1;
            for (i, l) in scaled.iter().enumerate() {
                acc += l.exp();
                if u < acc {
                    pick = i;
                    break;
                }
            }
            pick
        };
        tokens.push(y as u32);
        logprobs.push(lp[y]);
        prev = [y as u32, prev[0]];
        if Some(y as u32) == stop {
            stopped = true;
            break;
        }
    }
    let text = params.vocab.decode(&tokens);
    (
        TokenSequence {
            tokens,
            text,
            logprobs: Some(logprobs),
        },
        stopped,
    )
}

/// [`Generator`] backed by [`PolicyParams`].
#[derive(Clone)]
pub struct ToyPolicy {
    pub params: Arc<PolicyParams>,
}

impl ToyPolicy {
    pub fn new(params: Arc<PolicyParams>) -> Self {
        Self { params }
    }
}

impl Generator for ToyPolicy {
    fn generate(&self, req: &GeneratorRequest) -> Result<TokenSequence, GenError> {
        let p = &self.params;
        let bag = p.prompt_bag(&req.prompt_sections);
        let stop_tok = req.stop.as_deref().unwrap_or(ANSWER_CLOSE);
        let stop = p.vocab.id(stop_tok);
        let (seq, stopped) = sample(p, &bag, req.temperature, req.seed, req.max_tokens, stop);
        if stopped {
            Ok(seq)
        } else {
            Err(GenError::BudgetExceeded { partial: seq })
        }
    }

    fn name(&self) -> &str {
        "toy"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab(n: usize) -> Vocab {
        let words: Vec<String> = (0..n.saturating_sub(super::super::SPECIAL_TOKENS.len()))
            .map(|i| format!("w{i}"))
            .collect();
        Vocab::build(words.iter().map(String::as_str))
    }

    #[test]
    fn uniform_single_token() {
        let v = vocab(12);
        let n = v.len() as f64;
        let p = PolicyParams::zeros(v);
        let (lp, _) = logprob_and_grad(&p, &PromptBag::default(), &[3]).unwrap();
        assert!((lp[0] + n.ln()).abs() < 1e-12);
    }

    #[test]
    fn empty_sequence() {
        let p = PolicyParams::random(vocab(10), 4, 0.5, 1);
        let (lp, g) = logprob_and_grad(&p, &PromptBag::default(), &[]).unwrap();
        assert!(lp.is_empty());
        assert!(g.data.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn unknown_token_rejected() {
        let p = PolicyParams::zeros(vocab(10));
        assert!(matches!(
            logprob_and_grad(&p, &PromptBag::default(), &[99]),
            Err(PolicyError::UnknownToken(_))
        ));
    }

    #[test]
    fn distributions_normalize() {
        let p = PolicyParams::random(vocab(20), 20, 2.0, 3);
        let bag = PromptBag::presence([1, 5, 9]);
        let base = p.base_logits(&bag);
        let mut z = vec![0.0; p.vocab_size()];
        for prev in [[0, 0], [4, 7], [19, 2]] {
            p.position_logits(&base, prev, &mut z);
            log_softmax(&mut z);
            let total: f64 = z.iter().map(|l| l.exp()).sum();
            assert!((total - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn greedy_is_reproducible_and_prefers_heavy_token() {
        let v = vocab(10);
        let mut p = PolicyParams::zeros(v);
        // bias row favours token 9
        p.weights[9] = 5.0;
        let (a, _) = sample(&p, &PromptBag::default(), 0.0, 1, 4, None);
        let (b, _) = sample(&p, &PromptBag::default(), 0.0, 2, 4, None);
        assert_eq!(a.tokens, vec![9; 4]);
        assert_eq!(a, b);
    }

    #[test]
    fn seeded_sampling_is_reproducible() {
        let p = PolicyParams::random(vocab(16), 16, 1.0, 9);
        let (a, _) = sample(&p, &PromptBag::default(), 1.0, 42, 20, None);
        let (b, _) = sample(&p, &PromptBag::default(), 1.0, 42, 20, None);
        assert_eq!(a, b);
    }

    #[test]
    fn kl_closed_form() {
        let mut p = vec![0.0, 0.0];
        let mut q = vec![0.0, 3f64.ln()];
        log_softmax(&mut p);
        log_softmax(&mut q);
        let (kl, _) = kl_and_grad(&p, &q);
        assert!((kl - 0.143_841_036_225_890_46).abs() < 1e-12);
        let (zero, g) = kl_and_grad(&p, &p);
        assert_eq!(zero, 0.0);
        assert!(g.iter().all(|x| *x == 0.0));
    }
}
