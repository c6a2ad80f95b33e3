//! Distributional semantic memory.
//!
//! Each agent with semantic capacity owns an [`EmbeddingNet`]: a one-hot
//! input selects an item embedding, a ReLU hidden layer transforms it, and a
//! softmax over the vocabulary predicts which item co-occurs with it in a
//! successful combination (skip-gram style). Embedding cosine similarity
//! drives generalization.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::task::{Combination, ItemId};

#[derive(Debug, Error)]
pub enum NetError {
    #[error("network dimensions must be at least 1 (vocab {vocab}, embed {embed}, hidden {hidden})")]
    ZeroDimension { vocab: usize, embed: usize, hidden: usize },
    #[error("item {id} is outside the vocabulary of {vocab}")]
    OutOfRange { id: u32, vocab: usize },
    #[error("training needs at least one pair")]
    EmptyPairs,
    #[error("learning rate must be finite and non-negative, got {0}")]
    BadLearningRate(f64),
    #[error("candidate set is empty")]
    EmptyCandidates,
    #[error("noise standard deviation must be finite and non-negative, got {0}")]
    BadNoise(f64),
    #[error("similarity matrix: {0}")]
    Matrix(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// An (input item → co-occurring item) training example.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TrainingPair {
    pub input: ItemId,
    pub target: ItemId,
}

impl TrainingPair {
    pub fn new(input: u32, target: u32) -> Self {
        Self { input: ItemId(input), target: ItemId(target) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictMode {
    #[default]
    Sample,
    Argmax,
}

/// Parameter block selector, used by gradient checks and tooling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamBlock {
    Embedding,
    Hidden,
    Output,
}

/// Gradients of the cross-entropy loss for a single pair.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub input: ItemId,
    /// Gradient w.r.t. the embedding row of `input` only.
    pub embedding_row: Vec<f64>,
    pub hidden: Vec<f64>,
    pub output: Vec<f64>,
}

/// One-hidden-layer network housing an agent's semantic memory.
///
/// Storage is row-major: `embedding[x][i]`, `hidden[i][j]` (embed × hidden),
/// `output[j][k]` (hidden × vocab).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingNet {
    vocab_size: usize,
    embed_dim: usize,
    hidden_dim: usize,
    embedding: Vec<f64>,
    hidden: Vec<f64>,
    output: Vec<f64>,
    pub learning_rate: f64,
}

struct Activations {
    pre: Vec<f64>,
    h: Vec<f64>,
    y: Vec<f64>,
    log_norm: f64,
    z: Vec<f64>,
}

pub const DEFAULT_LEARNING_RATE: f64 = 0.05;
const INIT_RANGE: f64 = 0.1;

/// Weights drawn i.i.d. from U[-0.1, 0.1] with a generator seeded by `seed`.
pub fn init_net(vocab_size: usize, embed_dim: usize, hidden_dim: usize, seed: u64) -> Result<EmbeddingNet, NetError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    EmbeddingNet::random(vocab_size, embed_dim, hidden_dim, &mut rng)
}

impl EmbeddingNet {
    pub fn random<R: Rng + ?Sized>(vocab_size: usize, embed_dim: usize, hidden_dim: usize, rng: &mut R) -> Result<Self, NetError> {
        let mut net = Self::zeros(vocab_size, embed_dim, hidden_dim)?;
        for w in net.embedding.iter_mut().chain(net.hidden.iter_mut()).chain(net.output.iter_mut()) {
            *w = rng.random_range(-INIT_RANGE..=INIT_RANGE);
        }
        Ok(net)
    }

    pub fn zeros(vocab_size: usize, embed_dim: usize, hidden_dim: usize) -> Result<Self, NetError> {
        if vocab_size == 0 || embed_dim == 0 || hidden_dim == 0 {
            return Err(NetError::ZeroDimension { vocab: vocab_size, embed: embed_dim, hidden: hidden_dim });
        }
        Ok(Self {
            vocab_size,
            embed_dim,
            hidden_dim,
            embedding: vec![0.0; vocab_size * embed_dim],
            hidden: vec![0.0; embed_dim * hidden_dim],
            output: vec![0.0; hidden_dim * vocab_size],
            learning_rate: DEFAULT_LEARNING_RATE,
        })
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn embed_dim(&self) -> usize {
        self.embed_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    pub fn embedding(&self, id: ItemId) -> &[f64] {
        let i = id.index() * self.embed_dim;
        &self.embedding[i..i + self.embed_dim]
    }

    pub fn embedding_mut(&mut self, id: ItemId) -> &mut [f64] {
        let i = id.index() * self.embed_dim;
        &mut self.embedding[i..i + self.embed_dim]
    }

    pub fn block(&self, block: ParamBlock) -> &[f64] {
        match block {
            ParamBlock::Embedding => &self.embedding,
            ParamBlock::Hidden => &self.hidden,
            ParamBlock::Output => &self.output,
        }
    }

    pub fn block_mut(&mut self, block: ParamBlock) -> &mut [f64] {
        match block {
            ParamBlock::Embedding => &mut self.embedding,
            ParamBlock::Hidden => &mut self.hidden,
            ParamBlock::Output => &mut self.output,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.embedding.iter().chain(&self.hidden).chain(&self.output).all(|w| w.is_finite())
    }

    fn check(&self, id: ItemId) -> Result<(), NetError> {
        if id.index() >= self.vocab_size {
            return Err(NetError::OutOfRange { id: id.0, vocab: self.vocab_size });
        }
        Ok(())
    }

    fn activations(&self, x: ItemId) -> Activations {
        let (hd, v) = (self.hidden_dim, self.vocab_size);
        let e = self.embedding(x);
        let mut pre = vec![0.0; hd];
        for (i, &ei) in e.iter().enumerate() {
            let row = &self.hidden[i * hd..(i + 1) * hd];
            for (p, &w) in pre.iter_mut().zip(row) {
                *p += ei * w;
            }
        }
        let h: Vec<f64> = pre.iter().map(|&a| a.max(0.0)).collect();
        let mut z = vec![0.0; v];
        for (j, &hj) in h.iter().enumerate() {
            if hj == 0.0 {
                continue;
            }
            let row = &self.output[j * v..(j + 1) * v];
            for (zk, &w) in z.iter_mut().zip(row) {
                *zk += hj * w;
            }
        }
        let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut y: Vec<f64> = z.iter().map(|&zk| (zk - max).exp()).collect();
        let sum: f64 = y.iter().sum();
        for yk in &mut y {
            *yk /= sum;
        }
        Activations { pre, h, y, log_norm: max + sum.ln(), z }
    }

    /// Predicted distribution over partners of `x`.
    pub fn forward(&self, x: ItemId) -> Result<Vec<f64>, NetError> {
        self.check(x)?;
        Ok(self.activations(x).y)
    }

    /// Cross-entropy `-ln p(target | input)`.
    pub fn loss(&self, pair: TrainingPair) -> Result<f64, NetError> {
        self.check(pair.input)?;
        self.check(pair.target)?;
        let act = self.activations(pair.input);
        Ok(act.log_norm - act.z[pair.target.index()])
    }

    pub fn mean_loss(&self, pairs: &[TrainingPair]) -> Result<f64, NetError> {
        if pairs.is_empty() {
            return Err(NetError::EmptyPairs);
        }
        let mut total = 0.0;
        for &p in pairs {
            total += self.loss(p)?;
        }
        Ok(total / pairs.len() as f64)
    }

    /// Backpropagated gradients for one pair, plus its loss.
    pub fn gradients(&self, pair: TrainingPair) -> Result<(f64, Gradients), NetError> {
        self.check(pair.input)?;
        self.check(pair.target)?;
        let (ed, hd, v) = (self.embed_dim, self.hidden_dim, self.vocab_size);
        let act = self.activations(pair.input);
        let loss = act.log_norm - act.z[pair.target.index()];

        let mut dz = act.y;
        dz[pair.target.index()] -= 1.0;

        let mut g_out = vec![0.0; hd * v];
        let mut dh = vec![0.0; hd];
        for j in 0..hd {
            let row = &self.output[j * v..(j + 1) * v];
            let hj = act.h[j];
            let grow = &mut g_out[j * v..(j + 1) * v];
            let mut acc = 0.0;
            for k in 0..v {
                grow[k] = hj * dz[k];
                acc += row[k] * dz[k];
            }
            dh[j] = acc;
        }
        let da: Vec<f64> = dh.iter().zip(&act.pre).map(|(&d, &a)| if a > 0.0 { d } else { 0.0 }).collect();

        let e = self.embedding(pair.input);
        let mut g_hidden = vec![0.0; ed * hd];
        let mut g_emb = vec![0.0; ed];
        for i in 0..ed {
            let row = &self.hidden[i * hd..(i + 1) * hd];
            let grow = &mut g_hidden[i * hd..(i + 1) * hd];
            let mut acc = 0.0;
            for j in 0..hd {
                grow[j] = e[i] * da[j];
                acc += row[j] * da[j];
            }
            g_emb[i] = acc;
        }
        Ok((loss, Gradients { input: pair.input, embedding_row: g_emb, hidden: g_hidden, output: g_out }))
    }

    fn apply(&mut self, g: &Gradients, lr: f64) {
        for (w, d) in self.output.iter_mut().zip(&g.output) {
            *w -= lr * d;
        }
        for (w, d) in self.hidden.iter_mut().zip(&g.hidden) {
            *w -= lr * d;
        }
        let row = self.embedding_mut(g.input);
        for (w, d) in row.iter_mut().zip(&g.embedding_row) {
            *w -= lr * d;
        }
    }

    /// Per-pair SGD over `pairs` for `epochs` passes, in the given order.
    ///
    /// Returns the mean loss of each epoch, measured on each pair just
    /// before its update.
    pub fn train(&mut self, pairs: &[TrainingPair], epochs: usize, learning_rate: f64) -> Result<Vec<f64>, NetError> {
        if pairs.is_empty() {
            return Err(NetError::EmptyPairs);
        }
        if !learning_rate.is_finite() || learning_rate < 0.0 {
            return Err(NetError::BadLearningRate(learning_rate));
        }
        for p in pairs {
            self.check(p.input)?;
            self.check(p.target)?;
        }
        let mut trace = Vec::with_capacity(epochs);
        for _ in 0..epochs {
            let mut total = 0.0;
            for &p in pairs {
                let (loss, g) = self.gradients(p)?;
                total += loss;
                if learning_rate > 0.0 {
                    self.apply(&g, learning_rate);
                }
            }
            trace.push(total / pairs.len() as f64);
        }
        Ok(trace)
    }

    /// Cosine similarity of two item embeddings; zero-norm rows give 0.
    pub fn similarity(&self, i: ItemId, j: ItemId) -> Result<f64, NetError> {
        self.check(i)?;
        self.check(j)?;
        if i == j {
            return Ok(1.0);
        }
        Ok(cosine(self.embedding(i), self.embedding(j)))
    }
}

pub(crate) fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0)
}

/// Ordered co-occurrence pairs between the ingredient positions of `c`.
///
/// With `product` given, each ingredient additionally predicts the product
/// (an ablation; the default pipeline passes `None`).
pub fn pairs_from_combination(c: &Combination, product: Option<ItemId>) -> Vec<TrainingPair> {
    let items = c.items();
    let mut out = Vec::with_capacity(items.len() * items.len());
    for (a, &x) in items.iter().enumerate() {
        for (b, &y) in items.iter().enumerate() {
            if a != b {
                out.push(TrainingPair { input: x, target: y });
            }
        }
    }
    if let Some(p) = product {
        out.extend(items.iter().map(|&x| TrainingPair { input: x, target: p }));
    }
    out
}

/// Picks a partner for `x` among `candidates` from the net's prediction.
pub fn predict_partner<R: Rng + ?Sized>(
    net: &EmbeddingNet,
    x: ItemId,
    candidates: &[ItemId],
    mode: PredictMode,
    rng: &mut R,
) -> Result<ItemId, NetError> {
    if candidates.is_empty() {
        return Err(NetError::EmptyCandidates);
    }
    for &c in candidates {
        net.check(c)?;
    }
    if candidates.len() == 1 {
        return Ok(candidates[0]);
    }
    let y = net.forward(x)?;
    match mode {
        PredictMode::Argmax => {
            let mut best = candidates[0];
            for &c in &candidates[1..] {
                let (pc, pb) = (y[c.index()], y[best.index()]);
                if pc > pb || (pc == pb && c < best) {
                    best = c;
                }
            }
            Ok(best)
        }
        PredictMode::Sample => {
            let total: f64 = candidates.iter().map(|c| y[c.index()]).sum();
            let mut u = rng.random::<f64>() * total;
            for &c in candidates {
                u -= y[c.index()];
                if u < 0.0 {
                    return Ok(c);
                }
            }
            Ok(*candidates.last().unwrap())
        }
    }
}

/// Copy of `net` with i.i.d. N(0, sd²) noise on every weight.
pub fn perturb_net<R: Rng + ?Sized>(net: &EmbeddingNet, sd: f64, rng: &mut R) -> Result<EmbeddingNet, NetError> {
    if !sd.is_finite() || sd < 0.0 {
        return Err(NetError::BadNoise(sd));
    }
    let mut out = net.clone();
    if sd == 0.0 {
        return Ok(out);
    }
    let normal = Normal::new(0.0, sd).map_err(|_| NetError::BadNoise(sd))?;
    for w in out.embedding.iter_mut().chain(out.hidden.iter_mut()).chain(out.output.iter_mut()) {
        *w += normal.sample(rng);
    }
    Ok(out)
}

/// Symmetric item × item similarity table with labelled rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityMatrix {
    labels: Vec<String>,
    values: Vec<f64>,
}

impl SimilarityMatrix {
    pub fn new(labels: Vec<String>, values: Vec<f64>) -> Result<Self, NetError> {
        let n = labels.len();
        if values.len() != n * n {
            return Err(NetError::Matrix(format!("expected {} entries for {n} labels, got {}", n * n, values.len())));
        }
        Ok(Self { labels, values })
    }

    pub fn identity(n: usize) -> Self {
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            values[i * n + i] = 1.0;
        }
        Self { labels: (0..n).map(|i| i.to_string()).collect(), values }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.labels.len() + j]
    }

    pub fn at(&self, i: ItemId, j: ItemId) -> f64 {
        self.get(i.index(), j.index())
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let n = self.labels.len();
        self.values[i * n + j] = v;
    }

    /// Entries strictly above the diagonal, row by row.
    pub fn upper_triangle(&self) -> Vec<f64> {
        let n = self.len();
        let mut out = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                out.push(self.get(i, j));
            }
        }
        out
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        let n = self.len();
        (0..n).all(|i| (0..n).all(|j| (self.get(i, j) - self.get(j, i)).abs() <= tol))
    }

    /// CSV with a header of labels; each row starts with its label.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), NetError> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["item".to_string()];
        header.extend(self.labels.iter().cloned());
        wr.write_record(&header)?;
        let n = self.len();
        for i in 0..n {
            let mut row = vec![self.labels[i].clone()];
            row.extend((0..n).map(|j| format!("{}", self.get(i, j))));
            wr.write_record(&row)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self, NetError> {
        let mut rd = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
        let header = rd.headers()?.clone();
        if header.len() < 2 {
            return Err(NetError::Matrix("header needs a label column and at least one item".into()));
        }
        let labels: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let n = labels.len();
        let mut values = Vec::with_capacity(n * n);
        let mut rows = 0;
        for rec in rd.records() {
            let rec = rec?;
            if rec.len() != n + 1 {
                return Err(NetError::Matrix(format!("row {} has {} cells, expected {}", rows + 1, rec.len(), n + 1)));
            }
            for cell in rec.iter().skip(1) {
                let v: f64 = cell
                    .trim()
                    .parse()
                    .map_err(|_| NetError::Matrix(format!("row {}: `{cell}` is not a number", rows + 1)))?;
                values.push(v);
            }
            rows += 1;
        }
        if rows != n {
            return Err(NetError::Matrix(format!("{rows} rows for {n} columns")));
        }
        Self::new(labels, values)
    }
}

/// Full pairwise cosine matrix over the net's vocabulary.
pub fn export_similarity_matrix(net: &EmbeddingNet, labels: Option<&[String]>) -> SimilarityMatrix {
    let n = net.vocab_size();
    let labels = match labels {
        Some(l) if l.len() == n => l.to_vec(),
        _ => (0..n).map(|i| i.to_string()).collect(),
    };
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        values[i * n + i] = 1.0;
        for j in i + 1..n {
            let s = cosine(net.embedding(ItemId(i as u32)), net.embedding(ItemId(j as u32)));
            values[i * n + j] = s;
            values[j * n + i] = s;
        }
    }
    SimilarityMatrix { labels, values }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn init_shapes_and_determinism() {
        let a = init_net(184, 16, 16, 5).unwrap();
        assert_eq!(a.block(ParamBlock::Embedding).len(), 184 * 16);
        assert_eq!(a.block(ParamBlock::Hidden).len(), 16 * 16);
        assert_eq!(a.block(ParamBlock::Output).len(), 16 * 184);
        assert_eq!(a, init_net(184, 16, 16, 5).unwrap());
        assert!(a.block(ParamBlock::Output).iter().all(|w| w.abs() <= 0.1));
        let corner = init_net(184, 8, 32, 5).unwrap();
        assert_eq!(corner.block(ParamBlock::Hidden).len(), 8 * 32);
        assert!(init_net(184, 0, 16, 1).is_err());
    }

    #[test]
    fn forward_normalised() {
        let net = init_net(50, 8, 8, 1).unwrap();
        let y = net.forward(ItemId(3)).unwrap();
        assert_eq!(y.len(), 50);
        assert!((y.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(net.forward(ItemId(50)).is_err());
    }

    #[test]
    fn zero_net_is_uniform() {
        let net = EmbeddingNet::zeros(40, 4, 4).unwrap();
        for p in net.forward(ItemId(7)).unwrap() {
            assert_eq!(p, 1.0 / 40.0);
        }
    }

    #[test]
    fn single_pair_converges() {
        let mut net = init_net(30, 16, 16, 11).unwrap();
        let pair = TrainingPair::new(2, 9);
        net.train(&[pair], 200, 0.05).unwrap();
        let y = net.forward(ItemId(2)).unwrap();
        let argmax = (0..30).max_by(|&a, &b| y[a].partial_cmp(&y[b]).unwrap()).unwrap();
        assert_eq!(argmax, 9);
        let all: Vec<ItemId> = (0..30).map(ItemId).collect();
        let mut r = rng(0);
        assert_eq!(predict_partner(&net, ItemId(2), &all, PredictMode::Argmax, &mut r).unwrap(), ItemId(9));
    }

    #[test]
    fn zero_learning_rate_is_noop() {
        let mut net = init_net(20, 4, 4, 2).unwrap();
        let before = net.clone();
        let pairs = [TrainingPair::new(1, 2), TrainingPair::new(3, 4)];
        let trace = net.train(&pairs, 5, 0.0).unwrap();
        assert!(trace.windows(2).all(|w| w[0] == w[1]));
        assert_eq!(net, before);
    }

    #[test]
    fn train_errors() {
        let mut net = init_net(20, 4, 4, 2).unwrap();
        assert!(matches!(net.train(&[], 1, 0.05), Err(NetError::EmptyPairs)));
        assert!(matches!(net.train(&[TrainingPair::new(0, 1)], 1, -0.1), Err(NetError::BadLearningRate(_))));
    }

    #[test]
    fn pair_extraction() {
        let ab = Combination::from_raw(&[1, 2]).unwrap();
        assert_eq!(pairs_from_combination(&ab, None), vec![TrainingPair::new(1, 2), TrainingPair::new(2, 1)]);
        let abc = Combination::from_raw(&[1, 2, 3]).unwrap();
        assert_eq!(pairs_from_combination(&abc, None).len(), 6);
        let a = Combination::from_raw(&[4]).unwrap();
        assert!(pairs_from_combination(&a, None).is_empty());
        assert_eq!(pairs_from_combination(&ab, Some(ItemId(9))).len(), 4);
        // repeated items still produce pairs between positions
        let aa = Combination::from_raw(&[5, 5]).unwrap();
        assert_eq!(pairs_from_combination(&aa, None), vec![TrainingPair::new(5, 5); 2]);
    }

    #[test]
    fn singleton_candidate() {
        let net = init_net(20, 4, 4, 2).unwrap();
        let mut r = rng(1);
        for mode in [PredictMode::Sample, PredictMode::Argmax] {
            assert_eq!(predict_partner(&net, ItemId(0), &[ItemId(13)], mode, &mut r).unwrap(), ItemId(13));
        }
        assert!(matches!(predict_partner(&net, ItemId(0), &[], PredictMode::Sample, &mut r), Err(NetError::EmptyCandidates)));
    }

    #[test]
    fn argmax_ties_break_low() {
        let net = EmbeddingNet::zeros(10, 2, 2).unwrap();
        let mut r = rng(1);
        let c = [ItemId(7), ItemId(3), ItemId(5)];
        assert_eq!(predict_partner(&net, ItemId(0), &c, PredictMode::Argmax, &mut r).unwrap(), ItemId(3));
    }

    #[test]
    fn zero_net_samples_uniformly() {
        let net = EmbeddingNet::zeros(12, 2, 2).unwrap();
        let cands: Vec<ItemId> = [1, 4, 6, 9, 11].into_iter().map(ItemId).collect();
        let mut r = rng(42);
        let mut counts = [0usize; 12];
        let draws = 100_000;
        for _ in 0..draws {
            counts[predict_partner(&net, ItemId(0), &cands, PredictMode::Sample, &mut r).unwrap().index()] += 1;
        }
        let p = 1.0 / cands.len() as f64;
        let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
        for c in &cands {
            let dev = (counts[c.index()] as f64 - draws as f64 * p).abs();
            assert!(dev < 3.0 * sigma, "count {} deviates {dev}", counts[c.index()]);
        }
    }

    #[test]
    fn similarity_cases() {
        let mut net = EmbeddingNet::zeros(4, 3, 2).unwrap();
        net.embedding_mut(ItemId(0)).copy_from_slice(&[1.0, 2.0, 3.0]);
        net.embedding_mut(ItemId(1)).copy_from_slice(&[-1.0, -2.0, -3.0]);
        net.embedding_mut(ItemId(2)).copy_from_slice(&[3.0, 0.0, -1.0]);
        assert!((net.similarity(ItemId(0), ItemId(0)).unwrap() - 1.0).abs() < 1e-9);
        assert!((net.similarity(ItemId(0), ItemId(1)).unwrap() + 1.0).abs() < 1e-12);
        assert!(net.similarity(ItemId(0), ItemId(2)).unwrap().abs() < 1e-12);
        // item 3 has a zero embedding
        assert_eq!(net.similarity(ItemId(0), ItemId(3)).unwrap(), 0.0);
    }

    #[test]
    fn perturb_zero_is_identity_and_seeded() {
        let net = init_net(30, 8, 8, 3).unwrap();
        assert_eq!(perturb_net(&net, 0.0, &mut rng(1)).unwrap(), net);
        let a = perturb_net(&net, 0.1, &mut rng(9)).unwrap();
        let b = perturb_net(&net, 0.1, &mut rng(9)).unwrap();
        assert_eq!(a, b);
        assert!(perturb_net(&net, -0.1, &mut rng(1)).is_err());
    }

    #[test]
    fn perturbation_magnitude_matches_half_normal() {
        let net = init_net(184, 16, 16, 3).unwrap();
        let noisy = perturb_net(&net, 0.1, &mut rng(77)).unwrap();
        let mut total = 0.0;
        let mut count = 0usize;
        for block in [ParamBlock::Embedding, ParamBlock::Hidden, ParamBlock::Output] {
            for (a, b) in net.block(block).iter().zip(noisy.block(block)) {
                total += (a - b).abs();
                count += 1;
            }
        }
        let expected = 0.1 * (2.0 / std::f64::consts::PI).sqrt();
        let mean = total / count as f64;
        assert!((mean - expected).abs() / expected < 0.05, "mean {mean}");
    }

    #[test]
    fn similarity_export_properties() {
        let net = init_net(25, 6, 6, 8).unwrap();
        let m = export_similarity_matrix(&net, None);
        assert!(m.is_symmetric(0.0));
        for i in 0..25 {
            assert!((m.get(i, i) - 1.0).abs() < 1e-9);
            for j in 0..25 {
                assert!((-1.0..=1.0).contains(&m.get(i, j)));
                assert_eq!(m.get(i, j), net.similarity(ItemId(i as u32), ItemId(j as u32)).unwrap());
            }
        }
        let mut flat = EmbeddingNet::zeros(5, 2, 2).unwrap();
        for i in 0..5 {
            flat.embedding_mut(ItemId(i)).copy_from_slice(&[0.3, -0.2]);
        }
        let ones = export_similarity_matrix(&flat, None);
        for i in 0..5 {
            for j in 0..5 {
                assert!((ones.get(i, j) - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn matrix_csv_round_trip() {
        let net = init_net(6, 3, 3, 1).unwrap();
        let labels: Vec<String> = ["a", "b", "c", "d", "e", "f"].iter().map(|s| s.to_string()).collect();
        let m = export_similarity_matrix(&net, Some(&labels));
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        let back = SimilarityMatrix::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, m);
        assert!(SimilarityMatrix::read_csv("item,a,b\na,1,0\n".as_bytes()).is_err());
        assert!(SimilarityMatrix::read_csv("item,a\na,x\n".as_bytes()).is_err());
    }
}
