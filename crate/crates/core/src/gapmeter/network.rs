//! The domain classifier: conv(5x5, 6) - maxpool(2) - conv(5x5, 16) - maxpool(2)
//! - fc(120) - fc(84) - fc(2), ReLU after every layer but the last.
//!
//! All parameters live in one flat buffer so the optimizer and the gradient
//! check can treat them uniformly. Inputs are 3x32x32 channel-major tensors
//! normalized to `[-1, 1]`.

use std::fmt::Debug;
use std::iter::Sum;
use std::ops::AddAssign;

use num_traits::Float;

use crate::rng::RngStream;

pub trait Scalar: Float + AddAssign + Sum + Send + Sync + Debug + 'static {
    fn from_f64(v: f64) -> Self;
}

impl Scalar for f32 {
    fn from_f64(v: f64) -> Self {
        v as f32
    }
}

impl Scalar for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
}

pub const PATCH: usize = 32;
pub const INPUT_LEN: usize = 3 * PATCH * PATCH;
/// Per-channel normalization applied after scaling pixels to `[0, 1]`.
pub const INPUT_MEAN: f32 = 0.5;
pub const INPUT_STD: f32 = 0.5;
const K: usize = 5;
const C1: usize = 6;
const S1: usize = PATCH - K + 1; // 28
const P1: usize = S1 / 2; // 14
const C2: usize = 16;
const S2: usize = P1 - K + 1; // 10
const P2: usize = S2 / 2; // 5
pub const FLAT: usize = C2 * P2 * P2; // 400
const F1: usize = 120;
pub const FEATURES: usize = 84;
pub const CLASSES: usize = 2;

const _: () = assert!(S1 == 28 && P1 == 14 && S2 == 10 && P2 == 5 && FLAT == 400);

/// One learnable tensor inside the flat parameter buffer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Tensor {
    pub name: &'static str,
    pub offset: usize,
    pub len: usize,
    pub fan_in: usize,
    pub is_bias: bool,
}

const fn tensors() -> [Tensor; 10] {
    let shapes: [(&str, usize, usize, bool); 10] = [
        ("conv1.weight", C1 * 3 * K * K, 3 * K * K, false),
        ("conv1.bias", C1, 3 * K * K, true),
        ("conv2.weight", C2 * C1 * K * K, C1 * K * K, false),
        ("conv2.bias", C2, C1 * K * K, true),
        ("fc1.weight", F1 * FLAT, FLAT, false),
        ("fc1.bias", F1, FLAT, true),
        ("fc2.weight", FEATURES * F1, F1, false),
        ("fc2.bias", FEATURES, F1, true),
        ("fc3.weight", CLASSES * FEATURES, FEATURES, false),
        ("fc3.bias", CLASSES, FEATURES, true),
    ];
    let mut out = [Tensor { name: "", offset: 0, len: 0, fan_in: 0, is_bias: false }; 10];
    let mut offset = 0;
    let mut i = 0;
    while i < 10 {
        let (name, len, fan_in, is_bias) = shapes[i];
        out[i] = Tensor { name, offset, len, fan_in, is_bias };
        offset += len;
        i += 1;
    }
    out
}

pub const TENSORS: [Tensor; 10] = tensors();
pub const PARAM_COUNT: usize = TENSORS[9].offset + TENSORS[9].len;

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierParams<T> {
    pub data: Vec<T>,
}

/// Per-sample activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct Activations<T> {
    conv1: Vec<T>,
    pool1: Vec<T>,
    pool1_arg: Vec<u16>,
    conv2: Vec<T>,
    flat: Vec<T>,
    pool2_arg: Vec<u16>,
    fc1: Vec<T>,
    fc2: Vec<T>,
    pub logits: [T; CLASSES],
}

impl<T: Scalar> ClassifierParams<T> {
    pub fn zeros() -> Self {
        ClassifierParams { data: vec![T::zero(); PARAM_COUNT] }
    }

    /// Kaiming-uniform init with negative slope `sqrt(5)`: every weight and
    /// bias drawn from `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
    pub fn init(rng: &mut RngStream) -> Self {
        let mut p = Self::zeros();
        for t in TENSORS {
            let bound = 1.0 / (t.fan_in as f64).sqrt();
            for v in &mut p.data[t.offset..t.offset + t.len] {
                *v = T::from_f64(rng.uniform_in(-bound, bound));
            }
        }
        p
    }

    pub fn cast<U: Scalar>(&self) -> ClassifierParams<U> {
        ClassifierParams { data: self.data.iter().map(|v| U::from_f64(v.to_f64().unwrap_or(0.0))).collect() }
    }

    #[inline]
    fn slice(&self, i: usize) -> &[T] {
        let t = &TENSORS[i];
        &self.data[t.offset..t.offset + t.len]
    }

    /// Full forward pass keeping intermediate activations.
    pub fn forward(&self, input: &[T]) -> Activations<T> {
        assert_eq!(input.len(), INPUT_LEN, "classifier input must be 3x32x32");
        let mut conv1 = vec![T::zero(); C1 * S1 * S1];
        conv_forward(input, 3, PATCH, self.slice(0), self.slice(1), C1, &mut conv1);
        relu_in_place(&mut conv1);
        let (pool1, pool1_arg) = max_pool(&conv1, C1, S1);
        let mut act = self.forward_from_pool1(pool1, pool1_arg);
        act.conv1 = conv1;
        act
    }

    /// Forward pass starting at the first pooling layer's output (6x14x14).
    pub fn forward_from_pool1(&self, pool1: Vec<T>, pool1_arg: Vec<u16>) -> Activations<T> {
        let mut conv2 = vec![T::zero(); C2 * S2 * S2];
        conv_forward(&pool1, C1, P1, self.slice(2), self.slice(3), C2, &mut conv2);
        relu_in_place(&mut conv2);
        let (flat, pool2_arg) = max_pool(&conv2, C2, S2);
        let (fc1, fc2, logits) = self.head(&flat);
        Activations { conv1: Vec::new(), pool1, pool1_arg, conv2, flat, pool2_arg, fc1, fc2, logits }
    }

    /// Fully connected head on a flattened 400-vector: (fc1, fc2, logits).
    pub fn head(&self, flat: &[T]) -> (Vec<T>, Vec<T>, [T; CLASSES]) {
        assert_eq!(flat.len(), FLAT);
        let mut fc1 = dense(flat, self.slice(4), self.slice(5), F1);
        relu_in_place(&mut fc1);
        let (fc2, logits) = self.tail(&fc1);
        (fc1, fc2, logits)
    }

    fn tail(&self, fc1: &[T]) -> (Vec<T>, [T; CLASSES]) {
        let mut fc2 = dense(fc1, self.slice(6), self.slice(7), FEATURES);
        relu_in_place(&mut fc2);
        let out = dense(&fc2, self.slice(8), self.slice(9), CLASSES);
        (fc2, [out[0], out[1]])
    }

    pub fn logits(&self, input: &[T]) -> [T; CLASSES] {
        self.forward(input).logits
    }

    /// Penultimate (fc2) activations.
    pub fn features(&self, input: &[T]) -> Vec<T> {
        self.forward(input).fc2
    }

    pub fn predict(&self, input: &[T]) -> usize {
        let l = self.logits(input);
        usize::from(l[1] > l[0])
    }

    /// Accumulates `scale * d loss / d params` for one sample into `grad`
    /// and returns the sample's cross-entropy loss.
    pub fn backward(&self, input: &[T], label: usize, scale: T, grad: &mut [T]) -> T {
        let act = self.forward(input);
        self.backward_from(input, &act, label, scale, grad)
    }

    fn backward_from(&self, input: &[T], act: &Activations<T>, label: usize, scale: T, grad: &mut [T]) -> T {
        let (probs, loss) = softmax_xent(&act.logits, label);
        let mut dlogits = [T::zero(); CLASSES];
        for c in 0..CLASSES {
            let target = if c == label { T::one() } else { T::zero() };
            dlogits[c] = (probs[c] - target) * scale;
        }

        let ([g0, g1, g2, g3, g4, g5, g6, g7, g8, g9], rest) = split_grad(grad);
        let mut dfc2 = dense_backward(&act.fc2, self.slice(8), &dlogits, g8, g9);
        relu_backward(&mut dfc2, &act.fc2);
        let mut dfc1 = dense_backward(&act.fc1, self.slice(6), &dfc2, g6, g7);
        relu_backward(&mut dfc1, &act.fc1);
        let dflat = dense_backward(&act.flat, self.slice(4), &dfc1, g4, g5);

        let mut dconv2 = vec![T::zero(); C2 * S2 * S2];
        for (i, &a) in act.pool2_arg.iter().enumerate() {
            dconv2[a as usize] += dflat[i];
        }
        relu_backward(&mut dconv2, &act.conv2);
        let mut dpool1 = vec![T::zero(); C1 * P1 * P1];
        conv_backward(&act.pool1, C1, P1, self.slice(2), &dconv2, C2, g2, g3, Some(&mut dpool1));

        let mut dconv1 = vec![T::zero(); C1 * S1 * S1];
        for (i, &a) in act.pool1_arg.iter().enumerate() {
            dconv1[a as usize] += dpool1[i];
        }
        relu_backward(&mut dconv1, &act.conv1);
        conv_backward(input, 3, PATCH, self.slice(0), &dconv1, C1, g0, g1, None);
        debug_assert!(rest.is_empty());
        loss
    }
}

/// Analytic gradient of the mean batch loss.
pub fn batch_gradient<T: Scalar>(params: &ClassifierParams<T>, inputs: &[&[T]], labels: &[usize]) -> (T, Vec<T>) {
    let mut grad = vec![T::zero(); PARAM_COUNT];
    let scale = T::one() / T::from_f64(inputs.len() as f64);
    let mut loss = T::zero();
    for (x, &y) in inputs.iter().zip(labels) {
        loss += params.backward(x, y, scale, &mut grad);
    }
    (loss * scale, grad)
}

/// ReLU and max-pool decisions of one forward pass.
struct Gates {
    relu1: Vec<bool>,
    pool1_arg: Vec<u16>,
    relu2: Vec<bool>,
    pool2_arg: Vec<u16>,
    relu_fc1: Vec<bool>,
    relu_fc2: Vec<bool>,
}

impl Gates {
    fn of(act: &Activations<f64>) -> Self {
        let on = |v: &[f64]| v.iter().map(|&x| x > 0.0).collect();
        Gates {
            relu1: on(&act.conv1),
            pool1_arg: act.pool1_arg.clone(),
            relu2: on(&act.conv2),
            pool2_arg: act.pool2_arg.clone(),
            relu_fc1: on(&act.fc1),
            relu_fc2: on(&act.fc2),
        }
    }
}

fn gate(v: &mut [f64], mask: Option<&[bool]>) {
    match mask {
        Some(m) => v.iter_mut().zip(m).filter(|(_, &on)| !on).for_each(|(x, _)| *x = 0.0),
        None => relu_in_place(v),
    }
}

fn pool(v: &[f64], channels: usize, hw: usize, arg: Option<&[u16]>) -> Vec<f64> {
    match arg {
        Some(a) => a.iter().map(|&i| v[i as usize]).collect(),
        None => max_pool(v, channels, hw).0,
    }
}

/// How [`numeric_gradient`] treats ReLU and max-pool decisions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gating {
    /// Re-evaluate every decision; differences straddling a kink are not derivatives.
    Live,
    /// Keep the decisions of the unperturbed pass, i.e. differentiate the
    /// smooth piece of the loss that contains the current parameters.
    Frozen,
}

/// Central finite-difference gradient of the mean batch loss, one parameter
/// at a time. Each perturbed loss re-runs only the layers downstream of the
/// perturbed tensor, starting from cached unperturbed activations.
pub fn numeric_gradient(params: &ClassifierParams<f64>, inputs: &[&[f64]], labels: &[usize], step: f64, gating: Gating) -> Vec<f64> {
    let acts: Vec<Activations<f64>> = inputs.iter().map(|x| params.forward(x)).collect();
    let gates: Vec<Option<Gates>> = acts.iter().map(|a| (gating == Gating::Frozen).then(|| Gates::of(a))).collect();
    let n = inputs.len() as f64;
    let mut p = params.clone();
    let mut out = vec![0.0; PARAM_COUNT];
    for (ti, t) in TENSORS.iter().enumerate() {
        for k in 0..t.len {
            let idx = t.offset + k;
            let orig = p.data[idx];
            let mut loss_at = |v: f64| {
                p.data[idx] = v;
                let mut total = 0.0;
                for (s, &y) in labels.iter().enumerate() {
                    let g = gates[s].as_ref();
                    let (a, input) = (&acts[s], inputs[s]);
                    let pool1 = (ti < 2).then(|| {
                        let mut c1 = vec![0.0; C1 * S1 * S1];
                        conv_forward(input, 3, PATCH, p.slice(0), p.slice(1), C1, &mut c1);
                        gate(&mut c1, g.map(|g| g.relu1.as_slice()));
                        pool(&c1, C1, S1, g.map(|g| g.pool1_arg.as_slice()))
                    });
                    let flat = (ti < 4).then(|| {
                        let mut c2 = vec![0.0; C2 * S2 * S2];
                        conv_forward(pool1.as_ref().unwrap_or(&a.pool1), C1, P1, p.slice(2), p.slice(3), C2, &mut c2);
                        gate(&mut c2, g.map(|g| g.relu2.as_slice()));
                        pool(&c2, C2, S2, g.map(|g| g.pool2_arg.as_slice()))
                    });
                    let fc1 = match (ti, &flat) {
                        (_, Some(flat)) => {
                            let mut fc1 = dense(flat, p.slice(4), p.slice(5), F1);
                            gate(&mut fc1, g.map(|g| g.relu_fc1.as_slice()));
                            fc1
                        }
                        (4 | 5, None) => {
                            // only one fc1 unit depends on this parameter
                            let unit = if t.is_bias { k } else { k / FLAT };
                            let row = &p.slice(4)[unit * FLAT..(unit + 1) * FLAT];
                            let mut pre = [p.slice(5)[unit] + row.iter().zip(&a.flat).map(|(w, x)| w * x).sum::<f64>()];
                            gate(&mut pre, g.map(|g| &g.relu_fc1[unit..unit + 1]));
                            let mut fc1 = a.fc1.clone();
                            fc1[unit] = pre[0];
                            fc1
                        }
                        _ => a.fc1.clone(),
                    };
                    let mut fc2 = dense(&fc1, p.slice(6), p.slice(7), FEATURES);
                    gate(&mut fc2, g.map(|g| g.relu_fc2.as_slice()));
                    let l = dense(&fc2, p.slice(8), p.slice(9), CLASSES);
                    total += softmax_xent(&[l[0], l[1]], y).1;
                }
                total / n
            };
            let plus = loss_at(orig + step);
            let minus = loss_at(orig - step);
            p.data[idx] = orig;
            out[idx] = (plus - minus) / (2.0 * step);
        }
    }
    out
}

/// Mean softmax cross-entropy of a batch, computed by forward passes only.
pub fn batch_loss<T: Scalar>(params: &ClassifierParams<T>, inputs: &[&[T]], labels: &[usize]) -> T {
    let n = T::from_f64(inputs.len() as f64);
    inputs.iter().zip(labels).map(|(x, &y)| softmax_xent(&params.logits(x), y).1).sum::<T>() / n
}

/// Splits a flat gradient buffer into per-tensor mutable slices.
fn split_grad<T>(grad: &mut [T]) -> ([&mut [T]; 10], &mut [T]) {
    assert_eq!(grad.len(), PARAM_COUNT, "gradient buffer length");
    let mut rest = grad;
    let mut parts: [&mut [T]; 10] = Default::default();
    for (i, t) in TENSORS.iter().enumerate() {
        let (head, tail) = std::mem::take(&mut rest).split_at_mut(t.len);
        parts[i] = head;
        rest = tail;
    }
    (parts, rest)
}

pub fn softmax_xent<T: Scalar>(logits: &[T; CLASSES], label: usize) -> ([T; CLASSES], T) {
    let m = logits[0].max(logits[1]);
    let e0 = (logits[0] - m).exp();
    let e1 = (logits[1] - m).exp();
    let z = e0 + e1;
    let probs = [e0 / z, e1 / z];
    let loss = -(logits[label] - m - z.ln());
    (probs, loss)
}

fn relu_in_place<T: Scalar>(v: &mut [T]) {
    for x in v {
        if *x < T::zero() {
            *x = T::zero();
        }
    }
}

fn relu_backward<T: Scalar>(grad: &mut [T], activated: &[T]) {
    for (g, &a) in grad.iter_mut().zip(activated) {
        if a <= T::zero() {
            *g = T::zero();
        }
    }
}

/// Valid 5x5 convolution of `in_c` planes of side `in_hw`.
fn conv_forward<T: Scalar>(input: &[T], in_c: usize, in_hw: usize, w: &[T], b: &[T], out_c: usize, out: &mut [T]) {
    let out_hw = in_hw - K + 1;
    for o in 0..out_c {
        let plane = &mut out[o * out_hw * out_hw..(o + 1) * out_hw * out_hw];
        plane.fill(b[o]);
        for c in 0..in_c {
            let src = &input[c * in_hw * in_hw..(c + 1) * in_hw * in_hw];
            for ky in 0..K {
                for kx in 0..K {
                    let wv = w[((o * in_c + c) * K + ky) * K + kx];
                    for y in 0..out_hw {
                        let s = &src[(y + ky) * in_hw + kx..(y + ky) * in_hw + kx + out_hw];
                        let d = &mut plane[y * out_hw..(y + 1) * out_hw];
                        for (dv, &sv) in d.iter_mut().zip(s) {
                            *dv += wv * sv;
                        }
                    }
                }
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn conv_backward<T: Scalar>(
    input: &[T],
    in_c: usize,
    in_hw: usize,
    w: &[T],
    dout: &[T],
    out_c: usize,
    gw: &mut [T],
    gb: &mut [T],
    mut dinput: Option<&mut [T]>,
) {
    let out_hw = in_hw - K + 1;
    for o in 0..out_c {
        let dplane = &dout[o * out_hw * out_hw..(o + 1) * out_hw * out_hw];
        gb[o] += dplane.iter().copied().sum::<T>();
        for c in 0..in_c {
            let src = &input[c * in_hw * in_hw..(c + 1) * in_hw * in_hw];
            for ky in 0..K {
                for kx in 0..K {
                    let wi = ((o * in_c + c) * K + ky) * K + kx;
                    let mut acc = T::zero();
                    for y in 0..out_hw {
                        let s = &src[(y + ky) * in_hw + kx..(y + ky) * in_hw + kx + out_hw];
                        let d = &dplane[y * out_hw..(y + 1) * out_hw];
                        acc += s.iter().zip(d).map(|(&a, &b)| a * b).sum::<T>();
                    }
                    gw[wi] += acc;
                    if let Some(din) = dinput.as_deref_mut() {
                        let wv = w[wi];
                        let dst = &mut din[c * in_hw * in_hw..(c + 1) * in_hw * in_hw];
                        for y in 0..out_hw {
                            let row = &mut dst[(y + ky) * in_hw + kx..(y + ky) * in_hw + kx + out_hw];
                            let d = &dplane[y * out_hw..(y + 1) * out_hw];
                            for (r, &dv) in row.iter_mut().zip(d) {
                                *r += wv * dv;
                            }
                        }
                    }
                }
            }
        }
    }
}

/// 2x2 stride-2 max pooling; returns pooled values and flat argmax indices.
fn max_pool<T: Scalar>(input: &[T], channels: usize, hw: usize) -> (Vec<T>, Vec<u16>) {
    let ohw = hw / 2;
    let mut out = Vec::with_capacity(channels * ohw * ohw);
    let mut arg = Vec::with_capacity(channels * ohw * ohw);
    for c in 0..channels {
        let base = c * hw * hw;
        for y in 0..ohw {
            for x in 0..ohw {
                let mut best = base + 2 * y * hw + 2 * x;
                for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                    let i = base + (2 * y + dy) * hw + 2 * x + dx;
                    if input[i] > input[best] {
                        best = i;
                    }
                }
                out.push(input[best]);
                arg.push(best as u16);
            }
        }
    }
    (out, arg)
}

fn dense<T: Scalar>(input: &[T], w: &[T], b: &[T], out_n: usize) -> Vec<T> {
    let in_n = input.len();
    (0..out_n)
        .map(|o| b[o] + w[o * in_n..(o + 1) * in_n].iter().zip(input).map(|(&a, &x)| a * x).sum::<T>())
        .collect()
}

/// Accumulates weight/bias gradients and returns the input gradient.
fn dense_backward<T: Scalar>(input: &[T], w: &[T], dout: &[T], gw: &mut [T], gb: &mut [T]) -> Vec<T> {
    let in_n = input.len();
    let mut din = vec![T::zero(); in_n];
    for (o, &g) in dout.iter().enumerate() {
        if g == T::zero() {
            continue;
        }
        gb[o] += g;
        let row = &mut gw[o * in_n..(o + 1) * in_n];
        for (r, &x) in row.iter_mut().zip(input) {
            *r += g * x;
        }
        for (d, &wv) in din.iter_mut().zip(&w[o * in_n..(o + 1) * in_n]) {
            *d += g * wv;
        }
    }
    din
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_stream;

    #[test]
    fn layout_matches_architecture() {
        let names: Vec<_> = TENSORS.iter().map(|t| (t.name, t.len)).collect();
        assert_eq!(
            names,
            vec![
                ("conv1.weight", 450),
                ("conv1.bias", 6),
                ("conv2.weight", 2400),
                ("conv2.bias", 16),
                ("fc1.weight", 48000),
                ("fc1.bias", 120),
                ("fc2.weight", 10080),
                ("fc2.bias", 84),
                ("fc3.weight", 168),
                ("fc3.bias", 2),
            ]
        );
        assert_eq!(PARAM_COUNT, 61326);
    }

    #[test]
    fn forward_shapes() {
        let p = ClassifierParams::<f32>::init(&mut rng_stream(0, 0));
        let mut rng = rng_stream(0, 1);
        let x: Vec<f32> = (0..INPUT_LEN).map(|_| rng.uniform() as f32).collect();
        let a = p.forward(&x);
        assert_eq!(a.pool1.len(), 6 * 14 * 14);
        assert_eq!(a.conv2.len(), 16 * 10 * 10);
        assert_eq!(a.flat.len(), 400);
        assert_eq!(a.fc1.len(), 120);
        assert_eq!(a.fc2.len(), 84);
        assert!(a.logits.iter().all(|v| v.is_finite()));
    }

    #[test]
    #[should_panic(expected = "3x32x32")]
    fn rejects_wrong_input_size() {
        ClassifierParams::<f32>::zeros().forward(&[0.0; 10]);
    }

    #[test]
    fn init_respects_fan_in_bounds() {
        let p = ClassifierParams::<f64>::init(&mut rng_stream(3, 3));
        for t in TENSORS {
            let s = &p.data[t.offset..t.offset + t.len];
            let bound = 1.0 / (t.fan_in as f64).sqrt();
            assert!(s.iter().all(|v| v.abs() <= bound));
            assert!(s.iter().any(|&v| v != 0.0));
        }
    }

    #[test]
    fn softmax_xent_values() {
        let (p, l) = softmax_xent(&[0.0f64, 0.0], 1);
        assert!((p[0] - 0.5).abs() < 1e-12 && (l - 2f64.ln()).abs() < 1e-12);
        let (_, l) = softmax_xent(&[1000.0f64, -1000.0], 0);
        assert!(l.abs() < 1e-12);
    }

    #[test]
    fn max_pool_picks_window_maximum() {
        let input: Vec<f64> = (0..16).map(|v| v as f64).collect();
        let (out, arg) = max_pool(&input, 1, 4);
        assert_eq!(out, vec![5.0, 7.0, 13.0, 15.0]);
        assert_eq!(arg, vec![5, 7, 13, 15]);
    }
}
