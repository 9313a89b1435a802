use rand_distr::{Distribution, Normal};

use super::{LossFn, ModelOutput, ModelSpec, SampleContext, SegmentationModel};
use crate::error::{Error, Result};
use crate::rng::stream;

/// Fully connected ReLU network applied independently to every point.
///
/// Per-point input: coordinates, the three geometric descriptors, optional
/// color, and the mean and max of the descriptors over the point's graph
/// neighbours. Hidden layers use He initialisation; the output layer starts
/// at zero so an untrained model predicts uniform posteriors.
#[derive(Debug, Clone)]
pub struct Mlp {
    spec: ModelSpec,
    widths: Vec<usize>,
    params: Vec<f64>,
    use_color: bool,
    pooling: bool,
}

struct Trace {
    /// Activations entering each layer; `acts[0]` is the input.
    acts: Vec<Vec<f64>>,
    output: ModelOutput,
}

impl Mlp {
    pub fn new(spec: ModelSpec, num_classes: usize, seed: u64) -> Result<Self> {
        spec.validate()?;
        let ModelSpec::Mlp { hidden, use_color, neighbor_pooling } = spec.clone();
        let input = 6 + if use_color { 3 } else { 0 } + if neighbor_pooling { 6 } else { 0 };
        let mut widths = vec![input];
        widths.extend(&hidden);
        widths.push(num_classes);
        let total: usize = widths.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        let mut params = vec![0.0; total];
        let mut rng = stream(seed, &[0x4d4c50]);
        let mut offset = 0;
        for (l, w) in widths.windows(2).enumerate() {
            let (fan_in, fan_out) = (w[0], w[1]);
            let last = l + 2 == widths.len();
            if !last {
                let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("positive std");
                for p in &mut params[offset..offset + fan_in * fan_out] {
                    *p = normal.sample(&mut rng);
                }
            }
            offset += fan_in * fan_out + fan_out;
        }
        Ok(Self { spec, widths, params, use_color, pooling: neighbor_pooling })
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    fn inputs(&self, ctx: &SampleContext) -> Result<Vec<f64>> {
        let n = ctx.len();
        if ctx.geometric.len() != n || ctx.neighbors.len() != n {
            return Err(Error::LengthMismatch {
                what: "sample context",
                got: ctx.geometric.len().min(ctx.neighbors.len()),
                expected: n,
            });
        }
        let colors = match (self.use_color, ctx.colors) {
            (true, Some(c)) => Some(c),
            (true, None) => {
                return Err(Error::FeatureDimMismatch { expected: self.input_dim(), got: self.input_dim() - 3 })
            }
            (false, _) => None,
        };
        let dim = self.input_dim();
        let mut x = Vec::with_capacity(n * dim);
        for i in 0..n {
            x.extend_from_slice(&ctx.points[i]);
            x.extend_from_slice(&ctx.geometric[i]);
            if let Some(c) = colors {
                x.extend_from_slice(&c[i]);
            }
            if self.pooling {
                let nb = ctx.neighbors.neighbors(i);
                let mut mean = [0.0; 3];
                let mut max = ctx.geometric[i];
                for &j in nb {
                    let g = ctx.geometric[j as usize];
                    for a in 0..3 {
                        mean[a] += g[a];
                        max[a] = max[a].max(g[a]);
                    }
                }
                let m = nb.len().max(1) as f64;
                x.extend(mean.iter().map(|v| v / m));
                x.extend_from_slice(&max);
            }
        }
        Ok(x)
    }

    fn run(&self, ctx: &SampleContext) -> Result<Trace> {
        let n = ctx.len();
        let mut acts = vec![self.inputs(ctx)?];
        let layers = self.widths.len() - 1;
        let mut offset = 0;
        let mut logits = Vec::new();
        for l in 0..layers {
            let (fan_in, fan_out) = (self.widths[l], self.widths[l + 1]);
            let w = &self.params[offset..offset + fan_in * fan_out];
            let b = &self.params[offset + fan_in * fan_out..offset + fan_in * fan_out + fan_out];
            offset += fan_in * fan_out + fan_out;
            let x = acts.last().unwrap();
            let mut y = vec![0.0; n * fan_out];
            for i in 0..n {
                let xi = &x[i * fan_in..(i + 1) * fan_in];
                for o in 0..fan_out {
                    let row = &w[o * fan_in..(o + 1) * fan_in];
                    let mut acc = b[o];
                    for (wv, xv) in row.iter().zip(xi) {
                        acc += wv * xv;
                    }
                    y[i * fan_out + o] = if l + 1 < layers { acc.max(0.0) } else { acc };
                }
            }
            if l + 1 < layers {
                acts.push(y);
            } else {
                logits = y;
            }
        }
        let c = *self.widths.last().unwrap();
        let mut posteriors = logits;
        for row in posteriors.chunks_mut(c) {
            let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut s = 0.0;
            for v in row.iter_mut() {
                *v = (*v - m).exp();
                s += *v;
            }
            row.iter_mut().for_each(|v| *v /= s);
        }
        let feature_dim = self.widths[layers - 1];
        let features = acts.last().unwrap().clone();
        Ok(Trace { acts, output: ModelOutput { posteriors, features, num_classes: c, feature_dim } })
    }
}

impl SegmentationModel for Mlp {
    fn spec(&self) -> ModelSpec {
        self.spec.clone()
    }

    fn num_classes(&self) -> usize {
        *self.widths.last().unwrap()
    }

    fn feature_dim(&self) -> usize {
        self.widths[self.widths.len() - 2]
    }

    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn forward(&self, ctx: &SampleContext) -> Result<ModelOutput> {
        Ok(self.run(ctx)?.output)
    }

    fn accumulate_gradient(&self, ctx: &SampleContext, loss: &mut LossFn, grad: &mut [f64]) -> Result<f64> {
        if grad.len() != self.params.len() {
            return Err(Error::LengthMismatch { what: "gradient", got: grad.len(), expected: self.params.len() });
        }
        let trace = self.run(ctx)?;
        let (value, dpost) = loss(&trace.output)?;
        let n = ctx.len();
        let c = self.num_classes();
        if dpost.len() != n * c {
            return Err(Error::LengthMismatch { what: "posterior gradient", got: dpost.len(), expected: n * c });
        }
        // Softmax backward.
        let mut delta = vec![0.0; n * c];
        for i in 0..n {
            let p = trace.output.posterior(i);
            let g = &dpost[i * c..(i + 1) * c];
            let s: f64 = p.iter().zip(g).map(|(a, b)| a * b).sum();
            for k in 0..c {
                delta[i * c + k] = p[k] * (g[k] - s);
            }
        }
        let layers = self.widths.len() - 1;
        let mut offsets = vec![0; layers];
        let mut acc = 0;
        for l in 0..layers {
            offsets[l] = acc;
            acc += self.widths[l] * self.widths[l + 1] + self.widths[l + 1];
        }
        for l in (0..layers).rev() {
            let (fan_in, fan_out) = (self.widths[l], self.widths[l + 1]);
            let off = offsets[l];
            let x = &trace.acts[l];
            {
                let (gw, gb) = grad[off..off + fan_in * fan_out + fan_out].split_at_mut(fan_in * fan_out);
                for i in 0..n {
                    let d = &delta[i * fan_out..(i + 1) * fan_out];
                    let xi = &x[i * fan_in..(i + 1) * fan_in];
                    for o in 0..fan_out {
                        let dv = d[o];
                        if dv == 0.0 {
                            continue;
                        }
                        gb[o] += dv;
                        for (gv, xv) in gw[o * fan_in..(o + 1) * fan_in].iter_mut().zip(xi) {
                            *gv += dv * xv;
                        }
                    }
                }
            }
            if l == 0 {
                break;
            }
            let w = &self.params[off..off + fan_in * fan_out];
            let mut prev = vec![0.0; n * fan_in];
            for i in 0..n {
                let d = &delta[i * fan_out..(i + 1) * fan_out];
                let out = &mut prev[i * fan_in..(i + 1) * fan_in];
                for o in 0..fan_out {
                    let dv = d[o];
                    if dv == 0.0 {
                        continue;
                    }
                    for (pv, wv) in out.iter_mut().zip(&w[o * fan_in..(o + 1) * fan_in]) {
                        *pv += dv * wv;
                    }
                }
                for (pv, xv) in out.iter_mut().zip(&x[i * fan_in..(i + 1) * fan_in]) {
                    if *xv <= 0.0 {
                        *pv = 0.0;
                    }
                }
            }
            delta = prev;
        }
        Ok(value)
    }
}
