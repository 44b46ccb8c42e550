//! Cross-attention between partial-input features (queries) and the pooled
//! features of every prior (keys, which double as values).

use super::volume::Volume;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct AttentionOutput<T> {
    /// Fused prior embedding with the query volume's shape.
    pub fused: Volume<T>,
    /// Row-major `queries x keys`; key `m * positions + p` is position `p` of prior `m`.
    pub weights: Vec<T>,
    pub keys: usize,
}

impl<T: Scalar> AttentionOutput<T> {
    pub fn row(&self, query: usize) -> &[T] {
        &self.weights[query * self.keys..(query + 1) * self.keys]
    }
}

fn check(x: &Volume<impl Scalar>, ys: &[&Volume<impl Scalar>]) -> Result<()> {
    if ys.is_empty() {
        return Err(Error::Shape("cross-attention needs at least one prior".into()));
    }
    for (m, y) in ys.iter().enumerate() {
        if y.channels() != x.channels() || y.side() != x.side() {
            return Err(Error::Shape(format!(
                "prior {m} features {}x{}^3 vs query {}x{}^3",
                y.channels(),
                y.side(),
                x.channels(),
                x.side()
            )));
        }
    }
    Ok(())
}

/// Position-major copy: row `p` holds the feature vector at position `p`.
fn rows<T: Scalar>(v: &Volume<T>, out: &mut Vec<T>) {
    let c = v.channels();
    let p = v.positions();
    let start = out.len();
    out.resize(start + c * p, T::zero());
    let dst = &mut out[start..];
    for ch in 0..c {
        for (pos, &val) in v.channel(ch).iter().enumerate() {
            dst[pos * c + ch] = val;
        }
    }
}

struct Prepared<T> {
    channels: usize,
    queries: Vec<T>,
    keys: Vec<T>,
    n_queries: usize,
    n_keys: usize,
    scale: T,
}

impl<T: Scalar> Prepared<T> {
    fn new(x: &Volume<T>, ys: &[&Volume<T>]) -> Self {
        let mut queries = Vec::new();
        rows(x, &mut queries);
        let mut keys = Vec::new();
        for y in ys {
            rows(y, &mut keys);
        }
        let c = x.channels();
        Self {
            channels: c,
            n_queries: x.positions(),
            n_keys: ys.len() * x.positions(),
            queries,
            keys,
            scale: T::of(c as f64 / 2.0),
        }
    }

    fn query(&self, q: usize) -> &[T] {
        &self.queries[q * self.channels..(q + 1) * self.channels]
    }

    fn key(&self, k: usize) -> &[T] {
        &self.keys[k * self.channels..(k + 1) * self.channels]
    }

    /// Softmax over all keys of `query . key / (C/2)`.
    fn weights_into(&self, q: usize, w: &mut [T]) {
        let xq = self.query(q);
        let mut max = T::neg_infinity();
        for (k, wk) in w.iter_mut().enumerate() {
            let dot: T = xq.iter().zip(self.key(k)).map(|(&a, &b)| a * b).sum();
            *wk = dot / self.scale;
            max = max.max(*wk);
        }
        let mut total = T::zero();
        for wk in w.iter_mut() {
            *wk = (*wk - max).exp();
            total += *wk;
        }
        for wk in w.iter_mut() {
            *wk /= total;
        }
    }
}

fn attend<T: Scalar>(x: &Volume<T>, ys: &[&Volume<T>], keep_weights: bool) -> AttentionOutput<T> {
    let prep = Prepared::new(x, ys);
    let c = prep.channels;
    let mut fused = Volume::zeros(c, x.side());
    let mut weights = if keep_weights {
        vec![T::zero(); prep.n_queries * prep.n_keys]
    } else {
        Vec::new()
    };
    let mut w = vec![T::zero(); prep.n_keys];
    let mut acc = vec![T::zero(); c];
    let p = x.positions();
    for q in 0..prep.n_queries {
        prep.weights_into(q, &mut w);
        acc.fill(T::zero());
        for (k, &wk) in w.iter().enumerate() {
            for (a, &v) in acc.iter_mut().zip(prep.key(k)) {
                *a += wk * v;
            }
        }
        for (ch, &a) in acc.iter().enumerate() {
            fused.data_mut()[ch * p + q] = a;
        }
        if keep_weights {
            weights[q * prep.n_keys..(q + 1) * prep.n_keys].copy_from_slice(&w);
        }
    }
    AttentionOutput {
        fused,
        weights,
        keys: prep.n_keys,
    }
}

/// Attention of every query position over the keys of all priors jointly.
pub fn cross_attention<T: Scalar>(x: &Volume<T>, ys: &[&Volume<T>]) -> Result<AttentionOutput<T>> {
    check(x, ys)?;
    Ok(attend(x, ys, true))
}

/// Fused embedding only; does not materialize the weight matrix.
pub(crate) fn fuse<T: Scalar>(x: &Volume<T>, ys: &[&Volume<T>]) -> Result<Volume<T>> {
    check(x, ys)?;
    Ok(attend(x, ys, false).fused)
}

/// Gradients of the fused output w.r.t. queries and every prior volume.
pub(crate) fn fuse_backward<T: Scalar>(
    x: &Volume<T>,
    ys: &[&Volume<T>],
    grad_fused: &Volume<T>,
) -> (Volume<T>, Vec<Volume<T>>) {
    let prep = Prepared::new(x, ys);
    let c = prep.channels;
    let p = x.positions();
    let mut grad_q = vec![T::zero(); prep.queries.len()];
    let mut grad_k = vec![T::zero(); prep.keys.len()];
    let mut w = vec![T::zero(); prep.n_keys];
    let mut dw = vec![T::zero(); prep.n_keys];
    let mut g = vec![T::zero(); c];
    for q in 0..prep.n_queries {
        prep.weights_into(q, &mut w);
        for (ch, gv) in g.iter_mut().enumerate() {
            *gv = grad_fused.data()[ch * p + q];
        }
        // value path: dV_k += w_k g ; weight path: dw_k = g . V_k
        let mut mean_dw = T::zero();
        for k in 0..prep.n_keys {
            let key = prep.key(k);
            let d: T = g.iter().zip(key).map(|(&a, &b)| a * b).sum();
            dw[k] = d;
            mean_dw += w[k] * d;
            let gk = &mut grad_k[k * c..(k + 1) * c];
            for (dst, &gv) in gk.iter_mut().zip(&g) {
                *dst += w[k] * gv;
            }
        }
        let xq = prep.query(q);
        let gq = &mut grad_q[q * c..(q + 1) * c];
        for k in 0..prep.n_keys {
            let dlogit = w[k] * (dw[k] - mean_dw) / prep.scale;
            if dlogit == T::zero() {
                continue;
            }
            let key = &prep.keys[k * c..(k + 1) * c];
            for (dst, &kv) in gq.iter_mut().zip(key) {
                *dst += dlogit * kv;
            }
            let gk = &mut grad_k[k * c..(k + 1) * c];
            for (dst, &xv) in gk.iter_mut().zip(xq) {
                *dst += dlogit * xv;
            }
        }
    }

    let to_volume = |rows: &[T]| {
        let mut v = Volume::zeros(c, x.side());
        for pos in 0..p {
            for ch in 0..c {
                v.data_mut()[ch * p + pos] = rows[pos * c + ch];
            }
        }
        v
    };
    let grad_x = to_volume(&grad_q);
    let grad_ys = (0..ys.len())
        .map(|m| to_volume(&grad_k[m * p * c..(m + 1) * p * c]))
        .collect();
    (grad_x, grad_ys)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_keys_give_uniform_weights() {
        let x = Volume::from_data(2, 2, (0..16).map(|i| i as f64 * 0.1).collect()).unwrap();
        let v = [0.3, -0.7];
        let y = Volume::from_data(2, 2, [[v[0]; 8], [v[1]; 8]].concat()).unwrap();
        let out = cross_attention(&x, &[&y, &y, &y]).unwrap();
        assert_eq!(out.keys, 24);
        for q in 0..8 {
            for &w in out.row(q) {
                assert!((w - 1.0 / 24.0).abs() < 1e-15);
            }
            assert!((out.fused.channel(0)[q] - v[0]).abs() < 1e-14);
            assert!((out.fused.channel(1)[q] - v[1]).abs() < 1e-14);
        }
    }

    #[test]
    fn single_key_has_weight_one() {
        let x = Volume::from_data(3, 1, vec![1.0f64, 2.0, 3.0]).unwrap();
        let y = Volume::from_data(3, 1, vec![-1.0f64, 0.5, 4.0]).unwrap();
        let out = cross_attention(&x, &[&y]).unwrap();
        assert_eq!(out.weights, vec![1.0]);
        assert_eq!(out.fused, y);
    }

    #[test]
    fn two_key_softmax_ratio() {
        // C = 2 so logits are dot / 1
        let x = Volume::from_data(2, 1, vec![1.0f64, 0.5]).unwrap();
        let y1 = Volume::from_data(2, 1, vec![0.2f64, 0.4]).unwrap();
        let y2 = Volume::from_data(2, 1, vec![1.0f64, -0.2]).unwrap();
        let out = cross_attention(&x, &[&y1, &y2]).unwrap();
        let (l1, l2) = (0.2 + 0.2, 1.0 - 0.1);
        let e1 = f64::exp(l1);
        let e2 = f64::exp(l2);
        assert!((out.weights[0] - e1 / (e1 + e2)).abs() < 1e-15);
        assert!((out.weights[1] / out.weights[0] - (l2 - l1).exp()).abs() < 1e-12);
    }

    #[test]
    fn rejects_mismatched_priors() {
        let x = Volume::<f64>::zeros(2, 2);
        let y = Volume::<f64>::zeros(3, 2);
        assert!(matches!(cross_attention(&x, &[&y]), Err(Error::Shape(_))));
        assert!(matches!(cross_attention::<f64>(&x, &[]), Err(Error::Shape(_))));
    }

    #[test]
    fn backward_matches_finite_differences() {
        let data = |n: usize, s: f64| (0..n).map(|i| ((i as f64 + s) * 1.37).sin()).collect::<Vec<f64>>();
        let x = Volume::from_data(4, 2, data(32, 0.3)).unwrap();
        let y1 = Volume::from_data(4, 2, data(32, 1.1)).unwrap();
        let y2 = Volume::from_data(4, 2, data(32, 2.9)).unwrap();
        let probe = data(32, 5.0);
        let objective = |x: &Volume<f64>, y1: &Volume<f64>, y2: &Volume<f64>| -> f64 {
            fuse(x, &[y1, y2]).unwrap().data().iter().zip(&probe).map(|(a, b)| a * b).sum()
        };
        let g = Volume::from_data(4, 2, probe.clone()).unwrap();
        let (gx, gys) = fuse_backward(&x, &[&y1, &y2], &g);
        let h = 1e-6;
        for i in 0..32 {
            let mut xp = x.clone();
            xp.data_mut()[i] += h;
            let mut xm = x.clone();
            xm.data_mut()[i] -= h;
            let fd = (objective(&xp, &y1, &y2) - objective(&xm, &y1, &y2)) / (2.0 * h);
            assert!((fd - gx.data()[i]).abs() < 1e-7, "x[{i}] {fd} vs {}", gx.data()[i]);

            let mut yp = y2.clone();
            yp.data_mut()[i] += h;
            let mut ym = y2.clone();
            ym.data_mut()[i] -= h;
            let fd = (objective(&x, &y1, &yp) - objective(&x, &y1, &ym)) / (2.0 * h);
            assert!((fd - gys[1].data()[i]).abs() < 1e-7, "y2[{i}]");
        }
    }
}
