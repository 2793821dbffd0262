//! Full forward pass, its reverse-mode gradient, and the per-block entry
//! points.
//!
//! ```text
//! x (C×T) → spatial attention → H_s (D×T) ─┬→ BM encoders ───────┐
//!                                          ├→ multi-scale convs ─┼→ concat (F×T)
//!                                          └→ BiLSTM ────────────┘
//!   → depthwise-separable fusion (D×T) → avg pool (D×L) → head (L)
//!   → linear upsample (T)
//! ```

use rand::{RngCore, SeedableRng};

use super::config::{BranchFlags, ModelConfig, BM_KERNEL};
use super::lstm::{lstm_direction, lstm_direction_backward, DirCache, LstmGrads, LstmWeights};
use super::ops::{
    apply_mask, avg_pool, avg_pool_backward, conv1d, conv1d_backward, depthwise_conv1d, depthwise_conv1d_backward,
    dropout_mask, gelu, gelu_grad, matvec, sigmoid, upsample_linear_backward, ConvShape,
};
use super::params::ModelParams;
use super::ProbabilitySequence;
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::Mat;

/// Frame rate the model output is declared at.
pub const MODEL_FRAME_RATE_HZ: f64 = 100.0;

fn check(m: &Mat, layer: &str) -> Result<()> {
    if m.all_finite() {
        Ok(())
    } else {
        Err(Error::numeric(layer))
    }
}

// ---------------------------------------------------------------- attention

struct AttnCache {
    mean: Vec<f64>,
    pre: Vec<f64>,
    hid: Vec<f64>,
    gate: Vec<f64>,
    gated: Mat,
}

fn attention_fwd(x: &Mat, p: &ModelParams, cfg: &ModelConfig) -> Result<(Mat, AttnCache)> {
    let (c, a, d) = (cfg.c_in, cfg.attn_hidden(), cfg.d);
    if x.rows() != c {
        return Err(Error::dim(format!(
            "input has {} channels, model expects {c}",
            x.rows()
        )));
    }
    let t = x.cols() as f64;
    let mean: Vec<f64> = (0..c).map(|r| x.row(r).iter().sum::<f64>() / t).collect();
    let pre = matvec(
        p.data("attn.squeeze.weight", &[a, c])?,
        p.data("attn.squeeze.bias", &[a])?,
        &mean,
    );
    let hid: Vec<f64> = pre.iter().map(|&v| gelu(v)).collect();
    let z = matvec(
        p.data("attn.excite.weight", &[c, a])?,
        p.data("attn.excite.bias", &[c])?,
        &hid,
    );
    let gate: Vec<f64> = z.iter().map(|&v| sigmoid(v)).collect();
    let mut gated = x.clone();
    for (r, &g) in gate.iter().enumerate() {
        gated.row_mut(r).iter_mut().for_each(|v| *v *= g);
    }
    let out = conv1d(
        &gated,
        p.data("attn.proj.weight", &[d, c, 1])?,
        p.data("attn.proj.bias", &[d])?,
        ConvShape::pointwise(c, d),
    )?;
    check(&out, "spatial_attention")?;
    Ok((
        out,
        AttnCache {
            mean,
            pre,
            hid,
            gate,
            gated,
        },
    ))
}

fn attention_bwd(x: &Mat, cache: &AttnCache, dout: &Mat, p: &ModelParams, cfg: &ModelConfig, g: &mut ModelParams) {
    let (c, a, d) = (cfg.c_in, cfg.attn_hidden(), cfg.d);
    let proj = &p.get("attn.proj.weight").unwrap().data;
    let [dw, db] = g.grads_mut(["attn.proj.weight", "attn.proj.bias"]);
    let dgated = conv1d_backward(&cache.gated, dout, proj, ConvShape::pointwise(c, d), dw, db);
    // gate pre-activation
    let dz: Vec<f64> = (0..c)
        .map(|r| {
            let dg: f64 = dgated.row(r).iter().zip(x.row(r)).map(|(u, v)| u * v).sum();
            dg * cache.gate[r] * (1.0 - cache.gate[r])
        })
        .collect();
    let excite = &p.get("attn.excite.weight").unwrap().data;
    let mut dhid = vec![0.0; a];
    {
        let [dw, db] = g.grads_mut(["attn.excite.weight", "attn.excite.bias"]);
        for r in 0..c {
            db[r] += dz[r];
            for k in 0..a {
                dw[r * a + k] += dz[r] * cache.hid[k];
                dhid[k] += excite[r * a + k] * dz[r];
            }
        }
    }
    let [dw, db] = g.grads_mut(["attn.squeeze.weight", "attn.squeeze.bias"]);
    for k in 0..a {
        let dpre = dhid[k] * gelu_grad(cache.pre[k]);
        db[k] += dpre;
        for r in 0..c {
            dw[k * c + r] += dpre * cache.mean[r];
        }
    }
}

// ------------------------------------------------------- residual branches

struct ResCache {
    input: Mat,
    pre: Mat,
    act: Mat,
    mask: Option<Vec<f64>>,
}

fn bm_shapes(cfg: &ModelConfig, k: usize) -> (ConvShape, ConvShape) {
    (
        ConvShape {
            in_ch: cfg.d,
            out_ch: cfg.d,
            kernel: BM_KERNEL,
            dilation: ModelConfig::bm_dilation(k),
        },
        ConvShape::pointwise(cfg.d, cfg.d),
    )
}

fn bm_fwd(h: &Mat, p: &ModelParams, cfg: &ModelConfig) -> Result<(Mat, Vec<ResCache>)> {
    let d = cfg.d;
    if h.rows() != d {
        return Err(Error::dim(format!("BM encoder expects {d} rows, got {}", h.rows())));
    }
    let mut cur = h.clone();
    let mut caches = Vec::with_capacity(cfg.n_bm);
    for k in 0..cfg.n_bm {
        let (s1, s2) = bm_shapes(cfg, k);
        let pre = conv1d(
            &cur,
            p.data(&format!("bm.{k}.conv1.weight"), &s1.weight_shape())?,
            p.data(&format!("bm.{k}.conv1.bias"), &[d])?,
            s1,
        )?;
        let act = pre.map(gelu);
        let mut out = conv1d(
            &act,
            p.data(&format!("bm.{k}.conv2.weight"), &s2.weight_shape())?,
            p.data(&format!("bm.{k}.conv2.bias"), &[d])?,
            s2,
        )?;
        out.add_assign(&cur);
        check(&out, &format!("bm_encoder.{k}"))?;
        caches.push(ResCache {
            input: std::mem::replace(&mut cur, out),
            pre,
            act,
            mask: None,
        });
    }
    Ok((cur, caches))
}

fn bm_bwd(caches: &[ResCache], dy: Mat, p: &ModelParams, cfg: &ModelConfig, g: &mut ModelParams) -> Mat {
    let mut dy = dy;
    for (k, c) in caches.iter().enumerate().rev() {
        let (s1, s2) = bm_shapes(cfg, k);
        let (n1w, n1b) = (format!("bm.{k}.conv1.weight"), format!("bm.{k}.conv1.bias"));
        let (n2w, n2b) = (format!("bm.{k}.conv2.weight"), format!("bm.{k}.conv2.bias"));
        let [dw, db] = g.grads_mut([n2w.as_str(), n2b.as_str()]);
        let dact = conv1d_backward(&c.act, &dy, &p.get(&n2w).unwrap().data, s2, dw, db);
        let dpre = gelu_backward(&dact, &c.pre);
        let [dw, db] = g.grads_mut([n1w.as_str(), n1b.as_str()]);
        let dx = conv1d_backward(&c.input, &dpre, &p.get(&n1w).unwrap().data, s1, dw, db);
        dy.add_assign(&dx);
    }
    dy
}

fn ms_shape(cfg: &ModelConfig, j: usize) -> ConvShape {
    ConvShape {
        in_ch: cfg.d,
        out_ch: cfg.d,
        kernel: cfg.ms_kernel(j),
        dilation: 1,
    }
}

fn ms_fwd(h: &Mat, p: &ModelParams, cfg: &ModelConfig, mut rng: Option<&mut Rng>) -> Result<(Mat, Vec<ResCache>)> {
    let d = cfg.d;
    if h.rows() != d {
        return Err(Error::dim(format!(
            "multi-scale stack expects {d} rows, got {}",
            h.rows()
        )));
    }
    let mut cur = h.clone();
    let mut caches = Vec::with_capacity(cfg.n_ms);
    for j in 0..cfg.n_ms {
        let s = ms_shape(cfg, j);
        let pre = conv1d(
            &cur,
            p.data(&format!("ms.{j}.conv.weight"), &s.weight_shape())?,
            p.data(&format!("ms.{j}.conv.bias"), &[d])?,
            s,
        )?;
        let act = pre.map(gelu);
        let mask = dropout_mask(act.data().len(), cfg.dropout_p, rng.as_deref_mut());
        let mut out = act.clone();
        apply_mask(&mut out, &mask);
        out.add_assign(&cur);
        check(&out, &format!("multiscale.{j}"))?;
        caches.push(ResCache {
            input: std::mem::replace(&mut cur, out),
            pre,
            act,
            mask,
        });
    }
    Ok((cur, caches))
}

fn ms_bwd(caches: &[ResCache], dy: Mat, p: &ModelParams, cfg: &ModelConfig, g: &mut ModelParams) -> Mat {
    let mut dy = dy;
    for (j, c) in caches.iter().enumerate().rev() {
        let s = ms_shape(cfg, j);
        let (nw, nb) = (format!("ms.{j}.conv.weight"), format!("ms.{j}.conv.bias"));
        let mut dact = dy.clone();
        apply_mask(&mut dact, &c.mask);
        let dpre = gelu_backward(&dact, &c.pre);
        let [dw, db] = g.grads_mut([nw.as_str(), nb.as_str()]);
        let dx = conv1d_backward(&c.input, &dpre, &p.get(&nw).unwrap().data, s, dw, db);
        dy.add_assign(&dx);
    }
    dy
}

fn gelu_backward(dact: &Mat, pre: &Mat) -> Mat {
    let mut out = dact.clone();
    for (v, &x) in out.data_mut().iter_mut().zip(pre.data()) {
        *v *= gelu_grad(x);
    }
    out
}

// ------------------------------------------------------------------ BiLSTM

struct LstmCache {
    xs: Mat,
    fwd: DirCache,
    bwd: DirCache,
}

const DIRS: [&str; 2] = ["fwd", "bwd"];

fn lstm_weights<'a>(p: &'a ModelParams, cfg: &ModelConfig, dir: &str) -> Result<LstmWeights<'a>> {
    let (d, h) = (cfg.d, cfg.lstm_hidden);
    Ok(LstmWeights {
        w_ih: p.data(&format!("lstm.{dir}.w_ih"), &[4 * h, d])?,
        w_hh: p.data(&format!("lstm.{dir}.w_hh"), &[4 * h, h])?,
        bias: p.data(&format!("lstm.{dir}.bias"), &[4 * h])?,
        input: d,
        hidden: h,
    })
}

fn lstm_fwd(h: &Mat, p: &ModelParams, cfg: &ModelConfig) -> Result<(Mat, LstmCache)> {
    if h.rows() != cfg.d {
        return Err(Error::dim(format!("BiLSTM expects {} rows, got {}", cfg.d, h.rows())));
    }
    let xs = h.transpose();
    let fwd = lstm_direction(&xs, &lstm_weights(p, cfg, DIRS[0])?, false);
    let bwd = lstm_direction(&xs, &lstm_weights(p, cfg, DIRS[1])?, true);
    let out = Mat::vstack(&[&fwd.hidden().transpose(), &bwd.hidden().transpose()])?;
    check(&out, "bilstm")?;
    Ok((out, LstmCache { xs, fwd, bwd }))
}

fn lstm_bwd(cache: &LstmCache, dout: &Mat, p: &ModelParams, cfg: &ModelConfig, g: &mut ModelParams) -> Mat {
    let h = cfg.lstm_hidden;
    let t = dout.cols();
    let mut dxs = Mat::zeros(t, cfg.d);
    for (k, (dir, dc)) in DIRS.iter().zip([&cache.fwd, &cache.bwd]).enumerate() {
        let dh = Mat::from_vec(h, t, dout.data()[k * h * t..(k + 1) * h * t].to_vec())
            .unwrap()
            .transpose();
        let w = lstm_weights(p, cfg, dir).unwrap();
        let names = [
            format!("lstm.{dir}.w_ih"),
            format!("lstm.{dir}.w_hh"),
            format!("lstm.{dir}.bias"),
        ];
        let [w_ih, w_hh, bias] = g.grads_mut([names[0].as_str(), names[1].as_str(), names[2].as_str()]);
        lstm_direction_backward(&cache.xs, &w, dc, &dh, LstmGrads { w_ih, w_hh, bias }, &mut dxs);
    }
    dxs.transpose()
}

// ------------------------------------------------------------------ fusion

struct FusionCache {
    input: Mat,
    depthwise: Mat,
    pre: Mat,
    mask: Option<Vec<f64>>,
}

fn fusion_fwd(f: &Mat, p: &ModelParams, cfg: &ModelConfig, rng: Option<&mut Rng>) -> Result<(Mat, FusionCache)> {
    let (fw, d, k) = (cfg.fused_width(), cfg.d, cfg.ds_kernel);
    if f.rows() != fw {
        return Err(Error::dim(format!("fusion expects {fw} rows, got {}", f.rows())));
    }
    let depthwise = depthwise_conv1d(
        f,
        p.data("fusion.depthwise.weight", &[fw, 1, k])?,
        p.data("fusion.depthwise.bias", &[fw])?,
        k,
    );
    let pre = conv1d(
        &depthwise,
        p.data("fusion.pointwise.weight", &[d, fw, 1])?,
        p.data("fusion.pointwise.bias", &[d])?,
        ConvShape::pointwise(fw, d),
    )?;
    let mut out = pre.map(gelu);
    let mask = dropout_mask(out.data().len(), cfg.dropout_p, rng);
    apply_mask(&mut out, &mask);
    check(&out, "ds_fusion")?;
    Ok((
        out,
        FusionCache {
            input: f.clone(),
            depthwise,
            pre,
            mask,
        },
    ))
}

fn fusion_bwd(c: &FusionCache, dout: &Mat, p: &ModelParams, cfg: &ModelConfig, g: &mut ModelParams) -> Mat {
    let (fw, d, k) = (cfg.fused_width(), cfg.d, cfg.ds_kernel);
    let mut dact = dout.clone();
    apply_mask(&mut dact, &c.mask);
    let dpre = gelu_backward(&dact, &c.pre);
    let [dw, db] = g.grads_mut(["fusion.pointwise.weight", "fusion.pointwise.bias"]);
    let ddw = conv1d_backward(
        &c.depthwise,
        &dpre,
        &p.get("fusion.pointwise.weight").unwrap().data,
        ConvShape::pointwise(fw, d),
        dw,
        db,
    );
    let [dw, db] = g.grads_mut(["fusion.depthwise.weight", "fusion.depthwise.bias"]);
    depthwise_conv1d_backward(
        &c.input,
        &ddw,
        &p.get("fusion.depthwise.weight").unwrap().data,
        k,
        dw,
        db,
    )
}

// -------------------------------------------------------------- full model

/// Everything the backward pass needs from one forward evaluation.
pub struct ForwardCache {
    attn: AttnCache,
    bm: Option<Vec<ResCache>>,
    ms: Option<Vec<ResCache>>,
    lstm: Option<LstmCache>,
    fusion: FusionCache,
    t: usize,
    pooled: Mat,
    pooled_probs: Vec<f64>,
    pub output: Vec<f64>,
}

/// Runs the network; dropout is active iff `rng` is given.
pub fn forward(x: &Mat, p: &ModelParams, cfg: &ModelConfig, mut rng: Option<&mut Rng>) -> Result<ForwardCache> {
    cfg.validate()?;
    let t = x.cols();
    let (hs, attn) = attention_fwd(x, p, cfg)?;
    let mut parts = Vec::with_capacity(3);
    let bm = if cfg.branches.bm_on {
        let (out, c) = bm_fwd(&hs, p, cfg)?;
        parts.push(out);
        Some(c)
    } else {
        None
    };
    let ms = if cfg.branches.ms_on {
        let (out, c) = ms_fwd(&hs, p, cfg, rng.as_deref_mut())?;
        parts.push(out);
        Some(c)
    } else {
        None
    };
    let lstm = if cfg.branches.lstm_on {
        let (out, c) = lstm_fwd(&hs, p, cfg)?;
        parts.push(out);
        Some(c)
    } else {
        None
    };
    let cat = Mat::vstack(&parts.iter().collect::<Vec<_>>())?;
    drop(parts);
    let (fused, fusion) = fusion_fwd(&cat, p, cfg, rng)?;
    let pooled = avg_pool(&fused, cfg.pool_window, cfg.pool_stride)?;
    let logits = conv1d(
        &pooled,
        p.data("head.weight", &[1, cfg.d, 1])?,
        p.data("head.bias", &[1])?,
        ConvShape::pointwise(cfg.d, 1),
    )?;
    check(&logits, "head")?;
    let pooled_probs: Vec<f64> = logits.data().iter().map(|&z| sigmoid(z)).collect();
    let output = super::ops::upsample_linear(&pooled_probs, t)?;
    Ok(ForwardCache {
        attn,
        bm,
        ms,
        lstm,
        fusion,
        t,
        pooled,
        pooled_probs,
        output,
    })
}

/// Mean squared error and its gradient for one window, accumulated into `g`.
pub fn backward(
    x: &Mat,
    labels: &[f64],
    cache: &ForwardCache,
    p: &ModelParams,
    cfg: &ModelConfig,
    g: &mut ModelParams,
) -> Result<f64> {
    let t = cache.t;
    if labels.len() != t {
        return Err(Error::dim(format!("{} labels for {t} frames", labels.len())));
    }
    let loss = mse(&cache.output, labels)?;
    let dout: Vec<f64> = cache
        .output
        .iter()
        .zip(labels)
        .map(|(o, y)| 2.0 * (o - y) / t as f64)
        .collect();
    let dprob = upsample_linear_backward(&dout, cache.pooled_probs.len());
    let dlogit: Vec<f64> = dprob
        .iter()
        .zip(&cache.pooled_probs)
        .map(|(d, p)| d * p * (1.0 - p))
        .collect();
    let dlogit = Mat::from_vec(1, dlogit.len(), dlogit)?;
    let dpooled = {
        let [dw, db] = g.grads_mut(["head.weight", "head.bias"]);
        conv1d_backward(
            &cache.pooled,
            &dlogit,
            &p.get("head.weight")?.data,
            ConvShape::pointwise(cfg.d, 1),
            dw,
            db,
        )
    };
    let dfused = avg_pool_backward(&dpooled, t, cfg.pool_window, cfg.pool_stride);
    let dcat = fusion_bwd(&cache.fusion, &dfused, p, cfg, g);

    let d = cfg.d;
    let mut dhs = Mat::zeros(d, t);
    let mut row = 0;
    let mut take = |rows: usize| {
        let m = Mat::from_vec(rows, t, dcat.data()[row * t..(row + rows) * t].to_vec()).unwrap();
        row += rows;
        m
    };
    if let Some(c) = &cache.bm {
        let dy = take(d);
        dhs.add_assign(&bm_bwd(c, dy, p, cfg, g));
    }
    if let Some(c) = &cache.ms {
        let dy = take(d);
        dhs.add_assign(&ms_bwd(c, dy, p, cfg, g));
    }
    if let Some(c) = &cache.lstm {
        let dy = take(2 * cfg.lstm_hidden);
        dhs.add_assign(&lstm_bwd(c, &dy, p, cfg, g));
    }
    attention_bwd(x, &cache.attn, &dhs, p, cfg, g);
    Ok(loss)
}

/// `(1/T) Σ (p_t − y_t)²`
pub fn mse(p: &[f64], y: &[f64]) -> Result<f64> {
    if p.len() != y.len() {
        return Err(Error::dim(format!(
            "prediction length {} vs label length {}",
            p.len(),
            y.len()
        )));
    }
    if p.is_empty() {
        return Err(Error::Degenerate("empty sequence".into()));
    }
    Ok(p.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / p.len() as f64)
}

/// One training example: a `C × T` signal and its `T` frame targets.
pub type Example<'a> = (&'a Mat, &'a [f64]);

/// Per-example dropout seeds, drawn up front so results do not depend on
/// evaluation order.
fn example_seeds(n: usize, rng: &mut Rng) -> Vec<u64> {
    (0..n).map(|_| rng.next_u64()).collect()
}

fn example_grad(ex: &Example<'_>, seed: u64, p: &ModelParams, cfg: &ModelConfig) -> Result<(f64, ModelParams)> {
    let mut rng = Rng::seed_from_u64(seed);
    let cache = forward(ex.0, p, cfg, Some(&mut rng))?;
    let mut g = p.zeros_like();
    let loss = backward(ex.0, ex.1, &cache, p, cfg, &mut g)?;
    Ok((loss, g))
}

/// Mean training loss over `batch` and its gradient with respect to every
/// tensor in `params` (zero for tensors no active branch reads).
///
/// Dropout is active. Examples are evaluated in parallel when the
/// `parallel` feature is on; the reduction order is fixed, so the result is
/// bitwise identical to [`param_gradients_serial`].
pub fn param_gradients(
    batch: &[Example<'_>],
    params: &ModelParams,
    cfg: &ModelConfig,
    rng: &mut Rng,
) -> Result<(f64, ModelParams)> {
    if batch.is_empty() {
        return Err(Error::Degenerate("empty batch".into()));
    }
    let seeds = example_seeds(batch.len(), rng);
    #[cfg(feature = "parallel")]
    let results: Vec<_> = {
        use rayon::prelude::*;
        batch
            .par_iter()
            .zip(seeds.par_iter())
            .map(|(ex, &s)| example_grad(ex, s, params, cfg))
            .collect()
    };
    #[cfg(not(feature = "parallel"))]
    let results: Vec<_> = batch
        .iter()
        .zip(&seeds)
        .map(|(ex, &s)| example_grad(ex, s, params, cfg))
        .collect();
    reduce(results, params)
}

/// Single-threaded reference for [`param_gradients`].
pub fn param_gradients_serial(
    batch: &[Example<'_>],
    params: &ModelParams,
    cfg: &ModelConfig,
    rng: &mut Rng,
) -> Result<(f64, ModelParams)> {
    if batch.is_empty() {
        return Err(Error::Degenerate("empty batch".into()));
    }
    let seeds = example_seeds(batch.len(), rng);
    let results = batch
        .iter()
        .zip(&seeds)
        .map(|(ex, &s)| example_grad(ex, s, params, cfg))
        .collect();
    reduce(results, params)
}

fn reduce(results: Vec<Result<(f64, ModelParams)>>, params: &ModelParams) -> Result<(f64, ModelParams)> {
    let n = results.len() as f64;
    let mut total = params.zeros_like();
    let mut loss = 0.0;
    for r in results {
        let (l, g) = r?;
        loss += l;
        total.add_scaled(1.0 / n, &g);
    }
    if !total.all_finite() {
        return Err(Error::numeric("gradients"));
    }
    Ok((loss / n, total))
}

/// The training objective exactly as [`param_gradients`] sees it (same
/// dropout draws for the same `rng` state), without the gradient.
pub fn batch_loss(batch: &[Example<'_>], params: &ModelParams, cfg: &ModelConfig, rng: &mut Rng) -> Result<f64> {
    let seeds = example_seeds(batch.len(), rng);
    let mut total = 0.0;
    for (ex, &s) in batch.iter().zip(&seeds) {
        let mut r = Rng::seed_from_u64(s);
        let cache = forward(ex.0, params, cfg, Some(&mut r))?;
        total += mse(&cache.output, ex.1)?;
    }
    Ok(total / batch.len() as f64)
}

// -------------------------------------------------------- block entry points

/// Channel gate then per-step projection: `C × T → D × T`.
pub fn spatial_attention_forward(x: &Mat, params: &ModelParams, cfg: &ModelConfig) -> Result<Mat> {
    attention_fwd(x, params, cfg).map(|(m, _)| m)
}

pub fn bm_encoder_forward(h: &Mat, params: &ModelParams, cfg: &ModelConfig) -> Result<Mat> {
    bm_fwd(h, params, cfg).map(|(m, _)| m)
}

/// Dropout applies when `rng` is given.
pub fn multiscale_conv_forward(h: &Mat, params: &ModelParams, cfg: &ModelConfig, rng: Option<&mut Rng>) -> Result<Mat> {
    ms_fwd(h, params, cfg, rng).map(|(m, _)| m)
}

/// `D × T → 2H × T`; rows `[0, H)` forward, `[H, 2H)` backward direction.
pub fn bilstm_forward(h: &Mat, params: &ModelParams, cfg: &ModelConfig) -> Result<Mat> {
    lstm_fwd(h, params, cfg).map(|(m, _)| m)
}

/// Row-stacks the enabled branch outputs in the order bm, ms, lstm.
pub fn concat_features(
    f_bm: Option<&Mat>,
    f_ms: Option<&Mat>,
    f_lstm: Option<&Mat>,
    flags: BranchFlags,
) -> Result<Mat> {
    if !flags.any() {
        return Err(Error::config("all branches disabled"));
    }
    let mut parts = Vec::new();
    for (on, m, name) in [
        (flags.bm_on, f_bm, "bm"),
        (flags.ms_on, f_ms, "ms"),
        (flags.lstm_on, f_lstm, "lstm"),
    ] {
        if on {
            parts.push(m.ok_or_else(|| Error::dim(format!("branch {name} enabled but missing")))?);
        }
    }
    let t = parts[0].cols();
    if parts.iter().any(|m| m.cols() != t) {
        return Err(Error::dim("branch outputs differ in length"));
    }
    Mat::vstack(&parts)
}

pub fn ds_fusion_forward(f: &Mat, params: &ModelParams, cfg: &ModelConfig, rng: Option<&mut Rng>) -> Result<Mat> {
    fusion_fwd(f, params, cfg, rng).map(|(m, _)| m)
}

pub fn avg_pool_forward(h: &Mat, cfg: &ModelConfig) -> Result<Mat> {
    avg_pool(h, cfg.pool_window, cfg.pool_stride)
}

/// Per-frame `D → 1` map and sigmoid.
pub fn head_forward(h: &Mat, params: &ModelParams) -> Result<ProbabilitySequence> {
    let d = h.rows();
    let z = conv1d(
        h,
        params.data("head.weight", &[1, d, 1])?,
        params.data("head.bias", &[1])?,
        ConvShape::pointwise(d, 1),
    )?;
    Ok(ProbabilitySequence::new(
        MODEL_FRAME_RATE_HZ,
        z.data().iter().map(|&v| sigmoid(v)).collect(),
    ))
}

/// Full network in evaluation (`rng = None`) or training mode.
pub fn model_forward(
    x: &Mat,
    params: &ModelParams,
    cfg: &ModelConfig,
    rng: Option<&mut Rng>,
) -> Result<ProbabilitySequence> {
    let cache = forward(x, params, cfg, rng)?;
    Ok(ProbabilitySequence::new(MODEL_FRAME_RATE_HZ, cache.output))
}

/// Pooled head output before upsampling.
pub fn pooled_probabilities(x: &Mat, params: &ModelParams, cfg: &ModelConfig) -> Result<Vec<f64>> {
    Ok(forward(x, params, cfg, None)?.pooled_probs)
}

#[cfg(test)]
#[path = "model_tests.rs"]
mod tests;
