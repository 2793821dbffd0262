use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Kernel width of the first conv in every BM-encoder block.
pub const BM_KERNEL: usize = 3;

/// Which temporal branches feed the fusion layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BranchFlags {
    pub bm_on: bool,
    pub ms_on: bool,
    pub lstm_on: bool,
}

impl Default for BranchFlags {
    fn default() -> Self {
        Self {
            bm_on: true,
            ms_on: true,
            lstm_on: true,
        }
    }
}

impl BranchFlags {
    /// The six single- and double-branch ablations of the full model.
    pub fn ablations() -> [(&'static str, BranchFlags); 6] {
        let f = |bm_on, ms_on, lstm_on| BranchFlags { bm_on, ms_on, lstm_on };
        [
            ("w/o BM encoder", f(false, true, true)),
            ("w/o multi-scale conv", f(true, false, true)),
            ("w/o BiLSTM", f(true, true, false)),
            ("w/o BM encoder + multi-scale conv", f(false, false, true)),
            ("w/o multi-scale conv + BiLSTM", f(true, false, false)),
            ("w/o BiLSTM + BM encoder", f(false, true, false)),
        ]
    }

    pub fn any(&self) -> bool {
        self.bm_on || self.ms_on || self.lstm_on
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub c_in: usize,
    pub d: usize,
    pub n_bm: usize,
    pub n_ms: usize,
    pub ms_kernel_sizes: Vec<usize>,
    /// Hidden units per LSTM direction.
    pub lstm_hidden: usize,
    pub dropout_p: f64,
    pub pool_window: usize,
    pub pool_stride: usize,
    /// Depthwise kernel of the fusion block.
    pub ds_kernel: usize,
    pub branches: BranchFlags,
}

impl Default for ModelConfig {
    /// Full-size model: 10,217,160 trainable parameters.
    fn default() -> Self {
        Self {
            c_in: 204,
            d: 128,
            n_bm: 5,
            n_ms: 12,
            ms_kernel_sizes: vec![3, 5, 7, 9],
            lstm_hidden: 960,
            dropout_p: 0.01,
            pool_window: 31,
            pool_stride: 15,
            ds_kernel: 7,
            branches: BranchFlags::default(),
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("c_in", self.c_in),
            ("d", self.d),
            ("lstm_hidden", self.lstm_hidden),
            ("pool_window", self.pool_window),
            ("pool_stride", self.pool_stride),
            ("ds_kernel", self.ds_kernel),
        ];
        if let Some((name, _)) = dims.iter().find(|(_, v)| *v == 0) {
            return Err(Error::config(format!("{name} must be >= 1")));
        }
        if self.branches.bm_on && self.n_bm == 0 {
            return Err(Error::config("n_bm must be >= 1 when the BM branch is on"));
        }
        if self.branches.ms_on && self.n_ms == 0 {
            return Err(Error::config("n_ms must be >= 1 when the multi-scale branch is on"));
        }
        if self.ms_kernel_sizes.is_empty() {
            return Err(Error::config("ms_kernel_sizes is empty"));
        }
        for &k in self.ms_kernel_sizes.iter().chain([&self.ds_kernel]) {
            if k % 2 == 0 {
                return Err(Error::config(format!(
                    "kernel size {k} is even; same padding needs odd kernels"
                )));
            }
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(Error::config(format!(
                "dropout_p must be in [0, 1), got {}",
                self.dropout_p
            )));
        }
        if self.pool_stride > self.pool_window {
            return Err(Error::config("pool_stride must not exceed pool_window"));
        }
        if !self.branches.any() {
            return Err(Error::config("at least one branch must be enabled"));
        }
        Ok(())
    }

    /// Bottleneck width of the channel gate.
    pub fn attn_hidden(&self) -> usize {
        (self.c_in / 4).max(1)
    }

    pub fn ms_kernel(&self, block: usize) -> usize {
        self.ms_kernel_sizes[block % self.ms_kernel_sizes.len()]
    }

    pub fn bm_dilation(block: usize) -> usize {
        1 << (block % 5)
    }

    /// Rows of the concatenated branch features.
    pub fn fused_width(&self) -> usize {
        let b = &self.branches;
        usize::from(b.bm_on) * self.d + usize::from(b.ms_on) * self.d + usize::from(b.lstm_on) * 2 * self.lstm_hidden
    }

    pub fn pooled_len(&self, t: usize) -> usize {
        if t < self.pool_window {
            0
        } else {
            (t - self.pool_window) / self.pool_stride + 1
        }
    }

    /// Field-tagged `key=value` lines, the form stored in checkpoints.
    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.kv_pairs() {
            let _ = writeln!(s, "{k}={v}");
        }
        s
    }

    pub fn kv_pairs(&self) -> Vec<(&'static str, String)> {
        let kernels: Vec<String> = self.ms_kernel_sizes.iter().map(|k| k.to_string()).collect();
        vec![
            ("c_in", self.c_in.to_string()),
            ("d", self.d.to_string()),
            ("n_bm", self.n_bm.to_string()),
            ("n_ms", self.n_ms.to_string()),
            ("ms_kernel_sizes", kernels.join(",")),
            ("lstm_hidden", self.lstm_hidden.to_string()),
            ("dropout_p", self.dropout_p.to_string()),
            ("pool_window", self.pool_window.to_string()),
            ("pool_stride", self.pool_stride.to_string()),
            ("ds_kernel", self.ds_kernel.to_string()),
            ("bm_on", self.branches.bm_on.to_string()),
            ("ms_on", self.branches.ms_on.to_string()),
            ("lstm_on", self.branches.lstm_on.to_string()),
        ]
    }

    pub const KEYS: [&'static str; 13] = [
        "c_in",
        "d",
        "n_bm",
        "n_ms",
        "ms_kernel_sizes",
        "lstm_hidden",
        "dropout_p",
        "pool_window",
        "pool_stride",
        "ds_kernel",
        "bm_on",
        "ms_on",
        "lstm_on",
    ];

    /// Applies `key=value` settings on top of `self`. Unknown keys are errors.
    pub fn apply_kv<'a>(&mut self, pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<()> {
        for (k, v) in pairs {
            match k {
                "c_in" => self.c_in = parse(k, v)?,
                "d" => self.d = parse(k, v)?,
                "n_bm" => self.n_bm = parse(k, v)?,
                "n_ms" => self.n_ms = parse(k, v)?,
                "ms_kernel_sizes" => self.ms_kernel_sizes = parse_list(k, v)?,
                "lstm_hidden" => self.lstm_hidden = parse(k, v)?,
                "dropout_p" => self.dropout_p = parse(k, v)?,
                "pool_window" => self.pool_window = parse(k, v)?,
                "pool_stride" => self.pool_stride = parse(k, v)?,
                "ds_kernel" => self.ds_kernel = parse(k, v)?,
                "bm_on" => self.branches.bm_on = parse(k, v)?,
                "ms_on" => self.branches.ms_on = parse(k, v)?,
                "lstm_on" => self.branches.lstm_on = parse(k, v)?,
                _ => return Err(Error::config(format!("unknown model key {k:?}"))),
            }
        }
        Ok(())
    }

    pub fn from_kv(text: &str) -> Result<Self> {
        let map = crate::kv::parse_kv(text)?;
        let mut cfg = Self::default();
        cfg.apply_kv(map.iter().map(|(k, v)| (k.as_str(), v.as_str())))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

pub(crate) fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .trim()
        .parse()
        .map_err(|e| Error::config(format!("{key}: cannot parse {value:?}: {e}")))
}

pub(crate) fn parse_list(key: &str, value: &str) -> Result<Vec<usize>> {
    value.split(',').map(|p| parse(key, p)).collect()
}

/// How a tensor is initialised.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Init {
    /// Uniform in `±sqrt(6 / (fan_in + fan_out))`.
    Uniform {
        fan_in: usize,
        fan_out: usize,
    },
    Zeros,
    /// LSTM bias: zero except the forget-gate slice `[h, 2h)`, which is 1.
    LstmBias {
        hidden: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub init: Init,
    /// Receives decoupled weight decay.
    pub decay: bool,
}

impl ParamSpec {
    fn weight(name: String, shape: Vec<usize>, fan_in: usize, fan_out: usize) -> Self {
        Self {
            name,
            shape,
            init: Init::Uniform { fan_in, fan_out },
            decay: true,
        }
    }

    fn bias(name: String, len: usize) -> Self {
        Self {
            name,
            shape: vec![len],
            init: Init::Zeros,
            decay: false,
        }
    }

    pub fn numel(&self) -> usize {
        self.shape.iter().product()
    }
}

/// Every trainable tensor of `cfg`, in storage order. Disabled branches
/// contribute nothing.
pub fn param_layout(cfg: &ModelConfig) -> Vec<ParamSpec> {
    let (c, d, h) = (cfg.c_in, cfg.d, cfg.lstm_hidden);
    let a = cfg.attn_hidden();
    let mut out = vec![
        ParamSpec::weight("attn.squeeze.weight".into(), vec![a, c], c, a),
        ParamSpec::bias("attn.squeeze.bias".into(), a),
        ParamSpec::weight("attn.excite.weight".into(), vec![c, a], a, c),
        ParamSpec::bias("attn.excite.bias".into(), c),
        ParamSpec::weight("attn.proj.weight".into(), vec![d, c, 1], c, d),
        ParamSpec::bias("attn.proj.bias".into(), d),
    ];
    if cfg.branches.bm_on {
        for k in 0..cfg.n_bm {
            out.push(ParamSpec::weight(
                format!("bm.{k}.conv1.weight"),
                vec![d, d, BM_KERNEL],
                d * BM_KERNEL,
                d * BM_KERNEL,
            ));
            out.push(ParamSpec::bias(format!("bm.{k}.conv1.bias"), d));
            out.push(ParamSpec::weight(format!("bm.{k}.conv2.weight"), vec![d, d, 1], d, d));
            out.push(ParamSpec::bias(format!("bm.{k}.conv2.bias"), d));
        }
    }
    if cfg.branches.ms_on {
        for j in 0..cfg.n_ms {
            let k = cfg.ms_kernel(j);
            out.push(ParamSpec::weight(
                format!("ms.{j}.conv.weight"),
                vec![d, d, k],
                d * k,
                d * k,
            ));
            out.push(ParamSpec::bias(format!("ms.{j}.conv.bias"), d));
        }
    }
    if cfg.branches.lstm_on {
        for dir in ["fwd", "bwd"] {
            out.push(ParamSpec::weight(format!("lstm.{dir}.w_ih"), vec![4 * h, d], d, 4 * h));
            out.push(ParamSpec::weight(format!("lstm.{dir}.w_hh"), vec![4 * h, h], h, 4 * h));
            out.push(ParamSpec {
                name: format!("lstm.{dir}.bias"),
                shape: vec![4 * h],
                init: Init::LstmBias { hidden: h },
                decay: false,
            });
        }
    }
    let f = cfg.fused_width();
    let k = cfg.ds_kernel;
    out.push(ParamSpec::weight("fusion.depthwise.weight".into(), vec![f, 1, k], k, k));
    out.push(ParamSpec::bias("fusion.depthwise.bias".into(), f));
    out.push(ParamSpec::weight("fusion.pointwise.weight".into(), vec![d, f, 1], f, d));
    out.push(ParamSpec::bias("fusion.pointwise.bias".into(), d));
    out.push(ParamSpec::weight("head.weight".into(), vec![1, d, 1], d, 1));
    out.push(ParamSpec::bias("head.bias".into(), 1));
    out
}

/// Closed-form trainable parameter count.
pub fn count_params(cfg: &ModelConfig) -> usize {
    let (c, d, h) = (cfg.c_in, cfg.d, cfg.lstm_hidden);
    let a = cfg.attn_hidden();
    let attention = (c * a + a) + (a * c + c) + (c * d + d);
    let bm = if cfg.branches.bm_on {
        cfg.n_bm * ((d * d * BM_KERNEL + d) + (d * d + d))
    } else {
        0
    };
    let ms = if cfg.branches.ms_on {
        let kernel_sum: usize = (0..cfg.n_ms).map(|j| cfg.ms_kernel(j)).sum();
        d * d * kernel_sum + cfg.n_ms * d
    } else {
        0
    };
    let lstm = if cfg.branches.lstm_on {
        2 * (4 * h * d + 4 * h * h + 4 * h)
    } else {
        0
    };
    let f = cfg.fused_width();
    let fusion = (f * cfg.ds_kernel + f) + (f * d + d);
    let head = d + 1;
    attention + bm + ms + lstm + fusion + head
}
