//! Multichannel recordings and the MEGR container.
//!
//! Layout (little-endian):
//!
//! ```text
//! "MEGR" | version u32 = 1 | n_channels u32 | n_samples u64 | sample_rate_hz f64
//! per channel: name_len u16 | UTF-8 name | kind u8 (0 grad, 1 mag, 2 other)
//! f32 samples, channel-major (row c holds n_samples values)
//! ```

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"MEGR";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ChannelKind {
    Grad,
    Mag,
    Other,
}

impl ChannelKind {
    pub fn code(self) -> u8 {
        match self {
            ChannelKind::Grad => 0,
            ChannelKind::Mag => 1,
            ChannelKind::Other => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(ChannelKind::Grad),
            1 => Some(ChannelKind::Mag),
            2 => Some(ChannelKind::Other),
            _ => None,
        }
    }
}

impl fmt::Display for ChannelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ChannelKind::Grad => "grad",
            ChannelKind::Mag => "mag",
            ChannelKind::Other => "other",
        })
    }
}

impl std::str::FromStr for ChannelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "grad" => Ok(ChannelKind::Grad),
            "mag" => Ok(ChannelKind::Mag),
            "other" => Ok(ChannelKind::Other),
            _ => Err(Error::config(format!("unknown channel kind {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChannelMeta {
    pub name: String,
    pub kind: ChannelKind,
}

impl ChannelMeta {
    pub fn new(name: impl Into<String>, kind: ChannelKind) -> Self {
        Self {
            name: name.into(),
            kind,
        }
    }
}

/// A `C × N` block of samples with per-channel metadata.
///
/// Samples are kept as `f32`, which is also the on-disk precision; all
/// statistics over them are accumulated in `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    sample_rate_hz: f64,
    channels: Vec<ChannelMeta>,
    n_samples: usize,
    data: Vec<f32>,
}

impl Recording {
    pub fn new(sample_rate_hz: f64, channels: Vec<ChannelMeta>, n_samples: usize, data: Vec<f32>) -> Result<Self> {
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(Error::Header(format!(
                "sample rate must be positive and finite, got {sample_rate_hz}"
            )));
        }
        if channels.is_empty() {
            return Err(Error::Header("recording has no channels".into()));
        }
        if n_samples == 0 {
            return Err(Error::Header("recording has no samples".into()));
        }
        if data.len() != channels.len() * n_samples {
            return Err(Error::dim(format!(
                "{} channels x {} samples needs {} values, got {}",
                channels.len(),
                n_samples,
                channels.len() * n_samples,
                data.len()
            )));
        }
        let mut seen = HashSet::with_capacity(channels.len());
        for ch in &channels {
            if !seen.insert(ch.name.as_str()) {
                return Err(Error::Header(format!("duplicate channel name {:?}", ch.name)));
            }
        }
        Ok(Self {
            sample_rate_hz,
            channels,
            n_samples,
            data,
        })
    }

    /// Builds a recording from per-channel rows.
    pub fn from_rows(sample_rate_hz: f64, channels: Vec<ChannelMeta>, rows: Vec<Vec<f32>>) -> Result<Self> {
        if rows.len() != channels.len() {
            return Err(Error::dim(format!(
                "{} rows for {} channels",
                rows.len(),
                channels.len()
            )));
        }
        let n = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::dim("rows have unequal lengths"));
        }
        let data = rows.into_iter().flatten().collect();
        Self::new(sample_rate_hz, channels, n, data)
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn channels(&self) -> &[ChannelMeta] {
        &self.channels
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn row(&self, c: usize) -> &[f32] {
        &self.data[c * self.n_samples..(c + 1) * self.n_samples]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f32]> {
        self.data.chunks_exact(self.n_samples)
    }

    pub fn duration_s(&self) -> f64 {
        self.n_samples as f64 / self.sample_rate_hz
    }

    /// Same channels, new samples. Used by the per-row transforms.
    pub(crate) fn with_rows(&self, sample_rate_hz: f64, rows: Vec<Vec<f32>>) -> Result<Self> {
        Self::from_rows(sample_rate_hz, self.channels.clone(), rows)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::with_capacity(28 + self.channels.len() * 16 + self.data.len() * 4);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.channels.len() as u32).to_le_bytes());
        out.extend_from_slice(&(self.n_samples as u64).to_le_bytes());
        out.extend_from_slice(&self.sample_rate_hz.to_le_bytes());
        for ch in &self.channels {
            if ch.name.contains('\0') {
                return Err(Error::Encoding(format!(
                    "channel name {:?} contains a NUL byte",
                    ch.name
                )));
            }
            let len = u16::try_from(ch.name.len())
                .map_err(|_| Error::Encoding(format!("channel name longer than {} bytes", u16::MAX)))?;
            out.extend_from_slice(&len.to_le_bytes());
            out.extend_from_slice(ch.name.as_bytes());
            out.push(ch.kind.code());
        }
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes);
        if r.take(4)? != MAGIC {
            return Err(Error::Format("bad magic, expected MEGR".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported MEGR version {version}")));
        }
        let n_channels = r.u32()? as usize;
        let n_samples =
            usize::try_from(r.u64()?).map_err(|_| Error::Header("sample count does not fit in memory".into()))?;
        let sample_rate_hz = r.f64()?;
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(Error::Header(format!("invalid sample rate {sample_rate_hz}")));
        }
        if n_channels == 0 || n_samples == 0 {
            return Err(Error::Header(format!(
                "empty recording ({n_channels} channels, {n_samples} samples)"
            )));
        }
        let mut channels = Vec::with_capacity(n_channels.min(4096));
        for _ in 0..n_channels {
            let len = r.u16()? as usize;
            let name = std::str::from_utf8(r.take(len)?).map_err(|e| Error::Encoding(format!("channel name: {e}")))?;
            if name.contains('\0') {
                return Err(Error::Encoding("channel name contains a NUL byte".into()));
            }
            let code = r.u8()?;
            let kind = ChannelKind::from_code(code)
                .ok_or_else(|| Error::Format(format!("unknown channel kind code {code}")))?;
            channels.push(ChannelMeta::new(name, kind));
        }
        let n_values = n_channels
            .checked_mul(n_samples)
            .ok_or_else(|| Error::Header("sample count overflows".into()))?;
        let payload = r.rest();
        if payload.len() / 4 < n_values {
            return Err(Error::Length(format!(
                "header declares {n_values} samples, payload holds {}",
                payload.len() / 4
            )));
        }
        if payload.len() != n_values * 4 {
            return Err(Error::Length(format!(
                "{} trailing bytes after payload",
                payload.len() - n_values * 4
            )));
        }
        let data = payload
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        Self::new(sample_rate_hz, channels, n_samples, data)
    }
}

pub fn load_recording(path: impl AsRef<Path>) -> Result<Recording> {
    Recording::from_bytes(&fs::read(path)?)
}

pub fn save_recording(rec: &Recording, path: impl AsRef<Path>) -> Result<()> {
    let bytes = rec.to_bytes()?;
    fs::write(path, bytes)?;
    Ok(())
}

/// Little-endian cursor shared by the binary formats.
pub(crate) struct ByteReader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    pub(crate) fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Length(format!("unexpected end of data at byte {} (need {n} more)", self.pos)))?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    pub(crate) fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub(crate) fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub(crate) fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub(crate) fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub(crate) fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub(crate) fn rest(&mut self) -> &'a [u8] {
        let out = &self.buf[self.pos..];
        self.pos = self.buf.len();
        out
    }

    pub(crate) fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }
}
