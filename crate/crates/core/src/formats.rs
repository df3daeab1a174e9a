//! On-disk formats: binary PGM, `key=value` sidecar and key files, and
//! one-sample-per-line time series.

use std::collections::BTreeMap;

use crate::cipher::{BlockLayout, SecretKey};
use crate::error::{Error, Result};
use crate::image::GrayImage;

/// Parses a binary (P5) PGM with maxval 255. Comments are allowed in the header.
pub fn parse_pgm(data: &[u8]) -> Result<GrayImage> {
    let mut pos = 0usize;
    let mut line = 1usize;
    let mut fields = Vec::with_capacity(4);
    while fields.len() < 4 {
        // skip whitespace and comments
        loop {
            match data.get(pos) {
                Some(b'#') => {
                    while let Some(&c) = data.get(pos) {
                        pos += 1;
                        if c == b'\n' {
                            line += 1;
                            break;
                        }
                    }
                }
                Some(c) if c.is_ascii_whitespace() => {
                    if *c == b'\n' {
                        line += 1;
                    }
                    pos += 1;
                }
                _ => break,
            }
        }
        let start = pos;
        while data
            .get(pos)
            .is_some_and(|c| !c.is_ascii_whitespace() && *c != b'#')
        {
            pos += 1;
        }
        if start == pos {
            return Err(Error::parse(line, "truncated PGM header"));
        }
        fields.push((
            String::from_utf8_lossy(&data[start..pos]).into_owned(),
            line,
        ));
    }
    let (magic, l) = &fields[0];
    if magic != "P5" {
        return Err(Error::parse(
            *l,
            format!("expected binary PGM magic `P5`, found `{magic}`"),
        ));
    }
    let number = |i: usize, what: &str| -> Result<usize> {
        let (text, l) = &fields[i];
        text.parse::<usize>()
            .map_err(|_| Error::parse(*l, format!("invalid {what} `{text}`")))
    };
    let width = number(1, "width")?;
    let height = number(2, "height")?;
    let maxval = number(3, "maxval")?;
    if maxval != 255 {
        return Err(Error::parse(
            fields[3].1,
            format!("only maxval 255 is supported, found {maxval}"),
        ));
    }
    if width == 0 || height == 0 {
        return Err(Error::parse(
            fields[1].1,
            "image dimensions must be positive",
        ));
    }
    // exactly one whitespace byte separates the header from the raster
    if !data.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(Error::parse(line, "missing raster separator"));
    }
    pos += 1;
    let need = width
        .checked_mul(height)
        .ok_or_else(|| Error::parse(fields[1].1, "image dimensions overflow"))?;
    let raster = &data[pos..];
    if raster.len() < need {
        return Err(Error::parse(
            line,
            format!("raster truncated: {} of {need} bytes", raster.len()),
        ));
    }
    GrayImage::new(height, width, raster[..need].to_vec())
}

/// `P5\n<width> <height>\n255\n` followed by the row-major raster.
pub fn write_pgm(image: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", image.cols(), image.rows()).into_bytes();
    out.extend_from_slice(image.pixels());
    out
}

/// Flat `key=value` records with their one-based line numbers.
/// Blank lines and `#` comments are skipped; duplicate keys are an error.
pub fn parse_kv(text: &str) -> Result<BTreeMap<String, (String, usize)>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (k, v) = trimmed
            .split_once('=')
            .ok_or_else(|| Error::parse(line, format!("expected key=value, found `{trimmed}`")))?;
        let key = k.trim().to_string();
        if key.is_empty() {
            return Err(Error::parse(line, "empty key"));
        }
        if out
            .insert(key.clone(), (v.trim().to_string(), line))
            .is_some()
        {
            return Err(Error::parse(line, format!("duplicate key `{key}`")));
        }
    }
    Ok(out)
}

struct Records {
    map: BTreeMap<String, (String, usize)>,
    last_line: usize,
}

impl Records {
    fn new(text: &str) -> Result<Self> {
        Ok(Records {
            map: parse_kv(text)?,
            last_line: text.lines().count().max(1),
        })
    }

    fn raw(&self, key: &str) -> Option<&(String, usize)> {
        self.map.get(key)
    }

    fn opt<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.raw(key) {
            None => Ok(None),
            Some((v, line)) => v
                .parse::<T>()
                .map(Some)
                .map_err(|_| Error::parse(*line, format!("invalid value `{v}` for `{key}`"))),
        }
    }

    fn req<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        self.opt(key)?
            .ok_or_else(|| Error::parse(self.last_line, format!("missing required key `{key}`")))
    }

    fn reject_unknown(&self, known: &[&str]) -> Result<()> {
        match self.map.iter().find(|(k, _)| !known.contains(&k.as_str())) {
            Some((k, (_, line))) => Err(Error::parse(*line, format!("unknown key `{k}`"))),
            None => Ok(()),
        }
    }
}

/// Everything the receiver of a cipher (or holder of a mask) needs besides the key.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SidecarMetadata {
    pub mu3: u16,
    pub orig_m: usize,
    pub orig_n: usize,
    pub r_rounds: u32,
    pub p1: usize,
    pub p2: usize,
}

impl SidecarMetadata {
    const KEYS: [&'static str; 6] = ["mu3", "orig_m", "orig_n", "r_rounds", "p1", "p2"];

    pub fn new(mu3: u16, layout: &BlockLayout, rounds: u32) -> Self {
        SidecarMetadata {
            mu3,
            orig_m: layout.original_rows,
            orig_n: layout.original_cols,
            r_rounds: rounds,
            p1: layout.p1,
            p2: layout.p2,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let rec = Records::new(text)?;
        rec.reject_unknown(&Self::KEYS)?;
        let meta = SidecarMetadata {
            mu3: rec.req("mu3")?,
            orig_m: rec.req("orig_m")?,
            orig_n: rec.req("orig_n")?,
            r_rounds: rec.req("r_rounds")?,
            p1: rec.req("p1")?,
            p2: rec.req("p2")?,
        };
        let line = |k: &str| rec.raw(k).map_or(1, |(_, l)| *l);
        if !(1..=256).contains(&meta.mu3) {
            return Err(Error::parse(
                line("mu3"),
                format!("mu3={} outside [1, 256]", meta.mu3),
            ));
        }
        if meta.r_rounds == 0 {
            return Err(Error::parse(
                line("r_rounds"),
                "r_rounds must be at least 1",
            ));
        }
        for k in ["orig_m", "orig_n", "p1", "p2"] {
            if rec.opt::<usize>(k)? == Some(0) {
                return Err(Error::parse(line(k), format!("{k} must be positive")));
            }
        }
        Ok(meta)
    }

    pub fn to_text(&self) -> String {
        format!(
            "mu3={}\norig_m={}\norig_n={}\nr_rounds={}\np1={}\np2={}\n",
            self.mu3, self.orig_m, self.orig_n, self.r_rounds, self.p1, self.p2
        )
    }

    /// Layout of a padded image with the given dimensions.
    pub fn layout_for(&self, rows: usize, cols: usize) -> Result<BlockLayout> {
        if !rows.is_multiple_of(self.p1) || !cols.is_multiple_of(self.p2) {
            return Err(Error::Layout(format!(
                "{rows}x{cols} image is not tiled by {}x{} blocks",
                self.p1, self.p2
            )));
        }
        if self.orig_m > rows || self.orig_n > cols {
            return Err(Error::Layout(format!(
                "original size {}x{} exceeds image size {rows}x{cols}",
                self.orig_m, self.orig_n
            )));
        }
        Ok(BlockLayout {
            p1: self.p1,
            p2: self.p2,
            r1: rows / self.p1,
            r2: cols / self.p2,
            original_rows: self.orig_m,
            original_cols: self.orig_n,
        })
    }
}

/// Where the Lyapunov exponent comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum LambdaSource {
    Value(f64),
    /// Series file (resolved relative to the key file by the caller), with
    /// embedding dimension and optional evolution threshold.
    Ecg {
        path: String,
        embed_m: usize,
        epsilon: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct KeyFile {
    pub key: SecretKey,
    pub rounds: u32,
    pub lambda: LambdaSource,
}

impl KeyFile {
    const KEYS: [&'static str; 12] = [
        "omega1", "omega2", "mu1", "mu2", "mu", "a", "b", "r_rounds", "lambda", "ecg_path",
        "embed_m", "epsilon",
    ];

    pub fn parse(text: &str) -> Result<Self> {
        let rec = Records::new(text)?;
        rec.reject_unknown(&Self::KEYS)?;
        let key = SecretKey {
            omega1: rec.req("omega1")?,
            omega2: rec.req("omega2")?,
            mu1: rec.req("mu1")?,
            mu2: rec.req("mu2")?,
            mu: rec.req("mu")?,
            a: rec.req("a")?,
            b: rec.req("b")?,
        };
        let rounds: u32 = rec.req("r_rounds")?;
        let lambda = match (rec.opt::<f64>("lambda")?, rec.raw("ecg_path")) {
            (Some(v), None) => {
                if !v.is_finite() {
                    return Err(Error::parse(
                        rec.raw("lambda").map_or(1, |r| r.1),
                        "lambda must be finite",
                    ));
                }
                LambdaSource::Value(v)
            }
            (None, Some((path, _))) => LambdaSource::Ecg {
                path: path.clone(),
                embed_m: rec.opt("embed_m")?.unwrap_or(2),
                epsilon: rec.opt("epsilon")?,
            },
            (Some(_), Some((_, line))) => {
                return Err(Error::parse(
                    *line,
                    "give either `lambda` or `ecg_path`, not both",
                ));
            }
            (None, None) => {
                return Err(Error::parse(
                    rec.last_line,
                    "missing `lambda` (or `ecg_path`)",
                ));
            }
        };
        Ok(KeyFile {
            key,
            rounds,
            lambda,
        })
    }

    pub fn to_text(&self) -> String {
        let k = &self.key;
        let mut s = format!(
            "omega1={}\nomega2={}\nmu1={}\nmu2={}\nmu={}\na={}\nb={}\nr_rounds={}\n",
            k.omega1, k.omega2, k.mu1, k.mu2, k.mu, k.a, k.b, self.rounds
        );
        match &self.lambda {
            LambdaSource::Value(v) => s.push_str(&format!("lambda={v:?}\n")),
            LambdaSource::Ecg {
                path,
                embed_m,
                epsilon,
            } => {
                s.push_str(&format!("ecg_path={path}\nembed_m={embed_m}\n"));
                if let Some(e) = epsilon {
                    s.push_str(&format!("epsilon={e:?}\n"));
                }
            }
        }
        s
    }
}

/// One decimal sample per line; blank lines are skipped.
pub fn parse_series(text: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let t = raw.trim();
        if t.is_empty() {
            continue;
        }
        let v: f64 = t
            .parse()
            .map_err(|_| Error::parse(i + 1, format!("invalid sample `{t}`")))?;
        if !v.is_finite() {
            return Err(Error::parse(i + 1, format!("non-finite sample `{t}`")));
        }
        out.push(v);
    }
    Ok(out)
}
