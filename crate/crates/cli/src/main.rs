//! `ieae`: encrypt/decrypt images, run the equivalent-key attack, and export
//! functional graphs and conversion statistics.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use ieae_core::attack::{self, decrypt_with_mask, enumerate_layout_candidates, extract_mask};
use ieae_core::chaos::{
    self, arnold_mod_map, component_census, export_dot, logistic_fixed_map, logistic_minifloat_map,
    FixedPointSpec, MiniFloatSpec,
};
use ieae_core::formats::{self, KeyFile, LambdaSource, SidecarMetadata};
use ieae_core::lyapunov::{wolf_lle, EmbeddingConfig};
use ieae_core::{BlockLayout, Error, GrayImage, Ieae, PublicParams, Quantizer};

#[derive(Parser)]
#[command(
    name = "ieae",
    version,
    about = "Image cipher workbench: encryption, equivalent-key attack, digital-chaos graphs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Encrypt a PGM image; writes the cipher and `<output>.meta`.
    Encrypt {
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Decrypt a cipher PGM using its sidecar metadata.
    Decrypt {
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        input: PathBuf,
        /// Defaults to `<input>.meta`.
        #[arg(long)]
        meta: Option<PathBuf>,
        #[arg(long)]
        output: PathBuf,
    },
    /// Recover the equivalent key (mask) from one known plain/cipher pair.
    ExtractMask {
        #[arg(long)]
        plain: PathBuf,
        #[arg(long)]
        cipher: PathBuf,
        #[arg(long)]
        p1: usize,
        #[arg(long)]
        p2: usize,
        #[arg(long)]
        rounds: u32,
        /// Accept block sizes outside the nine-entry table.
        #[arg(long)]
        raw_blocks: bool,
        /// Writes the mask PGM and `<output>.meta`.
        #[arg(long)]
        output: PathBuf,
    },
    /// Decrypt a cipher with a recovered mask.
    MaskDecrypt {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        mask: PathBuf,
        /// Defaults to `<mask>.meta`.
        #[arg(long)]
        mask_meta: Option<PathBuf>,
        #[arg(long)]
        output: PathBuf,
    },
    /// Rank the nine table layouts for a known pair, optionally using a second cipher.
    Layouts {
        #[arg(long)]
        plain: PathBuf,
        #[arg(long)]
        cipher: PathBuf,
        #[arg(long)]
        rounds: u32,
        #[arg(long)]
        second: Option<PathBuf>,
    },
    /// Transfer a reference mask to seeded random plaintexts and count recoveries.
    AttackExperiment {
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        reference: PathBuf,
        #[arg(long, default_value_t = 2560)]
        trials: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Export a functional graph (DOT) and its component census.
    Graph {
        #[command(subcommand)]
        kind: GraphKind,
    },
    /// Bit length and popcount of 10^m.
    Pow10 {
        #[arg(long, default_value_t = 1)]
        from: u32,
        #[arg(long, default_value_t = 50)]
        to: u32,
    },
    /// Largest Lyapunov exponent of a one-sample-per-line series.
    Lyapunov {
        #[arg(long)]
        series: PathBuf,
        #[arg(long, default_value_t = 2)]
        embed_m: usize,
        /// Defaults to 10% of the series range.
        #[arg(long)]
        epsilon: Option<f64>,
    },
}

#[derive(Args)]
struct GraphOut {
    #[arg(long)]
    dot: PathBuf,
    #[arg(long)]
    census: PathBuf,
}

#[derive(Subcommand)]
enum GraphKind {
    /// Logistic map on the fixed-point grid {0..2^bits}.
    LogisticFixed {
        #[arg(long, default_value_t = 61)]
        mu_num: u64,
        #[arg(long, default_value_t = 4)]
        mu_den_pow2: u32,
        #[arg(long, default_value_t = 6)]
        bits: u32,
        #[arg(long, default_value = "floor")]
        quantizer: String,
        #[command(flatten)]
        out: GraphOut,
    },
    /// Logistic map in a minifloat format.
    LogisticFloat {
        #[arg(long, default_value_t = 123.0 / 32.0)]
        mu: f64,
        #[arg(long, default_value_t = 4)]
        exp_bits: u32,
        #[arg(long, default_value_t = 4)]
        mant_bits: u32,
        #[arg(long, default_value_t = 7)]
        bias: i32,
        #[command(flatten)]
        out: GraphOut,
    },
    /// Generalized Arnold map modulo 2^bits.
    Arnold {
        #[arg(long)]
        a: u64,
        #[arg(long)]
        b: u64,
        #[arg(long, default_value_t = 4)]
        bits: u32,
        #[command(flatten)]
        out: GraphOut,
    },
}

/// Failure carrying the process exit status.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        let code = match error.downcast_ref::<Error>() {
            Some(Error::Parse { .. } | Error::InvalidArgument(_)) => 2,
            _ => 1,
        };
        Failure { code, error }
    }
}

impl From<Error> for Failure {
    fn from(error: Error) -> Self {
        anyhow::Error::from(error).into()
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        error: anyhow::anyhow!(msg.into()),
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn run(command: Command) -> CmdResult {
    match command {
        Command::Encrypt { key, input, output } => cmd_encrypt(&key, &input, &output),
        Command::Decrypt {
            key,
            input,
            meta,
            output,
        } => cmd_decrypt(&key, &input, meta.as_deref(), &output),
        Command::ExtractMask {
            plain,
            cipher,
            p1,
            p2,
            rounds,
            raw_blocks,
            output,
        } => cmd_extract_mask(&plain, &cipher, (p1, p2), rounds, raw_blocks, &output),
        Command::MaskDecrypt {
            input,
            mask,
            mask_meta,
            output,
        } => cmd_mask_decrypt(&input, &mask, mask_meta.as_deref(), &output),
        Command::Layouts {
            plain,
            cipher,
            rounds,
            second,
        } => cmd_layouts(&plain, &cipher, rounds, second.as_deref()),
        Command::AttackExperiment {
            key,
            reference,
            trials,
            seed,
        } => cmd_attack_experiment(&key, &reference, trials, seed),
        Command::Graph { kind } => cmd_graph(kind),
        Command::Pow10 { from, to } => cmd_pow10(from, to),
        Command::Lyapunov {
            series,
            embed_m,
            epsilon,
        } => cmd_lyapunov(&series, embed_m, epsilon),
    }
}

fn meta_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

fn read_text(path: &Path) -> anyhow::Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write_file(path: &Path, data: impl AsRef<[u8]>) -> anyhow::Result<()> {
    std::fs::write(path, data).with_context(|| format!("writing {}", path.display()))
}

fn read_pgm(path: &Path) -> anyhow::Result<GrayImage> {
    let data = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    formats::parse_pgm(&data).with_context(|| format!("parsing {}", path.display()))
}

fn read_meta(path: &Path) -> anyhow::Result<SidecarMetadata> {
    SidecarMetadata::parse(&read_text(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn load_cipher(key_path: &Path) -> anyhow::Result<Ieae> {
    let kf = KeyFile::parse(&read_text(key_path)?)
        .with_context(|| format!("parsing {}", key_path.display()))?;
    let lambda = match &kf.lambda {
        LambdaSource::Value(v) => *v,
        LambdaSource::Ecg {
            path,
            embed_m,
            epsilon,
        } => {
            let series_path = key_path.parent().unwrap_or(Path::new(".")).join(path);
            let series = formats::parse_series(&read_text(&series_path)?)
                .with_context(|| format!("parsing {}", series_path.display()))?;
            let cfg = match epsilon {
                Some(e) => EmbeddingConfig::new(*embed_m, *e)?,
                None => EmbeddingConfig::with_default_epsilon(&series, *embed_m)?,
            };
            let (lambda, log) =
                wolf_lle(&series, &cfg).context("estimating λ from the ECG series")?;
            eprintln!("λ = {lambda:?} from {} replacements", log.q());
            lambda
        }
    };
    Ok(Ieae::new(kf.key, PublicParams::new(kf.rounds)?, lambda)?)
}

fn cmd_encrypt(key: &Path, input: &Path, output: &Path) -> CmdResult {
    let cipher = load_cipher(key)?;
    let image = read_pgm(input)?;
    let enc = cipher.encrypt(&image)?;
    write_file(output, formats::write_pgm(&enc.image))?;
    let meta = SidecarMetadata::new(enc.mu3, &enc.layout, cipher.params().rounds());
    write_file(&meta_path(output), meta.to_text())?;
    Ok(())
}

fn cmd_decrypt(key: &Path, input: &Path, meta: Option<&Path>, output: &Path) -> CmdResult {
    let meta_file = meta.map_or_else(|| meta_path(input), Path::to_path_buf);
    if !meta_file.exists() {
        return Err(usage(format!(
            "metadata {} not found; decryption needs the plaintext-derived μ3 and original size recorded at encryption",
            meta_file.display()
        )));
    }
    let meta = read_meta(&meta_file)?;
    let cipher = load_cipher(key)?;
    if meta.r_rounds != cipher.params().rounds() || (meta.p1, meta.p2) != cipher.block_size() {
        eprintln!(
            "warning: metadata rounds/layout differ from what the key implies; using the key"
        );
    }
    let image = read_pgm(input)?;
    let plain = cipher.decrypt(&image, meta.mu3)?;
    let plain = plain.crop(meta.orig_m, meta.orig_n)?;
    write_file(output, formats::write_pgm(&plain))?;
    Ok(())
}

fn cmd_extract_mask(
    plain: &Path,
    cipher: &Path,
    (p1, p2): (usize, usize),
    rounds: u32,
    raw: bool,
    output: &Path,
) -> CmdResult {
    if rounds == 0 {
        return Err(usage("--rounds must be at least 1"));
    }
    let plain = read_pgm(plain)?;
    let cipher = read_pgm(cipher)?;
    let layout = BlockLayout::new(p1, p2, plain.rows(), plain.cols())?;
    if !raw && !layout.is_table_entry() {
        return Err(usage(format!(
            "{p1}x{p2} is not a table block size (use --raw-blocks to force)"
        )));
    }
    let mask = extract_mask(&plain, &cipher, &layout, rounds)?;
    write_file(output, formats::write_pgm(&mask.mask))?;
    write_file(
        &meta_path(output),
        SidecarMetadata::new(mask.mu3_tag, &mask.layout, rounds).to_text(),
    )?;
    Ok(())
}

fn cmd_mask_decrypt(
    input: &Path,
    mask: &Path,
    mask_meta: Option<&Path>,
    output: &Path,
) -> CmdResult {
    let meta = read_meta(&mask_meta.map_or_else(|| meta_path(mask), Path::to_path_buf))?;
    let mask_img = read_pgm(mask)?;
    let cipher = read_pgm(input)?;
    let layout = meta.layout_for(mask_img.rows(), mask_img.cols())?;
    let mask = ieae_core::MaskImage {
        mask: mask_img,
        layout,
        rounds: meta.r_rounds,
        mu3_tag: meta.mu3,
    };
    let plain = decrypt_with_mask(&cipher, &mask)?;
    eprintln!(
        "warning: recovery is exact only if the target plaintext has μ3 = {} (first-block sum mod 256 + 1)",
        meta.mu3
    );
    write_file(output, formats::write_pgm(&plain))?;
    Ok(())
}

fn cmd_layouts(plain: &Path, cipher: &Path, rounds: u32, second: Option<&Path>) -> CmdResult {
    if rounds == 0 {
        return Err(usage("--rounds must be at least 1"));
    }
    let plain = read_pgm(plain)?;
    let cipher = read_pgm(cipher)?;
    let second = second.map(read_pgm).transpose()?;
    let cands = enumerate_layout_candidates(&plain, &cipher, rounds, second.as_ref())?;
    println!("p1,p2,mu3_tag,score");
    for c in cands {
        let score = c
            .score
            .map_or_else(|| "-".to_string(), |s| format!("{s:.4}"));
        println!(
            "{},{},{},{}",
            c.layout.p1, c.layout.p2, c.mask.mu3_tag, score
        );
    }
    Ok(())
}

fn cmd_attack_experiment(key: &Path, reference: &Path, trials: usize, seed: u64) -> CmdResult {
    if trials < 256 {
        return Err(usage(format!(
            "--trials must be at least 256, got {trials}"
        )));
    }
    let cipher = load_cipher(key)?;
    let reference = read_pgm(reference)?;
    let report = attack::run_experiment(&cipher, &reference, trials, seed)?;
    println!("{report}");
    println!("within_3_sigma={}", report.within_sigmas(3.0));
    if report.inconsistent != 0 {
        return Err(Failure {
            code: 1,
            error: anyhow::anyhow!(
                "{} trials where recovery and μ3 match disagree",
                report.inconsistent
            ),
        });
    }
    Ok(())
}

fn cmd_graph(kind: GraphKind) -> CmdResult {
    let (graph, name, out) = match kind {
        GraphKind::LogisticFixed {
            mu_num,
            mu_den_pow2,
            bits,
            quantizer,
            out,
        } => {
            let quantizer: Quantizer = quantizer.parse()?;
            let g = logistic_fixed_map(mu_num, mu_den_pow2, FixedPointSpec { e: bits, quantizer })?;
            (g, format!("logistic_fixed_{quantizer}"), out)
        }
        GraphKind::LogisticFloat {
            mu,
            exp_bits,
            mant_bits,
            bias,
            out,
        } => {
            let spec = MiniFloatSpec {
                sign_bits: 1,
                exp_bits,
                mant_bits,
                bias,
            };
            (
                logistic_minifloat_map(mu, spec)?,
                "logistic_float".to_string(),
                out,
            )
        }
        GraphKind::Arnold { a, b, bits, out } => {
            (arnold_mod_map(a, b, bits)?, format!("arnold_{a}_{b}"), out)
        }
    };
    let census = component_census(&graph);
    write_file(&out.dot, export_dot(&graph, &name))?;
    write_file(&out.census, census.to_text())?;
    eprintln!(
        "{} nodes, {} components",
        graph.len(),
        census.component_total()
    );
    Ok(())
}

fn cmd_pow10(from: u32, to: u32) -> CmdResult {
    if from < 1 || to > 50 || from > to {
        return Err(usage(format!("range {from}..={to} must lie within 1..=50")));
    }
    println!("m,bit_length,popcount");
    for m in from..=to {
        let s = chaos::pow10_stats(m)?;
        println!("{},{},{}", s.m, s.bit_length, s.popcount);
    }
    Ok(())
}

fn cmd_lyapunov(series: &Path, embed_m: usize, epsilon: Option<f64>) -> CmdResult {
    let samples = formats::parse_series(&read_text(series)?)?;
    let cfg = match epsilon {
        Some(e) => EmbeddingConfig::new(embed_m, e)?,
        None => EmbeddingConfig::with_default_epsilon(&samples, embed_m)?,
    };
    let (lambda, log) = wolf_lle(&samples, &cfg)?;
    println!("lambda={lambda:?}");
    println!("q={}", log.q());
    println!("t_final={}", log.t_final);
    println!("fallbacks={}", log.fallbacks());
    println!("k,t,neighbor,steps,initial,evolved");
    for (k, r) in log.replacements.iter().enumerate() {
        println!(
            "{},{},{},{},{:?},{:?}",
            k + 1,
            r.t,
            r.neighbor,
            r.steps,
            r.initial,
            r.evolved
        );
    }
    Ok(())
}
