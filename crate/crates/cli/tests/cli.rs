use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ieae_core::formats::{parse_pgm, write_pgm, SidecarMetadata};
use ieae_core::GrayImage;
use tempfile::TempDir;

const KEY: &str =
    "omega1=50\nomega2=50\nmu1=20\nmu2=15\nmu=3.999\na=1\nb=1\nr_rounds=3\nlambda=0.4321\n";

fn ieae(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ieae"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

struct Workspace {
    dir: TempDir,
}

impl Workspace {
    fn new() -> Self {
        let ws = Workspace {
            dir: tempfile::tempdir().unwrap(),
        };
        std::fs::write(ws.path("key.txt"), KEY).unwrap();
        ws
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn put_image(&self, name: &str, img: &GrayImage) -> PathBuf {
        let path = self.path(name);
        std::fs::write(&path, write_pgm(img)).unwrap();
        path
    }

    fn image(&self, name: &str) -> GrayImage {
        parse_pgm(&std::fs::read(self.path(name)).unwrap()).unwrap()
    }
}

fn smooth(rows: usize, cols: usize, phase: usize) -> GrayImage {
    GrayImage::from_fn(rows, cols, |i, j| ((i + phase) * 2 + j) as u8)
}

#[test]
fn encrypt_decrypt_round_trip() {
    let ws = Workspace::new();
    let key = ws.path("key.txt");
    let plain = ws.put_image("plain.pgm", &smooth(100, 90, 0));
    let out = ieae(&[
        "encrypt",
        "--key",
        p(&key),
        "--input",
        p(&plain),
        "--output",
        p(&ws.path("c.pgm")),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let meta =
        SidecarMetadata::parse(&std::fs::read_to_string(ws.path("c.pgm.meta")).unwrap()).unwrap();
    assert!((1..=256).contains(&meta.mu3));
    assert_eq!((meta.orig_m, meta.orig_n, meta.r_rounds), (100, 90, 3));
    let cipher = ws.image("c.pgm");
    assert_eq!(cipher.rows() % meta.p1, 0);
    assert_eq!(cipher.cols() % meta.p2, 0);

    let out = ieae(&[
        "decrypt",
        "--key",
        p(&key),
        "--input",
        p(&ws.path("c.pgm")),
        "--output",
        p(&ws.path("d.pgm")),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(ws.image("d.pgm"), smooth(100, 90, 0));

    // a different μ3 does not decrypt
    let wrong = SidecarMetadata {
        mu3: meta.mu3 % 256 + 1,
        ..meta
    };
    std::fs::write(ws.path("wrong.meta"), wrong.to_text()).unwrap();
    let out = ieae(&[
        "decrypt",
        "--key",
        p(&key),
        "--input",
        p(&ws.path("c.pgm")),
        "--meta",
        p(&ws.path("wrong.meta")),
        "--output",
        p(&ws.path("w.pgm")),
    ]);
    assert!(out.status.success());
    assert_ne!(ws.image("w.pgm"), smooth(100, 90, 0));
}

#[test]
fn encrypt_rejects_non_pgm() {
    let ws = Workspace::new();
    std::fs::write(ws.path("x.pgm"), "not an image").unwrap();
    let out = ieae(&[
        "encrypt",
        "--key",
        p(&ws.path("key.txt")),
        "--input",
        p(&ws.path("x.pgm")),
        "--output",
        p(&ws.path("c.pgm")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("PGM"));
}

#[test]
fn encrypt_rejects_bad_key_domain() {
    let ws = Workspace::new();
    std::fs::write(ws.path("bad.txt"), KEY.replace("mu=3.999", "mu=3.5")).unwrap();
    let plain = ws.put_image("plain.pgm", &smooth(8, 8, 0));
    let out = ieae(&[
        "encrypt",
        "--key",
        p(&ws.path("bad.txt")),
        "--input",
        p(&plain),
        "--output",
        p(&ws.path("c.pgm")),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("key domain"));
}

#[test]
fn key_file_errors_report_line() {
    let ws = Workspace::new();
    std::fs::write(ws.path("bad.txt"), KEY.replace("a=1\n", "a=one\n")).unwrap();
    let plain = ws.put_image("plain.pgm", &smooth(8, 8, 0));
    let out = ieae(&[
        "encrypt",
        "--key",
        p(&ws.path("bad.txt")),
        "--input",
        p(&plain),
        "--output",
        p(&ws.path("c.pgm")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 6"));
}

#[test]
fn decrypt_needs_metadata_and_whole_file() {
    let ws = Workspace::new();
    let key = ws.path("key.txt");
    let plain = ws.put_image("plain.pgm", &smooth(64, 64, 0));
    assert!(ieae(&[
        "encrypt",
        "--key",
        p(&key),
        "--input",
        p(&plain),
        "--output",
        p(&ws.path("c.pgm"))
    ])
    .status
    .success());

    std::fs::copy(ws.path("c.pgm"), ws.path("nometa.pgm")).unwrap();
    let out = ieae(&[
        "decrypt",
        "--key",
        p(&key),
        "--input",
        p(&ws.path("nometa.pgm")),
        "--output",
        p(&ws.path("d.pgm")),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("μ3"));

    let bytes = std::fs::read(ws.path("c.pgm")).unwrap();
    std::fs::write(ws.path("t.pgm"), &bytes[..bytes.len() - 10]).unwrap();
    std::fs::copy(ws.path("c.pgm.meta"), ws.path("t.pgm.meta")).unwrap();
    let out = ieae(&[
        "decrypt",
        "--key",
        p(&key),
        "--input",
        p(&ws.path("t.pgm")),
        "--output",
        p(&ws.path("d.pgm")),
    ]);
    assert!(!out.status.success());
}

#[test]
fn mask_attack_end_to_end() {
    let ws = Workspace::new();
    let key = ws.path("key.txt");
    let known = smooth(64, 64, 0);
    ws.put_image("known.pgm", &known);
    assert!(ieae(&[
        "encrypt",
        "--key",
        p(&key),
        "--input",
        p(&ws.path("known.pgm")),
        "--output",
        p(&ws.path("known.c.pgm"))
    ])
    .status
    .success());
    let meta =
        SidecarMetadata::parse(&std::fs::read_to_string(ws.path("known.c.pgm.meta")).unwrap())
            .unwrap();

    // second plaintext with the same first-block sum
    let mut target = smooth(64, 64, 7);
    let tag = ieae_core::cipher::mu3(&target, meta.p1, meta.p2);
    let delta = (i32::from(meta.mu3) - i32::from(tag)).rem_euclid(256) as u8;
    target.set(0, 0, target.get(0, 0).wrapping_add(delta));
    ws.put_image("target.pgm", &target);
    assert!(ieae(&[
        "encrypt",
        "--key",
        p(&key),
        "--input",
        p(&ws.path("target.pgm")),
        "--output",
        p(&ws.path("target.c.pgm"))
    ])
    .status
    .success());

    let out = ieae(&[
        "extract-mask",
        "--plain",
        p(&ws.path("known.pgm")),
        "--cipher",
        p(&ws.path("known.c.pgm")),
        "--p1",
        &meta.p1.to_string(),
        "--p2",
        &meta.p2.to_string(),
        "--rounds",
        "3",
        "--output",
        p(&ws.path("mask.pgm")),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let mask_meta =
        SidecarMetadata::parse(&std::fs::read_to_string(ws.path("mask.pgm.meta")).unwrap())
            .unwrap();
    assert_eq!(mask_meta.mu3, meta.mu3);

    let out = ieae(&[
        "mask-decrypt",
        "--input",
        p(&ws.path("target.c.pgm")),
        "--mask",
        p(&ws.path("mask.pgm")),
        "--output",
        p(&ws.path("broken.pgm")),
    ]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
    assert_eq!(ws.image("broken.pgm"), target);

    let out = ieae(&[
        "layouts",
        "--plain",
        p(&ws.path("known.pgm")),
        "--cipher",
        p(&ws.path("known.c.pgm")),
        "--rounds",
        "3",
        "--second",
        p(&ws.path("target.c.pgm")),
    ]);
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    let first = stdout.lines().nth(1).unwrap();
    assert!(
        first.starts_with(&format!("{},{},", meta.p1, meta.p2)),
        "{stdout}"
    );
}

#[test]
fn extract_mask_raw_blocks_hand_case() {
    let ws = Workspace::new();
    ws.put_image("i.pgm", &GrayImage::new(1, 2, vec![1, 2]).unwrap());
    ws.put_image("c.pgm", &GrayImage::new(1, 2, vec![45, 70]).unwrap());
    let args = |raw: bool| {
        let mut a = vec![
            "extract-mask".to_string(),
            "--plain".into(),
            p(&ws.path("i.pgm")).into(),
            "--cipher".into(),
            p(&ws.path("c.pgm")).into(),
            "--p1".into(),
            "1".into(),
            "--p2".into(),
            "1".into(),
            "--rounds".into(),
            "2".into(),
            "--output".into(),
            p(&ws.path("m.pgm")).into(),
        ];
        if raw {
            a.push("--raw-blocks".into());
        }
        a
    };
    let out = Command::new(env!("CARGO_BIN_EXE_ieae"))
        .args(args(false))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = Command::new(env!("CARGO_BIN_EXE_ieae"))
        .args(args(true))
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(ws.image("m.pgm").pixels(), &[44, 66]);

    let out = ieae(&[
        "mask-decrypt",
        "--input",
        p(&ws.path("c.pgm")),
        "--mask",
        p(&ws.path("m.pgm")),
        "--output",
        p(&ws.path("r.pgm")),
    ]);
    assert!(out.status.success());
    assert_eq!(ws.image("r.pgm").pixels(), &[1, 2]);
}

#[test]
fn mask_decrypt_dimension_mismatch() {
    let ws = Workspace::new();
    ws.put_image("m.pgm", &GrayImage::zeros(8, 8));
    std::fs::write(
        ws.path("m.pgm.meta"),
        "mu3=1\norig_m=8\norig_n=8\nr_rounds=1\np1=8\np2=8\n",
    )
    .unwrap();
    ws.put_image("c.pgm", &GrayImage::zeros(16, 8));
    let out = ieae(&[
        "mask-decrypt",
        "--input",
        p(&ws.path("c.pgm")),
        "--mask",
        p(&ws.path("m.pgm")),
        "--output",
        p(&ws.path("r.pgm")),
    ]);
    assert!(!out.status.success());
}

#[test]
fn attack_experiment_reports() {
    let ws = Workspace::new();
    let reference = ws.put_image("ref.pgm", &smooth(32, 32, 3));
    let out = ieae(&[
        "attack-experiment",
        "--key",
        p(&ws.path("key.txt")),
        "--reference",
        p(&reference),
        "--trials",
        "0",
    ]);
    assert_eq!(out.status.code(), Some(2));

    let out = ieae(&[
        "attack-experiment",
        "--key",
        p(&ws.path("key.txt")),
        "--reference",
        p(&reference),
        "--trials",
        "512",
        "--seed",
        "4",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8_lossy(&out.stdout).to_string();
    assert!(stdout.contains("inconsistent=0"));
    assert!(stdout.contains("expected_rate=0.003906"));
    let again = ieae(&[
        "attack-experiment",
        "--key",
        p(&ws.path("key.txt")),
        "--reference",
        p(&reference),
        "--trials",
        "512",
        "--seed",
        "4",
    ]);
    assert_eq!(String::from_utf8_lossy(&again.stdout), stdout);
}

#[test]
fn graph_exports() {
    let ws = Workspace::new();
    let out = ieae(&[
        "graph",
        "arnold",
        "--a",
        "7",
        "--b",
        "8",
        "--bits",
        "4",
        "--dot",
        p(&ws.path("a.dot")),
        "--census",
        p(&ws.path("a.csv")),
    ]);
    assert!(out.status.success());
    let census = std::fs::read_to_string(ws.path("a.csv")).unwrap();
    assert_eq!(
        census,
        "cycle_length,component_size,count\n16,16,8\n8,8,8\n4,4,8\n2,2,12\n1,1,8\n"
    );
    assert_eq!(
        std::fs::read_to_string(ws.path("a.dot"))
            .unwrap()
            .matches(" -> ")
            .count(),
        256
    );

    let out = ieae(&[
        "graph",
        "arnold",
        "--a",
        "12",
        "--b",
        "14",
        "--dot",
        p(&ws.path("b.dot")),
        "--census",
        p(&ws.path("b.csv")),
    ]);
    assert!(out.status.success());
    let census = std::fs::read_to_string(ws.path("b.csv")).unwrap();
    let total: usize = census
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<usize> = l.split(',').map(|x| x.parse().unwrap()).collect();
            assert_eq!(f[0], f[1]);
            f[1] * f[2]
        })
        .sum();
    assert_eq!(total, 256);

    let out = ieae(&[
        "graph",
        "logistic-fixed",
        "--quantizer",
        "floor",
        "--dot",
        p(&ws.path("l.dot")),
        "--census",
        p(&ws.path("l.csv")),
    ]);
    assert!(out.status.success());
    assert_eq!(
        std::fs::read_to_string(ws.path("l.dot"))
            .unwrap()
            .matches(" -> ")
            .count(),
        65
    );

    let out = ieae(&[
        "graph",
        "logistic-fixed",
        "--quantizer",
        "sideways",
        "--dot",
        p(&ws.path("l.dot")),
        "--census",
        p(&ws.path("l.csv")),
    ]);
    assert_eq!(out.status.code(), Some(2));

    let out = ieae(&[
        "graph",
        "logistic-float",
        "--dot",
        p(&ws.path("f.dot")),
        "--census",
        p(&ws.path("f.csv")),
    ]);
    assert!(out.status.success());
    assert_eq!(
        std::fs::read_to_string(ws.path("f.dot"))
            .unwrap()
            .matches(" -> ")
            .count(),
        113
    );
}

#[test]
fn pow10_table() {
    let out = ieae(&["pow10", "--from", "1", "--to", "50"]);
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    let rows: Vec<Vec<u64>> = stdout
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 50);
    assert_eq!(rows[0], vec![1, 4, 2]);
    assert_eq!(rows[13], vec![14, 47, 17]);
    assert!(rows.windows(2).all(|w| w[1][1] > w[0][1]));
    assert_eq!(
        ieae(&["pow10", "--from", "0", "--to", "3"]).status.code(),
        Some(2)
    );
}

#[test]
fn lyapunov_command() {
    let ws = Workspace::new();
    std::fs::write(ws.path("flat.csv"), "0.5\n".repeat(50)).unwrap();
    let out = ieae(&["lyapunov", "--series", p(&ws.path("flat.csv"))]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("degenerate"));

    let mut x = 0.3141_f64;
    let mut series = String::new();
    let mut scaled = String::new();
    for _ in 0..3000 {
        x = 4.0 * x * (1.0 - x);
        series.push_str(&format!("{x:?}\n"));
        scaled.push_str(&format!("{:?}\n", x * 4.0));
    }
    std::fs::write(ws.path("s.csv"), series).unwrap();
    std::fs::write(ws.path("s4.csv"), scaled).unwrap();
    let a = ieae(&[
        "lyapunov",
        "--series",
        p(&ws.path("s.csv")),
        "--epsilon",
        "0.1",
    ]);
    let b = ieae(&[
        "lyapunov",
        "--series",
        p(&ws.path("s4.csv")),
        "--epsilon",
        "0.4",
    ]);
    assert!(a.status.success() && b.status.success());
    let head = |o: &Output| {
        String::from_utf8_lossy(&o.stdout)
            .lines()
            .next()
            .unwrap()
            .to_string()
    };
    assert_eq!(head(&a), head(&b));
    let lambda: f64 = head(&a).trim_start_matches("lambda=").parse().unwrap();
    assert!(lambda > 0.0);
}

#[test]
fn key_file_with_ecg_series() {
    let ws = Workspace::new();
    let mut x = 0.2_f64;
    let series: String = (0..2000)
        .map(|_| {
            x = 3.99 * x * (1.0 - x);
            format!("{x:?}\n")
        })
        .collect();
    std::fs::write(ws.path("ecg.csv"), series).unwrap();
    std::fs::write(
        ws.path("ecg_key.txt"),
        KEY.replace("lambda=0.4321", "ecg_path=ecg.csv\nembed_m=2"),
    )
    .unwrap();
    let plain = ws.put_image("plain.pgm", &smooth(20, 20, 1));
    let key = ws.path("ecg_key.txt");
    assert!(ieae(&[
        "encrypt",
        "--key",
        p(&key),
        "--input",
        p(&plain),
        "--output",
        p(&ws.path("c.pgm"))
    ])
    .status
    .success());
    assert!(ieae(&[
        "decrypt",
        "--key",
        p(&key),
        "--input",
        p(&ws.path("c.pgm")),
        "--output",
        p(&ws.path("d.pgm"))
    ])
    .status
    .success());
    assert_eq!(ws.image("d.pgm"), smooth(20, 20, 1));
}
