use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use audioaug::{write_wav, AudioSignal};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_audioaug"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn tone(freq: f64) -> AudioSignal {
    let fs = 8000;
    let samples = (0..2400)
        .map(|i| 0.3 * (2.0 * std::f64::consts::PI * freq * i as f64 / fs as f64).sin())
        .collect();
    AudioSignal::new(samples, fs).unwrap()
}

/// `n` clips alternating between two classes, plus a manifest.
fn corpus(dir: &Path, n: usize) -> PathBuf {
    let mut csv = String::from("sample_id,path,label\n");
    for i in 0..n {
        write_wav(
            &tone(200.0 + 50.0 * i as f64),
            dir.join(format!("c{i}.wav")),
        )
        .unwrap();
        csv.push_str(&format!(
            "c{i},c{i}.wav,{}\n",
            if i % 2 == 0 { "a" } else { "b" }
        ));
    }
    let m = dir.join("manifest.csv");
    fs::write(&m, csv).unwrap();
    m
}

fn count_files(dir: &Path, ext: &str) -> usize {
    fs::read_dir(dir)
        .map(|rd| {
            rd.filter(|e| {
                e.as_ref()
                    .unwrap()
                    .path()
                    .extension()
                    .is_some_and(|x| x == ext)
            })
            .count()
        })
        .unwrap_or(0)
}

#[test]
fn help_lists_every_flag() {
    for (sub, flags) in [
        ("spectrogram", &["--in", "--out", "--config", "--jobs"][..]),
        (
            "augment",
            &[
                "--manifest",
                "--protocol",
                "--folds-file",
                "--test-fold",
                "--seed",
                "--out",
            ],
        ),
        ("split", &["--manifest", "--k", "--seed", "--out"]),
        ("fuse", &["--recipe", "--out"]),
        ("eval", &["--scores"]),
    ] {
        let o = run(&[sub, "--help"]);
        assert_eq!(code(&o), 0);
        let text = stdout(&o);
        for f in flags {
            assert!(text.contains(f), "{sub} help lacks {f}");
        }
    }
    assert_eq!(
        code(&run(&["eval", "--scores", "x.csv", "--frobnicate"])),
        2
    );
}

#[test]
fn spectrogram_single_file_empty_dir_and_corrupt_input() {
    let dir = tempfile::tempdir().unwrap();
    let wav = dir.path().join("one.wav");
    write_wav(&tone(440.0), &wav).unwrap();
    let out = dir.path().join("out1");
    let o = run(&["spectrogram", "--in", p(&wav), "--out", p(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(out.join("one.spg").is_file() && out.join("one.png").is_file());
    assert!(stdout(&o).contains("one.wav"));

    let empty = dir.path().join("empty");
    fs::create_dir(&empty).unwrap();
    let o = run(&[
        "spectrogram",
        "--in",
        p(&empty),
        "--out",
        p(&dir.path().join("out2")),
    ]);
    assert_eq!(code(&o), 0);
    assert!(stderr(&o).to_lowercase().contains("no wav files"));

    let mixed = dir.path().join("mixed");
    fs::create_dir(&mixed).unwrap();
    write_wav(&tone(300.0), mixed.join("a.wav")).unwrap();
    write_wav(&tone(600.0), mixed.join("c.wav")).unwrap();
    fs::write(mixed.join("b.wav"), b"RIFF not really a wave").unwrap();
    let out3 = dir.path().join("out3");
    let o = run(&[
        "spectrogram",
        "--in",
        p(&mixed),
        "--out",
        p(&out3),
        "--jobs",
        "2",
    ]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("b.wav"));
    assert_eq!(count_files(&out3, "spg"), 2);
    assert_eq!(count_files(&out3, "png"), 2);
}

#[test]
fn split_is_deterministic_and_rejects_k_one() {
    let dir = tempfile::tempdir().unwrap();
    let mut csv = String::from("sample_id,path,label\n");
    write_wav(&tone(300.0), dir.path().join("x.wav")).unwrap();
    for c in 0..10 {
        for i in 0..10 {
            csv.push_str(&format!("s{c}_{i},x.wav,class{c}\n"));
        }
    }
    let m = dir.path().join("m.csv");
    fs::write(&m, csv).unwrap();
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    for out in [&a, &b] {
        let o = run(&[
            "split",
            "--manifest",
            p(&m),
            "--k",
            "10",
            "--seed",
            "3",
            "--out",
            p(out),
        ]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let o = run(&[
        "split",
        "--manifest",
        p(&m),
        "--k",
        "1",
        "--out",
        p(&dir.path().join("c.json")),
    ]);
    assert_eq!(code(&o), 2);
}

fn folds_with_test(dir: &Path, n: usize, test: &[usize]) -> PathBuf {
    let folds: Vec<String> = (0..n)
        .map(|i| format!("\"c{i}\": {}", if test.contains(&i) { 0 } else { 1 }))
        .collect();
    let f = dir.join("folds.json");
    fs::write(
        &f,
        format!(
            "{{\"k\": 2, \"seed\": 0, \"folds\": {{{}}}}}",
            folds.join(", ")
        ),
    )
    .unwrap();
    f
}

#[test]
fn augment_signal_counts_passthrough_and_repeatability() {
    let dir = tempfile::tempdir().unwrap();
    let m = corpus(dir.path(), 7);
    let folds = folds_with_test(dir.path(), 7, &[0, 1]);
    let augment = |protocol: &str, out: &Path| {
        run(&[
            "augment",
            "--manifest",
            p(&m),
            "--protocol",
            protocol,
            "--folds-file",
            p(&folds),
            "--test-fold",
            "0",
            "--seed",
            "7",
            "--out",
            p(out),
        ])
    };
    let out = dir.path().join("sig");
    let o = augment("signal", &out);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let index = fs::read_to_string(out.join("fold_0/index.csv")).unwrap();
    assert_eq!(index.lines().count(), 1 + 60);
    assert_eq!(count_files(&out.join("fold_0/train"), "wav"), 60);
    assert_eq!(count_files(&out.join("fold_0/test"), "wav"), 2);

    let again = dir.path().join("sig2");
    assert_eq!(code(&augment("signal", &again)), 0);
    for f in fs::read_dir(out.join("fold_0/train")).unwrap() {
        let f = f.unwrap().path();
        let twin = again.join("fold_0/train").join(f.file_name().unwrap());
        assert_eq!(fs::read(&f).unwrap(), fs::read(twin).unwrap());
    }

    let none = dir.path().join("none");
    assert_eq!(code(&augment("none", &none)), 0);
    let index = fs::read_to_string(none.join("fold_0/index.csv")).unwrap();
    assert_eq!(index.lines().count(), 1 + 5);
    assert!(index.lines().skip(1).all(|l| l.contains(",identity,")));

    assert_eq!(code(&augment("bogus", &none)), 2);
    let o = run(&[
        "augment",
        "--manifest",
        p(&m),
        "--protocol",
        "signal",
        "--folds-file",
        p(&folds),
        "--test-fold",
        "5",
        "--out",
        p(&none),
    ]);
    assert_eq!(code(&o), 2);
}

#[test]
fn config_values_apply_and_unknown_keys_fail() {
    let dir = tempfile::tempdir().unwrap();
    let wav = dir.path().join("one.wav");
    write_wav(&tone(440.0), &wav).unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        format!(
            "output_dir = \"{}\"\n[dgt]\nhop = 64\nchannels = 256\n",
            p(&dir.path().join("o"))
        ),
    )
    .unwrap();
    let o = run(&["spectrogram", "--in", p(&wav), "--config", p(&cfg)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let spec = audioaug::load_spec(dir.path().join("o/one.spg")).unwrap();
    assert_eq!(spec.rows(), 129);

    fs::write(&cfg, "[dgt]\nhops = 64\n").unwrap();
    let o = run(&[
        "spectrogram",
        "--in",
        p(&wav),
        "--out",
        p(dir.path()),
        "--config",
        p(&cfg),
    ]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("hops"));
}

#[test]
fn fuse_and_eval() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("a.csv"),
        "sample_id,fold,true_label,x,y\ns1,0,x,0.6,0.4\ns2,1,y,NaN,0.5\ns3,1,y,0.3,0.3\n",
    )
    .unwrap();
    fs::write(
        dir.path().join("b.csv"),
        "sample_id,fold,true_label,x,y\ns3,1,y,0.25,0.5\ns1,0,x,0.1,0.2\ns2,1,y,0.75,0.5\n",
    )
    .unwrap();
    let recipe = dir.path().join("r.json");
    fs::write(
        &recipe,
        r#"{"variant": "a+b", "classifiers": ["a.csv", "b.csv"]}"#,
    )
    .unwrap();
    let fused = dir.path().join("fused.csv");
    let o = run(&["fuse", "--recipe", p(&recipe), "--out", p(&fused)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let m = audioaug::fusion::read_scores_csv(&fused).unwrap();
    let cell = |id: &str| {
        m.rows
            .iter()
            .find(|r| r.sample_id == id)
            .unwrap()
            .scores
            .clone()
    };
    // By hand: NaN -> 0 and the constant row of `a` -> zeros.
    assert_eq!(cell("s1"), vec![0.7, 0.6000000000000001]);
    assert_eq!(cell("s2"), vec![0.75, 1.0]);
    assert_eq!(cell("s3"), vec![0.25, 0.5]);

    let o = run(&["eval", "--scores", p(&fused)]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert!(text.contains("mean over folds: 1.0000"), "{text}");
    assert!(text.contains("pooled: 1.0000"));

    fs::write(
        dir.path().join("bad.csv"),
        "sample_id,fold,label,x\ns,0,x,1\n",
    )
    .unwrap();
    let o = run(&["eval", "--scores", p(&dir.path().join("bad.csv"))]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("true_label"));

    fs::write(
        &recipe,
        r#"{"variant": "v", "classifiers": ["a.csv", "gone.csv"]}"#,
    )
    .unwrap();
    let o = run(&["fuse", "--recipe", p(&recipe), "--out", p(&fused)]);
    assert_ne!(code(&o), 0);
    assert!(stderr(&o).contains("gone.csv"));
}
