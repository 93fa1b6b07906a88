use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};
use std::time::{Duration, Instant};

use serde_json::Value;

#[path = "../../core/tests/support/mock_scorer.rs"]
mod mock_scorer;

use mock_scorer::{dead_endpoint, MockScorer};

const SPHERE: &str = "0,1,1,2,2,2,0,1,1,2,2,2,0,0,0";
const SMALL: &[&str] = &["--set", "width=64", "--set", "height=64", "--set", "resolution=24"];

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_supershape"));
    cmd.env_remove("SUPERSHAPE_SCORER_ENDPOINT");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn ok(out: &Output) {
    assert!(out.status.success(), "exit {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr));
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn checkpoint_lines(dir: &Path) -> Vec<Value> {
    fs::read_to_string(dir.join("checkpoints.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

fn decode(path: &Path) -> image::RgbImage {
    image::open(path).unwrap().to_rgb8()
}

fn evolve_small(out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["evolve", "-q", "--out", p(out), "--population", "8", "--generations", "4"];
    args.extend_from_slice(SMALL);
    args.extend_from_slice(extra);
    run(&args)
}

#[test]
fn evolve_is_byte_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.cfg");
    fs::write(&cfg, "# desk run\npopulation = 12\ngenerations = 5\nresolution = 32\n").unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        ok(&run(&["evolve", "-q", "--config", p(&cfg), "--seed", "7", "--out", p(dir)]));
    }
    let names: Vec<_> = {
        let mut v: Vec<_> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
        v.sort();
        v
    };
    for expected in ["checkpoints.jsonl", "final_best.obj", "final_best.png", "gen_0_best.png", "gen_4_best.png"] {
        assert!(names.iter().any(|n| n == expected), "missing {expected}");
    }
    for name in &names {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name:?} differs");
    }

    let c = tmp.path().join("c");
    ok(&run(&["evolve", "-q", "--config", p(&cfg), "--seed", "8", "--out", p(&c)]));
    assert_ne!(fs::read(a.join("checkpoints.jsonl")).unwrap(), fs::read(c.join("checkpoints.jsonl")).unwrap());
}

#[test]
fn checkpoint_lines_match_generation_count() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    ok(&evolve_small(&out, &["--generations", "30", "--set", "export_every=10"]));
    let lines = checkpoint_lines(&out);
    assert_eq!(lines.len(), 30);
    for (i, line) in lines.iter().enumerate() {
        assert_eq!(line["generation"], i);
        assert_eq!(line["population"].as_array().unwrap().len(), 8);
        assert_eq!(line["population"][0]["genes"].as_array().unwrap().len(), 15);
        assert_eq!(line["config"]["seed"], "0");
        assert!(line["config"].get("out").is_none());
    }
    for k in [0, 10, 20] {
        assert!(out.join(format!("gen_{k}_best.png")).exists());
    }
    assert!(!out.join("gen_5_best.png").exists());
    assert_eq!(decode(&out.join("final_best.png")).dimensions(), (64, 64));
}

#[test]
fn precedence_flags_over_file_over_defaults() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.cfg");
    fs::write(&cfg, "population = 6\nseed = 3\n").unwrap();
    let cases: [(&[&str], usize, &str); 4] = [
        (&[], 40, "0"),
        (&["--config", p(&cfg)], 6, "3"),
        (&["--population", "4"], 4, "0"),
        (&["--config", p(&cfg), "--population", "4", "--set", "seed=9"], 4, "9"),
    ];
    for (i, (extra, population, seed)) in cases.into_iter().enumerate() {
        let out = tmp.path().join(format!("r{i}"));
        let mut args = vec!["evolve", "-q", "--out", p(&out), "--generations", "1", "--set", "resolution=8"];
        args.extend_from_slice(&["--set", "width=16", "--set", "height=16"]);
        args.extend_from_slice(extra);
        ok(&run(&args));
        let line = &checkpoint_lines(&out)[0];
        assert_eq!(line["population"].as_array().unwrap().len(), population, "case {i}");
        assert_eq!(line["config"]["seed"], seed, "case {i}");
    }
}

#[test]
fn config_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("x");
    let cfg = tmp.path().join("bad.cfg");
    fs::write(&cfg, "colour = blue\n").unwrap();
    for args in [
        vec!["evolve", "--out", p(&out), "--config", p(&cfg)],
        vec!["evolve", "--out", p(&out), "--objective", "vibes"],
        vec!["evolve", "--out", p(&out), "--set", "mutation_rate=2"],
        vec![
            "evolve",
            "--out",
            p(&out),
            "--objective",
            "remote",
            "--mode",
            "imagenet_class",
            "--target",
            "cat",
            "--endpoint",
            "http://127.0.0.1:1",
        ],
        vec!["views", SPHERE, "-o", p(&out), "--grid", "0x2"],
        vec!["evolve", "--bogus-flag"],
    ] {
        let o = run(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let o = run(&["evolve", "--config", p(&tmp.path().join("missing.cfg"))]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn render_arity_and_bounds_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let png = tmp.path().join("x.png");
    let o = run(&["render", "0,1,1,2,2,2,0,1,1,2,2,2,0,0", "-o", p(&png)]);
    assert_eq!(o.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&o.stderr);
    assert!(msg.contains("15") && msg.contains("got 14"), "{msg}");

    let o = run(&["render", "0,1,1,2,2,2,0,1,1,2,2,2,0,0,4", "-o", p(&png)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("rotation"));
    let o = run(&["render", "0,0,1,2,2,2,0,1,1,2,2,2,0,0,0", "-o", p(&png)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!png.exists());
}

#[test]
fn io_errors_exit_4() {
    let tmp = tempfile::tempdir().unwrap();
    let file = tmp.path().join("plain");
    fs::write(&file, "").unwrap();
    let o = run(&["evolve", "--out", p(&file.join("sub"))]);
    assert_eq!(o.status.code(), Some(4), "{}", String::from_utf8_lossy(&o.stderr));
    let o = run(&["render", SPHERE, "-o", p(&file.join("x.png"))]);
    assert_eq!(o.status.code(), Some(4));
    let o = run(&[
        "render",
        "gen0:best",
        "-o",
        p(&tmp.path().join("y.png")),
        "--checkpoint",
        p(&tmp.path().join("none.jsonl")),
    ]);
    assert_eq!(o.status.code(), Some(4));
    let o = run(&["evolve", "--resume", "--out", p(&tmp.path().join("fresh"))]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn dead_scorer_exits_3_before_first_generation() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let dead = dead_endpoint();
    let args = ["evolve", "--out", p(&out), "--objective", "remote", "--target", "a red vase", "--endpoint", &dead];
    let o = run(&args);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!out.join("checkpoints.jsonl").exists());

    let sick = MockScorer::start(|_, _, _| (503, "{}".into()));
    let o =
        run(&["evolve", "--out", p(&out), "--objective", "remote", "--target", "x", "--endpoint", &sick.endpoint()]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(sick.hits(), 1);
}

#[test]
fn remote_objective_uses_service_scores() {
    let server = MockScorer::scoring(|req| req["image_png_b64"].as_str().unwrap().len() as f64 * 1e-6);
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let o = bin()
        .args(["evolve", "-q", "--out", p(&out), "--population", "4", "--generations", "2"])
        .args(SMALL)
        .args(["--objective", "remote", "--mode", "imagenet_class", "--target", "409"])
        .env("SUPERSHAPE_SCORER_ENDPOINT", server.endpoint())
        .output()
        .unwrap();
    ok(&o);
    let lines = checkpoint_lines(&out);
    assert_eq!(lines.len(), 2);
    for g in lines[0]["population"].as_array().unwrap() {
        let raw = g["raw"].as_f64().unwrap();
        assert!(raw > 0.0 && raw < 1.0, "{raw}");
    }
    // healthz + 8 scores
    assert_eq!(server.hits(), 9);
    assert_eq!(lines[0]["config"]["endpoint"], server.endpoint());

    // An explicit flag beats the environment.
    let o = bin()
        .args([
            "evolve",
            "-q",
            "--out",
            p(&out),
            "--objective",
            "remote",
            "--target",
            "x",
            "--endpoint",
            &dead_endpoint(),
        ])
        .env("SUPERSHAPE_SCORER_ENDPOINT", server.endpoint())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn render_from_checkpoint_matches_generation_png() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    ok(&evolve_small(&out, &[]));
    let png = tmp.path().join("best3.png");
    let obj = tmp.path().join("best3.obj");
    ok(&run(&["render", "gen3:best", "--out", p(&out), "-o", p(&png), "--obj", p(&obj)]
        .iter()
        .copied()
        .chain(SMALL.iter().copied())
        .collect::<Vec<_>>()));
    assert_eq!(fs::read(&png).unwrap(), fs::read(out.join("gen_3_best.png")).unwrap());
    assert!(fs::read_to_string(&obj).unwrap().lines().any(|l| l.starts_with("f ")));

    let o = run(&["render", "gen9:best", "--out", p(&out), "-o", p(&png)]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["render", "gen1:99", "--out", p(&out), "-o", p(&png)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn sphere_render_is_a_disc() {
    let tmp = tempfile::tempdir().unwrap();
    let png = tmp.path().join("s.png");
    ok(&run(&["render", SPHERE, "-o", p(&png)]));
    let img = decode(&png);
    assert_eq!(img.dimensions(), (224, 224));
    let covered = img.pixels().filter(|px| px.0 != [128, 128, 128]).count() as f64;
    let r = 0.5 * 0.9 * 224.0;
    let disc = std::f64::consts::PI * r * r;
    assert!((covered - disc).abs() / disc < 0.02, "{covered} vs {disc}");
}

#[test]
fn views_tiles_and_matches_render() {
    let tmp = tempfile::tempdir().unwrap();
    let shape = "5,1,1,0.6,1.5,1.5,3,1,1,1.2,0.8,2.5,1,2,0.5";
    let sheet = tmp.path().join("sheet.png");
    ok(&run(&["views", shape, "--grid", "2x4", "-o", p(&sheet)]));
    assert_eq!(decode(&sheet).dimensions(), (896, 448));

    let one = tmp.path().join("one.png");
    ok(&run(&["views", shape, "--grid", "1x1", "-o", p(&one)]));
    let single = tmp.path().join("single.png");
    ok(&run(&["render", "5,1,1,0.6,1.5,1.5,3,1,1,1.2,0.8,2.5,0,0,0", "-o", p(&single)]));
    assert_eq!(decode(&one), decode(&single));

    // Tile (row 1, col 2) of a 2x4 sheet: elevation π/3, azimuth π.
    let third = std::f64::consts::FRAC_PI_3;
    let pi = std::f64::consts::PI;
    let tile = tmp.path().join("tile.png");
    let genome = format!("5,1,1,0.6,1.5,1.5,3,1,1,1.2,0.8,2.5,{third},{pi},0");
    ok(&run(&["render", &genome, "-o", p(&tile)]));
    let full = decode(&sheet);
    let want = decode(&tile);
    let cropped = image::imageops::crop_imm(&full, 448, 224, 224, 224).to_image();
    assert_eq!(cropped, want);
}

#[test]
fn sphere_views_agree_up_to_facet_noise() {
    let tmp = tempfile::tempdir().unwrap();
    let sheet = tmp.path().join("sheet.png");
    ok(&run(&["views", SPHERE, "--grid", "2x3", "-o", p(&sheet)]));
    let img = decode(&sheet);
    let tile = |r: u32, c: u32| image::imageops::crop_imm(&img, c * 224, r * 224, 224, 224).to_image();
    let first = tile(0, 0);
    let count = |t: &image::RgbImage| t.pixels().filter(|px| px.0 != [128, 128, 128]).count() as f64;
    for (r, c) in [(0, 1), (0, 2), (1, 0), (1, 1), (1, 2)] {
        let t = tile(r, c);
        let (a, b) = (count(&first), count(&t));
        assert!((a - b).abs() / a < 0.005, "tile ({r},{c}) silhouette {b} vs {a}");
        let xor = first.pixels().zip(t.pixels()).filter(|(p, q)| (p.0 == [128; 3]) != (q.0 == [128; 3])).count();
        assert!((xor as f64) < 0.01 * a, "tile ({r},{c}) boundary differs in {xor} pixels");
    }
}

#[test]
fn resume_continues_like_an_uninterrupted_run() {
    let tmp = tempfile::tempdir().unwrap();
    let (full, split) = (tmp.path().join("full"), tmp.path().join("split"));
    ok(&evolve_small(&full, &["--generations", "6"]));
    ok(&evolve_small(&split, &["--generations", "3"]));
    ok(&evolve_small(&split, &["--generations", "6", "--resume"]));
    let strip = |mut v: Value| {
        v.as_object_mut().unwrap().remove("config");
        v
    };
    let a: Vec<Value> = checkpoint_lines(&full).into_iter().map(strip).collect();
    let b: Vec<Value> = checkpoint_lines(&split).into_iter().map(strip).collect();
    assert_eq!(a, b);
    assert_eq!(fs::read(full.join("final_best.png")).unwrap(), fs::read(split.join("final_best.png")).unwrap());

    let o = evolve_small(&split, &["--generations", "8", "--resume", "--seed", "5"]);
    assert_eq!(o.status.code(), Some(2), "config change must be refused");
}

#[test]
fn novelty_resume_replays_archive() {
    let tmp = tempfile::tempdir().unwrap();
    let (full, split) = (tmp.path().join("full"), tmp.path().join("split"));
    let nov = ["--objective", "novelty", "--set", "novelty_k=3"];
    ok(&evolve_small(&full, &[&nov[..], &["--generations", "5"]].concat()));
    ok(&evolve_small(&split, &[&nov[..], &["--generations", "2"]].concat()));
    ok(&evolve_small(&split, &[&nov[..], &["--generations", "5", "--resume"]].concat()));
    let genes = |dir: &Path| -> Vec<Value> {
        checkpoint_lines(dir)
            .into_iter()
            .map(|l| Value::Array(vec![l["population"].clone(), l["archive_added"].clone()]))
            .collect()
    };
    assert_eq!(genes(&full), genes(&split));
    let added: usize = checkpoint_lines(&full).iter().map(|l| l["archive_added"].as_array().unwrap().len()).sum();
    assert!(added >= 1);
}

#[cfg(unix)]
#[test]
fn interrupt_flushes_checkpoint_and_exits_130() {
    let tmp = tempfile::tempdir().unwrap();
    let out: PathBuf = tmp.path().join("run");
    let mut child = bin()
        .args(["evolve", "-q", "--out", p(&out), "--population", "8", "--generations", "100000"])
        .args(SMALL)
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let ckpt = out.join("checkpoints.jsonl");
    let start = Instant::now();
    while fs::read_to_string(&ckpt).map(|s| s.lines().count()).unwrap_or(0) < 2 {
        assert!(start.elapsed() < Duration::from_secs(60), "no checkpoint lines appeared");
        std::thread::sleep(Duration::from_millis(20));
    }
    let status = Command::new("kill").args(["-INT", &child.id().to_string()]).status().unwrap();
    assert!(status.success());
    let code = child.wait().unwrap().code();
    assert_eq!(code, Some(130));

    let lines = checkpoint_lines(&out);
    assert!(lines.len() >= 2 && lines.len() < 100000);
    for (i, l) in lines.iter().enumerate() {
        assert_eq!(l["generation"], i);
    }
    // The interrupted stream is resumable.
    let n = lines.len() + 2;
    ok(&evolve_small(&out, &["--generations", &n.to_string(), "--resume"]));
    assert_eq!(checkpoint_lines(&out).len(), n);
}
