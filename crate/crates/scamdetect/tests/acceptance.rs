//! Acceptance gate: twelve end-to-end criteria, one printed verdict line
//! each. Run with `cargo test --test acceptance -- --nocapture` to see the
//! lines on success too.

mod common;

use std::path::PathBuf;
use std::process::Command;
use std::sync::LazyLock;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use scamdetect::cfg::{build_cfg, EdgeKind, EdgeTarget, Terminator};
use scamdetect::data::{
    dedup, is_minimal_proxy, load_jsonl, save_jsonl, synth_generate, DatasetRecord, Label, Source,
    Split,
};
use scamdetect::disasm::{disassemble, Bytecode};
use scamdetect::features::{featurize, opcode_histogram};
use scamdetect::model::{
    forward, grad_check, Hyper, ModelKind, ModelParams, GRAD_CHECK_HEX, GRAD_CHECK_SEEDS,
};
use scamdetect::obfuscate::{check_equivalence, obfuscate, ObfConfig, Pass, Verdict};

fn verdict(n: u8, ok: bool, detail: &str) {
    println!("criterion {n:02} {} — {detail}", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "criterion {n:02}: {detail}");
}

// --- 1. Disassembler round-trip -------------------------------------------

#[test]
fn c01_disassembler_round_trip() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xC1);
    let total = 10_000;
    let mut ok = 0usize;
    for _ in 0..total {
        let len = rng.gen_range(0..=4096);
        let mut bytes = vec![0u8; len];
        if rng.gen_bool(0.3) {
            // Push-heavy content exercises immediates and tail truncation.
            let mut i = 0;
            while i < len {
                let op = 0x5f + rng.gen_range(0..=32u8);
                bytes[i] = op;
                i += 1;
                for _ in 0..op - 0x5f {
                    if i >= len {
                        break;
                    }
                    bytes[i] = rng.gen();
                    i += 1;
                }
            }
        } else {
            rng.fill(&mut bytes[..]);
        }
        if disassemble(&Bytecode::new(bytes.clone())).encode() == bytes {
            ok += 1;
        }
    }
    let elapsed = start.elapsed();
    verdict(
        1,
        ok == total && elapsed < Duration::from_secs(10),
        &format!("disassembler round-trip: {ok}/{total} fuzzed inputs ≤ 4 KiB re-encode exactly ({elapsed:.2?})"),
    );
}

// --- 2. Hand-traced CFG oracle corpus --------------------------------------

/// Expected edge target: a block id or the shared unknown sink.
#[derive(Clone, Copy)]
enum To {
    B(usize),
    Unknown,
}

struct CfgFixture {
    name: &'static str,
    hex: &'static str,
    /// (start_offset, mnemonics, terminator) per block, in id order.
    blocks: Vec<(usize, Vec<&'static str>, Terminator)>,
    /// (from block id, target, kind) in the builder's emission order.
    edges: Vec<(usize, To, EdgeKind)>,
    has_unknown: bool,
}

#[rustfmt::skip]
fn cfg_fixtures() -> Vec<CfgFixture> {
    use EdgeKind::*;
    use Terminator::*;
    vec![
        CfgFixture {
            name: "direct jump over dead stop",
            hex: "600456005b00", // PUSH1 4; JUMP; STOP; JUMPDEST; STOP
            blocks: vec![
                (0, vec!["PUSH1", "JUMP"], Terminator::Jump),
                (3, vec!["STOP"], Stop),
                (4, vec!["JUMPDEST", "STOP"], Stop),
            ],
            edges: vec![(0, To::B(2), EdgeKind::Jump)],
            has_unknown: false,
        },
        CfgFixture {
            name: "branch taken and not taken",
            hex: "6001600657005b00", // PUSH1 1; PUSH1 6; JUMPI; STOP; JUMPDEST; STOP
            blocks: vec![
                (0, vec!["PUSH1", "PUSH1", "JUMPI"], Branch),
                (5, vec!["STOP"], Stop),
                (6, vec!["JUMPDEST", "STOP"], Stop),
            ],
            edges: vec![(0, To::B(2), BranchTaken), (0, To::B(1), BranchNotTaken)],
            has_unknown: false,
        },
        CfgFixture {
            name: "calldata-dependent jump is unresolved",
            hex: "60003556", // PUSH1 0; CALLDATALOAD; JUMP
            blocks: vec![(0, vec!["PUSH1", "CALLDATALOAD", "JUMP"], Terminator::Jump)],
            edges: vec![(0, To::Unknown, Unresolved)],
            has_unknown: true,
        },
        CfgFixture {
            name: "truncated push tail after resolved jump",
            hex: "6003565b0061ff", // PUSH1 3; JUMP; JUMPDEST; STOP; PUSH2 <cut>
            blocks: vec![
                (0, vec!["PUSH1", "JUMP"], Terminator::Jump),
                (3, vec!["JUMPDEST", "STOP"], Stop),
                (5, vec!["PUSH2"], FallOff),
            ],
            edges: vec![(0, To::B(1), EdgeKind::Jump)],
            has_unknown: false,
        },
        CfgFixture {
            name: "jump over an unreachable landing",
            hex: "6005565b005b00", // PUSH1 5; JUMP; JUMPDEST; STOP; JUMPDEST; STOP
            blocks: vec![
                (0, vec!["PUSH1", "JUMP"], Terminator::Jump),
                (3, vec!["JUMPDEST", "STOP"], Stop),
                (5, vec!["JUMPDEST", "STOP"], Stop),
            ],
            edges: vec![(0, To::B(2), EdgeKind::Jump)],
            has_unknown: false,
        },
        CfgFixture {
            name: "concrete target without a JUMPDEST",
            hex: "600356005b00", // PUSH1 3; JUMP; STOP; JUMPDEST; STOP — 3 is the STOP
            blocks: vec![
                (0, vec!["PUSH1", "JUMP"], Terminator::Jump),
                (3, vec!["STOP"], Stop),
                (4, vec!["JUMPDEST", "STOP"], Stop),
            ],
            edges: vec![(0, To::Unknown, Unresolved)],
            has_unknown: true,
        },
        CfgFixture {
            name: "target inside a push immediate",
            hex: "600156", // PUSH1 1; JUMP — offset 1 is immediate data
            blocks: vec![(0, vec!["PUSH1", "JUMP"], Terminator::Jump)],
            edges: vec![(0, To::Unknown, Unresolved)],
            has_unknown: true,
        },
        CfgFixture {
            name: "dup-fed jump resolves",
            hex: "60058050565b00", // PUSH1 5; DUP1; POP; JUMP; JUMPDEST; STOP
            blocks: vec![
                (0, vec!["PUSH1", "DUP1", "POP", "JUMP"], Terminator::Jump),
                (5, vec!["JUMPDEST", "STOP"], Stop),
            ],
            edges: vec![(0, To::B(1), EdgeKind::Jump)],
            has_unknown: false,
        },
        CfgFixture {
            name: "swap-fed jump resolves",
            hex: "600160079050565b00", // PUSH1 1; PUSH1 7; SWAP1; POP; JUMP; JUMPDEST; STOP
            blocks: vec![
                (0, vec!["PUSH1", "PUSH1", "SWAP1", "POP", "JUMP"], Terminator::Jump),
                (7, vec!["JUMPDEST", "STOP"], Stop),
            ],
            edges: vec![(0, To::B(1), EdgeKind::Jump)],
            has_unknown: false,
        },
        CfgFixture {
            name: "trailing branch with no fallthrough",
            hex: "6001600057", // PUSH1 1; PUSH1 0; JUMPI — 0 is not a JUMPDEST
            blocks: vec![(0, vec!["PUSH1", "PUSH1", "JUMPI"], Branch)],
            edges: vec![(0, To::Unknown, Unresolved)],
            has_unknown: true,
        },
        CfgFixture {
            name: "self-loop",
            hex: "5b600056", // JUMPDEST; PUSH1 0; JUMP
            blocks: vec![(0, vec!["JUMPDEST", "PUSH1", "JUMP"], Terminator::Jump)],
            edges: vec![(0, To::B(0), EdgeKind::Jump)],
            has_unknown: false,
        },
        CfgFixture {
            name: "fallthrough chain across JUMPDEST leaders",
            hex: "6001015b6002015b00", // PUSH1 1; ADD; JUMPDEST; PUSH1 2; ADD; JUMPDEST; STOP
            blocks: vec![
                (0, vec!["PUSH1", "ADD"], FallOff),
                (3, vec!["JUMPDEST", "PUSH1", "ADD"], FallOff),
                (7, vec!["JUMPDEST", "STOP"], Stop),
            ],
            edges: vec![(0, To::B(1), Fallthrough), (1, To::B(2), Fallthrough)],
            has_unknown: false,
        },
        CfgFixture {
            name: "branch whose taken target is its fallthrough",
            hex: "60016005575b00", // PUSH1 1; PUSH1 5; JUMPI; JUMPDEST; STOP
            blocks: vec![
                (0, vec!["PUSH1", "PUSH1", "JUMPI"], Branch),
                (5, vec!["JUMPDEST", "STOP"], Stop),
            ],
            edges: vec![(0, To::B(1), BranchTaken), (0, To::B(1), BranchNotTaken)],
            has_unknown: false,
        },
        CfgFixture {
            name: "calldata dispatcher with revert arm",
            hex: "600035600a57600080fd5b00",
            // PUSH1 0; CALLDATALOAD; PUSH1 10; JUMPI; PUSH1 0; DUP1; REVERT; JUMPDEST; STOP
            blocks: vec![
                (0, vec!["PUSH1", "CALLDATALOAD", "PUSH1", "JUMPI"], Branch),
                (6, vec!["PUSH1", "DUP1", "REVERT"], Revert),
                (10, vec!["JUMPDEST", "STOP"], Stop),
            ],
            edges: vec![(0, To::B(2), BranchTaken), (0, To::B(1), BranchNotTaken)],
            has_unknown: false,
        },
    ]
}

#[test]
fn c02_cfg_oracle_corpus() {
    let fixtures = cfg_fixtures();
    let mut failures = Vec::new();
    for fx in &fixtures {
        let cfg = build_cfg(&disassemble(&Bytecode::parse_hex(fx.hex).unwrap())).unwrap();

        let got_blocks: Vec<(usize, Vec<&'static str>, Terminator)> = cfg
            .blocks
            .iter()
            .map(|b| {
                (
                    b.start_offset,
                    b.instructions.iter().map(|i| i.spec.mnemonic).collect(),
                    b.terminator,
                )
            })
            .collect();
        let want_edges: Vec<(usize, EdgeTarget, EdgeKind)> = fx
            .edges
            .iter()
            .map(|&(from, to, kind)| {
                let to = match to {
                    To::B(id) => EdgeTarget::Block(id),
                    To::Unknown => EdgeTarget::Unknown,
                };
                (from, to, kind)
            })
            .collect();
        let got_edges: Vec<(usize, EdgeTarget, EdgeKind)> =
            cfg.edges.iter().map(|e| (e.from, e.to, e.kind)).collect();

        if got_blocks != fx.blocks
            || got_edges != want_edges
            || cfg.has_unknown_node != fx.has_unknown
        {
            failures.push(fx.name);
        }
    }
    // The truncated fixture must also carry the truncation marker itself.
    let truncated = build_cfg(&disassemble(&Bytecode::parse_hex("6003565b0061ff").unwrap()))
        .unwrap()
        .blocks[2]
        .instructions[0]
        .truncated;

    verdict(
        2,
        failures.is_empty() && truncated && fixtures.len() >= 10,
        &format!(
            "CFG oracle corpus: {}/{} hand-traced contracts match blocks and edges exactly{}",
            fixtures.len() - failures.len(),
            fixtures.len(),
            if failures.is_empty() { String::new() } else { format!(" (failed: {failures:?})") }
        ),
    );
}

// --- 3. Compiler-idiom jump resolution -------------------------------------

/// Stack-neutral straight-line filler.
fn idiom_filler(rng: &mut ChaCha8Rng) -> Vec<u8> {
    let mut out = Vec::new();
    for _ in 0..rng.gen_range(0..3) {
        match rng.gen_range(0..3) {
            0 => out.extend([0x60, rng.gen::<u8>(), 0x50]), // PUSH1 x; POP
            1 => out.extend([0x60, rng.gen::<u8>(), 0x60, rng.gen::<u8>(), 0x01, 0x50]),
            _ => out.extend([0x60, rng.gen::<u8>(), 0x60, 0x40, 0x52]), // MSTORE to 0x40
        }
    }
    out
}

/// A program of k `filler; PUSHn <dest>; JUMP` segments followed by their k
/// JUMPDEST landing pads in shuffled order. Returns the code and each
/// segment's expected landing offset.
fn idiom_case(rng: &mut ChaCha8Rng) -> (Vec<u8>, Vec<usize>) {
    let k = rng.gen_range(1..=6);
    let seg_fillers: Vec<Vec<u8>> = (0..k).map(|_| idiom_filler(rng)).collect();
    let pad_fillers: Vec<Vec<u8>> = (0..k).map(|_| idiom_filler(rng)).collect();
    let mut order: Vec<usize> = (0..k).collect();
    order.shuffle(rng);

    for width in 1..=3usize {
        let mut offset = 0;
        for filler in &seg_fillers {
            offset += filler.len() + 1 + width + 1;
        }
        let mut landing = vec![0usize; k];
        for &j in &order {
            landing[j] = offset;
            offset += 1 + pad_fillers[j].len() + 1;
        }
        if landing.iter().max().unwrap() >= &(1usize << (8 * width)) {
            continue; // widen the PUSH and lay out again
        }
        let mut code = Vec::with_capacity(offset);
        for (i, filler) in seg_fillers.iter().enumerate() {
            code.extend_from_slice(filler);
            code.push(0x5f + width as u8);
            for b in (0..width).rev() {
                code.push((landing[i] >> (8 * b)) as u8);
            }
            code.push(0x56);
        }
        for &j in &order {
            code.push(0x5b);
            code.extend_from_slice(&pad_fillers[j]);
            code.push(0x00);
        }
        return (code, landing);
    }
    unreachable!("a 3-byte push always covers these code sizes");
}

#[test]
fn c03_compiler_idiom_resolution() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC3);
    let mut sites = 0usize;
    let mut resolved = 0usize;
    let mut unresolved_edges = 0usize;
    for _ in 0..180 {
        let (code, targets) = idiom_case(&mut rng);
        let cfg = build_cfg(&disassemble(&Bytecode::new(code))).unwrap();
        unresolved_edges += cfg
            .edges
            .iter()
            .filter(|e| e.kind == EdgeKind::Unresolved)
            .count();
        let jump_blocks: Vec<_> = cfg
            .blocks
            .iter()
            .filter(|b| b.terminator == Terminator::Jump)
            .collect();
        assert_eq!(jump_blocks.len(), targets.len(), "one jump block per generated site");
        for (block, &target) in jump_blocks.iter().zip(&targets) {
            sites += 1;
            let hit = cfg.edges.iter().any(|e| {
                e.from == block.id
                    && e.kind == EdgeKind::Jump
                    && matches!(e.to, EdgeTarget::Block(id) if cfg.blocks[id].start_offset == target)
            });
            if hit {
                resolved += 1;
            }
        }
    }
    verdict(
        3,
        sites >= 500 && resolved == sites && unresolved_edges == 0,
        &format!("compiler idiom PUSHn/JUMP: {resolved}/{sites} generated sites resolve, {unresolved_edges} unresolved edges"),
    );
}

// --- 4. Dense-formula oracle equivalence ------------------------------------

fn small_hyper() -> Hyper {
    Hyper {
        hidden_dim: 6,
        num_layers: 2,
        gat_leaky_slope: 0.2,
        tag_hops: 2,
        gin_eps: 0.25,
    }
}

#[test]
fn c04_dense_oracle_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC4);
    let mut max_err = 0.0f64;
    let mut checked = 0usize;
    for g in 0..100u64 {
        let sample = common::random_sample(&mut rng, 7, false);
        for kind in ModelKind::GNN_KINDS {
            let params = ModelParams::<f64>::init(kind, 7, small_hyper(), 1000 + g);
            let lib = forward(&params, &sample).unwrap();
            let oracle = common::dense_oracle(&params, &sample);
            max_err = max_err.max((lib - oracle).abs());
            checked += 1;
        }
    }
    verdict(
        4,
        max_err <= 1e-6 && checked == 500,
        &format!("dense-formula oracles: max |model − oracle| = {max_err:.3e} over {checked} kind/graph pairs"),
    );
}

// --- 5. Gradient checks ------------------------------------------------------

#[test]
fn c05_gradient_checks() {
    let start = Instant::now();
    let code = Bytecode::parse_hex(GRAD_CHECK_HEX).unwrap();
    let sample = featurize::<f64>(&code, 1, "grad-check").unwrap();
    let mut max_rel = 0.0f64;
    let mut runs = 0usize;
    for kind in ModelKind::GNN_KINDS.into_iter().chain([ModelKind::Histogram]) {
        for seed in GRAD_CHECK_SEEDS {
            max_rel = max_rel.max(grad_check(kind, &sample, seed));
            runs += 1;
        }
    }
    let elapsed = start.elapsed();
    verdict(
        5,
        max_rel <= 1e-3 && runs == 120 && elapsed < Duration::from_secs(60),
        &format!("gradient checks: max relative error {max_rel:.3e} vs central differences over {runs} kind×seed runs ({elapsed:.2?})"),
    );
}

// --- 6. Permutation invariance ------------------------------------------------

#[test]
fn c06_permutation_invariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC6);
    let mut max_dev = 0.0f64;
    for kind in ModelKind::GNN_KINDS.into_iter().chain([ModelKind::Histogram]) {
        let is_hist = kind == ModelKind::Histogram;
        let sample = common::random_sample(&mut rng, if is_hist { 4 } else { 7 }, is_hist);
        let input_dim = if is_hist { 256 } else { 7 };
        let params = ModelParams::<f64>::init(kind, input_dim, small_hyper(), 77);
        let base = forward(&params, &sample).unwrap();
        if is_hist {
            let oracle = common::dense_histogram_oracle(&params, &sample);
            assert!((base - oracle).abs() <= 1e-12, "histogram head deviates from its oracle");
        }
        let n = sample.node_count();
        for _ in 0..50 {
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rng);
            let p = forward(&params, &common::permute_sample(&sample, &perm)).unwrap();
            max_dev = max_dev.max((p - base).abs());
        }
    }
    verdict(
        6,
        max_dev <= 1e-9,
        &format!("permutation invariance: max output deviation {max_dev:.3e} over 50 node relabelings per kind"),
    );
}

// --- 7, 11, 12. CLI pipeline on the synthetic corpus -------------------------

struct PipelineArtifacts {
    dir: PathBuf,
    elapsed: Duration,
    gcn_test_accuracy: f64,
}

static PIPELINE: LazyLock<PipelineArtifacts> = LazyLock::new(|| build_pipeline("run-a"));

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_scamdetect"))
}

fn run_ok(cmd: &mut Command) {
    let out = cmd.output().expect("scamdetect binary runs");
    assert!(
        out.status.success(),
        "{cmd:?} exited with {:?}\nstderr:\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
}

/// Drives the shipped binary end to end: synthesize, split, featurize, train
/// GCN and the histogram baseline, evaluate on the held-out split, and build
/// the obfuscation-robustness report. Everything is seeded.
fn build_pipeline(tag: &str) -> PipelineArtifacts {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(format!("acceptance-{tag}"));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    let p = |name: &str| dir.join(name);

    let start = Instant::now();
    run_ok(bin()
        .args(["synth", "--benign", "200", "--phishing", "200", "--seed", "11", "-o"])
        .arg(p("corpus.jsonl")));
    run_ok(bin()
        .arg("split")
        .arg(p("corpus.jsonl"))
        .arg(p("tagged.jsonl"))
        .args(["--seed", "11"]));

    let records = load_jsonl(&p("tagged.jsonl")).unwrap();
    let part = |s: Split| -> Vec<DatasetRecord> {
        records.iter().filter(|r| r.split == Some(s)).cloned().collect()
    };
    let (train, test) = (part(Split::Train), part(Split::Test));
    assert_eq!((train.len(), test.len()), (320, 40), "default ratios give 320/40/40");
    save_jsonl(&train, &p("train.jsonl")).unwrap();
    save_jsonl(&test, &p("test.jsonl")).unwrap();

    run_ok(bin().arg("featurize").arg(p("train.jsonl")).arg("-o").arg(p("train_graphs.jsonl")));
    run_ok(bin().arg("featurize").arg(p("test.jsonl")).arg("-o").arg(p("test_graphs.jsonl")));
    for kind in ["gcn", "histogram"] {
        run_ok(bin()
            .args(["train", "--kind", kind, "--epochs", "200", "--seed", "13", "--corpus"])
            .arg(p("train_graphs.jsonl"))
            .arg("-o")
            .arg(p(&format!("{kind}.json"))));
    }
    run_ok(bin()
        .args(["eval", "--model"])
        .arg(p("gcn.json"))
        .arg("--corpus")
        .arg(p("test_graphs.jsonl"))
        .arg("-o")
        .arg(p("metrics.json")));

    std::fs::write(
        p("configs.json"),
        concat!(
            "[{\"intensity\":0.5,\"passes\":[\"junk\"],\"seed\":17},",
            "{\"intensity\":0.5,\"passes\":[\"reorder\"],\"seed\":17},",
            "{\"intensity\":0.5,\"passes\":[\"substitute\"],\"seed\":17}]",
        ),
    )
    .unwrap();
    run_ok(bin()
        .args(["robustness", "--model"])
        .arg(p("gcn.json"))
        .arg("--baseline")
        .arg(p("histogram.json"))
        .arg("--corpus")
        .arg(p("tagged.jsonl"))
        .arg("--configs")
        .arg(p("configs.json"))
        .arg("-o")
        .arg(p("report.json")));
    let elapsed = start.elapsed();

    let metrics: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(p("metrics.json")).unwrap()).unwrap();
    PipelineArtifacts {
        dir,
        elapsed,
        gcn_test_accuracy: metrics["accuracy"].as_f64().unwrap(),
    }
}

#[test]
fn c07_desk_scale_detection_analogue() {
    let artifacts = &*PIPELINE;
    verdict(
        7,
        artifacts.gcn_test_accuracy >= 0.90 && artifacts.elapsed < Duration::from_secs(300),
        &format!(
            "desk-scale analogue: GCN test accuracy {:.3} on the 320/40/40 synthetic split, pipeline took {:.1?}",
            artifacts.gcn_test_accuracy, artifacts.elapsed
        ),
    );
}

#[test]
fn c11_robustness_report() {
    let artifacts = &*PIPELINE;
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(artifacts.dir.join("report.json")).unwrap())
            .unwrap();
    let configs = report["configs"].as_array().expect("configs array");
    let mut ok = configs.len() == 3;
    ok &= report["clean"]["accuracy"].is_number();
    ok &= report["baseline_clean"]["accuracy"].is_number();
    let mut spot_checked = 0u64;
    for entry in configs {
        ok &= entry["obfuscated"]["accuracy"].is_number();
        ok &= entry["baseline_obfuscated"]["accuracy"].is_number();
        ok &= entry["delta_accuracy"].is_number();
        ok &= entry["delta_accuracy_baseline"].is_number();
        spot_checked += entry["spot_checked"].as_u64().unwrap_or(0);
    }
    ok &= spot_checked >= 1;
    verdict(
        11,
        ok,
        &format!(
            "robustness report: junk/reorder/substitute configs with clean and obfuscated metrics for both models, {spot_checked} spot-checks equivalent, deltas recorded"
        ),
    );
}

#[test]
fn c12_determinism() {
    let first = &*PIPELINE;
    let second = build_pipeline("run-b");
    let mut mismatched = Vec::new();
    for name in [
        "corpus.jsonl",
        "tagged.jsonl",
        "train_graphs.jsonl",
        "test_graphs.jsonl",
        "gcn.json",
        "histogram.json",
        "metrics.json",
        "report.json",
    ] {
        let a = std::fs::read(first.dir.join(name)).unwrap();
        let b = std::fs::read(second.dir.join(name)).unwrap();
        if a != b {
            mismatched.push(name);
        }
    }
    verdict(
        12,
        mismatched.is_empty(),
        &format!(
            "determinism: re-running the seeded pipeline reproduces every artifact byte for byte{}",
            if mismatched.is_empty() { String::new() } else { format!(" (differs: {mismatched:?})") }
        ),
    );
}

// --- 8, 9. Obfuscation preservation and drift --------------------------------

/// Interpreter-subset corpus: five handwritten programs plus twenty
/// generated benign contracts.
fn preservation_corpus() -> Vec<Bytecode> {
    let mut corpus: Vec<Bytecode> = [
        "6001600101",
        "600160005260206000f3",
        "60003560005260206000510160205260206020f3",
        "6001600657005b602a60005260206000f3",
        "6004356024350160005260206000f3",
    ]
    .iter()
    .map(|hex| Bytecode::parse_hex(hex).unwrap())
    .collect();
    for record in synth_generate(20, 1, 41) {
        if record.label == Label::Benign {
            corpus.push(Bytecode::parse_hex(&record.bytecode).unwrap());
        }
    }
    corpus
}

#[test]
fn c08_obfuscation_preserves_semantics() {
    let corpus = preservation_corpus();
    let patterns: [&[Pass]; 4] = [
        &[Pass::Junk],
        &[Pass::Reorder],
        &[Pass::Substitute],
        &[Pass::Junk, Pass::Reorder, Pass::Substitute],
    ];
    let mut runs = 0usize;
    let mut equivalent = 0usize;
    for code in &corpus {
        for passes in patterns {
            let config = ObfConfig { intensity: 0.5, passes: passes.to_vec(), seed: 23 };
            let transformed = obfuscate(code, &config).unwrap();
            runs += 1;
            if matches!(
                check_equivalence(code, &transformed, 32, 29).unwrap(),
                Verdict::Equivalent
            ) {
                equivalent += 1;
            }
        }
    }
    verdict(
        8,
        runs == corpus.len() * 4 && equivalent == runs,
        &format!(
            "obfuscation preservation: {equivalent}/{runs} contract×pass runs equivalent over 32 calldata vectors (each pass and the composite)"
        ),
    );
}

#[test]
fn c09_junk_shifts_opcode_histogram() {
    let corpus = preservation_corpus();
    let config = ObfConfig { intensity: 0.5, passes: vec![Pass::Junk], seed: 31 };
    let mut min_l1 = f64::INFINITY;
    for code in &corpus {
        let transformed = obfuscate(code, &config).unwrap();
        let before = opcode_histogram::<f64>(&disassemble(code)).vector;
        let after = opcode_histogram::<f64>(&disassemble(&transformed)).vector;
        let l1: f64 = before.iter().zip(&after).map(|(a, b)| (a - b).abs()).sum();
        min_l1 = min_l1.min(l1);
    }
    verdict(
        9,
        min_l1 > 0.0,
        &format!(
            "junk drift: histogram L1 distance > 0 for all {} contracts at intensity 0.5 (min {min_l1:.3e})",
            corpus.len()
        ),
    );
}

// --- 10. Dedup ----------------------------------------------------------------

#[test]
fn c10_dedup() {
    // Reference minimal-proxy layout detects exactly; a near-miss does not.
    let implementation = [0xABu8; 20];
    let mut proxy = hex::decode("363d3d373d3d3d363d73").unwrap();
    proxy.extend(implementation);
    proxy.extend(hex::decode("5af43d82803e903d91602b57fd5bf3").unwrap());
    let exact = is_minimal_proxy(&Bytecode::new(proxy.clone())) == Some(implementation);
    let mut padded = proxy.clone();
    padded.push(0x00);
    let near_miss_rejected = is_minimal_proxy(&Bytecode::new(padded)).is_none();

    // Same runtime under two different metadata trailers, plus two proxies
    // of one implementation: four records collapse to two.
    let with_trailer = |salt: u8| -> String {
        let mut bytes = hex::decode("6001600101600055").unwrap();
        let mut trailer = hex::decode("a264697066735822").unwrap();
        trailer.extend(std::iter::repeat(salt).take(34));
        trailer.extend(hex::decode("64736f6c6343000811").unwrap());
        let len = trailer.len() as u16;
        bytes.extend(&trailer);
        bytes.extend(len.to_be_bytes());
        format!("0x{}", hex::encode(bytes))
    };
    let record = |address: &str, bytecode: String| DatasetRecord {
        address: address.to_string(),
        bytecode,
        label: Label::Benign,
        source: Source::File,
        split: None,
    };
    let records = vec![
        record("0xproxy1", format!("0x{}", hex::encode(&proxy))),
        record("0xproxy2", format!("0x{}", hex::encode(&proxy))),
        record("0xmeta1", with_trailer(0x11)),
        record("0xmeta2", with_trailer(0x22)),
    ];
    let (kept, report) = dedup(&records);
    let collapsed = kept.len() == 2
        && report.dropped.len() == 2
        && kept[0].address == "0xproxy1"
        && kept[1].address == "0xmeta1";
    let (kept_again, report_again) = dedup(&kept);
    let idempotent = kept_again == kept && report_again.dropped.is_empty();

    verdict(
        10,
        exact && near_miss_rejected && collapsed && idempotent,
        "dedup: reference proxy layout detected exactly, metadata-trailer twins collapse, second pass drops nothing",
    );
}
