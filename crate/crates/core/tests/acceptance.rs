//! Acceptance checks. Runs as a plain binary and prints one PASS/FAIL line
//! per criterion; exits non-zero if any fails.

mod common;

use std::collections::{HashMap, HashSet};
use std::panic::{self, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use subreg::normalizer::collapse_whitespace;
use subreg::sampler::{candidate_distribution, sample_lattice};
use subreg::seed::make_seed;
use subreg::unigram::em_step;
use subreg::vocab::{PieceId, UNK_ID};
use subreg::{
    normalize, BpeModel, BpeTrainer, Lattice, NormalizedText, SampleSize, SamplingConfig, TrainerConfig,
    TrainingEvent, UnigramModel, UnigramTrainer, Vocabulary,
};

use common::{best, enumerate, expected_counts, linf, log_partition, random_sentence, random_vocab, ranked};

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit_secs: u64, what: &str) -> Result<(), String> {
    check(elapsed.as_secs_f64() < limit_secs as f64, || {
        format!("{what} took {:.1}s, limit {limit_secs}s", elapsed.as_secs_f64())
    })
}

fn oracle_equivalence() -> Outcome {
    const TOL: f64 = 1e-9;
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut ties = 0;
    for case in 0..1000 {
        let vocab = random_vocab(&mut rng);
        let raw = random_sentence(&mut rng, 12);
        let text = normalize(&raw).unwrap();
        let lattice = Lattice::build(&text, &vocab);
        let paths = enumerate(&text, &vocab);
        let ctx = || format!("case {case}, sentence {raw:?}");

        let want = best(&paths);
        let got = lattice.viterbi();
        check(got.piece_ids == want.ids, || format!("{}: viterbi {:?} != {:?}", ctx(), got.piece_ids, want.ids))?;
        check((got.log_prob - want.log_prob).abs() <= TOL, || format!("{}: viterbi score", ctx()))?;

        let sorted = ranked(&paths);
        if sorted.len() > 1 && (sorted[0].log_prob - sorted[1].log_prob).abs() < 1e-12 {
            ties += 1;
        }
        let n = 1 + case % 8;
        let nbest = lattice.nbest(n);
        check(nbest.len() == n.min(paths.len()), || format!("{}: nbest({n}) returned {}", ctx(), nbest.len()))?;
        let distinct: HashSet<&Vec<PieceId>> = nbest.iter().map(|p| &p.piece_ids).collect();
        check(distinct.len() == nbest.len(), || format!("{}: nbest has duplicates", ctx()))?;
        for (i, p) in nbest.iter().enumerate() {
            check((p.log_prob - sorted[i].log_prob).abs() <= TOL, || {
                format!("{}: nbest rank {i} score {} != {}", ctx(), p.log_prob, sorted[i].log_prob)
            })?;
            let real = paths.iter().find(|q| q.ids == p.piece_ids);
            check(real.is_some_and(|q| (q.log_prob - p.log_prob).abs() <= TOL), || {
                format!("{}: nbest path {:?} is not a segmentation", ctx(), p.piece_ids)
            })?;
        }

        let marginal = lattice.marginal();
        let log_z = log_partition(&paths);
        check((marginal.log_z - log_z).abs() <= TOL, || {
            format!("{}: log Z {} != {}", ctx(), marginal.log_z, log_z)
        })?;
        let want_counts = expected_counts(&paths);
        let keys: HashSet<PieceId> = want_counts.keys().chain(marginal.expected_counts.keys()).copied().collect();
        for id in keys {
            let a = marginal.expected_counts.get(&id).copied().unwrap_or(0.0);
            let b = want_counts.get(&id).copied().unwrap_or(0.0);
            check((a - b).abs() <= TOL, || format!("{}: expected count of {id}: {a} != {b}", ctx()))?;
        }
    }
    let elapsed = start.elapsed();
    within(elapsed, 30, "oracle comparison")?;
    Ok(format!("1000 instances, {ties} with tied best paths, {:.2}s", elapsed.as_secs_f64()))
}

/// Small lattices with at least `min_paths` segmentations and a gap after
/// rank `gap_after` (so the top set is well defined).
fn fixed_lattices(seed: u64, count: usize, min_paths: usize, gap_after: usize) -> Vec<(Lattice, Vec<common::Path>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    while out.len() < count {
        let vocab = random_vocab(&mut rng);
        let raw = random_sentence(&mut rng, 8);
        let text = normalize(&raw).unwrap();
        let paths = ranked(&enumerate(&text, &vocab));
        if paths.len() < min_paths || paths.len() > 400 {
            continue;
        }
        if gap_after > 0 {
            let well_separated = paths
                .windows(2)
                .take(gap_after)
                .all(|w| w[0].log_prob - w[1].log_prob > 1e-6);
            if !well_separated {
                continue;
            }
        }
        out.push((Lattice::build(&text, &vocab), paths));
    }
    out
}

fn ffbs_exactness() -> Outcome {
    const DRAWS: usize = 100_000;
    let start = Instant::now();
    let lattices = fixed_lattices(2, 50, 2, 0);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for (i, (lattice, paths)) in lattices.iter().enumerate() {
        let log_z = log_partition(paths);
        let probs: HashMap<Vec<PieceId>, f64> = paths
            .iter()
            .map(|p| (p.ids.clone(), (p.log_prob - log_z).exp()))
            .collect();
        let mut counts: HashMap<Vec<PieceId>, usize> = HashMap::new();
        for _ in 0..DRAWS {
            *counts.entry(lattice.ffbs_sample(&mut rng).piece_ids).or_insert(0) += 1;
        }
        let d = linf(&counts, DRAWS, &probs);
        worst = worst.max(d);
        check(d <= 0.01, || format!("lattice {i}: L-inf {d:.4}"))?;
    }
    let elapsed = start.elapsed();
    within(elapsed, 60, "FFBS draws")?;
    Ok(format!("50 lattices x 1e5 draws, max L-inf {worst:.4}, {:.2}s", elapsed.as_secs_f64()))
}

fn sampler_law() -> Outcome {
    const DRAWS: usize = 100_000;
    const L: usize = 4;
    let lattices = fixed_lattices(4, 5, L + 1, L);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for (i, (lattice, paths)) in lattices.iter().enumerate() {
        let top = &paths[..L];
        for alpha in [0.0, 0.1, 0.5, 1.0, 5.0] {
            let norm = common::log_sum_exp(top.iter().map(|p| alpha * p.log_prob));
            let probs: HashMap<Vec<PieceId>, f64> = top
                .iter()
                .map(|p| (p.ids.clone(), (alpha * p.log_prob - norm).exp()))
                .collect();
            if alpha == 0.0 {
                let dist = candidate_distribution(lattice, L, 0.0);
                check(dist.iter().all(|(_, p)| *p == 1.0 / L as f64), || {
                    format!("lattice {i}: alpha = 0 weights are not exactly uniform")
                })?;
            }
            let config = SamplingConfig::new(SampleSize::Finite(L), alpha);
            let mut counts: HashMap<Vec<PieceId>, usize> = HashMap::new();
            for _ in 0..DRAWS {
                let path = sample_lattice(lattice, &config, &mut rng).unwrap();
                *counts.entry(path.piece_ids).or_insert(0) += 1;
            }
            let d = linf(&counts, DRAWS, &probs);
            worst = worst.max(d);
            check(d <= 0.01, || format!("lattice {i}, alpha {alpha}: L-inf {d:.4}"))?;
        }
        let config = SamplingConfig::new(SampleSize::Finite(L), 100.0);
        let viterbi = lattice.viterbi().piece_ids;
        let hits = (0..DRAWS)
            .filter(|_| sample_lattice(lattice, &config, &mut rng).unwrap().piece_ids == viterbi)
            .count();
        let rate = hits as f64 / DRAWS as f64;
        check(rate >= 0.999, || format!("lattice {i}: alpha = 100 picked Viterbi {rate}"))?;
    }
    Ok(format!("l = {L}, 5 lattices x 5 alphas x 1e5 draws, max L-inf {worst:.4}"))
}

fn em_behavior() -> Outcome {
    let micro = vec![NormalizedText::from_marked("ab")];
    let uniform = Vocabulary::from_weights(vec![("a".into(), 1.0), ("b".into(), 1.0), ("ab".into(), 1.0)]).unwrap();
    let (next, _) = em_step(&micro, &uniform).unwrap();
    let p = |s: &str| next.log_prob(next.id_of(s).unwrap()).exp();
    for (piece, want) in [("ab", 0.6), ("a", 0.2), ("b", 0.2)] {
        check((p(piece) - want).abs() <= 1e-15, || format!("micro example: p({piece}) = {}", p(piece)))?;
    }

    let lines = common::corpus_prefix(64 * 1024);
    let mut config = TrainerConfig::new(1000);
    config.em_subiterations = 4;
    let mut blocks: HashMap<usize, Vec<f64>> = HashMap::new();
    UnigramTrainer::new(config)
        .train_with_observer(&lines, |event| {
            if let TrainingEvent::EmStep {
                iteration,
                loglik_per_sentence,
                ..
            } = event
            {
                blocks.entry(*iteration).or_default().push(*loglik_per_sentence);
            }
        })
        .map_err(|e| e.to_string())?;
    let mut steps = 0;
    for (iteration, lls) in &blocks {
        for w in lls.windows(2) {
            steps += 1;
            check(w[1] >= w[0] - 1e-9, || {
                format!("iteration {iteration}: log-likelihood fell from {} to {}", w[0], w[1])
            })?;
        }
    }

    let corpus: Vec<NormalizedText> = lines.iter().map(|l| normalize(l).unwrap()).collect();
    let mut vocab = make_seed(&corpus, 20_000, 16).map_err(|e| e.to_string())?;
    let mut previous = f64::NEG_INFINITY;
    for step in 0..8 {
        let (next, ll) = em_step(&corpus, &vocab).map_err(|e| e.to_string())?;
        let ll = ll / corpus.len() as f64;
        check(ll >= previous - 1e-9, || format!("seed EM step {step}: {previous} -> {ll}"))?;
        previous = ll;
        vocab = next;
    }
    Ok(format!(
        "micro example exact; {} lines, {} outer iterations, {steps} EM transitions non-decreasing",
        lines.len(),
        blocks.len()
    ))
}

struct Trained {
    unigram: UnigramModel,
    bpe: BpeModel,
}

fn training_pipeline(out: &mut Option<Trained>) -> Outcome {
    let lines: Vec<&str> = common::corpus_text().lines().collect();
    let start = Instant::now();
    let model = UnigramTrainer::new(TrainerConfig::new(4000)).train(&lines).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    within(elapsed, 300, "training")?;

    let vocab = model.vocab();
    check(vocab.len() == 4000, || format!("vocabulary has {} ids", vocab.len()))?;
    let mut chars: HashSet<char> = HashSet::new();
    for line in &lines {
        chars.extend(normalize(line).unwrap().chars().iter().copied());
    }
    for c in &chars {
        check(vocab.id_of(&c.to_string()).is_some(), || format!("character {c:?} missing"))?;
    }
    let total = vocab.total_probability();
    check((total - 1.0).abs() <= 1e-6, || format!("probabilities sum to {total}"))?;

    let again = UnigramTrainer::new(TrainerConfig::new(4000)).train(&lines).map_err(|e| e.to_string())?;
    check(again.to_text() == model.to_text(), || "retraining changed the model file".into())?;

    let bpe = BpeTrainer::new(4000 - subreg::vocab::NUM_RESERVED)
        .train(&lines)
        .map_err(|e| e.to_string())?;
    *out = Some(Trained { unigram: model, bpe });
    Ok(format!(
        "{} lines, 4000 ids ({} characters), sum {total:.12}, trained in {:.1}s, rerun identical",
        lines.len(),
        chars.len(),
        elapsed.as_secs_f64()
    ))
}

fn compression_parity(models: &Trained) -> Outcome {
    let lines: Vec<&str> = common::corpus_text().lines().collect();
    let mut unigram = 0usize;
    let mut bpe = 0usize;
    for line in &lines {
        unigram += models.unigram.encode(line).unwrap().len();
        bpe += models.bpe.encode(line).unwrap().len();
    }
    let u = unigram as f64 / lines.len() as f64;
    let b = bpe as f64 / lines.len() as f64;
    let ratio = u / b;
    check((ratio - 1.0).abs() <= 0.10, || format!("unigram {u:.3} vs bpe {b:.3} pieces per sentence"))?;
    Ok(format!("unigram {u:.3} vs bpe {b:.3} pieces per sentence (ratio {ratio:.4})"))
}

fn sampling_variety(models: &Trained) -> Outcome {
    let sentence = "Alice was beginning to get very tired of sitting by her sister";
    let config = SamplingConfig::new(SampleSize::Infinite, 0.2);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut seen = HashSet::new();
    for _ in 0..100 {
        let path = subreg::sampler::sample(&models.unigram, sentence, &config, &mut rng).unwrap();
        let decoded = models.unigram.decode(&path.piece_ids).unwrap();
        check(decoded == sentence, || format!("sample decoded to {decoded:?}"))?;
        seen.insert(path.piece_ids);
    }
    check(seen.len() >= 3, || format!("only {} distinct segmentations", seen.len()))?;
    Ok(format!("{} distinct segmentations in 100 samples", seen.len()))
}

/// 10,000 lines: corpus lines, every tenth with characters the models never
/// saw spliced in.
fn round_trip_lines() -> Vec<String> {
    let unseen = ['ж', '日', 'ß', 'λ', '☃'];
    common::corpus_text()
        .lines()
        .step_by(2)
        .take(10_000)
        .enumerate()
        .map(|(i, line)| {
            if i % 10 == 0 {
                let c = unseen[i / 10 % unseen.len()];
                format!("{c}{line} x{c}y {c}")
            } else {
                line.to_owned()
            }
        })
        .collect()
}

fn round_trip(models: &Trained) -> Outcome {
    let lines = round_trip_lines();
    check(lines.len() == 10_000, || format!("only {} lines", lines.len()))?;
    let mut lossy = [0usize; 2];
    for line in &lines {
        let want = collapse_whitespace(line);
        let encoded = [models.unigram.encode_ids(line).unwrap(), models.bpe.encode_ids(line).unwrap()];
        let decoded = [
            models.unigram.decode(&encoded[0]).unwrap(),
            models.bpe.decode(&encoded[1]).unwrap(),
        ];
        for k in 0..2 {
            let name = ["unigram", "bpe"][k];
            if encoded[k].contains(&UNK_ID) {
                lossy[k] += 1;
                // Lossy lines still keep everything except the unknown characters.
                let masked: String = want
                    .chars()
                    .map(|c| if !c.is_whitespace() && !models_know(models, k, c) { '\u{2047}' } else { c })
                    .collect();
                check(decoded[k] == masked, || format!("{name}: lossy line {line:?} decoded to {:?}", decoded[k]))?;
            } else {
                check(decoded[k] == want, || format!("{name}: {line:?} decoded to {:?}", decoded[k]))?;
            }
        }
    }
    check(lossy == [1000, 1000], || format!("expected 1000 lossy lines per model, got {lossy:?}"))?;
    Ok(format!("10000 lines per model, {} identical, {} lossy lines checked with unknown marks", 10_000 - lossy[0], lossy[0]))
}

fn models_know(models: &Trained, k: usize, c: char) -> bool {
    let s = c.to_string();
    match k {
        0 => models.unigram.vocab().id_of(&s).is_some(),
        _ => models.bpe.id_of(&s).is_some(),
    }
}

fn run(name: &str, failures: &mut usize, f: impl FnOnce() -> Outcome) {
    let outcome = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
        let msg = e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panicked".into());
        Err(msg)
    });
    match outcome {
        Ok(detail) => println!("PASS {name}: {detail}"),
        Err(reason) => {
            *failures += 1;
            println!("FAIL {name}: {reason}");
        }
    }
}

fn main() {
    let mut failures = 0;
    run("oracle_equivalence", &mut failures, oracle_equivalence);
    run("ffbs_exactness", &mut failures, ffbs_exactness);
    run("sampler_law", &mut failures, sampler_law);
    run("em_behavior", &mut failures, em_behavior);
    let mut trained = None;
    run("training_pipeline", &mut failures, || training_pipeline(&mut trained));
    match &trained {
        Some(models) => {
            run("compression_parity", &mut failures, || compression_parity(models));
            run("sampling_variety", &mut failures, || sampling_variety(models));
            run("round_trip", &mut failures, || round_trip(models));
        }
        None => {
            for name in ["compression_parity", "sampling_variety", "round_trip"] {
                failures += 1;
                println!("FAIL {name}: no trained models");
            }
        }
    }
    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
