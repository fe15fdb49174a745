use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vmspos_core::cohort::{assign_positions, build_cohort_set, CohortName, RandomConfig};
use vmspos_core::corpus::{build_corpus, FilterCriteria, StudyCorpus};
use vmspos_core::exec::Execution;
use vmspos_core::ivtff::{parse_document, MarkerConfig};
use vmspos_core::stats::{
    length_distribution, pvalue_matrix, token_propensity_scan, BetaPrior, Thresholds,
};

const GLYPHS: &[u8] = b"acdehiklmnopqrsty";

/// Synthetic herbal-style transliteration with a Zipf-ish vocabulary.
fn synthetic_text(pages: usize, seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vocab: Vec<String> = (0..3000)
        .map(|_| {
            let len = rng.random_range(1..=9);
            (0..len)
                .map(|_| GLYPHS[rng.random_range(0..GLYPHS.len())] as char)
                .collect()
        })
        .collect();
    let mut s = String::new();
    for p in 0..pages {
        let folio = format!("f{}r", p + 1);
        s.push_str(&format!("<{folio}> <! $I=H $H=1>\n"));
        let lines = rng.random_range(8..20);
        for l in 0..lines {
            let ty = if l == 0 { "@P0" } else { "+P0" };
            s.push_str(&format!("<{folio}.{},{ty}> ", l + 1));
            let words = rng.random_range(4..12);
            for w in 0..words {
                let rank = (vocab.len() as f64 * rng.random::<f64>().powi(3)) as usize;
                s.push_str(&vocab[rank]);
                if w + 1 < words {
                    let r: f64 = rng.random();
                    s.push_str(if r < 0.05 { "," } else if r < 0.08 { "<->" } else { "." });
                }
            }
            if l + 1 == lines {
                s.push_str("<$>");
            }
            s.push('\n');
        }
    }
    s
}

fn corpus(pages: usize) -> StudyCorpus {
    let doc = parse_document(synthetic_text(pages, 7).as_bytes(), &MarkerConfig::default()).unwrap();
    build_corpus(&doc, &FilterCriteria::default(), Execution::Sequential)
        .unwrap()
        .0
}

fn bench(c: &mut Criterion) {
    let corpus = corpus(400);
    let ann = assign_positions(&corpus, Execution::Sequential);
    let set = build_cohort_set(&corpus, &ann, &RandomConfig::default()).unwrap();
    let middle = set.get(CohortName::Middle).unwrap();
    let last = set.get(CohortName::Last).unwrap();
    let thresholds = Thresholds::default();
    let dists: Vec<_> = set
        .cohorts
        .iter()
        .map(|c| length_distribution(c, &corpus).map_err(|e| (c.name, e)))
        .collect();

    let mut group = c.benchmark_group("propensity_scan");
    for exec in [Execution::Sequential, Execution::Parallel] {
        group.bench_with_input(BenchmarkId::from_parameter(format!("{exec:?}")), &exec, |b, &exec| {
            b.iter(|| {
                token_propensity_scan(last, middle, &corpus, &thresholds, BetaPrior::UNIFORM, exec)
                    .unwrap()
            })
        });
    }
    group.finish();

    let mut group = c.benchmark_group("pvalue_matrix");
    for exec in [Execution::Sequential, Execution::Parallel] {
        group.bench_with_input(BenchmarkId::from_parameter(format!("{exec:?}")), &exec, |b, &exec| {
            b.iter(|| pvalue_matrix(&dists, &thresholds, exec).unwrap())
        });
    }
    group.finish();

    let mut group = c.benchmark_group("positions");
    for exec in [Execution::Sequential, Execution::Parallel] {
        group.bench_with_input(BenchmarkId::from_parameter(format!("{exec:?}")), &exec, |b, &exec| {
            b.iter(|| assign_positions(&corpus, exec))
        });
    }
    group.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
