use std::sync::Arc;

use chrono::NaiveDate;
use criterion::{black_box, criterion_group, criterion_main, BatchSize, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use voltext::embedding::{train, TrainConfig};
use voltext::evaluation::{reality_check, Loss, RcConfig};
use voltext::explain::{integrated_gradients, QuadratureSpec};
use voltext::nlpml::{build_day_input, CnnConfig, CnnModel, LookupTable};
use voltext::pipeline::headline_corpus;
use voltext::series::ForecastSeries;
use voltext::synth::{generate_synthetic, SynthSpec};
use voltext::textprep::{clean_text, HeadlineProcessor, RuleSet};
use voltext::volatility::{rolling_forecast, HarModel, RollingProtocol};

fn random_model(dim: usize, len: usize) -> (CnnModel, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut table = LookupTable::new(dim);
    let tokens: Vec<String> = (0..2000).map(|i| format!("tok{i}")).collect();
    for t in &tokens {
        let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-0.5..0.5)).collect();
        table.push(t, &v);
    }
    let cfg = CnnConfig { max_len: len, ..CnnConfig::default() };
    let table = Arc::new(table);
    let model = CnnModel::init(cfg, table.clone(), 1.0, &mut rng);
    let day: Vec<String> = (0..len).map(|_| tokens[rng.gen_range(0..tokens.len())].clone()).collect();
    let input = build_day_input(&day, &table, len);
    let rows = model.resolve(&input);
    (model, rows)
}

fn cnn(c: &mut Criterion) {
    let (model, rows) = random_model(300, 500);
    c.bench_function("cnn loss and gradient, 500x300", |b| b.iter(|| model.loss_and_grad(black_box(&rows), 1.2)));

    let (model, _) = random_model(50, 200);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let day: Vec<String> = (0..200).map(|_| format!("tok{}", rng.gen_range(0..2000))).collect();
    let input = build_day_input(&day, &model.table, 200);
    let quad = QuadratureSpec::default();
    c.bench_function("integrated gradients, 50 nodes, 200x50", |b| {
        b.iter(|| integrated_gradients(&model, black_box(&input), &quad).unwrap())
    });
}

fn har(c: &mut Criterion) {
    let data = generate_synthetic(&SynthSpec { n_days: 2046 + 22 + 20, ..SynthSpec::default() }).unwrap();
    let recs = data.daily_records().unwrap();
    let protocol = RollingProtocol { train_len: 2046, oos_len: 20 };
    c.bench_function("char rolling forecast, 20 windows of 2046", |b| {
        b.iter(|| rolling_forecast(black_box(&recs), HarModel::Char, &protocol, "SYN").unwrap())
    });
}

fn reality(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let n = 300;
    let dates: Vec<NaiveDate> =
        (0..n).map(|i| NaiveDate::from_ymd_opt(2015, 1, 1).unwrap() + chrono::Days::new(i as u64)).collect();
    let actual: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..2.0)).collect();
    let noisy = |rng: &mut ChaCha8Rng, s: f64| -> Vec<f64> { actual.iter().map(|a| a + rng.gen_range(-s..s)).collect() };
    let cand = ForecastSeries::new("X", "cand", dates.clone(), actual.clone(), noisy(&mut rng, 0.3)).unwrap();
    let benches: Vec<ForecastSeries> = (0..8)
        .map(|k| ForecastSeries::new("X", format!("b{k}"), dates.clone(), actual.clone(), noisy(&mut rng, 0.4)).unwrap())
        .collect();
    let cfg = RcConfig::default();
    c.bench_function("reality check, 300 days x 8 benchmarks, 999 resamples", |b| {
        b.iter(|| reality_check(&cand, black_box(&benches), Loss::Mse, None, &cfg).unwrap())
    });
}

fn text(c: &mut Criterion) {
    let rules = RuleSet::default();
    let body = "Shares of Example Corp fell 3.2% on Tuesday after the company cut guidance.\n\
                (END) Dow Jones Newswires\nContact: press@example.com\nCopyright 2016 Dow Jones & Company"
        .repeat(20);
    c.bench_function("clean 20 news bodies", |b| b.iter(|| clean_text(black_box(&body), &rules)));

    let data = generate_synthetic(&SynthSpec { n_days: 500, ..SynthSpec::default() }).unwrap();
    let corpus = headline_corpus(&data.news, &HeadlineProcessor::default());
    let cfg = TrainConfig { dim: 50, epochs: 1, min_count: 1, ..TrainConfig::default() };
    c.bench_function("skip-gram epoch, synthetic headlines", |b| {
        b.iter_batched(|| corpus.clone(), |corp| train(&corp, &cfg).unwrap(), BatchSize::LargeInput)
    });
}

criterion_group!(benches, cnn, har, reality, text);
criterion_main!(benches);
