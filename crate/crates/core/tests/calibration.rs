use lineup_core::simulate::{fixed_effect_coverage, pit_replications, GeneratingValues};
use lineup_core::{doneck_dolphins_2022, SamplerConfig};

#[test]
fn fixed_effect_intervals_cover_truth() {
    let report = fixed_effect_coverage(
        &doneck_dolphins_2022(),
        &GeneratingValues::typical(),
        18,
        &SamplerConfig::desk(0),
        20,
        0.95,
        7001,
    )
    .unwrap();
    eprintln!("coverage {:?} pooled {:.3}", report.covered, report.pooled_rate());
    assert!(report.pooled_rate() >= 0.85);
    // Per effect, 16 of 20 or fewer happens with probability about 0.003 at nominal coverage.
    assert!(report.covered.iter().all(|&c| c >= 16), "{:?}", report.covered);
}

#[test]
fn pooled_pit_is_uniform_under_the_model() {
    let results = pit_replications(
        &doneck_dolphins_2022(),
        &GeneratingValues::typical(),
        18,
        &SamplerConfig::desk(0),
        20,
        9001,
    )
    .unwrap();
    let passing = results.iter().filter(|r| r.p_value > 0.01).count();
    eprintln!("{:?}", results.iter().map(|r| r.p_value).collect::<Vec<_>>());
    assert!(passing >= 18, "{passing}/20 replications pass");
}
