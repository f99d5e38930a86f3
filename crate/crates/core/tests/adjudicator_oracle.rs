//! The adjudicator against a frame-by-frame brute-force oracle.

mod support;

use std::time::Instant;

use roadsense_core::adjudicator::{adjudicate, adjudicate_all, AreaIndex, Verdict};
use roadsense_core::domain::ScenarioConfig;
use roadsense_core::Execution;
use support::adjudication::oracle_cases;

#[test]
fn thousand_random_cases_match_oracle() {
    let began = Instant::now();
    let sc = ScenarioConfig::bundled();
    let areas = AreaIndex::new(&sc.layout);
    let cases = oracle_cases(1000, 0xAD1_0DD, &sc);
    let mut collisions = 0;
    let mut marginal = 0;
    for (case, want) in &cases {
        let got = adjudicate(&case.trajectory, &case.vehicle, &areas).unwrap();
        assert_eq!((got.verdict, got.tick, got.marginal), *want);
        collisions += (want.0 == Verdict::Incorrect) as usize;
        marginal += want.2 as usize;
    }
    // the generator exercises every branch
    assert!(collisions > 100 && collisions < 900, "collisions {collisions}");
    assert!(marginal > 10, "marginal {marginal}");

    let cases: Vec<_> = cases.into_iter().map(|(c, _)| c).collect();
    let seq = adjudicate_all(&cases, &areas, Execution::Sequential);
    let par = adjudicate_all(&cases, &areas, Execution::Parallel);
    assert_eq!(seq, par);
    assert!(began.elapsed().as_secs() < 10);
}
